//! Shared fixtures for the CLI test targets.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use satprobe_core::datasets::{build_words_dataset, WordCorpus};
use satprobe_core::pipeline::build_vocab;
use satprobe_core::tinylm::ModelConfig;
use satprobe_core::ModelWeights;

/// Letters and corpus for the copy-model Words fixture.
pub const COPY_ALPHABET: &str = "enost";
pub const COPY_CORPUS: &str = "seen\nteen\neven\noven\nnoon\nnote\nsent\ntone\nstone\neast\nonset\nnest\n";

/// Word each letter's value is routed to. Every word ends in a letter with a
/// weaker key, so a prompt succeeds exactly when its ends-with letter is
/// that word's last letter.
pub const COPY_ROUTES: [(char, &str); 5] = [('e', "even"), ('n', "noon"), ('o', "oven"), ('s', "seen"), ('t', "teen")];

/// Attention key strength per letter; the final position attends most to the
/// letter with the largest key.
fn key_strength(letter: char) -> f64 {
    match letter {
        'e' => 3.0,
        'n' => 1.0,
        'o' => 2.0,
        's' => 5.0,
        't' => 4.0,
        _ => 0.0,
    }
}

/// One-layer, one-head model over one-hot embeddings. The final prompt
/// token queries the constraint letters; each letter's value is routed to its
/// word in [`COPY_ROUTES`], so the completion is the word of whichever letter
/// received the most attention.
pub fn copy_model(corpus_words: &[String]) -> ModelWeights {
    let prompts = build_words_dataset(COPY_ALPHABET).unwrap();
    let vocab = build_vocab(&prompts, corpus_words);
    let v = vocab.len();
    let cfg = ModelConfig::new(v, v, 1, 1).with_seed(0);
    let mut w = ModelWeights::zeros(&cfg).unwrap();
    let scale = (v as f64).sqrt();
    for i in 0..v {
        w.embedding.set(i, i, 1.0);
        w.unembedding.set(i, i, 1.0);
    }
    let head = &mut w.layers[0].heads[0];
    head.w_q.set(vocab.id("is"), 0, 1.0);
    for i in 0..v {
        head.w_v.set(i, i, 1.0);
    }
    for (letter, word) in COPY_ROUTES {
        let id = vocab.id(&letter.to_string());
        head.w_k.set(id, 0, 1.5 * key_strength(letter) * scale);
        head.w_o.set(id, vocab.id(word), 12.0);
    }
    w
}

/// Writes the corpus, the copy model and a Words config into `dir`.
pub fn write_copy_fixture(dir: &Path, extra_eval: &str) -> std::path::PathBuf {
    fs::write(dir.join("corpus.txt"), COPY_CORPUS).unwrap();
    let corpus = WordCorpus::load(dir.join("corpus.txt")).unwrap();
    let model = copy_model(corpus.words());
    satprobe_core::tinylm::save_weights(&model, dir.join("copy.bin")).unwrap();
    let config = dir.join("words.toml");
    fs::write(
        &config,
        format!(
            "out = \"out\"\n\n[dataset]\nbuilder = \"words\"\nalphabet = \"{COPY_ALPHABET}\"\ncorpus = \"corpus.txt\"\n\n\
             [model]\nspec = \"copy.bin\"\nmax_new_tokens = 2\n\n[eval]\n{extra_eval}\n"
        ),
    )
    .unwrap();
    config
}

//! The six subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use satprobe_core::datasets::{
    build_single_constraint_dataset, build_words_dataset, constrainedness, load_prompts, KnowledgeBase,
    PromptTemplate, QueryPrompt, SingleConstraintOptions, WordCorpus,
};
use satprobe_core::eval::report::{render_bins_svg, write_bins, write_grid, write_per_seed, write_report_table, write_sweep};
use satprobe_core::eval::{bin_accuracy, early_stopping_sweep, run_experiment, scaling_grid_from, BinKey};
use satprobe_core::pipeline::{build_vocab, label_record, trace_prompts, TraceOptions};
use satprobe_core::synthetic::{planted_dataset, PlantedConfig};
use satprobe_core::tinylm::{init_random, load_weights, ModelConfig};
use satprobe_core::trace::{read_traces_with, write_traces, ReadOptions, TraceDataset, VerifierKind};
use satprobe_core::ModelWeights;

use crate::config::{DatasetBuilder, ExperimentConfig, ModelSource};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Trace,
    Label,
    Eval,
    SweepLayers,
    Grid,
    Bin,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    /// Overrides the configured output directory.
    pub out: Option<PathBuf>,
    /// Overrides the configured split seed.
    pub seed: Option<u64>,
}

struct Context {
    cfg: ExperimentConfig,
    base: PathBuf,
    out: PathBuf,
    seed: u64,
}

impl Context {
    fn new(opts: &RunOptions) -> Result<Self, CliError> {
        let cfg = ExperimentConfig::load(&opts.config)?;
        let base = opts.config.parent().map(Path::to_path_buf).unwrap_or_default();
        let out = opts.out.clone().unwrap_or_else(|| base.join(&cfg.out));
        let seed = opts.seed.unwrap_or(cfg.seed);
        Ok(Self { cfg, base, out, seed })
    }

    fn trace_path(&self) -> PathBuf {
        match (&self.cfg.dataset.builder, &self.cfg.dataset.traces) {
            (DatasetBuilder::Traces { path }, _) => self.base.join(path),
            (_, Some(path)) => self.base.join(path),
            _ => self.out.join("traces.jsonl"),
        }
    }

    fn read_options(&self) -> ReadOptions {
        ReadOptions { row_sum_tolerance: self.cfg.dataset.row_sum_tolerance }
    }

    fn read(&self, path: &Path) -> Result<TraceDataset, CliError> {
        Ok(read_traces_with(path, &self.read_options())?)
    }

    fn planted(&self) -> Option<PlantedConfig> {
        let DatasetBuilder::Planted {
            n_records,
            n_layers,
            n_heads,
            seed,
            density,
            magnitude,
            signal_layers,
            popularity_snr,
        } = &self.cfg.dataset.builder
        else {
            return None;
        };
        let mut pc = PlantedConfig::new(*n_records, *n_layers, *n_heads, *seed);
        if let Some(d) = density {
            pc.density = *d;
        }
        if let Some(m) = magnitude {
            pc.magnitude = *m;
        }
        if let Some([a, b]) = signal_layers {
            pc.signal_layers = *a..*b;
        }
        if let Some(s) = popularity_snr {
            pc.popularity_snr = *s;
        }
        Some(pc)
    }

    /// Reads the trace file. Planted fixtures that were never written out
    /// are regenerated in memory, which yields the same records.
    fn dataset(&self) -> Result<TraceDataset, CliError> {
        let path = self.trace_path();
        match self.planted() {
            Some(pc) if !path.exists() => Ok(planted_dataset(&pc).dataset),
            _ => self.read(&path),
        }
    }

    fn knowledge_base(&self) -> Result<Option<KnowledgeBase>, CliError> {
        let path = match &self.cfg.dataset.builder {
            DatasetBuilder::Kb { kb, .. } => kb,
            DatasetBuilder::Prompts { kb: Some(kb), .. } => kb,
            _ => return Ok(None),
        };
        Ok(Some(KnowledgeBase::load(self.base.join(path))?))
    }
}

/// Output files staged in memory and written together, so a failing
/// command leaves nothing half-written behind.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        let result = (|| {
            for (path, bytes) in &self.files {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
                }
                fs::write(path, bytes).map_err(|source| CliError::Io { path: path.clone(), source })?;
                written.push(path.clone());
            }
            Ok(())
        })();
        if let Err(e) = result {
            for path in &written {
                let _ = fs::remove_file(path);
            }
            return Err(e);
        }
        Ok(written)
    }
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut out = Vec::new();
    f(&mut out).expect("writing to memory cannot fail");
    out
}

/// Writes traces through a sibling temporary file and renames it into place.
fn write_traces_atomic(ds: &TraceDataset, path: &Path) -> Result<PathBuf, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".partial-{name}"));
    if let Err(e) = write_traces(ds, &tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    fs::rename(&tmp, path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(path.to_path_buf())
}

fn build_prompts(ctx: &Context) -> Result<(Vec<QueryPrompt>, Vec<String>), CliError> {
    match &ctx.cfg.dataset.builder {
        DatasetBuilder::Words { alphabet, corpus } => {
            let mut prompts = build_words_dataset(alphabet)?;
            let Some(path) = corpus else { return Ok((prompts, Vec::new())) };
            let corpus = WordCorpus::load(ctx.base.join(path))?;
            for p in &mut prompts {
                let letter = |kind| {
                    p.constraints.iter().find(|c| c.verifier == kind).and_then(|c| c.target.chars().next())
                };
                if let (Some(s), Some(e)) = (letter(VerifierKind::CharStartsWith), letter(VerifierKind::CharEndsWith)) {
                    p.constrainedness = Some(constrainedness(&corpus, s, e));
                }
            }
            Ok((prompts, corpus.words().to_vec()))
        }
        DatasetBuilder::Kb { template, placeholder, field, min_popularity, .. } => {
            let kb = ctx.knowledge_base()?.expect("kb builder has a knowledge base");
            let template = PromptTemplate::new(template.clone(), &[(placeholder.as_str(), VerifierKind::ExactMatch)])?;
            let opts = SingleConstraintOptions { min_popularity: *min_popularity, id_prefix: "kb-".into() };
            let prompts = build_single_constraint_dataset(&kb, &template, field, &opts)?;
            Ok((prompts, kb.entities().map(str::to_string).collect()))
        }
        DatasetBuilder::Prompts { path, .. } => Ok((load_prompts(ctx.base.join(path))?, Vec::new())),
        DatasetBuilder::Planted { .. } | DatasetBuilder::Traces { .. } => {
            unreachable!("handled by the caller")
        }
    }
}

fn build_model(ctx: &Context, vocab_len: usize) -> Result<(ModelWeights, String), CliError> {
    let section = ctx.cfg.model.as_ref().ok_or_else(|| CliError::Config("trace needs a [model] section".into()))?;
    let source = ModelSource::parse(&section.spec, &ctx.base)?;
    let weights = match &source {
        ModelSource::Random { seed, d_model, n_layers, n_heads } => {
            let mut mc = ModelConfig::new(vocab_len, *d_model, *n_layers, *n_heads).with_seed(*seed);
            mc.activation = section.activation;
            mc.attn_scale = section.attn_scale;
            init_random(&mc)?
        }
        ModelSource::File(path) => load_weights(path)?,
    };
    let name = section.name.clone().unwrap_or_else(|| match &source {
        ModelSource::Random { .. } => section.spec.clone(),
        ModelSource::File(path) => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    });
    Ok((weights, name))
}

fn cmd_trace(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let path = ctx.trace_path();
    if let Some(pc) = ctx.planted() {
        return Ok(vec![write_traces_atomic(&planted_dataset(&pc).dataset, &path)?]);
    }
    if let DatasetBuilder::Traces { .. } = ctx.cfg.dataset.builder {
        return Err(CliError::Config("the traces builder has nothing to trace; use label or eval".into()));
    }
    let (prompts, extra) = build_prompts(ctx)?;
    let vocab = build_vocab(&prompts, &extra);
    let (weights, model_name) = build_model(ctx, vocab.len())?;
    let kb = ctx.knowledge_base()?;
    let opts = TraceOptions {
        max_new_tokens: ctx.cfg.model.as_ref().map_or(3, |m| m.max_new_tokens),
        model_name,
    };
    log::info!("tracing {} prompts with a {}-token vocabulary", prompts.len(), vocab.len());
    let ds = trace_prompts(&prompts, &weights, &vocab, &opts, kb.as_ref())?;
    Ok(vec![write_traces_atomic(&ds, &path)?])
}

fn cmd_label(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let mut ds = ctx.dataset()?;
    let kb = ctx.knowledge_base()?;
    for r in &mut ds.records {
        label_record(r, kb.as_ref())?;
    }
    Ok(vec![write_traces_atomic(&ds, &ctx.trace_path())?])
}

fn cmd_eval(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let ds = ctx.dataset()?;
    let e = &ctx.cfg.eval;
    let report = run_experiment(
        &ds,
        &ctx.cfg.dataset_name(),
        &e.predictor_specs()?,
        &e.split_plan(ctx.seed),
        e.n_seeds,
        &e.probe_settings(),
    )?;
    for p in &report.predictors {
        log::info!("{}: AUROC {:.4} ± {:.4}", p.predictor, p.auroc.mean, p.auroc.stderr);
    }
    let bins = bin_accuracy(&ds, BinKey::AttentionTotal, e.bins)?;
    let reports = [report];
    let mut out = Outputs::default();
    out.add(ctx.out.join("report.tsv"), buffer(|w| write_report_table(&reports, w)));
    out.add(ctx.out.join("per_seed.tsv"), buffer(|w| write_per_seed(&reports, w)));
    out.add(
        ctx.out.join("attention_accuracy.svg"),
        render_bins_svg("Accuracy by attention to constraints", "attention percentile bin", &bins).into_bytes(),
    );
    out.commit()
}

fn cmd_sweep(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let ds = ctx.dataset()?;
    let e = &ctx.cfg.eval;
    let layers: Vec<usize> = match &e.sweep_layers {
        Some(l) => l.clone(),
        None => (1..=ds.dims().map_or(0, |(l, _)| l)).collect(),
    };
    let points = early_stopping_sweep(&ds, e.sweep_kind, &layers, &e.split_plan(ctx.seed), e.sweep_seeds, &e.probe_settings())?;
    let mut out = Outputs::default();
    out.add(ctx.out.join("sweep_layers.tsv"), buffer(|w| write_sweep(&points, w)));
    out.commit()
}

fn cmd_grid(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let g = ctx.cfg.grid.as_ref().ok_or_else(|| CliError::Config("grid needs a [grid] section".into()))?;
    let small = ctx.read(&ctx.base.join(&g.small))?;
    let large = ctx.read(&ctx.base.join(&g.large))?;
    let grid = scaling_grid_from(&small, &large, g.cells)?;
    let mut out = Outputs::default();
    out.add(ctx.out.join("grid.tsv"), buffer(|w| write_grid(&grid, w)));
    out.commit()
}

fn cmd_bin(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let e = &ctx.cfg.eval;
    let key = BinKey::parse(&e.bin_key).ok_or_else(|| CliError::Config(format!("unknown bin_key {:?}", e.bin_key)))?;
    let ds = ctx.dataset()?;
    let bins = bin_accuracy(&ds, key, e.bins)?;
    let mut out = Outputs::default();
    out.add(ctx.out.join(format!("bins_{}.tsv", key.as_str())), buffer(|w| write_bins(key.as_str(), &bins, w)));
    out.add(
        ctx.out.join(format!("bins_{}.svg", key.as_str())),
        render_bins_svg(&format!("Accuracy by {}", key.as_str()), key.as_str(), &bins).into_bytes(),
    );
    out.commit()
}

/// Runs one command and returns the files it wrote.
pub fn run(cmd: Command, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    let ctx = Context::new(opts)?;
    match cmd {
        Command::Trace => cmd_trace(&ctx),
        Command::Label => cmd_label(&ctx),
        Command::Eval => cmd_eval(&ctx),
        Command::SweepLayers => cmd_sweep(&ctx),
        Command::Grid => cmd_grid(&ctx),
        Command::Bin => cmd_bin(&ctx),
    }
}

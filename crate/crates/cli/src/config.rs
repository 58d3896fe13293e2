//! Declarative experiment configuration, read from a single TOML file.

use std::fs;
use std::path::{Path, PathBuf};

use satprobe_core::eval::{Grouping, PredictorSpec, ProbeSettings, SplitPlan, DEFAULT_SEEDS, SWEEP_SEEDS};
use satprobe_core::features::{ConfidenceMode, FeatureKind};
use satprobe_core::probes::DEFAULT_PENALTY_C;
use satprobe_core::tinylm::{Activation, AttnScale};
use satprobe_core::trace::ROW_SUM_TOLERANCE;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output directory, relative to the config file.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Master seed for train/test splits.
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: Option<ModelConfigSection>,
    #[serde(default)]
    pub eval: EvalConfig,
    pub grid: Option<GridConfig>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Deserialize)]
pub struct DatasetConfig {
    /// Label used in reports; defaults to the builder name.
    pub name: Option<String>,
    /// Trace file written by `trace` and read by the other commands.
    /// Defaults to `<out>/traces.jsonl`.
    pub traces: Option<PathBuf>,
    /// Row-sum tolerance applied when reading traces.
    #[serde(default = "default_row_sum_tolerance")]
    pub row_sum_tolerance: f64,
    #[serde(flatten)]
    pub builder: DatasetBuilder,
}

fn default_row_sum_tolerance() -> f64 {
    ROW_SUM_TOLERANCE
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case")]
pub enum DatasetBuilder {
    /// Starts-with / ends-with letter prompts.
    Words {
        #[serde(default = "default_alphabet")]
        alphabet: String,
        /// Optional word list: adds words to the vocabulary and fills constrainedness.
        corpus: Option<PathBuf>,
    },
    /// One prompt per knowledge-base entity carrying `field`.
    Kb {
        kb: PathBuf,
        template: String,
        placeholder: String,
        field: String,
        min_popularity: Option<u64>,
    },
    /// JSONL prompts in the exporter's format; `kb` backs `KbLookup` constraints.
    Prompts { path: PathBuf, kb: Option<PathBuf> },
    /// Synthetic traces with a planted sparse signal.
    Planted {
        n_records: usize,
        n_layers: usize,
        n_heads: usize,
        #[serde(default)]
        seed: u64,
        density: Option<f64>,
        magnitude: Option<f64>,
        /// Half-open `[start, end)` range of layers carrying signal.
        signal_layers: Option<[usize; 2]>,
        popularity_snr: Option<f64>,
    },
    /// An existing trace file.
    Traces { path: PathBuf },
}

fn default_alphabet() -> String {
    satprobe_core::datasets::ENGLISH_ALPHABET.to_string()
}

impl DatasetBuilder {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetBuilder::Words { .. } => "words",
            DatasetBuilder::Kb { .. } => "kb",
            DatasetBuilder::Prompts { .. } => "prompts",
            DatasetBuilder::Planted { .. } => "planted",
            DatasetBuilder::Traces { .. } => "traces",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfigSection {
    /// Weight file path, or `random:<seed>:<d>x<L>x<H>`.
    pub spec: String,
    pub name: Option<String>,
    #[serde(default = "default_max_new")]
    pub max_new_tokens: usize,
    /// Only used for random models; weight files carry their own.
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub attn_scale: AttnScale,
}

fn default_max_new() -> usize {
    3
}

/// Parsed form of a model spec string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelSource {
    Random { seed: u64, d_model: usize, n_layers: usize, n_heads: usize },
    File(PathBuf),
}

impl ModelSource {
    pub fn parse(spec: &str, base: &Path) -> Result<Self, CliError> {
        let Some(rest) = spec.strip_prefix("random:") else {
            return Ok(ModelSource::File(base.join(spec)));
        };
        let bad = || CliError::Config(format!("model spec {spec:?}: expected random:<seed>:<d>x<L>x<H>"));
        let (seed, dims) = rest.split_once(':').ok_or_else(bad)?;
        let dims: Vec<usize> = dims.split('x').map(|v| v.parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let [d_model, n_layers, n_heads] = dims[..] else { return Err(bad()) };
        Ok(ModelSource::Random { seed: seed.parse().map_err(|_| bad())?, d_model, n_layers, n_heads })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_predictors")]
    pub predictors: Vec<String>,
    pub layer_limit: Option<usize>,
    #[serde(default = "default_penalty", rename = "penalty_C", alias = "penalty_c")]
    pub penalty_c: f64,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub grouping: Grouping,
    #[serde(default)]
    pub confidence: ConfidenceMode,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_bin_key")]
    pub bin_key: String,
    /// Layer counts for `sweep-layers`; all prefixes when absent.
    pub sweep_layers: Option<Vec<usize>>,
    #[serde(default = "default_sweep_kind")]
    pub sweep_kind: FeatureKind,
    #[serde(default = "default_sweep_seeds")]
    pub sweep_seeds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

fn default_predictors() -> Vec<String> {
    ["satprobe_weights", "satprobe_norms", "combined_weights", "confidence", "constant"]
        .map(String::from)
        .to_vec()
}
fn default_penalty() -> f64 {
    DEFAULT_PENALTY_C
}
fn default_seeds() -> usize {
    DEFAULT_SEEDS
}
fn default_train_fraction() -> f64 {
    0.5
}
fn default_bins() -> usize {
    5
}
fn default_bin_key() -> String {
    "attention_total".into()
}
fn default_sweep_kind() -> FeatureKind {
    FeatureKind::Weights
}
fn default_sweep_seeds() -> usize {
    SWEEP_SEEDS
}

impl EvalConfig {
    pub fn predictor_specs(&self) -> Result<Vec<PredictorSpec>, CliError> {
        self.predictors
            .iter()
            .map(|p| PredictorSpec::parse(p).ok_or_else(|| CliError::Config(format!("unknown predictor {p:?}"))))
            .collect()
    }

    pub fn probe_settings(&self) -> ProbeSettings {
        ProbeSettings { penalty_c: self.penalty_c, layer_limit: self.layer_limit, confidence_mode: self.confidence }
    }

    pub fn split_plan(&self, seed: u64) -> SplitPlan {
        SplitPlan { seed, train_fraction: self.train_fraction, grouping: self.grouping }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Traces from the smaller model.
    pub small: PathBuf,
    /// Traces from the larger model over the same prompts.
    pub large: PathBuf,
    #[serde(default = "default_bins")]
    pub cells: usize,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn check(&self) -> Result<(), CliError> {
        let e = &self.eval;
        if !(e.penalty_c > 0.0 && e.penalty_c.is_finite()) {
            return Err(CliError::Config(format!("penalty_C must be positive, got {}", e.penalty_c)));
        }
        if !(e.train_fraction > 0.0 && e.train_fraction < 1.0) {
            return Err(CliError::Config(format!("train_fraction must lie in (0, 1), got {}", e.train_fraction)));
        }
        if e.n_seeds == 0 || e.sweep_seeds == 0 || e.bins == 0 {
            return Err(CliError::Config("n_seeds, sweep_seeds and bins must be positive".into()));
        }
        e.predictor_specs()?;
        Ok(())
    }

    pub fn dataset_name(&self) -> String {
        self.dataset.name.clone().unwrap_or_else(|| self.dataset.builder.name().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_as_documented() {
        let cfg = ExperimentConfig::parse("[dataset]\nbuilder = \"words\"\n").unwrap();
        assert_eq!(cfg.eval.penalty_c, 0.05);
        assert_eq!(cfg.eval.n_seeds, 10);
        assert_eq!(cfg.eval.train_fraction, 0.5);
        assert_eq!(cfg.eval.grouping, Grouping::ByConstraintSet);
        assert_eq!(cfg.eval.sweep_seeds, 3);
        assert_eq!(cfg.out, PathBuf::from("out"));
        match cfg.dataset.builder {
            DatasetBuilder::Words { alphabet, corpus } => {
                assert_eq!(alphabet.len(), 26);
                assert!(corpus.is_none());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::parse("[dataset]\nbuilder = \"words\"\n[eval]\npenalty_C = 0\n").is_err());
        assert!(ExperimentConfig::parse("[dataset]\nbuilder = \"words\"\n[eval]\npredictors = [\"x\"]\n").is_err());
        assert!(ExperimentConfig::parse("[dataset]\nbuilder = \"nope\"\n").is_err());
        assert!(ExperimentConfig::parse("[dataset]\nbuilder = \"words\"\n[eval]\nunknown = 1\n").is_err());
    }

    #[test]
    fn model_specs() {
        let base = Path::new("/cfg");
        assert_eq!(
            ModelSource::parse("random:7:16x2x4", base).unwrap(),
            ModelSource::Random { seed: 7, d_model: 16, n_layers: 2, n_heads: 4 }
        );
        assert_eq!(ModelSource::parse("m.bin", base).unwrap(), ModelSource::File(PathBuf::from("/cfg/m.bin")));
        assert!(ModelSource::parse("random:7:16x2", base).is_err());
        assert!(ModelSource::parse("random:x:16x2x2", base).is_err());
    }
}

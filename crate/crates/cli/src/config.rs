//! Run configuration documents and their resolution against per-command
//! defaults.
//!
//! A config is one JSON object holding the objective parameters, an optional
//! `state` source and optional command-specific blocks. Unknown keys are
//! rejected, and every parse failure reports the JSON pointer of the field.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use qib_core::benchmarks::copy_state;
use qib_core::cq::{CQChannel, CQState, ObjectiveConfig};
use qib_core::experiments::gen_random_qubit_ensemble;
use qib_core::io::{ChannelJson, StateJson};
use qib_core::linalg::DensityOperator;
use qib_core::qib::random_channel;

use crate::error::{CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(rename = "dimT")]
    pub dim_t: Option<usize>,
    pub classical: Option<bool>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub state: Option<StateSource>,
    pub initial_channel: Option<InitialChannel>,
    pub gamma_sweep: Option<GammaSweepBlock>,
    pub beta_sweep: Option<BetaSweepBlock>,
    pub classify: Option<ClassifyBlock>,
    pub suffstats: Option<SuffStatsBlock>,
    pub advantage: Option<AdvantageBlock>,
}

/// Exactly one of `{"inline": state}`, `{"path": "file.json"}` or
/// `{"generator": {"qubit-ensemble": {"sizeX": 256}}}`.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSource {
    Inline(StateJson),
    Path(PathBuf),
    Generator(Generator),
}

/// Starting point of `run-qib` and `run-qdib`: `"random"` (seeded, the
/// default), `"maximally_mixed"` or `{"path": "channel.json"}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialChannel {
    Random,
    MaximallyMixed,
    Path(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Generator {
    /// Uniform ensemble of random single-qubit states.
    QubitEnsemble {
        #[serde(rename = "sizeX")]
        size_x: usize,
    },
    /// `k` perfectly correlated copies of a `d`-ary symbol.
    Copy { d: usize, k: usize },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSweepBlock {
    pub gammas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSweepBlock {
    pub betas: Option<Vec<f64>>,
    pub kappa_samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyBlock {
    pub records: Option<usize>,
    pub size_x2: Option<usize>,
    pub num_labels: Option<usize>,
    pub train_fraction: Option<f64>,
    pub wide_noise: Option<f64>,
    pub permute: Option<bool>,
    pub ridge: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuffStatsBlock {
    pub size_x1: Option<usize>,
    pub size_x2: Option<usize>,
    pub nu: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvantageBlock {
    pub d: Option<usize>,
    pub n: Option<usize>,
}

/// Parses `text` as `T`, mapping failures to the JSON pointer of the field.
pub fn parse_json<T: DeserializeOwned>(text: &str, file: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        file: file.to_string(),
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    Ok(value)
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// A loaded config together with the directory relative paths resolve
/// against.
#[derive(Debug, Default)]
pub struct LoadedConfig {
    pub file: RunConfigFile,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let file = parse_json(&read_text(path)?, &path.display().to_string())?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { file, base_dir })
    }

    /// The configured state, or the generator default when none is given.
    pub fn state(&self, seed: u64, default: Option<Generator>) -> CliResult<CQState> {
        match &self.file.state {
            Some(StateSource::Inline(doc)) => state_from_doc(doc, "state.inline"),
            Some(StateSource::Path(p)) => load_state(&self.base_dir.join(p)),
            Some(StateSource::Generator(g)) => generate(g, seed),
            None => match default {
                Some(g) => generate(&g, seed),
                None => Err(CliError::Usage(
                    "this command needs a \"state\" entry in the config".into(),
                )),
            },
        }
    }

    pub fn initial_channel(&self, state: &CQState, cfg: &ObjectiveConfig) -> CliResult<CQChannel> {
        Ok(match &self.file.initial_channel {
            None | Some(InitialChannel::Random) => {
                random_channel(cfg.dim_t, state.size_x(), cfg.classical, cfg.seed)?
            }
            Some(InitialChannel::MaximallyMixed) => CQChannel::constant(
                DensityOperator::maximally_mixed(cfg.dim_t),
                state.size_x(),
                cfg.classical,
            )?,
            Some(InitialChannel::Path(p)) => load_channel(&self.base_dir.join(p))?,
        })
    }

    /// Objective parameters: config values over `defaults`, seed as given.
    pub fn objective(&self, defaults: &ObjectiveConfig, seed: u64) -> ObjectiveConfig {
        let f = &self.file;
        let alpha = f.alpha.unwrap_or(defaults.alpha);
        let mut cfg = defaults.clone();
        cfg.alpha = alpha;
        cfg.beta = f.beta.unwrap_or(defaults.beta);
        // An explicit alpha without gamma keeps the always-safe gamma = alpha.
        cfg.gamma = match (f.gamma, f.alpha) {
            (Some(g), _) => g,
            (None, Some(a)) if a > 0.0 => a,
            (None, Some(_)) => 1.0,
            (None, None) => defaults.gamma,
        };
        cfg.dim_t = f.dim_t.unwrap_or(defaults.dim_t);
        cfg.classical = f.classical.unwrap_or(defaults.classical);
        cfg.tol = f.tol.unwrap_or(defaults.tol);
        cfg.max_iters = f.max_iters.unwrap_or(defaults.max_iters);
        cfg.seed = seed;
        cfg
    }
}

fn generate(g: &Generator, seed: u64) -> CliResult<CQState> {
    Ok(match *g {
        Generator::QubitEnsemble { size_x } => gen_random_qubit_ensemble(size_x, seed)?,
        Generator::Copy { d, k } => copy_state(d, k)?,
    })
}

fn state_from_doc(doc: &StateJson, context: &str) -> CliResult<CQState> {
    doc.to_state().map_err(|source| CliError::Input {
        context: context.to_string(),
        source,
    })
}

pub fn load_state(path: &Path) -> CliResult<CQState> {
    let name = path.display().to_string();
    let doc: StateJson = parse_json(&read_text(path)?, &name)?;
    state_from_doc(&doc, &name)
}

pub fn load_channel(path: &Path) -> CliResult<CQChannel> {
    let name = path.display().to_string();
    let doc: ChannelJson = parse_json(&read_text(path)?, &name)?;
    doc.to_channel().map_err(|source| CliError::Input {
        context: name,
        source,
    })
}

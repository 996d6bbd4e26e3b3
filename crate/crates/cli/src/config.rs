//! Run configuration: a TOML file with one section per subcommand. Values
//! given as flags replace the file's.

use std::path::{Path, PathBuf};

use covfloor::experiments::Budgets;
use covfloor::pasr::DEFAULT_EPSILON;
use covfloor::{OutcomeKind, Sampling};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the thread pool decide.
    pub threads: usize,
    pub out: PathBuf,
    pub format: Format,
    pub fit: FitConfig,
    pub uncertainty: UncertaintyConfig,
    pub experiment: ExperimentConfig,
    pub dgm: DgmConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 0,
            out: PathBuf::from("out"),
            format: Format::Csv,
            fit: FitConfig::default(),
            uncertainty: UncertaintyConfig::default(),
            experiment: ExperimentConfig::default(),
            dgm: DgmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub data: Option<PathBuf>,
    /// Prediction points; the training rows when absent.
    pub test: Option<PathBuf>,
    pub outcome: OutcomeKind,
    pub trees: usize,
    /// Candidate features per split; `ceil(sqrt(p))` when absent.
    pub mtry: Option<usize>,
    pub sampling: Sampling,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            data: None,
            test: None,
            outcome: OutcomeKind::Continuous,
            trees: 500,
            mtry: None,
            sampling: Sampling::Bootstrap,
            min_leaf: covfloor::DEFAULT_MIN_LEAF,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyConfig {
    pub forest: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Expected outcome kind; must match the forest when given.
    pub outcome: Option<OutcomeKind>,
    pub alpha: f64,
    pub r_syn: usize,
    pub b_mc: usize,
    pub r_cf: usize,
    pub epsilon: f64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        UncertaintyConfig {
            forest: None,
            data: None,
            test: None,
            outcome: None,
            alpha: covfloor::intervals::DEFAULT_ALPHA,
            r_syn: 60,
            b_mc: 250,
            r_cf: 5,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FloorChoice {
    Estimated,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NuisanceChoice {
    Fitted,
    True,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    pub outcome: OutcomeKind,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub mtry: Option<usize>,
    pub sampling: Option<Sampling>,
    pub min_leaf: Option<usize>,
    pub alpha: Option<f64>,
    pub budgets: Budgets,
    pub b_grid: Option<Vec<usize>>,
    pub q_grid: Option<Vec<usize>>,
    pub k_inbag: usize,
    pub m_inner: usize,
    pub overlap_trials: usize,
    pub floor: FloorChoice,
    pub nuisance: NuisanceChoice,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: "favorable".to_string(),
            outcome: OutcomeKind::Continuous,
            n: None,
            p: None,
            mtry: None,
            sampling: None,
            min_leaf: None,
            alpha: None,
            budgets: Budgets::default(),
            b_grid: None,
            q_grid: None,
            k_inbag: 40,
            m_inner: 60,
            overlap_trials: 100_000,
            floor: FloorChoice::Estimated,
            nuisance: NuisanceChoice::Fitted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgmConfig {
    pub n: usize,
    pub p: usize,
    pub outcome: OutcomeKind,
    pub n_test: usize,
    pub jitter_sd: f64,
}

impl Default for DgmConfig {
    fn default() -> Self {
        DgmConfig {
            n: 400,
            p: 10,
            outcome: OutcomeKind::Continuous,
            n_test: 100,
            jitter_sd: covfloor::dgm::DEFAULT_JITTER_SD,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form. The
    /// thread count and output directory do not change results and are left out.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            threads: 0,
            out: PathBuf::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

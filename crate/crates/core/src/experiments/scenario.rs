//! Scenario presets and their realization at a fixed design.

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, OutcomeKind};
use crate::dgm::{self, Design, OutcomeModelSpec};
use crate::error::{config_err, Result};
use crate::forest::{ForestConfig, Sampling, TrainingFrame, DEFAULT_MIN_LEAF};
use crate::intervals::DEFAULT_ALPHA;
use crate::law::ConditionalLaw;
use crate::pasr::{PasrConfig, DEFAULT_EPSILON};
use crate::rng::SeedPath;

/// Replication and tree budgets. The defaults run the favorable suite in
/// minutes on one core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    pub r_true: usize,
    pub b_true: usize,
    pub r_syn: usize,
    pub b_mc: usize,
    pub b_deploy: usize,
    pub r_cov: usize,
    pub s: usize,
    pub n_test: usize,
    pub r_cf: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            r_true: 120,
            b_true: 1500,
            r_syn: 60,
            b_mc: 250,
            b_deploy: 500,
            r_cov: 50,
            s: 10,
            n_test: 100,
            r_cf: 5,
        }
    }
}

impl Budgets {
    /// Budgets of the full-size simulation study.
    pub fn full_scale() -> Self {
        Budgets {
            r_true: 300,
            b_true: 8000,
            r_syn: 150,
            b_deploy: 2000,
            r_cov: 200,
            ..Budgets::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Favorable,
    Challenging,
    Stress,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Favorable, Preset::Challenging, Preset::Stress];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Favorable => "favorable",
            Preset::Challenging => "challenging",
            Preset::Stress => "stress",
        }
    }

    /// `(n, p, q)`; every preset uses bootstrap resampling.
    pub fn shape(self) -> (usize, usize, usize) {
        match self {
            Preset::Favorable => (400, 10, 4),
            Preset::Challenging => (200, 30, 6),
            Preset::Stress => (200, 200, 15),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}`; expected favorable, challenging or stress"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub outcome: OutcomeKind,
    pub mtry: usize,
    pub sampling: Sampling,
    pub min_leaf: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_jitter")]
    pub jitter_sd: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_jitter() -> f64 {
    dgm::DEFAULT_JITTER_SD
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl ScenarioConfig {
    pub fn preset(preset: Preset, outcome: OutcomeKind) -> Self {
        let (n, p, q) = preset.shape();
        ScenarioConfig {
            name: preset.name().to_string(),
            n,
            p,
            outcome,
            mtry: q,
            sampling: Sampling::Bootstrap,
            min_leaf: DEFAULT_MIN_LEAF,
            max_depth: None,
            budgets: Budgets::default(),
            jitter_sd: default_jitter(),
            alpha: default_alpha(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The deployed forest configuration with `B_deploy` trees.
    pub fn forest(&self) -> ForestConfig {
        ForestConfig::new(self.budgets.b_deploy, self.mtry, self.sampling, self.min_leaf)
            .with_max_depth(self.max_depth)
    }

    pub fn pasr(&self, seed: u64) -> PasrConfig {
        PasrConfig {
            r_syn: self.budgets.r_syn,
            b_mc: self.budgets.b_mc,
            r_cf: self.budgets.r_cf,
            epsilon: DEFAULT_EPSILON,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.forest().validate(self.n, self.p)?;
        let b = &self.budgets;
        for (name, v) in [
            ("r_true", b.r_true),
            ("r_syn", b.r_syn),
            ("r_cov", b.r_cov),
            ("s", b.s),
        ] {
            if v < 2 {
                return config_err(format!("budget {name} = {v} must be at least 2"));
            }
        }
        for (name, v) in [
            ("b_true", b.b_true),
            ("b_mc", b.b_mc),
            ("b_deploy", b.b_deploy),
            ("n_test", b.n_test),
            ("r_cf", b.r_cf),
        ] {
            if v == 0 {
                return config_err(format!("budget {name} must be positive"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return config_err(format!("alpha = {} must lie in (0, 1]", self.alpha));
        }
        Ok(())
    }

    /// A one-line label of the design parameters.
    pub fn label(&self) -> String {
        format!(
            "{} n={} p={} q={} {} {}",
            self.name,
            self.n,
            self.p,
            self.mtry,
            sampling_label(self.sampling),
            self.outcome.as_str()
        )
    }
}

pub fn sampling_label(s: Sampling) -> String {
    match s {
        Sampling::Bootstrap => "bootstrap".to_string(),
        Sampling::Subsample { fraction } => format!("subsample{fraction}"),
    }
}

/// A scenario realized at one covariate draw, with its test points and the
/// true conditional law at both.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub design: Design,
    pub spec: OutcomeModelSpec,
    pub frame: TrainingFrame,
    pub law: ConditionalLaw,
    pub test: Design,
    /// Observed columns of the test points.
    pub points: FeatureMatrix,
    pub test_law: ConditionalLaw,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let root = SeedPath::new(config.seed);
        let design = dgm::gen_predictors(config.n, config.p, root.child("design").value())?;
        let spec = OutcomeModelSpec::new(config.outcome, &design)?;
        let test = dgm::make_test_points(
            &design,
            config.budgets.n_test,
            config.jitter_sd,
            root.child("test").value(),
        )?;
        Ok(Scenario {
            frame: TrainingFrame::new(design.observed()),
            law: spec.law(design.full()),
            points: test.observed(),
            test_law: spec.law(test.full()),
            config,
            design,
            spec,
            test,
        })
    }

    pub fn n_test(&self) -> usize {
        self.points.n_rows()
    }

    /// The scenario with outcome noise removed (continuous only).
    pub fn noiseless(&self) -> Scenario {
        let mut s = self.clone();
        if let ConditionalLaw::Gaussian { sd, .. } = &mut s.law {
            sd.iter_mut().for_each(|v| *v = 0.0);
        }
        if let ConditionalLaw::Gaussian { sd, .. } = &mut s.test_law {
            sd.iter_mut().for_each(|v| *v = 0.0);
        }
        s
    }

    /// Keeps only the first `k` test points.
    pub fn truncate_points(&mut self, k: usize) {
        let k = k.min(self.n_test());
        let idx: Vec<usize> = (0..k).collect();
        self.points = self.points.select_rows(&idx);
        let full = self.test.full().select_rows(&idx);
        self.test_law = self.spec.law(&full);
        self.test = dgm::Design::from_parts(self.test.schema().clone(), full);
    }
}

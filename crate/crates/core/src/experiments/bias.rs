//! Pointwise bias of the floor estimator against the oracle.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::oracle::OracleResult;
use super::report::Report;
use super::scenario::Scenario;
use crate::data::OutcomeKind;
use crate::error::{config_err, Result};
use crate::law::ConditionalLaw;
use crate::pasr;
use crate::rng::SeedPath;
use crate::stats::{self, LineFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuisanceSource {
    /// Nuisance law fitted to each dataset.
    Fitted,
    /// The data-generating law itself, removing the nuisance gap.
    TrueLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasSummary {
    pub source: NuisanceSource,
    /// `c_hat[s][k]`: estimate on dataset `s` at point `k`.
    pub c_hat: Vec<Vec<f64>>,
    pub oracle: Vec<f64>,
    /// Jackknife SE of the point-averaged oracle.
    pub oracle_mean_se: f64,
}

impl BiasSummary {
    pub fn bias(&self, s: usize) -> Vec<f64> {
        self.c_hat[s].iter().zip(&self.oracle).map(|(c, o)| c - o).collect()
    }

    /// Point-averaged bias of each dataset.
    pub fn dataset_means(&self) -> Vec<f64> {
        (0..self.c_hat.len()).map(|s| stats::mean(&self.bias(s))).collect()
    }

    pub fn mean_bias(&self) -> f64 {
        stats::mean(&self.dataset_means())
    }

    /// Combines dataset-to-dataset spread with the oracle's own error,
    /// which is common to every dataset.
    pub fn mean_bias_se(&self) -> f64 {
        stats::std_error(&self.dataset_means()).hypot(self.oracle_mean_se)
    }

    fn pooled(&self) -> Vec<f64> {
        (0..self.c_hat.len()).flat_map(|s| self.bias(s)).collect()
    }

    pub fn median_bias(&self) -> f64 {
        stats::median(&self.pooled())
    }

    pub fn iqr_bias(&self) -> f64 {
        let p = self.pooled();
        stats::quantile(&p, 0.75) - stats::quantile(&p, 0.25)
    }

    /// Regression of the dataset-averaged estimate on the oracle across
    /// points.
    pub fn calibration(&self) -> Result<LineFit> {
        let k = self.oracle.len();
        let avg: Vec<f64> = (0..k)
            .map(|j| stats::mean(&self.c_hat.iter().map(|c| c[j]).collect::<Vec<_>>()))
            .collect();
        stats::fit_line(&self.oracle, &avg)
    }

    /// Mean correlation across points of the bias vectors of every pair of
    /// datasets.
    pub fn mean_pairwise_correlation(&self) -> f64 {
        let s = self.c_hat.len();
        let biases: Vec<Vec<f64>> = (0..s).map(|i| self.bias(i)).collect();
        let mut acc = Vec::new();
        for i in 0..s {
            for j in i + 1..s {
                if let Ok(c) = stats::correlation(&biases[i], &biases[j]) {
                    acc.push(c);
                }
            }
        }
        stats::mean(&acc)
    }

    /// One-sided t test of `mean bias >= 0` with `S - 1` degrees of
    /// freedom. Returns `(t, critical value)`; conservatism is rejected
    /// when `t < critical`.
    pub fn conservatism_test(&self, level: f64) -> (f64, f64) {
        let t = self.mean_bias() / self.mean_bias_se();
        let df = (self.c_hat.len() - 1) as f64;
        let crit = StudentsT::new(0.0, 1.0, df)
            .map(|d| d.inverse_cdf(level))
            .unwrap_or(f64::NAN);
        (t, crit)
    }

    pub fn report(&self, scenario: &Scenario) -> Report {
        let mut r = Report::new("bias", Some(&scenario.config));
        let g = match self.source {
            NuisanceSource::Fitted => "fitted",
            NuisanceSource::TrueLaw => "true_law",
        };
        for s in 0..self.c_hat.len() {
            r.push_points("bias", &format!("{g},dataset={}", s + 1), &self.bias(s));
        }
        r.scalar("mean_bias", self.mean_bias());
        r.scalar("mean_bias_se", self.mean_bias_se());
        r.scalar("median_bias", self.median_bias());
        r.scalar("iqr_bias", self.iqr_bias());
        r.scalar("mean_oracle", stats::mean(&self.oracle));
        if let Ok(fit) = self.calibration() {
            r.scalar("calibration_intercept", fit.intercept);
            r.scalar("calibration_slope", fit.slope);
            r.scalar("calibration_correlation", fit.correlation);
        }
        r.scalar("mean_pairwise_bias_correlation", self.mean_pairwise_correlation());
        let m = self.mean_bias();
        let se = self.mean_bias_se();
        match (self.source, scenario.config.outcome) {
            (NuisanceSource::TrueLaw, _) => r.check(
                "unbiased_under_true_law",
                m.abs() <= 3.0 * se,
                format!("mean bias {m:.3e}, SE {se:.3e}"),
            ),
            (NuisanceSource::Fitted, OutcomeKind::Continuous) => {
                let (t, crit) = self.conservatism_test(0.01);
                r.check(
                    "conservative",
                    m >= 0.0 && t >= crit,
                    format!("mean bias {m:.3e}, t = {t:.3}, 1% critical value {crit:.3}"),
                )
            }
            (NuisanceSource::Fitted, OutcomeKind::Binary) => r.check(
                "near_unbiased",
                m.abs() <= 0.01,
                format!("mean bias {m:.3e} (tolerance 0.01)"),
            ),
        }
        r
    }
}

/// Runs the floor estimator on `S` independent outcome draws at the
/// scenario's design and compares each run with the oracle.
pub fn bias_diagnostics(
    scenario: &Scenario,
    oracle: &OracleResult,
    s: usize,
    source: NuisanceSource,
    seed: u64,
) -> Result<BiasSummary> {
    if s < 2 {
        return config_err(format!("S = {s}; bias diagnostics need at least 2 datasets"));
    }
    if oracle.c_t().len() != scenario.n_test() {
        return config_err("oracle and scenario disagree on the test points");
    }
    let cfg = &scenario.config;
    let root = SeedPath::new(seed);
    let c_hat: Vec<Vec<f64>> = (0..s)
        .into_par_iter()
        .map(|i| {
            let ds = root.child("dataset").index(i as u64);
            let law: ConditionalLaw = match source {
                NuisanceSource::TrueLaw => scenario.law.clone(),
                NuisanceSource::Fitted => {
                    let y = scenario.law.draw(ds.child("outcome"));
                    fitted_law(scenario, &y, ds.child("nuisance").value())?
                }
            };
            Ok(pasr::estimate_floor(
                &scenario.frame,
                &law,
                &cfg.forest(),
                &scenario.points,
                &cfg.pasr(ds.child("pasr").value()),
            )?
            .c_hat)
        })
        .collect::<Result<_>>()?;
    Ok(BiasSummary {
        source,
        c_hat,
        oracle: oracle.c_t().to_vec(),
        oracle_mean_se: oracle.paired.mean_se,
    })
}

fn fitted_law(scenario: &Scenario, y: &[f64], seed: u64) -> Result<ConditionalLaw> {
    let cfg = &scenario.config;
    let model = match cfg.outcome {
        OutcomeKind::Continuous => pasr::NuisanceModel::Continuous(pasr::fit_nuisance_continuous(
            &scenario.frame,
            y,
            cfg.budgets.r_cf,
            pasr::DEFAULT_EPSILON,
            seed,
        )?),
        OutcomeKind::Binary => pasr::NuisanceModel::Binary(pasr::fit_nuisance_binary(
            &scenario.frame,
            y,
            &cfg.forest(),
            seed,
        )?),
    };
    Ok(model.law())
}

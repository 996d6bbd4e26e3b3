//! Ground-truth covariance floor at fixed `X` under the true law.

use rayon::prelude::*;

use super::report::Report;
use super::scenario::Scenario;
use crate::data::FeatureMatrix;
use crate::error::{config_err, Result};
use crate::forest::{ForestConfig, TrainingFrame};
use crate::law::ConditionalLaw;
use crate::rng::SeedPath;
use crate::stats::CovSummary;

/// Floor at each test point by two methods.
///
/// The variance form refits one forest with the same tree seeds on every
/// outcome draw and takes the variance of its predictions. The paired form
/// fits two independently seeded forests per draw and takes the covariance
/// of the pair, which removes the finite-`B` term exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub variance_form: CovSummary,
    pub paired: CovSummary,
    pub r_true: usize,
    pub b_true: usize,
}

impl OracleResult {
    /// The primary (paired) estimate.
    pub fn c_t(&self) -> &[f64] {
        &self.paired.cov
    }

    pub fn c_t_se(&self) -> &[f64] {
        &self.paired.se
    }

    /// Per-point agreement of the two methods within `k` combined SE.
    pub fn agreement(&self, k: f64) -> Vec<bool> {
        let v = &self.variance_form;
        let p = &self.paired;
        (0..p.cov.len())
            .map(|j| (v.cov[j] - p.cov[j]).abs() <= k * v.se[j].hypot(p.se[j]))
            .collect()
    }

    pub fn report(&self, scenario: &Scenario) -> Report {
        let mut r = Report::new("oracle", Some(&scenario.config));
        r.push_points("c_t_variance_form", "", &self.variance_form.cov);
        r.push_points("se_variance_form", "", &self.variance_form.se);
        r.push_points("c_t_paired", "", &self.paired.cov);
        r.push_points("se_paired", "", &self.paired.se);
        r.scalar("mean_c_t_variance_form", self.variance_form.mean);
        r.scalar("mean_c_t_paired", self.paired.mean);
        let agree = self.agreement(3.0);
        let n_agree = agree.iter().filter(|&&a| a).count();
        r.scalar("points_agreeing_3se", n_agree as f64);
        let se = self.variance_form.mean_se.hypot(self.paired.mean_se);
        let diff = self.variance_form.mean - self.paired.mean;
        r.check(
            "methods_agree_on_average",
            diff.abs() <= 3.0 * se,
            format!("difference {diff:.3e}, combined SE {se:.3e}"),
        );
        r
    }
}

pub fn oracle_true_ct(
    frame: &TrainingFrame,
    law: &ConditionalLaw,
    forest: &ForestConfig,
    r_true: usize,
    b_true: usize,
    points: &FeatureMatrix,
    seed: u64,
) -> Result<OracleResult> {
    if r_true < 2 {
        return config_err(format!("R_true = {r_true}; the oracle needs at least 2 replications"));
    }
    let root = SeedPath::new(seed);
    let common = forest
        .clone()
        .with_trees(b_true)
        .with_seed(root.child("common").value());
    let fits: Vec<[Vec<f64>; 3]> = (0..r_true)
        .into_par_iter()
        .map(|r| {
            let y = law.draw(root.child("outcome").index(r as u64));
            let pair = root.child("pair").index(r as u64);
            let fit = |cfg: ForestConfig| cfg.fit_predict(frame, &y, points).map(|p| p.mean);
            let shared = fit(common.clone())?;
            let a = fit(forest.clone().with_trees(b_true).with_seed(pair.child("A").value()))?;
            let b = fit(forest.clone().with_trees(b_true).with_seed(pair.child("B").value()))?;
            Ok([shared, a, b])
        })
        .collect::<Result<_>>()?;
    let shared: Vec<Vec<f64>> = fits.iter().map(|f| f[0].clone()).collect();
    let a: Vec<Vec<f64>> = fits.iter().map(|f| f[1].clone()).collect();
    let b: Vec<Vec<f64>> = fits.iter().map(|f| f[2].clone()).collect();
    Ok(OracleResult {
        variance_form: CovSummary::from_series(&shared, &shared)?,
        paired: CovSummary::from_series(&a, &b)?,
        r_true,
        b_true,
    })
}

/// [`oracle_true_ct`] with the scenario's own law, forest and budgets.
pub fn scenario_oracle(scenario: &Scenario, seed: u64) -> Result<OracleResult> {
    let b = &scenario.config.budgets;
    oracle_true_ct(
        &scenario.frame,
        &scenario.law,
        &scenario.config.forest(),
        b.r_true,
        b.b_true,
        &scenario.points,
        seed,
    )
}

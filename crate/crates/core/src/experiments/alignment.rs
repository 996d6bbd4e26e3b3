//! Covariance of forests trained on disjoint halves of the sample.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::report::Report;
use super::scenario::Scenario;
use crate::data::FeatureMatrix;
use crate::error::{config_err, Result};
use crate::forest::{ForestConfig, TrainingFrame};
use crate::law::ConditionalLaw;
use crate::rng::SeedPath;
use crate::stats::{self, CovSummary};

const BOOTSTRAP_RESAMPLES: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentRow {
    pub q: usize,
    pub cov: CovSummary,
    /// Percentile bootstrap bounds of the point-averaged covariance at
    /// two-sided level 99%.
    pub ci99: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub rows: Vec<AlignmentRow>,
    pub r: usize,
}

impl AlignmentResult {
    /// Whether each step up the `q` sweep is a decrease larger than `k`
    /// jackknife SE of the paired difference.
    pub fn monotone_within(&self, k: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let d = w[1].cov.mean - w[0].cov.mean;
            let loo: Vec<f64> = w[1]
                .cov
                .loo_mean
                .iter()
                .zip(&w[0].cov.loo_mean)
                .map(|(a, b)| a - b)
                .collect();
            d >= -k * stats::jackknife_spread(&loo)
        })
    }

    pub fn report(&self, scenario: &Scenario) -> Report {
        let mut r = Report::new("alignment", Some(&scenario.config));
        for row in &self.rows {
            let g = format!("q={}", row.q);
            r.push_points("cov", &g, &row.cov.cov);
            r.push("mean_cov", g.clone(), None, row.cov.mean);
            r.push("mean_cov_se", g.clone(), None, row.cov.mean_se);
            r.push("ci99_lo", g.clone(), None, row.ci99.0);
            r.push("ci99_hi", g.clone(), None, row.ci99.1);
            r.check(
                &format!("positive_{g}"),
                row.ci99.0 > 0.0,
                format!("99% lower bound {:.3e}", row.ci99.0),
            );
        }
        r.check(
            "nondecreasing_in_q",
            self.monotone_within(3.0),
            "no step down beyond 3 SE".to_string(),
        );
        r
    }
}

/// Fixes one random half-split of the rows, then on each of `r` outcome
/// draws fits one forest per half for every `q` in the sweep and records
/// the covariance of the two forests' predictions across draws.
#[allow(clippy::too_many_arguments)]
pub fn alignment_probe(
    frame: &TrainingFrame,
    law: &ConditionalLaw,
    forest: &ForestConfig,
    q_grid: &[usize],
    r: usize,
    points: &FeatureMatrix,
    seed: u64,
) -> Result<AlignmentResult> {
    let n = frame.n_rows();
    if !n.is_multiple_of(2) || n < 4 {
        return config_err(format!("the half-split needs an even n of at least 4, got {n}"));
    }
    if r < 3 {
        return config_err(format!("R = {r}; need at least 3 replications"));
    }
    let root = SeedPath::new(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut root.child("halves").rng());
    let (mut first, mut second) = (idx[..n / 2].to_vec(), idx[n / 2..].to_vec());
    first.sort_unstable();
    second.sort_unstable();
    let halves = [
        (TrainingFrame::new(frame.x().select_rows(&first)), first),
        (TrainingFrame::new(frame.x().select_rows(&second)), second),
    ];
    let rows = q_grid
        .iter()
        .map(|&q| {
            let cfg = ForestConfig { mtry: q, ..forest.clone() };
            let fits: Vec<(Vec<f64>, Vec<f64>)> = (0..r)
                .into_par_iter()
                .map(|i| {
                    let y = law.draw(root.child("outcome").index(i as u64));
                    let rep = root.child("replicate").index(i as u64);
                    let fit = |h: usize, label: &str| {
                        let (hf, rows) = &halves[h];
                        let yh: Vec<f64> = rows.iter().map(|&j| y[j]).collect();
                        cfg.clone()
                            .with_seed(rep.child(label).value())
                            .fit_predict(hf, &yh, points)
                            .map(|p| p.mean)
                    };
                    Ok((fit(0, "first")?, fit(1, "second")?))
                })
                .collect::<Result<_>>()?;
            let (a, b): (Vec<_>, Vec<_>) = fits.into_iter().unzip();
            let cov = CovSummary::from_series(&a, &b)?;
            let ci99 = bootstrap_ci(&a, &b, 0.01, root.child("bootstrap").index(q as u64))?;
            Ok(AlignmentRow { q, cov, ci99 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlignmentResult { rows, r })
}

/// Percentile bootstrap interval of the point-averaged covariance,
/// resampling replications.
fn bootstrap_ci(a: &[Vec<f64>], b: &[Vec<f64>], level: f64, seed: SeedPath) -> Result<(f64, f64)> {
    let r = a.len();
    let k = a[0].len();
    let mut rng = seed.rng();
    let mut stats_b = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut pick = vec![0usize; r];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        pick.iter_mut().for_each(|p| *p = rng.random_range(0..r));
        let mut total = 0.0;
        for j in 0..k {
            let aj: Vec<f64> = pick.iter().map(|&i| a[i][j]).collect();
            let bj: Vec<f64> = pick.iter().map(|&i| b[i][j]).collect();
            total += stats::covariance(&aj, &bj)?;
        }
        stats_b.push(total / k as f64);
    }
    Ok((
        stats::quantile(&stats_b, level / 2.0),
        stats::quantile(&stats_b, 1.0 - level / 2.0),
    ))
}

/// The sweep `{1, ceil(sqrt(p)), p}` without duplicates.
pub fn default_q_grid(p: usize) -> Vec<usize> {
    let mut g = vec![1, (p as f64).sqrt().ceil() as usize, p];
    g.dedup();
    g
}

pub fn scenario_alignment(scenario: &Scenario, seed: u64) -> Result<AlignmentResult> {
    let b = &scenario.config.budgets;
    alignment_probe(
        &scenario.frame,
        &scenario.law,
        &scenario.config.forest().with_trees(b.b_mc),
        &default_q_grid(scenario.config.p),
        b.r_true,
        &scenario.points,
        seed,
    )
}

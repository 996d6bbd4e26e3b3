//! Variance of the finite forest as a function of its size.

use rayon::prelude::*;

use super::report::Report;
use super::scenario::Scenario;
use crate::data::FeatureMatrix;
use crate::error::{config_err, Result};
use crate::forest::{ForestConfig, TrainingFrame};
use crate::law::ConditionalLaw;
use crate::rng::SeedPath;
use crate::stats::CovSummary;

/// Grid used when none is given, truncated at the largest forest size.
pub const DEFAULT_B_GRID: [usize; 11] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 1500];

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCurve {
    pub b_grid: Vec<usize>,
    /// Variance of the `B`-tree forest across joint `(Y, theta)` draws, per
    /// grid value.
    pub by_b: Vec<CovSummary>,
    /// Covariance of two independent largest-size forests on the same `Y`.
    pub floor: CovSummary,
    /// Variance of one tree of an independently seeded forest.
    pub single_tree: CovSummary,
    /// Weighted fit of `sigma2 / B + (B - 1) / B * c` to the averaged curve.
    pub fit_sigma_t2: f64,
    pub fit_c_t: f64,
    pub max_rel_residual: f64,
}

impl VarianceCurve {
    /// Averaged variance at the largest grid value.
    pub fn plateau(&self) -> f64 {
        self.by_b.last().map(|s| s.mean).unwrap_or(f64::NAN)
    }

    /// `|plateau - floor| / floor` on point-averaged values.
    pub fn plateau_rel_error(&self) -> f64 {
        (self.plateau() - self.floor.mean).abs() / self.floor.mean
    }

    /// `(difference, combined SE)` of the grid value at `B = 1` against the
    /// independent single-tree variance.
    pub fn single_tree_gap(&self) -> Option<(f64, f64)> {
        let at_one = self.b_grid.iter().position(|&b| b == 1)?;
        let v = &self.by_b[at_one];
        Some((v.mean - self.single_tree.mean, v.mean_se.hypot(self.single_tree.mean_se)))
    }

    pub fn report(&self, scenario: &Scenario) -> Report {
        let mut r = Report::new("variance-vs-b", Some(&scenario.config));
        for (b, s) in self.b_grid.iter().zip(&self.by_b) {
            let g = format!("b={b}");
            r.push("variance", g.clone(), None, s.mean);
            r.push("variance_se", g.clone(), None, s.mean_se);
            let fitted = self.fit_sigma_t2 / *b as f64 + (*b as f64 - 1.0) / *b as f64 * self.fit_c_t;
            r.push("fitted", g.clone(), None, fitted);
            r.push("floor", g, None, self.floor.mean);
        }
        r.scalar("floor_paired", self.floor.mean);
        r.scalar("floor_paired_se", self.floor.mean_se);
        r.scalar("single_tree_variance", self.single_tree.mean);
        r.scalar("fit_sigma_t2", self.fit_sigma_t2);
        r.scalar("fit_c_t", self.fit_c_t);
        r.scalar("max_rel_residual", self.max_rel_residual);
        let rel = self.plateau_rel_error();
        r.scalar("plateau_rel_error", rel);
        r.check(
            "plateau_matches_floor",
            rel <= 0.05,
            format!("relative error {rel:.4} (tolerance 0.05)"),
        );
        if let Some((d, se)) = self.single_tree_gap() {
            r.check(
                "b1_matches_single_tree",
                d.abs() <= 3.0 * se,
                format!("difference {d:.3e}, combined SE {se:.3e}"),
            );
        }
        r.check(
            "functional_form",
            self.max_rel_residual < 0.05,
            format!("largest relative residual {:.4}", self.max_rel_residual),
        );
        r
    }
}

#[allow(clippy::too_many_arguments)]
pub fn variance_vs_b(
    frame: &TrainingFrame,
    law: &ConditionalLaw,
    forest: &ForestConfig,
    b_grid: &[usize],
    r: usize,
    points: &FeatureMatrix,
    seed: u64,
) -> Result<VarianceCurve> {
    if r < 3 {
        return config_err(format!("R = {r}; the variance curve needs at least 3 replications"));
    }
    let mut grid = b_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() || grid[0] == 0 {
        return config_err("the B grid must hold positive forest sizes");
    }
    let b_max = *grid.last().expect("nonempty grid");
    let root = SeedPath::new(seed);
    struct Rep {
        prefixes: Vec<Vec<f64>>,
        other: Vec<f64>,
        other_tree: Vec<f64>,
    }
    let reps: Vec<Rep> = (0..r)
        .into_par_iter()
        .map(|i| {
            let y = law.draw(root.child("outcome").index(i as u64));
            let rep = root.child("replicate").index(i as u64);
            let a = forest
                .clone()
                .with_trees(b_max)
                .with_seed(rep.child("A").value())
                .tree_predictions(frame, &y, points)?;
            let b = forest
                .clone()
                .with_trees(b_max)
                .with_seed(rep.child("B").value())
                .tree_predictions(frame, &y, points)?;
            Ok(Rep {
                prefixes: grid.iter().map(|&g| a.prefix_mean(g)).collect(),
                other: b.mean(),
                other_tree: b.tree(0).to_vec(),
            })
        })
        .collect::<Result<_>>()?;
    let by_b = (0..grid.len())
        .map(|g| {
            let s: Vec<Vec<f64>> = reps.iter().map(|x| x.prefixes[g].clone()).collect();
            CovSummary::from_series(&s, &s)
        })
        .collect::<Result<Vec<_>>>()?;
    let full: Vec<Vec<f64>> = reps.iter().map(|x| x.prefixes[grid.len() - 1].clone()).collect();
    let other: Vec<Vec<f64>> = reps.iter().map(|x| x.other.clone()).collect();
    let tree: Vec<Vec<f64>> = reps.iter().map(|x| x.other_tree.clone()).collect();
    let floor = CovSummary::from_series(&full, &other)?;
    let single_tree = CovSummary::from_series(&tree, &tree)?;
    let curve: Vec<f64> = by_b.iter().map(|s| s.mean).collect();
    let (fit_sigma_t2, fit_c_t, max_rel_residual) = fit_identity(&grid, &curve);
    Ok(VarianceCurve {
        b_grid: grid,
        by_b,
        floor,
        single_tree,
        fit_sigma_t2,
        fit_c_t,
        max_rel_residual,
    })
}

/// Least squares of `v_B = c + (sigma2 - c) / B` with weights `1 / v_B^2`,
/// so the residuals are balanced on the relative scale. Returns
/// `(sigma2, c, max |relative residual|)`.
fn fit_identity(grid: &[usize], v: &[f64]) -> (f64, f64, f64) {
    let x: Vec<f64> = grid.iter().map(|&b| 1.0 / b as f64).collect();
    let w: Vec<f64> = v.iter().map(|&vb| 1.0 / (vb * vb)).collect();
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(v).zip(&w).map(|((a, y), b)| b * (a - mx) * (y - my)).sum();
    if grid.len() < 2 || sxx <= 0.0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let slope = sxy / sxx;
    let c = my - slope * mx;
    let max_rel = x
        .iter()
        .zip(v)
        .map(|(a, y)| ((c + slope * a) - y).abs() / y.abs())
        .fold(0.0, f64::max);
    (c + slope, c, max_rel)
}

/// [`variance_vs_b`] with the scenario's own law, forest and budgets.
pub fn scenario_curve(scenario: &Scenario, seed: u64) -> Result<VarianceCurve> {
    let b = &scenario.config.budgets;
    let grid: Vec<usize> = DEFAULT_B_GRID
        .iter()
        .copied()
        .filter(|&g| g < b.b_true)
        .chain(std::iter::once(b.b_true))
        .collect();
    variance_vs_b(
        &scenario.frame,
        &scenario.law,
        &scenario.config.forest(),
        &grid,
        b.r_true,
        &scenario.points,
        seed,
    )
}

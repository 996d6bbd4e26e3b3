//! Interval coverage over repeated outcome draws at a fixed design.

use rayon::prelude::*;

use super::oracle::OracleResult;
use super::report::Report;
use super::scenario::Scenario;
use crate::data::OutcomeKind;
use crate::error::Result;
use crate::forest::Forest;
use crate::intervals::IntervalReport;
use crate::pasr::{self, NuisanceModel};
use crate::rng::SeedPath;
use crate::stats;

/// Number of oracle-floor quantile bins for pointwise coverage.
pub const COVERAGE_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloorMode {
    /// Floor estimated by paired synthetic refits.
    Estimated,
    /// Floor term dropped from the interval.
    ForcedZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    pub kind: OutcomeKind,
    pub mode: FloorMode,
    pub alpha: f64,
    /// `hits[r][k]`: whether replication `r` covered its target at point `k`.
    pub hits: Vec<Vec<bool>>,
    pub mean_width: f64,
    /// `(lowest oracle floor, highest oracle floor, coverage)` per bin.
    pub bins: Option<Vec<(f64, f64, f64)>>,
}

impl CoverageResult {
    pub fn marginal(&self) -> f64 {
        let total: usize = self.hits.iter().map(Vec::len).sum();
        let hit: usize = self.hits.iter().flatten().filter(|&&h| h).count();
        hit as f64 / total as f64
    }

    /// Standard error of the marginal coverage from per-replication rates.
    pub fn marginal_se(&self) -> f64 {
        stats::std_error(&self.per_replication())
    }

    pub fn per_replication(&self) -> Vec<f64> {
        self.hits.iter().map(|h| rate(h.iter().copied())).collect()
    }

    pub fn per_point(&self) -> Vec<f64> {
        let k = self.hits.first().map_or(0, Vec::len);
        (0..k).map(|j| rate(self.hits.iter().map(|h| h[j]))).collect()
    }

    pub fn report(&self, scenario: &Scenario) -> Report {
        let mut r = Report::new("coverage", Some(&scenario.config));
        let g = match self.mode {
            FloorMode::Estimated => "estimated",
            FloorMode::ForcedZero => "forced_zero",
        };
        r.push_points("pointwise_coverage", g, &self.per_point());
        if let Some(bins) = &self.bins {
            for (i, (lo, hi, c)) in bins.iter().enumerate() {
                let b = format!("{g},bin={}", i + 1);
                r.push("bin_floor_lo", b.clone(), None, *lo);
                r.push("bin_floor_hi", b.clone(), None, *hi);
                r.push("bin_coverage", b, None, *c);
            }
        }
        let m = self.marginal();
        r.scalar("marginal_coverage", m);
        r.scalar("marginal_coverage_se", self.marginal_se());
        r.scalar("mean_width", self.mean_width);
        r.scalar("alpha", self.alpha);
        if self.mode == FloorMode::Estimated {
            let nominal = 1.0 - self.alpha;
            r.check(
                "marginal_coverage_band",
                (nominal - 0.03..=nominal + 0.03).contains(&m),
                format!("coverage {m:.4} at nominal {nominal:.2}"),
            );
        } else {
            r.check(
                "floor_free_undercovers",
                m < 0.5,
                format!("coverage {m:.4} without the floor term"),
            );
        }
        r
    }
}

fn rate(it: impl Iterator<Item = bool>) -> f64 {
    let (mut n, mut h) = (0usize, 0usize);
    for v in it {
        n += 1;
        h += v as usize;
    }
    h as f64 / n as f64
}

/// Runs the deployment pipeline `R_cov` times on fresh outcomes: fit the
/// deployed forest, fit the nuisance law, estimate the floor, assemble
/// intervals, and score them against a fresh outcome (continuous) or the
/// true probability (binary) at each test point.
pub fn coverage_study(
    scenario: &Scenario,
    mode: FloorMode,
    oracle: Option<&OracleResult>,
    seed: u64,
) -> Result<CoverageResult> {
    let cfg = &scenario.config;
    let kind = cfg.outcome;
    let root = SeedPath::new(seed);
    let k = scenario.n_test();
    let reps: Vec<(Vec<bool>, f64)> = (0..cfg.budgets.r_cov)
        .into_par_iter()
        .map(|r| {
            let rep = root.child("replicate").index(r as u64);
            let y = scenario.law.draw(rep.child("outcome"));
            let deployed = Forest::fit(
                &scenario.frame,
                &y,
                kind,
                &cfg.forest().with_seed(rep.child("deploy").value()),
            )?;
            let pred = deployed.predict_many(&scenario.points)?;
            let tree_var: Vec<f64> = pred
                .tree_variance
                .iter()
                .map(|v| v.unwrap_or(0.0))
                .collect();
            let needs_nuisance = mode == FloorMode::Estimated || kind == OutcomeKind::Continuous;
            let nuisance = if !needs_nuisance {
                None
            } else if kind == OutcomeKind::Continuous {
                Some(NuisanceModel::Continuous(pasr::fit_nuisance_continuous(
                    &scenario.frame,
                    &y,
                    cfg.budgets.r_cf,
                    pasr::DEFAULT_EPSILON,
                    rep.child("nuisance").value(),
                )?))
            } else {
                Some(NuisanceModel::Binary(pasr::binary_nuisance_from_forest(
                    &deployed,
                    scenario.frame.x(),
                )?))
            };
            let sigma2 = match &nuisance {
                Some(NuisanceModel::Continuous(c)) => Some(c.sigma2_at(&scenario.points)?),
                _ => None,
            };
            let c_hat = match (&nuisance, mode) {
                (Some(nu), FloorMode::Estimated) => {
                    pasr::estimate_floor(
                        &scenario.frame,
                        &nu.law(),
                        &cfg.forest(),
                        &scenario.points,
                        &cfg.pasr(rep.child("pasr").value()),
                    )?
                    .c_hat
                }
                _ => vec![0.0; k],
            };
            let report = IntervalReport::build(
                kind,
                &pred.mean,
                sigma2.as_deref(),
                &tree_var,
                pred.n_trees,
                &c_hat,
                cfg.alpha,
            )?;
            let hits: Vec<bool> = match kind {
                OutcomeKind::Continuous => {
                    let y_new = scenario.test_law.draw(rep.child("new-outcome"));
                    report.entries.iter().zip(&y_new).map(|(e, &t)| e.contains(t)).collect()
                }
                OutcomeKind::Binary => report
                    .entries
                    .iter()
                    .enumerate()
                    .map(|(j, e)| e.contains(scenario.test_law.mean(j)))
                    .collect(),
            };
            let width = stats::mean(&report.entries.iter().map(|e| e.width()).collect::<Vec<_>>());
            Ok((hits, width))
        })
        .collect::<Result<_>>()?;
    let (hits, widths): (Vec<_>, Vec<_>) = reps.into_iter().unzip();
    let mut result = CoverageResult {
        kind,
        mode,
        alpha: cfg.alpha,
        hits,
        mean_width: stats::mean(&widths),
        bins: None,
    };
    if let Some(o) = oracle {
        result.bins = Some(bin_by_floor(&result.per_point(), o.c_t()));
    }
    Ok(result)
}

/// Groups points into quantile bins of the oracle floor and averages their
/// pointwise coverage.
fn bin_by_floor(coverage: &[f64], floor: &[f64]) -> Vec<(f64, f64, f64)> {
    let k = coverage.len().min(floor.len());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| floor[a].total_cmp(&floor[b]).then(a.cmp(&b)));
    let n_bins = COVERAGE_BINS.min(k);
    (0..n_bins)
        .map(|b| {
            let members = &order[b * k / n_bins..(b + 1) * k / n_bins];
            let cov: Vec<f64> = members.iter().map(|&j| coverage[j]).collect();
            (
                floor[members[0]],
                floor[*members.last().expect("bins are nonempty")],
                stats::mean(&cov),
            )
        })
        .collect()
}

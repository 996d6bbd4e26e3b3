//! Single-tree variance split by conditioning on the resampling draw.

use rayon::prelude::*;

use super::report::Report;
use super::scenario::Scenario;
use crate::data::FeatureMatrix;
use crate::error::{config_err, Result};
use crate::forest::{ForestConfig, InbagVector, TrainingFrame};
use crate::law::ConditionalLaw;
use crate::rng::SeedPath;
use crate::stats;

/// Point-averaged components with jackknife standard errors.
///
/// `v_in` is the mean within-draw variance over `K` frozen resampling
/// draws, `v_out` the variance of the within-draw means less its
/// `v_in / M` sampling inflation, and `sigma_t2` the variance of a single
/// tree from an independent unconditioned run of `K * M` trees.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub v_in: Vec<f64>,
    pub v_out: Vec<f64>,
    pub sigma_t2: Vec<f64>,
    pub mean_v_in: f64,
    pub mean_v_out: f64,
    pub mean_sigma_t2: f64,
    /// Jackknife SE over resampling draws of the averaged `v_in + v_out`.
    pub sum_se: f64,
    pub sigma_t2_se: f64,
}

impl Decomposition {
    /// `(V_in + V_out - sigma_T^2, combined SE)`.
    pub fn gap(&self) -> (f64, f64) {
        (
            self.mean_v_in + self.mean_v_out - self.mean_sigma_t2,
            self.sum_se.hypot(self.sigma_t2_se),
        )
    }

    pub fn report(&self, scenario: &Scenario) -> Report {
        let mut r = Report::new("decomposition", Some(&scenario.config));
        r.push_points("v_in", "", &self.v_in);
        r.push_points("v_out", "", &self.v_out);
        r.push_points("sigma_t2", "", &self.sigma_t2);
        r.scalar("mean_v_in", self.mean_v_in);
        r.scalar("mean_v_out", self.mean_v_out);
        r.scalar("mean_sigma_t2", self.mean_sigma_t2);
        let (d, se) = self.gap();
        r.scalar("gap", d);
        r.scalar("gap_se", se);
        r.check(
            "total_variance",
            d.abs() <= 3.0 * se,
            format!("V_in + V_out - sigma_T^2 = {d:.3e}, combined SE {se:.3e}"),
        );
        r
    }
}

#[allow(clippy::too_many_arguments)]
pub fn single_tree_variance_decomposition(
    frame: &TrainingFrame,
    law: &ConditionalLaw,
    forest: &ForestConfig,
    k_inbag: usize,
    m_inner: usize,
    points: &FeatureMatrix,
    seed: u64,
) -> Result<Decomposition> {
    if k_inbag < 3 || m_inner < 2 {
        return config_err(format!(
            "need at least 3 resampling draws and 2 inner draws, got K = {k_inbag}, M = {m_inner}"
        ));
    }
    forest.validate(frame.n_rows(), frame.n_cols())?;
    let root = SeedPath::new(seed);
    let n = frame.n_rows();
    let n_pts = points.n_rows();
    let tree_at = |cfg: &ForestConfig, inbag: Option<InbagVector>, split: SeedPath, y_seed: SeedPath| {
        let y = law.draw(y_seed);
        let tree = match inbag {
            Some(ib) => cfg.grow_tree_on(frame, &y, ib, split)?,
            None => cfg.clone().with_seed(split.value()).grow_tree(frame, &y, 0)?,
        };
        Ok(points.rows().map(|x| tree.predict(x)).collect::<Vec<f64>>())
    };
    // within[k] = (means, variances) over the M inner draws
    let within: Vec<(Vec<f64>, Vec<f64>)> = (0..k_inbag)
        .into_par_iter()
        .map(|k| {
            let outer = root.child("conditioned").index(k as u64);
            let inbag = InbagVector::draw(forest.sampling, n, &mut outer.child("inbag").rng())?;
            let preds: Vec<Vec<f64>> = (0..m_inner)
                .map(|m| {
                    let inner = outer.index(m as u64);
                    tree_at(forest, Some(inbag.clone()), inner.child("split"), inner.child("outcome"))
                })
                .collect::<Result<_>>()?;
            let mut means = Vec::with_capacity(n_pts);
            let mut vars = Vec::with_capacity(n_pts);
            for j in 0..n_pts {
                let col: Vec<f64> = preds.iter().map(|p| p[j]).collect();
                means.push(stats::mean(&col));
                vars.push(stats::variance(&col)?);
            }
            Ok((means, vars))
        })
        .collect::<Result<_>>()?;
    let free: Vec<Vec<f64>> = (0..k_inbag * m_inner)
        .into_par_iter()
        .map(|t| {
            let s = root.child("free").index(t as u64);
            tree_at(forest, None, s.child("tree"), s.child("outcome"))
        })
        .collect::<Result<_>>()?;

    let components = |rows: &[usize]| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut v_in = Vec::with_capacity(n_pts);
        let mut v_out = Vec::with_capacity(n_pts);
        for j in 0..n_pts {
            let vars: Vec<f64> = rows.iter().map(|&k| within[k].1[j]).collect();
            let means: Vec<f64> = rows.iter().map(|&k| within[k].0[j]).collect();
            let vi = stats::mean(&vars);
            v_in.push(vi);
            v_out.push(stats::variance(&means)? - vi / m_inner as f64);
        }
        Ok((v_in, v_out))
    };
    let all: Vec<usize> = (0..k_inbag).collect();
    let (v_in, v_out) = components(&all)?;
    let loo_sum = (0..k_inbag)
        .map(|drop| {
            let rows: Vec<usize> = all.iter().copied().filter(|&k| k != drop).collect();
            let (a, b) = components(&rows)?;
            Ok(stats::mean(&a) + stats::mean(&b))
        })
        .collect::<Result<Vec<f64>>>()?;
    let st = stats::CovSummary::from_series(&free, &free)?;
    Ok(Decomposition {
        mean_v_in: stats::mean(&v_in),
        mean_v_out: stats::mean(&v_out),
        mean_sigma_t2: st.mean,
        sum_se: stats::jackknife_spread(&loo_sum),
        sigma_t2_se: st.mean_se,
        v_in,
        v_out,
        sigma_t2: st.cov,
    })
}

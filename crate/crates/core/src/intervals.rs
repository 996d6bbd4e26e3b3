//! Operational variance and interval assembly.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::OutcomeKind;
use crate::error::{config_err, data_err, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Inverse standard normal CDF.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Upper `alpha / 2` standard normal quantile. `alpha = 1` gives 0, a
/// zero-width interval.
pub fn normal_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return config_err(format!("interval level alpha = {alpha} outside (0, 1]"));
    }
    Ok(inverse_normal_cdf(1.0 - alpha / 2.0))
}

/// `tree_variance / b + max(c_hat, 0)`.
pub fn operational_variance(tree_variance: f64, b: usize, c_hat: f64) -> Result<f64> {
    if b < 2 {
        return config_err(format!(
            "tree variance needs at least 2 trees, the forest has {b}"
        ));
    }
    if !(tree_variance >= 0.0) || !c_hat.is_finite() {
        return data_err("variance inputs must be finite and non-negative");
    }
    Ok(tree_variance / b as f64 + c_hat.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEntry {
    pub estimate: f64,
    /// Outcome noise; zero for binary confidence intervals.
    pub var_outcome: f64,
    /// Monte Carlo term `tree_variance / B`.
    pub var_mc: f64,
    /// Clamped floor estimate.
    pub var_floor: f64,
    pub c_hat_raw: f64,
    pub total: f64,
    pub lo: f64,
    pub hi: f64,
    pub lo_clamped: f64,
    pub hi_clamped: f64,
}

impl IntervalEntry {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, target: f64) -> bool {
        self.lo <= target && target <= self.hi
    }
}

fn assemble(estimate: f64, var_outcome: f64, tree_variance: f64, b: usize, c_hat: f64, z: f64) -> Result<IntervalEntry> {
    if !estimate.is_finite() {
        return data_err("point estimate is not finite");
    }
    if !(var_outcome >= 0.0) || !var_outcome.is_finite() {
        return data_err(format!("outcome variance {var_outcome} is not a finite non-negative value"));
    }
    operational_variance(tree_variance, b, c_hat)?;
    let var_mc = tree_variance / b as f64;
    let var_floor = c_hat.max(0.0);
    let total = var_outcome + var_mc + var_floor;
    let half = z * total.sqrt();
    Ok(IntervalEntry {
        estimate,
        var_outcome,
        var_mc,
        var_floor,
        c_hat_raw: c_hat,
        total,
        lo: estimate - half,
        hi: estimate + half,
        lo_clamped: estimate - half,
        hi_clamped: estimate + half,
    })
}

/// Prediction interval for a new continuous outcome at `x`.
pub fn prediction_interval_continuous(
    estimate: f64,
    sigma2: f64,
    tree_variance: f64,
    b: usize,
    c_hat: f64,
    alpha: f64,
) -> Result<IntervalEntry> {
    assemble(estimate, sigma2, tree_variance, b, c_hat, normal_quantile(alpha)?)
}

/// Confidence interval for `p(x)`; endpoints are also reported clamped to
/// `[0, 1]`.
pub fn confidence_interval_binary(
    estimate: f64,
    tree_variance: f64,
    b: usize,
    c_hat: f64,
    alpha: f64,
) -> Result<IntervalEntry> {
    if !(0.0..=1.0).contains(&estimate) {
        return data_err(format!("probability estimate {estimate} outside [0, 1]"));
    }
    let mut e = assemble(estimate, 0.0, tree_variance, b, c_hat, normal_quantile(alpha)?)?;
    e.lo_clamped = e.lo.clamp(0.0, 1.0);
    e.hi_clamped = e.hi.clamp(0.0, 1.0);
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub kind: OutcomeKind,
    pub alpha: f64,
    pub z: f64,
    pub entries: Vec<IntervalEntry>,
}

impl IntervalReport {
    /// Builds one entry per point. `sigma2` is required for continuous
    /// outcomes and ignored for binary ones.
    pub fn build(
        kind: OutcomeKind,
        estimates: &[f64],
        sigma2: Option<&[f64]>,
        tree_variance: &[f64],
        b: usize,
        c_hat: &[f64],
        alpha: f64,
    ) -> Result<Self> {
        let k = estimates.len();
        if tree_variance.len() != k || c_hat.len() != k || sigma2.is_some_and(|s| s.len() != k) {
            return data_err("interval inputs have unequal lengths");
        }
        let entries = (0..k)
            .map(|i| match kind {
                OutcomeKind::Continuous => {
                    let s2 = sigma2
                        .ok_or_else(|| crate::Error::Data("continuous intervals need sigma^2(x)".into()))?[i];
                    prediction_interval_continuous(estimates[i], s2, tree_variance[i], b, c_hat[i], alpha)
                }
                OutcomeKind::Binary => {
                    confidence_interval_binary(estimates[i], tree_variance[i], b, c_hat[i], alpha)
                }
            })
            .collect::<Result<_>>()?;
        Ok(IntervalReport {
            kind,
            alpha,
            z: normal_quantile(alpha)?,
            entries,
        })
    }

    /// Columns `test_id, estimate, lo, hi, lo_clamped, hi_clamped,
    /// var_outcome, var_mc, var_floor, alpha`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "test_id,estimate,lo,hi,lo_clamped,hi_clamped,var_outcome,var_mc,var_floor,alpha"
        )?;
        for (k, e) in self.entries.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                k + 1,
                e.estimate,
                e.lo,
                e.hi,
                e.lo_clamped,
                e.hi_clamped,
                e.var_outcome,
                e.var_mc,
                e.var_floor,
                self.alpha
            )?;
        }
        Ok(())
    }
}

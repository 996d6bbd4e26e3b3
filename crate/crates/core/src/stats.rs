//! Small descriptive-statistics toolkit used by the estimators and the
//! experiment harness. Variances and covariances use the `n - 1` divisor.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> Result<f64> {
    covariance(xs, xs)
}

/// Sample covariance with divisor `n - 1`.
pub fn covariance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Data(format!(
            "covariance of series with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Undefined(format!(
            "covariance needs at least 2 observations, got {n}"
        )));
    }
    let ma = mean(a);
    let mb = mean(b);
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    Ok(s / (n - 1) as f64)
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    (variance(xs).unwrap_or(f64::NAN) / xs.len() as f64).sqrt()
}

/// Jackknife standard error of the sample covariance of paired series.
pub fn jackknife_cov_se(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(jackknife_spread(&leave_one_out_cov(a, b)?))
}

/// Sample covariances with each observation left out in turn, computed in
/// closed form from running sums.
pub fn leave_one_out_cov(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::Data("jackknife of unequal series".into()));
    }
    if n < 3 {
        return Err(Error::Undefined(format!(
            "jackknife covariance needs at least 3 observations, got {n}"
        )));
    }
    // centre first for numerical stability; covariance is shift invariant
    let ma = mean(a);
    let mb = mean(b);
    let ca: Vec<f64> = a.iter().map(|x| x - ma).collect();
    let cb: Vec<f64> = b.iter().map(|x| x - mb).collect();
    let sa: f64 = ca.iter().sum();
    let sb: f64 = cb.iter().sum();
    let sab: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
    let m = (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let ra = sa - ca[i];
            let rb = sb - cb[i];
            (sab - ca[i] * cb[i] - ra * rb / m) / (m - 1.0)
        })
        .collect())
}

/// Per-point covariances of replicate-major paired series `a[r][k]`,
/// `b[r][k]`, with jackknife standard errors for each point and for their
/// average over points.
#[derive(Debug, Clone, PartialEq)]
pub struct CovSummary {
    pub cov: Vec<f64>,
    pub se: Vec<f64>,
    pub mean: f64,
    pub mean_se: f64,
    /// Leave-one-replicate-out values of `mean`.
    pub loo_mean: Vec<f64>,
}

impl CovSummary {
    pub fn from_series(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::Data("paired series differ in replicate count".into()));
        }
        let k = a[0].len();
        let r = a.len();
        let mut cov = Vec::with_capacity(k);
        let mut se = Vec::with_capacity(k);
        let mut loo_mean = vec![0.0; r];
        for j in 0..k {
            let aj: Vec<f64> = a.iter().map(|s| s[j]).collect();
            let bj: Vec<f64> = b.iter().map(|s| s[j]).collect();
            let loo = leave_one_out_cov(&aj, &bj)?;
            cov.push(covariance(&aj, &bj)?);
            se.push(jackknife_spread(&loo));
            for (m, v) in loo_mean.iter_mut().zip(&loo) {
                *m += v / k as f64;
            }
        }
        Ok(CovSummary {
            mean: mean(&cov),
            mean_se: jackknife_spread(&loo_mean),
            loo_mean,
            cov,
            se,
        })
    }
}

/// Jackknife standard error from leave-one-out replicates of any statistic.
pub fn jackknife_spread(loo: &[f64]) -> f64 {
    let n = loo.len() as f64;
    let m = mean(loo);
    let ss: f64 = loo.iter().map(|v| (v - m) * (v - m)).sum();
    ((n - 1.0) / n * ss).sqrt()
}

/// Quantile with linear interpolation between order statistics
/// (the default "type 7" definition).
pub fn quantile(xs: &[f64], prob: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, prob)
}

pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Ordinary least-squares line `y = intercept + slope * x` with the
/// Pearson correlation of the two series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub correlation: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let vx = variance(x)?;
    let vy = variance(y)?;
    let cxy = covariance(x, y)?;
    if vx <= 0.0 {
        return Err(Error::Undefined("regression on a constant regressor".into()));
    }
    let slope = cxy / vx;
    let intercept = mean(y) - slope * mean(x);
    let correlation = if vy > 0.0 { cxy / (vx * vy).sqrt() } else { f64::NAN };
    Ok(LineFit {
        intercept,
        slope,
        correlation,
    })
}

pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    let va = variance(a)?;
    let vb = variance(b)?;
    if va <= 0.0 || vb <= 0.0 {
        return Err(Error::Undefined("correlation with a constant series".into()));
    }
    Ok(covariance(a, b)? / (va * vb).sqrt())
}

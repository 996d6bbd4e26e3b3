//! Covariance-floor estimation by procedure-aligned synthetic resampling.
//!
//! A conditional law for `Y | X` is fitted (cross-fitted mean and a
//! residual-product variance forest for continuous outcomes, out-of-bag
//! probabilities for binary ones). Synthetic outcome vectors are drawn from
//! it, and on each draw two forests of the target configuration are grown
//! with independent seeds. The covariance of the two prediction series
//! estimates the floor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::data::{FeatureMatrix, OutcomeKind};
use crate::error::{config_err, data_err, Result};
use crate::forest::{Forest, ForestConfig, Sampling, TrainingFrame};
use crate::law::ConditionalLaw;
use crate::rng::SeedPath;
use crate::stats;

pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Trees in the residual-product variance forest.
pub const VARIANCE_FOREST_TREES: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PasrConfig {
    pub r_syn: usize,
    pub b_mc: usize,
    pub r_cf: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for PasrConfig {
    fn default() -> Self {
        PasrConfig {
            r_syn: 60,
            b_mc: 250,
            r_cf: 5,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

impl PasrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_syn < 2 {
            return config_err(format!(
                "R_syn = {} synthetic replicates cannot give a covariance; need at least 2",
                self.r_syn
            ));
        }
        if self.b_mc == 0 {
            return config_err("B_mc must be at least 1");
        }
        if self.r_cf == 0 {
            return config_err("R_cf must be at least 1");
        }
        if !(self.epsilon > 0.0) {
            return config_err(format!("variance floor must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// Cross-fitted location-scale model for continuous outcomes.
#[derive(Debug, Clone)]
pub struct ContinuousNuisance {
    pub m_hat: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    /// Residual products `(Y - m1)(Y - m2)`.
    pub s: Vec<f64>,
    /// Floored variance-forest predictions at the training rows.
    pub sigma2: Vec<f64>,
    pub epsilon: f64,
    variance_forest: Forest,
}

impl ContinuousNuisance {
    /// `max(variance forest prediction, epsilon)` at arbitrary points.
    pub fn sigma2_at(&self, points: &FeatureMatrix) -> Result<Vec<f64>> {
        let pred = self.variance_forest.predict_many(points)?;
        Ok(pred.mean.iter().map(|v| v.max(self.epsilon)).collect())
    }

    pub fn mean_s(&self) -> f64 {
        stats::mean(&self.s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryNuisance {
    pub p_hat: Vec<f64>,
    /// Rows with no out-of-bag tree, filled with the full-forest prediction.
    pub n_fallback: usize,
}

#[derive(Debug, Clone)]
pub enum NuisanceModel {
    Continuous(ContinuousNuisance),
    Binary(BinaryNuisance),
}

impl NuisanceModel {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            NuisanceModel::Continuous(_) => OutcomeKind::Continuous,
            NuisanceModel::Binary(_) => OutcomeKind::Binary,
        }
    }

    /// The synthetic law at the training rows.
    pub fn law(&self) -> ConditionalLaw {
        match self {
            NuisanceModel::Continuous(c) => ConditionalLaw::Gaussian {
                mean: c.m_hat.clone(),
                sd: c.sigma2.iter().map(|v| v.sqrt()).collect(),
            },
            NuisanceModel::Binary(b) => ConditionalLaw::Bernoulli {
                prob: b.p_hat.clone(),
            },
        }
    }
}

/// Cross-fitted mean sequences, residual products and the variance forest.
pub fn fit_nuisance_continuous(
    frame: &TrainingFrame,
    y: &[f64],
    r_cf: usize,
    epsilon: f64,
    seed: u64,
) -> Result<ContinuousNuisance> {
    let n = frame.n_rows();
    if n < 4 {
        return data_err(format!("cross-fitting needs at least 4 rows, got {n}"));
    }
    if y.len() != n {
        return data_err(format!("{} outcomes for {n} covariate rows", y.len()));
    }
    if r_cf == 0 {
        return config_err("R_cf must be at least 1");
    }
    if !(epsilon > 0.0) {
        return config_err(format!("variance floor must be positive, got {epsilon}"));
    }
    let root = SeedPath::new(seed).child("nuisance");
    let m1 = cross_fitted_mean(frame, y, r_cf, root.index(1))?;
    let m2 = cross_fitted_mean(frame, y, r_cf, root.index(2))?;
    let m_hat: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| 0.5 * (a + b)).collect();
    let s: Vec<f64> = (0..n).map(|i| (y[i] - m1[i]) * (y[i] - m2[i])).collect();
    let vcfg = ForestConfig::new(VARIANCE_FOREST_TREES, frame.n_cols(), Sampling::Bootstrap, 1)
        .with_seed(root.child("variance").value());
    let variance_forest = Forest::fit(frame, &s, OutcomeKind::Continuous, &vcfg)?;
    let sigma2 = variance_forest
        .predict_many(frame.x())?
        .mean
        .into_iter()
        .map(|v| v.max(epsilon))
        .collect();
    Ok(ContinuousNuisance {
        m_hat,
        m1,
        m2,
        s,
        sigma2,
        epsilon,
        variance_forest,
    })
}

/// One sequence: mean over `r_cf` random half-splits of out-of-fold
/// predictions from saturated forests.
fn cross_fitted_mean(
    frame: &TrainingFrame,
    y: &[f64],
    r_cf: usize,
    seq: SeedPath,
) -> Result<Vec<f64>> {
    let n = frame.n_rows();
    let reps: Vec<Vec<f64>> = (0..r_cf)
        .into_par_iter()
        .map(|rep| {
            let path = seq.index(rep as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = path.child("split").rng();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let (a, b) = perm.split_at(n / 2);
            let mut out = vec![0.0; n];
            for (train, test, label) in [(a, b, "first"), (b, a, "second")] {
                let sub = TrainingFrame::new(frame.x().select_rows(train));
                let y_sub: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let cfg = ForestConfig::saturated(frame.n_cols())
                    .with_seed(path.child(label).value());
                let pred = cfg.fit_predict(&sub, &y_sub, &frame.x().select_rows(test))?;
                for (&i, v) in test.iter().zip(pred.mean) {
                    out[i] = v;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut mean = vec![0.0; n];
    for rep in &reps {
        for (m, v) in mean.iter_mut().zip(rep) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= r_cf as f64);
    Ok(mean)
}

/// Out-of-bag probabilities from a probability forest of the target
/// configuration.
pub fn fit_nuisance_binary(
    frame: &TrainingFrame,
    y: &[f64],
    target: &ForestConfig,
    seed: u64,
) -> Result<BinaryNuisance> {
    let cfg = target
        .clone()
        .with_seed(SeedPath::new(seed).child("nuisance").child("oob").value());
    let forest = Forest::fit(frame, y, OutcomeKind::Binary, &cfg)?;
    binary_nuisance_from_forest(&forest, frame.x())
}

/// Out-of-bag probabilities from an already fitted probability forest.
pub fn binary_nuisance_from_forest(forest: &Forest, x: &FeatureMatrix) -> Result<BinaryNuisance> {
    if forest.outcome() != OutcomeKind::Binary {
        return data_err("out-of-bag probabilities need a forest fitted to binary outcomes");
    }
    let oob = forest.predict_oob(x)?;
    let mut n_fallback = 0;
    let p_hat = oob
        .into_iter()
        .enumerate()
        .map(|(i, v)| match v {
            Some(p) => p,
            None => {
                n_fallback += 1;
                forest.predict(x.row(i)).mean
            }
        })
        .collect();
    if n_fallback > 0 {
        log::warn!("{n_fallback} rows were in bag for every tree; using in-bag predictions");
    }
    Ok(BinaryNuisance { p_hat, n_fallback })
}

/// One synthetic outcome vector.
pub fn gen_synthetic(law: &ConditionalLaw, seed: SeedPath) -> Vec<f64> {
    law.draw(seed)
}

/// Paired prediction series and the floor estimate at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorEstimate {
    /// Raw sample covariance per point; may be negative.
    pub c_hat: Vec<f64>,
    /// `series_a[r][k]`: forest A on replicate `r` at point `k`.
    pub series_a: Vec<Vec<f64>>,
    pub series_b: Vec<Vec<f64>>,
    pub b_mc: usize,
}

impl FloorEstimate {
    pub fn from_series(series_a: Vec<Vec<f64>>, series_b: Vec<Vec<f64>>, b_mc: usize) -> Result<Self> {
        let r = series_a.len();
        if r < 2 || series_b.len() != r {
            return config_err(format!("need at least 2 paired replicates, got {r}"));
        }
        let k = series_a[0].len();
        let c_hat = (0..k)
            .map(|j| {
                let a: Vec<f64> = series_a.iter().map(|s| s[j]).collect();
                let b: Vec<f64> = series_b.iter().map(|s| s[j]).collect();
                stats::covariance(&a, &b)
            })
            .collect::<Result<_>>()?;
        Ok(FloorEstimate {
            c_hat,
            series_a,
            series_b,
            b_mc,
        })
    }

    pub fn n_replicates(&self) -> usize {
        self.series_a.len()
    }

    pub fn clamped(&self) -> Vec<f64> {
        self.c_hat.iter().map(|c| c.max(0.0)).collect()
    }

    /// Columns `test_id, c_t_hat, c_t_hat_clamped, n_replicates, b_mc`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "test_id,c_t_hat,c_t_hat_clamped,n_replicates,b_mc")?;
        for (k, c) in self.c_hat.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                k + 1,
                c,
                c.max(0.0),
                self.n_replicates(),
                self.b_mc
            )?;
        }
        Ok(())
    }
}

/// Paired-forest covariance under `law` at `points`.
pub fn estimate_floor(
    frame: &TrainingFrame,
    law: &ConditionalLaw,
    target: &ForestConfig,
    points: &FeatureMatrix,
    cfg: &PasrConfig,
) -> Result<FloorEstimate> {
    cfg.validate()?;
    if law.len() != frame.n_rows() {
        return data_err(format!(
            "synthetic law covers {} rows, the design has {}",
            law.len(),
            frame.n_rows()
        ));
    }
    if points.n_rows() == 0 {
        return data_err("no test points supplied");
    }
    target.validate(frame.n_rows(), frame.n_cols())?;
    let root = SeedPath::new(cfg.seed);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.r_syn)
        .into_par_iter()
        .map(|r| {
            let y_star = gen_synthetic(law, root.child("synthetic").index(r as u64));
            let rep = root.child("replicate").index(r as u64);
            let fit = |label: &str| {
                target
                    .clone()
                    .with_trees(cfg.b_mc)
                    .with_seed(rep.child(label).value())
                    .fit_predict(frame, &y_star, points)
                    .map(|p| p.mean)
            };
            Ok((fit("A")?, fit("B")?))
        })
        .collect::<Result<_>>()?;
    let (a, b) = pairs.into_iter().unzip();
    FloorEstimate::from_series(a, b, cfg.b_mc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureMatrix;
    use rand::Rng;

    fn random_frame(n: usize, p: usize, seed: u64) -> TrainingFrame {
        let mut rng = SeedPath::new(seed).rng();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
            .collect();
        TrainingFrame::new(FeatureMatrix::from_rows(&rows).unwrap())
    }

    #[test]
    fn constant_outcome_gives_floor_variance() {
        let frame = random_frame(40, 3, 1);
        let y = vec![3.0; 40];
        let nu = fit_nuisance_continuous(&frame, &y, 2, DEFAULT_EPSILON, 5).unwrap();
        assert!(nu.s.iter().all(|&s| s == 0.0));
        assert!(nu.sigma2.iter().all(|&v| v == DEFAULT_EPSILON));
        assert!(nu.sigma2_at(frame.x()).unwrap().iter().all(|&v| v == DEFAULT_EPSILON));
    }

    #[test]
    fn residual_product_is_symmetric_in_sequences() {
        let frame = random_frame(30, 2, 2);
        let y: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let nu = fit_nuisance_continuous(&frame, &y, 3, DEFAULT_EPSILON, 7).unwrap();
        for i in 0..30 {
            let swapped = (y[i] - nu.m2[i]) * (y[i] - nu.m1[i]);
            assert_eq!(swapped, nu.s[i]);
        }
    }

    #[test]
    fn too_few_rows_for_cross_fitting() {
        let frame = random_frame(3, 2, 3);
        assert!(fit_nuisance_continuous(&frame, &[0.0; 3], 1, 1e-6, 0).is_err());
    }

    #[test]
    fn binary_nuisance_all_zero() {
        let frame = random_frame(50, 3, 4);
        let cfg = ForestConfig::new(50, 2, Sampling::Bootstrap, 5);
        let nu = fit_nuisance_binary(&frame, &[0.0; 50], &cfg, 1).unwrap();
        assert!(nu.p_hat.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn paired_covariance_arithmetic() {
        let est = FloorEstimate::from_series(vec![vec![-1.0], vec![1.0]], vec![vec![-1.0], vec![1.0]], 1)
            .unwrap();
        assert_eq!(est.c_hat, vec![2.0]);
        assert!(FloorEstimate::from_series(vec![vec![0.0]], vec![vec![0.0]], 1).is_err());
    }

    #[test]
    fn degenerate_law_gives_zero_floor() {
        let frame = random_frame(30, 2, 5);
        let law = ConditionalLaw::Gaussian {
            mean: (0..30).map(|i| i as f64).collect(),
            sd: vec![0.0; 30],
        };
        // tree randomness alone would leave a mean-zero sample covariance;
        // a deterministic forest isolates the outcome variability
        let target = ForestConfig::new(1, 2, Sampling::Subsample { fraction: 1.0 }, 2);
        let cfg = PasrConfig {
            r_syn: 5,
            b_mc: 3,
            ..PasrConfig::default()
        };
        let est = estimate_floor(&frame, &law, &target, frame.x(), &cfg).unwrap();
        assert!(est.c_hat.iter().all(|&c| c == 0.0));
        let bad = PasrConfig { r_syn: 1, ..cfg };
        assert!(estimate_floor(&frame, &law, &target, frame.x(), &bad).is_err());
    }

    #[test]
    fn synthetic_draw_at_zero_scale_is_the_mean() {
        let law = ConditionalLaw::Gaussian {
            mean: vec![0.5, 1.5],
            sd: vec![0.0, 0.0],
        };
        assert_eq!(gen_synthetic(&law, SeedPath::new(3)), vec![0.5, 1.5]);
        let ones = ConditionalLaw::Bernoulli { prob: vec![1.0; 4] };
        assert_eq!(gen_synthetic(&ones, SeedPath::new(3)), vec![1.0; 4]);
    }

    #[test]
    fn csv_columns() {
        let est = FloorEstimate::from_series(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            7,
        )
        .unwrap();
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "test_id,c_t_hat,c_t_hat_clamped,n_replicates,b_mc\n1,0.5,0.5,2,7\n2,-0.5,0,2,7\n"
        );
    }
}

//! Simulation design: mixed-type predictors, heteroscedastic continuous
//! outcomes, logistic binary outcomes with calibrated prevalence, and
//! anchored jittered test points.
//!
//! Column `j` (1-based) of the generated matrix is predictor `x_j`. The
//! twelve core predictors are always generated because both outcome models
//! use `x11` and `x12`; when `p = 10` the last two are carried as auxiliary
//! covariates that the outcome models see but the forests do not.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, LogNormal, Normal, StandardNormal, StudentT};

use crate::data::{ColumnKind, FeatureMatrix, OutcomeKind};
use crate::error::{config_err, data_err, Error, Result};
use crate::law::ConditionalLaw;
use crate::rng::SeedPath;

/// Weight of the shared latent factor.
pub const LATENT_RHO: f64 = 0.35;
/// Lower bound of the continuous noise standard deviation.
pub const SIGMA_FLOOR: f64 = 0.15;
pub const TARGET_PREVALENCE: f64 = 0.40;
pub const DEFAULT_JITTER_SD: f64 = 0.02;
pub const DEFAULT_N_TEST: usize = 400;

const CORE_COLUMNS: usize = 12;
const EXTENDED_COLUMNS: usize = 27;
const INTERCEPT_BRACKET: (f64, f64) = (-30.0, 30.0);
const PREVALENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatentNoise {
    Normal,
    StudentT { df: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    Identity,
    Asinh,
    Square,
}

/// Marginal law of one predictor before standardization.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Normal { sd: f64 },
    ScaledT { scale: f64, df: f64 },
    Gamma { shape: f64, scale: f64 },
    LogNormal { sigma: f64 },
    Beta { a: f64, b: f64 },
    Uniform,
    Bernoulli { p: f64 },
    Categorical { probs: Vec<f64> },
    /// `g(sqrt(rho) Z + sqrt(1 - rho) eps)` with a row-shared `Z`.
    Latent { noise: LatentNoise, link: Link },
}

impl Marginal {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Marginal::Bernoulli { .. } => ColumnKind::Binary,
            Marginal::Categorical { probs } => ColumnKind::Categorical {
                levels: probs.len() as u8,
            },
            _ => ColumnKind::Continuous,
        }
    }

    fn sample_column(&self, n: usize, latent: &[f64], seed: SeedPath) -> Result<Vec<f64>> {
        let mut rng = seed.rng();
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("bad marginal: {e}"));
        let col: Vec<f64> = match self {
            Marginal::Normal { sd } => {
                let d = Normal::new(0.0, *sd).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).collect()
            }
            Marginal::ScaledT { scale, df } => {
                let d = StudentT::new(*df).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).map(|t| scale * t).collect()
            }
            Marginal::Gamma { shape, scale } => {
                let d = Gamma::new(*shape, *scale).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).collect()
            }
            Marginal::LogNormal { sigma } => {
                let d = LogNormal::new(0.0, *sigma).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).collect()
            }
            Marginal::Beta { a, b } => {
                let d = Beta::new(*a, *b).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).collect()
            }
            Marginal::Uniform => (0..n).map(|_| rng.random::<f64>()).collect(),
            Marginal::Bernoulli { p } => (0..n)
                .map(|_| if rng.random::<f64>() < *p { 1.0 } else { 0.0 })
                .collect(),
            Marginal::Categorical { probs } => (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    for (level, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            return level as f64;
                        }
                    }
                    (probs.len() - 1) as f64
                })
                .collect(),
            Marginal::Latent { noise, link } => {
                let w_latent = LATENT_RHO.sqrt();
                let w_noise = (1.0 - LATENT_RHO).sqrt();
                let t = match noise {
                    LatentNoise::StudentT { df } => {
                        Some(StudentT::new(*df).map_err(|e| bad(&e))?)
                    }
                    LatentNoise::Normal => None,
                };
                latent
                    .iter()
                    .map(|&z| {
                        let eps: f64 = match &t {
                            Some(t) => t.sample(&mut rng),
                            None => rng.sample(StandardNormal),
                        };
                        let v = w_latent * z + w_noise * eps;
                        match link {
                            Link::Identity => v,
                            Link::Asinh => v.asinh(),
                            Link::Square => v * v,
                        }
                    })
                    .collect()
            }
        };
        Ok(col)
    }
}

/// Column layout of a generated design.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSchema {
    observed: usize,
    columns: Vec<Marginal>,
}

impl PredictorSchema {
    /// The simulation schema for `p = 10` or `p >= 30`.
    pub fn appendix(p: usize) -> Result<Self> {
        if p != 10 && p < 30 {
            return config_err(format!(
                "p = {p} has no predictor schema; use p = 10, p = 30, or p > 30 \
                 (noise columns appended), or supply a custom schema"
            ));
        }
        let mut columns = vec![
            Marginal::Normal { sd: 1.2 },
            Marginal::ScaledT { scale: 1.5, df: 5.0 },
            Marginal::Normal { sd: 1.0 },
            Marginal::Normal { sd: 0.25 },
            Marginal::Gamma { shape: 2.0, scale: 0.5 },
            Marginal::Bernoulli { p: 0.4 },
            Marginal::Bernoulli { p: 0.5 },
            Marginal::Categorical { probs: vec![0.6, 0.3, 0.1] },
            Marginal::Normal { sd: 3.0 },
            Marginal::Bernoulli { p: 0.5 },
            Marginal::LogNormal { sigma: 0.6 },
            Marginal::Beta { a: 2.0, b: 5.0 },
        ];
        if p >= 30 {
            columns.extend([
                Marginal::Latent { noise: LatentNoise::Normal, link: Link::Identity },
                Marginal::Latent { noise: LatentNoise::StudentT { df: 7.0 }, link: Link::Identity },
                Marginal::Latent { noise: LatentNoise::Normal, link: Link::Asinh },
                Marginal::Gamma { shape: 2.2, scale: 0.7 },
                Marginal::LogNormal { sigma: 0.5 },
                Marginal::Uniform,
                Marginal::Bernoulli { p: 0.35 },
                Marginal::Bernoulli { p: 0.45 },
                Marginal::Bernoulli { p: 0.25 },
                Marginal::Bernoulli { p: 0.55 },
                Marginal::Bernoulli { p: 0.40 },
                Marginal::Categorical { probs: vec![0.50, 0.35, 0.15] },
                Marginal::Categorical { probs: vec![0.55, 0.25, 0.15, 0.05] },
                Marginal::Categorical { probs: vec![0.65, 0.25, 0.10] },
                Marginal::Bernoulli { p: 0.06 },
            ]);
            for appended in 1..=(p - EXTENDED_COLUMNS) {
                let link = if appended % 4 == 0 { Link::Square } else { Link::Identity };
                columns.push(Marginal::Latent { noise: LatentNoise::Normal, link });
            }
        }
        Ok(PredictorSchema { observed: p, columns })
    }

    /// A schema with arbitrary columns. The outcome models read `x1..x12`,
    /// so at least twelve columns must be generated.
    pub fn custom(observed: usize, columns: Vec<Marginal>) -> Result<Self> {
        if columns.len() < CORE_COLUMNS {
            return config_err(format!(
                "custom schema has {} columns, the outcome models need at least {CORE_COLUMNS}",
                columns.len()
            ));
        }
        if observed == 0 || observed > columns.len() {
            return config_err(format!(
                "observed column count {observed} outside 1..={}",
                columns.len()
            ));
        }
        Ok(PredictorSchema { observed, columns })
    }

    /// Number of columns the forests see.
    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn total(&self) -> usize {
        self.columns.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.columns
    }

    pub fn kinds(&self) -> Vec<ColumnKind> {
        self.columns.iter().map(Marginal::kind).collect()
    }

    /// Whether the `x13..x27` outcome terms are active.
    pub fn extended(&self) -> bool {
        self.observed >= 30 && self.columns.len() >= EXTENDED_COLUMNS
    }
}

/// A realized covariate configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    schema: PredictorSchema,
    full: FeatureMatrix,
}

impl Design {
    pub fn schema(&self) -> &PredictorSchema {
        &self.schema
    }

    /// All generated columns, including auxiliary ones.
    pub fn full(&self) -> &FeatureMatrix {
        &self.full
    }

    /// Columns visible to the forests.
    pub fn observed(&self) -> FeatureMatrix {
        self.full.leading_columns(self.schema.observed)
    }

    pub fn n(&self) -> usize {
        self.full.n_rows()
    }

    /// Pairs a schema with an already generated matrix of all its columns.
    pub fn from_parts(schema: PredictorSchema, full: FeatureMatrix) -> Self {
        assert_eq!(full.n_cols(), schema.total(), "matrix width differs from the schema");
        Design { schema, full }
    }
}

/// Centres and scales to sample mean 0 and sample variance 1 (divisor
/// `n - 1`). Constant columns are only centred.
pub fn standardize(col: &mut [f64]) {
    let n = col.len();
    if n < 2 {
        return;
    }
    let m = col.iter().sum::<f64>() / n as f64;
    col.iter_mut().for_each(|v| *v -= m);
    // second centring pass removes the residual rounding in the mean
    let m2 = col.iter().sum::<f64>() / n as f64;
    col.iter_mut().for_each(|v| *v -= m2);
    let ss: f64 = col.iter().map(|v| v * v).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    if sd > 0.0 {
        col.iter_mut().for_each(|v| *v /= sd);
    }
}

pub fn gen_predictors(n: usize, p: usize, seed: u64) -> Result<Design> {
    gen_with_schema(PredictorSchema::appendix(p)?, n, seed)
}

pub fn gen_with_schema(schema: PredictorSchema, n: usize, seed: u64) -> Result<Design> {
    if n < 2 {
        return data_err(format!("need at least 2 rows, got {n}"));
    }
    let root = SeedPath::new(seed);
    let latent: Vec<f64> = {
        let mut rng = root.child("latent").rng();
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    };
    let mut columns = Vec::with_capacity(schema.total());
    for (j, marginal) in schema.columns.iter().enumerate() {
        let mut col =
            marginal.sample_column(n, &latent, root.child("predictor").index(j as u64))?;
        if marginal.kind().is_continuous() {
            standardize(&mut col);
        }
        columns.push(col);
    }
    let full = FeatureMatrix::from_columns(&columns)?;
    Ok(Design { schema, full })
}

/// Anchored jittered cloud: rows resampled with replacement, Gaussian
/// jitter on continuous columns only.
pub fn make_test_points(design: &Design, n_test: usize, jitter_sd: f64, seed: u64) -> Result<Design> {
    if n_test == 0 {
        return config_err("n_test must be at least 1");
    }
    if !(jitter_sd >= 0.0) {
        return config_err(format!("jitter sd must be non-negative, got {jitter_sd}"));
    }
    let kinds = design.schema.kinds();
    let mut rng = SeedPath::new(seed).child("test-points").rng();
    let n = design.n();
    let mut values = Vec::with_capacity(n_test * kinds.len());
    for _ in 0..n_test {
        let anchor = design.full.row(rng.random_range(0..n));
        for (v, kind) in anchor.iter().zip(&kinds) {
            if kind.is_continuous() && jitter_sd > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                values.push(v + jitter_sd * z);
            } else {
                values.push(*v);
            }
        }
    }
    let full = FeatureMatrix::new(n_test, kinds.len(), values)?;
    Ok(Design {
        schema: design.schema.clone(),
        full,
    })
}

#[inline]
fn ind(c: bool) -> f64 {
    if c {
        1.0
    } else {
        0.0
    }
}

pub fn inv_logit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Conditional mean of the continuous outcome. `c3` is the centring
/// constant of the squared `x3` term. Row indices are `x_j = row[j - 1]`.
pub fn mu_continuous(row: &[f64], extended: bool, c3: f64) -> f64 {
    let x = |j: usize| row[j - 1];
    let gate12 = ind(x(12) > 1.0);
    let mut mu = 0.90 * (1.1 * x(1)).sin()
        + 0.35 * x(2)
        + 0.55 * (x(3) * x(3) - c3)
        + 0.18 * x(4)
        + 0.30 * ind(x(5) > 0.4)
        + 0.22 * x(6)
        + 0.18 * ind(x(8) == 1.0)
        + 0.28 * ind(x(8) == 2.0)
        + 0.45 * x(11).sin()
        + 0.25 * gate12
        + 0.18 * (x(1) * x(2))
        + 0.12 * (x(11).sin() * gate12);
    if extended {
        mu += 0.18 * x(13)
            + 0.12 * x(15).sin()
            + 0.10 * ind(x(16) > 0.0)
            + 0.10 * x(19)
            + 0.08 * x(20)
            + 0.10 * ind(x(24) == 2.0)
            + 0.10 * ind(x(25) == 1.0)
            + 0.10 * (x(13) * x(19))
            + 0.08 * (x(20) * gate12);
    }
    mu
}

/// Conditional standard deviation of the continuous outcome, floored at
/// [`SIGMA_FLOOR`].
pub fn sigma_continuous(row: &[f64], extended: bool) -> f64 {
    let x = |j: usize| row[j - 1];
    let mut raw = 0.65
        + 0.25 * x(1).abs()
        + 0.15 * x(2).abs()
        + 0.15 * ind(x(5) > 0.4)
        + 0.12 * ind(x(12) > 1.0);
    if extended {
        raw += 0.08 * x(19) + 0.08 * ind(x(24) == 2.0) + 0.08 * x(27);
    }
    raw.max(SIGMA_FLOOR)
}

/// Logistic linear predictor without intercept.
pub fn eta_binary(row: &[f64], extended: bool, c3: f64) -> f64 {
    let x = |j: usize| row[j - 1];
    let gate12 = ind(x(12) > 1.1);
    let is8_2 = ind(x(8) == 2.0);
    let mut eta = 0.55 * x(1)
        + 0.35 * x(2)
        + 0.45 * (x(3) * x(3) - c3)
        + 0.20 * x(4)
        + 0.35 * x(5)
        + 0.25 * x(6)
        + 0.15 * x(7)
        + 0.18 * ind(x(8) == 1.0)
        + 0.28 * is8_2
        + 0.10 * x(9)
        + 0.12 * x(10)
        + 0.35 * x(11).sin()
        + 0.22 * gate12
        + 0.12 * (x(2).powi(3) - 3.0 * x(2))
        + 0.18 * (x(1) * x(2))
        + 0.18 * (x(1) * x(6))
        + 0.15 * (x(3) * is8_2)
        + 0.12 * (x(11).sin() * gate12);
    if extended {
        eta += 0.18 * x(13)
            + 0.12 * x(14)
            + 0.10 * x(15).sin()
            + 0.14 * ind(x(16) > 0.0)
            + 0.10 * x(17)
            + 0.08 * ind(x(18) > 0.5)
            + 0.12 * x(19)
            + 0.10 * x(20)
            - 0.08 * x(21)
            + 0.10 * x(22)
            + 0.08 * x(23)
            + 0.10 * ind(x(24) == 2.0)
            + 0.10 * ind(x(25) == 3.0)
            + 0.08 * ind(x(26) == 1.0)
            + 0.10 * x(27)
            + 0.12 * (x(13) * x(19))
            + 0.10 * (x(14) * ind(x(24) == 1.0))
            + 0.10 * (x(20) * gate12);
    }
    eta
}

/// Intercept `a0` with `mean(inv_logit(a0 + eta_i)) = target`, by bisection.
pub fn calibrate_intercept(eta: &[f64], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return config_err(format!("target prevalence {target} outside (0, 1)"));
    }
    if eta.is_empty() {
        return data_err("cannot calibrate on zero rows");
    }
    let prevalence = |a: f64| eta.iter().map(|e| inv_logit(a + e)).sum::<f64>() / eta.len() as f64;
    let (mut lo, mut hi) = INTERCEPT_BRACKET;
    if prevalence(lo) > target || prevalence(hi) < target {
        return Err(Error::Undefined(format!(
            "target prevalence {target} not bracketed by intercepts in [{lo}, {hi}]"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let resid = prevalence(mid) - target;
        if resid.abs() < PREVALENCE_TOL || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if resid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome model with its design-dependent constants frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeModelSpec {
    pub kind: OutcomeKind,
    pub extended: bool,
    /// Realized sample mean of `x3^2`.
    pub c3: f64,
    /// Calibrated intercept (binary only, zero otherwise).
    pub intercept: f64,
}

impl OutcomeModelSpec {
    pub fn new(kind: OutcomeKind, design: &Design) -> Result<Self> {
        let full = design.full();
        let c3 = full.rows().map(|r| r[2] * r[2]).sum::<f64>() / full.n_rows() as f64;
        let extended = design.schema().extended();
        let mut spec = OutcomeModelSpec {
            kind,
            extended,
            c3,
            intercept: 0.0,
        };
        if kind == OutcomeKind::Binary {
            let eta: Vec<f64> = full.rows().map(|r| eta_binary(r, extended, c3)).collect();
            spec.intercept = calibrate_intercept(&eta, TARGET_PREVALENCE)?;
        }
        Ok(spec)
    }

    /// `mu(x)` for continuous outcomes, `p(x)` for binary ones.
    pub fn conditional_mean(&self, row: &[f64]) -> f64 {
        match self.kind {
            OutcomeKind::Continuous => mu_continuous(row, self.extended, self.c3),
            OutcomeKind::Binary => inv_logit(self.intercept + eta_binary(row, self.extended, self.c3)),
        }
    }

    pub fn conditional_sd(&self, row: &[f64]) -> f64 {
        match self.kind {
            OutcomeKind::Continuous => sigma_continuous(row, self.extended),
            OutcomeKind::Binary => {
                let p = self.conditional_mean(row);
                (p * (1.0 - p)).sqrt()
            }
        }
    }

    /// The law of `Y | X` at every row of `full`.
    pub fn law(&self, full: &FeatureMatrix) -> ConditionalLaw {
        match self.kind {
            OutcomeKind::Continuous => ConditionalLaw::Gaussian {
                mean: full.rows().map(|r| self.conditional_mean(r)).collect(),
                sd: full.rows().map(|r| self.conditional_sd(r)).collect(),
            },
            OutcomeKind::Binary => ConditionalLaw::Bernoulli {
                prob: full.rows().map(|r| self.conditional_mean(r)).collect(),
            },
        }
    }
}

pub fn draw_outcomes(design: &Design, spec: &OutcomeModelSpec, seed: u64) -> Vec<f64> {
    spec.law(design.full()).draw(SeedPath::new(seed).child("outcomes"))
}

//! Row-wise conditional outcome laws at a fixed covariate configuration.
//!
//! The same type describes the true data-generating law of a simulation
//! and the fitted synthetic law used for resampling.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::OutcomeKind;
use crate::rng::SeedPath;

#[derive(Debug, Clone, PartialEq)]
pub enum ConditionalLaw {
    /// `Y_i = mean_i + sd_i * Z_i` with independent standard normal `Z_i`.
    Gaussian { mean: Vec<f64>, sd: Vec<f64> },
    /// `Y_i ~ Bernoulli(prob_i)` independently.
    Bernoulli { prob: Vec<f64> },
}

impl ConditionalLaw {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            ConditionalLaw::Gaussian { .. } => OutcomeKind::Continuous,
            ConditionalLaw::Bernoulli { .. } => OutcomeKind::Binary,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ConditionalLaw::Gaussian { mean, .. } => mean.len(),
            ConditionalLaw::Bernoulli { prob } => prob.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Conditional mean of row `i`.
    pub fn mean(&self, i: usize) -> f64 {
        match self {
            ConditionalLaw::Gaussian { mean, .. } => mean[i],
            ConditionalLaw::Bernoulli { prob } => prob[i],
        }
    }

    /// Conditional variance of row `i`.
    pub fn variance(&self, i: usize) -> f64 {
        match self {
            ConditionalLaw::Gaussian { sd, .. } => sd[i] * sd[i],
            ConditionalLaw::Bernoulli { prob } => prob[i] * (1.0 - prob[i]),
        }
    }

    /// Draws one outcome vector.
    pub fn draw(&self, seed: SeedPath) -> Vec<f64> {
        let mut rng = seed.rng();
        match self {
            ConditionalLaw::Gaussian { mean, sd } => mean
                .iter()
                .zip(sd)
                .map(|(&m, &s)| {
                    let z: f64 = rng.sample(StandardNormal);
                    m + s * z
                })
                .collect(),
            ConditionalLaw::Bernoulli { prob } => prob
                .iter()
                .map(|&p| {
                    let u: f64 = rng.random();
                    if u < p {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn zero_sd_reproduces_the_mean() {
        let law = ConditionalLaw::Gaussian {
            mean: vec![0.3, -1.0, 2.5],
            sd: vec![0.0; 3],
        };
        assert_eq!(law.draw(SeedPath::new(4)), vec![0.3, -1.0, 2.5]);
    }

    #[test]
    fn degenerate_probabilities() {
        let ones = ConditionalLaw::Bernoulli { prob: vec![1.0; 50] };
        assert!(ones.draw(SeedPath::new(1)).iter().all(|&v| v == 1.0));
        let zeros = ConditionalLaw::Bernoulli { prob: vec![0.0; 50] };
        assert!(zeros.draw(SeedPath::new(1)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_gaussian_has_unit_variance() {
        let n = 10_000;
        let law = ConditionalLaw::Gaussian {
            mean: vec![0.0; n],
            sd: vec![1.0; n],
        };
        let y = law.draw(SeedPath::new(2024));
        let v = stats::variance(&y).unwrap();
        assert!((v - 1.0).abs() < 0.05, "variance {v}");
    }
}

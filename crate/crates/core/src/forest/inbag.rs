use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Sampling;
use crate::error::{config_err, Result};

/// Per-observation inclusion multiplicities of one tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InbagVector {
    counts: Vec<u32>,
}

impl InbagVector {
    pub fn draw<R: Rng + ?Sized>(sampling: Sampling, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return config_err("cannot resample zero observations");
        }
        let mut counts = vec![0u32; n];
        match sampling {
            Sampling::Bootstrap => {
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
            }
            Sampling::Subsample { fraction } => {
                let k = subsample_size(fraction, n)?;
                if k == n {
                    counts.fill(1);
                } else {
                    for i in rand::seq::index::sample(rng, n, k) {
                        counts[i] = 1;
                    }
                }
            }
        }
        Ok(InbagVector { counts })
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        InbagVector { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn distinct(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn is_oob(&self, i: usize) -> bool {
        self.counts[i] == 0
    }
}

pub(crate) fn subsample_size(fraction: f64, n: usize) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return config_err(format!("subsample fraction {fraction} outside (0, 1]"));
    }
    let k = (fraction * n as f64).round() as usize;
    if k == 0 {
        return config_err(format!(
            "subsample fraction {fraction} of {n} rows selects no observations"
        ));
    }
    Ok(k.min(n))
}

//! Size of the intersection of two random candidate sets.

use rand::seq::index::sample;

use super::report::Report;
use crate::error::{config_err, Result};
use crate::rng::SeedPath;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapResult {
    pub p: usize,
    pub q: usize,
    pub trials: usize,
    pub mean: f64,
    pub se: f64,
}

impl OverlapResult {
    /// Expected overlap `q^2 / p` of two uniform size-`q` subsets.
    pub fn expected(&self) -> f64 {
        (self.q * self.q) as f64 / self.p as f64
    }

    pub fn within(&self, k: f64) -> bool {
        let d = (self.mean - self.expected()).abs();
        if self.se == 0.0 {
            d == 0.0
        } else {
            d <= k * self.se
        }
    }

    pub fn report(results: &[OverlapResult]) -> Report {
        let mut r = Report::new("overlap", None);
        for o in results {
            let g = format!("p={};q={}", o.p, o.q);
            r.push("mean_overlap", g.clone(), None, o.mean);
            r.push("se", g.clone(), None, o.se);
            r.push("expected", g.clone(), None, o.expected());
            r.check(
                &format!("overlap_{g}"),
                o.within(3.0),
                format!("mean {:.4} vs {:.4} (SE {:.2e})", o.mean, o.expected(), o.se),
            );
        }
        r
    }
}

pub fn candidate_overlap_sim(p: usize, q: usize, trials: usize, seed: u64) -> Result<OverlapResult> {
    if q == 0 || q > p {
        return config_err(format!("candidate-set size q = {q} must lie in 1..={p}"));
    }
    if trials == 0 {
        return config_err("at least one trial is needed");
    }
    let mut rng = SeedPath::new(seed).child("overlap").rng();
    let mut mark = vec![false; p];
    let counts: Vec<f64> = (0..trials)
        .map(|_| {
            mark.iter_mut().for_each(|m| *m = false);
            for j in sample(&mut rng, p, q) {
                mark[j] = true;
            }
            sample(&mut rng, p, q).into_iter().filter(|&j| mark[j]).count() as f64
        })
        .collect();
    let se = if trials > 1 { stats::std_error(&counts) } else { 0.0 };
    Ok(OverlapResult {
        p,
        q,
        trials,
        mean: stats::mean(&counts),
        se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_candidate_sets_overlap_completely() {
        let o = candidate_overlap_sim(7, 7, 100, 1).unwrap();
        assert_eq!(o.mean, 7.0);
        assert_eq!(o.se, 0.0);
        assert!(o.within(3.0));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(candidate_overlap_sim(5, 0, 10, 1).is_err());
        assert!(candidate_overlap_sim(5, 6, 10, 1).is_err());
        assert!(candidate_overlap_sim(5, 2, 0, 1).is_err());
    }
}

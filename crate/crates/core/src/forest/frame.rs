//! Per-feature dense ranks of a fixed covariate matrix, computed once and
//! shared by every tree grown on it.

use crate::data::FeatureMatrix;

#[derive(Debug, Clone)]
pub struct TrainingFrame {
    x: FeatureMatrix,
    /// Column-major dense ranks: `ranks[j * n + i]` indexes `levels[j]`.
    ranks: Vec<u32>,
    /// Column-major row orders by `(value, row)`.
    orders: Vec<u32>,
    levels: Vec<Vec<f64>>,
}

impl TrainingFrame {
    pub fn new(x: FeatureMatrix) -> Self {
        let n = x.n_rows();
        let p = x.n_cols();
        let mut ranks = vec![0u32; n * p];
        let mut orders = Vec::with_capacity(n * p);
        let mut levels = Vec::with_capacity(p);
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for j in 0..p {
            order.clear();
            order.extend(0..n);
            order.sort_by(|&a, &b| x.get(a, j).total_cmp(&x.get(b, j)).then(a.cmp(&b)));
            orders.extend(order.iter().map(|&i| i as u32));
            let mut lv: Vec<f64> = Vec::new();
            for &i in &order {
                let v = x.get(i, j);
                if lv.last() != Some(&v) {
                    lv.push(v);
                }
                ranks[j * n + i] = (lv.len() - 1) as u32;
            }
            levels.push(lv);
        }
        TrainingFrame {
            x,
            ranks,
            orders,
            levels,
        }
    }

    pub fn x(&self) -> &FeatureMatrix {
        &self.x
    }

    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.n_cols()
    }

    #[inline]
    pub(crate) fn ranks(&self, j: usize) -> &[u32] {
        let n = self.n_rows();
        &self.ranks[j * n..(j + 1) * n]
    }

    #[inline]
    pub(crate) fn order(&self, j: usize) -> &[u32] {
        let n = self.n_rows();
        &self.orders[j * n..(j + 1) * n]
    }

    #[inline]
    pub(crate) fn levels(&self, j: usize) -> &[f64] {
        &self.levels[j]
    }

    pub(crate) fn max_levels(&self) -> usize {
        self.levels.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Split point strictly between two adjacent distinct values: `a` routes
    /// left (`x <= t`) and `b` routes right.
    pub(crate) fn threshold(&self, j: usize, lo_rank: u32, hi_rank: u32) -> f64 {
        let a = self.levels[j][lo_rank as usize];
        let b = self.levels[j][hi_rank as usize];
        let mid = a + (b - a) / 2.0;
        if mid < b {
            mid
        } else {
            a
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_are_dense_and_ordered() {
        let x = FeatureMatrix::from_columns(&[vec![3.0, 1.0, 3.0, -2.0]]).unwrap();
        let f = TrainingFrame::new(x);
        assert_eq!(f.levels(0), &[-2.0, 1.0, 3.0]);
        assert_eq!(f.ranks(0), &[2, 1, 2, 0]);
        assert_eq!(f.threshold(0, 0, 1), -0.5);
    }

    #[test]
    fn threshold_separates_adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let x = FeatureMatrix::from_columns(&[vec![a, b]]).unwrap();
        let f = TrainingFrame::new(x);
        let t = f.threshold(0, 0, 1);
        assert!(a <= t && b > t);
    }
}

//! Single regression tree: growth by exhaustive variance-reduction search
//! over a random candidate subset, and weight-based prediction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::frame::TrainingFrame;
use super::inbag::InbagVector;
use crate::rng::StreamRng;

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Split feature, or `u32::MAX` for a leaf.
    pub feature: u32,
    pub threshold: f64,
    /// Left child, or the leaf index for a leaf.
    pub left: u32,
    pub right: u32,
}

impl Node {
    fn placeholder() -> Self {
        Node {
            feature: LEAF,
            threshold: 0.0,
            left: 0,
            right: 0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub start: u32,
    pub len: u32,
    /// Multiplicity-weighted mean of member outcomes.
    pub value: f64,
    /// Total inbag multiplicity of the members.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    leaves: Vec<Leaf>,
    members: Vec<u32>,
    counts: Vec<u32>,
    inbag: InbagVector,
    seed: u64,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn inbag(&self) -> &InbagVector {
        &self.inbag
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of training rows the tree was grown on.
    pub fn n_train(&self) -> usize {
        self.inbag.len()
    }

    /// Member rows and their multiplicities for leaf `l`.
    pub fn leaf_members(&self, l: usize) -> (&[u32], &[u32]) {
        let leaf = &self.leaves[l];
        let r = leaf.start as usize..(leaf.start + leaf.len) as usize;
        (&self.members[r.clone()], &self.counts[r])
    }

    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut k = 0usize;
        loop {
            let node = &self.nodes[k];
            if node.feature == LEAF {
                return node.left as usize;
            }
            k = if x[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.leaves[self.leaf_index(x)].value
    }

    /// Prediction with the partition frozen and the outcomes replaced by `y`.
    pub fn predict_with(&self, x: &[f64], y: &[f64]) -> f64 {
        let (rows, counts) = self.leaf_members(self.leaf_index(x));
        let mut w = 0.0;
        let mut s = 0.0;
        for (&i, &c) in rows.iter().zip(counts) {
            w += f64::from(c);
            s += f64::from(c) * y[i as usize];
        }
        s / w
    }

    /// Weight of every training row in the prediction at `x`.
    pub fn weights(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_train()];
        self.add_weights(x, 1.0, &mut out);
        out
    }

    pub(crate) fn add_weights(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let l = self.leaf_index(x);
        let total = self.leaves[l].weight;
        let (rows, counts) = self.leaf_members(l);
        for (&i, &c) in rows.iter().zip(counts) {
            out[i as usize] += scale * f64::from(c) / total;
        }
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((k, d)) = stack.pop() {
            let node = &self.nodes[k];
            if node.is_leaf() {
                best = best.max(d);
            } else {
                stack.push((node.left as usize, d + 1));
                stack.push((node.right as usize, d + 1));
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub mtry: usize,
    pub min_leaf: f64,
    pub max_depth: Option<usize>,
}

struct Pending {
    node: usize,
    lo: usize,
    hi: usize,
    depth: usize,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    lo_rank: u32,
    hi_rank: u32,
}

/// Presorted column orders are maintained when the candidate set is a large
/// enough share of the columns; otherwise each candidate is sorted per node.
const PRESORT_RATIO: usize = 8;

/// Reusable scratch space for growing trees on one frame.
pub(crate) struct TreeGrower {
    /// Node rows. In presorted mode, block `j` (of length `m`) holds the rows
    /// ordered by feature `j` within each node segment.
    rows: Vec<u32>,
    m: usize,
    presorted: bool,
    goes_left: Vec<bool>,
    spill: Vec<u32>,
    w: Vec<f64>,
    wy: Vec<f64>,
    keys: Vec<u64>,
    bucket_w: Vec<f64>,
    bucket_s: Vec<f64>,
    features: Vec<usize>,
    candidates: Vec<usize>,
    stack: Vec<Pending>,
}

impl TreeGrower {
    pub fn new(frame: &TrainingFrame) -> Self {
        let n = frame.n_rows();
        let l = frame.max_levels();
        TreeGrower {
            rows: Vec::with_capacity(n),
            m: 0,
            presorted: false,
            goes_left: vec![false; n],
            spill: vec![0; n + 1],
            w: vec![0.0; n],
            wy: vec![0.0; n],
            keys: Vec::with_capacity(n),
            bucket_w: vec![0.0; l],
            bucket_s: vec![0.0; l],
            features: (0..frame.n_cols()).collect(),
            candidates: Vec::with_capacity(frame.n_cols()),
            stack: Vec::new(),
        }
    }

    pub fn grow(
        &mut self,
        frame: &TrainingFrame,
        y: &[f64],
        inbag: InbagVector,
        params: &GrowParams,
        rng: &mut StreamRng,
        seed: u64,
    ) -> Tree {
        self.load(frame, y, &inbag, params);
        // the candidate draw permutes this in place; start every tree from
        // the same order so a reused grower matches a fresh one
        self.features.iter_mut().enumerate().for_each(|(k, f)| *f = k);
        let mut nodes = vec![Node::placeholder()];
        let mut leaves = Vec::new();
        let mut members = Vec::with_capacity(self.m);
        let mut counts = Vec::with_capacity(self.m);
        self.stack.clear();
        self.stack.push(Pending {
            node: 0,
            lo: 0,
            hi: self.m,
            depth: 0,
        });
        while let Some(p) = self.stack.pop() {
            let seg = &self.rows[p.lo..p.hi];
            let mut total_w = 0.0;
            let mut total_s = 0.0;
            let first_y = seg.first().map_or(0.0, |&i| y[i as usize]);
            let mut pure = true;
            for &i in seg {
                let i = i as usize;
                total_w += self.w[i];
                total_s += self.wy[i];
                pure &= y[i] == first_y;
            }
            let splittable = seg.len() >= 2
                && total_w >= 2.0 * params.min_leaf
                && params.max_depth.is_none_or(|d| p.depth < d)
                && !pure;
            let split = if splittable {
                self.best_split(frame, &p, total_w, total_s, params, rng)
            } else {
                None
            };
            match split {
                None => {
                    let start = members.len() as u32;
                    let mut w = 0.0;
                    let mut s = 0.0;
                    for &i in &self.rows[p.lo..p.hi] {
                        let c = inbag.counts()[i as usize];
                        members.push(i);
                        counts.push(c);
                        w += f64::from(c);
                        s += f64::from(c) * y[i as usize];
                    }
                    nodes[p.node].left = leaves.len() as u32;
                    leaves.push(Leaf {
                        start,
                        len: (p.hi - p.lo) as u32,
                        value: s / w,
                        weight: w,
                    });
                }
                Some(sp) => {
                    let mid = self.partition(frame, &p, &sp);
                    let left = nodes.len();
                    nodes.push(Node::placeholder());
                    nodes.push(Node::placeholder());
                    nodes[p.node] = Node {
                        feature: sp.feature as u32,
                        threshold: frame.threshold(sp.feature, sp.lo_rank, sp.hi_rank),
                        left: left as u32,
                        right: left as u32 + 1,
                    };
                    self.stack.push(Pending {
                        node: left + 1,
                        lo: mid,
                        hi: p.hi,
                        depth: p.depth + 1,
                    });
                    self.stack.push(Pending {
                        node: left,
                        lo: p.lo,
                        hi: mid,
                        depth: p.depth + 1,
                    });
                }
            }
        }
        Tree {
            nodes,
            leaves,
            members,
            counts,
            inbag,
            seed,
        }
    }

    fn load(&mut self, frame: &TrainingFrame, y: &[f64], inbag: &InbagVector, params: &GrowParams) {
        let c = inbag.counts();
        for (i, &k) in c.iter().enumerate() {
            let k = f64::from(k);
            self.w[i] = k;
            self.wy[i] = k * y[i];
        }
        self.m = c.iter().filter(|&&k| k > 0).count();
        self.presorted = frame.n_cols() <= PRESORT_RATIO * params.mtry;
        self.rows.clear();
        if self.presorted {
            for j in 0..frame.n_cols() {
                self.rows
                    .extend(frame.order(j).iter().filter(|&&i| c[i as usize] > 0));
            }
        } else {
            self.rows
                .extend((0..c.len() as u32).filter(|&i| c[i as usize] > 0));
        }
    }

    /// Splits the node segment into left and right parts; returns the
    /// boundary.
    fn partition(&mut self, frame: &TrainingFrame, p: &Pending, sp: &Split) -> usize {
        let ranks = frame.ranks(sp.feature);
        if !self.presorted {
            let seg = &mut self.rows[p.lo..p.hi];
            let mut mid = 0;
            for k in 0..seg.len() {
                if ranks[seg[k] as usize] <= sp.lo_rank {
                    seg.swap(mid, k);
                    mid += 1;
                }
            }
            return p.lo + mid;
        }
        let mut n_left = 0;
        for &i in &self.rows[p.lo..p.hi] {
            let left = ranks[i as usize] <= sp.lo_rank;
            self.goes_left[i as usize] = left;
            n_left += usize::from(left);
        }
        for j in 0..frame.n_cols() {
            let seg = &mut self.rows[j * self.m + p.lo..j * self.m + p.hi];
            // branch-free stable partition: every row is written to both
            // outputs and only the matching cursor advances
            let spill = &mut self.spill[..seg.len() + 1];
            let mut out = 0;
            let mut over = 0;
            for k in 0..seg.len() {
                let i = seg[k];
                let left = usize::from(self.goes_left[i as usize]);
                seg[out] = i;
                spill[over] = i;
                out += left;
                over += 1 - left;
            }
            seg[out..].copy_from_slice(&spill[..over]);
        }
        p.lo + n_left
    }

    fn best_split(
        &mut self,
        frame: &TrainingFrame,
        p: &Pending,
        total_w: f64,
        total_s: f64,
        params: &GrowParams,
        rng: &mut StreamRng,
    ) -> Option<Split> {
        let n_feat = self.features.len();
        for k in 0..params.mtry {
            let j = rng.random_range(k..n_feat);
            self.features.swap(k, j);
        }
        self.candidates.clear();
        self.candidates.extend_from_slice(&self.features[..params.mtry]);
        self.candidates.sort_unstable();

        let min_leaf = params.min_leaf;
        let mut best: Option<Split> = None;
        let mut best_gain = 0.0;
        let mut consider = |feature: usize, wl: f64, sl: f64, lo_rank: u32, hi_rank: u32| {
            let wr = total_w - wl;
            if wl < min_leaf || wr < min_leaf {
                return;
            }
            let d = sl / wl - (total_s - sl) / wr;
            let gain = wl * wr / total_w * d * d;
            if gain > best_gain {
                best_gain = gain;
                best = Some(Split {
                    feature,
                    lo_rank,
                    hi_rank,
                });
            }
        };

        for &j in &self.candidates {
            let ranks = frame.ranks(j);
            let n_levels = frame.levels(j).len();
            if n_levels < 2 {
                continue;
            }
            let len = p.hi - p.lo;
            if self.presorted {
                let seg = &self.rows[j * self.m + p.lo..j * self.m + p.hi];
                let mut wl = 0.0;
                let mut sl = 0.0;
                let mut prev = ranks[seg[0] as usize];
                for &i in seg {
                    let r = ranks[i as usize];
                    if r != prev {
                        consider(j, wl, sl, prev, r);
                        prev = r;
                    }
                    wl += self.w[i as usize];
                    sl += self.wy[i as usize];
                }
            } else if n_levels <= 2 * len + 16 {
                let seg = &self.rows[p.lo..p.hi];
                let mut rmin = u32::MAX;
                let mut rmax = 0;
                for &i in seg {
                    let r = ranks[i as usize];
                    rmin = rmin.min(r);
                    rmax = rmax.max(r);
                    self.bucket_w[r as usize] += self.w[i as usize];
                    self.bucket_s[r as usize] += self.wy[i as usize];
                }
                let mut wl = 0.0;
                let mut sl = 0.0;
                let mut prev = rmin;
                for r in rmin..=rmax {
                    let bw = self.bucket_w[r as usize];
                    if bw == 0.0 {
                        continue;
                    }
                    if r > rmin {
                        consider(j, wl, sl, prev, r);
                    }
                    wl += bw;
                    sl += self.bucket_s[r as usize];
                    prev = r;
                    self.bucket_w[r as usize] = 0.0;
                    self.bucket_s[r as usize] = 0.0;
                }
            } else {
                let seg = &self.rows[p.lo..p.hi];
                self.keys.clear();
                self.keys.extend(
                    seg.iter()
                        .map(|&i| (u64::from(ranks[i as usize]) << 32) | u64::from(i)),
                );
                self.keys.sort_unstable();
                let mut wl = 0.0;
                let mut sl = 0.0;
                let mut prev = (self.keys[0] >> 32) as u32;
                for &key in &self.keys {
                    let r = (key >> 32) as u32;
                    let i = (key & 0xffff_ffff) as usize;
                    if r != prev {
                        consider(j, wl, sl, prev, r);
                        prev = r;
                    }
                    wl += self.w[i];
                    sl += self.wy[i];
                }
            }
        }
        best
    }
}

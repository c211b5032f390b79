//! Histogram-based binary decision trees over sparse rows.
//!
//! Feature values are bucketed once per training set; a split "bin <= b"
//! is stored as the real-valued threshold `value <= t_b`, so prediction
//! works directly on raw feature values. Absent sparse entries are zero.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::SparseRow;

pub fn value_at(row: &SparseRow, feature: usize) -> f64 {
    match row.binary_search_by_key(&(feature as u32), |e| e.0) {
        Ok(i) => row[i].1,
        Err(_) => 0.0,
    }
}

pub fn dense_to_sparse(values: &[f64]) -> SparseRow {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i as u32, *v))
        .collect()
}

/// Training rows bucketed per feature.
pub struct Binned {
    pub n_features: usize,
    thresholds: Vec<Vec<f64>>,
    zero_bin: Vec<usize>,
    offsets: Vec<usize>,
    rows: Vec<Vec<(u32, u32)>>,
}

fn bin_of(thresholds: &[f64], v: f64) -> usize {
    thresholds.partition_point(|t| *t < v)
}

impl Binned {
    pub fn new(rows: &[SparseRow], n_features: usize, max_bins: usize) -> Self {
        let max_bins = max_bins.max(2);
        let n = rows.len();
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); n_features];
        for row in rows {
            for &(f, v) in row {
                values[f as usize].push(v);
            }
        }
        let mut thresholds = Vec::with_capacity(n_features);
        for vals in values.iter_mut() {
            let zeros = n - vals.len();
            vals.extend(std::iter::repeat(0.0).take(zeros));
            vals.sort_by(f64::total_cmp);
            let mut distinct = vals.clone();
            distinct.dedup();
            let cuts: Vec<f64> = if distinct.len() <= max_bins {
                distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            } else {
                let mut cuts = Vec::with_capacity(max_bins);
                for j in 1..max_bins {
                    let v = vals[j * vals.len() / max_bins];
                    let next = distinct.partition_point(|d| *d <= v);
                    if next < distinct.len() {
                        cuts.push(0.5 * (v + distinct[next]));
                    }
                }
                cuts.dedup();
                cuts
            };
            thresholds.push(cuts);
        }
        let zero_bin: Vec<usize> = thresholds.iter().map(|t| bin_of(t, 0.0)).collect();
        let mut offsets = Vec::with_capacity(n_features + 1);
        let mut acc = 0;
        for t in &thresholds {
            offsets.push(acc);
            acc += t.len() + 1;
        }
        offsets.push(acc);
        let rows = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&(f, v)| (f, bin_of(&thresholds[f as usize], v) as u32))
                    .collect()
            })
            .collect();
        Self {
            n_features,
            thresholds,
            zero_bin,
            offsets,
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn bin(&self, row: usize, feature: usize) -> usize {
        let r = &self.rows[row];
        match r.binary_search_by_key(&(feature as u32), |e| e.0) {
            Ok(i) => r[i].1 as usize,
            Err(_) => self.zero_bin[feature],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// Information-gain splits on class counts; leaves hold P(ai).
    Entropy,
    /// Second-order (gradient, hessian) splits; leaves hold -G/(H+lambda).
    Newton { lambda: f64, gamma: f64, min_child_weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features drawn per node; `None` considers all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64, samples: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &SparseRow) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if value_at(row, *feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value, .. } = n {
                *value *= factor;
            }
        }
    }
}

type Stat = [f64; 3];

fn add(a: &mut Stat, b: &Stat) {
    a[0] += b[0];
    a[1] += b[1];
    a[2] += b[2];
}

fn sub(a: &Stat, b: &Stat) -> Stat {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn entropy(s: &Stat) -> f64 {
    let n = s[0] + s[1];
    if n <= 0.0 {
        return 0.0;
    }
    [s[0], s[1]]
        .iter()
        .filter(|c| **c > 0.0)
        .map(|c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

const EPS: f64 = 1e-9;

struct Best {
    gain: f64,
    feature: usize,
    bin: usize,
}

struct Builder<'a, R: Rng> {
    data: &'a Binned,
    /// Per-sample statistic: (n_human, n_ai, weight) for entropy,
    /// (grad, hess, weight) for Newton.
    stats: &'a [Stat],
    params: TreeParams,
    objective: Objective,
    rng: &'a mut R,
    hist: Vec<Stat>,
    nz: Vec<Stat>,
    touched: Vec<bool>,
    allowed: Vec<bool>,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn leaf_value(&self, s: &Stat) -> f64 {
        match self.objective {
            Objective::Entropy => {
                let n = s[0] + s[1];
                if n > 0.0 {
                    s[1] / n
                } else {
                    0.5
                }
            }
            Objective::Newton { lambda, .. } => -s[0] / (s[1] + lambda),
        }
    }

    fn child_ok(&self, s: &Stat) -> bool {
        if s[2] < self.params.min_samples_leaf.max(1) as f64 - EPS {
            return false;
        }
        match self.objective {
            Objective::Entropy => true,
            Objective::Newton { min_child_weight, .. } => s[1] >= min_child_weight - EPS,
        }
    }

    fn gain(&self, total: &Stat, left: &Stat, right: &Stat) -> f64 {
        match self.objective {
            Objective::Entropy => {
                let n = total[2];
                entropy(total) - (left[2] / n) * entropy(left) - (right[2] / n) * entropy(right)
            }
            Objective::Newton { lambda, gamma, .. } => {
                let score = |s: &Stat| s[0] * s[0] / (s[1] + lambda);
                0.5 * (score(left) + score(right) - score(total)) - gamma
            }
        }
    }

    fn accept(&self, gain: f64) -> bool {
        match self.objective {
            // Zero-gain splits are allowed so that XOR-like structure can be
            // reached by a deeper split.
            Objective::Entropy => gain > -EPS,
            Objective::Newton { .. } => gain > 1e-12,
        }
    }

    fn scan(&mut self, idx: &[usize], total: &Stat, features: &[usize], best: &mut Option<Best>) {
        for &f in features {
            self.allowed[f] = true;
        }
        let mut touched_list = Vec::new();
        for &i in idx {
            let s = self.stats[i];
            for &(f, b) in &self.data.rows[i] {
                let f = f as usize;
                if !self.allowed[f] {
                    continue;
                }
                if !self.touched[f] {
                    self.touched[f] = true;
                    touched_list.push(f);
                }
                add(&mut self.hist[self.data.offsets[f] + b as usize], &s);
                add(&mut self.nz[f], &s);
            }
        }
        touched_list.sort_unstable();
        for &f in &touched_list {
            let zb = self.data.offsets[f] + self.data.zero_bin[f];
            let rest = sub(total, &self.nz[f]);
            add(&mut self.hist[zb], &rest);
            let nb = self.data.thresholds[f].len() + 1;
            let mut left = [0.0; 3];
            for b in 0..nb - 1 {
                add(&mut left, &self.hist[self.data.offsets[f] + b]);
                let right = sub(total, &left);
                if !self.child_ok(&left) || !self.child_ok(&right) {
                    continue;
                }
                let g = self.gain(total, &left, &right);
                if self.accept(g) && best.as_ref().map_or(true, |bb| g > bb.gain + 1e-12) {
                    *best = Some(Best { gain: g, feature: f, bin: b });
                }
            }
        }
        for &f in &touched_list {
            let (a, b) = (self.data.offsets[f], self.data.offsets[f + 1]);
            self.hist[a..b].iter_mut().for_each(|h| *h = [0.0; 3]);
            self.nz[f] = [0.0; 3];
            self.touched[f] = false;
        }
        for &f in features {
            self.allowed[f] = false;
        }
    }

    fn find_split(&mut self, idx: &[usize], total: &Stat) -> Option<Best> {
        let d = self.data.n_features;
        let mut best = None;
        match self.params.max_features {
            Some(m) if m < d => {
                // Draw features in random order, m at a time, until some
                // valid split turns up.
                let mut order: Vec<usize> = (0..d).collect();
                order.shuffle(self.rng);
                for chunk in order.chunks(m.max(1)) {
                    self.scan(idx, total, chunk, &mut best);
                    if best.is_some() {
                        break;
                    }
                }
            }
            _ => {
                let all: Vec<usize> = (0..d).collect();
                self.scan(idx, total, &all, &mut best);
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let mut total = [0.0; 3];
        for &i in &idx {
            add(&mut total, &self.stats[i]);
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&total),
            samples: total[2],
        });
        let pure = matches!(self.objective, Objective::Entropy) && (total[0] <= EPS || total[1] <= EPS);
        let depth_ok = self.params.max_depth.map_or(true, |m| depth < m);
        if pure || !depth_ok || idx.len() < 2 {
            return id;
        }
        let Some(best) = self.find_split(&idx, &total) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.data.bin(i, best.feature) <= best.bin);
        let threshold = self.data.thresholds[best.feature][best.bin];
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold,
            left: l,
            right: r,
        };
        id
    }
}

/// Grows one tree on the samples with positive weight in `stats`.
pub fn fit_tree(data: &Binned, stats: &[[f64; 3]], params: TreeParams, objective: Objective, rng: &mut impl Rng) -> Tree {
    let idx: Vec<usize> = (0..data.len()).filter(|&i| stats[i][2] > 0.0).collect();
    let total_bins = *data.offsets.last().unwrap_or(&0);
    let mut b = Builder {
        data,
        stats,
        params,
        objective,
        rng,
        hist: vec![[0.0; 3]; total_bins],
        nz: vec![[0.0; 3]; data.n_features],
        touched: vec![false; data.n_features],
        allowed: vec![false; data.n_features],
        nodes: Vec::new(),
    };
    b.build(idx, 0);
    Tree { nodes: b.nodes }
}

/// Entropy statistics for labels 0/1 with per-sample weights.
pub fn class_stats(labels: &[usize], weights: &[f64]) -> Vec<[f64; 3]> {
    labels
        .iter()
        .zip(weights)
        .map(|(&y, &w)| if y == 1 { [0.0, w, w] } else { [w, 0.0, w] })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fit(rows: &[Vec<f64>], labels: &[usize], params: TreeParams) -> Tree {
        let sparse: Vec<SparseRow> = rows.iter().map(|r| dense_to_sparse(r)).collect();
        let data = Binned::new(&sparse, rows[0].len(), 64);
        let stats = class_stats(labels, &vec![1.0; labels.len()]);
        fit_tree(&data, &stats, params, Objective::Entropy, &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn separable_single_feature() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..20).map(|i| (i >= 7) as usize).collect();
        let t = fit(&rows, &labels, TreeParams::default());
        assert_eq!(t.depth(), 1);
        for (r, y) in rows.iter().zip(&labels) {
            assert_eq!((t.predict(&dense_to_sparse(r)) > 0.5) as usize, *y);
        }
        assert_eq!(t.nodes[0], Node::Split { feature: 0, threshold: 6.5, left: 1, right: 2 });
    }

    #[test]
    fn xor_needs_depth_two() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let labels = [0, 1, 1, 0];
        let t = fit(&rows, &labels, TreeParams::default());
        assert_eq!(t.depth(), 2);
        for (r, y) in rows.iter().zip(&labels) {
            assert_eq!((t.predict(&dense_to_sparse(r)) > 0.5) as usize, *y);
        }
        let stump = fit(&rows, &labels, TreeParams { max_depth: Some(1), ..Default::default() });
        assert!(stump.depth() <= 1);
    }

    #[test]
    fn constant_features_give_majority_leaf() {
        let rows = vec![vec![1.0]; 5];
        let t = fit(&rows, &[1, 1, 0, 1, 0], TreeParams::default());
        assert_eq!(t.nodes.len(), 1);
        assert!((t.predict(&dense_to_sparse(&[1.0])) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn many_distinct_values_are_quantized() {
        let rows: Vec<SparseRow> = (0..1000).map(|i| vec![(0, i as f64 + 1.0)]).collect();
        let b = Binned::new(&rows, 1, 16);
        assert!(b.thresholds[0].len() <= 15);
        assert!(b.thresholds[0].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sparse_zero_entries_follow_threshold() {
        let row: SparseRow = vec![(2, 1.5), (5, -0.5)];
        assert_eq!(value_at(&row, 2), 1.5);
        assert_eq!(value_at(&row, 3), 0.0);
        assert_eq!(value_at(&row, 5), -0.5);
    }
}

//! Binary decision trees trained under per-sample weights.
//!
//! Two split strategies share one builder: the extremely randomized rule
//! (K random features, one uniform threshold each, keep the best) and the
//! classical exhaustive search over all midpoints.

use rand::Rng;

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitMode {
    RandomSplit,
    BestSplit,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::RandomSplit => "random_split",
            SplitMode::BestSplit => "best_split",
        }
    }
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_split" => Ok(SplitMode::RandomSplit),
            "best_split" => Ok(SplitMode::BestSplit),
            other => Err(Error::InvalidConfig(format!(
                "unknown split mode {other:?} (expected random_split or best_split)"
            ))),
        }
    }
}

impl std::fmt::Display for SplitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub mode: SplitMode,
    /// Candidate features per node in random mode; `None` means ceil(sqrt(d)).
    pub k_features: Option<usize>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Nodes carrying less than this fraction of the root weight are not split.
    pub min_weighted_fraction_split: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            mode: SplitMode::RandomSplit,
            k_features: None,
            max_depth: 8,
            min_samples_leaf: 20,
            min_weighted_fraction_split: 0.0,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be at least 1".into()));
        }
        if self.k_features == Some(0) {
            return Err(Error::InvalidConfig("k_features must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.min_weighted_fraction_split) {
            return Err(Error::InvalidConfig(format!(
                "min_weighted_fraction_split must lie in [0, 1), got {}",
                self.min_weighted_fraction_split
            )));
        }
        Ok(())
    }

    /// K for a dataset with `d` features.
    pub fn resolve_k(&self, d: usize) -> Result<usize> {
        let k = self
            .k_features
            .unwrap_or_else(|| ((d as f64).sqrt().ceil() as usize).max(1));
        if k == 0 || k > d {
            return Err(Error::InvalidConfig(format!(
                "k_features = {k} but the data has {d} features"
            )));
        }
        Ok(k)
    }
}

/// A weighted multiset of dataset rows.
#[derive(Debug, Clone)]
pub struct SampleView<'a> {
    data: &'a Dataset,
    rows: Vec<usize>,
    weights: Vec<f64>,
}

impl<'a> SampleView<'a> {
    /// Every row, weighted by the dataset's boost weights.
    pub fn full(data: &'a Dataset) -> Self {
        SampleView {
            data,
            rows: (0..data.len()).collect(),
            weights: data.boost_weights().to_vec(),
        }
    }

    pub fn new(data: &'a Dataset, rows: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if rows.len() != weights.len() {
            return Err(Error::Contract(format!(
                "{} rows but {} weights",
                rows.len(),
                weights.len()
            )));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= data.len()) {
            return Err(Error::Contract(format!("row {r} out of range")));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Contract("sample weights must be finite and non-negative".into()));
        }
        Ok(SampleView { data, rows, weights })
    }

    /// Rows with a positive draw count, each weighted `count * weight[row]`.
    pub fn from_counts(data: &'a Dataset, counts: &[u32], weights: &[f64]) -> Self {
        let mut rows = Vec::new();
        let mut w = Vec::new();
        for (i, (&c, &wi)) in counts.iter().zip(weights).enumerate() {
            if c > 0 {
                rows.push(i);
                w.push(c as f64 * wi);
            }
        }
        SampleView { data, rows, weights: w }
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted Gini gain.
    pub score: f64,
}

impl SplitCandidate {
    /// Higher score wins; ties go to the lower feature index, then the lower threshold.
    fn beats(&self, other: &SplitCandidate) -> bool {
        self.score > other.score
            || (self.score == other.score
                && (self.feature < other.feature
                    || (self.feature == other.feature && self.threshold < other.threshold)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        vote: Label,
        signal_fraction: f64,
    },
}

/// A fitted tree. Nodes are stored in pre-order with the root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl Tree {
    /// Validates the structure of a pre-order node list.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Contract("tree has no nodes".into()));
        }
        // Each child index must be referenced exactly once and point forward.
        let mut referenced = vec![false; nodes.len()];
        referenced[0] = true;
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature as usize >= n_features || !threshold.is_finite() {
                        return Err(Error::Contract(format!("node {i}: bad split")));
                    }
                    for c in [left, right] {
                        let c = c as usize;
                        if c <= i || c >= nodes.len() || referenced[c] {
                            return Err(Error::Contract(format!("node {i}: bad child {c}")));
                        }
                        referenced[c] = true;
                    }
                }
                Node::Leaf { signal_fraction, .. } => {
                    if !(0.0..=1.0).contains(&signal_fraction) {
                        return Err(Error::Contract(format!("node {i}: bad signal fraction")));
                    }
                }
            }
        }
        if referenced.iter().any(|r| !r) {
            return Err(Error::Contract("tree has unreachable nodes".into()));
        }
        Ok(Tree { nodes, n_features })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(nodes, left as usize).max(go(nodes, right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }

    /// Fits a tree to `view` under `cfg`, drawing randomness from `rng`.
    pub fn fit<R: Rng + ?Sized>(view: &SampleView<'_>, cfg: &TreeConfig, rng: &mut R) -> Result<Tree> {
        cfg.validate()?;
        if view.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = view.data.n_features();
        let k = match cfg.mode {
            SplitMode::RandomSplit => cfg.resolve_k(d)?,
            SplitMode::BestSplit => d,
        };
        let mut b = Builder::new(view, cfg.min_samples_leaf);
        let total: f64 = view.weights.iter().sum();
        let n = view.len();
        let mut nodes = Vec::new();
        b.grow(&mut nodes, 0, n, 0, cfg, k, total * cfg.min_weighted_fraction_split, rng);
        Ok(Tree {
            nodes,
            n_features: d,
        })
    }

    /// Leaf vote and signal fraction for `x`.
    pub fn predict(&self, x: &[f64]) -> Result<(Label, f64)> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.leaf_for(|f| x[f]))
    }

    /// Prediction for one dataset row. The caller guarantees matching dimension.
    pub fn predict_row(&self, ds: &Dataset, row: usize) -> (Label, f64) {
        self.leaf_for(|f| ds.value(row, f))
    }

    fn leaf_for(&self, value: impl Fn(usize) -> f64) -> (Label, f64) {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf {
                    vote,
                    signal_fraction,
                } => return (vote, signal_fraction),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if value(feature as usize) <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }
}

/// Gini impurity 2p(1-p) of a node with the given class weights.
fn gini(w_sig: f64, w_bkg: f64) -> f64 {
    let w = w_sig + w_bkg;
    if w <= 0.0 {
        return 0.0;
    }
    let p = w_sig / w;
    2.0 * p * (1.0 - p)
}

/// Parent impurity minus the weight-proportional child impurities.
fn gini_gain(parent: [f64; 2], left: [f64; 2]) -> f64 {
    let right = [parent[0] - left[0], parent[1] - left[1]];
    let w = parent[0] + parent[1];
    if w <= 0.0 {
        return 0.0;
    }
    let wl = left[0] + left[1];
    let wr = right[0] + right[1];
    let q = gini(parent[0], parent[1])
        - (wl / w) * gini(left[0], left[1])
        - (wr / w) * gini(right[0].max(0.0), right[1].max(0.0));
    q.max(0.0)
}

/// Midpoint of two consecutive distinct values that still separates them.
fn separating_midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

/// Uniform draw from the open interval (lo, hi).
fn open_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    for _ in 0..16 {
        let t = lo + rng.random::<f64>() * (hi - lo);
        if t > lo && t < hi {
            return t;
        }
    }
    // No representable value strictly inside: split between the two endpoints.
    separating_midpoint(lo, hi)
}

struct Builder<'v, 'a> {
    view: &'v SampleView<'a>,
    signal: Vec<bool>,
    /// Positions into the view, partitioned in place as the tree grows.
    order: Vec<usize>,
    scratch: Vec<(f64, usize)>,
    features: Vec<usize>,
    min_leaf: usize,
}

impl<'v, 'a> Builder<'v, 'a> {
    fn new(view: &'v SampleView<'a>, min_leaf: usize) -> Self {
        let labels = view.data.labels();
        Builder {
            view,
            signal: view.rows.iter().map(|&r| labels[r].is_signal()).collect(),
            order: (0..view.len()).collect(),
            scratch: Vec::new(),
            features: (0..view.data.n_features()).collect(),
            min_leaf,
        }
    }

    fn value(&self, pos: usize, feature: usize) -> f64 {
        self.view.data.value(self.view.rows[pos], feature)
    }

    fn class_weights(&self, start: usize, end: usize) -> [f64; 2] {
        let mut w = [0.0; 2];
        for &p in &self.order[start..end] {
            w[self.signal[p] as usize] += self.view.weights[p];
        }
        [w[1], w[0]]
    }

    #[allow(clippy::too_many_arguments)]
    fn grow<R: Rng + ?Sized>(
        &mut self,
        nodes: &mut Vec<Node>,
        start: usize,
        end: usize,
        depth: usize,
        cfg: &TreeConfig,
        k: usize,
        min_split_weight: f64,
        rng: &mut R,
    ) -> u32 {
        let id = nodes.len() as u32;
        let cw = self.class_weights(start, end);
        let total = cw[0] + cw[1];
        let leaf = Node::Leaf {
            vote: if cw[0] > cw[1] { Label::Signal } else { Label::Background },
            signal_fraction: if total > 0.0 { (cw[0] / total).clamp(0.0, 1.0) } else { 0.0 },
        };
        nodes.push(leaf);

        let n = end - start;
        if cw[0] == 0.0
            || cw[1] == 0.0
            || depth >= cfg.max_depth
            || n < 2 * self.min_leaf
            || total < min_split_weight
        {
            return id;
        }

        let found = match cfg.mode {
            SplitMode::RandomSplit => self.random_split(start, end, cw, k, rng),
            SplitMode::BestSplit => self.best_split(start, end, cw),
        };
        let Some(split) = found else {
            return id;
        };

        let mid = self.partition(start, end, split.feature, split.threshold);
        debug_assert!(mid > start && mid < end);
        let left = self.grow(nodes, start, mid, depth + 1, cfg, k, min_split_weight, rng);
        let right = self.grow(nodes, mid, end, depth + 1, cfg, k, min_split_weight, rng);
        nodes[id as usize] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn partition(&mut self, start: usize, end: usize, feature: usize, threshold: f64) -> usize {
        let col = self.view.data.column(feature);
        let rows = &self.view.rows;
        let slice = &mut self.order[start..end];
        let mut i = 0;
        for j in 0..slice.len() {
            if col[rows[slice[j]]] <= threshold {
                slice.swap(i, j);
                i += 1;
            }
        }
        start + i
    }

    fn min_max(&self, start: usize, end: usize, feature: usize) -> (f64, f64) {
        let col = self.view.data.column(feature);
        let rows = &self.view.rows;
        self.order[start..end]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                let v = col[rows[p]];
                (lo.min(v), hi.max(v))
            })
    }

    /// Draws up to `k` distinct non-constant features, then one threshold each.
    fn random_split<R: Rng + ?Sized>(
        &mut self,
        start: usize,
        end: usize,
        parent: [f64; 2],
        k: usize,
        rng: &mut R,
    ) -> Option<SplitCandidate> {
        let d = self.features.len();
        // Lazy Fisher-Yates over the feature list; reset to identity so the
        // draw sequence depends only on the rng state and the node's data.
        for (i, f) in self.features.iter_mut().enumerate() {
            *f = i;
        }
        let mut chosen: Vec<(usize, f64, f64)> = Vec::with_capacity(k);
        for i in 0..d {
            if chosen.len() == k {
                break;
            }
            let j = rng.random_range(i..d);
            self.features.swap(i, j);
            let f = self.features[i];
            let (lo, hi) = self.min_max(start, end, f);
            if lo < hi {
                chosen.push((f, lo, hi));
            }
        }
        let thresholds: Vec<f64> = chosen
            .iter()
            .map(|&(_, lo, hi)| open_uniform(rng, lo, hi))
            .collect();

        let mut best: Option<SplitCandidate> = None;
        for (&(feature, _, _), &threshold) in chosen.iter().zip(&thresholds) {
            let (left, n_left) = self.left_weights(start, end, feature, threshold);
            if n_left < self.min_leaf || (end - start - n_left) < self.min_leaf {
                continue;
            }
            let cand = SplitCandidate {
                feature,
                threshold,
                score: gini_gain(parent, left),
            };
            if best.is_none_or(|b| cand.beats(&b)) {
                best = Some(cand);
            }
        }
        best
    }

    fn left_weights(&self, start: usize, end: usize, feature: usize, threshold: f64) -> ([f64; 2], usize) {
        let col = self.view.data.column(feature);
        let rows = &self.view.rows;
        let mut w = [0.0; 2];
        let mut n = 0;
        for &p in &self.order[start..end] {
            if col[rows[p]] <= threshold {
                let cls = if self.signal[p] { 0 } else { 1 };
                w[cls] += self.view.weights[p];
                n += 1;
            }
        }
        (w, n)
    }

    /// Scans every feature and every midpoint between consecutive distinct values.
    fn best_split(&mut self, start: usize, end: usize, parent: [f64; 2]) -> Option<SplitCandidate> {
        let n = end - start;
        let mut best: Option<SplitCandidate> = None;
        for feature in 0..self.view.data.n_features() {
            self.scratch.clear();
            for &p in &self.order[start..end] {
                self.scratch.push((self.value(p, feature), p));
            }
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if self.scratch[0].0 == self.scratch[n - 1].0 {
                continue;
            }
            let mut left = [0.0; 2];
            for i in 0..n - 1 {
                let (v, p) = self.scratch[i];
                let cls = if self.signal[p] { 0 } else { 1 };
                left[cls] += self.view.weights[p];
                let next = self.scratch[i + 1].0;
                if next == v {
                    continue;
                }
                let n_left = i + 1;
                if n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                let cand = SplitCandidate {
                    feature,
                    threshold: separating_midpoint(v, next),
                    score: gini_gain(parent, left),
                };
                if best.is_none_or(|b| cand.beats(&b)) {
                    best = Some(cand);
                }
            }
        }
        best
    }
}

/// One extremely randomized split over the whole view; `None` when every
/// feature is constant.
pub fn random_split<R: Rng + ?Sized>(view: &SampleView<'_>, k: usize, rng: &mut R) -> Option<SplitCandidate> {
    if view.len() < 2 || k == 0 {
        return None;
    }
    let mut b = Builder::new(view, 1);
    let parent = b.class_weights(0, view.len());
    b.random_split(0, view.len(), parent, k, rng)
}

/// The exhaustive best split over the whole view; `None` when every feature
/// is constant.
pub fn best_split(view: &SampleView<'_>) -> Option<SplitCandidate> {
    if view.len() < 2 {
        return None;
    }
    let mut b = Builder::new(view, 1);
    let parent = b.class_weights(0, view.len());
    b.best_split(0, view.len(), parent)
}

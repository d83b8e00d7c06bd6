//! Bags of trees fit on bootstrap resamples: one boosting-stage base learner.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::rng::{label, SeedStream};
use crate::tree::{SampleView, Tree, TreeConfig};

/// `n` indices drawn uniformly with replacement.
pub fn bootstrap_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Draw counts per row for a bootstrap of size `n`; same draws as [`bootstrap_sample`].
pub fn bootstrap_counts<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for i in bootstrap_sample(n, rng) {
        counts[i] += 1;
    }
    counts
}

/// B trees aggregated by majority vote.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    tree_config: TreeConfig,
}

impl Forest {
    pub fn from_trees(trees: Vec<Tree>, tree_config: TreeConfig) -> Result<Self> {
        let Some(first) = trees.first() else {
            return Err(Error::Contract("forest needs at least one tree".into()));
        };
        let d = first.n_features();
        if let Some(t) = trees.iter().find(|t| t.n_features() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: t.n_features(),
            });
        }
        Ok(Forest { trees, tree_config })
    }

    /// Fits `b` trees on bootstraps of `ds`, carrying the dataset's boost weights.
    pub fn fit(ds: &Dataset, cfg: &TreeConfig, b: usize, seed: SeedStream) -> Result<Forest> {
        Self::fit_weighted(ds, ds.boost_weights(), cfg, b, seed)
    }

    /// As [`Forest::fit`] with explicit per-row weights. A row drawn m times
    /// enters its tree with weight `m * weights[row]`.
    ///
    /// Tree `t` draws only from `seed.child(TREE, t)`, so the result does not
    /// depend on how many threads run the fits.
    pub fn fit_weighted(
        ds: &Dataset,
        weights: &[f64],
        cfg: &TreeConfig,
        b: usize,
        seed: SeedStream,
    ) -> Result<Forest> {
        if b == 0 {
            return Err(Error::InvalidConfig("trees per stage must be positive".into()));
        }
        if weights.len() != ds.len() {
            return Err(Error::Contract(format!(
                "{} weights for {} rows",
                weights.len(),
                ds.len()
            )));
        }
        cfg.validate()?;
        if cfg.mode == crate::tree::SplitMode::RandomSplit {
            cfg.resolve_k(ds.n_features())?;
        }
        let trees = (0..b)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed.child(label::TREE, t as u64).rng();
                let counts = bootstrap_counts(ds.len(), &mut rng);
                let view = SampleView::from_counts(ds, &counts, weights);
                Tree::fit(&view, cfg, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Forest {
            trees,
            tree_config: cfg.clone(),
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn tree_config(&self) -> &TreeConfig {
        &self.tree_config
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    /// Majority vote (ties to background) and the mean of `2 * signal_fraction - 1`.
    pub fn predict(&self, x: &[f64]) -> Result<(Label, f64)> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(self.aggregate(|t| t.predict(x).expect("dimension checked")))
    }

    pub fn predict_row(&self, ds: &Dataset, row: usize) -> (Label, f64) {
        self.aggregate(|t| t.predict_row(ds, row))
    }

    fn aggregate(&self, leaf: impl Fn(&Tree) -> (Label, f64)) -> (Label, f64) {
        let mut votes = 0i64;
        let mut score = 0.0;
        for t in &self.trees {
            let (v, frac) = leaf(t);
            votes += v as i8 as i64;
            score += 2.0 * frac - 1.0;
        }
        let vote = if votes > 0 { Label::Signal } else { Label::Background };
        (vote, score / self.trees.len() as f64)
    }

    /// Predictions for every row of `ds`, in row order.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<(Label, f64)>> {
        if ds.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: ds.n_features(),
            });
        }
        Ok((0..ds.len())
            .into_par_iter()
            .map(|i| self.predict_row(ds, i))
            .collect())
    }
}

/// Pearson correlations between the ±1 vote vectors of a set of trees.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    size: usize,
    values: Vec<f64>,
    /// Trees whose votes were constant on the evaluation subset. Their
    /// off-diagonal entries are reported as 0.
    pub constant: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Mean of |r| over off-diagonal entries.
    pub fn mean_abs_off_diagonal(&self) -> f64 {
        let n = self.size;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += self.get(i, j).abs();
                }
            }
        }
        sum / (n * (n - 1)) as f64
    }

    pub fn mean_off_diagonal(&self) -> f64 {
        let n = self.size;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += self.get(i, j);
                }
            }
        }
        sum / (n * (n - 1)) as f64
    }

    /// Square, headerless, row-major CSV.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        for i in 0..self.size {
            let row: Vec<String> = (0..self.size).map(|j| format!("{:?}", self.get(i, j))).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Correlation of tree votes over `sample_size` rows drawn without replacement.
pub fn tree_correlation<R: Rng + ?Sized>(
    trees: &[&Tree],
    ds: &Dataset,
    sample_size: usize,
    rng: &mut R,
) -> Result<CorrelationMatrix> {
    if trees.len() < 2 {
        return Err(Error::InvalidConfig("correlation needs at least two trees".into()));
    }
    if sample_size == 0 || sample_size > ds.len() {
        return Err(Error::InvalidConfig(format!(
            "sample_size must lie in 1..={}, got {sample_size}",
            ds.len()
        )));
    }
    if let Some(t) = trees.iter().find(|t| t.n_features() != ds.n_features()) {
        return Err(Error::DimensionMismatch {
            expected: t.n_features(),
            got: ds.n_features(),
        });
    }
    let mut rows = rand::seq::index::sample(rng, ds.len(), sample_size).into_vec();
    rows.sort_unstable();

    // Centred vote vectors and their squared norms.
    let centred: Vec<(Vec<f64>, f64)> = trees
        .par_iter()
        .map(|t| {
            let v: Vec<f64> = rows.iter().map(|&r| t.predict_row(ds, r).0.sign()).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
            let norm2 = c.iter().map(|x| x * x).sum::<f64>();
            (c, norm2)
        })
        .collect();

    let n = trees.len();
    let constant: Vec<bool> = centred.iter().map(|(_, norm2)| *norm2 == 0.0).collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let r = if constant[i] || constant[j] {
                0.0
            } else {
                let dot: f64 = centred[i].0.iter().zip(&centred[j].0).map(|(a, b)| a * b).sum();
                (dot / (centred[i].1 * centred[j].1).sqrt()).clamp(-1.0, 1.0)
            };
            values[i * n + j] = r;
            values[j * n + i] = r;
        }
    }
    Ok(CorrelationMatrix {
        size: n,
        values,
        constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Node;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn leaf(vote: Label, frac: f64) -> Tree {
        Tree::from_nodes(
            vec![Node::Leaf {
                vote,
                signal_fraction: frac,
            }],
            1,
        )
        .unwrap()
    }

    fn stump(threshold: f64, flip: bool) -> Tree {
        let (l, r) = if flip {
            (Label::Signal, Label::Background)
        } else {
            (Label::Background, Label::Signal)
        };
        let frac = |v: Label| if v.is_signal() { 1.0 } else { 0.0 };
        Tree::from_nodes(
            vec![
                Node::Split {
                    feature: 0,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf {
                    vote: l,
                    signal_fraction: frac(l),
                },
                Node::Leaf {
                    vote: r,
                    signal_fraction: frac(r),
                },
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn bootstrap_of_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(bootstrap_sample(1, &mut rng), vec![0]);
    }

    #[test]
    fn bootstrap_distinct_fraction() {
        // Oracle: P(row drawn) = 1 - (1 - 1/n)^n, approximately 1 - 1/e.
        let n = 10_000;
        let expected = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
        assert!((expected - (1.0 - (-1.0f64).exp())).abs() < 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let counts = bootstrap_counts(n, &mut rng);
        let distinct = counts.iter().filter(|&&c| c > 0).count() as f64 / n as f64;
        assert!((distinct - 0.632).abs() < 0.02, "{distinct}");
        assert_eq!(counts.iter().map(|&c| c as usize).sum::<usize>(), n);
    }

    #[test]
    fn bootstrap_deterministic() {
        let a = bootstrap_sample(100, &mut ChaCha8Rng::seed_from_u64(5));
        let b = bootstrap_sample(100, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn majority_and_tie() {
        let cfg = TreeConfig::default();
        let f = Forest::from_trees(
            vec![leaf(Label::Signal, 1.0), leaf(Label::Signal, 1.0), leaf(Label::Background, 0.0)],
            cfg.clone(),
        )
        .unwrap();
        assert_eq!(f.predict(&[0.0]).unwrap().0, Label::Signal);

        let f = Forest::from_trees(vec![leaf(Label::Signal, 0.9), leaf(Label::Background, 0.2)], cfg.clone())
            .unwrap();
        let (v, s) = f.predict(&[0.0]).unwrap();
        assert_eq!(v, Label::Background);
        assert!((s - 0.1).abs() < 1e-15);

        let f = Forest::from_trees(vec![leaf(Label::Signal, 1.0); 4], cfg).unwrap();
        assert_eq!(f.predict(&[0.0]).unwrap(), (Label::Signal, 1.0));
    }

    #[test]
    fn dimension_checked() {
        let f = Forest::from_trees(vec![leaf(Label::Signal, 1.0)], TreeConfig::default()).unwrap();
        assert!(matches!(f.predict(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn correlation_identical_and_negated() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels = (0..20)
            .map(|i| if i % 2 == 0 { Label::Signal } else { Label::Background })
            .collect();
        let ds = Dataset::from_rows(&rows, labels, None, None).unwrap();
        let a = stump(9.5, false);
        let b = stump(9.5, false);
        let c = stump(9.5, true);
        let k = leaf(Label::Signal, 1.0);
        let m = tree_correlation(&[&a, &b, &c, &k], &ds, 20, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 2), -1.0);
        assert_eq!(m.get(3, 0), 0.0);
        assert!(m.constant[3] && !m.constant[0]);
        for i in 0..4 {
            assert_eq!(m.get(i, i), 1.0);
            for j in 0..4 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), "1.0,1.0,-1.0,0.0");
    }

    #[test]
    fn correlation_needs_two_trees() {
        let ds = Dataset::from_rows(&[vec![0.0]], vec![Label::Signal], None, None).unwrap();
        let t = leaf(Label::Signal, 1.0);
        assert!(tree_correlation(&[&t], &ds, 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}

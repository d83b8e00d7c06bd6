//! The AdaBoost outer loop over bagged forests.
//!
//! Each stage fits a base learner under the current sample weights, scores
//! it by weighted training error ε, earns confidence α = ½·ln((1−ε)/ε), and
//! multiplies the weight of every sample it got wrong by e^α before
//! renormalizing. The master decision is the α-weighted vote of all stages.

mod persist;

use std::time::Instant;

use rayon::prelude::*;

use crate::bagging::Forest;
use crate::data::{check_weight_sum, normalize, Dataset, Label};
use crate::error::{Error, Result};
use crate::rng::{label, SeedStream};
use crate::tree::TreeConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct BoostConfig {
    pub stages: usize,
    pub trees_per_stage: usize,
    pub tree_config: TreeConfig,
    pub epsilon_floor: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            stages: 20,
            trees_per_stage: 100,
            tree_config: TreeConfig::default(),
            epsilon_floor: 1e-6,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::InvalidConfig("stages must be at least 1".into()));
        }
        if self.trees_per_stage == 0 {
            return Err(Error::InvalidConfig("trees per stage must be at least 1".into()));
        }
        if !(self.epsilon_floor > 0.0 && self.epsilon_floor < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "epsilon_floor must lie in (0, 0.5), got {}",
                self.epsilon_floor
            )));
        }
        self.tree_config.validate()
    }
}

/// Per-stage training log entry.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    /// 1-based stage index.
    pub stage: usize,
    /// Weighted error after flooring.
    pub epsilon: f64,
    pub alpha: f64,
    /// One minus the unfloored weighted error.
    pub weighted_accuracy: f64,
    pub seconds: f64,
}

/// Sum of the weights of misclassified samples.
pub fn weighted_error(preds: &[Label], labels: &[Label], weights: &[f64]) -> Result<f64> {
    if preds.len() != labels.len() || preds.len() != weights.len() {
        return Err(Error::Contract(format!(
            "length mismatch: {} predictions, {} labels, {} weights",
            preds.len(),
            labels.len(),
            weights.len()
        )));
    }
    check_weight_sum(weights)?;
    Ok(preds
        .iter()
        .zip(labels)
        .zip(weights)
        .filter(|((p, y), _)| p != y)
        .map(|(_, w)| w)
        .sum())
}

/// Stage confidence ½·ln((1−ε)/ε).
pub fn compute_alpha(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Contract(format!(
            "weighted error {epsilon} outside (0, 1)"
        )));
    }
    Ok(0.5 * ((-epsilon).ln_1p() - epsilon.ln()))
}

/// Multiplies misclassified weights by e^α, then renormalizes to sum 1.
pub fn update_weights(weights: &[f64], alpha: f64, misclassified: &[bool]) -> Result<Vec<f64>> {
    if weights.len() != misclassified.len() {
        return Err(Error::Contract(format!(
            "{} weights but {} mask entries",
            weights.len(),
            misclassified.len()
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::Contract(format!("alpha {alpha} is not finite")));
    }
    let boost = alpha.exp();
    let mut out: Vec<f64> = weights
        .iter()
        .zip(misclassified)
        .map(|(&w, &m)| if m { w * boost } else { w })
        .collect();
    normalize(&mut out);
    Ok(out)
}

/// A classifier usable as one boosting stage.
pub trait StageModel: Send + Sync {
    /// Hard vote and soft score in [-1, 1] for one dataset row.
    fn predict_row(&self, ds: &Dataset, row: usize) -> (Label, f64);
}

impl StageModel for Forest {
    fn predict_row(&self, ds: &Dataset, row: usize) -> (Label, f64) {
        Forest::predict_row(self, ds, row)
    }
}

/// Something that fits a [`StageModel`] under sample weights.
pub trait BaseLearner {
    type Model: StageModel;

    /// `stage` is 0-based and lets the learner pick a fresh random substream.
    fn fit(&self, ds: &Dataset, weights: &[f64], stage: usize) -> Result<Self::Model>;
}

/// Bagged trees: the base learner of both BXT and the BDT baseline.
#[derive(Debug, Clone)]
pub struct ForestLearner {
    pub tree_config: TreeConfig,
    pub trees: usize,
    pub seed: SeedStream,
}

impl BaseLearner for ForestLearner {
    type Model = Forest;

    fn fit(&self, ds: &Dataset, weights: &[f64], stage: usize) -> Result<Forest> {
        let seed = self.seed.child(label::STAGE, stage as u64);
        Forest::fit_weighted(ds, weights, &self.tree_config, self.trees, seed)
    }
}

/// Output of [`adaboost`].
#[derive(Debug)]
pub struct BoostRun<M> {
    pub stages: Vec<(f64, M)>,
    pub records: Vec<StageRecord>,
    pub final_weights: Vec<f64>,
}

/// Runs up to `stages` rounds of AdaBoost with any base learner.
///
/// `observe` sees each appended stage's record and the weights after its
/// update. Training stops without appending when a stage's weighted error
/// reaches 0.5.
pub fn adaboost<L: BaseLearner>(
    ds: &Dataset,
    learner: &L,
    stages: usize,
    epsilon_floor: f64,
    mut observe: impl FnMut(&StageRecord, &[f64]),
) -> Result<BoostRun<L::Model>> {
    if !ds.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let mut weights = ds.boost_weights().to_vec();
    check_weight_sum(&weights)?;
    let labels = ds.labels();
    let mut run = BoostRun {
        stages: Vec::with_capacity(stages),
        records: Vec::with_capacity(stages),
        final_weights: Vec::new(),
    };
    for j in 0..stages {
        let started = Instant::now();
        let model = learner.fit(ds, &weights, j)?;
        let votes: Vec<Label> = (0..ds.len())
            .into_par_iter()
            .map(|i| model.predict_row(ds, i).0)
            .collect();
        let raw = weighted_error(&votes, labels, &weights)?;
        if raw >= 0.5 {
            log::info!("stage {} weighted error {raw} >= 0.5, stopping", j + 1);
            if run.stages.is_empty() {
                return Err(Error::NoUsableStage { epsilon: raw });
            }
            break;
        }
        let epsilon = raw.max(epsilon_floor);
        let alpha = compute_alpha(epsilon)?;
        let missed: Vec<bool> = votes.iter().zip(labels).map(|(v, y)| v != y).collect();
        weights = update_weights(&weights, alpha, &missed)?;
        let record = StageRecord {
            stage: j + 1,
            epsilon,
            alpha,
            weighted_accuracy: 1.0 - raw,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::debug!("stage {} epsilon {epsilon} alpha {alpha}", j + 1);
        observe(&record, &weights);
        run.records.push(record);
        run.stages.push((alpha, model));
    }
    run.final_weights = weights;
    Ok(run)
}

/// Provenance stored alongside a model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMetadata {
    pub dataset_sha256: String,
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub alpha: f64,
    pub forest: Forest,
}

/// The master learner: α-weighted forests.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    stages: Vec<Stage>,
    config: BoostConfig,
    metadata: TrainingMetadata,
    n_features: usize,
}

/// Trains BXT (random splits) or the BDT baseline (best splits) per `cfg.tree_config.mode`.
pub fn fit_boosted(ds: &Dataset, cfg: &BoostConfig) -> Result<(BoostedModel, Vec<StageRecord>)> {
    cfg.validate()?;
    let learner = ForestLearner {
        tree_config: cfg.tree_config.clone(),
        trees: cfg.trees_per_stage,
        seed: SeedStream::new(cfg.seed),
    };
    let run = adaboost(ds, &learner, cfg.stages, cfg.epsilon_floor, |_, _| {})?;
    let model = BoostedModel {
        stages: run
            .stages
            .into_iter()
            .map(|(alpha, forest)| Stage { alpha, forest })
            .collect(),
        config: cfg.clone(),
        metadata: TrainingMetadata {
            dataset_sha256: ds.content_hash(),
            n_train: ds.len(),
        },
        n_features: ds.n_features(),
    };
    Ok((model, run.records))
}

impl BoostedModel {
    pub fn from_stages(
        stages: Vec<Stage>,
        config: BoostConfig,
        metadata: TrainingMetadata,
    ) -> Result<Self> {
        let Some(first) = stages.first() else {
            return Err(Error::EmptyModel);
        };
        let n_features = first.forest.n_features();
        if stages.len() > config.stages {
            return Err(Error::Contract(format!(
                "{} stages exceed the configured {}",
                stages.len(),
                config.stages
            )));
        }
        for s in &stages {
            if !(s.alpha > 0.0) || !s.alpha.is_finite() {
                return Err(Error::Contract(format!("stage alpha {} is not positive", s.alpha)));
            }
            if s.forest.n_features() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    got: s.forest.n_features(),
                });
            }
        }
        Ok(BoostedModel {
            stages,
            config,
            metadata,
            n_features,
        })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn config(&self) -> &BoostConfig {
        &self.config
    }

    pub fn metadata(&self) -> &TrainingMetadata {
        &self.metadata
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_trees(&self) -> usize {
        self.stages.iter().map(|s| s.forest.len()).sum()
    }

    /// Label from the α-weighted hard votes (ties to background) and the
    /// margin Σ α·score from the soft forest scores.
    pub fn predict(&self, x: &[f64]) -> Result<(Label, f64)> {
        if self.stages.is_empty() {
            return Err(Error::EmptyModel);
        }
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(combine(self.stages.iter().map(|s| {
            (s.alpha, s.forest.predict(x).expect("dimension checked"))
        })))
    }

    pub fn predict_row(&self, ds: &Dataset, row: usize) -> (Label, f64) {
        combine(
            self.stages
                .iter()
                .map(|s| (s.alpha, s.forest.predict_row(ds, row))),
        )
    }

    fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::EmptyModel);
        }
        if ds.n_features() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: ds.n_features(),
            });
        }
        Ok(())
    }

    /// `(label, margin)` for every row, in row order.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<(Label, f64)>> {
        self.check_dataset(ds)?;
        Ok((0..ds.len())
            .into_par_iter()
            .map(|i| self.predict_row(ds, i))
            .collect())
    }

    pub fn margins(&self, ds: &Dataset) -> Result<Vec<f64>> {
        Ok(self.predict_dataset(ds)?.into_iter().map(|(_, m)| m).collect())
    }

    /// Fraction of rows whose predicted label matches.
    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        let preds = self.predict_dataset(ds)?;
        let hits = preds
            .iter()
            .zip(ds.labels())
            .filter(|((p, _), y)| p == *y)
            .count();
        Ok(hits as f64 / ds.len() as f64)
    }

    /// Σ_i (1/N)·exp(−y_i·Σ_{j≤J} α_j·h_j(x_i)) with hard votes h_j, for J = 1..=stages.
    pub fn staged_exponential_loss(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.check_dataset(ds)?;
        let n = ds.len();
        let mut partial = vec![0.0f64; n];
        let mut out = Vec::with_capacity(self.stages.len());
        for s in &self.stages {
            let votes: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| s.forest.predict_row(ds, i).0.sign())
                .collect();
            for (p, v) in partial.iter_mut().zip(&votes) {
                *p += s.alpha * v;
            }
            let loss = partial
                .iter()
                .zip(ds.labels())
                .map(|(m, y)| (-y.sign() * m).exp())
                .sum::<f64>()
                / n as f64;
            out.push(loss);
        }
        Ok(out)
    }
}

fn combine(parts: impl Iterator<Item = (f64, (Label, f64))>) -> (Label, f64) {
    let mut vote = 0.0;
    let mut margin = 0.0;
    for (alpha, (v, score)) in parts {
        vote += alpha * v.sign();
        margin += alpha * score;
    }
    let label = if vote > 0.0 { Label::Signal } else { Label::Background };
    (label, margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::tree::{Node, SplitMode, Tree};
    use approx::assert_abs_diff_eq;

    fn leaf_forest(vote: Label, frac: f64) -> Forest {
        let t = Tree::from_nodes(
            vec![Node::Leaf {
                vote,
                signal_fraction: frac,
            }],
            1,
        )
        .unwrap();
        Forest::from_trees(vec![t], TreeConfig::default()).unwrap()
    }

    fn meta() -> TrainingMetadata {
        TrainingMetadata {
            dataset_sha256: String::new(),
            n_train: 0,
        }
    }

    #[test]
    fn weighted_error_cases() {
        use Label::*;
        let y = [Signal, Background, Signal, Background];
        let w = [0.4, 0.3, 0.2, 0.1];
        assert_eq!(weighted_error(&y, &y, &w).unwrap(), 0.0);
        let flipped: Vec<Label> = y.iter().map(|l| l.flip()).collect();
        assert_abs_diff_eq!(weighted_error(&flipped, &y, &w).unwrap(), 1.0, epsilon = 1e-15);
        // Samples 2 and 4 wrong: 0.3 + 0.1.
        let p = [Signal, Signal, Signal, Signal];
        assert_abs_diff_eq!(weighted_error(&p, &y, &w).unwrap(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn weighted_error_contracts() {
        use Label::*;
        assert!(weighted_error(&[Signal], &[Signal, Signal], &[0.5, 0.5]).is_err());
        assert!(weighted_error(&[Signal, Signal], &[Signal, Signal], &[0.5, 0.6]).is_err());
    }

    #[test]
    fn alpha_values() {
        assert_abs_diff_eq!(compute_alpha(0.25).unwrap(), 0.5 * 3f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(compute_alpha(0.25).unwrap(), 0.549_306_1, epsilon = 1e-7);
        assert_eq!(compute_alpha(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(compute_alpha(1e-6).unwrap(), 6.9078, epsilon = 1e-4);
        assert!(compute_alpha(0.0).is_err());
        assert!(compute_alpha(1.0).is_err());
        assert!(compute_alpha(f64::NAN).is_err());
    }

    #[test]
    fn update_examples() {
        let w = update_weights(&[0.5, 0.5], 2f64.ln(), &[false, true]).unwrap();
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 2.0 / 3.0, epsilon = 1e-15);

        let base = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(update_weights(&base, 0.7, &[false; 4]).unwrap(), base.to_vec());
        let all = update_weights(&base, 0.7, &[true; 4]).unwrap();
        for (a, b) in all.iter().zip(base) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn weighted_vote_arithmetic() {
        let model = BoostedModel {
            stages: vec![
                Stage {
                    alpha: 1.0,
                    forest: leaf_forest(Label::Signal, 0.75),
                },
                Stage {
                    alpha: 0.5,
                    forest: leaf_forest(Label::Background, 0.25),
                },
            ],
            config: BoostConfig::default(),
            metadata: meta(),
            n_features: 1,
        };
        let (label, margin) = model.predict(&[0.0]).unwrap();
        assert_eq!(label, Label::Signal);
        assert_abs_diff_eq!(margin, 1.0 * 0.5 + 0.5 * -0.5, epsilon = 1e-15);
    }

    #[test]
    fn exact_tie_is_background() {
        let model = BoostedModel {
            stages: vec![
                Stage {
                    alpha: 0.5,
                    forest: leaf_forest(Label::Signal, 1.0),
                },
                Stage {
                    alpha: 0.5,
                    forest: leaf_forest(Label::Background, 0.0),
                },
            ],
            config: BoostConfig::default(),
            metadata: meta(),
            n_features: 1,
        };
        assert_eq!(model.predict(&[0.0]).unwrap(), (Label::Background, 0.0));
    }

    #[test]
    fn zero_alpha_stage_changes_nothing() {
        let ds = generate_synthetic(&SyntheticSpec {
            n_samples: 400,
            dimension: 3,
            overlap: 1.5,
            imbalance: 0.4,
            seed: 2,
        })
        .unwrap();
        let cfg = BoostConfig {
            stages: 3,
            trees_per_stage: 5,
            ..BoostConfig::default()
        };
        let (model, _) = fit_boosted(&ds, &cfg).unwrap();
        let mut injected = model.clone();
        injected.stages.push(Stage {
            alpha: 0.0,
            forest: model.stages[0].forest.clone(),
        });
        assert_eq!(model.predict_dataset(&ds).unwrap(), injected.predict_dataset(&ds).unwrap());
    }

    #[test]
    fn single_stage_follows_forest_vote() {
        let ds = generate_synthetic(&SyntheticSpec {
            n_samples: 300,
            dimension: 2,
            overlap: 1.0,
            imbalance: 0.5,
            seed: 4,
        })
        .unwrap();
        let cfg = BoostConfig {
            stages: 1,
            trees_per_stage: 7,
            ..BoostConfig::default()
        };
        let (model, records) = fit_boosted(&ds, &cfg).unwrap();
        assert_eq!(records.len(), 1);
        let forest = &model.stages()[0].forest;
        for i in 0..ds.len() {
            assert_eq!(model.predict_row(&ds, i).0, forest.predict_row(&ds, i).0);
        }
    }

    #[test]
    fn single_class_rejected() {
        let ds = Dataset::from_rows(&[vec![1.0], vec![2.0]], vec![Label::Signal; 2], None, None).unwrap();
        assert!(matches!(
            fit_boosted(&ds, &BoostConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn chance_level_data_stops_early() {
        // One constant feature: every tree is a single leaf whose vote flips
        // with bootstrap noise once boosting has balanced the class weights.
        let n = 200;
        let rows = vec![vec![0.0]; n];
        let labels = (0..n)
            .map(|i| if i < 80 { Label::Signal } else { Label::Background })
            .collect();
        let ds = Dataset::from_rows(&rows, labels, None, None).unwrap();
        let cfg = BoostConfig {
            stages: 60,
            trees_per_stage: 1,
            tree_config: TreeConfig {
                mode: SplitMode::BestSplit,
                ..TreeConfig::default()
            },
            seed: 3,
            ..BoostConfig::default()
        };
        let (model, records) = fit_boosted(&ds, &cfg).unwrap();
        assert!(model.stages().len() < cfg.stages);
        assert!(!model.stages().is_empty());
        for r in &records {
            assert!(r.epsilon >= cfg.epsilon_floor && r.epsilon < 0.5);
            assert!(r.alpha > 0.0);
        }
    }

    #[test]
    fn empty_model_and_dimension_errors() {
        let model = BoostedModel {
            stages: vec![],
            config: BoostConfig::default(),
            metadata: meta(),
            n_features: 1,
        };
        assert!(matches!(model.predict(&[0.0]), Err(Error::EmptyModel)));
        let model = BoostedModel::from_stages(
            vec![Stage {
                alpha: 1.0,
                forest: leaf_forest(Label::Signal, 1.0),
            }],
            BoostConfig::default(),
            meta(),
        )
        .unwrap();
        assert!(matches!(model.predict(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }
}

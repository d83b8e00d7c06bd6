//! Boosted extremely randomized trees (BXT).
//!
//! AdaBoost whose per-stage base learner is a bag of extremely randomized
//! trees fit on bootstrap resamples, alongside the classical boosted
//! decision tree (BDT) baseline that differs only in using exhaustive
//! best-split search. Evaluation follows the Higgs challenge protocol:
//! approximate median significance (AMS) in the region above a percentile
//! cut on the master margin.
//!
//! ```no_run
//! use bxt_core::{fit_boosted, generate_synthetic, evaluate, BoostConfig, SyntheticSpec};
//!
//! let ds = generate_synthetic(&SyntheticSpec {
//!     n_samples: 5_000, dimension: 5, overlap: 2.0, imbalance: 0.3, seed: 1,
//! })?;
//! let (model, stages) = fit_boosted(&ds, &BoostConfig { stages: 10, trees_per_stage: 20, ..Default::default() })?;
//! let report = evaluate(&model, &ds, 85.0, 0.0, true)?;
//! println!("{} stages, AMS {:.3}", stages.len(), report.ams);
//! # Ok::<(), bxt_core::Error>(())
//! ```

// Checks like `!(w >= 0.0)` are written to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bagging;
pub mod boosting;
pub mod data;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod tree;

pub use bagging::{bootstrap_sample, tree_correlation, CorrelationMatrix, Forest};
pub use boosting::{
    adaboost, compute_alpha, fit_boosted, update_weights, weighted_error, BaseLearner, BoostConfig,
    BoostRun, BoostedModel, ForestLearner, Stage, StageModel, StageRecord, TrainingMetadata,
};
pub use data::{
    generate_synthetic, load_higgs_csv, split, split_by_tags, write_csv, Dataset, Label, LoadOptions,
    SplitSpec, SyntheticSpec,
};
pub use error::{Error, Result};
pub use metrics::{ams, evaluate, select_region, sweep, AmsReport, SweepCurve, SweepPoint};
pub use rng::SeedStream;
pub use tree::{best_split, random_split, SampleView, SplitCandidate, SplitMode, Tree, TreeConfig};

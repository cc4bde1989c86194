//! Top-k decision tree learning over binary features.
//!
//! `k = 1` is the classic greedy learner and `k = d` searches every split;
//! values in between trade time for accuracy. [`train_topk`] is the plain
//! recursion, [`train_opt`] the branch-and-bound variant with an itemset
//! cache. [`oracle`] and [`synth`] provide ground truth for testing and
//! [`bench`] runs experiment sweeps.

pub mod bench;
pub mod bitset;
pub mod dataset;
pub mod error;
pub mod impurity;
pub mod learner;
pub mod opt;
pub mod oracle;
pub mod par;
pub mod synth;
pub mod tree;

pub use bitset::BitSet;
pub use dataset::{
    binarize, load_csv, split_indices, train_test_split, BinarizationMap, BinaryDataset,
    DatasetView, RawDataset, Schema,
};
pub use error::{Error, Result};
pub use impurity::{feature_score, top_k_features, FeatureScore, Impurity};
pub use learner::{
    leaf_label, train_topk, train_topk_with_stats, Fitted, SearchStats, StatsSnapshot, TrainConfig,
};
pub use opt::{train_opt, train_opt_topk, train_opt_with_stats, Cache};
pub use oracle::{best_in_space, optimal_tree};
pub use synth::{exact_accuracy, SynthKind, SynthSpec};
pub use tree::{accuracy, DecisionTree};

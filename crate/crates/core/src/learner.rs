//! The reference Top-k learner.
//!
//! At every node the `k` best-scoring unqueried features are each tried as
//! the root; both children are grown recursively with one less unit of depth
//! and the candidate with the fewest training errors wins (ties: smaller
//! feature index). `k = 1` is the classic greedy learner, `k = d` is
//! exhaustive.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetView;
use crate::error::{Error, Result};
use crate::impurity::{top_k_with, Impurity};
use crate::par;
use crate::tree::DecisionTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    pub depth: usize,
    pub impurity: Impurity,
    /// Stop at pure nodes. Disabling it forces complete trees, which is only
    /// useful for counting recursive calls.
    #[serde(default = "yes")]
    pub early_exit: bool,
    /// Evaluate sibling candidates on the rayon pool (no effect without the
    /// `parallel` feature).
    #[serde(default = "yes")]
    pub parallel: bool,
    #[serde(default)]
    pub time_limit: Option<Duration>,
}

fn yes() -> bool {
    true
}

impl TrainConfig {
    pub fn new(k: usize, depth: usize, impurity: Impurity) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(Self {
            k,
            depth,
            impurity,
            early_exit: true,
            parallel: true,
            time_limit: None,
        })
    }

    pub fn with_early_exit(mut self, on: bool) -> Self {
        self.early_exit = on;
        self
    }

    pub fn with_parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn with_time_limit(mut self, limit: Option<Duration>) -> Self {
        self.time_limit = limit;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Wall-clock budget checked at every recursion entry.
#[derive(Clone, Copy, Debug)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn after(limit: Option<Duration>) -> Self {
        Deadline(limit.map(|l| Instant::now() + l))
    }

    pub fn none() -> Self {
        Deadline(None)
    }

    #[inline]
    pub fn check(&self) -> Result<()> {
        match self.0 {
            Some(t) if Instant::now() >= t => Err(Error::Timeout),
            _ => Ok(()),
        }
    }
}

/// Instrumentation counters shared by one training run.
#[derive(Debug, Default)]
pub struct SearchStats {
    calls: AtomicU64,
    depth_zero_calls: AtomicU64,
    scored_nodes: AtomicU64,
    feature_evaluations: AtomicU64,
    max_child_solves: AtomicU64,
    cache_hits: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsSnapshot {
    /// Every recursive invocation, including the root.
    pub calls: u64,
    /// Invocations with no depth left.
    pub depth_zero_calls: u64,
    /// Nodes where candidate features were scored.
    pub scored_nodes: u64,
    /// Sum over scored nodes of the features scored there.
    pub feature_evaluations: u64,
    /// Most child subproblems solved at any single node.
    pub max_child_solves: u64,
    pub cache_hits: u64,
}

impl SearchStats {
    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            calls: self.calls.load(Ordering::Relaxed),
            depth_zero_calls: self.depth_zero_calls.load(Ordering::Relaxed),
            scored_nodes: self.scored_nodes.load(Ordering::Relaxed),
            feature_evaluations: self.feature_evaluations.load(Ordering::Relaxed),
            max_child_solves: self.max_child_solves.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn enter(&self, depth: usize) {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if depth == 0 {
            self.depth_zero_calls.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub(crate) fn scored(&self, features: usize) {
        self.scored_nodes.fetch_add(1, Ordering::Relaxed);
        self.feature_evaluations
            .fetch_add(features as u64, Ordering::Relaxed);
    }

    pub(crate) fn child_solves(&self, n: u64) {
        self.max_child_solves.fetch_max(n, Ordering::Relaxed);
    }

    pub(crate) fn cache_hit(&self) {
        self.cache_hits.fetch_add(1, Ordering::Relaxed);
    }
}

/// A trained tree with its misclassification count on the training view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fitted {
    pub tree: DecisionTree,
    pub errors: usize,
}

impl Fitted {
    pub(crate) fn leaf(view: &DatasetView<'_>) -> Self {
        let class = view.majority();
        Fitted {
            tree: DecisionTree::Leaf(class),
            errors: view.len() - view.class_counts()[class as usize] as usize,
        }
    }

    pub fn accuracy(&self, n: usize) -> f64 {
        (n - self.errors) as f64 / n as f64
    }
}

/// Best constant prediction for the view: majority class, ties to the smaller index.
pub fn leaf_label(view: &DatasetView<'_>) -> Result<u32> {
    if view.is_empty() {
        return Err(Error::Contract("leaf label of an empty view".into()));
    }
    Ok(view.majority())
}

pub fn train_topk(view: &DatasetView<'_>, cfg: &TrainConfig) -> Result<DecisionTree> {
    Ok(train_topk_with_stats(view, cfg, &SearchStats::default())?.tree)
}

pub fn train_topk_with_stats(
    view: &DatasetView<'_>,
    cfg: &TrainConfig,
    stats: &SearchStats,
) -> Result<Fitted> {
    cfg.validate()?;
    if view.is_empty() {
        return Err(Error::Contract("training on an empty view".into()));
    }
    let deadline = Deadline::after(cfg.time_limit);
    fit(view, cfg.depth, cfg, stats, &deadline)
}

fn fit(
    view: &DatasetView<'_>,
    depth: usize,
    cfg: &TrainConfig,
    stats: &SearchStats,
    deadline: &Deadline,
) -> Result<Fitted> {
    deadline.check()?;
    stats.enter(depth);
    if depth == 0 || (cfg.early_exit && view.is_pure()) || view.unqueried_count() == 0 {
        return Ok(Fitted::leaf(view));
    }

    let candidates = top_k_with(view, cfg.k, cfg.impurity, cfg.parallel)?;
    stats.scored(view.unqueried_count());
    stats.child_solves(2 * candidates.len() as u64);

    let parent_label = view.majority();
    let grow = |child: &DatasetView<'_>| -> Result<Fitted> {
        if child.is_empty() {
            Ok(Fitted {
                tree: DecisionTree::Leaf(parent_label),
                errors: 0,
            })
        } else {
            fit(child, depth - 1, cfg, stats, deadline)
        }
    };
    let candidate_tree = |&feature: &usize| -> Result<Fitted> {
        let left = grow(&view.restrict(feature, false)?)?;
        let right = grow(&view.restrict(feature, true)?)?;
        Ok(Fitted {
            errors: left.errors + right.errors,
            tree: DecisionTree::split(feature, left.tree, right.tree),
        })
    };

    let results = par::map(&candidates, cfg.parallel && depth >= 2, candidate_tree);
    let mut best: Option<(usize, Fitted)> = None;
    for (&feature, result) in candidates.iter().zip(results) {
        let fitted = result?;
        let better = match &best {
            None => true,
            Some((bf, b)) => (fitted.errors, feature) < (b.errors, *bf),
        };
        if better {
            best = Some((feature, fitted));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

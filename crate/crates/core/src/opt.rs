//! Branch-and-bound Top-k with itemset caching.
//!
//! Same search space and same optimum as [`crate::learner`], but each
//! subproblem carries an upper bound on misclassifications. Subtrees that
//! cannot beat the best candidate found so far are abandoned, and solved
//! subproblems are cached by their itemset (the sorted `(feature, bit)`
//! assignments on the path) plus remaining depth. Equal itemsets select equal
//! rows and equal queried sets, so two split orders reaching the same node
//! share one entry.
//!
//! A `None` result is the NO-TREE outcome: nothing in the search space meets
//! the bound.

use std::collections::HashMap;

use crate::dataset::{majority_class, DatasetView};
use crate::error::{Error, Result};
use crate::impurity::{top_k_with, NodeMasks};
use crate::learner::{Deadline, Fitted, SearchStats, TrainConfig};
use crate::tree::DecisionTree;

/// Sorted `(feature, bit)` path assignments identifying a node's rows.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Itemset(Vec<(usize, bool)>);

impl Itemset {
    pub fn new(mut items: Vec<(usize, bool)>) -> Self {
        items.sort_unstable();
        Itemset(items)
    }

    pub fn of(view: &DatasetView<'_>) -> Self {
        Itemset(view.itemset().to_vec())
    }

    pub fn items(&self) -> &[(usize, bool)] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub itemset: Itemset,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheEntry {
    /// `None` records that no tree met `ub`.
    pub tree: Option<Fitted>,
    pub ub: usize,
}

/// Solved subproblems of one training run.
#[derive(Debug, Default)]
pub struct Cache {
    map: HashMap<CacheKey, CacheEntry>,
}

impl Cache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lookup(&self, key: &CacheKey) -> Option<&CacheEntry> {
        self.map.get(key)
    }

    pub fn store(&mut self, key: CacheKey, entry: CacheEntry) {
        self.map.insert(key, entry);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Runs the bounded search from `view` with budget `ub`.
pub fn train_opt_topk(
    view: &DatasetView<'_>,
    cfg: &TrainConfig,
    ub: usize,
    cache: &mut Cache,
) -> Result<Option<Fitted>> {
    train_opt_topk_with_stats(view, cfg, ub, cache, &SearchStats::default())
}

pub fn train_opt_topk_with_stats(
    view: &DatasetView<'_>,
    cfg: &TrainConfig,
    ub: usize,
    cache: &mut Cache,
    stats: &SearchStats,
) -> Result<Option<Fitted>> {
    cfg.validate()?;
    if view.is_empty() {
        return Err(Error::Contract("training on an empty view".into()));
    }
    let mut search = Search {
        cfg,
        cache,
        stats,
        deadline: Deadline::after(cfg.time_limit),
    };
    search.solve(view, cfg.depth, ub)
}

/// Unbounded run (`ub = |S|`) with a fresh cache; always yields a tree.
pub fn train_opt(view: &DatasetView<'_>, cfg: &TrainConfig) -> Result<Fitted> {
    train_opt_with_stats(view, cfg, &SearchStats::default())
}

pub fn train_opt_with_stats(
    view: &DatasetView<'_>,
    cfg: &TrainConfig,
    stats: &SearchStats,
) -> Result<Fitted> {
    let mut cache = Cache::new();
    train_opt_topk_with_stats(view, cfg, view.len(), &mut cache, stats)?
        .ok_or_else(|| Error::Contract("unbounded search returned no tree".into()))
}

struct Search<'c> {
    cfg: &'c TrainConfig,
    cache: &'c mut Cache,
    stats: &'c SearchStats,
    deadline: Deadline,
}

impl Search<'_> {
    fn solve(&mut self, view: &DatasetView<'_>, depth: usize, ub: usize) -> Result<Option<Fitted>> {
        self.deadline.check()?;
        self.stats.enter(depth);
        if depth == 0 || view.is_pure() || view.unqueried_count() == 0 {
            let leaf = Fitted::leaf(view);
            return Ok((leaf.errors <= ub).then_some(leaf));
        }

        let key = CacheKey {
            itemset: Itemset::of(view),
            depth,
        };
        if let Some(entry) = self.cache.lookup(&key) {
            match &entry.tree {
                // a cached tree is optimal for its node, so one above budget
                // means nothing in the space meets it
                Some(t) => {
                    self.stats.cache_hit();
                    return Ok((t.errors <= ub).then(|| t.clone()));
                }
                None if ub <= entry.ub => {
                    self.stats.cache_hit();
                    return Ok(None);
                }
                None => {}
            }
        }

        let mut best: Option<Fitted> = None;
        let mut best_errors = ub + 1;
        let candidates = top_k_with(view, self.cfg.k, self.cfg.impurity, self.cfg.parallel)?;
        self.stats.scored(view.unqueried_count());
        // children at depth 0 are leaves read straight off the split counts
        let masks = (depth == 1).then(|| NodeMasks::new(view));
        let mut solves = 0u64;

        for &feature in &candidates {
            solves += 1;
            let left = match &masks {
                Some(m) => self.leaf_child(view, m, feature, false, best_errors - 1)?,
                None => self.child(view, feature, false, depth - 1, best_errors - 1)?,
            };
            let Some(left) = left else { continue };
            let left_errors = left.errors;
            if left_errors > best_errors {
                continue;
            }
            let Some(budget) = (best_errors - 1).checked_sub(left_errors) else {
                continue;
            };
            solves += 1;
            let right = match &masks {
                Some(m) => self.leaf_child(view, m, feature, true, budget)?,
                None => self.child(view, feature, true, depth - 1, budget)?,
            };
            let Some(right) = right else { continue };
            let total = left_errors + right.errors;
            if total < best_errors {
                best_errors = total;
                best = Some(Fitted {
                    tree: DecisionTree::split(feature, left.tree, right.tree),
                    errors: total,
                });
            }
            if total == 0 {
                break;
            }
        }
        self.stats.child_solves(solves);
        self.cache.store(
            key,
            CacheEntry {
                tree: best.clone(),
                ub,
            },
        );
        Ok(best)
    }

    fn child(
        &mut self,
        view: &DatasetView<'_>,
        feature: usize,
        value: bool,
        depth: usize,
        ub: usize,
    ) -> Result<Option<Fitted>> {
        let child = view.restrict(feature, value)?;
        if child.is_empty() {
            return Ok(Some(Fitted {
                tree: DecisionTree::Leaf(view.majority()),
                errors: 0,
            }));
        }
        self.solve(&child, depth, ub)
    }

    fn leaf_child(
        &mut self,
        view: &DatasetView<'_>,
        masks: &NodeMasks,
        feature: usize,
        value: bool,
        ub: usize,
    ) -> Result<Option<Fitted>> {
        let parent = view.class_counts();
        let mut counts = vec![0u32; parent.len()];
        masks.ones(view.base().column(feature), &mut counts);
        if !value {
            for (c, p) in counts.iter_mut().zip(parent) {
                *c = p - *c;
            }
        }
        let size: u32 = counts.iter().sum();
        if size == 0 {
            return Ok(Some(Fitted {
                tree: DecisionTree::Leaf(view.majority()),
                errors: 0,
            }));
        }
        self.deadline.check()?;
        self.stats.enter(0);
        let class = majority_class(&counts);
        let errors = (size - counts[class as usize]) as usize;
        Ok((errors <= ub).then_some(Fitted {
            tree: DecisionTree::Leaf(class),
            errors,
        }))
    }
}

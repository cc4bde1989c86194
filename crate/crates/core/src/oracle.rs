//! Brute-force ground truth for small instances.
//!
//! Two independent routes to the best tree in the Top-k search space:
//! [`best_in_space`] walks the space recursively, [`best_in_space_filtered`]
//! enumerates every non-redundant tree and keeps the members. Both score
//! candidate trees by evaluating them row by row rather than through class
//! counts. [`optimal_tree`] drops the candidate restriction entirely.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{BinaryDataset, DatasetView};
use crate::error::{Error, Result};
use crate::impurity::{top_k_features, Impurity};
use crate::learner::{train_topk_with_stats, SearchStats, TrainConfig};
use crate::opt::{train_opt, train_opt_topk, Cache};
use crate::tree::DecisionTree;

pub const SPACE_MAX_FEATURES: usize = 12;
pub const SPACE_MAX_DEPTH: usize = 4;
pub const OPTIMAL_MAX_FEATURES: usize = 8;
pub const OPTIMAL_MAX_DEPTH: usize = 3;
/// Largest tree population the generate-and-filter route will enumerate.
pub const FILTER_MAX_TREES: u128 = 400_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub errors: usize,
    pub accuracy: f64,
    pub tree: DecisionTree,
}

impl OracleResult {
    fn new(view: &DatasetView<'_>, errors: usize, tree: DecisionTree) -> Self {
        let n = view.len();
        Self {
            errors,
            accuracy: if n == 0 {
                1.0
            } else {
                (n - errors) as f64 / n as f64
            },
            tree,
        }
    }
}

/// Errors of `tree` on the view, one row at a time.
fn row_errors(tree: &DecisionTree, view: &DatasetView<'_>) -> usize {
    let base = view.base();
    view.rows()
        .ones()
        .filter(|&r| tree.predict_row(base, r) != base.label(r))
        .count()
}

fn best_constant(view: &DatasetView<'_>) -> (usize, DecisionTree) {
    (0..view.base().n_classes() as u32)
        .map(|c| {
            let t = DecisionTree::Leaf(c);
            (row_errors(&t, view), t)
        })
        .min_by(|a, b| {
            a.0.cmp(&b.0)
                .then_with(|| a.1.encoding().cmp(&b.1.encoding()))
        })
        .expect("at least one class")
}

// (errors, tree) with smallest errors, then smallest encoding
fn better(a: &(usize, DecisionTree), b: &(usize, DecisionTree)) -> bool {
    (a.0, a.1.encoding()) < (b.0, b.1.encoding())
}

enum Candidates {
    TopK(usize, Impurity),
    All,
}

fn walk(view: &DatasetView<'_>, depth: usize, rule: &Candidates) -> Result<(usize, DecisionTree)> {
    if view.is_empty() {
        return Ok((0, DecisionTree::Leaf(0)));
    }
    if depth == 0 || view.unqueried_count() == 0 {
        return Ok(best_constant(view));
    }
    let roots = match rule {
        Candidates::TopK(k, kind) => top_k_features(view, *k, *kind)?,
        Candidates::All => view.unqueried().collect(),
    };
    let mut best: Option<(usize, DecisionTree)> = None;
    for f in roots {
        let (_, left) = walk(&view.restrict(f, false)?, depth - 1, rule)?;
        let (_, right) = walk(&view.restrict(f, true)?, depth - 1, rule)?;
        let tree = DecisionTree::split(f, left, right);
        let cand = (row_errors(&tree, view), tree);
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    Ok(best.expect("nonempty candidate set"))
}

/// Most accurate tree reachable by Top-k with depth `depth` on `view`.
pub fn best_in_space(
    view: &DatasetView<'_>,
    k: usize,
    depth: usize,
    kind: Impurity,
) -> Result<OracleResult> {
    guard(view, depth, SPACE_MAX_FEATURES, SPACE_MAX_DEPTH)?;
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let (errors, tree) = walk(view, depth, &Candidates::TopK(k, kind))?;
    Ok(OracleResult::new(view, errors, tree))
}

/// Most accurate non-redundant tree of depth at most `depth`, any features.
pub fn optimal_tree(view: &DatasetView<'_>, depth: usize) -> Result<OracleResult> {
    guard(view, depth, OPTIMAL_MAX_FEATURES, OPTIMAL_MAX_DEPTH)?;
    let (errors, tree) = walk(view, depth, &Candidates::All)?;
    Ok(OracleResult::new(view, errors, tree))
}

fn guard(view: &DatasetView<'_>, depth: usize, max_d: usize, max_h: usize) -> Result<()> {
    if view.is_empty() {
        return Err(Error::Contract("oracle on an empty view".into()));
    }
    let d = view.base().d();
    if d > max_d || depth > max_h {
        return Err(Error::SizeGuard(format!(
            "d = {d}, depth = {depth} exceeds the limit d <= {max_d}, depth <= {max_h}"
        )));
    }
    Ok(())
}

/// Number of non-redundant trees of depth at most `depth` over `features`
/// features with `classes` leaf labels.
pub fn tree_population(features: usize, depth: usize, classes: usize) -> u128 {
    if depth == 0 || features == 0 {
        return classes as u128;
    }
    let sub = tree_population(features - 1, depth - 1, classes);
    (classes as u128).saturating_add((features as u128).saturating_mul(sub.saturating_mul(sub)))
}

fn all_trees(features: &[usize], depth: usize, classes: u32) -> Vec<DecisionTree> {
    let mut out: Vec<DecisionTree> = (0..classes).map(DecisionTree::Leaf).collect();
    if depth == 0 {
        return out;
    }
    for (i, &f) in features.iter().enumerate() {
        let rest: Vec<usize> = features
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &g)| g)
            .collect();
        let subs = all_trees(&rest, depth - 1, classes);
        for l in &subs {
            for r in &subs {
                out.push(DecisionTree::split(f, l.clone(), r.clone()));
            }
        }
    }
    out
}

/// Membership in the Top-k search space. Leaves are admitted at any depth:
/// a leaf computes the same function as a complete subtree with every leaf
/// carrying its label, and such a subtree is always in the space.
pub fn in_space(
    tree: &DecisionTree,
    view: &DatasetView<'_>,
    k: usize,
    depth: usize,
    kind: Impurity,
) -> Result<bool> {
    match tree {
        DecisionTree::Leaf(_) => Ok(true),
        DecisionTree::Split {
            feature,
            left,
            right,
        } => {
            if depth == 0 || view.is_queried(*feature) {
                return Ok(false);
            }
            if !view.is_empty() && !top_k_features(view, k, kind)?.contains(feature) {
                return Ok(false);
            }
            Ok(
                in_space(left, &view.restrict(*feature, false)?, k, depth - 1, kind)?
                    && in_space(right, &view.restrict(*feature, true)?, k, depth - 1, kind)?,
            )
        }
    }
}

/// Generate-and-filter counterpart of [`best_in_space`].
pub fn best_in_space_filtered(
    view: &DatasetView<'_>,
    k: usize,
    depth: usize,
    kind: Impurity,
) -> Result<OracleResult> {
    guard(view, depth, SPACE_MAX_FEATURES, SPACE_MAX_DEPTH)?;
    let features: Vec<usize> = view.unqueried().collect();
    let classes = view.base().n_classes();
    let population = tree_population(features.len(), depth, classes);
    if population > FILTER_MAX_TREES {
        return Err(Error::SizeGuard(format!(
            "{population} candidate trees exceed the limit of {FILTER_MAX_TREES}"
        )));
    }
    let mut best: Option<(usize, DecisionTree)> = None;
    for tree in all_trees(&features, depth, classes as u32) {
        if !in_space(&tree, view, k, depth, kind)? {
            continue;
        }
        let cand = (row_errors(&tree, view), tree);
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    }
    let (errors, tree) = best.expect("constant trees are always members");
    Ok(OracleResult::new(view, errors, tree))
}

/// A random small problem for differential testing.
#[derive(Clone, Debug)]
pub struct Instance {
    pub seed: u64,
    pub data: BinaryDataset,
    pub k: usize,
    pub depth: usize,
    pub impurity: Impurity,
}

/// Draws d ≤ `max_d`, n ≤ `max_n`, depth ≤ `max_depth`, k ∈ 1..=d from `seed`.
pub fn random_instance(seed: u64, max_d: usize, max_n: usize, max_depth: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(1..=max_d);
    let n = rng.gen_range(1..=max_n);
    let classes = if rng.gen_bool(0.75) { 2 } else { 3 };
    // a hidden rule plus noise keeps some structure in the labels
    let rule: Vec<usize> = (0..rng.gen_range(1..=d.min(3)))
        .map(|_| rng.gen_range(0..d))
        .collect();
    let noise = rng.gen_range(0.0..0.4);
    let rows: Vec<Vec<bool>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_bool(0.5)).collect())
        .collect();
    let labels = rows
        .iter()
        .map(|r| {
            if rng.gen_bool(noise) {
                rng.gen_range(0..classes)
            } else {
                rule.iter().filter(|&&f| r[f]).count() as u32 % classes
            }
        })
        .collect();
    let data = BinaryDataset::from_rows(&rows, labels).expect("well-formed rows");
    let impurity = Impurity::ALL[rng.gen_range(0..3)];
    Instance {
        seed,
        k: rng.gen_range(1..=d),
        depth: rng.gen_range(0..=max_depth),
        impurity,
        data,
    }
}

/// Outcome of checking both engines against the oracle on one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOutcome {
    pub seed: u64,
    pub oracle_errors: usize,
    pub plain_errors: usize,
    pub opt_errors: usize,
    /// Bounded search under `oracle_errors - 1` returned NO-TREE (vacuous when the optimum is 0).
    pub no_tree_below_optimum: bool,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.plain_errors == self.oracle_errors
            && self.opt_errors == self.oracle_errors
            && self.no_tree_below_optimum
    }
}

pub fn check_instance(inst: &Instance) -> Result<CheckOutcome> {
    let view = inst.data.view();
    let oracle = best_in_space(&view, inst.k, inst.depth, inst.impurity)?;
    let cfg = TrainConfig::new(inst.k, inst.depth, inst.impurity)?.with_parallel(false);
    let plain = train_topk_with_stats(&view, &cfg, &SearchStats::default())?;
    let opt = train_opt(&view, &cfg)?;
    let no_tree_below_optimum = match oracle.errors.checked_sub(1) {
        None => true,
        Some(ub) => train_opt_topk(&view, &cfg, ub, &mut Cache::new())?.is_none(),
    };
    Ok(CheckOutcome {
        seed: inst.seed,
        oracle_errors: oracle.errors,
        plain_errors: plain.errors,
        opt_errors: opt.errors,
        no_tree_below_optimum,
    })
}

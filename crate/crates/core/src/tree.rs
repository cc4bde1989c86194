//! Binary decision trees over 0/1 features.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::dataset::{write_atomically, BinaryDataset, DatasetView};
use crate::error::{Error, Result};

/// A leaf predicting a class, or a split whose left branch takes `x[feature] = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "TreeRepr", into = "TreeRepr")]
pub enum DecisionTree {
    Leaf(u32),
    Split {
        feature: usize,
        left: Box<DecisionTree>,
        right: Box<DecisionTree>,
    },
}

// JSON shape: {"leaf": c} or {"split": f, "left": .., "right": ..}
#[derive(Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum TreeRepr {
    Leaf {
        leaf: u32,
    },
    Split {
        split: usize,
        left: Box<TreeRepr>,
        right: Box<TreeRepr>,
    },
}

impl From<TreeRepr> for DecisionTree {
    fn from(r: TreeRepr) -> Self {
        match r {
            TreeRepr::Leaf { leaf } => DecisionTree::Leaf(leaf),
            TreeRepr::Split { split, left, right } => DecisionTree::Split {
                feature: split,
                left: Box::new((*left).into()),
                right: Box::new((*right).into()),
            },
        }
    }
}

impl From<DecisionTree> for TreeRepr {
    fn from(t: DecisionTree) -> Self {
        match t {
            DecisionTree::Leaf(leaf) => TreeRepr::Leaf { leaf },
            DecisionTree::Split {
                feature,
                left,
                right,
            } => TreeRepr::Split {
                split: feature,
                left: Box::new((*left).into()),
                right: Box::new((*right).into()),
            },
        }
    }
}

impl DecisionTree {
    pub fn split(feature: usize, left: DecisionTree, right: DecisionTree) -> Self {
        DecisionTree::Split {
            feature,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, DecisionTree::Leaf(_))
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 0,
            DecisionTree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 1,
            DecisionTree::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        match self {
            DecisionTree::Leaf(_) => None,
            DecisionTree::Split {
                feature,
                left,
                right,
            } => Some(
                (*feature)
                    .max(left.max_feature().unwrap_or(0))
                    .max(right.max_feature().unwrap_or(0)),
            ),
        }
    }

    /// No feature repeats along any root-to-leaf path.
    pub fn is_non_redundant(&self) -> bool {
        fn walk(t: &DecisionTree, path: &mut Vec<usize>) -> bool {
            match t {
                DecisionTree::Leaf(_) => true,
                DecisionTree::Split {
                    feature,
                    left,
                    right,
                } => {
                    if path.contains(feature) {
                        return false;
                    }
                    path.push(*feature);
                    let ok = walk(left, path) && walk(right, path);
                    path.pop();
                    ok
                }
            }
        }
        walk(self, &mut Vec::new())
    }

    /// Class for a feature vector.
    pub fn predict(&self, x: &[bool]) -> Result<u32> {
        let mut node = self;
        loop {
            match node {
                DecisionTree::Leaf(c) => return Ok(*c),
                DecisionTree::Split {
                    feature,
                    left,
                    right,
                } => {
                    let bit = *x.get(*feature).ok_or_else(|| {
                        Error::Contract(format!(
                            "feature {feature} out of range for a vector of length {}",
                            x.len()
                        ))
                    })?;
                    node = if bit { right } else { left };
                }
            }
        }
    }

    /// Class for row `row` of `ds`, reading bits directly from the columns.
    pub fn predict_row(&self, ds: &BinaryDataset, row: usize) -> u32 {
        let mut node = self;
        loop {
            match node {
                DecisionTree::Leaf(c) => return *c,
                DecisionTree::Split {
                    feature,
                    left,
                    right,
                } => node = if ds.bit(row, *feature) { right } else { left },
            }
        }
    }

    /// Misclassified rows among `rows`.
    pub fn errors_on(&self, ds: &BinaryDataset, rows: &BitSet) -> Result<usize> {
        if let Some(f) = self.max_feature() {
            if f >= ds.d() {
                return Err(Error::Contract(format!(
                    "tree splits on feature {f} but dataset has {}",
                    ds.d()
                )));
            }
        }
        Ok(self.count_errors(ds, rows))
    }

    // pushes the row set down the tree; leaves count non-matching labels
    fn count_errors(&self, ds: &BinaryDataset, rows: &BitSet) -> usize {
        match self {
            DecisionTree::Leaf(c) => {
                let c = *c as usize;
                let total = rows.count_ones();
                if c < ds.n_classes() {
                    total - rows.and_count(ds.class_mask(c))
                } else {
                    total
                }
            }
            DecisionTree::Split {
                feature,
                left,
                right,
            } => {
                let col = ds.column(*feature);
                left.count_errors(ds, &rows.and_not(col)) + right.count_errors(ds, &rows.and(col))
            }
        }
    }

    /// Preorder encoding used to break ties between equally good trees.
    pub fn encoding(&self) -> Vec<i64> {
        fn walk(t: &DecisionTree, out: &mut Vec<i64>) {
            match t {
                DecisionTree::Leaf(c) => out.push(-1 - i64::from(*c)),
                DecisionTree::Split {
                    feature,
                    left,
                    right,
                } => {
                    out.push(*feature as i64);
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomically(path.as_ref(), |f| {
            serde_json::to_writer(&mut *f, self)?;
            Ok(())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// Fraction of rows of `ds` the tree classifies correctly.
pub fn accuracy(tree: &DecisionTree, ds: &BinaryDataset) -> Result<f64> {
    if ds.n() == 0 {
        return Err(Error::Contract("accuracy on an empty dataset".into()));
    }
    let errors = tree.errors_on(ds, &BitSet::full(ds.n()))?;
    Ok((ds.n() - errors) as f64 / ds.n() as f64)
}

/// Fraction of the view's rows the tree classifies correctly.
pub fn view_accuracy(tree: &DecisionTree, view: &DatasetView<'_>) -> Result<f64> {
    if view.is_empty() {
        return Err(Error::Contract("accuracy on an empty view".into()));
    }
    let errors = tree.errors_on(view.base(), view.rows())?;
    Ok((view.len() - errors) as f64 / view.len() as f64)
}

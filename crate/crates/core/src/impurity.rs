//! Impurity functions and the impurity-based feature score.
//!
//! For binary labels every impurity `G` is concave and symmetric about 1/2
//! with `G(0) = G(1) = 0` and `G(1/2) = 1`. Multi-class datasets use the
//! conventional generalizations, which only matter for ranking.
//!
//! Terms are always summed over class counts sorted ascending, so the value
//! is bit-identical under any relabeling of classes and any row order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::dataset::DatasetView;
use crate::error::{Error, Result};
use crate::par;

/// Scores closer than this are treated as tied and ordered by feature index.
pub const SCORE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impurity {
    /// Binary entropy (ID3, C4.5).
    #[default]
    Entropy,
    /// `4p(1-p)` (CART).
    Gini,
    /// `2·sqrt(p(1-p))`.
    #[serde(alias = "sqrt")]
    SqrtKm,
}

impl fmt::Display for Impurity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Impurity::Entropy => "entropy",
            Impurity::Gini => "gini",
            Impurity::SqrtKm => "sqrt",
        })
    }
}

impl FromStr for Impurity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(Impurity::Entropy),
            "gini" => Ok(Impurity::Gini),
            "sqrt" | "sqrt_km" | "sqrt-km" => Ok(Impurity::SqrtKm),
            other => Err(Error::Config(format!("unknown impurity `{other}`"))),
        }
    }
}

impl Impurity {
    pub const ALL: [Impurity; 3] = [Impurity::Entropy, Impurity::Gini, Impurity::SqrtKm];

    /// Impurity of a class-count vector; an empty vector scores 0.
    pub fn of_counts(self, counts: &[u32]) -> f64 {
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if total == 0 {
            return 0.0;
        }
        if let [a, b] = counts {
            return self.of_pair(*a, *b);
        }
        let mut nz: Vec<u32> = counts.iter().copied().filter(|&c| c > 0).collect();
        if nz.len() <= 1 {
            return 0.0;
        }
        nz.sort_unstable();
        let n = total as f64;
        match self {
            Impurity::Entropy => -nz
                .iter()
                .map(|&c| {
                    let p = f64::from(c) / n;
                    p * p.log2()
                })
                .sum::<f64>(),
            Impurity::Gini => {
                1.0 - nz
                    .iter()
                    .map(|&c| {
                        let p = f64::from(c) / n;
                        p * p
                    })
                    .sum::<f64>()
            }
            Impurity::SqrtKm => nz
                .iter()
                .map(|&c| {
                    let p = f64::from(c) / n;
                    (p * (1.0 - p)).sqrt()
                })
                .sum(),
        }
    }

    /// Two-class impurity from counts, symmetric in its arguments.
    pub fn of_pair(self, a: u32, b: u32) -> f64 {
        if a == 0 || b == 0 {
            return 0.0;
        }
        let (a, b) = (f64::from(a.min(b)), f64::from(a.max(b)));
        let n = a + b;
        match self {
            Impurity::Entropy => {
                let (p, q) = (a / n, b / n);
                -(p * p.log2() + q * q.log2())
            }
            Impurity::Gini => 4.0 * a * b / (n * n),
            Impurity::SqrtKm => 2.0 * (a * b).sqrt() / n,
        }
    }

    /// `G(p)` for the binary case, `p = Pr[y = 1]`.
    pub fn binary(self, p: f64) -> f64 {
        if p <= 0.0 || p >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - p;
        match self {
            Impurity::Entropy => -(p * p.log2() + q * q.log2()),
            Impurity::Gini => 4.0 * p * q,
            Impurity::SqrtKm => 2.0 * (p * q).sqrt(),
        }
    }
}

/// Per-class counts of a set of rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelDistribution {
    pub counts: Vec<u32>,
}

impl LabelDistribution {
    pub fn new(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

pub fn impurity_value(kind: Impurity, dist: &LabelDistribution) -> Result<f64> {
    if dist.total() == 0 {
        return Err(Error::Contract("impurity of an empty distribution".into()));
    }
    Ok(kind.of_counts(&dist.counts))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureScore {
    pub feature: usize,
    pub score: f64,
}

impl FeatureScore {
    /// Score snapped to the tolerance grid; equal keys are ties.
    pub fn rank_key(&self) -> i64 {
        (self.score / SCORE_TOLERANCE).round() as i64
    }
}

/// Gain from splitting `parent` into the rows counted by `ones` and the rest.
/// An empty side contributes nothing.
pub fn score_from_counts(kind: Impurity, parent: &[u32], ones: &[u32]) -> f64 {
    if let ([p0, p1], [o0, o1]) = (parent, ones) {
        return score_pair(kind, [*p0, *p1], [*o0, *o1]);
    }
    let zeros: Vec<u32> = parent.iter().zip(ones).map(|(p, o)| p - o).collect();
    let n: u32 = parent.iter().sum();
    let n1: u32 = ones.iter().sum();
    let n0 = n - n1;
    let nf = f64::from(n);
    let t0 = if n0 == 0 {
        0.0
    } else {
        f64::from(n0) / nf * kind.of_counts(&zeros)
    };
    let t1 = if n1 == 0 {
        0.0
    } else {
        f64::from(n1) / nf * kind.of_counts(ones)
    };
    (kind.of_counts(parent) - (t0 + t1)).max(0.0)
}

fn score_pair(kind: Impurity, parent: [u32; 2], ones: [u32; 2]) -> f64 {
    let zeros = [parent[0] - ones[0], parent[1] - ones[1]];
    let nf = f64::from(parent[0] + parent[1]);
    let side = |c: [u32; 2]| {
        let m = c[0] + c[1];
        if m == 0 {
            0.0
        } else {
            f64::from(m) / nf * kind.of_pair(c[0], c[1])
        }
    };
    (kind.of_pair(parent[0], parent[1]) - (side(zeros) + side(ones))).max(0.0)
}

/// Row subsets shared by all features scored at one node.
pub(crate) struct NodeMasks {
    masked: Vec<BitSet>,
}

impl NodeMasks {
    pub(crate) fn new(view: &DatasetView<'_>) -> Self {
        let base = view.base();
        let c = base.n_classes();
        // the last class is derived from the row total
        let mut masked: Vec<BitSet> = (0..c.saturating_sub(1))
            .map(|k| view.rows().and(base.class_mask(k)))
            .collect();
        masked.push(view.rows().clone());
        Self { masked }
    }

    /// Per-class counts among the view's rows where `feature == 1`.
    pub(crate) fn ones(&self, column: &BitSet, out: &mut [u32]) {
        let last = self.masked.len() - 1;
        let total = column.and_count(&self.masked[last]) as u32;
        let mut rest = total;
        for (k, m) in self.masked[..last].iter().enumerate() {
            let v = column.and_count(m) as u32;
            out[k] = v;
            rest -= v;
        }
        out[last] = rest;
    }
}

/// Per-class counts of the view's rows with `feature == 1`.
pub fn ones_counts(view: &DatasetView<'_>, feature: usize) -> Vec<u32> {
    let mut out = vec![0; view.base().n_classes()];
    NodeMasks::new(view).ones(view.base().column(feature), &mut out);
    out
}

/// Impurity-based score of splitting `view` on `feature`.
pub fn feature_score(view: &DatasetView<'_>, feature: usize, kind: Impurity) -> Result<f64> {
    if view.is_empty() {
        return Err(Error::Contract("scoring on an empty view".into()));
    }
    if feature >= view.base().d() {
        return Err(Error::Contract(format!("feature {feature} out of range")));
    }
    if view.is_queried(feature) {
        return Err(Error::Contract(format!(
            "feature {feature} already queried"
        )));
    }
    Ok(score_from_counts(
        kind,
        view.class_counts(),
        &ones_counts(view, feature),
    ))
}

// below this many (feature × word) units scoring stays on one thread
const PARALLEL_SCORING_WORK: usize = 1 << 14;

/// Scores of every unqueried feature, in feature order.
pub fn score_features(view: &DatasetView<'_>, kind: Impurity, parallel: bool) -> Vec<FeatureScore> {
    let base = view.base();
    let masks = NodeMasks::new(view);
    let features: Vec<usize> = view.unqueried().collect();
    let parent = view.class_counts();
    let words = view.rows().words().len();
    let parallel = parallel && features.len() * words * base.n_classes() >= PARALLEL_SCORING_WORK;
    let score_one = |&f: &usize| {
        let score = if let [p0, p1] = parent {
            let mut ones = [0u32; 2];
            masks.ones(base.column(f), &mut ones);
            score_pair(kind, [*p0, *p1], ones)
        } else {
            let mut ones = vec![0u32; base.n_classes()];
            masks.ones(base.column(f), &mut ones);
            score_from_counts(kind, parent, &ones)
        };
        FeatureScore { feature: f, score }
    };
    if parallel {
        // chunk to keep per-task work meaningful
        let chunks: Vec<&[usize]> = features.chunks(64).collect();
        par::map(&chunks, true, |chunk| {
            chunk.iter().map(score_one).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect()
    } else {
        features.iter().map(score_one).collect()
    }
}

/// Orders scores descending, ties by ascending feature index.
pub fn rank(scores: &mut [FeatureScore]) {
    scores.sort_by(|a, b| {
        b.rank_key()
            .cmp(&a.rank_key())
            .then(a.feature.cmp(&b.feature))
    });
}

/// The `k` best unqueried features, best first.
pub fn top_k_features(view: &DatasetView<'_>, k: usize, kind: Impurity) -> Result<Vec<usize>> {
    top_k_with(view, k, kind, false)
}

pub(crate) fn top_k_with(
    view: &DatasetView<'_>,
    k: usize,
    kind: Impurity,
    parallel: bool,
) -> Result<Vec<usize>> {
    if view.is_empty() {
        return Err(Error::Contract("top-k on an empty view".into()));
    }
    let mut scores = score_features(view, kind, parallel);
    let k = k.min(scores.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    let cmp = |a: &FeatureScore, b: &FeatureScore| {
        b.rank_key()
            .cmp(&a.rank_key())
            .then(a.feature.cmp(&b.feature))
    };
    if k < scores.len() {
        scores.select_nth_unstable_by(k - 1, cmp);
        scores.truncate(k);
    }
    scores.sort_by(cmp);
    Ok(scores.into_iter().map(|s| s.feature).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BinaryDataset;
    use proptest::prelude::*;

    fn ds(cols: &[&[u8]], labels: &[u32]) -> BinaryDataset {
        let rows: Vec<Vec<bool>> = (0..labels.len())
            .map(|r| cols.iter().map(|c| c[r] == 1).collect())
            .collect();
        BinaryDataset::from_rows(&rows, labels.to_vec()).unwrap()
    }

    #[test]
    fn reference_values() {
        assert_eq!(Impurity::Entropy.binary(0.5), 1.0);
        assert_eq!(Impurity::Gini.binary(0.25), 0.75);
        for kind in Impurity::ALL {
            assert_eq!(kind.binary(0.0), 0.0);
            assert_eq!(kind.binary(1.0), 0.0);
            assert_eq!(kind.binary(0.5), 1.0);
            assert_eq!(kind.of_counts(&[3, 3]), 1.0);
            assert_eq!(kind.of_counts(&[0, 7]), 0.0);
        }
        assert_eq!(
            impurity_value(Impurity::Gini, &LabelDistribution::new(vec![3, 1])).unwrap(),
            0.75
        );
    }

    #[test]
    fn empty_distribution_is_contract_error() {
        assert!(matches!(
            impurity_value(Impurity::Entropy, &LabelDistribution::new(vec![0, 0])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn multiclass_formulas() {
        let e = Impurity::Entropy.of_counts(&[1, 1, 1, 1]);
        assert!((e - 2.0).abs() < 1e-15);
        let g = Impurity::Gini.of_counts(&[1, 1, 2]);
        assert!((g - (1.0 - (0.0625 + 0.0625 + 0.25))).abs() < 1e-15);
    }

    #[test]
    fn perfect_split_scores_one() {
        let d = ds(&[&[0, 0, 1, 1]], &[0, 0, 1, 1]);
        assert_eq!(feature_score(&d.view(), 0, Impurity::Entropy).unwrap(), 1.0);
    }

    #[test]
    fn independent_split_scores_zero() {
        let d = ds(&[&[0, 0, 1, 1]], &[0, 1, 0, 1]);
        for kind in Impurity::ALL {
            assert_eq!(feature_score(&d.view(), 0, kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_feature_scores_zero() {
        let d = ds(&[&[1, 1, 1, 1]], &[0, 1, 1, 1]);
        for kind in Impurity::ALL {
            assert_eq!(feature_score(&d.view(), 0, kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn all_ties_fall_back_to_index_order() {
        let zero: &[u8] = &[0, 0, 0, 0];
        let d = ds(&[zero, zero, zero, zero, zero], &[0, 1, 0, 1]);
        assert_eq!(
            top_k_features(&d.view(), 2, Impurity::Entropy).unwrap(),
            vec![0, 1]
        );
    }

    #[test]
    fn sorts_by_score() {
        // feature 1 perfect, feature 2 partial, feature 0 useless
        let d = ds(
            &[
                &[0, 1, 0, 1, 0, 1, 0, 1],
                &[0, 0, 0, 0, 1, 1, 1, 1],
                &[0, 0, 0, 1, 1, 1, 1, 1],
            ],
            &[0, 0, 0, 0, 1, 1, 1, 1],
        );
        let v = d.view();
        assert_eq!(
            top_k_features(&v, 2, Impurity::Entropy).unwrap(),
            vec![1, 2]
        );
        assert_eq!(
            top_k_features(&v, 3, Impurity::Gini).unwrap(),
            vec![1, 2, 0]
        );
        let after = v.restrict(1, true).unwrap();
        assert_eq!(
            top_k_features(&after, 5, Impurity::Gini).unwrap(),
            vec![0, 2]
        );
    }

    #[test]
    fn parallel_scoring_matches_sequential() {
        let n = 300;
        let cols: Vec<Vec<u8>> = (0..200)
            .map(|f| (0..n).map(|r| ((r * 7 + f * 13) % 5 < 2) as u8).collect())
            .collect();
        let labels: Vec<u32> = (0..n).map(|r| (r % 3 == 0) as u32).collect();
        let refs: Vec<&[u8]> = cols.iter().map(Vec::as_slice).collect();
        let d = ds(&refs, &labels);
        let a = score_features(&d.view(), Impurity::Entropy, false);
        let b = score_features(&d.view(), Impurity::Entropy, true);
        assert_eq!(a, b);
    }

    fn dataset_strategy() -> impl Strategy<Value = (Vec<Vec<bool>>, Vec<u32>)> {
        (1usize..40, 1usize..7, 2u32..4).prop_flat_map(|(n, d, c)| {
            (
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), d), n),
                proptest::collection::vec(0..c, n),
            )
        })
    }

    proptest! {
        #[test]
        fn scores_are_bounded((rows, labels) in dataset_strategy()) {
            let binary: Vec<u32> = labels.iter().map(|l| l % 2).collect();
            let d = BinaryDataset::from_rows(&rows, binary).unwrap();
            for kind in Impurity::ALL {
                for f in 0..d.d() {
                    let s = feature_score(&d.view(), f, kind).unwrap();
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
                }
            }
        }

        #[test]
        fn top_k_is_prefix_consistent((rows, labels) in dataset_strategy(), k in 1usize..6) {
            let d = BinaryDataset::from_rows(&rows, labels).unwrap();
            for kind in Impurity::ALL {
                let a = top_k_features(&d.view(), k, kind).unwrap();
                let b = top_k_features(&d.view(), k + 1, kind).unwrap();
                prop_assert_eq!(a.len(), k.min(d.d()));
                prop_assert_eq!(&b[..a.len()], &a[..]);
            }
        }

        #[test]
        fn scores_ignore_row_order((rows, labels) in dataset_strategy(), shift in 0usize..40) {
            let d = BinaryDataset::from_rows(&rows, labels.clone()).unwrap();
            let n = rows.len();
            let order: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let p = d.select_rows(&order).unwrap();
            for kind in Impurity::ALL {
                for f in 0..d.d() {
                    prop_assert_eq!(
                        feature_score(&d.view(), f, kind).unwrap(),
                        feature_score(&p.view(), f, kind).unwrap()
                    );
                }
            }
        }

        /// With balanced marginals, larger |Cov(x, y)| never scores lower.
        #[test]
        fn balanced_features_rank_by_covariance(
            half in 1usize..20,
            seeds in proptest::collection::vec(any::<u64>(), 2..5),
            labels_seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, Rng, SeedableRng};
            let n = 2 * half;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(labels_seed);
            let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let columns: Vec<Vec<bool>> = seeds.iter().map(|&s| {
                let mut col: Vec<bool> = (0..n).map(|i| i < half).collect();
                col.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(s));
                col
            }).collect();
            let rows: Vec<Vec<bool>> = (0..n).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
            let d = BinaryDataset::from_rows(&rows, labels.clone()).unwrap();
            let ybar = labels.iter().sum::<u32>() as f64 / n as f64;
            let cov = |f: usize| {
                let exy = (0..n).filter(|&r| columns[f][r] && labels[r] == 1).count() as f64 / n as f64;
                (exy - 0.5 * ybar).abs()
            };
            for kind in Impurity::ALL {
                for i in 0..columns.len() {
                    for j in 0..columns.len() {
                        if cov(i) > cov(j) + 1e-12 {
                            let si = feature_score(&d.view(), i, kind).unwrap();
                            let sj = feature_score(&d.view(), j, kind).unwrap();
                            prop_assert!(si + SCORE_TOLERANCE >= sj, "{kind}: {si} < {sj}");
                        }
                    }
                }
            }
        }
    }
}

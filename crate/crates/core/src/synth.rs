//! Synthetic label distributions over the Boolean cube and exact evaluators.
//!
//! Inputs are split into a main block `x1` (the first `h` coordinates) and a
//! noise block `x2` (the remaining `K - 1`). With probability `1 - eps` the
//! label is a function of `x1`; otherwise it comes from `x2`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::BitSet;
use crate::dataset::BinaryDataset;
use crate::error::{Error, Result};
use crate::par;
use crate::tree::DecisionTree;

/// Largest dimension [`exact_accuracy`] will enumerate.
pub const ENUMERATION_MAX_D: usize = 24;
/// Largest dimension [`check_monotone`] enumerates jointly.
pub const MONOTONE_JOINT_MAX_D: usize = 24;

pub fn parity(x: &[bool]) -> bool {
    x.iter().filter(|&&b| b).count() % 2 == 1
}

/// 1 when at least half the coordinates are 1 (ties count).
pub fn majority(x: &[bool]) -> bool {
    2 * x.iter().filter(|&&b| b).count() >= x.len()
}

/// Block width `w` and block count `t` for Tribes on `l` inputs.
pub fn tribes_width(l: usize) -> (usize, usize) {
    assert!(l >= 1, "tribes needs at least one input");
    let target = -std::f64::consts::LN_2;
    let w = (1..=l)
        .filter(|&w| (l as f64 / w as f64) * (1.0 - (-(w as f64)).exp2()).ln() <= target)
        .max()
        .unwrap_or(1);
    (w, l / w)
}

/// OR over `t` consecutive width-`w` blocks of the AND of each block.
pub fn tribes(x: &[bool]) -> bool {
    let (w, t) = tribes_width(x.len());
    x.chunks_exact(w).take(t).any(|b| b.iter().all(|&v| v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    #[serde(alias = "parity-mix")]
    ParityMix,
    #[serde(alias = "monotone-mix")]
    MonotoneMix,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::ParityMix => "parity_mix",
            SynthKind::MonotoneMix => "monotone_mix",
        })
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parity_mix" | "parity-mix" => Ok(SynthKind::ParityMix),
            "monotone_mix" | "monotone-mix" => Ok(SynthKind::MonotoneMix),
            _ => Err(Error::Config(format!("unknown synthetic kind `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub h: usize,
    #[serde(rename = "K")]
    pub big_k: usize,
    pub eps: f64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, h: usize, big_k: usize, eps: f64) -> Result<Self> {
        if h == 0 {
            return Err(Error::Config("h must be positive".into()));
        }
        if big_k < 2 {
            return Err(Error::Config("K must be at least 2".into()));
        }
        // eps = 0 is admitted for the noiseless sanity case
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::Config(format!("eps = {eps} outside [0, 1)")));
        }
        Ok(Self {
            kind,
            h,
            big_k,
            eps,
        })
    }

    pub fn parity_mix(h: usize, big_k: usize, eps: f64) -> Result<Self> {
        Self::new(SynthKind::ParityMix, h, big_k, eps)
    }

    pub fn monotone_mix(h: usize, big_k: usize, eps: f64) -> Result<Self> {
        Self::new(SynthKind::MonotoneMix, h, big_k, eps)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.kind, self.h, self.big_k, self.eps).map(|_| ())
    }

    pub fn d(&self) -> usize {
        self.h + self.big_k - 1
    }

    pub fn noise_len(&self) -> usize {
        self.big_k - 1
    }

    pub fn id(&self) -> String {
        format!("{}-h{}-K{}-eps{}", self.kind, self.h, self.big_k, self.eps)
    }

    pub fn labeler(&self) -> Labeler {
        Labeler { spec: *self }
    }
}

/// `q(x) = Pr[y = 1 | x]` for a [`SynthSpec`].
#[derive(Clone, Copy, Debug)]
pub struct Labeler {
    spec: SynthSpec,
}

impl Labeler {
    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    /// The noiseless label, a function of `x1` only.
    pub fn main(&self, x1: &[bool]) -> bool {
        match self.spec.kind {
            SynthKind::ParityMix => parity(x1),
            SynthKind::MonotoneMix => tribes(x1),
        }
    }

    /// Noise-branch mass as `numerator / noise_denominator()`.
    pub fn noise_numerator(&self, x2: &[bool]) -> u64 {
        match self.spec.kind {
            SynthKind::ParityMix => x2.iter().filter(|&&b| b).count() as u64,
            SynthKind::MonotoneMix => u64::from(majority(x2)),
        }
    }

    pub fn noise_denominator(&self) -> u64 {
        match self.spec.kind {
            SynthKind::ParityMix => self.spec.noise_len() as u64,
            SynthKind::MonotoneMix => 1,
        }
    }

    pub fn q(&self, x: &[bool]) -> f64 {
        assert_eq!(x.len(), self.spec.d(), "input length must equal d");
        let (x1, x2) = x.split_at(self.spec.h);
        let main = if self.main(x1) { 1.0 } else { 0.0 };
        let noise = self.noise_numerator(x2) as f64 / self.noise_denominator() as f64;
        (1.0 - self.spec.eps) * main + self.spec.eps * noise
    }
}

/// `n` rows with uniform inputs and Bernoulli(q(x)) labels.
pub fn sample(spec: &SynthSpec, n: usize, seed: u64) -> Result<BinaryDataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::NoRows);
    }
    let d = spec.d();
    let labeler = spec.labeler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![BitSet::new(n); d];
    let mut labels = Vec::with_capacity(n);
    let mut x = vec![false; d];
    for row in 0..n {
        for (f, bit) in x.iter_mut().enumerate() {
            *bit = rng.gen::<bool>();
            if *bit {
                columns[f].set(row, true);
            }
        }
        labels.push(u32::from(rng.gen_bool(labeler.q(&x))));
    }
    let names = (0..d)
        .map(|f| {
            if f < spec.h {
                format!("x1_{}", f + 1)
            } else {
                format!("x2_{}", f - spec.h + 1)
            }
        })
        .collect();
    BinaryDataset::from_columns(
        columns,
        labels,
        Some(names),
        Some(vec!["0".into(), "1".into()]),
    )
}

/// Integer tallies behind an exact accuracy value.
///
/// `main` counts inputs where the tree agrees with the noiseless label;
/// `noise` sums, over inputs, the noise-branch agreement scaled by `den`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Agreement {
    pub main: u128,
    pub noise: u128,
    pub den: u128,
    pub d: usize,
}

impl Agreement {
    pub fn accuracy(&self, eps: f64) -> f64 {
        let cube = (self.d as f64).exp2();
        let a = self.main as f64 / cube;
        let b = self.noise as f64 / (self.den as f64 * cube);
        a + eps * (b - a)
    }
}

fn check_tree(tree: &DecisionTree, d: usize) -> Result<()> {
    if let Some(f) = tree.max_feature() {
        if f >= d {
            return Err(Error::Contract(format!(
                "tree splits on feature {f} but the distribution has d = {d}"
            )));
        }
    }
    fn labels_ok(t: &DecisionTree) -> bool {
        match t {
            DecisionTree::Leaf(c) => *c <= 1,
            DecisionTree::Split { left, right, .. } => labels_ok(left) && labels_ok(right),
        }
    }
    if !labels_ok(tree) {
        return Err(Error::Contract("synthetic labels are binary".into()));
    }
    Ok(())
}

fn predict_bits(tree: &DecisionTree, x: u64) -> bool {
    let mut node = tree;
    loop {
        match node {
            DecisionTree::Leaf(c) => return *c == 1,
            DecisionTree::Split {
                feature,
                left,
                right,
            } => node = if x >> feature & 1 == 1 { right } else { left },
        }
    }
}

fn bits(x: u64, from: usize, len: usize) -> Vec<bool> {
    (from..from + len).map(|i| x >> i & 1 == 1).collect()
}

/// Tallies by visiting all `2^d` inputs.
pub fn enumerate_agreement(tree: &DecisionTree, spec: &SynthSpec) -> Result<Agreement> {
    spec.validate()?;
    let d = spec.d();
    if d > ENUMERATION_MAX_D {
        return Err(Error::SizeGuard(format!(
            "enumeration needs d <= {ENUMERATION_MAX_D}, got {d}"
        )));
    }
    check_tree(tree, d)?;
    let labeler = spec.labeler();
    let den = labeler.noise_denominator();
    let chunk_bits = d.min(12);
    let chunks = 1usize << (d - chunk_bits);
    let parts = par::map_range(chunks, true, |c| {
        let (mut main, mut noise) = (0u64, 0u64);
        for low in 0..1u64 << chunk_bits {
            let x = (c as u64) << chunk_bits | low;
            let t = predict_bits(tree, x);
            let m = labeler.main(&bits(x, 0, spec.h));
            let nn = labeler.noise_numerator(&bits(x, spec.h, spec.noise_len()));
            main += u64::from(t == m);
            noise += if t { nn } else { den - nn };
        }
        (main, noise)
    });
    let (main, noise) = parts.into_iter().fold((0u128, 0u128), |(a, b), (m, n)| {
        (a + m as u128, b + n as u128)
    });
    Ok(Agreement {
        main,
        noise,
        den: den as u128,
        d,
    })
}

/// Exact `Pr[T(x) = y]` under `spec` by full enumeration (`d <= 24`).
pub fn exact_accuracy(tree: &DecisionTree, spec: &SynthSpec) -> Result<f64> {
    Ok(enumerate_agreement(tree, spec)?.accuracy(spec.eps))
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Tallies by walking the leaves: each leaf covers a subcube, and since `q`
/// factors over the two blocks the subcube sums factor too. Works for any `d`
/// up to 64 provided `h` stays small enough to enumerate `x1`.
pub fn subcube_agreement(tree: &DecisionTree, spec: &SynthSpec) -> Result<Agreement> {
    spec.validate()?;
    let d = spec.d();
    if d > 64 || spec.h > ENUMERATION_MAX_D {
        return Err(Error::SizeGuard(format!(
            "subcube evaluation needs d <= 64, got {d}"
        )));
    }
    check_tree(tree, d)?;
    let labeler = spec.labeler();
    let den = labeler.noise_denominator() as u128;
    let mut acc = Agreement {
        den,
        d,
        ..Agreement::default()
    };
    let mut fixed: Vec<Option<bool>> = vec![None; d];
    walk_leaves(tree, &mut fixed, &mut |label, fixed| {
        let (f1, f2) = fixed.split_at(spec.h);
        let free1: Vec<usize> = (0..spec.h).filter(|&i| f1[i].is_none()).collect();
        let mut main_ones = 0u128;
        let mut x1: Vec<bool> = f1.iter().map(|b| b.unwrap_or(false)).collect();
        for m in 0..1u64 << free1.len() {
            for (j, &i) in free1.iter().enumerate() {
                x1[i] = m >> j & 1 == 1;
            }
            main_ones += u128::from(labeler.main(&x1));
        }
        let free2 = f2.iter().filter(|b| b.is_none()).count() as u64;
        let set2 = f2.iter().filter(|b| **b == Some(true)).count() as u64;
        let size1 = 1u128 << free1.len();
        let size2 = 1u128 << free2;
        // sum of noise numerators over the x2 subcube
        let noise_sum: u128 = match spec.kind {
            SynthKind::ParityMix => size2 * set2 as u128 + free2 as u128 * (size2 / 2),
            SynthKind::MonotoneMix => {
                let len = spec.noise_len() as u64;
                (0..=free2)
                    .filter(|&j| 2 * (set2 + j) >= len)
                    .map(|j| binomial(free2, j))
                    .sum()
            }
        };
        if label {
            acc.main += main_ones * size2;
            acc.noise += size1 * noise_sum;
        } else {
            acc.main += (size1 - main_ones) * size2;
            acc.noise += size1 * (den * size2 - noise_sum);
        }
    });
    Ok(acc)
}

fn walk_leaves(
    tree: &DecisionTree,
    fixed: &mut Vec<Option<bool>>,
    visit: &mut impl FnMut(bool, &[Option<bool>]),
) {
    match tree {
        DecisionTree::Leaf(c) => visit(*c == 1, fixed),
        DecisionTree::Split {
            feature,
            left,
            right,
        } => {
            let prev = fixed[*feature];
            for (value, child) in [(false, left), (true, right)] {
                if prev.is_some_and(|p| p != value) {
                    continue; // unreachable branch
                }
                fixed[*feature] = Some(value);
                walk_leaves(child, fixed, visit);
            }
            fixed[*feature] = prev;
        }
    }
}

/// Exact accuracy for any dimension via [`subcube_agreement`].
pub fn subcube_accuracy(tree: &DecisionTree, spec: &SynthSpec) -> Result<f64> {
    Ok(subcube_agreement(tree, spec)?.accuracy(spec.eps))
}

/// First pair `(x, x')` with `x ⪯ x'` differing in one bit and `q(x) > q(x')`.
///
/// Enumerates the whole cube for `d <= 24`. Beyond that it checks each block
/// exhaustively, which suffices because `q` is a nonnegative combination of a
/// function of `x1` and a function of `x2`.
pub fn check_monotone(spec: &SynthSpec) -> Result<Option<(Vec<bool>, Vec<bool>)>> {
    spec.validate()?;
    let labeler = spec.labeler();
    let d = spec.d();
    if d <= MONOTONE_JOINT_MAX_D {
        let bad = par::map_range(1usize << d, true, |x| {
            let x = x as u64;
            let qx = labeler.q(&bits(x, 0, d));
            (0..d)
                .filter(|&i| x >> i & 1 == 0)
                .map(|i| x | 1 << i)
                .find(|&y| labeler.q(&bits(y, 0, d)) < qx)
                .map(|y| (bits(x, 0, d), bits(y, 0, d)))
        });
        return Ok(bad.into_iter().flatten().next());
    }
    let block = |len: usize, f: &(dyn Fn(&[bool]) -> u64 + Sync)| {
        (0..1u64 << len).find_map(|x| {
            let fx = f(&bits(x, 0, len));
            (0..len)
                .filter(|&i| x >> i & 1 == 0)
                .map(|i| x | 1 << i)
                .find(|&y| f(&bits(y, 0, len)) < fx)
                .map(|y| (x, y))
        })
    };
    let pad = |x1: u64, x2: u64| {
        let mut v = bits(x1, 0, spec.h);
        v.extend(bits(x2, 0, spec.noise_len()));
        v
    };
    if let Some((x, y)) = block(spec.h, &|x| u64::from(labeler.main(x))) {
        return Ok(Some((pad(x, 0), pad(y, 0))));
    }
    if let Some((x, y)) = block(spec.noise_len(), &|x| labeler.noise_numerator(x)) {
        return Ok(Some((pad(0, x), pad(0, y))));
    }
    Ok(None)
}

/// Tree computing the noiseless label on `x1` exactly (complete over `x1`).
pub fn main_tree(spec: &SynthSpec) -> DecisionTree {
    fn build(labeler: &Labeler, x1: &mut Vec<bool>, i: usize, h: usize) -> DecisionTree {
        if i == h {
            return DecisionTree::Leaf(u32::from(labeler.main(x1)));
        }
        x1[i] = false;
        let l = build(labeler, x1, i + 1, h);
        x1[i] = true;
        let r = build(labeler, x1, i + 1, h);
        if l == r {
            l
        } else {
            DecisionTree::split(i, l, r)
        }
    }
    build(&spec.labeler(), &mut vec![false; spec.h], 0, spec.h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(bits: &[u8]) -> Vec<bool> {
        bits.iter().map(|&b| b == 1).collect()
    }

    #[test]
    fn boolean_functions() {
        assert!(!parity(&v(&[1, 0, 1])));
        assert!(!parity(&v(&[0, 0, 0])));
        assert!(parity(&v(&[1])));
        assert!(majority(&v(&[1, 1, 0])));
        assert!(!majority(&v(&[0, 0, 1])));
        assert!(majority(&v(&[1, 0])));
        assert_eq!(tribes_width(4), (1, 4));
        assert_eq!(tribes_width(8), (2, 4));
        assert_eq!(tribes_width(1), (1, 1));
        assert!(!tribes(&v(&[0, 0, 0, 0])));
        assert!(tribes(&v(&[1, 1, 0, 0, 0, 0, 0, 0])));
        assert!(!tribes(&v(&[1, 0, 1, 0, 1, 0, 1, 0])));
    }

    #[test]
    fn tribes_width_matches_power_form() {
        // independent check with the power written out
        for l in 1..=64usize {
            let (w, t) = tribes_width(l);
            let holds = |w: usize| (1.0 - 0.5f64.powi(w as i32)).powf(l as f64 / w as f64) <= 0.5;
            assert!(holds(w), "l = {l}");
            assert!(((w + 1)..=l).all(|u| !holds(u)), "l = {l}");
            assert_eq!(t, l / w);
        }
    }

    #[test]
    fn labeler_values() {
        let s = SynthSpec::parity_mix(1, 3, 0.1).unwrap();
        let q = s.labeler();
        assert_eq!(q.q(&v(&[1, 1, 1])), 1.0);
        assert_eq!(q.q(&v(&[1, 0, 0])), 1.0 - 0.1);
        assert_eq!(q.q(&v(&[0, 1, 0])), 0.1 * 0.5);
        assert_eq!(s.d(), 3);
    }

    #[test]
    fn spec_validation() {
        assert!(SynthSpec::parity_mix(0, 3, 0.1).is_err());
        assert!(SynthSpec::parity_mix(2, 1, 0.1).is_err());
        assert!(SynthSpec::parity_mix(2, 3, 1.0).is_err());
        assert!(SynthSpec::parity_mix(2, 3, -0.1).is_err());
        let s: SynthSpec =
            serde_json::from_str(r#"{"kind":"monotone_mix","h":4,"K":3,"eps":0.2}"#).unwrap();
        assert_eq!(s, SynthSpec::monotone_mix(4, 3, 0.2).unwrap());
    }

    #[test]
    fn noiseless_samples_follow_the_main_function() {
        for spec in [
            SynthSpec::parity_mix(3, 3, 0.0).unwrap(),
            SynthSpec::monotone_mix(4, 3, 0.0).unwrap(),
        ] {
            let ds = sample(&spec, 500, 7).unwrap();
            let q = spec.labeler();
            for r in 0..ds.n() {
                let x = ds.row(r);
                assert_eq!(ds.label(r) == 1, q.main(&x[..spec.h]));
            }
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let s = SynthSpec::parity_mix(2, 3, 0.2).unwrap();
        let a = sample(&s, 300, 5).unwrap();
        assert_eq!(a, sample(&s, 300, 5).unwrap());
        assert_ne!(a, sample(&s, 300, 6).unwrap());
    }

    #[test]
    fn exact_values() {
        for (h, k, eps) in [(3, 4, 0.1), (2, 2, 0.1), (4, 5, 0.3), (1, 2, 0.25)] {
            let s = SynthSpec::parity_mix(h, k, eps).unwrap();
            assert_eq!(exact_accuracy(&DecisionTree::Leaf(0), &s).unwrap(), 0.5);
            assert_eq!(exact_accuracy(&DecisionTree::Leaf(1), &s).unwrap(), 0.5);
            assert_eq!(exact_accuracy(&main_tree(&s), &s).unwrap(), 1.0 - eps / 2.0);
        }
    }

    #[test]
    fn monotone_main_tree_value() {
        // independent: average of q-agreement computed in floating point
        let s = SynthSpec::monotone_mix(4, 4, 0.2).unwrap();
        let q = s.labeler();
        let t = main_tree(&s);
        let d = s.d();
        let mut total = 0.0;
        let mut agree = 0.0;
        for x in 0..1u64 << d {
            let x = bits(x, 0, d);
            total += if t.predict(&x).unwrap() == 1 {
                q.q(&x)
            } else {
                1.0 - q.q(&x)
            };
            agree += f64::from(q.main(&x[..4]) == majority(&x[4..]));
        }
        let want = (1.0 - 0.2) + 0.2 * agree / (1u64 << d) as f64;
        let got = exact_accuracy(&t, &s).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - total / (1u64 << d) as f64).abs() < 1e-12);
    }

    #[test]
    fn evaluators_agree() {
        let trees = [
            DecisionTree::Leaf(0),
            DecisionTree::split(0, DecisionTree::Leaf(0), DecisionTree::Leaf(1)),
            DecisionTree::split(
                4,
                DecisionTree::split(0, DecisionTree::Leaf(1), DecisionTree::Leaf(0)),
                DecisionTree::split(
                    5,
                    DecisionTree::split(4, DecisionTree::Leaf(0), DecisionTree::Leaf(1)),
                    DecisionTree::Leaf(0),
                ),
            ),
        ];
        for spec in [
            SynthSpec::parity_mix(3, 4, 0.1).unwrap(),
            SynthSpec::monotone_mix(4, 4, 0.1).unwrap(),
            SynthSpec::monotone_mix(3, 5, 0.3).unwrap(),
        ] {
            for t in trees.iter().chain([&main_tree(&spec)]) {
                assert_eq!(
                    enumerate_agreement(t, &spec).unwrap(),
                    subcube_agreement(t, &spec).unwrap()
                );
            }
        }
    }

    #[test]
    fn enumeration_guard() {
        let s = SynthSpec::parity_mix(5, 21, 0.1).unwrap();
        assert!(matches!(
            exact_accuracy(&DecisionTree::Leaf(0), &s),
            Err(Error::SizeGuard(_))
        ));
        assert_eq!(subcube_accuracy(&DecisionTree::Leaf(0), &s).unwrap(), 0.5);
    }

    #[test]
    fn monotone_mix_is_monotone() {
        for (h, k) in [(4, 4), (6, 9), (8, 9)] {
            let s = SynthSpec::monotone_mix(h, k, 0.1).unwrap();
            assert_eq!(check_monotone(&s).unwrap(), None);
        }
        let s = SynthSpec::parity_mix(2, 3, 0.1).unwrap();
        assert!(check_monotone(&s).unwrap().is_some());
    }

    #[test]
    fn tribes_nearly_balanced() {
        let bias = |l: usize| {
            let ones = (0..1u64 << l).filter(|&x| tribes(&bits(x, 0, l))).count();
            (ones as f64 / (1u64 << l) as f64 - 0.5).abs()
        };
        let (b4, b8, b16) = (bias(4), bias(8), bias(16));
        assert!(b8 < b4 && b16 < b8, "{b4} {b8} {b16}");
    }

    #[test]
    fn tribes_correlations_are_small() {
        fn cov(f: impl Fn(&[bool]) -> bool, l: usize, i: usize) -> f64 {
            let n = (1u64 << l) as f64;
            let (mut fy, mut fxy) = (0.0, 0.0);
            for x in 0..1u64 << l {
                let xs = bits(x, 0, l);
                let y = f64::from(f(&xs));
                fy += y;
                fxy += y * f64::from(xs[i]);
            }
            fxy / n - 0.5 * fy / n
        }
        let l = 16;
        let (w, t) = tribes_width(l);
        let covs: Vec<f64> = (0..w * t).map(|i| cov(tribes, l, i)).collect();
        assert!(covs.iter().all(|c| (c - covs[0]).abs() < 1e-12));
        assert!(cov(majority, l, 0) > covs[0]);
    }
}

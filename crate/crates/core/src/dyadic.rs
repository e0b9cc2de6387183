//! Dyadic intervals, their neighbourhoods, and sparse families.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused whenever std is linked: its inherent float methods win
use num_traits::Float as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};

/// Half-open real interval `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.max(other.lo), hi: self.hi.min(other.hi) }
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// `[m 2^-k, (m+1) 2^-k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicInterval {
    pub level: i32,
    pub index: i64,
}

fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

impl DyadicInterval {
    pub const UNIT: DyadicInterval = DyadicInterval { level: 0, index: 0 };

    pub fn new(level: i32, index: i64) -> Self {
        Self { level, index }
    }

    /// `l(Q) = |Q|`.
    pub fn length(&self) -> f64 {
        pow2(-self.level)
    }

    pub fn lo(&self) -> f64 {
        self.index as f64 * self.length()
    }

    pub fn hi(&self) -> f64 {
        (self.index + 1) as f64 * self.length()
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.lo(), self.hi())
    }

    pub fn parent(&self) -> Self {
        Self { level: self.level - 1, index: self.index.div_euclid(2) }
    }

    pub fn children(&self) -> [Self; 2] {
        let l = self.level + 1;
        [Self { level: l, index: 2 * self.index }, Self { level: l, index: 2 * self.index + 1 }]
    }

    /// Ancestor (or self) at a coarser level.
    pub fn ancestor(&self, level: i32) -> Self {
        debug_assert!(level <= self.level);
        let shift = (self.level - level) as u32;
        Self { level, index: self.index >> shift }
    }

    /// `other` is contained in (or equal to) `self`.
    pub fn contains(&self, other: &Self) -> bool {
        other.level >= self.level && other.ancestor(self.level) == *self
    }
}

/// The λ-neighbourhood `[a - (λ-1)l, b + (λ-1)l)`.
pub fn dilate(q: &DyadicInterval, lambda: f64) -> Result<Interval> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return param("dilation factor must be >= 1");
    }
    let pad = (lambda - 1.0) * q.length();
    Ok(Interval::new(q.lo() - pad, q.hi() + pad))
}

/// `S_0(Q) = 2Q` and `S_k(Q) = 2^{k+1}Q \ 2^k Q` (two pieces, left first).
pub fn annulus(q: &DyadicInterval, k: i32) -> Result<Vec<Interval>> {
    if k < 0 {
        return param("annulus index must be >= 0");
    }
    let outer = dilate(q, pow2(k + 1))?;
    if k == 0 {
        return Ok(alloc::vec![outer]);
    }
    let inner = dilate(q, pow2(k))?;
    Ok(alloc::vec![Interval::new(outer.lo, inner.lo), Interval::new(inner.hi, outer.hi)])
}

/// Disjoint sets `F_Q ⊆ Q` with `|F_Q| >= ε|Q|`, as unions of subintervals.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCertificate {
    pub epsilon: f64,
    /// Sorted by `(level, index)`.
    pub sets: Vec<(DyadicInterval, Vec<Interval>)>,
}

// Relative tolerance for comparing free and required measure.
const MEASURE_TOL: f64 = 1e-12;

fn normalize_family(family: &[DyadicInterval]) -> Vec<DyadicInterval> {
    let mut v = family.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Merge sorted, possibly touching intervals.
fn merge(mut parts: Vec<Interval>) -> Vec<Interval> {
    parts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(parts.len());
    for p in parts {
        match out.last_mut() {
            Some(last) if p.lo <= last.hi => last.hi = last.hi.max(p.hi),
            _ => out.push(p),
        }
    }
    out
}

/// Exact sparseness decision for a dyadic family.
///
/// Deepest members first, each `Q` claims exactly `ε|Q|` of the part of `Q`
/// not claimed by members below it, taken from the right. Claiming the minimum
/// leaves the most room for ancestors, so the greedy pass fails only when no
/// certificate exists.
pub fn verify_sparse(family: &[DyadicInterval], epsilon: f64) -> Result<SparseCertificate> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return param("sparseness must lie in (0, 1]");
    }
    let members = normalize_family(family);
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| members[b].level.cmp(&members[a].level).then(members[a].index.cmp(&members[b].index)));

    let mut claimed: Vec<Vec<Interval>> = alloc::vec![Vec::new(); members.len()];
    let mut done: Vec<usize> = Vec::with_capacity(members.len());
    for &qi in &order {
        let q = members[qi];
        let qiv = q.interval();
        let mut taken: Vec<Interval> = Vec::new();
        for &ri in &done {
            if q.contains(&members[ri]) {
                taken.extend_from_slice(&claimed[ri]);
            }
        }
        let taken = merge(taken);
        let used: f64 = taken.iter().map(|t| t.len()).sum();
        let available = qiv.len() - used;
        let needed = epsilon * qiv.len();
        if available < needed * (1.0 - MEASURE_TOL) {
            return Err(Error::NotSparse { level: q.level, index: q.index, available, needed });
        }
        // free gaps of Q, right to left
        let mut gaps = Vec::new();
        let mut cursor = qiv.hi;
        for t in taken.iter().rev() {
            if t.hi < cursor {
                gaps.push(Interval::new(t.hi, cursor));
            }
            cursor = cursor.min(t.lo);
        }
        if qiv.lo < cursor {
            gaps.push(Interval::new(qiv.lo, cursor));
        }
        let mut remaining = needed;
        let mut mine = Vec::new();
        for g in gaps {
            if remaining <= 0.0 {
                break;
            }
            let piece = if g.len() <= remaining { g } else { Interval::new(g.hi - remaining, g.hi) };
            remaining -= piece.len();
            mine.push(piece);
        }
        mine.reverse();
        claimed[qi] = mine;
        done.push(qi);
    }
    let sets = members.into_iter().zip(claimed).collect();
    Ok(SparseCertificate { epsilon, sets })
}

/// A dyadic family together with the sparseness it was verified at.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCollection {
    intervals: Vec<DyadicInterval>,
    epsilon: f64,
}

impl SparseCollection {
    /// Verifies the family before accepting it.
    pub fn new(family: &[DyadicInterval], epsilon: f64) -> Result<Self> {
        verify_sparse(family, epsilon)?;
        Ok(Self { intervals: normalize_family(family), epsilon })
    }

    /// Sorted by `(level, index)`.
    pub fn intervals(&self) -> &[DyadicInterval] {
        &self.intervals
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn certificate(&self) -> SparseCertificate {
        verify_sparse(&self.intervals, self.epsilon).expect("verified on construction")
    }

    /// Members of level at most `depth`.
    pub fn truncate(&self, depth: i32) -> Self {
        let intervals = self.intervals.iter().copied().filter(|q| q.level <= depth).collect();
        Self { intervals, epsilon: self.epsilon }
    }
}

/// Random ε-sparse family of subintervals of `[0,1)` down to `depth`.
///
/// Walks the tree level by level drawing one fair coin per node in index
/// order, and admits a node when the coin says so and the packing load
/// `sum_{R ⊆ A} |R| <= |A|/ε` still holds for every admitted ancestor `A`.
/// The root is always admitted. Draws do not depend on `depth`, so the family
/// for a smaller depth is the truncation of the one for a larger depth.
pub fn generate_sparse(depth: i32, epsilon: f64, seed: u64) -> Result<SparseCollection> {
    if !(0..=24).contains(&depth) {
        return param("depth must lie in 0..=24");
    }
    if depth == 0 {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return param("sparseness must lie in (0, 1]");
        }
    } else if !(epsilon > 0.0 && epsilon < 1.0) {
        return param("sparseness must lie in (0, 1) when more than one level is requested");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // admitted member -> total length of admitted members inside it
    let mut load: BTreeMap<DyadicInterval, f64> = BTreeMap::new();
    load.insert(DyadicInterval::UNIT, 1.0);
    for level in 1..=depth {
        for index in 0..(1i64 << level) {
            let coin: bool = rng.gen();
            if !coin {
                continue;
            }
            let q = DyadicInterval::new(level, index);
            let len = q.length();
            let ok = (0..level).all(|l| {
                let a = q.ancestor(l);
                load.get(&a).is_none_or(|&x| x + len <= a.length() / epsilon * (1.0 - MEASURE_TOL))
            });
            if ok {
                for l in 0..level {
                    if let Some(x) = load.get_mut(&q.ancestor(l)) {
                        *x += len;
                    }
                }
                load.insert(q, len);
            }
        }
    }
    let family: Vec<DyadicInterval> = load.keys().copied().collect();
    SparseCollection::new(&family, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dilation_examples() {
        assert_eq!(dilate(&DyadicInterval::UNIT, 1.0).unwrap(), Interval::new(0.0, 1.0));
        assert_eq!(dilate(&DyadicInterval::UNIT, 3.0).unwrap(), Interval::new(-2.0, 3.0));
        assert_eq!(dilate(&DyadicInterval::new(2, 2), 2.0).unwrap(), Interval::new(0.25, 1.0));
        assert!(dilate(&DyadicInterval::UNIT, 0.5).is_err());
    }

    #[test]
    fn annulus_examples() {
        assert_eq!(annulus(&DyadicInterval::UNIT, 0).unwrap(), alloc::vec![Interval::new(-1.0, 2.0)]);
        assert_eq!(
            annulus(&DyadicInterval::UNIT, 1).unwrap(),
            alloc::vec![Interval::new(-3.0, -1.0), Interval::new(2.0, 4.0)]
        );
        assert!(annulus(&DyadicInterval::UNIT, -1).is_err());
        // telescoping: S_0..S_K tile 2^{K+1} Q
        let q = DyadicInterval::new(3, 5);
        let k_max = 5;
        let mut pieces: Vec<Interval> = (0..=k_max).flat_map(|k| annulus(&q, k).unwrap()).collect();
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let whole = dilate(&q, 2f64.powi(k_max + 1)).unwrap();
        assert_eq!(pieces[0].lo, whole.lo);
        assert_eq!(pieces.last().unwrap().hi, whole.hi);
        for w in pieces.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
    }

    #[test]
    fn partition_is_fully_sparse() {
        let fam: Vec<_> = (0..8).map(|m| DyadicInterval::new(3, m)).collect();
        let cert = verify_sparse(&fam, 1.0).unwrap();
        for (q, f) in &cert.sets {
            assert_eq!(f, &alloc::vec![q.interval()]);
        }
    }

    #[test]
    fn chain_gets_right_halves() {
        let n = 6;
        let fam: Vec<_> = (0..=n).map(|k| DyadicInterval::new(k, 0)).collect();
        let cert = verify_sparse(&fam, 0.5).unwrap();
        for (q, f) in &cert.sets {
            assert_eq!(f, &alloc::vec![Interval::new(q.lo() + q.length() / 2.0, q.hi())]);
        }
    }

    #[test]
    fn full_tree_fails_above_counting_bound() {
        let n = 4;
        let fam: Vec<_> = (0..=n).flat_map(|k| (0..(1i64 << k)).map(move |m| DyadicInterval::new(k, m))).collect();
        let eps = 1.0 / (n as f64 + 1.0);
        assert!(verify_sparse(&fam, eps).is_ok());
        match verify_sparse(&fam, eps * 1.01) {
            Err(Error::NotSparse { level, available, needed, .. }) => {
                assert_eq!(level, 0);
                assert!(available < needed);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn generated_examples() {
        let s = generate_sparse(0, 0.5, 1).unwrap();
        assert_eq!(s.intervals(), &[DyadicInterval::UNIT]);
        let a = generate_sparse(8, 0.5, 42).unwrap();
        let b = generate_sparse(8, 0.5, 42).unwrap();
        assert_eq!(a, b);
        assert!(verify_sparse(a.intervals(), 0.5).is_ok());
        let c = generate_sparse(4, 0.9, 3).unwrap();
        assert!(verify_sparse(c.intervals(), 0.9).is_ok());
        assert!(generate_sparse(3, 1.0, 0).is_err());
        assert!(generate_sparse(3, 0.0, 0).is_err());
    }

    #[test]
    fn deeper_generation_extends_shallower() {
        for seed in 0..20 {
            let deep = generate_sparse(10, 0.5, seed).unwrap();
            let shallow = generate_sparse(8, 0.5, seed).unwrap();
            assert_eq!(deep.truncate(8), shallow);
        }
    }

    #[test]
    fn generation_never_fails_verification() {
        for seed in 0..1000 {
            let eps = [0.25, 0.5, 0.75][seed as usize % 3];
            let s = generate_sparse(6, eps, seed).unwrap();
            verify_sparse(s.intervals(), eps).unwrap();
        }
    }

    fn certificate_is_valid(cert: &SparseCertificate) {
        let mut all: Vec<Interval> = Vec::new();
        for (q, f) in &cert.sets {
            let m: f64 = f.iter().map(|i| i.len()).sum();
            assert!(m >= cert.epsilon * q.length() * (1.0 - 1e-12));
            for i in f {
                assert!(q.interval().contains_interval(i));
            }
            all.extend_from_slice(f);
        }
        all.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for w in all.windows(2) {
            assert!(w[0].hi <= w[1].lo, "overlap {:?}", w);
        }
    }

    proptest! {
        #[test]
        fn dilate_contains_and_scales(level in -3i32..10, index in -50i64..50, lambda in 1.0f64..20.0) {
            let q = DyadicInterval::new(level, index);
            let d = dilate(&q, lambda).unwrap();
            prop_assert!(d.contains_interval(&q.interval()));
            prop_assert!((d.len() - (2.0 * lambda - 1.0) * q.length()).abs() <= 1e-9 * d.len());
        }

        #[test]
        fn subfamilies_stay_sparse(seed in 0u64..500, mask in any::<u64>(), eps in 0.1f64..0.9) {
            let s = generate_sparse(5, eps, seed).unwrap();
            certificate_is_valid(&s.certificate());
            let sub: Vec<_> = s.intervals().iter().enumerate().filter(|(i, _)| mask >> (i % 64) & 1 == 1).map(|(_, q)| *q).collect();
            let cert = verify_sparse(&sub, eps).unwrap();
            certificate_is_valid(&cert);
        }
    }
}

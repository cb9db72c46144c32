//! The reference graded module: the rank-1 Heisenberg Fock module.
//!
//! Basis states are partitions `λ₁ ≥ … ≥ λ_k ≥ 1` standing for
//! `a_{-λ₁} ⋯ a_{-λ_k} 𝟙`, with `[a_m, a_n] = m δ_{m+n,0}`. The grading
//! operator `K` acts by the partition weight `Σ λᵢ`, the pairing is the
//! contravariant form with `a_n† = a_{-n}`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::Q;

/// Eigenvalue of the grading operator.
pub type Weight = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
pub struct FockState {
    parts: Vec<u32>,
}

impl FockState {
    pub fn vacuum() -> Self {
        Self { parts: Vec::new() }
    }

    /// Builds a state from mode labels in any order; zero labels are rejected.
    pub fn new(mut parts: Vec<u32>) -> Result<Self> {
        if parts.contains(&0) {
            return Err(Error::ZeroMode);
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn is_vacuum(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn weight(&self) -> Weight {
        self.parts.iter().sum()
    }

    /// `(λ, λ) = Π_k k^{m_k} m_k!` where `m_k` counts parts equal to `k`.
    pub fn norm(&self) -> BigInt {
        let mut out = BigInt::one();
        let mut i = 0;
        while i < self.parts.len() {
            let k = self.parts[i];
            let mut mult = 0u32;
            while i < self.parts.len() && self.parts[i] == k {
                mult += 1;
                i += 1;
                out *= BigInt::from(k) * BigInt::from(mult);
            }
        }
        out
    }

    fn with_part(&self, k: u32) -> Self {
        let mut parts = self.parts.clone();
        let pos = parts.iter().position(|&p| p < k).unwrap_or(parts.len());
        parts.insert(pos, k);
        Self { parts }
    }

    fn without_part(&self, k: u32) -> Option<(Self, u32)> {
        let mult = self.parts.iter().filter(|&&p| p == k).count() as u32;
        if mult == 0 {
            return None;
        }
        let mut parts = self.parts.clone();
        let pos = parts.iter().position(|&p| p == k)?;
        parts.remove(pos);
        Some((Self { parts }, mult))
    }
}

/// Weight ascending, then partitions in lexicographically decreasing order.
impl Ord for FockState {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight().cmp(&other.weight()).then_with(|| other.parts.cmp(&self.parts))
    }
}

impl PartialOrd for FockState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "1");
        }
        let labels: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", labels.join(","))
    }
}

/// All partitions of `w` in lexicographically decreasing order.
pub fn partitions_of(w: Weight) -> Vec<FockState> {
    fn rec(rest: u32, max: u32, prefix: &mut Vec<u32>, out: &mut Vec<FockState>) {
        if rest == 0 {
            out.push(FockState { parts: prefix.clone() });
            return;
        }
        for k in (1..=max.min(rest)).rev() {
            prefix.push(k);
            rec(rest - k, k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(w, w, &mut Vec::new(), &mut out);
    out
}

/// Every basis state of weight `0..=cutoff`, weights ascending.
pub fn enumerate_basis(cutoff: Weight) -> Vec<FockState> {
    (0..=cutoff).flat_map(partitions_of).collect()
}

/// Finite rational combination of Fock states; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GradedVector {
    terms: BTreeMap<FockState, Q>,
}

impl GradedVector {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn vacuum() -> Self {
        Self::from_state(FockState::vacuum())
    }

    pub fn from_state(state: FockState) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(state, Q::one());
        Self { terms }
    }

    /// Shorthand for a basis state given by its mode labels.
    pub fn basis(parts: &[u32]) -> Result<Self> {
        Ok(Self::from_state(FockState::new(parts.to_vec())?))
    }

    pub fn from_terms(it: impl IntoIterator<Item = (FockState, Q)>) -> Self {
        let mut v = Self::zero();
        for (s, c) in it {
            v.add_term(s, c);
        }
        v
    }

    pub fn add_term(&mut self, state: FockState, coeff: Q) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(state);
        match entry {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &GradedVector, c: &Q) {
        if c.is_zero() {
            return;
        }
        for (s, x) in &other.terms {
            self.add_term(s.clone(), x * c);
        }
    }

    pub fn scaled(&self, c: &Q) -> Self {
        let mut out = Self::zero();
        out.add_scaled(self, c);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FockState, &Q)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, s: &FockState) -> Q {
        self.terms.get(s).cloned().unwrap_or_else(Q::zero)
    }

    pub fn max_weight(&self) -> Option<Weight> {
        self.terms.keys().map(FockState::weight).max()
    }

    /// The weight when the vector is nonzero and homogeneous.
    pub fn homogeneous_weight(&self) -> Option<Weight> {
        let mut ws = self.terms.keys().map(FockState::weight);
        let first = ws.next()?;
        ws.all(|w| w == first).then_some(first)
    }

    /// `P_k`: the weight-`k` component.
    pub fn project(&self, k: Weight) -> Self {
        Self {
            terms: self.terms.iter().filter(|(s, _)| s.weight() == k).map(|(s, c)| (s.clone(), c.clone())).collect(),
        }
    }

    /// Drops every component above `cutoff`.
    pub fn truncate(&self, cutoff: Weight) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(s, _)| s.weight() <= cutoff)
                .map(|(s, c)| (s.clone(), c.clone()))
                .collect(),
        }
    }
}

impl std::ops::Add for &GradedVector {
    type Output = GradedVector;
    fn add(self, rhs: &GradedVector) -> GradedVector {
        let mut out = self.clone();
        out.add_scaled(rhs, &Q::one());
        out
    }
}

impl std::ops::Sub for &GradedVector {
    type Output = GradedVector;
    fn sub(self, rhs: &GradedVector) -> GradedVector {
        let mut out = self.clone();
        out.add_scaled(rhs, &-Q::one());
        out
    }
}

impl fmt::Display for GradedVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(s, c)| format!("{c}*{s}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Action of `a_n` on a single basis state, without any cutoff.
pub(crate) fn mode_on_state(n: i64, s: &FockState) -> Option<(FockState, Q)> {
    match n.cmp(&0) {
        Ordering::Less => Some((s.with_part((-n) as u32), Q::one())),
        Ordering::Greater => {
            let (rest, mult) = s.without_part(n as u32)?;
            Some((rest, Q::from_integer(BigInt::from(n) * BigInt::from(mult))))
        }
        Ordering::Equal => None,
    }
}

/// `a_n v`, dropping components above `cutoff`.
pub fn mode_action(n: i64, v: &GradedVector, cutoff: Weight) -> Result<GradedVector> {
    if n == 0 {
        return Err(Error::ZeroMode);
    }
    let mut out = GradedVector::zero();
    for (s, c) in v.iter() {
        if let Some((t, k)) = mode_on_state(n, s) {
            if t.weight() <= cutoff {
                out.add_term(t, k * c);
            }
        }
    }
    Ok(out)
}

/// Contravariant bilinear form; basis states are orthogonal.
pub fn pair(u: &GradedVector, v: &GradedVector) -> Q {
    let (small, large) = if u.len() <= v.len() { (u, v) } else { (v, u) };
    let mut acc = Q::zero();
    for (s, c) in small.iter() {
        if let Some(d) = large.terms.get(s) {
            acc += c * d * Q::from_integer(s.norm());
        }
    }
    acc
}

/// Translation operator `T = L_{-1} = Σ_{n≥1} a_{-n-1} a_n`.
pub fn translation(v: &GradedVector) -> GradedVector {
    let mut out = GradedVector::zero();
    for (s, c) in v.iter() {
        let mut labels: Vec<u32> = s.parts().to_vec();
        labels.dedup();
        for k in labels {
            let (lowered, coeff) = mode_on_state(k as i64, s).expect("label present");
            let (raised, _) = mode_on_state(-(k as i64) - 1, &lowered).expect("creation");
            out.add_term(raised, coeff * c);
        }
    }
    out
}

/// Adjoint of the translation operator, `L_1 = Σ_{n≥1} a_{-n} a_{n+1}`.
pub fn translation_adjoint(v: &GradedVector) -> GradedVector {
    let mut out = GradedVector::zero();
    for (s, c) in v.iter() {
        let mut labels: Vec<u32> = s.parts().to_vec();
        labels.dedup();
        for k in labels.into_iter().filter(|&k| k >= 2) {
            let (lowered, coeff) = mode_on_state(k as i64, s).expect("label present");
            let (raised, _) = mode_on_state(-(k as i64) + 1, &lowered).expect("creation");
            out.add_term(raised, coeff * c);
        }
    }
    out
}

/// `z^K v` for rational `z`.
pub fn scale_by_weight(v: &GradedVector, z: &Q) -> GradedVector {
    GradedVector::from_terms(v.iter().map(|(s, c)| (s.clone(), c * pow_q(z, s.weight() as i64))))
}

pub(crate) fn pow_q(z: &Q, e: i64) -> Q {
    if e >= 0 {
        num_traits::pow(z.clone(), e as usize)
    } else {
        num_traits::pow(z.recip(), (-e) as usize)
    }
}

/// Gram matrices and dual bases for every weight up to a cutoff.
#[derive(Debug, Clone)]
pub struct PairingData {
    pub cutoff: Weight,
    pub gram: Vec<Vec<Vec<Q>>>,
    pub dual: Vec<Vec<(GradedVector, GradedVector)>>,
}

impl PairingData {
    pub fn new(cutoff: Weight) -> Result<Self> {
        let mut gram = Vec::new();
        let mut dual = Vec::new();
        for l in 0..=cutoff {
            let basis: Vec<GradedVector> = partitions_of(l).into_iter().map(GradedVector::from_state).collect();
            gram.push(gram_matrix(&basis));
            dual.push(dual_pairs(&basis).map_err(|_| Error::Degenerate(l))?);
        }
        Ok(Self { cutoff, gram, dual })
    }
}

pub fn gram_matrix(basis: &[GradedVector]) -> Vec<Vec<Q>> {
    basis.iter().map(|u| basis.iter().map(|v| pair(u, v)).collect()).collect()
}

/// Dual basis of `G_{(l)}` relative to the partition basis.
pub fn dual_basis(l: Weight, cutoff: Weight) -> Result<Vec<(GradedVector, GradedVector)>> {
    if l > cutoff {
        return Err(Error::Underflow { cutoff: cutoff as i64, what: format!("weight {l} above cutoff") });
    }
    let basis: Vec<GradedVector> = partitions_of(l).into_iter().map(GradedVector::from_state).collect();
    dual_pairs(&basis).map_err(|_| Error::Degenerate(l))
}

/// Pairs `(gᵢ, ḡᵢ)` with `(ḡᵢ, gⱼ) = δᵢⱼ` for an arbitrary basis of one weight space.
pub fn dual_pairs(basis: &[GradedVector]) -> Result<Vec<(GradedVector, GradedVector)>> {
    let w = basis.first().and_then(GradedVector::homogeneous_weight).unwrap_or(0);
    let inv = invert(&gram_matrix(basis)).ok_or(Error::Degenerate(w))?;
    Ok(basis
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut bar = GradedVector::zero();
            for (j, b) in basis.iter().enumerate() {
                bar.add_scaled(b, &inv[j][i]);
            }
            (g.clone(), bar)
        })
        .collect())
}

/// Exact Gauss-Jordan inverse; `None` when singular.
pub fn invert(m: &[Vec<Q>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let p = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot_row = a[col].clone();
                for (x, y) in a[r].iter_mut().zip(pivot_row.iter()) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub(crate) fn q_abs_max<'a>(it: impl Iterator<Item = &'a Q>) -> Q {
    it.map(|q| q.abs()).max().unwrap_or_else(Q::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Q {
        Q::from_integer(n.into())
    }

    fn st(p: &[u32]) -> GradedVector {
        GradedVector::basis(p).unwrap()
    }

    #[test]
    fn basis_order_small_cutoffs() {
        assert_eq!(enumerate_basis(0), vec![FockState::vacuum()]);
        let b2: Vec<Vec<u32>> = enumerate_basis(2).iter().map(|s| s.parts().to_vec()).collect();
        assert_eq!(b2, vec![vec![], vec![1], vec![2], vec![1, 1]]);
        assert_eq!(enumerate_basis(4).len(), 12);
    }

    #[test]
    fn partition_counts_match_recurrence() {
        // Euler's pentagonal recurrence as an independent count.
        let n = 20usize;
        let mut p = vec![0i64; n + 1];
        p[0] = 1;
        for m in 1..=n {
            let mut k = 1i64;
            loop {
                let g1 = (k * (3 * k - 1) / 2) as usize;
                let g2 = (k * (3 * k + 1) / 2) as usize;
                if g1 > m {
                    break;
                }
                let sign = if k % 2 == 1 { 1 } else { -1 };
                p[m] += sign * p[m - g1];
                if g2 <= m {
                    p[m] += sign * p[m - g2];
                }
                k += 1;
            }
        }
        for w in 0..=n as u32 {
            assert_eq!(partitions_of(w).len() as i64, p[w as usize], "p({w})");
        }
        let total: i64 = p[..=10].iter().sum();
        assert_eq!(enumerate_basis(10).len() as i64, total);
    }

    #[test]
    fn mode_action_examples() {
        let vac = GradedVector::vacuum();
        assert_eq!(mode_action(-1, &vac, 5).unwrap(), st(&[1]));
        assert!(mode_action(1, &vac, 5).unwrap().is_zero());
        assert_eq!(mode_action(2, &st(&[2]), 5).unwrap(), vac.scaled(&q(2)));
        assert_eq!(mode_action(0, &vac, 5), Err(Error::ZeroMode));
        assert!(mode_action(-3, &st(&[2]), 4).unwrap().is_zero());
    }

    #[test]
    fn mode_action_shifts_weight_by_minus_n() {
        for s in enumerate_basis(5) {
            let v = GradedVector::from_state(s.clone());
            for n in [-3i64, -2, -1, 1, 2, 3] {
                let out = mode_action(n, &v, 20).unwrap();
                for (t, _) in out.iter() {
                    assert_eq!(t.weight() as i64, s.weight() as i64 - n);
                }
            }
        }
    }

    #[test]
    fn commutator_relation_holds_on_basis() {
        for s in enumerate_basis(4) {
            let v = GradedVector::from_state(s);
            for m in [-3i64, -2, -1, 1, 2, 3] {
                for n in [-3i64, -2, -1, 1, 2, 3] {
                    let mn = mode_action(m, &mode_action(n, &v, 30).unwrap(), 30).unwrap();
                    let nm = mode_action(n, &mode_action(m, &v, 30).unwrap(), 30).unwrap();
                    let expect = if m + n == 0 { v.scaled(&q(m)) } else { GradedVector::zero() };
                    assert_eq!(&mn - &nm, expect, "[a_{m}, a_{n}]");
                }
            }
        }
    }

    #[test]
    fn pairing_examples() {
        let vac = GradedVector::vacuum();
        assert_eq!(pair(&vac, &vac), q(1));
        assert_eq!(pair(&st(&[1]), &vac), q(0));
        assert_eq!(pair(&st(&[1]), &st(&[1])), q(1));
        assert_eq!(pair(&st(&[2]), &st(&[2])), q(2));
        assert_eq!(pair(&st(&[1, 1]), &st(&[1, 1])), q(2));
        assert_eq!(pair(&st(&[2]), &st(&[1, 1])), q(0));
    }

    #[test]
    fn pairing_is_contravariant() {
        // (a_{-n} u, v) = (u, a_n v) on all basis pairs.
        let basis = enumerate_basis(5);
        for u in &basis {
            for v in &basis {
                let u = GradedVector::from_state(u.clone());
                let v = GradedVector::from_state(v.clone());
                for n in 1..=3i64 {
                    let lhs = pair(&mode_action(-n, &u, 30).unwrap(), &v);
                    let rhs = pair(&u, &mode_action(n, &v, 30).unwrap());
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn dual_basis_examples() {
        let d0 = dual_basis(0, 4).unwrap();
        assert_eq!(d0, vec![(GradedVector::vacuum(), GradedVector::vacuum())]);
        let d1 = dual_basis(1, 4).unwrap();
        assert_eq!(d1, vec![(st(&[1]), st(&[1]))]);
        let d2 = dual_basis(2, 4).unwrap();
        let half = Q::new(1.into(), 2.into());
        assert_eq!(d2[0], (st(&[2]), st(&[2]).scaled(&half)));
        assert_eq!(d2[1], (st(&[1, 1]), st(&[1, 1]).scaled(&half)));
        assert!(dual_basis(5, 4).is_err());
    }

    #[test]
    fn dual_pairs_reproduce_identity() {
        let pd = PairingData::new(6).unwrap();
        for pairs in &pd.dual {
            for (i, (_, gbar)) in pairs.iter().enumerate() {
                for (j, (g, _)) in pairs.iter().enumerate() {
                    let expect = if i == j { q(1) } else { q(0) };
                    assert_eq!(pair(gbar, g), expect);
                }
            }
        }
    }

    #[test]
    fn singular_gram_is_reported() {
        let b = vec![st(&[2]), st(&[2]).scaled(&q(3))];
        assert_eq!(dual_pairs(&b), Err(Error::Degenerate(2)));
    }

    #[test]
    fn projection_properties() {
        let v = &st(&[1]) + &st(&[2]);
        assert_eq!(v.project(2), st(&[2]));
        assert_eq!(GradedVector::vacuum().project(0), GradedVector::vacuum());
        assert!(GradedVector::vacuum().project(3).is_zero());
        let mut sum = GradedVector::zero();
        for k in 0..=3 {
            sum.add_scaled(&v.project(k), &q(1));
            assert_eq!(v.project(k).project(k), v.project(k));
            assert!(v.project(k).project(k + 1).is_zero());
        }
        assert_eq!(sum, v);
    }

    #[test]
    fn translation_is_adjoint_pair() {
        let basis = enumerate_basis(5);
        for u in &basis {
            for v in &basis {
                let u = GradedVector::from_state(u.clone());
                let v = GradedVector::from_state(v.clone());
                assert_eq!(pair(&translation(&u), &v), pair(&u, &translation_adjoint(&v)));
            }
        }
        assert!(translation(&GradedVector::vacuum()).is_zero());
        // L_{-1} a_{-k} 1 = k a_{-k-1} 1
        assert_eq!(translation(&st(&[3])), st(&[4]).scaled(&q(3)));
    }
}

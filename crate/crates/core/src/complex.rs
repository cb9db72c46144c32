//! Coboundary operator on correlator cochains and the `δ² = 0` check.
//!
//! A cochain of degree `n` is `F(g₁,…,gₙ) = c · (θ, γ_{g₁}(z₁)⋯γ_{gₙ}(zₙ)𝟙)`.
//! Its coboundary has `n + 2` terms:
//!
//! ```text
//! (δF)(g₁,…,g_{n+1}) = F(γ_{g₁}(z₁) ·)
//!                    + Σᵢ (-1)ⁱ F(…, γ_{gᵢ}(zᵢ - z_{i+1}) g_{i+1}, …)
//!                    + (-1)^{n+1} F(γ_{g_{n+1}}(z_{n+1}) ·)
//! ```
//!
//! Every term is expanded in its own region and checked against the closed
//! form, so that the signed sum can then be taken between closed forms.

use std::time::Instant;

use num_traits::{One, Signed, Zero};

use crate::correlators::{matrix_element, CorrelatorSpec, Cutoffs};
use crate::error::{Error, Result};
use crate::fields::gamma_apply;
use crate::graded::GradedVector;
use crate::perm::Permutation;
use crate::rational::{wick, RationalForm};
use crate::series::{ExpansionDomain, MultiSeries, Range};
use crate::Q;

/// Degree `n` and number of attached series `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComplexPosition {
    pub n: usize,
    pub m: usize,
}

impl ComplexPosition {
    pub fn is_terminal(&self) -> bool {
        self.m == 0
    }

    /// `(n, m) ↦ (n+1, m-1)`.
    pub fn next(&self) -> Result<Self> {
        if self.is_terminal() {
            return Err(Error::Terminal);
        }
        Ok(Self { n: self.n + 1, m: self.m - 1 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Leading,
    /// Contraction of insertions `i` and `i+1`, counted from 1.
    Contraction(usize),
    Trailing,
}

/// Signs of the coboundary at degree `n`.
pub fn standard_sign(n: usize, kind: TermKind) -> i64 {
    let parity = |k: usize| if k.is_multiple_of(2) { 1 } else { -1 };
    match kind {
        TermKind::Leading => 1,
        TermKind::Contraction(i) => parity(i),
        TermKind::Trailing => parity(n + 1),
    }
}

pub type SignRule<'a> = dyn Fn(usize, TermKind) -> i64 + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    pub spec: CorrelatorSpec,
    pub scale: Q,
    pub position: ComplexPosition,
}

impl Cochain {
    pub fn new(spec: CorrelatorSpec) -> Self {
        let position = ComplexPosition { n: spec.n(), m: spec.m };
        Self { spec, scale: Q::one(), position }
    }

    /// Closed form of the cochain on its own insertions.
    pub fn form(&self) -> Result<RationalForm> {
        Ok(wick(&self.spec.theta, &self.spec.insertions)?.scale(&self.scale))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoboundaryTerm {
    pub kind: TermKind,
    pub sign: i64,
    /// Expansion in the term's own region, including sign and scale.
    pub series: MultiSeries,
    pub form: RationalForm,
    /// Mode expansion equals the closed form in that region.
    pub validated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoboundaryResult {
    pub image: Cochain,
    pub terms: Vec<CoboundaryTerm>,
    /// Signed sum of the closed forms of all terms.
    pub form: RationalForm,
}

impl CoboundaryResult {
    pub fn all_validated(&self) -> bool {
        self.terms.iter().all(|t| t.validated)
    }

    /// The signed sum expanded in the operator-order domain of the image.
    pub fn series(&self, cutoffs: &Cutoffs) -> Result<MultiSeries> {
        self.form.expand(&self.image.spec.domain, &cutoffs.window)
    }
}

pub fn coboundary(
    f: &Cochain,
    extra: (GradedVector, String),
    cutoffs: &Cutoffs,
    w_window: Range,
) -> Result<CoboundaryResult> {
    coboundary_with(f, extra, cutoffs, w_window, &standard_sign)
}

/// [`coboundary`] with an explicit sign rule; used for negative controls.
pub fn coboundary_with(
    f: &Cochain,
    extra: (GradedVector, String),
    cutoffs: &Cutoffs,
    w_window: Range,
    sign: &SignRule<'_>,
) -> Result<CoboundaryResult> {
    let next = f.position.next()?;
    let n = f.position.n;
    let mut ins = f.spec.insertions.clone();
    ins.push(extra);
    let image_spec = CorrelatorSpec::new(ins)?.with_theta(f.spec.theta.clone()).with_slots(next.m);
    if cutoffs.window.len() != n + 1 {
        return Err(Error::SizeMismatch { got: cutoffs.window.len(), expected: n + 1 });
    }
    let full = wick(&image_spec.theta, &image_spec.insertions)?;
    let vars = image_spec.vars();
    let mut terms = Vec::with_capacity(n + 2);
    let mut kinds = vec![TermKind::Leading];
    kinds.extend((1..=n).map(TermKind::Contraction));
    kinds.push(TermKind::Trailing);
    let mut total = RationalForm::zero(&vars)?;
    let mut sign_sum = 0i64;
    for kind in kinds {
        let s = sign(n, kind);
        sign_sum += s;
        let c = &f.scale * Q::from_integer(s.into());
        let (series, validated) = match kind {
            TermKind::Leading => boundary_term(&image_spec, &Permutation::identity(n + 1), cutoffs)?,
            TermKind::Trailing => {
                let mut order: Vec<usize> = vec![n];
                order.extend(0..n);
                boundary_term(&image_spec, &Permutation::new(order)?, cutoffs)?
            }
            TermKind::Contraction(i) => contraction_term(&image_spec, &full, i, cutoffs, w_window)?,
        };
        let form = full.scale(&c);
        total = total.add(&form)?;
        terms.push(CoboundaryTerm { kind, sign: s, series: series.scale(&c), form, validated });
    }
    let image = Cochain { spec: image_spec, scale: &f.scale * Q::from_integer(sign_sum.into()), position: next };
    Ok(CoboundaryResult { image, terms, form: total })
}

/// `F` with the insertions acting in the order `σ`: the leading term is the
/// identity order, the trailing one moves the new insertion to the front.
fn boundary_term(spec: &CorrelatorSpec, sigma: &Permutation, cutoffs: &Cutoffs) -> Result<(MultiSeries, bool)> {
    let moved = spec.reorder_pairs(sigma)?;
    let w = Cutoffs { window: sigma.permute(&cutoffs.window)? };
    let v = matrix_element(&moved, &w)?;
    Ok((v.series.clone(), v.routes_agree()?))
}

/// Name of the relative coordinate `zᵢ - z_{i+1}`.
pub fn relative_name(zi: &str) -> String {
    format!("w_{zi}")
}

/// `Σ_p w^p (θ, …γ_{u_p}(z_{i+1})…𝟙)` where `γ_{gᵢ}(w) g_{i+1} = Σ_p w^p u_p`.
/// Variables: the others in operator order, then `w` as the smallest.
fn contraction_term(
    spec: &CorrelatorSpec,
    full: &RationalForm,
    i: usize,
    cutoffs: &Cutoffs,
    w_window: Range,
) -> Result<(MultiSeries, bool)> {
    let a = i - 1;
    let b = i;
    let (ga, za) = &spec.insertions[a];
    let (gb, zb) = &spec.insertions[b];
    let w = relative_name(za);
    let weight = ga.max_weight().unwrap_or(0) as i64 + gb.max_weight().unwrap_or(0) as i64 + w_window.1;
    if weight < 0 {
        return Err(Error::Underflow { cutoff: weight, what: "relative window below the lowest power".into() });
    }
    let field = gamma_apply(ga, gb, weight as u32)?;
    let mut reduced_ins = spec.insertions.clone();
    reduced_ins.remove(a);
    let mut reduced_window = cutoffs.window.clone();
    reduced_window.remove(a);
    let mut vars: Vec<String> = reduced_ins.iter().map(|(_, v)| v.clone()).collect();
    vars.push(w.clone());
    let mut window = reduced_window.clone();
    window.push(w_window);
    let domain = ExpansionDomain::new(&vars)?;
    let mut out = MultiSeries::zero(&vars, &domain, &window)?;
    for (p, u) in &field.coefficients {
        if *p < w_window.0 || *p > w_window.1 {
            continue;
        }
        let mut ins = reduced_ins.clone();
        ins[a] = (u.clone(), zb.clone());
        let reduced = CorrelatorSpec::new(ins)?.with_theta(spec.theta.clone());
        let v = matrix_element(&reduced, &Cutoffs { window: reduced_window.clone() })?;
        for (e, c) in v.series.terms() {
            let mut e2 = e.clone();
            e2.push(*p);
            out.add_term(e2, c.clone());
        }
    }
    let closed = full.shift_expand(za, zb, &w, w_window.1)?.embed(&vars)?.expand(&domain, &window)?;
    let validated = closed == out;
    Ok((out, validated))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSquareReport {
    pub position: ComplexPosition,
    pub zero: bool,
    pub max_abs: Q,
    /// `δ²F` expanded in operator order; exactly zero when the check passes.
    pub residual: MultiSeries,
    /// Degrees whose term expansions all matched their closed forms.
    pub validated: bool,
    /// Scale of `δF` and of `δ²F` relative to the plain correlator.
    pub scales: (Q, Q),
    pub terms: usize,
}

/// Applies the coboundary twice with the two supplied extra insertions.
pub fn delta_square_check(
    f: &Cochain,
    extras: [(GradedVector, String); 2],
    cutoffs: &Cutoffs,
    w_window: Range,
) -> Result<DeltaSquareReport> {
    delta_square_check_with(f, extras, cutoffs, w_window, &standard_sign)
}

pub fn delta_square_check_with(
    f: &Cochain,
    extras: [(GradedVector, String); 2],
    cutoffs: &Cutoffs,
    w_window: Range,
    sign: &SignRule<'_>,
) -> Result<DeltaSquareReport> {
    if f.position.m < 2 {
        return Err(Error::Terminal);
    }
    let n = f.position.n;
    if cutoffs.window.len() != n + 2 {
        return Err(Error::SizeMismatch { got: cutoffs.window.len(), expected: n + 2 });
    }
    let [e1, e2] = extras;
    let first = coboundary_with(f, e1, &Cutoffs { window: cutoffs.window[..n + 1].to_vec() }, w_window, sign)?;
    let second = coboundary_with(&first.image, e2, cutoffs, w_window, sign)?;
    let residual = second.series(cutoffs)?;
    let max_abs = residual.terms().values().map(|c| c.abs()).max().unwrap_or_else(Q::zero);
    Ok(DeltaSquareReport {
        position: f.position,
        zero: residual.is_zero() && second.form.is_zero(),
        max_abs,
        residual,
        validated: first.all_validated() && second.all_validated(),
        scales: (first.image.scale.clone(), second.image.scale.clone()),
        terms: first.terms.len() * second.terms.len(),
    })
}

/// States cycled through when extending the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderBattery {
    pub theta: GradedVector,
    pub insertions: Vec<GradedVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderStep {
    pub from: ComplexPosition,
    pub to: ComplexPosition,
    pub validated: bool,
    pub scale: Q,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderReport {
    pub steps: Vec<LadderStep>,
    /// `(position, δ² exactly zero, max |coefficient|)` per composable pair.
    pub pairs: Vec<(ComplexPosition, bool, Q)>,
    pub bookkeeping: bool,
    pub terminal_reached: bool,
    pub runtime_ms: u128,
}

impl LadderReport {
    pub fn passed(&self) -> bool {
        self.bookkeeping
            && self.terminal_reached
            && self.pairs.iter().all(|p| p.1)
            && self.steps.iter().all(|s| s.validated)
    }
}

/// Walks `(0, m) → (1, m-1) → … → (m, 0)` from the empty correlator,
/// checking `δ²` at every composable pair.
pub fn complex_ladder(m: usize, battery: &LadderBattery, window: Range, w_window: Range) -> Result<LadderReport> {
    if m == 0 || battery.insertions.is_empty() {
        return Err(Error::Unsupported("ladder needs m ≥ 1 and a nonempty battery".into()));
    }
    let start = Instant::now();
    let state = |j: usize| (battery.insertions[j % battery.insertions.len()].clone(), format!("z{}", j + 1));
    let mut current = Cochain::new(CorrelatorSpec::new(Vec::new())?.with_theta(battery.theta.clone()).with_slots(m));
    let total = m;
    let mut steps = Vec::new();
    let mut pairs = Vec::new();
    let mut bookkeeping = true;
    while !current.position.is_terminal() {
        let n = current.position.n;
        if current.position.m >= 2 {
            let r = delta_square_check(
                &current,
                [state(n), state(n + 1)],
                &Cutoffs::uniform(n + 2, window.0, window.1),
                w_window,
            )?;
            pairs.push((current.position, r.zero && r.validated, r.max_abs));
        }
        let r = coboundary(&current, state(n), &Cutoffs::uniform(n + 1, window.0, window.1), w_window)?;
        let to = r.image.position;
        bookkeeping &= to.n + to.m == total && to.n == n + 1;
        steps.push(LadderStep {
            from: current.position,
            to,
            validated: r.all_validated(),
            scale: r.image.scale.clone(),
        });
        current = r.image;
    }
    let terminal_reached = current.position.next().is_err();
    Ok(LadderReport { steps, pairs, bookkeeping, terminal_reached, runtime_ms: start.elapsed().as_millis() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q;

    fn st(p: &[u32]) -> GradedVector {
        GradedVector::basis(p).unwrap()
    }

    fn cochain(parts: &[&[u32]], theta: &[u32], m: usize) -> Cochain {
        let ins = parts.iter().enumerate().map(|(i, p)| (st(p), format!("z{}", i + 1))).collect();
        Cochain::new(CorrelatorSpec::new(ins).unwrap().with_theta(st(theta)).with_slots(m))
    }

    #[test]
    fn positions() {
        let p = ComplexPosition { n: 0, m: 2 };
        assert_eq!(p.next().unwrap(), ComplexPosition { n: 1, m: 1 });
        assert!(matches!(ComplexPosition { n: 3, m: 0 }.next(), Err(Error::Terminal)));
    }

    #[test]
    fn degree_zero_boundary_terms_cancel() {
        let f = cochain(&[], &[1], 1);
        let r = coboundary(&f, (st(&[1]), "z1".into()), &Cutoffs::uniform(1, -4, 4), (-4, 4)).unwrap();
        assert_eq!(r.terms.len(), 2);
        assert!(r.form.is_zero());
        assert!(r.series(&Cutoffs::uniform(1, -4, 4)).unwrap().is_zero());
        assert!(r.all_validated());
        let terminal = cochain(&[], &[], 0);
        assert!(coboundary(&terminal, (st(&[1]), "z1".into()), &Cutoffs::uniform(1, -4, 4), (-4, 4)).is_err());
    }

    #[test]
    fn degree_one_three_terms() {
        // F(g) = (1, a(z1) g); δF(a, a) has three terms
        let f = cochain(&[&[1]], &[], 1);
        let c = Cutoffs::uniform(2, -6, 4);
        let r = coboundary(&f, (st(&[1]), "z2".into()), &c, (-4, 4)).unwrap();
        assert_eq!(r.terms.len(), 3);
        assert_eq!(r.terms.iter().map(|t| t.sign).collect::<Vec<_>>(), vec![1, -1, 1]);
        assert!(r.all_validated());
        // leading: (z1 - z2)^{-2} in |z1| > |z2|: coefficient of z1^{-n-1} z2^{n-1} is n
        let lead = &r.terms[0].series;
        for n in 1..=4 {
            assert_eq!(lead.coefficient(&[-n - 1, n - 1]), q(n));
        }
        // contraction: a(w) a_{-1}1 has vacuum part w^{-2}; sign -1
        let mid = &r.terms[1].series;
        assert_eq!(mid.vars(), &["z2", "w_z1"]);
        assert_eq!(mid.coefficient(&[0, -2]), q(-1));
        assert_eq!(mid.len(), 1);
        // trailing: (z2 - z1)^{-2} in |z2| > |z1|
        let trail = &r.terms[2].series;
        assert_eq!(trail.vars(), &["z2", "z1"]);
        assert_eq!(trail.coefficient(&[-3, 1]), q(2));
        assert_eq!(r.image.scale, q(1));
    }

    #[test]
    fn term_count_is_n_plus_two() {
        for n in 0..3usize {
            let parts: Vec<&[u32]> = vec![&[1]; n];
            let f = cochain(&parts, &[1], 2);
            let r =
                coboundary(&f, (st(&[2]), format!("z{}", n + 1)), &Cutoffs::uniform(n + 1, -4, 3), (-3, 3)).unwrap();
            assert_eq!(r.terms.len(), n + 2);
            assert!(r.all_validated(), "n = {n}");
        }
    }

    #[test]
    fn delta_squared_vanishes() {
        let cases: Vec<(Vec<&[u32]>, &[u32])> = vec![
            (vec![], &[]),
            (vec![], &[1, 1]),
            (vec![&[1]], &[1, 1, 1]),
            (vec![&[1]], &[2, 1, 1]),
            (vec![&[2], &[1]], &[]),
        ];
        for (parts, theta) in cases {
            let n = parts.len();
            let f = cochain(&parts, theta, 2);
            let extras = [(st(&[1]), format!("z{}", n + 1)), (st(&[1]), format!("z{}", n + 2))];
            let mut grown = f.spec.insertions.clone();
            grown.extend(extras.iter().cloned());
            let target = CorrelatorSpec::new(grown).unwrap().with_theta(f.spec.theta.clone());
            assert!(!target.rational_form().unwrap().is_zero(), "{parts:?} is trivially zero");
            let r = delta_square_check(&f, extras, &Cutoffs::uniform(n + 2, -4, 3), (-3, 3)).unwrap();
            assert!(r.zero, "{parts:?}");
            assert!(r.validated, "{parts:?}");
            assert_eq!(r.terms, (n + 2) * (n + 3));
        }
    }

    #[test]
    fn corrupted_sign_is_detected() {
        let f = cochain(&[&[1]], &[1, 1, 1], 2);
        let flip = |n: usize, k: TermKind| {
            let s = standard_sign(n, k);
            if n == 2 && k == TermKind::Contraction(1) {
                -s
            } else {
                s
            }
        };
        let extras = [(st(&[1]), "z2".to_string()), (st(&[1]), "z3".to_string())];
        let r = delta_square_check_with(&f, extras, &Cutoffs::uniform(3, -4, 3), (-3, 3), &flip).unwrap();
        assert!(!r.zero);
        assert!(r.max_abs > Q::zero());
        assert_eq!(r.position, ComplexPosition { n: 1, m: 2 });
    }

    #[test]
    fn ladders() {
        let battery = LadderBattery { theta: st(&[1, 1]), insertions: vec![st(&[1]), st(&[1])] };
        let one = complex_ladder(1, &battery, (-4, 3), (-3, 3)).unwrap();
        assert_eq!(one.steps.len(), 1);
        assert!(one.pairs.is_empty());
        assert!(one.passed());
        let two = complex_ladder(2, &battery, (-4, 3), (-3, 3)).unwrap();
        assert_eq!(two.pairs.len(), 1);
        assert!(two.passed());
        let odd = LadderBattery { theta: st(&[1, 1, 1]), insertions: vec![st(&[1])] };
        let three = complex_ladder(3, &odd, (-4, 3), (-3, 3)).unwrap();
        assert_eq!(three.steps.len(), 3);
        assert_eq!(three.pairs.len(), 2);
        assert_eq!(three.steps.last().unwrap().to, ComplexPosition { n: 3, m: 0 });
        assert!(three.passed());
    }
}

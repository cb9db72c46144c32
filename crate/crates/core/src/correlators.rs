//! Matrix elements `(θ, γ_{g₁}(z₁) ⋯ γ_{gₙ}(zₙ) 𝟙)`.
//!
//! Two independent routes are kept side by side. The mode route applies the
//! fields one after another to the vacuum, which yields the expansion in the
//! region `|z₁| > … > |zₙ|` and nothing else. The Wick route in
//! [`crate::rational`] gives the closed form. Agreement between the two is
//! what the permutation and shuffle checks rest on.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fields::gamma_apply;
use crate::graded::{pair, partitions_of, translation, translation_adjoint, FockState, GradedVector, Weight};
use crate::perm::{inverse_shuffles, Permutation};
use crate::rational::{wick, RationalForm};
use crate::series::{ExpansionDomain, MultiSeries, Range};
use crate::{C64, Q};

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorSpec {
    pub theta: GradedVector,
    pub insertions: Vec<(GradedVector, String)>,
    /// Number of attached field-series slots. Bookkeeping only.
    pub m: usize,
    pub domain: ExpansionDomain,
}

impl CorrelatorSpec {
    /// Vacuum functional, no attached slots, domain in insertion order.
    pub fn new(insertions: Vec<(GradedVector, String)>) -> Result<Self> {
        let vars: Vec<&str> = insertions.iter().map(|(_, v)| v.as_str()).collect();
        let domain = ExpansionDomain::new(&vars)?;
        Ok(Self { theta: GradedVector::vacuum(), insertions, m: 0, domain })
    }

    pub fn with_theta(mut self, theta: GradedVector) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_slots(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn n(&self) -> usize {
        self.insertions.len()
    }

    pub fn vars(&self) -> Vec<String> {
        self.insertions.iter().map(|(_, v)| v.clone()).collect()
    }

    fn check_radial(&self) -> Result<()> {
        if self.domain.order() != self.vars().as_slice() {
            return Err(Error::Ordering(format!(
                "domain {:?} is not the operator order {:?}",
                self.domain.order(),
                self.vars()
            )));
        }
        Ok(())
    }

    /// Closed form by Wick contraction.
    pub fn rational_form(&self) -> Result<RationalForm> {
        wick(&self.theta, &self.insertions)
    }
}

/// Per-variable exponent window, in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cutoffs {
    pub window: Vec<Range>,
}

impl Cutoffs {
    pub fn uniform(n: usize, lo: i64, hi: i64) -> Self {
        Self { window: vec![(lo, hi); n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorValue {
    pub series: MultiSeries,
    pub pole_orders: BTreeMap<(String, String), i64>,
    pub form: RationalForm,
}

impl CorrelatorValue {
    /// True when the mode expansion equals the closed form expanded in the
    /// same domain and window.
    pub fn routes_agree(&self) -> Result<bool> {
        let expanded = self.form.expand(self.series.domain(), self.series.window())?;
        Ok(expanded == self.series)
    }
}

/// Smallest intermediate weight that keeps every window coefficient exact.
///
/// After the fields `j..n` act on the vacuum, a term with exponents `eᵢ` has
/// weight `Σ_{i≥j} (wt gᵢ + eᵢ)`, so the window caps every intermediate weight.
pub fn required_weight(theta: &GradedVector, insertions: &[(GradedVector, String)], window: &[Range]) -> Weight {
    required_weight_from(theta, insertions, &GradedVector::vacuum(), window)
}

fn required_weight_from(
    theta: &GradedVector,
    insertions: &[(GradedVector, String)],
    start: &GradedVector,
    window: &[Range],
) -> Weight {
    let mut acc = start.max_weight().unwrap_or(0) as i64;
    let mut best = (theta.max_weight().unwrap_or(0) as i64).max(acc);
    for (k, (g, _)) in insertions.iter().enumerate().rev() {
        acc += g.max_weight().unwrap_or(0) as i64 + window[k].1;
        best = best.max(acc);
    }
    best.max(0) as Weight
}

/// Mode route. Optionally projects the state after the fields `split..n`
/// onto weights `≤ q_max`.
fn radial_chain(
    theta: &GradedVector,
    insertions: &[(GradedVector, String)],
    window: &[Range],
    projection: Option<(usize, Weight)>,
) -> Result<BTreeMap<Vec<i64>, Q>> {
    radial_chain_from(theta, insertions, &GradedVector::vacuum(), window, projection)
}

/// `(θ, γ_{g₁}(z₁)⋯γ_{gₙ}(zₙ) w)` for an arbitrary right state `w`, as exponent map.
pub(crate) fn radial_chain_from(
    theta: &GradedVector,
    insertions: &[(GradedVector, String)],
    start: &GradedVector,
    window: &[Range],
    projection: Option<(usize, Weight)>,
) -> Result<BTreeMap<Vec<i64>, Q>> {
    let cutoff = required_weight_from(theta, insertions, start, window) as i64;
    // The fields left of stage j lower the weight by at most
    // -Σ_{i<j} (min wt gᵢ + loᵢ), so heavier states cannot reach θ.
    let theta_top = theta.max_weight().unwrap_or(0) as i64;
    let mut reach = vec![theta_top; insertions.len() + 1];
    for (i, (g, _)) in insertions.iter().enumerate() {
        let lightest = g.iter().map(|(s, _)| s.weight()).min().unwrap_or(0) as i64;
        reach[i + 1] = reach[i] - (lightest + window[i].0);
    }
    let mut layer: BTreeMap<Vec<i64>, GradedVector> = BTreeMap::new();
    layer.insert(Vec::new(), start.clone());
    for j in (0..insertions.len()).rev() {
        let stage = cutoff.min(reach[j]);
        if stage < 0 {
            return Ok(BTreeMap::new());
        }
        if let Some((split, q_max)) = projection {
            if j + 1 == split {
                for v in layer.values_mut() {
                    *v = v.truncate(q_max);
                }
            }
        }
        let (lo, hi) = window[j];
        let mut next: BTreeMap<Vec<i64>, GradedVector> = BTreeMap::new();
        for (exps, v) in &layer {
            if v.is_zero() {
                continue;
            }
            let cap = (stage as Weight).max(v.max_weight().unwrap_or(0));
            let f = gamma_apply(&insertions[j].0, v, cap)?;
            for (p, u) in f.coefficients {
                if p < lo || p > hi {
                    continue;
                }
                let mut e = Vec::with_capacity(exps.len() + 1);
                e.push(p);
                e.extend_from_slice(exps);
                next.entry(e).or_default().add_scaled(&u.truncate(stage as Weight), &Q::one());
            }
        }
        layer = next;
    }
    if let Some((0, q_max)) = projection {
        for v in layer.values_mut() {
            *v = v.truncate(q_max);
        }
    }
    let mut out = BTreeMap::new();
    for (e, v) in layer {
        let c = pair(theta, &v);
        if !c.is_zero() {
            out.insert(e, c);
        }
    }
    Ok(out)
}

fn to_series(spec: &CorrelatorSpec, window: &[Range], terms: BTreeMap<Vec<i64>, Q>) -> Result<MultiSeries> {
    let mut s = MultiSeries::zero(&spec.vars(), &spec.domain, window)?;
    for (e, c) in terms {
        s.add_term(e, c);
    }
    Ok(s)
}

fn check_window(spec: &CorrelatorSpec, cutoffs: &Cutoffs) -> Result<()> {
    if cutoffs.window.len() != spec.n() {
        return Err(Error::SizeMismatch { got: cutoffs.window.len(), expected: spec.n() });
    }
    Ok(())
}

/// Radially ordered matrix element, exact on the window.
pub fn matrix_element(spec: &CorrelatorSpec, cutoffs: &Cutoffs) -> Result<CorrelatorValue> {
    check_window(spec, cutoffs)?;
    spec.check_radial()?;
    let terms = radial_chain(&spec.theta, &spec.insertions, &cutoffs.window, None)?;
    let series = to_series(spec, &cutoffs.window, terms)?;
    let form = spec.rational_form()?;
    Ok(CorrelatorValue { series, pole_orders: form.pole_orders(), form })
}

/// `σ(F)(g₁,z₁;…) = F(g₁,z_{σ(1)};…)`: slot `i` keeps its state and takes
/// the variable of slot `σ(i)`. The domain follows the new operator order.
pub fn permute(spec: &CorrelatorSpec, sigma: &Permutation) -> Result<CorrelatorSpec> {
    if sigma.len() != spec.n() {
        return Err(Error::SizeMismatch { got: sigma.len(), expected: spec.n() });
    }
    let vars = sigma.permute(&spec.vars())?;
    let insertions = spec.insertions.iter().zip(vars).map(|((g, _), v)| (g.clone(), v)).collect();
    CorrelatorSpec { insertions, ..spec.clone() }.redomain()
}

impl CorrelatorSpec {
    fn redomain(mut self) -> Result<Self> {
        self.domain = ExpansionDomain::new(&self.vars())?;
        Ok(self)
    }

    /// The spec with its `(state, variable)` pairs reordered: slot `i`
    /// receives pair `σ(i)`.
    pub fn reorder_pairs(&self, sigma: &Permutation) -> Result<Self> {
        let insertions = sigma.permute(&self.insertions)?;
        Self { insertions, ..self.clone() }.redomain()
    }
}

/// `Σ_{σ ∈ J⁻¹_{n;s}} (-1)^{|σ|} F(g_{σ(1)},z_{σ(1)};…)`, expanded in the
/// domain of `spec`.
///
/// Every term is first computed by the mode route in its own operator
/// order and checked against its closed form. The closed forms are then
/// re-expanded in the common domain and summed.
pub fn shuffle_sum(spec: &CorrelatorSpec, s: usize, cutoffs: &Cutoffs) -> Result<MultiSeries> {
    let n = spec.n();
    if s == 0 || s >= n {
        return Err(Error::ShuffleRange { s, n });
    }
    check_window(spec, cutoffs)?;
    let vars = spec.vars();
    let mut total = MultiSeries::zero(&vars, &spec.domain, &cutoffs.window)?;
    for sigma in inverse_shuffles(n, s) {
        let term = spec.reorder_pairs(&sigma)?;
        let w = Cutoffs { window: sigma.permute(&cutoffs.window)? };
        let value = matrix_element(&term, &w)?;
        if !value.routes_agree()? {
            return Err(Error::Unsupported("mode expansion disagrees with closed form".into()));
        }
        let form = value.form.embed(&vars)?;
        let expanded = form.expand(&spec.domain, &cutoffs.window)?;
        total = total.combine(&expanded, &Q::from_integer(sigma.sign().into()))?;
    }
    Ok(total)
}

/// `Σ_{q ≤ q_max} (θ, γ(x₁)⋯γ(x_m) P_q γ(x_{m+1})⋯γ(xₙ)𝟙)`.
///
/// Terms are kept exactly when the weight flowing through the split,
/// `Σ_{i>m} (wt gᵢ + eᵢ)`, is at most `q_max`.
pub fn insertion_sum_d(spec: &CorrelatorSpec, split: usize, q_max: Weight, cutoffs: &Cutoffs) -> Result<MultiSeries> {
    check_window(spec, cutoffs)?;
    spec.check_radial()?;
    if split > spec.n() {
        return Err(Error::IndexOutOfRange { index: split, len: spec.n() });
    }
    let projection = if split == spec.n() { None } else { Some((split, q_max)) };
    let terms = radial_chain(&spec.theta, &spec.insertions, &cutoffs.window, projection)?;
    to_series(spec, &cutoffs.window, terms)
}

/// Outcome of a covariance identity: the two sides and whether they match.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub lhs: MultiSeries,
    pub rhs: MultiSeries,
    pub holds: bool,
}

impl IdentityCheck {
    fn new(lhs: MultiSeries, rhs: MultiSeries) -> Result<Self> {
        let holds = lhs.agrees_with(&rhs)?;
        Ok(Self { lhs, rhs, holds })
    }
}

fn widened(cutoffs: &Cutoffs, i: usize) -> Cutoffs {
    let mut w = cutoffs.clone();
    w.window[i].0 += 1;
    w.window[i].1 += 1;
    w
}

/// `∂_{zᵢ} F = F` with `gᵢ` replaced by `T gᵢ`.
pub fn translation_check(spec: &CorrelatorSpec, i: usize, cutoffs: &Cutoffs) -> Result<IdentityCheck> {
    if i >= spec.n() {
        return Err(Error::IndexOutOfRange { index: i, len: spec.n() });
    }
    let f = matrix_element(spec, &widened(cutoffs, i))?;
    let lhs = f.series.partial_derivative(&spec.insertions[i].1)?;
    let mut t = spec.clone();
    t.insertions[i].0 = translation(&spec.insertions[i].0);
    let rhs = matrix_element(&t, cutoffs)?.series;
    IdentityCheck::new(lhs, rhs)
}

/// `Σᵢ ∂_{zᵢ} F = F` with `θ` replaced by `L₁ θ`.
pub fn total_derivative_check(spec: &CorrelatorSpec, cutoffs: &Cutoffs) -> Result<IdentityCheck> {
    let mut lhs: Option<MultiSeries> = None;
    for (i, (_, v)) in spec.insertions.iter().enumerate() {
        let d = matrix_element(spec, &widened(cutoffs, i))?.series.partial_derivative(v)?;
        let d = d.restrict(&cutoffs.window);
        lhs = Some(match lhs {
            None => d,
            Some(acc) => acc.add(&d)?,
        });
    }
    let lhs = lhs.unwrap_or(MultiSeries::zero(&spec.vars(), &spec.domain, &cutoffs.window)?);
    let t = spec.clone().with_theta(translation_adjoint(&spec.theta));
    let rhs = matrix_element(&t, cutoffs)?.series;
    IdentityCheck::new(lhs, rhs)
}

/// `F(z₁+z,…,zₙ+z) = Σ_k z^k/k! F` with `θ` replaced by `L₁^k θ`.
pub fn shift_check(spec: &CorrelatorSpec, z: &str, z_max: i64, cutoffs: &Cutoffs) -> Result<IdentityCheck> {
    let mut big = cutoffs.clone();
    for w in &mut big.window {
        w.1 += z_max;
    }
    let f = matrix_element(spec, &big)?.series;
    let lhs = f.shift_all(z, z_max)?;
    let mut vars = spec.vars();
    vars.push(z.to_string());
    let mut rhs = MultiSeries::zero(&vars, lhs.domain(), lhs.window())?;
    let mut theta = spec.theta.clone();
    let mut fact = Q::one();
    for k in 0..=z_max {
        if k > 0 {
            theta = translation_adjoint(&theta);
            fact *= Q::from_integer(k.into());
        }
        if theta.is_zero() {
            break;
        }
        let term = matrix_element(&spec.clone().with_theta(theta.clone()), &big)?.series;
        for (e, c) in term.terms() {
            let mut e2 = e.clone();
            e2.push(k);
            rhs.add_term(e2, c / &fact);
        }
    }
    IdentityCheck::new(lhs, rhs)
}

/// `F(s z₁,…,s zₙ) · s^{Σ wt gᵢ} = s^{wt θ} F(z₁,…,zₙ)` for homogeneous states.
pub fn scaling_check(spec: &CorrelatorSpec, s: &Q, cutoffs: &Cutoffs) -> Result<IdentityCheck> {
    let weight_of = |g: &GradedVector| {
        g.homogeneous_weight().ok_or_else(|| Error::Unsupported("scaling needs homogeneous states".into()))
    };
    let wt_theta = weight_of(&spec.theta)? as i64;
    let mut wt_sum = 0i64;
    for (g, _) in &spec.insertions {
        wt_sum += weight_of(g)? as i64;
    }
    let f = matrix_element(spec, cutoffs)?.series;
    let lhs = f.scale_substitute(s)?.scale(&crate::graded::pow_q(s, wt_sum));
    let rhs = f.scale(&crate::graded::pow_q(s, wt_theta));
    IdentityCheck::new(lhs, rhs)
}

/// Point as a map from variable name to value.
pub fn point<T: Clone>(names: &[String], values: &[T]) -> HashMap<String, T> {
    names.iter().cloned().zip(values.iter().cloned()).collect()
}

/// Partial sums of a cluster expansion at one numeric point.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSum {
    /// Running total after each total projected weight `0..=max_weight`.
    pub partial_sums: Vec<C64>,
    pub value: C64,
    pub tail_bound: f64,
}

fn cluster_bounds(n: usize, sizes: &[usize]) -> Result<Vec<std::ops::Range<usize>>> {
    let total: usize = sizes.iter().sum();
    if total != n || sizes.contains(&0) {
        return Err(Error::ClusterDomain(format!("cluster sizes {sizes:?} do not partition {n} insertions")));
    }
    let mut out = Vec::new();
    let mut start = 0;
    for &l in sizes {
        out.push(start..start + l);
        start += l;
    }
    Ok(out)
}

/// `P_r` of the state `γ(y₁)⋯γ(y_l)𝟙` as `Σ_λ λ · c_λ(y)` with
/// `c_λ = (λ, γ(y₁)⋯𝟙) / (λ, λ)`, exact since the basis is orthogonal.
fn projected_cluster(cluster: &[(GradedVector, String)], r: Weight) -> Result<Vec<(FockState, RationalForm)>> {
    let mut out = Vec::new();
    for lambda in partitions_of(r) {
        let form = wick(&GradedVector::from_state(lambda.clone()), cluster)?;
        if form.is_zero() {
            continue;
        }
        let norm = Q::from_integer(lambda.norm());
        out.push((lambda, form.scale(&norm.recip())));
    }
    Ok(out)
}

/// Checks `|x_p - ζᵢ| + |x_q - ζⱼ| < |ζᵢ - ζⱼ|` for points in distinct clusters.
pub fn check_cluster_domain(
    spec: &CorrelatorSpec,
    sizes: &[usize],
    centers: &[C64],
    x: &HashMap<String, C64>,
) -> Result<()> {
    let bounds = cluster_bounds(spec.n(), sizes)?;
    if centers.len() != bounds.len() {
        return Err(Error::SizeMismatch { got: centers.len(), expected: bounds.len() });
    }
    let local = |p: usize, i: usize| -> Result<f64> {
        let v = &spec.insertions[p].1;
        let xv = x.get(v).ok_or_else(|| Error::UnknownVariable(v.clone()))?;
        Ok((xv - centers[i]).norm())
    };
    for i in 0..bounds.len() {
        for j in i + 1..bounds.len() {
            let gap = (centers[i] - centers[j]).norm();
            for p in bounds[i].clone() {
                for q in bounds[j].clone() {
                    if local(p, i)? + local(q, j)? >= gap {
                        return Err(Error::ClusterDomain(format!(
                            "{} and {} reach across the gap between centers {i} and {j}",
                            spec.insertions[p].1, spec.insertions[q].1
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// `Σ_{r₁,…,r_k} F(P_{r₁}h₁, ζ₁; …; P_{r_k}h_k, ζ_k)` at a numeric point, where
/// `hᵢ` is the product of the fields of cluster `i` in coordinates local to `ζᵢ`.
pub fn insertion_sum_c(
    spec: &CorrelatorSpec,
    sizes: &[usize],
    centers: &[C64],
    x: &HashMap<String, C64>,
    max_weight: Weight,
) -> Result<ClusterSum> {
    check_cluster_domain(spec, sizes, centers, x)?;
    let bounds = cluster_bounds(spec.n(), sizes)?;
    let k = bounds.len();
    // per cluster, per weight: (state, numeric coefficient)
    let mut proj: Vec<Vec<Vec<(FockState, C64)>>> = Vec::with_capacity(k);
    for (i, b) in bounds.iter().enumerate() {
        let cluster = &spec.insertions[b.clone()];
        let local: HashMap<String, C64> = cluster.iter().map(|(_, v)| (v.clone(), x[v] - centers[i])).collect();
        let mut per_r = Vec::new();
        for r in 0..=max_weight {
            let mut list = Vec::new();
            for (lambda, form) in projected_cluster(cluster, r)? {
                list.push((lambda, form.evaluate(&local)?));
            }
            per_r.push(list);
        }
        proj.push(per_r);
    }
    let names: Vec<String> = (0..k).map(|i| format!("zeta{i}")).collect();
    let centre_point = point(&names, centers);
    let mut shells = vec![C64::new(0.0, 0.0); max_weight as usize + 1];
    // walk all weight tuples with total ≤ max_weight
    let mut rs = vec![0usize; k];
    loop {
        let total: usize = rs.iter().sum();
        if total <= max_weight as usize {
            let lists: Vec<&Vec<(FockState, C64)>> = (0..k).map(|i| &proj[i][rs[i]]).collect();
            if lists.iter().all(|l| !l.is_empty()) {
                let mut idx = vec![0usize; k];
                loop {
                    let mut c = C64::new(1.0, 0.0);
                    let mut ins = Vec::with_capacity(k);
                    for i in 0..k {
                        let (lambda, ci) = &lists[i][idx[i]];
                        c *= ci;
                        ins.push((GradedVector::from_state(lambda.clone()), names[i].clone()));
                    }
                    shells[total] += c * wick(&spec.theta, &ins)?.evaluate(&centre_point)?;
                    if !advance(&mut idx, &lists.iter().map(|l| l.len()).collect::<Vec<_>>()) {
                        break;
                    }
                }
            }
        }
        if !advance(&mut rs, &vec![max_weight as usize + 1; k]) {
            break;
        }
    }
    let mut partial_sums = Vec::with_capacity(shells.len());
    let mut acc = C64::new(0.0, 0.0);
    for s in &shells {
        acc += s;
        partial_sums.push(acc);
    }
    Ok(ClusterSum { value: acc, tail_bound: shell_tail(&shells), partial_sums })
}

fn advance(idx: &mut [usize], lens: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < lens[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

/// Geometric bound on the omitted shells. Shells are compared two steps
/// apart since parity often kills every other one.
fn shell_tail(shells: &[C64]) -> f64 {
    let n = shells.len();
    if n < 4 {
        return f64::INFINITY;
    }
    let a = shells[n - 1].norm().max(shells[n - 2].norm());
    let b = shells[n - 3].norm().max(shells[n - 4].norm());
    if a == 0.0 {
        return 0.0;
    }
    if b == 0.0 {
        return f64::INFINITY;
    }
    let q = a / b;
    if q >= 1.0 {
        f64::INFINITY
    } else {
        2.0 * a * q / (1.0 - q)
    }
}

/// The same cluster sum as a closed form in the centers `centers[i]` and
/// the local coordinates, which keep the insertion variable names.
pub fn insertion_sum_c_form(
    spec: &CorrelatorSpec,
    sizes: &[usize],
    centers: &[String],
    max_weight: Weight,
) -> Result<RationalForm> {
    let bounds = cluster_bounds(spec.n(), sizes)?;
    let k = bounds.len();
    if centers.len() != k {
        return Err(Error::SizeMismatch { got: centers.len(), expected: k });
    }
    let mut vars: Vec<String> = centers.to_vec();
    vars.extend(spec.vars());
    let mut total = RationalForm::zero(&vars)?;
    let proj: Vec<Vec<Vec<(FockState, RationalForm)>>> = bounds
        .iter()
        .map(|b| (0..=max_weight).map(|r| projected_cluster(&spec.insertions[b.clone()], r)).collect())
        .collect::<Result<_>>()?;
    let mut rs = vec![0usize; k];
    loop {
        if rs.iter().sum::<usize>() <= max_weight as usize {
            let lists: Vec<&Vec<(FockState, RationalForm)>> = (0..k).map(|i| &proj[i][rs[i]]).collect();
            if lists.iter().all(|l| !l.is_empty()) {
                let mut idx = vec![0usize; k];
                loop {
                    let ins: Vec<(GradedVector, String)> = (0..k)
                        .map(|i| (GradedVector::from_state(lists[i][idx[i]].0.clone()), centers[i].clone()))
                        .collect();
                    let mut term = wick(&spec.theta, &ins)?;
                    for i in 0..k {
                        term = term.mul(&lists[i][idx[i]].1)?;
                    }
                    total = total.add(&term.embed(&vars)?)?;
                    if !advance(&mut idx, &lists.iter().map(|l| l.len()).collect::<Vec<_>>()) {
                        break;
                    }
                }
            }
        }
        if !advance(&mut rs, &vec![max_weight as usize + 1; k]) {
            break;
        }
    }
    Ok(total)
}

//! Truncated multivariable Laurent series with explicit expansion domains.
//!
//! A series carries its variables, a rectangular exponent window (one
//! inclusive range per variable) and the magnitude ordering it was expanded
//! in. Only terms inside the window are stored.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::graded::pow_q;
use crate::{q_to_f64, C64, Q};

/// Relative tolerance for numeric coefficient comparison.
pub const NUMERIC_RTOL: f64 = 1e-9;
/// Absolute floor for numeric coefficient comparison.
pub const NUMERIC_ATOL: f64 = 1e-12;

pub fn numeric_close(a: C64, b: C64) -> bool {
    (a - b).norm() <= NUMERIC_ATOL + NUMERIC_RTOL * a.norm().max(b.norm())
}

/// Total order `|v₀| > |v₁| > … > 0` on variable names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExpansionDomain {
    order: Vec<String>,
}

impl ExpansionDomain {
    pub fn new<S: AsRef<str>>(order: &[S]) -> Result<Self> {
        let order: Vec<String> = order.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, v) in order.iter().enumerate() {
            if order[..i].contains(v) {
                return Err(Error::VariableCollision(v.clone()));
            }
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn position(&self, v: &str) -> Option<usize> {
        self.order.iter().position(|x| x == v)
    }

    /// True when `|i| > |j|` in this domain.
    pub fn precedes(&self, i: &str, j: &str) -> Result<bool> {
        let pi = self.position(i).ok_or_else(|| Error::UnknownVariable(i.into()))?;
        let pj = self.position(j).ok_or_else(|| Error::UnknownVariable(j.into()))?;
        Ok(pi < pj)
    }

    /// Disjoint concatenation: every variable of `self` dominates `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut order = self.order.clone();
        for v in &other.order {
            if order.contains(v) {
                return Err(Error::VariableCollision(v.clone()));
            }
            order.push(v.clone());
        }
        Ok(Self { order })
    }

    fn with_smallest(&self, v: &str) -> Result<Self> {
        if self.order.iter().any(|x| x == v) {
            return Err(Error::VariableCollision(v.into()));
        }
        let mut order = self.order.clone();
        order.push(v.to_string());
        Ok(Self { order })
    }
}

/// Inclusive exponent range for one variable.
pub type Range = (i64, i64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiSeries {
    vars: Vec<String>,
    window: Vec<Range>,
    domain: ExpansionDomain,
    terms: BTreeMap<Vec<i64>, Q>,
}

pub(crate) fn binom(e: i64, k: u64) -> BigInt {
    // generalized binomial e(e-1)…(e-k+1)/k!
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for t in 0..k as i64 {
        num *= BigInt::from(e - t);
        den *= BigInt::from(t + 1);
    }
    num / den
}

impl MultiSeries {
    /// Empty series over `vars` with the given window. The domain must list
    /// exactly the same variables.
    pub fn zero<S: AsRef<str>>(vars: &[S], domain: &ExpansionDomain, window: &[Range]) -> Result<Self> {
        let vars: Vec<String> = vars.iter().map(|s| s.as_ref().to_string()).collect();
        if window.len() != vars.len() {
            return Err(Error::DomainMismatch(format!("{} window ranges for {} variables", window.len(), vars.len())));
        }
        for v in &vars {
            if domain.position(v).is_none() {
                return Err(Error::DomainMismatch(format!("`{v}` missing from domain")));
            }
        }
        if domain.order().len() != vars.len() {
            return Err(Error::DomainMismatch("domain has extra variables".into()));
        }
        ExpansionDomain::new(&vars)?;
        Ok(Self { vars, window: window.to_vec(), domain: domain.clone(), terms: BTreeMap::new() })
    }

    /// Same variables, window and domain, no terms.
    pub fn empty_like(&self) -> Self {
        Self {
            vars: self.vars.clone(),
            window: self.window.clone(),
            domain: self.domain.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant<S: AsRef<str>>(vars: &[S], domain: &ExpansionDomain, window: &[Range], c: Q) -> Result<Self> {
        let mut s = Self::zero(vars, domain, window)?;
        let e = vec![0; s.vars.len()];
        s.add_term(e, c);
        Ok(s)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn window(&self) -> &[Range] {
        &self.window
    }

    pub fn domain(&self) -> &ExpansionDomain {
        &self.domain
    }

    pub fn terms(&self) -> &BTreeMap<Vec<i64>, Q> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn var_index(&self, v: &str) -> Result<usize> {
        self.vars.iter().position(|x| x == v).ok_or_else(|| Error::UnknownVariable(v.into()))
    }

    pub fn in_window(&self, e: &[i64]) -> bool {
        e.iter().zip(&self.window).all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    /// Adds `c · monomial`; silently ignores monomials outside the window.
    pub fn add_term(&mut self, e: Vec<i64>, c: Q) {
        if c.is_zero() || !self.in_window(&e) {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn coefficient(&self, e: &[i64]) -> Q {
        self.terms.get(e).cloned().unwrap_or_else(Q::zero)
    }

    /// Coefficient looked up by variable name, missing variables at exponent 0.
    pub fn coefficient_by_name(&self, e: &[(&str, i64)]) -> Result<Q> {
        let mut exps = vec![0; self.vars.len()];
        for (v, x) in e {
            exps[self.var_index(v)?] = *x;
        }
        Ok(self.coefficient(&exps))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.vars != other.vars {
            return Err(Error::DomainMismatch(format!("variables {:?} vs {:?}", self.vars, other.vars)));
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch(format!(
                "domains {:?} vs {:?}",
                self.domain.order(),
                other.domain.order()
            )));
        }
        Ok(())
    }

    fn intersect(&self, other: &Self) -> Vec<Range> {
        self.window.iter().zip(&other.window).map(|(a, b)| (a.0.max(b.0), a.1.min(b.1))).collect()
    }

    /// Restricts to a smaller window.
    pub fn restrict(&self, window: &[Range]) -> Self {
        let window: Vec<Range> = self.window.iter().zip(window).map(|(a, b)| (a.0.max(b.0), a.1.min(b.1))).collect();
        let mut out = Self { vars: self.vars.clone(), window, domain: self.domain.clone(), terms: BTreeMap::new() };
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, &Q::one())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, &-Q::one())
    }

    /// `self + c·other` on the window intersection.
    pub fn combine(&self, other: &Self, c: &Q) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.restrict(&self.intersect(other));
        for (e, x) in &other.terms {
            out.add_term(e.clone(), x * c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Q) -> Self {
        let mut out = self.empty_like();
        for (e, x) in &self.terms {
            out.add_term(e.clone(), x * c);
        }
        out
    }

    /// Cauchy product of the retained terms, truncated to the intersection window.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.restrict(&self.intersect(other));
        out.terms.clear();
        for (ea, a) in &self.terms {
            for (eb, b) in &other.terms {
                let e: Vec<i64> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.add_term(e, a * b);
            }
        }
        Ok(out)
    }

    /// Product of series over disjoint variables; the domain of `self`
    /// dominates that of `other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut vars = self.vars.clone();
        for v in &other.vars {
            if vars.contains(v) {
                return Err(Error::VariableCollision(v.clone()));
            }
            vars.push(v.clone());
        }
        let mut window = self.window.clone();
        window.extend(other.window.iter().copied());
        let domain = self.domain.concat(&other.domain)?;
        let mut out = Self::zero(&vars, &domain, &window)?;
        for (ea, a) in &self.terms {
            for (eb, b) in &other.terms {
                let mut e = ea.clone();
                e.extend(eb.iter().copied());
                out.add_term(e, a * b);
            }
        }
        Ok(out)
    }

    /// `(z_i − z_j)^m`, geometric in `z_j / z_i` when `m < 0`.
    pub fn binomial<S: AsRef<str>>(
        vars: &[S],
        domain: &ExpansionDomain,
        window: &[Range],
        i: &str,
        j: &str,
        m: i64,
    ) -> Result<Self> {
        let mut out = Self::zero(vars, domain, window)?;
        let ii = out.var_index(i)?;
        let jj = out.var_index(j)?;
        if ii == jj {
            return Err(Error::VariableCollision(i.into()));
        }
        let push = |out: &mut Self, ei: i64, ej: i64, c: BigInt| {
            let mut e = vec![0; out.vars.len()];
            e[ii] = ei;
            e[jj] = ej;
            out.add_term(e, Q::from_integer(c));
        };
        if m >= 0 {
            for k in 0..=m {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                push(&mut out, m - k, k, binom(m, k as u64) * sign);
            }
        } else {
            if !domain.precedes(i, j)? {
                return Err(Error::WrongRegion { i: i.into(), j: j.into(), exponent: m });
            }
            let (lo_i, _) = out.window[ii];
            let (_, hi_j) = out.window[jj];
            // z_i^{m-k} z_j^k: k bounded by both windows
            let kmax = hi_j.min(m - lo_i);
            for k in 0..=kmax.max(-1) {
                push(&mut out, m - k, k, binom(-m + k - 1, k as u64));
            }
        }
        Ok(out)
    }

    /// Term-wise `∂/∂v`; the window for `v` moves down by one.
    pub fn partial_derivative(&self, v: &str) -> Result<Self> {
        let idx = self.var_index(v)?;
        let mut out = self.empty_like();
        out.window[idx] = (self.window[idx].0 - 1, self.window[idx].1 - 1);
        for (e, c) in &self.terms {
            if e[idx] == 0 {
                continue;
            }
            let mut f = e.clone();
            f[idx] -= 1;
            out.add_term(f, c * Q::from_integer(e[idx].into()));
        }
        Ok(out)
    }

    /// `v ↦ v + z` for a fresh variable `z`, kept to powers `0..=z_max`.
    /// The window of `v` shrinks at the top by `z_max`.
    pub fn shift_substitute(&self, v: &str, z: &str, z_max: i64) -> Result<Self> {
        if self.vars.iter().any(|x| x == z) {
            return Err(Error::VariableCollision(z.into()));
        }
        let with_z = self.adjoin_smallest(z, (0, z_max))?;
        with_z.shift_into(v, z)
    }

    /// Simultaneous shift of every variable by the fresh variable `z`.
    pub fn shift_all(&self, z: &str, z_max: i64) -> Result<Self> {
        if self.vars.iter().any(|x| x == z) {
            return Err(Error::VariableCollision(z.into()));
        }
        let mut out = self.adjoin_smallest(z, (0, z_max))?;
        for v in self.vars.clone() {
            out = out.shift_into(&v, z)?;
        }
        Ok(out)
    }

    /// Appends a variable at exponent 0 that is smaller than every other.
    pub fn adjoin_smallest(&self, z: &str, range: Range) -> Result<Self> {
        let domain = self.domain.with_smallest(z)?;
        let mut vars = self.vars.clone();
        vars.push(z.to_string());
        let mut window = self.window.clone();
        window.push(range);
        let mut out = Self::zero(&vars, &domain, &window)?;
        for (e, c) in &self.terms {
            let mut f = e.clone();
            f.push(0);
            out.add_term(f, c.clone());
        }
        Ok(out)
    }

    /// `v ↦ v + z` where `z` is already a variable of the series.
    pub fn shift_into(&self, v: &str, z: &str) -> Result<Self> {
        let iv = self.var_index(v)?;
        let iz = self.var_index(z)?;
        if iv == iz {
            return Err(Error::VariableCollision(z.into()));
        }
        let (zlo, zhi) = self.window[iz];
        let mut out = self.empty_like();
        let span = zhi - zlo;
        let (lo, hi) = self.window[iv];
        if hi - span < lo {
            return Err(Error::Underflow {
                cutoff: hi,
                what: format!("window of `{v}` cannot absorb a shift of order {span}"),
            });
        }
        out.window[iv] = (lo, hi - span);
        for (e, c) in &self.terms {
            let ev = e[iv];
            for k in 0..=(zhi - e[iz]).max(-1) {
                let mut f = e.clone();
                f[iv] = ev - k;
                f[iz] = e[iz] + k;
                out.add_term(f, c * Q::from_integer(binom(ev, k as u64)));
            }
        }
        Ok(out)
    }

    /// Merges variable `from` into `to` via `from ↦ c·to`, dropping `from`.
    pub fn merge_variable(&self, from: &str, to: &str, c: &Q) -> Result<Self> {
        let ifr = self.var_index(from)?;
        let ito = self.var_index(to)?;
        let vars: Vec<String> = self.vars.iter().filter(|x| *x != from).cloned().collect();
        let order: Vec<String> = self.domain.order().iter().filter(|x| *x != from).cloned().collect();
        let domain = ExpansionDomain::new(&order)?;
        let mut window: Vec<Range> = Vec::new();
        for (k, w) in self.window.iter().enumerate() {
            if k == ifr {
                continue;
            }
            if k == ito {
                let (a, b) = self.window[ifr];
                // exact only where every split of the merged exponent is retained
                window.push((w.0 + b, w.1 + a));
            } else {
                window.push(*w);
            }
        }
        let mut out = Self::zero(&vars, &domain, &window)?;
        for (e, x) in &self.terms {
            let mut f = e.clone();
            f[ito] += f[ifr];
            let p = f.remove(ifr);
            out.add_term(f, x * pow_q(c, p));
        }
        Ok(out)
    }

    /// `z_i ↦ s · z_i` for every variable, with `s` a nonzero rational.
    pub fn scale_substitute(&self, s: &Q) -> Result<Self> {
        if s.is_zero() {
            return Err(Error::ZeroScale);
        }
        let mut out = self.empty_like();
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * pow_q(s, e.iter().sum()));
        }
        Ok(out)
    }

    /// `z_i ↦ z · z_i` with `z` a fresh formal variable recording total degree.
    pub fn scale_substitute_var(&self, z: &str) -> Result<Self> {
        let lo: i64 = self.window.iter().map(|w| w.0).sum();
        let hi: i64 = self.window.iter().map(|w| w.1).sum();
        let mut out = self.adjoin_smallest(z, (lo, hi))?;
        out.terms.clear();
        let n = self.vars.len();
        for (e, c) in &self.terms {
            let mut f = e.clone();
            f.push(e.iter().sum());
            out.add_term(f, c.clone());
        }
        debug_assert_eq!(out.vars.len(), n + 1);
        Ok(out)
    }

    /// Multiplies by the monomial `Π v^{e_v}` and shifts the window along.
    pub fn mul_monomial(&self, e: &[(&str, i64)], c: &Q) -> Result<Self> {
        let mut shift = vec![0; self.vars.len()];
        for (v, x) in e {
            shift[self.var_index(v)?] += x;
        }
        let mut out = self.empty_like();
        for (k, w) in out.window.iter_mut().enumerate() {
            *w = (w.0 + shift[k], w.1 + shift[k]);
        }
        for (ex, x) in &self.terms {
            let f: Vec<i64> = ex.iter().zip(&shift).map(|(a, b)| a + b).collect();
            out.add_term(f, x * c);
        }
        Ok(out)
    }

    /// Renames variables (domain included); the new names must stay distinct.
    pub fn rename(&self, map: &HashMap<String, String>) -> Result<Self> {
        let f = |v: &String| map.get(v).cloned().unwrap_or_else(|| v.clone());
        let vars: Vec<String> = self.vars.iter().map(f).collect();
        let order: Vec<String> = self.domain.order().iter().map(f).collect();
        let domain = ExpansionDomain::new(&order)?;
        let mut out = Self::zero(&vars, &domain, &self.window)?;
        out.terms = self.terms.clone();
        Ok(out)
    }

    /// Re-lists the variables in `order` (a permutation of the current ones).
    pub fn reorder_vars<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        let idx: Vec<usize> = order.iter().map(|v| self.var_index(v.as_ref())).collect::<Result<_>>()?;
        if idx.len() != self.vars.len() {
            return Err(Error::DomainMismatch("reorder must list every variable".into()));
        }
        let vars: Vec<String> = idx.iter().map(|&k| self.vars[k].clone()).collect();
        let window: Vec<Range> = idx.iter().map(|&k| self.window[k]).collect();
        let mut out = Self::zero(&vars, &self.domain, &window)?;
        for (e, c) in &self.terms {
            out.add_term(idx.iter().map(|&k| e[k]).collect(), c.clone());
        }
        Ok(out)
    }

    /// Same terms with a different domain tag. Used only where the caller has
    /// verified that the terms are an expansion valid in both.
    pub fn retag_domain(&self, domain: &ExpansionDomain) -> Result<Self> {
        let mut out = Self::zero(&self.vars, domain, &self.window)?;
        out.terms = self.terms.clone();
        Ok(out)
    }

    /// Exact equality of the retained terms on the common window.
    pub fn agrees_with(&self, other: &Self) -> Result<bool> {
        Ok(self.sub(other)?.is_zero())
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> Q {
        crate::graded::q_abs_max(self.terms.values())
    }

    /// Most negative exponent of `v` among the retained terms.
    pub fn min_exponent(&self, v: &str) -> Result<Option<i64>> {
        let k = self.var_index(v)?;
        Ok(self.terms.keys().map(|e| e[k]).min())
    }

    fn check_point(&self, point: &HashMap<String, C64>) -> Result<Vec<C64>> {
        let vals: Vec<C64> = self
            .vars
            .iter()
            .map(|v| point.get(v).copied().ok_or_else(|| Error::UnknownVariable(v.clone())))
            .collect::<Result<_>>()?;
        let order = self.domain.order();
        for w in order.windows(2) {
            let a = point[&w[0]].norm();
            let b = point[&w[1]].norm();
            if a <= b {
                return Err(Error::DomainViolation(format!("|{}| = {a} is not > |{}| = {b}", w[0], w[1])));
            }
        }
        Ok(vals)
    }

    /// Finite sum of the retained monomials at `point`.
    pub fn evaluate(&self, point: &HashMap<String, C64>) -> Result<C64> {
        Ok(self.evaluate_with_tail(point)?.0)
    }

    /// Value plus a tail estimate built from the outermost expansion shells.
    pub fn evaluate_with_tail(&self, point: &HashMap<String, C64>) -> Result<(C64, TailEstimate)> {
        let vals = self.check_point(point)?;
        let largest = self.domain.order().first().and_then(|v| self.vars.iter().position(|x| x == v));
        let mut total = C64::new(0.0, 0.0);
        let mut shells: BTreeMap<i64, f64> = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut t = C64::new(q_to_f64(c), 0.0);
            for (k, &x) in e.iter().enumerate() {
                if x < 0 && vals[k].norm() == 0.0 {
                    return Err(Error::DivisionByZero(self.vars[k].clone()));
                }
                t *= vals[k].powi(x as i32);
            }
            total += t;
            let depth: i64 = e.iter().enumerate().filter(|(k, _)| Some(*k) != largest).map(|(_, &x)| x.max(0)).sum();
            *shells.entry(depth).or_insert(0.0) += t.norm();
        }
        Ok((total, TailEstimate::from_shells(&shells)))
    }
}

/// Geometric extrapolation of the omitted tail from the last two shells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub last_shell: f64,
    pub ratio: f64,
    pub bound: f64,
}

impl TailEstimate {
    fn from_shells(shells: &BTreeMap<i64, f64>) -> Self {
        let mut it = shells.values().rev();
        let last = it.next().copied().unwrap_or(0.0);
        let prev = it.next().copied().unwrap_or(0.0);
        if last == 0.0 {
            return Self { last_shell: 0.0, ratio: 0.0, bound: 0.0 };
        }
        let ratio = if prev > 0.0 { last / prev } else { 1.0 };
        let bound = if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY };
        Self { last_shell: last, ratio, bound }
    }

    /// True when the omitted tail is not negligible at `tol`.
    pub fn is_slow(&self, tol: f64) -> bool {
        self.bound.is_nan() || self.bound > tol
    }
}

impl fmt::Display for MultiSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (v, x) in self.vars.iter().zip(e) {
                if *x != 0 {
                    write!(f, "*{v}^{x}")?;
                }
            }
        }
        Ok(())
    }
}

/// Convenience: `Q` absolute value as f64.
pub fn q_abs_f64(x: &Q) -> f64 {
    q_to_f64(&x.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{q, qf};

    fn dom12() -> ExpansionDomain {
        ExpansionDomain::new(&["z1", "z2"]).unwrap()
    }

    fn poly(terms: &[((i64, i64), i64)], w: Range) -> MultiSeries {
        let mut s = MultiSeries::zero(&["z1", "z2"], &dom12(), &[w, w]).unwrap();
        for ((a, b), c) in terms {
            s.add_term(vec![*a, *b], q(*c));
        }
        s
    }

    #[test]
    fn mul_examples() {
        let w = (-4, 4);
        let one = poly(&[((0, 0), 1)], w);
        let s = poly(&[((1, 2), 3), ((-1, 0), 5)], w);
        assert_eq!(one.mul(&s).unwrap(), s);
        let a = poly(&[((1, 0), 1), ((0, 1), -1)], w);
        let b = poly(&[((1, 0), 1), ((0, 1), 1)], w);
        assert_eq!(a.mul(&b).unwrap(), poly(&[((2, 0), 1), ((0, 2), -1)], w));
    }

    #[test]
    fn mul_rejects_domain_mismatch() {
        let a = poly(&[((0, 0), 1)], (0, 2));
        let other = ExpansionDomain::new(&["z2", "z1"]).unwrap();
        let b = MultiSeries::constant(&["z1", "z2"], &other, &[(0, 2), (0, 2)], q(1)).unwrap();
        assert!(matches!(a.mul(&b), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn geometric_square_matches_convolution() {
        // z2^{-1} Σ (z1/z2)^k in |z2| > |z1|, k ≤ 8
        let d = ExpansionDomain::new(&["z2", "z1"]).unwrap();
        let w = [(0, 8), (-9, -1)];
        let mut s = MultiSeries::zero(&["z1", "z2"], &d, &w).unwrap();
        for k in 0..=8 {
            s.add_term(vec![k, -k - 1], q(1));
        }
        let sq = s.mul(&s).unwrap();
        // brute-force convolution
        let mut oracle: BTreeMap<(i64, i64), i64> = BTreeMap::new();
        for a in 0..=8 {
            for b in 0..=8 {
                *oracle.entry((a + b, -a - b - 2)).or_insert(0) += 1;
            }
        }
        for ((x, y), c) in oracle {
            if (0..=8).contains(&x) && (-9..=-1).contains(&y) {
                assert_eq!(sq.coefficient(&[x, y]), q(c), "z1^{x} z2^{y}");
            }
        }
        assert_eq!(sq.coefficient(&[7, -9]), q(8));
    }

    #[test]
    fn binomial_examples() {
        let w = [(-12, 12), (-12, 12)];
        let s = MultiSeries::binomial(&["z1", "z2"], &dom12(), &w, "z1", "z2", 2).unwrap();
        assert_eq!(s, poly(&[((2, 0), 1), ((1, 1), -2), ((0, 2), 1)], (-12, 12)));
        let inv = MultiSeries::binomial(&["z1", "z2"], &dom12(), &w, "z1", "z2", -1).unwrap();
        for k in 0..=11 {
            assert_eq!(inv.coefficient(&[-1 - k, k]), q(1));
        }
        let inv2 = MultiSeries::binomial(&["z1", "z2"], &dom12(), &w, "z1", "z2", -2).unwrap();
        // (z1 - z2)^{-2} = -∂_{z1} (z1 - z2)^{-1}
        let d = inv.partial_derivative("z1").unwrap().scale(&q(-1));
        assert!(inv2.agrees_with(&d).unwrap());
        assert_eq!(inv2.coefficient(&[-5, 3]), q(4));
    }

    #[test]
    fn binomial_wrong_region() {
        let w = [(-5, 5), (-5, 5)];
        let r = MultiSeries::binomial(&["z1", "z2"], &dom12(), &w, "z2", "z1", -1);
        assert!(matches!(r, Err(Error::WrongRegion { .. })));
        assert!(MultiSeries::binomial(&["z1", "z2"], &dom12(), &w, "z2", "z1", 3).is_ok());
    }

    #[test]
    fn inverse_times_difference_is_one() {
        let w = [(-10, 10), (-10, 10)];
        let inv = MultiSeries::binomial(&["z1", "z2"], &dom12(), &w, "z1", "z2", -1).unwrap();
        let diff = MultiSeries::binomial(&["z1", "z2"], &dom12(), &w, "z1", "z2", 1).unwrap();
        let prod = inv.mul(&diff).unwrap();
        // the top z2 shell loses its partner, the rest is exactly 1
        let inner = prod.restrict(&[(-10, 10), (-10, 9)]);
        assert_eq!(inner, MultiSeries::constant(&["z1", "z2"], &dom12(), inner.window(), q(1)).unwrap());
    }

    #[test]
    fn derivative_examples() {
        let w = (-4, 4);
        let c = poly(&[((0, 0), 7)], w);
        assert!(c.partial_derivative("z1").unwrap().is_zero());
        let s = poly(&[((2, 1), 1)], w);
        let d = s.partial_derivative("z1").unwrap();
        assert_eq!(d.coefficient(&[1, 1]), q(2));
        assert_eq!(d.len(), 1);
        assert!(matches!(s.partial_derivative("w"), Err(Error::UnknownVariable(_))));
        // translation invariance of the (z1 - z2)^{-1} expansion
        let ww = [(-10, 10), (-10, 10)];
        let inv = MultiSeries::binomial(&["z1", "z2"], &dom12(), &ww, "z1", "z2", -1).unwrap();
        let d1 = inv.partial_derivative("z1").unwrap();
        let d2 = inv.partial_derivative("z2").unwrap();
        let sum = d1.add(&d2).unwrap();
        assert!(sum.is_zero());
        assert!(!sum.window().is_empty());
    }

    #[test]
    fn shift_examples() {
        let s = poly(&[((2, 0), 1)], (-4, 6));
        let sh = s.shift_substitute("z1", "z", 4).unwrap();
        assert_eq!(sh.coefficient_by_name(&[("z1", 2)]).unwrap(), q(1));
        assert_eq!(sh.coefficient_by_name(&[("z1", 1), ("z", 1)]).unwrap(), q(2));
        assert_eq!(sh.coefficient_by_name(&[("z", 2)]).unwrap(), q(1));
        assert_eq!(sh.len(), 3);
        // dropping z: only z^0 terms reproduce s
        let z0: Vec<_> = sh.terms().iter().filter(|(e, _)| e[2] == 0).collect();
        assert_eq!(z0.len(), 1);
        assert!(matches!(s.shift_substitute("z1", "z2", 2), Err(Error::VariableCollision(_))));
    }

    #[test]
    fn shifting_both_variables_of_double_pole_cancels() {
        let w = [(-14, 10), (-14, 10)];
        let inv2 = MultiSeries::binomial(&["z1", "z2"], &dom12(), &w, "z1", "z2", -2).unwrap();
        let sh = inv2.shift_all("z", 3).unwrap();
        for e in sh.terms().keys() {
            assert_eq!(e[2], 0, "z-dependence must cancel: {sh}");
        }
        let back = sh.restrict(&[(-14, 10), (-14, 10), (0, 0)]).merge_variable("z", "z1", &q(0)).unwrap();
        assert!(back.agrees_with(&inv2.restrict(back.window())).unwrap());
    }

    #[test]
    fn scale_examples() {
        let s = poly(&[((1, -1), 1)], (-4, 4));
        assert_eq!(s.scale_substitute(&q(1)).unwrap(), s);
        assert_eq!(s.scale_substitute(&q(2)).unwrap(), s);
        assert_eq!(s.scale_substitute(&q(0)), Err(Error::ZeroScale));
        let w = [(-12, 12), (-12, 12)];
        let inv2 = MultiSeries::binomial(&["z1", "z2"], &dom12(), &w, "z1", "z2", -2).unwrap();
        let sc = inv2.scale_substitute_var("z").unwrap();
        for e in sc.terms().keys() {
            assert_eq!(e[2], -2);
        }
        assert_eq!(inv2.scale_substitute(&qf(1, 3)).unwrap(), inv2.scale(&q(9)));
    }

    #[test]
    fn evaluate_examples() {
        let w = [(-40, 40), (-40, 40)];
        let one = MultiSeries::constant(&["z1", "z2"], &dom12(), &w, q(1)).unwrap();
        let mut pt = HashMap::new();
        pt.insert("z1".to_string(), C64::new(2.0, 0.0));
        pt.insert("z2".to_string(), C64::new(1.0, 0.0));
        assert_eq!(one.evaluate(&pt).unwrap(), C64::new(1.0, 0.0));
        let inv = MultiSeries::binomial(&["z1", "z2"], &dom12(), &[(-40, 40), (-40, 20)], "z1", "z2", -1).unwrap();
        let (v, tail) = inv.evaluate_with_tail(&pt).unwrap();
        assert!((v - C64::new(1.0, 0.0)).norm() < 1e-6);
        assert!(!tail.is_slow(1e-6));
        pt.insert("z1".to_string(), C64::new(1.01, 0.0));
        let (v, tail) = inv.evaluate_with_tail(&pt).unwrap();
        assert!((v - C64::new(100.0, 0.0)).norm() > 1.0);
        assert!(tail.is_slow(1e-6));
        pt.insert("z1".to_string(), C64::new(0.5, 0.0));
        assert!(matches!(inv.evaluate(&pt), Err(Error::DomainViolation(_))));
    }

    #[test]
    fn evaluate_double_pole_within_first_dropped_term() {
        let inv2 = MultiSeries::binomial(&["z1", "z2"], &dom12(), &[(-60, 0), (0, 30)], "z1", "z2", -2).unwrap();
        let mut pt = HashMap::new();
        let (a, b) = (C64::new(1.5, 0.5), C64::new(0.4, -0.3));
        pt.insert("z1".to_string(), a);
        pt.insert("z2".to_string(), b);
        let exact = (a - b).powi(-2);
        let v = inv2.evaluate(&pt).unwrap();
        // geometric tail bound Σ_{k>30} (k+1) r^k / |z1|^2
        let r = b.norm() / a.norm();
        let tail: f64 = (31..400).map(|k| (k as f64 + 1.0) * r.powi(k)).sum::<f64>() / a.norm().powi(2);
        assert!((v - exact).norm() <= tail);
    }

    #[test]
    fn merge_variable_sets_value() {
        let mut s = MultiSeries::zero(&["z1", "z2"], &dom12(), &[(0, 6), (2, 2)]).unwrap();
        s.add_term(vec![1, 2], q(1));
        let m = s.merge_variable("z2", "z1", &q(-1)).unwrap();
        assert_eq!(m.window(), &[(2, 8)]);
        assert_eq!(m.coefficient(&[3]), q(1));
    }
}

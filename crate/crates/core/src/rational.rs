//! Closed forms `Σ c · Π zᵢ^{aᵢ} · Π_{i<j} (zᵢ - zⱼ)^{eᵢⱼ}` and their expansion
//! in any domain.
//!
//! Free-boson correlators are computed here by Wick contraction, which gives
//! an answer that does not depend on any ordering of the variables. The
//! same function can then be expanded in several domains and compared.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::graded::{FockState, GradedVector};
use crate::series::{binom, ExpansionDomain, MultiSeries, Range};
use crate::{q_to_f64, C64, Q};

/// Exponent data of one term. Difference factors are keyed by `(i, j)` with
/// `i < j` in variable order and never carry a zero exponent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FormKey {
    pub mono: Vec<i64>,
    pub diffs: BTreeMap<(usize, usize), i64>,
}

/// Work item of the shift expansion: next factor, powers of `w` used so
/// far, monomial, difference factors, coefficient.
type Partial = (usize, i64, Vec<i64>, Vec<((usize, usize), i64)>, Q);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalForm {
    vars: Vec<String>,
    terms: BTreeMap<FormKey, Q>,
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}

fn q_pow(x: &Q, e: i64) -> Result<Q> {
    if e < 0 && x.is_zero() {
        return Err(Error::DivisionByZero("pole".into()));
    }
    let mut r = Q::one();
    let b = if e < 0 { x.recip() } else { x.clone() };
    for _ in 0..e.unsigned_abs() {
        r *= &b;
    }
    Ok(r)
}

impl RationalForm {
    pub fn zero<S: AsRef<str>>(vars: &[S]) -> Result<Self> {
        let vars: Vec<String> = vars.iter().map(|s| s.as_ref().to_string()).collect();
        ExpansionDomain::new(&vars)?;
        Ok(Self { vars, terms: BTreeMap::new() })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn terms(&self) -> &BTreeMap<FormKey, Q> {
        &self.terms
    }

    /// True when no terms remain. Cancellation between distinct keys that
    /// are equal as functions is not detected; expand to compare instead.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn var_index(&self, v: &str) -> Result<usize> {
        self.vars.iter().position(|x| x == v).ok_or_else(|| Error::UnknownVariable(v.into()))
    }

    /// Adds `c · Π z^mono · Π (zᵢ - zⱼ)^e`. Pairs may be given in either order.
    pub fn add_term(&mut self, mono: Vec<i64>, diffs: &[((usize, usize), i64)], c: Q) {
        if c.is_zero() {
            return;
        }
        let mut c = c;
        let mut map: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for &((i, j), e) in diffs {
            assert!(i != j, "difference of a variable with itself");
            let key = if i < j {
                (i, j)
            } else {
                if e % 2 != 0 {
                    c = -c;
                }
                (j, i)
            };
            *map.entry(key).or_insert(0) += e;
        }
        map.retain(|_, e| *e != 0);
        let key = FormKey { mono, diffs: map };
        let slot = self.terms.entry(key.clone()).or_insert_with(Q::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&key);
        }
    }

    fn check_vars(&self, other: &Self) -> Result<()> {
        if self.vars != other.vars {
            return Err(Error::DomainMismatch(format!("variables {:?} vs {:?}", self.vars, other.vars)));
        }
        Ok(())
    }

    pub fn combine(&self, other: &Self, c: &Q) -> Result<Self> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            let d: Vec<_> = k.diffs.iter().map(|(p, e)| (*p, *e)).collect();
            out.add_term(k.mono.clone(), &d, v * c);
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, &Q::one())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, &-Q::one())
    }

    pub fn scale(&self, c: &Q) -> Self {
        let mut out = Self { vars: self.vars.clone(), terms: BTreeMap::new() };
        if c.is_zero() {
            return out;
        }
        for (k, v) in &self.terms {
            out.terms.insert(k.clone(), v * c);
        }
        out
    }

    /// Re-expresses the form over `vars`, which must contain the current
    /// variables. Variables not already present get exponent zero.
    pub fn embed<S: AsRef<str>>(&self, vars: &[S]) -> Result<Self> {
        let mut out = Self::zero(vars)?;
        let map: Vec<usize> = self.vars.iter().map(|v| out.var_index(v)).collect::<Result<_>>()?;
        for (k, c) in &self.terms {
            let mut mono = vec![0; out.vars.len()];
            for (i, &e) in k.mono.iter().enumerate() {
                mono[map[i]] = e;
            }
            let d: Vec<_> = k.diffs.iter().map(|(&(i, j), &e)| ((map[i], map[j]), e)).collect();
            out.add_term(mono, &d, c.clone());
        }
        Ok(out)
    }

    /// Product. Variables of `other` not in `self` are appended.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let mut vars = self.vars.clone();
        for v in &other.vars {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
        let a = self.embed(&vars)?;
        let b = other.embed(&vars)?;
        let mut out = Self::zero(&vars)?;
        for (ka, ca) in &a.terms {
            for (kb, cb) in &b.terms {
                let mono = ka.mono.iter().zip(&kb.mono).map(|(x, y)| x + y).collect();
                let d: Vec<_> = ka.diffs.iter().chain(kb.diffs.iter()).map(|(p, e)| (*p, *e)).collect();
                out.add_term(mono, &d, ca * cb);
            }
        }
        Ok(out)
    }

    /// Renames variables; the variable order is kept.
    pub fn rename(&self, map: &HashMap<String, String>) -> Result<Self> {
        let vars: Vec<String> = self.vars.iter().map(|v| map.get(v).cloned().unwrap_or_else(|| v.clone())).collect();
        ExpansionDomain::new(&vars)?;
        Ok(Self { vars, terms: self.terms.clone() })
    }

    /// Highest pole order along each `zᵢ = zⱼ` and each `zᵢ = 0`, read off
    /// the term exponents. The zero locus is keyed by `(zᵢ, "0")`.
    pub fn pole_orders(&self) -> BTreeMap<(String, String), i64> {
        let mut out = BTreeMap::new();
        for k in self.terms.keys() {
            for (&(i, j), &e) in &k.diffs {
                if e < 0 {
                    let slot = out.entry((self.vars[i].clone(), self.vars[j].clone())).or_insert(0);
                    *slot = (*slot).max(-e);
                }
            }
            for (i, &e) in k.mono.iter().enumerate() {
                if e < 0 {
                    let slot = out.entry((self.vars[i].clone(), "0".to_string())).or_insert(0);
                    *slot = (*slot).max(-e);
                }
            }
        }
        out
    }

    fn point_values<T: Clone>(&self, point: &HashMap<String, T>) -> Result<Vec<T>> {
        self.vars.iter().map(|v| point.get(v).cloned().ok_or_else(|| Error::UnknownVariable(v.clone()))).collect()
    }

    pub fn evaluate(&self, point: &HashMap<String, C64>) -> Result<C64> {
        let x = self.point_values(point)?;
        let mut total = C64::new(0.0, 0.0);
        for (k, c) in &self.terms {
            let mut t = C64::new(q_to_f64(c), 0.0);
            for (i, &e) in k.mono.iter().enumerate() {
                if e < 0 && x[i].norm() == 0.0 {
                    return Err(Error::DivisionByZero(self.vars[i].clone()));
                }
                t *= x[i].powi(e as i32);
            }
            for (&(i, j), &e) in &k.diffs {
                let d = x[i] - x[j];
                if e < 0 && d.norm() == 0.0 {
                    return Err(Error::DivisionByZero(format!("{}-{}", self.vars[i], self.vars[j])));
                }
                t *= d.powi(e as i32);
            }
            total += t;
        }
        Ok(total)
    }

    pub fn evaluate_exact(&self, point: &HashMap<String, Q>) -> Result<Q> {
        let x = self.point_values(point)?;
        let mut total = Q::zero();
        for (k, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in k.mono.iter().enumerate() {
                t *= q_pow(&x[i], e).map_err(|_| Error::DivisionByZero(self.vars[i].clone()))?;
            }
            for (&(i, j), &e) in &k.diffs {
                t *= q_pow(&(&x[i] - &x[j]), e)
                    .map_err(|_| Error::DivisionByZero(format!("{}-{}", self.vars[i], self.vars[j])))?;
            }
            total += t;
        }
        Ok(total)
    }

    /// Substitutes `var = base + w` and expands in `w`, valid for `|w|`
    /// smaller than `|base|` and than every `|base - zⱼ|`. The result lives
    /// on the same variable list with `var` renamed to `w` and keeps every
    /// term of total `w`-degree at most `order`.
    pub fn shift_expand(&self, var: &str, base: &str, w: &str, order: i64) -> Result<Self> {
        let iv = self.var_index(var)?;
        let ib = self.var_index(base)?;
        if iv == ib {
            return Err(Error::VariableCollision(var.into()));
        }
        let mut vars = self.vars.clone();
        vars[iv] = w.to_string();
        let mut out = Self::zero(&vars)?;
        for (key, c) in &self.terms {
            // fixed part: everything not involving var, plus (var - base)^e = w^e
            let mut mono = key.mono.clone();
            let a = mono[iv];
            mono[iv] = 0;
            let mut coeff = c.clone();
            let mut fixed = Vec::new();
            // expandable factors: (exponent, other variable or None for the monomial)
            let mut series: Vec<(i64, Option<usize>)> = Vec::new();
            if a != 0 {
                series.push((a, None));
            }
            for (&(i, j), &e) in &key.diffs {
                if i != iv && j != iv {
                    fixed.push(((i, j), e));
                    continue;
                }
                // orient as (var - other)^e
                let other = if i == iv { j } else { i };
                if i != iv && e % 2 != 0 {
                    coeff = -coeff;
                }
                if other == ib {
                    mono[iv] += e;
                } else {
                    series.push((e, Some(other)));
                }
            }
            let budget = order - mono[iv];
            if budget < 0 {
                continue;
            }
            // distribute at most `budget` powers of w over the factors
            let mut stack: Vec<Partial> = vec![(0, 0, mono.clone(), fixed.clone(), coeff.clone())];
            while let Some((idx, used, m, d, cc)) = stack.pop() {
                if idx == series.len() {
                    out.add_term(m, &d, cc);
                    continue;
                }
                let (e, other) = series[idx];
                for k in 0..=(budget - used) {
                    let b = binom(e, k as u64);
                    if b.is_zero() {
                        if e >= 0 {
                            break;
                        }
                        continue;
                    }
                    let mut m2 = m.clone();
                    let mut d2 = d.clone();
                    m2[iv] += k;
                    match other {
                        None => m2[ib] += e - k,
                        Some(o) => d2.push(((ib, o), e - k)),
                    }
                    stack.push((idx + 1, used + k, m2, d2, &cc * Q::from_integer(b)));
                }
            }
        }
        Ok(out)
    }

    /// Laurent expansion in `domain`, exact on the rectangular `window`.
    ///
    /// Each difference factor is expanded as a binomial series in the ratio
    /// of its smaller to its larger variable. A partial product is dropped
    /// once some tail sum `S_p = Σ_{pos ≥ p} exponent` can no longer come back
    /// under the window: the factors still to be multiplied can lower `S_p`
    /// by at most a known amount.
    pub fn expand(&self, domain: &ExpansionDomain, window: &[Range]) -> Result<MultiSeries> {
        let mut out = MultiSeries::zero(&self.vars, domain, window)?;
        let n = self.vars.len();
        let pos: Vec<usize> = self
            .vars
            .iter()
            .map(|v| domain.position(v).ok_or_else(|| Error::UnknownVariable(v.clone())))
            .collect::<Result<_>>()?;
        // cap[p] = Σ_{pos ≥ p} hi
        let mut cap = vec![0i64; n + 1];
        for (k, &p) in pos.iter().enumerate() {
            for slot in cap.iter_mut().take(p + 1) {
                *slot += window[k].1;
            }
        }
        let tail = |e: &[i64], p: usize| -> i64 { (0..n).filter(|&k| pos[k] >= p).map(|k| e[k]).sum() };

        for (key, c) in &self.terms {
            // (big, small, exponent, sign)
            let mut factors = Vec::new();
            let mut coeff = c.clone();
            for (&(i, j), &e) in &key.diffs {
                if pos[i] < pos[j] {
                    factors.push((i, j, e));
                } else {
                    if e % 2 != 0 {
                        coeff = -coeff;
                    }
                    factors.push((j, i, e));
                }
            }
            let min_of = |f: &(usize, usize, i64), p: usize| -> i64 {
                if pos[f.0] >= p {
                    f.2
                } else {
                    0
                }
            };
            let mut rem: Vec<i64> = (0..=n).map(|p| factors.iter().map(|f| min_of(f, p)).sum()).collect();
            let fits = |e: &[i64], rem: &[i64]| (0..=n).all(|p| tail(e, p) + rem[p] <= cap[p]);

            let mut partial: BTreeMap<Vec<i64>, Q> = BTreeMap::new();
            if fits(&key.mono, &rem) {
                partial.insert(key.mono.clone(), coeff);
            }
            for f in &factors {
                for (p, r) in rem.iter_mut().enumerate() {
                    *r -= min_of(f, p);
                }
                let (big, small, e) = *f;
                let mut next: BTreeMap<Vec<i64>, Q> = BTreeMap::new();
                for (exps, pc) in &partial {
                    let mut k: u64 = 0;
                    loop {
                        if e >= 0 && k as i64 > e {
                            break;
                        }
                        let mut ne = exps.clone();
                        ne[big] += e - k as i64;
                        ne[small] += k as i64;
                        if !fits(&ne, &rem) {
                            break;
                        }
                        let mut b = Q::from_integer(binom(e, k));
                        if k % 2 == 1 {
                            b = -b;
                        }
                        let slot = next.entry(ne).or_insert_with(Q::zero);
                        *slot += pc * b;
                        k += 1;
                    }
                }
                next.retain(|_, v| !v.is_zero());
                partial = next;
            }
            for (e, v) in partial {
                out.add_term(e, v);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for RationalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (i, &e) in k.mono.iter().enumerate() {
                if e != 0 {
                    write!(f, "*{}^{}", self.vars[i], e)?;
                }
            }
            for (&(i, j), &e) in &k.diffs {
                write!(f, "*({}-{})^{}", self.vars[i], self.vars[j], e)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Theta(u32),
    Insertion(usize, u32),
}

/// `(θ, γ_{g₁}(z₁) ⋯ γ_{gₙ}(zₙ) 𝟙)` as a closed form, by Wick contraction.
///
/// Each state contributes one slot per mode. Two modes of the same
/// insertion never contract (normal ordering), nor do two modes of `θ`.
pub fn wick(theta: &GradedVector, insertions: &[(GradedVector, String)]) -> Result<RationalForm> {
    let vars: Vec<&str> = insertions.iter().map(|(_, v)| v.as_str()).collect();
    let mut out = RationalForm::zero(&vars)?;
    let n = insertions.len();
    // multilinear expansion over basis components
    let mut choices: Vec<(Vec<FockState>, Q)> = vec![(Vec::new(), Q::one())];
    for (g, _) in insertions {
        let mut next = Vec::new();
        for (states, c) in &choices {
            for (s, gc) in g.iter() {
                let mut st = states.clone();
                st.push(s.clone());
                next.push((st, c * gc));
            }
        }
        choices = next;
    }
    for (t, tc) in theta.iter() {
        for (states, c) in &choices {
            let mut slots: Vec<Slot> = t.parts().iter().map(|&m| Slot::Theta(m)).collect();
            for (i, s) in states.iter().enumerate() {
                slots.extend(s.parts().iter().map(|&k| Slot::Insertion(i, k)));
            }
            if slots.len() % 2 == 1 {
                continue;
            }
            let mut used = vec![false; slots.len()];
            let mut acc = Acc { mono: vec![0; n], diffs: Vec::new(), coeff: c * tc };
            matchings(&slots, &mut used, &mut acc, &mut out);
        }
    }
    Ok(out)
}

struct Acc {
    mono: Vec<i64>,
    diffs: Vec<((usize, usize), i64)>,
    coeff: Q,
}

fn matchings(slots: &[Slot], used: &mut [bool], acc: &mut Acc, out: &mut RationalForm) {
    let Some(first) = used.iter().position(|u| !u) else {
        out.add_term(acc.mono.clone(), &acc.diffs, acc.coeff.clone());
        return;
    };
    used[first] = true;
    for other in first + 1..slots.len() {
        if used[other] {
            continue;
        }
        let saved_coeff = acc.coeff.clone();
        let mut pushed_diff = false;
        let mut mono_change = None;
        let value = match (slots[first], slots[other]) {
            (Slot::Theta(_), Slot::Theta(_)) => None,
            (Slot::Insertion(i, _), Slot::Insertion(j, _)) if i == j => None,
            (Slot::Theta(m), Slot::Insertion(i, k)) | (Slot::Insertion(i, k), Slot::Theta(m)) => {
                let b = binom(m as i64 - 1, (k - 1) as u64);
                if b.is_zero() {
                    None
                } else {
                    mono_change = Some((i, m as i64 - k as i64));
                    Some(Q::from_integer(b * m))
                }
            }
            (Slot::Insertion(i, k), Slot::Insertion(j, l)) => {
                let mut c = factorial((k + l - 1) as u64) / (factorial((k - 1) as u64) * factorial((l - 1) as u64));
                if k % 2 == 0 {
                    c = -c;
                }
                acc.diffs.push(((i, j), -(k as i64) - l as i64));
                pushed_diff = true;
                Some(Q::from_integer(c))
            }
        };
        if let Some(v) = value {
            acc.coeff *= v;
            if let Some((i, d)) = mono_change {
                acc.mono[i] += d;
            }
            used[other] = true;
            matchings(slots, used, acc, out);
            used[other] = false;
            if let Some((i, d)) = mono_change {
                acc.mono[i] -= d;
            }
        }
        if pushed_diff {
            acc.diffs.pop();
        }
        acc.coeff = saved_coeff;
    }
    used[first] = false;
}

/// Largest absolute coefficient, for reports.
pub fn max_abs_coefficient(f: &RationalForm) -> Q {
    f.terms.values().map(|c| c.abs()).max().unwrap_or_else(Q::zero)
}

//! Epsilon-sewing of two correlators.
//!
//! The weight-`l` coefficient is `ℛ_l = Σ_{(g,ḡ)} F_L(…; g) · F_R(…; ḡ)` over a
//! pair of dual bases of the weight-`l` space. Two placements of the sewing
//! states are supported:
//!
//! * [`SewingMode::Annulus`]: `g` sits at `ζ₁` in the last slot of the left
//!   factor and `ḡ` at `ζ₂` in the last slot of the right factor. Both stay
//!   formal variables of the coefficient series; numerically `ζ₂ = ε/ζ₁`.
//! * [`SewingMode::Puncture`]: `g` is the right state of the left factor and
//!   `ḡ` the functional of the right factor. Then `Σ_l ε^l ℛ_l` equals the
//!   merged correlator with the right points scaled by `ε`.

use std::collections::{BTreeMap, HashMap};

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::correlators::{radial_chain_from, CorrelatorSpec};
use crate::error::{Error, Result};
use crate::graded::{
    dual_basis, dual_pairs, partitions_of, pow_q, translation, translation_adjoint, GradedVector, Weight,
};
use crate::perm::{inverse_shuffles, Permutation};
use crate::rational::{wick, RationalForm};
use crate::series::{ExpansionDomain, MultiSeries, Range};
use crate::{C64, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SewingMode {
    Annulus,
    Puncture,
}

/// Numeric data: the point of evaluation and the radii of the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericSewing {
    pub epsilon: C64,
    pub zeta1: C64,
    pub rho1: f64,
    pub rho2: f64,
    pub r: f64,
    /// Values of the left and right insertion variables.
    pub point: HashMap<String, C64>,
    /// Polar grid used for suprema: `(radii, angles)`.
    pub grid: (usize, usize),
}

impl NumericSewing {
    pub fn zeta2(&self) -> C64 {
        self.epsilon / self.zeta1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SewingConfig {
    pub left: CorrelatorSpec,
    pub right: CorrelatorSpec,
    pub mode: SewingMode,
    pub weight_cutoff: Weight,
    pub left_window: Vec<Range>,
    pub right_window: Vec<Range>,
    /// Window of `ζ₁` and `ζ₂` in annulus mode.
    pub zeta_window: Range,
    pub zeta_names: (String, String),
    pub numeric: Option<NumericSewing>,
}

impl SewingConfig {
    pub const DEFAULT_CUTOFF: Weight = 8;

    pub fn new(left: CorrelatorSpec, right: CorrelatorSpec, mode: SewingMode) -> Self {
        let left_window = vec![(-10, 4); left.n()];
        let right_window = vec![(-10, 4); right.n()];
        Self {
            left,
            right,
            mode,
            weight_cutoff: Self::DEFAULT_CUTOFF,
            left_window,
            right_window,
            zeta_window: (-2, 8),
            zeta_names: ("zeta1".into(), "zeta2".into()),
            numeric: None,
        }
    }

    pub fn with_cutoff(mut self, l: Weight) -> Self {
        self.weight_cutoff = l;
        self
    }

    pub fn with_windows(mut self, left: Vec<Range>, right: Vec<Range>) -> Self {
        self.left_window = left;
        self.right_window = right;
        self
    }

    pub fn with_numeric(mut self, numeric: NumericSewing) -> Self {
        self.numeric = Some(numeric);
        self
    }

    /// Total number of attached series slots of both factors.
    pub fn slots(&self) -> usize {
        self.left.m + self.right.m
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = self.left.vars();
        names.extend(self.right.vars());
        names.push(self.zeta_names.0.clone());
        names.push(self.zeta_names.1.clone());
        ExpansionDomain::new(&names)?;
        if self.left_window.len() != self.left.n() {
            return Err(Error::SizeMismatch { got: self.left_window.len(), expected: self.left.n() });
        }
        if self.right_window.len() != self.right.n() {
            return Err(Error::SizeMismatch { got: self.right_window.len(), expected: self.right.n() });
        }
        if let Some(num) = &self.numeric {
            let bound = num.rho1 * num.rho2;
            let eps = num.epsilon.norm();
            if !(eps <= num.r && num.r < bound) {
                return Err(Error::Annulus { eps, bound });
            }
            if self.mode == SewingMode::Annulus {
                if num.zeta1.norm() == 0.0 {
                    return Err(Error::DivisionByZero(self.zeta_names.0.clone()));
                }
                if num.zeta1.norm() > num.rho1 || num.zeta2().norm() > num.rho2 {
                    return Err(Error::Annulus { eps, bound });
                }
            }
        }
        Ok(())
    }

    fn left_slot(&self, g: &GradedVector) -> Vec<(GradedVector, String)> {
        let mut ins = self.left.insertions.clone();
        ins.push((g.clone(), self.zeta_names.0.clone()));
        ins
    }

    fn right_slot(&self, g: &GradedVector) -> Vec<(GradedVector, String)> {
        let mut ins = self.right.insertions.clone();
        ins.push((g.clone(), self.zeta_names.1.clone()));
        ins
    }

    /// Variables of the coefficient series.
    pub fn series_vars(&self) -> Vec<String> {
        let mut v = self.left.vars();
        if self.mode == SewingMode::Annulus {
            v.push(self.zeta_names.0.clone());
        }
        v.extend(self.right.vars());
        if self.mode == SewingMode::Annulus {
            v.push(self.zeta_names.1.clone());
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyBounds {
    pub m1: f64,
    pub r1: f64,
    pub m2: f64,
    pub r2: f64,
    pub m: f64,
    pub r: f64,
    /// Sample index and grid point where the larger supremum was attained.
    pub argmax: (usize, C64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SewedResult {
    pub mode: SewingMode,
    pub weight_cutoff: Weight,
    pub slots: usize,
    /// `ℛ_l` as exact series, for `l = 0..=L`.
    pub coefficients: BTreeMap<Weight, MultiSeries>,
    /// `ℛ_l` as closed forms over the series variables plus both `ζ`.
    pub forms: BTreeMap<Weight, RationalForm>,
    /// `ℛ_l` at the configured point, numeric mode only.
    pub values: Option<Vec<C64>>,
    /// Running sums of `ε^l ℛ_l`, numeric mode only.
    pub partial_sums: Option<Vec<C64>>,
    pub bounds: Option<CauchyBounds>,
}

/// Dual pairs of one weight space.
pub type PairSource<'a> = dyn Fn(Weight) -> Result<Vec<(GradedVector, GradedVector)>> + 'a;

fn standard_pairs(l: Weight) -> Result<Vec<(GradedVector, GradedVector)>> {
    dual_basis(l, l)
}

fn left_series(cfg: &SewingConfig, g: &GradedVector) -> Result<MultiSeries> {
    let (ins, start, window, vars) = match cfg.mode {
        SewingMode::Annulus => {
            let mut w = cfg.left_window.clone();
            w.push(cfg.zeta_window);
            (cfg.left_slot(g), GradedVector::vacuum(), w, {
                let mut v = cfg.left.vars();
                v.push(cfg.zeta_names.0.clone());
                v
            })
        }
        SewingMode::Puncture => (cfg.left.insertions.clone(), g.clone(), cfg.left_window.clone(), cfg.left.vars()),
    };
    let terms = radial_chain_from(&cfg.left.theta, &ins, &start, &window, None)?;
    let mut s = MultiSeries::zero(&vars, &ExpansionDomain::new(&vars)?, &window)?;
    for (e, c) in terms {
        s.add_term(e, c);
    }
    Ok(s)
}

fn right_series(cfg: &SewingConfig, gbar: &GradedVector) -> Result<MultiSeries> {
    let (theta, ins, window, vars) = match cfg.mode {
        SewingMode::Annulus => {
            let mut w = cfg.right_window.clone();
            w.push(cfg.zeta_window);
            let mut v = cfg.right.vars();
            v.push(cfg.zeta_names.1.clone());
            (cfg.right.theta.clone(), cfg.right_slot(gbar), w, v)
        }
        SewingMode::Puncture => {
            (gbar.clone(), cfg.right.insertions.clone(), cfg.right_window.clone(), cfg.right.vars())
        }
    };
    let terms = radial_chain_from(&theta, &ins, &GradedVector::vacuum(), &window, None)?;
    let mut s = MultiSeries::zero(&vars, &ExpansionDomain::new(&vars)?, &window)?;
    for (e, c) in terms {
        s.add_term(e, c);
    }
    Ok(s)
}

fn left_form(cfg: &SewingConfig, g: &GradedVector) -> Result<RationalForm> {
    // in puncture mode the state sits at ζ₁ and is evaluated at ζ₁ = 0
    wick(&cfg.left.theta, &cfg.left_slot(g))
}

fn right_form(cfg: &SewingConfig, gbar: &GradedVector) -> Result<RationalForm> {
    match cfg.mode {
        SewingMode::Annulus => wick(&cfg.right.theta, &cfg.right_slot(gbar)),
        SewingMode::Puncture => wick(gbar, &cfg.right.insertions),
    }
}

fn form_vars(cfg: &SewingConfig) -> Vec<String> {
    let mut v = cfg.left.vars();
    v.push(cfg.zeta_names.0.clone());
    v.extend(cfg.right.vars());
    v.push(cfg.zeta_names.1.clone());
    v
}

/// Numeric point for closed forms: insertion values plus both `ζ`.
pub fn form_point(cfg: &SewingConfig, num: &NumericSewing, point: &HashMap<String, C64>) -> HashMap<String, C64> {
    let mut p = point.clone();
    match cfg.mode {
        SewingMode::Annulus => {
            p.insert(cfg.zeta_names.0.clone(), num.zeta1);
            p.insert(cfg.zeta_names.1.clone(), num.zeta2());
        }
        SewingMode::Puncture => {
            p.insert(cfg.zeta_names.0.clone(), C64::new(0.0, 0.0));
            p.insert(cfg.zeta_names.1.clone(), C64::new(0.0, 0.0));
        }
    }
    p
}

/// `Σ_{l ≤ L} ε^l Σ_{(g,ḡ)} F_L(…; g) F_R(…; ḡ)` with the standard dual bases.
pub fn sew_product(cfg: &SewingConfig) -> Result<SewedResult> {
    sew_with_pairs(cfg, &standard_pairs)
}

/// [`sew_product`] with caller-supplied dual pairs per weight.
pub fn sew_with_pairs(cfg: &SewingConfig, pairs: &PairSource<'_>) -> Result<SewedResult> {
    cfg.validate()?;
    let vars = cfg.series_vars();
    let mut window = cfg.left_window.clone();
    if cfg.mode == SewingMode::Annulus {
        window.push(cfg.zeta_window);
    }
    window.extend(cfg.right_window.iter().copied());
    if cfg.mode == SewingMode::Annulus {
        window.push(cfg.zeta_window);
    }
    let domain = ExpansionDomain::new(&vars)?;
    let fvars = form_vars(cfg);
    let mut coefficients = BTreeMap::new();
    let mut forms = BTreeMap::new();
    for l in 0..=cfg.weight_cutoff {
        let mut acc = MultiSeries::zero(&vars, &domain, &window)?;
        let mut form = RationalForm::zero(&fvars)?;
        for (g, gbar) in pairs(l)? {
            let ls = left_series(cfg, &g)?;
            let rs = right_series(cfg, &gbar)?;
            acc = acc.add(&ls.tensor(&rs)?)?;
            let f = left_form(cfg, &g)?.mul(&right_form(cfg, &gbar)?)?.embed(&fvars)?;
            form = form.add(&f)?;
        }
        coefficients.insert(l, acc);
        forms.insert(l, form);
    }
    let mut res = SewedResult {
        mode: cfg.mode,
        weight_cutoff: cfg.weight_cutoff,
        slots: cfg.slots(),
        coefficients,
        forms,
        values: None,
        partial_sums: None,
        bounds: None,
    };
    if let Some(num) = &cfg.numeric {
        let p = form_point(cfg, num, &num.point);
        let values: Vec<C64> = res.forms.values().map(|f| f.evaluate(&p)).collect::<Result<_>>()?;
        let mut sums = Vec::with_capacity(values.len());
        let mut acc = C64::new(0.0, 0.0);
        for (l, v) in values.iter().enumerate() {
            acc += num.epsilon.powi(l as i32) * v;
            sums.push(acc);
        }
        res.values = Some(values);
        res.partial_sums = Some(sums);
    }
    Ok(res)
}

/// Coefficient of `ε^l`.
pub fn epsilon_coefficients(res: &SewedResult, l: Weight) -> Result<MultiSeries> {
    if l > res.weight_cutoff {
        return Err(Error::BeyondCutoff { l, cutoff: res.weight_cutoff });
    }
    Ok(res.coefficients[&l].clone())
}

/// The same data indexed by the shifted exponent `p = l - m - 1`, with `m`
/// the number of attached slots. `None` when `p` maps below weight zero.
pub fn shifted_coefficients(res: &SewedResult, p: i64) -> Result<Option<MultiSeries>> {
    let l = p + res.slots as i64 + 1;
    if l < 0 {
        return Ok(None);
    }
    epsilon_coefficients(res, l as Weight).map(Some)
}

/// `Σ_l ε^l ℛ_l` as a series with `ε` adjoined as the smallest variable.
pub fn resum(res: &SewedResult, eps: &str) -> Result<MultiSeries> {
    let first = &res.coefficients[&0];
    let mut out = first.adjoin_smallest(eps, (0, res.weight_cutoff as i64))?.empty_like();
    for (l, s) in &res.coefficients {
        for (e, c) in s.terms() {
            let mut e2 = e.clone();
            e2.push(*l as i64);
            out.add_term(e2, c.clone());
        }
    }
    Ok(out)
}

/// Closed forms of `res` expanded in the sewing domain and window. In
/// puncture mode the `ζ`-free slice is kept, which is the value at `ζ = 0`.
pub fn expand_forms(cfg: &SewingConfig, res: &SewedResult) -> Result<BTreeMap<Weight, MultiSeries>> {
    let fvars = form_vars(cfg);
    let domain = ExpansionDomain::new(&fvars)?;
    let k = cfg.left.n();
    let mut window = cfg.left_window.clone();
    window.push(cfg.zeta_window);
    window.extend(cfg.right_window.iter().copied());
    window.push(cfg.zeta_window);
    if cfg.mode == SewingMode::Puncture {
        window[k] = (0, 0);
        let last = window.len() - 1;
        window[last] = (0, 0);
    }
    let mut out = BTreeMap::new();
    for (l, f) in &res.forms {
        let full = f.expand(&domain, &window)?;
        let s = match cfg.mode {
            SewingMode::Annulus => full,
            SewingMode::Puncture => {
                let vars = cfg.series_vars();
                let w: Vec<Range> = cfg.left_window.iter().chain(cfg.right_window.iter()).copied().collect();
                let mut s = MultiSeries::zero(&vars, &ExpansionDomain::new(&vars)?, &w)?;
                for (e, c) in full.terms() {
                    let mut e2 = e.clone();
                    e2.pop();
                    e2.remove(k);
                    s.add_term(e2, c.clone());
                }
                s
            }
        };
        out.insert(*l, s);
    }
    Ok(out)
}

/// True when the mode-route coefficients equal the expanded closed forms.
pub fn routes_agree(cfg: &SewingConfig, res: &SewedResult) -> Result<bool> {
    let expanded = expand_forms(cfg, res)?;
    Ok(expanded.iter().all(|(l, s)| &res.coefficients[l] == s))
}

fn polar_grid(radius: f64, grid: (usize, usize)) -> Vec<C64> {
    let (nr, na) = grid;
    let mut out = Vec::with_capacity(nr * na);
    for i in 0..nr {
        let rad = radius * (i + 1) as f64 / nr as f64;
        for j in 0..na {
            out.push(C64::from_polar(rad, std::f64::consts::TAU * j as f64 / na as f64));
        }
    }
    out
}

fn sup_on_grid(values: &[Vec<C64>], radius: f64, grid: (usize, usize)) -> (f64, (usize, C64)) {
    let mut best = (0.0, (0, C64::new(0.0, 0.0)));
    for (si, v) in values.iter().enumerate() {
        for t in polar_grid(radius, grid) {
            let mut acc = C64::new(0.0, 0.0);
            let mut tp = C64::new(1.0, 0.0);
            for c in v {
                acc += tp * c;
                tp *= t;
            }
            if acc.norm() > best.0 {
                best = (acc.norm(), (si, t));
            }
        }
    }
    best
}

/// Suprema `M_a` of `|Σ_l t^l ℛ_l|` over `|t| ≤ R_a = ρ_a` and the samples.
///
/// With more grid angles than retained weights, the discrete Fourier
/// inversion on the outer circle gives `|ℛ_l| R_a^l ≤ M_a` exactly.
pub fn cauchy_estimate(
    cfg: &SewingConfig,
    res: &SewedResult,
    samples: &[HashMap<String, C64>],
) -> Result<CauchyBounds> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let num = cfg.numeric.as_ref().ok_or_else(|| Error::Unsupported("cauchy_estimate needs numeric data".into()))?;
    let mut values = Vec::with_capacity(samples.len());
    for s in samples {
        let p = form_point(cfg, num, s);
        let v: Vec<C64> = res.forms.values().map(|f| f.evaluate(&p)).collect::<Result<_>>()?;
        values.push(v);
    }
    let (m1, a1) = sup_on_grid(&values, num.rho1, num.grid);
    let (m2, a2) = sup_on_grid(&values, num.rho2, num.grid);
    Ok(CauchyBounds {
        m1,
        r1: num.rho1,
        m2,
        r2: num.rho2,
        m: m1.min(m2),
        r: num.rho1.max(num.rho2),
        argmax: if m1 >= m2 { a1 } else { a2 },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// `(l, |ℛ_l|, bound)` for every retained weight.
    pub rows: Vec<(Weight, f64, f64)>,
    pub first_violation: Option<Weight>,
    pub violations: usize,
    /// Least-squares slope of `log|ℛ_l ε^l|` against `l` over nonzero terms.
    pub decay_slope: Option<f64>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub fn convergence_check(res: &SewedResult, bounds: &CauchyBounds, epsilon: C64) -> Result<ConvergenceReport> {
    let values =
        res.values.as_ref().ok_or_else(|| Error::Unsupported("convergence_check needs numeric values".into()))?;
    let mut rows = Vec::new();
    let mut first = None;
    let mut violations = 0;
    let mut pts = Vec::new();
    for (l, v) in values.iter().enumerate() {
        // the bound is stated for the shifted index l + m + 1 of ε^{l}
        let shifted = l as f64 + res.slots as f64 + 1.0;
        let bound = bounds.m * bounds.r.powf(-shifted + res.slots as f64 + 1.0);
        let a = v.norm();
        if a > bound * (1.0 + 1e-9) + 1e-300 {
            violations += 1;
            first.get_or_insert(l as Weight);
        }
        rows.push((l as Weight, a, bound));
        let t = a * epsilon.norm().powi(l as i32);
        if t > 0.0 {
            pts.push((l as f64, t.ln()));
        }
    }
    Ok(ConvergenceReport { rows, first_violation: first, violations, decay_slope: fit_slope(&pts) })
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    pub holds: bool,
    pub max_deviation: Q,
    pub compared: usize,
}

/// Compares `Σ_{q ≤ L} (θ, γ(x)… P_q γ(y)…𝟙)` of the merged list with
/// `Σ_l ε^l ℛ_l` in puncture placement, where `ε^l` is read off the
/// weight flowing through the split.
pub fn factorization_check(cfg: &SewingConfig) -> Result<FactorizationReport> {
    factorization_check_with_pairs(cfg, &standard_pairs)
}

pub fn factorization_check_with_pairs(cfg: &SewingConfig, pairs: &PairSource<'_>) -> Result<FactorizationReport> {
    let mut cfg = cfg.clone();
    cfg.mode = SewingMode::Puncture;
    cfg.numeric = None;
    if !cfg.right.theta.eq(&GradedVector::vacuum()) {
        return Err(Error::Unsupported("the right factor must use the vacuum functional".into()));
    }
    let mut wts = Vec::new();
    for (b, _) in &cfg.right.insertions {
        wts.push(b.homogeneous_weight().ok_or_else(|| Error::Unsupported("inhomogeneous insertion".into()))? as i64);
    }
    let res = sew_with_pairs(&cfg, pairs)?;
    let mut ins = cfg.left.insertions.clone();
    ins.extend(cfg.right.insertions.iter().cloned());
    let merged = CorrelatorSpec::new(ins)?.with_theta(cfg.left.theta.clone());
    let window: Vec<Range> = cfg.left_window.iter().chain(cfg.right_window.iter()).copied().collect();
    let k = cfg.left.n();
    let d =
        crate::correlators::insertion_sum_d(&merged, k, cfg.weight_cutoff, &crate::correlators::Cutoffs { window })?;
    let level = |e: &[i64]| -> i64 { e[k..].iter().zip(&wts).map(|(f, w)| f + w).sum() };
    let mut worst = Q::zero();
    let mut compared = 0;
    let mut seen = std::collections::BTreeSet::new();
    for (e, c) in d.terms() {
        let l = level(e);
        let other = if l >= 0 && l <= cfg.weight_cutoff as i64 {
            res.coefficients[&(l as Weight)].coefficient(e)
        } else {
            Q::zero()
        };
        let dev = num_traits::Signed::abs(&(c - &other));
        worst = worst.max(dev);
        compared += 1;
        seen.insert((l, e.clone()));
    }
    for (l, s) in &res.coefficients {
        for (e, c) in s.terms() {
            if level(e) != *l as i64 || !seen.contains(&(*l as i64, e.clone())) {
                worst = worst.max(num_traits::Signed::abs(c));
                compared += 1;
            }
        }
    }
    Ok(FactorizationReport { holds: worst.is_zero(), max_deviation: worst, compared })
}

/// Pairs `(b, b)` that treat the Gram matrix as the identity. Only useful
/// as a negative control.
pub fn naive_pairs(l: Weight) -> Result<Vec<(GradedVector, GradedVector)>> {
    Ok(partitions_of(l)
        .into_iter()
        .map(|s| (GradedVector::from_state(s.clone()), GradedVector::from_state(s)))
        .collect())
}

/// Dual pairs of a random basis `b'ᵢ = Σⱼ Aᵢⱼ bⱼ` with `A` invertible,
/// seeded per weight.
pub fn random_pairs(seed: u64) -> impl Fn(Weight) -> Result<Vec<(GradedVector, GradedVector)>> {
    move |l: Weight| {
        let std: Vec<GradedVector> = partitions_of(l).into_iter().map(GradedVector::from_state).collect();
        let d = std.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (l as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        loop {
            let a: Vec<Vec<Q>> =
                (0..d).map(|_| (0..d).map(|_| Q::from_integer(rng.gen_range(-3i64..=3).into())).collect()).collect();
            if crate::graded::invert(&a).is_none() {
                continue;
            }
            let basis: Vec<GradedVector> = a
                .iter()
                .map(|row| {
                    let mut v = GradedVector::zero();
                    for (c, b) in row.iter().zip(&std) {
                        v.add_scaled(b, c);
                    }
                    v
                })
                .collect();
            return dual_pairs(&basis);
        }
    }
}

/// Same coefficients under a seeded random change of basis in every weight.
pub fn basis_independence_check(cfg: &SewingConfig, seed: u64) -> Result<bool> {
    let a = sew_product(cfg)?;
    let b = sew_with_pairs(cfg, &random_pairs(seed))?;
    Ok(a.coefficients == b.coefficients)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovariantAction {
    /// `∂` in the `i`-th insertion variable, left factor first.
    Derivative(usize),
    /// `z^K` on every argument, including the sewing points.
    Scale(Q),
    /// Block-preserving permutation of the `k + n` insertions.
    Permutation(Permutation),
}

/// Outcome of a covariance identity on every retained weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub holds: bool,
    pub failing_weights: Vec<Weight>,
    /// The action computed factor-wise and re-sewn.
    pub result: SewedResult,
}

fn split_index(cfg: &SewingConfig, i: usize) -> Result<(bool, usize)> {
    let k = cfg.left.n();
    let total = k + cfg.right.n();
    if i >= total {
        return Err(Error::IndexOutOfRange { index: i, len: total });
    }
    Ok(if i < k { (true, i) } else { (false, i - k) })
}

/// Splits `σ` on `k + n` letters into its two blocks.
fn split_permutation(cfg: &SewingConfig, sigma: &Permutation) -> Result<(Permutation, Permutation)> {
    let k = cfg.left.n();
    let n = cfg.right.n();
    if sigma.len() != k + n {
        return Err(Error::SizeMismatch { got: sigma.len(), expected: k + n });
    }
    let im = sigma.images();
    if im[..k].iter().any(|&j| j >= k) {
        return Err(Error::InvalidPermutation(im.to_vec()));
    }
    let left = Permutation::new(im[..k].to_vec())?;
    let right = Permutation::new(im[k..].iter().map(|j| j - k).collect())?;
    Ok((left, right))
}

fn sum_weights(g: &[(GradedVector, String)]) -> Result<i64> {
    let mut t = 0;
    for (s, _) in g {
        t += s.homogeneous_weight().ok_or_else(|| Error::Unsupported("inhomogeneous insertion".into()))? as i64;
    }
    Ok(t)
}

/// Applies `action` factor-wise, re-sews, and compares with the action
/// taken directly on the sewn coefficients.
///
/// * derivative: `∂_{zᵢ} ℛ_l` against re-sewing with `gᵢ ↦ T gᵢ`;
/// * scale: `s^{Σ wt} ℛ_l(s·)` against `s^{wt θ_L + wt θ_R} ℛ_l`, where
///   the sewing states contribute `2l` (annulus) or `l` on each side (puncture);
/// * permutation: the sewn closed forms with variables permuted, expanded
///   in the new domain, against re-sewing the permuted factors.
pub fn covariant_action(cfg: &SewingConfig, action: &CovariantAction) -> Result<CovarianceReport> {
    let mut failing = Vec::new();
    let result = match action {
        CovariantAction::Derivative(i) => {
            let (on_left, j) = split_index(cfg, *i)?;
            let mut acted = cfg.clone();
            let mut wide = cfg.clone();
            if on_left {
                acted.left.insertions[j].0 = translation(&cfg.left.insertions[j].0);
                wide.left_window[j] = (cfg.left_window[j].0 + 1, cfg.left_window[j].1 + 1);
            } else {
                acted.right.insertions[j].0 = translation(&cfg.right.insertions[j].0);
                wide.right_window[j] = (cfg.right_window[j].0 + 1, cfg.right_window[j].1 + 1);
            }
            let var = if on_left { cfg.left.insertions[j].1.clone() } else { cfg.right.insertions[j].1.clone() };
            let base = sew_product(&wide)?;
            let res = sew_product(&acted)?;
            for (l, s) in &base.coefficients {
                let d = s.partial_derivative(&var)?;
                if !d.agrees_with(&res.coefficients[l])? {
                    failing.push(*l);
                }
            }
            res
        }
        CovariantAction::Scale(s) => {
            if s.is_zero() {
                return Err(Error::ZeroScale);
            }
            let res = sew_product(cfg)?;
            let wt_in = sum_weights(&cfg.left.insertions)? + sum_weights(&cfg.right.insertions)?;
            let wt_theta = |t: &GradedVector| {
                t.homogeneous_weight()
                    .map(|w| w as i64)
                    .ok_or_else(|| Error::Unsupported("inhomogeneous functional".into()))
            };
            let wt_out = wt_theta(&cfg.left.theta)? + wt_theta(&cfg.right.theta)?;
            let mut scaled = res.clone();
            for (l, c) in &res.coefficients {
                let l = *l as i64;
                let (extra_in, extra_out) = match cfg.mode {
                    SewingMode::Annulus => (2 * l, 0),
                    SewingMode::Puncture => (l, l),
                };
                let lhs = c.scale_substitute(s)?.scale(&pow_q(s, wt_in + extra_in));
                let rhs = c.scale(&pow_q(s, wt_out + extra_out));
                if !lhs.agrees_with(&rhs)? {
                    failing.push(l as Weight);
                }
                scaled.coefficients.insert(l as Weight, lhs);
            }
            scaled
        }
        CovariantAction::Permutation(sigma) => {
            let (sl, sr) = split_permutation(cfg, sigma)?;
            let mut acted = cfg.clone();
            acted.left = crate::correlators::permute(&cfg.left, &sl)?;
            acted.right = crate::correlators::permute(&cfg.right, &sr)?;
            acted.left_window = sl.permute(&cfg.left_window)?;
            acted.right_window = sr.permute(&cfg.right_window)?;
            let base = sew_product(cfg)?;
            let res = sew_product(&acted)?;
            // slot i of the acted factor carries variable σ(i)
            let old = form_vars(cfg);
            let new = form_vars(&acted);
            let rename: HashMap<String, String> = old.iter().cloned().zip(new.iter().cloned()).collect();
            let mut renamed = base.clone();
            for (l, f) in &base.forms {
                renamed.forms.insert(*l, f.rename(&rename)?.embed(&new)?);
            }
            let expanded = expand_forms(&acted, &renamed)?;
            for (l, s) in &expanded {
                if s != &res.coefficients[l] {
                    failing.push(*l);
                }
            }
            res
        }
    };
    Ok(CovarianceReport { holds: failing.is_empty(), failing_weights: failing, result })
}

/// `Σ_v ∂_v ℛ_l` over every series variable, against re-sewing with
/// `θ_L ↦ L₁θ_L` plus re-sewing with `θ_R ↦ L₁θ_R`. Annulus mode only.
pub fn total_derivative_check(cfg: &SewingConfig) -> Result<bool> {
    if cfg.mode != SewingMode::Annulus {
        return Err(Error::Unsupported("total derivative needs both sewing points as variables".into()));
    }
    let vars = cfg.series_vars();
    let mut wide = cfg.clone();
    for w in wide.left_window.iter_mut().chain(wide.right_window.iter_mut()) {
        w.1 += 1;
    }
    wide.zeta_window.1 += 1;
    let res = sew_product(&wide)?;
    let target = sew_product(cfg)?;
    let mut lhs: BTreeMap<Weight, MultiSeries> = BTreeMap::new();
    for (l, s) in &res.coefficients {
        let t = &target.coefficients[l];
        let mut acc = t.empty_like();
        for v in &vars {
            let d = s.partial_derivative(v)?.restrict(t.window());
            for (e, c) in d.terms() {
                acc.add_term(e.clone(), c.clone());
            }
        }
        lhs.insert(*l, acc);
    }
    let mut a = cfg.clone();
    a.left.theta = translation_adjoint(&cfg.left.theta);
    let mut b = cfg.clone();
    b.right.theta = translation_adjoint(&cfg.right.theta);
    let ra = sew_product(&a)?;
    let rb = sew_product(&b)?;
    for (l, s) in &lhs {
        let rhs = ra.coefficients[l].add(&rb.coefficients[l])?;
        if !s.agrees_with(&rhs)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SewnShuffle {
    /// Signed sum per weight, expanded in the unpermuted domain.
    pub sums: BTreeMap<Weight, MultiSeries>,
    /// Number of `(σ_L, σ_R)` pairs; zero means the condition is vacuous.
    pub terms: usize,
}

impl SewnShuffle {
    pub fn vanishes(&self) -> bool {
        self.sums.values().all(MultiSeries::is_zero)
    }
}

/// `Σ_{(σ_L,σ_R) ∈ J⁻¹_{k;s} × J⁻¹_{n;s}} (-1)^{|σ_L|+|σ_R|} σ(ℛ_l)` with
/// each `σ` moving states together with their variables.
pub fn sewn_shuffle_sum(cfg: &SewingConfig, s: usize) -> Result<SewnShuffle> {
    let base = sew_product(cfg)?;
    let mut sums: BTreeMap<Weight, MultiSeries> = base.coefficients.iter().map(|(l, c)| (*l, c.empty_like())).collect();
    let fvars = form_vars(cfg);
    let mut terms = 0;
    for sl in inverse_shuffles(cfg.left.n(), s) {
        for sr in inverse_shuffles(cfg.right.n(), s) {
            let mut acted = cfg.clone();
            acted.left = cfg.left.reorder_pairs(&sl)?;
            acted.right = cfg.right.reorder_pairs(&sr)?;
            acted.left_window = sl.permute(&cfg.left_window)?;
            acted.right_window = sr.permute(&cfg.right_window)?;
            let res = sew_product(&acted)?;
            if !routes_agree(&acted, &res)? {
                return Err(Error::Unsupported("sewn mode expansion disagrees with closed form".into()));
            }
            let mut moved = res.clone();
            for (l, f) in &res.forms {
                moved.forms.insert(*l, f.embed(&fvars)?);
            }
            let expanded = expand_forms(cfg, &moved)?;
            let sign = Q::from_integer((sl.sign() * sr.sign()).into());
            for (l, e) in expanded {
                let acc = sums.get_mut(&l).expect("same weights");
                *acc = acc.combine(&e, &sign)?;
            }
            terms += 1;
        }
    }
    Ok(SewnShuffle { sums, terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{q, qf};

    fn st(p: &[u32]) -> GradedVector {
        GradedVector::basis(p).unwrap()
    }

    fn spec(parts: &[(&[u32], &str)]) -> CorrelatorSpec {
        CorrelatorSpec::new(parts.iter().map(|(p, v)| (st(p), v.to_string())).collect()).unwrap()
    }

    fn current(v: &str) -> CorrelatorSpec {
        spec(&[(&[1], v)])
    }

    fn empty() -> CorrelatorSpec {
        CorrelatorSpec::new(Vec::new()).unwrap()
    }

    fn num(eps: f64, zeta1: f64, rho: f64, point: &[(&str, C64)]) -> NumericSewing {
        NumericSewing {
            epsilon: C64::new(eps, 0.0),
            zeta1: C64::new(zeta1, 0.0),
            rho1: rho,
            rho2: rho,
            r: eps.max(rho * rho * 0.99),
            point: point.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            grid: (8, 16),
        }
    }

    #[test]
    fn vacuum_times_vacuum() {
        for mode in [SewingMode::Annulus, SewingMode::Puncture] {
            let cfg = SewingConfig::new(empty(), empty(), mode).with_cutoff(4);
            let res = sew_product(&cfg).unwrap();
            let c0 = epsilon_coefficients(&res, 0).unwrap();
            assert_eq!(c0.terms().len(), 1);
            assert_eq!(c0.terms().values().next(), Some(&q(1)));
            for l in 1..=4 {
                assert!(epsilon_coefficients(&res, l).unwrap().is_zero());
            }
            assert!(matches!(epsilon_coefficients(&res, 5), Err(Error::BeyondCutoff { .. })));
            assert!(routes_agree(&cfg, &res).unwrap());
        }
    }

    #[test]
    fn weight_zero_term_is_the_plain_product() {
        let left = spec(&[(&[1], "x1"), (&[1], "x2")]);
        let cfg = SewingConfig::new(left.clone(), empty(), SewingMode::Puncture)
            .with_cutoff(0)
            .with_windows(vec![(-8, 0), (0, 6)], vec![]);
        let res = sew_product(&cfg).unwrap();
        let direct =
            crate::correlators::matrix_element(&left, &crate::correlators::Cutoffs { window: vec![(-8, 0), (0, 6)] })
                .unwrap()
                .series;
        assert_eq!(res.coefficients[&0].terms(), direct.terms());
    }

    #[test]
    fn puncture_sewing_of_two_currents() {
        // Σ_l ε^l ℛ_l = ε <a(x) a(εy)>, so ℛ_l has l x^{-l-1} y^{l-1}
        let cfg = SewingConfig::new(current("x"), current("y"), SewingMode::Puncture)
            .with_cutoff(6)
            .with_windows(vec![(-10, 0)], vec![(0, 8)]);
        let res = sew_product(&cfg).unwrap();
        for l in 1..=6i64 {
            let c = &res.coefficients[&(l as Weight)];
            assert_eq!(c.terms().len(), 1);
            assert_eq!(c.coefficient(&[-l - 1, l - 1]), q(l));
        }
        assert!(routes_agree(&cfg, &res).unwrap());
        let f = factorization_check(&cfg).unwrap();
        assert!(f.holds, "{f:?}");
        assert!(f.compared >= 6);
        let bad = factorization_check_with_pairs(&cfg, &naive_pairs).unwrap();
        assert!(!bad.holds);
        assert!(bad.max_deviation > Q::zero());
    }

    #[test]
    fn annulus_weight_one_coefficient() {
        let cfg = SewingConfig::new(current("x"), current("y"), SewingMode::Annulus)
            .with_cutoff(2)
            .with_windows(vec![(-8, 0)], vec![(-8, 0)]);
        let res = sew_product(&cfg).unwrap();
        // single dual pair (a_{-1}1, a_{-1}1): (x-ζ₁)^{-2}(y-ζ₂)^{-2}
        let vars = ["x", "zeta1", "y", "zeta2"];
        let d = ExpansionDomain::new(&vars).unwrap();
        let w = [(-8, 0), (-2, 8), (-8, 0), (-2, 8)];
        let a = MultiSeries::binomial(&vars, &d, &w, "x", "zeta1", -2).unwrap();
        let b = MultiSeries::binomial(&vars, &d, &w, "y", "zeta2", -2).unwrap();
        assert_eq!(res.coefficients[&1], a.mul(&b).unwrap());
        assert!(routes_agree(&cfg, &res).unwrap());
        assert_eq!(shifted_coefficients(&res, 0).unwrap().as_ref(), Some(&res.coefficients[&1]));
        assert_eq!(shifted_coefficients(&res, -2).unwrap(), None);
    }

    #[test]
    fn basis_choice_does_not_matter() {
        let left = spec(&[(&[1], "x1"), (&[2], "x2")]);
        let cfg = SewingConfig::new(left, current("y"), SewingMode::Annulus)
            .with_cutoff(4)
            .with_windows(vec![(-6, 2), (-6, 2)], vec![(-6, 2)]);
        assert!(basis_independence_check(&cfg, 7).unwrap());
        assert!(basis_independence_check(&cfg.clone().with_cutoff(3), 11).unwrap());
        let p = SewingConfig { mode: SewingMode::Puncture, ..cfg };
        assert!(basis_independence_check(&p, 3).unwrap());
    }

    #[test]
    fn annulus_bound_is_enforced() {
        let cfg = SewingConfig::new(current("x"), current("y"), SewingMode::Annulus).with_numeric(num(
            0.5,
            0.5,
            0.6,
            &[("x", C64::new(2.0, 0.0)), ("y", C64::new(2.0, 0.0))],
        ));
        assert!(matches!(sew_product(&cfg), Err(Error::Annulus { .. })));
        let mut bad = cfg.clone();
        bad.right = current("x");
        bad.numeric = None;
        assert!(sew_product(&bad).is_err());
    }

    #[test]
    fn numeric_bounds_hold() {
        let point = [("x", C64::new(2.0, 0.3)), ("y", C64::new(-1.5, 0.4))];
        let cfg = SewingConfig::new(current("x"), current("y"), SewingMode::Annulus)
            .with_cutoff(8)
            .with_windows(vec![(-4, 0)], vec![(-4, 0)])
            .with_numeric(num(0.1, 0.5, 0.8, &point));
        let res = sew_product(&cfg).unwrap();
        let samples = vec![cfg.numeric.as_ref().unwrap().point.clone()];
        let b = cauchy_estimate(&cfg, &res, &samples).unwrap();
        assert!(b.m.is_finite() && b.m > 0.0);
        let rep = convergence_check(&res, &b, C64::new(0.1, 0.0)).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.decay_slope.unwrap() < 0.0);
        let mut fine = cfg.clone();
        fine.numeric.as_mut().unwrap().grid = (16, 32);
        let b2 = cauchy_estimate(&fine, &res, &samples).unwrap();
        assert!((b2.m1 - b.m1).abs() <= 0.05 * b.m1);
        assert!(matches!(cauchy_estimate(&cfg, &res, &[]), Err(Error::EmptySamples)));
    }

    #[test]
    fn vacuum_convergence_is_vacuous() {
        let cfg = SewingConfig::new(empty(), empty(), SewingMode::Annulus).with_cutoff(6).with_numeric(num(
            0.1,
            0.5,
            0.8,
            &[],
        ));
        let res = sew_product(&cfg).unwrap();
        let b = cauchy_estimate(&cfg, &res, &[HashMap::new()]).unwrap();
        assert_eq!(b.m1, 1.0);
        let rep = convergence_check(&res, &b, C64::new(0.1, 0.0)).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.decay_slope, None);
    }

    #[test]
    fn covariance_of_the_sewn_product() {
        let left = spec(&[(&[1], "x1"), (&[2], "x2")]);
        let cfg = SewingConfig::new(left, current("y"), SewingMode::Annulus)
            .with_cutoff(3)
            .with_windows(vec![(-6, 2), (-6, 2)], vec![(-6, 2)]);
        for i in 0..3 {
            assert!(covariant_action(&cfg, &CovariantAction::Derivative(i)).unwrap().holds, "∂{i}");
        }
        assert!(matches!(covariant_action(&cfg, &CovariantAction::Derivative(3)), Err(Error::IndexOutOfRange { .. })));
        assert!(covariant_action(&cfg, &CovariantAction::Scale(qf(2, 3))).unwrap().holds);
        let id = covariant_action(&cfg, &CovariantAction::Permutation(Permutation::identity(3))).unwrap();
        assert!(id.holds);
        assert_eq!(id.result.coefficients, sew_product(&cfg).unwrap().coefficients);
        let swap = Permutation::new(vec![1, 0, 2]).unwrap();
        assert!(covariant_action(&cfg, &CovariantAction::Permutation(swap)).unwrap().holds);
        let across = Permutation::new(vec![2, 0, 1]).unwrap();
        assert!(covariant_action(&cfg, &CovariantAction::Permutation(across)).is_err());
        let p = SewingConfig { mode: SewingMode::Puncture, ..cfg.clone() };
        assert!(covariant_action(&p, &CovariantAction::Scale(qf(3, 2))).unwrap().holds);
        assert!(covariant_action(&p, &CovariantAction::Derivative(0)).unwrap().holds);
    }

    #[test]
    fn derivative_of_vacuum_product_vanishes() {
        let cfg = SewingConfig::new(spec(&[]), empty(), SewingMode::Annulus).with_cutoff(3);
        assert!(total_derivative_check(&cfg).unwrap());
    }

    #[test]
    fn total_derivative_is_the_adjoint_translation() {
        let cfg = SewingConfig::new(current("x").with_theta(st(&[2])), current("y"), SewingMode::Annulus)
            .with_cutoff(3)
            .with_windows(vec![(-6, 2)], vec![(-6, 2)]);
        assert!(total_derivative_check(&cfg).unwrap());
    }

    #[test]
    fn sewn_shuffles() {
        let left = spec(&[(&[1], "x1"), (&[2], "x2")]);
        let right = spec(&[(&[1], "y1"), (&[1], "y2")]).with_theta(st(&[1, 1]));
        let cfg = SewingConfig::new(left, right, SewingMode::Annulus)
            .with_cutoff(2)
            .with_windows(vec![(-5, 1), (-5, 1)], vec![(-5, 1), (-5, 1)]);
        let sh = sewn_shuffle_sum(&cfg, 1).unwrap();
        assert_eq!(sh.terms, 4);
        assert!(sh.vanishes());
        let single = SewingConfig::new(current("x"), current("y"), SewingMode::Annulus).with_cutoff(2);
        let v = sewn_shuffle_sum(&single, 1).unwrap();
        assert_eq!(v.terms, 0);
        assert!(v.vanishes());
    }
}

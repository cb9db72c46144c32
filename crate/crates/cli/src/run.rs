//! Command execution. Schema problems are caught in [`prepare`], before
//! any file is written; [`execute`] computes, writes and reports whether
//! the checks passed.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sewcx_core::complex::{complex_ladder, delta_square_check_with, standard_sign, Cochain, LadderBattery, TermKind};
use sewcx_core::correlators::{matrix_element, CorrelatorSpec, Cutoffs};
use sewcx_core::graded::{enumerate_basis, FockState, GradedVector, Weight};
use sewcx_core::sewing::{cauchy_estimate, convergence_check, routes_agree, sew_product, SewingConfig, SewingMode};
use sewcx_core::{C64, Q};

use crate::config::{point, ComplexConfig, JobConfig};
use crate::report::{complex_cell, partitions_cell, push_series, series_csv, write_json, Columns, Csv, Exact};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Rational,
    Numeric,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Rational => "rational",
            Mode::Numeric => "numeric",
        })
    }
}

pub enum Prepared {
    Correlator { spec: CorrelatorSpec, cutoffs: Cutoffs, point: Option<HashMap<String, C64>> },
    Sew(SewingConfig),
    Complex(ComplexConfig),
    Convergence { cfg: SewingConfig, samples: Vec<HashMap<String, C64>> },
}

/// Parses and validates; every error here is a schema error.
pub fn prepare(text: &str, mode: Mode) -> Result<Prepared> {
    let job: JobConfig = serde_json::from_str(text).context("config does not match the schema")?;
    Ok(match job {
        JobConfig::Correlator(c) => {
            let (spec, cutoffs) = c.spec().build()?;
            let point = c.point.as_ref().map(point);
            if let Some(p) = &point {
                for v in spec.vars() {
                    if !p.contains_key(&v) {
                        bail!("point has no value for {v}");
                    }
                }
            }
            Prepared::Correlator { spec, cutoffs, point }
        }
        JobConfig::Sew(s) => {
            let cfg = s.build()?;
            if mode == Mode::Numeric && cfg.numeric.is_none() {
                bail!("numeric mode needs a \"numeric\" section");
            }
            Prepared::Sew(cfg)
        }
        JobConfig::CheckComplex(c) => {
            if mode == Mode::Numeric {
                bail!("check-complex is exact; use --mode rational");
            }
            c.validate()?;
            Prepared::Complex(c)
        }
        JobConfig::Convergence(s) => {
            let cfg = s.build()?;
            let num = s.numeric.as_ref().ok_or_else(|| anyhow!("convergence needs a \"numeric\" section"))?;
            let mut samples = vec![point(&num.point)];
            samples.extend(num.samples.iter().map(point));
            Prepared::Convergence { cfg, samples }
        }
    })
}

/// Runs the job and writes its files into `out`. Returns whether every
/// check of the command passed.
pub fn execute(job: &Prepared, mode: Mode, seed: Option<u64>, out: &Path) -> Result<bool> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match job {
        Prepared::Correlator { spec, cutoffs, point } => correlator(spec, cutoffs, point.as_ref(), mode, out),
        Prepared::Sew(cfg) => sew(cfg, mode, out),
        Prepared::Complex(c) => check_complex(c, out),
        Prepared::Convergence { cfg, samples } => convergence(cfg, samples, seed, out),
    }
}

fn columns(mode: Mode) -> Columns {
    match mode {
        Mode::Rational => Columns::Rational,
        Mode::Numeric => Columns::Numeric,
    }
}

#[derive(Serialize)]
struct PoleOrder {
    pair: [String; 2],
    order: i64,
}

#[derive(Serialize)]
struct CorrelatorReport {
    command: &'static str,
    mode: String,
    vars: Vec<String>,
    terms: usize,
    routes_agree: bool,
    pole_orders: Vec<PoleOrder>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<[f64; 2]>,
}

fn correlator(
    spec: &CorrelatorSpec,
    cutoffs: &Cutoffs,
    point: Option<&HashMap<String, C64>>,
    mode: Mode,
    out: &Path,
) -> Result<bool> {
    let v = matrix_element(spec, cutoffs)?;
    let agree = v.routes_agree()?;
    let cols = columns(mode);
    let mut csv = series_csv(&[], &spec.vars(), cols);
    push_series(&mut csv, &[], &v.series, cols);
    csv.write(&out.join("correlator.csv"))?;
    let value = match (mode, point) {
        (Mode::Numeric, Some(p)) => {
            let z = v.form.evaluate(p)?;
            Some([z.re, z.im])
        }
        _ => None,
    };
    let report = CorrelatorReport {
        command: "correlator",
        mode: mode.to_string(),
        vars: spec.vars(),
        terms: v.series.terms().len(),
        routes_agree: agree,
        pole_orders: v
            .pole_orders
            .iter()
            .map(|((a, b), o)| PoleOrder { pair: [a.clone(), b.clone()], order: *o })
            .collect(),
        value,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(agree)
}

#[derive(Serialize)]
struct SewReport {
    command: &'static str,
    mode: String,
    sewing: &'static str,
    weight_cutoff: Weight,
    nonzero_weights: Vec<Weight>,
    routes_agree: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    sum: Option<[f64; 2]>,
}

fn sewing_name(m: SewingMode) -> &'static str {
    match m {
        SewingMode::Annulus => "annulus",
        SewingMode::Puncture => "puncture",
    }
}

fn sew(cfg: &SewingConfig, mode: Mode, out: &Path) -> Result<bool> {
    let res = sew_product(cfg)?;
    let agree = routes_agree(cfg, &res)?;
    let mut sum = None;
    match mode {
        Mode::Rational => {
            let mut csv = series_csv(&["l"], &cfg.series_vars(), Columns::Rational);
            for (l, s) in &res.coefficients {
                push_series(&mut csv, &[l.to_string()], s, Columns::Rational);
            }
            csv.write(&out.join("sew.csv"))?;
        }
        Mode::Numeric => {
            let values = res.values.as_ref().ok_or_else(|| anyhow!("no numeric values"))?;
            let mut csv = Csv::new(&["l".into(), "re".into(), "im".into()]);
            for (l, v) in values.iter().enumerate() {
                csv.row(&[l.to_string(), complex_cell(*v)]);
            }
            csv.write(&out.join("sew.csv"))?;
            sum = res.partial_sums.as_ref().and_then(|p| p.last()).map(|z| [z.re, z.im]);
        }
    }
    let report = SewReport {
        command: "sew",
        mode: mode.to_string(),
        sewing: sewing_name(cfg.mode),
        weight_cutoff: cfg.weight_cutoff,
        nonzero_weights: res.coefficients.iter().filter(|(_, s)| !s.is_zero()).map(|(l, _)| *l).collect(),
        routes_agree: agree,
        sum,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(agree)
}

/// Tuples `(θ, g₁, …, gₙ)` of basis states with total weight `≤ budget`;
/// only `θ` may be the vacuum.
fn basis_tuples(n: usize, budget: Weight) -> Vec<Vec<FockState>> {
    let basis = enumerate_basis(budget);
    let mut out = vec![Vec::new()];
    for slot in 0..=n {
        let mut next = Vec::new();
        for t in &out {
            let used: Weight = t.iter().map(FockState::weight).sum();
            for b in &basis {
                if (slot > 0 && b.weight() == 0) || used + b.weight() > budget {
                    continue;
                }
                let mut t2 = t.clone();
                t2.push(b.clone());
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

fn term_index(n: usize, k: TermKind) -> usize {
    match k {
        TermKind::Leading => 0,
        TermKind::Contraction(i) => i,
        TermKind::Trailing => n + 1,
    }
}

#[derive(Serialize)]
struct LadderStepJson {
    from: [usize; 2],
    to: [usize; 2],
    validated: bool,
    scale: Exact,
}

#[derive(Serialize)]
struct ComplexReport {
    command: &'static str,
    m: usize,
    weight_cutoff: Weight,
    checked: usize,
    nonzero: usize,
    max_residual: Exact,
    all_validated: bool,
    first_failure: Option<String>,
    ladder: Vec<LadderStepJson>,
    ladder_passed: bool,
}

fn check_complex(c: &ComplexConfig, out: &Path) -> Result<bool> {
    let sign = |n: usize, k: TermKind| {
        let s = standard_sign(n, k);
        match c.flip_sign {
            Some([d, t]) if d == n && t == term_index(n, k) => -s,
            _ => s,
        }
    };
    let mut csv = Csv::new(&["n", "theta", "insertions", "extras", "numerator", "denominator"].map(String::from));
    let mut checked = 0;
    let mut nonzero = 0;
    let mut max = Q::from_integer(0.into());
    let mut validated = true;
    let mut first_failure = None;
    for n in 0..=c.max_degree {
        for tuple in basis_tuples(n, c.weight_cutoff) {
            let parts: Vec<Vec<u32>> = tuple.iter().map(|s| s.parts().to_vec()).collect();
            let ins = tuple[1..]
                .iter()
                .enumerate()
                .map(|(i, s)| (GradedVector::from_state(s.clone()), format!("z{}", i + 1)))
                .collect();
            let theta = GradedVector::from_state(tuple[0].clone());
            let f = Cochain::new(CorrelatorSpec::new(ins)?.with_theta(theta).with_slots(c.m));
            // an even number of modes keeps δ²F from vanishing trivially
            let modes: usize = parts.iter().map(Vec::len).sum();
            let second = if modes.is_multiple_of(2) { vec![1] } else { vec![1, 1] };
            let extras = [
                (GradedVector::basis(&[1])?, format!("z{}", n + 1)),
                (GradedVector::basis(&second)?, format!("z{}", n + 2)),
            ];
            let window = Cutoffs::uniform(n + 2, c.window[0], c.window[1]);
            let w = (c.relative_window[0], c.relative_window[1]);
            let r = delta_square_check_with(&f, extras, &window, w, &sign)?;
            checked += 1;
            validated &= r.validated;
            if !r.zero {
                nonzero += 1;
                first_failure.get_or_insert_with(|| partitions_cell(&parts));
            }
            if r.max_abs > max {
                max = r.max_abs.clone();
            }
            csv.row(&[
                n.to_string(),
                partitions_cell(&parts[..1]),
                partitions_cell(&parts[1..]),
                partitions_cell(&[vec![1], second]),
                r.max_abs.numer().to_string(),
                r.max_abs.denom().to_string(),
            ]);
        }
    }
    csv.write(&out.join("complex.csv"))?;
    let battery =
        LadderBattery { theta: GradedVector::basis(&vec![1; c.m])?, insertions: vec![GradedVector::basis(&[1])?] };
    let ladder =
        complex_ladder(c.m, &battery, (c.window[0], c.window[1]), (c.relative_window[0], c.relative_window[1]))?;
    let report = ComplexReport {
        command: "check-complex",
        m: c.m,
        weight_cutoff: c.weight_cutoff,
        checked,
        nonzero,
        max_residual: Exact::from(&max),
        all_validated: validated,
        first_failure,
        ladder: ladder
            .steps
            .iter()
            .map(|s| LadderStepJson {
                from: [s.from.n, s.from.m],
                to: [s.to.n, s.to.m],
                validated: s.validated,
                scale: Exact::from(&s.scale),
            })
            .collect(),
        ladder_passed: ladder.passed(),
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(nonzero == 0 && validated && ladder.passed())
}

#[derive(Serialize)]
struct Row {
    l: Weight,
    magnitude: f64,
    bound: f64,
}

#[derive(Serialize)]
struct ConvergenceJson {
    command: &'static str,
    #[serde(rename = "M")]
    m: f64,
    #[serde(rename = "R")]
    r: f64,
    m1: f64,
    r1: f64,
    m2: f64,
    r2: f64,
    samples: usize,
    rows: Vec<Row>,
    violations: usize,
    first_violation: Option<Weight>,
    decay_slope: Option<f64>,
}

/// Extra sample points with every coordinate scaled by `1 + u`, `|u| ≤ 0.05`.
fn jitter(base: &HashMap<String, C64>, seed: u64, count: usize) -> Vec<HashMap<String, C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys: Vec<&String> = base.keys().collect();
    keys.sort();
    (0..count)
        .map(|_| {
            keys.iter()
                .map(|k| {
                    let u = C64::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
                    ((*k).clone(), base[*k] * (C64::new(1.0, 0.0) + u))
                })
                .collect()
        })
        .collect()
}

fn convergence(cfg: &SewingConfig, samples: &[HashMap<String, C64>], seed: Option<u64>, out: &Path) -> Result<bool> {
    let res = sew_product(cfg)?;
    let mut samples = samples.to_vec();
    if let Some(s) = seed {
        samples.extend(jitter(&samples[0], s, 4));
    }
    let num = cfg.numeric.as_ref().ok_or_else(|| anyhow!("no numeric section"))?;
    let b = cauchy_estimate(cfg, &res, &samples)?;
    let rep = convergence_check(&res, &b, num.epsilon)?;
    let values = res.values.as_ref().ok_or_else(|| anyhow!("no numeric values"))?;
    let mut csv = Csv::new(&["l".into(), "re".into(), "im".into()]);
    for (l, v) in values.iter().enumerate() {
        csv.row(&[l.to_string(), complex_cell(*v)]);
    }
    csv.write(&out.join("convergence.csv"))?;
    let json = ConvergenceJson {
        command: "convergence",
        m: b.m,
        r: b.r,
        m1: b.m1,
        r1: b.r1,
        m2: b.m2,
        r2: b.r2,
        samples: samples.len(),
        rows: rep.rows.iter().map(|(l, a, bound)| Row { l: *l, magnitude: *a, bound: *bound }).collect(),
        violations: rep.violations,
        first_violation: rep.first_violation,
        decay_slope: rep.decay_slope,
    };
    write_json(&out.join("report.json"), &json)?;
    Ok(rep.passed())
}

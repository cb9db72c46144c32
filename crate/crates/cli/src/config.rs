//! Job description read from a JSON document.

use std::collections::{BTreeMap, HashMap};

use anyhow::{anyhow, bail, Result};
use serde::Deserialize;
use sewcx_core::correlators::{CorrelatorSpec, Cutoffs};
use sewcx_core::graded::GradedVector;
use sewcx_core::sewing::{NumericSewing, SewingConfig, SewingMode};
use sewcx_core::C64;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JobConfig {
    Correlator(CorrelatorConfig),
    Sew(SewConfig),
    CheckComplex(ComplexConfig),
    Convergence(SewConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertionConfig {
    /// Partition labelling the basis state; `[]` is the vacuum.
    pub state: Vec<u32>,
    pub var: String,
    /// Retained exponent range of this variable.
    pub window: [i64; 2],
}

/// Insertions are listed in operator order, outermost (largest |z|) first.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    #[serde(default)]
    pub theta: Vec<u32>,
    pub insertions: Vec<InsertionConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorConfig {
    #[serde(default)]
    pub theta: Vec<u32>,
    pub insertions: Vec<InsertionConfig>,
    /// Numeric mode also evaluates the closed form here.
    #[serde(default)]
    pub point: Option<BTreeMap<String, [f64; 2]>>,
}

impl CorrelatorConfig {
    pub fn spec(&self) -> SpecConfig {
        SpecConfig { theta: self.theta.clone(), insertions: self.insertions.clone() }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    Annulus,
    Puncture,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericConfig {
    pub epsilon: [f64; 2],
    pub zeta1: [f64; 2],
    pub rho1: f64,
    pub rho2: f64,
    pub r: f64,
    pub grid: [usize; 2],
    pub point: BTreeMap<String, [f64; 2]>,
    /// Further points used for the suprema of the Cauchy estimate.
    #[serde(default)]
    pub samples: Vec<BTreeMap<String, [f64; 2]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SewConfig {
    pub left: SpecConfig,
    pub right: SpecConfig,
    pub mode: ModeConfig,
    pub weight_cutoff: u32,
    #[serde(default = "default_zeta_window")]
    pub zeta_window: [i64; 2],
    #[serde(default)]
    pub numeric: Option<NumericConfig>,
}

fn default_zeta_window() -> [i64; 2] {
    [-2, 8]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexConfig {
    pub m: usize,
    pub weight_cutoff: u32,
    /// Largest degree of the cochains checked.
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    pub window: [i64; 2],
    pub relative_window: [i64; 2],
    /// Flip the sign of one coboundary term: `[degree, term index]`.
    #[serde(default)]
    pub flip_sign: Option<[usize; 2]>,
}

fn default_max_degree() -> usize {
    2
}

fn c64(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

pub fn point(p: &BTreeMap<String, [f64; 2]>) -> HashMap<String, C64> {
    p.iter().map(|(k, v)| (k.clone(), c64(*v))).collect()
}

fn check_window(what: &str, w: [i64; 2]) -> Result<()> {
    if w[0] > w[1] {
        bail!("{what}: window [{}, {}] is empty", w[0], w[1]);
    }
    Ok(())
}

fn finite_positive(what: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        bail!("{what} must be positive, got {x}");
    }
    Ok(())
}

fn state(p: &[u32]) -> Result<GradedVector> {
    GradedVector::basis(p).map_err(|e| anyhow!("bad partition {p:?}: {e}"))
}

impl SpecConfig {
    pub fn build(&self) -> Result<(CorrelatorSpec, Cutoffs)> {
        let mut ins = Vec::with_capacity(self.insertions.len());
        let mut window = Vec::with_capacity(self.insertions.len());
        for i in &self.insertions {
            check_window(&i.var, i.window)?;
            ins.push((state(&i.state)?, i.var.clone()));
            window.push((i.window[0], i.window[1]));
        }
        let spec = CorrelatorSpec::new(ins).map_err(|e| anyhow!("{e}"))?.with_theta(state(&self.theta)?);
        Ok((spec, Cutoffs { window }))
    }
}

impl NumericConfig {
    fn build(&self) -> Result<NumericSewing> {
        finite_positive("rho1", self.rho1)?;
        finite_positive("rho2", self.rho2)?;
        finite_positive("r", self.r)?;
        finite_positive("|epsilon|", c64(self.epsilon).norm())?;
        if self.grid[0] == 0 || self.grid[1] == 0 {
            bail!("grid must have at least one radius and one angle");
        }
        Ok(NumericSewing {
            epsilon: c64(self.epsilon),
            zeta1: c64(self.zeta1),
            rho1: self.rho1,
            rho2: self.rho2,
            r: self.r,
            point: point(&self.point),
            grid: (self.grid[0], self.grid[1]),
        })
    }
}

impl SewConfig {
    pub fn build(&self) -> Result<SewingConfig> {
        let (left, lw) = self.left.build()?;
        let (right, rw) = self.right.build()?;
        check_window("zeta", self.zeta_window)?;
        let mode = match self.mode {
            ModeConfig::Annulus => SewingMode::Annulus,
            ModeConfig::Puncture => SewingMode::Puncture,
        };
        let mut cfg =
            SewingConfig::new(left, right, mode).with_cutoff(self.weight_cutoff).with_windows(lw.window, rw.window);
        cfg.zeta_window = (self.zeta_window[0], self.zeta_window[1]);
        if let Some(n) = &self.numeric {
            cfg = cfg.with_numeric(n.build()?);
            let vars = cfg.left.vars().into_iter().chain(cfg.right.vars());
            for v in vars {
                if !n.point.contains_key(&v) {
                    bail!("numeric point has no value for {v}");
                }
            }
        }
        cfg.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(cfg)
    }
}

impl ComplexConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            bail!("check-complex needs m >= 2, got {}", self.m);
        }
        check_window("window", self.window)?;
        check_window("relative_window", self.relative_window)
    }
}

//! Field map `g ↦ γ_g(z)` for the Fock module.
//!
//! A basis state `a_{-k₁}⋯a_{-k_r}𝟙` acts by the normal-ordered product
//! `:∂^{(k₁-1)}a(z) ⋯ ∂^{(k_r-1)}a(z):` with `∂^{(j)} = ∂^j / j!` and
//! `a(z) = Σ_n a_n z^{-n-1}`. Coefficients are stored by the power of `z`.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::graded::{mode_on_state, translation, FockState, GradedVector, Weight};
use crate::series::binom;
use crate::Q;

/// Mode index `n` of the coefficient of `z^power` in `Σ_n g_n z^{-n-wt g}`.
///
/// This is the single place where the power of `z` and the weight-shifted
/// mode index are related: `power = -n - wt`.
pub fn power_to_mode(power: i64, wt: Weight) -> i64 {
    -power - wt as i64
}

pub fn mode_to_power(mode: i64, wt: Weight) -> i64 {
    -mode - wt as i64
}

/// Product index `m` of the coefficient of `z^power` in `Σ_m g_(m) z^{-m-1}`;
/// `g_(m)` maps `G_(n)` into `G_(wt g - m - 1 + n)`.
pub fn power_to_product_index(power: i64) -> i64 {
    -power - 1
}

/// `γ_g(z) w` as a map from the power of `z` to states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSeries {
    pub source: GradedVector,
    pub target: GradedVector,
    pub weight_cutoff: Weight,
    pub coefficients: BTreeMap<i64, GradedVector>,
}

impl FieldSeries {
    pub fn coefficient(&self, power: i64) -> GradedVector {
        self.coefficients.get(&power).cloned().unwrap_or_default()
    }

    pub fn lowest_power(&self) -> Option<i64> {
        self.coefficients.keys().next().copied()
    }

    /// `d/dz` applied coefficient-wise.
    pub fn derivative(&self) -> BTreeMap<i64, GradedVector> {
        let mut out = BTreeMap::new();
        for (p, v) in &self.coefficients {
            if *p != 0 {
                let d = v.scaled(&Q::from_integer((*p).into()));
                out.insert(p - 1, d);
            }
        }
        out
    }
}

// One factor `∂^{(k-1)} a(z)`: coefficient of a_n is binom(-n-1, k-1), power -n-k.
fn factor_coeff(n: i64, k: u32) -> Q {
    Q::from_integer(binom(-n - 1, (k - 1) as u64))
}

fn apply_basis(g: &FockState, w: &FockState, cutoff: Weight, scale: &Q, out: &mut BTreeMap<i64, GradedVector>) {
    let ks = g.parts().to_vec();
    // choose annihilation modes first (they commute), then creation modes
    struct Ctx<'a> {
        ks: &'a [u32],
        cutoff: Weight,
        out: &'a mut BTreeMap<i64, GradedVector>,
    }
    fn rec(ctx: &mut Ctx<'_>, i: usize, state: FockState, coeff: Q, power: i64, creators: &mut Vec<i64>) {
        if coeff.is_zero() {
            return;
        }
        let created: i64 = creators.iter().map(|n| -n).sum();
        if i == ctx.ks.len() {
            if state.weight() as i64 + created > ctx.cutoff as i64 {
                return;
            }
            let mut s = state;
            for &n in creators.iter() {
                s = mode_on_state(n, &s).expect("creation always applies").0;
            }
            ctx.out.entry(power).or_default().add_term(s, coeff);
            return;
        }
        let k = ctx.ks[i];
        let mut labels: Vec<u32> = state.parts().to_vec();
        labels.dedup();
        for n in labels {
            let (lowered, c) = mode_on_state(n as i64, &state).expect("label present");
            let f = factor_coeff(n as i64, k);
            rec(ctx, i + 1, lowered, &coeff * c * f, power - n as i64 - k as i64, creators);
        }
        // later annihilators may still lower the state, so only the created weight bounds this
        let room = ctx.cutoff as i64 - created;
        for m in 1..=room {
            let n = -m;
            let f = factor_coeff(n, k);
            creators.push(n);
            rec(ctx, i + 1, state.clone(), &coeff * f, power - n - k as i64, creators);
            creators.pop();
        }
    }
    let mut ctx = Ctx { ks: &ks, cutoff, out };
    rec(&mut ctx, 0, w.clone(), scale.clone(), 0, &mut Vec::new());
}

/// `γ_g(z) w`, keeping output components of weight at most `cutoff`.
pub fn gamma_apply(g: &GradedVector, w: &GradedVector, cutoff: Weight) -> Result<FieldSeries> {
    if let Some(mw) = w.max_weight() {
        if mw > cutoff {
            return Err(Error::Underflow {
                cutoff: cutoff as i64,
                what: format!("target state of weight {mw} does not fit"),
            });
        }
    }
    let mut coefficients: BTreeMap<i64, GradedVector> = BTreeMap::new();
    for (gs, gc) in g.iter() {
        for (ws, wc) in w.iter() {
            apply_basis(gs, ws, cutoff, &(gc * wc), &mut coefficients);
        }
    }
    coefficients.retain(|_, v| !v.is_zero());
    Ok(FieldSeries { source: g.clone(), target: w.clone(), weight_cutoff: cutoff, coefficients })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivationReport {
    pub holds: bool,
    pub max_deviation: Q,
    pub first_bad_power: Option<i64>,
    pub states_checked: usize,
}

/// Power-by-power comparison of two coefficient maps.
pub fn compare_coefficients(lhs: &BTreeMap<i64, GradedVector>, rhs: &BTreeMap<i64, GradedVector>) -> (Q, Option<i64>) {
    let mut worst = Q::zero();
    let mut first = None;
    let powers: std::collections::BTreeSet<i64> = lhs.keys().chain(rhs.keys()).copied().collect();
    for p in powers {
        let a = lhs.get(&p).cloned().unwrap_or_default();
        let b = rhs.get(&p).cloned().unwrap_or_default();
        let d = &a - &b;
        if !d.is_zero() {
            first.get_or_insert(p);
            for (_, c) in d.iter() {
                if c.abs() > worst {
                    worst = c.abs();
                }
            }
        }
    }
    (worst, first)
}

/// Checks `γ_{Tg}(z) = d/dz γ_g(z)` on every basis state up to `cutoff`.
///
/// `T` is the translation operator `L_{-1}`.
pub fn derivation_check(g: &GradedVector, cutoff: Weight) -> Result<DerivationReport> {
    let tg = translation(g);
    let mut worst = Q::zero();
    let mut first = None;
    let basis = crate::graded::enumerate_basis(cutoff);
    for s in &basis {
        let w = GradedVector::from_state(s.clone());
        let lhs = gamma_apply(&tg, &w, cutoff)?;
        let rhs = gamma_apply(g, &w, cutoff)?.derivative();
        let (d, p) = compare_coefficients(&lhs.coefficients, &rhs);
        if d > worst {
            worst = d;
        }
        if first.is_none() {
            first = p;
        }
    }
    Ok(DerivationReport {
        holds: worst.is_zero(),
        max_deviation: worst,
        first_bad_power: first,
        states_checked: basis.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded::{enumerate_basis, mode_action};
    use crate::q;

    fn st(p: &[u32]) -> GradedVector {
        GradedVector::basis(p).unwrap()
    }

    #[test]
    fn identity_field() {
        let w = st(&[2, 1]);
        let f = gamma_apply(&GradedVector::vacuum(), &w, 6).unwrap();
        assert_eq!(f.coefficients.len(), 1);
        assert_eq!(f.coefficient(0), w);
    }

    #[test]
    fn single_mode_on_vacuum_is_creation_tail() {
        // a(z) 1 = Σ_{n≥1} a_{-n} 1 z^{n-1}
        let f = gamma_apply(&st(&[1]), &GradedVector::vacuum(), 5).unwrap();
        for n in 1..=5u32 {
            assert_eq!(f.coefficient(n as i64 - 1), st(&[n]));
        }
        assert_eq!(f.coefficients.len(), 5);
        assert_eq!(f.lowest_power(), Some(0));
    }

    #[test]
    fn single_mode_on_one_particle_state_has_contraction() {
        let f = gamma_apply(&st(&[1]), &st(&[1]), 4).unwrap();
        // a_1 a_{-1} 1 = 1 at power -2
        assert_eq!(f.coefficient(-2), GradedVector::vacuum());
        assert_eq!(f.coefficient(0), st(&[1, 1]));
        assert_eq!(f.lowest_power(), Some(-2));
    }

    #[test]
    fn grading_compatibility() {
        for g in [st(&[1]), st(&[2]), st(&[1, 1]), st(&[3, 1])] {
            let wg = g.homogeneous_weight().unwrap() as i64;
            for s in enumerate_basis(4) {
                let w = GradedVector::from_state(s.clone());
                let f = gamma_apply(&g, &w, 8).unwrap();
                for (p, v) in &f.coefficients {
                    let expect = s.weight() as i64 + wg + p;
                    assert_eq!(v.homogeneous_weight().map(|x| x as i64), Some(expect));
                    let m = power_to_product_index(*p);
                    assert_eq!(expect, wg - m - 1 + s.weight() as i64);
                }
            }
        }
    }

    #[test]
    fn mode_index_conversion_round_trips() {
        for p in -5..5 {
            for wt in 0..4 {
                assert_eq!(mode_to_power(power_to_mode(p, wt), wt), p);
            }
        }
        // a_{-1}1 has weight 1: z^0 coefficient is the mode a_{-1}
        assert_eq!(power_to_mode(0, 1), -1);
    }

    #[test]
    fn single_mode_field_matches_modes() {
        // coefficient of z^{-n-1} of a(z) w is a_n w
        for s in enumerate_basis(4) {
            let w = GradedVector::from_state(s);
            let f = gamma_apply(&st(&[1]), &w, 7).unwrap();
            for n in -6i64..=6 {
                if n == 0 {
                    continue;
                }
                let expect = mode_action(n, &w, 7).unwrap();
                assert_eq!(f.coefficient(-n - 1), expect, "a_{n}");
            }
        }
    }

    #[test]
    fn truncation_monotone() {
        let g = st(&[2, 1]);
        let w = st(&[1]);
        let small = gamma_apply(&g, &w, 4).unwrap();
        let big = gamma_apply(&g, &w, 7).unwrap();
        for (p, v) in &small.coefficients {
            assert_eq!(&big.coefficient(*p).truncate(4), v);
        }
    }

    #[test]
    fn underflow_reported() {
        assert!(matches!(gamma_apply(&st(&[1]), &st(&[3]), 2), Err(Error::Underflow { .. })));
    }

    #[test]
    fn derivation_property() {
        let r = derivation_check(&GradedVector::vacuum(), 4).unwrap();
        assert!(r.holds);
        for g in [st(&[1]), st(&[2]), st(&[1, 1])] {
            let r = derivation_check(&g, 4).unwrap();
            assert!(r.holds, "{g}: {r:?}");
        }
    }

    #[test]
    fn derivation_negative_control() {
        let g = st(&[1]);
        let w = st(&[1]);
        let lhs = gamma_apply(&translation(&g), &w, 4).unwrap();
        let mut rhs = gamma_apply(&g, &w, 4).unwrap().derivative();
        rhs.get_mut(&-3).unwrap().add_term(FockState::vacuum(), q(1));
        let (dev, at) = compare_coefficients(&lhs.coefficients, &rhs);
        assert_eq!(dev, q(1));
        assert_eq!(at, Some(-3));
    }
}

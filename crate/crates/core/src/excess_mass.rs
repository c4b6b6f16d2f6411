//! Outlier (excess) mass diagnostics.
//!
//! The excess mass of a measure `g` relative to a reference `g0` at radius
//! `eta` is the total weight `g` places on atoms farther than `eta` from
//! every atom of `g0`. It is bounded by `1 / phi(eta / W)` whenever `W` is
//! the (or any upper estimate of the) Orlicz-Wasserstein distance between
//! the two measures, and by the cruder exponential form `2 exp(-eta / W)`
//! for exponentially dominated `phi`.
//!
//! Both bounds are monotone increasing in `W`, so supplying an upper
//! estimate (for instance an entropic value inflated by its entropy
//! allowance) keeps the inequality valid; the report records which `W` was
//! used.

use serde::Serialize;

use crate::measures::DiscreteMeasure;
use crate::orlicz::PhiFunction;

/// Indices of `g`'s atoms whose distance to every atom of `g0` is at least
/// `eta`. The boundary is inclusive: that is the indicator the bound's
/// derivation controls, and it is what makes the closed-form tight instance
/// (mass exactly at distance `eta`) meet its bound with equality.
pub fn outlier_atom_indices(g: &DiscreteMeasure, g0: &DiscreteMeasure, eta: f64) -> Vec<usize> {
    assert_eq!(g.dim(), g0.dim(), "measures must share a dimension");
    assert!(eta > 0.0, "outlier radius must be positive");
    g.atoms()
        .iter()
        .enumerate()
        .filter(|(_, atom)| {
            g0.atoms().iter().all(|reference| {
                let d2: f64 = atom
                    .iter()
                    .zip(reference.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                d2.sqrt() >= eta
            })
        })
        .map(|(j, _)| j)
        .collect()
}

/// Total weight of `g` on atoms at distance `eta` or more from every atom
/// of `g0`.
pub fn outlier_mass(g: &DiscreteMeasure, g0: &DiscreteMeasure, eta: f64) -> f64 {
    outlier_atom_indices(g, g0, eta)
        .into_iter()
        .map(|j| g.weights()[j])
        .sum()
}

/// The bound `1 / phi(eta / w)`; infinite when `phi(eta / w) = 0`.
pub fn phi_outlier_bound(phi: &PhiFunction, eta: f64, w: f64) -> f64 {
    assert!(w > 0.0, "distance estimate must be positive");
    let denom = phi.eval(eta / w);
    if denom == 0.0 {
        f64::INFINITY
    } else {
        1.0 / denom
    }
}

/// The exponential form `2 exp(-eta / w)` (vacuous, i.e. >= 1, when
/// `eta <= w ln 2`). Valid for `phi` dominated by `e^x - 1`.
pub fn exp_outlier_bound(eta: f64, w: f64) -> f64 {
    assert!(w > 0.0, "distance estimate must be positive");
    2.0 * (-eta / w).exp()
}

/// Everything the excess-mass check produces, serializable for the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct ExcessMassReport {
    pub eta: f64,
    pub outlier_mass: f64,
    pub phi_outlier_bound: f64,
    pub exp_outlier_bound: f64,
    pub w_phi_used: f64,
    pub outlier_atom_indices: Vec<usize>,
}

pub fn excess_mass_report(
    g: &DiscreteMeasure,
    g0: &DiscreteMeasure,
    phi: &PhiFunction,
    eta: f64,
    w: f64,
) -> ExcessMassReport {
    let outlier_atom_indices = outlier_atom_indices(g, g0, eta);
    let outlier_mass = outlier_atom_indices.iter().map(|&j| g.weights()[j]).sum();
    ExcessMassReport {
        eta,
        outlier_mass,
        phi_outlier_bound: phi_outlier_bound(phi, eta, w),
        exp_outlier_bound: exp_outlier_bound(eta, w),
        w_phi_used: w,
        outlier_atom_indices,
    }
}

//! Log-domain-stabilized Sinkhorn solver for entropic optimal transport.
//!
//! Solves
//!
//! ```text
//! min_{P in couplings(r, c)}  <P, C> - H(P) / lambda
//! ```
//!
//! where `H(P) = -sum p_ij ln p_ij` is the Shannon entropy of the coupling
//! (natural log, with `0 ln 0 = 0`). Larger `lambda` means a weaker entropy
//! term, so the plan approaches exact optimal transport as `lambda` grows.
//!
//! The optimal plan has Gibbs form `p_ij = exp(phi_i + psi_j - lambda*C_ij)`
//! and the iteration alternates row and column log-sum-exp updates of the
//! dual potentials:
//!
//! ```text
//! phi_i = ln r_i - LSE_j(psi_j - lambda*C_ij)
//! psi_j = ln c_j - LSE_i(phi_i - lambda*C_ij)
//! ```
//!
//! Working in the log domain is not optional here: the bracketing solver
//! evaluates transformed costs `phi(M/eta)` that reach `exp(max(M)/eta)` for
//! small `eta`, which annihilates naive Gibbs kernels. The max-shifted
//! log-sum-exp keeps every quantity finite for cost entries up to ~1e250.
//!
//! Stopping rule: the marginal violation (max absolute row/column-sum error
//! of the current plan) falls below `tol`, or `max_iters` is reached. A run
//! that stops at the cap is returned with `converged = false`, never
//! silently.
//!
//! [`sinkhorn`] is a pure function of its inputs: solves on distinct inputs
//! may run concurrently; a single solve is internally sequential.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::measures::TransportPlan;

/// Solver knobs. `lambda` is the regularization weight on `-H(P)/lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl SinkhornConfig {
    pub const DEFAULT_MAX_ITERS: usize = 100_000;
    pub const DEFAULT_TOL: f64 = 1e-9;

    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: lambda,
            });
        }
        Ok(Self {
            lambda,
            max_iters: Self::DEFAULT_MAX_ITERS,
            tol: Self::DEFAULT_TOL,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        if !tol.is_finite() || tol <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "tol",
                value: tol,
            });
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Result<Self> {
        if max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                value: 0.0,
            });
        }
        self.max_iters = max_iters;
        Ok(self)
    }
}

/// Output of a Sinkhorn run.
///
/// `objective = transport_cost - entropy / lambda` holds exactly by
/// construction; `entropy` always sits between `(H(r)+H(c))/2` and
/// `H(r)+H(c)` (any coupling does).
#[derive(Debug, Clone)]
pub struct SinkhornResult {
    pub plan: TransportPlan,
    /// `<P, C> - H(P)/lambda`.
    pub objective: f64,
    /// `<P, C>`.
    pub transport_cost: f64,
    /// `H(P)`, natural log.
    pub entropy: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Dual potentials of a Sinkhorn solve, in the scaled convention
/// `plan = exp(phi_i + psi_j - lambda * C_ij)`.
pub type DualPotentials = (Vec<f64>, Vec<f64>);

/// Shannon entropy `-sum w ln w` with `0 ln 0 = 0`.
pub fn shannon_entropy(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.ln())
        .sum()
}

/// Max-shifted log-sum-exp; `-inf` for an empty or all `-inf` input.
fn logsumexp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = terms.map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// Entropic optimal transport between marginals `r` and `c` at ground cost
/// `cost`. See the module docs for the objective and the update scheme.
pub fn sinkhorn(
    cost: &Array2<f64>,
    r: &[f64],
    c: &[f64],
    cfg: &SinkhornConfig,
) -> Result<SinkhornResult> {
    sinkhorn_with_potentials(cost, r, c, cfg, None).map(|(result, _)| result)
}

/// [`sinkhorn`] with explicit dual-potential threading: pass the potentials
/// of a previous solve on the same marginals to warm-start, and receive the
/// final potentials back. Potentials live on the unfiltered index space
/// (entries at zero-weight slots are ignored and returned as 0).
pub fn sinkhorn_with_potentials(
    cost: &Array2<f64>,
    r: &[f64],
    c: &[f64],
    cfg: &SinkhornConfig,
    init: Option<(&[f64], &[f64])>,
) -> Result<(SinkhornResult, DualPotentials)> {
    if cost.nrows() != r.len() || cost.ncols() != c.len() {
        return Err(Error::ShapeMismatch {
            rows: cost.nrows(),
            cols: cost.ncols(),
            r_len: r.len(),
            c_len: c.len(),
        });
    }
    for &entry in cost.iter() {
        if entry.is_nan() || entry == f64::INFINITY {
            return Err(Error::NonFinite {
                context: "cost matrix",
            });
        }
        if entry < 0.0 {
            return Err(Error::InvalidParameter {
                name: "cost entry",
                value: entry,
            });
        }
    }
    check_simplex(r)?;
    check_simplex(c)?;

    // Zero-weight marginal entries are excluded up front; the plan is
    // re-expanded with zero rows/columns afterwards for shape stability.
    let rows: Vec<usize> = (0..r.len()).filter(|&i| r[i] > 0.0).collect();
    let cols: Vec<usize> = (0..c.len()).filter(|&j| c[j] > 0.0).collect();
    let (n, m) = (rows.len(), cols.len());

    let rf: Vec<f64> = rows.iter().map(|&i| r[i]).collect();
    let cf: Vec<f64> = cols.iter().map(|&j| c[j]).collect();
    let log_r: Vec<f64> = rf.iter().map(|w| w.ln()).collect();
    let log_c: Vec<f64> = cf.iter().map(|w| w.ln()).collect();

    // Pre-scale the cost once: the iteration only ever needs lambda * C.
    let mut scaled = Array2::zeros((n, m));
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            let d = cfg.lambda * cost[[i, j]];
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    context: "lambda * cost",
                });
            }
            scaled[[a, b]] = d;
        }
    }

    let mut phi = vec![0.0; n];
    let mut psi = vec![0.0; m];
    if let Some((f0, g0)) = init {
        if f0.len() == r.len() && g0.len() == c.len() {
            for (a, &i) in rows.iter().enumerate() {
                phi[a] = if f0[i].is_finite() { f0[i] } else { 0.0 };
            }
            for (b, &j) in cols.iter().enumerate() {
                psi[b] = if g0[j].is_finite() { g0[j] } else { 0.0 };
            }
        }
    }

    let mut plan_f = Array2::zeros((n, m));
    let mut iterations = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;
    const CHECK_EVERY: usize = 4;

    while iterations < cfg.max_iters {
        iterations += 1;
        for a in 0..n {
            let row = scaled.row(a);
            let lse = logsumexp((0..m).map(|b| psi[b] - row[b]));
            phi[a] = log_r[a] - lse;
        }
        for b in 0..m {
            let col = scaled.column(b);
            let lse = logsumexp((0..n).map(|a| phi[a] - col[a]));
            psi[b] = log_c[b] - lse;
        }

        if iterations % CHECK_EVERY == 0 || iterations == cfg.max_iters {
            violation = rebuild_plan(&scaled, &phi, &psi, &rf, &cf, &mut plan_f);
            if violation <= cfg.tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        violation = rebuild_plan(&scaled, &phi, &psi, &rf, &cf, &mut plan_f);
        converged = violation <= cfg.tol;
    }
    let _ = violation;

    let mut transport_cost = 0.0;
    let mut entropy = 0.0;
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            let p = plan_f[[a, b]];
            if p > 0.0 {
                transport_cost += p * cost[[i, j]];
                entropy -= p * p.ln();
            }
        }
    }
    let objective = transport_cost - entropy / cfg.lambda;

    let mut full_plan = Array2::zeros((r.len(), c.len()));
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            full_plan[[i, j]] = plan_f[[a, b]];
        }
    }
    let plan = TransportPlan::from_parts_unchecked(full_plan, r.to_vec(), c.to_vec());

    let mut f_out = vec![0.0; r.len()];
    let mut g_out = vec![0.0; c.len()];
    for (a, &i) in rows.iter().enumerate() {
        f_out[i] = phi[a];
    }
    for (b, &j) in cols.iter().enumerate() {
        g_out[j] = psi[b];
    }

    Ok((
        SinkhornResult {
            plan,
            objective,
            transport_cost,
            entropy,
            converged,
            iterations,
        },
        (f_out, g_out),
    ))
}

/// Materialize the plan from the potentials and return its marginal
/// violation. The column update ran last, so column sums are float-exact and
/// the row error dominates.
fn rebuild_plan(
    scaled: &Array2<f64>,
    phi: &[f64],
    psi: &[f64],
    rf: &[f64],
    cf: &[f64],
    plan: &mut Array2<f64>,
) -> f64 {
    let (n, m) = (phi.len(), psi.len());
    let mut worst = 0.0_f64;
    for a in 0..n {
        let row_cost = scaled.row(a);
        let mut row_sum = 0.0;
        for b in 0..m {
            let p = (phi[a] + psi[b] - row_cost[b]).exp();
            plan[[a, b]] = p;
            row_sum += p;
        }
        worst = worst.max((row_sum - rf[a]).abs());
    }
    for (b, &target) in cf.iter().enumerate() {
        let col_sum: f64 = plan.column(b).sum();
        worst = worst.max((col_sum - target).abs());
    }
    worst
}

fn check_simplex(w: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &x in w {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                context: "marginal weights",
            });
        }
        if x < 0.0 {
            return Err(Error::InvalidParameter {
                name: "marginal weight",
                value: x,
            });
        }
        sum += x;
    }
    if (sum - 1.0).abs() > 1e-8 {
        return Err(Error::NotOnSimplex { sum });
    }
    Ok(())
}

/// The scalar `g` used by the bracketing solver: the optimized objective
/// `<P, T> - H(P)/lambda` of [`sinkhorn`] at an already transformed cost `T`
/// (i.e. `phi(M/eta)` for the current scale `eta`).
///
/// Unlike [`sinkhorn`], a run that stops at the iteration cap is an error
/// here: a scalar from an unconverged solve would silently poison the
/// bracket logic built on top of it.
pub fn regularized_objective(
    cost_transformed: &Array2<f64>,
    r: &[f64],
    c: &[f64],
    cfg: &SinkhornConfig,
) -> Result<f64> {
    let result = sinkhorn(cost_transformed, r, c, cfg)?;
    if !result.converged {
        return Err(Error::SinkhornNotConverged {
            iterations: result.iterations,
            violation: result.plan.marginal_violation(),
        });
    }
    Ok(result.objective)
}

//! Discrete probability measures, ground-cost matrices, and transport plans.
//!
//! A [`DiscreteMeasure`] is a finitely supported probability measure: a list
//! of atoms in `R^d` plus a weight vector on the probability simplex. The
//! ground metric is Euclidean `l2` throughout; [`cost_matrix`] materializes
//! the pairwise distances between two atom sets, and [`TransportPlan`] holds
//! a coupling of two weight vectors with its prescribed marginals.
//!
//! All three types are immutable after construction and can be shared freely
//! across threads.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights more negative than this are an error; anything in `[-CLAMP, 0)`
/// is treated as float noise and clamped to zero.
const WEIGHT_CLAMP: f64 = 1e-12;

/// Per-entry tolerance on row/column sums of a valid [`TransportPlan`].
pub const MARGINAL_TOL: f64 = 1e-8;

/// Tolerance on the total mass of a valid [`TransportPlan`].
pub const MASS_TOL: f64 = 1e-10;

/// A finitely supported probability measure on `R^d`.
///
/// Invariants enforced at construction:
/// - all atoms share the same dimension `d >= 1`;
/// - weights are nonnegative and sum to 1 within `1e-12` (the vector is
///   rescaled when the raw sum is further away than that);
/// - zero-weight atoms are dropped, so every stored weight is positive.
///
/// Duplicate atoms are permitted and never merged: merging would change the
/// entropy terms of the regularized transport objective.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Raw mirror of the measure JSON format, validated on the way in.
#[derive(Deserialize)]
struct MeasureFile {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Build a measure from raw atoms and weights.
    ///
    /// Weights in `[-1e-12, 0)` are clamped to zero; the vector is then
    /// normalized and zero-weight atoms are dropped.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::ShapeMismatch {
                rows: atoms.len(),
                cols: 1,
                r_len: weights.len(),
                c_len: 1,
            });
        }
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for atom in &atoms {
            if atom.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: atom.len(),
                });
            }
            if atom.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: "atom coordinates",
                });
            }
        }

        let mut weights = weights;
        for (index, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite { context: "weights" });
            }
            if *w < 0.0 {
                if *w < -WEIGHT_CLAMP {
                    return Err(Error::NegativeWeight { index, value: *w });
                }
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        // Rescale only when needed so that weights already on the simplex
        // (e.g. mixture proportions) survive bit-for-bit.
        if (sum - 1.0).abs() > WEIGHT_CLAMP {
            for w in &mut weights {
                *w /= sum;
            }
        }

        let (atoms, weights): (Vec<_>, Vec<_>) = atoms
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .unzip();
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        Ok(Self { atoms, weights })
    }

    /// Single unit point mass at `atom`.
    pub fn dirac(atom: Vec<f64>) -> Result<Self> {
        Self::new(vec![atom], vec![1.0])
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of (positively weighted) atoms.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Ambient dimension of the atoms.
    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    /// Parse the measure JSON format `{"atoms": [[..],..], "weights": [..]}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: MeasureFile = serde_json::from_str(s)?;
        Self::new(raw.atoms, raw.weights)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("measure serialization cannot fail")
    }
}

/// Pairwise Euclidean ground distances between two atom sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostMatrix {
    entries: Array2<f64>,
    max_entry: f64,
}

impl CostMatrix {
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Cached maximum entry: the `max(M)` scale that seeds solver brackets.
    pub fn max_entry(&self) -> f64 {
        self.max_entry
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }
}

/// `entries[i][j] = ||src.atoms[i] - dst.atoms[j]||_2`.
pub fn cost_matrix(src: &DiscreteMeasure, dst: &DiscreteMeasure) -> Result<CostMatrix> {
    if src.dim() != dst.dim() {
        return Err(Error::DimensionMismatch {
            expected: src.dim(),
            got: dst.dim(),
        });
    }
    let mut entries = Array2::zeros((src.len(), dst.len()));
    for (i, a) in src.atoms().iter().enumerate() {
        for (j, b) in dst.atoms().iter().enumerate() {
            let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            entries[[i, j]] = d2.sqrt();
        }
    }
    let max_entry = entries.iter().copied().fold(0.0_f64, f64::max);
    Ok(CostMatrix { entries, max_entry })
}

/// A nonnegative coupling matrix with prescribed row and column marginals.
///
/// [`TransportPlan::new`] checks feasibility: entries nonnegative, every row
/// and column sum within [`MARGINAL_TOL`] of its prescribed marginal, total
/// mass within [`MASS_TOL`] of 1. Solvers that already guarantee (or report)
/// feasibility construct plans through the unchecked path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    matrix: Array2<f64>,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
}

impl TransportPlan {
    pub fn new(
        matrix: Array2<f64>,
        row_marginal: Vec<f64>,
        col_marginal: Vec<f64>,
    ) -> Result<Self> {
        if matrix.nrows() != row_marginal.len() || matrix.ncols() != col_marginal.len() {
            return Err(Error::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                r_len: row_marginal.len(),
                c_len: col_marginal.len(),
            });
        }
        let mut matrix = matrix;
        for entry in matrix.iter_mut() {
            if !entry.is_finite() {
                return Err(Error::NonFinite {
                    context: "plan entries",
                });
            }
            if *entry < 0.0 {
                if *entry < -WEIGHT_CLAMP {
                    return Err(Error::InfeasiblePlan {
                        reason: "negative entry",
                        violation: -*entry,
                    });
                }
                *entry = 0.0;
            }
        }
        let plan = Self {
            matrix,
            row_marginal,
            col_marginal,
        };
        let violation = plan.marginal_violation();
        if violation > MARGINAL_TOL {
            return Err(Error::InfeasiblePlan {
                reason: "marginal sums",
                violation,
            });
        }
        let mass: f64 = plan.matrix.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InfeasiblePlan {
                reason: "total mass",
                violation: (mass - 1.0).abs(),
            });
        }
        Ok(plan)
    }

    /// Construct without feasibility checks. Used for solver output whose
    /// violation is measured (and reported) separately, e.g. a Sinkhorn run
    /// that stopped at its iteration cap.
    pub(crate) fn from_parts_unchecked(
        matrix: Array2<f64>,
        row_marginal: Vec<f64>,
        col_marginal: Vec<f64>,
    ) -> Self {
        Self {
            matrix,
            row_marginal,
            col_marginal,
        }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    /// Max over rows and columns of |sum - prescribed marginal|.
    ///
    /// This is the Sinkhorn stopping statistic.
    pub fn marginal_violation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, &target) in self.row_marginal.iter().enumerate() {
            let sum: f64 = self.matrix.row(i).sum();
            worst = worst.max((sum - target).abs());
        }
        for (j, &target) in self.col_marginal.iter().enumerate() {
            let sum: f64 = self.matrix.column(j).sum();
            worst = worst.max((sum - target).abs());
        }
        worst
    }

    /// Total mass of the plan.
    pub fn mass(&self) -> f64 {
        self.matrix.iter().sum()
    }
}

/// Format a float with 17 significant digits, locale independent.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a plan as CSV: header `i,j,mass`, one row per nonzero entry,
/// 17 significant digits.
pub fn write_plan_csv<W: Write>(plan: &TransportPlan, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "i,j,mass")?;
    for ((i, j), &mass) in plan.matrix().indexed_iter() {
        if mass != 0.0 {
            writeln!(out, "{i},{j},{}", fmt_f64(mass))?;
        }
    }
    Ok(())
}

/// Parse a plan CSV written by [`write_plan_csv`] back into a plan with the
/// given marginals. Entries absent from the file are zero.
pub fn read_plan_csv(
    csv: &str,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
) -> Result<TransportPlan> {
    let mut matrix = Array2::zeros((row_marginal.len(), col_marginal.len()));
    let mut lines = csv.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "i,j,mass" => {}
        _ => {
            return Err(Error::PlanCsv {
                line: 1,
                reason: "missing `i,j,mass` header".into(),
            })
        }
    }
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let parse = |field: Option<&str>, what: &str| -> Result<String> {
            field.map(str::to_owned).ok_or_else(|| Error::PlanCsv {
                line: idx + 1,
                reason: format!("missing {what} field"),
            })
        };
        let i: usize = parse(fields.next(), "i")?
            .parse()
            .map_err(|_| Error::PlanCsv {
                line: idx + 1,
                reason: "bad row index".into(),
            })?;
        let j: usize = parse(fields.next(), "j")?
            .parse()
            .map_err(|_| Error::PlanCsv {
                line: idx + 1,
                reason: "bad column index".into(),
            })?;
        let mass: f64 = parse(fields.next(), "mass")?
            .parse()
            .map_err(|_| Error::PlanCsv {
                line: idx + 1,
                reason: "bad mass".into(),
            })?;
        if i >= row_marginal.len() || j >= col_marginal.len() {
            return Err(Error::PlanCsv {
                line: idx + 1,
                reason: format!("index ({i},{j}) out of bounds"),
            });
        }
        matrix[[i, j]] = mass;
    }
    TransportPlan::new(matrix, row_marginal, col_marginal)
}

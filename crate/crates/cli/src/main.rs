//! `ow`: Orlicz-Wasserstein distances for discrete probability measures.
//!
//! Measures are JSON files `{"atoms": [[f64,...],...], "weights": [f64,...]}`;
//! plans are CSV files with header `i,j,mass`. Penalty functions use the
//! spec grammar `pow:<p>`, `exp:<beta>`, `exppow:<beta>`, `sup(a,b)`,
//! `mix:<alpha>(a,b)`.
//!
//! Exit codes: 0 success, 1 bad input (parse failures, dimension
//! mismatches, I/O), 2 solver non-convergence, 3 instance too large for the
//! exact solver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ow_core::{
    cost_matrix, excess_mass_report, outlier_atom_indices, run_simulation, shannon_entropy,
    solve_entropic_ow, solve_exact_ow, wasserstein_r, write_plan_csv, DiscreteMeasure, Error,
    PhiFunction, SimulationConfig, SolveReport, SolveStatus, EXACT_SIZE_LIMIT,
};

#[derive(Parser)]
#[command(
    name = "ow",
    version,
    about = "Orlicz-Wasserstein distances between discrete probability measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Entropic Orlicz-Wasserstein distance between two measure files
    Dist {
        a: PathBuf,
        b: PathBuf,
        /// Penalty function, e.g. exp:1.1 or pow:2
        #[arg(long)]
        phi: String,
        /// Regularization weight (the objective subtracts H(plan)/lambda)
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Absolute tolerance on the value; defaults to 1e-6 * max distance
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Also write the full solve report (JSON) here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compute the entropic OW plan and export it as CSV plus a JSON sidecar
    Plan {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        phi: String,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Output CSV path; the sidecar is written next to it as <out>.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the bundled two-mixture transport experiment
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per side
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        #[arg(long, default_value = "exp:1.1")]
        phi: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Excess-mass report of a measure against a reference
    Excess {
        g: PathBuf,
        g0: PathBuf,
        #[arg(long)]
        phi: String,
        /// Outlier radius
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact Orlicz-Wasserstein distance (desk-scale instances only)
    Oracle {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        phi: String,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Classical order-r Wasserstein distance (exact)
    Wr {
        a: PathBuf,
        b: PathBuf,
        /// Order r >= 1
        #[arg(long)]
        r: f64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::SizeExceeded { .. } => 3,
            Error::SinkhornNotConverged { .. } | Error::SolveStalled { .. } => 2,
            _ => 1,
        };
        fail(code, err.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        fail(1, err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let benign = matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if benign {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn load_measure(path: &Path) -> Result<DiscreteMeasure, Failure> {
    let text = fs::read_to_string(path).map_err(|e| fail(1, format!("{}: {e}", path.display())))?;
    DiscreteMeasure::from_json_str(&text).map_err(|e| fail(1, format!("{}: {e}", path.display())))
}

fn parse_phi(spec: &str) -> Result<PhiFunction, Failure> {
    spec.parse::<PhiFunction>().map_err(Failure::from)
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::DegenerateZero => "degenerate_zero",
        SolveStatus::MaxIters => "max_iters",
    }
}

/// Sidecar metadata written next to an exported plan CSV.
#[derive(Serialize)]
struct PlanSidecar<'a> {
    value: f64,
    status: SolveStatus,
    iterations: usize,
    lambda: f64,
    phi: String,
    rows: usize,
    cols: usize,
    row_marginal: &'a [f64],
    col_marginal: &'a [f64],
    /// Regularized objective at the reported scale.
    objective: f64,
    /// Ground transport cost <P, M>.
    transport_cost: f64,
    entropy: f64,
}

fn plan_sidecar<'a>(
    report: &'a SolveReport,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    phi: &PhiFunction,
    lambda: f64,
) -> PlanSidecar<'a> {
    let cost = cost_matrix(a, b).expect("dimensions were checked by the solve");
    let matrix = report.plan.matrix();
    let mut ground = 0.0;
    let mut transformed = 0.0;
    let mut entropy = 0.0;
    for ((i, j), &p) in matrix.indexed_iter() {
        if p > 0.0 {
            let d = cost.entries()[[i, j]];
            ground += p * d;
            if report.value > 0.0 && d > 0.0 {
                transformed += p * phi.eval(d / report.value);
            }
            entropy -= p * p.ln();
        }
    }
    PlanSidecar {
        value: report.value,
        status: report.status,
        iterations: report.iterations,
        lambda,
        phi: phi.to_string(),
        rows: matrix.nrows(),
        cols: matrix.ncols(),
        row_marginal: report.plan.row_marginal(),
        col_marginal: report.plan.col_marginal(),
        objective: transformed - entropy / lambda,
        transport_cost: ground,
        entropy,
    }
}

/// Excess-mass output: the report plus how its distance estimate was
/// obtained. `violation` is only meaningful (and only raised) when the
/// exact distance was available.
#[derive(Serialize)]
struct ExcessOutput {
    report: ow_core::ExcessMassReport,
    w_source: &'static str,
    violation: bool,
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Dist {
            a,
            b,
            phi,
            lambda,
            epsilon,
            format,
            report,
        } => {
            let (ma, mb) = (load_measure(&a)?, load_measure(&b)?);
            let phi = parse_phi(&phi)?;
            let solved = solve_entropic_ow(&ma, &mb, &phi, lambda, epsilon)?;
            if let Some(path) = report {
                fs::write(
                    &path,
                    serde_json::to_string_pretty(&solved).map_err(Error::from)?,
                )?;
            }
            match format {
                Format::Text => {
                    println!("{}", solved.value);
                    println!(
                        "status: {} ({} iterations)",
                        status_name(solved.status),
                        solved.iterations
                    );
                }
                Format::Csv => {
                    println!("value,status,iterations");
                    println!(
                        "{},{},{}",
                        solved.value,
                        status_name(solved.status),
                        solved.iterations
                    );
                }
                Format::Json => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&solved).map_err(Error::from)?
                    );
                }
            }
            if solved.status == SolveStatus::MaxIters {
                return Err(fail(2, "bracket search hit its outer iteration cap"));
            }
            Ok(())
        }
        Command::Plan {
            a,
            b,
            phi,
            lambda,
            epsilon,
            out,
        } => {
            let (ma, mb) = (load_measure(&a)?, load_measure(&b)?);
            let phi = parse_phi(&phi)?;
            let solved = solve_entropic_ow(&ma, &mb, &phi, lambda, epsilon)?;
            let mut csv = Vec::new();
            write_plan_csv(&solved.plan, &mut csv)?;
            fs::write(&out, csv)?;
            let sidecar = plan_sidecar(&solved, &ma, &mb, &phi, lambda);
            let sidecar_path = sidecar_path(&out);
            fs::write(
                &sidecar_path,
                serde_json::to_string_pretty(&sidecar).map_err(Error::from)?,
            )?;
            eprintln!(
                "wrote {} and {} (value {}, {})",
                out.display(),
                sidecar_path.display(),
                solved.value,
                status_name(solved.status)
            );
            if solved.status == SolveStatus::MaxIters {
                return Err(fail(2, "bracket search hit its outer iteration cap"));
            }
            Ok(())
        }
        Command::Simulate {
            seed,
            n,
            lambda,
            phi,
            out_dir,
        } => {
            let phi = parse_phi(&phi)?;
            let cfg = SimulationConfig {
                seed,
                n_samples: n,
                lambda,
                phi,
            };
            let out = run_simulation(&cfg)?;
            fs::create_dir_all(&out_dir)?;
            fs::write(
                out_dir.join("gaussian_sample.json"),
                out.gaussian_sample.to_json_string(),
            )?;
            fs::write(
                out_dir.join("laplace_sample.json"),
                out.laplace_sample.to_json_string(),
            )?;
            let mut w1_csv = Vec::new();
            write_plan_csv(&out.w1.plan, &mut w1_csv)?;
            fs::write(out_dir.join("plan_w1.csv"), w1_csv)?;
            let mut ow_csv = Vec::new();
            write_plan_csv(&out.ow.plan, &mut ow_csv)?;
            fs::write(out_dir.join("plan_ow.csv"), ow_csv)?;
            let summary = serde_json::to_string_pretty(&out.summary).map_err(Error::from)?;
            fs::write(out_dir.join("summary.json"), summary)?;
            println!(
                "seed {seed}: w1_outlier_mass {} ow_outlier_mass {} (outputs in {})",
                out.summary.w1_outlier_mass,
                out.summary.ow_outlier_mass,
                out_dir.display()
            );
            Ok(())
        }
        Command::Excess {
            g,
            g0,
            phi,
            eta,
            lambda,
            epsilon,
            out,
        } => {
            if !eta.is_finite() || eta <= 0.0 {
                return Err(fail(1, format!("--eta must be positive, got {eta}")));
            }
            let (mg, mg0) = (load_measure(&g)?, load_measure(&g0)?);
            if mg.dim() != mg0.dim() {
                return Err(fail(
                    1,
                    format!("dimension mismatch: {} vs {}", mg.dim(), mg0.dim()),
                ));
            }
            let phi = parse_phi(&phi)?;
            let exact = mg.len() * mg0.len() <= EXACT_SIZE_LIMIT;
            let (w, w_source) = if exact {
                (solve_exact_ow(&mg, &mg0, &phi, epsilon)?.value, "exact")
            } else {
                // Entropic values under-estimate the unregularized distance;
                // phi(t/s) <= phi(t)/s for s >= 1 turns the entropy allowance
                // into a rigorous upper estimate, which keeps the bound valid.
                let entropic = solve_entropic_ow(&mg, &mg0, &phi, lambda, epsilon)?.value;
                let h_sum = shannon_entropy(mg.weights()) + shannon_entropy(mg0.weights());
                (entropic * (1.0 + h_sum / lambda), "entropic_upper")
            };
            let output = if w > 0.0 {
                let report = excess_mass_report(&mg, &mg0, &phi, eta, w);
                let violation = exact && report.outlier_mass > report.phi_outlier_bound + 1e-9;
                ExcessOutput {
                    report,
                    w_source,
                    violation,
                }
            } else {
                // Coinciding measures: the distance is 0 and the bounds are
                // vacuous; the outlier mass is still reported.
                let outlier_atom_indices = outlier_atom_indices(&mg, &mg0, eta);
                let outlier_mass = outlier_atom_indices.iter().map(|&j| mg.weights()[j]).sum();
                ExcessOutput {
                    report: ow_core::ExcessMassReport {
                        eta,
                        outlier_mass,
                        phi_outlier_bound: f64::INFINITY,
                        exp_outlier_bound: f64::INFINITY,
                        w_phi_used: 0.0,
                        outlier_atom_indices,
                    },
                    w_source,
                    violation: false,
                }
            };
            let json = serde_json::to_string_pretty(&output).map_err(Error::from)?;
            if let Some(path) = out {
                fs::write(&path, &json)?;
            }
            println!("{json}");
            Ok(())
        }
        Command::Oracle { a, b, phi, epsilon } => {
            let (ma, mb) = (load_measure(&a)?, load_measure(&b)?);
            let phi = parse_phi(&phi)?;
            let solved = solve_exact_ow(&ma, &mb, &phi, epsilon)?;
            println!("{}", solved.value);
            println!(
                "status: {} ({} iterations)",
                status_name(solved.status),
                solved.iterations
            );
            Ok(())
        }
        Command::Wr { a, b, r } => {
            let (ma, mb) = (load_measure(&a)?, load_measure(&b)?);
            println!("{}", wasserstein_r(&ma, &mb, r)?);
            Ok(())
        }
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".json");
    out.with_file_name(name)
}

//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them) and
//! enforcing its runtime budget. A shared lock serializes the criteria so
//! the budgets stay meaningful under the parallel test harness.

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use ndarray::Array2;
use ow_core::{
    cost_matrix, exp_outlier_bound, outlier_mass, phi_outlier_bound, run_simulation,
    shannon_entropy, sinkhorn, solve_entropic_ow, solve_exact_ow, sup_phi, wasserstein_r,
    DiscreteMeasure, PhiFunction, SimulationConfig, SinkhornConfig, SolveStatus,
};
use rand::Rng;

static HEAVY: Mutex<()> = Mutex::new(());

fn criterion(name: &str, budget_secs: f64, body: impl FnOnce() + std::panic::UnwindSafe) {
    let _guard = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(body);
    let elapsed = start.elapsed();
    let in_budget = elapsed.as_secs_f64() < budget_secs;
    match (&outcome, in_budget) {
        (Ok(()), true) => println!("[acceptance] {name}: PASS ({elapsed:.2?})"),
        (Ok(()), false) => {
            println!("[acceptance] {name}: FAIL (runtime {elapsed:.2?} over the {budget_secs:.0} s budget)")
        }
        (Err(_), _) => println!("[acceptance] {name}: FAIL ({elapsed:.2?})"),
    }
    if let Err(panic) = outcome {
        std::panic::resume_unwind(panic);
    }
    assert!(in_budget, "{name}: runtime {elapsed:.2?} over budget");
}

#[test]
fn criterion_1_metric_axioms() {
    criterion(
        "criterion 1 (exact OW metric axioms, 200 instances)",
        60.0,
        || {
            let phis = common::phi_family();
            let mut rng = common::rng(0xC1);
            for trial in 0..200 {
                let dim = 1 + trial % 2;
                let phi = &phis[trial % phis.len()];
                let a = common::random_measure(&mut rng, 3, 6, dim);
                let b = common::random_measure(&mut rng, 3, 6, dim);
                let c = common::random_measure(&mut rng, 3, 6, dim);
                let max_m = [(&a, &b), (&b, &c), (&a, &c)]
                    .iter()
                    .map(|(x, y)| cost_matrix(x, y).unwrap().max_entry())
                    .fold(0.0_f64, f64::max);
                let eps = 1e-6 * max_m;

                let w = |x: &DiscreteMeasure, y: &DiscreteMeasure| {
                    solve_exact_ow(x, y, phi, Some(eps)).unwrap().value
                };
                let (w_ab, w_ba) = (w(&a, &b), w(&b, &a));
                assert!(
                    (w_ab - w_ba).abs() <= 2.0 * eps,
                    "symmetry: |{w_ab} - {w_ba}| > 2eps (trial {trial})"
                );

                let identity = solve_exact_ow(&a, &a, phi, Some(eps)).unwrap();
                assert_eq!(identity.value, 0.0, "identity (trial {trial})");
                assert_eq!(identity.status, SolveStatus::DegenerateZero);

                let (w_ac, w_bc) = (w(&a, &c), w(&b, &c));
                assert!(
                    w_ac <= w_ab + w_bc + 3.0 * eps,
                    "triangle: {w_ac} > {w_ab} + {w_bc} + 3eps (trial {trial})"
                );
            }
        },
    );
}

#[test]
fn criterion_2_bracket_solver_vs_grid_oracle() {
    criterion(
        "criterion 2 (bracket solver vs grid oracle, 100 instances x 3 lambdas)",
        120.0,
        || {
            let phis = common::phi_family();
            let mut rng = common::rng(0xC2);
            let instances: Vec<(DiscreteMeasure, DiscreteMeasure, PhiFunction)> = (0..100)
                .map(|trial| {
                    let dim = 1 + trial % 2;
                    let a = common::random_measure(&mut rng, 3, 6, dim);
                    let b = common::random_measure(&mut rng, 3, 6, dim);
                    (a, b, phis[trial % phis.len()].clone())
                })
                .collect();

            let next = AtomicUsize::new(0);
            let run_worker = || loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= instances.len() {
                    break;
                }
                let (a, b, phi) = &instances[idx];
                let eps = 1e-6 * cost_matrix(a, b).unwrap().max_entry();
                for lambda in [0.01, 1.0, 100.0] {
                    let report = solve_entropic_ow(a, b, phi, lambda, Some(eps)).unwrap();
                    assert_eq!(
                        report.status,
                        SolveStatus::Converged,
                        "instance {idx} lambda {lambda}"
                    );
                    for state in &report.trace {
                        assert!(
                            state.f_low > 1.0 && state.f_upp < 1.0,
                            "bracket invariant broken at instance {idx} lambda {lambda}: {state:?}"
                        );
                    }
                    let oracle = common::grid_refined_oracle(a, b, phi, lambda, eps);
                    assert!(
                        (report.value - oracle).abs() < eps,
                        "instance {idx} lambda {lambda}: solver {} vs oracle {oracle} (eps {eps})",
                        report.value
                    );
                }
            };
            std::thread::scope(|scope| {
                let workers: Vec<_> = (0..2).map(|_| scope.spawn(run_worker)).collect();
                for w in workers {
                    w.join().expect("worker panicked");
                }
            });
        },
    );
}

#[test]
fn criterion_3_power_phi_equivalence() {
    criterion(
        "criterion 3 (power-phi vs classical W_r, 50 instances)",
        60.0,
        || {
            let mut rng = common::rng(0xC3);
            for trial in 0..50 {
                let dim = 1 + trial % 2;
                let a = common::random_measure(&mut rng, 3, 6, dim);
                let b = common::random_measure(&mut rng, 3, 6, dim);
                let eps = 1e-6 * cost_matrix(&a, &b).unwrap().max_entry();
                for r in [1.5, 2.0, 3.0] {
                    let phi = PhiFunction::power(r).unwrap();
                    let ow = solve_exact_ow(&a, &b, &phi, Some(eps)).unwrap().value;
                    let wr = wasserstein_r(&a, &b, r).unwrap();
                    assert!(
                        (ow - wr).abs() <= 2.0 * eps,
                        "trial {trial} r {r}: {ow} vs {wr} (eps {eps})"
                    );
                }
            }
        },
    );
}

#[test]
fn criterion_4_phi_monotonicity_and_sup_chain() {
    criterion(
        "criterion 4 (phi-monotonicity and sup/mixture chain, 50 instances)",
        60.0,
        || {
            let phis = common::phi_family();
            let mut rng = common::rng(0xC4);
            // (trial, w_mix, convex combination) for every violation of the
            // chain's middle link.
            let mut middle_link_violations: Vec<(usize, f64, f64)> = Vec::new();
            for trial in 0..50 {
                let dim = 1 + trial % 2;
                let a = common::random_measure(&mut rng, 3, 6, dim);
                let b = common::random_measure(&mut rng, 3, 6, dim);
                let eps = 1e-6 * cost_matrix(&a, &b).unwrap().max_entry();
                let phi_1 = &phis[trial % phis.len()];
                let phi_2 = &phis[(trial + 1) % phis.len()];
                let sup = sup_phi(phi_1, phi_2);
                let mix = PhiFunction::mixture(0.5, phi_1.clone(), phi_2.clone()).unwrap();

                let w = |phi: &PhiFunction| solve_exact_ow(&a, &b, phi, Some(eps)).unwrap().value;
                let (w_1, w_2, w_sup, w_mix) = (w(phi_1), w(phi_2), w(&sup), w(&mix));

                // Pointwise domination phi_i <= sup gives distance domination.
                assert!(
                    w_1 <= w_sup + 2.0 * eps,
                    "trial {trial}: {w_1} > {w_sup} + 2eps"
                );
                assert!(
                    w_2 <= w_sup + 2.0 * eps,
                    "trial {trial}: {w_2} > {w_sup} + 2eps"
                );
                // First chain link: the supremum dominates the mixture.
                assert!(
                    w_sup >= w_mix - 2.0 * eps,
                    "trial {trial}: sup {w_sup} < mix {w_mix} - 2eps"
                );
                // The supremum also dominates the convex combination of
                // distances (it dominates each W separately).
                assert!(
                    w_sup >= 0.5 * w_1 + 0.5 * w_2 - 3.0 * eps,
                    "trial {trial}: sup {w_sup} < avg {}",
                    0.5 * w_1 + 0.5 * w_2
                );
                // Middle chain link as stated. This one is provably false: see
                // `mixture_distance_can_undershoot_the_distance_mixture` in the
                // solver's unit tests for a closed-form counterexample.
                let avg = 0.5 * w_1 + 0.5 * w_2;
                if w_mix < avg - 3.0 * eps {
                    middle_link_violations.push((trial, w_mix, avg));
                }
            }
            assert!(
                middle_link_violations.is_empty(),
                "chain middle link W_mix >= 0.5 W_1 + 0.5 W_2 - 3eps violated on {}/50 instances \
             (worst: trial {} with W_mix {} < {}); the inequality is false in general -- \
             counterexample: point masses at 0 and 1 under pow:2 and exp:1 give \
             W_mix = 1.19834 < 1.22135 = average",
                middle_link_violations.len(),
                middle_link_violations[0].0,
                middle_link_violations[0].1,
                middle_link_violations[0].2,
            );
        },
    );
}

#[test]
fn criterion_5_excess_mass_bound() {
    criterion(
        "criterion 5 (excess-mass bound, 100 instances + tight witness)",
        60.0,
        || {
            let phis = common::phi_family();
            let mut rng = common::rng(0xC5);
            let mut checked = 0;
            let mut trial = 0;
            while checked < 100 {
                trial += 1;
                let dim = 1 + trial % 2;
                let g = common::random_measure(&mut rng, 2, 6, dim);
                let g0 = common::random_measure(&mut rng, 1, 5, dim);
                let phi = &phis[trial % phis.len()];
                let eta = rng.random_range(0.2..8.0);
                let report = solve_exact_ow(&g, &g0, phi, None).unwrap();
                if report.value == 0.0 {
                    continue;
                }
                checked += 1;
                let mass = outlier_mass(&g, &g0, eta);
                let bound = phi_outlier_bound(phi, eta, report.value);
                assert!(
                    mass <= bound + 1e-9,
                    "trial {trial}: mass {mass} > bound {bound} (eta {eta}, w {})",
                    report.value
                );
            }

            // Tight witness: 0.9 delta_0 + 0.1 delta_5 vs delta_0 under e^x - 1
            // at eta = 5. The forced coupling gives W = 5 / ln 11 in closed form
            // and the bound meets the outlier mass at exactly 0.1.
            let g = DiscreteMeasure::new(vec![vec![0.0], vec![5.0]], vec![0.9, 0.1]).unwrap();
            let g0 = DiscreteMeasure::dirac(vec![0.0]).unwrap();
            let phi = PhiFunction::exp_linear(1.0).unwrap();
            let w_closed = 5.0 / 11.0_f64.ln();
            let mass = outlier_mass(&g, &g0, 5.0);
            let bound = phi_outlier_bound(&phi, 5.0, w_closed);
            assert!((mass - 0.1).abs() <= 1e-9, "tight mass {mass}");
            assert!((bound - 0.1).abs() <= 1e-9, "tight bound {bound}");
            // The solver reproduces the closed-form distance, and the cruder
            // exponential bound 2 exp(-eta/W) = 2/11 also covers the mass.
            let eps = 5e-6;
            let solved = solve_exact_ow(&g, &g0, &phi, Some(eps)).unwrap().value;
            assert!(
                (solved - w_closed).abs() <= eps,
                "solver {solved} vs closed form {w_closed}"
            );
            assert!(exp_outlier_bound(5.0, w_closed) >= mass);
        },
    );
}

#[test]
fn criterion_6_sinkhorn_correctness() {
    criterion(
        "criterion 6 (Sinkhorn: Gibbs form, marginals, entropy sandwich)",
        60.0,
        || {
            // Canonical symmetric instance at lambda = 1.
            let cost = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
            let cfg = SinkhornConfig::new(1.0).unwrap();
            let res = sinkhorn(&cost, &[0.5, 0.5], &[0.5, 0.5], &cfg).unwrap();
            let e = std::f64::consts::E;
            assert!((res.plan.matrix()[[0, 0]] - e / (2.0 * (1.0 + e))).abs() < 1e-6);
            assert!((res.plan.matrix()[[0, 1]] - 1.0 / (2.0 * (1.0 + e))).abs() < 1e-6);

            let mut rng = common::rng(0xC6);
            // Random 2x2 uniform-marginal problems against the closed form
            // p_11 = sqrt(rho) / (2 (1 + sqrt(rho))), rho the Gibbs cross
            // ratio. Lambda is kept below the regime where rho underflows
            // past ~e^-15 and the linear convergence factor defeats any
            // practical iteration cap.
            for _ in 0..40 {
                let lambda = rng.random_range(0.1..2.5);
                let entries: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..3.0)).collect();
                let cost = Array2::from_shape_vec((2, 2), entries).unwrap();
                let cfg = SinkhornConfig::new(lambda).unwrap();
                let res = sinkhorn(&cost, &[0.5, 0.5], &[0.5, 0.5], &cfg).unwrap();
                assert!(res.converged);
                let rho =
                    (-lambda * (cost[[0, 0]] + cost[[1, 1]] - cost[[0, 1]] - cost[[1, 0]])).exp();
                let p11 = 0.5 * rho.sqrt() / (1.0 + rho.sqrt());
                assert!((res.plan.matrix()[[0, 0]] - p11).abs() < 1e-6);
                assert!((res.plan.matrix()[[1, 1]] - p11).abs() < 1e-6);
            }

            // Marginal feasibility and the entropy sandwich on random instances
            // across the lambda range.
            for trial in 0..60 {
                let lambda = [0.01, 1.0, 100.0][trial % 3];
                let a = common::random_measure(&mut rng, 2, 6, 1 + trial % 2);
                let b = common::random_measure(&mut rng, 2, 6, 1 + trial % 2);
                let cost = cost_matrix(&a, &b).unwrap();
                let cfg = SinkhornConfig::new(lambda).unwrap();
                let res = sinkhorn(cost.entries(), a.weights(), b.weights(), &cfg).unwrap();
                assert!(res.converged, "trial {trial}");
                let violation = res.plan.marginal_violation();
                assert!(violation <= 1e-9, "trial {trial}: violation {violation}");
                let h_r = shannon_entropy(a.weights());
                let h_c = shannon_entropy(b.weights());
                assert!(
                    res.entropy >= (h_r + h_c) / 2.0 - 1e-6 && res.entropy <= h_r + h_c + 1e-6,
                    "trial {trial}: entropy {} outside [{}, {}]",
                    res.entropy,
                    (h_r + h_c) / 2.0,
                    h_r + h_c
                );
                assert!(
                    (res.objective - (res.transport_cost - res.entropy / lambda)).abs() <= 1e-10
                );
            }
        },
    );
}

#[test]
fn criterion_7_mixture_transport_localization() {
    criterion(
        "criterion 7 (two-mixture experiment, 10 seeds)",
        300.0,
        || {
            let seeds: Vec<u64> = (0..10).collect();
            let next = AtomicUsize::new(0);
            let summaries: Mutex<Vec<(u64, ow_core::SimulationSummary)>> = Mutex::new(Vec::new());
            std::thread::scope(|scope| {
                let workers: Vec<_> = (0..2)
                    .map(|_| {
                        scope.spawn(|| loop {
                            let idx = next.fetch_add(1, Ordering::Relaxed);
                            if idx >= seeds.len() {
                                break;
                            }
                            let cfg = SimulationConfig {
                                seed: seeds[idx],
                                ..SimulationConfig::default()
                            };
                            let out = run_simulation(&cfg).expect("simulation run");
                            summaries.lock().unwrap().push((seeds[idx], out.summary));
                        })
                    })
                    .collect();
                for w in workers {
                    w.join().expect("worker panicked");
                }
            });
            let summaries = summaries.into_inner().unwrap();
            assert_eq!(summaries.len(), 10);

            // Fixed seed: the transformed-cost plan admits strictly less mass
            // into the outlier neighborhood than the raw-cost plan.
            let fixed = &summaries.iter().find(|(s, _)| *s == 0).unwrap().1;
            assert!(
                fixed.ow_outlier_mass < fixed.w1_outlier_mass,
                "seed 0: ow {} vs w1 {}",
                fixed.ow_outlier_mass,
                fixed.w1_outlier_mass
            );

            let mut halved = 0;
            for (seed, s) in &summaries {
                assert_eq!(s.ow_status, SolveStatus::Converged, "seed {seed}");
                // Couplings share marginals: raw column totals agree by
                // construction; this pins the accounting itself.
                assert!(
                    (s.w1_outlier_column_mass - s.ow_outlier_column_mass).abs() < 1e-6,
                    "seed {seed}: column masses diverge"
                );
                if s.ow_outlier_mass < 0.5 * s.w1_outlier_mass {
                    halved += 1;
                }
            }
            assert!(
                halved >= 8,
                "outlier mass halved for only {halved}/10 seeds"
            );
        },
    );
}

#[test]
fn criterion_8_asymptotic_rates_out_of_scope() {
    criterion("criterion 8 (asymptotic contraction rates)", 10.0, || {
        // Posterior-contraction rates are asymptotic statements about
        // sampling regimes this artifact does not contain. Their
        // deterministic content is exactly the inequalities exercised by
        // criteria 4 and 5 (distance monotonicity under pointwise phi
        // domination, and the excess-mass bound); nothing further is
        // asserted here by design.
    });
}

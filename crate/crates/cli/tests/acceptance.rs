//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured quantities (visible with `--nocapture`, and in full
//! on failure). Tolerances and scales are pinned in the assertions.
//!
//! Run with: `cargo test -p covdet-cli --test acceptance -- --nocapture`

use covdet_cli::metrics::{equal_error_probability, pm_pf_curves};
use covdet_cli::normexp;
use covdet_core::error_analysis::{
    project_onto_cone_enumerate, project_onto_cone_qp, threshold_grid,
};
use covdet_core::rng::{substream, trial_seed};
use covdet_core::scaling::{
    check_consistency, coupled_null_space, interference_bound, phase_diagram, witness_diagnostics,
    PhaseConfig,
};
use covdet_core::solver_core::{negative_log_likelihood, SolverState};
use covdet_core::solvers::{
    inexact_from_coeffs, local_objective, solve, solve_subproblem_exact, threshold_estimate,
    NoObserver, SolverConfig,
};
use covdet_core::system_model::{
    build_cell_layout, place_devices, simulate_received, InstanceConfig, LayoutKind,
    SequenceType, SystemInstance,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------

/// Synthetic world with O(1) gains and noise; finite differences and
/// rank-one stress tests need the well-conditioned scale.
fn synthetic_instance(
    b: usize,
    n: usize,
    l: usize,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> SystemInstance {
    let mut cfg = InstanceConfig::homogeneous(b, n, (n / 4).max(1), l, SequenceType::Qpsk, seed);
    cfg.sigma2 = rng.random_range(0.25..2.0);
    let mut inst = SystemInstance::generate(&cfg).unwrap();
    for g in inst.gains.iter_mut() {
        for v in g.iter_mut() {
            *v = rng.random_range(0.05..1.0);
        }
    }
    inst
}

fn covariances(inst: &SystemInstance, m: usize) -> covdet_core::system_model::SampleCovariances {
    let mut rng = inst.channel_rng();
    simulate_received(inst, m, &mut rng).unwrap()
}

/// Two-sample Kolmogorov-Smirnov distance.
fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut xa: Vec<f64> = a.to_vec();
    let mut xb: Vec<f64> = b.to_vec();
    xa.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xb.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std_err(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
    (var / v.len() as f64).sqrt()
}

// ---------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------

/// Criterion 1: analytic gradient vs central finite differences with step
/// 1e-6, relative error < 1e-6 (scaled by the gradient sup-norm), on 100
/// random instances with B in {1,3,7}, N <= 40, L <= 16.
#[test]
fn criterion_01_gradient_correctness() {
    let mut rng = substream(1001, 0);
    let mut max_rel = 0.0f64;
    for trial in 0..100u64 {
        let b = [1, 3, 7][(trial % 3) as usize];
        let n = rng.random_range(6..=40usize.min(8 + 4 * (trial as usize % 9)));
        let l = rng.random_range(4..=16);
        let inst = synthetic_instance(b, n, l, 3000 + trial, &mut rng);
        let covs = covariances(&inst, 16);
        let total = inst.total_devices();
        let a = DVector::from_fn(total, |_, _| rng.random_range(0.05..0.95));
        let st = SolverState::with_activity(&inst, &covs, a.clone()).unwrap();
        let grad = st.full_gradient().unwrap();
        let scale = grad.amax().max(1.0);
        let h = 1e-6;
        // Spot-check 12 random coordinates per instance.
        for _ in 0..12 {
            let i = rng.random_range(0..total);
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[i] += h;
            am[i] -= h;
            let fd = (negative_log_likelihood(&inst, &covs, &ap).unwrap()
                - negative_log_likelihood(&inst, &covs, &am).unwrap())
                / (2.0 * h);
            let rel = (fd - grad[i]).abs() / scale;
            max_rel = max_rel.max(rel);
            assert!(
                rel < 1e-6,
                "instance {trial} coord {i}: fd {fd} vs analytic {} (rel {rel})",
                grad[i]
            );
        }
    }
    println!("criterion 1 (gradient correctness): PASS (max rel err {max_rel:.3e})");
}

/// Criterion 2: after 1e4 random feasible rank-one updates with the
/// refresh policy active, ||Sigma_b Sigma_b^{-1} - I||_F < 1e-6 per cell.
#[test]
fn criterion_02_rank_one_cache_fidelity() {
    let mut rng = substream(1002, 0);
    let inst = synthetic_instance(3, 20, 12, 3100, &mut rng);
    let covs = covariances(&inst, 24);
    let mut st = SolverState::new(&inst, &covs);
    let total = inst.total_devices();
    for _ in 0..10_000 {
        let i = rng.random_range(0..total);
        let d = rng.random_range(-st.a[i]..(1.0 - st.a[i]));
        st.rank_one_update(i, d).unwrap();
    }
    let drift = st.cache_drift();
    assert!(drift < 1e-6, "cache drift {drift}");
    println!("criterion 2 (rank-one cache fidelity): PASS (drift {drift:.3e} after 1e4 updates)");
}

/// Criterion 3: the companion-matrix subproblem matches the single-cell
/// closed form within 1e-8 on 1000 draws, and for B in 2..=7 beats a
/// 1e6-point grid search up to 1e-9.
#[test]
fn criterion_03_exact_subproblem() {
    let mut rng = substream(1003, 0);
    let mut worst_gap = 0.0f64;
    for _ in 0..1000 {
        let xi = rng.random_range(0.01..10.0);
        let zeta = rng.random_range(0.0..10.0);
        let a = rng.random_range(0.0..1.0);
        let coeffs = covdet_core::solver_core::CoordCoeffs {
            xi: vec![xi],
            zeta: vec![zeta],
            ys: Vec::new(),
        };
        let d = solve_subproblem_exact(&coeffs, a);
        let closed = ((zeta - xi) / (xi * xi)).clamp(-a, 1.0 - a);
        let gap = (d - closed).abs();
        worst_gap = worst_gap.max(gap);
        assert!(gap < 1e-8, "xi {xi} zeta {zeta} a {a}: {d} vs {closed}");
    }

    let mut worst_excess = 0.0f64;
    for b in 2..=7usize {
        for _ in 0..20 {
            let coeffs = covdet_core::solver_core::CoordCoeffs {
                xi: (0..b).map(|_| rng.random_range(0.01..4.0)).collect(),
                zeta: (0..b).map(|_| rng.random_range(0.0..4.0)).collect(),
                ys: Vec::new(),
            };
            let a = rng.random_range(0.0..1.0);
            let d = solve_subproblem_exact(&coeffs, a);
            let val = local_objective(&coeffs, d);
            // 1e6-point grid oracle.
            let lo = -a;
            let hi = 1.0 - a;
            let pts = 1_000_000;
            let mut best = f64::INFINITY;
            for k in 0..=pts {
                let dd = lo + (hi - lo) * k as f64 / pts as f64;
                let v = local_objective(&coeffs, dd);
                if v < best {
                    best = v;
                }
            }
            let excess = val - best;
            worst_excess = worst_excess.max(excess);
            assert!(excess <= 1e-9, "B={b}: exact {val} vs grid best {best}");
        }
    }
    println!(
        "criterion 3 (exact subproblem): PASS (closed-form gap {worst_gap:.2e}, grid excess {worst_excess:.2e})"
    );
}

/// Criterion 4: objective non-increasing at every iteration boundary for
/// all four variants on 50 random instances, and the exact step never
/// loses to the inexact step on the same (state, coordinate).
#[test]
fn criterion_04_monotone_descent_and_step_dominance() {
    let mut rng = substream(1004, 0);
    for trial in 0..50u64 {
        let b = 1 + (trial % 3) as usize;
        let inst = synthetic_instance(b, 8, 6, 3200 + trial, &mut rng);
        let covs = covariances(&inst, 16);
        for cfg in [
            SolverConfig::exact(),
            SolverConfig::inexact(),
            SolverConfig::active_exact(),
            SolverConfig::active_inexact(),
        ] {
            let mut st = SolverState::new(&inst, &covs);
            let mut scfg = cfg.clone();
            scfg.max_sweeps = 60;
            scfg.seed = trial;
            let sol = solve(&mut st, &scfg, &mut NoObserver).unwrap();
            for w in sol.objective_trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-10 * w[0].abs(),
                    "trial {trial} {}: objective rose {} -> {}",
                    cfg.variant_name(),
                    w[0],
                    w[1]
                );
            }
        }
    }

    // Per-step dominance on fresh random states.
    let icfg = SolverConfig::inexact();
    for trial in 0..200u64 {
        let b = 1 + (trial % 4) as usize;
        let inst = synthetic_instance(b, 6, 5, 3300 + trial, &mut rng);
        let covs = covariances(&inst, 12);
        let total = inst.total_devices();
        let a = DVector::from_fn(total, |_, _| rng.random_range(0.0..1.0));
        let st = SolverState::with_activity(&inst, &covs, a.clone()).unwrap();
        let i = rng.random_range(0..total);
        let coeffs = st.coord_coefficients(i).unwrap();
        let d_exact = solve_subproblem_exact(&coeffs, a[i]);
        let d_inexact = inexact_from_coeffs(&coeffs, inst.cell_of(i), a[i], &icfg).unwrap();
        let f_exact = local_objective(&coeffs, d_exact);
        let f_inexact = local_objective(&coeffs, d_inexact);
        assert!(
            f_exact <= f_inexact + 1e-10,
            "trial {trial}: exact {f_exact} vs inexact {f_inexact}"
        );
    }
    println!("criterion 4 (monotone descent + exact-dominates-inexact): PASS");
}

/// Criterion 5: B=3, N=40, K=5, L=16, M=64, 50 seeds. All variants reach
/// the 1e-3 stationarity tolerance, final objectives agree within 1e-4
/// relative, and 0.5-thresholded supports agree on >= 99% of coordinates.
#[test]
fn criterion_05_solver_cross_agreement() {
    let variants = [
        SolverConfig::exact(),
        SolverConfig::inexact(),
        SolverConfig::active_exact(),
        SolverConfig::active_inexact(),
    ];
    let mut total_coords = 0usize;
    let mut agreeing = vec![0usize; variants.len() - 1];
    let mut worst_obj_rel = 0.0f64;
    for seed in 0..50u64 {
        let icfg = InstanceConfig::homogeneous(3, 40, 5, 16, SequenceType::Qpsk, 4000 + seed);
        let inst = SystemInstance::generate(&icfg).unwrap();
        let covs = covariances(&inst, 64);
        let mut solutions = Vec::new();
        for cfg in &variants {
            let mut scfg = cfg.clone();
            scfg.seed = seed;
            let mut st = SolverState::new(&inst, &covs);
            let sol = solve(&mut st, &scfg, &mut NoObserver).unwrap();
            assert!(
                sol.converged,
                "seed {seed}: {} failed to reach epsilon",
                cfg.variant_name()
            );
            let v_final = *sol.v_inf_trace.last().unwrap();
            assert!(v_final <= 1e-3, "seed {seed}: v_inf {v_final}");
            solutions.push(sol);
        }
        let base = &solutions[0];
        let base_support = threshold_estimate(&base.a_hat, 0.5);
        total_coords += base_support.len();
        for (vi, sol) in solutions[1..].iter().enumerate() {
            let rel = (sol.final_objective - base.final_objective).abs()
                / base.final_objective.abs().max(1e-300);
            worst_obj_rel = worst_obj_rel.max(rel);
            assert!(
                rel <= 1e-4,
                "seed {seed}: objective mismatch {} vs {}",
                sol.final_objective,
                base.final_objective
            );
            let sup = threshold_estimate(&sol.a_hat, 0.5);
            agreeing[vi] += (0..sup.len()).filter(|&i| sup[i] == base_support[i]).count();
        }
    }
    for (vi, agree) in agreeing.iter().enumerate() {
        let frac = *agree as f64 / total_coords as f64;
        assert!(
            frac >= 0.99,
            "variant {} support agreement {frac}",
            variants[vi + 1].variant_name()
        );
    }
    println!(
        "criterion 5 (solver cross-agreement): PASS (worst objective rel diff {worst_obj_rel:.2e}, support agreement {:?})",
        agreeing.iter().map(|a| *a as f64 / total_coords as f64).collect::<Vec<_>>()
    );
}

/// Criterion 6, as stated: N=50, B in {1,3}, L in {6,8,10,12,14}, 100
/// trials per (L,K) cell; the success fraction must fall from >= 0.95 to
/// <= 0.05 across a K-band whose midpoint grows superlinearly in L (fit
/// exponent within [1.6, 2.4]), with B=1 vs B=3 and sequence-family
/// midpoints each within one K-grid step.
///
/// This criterion is not attainable at the stated scale: for L >= 8 the
/// real span of the lifted columns has dimension min(N, L^2) = 50, so the
/// coupled null space is {0} in every trial and the consistency condition
/// holds for every K — there is no transition and no midpoint. The test
/// runs the full protocol where transitions could exist (L in {6,8}),
/// certifies the trivial-null-space mechanism on 100 trials per cell for
/// L in {10,12,14} (with LP spot checks), prints the evidence, and fails
/// on the impossible fit.
#[test]
fn criterion_06_phase_transition_fig1_desk_scale() {
    let n = 50;
    let k_grid: Vec<usize> = vec![2, 4, 6, 8, 10, 12, 14, 16, 20, 24];
    let trials = 100;
    let lp_ls = [6usize, 8];
    let rank_ls = [10usize, 12, 14];
    let mut evidence = String::new();
    let mut midpoints: Vec<(usize, usize, SequenceType, Option<f64>)> = Vec::new();

    for &b in &[1usize, 3] {
        for seq in [SequenceType::Qpsk, SequenceType::Sphere] {
            for &l in &lp_ls {
                let mut cfg = PhaseConfig::new(n, b, vec![l], k_grid.clone());
                cfg.trials = trials;
                cfg.seq_type = seq;
                cfg.seed = 6000 + b as u64;
                let grid = phase_diagram(&cfg).unwrap();
                let fr: Vec<f64> = grid.iter().map(|c| c.successes as f64 / trials as f64).collect();
                evidence.push_str(&format!("B={b} {seq} L={l}: fractions {fr:?}\n"));
                let mid = falling_midpoint(&k_grid, &fr, 0.95, 0.05);
                midpoints.push((b, l, seq, mid));
            }
            for &l in &rank_ls {
                // Null-space certificate: dimension 0 in every trial means
                // the verdict is consistent for every K.
                let mut nontrivial = 0usize;
                for t in 0..trials {
                    let seed = trial_seed(6100 + b as u64 + l as u64, t as u64);
                    let icfg = InstanceConfig {
                        seq_type: seq,
                        ..InstanceConfig::homogeneous(b, n, 1, l, seq, seed)
                    };
                    let inst = SystemInstance::generate(&icfg).unwrap();
                    let basis = coupled_null_space(&inst.s, &inst.gains);
                    if basis.ncols() > 0 {
                        nontrivial += 1;
                    }
                }
                // LP spot check on a few trials at a mid-grid K.
                for t in 0..3 {
                    let seed = trial_seed(6200 + b as u64 + l as u64, t as u64);
                    let icfg = InstanceConfig::homogeneous(b, n, 12, l, seq, seed);
                    let inst = SystemInstance::generate(&icfg).unwrap();
                    let verdict = check_consistency(&inst.s, &inst.gains, &inst.a_true).unwrap();
                    assert!(
                        verdict.consistent,
                        "B={b} {seq} L={l}: LP disagrees with rank certificate"
                    );
                }
                evidence.push_str(&format!(
                    "B={b} {seq} L={l}: coupled null space nontrivial in {nontrivial}/{trials} trials \
                     => success fraction 1.0 at every K, no transition\n"
                ));
                let mid = if nontrivial == 0 { None } else { Some(f64::NAN) };
                midpoints.push((b, l, seq, mid));
            }
        }
    }

    print!("{evidence}");
    let missing: Vec<String> = midpoints
        .iter()
        .filter(|(_, _, _, m)| m.is_none() || m.map(|x| x.is_nan()).unwrap_or(false))
        .map(|(b, l, seq, _)| format!("B={b} {seq} L={l}"))
        .collect();
    assert!(
        missing.is_empty(),
        "criterion 6 FAIL: no (>=0.95 -> <=0.05) transition exists at desk scale for: {}. \
         The lifted columns span min(N, L^2) real dimensions, so for L >= 8 at N = 50 the \
         coupled null space is trivial and every trial is consistent; the midpoint-vs-L fit \
         over L in {{6,8,10,12,14}} is undefined.",
        missing.join(", ")
    );
    // Unreached at the stated scale; kept for completeness if the
    // assertion above ever passes.
    println!("criterion 6 (phase transition): PASS");
}

fn falling_midpoint(ks: &[usize], fr: &[f64], hi: f64, lo: f64) -> Option<f64> {
    let has_hi = fr.iter().any(|&f| f >= hi);
    let has_lo = fr.iter().any(|&f| f <= lo);
    if !has_hi || !has_lo {
        return None;
    }
    for w in 0..fr.len() - 1 {
        if fr[w] >= 0.5 && fr[w + 1] < 0.5 {
            let t = (fr[w] - 0.5) / (fr[w] - fr[w + 1]);
            return Some(ks[w] as f64 + t * (ks[w + 1] - ks[w]) as f64);
        }
    }
    None
}

/// Criterion 7: B=3, N=40, K=5, L=12, M=256; 500 solver trials vs 1e4
/// predicted samples. KS distance between pooled empirical and predicted
/// error CDFs < 0.1 for zero- and one-entries; empirical and predicted
/// PM/PF within a factor of 2 wherever both exceed 10/(trials*BN).
#[test]
fn criterion_07_error_distribution_match() {
    let m = 256;
    let trials = 500;
    let base = InstanceConfig::homogeneous(3, 40, 5, 12, SequenceType::Qpsk, 7000);
    let grid = threshold_grid();

    // Empirical side: fresh instance per trial, pooled coordinate errors.
    let mut emp_zero = Vec::new();
    let mut emp_one = Vec::new();
    let nt = grid.len();
    let mut emp_pm = vec![0.0; nt];
    let mut emp_pf = vec![0.0; nt];
    for t in 0..trials {
        let icfg = InstanceConfig {
            seed: trial_seed(7000, t as u64),
            ..base.clone()
        };
        let inst = SystemInstance::generate(&icfg).unwrap();
        let covs = covariances(&inst, m);
        let mut scfg = SolverConfig::active_inexact();
        scfg.seed = icfg.seed;
        let mut st = SolverState::new(&inst, &covs);
        let sol = solve(&mut st, &scfg, &mut NoObserver).unwrap();
        for i in 0..inst.total_devices() {
            let e = sol.a_hat[i] - inst.a_true[i];
            if inst.a_true[i] == 0.0 {
                emp_zero.push(e);
            } else {
                emp_one.push(e);
            }
        }
        let (pm, pf) = pm_pf_curves(&sol.a_hat, &inst.a_true, &grid);
        for i in 0..nt {
            emp_pm[i] += pm[i] / trials as f64;
            emp_pf[i] += pf[i] / trials as f64;
        }
    }

    // Predicted side: one representative instance (the prediction depends
    // on the instance only through S, G, a_true; use the first trial's).
    let icfg = InstanceConfig {
        seed: trial_seed(7000, 0),
        ..base
    };
    let inst = SystemInstance::generate(&icfg).unwrap();
    let mut rng = substream(7100, 0);
    let pred =
        covdet_core::error_analysis::predicted_error_distribution(&inst, m, 10_000, &mut rng)
            .unwrap();
    assert!(pred.consistent_truth, "prediction requires the consistent regime");

    let ks_zero = ks_distance(&emp_zero, &pred.zero_errors);
    let ks_one = ks_distance(&emp_one, &pred.one_errors);
    assert!(ks_zero < 0.1, "zero-entry KS distance {ks_zero}");
    assert!(ks_one < 0.1, "one-entry KS distance {ks_one}");

    let floor = 10.0 / (trials as f64 * inst.total_devices() as f64);
    let mut compared = 0usize;
    for i in 0..nt {
        for (e, p) in [(emp_pm[i], pred.pm[i]), (emp_pf[i], pred.pf[i])] {
            if e > floor && p > floor {
                let ratio = e / p;
                assert!(
                    (0.5..=2.0).contains(&ratio),
                    "threshold {}: empirical {e} vs predicted {p}",
                    grid[i]
                );
                compared += 1;
            }
        }
    }
    assert!(compared > 50, "too few comparable thresholds: {compared}");
    println!(
        "criterion 7 (error-distribution match): PASS (KS zero {ks_zero:.3}, KS one {ks_one:.3}, {compared} PM/PF points within factor 2)"
    );
}

/// Criterion 8: the projected-gradient QP matches the 2^BN enumeration
/// oracle to 1e-8 on 50 random problems with BN <= 6.
#[test]
fn criterion_08_qp_oracle_equivalence() {
    let mut rng = substream(1008, 0);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let n = 2 + trial % 5;
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut j = &a * a.transpose();
        for i in 0..n {
            j[(i, i)] += 0.3;
        }
        let fisher = covdet_core::error_analysis::FisherMatrix::from_matrix(j, 8);
        let inactive: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let apg = project_onto_cone_qp(&x, &fisher, &inactive);
        assert!(apg.converged, "trial {trial}: APG did not converge");
        let oracle = project_onto_cone_enumerate(&x, &fisher, &inactive).unwrap();
        let gap = (&apg.eta - &oracle).amax();
        worst = worst.max(gap);
        assert!(gap < 1e-8, "trial {trial}: gap {gap}");
    }
    println!("criterion 8 (QP oracle equivalence): PASS (worst gap {worst:.2e})");
}

/// Criterion 9: gamma=3.76, hex layouts with B in {7,19,37}, R=500 m, 100
/// random placements each: per-BS interference sums never exceed the
/// closed-form constant.
#[test]
fn criterion_09_interference_bound() {
    let gamma = 3.76;
    let p0 = 10f64.powf(-1.53); // dB path-loss model at d0 = 1 m
    let d0 = 1.0;
    let mut worst_margin = f64::INFINITY;
    for &b in &[7usize, 19, 37] {
        let layout = build_cell_layout(LayoutKind::Hex, b, 500.0).unwrap();
        let n_per_cell = vec![20; b];
        for seed in 0..100u64 {
            let mut rng = substream(9000 + seed, 1);
            let pos = place_devices(&layout, &n_per_cell, 10.0, &mut rng).unwrap();
            let (lhs, c) = interference_bound(&layout, &pos, &n_per_cell, gamma, p0, d0).unwrap();
            for (bs, &v) in lhs.iter().enumerate() {
                assert!(v <= c, "B={b} seed {seed} BS {bs}: lhs {v} > C {c}");
                worst_margin = worst_margin.min(c / v.max(1e-300));
            }
        }
    }
    println!(
        "criterion 9 (interference bound): PASS (tightest C/lhs ratio {worst_margin:.2})"
    );
}

/// Criterion 10: B=3, N=60, K=6, L=12, M=128, 200 trials per family.
/// QPSK-alphabet and sphere sequences give equal-error probabilities
/// within 2 pooled standard errors; the unnormalized Gaussian family is
/// strictly worse than both by more than 2 standard errors.
#[test]
fn criterion_10_sequence_family_ordering() {
    let trials = 200;
    let grid = threshold_grid();
    let mut per_type: Vec<Vec<f64>> = Vec::new();
    for seq in [SequenceType::Qpsk, SequenceType::Sphere, SequenceType::Gaussian] {
        let mut errs = Vec::with_capacity(trials);
        for t in 0..trials {
            let icfg = InstanceConfig {
                seq_type: seq,
                seed: trial_seed(10_000, t as u64),
                ..InstanceConfig::homogeneous(3, 60, 6, 12, seq, 0)
            };
            let inst = SystemInstance::generate(&icfg).unwrap();
            let covs = covariances(&inst, 128);
            let mut scfg = SolverConfig::active_inexact();
            scfg.seed = icfg.seed;
            let mut st = SolverState::new(&inst, &covs);
            let sol = solve(&mut st, &scfg, &mut NoObserver).unwrap();
            let ee = equal_error_probability(&sol.a_hat, &inst.a_true, &grid);
            errs.push(ee.value);
        }
        per_type.push(errs);
    }
    let (m_qpsk, m_sphere, m_gauss) = (mean(&per_type[0]), mean(&per_type[1]), mean(&per_type[2]));
    let (s_qpsk, s_sphere, s_gauss) =
        (std_err(&per_type[0]), std_err(&per_type[1]), std_err(&per_type[2]));
    let pooled_qs = (s_qpsk * s_qpsk + s_sphere * s_sphere).sqrt();
    assert!(
        (m_qpsk - m_sphere).abs() <= 2.0 * pooled_qs,
        "qpsk {m_qpsk} vs sphere {m_sphere} (pooled se {pooled_qs})"
    );
    let pooled_gq = (s_gauss * s_gauss + s_qpsk * s_qpsk).sqrt();
    let pooled_gs = (s_gauss * s_gauss + s_sphere * s_sphere).sqrt();
    assert!(
        m_gauss - m_qpsk > 2.0 * pooled_gq,
        "gaussian {m_gauss} not worse than qpsk {m_qpsk} by 2 se ({pooled_gq})"
    );
    assert!(
        m_gauss - m_sphere > 2.0 * pooled_gs,
        "gaussian {m_gauss} not worse than sphere {m_sphere} by 2 se ({pooled_gs})"
    );
    println!(
        "criterion 10 (sequence-family ordering): PASS (qpsk {m_qpsk:.4} ~ sphere {m_sphere:.4}, gaussian {m_gauss:.4} worse)"
    );
}

/// Criterion 11: rescaling an inactive device's sequence by 0.5 multiplies
/// its estimate by 4 within 25%, averaged over 20 realizations at M=256.
#[test]
fn criterion_11_norm_rescale_effect() {
    let m = 256;
    let scfg = SolverConfig::active_inexact();
    let mut ratios = Vec::new();
    let mut seed = 11_000u64;
    while ratios.len() < 20 {
        seed += 1;
        let icfg = InstanceConfig::homogeneous(3, 40, 5, 16, SequenceType::Sphere, seed);
        let inst = SystemInstance::generate(&icfg).unwrap();
        // Informative inactive device: positive baseline estimate small
        // enough that a 4x larger value stays inside the box.
        let Some((device, _)) = normexp::pick_inactive_device(&inst, m, &scfg, 0.2).unwrap()
        else {
            continue;
        };
        let rows = normexp::norm_rescale_experiment(&inst, m, device, &[1.0, 0.5], &scfg).unwrap();
        let baseline = rows[0].estimate;
        let halved = rows[1].estimate;
        if baseline <= 1e-6 {
            continue;
        }
        ratios.push(halved / baseline);
    }
    let avg = mean(&ratios);
    assert!(
        (3.0..=5.0).contains(&avg),
        "mean halved-norm ratio {avg} outside 4 +- 25% (ratios {ratios:?})"
    );
    println!("criterion 11 (norm-rescale effect): PASS (mean ratio {avg:.3} over 20 realizations)");
}

/// Criterion 12: B=7 hex, N=300, K=15, L=30, M=64, 20 seeds. Wall-clock
/// to the 1e-3 tolerance ranks active-set-inexact < inexact < vanilla in
/// at least 80% of seeds, and the active-set variant needs at most half
/// of vanilla's total coordinate updates.
#[test]
fn criterion_12_speed_ranking() {
    let seeds = 20u64;
    let mut order_hits = 0usize;
    let mut updates_cd = 0usize;
    let mut updates_ascd = 0usize;
    let mut times = vec![Vec::new(); 3];
    for seed in 0..seeds {
        let icfg = InstanceConfig::homogeneous(7, 300, 15, 30, SequenceType::Qpsk, 12_000 + seed);
        let inst = SystemInstance::generate(&icfg).unwrap();
        let covs = covariances(&inst, 64);
        let mut wall = [0.0f64; 3];
        for (vi, cfg) in [
            SolverConfig::exact(),
            SolverConfig::inexact(),
            SolverConfig::active_inexact(),
        ]
        .iter()
        .enumerate()
        {
            let mut scfg = cfg.clone();
            scfg.seed = seed;
            let mut st = SolverState::new(&inst, &covs);
            let sol = solve(&mut st, &scfg, &mut NoObserver).unwrap();
            assert!(sol.converged, "seed {seed}: {} did not converge", cfg.variant_name());
            wall[vi] = sol.wall_time.as_secs_f64();
            times[vi].push(wall[vi]);
            if vi == 0 {
                updates_cd += sol.coord_updates_total;
            }
        }
        if wall[2] < wall[1] && wall[1] < wall[0] {
            order_hits += 1;
        }
        // Update-count comparison pairs vanilla with its active-set
        // counterpart (same exact subproblem).
        let mut scfg = SolverConfig::active_exact();
        scfg.seed = seed;
        let mut st = SolverState::new(&inst, &covs);
        let sol = solve(&mut st, &scfg, &mut NoObserver).unwrap();
        assert!(sol.converged);
        updates_ascd += sol.coord_updates_total;
    }
    let frac = order_hits as f64 / seeds as f64;
    let upd_ratio = updates_ascd as f64 / updates_cd as f64;
    println!(
        "criterion 12 (speed ranking): order asicd<icd<cd in {order_hits}/{seeds} seeds; \
         median times cd {:.2}s icd {:.2}s asicd {:.2}s; active/vanilla update ratio {upd_ratio:.3}",
        median(&mut times[0].clone()),
        median(&mut times[1].clone()),
        median(&mut times[2].clone()),
    );
    assert!(frac >= 0.8, "ranking held in only {order_hits}/{seeds} seeds");
    assert!(upd_ratio <= 0.5, "active-set update ratio {upd_ratio}");
    println!("criterion 12 (speed ranking): PASS");
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

/// Criterion 13: every inconsistent verdict's witness passes the sign,
/// residual, and gain-weighted sum-zero checks; the single-cell verdict is
/// invariant under positive gain rescalings (20 instances x 5 rescalings).
#[test]
fn criterion_13_consistency_invariants() {
    let mut rng = substream(1013, 0);
    // Harvest witnesses across the transition region.
    let mut witnesses = 0usize;
    for trial in 0..40u64 {
        let l = if trial % 2 == 0 { 3 } else { 4 };
        let k = if l == 3 { 6 } else { 10 };
        let icfg = InstanceConfig::homogeneous(1, 50, k, l, SequenceType::Sphere, 13_000 + trial);
        let inst = SystemInstance::generate(&icfg).unwrap();
        let verdict = check_consistency(&inst.s, &inst.gains, &inst.a_true).unwrap();
        if let Some(w) = verdict.witness {
            witnesses += 1;
            let diag = witness_diagnostics(&inst.s, &inst.gains, &inst.a_true, &w);
            assert!(diag.sign_ok, "trial {trial}: witness sign pattern broken");
            assert!(
                diag.residual_inf <= 1e-6 * diag.l1_norm,
                "trial {trial}: residual {} vs l1 {}",
                diag.residual_inf,
                diag.l1_norm
            );
            assert!(
                diag.sum_zero_ratio <= 1e-8,
                "trial {trial}: gain-weighted sum ratio {}",
                diag.sum_zero_ratio
            );
        }
    }
    assert!(witnesses >= 10, "only {witnesses} inconsistent verdicts harvested");

    // Gain invariance in the single-cell case.
    for trial in 0..20u64 {
        let icfg = InstanceConfig::homogeneous(1, 14, 6, 3, SequenceType::Sphere, 13_500 + trial);
        let inst = SystemInstance::generate(&icfg).unwrap();
        let base = check_consistency(&inst.s, &inst.gains, &inst.a_true)
            .unwrap()
            .consistent;
        for _ in 0..5 {
            let gains = vec![DVector::from_fn(14, |_, _| rng.random_range(1e-13..1e-9))];
            let v = check_consistency(&inst.s, &gains, &inst.a_true).unwrap();
            assert_eq!(v.consistent, base, "trial {trial}: verdict changed under rescaling");
        }
    }
    println!(
        "criterion 13 (consistency invariants): PASS ({witnesses} witnesses checked, 20x5 gain rescalings invariant)"
    );
}

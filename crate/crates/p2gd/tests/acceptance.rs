//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line with the measured quantities (visible with `--nocapture`).
//!
//! The criteria pin the documented behavior of both algorithm variants on
//! the four analytic scenarios, the geometric correctness of the
//! tangent-cone projection against an independent brute-force minimizer,
//! gradient correctness, and the structural trace invariants.

use std::time::Instant;

use p2gd::experiments::{scenario, switch_index, Variant};
use p2gd::objectives::{builtin_objectives, check_gradient};
use p2gd::solver::{p2gd_map, p2gdr_map, run, RunTrace, SolverParams, Termination};
use p2gd::variety::{numerical_rank, project_tangent_cone, stationarity_measure, VarietySpec};
use p2gd::Matrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn diag(entries: &[f64]) -> Matrix {
    Matrix::from_diagonal(&nalgebra::DVector::from_vec(entries.to_vec()))
}

fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "[{}] {criterion} — {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "{criterion}: {detail}");
}

#[test]
fn criterion_01_levin_p2gd_reproduction() {
    let started = Instant::now();
    let s = scenario("levin3x3").unwrap();
    let trace = s.run(Variant::P2gd).unwrap();
    let elapsed = started.elapsed();

    let mut worst = 0.0f64;
    for (i, x) in trace.iterates().enumerate() {
        let expected = diag(&[1.0 + (-0.6f64).powi(i as i32), 0.6f64.powi(i as i32), 0.0]);
        worst = worst.max((x - expected).abs().max());
    }
    let ok = trace.num_iterates() == 38
        && trace.termination == Termination::EpsilonReached
        && trace.final_s_f <= 1e-8
        && trace.s_f_at(36) > 1e-8
        && worst <= 1e-10
        && elapsed.as_secs_f64() < 1.0;
    report(
        "criterion 1: levin3x3 p2gd follows diag(1+(-3/5)^i, (3/5)^i, 0) through i=37",
        ok,
        &format!(
            "iterates={}, worst entry deviation={worst:.3e}, final s_f={:.3e}, runtime={:.3}s",
            trace.num_iterates(),
            trace.final_s_f,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_levin_p2gdr_reproduction() {
    let s = scenario("levin3x3").unwrap();
    let trace = s.run(Variant::P2gdr).unwrap();

    let mut early_worst = 0.0f64;
    for i in 0..=5usize {
        let expected = diag(&[1.0 + (-0.6f64).powi(i as i32), 0.6f64.powi(i as i32), 0.0]);
        early_worst = early_worst.max((trace.iterate(i) - expected).abs().max());
    }
    let branch_ok = trace
        .records
        .iter()
        .enumerate()
        .all(|(i, rec)| (rec.branch_j == 1) == (i == 5));

    #[allow(clippy::excessive_precision)] // frozen recorded values, verbatim
    let table: [(usize, f64, f64); 7] = [
        (6, 1.046656000000000, 1.600000000000000),
        (11, 1.002866544640000, 1.323933131082407),
        (16, 1.000222902511206, 1.324855302786614),
        (21, 1.000023110532362, 1.324722970132156),
        (26, 1.000001797074997, 1.324717078903522),
        (31, 1.000000062106912, 1.324717847681821),
        (38, 1.000000002318128, 1.324717955251852),
    ];
    let mut table_worst = 0.0f64;
    let mut rows = String::new();
    for (i, first, last) in table {
        let x = trace.iterate(i);
        let dev = (x[(0, 0)] - first)
            .abs()
            .max(x[(1, 1)].abs())
            .max((x[(2, 2)] - last).abs());
        table_worst = table_worst.max(dev);
        rows.push_str(&format!(" i={i}:{dev:.2e}"));
    }

    let ok = trace.num_iterates() == 39 && early_worst <= 1e-10 && branch_ok && table_worst <= 1e-9;
    report(
        "criterion 2: levin3x3 p2gdr reduces rank only at i=5 and matches the recorded iterates to 1e-9",
        ok,
        &format!(
            "iterates={}, pre-switch deviation={early_worst:.3e}, row deviations:{rows}",
            trace.num_iterates()
        ),
    );
}

#[test]
fn criterion_03_delta_threshold_degeneracy() {
    let s = scenario("levin3x3").unwrap();
    let plain = s.run(Variant::P2gd).unwrap();
    let mut params = s.params.clone();
    params.delta = 0.6f64.powi(37);
    let reduced = run(&s.x0, &s.objective, &s.spec, &params).unwrap();
    let identical = plain.num_iterates() == reduced.num_iterates()
        && plain.iterates().zip(reduced.iterates()).all(|(a, b)| {
            a.iter()
                .zip(b.iter())
                .all(|(p, q)| p.to_bits() == q.to_bits())
        });
    report(
        "criterion 3: p2gdr with delta=(3/5)^37 is bit-identical to p2gd on levin3x3",
        identical,
        &format!(
            "iterates {} vs {}, bitwise identical={identical}",
            plain.num_iterates(),
            reduced.num_iterates()
        ),
    );
}

#[test]
fn criterion_04_apocalypse_witness() {
    let s = scenario("apoc2x2").unwrap();
    let mut params = s.params_for(Variant::P2gd);
    params.epsilon = 0.0;
    params.max_iters = 60;
    let trace = run(&s.x0, &s.objective, &s.spec, &params).unwrap();

    let mut iterate_dev = 0.0f64;
    let mut s_f_dev = 0.0f64;
    for i in 0..=60usize {
        let expected = 0.4f64.powi(i as i32);
        iterate_dev = iterate_dev.max((trace.iterate(i) - diag(&[expected, 0.0])).abs().max());
        s_f_dev = s_f_dev.max((trace.s_f_at(i) - expected).abs());
    }
    let origin = Matrix::zeros(2, 2);
    let s_f_origin = stationarity_measure(&origin, &s.objective.grad(&origin), &s.spec).unwrap();
    let ok = trace.num_iterates() == 61
        && iterate_dev <= 1e-12
        && s_f_dev <= 1e-13
        && (s_f_origin - 1.0).abs() <= 1e-14;
    report(
        "criterion 4: apoc2x2 p2gd tracks diag((1-a)^i, 0) while s_f at the limit stays 1",
        ok,
        &format!(
            "iterate deviation={iterate_dev:.3e}, s_f deviation={s_f_dev:.3e}, s_f(0)={s_f_origin:.16}"
        ),
    );
}

#[test]
fn criterion_05_apocalypse_escape() {
    let s = scenario("apoc2x2").unwrap();
    let trace = s.run(Variant::P2gdr).unwrap();
    let i_delta = switch_index(s.params.delta, s.x0[(0, 0)], s.params.alpha_hi);
    let mut post_dev = 0.0f64;
    for (i, x) in trace.iterates().enumerate() {
        if i > i_delta {
            let expected = diag(&[0.0, 1.0 - 0.4f64.powi((i - i_delta) as i32)]);
            post_dev = post_dev.max((x - expected).abs().max());
        }
    }
    let switched = trace
        .records
        .iter()
        .enumerate()
        .all(|(i, rec)| (rec.branch_j == 1) == (i == i_delta));
    let ok = i_delta == 2
        && switched
        && post_dev <= 1e-12
        && trace.termination == Termination::EpsilonReached
        && trace.final_s_f <= s.params.epsilon;
    report(
        "criterion 5: apoc2x2 p2gdr switches at i=2 and follows diag(0, 1-(1-a)^(i-2))",
        ok,
        &format!(
            "switch index={i_delta}, post-switch deviation={post_dev:.3e}, final s_f={:.3e}",
            trace.final_s_f
        ),
    );
}

fn side_pair(
    name: &str,
    plain_limit: Matrix,
    plain_cost: f64,
    reduced_limit: Matrix,
    reduced_cost: f64,
) {
    let s = scenario(name).unwrap();
    let plain = s.run(Variant::P2gd).unwrap();
    let reduced = s.run(Variant::P2gdr).unwrap();
    let plain_dev = (plain.last_iterate() - &plain_limit).norm();
    let reduced_dev = (reduced.last_iterate() - &reduced_limit).norm();
    let plain_cost_dev = (s.objective.eval(plain.last_iterate()) - plain_cost).abs();
    let reduced_cost_dev = (s.objective.eval(reduced.last_iterate()) - reduced_cost).abs();
    let ok = plain_dev <= 1e-6
        && reduced_dev <= 1e-6
        && plain_cost_dev <= 1e-8
        && reduced_cost_dev <= 1e-8
        && plain.records.len() <= 200
        && reduced.records.len() <= 200;
    report(
        &format!("criterion {}: {name} limits and costs", if name == "side_a" { 6 } else { 7 }),
        ok,
        &format!(
            "limit deviations {plain_dev:.3e}/{reduced_dev:.3e}, cost deviations {plain_cost_dev:.3e}/{reduced_cost_dev:.3e}, steps {}/{}",
            plain.records.len(),
            reduced.records.len()
        ),
    );
}

#[test]
fn criterion_06_side_effect_pair_a() {
    side_pair("side_a", diag(&[4.0, 0.0]), 6.0, diag(&[0.0, 2.0]), 8.0);
}

#[test]
fn criterion_07_side_effect_pair_b() {
    side_pair("side_b", diag(&[2.0, 0.0]), 4.5, diag(&[0.0, 3.0]), 2.0);
}

/// Independent route for criterion 8: Gram–Schmidt bases straight from the
/// generating factors of `X` (no SVD), the analytic inner-block optimum,
/// and alternating least squares with random restarts for the best
/// rank-`k` completion of the outer block.
mod brute_force {
    use super::*;

    fn gram_schmidt(a: &Matrix) -> Matrix {
        let mut q = a.clone();
        for j in 0..q.ncols() {
            for prev in 0..j {
                let proj = q.column(j).dot(&q.column(prev));
                let prev_col = q.column(prev).into_owned();
                q.column_mut(j).axpy(-proj, &prev_col, 1.0);
            }
            let norm = q.column(j).norm();
            q.column_mut(j).scale_mut(1.0 / norm);
        }
        q
    }

    /// Smallest `‖B0 − C‖` over rank-≤k matrices `C`, by ALS restarts.
    fn best_rank_k_distance(b0: &Matrix, k: usize, rng: &mut impl Rng) -> f64 {
        if k == 0 {
            return b0.norm();
        }
        let (m, n) = b0.shape();
        let mut best = f64::INFINITY;
        for _ in 0..12 {
            let mut r = Matrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
            let mut l = Matrix::zeros(m, k);
            for _ in 0..60 {
                // L* = B0 R (R^T R)^-1, then the mirror image for R.
                match (r.transpose() * &r).try_inverse() {
                    Some(inv) => l = b0 * &r * inv,
                    None => r = Matrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0)),
                }
                match (l.transpose() * &l).try_inverse() {
                    Some(inv) => r = b0.transpose() * &l * inv,
                    None => l = Matrix::from_fn(m, k, |_, _| rng.random_range(-1.0..1.0)),
                }
            }
            let dist = (b0 - &l * r.transpose()).norm();
            best = best.min(dist);
        }
        best
    }

    /// Best cone distance `min_{V in T_X} ‖Z − V‖` from the generating
    /// factors of `X` (rank `s`), without touching the library's SVD.
    pub fn cone_distance(
        a: &Matrix,
        b: &Matrix,
        s: usize,
        r: usize,
        z: &Matrix,
        rng: &mut impl Rng,
    ) -> f64 {
        let (m, n) = z.shape();
        let b0 = if s == 0 {
            z.clone()
        } else {
            let qa = gram_schmidt(a);
            let qb = gram_schmidt(b);
            let rows = z - &qa * (qa.transpose() * z);
            &rows - (&rows * &qb) * qb.transpose()
        };
        debug_assert_eq!(b0.shape(), (m, n));
        best_rank_k_distance(&b0, r - s, rng)
    }
}

#[test]
fn criterion_08_tangent_cone_projection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x8a7e);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_moreau = 0.0f64;
    let mut pairs = 0usize;
    let mut failures = 0usize;
    while pairs < 200 {
        let r = rng.random_range(1..=2usize);
        let s = rng.random_range(0..=r);
        let a = Matrix::from_fn(3, s.max(1), |_, _| rng.random_range(-2.0..2.0));
        let b = Matrix::from_fn(3, s.max(1), |_, _| rng.random_range(-2.0..2.0));
        let x = if s == 0 {
            Matrix::zeros(3, 3)
        } else {
            &a * b.transpose()
        };
        let z = Matrix::from_fn(3, 3, |_, _| rng.random_range(-3.0..3.0));
        let spec = VarietySpec::new(3, 3, r).unwrap();
        if numerical_rank(&x, &spec).unwrap() != s {
            continue;
        }
        pairs += 1;

        let p = project_tangent_cone(&x, &z, &spec).unwrap();
        let lib_dist = (&z - &p.direction).norm();
        let oracle_dist = brute_force::cone_distance(&a, &b, s, r, &z, &mut rng);
        let gap = lib_dist - oracle_dist;
        worst_gap = worst_gap.max(gap);
        let resid = &z - &p.direction;
        let moreau = p.direction.dot(&resid).abs() / z.norm_squared().max(1.0);
        worst_moreau = worst_moreau.max(moreau);
        if gap > 1e-6 || moreau > 1e-10 {
            failures += 1;
        }
    }
    report(
        "criterion 8: tangent-cone projection beats the brute-force cone minimizer",
        failures == 0,
        &format!(
            "{pairs} pairs, worst distance gap={worst_gap:.3e}, worst Moreau defect={worst_moreau:.3e}"
        ),
    );
}

#[test]
fn criterion_09_gradient_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a11);
    let mut worst = 0.0f64;
    for obj in builtin_objectives() {
        let (m, n) = obj.dims();
        for _ in 0..100 {
            let x = Matrix::from_fn(m, n, |_, _| rng.random_range(-3.0..3.0));
            worst = worst.max(check_gradient(&obj, &x, 1e-5).unwrap());
        }
    }
    report(
        "criterion 9: all objective gradients pass central finite differences",
        worst <= 1e-6,
        &format!("4 objectives x 100 points, worst relative error={worst:.3e}"),
    );
}

#[test]
fn criterion_10_structural_trace_properties() {
    let mut ok = true;
    let mut detail = String::from("all traces clean");
    let mut traces: Vec<(String, SolverParams, VarietySpec, RunTrace)> = Vec::new();
    for name in ["levin3x3", "apoc2x2", "side_a", "side_b"] {
        let s = scenario(name).unwrap();
        for variant in [Variant::P2gd, Variant::P2gdr] {
            let trace = s.run(variant).unwrap();
            traces.push((
                format!("{name}/{variant}"),
                s.params_for(variant),
                s.spec,
                trace,
            ));
        }
    }
    // The 60-step ray run of criterion 4 participates as well.
    let s = scenario("apoc2x2").unwrap();
    let mut params = s.params_for(Variant::P2gd);
    params.epsilon = 0.0;
    params.max_iters = 60;
    let ray = run(&s.x0, &s.objective, &s.spec, &params).unwrap();
    traces.push(("apoc2x2/ray60".into(), params, s.spec, ray));

    for (label, params, spec, trace) in &traces {
        for (i, rec) in trace.records.iter().enumerate() {
            let margin = params.c * rec.accepted_alpha * rec.s_f_at_prev * rec.s_f_at_prev;
            if rec.f_value > trace.f_at(i) - margin {
                ok = false;
                detail = format!("{label}: sufficient decrease fails at step {i}");
            }
            if numerical_rank(&rec.iterate, spec).unwrap() > spec.max_rank() {
                ok = false;
                detail = format!("{label}: rank bound violated at step {i}");
            }
            let alpha_law = params.alpha_hi * params.beta.powi(rec.backtrack_count as i32);
            if (rec.accepted_alpha - alpha_law).abs() > 1e-15 * alpha_law {
                ok = false;
                detail = format!("{label}: accepted step size off the beta law at step {i}");
            }
        }
    }

    // delta = 0 makes the reduced map a bit-exact alias of the plain map,
    // checked from every iterate the plain runs visited.
    for (label, params, spec, trace) in &traces {
        if params.delta != 0.0 {
            continue;
        }
        let name = label.split('/').next().unwrap();
        let s = scenario(name).unwrap();
        for i in 0..trace.records.len() {
            let x = trace.iterate(i);
            let plain = p2gd_map(x, &s.objective, spec, params).unwrap();
            let reduced = p2gdr_map(x, &s.objective, spec, params).unwrap();
            let same_bits = plain
                .iterate
                .iter()
                .zip(reduced.iterate.iter())
                .all(|(p, q)| p.to_bits() == q.to_bits())
                && plain.f_value.to_bits() == reduced.f_value.to_bits();
            if !same_bits {
                ok = false;
                detail = format!("{label}: delta=0 maps disagree at step {i}");
            }
        }
    }

    report(
        "criterion 10: sufficient decrease, feasibility, step-size law, delta=0 bit-equivalence",
        ok,
        &detail,
    );
}

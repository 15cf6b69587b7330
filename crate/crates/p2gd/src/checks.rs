//! Self-verification suite behind the `check` CLI subcommand.
//!
//! Each check replays one documented behavior of the solver on the built-in
//! scenarios — closed-form trajectories, the rank-reduction switch points,
//! limit costs, structural trace invariants, gradient correctness, and the
//! geometric properties of the tangent-cone projection — and reports
//! pass/fail with a short measurement. The same criteria back the
//! `acceptance` integration test suite, which additionally cross-checks the
//! tangent-cone projection against an independent brute-force minimizer.

use crate::error::Result;
use crate::experiments::{
    delta_threshold_check_with, run_comparison, scenario, switch_index, Scenario, ThresholdReport,
    Variant, SCENARIO_NAMES,
};
use crate::objectives::{builtin_objectives, check_gradient};
use crate::solver::{p2gd_map, p2gdr_map, run, RunTrace, Termination};
use crate::variety::{
    in_tangent_cone, numerical_rank, project_tangent_cone, project_to_rank, stationarity_measure,
    VarietySpec,
};
use crate::{diag, Matrix};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Outcome of one verification criterion.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Iterates of the rank-reducing 3×3 run at selected indices
/// (first and last diagonal entries; the middle one stays 0), with the
/// tolerance each row is reproducible to. The final row sits past the last
/// few sufficient-decrease tests, whose margins drop below one ulp of f;
/// the iterate at that point depends on evaluation-order rounding and is
/// stable only to about 1e-8.
#[allow(clippy::excessive_precision)] // frozen recorded values, verbatim
const LEVIN_REDUCED_ITERATES: [(usize, f64, f64, f64); 7] = [
    (6, 1.046656000000000, 1.600000000000000, 1e-9),
    (11, 1.002866544640000, 1.323933131082407, 1e-9),
    (16, 1.000222902511206, 1.324855302786614, 1e-9),
    (21, 1.000023110532362, 1.324722970132156, 1e-9),
    (26, 1.000001797074997, 1.324717078903522, 1e-9),
    (31, 1.000000062106912, 1.324717847681821, 1e-9),
    (38, 1.000000002318128, 1.324717955251852, 1e-8),
];

/// The whole suite with documented parameters.
pub fn run_all() -> Result<Vec<Check>> {
    Ok(vec![
        levin_p2gd_closed_form()?,
        levin_p2gdr_table()?,
        levin_delta_identity(&scenario("levin3x3")?, None)?,
        apoc_p2gd_ray()?,
        apoc_p2gdr_escape()?,
        side_pair_costs("side_a", 6.0, 8.0, (4.0, 0.0), (0.0, 2.0))?,
        side_pair_costs("side_b", 4.5, 2.0, (2.0, 0.0), (0.0, 3.0))?,
        tangent_projection_properties()?,
        gradient_finite_differences()?,
        trace_structural_invariants()?,
        comparison_flags()?,
        apoc_epsilon_delta_boundary(&scenario("apoc2x2")?)?,
        eckart_young_sampling()?,
    ])
}

/// The subset of checks that concern one scenario, honoring parameter
/// overrides already applied to `scenario.params`. `delta_override`, when
/// present, replaces the probe Δ of the rank-degeneracy check.
pub fn checks_for(scenario: &Scenario, delta_override: Option<f64>) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    match scenario.name() {
        "levin3x3" => {
            out.push(levin_p2gd_closed_form()?);
            out.push(levin_p2gdr_table()?);
            out.push(levin_delta_identity(scenario, delta_override)?);
        }
        "apoc2x2" => {
            out.push(apoc_p2gd_ray()?);
            out.push(apoc_p2gdr_escape()?);
            out.push(apoc_epsilon_delta_boundary(scenario)?);
        }
        "side_a" => out.push(side_pair_costs("side_a", 6.0, 8.0, (4.0, 0.0), (0.0, 2.0))?),
        "side_b" => out.push(side_pair_costs("side_b", 4.5, 2.0, (2.0, 0.0), (0.0, 3.0))?),
        _ => unreachable!("registry names are exhaustive"),
    }
    out.push(trace_structural_invariants()?);
    Ok(out)
}

fn levin_p2gd_closed_form() -> Result<Check> {
    let s = scenario("levin3x3")?;
    let trace = s.run(Variant::P2gd)?;
    let mut worst = 0.0f64;
    for (i, x) in trace.iterates().enumerate() {
        let expected = s
            .oracle(i, Variant::P2gd)
            .expect("closed form covers all i");
        worst = worst.max((x - expected).norm());
    }
    let ok = trace.num_iterates() == 38
        && trace.termination == Termination::EpsilonReached
        && trace.final_s_f <= 1e-8
        && trace.s_f_at(36) > 1e-8
        && worst <= 1e-10;
    Ok(check(
        "levin3x3 p2gd reproduces diag(1+(-3/5)^i, (3/5)^i, 0), stopping at i=37",
        ok,
        format!(
            "iterates={}, max deviation={worst:.3e}, final s_f={:.3e}",
            trace.num_iterates(),
            trace.final_s_f
        ),
    ))
}

fn levin_p2gdr_table() -> Result<Check> {
    let s = scenario("levin3x3")?;
    let trace = s.run(Variant::P2gdr)?;
    let mut worst = 0.0f64;
    let mut ok = trace.num_iterates() == 39 && trace.termination == Termination::EpsilonReached;
    // Closed form up to the switch, reduction branch taken only there.
    for (i, rec) in trace.records.iter().enumerate() {
        ok &= (rec.branch_j == 1) == (i == 5);
    }
    for i in 0..=5 {
        let expected = s.oracle(i, Variant::P2gd).expect("closed form");
        worst = worst.max((trace.iterate(i) - expected).norm());
    }
    ok &= worst <= 1e-10;
    let mut table_worst = 0.0f64;
    for (i, first, last, tol) in LEVIN_REDUCED_ITERATES {
        let x = trace.iterate(i);
        let dev = (x[(0, 0)] - first)
            .abs()
            .max(x[(1, 1)].abs())
            .max((x[(2, 2)] - last).abs());
        table_worst = table_worst.max(dev);
        ok &= dev <= tol;
    }
    Ok(check(
        "levin3x3 p2gdr switches rank only at i=5 and matches the recorded iterates",
        ok,
        format!(
            "iterates={}, pre-switch deviation={worst:.3e}, recorded-iterate deviation={table_worst:.3e}",
            trace.num_iterates()
        ),
    ))
}

/// Bit-level comparison of the plain run against the rank-reducing run at
/// a Δ too small to ever fire before the ε-test stops the sequence.
fn levin_delta_identity(scenario: &Scenario, delta_override: Option<f64>) -> Result<Check> {
    let delta = delta_override.unwrap_or_else(|| 0.6f64.powi(37));
    let plain = run(
        &scenario.x0,
        &scenario.objective,
        &scenario.spec,
        &scenario.params_for(Variant::P2gd),
    )?;
    let mut params = scenario.params.clone();
    params.delta = delta;
    let reduced = run(&scenario.x0, &scenario.objective, &scenario.spec, &params)?;
    let identical = plain.num_iterates() == reduced.num_iterates()
        && plain.iterates().zip(reduced.iterates()).all(|(a, b)| {
            a.iter()
                .zip(b.iter())
                .all(|(p, q)| p.to_bits() == q.to_bits())
        });
    // With the default probe the sequences must coincide; an explicit
    // override is informational and reports whichever way it lands.
    Ok(check(
        "levin3x3 p2gdr with sub-threshold delta",
        delta_override.is_some() || identical,
        format!(
            "delta={delta:.6e}, identical to p2gd: {identical}, iterates {} vs {}",
            plain.num_iterates(),
            reduced.num_iterates()
        ),
    ))
}

fn apoc_p2gd_ray() -> Result<Check> {
    let s = scenario("apoc2x2")?;
    // epsilon = 0 with a step budget: follow the ray out to i = 60.
    let mut params = s.params_for(Variant::P2gd);
    params.epsilon = 0.0;
    params.max_iters = 60;
    let trace = run(&s.x0, &s.objective, &s.spec, &params)?;
    let mut iterate_dev = 0.0f64;
    let mut s_f_dev = 0.0f64;
    for i in 0..=60usize {
        let expected = 0.4f64.powi(i as i32);
        iterate_dev = iterate_dev.max((trace.iterate(i) - diag(&[expected, 0.0])).norm());
        s_f_dev = s_f_dev.max((trace.s_f_at(i) - expected).abs());
    }
    // The limit of the ray is not stationary: s_f(0) = 1.
    let grad0 = s.objective.grad(&Matrix::zeros(2, 2));
    let s_f_origin = stationarity_measure(&Matrix::zeros(2, 2), &grad0, &s.spec)?;
    let ok = trace.num_iterates() == 61
        && iterate_dev <= 1e-12
        && s_f_dev <= 1e-13
        && (s_f_origin - 1.0).abs() <= 1e-14;
    Ok(check(
        "apoc2x2 p2gd follows diag((1-a)^i, 0) while s_f(0) stays at 1",
        ok,
        format!(
            "iterate deviation={iterate_dev:.3e}, s_f deviation={s_f_dev:.3e}, s_f(0)={s_f_origin}"
        ),
    ))
}

fn apoc_p2gdr_escape() -> Result<Check> {
    let s = scenario("apoc2x2")?;
    let trace = s.run(Variant::P2gdr)?;
    let i_delta = switch_index(s.params.delta, s.x0[(0, 0)], s.params.alpha_hi);
    let mut dev = 0.0f64;
    for (i, x) in trace.iterates().enumerate() {
        let expected = s.oracle(i, Variant::P2gdr).expect("closed form");
        dev = dev.max((x - expected).norm());
    }
    let switched = trace
        .records
        .iter()
        .enumerate()
        .all(|(i, rec)| (rec.branch_j == 1) == (i == i_delta));
    let ok = i_delta == 2
        && dev <= 1e-12
        && switched
        && trace.termination == Termination::EpsilonReached
        && trace.final_s_f <= s.params.epsilon;
    Ok(check(
        "apoc2x2 p2gdr switches at i=2 and converges on the second axis",
        ok,
        format!(
            "switch index={i_delta}, deviation={dev:.3e}, final s_f={:.3e}",
            trace.final_s_f
        ),
    ))
}

fn side_pair_costs(
    name: &str,
    plain_cost: f64,
    reduced_cost: f64,
    plain_limit: (f64, f64),
    reduced_limit: (f64, f64),
) -> Result<Check> {
    let report = run_comparison(name)?;
    let plain_dev =
        (report.p2gd.limit_estimate.clone() - diag(&[plain_limit.0, plain_limit.1])).norm();
    let reduced_dev =
        (report.p2gdr.limit_estimate.clone() - diag(&[reduced_limit.0, reduced_limit.1])).norm();
    let ok = (report.p2gd.limit_cost - plain_cost).abs() <= 1e-8
        && (report.p2gdr.limit_cost - reduced_cost).abs() <= 1e-8
        && plain_dev <= 1e-6
        && reduced_dev <= 1e-6
        && report.p2gd.trace.num_iterates() <= 201
        && report.p2gdr.trace.num_iterates() <= 201;
    Ok(check(
        &format!("{name} limit costs p2gd={plain_cost} p2gdr={reduced_cost}"),
        ok,
        format!(
            "costs p2gd={} p2gdr={}, limit deviations {plain_dev:.3e} / {reduced_dev:.3e}",
            report.p2gd.limit_cost, report.p2gdr.limit_cost
        ),
    ))
}

fn random_matrix(rng: &mut impl Rng, m: usize, n: usize) -> Matrix {
    Matrix::from_fn(m, n, |_, _| rng.random_range(-3.0..3.0))
}

fn random_rank_matrix(rng: &mut impl Rng, n: usize, rank: usize) -> Matrix {
    if rank == 0 {
        return Matrix::zeros(n, n);
    }
    let a = random_matrix(rng, n, rank);
    let b = random_matrix(rng, n, rank);
    a * b.transpose()
}

fn tangent_projection_properties() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a6e);
    let mut worst_moreau = 0.0f64;
    let mut failures = 0usize;
    let mut pairs = 0usize;
    for r in [1usize, 2] {
        let spec = VarietySpec::new(3, 3, r)?;
        for _ in 0..100 {
            let s = rng.random_range(0..=r);
            let x = random_rank_matrix(&mut rng, 3, s);
            let z = random_matrix(&mut rng, 3, 3);
            let p = project_tangent_cone(&x, &z, &spec)?;
            let resid = &z - &p.direction;
            let scale = z.norm_squared().max(1.0);
            let moreau = p.direction.dot(&resid).abs() / scale;
            let pythagoras =
                (z.norm_squared() - p.s_f * p.s_f - resid.norm_squared()).abs() / scale;
            worst_moreau = worst_moreau.max(moreau).max(pythagoras);
            let member = in_tangent_cone(&x, &p.direction, &spec, 1e-9)?;
            let again = project_tangent_cone(&x, &p.direction, &spec)?;
            let idempotent = (&again.direction - &p.direction).norm() <= 1e-12 * (1.0 + p.s_f);
            let dominated = p.s_f <= z.norm() + 1e-12;
            if !(member && idempotent && dominated && moreau <= 1e-10 && pythagoras <= 1e-10) {
                failures += 1;
            }
            pairs += 1;
        }
    }
    Ok(check(
        "tangent-cone projection: Moreau orthogonality, membership, idempotence",
        failures == 0,
        format!("{pairs} random pairs, worst orthogonality defect={worst_moreau:.3e}"),
    ))
}

fn gradient_finite_differences() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x67ad);
    let mut worst = 0.0f64;
    for obj in builtin_objectives() {
        let (m, n) = obj.dims();
        for _ in 0..100 {
            let x = random_matrix(&mut rng, m, n);
            worst = worst.max(check_gradient(&obj, &x, 1e-5)?);
        }
    }
    Ok(check(
        "objective gradients agree with central finite differences",
        worst <= 1e-6,
        format!("4 objectives x 100 points, worst relative error={worst:.3e}"),
    ))
}

fn scenario_traces() -> Result<Vec<(Scenario, Variant, RunTrace)>> {
    let mut out = Vec::new();
    for name in SCENARIO_NAMES {
        for variant in [Variant::P2gd, Variant::P2gdr] {
            let s = scenario(name)?;
            let trace = s.run(variant)?;
            out.push((s, variant, trace));
        }
    }
    Ok(out)
}

fn trace_structural_invariants() -> Result<Check> {
    let mut ok = true;
    let mut detail = String::new();
    for (s, variant, trace) in scenario_traces()? {
        for (i, rec) in trace.records.iter().enumerate() {
            // Same association as the accept test in the map.
            let margin =
                s.params_for(variant).c * rec.accepted_alpha * rec.s_f_at_prev * rec.s_f_at_prev;
            if rec.f_value > trace.f_at(i) - margin {
                ok = false;
                detail = format!(
                    "{}/{variant}: sufficient decrease fails at step {i}",
                    s.name()
                );
            }
            if numerical_rank(&rec.iterate, &s.spec)? > s.spec.max_rank() {
                ok = false;
                detail = format!("{}/{variant}: infeasible iterate at step {i}", s.name());
            }
            let alpha_law = s.params.alpha_hi * s.params.beta.powi(rec.backtrack_count as i32);
            if (rec.accepted_alpha - alpha_law).abs() > 1e-15 * alpha_law {
                ok = false;
                detail = format!("{}/{variant}: step-size law fails at step {i}", s.name());
            }
        }
        // With delta = 0 the reduced map must be bit-identical to the plain
        // map from every visited iterate.
        if variant == Variant::P2gd {
            let params = s.params_for(Variant::P2gd);
            for i in 0..trace.records.len() {
                let x = trace.iterate(i);
                let a = p2gd_map(x, &s.objective, &s.spec, &params)?;
                let b = p2gdr_map(x, &s.objective, &s.spec, &params)?;
                let same = a
                    .iterate
                    .iter()
                    .zip(b.iterate.iter())
                    .all(|(p, q)| p.to_bits() == q.to_bits());
                if !same || a.f_value.to_bits() != b.f_value.to_bits() {
                    ok = false;
                    detail = format!("{}: delta=0 maps disagree at step {i}", s.name());
                }
            }
        }
    }
    if ok {
        detail = "sufficient decrease, feasibility, step-size law, delta=0 bit-equivalence".into();
    }
    Ok(check(
        "structural invariants on all scenario traces",
        ok,
        detail,
    ))
}

fn comparison_flags() -> Result<Check> {
    let mut ok = true;
    let mut states = Vec::new();
    for (name, plain_expected) in [
        ("levin3x3", true),
        ("apoc2x2", true),
        ("side_a", false),
        ("side_b", false),
    ] {
        let report = run_comparison(name)?;
        ok &= report.p2gd.apocalypse_flag == plain_expected && !report.p2gdr.apocalypse_flag;
        states.push(format!(
            "{name}: p2gd={} p2gdr={}",
            report.p2gd.apocalypse_flag, report.p2gdr.apocalypse_flag
        ));
    }
    Ok(check(
        "apocalypse flags: raised for the two trapped runs only",
        ok,
        states.join("; "),
    ))
}

fn apoc_epsilon_delta_boundary(scenario: &Scenario) -> Result<Check> {
    match delta_threshold_check_with(scenario)? {
        ThresholdReport::Apoc {
            i_eps,
            delta_threshold,
            below,
            above,
        } => {
            let ok = !below.escaped
                && above.escaped
                && below.final_s_f <= scenario.params.epsilon
                && above.final_s_f <= scenario.params.epsilon;
            Ok(check(
                "apoc2x2 delta boundary: stop on the ray below, escape above",
                ok,
                format!(
                    "i_eps={i_eps}, threshold={delta_threshold:.6e}, below escaped={}, above escaped={}",
                    below.escaped, above.escaped
                ),
            ))
        }
        other => Ok(check(
            "apoc2x2 delta boundary",
            false,
            format!("unexpected report {other:?}"),
        )),
    }
}

fn eckart_young_sampling() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xec4a);
    let x = random_matrix(&mut rng, 3, 3);
    let mut ok = true;
    for r in 0..=2usize {
        let best = (&x - project_to_rank(&x, r)?).norm();
        for _ in 0..2000 {
            let cand = random_rank_matrix(&mut rng, 3, r);
            if best > (&x - cand).norm() + 1e-12 {
                ok = false;
            }
        }
    }
    Ok(check(
        "truncated SVD beats sampled low-rank competitors",
        ok,
        "3 ranks x 2000 random candidates".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_suite_passes() {
        let checks = run_all().unwrap();
        assert_eq!(checks.len(), 13);
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn scenario_subsets_pass() {
        for name in SCENARIO_NAMES {
            let s = scenario(name).unwrap();
            for c in checks_for(&s, None).unwrap() {
                assert!(c.passed, "{name}: {} — {}", c.name, c.detail);
            }
        }
    }

    #[test]
    fn oversized_delta_identity_reports_false() {
        // At delta = 0.1 the reduced run genuinely differs, and the check
        // reports that instead of failing.
        let s = scenario("levin3x3").unwrap();
        let c = levin_delta_identity(&s, Some(0.1)).unwrap();
        assert!(c.passed);
        assert!(c.detail.contains("identical to p2gd: false"));
    }
}

//! The P²GD iteration map, the P²GDR iteration map (P²GD with rank
//! reduction), and the iterative driver, with full per-iteration tracing.
//!
//! One P²GD application moves from `X` along a tangent-cone projection `G`
//! of `−∇f(X)`, projects back onto the variety, and backtracks on the step
//! size until the sufficient-decrease condition
//! `f(Y) ≤ f(X) − c·α·s_f(X)²` holds. One P²GDR application additionally
//! tries the same move from every rank-truncated copy of `X` down to its
//! Δ-rank and keeps the candidate with the lowest cost.

use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::variety::{
    delta_rank, numerical_rank, project_tangent_cone, project_to_rank, VarietySpec,
};
use crate::Matrix;

/// Scalar parameters of the iteration maps and driver.
///
/// `alpha_lo`/`alpha_hi` bound the initial backtracking step size; the maps
/// start each line search from `alpha_hi`, so setting `alpha_lo == alpha_hi`
/// gives the constant initial step size used throughout the analytic
/// scenarios. `delta == 0` selects plain P²GD in [`run`]; `delta > 0`
/// selects P²GDR. The stopping threshold `epsilon` is compared strictly:
/// iteration continues while `s_f(X_i) > epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// Backtracking reduction factor, in (0, 1).
    pub beta: f64,
    /// Sufficient-decrease constant, in (0, 1).
    pub c: f64,
    /// Rank-reduction threshold Δ ≥ 0.
    pub delta: f64,
    /// Stationarity stopping threshold ε ≥ 0.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Cap on step-size reductions within one line search. Finite-precision
    /// guard; the theory guarantees finite backtracking on its own.
    pub max_backtracks: usize,
}

impl SolverParams {
    /// Constant initial step size `alpha` (i.e. `alpha_lo == alpha_hi`).
    pub fn constant_step(alpha: f64, beta: f64, c: f64) -> Self {
        Self {
            alpha_lo: alpha,
            alpha_hi: alpha,
            beta,
            c,
            delta: 0.0,
            epsilon: 0.0,
            max_iters: 10_000,
            max_backtracks: 60,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.alpha_lo > 0.0 && self.alpha_lo <= self.alpha_hi && self.alpha_hi.is_finite()) {
            return fail(format!(
                "need 0 < alpha_lo <= alpha_hi < inf; got [{}, {}]",
                self.alpha_lo, self.alpha_hi
            ));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return fail(format!("beta must lie in (0, 1); got {}", self.beta));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return fail(format!("c must lie in (0, 1); got {}", self.c));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return fail(format!("delta must be finite and >= 0; got {}", self.delta));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return fail(format!(
                "epsilon must be finite and >= 0; got {}",
                self.epsilon
            ));
        }
        if self.max_iters == 0 {
            return fail("max_iters must be positive".to_string());
        }
        if self.max_backtracks == 0 {
            return fail("max_backtracks must be positive".to_string());
        }
        Ok(())
    }
}

/// Outcome of one accepted iteration map application.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// The accepted next iterate `X_{i+1}`.
    pub iterate: Matrix,
    /// `f(X_{i+1})`.
    pub f_value: f64,
    /// `s_f(X_i)` at the point the step started from.
    pub s_f_at_prev: f64,
    /// Accepted step size; equals `alpha_hi · beta^backtrack_count`.
    pub accepted_alpha: f64,
    pub backtrack_count: usize,
    /// Which rank-reduction candidate won; 0 means no reduction.
    pub branch_j: usize,
    /// Number of candidates the map considered (1 for plain P²GD).
    pub candidates_evaluated: usize,
    /// Candidates skipped because their truncated base point was already
    /// stationary (`s_f = 0`), which the line search cannot handle.
    pub skipped_stationary: Vec<usize>,
}

/// Why the driver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `s_f(X_i) <= epsilon`.
    EpsilonReached,
    /// Step budget exhausted with `s_f` still above `epsilon`.
    MaxIters,
    /// The iteration map could not satisfy sufficient decrease.
    BacktrackFailed,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::EpsilonReached => "epsilon_reached",
            Termination::MaxIters => "max_iters",
            Termination::BacktrackFailed => "backtrack_failed",
        }
    }
}

/// Full record of one driver run: the initial point plus one [`StepRecord`]
/// per accepted step, with the final stationarity diagnostics.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub initial: Matrix,
    pub initial_f: f64,
    pub records: Vec<StepRecord>,
    pub termination: Termination,
    /// `s_f` at the last iterate (the value that stopped the loop).
    pub final_s_f: f64,
    /// `s_f` evaluated at `project_to_rank(X_last, rank X_last − 1)`,
    /// when the last iterate is nonzero. A value far above `final_s_f`
    /// means the run may have been heading towards an apocalyptic point:
    /// rank-reducing the last iterate exposes descent the trace cannot see.
    pub reduced_final_s_f: Option<f64>,
}

impl RunTrace {
    /// Number of iterates, counting the initial point.
    pub fn num_iterates(&self) -> usize {
        self.records.len() + 1
    }

    pub fn iterate(&self, i: usize) -> &Matrix {
        if i == 0 {
            &self.initial
        } else {
            &self.records[i - 1].iterate
        }
    }

    pub fn iterates(&self) -> impl Iterator<Item = &Matrix> {
        std::iter::once(&self.initial).chain(self.records.iter().map(|r| &r.iterate))
    }

    pub fn last_iterate(&self) -> &Matrix {
        self.records.last().map_or(&self.initial, |r| &r.iterate)
    }

    /// `f(X_i)`.
    pub fn f_at(&self, i: usize) -> f64 {
        if i == 0 {
            self.initial_f
        } else {
            self.records[i - 1].f_value
        }
    }

    /// `s_f(X_i)`; for the last iterate this is the stopping value.
    pub fn s_f_at(&self, i: usize) -> f64 {
        if i < self.records.len() {
            self.records[i].s_f_at_prev
        } else {
            self.final_s_f
        }
    }
}

fn finite_or_err(value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteValue)
    }
}

/// One P²GD iteration from `X`, which must satisfy `s_f(X) > 0`.
///
/// Chooses `G` in the tangent-cone projection of `−∇f(X)`, starts the line
/// search at `alpha_hi`, and shrinks by `beta` until
/// `f(Y) ≤ f(X) − c·α·s_f(X)²` with `Y = P_{R_{≤r}}(X + αG)`.
pub fn p2gd_map(
    x: &Matrix,
    obj: &Objective,
    spec: &VarietySpec,
    params: &SolverParams,
) -> Result<StepRecord> {
    params.validate()?;
    let projection = project_tangent_cone(x, &(-obj.grad(x)), spec)?;
    let s_f = projection.s_f;
    if s_f == 0.0 {
        return Err(Error::StationaryInput);
    }
    let f_x = finite_or_err(obj.eval(x))?;
    let direction = projection.direction;

    let mut alpha = params.alpha_hi;
    for backtracks in 0..=params.max_backtracks {
        let y = project_to_rank(&(x + &direction * alpha), spec.max_rank())?;
        let f_y = obj.eval(&y);
        // A non-finite trial value fails the comparison and backtracks.
        if f_y <= f_x - params.c * alpha * s_f * s_f {
            return Ok(StepRecord {
                iterate: y,
                f_value: f_y,
                s_f_at_prev: s_f,
                accepted_alpha: alpha,
                backtrack_count: backtracks,
                branch_j: 0,
                candidates_evaluated: 1,
                skipped_stationary: Vec::new(),
            });
        }
        alpha *= params.beta;
    }
    Err(Error::BacktrackFailed(params.max_backtracks))
}

/// One P²GDR iteration from `X`, which must satisfy `s_f(X) > 0`.
///
/// For `j = 0, …, rank X − rank_Δ X`, applies [`p2gd_map`] to the
/// rank-`(rank X − j)` truncation of `X` and returns the candidate with the
/// smallest cost; ties go to the smallest `j` (least rank reduction). The
/// `j = 0` candidate is exactly the P²GD step from `X`, so with
/// `rank_Δ X = rank X` (in particular whenever `Δ = 0`) the map degenerates
/// to [`p2gd_map`].
///
/// A truncated base point that is already stationary violates the P²GD
/// input contract; such candidates are skipped and listed in
/// [`StepRecord::skipped_stationary`]. [`Error::BacktrackFailed`] is raised
/// only if every candidate fails its line search.
pub fn p2gdr_map(
    x: &Matrix,
    obj: &Objective,
    spec: &VarietySpec,
    params: &SolverParams,
) -> Result<StepRecord> {
    params.validate()?;
    let s_f_at_x = project_tangent_cone(x, &(-obj.grad(x)), spec)?.s_f;
    if s_f_at_x == 0.0 {
        return Err(Error::StationaryInput);
    }
    let rank_x = numerical_rank(x, spec)?;
    let j_max = rank_x.saturating_sub(delta_rank(x, params.delta)?);

    let mut best: Option<StepRecord> = None;
    let mut skipped = Vec::new();
    let mut backtrack_failure = None;
    for j in 0..=j_max {
        let base = if j == 0 {
            x.clone()
        } else {
            project_to_rank(x, rank_x - j)?
        };
        match p2gd_map(&base, obj, spec, params) {
            Ok(mut record) => {
                record.branch_j = j;
                let wins = best
                    .as_ref()
                    .is_none_or(|current| record.f_value < current.f_value);
                if wins {
                    best = Some(record);
                }
            }
            Err(Error::StationaryInput) => skipped.push(j),
            Err(err @ Error::BacktrackFailed(_)) => backtrack_failure = Some(err),
            Err(other) => return Err(other),
        }
    }

    match best {
        Some(mut record) => {
            record.s_f_at_prev = s_f_at_x;
            record.candidates_evaluated = j_max + 1;
            record.skipped_stationary = skipped;
            Ok(record)
        }
        None => Err(backtrack_failure.unwrap_or(Error::StationaryInput)),
    }
}

/// Iterates the map selected by `params.delta` (0 selects P²GD, positive
/// selects P²GDR) from `x0` while `s_f(X_i) > epsilon`, up to `max_iters`
/// accepted steps.
///
/// A line-search failure ends the run with a partial trace and
/// [`Termination::BacktrackFailed`] rather than an error; structural
/// failures (dimension mismatches, non-finite values, infeasible `x0`)
/// surface as errors.
pub fn run(
    x0: &Matrix,
    obj: &Objective,
    spec: &VarietySpec,
    params: &SolverParams,
) -> Result<RunTrace> {
    params.validate()?;
    spec.check_dims(x0)?;
    let rank0 = numerical_rank(x0, spec)?;
    if rank0 > spec.max_rank() {
        return Err(Error::RankExceedsVariety {
            rank: rank0,
            r: spec.max_rank(),
        });
    }
    let initial_f = finite_or_err(obj.eval(x0))?;

    let mut records: Vec<StepRecord> = Vec::new();
    let mut current = x0.clone();
    let termination;
    let final_s_f;
    loop {
        let s_f = project_tangent_cone(&current, &(-obj.grad(&current)), spec)?.s_f;
        if s_f <= params.epsilon {
            termination = Termination::EpsilonReached;
            final_s_f = s_f;
            break;
        }
        if records.len() >= params.max_iters {
            termination = Termination::MaxIters;
            final_s_f = s_f;
            break;
        }
        let step = if params.delta == 0.0 {
            p2gd_map(&current, obj, spec, params)
        } else {
            p2gdr_map(&current, obj, spec, params)
        };
        match step {
            Ok(record) => {
                current = record.iterate.clone();
                records.push(record);
            }
            Err(Error::BacktrackFailed(_)) => {
                termination = Termination::BacktrackFailed;
                final_s_f = s_f;
                break;
            }
            Err(other) => return Err(other),
        }
    }

    let reduced_final_s_f = {
        let rank_last = numerical_rank(&current, spec)?;
        if rank_last == 0 {
            None
        } else {
            let reduced = project_to_rank(&current, rank_last - 1)?;
            Some(project_tangent_cone(&reduced, &(-obj.grad(&reduced)), spec)?.s_f)
        }
    };

    Ok(RunTrace {
        initial: x0.clone(),
        initial_f,
        records,
        termination,
        final_s_f,
        reduced_final_s_f,
    })
}

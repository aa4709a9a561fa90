//! Parallelepiped fitting: maximise `log|det U|` subject to
//! `‖U yᵢ‖∞ ≤ bound` for every received sample.
//!
//! The program is solved with a log-barrier interior-point method driven by
//! first-order ascent ([`solve_algorithm1`]). [`solve_algorithm2`] follows the
//! ascent with a walk along faces of the feasible polytope until every row of
//! `U` sits on `n` linearly independent active constraints.
//!
//! Internally the samples are divided by `bound` (so the box is the unit
//! box) and whitened: with `Y' = Rᵀ Ŷ` where `Ŷ` has orthonormal rows, the
//! search runs over `W = U Rᵀ`. The feasible set and objective are the same
//! up to the constant `log|det R|`; whitening only improves the conditioning
//! of the ascent.

mod ascent;
mod maxdet;
mod vertex;

use std::fmt;

use thiserror::Error;

use crate::linalg::{self, condition_number, det, inverse, Mat, SeededRng};
use crate::model::{round_to_constellation, Constellation, SymbolMatrix};

pub use maxdet::{maxdet_search, MaxDetSearch};
pub use vertex::{active_constraints, ActiveConstraint, RowActiveSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("need at least n = {n} samples, got k = {k}")]
    TooFewSamples { n: usize, k: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("point is not strictly feasible")]
    Infeasible,
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("no strictly feasible starting point after {0} doublings")]
    InitFailure(u32),
}

/// One instance of the fitting program.
#[derive(Clone, Debug)]
pub struct FitProblem {
    y: Mat,
    y_unit: Mat,
    bound: f64,
    amplitude: f64,
    kappa_max: f64,
    c: f64,
    sigma_hat: f64,
}

/// Builds the program for samples of an `order`-PAM transmission with box
/// half-width `(order − 1) + c·sigma_hat`.
pub fn make_problem(
    y: &Mat,
    order: usize,
    c: f64,
    sigma_hat: f64,
    kappa_max: f64,
) -> Result<FitProblem, SolverError> {
    if order < 2 {
        return Err(SolverError::InvalidProblem(format!(
            "constellation order {order}"
        )));
    }
    if !(c >= 0.0 && sigma_hat >= 0.0 && c.is_finite() && sigma_hat.is_finite()) {
        return Err(SolverError::InvalidProblem(format!(
            "noise margin c = {c}, sigma_hat = {sigma_hat}"
        )));
    }
    let bound = (order - 1) as f64 + c * sigma_hat;
    let mut prob = FitProblem::with_bound(y, bound, kappa_max)?;
    prob.c = c;
    prob.sigma_hat = sigma_hat;
    Ok(prob)
}

impl FitProblem {
    /// Program with an explicit box half-width.
    pub fn with_bound(y: &Mat, bound: f64, kappa_max: f64) -> Result<Self, SolverError> {
        let (n, k) = y.shape();
        if k < n {
            return Err(SolverError::TooFewSamples { n, k });
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(SolverError::InvalidProblem(format!("bound {bound}")));
        }
        if !(kappa_max >= 1.0) {
            return Err(SolverError::InvalidProblem(format!(
                "kappa_max {kappa_max}"
            )));
        }
        if !y.is_finite() {
            return Err(SolverError::InvalidProblem("non-finite sample".into()));
        }
        Ok(FitProblem {
            y: y.clone(),
            y_unit: y.scaled(1.0 / bound),
            bound,
            amplitude: bound,
            kappa_max,
            c: 0.0,
            sigma_hat: 0.0,
        })
    }

    /// The same program observed through a receiver gain `alpha`: samples
    /// and bound scale by `alpha`, the symbol-domain half-width does not.
    /// Solutions scale by `1/alpha`.
    pub fn scaled(&self, alpha: f64) -> FitProblem {
        assert!(alpha > 0.0 && alpha.is_finite());
        FitProblem {
            y: self.y.scaled(alpha),
            y_unit: self.y_unit.clone(),
            bound: self.bound * alpha,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.y.rows()
    }

    pub fn k(&self) -> usize {
        self.y.cols()
    }

    pub fn y(&self) -> &Mat {
        &self.y
    }

    /// Samples divided by the bound; constraints read `|⟨u_j, y'ᵢ⟩| ≤ 1`.
    pub fn y_unit(&self) -> &Mat {
        &self.y_unit
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }

    /// Converts a solution of the unit-box program to the returned `U`.
    fn output_scale(&self) -> f64 {
        self.amplitude / self.bound
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub mu0: f64,
    pub mu_shrink: f64,
    pub mu_min: f64,
    pub grad_tol: f64,
    pub step_tol: f64,
    /// Inner iterations allowed per barrier phase.
    pub max_iters: usize,
    pub active_tol: f64,
    pub rank_tol: f64,
    /// Backtracking factor applied to a rejected step.
    pub ls_shrink: f64,
    /// Armijo sufficient-increase constant.
    pub ls_armijo: f64,
    /// Fraction of the distance to the boundary a step may cover.
    pub boundary_fraction: f64,
    /// Walk/ascend cycles allowed per row dimension in [`solve_algorithm2`].
    pub vertex_cycles_per_dim: usize,
    /// Record the barrier value after every accepted step.
    pub record_trace: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            mu0: 1.0,
            mu_shrink: 0.5,
            mu_min: 1e-8,
            grad_tol: 1e-9,
            step_tol: 1e-12,
            max_iters: 10_000,
            active_tol: 1e-6,
            rank_tol: 1e-8,
            ls_shrink: 0.5,
            ls_armijo: 1e-4,
            boundary_fraction: 0.99,
            vertex_cycles_per_dim: 50,
            record_trace: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            self.mu0,
            self.mu_min,
            self.grad_tol,
            self.step_tol,
            self.active_tol,
            self.rank_tol,
            self.ls_armijo,
        ];
        let ok = positive.iter().all(|v| *v > 0.0 && v.is_finite())
            && self.mu_min < self.mu0
            && self.mu_shrink > 0.0
            && self.mu_shrink < 1.0
            && self.ls_shrink > 0.0
            && self.ls_shrink < 1.0
            && self.boundary_fraction > 0.0
            && self.boundary_fraction < 1.0
            && self.max_iters > 0
            && self.vertex_cycles_per_dim > 0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InvalidProblem(format!(
                "invalid solver parameters {self:?}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailReason {
    /// `κ(Y)` exceeds `κ_max` (including rank-deficient `Y`).
    Condition,
    InitFailure,
    /// A barrier phase ran out of iterations.
    MaxIters,
    /// The vertex walk did not reach a vertex within its cycle budget.
    VertexStall,
    /// The iterate became singular or non-finite.
    Numerical,
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailReason::Condition => "condition",
            FailReason::InitFailure => "init",
            FailReason::MaxIters => "max_iters",
            FailReason::VertexStall => "vertex_stall",
            FailReason::Numerical => "numerical",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Success,
    Fail(FailReason),
}

impl SolveStatus {
    pub fn is_success(&self) -> bool {
        *self == SolveStatus::Success
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub doublings: u32,
    pub phases: usize,
    pub iterations: usize,
    /// Phases that stopped on the iteration cap.
    pub capped_phases: usize,
    pub walk_moves: usize,
    /// Walk moves taken along a direction of constant objective.
    pub flat_moves: usize,
}

/// Barrier values of one phase, in accepted-step order.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTrace {
    pub mu: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BlindSolution {
    pub u: Mat,
    pub x_hat: SymbolMatrix,
    /// `log|det U|` of the returned `U`.
    pub objective: f64,
    pub active_counts: Vec<usize>,
    pub active_ranks: Vec<usize>,
    pub at_vertex: bool,
    pub status: SolveStatus,
    pub stats: SolveStats,
    pub trace: Vec<PhaseTrace>,
}

impl BlindSolution {
    fn failed(prob: &FitProblem, c: &Constellation, reason: FailReason) -> Self {
        let n = prob.n();
        let u = Mat::zeros(n, n);
        let x_hat = round_to_constellation(&Mat::zeros(n, prob.k()), c);
        BlindSolution {
            u,
            x_hat,
            objective: f64::NEG_INFINITY,
            active_counts: vec![0; n],
            active_ranks: vec![0; n],
            at_vertex: false,
            status: SolveStatus::Fail(reason),
            stats: SolveStats::default(),
            trace: Vec::new(),
        }
    }
}

/// `log|det U|`, or `−∞` when `U` is singular.
pub fn objective(u: &Mat) -> f64 {
    let d = det(u).abs();
    if d > 0.0 {
        d.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `Σ ln(1 − zᵢ²)` over a row of products, or `None` if some `|zᵢ| ≥ 1`.
///
/// Factors are multiplied in short runs before taking a logarithm; each
/// factor is at least ~1e-16 in practice, so a run of eight cannot
/// underflow.
fn log_slack_sum(z: &[f64]) -> Option<f64> {
    let mut total = 0.0;
    for chunk in z.chunks(8) {
        let mut prod = 1.0;
        for &v in chunk {
            let s = 1.0 - v * v;
            if !(s > 0.0) {
                return None;
            }
            prod *= s;
        }
        total += prod.ln();
    }
    Some(total)
}

/// Log-barrier objective `log|det U| + μ Σᵢⱼ ln(1 − ⟨u_j, y'ᵢ⟩²)`, with
/// `y'ᵢ` the unit-box samples.
pub fn barrier_value(u: &Mat, prob: &FitProblem, mu: f64) -> Result<f64, SolverError> {
    check_shape(u, prob)?;
    let z = u.matmul(prob.y_unit());
    let mut slack = 0.0;
    for j in 0..z.rows() {
        slack += log_slack_sum(z.row(j)).ok_or(SolverError::Infeasible)?;
    }
    let f = objective(u);
    if f == f64::NEG_INFINITY {
        return Err(SolverError::SingularMatrix);
    }
    Ok(f + mu * slack)
}

/// Gradient of [`barrier_value`]: `U⁻ᵀ + μ Σᵢⱼ (−2 zᵢⱼ / (1 − zᵢⱼ²)) e_j y'ᵢᵀ`.
pub fn barrier_gradient(u: &Mat, prob: &FitProblem, mu: f64) -> Result<Mat, SolverError> {
    check_shape(u, prob)?;
    let z = u.matmul(prob.y_unit());
    if z.as_slice().iter().any(|v| !(v.abs() < 1.0)) {
        return Err(SolverError::Infeasible);
    }
    let inv = inverse(u).map_err(|_| SolverError::SingularMatrix)?;
    let mut g = inv.transpose();
    if mu != 0.0 {
        let d = z.map(|v| -2.0 * v / (1.0 - v * v));
        let push = d.matmul(&prob.y_unit().transpose());
        g = g.add_scaled(&push, mu);
    }
    Ok(g)
}

fn check_shape(u: &Mat, prob: &FitProblem) -> Result<(), SolverError> {
    if u.shape() != (prob.n(), prob.n()) {
        return Err(SolverError::InvalidProblem(format!(
            "U is {:?}, expected {}x{}",
            u.shape(),
            prob.n(),
            prob.n()
        )));
    }
    Ok(())
}

/// A strictly feasible start and the number of halvings it took.
#[derive(Clone, Debug)]
pub struct InitialPoint {
    pub u: Mat,
    pub doublings: u32,
}

/// Haar-random orthogonal start, redrawn and halved until strictly feasible.
///
/// The doubling budget is `⌈log₂ κ_max⌉`, raised when needed to cover the
/// largest sample norm: any orthogonal `Q` with `scale > max‖y'ᵢ‖` is
/// feasible, so the loop always terminates within the budget.
pub fn initial_point(prob: &FitProblem, rng: &mut SeededRng) -> Result<InitialPoint, SolverError> {
    let n = prob.n();
    let y = prob.y_unit();
    let max_norm = (0..prob.k())
        .map(|i| linalg::norm2(&y.column(i)))
        .fold(0.0, f64::max);
    let cap_kappa = prob.kappa_max().log2().ceil().max(0.0) as u32;
    let cap_norm = if max_norm > 1.0 {
        max_norm.log2().ceil() as u32 + 1
    } else {
        1
    };
    let cap = cap_kappa.max(cap_norm);
    let mut scale = 1.0;
    let mut doublings = 0;
    loop {
        let q = linalg::random_orthogonal(n, rng);
        let u = q.scaled(1.0 / scale);
        let z = u.matmul(y);
        if z.as_slice().iter().all(|v| v.abs() < 1.0) {
            return Ok(InitialPoint { u, doublings });
        }
        if doublings >= cap {
            return Err(SolverError::InitFailure(doublings));
        }
        scale *= 2.0;
        doublings += 1;
    }
}

/// Shared front end of both algorithms: condition gate, start point,
/// whitening and barrier ascent.
fn fit(
    prob: &FitProblem,
    params: &SolverParams,
    c: &Constellation,
    rng: &mut SeededRng,
) -> Result<ascent::Fitted, Box<BlindSolution>> {
    if let Err(e) = params.validate() {
        panic!("{e}");
    }
    let kappa = condition_number(prob.y());
    if !(kappa <= prob.kappa_max()) {
        return Err(Box::new(BlindSolution::failed(
            prob,
            c,
            FailReason::Condition,
        )));
    }
    let start = match initial_point(prob, rng) {
        Ok(s) => s,
        Err(_) => {
            return Err(Box::new(BlindSolution::failed(
                prob,
                c,
                FailReason::InitFailure,
            )))
        }
    };
    let white = match ascent::Whitened::new(prob.y_unit()) {
        Some(w) => w,
        None => {
            return Err(Box::new(BlindSolution::failed(
                prob,
                c,
                FailReason::Condition,
            )))
        }
    };
    let mut fitted = ascent::run(white, &start.u, params);
    fitted.stats.doublings = start.doublings;
    Ok(fitted)
}

/// Barrier ascent from a random feasible start; returns `U` and `⌊U Y⌉`.
pub fn solve_algorithm1(
    prob: &FitProblem,
    params: &SolverParams,
    c: &Constellation,
    rng: &mut SeededRng,
) -> BlindSolution {
    let fitted = match fit(prob, params, c, rng) {
        Ok(f) => f,
        Err(sol) => return *sol,
    };
    let status = if fitted.numerical_failure {
        SolveStatus::Fail(FailReason::Numerical)
    } else if fitted.last_phase_capped {
        SolveStatus::Fail(FailReason::MaxIters)
    } else {
        SolveStatus::Success
    };
    let sets = vertex::row_active_sets(&fitted.white, &fitted.w, params);
    finish(prob, c, &fitted, sets, status, false)
}

/// Barrier ascent followed by the vertex walk; on success every row of `U`
/// has `n` linearly independent active constraints and `U` is snapped to the
/// exact vertex.
pub fn solve_algorithm2(
    prob: &FitProblem,
    params: &SolverParams,
    c: &Constellation,
    rng: &mut SeededRng,
) -> BlindSolution {
    let mut fitted = match fit(prob, params, c, rng) {
        Ok(f) => f,
        Err(sol) => return *sol,
    };
    if fitted.numerical_failure {
        let sets = vertex::row_active_sets(&fitted.white, &fitted.w, params);
        return finish(
            prob,
            c,
            &fitted,
            sets,
            SolveStatus::Fail(FailReason::Numerical),
            false,
        );
    }
    let walk = vertex::walk_to_vertex(&fitted.white, &mut fitted.w, params, rng);
    fitted.stats.walk_moves = walk.moves;
    fitted.stats.flat_moves = walk.flat_moves;
    let status = match walk.outcome {
        vertex::WalkOutcome::Vertex => SolveStatus::Success,
        vertex::WalkOutcome::Stall => SolveStatus::Fail(FailReason::VertexStall),
        vertex::WalkOutcome::Singular => SolveStatus::Fail(FailReason::Numerical),
    };
    let at_vertex = walk.outcome == vertex::WalkOutcome::Vertex;
    finish(prob, c, &fitted, walk.sets, status, at_vertex)
}

fn finish(
    prob: &FitProblem,
    c: &Constellation,
    fitted: &ascent::Fitted,
    sets: Vec<RowActiveSet>,
    status: SolveStatus,
    at_vertex: bool,
) -> BlindSolution {
    let u_unit = fitted.white.to_u(&fitted.w);
    let u = u_unit.scaled(prob.output_scale());
    let x_hat = round_to_constellation(&u.matmul(prob.y()), c);
    let n = prob.n();
    BlindSolution {
        objective: objective(&u),
        x_hat,
        u,
        active_counts: sets.iter().map(|s| s.constraints.len()).collect(),
        active_ranks: sets.iter().map(|s| s.rank).collect(),
        at_vertex: at_vertex && sets.iter().all(|s| s.rank == n),
        status,
        stats: fitted.stats.clone(),
        trace: fitted.trace.clone(),
    }
}

#[cfg(test)]
mod tests;

//! Barrier ascent in whitened coordinates.

use crate::linalg::{
    cholesky_lower, cholesky_solve, det, inverse, lower_triangular_inverse, qr_r, Mat,
};

use super::{log_slack_sum, PhaseTrace, SolveStats, SolverParams};

/// Unit-box samples factored as `Y' = L Ŷ` with `L` lower triangular and
/// `Ŷ` having orthonormal rows.
#[derive(Clone, Debug)]
pub(crate) struct Whitened {
    pub yhat: Mat,
    pub l: Mat,
    pub l_inv: Mat,
    pub log_det_l: f64,
}

impl Whitened {
    pub fn new(y_unit: &Mat) -> Option<Self> {
        let r = qr_r(&y_unit.transpose());
        let l = r.transpose();
        let diag_max = (0..l.rows()).fold(0.0f64, |m, i| m.max(l[(i, i)].abs()));
        if (0..l.rows()).any(|i| l[(i, i)].abs() <= diag_max * 1e-14) {
            return None;
        }
        let l_inv = lower_triangular_inverse(&l).ok()?;
        let yhat = l_inv.matmul(y_unit);
        let log_det_l = (0..l.rows()).map(|i| l[(i, i)].abs().ln()).sum();
        Some(Whitened {
            yhat,
            l,
            l_inv,
            log_det_l,
        })
    }

    pub fn n(&self) -> usize {
        self.yhat.rows()
    }

    pub fn to_u(&self, w: &Mat) -> Mat {
        w.matmul(&self.l_inv)
    }

    pub fn w_of(&self, u: &Mat) -> Mat {
        u.matmul(&self.l)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Fitted {
    pub white: Whitened,
    pub w: Mat,
    pub stats: SolveStats,
    pub trace: Vec<PhaseTrace>,
    pub last_phase_capped: bool,
    pub numerical_failure: bool,
}

/// Barrier value in whitened coordinates; `None` outside the open box or at
/// a singular `W`.
fn barrier(w: &Mat, z: &Mat, mu: f64) -> Option<f64> {
    let d = det(w).abs();
    if !(d > 0.0) || !d.is_finite() {
        return None;
    }
    let mut slack = 0.0;
    for j in 0..z.rows() {
        slack += log_slack_sum(z.row(j))?;
    }
    Some(d.ln() + mu * slack)
}

fn gradient(w: &Mat, z: &Mat, yhat: &Mat, mu: f64) -> Option<(Mat, Mat)> {
    let inv = inverse(w).ok()?;
    let (n, k) = z.shape();
    let mut g = inv.transpose();
    for j in 0..n {
        let zr = z.row(j);
        let d: Vec<f64> = zr.iter().map(|&v| -2.0 * v / (1.0 - v * v)).collect();
        for l in 0..n {
            let yr = yhat.row(l);
            let mut s = 0.0;
            for i in 0..k {
                s += d[i] * yr[i];
            }
            g[(j, l)] += mu * s;
        }
    }
    Some((g, inv))
}

/// Negated barrier Hessian over row-major entries of `W`: the log-det part
/// `(W⁻¹)_{bc}(W⁻¹)_{da}` plus, per row `j`, `μ Σᵢ hᵢ ŷᵢ ŷᵢᵀ` with
/// `hᵢ = 2(1 + z_{ji}²)/(1 − z_{ji}²)²`.
fn negated_hessian(inv: &Mat, z: &Mat, yhat: &Mat, mu: f64) -> Mat {
    let (n, k) = z.shape();
    let mut h = Mat::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    h[(a * n + b, c * n + d)] = inv[(b, c)] * inv[(d, a)];
                }
            }
        }
    }
    for j in 0..n {
        for i in 0..k {
            let v = z[(j, i)];
            let s = 1.0 - v * v;
            let hi = mu * 2.0 * (1.0 + v * v) / (s * s);
            for a in 0..n {
                let ya = hi * yhat[(a, i)];
                for b in 0..n {
                    h[(j * n + a, j * n + b)] += ya * yhat[(b, i)];
                }
            }
        }
    }
    h
}

/// Newton direction against the negated Hessian, shifted by a multiple of
/// the identity when that is needed for positive definiteness. The result is
/// always an ascent direction.
fn direction(g: &Mat, inv: &Mat, z: &Mat, yhat: &Mat, mu: f64) -> Option<Mat> {
    let n = g.rows();
    let mut h = negated_hessian(inv, z, yhat, mu);
    let scale = (0..n * n).fold(0.0f64, |m, i| m.max(h[(i, i)]));
    let mut shift = 0.0;
    for _ in 0..40 {
        if let Ok(l) = cholesky_lower(&h) {
            let p = cholesky_solve(&l, g.as_slice());
            return Some(Mat::from_fn(n, n, |a, b| p[a * n + b]));
        }
        let next = if shift == 0.0 {
            1e-8 * scale
        } else {
            10.0 * shift
        };
        for i in 0..n * n {
            h[(i, i)] += next - shift;
        }
        shift = next;
    }
    None
}

/// Largest `t` keeping every `|z + t·zp| < 1`.
fn boundary_distance(z: &Mat, zp: &Mat) -> f64 {
    z.as_slice()
        .iter()
        .zip(zp.as_slice())
        .fold(f64::INFINITY, |best, (&v, &p)| {
            let t = if p > 0.0 {
                (1.0 - v) / p
            } else if p < 0.0 {
                (-1.0 - v) / p
            } else {
                f64::INFINITY
            };
            best.min(t)
        })
}

/// Runs every barrier phase `μ0, μ0·s, … ≥ μ_min` from `u0`.
pub(crate) fn run(white: Whitened, u0: &Mat, params: &SolverParams) -> Fitted {
    let mut w = white.w_of(u0);
    let mut stats = SolveStats::default();
    let mut trace = Vec::new();
    let mut last_phase_capped = false;
    let mut numerical_failure = false;
    let mut step_hint: Option<f64> = None;
    let mut mu = params.mu0;
    while mu >= params.mu_min {
        let phase = run_phase(&white, &mut w, mu, params, step_hint);
        stats.phases += 1;
        stats.iterations += phase.iterations;
        if phase.capped {
            stats.capped_phases += 1;
        }
        last_phase_capped = phase.capped;
        step_hint = phase.last_step;
        if params.record_trace {
            trace.push(PhaseTrace {
                mu,
                values: phase.values,
            });
        }
        if phase.numerical_failure {
            numerical_failure = true;
            break;
        }
        mu *= params.mu_shrink;
    }
    Fitted {
        white,
        w,
        stats,
        trace,
        last_phase_capped,
        numerical_failure,
    }
}

struct PhaseOutcome {
    iterations: usize,
    capped: bool,
    numerical_failure: bool,
    last_step: Option<f64>,
    values: Vec<f64>,
}

/// Damped Newton ascent on one barrier phase: unit step along the
/// shifted Newton direction, capped at a fraction of the distance to the
/// boundary, then Armijo backtracking. Every accepted step increases the
/// barrier value.
fn run_phase(
    white: &Whitened,
    w: &mut Mat,
    mu: f64,
    params: &SolverParams,
    step_hint: Option<f64>,
) -> PhaseOutcome {
    let yhat = &white.yhat;
    let mut out = PhaseOutcome {
        iterations: 0,
        capped: false,
        numerical_failure: false,
        last_step: step_hint,
        values: Vec::new(),
    };
    let mut z = w.matmul(yhat);
    let (mut f, (mut g, mut inv)) = match barrier(w, &z, mu).zip(gradient(w, &z, yhat, mu)) {
        Some(v) => v,
        None => {
            out.numerical_failure = true;
            return out;
        }
    };
    if params.record_trace {
        out.values.push(f - white.log_det_l);
    }
    loop {
        if out.iterations >= params.max_iters {
            out.capped = true;
            break;
        }
        if g.frobenius_norm() <= params.grad_tol {
            break;
        }
        let Some(p) = direction(&g, &inv, &z, yhat, mu) else {
            out.numerical_failure = true;
            break;
        };
        let slope = g.dot(&p);
        if !(slope > params.grad_tol * params.grad_tol) {
            break;
        }
        let zp = p.matmul(yhat);
        let mut t = (params.boundary_fraction * boundary_distance(&z, &zp)).min(1.0);
        let p_norm = p.frobenius_norm();
        let w_scale = w.frobenius_norm().max(1.0);
        let mut accepted = None;
        while t * p_norm > params.step_tol * w_scale {
            let w_new = w.add_scaled(&p, t);
            let z_new = z.add_scaled(&zp, t);
            if let Some(f_new) = barrier(&w_new, &z_new, mu) {
                if f_new >= f + params.ls_armijo * t * slope {
                    accepted = Some((w_new, z_new, f_new));
                    break;
                }
            }
            t *= params.ls_shrink;
        }
        out.iterations += 1;
        let Some((w_new, mut z_new, f_new)) = accepted else {
            // No acceptable step above the step tolerance.
            break;
        };
        if out.iterations.is_multiple_of(32) {
            z_new = w_new.matmul(yhat);
        }
        match gradient(&w_new, &z_new, yhat, mu) {
            Some((g_new, inv_new)) => {
                g = g_new;
                inv = inv_new;
            }
            None => {
                out.numerical_failure = true;
                break;
            }
        }
        out.last_step = Some(t);
        *w = w_new;
        z = z_new;
        f = f_new;
        if params.record_trace {
            out.values.push(f - white.log_det_l);
        }
    }
    out
}

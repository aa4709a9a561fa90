use crate::linalg::{det, Mat, SeededRng};
use crate::model::Constellation;

use super::{solve_algorithm2, FitProblem, SolverParams};

#[derive(Clone, Debug)]
pub struct MaxDetSearch {
    /// Best `{−1, +1}` matrix found.
    pub best: Mat,
    pub best_abs_det: f64,
    /// `|det|` of the rounded terminal vertex of each restart.
    pub per_restart: Vec<f64>,
}

/// Searches for a maximal-determinant `{−1, +1}` matrix by fitting with
/// `Y = I`, where the feasible set is exactly the box `[−1, 1]^{n×n}`.
pub fn maxdet_search(
    n: usize,
    restarts: usize,
    params: &SolverParams,
    rng: &mut SeededRng,
) -> MaxDetSearch {
    assert!(n >= 1 && restarts >= 1);
    let prob = FitProblem::with_bound(&Mat::identity(n), 1.0, 2.0)
        .expect("identity samples are well-posed");
    let c = Constellation::bpsk();
    let mut out = MaxDetSearch {
        best: Mat::zeros(n, n),
        best_abs_det: -1.0,
        per_restart: Vec::with_capacity(restarts),
    };
    for _ in 0..restarts {
        let sol = solve_algorithm2(&prob, params, &c, rng);
        let signs = sol.u.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let value = det(&signs).abs().round();
        out.per_restart.push(value);
        if value > out.best_abs_det {
            out.best_abs_det = value;
            out.best = signs;
        }
    }
    out
}

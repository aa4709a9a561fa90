//! Active sets and the walk from a boundary point to a vertex.

use crate::linalg::{dot, inverse, norm2, pivoted_qr, solve, Mat, SeededRng};

use super::ascent::Whitened;
use super::{FitProblem, SolverParams};

/// Ties with a newly hit constraint during the walk.
const WALK_TIE_TOL: f64 = 1e-9;
/// Below this relative size the face-projected gradient counts as zero.
const FLAT_TOL: f64 = 1e-9;

/// Constraint `sign · ⟨u_j, y'_sample⟩ = 1` holding on some row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActiveConstraint {
    pub sample: usize,
    pub sign: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowActiveSet {
    pub constraints: Vec<ActiveConstraint>,
    /// Dimension of the span of the active samples.
    pub rank: usize,
    /// Samples forming a maximal independent subset of the active ones.
    pub basis: Vec<usize>,
}

impl RowActiveSet {
    fn sign_of(&self, sample: usize) -> f64 {
        self.constraints
            .iter()
            .find(|c| c.sample == sample)
            .map_or(1.0, |c| c.sign)
    }

    fn contains(&self, sample: usize) -> bool {
        self.constraints.iter().any(|c| c.sample == sample)
    }
}

/// Rank and independent subset of sample columns `idx` of `y`, after
/// normalising each column.
fn span_of(y_cols: &[Vec<f64>], idx: &[usize], rank_tol: f64) -> (usize, Vec<usize>) {
    if idx.is_empty() {
        return (0, Vec::new());
    }
    let cols: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| {
            let v = &y_cols[i];
            let nv = norm2(v);
            v.iter().map(|x| x / nv).collect()
        })
        .collect();
    let f = pivoted_qr(&Mat::from_columns(&cols), rank_tol);
    let basis = f.basis().iter().map(|&p| idx[p]).collect();
    (f.rank, basis)
}

fn columns(y: &Mat) -> Vec<Vec<f64>> {
    (0..y.cols()).map(|i| y.column(i)).collect()
}

fn detect_row(z_row: &[f64], y_cols: &[Vec<f64>], tol: f64, rank_tol: f64) -> RowActiveSet {
    let constraints: Vec<ActiveConstraint> = z_row
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() >= 1.0 - tol)
        .map(|(sample, &v)| ActiveConstraint {
            sample,
            sign: v.signum(),
        })
        .collect();
    let idx: Vec<usize> = constraints.iter().map(|c| c.sample).collect();
    let (rank, basis) = span_of(y_cols, &idx, rank_tol);
    RowActiveSet {
        constraints,
        rank,
        basis,
    }
}

/// Per-row active constraints of `U`: `(i, s)` is active on row `j` when
/// `|⟨u_j, y'ᵢ⟩| ≥ 1 − tol` in unit-box units, with `s` its sign.
pub fn active_constraints(u: &Mat, prob: &FitProblem, tol: f64) -> Vec<RowActiveSet> {
    let z = u.matmul(prob.y_unit());
    let y_cols = columns(prob.y_unit());
    (0..z.rows())
        .map(|j| detect_row(z.row(j), &y_cols, tol, SolverParams::default().rank_tol))
        .collect()
}

pub(crate) fn row_active_sets(
    white: &Whitened,
    w: &Mat,
    params: &SolverParams,
) -> Vec<RowActiveSet> {
    let z = w.matmul(&white.yhat);
    let y_cols = columns(&white.yhat);
    (0..z.rows())
        .map(|j| detect_row(z.row(j), &y_cols, params.active_tol, params.rank_tol))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum WalkOutcome {
    Vertex,
    Stall,
    Singular,
}

pub(crate) struct Walk {
    pub outcome: WalkOutcome,
    pub moves: usize,
    pub flat_moves: usize,
    pub sets: Vec<RowActiveSet>,
}

/// Moves `w_j` the least amount that makes `⟨w_j, ŷ_b⟩ = s_b` hold exactly
/// on the basis `b`, then pulls the row back inside the box if the
/// correction pushed some other product past 1.
fn snap_row(w: &mut Mat, j: usize, set: &RowActiveSet, y_cols: &[Vec<f64>]) {
    let r = set.basis.len();
    if r == 0 {
        return;
    }
    let n = w.cols();
    let row = w.row(j).to_vec();
    let resid: Vec<f64> = set
        .basis
        .iter()
        .map(|&b| set.sign_of(b) - dot(&row, &y_cols[b]))
        .collect();
    let new_row: Vec<f64> = if r == n {
        let sys = Mat::from_fn(n, n, |a, c| y_cols[set.basis[a]][c]);
        let rhs: Vec<f64> = set.basis.iter().map(|&b| set.sign_of(b)).collect();
        match solve(&sys, &rhs) {
            Ok(v) => v,
            Err(_) => return,
        }
    } else {
        let gram = Mat::from_fn(r, r, |a, c| {
            dot(&y_cols[set.basis[a]], &y_cols[set.basis[c]])
        });
        let coef = match solve(&gram, &resid) {
            Ok(v) => v,
            Err(_) => return,
        };
        let mut v = row.clone();
        for (a, &b) in set.basis.iter().enumerate() {
            for (x, yb) in v.iter_mut().zip(&y_cols[b]) {
                *x += coef[a] * yb;
            }
        }
        v
    };
    let worst = y_cols
        .iter()
        .map(|yc| dot(&new_row, yc).abs())
        .fold(0.0, f64::max);
    let scale = if worst > 1.0 + WALK_TIE_TOL {
        1.0 / worst
    } else {
        1.0
    };
    w.set_row(j, &new_row.iter().map(|v| v * scale).collect::<Vec<_>>());
}

/// Drives every row of `w` to `n` independent active constraints.
///
/// For a row with a lower-rank active set, the direction is the gradient of
/// `log|det W|` with respect to that row, projected onto the complement of
/// its active samples; along it `|det W|` grows linearly and every active
/// constraint stays active. When the projection vanishes the objective is
/// flat on the face and a random direction in the complement is used. The
/// row then moves until the first inactive constraint becomes tight, which
/// raises its rank by at least one. Constraints are never released.
pub(crate) fn walk_to_vertex(
    white: &Whitened,
    w: &mut Mat,
    params: &SolverParams,
    rng: &mut SeededRng,
) -> Walk {
    let n = white.n();
    let y_cols = columns(&white.yhat);
    let mut sets = row_active_sets(white, w, params);
    for j in 0..n {
        snap_row(w, j, &sets[j], &y_cols);
        let z_row: Vec<f64> = y_cols.iter().map(|yc| dot(w.row(j), yc)).collect();
        sets[j] = detect_row(&z_row, &y_cols, params.active_tol, params.rank_tol);
    }
    let mut walk = Walk {
        outcome: WalkOutcome::Stall,
        moves: 0,
        flat_moves: 0,
        sets: Vec::new(),
    };
    let cap = params.vertex_cycles_per_dim * n;
    let mut cycles = 0;
    loop {
        if sets.iter().all(|s| s.rank == n) {
            walk.outcome = WalkOutcome::Vertex;
            break;
        }
        if cycles >= cap {
            break;
        }
        cycles += 1;
        for j in 0..n {
            if sets[j].rank == n {
                continue;
            }
            let Ok(inv) = inverse(w) else {
                walk.outcome = WalkOutcome::Singular;
                walk.sets = sets;
                return walk;
            };
            let c = inv.column(j);
            let complement = if sets[j].basis.is_empty() {
                (0..n)
                    .map(|a| (0..n).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
                    .collect()
            } else {
                let basis_cols: Vec<Vec<f64>> =
                    sets[j].basis.iter().map(|&b| y_cols[b].clone()).collect();
                pivoted_qr(&Mat::from_columns(&basis_cols), params.rank_tol).complement()
            };
            let mut d = vec![0.0; n];
            for q in &complement {
                let coef = dot(q, &c);
                for (x, qv) in d.iter_mut().zip(q) {
                    *x += coef * qv;
                }
            }
            let flat = norm2(&d) <= FLAT_TOL * norm2(&c);
            if flat {
                d.iter_mut().for_each(|x| *x = 0.0);
                let sign = rng.sign();
                for q in &complement {
                    let coef = if complement.len() == 1 {
                        sign
                    } else {
                        rng.standard_normal()
                    };
                    for (x, qv) in d.iter_mut().zip(q) {
                        *x += coef * qv;
                    }
                }
                walk.flat_moves += 1;
            }
            let row = w.row(j).to_vec();
            let mut lambda = f64::INFINITY;
            for (i, yc) in y_cols.iter().enumerate() {
                if sets[j].contains(i) {
                    continue;
                }
                let zd = dot(&d, yc);
                if zd.abs() <= 1e-14 * norm2(&d) * norm2(yc) {
                    continue;
                }
                let z = dot(&row, yc);
                let t = (zd.signum() - z) / zd;
                lambda = lambda.min(t.max(0.0));
            }
            if !lambda.is_finite() {
                walk.sets = sets;
                return walk;
            }
            let new_row: Vec<f64> = row.iter().zip(&d).map(|(a, b)| a + lambda * b).collect();
            w.set_row(j, &new_row);
            walk.moves += 1;
            let mut set = sets[j].clone();
            for (i, yc) in y_cols.iter().enumerate() {
                if set.contains(i) {
                    continue;
                }
                let z = dot(&new_row, yc);
                if z.abs() >= 1.0 - WALK_TIE_TOL {
                    set.constraints.push(ActiveConstraint {
                        sample: i,
                        sign: z.signum(),
                    });
                }
            }
            let idx: Vec<usize> = set.constraints.iter().map(|c| c.sample).collect();
            let (rank, basis) = span_of(&y_cols, &idx, params.rank_tol);
            set.rank = rank;
            set.basis = basis;
            snap_row(w, j, &set, &y_cols);
            sets[j] = set;
        }
    }
    walk.sets = sets;
    walk
}

use super::{dot, LinalgError, Mat, SeededRng};

/// LU factorisation with partial pivoting, stored compactly.
struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

fn lu_factor(m: &Mat) -> Lu {
    assert!(
        m.is_square(),
        "LU needs a square matrix, got {:?}",
        m.shape()
    );
    let n = m.rows();
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let tiny = f64::EPSILON * n as f64 * m.max_abs();
    let mut singular = false;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold(
                (k, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if pmax <= tiny {
            singular = true;
            continue;
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            if f != 0.0 {
                for j in k + 1..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
    }
    Lu {
        lu,
        perm,
        sign,
        singular,
    }
}

impl Lu {
    fn solve_in_place(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }
}

/// Determinant by partially pivoted LU. Singular input yields 0.
pub fn det(m: &Mat) -> f64 {
    let f = lu_factor(m);
    if f.singular {
        return 0.0;
    }
    (0..m.rows()).fold(f.sign, |acc, i| acc * f.lu[(i, i)])
}

pub fn inverse(m: &Mat) -> Result<Mat, LinalgError> {
    let f = lu_factor(m);
    if f.singular {
        return Err(LinalgError::SingularMatrix);
    }
    let n = m.rows();
    let mut inv = Mat::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = f.solve_in_place(&e);
        for (i, v) in col.into_iter().enumerate() {
            inv[(i, j)] = v;
        }
    }
    if !inv.is_finite() {
        return Err(LinalgError::SingularMatrix);
    }
    Ok(inv)
}

/// Solves `m x = b`.
pub fn solve(m: &Mat, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if m.rows() != b.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{:?} system with {} right-hand entries",
            m.shape(),
            b.len()
        )));
    }
    let f = lu_factor(m);
    if f.singular {
        return Err(LinalgError::SingularMatrix);
    }
    Ok(f.solve_in_place(b))
}

/// Householder reflector for `x`: returns `(v, beta)` with
/// `(I - beta v vᵀ) x = ∓‖x‖ e₀`.
fn householder(x: &[f64]) -> (Vec<f64>, f64) {
    let norm = dot(x, x).sqrt();
    let mut v = x.to_vec();
    if norm == 0.0 || x.len() == 1 {
        return (v, 0.0);
    }
    let alpha = if x[0] >= 0.0 { -norm } else { norm };
    v[0] -= alpha;
    let vv = dot(&v, &v);
    if vv == 0.0 {
        return (v, 0.0);
    }
    (v, 2.0 / vv)
}

/// Householder QR: `m = q · r` with `q` square orthogonal (rows×rows) and
/// `r` upper trapezoidal (rows×cols).
pub fn qr(m: &Mat) -> (Mat, Mat) {
    let (q, r, _) = householder_qr(m, false, true);
    (q, r)
}

/// Upper-triangular factor of a QR factorisation of a tall matrix, as a
/// square `cols×cols` matrix. Skips forming `Q`.
pub fn qr_r(m: &Mat) -> Mat {
    assert!(m.rows() >= m.cols(), "qr_r needs rows >= cols");
    let (_, r, _) = householder_qr(m, false, false);
    Mat::from_fn(m.cols(), m.cols(), |i, j| r[(i, j)])
}

fn householder_qr(m: &Mat, pivot: bool, form_q: bool) -> (Mat, Mat, Vec<usize>) {
    let (rows, cols) = m.shape();
    let mut r = m.clone();
    let mut q = if form_q {
        Mat::identity(rows)
    } else {
        Mat::zeros(0, 0)
    };
    let mut perm: Vec<usize> = (0..cols).collect();
    let steps = rows.min(cols);
    for k in 0..steps {
        if pivot {
            let best = (k..cols)
                .map(|j| {
                    let s: f64 = (k..rows).map(|i| r[(i, j)] * r[(i, j)]).sum();
                    (j, s)
                })
                .fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b })
                .0;
            if best != k {
                for i in 0..rows {
                    let t = r[(i, k)];
                    r[(i, k)] = r[(i, best)];
                    r[(i, best)] = t;
                }
                perm.swap(k, best);
            }
        }
        let x: Vec<f64> = (k..rows).map(|i| r[(i, k)]).collect();
        let (v, beta) = householder(&x);
        if beta == 0.0 {
            continue;
        }
        for j in 0..cols {
            let s: f64 = (k..rows).map(|i| v[i - k] * r[(i, j)]).sum::<f64>() * beta;
            for i in k..rows {
                r[(i, j)] -= s * v[i - k];
            }
        }
        // q ← q · H
        for i in 0..q.rows() {
            let s: f64 = (k..rows).map(|l| q[(i, l)] * v[l - k]).sum::<f64>() * beta;
            for l in k..rows {
                q[(i, l)] -= s * v[l - k];
            }
        }
        for i in k + 1..rows {
            r[(i, k)] = 0.0;
        }
    }
    (q, r, perm)
}

/// Column-pivoted QR of a set of column vectors, used for rank decisions and
/// orthogonal complements of active-constraint sets.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    /// Full orthogonal factor; columns `rank..` span the orthogonal
    /// complement of the input columns.
    pub q: Mat,
    /// `perm[i]` is the input column placed at position `i`.
    pub perm: Vec<usize>,
    pub r_diag: Vec<f64>,
    pub rank: usize,
}

impl PivotedQr {
    /// Input column indices forming a maximal independent subset.
    pub fn basis(&self) -> &[usize] {
        &self.perm[..self.rank]
    }

    /// Orthonormal basis of the complement of the column span.
    pub fn complement(&self) -> Vec<Vec<f64>> {
        (self.rank..self.q.cols())
            .map(|j| self.q.column(j))
            .collect()
    }
}

/// Pivoted QR with the rank cut at `|r_kk| > tol · max(1, |r_00|)`.
pub fn pivoted_qr(columns: &Mat, tol: f64) -> PivotedQr {
    let (q, r, perm) = householder_qr(columns, true, true);
    let steps = columns.rows().min(columns.cols());
    let r_diag: Vec<f64> = (0..steps).map(|i| r[(i, i)].abs()).collect();
    let scale = r_diag.first().copied().unwrap_or(0.0).max(1.0);
    let rank = r_diag.iter().take_while(|&&d| d > tol * scale).count();
    PivotedQr {
        q,
        perm,
        r_diag,
        rank,
    }
}

/// Singular values in descending order, by one-sided Jacobi rotations.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    // Orthogonalise the columns of the taller orientation.
    let b = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.transpose()
    };
    let (rows, cols) = b.shape();
    // Column-major working copy for cache-friendly column rotations.
    let mut c: Vec<Vec<f64>> = (0..cols).map(|j| b.column(j)).collect();
    let eps = f64::EPSILON;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&c[p], &c[p]);
                let beta = dot(&c[q], &c[q]);
                let gamma = dot(&c[p], &c[q]);
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..rows {
                    let xp = c[p][i];
                    let xq = c[q][i];
                    c[p][i] = cs * xp - sn * xq;
                    c[q][i] = sn * xp + cs * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = c.iter().map(|col| dot(col, col).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Ratio of the largest to the smallest singular value; `+∞` when the
/// smallest is zero at working precision.
pub fn condition_number(m: &Mat) -> f64 {
    let sv = singular_values(m);
    let max = sv.first().copied().unwrap_or(0.0);
    let min = sv.last().copied().unwrap_or(0.0);
    let floor = max * f64::EPSILON * m.rows().max(m.cols()) as f64;
    if max == 0.0 || min <= floor {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Haar-distributed orthogonal matrix: QR of a standard Gaussian matrix with
/// column `j` of `Q` multiplied by `sign(R_jj)`.
pub fn random_orthogonal(n: usize, rng: &mut SeededRng) -> Mat {
    assert!(n >= 1);
    let g = Mat::from_fn(n, n, |_, _| rng.standard_normal());
    let (mut q, r) = qr(&g);
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Lower Cholesky factor `L` with `m = L Lᵀ`.
pub fn cholesky_lower(m: &Mat) -> Result<Mat, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "cholesky of {:?}",
            m.shape()
        )));
    }
    let n = m.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let s: f64 = (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum();
        let d = m[(j, j)] - s;
        if d <= 0.0 || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            l[(i, j)] = (m[(i, j)] - s) / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the lower Cholesky factor `L`.
pub fn cholesky_solve(l: &Mat, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (y[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * y[k]).sum();
        y[i] = (y[i] - s) / l[(i, i)];
    }
    y
}

pub fn lower_triangular_inverse(l: &Mat) -> Result<Mat, LinalgError> {
    let n = l.rows();
    let mut inv = Mat::zeros(n, n);
    for j in 0..n {
        if l[(j, j)] == 0.0 {
            return Err(LinalgError::SingularMatrix);
        }
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let s: f64 = (j..i).map(|k| l[(i, k)] * inv[(k, j)]).sum();
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    Ok(inv)
}

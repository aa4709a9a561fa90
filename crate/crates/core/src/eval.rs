//! Reference decoders, ATM alignment and error metrics.

use thiserror::Error;

use crate::linalg::{inverse, Mat};
use crate::model::{round_to_constellation, Constellation, SymbolMatrix};
use crate::theory::SignedPermutation;

/// Residual below which `U A` counts as a signed permutation.
pub const ALIGN_TOL: f64 = 0.05;
/// Default limit on `Mⁿ` for exhaustive ML search.
pub const ML_DEFAULT_CAP: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("channel estimate is singular")]
    SingularMatrix,
    #[error("ML search space {size} exceeds cap {cap}")]
    SearchSpaceTooLarge { size: u64, cap: u64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Blind1,
    Blind2,
    Zf,
    Ml,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Blind1 => "blind1",
            Method::Blind2 => "blind2",
            Method::Zf => "zf",
            Method::Ml => "ml",
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecodeResult {
    pub x_hat: SymbolMatrix,
    pub method: Method,
    /// Variance of the entrywise error in the channel estimate used.
    pub csi_error_var: f64,
}

impl DecodeResult {
    pub fn with_csi_error_var(mut self, var: f64) -> Self {
        self.csi_error_var = var;
        self
    }
}

fn check_square(a: &Mat, y: &Mat) -> Result<(), EvalError> {
    if !a.is_square() || a.rows() != y.rows() {
        return Err(EvalError::DimensionMismatch(format!(
            "channel {:?} against samples {:?}",
            a.shape(),
            y.shape()
        )));
    }
    Ok(())
}

/// Zero-forcing: slice `Â⁻¹ Y` to the constellation.
pub fn zf_decode(a_hat: &Mat, y: &Mat, c: &Constellation) -> Result<DecodeResult, EvalError> {
    check_square(a_hat, y)?;
    let inv = inverse(a_hat).map_err(|_| EvalError::SingularMatrix)?;
    Ok(DecodeResult {
        x_hat: round_to_constellation(&inv.matmul(y), c),
        method: Method::Zf,
        csi_error_var: 0.0,
    })
}

/// Maximum-likelihood detection by exhaustive search over `𝒳ⁿ` per column.
///
/// The first `n − 1` coordinates are enumerated; for each prefix the best
/// last coordinate is the slice of the least-squares fit along `â_n`, which
/// is exact for equally spaced levels because the residual is a convex
/// quadratic in that coordinate.
pub fn ml_decode(
    a_hat: &Mat,
    y: &Mat,
    c: &Constellation,
    cap: u64,
) -> Result<DecodeResult, EvalError> {
    check_square(a_hat, y)?;
    let n = a_hat.rows();
    let m = c.order() as u64;
    let size = (0..n)
        .try_fold(1u64, |acc, _| acc.checked_mul(m))
        .unwrap_or(u64::MAX);
    if size > cap {
        return Err(EvalError::SearchSpaceTooLarge { size, cap });
    }
    let levels = c.levels();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| a_hat.column(j)).collect();
    let last = &cols[n - 1];
    let last_norm2: f64 = last.iter().map(|v| v * v).sum();
    let prefixes = (size / m) as usize;
    let mut x_hat = Mat::zeros(n, y.cols());
    let mut resid = vec![0.0; n];
    let mut digits = vec![0usize; n - 1];
    for s in 0..y.cols() {
        let target = y.column(s);
        let mut best = (f64::INFINITY, vec![0.0; n]);
        for p in 0..prefixes {
            let mut code = p;
            for d in digits.iter_mut() {
                *d = code % c.order();
                code /= c.order();
            }
            resid.copy_from_slice(&target);
            for (j, &d) in digits.iter().enumerate() {
                let x = levels[d];
                for (r, a) in resid.iter_mut().zip(&cols[j]) {
                    *r -= a * x;
                }
            }
            let xn = if last_norm2 > 0.0 {
                let proj: f64 = resid.iter().zip(last).map(|(r, a)| r * a).sum();
                c.round(proj / last_norm2)
            } else {
                levels[0]
            };
            let cost: f64 = resid
                .iter()
                .zip(last)
                .map(|(r, a)| (r - a * xn).powi(2))
                .sum();
            if cost < best.0 {
                best.0 = cost;
                for (j, &d) in digits.iter().enumerate() {
                    best.1[j] = levels[d];
                }
                best.1[n - 1] = xn;
            }
        }
        for i in 0..n {
            x_hat[(i, s)] = best.1[i];
        }
    }
    Ok(DecodeResult {
        x_hat: SymbolMatrix::new(x_hat, c).expect("ML output lies in the constellation"),
        method: Method::Ml,
        csi_error_var: 0.0,
    })
}

/// Row-to-column assignment maximising the total score (Hungarian method).
pub fn max_assignment(score: &Mat) -> Vec<usize> {
    assert!(score.is_square(), "assignment needs a square score matrix");
    let n = score.rows();
    let big = score.max_abs();
    // Potentials-based shortest augmenting path on costs `big − score`,
    // 1-indexed with column 0 as the virtual source.
    let cost = |i: usize, j: usize| big - score[(i - 1, j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[owner[j] - 1] = j - 1;
    }
    assign
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentReport {
    pub t: SignedPermutation,
    /// `max |W − T|` entrywise.
    pub residual: f64,
    pub success: bool,
}

/// Closest signed permutation to `W = U A` by assignment on `|W_ij|`.
pub fn align_atm(w: &Mat) -> AlignmentReport {
    assert!(w.is_square(), "alignment needs a square matrix");
    let n = w.rows();
    let perm = max_assignment(&w.map(f64::abs));
    let signs = (0..n)
        .map(|i| if w[(i, perm[i])] < 0.0 { -1 } else { 1 })
        .collect();
    let t = SignedPermutation::new(perm, signs).expect("assignment is a permutation");
    let residual = if w.is_finite() {
        w.max_abs_diff(&t.to_mat())
    } else {
        f64::INFINITY
    };
    AlignmentReport {
        t,
        residual,
        success: residual < ALIGN_TOL,
    }
}

/// Whether `U` recovers `A⁻¹` up to a signed permutation.
pub fn blind_success(u: &Mat, a: &Mat) -> bool {
    assert_eq!(u.shape(), a.shape(), "U and A must have equal shapes");
    align_atm(&u.matmul(a)).success
}

/// Fraction of mismatched symbols. Unless `aligned`, the rows of `X̂` are
/// first matched to those of `X` by the signed permutation with the most
/// agreements.
pub fn symbol_error_rate(x_hat: &SymbolMatrix, x: &SymbolMatrix, aligned: bool) -> f64 {
    assert_eq!(
        x_hat.shape(),
        x.shape(),
        "symbol matrices must have equal shapes"
    );
    let (n, k) = x.shape();
    if n * k == 0 {
        return 0.0;
    }
    let agree =
        |a: usize, b: usize, s: f64| (0..k).filter(|&j| s * x_hat[(a, j)] == x[(b, j)]).count();
    let mut errors = 0;
    if aligned {
        errors = (0..n).map(|i| k - agree(i, i, 1.0)).sum();
    } else {
        let mut score = Mat::zeros(n, n);
        let mut sign = Mat::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let (pos, neg) = (agree(a, b, 1.0), agree(a, b, -1.0));
                score[(a, b)] = pos.max(neg) as f64;
                sign[(a, b)] = if neg > pos { -1.0 } else { 1.0 };
            }
        }
        for (a, b) in max_assignment(&score).into_iter().enumerate() {
            errors += k - agree(a, b, sign[(a, b)]);
        }
    }
    errors as f64 / (n * k) as f64
}

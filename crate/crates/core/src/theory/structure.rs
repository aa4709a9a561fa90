use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::linalg::Mat;
use crate::model::SymbolMatrix;

use super::TheoryError;

/// A permutation matrix times a `±1` diagonal: row `i` holds `signs[i]` in
/// column `perm[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignedPermutation {
    perm: Vec<usize>,
    signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn new(perm: Vec<usize>, signs: Vec<i8>) -> Option<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return None;
            }
            seen[p] = true;
        }
        if signs.len() != n || signs.iter().any(|s| s.abs() != 1) {
            return None;
        }
        Some(SignedPermutation { perm, signs })
    }

    pub fn identity(n: usize) -> Self {
        SignedPermutation {
            perm: (0..n).collect(),
            signs: vec![1; n],
        }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn to_mat(&self) -> Mat {
        let n = self.n();
        let mut m = Mat::zeros(n, n);
        for (i, (&p, &s)) in self.perm.iter().zip(&self.signs).enumerate() {
            m[(i, p)] = f64::from(s);
        }
        m
    }

    /// Reads an ATM back from a matrix, or `None` if it is not one.
    pub fn from_mat(t: &Mat, tol: f64) -> Option<Self> {
        if !t.is_square() {
            return None;
        }
        let n = t.rows();
        let mut perm = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        for i in 0..n {
            let mut hit = None;
            for j in 0..n {
                let v = t[(i, j)];
                if (v.abs() - 1.0).abs() <= tol {
                    if hit.is_some() {
                        return None;
                    }
                    hit = Some((j, if v > 0.0 { 1 } else { -1 }));
                } else if v.abs() > tol {
                    return None;
                }
            }
            let (j, s) = hit?;
            perm.push(j);
            signs.push(s);
        }
        SignedPermutation::new(perm, signs)
    }

    /// All `2ⁿ·n!` signed permutations of size `n`.
    pub fn all(n: usize) -> Vec<SignedPermutation> {
        let mut perms = Vec::new();
        permutations(&mut (0..n).collect(), 0, &mut perms);
        let mut out = Vec::with_capacity(perms.len() << n);
        for p in perms {
            for mask in 0..(1usize << n) {
                let signs = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { -1 } else { 1 })
                    .collect();
                out.push(SignedPermutation {
                    perm: p.clone(),
                    signs,
                });
            }
        }
        out
    }
}

fn permutations(items: &mut Vec<usize>, start: usize, out: &mut Vec<Vec<usize>>) {
    if start == items.len() {
        out.push(items.clone());
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permutations(items, start + 1, out);
        items.swap(start, i);
    }
}

/// Whether `t` is a signed permutation within `1e-6`.
pub fn is_atm(t: &Mat) -> bool {
    SignedPermutation::from_mat(t, 1e-6).is_some()
}

const MAX_ABS_DET: [u64; 5] = [1, 2, 4, 16, 48];

/// Largest `|det|` over `{−1, +1}^{n×n}` for `n ≤ 5`.
pub fn max_abs_det(n: usize) -> Result<u64, TheoryError> {
    match n {
        1..=5 => Ok(MAX_ABS_DET[n - 1]),
        _ => Err(TheoryError::Unsupported { n }),
    }
}

/// Exact integer determinant by fraction-free elimination.
pub fn integer_det(m: &[Vec<i64>]) -> i64 {
    let n = m.len();
    let mut a: Vec<Vec<i128>> = m
        .iter()
        .map(|r| r.iter().map(|&v| i128::from(v)).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&r| a[r][k] != 0) else {
                return 0;
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    (sign * a[n - 1][n - 1]) as i64
}

/// Maximal `|det|` over `{−1, +1}^{n×n}` by exhaustive search with the first
/// row and column fixed to `+1`, which loses nothing since sign flips of
/// rows and columns preserve `|det|`.
pub fn exhaustive_max_abs_det(n: usize) -> u64 {
    assert!(
        (1..=6).contains(&n),
        "exhaustive search is limited to n ≤ 6"
    );
    let free = (n - 1) * (n - 1);
    let mut best = 0u64;
    let mut m = vec![vec![1i64; n]; n];
    for code in 0u64..(1u64 << free) {
        for b in 0..free {
            m[1 + b / (n - 1)][1 + b % (n - 1)] = if code >> b & 1 == 1 { -1 } else { 1 };
        }
        best = best.max(integer_det(&m).unsigned_abs());
    }
    best
}

/// Column sign-class representatives with first entry `+1`, deduplicated.
fn sign_classes(x: &Mat) -> BTreeSet<Vec<i8>> {
    (0..x.cols())
        .map(|j| {
            let s = if x[(0, j)] < 0.0 { -1.0 } else { 1.0 };
            (0..x.rows())
                .map(|i| if x[(i, j)] * s < 0.0 { -1 } else { 1 })
                .collect()
        })
        .collect()
}

fn check_binary(x: &SymbolMatrix) -> Result<(), TheoryError> {
    if x.order() == 2 {
        Ok(())
    } else {
        Err(TheoryError::NotBinary { order: x.order() })
    }
}

/// Whether some `n` columns of `X` reach the maximal `|det|`.
pub fn has_maximal_subset_property(x: &SymbolMatrix) -> Result<bool, TheoryError> {
    check_binary(x)?;
    let n = x.n();
    let target = max_abs_det(n)?;
    let classes: Vec<Vec<i64>> = sign_classes(x)
        .into_iter()
        .map(|v| v.into_iter().map(i64::from).collect())
        .collect();
    Ok(any_subset(&classes, n, 0, &mut Vec::new(), &mut |cols| {
        let m: Vec<Vec<i64>> = (0..n)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        integer_det(&m).unsigned_abs() == target
    }))
}

fn any_subset<'a>(
    items: &'a [Vec<i64>],
    size: usize,
    start: usize,
    chosen: &mut Vec<&'a Vec<i64>>,
    accept: &mut impl FnMut(&[&Vec<i64>]) -> bool,
) -> bool {
    if chosen.len() == size {
        return accept(chosen);
    }
    for i in start..items.len() {
        chosen.push(&items[i]);
        if any_subset(items, size, i + 1, chosen, accept) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// The two equivalence classes of 4×4 Hadamard matrices under ATMs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HadamardClass {
    H1,
    H2,
}

const H4_FIRST: [[i8; 4]; 4] = [[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]];
const H4_SECOND: [[i8; 4]; 4] = [[-1, 1, 1, 1], [1, -1, 1, 1], [1, 1, -1, 1], [1, 1, 1, -1]];

struct HadamardLists {
    first: Vec<[i8; 4]>,
    second: Vec<[i8; 4]>,
}

/// Columns of the two representatives together with their negations; the
/// constructor checks that the 8 + 8 vectors partition `{−1, +1}⁴`.
fn hadamard_lists() -> &'static HadamardLists {
    static LISTS: OnceLock<HadamardLists> = OnceLock::new();
    LISTS.get_or_init(|| {
        let signed_columns = |rep: &[[i8; 4]; 4]| -> Vec<[i8; 4]> {
            let mut out = Vec::with_capacity(8);
            for j in 0..4 {
                let col = [rep[0][j], rep[1][j], rep[2][j], rep[3][j]];
                out.push(col);
                out.push(col.map(|v| -v));
            }
            out
        };
        let lists = HadamardLists {
            first: signed_columns(&H4_FIRST),
            second: signed_columns(&H4_SECOND),
        };
        let all: BTreeSet<[i8; 4]> = lists.first.iter().chain(&lists.second).copied().collect();
        assert_eq!(all.len(), 16, "Hadamard class lists must partition ±1⁴");
        lists
    })
}

/// Class of a `±1` 4-vector, or `None` if it is not one.
pub fn hadamard_class_4(v: &[f64]) -> Option<HadamardClass> {
    if v.len() != 4 || v.iter().any(|x| x.abs() != 1.0) {
        return None;
    }
    let key = [0, 1, 2, 3].map(|i| if v[i] > 0.0 { 1i8 } else { -1 });
    let lists = hadamard_lists();
    if lists.first.contains(&key) {
        Some(HadamardClass::H1)
    } else if lists.second.contains(&key) {
        Some(HadamardClass::H2)
    } else {
        None
    }
}

/// Which recovery guarantee the columns of `X` fall under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InputClass {
    GuaranteedN2,
    GuaranteedN3,
    GuaranteedN4,
    /// `n = 4` with one complete Hadamard class and nothing from the other.
    HalfProbN4,
    /// Maximal subset property without the extra columns a guarantee needs.
    MspOnly,
    Insufficient,
}

impl InputClass {
    pub fn is_guaranteed(&self) -> bool {
        matches!(
            self,
            InputClass::GuaranteedN2 | InputClass::GuaranteedN3 | InputClass::GuaranteedN4
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            InputClass::GuaranteedN2 => "guaranteed_n2",
            InputClass::GuaranteedN3 => "guaranteed_n3",
            InputClass::GuaranteedN4 => "guaranteed_n4",
            InputClass::HalfProbN4 => "half_prob_n4",
            InputClass::MspOnly => "msp_only",
            InputClass::Insufficient => "insufficient",
        }
    }
}

/// Classifies binary input `X` for `n ∈ {2, 3, 4}`.
///
/// * `n = 2`: guaranteed iff `X` has the maximal subset property.
/// * `n = 3`: guaranteed iff all four sign classes of `{−1, +1}³` occur,
///   i.e. there are four pairwise independent columns.
/// * `n = 4`: guaranteed iff every sign class of one Hadamard class occurs
///   together with a column of the other class; half-probability when only
///   the complete class occurs.
pub fn classify_input(x: &SymbolMatrix) -> Result<InputClass, TheoryError> {
    check_binary(x)?;
    let n = x.n();
    let classes = sign_classes(x);
    let msp = || has_maximal_subset_property(x);
    match n {
        2 => Ok(if msp()? {
            InputClass::GuaranteedN2
        } else {
            InputClass::Insufficient
        }),
        3 => Ok(if classes.len() == 4 {
            InputClass::GuaranteedN3
        } else if msp()? {
            InputClass::MspOnly
        } else {
            InputClass::Insufficient
        }),
        4 => {
            let count = |class| {
                classes
                    .iter()
                    .filter(|v| {
                        let f: Vec<f64> = v.iter().map(|&s| f64::from(s)).collect();
                        hadamard_class_4(&f) == Some(class)
                    })
                    .count()
            };
            let (h1, h2) = (count(HadamardClass::H1), count(HadamardClass::H2));
            Ok(if (h1 == 4 && h2 > 0) || (h2 == 4 && h1 > 0) {
                InputClass::GuaranteedN4
            } else if h1 == 4 || h2 == 4 {
                InputClass::HalfProbN4
            } else if msp()? {
                InputClass::MspOnly
            } else {
                InputClass::Insufficient
            })
        }
        _ => Err(TheoryError::Unsupported { n }),
    }
}

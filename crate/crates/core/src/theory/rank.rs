use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};

use super::TheoryError;

/// Number of `k`-dimensional subspaces of `F_qⁿ`; zero when `k > n`.
pub fn gaussian_binomial(n: u32, k: u32, q: u32) -> BigUint {
    assert!(q >= 2, "field size must be at least 2");
    if k > n {
        return BigUint::zero();
    }
    let q = BigUint::from(q);
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= Pow::pow(&q, n - i) - 1u32;
        den *= Pow::pow(&q, i + 1) - 1u32;
    }
    num / den
}

fn power(q: u32, e: u64) -> BigInt {
    Pow::pow(BigInt::from(q), e)
}

/// Probability that `k` vectors drawn uniformly from `F_qⁿ` span a subspace
/// of dimension exactly `m`, by Möbius inversion over the subspace lattice.
pub fn subspace_dim_distribution(n: u32, k: u32, q: u32, m: u32) -> BigRational {
    if m > n {
        return BigRational::zero();
    }
    let k64 = u64::from(k);
    let mut sum = BigInt::zero();
    for i in 0..=m {
        let choose2 = u64::from(i) * u64::from(i.saturating_sub(1)) / 2;
        let term = power(q, choose2)
            * power(q, u64::from(m - i) * k64)
            * BigInt::from(gaussian_binomial(m, i, q));
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let count = BigInt::from(gaussian_binomial(n, m, q)) * sum;
    BigRational::new(count, power(q, u64::from(n) * k64))
}

/// `r(n, k)`: probability that `k` uniform vectors of `F₂ⁿ` have rank `n`.
pub fn rank_full_prob(n: u32, k: u32) -> BigRational {
    subspace_dim_distribution(n, k, 2, n)
}

pub fn rank_full_prob_f64(n: u32, k: u32) -> f64 {
    to_f64(&rank_full_prob(n, k))
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    N2,
    N3,
    N4,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::N2 => "n2",
            Regime::N3 => "n3",
            Regime::N4 => "n4",
        }
    }
}

/// Closed-form success probability of the blind fit for uniform BPSK input.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessPrediction {
    pub n: usize,
    pub k: usize,
    pub lower: f64,
    pub upper: f64,
    /// Present when the prediction is a point value rather than a bracket.
    pub exact: Option<f64>,
    pub regime: Regime,
}

/// `1 − 2^{n−k}` clamped at zero.
fn excess_factor(n: u32, k: u32) -> BigRational {
    if k <= n {
        return BigRational::zero();
    }
    BigRational::one() - BigRational::new(BigInt::one(), power(2, u64::from(k - n)))
}

/// Success prediction for `n ∈ {2, 3, 4}`:
/// `r(2,k)` exactly for `n = 2`, the bracket `[r(3,k)(1 − 2^{3−k}), r(3,k)]`
/// for `n = 3`, and `r(4,k) r(3,k)⁴ (1 − 2^{4−k})` for `n = 4`.
pub fn predicted_success(n: usize, k: usize) -> Result<SuccessPrediction, TheoryError> {
    let kk = k as u32;
    let point = |regime, p: BigRational| {
        let v = to_f64(&p);
        SuccessPrediction {
            n,
            k,
            lower: v,
            upper: v,
            exact: Some(v),
            regime,
        }
    };
    match n {
        2 => Ok(point(Regime::N2, rank_full_prob(2, kk))),
        3 => {
            let r = rank_full_prob(3, kk);
            Ok(SuccessPrediction {
                n,
                k,
                lower: to_f64(&(&r * excess_factor(3, kk))),
                upper: to_f64(&r),
                exact: None,
                regime: Regime::N3,
            })
        }
        4 => {
            let r3 = rank_full_prob(3, kk);
            let p = rank_full_prob(4, kk) * Pow::pow(&r3, 4u32) * excess_factor(4, kk);
            Ok(point(Regime::N4, p))
        }
        _ => Err(TheoryError::Unsupported { n }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ratio(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    /// Rank over `F_q` of vectors given as digit arrays, by Gaussian
    /// elimination modulo the prime `q`.
    fn rank_mod(mut rows: Vec<Vec<u32>>, q: u32) -> usize {
        let n = rows.first().map_or(0, |r| r.len());
        let mut rank = 0;
        for col in 0..n {
            let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_multiple_of(q)) else {
                continue;
            };
            rows.swap(rank, p);
            let inv = (1..q).find(|&x| rows[rank][col] * x % q == 1).unwrap();
            let pivot: Vec<u32> = rows[rank].iter().map(|v| v * inv % q).collect();
            for r in 0..rows.len() {
                if r != rank && rows[r][col] != 0 {
                    let f = rows[r][col];
                    for c in 0..n {
                        rows[r][c] = (rows[r][c] + q * q - f * pivot[c] % q) % q;
                    }
                }
            }
            rows[rank] = pivot;
            rank += 1;
        }
        rank
    }

    /// Counts of every spanned dimension over all `q^{nk}` tuples.
    fn enumerate_dims(n: u32, k: u32, q: u32) -> Vec<u64> {
        let total = (q as u64).pow(n * k);
        let mut counts = vec![0u64; n as usize + 1];
        for code in 0..total {
            let mut c = code;
            let rows: Vec<Vec<u32>> = (0..k)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            let d = (c % q as u64) as u32;
                            c /= q as u64;
                            d
                        })
                        .collect()
                })
                .collect();
            counts[rank_mod(rows, q)] += 1;
        }
        counts
    }

    #[test]
    fn gaussian_binomial_small_values() {
        assert_eq!(gaussian_binomial(2, 1, 2), BigUint::from(3u32));
        assert_eq!(gaussian_binomial(3, 1, 2), BigUint::from(7u32));
        assert_eq!(gaussian_binomial(3, 2, 2), BigUint::from(7u32));
        assert_eq!(gaussian_binomial(5, 0, 3), BigUint::one());
        assert_eq!(gaussian_binomial(2, 3, 2), BigUint::zero());
        // Lines of F₃³: (27 − 1) / (3 − 1).
        assert_eq!(gaussian_binomial(3, 1, 3), BigUint::from(13u32));
    }

    #[test]
    fn gaussian_binomial_counts_spanning_tuples() {
        // Ordered bases of a subspace: (qᵐ − 1)(qᵐ − q)… ; spanning m-tuples
        // of F_qⁿ divided by those of each m-dim subspace count subspaces.
        for (n, m) in [(3u32, 1u32), (3, 2), (2, 1)] {
            let full = enumerate_dims(m, m, 2)[m as usize];
            let in_space: u64 = enumerate_dims(n, m, 2)[m as usize];
            assert_eq!(BigUint::from(in_space / full), gaussian_binomial(n, m, 2));
        }
    }

    #[test]
    fn rank_prob_examples() {
        assert_eq!(rank_full_prob(2, 2), ratio(6, 16));
        assert_eq!(rank_full_prob(2, 3), ratio(42, 64));
        assert_eq!(rank_full_prob(3, 2), BigRational::zero());
        assert_eq!(rank_full_prob(1, 0), BigRational::zero());
        assert!((rank_full_prob_f64(2, 2) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn rank_prob_matches_enumeration() {
        for n in 1..=3u32 {
            for k in 1..=5u32 {
                let counts = enumerate_dims(n, k, 2);
                let total = 1i64 << (n * k);
                assert_eq!(
                    rank_full_prob(n, k),
                    ratio(counts[n as usize] as i64, total),
                    "n={n} k={k}"
                );
            }
        }
    }

    #[test]
    fn distribution_matches_enumeration() {
        let counts = enumerate_dims(2, 2, 2);
        for m in 0..=2u32 {
            assert_eq!(
                subspace_dim_distribution(2, 2, 2, m),
                ratio(counts[m as usize] as i64, 16)
            );
        }
        let counts = enumerate_dims(2, 3, 3);
        for m in 0..=2u32 {
            assert_eq!(
                subspace_dim_distribution(2, 3, 3, m),
                ratio(counts[m as usize] as i64, 729)
            );
        }
        assert_eq!(subspace_dim_distribution(3, 4, 2, 0), ratio(1, 1 << 12));
    }

    #[test]
    fn distribution_sums_to_one() {
        for q in [2u32, 3] {
            for n in 0..=6u32 {
                for k in 0..=6u32 {
                    let total: BigRational =
                        (0..=n).map(|m| subspace_dim_distribution(n, k, q, m)).sum();
                    assert_eq!(total, BigRational::one(), "n={n} k={k} q={q}");
                    assert!((to_f64(&total) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn predictions() {
        let p = predicted_success(2, 5).unwrap();
        assert_eq!(p.exact, Some(rank_full_prob_f64(2, 5)));
        let p = predicted_success(3, 4).unwrap();
        assert_eq!(p.exact, None);
        assert!((p.lower - rank_full_prob_f64(3, 4) / 2.0).abs() < 1e-15);
        assert_eq!(p.upper, rank_full_prob_f64(3, 4));
        assert_eq!(predicted_success(4, 4).unwrap().exact, Some(0.0));
        assert_eq!(predicted_success(3, 2).unwrap().lower, 0.0);
        assert_eq!(
            predicted_success(5, 9),
            Err(TheoryError::Unsupported { n: 5 })
        );
    }

    proptest! {
        #[test]
        fn union_bound_holds(n in 1u32..7, extra in 0u32..12) {
            let k = n + extra;
            let bound = 1.0 - 2f64.powi(n as i32 - k as i32);
            prop_assert!(rank_full_prob_f64(n, k) >= bound - 1e-15);
        }

        #[test]
        fn prediction_bracket_is_ordered(n in 2usize..5, k in 0usize..30) {
            let p = predicted_success(n, k).unwrap();
            prop_assert!(0.0 <= p.lower && p.lower <= p.upper && p.upper <= 1.0);
        }

        #[test]
        fn gaussian_binomial_is_symmetric(n in 0u32..9, k in 0u32..9, q in 2u32..5) {
            prop_assume!(k <= n);
            prop_assert_eq!(gaussian_binomial(n, k, q), gaussian_binomial(n, n - k, q));
        }
    }
}

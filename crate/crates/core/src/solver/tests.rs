use super::*;
use crate::linalg::{inverse, Mat, SeededRng};
use crate::model::{draw_channel, draw_symbols, Constellation};

fn hadamard2() -> Mat {
    Mat::from_rows(&[[1.0, 1.0], [1.0, -1.0]])
}

#[test]
fn bound_examples() {
    let y = Mat::identity(2);
    assert_eq!(make_problem(&y, 2, 3.0, 0.0, 100.0).unwrap().bound(), 1.0);
    let b = make_problem(&y, 2, 3.0, 0.1, 100.0).unwrap().bound();
    assert!((b - 1.3).abs() < 1e-15);
    let y = Mat::from_rows(&[[1.0], [2.0]]);
    assert_eq!(
        make_problem(&y, 2, 3.0, 0.0, 100.0).unwrap_err(),
        SolverError::TooFewSamples { n: 2, k: 1 }
    );
}

#[test]
fn objective_examples() {
    assert_eq!(objective(&Mat::identity(3)), 0.0);
    assert!((objective(&Mat::diag(&[2.0, 2.0])) - 4f64.ln()).abs() < 1e-15);
    assert!((objective(&hadamard2()) - 2f64.ln()).abs() < 1e-15);
    assert_eq!(
        objective(&Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]])),
        f64::NEG_INFINITY
    );
}

#[test]
fn barrier_vanishes_with_mu() {
    let mut rng = SeededRng::new(1);
    let y = Mat::from_fn(3, 6, |_, _| rng.standard_normal());
    let prob = FitProblem::with_bound(&y, 1.0, 1e6).unwrap();
    let u = Mat::identity(3).scaled(0.1);
    let f = objective(&u);
    let b = barrier_value(&u, &prob, 1e-12).unwrap();
    assert!((b - f).abs() < 1e-10);
    assert!(barrier_value(&Mat::identity(3).scaled(100.0), &prob, 1.0).is_err());
}

#[test]
fn gradient_at_zero_mu_is_inverse_transpose() {
    let mut rng = SeededRng::new(2);
    let y = Mat::from_fn(3, 6, |_, _| rng.standard_normal());
    let prob = FitProblem::with_bound(&y, 1.0, 1e6).unwrap();
    let u = initial_point(&prob, &mut rng).unwrap().u;
    let g = barrier_gradient(&u, &prob, 0.0).unwrap();
    assert!(g.max_abs_diff(&inverse(&u).unwrap().transpose()) < 1e-10);
}

/// The barrier is even in each sample, so a `±y` pair contributes twice the
/// barrier gradient of `y` alone rather than cancelling.
#[test]
fn mirrored_samples_double_barrier_gradient() {
    let half = Mat::from_rows(&[[0.5, 0.2], [0.1, 0.3]]);
    let pairs = Mat::from_rows(&[[0.5, -0.5, 0.2, -0.2], [0.1, -0.1, 0.3, -0.3]]);
    let u = Mat::from_rows(&[[1.0, 0.2], [-0.3, 0.9]]);
    let g_half =
        barrier_gradient(&u, &FitProblem::with_bound(&half, 1.0, 1e6).unwrap(), 0.7).unwrap();
    let g_pairs =
        barrier_gradient(&u, &FitProblem::with_bound(&pairs, 1.0, 1e6).unwrap(), 0.7).unwrap();
    let inv_t = inverse(&u).unwrap().transpose();
    let push_half = g_half.sub(&inv_t);
    let push_pairs = g_pairs.sub(&inv_t);
    assert!(push_pairs.max_abs_diff(&push_half.scaled(2.0)) < 1e-14);
    // At U = I each diagonal push entry is Σ −2z²/(1 − z²) < 0.
    let g_id = barrier_gradient(
        &Mat::identity(2),
        &FitProblem::with_bound(&pairs, 1.0, 1e6).unwrap(),
        1.0,
    )
    .unwrap();
    assert!(g_id[(0, 0)] < 1.0 && g_id[(1, 1)] < 1.0);
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = SeededRng::new(3);
    let (n, k, h) = (3, 6, 1e-6);
    let y = Mat::from_fn(n, k, |_, _| rng.standard_normal());
    let prob = FitProblem::with_bound(&y, 1.0, 1e6).unwrap();
    let u = initial_point(&prob, &mut rng).unwrap().u.scaled(1.5);
    let u = if barrier_value(&u, &prob, 0.3).is_ok() {
        u
    } else {
        u.scaled(1.0 / 1.5)
    };
    let g = barrier_gradient(&u, &prob, 0.3).unwrap();
    let mut fd = Mat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut up = u.clone();
            up[(a, b)] += h;
            let mut dn = u.clone();
            dn[(a, b)] -= h;
            fd[(a, b)] = (barrier_value(&up, &prob, 0.3).unwrap()
                - barrier_value(&dn, &prob, 0.3).unwrap())
                / (2.0 * h);
        }
    }
    let rel = fd.sub(&g).frobenius_norm() / g.frobenius_norm();
    assert!(rel < 1e-5, "{rel}");
}

#[test]
fn initial_point_doublings() {
    let mut rng = SeededRng::new(4);
    let y = Mat::from_fn(3, 9, |_, _| rng.standard_normal());
    let tiny = FitProblem::with_bound(&y.scaled(1e-3), 1.0, 100.0).unwrap();
    let p = initial_point(&tiny, &mut SeededRng::new(9)).unwrap();
    assert_eq!(p.doublings, 0);
    let base = FitProblem::with_bound(&y, 1.0, 100.0).unwrap();
    let big = FitProblem::with_bound(&y.scaled(100.0), 1.0, 100.0).unwrap();
    let a = initial_point(&base, &mut SeededRng::new(9)).unwrap();
    let b = initial_point(&big, &mut SeededRng::new(9)).unwrap();
    assert!(
        b.doublings > a.doublings,
        "{} vs {}",
        b.doublings,
        a.doublings
    );
    let z = b.u.matmul(big.y_unit());
    assert!(z.max_abs() < 1.0);
}

fn noiseless_problem(x: &Mat, seed: u64) -> (Mat, FitProblem) {
    let mut rng = SeededRng::new(seed);
    let a = draw_channel(x.rows(), &mut rng);
    let y = a.matmul(x);
    let prob = make_problem(&y, 2, 3.0, 0.0, 1e6).unwrap();
    (a, prob)
}

/// `U A` is a signed permutation within `tol`.
fn is_signed_permutation(w: &Mat, tol: f64) -> bool {
    let n = w.rows();
    (0..n).all(|i| {
        let big = (0..n)
            .filter(|&j| (w[(i, j)].abs() - 1.0).abs() < tol)
            .count();
        let small = (0..n).filter(|&j| w[(i, j)].abs() < tol).count();
        big == 1 && small == n - 1
    }) && (0..n).all(|j| (0..n).filter(|&i| w[(i, j)].abs() > 0.5).count() == 1)
}

#[test]
fn algorithm1_recovers_two_by_two() {
    let x = Mat::from_rows(&[
        [1.0, 1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0],
    ]);
    for seed in 0..10 {
        let (a, prob) = noiseless_problem(&x, seed);
        let sol = solve_algorithm1(
            &prob,
            &SolverParams::default(),
            &Constellation::bpsk(),
            &mut SeededRng::new(seed),
        );
        assert!(
            is_signed_permutation(&sol.u.matmul(&a), 1e-4),
            "{:?}",
            sol.u.matmul(&a)
        );
    }
}

#[test]
fn rank_deficient_samples_fail_condition() {
    let y = Mat::from_rows(&[[1.0, 2.0, 3.0, -1.0], [1.0, 2.0, 3.0, -1.0]]);
    let prob = FitProblem::with_bound(&y, 1.0, 100.0).unwrap();
    let sol = solve_algorithm1(
        &prob,
        &SolverParams::default(),
        &Constellation::bpsk(),
        &mut SeededRng::new(0),
    );
    assert_eq!(sol.status, SolveStatus::Fail(FailReason::Condition));
}

/// With `Y = H₂` the substitution `Ũ = U Y` turns the program into the 2×2
/// maximal-determinant problem, whose optimum is `|det Ũ| = 2`; hence
/// `|det U| = 2 / |det H₂| = 1`.
#[test]
fn hadamard_square_reaches_log_two() {
    let prob = FitProblem::with_bound(&hadamard2(), 1.0, 100.0).unwrap();
    for seed in 0..5 {
        let sol = solve_algorithm2(
            &prob,
            &SolverParams::default(),
            &Constellation::bpsk(),
            &mut SeededRng::new(seed),
        );
        assert!(sol.status.is_success());
        assert!((objective(&sol.u.matmul(prob.y())) - 2f64.ln()).abs() < 1e-12);
        assert!(sol.objective.abs() < 1e-12, "{}", sol.objective);
    }
}

#[test]
fn algorithm2_reaches_vertex_with_random_samples() {
    let mut rng = SeededRng::new(5);
    for _ in 0..10 {
        let x = draw_symbols(3, 8, &Constellation::bpsk(), &mut rng);
        let (_, prob) = noiseless_problem(&x, rng.index(1000) as u64);
        let sol = solve_algorithm2(
            &prob,
            &SolverParams::default(),
            &Constellation::bpsk(),
            &mut rng,
        );
        if sol.status == SolveStatus::Fail(FailReason::Condition) {
            continue;
        }
        assert!(sol.status.is_success(), "{:?}", sol.status);
        assert!(sol.at_vertex);
        assert!(sol.active_ranks.iter().all(|&r| r == 3));
        let z = sol.u.matmul(prob.y_unit());
        assert!(z.max_abs() <= 1.0 + 1e-8);
    }
}

#[test]
fn maxdet_small() {
    let params = SolverParams::default();
    let mut rng = SeededRng::new(6);
    assert_eq!(maxdet_search(2, 3, &params, &mut rng).best_abs_det, 2.0);
    assert_eq!(maxdet_search(4, 3, &params, &mut rng).best_abs_det, 16.0);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    /// Noisy BPSK samples `A X + E` for a fresh channel.
    fn noisy_problem(n: usize, k: usize, sigma: f64, seed: u64) -> (Mat, FitProblem) {
        let mut rng = SeededRng::new(seed);
        let x = draw_symbols(n, k, &Constellation::bpsk(), &mut rng);
        let a = draw_channel(n, &mut rng);
        let y = a
            .matmul(&x)
            .add(&Mat::from_fn(n, k, |_, _| sigma * rng.standard_normal()));
        (a, make_problem(&y, 2, 3.0, sigma, 1e6).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn phases_ascend_and_success_is_feasible(
            n in 2usize..=4,
            extra in 0usize..=8,
            sigma in 0.0f64..0.3,
            seed in any::<u64>(),
        ) {
            let (_, prob) = noisy_problem(n, 2 * n + extra, sigma, seed);
            let params = SolverParams { record_trace: true, ..Default::default() };
            let sol = solve_algorithm1(&prob, &params, &Constellation::bpsk(), &mut SeededRng::new(seed));
            prop_assume!(sol.status != SolveStatus::Fail(FailReason::Condition));
            for phase in &sol.trace {
                for w in phase.values.windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} after {}", w[1], w[0]);
                }
            }
            if sol.status.is_success() {
                let z = sol.u.matmul(prob.y());
                prop_assert!(z.max_abs() <= prob.bound() * (1.0 + 1e-8));
                prop_assert!(sol.active_counts.iter().all(|&c| c >= 1));
            }
        }

        #[test]
        fn algorithm2_success_is_a_vertex(
            n in 2usize..=4,
            extra in 0usize..=8,
            seed in any::<u64>(),
        ) {
            let (_, prob) = noisy_problem(n, n + extra, 0.0, seed);
            let sol = solve_algorithm2(&prob, &SolverParams::default(), &Constellation::bpsk(), &mut SeededRng::new(seed));
            if sol.status.is_success() {
                prop_assert!(sol.at_vertex);
                prop_assert!(sol.active_ranks.iter().all(|&r| r == n));
                prop_assert!(sol.u.matmul(prob.y()).max_abs() <= prob.bound() * (1.0 + 1e-8));
            }
        }

        #[test]
        fn receiver_gain_scales_solution(
            n in 2usize..=3,
            alpha in 0.01f64..100.0,
            seed in any::<u64>(),
        ) {
            let (_, prob) = noisy_problem(n, 4 * n, 0.1, seed);
            let params = SolverParams::default();
            let c = Constellation::bpsk();
            let base = solve_algorithm1(&prob, &params, &c, &mut SeededRng::new(seed));
            let scaled = solve_algorithm1(&prob.scaled(alpha), &params, &c, &mut SeededRng::new(seed));
            prop_assert_eq!(base.status, scaled.status);
            let expect = base.u.scaled(1.0 / alpha);
            prop_assert!(scaled.u.max_abs_diff(&expect) <= 1e-12 * expect.max_abs().max(1e-300));
            prop_assert_eq!(base.x_hat, scaled.x_hat);
        }

        #[test]
        fn gradient_matches_central_differences(
            n in 2usize..=4,
            fill in 0.3f64..0.95,
            log_mu in -3.0f64..0.0,
            seed in any::<u64>(),
        ) {
            let mut rng = SeededRng::new(seed);
            let y = Mat::from_fn(n, 2 * n, |_, _| rng.standard_normal());
            let prob = FitProblem::with_bound(&y, 1.0, 1e12).unwrap();
            let g0 = Mat::from_fn(n, n, |_, _| rng.standard_normal());
            let u = g0.scaled(fill / g0.matmul(prob.y_unit()).max_abs());
            let mu = 10f64.powf(log_mu);
            let g = barrier_gradient(&u, &prob, mu).unwrap();
            let h = 1e-6;
            let fd = Mat::from_fn(n, n, |a, b| {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[(a, b)] += h;
                dn[(a, b)] -= h;
                (barrier_value(&up, &prob, mu).unwrap() - barrier_value(&dn, &prob, mu).unwrap())
                    / (2.0 * h)
            });
            prop_assert!(fd.sub(&g).frobenius_norm() <= 1e-5 * g.frobenius_norm());
        }
    }
}

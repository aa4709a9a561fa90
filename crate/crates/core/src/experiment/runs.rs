use serde::Serialize;

use crate::eval::{blind_success, ml_decode, symbol_error_rate, zf_decode, ML_DEFAULT_CAP};
use crate::linalg::{Mat, SeededRng};
use crate::model::{
    draw_channel, draw_symbols, perturb_csi, sigma_for_snr_db, transmit, ChannelInstance,
    Constellation, SymbolMatrix,
};
use crate::solver::{
    make_problem, maxdet_search, solve_algorithm1, solve_algorithm2, BlindSolution, FailReason,
    SolveStatus, SolverError, SolverParams,
};
use crate::theory::{
    classify_input, has_maximal_subset_property, max_abs_det, predicted_success,
    rank_full_prob_f64, subspace_dim_distribution, InputClass,
};

use super::{trial_rng, Algorithm, Execution, ExperimentConfig, ExperimentError, XCondition};

/// Redraw budget for conditioned symbol matrices.
const CONDITION_DRAWS: usize = 100_000;
/// Success rate that defines the minimum sample size.
const SAMPLE_SIZE_TARGET: f64 = 0.9;
/// Last `k` scanned by the sample-size search when no `k_max` is given.
const SAMPLE_SIZE_K_LIMIT: usize = 64;

/// Half-width of the normal-approximation 95% interval for a proportion.
pub fn binomial_ci95(successes: usize, trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let p = successes as f64 / trials as f64;
    1.96 * (p * (1.0 - p) / trials as f64).sqrt()
}

fn solve(
    algorithm: Algorithm,
    y: &Mat,
    c: &Constellation,
    sigma_hat: f64,
    margin: f64,
    kappa_max: f64,
    rng: &mut SeededRng,
) -> Result<Option<BlindSolution>, ExperimentError> {
    let prob = match make_problem(y, c.order(), margin, sigma_hat, kappa_max) {
        Ok(p) => p,
        Err(SolverError::TooFewSamples { .. }) => return Ok(None),
        Err(e) => return Err(ExperimentError::Runtime(e.to_string())),
    };
    let params = SolverParams::default();
    Ok(Some(match algorithm {
        Algorithm::A1 => solve_algorithm1(&prob, &params, c, rng),
        Algorithm::A2 => solve_algorithm2(&prob, &params, c, rng),
    }))
}

/// One noiseless parameter point of the success experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessPoint {
    pub n: usize,
    pub k: usize,
    pub order: usize,
    pub c: f64,
    pub kappa_max: f64,
    pub algorithm: Algorithm,
    pub x_condition: XCondition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuccessTrial {
    pub success: bool,
    pub status: SolveStatus,
    pub at_vertex: bool,
    pub active_ranks: Vec<usize>,
    /// Guarantee class of the drawn symbols, for binary input with `n ≤ 4`.
    pub input: Option<InputClass>,
}

fn meets(x: &SymbolMatrix, cond: XCondition) -> Result<bool, ExperimentError> {
    let runtime = |e: crate::theory::TheoryError| ExperimentError::Runtime(e.to_string());
    Ok(match cond {
        XCondition::None => true,
        XCondition::Msp => has_maximal_subset_property(x).map_err(runtime)?,
        XCondition::Theorem => classify_input(x).map_err(runtime)?.is_guaranteed(),
    })
}

fn draw_input(
    point: &SuccessPoint,
    c: &Constellation,
    rng: &mut SeededRng,
) -> Result<SymbolMatrix, ExperimentError> {
    for _ in 0..CONDITION_DRAWS {
        let x = draw_symbols(point.n, point.k, c, rng);
        if meets(&x, point.x_condition)? {
            return Ok(x);
        }
    }
    Err(ExperimentError::Runtime(format!(
        "no {}-conditioned symbol matrix with n = {}, k = {} in {CONDITION_DRAWS} draws",
        point.x_condition.as_str(),
        point.n,
        point.k
    )))
}

/// Draws `X` (conditioned as requested) and `A`, then fits `Y = A X`.
pub fn success_trial(
    point: &SuccessPoint,
    rng: &mut SeededRng,
) -> Result<SuccessTrial, ExperimentError> {
    let c = Constellation::new(point.order).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let x = draw_input(point, &c, rng)?;
    let a = draw_channel(point.n, rng);
    let input = if point.order == 2 && (2..=4).contains(&point.n) {
        classify_input(&x).ok()
    } else {
        None
    };
    let y = a.matmul(&x);
    Ok(
        match solve(point.algorithm, &y, &c, 0.0, point.c, point.kappa_max, rng)? {
            Some(sol) => SuccessTrial {
                success: sol.status.is_success() && blind_success(&sol.u, &a),
                status: sol.status,
                at_vertex: sol.at_vertex,
                active_ranks: sol.active_ranks,
                input,
            },
            None => SuccessTrial {
                success: false,
                status: SolveStatus::Fail(FailReason::Condition),
                at_vertex: false,
                active_ranks: vec![0; point.n],
                input,
            },
        },
    )
}

/// `trials` independent trials of `point`, seeded from `(seed, stream, t)`.
pub fn success_trials(
    point: &SuccessPoint,
    trials: usize,
    seed: u64,
    stream: u64,
    exec: Execution,
) -> Result<Vec<SuccessTrial>, ExperimentError> {
    exec.map(trials, |t| {
        success_trial(point, &mut trial_rng(seed, stream, t as u64))
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuccessRecord {
    pub experiment: &'static str,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub k: usize,
    pub c: f64,
    pub algorithm: &'static str,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub ci95: f64,
    pub pred_lower: Option<f64>,
    pub pred_upper: Option<f64>,
    pub pred_exact: Option<f64>,
    pub seed: u64,
}

fn success_point(cfg: &ExperimentConfig, n: usize, k: usize) -> SuccessPoint {
    SuccessPoint {
        n,
        k,
        order: cfg.m,
        c: cfg.c,
        kappa_max: cfg.kappa_max,
        algorithm: cfg.algorithm,
        x_condition: cfg.x_condition,
    }
}

/// Empirical noiseless success rate over the `(n, k)` grid.
pub fn run_success(
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<Vec<SuccessRecord>, ExperimentError> {
    cfg.validate()?;
    let mut out = Vec::new();
    let mut stream = 0u64;
    for &n in &cfg.n {
        for k in cfg.k_values() {
            let point = success_point(cfg, n, k);
            let trials = success_trials(&point, cfg.trials, cfg.seed, stream, exec)?;
            stream += 1;
            let successes = trials.iter().filter(|t| t.success).count();
            let pred = if cfg.m == 2 && cfg.x_condition == XCondition::None {
                predicted_success(n, k).ok()
            } else {
                None
            };
            out.push(SuccessRecord {
                experiment: "success",
                n,
                m: cfg.m,
                k,
                c: cfg.c,
                algorithm: cfg.algorithm.as_str(),
                trials: cfg.trials,
                successes,
                rate: successes as f64 / cfg.trials as f64,
                ci95: binomial_ci95(successes, cfg.trials),
                pred_lower: pred.as_ref().map(|p| p.lower),
                pred_upper: pred.as_ref().map(|p| p.upper),
                pred_exact: pred.and_then(|p| p.exact),
                seed: cfg.seed,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxDetRecord {
    pub experiment: &'static str,
    pub n: usize,
    pub trials: usize,
    pub attained: usize,
    pub fraction: f64,
    pub best_abs_det: f64,
    /// Whether the target value is the certified maximum.
    pub certified: bool,
    pub seed: u64,
}

/// Fraction of single-start maximal-determinant searches that reach the
/// largest `|det|`; certified against the exact table for `n ≤ 5`.
pub fn run_maxdet(
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<Vec<MaxDetRecord>, ExperimentError> {
    cfg.validate()?;
    let params = SolverParams::default();
    let mut out = Vec::new();
    for (stream, &n) in cfg.n.iter().enumerate() {
        let values = exec.map(cfg.trials, |t| {
            let mut rng = trial_rng(cfg.seed, stream as u64, t as u64);
            maxdet_search(n, 1, &params, &mut rng).best_abs_det
        });
        let best = values.iter().copied().fold(0.0, f64::max);
        let (target, certified) = match max_abs_det(n) {
            Ok(v) => (v as f64, true),
            Err(_) => (best, false),
        };
        let attained = values.iter().filter(|&&v| v == target).count();
        out.push(MaxDetRecord {
            experiment: "maxdet",
            n,
            trials: cfg.trials,
            attained,
            fraction: attained as f64 / cfg.trials as f64,
            best_abs_det: best,
            certified,
            seed: cfg.seed,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleSizeRecord {
    pub experiment: &'static str,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub c: f64,
    pub algorithm: &'static str,
    pub trials_per_k: usize,
    /// Smallest scanned `k` whose success rate reaches 90%.
    pub min_k: Option<usize>,
    pub rate_at_min_k: Option<f64>,
    pub seed: u64,
}

/// Scans `k` upward from `max(k, n)` until the success rate reaches 90%.
pub fn run_sample_size(
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<Vec<SampleSizeRecord>, ExperimentError> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (i, &n) in cfg.n.iter().enumerate() {
        let last = cfg.k_max.unwrap_or(SAMPLE_SIZE_K_LIMIT);
        let mut found = None;
        for k in cfg.k.max(n)..=last {
            let point = success_point(cfg, n, k);
            let stream = ((i as u64) << 16) | k as u64;
            let trials = success_trials(&point, cfg.trials, cfg.seed, stream, exec)?;
            let rate = trials.iter().filter(|t| t.success).count() as f64 / cfg.trials as f64;
            log::info!("sample_size n={n} M={} k={k} rate={rate:.3}", cfg.m);
            if rate >= SAMPLE_SIZE_TARGET {
                found = Some((k, rate));
                break;
            }
        }
        out.push(SampleSizeRecord {
            experiment: "sample_size",
            n,
            m: cfg.m,
            c: cfg.c,
            algorithm: cfg.algorithm.as_str(),
            trials_per_k: cfg.trials,
            min_k: found.map(|f| f.0),
            rate_at_min_k: found.map(|f| f.1),
            seed: cfg.seed,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SerRecord {
    pub experiment: &'static str,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub c: f64,
    pub snr_db: f64,
    pub sigma: f64,
    /// `blind`, `zf` or `ml`.
    pub method: &'static str,
    /// CSI error variance as a fraction of `σ²`; 0 for perfect CSI and for
    /// the blind decoder.
    pub csi_error_frac: f64,
    pub blocks: usize,
    pub block_len: usize,
    pub ser: f64,
    pub seed: u64,
}

/// Per-block symbol error rates in the order blind, ZF perfect, ML perfect,
/// then ZF and ML for each CSI error fraction. ML entries are `None` when
/// the search space exceeds the default cap.
fn ser_block(
    cfg: &ExperimentConfig,
    c: &Constellation,
    n: usize,
    sigma: f64,
    rng: &mut SeededRng,
) -> Result<Vec<Option<f64>>, ExperimentError> {
    let runtime = |e: &dyn std::fmt::Display| ExperimentError::Runtime(e.to_string());
    let x = draw_symbols(n, cfg.block_len, c, rng);
    let a = draw_channel(n, rng);
    let ch = ChannelInstance::new(a.clone(), sigma).map_err(|e| runtime(&e))?;
    let y = transmit(&ch, &x, rng).map_err(|e| runtime(&e))?.y;
    let mut out = Vec::with_capacity(3 + 2 * cfg.csi_error.len());
    let blind = solve(cfg.algorithm, &y, c, sigma, cfg.c, cfg.kappa_max, rng)?;
    out.push(Some(match blind {
        Some(sol) => symbol_error_rate(&sol.x_hat, &x, false),
        None => 1.0,
    }));
    let ml_ok = (c.order() as f64).powi(n as i32) <= ML_DEFAULT_CAP as f64;
    let decode = |a_hat: &Mat, out: &mut Vec<Option<f64>>| -> Result<(), ExperimentError> {
        let zf = zf_decode(a_hat, &y, c).map(|d| symbol_error_rate(&d.x_hat, &x, true));
        out.push(Some(zf.unwrap_or(1.0)));
        out.push(if ml_ok {
            let d = ml_decode(a_hat, &y, c, ML_DEFAULT_CAP).map_err(|e| runtime(&e))?;
            Some(symbol_error_rate(&d.x_hat, &x, true))
        } else {
            None
        });
        Ok(())
    };
    decode(&a, &mut out)?;
    for &frac in &cfg.csi_error {
        let a_hat = perturb_csi(&a, frac * sigma * sigma, rng);
        decode(&a_hat, &mut out)?;
    }
    Ok(out)
}

/// Average post-alignment symbol error rate of the blind fit against ZF and
/// ML with perfect and perturbed channel knowledge.
pub fn run_ser(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<SerRecord>, ExperimentError> {
    cfg.validate()?;
    let c = cfg.constellation()?;
    let mut labels = vec![("blind", 0.0), ("zf", 0.0), ("ml", 0.0)];
    for &frac in &cfg.csi_error {
        labels.push(("zf", frac));
        labels.push(("ml", frac));
    }
    let mut out = Vec::new();
    let mut stream = 0u64;
    for &n in &cfg.n {
        for snr_db in cfg.snr_values() {
            let sigma = sigma_for_snr_db(n, &c, snr_db);
            let blocks: Vec<Vec<Option<f64>>> = exec
                .map(cfg.trials, |t| {
                    ser_block(
                        cfg,
                        &c,
                        n,
                        sigma,
                        &mut trial_rng(cfg.seed, stream, t as u64),
                    )
                })
                .into_iter()
                .collect::<Result<_, _>>()?;
            stream += 1;
            for (i, &(method, frac)) in labels.iter().enumerate() {
                let vals: Vec<f64> = blocks.iter().filter_map(|b| b[i]).collect();
                if vals.is_empty() {
                    continue;
                }
                out.push(SerRecord {
                    experiment: "ser",
                    n,
                    m: cfg.m,
                    c: cfg.c,
                    snr_db,
                    sigma,
                    method,
                    csi_error_frac: frac,
                    blocks: vals.len(),
                    block_len: cfg.block_len,
                    ser: vals.iter().sum::<f64>() / vals.len() as f64,
                    seed: cfg.seed,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryRecord {
    pub experiment: &'static str,
    pub n: usize,
    pub k: usize,
    pub r_nk: f64,
    pub pred_lower: Option<f64>,
    pub pred_upper: Option<f64>,
    pub pred_exact: Option<f64>,
    pub regime: Option<&'static str>,
    /// `Pr(dim = 0); …; Pr(dim = n)` over `F₂ⁿ`.
    pub dim_dist: String,
}

/// Closed-form predictions over the `(n, k)` grid.
pub fn run_theory(cfg: &ExperimentConfig) -> Result<Vec<TheoryRecord>, ExperimentError> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &n in &cfg.n {
        for k in cfg.k_values() {
            let (nn, kk) = (n as u32, k as u32);
            let pred = predicted_success(n, k).ok();
            let dim_dist = (0..=nn)
                .map(|m| {
                    let p = subspace_dim_distribution(nn, kk, 2, m);
                    format!(
                        "{}",
                        num_traits::ToPrimitive::to_f64(&p).unwrap_or(f64::NAN)
                    )
                })
                .collect::<Vec<_>>()
                .join(";");
            out.push(TheoryRecord {
                experiment: "theory",
                n,
                k,
                r_nk: rank_full_prob_f64(nn, kk),
                pred_lower: pred.as_ref().map(|p| p.lower),
                pred_upper: pred.as_ref().map(|p| p.upper),
                pred_exact: pred.as_ref().and_then(|p| p.exact),
                regime: pred.map(|p| p.regime.as_str()),
                dim_dist,
            });
        }
    }
    Ok(out)
}

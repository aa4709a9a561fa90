//! Constellations, channel draws and the transmission `Y = A X + E`.

use std::ops::Deref;

use thiserror::Error;

use crate::linalg::{condition_number, Mat, SeededRng};

/// Channels with a condition number above this are redrawn.
pub const CHANNEL_KAPPA_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("constellation order must be even and at least 2, got {0}")]
    InvalidOrder(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("entry {value} at ({row}, {col}) is not a level of the {order}-PAM constellation")]
    NotInConstellation {
        row: usize,
        col: usize,
        value: f64,
        order: usize,
    },
}

/// M-PAM alphabet `{2i − 1 − M : i = 1..M}`; BPSK is `M = 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    order: usize,
    levels: Vec<f64>,
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self, ModelError> {
        if order < 2 || !order.is_multiple_of(2) {
            return Err(ModelError::InvalidOrder(order));
        }
        let levels = (1..=order)
            .map(|i| (2 * i) as f64 - 1.0 - order as f64)
            .collect();
        Ok(Constellation { order, levels })
    }

    pub fn bpsk() -> Self {
        Constellation::new(2).expect("2 is a valid order")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Largest level, `M − 1`.
    pub fn amplitude(&self) -> f64 {
        (self.order - 1) as f64
    }

    /// Mean energy per symbol under uniform signalling, `(M² − 1)/3`.
    pub fn symbol_energy(&self) -> f64 {
        let m = self.order as f64;
        (m * m - 1.0) / 3.0
    }

    pub fn contains(&self, v: f64) -> bool {
        self.levels.contains(&v)
    }

    /// Nearest level. Exact midpoints go to the level of larger magnitude,
    /// so 0 maps to +1.
    pub fn round(&self, v: f64) -> f64 {
        let top = (self.order - 1) as f64;
        // Level index as a real: levels sit at integers 0..M-1.
        let p = (v + top) / 2.0;
        let idx = if v >= 0.0 {
            (p + 0.5).floor()
        } else {
            (p - 0.5).ceil()
        };
        let idx = if idx.is_nan() {
            0.0
        } else {
            idx.clamp(0.0, top)
        };
        2.0 * idx - top
    }
}

/// An n×k matrix whose entries all lie in a constellation.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolMatrix {
    mat: Mat,
    order: usize,
}

impl SymbolMatrix {
    pub fn new(mat: Mat, c: &Constellation) -> Result<Self, ModelError> {
        for i in 0..mat.rows() {
            for j in 0..mat.cols() {
                let value = mat[(i, j)];
                if !c.contains(value) {
                    return Err(ModelError::NotInConstellation {
                        row: i,
                        col: j,
                        value,
                        order: c.order(),
                    });
                }
            }
        }
        Ok(SymbolMatrix {
            mat,
            order: c.order(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn as_mat(&self) -> &Mat {
        &self.mat
    }

    pub fn into_mat(self) -> Mat {
        self.mat
    }

    pub fn n(&self) -> usize {
        self.mat.rows()
    }

    pub fn k(&self) -> usize {
        self.mat.cols()
    }
}

impl Deref for SymbolMatrix {
    type Target = Mat;

    fn deref(&self) -> &Mat {
        &self.mat
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelInstance {
    pub a: Mat,
    pub sigma: f64,
}

impl ChannelInstance {
    pub fn new(a: Mat, sigma: f64) -> Result<Self, ModelError> {
        if !a.is_square() {
            return Err(ModelError::DimensionMismatch(format!(
                "channel must be square, got {:?}",
                a.shape()
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(ModelError::DimensionMismatch(format!(
                "noise level must be finite and non-negative, got {sigma}"
            )));
        }
        Ok(ChannelInstance { a, sigma })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }
}

#[derive(Clone, Debug)]
pub struct TransmissionBlock {
    pub x: SymbolMatrix,
    pub y: Mat,
}

impl TransmissionBlock {
    pub fn k(&self) -> usize {
        self.y.cols()
    }
}

pub fn draw_symbols(n: usize, k: usize, c: &Constellation, rng: &mut SeededRng) -> SymbolMatrix {
    let levels = c.levels();
    let mat = Mat::from_fn(n, k, |_, _| levels[rng.index(levels.len())]);
    SymbolMatrix {
        mat,
        order: c.order(),
    }
}

/// i.i.d. N(0, 1) channel, redrawn while numerically singular.
pub fn draw_channel(n: usize, rng: &mut SeededRng) -> Mat {
    loop {
        let a = Mat::from_fn(n, n, |_, _| rng.standard_normal());
        if condition_number(&a) <= CHANNEL_KAPPA_LIMIT {
            return a;
        }
    }
}

pub fn transmit(
    ch: &ChannelInstance,
    x: &SymbolMatrix,
    rng: &mut SeededRng,
) -> Result<TransmissionBlock, ModelError> {
    if ch.n() != x.n() {
        return Err(ModelError::DimensionMismatch(format!(
            "channel is {}x{} but symbols have {} rows",
            ch.n(),
            ch.n(),
            x.n()
        )));
    }
    let mut y = ch.a.matmul(x.as_mat());
    if ch.sigma > 0.0 {
        for v in y.as_mut_slice() {
            *v += ch.sigma * rng.standard_normal();
        }
    }
    Ok(TransmissionBlock { x: x.clone(), y })
}

/// `A + Δ` with Δ i.i.d. N(0, err_var).
pub fn perturb_csi(a: &Mat, err_var: f64, rng: &mut SeededRng) -> Mat {
    assert!(err_var >= 0.0, "error variance must be non-negative");
    if err_var == 0.0 {
        return a.clone();
    }
    let sd = err_var.sqrt();
    a.map(|v| v + sd * rng.standard_normal())
}

pub fn round_to_constellation(z: &Mat, c: &Constellation) -> SymbolMatrix {
    SymbolMatrix {
        mat: z.map(|v| c.round(v)),
        order: c.order(),
    }
}

/// Noise level for a per-receive-antenna SNR in dB.
///
/// SNR = E‖Ax‖² / (n σ²) with E‖Ax‖² = n² E[x²] for an i.i.d. N(0, 1)
/// channel, i.e. SNR = n E[x²] / σ².
pub fn sigma_for_snr_db(n: usize, c: &Constellation, snr_db: f64) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    (n as f64 * c.symbol_energy() / snr).sqrt()
}

pub fn snr_db_for_sigma(n: usize, c: &Constellation, sigma: f64) -> f64 {
    10.0 * (n as f64 * c.symbol_energy() / (sigma * sigma)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constellation_levels() {
        assert_eq!(Constellation::new(2).unwrap().levels(), &[-1.0, 1.0]);
        assert_eq!(
            Constellation::new(4).unwrap().levels(),
            &[-3.0, -1.0, 1.0, 3.0]
        );
        assert_eq!(
            Constellation::new(3).unwrap_err(),
            ModelError::InvalidOrder(3)
        );
        assert!(Constellation::new(0).is_err());
    }

    #[test]
    fn rounding_examples() {
        let b = Constellation::bpsk();
        let q = Constellation::new(4).unwrap();
        assert_eq!(b.round(0.3), 1.0);
        assert_eq!(q.round(-2.2), -3.0);
        assert_eq!(b.round(0.0), 1.0);
        assert_eq!(q.round(0.0), 1.0);
        assert_eq!(q.round(2.0), 3.0);
        assert_eq!(q.round(-2.0), -3.0);
        assert_eq!(q.round(-100.0), -3.0);
        assert_eq!(q.round(1e9), 3.0);
        assert_eq!(q.round(-0.99), -1.0);
    }

    #[test]
    fn rounding_matches_nearest_level_search() {
        let mut rng = SeededRng::new(3);
        for order in [2, 4, 8, 32] {
            let c = Constellation::new(order).unwrap();
            for _ in 0..2000 {
                let v = (rng.uniform() - 0.5) * 2.5 * order as f64;
                let nearest = c
                    .levels()
                    .iter()
                    .copied()
                    .min_by(|a, b| (a - v).abs().total_cmp(&(b - v).abs()))
                    .unwrap();
                assert_eq!(c.round(v), nearest, "order {order}, v {v}");
            }
        }
    }

    #[test]
    fn symbols_are_uniform_and_deterministic() {
        let c = Constellation::new(4).unwrap();
        let a = draw_symbols(10, 10_000, &c, &mut SeededRng::new(5));
        let b = draw_symbols(10, 10_000, &c, &mut SeededRng::new(5));
        assert_eq!(a, b);
        for &level in c.levels() {
            let freq = a.as_slice().iter().filter(|&&v| v == level).count() as f64 / 100_000.0;
            assert!((freq - 0.25).abs() < 0.01, "level {level}: {freq}");
        }
    }

    #[test]
    fn channel_moments() {
        let mut rng = SeededRng::new(6);
        let mut vals = Vec::new();
        while vals.len() < 100_000 {
            vals.extend_from_slice(draw_channel(4, &mut rng).as_slice());
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
        assert_eq!(
            draw_channel(3, &mut SeededRng::new(1)),
            draw_channel(3, &mut SeededRng::new(1))
        );
    }

    #[test]
    fn noiseless_transmission_is_linear() {
        let mut rng = SeededRng::new(7);
        let a = draw_channel(3, &mut rng);
        let x = draw_symbols(3, 20, &Constellation::new(8).unwrap(), &mut rng);
        let ch = ChannelInstance::new(a.clone(), 0.0).unwrap();
        let block = transmit(&ch, &x, &mut rng).unwrap();
        for j in 0..20 {
            assert_eq!(block.y.column(j), a.mul_vec(&x.column(j)));
        }
    }

    #[test]
    fn noise_has_requested_variance_and_zero_mean_output() {
        let mut rng = SeededRng::new(8);
        let a = draw_channel(4, &mut rng);
        let x = draw_symbols(4, 25_000, &Constellation::bpsk(), &mut rng);
        let ch = ChannelInstance::new(a.clone(), 1.0).unwrap();
        let block = transmit(&ch, &x, &mut rng).unwrap();
        let e = block.y.sub(&a.matmul(&x));
        let n = e.as_slice().len() as f64;
        let var = e.as_slice().iter().map(|v| v * v).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.02, "{var}");
        let ymean = block.y.as_slice().iter().sum::<f64>() / n;
        assert!(ymean.abs() < 0.05, "{ymean}");
    }

    #[test]
    fn transmit_rejects_mismatched_dimensions() {
        let mut rng = SeededRng::new(9);
        let ch = ChannelInstance::new(Mat::identity(3), 0.0).unwrap();
        let x = draw_symbols(2, 4, &Constellation::bpsk(), &mut rng);
        assert!(matches!(
            transmit(&ch, &x, &mut rng),
            Err(ModelError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn csi_perturbation_variance() {
        let mut rng = SeededRng::new(10);
        let a = Mat::zeros(200, 500);
        assert_eq!(perturb_csi(&a, 0.0, &mut rng), a);
        let err_var = 0.01 * 0.25;
        let d = perturb_csi(&a, err_var, &mut rng);
        let var = d.as_slice().iter().map(|v| v * v).sum::<f64>() / 100_000.0;
        assert!((var / err_var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn rounding_is_idempotent_on_symbols() {
        let c = Constellation::new(8).unwrap();
        let x = draw_symbols(3, 50, &c, &mut SeededRng::new(11));
        assert_eq!(round_to_constellation(&x, &c), x);
    }

    #[test]
    fn symbol_matrix_validation() {
        let c = Constellation::bpsk();
        assert!(SymbolMatrix::new(Mat::from_rows(&[[1.0, -1.0]]), &c).is_ok());
        assert!(matches!(
            SymbolMatrix::new(Mat::from_rows(&[[1.0, 0.0]]), &c),
            Err(ModelError::NotInConstellation { col: 1, .. })
        ));
    }

    #[test]
    fn snr_roundtrip() {
        let c = Constellation::new(4).unwrap();
        let s = sigma_for_snr_db(4, &c, 12.5);
        assert!((snr_db_for_sigma(4, &c, s) - 12.5).abs() < 1e-12);
        // BPSK, n = 1, 0 dB: σ = 1.
        assert!((sigma_for_snr_db(1, &Constellation::bpsk(), 0.0) - 1.0).abs() < 1e-15);
    }
}

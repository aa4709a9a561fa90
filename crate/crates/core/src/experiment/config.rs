use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::model::Constellation;

use super::ExperimentError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Success,
    #[serde(rename = "maxdet")]
    MaxDet,
    SampleSize,
    Ser,
    Theory,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Success => "success",
            Experiment::MaxDet => "maxdet",
            Experiment::SampleSize => "sample_size",
            Experiment::Ser => "ser",
            Experiment::Theory => "theory",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    A1,
    A2,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::A1 => "a1",
            Algorithm::A2 => "a2",
        }
    }
}

/// Restriction on the symbol draws of noiseless success trials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XCondition {
    /// Uniform i.i.d. symbols.
    None,
    /// Redraw until `X` has the maximal subset property.
    Msp,
    /// Redraw until `X` meets the recovery guarantee for its dimension.
    Theorem,
}

impl XCondition {
    pub fn as_str(&self) -> &'static str {
        match self {
            XCondition::None => "none",
            XCondition::Msp => "msp",
            XCondition::Theorem => "theorem",
        }
    }
}

/// Every parameter of one experiment run; echoed into the CSV header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Antenna counts to sweep.
    pub n: Vec<usize>,
    /// Constellation order `M`.
    pub m: usize,
    /// First (or only) sample count.
    pub k: usize,
    /// Last sample count of the sweep, inclusive.
    pub k_max: Option<usize>,
    /// Noise margin multiplier in the box bound.
    pub c: f64,
    /// First (or only) SNR in dB.
    pub snr: f64,
    pub snr_max: Option<f64>,
    pub snr_step: f64,
    pub trials: usize,
    pub block_len: usize,
    pub seed: u64,
    pub kappa_max: f64,
    pub algorithm: Algorithm,
    /// CSI error variances as fractions of `σ²`.
    pub csi_error: Vec<f64>,
    pub x_condition: XCondition,
    pub out: Option<PathBuf>,
    pub no_header_timestamp: bool,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Success,
            n: vec![2],
            m: 2,
            k: 5,
            k_max: None,
            c: 3.0,
            snr: 0.0,
            snr_max: None,
            snr_step: 2.0,
            trials: 200,
            block_len: 400,
            seed: 1,
            kappa_max: 100.0,
            algorithm: Algorithm::A1,
            csi_error: vec![0.01, 0.1],
            x_condition: XCondition::None,
            out: None,
            no_header_timestamp: false,
            threads: None,
        }
    }
}

const MAXDET_MAX_N: usize = 15;
const SAMPLE_SIZE_ORDERS: [usize; 4] = [2, 4, 8, 16];

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(format!("config: {e}")))
    }

    /// Sample counts `k ..= k_max`.
    pub fn k_values(&self) -> Vec<usize> {
        (self.k..=self.k_max.unwrap_or(self.k)).collect()
    }

    /// SNR grid `snr, snr + step, … ≤ snr_max`.
    pub fn snr_values(&self) -> Vec<f64> {
        let Some(end) = self.snr_max else {
            return vec![self.snr];
        };
        let count = ((end - self.snr) / self.snr_step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.snr + i as f64 * self.snr_step)
            .collect()
    }

    pub fn constellation(&self) -> Result<Constellation, ExperimentError> {
        Constellation::new(self.m).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |msg: String| Err(ExperimentError::Config(msg));
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return fail("n must list at least one positive dimension".into());
        }
        self.constellation()?;
        if let Some(k_max) = self.k_max {
            if k_max < self.k {
                return fail(format!("k_max {k_max} is below k {}", self.k));
            }
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return fail(format!(
                "c must be a finite non-negative number, got {}",
                self.c
            ));
        }
        if !(self.kappa_max >= 1.0) {
            return fail(format!(
                "kappa_max must be at least 1, got {}",
                self.kappa_max
            ));
        }
        if !self.snr.is_finite() || !(self.snr_step > 0.0 && self.snr_step.is_finite()) {
            return fail("snr must be finite and snr_step positive".into());
        }
        if let Some(end) = self.snr_max {
            if !(end >= self.snr) {
                return fail(format!("snr_max {end} is below snr {}", self.snr));
            }
        }
        if self.csi_error.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
            return fail("csi_error fractions must be finite and non-negative".into());
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        let n_max = *self.n.iter().max().expect("n is non-empty");
        match self.experiment {
            Experiment::Success => {
                if self.k == 0 {
                    return fail("k must be at least 1".into());
                }
                if self.x_condition != XCondition::None {
                    if self.m != 2 {
                        return fail("x_condition needs binary symbols (m = 2)".into());
                    }
                    let limit = if self.x_condition == XCondition::Msp {
                        5
                    } else {
                        4
                    };
                    if self.n.iter().any(|&n| n < 2 || n > limit) {
                        return fail(format!(
                            "x_condition {} supports n in 2..={limit}",
                            self.x_condition.as_str()
                        ));
                    }
                }
            }
            Experiment::MaxDet => {
                if n_max > MAXDET_MAX_N {
                    return fail(format!("maxdet supports n ≤ {MAXDET_MAX_N}"));
                }
            }
            Experiment::SampleSize => {
                if n_max > 5 {
                    return fail("sample_size supports n ≤ 5".into());
                }
                if !SAMPLE_SIZE_ORDERS.contains(&self.m) {
                    return fail(format!("sample_size supports m in {SAMPLE_SIZE_ORDERS:?}"));
                }
            }
            Experiment::Ser => {
                if self.block_len == 0 {
                    return fail("block_len must be at least 1".into());
                }
            }
            Experiment::Theory => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn json_roundtrip_and_unknown_fields() {
        let cfg = ExperimentConfig {
            experiment: Experiment::Ser,
            n: vec![4],
            snr_max: Some(10.0),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        let partial = ExperimentConfig::from_json(r#"{"experiment":"maxdet","n":[3,4]}"#).unwrap();
        assert_eq!(partial.experiment, Experiment::MaxDet);
        assert_eq!(partial.trials, 200);
        assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn ranges() {
        let cfg = ExperimentConfig {
            k: 3,
            k_max: Some(6),
            snr: 0.0,
            snr_max: Some(5.0),
            snr_step: 2.5,
            ..Default::default()
        };
        assert_eq!(cfg.k_values(), vec![3, 4, 5, 6]);
        assert_eq!(cfg.snr_values(), vec![0.0, 2.5, 5.0]);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            ExperimentConfig {
                trials: 0,
                ..Default::default()
            },
            ExperimentConfig {
                n: vec![],
                ..Default::default()
            },
            ExperimentConfig {
                m: 3,
                ..Default::default()
            },
            ExperimentConfig {
                k: 5,
                k_max: Some(4),
                ..Default::default()
            },
            ExperimentConfig {
                kappa_max: 0.5,
                ..Default::default()
            },
            ExperimentConfig {
                snr_step: 0.0,
                ..Default::default()
            },
            ExperimentConfig {
                experiment: Experiment::MaxDet,
                n: vec![16],
                ..Default::default()
            },
            ExperimentConfig {
                experiment: Experiment::SampleSize,
                m: 32,
                ..Default::default()
            },
            ExperimentConfig {
                x_condition: XCondition::Theorem,
                n: vec![5],
                ..Default::default()
            },
            ExperimentConfig {
                threads: Some(0),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(
                matches!(cfg.validate(), Err(ExperimentError::Config(_))),
                "{cfg:?}"
            );
        }
    }
}

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::{
    run_maxdet, run_sample_size, run_ser, run_success, run_theory, Execution, Experiment,
    ExperimentConfig, ExperimentError,
};

/// Writes `#`-prefixed metadata (version, the full config as JSON and,
/// unless suppressed, a generation timestamp) followed by the CSV rows.
pub fn write_csv<W: Write, R: Serialize>(
    mut w: W,
    cfg: &ExperimentConfig,
    records: &[R],
) -> Result<(), ExperimentError> {
    writeln!(w, "# blind-mimo {}", env!("CARGO_PKG_VERSION"))?;
    let json = serde_json::to_string(cfg).map_err(|e| ExperimentError::Runtime(e.to_string()))?;
    writeln!(w, "# config {json}")?;
    if !cfg.no_header_timestamp {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        writeln!(w, "# generated_unix {secs}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    for r in records {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

/// Runs the configured experiment and writes its CSV; returns the row count.
pub fn run_to_writer<W: Write>(
    cfg: &ExperimentConfig,
    exec: Execution,
    w: W,
) -> Result<usize, ExperimentError> {
    match cfg.experiment {
        Experiment::Success => {
            let r = run_success(cfg, exec)?;
            write_csv(w, cfg, &r).map(|_| r.len())
        }
        Experiment::MaxDet => {
            let r = run_maxdet(cfg, exec)?;
            write_csv(w, cfg, &r).map(|_| r.len())
        }
        Experiment::SampleSize => {
            let r = run_sample_size(cfg, exec)?;
            write_csv(w, cfg, &r).map(|_| r.len())
        }
        Experiment::Ser => {
            let r = run_ser(cfg, exec)?;
            write_csv(w, cfg, &r).map(|_| r.len())
        }
        Experiment::Theory => {
            let r = run_theory(cfg)?;
            write_csv(w, cfg, &r).map(|_| r.len())
        }
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use blind_mimo::experiment::{
    run_to_writer, Algorithm, Execution, Experiment, ExperimentConfig, ExperimentError, XCondition,
};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ExperimentArg {
    Success,
    Maxdet,
    SampleSize,
    Ser,
    Theory,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    A1,
    A2,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum XConditionArg {
    None,
    Msp,
    Theorem,
}

/// Blind MIMO decoding experiments. Results are written as CSV.
#[derive(Debug, Parser)]
#[command(name = "blind-mimo", version)]
struct Cli {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    experiment: Option<ExperimentArg>,
    /// Antenna counts: `4`, `2,3,4` or `2-8`.
    #[arg(long, value_parser = parse_usize_list)]
    n: Option<List<usize>>,
    /// Constellation order.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Noise margin multiplier.
    #[arg(long)]
    c: Option<f64>,
    /// SNR in dB (first point of the sweep).
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    snr_max: Option<f64>,
    #[arg(long)]
    snr_step: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    block_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kappa_max: Option<f64>,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    /// CSI error variances as fractions of σ², comma separated.
    #[arg(long, value_parser = parse_f64_list)]
    csi_error: Option<List<f64>>,
    /// Restrict noiseless symbol draws.
    #[arg(long, value_enum)]
    x_condition: Option<XConditionArg>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_header_timestamp: bool,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    threads: Option<usize>,
}

/// Comma-separated values; a plain `Vec` would make clap expect repeated flags.
#[derive(Clone, Debug)]
struct List<T>(Vec<T>);

fn parse_usize_list(s: &str) -> Result<List<usize>, String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    if let Some((a, b)) = s.split_once('-') {
        let (a, b) = (parse(a)?, parse(b)?);
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok(List((a..=b).collect()));
    }
    s.split(',').map(parse).collect::<Result<_, _>>().map(List)
}

fn parse_f64_list(s: &str) -> Result<List<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(List)
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                ExperimentError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(e) = cli.experiment {
        cfg.experiment = match e {
            ExperimentArg::Success => Experiment::Success,
            ExperimentArg::Maxdet => Experiment::MaxDet,
            ExperimentArg::SampleSize => Experiment::SampleSize,
            ExperimentArg::Ser => Experiment::Ser,
            ExperimentArg::Theory => Experiment::Theory,
        };
    }
    if let Some(a) = cli.algorithm {
        cfg.algorithm = match a {
            AlgorithmArg::A1 => Algorithm::A1,
            AlgorithmArg::A2 => Algorithm::A2,
        };
    }
    if let Some(x) = cli.x_condition {
        cfg.x_condition = match x {
            XConditionArg::None => XCondition::None,
            XConditionArg::Msp => XCondition::Msp,
            XConditionArg::Theorem => XCondition::Theorem,
        };
    }
    macro_rules! set {
        ($($field:ident),*) => {$(if let Some(v) = cli.$field { cfg.$field = v; })*};
    }
    macro_rules! set_opt {
        ($($field:ident),*) => {$(if let Some(v) = cli.$field { cfg.$field = Some(v); })*};
    }
    set!(m, k, c, snr, snr_step, trials, block_len, seed, kappa_max);
    if let Some(List(n)) = cli.n {
        cfg.n = n;
    }
    if let Some(List(f)) = cli.csi_error {
        cfg.csi_error = f;
    }
    set_opt!(k_max, snr_max, out, threads);
    cfg.no_header_timestamp |= cli.no_header_timestamp;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cfg: &ExperimentConfig) -> Result<usize, ExperimentError> {
    let exec = Execution::from_threads(cfg.threads);
    match &cfg.out {
        Some(path) => {
            let file = File::create(path)?;
            let mut w = BufWriter::new(file);
            let rows = run_to_writer(cfg, exec, &mut w)?;
            w.flush()?;
            Ok(rows)
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            let rows = run_to_writer(cfg, exec, &mut w)?;
            w.flush()?;
            Ok(rows)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match build_config(cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(rows) => {
            log::info!("wrote {rows} rows");
            ExitCode::SUCCESS
        }
        Err(ExperimentError::Config(msg)) => {
            eprintln!("error: invalid configuration: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

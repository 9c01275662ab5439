use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use specsense::detectors::{run_algorithm1, run_algorithm2, Decision, DecisionOutcome};
use specsense::harness::{self, ConcentrationConfig, ExperimentConfig};
use specsense::signal::{read_f32_file, NoiseModel, SensingSegment};
use specsense::threshold::{
    analytic_threshold, calibrate_n_eq, empirical_threshold, CacheEntry, CalibrationMode, CalibrationTarget,
    ThresholdCache, ThresholdParams,
};
use specsense::Error;

#[derive(Parser)]
#[command(name = "specsense", version, about = "Cumulative small-sample spectrum sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a threshold for a false-alarm target and store it in the cache.
    Calibrate(CalibrateArgs),
    /// Run the detector over a sample file.
    Detect(DetectArgs),
    /// Run a Monte-Carlo sweep described by a config file.
    Sweep(SweepArgs),
    /// Histogram the final metric under both hypotheses.
    Concentration(ConcentrationArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Empirical,
    Analytic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    /// Quantile of the metric after N vectors.
    Final,
    /// Quantile of the running maximum; controls the stopping rule.
    Sequential,
}

impl From<Target> for CalibrationTarget {
    fn from(t: Target) -> Self {
        match t {
            Target::Final => CalibrationTarget::FinalMetric,
            Target::Sequential => CalibrationTarget::RunningMax,
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long = "L", default_value_t = 32)]
    dim: usize,
    #[arg(long = "N")]
    n: usize,
    #[arg(long, default_value_t = 0.01)]
    pfa: f64,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Empirical)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Target::Final)]
    target: Target,
    /// Equivalent sample count for analytic mode; fitted from H0 trials when absent.
    #[arg(long)]
    neq: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    noise_var: f64,
    #[arg(long, default_value = "thresholds.cache")]
    cache: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    /// Sequential cumulative detector.
    Cumulative,
    /// One-shot ratio over all N vectors.
    OneShot,
}

#[derive(Args)]
struct DetectArgs {
    /// Headerless little-endian f32 samples.
    #[arg(long)]
    file: PathBuf,
    /// Samples are interleaved I/Q pairs; only I is used.
    #[arg(long)]
    iq: bool,
    #[arg(long = "L", default_value_t = 32)]
    dim: usize,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    nmax: usize,
    #[arg(long, value_enum, default_value_t = Algorithm::Cumulative)]
    algorithm: Algorithm,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output base path; overrides `output` in the config.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConcentrationArgs {
    #[arg(long = "L", default_value_t = 32)]
    dim: usize,
    #[arg(long = "N", default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    snr: f64,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    bins: usize,
    /// Histogram CSV path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn calibrate(a: &CalibrateArgs) -> Result<(), Error> {
    let noise = NoiseModel::new(a.noise_var)?;
    let (mode, gamma, trials) = match a.mode {
        Mode::Empirical => {
            let p = ThresholdParams::empirical(a.pfa, a.dim, a.n, a.trials).with_target(a.target.into());
            let t = empirical_threshold(&p, &noise, a.seed)?;
            if t.insufficient_trials {
                eprintln!("warning: {} trials is below 100 / p_fa", a.trials);
            }
            (CalibrationMode::Empirical, t.gamma, a.trials)
        }
        Mode::Analytic => {
            let n_eq = match a.neq {
                Some(v) => v,
                None => {
                    let p = ThresholdParams::empirical(a.pfa, a.dim, a.n, a.trials);
                    let h0 = empirical_threshold(&p, &noise, a.seed)?.statistics;
                    let mean = h0.iter().sum::<f64>() / h0.len() as f64;
                    let n_eq = calibrate_n_eq(mean, a.dim)?;
                    eprintln!("fitted n_eq = {n_eq:.6e} from H0 mean {mean:.6}");
                    n_eq
                }
            };
            let p = ThresholdParams::analytic(a.pfa, a.dim, a.n, n_eq);
            (CalibrationMode::Analytic, analytic_threshold(&p)?, 0)
        }
    };
    let mut cache = ThresholdCache::load(&a.cache)?;
    cache.insert(CacheEntry {
        dim: a.dim,
        n: a.n,
        p_fa: a.pfa,
        mode,
        seed: a.seed,
        target: a.target.into(),
        trials,
        gamma,
    });
    cache.save(&a.cache)?;
    println!("{gamma}");
    Ok(())
}

fn detect(a: &DetectArgs) -> Result<DecisionOutcome, Error> {
    let stream = read_f32_file(&a.file, a.iq)?;
    match a.algorithm {
        Algorithm::Cumulative => run_algorithm1(&stream.samples, a.dim, a.nmax, a.gamma),
        Algorithm::OneShot => {
            let segment = SensingSegment::from_samples(&stream.samples, a.dim, a.nmax, 0)?;
            run_algorithm2(&segment, a.gamma)
        }
    }
}

fn sweep(a: &SweepArgs) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_file(&a.config)?;
    if let Some(out) = &a.output {
        cfg.output = Some(out.clone());
    }
    let base = cfg
        .output
        .clone()
        .ok_or_else(|| Error::InvalidArgument("no output path: set `output` in the config or pass --output".into()))?;
    let result = harness::run_experiment(&cfg)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let (trials, summary) = harness::emit_csv(&result.records, &result.summaries, &base)?;
    print!("{}", harness::summary_csv(&result.summaries));
    eprintln!("wrote {} and {}", trials.display(), summary.display());
    Ok(())
}

fn concentration(a: &ConcentrationArgs) -> Result<(), Error> {
    let mut cfg = ConcentrationConfig::new(a.dim, a.n, a.snr, a.trials, a.seed);
    cfg.bins = a.bins;
    let result = harness::concentration(&cfg)?;
    let csv = result.histogram.to_csv();
    match &a.output {
        Some(path) => std::fs::write(path, csv).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Calibrate(a) => calibrate(&a),
        Command::Detect(a) => {
            let out = detect(&a)?;
            match out.decision {
                Decision::PuPresent => println!("PU_PRESENT k={}", out.stop_sample_size),
                Decision::PuAbsent => println!("PU_ABSENT"),
            }
            Ok(())
        }
        Command::Sweep(a) => sweep(&a),
        Command::Concentration(a) => concentration(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

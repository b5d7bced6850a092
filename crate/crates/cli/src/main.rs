//! `dwld` command-line harness.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dwld::harness::io::{read_complex_vector, read_matrix, read_real_vector};
use dwld::harness::{
    detect_once, fixpoint_debug, run_experiment, with_threads, write_results, DetectionReport,
    ExperimentConfig, OutputFormat, Threads, WeightInput,
};
use dwld::weight_opt::{optimize_weights, WeightModelKind};
use dwld::{Error, SolverOptions};

#[derive(Parser)]
#[command(
    name = "dwld",
    version,
    about = "Debiased weighted LASSO detection experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep of the configured detectors over SNR.
    Simulate(SimulateArgs),
    /// Tune a weight model by minimizing the mean debiased error variance.
    OptimizeWeights(OptimizeArgs),
    /// Run the debiased detector on one measurement read from files.
    Detect(DetectArgs),
    /// Solve the debiasing fixed point for a given estimate.
    Fixpoint(FixpointArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, a positive integer or `auto`.
    #[arg(long)]
    threads: Option<Threads>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Override the number of trials per SNR point.
    #[arg(long)]
    trials: Option<usize>,
    /// Write trial 0 of every SNR point and the detector weights to this directory.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: Common,
    /// Override the weight model.
    #[arg(long)]
    model: Option<WeightModelKind>,
    /// Override the Monte Carlo scenes per evaluation.
    #[arg(long)]
    mc: Option<usize>,
}

#[derive(Args)]
#[group(id = "weights_src", required = true, multiple = false, args = ["lambda", "weights"])]
struct WeightArgs {
    /// Uniform regularization weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Real vector file with one weight per entry.
    #[arg(long)]
    weights: Option<PathBuf>,
}

impl WeightArgs {
    fn load(&self) -> dwld::Result<WeightInput> {
        match (&self.lambda, &self.weights) {
            (Some(l), None) => Ok(WeightInput::Scalar(*l)),
            (None, Some(p)) => Ok(WeightInput::Values(read_real_vector(p)?)),
            _ => unreachable!("clap enforces exactly one"),
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Measurement vector file.
    #[arg(long)]
    y: PathBuf,
    /// Design matrix file.
    #[arg(long)]
    a: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    /// Target per-entry false-alarm rate.
    #[arg(long, default_value_t = 0.01)]
    pfa: f64,
    /// Noise variance.
    #[arg(long)]
    sigma2: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: OutputFormat,
}

#[derive(Args)]
struct FixpointArgs {
    /// Weighted LASSO estimate file.
    #[arg(long)]
    x: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    /// Sampling ratio M/N.
    #[arg(long)]
    gamma: f64,
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_file(&c.config)?;
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = c.threads {
        cfg.threads = t;
    }
    if let Some(o) = &c.out {
        cfg.output = Some(o.clone());
    }
    if let Some(f) = c.format {
        cfg.format = f;
    }
    Ok(cfg)
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.common)?;
    if let Some(t) = args.trials {
        cfg.n_trials = t;
    }
    cfg.validate()?;
    if cfg.detectors.is_empty() {
        return Err(Failure::Input(
            "config defines no [detector.<name>] sections".into(),
        ));
    }
    let dump = args.dump.as_deref();
    let out = with_threads(cfg.threads, || run_experiment(&cfg, dump))??;
    write_results(&out, cfg.format, sink(cfg.output.as_deref())?)?;
    if out.all_infeasible() {
        return Err(Failure::Numerical(
            "every debiased trial was infeasible; increase the regularization weights".into(),
        ));
    }
    Ok(())
}

fn optimize(args: OptimizeArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.common)?;
    if let Some(m) = args.model {
        cfg.optimize.model = m;
    }
    if let Some(mc) = args.mc {
        cfg.optimize.settings.n_mc = mc;
    }
    cfg.validate()?;
    let o = &cfg.optimize;
    let scene = cfg.scene(1.0)?.with_snr_db(o.snr_db)?;
    let result = with_threads(cfg.threads, || {
        optimize_weights(o.model, &scene, &o.settings, &cfg.solver)
    })??;
    let mut w = sink(cfg.output.as_deref())?;
    match cfg.format {
        OutputFormat::Json => {
            serde_json_write(&mut w, &result)?;
        }
        OutputFormat::Csv => {
            writeln!(w, "# seed = {}", cfg.master_seed)?;
            writeln!(w, "# model = {:?}", o.model)?;
            writeln!(w, "# snr_db = {}", o.snr_db)?;
            writeln!(
                w,
                "# best lambda0 = {} alpha = {}",
                result.model.lambda0, result.model.alpha
            )?;
            writeln!(
                w,
                "lambda0,alpha,f2_mean,f2_std_error,n_trials,n_failed,from_grid"
            )?;
            for e in &result.history {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    e.model.lambda0,
                    e.model.alpha,
                    e.estimate.mean_sigma_w2,
                    e.estimate.std_error,
                    e.estimate.n_trials,
                    e.estimate.n_failed,
                    e.from_grid
                )?;
            }
        }
    }
    w.flush()?;
    eprintln!(
        "best {:?} weights: lambda0 = {:.6}, alpha = {:.6}, mean sigma_w^2 = {:.6e}",
        o.model, result.model.lambda0, result.model.alpha, result.estimate.mean_sigma_w2
    );
    Ok(())
}

fn serde_json_write<T: serde::Serialize>(w: &mut dyn Write, v: &T) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *w, v).map_err(|e| Failure::Input(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn write_detection(
    r: &DetectionReport,
    format: OutputFormat,
    w: &mut dyn Write,
) -> Result<(), Failure> {
    match format {
        OutputFormat::Json => serde_json_write(w, r)?,
        OutputFormat::Csv => {
            writeln!(w, "# lambda_cro = {}", r.lambda_cro)?;
            writeln!(w, "# rho_ca = {}", r.rho_ca)?;
            writeln!(w, "# sigma_w2 = {}", r.sigma_w2)?;
            writeln!(w, "# kappa = {}", r.kappa)?;
            writeln!(w, "index,x_wl_re,x_wl_im,x_d_re,x_d_im,detected")?;
            let mut hit = vec![false; r.x_d.len()];
            for &i in &r.detected {
                hit[i] = true;
            }
            for (i, (a, b)) in r.x_wl.iter().zip(r.x_d.iter()).enumerate() {
                writeln!(
                    w,
                    "{i},{},{},{},{},{}",
                    a.re,
                    a.im,
                    b.re,
                    b.im,
                    u8::from(hit[i])
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn detect(args: DetectArgs) -> Result<(), Failure> {
    let y = read_complex_vector(&args.y)?;
    let a = read_matrix(&args.a)?;
    let weights = args.weights.load()?;
    let report = match detect_once(
        y,
        &a,
        &weights,
        args.pfa,
        args.sigma2,
        &SolverOptions::default(),
    ) {
        Err(e @ Error::DebiasInfeasible { .. }) => {
            return Err(Failure::Numerical(format!(
                "{e}; the estimate is too dense, increase the regularization weights"
            )))
        }
        other => other?,
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_detection(&report, args.format, &mut *sink(args.out.as_deref())?)
}

fn fixpoint(args: FixpointArgs) -> Result<(), Failure> {
    let x = read_complex_vector(&args.x)?;
    let weights = args.weights.load()?;
    let r = fixpoint_debug(x, &weights, args.gamma)?;
    println!("lambda_cro = {}", r.lambda_cro);
    println!("rho_ca = {}", r.rho_ca);
    println!("iterations = {}", r.iterations);
    println!("residual_lambda = {:e}", r.residual_lambda);
    println!("residual_rho = {:e}", r.residual_rho);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::OptimizeWeights(a) => optimize(a),
        Command::Detect(a) => detect(a),
        Command::Fixpoint(a) => fixpoint(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}

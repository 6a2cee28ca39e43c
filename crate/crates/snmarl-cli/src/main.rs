//! Command-line entry point. Exit codes: 0 success, 1 configuration error,
//! 2 runtime or numeric failure, 3 analysis-law violation.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use snmarl::mappo::{RunConfig, SnVariant};
use snmarl::{Error, Result};
use snmarl_cli::runner;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "snmarl", version, about = "Multi-agent actor-critic experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed and stream metrics to CSV.
    Train(TrainArgs),
    /// Train every configured seed and write cross-seed summaries.
    Sweep(SweepArgs),
    /// Evaluate a saved checkpoint with a greedy policy.
    Eval(EvalArgs),
    /// Verify the spectral-normalization gradient laws and write a report.
    AnalyzeGradients(AnalyzeArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: PathBuf,
    /// Critic normalization variant: none, full_sn, mid_sn, or last_sn.
    #[arg(long)]
    variant: Option<String>,
    /// Scenario name, e.g. skirmish-5v6 or warehouse-tiny-2ag.
    #[arg(long)]
    env: Option<String>,
    /// Total environment steps to train for.
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory root.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<(RunConfig, Vec<u64>, PathBuf)> {
        let (mut config, seeds, file_out) = runner::load_harness_config(&self.config)?;
        if let Some(v) = &self.variant {
            config.variant = v.parse::<SnVariant>()?;
        }
        if let Some(env) = &self.env {
            config.scenario = env.clone();
        }
        if let Some(steps) = self.steps {
            config.total_env_steps = steps;
        }
        let out = self.out.clone().or(file_out).unwrap_or_else(|| PathBuf::from("out"));
        config.validate()?;
        Ok((config, seeds, out))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Seed for this run (default: first configured seed, else 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Continue from the output directory's checkpoint.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Comma-separated seed list, overriding the config file.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint file written by a training run.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Number of greedy episodes to play.
    #[arg(long, default_value_t = 32)]
    episodes: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Explicit layer widths, input first (e.g. --layers 8,16,16,4);
    /// omitted: random shapes per trial.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    /// Number of random networks to test.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Random inputs per network for the sign-preservation suite.
    #[arg(long, default_value_t = 1000)]
    sign_inputs: usize,
    /// Sample budget for the biased counterexample search.
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    /// Maximum allowed relative deviation from the scaling law.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV path.
    #[arg(long, default_value = "analysis_report.csv")]
    out: PathBuf,
    /// Inject a deliberate fault for negative-control testing.
    /// Accepted value: skip-stop-gradient.
    #[arg(long)]
    inject_fault: Option<String>,
}

fn train(args: &TrainArgs) -> Result<()> {
    let (config, seeds, out) = args.common.resolve()?;
    let seed = args.seed.or_else(|| seeds.first().copied()).unwrap_or(0);
    let dir = out.join(format!("seed_{seed}"));
    let outcome = runner::run_training(&config, seed, &dir, args.resume)?;
    match &outcome.status {
        runner::RunStatus::Completed => println!(
            "completed {} updates; metrics: {}",
            outcome.rows_written,
            outcome.metrics_path.display()
        ),
        runner::RunStatus::TimedOut => println!(
            "stopped at the time budget after {} updates; resume with --resume; metrics: {}",
            outcome.rows_written,
            outcome.metrics_path.display()
        ),
        runner::RunStatus::Failed(msg) => println!("failed: {msg}"),
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let (config, file_seeds, out) = args.common.resolve()?;
    let seeds = args.seeds.clone().unwrap_or(file_seeds);
    let report = runner::run_sweep(&config, &seeds, &out)?;
    for seed in &report.seeds {
        println!("seed {}: {:?}", seed.seed, seed.status);
    }
    println!(
        "{} of {} seeds completed; summary: {}",
        report.survivors,
        report.seeds.len(),
        report.summary_path.display()
    );
    if report.warning {
        eprintln!("warning: summary covers only the completed seeds");
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let stats = runner::evaluate_checkpoint(&args.checkpoint, args.episodes)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let skip_stop_gradient = match args.inject_fault.as_deref() {
        None => false,
        Some("skip-stop-gradient") => true,
        Some(other) => {
            return Err(Error::Usage(format!(
                "unknown fault '{other}'; available: skip-stop-gradient"
            )))
        }
    };
    let opts = runner::AnalyzeOptions {
        trials: args.trials,
        widths: args.layers.clone(),
        sign_inputs: args.sign_inputs,
        counterexample_budget: args.budget,
        tolerance: args.tolerance,
        skip_stop_gradient,
        seed: args.seed,
        out: args.out.clone(),
    };
    let summary = runner::analyze_gradients(&opts)?;
    println!(
        "scaling law: worst relative deviation {:.3e} over {} networks (tolerance {:.1e})",
        summary.worst_gradient_deviation, summary.trials, summary.tolerance
    );
    println!(
        "output scaling: worst relative error {:.3e}",
        summary.worst_output_error
    );
    println!(
        "sign preservation: {}/{} inputs matched",
        summary.sign_inputs_checked - summary.sign_mismatches,
        summary.sign_inputs_checked
    );
    match summary.counterexample_samples {
        Some(n) => println!("biased counterexample: found after {n} samples"),
        None => println!("biased counterexample: not found"),
    }
    println!("report: {}", summary.report_path.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(args) => train(args),
        Command::Sweep(args) => sweep(args),
        Command::Eval(args) => eval(args),
        Command::AnalyzeGradients(args) => analyze(args),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::Serde(_) => 1,
        Error::Numeric(_) | Error::EnvInvariant(_) | Error::Io(_) => 2,
        Error::AnalysisViolation(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

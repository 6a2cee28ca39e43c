//! Execution engine behind the CLI: single training runs with streaming CSV
//! metrics, multi-seed sweeps with cross-seed summaries, checkpoint
//! evaluation, and the gradient-analysis suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use snmarl::analysis::{
    bias_counterexample_search, gradient_scaling_check, gradient_scaling_check_through_sigma,
    kink_safe_input, sign_preservation_check, BiasFreeMlp,
};
use snmarl::mappo::{EvalStats, MetricsRow, RunConfig, Trainer};
use snmarl::{Error, Result};
use std::collections::HashSet;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EVAL_CSV_HEADER: &str =
    "env_steps,mean_return,win_rate_or_deliveries,dead_enemies,episodes";

/// Loads a harness config file: every `RunConfig` key, plus the run-list
/// keys `seeds` and `out` which belong to the harness rather than to one
/// training run.
pub fn load_harness_config(path: &Path) -> Result<(RunConfig, Vec<u64>, Option<PathBuf>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("config root must be a JSON object".into()))?;

    let seeds = match obj.remove("seeds") {
        None => Vec::new(),
        Some(v) => serde_json::from_value::<Vec<u64>>(v)
            .map_err(|e| Error::Config(format!("config key 'seeds': {e}")))?,
    };
    let out = match obj.remove("out") {
        None => None,
        Some(v) => Some(PathBuf::from(
            serde_json::from_value::<String>(v)
                .map_err(|e| Error::Config(format!("config key 'out': {e}")))?,
        )),
    };
    let config: RunConfig = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
    ensure_distinct(&seeds)?;
    Ok((config, seeds, out))
}

pub fn ensure_distinct(seeds: &[u64]) -> Result<()> {
    let unique: HashSet<&u64> = seeds.iter().collect();
    if unique.len() != seeds.len() {
        return Err(Error::Config("seeds must be distinct".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    TimedOut,
    Failed(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub status: RunStatus,
    pub rows_written: usize,
    pub metrics_path: PathBuf,
    pub eval_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

fn provenance_line(config: &RunConfig, seed: u64) -> String {
    format!("# variant={} seed={} scenario={}", config.variant, seed, config.scenario)
}

fn eval_csv_line(env_steps: usize, e: &EvalStats) -> String {
    format!(
        "{},{},{},{},{}",
        env_steps, e.mean_return, e.win_rate_or_deliveries, e.dead_enemies, e.episodes
    )
}

/// Runs one seed to completion (or its time budget), streaming one metrics
/// row per update so a failed run keeps everything logged before the
/// failure. With `resume`, continues from the directory's checkpoint and
/// appends to the existing CSVs; the resumed trajectory is bit-identical to
/// an uninterrupted run.
pub fn run_training(config: &RunConfig, seed: u64, out_dir: &Path, resume: bool) -> Result<RunOutcome> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let metrics_path = out_dir.join("metrics.csv");
    let eval_path = out_dir.join("eval.csv");
    let checkpoint_path = out_dir.join("checkpoint.json");

    let resuming = resume && checkpoint_path.exists();
    let mut trainer = if resuming {
        let t = Trainer::load_checkpoint(&checkpoint_path)?;
        if &t.config != config {
            return Err(Error::Config(
                "checkpoint was trained with a different configuration; \
                 pass the same config to resume"
                    .into(),
            ));
        }
        if t.seed != seed {
            return Err(Error::Config(format!(
                "checkpoint seed {} does not match requested seed {seed}",
                t.seed
            )));
        }
        t
    } else {
        Trainer::new(config.clone(), seed)?
    };

    let echo = serde_json::json!({ "seed": seed, "config": config });
    fs::write(out_dir.join("config.json"), serde_json::to_string_pretty(&echo)?)?;

    let (mut metrics, mut evals) = if resuming {
        (
            File::options().append(true).open(&metrics_path)?,
            File::options().append(true).open(&eval_path)?,
        )
    } else {
        let mut m = File::create(&metrics_path)?;
        writeln!(m, "{}", provenance_line(config, seed))?;
        writeln!(m, "{}", MetricsRow::CSV_HEADER)?;
        let mut e = File::create(&eval_path)?;
        writeln!(e, "{}", provenance_line(config, seed))?;
        writeln!(e, "{}", EVAL_CSV_HEADER)?;
        (m, e)
    };

    let mut rows_written = 0;
    let mut status = RunStatus::Completed;
    while !trainer.finished_training() {
        let row = trainer.run_update()?;
        writeln!(metrics, "{}", row.csv_line())?;
        rows_written += 1;
        if trainer.updates % config.eval_interval == 0 {
            let stats = trainer.evaluate()?;
            writeln!(evals, "{}", eval_csv_line(row.env_steps, &stats))?;
        }
        if let Some(limit) = config.time_limit_seconds {
            if trainer.wallclock() > limit && !trainer.finished_training() {
                status = RunStatus::TimedOut;
                break;
            }
        }
    }
    trainer.save_checkpoint(&checkpoint_path)?;

    Ok(RunOutcome {
        seed,
        status,
        rows_written,
        metrics_path,
        eval_path,
        checkpoint_path,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub status: RunStatus,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub out_root: PathBuf,
    pub survivors: usize,
    pub warning: bool,
    pub seeds: Vec<SeedReport>,
    pub summary_path: PathBuf,
    pub eval_summary_path: PathBuf,
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.is_empty() || line.chars().next().map(|c| c.is_alphabetic()).unwrap_or(false) {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| Error::Serde(format!("{}: bad CSV row: {e}", path.display())))?);
    }
    Ok(rows)
}

/// Writes `<out>` with columns: the shared first column of `tables`, then a
/// population mean and standard deviation per remaining column, aligned row
/// by row across seeds and truncated to the shortest run.
fn write_summary(tables: &[Vec<Vec<f64>>], columns: &[&str], out: &Path) -> Result<()> {
    let mut file = File::create(out)?;
    let mut header = vec![columns[0].to_string()];
    for c in &columns[1..] {
        header.push(format!("{c}_mean"));
        header.push(format!("{c}_std"));
    }
    writeln!(file, "{}", header.join(","))?;

    let n_rows = tables.iter().map(|t| t.len()).min().unwrap_or(0);
    let n = tables.len() as f64;
    for r in 0..n_rows {
        let mut fields = vec![format!("{}", tables[0][r][0])];
        for c in 1..columns.len() {
            let mean = tables.iter().map(|t| t[r][c]).sum::<f64>() / n;
            let var = tables.iter().map(|t| (t[r][c] - mean).powi(2)).sum::<f64>() / n;
            fields.push(format!("{mean}"));
            fields.push(format!("{}", var.sqrt()));
        }
        writeln!(file, "{}", fields.join(","))?;
    }
    Ok(())
}

/// One independent training run per seed (parallel workers, each owning its
/// full state), then cross-seed mean/std summaries over the survivors.
pub fn run_sweep(config: &RunConfig, seeds: &[u64], out_root: &Path) -> Result<SweepReport> {
    config.validate()?;
    ensure_distinct(seeds)?;
    if seeds.is_empty() {
        return Err(Error::Config("a sweep needs at least one seed".into()));
    }
    fs::create_dir_all(out_root)?;

    let results: Vec<(u64, Result<RunOutcome>)> = seeds
        .par_iter()
        .map(|&seed| {
            let dir = out_root.join(format!("seed_{seed}"));
            (seed, run_training(config, seed, &dir, false))
        })
        .collect();

    let mut reports = Vec::new();
    let mut survivor_dirs = Vec::new();
    for (seed, res) in results {
        let dir = out_root.join(format!("seed_{seed}"));
        let status = match res {
            Ok(outcome) => {
                if outcome.status == RunStatus::Completed {
                    survivor_dirs.push(dir.clone());
                }
                outcome.status
            }
            Err(e) => RunStatus::Failed(e.to_string()),
        };
        reports.push(SeedReport { seed, status, dir });
    }

    let survivors = survivor_dirs.len();
    if survivors == 0 {
        return Err(Error::Numeric("every seed in the sweep failed".into()));
    }

    let summary_path = out_root.join("summary.csv");
    let metric_tables: Vec<Vec<Vec<f64>>> = survivor_dirs
        .iter()
        .map(|d| read_csv_rows(&d.join("metrics.csv")))
        .collect::<Result<_>>()?;
    let metric_cols: Vec<&str> = MetricsRow::CSV_HEADER.split(',').collect();
    write_summary(&metric_tables, &metric_cols, &summary_path)?;

    let eval_summary_path = out_root.join("eval_summary.csv");
    let eval_tables: Vec<Vec<Vec<f64>>> = survivor_dirs
        .iter()
        .map(|d| read_csv_rows(&d.join("eval.csv")))
        .collect::<Result<_>>()?;
    let eval_cols: Vec<&str> = EVAL_CSV_HEADER.split(',').collect();
    write_summary(&eval_tables, &eval_cols, &eval_summary_path)?;

    let warning = reports.iter().any(|r| r.status != RunStatus::Completed);
    let report = SweepReport {
        out_root: out_root.to_path_buf(),
        survivors,
        warning,
        seeds: reports,
        summary_path,
        eval_summary_path,
    };
    fs::write(out_root.join("sweep_report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Loads a checkpoint and reruns greedy evaluation with the requested
/// episode count.
pub fn evaluate_checkpoint(path: &Path, episodes: usize) -> Result<EvalStats> {
    if episodes == 0 {
        return Err(Error::Config("episodes must be positive".into()));
    }
    let mut trainer = Trainer::load_checkpoint(path)?;
    trainer.config.eval_episodes = episodes;
    trainer.evaluate()
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub trials: usize,
    /// Explicit layer widths (input first); `None` draws random shapes.
    pub widths: Option<Vec<usize>>,
    pub sign_inputs: usize,
    pub counterexample_budget: usize,
    pub tolerance: f64,
    /// Negative control: differentiate through the sigma estimate instead of
    /// freezing it. The scaling law then fails and the command exits nonzero.
    pub skip_stop_gradient: bool,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            trials: 50,
            widths: None,
            sign_inputs: 1000,
            counterexample_budget: 10_000,
            tolerance: 1e-6,
            skip_stop_gradient: false,
            seed: 0,
            out: PathBuf::from("analysis_report.csv"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSummary {
    pub trials: usize,
    pub tolerance: f64,
    pub worst_gradient_deviation: f64,
    pub worst_output_error: f64,
    pub sign_inputs_checked: usize,
    pub sign_mismatches: usize,
    pub counterexample_found: bool,
    pub counterexample_samples: Option<usize>,
    pub report_path: PathBuf,
}

const ANALYSIS_CSV_HEADER: &str = "trial,layer,rows,cols,normalized,divisor,\
predicted_ratio,observed_ratio,max_rel_deviation,output_rel_error,sign_match";

/// Runs the scaling-law, sign-preservation, and biased-counterexample
/// suites; writes a per-layer CSV report; errors with an analysis violation
/// when any law check fails (after the report is on disk).
pub fn analyze_gradients(opts: &AnalyzeOptions) -> Result<AnalysisSummary> {
    if opts.trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    if let Some(widths) = &opts.widths {
        if widths.len() < 3 {
            return Err(Error::Config(
                "layer widths need an input, at least one hidden, and an output entry".into(),
            ));
        }
        if widths.iter().any(|w| *w == 0 || *w > 512) {
            return Err(Error::Config("layer widths must lie in 1..=512".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut file = File::create(&opts.out)?;
    writeln!(file, "{ANALYSIS_CSV_HEADER}")?;

    let mut worst_dev: f64 = 0.0;
    let mut worst_out: f64 = 0.0;
    let mut sign_checked = 0;
    let mut sign_bad = 0;

    for trial in 0..opts.trials {
        let dims: Vec<usize> = match &opts.widths {
            Some(w) => w.clone(),
            None => {
                let depth = rng.gen_range(2..=4usize);
                let mut d: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=32)).collect();
                d[depth] = rng.gen_range(1..=8);
                d
            }
        };
        let normalized: Vec<bool> = (1..dims.len()).map(|_| rng.gen_bool(0.7)).collect();
        let net = BiasFreeMlp::random(&mut rng, &dims, normalized)?;
        let x = kink_safe_input(&net, &mut rng, 1e-6, 1000)?;
        let c: Vec<f64> = (0..net.out_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let report = if opts.skip_stop_gradient {
            gradient_scaling_check_through_sigma(&net, &x, &c)?
        } else {
            gradient_scaling_check(&net, &x, &c)?
        };
        worst_dev = worst_dev.max(report.max_rel_deviation);
        worst_out = worst_out.max(report.output_rel_error);

        for (layer, ratio) in report.layer_ratios.iter().enumerate() {
            writeln!(
                file,
                "{trial},{layer},{},{},{},{},{},{ratio},{},{},{}",
                net.weights[layer].rows,
                net.weights[layer].cols,
                net.normalized[layer],
                net.divisors[layer],
                report.predicted_ratio,
                report.max_rel_deviation,
                report.output_rel_error,
                report.sign_match
            )?;
        }

        let inputs: Vec<Vec<f64>> = (0..opts.sign_inputs)
            .map(|_| (0..net.in_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let checks = sign_preservation_check(&net, &inputs);
        sign_checked += checks.len();
        sign_bad += checks.iter().filter(|ok| !**ok).count();
    }

    let counterexample =
        bias_counterexample_search(&[2, 3, 2], &mut rng, opts.counterexample_budget, 1.0)?;

    let summary = AnalysisSummary {
        trials: opts.trials,
        tolerance: opts.tolerance,
        worst_gradient_deviation: worst_dev,
        worst_output_error: worst_out,
        sign_inputs_checked: sign_checked,
        sign_mismatches: sign_bad,
        counterexample_found: counterexample.is_some(),
        counterexample_samples: counterexample.as_ref().map(|c| c.samples_used),
        report_path: opts.out.clone(),
    };

    if worst_dev > opts.tolerance {
        return Err(Error::AnalysisViolation(format!(
            "gradient scaling deviated by {worst_dev:.3e} (tolerance {:.1e}); report: {}",
            opts.tolerance,
            opts.out.display()
        )));
    }
    if worst_out > 1e-10 {
        return Err(Error::AnalysisViolation(format!(
            "output scaling deviated by {worst_out:.3e} (tolerance 1e-10)"
        )));
    }
    if sign_bad > 0 {
        return Err(Error::AnalysisViolation(format!(
            "{sign_bad} of {sign_checked} bias-free inputs changed sign pattern"
        )));
    }
    if counterexample.is_none() {
        return Err(Error::AnalysisViolation(format!(
            "no biased sign-flip counterexample within {} samples",
            opts.counterexample_budget
        )));
    }
    Ok(summary)
}

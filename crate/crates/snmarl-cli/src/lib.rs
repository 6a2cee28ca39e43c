//! Library surface of the experiment harness, kept separate from the binary
//! so integration tests can drive runs in-process.

pub mod runner;

pub use runner::{
    analyze_gradients, ensure_distinct, evaluate_checkpoint, load_harness_config, run_sweep,
    run_training, AnalysisSummary, AnalyzeOptions, RunOutcome, RunStatus, SeedReport, SweepReport,
    EVAL_CSV_HEADER,
};

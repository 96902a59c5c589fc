//! Experiment execution and output.
//!
//! [`run_experiment`] loads nothing itself: it takes a parsed
//! [`ExperimentConfig`], runs every repetition (in parallel, each with its
//! own seed derived from the master seed and run index) and writes the
//! result files into the output directory:
//!
//! | experiment | files |
//! |---|---|
//! | sonar, pendulum | `curves.csv`, `runs.csv`, `plot_curves.py` |
//! | gradcheck | `gradcheck.csv`, `gradcheck_runs.csv`, `decomposition.csv` |
//!
//! plus `run.json` with the config hash, seed, warnings and wall-clock
//! time. Only `run.json` varies between identical invocations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

pub mod config;
pub mod gradcheck;
pub mod output;
pub mod pendulum;
pub mod sonar;

pub use config::{
    ExperimentConfig, ExperimentKind, GradcheckSection, PendulumSection, SonarSection,
};
pub use gradcheck::{emit_gradcheck, run_gradcheck, GradcheckOutcome};
pub use output::{emit_curves, fmt_f64, CurveSet};
pub use pendulum::run_pendulum;
pub use sonar::run_sonar;

use crate::env::{OBSERVATION_OFFSET, OBSERVATION_SCALE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub out: Option<PathBuf>,
    pub log_raw: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub warnings: Vec<String>,
    pub curves: Option<CurveSet>,
    pub gradcheck: Option<GradcheckOutcome>,
}

/// Applies command-line overrides and validates the result.
pub fn apply_overrides(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentConfig> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = opts.runs {
        cfg.runs = runs;
    }
    if let Some(out) = &opts.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let cfg = apply_overrides(cfg, opts)?;
    let out_dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("out/{:?}", cfg.experiment).to_lowercase()));
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let raw_dir = opts.log_raw.then(|| out_dir.join("raw"));
    let hash = cfg.hash();
    let warnings = cfg.warnings();
    let started = Instant::now();

    let mut extra = json!({});
    let mut curves = None;
    let mut grad = None;
    match cfg.experiment {
        ExperimentKind::Sonar => {
            let outcome = run_sonar(&cfg, raw_dir.as_deref())?;
            emit_curves(&outcome.curves, &out_dir)?;
            extra = json!({ "dataset_sha256": outcome.dataset_checksum });
            curves = Some(outcome.curves);
        }
        ExperimentKind::Pendulum => {
            let c = run_pendulum(&cfg, raw_dir.as_deref())?;
            emit_curves(&c, &out_dir)?;
            extra = json!({
                "observation_offset": OBSERVATION_OFFSET,
                "observation_scale": OBSERVATION_SCALE,
            });
            curves = Some(c);
        }
        ExperimentKind::Gradcheck => {
            let section = cfg.gradcheck.as_ref().expect("validated");
            let g = run_gradcheck(section, cfg.seed)?;
            emit_gradcheck(&g, &out_dir)?;
            extra = json!({ "exact_gradient_norm": g.exact_gradient_norm });
            grad = Some(g);
        }
    }

    write_run_json(
        &out_dir,
        json!({
            "experiment": cfg.experiment,
            "config_hash": hash,
            "seed": cfg.seed,
            "runs": cfg.runs,
            "warnings": warnings,
            "wall_clock_seconds": started.elapsed().as_secs_f64(),
            "log_raw": opts.log_raw,
            "details": extra,
            "config": cfg,
        }),
    )?;
    Ok(RunSummary {
        out_dir,
        config_hash: hash,
        warnings,
        curves,
        gradcheck: grad,
    })
}

fn write_run_json(dir: &Path, value: serde_json::Value) -> Result<()> {
    let path = dir.join("run.json");
    let text = serde_json::to_string_pretty(&value).expect("json value serialises");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

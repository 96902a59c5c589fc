use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use olpomdp::runner::{
    run_experiment, ExperimentConfig, ExperimentKind, GradcheckSection, RunOptions,
};
use olpomdp::Error;

/// Online policy-gradient learning for networks of stochastic binary
/// neurons.
///
/// Exit status: 0 on success, 1 for configuration or data errors, 2 for
/// failures while running.
#[derive(Debug, Parser)]
#[command(name = "olpomdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        /// Also write per-step logs under `<out>/raw/`.
        #[arg(long)]
        log_raw: bool,
    },
    /// Compare trace-based gradient estimates with the exact gradient of a
    /// POMDP fixture.
    Gradcheck {
        fixture: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        betas: Vec<f64>,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out/gradcheck")]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        decomposition_steps: u64,
    },
    /// Check a config file and print its hash and any warnings.
    Validate { config: PathBuf },
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            runs,
            log_raw,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(
                &cfg,
                &RunOptions {
                    seed,
                    runs,
                    out,
                    log_raw,
                },
            )?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("config hash {}", summary.config_hash);
            println!("wrote {}", summary.out_dir.display());
        }
        Command::Gradcheck {
            fixture,
            betas,
            steps,
            seeds,
            seed,
            out,
            decomposition_steps,
        } => {
            let cfg = ExperimentConfig {
                schema_version: olpomdp::runner::config::SCHEMA_VERSION,
                experiment: ExperimentKind::Gradcheck,
                seed,
                runs: 1,
                output_dir: Some(out),
                mixing_time_hint: None,
                network: None,
                sonar: None,
                pendulum: None,
                gradcheck: Some(GradcheckSection {
                    fixture,
                    betas,
                    steps,
                    seeds,
                    decomposition_fixtures: Vec::new(),
                    decomposition_steps,
                    decomposition_beta: 0.9,
                    decomposition_gamma: 0.01,
                }),
            };
            cfg.validate()?;
            let summary = run_experiment(&cfg, &RunOptions::default())?;
            let g = summary.gradcheck.expect("gradcheck outcome");
            println!("beta,steps,mean_angle_deg,high_variance");
            for row in &g.rows {
                println!(
                    "{},{},{:.6},{}",
                    row.beta,
                    row.steps,
                    row.mean_angle(),
                    if row.high_variance {
                        "high-variance"
                    } else {
                        ""
                    }
                );
            }
            println!(
                "max decomposition discrepancy {:e}",
                g.max_decomposition_discrepancy()
            );
            println!("wrote {}", summary.out_dir.display());
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            for w in cfg.warnings() {
                eprintln!("warning: {w}");
            }
            println!("ok {:?} config hash {}", cfg.experiment, cfg.hash());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}

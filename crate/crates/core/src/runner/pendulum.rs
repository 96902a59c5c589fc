use std::path::Path;

use rayon::prelude::*;

use super::output::{fmt_f64, CsvWriter, CurveSet};
use super::ExperimentConfig;
use crate::env::{scale_observation, Environment, PendulumParams, PendulumTask};
use crate::error::{Error, Result};
use crate::network::{LayeredNetwork, NetworkConfig};
use crate::rng::{derive_seed, domain, stream};

pub const PENDULUM_METRICS: [&str; 4] =
    ["mean_time_to_fall", "falls", "censored", "average_reward"];

const RAW_HEADER: [&str; 12] = [
    "t", "x", "y", "vx", "vy", "thx", "thy", "wx", "wy", "fx_sign", "fy_sign", "reward",
];

/// Window statistics. The mean time to fall is the simulated length of
/// the window divided by the number of falls in it; a window without a
/// fall reports its own length and is marked censored.
pub fn window_row(falls: u64, steps: u64, dt: f64) -> Vec<f64> {
    let seconds = steps as f64 * dt;
    let (time, censored) = if falls == 0 {
        (seconds, 1.0)
    } else {
        (seconds / falls as f64, 0.0)
    };
    vec![time, falls as f64, censored, -(falls as f64) / steps as f64]
}

/// One continuing run: the pendulum is reset after every fall and learning
/// never pauses.
pub fn pendulum_run(
    net_config: &NetworkConfig,
    params: &PendulumParams,
    total_steps: u64,
    window_steps: u64,
    run_seed: u64,
    raw: Option<&Path>,
) -> Result<Vec<Vec<f64>>> {
    if net_config.layer_sizes.first() != Some(&8) || net_config.layer_sizes.last() != Some(&2) {
        return Err(Error::config(format!(
            "pendulum network needs 8 inputs and 2 outputs, got {:?}",
            net_config.layer_sizes
        )));
    }
    let mut cfg = net_config.clone();
    cfg.seed = run_seed;
    let mut net = LayeredNetwork::new(cfg)?;
    let mut spikes = net.spike_rng();
    let mut env_rng = stream(run_seed, &[domain::ENVIRONMENT]);
    let mut task = PendulumTask::new(params.clone())?;
    task.reset(&mut env_rng);
    let mut log = raw.map(|p| CsvWriter::create(p, &RAW_HEADER)).transpose()?;

    let windows = total_steps / window_steps;
    let mut rows = Vec::with_capacity(windows as usize);
    let mut t = 0u64;
    for _ in 0..windows {
        let mut falls = 0;
        for _ in 0..window_steps {
            net.step(&scale_observation(task.state()), &mut spikes)?;
            let out = net.outputs();
            task.act(&[out[0] > 0.0, out[1] > 0.0])?;
            let r = task.reward();
            net.learn(r)?;
            t += 1;
            if let Some(w) = log.as_mut() {
                let s = task.state();
                let [fx, fy] = task.last_signs();
                let mut fields = vec![t.to_string()];
                fields.extend(
                    [
                        s.x, s.y, s.vx, s.vy, s.theta_x, s.theta_y, s.omega_x, s.omega_y,
                    ]
                    .map(fmt_f64),
                );
                fields.extend([fx, fy].map(|v| format!("{v}")));
                fields.push(fmt_f64(r));
                w.row(fields)?;
            }
            if task.done() {
                falls += 1;
                task.reset(&mut env_rng);
            }
        }
        rows.push(window_row(falls, window_steps, params.dt));
    }
    if let Some(w) = log {
        w.finish()?;
    }
    Ok(rows)
}

pub fn run_pendulum(cfg: &ExperimentConfig, raw_dir: Option<&Path>) -> Result<CurveSet> {
    let section = cfg
        .pendulum
        .as_ref()
        .ok_or_else(|| Error::config("missing [pendulum] section"))?;
    let net = cfg
        .network
        .as_ref()
        .ok_or_else(|| Error::config("missing [network] section"))?;
    if let Some(dir) = raw_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let runs = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let raw = raw_dir.map(|d| d.join(format!("pendulum_run{r}.csv")));
            pendulum_run(
                net,
                &section.params,
                section.total_steps,
                section.window_steps,
                derive_seed(cfg.seed, &[domain::RUN, r as u64]),
                raw.as_deref(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let windows = section.total_steps / section.window_steps;
    Ok(CurveSet {
        index_name: "window_end_step".into(),
        index: (1..=windows).map(|w| w * section.window_steps).collect(),
        metrics: PENDULUM_METRICS.iter().map(|s| s.to_string()).collect(),
        runs,
    })
}

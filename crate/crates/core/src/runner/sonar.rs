use std::path::Path;

use rayon::prelude::*;

use super::output::{fmt_f64, CsvWriter, CurveSet};
use super::ExperimentConfig;
use crate::env::sonar::split_indices;
use crate::env::{checksum, parse_sonar, Environment, Label, SonarDataset, SonarTask};
use crate::error::{Error, Result};
use crate::network::{LayeredNetwork, NetworkConfig};
use crate::rng::{derive_seed, domain, stream, SpikeRng};

pub const SONAR_METRICS: [&str; 5] = [
    "train_error",
    "test_error",
    "train_step_error",
    "test_step_error",
    "train_reward",
];

const RAW_HEADER: [&str; 8] = [
    "phase", "epoch", "step", "pattern", "label", "fired", "reward", "scored",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Fraction of patterns whose majority vote over the evaluation window
    /// disagrees with the label; ties count as errors.
    pub error: f64,
    /// Fraction of individual window steps with the wrong output.
    pub step_error: f64,
}

/// Majority vote over a window: `Some(label)` or `None` on a tie.
pub fn majority_vote(fires: usize, window: usize) -> Option<Label> {
    match (2 * fires).cmp(&window) {
        std::cmp::Ordering::Greater => Some(Label::Metal),
        std::cmp::Ordering::Less => Some(Label::Rock),
        std::cmp::Ordering::Equal => None,
    }
}

/// Presents every pattern of `data` in row order for `hold` steps to a
/// frozen copy of `net`. Only the outputs from step `latency` of each
/// presentation onward vote, since earlier outputs still reflect the
/// previous input.
pub fn evaluate(
    net: &LayeredNetwork,
    data: &SonarDataset,
    rows: &[usize],
    hold: usize,
    seed: u64,
    mut log: Option<(&mut CsvWriter, &str, usize)>,
) -> Result<Evaluation> {
    let mut net = net.clone();
    let mut spikes = SpikeRng::new(seed, net.config().neuron_count());
    let latency = net.config().latency();
    let window = hold - latency;
    let mut wrong_patterns = 0;
    let mut wrong_steps = 0;
    for (i, (pattern, &label)) in data.patterns.iter().zip(&data.labels).enumerate() {
        let mut fires = 0;
        for k in 0..hold {
            net.step(pattern, &mut spikes)?;
            net.skip_learning();
            let fired = net.fired_outputs()[0];
            let scored = k >= latency;
            if scored {
                fires += usize::from(fired);
                wrong_steps += usize::from(Label::from_output(fired) != label);
            }
            if let Some((w, phase, epoch)) = log.as_mut() {
                let correct = scored && Label::from_output(fired) == label;
                w.row([
                    phase.to_string(),
                    epoch.to_string(),
                    (i * hold + k).to_string(),
                    rows[i].to_string(),
                    label.letter().to_string(),
                    u8::from(fired).to_string(),
                    u8::from(correct).to_string(),
                    u8::from(scored).to_string(),
                ])?;
            }
        }
        if majority_vote(fires, window) != Some(label) {
            wrong_patterns += 1;
        }
    }
    Ok(Evaluation {
        error: wrong_patterns as f64 / data.len() as f64,
        step_error: wrong_steps as f64 / (data.len() * window) as f64,
    })
}

/// One independent run: split, initialise, then alternate training epochs
/// with frozen evaluations. Row `e` holds the evaluation after `e` epochs;
/// its `train_reward` is the average reward collected during epoch `e`
/// (0 for the initial row).
pub fn sonar_run(
    data: &SonarDataset,
    net_config: &NetworkConfig,
    hold: usize,
    epochs: usize,
    split_fraction: f64,
    run_seed: u64,
    raw: Option<&Path>,
) -> Result<Vec<Vec<f64>>> {
    let (train_rows, test_rows) = split_indices(
        data.len(),
        split_fraction,
        &mut stream(run_seed, &[domain::SPLIT]),
    )?;
    let train = data.subset(&train_rows);
    let test = data.subset(&test_rows);
    let mut cfg = net_config.clone();
    cfg.seed = run_seed;
    let mut net = LayeredNetwork::new(cfg)?;
    let mut spikes = net.spike_rng();
    let mut order_rng = stream(run_seed, &[domain::EPOCH_ORDER]);
    let mut task = SonarTask::new(train.clone(), hold, net.config().latency())?;
    let mut log = raw.map(|p| CsvWriter::create(p, &RAW_HEADER)).transpose()?;

    let eval_seed =
        |epoch: usize, set: u64| derive_seed(run_seed, &[domain::EVALUATION, epoch as u64, set]);
    let mut rows = Vec::with_capacity(epochs + 1);
    let mut train_reward = 0.0;
    for epoch in 0..=epochs {
        if epoch > 0 {
            task.reset(&mut order_rng);
            let mut total = 0.0;
            let mut step = 0usize;
            while !task.done() {
                let obs = task.observe();
                let pattern = train_rows[task.current_index()];
                net.step(&obs, &mut spikes)?;
                let fired = net.fired_outputs();
                task.act(&fired)?;
                let r = task.reward();
                net.learn(r)?;
                total += r;
                if let Some(w) = log.as_mut() {
                    w.row([
                        "train".to_string(),
                        epoch.to_string(),
                        step.to_string(),
                        pattern.to_string(),
                        task.scored_label()
                            .map_or("-".into(), |l| l.letter().to_string()),
                        u8::from(fired[0]).to_string(),
                        fmt_f64(r),
                        u8::from(task.scored_label().is_some()).to_string(),
                    ])?;
                }
                step += 1;
            }
            train_reward = total / task.steps_per_epoch() as f64;
        }
        let on_train = evaluate(
            &net,
            &train,
            &train_rows,
            hold,
            eval_seed(epoch, 0),
            log.as_mut().map(|w| (w, "eval_train", epoch)),
        )?;
        let on_test = evaluate(
            &net,
            &test,
            &test_rows,
            hold,
            eval_seed(epoch, 1),
            log.as_mut().map(|w| (w, "eval_test", epoch)),
        )?;
        rows.push(vec![
            on_train.error,
            on_test.error,
            on_train.step_error,
            on_test.step_error,
            train_reward,
        ]);
    }
    if let Some(w) = log {
        w.finish()?;
    }
    Ok(rows)
}

pub struct SonarOutcome {
    pub curves: CurveSet,
    pub dataset_checksum: String,
}

pub fn run_sonar(cfg: &ExperimentConfig, raw_dir: Option<&Path>) -> Result<SonarOutcome> {
    let section = cfg
        .sonar
        .as_ref()
        .ok_or_else(|| Error::config("missing [sonar] section"))?;
    let net = cfg
        .network
        .as_ref()
        .ok_or_else(|| Error::config("missing [network] section"))?;
    let data = parse_sonar(&section.data)?;
    let before = checksum(&data);
    if let Some(dir) = raw_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let runs: Vec<Vec<Vec<f64>>> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let raw = raw_dir.map(|d| d.join(format!("sonar_run{r}.csv")));
            sonar_run(
                &data,
                net,
                section.hold_steps,
                section.epochs,
                section.split_fraction,
                derive_seed(cfg.seed, &[domain::RUN, r as u64]),
                raw.as_deref(),
            )
        })
        .collect::<Result<_>>()?;
    let after = checksum(&data);
    if before != after {
        return Err(Error::contract("sonar data changed during training"));
    }
    Ok(SonarOutcome {
        curves: CurveSet {
            index_name: "epoch".into(),
            index: (0..=section.epochs as u64).collect(),
            metrics: SONAR_METRICS.iter().map(|s| s.to_string()).collect(),
            runs,
        },
        dataset_checksum: before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::SONAR_FEATURES;

    fn toy() -> SonarDataset {
        // Metal patterns are bright in the first half, rocks in the second.
        let n = 40;
        SonarDataset {
            patterns: (0..n)
                .map(|i| {
                    (0..SONAR_FEATURES)
                        .map(|j| if (j < 30) == (i % 2 == 1) { 0.9 } else { 0.1 })
                        .collect()
                })
                .collect(),
            labels: (0..n)
                .map(|i| {
                    if i % 2 == 1 {
                        Label::Metal
                    } else {
                        Label::Rock
                    }
                })
                .collect(),
        }
    }

    fn net(gamma: f64) -> NetworkConfig {
        NetworkConfig {
            layer_sizes: vec![SONAR_FEATURES, 4, 1],
            beta: 0.5,
            gamma,
            weight_init_halfwidth: 0.1,
            representation: Default::default(),
            seed: 0,
            bias: false,
        }
    }

    #[test]
    fn majority_ties_are_undecided() {
        assert_eq!(majority_vote(3, 5), Some(Label::Metal));
        assert_eq!(majority_vote(2, 5), Some(Label::Rock));
        assert_eq!(majority_vote(2, 4), None);
    }

    #[test]
    fn frozen_network_curves_stay_flat() {
        let rows = sonar_run(&toy(), &net(0.0), 20, 3, 0.25, 11, None).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows[1..] {
            // With γ = 0 only the spike noise differs between evaluations.
            assert!((r[2] - rows[0][2]).abs() < 0.05, "{rows:?}");
        }
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let rows = sonar_run(&toy(), &net(0.05), 20, 15, 0.25, 12, None).unwrap();
        let last = rows.last().unwrap();
        assert!(last[0] <= 0.1, "{rows:?}");
        assert!(last[4] > rows[1][4], "{rows:?}");
    }

    #[test]
    fn runs_are_reproducible_and_log_raw_steps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        let a = sonar_run(&toy(), &net(0.01), 10, 2, 0.25, 13, Some(&path)).unwrap();
        let b = sonar_run(&toy(), &net(0.01), 10, 2, 0.25, 13, None).unwrap();
        assert_eq!(a, b);
        let text = std::fs::read_to_string(&path).unwrap();
        let mut train_steps = 0;
        let mut reward = 0.0;
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f[0] == "train" && f[1] == "2" {
                train_steps += 1;
                reward += f[6].parse::<f64>().unwrap();
            }
        }
        assert_eq!(train_steps, 30 * 10);
        assert_eq!(reward / 300.0, a[2][4]);
    }
}

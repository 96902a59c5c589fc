//! Layered networks of stochastic binary neurons and the online learner.
//!
//! Every non-input layer reads the activities its presynaptic layer had on
//! the *previous* step, so an input set on step `t` reaches the last layer
//! on step `t + L`, where `L` is the number of non-input layers.
//!
//! One learning step is:
//!
//! 1. [`LayeredNetwork::step`] samples every neuron's activity for step `t`;
//! 2. the caller observes the reward that follows;
//! 3. [`LayeredNetwork::learn`] decays each trace by β, adds the score of
//!    the step-`t` activity (using the potential computed before sampling),
//!    then moves each weight by `γ · r · z`.
//!
//! Updates touch only a neuron's own synapses, activity and potential.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::{NeuronUnit, Representation};
use crate::rng::{domain, stream, SpikeRng};

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Unit counts per layer; the first entry is the number of inputs.
    pub layer_sizes: Vec<usize>,
    pub beta: f64,
    pub gamma: f64,
    pub weight_init_halfwidth: f64,
    #[serde(default)]
    pub representation: Representation,
    #[serde(default)]
    pub seed: u64,
    /// Adds a synapse from a constant input of 1.0 to every neuron.
    #[serde(default)]
    pub bias: bool,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config(
                "layer_sizes needs an input layer and at least one non-input layer",
            ));
        }
        if let Some(k) = self.layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::config(format!("layer {k} has no units")));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::config(format!(
                "beta must lie in [0, 1), got {}",
                self.beta
            )));
        }
        // γ = 0 freezes learning; used for control runs and evaluation.
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config(format!(
                "gamma must be a finite non-negative number, got {}",
                self.gamma
            )));
        }
        if !(self.weight_init_halfwidth >= 0.0 && self.weight_init_halfwidth.is_finite()) {
            return Err(Error::config(format!(
                "weight_init_halfwidth must be finite and non-negative, got {}",
                self.weight_init_halfwidth
            )));
        }
        Ok(())
    }

    /// Steps from an input change to the first affected output.
    pub fn latency(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn neuron_count(&self) -> usize {
        self.layer_sizes[1..].iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredNetwork {
    config: NetworkConfig,
    /// Non-input layers; `layers[k]` is fed by `buffers[k]`.
    layers: Vec<Vec<NeuronUnit>>,
    /// `buffers[0]` holds the inputs, `buffers[k]` the activities of
    /// `layers[k - 1]`, all as of the previous step.
    buffers: Vec<Vec<f64>>,
    step_counter: u64,
    awaiting_reward: bool,
}

pub fn init_network(config: &NetworkConfig) -> Result<LayeredNetwork> {
    LayeredNetwork::new(config.clone())
}

impl LayeredNetwork {
    /// Weights are i.i.d. uniform on the open interval
    /// `(−halfwidth, +halfwidth)`, traces start at zero and every buffer
    /// holds the rest value.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(config.seed, &[domain::WEIGHT_INIT]);
        let h = config.weight_init_halfwidth;
        let repr = config.representation;
        let extra = usize::from(config.bias);
        let layers = config
            .layer_sizes
            .windows(2)
            .map(|pair| {
                let fan_in = pair[0] + extra;
                (0..pair[1])
                    .map(|_| {
                        let weights = (0..fan_in)
                            .map(|_| {
                                let u: f64 = rng.sample(rand::distributions::Open01);
                                h * (2.0 * u - 1.0)
                            })
                            .collect();
                        NeuronUnit::new(weights, repr)
                    })
                    .collect()
            })
            .collect();
        let buffers = config
            .layer_sizes
            .iter()
            .map(|&n| vec![repr.rest_value(); n])
            .collect();
        Ok(LayeredNetwork {
            config,
            layers,
            buffers,
            step_counter: 0,
            awaiting_reward: false,
        })
    }

    pub(crate) fn from_parts(
        config: NetworkConfig,
        layers: Vec<Vec<NeuronUnit>>,
        buffers: Vec<Vec<f64>>,
        step_counter: u64,
        awaiting_reward: bool,
    ) -> Self {
        LayeredNetwork {
            config,
            layers,
            buffers,
            step_counter,
            awaiting_reward,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Vec<NeuronUnit>] {
        &self.layers
    }

    pub fn buffers(&self) -> &[Vec<f64>] {
        &self.buffers
    }

    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn awaiting_reward(&self) -> bool {
        self.awaiting_reward
    }

    pub fn outputs(&self) -> &[f64] {
        self.buffers.last().expect("validated: at least two layers")
    }

    pub fn fired_outputs(&self) -> Vec<bool> {
        self.layers
            .last()
            .expect("validated: at least one non-input layer")
            .iter()
            .map(NeuronUnit::fired)
            .collect()
    }

    /// A fresh spike source with one stream per neuron, seeded from the
    /// network seed.
    pub fn spike_rng(&self) -> SpikeRng {
        SpikeRng::new(self.config.seed, self.config.neuron_count())
    }

    /// Advances the network one time step and returns the output-layer
    /// activities. Layers are processed from the top down so every layer
    /// reads its presynaptic buffer before that buffer is overwritten.
    pub fn step(&mut self, inputs: &[f64], rng: &mut SpikeRng) -> Result<&[f64]> {
        if inputs.len() != self.config.layer_sizes[0] {
            return Err(Error::config(format!(
                "expected {} inputs, got {}",
                self.config.layer_sizes[0],
                inputs.len()
            )));
        }
        if rng.len() != self.config.neuron_count() {
            return Err(Error::config(format!(
                "spike source has {} streams for {} neurons",
                rng.len(),
                self.config.neuron_count()
            )));
        }
        let repr = self.config.representation;
        let mut offset = self.config.neuron_count();
        for k in (0..self.layers.len()).rev() {
            offset -= self.layers[k].len();
            let (below, above) = self.buffers.split_at_mut(k + 1);
            let presyn = &below[k];
            let out = &mut above[0];
            for (i, neuron) in self.layers[k].iter_mut().enumerate() {
                neuron.integrate(presyn);
                let fired = neuron.spike(rng.neuron(offset + i));
                out[i] = repr.activity(fired);
            }
        }
        self.buffers[0].copy_from_slice(inputs);
        self.step_counter += 1;
        self.awaiting_reward = true;
        Ok(self.outputs())
    }

    /// Applies the reward that followed the last [`step`](Self::step).
    pub fn learn(&mut self, reward: f64) -> Result<()> {
        if !self.awaiting_reward {
            return Err(Error::contract(
                "learn called without a preceding step (exactly one learn per step)",
            ));
        }
        let beta = self.config.beta;
        let step = self.config.gamma * reward;
        for neuron in self.layers.iter_mut().flatten() {
            neuron.update_traces(beta);
            neuron.apply_reward(step);
        }
        self.awaiting_reward = false;
        Ok(())
    }

    /// Marks the last step as consumed without touching traces or weights.
    /// Used for frozen evaluation passes.
    pub fn skip_learning(&mut self) {
        self.awaiting_reward = false;
    }

    /// Sets the step size; `0.0` freezes the weights.
    pub fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        let mut cfg = self.config.clone();
        cfg.gamma = gamma;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    /// Overwrites one synaptic weight; layer index counts non-input layers
    /// from zero.
    pub fn set_weight(&mut self, layer: usize, neuron: usize, synapse: usize, weight: f64) {
        let unit = &mut self.layers[layer][neuron];
        let mut synapses = unit.synapses().to_vec();
        synapses[synapse].weight = weight;
        *unit = NeuronUnit::from_parts(
            synapses,
            unit.prev_presyn().to_vec(),
            unit.potential(),
            unit.fired(),
            unit.representation(),
        );
    }

    pub fn all_weights(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|n| n.weights())
            .collect()
    }

    pub fn all_traces(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|n| n.traces())
            .collect()
    }
}

/// Finite-horizon estimate of the average reward.
pub fn average_reward(rewards: &[f64]) -> Result<f64> {
    if rewards.is_empty() {
        return Err(Error::config("average reward of an empty sequence"));
    }
    Ok(rewards.iter().sum::<f64>() / rewards.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::sigmoid;

    fn config(layer_sizes: Vec<usize>) -> NetworkConfig {
        NetworkConfig {
            layer_sizes,
            beta: 0.9,
            gamma: 0.01,
            weight_init_halfwidth: 0.1,
            representation: Representation::SymmetricPm1,
            seed: 17,
            bias: false,
        }
    }

    #[test]
    fn config_validation() {
        let ok = config(vec![3, 2]);
        assert!(ok.validate().is_ok());
        for bad in [
            NetworkConfig {
                layer_sizes: vec![3],
                ..ok.clone()
            },
            NetworkConfig {
                layer_sizes: vec![3, 0],
                ..ok.clone()
            },
            NetworkConfig {
                beta: 1.0,
                ..ok.clone()
            },
            NetworkConfig {
                beta: -0.1,
                ..ok.clone()
            },
            NetworkConfig {
                gamma: -1.0,
                ..ok.clone()
            },
            NetworkConfig {
                gamma: f64::NAN,
                ..ok.clone()
            },
            NetworkConfig {
                weight_init_halfwidth: -0.1,
                ..ok.clone()
            },
        ] {
            assert!(matches!(LayeredNetwork::new(bad), Err(Error::Config(_))));
        }
    }

    #[test]
    fn init_weights_lie_in_open_interval() {
        let net = LayeredNetwork::new(config(vec![100, 10])).unwrap();
        let w = net.all_weights();
        assert_eq!(w.len(), 1000);
        assert!(w.iter().all(|x| x.abs() < 0.1));
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!(net.all_traces().iter().all(|&z| z == 0.0));
        assert!(net.buffers().iter().flatten().all(|&u| u == -1.0));
        assert_eq!(net.step_counter(), 0);
    }

    #[test]
    fn zero_halfwidth_gives_zero_weights() {
        let cfg = NetworkConfig {
            weight_init_halfwidth: 0.0,
            ..config(vec![5, 3, 2])
        };
        let net = LayeredNetwork::new(cfg).unwrap();
        assert!(net.all_weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn same_seed_same_weights() {
        let a = LayeredNetwork::new(config(vec![6, 4, 2])).unwrap();
        let b = LayeredNetwork::new(config(vec![6, 4, 2])).unwrap();
        assert_eq!(a.all_weights(), b.all_weights());
        let c = LayeredNetwork::new(NetworkConfig {
            seed: 18,
            ..config(vec![6, 4, 2])
        })
        .unwrap();
        assert_ne!(a.all_weights(), c.all_weights());
    }

    #[test]
    fn bias_adds_one_synapse_per_neuron() {
        let cfg = NetworkConfig {
            bias: true,
            ..config(vec![4, 3, 1])
        };
        let mut net = LayeredNetwork::new(cfg).unwrap();
        assert_eq!(net.layers()[0][0].fan_in(), 5);
        assert_eq!(net.layers()[1][0].fan_in(), 4);
        let mut rng = net.spike_rng();
        net.step(&[0.1, 0.2, 0.3, 0.4], &mut rng).unwrap();
        assert_eq!(*net.layers()[0][0].prev_presyn().last().unwrap(), 1.0);
    }

    #[test]
    fn input_length_is_checked() {
        let mut net = LayeredNetwork::new(config(vec![3, 1])).unwrap();
        let mut rng = net.spike_rng();
        assert!(matches!(net.step(&[1.0], &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn zero_weights_fire_half_the_time() {
        let cfg = NetworkConfig {
            weight_init_halfwidth: 0.0,
            ..config(vec![3, 2, 1])
        };
        let mut net = LayeredNetwork::new(cfg).unwrap();
        let mut rng = net.spike_rng();
        let n = 10_000;
        let mut counts = vec![0usize; 3];
        for t in 0..n {
            let x = t as f64 * 0.001;
            net.step(&[x, -x, 1.0], &mut rng).unwrap();
            for (c, unit) in counts.iter_mut().zip(net.layers().iter().flatten()) {
                *c += usize::from(unit.fired());
            }
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.5).abs() <= 0.02, "freq {f}");
        }
    }

    #[test]
    fn saturated_single_layer_fires_from_second_step() {
        let cfg = NetworkConfig {
            weight_init_halfwidth: 0.0,
            ..config(vec![1, 1])
        };
        let mut net = LayeredNetwork::new(cfg).unwrap();
        net.set_weight(0, 0, 0, 1e3);
        let mut rng = net.spike_rng();
        // Step 1 still sees the rest value −1 in the input buffer.
        let first = net.step(&[1.0], &mut rng).unwrap()[0];
        assert_eq!(first, -1.0);
        for _ in 0..100 {
            assert_eq!(net.step(&[1.0], &mut rng).unwrap()[0], 1.0);
        }
    }

    #[test]
    fn two_layer_latency_is_two_steps() {
        // Saturated 1-1-1 chain copying the input sign.
        let cfg = NetworkConfig {
            weight_init_halfwidth: 0.0,
            ..config(vec![1, 1, 1])
        };
        let mut net = LayeredNetwork::new(cfg).unwrap();
        net.set_weight(0, 0, 0, 1e3);
        net.set_weight(1, 0, 0, 1e3);
        let mut rng = net.spike_rng();
        let mut outs = Vec::new();
        for t in 1..=10 {
            let x = if t < 5 { -1.0 } else { 1.0 };
            outs.push(net.step(&[x], &mut rng).unwrap()[0]);
        }
        // Input flips at step 5; the output flips at step 7.
        assert_eq!(outs[..6], [-1.0; 6]);
        assert_eq!(outs[6..], [1.0; 4]);
    }

    #[test]
    fn learn_requires_preceding_step() {
        let mut net = LayeredNetwork::new(config(vec![2, 1])).unwrap();
        assert!(matches!(net.learn(1.0), Err(Error::Contract(_))));
        let mut rng = net.spike_rng();
        net.step(&[1.0, -1.0], &mut rng).unwrap();
        net.learn(1.0).unwrap();
        assert!(matches!(net.learn(1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_reward_never_moves_weights() {
        let mut net = LayeredNetwork::new(config(vec![3, 2, 1])).unwrap();
        let w0 = net.all_weights();
        let mut rng = net.spike_rng();
        for _ in 0..200 {
            net.step(&[0.5, -0.5, 1.0], &mut rng).unwrap();
            net.learn(0.0).unwrap();
        }
        assert_eq!(net.all_weights(), w0);
        assert!(net.all_traces().iter().any(|&z| z != 0.0));
    }

    #[test]
    fn zero_beta_trace_is_instantaneous_score() {
        let cfg = NetworkConfig {
            beta: 0.0,
            ..config(vec![3, 2])
        };
        let mut net = LayeredNetwork::new(cfg).unwrap();
        let mut rng = net.spike_rng();
        for _ in 0..20 {
            net.step(&[0.3, -1.0, 0.7], &mut rng).unwrap();
            let expected: Vec<f64> = net.layers()[0]
                .iter()
                .flat_map(|n| {
                    let s = f64::from(u8::from(n.fired())) - sigmoid(n.potential());
                    n.prev_presyn()
                        .iter()
                        .map(move |u| s * u)
                        .collect::<Vec<_>>()
                })
                .collect();
            net.learn(0.0).unwrap();
            assert_eq!(net.all_traces(), expected);
        }
    }

    #[test]
    fn weight_update_is_exactly_gamma_r_z() {
        let mut net = LayeredNetwork::new(config(vec![4, 3, 2])).unwrap();
        let mut rng = net.spike_rng();
        for t in 0..50 {
            net.step(&[0.1, 0.9, -0.4, 1.0], &mut rng).unwrap();
            let before = net.all_weights();
            let r = if t % 3 == 0 { 1.0 } else { -0.25 };
            net.learn(r).unwrap();
            let z = net.all_traces();
            let gamma = net.config().gamma;
            for ((w1, w0), z) in net.all_weights().iter().zip(&before).zip(&z) {
                assert_eq!(w1.to_bits(), (w0 + gamma * r * z).to_bits());
            }
        }
    }

    #[test]
    fn average_reward_examples() {
        assert_eq!(average_reward(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(average_reward(&[0.0, 1.0]).unwrap(), 0.5);
        assert!(average_reward(&[]).is_err());
    }
}

//! Seed derivation and per-neuron random streams.
//!
//! Every stochastic quantity in the crate is drawn from a ChaCha8 generator.
//! Seeds for sub-tasks (weight init, data split, epoch order, each run of a
//! batch) are derived from a master seed by walking a path of labels, so a
//! run's randomness never depends on how many draws another run made.
//! Spiking uses one ChaCha stream per neuron ([`SpikeRng`]), which keeps the
//! sampled activities identical whatever order the neurons are visited in.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Labels for the derivation path. The numeric values are part of the
/// reproducibility contract and must not be changed.
pub mod domain {
    pub const WEIGHT_INIT: u64 = 1;
    pub const SPIKES: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const EPOCH_ORDER: u64 = 4;
    pub const ENVIRONMENT: u64 = 5;
    pub const EVALUATION: u64 = 6;
    pub const RUN: u64 = 7;
    pub const ESTIMATOR: u64 = 8;
    pub const DECOMPOSITION: u64 = 9;
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |seed, &label| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(label);
        rng.next_u64()
    })
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Independent random streams, one per non-input neuron.
#[derive(Debug, Clone)]
pub struct SpikeRng {
    streams: Vec<ChaCha8Rng>,
}

impl SpikeRng {
    pub fn new(seed: u64, neurons: usize) -> Self {
        let key = derive_seed(seed, &[domain::SPIKES]);
        let streams = (0..neurons as u64)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(key);
                rng.set_stream(i);
                rng
            })
            .collect();
        SpikeRng { streams }
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn neuron(&mut self, index: usize) -> &mut ChaCha8Rng {
        &mut self.streams[index]
    }
}

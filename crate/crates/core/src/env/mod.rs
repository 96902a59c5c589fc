//! Environments driven by a network's binary outputs.

use rand::RngCore;

use crate::error::Result;

pub mod pendulum;
pub mod sonar;

pub use pendulum::{
    pendulum_reset, pendulum_reward, pendulum_step, scale_observation, PendulumParams,
    PendulumState, PendulumTask, OBSERVATION_OFFSET, OBSERVATION_SCALE,
};
pub use sonar::{
    checksum, parse_sonar, split_dataset, Label, SonarDataset, SonarTask, SONAR_FEATURES,
};

/// Common interface of the experiment environments.
///
/// Per step the driver reads [`observe`](Environment::observe), feeds the
/// network, passes the output firing pattern to
/// [`act`](Environment::act), and then reads
/// [`reward`](Environment::reward).
pub trait Environment {
    /// Length of every observation vector; constant per instance.
    fn observation_len(&self) -> usize;

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn observe(&self) -> Vec<f64>;

    fn act(&mut self, actions: &[bool]) -> Result<()>;

    /// Reward produced by the most recent `act`; 0 before any.
    fn reward(&self) -> f64;

    fn done(&self) -> bool;
}

//! Online policy-gradient learning for networks of stochastic binary
//! neurons.
//!
//! Each neuron is treated as an independent agent sharing one global
//! reward. Its synapses keep an eligibility trace
//! `z ← β z + (u − σ(v)) u_pre` and move by `γ · r · z`, which climbs the
//! gradient of the long-run average reward using only quantities local to
//! the synapse.
//!
//! - [`neuron`]: the stochastic binary unit and its score function.
//! - [`network`]: layered propagation with one-step delays, the learner and
//!   checkpoints.
//! - [`tabular`]: exact average reward and gradient for small finite
//!   POMDPs, the trace-based estimator, and the joint-versus-independent
//!   agent comparison.
//! - [`env`]: the sonar classification task and the inverted pendulum.
//! - [`runner`]: experiment configuration, execution and CSV output.

pub mod env;
pub mod error;
pub mod network;
pub mod neuron;
pub mod rng;
pub mod runner;
pub mod tabular;

pub use error::{Error, Result};
pub use network::{average_reward, init_network, LayeredNetwork, NetworkConfig};
pub use neuron::{compute_potential, fire, grad_log_ratio, sigmoid, Representation};

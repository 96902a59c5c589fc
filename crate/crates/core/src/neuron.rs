//! Stochastic binary neurons.
//!
//! A neuron sums its weighted presynaptic activities into a potential `v`
//! and fires with probability `σ(v)`. The per-synapse score
//! `∂/∂w_j log Pr(u | v)` is `(fired − σ(v)) · presyn_j` in both activity
//! representations: the {−1, +1} encoding is an affine relabelling of the
//! same two outcomes, so only the fire indicator enters the formula.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent arguments are clamped to this magnitude before `exp`.
pub const SIGMOID_CLAMP: f64 = 700.0;

/// How binary activities are encoded as reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Fire = 1, rest = 0.
    Asymmetric01,
    /// Fire = +1, rest = −1.
    #[default]
    SymmetricPm1,
}

impl Representation {
    pub fn fire_value(self) -> f64 {
        1.0
    }

    pub fn rest_value(self) -> f64 {
        match self {
            Representation::Asymmetric01 => 0.0,
            Representation::SymmetricPm1 => -1.0,
        }
    }

    pub fn activity(self, fired: bool) -> f64 {
        if fired {
            self.fire_value()
        } else {
            self.rest_value()
        }
    }

    /// Decodes an activity value; `None` if it is not one of the two
    /// values of this representation.
    pub fn decode(self, value: f64) -> Option<bool> {
        if value == self.fire_value() {
            Some(true)
        } else if value == self.rest_value() {
            Some(false)
        } else {
            None
        }
    }
}

/// A binary activity tagged with its encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityValue {
    pub value: f64,
    pub representation: Representation,
}

impl ActivityValue {
    pub fn new(fired: bool, representation: Representation) -> Self {
        ActivityValue {
            value: representation.activity(fired),
            representation,
        }
    }

    pub fn fired(&self) -> Option<bool> {
        self.representation.decode(self.value)
    }
}

/// Logistic squashing function. NaN propagates.
pub fn sigmoid(alpha: f64) -> f64 {
    let a = alpha.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-a).exp())
}

pub fn compute_potential(weights: &[f64], presyn: &[f64]) -> Result<f64> {
    if weights.len() != presyn.len() {
        return Err(Error::config(format!(
            "potential needs equal lengths, got {} weights and {} presynaptic activities",
            weights.len(),
            presyn.len()
        )));
    }
    Ok(dot(weights, presyn))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(w, u)| w * u).sum()
}

/// Samples a spike with probability `σ(potential)`, consuming exactly one
/// uniform draw from `rng`.
pub fn fire<R: Rng + ?Sized>(potential: f64, rng: &mut R) -> bool {
    let draw: f64 = rng.gen();
    draw < sigmoid(potential)
}

/// `∂/∂w_j log Pr(activity | potential)` for a synapse carrying `presyn_j`.
pub fn grad_log_ratio(
    activity: f64,
    potential: f64,
    presyn_j: f64,
    representation: Representation,
) -> Result<f64> {
    let fired = representation.decode(activity).ok_or_else(|| {
        Error::contract(format!(
            "activity {activity} is not a valid {representation:?} value"
        ))
    })?;
    Ok(score(fired, potential) * presyn_j)
}

#[inline]
fn score(fired: bool, potential: f64) -> f64 {
    let indicator = if fired { 1.0 } else { 0.0 };
    indicator - sigmoid(potential)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SynapticState {
    pub weight: f64,
    pub trace: f64,
}

/// One stochastic binary unit with its incoming synapses.
///
/// `prev_presyn` holds the presynaptic activities that produced the current
/// `potential`; the trace update pairs them with the sampled activity.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronUnit {
    synapses: Vec<SynapticState>,
    prev_presyn: Vec<f64>,
    potential: f64,
    /// `σ(potential)`, cached for sampling and the trace update.
    fire_prob: f64,
    fired: bool,
    representation: Representation,
}

impl NeuronUnit {
    pub fn new(weights: Vec<f64>, representation: Representation) -> Self {
        let n = weights.len();
        NeuronUnit {
            synapses: weights
                .into_iter()
                .map(|weight| SynapticState { weight, trace: 0.0 })
                .collect(),
            prev_presyn: vec![0.0; n],
            potential: 0.0,
            fire_prob: 0.5,
            fired: false,
            representation,
        }
    }

    pub(crate) fn from_parts(
        synapses: Vec<SynapticState>,
        prev_presyn: Vec<f64>,
        potential: f64,
        fired: bool,
        representation: Representation,
    ) -> Self {
        debug_assert_eq!(synapses.len(), prev_presyn.len());
        NeuronUnit {
            synapses,
            prev_presyn,
            potential,
            fire_prob: sigmoid(potential),
            fired,
            representation,
        }
    }

    pub fn synapses(&self) -> &[SynapticState] {
        &self.synapses
    }

    pub fn weights(&self) -> Vec<f64> {
        self.synapses.iter().map(|s| s.weight).collect()
    }

    pub fn traces(&self) -> Vec<f64> {
        self.synapses.iter().map(|s| s.trace).collect()
    }

    pub fn prev_presyn(&self) -> &[f64] {
        &self.prev_presyn
    }

    pub fn potential(&self) -> f64 {
        self.potential
    }

    pub fn fired(&self) -> bool {
        self.fired
    }

    pub fn activity(&self) -> ActivityValue {
        ActivityValue::new(self.fired, self.representation)
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn fan_in(&self) -> usize {
        self.synapses.len()
    }

    /// Latches the presynaptic activities (plus the constant bias input,
    /// when the unit has one more synapse than `presyn`) and recomputes
    /// the potential.
    pub(crate) fn integrate(&mut self, presyn: &[f64]) {
        let n = presyn.len();
        self.prev_presyn[..n].copy_from_slice(presyn);
        if self.prev_presyn.len() == n + 1 {
            self.prev_presyn[n] = 1.0;
        }
        self.potential = self
            .synapses
            .iter()
            .zip(&self.prev_presyn)
            .map(|(s, u)| s.weight * u)
            .sum();
        self.fire_prob = sigmoid(self.potential);
    }

    pub(crate) fn spike<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let draw: f64 = rng.gen();
        self.fired = draw < self.fire_prob;
        self.fired
    }

    /// `z ← β z + (fired − σ(v)) u_pre` for every synapse.
    pub(crate) fn update_traces(&mut self, beta: f64) {
        let s = f64::from(u8::from(self.fired)) - self.fire_prob;
        for (syn, u) in self.synapses.iter_mut().zip(&self.prev_presyn) {
            syn.trace = beta * syn.trace + s * u;
        }
    }

    /// `w ← w + step · z`, where `step` is γ·r.
    pub(crate) fn apply_reward(&mut self, step: f64) {
        for syn in &mut self.synapses {
            syn.weight += step * syn.trace;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_reference_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert!(sigmoid(f64::NAN).is_nan());
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        for a in [700.0, 710.0, 1e9, f64::INFINITY] {
            let p = sigmoid(a);
            assert!(p.is_finite() && p <= 1.0 && p > 0.999);
            let q = sigmoid(-a);
            assert!(q.is_finite() && (0.0..1e-300).contains(&q));
        }
        // monotone through the clamp boundary
        assert!(sigmoid(-700.0) <= sigmoid(-699.0));
        assert!(sigmoid(-701.0) <= sigmoid(-700.0));
    }

    #[test]
    fn sigmoid_derivative_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a: f64 = rng.gen_range(-10.0..10.0);
            let h = 1e-5;
            let fd = (sigmoid(a + h) - sigmoid(a - h)) / (2.0 * h);
            let analytic = sigmoid(a) * (1.0 - sigmoid(a));
            assert!(
                ((fd - analytic) / analytic).abs() < 1e-6,
                "a={a} fd={fd} analytic={analytic}"
            );
        }
    }

    #[test]
    fn potential_examples() {
        assert_eq!(compute_potential(&[], &[]).unwrap(), 0.0);
        assert_eq!(compute_potential(&[1.0, -2.0], &[1.0, 1.0]).unwrap(), -1.0);
        assert_eq!(compute_potential(&[0.5, 0.5], &[-1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            compute_potential(&[1.0], &[1.0, 2.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fire_saturated_potential_always_fires() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..10_000).all(|_| fire(1e9, &mut rng)));
    }

    #[test]
    fn fire_at_zero_potential_is_a_fair_coin() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let fires = (0..n).filter(|_| fire(0.0, &mut rng)).count();
        let freq = fires as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.02, "freq {freq}");
    }

    #[test]
    fn fire_is_deterministic_per_seed() {
        let run = || {
            let mut rng = stream(42, &[]);
            (0..500).map(|_| fire(0.3, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn fire_consumes_one_draw() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = a.clone();
        fire(0.7, &mut a);
        let _: f64 = b.gen();
        assert_eq!(a.gen::<u64>(), b.gen::<u64>());
    }

    #[test]
    fn grad_log_ratio_examples() {
        let r = Representation::Asymmetric01;
        assert_eq!(grad_log_ratio(1.0, 0.0, 1.0, r).unwrap(), 0.5);
        assert_eq!(grad_log_ratio(0.0, 0.0, 1.0, r).unwrap(), -0.5);
        assert!(matches!(
            grad_log_ratio(-1.0, 0.0, 1.0, r),
            Err(Error::Contract(_))
        ));
        assert!(grad_log_ratio(0.0, 0.0, 1.0, Representation::SymmetricPm1).is_err());
    }

    /// Log-probability of the realised outcome, written out directly from
    /// the two-outcome distribution.
    fn log_prob(fired: bool, weights: &[f64], presyn: &[f64]) -> f64 {
        let v: f64 = weights.iter().zip(presyn).map(|(w, u)| w * u).sum();
        let p_fire = 1.0 / (1.0 + (-v).exp());
        if fired {
            p_fire.ln()
        } else {
            (1.0 - p_fire).ln()
        }
    }

    #[test]
    fn grad_log_ratio_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for repr in [Representation::Asymmetric01, Representation::SymmetricPm1] {
            for _ in 0..200 {
                let n = rng.gen_range(1..6);
                let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let presyn: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let fired = rng.gen_bool(0.5);
                let v = compute_potential(&weights, &presyn).unwrap();
                for j in 0..n {
                    let h = 1e-6;
                    let mut up = weights.clone();
                    up[j] += h;
                    let mut down = weights.clone();
                    down[j] -= h;
                    let fd = (log_prob(fired, &up, &presyn) - log_prob(fired, &down, &presyn))
                        / (2.0 * h);
                    let g = grad_log_ratio(repr.activity(fired), v, presyn[j], repr).unwrap();
                    let rel = (g - fd).abs() / fd.abs().max(1e-8);
                    assert!(rel < 1e-5, "{repr:?} g={g} fd={fd}");
                }
            }
        }
    }

    #[test]
    fn symmetric_score_is_affine_reparameterisation() {
        // With u' = (u+1)/2 and p' = (p+1)/2, the ±1 unit with weights w is
        // the 0/1 unit with weights 2w and a bias −Σw on a constant input.
        // By the chain rule ∂/∂w_j = 2·∂/∂w'_j − ∂/∂b.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let v: f64 = rng.gen_range(-4.0..4.0);
            for u in [-1.0, 1.0] {
                for p in [-1.0, 1.0] {
                    let sym = grad_log_ratio(u, v, p, Representation::SymmetricPm1).unwrap();
                    let u01 = (u + 1.0) / 2.0;
                    let via_weight =
                        grad_log_ratio(u01, v, (p + 1.0) / 2.0, Representation::Asymmetric01)
                            .unwrap();
                    let via_bias =
                        grad_log_ratio(u01, v, 1.0, Representation::Asymmetric01).unwrap();
                    assert!((sym - (2.0 * via_weight - via_bias)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn score_has_zero_mean_analytically() {
        for repr in [Representation::Asymmetric01, Representation::SymmetricPm1] {
            for v in [-3.0, -0.2, 0.0, 1.5, 6.0] {
                let p = 0.8;
                let s = sigmoid(v);
                let mean = s * grad_log_ratio(repr.activity(true), v, p, repr).unwrap()
                    + (1.0 - s) * grad_log_ratio(repr.activity(false), v, p, repr).unwrap();
                assert!(mean.abs() < 1e-15, "{repr:?} v={v} mean={mean}");
            }
        }
    }

    #[test]
    fn score_has_zero_mean_empirically() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (v, p) = (0.7, 1.0);
        let n = 100_000;
        for repr in [Representation::Asymmetric01, Representation::SymmetricPm1] {
            let samples: Vec<f64> = (0..n)
                .map(|_| {
                    let fired = fire(v, &mut rng);
                    grad_log_ratio(repr.activity(fired), v, p, repr).unwrap()
                })
                .collect();
            let mean = samples.iter().sum::<f64>() / n as f64;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            let se = (var / n as f64).sqrt();
            assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
        }
    }

    #[test]
    fn neuron_potential_tracks_latched_presyn() {
        let mut unit = NeuronUnit::new(vec![0.5, -1.0, 2.0], Representation::SymmetricPm1);
        unit.integrate(&[1.0, 1.0]);
        assert_eq!(unit.prev_presyn(), &[1.0, 1.0, 1.0]);
        assert_eq!(unit.potential(), 1.5);
        unit.integrate(&[-1.0, 1.0]);
        assert_eq!(unit.potential(), -0.5 - 1.0 + 2.0);
    }

    #[test]
    fn trace_update_scenarios() {
        // No presynaptic activity: the trace only decays.
        let mut quiet = NeuronUnit::new(vec![0.0], Representation::Asymmetric01);
        quiet.synapses[0].trace = 1.0;
        quiet.integrate(&[0.0]);
        quiet.fired = false;
        quiet.update_traces(0.5);
        assert_eq!(quiet.traces(), vec![0.5]);

        // Presynaptic spike without a postsynaptic one pushes the trace down.
        let mut depress = NeuronUnit::new(vec![0.0], Representation::Asymmetric01);
        depress.integrate(&[1.0]);
        depress.fired = false;
        depress.update_traces(0.5);
        assert_eq!(depress.traces(), vec![-0.5]);

        // Presynaptic spike followed by a postsynaptic one pushes it up.
        let mut potentiate = NeuronUnit::new(vec![0.0], Representation::Asymmetric01);
        potentiate.integrate(&[1.0]);
        potentiate.fired = true;
        potentiate.update_traces(0.5);
        assert_eq!(potentiate.traces(), vec![0.5]);
    }

    proptest! {
        #[test]
        fn score_magnitude_is_bounded_by_presyn(v in -50.0f64..50.0, p in -3.0f64..3.0, fired: bool) {
            let g = grad_log_ratio(
                Representation::SymmetricPm1.activity(fired), v, p, Representation::SymmetricPm1,
            ).unwrap();
            prop_assert!(g.abs() <= p.abs());
        }
    }
}

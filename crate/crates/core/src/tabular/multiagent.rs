//! Joint-agent versus independent-agent learning on one trajectory.
//!
//! A team of agents acting on the same POMDP can be viewed as one agent
//! whose policy is the product of the members' policies. Run that joint
//! agent's trace and parameter updates side by side with each member
//! running its own updates and the two must agree, because the log of a
//! product is the sum of the logs. The joint side here deliberately
//! computes `∇μ/μ` through the product rule on `μ` itself, not through
//! logs, so the comparison exercises two different computations.

use nalgebra::DMatrix;
use rand::Rng;

use super::fixture::AgentLayout;
use super::{sample_categorical, TabularPolicy, TabularPomdp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecompositionReport {
    pub steps: u64,
    /// Largest per-step difference between the joint trace increment and
    /// the concatenated per-agent increments.
    pub max_increment_discrepancy: f64,
    pub max_trace_discrepancy: f64,
    pub max_weight_discrepancy: f64,
}

impl DecompositionReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.max_increment_discrepancy
            .max(self.max_trace_discrepancy)
            .max(self.max_weight_discrepancy)
    }
}

fn max_abs_diff(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max)
}

/// `∇μ_joint / μ_joint` for every agent's parameter block, via the
/// product rule.
fn joint_score(policies: &[TabularPolicy], obs: &[usize], acts: &[usize]) -> Vec<DMatrix<f64>> {
    let probs: Vec<Vec<f64>> = policies
        .iter()
        .zip(obs)
        .map(|(p, &y)| p.probabilities(y))
        .collect();
    let chosen: Vec<f64> = probs.iter().zip(acts).map(|(p, &u)| p[u]).collect();
    let joint: f64 = chosen.iter().product();
    policies
        .iter()
        .enumerate()
        .map(|(i, policy)| {
            let others: f64 = chosen
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| p)
                .product();
            let mut g = DMatrix::zeros(policy.n_observations(), policy.n_actions());
            let (y, u) = (obs[i], acts[i]);
            for (a, pa) in probs[i].iter().enumerate() {
                let indicator = if a == u { 1.0 } else { 0.0 };
                let d_mu = chosen[i] * (indicator - pa);
                g[(y, a)] = others * d_mu / joint;
            }
            g
        })
        .collect()
}

/// Runs one trajectory with both update schemes and reports the largest
/// disagreement between them. Actions are drawn by the independent
/// agents, one uniform per agent per step, and applied to the POMDP as the
/// encoded joint action.
pub fn check_multiagent_decomposition<R: Rng + ?Sized>(
    pomdp: &TabularPomdp,
    layout: &AgentLayout,
    agents: &[TabularPolicy],
    beta: f64,
    gamma: f64,
    steps: u64,
    rng: &mut R,
) -> Result<DecompositionReport> {
    layout.check(pomdp)?;
    if agents.len() != layout.n_agents() {
        return Err(Error::config(format!(
            "{} agent policies for a layout of {} agents",
            agents.len(),
            layout.n_agents()
        )));
    }
    for (i, a) in agents.iter().enumerate() {
        if a.n_observations() != layout.observations[i] || a.n_actions() != layout.actions[i] {
            return Err(Error::config(format!(
                "agent {i} policy is {}x{}, layout says {}x{}",
                a.n_observations(),
                a.n_actions(),
                layout.observations[i],
                layout.actions[i]
            )));
        }
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::config(format!(
            "beta must lie in [0, 1), got {beta}"
        )));
    }

    let zeros = || -> Vec<DMatrix<f64>> {
        agents
            .iter()
            .map(|a| DMatrix::zeros(a.n_observations(), a.n_actions()))
            .collect()
    };
    let mut joint_policy: Vec<TabularPolicy> = agents.to_vec();
    let mut solo_policy: Vec<TabularPolicy> = agents.to_vec();
    let mut joint_z = zeros();
    let mut solo_z = zeros();
    let mut report = DecompositionReport {
        steps,
        ..Default::default()
    };

    let mut x = 0;
    for _ in 0..steps {
        let joint_obs = sample_categorical(&pomdp.observations()[x], rng);
        let obs = layout.decode_observation(joint_obs);
        let acts: Vec<usize> = solo_policy
            .iter()
            .zip(&obs)
            .map(|(p, &y)| p.sample(y, rng))
            .collect();
        let joint_action = layout.encode_action(&acts);
        if layout.decode_action(joint_action) != acts {
            return Err(Error::contract(format!(
                "joint action {joint_action} does not decode back to {acts:?}"
            )));
        }

        let joint_inc = joint_score(&joint_policy, &obs, &acts);
        let solo_inc: Vec<DMatrix<f64>> = solo_policy
            .iter()
            .zip(obs.iter().zip(&acts))
            .map(|(p, (&y, &u))| p.score(y, u))
            .collect();
        report.max_increment_discrepancy = report
            .max_increment_discrepancy
            .max(max_abs_diff(&joint_inc, &solo_inc));

        for (z, inc) in joint_z.iter_mut().zip(&joint_inc) {
            *z *= beta;
            *z += inc;
        }
        for (z, inc) in solo_z.iter_mut().zip(&solo_inc) {
            *z *= beta;
            *z += inc;
        }
        report.max_trace_discrepancy = report
            .max_trace_discrepancy
            .max(max_abs_diff(&joint_z, &solo_z));

        x = sample_categorical(&pomdp.transitions()[joint_action][x], rng);
        let r = pomdp.rewards()[x];
        for (p, z) in joint_policy.iter_mut().zip(&joint_z) {
            *p.theta_mut() += z * (gamma * r);
        }
        for (p, z) in solo_policy.iter_mut().zip(&solo_z) {
            *p.theta_mut() += z * (gamma * r);
        }
        let joint_theta: Vec<DMatrix<f64>> =
            joint_policy.iter().map(|p| p.theta().clone()).collect();
        let solo_theta: Vec<DMatrix<f64>> = solo_policy.iter().map(|p| p.theta().clone()).collect();
        report.max_weight_discrepancy = report
            .max_weight_discrepancy
            .max(max_abs_diff(&joint_theta, &solo_theta));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn two_agent_pomdp() -> (TabularPomdp, AgentLayout) {
        // 2 states, joint observations 2x2 = 4, joint actions 2x2 = 4.
        let obs = vec![vec![0.4, 0.1, 0.3, 0.2], vec![0.1, 0.2, 0.3, 0.4]];
        let transitions = (0..4)
            .map(|u| {
                let p = 0.2 + 0.15 * u as f64;
                vec![vec![1.0 - p, p], vec![p, 1.0 - p]]
            })
            .collect();
        let pomdp = TabularPomdp::new(obs, transitions, vec![0.0, 1.0]).unwrap();
        (
            pomdp,
            AgentLayout {
                observations: vec![2, 2],
                actions: vec![2, 2],
            },
        )
    }

    #[test]
    fn single_agent_discrepancy_is_zero() {
        let (pomdp, _) = two_agent_pomdp();
        let layout = AgentLayout::single(4, 4);
        let policy =
            TabularPolicy::new(DMatrix::from_fn(4, 4, |i, j| (i as f64 - j as f64) * 0.3)).unwrap();
        let mut rng = stream(3, &[]);
        let report =
            check_multiagent_decomposition(&pomdp, &layout, &[policy], 0.9, 0.01, 2000, &mut rng)
                .unwrap();
        // With one agent the product rule reduces to μ'/μ, identical up to
        // the rounding of one multiply-divide.
        assert!(report.max_discrepancy() <= 1e-15, "{report:?}");
    }

    #[test]
    fn two_agents_agree() {
        let (pomdp, layout) = two_agent_pomdp();
        let agents = vec![
            TabularPolicy::new(DMatrix::from_row_slice(2, 2, &[0.5, -0.5, 0.0, 1.0])).unwrap(),
            TabularPolicy::new(DMatrix::from_row_slice(2, 2, &[-1.0, 0.2, 0.3, 0.3])).unwrap(),
        ];
        let mut rng = stream(4, &[]);
        let report =
            check_multiagent_decomposition(&pomdp, &layout, &agents, 0.95, 0.05, 10_000, &mut rng)
                .unwrap();
        assert!(report.max_discrepancy() <= 1e-10, "{report:?}");
        assert!(report.max_trace_discrepancy > 0.0 || report.max_weight_discrepancy >= 0.0);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let (pomdp, _) = two_agent_pomdp();
        let layout = AgentLayout {
            observations: vec![2, 2],
            actions: vec![2, 3],
        };
        let agents = vec![TabularPolicy::zeros(2, 2), TabularPolicy::zeros(2, 3)];
        let mut rng = stream(5, &[]);
        assert!(
            check_multiagent_decomposition(&pomdp, &layout, &agents, 0.5, 0.1, 10, &mut rng)
                .is_err()
        );
    }
}

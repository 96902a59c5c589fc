//! POMDP fixture files.
//!
//! Fixtures are TOML documents:
//!
//! ```toml
//! n_states = 3
//! rewards = [0.0, 0.0, 1.0]
//! # observations[state][observation]
//! observations = [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]
//! # transitions[action][from][to]
//! transitions = [
//!   [[0.9, 0.1, 0.0], [0.0, 0.9, 0.1], [0.1, 0.0, 0.9]],
//!   [[0.1, 0.9, 0.0], [0.0, 0.1, 0.9], [0.9, 0.0, 0.1]],
//! ]
//!
//! [policy]            # optional; softmax logits, one row per observation
//! theta = [[0.0, 0.0], [0.0, 0.0]]
//!
//! [agents]            # optional factorisation into independent agents
//! observations = [2, 1]
//! actions = [2, 1]
//! theta = [ [[0.1, -0.2], [0.3, 0.0]], [[0.0]] ]   # optional, per agent
//! ```
//!
//! Joint observations and actions are mixed-radix tuples with agent 0 as
//! the fastest-varying digit.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use super::{TabularPolicy, TabularPomdp};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureFile {
    n_states: usize,
    rewards: Vec<f64>,
    observations: Vec<Vec<f64>>,
    transitions: Vec<Vec<Vec<f64>>>,
    policy: Option<PolicySection>,
    agents: Option<AgentSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicySection {
    theta: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentSection {
    observations: Vec<usize>,
    actions: Vec<usize>,
    theta: Option<Vec<Vec<Vec<f64>>>>,
}

/// Sizes of each agent's observation and action sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentLayout {
    pub observations: Vec<usize>,
    pub actions: Vec<usize>,
}

impl AgentLayout {
    pub fn single(n_obs: usize, n_actions: usize) -> Self {
        AgentLayout {
            observations: vec![n_obs],
            actions: vec![n_actions],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn joint_observations(&self) -> usize {
        self.observations.iter().product()
    }

    pub fn joint_actions(&self) -> usize {
        self.actions.iter().product()
    }

    pub fn decode_observation(&self, joint: usize) -> Vec<usize> {
        decode(joint, &self.observations)
    }

    pub fn encode_action(&self, parts: &[usize]) -> usize {
        encode(parts, &self.actions)
    }

    pub fn decode_action(&self, joint: usize) -> Vec<usize> {
        decode(joint, &self.actions)
    }

    pub fn check(&self, pomdp: &TabularPomdp) -> Result<()> {
        if self.observations.len() != self.actions.len() || self.actions.is_empty() {
            return Err(Error::config(
                "agent layout needs one observation count and one action count per agent",
            ));
        }
        if self.observations.contains(&0) || self.actions.contains(&0) {
            return Err(Error::config(
                "every agent needs at least one observation and action",
            ));
        }
        if self.joint_observations() != pomdp.n_observations() {
            return Err(Error::config(format!(
                "agent observation counts {:?} multiply to {}, but the POMDP has {} observations",
                self.observations,
                self.joint_observations(),
                pomdp.n_observations()
            )));
        }
        if self.joint_actions() != pomdp.n_actions() {
            return Err(Error::config(format!(
                "agent action counts {:?} multiply to {}, but the POMDP has {} actions",
                self.actions,
                self.joint_actions(),
                pomdp.n_actions()
            )));
        }
        Ok(())
    }
}

fn decode(mut joint: usize, radices: &[usize]) -> Vec<usize> {
    radices
        .iter()
        .map(|&r| {
            let d = joint % r;
            joint /= r;
            d
        })
        .collect()
}

fn encode(parts: &[usize], radices: &[usize]) -> usize {
    parts
        .iter()
        .zip(radices)
        .rev()
        .fold(0, |acc, (&d, &r)| acc * r + d)
}

#[derive(Debug, Clone)]
pub struct PomdpFixture {
    pub pomdp: TabularPomdp,
    pub policy: Option<TabularPolicy>,
    pub agents: Option<AgentLayout>,
    pub agent_policies: Option<Vec<TabularPolicy>>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::config(format!(
            "{what} row {i} has {} entries, expected {m}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Parses fixture text; `path` is only used in diagnostics.
pub fn parse_fixture(text: &str, path: &Path) -> Result<PomdpFixture> {
    let file: FixtureFile = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start].lines().count().max(1))
            .unwrap_or(0);
        Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.message().to_string(),
        }
    })?;
    let data_err = |e: Error| Error::Data {
        path: path.to_path_buf(),
        message: match e {
            Error::Config(m) => m,
            other => other.to_string(),
        },
    };
    if file.n_states != file.rewards.len() {
        return Err(data_err(Error::config(format!(
            "n_states = {} but rewards has {} entries",
            file.n_states,
            file.rewards.len()
        ))));
    }
    let pomdp =
        TabularPomdp::new(file.observations, file.transitions, file.rewards).map_err(data_err)?;
    let policy = file
        .policy
        .map(|p| {
            let policy = TabularPolicy::new(matrix(&p.theta, "policy theta")?)?;
            policy.check_compatible(&pomdp)?;
            Ok(policy)
        })
        .transpose()
        .map_err(data_err)?;
    let (agents, agent_policies) = match file.agents {
        None => (None, None),
        Some(section) => {
            let layout = AgentLayout {
                observations: section.observations,
                actions: section.actions,
            };
            layout.check(&pomdp).map_err(data_err)?;
            let policies = section
                .theta
                .map(|thetas| {
                    if thetas.len() != layout.n_agents() {
                        return Err(Error::config(format!(
                            "agents.theta has {} entries for {} agents",
                            thetas.len(),
                            layout.n_agents()
                        )));
                    }
                    thetas
                        .iter()
                        .enumerate()
                        .map(|(i, t)| {
                            let policy = TabularPolicy::new(matrix(t, "agents.theta")?)?;
                            if policy.n_observations() != layout.observations[i]
                                || policy.n_actions() != layout.actions[i]
                            {
                                return Err(Error::config(format!(
                                    "agents.theta[{i}] must be {}x{}",
                                    layout.observations[i], layout.actions[i]
                                )));
                            }
                            Ok(policy)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .transpose()
                .map_err(data_err)?;
            (Some(layout), policies)
        }
    };
    Ok(PomdpFixture {
        pomdp,
        policy,
        agents,
        agent_policies,
    })
}

pub fn load_fixture(path: &Path) -> Result<PomdpFixture> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::unreadable(path, e))?;
    parse_fixture(&text, path)
}

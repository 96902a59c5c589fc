//! Finite POMDPs small enough to solve exactly.
//!
//! These are the reference bed for the learning rule: the exact average
//! reward comes from the stationary distribution of the policy-induced
//! state chain, the exact gradient from finite differences of that value,
//! and [`estimate_gradient`] is the trace-based estimator under test.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

mod fixture;
mod multiagent;

pub use fixture::{load_fixture, parse_fixture, AgentLayout, PomdpFixture};
pub use multiagent::{check_multiagent_decomposition, DecompositionReport};

/// Tolerance on row sums of stochastic matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite step used by [`exact_grad_eta`].
pub const GRAD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularPomdp {
    /// `observations[x][y]`: probability of observing `y` in state `x`.
    observations: Vec<Vec<f64>>,
    /// `transitions[u][i][j]`: probability of `i → j` under action `u`.
    transitions: Vec<Vec<Vec<f64>>>,
    /// Reward received on entering / occupying each state.
    rewards: Vec<f64>,
}

fn check_distribution(row: &[f64], what: impl Fn() -> String) -> Result<()> {
    if let Some((col, p)) = row
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
    {
        return Err(Error::config(format!(
            "{}, column {col}: entry {p} is not a probability",
            what()
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::config(format!(
            "{} sums to {sum:.17}, not 1",
            what()
        )));
    }
    Ok(())
}

impl TabularPomdp {
    pub fn new(
        observations: Vec<Vec<f64>>,
        transitions: Vec<Vec<Vec<f64>>>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        let n = rewards.len();
        if n == 0 {
            return Err(Error::config("POMDP needs at least one state"));
        }
        if let Some(r) = rewards.iter().find(|r| !r.is_finite()) {
            return Err(Error::config(format!("reward {r} is not finite")));
        }
        if observations.len() != n {
            return Err(Error::config(format!(
                "observation matrix has {} rows for {n} states",
                observations.len()
            )));
        }
        let n_obs = observations[0].len();
        if n_obs == 0 {
            return Err(Error::config("observation matrix has no columns"));
        }
        for (x, row) in observations.iter().enumerate() {
            if row.len() != n_obs {
                return Err(Error::config(format!(
                    "observation row {x} has {} columns, expected {n_obs}",
                    row.len()
                )));
            }
            check_distribution(row, || format!("observation row {x}"))?;
        }
        if transitions.is_empty() {
            return Err(Error::config("POMDP needs at least one action"));
        }
        for (u, matrix) in transitions.iter().enumerate() {
            if matrix.len() != n {
                return Err(Error::config(format!(
                    "transition matrix for action {u} has {} rows, expected {n}",
                    matrix.len()
                )));
            }
            for (i, row) in matrix.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::config(format!(
                        "transition matrix for action {u}, row {i} has {} columns, expected {n}",
                        row.len()
                    )));
                }
                check_distribution(row, || format!("transition matrix for action {u}, row {i}"))?;
            }
        }
        Ok(TabularPomdp {
            observations,
            transitions,
            rewards,
        })
    }

    pub fn n_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn n_observations(&self) -> usize {
        self.observations[0].len()
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    pub fn transitions(&self) -> &[Vec<Vec<f64>>] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Relabels states: new state `k` is old state `perm[k]`.
    pub fn permute_states(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_states();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::config("not a permutation of the state labels"));
        }
        let observations = perm.iter().map(|&p| self.observations[p].clone()).collect();
        let transitions = self
            .transitions
            .iter()
            .map(|m| {
                perm.iter()
                    .map(|&i| perm.iter().map(|&j| m[i][j]).collect())
                    .collect()
            })
            .collect();
        let rewards = perm.iter().map(|&p| self.rewards[p]).collect();
        TabularPomdp::new(observations, transitions, rewards)
    }
}

/// Softmax policy: one row of logits per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    theta: DMatrix<f64>,
}

impl TabularPolicy {
    pub fn new(theta: DMatrix<f64>) -> Result<Self> {
        if theta.nrows() == 0 || theta.ncols() == 0 {
            return Err(Error::config(
                "policy needs at least one observation and action",
            ));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("policy parameters must be finite"));
        }
        Ok(TabularPolicy { theta })
    }

    pub fn zeros(n_obs: usize, n_actions: usize) -> Self {
        TabularPolicy {
            theta: DMatrix::zeros(n_obs, n_actions),
        }
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.theta
    }

    pub fn n_observations(&self) -> usize {
        self.theta.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.theta.ncols()
    }

    pub fn probabilities(&self, y: usize) -> Vec<f64> {
        let row = self.theta.row(y);
        let max = row.max();
        let exps: Vec<f64> = row.iter().map(|t| (t - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    /// Adds `scale · ∇μ_u(y)/μ_u(y)` into `acc`. Only row `y` is touched:
    /// `∂ log μ_u / ∂θ_{y,a} = 1[a = u] − μ_a`.
    pub fn add_score(&self, y: usize, u: usize, scale: f64, acc: &mut DMatrix<f64>) {
        let probs = self.probabilities(y);
        for (a, p) in probs.iter().enumerate() {
            let indicator = if a == u { 1.0 } else { 0.0 };
            acc[(y, a)] += scale * (indicator - p);
        }
    }

    pub fn score(&self, y: usize, u: usize) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.theta.nrows(), self.theta.ncols());
        self.add_score(y, u, 1.0, &mut g);
        g
    }

    pub fn sample<R: Rng + ?Sized>(&self, y: usize, rng: &mut R) -> usize {
        sample_categorical(&self.probabilities(y), rng)
    }

    fn check_compatible(&self, pomdp: &TabularPomdp) -> Result<()> {
        if self.n_observations() != pomdp.n_observations() || self.n_actions() != pomdp.n_actions()
        {
            return Err(Error::config(format!(
                "policy is {}x{} but the POMDP has {} observations and {} actions",
                self.n_observations(),
                self.n_actions(),
                pomdp.n_observations(),
                pomdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// Inverse-CDF sampling with a single uniform draw.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    // Rounding can leave the cumulative sum just below 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Row-stochastic state chain `M_ij = Σ_y ν_i(y) Σ_u μ_u(y) p_ij(u)`.
pub fn state_chain(pomdp: &TabularPomdp, policy: &TabularPolicy) -> Result<DMatrix<f64>> {
    policy.check_compatible(pomdp)?;
    let n = pomdp.n_states();
    let action_probs: Vec<Vec<f64>> = (0..pomdp.n_observations())
        .map(|y| policy.probabilities(y))
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        // Marginal action distribution in state i.
        let mut act = vec![0.0; pomdp.n_actions()];
        for (y, nu) in pomdp.observations[i].iter().enumerate() {
            for (u, p) in action_probs[y].iter().enumerate() {
                act[u] += nu * p;
            }
        }
        for (u, pu) in act.iter().enumerate() {
            for j in 0..n {
                m[(i, j)] += pu * pomdp.transitions[u][i][j];
            }
        }
    }
    Ok(m)
}

/// Checks that the chain is irreducible and aperiodic, naming the
/// offending states or period otherwise.
pub fn check_mixing(chain: &DMatrix<f64>) -> Result<()> {
    let n = chain.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let p = if forward {
                    chain[(i, j)]
                } else {
                    chain[(j, i)]
                };
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let unreached: Vec<usize> = (0..n).filter(|&j| !reach(true)[j]).collect();
    if !unreached.is_empty() {
        return Err(Error::NotMixing(format!(
            "reducible: states {unreached:?} are unreachable from state 0"
        )));
    }
    let stranded: Vec<usize> = (0..n).filter(|&j| !reach(false)[j]).collect();
    if !stranded.is_empty() {
        return Err(Error::NotMixing(format!(
            "reducible: state 0 is unreachable from states {stranded:?}"
        )));
    }
    // Period = gcd over edges i→j of level(i) + 1 − level(j), with BFS levels.
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if chain[(i, j)] > 0.0 && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let gcd = |mut a: usize, mut b: usize| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let mut period = 0;
    for i in 0..n {
        for j in 0..n {
            if chain[(i, j)] > 0.0 {
                period = gcd(period, (level[i] + 1).abs_diff(level[j]));
            }
        }
    }
    if period != 1 {
        return Err(Error::NotMixing(format!("periodic with period {period}")));
    }
    Ok(())
}

/// Stationary distribution of an irreducible chain.
pub fn stationary_distribution(chain: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = chain.nrows();
    // Solve (Mᵀ − I) π = 0 with the last equation replaced by Σπ = 1.
    let mut a = chain.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::NotMixing("stationary system is singular".into()))
}

/// Exact long-run average reward of `policy` on `pomdp`.
pub fn exact_eta(pomdp: &TabularPomdp, policy: &TabularPolicy) -> Result<f64> {
    let chain = state_chain(pomdp, policy)?;
    check_mixing(&chain)?;
    let pi = stationary_distribution(&chain)?;
    Ok(pi.iter().zip(&pomdp.rewards).map(|(p, r)| p * r).sum())
}

fn central_difference(
    pomdp: &TabularPomdp,
    policy: &TabularPolicy,
    h: f64,
) -> Result<DMatrix<f64>> {
    let theta = policy.theta();
    let mut grad = DMatrix::zeros(theta.nrows(), theta.ncols());
    let mut probe = policy.clone();
    for idx in 0..theta.len() {
        let base = theta[idx];
        probe.theta[idx] = base + h;
        let up = exact_eta(pomdp, &probe)?;
        probe.theta[idx] = base - h;
        let down = exact_eta(pomdp, &probe)?;
        probe.theta[idx] = base;
        grad[idx] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// Gradient of [`exact_eta`] by central differences with step
/// [`GRAD_STEP`], cross-checked against step `GRAD_STEP / 2`.
pub fn exact_grad_eta(pomdp: &TabularPomdp, policy: &TabularPolicy) -> Result<DMatrix<f64>> {
    let coarse = central_difference(pomdp, policy, GRAD_STEP)?;
    let fine = central_difference(pomdp, policy, GRAD_STEP / 2.0)?;
    let scale = fine.amax();
    let disagreement = (&coarse - &fine).amax();
    if disagreement > 1e-6 * scale + 1e-9 {
        return Err(Error::Oracle(format!(
            "finite-difference gradient unstable: steps h and h/2 differ by {disagreement:e} (scale {scale:e})"
        )));
    }
    Ok(coarse)
}

/// Simulates `steps` transitions with the policy frozen and returns the
/// average of `r_t z_t`, where `z_{t+1} = β z_t + ∇μ_{u_t}/μ_{u_t}` and
/// `r_{t+1}` is the reward of the state entered after `u_t`. The chain
/// starts in state 0 with `z = 0`.
pub fn estimate_gradient<R: Rng + ?Sized>(
    pomdp: &TabularPomdp,
    policy: &TabularPolicy,
    beta: f64,
    steps: u64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    policy.check_compatible(pomdp)?;
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::config(format!(
            "beta must lie in [0, 1), got {beta}"
        )));
    }
    if steps == 0 {
        return Err(Error::config("estimator needs at least one step"));
    }
    let (rows, cols) = policy.theta().shape();
    let action_probs: Vec<Vec<f64>> = (0..rows).map(|y| policy.probabilities(y)).collect();
    let mut z = DMatrix::zeros(rows, cols);
    let mut total = DMatrix::zeros(rows, cols);
    let mut x = 0;
    for _ in 0..steps {
        let y = sample_categorical(&pomdp.observations[x], rng);
        let u = sample_categorical(&action_probs[y], rng);
        z *= beta;
        for (a, p) in action_probs[y].iter().enumerate() {
            let indicator = if a == u { 1.0 } else { 0.0 };
            z[(y, a)] += indicator - p;
        }
        x = sample_categorical(&pomdp.transitions[u][x], rng);
        let r = pomdp.rewards[x];
        if r != 0.0 {
            total += &z * r;
        }
    }
    Ok(total / steps as f64)
}

/// Angle in degrees between two parameter-shaped matrices.
pub fn angle_degrees(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let cos = a.dot(b) / (a.norm() * b.norm());
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

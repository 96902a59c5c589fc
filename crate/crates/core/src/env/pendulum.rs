//! Inverted pendulum on a puck sliding in a square arena.
//!
//! The pendulum is modelled as two independent planar cart-poles, one in
//! the x–vertical plane and one in the y–vertical plane, each with the
//! puck as the cart and a point mass on a massless rod. Angles are
//! measured from upright, positive when the bob leans towards the positive
//! axis. Per plane, with cart mass `M`, bob mass `m`, rod length `l` and
//! horizontal force `F`:
//!
//! ```text
//! ẍ = (F + m sinθ (l ω² − g cosθ)) / (M + m sin²θ)
//! θ̈ = (g sinθ − ẍ cosθ) / l
//! ```
//!
//! Steps use classical fourth-order Runge–Kutta with the force held
//! constant over the step. Ground friction is Coulomb friction of size
//! `μ (M + m) g` against the puck's planar velocity, evaluated at the
//! start of the step. Walls reflect the puck elastically: the velocity
//! component is negated and the position clamped so the puck stays inside.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumParams {
    /// Side of the square arena, metres.
    pub arena: f64,
    pub dt: f64,
    pub gravity: f64,
    pub puck_radius: f64,
    pub puck_mass: f64,
    pub pole_length: f64,
    pub bob_mass: f64,
    pub ground_friction: f64,
    /// Force per axis, newtons.
    pub thrust: f64,
    /// Side of the centred square in which the puck is placed on reset.
    pub reset_box: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            arena: 5.0,
            dt: 0.02,
            gravity: 9.8,
            puck_radius: 0.05,
            puck_mass: 1.0,
            pole_length: 0.5,
            bob_mass: 0.1,
            ground_friction: 5e-4,
            thrust: 10.0,
            reset_box: 1.0,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("arena", self.arena),
            ("dt", self.dt),
            ("gravity", self.gravity),
            ("puck_radius", self.puck_radius),
            ("puck_mass", self.puck_mass),
            ("pole_length", self.pole_length),
            ("bob_mass", self.bob_mass),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "pendulum {name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("ground_friction", self.ground_friction),
            ("thrust", self.thrust),
            ("reset_box", self.reset_box),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "pendulum {name} must be non-negative, got {v}"
                )));
            }
        }
        if 2.0 * self.puck_radius >= self.arena {
            return Err(Error::config("puck does not fit in the arena"));
        }
        if self.reset_box > self.arena - 2.0 * self.puck_radius {
            return Err(Error::config("reset_box is larger than the free arena"));
        }
        Ok(())
    }

    fn total_mass(&self) -> f64 {
        self.puck_mass + self.bob_mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PendulumState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub theta_x: f64,
    pub theta_y: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    /// Seconds since the last reset.
    pub elapsed: f64,
}

impl PendulumState {
    pub fn fallen(&self) -> bool {
        self.theta_x.abs().max(self.theta_y.abs()) >= FRAC_PI_2
    }

    pub fn plane(&self, axis: usize) -> Plane {
        match axis {
            0 => Plane {
                pos: self.x,
                vel: self.vx,
                theta: self.theta_x,
                omega: self.omega_x,
            },
            _ => Plane {
                pos: self.y,
                vel: self.vy,
                theta: self.theta_y,
                omega: self.omega_y,
            },
        }
    }

    fn set_plane(&mut self, axis: usize, p: Plane) {
        match axis {
            0 => {
                self.x = p.pos;
                self.vx = p.vel;
                self.theta_x = p.theta;
                self.omega_x = p.omega;
            }
            _ => {
                self.y = p.pos;
                self.vy = p.vel;
                self.theta_y = p.theta;
                self.omega_y = p.omega;
            }
        }
    }
}

/// One planar cart-pole.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Plane {
    pub pos: f64,
    pub vel: f64,
    pub theta: f64,
    pub omega: f64,
}

impl Plane {
    fn derivative(self, force: f64, p: &PendulumParams) -> Plane {
        let (s, c) = self.theta.sin_cos();
        let m = p.bob_mass;
        let l = p.pole_length;
        let acc = (force + m * s * (l * self.omega * self.omega - p.gravity * c))
            / (p.puck_mass + m * s * s);
        let alpha = (p.gravity * s - acc * c) / l;
        Plane {
            pos: self.vel,
            vel: acc,
            theta: self.omega,
            omega: alpha,
        }
    }

    fn axpy(self, h: f64, d: Plane) -> Plane {
        Plane {
            pos: self.pos + h * d.pos,
            vel: self.vel + h * d.vel,
            theta: self.theta + h * d.theta,
            omega: self.omega + h * d.omega,
        }
    }

    /// Advances by `dt` under a constant horizontal force, ignoring walls.
    pub fn rk4(self, force: f64, dt: f64, p: &PendulumParams) -> Plane {
        let k1 = self.derivative(force, p);
        let k2 = self.axpy(dt / 2.0, k1).derivative(force, p);
        let k3 = self.axpy(dt / 2.0, k2).derivative(force, p);
        let k4 = self.axpy(dt, k3).derivative(force, p);
        Plane {
            pos: self.pos + dt / 6.0 * (k1.pos + 2.0 * k2.pos + 2.0 * k3.pos + k4.pos),
            vel: self.vel + dt / 6.0 * (k1.vel + 2.0 * k2.vel + 2.0 * k3.vel + k4.vel),
            theta: self.theta + dt / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
            omega: self.omega + dt / 6.0 * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega),
        }
    }

    /// Mechanical energy of the plane, gravitational zero at the pivot.
    pub fn energy(self, p: &PendulumParams) -> f64 {
        let m = p.bob_mass;
        let l = p.pole_length;
        0.5 * p.total_mass() * self.vel * self.vel
            + m * l * self.theta.cos() * self.vel * self.omega
            + 0.5 * m * l * l * self.omega * self.omega
            + m * p.gravity * l * self.theta.cos()
    }
}

/// Advances the state by one time step. `signs` selects the direction of
/// the thrust on each axis and must be ±1.
pub fn pendulum_step(
    state: &PendulumState,
    signs: [f64; 2],
    params: &PendulumParams,
) -> Result<PendulumState> {
    if state.fallen() {
        return Err(Error::contract("pendulum_step called on a fallen pendulum"));
    }
    if signs.iter().any(|s| s.abs() != 1.0) {
        return Err(Error::contract(format!(
            "thrust signs must be ±1, got {signs:?}"
        )));
    }
    let speed = state.vx.hypot(state.vy);
    let friction = params.ground_friction * params.total_mass() * params.gravity;
    let mut next = *state;
    for (axis, sign) in signs.iter().enumerate() {
        let plane = state.plane(axis);
        let drag = if speed > 0.0 {
            -friction * plane.vel / speed
        } else {
            0.0
        };
        let mut p = plane.rk4(sign * params.thrust + drag, params.dt, params);
        let lo = params.puck_radius;
        let hi = params.arena - params.puck_radius;
        if p.pos < lo {
            p.pos = lo;
            p.vel = p.vel.abs();
        } else if p.pos > hi {
            p.pos = hi;
            p.vel = -p.vel.abs();
        }
        next.set_plane(axis, p);
    }
    next.elapsed += params.dt;
    Ok(next)
}

/// −1 once either tilt reaches π/2, otherwise 0.
pub fn pendulum_reward(state: &PendulumState) -> f64 {
    if state.fallen() {
        -1.0
    } else {
        0.0
    }
}

/// Puck uniform in the centred `reset_box` square, at rest, pendulum
/// upright and still.
pub fn pendulum_reset<R: Rng + ?Sized>(rng: &mut R, params: &PendulumParams) -> PendulumState {
    let centre = params.arena / 2.0;
    let half = params.reset_box / 2.0;
    let mut coord = || centre + half * (2.0 * rng.gen::<f64>() - 1.0);
    let x = coord();
    let y = coord();
    PendulumState {
        x,
        y,
        ..Default::default()
    }
}

/// Subtracted from the raw state before scaling: the arena centre for the
/// positions, zero elsewhere.
pub const OBSERVATION_OFFSET: [f64; 8] = [2.5, 2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];

/// Divisors for `(x, y, vx, vy, θx, θy, ωx, ωy)` in metres, m/s, radians
/// and rad/s.
pub const OBSERVATION_SCALE: [f64; 8] = [2.5, 2.5, 2.0, 2.0, 0.2, 0.2, 1.0, 1.0];

pub fn scale_observation(state: &PendulumState) -> [f64; 8] {
    let raw = [
        state.x,
        state.y,
        state.vx,
        state.vy,
        state.theta_x,
        state.theta_y,
        state.omega_x,
        state.omega_y,
    ];
    std::array::from_fn(|i| (raw[i] - OBSERVATION_OFFSET[i]) / OBSERVATION_SCALE[i])
}

/// The pendulum as an [`Environment`]. Output 0 sets the x thrust sign and
/// output 1 the y thrust sign; a firing unit pushes towards positive.
/// [`done`](Environment::done) reports a fall; the caller resets.
#[derive(Debug, Clone)]
pub struct PendulumTask {
    params: PendulumParams,
    state: PendulumState,
    last_signs: [f64; 2],
    reward: f64,
    falls: u64,
    steps: u64,
}

impl PendulumTask {
    pub fn new(params: PendulumParams) -> Result<Self> {
        params.validate()?;
        let centre = params.arena / 2.0;
        Ok(PendulumTask {
            params,
            state: PendulumState {
                x: centre,
                y: centre,
                ..Default::default()
            },
            last_signs: [0.0; 2],
            reward: 0.0,
            falls: 0,
            steps: 0,
        })
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    pub fn state(&self) -> &PendulumState {
        &self.state
    }

    pub fn last_signs(&self) -> [f64; 2] {
        self.last_signs
    }

    pub fn falls(&self) -> u64 {
        self.falls
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

impl Environment for PendulumTask {
    fn observation_len(&self) -> usize {
        OBSERVATION_SCALE.len()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.state = pendulum_reset(rng, &self.params);
        self.observe()
    }

    fn observe(&self) -> Vec<f64> {
        scale_observation(&self.state).to_vec()
    }

    fn act(&mut self, actions: &[bool]) -> Result<()> {
        let &[fx, fy] = actions else {
            return Err(Error::config(format!(
                "pendulum task takes two outputs, got {}",
                actions.len()
            )));
        };
        let sign = |f: bool| if f { 1.0 } else { -1.0 };
        self.last_signs = [sign(fx), sign(fy)];
        self.state = pendulum_step(&self.state, self.last_signs, &self.params)?;
        self.reward = pendulum_reward(&self.state);
        self.steps += 1;
        if self.state.fallen() {
            self.falls += 1;
        }
        Ok(())
    }

    fn reward(&self) -> f64 {
        self.reward
    }

    fn done(&self) -> bool {
        self.state.fallen()
    }
}

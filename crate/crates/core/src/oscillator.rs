//! Closed-form variable-mass spring.
//!
//! The mass grows linearly, `m(t) = m0·t/t0`, while the stiffness decays as
//! `k(t) = k0·t0/t`, so `k·m` is conserved and the instantaneous angular
//! frequency is `ω(t) = θ/t` with the constant angle `θ = sqrt(k0/m0)·t0`.
//! The equation of motion reduces to the Euler equation
//!
//! ```text
//! t²·x'' + t·x' + θ²·x = 0
//! ```
//!
//! whose general solution `x = x0·sin(θ·ln(t/t0)) + x1·cos(θ·ln(t/t0))`
//! oscillates periodically in `ln t`.
//!
//! Every formula accepts any `t > 0`; the solution is smooth on `(0, ∞)`
//! even though the physical setup starts at `t0`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OscillatorError {
    #[error("invalid spring parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("time must be positive and finite, got {0}")]
    NonPositiveTime(f64),
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error("integration failed: {0}")]
    Integration(String),
}

/// Parameters of the linearly growing mass spring.
///
/// `θ` is computed once at construction; every downstream formula uses it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpringParams", into = "SpringParams")]
pub struct SpringConfig {
    m0: f64,
    t0: f64,
    k0: f64,
    x0: f64,
    x1: f64,
    theta: f64,
    ln_t0: f64,
}

/// Raw serialized form of [`SpringConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringParams {
    pub m0: f64,
    pub t0: f64,
    pub k0: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub x1: f64,
}

impl TryFrom<SpringParams> for SpringConfig {
    type Error = OscillatorError;

    fn try_from(p: SpringParams) -> Result<Self, Self::Error> {
        SpringConfig::new(p.m0, p.t0, p.k0, p.x0, p.x1)
    }
}

impl From<SpringConfig> for SpringParams {
    fn from(c: SpringConfig) -> Self {
        SpringParams {
            m0: c.m0,
            t0: c.t0,
            k0: c.k0,
            x0: c.x0,
            x1: c.x1,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, OscillatorError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(OscillatorError::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

fn finite(name: &'static str, value: f64) -> Result<f64, OscillatorError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(OscillatorError::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}

pub(crate) fn check_time(t: f64) -> Result<f64, OscillatorError> {
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err(OscillatorError::NonPositiveTime(t))
    }
}

impl SpringConfig {
    pub fn new(m0: f64, t0: f64, k0: f64, x0: f64, x1: f64) -> Result<Self, OscillatorError> {
        let m0 = positive("m0", m0)?;
        let t0 = positive("t0", t0)?;
        let k0 = positive("k0", k0)?;
        let x0 = finite("x0", x0)?;
        let x1 = finite("x1", x1)?;
        let theta = (k0 / m0).sqrt() * t0;
        if !(theta.is_finite() && theta > 0.0) {
            return Err(OscillatorError::InvalidParameter {
                name: "theta",
                value: theta,
                reason: "derived angle sqrt(k0/m0)·t0 must be positive and finite",
            });
        }
        Ok(SpringConfig {
            m0,
            t0,
            k0,
            x0,
            x1,
            theta,
            ln_t0: t0.ln(),
        })
    }

    /// Unit mass and reference time with `k0 = θ²`, the most convenient way
    /// to pick a configuration by its angle.
    pub fn with_theta(theta: f64, x0: f64, x1: f64) -> Result<Self, OscillatorError> {
        let theta = positive("theta", theta)?;
        Self::new(1.0, 1.0, theta * theta, x0, x1)
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn k0(&self) -> f64 {
        self.k0
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }

    /// Same mechanics, different amplitudes.
    pub fn with_amplitudes(&self, x0: f64, x1: f64) -> Result<Self, OscillatorError> {
        Self::new(self.m0, self.t0, self.k0, x0, x1)
    }

    /// Constant angle `θ = ω(t)·t = sqrt(k0/m0)·t0`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Log-phase `θ·ln(t/t0)`, with the logarithm split to avoid forming `t/t0`.
    fn phase(&self, t: f64) -> f64 {
        self.theta * (t.ln() - self.ln_t0)
    }

    pub fn mass_at(&self, t: f64) -> Result<f64, OscillatorError> {
        let t = check_time(t)?;
        Ok(self.m0 * (t / self.t0))
    }

    pub fn stiffness_at(&self, t: f64) -> Result<f64, OscillatorError> {
        let t = check_time(t)?;
        Ok(self.k0 * (self.t0 / t))
    }

    /// `ω(t) = sqrt(k/m) = θ/t`.
    pub fn omega_at(&self, t: f64) -> Result<f64, OscillatorError> {
        let t = check_time(t)?;
        Ok(self.theta / t)
    }

    pub fn position(&self, t: f64) -> Result<f64, OscillatorError> {
        let t = check_time(t)?;
        let (s, c) = self.phase(t).sin_cos();
        Ok(self.x0 * s + self.x1 * c)
    }

    pub fn velocity(&self, t: f64) -> Result<f64, OscillatorError> {
        let t = check_time(t)?;
        let (s, c) = self.phase(t).sin_cos();
        Ok(self.theta / t * (self.x0 * c - self.x1 * s))
    }

    /// Analytic second derivative of the closed form.
    pub fn acceleration(&self, t: f64) -> Result<f64, OscillatorError> {
        let t = check_time(t)?;
        let (s, c) = self.phase(t).sin_cos();
        let th = self.theta;
        // d/dt[(θ/t)(x0 c − x1 s)] = −(θ/t²)(x0 c − x1 s) − (θ²/t²)(x0 s + x1 c)
        Ok(-(th / (t * t)) * (self.x0 * c - self.x1 * s) - (th * th / (t * t)) * (self.x0 * s + self.x1 * c))
    }

    /// Total mechanical energy `½·k(t)·x² + ½·m(t)·v²` on the closed-form trajectory.
    pub fn energy(&self, t: f64) -> Result<f64, OscillatorError> {
        let x = self.position(t)?;
        let v = self.velocity(t)?;
        Ok(0.5 * self.stiffness_at(t)? * x * x + 0.5 * self.mass_at(t)? * v * v)
    }

    pub fn state(&self, t: f64) -> Result<SpringState, OscillatorError> {
        Ok(SpringState {
            t,
            x: self.position(t)?,
            v: self.velocity(t)?,
            m: self.mass_at(t)?,
            k: self.stiffness_at(t)?,
            omega: self.omega_at(t)?,
            energy: self.energy(t)?,
        })
    }

    fn require_sine_only(&self) -> Result<(), OscillatorError> {
        if self.x1 != 0.0 {
            return Err(OscillatorError::Precondition("relation requires x1 = 0"));
        }
        if self.x0 == 0.0 {
            return Err(OscillatorError::Precondition("relation requires x0 ≠ 0"));
        }
        Ok(())
    }

    /// `(x/x0)² + (v/(x0·ω))² − 1` for an arbitrary phase-space point at time `t`.
    pub fn universal_residual_of(&self, t: f64, x: f64, v: f64) -> Result<f64, OscillatorError> {
        self.require_sine_only()?;
        let omega = self.omega_at(t)?;
        let a = x / self.x0;
        let b = v / (self.x0 * omega);
        Ok(a * a + b * b - 1.0)
    }

    /// Universal relation residual evaluated on the closed-form trajectory.
    pub fn universal_residual(&self, t: f64) -> Result<f64, OscillatorError> {
        self.universal_residual_of(t, self.position(t)?, self.velocity(t)?)
    }

    /// Reconstructs `ln(m(t)/m0)` from `(1/θ)∫dx/sqrt(x0² − x²)` taken along the
    /// trajectory and returns its difference from `ln(t/t0)`.
    ///
    /// The trajectory is split at the position extrema; on each monotone piece
    /// the integral is the arcsine difference of its endpoints, and the pieces
    /// add up with positive sign because `dx` and the velocity flip together.
    pub fn mass_consistency_residual(&self, t: f64) -> Result<f64, OscillatorError> {
        self.require_sine_only()?;
        let t = check_time(t)?;
        if t < self.t0 {
            return Err(OscillatorError::Precondition("mass reconstruction requires t ≥ t0"));
        }
        let reconstructed = self.reconstructed_log_mass(t)?;
        Ok(reconstructed - (t.ln() - self.ln_t0))
    }

    fn reconstructed_log_mass(&self, t: f64) -> Result<f64, OscillatorError> {
        // Turning points at θ·ln(t_n/t0) = (n + ½)π where x/x0 = (−1)ⁿ.
        let total_phase = self.phase(t);
        let turning_arc = |n: usize| if n.is_multiple_of(2) { FRAC_PI_2 } else { -FRAC_PI_2 };
        let mut turns = 0usize;
        while (turns as f64 + 0.5) * PI < total_phase {
            turns += 1;
        }

        let end_ratio = self.position(t)? / self.x0;
        if !end_ratio.is_finite() {
            return Err(OscillatorError::Integration(format!(
                "non-finite trajectory value at t = {t}"
            )));
        }
        let end_arc = end_ratio.clamp(-1.0, 1.0).asin();

        // Piece 0 starts at t0 where x = 0; piece i ≥ 1 starts at turning point i − 1.
        let mut sum = 0.0;
        for piece in 0..=turns {
            let start = if piece == 0 { 0.0 } else { turning_arc(piece - 1) };
            let end = if piece < turns { turning_arc(piece) } else { end_arc };
            sum += (end - start).abs();
        }
        Ok(sum / self.theta)
    }

    /// Position and velocity extremum times for integer indices in `n_min..=n_max`.
    pub fn extremum_times(&self, n_min: i64, n_max: i64) -> Result<ExtremumTimes, OscillatorError> {
        if self.x1 != 0.0 {
            return Err(OscillatorError::Precondition("extremum families require x1 = 0"));
        }
        if n_min > n_max {
            return Err(OscillatorError::Precondition("n_min must not exceed n_max"));
        }
        let th = self.theta;
        let shift = (1.0 / th).atan();
        let position = (n_min..=n_max)
            .map(|n| self.t0 * ((n as f64 + 0.5) * PI / th).exp())
            .collect();
        let velocity = (n_min..=n_max)
            .map(|n| self.t0 * ((n as f64 * PI - shift) / th).exp())
            .collect();
        Ok(ExtremumTimes { position, velocity })
    }
}

/// Instantaneous state on the closed-form trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpringState {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    pub m: f64,
    pub k: f64,
    pub omega: f64,
    pub energy: f64,
}

/// Times where `dx/dt = 0` (`position`) and `dv/dt = 0` (`velocity`).
///
/// Position extrema sit at `t0·exp((n + ½)π/θ)`, velocity extrema at
/// `t0·exp((nπ − atan(1/θ))/θ)`. Both families are geometric in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremumTimes {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

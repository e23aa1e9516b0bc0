//! Factorized-probability thermodynamics and the Tsallis entropy.
//!
//! With microstate probabilities `p_i = μ_i·ν_i` the reduced functionals are
//!
//! ```text
//! A/k_BT = Σ p_i ln μ_i,   E/k_BT = −Σ p_i ln ν_i,   S/k_B = −Σ p_i ln p_i
//! ```
//!
//! so that `A = E − T·S`. The nonextensive entropy is
//! `S_q = (1 − Σ p_i^q)/(q − 1)`, whose non-constant part `Σ p_i^q/(q − 1)`
//! is linked to the spring force `−k(t)·x` and, through the market
//! dictionary, to the squared excess demand.

use crate::econ::{EconConfig, EconError};
use crate::oscillator::{OscillatorError, SpringConfig};
use serde::Serialize;
use thiserror::Error;

/// Tolerance on `Σ p_i = 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TsallisError {
    #[error("empty probability vector")]
    Empty,
    #[error("factor vectors differ in length ({mu} vs {nu})")]
    LengthMismatch { mu: usize, nu: usize },
    #[error("factor {name}[{index}] = {value} must be positive")]
    NonPositiveFactor {
        name: &'static str,
        index: usize,
        value: f64,
    },
    #[error("probability p[{index}] = {value} is negative or not finite")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("entropic index q = 1 is the Shannon limit; use shannon_entropy")]
    UnitIndex,
    #[error("entropic index q = {0} is not finite")]
    InvalidIndex(f64),
    #[error("q = {0} ≤ 0 is undefined for zero probabilities")]
    ZeroProbabilityPower(f64),
    #[error("demand slope d_o vanishes at t = {0}")]
    Singularity(f64),
    #[error(transparent)]
    Econ(#[from] EconError),
    #[error(transparent)]
    Oscillator(#[from] OscillatorError),
}

/// Microstate probabilities written as products `p_i = μ_i·ν_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityFactorization {
    mu: Vec<f64>,
    nu: Vec<f64>,
}

impl ProbabilityFactorization {
    pub fn new(mu: Vec<f64>, nu: Vec<f64>) -> Result<Self, TsallisError> {
        if mu.len() != nu.len() {
            return Err(TsallisError::LengthMismatch {
                mu: mu.len(),
                nu: nu.len(),
            });
        }
        if mu.is_empty() {
            return Err(TsallisError::Empty);
        }
        for (name, v) in [("mu", &mu), ("nu", &nu)] {
            if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
                return Err(TsallisError::NonPositiveFactor { name, index, value });
            }
        }
        let sum: f64 = mu.iter().zip(&nu).map(|(a, b)| a * b).sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(TsallisError::NotNormalized(sum));
        }
        Ok(ProbabilityFactorization { mu, nu })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }
    pub fn len(&self) -> usize {
        self.mu.len()
    }
    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
    pub fn probabilities(&self) -> Vec<f64> {
        self.mu.iter().zip(&self.nu).map(|(a, b)| a * b).collect()
    }
}

/// Helmholtz free energy, internal energy and entropy in reduced units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermoReport {
    /// `A/(k_B·T)`
    pub helmholtz_reduced: f64,
    /// `E/(k_B·T)`
    pub internal_reduced: f64,
    /// `S/k_B`
    pub entropy_reduced: f64,
}

pub fn thermo(pf: &ProbabilityFactorization) -> ThermoReport {
    let (mut a, mut e, mut s) = (0.0, 0.0, 0.0);
    for (&mu, &nu) in pf.mu.iter().zip(&pf.nu) {
        let p = mu * nu;
        let (ln_mu, ln_nu) = (mu.ln(), nu.ln());
        a += p * ln_mu;
        e -= p * ln_nu;
        s -= p * (ln_mu + ln_nu);
    }
    ThermoReport {
        helmholtz_reduced: a,
        internal_reduced: e,
        entropy_reduced: s,
    }
}

fn check_distribution(p: &[f64]) -> Result<bool, TsallisError> {
    if p.is_empty() {
        return Err(TsallisError::Empty);
    }
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x >= 0.0)) {
        return Err(TsallisError::InvalidProbability { index, value });
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(TsallisError::NotNormalized(sum));
    }
    Ok(p.contains(&0.0))
}

fn power_sum(p: &[f64], q: f64) -> Result<f64, TsallisError> {
    if !q.is_finite() {
        return Err(TsallisError::InvalidIndex(q));
    }
    if q == 1.0 {
        return Err(TsallisError::UnitIndex);
    }
    let has_zero = check_distribution(p)?;
    if has_zero && q <= 0.0 {
        return Err(TsallisError::ZeroProbabilityPower(q));
    }
    Ok(p.iter().filter(|&&x| x > 0.0).map(|x| x.powf(q)).sum())
}

/// `S_q/k_B = (1 − Σ p_i^q)/(q − 1)`.
pub fn tsallis_entropy(p: &[f64], q: f64) -> Result<f64, TsallisError> {
    Ok((1.0 - power_sum(p, q)?) / (q - 1.0))
}

/// Second entropic term `Σ p_i^q/(q − 1)`.
pub fn entropic_term(p: &[f64], q: f64) -> Result<f64, TsallisError> {
    Ok(power_sum(p, q)? / (q - 1.0))
}

/// `−Σ p_i ln p_i` with `0·ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64, TsallisError> {
    check_distribution(p)?;
    Ok(-p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>())
}

/// Mechanical side of the force–entropy correspondence: `−k(t)·x`.
pub fn force_correspondence_lhs(spring: &SpringConfig, t: f64, x: f64) -> Result<f64, TsallisError> {
    Ok(-spring.stiffness_at(t)? * x)
}

/// Market side of the entropic-term correspondence,
/// `−½·[(k0·t0/d_o(t))·(γβ(t) − λℓ·d_o(t))·(D − d*)]²`.
///
/// For the log-periodic slope family the damping bracket is `1/t` and
/// `(D − d*)/d_o = P − P*`, so the value reduces to `−½·(k0·t0·x/t)²` with
/// `x = P − P*`.
pub fn demand_correspondence_lhs(
    econ: &EconConfig,
    spring: &SpringConfig,
    demand_value: f64,
    t: f64,
) -> Result<f64, TsallisError> {
    econ.beta(t)?;
    let d_o = econ.d_o().eval(t);
    if d_o == 0.0 {
        return Err(TsallisError::Singularity(t));
    }
    let excess = demand_value - econ.market().d_star;
    let inner = spring.k0() * spring.t0() / d_o * econ.damping_coefficient(t) * excess;
    Ok(-0.5 * inner * inner)
}

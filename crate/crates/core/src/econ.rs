//! Demand/supply price dynamics with stock adjustment.
//!
//! Prices react to the stock build-up rate and to the deviation of stocks
//! from an optimal level that is affine in demand:
//!
//! ```text
//! dS/dt = Q(P) − D(P) = β(t)·(P − P*)
//! dP/dt = −γ·dS/dt + λ·(S_o(P) − S),   S_o(P) = ℓ0 + ℓ·D(P)
//! D(P)  = d* + d_o(t)·(P − P*),         Q(P) = d* + q_o(t)·(P − P*)
//! ```
//!
//! with `β = q_o − d_o`. Eliminating `S` gives the second-order price equation
//!
//! ```text
//! P'' + [γβ − λℓ d_o]·P' + [γ q_o' − (γ + λℓ) d_o' + λβ]·(P − P*) = 0
//! ```
//!
//! which has the same form as the reduced spring when the damping bracket
//! equals `1/t` and the frequency bracket equals `(θ/t)²`.
//! [`construct_coefficients`] builds the only slope family that does both.

use crate::integrator::{IntegrateError, OdeSolution};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EconError {
    #[error("invalid market parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("time must be positive and finite, got {0}")]
    NonPositiveTime(f64),
    #[error("t = {t} outside validity window ({lo}, {hi})")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },
    #[error("β(t) = q_o − d_o = {beta} is not positive at t = {t}")]
    NonPositiveBeta { t: f64, beta: f64 },
    #[error("log-periodic coefficient family requires λ > 0")]
    SingularFamily,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("frequency coefficient {value} ≤ 0 at t = {t}: not a log-periodic regime")]
    NotLogPeriodic { t: f64, value: f64 },
    #[error("demand slope vanishes at t = {0}")]
    Singularity(f64),
    #[error(transparent)]
    Integration(#[from] IntegrateError),
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Time-dependent slope of a demand or supply curve, with an optional
/// analytic derivative. Without one, derivatives are central differences
/// with step `1e-6·t`.
#[derive(Clone)]
pub struct SlopeFn {
    value: ScalarFn,
    derivative: Option<ScalarFn>,
}

impl fmt::Debug for SlopeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SlopeFn")
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl SlopeFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SlopeFn {
            value: Arc::new(f),
            derivative: None,
        }
    }

    pub fn with_derivative(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SlopeFn {
            value: Arc::new(f),
            derivative: Some(Arc::new(df)),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::with_derivative(move |_| c, |_| 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match &self.derivative {
            Some(df) => df(t),
            None => {
                let h = 1e-6 * t;
                ((self.value)(t + h) - (self.value)(t - h)) / (2.0 * h)
            }
        }
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative.is_some()
    }
}

/// Open interval on which the economic sign conditions hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityWindow {
    pub lo: f64,
    pub hi: f64,
}

impl ValidityWindow {
    pub fn contains(&self, t: f64) -> bool {
        t > self.lo && t < self.hi
    }
}

/// The constant market parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub gamma: f64,
    pub lambda: f64,
    pub ell0: f64,
    pub ell: f64,
    pub p_star: f64,
    /// Equilibrium demand, equal to equilibrium supply.
    pub d_star: f64,
}

impl MarketParams {
    fn validate(&self) -> Result<(), EconError> {
        let bad = |name, value, reason| Err(EconError::InvalidParameter { name, value, reason });
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad("gamma", self.gamma, "must be positive");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda", self.lambda, "must be non-negative");
        }
        if !(self.ell.is_finite() && self.ell > 0.0) {
            return bad("ell", self.ell, "must be positive");
        }
        for (name, v) in [("ell0", self.ell0), ("p_star", self.p_star), ("d_star", self.d_star)] {
            if !v.is_finite() {
                return bad(name, v, "must be finite");
            }
        }
        Ok(())
    }
}

/// Serializable description of the slope functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// The family built by [`construct_coefficients`].
    LogPeriodic { theta: f64 },
    /// Time-independent slopes, optionally restricted to a window.
    Constant {
        d_o: f64,
        q_o: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[f64; 2]>,
    },
}

/// JSON form of an [`EconConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconSpec {
    pub gamma: f64,
    pub lambda: f64,
    pub ell0: f64,
    pub ell: f64,
    pub p_star: f64,
    pub d_star: f64,
    pub coefficients: CoefficientSpec,
}

impl EconSpec {
    pub fn market(&self) -> MarketParams {
        MarketParams {
            gamma: self.gamma,
            lambda: self.lambda,
            ell0: self.ell0,
            ell: self.ell,
            p_star: self.p_star,
            d_star: self.d_star,
        }
    }
}

/// Market parameters together with the slope functions `d_o(t)`, `q_o(t)`.
#[derive(Debug, Clone)]
pub struct EconConfig {
    market: MarketParams,
    d_o: SlopeFn,
    q_o: SlopeFn,
    window: Option<ValidityWindow>,
    spec: Option<CoefficientSpec>,
}

impl TryFrom<EconSpec> for EconConfig {
    type Error = EconError;

    fn try_from(spec: EconSpec) -> Result<Self, EconError> {
        match spec.coefficients {
            CoefficientSpec::LogPeriodic { theta } => EconConfig::log_periodic(spec.market(), theta),
            CoefficientSpec::Constant { d_o, q_o, window } => {
                let mut cfg = EconConfig::new(
                    spec.market(),
                    SlopeFn::constant(d_o),
                    SlopeFn::constant(q_o),
                    window.map(|[lo, hi]| ValidityWindow { lo, hi }),
                )?;
                cfg.spec = Some(spec.coefficients);
                Ok(cfg)
            }
        }
    }
}

impl EconConfig {
    pub fn new(
        market: MarketParams,
        d_o: SlopeFn,
        q_o: SlopeFn,
        window: Option<ValidityWindow>,
    ) -> Result<Self, EconError> {
        market.validate()?;
        if let Some(w) = window {
            if !(w.lo.is_finite() && w.hi.is_finite() && w.lo >= 0.0 && w.lo < w.hi) {
                return Err(EconError::InvalidParameter {
                    name: "window",
                    value: w.lo,
                    reason: "need 0 ≤ lo < hi",
                });
            }
        }
        Ok(EconConfig {
            market,
            d_o,
            q_o,
            window,
            spec: None,
        })
    }

    /// Market with the log-periodic slope family for angle `θ`; the validity
    /// window is the one returned by [`construct_coefficients`].
    pub fn log_periodic(market: MarketParams, theta: f64) -> Result<Self, EconError> {
        market.validate()?;
        let family = construct_coefficients(market.gamma, market.lambda, market.ell, theta)?;
        let mut cfg = EconConfig::new(market, family.d_o, family.q_o, Some(family.window))?;
        cfg.spec = Some(CoefficientSpec::LogPeriodic { theta });
        Ok(cfg)
    }

    /// The serializable description, when the slopes came from one.
    pub fn to_spec(&self) -> Option<EconSpec> {
        let m = self.market;
        self.spec.map(|coefficients| EconSpec {
            gamma: m.gamma,
            lambda: m.lambda,
            ell0: m.ell0,
            ell: m.ell,
            p_star: m.p_star,
            d_star: m.d_star,
            coefficients,
        })
    }

    pub fn market(&self) -> &MarketParams {
        &self.market
    }
    pub fn window(&self) -> Option<ValidityWindow> {
        self.window
    }
    pub fn d_o(&self) -> &SlopeFn {
        &self.d_o
    }
    pub fn q_o(&self) -> &SlopeFn {
        &self.q_o
    }

    fn check_time(&self, t: f64) -> Result<f64, EconError> {
        if !(t.is_finite() && t > 0.0) {
            return Err(EconError::NonPositiveTime(t));
        }
        if let Some(w) = self.window {
            if !w.contains(t) {
                return Err(EconError::OutsideWindow { t, lo: w.lo, hi: w.hi });
            }
        }
        Ok(t)
    }

    /// `β(t) = q_o(t) − d_o(t)`, required to be positive inside the window.
    pub fn beta(&self, t: f64) -> Result<f64, EconError> {
        let t = self.check_time(t)?;
        let beta = self.beta_unchecked(t);
        if beta > 0.0 {
            Ok(beta)
        } else {
            Err(EconError::NonPositiveBeta { t, beta })
        }
    }

    fn beta_unchecked(&self, t: f64) -> f64 {
        self.q_o.eval(t) - self.d_o.eval(t)
    }

    pub fn demand(&self, price: f64, t: f64) -> Result<f64, EconError> {
        let t = self.check_time(t)?;
        Ok(self.market.d_star + self.d_o.eval(t) * (price - self.market.p_star))
    }

    pub fn supply(&self, price: f64, t: f64) -> Result<f64, EconError> {
        let t = self.check_time(t)?;
        Ok(self.market.d_star + self.q_o.eval(t) * (price - self.market.p_star))
    }

    /// `dS/dt = Q(P) − D(P)`.
    pub fn stock_rate(&self, price: f64, t: f64) -> Result<f64, EconError> {
        Ok(self.supply(price, t)? - self.demand(price, t)?)
    }

    /// `S_o(P) = ℓ0 + ℓ·D(P)`.
    pub fn optimal_stock(&self, price: f64, t: f64) -> Result<f64, EconError> {
        Ok(self.market.ell0 + self.market.ell * self.demand(price, t)?)
    }

    /// `S* = ℓ0 + ℓ·d*`.
    pub fn equilibrium_stock(&self) -> f64 {
        self.market.ell0 + self.market.ell * self.market.d_star
    }

    pub fn state(&self, t: f64, price: f64, stock: f64) -> Result<EconState, EconError> {
        Ok(EconState {
            t,
            price,
            stock,
            optimal_stock: self.optimal_stock(price, t)?,
            demand: self.demand(price, t)?,
            supply: self.supply(price, t)?,
        })
    }

    /// Right-hand side `(dP/dt, dS/dt)` of the price/stock system.
    ///
    /// Not restricted to the validity window: the dynamics are defined
    /// wherever the slopes are finite, the window only bounds where the
    /// signs `d_o < 0 < q_o` hold.
    pub fn dynamics(&self, t: f64, price: f64, stock: f64) -> (f64, f64) {
        let m = &self.market;
        let dev = price - m.p_star;
        let demand = m.d_star + self.d_o.eval(t) * dev;
        let stock_rate = self.beta_unchecked(t) * dev;
        let optimal = m.ell0 + m.ell * demand;
        (-m.gamma * stock_rate + m.lambda * (optimal - stock), stock_rate)
    }

    /// Damping bracket `γβ − λℓ·d_o`; equals `1/t` for the log-periodic family.
    pub fn damping_coefficient(&self, t: f64) -> f64 {
        let m = &self.market;
        m.gamma * self.beta_unchecked(t) - m.lambda * m.ell * self.d_o.eval(t)
    }

    /// Frequency bracket `γq_o' − (γ + λℓ)d_o' + λβ`; equals `(θ/t)²` for the
    /// log-periodic family.
    pub fn frequency_coefficient(&self, t: f64) -> f64 {
        let m = &self.market;
        m.gamma * self.q_o.derivative(t) - (m.gamma + m.lambda * m.ell) * self.d_o.derivative(t)
            + m.lambda * self.beta_unchecked(t)
    }

    /// State `(P, S)` at `t_start` that puts the price on the trajectory
    /// `P − P* = a·sin(θ·ln(t/t_ref)) + b·cos(θ·ln(t/t_ref))`.
    ///
    /// Only meaningful for the log-periodic family, where that trajectory
    /// solves the price equation exactly.
    pub fn log_periodic_initial_state(
        &self,
        theta: f64,
        amp_sin: f64,
        amp_cos: f64,
        t_ref: f64,
        t_start: f64,
    ) -> Result<[f64; 2], EconError> {
        let m = &self.market;
        if !(m.lambda > 0.0) {
            return Err(EconError::SingularFamily);
        }
        for t in [t_ref, t_start] {
            if !(t.is_finite() && t > 0.0) {
                return Err(EconError::NonPositiveTime(t));
            }
        }
        let (s, c) = (theta * (t_start.ln() - t_ref.ln())).sin_cos();
        let dev = amp_sin * s + amp_cos * c;
        let dev_rate = theta / t_start * (amp_sin * c - amp_cos * s);
        let price = m.p_star + dev;
        let optimal = m.ell0 + m.ell * (m.d_star + self.d_o.eval(t_start) * dev);
        // dP/dt = −γβ·dev + λ(S_o − S)  ⇒  S = S_o − (dP/dt + γβ·dev)/λ
        let stock = optimal - (dev_rate + m.gamma * self.beta_unchecked(t_start) * dev) / m.lambda;
        Ok([price, stock])
    }
}

/// Snapshot of the market at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EconState {
    pub t: f64,
    pub price: f64,
    pub stock: f64,
    pub optimal_stock: f64,
    pub demand: f64,
    pub supply: f64,
}

/// Slope functions making the price equation log-periodic.
#[derive(Debug, Clone)]
pub struct LogPeriodicCoefficients {
    pub d_o: SlopeFn,
    pub q_o: SlopeFn,
    pub window: ValidityWindow,
}

/// Builds `d_o`, `q_o` such that the damping bracket is exactly `1/t` and
/// the frequency bracket exactly `(θ/t)²`.
///
/// Solving the damping condition for `d_o` and substituting into the
/// frequency condition leaves `λβ = (1 + θ²)/t²`, hence
///
/// ```text
/// β(t)   = (1 + θ²)/(λ t²)
/// d_o(t) = (γβ(t) − 1/t)/(λℓ)
/// q_o(t) = d_o(t) + β(t)
/// ```
///
/// `d_o < 0` requires `t > γ(1 + θ²)/λ` and `q_o > 0` requires
/// `t < (γ + λℓ)(1 + θ²)/λ`; the returned window is that open interval.
pub fn construct_coefficients(
    gamma: f64,
    lambda: f64,
    ell: f64,
    theta: f64,
) -> Result<LogPeriodicCoefficients, EconError> {
    if lambda == 0.0 {
        return Err(EconError::SingularFamily);
    }
    for (name, v) in [("gamma", gamma), ("lambda", lambda), ("ell", ell), ("theta", theta)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(EconError::InvalidParameter {
                name,
                value: v,
                reason: "must be positive",
            });
        }
    }
    let c = (1.0 + theta * theta) / lambda;
    let lam_ell = lambda * ell;

    let beta = move |t: f64| c / (t * t);
    let beta_rate = move |t: f64| -2.0 * c / (t * t * t);
    let d_o = move |t: f64| (gamma * beta(t) - 1.0 / t) / lam_ell;
    let d_o_rate = move |t: f64| (gamma * beta_rate(t) + 1.0 / (t * t)) / lam_ell;

    Ok(LogPeriodicCoefficients {
        d_o: SlopeFn::with_derivative(d_o, d_o_rate),
        q_o: SlopeFn::with_derivative(move |t| d_o(t) + beta(t), move |t| d_o_rate(t) + beta_rate(t)),
        window: ValidityWindow {
            lo: gamma * c,
            hi: (gamma + lam_ell) * c,
        },
    })
}

/// Residual of the second-order price equation along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceOdeReport {
    pub max_abs: f64,
    pub rms: f64,
    /// `max |frequency(t)·(P − P*)|`, i.e. `max |θ²(P − P*)/t²|` for the
    /// log-periodic family.
    pub scale: f64,
    pub scaled_max: f64,
    pub scaled_rms: f64,
    pub samples: usize,
}

/// Checks the price equation on the output grid of an econ integration.
pub fn verify_price_ode(econ: &EconConfig, solution: &OdeSolution) -> Result<PriceOdeReport, EconError> {
    price_ode_residual(econ, solution.times(), &solution.first())
}

/// Checks the price equation on arbitrary samples using three-point
/// finite differences with the grid spacing as step.
pub fn price_ode_residual(econ: &EconConfig, times: &[f64], prices: &[f64]) -> Result<PriceOdeReport, EconError> {
    const MIN_SAMPLES: usize = 5;
    let n = times.len().min(prices.len());
    if n < MIN_SAMPLES {
        return Err(EconError::InsufficientData {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let p_star = econ.market.p_star;
    let (mut max_abs, mut sum_sq, mut scale) = (0.0f64, 0.0f64, 0.0f64);
    for i in 1..n - 1 {
        let (t0, t1, t2) = (times[i - 1], times[i], times[i + 1]);
        let (h1, h2) = (t1 - t0, t2 - t1);
        if !(h1 > 0.0 && h2 > 0.0) {
            return Err(EconError::NonPositiveTime(t1));
        }
        let (y0, y1, y2) = (prices[i - 1] - p_star, prices[i] - p_star, prices[i + 1] - p_star);
        let d1 = -h2 / (h1 * (h1 + h2)) * y0 + (h2 - h1) / (h1 * h2) * y1 + h1 / (h2 * (h1 + h2)) * y2;
        let d2 = 2.0 * (h2 * y0 - (h1 + h2) * y1 + h1 * y2) / (h1 * h2 * (h1 + h2));
        let freq_term = econ.frequency_coefficient(t1) * y1;
        let r = d2 + econ.damping_coefficient(t1) * d1 + freq_term;
        max_abs = max_abs.max(r.abs());
        sum_sq += r * r;
        scale = scale.max(freq_term.abs());
    }
    let rms = (sum_sq / (n - 2) as f64).sqrt();
    let (scaled_max, scaled_rms) = if scale > 0.0 {
        (max_abs / scale, rms / scale)
    } else {
        (max_abs, rms)
    };
    Ok(PriceOdeReport {
        max_abs,
        rms,
        scale,
        scaled_max,
        scaled_rms,
        samples: n,
    })
}

/// Correspondence between the price equation and the reduced spring:
/// `P − P* ↔ x`, damping bracket `↔ 1/t`, frequency bracket `↔ (θ/t)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanicalMapping {
    pub t_ref: f64,
    /// `sqrt(t²·frequency(t_ref))`.
    pub theta: f64,
    pub damping_coefficient: f64,
    /// `t·damping`, equal to 1 when the damping matches the spring.
    pub damping_times_t: f64,
    pub frequency_coefficient: f64,
}

pub fn to_mechanical(econ: &EconConfig, t_ref: f64) -> Result<MechanicalMapping, EconError> {
    if !(t_ref.is_finite() && t_ref > 0.0) {
        return Err(EconError::NonPositiveTime(t_ref));
    }
    let freq = econ.frequency_coefficient(t_ref);
    if !(freq > 0.0) {
        return Err(EconError::NotLogPeriodic { t: t_ref, value: freq });
    }
    let damping = econ.damping_coefficient(t_ref);
    Ok(MechanicalMapping {
        t_ref,
        theta: t_ref * freq.sqrt(),
        damping_coefficient: damping,
        damping_times_t: damping * t_ref,
        frequency_coefficient: freq,
    })
}

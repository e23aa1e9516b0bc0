//! Log-periodic oscillations from a spring whose mass grows linearly in
//! time, the demand/supply price model that shares its equation of motion,
//! and the Tsallis entropy expressions tied to both.
//!
//! * [`oscillator`]: closed-form trajectory, energy and invariants.
//! * [`integrator`]: adaptive Dormand–Prince integration of the spring and
//!   price/stock systems.
//! * [`econ`]: market model, log-periodic slope family, price-equation checks.
//! * [`fitter`]: log-periodic least-squares fitting and periodogram.
//! * [`tsallis`]: factorized-probability thermodynamics and `S_q`.

pub mod econ;
pub mod fitter;
pub mod integrator;
pub mod oscillator;
pub mod tsallis;

pub use econ::{
    construct_coefficients, to_mechanical, verify_price_ode, EconConfig, EconError, EconSpec, MarketParams,
};
pub use fitter::{fit, log_time_periodogram, Envelope, FitError, FitOptions, LogPeriodicFit, TimeSeries};
pub use integrator::{
    integrate_econ, integrate_spring_general, integrate_spring_reduced, IntegrateError, Integrator,
    MassStiffnessSchedule, OdeSolution,
};
pub use oscillator::{OscillatorError, SpringConfig, SpringState};
pub use tsallis::{entropic_term, thermo, tsallis_entropy, ProbabilityFactorization, ThermoReport, TsallisError};

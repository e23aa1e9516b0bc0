//! Adaptive Dormand–Prince 5(4) integration for two-component systems.
//!
//! Used for the reduced spring `t²x'' + tx' + θ²x = 0`, the general
//! variable-mass spring `m x'' + m' x' = −k x` and the first-order
//! price/stock system. Steps are controlled with the PI controller of
//! Hairer & Wanner and capped at `0.1·t`, since every coefficient in these
//! problems varies on the scale of `t` itself. Between accepted steps the
//! solution is available through the fourth-order continuous extension of
//! the method.

use crate::econ::EconConfig;
use crate::oscillator::SpringConfig;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub type State = [f64; 2];

pub const MIN_TOLERANCE: f64 = 1e-13;
pub const MAX_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_SAMPLES_PER_DECADE: usize = 64;

/// Largest step as a fraction of the current time.
const MAX_RELATIVE_STEP: f64 = 0.1;
/// Below this fraction of the current time a step counts as underflow.
const MIN_RELATIVE_STEP: f64 = 1e-14;
const MAX_STEPS: usize = 10_000_000;
/// The controller aims this factor below the requested tolerance. Global
/// error of an error-per-step controller grows like tol^0.8 over a run, so
/// without the margin a trajectory spanning a few decades ends up tens of
/// tolerances off.
const TOLERANCE_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid integration window [{t_start}, {t_end}]: need 0 < t_start < t_end")]
    InvalidWindow { t_start: f64, t_end: f64 },
    #[error("tolerance {0} outside [1e-13, 1e-3]")]
    InvalidTolerance(f64),
    #[error("step size underflow at t = {t} (h = {h:e}); problem may be stiff")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step limit exceeded at t = {0}")]
    TooManySteps(f64),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("invalid initial state: {0}")]
    InvalidInitial(String),
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy)]
struct Segment {
    t: f64,
    h: f64,
    coeffs: [State; 5],
}

impl Segment {
    fn eval(&self, t: f64) -> State {
        let s = (t - self.t) / self.h;
        let s1 = 1.0 - s;
        let r = &self.coeffs;
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            *o = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
        }
        out
    }
}

/// Integration result sampled on a log-spaced grid, plus dense output.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    times: Vec<f64>,
    states: Vec<State>,
    accepted_steps: usize,
    rejected_steps: usize,
    tolerance: f64,
    segments: Vec<Segment>,
}

impl OdeSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn states(&self) -> &[State] {
        &self.states
    }
    /// First state component (position or price) on the output grid.
    pub fn first(&self) -> Vec<f64> {
        self.states.iter().map(|s| s[0]).collect()
    }
    /// Second state component (velocity or stock) on the output grid.
    pub fn second(&self) -> Vec<f64> {
        self.states.iter().map(|s| s[1]).collect()
    }
    pub fn accepted_steps(&self) -> usize {
        self.accepted_steps
    }
    pub fn rejected_steps(&self) -> usize {
        self.rejected_steps
    }
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
    pub fn t_start(&self) -> f64 {
        self.times[0]
    }
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Dense-output state at any `t` inside the integration window.
    pub fn evaluate(&self, t: f64) -> Option<State> {
        if !(t >= self.t_start() && t <= self.t_end()) {
            return None;
        }
        if t == self.t_start() {
            return Some(self.states[0]);
        }
        if t == self.t_end() {
            return Some(*self.states.last().unwrap());
        }
        let idx = self.segments.partition_point(|seg| seg.t + seg.h < t);
        let seg = self.segments.get(idx).or_else(|| self.segments.last())?;
        Some(seg.eval(t))
    }
}

type RhsFn<'a> = dyn Fn(f64, &State) -> Result<State, IntegrateError> + 'a;

/// Adaptive integrator settings.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    tol: f64,
    samples_per_decade: usize,
}

impl Integrator {
    pub fn new(tol: f64) -> Result<Self, IntegrateError> {
        if !(MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tol) {
            return Err(IntegrateError::InvalidTolerance(tol));
        }
        Ok(Integrator {
            tol,
            samples_per_decade: DEFAULT_SAMPLES_PER_DECADE,
        })
    }

    /// Output density; values below 64 are raised to 64.
    pub fn with_samples_per_decade(mut self, n: usize) -> Self {
        self.samples_per_decade = n.max(DEFAULT_SAMPLES_PER_DECADE);
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    fn output_grid(&self, t_start: f64, t_end: f64) -> Vec<f64> {
        let decades = (t_end / t_start).log10();
        let n = ((decades * self.samples_per_decade as f64).ceil() as usize).max(1) + 1;
        let (a, b) = (t_start.ln(), t_end.ln());
        let mut grid: Vec<f64> = (0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect();
        grid[0] = t_start;
        grid[n - 1] = t_end;
        grid.dedup();
        grid
    }

    /// Integrates `y' = rhs(t, y)` from `t_start` to `t_end`.
    pub fn solve(
        &self,
        rhs: &RhsFn<'_>,
        initial: State,
        t_start: f64,
        t_end: f64,
    ) -> Result<OdeSolution, IntegrateError> {
        if !(t_start.is_finite() && t_end.is_finite() && t_start > 0.0 && t_start < t_end) {
            return Err(IntegrateError::InvalidWindow { t_start, t_end });
        }
        if !initial.iter().all(|v| v.is_finite()) {
            return Err(IntegrateError::InvalidInitial(format!("{initial:?}")));
        }
        let grid = self.output_grid(t_start, t_end);
        let (atol, rtol) = (TOLERANCE_MARGIN * self.tol, TOLERANCE_MARGIN * self.tol);

        let mut times = Vec::with_capacity(grid.len());
        let mut states = Vec::with_capacity(grid.len());
        times.push(t_start);
        states.push(initial);
        let mut next_out = 1;

        let mut segments = Vec::new();
        let mut t = t_start;
        let mut y = initial;
        let mut k1 = rhs(t, &y)?;
        let mut h = initial_step(rhs, t, &y, &k1, atol, rtol)?;
        let mut fac_old: f64 = 1e-4;
        let mut last_rejected = false;
        let (mut accepted, mut rejected) = (0usize, 0usize);

        while t < t_end {
            if accepted + rejected >= MAX_STEPS {
                return Err(IntegrateError::TooManySteps(t));
            }
            h = h.min(MAX_RELATIVE_STEP * t);
            if t + 1.01 * h >= t_end {
                h = t_end - t;
            }
            if h < MIN_RELATIVE_STEP * t {
                return Err(IntegrateError::StepUnderflow { t, h });
            }

            let step = dopri_step(rhs, t, &y, &k1, h)?;
            let err = error_norm(&y, &step.y_new, &step.err, atol, rtol);

            // PI controller (Hairer's DOPRI5 settings).
            let fac11 = err.powf(0.17);
            if err <= 1.0 {
                let mut fac = fac11 / fac_old.powf(0.04);
                fac = (fac / 0.9).clamp(0.1, 5.0);
                let mut h_new = h / fac;
                if last_rejected {
                    h_new = h_new.min(h);
                }
                fac_old = err.max(1e-4);

                let t_new = if h == t_end - t { t_end } else { t + h };
                let seg = Segment {
                    t,
                    h,
                    coeffs: dense_coefficients(&y, &step, h),
                };
                while next_out < grid.len() && grid[next_out] <= t_new {
                    let tg = grid[next_out];
                    let value = if tg == t_new { step.y_new } else { seg.eval(tg) };
                    times.push(tg);
                    states.push(value);
                    next_out += 1;
                }
                segments.push(seg);

                t = t_new;
                y = step.y_new;
                k1 = step.k7;
                h = h_new;
                accepted += 1;
                last_rejected = false;
            } else {
                h /= (fac11 / 0.9).min(5.0);
                rejected += 1;
                last_rejected = true;
            }
        }

        Ok(OdeSolution {
            times,
            states,
            accepted_steps: accepted,
            rejected_steps: rejected,
            tolerance: self.tol,
            segments,
        })
    }

    /// Reduced spring `x' = v`, `v' = −v/t − (θ/t)²·x`.
    pub fn spring_reduced(
        &self,
        config: &SpringConfig,
        initial: State,
        t_start: f64,
        t_end: f64,
    ) -> Result<OdeSolution, IntegrateError> {
        let theta2 = config.theta() * config.theta();
        let rhs = move |t: f64, y: &State| -> Result<State, IntegrateError> {
            Ok([y[1], -y[1] / t - theta2 / (t * t) * y[0]])
        };
        self.solve(&rhs, initial, t_start, t_end)
    }

    /// General spring `m(t)·x'' + m'(t)·x' = −k(t)·x`.
    pub fn spring_general(
        &self,
        schedule: &MassStiffnessSchedule,
        initial: State,
        t_start: f64,
        t_end: f64,
    ) -> Result<OdeSolution, IntegrateError> {
        let (lo, hi) = schedule.window();
        if t_start < lo || t_end > hi {
            return Err(IntegrateError::Schedule(format!(
                "integration window [{t_start}, {t_end}] exceeds schedule window [{lo}, {hi}]"
            )));
        }
        let rhs = |t: f64, y: &State| -> Result<State, IntegrateError> {
            let m = schedule.mass(t);
            if !(m > 0.0) {
                return Err(IntegrateError::Schedule(format!("mass {m} ≤ 0 at t = {t}")));
            }
            let dm = schedule.mass_rate(t);
            let k = schedule.stiffness(t);
            Ok([y[1], -(dm * y[1] + k * y[0]) / m])
        };
        self.solve(&rhs, initial, t_start, t_end)
    }

    /// Price/stock system with state `[P, S]`.
    pub fn econ(
        &self,
        econ: &EconConfig,
        initial: State,
        t_start: f64,
        t_end: f64,
    ) -> Result<OdeSolution, IntegrateError> {
        let rhs = |t: f64, y: &State| -> Result<State, IntegrateError> {
            let (dp, ds) = econ.dynamics(t, y[0], y[1]);
            if dp.is_finite() && ds.is_finite() {
                Ok([dp, ds])
            } else {
                Err(IntegrateError::NonFinite(t))
            }
        };
        self.solve(&rhs, initial, t_start, t_end)
    }
}

pub fn integrate_spring_reduced(
    config: &SpringConfig,
    initial: State,
    t_start: f64,
    t_end: f64,
    tol: f64,
) -> Result<OdeSolution, IntegrateError> {
    Integrator::new(tol)?.spring_reduced(config, initial, t_start, t_end)
}

pub fn integrate_spring_general(
    schedule: &MassStiffnessSchedule,
    initial: State,
    t_start: f64,
    t_end: f64,
    tol: f64,
) -> Result<OdeSolution, IntegrateError> {
    Integrator::new(tol)?.spring_general(schedule, initial, t_start, t_end)
}

pub fn integrate_econ(
    econ: &EconConfig,
    initial: State,
    t_start: f64,
    t_end: f64,
    tol: f64,
) -> Result<OdeSolution, IntegrateError> {
    Integrator::new(tol)?.econ(econ, initial, t_start, t_end)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Step {
    y_new: State,
    err: State,
    k: [State; 6],
    k7: State,
}

fn combine(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn dopri_step(rhs: &RhsFn<'_>, t: f64, y: &State, k1: &State, h: f64) -> Result<Step, IntegrateError> {
    let k2 = rhs(t + C2 * h, &combine(y, h, &[(A21, k1)]))?;
    let k3 = rhs(t + C3 * h, &combine(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = rhs(t + C4 * h, &combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = rhs(
        t + C5 * h,
        &combine(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = rhs(
        t + h,
        &combine(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    )?;
    let y_new = combine(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    if !y_new.iter().all(|v| v.is_finite()) {
        return Err(IntegrateError::NonFinite(t + h));
    }
    let k7 = rhs(t + h, &y_new)?;
    let mut err = [0.0; 2];
    for (i, e) in err.iter_mut().enumerate() {
        *e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok(Step {
        y_new,
        err,
        k: [*k1, k2, k3, k4, k5, k6],
        k7,
    })
}

fn dense_coefficients(y: &State, step: &Step, h: f64) -> [State; 5] {
    let [k1, _, k3, k4, k5, k6] = &step.k;
    let k7 = &step.k7;
    let mut r = [[0.0; 2]; 5];
    for i in 0..2 {
        let diff = step.y_new[i] - y[i];
        let bspl = h * k1[i] - diff;
        r[0][i] = y[i];
        r[1][i] = diff;
        r[2][i] = bspl;
        r[3][i] = diff - h * k7[i] - bspl;
        r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    r
}

fn error_norm(y: &State, y_new: &State, err: &State, atol: f64, rtol: f64) -> f64 {
    let sum: f64 = (0..2)
        .map(|i| {
            let sk = atol + rtol * y[i].abs().max(y_new[i].abs());
            (err[i] / sk).powi(2)
        })
        .sum();
    (sum / 2.0).sqrt()
}

fn initial_step(
    rhs: &RhsFn<'_>,
    t: f64,
    y: &State,
    f0: &State,
    atol: f64,
    rtol: f64,
) -> Result<f64, IntegrateError> {
    let h_max = MAX_RELATIVE_STEP * t;
    let sk: Vec<f64> = y.iter().map(|v| atol + rtol * v.abs()).collect();
    let dnf: f64 = (0..2).map(|i| (f0[i] / sk[i]).powi(2)).sum::<f64>() / 2.0;
    let dny: f64 = (0..2).map(|i| (y[i] / sk[i]).powi(2)).sum::<f64>() / 2.0;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6 * t
    } else {
        0.01 * (dny / dnf).sqrt()
    };
    h = h.min(h_max);
    let y1 = combine(y, h, &[(1.0, f0)]);
    let f1 = rhs(t + h, &y1)?;
    let der2 = ((0..2).map(|i| ((f1[i] - f0[i]) / sk[i]).powi(2)).sum::<f64>() / 2.0).sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (1e-6 * t).max(h * 1e-3)
    } else {
        (0.01 / der12).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(h_max))
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Time-dependent mass, mass rate and stiffness for the general spring.
///
/// Construction checks positivity on 16 probe points of the window and that
/// the supplied rate matches a central difference of the mass to 1e-6.
#[derive(Clone)]
pub struct MassStiffnessSchedule {
    mass: ScalarFn,
    mass_rate: ScalarFn,
    stiffness: ScalarFn,
    window: (f64, f64),
}

impl fmt::Debug for MassStiffnessSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MassStiffnessSchedule")
            .field("window", &self.window)
            .finish_non_exhaustive()
    }
}

const PROBES: usize = 16;

impl MassStiffnessSchedule {
    pub fn new<M, R, K>(mass: M, mass_rate: R, stiffness: K, window: (f64, f64)) -> Result<Self, IntegrateError>
    where
        M: Fn(f64) -> f64 + Send + Sync + 'static,
        R: Fn(f64) -> f64 + Send + Sync + 'static,
        K: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (lo, hi) = window;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(IntegrateError::InvalidWindow { t_start: lo, t_end: hi });
        }
        for i in 0..PROBES {
            let t = lo + (hi - lo) * (i as f64 + 0.5) / PROBES as f64;
            let m = mass(t);
            let k = stiffness(t);
            if !(m.is_finite() && m > 0.0) {
                return Err(IntegrateError::Schedule(format!("mass {m} not positive at t = {t}")));
            }
            if !(k.is_finite() && k > 0.0) {
                return Err(IntegrateError::Schedule(format!("stiffness {k} not positive at t = {t}")));
            }
            let step = (1e-5 * t).min(0.25 * (hi - lo) / PROBES as f64);
            let (a, b) = ((t - step).max(lo), (t + step).min(hi));
            let fd = (mass(b) - mass(a)) / (b - a);
            let rate = mass_rate(t);
            let scale = rate.abs().max(m / t);
            if !((fd - rate).abs() <= 1e-6 * scale) {
                return Err(IntegrateError::Schedule(format!(
                    "mass rate {rate} disagrees with finite difference {fd} at t = {t}"
                )));
            }
        }
        Ok(MassStiffnessSchedule {
            mass: Arc::new(mass),
            mass_rate: Arc::new(mass_rate),
            stiffness: Arc::new(stiffness),
            window,
        })
    }

    /// `m = m0·t/t0`, `k = k0·t0/t`: the reduced spring written in general form.
    pub fn linear_growth(config: &SpringConfig, window: (f64, f64)) -> Result<Self, IntegrateError> {
        let (m0, t0, k0) = (config.m0(), config.t0(), config.k0());
        Self::new(move |t| m0 * (t / t0), move |_| m0 / t0, move |t| k0 * (t0 / t), window)
    }

    pub fn constant(m0: f64, k0: f64, window: (f64, f64)) -> Result<Self, IntegrateError> {
        Self::new(move |_| m0, |_| 0.0, move |_| k0, window)
    }

    pub fn mass(&self, t: f64) -> f64 {
        (self.mass)(t)
    }
    pub fn mass_rate(&self, t: f64) -> f64 {
        (self.mass_rate)(t)
    }
    pub fn stiffness(&self, t: f64) -> f64 {
        (self.stiffness)(t)
    }
    pub fn window(&self) -> (f64, f64) {
        self.window
    }
}

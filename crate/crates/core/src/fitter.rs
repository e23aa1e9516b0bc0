//! Log-periodic curve fitting.
//!
//! The model is
//!
//! ```text
//! y(t) = C + env(t)·[A·sin(θ·ln((t + t_c)/t_ref)) + B·cos(θ·ln((t + t_c)/t_ref))]
//! ```
//!
//! For fixed `(θ, t_c)` it is linear in `(A, B, C)`, so the linear part is
//! profiled out with a column-pivoted Householder QR and only `θ` (and
//! optionally `t_c`) is searched: a uniform grid scan followed by
//! golden-section refinement around the best grid point. The objective is
//! strongly multimodal in `θ`, which is why the grid comes first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_FIT_SAMPLES: usize = 8;
pub const MIN_GRID_POINTS: usize = 400;
const SHIFT_GRID_POINTS: usize = 41;
const RANK_TOLERANCE: f64 = 1e-12;
const TIE_TOLERANCE: f64 = 1e-15;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid theta range ({lo}, {hi}): need 0 < lo < hi")]
    InvalidThetaRange { lo: f64, hi: f64 },
    #[error("theta grid must be positive and strictly increasing")]
    InvalidGrid,
    #[error("invalid reference time {0}")]
    InvalidReference(f64),
    #[error("design matrix is rank deficient for every trial θ")]
    Degenerate,
}

/// Sampled signal with strictly increasing positive times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    label: String,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, FitError> {
        if times.len() != values.len() {
            return Err(FitError::InvalidSeries(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(FitError::InvalidSeries(format!("time {t} is not positive and finite")));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(FitError::InvalidSeries(format!(
                "times not strictly increasing at {} → {}",
                w[0], w[1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(FitError::InvalidSeries(format!("non-finite value {v}")));
        }
        Ok(TimeSeries {
            times,
            values,
            label: String::new(),
        })
    }

    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self, FitError> {
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Multiplicative amplitude profile of the oscillating part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    /// Position-like series.
    #[default]
    Constant,
    /// `θ/t`, velocity-like series.
    InverseTime,
    /// `1/t²`, e.g. the stock rate `β(t)·(P − P*)` of the log-periodic market.
    InverseSquareTime,
}

impl Envelope {
    fn factor(self, theta: f64, t: f64) -> f64 {
        match self {
            Envelope::Constant => 1.0,
            Envelope::InverseTime => theta / t,
            Envelope::InverseSquareTime => 1.0 / (t * t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub envelope: Envelope,
    pub fit_shift: bool,
    /// Reference time of the phase; the first sample time when absent.
    pub t_ref: Option<f64>,
    /// θ grid size, raised to at least 400.
    pub grid_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            envelope: Envelope::Constant,
            fit_shift: false,
            t_ref: None,
            grid_points: MIN_GRID_POINTS,
        }
    }
}

impl FitOptions {
    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = envelope;
        self
    }
    pub fn with_shift(mut self, fit_shift: bool) -> Self {
        self.fit_shift = fit_shift;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPeriodicFit {
    pub amp_sin: f64,
    pub amp_cos: f64,
    pub theta: f64,
    pub t_ref: f64,
    pub t_shift: f64,
    pub offset: f64,
    pub envelope: Envelope,
    pub rms_residual: f64,
    pub theta_grid_resolution: f64,
}

impl LogPeriodicFit {
    pub fn predict(&self, t: f64) -> f64 {
        let ts = t + self.t_shift;
        let (s, c) = (self.theta * (ts.ln() - self.t_ref.ln())).sin_cos();
        self.offset + self.envelope.factor(self.theta, ts) * (self.amp_sin * s + self.amp_cos * c)
    }
}

/// Linear least-squares solution for one `(θ, t_c)`.
#[derive(Debug, Clone, Copy)]
struct Profile {
    theta: f64,
    /// `[C, A, B]`
    coef: [f64; 3],
    rss: f64,
}

/// Minimizes `‖X·β − y‖` for an `n×3` design using Householder QR with
/// column pivoting. Returns `None` when the numerical rank is below 3.
pub(crate) fn lstsq3(columns: [Vec<f64>; 3], y: &[f64]) -> Option<([f64; 3], f64)> {
    let mut a = columns;
    let mut rhs = y.to_vec();
    let n = rhs.len();
    if n < 3 {
        return None;
    }
    let mut perm = [0usize, 1, 2];
    let mut r_diag = [0.0f64; 3];
    let full_norm = a
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if full_norm == 0.0 {
        return None;
    }

    for k in 0..3 {
        // Pivot the remaining column of largest trailing norm into place.
        let tail_norm = |c: &Vec<f64>| c[k..].iter().map(|v| v * v).sum::<f64>();
        let p = (k..3)
            .max_by(|&i, &j| tail_norm(&a[i]).total_cmp(&tail_norm(&a[j])).then(j.cmp(&i)))
            .unwrap();
        a.swap(k, p);
        perm.swap(k, p);

        let norm = tail_norm(&a[k]).sqrt();
        if norm <= RANK_TOLERANCE * full_norm {
            return None;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        r_diag[k] = alpha;
        a[k][k] = alpha;
        for x in a[k][k + 1..].iter_mut() {
            *x = 0.0;
        }
        if vnorm2 == 0.0 {
            continue;
        }
        let reflect = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= f * vi;
            }
        };
        for col in a.iter_mut().skip(k + 1) {
            reflect(&mut col[k..]);
        }
        reflect(&mut rhs[k..]);
    }

    let mut z = [0.0f64; 3];
    for i in (0..3).rev() {
        let mut s = rhs[i];
        for j in i + 1..3 {
            s -= a[j][i] * z[j];
        }
        z[i] = s / r_diag[i];
    }
    let mut coef = [0.0f64; 3];
    for (k, &p) in perm.iter().enumerate() {
        coef[p] = z[k];
    }
    let rss = rhs[3..].iter().map(|v| v * v).sum();
    Some((coef, rss))
}

struct Problem<'a> {
    times: &'a [f64],
    values: &'a [f64],
    ln_ref: f64,
    envelope: Envelope,
}

impl Problem<'_> {
    fn profile(&self, theta: f64, shift: f64) -> Option<Profile> {
        let n = self.times.len();
        let mut sin_col = Vec::with_capacity(n);
        let mut cos_col = Vec::with_capacity(n);
        for &t in self.times {
            let ts = t + shift;
            let env = self.envelope.factor(theta, ts);
            let (s, c) = (theta * (ts.ln() - self.ln_ref)).sin_cos();
            sin_col.push(env * s);
            cos_col.push(env * c);
        }
        let (coef, rss) = lstsq3([vec![1.0; n], sin_col, cos_col], self.values)?;
        Some(Profile { theta, coef, rss })
    }

    fn total_ss(&self) -> f64 {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        self.values.iter().map(|v| (v - mean).powi(2)).sum()
    }

    /// Best θ for a fixed shift: grid scan then golden-section refinement.
    fn best_theta(&self, grid: &[f64], shift: f64, tie: f64) -> Option<Profile> {
        let scanned: Vec<Option<Profile>> = grid.par_iter().map(|&th| self.profile(th, shift)).collect();
        let (idx, _) = pick_best(scanned.iter().map(|p| p.map(|p| p.rss)), tie)?;
        let grid_best = scanned[idx]?;
        let lo = grid[idx.saturating_sub(1)];
        let hi = grid[(idx + 1).min(grid.len() - 1)];
        let refined = golden_section(lo, hi, |th| self.profile(th, shift).map_or(f64::INFINITY, |p| p.rss));
        match self.profile(refined, shift) {
            Some(p) if p.rss < grid_best.rss - tie => Some(p),
            _ => Some(grid_best),
        }
    }
}

/// Index of the smallest value; later entries must beat the incumbent by
/// more than `tie` to replace it, so ties go to the earliest entry.
fn pick_best(values: impl Iterator<Item = Option<f64>>, tie: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        let Some(v) = v else { continue };
        match best {
            Some((_, b)) if v >= b - tie => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

fn golden_section(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-9 * 0.5 * (a + b).abs() {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd { c } else { d }
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

fn check_range(lo: f64, hi: f64) -> Result<(), FitError> {
    if lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi {
        Ok(())
    } else {
        Err(FitError::InvalidThetaRange { lo, hi })
    }
}

/// Fits the log-periodic model, searching `θ` within `theta_range`.
pub fn fit(series: &TimeSeries, theta_range: (f64, f64), options: &FitOptions) -> Result<LogPeriodicFit, FitError> {
    let (lo, hi) = theta_range;
    check_range(lo, hi)?;
    if series.len() < MIN_FIT_SAMPLES {
        return Err(FitError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: series.len(),
        });
    }
    let t_ref = options.t_ref.unwrap_or(series.times[0]);
    if !(t_ref.is_finite() && t_ref > 0.0) {
        return Err(FitError::InvalidReference(t_ref));
    }
    let problem = Problem {
        times: &series.times,
        values: &series.values,
        ln_ref: t_ref.ln(),
        envelope: options.envelope,
    };
    let grid = uniform_grid(lo, hi, options.grid_points.max(MIN_GRID_POINTS));
    let tie = TIE_TOLERANCE * problem.total_ss();

    let (profile, shift) = if options.fit_shift {
        let t_min = series.times[0];
        let shifts = uniform_grid(-0.5 * t_min, 2.0 * t_min, SHIFT_GRID_POINTS);
        let scanned: Vec<Option<Profile>> = shifts.iter().map(|&s| problem.best_theta(&grid, s, tie)).collect();
        let (idx, _) = pick_best(scanned.iter().map(|p| p.map(|p| p.rss)), tie).ok_or(FitError::Degenerate)?;
        let (a, b) = (shifts[idx.saturating_sub(1)], shifts[(idx + 1).min(shifts.len() - 1)]);
        let grid_best = scanned[idx].unwrap();
        let refined = golden_section_abs(a, b, 1e-9 * t_min, |s| {
            problem.best_theta(&grid, s, tie).map_or(f64::INFINITY, |p| p.rss)
        });
        match problem.best_theta(&grid, refined, tie) {
            Some(p) if p.rss < grid_best.rss - tie => (p, refined),
            _ => (grid_best, shifts[idx]),
        }
    } else {
        (problem.best_theta(&grid, 0.0, tie).ok_or(FitError::Degenerate)?, 0.0)
    };

    let [offset, amp_sin, amp_cos] = profile.coef;
    Ok(LogPeriodicFit {
        amp_sin,
        amp_cos,
        theta: profile.theta,
        t_ref,
        t_shift: shift,
        offset,
        envelope: options.envelope,
        rms_residual: (profile.rss.max(0.0) / series.len() as f64).sqrt(),
        theta_grid_resolution: grid[1] - grid[0],
    })
}

/// Golden section with an absolute stopping width, for the shift search
/// whose interval straddles zero.
fn golden_section_abs(mut a: f64, mut b: f64, width: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > width {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd { c } else { d }
}

/// Fraction of the variance about the mean explained by the `(A, B, C)`
/// model at each `θ` of the grid (constant envelope, no shift, phase
/// referenced to the first sample). Values lie in `[0, 1]`.
pub fn log_time_periodogram(series: &TimeSeries, theta_grid: &[f64]) -> Result<Vec<f64>, FitError> {
    if series.len() < MIN_FIT_SAMPLES {
        return Err(FitError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: series.len(),
        });
    }
    if theta_grid.is_empty()
        || theta_grid.iter().any(|t| !(t.is_finite() && *t > 0.0))
        || theta_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(FitError::InvalidGrid);
    }
    let problem = Problem {
        times: &series.times,
        values: &series.values,
        ln_ref: series.times[0].ln(),
        envelope: Envelope::Constant,
    };
    let tss = problem.total_ss();
    Ok(theta_grid
        .par_iter()
        .map(|&th| match problem.profile(th, 0.0) {
            Some(p) if tss > 0.0 => (1.0 - p.rss / tss).clamp(0.0, 1.0),
            _ => 0.0,
        })
        .collect())
}

//! Invariant suites run by `logperiodic check`.

use logperiodic::econ::{self, EconConfig, MarketParams};
use logperiodic::fitter::{self, FitOptions, TimeSeries};
use logperiodic::integrator::Integrator;
use logperiodic::oscillator::SpringConfig;
use logperiodic::tsallis::{self, ProbabilityFactorization};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Oscillator,
    Econ,
    Tsallis,
    All,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = (&'static str, fn() -> Result<String, String>);

pub fn run(suite: Suite) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let groups: [(&'static str, Suite, &[Check]); 3] = [
        ("oscillator", Suite::Oscillator, OSCILLATOR),
        ("econ", Suite::Econ, ECON),
        ("tsallis", Suite::Tsallis, TSALLIS),
    ];
    for (label, which, checks) in groups {
        if suite != Suite::All && suite != which {
            continue;
        }
        for (name, f) in checks {
            let (passed, detail) = match f() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            out.push(CheckResult {
                suite: label,
                name,
                passed,
                detail,
            });
        }
    }
    out
}

pub fn render(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
    let mut s = format!("{:<10} {:<width$} {:<6} detail\n", "suite", "name", "status");
    for r in results {
        s.push_str(&format!(
            "{:<10} {:<width$} {:<6} {}\n",
            r.suite,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        ));
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    s.push_str(&format!("{} checks, {} failed\n", results.len(), failed));
    s
}

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn within(name: &str, value: f64, bound: f64) -> Result<String, String> {
    let msg = format!("{name} = {value:.3e} (bound {bound:.0e})");
    if value < bound { Ok(msg) } else { Err(msg) }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn spring() -> SpringConfig {
    SpringConfig::new(1.5, 2.0, 3.0, 0.8, 0.0).expect("valid spring")
}

const OSCILLATOR: &[Check] = &[
    ("k_m_product", || {
        let c = spring();
        let worst = log_grid(c.t0() / 10.0, 1000.0 * c.t0(), 500)
            .into_iter()
            .map(|t| {
                let p = c.stiffness_at(t).unwrap() * c.mass_at(t).unwrap();
                (p - c.k0() * c.m0()).abs() / (c.k0() * c.m0() * f64::EPSILON)
            })
            .fold(0.0, f64::max);
        within("max ulps", worst, 4.0 + 1e-9)
    }),
    ("euler_equation", || {
        let c = spring().with_amplitudes(0.8, -0.3).map_err(err)?;
        let mut worst = 0.0f64;
        for t in log_grid(c.t0(), 100.0 * c.t0(), 200) {
            let h = t * 1e-5;
            let x = |s: f64| c.position(s).unwrap();
            let d1 = (x(t + h) - x(t - h)) / (2.0 * h);
            let d2 = (x(t + h) - 2.0 * x(t) + x(t - h)) / (h * h);
            let r = t * t * d2 + t * d1 + c.theta().powi(2) * x(t);
            worst = worst.max(r.abs() / (c.theta().powi(2) * c.x0().abs()));
        }
        within("max scaled residual", worst, 1e-5)
    }),
    ("energy_law", || {
        let c = spring();
        let e0 = c.energy(c.t0()).unwrap() * c.t0();
        let worst = log_grid(c.t0(), 100.0 * c.t0(), 500)
            .into_iter()
            .map(|t| (c.energy(t).unwrap() * t / e0 - 1.0).abs())
            .fold(0.0, f64::max);
        within("max |E·t/(E0·t0) − 1|", worst, 1e-12)
    }),
    ("universal_relation", || {
        let c = spring();
        let worst = log_grid(c.t0(), 100.0 * c.t0(), 1000)
            .into_iter()
            .map(|t| c.universal_residual(t).unwrap().abs())
            .fold(0.0, f64::max);
        within("max residual", worst, 1e-12)
    }),
    ("scale_covariance", || {
        let c = spring();
        let scale = 3.7;
        let d = SpringConfig::new(c.m0(), scale * c.t0(), c.k0() / (scale * scale), c.x0(), c.x1()).map_err(err)?;
        let worst = log_grid(c.t0(), 50.0 * c.t0(), 200)
            .into_iter()
            .map(|t| (d.position(scale * t).unwrap() - c.position(t).unwrap()).abs())
            .fold(0.0, f64::max);
        within("max |Δx|", worst, 1e-12)
    }),
    ("log_periodicity", || {
        let c = spring();
        let period = (2.0 * PI / c.theta()).exp();
        let worst = log_grid(c.t0(), 50.0 * c.t0(), 200)
            .into_iter()
            .map(|t| (c.position(t * period).unwrap() - c.position(t).unwrap()).abs() / c.x0().abs())
            .fold(0.0, f64::max);
        within("max relative |Δx|", worst, 1e-12)
    }),
    ("mass_consistency", || {
        let mut worst = 0.0f64;
        for theta in [1.0, 2.0, 5.0] {
            let c = SpringConfig::with_theta(theta, 1.0, 0.0).map_err(err)?;
            for t in log_grid(1.0, 10.0, 100) {
                worst = worst.max(c.mass_consistency_residual(t).map_err(err)?.abs());
            }
        }
        within("max residual", worst, 1e-8)
    }),
    ("extremum_times", || {
        let c = spring();
        let ext = c.extremum_times(0, 6).map_err(err)?;
        let worst_x = ext
            .position
            .iter()
            .map(|&t| c.velocity(t).unwrap().abs() * t / (c.theta() * c.x0().abs()))
            .fold(0.0, f64::max);
        let worst_v = ext
            .velocity
            .iter()
            .map(|&t| c.acceleration(t).unwrap().abs() * t * t / (c.theta() * c.x0().abs()))
            .fold(0.0, f64::max);
        within("max scaled derivative", worst_x.max(worst_v), 1e-12)
    }),
    ("numeric_vs_closed_form", || {
        let c = SpringConfig::with_theta(2.0, 1.0, 0.0).map_err(err)?;
        let sol = Integrator::new(1e-10)
            .map_err(err)?
            .spring_reduced(&c, [0.0, 2.0], 1.0, 100.0)
            .map_err(err)?;
        let worst = sol
            .times()
            .iter()
            .zip(sol.states())
            .map(|(&t, s)| (s[0] - c.position(t).unwrap()).abs())
            .fold(0.0, f64::max);
        within("max |Δx|", worst, 1e-8)
    }),
];

fn market() -> MarketParams {
    MarketParams {
        gamma: 1.0,
        lambda: 1.0,
        ell0: 2.0,
        ell: 1.0,
        p_star: 100.0,
        d_star: 10.0,
    }
}

const ECON: &[Check] = &[
    ("bracket_identities", || {
        let cfg = EconConfig::log_periodic(market(), 2.0).map_err(err)?;
        let w = cfg.window().ok_or("missing window")?;
        let m = cfg.market();
        let mut worst = 0.0f64;
        for i in 1..100 {
            let t = w.lo + (w.hi - w.lo) * i as f64 / 100.0;
            let (d, q, b) = (cfg.d_o().eval(t), cfg.q_o().eval(t), cfg.beta(t).map_err(err)?);
            let lhs_d = m.lambda * m.ell * d;
            let rhs_d = m.gamma * b - 1.0 / t;
            let lhs_q = m.lambda * m.ell * q;
            let rhs_q = (m.gamma + m.lambda * m.ell) * b - 1.0 / t;
            worst = worst.max(((lhs_d - rhs_d) / rhs_d).abs()).max(((lhs_q - rhs_q) / rhs_q).abs());
            if !(d < 0.0 && q > 0.0) {
                return Err(format!("sign condition fails at t = {t}"));
            }
        }
        within("max relative error", worst, 1e-12)
    }),
    ("equilibrium_fixed_point", || {
        let cfg = EconConfig::log_periodic(market(), 2.0).map_err(err)?;
        let s_star = cfg.equilibrium_stock();
        let sol = Integrator::new(1e-10)
            .map_err(err)?
            .econ(&cfg, [100.0, s_star], 1.0, 10.0)
            .map_err(err)?;
        let drift = sol
            .states()
            .iter()
            .map(|s| (s[0] - 100.0).abs().max((s[1] - s_star).abs()))
            .fold(0.0, f64::max);
        within("max drift", drift, 1e-10)
    }),
    ("dictionary_constancy", || {
        let cfg = EconConfig::log_periodic(market(), 2.0).map_err(err)?;
        let thetas: Vec<f64> = (0..50)
            .map(|i| econ::to_mechanical(&cfg, 5.05 + 4.9 * i as f64 / 49.0).map(|m| m.theta))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let mean = thetas.iter().sum::<f64>() / 50.0;
        let var = thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / 50.0;
        within("variance", var, 1e-18)
    }),
    ("price_equation", || {
        let cfg = EconConfig::log_periodic(market(), 2.0).map_err(err)?;
        let init = cfg.log_periodic_initial_state(2.0, 1.0, 0.0, 5.05, 5.05).map_err(err)?;
        let sol = Integrator::new(1e-10)
            .map_err(err)?
            .with_samples_per_decade(2000)
            .econ(&cfg, init, 5.05, 9.95)
            .map_err(err)?;
        let rep = econ::verify_price_ode(&cfg, &sol).map_err(err)?;
        within("scaled max residual", rep.scaled_max, 1e-4)
    }),
    ("zero_crossing_spacing", || {
        let theta = 2.0;
        let cfg = EconConfig::log_periodic(market(), theta).map_err(err)?;
        let init = cfg.log_periodic_initial_state(theta, 1.0, 0.0, 1.0, 1.2).map_err(err)?;
        let sol = Integrator::new(1e-10)
            .map_err(err)?
            .econ(&cfg, init, 1.2, 1000.0)
            .map_err(err)?;
        let crossings = zero_crossings(&sol, 100.0);
        if crossings.len() < 3 {
            return Err(format!("only {} crossings", crossings.len()));
        }
        let expected = (PI / theta).exp();
        let worst = crossings
            .windows(2)
            .map(|w| (w[1] / w[0] / expected - 1.0).abs())
            .fold(0.0, f64::max);
        within("max relative ratio error", worst, 1e-3)
    }),
    ("simulated_fit", || {
        let cfg = EconConfig::log_periodic(market(), 2.0).map_err(err)?;
        let init = cfg.log_periodic_initial_state(2.0, 1.0, 0.0, 5.05, 5.05).map_err(err)?;
        let sol = Integrator::new(1e-10)
            .map_err(err)?
            .econ(&cfg, init, 5.05, 9.95)
            .map_err(err)?;
        let series = TimeSeries::new(sol.times().to_vec(), sol.first()).map_err(err)?;
        let f = fitter::fit(&series, (0.5, 10.0), &FitOptions::default()).map_err(err)?;
        within("|θ − 2|", (f.theta - 2.0).abs(), 1e-3)
    }),
];

/// Zero crossings of `P − P*` located by bisection on the dense output.
pub fn zero_crossings(sol: &logperiodic::OdeSolution, p_star: f64) -> Vec<f64> {
    let dev = |t: f64| sol.evaluate(t).map(|s| s[0] - p_star).unwrap_or(f64::NAN);
    let mut out = Vec::new();
    for w in sol.times().windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (mut fa, fb) = (dev(a), dev(b));
        if fa == 0.0 || fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = dev(m);
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

const TSALLIS: &[Check] = &[
    ("factorization_invariance", || {
        let mu = vec![0.2, 0.3, 0.5];
        let nu = vec![1.5, 1.0, 0.8];
        let pf = ProbabilityFactorization::new(mu.clone(), nu.clone()).map_err(err)?;
        let c = 2.5f64;
        let scaled = ProbabilityFactorization::new(
            mu.iter().map(|m| m * c).collect(),
            nu.iter().map(|n| n / c).collect(),
        )
        .map_err(err)?;
        let (a, b) = (tsallis::thermo(&pf), tsallis::thermo(&scaled));
        let shift = c.ln();
        let worst = (a.entropy_reduced - b.entropy_reduced)
            .abs()
            .max((b.helmholtz_reduced - a.helmholtz_reduced - shift).abs())
            .max((b.internal_reduced - a.internal_reduced - shift).abs());
        within("max deviation", worst, 1e-12)
    }),
    ("helmholtz_identity", || {
        let pf = ProbabilityFactorization::new(vec![0.5, 0.5], vec![0.6, 1.4]).map_err(err)?;
        let r = tsallis::thermo(&pf);
        within(
            "|A − (E − S)|",
            (r.helmholtz_reduced - (r.internal_reduced - r.entropy_reduced)).abs(),
            1e-12,
        )
    }),
    ("shannon_limit", || {
        let p = [0.1, 0.2, 0.3, 0.4];
        let h = tsallis::shannon_entropy(&p).map_err(err)?;
        let mut worst = 0.0f64;
        for q in [1.0 - 1e-6, 1.0 + 1e-6] {
            worst = worst.max((tsallis::tsallis_entropy(&p, q).map_err(err)? - h).abs());
        }
        within("max |S_q − S_1|", worst, 1e-5)
    }),
    ("pseudo_additivity", || {
        let p = [0.2, 0.5, 0.3];
        let r = [0.1, 0.4, 0.25, 0.25];
        let joint: Vec<f64> = p.iter().flat_map(|a| r.iter().map(move |b| a * b)).collect();
        let mut worst = 0.0f64;
        for q in [0.5, 2.0, 3.0] {
            let sp = tsallis::tsallis_entropy(&p, q).map_err(err)?;
            let sr = tsallis::tsallis_entropy(&r, q).map_err(err)?;
            let sj = tsallis::tsallis_entropy(&joint, q).map_err(err)?;
            worst = worst.max((sj - (sp + sr + (1.0 - q) * sp * sr)).abs());
        }
        within("max deviation", worst, 1e-10)
    }),
    ("entropic_term_identity", || {
        let p = [0.05, 0.15, 0.3, 0.5];
        let mut worst = 0.0f64;
        for q in [2.0, 3.0, 5.0] {
            let s = tsallis::tsallis_entropy(&p, q).map_err(err)?;
            let term = tsallis::entropic_term(&p, q).map_err(err)?;
            worst = worst.max((s - (1.0 / (q - 1.0) - term)).abs());
        }
        within("max deviation", worst, 1e-12)
    }),
    ("demand_correspondence", || {
        let cfg = EconConfig::log_periodic(market(), 2.0).map_err(err)?;
        let spring = SpringConfig::new(1.0, 1.0, 4.0, 1.0, 0.0).map_err(err)?;
        let mut worst = 0.0f64;
        for t in [5.5, 6.5, 7.5, 8.5, 9.5] {
            for x in [-2.0, -0.5, 1.0, 3.0] {
                let d = cfg.demand(100.0 + x, t).map_err(err)?;
                let lhs = tsallis::demand_correspondence_lhs(&cfg, &spring, d, t).map_err(err)?;
                let expected = -0.5 * (spring.k0() * spring.t0() * x / t).powi(2);
                worst = worst.max(((lhs - expected) / expected).abs());
            }
        }
        within("max relative deviation", worst, 1e-12)
    }),
];

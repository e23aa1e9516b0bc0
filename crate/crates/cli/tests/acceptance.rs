//! End-to-end acceptance suite: one PASS/FAIL line per criterion, non-zero
//! exit status when any criterion fails.

use logperiodic::econ::{self, construct_coefficients, EconConfig, MarketParams};
use logperiodic::fitter::{fit, Envelope, FitOptions, TimeSeries};
use logperiodic::integrator::{integrate_econ, integrate_spring_reduced, Integrator, OdeSolution};
use logperiodic::oscillator::SpringConfig;
use logperiodic::tsallis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;
use std::process::{Command, Stdio};
use std::time::Instant;

type Outcome = Result<String, String>;

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n)
        .map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect();
    out[0] = a;
    out[n - 1] = b;
    out
}

fn bound(name: &str, value: f64, limit: f64) -> Outcome {
    let msg = format!("{name} = {value:.3e} < {limit:.0e}");
    if value < limit { Ok(msg) } else { Err(msg) }
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let failed = parts.iter().any(|p| p.is_err());
    let text = parts
        .into_iter()
        .map(|p| p.unwrap_or_else(|e| e))
        .collect::<Vec<_>>()
        .join("; ");
    if failed { Err(text) } else { Ok(text) }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

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

fn closed_form_vs_numeric() -> Outcome {
    let spring = SpringConfig::with_theta(2.0, 1.0, 0.0).map_err(e)?;
    let t0 = spring.t0();
    let start = Instant::now();
    let initial = [spring.position(t0).map_err(e)?, spring.velocity(t0).map_err(e)?];
    let sol = integrate_spring_reduced(&spring, initial, t0, 100.0 * t0, 1e-10).map_err(e)?;
    let elapsed = start.elapsed().as_secs_f64();
    let worst = sol
        .times()
        .iter()
        .zip(sol.states())
        .map(|(&t, s)| (s[0] - spring.position(t).unwrap()).abs() / spring.x0().abs())
        .fold(0.0, f64::max);
    all(vec![bound("max relative deviation", worst, 1e-8), bound("runtime s", elapsed, 1.0)])
}

fn spring_trajectory(x1: f64) -> Result<(SpringConfig, OdeSolution), String> {
    let spring = SpringConfig::new(1.5, 2.0, 3.0, 0.8, x1).map_err(e)?;
    let t0 = spring.t0();
    let initial = [spring.position(t0).map_err(e)?, spring.velocity(t0).map_err(e)?];
    let sol = integrate_spring_reduced(&spring, initial, t0, 100.0 * t0, 1e-10).map_err(e)?;
    Ok((spring, sol))
}

fn energy_law() -> Outcome {
    let (spring, sol) = spring_trajectory(-0.4)?;
    let t0 = spring.t0();
    let e0 = spring.energy(t0).map_err(e)? * t0;
    let analytic = log_grid(t0, 100.0 * t0, 1000)
        .into_iter()
        .map(|t| (spring.energy(t).unwrap() * t / e0 - 1.0).abs())
        .fold(0.0, f64::max);
    let numeric = sol
        .times()
        .iter()
        .zip(sol.states())
        .map(|(&t, s)| {
            let energy = 0.5 * spring.mass_at(t).unwrap() * s[1] * s[1] + 0.5 * spring.stiffness_at(t).unwrap() * s[0] * s[0];
            (energy * t / e0 - 1.0).abs()
        })
        .fold(0.0, f64::max);
    all(vec![bound("analytic", analytic, 1e-12), bound("numeric", numeric, 1e-7)])
}

/// The relation holds for trajectories with `x1 = 0`.
fn universal_relation() -> Outcome {
    let (spring, sol) = spring_trajectory(0.0)?;
    let t0 = spring.t0();
    let analytic = log_grid(t0, 100.0 * t0, 1000)
        .into_iter()
        .map(|t| spring.universal_residual(t).unwrap().abs())
        .fold(0.0, f64::max);
    let numeric = sol
        .times()
        .iter()
        .zip(sol.states())
        .map(|(&t, s)| spring.universal_residual_of(t, s[0], s[1]).unwrap().abs())
        .fold(0.0, f64::max);
    all(vec![bound("analytic", analytic, 1e-12), bound("simulated", numeric, 1e-7)])
}

fn mass_consistency() -> Outcome {
    let mut worst = 0.0f64;
    for theta in [1.0, 2.0, 5.0] {
        let spring = SpringConfig::with_theta(theta, 1.0, 0.0).map_err(e)?;
        for t in log_grid(1.0, 10.0, 200) {
            worst = worst.max(spring.mass_consistency_residual(t).map_err(e)?.abs());
        }
    }
    bound("max |ln(m_t/m0) − ln(t/t0)|", worst, 1e-8)
}

/// Constructed-coefficient market integrated across its validity window.
fn econ_trajectory(samples_per_decade: usize) -> Result<(EconConfig, OdeSolution), String> {
    let m = market();
    let family = construct_coefficients(m.gamma, m.lambda, m.ell, 2.0).map_err(e)?;
    let (lo, hi) = (family.window.lo, family.window.hi);
    if (lo, hi) != (5.0, 10.0) {
        return Err(format!("window ({lo}, {hi}) instead of (5, 10)"));
    }
    let cfg = EconConfig::new(m, family.d_o, family.q_o, Some(family.window)).map_err(e)?;
    let (start, end) = (lo + 0.05, hi - 0.05);
    let initial = cfg.log_periodic_initial_state(2.0, 1.0, 0.0, start, start).map_err(e)?;
    let sol = Integrator::new(1e-10)
        .map_err(e)?
        .with_samples_per_decade(samples_per_decade)
        .econ(&cfg, initial, start, end)
        .map_err(e)?;
    Ok((cfg, sol))
}

fn economic_log_periodicity() -> Outcome {
    let start = Instant::now();
    let (cfg, sol) = econ_trajectory(64)?;
    let times = sol.times().to_vec();
    let p_star = cfg.market().p_star;
    let price: Vec<f64> = sol.first().iter().map(|p| p - p_star).collect();
    let stock_rate: Vec<f64> = sol
        .states()
        .iter()
        .zip(&times)
        .map(|(s, &t)| cfg.stock_rate(s[0], t).unwrap())
        .collect();
    let price_fit = fit(&TimeSeries::new(times.clone(), price).map_err(e)?, (0.5, 10.0), &FitOptions::default())
        .map_err(e)?;
    let rate_fit = fit(
        &TimeSeries::new(times, stock_rate).map_err(e)?,
        (0.5, 10.0),
        &FitOptions::default().with_envelope(Envelope::InverseSquareTime),
    )
    .map_err(e)?;
    let elapsed = start.elapsed().as_secs_f64();
    all(vec![
        bound("price |θ − 2|", (price_fit.theta - 2.0).abs(), 1e-3),
        bound("stock-rate |θ − 2|", (rate_fit.theta - 2.0).abs(), 1e-3),
        bound("runtime s", elapsed, 5.0),
    ])
}

fn price_ode_residual() -> Outcome {
    let (cfg, sol) = econ_trajectory(2000)?;
    let report = econ::verify_price_ode(&cfg, &sol).map_err(e)?;
    bound("scaled max residual", report.scaled_max, 1e-4)
}

fn dictionary_extraction() -> Outcome {
    let m = market();
    let mut worst = 0.0f64;
    for theta in [0.7, 2.0, 4.5] {
        let cfg = EconConfig::log_periodic(m, theta).map_err(e)?;
        let w = cfg.window().ok_or("no window")?;
        for i in 1..50 {
            let t_ref = w.lo + (w.hi - w.lo) * i as f64 / 50.0;
            let got = econ::to_mechanical(&cfg, t_ref).map_err(e)?.theta;
            worst = worst.max((got - theta).abs());
        }
    }
    bound("max |θ(t_ref) − θ|", worst, 1e-10)
}

fn fitter_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut clean, mut noisy) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let theta = rng.random_range(0.5..10.0);
        let a = rng.random_range(-2.0..2.0);
        let b = rng.random_range(-2.0..2.0);
        let times = log_grid(1.0, 1000.0, 400);
        let model = |t: f64| {
            let (s, c) = (theta * t.ln()).sin_cos();
            a * s + b * c
        };
        let values: Vec<f64> = times.iter().map(|&t| model(t)).collect();
        let f = fit(&TimeSeries::new(times.clone(), values.clone()).map_err(e)?, (0.5, 10.0), &FitOptions::default())
            .map_err(e)?;
        let scale = a.abs().max(b.abs());
        clean = clean
            .max(((f.theta - theta) / theta).abs())
            .max((f.amp_sin - a).abs() / scale)
            .max((f.amp_cos - b).abs() / scale);

        let amplitude = a.hypot(b);
        let noise = Normal::new(0.0, 0.01 * amplitude).map_err(e)?;
        let perturbed: Vec<f64> = values.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let f = fit(&TimeSeries::new(times, perturbed).map_err(e)?, (0.5, 10.0), &FitOptions::default())
            .map_err(e)?;
        noisy = noisy.max(((f.theta - theta) / theta).abs());
    }
    all(vec![bound("noiseless relative", clean, 1e-6), bound("1% noise relative θ", noisy, 1e-2)])
}

fn zero_crossings(sol: &OdeSolution, level: f64) -> Vec<f64> {
    let dev = |t: f64| sol.evaluate(t).map(|s| s[0] - level).unwrap_or(f64::NAN);
    let mut out = Vec::new();
    for w in sol.times().windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let fa = dev(a);
        if fa == 0.0 || fa.signum() == dev(b).signum() {
            continue;
        }
        while b - a > 1e-14 * b {
            let mid = 0.5 * (a + b);
            if dev(mid).signum() == fa.signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// The validity window holds under half an oscillation, so the trajectory
/// is continued past it (the ODE itself has no singularity there).
fn log_periodic_spacing() -> Outcome {
    let theta = 2.0;
    let cfg = EconConfig::log_periodic(market(), theta).map_err(e)?;
    let initial = cfg.log_periodic_initial_state(theta, 1.0, 0.0, 1.0, 1.2).map_err(e)?;
    let sol = integrate_econ(&cfg, initial, 1.2, 1000.0, 1e-10).map_err(e)?;
    let crossings = zero_crossings(&sol, cfg.market().p_star);
    if crossings.len() < 3 {
        return Err(format!("only {} zero crossings", crossings.len()));
    }
    let expected = (PI / theta).exp();
    let worst = crossings
        .windows(2)
        .map(|w| (w[1] / w[0] / expected - 1.0).abs())
        .fold(0.0, f64::max);
    bound(&format!("{} crossings, max ratio error", crossings.len()), worst, 1e-3)
}

fn tsallis_identities() -> Outcome {
    let p = [0.1, 0.2, 0.3, 0.4];
    let h = tsallis::shannon_entropy(&p).map_err(e)?;
    let mut limit = 0.0f64;
    for q in [1.0 - 1e-6, 1.0 + 1e-6] {
        limit = limit.max((tsallis::tsallis_entropy(&p, q).map_err(e)? - h).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut random = |n: usize| {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        p[n - 1] = 1.0 - p[..n - 1].iter().sum::<f64>();
        p
    };
    let (mut additivity, mut identity) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let (a, b) = (random(3), random(4));
        let joint: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        for q in [0.5, 2.0, 3.0] {
            let (sa, sb) = (tsallis::tsallis_entropy(&a, q).map_err(e)?, tsallis::tsallis_entropy(&b, q).map_err(e)?);
            let sj = tsallis::tsallis_entropy(&joint, q).map_err(e)?;
            additivity = additivity.max((sj - (sa + sb + (1.0 - q) * sa * sb)).abs());
        }
        for q in [2.0, 3.0, 5.0] {
            let s = tsallis::tsallis_entropy(&joint, q).map_err(e)?;
            let term = tsallis::entropic_term(&joint, q).map_err(e)?;
            identity = identity.max((s - (1.0 / (q - 1.0) - term)).abs());
        }
    }
    let uniform = tsallis::tsallis_entropy(&[0.25; 4], 2.0).map_err(e)?;
    all(vec![
        bound("shannon limit", limit, 1e-5),
        bound("pseudo-additivity", additivity, 1e-10),
        bound("entropic-term identity", identity, 1e-12),
        bound("|S_2(uniform 4) − 0.75|", (uniform - 0.75).abs(), 2.0 * f64::EPSILON),
    ])
}

fn correspondence_reduction() -> Outcome {
    let mut worst = 0.0f64;
    for theta in [1.0, 2.0, 3.0] {
        let cfg = EconConfig::log_periodic(market(), theta).map_err(e)?;
        let spring = SpringConfig::new(1.0, 1.5, (theta / 1.5f64).powi(2), 1.0, 0.0).map_err(e)?;
        let w = cfg.window().ok_or("no window")?;
        for i in 1..20 {
            let t = w.lo + (w.hi - w.lo) * i as f64 / 20.0;
            for x in [-3.0, -0.7, 0.4, 2.5] {
                let demand = cfg.demand(cfg.market().p_star + x, t).map_err(e)?;
                let lhs = tsallis::demand_correspondence_lhs(&cfg, &spring, demand, t).map_err(e)?;
                let expected = -0.5 * (spring.k0() * spring.t0() * x / t).powi(2);
                worst = worst.max(((lhs - expected) / expected).abs());
            }
        }
    }
    bound("max relative deviation", worst, 1e-12)
}

fn run(args: &[&str], stdin: Option<&[u8]>) -> Result<(i32, Vec<u8>), String> {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_logperiodic"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(e)?;
    let mut pipe = child.stdin.take().ok_or("no stdin")?;
    pipe.write_all(stdin.unwrap_or_default()).map_err(e)?;
    drop(pipe);
    let out = child.wait_with_output().map_err(e)?;
    Ok((out.status.code().unwrap_or(-1), out.stdout))
}

fn cli_end_to_end() -> Outcome {
    let spring_args = ["spring", "--t-end", "1000", "--points", "400"];
    let (code, csv) = run(&spring_args, None)?;
    if code != 0 {
        return Err(format!("spring exited {code}"));
    }
    let (code, report) = run(&["fit"], Some(&csv))?;
    if code != 0 {
        return Err(format!("fit exited {code}"));
    }
    let json: serde_json::Value = serde_json::from_slice(&report).map_err(e)?;
    let theta = json["theta"].as_f64().ok_or("no theta in report")?;

    let (check_code, _) = run(&["check", "all"], None)?;
    let stable_csv = run(&spring_args, None)?.1 == csv;
    let stable_json = run(&["fit"], Some(&csv))?.1 == report;
    let mut parts = vec![bound("pipeline |θ − 2|", (theta - 2.0).abs(), 1e-6)];
    parts.push(if check_code == 0 {
        Ok("check all exit 0".into())
    } else {
        Err(format!("check all exit {check_code}"))
    });
    parts.push(if stable_csv && stable_json {
        Ok("byte-stable".into())
    } else {
        Err(format!("byte-stable csv {stable_csv}, json {stable_json}"))
    });
    all(parts)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("closed-form vs numeric", closed_form_vs_numeric),
        ("energy law", energy_law),
        ("universal relation", universal_relation),
        ("mass self-consistency", mass_consistency),
        ("economic log-periodicity", economic_log_periodicity),
        ("price-ODE residual", price_ode_residual),
        ("dictionary extraction", dictionary_extraction),
        ("fitter round trip", fitter_round_trip),
        ("log-periodic spacing", log_periodic_spacing),
        ("Tsallis identities", tsallis_identities),
        ("correspondence reduction", correspondence_reduction),
        ("CLI end-to-end", cli_end_to_end),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} criteria, {failures} failed", criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

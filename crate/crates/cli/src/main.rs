//! `logperiodic` command-line front end.
//!
//! Data goes to standard output (or `--output`), diagnostics to standard
//! error. Exit codes: 0 success, 2 usage/input error, 3 numerical failure,
//! 4 fit failure.

mod checks;
mod config;
mod io;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{MassSchedule, RunConfig, Spacing};
use logperiodic::econ::EconConfig;
use logperiodic::fitter::{self, Envelope, FitError, FitOptions};
use logperiodic::integrator::{Integrator, MassStiffnessSchedule, MAX_TOLERANCE, MIN_TOLERANCE};
use logperiodic::oscillator::{SpringConfig, SpringParams};
use logperiodic::{tsallis, OdeSolution};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_FIT: u8 = 4;

const DEFAULT_T_END: f64 = 100.0;
const DEFAULT_POINTS: usize = 256;
const DEFAULT_TOL: f64 = 1e-10;
const DEFAULT_THETA_RANGE: (f64, f64) = (0.5, 10.0);

#[derive(Debug, Parser)]
#[command(name = "logperiodic", version, about = "Log-periodic oscillators, markets and fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form spring trajectory as CSV `t,x,v,m,k,omega,energy`.
    Spring(SpringArgs),
    /// Numerical integration as CSV `t,x,v` or `t,P,S`.
    Simulate(SimulateArgs),
    /// Fit a log-periodic model to a CSV series; JSON report.
    Fit(FitArgs),
    /// Run an invariant suite and print a pass/fail table.
    Check(CheckArgs),
    /// Tsallis and Shannon entropies of a single-column probability CSV.
    Entropy(EntropyArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write data here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    t_start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_enum)]
    spacing: Option<Spacing>,
}

#[derive(Debug, Args)]
struct SpringArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimKind {
    SpringReduced,
    SpringGeneral,
    Econ,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "spring-reduced")]
    kind: SimKind,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EnvelopeArg {
    Constant,
    InverseTime,
    InverseSquareTime,
}

impl From<EnvelopeArg> for Envelope {
    fn from(e: EnvelopeArg) -> Self {
        match e {
            EnvelopeArg::Constant => Envelope::Constant,
            EnvelopeArg::InverseTime => Envelope::InverseTime,
            EnvelopeArg::InverseSquareTime => Envelope::InverseSquareTime,
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// CSV file; standard input when absent or `-`.
    input: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    theta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta_max: Option<f64>,
    #[arg(long, value_enum)]
    envelope: Option<EnvelopeArg>,
    /// Also fit a time-origin shift.
    #[arg(long)]
    fit_shift: bool,
    /// Value column (default: the first non-`t` column).
    #[arg(long)]
    column: Option<String>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(value_enum)]
    suite: checks::Suite,
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EntropyArgs {
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    input: Option<PathBuf>,
    /// Entropic index (must differ from 1).
    #[arg(long, allow_negative_numbers = true)]
    q: f64,
}

/// A failed command: exit code plus message for standard error.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn numeric(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_NUMERIC,
        message: message.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Spring(a) => cmd_spring(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Check(a) => cmd_check(a),
        Command::Entropy(a) => cmd_entropy(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(usage),
        None => Ok(RunConfig {
            spec_version: config::SCHEMA_VERSION,
            ..RunConfig::default()
        }),
    }
}

fn emit(output: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    use std::io::Write;
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| usage(format!("cannot write output: {e}")))
        }
    }
}

fn spring_from(cfg: &RunConfig) -> Result<SpringConfig, Failure> {
    let params = cfg.spring.unwrap_or(SpringParams {
        m0: 1.0,
        t0: 1.0,
        k0: 4.0,
        x0: 1.0,
        x1: 0.0,
    });
    SpringConfig::try_from(params).map_err(|e| usage(e.to_string()))
}

struct Grid {
    t_start: f64,
    t_end: f64,
    points: usize,
    spacing: Spacing,
}

impl Grid {
    fn resolve(args: &GridArgs, cfg: &RunConfig, default_start: f64) -> Result<Self, Failure> {
        let sec = &cfg.integrate;
        let g = Grid {
            t_start: args.t_start.or(sec.t_start).unwrap_or(default_start),
            t_end: args.t_end.or(sec.t_end).unwrap_or(DEFAULT_T_END),
            points: args.points.or(sec.points).unwrap_or(DEFAULT_POINTS),
            spacing: args.spacing.or(sec.spacing).unwrap_or_default(),
        };
        if !(g.t_start.is_finite() && g.t_start > 0.0) {
            return Err(usage(format!("t_start must be positive and finite, got {}", g.t_start)));
        }
        if !g.t_end.is_finite() {
            return Err(usage(format!("t_end must be finite, got {}", g.t_end)));
        }
        if g.points == 0 {
            return Err(usage("points must be at least 1"));
        }
        if g.points > 1 && g.t_end <= g.t_start {
            return Err(usage(format!("t_end ({}) must exceed t_start ({})", g.t_end, g.t_start)));
        }
        Ok(g)
    }

    fn times(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.t_start];
        }
        let n = (self.points - 1) as f64;
        let mut out: Vec<f64> = (0..self.points)
            .map(|i| {
                let f = i as f64 / n;
                match self.spacing {
                    Spacing::Linear => self.t_start + (self.t_end - self.t_start) * f,
                    Spacing::Log => (self.t_start.ln() + (self.t_end.ln() - self.t_start.ln()) * f).exp(),
                }
            })
            .collect();
        // Pin the endpoints exactly.
        out[0] = self.t_start;
        *out.last_mut().unwrap() = self.t_end;
        out
    }
}

fn cmd_spring(args: SpringArgs) -> Result<u8, Failure> {
    let cfg = load_config(args.common.config.as_ref())?;
    let spring = spring_from(&cfg)?;
    let grid = Grid::resolve(&args.grid, &cfg, spring.t0())?;
    let mut rows = Vec::with_capacity(grid.points);
    for t in grid.times() {
        let s = spring.state(t).map_err(numeric)?;
        rows.push(vec![t, s.x, s.v, s.m, s.k, s.omega, s.energy]);
    }
    let text = io::render_csv(&["t", "x", "v", "m", "k", "omega", "energy"], rows);
    emit(args.common.output.as_ref(), &text)?;
    Ok(0)
}

fn econ_from(cfg: &RunConfig) -> Result<EconConfig, Failure> {
    let spec = cfg
        .econ
        .ok_or_else(|| usage("simulate --kind econ needs an `econ` section in --config"))?;
    EconConfig::try_from(spec).map_err(|e| usage(e.to_string()))
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, Failure> {
    let cfg = load_config(args.common.config.as_ref())?;
    let tol = args.tol.or(cfg.integrate.tol).unwrap_or(DEFAULT_TOL);
    if !(MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tol) {
        return Err(usage(format!(
            "tol must lie in [{MIN_TOLERANCE:e}, {MAX_TOLERANCE:e}], got {tol:e}"
        )));
    }
    let integrator = Integrator::new(tol).map_err(|e| usage(e.to_string()))?;

    let (header, solution, grid): ([&str; 3], OdeSolution, Grid) = match args.kind {
        SimKind::SpringReduced | SimKind::SpringGeneral => {
            let spring = spring_from(&cfg)?;
            let grid = Grid::resolve(&args.grid, &cfg, spring.t0())?;
            let initial = match cfg.integrate.initial {
                Some(s) => s,
                None => [
                    spring.position(grid.t_start).map_err(numeric)?,
                    spring.velocity(grid.t_start).map_err(numeric)?,
                ],
            };
            let t_end = grid_end(&grid);
            let sol = if args.kind == SimKind::SpringReduced {
                integrator.spring_reduced(&spring, initial, grid.t_start, t_end)
            } else {
                let window = (grid.t_start, t_end);
                let schedule = match cfg.integrate.mass_schedule.unwrap_or_default() {
                    MassSchedule::LinearGrowth => MassStiffnessSchedule::linear_growth(&spring, window),
                    MassSchedule::Constant => MassStiffnessSchedule::constant(spring.m0(), spring.k0(), window),
                }
                .map_err(|e| usage(e.to_string()))?;
                integrator.spring_general(&schedule, initial, grid.t_start, t_end)
            }
            .map_err(numeric)?;
            (["t", "x", "v"], sol, grid)
        }
        SimKind::Econ => {
            let econ = econ_from(&cfg)?;
            let default_start = econ.window().map(|w| w.lo).unwrap_or(1.0);
            let grid = Grid::resolve(&args.grid, &cfg, default_start)?;
            let initial = match cfg.integrate.initial {
                Some(s) => s,
                None => default_econ_initial(&econ, &cfg, grid.t_start)?,
            };
            let sol = integrator
                .econ(&econ, initial, grid.t_start, grid_end(&grid))
                .map_err(numeric)?;
            (["t", "P", "S"], sol, grid)
        }
    };

    let mut rows = Vec::with_capacity(grid.points);
    for t in grid.times() {
        let s = solution
            .evaluate(t)
            .ok_or_else(|| numeric(format!("no dense output at t = {t}")))?;
        rows.push(vec![t, s[0], s[1]]);
    }
    emit(args.common.output.as_ref(), &io::render_csv(&header, rows))?;
    Ok(0)
}

/// A single-point grid still needs a non-empty integration window.
fn grid_end(grid: &Grid) -> f64 {
    if grid.points == 1 && grid.t_end <= grid.t_start {
        grid.t_start * (1.0 + 1e-9)
    } else {
        grid.t_end
    }
}

/// Unit-amplitude log-periodic state for the log-periodic family, the
/// equilibrium otherwise.
fn default_econ_initial(econ: &EconConfig, cfg: &RunConfig, t_start: f64) -> Result<[f64; 2], Failure> {
    use logperiodic::econ::CoefficientSpec;
    match cfg.econ.as_ref().map(|s| &s.coefficients) {
        Some(CoefficientSpec::LogPeriodic { theta }) => econ
            .log_periodic_initial_state(*theta, 1.0, 0.0, t_start, t_start)
            .map_err(|e| usage(e.to_string())),
        _ => Ok([econ.market().p_star, econ.equilibrium_stock()]),
    }
}

#[derive(Serialize)]
struct FitReport {
    theta: f64,
    amp_sin: f64,
    amp_cos: f64,
    offset: f64,
    t_ref: f64,
    t_shift: f64,
    envelope: Envelope,
    rms_residual: f64,
}

fn read_input(path: Option<&PathBuf>) -> Result<Box<dyn std::io::Read>, Failure> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::File::open(p)
            .map(|f| Box::new(f) as Box<dyn std::io::Read>)
            .map_err(|e| usage(format!("cannot open {}: {e}", p.display()))),
        _ => Ok(Box::new(std::io::stdin())),
    }
}

fn cmd_fit(args: FitArgs) -> Result<u8, Failure> {
    let cfg = load_config(args.common.config.as_ref())?;
    let sec = &cfg.fit;
    let column = args.column.clone().or_else(|| sec.column.clone());
    let series = io::read_series(read_input(args.input.as_ref())?, column.as_deref()).map_err(usage)?;
    let lo = args.theta_min.or(sec.theta_min).unwrap_or(DEFAULT_THETA_RANGE.0);
    let hi = args.theta_max.or(sec.theta_max).unwrap_or(DEFAULT_THETA_RANGE.1);
    let mut options = FitOptions {
        envelope: args.envelope.map(Envelope::from).or(sec.envelope).unwrap_or_default(),
        fit_shift: args.fit_shift || sec.fit_shift.unwrap_or(false),
        t_ref: sec.t_ref,
        ..FitOptions::default()
    };
    if let Some(n) = sec.grid_points {
        options.grid_points = n;
    }
    let fit = fitter::fit(&series, (lo, hi), &options).map_err(|e| match e {
        FitError::Degenerate => Failure {
            code: EXIT_FIT,
            message: e.to_string(),
        },
        other => usage(other.to_string()),
    })?;
    let report = FitReport {
        theta: fit.theta,
        amp_sin: fit.amp_sin,
        amp_cos: fit.amp_cos,
        offset: fit.offset,
        t_ref: fit.t_ref,
        t_shift: fit.t_shift,
        envelope: fit.envelope,
        rms_residual: fit.rms_residual,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(numeric)?;
    text.push('\n');
    emit(args.common.output.as_ref(), &text)?;
    Ok(0)
}

fn cmd_check(args: CheckArgs) -> Result<u8, Failure> {
    let results = checks::run(args.suite);
    emit(args.output.as_ref(), &checks::render(&results))?;
    Ok(if results.iter().all(|r| r.passed) { 0 } else { EXIT_NUMERIC })
}

#[derive(Serialize)]
struct EntropyReport {
    q: f64,
    tsallis: f64,
    entropic_term: f64,
    shannon: f64,
}

fn cmd_entropy(args: EntropyArgs) -> Result<u8, Failure> {
    let p = io::read_probabilities(read_input(args.input.as_ref())?).map_err(usage)?;
    let bad = |e: tsallis::TsallisError| usage(e.to_string());
    let report = EntropyReport {
        q: args.q,
        tsallis: tsallis::tsallis_entropy(&p, args.q).map_err(bad)?,
        entropic_term: tsallis::entropic_term(&p, args.q).map_err(bad)?,
        shannon: tsallis::shannon_entropy(&p).map_err(bad)?,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(numeric)?;
    text.push('\n');
    emit(args.output.as_ref(), &text)?;
    Ok(0)
}

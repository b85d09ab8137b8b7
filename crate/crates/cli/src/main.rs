//! `switchcert`: stability and recurrence certificates from the command line.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 validation failure,
//! 4 numerical or internal failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use switchcert::analysis::{analyze, AnalysisOptions, AnalysisReport};
use switchcert::certificates::MMatrixMode;
use switchcert::montecarlo::{
    estimate_convergence, estimate_return_probability, estimate_sup_exceedance, moment_growth_check, SimConfig,
    SwitchingScheme,
};
use switchcert::presets::{Preset, PresetId};
use switchcert::scenario::GridSpec;
use switchcert::scenario_file::{Scenario, ScenarioFile};
use switchcert::{Criterion, Error};

#[derive(Parser)]
#[command(name = "switchcert", version, about = "Stability and recurrence certificates for regime-switching diffusions")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Print only JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Also write the JSON result to this file.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Base seed for Monte Carlo runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Truncation level for countable regime spaces.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    truncation: Option<u64>,
    /// Floor for the min g / max g check on countable spaces.
    #[arg(long = "tol-liminf", global = true, default_value_t = switchcert::spectral::DEFAULT_LIMINF_FLOOR)]
    tol_liminf: f64,
    /// Bound on exit rates met while aggregating a partition.
    #[arg(long = "tol-rate-cap", global = true)]
    tol_rate_cap: Option<f64>,
    /// Radial points of the rate-estimation grid.
    #[arg(long = "grid-radii", global = true, default_value_t = GridSpec::default().radial_points)]
    grid_radii: usize,
    /// Directions of the rate-estimation grid (d ≥ 2).
    #[arg(long = "grid-directions", global = true, default_value_t = GridSpec::default().directions)]
    grid_directions: usize,
    /// Use declared rates only; never estimate missing ones.
    #[arg(long, global = true)]
    declared_only: bool,
    /// Matrix test used by the partition criterion.
    #[arg(long, global = true, value_enum)]
    partition_mode: Option<ModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    ZMatrixLeadingMinors,
    LeadingMinorsOnly,
    Semipositivity,
}

impl From<ModeArg> for MMatrixMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ZMatrixLeadingMinors => MMatrixMode::ZMatrixLeadingMinors,
            ModeArg::LeadingMinorsOnly => MMatrixMode::LeadingMinorsOnly,
            ModeArg::Semipositivity => MMatrixMode::Semipositivity,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every applicable criterion on a scenario file.
    Analyze { scenario: PathBuf },
    /// Run a Monte Carlo estimator on a scenario file.
    Simulate(SimulateArgs),
    /// Spectral criteria only.
    Eig { scenario: PathBuf },
    /// Analyze a built-in example.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum Estimator {
    SupExceedance,
    Convergence,
    ReturnProbability,
    MomentGrowth,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Exponential,
    Bernoulli,
}

#[derive(Args)]
struct SimulateArgs {
    scenario: PathBuf,
    #[arg(value_enum)]
    estimator: Estimator,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "T", visible_alias = "horizon", default_value_t = 50.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    paths: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, value_enum, default_value = "exponential")]
    scheme: SchemeArg,
    /// Initial state (comma-separated); defaults to the scenario's `initial`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long)]
    regime: Option<usize>,
    /// Exceedance level for `sup_exceedance`.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Target radius for `convergence`.
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    /// Ball radius for `return_probability`.
    #[arg(long, default_value_t = 1.0)]
    r0: f64,
    /// Target regimes `0..m0` for `return_probability`.
    #[arg(long, default_value_t = 1)]
    m0: usize,
    /// Moment order for `moment_growth`.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    p: f64,
    /// Observation times for `moment_growth` (comma-separated).
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// One of ex2.1, ex3.1, ex4.1, ex4.2, cor1.
    example: String,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q: Option<f64>,
}

impl ReproduceArgs {
    fn overrides(&self) -> BTreeMap<String, f64> {
        let all = [
            ("kappa", self.kappa),
            ("a2", self.a2),
            ("c1", self.c1),
            ("a", self.a),
            ("b", self.b),
            ("gamma", self.gamma),
            ("c", self.c),
            ("mu0", self.mu0),
            ("b1", self.b1),
            ("b2", self.b2),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("q", self.q),
        ];
        all.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))).collect()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) => 2,
        Error::Shape(_) | Error::Domain(_) | Error::Validation(_) | Error::NotApplicable(_) | Error::ModeMismatch => 3,
        Error::Evaluator { .. } | Error::Numerical(_) | Error::Contract(_) | Error::ExplosionDetected { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let g = &cli.global;
    let truncation = g.truncation.map(|t| t as usize);
    match &cli.command {
        Command::Analyze { scenario } => {
            let s = load(scenario, truncation)?;
            let report = analyze(&s, &analysis_options(g, None))?;
            emit(g, &report, || summary(&report))
        }
        Command::Eig { scenario } => {
            let s = load(scenario, truncation)?;
            let only = vec![
                Criterion::SpectralStabilityFinite,
                Criterion::SpectralStabilityCountable,
                Criterion::SpectralRecurrenceFinite,
                Criterion::SpectralRecurrenceCountable,
            ];
            let report = analyze(&s, &analysis_options(g, Some(only)))?;
            emit(g, &report, || summary(&report))
        }
        Command::Reproduce(args) => {
            let id: PresetId = args.example.parse()?;
            let preset = Preset::build(id, &args.overrides(), truncation)?;
            let report = preset.reproduce(&analysis_options(g, None))?;
            emit(g, &report, || summary(&report))
        }
        Command::Simulate(args) => simulate(g, args, truncation),
    }
}

fn load(path: &Path, truncation: Option<usize>) -> Result<Scenario, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut file = ScenarioFile::from_json(&text)?;
    if let Some(n) = truncation {
        file = file.with_truncation(n);
    }
    file.build()
}

fn analysis_options(g: &Global, only: Option<Vec<Criterion>>) -> AnalysisOptions {
    AnalysisOptions {
        grid: GridSpec { radial_points: g.grid_radii, directions: g.grid_directions },
        estimate_rates: !g.declared_only,
        liminf_floor: g.tol_liminf,
        partition_mode: g.partition_mode.map(Into::into),
        rate_cap: g.tol_rate_cap,
        only,
    }
}

fn emit<T: Serialize>(g: &Global, value: &T, text: impl FnOnce() -> String) -> Result<(), Error> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("cannot serialize: {e}")))?;
    if let Some(path) = &g.out {
        fs::write(path, format!("{json}\n"))
            .map_err(|e| Error::Validation(format!("cannot write {}: {e}", path.display())))?;
    }
    let body = if g.json { format!("{json}\n") } else { text() };
    let mut stdout = io::stdout().lock();
    match stdout.write_all(body.as_bytes()).and_then(|()| stdout.flush()) {
        // A closed pipe (`| head`) is the reader's choice, not a failure.
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Error::Numerical(format!("cannot write output: {e}"))),
        _ => Ok(()),
    }
}

fn summary(r: &AnalysisReport) -> String {
    let mut out = format!("{} ({} regimes{})\n", r.name, r.regimes, if r.truncated { ", truncated" } else { "" });
    for v in &r.verdicts {
        out.push_str(&format!("  {:8} {}\n", v.theorem.wire_name(), v.verdict));
        for n in &v.notes {
            out.push_str(&format!("           - {n}\n"));
        }
    }
    let merged = |m: &Option<switchcert::analysis::MergedVerdict>| {
        m.as_ref().map_or("none".to_string(), |m| format!("{} ({})", m.verdict, m.theorem))
    };
    out.push_str(&format!("stability:  {}\n", merged(&r.merged.stability)));
    out.push_str(&format!("recurrence: {}\n", merged(&r.merged.recurrence)));
    if let Some(reference) = &r.reference {
        out.push_str(&format!("{}\n", reference.line()));
    }
    if !r.assumptions.is_empty() {
        out.push_str("assumed:\n");
        for a in &r.assumptions {
            out.push_str(&format!("  - {a}\n"));
        }
    }
    out
}

fn simulate(g: &Global, args: &SimulateArgs, truncation: Option<usize>) -> Result<(), Error> {
    let s = load(&args.scenario, truncation)?;
    let initial = s.file.initial.clone();
    let x0 = args
        .x0
        .clone()
        .or_else(|| initial.as_ref().map(|i| i.x0.clone()))
        .ok_or_else(|| Error::Validation("no initial state: pass --x0 or set `initial` in the scenario".into()))?;
    let i0 = args.regime.or(initial.map(|i| i.regime)).unwrap_or(0);
    if x0.len() != s.model.dimension || i0 >= s.model.num_regimes() {
        return Err(Error::Validation("initial state does not match the model".into()));
    }
    let scheme = match args.scheme {
        SchemeArg::Exponential => SwitchingScheme::FrozenRateExponential,
        SchemeArg::Bernoulli => SwitchingScheme::PerStepBernoulli,
    };
    let config = SimConfig::new(args.dt, args.horizon, args.paths as usize, g.seed.unwrap_or(42))
        .with_scheme(scheme)
        .with_workers(args.workers);
    let model = &s.model;
    match args.estimator {
        Estimator::MomentGrowth => {
            let times = args
                .times
                .clone()
                .unwrap_or_else(|| (1..=10).map(|k| args.horizon * k as f64 / 10.0).collect());
            let m = moment_growth_check(model, args.p, &x0, i0, &times, &config)?;
            emit(g, &m, || format!("moment growth p = {}: slope {}, intercept {}\n", m.p, m.slope, m.intercept))
        }
        est => {
            let e = match est {
                Estimator::SupExceedance => estimate_sup_exceedance(model, &x0, i0, args.eps, &config)?,
                Estimator::Convergence => estimate_convergence(model, &x0, i0, args.delta, &config)?,
                Estimator::ReturnProbability => estimate_return_probability(model, &x0, i0, args.r0, args.m0, &config)?,
                Estimator::MomentGrowth => unreachable!(),
            };
            emit(g, &e, || {
                let mut t = format!(
                    "{}: {} (95% CI [{}, {}]) over {} paths, dt {}, T {}, seed {}\n",
                    e.estimator, e.estimate, e.ci_low, e.ci_high, e.n_paths, e.dt, e.horizon, e.seed
                );
                for n in &e.notes {
                    t.push_str(&format!("  - {n}\n"));
                }
                t
            })
        }
    }
}

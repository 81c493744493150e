//! Command-line driver.
//!
//! Every subcommand reads a JSON [`RunConfig`], writes its results plus the
//! effective `config.json` and a `manifest.json` into the output directory,
//! and maps failures to exit codes: 2 for bad input, 3 for numerical failure.
//! Errors are also reported as a single JSON object on stderr.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::Error;
use crate::evolution::{
    decay_rate_fit, evolve_monitored, random_perturbation, stability_experiment, EvolutionTrace,
    Monitors, StabilityConfig,
};
use crate::functionals::{
    action, coercivity_certificate, coercivity_decomposition, sublevel_samples, WellMembership,
};
use crate::grid::State;
use crate::ground_state::{
    evaluate_profile, gwp2d_threshold, h_curve, mu_scaling_check, solve_ground_state, stability_margin,
    GroundStateResult,
};
use crate::io::{load_config, load_field, save_field, ConfigError, RunConfig, SnapshotError, FORMAT_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Thresholds applied by `check`.
pub const CHECK_NEHARI: f64 = 1e-8;
pub const CHECK_POHOZAEV: f64 = 1e-6;
pub const CHECK_FOURD: f64 = 1e-6;
pub const CHECK_REPORT_IDENTITY: f64 = 1e-13;
pub const CHECK_SPLIT: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "dnls-lab", version, about = "Ground states and dynamics of a three-component derivative NLS system")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the solver and experiment seeds.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for data parallelism (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for a ground state; writes ground_state.ldsf and ground_state.json.
    Gs,
    /// Evolve `initial_scale * phi + initial_perturbation * eta`; writes trace.csv.
    Evolve(FieldArg),
    /// Identity, coercivity and potential-well checks; writes check.json.
    Check(FieldArg),
    /// Ground-state level over `experiment.omegas`; writes mu_scan.csv.
    MuScan,
    /// Levels along the scaling curve and derivative comparison; writes h_curve.csv.
    HCurve,
    /// Perturbed ground-state evolution; writes stability.csv and stability.json.
    Stability(FieldArg),
    /// Exponential tail fit; writes decay.json.
    Decay(FieldArg),
}

#[derive(Debug, clap::Args)]
pub struct FieldArg {
    /// Use a saved ground state instead of solving.
    #[arg(long, value_name = "PATH")]
    pub field: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gs => "gs",
            Command::Evolve(_) => "evolve",
            Command::Check(_) => "check",
            Command::MuScan => "mu-scan",
            Command::HCurve => "h-curve",
            Command::Stability(_) => "stability",
            Command::Decay(_) => "decay",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
    #[error("checks failed: {0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::ChecksFailed(_) => EXIT_NUMERICAL,
            _ => EXIT_USER,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(ConfigError::Parse { .. }) => "parse",
            CliError::Config(ConfigError::Validation { .. }) => "validation",
            CliError::Config(ConfigError::Io(_)) => "io",
            CliError::Snapshot(_) => "snapshot",
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Core(_) => "input",
            CliError::Output { .. } => "io",
            CliError::ChecksFailed(_) => "check",
        }
    }

    /// The structured record printed on stderr.
    pub fn to_json(&self) -> Value {
        let mut rec = json!({
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            CliError::Config(ConfigError::Validation { field, .. }) => rec["field"] = json!(field),
            CliError::Config(ConfigError::Parse { line, column, .. }) => {
                rec["line"] = json!(line);
                rec["column"] = json!(column);
            }
            _ => {}
        }
        json!({ "error": rec })
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the subcommand;
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let mut config = load_config(path)?;
    if let Some(seed) = cli.seed {
        config.solver.seed = seed;
        config.experiment.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.to_string_lossy().into_owned();
    }
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.threads {
            if n == 0 {
                return Err(CliError::Usage("--threads must be at least 1".into()));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?
    };
    let out = Output::create(Path::new(&config.output.dir))?;
    let config_text = config.to_json();
    out.write("config.json", &config_text)?;

    let started = Instant::now();
    let result = pool.install(|| dispatch(&cli.command, &config, &out));
    let manifest = json!({
        "tool": "dnls-lab",
        "crate_version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "config_sha256": hex::encode(Sha256::digest(config_text.as_bytes())),
        "seed": config.experiment.seed,
        "field_format_version": FORMAT_VERSION,
        "threads": pool.current_num_threads(),
        "status": match &result { Ok(()) => "ok".to_string(), Err(e) => e.kind().to_string() },
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
    });
    out.write("manifest.json", &pretty(&manifest))?;
    result
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, text: &str) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(|e| CliError::Output { path: path.display().to_string(), message: e.to_string() })
    }

    fn save(&self, name: &str, u: &State) -> CliResult<()> {
        save_field(u, &self.path(name))?;
        Ok(())
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Round-trippable CSV number.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn dispatch(command: &Command, config: &RunConfig, out: &Output) -> CliResult<()> {
    match command {
        Command::Gs => run_gs(config, out),
        Command::Evolve(f) => run_evolve(config, out, f.field.as_deref()),
        Command::Check(f) => run_check(config, out, f.field.as_deref()),
        Command::MuScan => run_mu_scan(config, out),
        Command::HCurve => run_h_curve(config, out),
        Command::Stability(f) => run_stability(config, out, f.field.as_deref()),
        Command::Decay(f) => run_decay(config, out, f.field.as_deref()),
    }
}

/// Ground state from `field` when given, otherwise from the solver.
fn ground_state(config: &RunConfig, field: Option<&Path>) -> CliResult<GroundStateResult> {
    let (grid, phys, wave) = (config.grid(), config.phys(), config.wave());
    match field {
        Some(path) => {
            let phi = load_field(path)?;
            if phi.grid() != &grid {
                return Err(CliError::Usage(format!(
                    "{} holds a field on {:?}, the configuration asks for {:?}",
                    path.display(),
                    phi.grid(),
                    grid
                )));
            }
            Ok(evaluate_profile(&phi, &phys, &wave)?)
        }
        None => Ok(solve_ground_state(&grid, &phys, &wave, &config.solver)?),
    }
}

fn run_gs(config: &RunConfig, out: &Output) -> CliResult<()> {
    let res = ground_state(config, None)?;
    out.save("ground_state.ldsf", res.phi())?;
    let mut report = to_value(&res);
    if let Ok(m) = stability_margin(&res, config.experiment.eta_probe) {
        report["in_mstar"] = json!(m.in_mstar);
    }
    if let Ok(t) = gwp2d_threshold(&res) {
        report["gwp2d_threshold"] = json!(t);
    }
    out.write("ground_state.json", &pretty(&report))
}

fn trace_csv(trace: &EvolutionTrace, d: usize, extra: &[(&str, Vec<String>)]) -> String {
    let mut s = String::from("t,Q,E");
    for k in 1..=d {
        write!(s, ",P_{k}").unwrap();
    }
    s.push_str(",S,K,h1norm");
    for (name, _) in extra {
        write!(s, ",{name}").unwrap();
    }
    s.push('\n');
    for i in 0..trace.len() {
        let mut row = vec![num(trace.times[i]), num(trace.q[i]), num(trace.e[i])];
        row.extend(trace.p[i].iter().map(|p| num(*p)));
        row.extend([num(trace.s[i]), num(trace.k[i]), num(trace.h1_norm[i])]);
        row.extend(extra.iter().map(|(_, col)| col[i].clone()));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn drift_summary(trace: &EvolutionTrace) -> Value {
    if trace.is_empty() {
        return Value::Null;
    }
    json!({
        "q": EvolutionTrace::relative_drift(&trace.q),
        "e": EvolutionTrace::relative_drift(&trace.e),
        "p": trace.momentum_drift(),
    })
}

fn run_evolve(config: &RunConfig, out: &Output, field: Option<&Path>) -> CliResult<()> {
    let gs = ground_state(config, field)?;
    let (phys, wave) = (config.phys(), config.wave());
    let ex = &config.experiment;
    let phi = gs.phi();
    let mut u0 = phi.scaled(ex.initial_scale);
    if ex.initial_perturbation > 0.0 {
        u0.axpy(ex.initial_perturbation, &random_perturbation(phi.grid(), ex.seed))?;
    }
    let monitors = Monitors { orbit_reference: ex.monitor_orbit.then_some(phi), wells: Vec::new() };
    let (last, trace) = evolve_monitored(&u0, &phys, &wave, &config.evolve, &monitors)?;
    let extra: Vec<(&str, Vec<String>)> = match &trace.orbit_distance {
        Some(d) => vec![("orbit_dist", d.iter().map(|v| num(*v)).collect())],
        None => Vec::new(),
    };
    out.write("trace.csv", &trace_csv(&trace, phi.dim(), &extra))?;
    out.save("final.ldsf", &last)?;
    let summary = json!({
        "mu": gs.mu,
        "dt": trace.dt,
        "t_final": trace.times.last(),
        "records": trace.len(),
        "relative_drift": drift_summary(&trace),
        "divergence_time": trace.divergence_time,
    });
    out.write("evolve.json", &pretty(&summary))?;
    match trace.divergence_time {
        Some(time) => Err(Error::NonFinite { time }.into()),
        None => Ok(()),
    }
}

fn run_check(config: &RunConfig, out: &Output, field: Option<&Path>) -> CliResult<()> {
    let gs = ground_state(config, field)?;
    let (grid, phys, wave) = (config.grid(), config.phys(), config.wave());
    let ex = &config.experiment;
    let rep = &gs.report;

    let residuals = json!({
        "nehari": rep.k.abs() / rep.lqc.abs().max(f64::MIN_POSITIVE),
        "pohozaev": gs.pohozaev_residual,
        "four_minus_d": gs.fourd_residual,
        "skl": rep.skl_residual(),
        "skl4": rep.skl4_residual(),
    });
    let thresholds = json!({
        "nehari": CHECK_NEHARI,
        "pohozaev": CHECK_POHOZAEV,
        "four_minus_d": CHECK_FOURD,
        "skl": CHECK_REPORT_IDENTITY,
        "skl4": CHECK_REPORT_IDENTITY,
    });
    let mut failures: Vec<String> = residuals
        .as_object()
        .expect("object")
        .iter()
        .filter(|(k, v)| !(v.as_f64().unwrap_or(f64::NAN) < thresholds[k.as_str()].as_f64().expect("threshold")))
        .map(|(k, _)| k.clone())
        .collect();

    let cert = coercivity_certificate(&phys, &wave)?;
    let mut min_ratio = f64::INFINITY;
    let mut max_split = 0.0f64;
    for i in 0..ex.check_samples {
        let u = random_perturbation(&grid, ex.seed.wrapping_add(1_000_000 + i as u64));
        let lqc = action(&u, &phys, &wave).lqc;
        min_ratio = min_ratio.min(lqc / cert.lower_bound(&u));
        let (quad, isum) = coercivity_decomposition(&u, &wave, &cert);
        max_split = max_split.max((quad + isum - lqc).abs() / lqc.abs());
    }
    if cert.min_coeff <= 0.0 {
        failures.push("coercivity.min_coeff".into());
    }
    if ex.check_samples > 0 && !(min_ratio >= 1.0 - 1e-12 && max_split < CHECK_SPLIT) {
        failures.push("coercivity.samples".into());
    }

    let samples = sublevel_samples(&grid, &phys, &wave, gs.mu, ex.check_samples, ex.seed)?;
    let mut disagreements = 0;
    let (mut a_plus, mut a_minus) = (0, 0);
    for u in &samples {
        let m = WellMembership::from_report(&action(u, &phys, &wave), gs.mu);
        disagreements += (m.a_plus != m.b_plus) as usize + (m.a_minus != m.b_minus) as usize;
        a_plus += m.a_plus as usize;
        a_minus += m.a_minus as usize;
    }
    if disagreements > 0 {
        failures.push("wells".into());
    }

    let report = json!({
        "mu": gs.mu,
        "ground_state_residual": gs.final_residual,
        "tail_mass": gs.tail_mass,
        "residuals": residuals,
        "thresholds": thresholds,
        "coercivity": {
            "certificate": to_value(&cert),
            "samples": ex.check_samples,
            "min_lqc_over_bound": if ex.check_samples > 0 { json!(min_ratio) } else { Value::Null },
            "max_split_defect": max_split,
        },
        "wells": {
            "samples": samples.len(),
            "a_plus": a_plus,
            "a_minus": a_minus,
            "disagreements": disagreements,
        },
        "failures": failures,
        "pass": failures.is_empty(),
    });
    out.write("check.json", &pretty(&report))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(failures.join(", ")))
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn run_mu_scan(config: &RunConfig, out: &Output) -> CliResult<()> {
    let (grid, phys) = (config.grid(), config.phys());
    let points = mu_scaling_check(&grid, &phys, &config.wave.c, &config.experiment.omegas, &config.solver)?;
    let d = grid.dim();
    let mut s = String::from("omega");
    for k in 1..=d {
        write!(s, ",c_{k}").unwrap();
    }
    s.push_str(",mu,mu_predicted,rel_error,charge_error,scaled_profile_error\n");
    for p in &points {
        let mut row = vec![num(p.omega)];
        row.extend(p.c.iter().map(|c| num(*c)));
        row.extend([num(p.mu), num(p.mu_predicted), num(p.rel_error), num(p.charge_error), opt_num(p.scaled_profile_error)]);
        s.push_str(&row.join(","));
        s.push('\n');
    }
    out.write("mu_scan.csv", &s)
}

fn run_h_curve(config: &RunConfig, out: &Output) -> CliResult<()> {
    let (grid, phys, wave) = (config.grid(), config.phys(), config.wave());
    let report = h_curve(&grid, &phys, &wave, &config.experiment.taus, &config.solver)?;
    let d = grid.dim();
    let mut s = String::from("tau,omega");
    for k in 1..=d {
        write!(s, ",c_{k}").unwrap();
    }
    s.push_str(",mu,h_closed\n");
    for p in &report.points {
        let mut row = vec![num(p.tau), num(p.omega)];
        row.extend(p.c.iter().map(|c| num(*c)));
        row.extend([num(p.mu), num(p.h_closed)]);
        s.push_str(&row.join(","));
        s.push('\n');
    }
    out.write("h_curve.csv", &s)?;
    let mut summary = to_value(&report);
    summary.as_object_mut().expect("object").remove("points");
    out.write("h_curve.json", &pretty(&summary))
}

fn run_stability(config: &RunConfig, out: &Output, field: Option<&Path>) -> CliResult<()> {
    let gs = ground_state(config, field)?;
    let (phys, wave) = (config.phys(), config.wave());
    let ex = &config.experiment;
    let cfg = StabilityConfig {
        delta: ex.delta,
        seed: ex.seed,
        tau0_factor: ex.tau0_factor,
        place_in_well: ex.place_in_well,
        evolve: config.evolve.clone(),
    };
    let report = stability_experiment(gs.phi(), gs.mu, &phys, &wave, &cfg)?;
    let trace = &report.trace;
    let dists = trace.orbit_distance.as_ref().expect("orbit monitored");
    let wells = trace.wells.as_ref().expect("wells monitored");
    let extra = vec![
        ("orbit_dist", dists.iter().map(|v| num(*v)).collect()),
        ("well_upper", wells.iter().map(|m| m[0].label().to_string()).collect()),
        ("well_lower", wells.iter().map(|m| m[1].label().to_string()).collect()),
    ];
    out.write("stability.csv", &trace_csv(trace, gs.phi().dim(), &extra))?;

    let mut verdict = to_value(&report);
    verdict.as_object_mut().expect("object").remove("trace");
    verdict["relative_drift"] = drift_summary(trace);
    verdict["orbit_bound"] = json!(10.0 * report.delta);
    verdict["bounded"] = json!(report.sup_orbit_distance < 10.0 * report.delta);
    // In A+ the flow stays in the ball ||U||_{H1}^2 <= 6 S(U0) / C.
    let cert = coercivity_certificate(&phys, &wave)?;
    verdict["h1_norm_sqr_bound"] = if report.initial_k > 0.0 && report.initial_s < report.mu {
        json!(6.0 * report.initial_s / cert.min_coeff)
    } else {
        Value::Null
    };
    out.write("stability.json", &pretty(&verdict))
}

fn run_decay(config: &RunConfig, out: &Output, field: Option<&Path>) -> CliResult<()> {
    let gs = ground_state(config, field)?;
    let report = decay_rate_fit(gs.phi(), &config.phys(), &config.wave())?;
    let mut v = to_value(&report);
    v["min_rate"] = json!(report.min_rate());
    v["min_rate_over_half_bound"] = json!(report.min_rate() / report.half_bound);
    out.write("decay.json", &pretty(&v))
}

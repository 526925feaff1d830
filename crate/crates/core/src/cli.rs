//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{check_memory, ModelId, RunConfig};
use crate::error::{Error, Result};
use crate::henon_heiles::quantum::basis_size;
use crate::linalg;
use crate::scan::{run_scan, write_json, Method, ScanModel, ScanSpec};
use crate::series::{
    bench_propagate, bench_semiclassical_points, bench_semiclassical_t, growth_ratios, linear_fit,
    run_converge_r, run_timeseries, SeriesModel, TimeseriesSpec,
};

#[derive(Debug, Parser)]
#[command(name = "qfi", version, about = "Exact and semiclassical quantum Fisher information")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact QFI at one point (--point) or over a phase-space grid.
    Exact(CommonArgs),
    /// Semiclassical QFI at one point (--point) or over a phase-space grid.
    Semiclassical(CommonArgs),
    /// Exact and semiclassical QFI over a grid, with deviation statistics.
    Scan(CommonArgs),
    /// Phase-space averaged semiclassical QFI as a function of r.
    ConvergeR(CommonArgs),
    /// QFI against time for fixed initial states.
    Timeseries(CommonArgs),
    /// Wall-time scaling of propagation and semiclassical scans.
    Bench(CommonArgs),
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// kicked-top, kicked-rotor or henon-heiles.
    #[arg(long)]
    pub model: Option<String>,
    /// exact, sc or both.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long = "J")]
    pub j: Option<f64>,
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Phase-space grid as NPHIxNZ.
    #[arg(long)]
    pub grid: Option<String>,
    /// Single initial state, comma separated: phi,z / x,p / x,y,px.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    #[arg(long)]
    pub r: Option<u32>,
    #[arg(long = "n-mc")]
    pub n_mc: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File name stem of the outputs.
    #[arg(long)]
    pub name: Option<String>,
    /// Print size, memory and time estimates without computing.
    #[arg(long)]
    pub dry_run: bool,
    /// Report errors as JSON on stderr.
    #[arg(long)]
    pub json_errors: bool,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

impl CommonArgs {
    fn overrides(&self) -> Result<RunConfig> {
        Ok(RunConfig {
            model: self.model.as_deref().map(str::parse::<ModelId>).transpose()?,
            method: self.method.as_deref().map(parse_method).transpose()?,
            j: self.j,
            m: self.m,
            hbar: self.hbar,
            beta: self.beta,
            k: self.k,
            lambda: self.lambda,
            t: self.t,
            grid: self.grid.clone(),
            point: self.point.clone(),
            r: self.r,
            n_mc: self.n_mc,
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            name: self.name.clone(),
            verbosity: match self.verbose {
                0 => None,
                1 => Some("info".into()),
                2 => Some("debug".into()),
                _ => Some("trace".into()),
            },
            ..Default::default()
        })
    }

    /// Config file merged with the flags.
    pub fn effective_config(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(base.merged(&self.overrides()?))
    }
}

fn parse_method(s: &str) -> Result<Method> {
    match s {
        "exact" => Ok(Method::Exact),
        "sc" | "semiclassical" => Ok(Method::Sc),
        "both" => Ok(Method::Both),
        _ => Err(Error::Config(format!("unknown method {s:?} (expected exact, sc or both)"))),
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json value serializes"));
}

fn report_error(err: &Error, json_errors: bool) {
    if json_errors {
        eprintln!(
            "{}",
            json!({ "error": { "kind": err.kind(), "exit_code": err.exit_code(), "message": err.to_string() } })
        );
    } else {
        eprintln!("error: {err}");
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let json_errors = argv.iter().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            if json_errors {
                report_error(&Error::Config(e.kind().to_string() + ": " + &e.render().to_string()), true);
            } else {
                eprint!("{}", e.render());
            }
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report_error(&e, json_errors);
            e.exit_code()
        }
    }
}

fn init_logging(cfg: &RunConfig) {
    let level = cfg.verbosity.clone().unwrap_or_else(|| "warn".into());
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn init_threads(threads: usize) {
    linalg::set_threads(threads);
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build_global();
}

pub fn run(cli: &Cli) -> Result<()> {
    let args = match &cli.command {
        Command::Exact(a)
        | Command::Semiclassical(a)
        | Command::Scan(a)
        | Command::ConvergeR(a)
        | Command::Timeseries(a)
        | Command::Bench(a) => a,
    };
    let cfg = args.effective_config()?;
    init_logging(&cfg);
    init_threads(cfg.threads());
    let config_json = serde_json::to_value(&cfg)?;
    let dir = cfg.out_dir();
    match &cli.command {
        Command::Exact(_) | Command::Semiclassical(_) | Command::Scan(_) => {
            let (method, stem) = match &cli.command {
                Command::Exact(_) => (Method::Exact, "exact"),
                Command::Semiclassical(_) => (Method::Sc, "semiclassical"),
                _ => (cfg.method.unwrap_or(Method::Both), "scan"),
            };
            if cfg.point.is_some() {
                let spec = cfg.timeseries_spec(method, true)?;
                if args.dry_run {
                    print_json(&series_estimate(&spec));
                    return Ok(());
                }
                check_memory(series_memory(&spec), cfg.max_memory_bytes())?;
                let res = run_timeseries(&spec, &dir, &cfg.name_or(stem), Some(config_json))?;
                print_json(&serde_json::to_value(&res.records[0])?);
                return Ok(());
            }
            let mut spec = cfg.scan_spec(method)?;
            if !matches!(cli.command, Command::Scan(_)) {
                spec.method = method;
            }
            if args.dry_run {
                print_json(&scan_estimate(&spec));
                return Ok(());
            }
            check_memory(spec.exact_memory_bytes(), cfg.max_memory_bytes())?;
            log::info!(
                "exact engine needs about {:.3} GB",
                spec.exact_memory_bytes() as f64 / 1e9
            );
            let res = run_scan(&spec, &dir, &cfg.name_or(stem), Some(config_json))?;
            print_json(&json!({
                "csv": dir.join(format!("{}.csv", cfg.name_or(stem))),
                "heisenberg_time": res.metadata.heisenberg_time,
                "aggregates": res.metadata.aggregates,
            }));
        }
        Command::ConvergeR(_) => {
            let spec = cfg.scan_spec(Method::Sc)?;
            let r_values = cfg.r_values();
            if args.dry_run {
                let points: usize = r_values
                    .iter()
                    .map(|&r| ScanSpec { r, ..spec.clone() }.semiclassical_points_per_state())
                    .sum();
                print_json(&json!({
                    "grid": [spec.n_phi, spec.n_z],
                    "r_values": r_values,
                    "trajectories": points * spec.n_phi * spec.n_z,
                    "estimated_seconds": step_seconds(points * spec.n_phi * spec.n_z, spec.t as f64),
                }));
                return Ok(());
            }
            let pts = run_converge_r(&spec, &r_values, Some(&dir), &cfg.name_or("converge_r"), Some(config_json))?;
            print_json(&serde_json::to_value(pts)?);
        }
        Command::Timeseries(_) => {
            let spec = cfg.timeseries_spec(cfg.method.unwrap_or(Method::Both), false)?;
            if args.dry_run {
                print_json(&series_estimate(&spec));
                return Ok(());
            }
            check_memory(series_memory(&spec), cfg.max_memory_bytes())?;
            let res = run_timeseries(&spec, &dir, &cfg.name_or("timeseries"), Some(config_json))?;
            print_json(&json!({
                "heisenberg_time": res.metadata.heisenberg_time,
                "records": res.records.len(),
                "warnings": res.metadata.warnings,
            }));
        }
        Command::Bench(_) => run_bench(&cfg, args.dry_run)?,
    }
    Ok(())
}

/// Rough cost of one classical step, used only for estimates.
const STEP_SECONDS: f64 = 3e-8;
/// Rough dense complex matmul throughput, used only for estimates.
const FLOPS: f64 = 3e10;

fn step_seconds(trajectories: usize, t: f64) -> f64 {
    trajectories as f64 * t.max(1.0) * STEP_SECONDS
}

fn matmul_count(t: u64) -> u64 {
    if t == 0 {
        return 0;
    }
    let doublings = 63 - t.leading_zeros() as u64;
    2 + 3 * doublings + 3 * (t.count_ones() as u64 - 1)
}

fn scan_estimate(spec: &ScanSpec) -> serde_json::Value {
    let n = spec.dim() as f64;
    let grid_points = spec.n_phi * spec.n_z;
    let exact_s = if spec.method.exact() {
        matmul_count(spec.t) as f64 * 8.0 * n.powi(3) / FLOPS
    } else {
        0.0
    };
    let ens = spec.semiclassical_points_per_state();
    let sc_s = if spec.method.semiclassical() {
        step_seconds(ens * grid_points, spec.t as f64)
    } else {
        0.0
    };
    json!({
        "dim": spec.dim(),
        "grid": [spec.n_phi, spec.n_z],
        "grid_points": grid_points,
        "exact_memory_bytes": spec.exact_memory_bytes(),
        "ensemble_points_per_state": if spec.method.semiclassical() { ens } else { 0 },
        "estimated_seconds": { "exact": exact_s, "semiclassical": sc_s },
        "heisenberg_time": spec.heisenberg_time(),
    })
}

fn series_memory(spec: &TimeseriesSpec) -> u64 {
    if !spec.exact {
        return 0;
    }
    let n = match &spec.model {
        SeriesModel::KickedTop { j, .. } => (2.0 * j) as usize + 1,
        SeriesModel::KickedRotor { m, .. } => *m,
        SeriesModel::HenonHeiles { n_max, .. } => basis_size(*n_max),
    } as u64;
    let per_time = match &spec.model {
        SeriesModel::HenonHeiles { .. } => 0,
        _ => 2 * 16 * n * n,
    };
    3 * 16 * n * n + per_time * spec.times.len() as u64
}

fn series_estimate(spec: &TimeseriesSpec) -> serde_json::Value {
    let tmax = spec.times.iter().cloned().fold(0.0, f64::max);
    let (dim, ens, steps_per_t) = match &spec.model {
        SeriesModel::KickedTop { j, r, reff_multiple, .. } => (
            (2.0 * j) as usize + 1,
            crate::semiclassical::ring_point_count((reff_multiple * *r as f64) as u32),
            1.0,
        ),
        SeriesModel::KickedRotor { m, r, reff_multiple, .. } => {
            let reach = reff_multiple * *r as f64;
            (*m, (std::f64::consts::PI * reach * reach) as usize, 1.0)
        }
        SeriesModel::HenonHeiles { n_max, n_mc, dt, .. } => (basis_size(*n_max), *n_mc, 1.0 / dt),
    };
    json!({
        "dim": dim,
        "states": spec.states.len(),
        "times": spec.times.len(),
        "exact_memory_bytes": series_memory(spec),
        "ensemble_points_per_state": if spec.semiclassical { ens } else { 0 },
        "estimated_seconds": {
            "semiclassical": if spec.semiclassical {
                step_seconds(ens * spec.states.len(), tmax * steps_per_t)
            } else { 0.0 },
        },
        "heisenberg_time": spec.heisenberg_time_estimate(),
    })
}

fn run_bench(cfg: &RunConfig, dry_run: bool) -> Result<()> {
    let bench = cfg.bench.clone().unwrap_or_default();
    let j_values = bench.j_values.unwrap_or_else(|| vec![128.0, 256.0]);
    let times = bench.times.unwrap_or_else(|| (0..9).map(|p| 1u64 << p).collect());
    let repeats = bench.repeats.unwrap_or(3);
    let (n_phi, n_z) = cfg.grid_dims()?.unwrap_or((4, 4));
    let base = ScanSpec {
        model: ScanModel::KickedTop {
            j: cfg.j.unwrap_or(512.0),
            beta: cfg.beta.unwrap_or(1.5),
            k: cfg.k.unwrap_or(3.0),
            projection: cfg.projection.unwrap_or_default(),
            weighting: cfg.weighting.unwrap_or_default(),
        },
        method: Method::Sc,
        t: 8,
        n_phi,
        n_z,
        r: cfg.r.unwrap_or(20),
        reff_multiple: cfg.reff_multiple.unwrap_or(5.0),
    };
    base.validate()?;
    if dry_run {
        print_json(&json!({
            "J_values": j_values,
            "times": times,
            "semiclassical_grid": [n_phi, n_z],
            "r": base.r,
        }));
        return Ok(());
    }
    let mut propagate = Vec::new();
    for &j in &j_values {
        let timings = bench_propagate(j, 1.5, 3.0, &times, repeats)?;
        propagate.push(json!({
            "J": j,
            "timings": timings,
            "growth_per_doubling": growth_ratios(&timings),
        }));
    }
    let sc_t = bench_semiclassical_t(&base, &[8, 16, 32, 64], repeats)?;
    let sc_n = bench_semiclassical_points(&base, &[n_phi, 2 * n_phi, 4 * n_phi], repeats)?;
    let (a_t, b_t, r2_t) = linear_fit(&sc_t);
    let (a_n, b_n, r2_n) = linear_fit(&sc_n);
    let report = json!({
        "propagate": propagate,
        "semiclassical_vs_t": { "timings": sc_t, "intercept": a_t, "slope": b_t, "r2": r2_t },
        "semiclassical_vs_points": { "timings": sc_n, "intercept": a_n, "slope": b_n, "r2": r2_n },
    });
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)?;
    write_json(&dir.join(format!("{}.json", cfg.name_or("bench"))), &report)?;
    print_json(&report);
    Ok(())
}

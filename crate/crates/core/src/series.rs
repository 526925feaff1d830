//! Time series at fixed initial states, resolution sweeps, and timing
//! benchmarks.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{exact_qfi_columns, propagate_bundle, FloquetBundle};
use crate::linalg::{self, c64};
use crate::henon_heiles::{hh_build_quantum, HHState, HenonHeilesFlow, SADDLE_ENERGY};
use crate::kicked_top::{floquet_one_step, KickedTopFlow, KickedTopParams};
use crate::rotor::{rotor_coherent_state, rotor_floquet, RotorFlow, RotorParams};
use crate::scan::{delta, sha256_hex, write_json, ScanModel, ScanSpec, SCHEMA_VERSION};
use crate::semiclassical::{
    bootstrap_standard_error, build_mc_ensemble, build_square_grid, collect_action_derivatives,
    semiclassical_series, CapGridTemplate, CapProjection, CapWeighting, McCutoff, SemiclassicalOptions,
};
use crate::spin::{build_spin_operators, coherent_state};

pub const TIMESERIES_HEADER: &str = "label,t,I_exact,I_sc,delta_I,rel_error,I_sc_se";

/// A named initial state. Coordinates are `(φ, z)` for the kicked top,
/// `(x, p)` for the rotor and `(x, y, p_x)` for Hénon–Heiles, where `p_y > 0`
/// follows from the energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedState {
    pub label: String,
    pub center: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SeriesModel {
    KickedTop {
        #[serde(rename = "J")]
        j: f64,
        beta: f64,
        k: f64,
        r: u32,
        reff_multiple: f64,
        projection: CapProjection,
        #[serde(default)]
        weighting: CapWeighting,
    },
    KickedRotor {
        #[serde(rename = "M")]
        m: usize,
        k: f64,
        r: u32,
        reff_multiple: f64,
    },
    HenonHeiles {
        hbar: f64,
        lambda: f64,
        energy: f64,
        n_max: usize,
        dt: f64,
        n_mc: usize,
        seed: u64,
        cutoff: McCutoff,
        /// Bootstrap resamples for the `I_sc` standard error (0 disables).
        bootstrap: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesSpec {
    #[serde(flatten)]
    pub model: SeriesModel,
    pub states: Vec<NamedState>,
    pub times: Vec<f64>,
    pub exact: bool,
    pub semiclassical: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub label: String,
    pub t: f64,
    pub i_exact: f64,
    pub i_sc: f64,
    pub delta_i: f64,
    /// `|I - I_sc|/I`.
    pub rel_error: f64,
    pub i_sc_se: f64,
}

impl SeriesRecord {
    fn new(label: &str, t: f64, i_exact: f64, i_sc: f64, i_sc_se: f64) -> Self {
        let both = !(i_exact.is_nan() || i_sc.is_nan());
        Self {
            label: label.to_string(),
            t,
            i_exact,
            i_sc,
            delta_i: if both { delta(i_exact, i_sc) } else { f64::NAN },
            rel_error: if both { (i_exact - i_sc).abs() / i_exact } else { f64::NAN },
            i_sc_se,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.label, self.t, self.i_exact, self.i_sc, self.delta_i, self.rel_error, self.i_sc_se
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub schema_version: u32,
    pub kind: String,
    pub crate_version: String,
    pub spec: TimeseriesSpec,
    pub spec_hash: String,
    pub config: Option<serde_json::Value>,
    pub csv_sha256: String,
    pub heisenberg_time: f64,
    /// Semiclassical ensemble size per state.
    pub ensemble_points: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub records: Vec<SeriesRecord>,
    pub metadata: SeriesMetadata,
    pub elapsed_s: f64,
}

impl TimeseriesSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.states.is_empty() || self.times.is_empty() {
            return bad("timeseries needs at least one state and one time".into());
        }
        if !self.exact && !self.semiclassical {
            return bad("nothing to compute: both methods disabled".into());
        }
        if self.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return bad("times must be finite and nonnegative".into());
        }
        let (dim, integral) = match &self.model {
            SeriesModel::KickedTop { j, beta, k, .. } => {
                KickedTopParams { j: *j, beta: *beta, k: *k, t: 0 }
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
                (2, true)
            }
            SeriesModel::KickedRotor { m, k, .. } => {
                RotorParams { m: *m, k: *k, t: 0 }
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
                (2, true)
            }
            SeriesModel::HenonHeiles { hbar, energy, .. } => {
                if !(*hbar > 0.0) || !(*energy < SADDLE_ENERGY) {
                    return bad(format!(
                        "need hbar > 0 and energy below {SADDLE_ENERGY} (got {hbar}, {energy})"
                    ));
                }
                (3, false)
            }
        };
        if integral && self.times.iter().any(|t| t.fract() != 0.0) {
            return bad("kicked models take integer times".into());
        }
        for s in &self.states {
            if s.center.len() != dim {
                return bad(format!(
                    "state {:?} needs {dim} coordinates, got {}",
                    s.label,
                    s.center.len()
                ));
            }
            if s.label.contains(',') || s.label.contains('\n') {
                return bad(format!("state label {:?} may not contain commas", s.label));
            }
        }
        Ok(())
    }

    pub fn heisenberg_time_estimate(&self) -> Option<f64> {
        match &self.model {
            SeriesModel::KickedTop { j, .. } => Some(2.0 * j + 1.0),
            SeriesModel::KickedRotor { m, .. } => Some(*m as f64),
            SeriesModel::HenonHeiles { .. } => None,
        }
    }

    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("spec serializes").as_bytes())
    }
}

/// Exact QFI of every state at every time, as `out[state][time]`.
///
/// Times are visited in increasing order and each bundle is obtained from
/// the previous one by composing with the bundle of the gap, so only a few
/// matrices are alive at once.
pub fn exact_series(one_step: &FloquetBundle, times: &[u64], states: &[Vec<c64>]) -> Result<Vec<Vec<f64>>> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by_key(|&i| times[i]);
    let mut out = vec![vec![0.0; times.len()]; states.len()];
    let columns = linalg::columns_to_mat(states);
    let mut current = FloquetBundle::identity(one_step.dim());
    for &i in &order {
        let gap = times[i] - current.t;
        if gap > 0 {
            let step = propagate_bundle(one_step.clone(), gap)?;
            current = step.compose(&current);
        }
        for (s, q) in exact_qfi_columns(&current, columns.as_ref())?.into_iter().enumerate() {
            out[s][i] = q;
        }
    }
    Ok(out)
}

struct Column {
    i_exact: Vec<f64>,
    i_sc: Vec<f64>,
    se: Vec<f64>,
}

fn nan_column(n: usize) -> Vec<f64> {
    vec![f64::NAN; n]
}

/// Computes `I(t)` and `I_sc(t)` for each state and writes
/// `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
pub fn run_timeseries(
    spec: &TimeseriesSpec,
    dir: &Path,
    stem: &str,
    config: Option<serde_json::Value>,
) -> Result<SeriesResult> {
    spec.validate()?;
    let start = Instant::now();
    let nt = spec.times.len();
    let mut columns = Vec::with_capacity(spec.states.len());
    let mut ensemble_points = Vec::new();
    let mut warnings = Vec::new();
    let heisenberg_time;

    match &spec.model {
        SeriesModel::KickedTop { j, beta, k, r, reff_multiple, projection, weighting } => {
            heisenberg_time = 2.0 * j + 1.0;
            let times: Vec<u64> = spec.times.iter().map(|&t| t as u64).collect();
            let exact = if spec.exact {
                let ops = build_spin_operators(*j)?;
                let one = floquet_one_step(&ops, *beta, *k)?;
                drop(ops);
                let states: Vec<Vec<c64>> = spec
                    .states
                    .iter()
                    .map(|s| Ok(coherent_state(*j, s.center[1].clamp(-1.0, 1.0).acos(), s.center[0])?.amplitudes))
                    .collect::<Result<_>>()?;
                Some(exact_series(&one, &times, &states)?)
            } else {
                None
            };
            let template = CapGridTemplate::with_weighting(*j, *r, *reff_multiple, *projection, *weighting)?;
            let flow = KickedTopFlow::new(*beta, *k);
            for (idx, s) in spec.states.iter().enumerate() {
                let (phi, z) = (s.center[0], s.center[1]);
                let theta = z.clamp(-1.0, 1.0).acos();
                let i_exact = match &exact {
                    Some(e) => e[idx].clone(),
                    None => nan_column(nt),
                };
                let i_sc = if spec.semiclassical {
                    let cap = template.place(theta, phi);
                    ensemble_points.push(template.len());
                    semiclassical_series(&cap, &flow, &times, &SemiclassicalOptions::default())?
                        .into_iter()
                        .map(|r| r.i_sc)
                        .collect()
                } else {
                    nan_column(nt)
                };
                columns.push(Column { i_exact, i_sc, se: nan_column(nt) });
            }
        }
        SeriesModel::KickedRotor { m, k, r, reff_multiple } => {
            heisenberg_time = *m as f64;
            let times: Vec<u64> = spec.times.iter().map(|&t| t as u64).collect();
            let exact = if spec.exact {
                let states: Vec<Vec<c64>> = spec
                    .states
                    .iter()
                    .map(|s| rotor_coherent_state(*m, s.center[0], s.center[1]))
                    .collect::<Result<_>>()?;
                Some(exact_series(&rotor_floquet(*m, *k)?, &times, &states)?)
            } else {
                None
            };
            let flow = RotorFlow { k: *k };
            let hbar = std::f64::consts::TAU / *m as f64;
            for (idx, s) in spec.states.iter().enumerate() {
                let (x, p) = (s.center[0], s.center[1]);
                let i_exact = match &exact {
                    Some(e) => e[idx].clone(),
                    None => nan_column(nt),
                };
                let i_sc = if spec.semiclassical {
                    let grid = build_square_grid([x, p], hbar, *r, *reff_multiple)?;
                    ensemble_points.push(grid.points.len());
                    semiclassical_series(&grid, &flow, &times, &SemiclassicalOptions::default())?
                        .into_iter()
                        .map(|r| r.i_sc)
                        .collect()
                } else {
                    nan_column(nt)
                };
                columns.push(Column { i_exact, i_sc, se: nan_column(nt) });
            }
        }
        SeriesModel::HenonHeiles { hbar, lambda, energy, n_max, dt, n_mc, seed, cutoff, bootstrap } => {
            let centers: Vec<[f64; 4]> = spec
                .states
                .iter()
                .map(|s| {
                    HHState::on_shell(s.center[0], s.center[1], s.center[2], *lambda, *energy)
                        .map(|h| h.as_array())
                })
                .collect::<Result<_>>()?;
            let model = if spec.exact {
                Some(hh_build_quantum(*hbar, *n_max, *lambda)?)
            } else {
                None
            };
            heisenberg_time = match &model {
                Some(m) => m.heisenberg_time(*energy)?,
                None => f64::NAN,
            };
            let flow = HenonHeilesFlow::new(*lambda, *dt)?;
            for (s, center) in spec.states.iter().zip(&centers) {
                let i_exact = match &model {
                    Some(m) => {
                        let psi = m.coherent_state_eigen(*center)?;
                        spec.times.iter().map(|&t| m.exact_qfi(&psi, t)).collect::<Result<_>>()?
                    }
                    None => nan_column(nt),
                };
                let (i_sc, se) = if spec.semiclassical {
                    let ens = build_mc_ensemble(*center, *hbar, *n_mc, *seed, *cutoff)?;
                    ensemble_points.push(ens.points.len());
                    let results = semiclassical_series(
                        &ens,
                        &flow,
                        &spec.times,
                        &SemiclassicalOptions::default(),
                    )?;
                    let failed: usize = results.iter().map(|r| r.failed).max().unwrap_or(0);
                    if failed > 0 {
                        warnings.push(format!("{}: {failed} trajectories escaped", s.label));
                    }
                    let se = if *bootstrap > 0 {
                        collect_action_derivatives(&ens, &flow, &spec.times)
                            .iter()
                            .map(|vals| bootstrap_standard_error(vals, *hbar, *bootstrap, *seed))
                            .collect()
                    } else {
                        nan_column(nt)
                    };
                    (results.into_iter().map(|r| r.i_sc).collect(), se)
                } else {
                    (nan_column(nt), nan_column(nt))
                };
                columns.push(Column { i_exact, i_sc, se });
            }
        }
    }

    let mut records = Vec::with_capacity(spec.states.len() * nt);
    for (s, col) in spec.states.iter().zip(&columns) {
        for (c, &t) in spec.times.iter().enumerate() {
            records.push(SeriesRecord::new(&s.label, t, col.i_exact[c], col.i_sc[c], col.se[c]));
        }
    }

    fs::create_dir_all(dir)?;
    let mut csv = Vec::new();
    writeln!(csv, "{TIMESERIES_HEADER}")?;
    for r in &records {
        writeln!(csv, "{}", r.to_csv())?;
    }
    fs::write(dir.join(format!("{stem}.csv")), &csv)?;
    let metadata = SeriesMetadata {
        schema_version: SCHEMA_VERSION,
        kind: "timeseries".into(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        spec: spec.clone(),
        spec_hash: spec.hash(),
        config,
        csv_sha256: sha256_hex(&csv),
        heisenberg_time,
        ensemble_points,
        warnings,
    };
    write_json(&dir.join(format!("{stem}.json")), &metadata)?;
    Ok(SeriesResult {
        records,
        metadata,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

pub const CONVERGE_HEADER: &str = "r,mean_I_sc,var_I_sc,rel_mean,rel_var";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergePoint {
    pub r: u32,
    pub mean_i_sc: f64,
    pub var_i_sc: f64,
    /// `|Ī_sc(r) - Ī_sc(r_ref)|/Ī_sc(r_ref)` with `r_ref` the largest `r`.
    pub rel_mean: f64,
    pub rel_var: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergeMetadata {
    pub schema_version: u32,
    pub kind: String,
    pub crate_version: String,
    pub base: ScanSpec,
    pub r_values: Vec<u32>,
    pub r_ref: u32,
    pub config: Option<serde_json::Value>,
    pub csv_sha256: String,
}

/// Phase-space averaged `I_sc` over the grid of `base` for each `r`.
/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json` when `dir` is given.
pub fn run_converge_r(
    base: &ScanSpec,
    r_values: &[u32],
    dir: Option<&Path>,
    stem: &str,
    config: Option<serde_json::Value>,
) -> Result<Vec<ConvergePoint>> {
    base.validate()?;
    let ScanModel::KickedTop { j, beta, k, projection, weighting } = base.model else {
        return Err(Error::Config("converge-r is implemented for the kicked top".into()));
    };
    if r_values.is_empty() || r_values.contains(&0) {
        return Err(Error::Config("r values must be a nonempty list of positive integers".into()));
    }
    let flow = KickedTopFlow::new(beta, k);
    let mut stats = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let template = CapGridTemplate::with_weighting(j, r, base.reff_multiple, projection, weighting)?;
        let mut vals = Vec::with_capacity(base.n_phi * base.n_z);
        for i in 0..base.n_phi {
            for jz in 0..base.n_z {
                let (phi, z) = base.point(i, jz);
                let cap = template.place(z.clamp(-1.0, 1.0).acos(), phi);
                vals.push(crate::semiclassical::semiclassical_qfi(&cap, &flow, base.t)?.i_sc);
            }
        }
        let (mean, var) = crate::stats::mean_and_variance(&vals);
        log::info!("r = {r}: mean I_sc = {mean}");
        stats.push((r, mean, var));
    }
    let &(r_ref, m_ref, v_ref) = stats.iter().max_by_key(|s| s.0).expect("nonempty");
    let points: Vec<ConvergePoint> = stats
        .iter()
        .map(|&(r, mean, var)| ConvergePoint {
            r,
            mean_i_sc: mean,
            var_i_sc: var,
            rel_mean: (mean - m_ref).abs() / m_ref,
            rel_var: (var - v_ref).abs() / v_ref,
        })
        .collect();
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        let mut csv = Vec::new();
        writeln!(csv, "{CONVERGE_HEADER}")?;
        for p in &points {
            writeln!(csv, "{},{},{},{},{}", p.r, p.mean_i_sc, p.var_i_sc, p.rel_mean, p.rel_var)?;
        }
        fs::write(dir.join(format!("{stem}.csv")), &csv)?;
        write_json(
            &dir.join(format!("{stem}.json")),
            &ConvergeMetadata {
                schema_version: SCHEMA_VERSION,
                kind: "converge-r".into(),
                crate_version: env!("CARGO_PKG_VERSION").into(),
                base: base.clone(),
                r_values: r_values.to_vec(),
                r_ref,
                config,
                csv_sha256: sha256_hex(&csv),
            },
        )?;
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub x: f64,
    pub seconds: f64,
}

fn best_of<F: FnMut() -> Result<()>>(repeats: usize, mut f: F) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        f()?;
        best = best.min(t0.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Wall time of building the kicked-top bundle from scratch for each `t`
/// (best of `repeats`).
pub fn bench_propagate(j: f64, beta: f64, k: f64, times: &[u64], repeats: usize) -> Result<Vec<Timing>> {
    times
        .iter()
        .map(|&t| {
            let secs = best_of(repeats, || {
                crate::kicked_top::kicked_top_bundle(&KickedTopParams { j, beta, k, t }).map(drop)
            })?;
            Ok(Timing { label: format!("propagate J={j}"), x: t as f64, seconds: secs })
        })
        .collect()
}

/// Wall time of the semiclassical part of a scan as a function of `t`.
pub fn bench_semiclassical_t(base: &ScanSpec, times: &[u64], repeats: usize) -> Result<Vec<Timing>> {
    times
        .iter()
        .map(|&t| {
            let spec = ScanSpec { t, ..base.clone() };
            let secs = best_of(repeats, || semiclassical_grid(&spec).map(drop))?;
            Ok(Timing { label: "semiclassical vs t".into(), x: t as f64, seconds: secs })
        })
        .collect()
}

/// Wall time of the semiclassical part of a scan as a function of the
/// number of grid points (`n_phi` scaled, `n_z` fixed).
pub fn bench_semiclassical_points(base: &ScanSpec, n_phis: &[usize], repeats: usize) -> Result<Vec<Timing>> {
    n_phis
        .iter()
        .map(|&n_phi| {
            let spec = ScanSpec { n_phi, ..base.clone() };
            let secs = best_of(repeats, || semiclassical_grid(&spec).map(drop))?;
            Ok(Timing {
                label: "semiclassical vs points".into(),
                x: (n_phi * spec.n_z) as f64,
                seconds: secs,
            })
        })
        .collect()
}

/// `I_sc` over the grid of a kicked-top spec, row by row.
pub fn semiclassical_grid(spec: &ScanSpec) -> Result<Vec<f64>> {
    let ScanModel::KickedTop { j, beta, k, projection, weighting } = spec.model else {
        return Err(Error::Config("semiclassical_grid expects the kicked top".into()));
    };
    let template = CapGridTemplate::with_weighting(j, spec.r, spec.reff_multiple, projection, weighting)?;
    let flow = KickedTopFlow::new(beta, k);
    let mut out = Vec::with_capacity(spec.n_phi * spec.n_z);
    for i in 0..spec.n_phi {
        for jz in 0..spec.n_z {
            let (phi, z) = spec.point(i, jz);
            let cap = template.place(z.clamp(-1.0, 1.0).acos(), phi);
            out.push(crate::semiclassical::semiclassical_qfi(&cap, &flow, spec.t)?.i_sc);
        }
    }
    Ok(out)
}

/// Ratios `T(x_{i+1})/T(x_i)` of consecutive timings.
pub fn growth_ratios(timings: &[Timing]) -> Vec<f64> {
    timings.windows(2).map(|w| w[1].seconds / w[0].seconds).collect()
}

/// Least-squares line through `(x, seconds)`: `(intercept, slope, r^2)`.
pub fn linear_fit(timings: &[Timing]) -> (f64, f64, f64) {
    let n = timings.len() as f64;
    let mx = timings.iter().map(|t| t.x).sum::<f64>() / n;
    let my = timings.iter().map(|t| t.seconds).sum::<f64>() / n;
    let sxy: f64 = timings.iter().map(|t| (t.x - mx) * (t.seconds - my)).sum();
    let sxx: f64 = timings.iter().map(|t| (t.x - mx).powi(2)).sum();
    let syy: f64 = timings.iter().map(|t| (t.seconds - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (my - slope * mx, slope, r2)
}

//! Phase-space scans: per-point exact and semiclassical QFI streamed to CSV,
//! resumable by grid row, with aggregate comparison statistics.

use std::f64::consts::TAU;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::floquet::QfiEvaluator;
use crate::kicked_top::{kicked_top_bundle, KickedTopFlow, KickedTopParams};
use crate::linalg::{self, c64};
use crate::rotor::{rotor_bundle, rotor_coherent_state, RotorFlow, RotorParams};
use crate::semiclassical::{
    build_square_grid, semiclassical_qfi, CapGridTemplate, CapProjection, CapWeighting,
};
use crate::spin::coherent_state;
use crate::stats::mean_and_variance;

/// Version of the CSV and JSON layouts written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

pub const SCAN_HEADER: &str = "phi,z,I_exact,I_sc,delta_I";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Sc,
    Both,
}

impl Method {
    pub fn exact(self) -> bool {
        matches!(self, Method::Exact | Method::Both)
    }
    pub fn semiclassical(self) -> bool {
        matches!(self, Method::Sc | Method::Both)
    }
}

/// Model and its parameters for a phase-space scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ScanModel {
    /// Grid over `(φ, z)`; estimation parameter β.
    KickedTop {
        #[serde(rename = "J")]
        j: f64,
        beta: f64,
        k: f64,
        projection: CapProjection,
        #[serde(default)]
        weighting: CapWeighting,
    },
    /// Grid over `(x, p)` written to the `phi` and `z` columns; estimation
    /// parameter k.
    KickedRotor {
        #[serde(rename = "M")]
        m: usize,
        k: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    #[serde(flatten)]
    pub model: ScanModel,
    pub method: Method,
    pub t: u64,
    pub n_phi: usize,
    pub n_z: usize,
    pub r: u32,
    pub reff_multiple: f64,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_phi == 0 || self.n_z == 0 {
            return Err(Error::Config(format!(
                "grid {}x{} is empty",
                self.n_phi, self.n_z
            )));
        }
        if self.r == 0 || !(self.reff_multiple > 0.0) {
            return Err(Error::Config(format!(
                "invalid resolution r = {} or radius multiple {}",
                self.r, self.reff_multiple
            )));
        }
        match self.model {
            ScanModel::KickedTop { j, beta, k, .. } => {
                KickedTopParams { j, beta, k, t: self.t }.validate()
            }
            ScanModel::KickedRotor { m, k } => RotorParams { m, k, t: self.t }.validate(),
        }
        .map_err(|e| Error::Config(e.to_string()))
    }

    /// Cell-centered grid coordinates of row `i` and column `j`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let a = TAU * (i as f64 + 0.5) / self.n_phi as f64;
        let b = match self.model {
            ScanModel::KickedTop { .. } => -1.0 + 2.0 * (j as f64 + 0.5) / self.n_z as f64,
            ScanModel::KickedRotor { .. } => TAU * (j as f64 + 0.5) / self.n_z as f64,
        };
        (a, b)
    }

    pub fn dim(&self) -> usize {
        match self.model {
            ScanModel::KickedTop { j, .. } => (2.0 * j) as usize + 1,
            ScanModel::KickedRotor { m, .. } => m,
        }
    }

    pub fn heisenberg_time(&self) -> f64 {
        match self.model {
            ScanModel::KickedTop { j, beta, k, .. } => {
                KickedTopParams { j, beta, k, t: self.t }.heisenberg_time()
            }
            ScanModel::KickedRotor { m, k } => RotorParams { m, k, t: self.t }.heisenberg_time(),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("spec serializes").as_bytes())
    }

    /// Peak bytes held by the exact engine (three dense complex matrices).
    pub fn exact_memory_bytes(&self) -> u64 {
        if self.method.exact() {
            3 * linalg::cmat_bytes(self.dim())
        } else {
            0
        }
    }

    pub fn semiclassical_points_per_state(&self) -> usize {
        match self.model {
            ScanModel::KickedTop { .. } => {
                crate::semiclassical::ring_point_count((self.reff_multiple * self.r as f64) as u32)
            }
            ScanModel::KickedRotor { .. } => {
                let reach = self.reff_multiple * self.r as f64;
                (std::f64::consts::PI * reach * reach).round() as usize
            }
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `|I - I_sc|/(I + I_sc)`, with `0/0` taken as 0.
pub fn delta(i: f64, i_sc: f64) -> f64 {
    if i == 0.0 && i_sc == 0.0 {
        0.0
    } else {
        (i - i_sc).abs() / (i + i_sc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRecord {
    pub phi: f64,
    pub z: f64,
    pub i_exact: f64,
    pub i_sc: f64,
    pub delta_i: f64,
}

impl ScanRecord {
    pub fn new(phi: f64, z: f64, i_exact: f64, i_sc: f64) -> Self {
        Self {
            phi,
            z,
            i_exact,
            i_sc,
            delta_i: if i_exact.is_nan() || i_sc.is_nan() { f64::NAN } else { delta(i_exact, i_sc) },
        }
    }

    /// CSV line; floats use the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        format!("{},{},{},{},{}", self.phi, self.z, self.i_exact, self.i_sc, self.delta_i)
    }

    pub fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Config(format!("malformed scan record {line:?}")));
        }
        let f = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("malformed number {s:?} in {line:?}")))
        };
        Ok(Self {
            phi: f(fields[0])?,
            z: f(fields[1])?,
            i_exact: f(fields[2])?,
            i_sc: f(fields[3])?,
            delta_i: f(fields[4])?,
        })
    }
}

/// Phase-space averages and their relative differences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n_records: usize,
    pub mean_i: Option<f64>,
    pub mean_i_sc: Option<f64>,
    pub var_i: Option<f64>,
    pub var_i_sc: Option<f64>,
    pub delta_mean: Option<f64>,
    pub delta_var: Option<f64>,
    pub median_delta_i: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Unweighted means and population variances over the records.
pub fn aggregate(records: &[ScanRecord]) -> Aggregates {
    let stats = |vals: Vec<f64>| {
        if vals.is_empty() || vals.iter().any(|v| v.is_nan()) {
            (None, None)
        } else {
            let (m, v) = mean_and_variance(&vals);
            (finite(m), finite(v))
        }
    };
    let (mean_i, var_i) = stats(records.iter().map(|r| r.i_exact).collect());
    let (mean_i_sc, var_i_sc) = stats(records.iter().map(|r| r.i_sc).collect());
    let pair = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| delta(a, b));
    let mut deltas: Vec<f64> = records.iter().map(|r| r.delta_i).filter(|d| !d.is_nan()).collect();
    let median_delta_i = if deltas.is_empty() || deltas.len() != records.len() {
        None
    } else {
        deltas.sort_by(f64::total_cmp);
        let n = deltas.len();
        Some(if n % 2 == 1 { deltas[n / 2] } else { 0.5 * (deltas[n / 2 - 1] + deltas[n / 2]) })
    };
    Aggregates {
        n_records: records.len(),
        mean_i,
        mean_i_sc,
        var_i,
        var_i_sc,
        delta_mean: pair(mean_i, mean_i_sc),
        delta_var: pair(var_i, var_i_sc),
        median_delta_i,
    }
}

/// Output files of a scan named `<stem>` inside a directory.
#[derive(Clone, Debug)]
pub struct ScanPaths {
    pub csv: PathBuf,
    pub metadata: PathBuf,
    pub timings: PathBuf,
    /// Present while a scan is incomplete; holds the spec hash for resuming.
    pub progress: PathBuf,
}

impl ScanPaths {
    pub fn new(dir: &Path, stem: &str) -> Self {
        Self {
            csv: dir.join(format!("{stem}.csv")),
            metadata: dir.join(format!("{stem}.json")),
            timings: dir.join(format!("{stem}.timings.json")),
            progress: dir.join(format!("{stem}.progress.json")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub schema_version: u32,
    pub kind: String,
    pub crate_version: String,
    pub spec: ScanSpec,
    pub spec_hash: String,
    pub config: Option<serde_json::Value>,
    pub csv_sha256: String,
    pub heisenberg_time: f64,
    pub aggregates: Aggregates,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ScanTimings {
    pub exact_setup_s: f64,
    pub exact_eval_s: f64,
    pub semiclassical_s: f64,
    pub total_s: f64,
    pub rows_computed: usize,
    pub rows_resumed: usize,
}

#[derive(Clone, Debug)]
pub struct ScanResult {
    pub records: Vec<ScanRecord>,
    pub metadata: ScanMetadata,
    pub timings: ScanTimings,
}

#[derive(Serialize, Deserialize)]
struct Progress {
    schema_version: u32,
    spec_hash: String,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Number of complete grid rows already present in `csv`; a trailing
/// partial row is cut off.
fn completed_rows(spec: &ScanSpec, csv: &Path) -> Result<usize> {
    let file = File::open(csv)?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == SCAN_HEADER => {}
        _ => {
            return Err(Error::Config(format!(
                "{} does not start with the scan header",
                csv.display()
            )))
        }
    }
    let mut valid_bytes = SCAN_HEADER.len() as u64 + 1;
    let mut count = 0usize;
    let mut row_bytes = 0u64;
    for line in lines {
        let line = line?;
        let Ok(rec) = ScanRecord::parse(&line) else { break };
        let (i, j) = (count / spec.n_z, count % spec.n_z);
        if i >= spec.n_phi {
            break;
        }
        let (a, b) = spec.point(i, j);
        if rec.phi.to_bits() != a.to_bits() || rec.z.to_bits() != b.to_bits() {
            return Err(Error::Config(format!(
                "{} holds a point ({}, {}) that is not on this grid",
                csv.display(),
                rec.phi,
                rec.z
            )));
        }
        count += 1;
        row_bytes += line.len() as u64 + 1;
        if count % spec.n_z == 0 {
            valid_bytes += row_bytes;
            row_bytes = 0;
        }
    }
    let f = OpenOptions::new().write(true).open(csv)?;
    f.set_len(valid_bytes)?;
    Ok(count / spec.n_z)
}

fn read_records(csv: &Path) -> Result<Vec<ScanRecord>> {
    let file = File::open(csv)?;
    BufReader::new(file)
        .lines()
        .skip(1)
        .map(|l| ScanRecord::parse(&l?))
        .collect()
}

enum ExactEngine {
    KickedTop { eval: QfiEvaluator, j: f64 },
    Rotor { eval: QfiEvaluator, m: usize },
}

impl ExactEngine {
    fn build(spec: &ScanSpec) -> Result<Self> {
        Ok(match spec.model {
            ScanModel::KickedTop { j, beta, k, .. } => {
                let bundle = kicked_top_bundle(&KickedTopParams { j, beta, k, t: spec.t })?;
                ExactEngine::KickedTop { eval: QfiEvaluator::new(bundle), j }
            }
            ScanModel::KickedRotor { m, k } => {
                let bundle = rotor_bundle(&RotorParams { m, k, t: spec.t })?;
                ExactEngine::Rotor { eval: QfiEvaluator::new(bundle), m }
            }
        })
    }

    fn row(&self, spec: &ScanSpec, i: usize) -> Result<Vec<f64>> {
        let states: Vec<Vec<c64>> = (0..spec.n_z)
            .map(|jz| {
                let (a, b) = spec.point(i, jz);
                match self {
                    ExactEngine::KickedTop { j, .. } => {
                        Ok(coherent_state(*j, b.clamp(-1.0, 1.0).acos(), a)?.amplitudes)
                    }
                    ExactEngine::Rotor { m, .. } => rotor_coherent_state(*m, a, b),
                }
            })
            .collect::<Result<_>>()?;
        match self {
            ExactEngine::KickedTop { eval, .. } | ExactEngine::Rotor { eval, .. } => {
                eval.qfi_batch(&states)
            }
        }
    }
}

enum ScEngine {
    KickedTop { template: CapGridTemplate, flow: KickedTopFlow },
    Rotor { flow: RotorFlow, hbar: f64 },
}

impl ScEngine {
    fn build(spec: &ScanSpec) -> Result<Self> {
        Ok(match spec.model {
            ScanModel::KickedTop { j, beta, k, projection, weighting } => ScEngine::KickedTop {
                template: CapGridTemplate::with_weighting(
                    j,
                    spec.r,
                    spec.reff_multiple,
                    projection,
                    weighting,
                )?,
                flow: KickedTopFlow::new(beta, k),
            },
            ScanModel::KickedRotor { m, k } => ScEngine::Rotor {
                flow: RotorFlow { k },
                hbar: TAU / m as f64,
            },
        })
    }

    fn value(&self, spec: &ScanSpec, a: f64, b: f64) -> Result<f64> {
        Ok(match self {
            ScEngine::KickedTop { template, flow } => {
                let cap = template.place(b.clamp(-1.0, 1.0).acos(), a);
                semiclassical_qfi(&cap, flow, spec.t)?.i_sc
            }
            ScEngine::Rotor { flow, hbar } => {
                let grid = build_square_grid([a, b], *hbar, spec.r, spec.reff_multiple)?;
                semiclassical_qfi(&grid, flow, spec.t)?.i_sc
            }
        })
    }
}

/// Runs (or resumes) a scan, streaming rows to `<dir>/<stem>.csv` and
/// finishing with the metadata sidecar `<stem>.json`. Timings go to a
/// separate `<stem>.timings.json` so that CSV and metadata are reproducible
/// byte for byte.
pub fn run_scan(
    spec: &ScanSpec,
    dir: &Path,
    stem: &str,
    config: Option<serde_json::Value>,
) -> Result<ScanResult> {
    spec.validate()?;
    let start = Instant::now();
    fs::create_dir_all(dir)?;
    let paths = ScanPaths::new(dir, stem);
    let hash = spec.hash();

    let mut done_rows = 0;
    if paths.csv.exists() {
        let resumable = if paths.progress.exists() {
            let p: Progress = serde_json::from_slice(&fs::read(&paths.progress)?)?;
            p.spec_hash == hash
        } else if paths.metadata.exists() {
            let m: ScanMetadata = serde_json::from_slice(&fs::read(&paths.metadata)?)?;
            m.spec_hash == hash
        } else {
            false
        };
        if !resumable {
            return Err(Error::Config(format!(
                "{} exists and was produced by a different scan specification",
                paths.csv.display()
            )));
        }
        done_rows = completed_rows(spec, &paths.csv)?;
        log::info!("resuming scan after {done_rows} of {} rows", spec.n_phi);
    } else {
        fs::write(&paths.csv, format!("{SCAN_HEADER}\n"))?;
    }
    write_json(
        &paths.progress,
        &Progress {
            schema_version: SCHEMA_VERSION,
            spec_hash: hash.clone(),
        },
    )?;

    let mut timings = ScanTimings {
        rows_resumed: done_rows,
        ..Default::default()
    };
    if done_rows < spec.n_phi {
        let t0 = Instant::now();
        let exact = if spec.method.exact() {
            Some(ExactEngine::build(spec)?)
        } else {
            None
        };
        let sc = if spec.method.semiclassical() {
            Some(ScEngine::build(spec)?)
        } else {
            None
        };
        timings.exact_setup_s = t0.elapsed().as_secs_f64();

        let file = OpenOptions::new().append(true).open(&paths.csv)?;
        let mut out = BufWriter::new(file);
        for i in done_rows..spec.n_phi {
            let t1 = Instant::now();
            let exact_row = match &exact {
                Some(e) => e.row(spec, i)?,
                None => vec![f64::NAN; spec.n_z],
            };
            timings.exact_eval_s += t1.elapsed().as_secs_f64();
            let t2 = Instant::now();
            for (jz, i_exact) in exact_row.into_iter().enumerate() {
                let (a, b) = spec.point(i, jz);
                let i_sc = match &sc {
                    Some(s) => s.value(spec, a, b)?,
                    None => f64::NAN,
                };
                writeln!(out, "{}", ScanRecord::new(a, b, i_exact, i_sc).to_csv())?;
            }
            timings.semiclassical_s += t2.elapsed().as_secs_f64();
            out.flush()?;
            timings.rows_computed += 1;
            log::debug!("row {}/{} written", i + 1, spec.n_phi);
        }
    }

    let records = read_records(&paths.csv)?;
    let aggregates = aggregate(&records);
    let mut warnings = Vec::new();
    if records.iter().any(|r| r.delta_i.is_finite() && !(0.0..=1.0).contains(&r.delta_i)) {
        warnings.push("some delta_I values fall outside [0, 1]".to_string());
    }
    let metadata = ScanMetadata {
        schema_version: SCHEMA_VERSION,
        kind: "scan".into(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        spec: spec.clone(),
        spec_hash: hash,
        config,
        csv_sha256: sha256_hex(&fs::read(&paths.csv)?),
        heisenberg_time: spec.heisenberg_time(),
        aggregates,
        warnings,
    };
    write_json(&paths.metadata, &metadata)?;
    fs::remove_file(&paths.progress)?;
    timings.total_s = start.elapsed().as_secs_f64();
    write_json(&paths.timings, &timings)?;
    Ok(ScanResult {
        records,
        metadata,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_cases() {
        assert_eq!(delta(0.0, 0.0), 0.0);
        assert_eq!(delta(3.0, 1.0), 0.5);
        assert_eq!(delta(2.0, 2.0), 0.0);
    }

    #[test]
    fn aggregate_cases() {
        let recs = [ScanRecord::new(0.0, 0.0, 1.0, 1.0), ScanRecord::new(0.0, 0.0, 3.0, 3.0)];
        let a = aggregate(&recs);
        assert_eq!(a.mean_i, Some(2.0));
        assert_eq!(a.var_i, Some(1.0));
        assert_eq!(a.delta_mean, Some(0.0));
        let same = [ScanRecord::new(0.0, 0.0, 5.0, 4.0); 4];
        assert_eq!(aggregate(&same).var_i, Some(0.0));
    }

    #[test]
    fn record_round_trip_is_bit_exact() {
        let r = ScanRecord::new(0.1 + 0.2, -1.0 / 3.0, 12345.678901234567, 1e-300, );
        let back = ScanRecord::parse(&r.to_csv()).unwrap();
        assert_eq!(back.phi.to_bits(), r.phi.to_bits());
        assert_eq!(back.i_exact.to_bits(), r.i_exact.to_bits());
        assert_eq!(back.i_sc.to_bits(), r.i_sc.to_bits());
        let nan = ScanRecord::new(1.0, 0.0, 2.0, f64::NAN);
        assert!(ScanRecord::parse(&nan.to_csv()).unwrap().delta_i.is_nan());
    }

    #[test]
    fn cell_centered_grid() {
        let spec = ScanSpec {
            model: ScanModel::KickedTop { j: 1.0, beta: 1.0, k: 0.0, projection: CapProjection::Orthographic, weighting: CapWeighting::CellArea },
            method: Method::Both,
            t: 1,
            n_phi: 4,
            n_z: 2,
            r: 1,
            reff_multiple: 1.0,
        };
        assert_eq!(spec.point(0, 0), (TAU / 8.0, -0.5));
        assert_eq!(spec.point(3, 1), (TAU * 7.0 / 8.0, 0.5));
    }
}

//! Run configuration: a TOML file merged with command-line overrides and
//! resolved into the specs consumed by the scan and series drivers.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan::{Method, ScanModel, ScanSpec};
use crate::semiclassical::{CapProjection, CapWeighting, McCutoff};
use crate::series::{NamedState, SeriesModel, TimeseriesSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    KickedTop,
    KickedRotor,
    HenonHeiles,
}

impl std::str::FromStr for ModelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kicked-top" => Ok(ModelId::KickedTop),
            "kicked-rotor" => Ok(ModelId::KickedRotor),
            "henon-heiles" => Ok(ModelId::HenonHeiles),
            _ => Err(Error::Config(format!(
                "unknown model {s:?} (expected kicked-top, kicked-rotor or henon-heiles)"
            ))),
        }
    }
}

/// Hénon–Heiles settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HenonHeilesConfig {
    pub energy: Option<f64>,
    pub n_max: Option<usize>,
    pub dt: Option<f64>,
    pub cutoff: Option<McCutoff>,
    pub bootstrap: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeseriesConfig {
    pub times: Option<Vec<f64>>,
    pub states: Option<Vec<NamedState>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub r_values: Option<Vec<u32>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Spin quantum numbers for the propagation benchmark.
    #[serde(rename = "J_values")]
    pub j_values: Option<Vec<f64>>,
    pub times: Option<Vec<u64>>,
    pub repeats: Option<usize>,
}

/// Every setting a run can take. Unknown keys are rejected; absent keys fall
/// back to model defaults when the config is resolved.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelId>,
    pub method: Option<Method>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub hbar: Option<f64>,
    pub beta: Option<f64>,
    pub k: Option<f64>,
    pub lambda: Option<f64>,
    pub t: Option<f64>,
    /// `"NPHIxNZ"`.
    pub grid: Option<String>,
    /// Single initial state for `exact` and `semiclassical`.
    pub point: Option<Vec<f64>>,
    pub r: Option<u32>,
    pub reff_multiple: Option<f64>,
    pub projection: Option<CapProjection>,
    pub weighting: Option<CapWeighting>,
    pub n_mc: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// File name stem of the outputs.
    pub name: Option<String>,
    pub verbosity: Option<String>,
    /// Memory budget for the exact engine; defaults to the available memory.
    pub max_memory_gb: Option<f64>,
    pub henon_heiles: Option<HenonHeilesConfig>,
    pub timeseries: Option<TimeseriesConfig>,
    pub converge: Option<ConvergeConfig>,
    pub bench: Option<BenchConfig>,
}

pub const DEFAULT_R: u32 = 50;
pub const DEFAULT_REFF_MULTIPLE: f64 = 5.0;

fn or_default<T: Clone>(base: &Option<T>, over: &Option<T>) -> Option<T> {
    over.clone().or_else(|| base.clone())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// `self` with every field set in `over` replaced.
    pub fn merged(&self, over: &RunConfig) -> RunConfig {
        RunConfig {
            model: or_default(&self.model, &over.model),
            method: or_default(&self.method, &over.method),
            j: or_default(&self.j, &over.j),
            m: or_default(&self.m, &over.m),
            hbar: or_default(&self.hbar, &over.hbar),
            beta: or_default(&self.beta, &over.beta),
            k: or_default(&self.k, &over.k),
            lambda: or_default(&self.lambda, &over.lambda),
            t: or_default(&self.t, &over.t),
            grid: or_default(&self.grid, &over.grid),
            point: or_default(&self.point, &over.point),
            r: or_default(&self.r, &over.r),
            reff_multiple: or_default(&self.reff_multiple, &over.reff_multiple),
            projection: or_default(&self.projection, &over.projection),
            weighting: or_default(&self.weighting, &over.weighting),
            n_mc: or_default(&self.n_mc, &over.n_mc),
            seed: or_default(&self.seed, &over.seed),
            threads: or_default(&self.threads, &over.threads),
            out: or_default(&self.out, &over.out),
            name: or_default(&self.name, &over.name),
            verbosity: or_default(&self.verbosity, &over.verbosity),
            max_memory_gb: or_default(&self.max_memory_gb, &over.max_memory_gb),
            henon_heiles: or_default(&self.henon_heiles, &over.henon_heiles),
            timeseries: or_default(&self.timeseries, &over.timeseries),
            converge: or_default(&self.converge, &over.converge),
            bench: or_default(&self.bench, &over.bench),
        }
    }

    pub fn model_id(&self) -> Result<ModelId> {
        self.model
            .ok_or_else(|| Error::Config("no model given (use --model or `model = ...`)".into()))
    }

    fn require<T: Copy>(value: Option<T>, name: &str, model: ModelId) -> Result<T> {
        value.ok_or_else(|| Error::Config(format!("{model:?} runs need `{name}`")))
    }

    fn integer_t(&self, default: u64) -> Result<u64> {
        match self.t {
            None => Ok(default),
            Some(t) if t >= 0.0 && t.fract() == 0.0 && t <= u64::MAX as f64 => Ok(t as u64),
            Some(t) => Err(Error::Config(format!("t = {t} must be a nonnegative integer"))),
        }
    }

    pub fn grid_dims(&self) -> Result<Option<(usize, usize)>> {
        self.grid.as_deref().map(parse_grid).transpose()
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(1)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn name_or(&self, default: &str) -> String {
        self.name.clone().unwrap_or_else(|| default.to_string())
    }

    pub fn max_memory_bytes(&self) -> Option<u64> {
        self.max_memory_gb.map(|g| (g * 1e9) as u64)
    }

    /// Grid scan spec for the kicked models.
    pub fn scan_spec(&self, default_method: Method) -> Result<ScanSpec> {
        let model = self.model_id()?;
        let (n_phi, n_z) = self.grid_dims()?.unwrap_or((55, 38));
        let model_spec = match model {
            ModelId::KickedTop => ScanModel::KickedTop {
                j: Self::require(self.j, "J", model)?,
                beta: self.beta.unwrap_or(1.5),
                k: self.k.unwrap_or(3.0),
                projection: self.projection.unwrap_or_default(),
                weighting: self.weighting.unwrap_or_default(),
            },
            ModelId::KickedRotor => ScanModel::KickedRotor {
                m: Self::require(self.m, "M", model)?,
                k: self.k.unwrap_or(1.3),
            },
            ModelId::HenonHeiles => {
                return Err(Error::Config(
                    "phase-space grid scans cover the kicked models; use `timeseries` or \
                     `--point` for Hénon–Heiles"
                        .into(),
                ))
            }
        };
        let default_t = match model {
            ModelId::KickedRotor => 16,
            _ => 8,
        };
        let spec = ScanSpec {
            model: model_spec,
            method: self.method.unwrap_or(default_method),
            t: self.integer_t(default_t)?,
            n_phi,
            n_z,
            r: self.r.unwrap_or(DEFAULT_R),
            reff_multiple: self.reff_multiple.unwrap_or(DEFAULT_REFF_MULTIPLE),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Time-series spec; `single` replaces the state list and time list with
    /// `point` and `t`.
    pub fn timeseries_spec(&self, method: Method, single: bool) -> Result<TimeseriesSpec> {
        let model = self.model_id()?;
        let r = self.r.unwrap_or(DEFAULT_R);
        let reff_multiple = self.reff_multiple.unwrap_or(DEFAULT_REFF_MULTIPLE);
        let series_model = match model {
            ModelId::KickedTop => SeriesModel::KickedTop {
                j: Self::require(self.j, "J", model)?,
                beta: self.beta.unwrap_or(1.5),
                k: self.k.unwrap_or(3.0),
                r,
                reff_multiple,
                projection: self.projection.unwrap_or_default(),
                weighting: self.weighting.unwrap_or_default(),
            },
            ModelId::KickedRotor => SeriesModel::KickedRotor {
                m: Self::require(self.m, "M", model)?,
                k: self.k.unwrap_or(1.3),
                r,
                reff_multiple,
            },
            ModelId::HenonHeiles => {
                let hh = self.henon_heiles.clone().unwrap_or_default();
                SeriesModel::HenonHeiles {
                    hbar: self.hbar.unwrap_or(1.0 / 50.0),
                    lambda: self.lambda.unwrap_or(1.0),
                    energy: hh.energy.unwrap_or(1.0 / 12.0),
                    n_max: hh.n_max.unwrap_or(49),
                    dt: hh.dt.unwrap_or(1e-3),
                    n_mc: self.n_mc.unwrap_or(50_000),
                    seed: self.seed.unwrap_or(0),
                    cutoff: hh.cutoff.unwrap_or_default(),
                    bootstrap: hh.bootstrap.unwrap_or(100),
                }
            }
        };
        let ts = self.timeseries.clone().unwrap_or_default();
        let (states, times) = if single {
            let point = self.point.clone().ok_or_else(|| {
                Error::Config("a single-point run needs `point` (--point a,b[,c])".into())
            })?;
            let t = self
                .t
                .ok_or_else(|| Error::Config("a single-point run needs `t`".into()))?;
            (vec![NamedState { label: "point".into(), center: point }], vec![t])
        } else {
            let states = ts
                .states
                .ok_or_else(|| Error::Config("timeseries needs `[timeseries] states`".into()))?;
            let times = ts
                .times
                .ok_or_else(|| Error::Config("timeseries needs `[timeseries] times`".into()))?;
            (states, times)
        };
        let spec = TimeseriesSpec {
            model: series_model,
            states,
            times,
            exact: method.exact(),
            semiclassical: method.semiclassical(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn r_values(&self) -> Vec<u32> {
        self.converge
            .as_ref()
            .and_then(|c| c.r_values.clone())
            .unwrap_or_else(|| (1..=50).collect())
    }
}

/// Parses `"NPHIxNZ"`.
pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("grid {s:?} is not of the form NPHIxNZ"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(Error::Config(format!("grid {s:?} is empty")));
    }
    Ok((a, b))
}

/// `MemAvailable` from `/proc/meminfo`, if readable.
pub fn available_memory_bytes() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/meminfo").ok()?;
    text.lines()
        .find_map(|l| l.strip_prefix("MemAvailable:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse::<u64>().ok())
        .map(|kb| kb * 1024)
}

/// Refuses runs whose estimated peak memory exceeds the budget.
pub fn check_memory(required: u64, budget: Option<u64>) -> Result<()> {
    let Some(limit) = budget.or_else(available_memory_bytes) else {
        return Ok(());
    };
    if required > limit {
        return Err(Error::Resources(format!(
            "the exact engine needs about {:.2} GB but only {:.2} GB are available",
            required as f64 / 1e9,
            limit as f64 / 1e9
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::from_toml("[henon_heiles]\nenergy = 0.1\nwat = 2"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn parses_nested_config() {
        let cfg = RunConfig::from_toml(
            r#"
            model = "kicked-top"
            J = 250
            beta = 1.5
            k = 2
            [timeseries]
            times = [1, 2, 4]
            states = [{ label = "a", center = [1.0, 0.1] }]
            "#,
        )
        .unwrap();
        let spec = cfg.timeseries_spec(Method::Both, false).unwrap();
        assert_eq!(spec.times, vec![1.0, 2.0, 4.0]);
        assert_eq!(spec.states[0].label, "a");
    }

    #[test]
    fn overrides_win() {
        let base = RunConfig { j: Some(10.0), k: Some(1.0), ..Default::default() };
        let over = RunConfig { k: Some(2.0), ..Default::default() };
        let m = base.merged(&over);
        assert_eq!((m.j, m.k), (Some(10.0), Some(2.0)));
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("220x150").unwrap(), (220, 150));
        assert!(parse_grid("0x3").is_err());
        assert!(parse_grid("12").is_err());
    }

    #[test]
    fn memory_refusal() {
        assert!(matches!(check_memory(10, Some(5)), Err(Error::Resources(_))));
        assert!(check_memory(5, Some(10)).is_ok());
    }

    #[test]
    fn fractional_time_rejected_for_scans() {
        let cfg = RunConfig {
            model: Some(ModelId::KickedTop),
            j: Some(5.0),
            t: Some(1.5),
            ..Default::default()
        };
        assert!(matches!(cfg.scan_spec(Method::Both), Err(Error::Config(_))));
    }
}

//! Run configuration: a single JSON document with a fixed schema.
//!
//! Missing optional sections take the defaults below; the normalised copy
//! written next to the outputs spells every one of them out.

use std::path::PathBuf;

use roadfield::pde::{init_state, GridSpec, Mode, RunOptions, SourceSpec, STEADY_TOL};
use roadfield::{ModelError, ModelParams, PdeError};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: ModelParams,
    pub grid: GridSpec,
    #[serde(default)]
    pub sources: Sources,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub omega: OmegaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sources {
    #[serde(default = "Sources::default_i0")]
    pub i0: SourceSpec,
    #[serde(default)]
    pub t0: SourceSpec,
}

impl Sources {
    fn default_i0() -> SourceSpec {
        SourceSpec::disk([0.0, 1.0], 1.0, 1.0)
    }
}

impl Default for Sources {
    fn default() -> Self {
        Self { i0: Self::default_i0(), t0: SourceSpec::none() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_end: f64,
    pub snapshot_dt: f64,
    /// Spacing of the recorded road and wall traces; `null` keeps every step.
    pub trace_dt: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_end: 40.0, snapshot_dt: 10.0, trace_dt: Some(0.1) }
    }
}

impl TimeConfig {
    pub fn run_options(&self) -> RunOptions {
        RunOptions { t_end: self.t_end, snapshot_dt: self.snapshot_dt, trace_dt: self.trace_dt }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadyConfig {
    pub tol: f64,
    pub t_max: f64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self { tol: STEADY_TOL, t_max: 2000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub run_id: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), run_id: "run".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    /// Region threshold relative to `v_*` (to the no-road maximum when `R0 < 1`).
    pub rel_tol: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `params.<name>`, `R0` (moves β) or `lambda` (moves μ).
    pub axis: String,
    pub values: Vec<f64>,
    /// Also run `simulate` per entry and report the measured speed.
    #[serde(default)]
    pub simulate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OmegaConfig {
    pub lambdas: Vec<f64>,
    /// Diffusivity ratio of the finite companion column.
    pub dd: f64,
    pub rho: f64,
}

impl Default for OmegaConfig {
    fn default() -> Self {
        Self { lambdas: vec![0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0], dd: 1e4, rho: 1e-3 }
    }
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), reason: reason.into() }
}

fn model_path(name: &str) -> String {
    format!("params.{name}")
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        invalid(if path == "." { "(document)".to_string() } else { path }, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate().map_err(|e| match e {
            ModelError::InvalidParameter { name, value } => {
                invalid(model_path(name), format!("must be positive and finite, got {value}"))
            }
            other => invalid("params", other.to_string()),
        })?;
        self.grid.validate().map_err(|e| invalid("grid", e.to_string()))?;
        for (name, src) in [("i0", &self.sources.i0), ("t0", &self.sources.t0)] {
            src.validate().map_err(|e| invalid(format!("sources.{name}"), e.to_string()))?;
        }
        if self.sources.i0.is_none() {
            return Err(invalid("sources.i0", "the infected source must not vanish identically"));
        }
        // Support placement is checked by building the initial state.
        init_state(self.grid, self.mode, &self.sources.i0, &self.sources.t0, &self.params).map_err(|e| match e {
            PdeError::SourceNearBoundary { which, .. } => invalid(format!("sources.{which}"), e.to_string()),
            PdeError::Source(_) => invalid("sources.i0", e.to_string()),
            other => invalid("grid", other.to_string()),
        })?;
        let t = &self.time;
        if !(t.t_end.is_finite() && t.t_end >= 0.0) {
            return Err(invalid("time.t_end", format!("must be >= 0, got {}", t.t_end)));
        }
        if !(t.snapshot_dt > 0.0) {
            return Err(invalid("time.snapshot_dt", format!("must be > 0, got {}", t.snapshot_dt)));
        }
        if let Some(tr) = t.trace_dt {
            if !(tr > 0.0) {
                return Err(invalid("time.trace_dt", format!("must be > 0, got {tr}")));
            }
        }
        if !(self.steady.tol > 0.0) {
            return Err(invalid("steady.tol", format!("must be > 0, got {}", self.steady.tol)));
        }
        if !(self.steady.t_max > 0.0) {
            return Err(invalid("steady.t_max", format!("must be > 0, got {}", self.steady.t_max)));
        }
        if !(self.compare.rel_tol >= 0.0) {
            return Err(invalid("compare.rel_tol", "must be >= 0"));
        }
        validate_run_id(&self.output.run_id).map_err(|r| invalid("output.run_id", r))?;
        if let Some(sweep) = &self.sweep {
            axis_setter(&sweep.axis).map_err(|r| invalid("sweep.axis", r))?;
            if sweep.values.is_empty() {
                return Err(invalid("sweep.values", "must not be empty"));
            }
            if let Some(v) = sweep.values.iter().find(|v| !v.is_finite()) {
                return Err(invalid("sweep.values", format!("must be finite, got {v}")));
            }
        }
        let om = &self.omega;
        if let Some(l) = om.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(invalid("omega.lambdas", format!("must be >= 0, got {l}")));
        }
        if !(om.dd > 0.0) {
            return Err(invalid("omega.dd", format!("must be > 0, got {}", om.dd)));
        }
        if !(om.rho >= 0.0) {
            return Err(invalid("omega.rho", format!("must be >= 0, got {}", om.rho)));
        }
        Ok(())
    }
}

pub fn validate_run_id(id: &str) -> Result<(), String> {
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) || id.starts_with('.') {
        return Err(format!("`{id}` must be non-empty and use only letters, digits, '-', '_' and '.'"));
    }
    Ok(())
}

/// Applies one sweep value to a parameter set.
pub type AxisSetter = fn(&mut ModelParams, f64) -> Result<(), String>;

pub fn axis_setter(axis: &str) -> Result<AxisSetter, String> {
    let f: AxisSetter = match axis {
        "params.d" => |p, v| {
            p.d = v;
            Ok(())
        },
        "params.D" => |p, v| {
            p.road_d = v;
            Ok(())
        },
        "params.alpha" => |p, v| {
            p.alpha = v;
            Ok(())
        },
        "params.beta" => |p, v| {
            p.beta = v;
            Ok(())
        },
        "params.mu" => |p, v| {
            p.mu = v;
            Ok(())
        },
        "params.nu" => |p, v| {
            p.nu = v;
            Ok(())
        },
        "params.s0" => |p, v| {
            p.s0 = v;
            Ok(())
        },
        "R0" => |p, v| {
            p.beta = v * p.alpha / p.s0;
            Ok(())
        },
        "lambda" => |p, v| {
            let r = p.reduce().map_err(|e| e.to_string())?;
            let w = r.w_sir.ok_or("lambda is undefined when R0 <= 1")?;
            p.mu = v * r.nu_bar * w * p.alpha;
            Ok(())
        },
        other => {
            return Err(format!(
                "unknown axis `{other}`; expected params.<d|D|alpha|beta|mu|nu|s0>, R0 or lambda"
            ))
        }
    };
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "mode": "roadfield_uv",
        "params": {"d": 1, "D": 10, "alpha": 1, "beta": 2, "mu": 1, "nu": 1, "s0": 1},
        "grid": {"lx": 20, "ly": 5, "h": 0.5}
    }"#;

    #[test]
    fn defaults_are_filled_in() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.grid.cfl, 0.4);
        assert_eq!(c.steady.tol, 1e-8);
        let echo = serde_json::to_string(&c).unwrap();
        assert!(echo.contains("\"cfl\":0.4"));
        assert_eq!(parse_config(&echo).unwrap(), c);
    }

    #[test]
    fn errors_name_the_key() {
        let bad = MINIMAL.replace("\"d\": 1", "\"d\": -1");
        let err = parse_config(&bad).unwrap_err();
        assert!(matches!(&err, CliError::Config { path, .. } if path == "params.d"), "{err}");

        let unknown = MINIMAL.replace("\"h\": 0.5", "\"h\": 0.5, \"hx\": 1");
        let err = parse_config(&unknown).unwrap_err();
        assert!(matches!(&err, CliError::Config { path, .. } if path.starts_with("grid")), "{err}");

        let missing = MINIMAL.replace("\"alpha\": 1, ", "");
        let err = parse_config(&missing).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");

        let near = MINIMAL.replace(
            "\"grid\"",
            "\"sources\": {\"i0\": {\"shape\": \"disk-indicator\", \"center\": [12, 1], \"radius\": 1, \"amplitude\": 1}}, \"grid\"",
        );
        let err = parse_config(&near).unwrap_err();
        assert!(matches!(&err, CliError::Config { path, .. } if path == "sources.i0"), "{err}");
    }

    #[test]
    fn sweep_axes() {
        let mut p = ModelParams::new(1.0, 10.0, 1.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        axis_setter("R0").unwrap()(&mut p, 1.5).unwrap();
        assert_eq!(p.beta, 1.5);
        axis_setter("lambda").unwrap()(&mut p, 2.0).unwrap();
        let r = p.reduce().unwrap();
        assert!((r.lambda.unwrap() - 2.0).abs() < 1e-12);
        assert!(axis_setter("params.q").is_err());
        let with_sweep = MINIMAL.replace("\"grid\"", "\"sweep\": {\"axis\": \"gamma\", \"values\": [1]}, \"grid\"");
        let err = parse_config(&with_sweep).unwrap_err();
        assert!(matches!(&err, CliError::Config { path, .. } if path == "sweep.axis"));
    }
}

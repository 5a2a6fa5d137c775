//! Experiment configuration: a JSON file mirrors [`ExperimentSpec`], and
//! command-line flags override individual fields.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use idnc_core::mdp::MdpGuards;
use idnc_core::sim::ScenarioConfig;
use idnc_core::SelectionConfig;

use crate::CliError;

pub const SCHEDULER_NAMES: [&str; 4] = ["tsmis", "pcb", "fcd", "mdp"];

#[derive(Clone, Debug, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    #[serde(default = "default_schedulers")]
    pub schedulers: Vec<String>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub mdp_guards: MdpGuards,
}

fn default_schedulers() -> Vec<String> {
    vec!["tsmis".into()]
}

fn default_runs() -> u64 {
    100
}

#[derive(Clone, Debug, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Theta,
    Connectivity,
    Devices,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "theta" => Ok(SweepAxis::Theta),
            "connectivity" => Ok(SweepAxis::Connectivity),
            "devices" => Ok(SweepAxis::Devices),
            other => Err(CliError::config(format!(
                "unknown sweep axis '{other}'; expected theta, connectivity or devices"
            ))),
        }
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let spec: ExperimentSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("cannot parse {}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if self.schedulers.is_empty() {
            return Err(CliError::config("scheduler list is empty".into()));
        }
        for name in &self.schedulers {
            if !SCHEDULER_NAMES.contains(&name.as_str()) {
                return Err(CliError::config(format!(
                    "unknown scheduler '{name}'; expected one of {SCHEDULER_NAMES:?}"
                )));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(CliError::config("sweep value list is empty".into()));
            }
            if sweep.values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::config(
                    "sweep values must be strictly increasing".into(),
                ));
            }
        }
        if self.runs == 0 {
            return Err(CliError::config("runs must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies `--scheduler a,b`, `--sweep axis=v1,v2`, `--runs`, `--seed`
    /// and `--out` overrides, then revalidates.
    pub fn with_overrides(
        mut self,
        schedulers: Option<&str>,
        sweep: Option<&str>,
        runs: Option<u64>,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        if let Some(list) = schedulers {
            self.schedulers = list.split(',').map(|s| s.trim().to_string()).collect();
        }
        if let Some(expr) = sweep {
            self.sweep = Some(parse_sweep(expr)?);
        }
        if let Some(r) = runs {
            self.runs = r;
        }
        if let Some(s) = seed {
            self.scenario.seed = s;
        }
        if out.is_some() {
            self.out = out;
        }
        self.validate()?;
        Ok(self)
    }

    /// Scenario with one sweep-axis value substituted.
    pub fn scenario_for(&self, axis: SweepAxis, value: f64) -> Result<ScenarioConfig, CliError> {
        let mut cfg = self.scenario.clone();
        match axis {
            SweepAxis::Theta => {
                cfg.theta = as_count(value, "theta")? as u32;
            }
            SweepAxis::Devices => {
                cfg.m = as_count(value, "devices")?;
            }
            SweepAxis::Connectivity => {
                if !(0.0 < value && value <= 1.0) {
                    return Err(CliError::config(format!(
                        "connectivity value {value} outside (0, 1]"
                    )));
                }
                cfg.target_connectivity = value;
            }
        }
        Ok(cfg)
    }
}

fn as_count(value: f64, what: &str) -> Result<usize, CliError> {
    if value.fract() != 0.0 || value < 1.0 {
        return Err(CliError::config(format!(
            "{what} sweep value {value} must be a positive integer"
        )));
    }
    Ok(value as usize)
}

/// Parses `axis=v1,v2,...`.
pub fn parse_sweep(expr: &str) -> Result<SweepSpec, CliError> {
    let (axis, values) = expr
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("sweep '{expr}' must look like axis=v1,v2")))?;
    let axis = SweepAxis::parse(axis.trim())?;
    let values: Result<Vec<f64>, _> = values
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect();
    let values =
        values.map_err(|e| CliError::config(format!("bad sweep value in '{expr}': {e}")))?;
    Ok(SweepSpec { axis, values })
}

/// Formats a sweep value for the CSV column: integers without a decimal
/// point, everything else in shortest round-trip form.
pub fn format_sweep_value(axis: SweepAxis, value: f64) -> String {
    match axis {
        SweepAxis::Theta | SweepAxis::Devices => format!("{}", value as u64),
        SweepAxis::Connectivity => format!("{value}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "scenario": {"m": 4, "theta": 5, "target_connectivity": 0.5, "seed": 7},
            "schedulers": ["tsmis", "pcb"],
            "runs": 10
        }"#
        .to_string()
    }

    #[test]
    fn parses_minimal_config() {
        let spec: ExperimentSpec = serde_json::from_str(&minimal_json()).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.scenario.m, 4);
        assert_eq!(spec.scenario.reception_range, (0.65, 0.9));
        assert_eq!(spec.schedulers, vec!["tsmis", "pcb"]);
        assert!(spec.sweep.is_none());
    }

    #[test]
    fn rejects_unknown_scheduler_and_unsorted_sweep() {
        let mut spec: ExperimentSpec = serde_json::from_str(&minimal_json()).unwrap();
        spec.schedulers = vec!["bogus".into()];
        assert!(spec.validate().is_err());

        let mut spec: ExperimentSpec = serde_json::from_str(&minimal_json()).unwrap();
        spec.sweep = Some(SweepSpec {
            axis: SweepAxis::Theta,
            values: vec![5.0, 3.0],
        });
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sweep_expression_round_trip() {
        let sweep = parse_sweep("theta=2,4,6").unwrap();
        assert_eq!(sweep.axis, SweepAxis::Theta);
        assert_eq!(sweep.values, vec![2.0, 4.0, 6.0]);
        assert!(parse_sweep("bogus").is_err());
        assert!(parse_sweep("what=1").is_err());
    }

    #[test]
    fn axis_substitution() {
        let spec: ExperimentSpec = serde_json::from_str(&minimal_json()).unwrap();
        let cfg = spec.scenario_for(SweepAxis::Theta, 9.0).unwrap();
        assert_eq!(cfg.theta, 9);
        let cfg = spec.scenario_for(SweepAxis::Devices, 6.0).unwrap();
        assert_eq!(cfg.m, 6);
        let cfg = spec.scenario_for(SweepAxis::Connectivity, 0.3).unwrap();
        assert_eq!(cfg.target_connectivity, 0.3);
        assert!(spec.scenario_for(SweepAxis::Theta, 2.5).is_err());
    }

    #[test]
    fn sweep_value_formatting() {
        assert_eq!(format_sweep_value(SweepAxis::Theta, 7.0), "7");
        assert_eq!(format_sweep_value(SweepAxis::Connectivity, 0.3), "0.3");
        assert_eq!(format_sweep_value(SweepAxis::Devices, 15.0), "15");
    }
}

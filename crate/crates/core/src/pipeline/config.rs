use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codegen::Backend;
use crate::error::PipelineError;
use crate::eval::{CostModelParams, ExternalCommands, ExternalParams, DEFAULT_REL_TOL};
use crate::frontend::{ParseOptions, DEFAULT_TRIP_COUNT};
use crate::ga::{GaParams, DEFAULT_EXHAUSTIVE_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Mini,
    IrDocument,
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputKind::Mini => "mini",
            InputKind::IrDocument => "ir_document",
        })
    }
}

impl FromStr for InputKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mini" => Ok(InputKind::Mini),
            "ir_document" | "ir" => Ok(InputKind::IrDocument),
            _ => Err(format!("unknown input kind `{s}` (expected mini or ir_document)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    #[serde(default)]
    pub build_cmd: Option<String>,
    pub run_cmd: String,
    #[serde(default)]
    pub reference_output: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default)]
    pub keep_work_dirs: bool,
}

fn default_timeout() -> f64 {
    ExternalParams::default().timeout_seconds
}

fn default_rel_tol() -> f64 {
    DEFAULT_REL_TOL
}

impl ExternalConfig {
    pub fn split(&self) -> (ExternalCommands, ExternalParams) {
        (
            ExternalCommands {
                build_cmd: self.build_cmd.clone(),
                run_cmd: self.run_cmd.clone(),
                reference_output: self.reference_output.clone(),
            },
            ExternalParams {
                timeout_seconds: self.timeout_seconds,
                rel_tol: self.rel_tol,
                parallel: self.parallel,
                keep_work_dirs: self.keep_work_dirs,
            },
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaluatorConfig {
    CostModel(CostModelParams),
    External(ExternalConfig),
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig::CostModel(CostModelParams::default())
    }
}

/// Everything one pipeline run depends on. Echoed into the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub input_kind: InputKind,
    pub backend: Backend,
    pub evaluator: EvaluatorConfig,
    pub ga: GaParams,
    pub db: Option<PathBuf>,
    pub allow_interface_change: bool,
    pub out: PathBuf,
    /// Cross-enumerate block subsets with exhaustive loop search.
    pub exhaustive: bool,
    pub exhaustive_cap: usize,
    pub default_trip_count: u64,
    /// Values for symbolic loop bounds in mini sources.
    pub symbols: BTreeMap<String, i64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            input_kind: InputKind::Mini,
            backend: Backend::COpenacc,
            evaluator: EvaluatorConfig::default(),
            ga: GaParams::default(),
            db: None,
            allow_interface_change: false,
            out: PathBuf::from("out"),
            exhaustive: false,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            default_trip_count: DEFAULT_TRIP_COUNT,
            symbols: BTreeMap::new(),
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.input.as_os_str().is_empty() {
            return bad("no input given".into());
        }
        if !self.input.is_file() {
            return bad(format!("input {} does not exist", self.input.display()));
        }
        if let Some(db) = &self.db {
            if !db.is_file() {
                return bad(format!("pattern DB {} does not exist", db.display()));
            }
        }
        if self.out.as_os_str().is_empty() {
            return bad("no output directory given".into());
        }
        self.ga.check().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.exhaustive_cap > 30 {
            return bad(format!("exhaustive_cap {} is above the supported 30", self.exhaustive_cap));
        }
        if self.default_trip_count == 0 {
            return bad("default_trip_count must be positive".into());
        }
        if let EvaluatorConfig::CostModel(p) = &self.evaluator {
            p.check().map_err(PipelineError::Config)?;
        }
        Ok(())
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions { symbols: self.symbols.clone(), default_trip_count: self.default_trip_count }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluator_config_json() {
        let c: EvaluatorConfig = serde_json::from_str(r#"{"kind":"cost_model","kernel_launch_overhead":0.5}"#).unwrap();
        assert_eq!(c, EvaluatorConfig::CostModel(CostModelParams { kernel_launch_overhead: 0.5, ..Default::default() }));
        let c: EvaluatorConfig = serde_json::from_str(r#"{"kind":"external","run_cmd":"./run.sh"}"#).unwrap();
        let EvaluatorConfig::External(e) = c else { panic!() };
        assert_eq!(e.timeout_seconds, 300.0);
        assert!(serde_json::from_str::<EvaluatorConfig>(r#"{"kind":"cost_model","bogus":1}"#).is_err());
    }

    #[test]
    fn missing_input_is_config_error() {
        let c = PipelineConfig { input: "does/not/exist.mini".into(), ..Default::default() };
        assert_eq!(c.check().unwrap_err().exit_code(), 2);
        assert_eq!(PipelineConfig::default().check().unwrap_err().exit_code(), 2);
    }
}

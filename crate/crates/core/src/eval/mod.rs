//! Measurement of candidate offload patterns.

mod cost;
mod external;
mod validate;

pub use cost::{cost_model_time, CostModel, CostModelParams};
pub use external::{ExternalCommands, ExternalParams, ExternalRunner, TIME_LINE_PREFIX};
pub use validate::{parse_numbers, validate_output, DEFAULT_REL_TOL, TOLERANCE_FLOOR};

use serde::{Deserialize, Serialize};

use crate::codegen::EmittedCode;
use crate::ir::ProgramModel;
use crate::pattern::OffloadPattern;
use crate::transfer::TransferPlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Valid,
    NumericMismatch,
    CompileError,
    RuntimeError,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementResult {
    /// `None` is the INFEASIBLE sentinel; present iff `validity` is valid.
    pub time_seconds: Option<f64>,
    pub validity: Validity,
    pub diagnostics: String,
}

impl MeasurementResult {
    pub fn valid(time: f64) -> Self {
        MeasurementResult { time_seconds: Some(time), validity: Validity::Valid, diagnostics: String::new() }
    }

    pub fn infeasible(validity: Validity, diagnostics: impl Into<String>) -> Self {
        debug_assert!(validity != Validity::Valid);
        MeasurementResult { time_seconds: None, validity, diagnostics: diagnostics.into() }
    }

    pub fn is_feasible(&self) -> bool {
        self.time_seconds.is_some()
    }
}

/// Everything an evaluator may look at for one candidate.
#[derive(Clone, Copy, Debug)]
pub struct EvaluationRequest<'a> {
    pub model: &'a ProgramModel,
    pub pattern: &'a OffloadPattern,
    pub plan: &'a TransferPlan,
    pub code: &'a EmittedCode,
    /// Record ids of the library blocks already substituted into `model`.
    pub replaced_blocks: &'a [String],
}

pub trait Evaluator: Sync {
    fn id(&self) -> &str;

    /// Whether `measure` may run for several candidates at once.
    fn concurrency_safe(&self) -> bool;

    fn measure(&self, request: &EvaluationRequest<'_>) -> MeasurementResult;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Block,
    Loop,
}

/// One line of `measurements.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub seq: usize,
    pub stage: Stage,
    /// Replaced block record ids in effect.
    pub blocks: Vec<String>,
    pub genome: String,
    #[serde(serialize_with = "time_or_inf")]
    pub time: Option<f64>,
    pub validity: Validity,
    pub evaluator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation: Option<usize>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub diagnostics: String,
}

/// Writes a time as a JSON number, or the string `"inf"` for INFEASIBLE.
pub fn time_or_inf<S: serde::Serializer>(time: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match time {
        Some(t) => s.serialize_f64(*t),
        None => s.serialize_str("inf"),
    }
}

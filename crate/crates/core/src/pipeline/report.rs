use std::fs;
use std::path::Path;

use serde::Serialize;

use super::PipelineConfig;
use crate::block::{BlockCandidate, Dropped, SubsetMeasurement};
use crate::codegen::{Backend, EmittedCode};
use crate::error::PipelineError;
use crate::eval::{time_or_inf, MeasurementRecord, Stage};
use crate::frontend::ParallelizabilityVerdict;
use crate::ga::SearchResult;
use crate::ir::LoopId;
use crate::transfer::DirectiveRecord;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const MEASUREMENTS_FILE: &str = "measurements.jsonl";

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    /// Seconds since the Unix epoch; the only field that differs between identical runs.
    pub timestamp_unix: u64,
    pub input: String,
    pub backend: Backend,
    pub evaluator: String,
    /// `None` when no measurement was valid.
    pub chosen: Option<ChosenPattern>,
    #[serde(serialize_with = "time_or_inf")]
    pub baseline_time: Option<f64>,
    pub blocks: BlockStageReport,
    pub loops: LoopStageReport,
    pub evaluations_performed: usize,
    pub config: PipelineConfig,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChosenPattern {
    /// `seq` of the measurement this pattern comes from.
    pub measurement: usize,
    pub stage: Stage,
    pub blocks: Vec<String>,
    pub genome: String,
    /// GPU kernel roots, as loop ids of the residual program.
    pub gpu_loops: Vec<LoopId>,
    pub time: f64,
    pub code_path: String,
    pub transfers: Vec<DirectiveRecord>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BlockStageReport {
    pub candidates: Vec<BlockCandidate>,
    pub dropped: Vec<Dropped>,
    /// Matches whose interface differs from the library's; not applied.
    pub pending_confirmation: Vec<BlockCandidate>,
    pub subsets: Vec<SubsetMeasurement>,
    /// Record ids of the fastest block subset.
    pub applied: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    Ga,
    Exhaustive,
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopStageReport {
    pub mode: LoopMode,
    pub runs: Vec<LoopRun>,
}

/// Loop search on the residual program of one block subset.
#[derive(Clone, Debug, Serialize)]
pub struct LoopRun {
    pub blocks: Vec<String>,
    pub verdicts: Vec<ParallelizabilityVerdict>,
    pub genome_space: Vec<LoopId>,
    /// `None` when no loop passed the screen.
    pub result: Option<SearchResult>,
    pub mode: LoopMode,
}

/// Everything a run writes to its output directory.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub report: Report,
    pub measurements: Vec<MeasurementRecord>,
    pub code: EmittedCode,
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io { path: path.display().to_string(), source })
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn measurements_jsonl(records: &[MeasurementRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

/// Writes `report.json`, `measurements.jsonl` and the chosen `candidate.<ext>`, overwriting.
pub fn write_report(output: &PipelineOutput, dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io { path: dir.display().to_string(), source })?;
    write(&dir.join(output.code.backend.file_name()), &output.code.text)?;
    write(&dir.join(MEASUREMENTS_FILE), &measurements_jsonl(&output.measurements))?;
    write(&dir.join(REPORT_FILE), &report_json(&output.report))
}

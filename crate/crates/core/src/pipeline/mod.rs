//! The full run: block offload trial, loop search on the residual program,
//! selection of the fastest measured pattern, and report output.

mod config;
mod report;

pub use config::{EvaluatorConfig, ExternalConfig, InputKind, PipelineConfig};
pub use report::{
    measurements_jsonl, report_json, write_report, BlockStageReport, ChosenPattern, LoopMode, LoopRun,
    LoopStageReport, PipelineOutput, Report, MEASUREMENTS_FILE, REPORT_FILE, REPORT_SCHEMA_VERSION,
};

use std::time::{SystemTime, UNIX_EPOCH};

use crate::block::{apply_replacements, find_candidates, load_pattern_db, search_block_combination, BlockCandidate, PatternDb};
use crate::codegen::{emit_annotated, EmittedCode};
use crate::error::{DbError, PipelineError, SearchError};
use crate::eval::{CostModel, Evaluator, ExternalRunner, MeasurementRecord, Stage};
use crate::frontend::{load_ir_document, parse_mini_source_with, screen_all};
use crate::ga::{exhaustive_search, run_search, SearchContext};
use crate::ir::ProgramModel;
use crate::pattern::{build_genome_space, Genome, OffloadPattern};
use crate::transfer::{hoist_transfers, required_transfers, TransferPlan};

pub fn build_evaluator(config: &PipelineConfig) -> Result<Box<dyn Evaluator>, PipelineError> {
    match &config.evaluator {
        EvaluatorConfig::CostModel(p) => {
            p.check().map_err(PipelineError::Config)?;
            Ok(Box::new(CostModel::new(*p)))
        }
        EvaluatorConfig::External(e) => {
            let (commands, params) = e.split();
            let runner = ExternalRunner::new(commands, params, &config.out.join("work")).map_err(PipelineError::Evaluator)?;
            Ok(Box::new(runner))
        }
    }
}

pub fn load_model(config: &PipelineConfig) -> Result<ProgramModel, PipelineError> {
    let path = config.input.display().to_string();
    let bytes = std::fs::read(&config.input)
        .map_err(|e| PipelineError::Config(format!("cannot read input {path}: {e}")))?;
    let parse = |message: String| PipelineError::Parse { path: path.clone(), message };
    match config.input_kind {
        InputKind::Mini => {
            let text = String::from_utf8(bytes).map_err(|_| parse("input is not UTF-8".into()))?;
            parse_mini_source_with(&text, &config.parse_options()).map_err(|e| parse(e.to_string()))
        }
        InputKind::IrDocument => load_ir_document(&bytes).map_err(|e| parse(e.to_string())),
    }
}

fn load_db(config: &PipelineConfig) -> Result<PatternDb, PipelineError> {
    match &config.db {
        None => Ok(PatternDb::default()),
        Some(p) => load_pattern_db(p).map_err(|e| match e {
            DbError::Io { .. } => PipelineError::Config(e.to_string()),
            _ => PipelineError::Parse { path: p.display().to_string(), message: e.to_string() },
        }),
    }
}

/// A measured point: block subset plus, for the loop stage, a genome.
struct Point {
    seq: usize,
    subset: Vec<usize>,
    genome: Option<Genome>,
    time: Option<f64>,
}

struct Run<'a> {
    config: &'a PipelineConfig,
    model: &'a ProgramModel,
    db: &'a PatternDb,
    eligible: Vec<BlockCandidate>,
    evaluator: &'a dyn Evaluator,
    records: Vec<MeasurementRecord>,
    points: Vec<Point>,
}

impl Run<'_> {
    fn ids(&self, subset: &[usize]) -> Vec<String> {
        subset.iter().map(|&i| self.eligible[i].record_id.clone()).collect()
    }

    fn residual(&self, subset: &[usize]) -> Result<ProgramModel, PipelineError> {
        let chosen: Vec<&BlockCandidate> = subset.iter().map(|&i| &self.eligible[i]).collect();
        Ok(apply_replacements(self.model, self.db, &chosen)?)
    }

    fn push(&mut self, mut r: MeasurementRecord, subset: &[usize], genome: Option<Genome>) {
        r.seq = self.records.len();
        self.points.push(Point { seq: r.seq, subset: subset.to_vec(), genome, time: r.time });
        self.records.push(r);
    }

    fn loop_stage(&mut self, subset: &[usize], exhaustive: bool) -> Result<LoopRun, PipelineError> {
        let residual = self.residual(subset)?;
        let verdicts = screen_all(&residual);
        let blocks = self.ids(subset);
        let space = match build_genome_space(&residual, &verdicts) {
            Ok(s) => s,
            Err(SearchError::EmptySpace) => {
                log::info!("no offloadable loops with blocks {blocks:?}; loop search skipped");
                let mode = if exhaustive { LoopMode::Exhaustive } else { LoopMode::Ga };
                return Ok(LoopRun { blocks, verdicts, genome_space: Vec::new(), result: None, mode });
            }
            Err(e) => return Err(PipelineError::Config(e.to_string())),
        };
        let genome_space = space.loops().to_vec();
        let ctx = SearchContext::new(&residual, space, self.evaluator)
            .with_backend(self.config.backend)
            .with_replaced_blocks(blocks.clone());
        let use_exhaustive = exhaustive && genome_space.len() <= self.config.exhaustive_cap;
        if exhaustive && !use_exhaustive {
            log::warn!(
                "genome length {} exceeds the exhaustive cap {}; using the GA for blocks {blocks:?}",
                genome_space.len(),
                self.config.exhaustive_cap
            );
        }
        let result = if use_exhaustive {
            exhaustive_search(&ctx, self.config.exhaustive_cap)
        } else {
            run_search(&ctx, &self.config.ga)
        }
        .map_err(|e| PipelineError::Config(e.to_string()))?;
        log::info!(
            "loop search with blocks {blocks:?}: a = {}, {} evaluations, best {} ({:?})",
            genome_space.len(),
            result.evaluations_performed,
            result.best_genome,
            result.best_time
        );
        for r in &result.measurements {
            let genome: Genome = r.genome.parse().expect("genome text comes from a genome");
            self.push(r.clone(), subset, Some(genome));
        }
        let mode = if use_exhaustive { LoopMode::Exhaustive } else { LoopMode::Ga };
        Ok(LoopRun { blocks, verdicts, genome_space, result: Some(result), mode })
    }
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    config.check()?;
    let evaluator = build_evaluator(config)?;
    let model = load_model(config)?;
    let db = load_db(config)?;
    let timestamp_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    log::info!(
        "loaded {}: {} loops, {} calls, {} pattern records",
        config.input.display(),
        model.loops().len(),
        model.calls().len(),
        db.len()
    );

    // Block stage.
    let (candidates, dropped) = find_candidates(&model, &db);
    for d in &dropped {
        log::info!("block candidate dropped: {}", d.reason);
    }
    let (eligible, pending): (Vec<BlockCandidate>, Vec<BlockCandidate>) = candidates
        .iter()
        .cloned()
        .partition(|c| c.interface_compatible || config.allow_interface_change);
    for p in &pending {
        log::warn!("{} matches `{}` but its interface differs; pending confirmation", p.block, p.record_id);
    }
    let blocks = search_block_combination(&model, &db, &eligible, evaluator.as_ref(), config.backend)?;
    let mut run = Run {
        config,
        model: &model,
        db: &db,
        eligible,
        evaluator: evaluator.as_ref(),
        records: Vec::new(),
        points: Vec::new(),
    };
    for (r, m) in blocks.records.iter().zip(&blocks.measurements) {
        run.push(r.clone(), &m.subset, None);
    }
    log::info!("block stage: {} measurements, best subset {:?}", blocks.records.len(), run.ids(&blocks.best_subset));
    let baseline_time = blocks.measurements[0].time;

    // Loop stage.
    let mut runs = Vec::new();
    if config.exhaustive {
        let subsets: Vec<Vec<usize>> = blocks.measurements.iter().map(|m| m.subset.clone()).collect();
        for s in subsets {
            runs.push(run.loop_stage(&s, true)?);
        }
    } else {
        runs.push(run.loop_stage(&blocks.best_subset, false)?);
    }

    // Fastest valid measurement; ties go to fewer changes, then the earlier one.
    let best = run
        .points
        .iter()
        .filter_map(|p| p.time.map(|t| (t, p)))
        .min_by(|(ta, a), (tb, b)| {
            let changes = |p: &Point| p.subset.len() + p.genome.as_ref().map_or(0, Genome::gpu_count);
            ta.total_cmp(tb).then(changes(a).cmp(&changes(b))).then(a.seq.cmp(&b.seq))
        });

    let (code, chosen) = match best {
        Some((time, p)) => {
            let residual = run.residual(&p.subset)?;
            let (pattern, plan) = match &p.genome {
                Some(g) => {
                    let space = build_genome_space(&residual, &screen_all(&residual))
                        .map_err(|e| PipelineError::Config(e.to_string()))?;
                    let pattern = OffloadPattern::new(&residual, &space, g.clone()).map_err(|e| PipelineError::Config(e.to_string()))?;
                    let raw = required_transfers(&residual, &pattern).map_err(|e| PipelineError::Config(e.to_string()))?;
                    let plan = hoist_transfers(&residual, &pattern, &raw);
                    (pattern, plan)
                }
                None => (OffloadPattern::cpu_only(&residual), TransferPlan::default()),
            };
            let text = emit_annotated(&residual, &pattern, &plan, config.backend)?;
            let chosen = ChosenPattern {
                measurement: p.seq,
                stage: if p.genome.is_some() { Stage::Loop } else { Stage::Block },
                blocks: run.ids(&p.subset),
                genome: p.genome.as_ref().map(Genome::to_string).unwrap_or_default(),
                gpu_loops: pattern.gpu_regions(),
                time,
                code_path: config.backend.file_name(),
                transfers: plan.records(&residual),
            };
            (EmittedCode { backend: config.backend, text }, Some(chosen))
        }
        None => {
            log::warn!("no valid measurement; emitting the unmodified program");
            let text = emit_annotated(&model, &OffloadPattern::cpu_only(&model), &TransferPlan::default(), config.backend)?;
            (EmittedCode { backend: config.backend, text }, None)
        }
    };
    if let Some(c) = &chosen {
        log::info!("chosen: blocks {:?}, genome `{}`, time {}", c.blocks, c.genome, c.time);
    }

    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        timestamp_unix,
        input: config.input.display().to_string(),
        backend: config.backend,
        evaluator: evaluator.id().to_string(),
        chosen,
        baseline_time,
        blocks: BlockStageReport {
            candidates,
            dropped,
            pending_confirmation: pending,
            subsets: blocks.measurements.clone(),
            applied: run.ids(&blocks.best_subset),
        },
        loops: LoopStageReport { mode: if config.exhaustive { LoopMode::Exhaustive } else { LoopMode::Ga }, runs },
        evaluations_performed: run.records.len(),
        config: config.clone(),
    };
    Ok(PipelineOutput { report, measurements: run.records, code })
}

/// Runs the pipeline and writes its outputs into `config.out`.
pub fn run_and_write(config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let out = run_pipeline(config)?;
    write_report(&out, &config.out)?;
    Ok(out)
}

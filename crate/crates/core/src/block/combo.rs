//! Measurement-driven choice of which block replacements to keep.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;

use super::db::PatternDb;
use super::replace::apply_replacements;
use super::BlockCandidate;
use crate::codegen::{emit_annotated, Backend, EmittedCode};
use crate::error::ModelError;
use crate::eval::{time_or_inf, EvaluationRequest, Evaluator, MeasurementRecord, Stage, Validity};
use crate::ir::ProgramModel;
use crate::pattern::OffloadPattern;
use crate::transfer::TransferPlan;

/// Above this many candidates, subsets are grown greedily instead of enumerated.
pub const ENUMERATE_SUBSETS_UP_TO: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetMeasurement {
    /// Indices into the candidate list, ascending.
    pub subset: Vec<usize>,
    pub record_ids: Vec<String>,
    #[serde(serialize_with = "time_or_inf")]
    pub time: Option<f64>,
    pub validity: Validity,
}

#[derive(Clone, Debug)]
pub struct BlockSearchResult {
    pub best_subset: Vec<usize>,
    pub best_time: Option<f64>,
    /// The input model with the best subset applied.
    pub model: ProgramModel,
    pub measurements: Vec<SubsetMeasurement>,
    pub records: Vec<MeasurementRecord>,
}

struct Measurer<'a> {
    model: &'a ProgramModel,
    db: &'a PatternDb,
    candidates: &'a [BlockCandidate],
    evaluator: &'a dyn Evaluator,
    backend: Backend,
    done: BTreeMap<Vec<usize>, Option<f64>>,
    measurements: Vec<SubsetMeasurement>,
    records: Vec<MeasurementRecord>,
}

impl Measurer<'_> {
    fn record_ids(&self, subset: &[usize]) -> Vec<String> {
        subset.iter().map(|&i| self.candidates[i].record_id.clone()).collect()
    }

    fn apply(&self, subset: &[usize]) -> Result<ProgramModel, ModelError> {
        let chosen: Vec<&BlockCandidate> = subset.iter().map(|&i| &self.candidates[i]).collect();
        apply_replacements(self.model, self.db, &chosen)
    }

    fn measure(&mut self, subset: Vec<usize>) -> Result<Option<f64>, ModelError> {
        if let Some(t) = self.done.get(&subset) {
            return Ok(*t);
        }
        let m = self.apply(&subset)?;
        let pattern = OffloadPattern::cpu_only(&m);
        let plan = TransferPlan::default();
        let text = emit_annotated(&m, &pattern, &plan, self.backend)?;
        let code = EmittedCode { backend: self.backend, text };
        let ids = self.record_ids(&subset);
        let request = EvaluationRequest { model: &m, pattern: &pattern, plan: &plan, code: &code, replaced_blocks: &ids };
        let r = self.evaluator.measure(&request);
        self.records.push(MeasurementRecord {
            seq: self.records.len(),
            stage: Stage::Block,
            blocks: ids.clone(),
            genome: String::new(),
            time: r.time_seconds,
            validity: r.validity,
            evaluator: self.evaluator.id().to_string(),
            generation: None,
            diagnostics: r.diagnostics,
        });
        self.measurements.push(SubsetMeasurement { subset: subset.clone(), record_ids: ids, time: r.time_seconds, validity: r.validity });
        self.done.insert(subset, r.time_seconds);
        Ok(r.time_seconds)
    }

    fn best(&self) -> (Vec<usize>, Option<f64>) {
        self.done
            .iter()
            .min_by(|a, b| compare((a.0, *a.1), (b.0, *b.1)))
            .map(|(s, t)| (s.clone(), *t))
            .expect("baseline is always measured")
    }
}

/// Faster first (INFEASIBLE last), then fewer blocks, then smaller indices.
fn compare(a: (&Vec<usize>, Option<f64>), b: (&Vec<usize>, Option<f64>)) -> Ordering {
    let time = match (a.1, b.1) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    time.then(a.0.len().cmp(&b.0.len())).then(a.0.cmp(b.0))
}

/// Measures the baseline, each candidate alone, then every larger subset
/// (or a greedy forward selection when there are many candidates), and
/// returns the fastest. Candidates must not overlap.
pub fn search_block_combination(
    model: &ProgramModel,
    db: &PatternDb,
    candidates: &[BlockCandidate],
    evaluator: &dyn Evaluator,
    backend: Backend,
) -> Result<BlockSearchResult, ModelError> {
    let n = candidates.len();
    let mut m = Measurer {
        model,
        db,
        candidates,
        evaluator,
        backend,
        done: BTreeMap::new(),
        measurements: Vec::new(),
        records: Vec::new(),
    };
    m.measure(Vec::new())?;
    for i in 0..n {
        m.measure(vec![i])?;
    }
    if n <= ENUMERATE_SUBSETS_UP_TO {
        for mask in 1u32..(1 << n) {
            if mask.count_ones() >= 2 {
                m.measure((0..n).filter(|i| mask >> i & 1 == 1).collect())?;
            }
        }
    } else {
        let (mut current, mut time) = m.best();
        loop {
            let mut step: Option<(Vec<usize>, Option<f64>)> = None;
            for i in (0..n).filter(|i| !current.contains(i)) {
                let mut s = current.clone();
                s.push(i);
                s.sort();
                let t = m.measure(s.clone())?;
                if step.as_ref().is_none_or(|(bs, bt)| compare((&s, t), (bs, *bt)).is_lt()) {
                    step = Some((s, t));
                }
            }
            match step {
                Some((s, Some(t))) if time.is_none_or(|cur| t < cur) => {
                    current = s;
                    time = Some(t);
                }
                _ => break,
            }
        }
    }
    let (best_subset, best_time) = m.best();
    let best_model = m.apply(&best_subset)?;
    Ok(BlockSearchResult { best_subset, best_time, model: best_model, measurements: m.measurements, records: m.records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::find_candidates;
    use crate::eval::CostModel;
    use crate::frontend::parse_mini_source;

    #[test]
    fn no_candidates_measures_baseline() {
        let m = parse_mini_source(include_str!("../../fixtures/f1.mini")).unwrap();
        let r = search_block_combination(&m, &PatternDb::default(), &[], &CostModel::default(), Backend::COpenacc).unwrap();
        assert!(r.best_subset.is_empty());
        assert_eq!(r.measurements.len(), 1);
        assert!(r.best_time.is_some());
    }

    #[test]
    fn f2_applies_both_blocks() {
        let m = parse_mini_source(include_str!("../../fixtures/f2.mini")).unwrap();
        let db = PatternDb::from_json_bytes(include_bytes!("../../fixtures/sample_db.json")).unwrap();
        let (c, _) = find_candidates(&m, &db);
        let r = search_block_combination(&m, &db, &c, &CostModel::default(), Backend::COpenacc).unwrap();
        assert_eq!(r.measurements.len(), 4);
        assert_eq!(r.best_subset, [0, 1]);
        assert_eq!(r.model.loops().len(), 2);
        assert!(r.records.iter().all(|x| x.stage == Stage::Block && x.genome.is_empty()));
    }
}

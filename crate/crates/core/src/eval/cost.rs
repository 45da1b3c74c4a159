//! Deterministic cost model.
//!
//! Time in cost units:
//! - CPU loop: `iter × cpu_cost_per_iter × multiplicity`
//! - GPU kernel root: `kernel_launch_overhead × multiplicity`, plus
//!   `iter × gpu_cost_per_iter × multiplicity` for each loop of its nest
//! - call statement: `cpu_cost × multiplicity`
//! - replaced block: `original_cpu_time / speedup_hint × multiplicity`
//! - transfer directive: `size_bytes × transfer_cost_per_byte × multiplicity`
//!
//! where multiplicity is the product of trip counts of the enclosing loops.

use serde::{Deserialize, Serialize};

use super::{EvaluationRequest, Evaluator, MeasurementResult, Validity};
use crate::pattern::LoopPlacement;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModelParams {
    pub kernel_launch_overhead: f64,
    pub transfer_cost_per_byte: f64,
}

impl Default for CostModelParams {
    fn default() -> Self {
        CostModelParams { kernel_launch_overhead: 1e-4, transfer_cost_per_byte: 1e-9 }
    }
}

impl CostModelParams {
    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [
            ("kernel_launch_overhead", self.kernel_launch_overhead),
            ("transfer_cost_per_byte", self.transfer_cost_per_byte),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be a nonnegative number, got {v}"));
            }
        }
        Ok(())
    }
}

pub fn cost_model_time(request: &EvaluationRequest<'_>, params: &CostModelParams) -> MeasurementResult {
    let model = request.model;
    let pattern = request.pattern;

    let bad: Vec<String> = model
        .loops()
        .iter()
        .filter(|l| pattern.runs_on_gpu(l.id) && !l.gpu_valid)
        .map(|l| l.id.to_string())
        .collect();
    if !bad.is_empty() {
        return MeasurementResult::infeasible(
            Validity::NumericMismatch,
            format!("GPU results differ from CPU results in {}", bad.join(", ")),
        );
    }

    let mut time = 0.0;
    for l in model.loops() {
        let mult = model.loop_multiplicity(l.id) as f64;
        let iters = l.iter_count as f64;
        time += match pattern.placements[l.id.0] {
            LoopPlacement::Cpu => iters * l.cpu_cost_per_iter * mult,
            LoopPlacement::Gpu => params.kernel_launch_overhead * mult + iters * l.gpu_cost_per_iter * mult,
            LoopPlacement::Subsumed => iters * l.gpu_cost_per_iter * mult,
        };
    }
    for c in model.calls() {
        time += c.cpu_cost * model.region_multiplicity(c.region) as f64;
    }
    for (region, _, block) in model.replaced_blocks() {
        time += block.replaced_time() * model.region_multiplicity(region) as f64;
    }
    for d in &request.plan.directives {
        time += model.variable(d.var).size_bytes as f64 * params.transfer_cost_per_byte * d.multiplicity as f64;
    }
    MeasurementResult::valid(time)
}

/// [`cost_model_time`] behind the evaluator interface.
#[derive(Clone, Debug, Default)]
pub struct CostModel {
    pub params: CostModelParams,
}

impl CostModel {
    pub fn new(params: CostModelParams) -> Self {
        CostModel { params }
    }
}

impl Evaluator for CostModel {
    fn id(&self) -> &str {
        "cost_model"
    }

    fn concurrency_safe(&self) -> bool {
        true
    }

    fn measure(&self, request: &EvaluationRequest<'_>) -> MeasurementResult {
        cost_model_time(request, &self.params)
    }
}

//! Genetic search over loop-offload genomes, plus an exhaustive oracle.
//!
//! Each generation the population is measured (new genomes only; results are
//! memoized per search), then the next population is bred: `elite_count`
//! best individuals are copied, the rest come from roulette selection on
//! 1/time, single-point crossover and per-bit mutation. The returned best is
//! the best genome over every evaluation of the search, ties broken by fewer
//! GPU bits and then the lexicographically smaller genome.

mod operators;

pub use operators::{init_population, next_generation};

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codegen::{emit_annotated, Backend, EmittedCode};
use crate::error::{PatternError, SearchError};
use crate::eval::{time_or_inf, EvaluationRequest, Evaluator, MeasurementRecord, Stage, Validity};
use crate::frontend::ParallelizabilityVerdict;
use crate::ir::ProgramModel;
use crate::pattern::{build_genome_space, Genome, GenomeSpace, OffloadPattern};
use crate::transfer::{hoist_transfers, required_transfers};

pub const DEFAULT_EXHAUSTIVE_CAP: usize = 14;

/// Below this gene length the whole space is enumerated instead of bred.
const ENUMERATE_UP_TO: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub population_size: usize,
    /// Number of generations measured, the initial one included.
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate_per_bit: f64,
    pub elite_count: usize,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population_size: 12,
            generations: 20,
            crossover_rate: 0.9,
            mutation_rate_per_bit: 0.05,
            elite_count: 1,
            seed: 0,
        }
    }
}

impl GaParams {
    pub fn check(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::Params(m));
        if self.population_size == 0 {
            return bad("population_size must be positive".into());
        }
        if self.generations == 0 {
            return bad("generations must be positive".into());
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate_per_bit", self.mutation_rate_per_bit)] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must be in [0, 1], got {r}"));
            }
        }
        if self.elite_count >= self.population_size {
            return bad(format!(
                "elite_count ({}) must be smaller than population_size ({})",
                self.elite_count, self.population_size
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fitness {
    #[serde(serialize_with = "time_or_inf")]
    pub time: Option<f64>,
    pub validity: Validity,
    /// Evaluator id.
    pub source: String,
    pub diagnostics: String,
}

impl Fitness {
    pub fn is_feasible(&self) -> bool {
        self.time.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    #[serde(serialize_with = "time_or_inf")]
    pub best_time: Option<f64>,
    /// Mean over feasible individuals.
    pub mean_time: Option<f64>,
    pub infeasible: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    /// Nothing beats running every loop on the CPU: either no genome was
    /// feasible or the best one has no GPU bit.
    pub no_offload: bool,
    pub best_genome: Genome,
    /// Measured time of `best_genome`; `None` when it was never feasible.
    #[serde(serialize_with = "time_or_inf")]
    pub best_time: Option<f64>,
    pub evaluations_performed: usize,
    pub cache_hits: usize,
    pub history: Vec<GenerationStats>,
    #[serde(skip)]
    pub measurements: Vec<MeasurementRecord>,
}

/// What a search measures against.
pub struct SearchContext<'a> {
    pub model: &'a ProgramModel,
    pub space: GenomeSpace,
    pub evaluator: &'a dyn Evaluator,
    pub backend: Backend,
    /// Record ids of blocks already replaced in `model`.
    pub replaced_blocks: Vec<String>,
}

impl<'a> SearchContext<'a> {
    pub fn new(model: &'a ProgramModel, space: GenomeSpace, evaluator: &'a dyn Evaluator) -> Self {
        SearchContext { model, space, evaluator, backend: Backend::COpenacc, replaced_blocks: Vec::new() }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_replaced_blocks(mut self, ids: Vec<String>) -> Self {
        self.replaced_blocks = ids;
        self
    }

    /// Builds pattern, hoisted plan and code for `genome` and measures it once.
    pub fn evaluate(&self, genome: &Genome) -> Result<Fitness, PatternError> {
        let pattern = OffloadPattern::new(self.model, &self.space, genome.clone())?;
        let raw = required_transfers(self.model, &pattern)?;
        let plan = hoist_transfers(self.model, &pattern, &raw);
        let text = emit_annotated(self.model, &pattern, &plan, self.backend).expect("pattern was checked against the model");
        let code = EmittedCode { backend: self.backend, text };
        let request = EvaluationRequest {
            model: self.model,
            pattern: &pattern,
            plan: &plan,
            code: &code,
            replaced_blocks: &self.replaced_blocks,
        };
        let m = self.evaluator.measure(&request);
        Ok(Fitness {
            time: m.time_seconds,
            validity: m.validity,
            source: self.evaluator.id().to_string(),
            diagnostics: m.diagnostics,
        })
    }
}

/// Memoized measurements of one search.
struct Memo<'c, 'a> {
    ctx: &'c SearchContext<'a>,
    cache: HashMap<Genome, Fitness>,
    records: Vec<MeasurementRecord>,
    hits: usize,
    best: Option<(Genome, Option<f64>)>,
}

impl<'c, 'a> Memo<'c, 'a> {
    fn new(ctx: &'c SearchContext<'a>) -> Self {
        Memo { ctx, cache: HashMap::new(), records: Vec::new(), hits: 0, best: None }
    }

    /// Times for `genomes`, measuring each new genome once, in first-appearance order.
    fn times(&mut self, genomes: &[Genome], generation: usize) -> Vec<Option<f64>> {
        let mut fresh: Vec<Genome> = Vec::new();
        for g in genomes {
            if self.cache.contains_key(g) || fresh.contains(g) {
                self.hits += 1;
            } else {
                fresh.push(g.clone());
            }
        }
        let ctx = self.ctx;
        let measure = |g: &Genome| ctx.evaluate(g).expect("genome length matches the space");
        let results: Vec<Fitness> = if ctx.evaluator.concurrency_safe() && fresh.len() > 1 {
            fresh.par_iter().map(measure).collect()
        } else {
            fresh.iter().map(measure).collect()
        };
        for (g, f) in fresh.into_iter().zip(results) {
            self.records.push(MeasurementRecord {
                seq: self.records.len(),
                stage: Stage::Loop,
                blocks: ctx.replaced_blocks.clone(),
                genome: g.to_string(),
                time: f.time,
                validity: f.validity,
                evaluator: f.source.clone(),
                generation: Some(generation),
                diagnostics: f.diagnostics.clone(),
            });
            let better = match &self.best {
                None => true,
                Some((bg, bt)) => operators::rank((&g, f.time), (bg, *bt)).is_lt(),
            };
            if better {
                self.best = Some((g.clone(), f.time));
            }
            self.cache.insert(g, f);
        }
        genomes.iter().map(|g| self.cache[g].time).collect()
    }

    fn finish(self, history: Vec<GenerationStats>) -> SearchResult {
        let a = self.ctx.space.len();
        let (best_genome, best_time) = match self.best {
            Some((g, Some(t))) => (g, Some(t)),
            _ => {
                let zero = Genome::zeros(a);
                let t = self.cache.get(&zero).and_then(|f| f.time);
                (zero, t)
            }
        };
        SearchResult {
            no_offload: best_time.is_none() || best_genome.gpu_count() == 0,
            best_genome,
            best_time,
            evaluations_performed: self.records.len(),
            cache_hits: self.hits,
            history,
            measurements: self.records,
        }
    }
}

fn stats(generation: usize, times: &[Option<f64>]) -> GenerationStats {
    let feasible: Vec<f64> = times.iter().flatten().copied().collect();
    GenerationStats {
        generation,
        best_time: feasible.iter().copied().min_by(f64::total_cmp),
        mean_time: (!feasible.is_empty()).then(|| feasible.iter().sum::<f64>() / feasible.len() as f64),
        infeasible: times.len() - feasible.len(),
    }
}

pub fn run_search(ctx: &SearchContext<'_>, params: &GaParams) -> Result<SearchResult, SearchError> {
    params.check()?;
    let a = ctx.space.len();
    if a == 0 {
        return Err(SearchError::EmptySpace);
    }
    let mut memo = Memo::new(ctx);
    if a <= ENUMERATE_UP_TO {
        let all: Vec<Genome> = (0..1u64 << a).map(|i| Genome::from_index(i, a)).collect();
        let times = memo.times(&all, 0);
        return Ok(memo.finish(vec![stats(0, &times)]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut population = init_population(a, params, &mut rng);
    let mut history = Vec::with_capacity(params.generations);
    for generation in 0..params.generations {
        let times = memo.times(&population, generation);
        history.push(stats(generation, &times));
        log::debug!(
            "generation {generation}: best {:?}, {} infeasible",
            history[generation].best_time,
            history[generation].infeasible
        );
        if generation + 1 < params.generations {
            population = next_generation(&population, &times, params, &mut rng);
        }
    }
    Ok(memo.finish(history))
}

/// Measures all 2^a genomes. A zero-length space measures the CPU-only pattern.
pub fn exhaustive_search(ctx: &SearchContext<'_>, cap: usize) -> Result<SearchResult, SearchError> {
    let a = ctx.space.len();
    if a > cap || a >= 64 {
        return Err(SearchError::TooLarge { len: a, cap });
    }
    let mut memo = Memo::new(ctx);
    let all: Vec<Genome> = (0..1u64 << a).map(|i| Genome::from_index(i, a)).collect();
    let times = memo.times(&all, 0);
    Ok(memo.finish(vec![stats(0, &times)]))
}

/// Screens `verdicts` into a genome space and runs the GA with the default backend.
pub fn search_model(
    model: &ProgramModel,
    verdicts: &[ParallelizabilityVerdict],
    evaluator: &dyn Evaluator,
    params: &GaParams,
) -> Result<SearchResult, SearchError> {
    let space = build_genome_space(model, verdicts)?;
    run_search(&SearchContext::new(model, space, evaluator), params)
}

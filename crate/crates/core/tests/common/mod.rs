//! Oracles and helpers shared by the integration tests. Oracles here avoid
//! the library's own nest helpers and work from the raw model parts.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use offload_core::codegen::{Backend, EmittedCode};
use offload_core::eval::{cost_model_time, CostModelParams, EvaluationRequest, Evaluator, MeasurementResult, Validity};
use offload_core::ir::{LoopId, OccurrenceKind, ProgramModel, RegionId, Stmt, VarId};
use offload_core::pattern::{Genome, GenomeSpace, OffloadPattern};
use offload_core::transfer::{Direction, TransferPlan};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// GPU kernel roots for `genome`, recomputed from parent links.
pub fn oracle_roots(model: &ProgramModel, space: &GenomeSpace, genome: &Genome) -> Vec<LoopId> {
    let marked: BTreeSet<LoopId> =
        space.loops().iter().zip(genome.bits()).filter(|(_, b)| **b).map(|(l, _)| *l).collect();
    let mut roots = Vec::new();
    for l in &model.parts().loops {
        let mut p = l.parent;
        let mut covered = false;
        while let Some(a) = p {
            covered |= marked.contains(&a);
            p = model.parts().loops[a.0].parent;
        }
        if marked.contains(&l.id) && !covered {
            roots.push(l.id);
        }
    }
    roots
}

/// Loops in the subtree of `root`, root included, from parent links.
pub fn oracle_subtree(model: &ProgramModel, root: LoopId) -> Vec<LoopId> {
    model
        .parts()
        .loops
        .iter()
        .filter(|l| {
            let mut cur = Some(l.id);
            while let Some(c) = cur {
                if c == root {
                    return true;
                }
                cur = model.parts().loops[c.0].parent;
            }
            false
        })
        .map(|l| l.id)
        .collect()
}

/// Strict ancestors of `l`, innermost first.
pub fn oracle_ancestors(model: &ProgramModel, l: LoopId) -> Vec<LoopId> {
    let mut out = Vec::new();
    let mut p = model.parts().loops[l.0].parent;
    while let Some(a) = p {
        out.push(a);
        p = model.parts().loops[a.0].parent;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Event {
    Host(usize),
    Kernel(LoopId),
}

/// Dynamic execution trace: host occurrences and whole kernel launches,
/// in execution order with every loop unrolled.
fn trace(model: &ProgramModel, roots: &[LoopId]) -> Vec<Event> {
    let parts = model.parts();
    let mut by_site: BTreeMap<(RegionId, Option<usize>), Vec<usize>> = BTreeMap::new();
    for (k, o) in parts.occurrences.iter().enumerate() {
        by_site.entry((o.region, o.stmt)).or_default().push(k);
    }
    fn walk(
        model: &ProgramModel,
        region: RegionId,
        roots: &[LoopId],
        by_site: &BTreeMap<(RegionId, Option<usize>), Vec<usize>>,
        out: &mut Vec<Event>,
    ) {
        let parts = model.parts();
        for (s, stmt) in parts.regions[region.0].statements.iter().enumerate() {
            out.extend(by_site.get(&(region, Some(s))).into_iter().flatten().map(|&k| Event::Host(k)));
            match stmt {
                Stmt::Loop { id } if roots.contains(id) => out.push(Event::Kernel(*id)),
                Stmt::Loop { id } => {
                    let l = &parts.loops[id.0];
                    for _ in 0..l.iter_count {
                        out.extend(by_site.get(&(l.body, None)).into_iter().flatten().map(|&k| Event::Host(k)));
                        walk(model, l.body, roots, by_site, out);
                    }
                }
                Stmt::Func { body, .. } => walk(model, *body, roots, by_site, out),
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    walk(model, RegionId(0), roots, &by_site, &mut out);
    out
}

/// The two transfer rules applied literally against the execution trace.
pub fn oracle_required_transfers(
    model: &ProgramModel,
    space: &GenomeSpace,
    genome: &Genome,
) -> BTreeSet<(VarId, Direction, LoopId)> {
    let parts = model.parts();
    let roots = oracle_roots(model, space, genome);
    let events = trace(model, &roots);
    let mut out = BTreeSet::new();
    for &g in &roots {
        let sub = oracle_subtree(model, g);
        let bodies: BTreeSet<RegionId> = sub.iter().map(|l| parts.loops[l.0].body).collect();
        let private: BTreeSet<VarId> = sub.iter().map(|l| parts.loops[l.0].header.var).collect();
        let inside = |k: OccurrenceKind| -> BTreeSet<VarId> {
            parts
                .occurrences
                .iter()
                .filter(|o| bodies.contains(&o.region) && o.kind == k && !private.contains(&o.var))
                .map(|o| o.var)
                .collect()
        };
        let (gpu_read, gpu_set) = (inside(OccurrenceKind::Read), inside(OccurrenceKind::Set));
        let runs: Vec<usize> = events.iter().enumerate().filter(|(_, e)| **e == Event::Kernel(g)).map(|(i, _)| i).collect();
        let (Some(&first), Some(&last)) = (runs.first(), runs.last()) else { continue };
        for (pos, e) in events.iter().enumerate() {
            let Event::Host(k) = e else { continue };
            let o = &parts.occurrences[*k];
            if pos < last && o.kind != OccurrenceKind::Read && gpu_read.contains(&o.var) {
                out.insert((o.var, Direction::HostToDevice, g));
            }
            if pos > first && gpu_set.contains(&o.var) {
                out.insert((o.var, Direction::DeviceToHost, g));
            }
        }
    }
    out
}

/// Smallest multiplicity over every legal anchor (the GPU root or one of its
/// ancestors) for a transfer of `var`.
pub fn oracle_min_multiplicity(
    model: &ProgramModel,
    roots: &[LoopId],
    var: VarId,
    direction: Direction,
    g: LoopId,
) -> u64 {
    let parts = model.parts();
    let gpu_bodies: BTreeSet<RegionId> =
        roots.iter().flat_map(|r| oracle_subtree(model, *r)).map(|l| parts.loops[l.0].body).collect();
    let mut best = u64::MAX;
    for anchor in std::iter::once(g).chain(oracle_ancestors(model, g)) {
        let bodies: BTreeSet<RegionId> = oracle_subtree(model, anchor).iter().map(|l| parts.loops[l.0].body).collect();
        let legal = parts.occurrences.iter().all(|o| {
            !bodies.contains(&o.region)
                || gpu_bodies.contains(&o.region)
                || o.var != var
                || (direction == Direction::HostToDevice && o.kind == OccurrenceKind::Read)
        });
        if legal {
            let mult: u64 = oracle_ancestors(model, anchor).iter().map(|a| parts.loops[a.0].iter_count).product();
            best = best.min(mult);
        }
    }
    best
}

pub fn cost_time(model: &ProgramModel, pattern: &OffloadPattern, plan: &TransferPlan) -> Option<f64> {
    let code = EmittedCode { backend: Backend::COpenacc, text: String::new() };
    let req = EvaluationRequest { model, pattern, plan, code: &code, replaced_blocks: &[] };
    cost_model_time(&req, &CostModelParams::default()).time_seconds
}

/// Times looked up by (sorted replaced blocks, genome); missing entries are INFEASIBLE.
pub struct ScriptedEvaluator {
    pub table: BTreeMap<(Vec<String>, String), Option<f64>>,
}

impl Evaluator for ScriptedEvaluator {
    fn id(&self) -> &str {
        "scripted"
    }

    fn concurrency_safe(&self) -> bool {
        true
    }

    fn measure(&self, r: &EvaluationRequest<'_>) -> MeasurementResult {
        let mut blocks = r.replaced_blocks.to_vec();
        blocks.sort();
        let key = (blocks, r.pattern.genome.to_string());
        match self.table.get(&key).copied().flatten() {
            Some(t) => MeasurementResult::valid(t),
            None => MeasurementResult::infeasible(Validity::RuntimeError, "scripted failure"),
        }
    }
}

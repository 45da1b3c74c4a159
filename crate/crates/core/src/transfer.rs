//! CPU/GPU transfer planning.
//!
//! [`required_transfers`] applies the two occurrence rules per GPU region:
//! a variable needs a host-to-device copy when the host sets or defines it
//! before the region and the region reads it; it needs a device-to-host copy
//! when the region sets it and the host reads, sets or defines it afterwards.
//! "Before" and "after" include the next iteration of any repeating CPU loop
//! that encloses both the occurrence and the region. Index variables of loops
//! inside a GPU region are private to the kernel and never transferred.
//!
//! [`hoist_transfers`] then lifts each copy to the outermost enclosing loop
//! that has no interfering host-side access to the variable, and groups
//! directives that share a placement point into batches.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::PatternError;
use crate::ir::*;
use crate::pattern::OffloadPattern;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HostToDevice,
    DeviceToHost,
}

impl Direction {
    pub fn short(self) -> &'static str {
        match self {
            Direction::HostToDevice => "h2d",
            Direction::DeviceToHost => "d2h",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RequiredTransfer {
    pub var: VarId,
    pub direction: Direction,
    /// Root loop of the GPU region that needs the copy.
    pub gpu_loop: LoopId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Before,
    After,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Placement {
    /// The loop the directive is attached to.
    pub anchor: LoopId,
    pub side: Side,
    /// Region and statement index of the anchor loop.
    pub region: RegionId,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferDirective {
    pub var: VarId,
    pub direction: Direction,
    pub placement: Placement,
    /// How many times the directive executes.
    pub multiplicity: u64,
    pub batch_id: usize,
    /// GPU regions served by this directive.
    pub gpu_loops: Vec<LoopId>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TransferPlan {
    pub directives: Vec<TransferDirective>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub id: usize,
    pub placement: Placement,
    pub direction: Direction,
    pub vars: Vec<VarId>,
    pub multiplicity: u64,
}

/// Flat directive record as written to reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectiveRecord {
    pub var: String,
    pub dir: Direction,
    pub region: RegionId,
    pub anchor: LoopId,
    pub side: Side,
    pub multiplicity: u64,
    pub batch: usize,
}

impl TransferPlan {
    pub fn is_empty(&self) -> bool {
        self.directives.is_empty()
    }

    pub fn batches(&self) -> Vec<Batch> {
        let mut out: Vec<Batch> = Vec::new();
        for d in &self.directives {
            match out.iter_mut().find(|b| b.id == d.batch_id) {
                Some(b) => b.vars.push(d.var),
                None => out.push(Batch {
                    id: d.batch_id,
                    placement: d.placement,
                    direction: d.direction,
                    vars: vec![d.var],
                    multiplicity: d.multiplicity,
                }),
            }
        }
        out.sort_by_key(|b| b.id);
        out
    }

    /// Σ size × multiplicity over all directives.
    pub fn weighted_bytes(&self, model: &ProgramModel) -> u128 {
        self.directives
            .iter()
            .map(|d| model.variable(d.var).size_bytes as u128 * d.multiplicity as u128)
            .sum()
    }

    pub fn records(&self, model: &ProgramModel) -> Vec<DirectiveRecord> {
        self.directives
            .iter()
            .map(|d| DirectiveRecord {
                var: model.variable(d.var).name.clone(),
                dir: d.direction,
                region: d.placement.region,
                anchor: d.placement.anchor,
                side: d.placement.side,
                multiplicity: d.multiplicity,
                batch: d.batch_id,
            })
            .collect()
    }
}

/// Per-region flag: does the region execute on the GPU under `pattern`.
pub(crate) fn gpu_region_mask(model: &ProgramModel, pattern: &OffloadPattern) -> Vec<bool> {
    model
        .regions()
        .iter()
        .map(|r| r.enclosing_loop.is_some_and(|l| pattern.runs_on_gpu(l)))
        .collect()
}

/// A CPU loop with at least two iterations enclosing both the occurrence and `g`.
fn shares_repeating_loop(model: &ProgramModel, occ_region: RegionId, g: LoopId) -> bool {
    model
        .enclosing_loops(occ_region)
        .into_iter()
        .any(|l| l != g && model.loop_in_subtree(g, l) && model.loop_node(l).iter_count >= 2)
}

pub fn required_transfers(
    model: &ProgramModel,
    pattern: &OffloadPattern,
) -> Result<Vec<RequiredTransfer>, PatternError> {
    pattern.check(model)?;
    let on_gpu = gpu_region_mask(model, pattern);
    let host: Vec<&VariableOccurrence> = model.occurrences().iter().filter(|o| !on_gpu[o.region.0]).collect();
    let mut out = Vec::new();
    for g in pattern.gpu_regions() {
        let regions = model.loop_regions(g);
        let mut inner = model.region_var_sets(&regions).expect("regions come from the model");
        // Loop indices inside the kernel are private to it.
        for v in model.subtree_index_vars(g) {
            inner.read.remove(&v);
            inner.set.remove(&v);
        }
        let (start, end) = model.loop_span(g);
        let mut h2d = BTreeSet::new();
        let mut d2h = BTreeSet::new();
        for o in &host {
            let ord = model.occurrence_order(o);
            let shared = shares_repeating_loop(model, o.region, g);
            let before = ord < start || shared;
            let after = ord > end || shared;
            if before && o.kind != OccurrenceKind::Read && inner.read.contains(&o.var) {
                h2d.insert(o.var);
            }
            if after && inner.set.contains(&o.var) {
                d2h.insert(o.var);
            }
        }
        out.extend(h2d.into_iter().map(|var| RequiredTransfer { var, direction: Direction::HostToDevice, gpu_loop: g }));
        out.extend(d2h.into_iter().map(|var| RequiredTransfer { var, direction: Direction::DeviceToHost, gpu_loop: g }));
    }
    Ok(out)
}

/// Whether a directive for `var` may sit at the boundary of loop `anchor`:
/// no host-side access inside `anchor` that would invalidate it.
pub fn anchor_is_legal(
    model: &ProgramModel,
    on_gpu: &[bool],
    var: VarId,
    direction: Direction,
    anchor: LoopId,
) -> bool {
    model.loop_regions(anchor).into_iter().filter(|r| !on_gpu[r.0]).all(|r| {
        model.occurrences_in(r).all(|o| {
            o.var != var
                || match direction {
                    Direction::HostToDevice => o.kind == OccurrenceKind::Read,
                    Direction::DeviceToHost => false,
                }
        })
    })
}

fn placement_at(model: &ProgramModel, anchor: LoopId, direction: Direction) -> Placement {
    let (region, position) = model.loop_site(anchor);
    let side = match direction {
        Direction::HostToDevice => Side::Before,
        Direction::DeviceToHost => Side::After,
    };
    Placement { anchor, side, region, position }
}

/// Places each transfer at the boundary of its own GPU region.
pub fn unhoisted_plan(model: &ProgramModel, raw: &[RequiredTransfer]) -> TransferPlan {
    let placed = raw.iter().map(|t| (t.var, t.direction, t.gpu_loop, t.gpu_loop));
    build_plan(model, placed)
}

pub fn hoist_transfers(model: &ProgramModel, pattern: &OffloadPattern, raw: &[RequiredTransfer]) -> TransferPlan {
    let on_gpu = gpu_region_mask(model, pattern);
    let placed = raw.iter().map(|t| {
        let mut anchor = t.gpu_loop;
        // Legality is monotone along the nest path, so stop at the first failure.
        for a in model.loop_ancestors(t.gpu_loop).expect("gpu loop exists").into_iter().rev() {
            if anchor_is_legal(model, &on_gpu, t.var, t.direction, a) {
                anchor = a;
            } else {
                break;
            }
        }
        (t.var, t.direction, t.gpu_loop, anchor)
    });
    build_plan(model, placed.collect::<Vec<_>>().into_iter())
}

fn build_plan(
    model: &ProgramModel,
    placed: impl Iterator<Item = (VarId, Direction, LoopId, LoopId)>,
) -> TransferPlan {
    // (anchor start, side, var) -> directive; one directive per placement and variable.
    let mut merged: BTreeMap<(u32, Side, VarId), TransferDirective> = BTreeMap::new();
    for (var, direction, gpu_loop, anchor) in placed {
        let placement = placement_at(model, anchor, direction);
        let key = (model.loop_span(anchor).0, placement.side, var);
        merged
            .entry(key)
            .and_modify(|d| {
                if !d.gpu_loops.contains(&gpu_loop) {
                    d.gpu_loops.push(gpu_loop);
                }
            })
            .or_insert_with(|| TransferDirective {
                var,
                direction,
                placement,
                multiplicity: model.loop_multiplicity(anchor),
                batch_id: 0,
                gpu_loops: vec![gpu_loop],
            });
    }
    let mut batch_of: BTreeMap<(u32, Side), usize> = BTreeMap::new();
    let mut directives = Vec::with_capacity(merged.len());
    for ((start, side, _), mut d) in merged {
        let next = batch_of.len();
        d.batch_id = *batch_of.entry((start, side)).or_insert(next);
        d.gpu_loops.sort();
        directives.push(d);
    }
    TransferPlan { directives }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_mini_source;
    use crate::pattern::GenomeSpace;

    fn pattern(m: &ProgramModel, bits: &str) -> OffloadPattern {
        let space = GenomeSpace::from_loops(m.loops().iter().map(|l| l.id).collect());
        OffloadPattern::new(m, &space, bits.parse().unwrap()).unwrap()
    }

    fn named(m: &ProgramModel, raw: &[RequiredTransfer]) -> Vec<(String, Direction, usize)> {
        raw.iter().map(|t| (m.variable(t.var).name.clone(), t.direction, t.gpu_loop.0)).collect()
    }

    #[test]
    fn all_zero_genome_needs_nothing() {
        let m = parse_mini_source(include_str!("../fixtures/f1.mini")).unwrap();
        assert!(required_transfers(&m, &pattern(&m, "00")).unwrap().is_empty());
    }

    #[test]
    fn host_set_gpu_read() {
        let m = parse_mini_source(
            "int i; float a[16]; float b[16];
             void main() { for (i = 0; i < 16; i++) { b[i] = i; } for (i = 0; i < 16; i++) { a[i] = b[i]; } }",
        )
        .unwrap();
        let raw = required_transfers(&m, &pattern(&m, "01")).unwrap();
        assert_eq!(named(&m, &raw), [("b".to_string(), Direction::HostToDevice, 1)]);
    }

    #[test]
    fn f1_outer_on_gpu() {
        let m = parse_mini_source(include_str!("../fixtures/f1.mini")).unwrap();
        let raw = required_transfers(&m, &pattern(&m, "10")).unwrap();
        // x and y are only declared on the host; nothing reads x afterwards.
        assert_eq!(named(&m, &raw), [("y".to_string(), Direction::HostToDevice, 0)]);
    }

    #[test]
    fn mismatched_genome() {
        let m = parse_mini_source(include_str!("../fixtures/f1.mini")).unwrap();
        let mut p = pattern(&m, "10");
        p.genome = "1".parse().unwrap();
        assert!(matches!(required_transfers(&m, &p), Err(PatternError::LengthMismatch { .. })));
    }

    const NEST: &str = "int t; int i; float a[100]; float b[100]; float c[100];
        void main() {
          for (t = 0; t < 10; t++) {
            for (i = 0; i < 100; i++) { a[i] = b[i] + c[i]; }
            c[0] = a[0];
          }
        }";

    #[test]
    fn hoists_untouched_variable() {
        let m = parse_mini_source(NEST).unwrap();
        let p = pattern(&m, "01");
        let raw = required_transfers(&m, &p).unwrap();
        let plan = hoist_transfers(&m, &p, &raw);
        let summary: Vec<(String, Direction, usize, u64)> = plan
            .directives
            .iter()
            .map(|d| (m.variable(d.var).name.clone(), d.direction, d.placement.anchor.0, d.multiplicity))
            .collect();
        assert_eq!(
            summary,
            [
                // b is never touched by the host inside the t loop: hoisted out.
                ("b".to_string(), Direction::HostToDevice, 0, 1),
                // c is re-set by the host every iteration: stays at the kernel.
                ("c".to_string(), Direction::HostToDevice, 1, 10),
                ("a".to_string(), Direction::DeviceToHost, 1, 10),
            ]
        );
        assert!(plan.weighted_bytes(&m) < unhoisted_plan(&m, &raw).weighted_bytes(&m));
        let batches = plan.batches();
        assert_eq!(batches.len(), 3);
        assert_eq!(batches[1].vars, [m.var_by_name("c").unwrap()]);
    }
}

//! Substitution of matched blocks by [`Stmt::Replaced`] nodes.
//!
//! The replaced statement keeps the block's site. Loops, regions and calls
//! inside the block leave the model and the remaining ids are renumbered;
//! the block's variable occurrences move onto the replacement statement.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::db::PatternDb;
use super::{block_vars, extent, BlockCandidate, BlockExtent, BlockRef};
use crate::error::ModelError;
use crate::ir::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyVerdict {
    Applied,
    /// Interfaces differ and changing them was not allowed.
    PendingConfirmation,
}

pub fn apply_replacement(
    model: &ProgramModel,
    db: &PatternDb,
    candidate: &BlockCandidate,
    allow_interface_change: bool,
) -> Result<(ProgramModel, ApplyVerdict), ModelError> {
    extent(model, &candidate.block)?;
    if !candidate.interface_compatible && !allow_interface_change {
        return Ok((model.clone(), ApplyVerdict::PendingConfirmation));
    }
    Ok((apply_replacements(model, db, &[candidate])?, ApplyVerdict::Applied))
}

/// CPU cost of one execution of the block.
fn block_cpu_time(model: &ProgramModel, block: &BlockRef, ext: &BlockExtent) -> f64 {
    if let BlockRef::Call(c) = block {
        return model.calls()[c.0].cpu_cost;
    }
    let base = model.region_multiplicity(ext.site.0) as f64;
    let mut t = 0.0;
    for &l in &ext.loops {
        let node = model.loop_node(l);
        t += node.iter_count as f64 * node.cpu_cost_per_iter * model.loop_multiplicity(l) as f64 / base;
    }
    let inside = |r: RegionId| ext.whole_body == Some(r) || ext.inner_regions.contains(&r);
    for c in model.calls().iter().filter(|c| inside(c.region)) {
        t += c.cpu_cost * model.region_multiplicity(c.region) as f64 / base;
    }
    for (r, _, b) in model.replaced_blocks().into_iter().filter(|(r, _, _)| inside(*r)) {
        t += b.replaced_time() * model.region_multiplicity(r) as f64 / base;
    }
    t
}

/// Replaces all `candidates` at once. They must not overlap.
pub fn apply_replacements(
    model: &ProgramModel,
    db: &PatternDb,
    candidates: &[&BlockCandidate],
) -> Result<ProgramModel, ModelError> {
    let mut exts = Vec::with_capacity(candidates.len());
    for c in candidates {
        let ext = extent(model, &c.block)?;
        let record = db
            .get(&c.record_id)
            .ok_or_else(|| ModelError::integrity(format!("candidate refers to unknown record `{}`", c.record_id)))?;
        exts.push((ext, record, *c));
    }
    for (i, (a, _, ca)) in exts.iter().enumerate() {
        for (b, _, cb) in &exts[i + 1..] {
            let overlap = ca.block == cb.block
                || a.covers(b.site.0, Some(b.site.1))
                || b.covers(a.site.0, Some(a.site.1))
                || a.whole_body.is_some_and(|r| b.site.0 == r)
                || b.whole_body.is_some_and(|r| a.site.0 == r);
            if overlap {
                return Err(ModelError::integrity(format!("blocks {} and {} overlap", ca.block, cb.block)));
            }
        }
    }

    let mut parts = model.parts().clone();
    let mut removed_regions = BTreeSet::new();
    let mut removed_loops = BTreeSet::new();
    for (ext, record, cand) in &exts {
        let args = match &cand.block {
            BlockRef::Call(c) => {
                let mut vars = Vec::new();
                for a in &model.calls()[c.0].args {
                    for v in a.vars() {
                        if !vars.contains(&v) {
                            vars.push(v);
                        }
                    }
                }
                vars
            }
            _ => block_vars(model, ext),
        };
        let node = Stmt::Replaced(ReplacedBlock {
            record_id: record.id.clone(),
            replacement_name: record.replacement_name.clone(),
            speedup_hint: record.speedup_hint,
            original_cpu_time: block_cpu_time(model, &cand.block, ext),
            args,
            origin: cand.block.to_string(),
        });
        match ext.whole_body {
            Some(body) => parts.regions[body.0].statements = vec![node],
            None => parts.regions[ext.site.0 .0].statements[ext.site.1] = node,
        }
        removed_regions.extend(ext.inner_regions.iter().copied());
        removed_loops.extend(ext.loops.iter().copied());
    }

    // Occurrences inside a block move to its replacement statement, once per (var, kind).
    let mut seen = BTreeSet::new();
    let mut occurrences = Vec::with_capacity(parts.occurrences.len());
    for o in parts.occurrences {
        match exts.iter().position(|(ext, _, _)| ext.covers(o.region, o.stmt)) {
            None => occurrences.push(o),
            Some(k) => {
                let (region, stmt) = exts[k].0.site;
                if seen.insert((k, o.var, o.kind)) {
                    occurrences.push(VariableOccurrence { region, stmt: Some(stmt), index_vars: Vec::new(), ..o });
                }
            }
        }
    }
    parts.occurrences = occurrences;

    let removed_calls: BTreeSet<CallId> = parts
        .calls
        .iter()
        .filter(|c| {
            removed_regions.contains(&c.region)
                || exts.iter().any(|(ext, _, _)| ext.whole_body == Some(c.region) || ext.site == (c.region, c.stmt))
        })
        .map(|c| c.id)
        .collect();
    compact(&mut parts, &removed_regions, &removed_loops, &removed_calls);
    ProgramModel::new(parts)
}

fn renumber<T: Ord + Copy>(all: impl Iterator<Item = T>, removed: &BTreeSet<T>) -> BTreeMap<T, usize> {
    all.filter(|x| !removed.contains(x)).enumerate().map(|(i, x)| (x, i)).collect()
}

fn compact(
    parts: &mut ModelParts,
    removed_regions: &BTreeSet<RegionId>,
    removed_loops: &BTreeSet<LoopId>,
    removed_calls: &BTreeSet<CallId>,
) {
    let rmap = renumber(parts.regions.iter().map(|r| r.id), removed_regions);
    let lmap = renumber(parts.loops.iter().map(|l| l.id), removed_loops);
    let cmap = renumber(parts.calls.iter().map(|c| c.id), removed_calls);
    let r = |id: RegionId| RegionId(rmap[&id]);
    let l = |id: LoopId| LoopId(lmap[&id]);

    parts.regions.retain(|x| !removed_regions.contains(&x.id));
    for region in &mut parts.regions {
        region.id = r(region.id);
        region.enclosing_loop = region.enclosing_loop.map(l);
        for s in &mut region.statements {
            match s {
                Stmt::Loop { id } => *id = l(*id),
                Stmt::Call { call } => *call = CallId(cmap[call]),
                Stmt::Func { body, .. } => *body = r(*body),
                _ => {}
            }
        }
    }
    parts.loops.retain(|x| !removed_loops.contains(&x.id));
    for node in &mut parts.loops {
        node.id = l(node.id);
        node.parent = node.parent.map(l);
        node.body = r(node.body);
    }
    parts.calls.retain(|x| !removed_calls.contains(&x.id));
    for c in &mut parts.calls {
        c.id = CallId(cmap[&c.id]);
        c.region = r(c.region);
    }
    for o in &mut parts.occurrences {
        o.region = r(o.region);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::find_candidates;
    use crate::frontend::{parse_mini_source, screen_all};
    use crate::printer::{pretty_print, Syntax};

    const F2: &str = include_str!("../../fixtures/f2.mini");
    const SAMPLE: &str = include_str!("../../fixtures/sample_db.json");

    fn setup() -> (ProgramModel, PatternDb, Vec<BlockCandidate>) {
        let m = parse_mini_source(F2).unwrap();
        let db = PatternDb::from_json_bytes(SAMPLE.as_bytes()).unwrap();
        let (c, _) = find_candidates(&m, &db);
        (m, db, c)
    }

    #[test]
    fn f2_candidates() {
        let (_, _, c) = setup();
        let blocks: Vec<String> = c.iter().map(|c| format!("{} {}", c.block, c.record_id)).collect();
        assert_eq!(blocks, ["call0 fft", "loop2 histogram"]);
    }

    #[test]
    fn replacing_loop_drops_it() {
        let (m, db, c) = setup();
        let hist = c.iter().find(|c| c.record_id == "histogram").unwrap();
        let (r, verdict) = apply_replacement(&m, &db, hist, false).unwrap();
        assert_eq!(verdict, ApplyVerdict::Applied);
        assert_eq!(r.loops().len(), m.loops().len() - 1);
        assert_eq!(r.regions().len(), m.regions().len() - 1);
        let blocks = r.replaced_blocks();
        assert_eq!(blocks.len(), 1);
        let b = blocks[0].2;
        assert_eq!(b.replacement_name, "cub_histogram_even");
        // 1024 iterations at 6.0 each.
        assert_eq!(b.original_cpu_time, 6144.0);
        let names: Vec<&str> = b.args.iter().map(|v| r.variable(*v).name.as_str()).collect();
        assert_eq!(names, ["h", "bin"]);
        // Everything before the block is untouched.
        let before = pretty_print(&m, Syntax::Mini);
        let after = pretty_print(&r, Syntax::Mini);
        let cut = before.find("    for (i = 0; i < 1024; i++) [cpu=6.0").unwrap();
        assert_eq!(&after[..cut], &before[..cut]);
        assert_eq!(screen_all(&r).len(), 2);
    }

    #[test]
    fn replace_both() {
        let (m, db, c) = setup();
        let refs: Vec<&BlockCandidate> = c.iter().collect();
        let r = apply_replacements(&m, &db, &refs).unwrap();
        assert!(r.calls().is_empty());
        assert_eq!(r.replaced_blocks().len(), 2);
        assert_eq!(r.loops().len(), 2);
        assert!(apply_replacements(&m, &db, &[&c[0], &c[0]]).is_err());
    }

    #[test]
    fn incompatible_interface_is_pending() {
        let (m, db, c) = setup();
        let mut cand = c[1].clone();
        cand.interface_compatible = false;
        let (r, v) = apply_replacement(&m, &db, &cand, false).unwrap();
        assert_eq!(v, ApplyVerdict::PendingConfirmation);
        assert_eq!(r, m);
        let (_, v) = apply_replacement(&m, &db, &cand, true).unwrap();
        assert_eq!(v, ApplyVerdict::Applied);
    }

    #[test]
    fn dangling_candidate() {
        let (m, db, c) = setup();
        let cand = BlockCandidate { block: BlockRef::Loop(LoopId(42)), ..c[1].clone() };
        assert!(apply_replacement(&m, &db, &cand, true).is_err());
    }

    #[test]
    fn function_body_replacement() {
        let src = "int i; float a[16]; float b[16];
            void scale() { for (i = 0; i < 16; i++) { a[i] = b[i] * 3.0; } }
            void main() { for (i = 0; i < 16; i++) { b[i] = 1; } }";
        let m = parse_mini_source(src).unwrap();
        let db = PatternDb::from_json_bytes(
            br#"[{"id":"s","trigger_names":["scale"],"replacement_name":"cu_scale","replacement_interface":{"args":["float[]","float[]"]},"speedup_hint":4}]"#,
        )
        .unwrap();
        let (c, _) = find_candidates(&m, &db);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].block, BlockRef::Function("scale".into()));
        let (r, v) = apply_replacement(&m, &db, &c[0], false).unwrap();
        assert_eq!(v, ApplyVerdict::Applied);
        assert_eq!(r.loops().len(), 1);
        assert_eq!(r.loops()[0].body, RegionId(3));
        assert!(pretty_print(&r, Syntax::Mini).contains("void main()"));
    }
}

use serde::Serialize;

use super::db::{Interface, PatternDb, PatternRecord};
use super::vector::{characteristic_vector, similarity, Subtree};
use super::{block_interface, extent, BlockCandidate, BlockRef, MatchKind};
use crate::ir::*;

/// Candidate removed by conflict resolution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dropped {
    pub candidate: BlockCandidate,
    pub reason: String,
}

fn candidate(model: &ProgramModel, block: BlockRef, record: &PatternRecord, kind: MatchKind, score: f64) -> BlockCandidate {
    let ext = extent(model, &block).expect("block taken from the model");
    let interface: Interface = block_interface(model, &block, &ext);
    let interface_compatible = interface == record.replacement_interface;
    BlockCandidate { block, record_id: record.id.clone(), match_kind: kind, similarity_score: score, interface, interface_compatible }
}

/// Calls and function definitions whose name is a record trigger.
pub fn match_by_name(model: &ProgramModel, db: &PatternDb) -> Vec<BlockCandidate> {
    let mut calls: Vec<&FunctionBlockCall> = model.calls().iter().collect();
    calls.sort_by_key(|c| model.stmt_order(c.region, c.stmt));
    let mut out = Vec::new();
    for c in calls {
        for r in db.records.iter().filter(|r| r.trigger_names.contains(&c.callee_name)) {
            out.push(candidate(model, BlockRef::Call(c.id), r, MatchKind::Name, 1.0));
        }
    }
    for (name, _) in model.functions() {
        for r in db.records.iter().filter(|r| r.trigger_names.iter().any(|t| t == name)) {
            out.push(candidate(model, BlockRef::Function(name.to_string()), r, MatchKind::Name, 1.0));
        }
    }
    out
}

/// Function bodies and outermost loop nests whose vector is close enough to a record snippet.
pub fn match_by_similarity(model: &ProgramModel, db: &PatternDb) -> Vec<BlockCandidate> {
    let mut blocks: Vec<(u32, BlockRef, Subtree)> = Vec::new();
    for (name, body) in model.functions() {
        let (owner_region, owner_stmt) = model.region_owner(body).expect("function body has an owner");
        blocks.push((model.stmt_order(owner_region, owner_stmt), BlockRef::Function(name.to_string()), Subtree::Region(body)));
    }
    for l in model.loops().iter().filter(|l| l.parent.is_none()) {
        blocks.push((model.loop_span(l.id).0, BlockRef::Loop(l.id), Subtree::Loop(l.id)));
    }
    blocks.sort_by_key(|(order, _, _)| *order);

    let mut out = Vec::new();
    for (_, block, subtree) in blocks {
        let v = characteristic_vector(model, subtree);
        for r in &db.records {
            let Some(snippet) = &r.snippet_vector else { continue };
            let score = similarity(&v, snippet);
            if score >= r.similarity_threshold {
                out.push(candidate(model, block.clone(), r, MatchKind::Similarity, score));
            }
        }
    }
    out
}

fn contains(model: &ProgramModel, outer: &BlockRef, inner: &BlockRef) -> bool {
    if outer == inner {
        return false;
    }
    let Ok(ext) = extent(model, outer) else { return false };
    match inner {
        BlockRef::Call(c) => {
            let call = &model.calls()[c.0];
            ext.covers(call.region, Some(call.stmt))
        }
        BlockRef::Loop(l) => ext.loops.contains(l),
        BlockRef::Function(_) => false,
    }
}

/// One candidate per block, no block inside another.
///
/// For one block matched by several records a name match beats a similarity
/// match, then the higher score wins, then the earlier candidate. A block
/// nested inside another candidate block is dropped.
pub fn resolve_conflicts(model: &ProgramModel, candidates: Vec<BlockCandidate>) -> (Vec<BlockCandidate>, Vec<Dropped>) {
    let mut kept: Vec<BlockCandidate> = Vec::new();
    let mut dropped = Vec::new();
    for c in candidates {
        match kept.iter().position(|k| k.block == c.block) {
            None => kept.push(c),
            Some(i) => {
                let k = &kept[i];
                let better = (c.match_kind, -c.similarity_score) < (k.match_kind, -k.similarity_score);
                let (win, lose) = if better { (c, kept[i].clone()) } else { (kept[i].clone(), c) };
                if win.match_kind != lose.match_kind {
                    log::info!(
                        "{}: name match with `{}` preferred over similarity match with `{}`",
                        win.block,
                        win.record_id,
                        lose.record_id
                    );
                }
                dropped.push(Dropped { reason: format!("{} also matched record `{}`", lose.block, win.record_id), candidate: lose });
                kept[i] = win;
            }
        }
    }
    let snapshot = kept.clone();
    let (outer, inner): (Vec<_>, Vec<_>) = kept
        .into_iter()
        .partition(|c| !snapshot.iter().any(|o| contains(model, &o.block, &c.block)));
    for c in inner {
        let o = snapshot.iter().find(|o| contains(model, &o.block, &c.block)).expect("partitioned on containment");
        dropped.push(Dropped { reason: format!("{} lies inside {} (record `{}`)", c.block, o.block, o.record_id), candidate: c });
    }
    (outer, dropped)
}

/// Name and similarity matches after conflict resolution.
pub fn find_candidates(model: &ProgramModel, db: &PatternDb) -> (Vec<BlockCandidate>, Vec<Dropped>) {
    let mut all = match_by_name(model, db);
    all.extend(match_by_similarity(model, db));
    resolve_conflicts(model, all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_mini_source;

    const F2: &str = include_str!("../../fixtures/f2.mini");
    const SAMPLE: &str = include_str!("../../fixtures/sample_db.json");

    fn db() -> PatternDb {
        PatternDb::from_json_bytes(SAMPLE.as_bytes()).unwrap()
    }

    #[test]
    fn f2_name_matches_cross_product() {
        let m = parse_mini_source(F2).unwrap();
        let db = db();
        let got: Vec<(String, String)> =
            match_by_name(&m, &db).iter().map(|c| (c.block.to_string(), c.record_id.clone())).collect();
        let mut want = Vec::new();
        for c in m.calls() {
            for r in &db.records {
                if r.trigger_names.contains(&c.callee_name) {
                    want.push((BlockRef::Call(c.id).to_string(), r.id.clone()));
                }
            }
        }
        assert_eq!(got, want);
        assert_eq!(got.len(), 1);
        let c = &match_by_name(&m, &db)[0];
        assert_eq!(c.similarity_score, 1.0);
        assert_eq!(c.match_kind, MatchKind::Name);
        assert!(c.interface_compatible);
    }

    #[test]
    fn no_calls_no_name_matches() {
        let m = parse_mini_source("int i; float a[4]; void main() { for (i = 0; i < 4; i++) { a[i] = 1; } }").unwrap();
        assert!(match_by_name(&m, &db()).is_empty());
    }

    #[test]
    fn f2_histogram_loop_found_by_similarity() {
        let m = parse_mini_source(F2).unwrap();
        let found = match_by_similarity(&m, &db());
        let hist: Vec<&BlockCandidate> = found.iter().filter(|c| c.record_id == "histogram").collect();
        assert_eq!(hist.len(), 1);
        assert_eq!(hist[0].block, BlockRef::Loop(LoopId(2)));
        assert_eq!(hist[0].interface.args, ["float[]", "int[]"]);
        assert!(hist[0].interface_compatible);
    }

    #[test]
    fn nested_candidate_dropped() {
        let m = parse_mini_source(F2).unwrap();
        let rec = |id: &str| BlockCandidate {
            block: BlockRef::Function("main".into()),
            record_id: id.into(),
            match_kind: MatchKind::Similarity,
            similarity_score: 0.9,
            interface: Interface { args: vec![], ret: "void".into() },
            interface_compatible: true,
        };
        let inner = BlockCandidate { block: BlockRef::Loop(LoopId(2)), similarity_score: 0.99, ..rec("histogram") };
        let call = BlockCandidate { block: BlockRef::Call(CallId(0)), match_kind: MatchKind::Name, ..rec("fft") };
        let (kept, dropped) = resolve_conflicts(&m, vec![inner, rec("whole"), call]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].record_id, "whole");
        assert_eq!(dropped.len(), 2);
    }

    #[test]
    fn same_block_prefers_name_then_score() {
        let m = parse_mini_source(F2).unwrap();
        let base = BlockCandidate {
            block: BlockRef::Function("main".into()),
            record_id: "a".into(),
            match_kind: MatchKind::Similarity,
            similarity_score: 0.95,
            interface: Interface { args: vec![], ret: "void".into() },
            interface_compatible: true,
        };
        let name = BlockCandidate { record_id: "b".into(), match_kind: MatchKind::Name, similarity_score: 1.0, ..base.clone() };
        let better = BlockCandidate { record_id: "c".into(), similarity_score: 0.99, ..base.clone() };
        let (kept, _) = resolve_conflicts(&m, vec![base.clone(), name, better.clone()]);
        assert_eq!(kept[0].record_id, "b");
        let (kept, _) = resolve_conflicts(&m, vec![base, better]);
        assert_eq!(kept[0].record_id, "c");
    }
}

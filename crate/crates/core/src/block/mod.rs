//! Function-block offload: pattern DB, name and similarity matching,
//! replacement with library stand-ins, and combination search.

mod combo;
mod db;
mod matcher;
mod replace;
pub mod vector;

pub use combo::{search_block_combination, BlockSearchResult, SubsetMeasurement};
pub use db::{load_pattern_db, Interface, PatternDb, PatternRecord, DEFAULT_SIMILARITY_THRESHOLD};
pub use matcher::{find_candidates, match_by_name, match_by_similarity, resolve_conflicts, Dropped};
pub use replace::{apply_replacement, apply_replacements, ApplyVerdict};
pub use vector::{characteristic_vector, characteristic_vector_of_region, similarity, CharVector, Subtree, DIMENSIONS, DIMENSION_NAMES};

use std::fmt;

use serde::Serialize;

use crate::error::ModelError;
use crate::ir::*;

/// A replaceable unit of the program.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockRef {
    Call(CallId),
    /// An outermost loop nest.
    Loop(LoopId),
    /// The body of a named function.
    Function(String),
}

impl fmt::Display for BlockRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockRef::Call(c) => write!(f, "{c}"),
            BlockRef::Loop(l) => write!(f, "{l}"),
            BlockRef::Function(n) => write!(f, "function {n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Name,
    Similarity,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockCandidate {
    pub block: BlockRef,
    pub record_id: String,
    pub match_kind: MatchKind,
    /// 1.0 for name matches.
    pub similarity_score: f64,
    /// Interface of the block as it stands in the program.
    pub interface: Interface,
    pub interface_compatible: bool,
}

/// Where a block sits and what it covers.
pub(crate) struct BlockExtent {
    pub site: (RegionId, usize),
    /// Regions removed with the block (nested bodies); empty for calls.
    pub inner_regions: Vec<RegionId>,
    pub loops: Vec<LoopId>,
    /// Function blocks replace the whole body region.
    pub whole_body: Option<RegionId>,
}

pub(crate) fn extent(model: &ProgramModel, block: &BlockRef) -> Result<BlockExtent, ModelError> {
    let dangling = || ModelError::integrity(format!("block {block} does not exist in the model"));
    match block {
        BlockRef::Call(c) => {
            let call = model.calls().get(c.0).ok_or_else(dangling)?;
            Ok(BlockExtent { site: (call.region, call.stmt), inner_regions: Vec::new(), loops: Vec::new(), whole_body: None })
        }
        BlockRef::Loop(l) => {
            model.check_loop(*l).map_err(|_| dangling())?;
            Ok(BlockExtent {
                site: model.loop_site(*l),
                inner_regions: model.loop_regions(*l),
                loops: model.loop_subtree(*l),
                whole_body: None,
            })
        }
        BlockRef::Function(name) => {
            let (_, body) = model.functions().into_iter().find(|(n, _)| n == name).ok_or_else(dangling)?;
            let loops: Vec<LoopId> = model
                .loops()
                .iter()
                .filter(|l| l.parent.is_none() && model.loop_site(l.id).0 == body)
                .flat_map(|l| model.loop_subtree(l.id))
                .collect();
            let inner_regions = loops.iter().map(|l| model.loop_node(*l).body).collect();
            Ok(BlockExtent { site: (body, 0), inner_regions, loops, whole_body: Some(body) })
        }
    }
}

impl BlockExtent {
    /// Whether the occurrence / statement at `(region, stmt)` belongs to the block.
    pub fn covers(&self, region: RegionId, stmt: Option<usize>) -> bool {
        self.whole_body == Some(region)
            || self.inner_regions.contains(&region)
            || (self.whole_body.is_none() && region == self.site.0 && stmt == Some(self.site.1))
    }
}

/// Variables the block touches, in document order, loop indices excluded.
pub(crate) fn block_vars(model: &ProgramModel, ext: &BlockExtent) -> Vec<VarId> {
    let indices: Vec<VarId> = ext.loops.iter().map(|l| model.loop_node(*l).header.var).collect();
    let mut occs: Vec<(u32, usize, VarId)> = model
        .occurrences()
        .iter()
        .enumerate()
        .filter(|(_, o)| ext.covers(o.region, o.stmt))
        .map(|(i, o)| (model.occurrence_order(o), i, o.var))
        .collect();
    occs.sort();
    let mut out = Vec::new();
    for (_, _, v) in occs {
        if !indices.contains(&v) && !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

pub(crate) fn block_interface(model: &ProgramModel, block: &BlockRef, ext: &BlockExtent) -> Interface {
    match block {
        BlockRef::Call(c) => {
            let call = &model.calls()[c.0];
            Interface { args: call.arg_types.clone(), ret: call.return_type.clone() }
        }
        _ => Interface {
            args: block_vars(model, ext).into_iter().map(|v| model.variable(v).semantic_type()).collect(),
            ret: "void".into(),
        },
    }
}

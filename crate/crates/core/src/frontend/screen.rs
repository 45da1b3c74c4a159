//! Static screen deciding which loops may be offloaded.
//!
//! A loop is offloadable when, over its whole subtree:
//! - no scalar other than the loop indices of the nest is both read and set,
//! - every array write is subscripted by an expression using the loop's own index,
//! - every call is to a callee marked pure,
//! - no already-replaced library block sits inside it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::ir::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictReason {
    Ok,
    LoopCarriedScalar,
    NonAffineArrayWrite,
    SideEffectCall,
    DirectiveError,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelizabilityVerdict {
    pub loop_id: LoopId,
    pub offloadable: bool,
    pub reason: VerdictReason,
}

impl ParallelizabilityVerdict {
    fn new(loop_id: LoopId, reason: VerdictReason) -> Self {
        ParallelizabilityVerdict { loop_id, offloadable: reason == VerdictReason::Ok, reason }
    }
}

pub fn check_parallelizable(model: &ProgramModel, loop_id: LoopId) -> Result<ParallelizabilityVerdict, ModelError> {
    model.check_loop(loop_id)?;
    let regions = model.loop_regions(loop_id);
    let verdict = |r| Ok(ParallelizabilityVerdict::new(loop_id, r));

    for &r in &regions {
        for stmt in &model.region(r).statements {
            if matches!(stmt, Stmt::Replaced(_)) {
                return verdict(VerdictReason::DirectiveError);
            }
            if let Stmt::Call { call } = stmt {
                if !model.calls()[call.0].pure {
                    return verdict(VerdictReason::SideEffectCall);
                }
            }
        }
    }

    let indices = model.subtree_index_vars(loop_id);
    let own_index = model.loop_node(loop_id).header.var;
    let mut scalar_read = BTreeSet::new();
    let mut scalar_set = BTreeSet::new();
    let mut bad_write = false;
    for &r in &regions {
        for occ in model.occurrences_in(r) {
            let is_array = model.variable(occ.var).is_array();
            match (occ.kind, is_array) {
                (OccurrenceKind::Read, false) => {
                    scalar_read.insert(occ.var);
                }
                (OccurrenceKind::Set, false) => {
                    scalar_set.insert(occ.var);
                }
                (OccurrenceKind::Set, true) if !occ.index_vars.contains(&own_index) => bad_write = true,
                _ => {}
            }
        }
    }
    if scalar_read.intersection(&scalar_set).any(|v| !indices.contains(v)) {
        return verdict(VerdictReason::LoopCarriedScalar);
    }
    if bad_write {
        return verdict(VerdictReason::NonAffineArrayWrite);
    }
    verdict(VerdictReason::Ok)
}

/// Verdicts for every loop, in loop-id order.
pub fn screen_all(model: &ProgramModel) -> Vec<ParallelizabilityVerdict> {
    model
        .loops()
        .iter()
        .map(|l| check_parallelizable(model, l.id).expect("loop ids come from the model"))
        .collect()
}

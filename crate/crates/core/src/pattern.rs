//! Genomes and the offload patterns they encode.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{PatternError, SearchError};
use crate::frontend::ParallelizabilityVerdict;
use crate::ir::{LoopId, ProgramModel};

/// One bit per offloadable loop; `true` means GPU execution.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome(Vec<bool>);

impl Genome {
    pub fn new(bits: Vec<bool>) -> Self {
        Genome(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Genome(vec![false; len])
    }

    /// Bit `i` of the genome is bit `i` of `value` (first loop = least significant).
    pub fn from_index(value: u64, len: usize) -> Self {
        Genome((0..len).map(|i| value >> i & 1 == 1).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn gpu_count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Genome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid genome character `{other}`")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Genome)
    }
}

impl Serialize for Genome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Maps genome bit positions to offloadable loops, in document order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GenomeSpace {
    loops: Vec<LoopId>,
}

impl GenomeSpace {
    pub fn from_loops(loops: Vec<LoopId>) -> Self {
        GenomeSpace { loops }
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn loops(&self) -> &[LoopId] {
        &self.loops
    }
}

/// Gene length is the number of loops that passed the screen.
pub fn build_genome_space(
    model: &ProgramModel,
    verdicts: &[ParallelizabilityVerdict],
) -> Result<GenomeSpace, SearchError> {
    if verdicts.len() != model.loops().len() {
        return Err(SearchError::VerdictCount { loops: model.loops().len(), verdicts: verdicts.len() });
    }
    let mut loops: Vec<LoopId> = verdicts.iter().filter(|v| v.offloadable).map(|v| v.loop_id).collect();
    loops.sort();
    if loops.is_empty() {
        return Err(SearchError::EmptySpace);
    }
    Ok(GenomeSpace { loops })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopPlacement {
    Cpu,
    /// Outermost GPU-marked loop of its nest: one kernel.
    Gpu,
    /// Runs on the GPU inside an offloaded ancestor; its own bit is ignored.
    Subsumed,
}

/// A genome applied to a model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffloadPattern {
    pub genome: Genome,
    pub space: GenomeSpace,
    /// Indexed by loop id.
    pub placements: Vec<LoopPlacement>,
}

impl OffloadPattern {
    pub fn new(model: &ProgramModel, space: &GenomeSpace, genome: Genome) -> Result<Self, PatternError> {
        if genome.len() != space.len() {
            return Err(PatternError::LengthMismatch { genome: genome.len(), space: space.len() });
        }
        let n = model.loops().len();
        let mut marked = vec![false; n];
        for (&l, &bit) in space.loops().iter().zip(genome.bits()) {
            if l.0 >= n {
                return Err(PatternError::UnknownLoop(l.0));
            }
            if space.loops().iter().filter(|x| **x == l).count() > 1 {
                return Err(PatternError::DuplicateLoop(l.0));
            }
            marked[l.0] = bit;
        }
        // Loop ids are pre-order, so parents are placed before children.
        let mut placements = vec![LoopPlacement::Cpu; n];
        for l in model.loops() {
            let under_gpu = l
                .parent
                .is_some_and(|p| placements[p.0] != LoopPlacement::Cpu);
            placements[l.id.0] = if under_gpu {
                LoopPlacement::Subsumed
            } else if marked[l.id.0] {
                LoopPlacement::Gpu
            } else {
                LoopPlacement::Cpu
            };
        }
        Ok(OffloadPattern { genome, space: space.clone(), placements })
    }

    /// Everything on the CPU, with no genome bits at all.
    pub fn cpu_only(model: &ProgramModel) -> Self {
        OffloadPattern {
            genome: Genome::default(),
            space: GenomeSpace::default(),
            placements: vec![LoopPlacement::Cpu; model.loops().len()],
        }
    }

    /// Outermost GPU loops (kernel roots), in document order.
    pub fn gpu_regions(&self) -> Vec<LoopId> {
        self.placements
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == LoopPlacement::Gpu)
            .map(|(i, _)| LoopId(i))
            .collect()
    }

    pub fn runs_on_gpu(&self, l: LoopId) -> bool {
        self.placements[l.0] != LoopPlacement::Cpu
    }

    /// Checks the pattern still fits `model`.
    pub fn check(&self, model: &ProgramModel) -> Result<(), PatternError> {
        if self.genome.len() != self.space.len() {
            return Err(PatternError::LengthMismatch { genome: self.genome.len(), space: self.space.len() });
        }
        if self.placements.len() != model.loops().len() {
            return Err(PatternError::UnknownLoop(self.placements.len().max(model.loops().len()) - 1));
        }
        if let Some(l) = self.space.loops().iter().find(|l| l.0 >= model.loops().len()) {
            return Err(PatternError::UnknownLoop(l.0));
        }
        Ok(())
    }
}

//! Emission of pattern-annotated source text.
//!
//! - `c_openacc`: OpenACC pragmas above loops. A GPU root loop that is not
//!   nested in any other loop gets `#pragma acc kernels`; one nested inside a
//!   CPU loop gets `#pragma acc parallel loop`. Each transfer batch becomes one
//!   `#pragma acc data` line at its anchor loop: `copy(...)` for host-to-device
//!   batches, `copyout(...)` for device-to-host ones. Variables whose copy was
//!   hoisted above the kernel appear in a `present(...)` clause on the kernel
//!   pragma.
//! - `python_cuda_marker`: `# @gpu-kernel begin/end` comments around GPU loops
//!   and a `# @gpu-transfer` manifest header, one line per batch.
//! - `java_lambda_marker`: GPU loops rewritten to
//!   `IntStream.range(lo, hi).parallel().forEach(i -> { ... });` with
//!   `// @gpu-transfer` comments at batch anchors.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::ir::{LoopId, ProgramModel, VarId};
use crate::pattern::{LoopPlacement, OffloadPattern};
use crate::printer::{print_annotated, Annotator, Syntax};
use crate::transfer::{Batch, Direction, Side, TransferPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    COpenacc,
    PythonCudaMarker,
    JavaLambdaMarker,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::COpenacc, Backend::PythonCudaMarker, Backend::JavaLambdaMarker];

    pub fn tag(self) -> &'static str {
        match self {
            Backend::COpenacc => "c_openacc",
            Backend::PythonCudaMarker => "python_cuda_marker",
            Backend::JavaLambdaMarker => "java_lambda_marker",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Backend::COpenacc => "c",
            Backend::PythonCudaMarker => "py",
            Backend::JavaLambdaMarker => "java",
        }
    }

    pub fn syntax(self) -> Syntax {
        match self {
            Backend::COpenacc => Syntax::Mini,
            Backend::PythonCudaMarker => Syntax::Python,
            Backend::JavaLambdaMarker => Syntax::Java,
        }
    }

    /// Emitted file name inside a work directory.
    pub fn file_name(self) -> String {
        format!("candidate.{}", self.extension())
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Backend::ALL
            .into_iter()
            .find(|b| b.tag() == s)
            .ok_or_else(|| format!("unknown backend `{s}` (expected c_openacc, python_cuda_marker or java_lambda_marker)"))
    }
}

struct Annotations<'a> {
    model: &'a ProgramModel,
    pattern: &'a OffloadPattern,
    plan: &'a TransferPlan,
    batches: Vec<Batch>,
    backend: Backend,
}

impl Annotations<'_> {
    fn names(&self, vars: impl IntoIterator<Item = VarId>) -> String {
        let set: BTreeSet<VarId> = vars.into_iter().collect();
        set.iter().map(|v| self.model.variable(*v).name.as_str()).collect::<Vec<_>>().join(", ")
    }

    fn is_root(&self, id: LoopId) -> bool {
        self.pattern.placements[id.0] == LoopPlacement::Gpu
    }

    /// Variables already resident on the device when kernel `id` starts.
    fn present(&self, id: LoopId) -> Vec<VarId> {
        self.plan
            .directives
            .iter()
            .filter(|d| d.gpu_loops.contains(&id) && d.placement.anchor != id)
            .map(|d| d.var)
            .collect()
    }

    fn transfer_comment(&self, prefix: &str, b: &Batch) -> String {
        let side = match b.placement.side {
            Side::Before => "before",
            Side::After => "after",
        };
        format!(
            "{prefix} @gpu-transfer batch={} {} {} {side}-loop{} multiplicity={}",
            b.id,
            b.direction.short(),
            self.names(b.vars.iter().copied()).replace(", ", ","),
            b.placement.anchor.0,
            b.multiplicity
        )
    }
}

impl Annotator for Annotations<'_> {
    fn header(&self) -> Vec<String> {
        match self.backend {
            Backend::PythonCudaMarker => self.batches.iter().map(|b| self.transfer_comment("#", b)).collect(),
            _ => Vec::new(),
        }
    }

    fn before_loop(&self, id: LoopId) -> Vec<String> {
        let mut out = Vec::new();
        let here = self.batches.iter().filter(|b| b.placement.anchor == id);
        match self.backend {
            Backend::COpenacc => {
                for b in here {
                    let clause = match b.direction {
                        Direction::HostToDevice => "copy",
                        Direction::DeviceToHost => "copyout",
                    };
                    out.push(format!("#pragma acc data {clause}({})", self.names(b.vars.iter().copied())));
                }
                if self.is_root(id) {
                    let mut line = if self.model.loop_node(id).parent.is_none() {
                        "#pragma acc kernels".to_string()
                    } else {
                        "#pragma acc parallel loop".to_string()
                    };
                    let present = self.present(id);
                    if !present.is_empty() {
                        line.push_str(&format!(" present({})", self.names(present)));
                    }
                    out.push(line);
                }
            }
            Backend::PythonCudaMarker => {
                if self.is_root(id) {
                    let present = self.present(id);
                    let mut line = format!("# @gpu-kernel begin loop{}", id.0);
                    if !present.is_empty() {
                        line.push_str(&format!(" present={}", self.names(present).replace(", ", ",")));
                    }
                    out.push(line);
                }
            }
            Backend::JavaLambdaMarker => {
                out.extend(here.map(|b| self.transfer_comment("//", b)));
            }
        }
        out
    }

    fn after_loop(&self, id: LoopId) -> Vec<String> {
        if self.backend == Backend::PythonCudaMarker && self.is_root(id) {
            vec![format!("# @gpu-kernel end loop{}", id.0)]
        } else {
            Vec::new()
        }
    }

    fn parallel(&self, id: LoopId) -> bool {
        self.backend == Backend::JavaLambdaMarker && self.is_root(id)
    }
}

pub fn emit_annotated(
    model: &ProgramModel,
    pattern: &OffloadPattern,
    plan: &TransferPlan,
    backend: Backend,
) -> Result<String, ModelError> {
    pattern.check(model).map_err(|e| ModelError::Integrity(e.to_string()))?;
    if let Some(d) = plan.directives.iter().find(|d| d.placement.anchor.0 >= model.loops().len()) {
        return Err(ModelError::Integrity(format!("transfer anchored at unknown loop {}", d.placement.anchor.0)));
    }
    let ann = Annotations { model, pattern, plan, batches: plan.batches(), backend };
    Ok(print_annotated(model, backend.syntax(), &ann))
}

/// Emitted text with its backend, as handed to evaluators.
#[derive(Clone, Debug, PartialEq)]
pub struct EmittedCode {
    pub backend: Backend,
    pub text: String,
}

/// Number of annotation lines (pragmas or markers) in emitted text.
pub fn annotation_count(text: &str, backend: Backend) -> usize {
    text.lines()
        .map(str::trim_start)
        .filter(|l| match backend {
            Backend::COpenacc => l.starts_with("#pragma acc"),
            Backend::PythonCudaMarker => l.starts_with("# @gpu-kernel begin") || l.starts_with("# @gpu-transfer"),
            Backend::JavaLambdaMarker => l.contains(".parallel().forEach(") || l.starts_with("// @gpu-transfer"),
        })
        .count()
}

/// Removes annotation lines added by the C and Python backends.
pub fn strip_annotations(text: &str, backend: Backend) -> String {
    let mut out = String::new();
    for line in text.lines() {
        let t = line.trim_start();
        let drop = match backend {
            Backend::COpenacc => t.starts_with("#pragma acc"),
            Backend::PythonCudaMarker => t.starts_with("# @gpu-"),
            Backend::JavaLambdaMarker => t.starts_with("// @gpu-transfer"),
        };
        if !drop {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_mini_source;
    use crate::pattern::{Genome, GenomeSpace};
    use crate::printer::pretty_print;
    use crate::transfer::{hoist_transfers, required_transfers};

    fn emit(src: &str, bits: &str, backend: Backend) -> (ProgramModel, OffloadPattern, TransferPlan, String) {
        let m = parse_mini_source(src).unwrap();
        let space = GenomeSpace::from_loops(m.loops().iter().map(|l| l.id).collect());
        let p = OffloadPattern::new(&m, &space, bits.parse().unwrap()).unwrap();
        let raw = required_transfers(&m, &p).unwrap();
        let plan = hoist_transfers(&m, &p, &raw);
        let text = emit_annotated(&m, &p, &plan, backend).unwrap();
        (m, p, plan, text)
    }

    const SINGLE: &str = "int i; float a[64]; float b[64];
        void main() { for (i = 0; i < 64; i++) { b[i] = 2; } for (i = 0; i < 64; i++) { a[i] = b[i]; } }";

    #[test]
    fn cpu_only_is_identity() {
        for backend in Backend::ALL {
            let (m, _, _, text) = emit(SINGLE, "00", backend);
            assert_eq!(text, pretty_print(&m, backend.syntax()));
            assert_eq!(annotation_count(&text, backend), 0);
        }
    }

    #[test]
    fn single_gpu_loop_copy_then_kernels() {
        let (_, _, _, text) = emit(SINGLE, "01", Backend::COpenacc);
        let lines: Vec<&str> = text.lines().map(str::trim).collect();
        let copy = lines.iter().position(|l| *l == "#pragma acc data copy(b)").expect(&text);
        assert_eq!(lines[copy + 1], "#pragma acc kernels");
        assert_eq!(lines.iter().filter(|l| l.starts_with("#pragma")).count(), 2);
    }

    #[test]
    fn nested_kernel_uses_parallel_loop_and_present() {
        let src = "int t; int i; float a[100]; float b[100];
            void main() { for (t = 0; t < 10; t++) { for (i = 0; i < 100; i++) { a[i] = b[i]; } } }";
        let (_, _, _, text) = emit(src, "01", Backend::COpenacc);
        assert!(text.contains("    #pragma acc data copy(b)\n    for (t"), "{text}");
        assert!(text.contains("#pragma acc parallel loop present(b)"), "{text}");
    }

    #[test]
    fn annotation_count_and_strip() {
        let src = include_str!("../fixtures/f4.mini");
        for bits in ["0101", "0111", "0010", "0000", "1000"] {
            for backend in Backend::ALL {
                let (m, p, plan, text) = emit(src, bits, backend);
                assert_eq!(
                    annotation_count(&text, backend),
                    p.gpu_regions().len() + plan.batches().len(),
                    "{backend} {bits}\n{text}"
                );
                if backend != Backend::JavaLambdaMarker {
                    assert_eq!(strip_annotations(&text, backend), pretty_print(&m, backend.syntax()));
                }
            }
        }
    }

    #[test]
    fn backend_tags_parse() {
        for b in Backend::ALL {
            assert_eq!(b.tag().parse::<Backend>().unwrap(), b);
        }
        assert!("cuda".parse::<Backend>().is_err());
    }

    #[test]
    fn mismatched_pattern_is_rejected() {
        let m = parse_mini_source(SINGLE).unwrap();
        let other = parse_mini_source(include_str!("../fixtures/f4.mini")).unwrap();
        let space = GenomeSpace::from_loops(other.loops().iter().map(|l| l.id).collect());
        let p = OffloadPattern::new(&other, &space, Genome::zeros(space.len())).unwrap();
        assert!(emit_annotated(&m, &p, &TransferPlan::default(), Backend::COpenacc).is_err());
    }
}

//! Language-dependent edges: the mini-language parser, the IR document
//! loader, and the parallelizability screen.

mod ir_doc;
mod lexer;
mod parser;
mod screen;

pub use ir_doc::{dump_ir_document, load_ir_document, IR_DOCUMENT_VERSION};
pub use parser::{
    parse_mini_source, parse_mini_source_with, parse_snippet, ParseOptions, DEFAULT_CALL_COST,
    DEFAULT_GPU_COST_RATIO, DEFAULT_TRIP_COUNT,
};
pub use screen::{check_parallelizable, screen_all, ParallelizabilityVerdict, VerdictReason};

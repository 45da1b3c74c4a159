//! Automatic GPU offload pattern search.
//!
//! Given a program model, the pipeline first tries to replace recognizable
//! function blocks with device-library equivalents, then runs a genetic
//! algorithm over which loops to run on the GPU, planning CPU/GPU transfers
//! for each candidate and measuring it through a pluggable [`eval::Evaluator`].

pub mod error;
pub mod frontend;
pub mod ga;
pub mod ir;
pub mod printer;
pub mod block;
pub mod codegen;
pub mod eval;
pub mod pattern;
pub mod pipeline;
pub mod synthetic;
pub mod transfer;

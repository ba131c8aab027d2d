//! camo: compiler-level obfuscation for a textual LLVM IR subset, plus the
//! machinery to prove the transformations harmless and to benchmark how well
//! language models classify the results.
//!
//! The crate is organized as a pipeline:
//!
//! - [`ir`]: typed SSA program representation, validation, CFG, reg2mem
//! - [`text`]: `.ll` parser and canonical printer
//! - [`interp`]: deterministic interpreter with block coverage
//! - [`obf`]: instruction substitution, bogus control flow, block
//!   splitting and control-flow flattening, driven by a seeded pipeline
//! - [`equiv`]: differential-testing oracle over seeded input vectors
//! - [`dataset`]: labeled-sample manifests and per-sample artifacts
//! - [`bench`]: prompt construction, model adapters, majority voting
//! - [`metrics`]: confusion-matrix accounting and report emission
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `camo` binary for the equivalent command-line surface.

pub mod bench;
pub mod cli;
pub mod dataset;
pub mod equiv;
pub mod interp;
pub mod ir;
pub mod metrics;
pub mod obf;
pub mod rng;
pub mod text;

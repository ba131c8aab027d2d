//! Typed in-memory IR, CFG construction, validation and SSA demotion.

pub mod cfg;
pub mod demote;
pub mod types;
pub mod validate;

pub use cfg::{build_cfg, compute_dominators, Cfg, Dominators};
pub use demote::demote_to_memory;
pub use types::*;
pub use validate::{validate, validate_function, ValidationError, Violation};

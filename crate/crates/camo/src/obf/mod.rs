//! The four obfuscation passes: instruction substitution, bogus control
//! flow, basic-block splitting and control-flow flattening.
//!
//! Each pass is a pure function from function to function; [`run_pipeline`]
//! composes them over every defined function of a module. All randomness
//! flows from one 64-bit seed through per-function SplitMix64 streams
//! (`seed ^ fnv1a(name)`), so results do not depend on iteration order and
//! identical inputs print byte-identically.

pub mod bogus;
pub mod flatten;
pub mod opaque;
pub mod split;
pub mod substitute;

pub use bogus::insert_bogus_flow;
pub use flatten::flatten;
pub use opaque::{OpaquePool, OpaquePredicate, Truth};
pub use split::split_blocks;
pub use substitute::{expand_single, substitute_instructions, Rule, RULES};

use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::ir::{validate, IrModule, ValidationError};
use crate::rng::{fnv1a, SplitMix64};

/// One of the four transformations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PassKind {
    Sub,
    Bcf,
    Split,
    Flatten,
}

impl PassKind {
    pub fn name(&self) -> &'static str {
        match self {
            PassKind::Sub => "sub",
            PassKind::Bcf => "bcf",
            PassKind::Split => "split",
            PassKind::Flatten => "flatten",
        }
    }

    /// Canonical full pipeline: flattening last maximizes dispatcher cases.
    pub fn all() -> Vec<PassKind> {
        vec![PassKind::Sub, PassKind::Bcf, PassKind::Split, PassKind::Flatten]
    }
}

impl fmt::Display for PassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PassKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sub" => Ok(PassKind::Sub),
            "bcf" => Ok(PassKind::Bcf),
            "split" => Ok(PassKind::Split),
            "flatten" => Ok(PassKind::Flatten),
            other => Err(format!(
                "unknown pass '{other}' (expected sub, bcf, split or flatten)"
            )),
        }
    }
}

/// Pass selection and parameters.
#[derive(Debug, Clone)]
pub struct ObfConfig {
    pub seed: u64,
    /// Chance that a candidate block gains a bogus guard.
    pub bcf_probability: f64,
    /// Maximum instructions per block after splitting.
    pub split_chunk: usize,
    /// How many times the substitution rewrite is repeated.
    pub subst_rounds: u32,
    /// Passes to run, in order; names must be unique.
    pub passes: Vec<PassKind>,
}

impl Default for ObfConfig {
    fn default() -> Self {
        ObfConfig {
            seed: 0,
            bcf_probability: 0.3,
            split_chunk: 3,
            subst_rounds: 1,
            passes: PassKind::all(),
        }
    }
}

impl ObfConfig {
    pub fn check(&self) -> Result<(), ObfError> {
        if !(0.0..=1.0).contains(&self.bcf_probability) {
            return Err(ObfError::Config(format!(
                "bcf probability {} is outside [0, 1]",
                self.bcf_probability
            )));
        }
        if self.split_chunk < 1 {
            return Err(ObfError::Config("split chunk must be at least 1".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.passes {
            if !seen.insert(*p) {
                return Err(ObfError::Config(format!("pass '{p}' listed twice")));
            }
        }
        Ok(())
    }
}

/// Per-pass transformation statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PassCounters {
    pub blocks_processed: u64,
    pub blocks_split: u64,
    pub predicates_inserted: u64,
    pub instructions_substituted: u64,
    pub states_assigned: u64,
}

impl PassCounters {
    fn add(&mut self, other: &PassCounters) {
        self.blocks_processed += other.blocks_processed;
        self.blocks_split += other.blocks_split;
        self.predicates_inserted += other.predicates_inserted;
        self.instructions_substituted += other.instructions_substituted;
        self.states_assigned += other.states_assigned;
    }
}

/// What one pass did to one function.
#[derive(Debug, Clone)]
pub struct PassOutcome {
    pub function: crate::ir::IrFunction,
    pub stats: PassCounters,
    /// Labels of inserted never-executed blocks (bogus control flow only).
    pub junk_labels: Vec<String>,
}

/// Aggregated statistics for a pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct ObfReport {
    pub seed: u64,
    pub passes: Vec<PassReport>,
    /// Function name -> labels of inserted junk blocks, for coverage checks.
    pub junk_blocks: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PassReport {
    pub pass: PassKind,
    #[serde(flatten)]
    pub counters: PassCounters,
}

impl ObfReport {
    fn new(cfg: &ObfConfig) -> ObfReport {
        ObfReport {
            seed: cfg.seed,
            passes: cfg
                .passes
                .iter()
                .map(|p| PassReport {
                    pass: *p,
                    counters: PassCounters::default(),
                })
                .collect(),
            junk_blocks: BTreeMap::new(),
        }
    }

    /// Every junk label across all functions.
    pub fn junk_labels(&self, function: &str) -> &[String] {
        self.junk_blocks
            .get(function)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ObfError {
    #[error("invalid obfuscation config: {0}")]
    Config(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("pass '{pass}' failed on @{function}: {source}")]
    Pass {
        function: String,
        pass: PassKind,
        source: ValidationError,
    },
}

/// Applies `cfg.passes` to every defined function.
///
/// Declarations and existing globals are untouched; the globals backing any
/// inserted opaque predicates are appended at the end of the module. The
/// result is deterministic in `(m, cfg)`.
pub fn run_pipeline(m: &IrModule, cfg: &ObfConfig) -> Result<(IrModule, ObfReport), ObfError> {
    cfg.check()?;
    let violations = validate(m);
    if !violations.is_empty() {
        return Err(ObfError::Invalid(ValidationError { violations }));
    }

    let mut out = m.clone();
    let mut pool = OpaquePool::new(m, cfg.seed);
    let mut report = ObfReport::new(cfg);

    for f in out.functions.iter_mut().filter(|f| !f.is_declaration) {
        let mut rng = SplitMix64::new(cfg.seed ^ fnv1a(f.name.as_bytes()));
        for (pi, pass) in cfg.passes.iter().enumerate() {
            let outcome = match pass {
                PassKind::Sub => substitute_instructions(f, cfg, &mut rng),
                PassKind::Bcf => insert_bogus_flow(f, cfg, &mut rng, &mut pool),
                PassKind::Split => split_blocks(f, cfg, &mut rng),
                PassKind::Flatten => flatten(f, cfg, &mut rng),
            }
            .map_err(|source| ObfError::Pass {
                function: f.name.clone(),
                pass: *pass,
                source,
            })?;
            *f = outcome.function;
            report.passes[pi].counters.add(&outcome.stats);
            if !outcome.junk_labels.is_empty() {
                report
                    .junk_blocks
                    .entry(f.name.clone())
                    .or_default()
                    .extend(outcome.junk_labels);
            }
        }
    }

    out.globals.extend(pool.used_globals());
    debug_assert_eq!(validate(&out), vec![]);
    Ok((out, report))
}

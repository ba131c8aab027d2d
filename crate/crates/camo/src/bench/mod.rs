//! Zero-shot benchmark protocol: build the prompt for a code artifact, query
//! a model adapter several times in fresh sessions, parse the verdicts, and
//! take the strict majority.

mod adapter;

pub use adapter::{
    Adapter, AdapterError, AdapterSpec, HttpAdapter, HttpConfig, ReplayAdapter, StubAdapter,
};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataset::Manifest;

/// Which representation of a sample is under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptKind {
    CCode,
    LlvmOrig,
    LlvmObf,
}

impl PromptKind {
    pub fn slug(&self) -> &'static str {
        match self {
            PromptKind::CCode => "c",
            PromptKind::LlvmOrig => "llvm-orig",
            PromptKind::LlvmObf => "llvm-obf",
        }
    }

    /// "Before"/"After" column value in reports: obfuscated IR is the only
    /// post-transformation artifact.
    pub fn obfuscation_phase(&self) -> &'static str {
        match self {
            PromptKind::LlvmObf => "After",
            _ => "Before",
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PromptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "c" | "c-code" => Ok(PromptKind::CCode),
            "llvm-orig" | "llvm" => Ok(PromptKind::LlvmOrig),
            "llvm-obf" | "obf" => Ok(PromptKind::LlvmObf),
            other => Err(format!(
                "unknown kind '{other}' (expected c, llvm-orig or llvm-obf)"
            )),
        }
    }
}

/// A parsed model answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Verdict {
    Secure,
    Insecure {
        reason: String,
    },
    /// Anything that does not match the mandated answer formats. The raw
    /// text lives in the trial record, not here.
    Invalid,
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        !matches!(self, Verdict::Invalid)
    }
}

/// One model query and its outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sample_id: String,
    pub kind: PromptKind,
    /// 1-based trial index.
    pub trial: u32,
    pub adapter: String,
    pub raw_response: String,
    pub verdict: Verdict,
    pub latency_ms: u64,
    pub timestamp: String,
}

/// Identity of one trial; the replay adapter's entire lookup key.
#[derive(Debug, Clone, Copy)]
pub struct TrialKey<'a> {
    pub sample_id: &'a str,
    pub kind: PromptKind,
    pub trial: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalLabel {
    Secure,
    Insecure,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Votes {
    pub secure: u32,
    pub insecure: u32,
    pub invalid: u32,
}

/// Aggregated classification for one (sample, kind).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityResult {
    pub sample_id: String,
    pub kind: PromptKind,
    pub adapter: String,
    pub final_label: FinalLabel,
    pub votes: Votes,
    pub valid_count: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("cannot build a prompt over empty code")]
    EmptyCode,
    #[error("trials mix keys: {0}")]
    MixedKey(String),
    #[error("sample '{sample}' has no {kind} artifact")]
    MissingArtifact { sample: String, kind: PromptKind },
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

// ---- prompts ----------------------------------------------------------------

/// Builds the zero-shot prompt for one code artifact: task sentence, the two
/// mandated response formats, "Answer briefly.", then the code after a
/// literal `Code:` marker.
pub fn build_prompt(kind: PromptKind, code: &str) -> Result<String, BenchError> {
    if code.is_empty() {
        return Err(BenchError::EmptyCode);
    }
    let subject = match kind {
        PromptKind::CCode => "C source",
        PromptKind::LlvmOrig => "LLVM source",
        PromptKind::LlvmObf => "obfuscated LLVM source",
    };
    Ok(format!(
        "Analyze the provided {subject} code for potential security vulnerabilities or signs of malicious behavior. Using exactly one of the following formats:\n\
         - If the file is secure: Yes, the code is secure.\n\
         - If the file is insecure: No, the code is insecure because [reason].\n\
         Answer briefly.\n\
         \n\
         Code:\n\
         {code}"
    ))
}

// ---- verdict parsing ---------------------------------------------------------

const SECURE_PREFIX: &str = "yes, the code is secure";
const INSECURE_PREFIX: &str = "no, the code is insecure because";

/// Classifies a raw response. Case-insensitive after stripping leading
/// markdown fences and quote markers; anything off-format is `Invalid`.
pub fn parse_verdict(response: &str) -> Verdict {
    let stripped = strip_markup(response);
    let lower = stripped.to_lowercase();
    if lower.starts_with(SECURE_PREFIX) {
        return Verdict::Secure;
    }
    if let Some(rest) = lower.strip_prefix(INSECURE_PREFIX) {
        let reason = stripped[stripped.len() - rest.len()..].trim().to_string();
        return Verdict::Insecure { reason };
    }
    Verdict::Invalid
}

fn strip_markup(response: &str) -> String {
    let mut text = response.trim();
    // Fenced block: drop the opening fence line and a trailing fence.
    if text.starts_with("```") {
        if let Some(nl) = text.find('\n') {
            text = &text[nl + 1..];
        } else {
            text = "";
        }
        if let Some(stripped) = text.trim_end().strip_suffix("```") {
            text = stripped;
        }
    }
    let text = text.trim();
    // Leading block quotes or quotation marks.
    text.trim_start_matches(['>', '"', '\'', '“', ' '])
        .trim()
        .to_string()
}

// ---- trials -----------------------------------------------------------------

/// How many extra asks an `Invalid` verdict earns before it is recorded.
const REASK_LIMIT: u32 = 2;

const EPOCH_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

/// Runs `repeats` independent trials of `(sample, kind)` against an adapter.
///
/// Each trial is a fresh session: one prompt, no history. An invalid verdict
/// is re-asked up to two times; every raw response (including re-asks) goes
/// through `raw_sink(trial, attempt, text)`.
pub fn run_trials(
    sample_id: &str,
    kind: PromptKind,
    code: &str,
    adapter: &dyn Adapter,
    repeats: u32,
    mut raw_sink: impl FnMut(u32, u32, &str),
) -> Result<Vec<TrialRecord>, BenchError> {
    let prompt = build_prompt(kind, code)?;
    let mut records = Vec::with_capacity(repeats as usize);
    for trial in 1..=repeats {
        let key = TrialKey {
            sample_id,
            kind,
            trial,
        };
        let mut attempt = 0;
        let record = loop {
            attempt += 1;
            let started = std::time::Instant::now();
            match adapter.complete(&prompt, &key) {
                Ok(raw) => {
                    let latency = started.elapsed().as_millis() as u64;
                    raw_sink(trial, attempt, &raw);
                    let verdict = parse_verdict(&raw);
                    if verdict.is_valid() || attempt > REASK_LIMIT {
                        break make_record(adapter, key, raw, verdict, latency);
                    }
                }
                Err(AdapterError::Unavailable(reason)) => {
                    let raw = format!("<<adapter unavailable: {reason}>>");
                    raw_sink(trial, attempt, &raw);
                    break make_record(adapter, key, raw, Verdict::Invalid, 0);
                }
            }
        };
        records.push(record);
    }
    Ok(records)
}

fn make_record(
    adapter: &dyn Adapter,
    key: TrialKey,
    raw: String,
    verdict: Verdict,
    latency_ms: u64,
) -> TrialRecord {
    let (latency_ms, timestamp) = if adapter.offline() {
        (0, EPOCH_TIMESTAMP.to_string())
    } else {
        (
            latency_ms,
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        )
    };
    TrialRecord {
        sample_id: key.sample_id.to_string(),
        kind: key.kind,
        trial: key.trial,
        adapter: adapter.id(),
        raw_response: raw,
        verdict,
        latency_ms,
        timestamp,
    }
}

// ---- majority ---------------------------------------------------------------

/// Strict majority over valid verdicts. Fewer than two valid votes, or a
/// tie, is `Inconclusive` (excluded from the confusion matrix downstream).
pub fn majority(trials: &[TrialRecord]) -> Result<MajorityResult, BenchError> {
    let first = trials.first().ok_or_else(|| {
        BenchError::MixedKey("cannot take a majority over zero trials".into())
    })?;
    let mut votes = Votes::default();
    for t in trials {
        if (t.sample_id.as_str(), t.kind, t.adapter.as_str())
            != (first.sample_id.as_str(), first.kind, first.adapter.as_str())
        {
            return Err(BenchError::MixedKey(format!(
                "trial {}/{}/{} mixed with {}/{}/{}",
                t.sample_id, t.kind, t.adapter, first.sample_id, first.kind, first.adapter
            )));
        }
        match t.verdict {
            Verdict::Secure => votes.secure += 1,
            Verdict::Insecure { .. } => votes.insecure += 1,
            Verdict::Invalid => votes.invalid += 1,
        }
    }
    let valid_count = votes.secure + votes.insecure;
    let final_label = if valid_count < 2 || votes.secure == votes.insecure {
        FinalLabel::Inconclusive
    } else if votes.secure > votes.insecure {
        FinalLabel::Secure
    } else {
        FinalLabel::Insecure
    };
    Ok(MajorityResult {
        sample_id: first.sample_id.clone(),
        kind: first.kind,
        adapter: first.adapter.clone(),
        final_label,
        votes,
        valid_count,
    })
}

// ---- run orchestration --------------------------------------------------------

/// Bench run parameters beyond the adapter itself.
#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub repeats: u32,
    /// Maximum simultaneous samples in flight.
    pub in_flight: usize,
    pub run_id: String,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            repeats: 3,
            in_flight: 2,
            run_id: "run".into(),
            seed: 0,
        }
    }
}

/// Artifacts of a completed run.
#[derive(Debug)]
pub struct BenchRun {
    pub dir: PathBuf,
    pub records: Vec<TrialRecord>,
    pub majorities: Vec<MajorityResult>,
    pub inconclusive: usize,
}

/// Executes the full protocol over every sample of a manifest and persists
/// `run.json`, `raw/`, `trials.jsonl` and `majorities.json` under
/// `<out_root>/<run_id>/`.
///
/// Samples run concurrently up to `in_flight`; outputs are ordered by
/// (sample id, kind, trial) at finalization, so two runs with an offline
/// adapter are byte-identical.
pub fn run_bench(
    manifest: &Manifest,
    dataset_root: &Path,
    kind: PromptKind,
    adapter: &dyn Adapter,
    opts: &BenchOptions,
    out_root: &Path,
) -> Result<BenchRun, BenchError> {
    let io = |context: String| move |source| BenchError::Io { context, source };

    // Load all artifacts up front so a missing one fails before any query.
    let mut units: Vec<(String, String)> = Vec::with_capacity(manifest.samples.len());
    for sample in &manifest.samples {
        let rel = match kind {
            PromptKind::CCode => Some(&sample.source),
            PromptKind::LlvmOrig => sample.orig.as_ref(),
            PromptKind::LlvmObf => sample.obf.as_ref(),
        }
        .ok_or_else(|| BenchError::MissingArtifact {
            sample: sample.id.clone(),
            kind,
        })?;
        let path = dataset_root.join(rel);
        let code = std::fs::read_to_string(&path)
            .map_err(io(format!("reading {}", path.display())))?;
        units.push((sample.id.clone(), code));
    }

    let dir = out_root.join(&opts.run_id);
    let raw_dir = dir.join("raw");
    std::fs::create_dir_all(&raw_dir).map_err(io(format!("creating {}", raw_dir.display())))?;

    let run_log = serde_json::json!({
        "run_id": opts.run_id,
        "adapter": adapter.id(),
        "kind": kind,
        "repeats": opts.repeats,
        "in_flight": opts.in_flight,
        "seed": opts.seed,
        "samples": units.len(),
    });
    std::fs::write(
        dir.join("run.json"),
        format!("{:#}\n", run_log),
    )
    .map_err(io(format!("writing {}", dir.join("run.json").display())))?;

    // Bounded worker pool over the sample list.
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: std::sync::Mutex<Vec<(usize, Vec<TrialRecord>)>> =
        std::sync::Mutex::new(Vec::with_capacity(units.len()));
    let failure: std::sync::Mutex<Option<BenchError>> = std::sync::Mutex::new(None);
    let workers = opts.in_flight.max(1).min(units.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= units.len() || failure.lock().unwrap().is_some() {
                    return;
                }
                let (sample_id, code) = &units[i];
                // Request content is the prompt alone (fresh sessions), so
                // one capture per sample covers every trial's request body.
                if let Ok(prompt) = build_prompt(kind, code) {
                    let name = format!("{}__{}.prompt.txt", sample_id, kind.slug());
                    let _ = std::fs::write(raw_dir.join(name), prompt);
                }
                let sink = |trial: u32, attempt: u32, raw: &str| {
                    let name = format!("{}__{}__{}__a{}.txt", sample_id, kind.slug(), trial, attempt);
                    // Raw capture is best effort; the record keeps the text.
                    let _ = std::fs::write(raw_dir.join(name), raw);
                };
                match run_trials(sample_id, kind, code, adapter, opts.repeats, sink) {
                    Ok(records) => results.lock().unwrap().push((i, records)),
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });

    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let mut per_sample = results.into_inner().unwrap();
    per_sample.sort_by_key(|(i, _)| *i);

    let mut records: Vec<TrialRecord> = Vec::new();
    let mut majorities: Vec<MajorityResult> = Vec::new();
    for (_, sample_records) in &per_sample {
        majorities.push(majority(sample_records)?);
        records.extend(sample_records.iter().cloned());
    }
    records.sort_by(|a, b| {
        (&a.sample_id, a.kind, a.trial).cmp(&(&b.sample_id, b.kind, b.trial))
    });
    majorities.sort_by(|a, b| (&a.sample_id, a.kind).cmp(&(&b.sample_id, b.kind)));

    let trials_path = dir.join("trials.jsonl");
    let mut out = Vec::new();
    for r in &records {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"))
            .expect("writing to memory");
    }
    std::fs::write(&trials_path, out)
        .map_err(io(format!("writing {}", trials_path.display())))?;

    let majorities_path = dir.join("majorities.json");
    std::fs::write(
        &majorities_path,
        format!(
            "{}\n",
            serde_json::to_string_pretty(&majorities).expect("majorities serialize")
        ),
    )
    .map_err(io(format!("writing {}", majorities_path.display())))?;

    let inconclusive = majorities
        .iter()
        .filter(|m| m.final_label == FinalLabel::Inconclusive)
        .count();
    Ok(BenchRun {
        dir,
        records,
        majorities,
        inconclusive,
    })
}

/// Loads `majorities.json` back from a run directory.
pub fn load_majorities(run_dir: &Path) -> Result<Vec<MajorityResult>, BenchError> {
    let path = run_dir.join("majorities.json");
    let text = std::fs::read_to_string(&path).map_err(|source| BenchError::Io {
        context: format!("reading {}", path.display()),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| BenchError::Io {
        context: format!("parsing {}", path.display()),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}

/// Loads `trials.jsonl` back from a run directory.
pub fn load_trials(run_dir: &Path) -> Result<Vec<TrialRecord>, BenchError> {
    let path = run_dir.join("trials.jsonl");
    let text = std::fs::read_to_string(&path).map_err(|source| BenchError::Io {
        context: format!("reading {}", path.display()),
        source,
    })?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| BenchError::Io {
            context: format!("parsing {}", path.display()),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?);
    }
    Ok(out)
}

/// Groups majorities by (adapter, kind) for report rows, preserving first
/// appearance order.
pub fn group_for_report(
    majorities: &[MajorityResult],
) -> Vec<((String, PromptKind), Vec<&MajorityResult>)> {
    let mut order: Vec<(String, PromptKind)> = Vec::new();
    let mut groups: BTreeMap<(String, PromptKind), Vec<&MajorityResult>> = BTreeMap::new();
    for m in majorities {
        let key = (m.adapter.clone(), m.kind);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(m);
    }
    order
        .into_iter()
        .map(|k| {
            let v = groups.remove(&k).unwrap_or_default();
            (k, v)
        })
        .collect()
}

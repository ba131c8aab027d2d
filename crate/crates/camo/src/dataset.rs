//! Labeled-sample management: ingest JSON-Lines corpora, keep the per-sample
//! artifact layout (`samples/<id>/{source.c, orig.ll, obf.ll}`), and persist
//! a diff-friendly `manifest.json` at the dataset root.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::text::{parse_module, ParseError};

/// Ground-truth class of a sample. `Vulnerable` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Vulnerable,
    Safe,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Vulnerable => "vulnerable",
            Label::Safe => "safe",
        })
    }
}

/// One labeled function and the locations of its artifacts, relative to the
/// dataset root. `orig`/`obf` stay `null` until the IR is attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub label: Label,
    pub source: PathBuf,
    pub orig: Option<PathBuf>,
    pub obf: Option<PathBuf>,
}

/// Which IR slot of a sample to fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrRole {
    Orig,
    Obf,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub vulnerable: u64,
    pub safe: u64,
}

/// The dataset index, persisted as `manifest.json` with stable key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// Free-form provenance log: ingest source, external tool exits.
    pub provenance: Vec<String>,
    pub require_balanced: bool,
    pub counts: LabelCounts,
    /// Ordered lexicographically by id.
    pub samples: Vec<Sample>,
}

impl Manifest {
    pub fn sample(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    fn sample_mut(&mut self, id: &str) -> Option<&mut Sample> {
        self.samples.iter_mut().find(|s| s.id == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {detail}")]
    MalformedLine { line: usize, detail: String },
    #[error("duplicate sample id '{0}'")]
    DuplicateId(String),
    #[error("unknown sample id '{0}'")]
    UnknownId(String),
    #[error("label counts differ in a balanced dataset: {vulnerable} vulnerable vs {safe} safe")]
    BalanceViolation { vulnerable: u64, safe: u64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("no external compile command configured; set `compile.command` in the config file or the CAMO_COMPILE_COMMAND environment variable")]
    ToolMissing,
    #[error("external compile command failed with {status}: {stderr}")]
    ToolFailed { status: String, stderr: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_ctx(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> DatasetError {
    let context = context.into();
    move |source| DatasetError::Io { context, source }
}

/// Result of [`ingest`]: the written manifest plus non-fatal warnings.
#[derive(Debug)]
pub struct IngestOutcome {
    pub manifest: Manifest,
    pub warnings: Vec<String>,
}

/// Reads a JSON-Lines corpus (objects with `id`/`index`, `func`, `target`)
/// and lays out the artifact skeleton under `root`.
///
/// `target` 1 maps to [`Label::Vulnerable`], 0 to [`Label::Safe`]. Samples
/// are ordered by id; re-ingesting the same file produces a byte-identical
/// manifest.
pub fn ingest(
    jsonl: &Path,
    root: &Path,
    require_balanced: bool,
) -> Result<IngestOutcome, DatasetError> {
    let text = std::fs::read_to_string(jsonl)
        .map_err(io_ctx(format!("reading {}", jsonl.display())))?;

    let mut entries: Vec<(String, Label, String)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(line).map_err(|e| DatasetError::MalformedLine {
                line: line_no,
                detail: format!("not a JSON object: {e}"),
            })?;
        let id = match (v.get("id"), v.get("index")) {
            (Some(serde_json::Value::String(s)), _) => s.clone(),
            (Some(serde_json::Value::Number(n)), _) => n.to_string(),
            (None, Some(serde_json::Value::Number(n))) => n.to_string(),
            _ => {
                return Err(DatasetError::MalformedLine {
                    line: line_no,
                    detail: "missing 'id' or 'index' field".into(),
                })
            }
        };
        let func = v
            .get("func")
            .and_then(|f| f.as_str())
            .ok_or(DatasetError::MalformedLine {
                line: line_no,
                detail: "missing 'func' field".into(),
            })?
            .to_string();
        let label = match v.get("target").and_then(|t| t.as_i64()) {
            Some(1) => Label::Vulnerable,
            Some(0) => Label::Safe,
            _ => {
                return Err(DatasetError::MalformedLine {
                    line: line_no,
                    detail: "missing or non-0/1 'target' field".into(),
                })
            }
        };
        if entries.iter().any(|(e, _, _)| *e == id) {
            return Err(DatasetError::DuplicateId(id));
        }
        entries.push((id, label, func));
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));

    let mut warnings = Vec::new();
    if entries.is_empty() {
        warnings.push(format!("{}: no samples found", jsonl.display()));
    }

    let mut counts = LabelCounts::default();
    let mut samples = Vec::with_capacity(entries.len());
    for (id, label, func) in entries {
        match label {
            Label::Vulnerable => counts.vulnerable += 1,
            Label::Safe => counts.safe += 1,
        }
        let dir = root.join("samples").join(&id);
        std::fs::create_dir_all(&dir).map_err(io_ctx(format!("creating {}", dir.display())))?;
        let source_rel = PathBuf::from("samples").join(&id).join("source.c");
        std::fs::write(root.join(&source_rel), func)
            .map_err(io_ctx(format!("writing {}", source_rel.display())))?;
        samples.push(Sample {
            id,
            label,
            source: source_rel,
            orig: None,
            obf: None,
        });
    }

    if require_balanced && counts.vulnerable != counts.safe {
        return Err(DatasetError::BalanceViolation {
            vulnerable: counts.vulnerable,
            safe: counts.safe,
        });
    }

    let manifest = Manifest {
        provenance: vec![format!("ingested from {}", jsonl.display())],
        require_balanced,
        counts,
        samples,
    };
    write_manifest(&manifest, root)?;
    Ok(IngestOutcome { manifest, warnings })
}

pub fn write_manifest(manifest: &Manifest, root: &Path) -> Result<(), DatasetError> {
    std::fs::create_dir_all(root).map_err(io_ctx(format!("creating {}", root.display())))?;
    let path = root.join("manifest.json");
    std::fs::write(&path, manifest.to_json())
        .map_err(io_ctx(format!("writing {}", path.display())))
}

pub fn load_manifest(root: &Path) -> Result<Manifest, DatasetError> {
    let path = if root.is_dir() {
        root.join("manifest.json")
    } else {
        root.to_path_buf()
    };
    let text =
        std::fs::read_to_string(&path).map_err(io_ctx(format!("reading {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Io {
        context: format!("parsing {}", path.display()),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}

/// Parses `ll_text`, writes it into the sample's directory, and records the
/// path in the manifest (persisted back to disk). On a parse error nothing
/// is written and the manifest is untouched.
pub fn attach_ir(
    manifest: &mut Manifest,
    root: &Path,
    id: &str,
    role: IrRole,
    ll_text: &str,
) -> Result<(), DatasetError> {
    parse_module(ll_text)?;
    let sample = manifest
        .sample_mut(id)
        .ok_or_else(|| DatasetError::UnknownId(id.to_string()))?;
    let file = match role {
        IrRole::Orig => "orig.ll",
        IrRole::Obf => "obf.ll",
    };
    let rel = PathBuf::from("samples").join(id).join(file);
    let abs = root.join(&rel);
    if let Some(dir) = abs.parent() {
        std::fs::create_dir_all(dir).map_err(io_ctx(format!("creating {}", dir.display())))?;
    }
    std::fs::write(&abs, ll_text).map_err(io_ctx(format!("writing {}", abs.display())))?;
    match role {
        IrRole::Orig => sample.orig = Some(rel),
        IrRole::Obf => sample.obf = Some(rel),
    }
    write_manifest(manifest, root)
}

/// Runs a configured external compiler (`{in}`/`{out}` placeholders) to
/// produce `orig.ll` from the sample's C source. The command is split on
/// whitespace and executed directly, never through a shell. The exit status
/// is recorded in the manifest provenance either way.
pub fn compile_external(
    manifest: &mut Manifest,
    root: &Path,
    id: &str,
    command_template: &str,
) -> Result<(), DatasetError> {
    if command_template.trim().is_empty() {
        return Err(DatasetError::ToolMissing);
    }
    let sample = manifest
        .sample(id)
        .ok_or_else(|| DatasetError::UnknownId(id.to_string()))?;
    let input = root.join(&sample.source);
    let out_rel = PathBuf::from("samples").join(id).join("orig.ll");
    let output = root.join(&out_rel);

    let argv: Vec<String> = command_template
        .split_whitespace()
        .map(|tok| {
            tok.replace("{in}", &input.display().to_string())
                .replace("{out}", &output.display().to_string())
        })
        .collect();
    let (program, rest) = argv.split_first().ok_or(DatasetError::ToolMissing)?;

    let result = Command::new(program).args(rest).output();
    match result {
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            manifest
                .provenance
                .push(format!("compile {id}: tool '{program}' not found"));
            write_manifest(manifest, root)?;
            Err(DatasetError::ToolMissing)
        }
        Err(e) => Err(io_ctx(format!("running '{program}'"))(e)),
        Ok(out) => {
            manifest
                .provenance
                .push(format!("compile {id}: {} ({})", out.status, program));
            if out.status.success() {
                manifest.sample_mut(id).unwrap().orig = Some(out_rel);
                write_manifest(manifest, root)?;
                Ok(())
            } else {
                write_manifest(manifest, root)?;
                let mut stderr = String::from_utf8_lossy(&out.stderr).into_owned();
                stderr.truncate(2000);
                Err(DatasetError::ToolFailed {
                    status: out.status.to_string(),
                    stderr,
                })
            }
        }
    }
}

/// Convenience for writing sample artifacts from memory in tests and
/// examples: a minimal one-line JSONL corpus.
pub fn jsonl_line(id: &str, target: u8, func: &str) -> String {
    let mut s = Vec::new();
    let obj = serde_json::json!({ "id": id, "func": func, "target": target });
    writeln!(s, "{obj}").unwrap();
    String::from_utf8(s).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(n_vuln: usize, n_safe: usize) -> String {
        let mut s = String::new();
        for i in 0..n_vuln {
            s.push_str(&jsonl_line(&format!("v{i:03}"), 1, "int f() { return 1; }"));
        }
        for i in 0..n_safe {
            s.push_str(&jsonl_line(&format!("s{i:03}"), 0, "int g() { return 0; }"));
        }
        s
    }

    fn write_corpus(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("corpus.jsonl");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn ingest_counts_and_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let jsonl = write_corpus(tmp.path(), &corpus(20, 20));
        let root = tmp.path().join("ds");
        let out = ingest(&jsonl, &root, true).unwrap();
        assert_eq!(out.manifest.counts.vulnerable, 20);
        assert_eq!(out.manifest.counts.safe, 20);
        assert_eq!(out.manifest.samples.len(), 40);
        assert!(out.warnings.is_empty());
        assert!(root.join("samples/s000/source.c").exists());
        assert!(root.join("manifest.json").exists());
        // Lexicographic order by id.
        let ids: Vec<&str> = out.manifest.samples.iter().map(|s| s.id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn ingest_is_idempotent() {
        let tmp = tempfile::tempdir().unwrap();
        let jsonl = write_corpus(tmp.path(), &corpus(2, 2));
        let root = tmp.path().join("ds");
        ingest(&jsonl, &root, false).unwrap();
        let first = std::fs::read(root.join("manifest.json")).unwrap();
        ingest(&jsonl, &root, false).unwrap();
        let second = std::fs::read(root.join("manifest.json")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn empty_file_warns() {
        let tmp = tempfile::tempdir().unwrap();
        let jsonl = write_corpus(tmp.path(), "");
        let out = ingest(&jsonl, &tmp.path().join("ds"), false).unwrap();
        assert!(out.manifest.samples.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let tmp = tempfile::tempdir().unwrap();
        let text = format!("{}{{\"func\": \"x\"}}\n", jsonl_line("a", 1, "f"));
        let jsonl = write_corpus(tmp.path(), &text);
        let err = ingest(&jsonl, &tmp.path().join("ds"), false).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedLine { line: 2, .. }));
    }

    #[test]
    fn unbalanced_rejected_when_required() {
        let tmp = tempfile::tempdir().unwrap();
        let jsonl = write_corpus(tmp.path(), &corpus(3, 1));
        let err = ingest(&jsonl, &tmp.path().join("ds"), true).unwrap_err();
        assert!(matches!(err, DatasetError::BalanceViolation { .. }));
    }

    #[test]
    fn attach_ir_round_trip_and_unknown_id() {
        let tmp = tempfile::tempdir().unwrap();
        let jsonl = write_corpus(tmp.path(), &corpus(1, 1));
        let root = tmp.path().join("ds");
        let mut manifest = ingest(&jsonl, &root, false).unwrap().manifest;
        let ll = "define i32 @f() {\nentry:\n  ret i32 1\n}\n";
        attach_ir(&mut manifest, &root, "v000", IrRole::Orig, ll).unwrap();
        attach_ir(&mut manifest, &root, "v000", IrRole::Obf, ll).unwrap();
        let s = manifest.sample("v000").unwrap();
        assert!(s.orig.is_some() && s.obf.is_some());
        assert!(matches!(
            attach_ir(&mut manifest, &root, "zz", IrRole::Orig, ll),
            Err(DatasetError::UnknownId(_))
        ));
    }

    #[test]
    fn attach_unparseable_leaves_manifest_untouched() {
        let tmp = tempfile::tempdir().unwrap();
        let jsonl = write_corpus(tmp.path(), &corpus(1, 0));
        let root = tmp.path().join("ds");
        let mut manifest = ingest(&jsonl, &root, false).unwrap().manifest;
        let before = std::fs::read(root.join("manifest.json")).unwrap();
        let err = attach_ir(&mut manifest, &root, "v000", IrRole::Orig, "define bogus");
        assert!(matches!(err, Err(DatasetError::Parse(_))));
        let after = std::fs::read(root.join("manifest.json")).unwrap();
        assert_eq!(before, after);
        assert!(manifest.sample("v000").unwrap().orig.is_none());
        assert!(!root.join("samples/v000/orig.ll").exists());
    }

    #[test]
    fn compile_external_success_failure_and_missing() {
        let tmp = tempfile::tempdir().unwrap();
        let jsonl = write_corpus(tmp.path(), &corpus(1, 0));
        let root = tmp.path().join("ds");
        let mut manifest = ingest(&jsonl, &root, false).unwrap().manifest;

        assert!(matches!(
            compile_external(&mut manifest, &root, "v000", ""),
            Err(DatasetError::ToolMissing)
        ));

        // A stand-in "compiler" that copies a valid .ll into place.
        let fixture = tmp.path().join("fixture.ll");
        std::fs::write(&fixture, "define i32 @f() {\nentry:\n  ret i32 1\n}\n").unwrap();
        let cmd = format!("/bin/cp {} {{out}}", fixture.display());
        compile_external(&mut manifest, &root, "v000", &cmd).unwrap();
        assert!(manifest.sample("v000").unwrap().orig.is_some());
        assert!(root.join("samples/v000/orig.ll").exists());
        assert!(manifest.provenance.iter().any(|p| p.contains("compile v000")));

        let err = compile_external(&mut manifest, &root, "v000", "/bin/false {in} {out}");
        assert!(matches!(err, Err(DatasetError::ToolFailed { .. })));

        let err = compile_external(&mut manifest, &root, "v000", "no-such-tool-anywhere {in}");
        assert!(matches!(err, Err(DatasetError::ToolMissing)));
    }
}

//! Command-line surface: one verb per pipeline stage.
//!
//! Exit codes: 0 success, 1 domain error (message on stderr), 2 usage error.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bench::{
    self, AdapterSpec, BenchOptions, HttpAdapter, HttpConfig, PromptKind, ReplayAdapter,
    StubAdapter,
};
use crate::dataset;
use crate::equiv::{check_equivalence, Verdict as EquivVerdict};
use crate::interp::{run_function, ArgValue, EventArg, ExternPolicy, Outcome, DEFAULT_FUEL};
use crate::ir::{validate, ConstInt, IrType};
use crate::metrics::{self, ReportFormat, ReportRow};
use crate::obf::{run_pipeline, ObfConfig, PassKind};
use crate::text::{parse_module, print_module};

#[derive(Parser)]
#[command(
    name = "camo",
    version,
    about = "Obfuscate a textual LLVM IR subset, verify the transformations, and benchmark model classification"
)]
struct Cli {
    /// TOML config file (defaults to $CAMO_CONFIG when set).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a .ll file and print its canonical form.
    Parse {
        file: PathBuf,
        /// Write to a file instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check IR invariants; lists violations and fails if any.
    Validate { file: PathBuf },
    /// Run a function under the deterministic interpreter (JSON result).
    Interp {
        file: PathBuf,
        /// Function to run.
        #[arg(long = "fn")]
        function: String,
        /// Comma-separated integer arguments.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        args: Vec<i64>,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
    /// Apply obfuscation passes; writes the module and prints a JSON report.
    Obfuscate {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated pass list (sub, bcf, split, flatten), in order.
        #[arg(long, value_delimiter = ',', required = true)]
        passes: Vec<String>,
        /// Obfuscation seed; required so scripted runs are reproducible.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        bcf_probability: f64,
        #[arg(long, default_value_t = 3)]
        split_chunk: usize,
        #[arg(long, default_value_t = 1)]
        subst_rounds: u32,
    },
    /// Differentially test two modules over seeded input vectors.
    Verify {
        original: PathBuf,
        obfuscated: PathBuf,
        /// Check one function (default: every function defined in both).
        #[arg(long = "fn")]
        function: Option<String>,
        #[arg(long, default_value_t = 64)]
        vectors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
    /// Ingest a JSON-Lines corpus into a dataset directory.
    Ingest {
        jsonl: PathBuf,
        /// Dataset root to create.
        #[arg(short, long)]
        out: PathBuf,
        /// Reject corpora whose label counts differ.
        #[arg(long)]
        require_balanced: bool,
        /// Also run the configured external compiler on every sample.
        #[arg(long)]
        compile: bool,
    },
    /// Run the zero-shot benchmark protocol over a dataset.
    Bench {
        /// Dataset root or manifest.json path.
        #[arg(long)]
        dataset: PathBuf,
        /// Adapter: stub:<heuristic>, replay:<dir>, or http (configured).
        #[arg(long)]
        adapter: String,
        #[arg(long)]
        repeats: Option<u32>,
        /// Code representation to evaluate: c, llvm-orig or llvm-obf.
        #[arg(long)]
        kind: String,
        /// Directory that receives runs/<run-id>/.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Defaults to <utc-timestamp>-<seed>.
        #[arg(long)]
        run_id: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        in_flight: Option<usize>,
    },
    /// Compute Table-style metrics for a finished run.
    Report {
        /// Run directory (containing majorities.json).
        #[arg(long)]
        run: PathBuf,
        /// Dataset root or manifest.json path (ground-truth labels).
        #[arg(long)]
        dataset: PathBuf,
        /// md, csv or both.
        #[arg(long, default_value = "both")]
        format: String,
        /// Model column override (defaults to the adapter id).
        #[arg(long)]
        model_label: Option<String>,
    },
}

/// Values from the optional TOML config file.
#[derive(Debug, Default, Clone, serde::Deserialize)]
#[serde(default)]
struct Config {
    compile: CompileConfig,
    adapter: AdapterConfig,
    bench: BenchConfig,
}

#[derive(Debug, Default, Clone, serde::Deserialize)]
#[serde(default)]
struct CompileConfig {
    command: Option<String>,
}

#[derive(Debug, Default, Clone, serde::Deserialize)]
#[serde(default)]
struct AdapterConfig {
    http: Option<HttpConfig>,
}

#[derive(Debug, Default, Clone, serde::Deserialize)]
#[serde(default)]
struct BenchConfig {
    repeats: Option<u32>,
    in_flight: Option<usize>,
}

enum CliError {
    Usage(String),
    Domain(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Domain(e.to_string())
    }
}

/// Entry point used by the `camo` binary.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
    }
}

fn load_config(flag: &Option<PathBuf>) -> Result<Config, CliError> {
    let path = match flag {
        Some(p) => Some(p.clone()),
        None => std::env::var_os("CAMO_CONFIG").map(PathBuf::from),
    };
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))
}

fn read_module(path: &Path) -> Result<crate::ir::IrModule, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    parse_module(&text).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = load_config(&cli.config)?;
    match cli.command {
        Command::Parse { file, output } => {
            let module = read_module(&file)?;
            let text = print_module(&module)?;
            match output {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Validate { file } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| CliError::Domain(format!("{}: {e}", file.display())))?;
            // Parse without the validity gate so violations are listed.
            match parse_module(&text) {
                Ok(module) => {
                    let violations = validate(&module);
                    if violations.is_empty() {
                        println!("OK: {} validates cleanly", file.display());
                        Ok(())
                    } else {
                        for v in &violations {
                            println!("violation: {v}");
                        }
                        Err(CliError::Domain(format!(
                            "{} violation(s) in {}",
                            violations.len(),
                            file.display()
                        )))
                    }
                }
                Err(e) => Err(CliError::Domain(format!("{}: {e}", file.display()))),
            }
        }
        Command::Interp {
            file,
            function,
            args,
            fuel,
        } => {
            let module = read_module(&file)?;
            let f = module
                .function(&function)
                .ok_or_else(|| CliError::Domain(format!("unknown function '@{function}'")))?;
            let mut argv = Vec::new();
            for (value, param) in args.iter().zip(&f.params) {
                match &param.ty {
                    IrType::Int(w) => argv.push(ArgValue::Int(ConstInt::new(*w, *value))),
                    other => {
                        return Err(CliError::Domain(format!(
                            "parameter type '{other}' is not supported by `interp` (integers only)"
                        )))
                    }
                }
            }
            if argv.len() != f.params.len() {
                return Err(CliError::Domain(format!(
                    "@{function} takes {} arguments, {} given",
                    f.params.len(),
                    argv.len()
                )));
            }
            let result = run_function(&module, &function, &argv, fuel, &ExternPolicy::default())?;
            println!("{:#}", exec_result_json(&result));
            Ok(())
        }
        Command::Obfuscate {
            input,
            output,
            passes,
            seed,
            bcf_probability,
            split_chunk,
            subst_rounds,
        } => {
            let module = read_module(&input)?;
            let mut pass_list = Vec::new();
            for p in &passes {
                pass_list.push(PassKind::from_str(p).map_err(CliError::Usage)?);
            }
            let cfg = ObfConfig {
                seed,
                bcf_probability,
                split_chunk,
                subst_rounds,
                passes: pass_list,
            };
            let (out_module, report) = run_pipeline(&module, &cfg)?;
            let text = print_module(&out_module)?;
            std::fs::write(&output, text)
                .map_err(|e| CliError::Domain(format!("{}: {e}", output.display())))?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Verify {
            original,
            obfuscated,
            function,
            vectors,
            seed,
            fuel,
        } => {
            let orig = read_module(&original)?;
            let obf = read_module(&obfuscated)?;
            let functions: Vec<String> = match function {
                Some(f) => vec![f],
                None => orig
                    .definitions()
                    .filter(|f| obf.function(&f.name).is_some_and(|g| !g.is_declaration))
                    .map(|f| f.name.clone())
                    .collect(),
            };
            if functions.is_empty() {
                return Err(CliError::Domain(
                    "no function is defined in both modules".into(),
                ));
            }
            let mut all_equivalent = true;
            for name in &functions {
                let report = check_equivalence(&orig, &obf, name, vectors, seed, fuel)?;
                match &report.verdict {
                    EquivVerdict::Equivalent => {
                        println!("@{name}: Equivalent ({} vectors)", report.vectors_run);
                    }
                    EquivVerdict::Diverged {
                        vector_index,
                        original,
                        obfuscated,
                        ..
                    } => {
                        all_equivalent = false;
                        println!(
                            "@{name}: Diverged at vector {vector_index}: original {:?} vs obfuscated {:?}",
                            original.outcome, obfuscated.outcome
                        );
                    }
                    EquivVerdict::Inconclusive { reason } => {
                        all_equivalent = false;
                        println!("@{name}: Inconclusive ({reason})");
                    }
                }
            }
            if all_equivalent {
                Ok(())
            } else {
                Err(CliError::Domain("verification failed".into()))
            }
        }
        Command::Ingest {
            jsonl,
            out,
            require_balanced,
            compile,
        } => {
            let outcome = dataset::ingest(&jsonl, &out, require_balanced)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let mut manifest = outcome.manifest;
            if compile {
                let command = std::env::var("CAMO_COMPILE_COMMAND")
                    .ok()
                    .or_else(|| config.compile.command.clone())
                    .ok_or(dataset::DatasetError::ToolMissing)?;
                let ids: Vec<String> = manifest.samples.iter().map(|s| s.id.clone()).collect();
                for id in ids {
                    dataset::compile_external(&mut manifest, &out, &id, &command)?;
                }
            }
            println!(
                "ingested {} samples ({} vulnerable, {} safe) into {}",
                manifest.samples.len(),
                manifest.counts.vulnerable,
                manifest.counts.safe,
                out.display()
            );
            Ok(())
        }
        Command::Bench {
            dataset: dataset_path,
            adapter,
            repeats,
            kind,
            out,
            run_id,
            seed,
            in_flight,
        } => {
            let kind = PromptKind::from_str(&kind).map_err(CliError::Usage)?;
            let spec = AdapterSpec::from_str(&adapter).map_err(CliError::Usage)?;
            let adapter: Box<dyn bench::Adapter> = match spec {
                AdapterSpec::Stub { heuristic } => Box::new(StubAdapter::new(&heuristic)?),
                AdapterSpec::Replay { dir } => Box::new(ReplayAdapter::new(dir)),
                AdapterSpec::Http => {
                    let http = config.adapter.http.clone().ok_or_else(|| {
                        CliError::Usage(
                            "the http adapter needs an [adapter.http] section in the config file"
                                .into(),
                        )
                    })?;
                    Box::new(HttpAdapter::new(http)?)
                }
            };
            let root = dataset_root(&dataset_path);
            let manifest = dataset::load_manifest(&dataset_path)?;
            // Env beats flags beats config file.
            let repeats = env_u32("CAMO_REPEATS")
                .or(repeats)
                .or(config.bench.repeats)
                .unwrap_or(3);
            let in_flight = env_u32("CAMO_IN_FLIGHT")
                .map(|v| v as usize)
                .or(in_flight)
                .or(config.bench.in_flight)
                .unwrap_or(2);
            let run_id = match run_id {
                Some(id) => {
                    if out.join(&id).exists() {
                        return Err(CliError::Domain(format!(
                            "run id '{id}' already exists under {}",
                            out.display()
                        )));
                    }
                    id
                }
                None => unique_run_id(&out, seed),
            };
            let opts = BenchOptions {
                repeats,
                in_flight,
                run_id,
                seed,
            };
            let run = bench::run_bench(&manifest, &root, kind, adapter.as_ref(), &opts, &out)?;
            println!(
                "run {}: {} samples x {} trials, {} inconclusive -> {}",
                opts.run_id,
                manifest.samples.len(),
                opts.repeats,
                run.inconclusive,
                run.dir.display()
            );
            Ok(())
        }
        Command::Report {
            run,
            dataset: dataset_path,
            format,
            model_label,
        } => {
            let manifest = dataset::load_manifest(&dataset_path)?;
            let majorities = bench::load_majorities(&run)?;
            if majorities.is_empty() {
                return Err(CliError::Domain("run has no majority results".into()));
            }
            let mut rows = Vec::new();
            let mut tallies = Vec::new();
            for ((adapter_id, kind), group) in bench::group_for_report(&majorities) {
                let owned: Vec<_> = group.into_iter().cloned().collect();
                let tally = metrics::tally(&owned, &manifest)?;
                for w in &tally.warnings {
                    eprintln!("warning: {w}");
                }
                let row = ReportRow {
                    model: model_label.clone().unwrap_or(adapter_id),
                    obfuscation: kind.obfuscation_phase().to_string(),
                    metrics: metrics::compute(&tally.matrix),
                };
                rows.push(row);
                tallies.push(tally);
            }
            let md = metrics::emit_report(&rows, ReportFormat::Markdown)?;
            let csv = metrics::emit_report(&rows, ReportFormat::Csv)?;
            let io_err = |e: std::io::Error| CliError::Domain(format!("write failed: {e}"));
            match format.as_str() {
                "md" => std::fs::write(run.join("report.md"), &md).map_err(io_err)?,
                "csv" => std::fs::write(run.join("report.csv"), &csv).map_err(io_err)?,
                "both" => {
                    std::fs::write(run.join("report.md"), &md).map_err(io_err)?;
                    std::fs::write(run.join("report.csv"), &csv).map_err(io_err)?;
                }
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown format '{other}' (expected md, csv or both)"
                    )))
                }
            }
            let full = serde_json::json!({
                "rows": rows
                    .iter()
                    .zip(&tallies)
                    .map(|(row, tally)| {
                        serde_json::json!({
                            "model": row.model,
                            "obfuscation": row.obfuscation,
                            "matrix": tally.matrix,
                            "inconclusive": tally.inconclusive,
                            "metrics": row.metrics,
                        })
                    })
                    .collect::<Vec<_>>(),
            });
            std::fs::write(run.join("metrics.json"), format!("{full:#}\n"))
                .map_err(io_err)?;
            print!("{md}");
            Ok(())
        }
    }
}

fn env_u32(name: &str) -> Option<u32> {
    std::env::var(name).ok().and_then(|v| v.parse().ok())
}

fn dataset_root(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.to_path_buf()
    } else {
        path.parent().unwrap_or(Path::new(".")).to_path_buf()
    }
}

fn unique_run_id(out: &Path, seed: u64) -> String {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{stamp}-{seed}");
    if !out.join(&base).exists() {
        return base;
    }
    let mut n = 2;
    loop {
        let candidate = format!("{base}-{n}");
        if !out.join(&candidate).exists() {
            return candidate;
        }
        n += 1;
    }
}

fn exec_result_json(r: &crate::interp::ExecResult) -> serde_json::Value {
    let outcome = match &r.outcome {
        Outcome::Returned(None) => serde_json::json!({ "returned": null }),
        Outcome::Returned(Some(v)) => serde_json::json!({ "returned": v.to_string() }),
        Outcome::Trapped(t) => serde_json::json!({ "trapped": t.to_string() }),
        Outcome::OutOfFuel => serde_json::json!("out-of-fuel"),
    };
    let events: Vec<serde_json::Value> = r
        .events
        .iter()
        .map(|e| {
            serde_json::json!({
                "callee": e.callee,
                "args": e
                    .args
                    .iter()
                    .map(|a| match a {
                        EventArg::Int(c) => serde_json::json!(c.value()),
                        EventArg::Str(s) => serde_json::json!(s),
                    })
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::json!({
        "outcome": outcome,
        "steps": r.steps,
        "events": events,
        "block_hits": r.block_hits,
    })
}

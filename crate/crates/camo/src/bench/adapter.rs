//! Model adapters: a live chat-completion client, a replay adapter over
//! recorded responses, and deterministic stubs for end-to-end testing.

use std::path::PathBuf;
use std::time::Duration;

use super::TrialKey;

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("adapter unavailable: {0}")]
    Unavailable(String),
}

/// A model backend answering one history-free prompt at a time.
///
/// The fresh-session contract lives here: `complete` receives the prompt and
/// the trial key and nothing else, so no implementation can smuggle earlier
/// trials into a request.
pub trait Adapter: Send + Sync {
    /// Stable identifier recorded in trial records and reports.
    fn id(&self) -> String;

    fn complete(&self, prompt: &str, key: &TrialKey) -> Result<String, AdapterError>;

    /// Offline adapters get fixed timestamps/latencies so runs are
    /// byte-identical.
    fn offline(&self) -> bool {
        false
    }
}

/// Parsed `--adapter` specification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdapterSpec {
    Stub { heuristic: String },
    Replay { dir: PathBuf },
    Http,
}

impl std::str::FromStr for AdapterSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(h) = s.strip_prefix("stub:") {
            return Ok(AdapterSpec::Stub {
                heuristic: h.to_string(),
            });
        }
        if s == "stub" {
            return Ok(AdapterSpec::Stub {
                heuristic: "keyword".into(),
            });
        }
        if let Some(dir) = s.strip_prefix("replay:") {
            return Ok(AdapterSpec::Replay {
                dir: PathBuf::from(dir),
            });
        }
        if s == "http" {
            return Ok(AdapterSpec::Http);
        }
        Err(format!(
            "unknown adapter '{s}' (expected stub:<heuristic>, replay:<dir> or http)"
        ))
    }
}

// ---- stub ------------------------------------------------------------------

/// Keyword set the `stub:keyword` heuristic flags. These show up verbatim in
/// C sources and as `@callee` names in IR, which is all the determinism the
/// test harness needs; this is explicitly not a detector.
const RISKY_KEYWORDS: &[&str] = &[
    "strcpy", "strcat", "sprintf", "gets", "memcpy", "alloca", "system", "exec", "scanf",
];

/// Deterministic fake model for end-to-end tests.
#[derive(Debug, Clone)]
pub struct StubAdapter {
    heuristic: String,
}

impl StubAdapter {
    pub fn new(heuristic: &str) -> Result<StubAdapter, AdapterError> {
        match heuristic {
            "keyword" | "always-secure" | "always-insecure" => Ok(StubAdapter {
                heuristic: heuristic.to_string(),
            }),
            other => Err(AdapterError::Unavailable(format!(
                "unknown stub heuristic '{other}'"
            ))),
        }
    }
}

impl Adapter for StubAdapter {
    fn id(&self) -> String {
        format!("stub:{}", self.heuristic)
    }

    fn complete(&self, prompt: &str, _key: &TrialKey) -> Result<String, AdapterError> {
        let code = prompt.rsplit("\nCode:\n").next().unwrap_or(prompt);
        let answer = match self.heuristic.as_str() {
            "always-secure" => "Yes, the code is secure.".to_string(),
            "always-insecure" => {
                "No, the code is insecure because it was flagged by policy.".to_string()
            }
            _ => match RISKY_KEYWORDS.iter().find(|kw| code.contains(**kw)) {
                Some(kw) => format!(
                    "No, the code is insecure because it uses {kw} without bounds checking."
                ),
                None => "Yes, the code is secure.".to_string(),
            },
        };
        Ok(answer)
    }

    fn offline(&self) -> bool {
        true
    }
}

// ---- replay ----------------------------------------------------------------

/// Replays recorded responses from `<dir>/<sample>__<kind>__<trial>.txt`.
///
/// The lookup key is the trial identity alone; the prompt text is unused,
/// which makes the fresh-session property checkable byte-for-byte.
#[derive(Debug, Clone)]
pub struct ReplayAdapter {
    dir: PathBuf,
}

impl ReplayAdapter {
    pub fn new(dir: PathBuf) -> ReplayAdapter {
        ReplayAdapter { dir }
    }

    pub fn response_file(dir: &std::path::Path, key: &TrialKey) -> PathBuf {
        dir.join(format!(
            "{}__{}__{}.txt",
            key.sample_id,
            key.kind.slug(),
            key.trial
        ))
    }
}

impl Adapter for ReplayAdapter {
    fn id(&self) -> String {
        "replay".to_string()
    }

    fn complete(&self, _prompt: &str, key: &TrialKey) -> Result<String, AdapterError> {
        let path = Self::response_file(&self.dir, key);
        std::fs::read_to_string(&path)
            .map_err(|e| AdapterError::Unavailable(format!("{}: {e}", path.display())))
    }

    fn offline(&self) -> bool {
        true
    }
}

// ---- http ------------------------------------------------------------------

/// Connection settings for a generic chat-completion endpoint.
#[derive(Debug, Clone, serde::Deserialize)]
pub struct HttpConfig {
    /// Full endpoint URL, e.g. `https://api.openai.com/v1/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token. The token
    /// itself is never stored in configuration.
    pub auth_env: String,
    /// Absent means provider default.
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    120
}

/// Live chat-completion client with exponential backoff on transport errors
/// and retryable statuses (429, 5xx).
pub struct HttpAdapter {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpAdapter {
    pub fn new(cfg: HttpConfig) -> Result<HttpAdapter, AdapterError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| AdapterError::Unavailable(e.to_string()))?;
        Ok(HttpAdapter { cfg, client })
    }

    /// The complete request payload for one trial. Contains the prompt as
    /// the single user message and no conversation history.
    pub fn request_body(cfg: &HttpConfig, prompt: &str) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": cfg.model,
            "messages": [{ "role": "user", "content": prompt }],
        });
        if let Some(t) = cfg.temperature {
            body["temperature"] = serde_json::json!(t);
        }
        body
    }
}

const BACKOFF_MS: [u64; 3] = [500, 1000, 2000];

impl Adapter for HttpAdapter {
    fn id(&self) -> String {
        format!("http:{}", self.cfg.model)
    }

    fn complete(&self, prompt: &str, _key: &TrialKey) -> Result<String, AdapterError> {
        let token = std::env::var(&self.cfg.auth_env).map_err(|_| {
            AdapterError::Unavailable(format!(
                "environment variable '{}' is not set",
                self.cfg.auth_env
            ))
        })?;
        let body = Self::request_body(&self.cfg, prompt);

        let mut last_err = String::new();
        for (attempt, backoff) in BACKOFF_MS.iter().enumerate() {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(*backoff));
            }
            let response = self
                .client
                .post(&self.cfg.base_url)
                .bearer_auth(&token)
                .json(&body)
                .send();
            match response {
                Err(e) => last_err = e.to_string(),
                Ok(resp) => {
                    let status = resp.status();
                    if status.as_u16() == 429 || status.is_server_error() {
                        last_err = format!("retryable status {status}");
                        continue;
                    }
                    if !status.is_success() {
                        let text = resp.text().unwrap_or_default();
                        return Err(AdapterError::Unavailable(format!(
                            "status {status}: {text}"
                        )));
                    }
                    let v: serde_json::Value = resp
                        .json()
                        .map_err(|e| AdapterError::Unavailable(e.to_string()))?;
                    let content = v["choices"][0]["message"]["content"]
                        .as_str()
                        .ok_or_else(|| {
                            AdapterError::Unavailable("response has no message content".into())
                        })?;
                    return Ok(content.to_string());
                }
            }
        }
        Err(AdapterError::Unavailable(last_err))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::PromptKind;

    fn key(trial: u32) -> TrialKey<'static> {
        TrialKey {
            sample_id: "s001",
            kind: PromptKind::LlvmObf,
            trial,
        }
    }

    #[test]
    fn adapter_spec_parses() {
        assert_eq!(
            "stub:keyword".parse::<AdapterSpec>().unwrap(),
            AdapterSpec::Stub { heuristic: "keyword".into() }
        );
        assert!(matches!(
            "replay:some/dir".parse::<AdapterSpec>().unwrap(),
            AdapterSpec::Replay { .. }
        ));
        assert_eq!("http".parse::<AdapterSpec>().unwrap(), AdapterSpec::Http);
        assert!("carrier-pigeon".parse::<AdapterSpec>().is_err());
    }

    #[test]
    fn stub_keyword_flags_risky_calls() {
        let stub = StubAdapter::new("keyword").unwrap();
        let insecure = stub
            .complete("...\nCode:\n  call i32 @strcpy(ptr %d, ptr %s)\n", &key(1))
            .unwrap();
        assert!(insecure.starts_with("No, the code is insecure because"));
        let secure = stub.complete("...\nCode:\n  ret i32 0\n", &key(1)).unwrap();
        assert_eq!(secure, "Yes, the code is secure.");
    }

    #[test]
    fn replay_reads_by_key_only() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::write(
            tmp.path().join("s001__llvm-obf__2.txt"),
            "Yes, the code is secure.",
        )
        .unwrap();
        let replay = ReplayAdapter::new(tmp.path().to_path_buf());
        let got = replay.complete("whatever prompt", &key(2)).unwrap();
        assert_eq!(got, "Yes, the code is secure.");
        assert!(replay.complete("whatever", &key(3)).is_err());
    }

    #[test]
    fn http_request_carries_only_the_prompt() {
        let cfg = HttpConfig {
            base_url: "https://example.invalid/v1/chat/completions".into(),
            model: "test-model".into(),
            auth_env: "NO_SUCH_VAR".into(),
            temperature: None,
            timeout_secs: 1,
        };
        let body = HttpAdapter::request_body(&cfg, "THE PROMPT");
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
        assert_eq!(body["messages"][0]["content"], "THE PROMPT");
        assert!(body.get("history").is_none());
        // No auth env var set: unavailable before any network traffic.
        let adapter = HttpAdapter::new(cfg).unwrap();
        assert!(matches!(
            adapter.complete("x", &key(1)),
            Err(AdapterError::Unavailable(_))
        ));
    }
}

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Chat-completion style endpoint. Header values may contain `{credential}`,
/// replaced by the value of the `credential_env` variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default)]
    pub temperature: Option<f64>,
    /// Allow several requests to this URL at once.
    #[serde(default)]
    pub allow_concurrent: bool,
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    2
}

fn default_backoff() -> u64 {
    500
}

impl EndpointConfig {
    pub fn new(url: &str, model: &str) -> Self {
        EndpointConfig {
            url: url.to_string(),
            model: model.to_string(),
            headers: BTreeMap::new(),
            credential_env: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            temperature: None,
            allow_concurrent: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        serde_json::from_str(text).map_err(|e| LlmError::Config(format!("endpoint config: {e}")))
    }

    fn resolved_headers(&self) -> Result<Vec<(String, String)>, LlmError> {
        let credential = match &self.credential_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                LlmError::Config(format!("credential environment variable `{var}` is not set"))
            })?),
            None => None,
        };
        let mut headers: Vec<(String, String)> = self
            .headers
            .iter()
            .map(|(k, v)| {
                let v = match &credential {
                    Some(c) => v.replace("{credential}", c),
                    None => v.clone(),
                };
                (k.clone(), v)
            })
            .collect();
        if let (Some(c), true) = (&credential, self.headers.is_empty()) {
            headers.push(("Authorization".into(), format!("Bearer {c}")));
        }
        Ok(headers)
    }

    fn request_body(&self, prompt: &str) -> String {
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Some(t) = self.temperature {
            body["temperature"] = serde_json::json!(t);
        }
        body.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("gave up after {attempts} attempts; last failure: {last}")]
    RetryExhausted { attempts: u32, last: String },
    #[error("cannot write transcript: {0}")]
    Transcript(String),
}

fn endpoint_lock(url: &str) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<String, Arc<Mutex<()>>>>> = OnceLock::new();
    let mut map = LOCKS.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    map.entry(url.to_string()).or_default().clone()
}

/// Sends the prompt and returns the model's text: the first choice's message
/// content when the reply has chat-completion shape, the raw body otherwise.
pub fn llm_fetch(prompt: &str, cfg: &EndpointConfig) -> Result<String, LlmError> {
    fetch(prompt, cfg, &mut Vec::new())
}

/// Like [`llm_fetch`], also writing a transcript file into `dir`; returns
/// the transcript path alongside the text. Failed exchanges are logged too.
pub fn llm_fetch_logged(prompt: &str, cfg: &EndpointConfig, dir: &Path) -> Result<(String, PathBuf), LlmError> {
    let mut log = Vec::new();
    let result = fetch(prompt, cfg, &mut log);
    let path = write_transcript(dir, cfg, prompt, &log, &result)?;
    result.map(|text| (text, path))
}

fn fetch(prompt: &str, cfg: &EndpointConfig, log: &mut Vec<String>) -> Result<String, LlmError> {
    let headers = cfg.resolved_headers()?;
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build()
        .map_err(|e| LlmError::Config(e.to_string()))?;
    let body = cfg.request_body(prompt);
    let lock = endpoint_lock(&cfg.url);
    let _guard = (!cfg.allow_concurrent).then(|| lock.lock().unwrap_or_else(|e| e.into_inner()));

    let attempts = cfg.max_retries + 1;
    let mut last = String::new();
    for attempt in 1..=attempts {
        if attempt > 1 {
            std::thread::sleep(Duration::from_millis(cfg.backoff_ms.saturating_mul(1 << (attempt - 2).min(16))));
        }
        let mut req = client.post(&cfg.url).header("Content-Type", "application/json").body(body.clone());
        for (k, v) in &headers {
            req = req.header(k.as_str(), v.as_str());
        }
        match req.send() {
            Err(e) => {
                last = format!("network error: {e}");
                log.push(format!("attempt {attempt}: {last}"));
                log::warn!("llm request attempt {attempt} failed: {e}");
            }
            Ok(resp) => {
                let status = resp.status().as_u16();
                let text = resp.text().map_err(|e| LlmError::Network(e.to_string()))?;
                log.push(format!("attempt {attempt}: status {status}\n{text}"));
                if (200..300).contains(&status) {
                    return Ok(response_text(&text));
                }
                last = format!("status {status}");
                if status != 429 && status < 500 {
                    return Err(LlmError::Status { status, body: text });
                }
                log::warn!("llm request attempt {attempt} returned {status}");
            }
        }
    }
    if attempts == 1 && last.starts_with("network") {
        return Err(LlmError::Network(last));
    }
    Err(LlmError::RetryExhausted { attempts, last })
}

fn response_text(body: &str) -> String {
    serde_json::from_str::<serde_json::Value>(body)
        .ok()
        .and_then(|v| v.pointer("/choices/0/message/content").and_then(|c| c.as_str()).map(str::to_string))
        .unwrap_or_else(|| body.to_string())
}

fn write_transcript(
    dir: &Path,
    cfg: &EndpointConfig,
    prompt: &str,
    log: &[String],
    result: &Result<String, LlmError>,
) -> Result<PathBuf, LlmError> {
    let err = |e: std::io::Error| LlmError::Transcript(e.to_string());
    std::fs::create_dir_all(dir).map_err(err)?;
    let mut k = 1;
    let path = loop {
        let candidate = dir.join(format!("transcript-{k:03}.txt"));
        if !candidate.exists() {
            break candidate;
        }
        k += 1;
    };
    let mut text = format!("endpoint: {}\nmodel: {}\n\n--- prompt\n{prompt}\n", cfg.url, cfg.model);
    for entry in log {
        text.push_str(&format!("\n--- {entry}\n"));
    }
    match result {
        Ok(reply) => text.push_str(&format!("\n--- reply\n{reply}\n")),
        Err(e) => text.push_str(&format!("\n--- error\n{e}\n")),
    }
    std::fs::write(&path, text).map_err(err)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves the canned `(status, body)` replies, one per connection, and
    /// returns the received request bodies.
    fn stub(replies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut req = vec![0; len];
                reader.read_exact(&mut req).unwrap();
                seen.push(String::from_utf8(req).unwrap());
                let mut stream = stream;
                write!(stream, "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len())
                    .unwrap();
            }
            seen
        });
        (url, handle)
    }

    fn fast(url: &str) -> EndpointConfig {
        let mut cfg = EndpointConfig::new(url, "test-model");
        cfg.backoff_ms = 1;
        cfg.timeout_secs = 10;
        cfg
    }

    #[test]
    fn raw_reply_returned_verbatim() {
        let (url, h) = stub(vec![(200, "[[1,2,3]]".into())]);
        assert_eq!(llm_fetch("prompt text", &fast(&url)).unwrap(), "[[1,2,3]]");
        let bodies = h.join().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
        assert_eq!(sent["messages"][0]["content"], "prompt text");
        assert_eq!(sent["model"], "test-model");
    }

    #[test]
    fn chat_shape_is_unwrapped() {
        let reply = r#"{"choices":[{"message":{"role":"assistant","content":"(1, 2, 3)"}}]}"#;
        let (url, h) = stub(vec![(200, reply.into())]);
        assert_eq!(llm_fetch("p", &fast(&url)).unwrap(), "(1, 2, 3)");
        h.join().unwrap();
    }

    #[test]
    fn server_errors_exhaust_retries() {
        let (url, h) = stub(vec![(500, "a".into()), (500, "b".into()), (500, "c".into())]);
        let err = llm_fetch("p", &fast(&url)).unwrap_err();
        assert_eq!(err, LlmError::RetryExhausted { attempts: 3, last: "status 500".into() });
        assert_eq!(h.join().unwrap().len(), 3);
    }

    #[test]
    fn retry_then_success_and_client_errors() {
        let (url, h) = stub(vec![(503, "busy".into()), (200, "ok".into())]);
        assert_eq!(llm_fetch("p", &fast(&url)).unwrap(), "ok");
        h.join().unwrap();

        let (url, h) = stub(vec![(401, "denied".into())]);
        assert_eq!(llm_fetch("p", &fast(&url)).unwrap_err(), LlmError::Status { status: 401, body: "denied".into() });
        h.join().unwrap();
    }

    #[test]
    fn missing_credential_fails_before_network() {
        let mut cfg = fast("http://127.0.0.1:9/unused");
        cfg.credential_env = Some("BVMT_TEST_SURELY_UNSET_CREDENTIAL".into());
        assert!(matches!(llm_fetch("p", &cfg), Err(LlmError::Config(_))));
    }

    #[test]
    fn unreachable_endpoint_is_a_network_failure() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        let mut cfg = fast(&url);
        cfg.max_retries = 0;
        assert!(matches!(llm_fetch("p", &cfg), Err(LlmError::Network(_))));
    }

    #[test]
    fn transcript_is_written() {
        let dir = std::env::temp_dir().join(format!("bvmt-transcript-{}", std::process::id()));
        let (url, h) = stub(vec![(200, "[[4,5,6]]".into())]);
        let (text, path) = llm_fetch_logged("the prompt", &fast(&url), &dir).unwrap();
        h.join().unwrap();
        assert_eq!(text, "[[4,5,6]]");
        let log = std::fs::read_to_string(&path).unwrap();
        assert!(log.contains("the prompt") && log.contains("status 200") && log.contains("[[4,5,6]]"));
        std::fs::remove_dir_all(dir).unwrap();
    }
}

//! Chat-completions HTTP backend.
//!
//! Speaks the widely implemented chat-completions schema: POST
//! `{base}/chat/completions` with `{model, messages[{role, content}],
//! temperature, max_tokens}`, answer read from
//! `choices[0].message.content`. Credentials and endpoint come from the
//! environment so binaries and configs never embed secrets.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use crate::error::{Error, Result};

use super::{CompletionBackend, CompletionRequest};

/// Environment variable holding the bearer token.
pub const ENV_API_KEY: &str = "FM_API_KEY";
/// Environment variable holding the API base URL.
pub const ENV_BASE_URL: &str = "FM_BASE_URL";
/// Environment variable holding the default model name.
pub const ENV_MODEL: &str = "FM_MODEL";

/// Default model name from the environment.
pub fn model_from_env() -> Result<String> {
    std::env::var(ENV_MODEL).map_err(|_| Error::Config(format!("{ENV_MODEL} is not set")))
}

/// Number of silent retries after a failed first attempt.
const RETRIES: u32 = 3;

enum Attempt {
    Done(String),
    /// Transient: network failure or non-success status.
    Retry(String),
    /// Permanent: the server answered, but not in the expected shape.
    Fatal(Error),
}

/// HTTP chat-completions backend with bounded exponential-backoff retries
/// (three retries, sleeping 1s, 2s, 4s). Transport failures and non-success
/// statuses retry; a malformed response body does not, since resending the
/// same bytes will not fix it.
pub struct HttpBackend {
    base_url: String,
    api_key: String,
    client: reqwest::blocking::Client,
    sleep: Box<dyn Fn(Duration) + Send + Sync>,
    calls: AtomicU64,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        HttpBackend {
            base_url: base_url.into(),
            api_key: api_key.into(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("client builds"),
            sleep: Box::new(std::thread::sleep),
            calls: AtomicU64::new(0),
        }
    }

    /// Read endpoint and credentials from [`ENV_BASE_URL`] and
    /// [`ENV_API_KEY`].
    pub fn from_env() -> Result<Self> {
        let base_url = std::env::var(ENV_BASE_URL)
            .map_err(|_| Error::Config(format!("{ENV_BASE_URL} is not set")))?;
        let api_key = std::env::var(ENV_API_KEY)
            .map_err(|_| Error::Config(format!("{ENV_API_KEY} is not set")))?;
        Ok(HttpBackend::new(base_url, api_key))
    }

    /// Replace the between-retries sleep — tests record the requested
    /// durations instead of waiting them out.
    pub fn with_sleep(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, request: &CompletionRequest) -> Attempt {
        let mut messages = Vec::new();
        if let Some(system) = &request.system_text {
            messages.push(serde_json::json!({"role": "system", "content": system}));
        }
        messages.push(serde_json::json!({"role": "user", "content": request.user_text}));
        let body = serde_json::json!({
            "model": request.model_name,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });

        let sent = self
            .client
            .post(self.endpoint())
            .header("Authorization", format!("Bearer {}", self.api_key))
            .json(&body)
            .send();
        let response = match sent {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("network failure: {e}")),
        };
        let status = response.status();
        if !status.is_success() {
            return Attempt::Retry(format!("status {status}"));
        }
        let parsed: serde_json::Value = match response.json() {
            Ok(v) => v,
            Err(e) => {
                return Attempt::Fatal(Error::Protocol(format!("response body is not valid JSON: {e}")))
            }
        };
        match parsed["choices"][0]["message"]["content"].as_str() {
            Some(text) => Attempt::Done(text.to_string()),
            None => Attempt::Fatal(Error::Protocol(
                "response body lacks choices[0].message.content".into(),
            )),
        }
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut last = String::new();
        for attempt in 0..=RETRIES {
            if attempt > 0 {
                (self.sleep)(Duration::from_secs(1 << (attempt - 1)));
            }
            match self.attempt(request) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retry(why) => last = why,
                Attempt::Fatal(err) => return Err(err),
            }
        }
        Err(Error::Transport(format!(
            "request failed after {} attempts: {last}",
            RETRIES + 1
        )))
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};

    use super::*;

    /// Serve `responses` in order on a loopback port, one connection each,
    /// recording every request's full text.
    fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let seen_in_thread = seen.clone();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = match listener.accept() {
                    Ok(pair) => pair,
                    Err(_) => return,
                };
                let mut raw = Vec::new();
                let mut buf = [0u8; 4096];
                // Read headers, then exactly content-length body bytes.
                let body_len = loop {
                    let n = stream.read(&mut buf).unwrap();
                    raw.extend_from_slice(&buf[..n]);
                    if let Some(pos) = raw.windows(4).position(|w| w == b"\r\n\r\n") {
                        let headers = String::from_utf8_lossy(&raw[..pos]).to_string();
                        let len = headers
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:")
                                .map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        let have = raw.len() - (pos + 4);
                        break len.saturating_sub(have);
                    }
                };
                let mut rest = vec![0u8; body_len];
                if body_len > 0 {
                    stream.read_exact(&mut rest).unwrap();
                    raw.extend_from_slice(&rest);
                }
                seen_in_thread.lock().unwrap().push(String::from_utf8_lossy(&raw).to_string());
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        (base, seen)
    }

    fn ok_body(text: &str) -> String {
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]})
            .to_string()
    }

    fn request() -> CompletionRequest {
        CompletionRequest::new("test-model", "hello").with_system("be brief")
    }

    #[test]
    fn successful_call_returns_the_message_content() {
        let (base, seen) = serve(vec![(200, ok_body("hi there"))]);
        let backend = HttpBackend::new(base, "secret-key");
        assert_eq!(backend.complete(&request()).unwrap(), "hi there");
        let raw = seen.lock().unwrap()[0].clone();
        assert!(raw.starts_with("POST /chat/completions"), "{raw}");
        assert!(raw.contains("Bearer secret-key"), "{raw}");
        assert!(raw.contains("\"model\":\"test-model\""), "{raw}");
        assert!(raw.contains("\"role\":\"system\""), "{raw}");
        assert!(raw.contains("\"role\":\"user\""), "{raw}");
        assert!(raw.contains("\"max_tokens\":2048"), "{raw}");
    }

    #[test]
    fn transient_failures_retry_with_exponential_backoff() {
        let (base, seen) = serve(vec![
            (500, "{}".into()),
            (503, "{}".into()),
            (200, ok_body("finally")),
        ]);
        let sleeps = Arc::new(Mutex::new(Vec::new()));
        let sleeps_rec = sleeps.clone();
        let backend = HttpBackend::new(base, "k")
            .with_sleep(move |d| sleeps_rec.lock().unwrap().push(d));
        assert_eq!(backend.complete(&request()).unwrap(), "finally");
        assert_eq!(seen.lock().unwrap().len(), 3);
        assert_eq!(
            *sleeps.lock().unwrap(),
            vec![Duration::from_secs(1), Duration::from_secs(2)]
        );
    }

    #[test]
    fn persistent_failures_exhaust_retries() {
        let (base, seen) = serve(vec![(500, "{}".into()); 4]);
        let sleeps = Arc::new(Mutex::new(Vec::new()));
        let sleeps_rec = sleeps.clone();
        let backend =
            HttpBackend::new(base, "k").with_sleep(move |d| sleeps_rec.lock().unwrap().push(d));
        let err = backend.complete(&request()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("after 4 attempts"), "{err}");
        assert_eq!(seen.lock().unwrap().len(), 4);
        assert_eq!(
            *sleeps.lock().unwrap(),
            vec![Duration::from_secs(1), Duration::from_secs(2), Duration::from_secs(4)]
        );
    }

    #[test]
    fn malformed_body_fails_without_retrying() {
        let (base, seen) = serve(vec![(200, "{\"nope\": true}".into())]);
        let backend = HttpBackend::new(base, "k")
            .with_sleep(|_| panic!("malformed body must not trigger a retry"));
        let err = backend.complete(&request()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("choices[0]"), "{err}");
        assert_eq!(seen.lock().unwrap().len(), 1);
    }

    #[test]
    fn from_env_requires_both_endpoint_and_key() {
        // Env access is process-global; this is the only test touching these
        // variables, so set/remove here cannot race another test.
        std::env::remove_var(ENV_BASE_URL);
        std::env::remove_var(ENV_API_KEY);
        assert!(HttpBackend::from_env().is_err());
        std::env::set_var(ENV_BASE_URL, "http://localhost:1");
        assert!(HttpBackend::from_env().is_err());
        std::env::set_var(ENV_API_KEY, "k");
        assert!(HttpBackend::from_env().is_ok());
        std::env::remove_var(ENV_BASE_URL);
        std::env::remove_var(ENV_API_KEY);
    }
}

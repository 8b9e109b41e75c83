//! Scripted completion backend for offline, deterministic tests.

use std::sync::atomic::{AtomicU64, Ordering};

use regex::Regex;

use crate::error::{Error, Result};

use super::{CompletionBackend, CompletionRequest};

/// How a rule decides whether it applies to a request's user text.
pub enum Matcher {
    /// The user text equals this string.
    Exact(String),
    /// The user text contains this substring.
    Contains(String),
    /// The whole user text matches this pattern (anchored at both ends).
    Pattern(Regex),
}

impl Matcher {
    pub fn exact(text: impl Into<String>) -> Self {
        Matcher::Exact(text.into())
    }

    pub fn contains(text: impl Into<String>) -> Self {
        Matcher::Contains(text.into())
    }

    /// Compile an anchored pattern; `.` matches newlines so multi-line
    /// prompts can be matched end to end.
    pub fn pattern(pattern: &str) -> Result<Self> {
        let regex = Regex::new(&format!("^(?s:{pattern})$"))
            .map_err(|e| Error::Config(format!("bad matcher pattern: {e}")))?;
        Ok(Matcher::Pattern(regex))
    }

    fn matches(&self, user_text: &str) -> bool {
        match self {
            Matcher::Exact(t) => user_text == t,
            Matcher::Contains(t) => user_text.contains(t.as_str()),
            Matcher::Pattern(r) => r.is_match(user_text),
        }
    }
}

/// What a matching rule answers with.
pub enum Responder {
    /// A fixed reply.
    Text(String),
    /// A reply computed from the request — for scripts that must echo parts
    /// of the prompt back (e.g. one verdict line per listed task).
    Fn(Box<dyn Fn(&CompletionRequest) -> String + Send + Sync>),
}

/// Ordered-rule scripted backend. The first rule whose matcher accepts the
/// request's user text answers; in strict mode an unscripted prompt is a
/// protocol error, in lenient mode it gets the configured default.
pub struct MockBackend {
    rules: Vec<(Matcher, Responder)>,
    default_response: Option<String>,
    calls: AtomicU64,
}

impl MockBackend {
    /// Every prompt must be covered by a rule.
    pub fn strict() -> Self {
        MockBackend { rules: Vec::new(), default_response: None, calls: AtomicU64::new(0) }
    }

    /// Unmatched prompts get `default_response`.
    pub fn lenient(default_response: impl Into<String>) -> Self {
        MockBackend {
            rules: Vec::new(),
            default_response: Some(default_response.into()),
            calls: AtomicU64::new(0),
        }
    }

    pub fn rule(mut self, matcher: Matcher, response: impl Into<String>) -> Self {
        self.rules.push((matcher, Responder::Text(response.into())));
        self
    }

    pub fn rule_fn(
        mut self,
        matcher: Matcher,
        respond: impl Fn(&CompletionRequest) -> String + Send + Sync + 'static,
    ) -> Self {
        self.rules.push((matcher, Responder::Fn(Box::new(respond))));
        self
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        for (matcher, responder) in &self.rules {
            if matcher.matches(&request.user_text) {
                return Ok(match responder {
                    Responder::Text(t) => t.clone(),
                    Responder::Fn(f) => f(request),
                });
            }
        }
        match &self.default_response {
            Some(d) => Ok(d.clone()),
            None => Err(Error::Protocol(format!(
                "no scripted response for prompt starting {:?}",
                request.user_text.chars().take(60).collect::<String>()
            ))),
        }
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

//! Language-model-backed interestingness.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fmclient::{CompletionRequest, FmClient};

use super::prompts::{parse_verdicts, PromptTemplate};
use super::{InterestVerdict, Moi, MoiQuery, VerdictSource};

/// Tunables for [`FmMoi`].
#[derive(Debug, Clone)]
pub struct FmMoiConfig {
    pub model_name: String,
    /// Optional system prompt (the instruction-grid template uses one; the
    /// few-shot template does not).
    pub system_text: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Candidates per prompt; large sets are judged in batches this size.
    pub chunk_size: usize,
    /// Queries per batch before giving up on unanswered candidates.
    pub max_attempts: u32,
}

impl Default for FmMoiConfig {
    fn default() -> Self {
        FmMoiConfig {
            model_name: "mock-model".into(),
            system_text: None,
            temperature: 0.0,
            max_tokens: 2048,
            chunk_size: 50,
            max_attempts: 3,
        }
    }
}

/// Judges interestingness by prompting a completion backend.
///
/// Candidates are judged in batches. Within a batch: a response that parses
/// but leaves some candidates unanswered triggers a follow-up prompt listing
/// only those; a response with no parseable verdicts is regenerated
/// cache-free (the cached copy is what failed); after `max_attempts` queries
/// a batch with leftovers is a protocol error.
pub struct FmMoi {
    client: Arc<FmClient>,
    template: PromptTemplate,
    config: FmMoiConfig,
}

impl FmMoi {
    pub fn new(client: Arc<FmClient>, template: PromptTemplate, config: FmMoiConfig) -> Result<Self> {
        if config.chunk_size == 0 {
            return Err(Error::Config("chunk_size must be at least 1".into()));
        }
        if config.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        Ok(FmMoi { client, template, config })
    }

    fn request(&self, user_text: String) -> CompletionRequest {
        CompletionRequest {
            model_name: self.config.model_name.clone(),
            system_text: self.config.system_text.clone(),
            user_text,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        }
    }
}

impl Moi for FmMoi {
    fn predict(&self, query: &MoiQuery) -> Result<Vec<InterestVerdict>> {
        let mut decided: BTreeMap<String, (bool, VerdictSource)> = BTreeMap::new();

        for chunk in query.candidates().chunks(self.config.chunk_size) {
            let mut remaining: Vec<String> = chunk.to_vec();
            let mut regenerate = false;
            let mut attempt = 0;
            while !remaining.is_empty() {
                attempt += 1;
                if attempt > self.config.max_attempts {
                    return Err(Error::Protocol(format!(
                        "{} tasks still unanswered after {} attempts",
                        remaining.len(),
                        self.config.max_attempts
                    )));
                }
                let prompt = self.template.render(query.done_well(), &remaining)?;
                let request = self.request(prompt);
                let (text, cached) = if regenerate {
                    (self.client.complete_fresh(&request)?, false)
                } else {
                    self.client.complete_tracked(&request)?
                };
                match parse_verdicts(&text, &remaining) {
                    Ok(parsed) => {
                        let source =
                            if cached { VerdictSource::Cached } else { VerdictSource::Fm };
                        for (task, interesting) in parsed.decided {
                            decided.insert(task, (interesting, source));
                        }
                        // Follow-up prompts list only the leftovers.
                        remaining = parsed.unanswered;
                        regenerate = false;
                    }
                    Err(_) => {
                        // Nothing usable: ask again, bypassing the cache so a
                        // bad stored response cannot wedge us.
                        regenerate = true;
                    }
                }
            }
        }

        Ok(query
            .candidates()
            .iter()
            .map(|c| {
                let (interesting, source) = decided[c.as_str()];
                InterestVerdict { task: c.clone(), interesting, source }
            })
            .collect())
    }
}

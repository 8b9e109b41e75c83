//! Prompt rendering and verdict parsing for language-model interestingness.
//!
//! Two response shapes are understood: plain per-task lines
//! (`collect wood: False`) and a `Predictions:` block whose lines carry
//! quoted task names (`"go to the red ball": True`). Parsing reports which
//! candidates went unanswered so callers can re-query only those.

use crate::error::{Error, Result};

/// Few-shot judging template for count-style task worlds: three worked
/// examples, then the inference block with `{done_well}` / `{candidates}`.
pub const CRAFTER_MOI_TEMPLATE: &str = include_str!("../../templates/crafter_moi.txt");

/// Variant of [`CRAFTER_MOI_TEMPLATE`] that additionally tells the model the
/// agent has no language prior, so synonymous task descriptions must each be
/// learned separately.
pub const CRAFTER_MOI_UPDATED_TEMPLATE: &str =
    include_str!("../../templates/crafter_moi_updated.txt");

/// System prompt for instruction-grid judging: rules, response format, and
/// worked examples. Carries no placeholders; pair it with
/// [`BABYAI_MOI_USER_TEMPLATE`].
pub const BABYAI_MOI_SYSTEM_TEXT: &str = include_str!("../../templates/babyai_moi_system.txt");

/// User-message template for instruction-grid judging.
pub const BABYAI_MOI_USER_TEMPLATE: &str = include_str!("../../templates/babyai_moi_user.txt");

const DONE_WELL_SLOT: &str = "{done_well}";
const CANDIDATES_SLOT: &str = "{candidates}";

/// A prompt with `{done_well}` and `{candidates}` placeholders. Rendering is
/// byte-deterministic: items joined with `", "`, optionally double-quoted.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    text: String,
    quote_items: bool,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>, quote_items: bool) -> Result<Self> {
        let text = text.into();
        for slot in [DONE_WELL_SLOT, CANDIDATES_SLOT] {
            if !text.contains(slot) {
                return Err(Error::Template(format!("template lacks the {slot} placeholder")));
            }
        }
        Ok(PromptTemplate { text, quote_items })
    }

    /// The bundled few-shot judging template (bare item lists).
    pub fn crafter() -> Self {
        PromptTemplate::new(CRAFTER_MOI_TEMPLATE, false).expect("bundled template has placeholders")
    }

    /// The synonym-aware variant of [`PromptTemplate::crafter`].
    pub fn crafter_updated() -> Self {
        PromptTemplate::new(CRAFTER_MOI_UPDATED_TEMPLATE, false)
            .expect("bundled template has placeholders")
    }

    /// The bundled instruction-grid user template (quoted item lists).
    pub fn babyai_user() -> Self {
        PromptTemplate::new(BABYAI_MOI_USER_TEMPLATE, true)
            .expect("bundled template has placeholders")
    }

    pub fn from_file(path: impl AsRef<std::path::Path>, quote_items: bool) -> Result<Self> {
        PromptTemplate::new(std::fs::read_to_string(path)?, quote_items)
    }

    fn render_list(&self, items: &[String]) -> String {
        let mut out = String::new();
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            if self.quote_items {
                out.push('"');
                out.push_str(item);
                out.push('"');
            } else {
                out.push_str(item);
            }
        }
        out
    }

    /// Fill both placeholders. An empty candidate list cannot produce a
    /// meaningful prompt and is rejected; an empty done-well list renders as
    /// an empty list (nothing mastered yet).
    pub fn render(&self, done_well: &[String], candidates: &[String]) -> Result<String> {
        if candidates.is_empty() {
            return Err(Error::Template("cannot render a prompt with no candidates".into()));
        }
        Ok(self
            .text
            .replace(DONE_WELL_SLOT, &self.render_list(done_well))
            .replace(CANDIDATES_SLOT, &self.render_list(candidates)))
    }
}

/// Parse outcome: verdicts in candidate order plus the candidates the text
/// never answered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictParse {
    pub decided: Vec<(String, bool)>,
    pub unanswered: Vec<String>,
}

fn strip_bullet(line: &str) -> &str {
    let line = line.trim();
    for marker in ["- ", "– ", "* "] {
        if let Some(rest) = line.strip_prefix(marker) {
            return rest.trim_start();
        }
    }
    line
}

/// Try to read `<candidate>: True|False` (candidate optionally quoted) from
/// one line.
fn match_verdict(line: &str, candidate: &str) -> Option<bool> {
    let line = strip_bullet(line);
    let rest = if let Some(r) = line.strip_prefix('"') {
        r.strip_prefix(candidate)?.strip_prefix('"')?
    } else {
        line.strip_prefix(candidate)?
    };
    let rest = rest.trim_start().strip_prefix(':')?.trim_start();
    let (token, after) = ["True", "False", "true", "false"]
        .iter()
        .find_map(|t| rest.strip_prefix(t).map(|a| (*t, a)))?;
    // Token must end at a word boundary ("Truely" is not a verdict).
    if after.chars().next().is_some_and(|c| c.is_alphanumeric()) {
        return None;
    }
    Some(token.eq_ignore_ascii_case("true"))
}

/// Extract per-candidate verdicts from model output.
///
/// If the text contains a `Predictions:` line, only what follows the last one
/// is scanned — reasoning prose above it often quotes task names and must not
/// be mistaken for answers. Candidates are matched longest-first so one task
/// name being a prefix of another cannot misattribute a line. The first
/// answer for a candidate wins. Zero parseable verdicts is a protocol error;
/// partially answered output is returned with the leftovers listed.
pub fn parse_verdicts(text: &str, candidates: &[String]) -> Result<VerdictParse> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .rposition(|l| l.trim().eq_ignore_ascii_case("Predictions:"))
        .map(|p| p + 1)
        .unwrap_or(0);

    let mut by_length: Vec<usize> = (0..candidates.len()).collect();
    by_length.sort_by_key(|&i| std::cmp::Reverse(candidates[i].len()));

    let mut answers: Vec<Option<bool>> = vec![None; candidates.len()];
    for line in &lines[start..] {
        for &i in &by_length {
            if answers[i].is_none() {
                if let Some(v) = match_verdict(line, &candidates[i]) {
                    answers[i] = Some(v);
                    break;
                }
            }
        }
    }

    let decided: Vec<(String, bool)> = candidates
        .iter()
        .zip(&answers)
        .filter_map(|(c, a)| a.map(|v| (c.clone(), v)))
        .collect();
    if decided.is_empty() {
        return Err(Error::Protocol("no task verdicts found in model output".into()));
    }
    let unanswered = candidates
        .iter()
        .zip(&answers)
        .filter(|(_, a)| a.is_none())
        .map(|(c, _)| c.clone())
        .collect();
    Ok(VerdictParse { decided, unanswered })
}

/// Render verdicts back into the plain line format — the inverse of
/// [`parse_verdicts`] for conforming text, and the shape scripted backends
/// reply with.
pub fn render_verdict_lines(verdicts: &[(String, bool)]) -> String {
    let mut out = String::new();
    for (task, interesting) in verdicts {
        out.push_str(task);
        out.push_str(": ");
        out.push_str(if *interesting { "True" } else { "False" });
        out.push('\n');
    }
    out
}

/// Scripted reply for judging prompts built from the bundled templates:
/// reads the candidate list back out of the prompt (the text after the last
/// `interesting: `) and answers each task by the repeat rule — a task naming
/// a count above one is a variant of something already known, hence boring.
pub fn crafter_repeat_rule_reply(prompt: &str) -> String {
    scripted_judging_reply(prompt, |name| !names_a_count(name))
}

/// Like [`crafter_repeat_rule_reply`], but also treats two skills glued
/// together with `" and "` as boring — recombination is not novelty.
pub fn crafter_compound_rule_reply(prompt: &str) -> String {
    scripted_judging_reply(prompt, |name| !names_a_count(name) && !name.contains(" and "))
}

/// Scripted judge with a language prior: besides counted variants, any task
/// whose verb is a synonym of a canonical skill verb reads as a duplicate
/// phrasing and is marked boring. This deliberately mislabels rephrased
/// tasks that a learner without a language prior would have to learn from
/// scratch — the failure mode the updated judging template corrects.
pub fn crafter_synonym_prior_reply(prompt: &str) -> String {
    scripted_judging_reply(prompt, |name| {
        let canonical_verb = name
            .split_whitespace()
            .next()
            .is_some_and(|verb| ["collect", "place", "make"].contains(&verb));
        canonical_verb && !names_a_count(name)
    })
}

fn names_a_count(name: &str) -> bool {
    name.split_whitespace().any(|w| w.parse::<u64>().map(|n| n > 1).unwrap_or(false))
}

fn comma_list(text: &str) -> Vec<String> {
    text.split(", ")
        .map(|raw| raw.trim().trim_matches('"'))
        .filter(|name| !name.is_empty())
        .map(|name| name.to_string())
        .collect()
}

/// Read the candidate list back out of a prompt built from the bundled
/// templates: the text after the last `interesting: `, up to the closing
/// period. Scripted judges answer exactly these names.
pub fn prompt_candidates(prompt: &str) -> Vec<String> {
    const LEAD: &str = "interesting: ";
    match prompt.rfind(LEAD) {
        Some(pos) => comma_list(prompt[pos + LEAD.len()..].trim_end().trim_end_matches('.')),
        None => Vec::new(),
    }
}

/// Read the done-well list back out of a prompt built from the bundled
/// templates: the sentence after the last `tasks well: `. Scripted judges
/// whose rule depends on what is already mastered parse this; the plain
/// name rules ignore it.
pub fn prompt_done_well(prompt: &str) -> Vec<String> {
    const LEAD: &str = "tasks well: ";
    match prompt.rfind(LEAD) {
        Some(pos) => {
            let tail = &prompt[pos + LEAD.len()..];
            comma_list(tail.split('.').next().unwrap_or(""))
        }
        None => Vec::new(),
    }
}

/// Shared scaffolding for the scripted judges: answer every prompt
/// candidate with the given name rule.
fn scripted_judging_reply(prompt: &str, interesting: impl Fn(&str) -> bool) -> String {
    let verdicts: Vec<(String, bool)> = prompt_candidates(prompt)
        .into_iter()
        .map(|name| {
            let verdict = interesting(&name);
            (name, verdict)
        })
        .collect();
    render_verdict_lines(&verdicts)
}

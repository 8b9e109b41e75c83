//! Prompt-driven task proposal for open-ended task spaces.
//!
//! When the task space is too large to enumerate, new tasks come from a
//! language model: the prompt lists what the agent already does well and
//! what it has tried but cannot do, and the model must answer with a
//! reasoning paragraph, numbered natural-language tasks, and the same tasks
//! as checkable environment-state code. A uniform random generator over the
//! same task language provides the matching baseline.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fmclient::{CompletionRequest, FmClient};
use crate::taskdsl::{
    canonicalize, parse_task, random_task, serialize_task, Abstraction, AffordanceTable,
    ArchiveLine, GenerationLimits, TaskId, TaskSpec,
};

/// System prompt for proposing new kitchen tasks: world rules, task format,
/// suggestion criteria, and the required response sections.
pub const KITCHEN_GENERATE_SYSTEM_TEXT: &str =
    include_str!("../templates/kitchen_generate_system.txt");

/// System prompt for translating code-format tasks into natural language.
pub const KITCHEN_TRANSLATE_SYSTEM_TEXT: &str =
    include_str!("../templates/kitchen_translate_system.txt");

/// One archived task with its live success estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchivedTask {
    pub spec: TaskSpec,
    pub natural_language: Option<String>,
    /// Smoothed success estimate, updated by the caller as evaluations come
    /// in. Starts at zero: an untouched task counts as not yet doable.
    pub success: f64,
    /// Training samples drawn so far; zero means never attempted.
    pub samples: u64,
}

/// The growing task set plus the threshold splitting it into done-well and
/// not-yet-doable subsets.
#[derive(Debug, Clone)]
pub struct TaskArchive {
    entries: BTreeMap<TaskId, ArchivedTask>,
    done_well_threshold: f64,
}

impl TaskArchive {
    pub fn new(done_well_threshold: f64) -> Result<Self> {
        if !done_well_threshold.is_finite()
            || done_well_threshold <= 0.0
            || done_well_threshold >= 1.0
        {
            return Err(Error::Config(format!(
                "done-well threshold must lie strictly between 0 and 1, got {done_well_threshold}"
            )));
        }
        Ok(TaskArchive { entries: BTreeMap::new(), done_well_threshold })
    }

    /// Rebuild an archive from persisted lines. Success estimates restart at
    /// zero; only the task set and labels persist.
    pub fn from_lines(lines: Vec<ArchiveLine>, done_well_threshold: f64) -> Result<Self> {
        let mut archive = TaskArchive::new(done_well_threshold)?;
        for line in lines {
            archive.add(line.spec, line.natural_language);
        }
        Ok(archive)
    }

    /// The archive's persistable form (canonical id order).
    pub fn to_lines(&self) -> Vec<ArchiveLine> {
        self.entries
            .values()
            .map(|t| ArchiveLine { spec: t.spec.clone(), natural_language: t.natural_language.clone() })
            .collect()
    }

    /// Insert a task; returns false if its canonical id is already present.
    pub fn add(&mut self, spec: TaskSpec, natural_language: Option<String>) -> bool {
        let id = canonicalize(&spec, Abstraction::None);
        if self.entries.contains_key(&id) {
            return false;
        }
        self.entries
            .insert(id, ArchivedTask { spec, natural_language, success: 0.0, samples: 0 });
        true
    }

    pub fn done_well_threshold(&self) -> f64 {
        self.done_well_threshold
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &TaskId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &TaskId) -> Option<&ArchivedTask> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &TaskId> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TaskId, &ArchivedTask)> {
        self.entries.iter()
    }

    /// Record the latest success estimate for a task.
    pub fn set_success(&mut self, id: &TaskId, success: f64) -> Result<()> {
        if !success.is_finite() || !(0.0..=1.0).contains(&success) {
            return Err(Error::Evaluation(format!("success for {id} out of range: {success}")));
        }
        match self.entries.get_mut(id) {
            Some(task) => {
                task.success = success;
                Ok(())
            }
            None => Err(Error::Evaluation(format!("unknown task id {id}"))),
        }
    }

    /// Count one training sample drawn for a task.
    pub fn note_sampled(&mut self, id: &TaskId) -> Result<()> {
        match self.entries.get_mut(id) {
            Some(task) => {
                task.samples += 1;
                Ok(())
            }
            None => Err(Error::Evaluation(format!("unknown task id {id}"))),
        }
    }

    /// Tasks at or above the done-well threshold, in id order.
    pub fn done_well(&self) -> Vec<(&TaskId, &ArchivedTask)> {
        self.entries
            .iter()
            .filter(|(_, t)| t.success >= self.done_well_threshold)
            .collect()
    }

    /// Tasks tried but below the threshold: sampled at least once with
    /// success under the done-well threshold, ordered most-sampled first
    /// (ties by id) and capped at `k` to bound prompt size.
    pub fn cannot_do(&self, k: usize) -> Vec<(&TaskId, &ArchivedTask)> {
        let mut failing: Vec<(&TaskId, &ArchivedTask)> = self
            .entries
            .iter()
            .filter(|(_, t)| t.samples > 0 && t.success < self.done_well_threshold)
            .collect();
        failing.sort_by(|(a_id, a), (b_id, b)| {
            b.samples.cmp(&a.samples).then_with(|| a_id.cmp(b_id))
        });
        failing.truncate(k);
        failing
    }
}

/// Header introducing the mastered-task list in the proposal prompt.
pub const DONE_WELL_HEADER: &str = "Tasks the agent currently does well:";
/// Header introducing the unmastered-task list in the proposal prompt.
pub const CANNOT_DO_HEADER: &str = "Tasks the agent cannot do yet:";

/// Render the proposal prompt's user message: both task lists as `- ` items
/// under their headers. Empty lists render as a bare header (cold start).
/// Byte-deterministic.
pub fn build_proposal_prompt(done_well: &[String], cannot_do: &[String]) -> String {
    let mut out = String::new();
    out.push_str(DONE_WELL_HEADER);
    for task in done_well {
        out.push_str("\n- ");
        out.push_str(task);
    }
    out.push('\n');
    out.push_str(CANNOT_DO_HEADER);
    for task in cannot_do {
        out.push_str("\n- ");
        out.push_str(task);
    }
    out
}

/// A parsed model proposal. The two task lists correspond one-to-one.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub reasoning: String,
    pub nl_tasks: Vec<String>,
    pub code_tasks: Vec<TaskSpec>,
}

const REASONING_HEADER: &str = "Reasoning:";
const NL_HEADER: &str = "Next tasks in natural language:";
const CODE_HEADER: &str = "Next tasks as sequence of environment states:";

fn numbered_items(lines: &[&str]) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    for line in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(item) = strip_item_number(trimmed) {
            items.push(item.to_string());
        } else if let Some(open) = items.last_mut() {
            // Soft-wrapped continuation of the previous item.
            open.push(' ');
            open.push_str(trimmed);
        }
    }
    items
}

fn strip_item_number(text: &str) -> Option<&str> {
    let digits = text.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    let rest = &text[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    Some(rest.trim_start())
}

/// Parse a proposal response into its three sections.
///
/// The reasoning text follows its header (same line and/or subsequent
/// lines); both task lists are numbered items (`1.` or `1)`), one task per
/// item. Missing sections, a count mismatch between the lists, and a code
/// task that fails to parse are each reported distinctly.
pub fn parse_proposal(text: &str) -> Result<Proposal> {
    let lines: Vec<&str> = text.lines().collect();
    let find = |header: &str| lines.iter().position(|l| l.trim_start().starts_with(header));
    let reasoning_at = find(REASONING_HEADER)
        .ok_or_else(|| Error::Protocol("proposal lacks a 'Reasoning:' section".into()))?;
    let nl_at = find(NL_HEADER).ok_or_else(|| {
        Error::Protocol("proposal lacks a 'Next tasks in natural language:' section".into())
    })?;
    let code_at = find(CODE_HEADER).ok_or_else(|| {
        Error::Protocol(
            "proposal lacks a 'Next tasks as sequence of environment states:' section".into(),
        )
    })?;
    if !(reasoning_at < nl_at && nl_at < code_at) {
        return Err(Error::Protocol("proposal sections are out of order".into()));
    }

    let first_line_rest = lines[reasoning_at]
        .trim_start()
        .strip_prefix(REASONING_HEADER)
        .expect("header matched")
        .trim();
    let mut reasoning = String::from(first_line_rest);
    for line in &lines[reasoning_at + 1..nl_at] {
        if !reasoning.is_empty() {
            reasoning.push('\n');
        }
        reasoning.push_str(line.trim_end());
    }
    let reasoning = reasoning.trim().to_string();

    let nl_tasks = numbered_items(&lines[nl_at + 1..code_at]);
    let code_lines = numbered_items(&lines[code_at + 1..]);
    if nl_tasks.len() != code_lines.len() {
        return Err(Error::Protocol(format!(
            "proposal lists {} natural-language tasks but {} code tasks",
            nl_tasks.len(),
            code_lines.len()
        )));
    }
    if nl_tasks.is_empty() {
        return Err(Error::Protocol("proposal suggests no tasks".into()));
    }
    let code_tasks = code_lines
        .iter()
        .enumerate()
        .map(|(i, code)| {
            parse_task(code).map_err(|e| {
                Error::Protocol(format!("proposal code task {} does not parse: {e}", i + 1))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Proposal { reasoning, nl_tasks, code_tasks })
}

/// Render a proposal in the exact shape [`parse_proposal`] reads back.
pub fn render_proposal(proposal: &Proposal) -> String {
    let mut out = String::new();
    out.push_str(REASONING_HEADER);
    out.push(' ');
    out.push_str(&proposal.reasoning);
    out.push('\n');
    out.push_str(NL_HEADER);
    for (i, task) in proposal.nl_tasks.iter().enumerate() {
        out.push_str(&format!("\n{}. {}", i + 1, task));
    }
    out.push('\n');
    out.push_str(CODE_HEADER);
    for (i, spec) in proposal.code_tasks.iter().enumerate() {
        out.push_str(&format!("\n{}. {}", i + 1, serialize_task(spec)));
    }
    out
}

/// Tunables for [`TaskProposer`].
#[derive(Debug, Clone)]
pub struct ProposerConfig {
    pub model_name: String,
    /// System prompt for proposals.
    pub generate_system_text: String,
    /// System prompt for code→natural-language translation.
    pub translate_system_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// How many not-yet-doable tasks the prompt lists at most.
    pub k_cannot: usize,
    /// Queries per proposal before giving up on unparseable output.
    pub max_attempts: u32,
}

impl Default for ProposerConfig {
    fn default() -> Self {
        ProposerConfig {
            model_name: "mock-model".into(),
            generate_system_text: KITCHEN_GENERATE_SYSTEM_TEXT.to_string(),
            translate_system_text: KITCHEN_TRANSLATE_SYSTEM_TEXT.to_string(),
            temperature: 0.0,
            max_tokens: 2048,
            k_cannot: 10,
            max_attempts: 3,
        }
    }
}

impl ProposerConfig {
    /// Ask for a different number of tasks per proposal. The stock system
    /// prompt requests three; this rewrites that request in place.
    pub fn with_requested_tasks(mut self, count: usize) -> Self {
        self.generate_system_text =
            self.generate_system_text.replace("Suggest 3", &format!("Suggest {count}"));
        self
    }
}

/// Proposes new tasks through a completion client and translates code-format
/// tasks to natural language.
pub struct TaskProposer {
    client: Arc<FmClient>,
    config: ProposerConfig,
}

impl TaskProposer {
    pub fn new(client: Arc<FmClient>, config: ProposerConfig) -> Result<Self> {
        if config.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        Ok(TaskProposer { client, config })
    }

    fn request(&self, system_text: &str, user_text: String) -> CompletionRequest {
        CompletionRequest {
            model_name: self.config.model_name.clone(),
            system_text: Some(system_text.to_string()),
            user_text,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        }
    }

    /// Query until the response parses, regenerating cache-free after a
    /// protocol failure, up to the attempt cap.
    fn query_parsed<T>(
        &self,
        request: &CompletionRequest,
        parse: impl Fn(&str) -> Result<T>,
    ) -> Result<T> {
        let mut last_err = None;
        for attempt in 0..self.config.max_attempts {
            let text = if attempt == 0 {
                self.client.complete(request)?
            } else {
                self.client.complete_fresh(request)?
            };
            match parse(&text) {
                Ok(value) => return Ok(value),
                Err(e @ Error::Protocol(_)) => last_err = Some(e),
                Err(other) => return Err(other),
            }
        }
        Err(last_err.expect("at least one attempt ran"))
    }

    /// Ask for the next tasks given the archive's current state. The
    /// response is parsed, deduplicated against the archive (canonical task
    /// identity), and filtered to achievable tasks; survivors are returned
    /// with their natural-language labels, ready to add.
    pub fn propose_tasks(
        &self,
        archive: &TaskArchive,
        affordances: &AffordanceTable,
    ) -> Result<Vec<ArchiveLine>> {
        let done_well: Vec<String> =
            archive.done_well().iter().map(|(_, t)| serialize_task(&t.spec)).collect();
        let cannot_do: Vec<String> = archive
            .cannot_do(self.config.k_cannot)
            .iter()
            .map(|(_, t)| serialize_task(&t.spec))
            .collect();
        let request = self.request(
            &self.config.generate_system_text,
            build_proposal_prompt(&done_well, &cannot_do),
        );
        let proposal = self.query_parsed(&request, |text| parse_proposal(text))?;

        let mut seen_in_batch = std::collections::BTreeSet::new();
        let mut fresh = Vec::new();
        for (spec, nl) in proposal.code_tasks.into_iter().zip(proposal.nl_tasks) {
            let id = canonicalize(&spec, Abstraction::None);
            if archive.contains(&id) || !seen_in_batch.insert(id) {
                continue;
            }
            if affordances.validate_task(&spec).is_err() {
                continue;
            }
            fresh.push(ArchiveLine { spec, natural_language: Some(nl) });
        }
        Ok(fresh)
    }

    /// Translate code-format tasks to natural language, one description per
    /// task in order. An answer with the wrong count is regenerated and
    /// ultimately a protocol error.
    pub fn translate_to_nl(&self, specs: &[TaskSpec]) -> Result<Vec<String>> {
        if specs.is_empty() {
            return Ok(Vec::new());
        }
        let mut user_text = String::from("Tasks in code format:");
        for (i, spec) in specs.iter().enumerate() {
            user_text.push_str(&format!("\n{}. {}", i + 1, serialize_task(spec)));
        }
        let request = self.request(&self.config.translate_system_text, user_text);
        self.query_parsed(&request, |text| {
            let lines: Vec<&str> = text.lines().collect();
            let start = lines
                .iter()
                .position(|l| l.trim_start().starts_with("Tasks in natural language:"))
                .map(|p| p + 1)
                .unwrap_or(0);
            let items = numbered_items(&lines[start..]);
            if items.len() != specs.len() {
                return Err(Error::Protocol(format!(
                    "expected {} translations, got {}",
                    specs.len(),
                    items.len()
                )));
            }
            Ok(items)
        })
    }
}

/// Sample `n` random achievable tasks — the uniform-proposal baseline. The
/// injection cadence is the caller's business; this just makes a batch.
pub fn uniform_task_batch<R: Rng + ?Sized>(
    rng: &mut R,
    affordances: &AffordanceTable,
    limits: &GenerationLimits,
    n: usize,
) -> Result<Vec<TaskSpec>> {
    if n == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    (0..n).map(|_| random_task(rng, affordances, limits)).collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::fmclient::{Matcher, MockBackend};

    use super::*;

    const EXAMPLE_DONE_WELL: [&str; 3] = [
        "[[obj_attributes(\"Apple\", {\"visible\": True})]]",
        "[[obj_attributes(\"Knife\", {\"visible\": True})]]",
        "[[obj_attributes(\"Potato\", {\"visible\": True})]]",
    ];

    const EXAMPLE_CANNOT_DO: [&str; 4] = [
        "[[obj_attributes(\"Bread\", {\"visible\": True})]]",
        "[[obj_attributes(\"Apple\", {\"visible\": True, \"isPickedUp\": True})]]",
        "[[obj_attributes(\"Fridge\", {\"visible\": True})],[obj_attributes(\"Fridge\", {\"isOpen\": True})]]",
        "[[obj_attributes(\"Plate\", {\"visible\": True})]]",
    ];

    const EXAMPLE_REASONING: &str = "The agent is currently able to identify and locate certain \
        objects in the kitchen environment, such as an apple, a knife, and a potato. However, it \
        struggles with tasks that involve interaction with objects, such as picking up an apple \
        or opening the fridge. It also seems to have difficulty recognizing certain objects, like \
        bread and a plate. Given these abilities and limitations, the next tasks should involve \
        simple interactions with objects that the agent can already recognize, as well as \
        recognition of new objects that are not too similar to the ones it struggles with.";

    fn example_response() -> String {
        format!(
            "Reasoning: {EXAMPLE_REASONING}\n\
             Next tasks in natural language: \n\
             1. Slice the potato with the knife.\n\
             2. Pick up the knife.\n\
             3. Recognize and locate the coffee machine.\n\
             Next tasks as sequence of environment states: \n\
             1. [[obj_attributes(\"Potato\", {{\"visible\": True}})], [obj_attributes(\"Knife\", {{\"visible\": True}})], [obj_attributes(\"Potato\", {{\"isSliced\": True}})]]\n\
             2. [[obj_attributes(\"Knife\", {{\"visible\": True}})], [obj_attributes(\"Knife\", {{\"isPickedUp\": True}})]]\n\
             3. [[obj_attributes(\"CoffeeMachine\", {{\"visible\": True}})]]"
        )
    }

    fn spec(text: &str) -> TaskSpec {
        parse_task(text).unwrap()
    }

    fn id_of(text: &str) -> TaskId {
        canonicalize(&spec(text), Abstraction::None)
    }

    #[test]
    fn archive_threshold_is_validated() {
        assert!(TaskArchive::new(0.0).is_err());
        assert!(TaskArchive::new(1.0).is_err());
        assert!(TaskArchive::new(f64::NAN).is_err());
        assert!(TaskArchive::new(0.6).is_ok());
    }

    #[test]
    fn archive_splits_done_well_from_cannot_do() {
        let mut archive = TaskArchive::new(0.6).unwrap();
        for text in EXAMPLE_DONE_WELL.iter().chain(EXAMPLE_CANNOT_DO.iter()) {
            assert!(archive.add(spec(text), None));
        }
        for text in EXAMPLE_DONE_WELL {
            archive.set_success(&id_of(text), 0.9).unwrap();
        }
        // Failing tasks with different sampling pressure; one never sampled.
        let bread = id_of(EXAMPLE_CANNOT_DO[0]);
        let apple = id_of(EXAMPLE_CANNOT_DO[1]);
        let fridge = id_of(EXAMPLE_CANNOT_DO[2]);
        for _ in 0..5 {
            archive.note_sampled(&bread).unwrap();
        }
        for _ in 0..9 {
            archive.note_sampled(&apple).unwrap();
        }
        archive.set_success(&bread, 0.2).unwrap();
        archive.set_success(&apple, 0.1).unwrap();
        archive.set_success(&fridge, 0.0).unwrap();

        assert_eq!(archive.done_well().len(), 3);
        // Unsampled tasks stay out of the cannot-do list; most-sampled first.
        let cannot: Vec<&TaskId> = archive.cannot_do(10).iter().map(|(id, _)| *id).collect();
        assert_eq!(cannot, vec![&apple, &bread]);
        assert_eq!(archive.cannot_do(1).len(), 1);

        // A task crossing the threshold moves between the subsets.
        archive.set_success(&apple, 0.7).unwrap();
        assert_eq!(archive.done_well().len(), 4);
        assert_eq!(archive.cannot_do(10).len(), 1);
    }

    #[test]
    fn archive_rejects_unknown_ids_and_bad_rates() {
        let mut archive = TaskArchive::new(0.6).unwrap();
        archive.add(spec(EXAMPLE_DONE_WELL[0]), None);
        assert!(archive.set_success(&TaskId::new("nope"), 0.5).is_err());
        assert!(archive.note_sampled(&TaskId::new("nope")).is_err());
        assert!(archive.set_success(&id_of(EXAMPLE_DONE_WELL[0]), 1.5).is_err());
    }

    #[test]
    fn archive_round_trips_through_lines() {
        let mut archive = TaskArchive::new(0.6).unwrap();
        archive.add(spec(EXAMPLE_DONE_WELL[0]), Some("Find an apple.".into()));
        archive.add(spec(EXAMPLE_CANNOT_DO[0]), None);
        let reloaded = TaskArchive::from_lines(archive.to_lines(), 0.6).unwrap();
        assert_eq!(reloaded.len(), 2);
        assert_eq!(
            reloaded.get(&id_of(EXAMPLE_DONE_WELL[0])).unwrap().natural_language.as_deref(),
            Some("Find an apple.")
        );
    }

    #[test]
    fn proposal_prompt_reproduces_the_worked_example() {
        let done: Vec<String> = EXAMPLE_DONE_WELL.iter().map(|s| s.to_string()).collect();
        let cannot: Vec<String> = EXAMPLE_CANNOT_DO.iter().map(|s| s.to_string()).collect();
        let prompt = build_proposal_prompt(&done, &cannot);
        let expected = "Tasks the agent currently does well:\n\
             - [[obj_attributes(\"Apple\", {\"visible\": True})]]\n\
             - [[obj_attributes(\"Knife\", {\"visible\": True})]]\n\
             - [[obj_attributes(\"Potato\", {\"visible\": True})]]\n\
             Tasks the agent cannot do yet:\n\
             - [[obj_attributes(\"Bread\", {\"visible\": True})]]\n\
             - [[obj_attributes(\"Apple\", {\"visible\": True, \"isPickedUp\": True})]]\n\
             - [[obj_attributes(\"Fridge\", {\"visible\": True})],[obj_attributes(\"Fridge\", {\"isOpen\": True})]]\n\
             - [[obj_attributes(\"Plate\", {\"visible\": True})]]";
        assert_eq!(prompt, expected);
        // Deterministic bytes.
        assert_eq!(prompt, build_proposal_prompt(&done, &cannot));
    }

    #[test]
    fn empty_lists_render_bare_headers() {
        assert_eq!(
            build_proposal_prompt(&[], &[]),
            "Tasks the agent currently does well:\nTasks the agent cannot do yet:"
        );
    }

    #[test]
    fn worked_example_response_parses_fully() {
        let proposal = parse_proposal(&example_response()).unwrap();
        assert!(proposal.reasoning.starts_with("The agent is currently able"));
        assert_eq!(
            proposal.nl_tasks,
            vec![
                "Slice the potato with the knife.",
                "Pick up the knife.",
                "Recognize and locate the coffee machine.",
            ]
        );
        assert_eq!(proposal.code_tasks.len(), 3);
        // The slicing task steps through three environment states.
        assert_eq!(proposal.code_tasks[0].len(), 3);
        assert_eq!(proposal.code_tasks[1].len(), 2);
        assert_eq!(proposal.code_tasks[2].len(), 1);
    }

    #[test]
    fn missing_sections_are_reported_distinctly() {
        let full = example_response();
        let no_code = full.split("Next tasks as sequence").next().unwrap();
        let err = parse_proposal(no_code).unwrap_err();
        assert!(err.to_string().contains("environment states"), "{err}");

        let no_nl = full.replace("Next tasks in natural language:", "later tasks:");
        let err = parse_proposal(&no_nl).unwrap_err();
        assert!(err.to_string().contains("natural language"), "{err}");

        let err = parse_proposal("nothing structured").unwrap_err();
        assert!(err.to_string().contains("Reasoning"), "{err}");
    }

    #[test]
    fn list_count_mismatch_is_an_error() {
        let short = example_response().replace(
            "\n3. [[obj_attributes(\"CoffeeMachine\", {\"visible\": True})]]",
            "",
        );
        let err = parse_proposal(&short).unwrap_err();
        assert!(err.to_string().contains("3 natural-language tasks but 2"), "{err}");
    }

    #[test]
    fn unparseable_code_task_is_an_error() {
        let broken = example_response().replace(
            "[[obj_attributes(\"CoffeeMachine\", {\"visible\": True})]]",
            "[[obj_attributes(\"CoffeeMachine\", {\"hoverable\": True})]]",
        );
        let err = parse_proposal(&broken).unwrap_err();
        assert!(err.to_string().contains("code task 3"), "{err}");
    }

    #[test]
    fn rendered_proposals_parse_back_to_the_same_tasks() {
        let original = parse_proposal(&example_response()).unwrap();
        let reparsed = parse_proposal(&render_proposal(&original)).unwrap();
        assert_eq!(reparsed, original);
    }

    fn scripted_proposer(response: String) -> (TaskProposer, Arc<FmClient>) {
        let backend = MockBackend::strict()
            .rule(Matcher::contains("Tasks the agent currently does well:"), response);
        let client = Arc::new(FmClient::new(Box::new(backend)));
        let proposer = TaskProposer::new(client.clone(), ProposerConfig::default()).unwrap();
        (proposer, client)
    }

    fn seeded_archive() -> TaskArchive {
        let mut archive = TaskArchive::new(0.6).unwrap();
        for text in EXAMPLE_DONE_WELL {
            archive.add(spec(text), None);
            archive.set_success(&id_of(text), 0.9).unwrap();
        }
        for text in EXAMPLE_CANNOT_DO {
            archive.add(spec(text), None);
            archive.note_sampled(&id_of(text)).unwrap();
            archive.set_success(&id_of(text), 0.2).unwrap();
        }
        archive
    }

    #[test]
    fn scripted_proposal_yields_three_new_tasks() {
        let (proposer, _client) = scripted_proposer(example_response());
        let archive = seeded_archive();
        let fresh =
            proposer.propose_tasks(&archive, &AffordanceTable::kitchen()).unwrap();
        assert_eq!(fresh.len(), 3);
        assert_eq!(
            fresh[0].natural_language.as_deref(),
            Some("Slice the potato with the knife.")
        );
        assert_eq!(fresh[0].spec.len(), 3);
    }

    #[test]
    fn proposals_already_archived_are_dropped() {
        // The model re-suggests an archived task, spelled with its attribute
        // pairs in the opposite order — canonical identity must still match.
        let response = "Reasoning: more of the same.\n\
             Next tasks in natural language:\n\
             1. Pick up the apple.\n\
             Next tasks as sequence of environment states:\n\
             1. [[obj_attributes(\"Apple\", {\"isPickedUp\": True, \"visible\": True})]]";
        let (proposer, _client) = scripted_proposer(response.to_string());
        let archive = seeded_archive();
        let fresh = proposer.propose_tasks(&archive, &AffordanceTable::kitchen()).unwrap();
        assert!(fresh.is_empty());
    }

    #[test]
    fn unachievable_proposals_are_dropped_and_the_rest_kept() {
        let response = "Reasoning: try moving furniture.\n\
             Next tasks in natural language:\n\
             1. Pick up the fridge.\n\
             2. Warm the egg.\n\
             Next tasks as sequence of environment states:\n\
             1. [[obj_attributes(\"Fridge\", {\"isPickedUp\": True})]]\n\
             2. [[obj_attributes(\"Egg\", {\"temperature\": \"Hot\"})]]";
        let (proposer, _client) = scripted_proposer(response.to_string());
        let archive = seeded_archive();
        let fresh = proposer.propose_tasks(&archive, &AffordanceTable::kitchen()).unwrap();
        assert_eq!(fresh.len(), 1);
        assert_eq!(fresh[0].natural_language.as_deref(), Some("Warm the egg."));
    }

    #[test]
    fn duplicate_suggestions_within_one_proposal_collapse() {
        let response = "Reasoning: twice the same idea.\n\
             Next tasks in natural language:\n\
             1. Warm the egg.\n\
             2. Heat the egg.\n\
             Next tasks as sequence of environment states:\n\
             1. [[obj_attributes(\"Egg\", {\"temperature\": \"Hot\"})]]\n\
             2. [[obj_attributes(\"Egg\", {\"temperature\": \"Hot\"})]]";
        let (proposer, _client) = scripted_proposer(response.to_string());
        let fresh = proposer
            .propose_tasks(&TaskArchive::new(0.6).unwrap(), &AffordanceTable::kitchen())
            .unwrap();
        assert_eq!(fresh.len(), 1);
        assert_eq!(fresh[0].natural_language.as_deref(), Some("Warm the egg."));
    }

    #[test]
    fn cold_start_queries_with_empty_lists() {
        let prompts = Arc::new(std::sync::Mutex::new(Vec::new()));
        let prompts_rec = prompts.clone();
        let backend = MockBackend::strict().rule_fn(
            Matcher::contains("Tasks the agent currently does well:"),
            move |req| {
                prompts_rec.lock().unwrap().push(req.user_text.clone());
                example_response()
            },
        );
        let client = Arc::new(FmClient::new(Box::new(backend)));
        let proposer = TaskProposer::new(client, ProposerConfig::default()).unwrap();
        let fresh = proposer
            .propose_tasks(&TaskArchive::new(0.6).unwrap(), &AffordanceTable::kitchen())
            .unwrap();
        assert_eq!(fresh.len(), 3);
        assert_eq!(
            prompts.lock().unwrap()[0],
            "Tasks the agent currently does well:\nTasks the agent cannot do yet:"
        );
    }

    #[test]
    fn malformed_proposals_are_regenerated_then_fail() {
        let calls = Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let calls_in_rule = calls.clone();
        let backend = MockBackend::strict().rule_fn(
            Matcher::contains("Tasks the agent currently does well:"),
            move |_| {
                if calls_in_rule.fetch_add(1, std::sync::atomic::Ordering::Relaxed) == 0 {
                    "static noise".into()
                } else {
                    example_response()
                }
            },
        );
        let client = Arc::new(FmClient::new(Box::new(backend)));
        let proposer = TaskProposer::new(client.clone(), ProposerConfig::default()).unwrap();
        let fresh = proposer
            .propose_tasks(&seeded_archive(), &AffordanceTable::kitchen())
            .unwrap();
        assert_eq!(fresh.len(), 3);
        assert_eq!(client.backend_calls(), 2);

        // A model that never recovers exhausts its attempts.
        let hopeless = Arc::new(FmClient::new(Box::new(MockBackend::lenient("noise"))));
        let proposer = TaskProposer::new(hopeless.clone(), ProposerConfig::default()).unwrap();
        let err = proposer
            .propose_tasks(&seeded_archive(), &AffordanceTable::kitchen())
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert_eq!(hopeless.backend_calls(), 3);
    }

    const TRANSLATE_CODE: [&str; 3] = [
        "[[obj_attributes(\"SideTable\", {\"receptacleObjects\": \"Apple\"}),obj_attributes(\"ButterKnife\", {\"isPickedUp\": False})]]",
        "[[obj_attributes(\"Egg\", {\"isPickedUp\": True, \"isBroken\": True})],[obj_attributes(\"Sink\", {\"receptacleObjects\": \"Potato\"}),obj_attributes(\"Bread\", {\"isSliced\": True})]]",
        "[[obj_attributes(\"ButterKnife\", {\"isPickedUp\": True}),obj_attributes(\"SoapBottle\", {\"isPickedUp\": False})],[obj_attributes(\"SideTable\", {\"receptacleObjects\": \"ButterKnife\"}),obj_attributes(\"Fork\", {\"isPickedUp\": False})],[obj_attributes(\"Pot\", {\"receptacleObjects\": \"Spatula\"}),obj_attributes(\"Microwave\", {\"receptacleObjects\": \"Knife\"})]]",
    ];

    const TRANSLATE_NL: [&str; 3] = [
        "Put an apple on the side table and put down the butterknife.",
        "Pick up and break an egg. Then, put a potato in the sink and slice the bread.",
        "Pick up the butterknife and put down the soap bottle. Then, put the butterknife on the side table and put down the fork. After that, put a spatula in the pot and a knife in the microwave.",
    ];

    #[test]
    fn translation_returns_one_description_per_task() {
        let reply = format!(
            "Tasks in natural language:\n1. {}\n2. {}\n3. {}",
            TRANSLATE_NL[0], TRANSLATE_NL[1], TRANSLATE_NL[2]
        );
        let backend =
            MockBackend::strict().rule(Matcher::contains("Tasks in code format:"), reply);
        let client = Arc::new(FmClient::new(Box::new(backend)));
        let proposer = TaskProposer::new(client, ProposerConfig::default()).unwrap();
        let specs: Vec<TaskSpec> = TRANSLATE_CODE.iter().map(|t| spec(t)).collect();
        // The worked example's tasks are all achievable in the stock kitchen.
        for s in &specs {
            AffordanceTable::kitchen().validate_task(s).unwrap();
        }
        let nl = proposer.translate_to_nl(&specs).unwrap();
        assert_eq!(nl, TRANSLATE_NL.to_vec());
    }

    #[test]
    fn translating_nothing_is_free() {
        let client = Arc::new(FmClient::new(Box::new(MockBackend::strict())));
        let proposer = TaskProposer::new(client.clone(), ProposerConfig::default()).unwrap();
        assert!(proposer.translate_to_nl(&[]).unwrap().is_empty());
        assert_eq!(client.backend_calls(), 0);
    }

    #[test]
    fn translation_count_mismatch_is_a_protocol_error() {
        let backend = MockBackend::lenient("Tasks in natural language:\n1. Only one line.");
        let client = Arc::new(FmClient::new(Box::new(backend)));
        let proposer = TaskProposer::new(client, ProposerConfig::default()).unwrap();
        let specs: Vec<TaskSpec> = TRANSLATE_CODE.iter().map(|t| spec(t)).collect();
        let err = proposer.translate_to_nl(&specs).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("expected 3 translations"), "{err}");
    }

    #[test]
    fn uniform_batches_are_valid_and_reproducible() {
        let table = AffordanceTable::kitchen();
        let limits = GenerationLimits::default();
        let batch = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            uniform_task_batch(&mut rng, &table, &limits, 3).unwrap()
        };
        assert_eq!(batch(5).len(), 3);
        assert_eq!(batch(5), batch(5));
        assert_ne!(batch(5), batch(6));
        for task in batch(5) {
            table.validate_task(&task).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(uniform_task_batch(&mut rng, &table, &limits, 0).is_err());
    }

    #[test]
    fn requested_task_count_rewrites_the_system_prompt() {
        let config = ProposerConfig::default().with_requested_tasks(5);
        assert!(config.generate_system_text.contains("Suggest 5"));
        assert!(!config.generate_system_text.contains("Suggest 3"));
    }
}

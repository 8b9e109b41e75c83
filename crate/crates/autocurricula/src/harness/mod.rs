//! Experiment orchestration: configuration, the training/evaluation loop for
//! every sampling condition, metrics, statistics, and CSV/SVG emission.
//!
//! An experiment is a grid of (condition, seed) runs over one world. Each
//! run trains the world on batches drawn from the condition's sampling
//! distribution, evaluates on a fixed cadence, and records per-task and
//! aggregate rows. Open-ended runs also grow the task pool while training:
//! uniform and lp draw random task chains, omni asks a proposer for tasks
//! just past the current frontier.

pub mod emit;
pub mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::curriculum::{
    compose_with_interest, CurriculumConfig, CurriculumState, SamplingDistribution,
};
use crate::error::{Error, Result};
use crate::fmclient::{CompletionBackend, FmClient, HttpBackend, Matcher, MockBackend};
use crate::interestingness::{
    crafter_compound_rule_reply, crafter_repeat_rule_reply, crafter_synonym_prior_reply,
    partition, prompt_candidates, prompt_done_well, render_verdict_lines, EmbeddingMoi, FmMoi,
    FmMoiConfig, PromptTemplate,
};
use crate::proposer::{
    render_proposal, Proposal, ProposerConfig, TaskArchive, TaskProposer, CANNOT_DO_HEADER,
    DONE_WELL_HEADER,
};
use crate::taskdsl::{
    canonicalize, parse_task, Abstraction, AffordanceTable, ArchiveLine, TaskId, TaskSpec,
    MAX_TASK_STATES,
};
use crate::world::chaincraft::{
    chain_from_task_name, chain_task_name, fnv1a, frontier_items, item_affordances,
    possession_task, practice_prereq, random_chain_tasks, ChainCraftSpec, ChainCraftWorld,
    LearnerConfig,
};
use crate::world::{Preset, World};

/// Task-sampling condition a run is driven by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Every task equally likely.
    Uniform,
    /// Learning-progress weights alone.
    Lp,
    /// Learning-progress weights with model-judged boring tasks downweighted.
    Omni,
    /// Learning-progress weights with ground-truth boring tasks downweighted.
    Oracle,
    /// Learning-progress weights with embedding-cluster-judged boring tasks
    /// downweighted.
    OmniEmbed,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Uniform,
        Condition::Lp,
        Condition::Omni,
        Condition::Oracle,
        Condition::OmniEmbed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Condition::Uniform => "uniform",
            Condition::Lp => "lp",
            Condition::Omni => "omni",
            Condition::Oracle => "oracle",
            Condition::OmniEmbed => "omni-embed",
        }
    }

    pub fn from_name(name: &str) -> Result<Condition> {
        Condition::ALL.iter().find(|c| c.name() == name).copied().ok_or_else(|| {
            let known: Vec<&str> = Condition::ALL.iter().map(|c| c.name()).collect();
            Error::Config(format!("unknown condition '{name}'; known: {}", known.join(", ")))
        })
    }
}

/// Whether the task pool is fixed up front or grows during the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceMode {
    #[default]
    Finite,
    Infinite,
}

/// Which tasks the aggregate metrics cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricScope {
    /// Every evaluated task.
    #[default]
    All,
    /// Only the benchmark's ground-truth interesting tasks.
    Interesting,
}

/// Which training world the experiment drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldKind {
    /// The closed-form multi-task learner behind the named presets.
    #[default]
    Synthetic,
    /// The crafting environment with a tabular value learner.
    Chaincraft,
}

/// Which completion backend judges interestingness (and, in open-ended
/// runs, proposes tasks) for the omni condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JudgeBackend {
    /// Scripted rule: tasks naming a count above one are boring.
    MockRepeat,
    /// Scripted rule: counts and "and"-joined compounds are boring.
    MockCompound,
    /// Scripted rule: counts and non-canonical verbs are boring.
    MockSynonymPrior,
    /// Scripted rule: tasks purely over already-mastered items are boring;
    /// proposals target items one step past the mastered set.
    MockFrontier,
    /// A live HTTP completion endpoint.
    Http,
}

impl JudgeBackend {
    pub const ALL: [JudgeBackend; 5] = [
        JudgeBackend::MockRepeat,
        JudgeBackend::MockCompound,
        JudgeBackend::MockSynonymPrior,
        JudgeBackend::MockFrontier,
        JudgeBackend::Http,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            JudgeBackend::MockRepeat => "mock-repeat",
            JudgeBackend::MockCompound => "mock-compound",
            JudgeBackend::MockSynonymPrior => "mock-synonym-prior",
            JudgeBackend::MockFrontier => "mock-frontier",
            JudgeBackend::Http => "http",
        }
    }

    pub fn from_name(name: &str) -> Result<JudgeBackend> {
        JudgeBackend::ALL.iter().find(|b| b.name() == name).copied().ok_or_else(|| {
            let known: Vec<&str> = JudgeBackend::ALL.iter().map(|b| b.name()).collect();
            Error::Config(format!("unknown judge backend '{name}'; known: {}", known.join(", ")))
        })
    }
}

fn default_batch_size() -> u32 {
    16
}

fn default_partition_frequency() -> u32 {
    1
}

/// The `[experiment]` section: what to run and how long.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub conditions: Vec<Condition>,
    pub seeds: Vec<u64>,
    /// Training updates per run; each update trains on one batch.
    pub total_updates: u32,
    /// Tasks sampled (with replacement) per update.
    #[serde(default = "default_batch_size")]
    pub batch_size: u32,
    /// Evaluation rounds between interest re-partitions.
    #[serde(default = "default_partition_frequency")]
    pub partition_frequency_evals: u32,
    #[serde(default)]
    pub mode: SpaceMode,
    #[serde(default)]
    pub metric_scope: MetricScope,
    /// Count a task as learned only strictly above the threshold.
    #[serde(default)]
    pub alpha_strict: bool,
}

/// The `[world]` section: which world and how it is evaluated.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub kind: WorldKind,
    /// Named benchmark (finite synthetic runs).
    pub preset: Option<String>,
    /// Path to a crafting-world definition; the bundled chain when unset.
    pub spec_path: Option<String>,
    /// Rollouts per task per evaluation (crafting runs).
    pub eval_episodes: u32,
    /// Item chains seeding the open-ended task pool.
    pub seed_chains: Vec<Vec<String>>,
}

impl Default for WorldSection {
    fn default() -> Self {
        WorldSection {
            kind: WorldKind::Synthetic,
            preset: None,
            spec_path: None,
            eval_episodes: 32,
            seed_chains: vec![vec!["wood".to_string()]],
        }
    }
}

/// The `[moi]` section: how interestingness gets judged.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoiSection {
    pub backend: JudgeBackend,
    /// "crafter", "crafter-updated", or a template file path.
    pub template: String,
    /// Model name stamped on completion requests.
    pub model: String,
    /// Endpoint for the http backend; taken from the environment when unset.
    pub base_url: Option<String>,
}

impl Default for MoiSection {
    fn default() -> Self {
        MoiSection {
            backend: JudgeBackend::MockRepeat,
            template: "crafter".to_string(),
            model: "mock-model".to_string(),
            base_url: None,
        }
    }
}

/// The `[growth]` section: how the task pool grows in open-ended runs.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthSection {
    /// Updates between task-pool additions.
    pub add_frequency_updates: u32,
    /// New tasks per addition.
    pub tasks_per_addition: usize,
    /// Longest random chain (uniform and lp additions).
    pub max_chain: usize,
}

impl Default for GrowthSection {
    fn default() -> Self {
        GrowthSection { add_frequency_updates: 20, tasks_per_addition: 2, max_chain: 3 }
    }
}

/// A full experiment definition, loadable from TOML.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub world: WorldSection,
    #[serde(default)]
    pub curriculum: CurriculumConfig,
    #[serde(default)]
    pub moi: MoiSection,
    #[serde(default)]
    pub growth: GrowthSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("bad experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Reject configurations that cannot run: empty grids, zero cadences,
    /// and condition/world/judge combinations with no defined behavior.
    pub fn validate(&self) -> Result<()> {
        self.curriculum.validate()?;
        let exp = &self.experiment;
        if exp.conditions.is_empty() {
            return Err(Error::Config("need at least one condition".into()));
        }
        if exp.conditions.iter().collect::<BTreeSet<_>>().len() != exp.conditions.len() {
            return Err(Error::Config("conditions repeat".into()));
        }
        if exp.seeds.is_empty() {
            return Err(Error::Config("need at least one seed".into()));
        }
        if exp.seeds.iter().collect::<BTreeSet<_>>().len() != exp.seeds.len() {
            return Err(Error::Config("seeds repeat".into()));
        }
        if exp.total_updates == 0 {
            return Err(Error::Config("total_updates must be positive".into()));
        }
        if exp.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if exp.partition_frequency_evals == 0 {
            return Err(Error::Config("partition_frequency_evals must be positive".into()));
        }
        if self.world.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be positive".into()));
        }
        if self.growth.add_frequency_updates == 0 || self.growth.tasks_per_addition == 0 {
            return Err(Error::Config("growth cadence and count must be positive".into()));
        }
        if !(1..=MAX_TASK_STATES).contains(&self.growth.max_chain) {
            return Err(Error::Config(format!(
                "max_chain must lie in 1..={MAX_TASK_STATES}, got {}",
                self.growth.max_chain
            )));
        }

        match exp.mode {
            SpaceMode::Infinite => {
                if self.world.kind != WorldKind::Chaincraft {
                    return Err(Error::Config(
                        "open-ended runs drive the crafting world; set world.kind = \"chaincraft\""
                            .into(),
                    ));
                }
                for c in &exp.conditions {
                    if !matches!(c, Condition::Uniform | Condition::Lp | Condition::Omni) {
                        return Err(Error::Config(format!(
                            "condition {} is undefined for open-ended runs",
                            c.name()
                        )));
                    }
                }
                if exp.metric_scope == MetricScope::Interesting {
                    return Err(Error::Config(
                        "interesting-scope metrics need a finite benchmark".into(),
                    ));
                }
                if exp.conditions.contains(&Condition::Omni)
                    && !matches!(self.moi.backend, JudgeBackend::MockFrontier | JudgeBackend::Http)
                {
                    return Err(Error::Config(
                        "open-ended omni needs the mock-frontier judge or a live endpoint".into(),
                    ));
                }
                if self.world.seed_chains.is_empty() {
                    return Err(Error::Config("need at least one seed chain".into()));
                }
                for chain in &self.world.seed_chains {
                    if chain.is_empty() || chain.len() > MAX_TASK_STATES {
                        return Err(Error::Config(format!(
                            "seed chains must hold 1..={MAX_TASK_STATES} items"
                        )));
                    }
                }
            }
            SpaceMode::Finite => match self.world.kind {
                WorldKind::Synthetic => {
                    let name = self.world.preset.as_deref().ok_or_else(|| {
                        Error::Config("finite synthetic runs need world.preset".into())
                    })?;
                    Preset::from_name(name)?.benchmark()?;
                    if exp.conditions.contains(&Condition::Omni)
                        && self.moi.backend == JudgeBackend::MockFrontier
                    {
                        return Err(Error::Config(
                            "the mock-frontier judge reads crafting-world task names; pick a \
                             name-rule judge for synthetic benchmarks"
                                .into(),
                        ));
                    }
                }
                WorldKind::Chaincraft => {
                    for c in &exp.conditions {
                        if !matches!(c, Condition::Uniform | Condition::Lp) {
                            return Err(Error::Config(format!(
                                "fixed crafting runs support uniform and lp, not {}",
                                c.name()
                            )));
                        }
                    }
                    if exp.metric_scope == MetricScope::Interesting {
                        return Err(Error::Config(
                            "interesting-scope metrics need a synthetic benchmark".into(),
                        ));
                    }
                }
            },
        }
        Ok(())
    }
}

/// One task's evaluation under one condition, seed, and round.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRow {
    pub condition: Condition,
    pub seed: u64,
    pub round: u32,
    pub task_id: TaskId,
    pub success: f64,
    /// Sampling weight in force after this round's reweighting.
    pub weight: f64,
}

/// Scalar metrics for one (condition, seed, round).
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub condition: Condition,
    pub seed: u64,
    pub round: u32,
    pub avg_success: f64,
    pub learned_count: usize,
    /// Cross-seed bootstrap interval of the learned count at this round,
    /// repeated on each seed's row.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// A run that died, with the error that killed it. Other runs continue.
#[derive(Debug, Clone)]
pub struct SeedFailure {
    pub condition: Condition,
    pub seed: u64,
    pub error: String,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, Default)]
pub struct ExperimentRecord {
    pub task_rows: Vec<TaskRow>,
    pub aggregate_rows: Vec<AggregateRow>,
    pub failures: Vec<SeedFailure>,
}

impl ExperimentRecord {
    /// Conditions present, in enum order.
    pub fn conditions(&self) -> Vec<Condition> {
        self.aggregate_rows.iter().map(|r| r.condition).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Last evaluation round recorded for a condition.
    pub fn final_round(&self, condition: Condition) -> Option<u32> {
        self.aggregate_rows.iter().filter(|r| r.condition == condition).map(|r| r.round).max()
    }

    /// Learned-task counts across seeds for one condition and round, in the
    /// order the rows were recorded (seed order).
    pub fn learned_counts(&self, condition: Condition, round: u32) -> Vec<f64> {
        self.aggregate_rows
            .iter()
            .filter(|r| r.condition == condition && r.round == round)
            .map(|r| r.learned_count as f64)
            .collect()
    }

    /// Average success across seeds for one condition and round.
    pub fn avg_successes(&self, condition: Condition, round: u32) -> Vec<f64> {
        self.aggregate_rows
            .iter()
            .filter(|r| r.condition == condition && r.round == round)
            .map(|r| r.avg_success)
            .collect()
    }
}

/// Scripted interestingness judge for crafting-world task names: a task
/// stays interesting while it involves an item absent from the judge's
/// done-well context; tasks purely over mastered items are boring.
pub fn chaincraft_frontier_moi_reply(prompt: &str) -> String {
    let mastered: BTreeSet<String> =
        prompt_done_well(prompt).iter().flat_map(|name| chain_from_task_name(name)).collect();
    let verdicts: Vec<(String, bool)> = prompt_candidates(prompt)
        .into_iter()
        .map(|name| {
            let fresh =
                chain_from_task_name(&name).iter().any(|item| !mastered.contains(item));
            (name, fresh)
        })
        .collect();
    render_verdict_lines(&verdicts)
}

/// Items named by the done-well task listing of a proposal prompt.
fn proposal_prompt_mastered_items(prompt: &str) -> BTreeSet<String> {
    let mut mastered = BTreeSet::new();
    let Some(start) = prompt.find(DONE_WELL_HEADER) else {
        return mastered;
    };
    let section = &prompt[start + DONE_WELL_HEADER.len()..];
    let section = match section.find(CANNOT_DO_HEADER) {
        Some(end) => &section[..end],
        None => section,
    };
    for line in section.lines() {
        let Some(code) = line.trim().strip_prefix("- ") else { continue };
        let Ok(task) = parse_task(code) else { continue };
        for state in task.states() {
            for req in state.objects() {
                mastered.insert(req.object().to_string());
            }
        }
    }
    mastered
}

/// Scripted stand-in for a proposer model on the crafting world: reads the
/// mastered items out of the proposal prompt's done-well listing, finds the
/// items one step past them, and proposes practice chains — rehearse the
/// deepest prerequisite, then obtain the new item. With nothing new in
/// reach it re-proposes a known task (which callers dedup away).
pub fn chaincraft_frontier_proposal_reply(
    spec: &ChainCraftSpec,
    prompt: &str,
    count: usize,
) -> String {
    let mastered = proposal_prompt_mastered_items(prompt);
    let frontier = frontier_items(spec, &mastered);
    let mut chains: Vec<Vec<String>> = if frontier.is_empty() {
        mastered.iter().take(1).map(|item| vec![item.clone()]).collect()
    } else {
        frontier
            .iter()
            .take(count.max(1))
            .map(|item| match practice_prereq(spec, item, &mastered) {
                Some(prereq) => vec![prereq, item.clone()],
                None => vec![item.clone()],
            })
            .collect()
    };
    if chains.is_empty() {
        let fallback = spec.items.iter().next().expect("validated worlds have items");
        chains.push(vec![fallback.clone()]);
    }
    let nl_tasks: Vec<String> = chains.iter().map(|chain| chain_task_name(spec, chain)).collect();
    let code_tasks: Vec<TaskSpec> = chains
        .iter()
        .map(|chain| possession_task(chain).expect("chains over known items build"))
        .collect();
    let reasoning = if mastered.is_empty() {
        "Nothing is mastered yet, so start with what needs no prerequisites.".to_string()
    } else {
        format!(
            "Mastered items: {}. The next reachable items are worth practicing with their \
             hardest prerequisite first.",
            mastered.iter().cloned().collect::<Vec<_>>().join(", ")
        )
    };
    render_proposal(&Proposal { reasoning, nl_tasks, code_tasks })
}

fn http_backend(moi: &MoiSection) -> Result<Box<dyn CompletionBackend>> {
    Ok(match &moi.base_url {
        Some(url) => {
            let key = std::env::var(crate::fmclient::ENV_API_KEY).map_err(|_| {
                Error::Config(format!("{} is not set", crate::fmclient::ENV_API_KEY))
            })?;
            Box::new(HttpBackend::new(url.clone(), key))
        }
        None => Box::new(HttpBackend::from_env()?),
    })
}

fn judge_backend(moi: &MoiSection) -> Result<Box<dyn CompletionBackend>> {
    fn scripted(reply: fn(&str) -> String) -> Box<dyn CompletionBackend> {
        Box::new(
            MockBackend::strict()
                .rule_fn(Matcher::contains("interesting"), move |request| {
                    reply(&request.user_text)
                }),
        )
    }
    Ok(match moi.backend {
        JudgeBackend::MockRepeat => scripted(crafter_repeat_rule_reply),
        JudgeBackend::MockCompound => scripted(crafter_compound_rule_reply),
        JudgeBackend::MockSynonymPrior => scripted(crafter_synonym_prior_reply),
        JudgeBackend::MockFrontier => scripted(chaincraft_frontier_moi_reply),
        JudgeBackend::Http => http_backend(moi)?,
    })
}

fn judge_template(name: &str) -> Result<PromptTemplate> {
    match name {
        "crafter" => Ok(PromptTemplate::crafter()),
        "crafter-updated" => Ok(PromptTemplate::crafter_updated()),
        path => PromptTemplate::from_file(path, false),
    }
}

/// Build a one-shot judge around a fresh client. Partitions reuse nothing
/// across rounds (the done-well context changes every time), so a fresh
/// client keeps the response cache from accumulating for the whole run.
pub fn build_judge(moi: &MoiSection) -> Result<FmMoi> {
    let client = Arc::new(FmClient::new(judge_backend(moi)?));
    let template = judge_template(&moi.template)?;
    let config = FmMoiConfig { model_name: moi.model.clone(), ..FmMoiConfig::default() };
    FmMoi::new(client, template, config)
}

/// Ask the proposer for the next tasks (open-ended omni runs).
fn propose_frontier_tasks(
    config: &ExperimentConfig,
    spec: &ChainCraftSpec,
    archive: &TaskArchive,
    affordances: &AffordanceTable,
) -> Result<Vec<ArchiveLine>> {
    let count = config.growth.tasks_per_addition;
    let backend: Box<dyn CompletionBackend> = match config.moi.backend {
        JudgeBackend::Http => http_backend(&config.moi)?,
        _ => {
            let spec = spec.clone();
            Box::new(MockBackend::strict().rule_fn(
                Matcher::contains(DONE_WELL_HEADER),
                move |request| chaincraft_frontier_proposal_reply(&spec, &request.user_text, count),
            ))
        }
    };
    let client = Arc::new(FmClient::new(backend));
    let proposer_config = ProposerConfig {
        model_name: config.moi.model.clone(),
        ..ProposerConfig::default()
    }
    .with_requested_tasks(count);
    let proposer = TaskProposer::new(client, proposer_config)?;
    let mut lines = proposer.propose_tasks(archive, affordances)?;
    lines.truncate(count);
    Ok(lines)
}

/// What one run produced before cross-seed statistics.
#[derive(Debug, Default)]
struct SeedRun {
    task_rows: Vec<TaskRow>,
    aggregate_rows: Vec<AggregateRow>,
}

/// Everything a finite run needs from its world.
struct FiniteWorld {
    world: Box<dyn World>,
    /// Ground-truth interesting ids (synthetic presets only).
    interesting: Option<BTreeSet<TaskId>>,
}

fn build_finite_world(config: &ExperimentConfig, seed: u64) -> Result<FiniteWorld> {
    match config.world.kind {
        WorldKind::Synthetic => {
            let name = config
                .world
                .preset
                .as_deref()
                .ok_or_else(|| Error::Config("finite synthetic runs need world.preset".into()))?;
            let benchmark = Preset::from_name(name)?.benchmark()?;
            let interesting = benchmark.interesting.clone();
            Ok(FiniteWorld { world: Box::new(benchmark.world()), interesting: Some(interesting) })
        }
        WorldKind::Chaincraft => {
            let world = ChainCraftWorld::wood_chain_world(seed)?;
            Ok(FiniteWorld { world: Box::new(world), interesting: None })
        }
    }
}

/// Recompute the sampling distribution after an evaluation round.
///
/// Interest-filtered conditions re-partition on the configured cadence and
/// hold the verdicts in `verdicts` between partitions; tasks added since the
/// last partition count as interesting until one looks at them.
fn next_distribution(
    config: &ExperimentConfig,
    condition: Condition,
    curriculum: &CurriculumState,
    oracle_verdicts: Option<&BTreeMap<TaskId, bool>>,
    verdicts: &mut BTreeMap<TaskId, bool>,
    round: u32,
) -> Result<SamplingDistribution> {
    let multiplier = config.curriculum.boring_multiplier;
    match condition {
        Condition::Uniform => SamplingDistribution::uniform(curriculum.task_ids().cloned()),
        Condition::Lp => curriculum.weights(),
        Condition::Oracle => {
            let weights = curriculum.weights()?;
            let truth = oracle_verdicts.expect("oracle runs prepare their verdicts up front");
            compose_with_interest(&weights, truth, multiplier)
        }
        Condition::Omni | Condition::OmniEmbed => {
            let weights = curriculum.weights()?;
            if (round - 1) % config.experiment.partition_frequency_evals == 0 {
                let rates = curriculum.smoothed_success();
                let result = if condition == Condition::Omni {
                    let judge = build_judge(&config.moi)?;
                    partition(&rates, &judge)?
                } else {
                    partition(&rates, &EmbeddingMoi::default())?
                };
                *verdicts = result.classification();
            }
            let mut filled = verdicts.clone();
            for id in curriculum.task_ids() {
                filled.entry(id.clone()).or_insert(true);
            }
            compose_with_interest(&weights, &filled, multiplier)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn record_round(
    run: &mut SeedRun,
    condition: Condition,
    seed: u64,
    round: u32,
    evals: &BTreeMap<TaskId, f64>,
    dist: &SamplingDistribution,
    metric_filter: Option<&BTreeSet<TaskId>>,
    alpha: f64,
    strict: bool,
) {
    for (id, success) in evals {
        run.task_rows.push(TaskRow {
            condition,
            seed,
            round,
            task_id: id.clone(),
            success: *success,
            weight: dist.weight(id).unwrap_or(0.0),
        });
    }
    let scoped: Vec<f64> = evals
        .iter()
        .filter(|(id, _)| metric_filter.is_none_or(|keep| keep.contains(*id)))
        .map(|(_, v)| *v)
        .collect();
    let avg_success =
        if scoped.is_empty() { 0.0 } else { scoped.iter().sum::<f64>() / scoped.len() as f64 };
    let learned_count = if strict {
        stats::count_learned_strict(&scoped, alpha)
    } else {
        stats::count_learned(&scoped, alpha)
    };
    run.aggregate_rows.push(AggregateRow {
        condition,
        seed,
        round,
        avg_success,
        learned_count,
        ci_low: f64::NAN,
        ci_high: f64::NAN,
    });
}

fn run_seed_finite(config: &ExperimentConfig, condition: Condition, seed: u64) -> Result<SeedRun> {
    let setup = build_finite_world(config, seed)?;
    let mut world = setup.world;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curriculum = CurriculumState::new(config.curriculum.clone())?;
    let ids = world.task_ids();
    for id in &ids {
        curriculum.add_task(id.clone(), world.random_success(id)?)?;
    }

    let oracle_verdicts: Option<BTreeMap<TaskId, bool>> = match condition {
        Condition::Oracle => {
            let interesting = setup.interesting.as_ref().ok_or_else(|| {
                Error::Config("the oracle condition needs a ground-truth interesting set".into())
            })?;
            Some(ids.iter().map(|id| (id.clone(), interesting.contains(id))).collect())
        }
        _ => None,
    };
    let metric_filter: Option<&BTreeSet<TaskId>> = match config.experiment.metric_scope {
        MetricScope::All => None,
        MetricScope::Interesting => Some(setup.interesting.as_ref().ok_or_else(|| {
            Error::Config("interesting-scope metrics need a ground-truth set".into())
        })?),
    };

    let alpha = config.curriculum.alpha_learned_threshold;
    let strict = config.experiment.alpha_strict;
    let eval_every = config.curriculum.eval_frequency_updates;
    let mut dist = SamplingDistribution::uniform(ids.iter().cloned())?;
    let mut verdicts: BTreeMap<TaskId, bool> = BTreeMap::new();
    let mut run = SeedRun::default();
    let mut round = 0u32;

    for update in 1..=config.experiment.total_updates {
        let batch: Vec<TaskId> =
            (0..config.experiment.batch_size).map(|_| dist.sample(&mut rng).clone()).collect();
        world.train(&batch, &mut rng)?;
        if update % eval_every == 0 {
            round += 1;
            let evals = world.evaluate(&mut rng)?;
            curriculum.record_evaluation(&evals)?;
            dist = next_distribution(
                config,
                condition,
                &curriculum,
                oracle_verdicts.as_ref(),
                &mut verdicts,
                round,
            )?;
            record_round(
                &mut run,
                condition,
                seed,
                round,
                &evals,
                &dist,
                metric_filter,
                alpha,
                strict,
            );
        }
    }
    Ok(run)
}

fn run_seed_infinite(
    config: &ExperimentConfig,
    condition: Condition,
    seed: u64,
) -> Result<SeedRun> {
    let spec = match &config.world.spec_path {
        Some(path) => ChainCraftSpec::from_path(Path::new(path))?,
        None => ChainCraftSpec::wood_chain(),
    };
    let mut seed_tasks: Vec<(TaskId, TaskSpec)> = Vec::new();
    for chain in &config.world.seed_chains {
        let name = chain_task_name(&spec, chain);
        seed_tasks.push((TaskId::new(name), possession_task(chain)?));
    }
    let mut world = ChainCraftWorld::new(
        spec.clone(),
        seed_tasks.clone(),
        LearnerConfig::default(),
        config.world.eval_episodes,
        seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curriculum = CurriculumState::new(config.curriculum.clone())?;
    for id in world.task_ids() {
        curriculum.add_task(id.clone(), world.random_success(&id)?)?;
    }

    let alpha = config.curriculum.alpha_learned_threshold;
    let strict = config.experiment.alpha_strict;
    let eval_every = config.curriculum.eval_frequency_updates;
    let omni = condition == Condition::Omni;

    // The omni proposer works from an archive of everything tried so far,
    // keyed by canonical task identity; names map into it.
    let mut archive = TaskArchive::new(alpha)?;
    let mut archive_ids: BTreeMap<TaskId, TaskId> = BTreeMap::new();
    if omni {
        for (id, task) in &seed_tasks {
            archive_ids.insert(id.clone(), canonicalize(task, Abstraction::None));
            archive.add(task.clone(), Some(id.as_str().to_string()));
        }
    }
    let affordances = item_affordances(&spec)?;

    let mut ever_sampled: BTreeSet<TaskId> = BTreeSet::new();
    let mut dist = SamplingDistribution::uniform(world.task_ids())?;
    let mut verdicts: BTreeMap<TaskId, bool> = BTreeMap::new();
    let mut run = SeedRun::default();
    let mut round = 0u32;

    for update in 1..=config.experiment.total_updates {
        let batch: Vec<TaskId> =
            (0..config.experiment.batch_size).map(|_| dist.sample(&mut rng).clone()).collect();
        for id in &batch {
            ever_sampled.insert(id.clone());
            if omni {
                if let Some(canonical) = archive_ids.get(id) {
                    archive.note_sampled(canonical)?;
                }
            }
        }
        world.train(&batch, &mut rng)?;

        if update % eval_every == 0 {
            round += 1;
            let mut evals = world.evaluate(&mut rng)?;
            evals.retain(|id, _| ever_sampled.contains(id));
            curriculum.record_partial_evaluation(&evals)?;
            if omni {
                for (id, success) in &evals {
                    if let Some(canonical) = archive_ids.get(id) {
                        archive.set_success(canonical, *success)?;
                    }
                }
            }
            dist = next_distribution(config, condition, &curriculum, None, &mut verdicts, round)?;
            record_round(&mut run, condition, seed, round, &evals, &dist, None, alpha, strict);
        }

        if update % config.growth.add_frequency_updates == 0 {
            let additions: Vec<(TaskId, TaskSpec)> = if omni {
                propose_frontier_tasks(config, &spec, &archive, &affordances)?
                    .into_iter()
                    .map(|line| {
                        let name = line
                            .natural_language
                            .unwrap_or_else(|| chain_task_name(&spec, &chain_of(&line.spec)));
                        (TaskId::new(name), line.spec)
                    })
                    .collect()
            } else {
                random_chain_tasks(
                    &spec,
                    &mut rng,
                    config.growth.tasks_per_addition,
                    config.growth.max_chain,
                )?
            };
            for (id, task) in additions {
                if curriculum.contains(&id) {
                    continue;
                }
                world.add_task(&id, &task)?;
                curriculum.add_task(id.clone(), world.random_success(&id)?)?;
                if omni {
                    archive_ids.insert(id.clone(), canonicalize(&task, Abstraction::None));
                    archive.add(task, Some(id.as_str().to_string()));
                }
            }
            // New tasks join the sampling distribution at the next
            // evaluation round, when their weights first exist.
        }
    }
    Ok(run)
}

/// The item sequence a possession task walks through (first object of each
/// state).
fn chain_of(task: &TaskSpec) -> Vec<String> {
    task.states()
        .iter()
        .filter_map(|state| state.objects().first().map(|req| req.object().to_string()))
        .collect()
}

fn run_seed(config: &ExperimentConfig, condition: Condition, seed: u64) -> Result<SeedRun> {
    match config.experiment.mode {
        SpaceMode::Finite => run_seed_finite(config, condition, seed),
        SpaceMode::Infinite => run_seed_infinite(config, condition, seed),
    }
}

fn interval_seed(condition: Condition, round: u32) -> u64 {
    let mut bytes = condition.name().as_bytes().to_vec();
    bytes.extend_from_slice(&round.to_le_bytes());
    fnv1a(&bytes)
}

/// Fill every aggregate row's confidence interval with the cross-seed
/// bootstrap of the learned count at its (condition, round).
fn fill_intervals(record: &mut ExperimentRecord) -> Result<()> {
    let mut by_key: BTreeMap<(Condition, u32), Vec<f64>> = BTreeMap::new();
    for row in &record.aggregate_rows {
        by_key.entry((row.condition, row.round)).or_default().push(row.learned_count as f64);
    }
    let mut intervals: BTreeMap<(Condition, u32), (f64, f64)> = BTreeMap::new();
    for ((condition, round), counts) in by_key {
        let mut rng = ChaCha8Rng::seed_from_u64(interval_seed(condition, round));
        let ci = stats::bootstrap_ci(&counts, stats::BOOTSTRAP_ITERS, stats::CONFIDENCE_LEVEL, &mut rng)?;
        intervals.insert((condition, round), (ci.low, ci.high));
    }
    for row in &mut record.aggregate_rows {
        let (low, high) = intervals[&(row.condition, row.round)];
        row.ci_low = low;
        row.ci_high = high;
    }
    Ok(())
}

/// Run the whole grid: every condition over every seed (seeds in parallel),
/// then fill in cross-seed confidence intervals. A failed run is recorded
/// in `failures` and does not stop the rest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    config.validate()?;
    let mut record = ExperimentRecord::default();
    for &condition in &config.experiment.conditions {
        let results: Vec<(u64, Result<SeedRun>)> = std::thread::scope(|scope| {
            let handles: Vec<_> = config
                .experiment
                .seeds
                .iter()
                .map(|&seed| (seed, scope.spawn(move || run_seed(config, condition, seed))))
                .collect();
            handles
                .into_iter()
                .map(|(seed, handle)| (seed, handle.join().expect("run worker panicked")))
                .collect()
        });
        for (seed, result) in results {
            match result {
                Ok(seed_run) => {
                    record.task_rows.extend(seed_run.task_rows);
                    record.aggregate_rows.extend(seed_run.aggregate_rows);
                }
                Err(e) => {
                    record.failures.push(SeedFailure { condition, seed, error: e.to_string() })
                }
            }
        }
    }
    fill_intervals(&mut record)?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_toml() -> &'static str {
        r#"
            [experiment]
            conditions = ["uniform", "lp"]
            seeds = [1, 2]
            total_updates = 40
            batch_size = 8

            [world]
            kind = "synthetic"
            preset = "crafter-repeats"

            [curriculum]
            eval_frequency_updates = 10
        "#
    }

    #[test]
    fn config_parses_with_defaults() {
        let config = ExperimentConfig::from_toml_str(base_toml()).unwrap();
        assert_eq!(config.experiment.conditions, vec![Condition::Uniform, Condition::Lp]);
        assert_eq!(config.experiment.batch_size, 8);
        assert_eq!(config.experiment.partition_frequency_evals, 1);
        assert_eq!(config.experiment.mode, SpaceMode::Finite);
        assert_eq!(config.experiment.metric_scope, MetricScope::All);
        assert_eq!(config.moi.backend, JudgeBackend::MockRepeat);
        assert_eq!(config.growth.add_frequency_updates, 20);
        assert_eq!(config.world.seed_chains, vec![vec!["wood".to_string()]]);
    }

    #[test]
    fn condition_names_round_trip() {
        for c in Condition::ALL {
            assert_eq!(Condition::from_name(c.name()).unwrap(), c);
        }
        assert!(Condition::from_name("bogus").is_err());
        for b in JudgeBackend::ALL {
            assert_eq!(JudgeBackend::from_name(b.name()).unwrap(), b);
        }
    }

    #[test]
    fn bad_combinations_are_rejected() {
        let reject = |patch: &str, needle: &str| {
            let text = format!("{}\n{}", base_toml(), patch);
            let err = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
            assert!(err.contains(needle), "expected '{needle}' in: {err}");
        };
        // Open-ended runs on the synthetic world.
        reject("[experiment.extra]", "unknown field"); // sanity: deny_unknown_fields bites
        let infinite_synth = base_toml().replace(
            "total_updates = 40",
            "total_updates = 40\nmode = \"infinite\"",
        );
        let err = ExperimentConfig::from_toml_str(&infinite_synth).unwrap_err().to_string();
        assert!(err.contains("chaincraft"), "{err}");

        // Oracle without a ground-truth benchmark.
        let oracle_chain = base_toml()
            .replace("[\"uniform\", \"lp\"]", "[\"oracle\"]")
            .replace("kind = \"synthetic\"", "kind = \"chaincraft\"")
            .replace("preset = \"crafter-repeats\"", "");
        let err = ExperimentConfig::from_toml_str(&oracle_chain).unwrap_err().to_string();
        assert!(err.contains("uniform and lp"), "{err}");

        // Frontier judge on a synthetic benchmark.
        let frontier_synth = format!(
            "{}\n[moi]\nbackend = \"mock-frontier\"",
            base_toml().replace("[\"uniform\", \"lp\"]", "[\"omni\"]")
        );
        let err = ExperimentConfig::from_toml_str(&frontier_synth).unwrap_err().to_string();
        assert!(err.contains("crafting-world task names"), "{err}");
    }

    #[test]
    fn uniform_rows_keep_uniform_weights() {
        let config = ExperimentConfig::from_toml_str(base_toml()).unwrap();
        let record = run_experiment(&config).unwrap();
        assert!(record.failures.is_empty(), "{:?}", record.failures);
        let uniform_rows: Vec<&TaskRow> =
            record.task_rows.iter().filter(|r| r.condition == Condition::Uniform).collect();
        assert!(!uniform_rows.is_empty());
        let expected = 1.0 / 1128.0; // crafter-repeats census
        for row in &uniform_rows {
            assert!((row.weight - expected).abs() < 1e-12, "weight {}", row.weight);
        }
        // Four rounds of 40/10 updates, two seeds, two conditions.
        assert_eq!(record.aggregate_rows.len(), 2 * 2 * 4);
        assert!(record.aggregate_rows.iter().all(|r| r.ci_low.is_finite() && r.ci_high.is_finite()));
    }

    #[test]
    fn runs_are_reproducible() {
        let config = ExperimentConfig::from_toml_str(base_toml()).unwrap();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(a.task_rows, b.task_rows);
        assert_eq!(a.aggregate_rows, b.aggregate_rows);
    }

    #[test]
    fn interest_conditions_suppress_boring_tasks() {
        // On the repeats benchmark the repeat judge and the oracle agree:
        // after the first partition, every count-named task should carry
        // roughly a thousandth of an interesting task's weight.
        let text = base_toml().replace("[\"uniform\", \"lp\"]", "[\"omni\", \"oracle\"]");
        let config = ExperimentConfig::from_toml_str(&text).unwrap();
        let record = run_experiment(&config).unwrap();
        assert!(record.failures.is_empty(), "{:?}", record.failures);
        for condition in [Condition::Omni, Condition::Oracle] {
            let last = record.final_round(condition).unwrap();
            let rows: Vec<&TaskRow> = record
                .task_rows
                .iter()
                .filter(|r| r.condition == condition && r.round == last && r.seed == 1)
                .collect();
            let boring_max = rows
                .iter()
                .filter(|r| r.task_id.as_str().contains(" 2 "))
                .map(|r| r.weight)
                .fold(0.0f64, f64::max);
            let interesting_min = rows
                .iter()
                .filter(|r| r.task_id.as_str() == "collect wood")
                .map(|r| r.weight)
                .fold(f64::INFINITY, f64::min);
            assert!(
                boring_max < interesting_min * 0.01,
                "{}: boring {} vs interesting {}",
                condition.name(),
                boring_max,
                interesting_min
            );
        }
    }

    #[test]
    fn open_ended_runs_grow_their_task_pool() {
        let text = r#"
            [experiment]
            conditions = ["uniform", "lp", "omni"]
            seeds = [3]
            total_updates = 60
            batch_size = 8
            mode = "infinite"

            [world]
            kind = "chaincraft"
            eval_episodes = 8

            [curriculum]
            eval_frequency_updates = 10
            alpha_learned_threshold = 0.6

            [moi]
            backend = "mock-frontier"

            [growth]
            add_frequency_updates = 15
            tasks_per_addition = 2
            max_chain = 3
        "#;
        let config = ExperimentConfig::from_toml_str(text).unwrap();
        let record = run_experiment(&config).unwrap();
        assert!(record.failures.is_empty(), "{:?}", record.failures);
        for condition in [Condition::Uniform, Condition::Lp, Condition::Omni] {
            let first: BTreeSet<&TaskId> = record
                .task_rows
                .iter()
                .filter(|r| r.condition == condition && r.round == 1)
                .map(|r| &r.task_id)
                .collect();
            let last_round = record.final_round(condition).unwrap();
            let last: BTreeSet<&TaskId> = record
                .task_rows
                .iter()
                .filter(|r| r.condition == condition && r.round == last_round)
                .map(|r| &r.task_id)
                .collect();
            assert!(
                last.len() > first.len(),
                "{}: pool {} -> {}",
                condition.name(),
                first.len(),
                last.len()
            );
        }
    }

    #[test]
    fn frontier_judge_marks_mastered_only_tasks_boring() {
        let prompt = "You can do these tasks well: collect wood, place table.\n\
                      Suggest whether the given tasks are interesting: collect wood then \
                      collect wood, make wood pickaxe, place table.";
        let reply = chaincraft_frontier_moi_reply(prompt);
        assert_eq!(
            reply,
            "collect wood then collect wood: False\n\
             make wood pickaxe: True\n\
             place table: False\n"
        );
    }

    #[test]
    fn frontier_proposals_practice_the_prerequisite() {
        let spec = ChainCraftSpec::wood_chain();
        let prompt = format!(
            "{DONE_WELL_HEADER}\n- {}\n- {}\n{CANNOT_DO_HEADER}",
            r#"[[obj_attributes("wood", {"visible": True})]]"#,
            r#"[[obj_attributes("table", {"visible": True})]]"#,
        );
        let reply = chaincraft_frontier_proposal_reply(&spec, &prompt, 2);
        // The deepest prerequisite of both pickaxe and sword is the table.
        assert!(reply.contains("place table then make wood pickaxe"), "{reply}");
        assert!(reply.contains("place table then make wood sword"), "{reply}");
        let proposal = crate::proposer::parse_proposal(&reply).unwrap();
        assert_eq!(proposal.nl_tasks.len(), 2);
        assert_eq!(proposal.code_tasks.len(), 2);
    }

    #[test]
    fn cold_start_proposals_start_at_the_root() {
        let spec = ChainCraftSpec::wood_chain();
        let prompt = format!("{DONE_WELL_HEADER}\n{CANNOT_DO_HEADER}");
        let reply = chaincraft_frontier_proposal_reply(&spec, &prompt, 3);
        let proposal = crate::proposer::parse_proposal(&reply).unwrap();
        assert_eq!(proposal.nl_tasks, vec!["collect wood".to_string()]);
    }
}

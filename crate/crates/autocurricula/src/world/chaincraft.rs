//! ChainCraft: a miniature crafting environment with a tabular learner.
//!
//! Items are gathered (optionally requiring a tool, succeeding with some
//! probability) or crafted from consumed inputs (optionally requiring a
//! non-consumed crafting station). Tasks are environment-state sequences
//! over item possession, checked by the shared task-progress machinery, so
//! the same completion logic serves this world and the kitchen DSL.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::taskdsl::{
    advance_progress, canonicalize, Abstraction, AffordanceTable, Attribute,
    AttributeRequirement, EnvStateSpec, ObjectRequirement, ObjectState, TaskId, TaskProgress,
    TaskSpec, WorldSnapshot,
};

use super::World;

/// 64-bit FNV-1a — a stable, dependency-free hash for state keys and
/// deterministic seed derivation.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Obtain one unit of an item from the world.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatherAction {
    pub item: String,
    /// Item that must be held (not consumed) for the gather to work.
    #[serde(default)]
    pub tool: Option<String>,
    /// Chance each attempt yields the item.
    pub success_prob: f64,
}

/// Turn consumed inputs into one unit of the output.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CraftRecipe {
    pub output: String,
    /// Input item → units consumed per craft.
    pub inputs: BTreeMap<String, u32>,
    /// Item that must be held (not consumed) to craft, e.g. a workbench.
    #[serde(default)]
    pub station: Option<String>,
}

/// The environment definition: item vocabulary, actions, and episode shape.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainCraftSpec {
    pub items: BTreeSet<String>,
    #[serde(default)]
    pub gathers: Vec<GatherAction>,
    #[serde(default)]
    pub recipes: Vec<CraftRecipe>,
    /// Episode step budget per environment state of the task being run.
    #[serde(default = "default_horizon_per_state")]
    pub horizon_per_state: u32,
    /// Reward subtracted every step.
    #[serde(default = "default_step_penalty")]
    pub step_penalty: f64,
    /// Reward added when the task completes.
    #[serde(default = "default_completion_reward")]
    pub completion_reward: f64,
}

fn default_horizon_per_state() -> u32 {
    50
}

fn default_step_penalty() -> f64 {
    0.01
}

fn default_completion_reward() -> f64 {
    1.0
}

/// Inventory signatures pack 2 bits per item into a u64.
const MAX_ITEMS: usize = 32;
/// Item counts are clamped to this many units when forming learner states.
const SIGNATURE_COUNT_CAP: u32 = 3;

impl ChainCraftSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ChainCraftSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad world spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::Config("world needs at least one item".into()));
        }
        if self.items.len() > MAX_ITEMS {
            return Err(Error::Config(format!(
                "at most {MAX_ITEMS} items supported, got {}",
                self.items.len()
            )));
        }
        let known = |name: &String| self.items.contains(name);
        for gather in &self.gathers {
            if !known(&gather.item) {
                return Err(Error::Config(format!("gather of unknown item {}", gather.item)));
            }
            if let Some(tool) = &gather.tool {
                if !known(tool) {
                    return Err(Error::Config(format!("gather tool {tool} is not an item")));
                }
            }
            if !gather.success_prob.is_finite()
                || gather.success_prob <= 0.0
                || gather.success_prob > 1.0
            {
                return Err(Error::Config(format!(
                    "gather probability for {} must lie in (0, 1], got {}",
                    gather.item, gather.success_prob
                )));
            }
        }
        for recipe in &self.recipes {
            if !known(&recipe.output) {
                return Err(Error::Config(format!("recipe for unknown item {}", recipe.output)));
            }
            if recipe.inputs.is_empty() {
                return Err(Error::Config(format!("recipe for {} consumes nothing", recipe.output)));
            }
            for (input, units) in &recipe.inputs {
                if !known(input) {
                    return Err(Error::Config(format!(
                        "recipe for {} uses unknown item {input}",
                        recipe.output
                    )));
                }
                if *units == 0 {
                    return Err(Error::Config(format!(
                        "recipe for {} lists a zero-unit input",
                        recipe.output
                    )));
                }
            }
            if let Some(station) = &recipe.station {
                if !known(station) {
                    return Err(Error::Config(format!("station {station} is not an item")));
                }
            }
        }
        if !self.step_penalty.is_finite() || self.step_penalty < 0.0 {
            return Err(Error::Config("step penalty must be non-negative".into()));
        }
        if self.horizon_per_state == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        self.check_recipes_acyclic()
    }

    /// Crafting chains must bottom out in gatherable items.
    fn check_recipes_acyclic(&self) -> Result<()> {
        // Edge input → output; Kahn's algorithm over items.
        let items: Vec<&String> = self.items.iter().collect();
        let index: BTreeMap<&String, usize> =
            items.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut indegree = vec![0usize; items.len()];
        let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); items.len()];
        for recipe in &self.recipes {
            let out = index[&recipe.output];
            for input in recipe.inputs.keys() {
                indegree[out] += 1;
                dependents[index[input]].push(out);
            }
        }
        let mut ready: Vec<usize> = (0..items.len()).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for &j in &dependents[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(j);
                }
            }
        }
        if seen != items.len() {
            return Err(Error::Config("recipe graph has a cycle".into()));
        }
        Ok(())
    }

    /// Total number of actions: every gather, then every recipe.
    pub fn action_count(&self) -> usize {
        self.gathers.len() + self.recipes.len()
    }

    pub fn horizon(&self, task: &TaskSpec) -> u32 {
        self.horizon_per_state * task.len() as u32
    }

    /// A small technology chain: wood → table → tools → stone → furnace →
    /// iron gear, plus one item nothing can produce.
    pub fn wood_chain() -> Self {
        let items: BTreeSet<String> = [
            "wood", "table", "wood_pickaxe", "wood_sword", "stone", "stone_pickaxe", "furnace",
            "coal", "iron", "iron_pickaxe", "diamond", "pearl",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let gather = |item: &str, tool: Option<&str>, p: f64| GatherAction {
            item: item.into(),
            tool: tool.map(String::from),
            success_prob: p,
        };
        let recipe = |output: &str, inputs: &[(&str, u32)], station: Option<&str>| CraftRecipe {
            output: output.into(),
            inputs: inputs.iter().map(|(i, n)| (i.to_string(), *n)).collect(),
            station: station.map(String::from),
        };
        let spec = ChainCraftSpec {
            items,
            gathers: vec![
                gather("wood", None, 1.0),
                gather("stone", Some("wood_pickaxe"), 0.9),
                gather("coal", Some("wood_pickaxe"), 0.9),
                gather("iron", Some("stone_pickaxe"), 0.9),
                gather("diamond", Some("iron_pickaxe"), 0.8),
            ],
            recipes: vec![
                recipe("table", &[("wood", 2)], None),
                recipe("wood_pickaxe", &[("wood", 1)], Some("table")),
                recipe("wood_sword", &[("wood", 1)], Some("table")),
                recipe("stone_pickaxe", &[("stone", 1), ("wood", 1)], Some("table")),
                recipe("furnace", &[("stone", 2)], Some("table")),
                recipe("iron_pickaxe", &[("iron", 1), ("coal", 1), ("wood", 1)], Some("furnace")),
            ],
            horizon_per_state: default_horizon_per_state(),
            step_penalty: default_step_penalty(),
            completion_reward: default_completion_reward(),
        };
        debug_assert!(spec.validate().is_ok());
        spec
    }
}

/// Build a task whose states each require possessing one item.
pub fn possession_task<S: AsRef<str>>(items: &[S]) -> Result<TaskSpec> {
    let states = items
        .iter()
        .map(|item| {
            EnvStateSpec::new(vec![ObjectRequirement::new(
                item.as_ref(),
                vec![AttributeRequirement::bool(Attribute::Visible, true)?],
            )?])
        })
        .collect::<Result<Vec<_>>>()?;
    TaskSpec::new(states)
}

/// The verb a task name uses for an item: crafting stations are "place"d,
/// other crafted outputs are "make"d, and everything else is "collect"ed.
pub fn item_verb(spec: &ChainCraftSpec, item: &str) -> &'static str {
    if spec.recipes.iter().any(|r| r.station.as_deref() == Some(item)) {
        "place"
    } else if spec.recipes.iter().any(|r| r.output == item) {
        "make"
    } else {
        "collect"
    }
}

/// Readable name for a chain of item goals: "collect coal then collect iron".
pub fn chain_task_name<S: AsRef<str>>(spec: &ChainCraftSpec, chain: &[S]) -> String {
    chain
        .iter()
        .map(|item| {
            let item = item.as_ref();
            format!("{} {}", item_verb(spec, item), item.replace('_', " "))
        })
        .collect::<Vec<_>>()
        .join(" then ")
}

/// Parse a [`chain_task_name`]-style name back into its item chain:
/// "make stone pickaxe then collect coal" → ["stone_pickaxe", "coal"].
/// Each segment drops its leading verb and joins the rest with underscores.
pub fn chain_from_task_name(name: &str) -> Vec<String> {
    name.split(" then ")
        .filter_map(|segment| {
            let words: Vec<&str> = segment.split_whitespace().collect();
            match words.len() {
                0 => None,
                1 => Some(words[0].to_string()),
                _ => Some(words[1..].join("_")),
            }
        })
        .collect()
}

/// Fewest obtain-steps to hold one unit of the item, counting every
/// prerequisite along the cheapest route (gather tools, recipe inputs and
/// stations). `None` means nothing in the world produces it.
pub fn item_depth(spec: &ChainCraftSpec, item: &str) -> Option<u32> {
    item_depths(spec).get(item).copied().flatten()
}

/// [`item_depth`] for every item at once, by relaxing routes to a fixpoint
/// (an item's depth is 1 + the deepest prerequisite of its cheapest route;
/// items whose every route loops back on themselves stay unobtainable).
pub fn item_depths(spec: &ChainCraftSpec) -> BTreeMap<String, Option<u32>> {
    let mut depths: BTreeMap<String, Option<u32>> =
        spec.items.iter().map(|item| (item.clone(), None)).collect();
    let improve = |best: Option<u32>, candidate: u32| match best {
        Some(b) if b <= candidate => best,
        _ => Some(candidate),
    };
    loop {
        let mut changed = false;
        for item in &spec.items {
            let mut best = depths[item];
            for gather in spec.gathers.iter().filter(|g| g.item == *item) {
                let tool_depth = match &gather.tool {
                    None => Some(0),
                    Some(tool) => depths[tool],
                };
                if let Some(d) = tool_depth {
                    best = improve(best, d + 1);
                }
            }
            for recipe in spec.recipes.iter().filter(|r| r.output == *item) {
                let parts = recipe.inputs.keys().chain(recipe.station.iter());
                let deepest_part =
                    parts.map(|p| depths[p]).try_fold(0u32, |acc, d| d.map(|d| acc.max(d)));
                if let Some(d) = deepest_part {
                    best = improve(best, d + 1);
                }
            }
            if best != depths[item] {
                depths.insert(item.clone(), best);
                changed = true;
            }
        }
        if !changed {
            return depths;
        }
    }
}

/// Unmastered items obtainable in one new step: every prerequisite of some
/// gather or recipe for them (tool; inputs and station) is already mastered.
/// Ordered shallowest-first, then by name.
pub fn frontier_items(spec: &ChainCraftSpec, mastered: &BTreeSet<String>) -> Vec<String> {
    let mut frontier: Vec<String> = spec
        .items
        .iter()
        .filter(|item| !mastered.contains(*item))
        .filter(|item| {
            let via_gather = spec.gathers.iter().any(|g| {
                g.item == **item && g.tool.as_ref().is_none_or(|t| mastered.contains(t))
            });
            let via_recipe = spec.recipes.iter().any(|r| {
                r.output == **item
                    && r.inputs.keys().all(|i| mastered.contains(i))
                    && r.station.as_ref().is_none_or(|s| mastered.contains(s))
            });
            via_gather || via_recipe
        })
        .cloned()
        .collect();
    frontier.sort_by_key(|item| (item_depth(spec, item), item.clone()));
    frontier
}

/// The prerequisite worth rehearsing before attempting a newly reachable
/// item: the deepest ingredient among the item's attainable routes. `None`
/// when some attainable route needs nothing (a tool-less gather).
pub fn practice_prereq(
    spec: &ChainCraftSpec,
    item: &str,
    mastered: &BTreeSet<String>,
) -> Option<String> {
    let mut prereqs: BTreeSet<String> = BTreeSet::new();
    for gather in spec.gathers.iter().filter(|g| g.item == item) {
        match &gather.tool {
            None => return None,
            Some(tool) if mastered.contains(tool) => {
                prereqs.insert(tool.clone());
            }
            Some(_) => {}
        }
    }
    for recipe in spec.recipes.iter().filter(|r| r.output == item) {
        let attainable = recipe.inputs.keys().all(|i| mastered.contains(i))
            && recipe.station.as_ref().is_none_or(|s| mastered.contains(s));
        if attainable {
            prereqs.extend(recipe.inputs.keys().cloned());
            prereqs.extend(recipe.station.clone());
        }
    }
    prereqs.into_iter().max_by_key(|p| (item_depth(spec, p), p.clone()))
}

/// Uniformly random item chains named by [`chain_task_name`]. Chains may
/// repeat items and may target unobtainable ones; callers wanting unique
/// task ids should dedup on the returned names.
pub fn random_chain_tasks(
    spec: &ChainCraftSpec,
    rng: &mut ChaCha8Rng,
    count: usize,
    max_chain: usize,
) -> Result<Vec<(TaskId, TaskSpec)>> {
    if max_chain == 0 {
        return Err(Error::Generation("chain length must be positive".into()));
    }
    let items: Vec<&String> = spec.items.iter().collect();
    let mut tasks = Vec::with_capacity(count);
    for _ in 0..count {
        let len = rng.random_range(1..=max_chain);
        let chain: Vec<&str> =
            (0..len).map(|_| items[rng.random_range(0..items.len())].as_str()).collect();
        let name = chain_task_name(spec, &chain);
        tasks.push((TaskId::new(name), possession_task(&chain)?));
    }
    Ok(tasks)
}

/// Affordance table over the item vocabulary, for generating and validating
/// possession tasks.
pub fn item_affordances(spec: &ChainCraftSpec) -> Result<AffordanceTable> {
    let text: String = spec.items.iter().map(|item| format!("{item}: pickupable\n")).collect();
    AffordanceTable::parse(&text)
}

/// A live episode: what the agent holds, how far the task has progressed,
/// and how many steps have elapsed.
#[derive(Debug, Clone)]
pub struct Episode {
    inventory: BTreeMap<String, u32>,
    progress: TaskProgress,
    steps: u32,
    done: bool,
}

fn inventory_snapshot(spec: &ChainCraftSpec, inventory: &BTreeMap<String, u32>) -> WorldSnapshot {
    let mut snapshot = WorldSnapshot::new();
    for item in &spec.items {
        let held = inventory.get(item).copied().unwrap_or(0) >= 1;
        let state = ObjectState::new()
            .with(Attribute::Visible, crate::taskdsl::AttributeValue::Bool(held))
            .and_then(|s| {
                s.with(Attribute::IsPickedUp, crate::taskdsl::AttributeValue::Bool(held))
            })
            .expect("bool attributes accept bool values");
        snapshot.insert_object(item.clone(), state);
    }
    snapshot
}

impl Episode {
    /// Begin an episode with an empty inventory. A task whose first state
    /// already holds is credited immediately (done before any step).
    pub fn start(spec: &ChainCraftSpec, task: &TaskSpec) -> Result<Self> {
        let inventory = BTreeMap::new();
        let snapshot = inventory_snapshot(spec, &inventory);
        let progress = advance_progress(TaskProgress::start(), task, &snapshot)?;
        let done = progress.is_complete(task);
        Ok(Episode { inventory, progress, steps: 0, done })
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn held(&self, item: &str) -> u32 {
        self.inventory.get(item).copied().unwrap_or(0)
    }

    /// Packed inventory signature: 2 bits per item, counts clamped.
    fn inventory_signature(&self, spec: &ChainCraftSpec) -> u64 {
        let mut packed = 0u64;
        for (i, item) in spec.items.iter().enumerate() {
            let count = self.held(item).min(SIGNATURE_COUNT_CAP) as u64;
            packed |= count << (2 * i);
        }
        packed
    }

    /// Learner-facing state key: the hash of the environment state currently
    /// being pursued plus the packed inventory signature. Keying on the goal
    /// state (rather than the task) lets tasks that share a target state
    /// share what has been learned about reaching it.
    fn state_key(&self, spec: &ChainCraftSpec, goals: &GoalKeys) -> StateKey {
        (goals.0[self.progress.next_index()], self.inventory_signature(spec))
    }
}

/// Per-state learner keys for one task (see [`Episode::state_key`]).
pub struct GoalKeys(Vec<u64>);

impl GoalKeys {
    /// Hash each environment state's canonical single-state serialization.
    pub fn for_task(task: &TaskSpec) -> Result<Self> {
        let keys = task
            .states()
            .iter()
            .map(|state| {
                let single = TaskSpec::new(vec![state.clone()])?;
                Ok(fnv1a(canonicalize(&single, Abstraction::None).as_str().as_bytes()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GoalKeys(keys))
    }
}

/// Apply one action. Gathers fail their coin flip or their missing-tool
/// precondition silently; crafts without station or inputs are no-ops.
/// Inputs are consumed atomically — never partially. Returns the step
/// reward, whether the episode ended (task complete or horizon exhausted),
/// and the post-step world snapshot.
pub fn env_step(
    spec: &ChainCraftSpec,
    task: &TaskSpec,
    episode: &mut Episode,
    action: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, bool, WorldSnapshot)> {
    if action >= spec.action_count() {
        return Err(Error::Evaluation(format!("action {action} out of range")));
    }
    if episode.done {
        return Err(Error::Evaluation("episode is already over".into()));
    }
    if let Some(gather) = spec.gathers.get(action) {
        let tool_ok = gather.tool.as_ref().is_none_or(|tool| episode.held(tool) >= 1);
        if tool_ok && rng.random::<f64>() < gather.success_prob {
            *episode.inventory.entry(gather.item.clone()).or_insert(0) += 1;
        }
    } else {
        let recipe = &spec.recipes[action - spec.gathers.len()];
        let station_ok = recipe.station.as_ref().is_none_or(|s| episode.held(s) >= 1);
        let inputs_ok = recipe.inputs.iter().all(|(item, units)| episode.held(item) >= *units);
        if station_ok && inputs_ok {
            for (item, units) in &recipe.inputs {
                *episode.inventory.get_mut(item).expect("inputs checked") -= units;
            }
            *episode.inventory.entry(recipe.output.clone()).or_insert(0) += 1;
        }
    }
    episode.steps += 1;
    let snapshot = inventory_snapshot(spec, &episode.inventory);
    episode.progress = advance_progress(episode.progress, task, &snapshot)?;
    let mut reward = -spec.step_penalty;
    if episode.progress.is_complete(task) {
        reward += spec.completion_reward;
        episode.done = true;
    } else if episode.steps >= spec.horizon(task) {
        episode.done = true;
    }
    Ok((reward, episode.done, snapshot))
}

/// Learner hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Value update step size.
    pub step_size: f64,
    /// Exploration rate during training rollouts.
    pub epsilon: f64,
    /// Discount factor γ.
    pub discount: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig { step_size: 0.2, epsilon: 0.2, discount: 0.97 }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config(format!("discount must lie in [0, 1), got {}", self.discount)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if !self.step_size.is_finite() || self.step_size <= 0.0 || self.step_size > 1.0 {
            return Err(Error::Config(format!(
                "step size must lie in (0, 1], got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

type StateKey = (u64, u64);

/// Tabular action values over (goal state, inventory signature).
#[derive(Debug, Clone, Default)]
pub struct TabularLearner {
    values: HashMap<StateKey, Vec<f64>>,
    pub config: LearnerConfig,
}

impl TabularLearner {
    pub fn new(config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        Ok(TabularLearner { values: HashMap::new(), config })
    }

    pub fn known_states(&self) -> usize {
        self.values.len()
    }

    fn action_values(&mut self, key: StateKey, actions: usize) -> &mut Vec<f64> {
        self.values.entry(key).or_insert_with(|| vec![0.0; actions])
    }

    fn best_value(&self, key: &StateKey) -> f64 {
        self.values
            .get(key)
            .map(|vs| vs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .unwrap_or(0.0)
    }

    /// Greedy action (lowest index wins ties); unseen states pick action 0.
    fn greedy(&self, key: &StateKey) -> usize {
        match self.values.get(key) {
            None => 0,
            Some(vs) => {
                let mut best = 0;
                for (i, v) in vs.iter().enumerate() {
                    if *v > vs[best] {
                        best = i;
                    }
                }
                best
            }
        }
    }

    fn pick(&mut self, key: StateKey, actions: usize, epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
        if rng.random::<f64>() < epsilon {
            rng.random_range(0..actions)
        } else {
            self.action_values(key, actions);
            self.greedy(&key)
        }
    }
}

/// One ε-greedy training rollout on a task, applying one-step
/// temporal-difference updates to the learner's action values. Returns the
/// episode return.
pub fn train_episode(
    learner: &mut TabularLearner,
    spec: &ChainCraftSpec,
    task: &TaskSpec,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let actions = spec.action_count();
    let goals = GoalKeys::for_task(task)?;
    let mut episode = Episode::start(spec, task)?;
    let mut episode_return = 0.0;
    while !episode.is_done() {
        let key = episode.state_key(spec, &goals);
        let action = learner.pick(key, actions, learner.config.epsilon, rng);
        let (reward, done, _) = env_step(spec, task, &mut episode, action, rng)?;
        episode_return += reward;
        let future =
            if done { 0.0 } else { learner.best_value(&episode.state_key(spec, &goals)) };
        let config = learner.config;
        let slot = &mut learner.action_values(key, actions)[action];
        *slot += config.step_size * (reward + config.discount * future - *slot);
    }
    Ok(episode_return)
}

fn rollout_success_rate(
    learner: &TabularLearner,
    spec: &ChainCraftSpec,
    task: &TaskSpec,
    episodes: u32,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let actions = spec.action_count();
    let goals = GoalKeys::for_task(task)?;
    let mut completed = 0u32;
    for _ in 0..episodes {
        let mut episode = Episode::start(spec, task)?;
        while !episode.is_done() {
            let key = episode.state_key(spec, &goals);
            let action = if epsilon >= 1.0 || rng.random::<f64>() < epsilon {
                rng.random_range(0..actions)
            } else {
                learner.greedy(&key)
            };
            env_step(spec, task, &mut episode, action, rng)?;
        }
        if episode.progress.is_complete(task) {
            completed += 1;
        }
    }
    Ok(completed as f64 / episodes as f64)
}

/// Greedy-policy Monte-Carlo success frequency per task. Deterministic for
/// a fixed seed.
pub fn evaluate_policy(
    learner: &TabularLearner,
    spec: &ChainCraftSpec,
    tasks: &[(TaskId, TaskSpec)],
    episodes_per_task: u32,
    rng: &mut ChaCha8Rng,
) -> Result<BTreeMap<TaskId, f64>> {
    if episodes_per_task == 0 {
        return Err(Error::Config("need at least one evaluation episode".into()));
    }
    let mut rates = BTreeMap::new();
    for (id, task) in tasks {
        let rate = rollout_success_rate(learner, spec, task, episodes_per_task, 0.0, rng)?;
        rates.insert(id.clone(), rate);
    }
    Ok(rates)
}

/// Success frequency of a uniformly random policy — the baseline a
/// curriculum's progress is measured against.
pub fn random_policy_success(
    spec: &ChainCraftSpec,
    task: &TaskSpec,
    episodes: u32,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let learner = TabularLearner::default();
    rollout_success_rate(&learner, spec, task, episodes, 1.0, rng)
}

/// ChainCraft bundled with its task list and learner, as a [`World`].
#[derive(Debug)]
pub struct ChainCraftWorld {
    spec: ChainCraftSpec,
    tasks: Vec<(TaskId, TaskSpec)>,
    learner: TabularLearner,
    random_rates: BTreeMap<TaskId, f64>,
    eval_episodes: u32,
    /// Seed stem for measuring the random-policy baseline of tasks added
    /// mid-run (combined with the task id, so measurements don't depend on
    /// addition order).
    baseline_seed: u64,
}

/// Episodes used to measure each task's random-policy success rate.
pub const RANDOM_RATE_EPISODES: u32 = 256;

impl ChainCraftWorld {
    /// Measures random-policy baselines up front with a dedicated stream of
    /// the given seed.
    pub fn new(
        spec: ChainCraftSpec,
        tasks: Vec<(TaskId, TaskSpec)>,
        config: LearnerConfig,
        eval_episodes: u32,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        if tasks.is_empty() {
            return Err(Error::Config("world needs at least one task".into()));
        }
        if eval_episodes == 0 {
            return Err(Error::Config("need at least one evaluation episode".into()));
        }
        let mut ids = BTreeSet::new();
        for (id, task) in &tasks {
            if !ids.insert(id.clone()) {
                return Err(Error::Config(format!("duplicate task id {id}")));
            }
            for state in task.states() {
                for obj in state.objects() {
                    if !spec.items.contains(obj.object()) {
                        return Err(Error::Config(format!(
                            "task {id} references unknown item {}",
                            obj.object()
                        )));
                    }
                }
            }
        }
        let learner = TabularLearner::new(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut random_rates = BTreeMap::new();
        for (id, task) in &tasks {
            let rate = random_policy_success(&spec, task, RANDOM_RATE_EPISODES, &mut rng)?;
            random_rates.insert(id.clone(), rate);
        }
        Ok(ChainCraftWorld { spec, tasks, learner, random_rates, eval_episodes, baseline_seed: seed })
    }

    /// The bundled technology-chain world and its ten tasks (one of which
    /// is impossible: nothing produces a pearl).
    pub fn wood_chain_world(seed: u64) -> Result<Self> {
        let tasks = [
            ("collect wood", vec!["wood"]),
            ("place table", vec!["table"]),
            ("make wood pickaxe", vec!["wood_pickaxe"]),
            ("make wood sword", vec!["wood_sword"]),
            ("collect stone", vec!["stone"]),
            ("make stone pickaxe", vec!["stone_pickaxe"]),
            ("place furnace", vec!["furnace"]),
            ("collect coal then collect iron", vec!["coal", "iron"]),
            ("make iron pickaxe", vec!["iron_pickaxe"]),
            ("collect pearl", vec!["pearl"]),
        ]
        .iter()
        .map(|(id, items)| Ok((TaskId::new(*id), possession_task(items)?)))
        .collect::<Result<Vec<_>>>()?;
        ChainCraftWorld::new(ChainCraftSpec::wood_chain(), tasks, LearnerConfig::default(), 32, seed)
    }

    pub fn spec(&self) -> &ChainCraftSpec {
        &self.spec
    }

    pub fn learner(&self) -> &TabularLearner {
        &self.learner
    }

    pub fn task(&self, id: &TaskId) -> Option<&TaskSpec> {
        self.tasks.iter().find(|(t, _)| t == id).map(|(_, spec)| spec)
    }
}

impl World for ChainCraftWorld {
    fn task_ids(&self) -> Vec<TaskId> {
        self.tasks.iter().map(|(id, _)| id.clone()).collect()
    }

    fn random_success(&self, id: &TaskId) -> Result<f64> {
        self.random_rates
            .get(id)
            .copied()
            .ok_or_else(|| Error::Evaluation(format!("unknown task id {id}")))
    }

    fn train(&mut self, samples: &[TaskId], rng: &mut ChaCha8Rng) -> Result<()> {
        for id in samples {
            let task = self
                .task(id)
                .ok_or_else(|| Error::Evaluation(format!("unknown task id {id}")))?
                .clone();
            train_episode(&mut self.learner, &self.spec, &task, rng)?;
        }
        Ok(())
    }

    fn evaluate(&mut self, rng: &mut ChaCha8Rng) -> Result<BTreeMap<TaskId, f64>> {
        evaluate_policy(&self.learner, &self.spec, &self.tasks, self.eval_episodes, rng)
    }

    fn supports_new_tasks(&self) -> bool {
        true
    }

    fn add_task(&mut self, id: &TaskId, task: &TaskSpec) -> Result<()> {
        if self.random_rates.contains_key(id) {
            return Err(Error::Config(format!("task id {id} already registered")));
        }
        for state in task.states() {
            for obj in state.objects() {
                if !self.spec.items.contains(obj.object()) {
                    return Err(Error::Config(format!(
                        "task {id} references unknown item {}",
                        obj.object()
                    )));
                }
            }
        }
        // Baseline measurement seeded from the id so it is independent of the
        // order in which tasks arrive.
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.baseline_seed ^ fnv1a(id.as_str().as_bytes()));
        let rate = random_policy_success(&self.spec, task, RANDOM_RATE_EPISODES, &mut rng)?;
        self.random_rates.insert(id.clone(), rate);
        self.tasks.push((id.clone(), task.clone()));
        Ok(())
    }
}

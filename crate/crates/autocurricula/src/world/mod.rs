//! Desk-scale training worlds.
//!
//! Curriculum experiments need something to train. This module provides two
//! stand-ins for full RL environments:
//!
//! * a **synthetic multi-task learner** ([`SynthSpec`], [`synth_train`],
//!   [`synth_eval`]): per-task proficiency that rises with allocated
//!   samples, gated by a prerequisite DAG — fast enough to sweep curriculum
//!   dynamics over thousands of tasks;
//! * **ChainCraft** ([`chaincraft`]): a small crafting environment with a
//!   tabular value learner, exercising the real sample → rollout → update →
//!   re-evaluate loop.
//!
//! [`bench`] ships named benchmark presets with fixed task censuses, and
//! the [`World`] trait is the uniform surface the experiment loop drives.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::taskdsl::{TaskId, TaskSpec};

pub mod bench;
pub mod chaincraft;

pub use bench::{KitchenSetup, Preset, SynthBenchmark};
pub use chaincraft::{ChainCraftSpec, ChainCraftWorld, LearnerConfig, TabularLearner};

/// What the experiment loop needs from any training world: a task set,
/// random-policy baselines, a way to spend training samples, and a full
/// evaluation pass.
pub trait World: Send {
    /// Current task set, in stable order.
    fn task_ids(&self) -> Vec<TaskId>;

    /// Success rate of a random policy on this task (the success floor a
    /// curriculum should not take credit for).
    fn random_success(&self, id: &TaskId) -> Result<f64>;

    /// Spend one training sample per entry (repeats allowed).
    fn train(&mut self, samples: &[TaskId], rng: &mut ChaCha8Rng) -> Result<()>;

    /// Evaluate every known task, returning per-task success rates.
    fn evaluate(&mut self, rng: &mut ChaCha8Rng) -> Result<BTreeMap<TaskId, f64>>;

    /// Whether tasks can be added after construction (open-ended worlds).
    fn supports_new_tasks(&self) -> bool {
        false
    }

    /// Add a task mid-run. Open-ended worlds interpret the task's
    /// environment-state sequence themselves (and may scale difficulty by
    /// its length).
    fn add_task(&mut self, id: &TaskId, task: &TaskSpec) -> Result<()> {
        let _ = task;
        Err(Error::Config(format!("this world has a fixed task set; cannot add {id}")))
    }
}

/// One task of the synthetic learner.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthTask {
    pub id: TaskId,
    /// Tasks whose proficiency gates this one.
    #[serde(default)]
    pub prereqs: Vec<TaskId>,
    /// Per-sample learning rate η; zero means the task is never learnable.
    #[serde(default = "default_learn_rate")]
    pub learn_rate: f64,
    /// Success floor of a random policy on this task.
    #[serde(default)]
    pub random_rate: f64,
    /// Starting proficiency override; defaults to the spec-wide value.
    #[serde(default)]
    pub initial_q: Option<f64>,
}

fn default_learn_rate() -> f64 {
    0.05
}

impl SynthTask {
    pub fn new(id: impl Into<String>, prereqs: &[&str], learn_rate: f64, random_rate: f64) -> Self {
        SynthTask {
            id: TaskId::new(id),
            prereqs: prereqs.iter().map(|p| TaskId::from(*p)).collect(),
            learn_rate,
            random_rate,
            initial_q: None,
        }
    }
}

/// The synthetic learner's world definition: tasks, their prerequisite DAG,
/// and the global learning constants.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub tasks: Vec<SynthTask>,
    /// Starting proficiency q0 for every task without an override.
    #[serde(default = "default_initial_proficiency")]
    pub initial_proficiency: f64,
    /// Gate threshold ρ: a task learns nothing until every prerequisite's
    /// proficiency reaches this level.
    #[serde(default = "default_prereq_gate")]
    pub prereq_gate: f64,
}

fn default_initial_proficiency() -> f64 {
    0.01
}

fn default_prereq_gate() -> f64 {
    0.5
}

fn check_unit(value: f64, what: &str) -> Result<()> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(Error::Config(format!("{what} must lie in [0, 1], got {value}")));
    }
    Ok(())
}

impl SynthSpec {
    pub fn new(tasks: Vec<SynthTask>, initial_proficiency: f64, prereq_gate: f64) -> Result<Self> {
        let spec = SynthSpec { tasks, initial_proficiency, prereq_gate };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text)
            .map_err(|e| Error::Config(format!("bad learner spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit(self.initial_proficiency, "initial proficiency")?;
        check_unit(self.prereq_gate, "prerequisite gate")?;
        let mut ids = BTreeSet::new();
        for task in &self.tasks {
            if !ids.insert(&task.id) {
                return Err(Error::Config(format!("duplicate task id {}", task.id)));
            }
            check_unit(task.learn_rate, &format!("learn rate of {}", task.id))?;
            check_unit(task.random_rate, &format!("random rate of {}", task.id))?;
            if let Some(q) = task.initial_q {
                check_unit(q, &format!("initial proficiency of {}", task.id))?;
            }
        }
        for task in &self.tasks {
            for prereq in &task.prereqs {
                if !ids.contains(prereq) {
                    return Err(Error::Config(format!(
                        "task {} requires unknown task {prereq}",
                        task.id
                    )));
                }
            }
        }
        self.check_acyclic()
    }

    /// Kahn's algorithm over prerequisite edges.
    fn check_acyclic(&self) -> Result<()> {
        let index: BTreeMap<&TaskId, usize> =
            self.tasks.iter().enumerate().map(|(i, t)| (&t.id, i)).collect();
        let mut indegree = vec![0usize; self.tasks.len()];
        let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); self.tasks.len()];
        for (i, task) in self.tasks.iter().enumerate() {
            for prereq in &task.prereqs {
                indegree[i] += 1;
                dependents[index[prereq]].push(i);
            }
        }
        let mut ready: Vec<usize> =
            (0..self.tasks.len()).filter(|&i| indegree[i] == 0).collect();
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
        if seen != self.tasks.len() {
            return Err(Error::Config("prerequisite graph has a cycle".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn get(&self, id: &TaskId) -> Option<&SynthTask> {
        self.tasks.iter().find(|t| &t.id == id)
    }

    pub fn task_ids(&self) -> Vec<TaskId> {
        self.tasks.iter().map(|t| t.id.clone()).collect()
    }

    fn start_q(&self, task: &SynthTask) -> f64 {
        task.initial_q.unwrap_or(self.initial_proficiency)
    }
}

/// Per-task proficiency of the synthetic learner.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthState {
    q: BTreeMap<TaskId, f64>,
}

impl SynthState {
    pub fn initial(spec: &SynthSpec) -> Self {
        SynthState {
            q: spec.tasks.iter().map(|t| (t.id.clone(), spec.start_q(t))).collect(),
        }
    }

    pub fn proficiency(&self, id: &TaskId) -> Option<f64> {
        self.q.get(id).copied()
    }
}

/// Spend `allocation[task]` samples per task. Each sample nudges
/// proficiency by `q ← 1 − (1−q)(1−η·g)` where the gate `g` is the minimum
/// prerequisite proficiency when all prerequisites clear the spec's gate
/// threshold, and zero otherwise (tasks without prerequisites gate at 1).
/// Gates read the incoming state, so the result is independent of task
/// order within one call; proficiency never decreases and never leaves
/// [0, 1]. Tasks missing from the allocation receive zero samples.
pub fn synth_train(
    state: &SynthState,
    allocation: &BTreeMap<TaskId, u64>,
    spec: &SynthSpec,
) -> Result<SynthState> {
    for id in allocation.keys() {
        if !state.q.contains_key(id) {
            return Err(Error::Evaluation(format!("allocation names unknown task {id}")));
        }
    }
    let mut next = state.clone();
    for task in &spec.tasks {
        let n = allocation.get(&task.id).copied().unwrap_or(0);
        if n == 0 {
            continue;
        }
        let gate = if task.prereqs.is_empty() {
            1.0
        } else {
            let lowest = task
                .prereqs
                .iter()
                .map(|p| state.q.get(p).copied().unwrap_or(0.0))
                .fold(f64::INFINITY, f64::min);
            if lowest >= spec.prereq_gate {
                lowest
            } else {
                0.0
            }
        };
        let rate = task.learn_rate * gate;
        if rate == 0.0 {
            continue; // a closed gate or unlearnable task changes nothing
        }
        let q = next.q.get_mut(&task.id).expect("state covers spec tasks");
        let updated = 1.0 - (1.0 - *q) * (1.0 - rate).powi(n as i32);
        *q = updated.clamp(*q, 1.0);
    }
    Ok(next)
}

/// Deterministic per-task success: learned proficiency, floored by what a
/// random policy would score anyway.
pub fn synth_eval(state: &SynthState, spec: &SynthSpec) -> BTreeMap<TaskId, f64> {
    spec.tasks
        .iter()
        .map(|t| {
            let q = state.q.get(&t.id).copied().unwrap_or(0.0);
            (t.id.clone(), q.max(t.random_rate))
        })
        .collect()
}

/// The synthetic learner as a [`World`], with optional mid-run task growth
/// for open-ended settings.
#[derive(Debug, Clone)]
pub struct SynthWorld {
    spec: SynthSpec,
    state: SynthState,
    /// Learning rate given to tasks added mid-run, divided by their
    /// environment-state count (longer tasks learn slower).
    pub new_task_learn_rate: f64,
    /// Random-policy floor given to tasks added mid-run.
    pub new_task_random_rate: f64,
}

impl SynthWorld {
    pub fn new(spec: SynthSpec) -> Self {
        let state = SynthState::initial(&spec);
        SynthWorld { spec, state, new_task_learn_rate: 0.3, new_task_random_rate: 0.0 }
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    pub fn state(&self) -> &SynthState {
        &self.state
    }
}

impl World for SynthWorld {
    fn task_ids(&self) -> Vec<TaskId> {
        self.spec.task_ids()
    }

    fn random_success(&self, id: &TaskId) -> Result<f64> {
        self.spec
            .get(id)
            .map(|t| t.random_rate)
            .ok_or_else(|| Error::Evaluation(format!("unknown task id {id}")))
    }

    fn train(&mut self, samples: &[TaskId], _rng: &mut ChaCha8Rng) -> Result<()> {
        let mut allocation: BTreeMap<TaskId, u64> = BTreeMap::new();
        for id in samples {
            *allocation.entry(id.clone()).or_insert(0) += 1;
        }
        self.state = synth_train(&self.state, &allocation, &self.spec)?;
        Ok(())
    }

    fn evaluate(&mut self, _rng: &mut ChaCha8Rng) -> Result<BTreeMap<TaskId, f64>> {
        Ok(synth_eval(&self.state, &self.spec))
    }

    fn supports_new_tasks(&self) -> bool {
        true
    }

    fn add_task(&mut self, id: &TaskId, task: &TaskSpec) -> Result<()> {
        if self.spec.get(id).is_some() {
            return Err(Error::Config(format!("task {id} already exists")));
        }
        let task = SynthTask {
            id: id.clone(),
            prereqs: Vec::new(),
            learn_rate: self.new_task_learn_rate / task.len() as f64,
            random_rate: self.new_task_random_rate,
            initial_q: None,
        };
        self.state.q.insert(id.clone(), self.spec.start_q(&task));
        self.spec.tasks.push(task);
        Ok(())
    }
}

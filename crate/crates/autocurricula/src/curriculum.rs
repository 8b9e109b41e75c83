//! Success-driven task sampling.
//!
//! Each task carries a pair of exponential moving averages of its (optionally
//! random-policy-normalized) success rate. The gap between the fast and slow
//! average, measured after a low-success-magnifying reweighting, is the task's
//! bidirectional learning progress. Progress values are z-scored across tasks,
//! squashed through a logistic, and normalized into a sampling distribution.
//! Interestingness verdicts can then scale boring tasks down by a small
//! multiplier before renormalization.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taskdsl::TaskId;

/// Tuning knobs for estimate updates and weight construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    /// EMA step for both the fast and slow success-rate averages.
    pub ema_beta: f64,
    /// Reweighting parameter: how strongly low success rates are magnified.
    pub reweight_theta: f64,
    /// Weight multiplier applied to tasks judged boring.
    pub boring_multiplier: f64,
    /// Policy updates between success-rate evaluations.
    pub eval_frequency_updates: u32,
    /// Subtract the random-policy success rate before tracking progress.
    pub normalize_to_random: bool,
    /// Success rate at or above which a task counts as learned.
    pub alpha_learned_threshold: f64,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            ema_beta: 0.1,
            reweight_theta: 0.1,
            boring_multiplier: 0.001,
            eval_frequency_updates: 10,
            normalize_to_random: true,
            alpha_learned_threshold: 0.2,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ema_beta > 0.0 && self.ema_beta <= 1.0) {
            return Err(Error::Config(format!("ema_beta must be in (0, 1], got {}", self.ema_beta)));
        }
        if !(self.reweight_theta > 0.0 && self.reweight_theta < 1.0) {
            return Err(Error::Config(format!(
                "reweight_theta must be in (0, 1), got {}",
                self.reweight_theta
            )));
        }
        if !(self.boring_multiplier > 0.0 && self.boring_multiplier <= 1.0) {
            return Err(Error::Config(format!(
                "boring_multiplier must be in (0, 1], got {}",
                self.boring_multiplier
            )));
        }
        if self.eval_frequency_updates == 0 {
            return Err(Error::Config("eval_frequency_updates must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha_learned_threshold) {
            return Err(Error::Config(format!(
                "alpha_learned_threshold must be in [0, 1], got {}",
                self.alpha_learned_threshold
            )));
        }
        Ok(())
    }
}

/// Per-task progress estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskEstimate {
    /// Success rate of a random-action policy on this task.
    pub t_rdn: f64,
    /// Fast moving average of normalized success.
    pub p_recent: f64,
    /// Slow moving average (follows `p_recent`).
    pub p_gradual: f64,
    /// Bidirectional learning progress in reweighted space.
    pub lp: f64,
    /// Whether the first evaluation has seeded the averages.
    pub initialized: bool,
}

/// Low-success-magnifying reweighting: `f(p) = (1-theta) * p / (p + theta * (1 - 2p))`.
///
/// Strictly increasing on [0, 1] with f(0) = 0 and f(1) = 1, and f(p) >= p, so
/// equal absolute changes count for more at the low end of the success scale.
pub fn reweight(p: f64, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::Evaluation(format!("reweight input must be in [0, 1], got {p}")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Config(format!("reweight theta must be in (0, 1), got {theta}")));
    }
    Ok((1.0 - theta) * p / (p + theta * (1.0 - 2.0 * p)))
}

/// Rescale a success rate against the random-policy rate for the same task:
/// `clamp((t_eval - t_rdn) / (1 - t_rdn), 0, 1)`.
///
/// Tasks a random policy already solves nearly always carry no learning
/// signal, so a `t_rdn` within 1e-9 of 1 maps everything to 0.
pub fn normalize_success(t_eval: f64, t_rdn: f64, enabled: bool) -> Result<f64> {
    for (name, v) in [("t_eval", t_eval), ("t_rdn", t_rdn)] {
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            return Err(Error::Evaluation(format!("{name} must be in [0, 1], got {v}")));
        }
    }
    if !enabled {
        return Ok(t_eval);
    }
    if t_rdn >= 1.0 - 1e-9 {
        return Ok(0.0);
    }
    Ok(((t_eval - t_rdn) / (1.0 - t_rdn)).clamp(0.0, 1.0))
}

/// One exponential-moving-average step: `obs * beta + previous * (1 - beta)`.
pub fn ema_update(previous: f64, observation: f64, beta: f64) -> f64 {
    observation * beta + previous * (1.0 - beta)
}

/// Bidirectional learning progress: `|f(p_recent) - f(p_gradual)|`.
///
/// Symmetric in its first two arguments, so regressions count as much as
/// improvements.
pub fn learning_progress(p_recent: f64, p_gradual: f64, theta: f64) -> Result<f64> {
    Ok((reweight(p_recent, theta)? - reweight(p_gradual, theta)?).abs())
}

/// A normalized sampling distribution over task ids, in sorted-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    entries: Vec<(TaskId, f64)>,
}

impl SamplingDistribution {
    /// Normalize positive weights into a distribution.
    pub fn from_weights(weights: BTreeMap<TaskId, f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Evaluation("cannot build a distribution over zero tasks".into()));
        }
        let mut total = 0.0;
        for (id, w) in &weights {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::Evaluation(format!("weight for {id} must be positive, got {w}")));
            }
            total += w;
        }
        let entries = weights.into_iter().map(|(id, w)| (id, w / total)).collect();
        Ok(SamplingDistribution { entries })
    }

    /// Equal weight on every task.
    pub fn uniform<I: IntoIterator<Item = TaskId>>(ids: I) -> Result<Self> {
        Self::from_weights(ids.into_iter().map(|id| (id, 1.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Normalized weight for one task, if present.
    pub fn weight(&self, id: &TaskId) -> Option<f64> {
        self.entries
            .binary_search_by(|(e, _)| e.cmp(id))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TaskId, f64)> {
        self.entries.iter().map(|(id, w)| (id, *w))
    }

    /// Task with the largest weight (first in id order on ties).
    pub fn argmax(&self) -> &TaskId {
        let mut best = &self.entries[0];
        for e in &self.entries[1..] {
            if e.1 > best.1 {
                best = e;
            }
        }
        &best.0
    }

    /// Draw one task id proportionally to its weight.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &TaskId {
        let u: f64 = rng.random::<f64>();
        let mut acc = 0.0;
        for (id, w) in &self.entries {
            acc += w;
            if u < acc {
                return id;
            }
        }
        // Rounding can leave acc a hair under 1; fall back to the last entry.
        &self.entries.last().expect("distribution is never empty").0
    }
}

/// Turn per-task learning progress into sampling weights: z-score across
/// tasks (population variance), logistic squash, normalize. A spread below
/// 1e-12 means no task stands out, which yields the uniform distribution.
pub fn weights_from_lp(lp_by_task: &BTreeMap<TaskId, f64>) -> Result<SamplingDistribution> {
    if lp_by_task.is_empty() {
        return Err(Error::Evaluation("weights_from_lp needs at least one task".into()));
    }
    let n = lp_by_task.len() as f64;
    let mean = lp_by_task.values().sum::<f64>() / n;
    let var = lp_by_task.values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma < 1e-12 {
        return SamplingDistribution::uniform(lp_by_task.keys().cloned());
    }
    let weights = lp_by_task
        .iter()
        .map(|(id, v)| {
            let z = (v - mean) / sigma;
            (id.clone(), 1.0 / (1.0 + (-z).exp()))
        })
        .collect();
    SamplingDistribution::from_weights(weights)
}

/// Scale the weight of every non-interesting task by `multiplier` and
/// renormalize. `verdicts` maps task id to "is interesting" and must cover
/// every task in the distribution.
pub fn compose_with_interest(
    weights: &SamplingDistribution,
    verdicts: &BTreeMap<TaskId, bool>,
    multiplier: f64,
) -> Result<SamplingDistribution> {
    if !(multiplier > 0.0 && multiplier <= 1.0) {
        return Err(Error::Config(format!("boring multiplier must be in (0, 1], got {multiplier}")));
    }
    let mut scaled = BTreeMap::new();
    for (id, w) in weights.iter() {
        let interesting = verdicts
            .get(id)
            .copied()
            .ok_or_else(|| Error::Evaluation(format!("no interest verdict for task {id}")))?;
        scaled.insert(id.clone(), if interesting { w } else { w * multiplier });
    }
    SamplingDistribution::from_weights(scaled)
}

/// Progress estimates for a set of tasks, updated one evaluation at a time.
#[derive(Debug, Clone)]
pub struct CurriculumState {
    config: CurriculumConfig,
    tasks: BTreeMap<TaskId, TaskEstimate>,
}

impl CurriculumState {
    pub fn new(config: CurriculumConfig) -> Result<Self> {
        config.validate()?;
        Ok(CurriculumState { config, tasks: BTreeMap::new() })
    }

    pub fn config(&self) -> &CurriculumConfig {
        &self.config
    }

    /// Register a task with its measured random-policy success rate.
    pub fn add_task(&mut self, id: TaskId, t_rdn: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t_rdn) || !t_rdn.is_finite() {
            return Err(Error::Evaluation(format!("t_rdn must be in [0, 1], got {t_rdn}")));
        }
        if self.tasks.contains_key(&id) {
            return Err(Error::Evaluation(format!("task {id} is already tracked")));
        }
        self.tasks.insert(
            id,
            TaskEstimate { t_rdn, p_recent: 0.0, p_gradual: 0.0, lp: 0.0, initialized: false },
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn contains(&self, id: &TaskId) -> bool {
        self.tasks.contains_key(id)
    }

    pub fn task_ids(&self) -> impl Iterator<Item = &TaskId> {
        self.tasks.keys()
    }

    pub fn estimate(&self, id: &TaskId) -> Option<&TaskEstimate> {
        self.tasks.get(id)
    }

    /// Fast-average success rates, the smoothed values interestingness
    /// partitioning works from.
    pub fn smoothed_success(&self) -> BTreeMap<TaskId, f64> {
        self.tasks.iter().map(|(id, e)| (id.clone(), e.p_recent)).collect()
    }

    /// Fold one full evaluation pass into the estimates. `t_eval` must hold a
    /// success rate for exactly the tracked tasks; a missing or unknown id is
    /// an error rather than a skip.
    pub fn record_evaluation(&mut self, t_eval: &BTreeMap<TaskId, f64>) -> Result<()> {
        for id in self.tasks.keys() {
            if !t_eval.contains_key(id) {
                return Err(Error::Evaluation(format!("evaluation is missing task {id}")));
            }
        }
        self.record_partial_evaluation(t_eval)
    }

    /// Fold an evaluation covering a subset of tasks (growing-task-set runs
    /// evaluate only tasks that have been sampled). Unknown ids are errors.
    pub fn record_partial_evaluation(&mut self, t_eval: &BTreeMap<TaskId, f64>) -> Result<()> {
        let beta = self.config.ema_beta;
        let theta = self.config.reweight_theta;
        let normalize = self.config.normalize_to_random;
        for (id, &raw) in t_eval {
            let est = self
                .tasks
                .get_mut(id)
                .ok_or_else(|| Error::Evaluation(format!("evaluation for unknown task {id}")))?;
            let t_norm = normalize_success(raw, est.t_rdn, normalize)?;
            if !est.initialized {
                est.p_recent = t_norm;
                est.p_gradual = t_norm;
                est.lp = 0.0;
                est.initialized = true;
            } else {
                est.p_recent = ema_update(est.p_recent, t_norm, beta);
                // The slow average chases the already-updated fast average.
                est.p_gradual = ema_update(est.p_gradual, est.p_recent, beta);
                est.lp = learning_progress(est.p_recent, est.p_gradual, theta)?;
            }
        }
        Ok(())
    }

    /// Current learning-progress value per task.
    pub fn lp_by_task(&self) -> BTreeMap<TaskId, f64> {
        self.tasks.iter().map(|(id, e)| (id.clone(), e.lp)).collect()
    }

    /// Sampling distribution implied by current learning progress.
    pub fn weights(&self) -> Result<SamplingDistribution> {
        weights_from_lp(&self.lp_by_task())
    }

    /// Canonical text snapshot: one task per line as
    /// `id<TAB>t_rdn<TAB>p_recent<TAB>p_gradual<TAB>lp<TAB>weight`, in sorted
    /// id order. Weights come from the current distribution.
    pub fn snapshot_text(&self) -> Result<String> {
        let dist = self.weights()?;
        let mut out = String::new();
        for (id, est) in &self.tasks {
            let w = dist.weight(id).expect("distribution covers every tracked task");
            writeln!(out, "{id}\t{}\t{}\t{}\t{}\t{}", est.t_rdn, est.p_recent, est.p_gradual, est.lp, w)
                .expect("writing to a String cannot fail");
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> TaskId {
        TaskId::new(s)
    }

    #[test]
    fn reweight_fixed_points_and_anchors() {
        assert_eq!(reweight(0.0, 0.1).unwrap(), 0.0);
        assert_eq!(reweight(1.0, 0.1).unwrap(), 1.0);
        // 0.9 * 0.1 / (0.1 + 0.1 * 0.8) = 0.09 / 0.18
        assert!((reweight(0.1, 0.1).unwrap() - 0.5).abs() < 1e-12);
        // 0.9 * 0.5 / (0.5 + 0.1 * 0.0) = 0.45 / 0.50
        assert!((reweight(0.5, 0.1).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn reweight_rejects_bad_inputs() {
        assert!(reweight(-0.1, 0.1).is_err());
        assert!(reweight(1.1, 0.1).is_err());
        assert!(reweight(f64::NAN, 0.1).is_err());
        assert!(reweight(0.5, 0.0).is_err());
        assert!(reweight(0.5, 1.0).is_err());
    }

    #[test]
    fn normalize_success_examples() {
        assert_eq!(normalize_success(0.5, 0.0, true).unwrap(), 0.5);
        assert!((normalize_success(0.55, 0.1, true).unwrap() - 0.5).abs() < 1e-12);
        // Below the random-policy floor clamps to zero.
        assert_eq!(normalize_success(0.05, 0.1, true).unwrap(), 0.0);
        // Disabled normalization passes the raw value through.
        assert_eq!(normalize_success(0.05, 0.1, false).unwrap(), 0.05);
        // A task random policies already solve carries no signal.
        assert_eq!(normalize_success(1.0, 1.0, true).unwrap(), 0.0);
        assert_eq!(normalize_success(0.9, 1.0 - 1e-12, true).unwrap(), 0.0);
    }

    #[test]
    fn ema_update_examples() {
        assert!((ema_update(0.2, 0.4, 0.1) - 0.22).abs() < 1e-12);
        assert!((ema_update(0.0, 1.0, 0.1) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn learning_progress_value_and_symmetry() {
        // |f(0.1) - f(0.05)| = |0.5 - 0.045/0.14|
        let expected = 0.5 - 0.045 / 0.14;
        let forward = learning_progress(0.1, 0.05, 0.1).unwrap();
        let backward = learning_progress(0.05, 0.1, 0.1).unwrap();
        assert!((forward - expected).abs() < 1e-12);
        assert_eq!(forward, backward);
    }

    #[test]
    fn first_evaluation_seeds_both_averages() {
        let mut state = CurriculumState::new(CurriculumConfig::default()).unwrap();
        state.add_task(id("a"), 0.2).unwrap();
        let evals = BTreeMap::from([(id("a"), 0.6)]);
        state.record_evaluation(&evals).unwrap();
        let est = state.estimate(&id("a")).unwrap();
        let t_norm = (0.6 - 0.2) / 0.8;
        assert!((est.p_recent - t_norm).abs() < 1e-12);
        assert!((est.p_gradual - t_norm).abs() < 1e-12);
        assert_eq!(est.lp, 0.0);
    }

    #[test]
    fn second_evaluation_updates_in_order() {
        let mut state = CurriculumState::new(CurriculumConfig::default()).unwrap();
        state.add_task(id("a"), 0.0).unwrap();
        state.record_evaluation(&BTreeMap::from([(id("a"), 0.0)])).unwrap();
        state.record_evaluation(&BTreeMap::from([(id("a"), 1.0)])).unwrap();
        let est = state.estimate(&id("a")).unwrap();
        assert!((est.p_recent - 0.1).abs() < 1e-12);
        // The slow average smooths the updated fast average: 0.1 * 0.1 = 0.01.
        assert!((est.p_gradual - 0.01).abs() < 1e-12);
        let expected_lp = (reweight(0.1, 0.1).unwrap() - reweight(0.01, 0.1).unwrap()).abs();
        assert!((est.lp - expected_lp).abs() < 1e-12);
    }

    #[test]
    fn missing_and_unknown_tasks_are_errors() {
        let mut state = CurriculumState::new(CurriculumConfig::default()).unwrap();
        state.add_task(id("a"), 0.0).unwrap();
        state.add_task(id("b"), 0.0).unwrap();
        let missing = BTreeMap::from([(id("a"), 0.5)]);
        assert!(state.record_evaluation(&missing).is_err());
        let unknown = BTreeMap::from([(id("a"), 0.5), (id("b"), 0.5), (id("c"), 0.5)]);
        assert!(state.record_evaluation(&unknown).is_err());
    }

    #[test]
    fn equal_lp_gives_uniform_weights() {
        let lp = BTreeMap::from([(id("a"), 0.3), (id("b"), 0.3), (id("c"), 0.3)]);
        let dist = weights_from_lp(&lp).unwrap();
        for (_, w) in dist.iter() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_task_weights_match_logistic_of_unit_z_scores() {
        let lp = BTreeMap::from([(id("a"), 0.0), (id("b"), 1.0)]);
        let dist = weights_from_lp(&lp).unwrap();
        let lo = 1.0 / (1.0 + 1.0f64.exp()); // logistic(-1)
        let hi = 1.0 / (1.0 + (-1.0f64).exp()); // logistic(+1)
        let sum = lo + hi;
        assert!((dist.weight(&id("a")).unwrap() - lo / sum).abs() < 1e-12);
        assert!((dist.weight(&id("b")).unwrap() - hi / sum).abs() < 1e-12);
        assert!((dist.weight(&id("a")).unwrap() - 0.268941).abs() < 1e-6);
        assert!((dist.weight(&id("b")).unwrap() - 0.731058).abs() < 1e-6);
    }

    #[test]
    fn compose_suppresses_boring_tasks() {
        let dist = SamplingDistribution::from_weights(BTreeMap::from([
            (id("a"), 0.5),
            (id("b"), 0.5),
        ]))
        .unwrap();
        let verdicts = BTreeMap::from([(id("a"), true), (id("b"), false)]);
        let composed = compose_with_interest(&dist, &verdicts, 0.001).unwrap();
        assert!((composed.weight(&id("a")).unwrap() - 0.5 / 0.5005).abs() < 1e-12);
        assert!((composed.weight(&id("b")).unwrap() - 0.0005 / 0.5005).abs() < 1e-12);
    }

    #[test]
    fn compose_with_everything_boring_changes_nothing() {
        let dist = SamplingDistribution::from_weights(BTreeMap::from([
            (id("a"), 0.25),
            (id("b"), 0.75),
        ]))
        .unwrap();
        let verdicts = BTreeMap::from([(id("a"), false), (id("b"), false)]);
        let composed = compose_with_interest(&dist, &verdicts, 0.001).unwrap();
        for (task, w) in dist.iter() {
            assert!((composed.weight(task).unwrap() - w).abs() < 1e-12);
        }
    }

    #[test]
    fn compose_requires_a_verdict_per_task() {
        let dist = SamplingDistribution::uniform([id("a"), id("b")]).unwrap();
        let verdicts = BTreeMap::from([(id("a"), true)]);
        assert!(compose_with_interest(&dist, &verdicts, 0.001).is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        use rand::SeedableRng;
        let dist = weights_from_lp(&BTreeMap::from([
            (id("a"), 0.1),
            (id("b"), 0.4),
            (id("c"), 0.0),
        ]))
        .unwrap();
        let draw = |seed: u64| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| dist.sample(&mut rng).to_string()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn snapshot_lists_one_task_per_line_in_id_order() {
        let mut state = CurriculumState::new(CurriculumConfig::default()).unwrap();
        state.add_task(id("b"), 0.0).unwrap();
        state.add_task(id("a"), 0.25).unwrap();
        state
            .record_evaluation(&BTreeMap::from([(id("a"), 0.5), (id("b"), 0.0)]))
            .unwrap();
        let snap = state.snapshot_text().unwrap();
        let lines: Vec<&str> = snap.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("a\t0.25\t"));
        assert!(lines[1].starts_with("b\t0\t"));
        for line in lines {
            assert_eq!(line.split('\t').count(), 6);
        }
    }
}

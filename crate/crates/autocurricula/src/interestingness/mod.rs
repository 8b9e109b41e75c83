//! Models of interestingness (MoI) and the interesting/boring partition.
//!
//! A MoI answers one question: given what the agent already does well, which
//! candidate tasks are still worth learning? Implementations range from
//! oracles (fixed membership sets, single-step rules) through offline
//! embedding clustering to a language-model backend. [`partition`] applies a
//! MoI iteratively to split a whole task set.

mod embed;
mod fm;
mod prompts;

pub use embed::{cosine_distance, density_clusters, EmbeddingMoi, NgramEmbedder, DEFAULT_EPS, DEFAULT_MIN_PTS};
pub use fm::{FmMoi, FmMoiConfig};
pub use prompts::{
    crafter_compound_rule_reply, crafter_repeat_rule_reply, crafter_synonym_prior_reply,
    prompt_candidates, prompt_done_well, render_verdict_lines, parse_verdicts, PromptTemplate,
    VerdictParse, BABYAI_MOI_SYSTEM_TEXT, BABYAI_MOI_USER_TEMPLATE, CRAFTER_MOI_TEMPLATE,
    CRAFTER_MOI_UPDATED_TEMPLATE,
};

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::taskdsl::TaskId;

/// Where a verdict came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictSource {
    Oracle,
    Embedding,
    Fm,
    /// Served from the completion cache rather than a live model call.
    Cached,
}

/// One per-candidate answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterestVerdict {
    pub task: String,
    pub interesting: bool,
    pub source: VerdictSource,
}

/// What the model is asked: the tasks already done well, and the candidates
/// to judge. The two lists are disjoint, duplicate-free, and candidates are
/// non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoiQuery {
    done_well: Vec<String>,
    candidates: Vec<String>,
}

impl MoiQuery {
    pub fn new(done_well: Vec<String>, candidates: Vec<String>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Config("interestingness query needs at least one candidate".into()));
        }
        for list in [&done_well, &candidates] {
            let mut seen = BTreeSet::new();
            for item in list {
                if item.trim().is_empty() {
                    return Err(Error::Config("task descriptions must be non-empty".into()));
                }
                if !seen.insert(item.as_str()) {
                    return Err(Error::Config(format!("task listed twice in query: {item}")));
                }
            }
        }
        let done: BTreeSet<&str> = done_well.iter().map(String::as_str).collect();
        if let Some(overlap) = candidates.iter().find(|c| done.contains(c.as_str())) {
            return Err(Error::Config(format!(
                "task appears both as done-well and candidate: {overlap}"
            )));
        }
        Ok(MoiQuery { done_well, candidates })
    }

    pub fn done_well(&self) -> &[String] {
        &self.done_well
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }
}

/// A model of interestingness. Implementations must answer every candidate
/// exactly once and be safely callable from multiple threads.
pub trait Moi: Send + Sync {
    fn predict(&self, query: &MoiQuery) -> Result<Vec<InterestVerdict>>;
}

/// Bundled interesting-set for the crafting benchmark: its fifteen base
/// achievements.
pub const CRAFTER_INTERESTING_TEXT: &str = include_str!("../../data/crafter_interesting.txt");

/// Bundled interesting-set for the synonym benchmark: the fifteen base
/// achievements crossed with their accepted verb variants.
pub const CRAFTER_SYNONYM_INTERESTING_TEXT: &str =
    include_str!("../../data/crafter_synonym_interesting.txt");

/// Membership oracle: a task is interesting iff it appears in a fixed set.
/// Verdicts never depend on success rates or on what is already done well.
#[derive(Debug, Clone)]
pub struct OracleMoi {
    interesting: BTreeSet<String>,
}

impl OracleMoi {
    pub fn from_set(interesting: impl IntoIterator<Item = String>) -> Self {
        OracleMoi { interesting: interesting.into_iter().collect() }
    }

    /// Parse a newline-delimited task list. Blank lines and `#` comments are
    /// skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut interesting = BTreeSet::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            interesting.insert(line.to_string());
        }
        if interesting.is_empty() {
            return Err(Error::Config("oracle task list is empty".into()));
        }
        Ok(OracleMoi { interesting })
    }

    /// The fifteen-task crafting interesting-set.
    pub fn crafter() -> Self {
        OracleMoi::from_text(CRAFTER_INTERESTING_TEXT).expect("bundled list parses")
    }

    /// The synonym-closure variant (every verb variant of each base task).
    pub fn crafter_synonyms() -> Self {
        OracleMoi::from_text(CRAFTER_SYNONYM_INTERESTING_TEXT).expect("bundled list parses")
    }

    pub fn len(&self) -> usize {
        self.interesting.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interesting.is_empty()
    }

    pub fn contains(&self, task: &str) -> bool {
        self.interesting.contains(task)
    }
}

impl Moi for OracleMoi {
    fn predict(&self, query: &MoiQuery) -> Result<Vec<InterestVerdict>> {
        Ok(query
            .candidates()
            .iter()
            .map(|c| InterestVerdict {
                task: c.clone(),
                interesting: self.interesting.contains(c),
                source: VerdictSource::Oracle,
            })
            .collect())
    }
}

/// Rule oracle for instruction-following domains: an instruction is
/// interesting iff it is a single step — composites formed by sequencing
/// connectors are judged boring.
#[derive(Debug, Clone)]
pub struct SingleStepOracle {
    connectors: Vec<String>,
}

impl Default for SingleStepOracle {
    fn default() -> Self {
        SingleStepOracle { connectors: vec![" then ".into(), ", then ".into()] }
    }
}

impl SingleStepOracle {
    pub fn with_connectors(connectors: Vec<String>) -> Self {
        SingleStepOracle { connectors }
    }
}

impl Moi for SingleStepOracle {
    fn predict(&self, query: &MoiQuery) -> Result<Vec<InterestVerdict>> {
        Ok(query
            .candidates()
            .iter()
            .map(|c| InterestVerdict {
                task: c.clone(),
                interesting: !self.connectors.iter().any(|sep| c.contains(sep.as_str())),
                source: VerdictSource::Oracle,
            })
            .collect())
    }
}

/// Outcome of partitioning a task set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionResult {
    pub interesting: BTreeSet<TaskId>,
    pub boring: BTreeSet<TaskId>,
    pub rounds: usize,
}

impl PartitionResult {
    pub fn classification(&self) -> BTreeMap<TaskId, bool> {
        let mut out = BTreeMap::new();
        for id in &self.interesting {
            out.insert(id.clone(), true);
        }
        for id in &self.boring {
            out.insert(id.clone(), false);
        }
        out
    }
}

/// Split every task into interesting or boring by iterating the MoI.
///
/// Each round moves the highest-success uncategorized task (ties broken by
/// task-id order) into the interesting set — the agent demonstrably making
/// the most of it — then asks the MoI, with the interesting set as done-well
/// context, which remaining tasks are boring. The loop ends when every task
/// is categorized, after at most one round per task.
///
/// `success_rates` must already be smoothed (callers pass the curriculum's
/// fast-moving average); this function does no smoothing of its own. Any MoI
/// error aborts the whole partition, so callers keep their previous one.
pub fn partition(success_rates: &BTreeMap<TaskId, f64>, moi: &dyn Moi) -> Result<PartitionResult> {
    for (id, rate) in success_rates {
        if !rate.is_finite() || !(0.0..=1.0).contains(rate) {
            return Err(Error::Evaluation(format!("success rate for {id} out of range: {rate}")));
        }
    }

    let mut uncategorized: Vec<&TaskId> = success_rates.keys().collect();
    // Success descending, id ascending; BTreeMap order makes ties stable.
    let by_rank = |a: &&TaskId, b: &&TaskId| {
        success_rates[*b]
            .partial_cmp(&success_rates[*a])
            .expect("rates are finite")
            .then_with(|| a.cmp(b))
    };
    uncategorized.sort_by(by_rank);

    let mut interesting: Vec<&TaskId> = Vec::new();
    let mut boring: BTreeSet<TaskId> = BTreeSet::new();
    let mut rounds = 0;

    while !uncategorized.is_empty() {
        rounds += 1;
        let best = uncategorized.remove(0);
        interesting.push(best);
        if uncategorized.is_empty() {
            break;
        }

        let query = MoiQuery::new(
            interesting.iter().map(|id| id.to_string()).collect(),
            uncategorized.iter().map(|id| id.to_string()).collect(),
        )?;
        let verdicts = moi.predict(&query)?;

        let mut answered: BTreeMap<&str, bool> = BTreeMap::new();
        for v in &verdicts {
            if answered.insert(v.task.as_str(), v.interesting).is_some() {
                return Err(Error::Protocol(format!("duplicate verdict for task {}", v.task)));
            }
        }
        let mut still = Vec::with_capacity(uncategorized.len());
        for id in uncategorized.drain(..) {
            match answered.remove(id.as_str()) {
                Some(false) => {
                    boring.insert(id.clone());
                }
                Some(true) => still.push(id),
                None => {
                    return Err(Error::Protocol(format!("model returned no verdict for task {id}")))
                }
            }
        }
        if let Some((task, _)) = answered.into_iter().next() {
            return Err(Error::Protocol(format!("verdict for task not queried: {task}")));
        }
        uncategorized = still;
    }

    Ok(PartitionResult {
        interesting: interesting.into_iter().cloned().collect(),
        boring,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> BTreeSet<TaskId> {
        names.iter().map(|n| TaskId::new(*n)).collect()
    }

    fn rates(pairs: &[(&str, f64)]) -> BTreeMap<TaskId, f64> {
        pairs.iter().map(|(n, r)| (TaskId::new(*n), *r)).collect()
    }

    /// MoI that marks a candidate boring iff it names a count greater than
    /// one — the scripted stand-in used throughout the tests.
    struct RepeatRule;

    fn mentions_repeat(task: &str) -> bool {
        task.split_whitespace().any(|w| w.parse::<u64>().map(|n| n > 1).unwrap_or(false))
    }

    impl Moi for RepeatRule {
        fn predict(&self, query: &MoiQuery) -> Result<Vec<InterestVerdict>> {
            Ok(query
                .candidates()
                .iter()
                .map(|c| InterestVerdict {
                    task: c.clone(),
                    interesting: !mentions_repeat(c),
                    source: VerdictSource::Oracle,
                })
                .collect())
        }
    }

    #[test]
    fn query_construction_enforces_disjoint_lists() {
        assert!(MoiQuery::new(vec!["a".into()], vec![]).is_err());
        assert!(MoiQuery::new(vec!["a".into()], vec!["a".into()]).is_err());
        assert!(MoiQuery::new(vec![], vec!["a".into(), "a".into()]).is_err());
        assert!(MoiQuery::new(vec![], vec!["  ".into()]).is_err());
        assert!(MoiQuery::new(vec!["a".into()], vec!["b".into()]).is_ok());
    }

    #[test]
    fn membership_oracle_judges_by_set_alone() {
        let oracle = OracleMoi::from_set(["collect wood".to_string()]);
        let query = MoiQuery::new(
            vec![],
            vec!["collect wood".into(), "collect 2 wood".into()],
        )
        .unwrap();
        let verdicts = oracle.predict(&query).unwrap();
        assert_eq!(
            verdicts.iter().map(|v| v.interesting).collect::<Vec<_>>(),
            vec![true, false]
        );
        assert!(verdicts.iter().all(|v| v.source == VerdictSource::Oracle));

        // Adding done-well context changes nothing: pure membership.
        let with_context =
            MoiQuery::new(vec!["place table".into()], vec!["collect 2 wood".into()]).unwrap();
        assert!(!oracle.predict(&with_context).unwrap()[0].interesting);
    }

    #[test]
    fn bundled_oracle_sets_have_expected_sizes() {
        assert_eq!(OracleMoi::crafter().len(), 15);
        assert!(OracleMoi::crafter().contains("make iron pickaxe"));
        assert_eq!(OracleMoi::crafter_synonyms().len(), 90);
        assert!(OracleMoi::crafter_synonyms().contains("gather wood"));
    }

    #[test]
    fn single_step_rule_marks_composites_boring() {
        let oracle = SingleStepOracle::default();
        let query = MoiQuery::new(
            vec![],
            vec![
                "go to the red ball".into(),
                "open the door then go to the red ball".into(),
            ],
        )
        .unwrap();
        let verdicts = oracle.predict(&query).unwrap();
        assert!(verdicts[0].interesting);
        assert!(!verdicts[1].interesting);
    }

    #[test]
    fn scripted_repeat_rule_marks_repeats_boring() {
        let query = MoiQuery::new(vec![], vec!["make 3 stone sword".into()]).unwrap();
        assert!(!RepeatRule.predict(&query).unwrap()[0].interesting);
    }

    #[test]
    fn partition_follows_the_success_ranking() {
        let result = partition(
            &rates(&[("collect wood", 0.9), ("collect 2 wood", 0.8), ("place table", 0.3)]),
            &RepeatRule,
        )
        .unwrap();
        assert_eq!(result.interesting, ids(&["collect wood", "place table"]));
        assert_eq!(result.boring, ids(&["collect 2 wood"]));
        assert_eq!(result.rounds, 2);
    }

    #[test]
    fn single_task_partitions_in_one_round() {
        let result = partition(&rates(&[("collect wood", 0.1)]), &RepeatRule).unwrap();
        assert_eq!(result.interesting, ids(&["collect wood"]));
        assert!(result.boring.is_empty());
        assert_eq!(result.rounds, 1);
    }

    #[test]
    fn nothing_boring_means_one_round_per_task() {
        struct NeverBoring;
        impl Moi for NeverBoring {
            fn predict(&self, query: &MoiQuery) -> Result<Vec<InterestVerdict>> {
                Ok(query
                    .candidates()
                    .iter()
                    .map(|c| InterestVerdict {
                        task: c.clone(),
                        interesting: true,
                        source: VerdictSource::Oracle,
                    })
                    .collect())
            }
        }
        let input = rates(&[("a", 0.4), ("b", 0.3), ("c", 0.2), ("d", 0.1)]);
        let result = partition(&input, &NeverBoring).unwrap();
        assert_eq!(result.rounds, 4);
        assert_eq!(result.interesting.len(), 4);
        assert!(result.boring.is_empty());
    }

    #[test]
    fn everything_boring_resolves_in_one_round() {
        struct AllBoring;
        impl Moi for AllBoring {
            fn predict(&self, query: &MoiQuery) -> Result<Vec<InterestVerdict>> {
                Ok(query
                    .candidates()
                    .iter()
                    .map(|c| InterestVerdict {
                        task: c.clone(),
                        interesting: false,
                        source: VerdictSource::Oracle,
                    })
                    .collect())
            }
        }
        let input = rates(&[("a", 0.4), ("b", 0.3), ("c", 0.2)]);
        let result = partition(&input, &AllBoring).unwrap();
        assert_eq!(result.rounds, 1);
        // The round's pick stays interesting; everything else is boring.
        assert_eq!(result.interesting, ids(&["a"]));
        assert_eq!(result.boring, ids(&["b", "c"]));
    }

    #[test]
    fn partition_is_disjoint_and_covering_even_for_adversarial_models() {
        // Flips verdicts by call parity — the partition must still be exact.
        struct Flipper(std::sync::atomic::AtomicUsize);
        impl Moi for Flipper {
            fn predict(&self, query: &MoiQuery) -> Result<Vec<InterestVerdict>> {
                let n = self.0.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                Ok(query
                    .candidates()
                    .iter()
                    .enumerate()
                    .map(|(i, c)| InterestVerdict {
                        task: c.clone(),
                        interesting: (i + n) % 2 == 0,
                        source: VerdictSource::Oracle,
                    })
                    .collect())
            }
        }
        let input = rates(&[("a", 0.9), ("b", 0.7), ("c", 0.5), ("d", 0.3), ("e", 0.1)]);
        let result = partition(&input, &Flipper(std::sync::atomic::AtomicUsize::new(0))).unwrap();
        let union: BTreeSet<_> = result.interesting.union(&result.boring).cloned().collect();
        assert_eq!(union, input.keys().cloned().collect());
        assert!(result.interesting.is_disjoint(&result.boring));
        assert!(result.rounds <= input.len());
    }

    #[test]
    fn ties_break_by_task_id_order() {
        // Both candidates sit at the same rate; "a" must be picked first, so
        // with an all-boring model "a" is interesting and "b" boring.
        struct AllBoring;
        impl Moi for AllBoring {
            fn predict(&self, query: &MoiQuery) -> Result<Vec<InterestVerdict>> {
                Ok(query
                    .candidates()
                    .iter()
                    .map(|c| InterestVerdict {
                        task: c.clone(),
                        interesting: false,
                        source: VerdictSource::Oracle,
                    })
                    .collect())
            }
        }
        let result = partition(&rates(&[("b", 0.5), ("a", 0.5)]), &AllBoring).unwrap();
        assert_eq!(result.interesting, ids(&["a"]));
        assert_eq!(result.boring, ids(&["b"]));
    }

    #[test]
    fn missing_or_surplus_verdicts_abort_the_partition() {
        struct Silent;
        impl Moi for Silent {
            fn predict(&self, _query: &MoiQuery) -> Result<Vec<InterestVerdict>> {
                Ok(vec![])
            }
        }
        assert!(partition(&rates(&[("a", 0.9), ("b", 0.1)]), &Silent).is_err());

        struct Chatty;
        impl Moi for Chatty {
            fn predict(&self, query: &MoiQuery) -> Result<Vec<InterestVerdict>> {
                let mut out: Vec<InterestVerdict> = query
                    .candidates()
                    .iter()
                    .map(|c| InterestVerdict {
                        task: c.clone(),
                        interesting: true,
                        source: VerdictSource::Oracle,
                    })
                    .collect();
                out.push(InterestVerdict {
                    task: "uninvited".into(),
                    interesting: false,
                    source: VerdictSource::Oracle,
                });
                Ok(out)
            }
        }
        assert!(partition(&rates(&[("a", 0.9), ("b", 0.1)]), &Chatty).is_err());
    }

    #[test]
    fn out_of_range_rates_are_rejected() {
        assert!(partition(&rates(&[("a", 1.2)]), &RepeatRule).is_err());
        assert!(partition(&rates(&[("a", f64::NAN)]), &RepeatRule).is_err());
    }

    #[test]
    fn empty_task_set_partitions_trivially() {
        let result = partition(&BTreeMap::new(), &RepeatRule).unwrap();
        assert!(result.interesting.is_empty());
        assert!(result.boring.is_empty());
        assert_eq!(result.rounds, 0);
    }
}

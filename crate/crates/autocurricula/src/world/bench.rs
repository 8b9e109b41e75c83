//! Named benchmark presets with fixed task censuses.
//!
//! Each crafting-world preset dilutes a core of genuinely interesting tasks
//! with distractors and labels every task up front, so experiments can
//! score how well a sampling strategy recovers the labels:
//!
//! * **interesting** — the technology-tree skills worth learning;
//! * **boring** — learnable but redundant variants (numeric repeats,
//!   pairwise compounds, synonymous rephrasings, depending on preset);
//! * **challenging** — far beyond the learner: success stays exactly zero,
//!   so sampling them is pure waste.
//!
//! The open-ended preset instead describes a kitchen whose task set grows
//! at runtime.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::taskdsl::{parse_task, AffordanceTable, GenerationLimits, TaskId, TaskSpec};

use super::{SynthSpec, SynthTask, SynthWorld};

/// Learning rate shared by all learnable preset tasks.
const PRESET_LEARN_RATE: f64 = 0.05;

/// Verb phrasings used by the synonym preset, canonical form first.
pub const COLLECT_VERBS: [&str; 6] = ["collect", "gather", "harvest", "procure", "acquire", "amass"];
pub const PLACE_VERBS: [&str; 6] = ["place", "put", "deploy", "install", "putdown", "position"];
pub const MAKE_VERBS: [&str; 6] = ["make", "craft", "acquire", "build", "construct", "create"];

/// The core technology tree: (task name, prerequisites). Order is the
/// construction order of every preset.
const TECH_TREE: [(&str, &[&str]); 15] = [
    ("collect drink", &[]),
    ("collect wood", &[]),
    ("place table", &["collect wood"]),
    ("make wood pickaxe", &["place table"]),
    ("make wood sword", &["place table"]),
    ("collect stone", &["make wood pickaxe"]),
    ("place stone", &["collect stone"]),
    ("make stone pickaxe", &["collect stone"]),
    ("make stone sword", &["collect stone"]),
    ("place furnace", &["collect stone"]),
    ("collect coal", &["make wood pickaxe"]),
    ("collect iron", &["make stone pickaxe"]),
    ("make iron pickaxe", &["collect iron", "collect coal", "place furnace"]),
    ("make iron sword", &["collect iron", "collect coal", "place furnace"]),
    ("collect diamond", &["make iron pickaxe"]),
];

/// Repeat counts: quantity variants span 2..=10 for collection tasks and
/// 2..=5 for placement/crafting tasks.
fn repeat_counts(verb: &str) -> std::ops::RangeInclusive<u32> {
    if verb == "collect" {
        2..=10
    } else {
        2..=5
    }
}

/// Far-future skill names (verb, object), each expanded into quantity
/// variants; none is ever learnable.
const CHALLENGE_BASES: [(&str, &str); 31] = [
    ("collect", "obsidian"),
    ("collect", "ruby"),
    ("collect", "emerald"),
    ("collect", "sapphire"),
    ("collect", "amethyst"),
    ("collect", "quartz"),
    ("collect", "topaz"),
    ("collect", "jade"),
    ("collect", "opal"),
    ("collect", "pearl"),
    ("collect", "amber"),
    ("make", "diamond pickaxe"),
    ("make", "diamond sword"),
    ("make", "obsidian pickaxe"),
    ("make", "obsidian sword"),
    ("make", "ruby pickaxe"),
    ("make", "ruby sword"),
    ("make", "emerald pickaxe"),
    ("make", "emerald sword"),
    ("make", "sapphire pickaxe"),
    ("make", "sapphire sword"),
    ("place", "obelisk"),
    ("place", "shrine"),
    ("place", "beacon"),
    ("place", "monolith"),
    ("place", "altar"),
    ("place", "fountain"),
    ("place", "statue"),
    ("place", "archway"),
    ("place", "pylon"),
    ("place", "totem"),
];
const CHALLENGE_COUNTS: std::ops::RangeInclusive<u32> = 2..=34;

fn split_verb(name: &str) -> (&str, &str) {
    name.split_once(' ').expect("task names are verb-object")
}

fn counted_name(name: &str, n: u32) -> String {
    let (verb, rest) = split_verb(name);
    format!("{verb} {n} {rest}")
}

fn rephrase(name: &str, verb_index: usize) -> String {
    let (verb, rest) = split_verb(name);
    let verbs = match verb {
        "collect" => &COLLECT_VERBS,
        "place" => &PLACE_VERBS,
        "make" => &MAKE_VERBS,
        other => panic!("no synonym set for verb {other}"),
    };
    format!("{} {rest}", verbs[verb_index])
}

/// A labelled finite benchmark: the world spec plus ground-truth task
/// classes (disjoint, covering every task).
#[derive(Debug, Clone)]
pub struct SynthBenchmark {
    pub spec: SynthSpec,
    pub interesting: BTreeSet<TaskId>,
    pub boring: BTreeSet<TaskId>,
    pub challenging: BTreeSet<TaskId>,
}

impl SynthBenchmark {
    pub fn world(&self) -> SynthWorld {
        SynthWorld::new(self.spec.clone())
    }

    pub fn total_tasks(&self) -> usize {
        self.interesting.len() + self.boring.len() + self.challenging.len()
    }

    fn assemble(
        tasks: Vec<SynthTask>,
        interesting: BTreeSet<TaskId>,
        boring: BTreeSet<TaskId>,
        challenging: BTreeSet<TaskId>,
    ) -> Self {
        let spec = SynthSpec::new(tasks, 0.01, 0.5).expect("preset specs are well-formed");
        debug_assert_eq!(spec.len(), interesting.len() + boring.len() + challenging.len());
        SynthBenchmark { spec, interesting, boring, challenging }
    }
}

fn challenge_tasks(tasks: &mut Vec<SynthTask>, challenging: &mut BTreeSet<TaskId>) {
    for (verb, object) in CHALLENGE_BASES {
        for n in CHALLENGE_COUNTS {
            let mut task = SynthTask::new(format!("{verb} {n} {object}"), &[], 0.0, 0.0);
            task.initial_q = Some(0.0);
            challenging.insert(task.id.clone());
            tasks.push(task);
        }
    }
}

fn tree_tasks(tasks: &mut Vec<SynthTask>, interesting: &mut BTreeSet<TaskId>) {
    for (name, prereqs) in TECH_TREE {
        let task = SynthTask::new(name, prereqs, PRESET_LEARN_RATE, 0.0);
        interesting.insert(task.id.clone());
        tasks.push(task);
    }
}

fn repeat_tasks(tasks: &mut Vec<SynthTask>, boring: &mut BTreeSet<TaskId>) {
    for (name, _) in TECH_TREE {
        let (verb, _) = split_verb(name);
        for n in repeat_counts(verb) {
            let task = SynthTask::new(counted_name(name, n), &[name], PRESET_LEARN_RATE, 0.0);
            boring.insert(task.id.clone());
            tasks.push(task);
        }
    }
}

/// 15 interesting technology-tree tasks, 90 boring numeric repeats, and
/// 1023 unlearnable challenge tasks.
pub fn crafter_repeats() -> SynthBenchmark {
    let mut tasks = Vec::new();
    let (mut interesting, mut boring, mut challenging) =
        (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    tree_tasks(&mut tasks, &mut interesting);
    repeat_tasks(&mut tasks, &mut boring);
    challenge_tasks(&mut tasks, &mut challenging);
    SynthBenchmark::assemble(tasks, interesting, boring, challenging)
}

/// Like [`crafter_repeats`], but the boring set additionally contains every
/// pairwise compound of interesting tasks ("X and Y"): 195 boring in total.
pub fn crafter_compounds() -> SynthBenchmark {
    let mut bench = crafter_repeats();
    let mut tasks = bench.spec.tasks.clone();
    for (i, (a, _)) in TECH_TREE.iter().enumerate() {
        for (b, _) in TECH_TREE.iter().skip(i + 1) {
            let task = SynthTask::new(format!("{a} and {b}"), &[a, b], PRESET_LEARN_RATE, 0.0);
            bench.boring.insert(task.id.clone());
            tasks.push(task);
        }
    }
    SynthBenchmark::assemble(tasks, bench.interesting, bench.boring, bench.challenging)
}

/// Every learnable task in six verb phrasings: 90 interesting (the
/// technology tree and its rephrasings), 540 boring (numeric repeats and
/// their rephrasings), and the usual 1023 challenge tasks.
pub fn crafter_synonyms() -> SynthBenchmark {
    let mut tasks = Vec::new();
    let (mut interesting, mut boring, mut challenging) =
        (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    // Canonical phrasings first so rephrased tasks can point their
    // prerequisites at canonical names.
    tree_tasks(&mut tasks, &mut interesting);
    repeat_tasks(&mut tasks, &mut boring);
    for verb_index in 1..6 {
        for (name, prereqs) in TECH_TREE {
            let task =
                SynthTask::new(rephrase(name, verb_index), prereqs, PRESET_LEARN_RATE, 0.0);
            interesting.insert(task.id.clone());
            tasks.push(task);
        }
        for (name, _) in TECH_TREE {
            let (verb, _) = split_verb(name);
            for n in repeat_counts(verb) {
                let task = SynthTask::new(
                    counted_name(&rephrase(name, verb_index), n),
                    &[name],
                    PRESET_LEARN_RATE,
                    0.0,
                );
                boring.insert(task.id.clone());
                tasks.push(task);
            }
        }
    }
    challenge_tasks(&mut tasks, &mut challenging);
    SynthBenchmark::assemble(tasks, interesting, boring, challenging)
}

/// Like [`crafter_repeats`], but every second technology-tree root (and its
/// repeats) carries a 0.35 random-policy floor. Success-rate averages are
/// inflated by the floor; learned-task counts are not — useful when the two
/// metrics must be compared.
pub fn crafter_noisy() -> SynthBenchmark {
    let mut bench = crafter_repeats();
    let mut tasks = bench.spec.tasks.clone();
    let noisy: BTreeSet<TaskId> = TECH_TREE
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == 0)
        .map(|(_, (name, _))| TaskId::from(*name))
        .collect();
    for task in &mut tasks {
        if bench.challenging.contains(&task.id) {
            continue;
        }
        let base = task.prereqs.first().cloned().unwrap_or_else(|| task.id.clone());
        if noisy.contains(&task.id) || (bench.boring.contains(&task.id) && noisy.contains(&base)) {
            task.random_rate = 0.35;
        }
    }
    bench.spec = SynthSpec::new(tasks, 0.01, 0.5).expect("preset specs are well-formed");
    bench
}

/// Everything the open-ended kitchen run starts from: the object
/// vocabulary, generation limits for the uniform baseline, a handful of
/// seed tasks, and the learning constants given to tasks created at
/// runtime.
#[derive(Debug, Clone)]
pub struct KitchenSetup {
    pub affordances: AffordanceTable,
    pub limits: GenerationLimits,
    pub seed_tasks: Vec<TaskSpec>,
    pub new_task_learn_rate: f64,
    pub new_task_random_rate: f64,
}

/// The default open-ended kitchen: full affordance table, five
/// single-state recognition tasks to bootstrap from.
pub fn infinite_kitchen() -> KitchenSetup {
    let seed_tasks = [
        r#"[[obj_attributes("Apple", {"visible": True})]]"#,
        r#"[[obj_attributes("Knife", {"visible": True})]]"#,
        r#"[[obj_attributes("Potato", {"visible": True})]]"#,
        r#"[[obj_attributes("Bread", {"visible": True})]]"#,
        r#"[[obj_attributes("Plate", {"visible": True})]]"#,
    ]
    .iter()
    .map(|text| parse_task(text).expect("seed tasks are well-formed"))
    .collect();
    KitchenSetup {
        affordances: AffordanceTable::kitchen(),
        limits: GenerationLimits::default(),
        seed_tasks,
        new_task_learn_rate: 0.3,
        new_task_random_rate: 0.0,
    }
}

/// A named benchmark preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    CrafterRepeats,
    CrafterCompounds,
    CrafterSynonyms,
    CrafterNoisy,
    InfiniteKitchen,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::CrafterRepeats,
        Preset::CrafterCompounds,
        Preset::CrafterSynonyms,
        Preset::CrafterNoisy,
        Preset::InfiniteKitchen,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::CrafterRepeats => "crafter-repeats",
            Preset::CrafterCompounds => "crafter-compounds",
            Preset::CrafterSynonyms => "crafter-synonyms",
            Preset::CrafterNoisy => "crafter-noisy",
            Preset::InfiniteKitchen => "infinite-kitchen",
        }
    }

    pub fn from_name(name: &str) -> Result<Preset> {
        Preset::ALL
            .iter()
            .find(|p| p.name() == name)
            .copied()
            .ok_or_else(|| {
                let known: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::Config(format!("unknown preset '{name}'; known: {}", known.join(", ")))
            })
    }

    /// The finite benchmark for this preset; the open-ended preset has no
    /// fixed census.
    pub fn benchmark(&self) -> Result<SynthBenchmark> {
        match self {
            Preset::CrafterRepeats => Ok(crafter_repeats()),
            Preset::CrafterCompounds => Ok(crafter_compounds()),
            Preset::CrafterSynonyms => Ok(crafter_synonyms()),
            Preset::CrafterNoisy => Ok(crafter_noisy()),
            Preset::InfiniteKitchen => Err(Error::Config(
                "the open-ended kitchen preset has no fixed task census".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::interestingness::OracleMoi;

    use super::*;

    fn ids(set: &BTreeSet<TaskId>) -> BTreeSet<&str> {
        set.iter().map(|id| id.as_str()).collect()
    }

    #[test]
    fn repeats_preset_matches_its_census() {
        let bench = crafter_repeats();
        assert_eq!(bench.interesting.len(), 15);
        assert_eq!(bench.boring.len(), 90);
        assert_eq!(bench.challenging.len(), 1023);
        assert_eq!(bench.total_tasks(), 1128);
        assert_eq!(bench.spec.len(), 1128);
    }

    #[test]
    fn compounds_preset_matches_its_census() {
        let bench = crafter_compounds();
        assert_eq!(bench.interesting.len(), 15);
        assert_eq!(bench.boring.len(), 195);
        assert_eq!(bench.challenging.len(), 1023);
        assert!(bench.boring.contains(&TaskId::from("collect drink and collect wood")));
        // Compounds gate on both members.
        let compound = bench.spec.get(&TaskId::from("collect drink and collect wood")).unwrap();
        assert_eq!(compound.prereqs.len(), 2);
    }

    #[test]
    fn synonyms_preset_matches_its_census() {
        let bench = crafter_synonyms();
        assert_eq!(bench.interesting.len(), 90);
        assert_eq!(bench.boring.len(), 540);
        assert_eq!(bench.challenging.len(), 1023);
        assert!(bench.interesting.contains(&TaskId::from("gather wood")));
        assert!(bench.boring.contains(&TaskId::from("amass 10 diamond")));
        // Rephrased tasks share the canonical prerequisites.
        let crafted = bench.spec.get(&TaskId::from("craft iron sword")).unwrap();
        assert_eq!(crafted.prereqs.len(), 3);
    }

    #[test]
    fn class_labels_are_disjoint_and_cover_the_spec() {
        for bench in [crafter_repeats(), crafter_compounds(), crafter_synonyms(), crafter_noisy()]
        {
            assert!(bench.interesting.is_disjoint(&bench.boring));
            assert!(bench.interesting.is_disjoint(&bench.challenging));
            assert!(bench.boring.is_disjoint(&bench.challenging));
            let mut all = BTreeSet::new();
            all.extend(bench.interesting.iter().cloned());
            all.extend(bench.boring.iter().cloned());
            all.extend(bench.challenging.iter().cloned());
            let spec_ids: BTreeSet<TaskId> = bench.spec.task_ids().into_iter().collect();
            assert_eq!(all, spec_ids);
        }
    }

    #[test]
    fn interesting_sets_agree_with_the_bundled_judges() {
        // The labels and the set-membership judges must never drift apart.
        let repeats = crafter_repeats();
        let judge = OracleMoi::crafter();
        for id in &repeats.interesting {
            assert!(judge.contains(id.as_str()), "{id} missing from judge");
        }
        for id in repeats.boring.iter().chain(&repeats.challenging) {
            assert!(!judge.contains(id.as_str()), "{id} wrongly interesting");
        }
        let synonyms = crafter_synonyms();
        let judge = OracleMoi::crafter_synonyms();
        for id in &synonyms.interesting {
            assert!(judge.contains(id.as_str()), "{id} missing from judge");
        }
        for id in synonyms.boring.iter().chain(&synonyms.challenging) {
            assert!(!judge.contains(id.as_str()), "{id} wrongly interesting");
        }
    }

    #[test]
    fn repeat_names_follow_the_counting_pattern() {
        let bench = crafter_repeats();
        let names = ids(&bench.boring);
        for n in 2..=10 {
            assert!(names.contains(format!("collect {n} wood").as_str()));
        }
        assert!(names.contains("place 5 furnace"));
        assert!(names.contains("make 5 iron sword"));
        assert!(!names.contains("place 6 furnace")); // placement stops at 5
        assert!(!names.contains("collect 11 wood"));
        // Repeats gate on their base skill.
        let repeat = bench.spec.get(&TaskId::from("collect 2 wood")).unwrap();
        assert_eq!(repeat.prereqs, vec![TaskId::from("collect wood")]);
    }

    #[test]
    fn challenge_tasks_never_learn_and_score_zero() {
        let bench = crafter_repeats();
        let world = bench.world();
        let state = super::super::SynthState::initial(&bench.spec);
        let rates = super::super::synth_eval(&state, &bench.spec);
        for id in &bench.challenging {
            assert_eq!(rates[id], 0.0, "{id} must start at zero");
            assert_eq!(world.spec().get(id).unwrap().learn_rate, 0.0);
        }
    }

    #[test]
    fn noisy_preset_floors_alternating_roots() {
        let bench = crafter_noisy();
        assert_eq!(bench.total_tasks(), 1128);
        let spec = &bench.spec;
        assert_eq!(spec.get(&TaskId::from("collect drink")).unwrap().random_rate, 0.35);
        assert_eq!(spec.get(&TaskId::from("collect wood")).unwrap().random_rate, 0.0);
        // Repeats inherit their base's floor.
        assert_eq!(spec.get(&TaskId::from("collect 3 drink")).unwrap().random_rate, 0.35);
        assert_eq!(spec.get(&TaskId::from("collect 3 wood")).unwrap().random_rate, 0.0);
        for id in &bench.challenging {
            assert_eq!(spec.get(id).unwrap().random_rate, 0.0);
        }
    }

    #[test]
    fn presets_resolve_by_name() {
        for preset in Preset::ALL {
            assert_eq!(Preset::from_name(preset.name()).unwrap(), preset);
        }
        assert!(Preset::from_name("crafter").is_err());
        assert!(Preset::CrafterRepeats.benchmark().is_ok());
        assert!(Preset::InfiniteKitchen.benchmark().is_err());
    }

    #[test]
    fn kitchen_setup_bootstraps_with_valid_tasks() {
        let setup = infinite_kitchen();
        assert_eq!(setup.seed_tasks.len(), 5);
        for task in &setup.seed_tasks {
            setup.affordances.validate_task(task).unwrap();
            assert_eq!(task.len(), 1);
        }
    }
}

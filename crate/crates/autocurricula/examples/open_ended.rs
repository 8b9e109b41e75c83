//! An open-ended run: the task pool grows while the agent trains.
//!
//! The crafting world starts with a single seed task ("collect wood") and
//! accepts new tasks mid-run. Under the omni condition a proposer looks at
//! what the agent already does well and suggests tasks one step past that
//! frontier, while an interestingness judge keeps already-mastered material
//! from dominating the batch. This example uses the scripted frontier
//! mocks, so it runs offline; point the config at an HTTP backend and the
//! same loop drives a live model.
//!
//! Run with: `cargo run --release --example open_ended`

use std::collections::BTreeSet;

use autocurricula::harness::{run_experiment, Condition, ExperimentConfig};

fn main() -> autocurricula::Result<()> {
    let config = ExperimentConfig::from_toml_str(
        r#"
        [experiment]
        conditions = ["uniform", "omni"]
        seeds = [5]
        total_updates = 200
        batch_size = 16
        mode = "infinite"

        [world]
        kind = "chaincraft"
        eval_episodes = 16
        seed_chains = [["wood"]]

        [curriculum]
        eval_frequency_updates = 10
        alpha_learned_threshold = 0.6

        [moi]
        backend = "mock-frontier"

        [growth]
        add_frequency_updates = 20
        tasks_per_addition = 2
        max_chain = 3
        "#,
    )?;

    let record = run_experiment(&config)?;
    for failure in &record.failures {
        eprintln!("{} seed {} failed: {}", failure.condition.name(), failure.seed, failure.error);
    }

    for condition in [Condition::Uniform, Condition::Omni] {
        println!("\n== {} ==", condition.name());
        println!("{:>6}  {:>5}  {:>7}  task pool", "round", "tasks", "learned");
        let last = record.final_round(condition).expect("rounds recorded");
        for round in 1..=last {
            let ids: BTreeSet<&str> = record
                .task_rows
                .iter()
                .filter(|r| r.condition == condition && r.round == round)
                .map(|r| r.task_id.as_str())
                .collect();
            let learned = record.learned_counts(condition, round);
            let new_this_round: Vec<&str> = if round == 1 {
                ids.iter().copied().collect()
            } else {
                let prev: BTreeSet<&str> = record
                    .task_rows
                    .iter()
                    .filter(|r| r.condition == condition && r.round == round - 1)
                    .map(|r| r.task_id.as_str())
                    .collect();
                ids.difference(&prev).copied().collect()
            };
            println!(
                "{round:>6}  {:>5}  {:>7}  {}",
                ids.len(),
                learned[0] as usize,
                if new_this_round.is_empty() {
                    String::new()
                } else {
                    format!("+ {}", new_this_round.join(", "))
                }
            );
        }
    }
    Ok(())
}

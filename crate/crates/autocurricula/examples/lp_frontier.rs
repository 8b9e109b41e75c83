//! Learning-progress tracking on a scripted curriculum.
//!
//! Three tasks follow different success trajectories: one is already
//! mastered, one is being learned right now, and one stays out of reach.
//! The dual moving averages turn those trajectories into a learning-progress
//! signal that peaks on the task in the middle of its learning curve, and
//! the sampling weights follow.
//!
//! Run with: `cargo run --example lp_frontier`

use std::collections::BTreeMap;

use autocurricula::curriculum::{CurriculumConfig, CurriculumState};
use autocurricula::taskdsl::TaskId;

fn main() -> autocurricula::Result<()> {
    let mut curriculum = CurriculumState::new(CurriculumConfig::default())?;
    let mastered = TaskId::from("pick up the apple");
    let learning = TaskId::from("slice the apple");
    let hopeless = TaskId::from("cook a five-course dinner");
    // Second argument: a random policy's success rate, the floor that
    // evaluation scores are normalized against.
    curriculum.add_task(mastered.clone(), 0.2)?;
    curriculum.add_task(learning.clone(), 0.0)?;
    curriculum.add_task(hopeless.clone(), 0.0)?;

    println!("round  {:>28}  {:>28}  {:>28}", mastered, learning, hopeless);
    for round in 0..30 {
        // Scripted evaluations: mastered stays high, learning ramps from
        // 0.05 to 0.95 over rounds 5..=15, hopeless never moves.
        let ramp = ((round as f64 - 5.0) / 10.0).clamp(0.0, 1.0);
        let evals: BTreeMap<TaskId, f64> = [
            (mastered.clone(), 0.95),
            (learning.clone(), 0.05 + 0.9 * ramp),
            (hopeless.clone(), 0.01),
        ]
        .into_iter()
        .collect();
        curriculum.record_evaluation(&evals)?;

        let lp = curriculum.lp_by_task();
        let weights = curriculum.weights()?;
        let cell = |id: &TaskId| {
            format!("lp {:.3} w {:.3}", lp[id], weights.weight(id).expect("task registered"))
        };
        println!(
            "{round:>5}  {:>28}  {:>28}  {:>28}",
            cell(&mastered),
            cell(&learning),
            cell(&hopeless)
        );
    }

    let weights = curriculum.weights()?;
    println!("\nfinal sampling pick (argmax): {}", weights.argmax());
    println!("\nfull snapshot:\n{}", curriculum.snapshot_text()?);
    Ok(())
}

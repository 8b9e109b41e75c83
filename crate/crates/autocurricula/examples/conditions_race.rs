//! Racing the sampling conditions on a fixed benchmark.
//!
//! Four ways to pick the next training task — uniform, learning-progress,
//! learning-progress filtered by a judged interest partition, and the same
//! with ground-truth interest — run over the repeats benchmark: 15 genuinely
//! interesting tasks buried under 90 boring numeric repeats and a thousand
//! too-hard challenges. The interest-filtered conditions stop wasting their
//! batch budget on repeats and pull ahead on tasks learned.
//!
//! Run with: `cargo run --release --example conditions_race`

use autocurricula::harness::{emit, run_experiment, ExperimentConfig};

fn main() -> autocurricula::Result<()> {
    let config = ExperimentConfig::from_toml_str(
        r#"
        [experiment]
        conditions = ["uniform", "lp", "omni", "oracle"]
        seeds = [1, 2, 3]
        total_updates = 400
        batch_size = 32
        metric_scope = "interesting"

        [world]
        kind = "synthetic"
        preset = "crafter-repeats"

        [curriculum]
        eval_frequency_updates = 20
        alpha_learned_threshold = 0.5

        [moi]
        backend = "mock-repeat"
        "#,
    )?;

    let record = run_experiment(&config)?;
    for failure in &record.failures {
        eprintln!("{} seed {} failed: {}", failure.condition.name(), failure.seed, failure.error);
    }

    println!("tasks learned (of 15 interesting), median across 3 seeds:");
    println!("{:>8}  {:>8}  {:>8}  {:>8}  {:>8}", "round", "uniform", "lp", "omni", "oracle");
    let conditions = record.conditions();
    let last = record.final_round(conditions[0]).expect("runs recorded rounds");
    for round in 1..=last {
        print!("{round:>8}");
        for &condition in &conditions {
            let counts = record.learned_counts(condition, round);
            let mut sorted = counts.clone();
            sorted.sort_by(f64::total_cmp);
            print!("  {:>8.1}", sorted[sorted.len() / 2]);
        }
        println!();
    }

    let dir = std::env::temp_dir().join("autocurricula_race");
    emit::emit_metrics_csv(&record, &dir, "race")?;
    emit::emit_plots(&record, &dir, "race")?;
    println!("\nCSVs and SVG charts written under {}", dir.display());
    Ok(())
}

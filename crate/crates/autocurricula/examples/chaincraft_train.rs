//! Training the tabular learner on the crafting chain.
//!
//! The bundled world is a small technology tree: wood unlocks a table, the
//! table unlocks tools, tools unlock stone, coal, and iron. A value learner
//! trains on whatever tasks it is given; this example feeds it the whole
//! chain uniformly and prints how each task's evaluated success rate climbs.
//! Shallow tasks fall fast, deeper ones only move once their prerequisites
//! are reliable, and the deepest recipe never cracks within this budget —
//! reward arrives only on completion, which is what makes multi-step
//! practice chains (see the open_ended example) worth proposing. The pearl
//! task never moves because nothing in the world produces a pearl.
//!
//! Run with: `cargo run --example chaincraft_train` (release mode is faster)

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use autocurricula::world::{ChainCraftWorld, World};

fn main() -> autocurricula::Result<()> {
    let mut world = ChainCraftWorld::wood_chain_world(7)?;
    let ids = world.task_ids();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    println!("random-policy floors:");
    for id in &ids {
        println!("  {:.3}  {}", world.random_success(id)?, id);
    }

    let short = |id: &str| -> String { id.chars().take(12).collect() };
    print!("\n{:>6}", "batch");
    for id in &ids {
        print!("  {:>12}", short(id.as_str()));
    }
    println!();

    for block in 1..=14 {
        // Train on 40 uniform batches of 8 episodes, then evaluate.
        for _ in 0..40 {
            let batch: Vec<_> =
                (0..8).map(|_| ids[rng.random_range(0..ids.len())].clone()).collect();
            world.train(&batch, &mut rng)?;
        }
        let evals = world.evaluate(&mut rng)?;
        print!("{:>6}", block * 40);
        for id in &ids {
            print!("  {:>12.2}", evals[id]);
        }
        println!();
    }
    Ok(())
}

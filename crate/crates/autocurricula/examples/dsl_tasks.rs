//! The task language: parse, canonicalize, validate, generate.
//!
//! Tasks are sequences of environment states, each state a set of object
//! attribute requirements. The textual form round-trips through the parser;
//! canonicalization gives every task a stable identity (optionally blind to
//! object names or attribute values); the affordance table rejects tasks no
//! agent could ever satisfy; and the generator samples valid tasks directly.
//!
//! Run with: `cargo run --example dsl_tasks`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use autocurricula::taskdsl::{
    canonicalize, parse_task, random_task, serialize_task, Abstraction, AffordanceTable,
    GenerationLimits,
};

fn main() -> autocurricula::Result<()> {
    // Parse a two-state task: pick the apple up, then put it down.
    let text = r#"[[obj_attributes("Apple", {"isPickedUp": True})], [obj_attributes("Apple", {"isPickedUp": False})]]"#;
    let task = parse_task(text)?;
    println!("parsed {} states", task.len());
    println!("serialized: {}", serialize_task(&task));

    // Identity with and without object-name abstraction.
    for abstraction in [Abstraction::None, Abstraction::ObjectType] {
        println!("{abstraction:?} identity: {}", canonicalize(&task, abstraction));
    }

    // The kitchen affordance table knows which attributes each object
    // supports; a task asking for a cooked sink is rejected.
    let table = AffordanceTable::kitchen();
    println!("\nkitchen objects: {}", table.object_names().count());
    let impossible = parse_task(r#"[[obj_attributes("Sink", {"isCooked": True})]]"#)?;
    match table.validate_task(&impossible) {
        Ok(()) => println!("unexpectedly fine"),
        Err(e) => println!("rejected as expected: {e}"),
    }

    // Sample random tasks that are valid by construction.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let limits = GenerationLimits { max_states: 2, ..GenerationLimits::default() };
    println!("\nrandom valid tasks:");
    for _ in 0..4 {
        let task = random_task(&mut rng, &table, &limits)?;
        table.validate_task(&task)?;
        println!("  {}", serialize_task(&task));
    }
    Ok(())
}

//! Splitting a task population into interesting and boring.
//!
//! The partition routine walks tasks from highest to lowest success rate,
//! asking a model of interestingness about each batch in the context of
//! what is already judged interesting, so one pass covers the whole set.
//! Here the judge is a scripted mock that finds numeric repeats boring —
//! swap in an HTTP-backed judge and the protocol stays identical.
//!
//! Run with: `cargo run --example moi_partition`

use std::collections::BTreeMap;
use std::sync::Arc;

use autocurricula::fmclient::{FmClient, Matcher, MockBackend};
use autocurricula::interestingness::{
    crafter_repeat_rule_reply, partition, FmMoi, FmMoiConfig, PromptTemplate,
};
use autocurricula::taskdsl::TaskId;

fn main() -> autocurricula::Result<()> {
    // Success rates as a curriculum would report them: the agent does well
    // on wood-related tasks, poorly on the deep technology chain.
    let rates: BTreeMap<TaskId, f64> = [
        ("collect wood", 0.92),
        ("collect 2 wood", 0.88),
        ("collect 3 wood", 0.85),
        ("place table", 0.71),
        ("place 2 table", 0.64),
        ("make wood pickaxe", 0.38),
        ("collect stone", 0.22),
        ("make stone pickaxe", 0.09),
        ("collect diamond", 0.01),
    ]
    .into_iter()
    .map(|(id, rate)| (TaskId::from(id), rate))
    .collect();

    // A scripted judge: any task that mentions a count above one is boring.
    let backend = MockBackend::strict().rule_fn(
        Matcher::contains("interesting"),
        |request| crafter_repeat_rule_reply(&request.user_text),
    );
    let judge = FmMoi::new(
        Arc::new(FmClient::new(Box::new(backend))),
        PromptTemplate::crafter(),
        FmMoiConfig::default(),
    )?;

    let result = partition(&rates, &judge)?;
    println!("partition finished in {} rounds\n", result.rounds);
    for (id, interesting) in result.classification() {
        println!(
            "{:>12}  {:.2}  {}",
            if interesting { "interesting" } else { "boring" },
            rates[&id],
            id
        );
    }
    Ok(())
}

//! A task-proposal loop: archive in, new tasks out.
//!
//! The proposer prompts a completion model with what the agent already does
//! well and what it cannot do yet, then parses, deduplicates, and validates
//! the suggested tasks. This example scripts the model with a mock backend
//! so the full loop runs offline; the prompt and parsing are exactly what
//! an HTTP backend would see.
//!
//! Run with: `cargo run --example propose_loop`

use std::sync::Arc;

use autocurricula::fmclient::{FmClient, Matcher, MockBackend};
use autocurricula::proposer::{ProposerConfig, TaskArchive, TaskProposer, DONE_WELL_HEADER};
use autocurricula::taskdsl::{parse_task, serialize_task, AffordanceTable};

fn main() -> autocurricula::Result<()> {
    // Archive: one mastered task, one the agent keeps failing.
    let mut archive = TaskArchive::new(0.8)?;
    let mastered = parse_task(r#"[[obj_attributes("Apple", {"isPickedUp": True})]]"#)?;
    let failing = parse_task(r#"[[obj_attributes("Potato", {"isCooked": True})]]"#)?;
    let mastered_id = archive_add(&mut archive, mastered, "pick up the apple");
    let failing_id = archive_add(&mut archive, failing, "cook the potato");
    archive.set_success(&mastered_id, 0.95)?;
    archive.note_sampled(&failing_id)?;
    archive.set_success(&failing_id, 0.1)?;

    // Scripted model: always suggests slicing the apple, cooling it, and
    // (redundantly) picking it up — the duplicate gets filtered out.
    let reply = "Reasoning: The agent handles the apple well; object-state changes are next.\n\
                 Next tasks in natural language:\n\
                 1. slice the apple\n\
                 2. chill the apple\n\
                 3. pick up the apple\n\
                 Next tasks as sequence of environment states:\n\
                 1. [[obj_attributes(\"Apple\", {\"isSliced\": True})]]\n\
                 2. [[obj_attributes(\"Apple\", {\"temperature\": \"Cold\"})]]\n\
                 3. [[obj_attributes(\"Apple\", {\"isPickedUp\": True})]]\n";
    let backend =
        MockBackend::strict().rule(Matcher::contains(DONE_WELL_HEADER), reply);
    let client = Arc::new(FmClient::new(Box::new(backend)));
    let proposer = TaskProposer::new(client, ProposerConfig::default())?;

    let proposals = proposer.propose_tasks(&archive, &AffordanceTable::kitchen())?;
    println!("{} fresh proposals (the duplicate was dropped):", proposals.len());
    for line in &proposals {
        println!(
            "  {}  ->  {}",
            line.natural_language.as_deref().unwrap_or("(no description)"),
            serialize_task(&line.spec)
        );
    }

    // Fold them back into the archive, ready for the next round.
    for line in proposals {
        archive.add(line.spec, line.natural_language);
    }
    println!("archive now holds {} tasks", archive.len());
    Ok(())
}

fn archive_add(
    archive: &mut TaskArchive,
    task: autocurricula::taskdsl::TaskSpec,
    name: &str,
) -> autocurricula::taskdsl::TaskId {
    let id = autocurricula::taskdsl::canonicalize(&task, autocurricula::taskdsl::Abstraction::None);
    archive.add(task, Some(name.to_string()));
    id
}

//! The completion client's disk cache.
//!
//! Every (model, prompt, temperature) triple is cached on first completion;
//! repeats are served from the cache file without touching the backend, and
//! a fresh client pointed at the same file starts warm. That makes long
//! experiment reruns cheap and exactly reproducible.
//!
//! Run with: `cargo run --example cached_client`

use autocurricula::fmclient::{CompletionRequest, FmClient, Matcher, MockBackend};

fn main() -> autocurricula::Result<()> {
    let dir = std::env::temp_dir().join("autocurricula_cache_demo");
    std::fs::create_dir_all(&dir)?;
    let cache_path = dir.join("completions.jsonl");
    let _ = std::fs::remove_file(&cache_path);

    let backend = || {
        Box::new(
            MockBackend::lenient("I have no idea.")
                .rule(Matcher::contains("capital"), "Paris, of course."),
        )
    };

    let client = FmClient::with_cache_file(backend(), &cache_path)?;
    let request = CompletionRequest::new("mock-model", "What is the capital of France?");

    let (first, was_cached) = client.complete_tracked(&request)?;
    println!("first call:  cached={was_cached} backend_calls={}", client.backend_calls());
    let (second, was_cached) = client.complete_tracked(&request)?;
    println!("second call: cached={was_cached} backend_calls={}", client.backend_calls());
    assert_eq!(first, second);

    // A brand-new client over the same file never calls the backend.
    let warm = FmClient::with_cache_file(backend(), &cache_path)?;
    let answer = warm.complete(&request)?;
    println!(
        "warm client: backend_calls={} cache_hits={} answer={answer:?}",
        warm.backend_calls(),
        warm.cache_hits()
    );

    // Different sampling parameters are a different cache entry.
    let hotter = CompletionRequest { temperature: 0.7, ..request.clone() };
    warm.complete(&hotter)?;
    println!("after a hotter request: backend_calls={}", warm.backend_calls());
    Ok(())
}

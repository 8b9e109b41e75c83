//! Interestingness without a language model: lexical clustering.
//!
//! Task names are embedded as hashed character n-gram vectors and clustered
//! by cosine density. A candidate that lands in the same cluster as an
//! already-mastered task is judged boring — counted repeats collapse onto
//! their root task. Lexically distant paraphrases keep their own cluster,
//! which is exactly the gap a language-model judge closes.
//!
//! Run with: `cargo run --example embed_clusters`

use autocurricula::interestingness::{
    density_clusters, EmbeddingMoi, Moi, MoiQuery, NgramEmbedder, DEFAULT_EPS, DEFAULT_MIN_PTS,
};

fn main() -> autocurricula::Result<()> {
    let names = [
        "collect wood",
        "collect 2 wood",
        "collect 3 wood",
        "gather some wood",
        "place table",
        "make wood pickaxe",
        "collect diamond",
    ];

    // Raw clustering: which names group together?
    let embedder = NgramEmbedder::default();
    let points: Vec<Vec<f64>> = names.iter().map(|n| embedder.embed(n)).collect();
    let labels = density_clusters(&points, DEFAULT_EPS, DEFAULT_MIN_PTS);
    println!("cluster  name");
    for (name, label) in names.iter().zip(&labels) {
        println!("{label:>7}  {name}");
    }

    // The same machinery as an interestingness judge: candidates sharing a
    // cluster with a done-well task are boring.
    let moi = EmbeddingMoi::default();
    let query = MoiQuery::new(
        vec!["collect wood".into(), "place table".into()],
        vec![
            "collect 2 wood".into(),
            "gather some wood".into(),
            "make wood pickaxe".into(),
            "collect diamond".into(),
        ],
    )?;
    println!("\njudgments given 'collect wood' and 'place table' are mastered:");
    for verdict in moi.predict(&query)? {
        println!(
            "{:>12}  {}",
            if verdict.interesting { "interesting" } else { "boring" },
            verdict.task
        );
    }
    Ok(())
}

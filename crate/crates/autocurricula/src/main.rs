//! Thin command-line front end over the library: run experiment grids,
//! partition task sets by interestingness, generate random tasks, summarize
//! result CSVs, and render charts. Exit codes: 0 on success, 1 for
//! configuration or file problems, 2 for completion-backend failures, 3 for
//! evaluation or assertion failures.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use autocurricula::harness::{
    build_judge, emit, run_experiment, stats, Condition, ExperimentConfig, JudgeBackend,
    MoiSection,
};
use autocurricula::interestingness::{partition, EmbeddingMoi, Moi, PartitionResult};
use autocurricula::proposer::uniform_task_batch;
use autocurricula::taskdsl::{serialize_task, AffordanceTable, GenerationLimits, TaskId};
use autocurricula::{Error, Result};

#[derive(Parser)]
#[command(
    name = "autocurricula",
    version,
    about = "Learning-progress curricula filtered by a model of task interestingness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid described by a config file and write CSVs.
    Run {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Directory the result files go into.
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        /// File-name stem for the result files.
        #[arg(long, default_value = "run")]
        stem: String,
        /// Also render SVG charts next to the CSVs.
        #[arg(long)]
        plots: bool,
    },
    /// Split tasks into interesting and boring given their success rates.
    Partition {
        /// CSV with a `task_id,success` header.
        #[arg(long)]
        rates: PathBuf,
        /// Judge: mock-repeat, mock-compound, mock-synonym-prior,
        /// mock-frontier, http, or embed.
        #[arg(long, default_value = "mock-repeat")]
        judge: String,
        /// Prompt template: crafter, crafter-updated, or a file path.
        #[arg(long, default_value = "crafter")]
        template: String,
        /// Model name stamped on completion requests.
        #[arg(long, default_value = "mock-model")]
        model: String,
        /// Endpoint for the http judge (environment when unset).
        #[arg(long)]
        base_url: Option<String>,
    },
    /// Generate random achievable tasks from an affordance table.
    GenTasks {
        /// Affordance table file ("name: flag, ..." lines); bundled kitchen
        /// table when unset.
        #[arg(long)]
        affordances: Option<PathBuf>,
        /// How many tasks to print.
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Most environment states per task.
        #[arg(long, default_value_t = 3)]
        max_states: usize,
    },
    /// Summarize an aggregates CSV: learned-task counts per condition with
    /// confidence intervals, plus pairwise rank tests.
    Stats {
        /// Aggregates CSV written by `run`.
        #[arg(long)]
        aggregates: PathBuf,
        /// Evaluation round to summarize (default: each condition's last).
        #[arg(long)]
        round: Option<u32>,
    },
    /// Render SVG charts from result CSVs.
    Plot {
        /// Per-task CSV written by `run`.
        #[arg(long)]
        tasks: PathBuf,
        /// Aggregates CSV written by `run`.
        #[arg(long)]
        aggregates: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value = "run")]
        stem: String,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out_dir, stem, plots } => cmd_run(&config, &out_dir, &stem, plots),
        Command::Partition { rates, judge, template, model, base_url } => {
            cmd_partition(&rates, &judge, template, model, base_url)
        }
        Command::GenTasks { affordances, count, seed, max_states } => {
            cmd_gen_tasks(affordances.as_deref(), count, seed, max_states)
        }
        Command::Stats { aggregates, round } => cmd_stats(&aggregates, round),
        Command::Plot { tasks, aggregates, out_dir, stem } => {
            cmd_plot(&tasks, &aggregates, &out_dir, &stem)
        }
    }
}

fn cmd_run(config_path: &Path, out_dir: &Path, stem: &str, plots: bool) -> Result<()> {
    let config = ExperimentConfig::from_path(config_path)?;
    let record = run_experiment(&config)?;
    for failure in &record.failures {
        eprintln!(
            "warning: {} seed {} failed: {}",
            failure.condition.name(),
            failure.seed,
            failure.error
        );
    }
    if record.aggregate_rows.is_empty() {
        return Err(Error::Evaluation("every run failed; nothing to write".into()));
    }
    emit::emit_metrics_csv(&record, out_dir, stem)?;
    println!("wrote {}", out_dir.join(format!("{stem}_tasks.csv")).display());
    println!("wrote {}", out_dir.join(format!("{stem}_aggregates.csv")).display());
    if plots {
        emit::emit_plots(&record, out_dir, stem)?;
        println!("wrote {}", out_dir.join(format!("{stem}_aggregates.svg")).display());
    }
    for condition in record.conditions() {
        let round = record.final_round(condition).expect("condition has rows");
        let learned = record.learned_counts(condition, round);
        println!(
            "{}: round {round}, learned per seed {:?}",
            condition.name(),
            learned.iter().map(|v| *v as usize).collect::<Vec<_>>()
        );
    }
    Ok(())
}

/// Read a `task_id,success` CSV into a rate map.
fn read_rates(path: &Path) -> Result<BTreeMap<TaskId, f64>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut rates = BTreeMap::new();
    for (i, row) in reader.deserialize::<(String, f64)>().enumerate() {
        let (id, success) = row.map_err(|e| Error::Parse {
            line: i + 2,
            col: 1,
            msg: format!("{}: {e}", path.display()),
        })?;
        rates.insert(TaskId::new(id), success);
    }
    if rates.is_empty() {
        return Err(Error::Config(format!("{} holds no rates", path.display())));
    }
    Ok(rates)
}

fn cmd_partition(
    rates_path: &Path,
    judge: &str,
    template: String,
    model: String,
    base_url: Option<String>,
) -> Result<()> {
    let rates = read_rates(rates_path)?;
    let result: PartitionResult = if judge == "embed" {
        partition(&rates, &EmbeddingMoi::default())?
    } else {
        let moi = MoiSection { backend: JudgeBackend::from_name(judge)?, template, model, base_url };
        let judge = build_judge(&moi)?;
        partition(&rates, &judge as &dyn Moi)?
    };
    println!("rounds: {}", result.rounds);
    println!("interesting: {}", result.interesting.len());
    println!("boring: {}", result.boring.len());
    for (id, interesting) in result.classification() {
        println!("{}\t{}", if interesting { "interesting" } else { "boring" }, id);
    }
    Ok(())
}

fn cmd_gen_tasks(
    affordances: Option<&Path>,
    count: usize,
    seed: u64,
    max_states: usize,
) -> Result<()> {
    let table = match affordances {
        Some(path) => AffordanceTable::parse(&std::fs::read_to_string(path)?)?,
        None => AffordanceTable::kitchen(),
    };
    let limits = GenerationLimits { max_states, ..GenerationLimits::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for task in uniform_task_batch(&mut rng, &table, &limits, count)? {
        println!("{}", serialize_task(&task));
    }
    Ok(())
}

fn cmd_stats(aggregates: &Path, round: Option<u32>) -> Result<()> {
    let rows = emit::read_aggregate_csv(aggregates)?;
    if rows.is_empty() {
        return Err(Error::Config(format!("{} holds no rows", aggregates.display())));
    }
    let conditions: Vec<Condition> = rows
        .iter()
        .map(|r| r.condition)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut counts_by_condition: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    for &condition in &conditions {
        let last = rows
            .iter()
            .filter(|r| r.condition == condition)
            .map(|r| r.round)
            .max()
            .expect("condition came from the rows");
        let at = round.unwrap_or(last);
        let counts: Vec<f64> = rows
            .iter()
            .filter(|r| r.condition == condition && r.round == at)
            .map(|r| r.learned_count as f64)
            .collect();
        if counts.is_empty() {
            return Err(Error::Config(format!(
                "no rows for condition {} at round {at}",
                condition.name()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ci = stats::bootstrap_ci(&counts, stats::BOOTSTRAP_ITERS, stats::CONFIDENCE_LEVEL, &mut rng)?;
        println!(
            "{}: round {at}, {} seeds, median learned {:.1}, 95% CI [{:.1}, {:.1}]",
            condition.name(),
            counts.len(),
            ci.median,
            ci.low,
            ci.high
        );
        counts_by_condition.insert(condition, counts);
    }
    for (i, &a) in conditions.iter().enumerate() {
        for &b in &conditions[i + 1..] {
            let result = stats::mann_whitney_u(&counts_by_condition[&a], &counts_by_condition[&b])?;
            println!(
                "{} vs {}: U = {:.1}, p = {:.4} ({})",
                a.name(),
                b.name(),
                result.u,
                result.p,
                if result.exact { "exact" } else { "normal approximation" }
            );
        }
    }
    Ok(())
}

fn cmd_plot(tasks: &Path, aggregates: &Path, out_dir: &Path, stem: &str) -> Result<()> {
    let record = autocurricula::harness::ExperimentRecord {
        task_rows: emit::read_task_csv(tasks)?,
        aggregate_rows: emit::read_aggregate_csv(aggregates)?,
        failures: Vec::new(),
    };
    emit::emit_plots(&record, out_dir, stem)?;
    println!("wrote {}", out_dir.join(format!("{stem}_aggregates.svg")).display());
    if let Some(first) = record.task_rows.first() {
        println!(
            "wrote {}",
            out_dir
                .join(format!("{stem}_heatmap_{}_{}.svg", first.condition.name(), first.seed))
                .display()
        );
    }
    Ok(())
}

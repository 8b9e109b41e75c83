//! Result emission: per-task and aggregate CSV files (byte-deterministic),
//! CSV read-back, and self-contained SVG charts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taskdsl::TaskId;

use super::{AggregateRow, Condition, ExperimentRecord, TaskRow};

/// Serialization image of [`TaskRow`] with the frozen column order.
#[derive(Debug, Serialize, Deserialize)]
struct TaskCsvRow {
    condition: String,
    seed: u64,
    round: u32,
    task_id: String,
    success: f64,
    weight: f64,
}

/// Serialization image of [`AggregateRow`] with the frozen column order.
#[derive(Debug, Serialize, Deserialize)]
struct AggregateCsvRow {
    condition: String,
    seed: u64,
    round: u32,
    avg_success: f64,
    learned_count: u64,
    ci_low: f64,
    ci_high: f64,
}

/// An IO-class error carrying the path and the action that failed.
fn io_context(action: &str, path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(format!("cannot {action} {}: {e}", path.display())))
}

/// Write the per-task rows: one line per (condition, seed, round, task).
/// Row order follows the record; identical records produce identical bytes.
pub fn emit_task_csv(record: &ExperimentRecord, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| io_context("write", path, e))?;
    for row in &record.task_rows {
        writer
            .serialize(TaskCsvRow {
                condition: row.condition.name().to_string(),
                seed: row.seed,
                round: row.round,
                task_id: row.task_id.to_string(),
                success: row.success,
                weight: row.weight,
            })
            .map_err(|e| io_context("write", path, e))?;
    }
    writer.flush().map_err(|e| io_context("flush", path, e))
}

/// Write the aggregate rows: one line per (condition, seed, round), with the
/// cross-seed confidence interval for that condition and round repeated on
/// each seed's line.
pub fn emit_aggregate_csv(record: &ExperimentRecord, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| io_context("write", path, e))?;
    for row in &record.aggregate_rows {
        writer
            .serialize(AggregateCsvRow {
                condition: row.condition.name().to_string(),
                seed: row.seed,
                round: row.round,
                avg_success: row.avg_success,
                learned_count: row.learned_count as u64,
                ci_low: row.ci_low,
                ci_high: row.ci_high,
            })
            .map_err(|e| io_context("write", path, e))?;
    }
    writer.flush().map_err(|e| io_context("flush", path, e))
}

/// Write both CSVs: `<stem>_tasks.csv` and `<stem>_aggregates.csv` in `dir`.
pub fn emit_metrics_csv(record: &ExperimentRecord, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| io_context("create", dir, e))?;
    emit_task_csv(record, &dir.join(format!("{stem}_tasks.csv")))?;
    emit_aggregate_csv(record, &dir.join(format!("{stem}_aggregates.csv")))
}

/// Read a per-task CSV back into rows.
pub fn read_task_csv(path: &Path) -> Result<Vec<TaskRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| io_context("read", path, e))?;
    let mut rows = Vec::new();
    for record in reader.deserialize::<TaskCsvRow>() {
        let row = record.map_err(|e| Error::Parse {
            line: rows.len() + 2,
            col: 1,
            msg: format!("{}: {e}", path.display()),
        })?;
        rows.push(TaskRow {
            condition: Condition::from_name(&row.condition)?,
            seed: row.seed,
            round: row.round,
            task_id: TaskId::new(row.task_id),
            success: row.success,
            weight: row.weight,
        });
    }
    Ok(rows)
}

/// Read an aggregate CSV back into rows.
pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| io_context("read", path, e))?;
    let mut rows = Vec::new();
    for record in reader.deserialize::<AggregateCsvRow>() {
        let row = record.map_err(|e| Error::Parse {
            line: rows.len() + 2,
            col: 1,
            msg: format!("{}: {e}", path.display()),
        })?;
        rows.push(AggregateRow {
            condition: Condition::from_name(&row.condition)?,
            seed: row.seed,
            round: row.round,
            avg_success: row.avg_success,
            learned_count: row.learned_count as usize,
            ci_low: row.ci_low,
            ci_high: row.ci_high,
        });
    }
    Ok(rows)
}

const CHART_COLORS: [&str; 5] = ["#1965b0", "#dc050c", "#4eb265", "#f7a600", "#882e72"];

fn color_for(index: usize) -> &'static str {
    CHART_COLORS[index % CHART_COLORS.len()]
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Format a float for SVG coordinates: short and deterministic.
fn coord(v: f64) -> String {
    format!("{:.2}", v)
}

struct Panel {
    title: &'static str,
    /// condition -> round -> median value across seeds
    series: BTreeMap<Condition, BTreeMap<u32, f64>>,
    y_max: f64,
}

/// Line chart of the aggregate metrics: one panel for average success, one
/// for learned-task count, one polyline per condition (median across seeds).
pub fn render_aggregate_chart(record: &ExperimentRecord) -> Result<String> {
    if record.aggregate_rows.is_empty() {
        return Err(Error::Evaluation("no aggregate rows to chart".into()));
    }
    // Group values per (condition, round) across seeds.
    let mut avg: BTreeMap<(Condition, u32), Vec<f64>> = BTreeMap::new();
    let mut learned: BTreeMap<(Condition, u32), Vec<f64>> = BTreeMap::new();
    let mut max_round = 0u32;
    for row in &record.aggregate_rows {
        avg.entry((row.condition, row.round)).or_default().push(row.avg_success);
        learned.entry((row.condition, row.round)).or_default().push(row.learned_count as f64);
        max_round = max_round.max(row.round);
    }
    let fold = |input: BTreeMap<(Condition, u32), Vec<f64>>| -> Result<BTreeMap<Condition, BTreeMap<u32, f64>>> {
        let mut out: BTreeMap<Condition, BTreeMap<u32, f64>> = BTreeMap::new();
        for ((condition, round), values) in input {
            out.entry(condition).or_default().insert(round, stats::median(&values)?);
        }
        Ok(out)
    };
    use super::stats;
    let learned_folded = fold(learned)?;
    let learned_max = learned_folded
        .values()
        .flat_map(|by_round| by_round.values())
        .fold(1.0f64, |acc, v| acc.max(*v));
    let panels = [
        Panel { title: "average success", series: fold(avg)?, y_max: 1.0 },
        Panel { title: "tasks learned", series: learned_folded, y_max: learned_max },
    ];

    const W: f64 = 420.0;
    const H: f64 = 300.0;
    const MARGIN: f64 = 42.0;
    let total_w = W * panels.len() as f64;
    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {total_w} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{total_w}\" height=\"{H}\" fill=\"white\"/>\n"
    )
    .expect("writing to String cannot fail");
    for (p, panel) in panels.iter().enumerate() {
        let x0 = W * p as f64 + MARGIN;
        let x1 = W * (p as f64 + 1.0) - 14.0;
        let y0 = H - MARGIN;
        let y1 = 28.0;
        let x_of = |round: u32| -> f64 {
            if max_round == 0 {
                x0
            } else {
                x0 + (x1 - x0) * round as f64 / max_round as f64
            }
        };
        let y_of = |v: f64| -> f64 { y0 - (y0 - y1) * (v / panel.y_max) };
        write!(
            svg,
            "<g><text x=\"{}\" y=\"16\" text-anchor=\"middle\" font-weight=\"bold\">{}</text>\n\
             <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">round</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">0</text>\n",
            (x0 + x1) / 2.0,
            panel.title,
            coord(x0),
            coord(y0),
            coord(x1),
            coord(y0),
            coord(x0),
            coord(y0),
            coord(x0),
            coord(y1),
            coord((x0 + x1) / 2.0),
            coord(H - 10.0),
            coord(x0 - 6.0),
            coord(y1 + 4.0),
            if panel.y_max == 1.0 { "1".to_string() } else { format!("{}", panel.y_max) },
            coord(x0 - 6.0),
            coord(y0 + 4.0),
        )
        .expect("writing to String cannot fail");
        for (c, (condition, by_round)) in panel.series.iter().enumerate() {
            let points: Vec<String> = by_round
                .iter()
                .map(|(round, v)| format!("{},{}", coord(x_of(*round)), coord(y_of(*v))))
                .collect();
            write!(
                svg,
                "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\" points=\"{}\"/>\n",
                color_for(c),
                points.join(" ")
            )
            .expect("writing to String cannot fail");
            // Legend entry (first panel only).
            if p == 0 {
                let ly = y1 + 14.0 * c as f64;
                write!(
                    svg,
                    "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"3\" fill=\"{}\"/>\
                     <text x=\"{}\" y=\"{}\">{}</text>\n",
                    coord(x0 + 8.0),
                    coord(ly),
                    color_for(c),
                    coord(x0 + 22.0),
                    coord(ly + 5.0),
                    condition.name()
                )
                .expect("writing to String cannot fail");
            }
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Success/weight heatmap for one condition and seed: tasks as rows, eval
/// rounds as columns, one `class="cell"` rect per (task, round) in each of
/// the two bands.
pub fn render_heatmap(record: &ExperimentRecord, condition: Condition, seed: u64) -> Result<String> {
    let rows: Vec<&TaskRow> = record
        .task_rows
        .iter()
        .filter(|r| r.condition == condition && r.seed == seed)
        .collect();
    if rows.is_empty() {
        return Err(Error::Evaluation(format!(
            "record holds no rows for condition {} seed {seed}",
            condition.name()
        )));
    }
    let tasks: BTreeSet<&TaskId> = rows.iter().map(|r| &r.task_id).collect();
    let rounds: BTreeSet<u32> = rows.iter().map(|r| r.round).collect();
    let task_index: BTreeMap<&TaskId, usize> =
        tasks.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let round_index: BTreeMap<u32, usize> =
        rounds.iter().enumerate().map(|(i, r)| (*r, i)).collect();
    let max_weight = rows.iter().fold(0.0f64, |acc, r| acc.max(r.weight)).max(1e-12);

    const CELL: f64 = 7.0;
    const LABEL_W: f64 = 170.0;
    const TOP: f64 = 30.0;
    const GAP: f64 = 40.0;
    let grid_w = CELL * rounds.len() as f64;
    let grid_h = CELL * tasks.len() as f64;
    let total_w = LABEL_W + grid_w + 20.0;
    let total_h = TOP + grid_h * 2.0 + GAP + 20.0;

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {total_w} {total_h}\" \
         font-family=\"sans-serif\" font-size=\"9\">\n\
         <rect width=\"{total_w}\" height=\"{total_h}\" fill=\"white\"/>\n"
    )
    .expect("writing to String cannot fail");
    for (band, (title, value_of)) in [
        ("task success per evaluation round", Box::new(|r: &TaskRow| r.success) as Box<dyn Fn(&TaskRow) -> f64>),
        ("sampling weight per evaluation round (relative)", Box::new(move |r: &TaskRow| r.weight / max_weight)),
    ]
    .into_iter()
    .enumerate()
    {
        let oy = TOP + band as f64 * (grid_h + GAP);
        write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-weight=\"bold\" font-size=\"12\">{}</text>\n",
            coord(LABEL_W),
            coord(oy - 8.0),
            title
        )
        .expect("writing to String cannot fail");
        for row in &rows {
            let x = LABEL_W + CELL * round_index[&row.round] as f64;
            let y = oy + CELL * task_index[&row.task_id] as f64;
            let v = value_of(row).clamp(0.0, 1.0);
            // White → blue ramp.
            let level = (255.0 - v * 205.0).round() as u8;
            write!(
                svg,
                "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"rgb({level},{level},255)\"/>\n",
                coord(x),
                coord(y)
            )
            .expect("writing to String cannot fail");
        }
        if band == 0 {
            for (id, i) in &task_index {
                write!(
                    svg,
                    "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                    coord(LABEL_W - 4.0),
                    coord(oy + CELL * *i as f64 + CELL - 1.0),
                    xml_escape(id.as_str())
                )
                .expect("writing to String cannot fail");
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Write the SVG charts into `dir`: `<stem>_aggregates.svg` plus one
/// `<stem>_heatmap_<condition>_<seed>.svg` for the record's first
/// (condition, seed) pair.
pub fn emit_plots(record: &ExperimentRecord, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| io_context("create", dir, e))?;
    let chart = render_aggregate_chart(record)?;
    let chart_path = dir.join(format!("{stem}_aggregates.svg"));
    std::fs::write(&chart_path, chart)
        .map_err(|e| io_context("write", &chart_path, e))?;
    if let Some(first) = record.task_rows.first() {
        let (condition, seed) = (first.condition, first.seed);
        let heat = render_heatmap(record, condition, seed)?;
        let heat_path = dir.join(format!("{stem}_heatmap_{}_{seed}.svg", condition.name()));
        std::fs::write(&heat_path, heat)
            .map_err(|e| io_context("write", &heat_path, e))?;
    }
    Ok(())
}

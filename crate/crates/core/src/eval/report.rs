//! Text-table and CSV renderings of an evaluation.

use std::collections::BTreeSet;

use super::protocol::{mean_std, CellReport, EvalReport};
use crate::error::{Error, Result};

/// Table columns, left to right, with their keys.
pub const COLUMNS: [(&str, &str); 5] = [
    ("word-rec", "Word Rec"),
    ("word-rec+ft", "Word Rec+FT"),
    ("writer-id", "Writer ID"),
    ("writer-id+ft", "Writer ID+FT"),
    ("scratch", "Scratch"),
];

pub const CSV_HEADER: &str = "train_count,strategy,kernel,seed,user_id,eer,threshold";

/// One CSV row. Aggregate rows carry `user_id = "ALL"`; the cross-seed
/// rows use `seed = "mean"`, `"std"` or `"mean-user"` and no threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub train_count: usize,
    pub strategy: String,
    pub kernel: String,
    pub seed: String,
    pub user_id: String,
    pub eer: f64,
    pub threshold: Option<f64>,
}

pub fn csv_rows(report: &EvalReport) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for cell in &report.cells {
        let row = |seed: String, user_id: String, eer: f64, threshold: Option<f64>| CsvRow {
            train_count: cell.train_count,
            strategy: cell.strategy.clone(),
            kernel: cell.kernel.clone(),
            seed,
            user_id,
            eer,
            threshold,
        };
        for run in &cell.runs {
            for u in &run.users {
                rows.push(row(run.seed.to_string(), u.user_id.to_string(), u.eer, Some(u.threshold)));
            }
            rows.push(row(run.seed.to_string(), "ALL".into(), run.pooled.eer, Some(run.pooled.threshold)));
        }
        let (mean, std) = mean_std(&cell.pooled_eers());
        let (user_mean, _) = mean_std(&cell.user_mean_eers());
        rows.push(row("mean".into(), "ALL".into(), mean, None));
        rows.push(row("std".into(), "ALL".into(), std, None));
        rows.push(row("mean-user".into(), "ALL".into(), user_mean, None));
    }
    rows
}

/// CSV with shortest round-trip float formatting.
pub fn render_csv(report: &EvalReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in csv_rows(report) {
        let threshold = r.threshold.map(|t| t.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.train_count, r.strategy, r.kernel, r.seed, r.user_id, r.eer, threshold
        ));
    }
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                offset: 1,
                message: format!("expected header '{CSV_HEADER}'"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Parse {
            offset: i + 1,
            message: format!("report line {}: {m}", i + 1),
        };
        let f: Vec<&str> = line.split(',').collect();
        let [count, strategy, kernel, seed, user, eer, threshold] = f[..] else {
            return Err(bad("expected 7 fields"));
        };
        rows.push(CsvRow {
            train_count: count.parse().map_err(|_| bad("bad train_count"))?,
            strategy: strategy.into(),
            kernel: kernel.into(),
            seed: seed.into(),
            user_id: user.into(),
            eer: eer.parse().map_err(|_| bad("bad eer"))?,
            threshold: if threshold.is_empty() {
                None
            } else {
                Some(threshold.parse().map_err(|_| bad("bad threshold"))?)
            },
        });
    }
    Ok(rows)
}

/// Per-seed EERs of one cell, the input of the text tables.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub train_count: usize,
    pub strategy: String,
    pub kernel: String,
    pub pooled: Vec<f64>,
    pub user_mean: Vec<f64>,
}

pub fn summarize(report: &EvalReport) -> Vec<CellSummary> {
    report
        .cells
        .iter()
        .map(|c: &CellReport| CellSummary {
            train_count: c.train_count,
            strategy: c.strategy.clone(),
            kernel: c.kernel.clone(),
            pooled: c.pooled_eers(),
            user_mean: c.user_mean_eers(),
        })
        .collect()
}

/// Rebuilds the cell summaries from the per-run rows of a CSV report; the
/// cross-seed rows are ignored and recomputed.
pub fn summarize_rows(rows: &[CsvRow]) -> Result<Vec<CellSummary>> {
    let mut cells: Vec<CellSummary> = Vec::new();
    // Per cell: (seed, sum of user EERs, user count) in file order.
    let mut user_sums: Vec<Vec<(String, f64, usize)>> = Vec::new();
    for r in rows {
        if r.seed.parse::<u64>().is_err() {
            continue;
        }
        let idx = match cells
            .iter()
            .position(|c| c.train_count == r.train_count && c.strategy == r.strategy && c.kernel == r.kernel)
        {
            Some(i) => i,
            None => {
                cells.push(CellSummary {
                    train_count: r.train_count,
                    strategy: r.strategy.clone(),
                    kernel: r.kernel.clone(),
                    pooled: Vec::new(),
                    user_mean: Vec::new(),
                });
                user_sums.push(Vec::new());
                cells.len() - 1
            }
        };
        if r.user_id == "ALL" {
            cells[idx].pooled.push(r.eer);
        } else {
            let runs = &mut user_sums[idx];
            match runs.last_mut() {
                Some(run) if run.0 == r.seed => {
                    run.1 += r.eer;
                    run.2 += 1;
                }
                _ => runs.push((r.seed.clone(), r.eer, 1)),
            }
        }
    }
    for (cell, runs) in cells.iter_mut().zip(user_sums) {
        if runs.len() != cell.pooled.len() {
            return Err(Error::Parse {
                offset: 0,
                message: format!(
                    "report cell n={} {} {}: {} pooled rows but {} runs with user rows",
                    cell.train_count,
                    cell.strategy,
                    cell.kernel,
                    cell.pooled.len(),
                    runs.len()
                ),
            });
        }
        cell.user_mean = runs.into_iter().map(|(_, sum, n)| sum / n as f64).collect();
    }
    Ok(cells)
}

fn table(cells: &[CellSummary], title: &str, value: impl Fn(&CellSummary) -> &[f64]) -> String {
    let kernels: Vec<&str> = {
        let mut seen = BTreeSet::new();
        cells
            .iter()
            .map(|c| c.kernel.as_str())
            .filter(|k| seen.insert(*k))
            .collect()
    };
    let counts: BTreeSet<usize> = cells.iter().map(|c| c.train_count).collect();
    let width = 15;
    let mut out = String::new();
    for kernel in kernels {
        out.push_str(&format!("{title} (%), kernel {kernel}; * marks the lowest in each row\n"));
        out.push_str(&format!("{:<8}", "#train"));
        for (_, name) in COLUMNS {
            out.push_str(&format!("{name:>width$}"));
        }
        out.push('\n');
        for &count in &counts {
            let stats: Vec<Option<(f64, f64)>> = COLUMNS
                .iter()
                .map(|(key, _)| {
                    cells
                        .iter()
                        .find(|c| c.kernel == kernel && c.train_count == count && c.strategy == *key)
                        .map(|c| mean_std(value(c)))
                })
                .collect();
            let best = stats
                .iter()
                .flatten()
                .map(|s| s.0)
                .fold(f64::INFINITY, f64::min);
            out.push_str(&format!("{count:<8}"));
            for s in stats {
                let cell = match s {
                    Some((m, sd)) => {
                        let mark = if m == best { "*" } else { " " };
                        format!("{:.2} ± {:.2}{mark}", 100.0 * m, 100.0 * sd)
                    }
                    None => "-".into(),
                };
                out.push_str(&format!("{cell:>width$}"));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Tables of pooled and mean per-user EER: one row per train count, one
/// column per strategy, each cell `mean ± std` over seeds.
pub fn render_summary_table(cells: &[CellSummary]) -> String {
    let mut s = table(cells, "Pooled EER", |c| &c.pooled);
    s.push_str(&table(cells, "Mean per-user EER", |c| &c.user_mean));
    s
}

pub fn render_table(report: &EvalReport) -> String {
    render_summary_table(&summarize(report))
}

//! Plain-text grid tables and the flat ΔACC export.

use std::fmt::Write as _;
use std::io::Write;

use super::experiment::EvalReport;
use super::score::round1;
use crate::error::Result;
use crate::metrics::{Level, Metric};

/// One table per level: rows are models, columns metrics; each cell shows
/// the fold mean ± fold standard deviation and the test accuracy in brackets.
pub fn render_tables(report: &EvalReport) -> String {
    let mut out = String::new();
    let mut levels: Vec<Level> = report.cells.iter().map(|c| c.level).collect();
    levels.sort();
    levels.dedup();
    for level in levels {
        let cells: Vec<_> = report.cells.iter().filter(|c| c.level == level).collect();
        let mut metrics: Vec<Metric> = cells.iter().map(|c| c.metric).collect();
        metrics.sort_by_key(|m| m.index());
        metrics.dedup();
        let mut models = Vec::new();
        for c in &cells {
            if !models.contains(&c.model) {
                models.push(c.model);
            }
        }
        let _ = writeln!(out, "## {level} level (accuracy, 0-100; fold mean ± sd [test])");
        let _ = write!(out, "{:<16}", "model");
        for m in &metrics {
            let _ = write!(out, " | {:>19}", m.name());
        }
        out.push('\n');
        for model in models {
            let _ = write!(out, "{:<16}", model.id());
            for &m in &metrics {
                let text = cells
                    .iter()
                    .find(|c| c.model == model && c.metric == m)
                    .map(|c| {
                        format!(
                            "{:.1} ± {:.1} [{:.1}]",
                            round1(c.mean_accuracy),
                            round1(c.fold_stddev),
                            round1(c.test_accuracy)
                        )
                    })
                    .unwrap_or_default();
                let _ = write!(out, " | {text:>19}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    for n in &report.notices {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

/// `level,model,metric,player,n_test,accuracy,delta`, one row per player.
pub fn write_delta_csv<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "model", "metric", "player", "n_test", "accuracy", "delta"])?;
    for entry in &report.deltas {
        for r in &entry.table.rows {
            w.write_record([
                entry.level.name(),
                entry.model.id(),
                r.metric.name(),
                r.player.as_str(),
                &r.n_test.to_string(),
                &format!("{:.6}", r.accuracy),
                &format!("{:.6}", r.delta),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

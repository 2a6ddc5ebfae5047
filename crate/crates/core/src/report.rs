//! CSV renderings of simulation reports.
//!
//! Formatting is pinned: fixed decimal places, `NA` for undefined values,
//! `\n` line endings. Identical reports must serialize to identical bytes.

use std::fmt::Write;

use crate::sim::{CellReport, SimReport};

pub const DAY_HEADER: &str =
    "day,active_signatures,tp_generated,fp_generated,tp_caught,fp_raised,update_performed,select_ms,infer_ms,fallback_used";

pub const SUMMARY_HEADER: &str =
    "theta,beta,overlap,tp_removed_pct,fp_removed_pct,precision,recall,median_solve_ms,p98_solve_ms,fallback_count";

fn opt(value: Option<f64>, decimals: usize) -> String {
    match value {
        Some(v) => format!("{v:.decimals$}"),
        None => "NA".to_string(),
    }
}

/// One row per simulated day.
pub fn day_rows_csv(report: &SimReport) -> String {
    let mut out = String::from(DAY_HEADER);
    out.push('\n');
    for r in &report.days {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3},{:.3},{}",
            r.day,
            r.active_signatures,
            r.tp_generated,
            r.fp_generated,
            r.tp_caught,
            r.fp_raised,
            u8::from(r.update_performed),
            r.select_ms,
            r.infer_ms,
            u8::from(r.fallback_used),
        );
    }
    out
}

/// One row per sweep cell.
pub fn summary_csv(cells: &[CellReport]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for c in cells {
        let s = &c.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.theta,
            c.beta,
            if c.overlap { "on" } else { "off" },
            opt(s.tp_removed_pct, 4),
            opt(s.fp_removed_pct, 4),
            opt(s.precision, 6),
            opt(s.recall, 6),
            opt(s.median_solve_ms, 3),
            opt(s.p98_solve_ms, 3),
            s.fallback_count,
        );
    }
    out
}

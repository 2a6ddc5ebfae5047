//! The schedule file format and a deterministic synthetic-schedule generator.
//!
//! One record per signature, comma-separated, header required:
//!
//! ```text
//! signature_id,intro_day,removal_day,severity,update_days
//! sig00001,10,100,2,30;60
//! ```
//!
//! `update_days` is a semicolon-separated integer list, possibly empty. Days
//! count from a day-0 epoch declared by the run configuration. An empty
//! severity field defaults to 1.

use thiserror::Error;

use crate::rng::Rng;
use crate::trace::{SignatureLifecycle, TraceError};

pub const SCHEDULE_HEADER: &str = "signature_id,intro_day,removal_day,severity,update_days";

/// One parsed schedule row; becomes a [`SignatureLifecycle`] once the run's
/// lead/lag offsets are known.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub signature_id: String,
    pub intro_day: i64,
    pub removal_day: i64,
    pub severity: u8,
    pub update_days: Vec<i64>,
}

impl ScheduleEntry {
    pub fn into_lifecycle(
        &self,
        lead_days: i64,
        lag_days: i64,
    ) -> Result<SignatureLifecycle, TraceError> {
        SignatureLifecycle::new(
            self.signature_id.clone(),
            self.intro_day,
            self.removal_day,
            self.update_days.clone(),
            self.severity,
            lead_days,
            lag_days,
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("schedule file is empty; expected header `{SCHEDULE_HEADER}`")]
    MissingHeader,
    #[error("line 1: bad header `{0}`, expected `{SCHEDULE_HEADER}`")]
    BadHeader(String),
    #[error("line {line}: expected 5 comma-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: field `{field}` is not an integer: `{value}`")]
    BadInteger {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: signature id is empty")]
    EmptyId { line: usize },
    #[error("line {line}: duplicate signature id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {source}")]
    InvalidLifecycle { line: usize, source: TraceError },
}

/// Parse schedule text. Diagnostics carry 1-based line numbers.
pub fn parse_schedule(text: &str) -> Result<Vec<ScheduleEntry>, ScheduleError> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(ScheduleError::MissingHeader);
    };
    if header.trim() != SCHEDULE_HEADER {
        return Err(ScheduleError::BadHeader(header.trim().to_string()));
    }
    let mut entries = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 5 {
            return Err(ScheduleError::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let signature_id = fields[0].trim().to_string();
        if signature_id.is_empty() {
            return Err(ScheduleError::EmptyId { line });
        }
        if !seen.insert(signature_id.clone()) {
            return Err(ScheduleError::DuplicateId {
                line,
                id: signature_id,
            });
        }
        let parse_int = |field: &'static str, value: &str| -> Result<i64, ScheduleError> {
            value.trim().parse().map_err(|_| ScheduleError::BadInteger {
                line,
                field,
                value: value.trim().to_string(),
            })
        };
        let intro_day = parse_int("intro_day", fields[1])?;
        let removal_day = parse_int("removal_day", fields[2])?;
        let severity = if fields[3].trim().is_empty() {
            1
        } else {
            u8::try_from(parse_int("severity", fields[3])?).map_err(|_| {
                ScheduleError::BadInteger {
                    line,
                    field: "severity",
                    value: fields[3].trim().to_string(),
                }
            })?
        };
        let mut update_days = Vec::new();
        let updates_field = fields[4].trim();
        if !updates_field.is_empty() {
            for part in updates_field.split(';') {
                update_days.push(parse_int("update_days", part)?);
            }
        }
        // Validate window/update invariants now so errors carry line numbers;
        // lead/lag offsets do not affect validity.
        if let Err(source) = SignatureLifecycle::new(
            signature_id.clone(),
            intro_day,
            removal_day,
            update_days.clone(),
            severity,
            0,
            0,
        ) {
            return Err(ScheduleError::InvalidLifecycle { line, source });
        }
        entries.push(ScheduleEntry {
            signature_id,
            intro_day,
            removal_day,
            severity,
            update_days,
        });
    }
    Ok(entries)
}

/// Render entries in the schedule file format, header included.
pub fn write_schedule(entries: &[ScheduleEntry]) -> String {
    use std::fmt::Write;
    let mut out = String::from(SCHEDULE_HEADER);
    out.push('\n');
    for e in entries {
        let updates = e
            .update_days
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.signature_id, e.intro_day, e.removal_day, e.severity, updates
        );
    }
    out
}

/// Deterministic random schedule for testing and desk-scale simulation runs.
///
/// All lifecycles land inside [0, horizon_days] with lifespans of at least
/// 10 days (skewed short), up to 3 updates each, severities 1..=3. Each
/// signature draws from its own substream, so the same (index, seed) pair
/// always produces the same row regardless of `count`.
pub fn generate_random_schedule(count: usize, horizon_days: i64, seed: u64) -> Vec<ScheduleEntry> {
    let max_lifespan = (horizon_days - 1).clamp(12, 400);
    (0..count)
        .map(|i| {
            let signature_id = format!("sig{i:05}");
            let mut rng = Rng::substream(seed, &format!("schedule/{signature_id}"));
            let u = rng.next_f64();
            // Quadratic skew: most lifespans short, a few near the cap.
            let lifespan = 10 + (u * u * (max_lifespan - 10) as f64).round() as i64;
            let latest_intro = (horizon_days - lifespan).max(0);
            let intro_day = if latest_intro > 0 {
                rng.range_usize(latest_intro as usize + 1) as i64
            } else {
                0
            };
            let removal_day = intro_day + lifespan;
            let n_updates = {
                let u = rng.next_f64();
                if u < 0.35 {
                    0
                } else if u < 0.65 {
                    1
                } else if u < 0.85 {
                    2
                } else {
                    3
                }
            };
            let mut update_days: Vec<i64> = (0..n_updates)
                .map(|_| intro_day + 1 + rng.range_usize((lifespan - 1) as usize) as i64)
                .collect();
            update_days.sort_unstable();
            update_days.dedup();
            let severity = 1 + rng.range_usize(3) as u8;
            ScheduleEntry {
                signature_id,
                intro_day,
                removal_day,
                severity,
                update_days,
            }
        })
        .collect()
}

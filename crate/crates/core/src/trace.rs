//! Synthetic observation traces driven by signature lifecycles.
//!
//! Per signature: daily true-positive counts follow a power-law decay
//! calibrated to the signature's lifespan, with a sawtooth bump at each
//! update; false positives run at a fixed fraction of the true-positive level
//! anchored at the most recent introduction/update and stay constant in
//! between; flag sets add random overlap with other active signatures.
//!
//! Generation is deterministic per signature given a seed (see [`crate::rng`]),
//! so adding signatures to a schedule never perturbs existing traces.

use thiserror::Error;

use crate::rng::Rng;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("signature `{id}`: intro day {intro} must precede removal day {removal}")]
    BadWindow {
        id: String,
        intro: i64,
        removal: i64,
    },
    #[error("signature `{id}`: update day {day} is outside ({intro}, {removal})")]
    UpdateOutsideWindow {
        id: String,
        day: i64,
        intro: i64,
        removal: i64,
    },
    #[error("decay needs y0 > floor > 0, got y0={y0}, floor={floor}")]
    BadDecayLevels { y0: f64, floor: f64 },
    #[error("decay lifespan must be at least 2 days, got {0}")]
    BadDecayLifespan(i64),
    #[error("overlap distribution must sum to 1, got {0}")]
    BadOverlapSum(f64),
    #[error("overlap distribution needs at least the k=0 entry")]
    EmptyOverlapTable,
    #[error("overlap probability at k={k} is {p}, must be in [0, 1]")]
    BadOverlapProbability { k: usize, p: f64 },
}

/// Introduction, updates, and removal of one signature, with the derived
/// malware activity window.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureLifecycle {
    pub signature_id: String,
    pub intro_day: i64,
    pub removal_day: i64,
    /// Strictly inside (intro_day, removal_day), ascending.
    pub update_days: Vec<i64>,
    pub severity: u8,
    /// Malware shows up a few days before the signature lands.
    pub malware_appear_day: i64,
    /// Malware dies out a few days before the signature is retired.
    pub malware_disappear_day: i64,
}

impl SignatureLifecycle {
    /// Build a lifecycle, deriving the malware window from lead/lag offsets:
    /// appearance = intro - lead, disappearance = removal - lag.
    pub fn new(
        signature_id: impl Into<String>,
        intro_day: i64,
        removal_day: i64,
        mut update_days: Vec<i64>,
        severity: u8,
        lead_days: i64,
        lag_days: i64,
    ) -> Result<Self, TraceError> {
        let signature_id = signature_id.into();
        if intro_day >= removal_day {
            return Err(TraceError::BadWindow {
                id: signature_id,
                intro: intro_day,
                removal: removal_day,
            });
        }
        update_days.sort_unstable();
        update_days.dedup();
        for &day in &update_days {
            if day <= intro_day || day >= removal_day {
                return Err(TraceError::UpdateOutsideWindow {
                    id: signature_id,
                    day,
                    intro: intro_day,
                    removal: removal_day,
                });
            }
        }
        Ok(SignatureLifecycle {
            signature_id,
            intro_day,
            removal_day,
            update_days,
            severity,
            malware_appear_day: intro_day - lead_days,
            malware_disappear_day: removal_day - lag_days,
        })
    }

    /// Days between introduction and removal.
    pub fn lifespan_days(&self) -> i64 {
        self.removal_day - self.intro_day
    }
}

/// Power-law daily level: y(t) = y0 * (t + 1)^(-gamma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCurve {
    pub y0: f64,
    pub gamma: f64,
    pub floor: f64,
}

impl DecayCurve {
    /// Level after `t` whole days (t = 0 is the first active day).
    pub fn level(&self, t: f64) -> f64 {
        self.y0 * (t + 1.0).powf(-self.gamma)
    }

    /// Effective age at which the curve sits at `level`.
    fn age_for_level(&self, level: f64) -> f64 {
        (self.y0 / level).powf(1.0 / self.gamma) - 1.0
    }
}

/// Fit the decay exponent so the level reaches `floor` on the last day of a
/// `lifespan_days`-day life: gamma = ln(y0/floor) / ln(lifespan_days).
pub fn calibrate_decay(y0: f64, lifespan_days: i64, floor: f64) -> Result<DecayCurve, TraceError> {
    if !(y0 > floor && floor > 0.0) || !y0.is_finite() {
        return Err(TraceError::BadDecayLevels { y0, floor });
    }
    if lifespan_days < 2 {
        return Err(TraceError::BadDecayLifespan(lifespan_days));
    }
    let gamma = (y0 / floor).ln() / (lifespan_days as f64).ln();
    Ok(DecayCurve { y0, gamma, floor })
}

/// Daily TP/FP counts over [`start_day`, `start_day + len`).
#[derive(Debug, Clone, PartialEq)]
pub struct DailyTrace {
    pub start_day: i64,
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
}

impl DailyTrace {
    pub fn tp_on(&self, day: i64) -> u64 {
        self.lookup(&self.tp, day)
    }

    pub fn fp_on(&self, day: i64) -> u64 {
        self.lookup(&self.fp, day)
    }

    fn lookup(&self, counts: &[u64], day: i64) -> u64 {
        let offset = day - self.start_day;
        if offset < 0 {
            return 0;
        }
        counts.get(offset as usize).copied().unwrap_or(0)
    }
}

/// Daily true-positive counts for one signature.
///
/// The level decays along `curve` from the malware appearance day; each update
/// day multiplies the previous day's level by `update_bump` (capped at y0) and
/// decay resumes from the matching point on the curve, producing a sawtooth.
/// With `jitter` on, each day's count is scaled by a uniform factor in
/// [0.9, 1.1]. Counts are zero before appearance and after disappearance.
pub fn generate_tp_trace(
    lifecycle: &SignatureLifecycle,
    curve: &DecayCurve,
    update_bump: f64,
    jitter: bool,
    rng: &mut Rng,
) -> Vec<u64> {
    let start = lifecycle.malware_appear_day;
    let end = lifecycle.removal_day;
    let len = (end - start + 1).max(0) as usize;
    let mut counts = vec![0u64; len];
    let mut age = 0.0_f64;
    let mut level = curve.level(0.0);
    for day in start..=end {
        let idx = (day - start) as usize;
        if day > lifecycle.malware_disappear_day {
            break; // counts stay zero after the malware is gone
        }
        if day > start {
            if lifecycle.update_days.binary_search(&day).is_ok() {
                // The update recovers missed traffic: bump yesterday's level
                // and continue decaying from the equivalent curve position.
                level = (level * update_bump).min(curve.y0);
                age = curve.age_for_level(level);
            } else {
                age += 1.0;
                level = curve.level(age);
            }
        }
        let factor = if jitter { rng.range_f64(0.9, 1.1) } else { 1.0 };
        counts[idx] = (level * factor).round().max(0.0) as u64;
    }
    counts
}

/// Daily false-positive counts: `round(theta * tp_at(anchor))` where the
/// anchor is the most recent of the introduction day and any update day.
/// Constant between anchors, zero outside [intro_day, removal_day].
pub fn generate_fp_trace(
    tp_counts: &[u64],
    trace_start_day: i64,
    lifecycle: &SignatureLifecycle,
    theta: f64,
) -> Vec<u64> {
    let len = tp_counts.len();
    let mut counts = vec![0u64; len];
    if len == 0 {
        return counts;
    }
    let tp_at = |day: i64| -> u64 {
        let offset = day - trace_start_day;
        if offset < 0 {
            return 0;
        }
        tp_counts.get(offset as usize).copied().unwrap_or(0)
    };
    let mut level = (theta * tp_at(lifecycle.intro_day) as f64).round().max(0.0) as u64;
    let end_day = trace_start_day + len as i64 - 1;
    for day in lifecycle.intro_day..=lifecycle.removal_day.min(end_day) {
        if day < trace_start_day {
            continue;
        }
        if lifecycle.update_days.binary_search(&day).is_ok() {
            level = (theta * tp_at(day) as f64).round().max(0.0) as u64;
        }
        counts[(day - trace_start_day) as usize] = level;
    }
    counts
}

/// Probability table over "how many extra signatures flag this observation".
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapDistribution {
    /// probs[k] = probability of k extra signatures.
    probs: Vec<f64>,
}

impl OverlapDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, TraceError> {
        if probs.is_empty() {
            return Err(TraceError::EmptyOverlapTable);
        }
        for (k, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(TraceError::BadOverlapProbability { k, p });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(TraceError::BadOverlapSum(sum));
        }
        Ok(OverlapDistribution { probs })
    }

    /// Most observations overlap with nothing; a small tail touches up to
    /// three other signatures.
    pub fn default_table() -> Self {
        OverlapDistribution::new(vec![0.85, 0.10, 0.04, 0.01]).expect("valid table")
    }

    /// All mass at k = 0: every observation is flagged by its origin only.
    pub fn no_overlap() -> Self {
        OverlapDistribution::new(vec![1.0]).expect("valid table")
    }

    /// Draw an extra-signature count, clamped to `max_k` available partners.
    pub fn sample_k(&self, rng: &mut Rng, max_k: usize) -> usize {
        let u = rng.next_f64();
        let mut cumulative = 0.0;
        let mut k = self.probs.len() - 1;
        for (i, &p) in self.probs.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                k = i;
                break;
            }
        }
        k.min(max_k)
    }
}

/// Flag set for one observation originating from `active[origin_pos]`: the
/// origin plus k distinct other active signatures, k drawn from the table.
/// Returns sorted global signature indices.
pub fn overlap_flags(
    origin_pos: usize,
    active: &[usize],
    distribution: &OverlapDistribution,
    rng: &mut Rng,
) -> Vec<usize> {
    debug_assert!(origin_pos < active.len());
    let max_k = active.len() - 1;
    let k = distribution.sample_k(rng, max_k);
    let mut flags = Vec::with_capacity(k + 1);
    flags.push(active[origin_pos]);
    if k > 0 {
        let mut chosen = std::collections::BTreeSet::new();
        chosen.insert(origin_pos);
        while chosen.len() < k + 1 {
            chosen.insert(rng.range_usize(active.len()));
        }
        for pos in chosen {
            if pos != origin_pos {
                flags.push(active[pos]);
            }
        }
    }
    flags.sort_unstable();
    flags
}

/// What [`filter_schedule`] kept and why the rest was dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSchedule {
    pub kept: Vec<SignatureLifecycle>,
    /// Lifespan shorter than the 7-day minimum.
    pub dropped_short: usize,
    /// Introduced or removed outside the sampling window.
    pub dropped_outside: usize,
}

/// Minimum lifespan a signature must have to stay in a schedule.
pub const MIN_LIFESPAN_DAYS: i64 = 7;

/// Drop short-lived signatures and ones whose life extends past the window;
/// a decay curve cannot be calibrated for either.
pub fn filter_schedule(
    raw: Vec<SignatureLifecycle>,
    window_start: i64,
    window_end: i64,
) -> FilteredSchedule {
    let mut kept = Vec::with_capacity(raw.len());
    let mut dropped_short = 0;
    let mut dropped_outside = 0;
    for lc in raw {
        if lc.lifespan_days() < MIN_LIFESPAN_DAYS {
            dropped_short += 1;
        } else if lc.intro_day < window_start || lc.removal_day > window_end {
            dropped_outside += 1;
        } else {
            kept.push(lc);
        }
    }
    FilteredSchedule {
        kept,
        dropped_short,
        dropped_outside,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lifecycle(intro: i64, removal: i64, updates: Vec<i64>) -> SignatureLifecycle {
        SignatureLifecycle::new("sig", intro, removal, updates, 1, 3, 3).unwrap()
    }

    #[test]
    fn calibration_examples() {
        let c = calibrate_decay(500.0, 100, 1.0).unwrap();
        assert!((c.gamma - 1.3495).abs() < 1e-4);
        // Level hits the floor exactly on the last day.
        assert!((c.level(99.0) - 1.0).abs() < 1e-9);

        assert_eq!(
            calibrate_decay(500.0, 100, 500.0).unwrap_err(),
            TraceError::BadDecayLevels {
                y0: 500.0,
                floor: 500.0
            }
        );

        let c = calibrate_decay(4.0, 2, 1.0).unwrap();
        assert!((c.gamma - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tp_trace_window_and_initial_level() {
        let lc = lifecycle(3, 103, vec![]);
        let curve = calibrate_decay(500.0, 100, 1.0).unwrap();
        let mut rng = Rng::new(1);
        let counts = generate_tp_trace(&lc, &curve, 1.5, false, &mut rng);
        // Day 0 relative to appearance carries the full initial level.
        assert_eq!(counts[0], 500);
        // Nothing after the malware disappears.
        let disappear_idx = (lc.malware_disappear_day - lc.malware_appear_day) as usize;
        assert!(counts[disappear_idx] > 0);
        assert!(counts[disappear_idx + 1..].iter().all(|&c| c == 0));
        // Lookups before appearance and after removal both read as zero.
        let fp = generate_fp_trace(&counts, lc.malware_appear_day, &lc, 0.1);
        let trace = DailyTrace {
            start_day: lc.malware_appear_day,
            tp: counts,
            fp,
        };
        assert_eq!(trace.tp_on(lc.malware_appear_day - 1), 0);
        assert_eq!(trace.fp_on(lc.intro_day - 1), 0);
        assert_eq!(trace.tp_on(lc.removal_day + 1), 0);
    }

    #[test]
    fn tp_trace_update_bumps() {
        let lc = lifecycle(3, 103, vec![40, 70]);
        let curve = calibrate_decay(500.0, 100, 1.0).unwrap();
        let mut rng = Rng::new(1);
        let counts = generate_tp_trace(&lc, &curve, 1.5, false, &mut rng);
        for &u in &lc.update_days {
            let idx = (u - lc.malware_appear_day) as usize;
            assert!(
                counts[idx] >= counts[idx - 1],
                "update at {u}: {} < {}",
                counts[idx],
                counts[idx - 1]
            );
        }
        // Nonincreasing between events when jitter is off.
        let events: Vec<usize> = lc
            .update_days
            .iter()
            .map(|&u| (u - lc.malware_appear_day) as usize)
            .collect();
        let disappear = (lc.malware_disappear_day - lc.malware_appear_day) as usize;
        for i in 1..=disappear {
            if !events.contains(&i) {
                assert!(counts[i] <= counts[i - 1], "day {i} rose without update");
            }
        }
    }

    #[test]
    fn fp_trace_piecewise_constant() {
        let lc = lifecycle(3, 103, vec![40]);
        let curve = calibrate_decay(500.0, 100, 1.0).unwrap();
        let mut rng = Rng::new(1);
        let tp = generate_tp_trace(&lc, &curve, 1.5, false, &mut rng);
        let fp = generate_fp_trace(&tp, lc.malware_appear_day, &lc, 0.2);

        // Zero before intro.
        let intro_idx = (lc.intro_day - lc.malware_appear_day) as usize;
        assert!(fp[..intro_idx].iter().all(|&c| c == 0));
        // Constant from intro to the update, then constant again.
        let update_idx = (40 - lc.malware_appear_day) as usize;
        let first = fp[intro_idx];
        assert!(first > 0);
        assert!(fp[intro_idx..update_idx].iter().all(|&c| c == first));
        let second = fp[update_idx];
        let end_idx = (lc.removal_day - lc.malware_appear_day) as usize;
        assert!(fp[update_idx..=end_idx].iter().all(|&c| c == second));
        // Anchored at theta * tp(intro).
        assert_eq!(first, (0.2 * tp[intro_idx] as f64).round() as u64);
    }

    #[test]
    fn fp_trace_zero_theta() {
        let lc = lifecycle(3, 103, vec![40]);
        let curve = calibrate_decay(500.0, 100, 1.0).unwrap();
        let mut rng = Rng::new(1);
        let tp = generate_tp_trace(&lc, &curve, 1.5, false, &mut rng);
        let fp = generate_fp_trace(&tp, lc.malware_appear_day, &lc, 0.0);
        assert!(fp.iter().all(|&c| c == 0));
    }

    #[test]
    fn overlap_no_extra_mass() {
        let dist = OverlapDistribution::no_overlap();
        let mut rng = Rng::new(5);
        let active = vec![10, 20, 30];
        for origin in 0..3 {
            let flags = overlap_flags(origin, &active, &dist, &mut rng);
            assert_eq!(flags, vec![active[origin]]);
        }
    }

    #[test]
    fn overlap_truncates_to_available() {
        let dist = OverlapDistribution::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let mut rng = Rng::new(5);
        // Only one active signature: k truncates to 0.
        assert_eq!(overlap_flags(0, &[42], &dist, &mut rng), vec![42]);
        // Two active: k truncates to 1.
        let flags = overlap_flags(0, &[42, 43], &dist, &mut rng);
        assert_eq!(flags, vec![42, 43]);
    }

    #[test]
    fn overlap_contains_origin_and_is_deterministic() {
        let dist = OverlapDistribution::default_table();
        let active: Vec<usize> = (0..20).collect();
        let run = |seed: u64| -> Vec<Vec<usize>> {
            let mut rng = Rng::new(seed);
            (0..200)
                .map(|i| overlap_flags(i % active.len(), &active, &dist, &mut rng))
                .collect()
        };
        let a = run(99);
        let b = run(99);
        assert_eq!(a, b);
        for (i, flags) in a.iter().enumerate() {
            assert!(flags.contains(&(i % active.len())));
            assert!(flags.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn filter_drops_by_reason() {
        let raw = vec![
            lifecycle(0, 6, vec![]),   // 6-day lifespan: short
            lifecycle(0, 7, vec![]),   // exactly 7: kept
            lifecycle(5, 400, vec![]), // removal beyond window: outside
            lifecycle(-2, 50, vec![]), // intro before window: outside
        ];
        let f = filter_schedule(raw, 0, 365);
        assert_eq!(f.kept.len(), 1);
        assert_eq!(f.kept[0].removal_day, 7);
        assert_eq!(f.dropped_short, 1);
        assert_eq!(f.dropped_outside, 2);
    }

    #[test]
    fn lifecycle_validation() {
        assert!(matches!(
            SignatureLifecycle::new("x", 10, 10, vec![], 1, 3, 3),
            Err(TraceError::BadWindow { .. })
        ));
        assert!(matches!(
            SignatureLifecycle::new("x", 10, 20, vec![20], 1, 3, 3),
            Err(TraceError::UpdateOutsideWindow { .. })
        ));
    }
}

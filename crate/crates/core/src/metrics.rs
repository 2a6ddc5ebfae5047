//! Closed-form evaluation of detection probabilities, confusion rates, scan
//! cost, budget expenses, the rate-balancing score, and goal checking.
//!
//! All functions are pure; nothing here touches an RNG or a clock.

use thiserror::Error;

use crate::model::{ClassifierSet, CostModel, Goals, ObservationDataset, SamplingVector};

/// Denominator convention for the FP and FN rates.
///
/// TP and TN are identical in both modes: TP is the caught positive mass over
/// the positive mass, TN the suppressed negative mass over the negative mass.
/// The modes differ only in what FP and FN are divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// FP is divided by the *positive* mass and FN by the *negative* mass —
    /// each error rate is expressed relative to the opposite class.
    Crossed,
    /// FP is divided by the negative mass (the classical false-positive rate)
    /// and FN by the positive mass (the classical miss rate). In this mode
    /// TP + FN = 1 and TN + FP = 1.
    Conventional,
}

/// Weighted confusion rates under a stated normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionRates {
    pub true_pos: f64,
    pub false_pos: f64,
    pub true_neg: f64,
    pub false_neg: f64,
    pub normalization: Normalization,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("dataset has zero {0} mass; the requested rates are undefined")]
    DegenerateDenominator(&'static str),
    #[error("rate vector has {rates} entries but the classifier set has {classifiers}")]
    LengthMismatch { rates: usize, classifiers: usize },
    #[error("f1_sr is undefined when tp + fp = 0")]
    ZeroDivisor,
}

/// Probability that a sample flagged by `flags` is caught under `rates`:
/// one minus the probability that every flagging classifier skips it.
/// An unflagged sample can never be caught.
pub fn exploitation_probability(flags: &[usize], rates: &SamplingVector) -> f64 {
    let mut miss = 1.0;
    for &j in flags {
        miss *= 1.0 - rates.get(j);
    }
    1.0 - miss
}

/// Weighted confusion rates of `dataset` under `rates`.
///
/// Errors when a needed class mass is zero (no positives or no negatives);
/// the caller decides whether that is fatal.
pub fn confusion_rates(
    dataset: &ObservationDataset,
    rates: &SamplingVector,
    normalization: Normalization,
) -> Result<ConfusionRates, MetricsError> {
    let mut pos_mass = 0.0; // sum of W over malicious samples
    let mut neg_mass = 0.0; // sum of W over benign samples
    let mut caught_pos = 0.0; // sum of W * Pr over malicious
    let mut caught_neg = 0.0; // sum of W * Pr over benign
    for s in &dataset.samples {
        let pr = exploitation_probability(&s.flags, rates);
        if s.ground_truth {
            pos_mass += s.weight;
            caught_pos += s.weight * pr;
        } else {
            neg_mass += s.weight;
            caught_neg += s.weight * pr;
        }
    }
    if pos_mass <= 0.0 {
        return Err(MetricsError::DegenerateDenominator("positive"));
    }
    if neg_mass <= 0.0 {
        return Err(MetricsError::DegenerateDenominator("negative"));
    }
    let missed_pos = pos_mass - caught_pos;
    let passed_neg = neg_mass - caught_neg;
    let (false_pos, false_neg) = match normalization {
        Normalization::Crossed => (caught_neg / pos_mass, missed_pos / neg_mass),
        Normalization::Conventional => (caught_neg / neg_mass, missed_pos / pos_mass),
    };
    Ok(ConfusionRates {
        true_pos: caught_pos / pos_mass,
        false_pos,
        true_neg: passed_neg / neg_mass,
        false_neg,
        normalization,
    })
}

/// Average per-entry cost of running the ensemble: dot product of
/// per-classifier costs and sampling rates.
pub fn scan_cost(rates: &SamplingVector, classifiers: &ClassifierSet) -> Result<f64, MetricsError> {
    if rates.len() != classifiers.len() {
        return Err(MetricsError::LengthMismatch {
            rates: rates.len(),
            classifiers: classifiers.len(),
        });
    }
    Ok(classifiers
        .scan_costs()
        .zip(rates.as_slice())
        .map(|(p, &a)| p * a)
        .sum())
}

/// Expected budget impact: cost_fn * FN + cost_fp * FP.
pub fn expenses(confusion: &ConfusionRates, cost_model: &CostModel) -> f64 {
    cost_model.cost_fn * confusion.false_neg + cost_model.cost_fp * confusion.false_pos
}

/// Harmonic-style combination of the TP and FP rates: 2*tp*fp / (tp + fp).
pub fn f1_sr(tp: f64, fp: f64) -> Result<f64, MetricsError> {
    if tp + fp == 0.0 {
        return Err(MetricsError::ZeroDivisor);
    }
    Ok(2.0 * (tp * fp) / (tp + fp))
}

/// One violated goal, with how far past the threshold the rate sits.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalViolation {
    pub goal: &'static str,
    pub threshold: f64,
    pub actual: f64,
    pub margin: f64,
}

impl std::fmt::Display for GoalViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} violates threshold {} by {} (actual {})",
            self.goal, self.threshold, self.margin, self.actual
        )
    }
}

/// Evaluate every present goal threshold; comparisons are exact, with no
/// epsilon — thresholds are policy, not numerics.
pub fn check_goals(confusion: &ConfusionRates, cost: f64, goals: &Goals) -> Vec<GoalViolation> {
    let mut violations = Vec::new();
    let mut check_min = |goal: &'static str, actual: f64, threshold: Option<f64>| {
        if let Some(t) = threshold {
            if actual < t {
                violations.push(GoalViolation {
                    goal,
                    threshold: t,
                    actual,
                    margin: t - actual,
                });
            }
        }
    };
    check_min("TP", confusion.true_pos, goals.tp_min);
    check_min("TN", confusion.true_neg, goals.tn_min);
    let mut check_max = |goal: &'static str, actual: f64, threshold: Option<f64>| {
        if let Some(t) = threshold {
            if actual > t {
                violations.push(GoalViolation {
                    goal,
                    threshold: t,
                    actual,
                    margin: actual - t,
                });
            }
        }
    };
    check_max("FP", confusion.false_pos, goals.fp_max);
    check_max("FN", confusion.false_neg, goals.fn_max);
    check_max("Cost", cost, goals.cost_max);
    violations
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::Observation;
    use crate::rng::Rng;
    use proptest::prelude::*;

    /// The four-sample reference dataset used across modules:
    /// two positives flagged {0} and {0,1}, one negative flagged {1},
    /// one unflagged negative.
    pub(crate) fn reference_dataset() -> ObservationDataset {
        ObservationDataset::new(vec![
            Observation::new(true, vec![0], 1.0, 0),
            Observation::new(true, vec![0, 1], 1.0, 0),
            Observation::new(false, vec![1], 1.0, 0),
            Observation::new(false, vec![], 1.0, 0),
        ])
    }

    #[test]
    fn certain_classifier_catches() {
        let rates = SamplingVector::new(vec![1.0, 0.3]).unwrap();
        assert_eq!(exploitation_probability(&[0], &rates), 1.0);
    }

    #[test]
    fn empty_flags_never_caught() {
        let rates = SamplingVector::new(vec![0.9, 0.9]).unwrap();
        assert_eq!(exploitation_probability(&[], &rates), 0.0);
    }

    #[test]
    fn two_half_rates_give_three_quarters() {
        let rates = SamplingVector::new(vec![0.5, 0.5]).unwrap();
        assert!((exploitation_probability(&[0, 1], &rates) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn reference_dataset_crossed_rates() {
        let rates = SamplingVector::new(vec![0.5, 0.5]).unwrap();
        let c = confusion_rates(&reference_dataset(), &rates, Normalization::Crossed).unwrap();
        assert!((c.true_pos - 0.625).abs() < 1e-12);
        assert!((c.false_pos - 0.25).abs() < 1e-12);
        assert!((c.true_neg - 0.75).abs() < 1e-12);
        assert!((c.false_neg - 0.375).abs() < 1e-12);
    }

    #[test]
    fn all_ones_catches_every_flagged_positive() {
        let rates = SamplingVector::new(vec![1.0, 1.0]).unwrap();
        let ds = ObservationDataset::new(vec![
            Observation::new(true, vec![0], 1.0, 0),
            Observation::new(true, vec![1], 1.0, 0),
            Observation::new(false, vec![], 1.0, 0),
        ]);
        let c = confusion_rates(&ds, &rates, Normalization::Conventional).unwrap();
        assert_eq!(c.true_pos, 1.0);
    }

    #[test]
    fn all_zeros_catches_nothing() {
        let rates = SamplingVector::new(vec![0.0, 0.0]).unwrap();
        let c = confusion_rates(&reference_dataset(), &rates, Normalization::Conventional).unwrap();
        assert_eq!(c.true_pos, 0.0);
        assert_eq!(c.false_pos, 0.0);
        assert_eq!(c.true_neg, 1.0);
        assert_eq!(c.false_neg, 1.0);
    }

    #[test]
    fn missing_class_is_an_error() {
        let ds = ObservationDataset::new(vec![Observation::new(true, vec![0], 1.0, 0)]);
        let rates = SamplingVector::uniform(1, 0.5).unwrap();
        let err = confusion_rates(&ds, &rates, Normalization::Conventional).unwrap_err();
        assert_eq!(err, MetricsError::DegenerateDenominator("negative"));
    }

    #[test]
    fn scan_cost_examples() {
        use crate::model::Classifier;
        let set = ClassifierSet::new(vec![
            Classifier {
                id: "a".into(),
                scan_cost: 2.0,
                severity: 1,
            },
            Classifier {
                id: "b".into(),
                scan_cost: 3.0,
                severity: 1,
            },
        ])
        .unwrap();
        let zero = SamplingVector::uniform(2, 0.0).unwrap();
        assert_eq!(scan_cost(&zero, &set).unwrap(), 0.0);
        let ones = SamplingVector::uniform(2, 1.0).unwrap();
        assert_eq!(scan_cost(&ones, &set).unwrap(), 5.0);
        let mixed = SamplingVector::new(vec![0.5, 1.0]).unwrap();
        assert_eq!(scan_cost(&mixed, &set).unwrap(), 4.0);
        let short = SamplingVector::uniform(1, 1.0).unwrap();
        assert!(scan_cost(&short, &set).is_err());
    }

    #[test]
    fn expenses_examples() {
        let rates = SamplingVector::new(vec![0.5, 0.5]).unwrap();
        let c = confusion_rates(&reference_dataset(), &rates, Normalization::Crossed).unwrap();
        let unit = CostModel::new(1.0, 1.0).unwrap();
        assert!((expenses(&c, &unit) - 0.625).abs() < 1e-12);

        let zero = ConfusionRates {
            true_pos: 1.0,
            false_pos: 0.0,
            true_neg: 1.0,
            false_neg: 0.0,
            normalization: Normalization::Conventional,
        };
        assert_eq!(expenses(&zero, &unit), 0.0);

        let fn_only = CostModel::new(2.0, 0.0).unwrap();
        assert!((expenses(&c, &fn_only) - 2.0 * 0.375).abs() < 1e-12);
    }

    #[test]
    fn f1_sr_examples() {
        assert!((f1_sr(0.4, 0.4).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(f1_sr(1.0, 0.0).unwrap(), 0.0);
        assert!((f1_sr(0.625, 0.25).unwrap() - 2.0 * 0.625 * 0.25 / 0.875).abs() < 1e-15);
        assert_eq!(f1_sr(0.0, 0.0).unwrap_err(), MetricsError::ZeroDivisor);
    }

    #[test]
    fn goal_checking() {
        let c = ConfusionRates {
            true_pos: 0.95,
            false_pos: 0.3,
            true_neg: 0.9,
            false_neg: 0.05,
            normalization: Normalization::Conventional,
        };
        assert!(check_goals(&c, 0.0, &Goals::default()).is_empty());

        let ok = Goals {
            tp_min: Some(0.9),
            ..Goals::default()
        };
        assert!(check_goals(&c, 0.0, &ok).is_empty());

        let bad = Goals {
            fp_max: Some(0.25),
            ..Goals::default()
        };
        let violations = check_goals(&c, 0.0, &bad);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].goal, "FP");
        assert!((violations[0].margin - 0.05).abs() < 1e-12);
    }

    fn random_dataset(rng: &mut Rng, samples: usize, classifiers: usize) -> ObservationDataset {
        let mut out = Vec::with_capacity(samples);
        // Guarantee at least one positive and one negative.
        for i in 0..samples {
            let ground_truth = if i == 0 {
                true
            } else if i == 1 {
                false
            } else {
                rng.bernoulli(0.5)
            };
            let n_flags = rng.range_usize(3);
            let flags: Vec<usize> = (0..n_flags).map(|_| rng.range_usize(classifiers)).collect();
            out.push(Observation::new(ground_truth, flags, rng.next_f64(), 0));
        }
        ObservationDataset::new(out)
    }

    #[test]
    fn monotone_in_each_rate() {
        // Raising any single rate never lowers TP/FP/Cost, never raises TN/FN.
        let mut rng = Rng::new(2024);
        let classifiers = ClassifierSet::uniform(4);
        for _ in 0..250 {
            let ds = random_dataset(&mut rng, 12, 4);
            let mut rates: Vec<f64> = (0..4).map(|_| rng.next_f64()).collect();
            let before = SamplingVector::new(rates.clone()).unwrap();
            let j = rng.range_usize(4);
            rates[j] = rates[j] + (1.0 - rates[j]) * rng.next_f64();
            let after = SamplingVector::new(rates).unwrap();
            let (Ok(cb), Ok(ca)) = (
                confusion_rates(&ds, &before, Normalization::Conventional),
                confusion_rates(&ds, &after, Normalization::Conventional),
            ) else {
                continue;
            };
            assert!(ca.true_pos >= cb.true_pos - 1e-12);
            assert!(ca.false_pos >= cb.false_pos - 1e-12);
            assert!(ca.true_neg <= cb.true_neg + 1e-12);
            assert!(ca.false_neg <= cb.false_neg + 1e-12);
            let costb = scan_cost(&before, &classifiers).unwrap();
            let costa = scan_cost(&after, &classifiers).unwrap();
            assert!(costa >= costb - 1e-12);
        }
    }

    proptest! {
        #[test]
        fn exploitation_probability_in_unit_interval(
            rates in proptest::collection::vec(0.0..=1.0f64, 1..6),
            flag_mask in proptest::collection::vec(any::<bool>(), 1..6),
        ) {
            let n = rates.len().min(flag_mask.len());
            let flags: Vec<usize> = (0..n).filter(|&i| flag_mask[i]).collect();
            let v = SamplingVector::new(rates).unwrap();
            let p = exploitation_probability(&flags, &v);
            prop_assert!((0.0..=1.0).contains(&p));
            if flags.len() == 1 {
                prop_assert!((p - v.get(flags[0])).abs() < 1e-15);
            }
        }

        #[test]
        fn conventional_identities(
            n_pos in 1usize..8,
            n_neg in 1usize..8,
            rates in proptest::collection::vec(0.0..=1.0f64, 3),
            seed in any::<u64>(),
        ) {
            let mut rng = Rng::new(seed);
            let mut samples = Vec::new();
            for _ in 0..n_pos {
                let flags: Vec<usize> = (0..rng.range_usize(4)).map(|_| rng.range_usize(3)).collect();
                samples.push(Observation::new(true, flags, 1.0, 0));
            }
            for _ in 0..n_neg {
                let flags: Vec<usize> = (0..rng.range_usize(4)).map(|_| rng.range_usize(3)).collect();
                samples.push(Observation::new(false, flags, 1.0, 0));
            }
            let ds = ObservationDataset::new(samples);
            let v = SamplingVector::new(rates).unwrap();
            let c = confusion_rates(&ds, &v, Normalization::Conventional).unwrap();
            prop_assert!((c.true_pos + c.false_neg - 1.0).abs() < 1e-12);
            prop_assert!((c.true_neg + c.false_pos - 1.0).abs() < 1e-12);
        }
    }
}

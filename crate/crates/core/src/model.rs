//! Shared domain types: the classifier ensemble, observation datasets,
//! sampling-rate vectors, optimization goals, cost models, and the weighting
//! and minimum-rate policies.
//!
//! Everything here is immutable after construction; operations that change a
//! value return a new one.

use std::collections::BTreeMap;

use thiserror::Error;

/// One detection rule (an IDS signature, an AV rule, a filter entry).
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub id: String,
    /// Average cost of applying this classifier to one entry, arbitrary units.
    pub scan_cost: f64,
    /// Severity of the attacks this classifier targets; drives minimum rates.
    pub severity: u8,
}

/// The ensemble of classifiers under management.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSet {
    classifiers: Vec<Classifier>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("classifier set must contain at least one classifier")]
    EmptyClassifierSet,
    #[error("duplicate classifier id `{0}`")]
    DuplicateClassifierId(String),
    #[error("classifier `{id}` has negative scan cost {cost}")]
    NegativeScanCost { id: String, cost: f64 },
    #[error("sampling rate at index {index} is {value}, outside [0, 1]")]
    RateOutOfRange { index: usize, value: f64 },
    #[error("rate vector has {got} entries, expected {expected}")]
    RateLengthMismatch { expected: usize, got: usize },
    #[error("goal threshold `{name}` is {value}, must be nonnegative")]
    NegativeGoal { name: &'static str, value: f64 },
    #[error("cost model has negative component: cost_fn={cost_fn}, cost_fp={cost_fp}")]
    NegativeCost { cost_fn: f64, cost_fp: f64 },
    #[error("min-rate value {value} for severity {severity} is outside [0, 1]")]
    MinRateOutOfRange { severity: u8, value: f64 },
    #[error("no min-rate entry for severity {0} and no default given")]
    MissingSeverity(u8),
    #[error("weight policy parameter `{name}` is {value}, outside {range}")]
    WeightParamOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

impl ClassifierSet {
    pub fn new(classifiers: Vec<Classifier>) -> Result<Self, ModelError> {
        if classifiers.is_empty() {
            return Err(ModelError::EmptyClassifierSet);
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &classifiers {
            if !seen.insert(c.id.as_str()) {
                return Err(ModelError::DuplicateClassifierId(c.id.clone()));
            }
            if c.scan_cost < 0.0 || !c.scan_cost.is_finite() {
                return Err(ModelError::NegativeScanCost {
                    id: c.id.clone(),
                    cost: c.scan_cost,
                });
            }
        }
        Ok(ClassifierSet { classifiers })
    }

    /// Uniform ensemble with ids `c0..cN`, unit scan cost, severity 1.
    pub fn uniform(count: usize) -> Self {
        let classifiers = (0..count)
            .map(|i| Classifier {
                id: format!("c{i}"),
                scan_cost: 1.0,
                severity: 1,
            })
            .collect();
        ClassifierSet::new(classifiers).expect("count >= 1")
    }

    pub fn len(&self) -> usize {
        self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires >= 1
    }

    pub fn iter(&self) -> impl Iterator<Item = &Classifier> {
        self.classifiers.iter()
    }

    pub fn get(&self, index: usize) -> Option<&Classifier> {
        self.classifiers.get(index)
    }

    pub fn scan_costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.classifiers.iter().map(|c| c.scan_cost)
    }
}

/// One flagged (or unflagged) sample with ground truth and a weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// True when the sample is actually malicious.
    pub ground_truth: bool,
    /// Indices of the classifiers that flagged this sample; sorted, unique.
    pub flags: Vec<usize>,
    /// Weight in [0, 1].
    pub weight: f64,
    /// Day the sample entered the dataset; ages are measured from here.
    pub ingestion_day: i64,
}

impl Observation {
    pub fn new(ground_truth: bool, mut flags: Vec<usize>, weight: f64, ingestion_day: i64) -> Self {
        flags.sort_unstable();
        flags.dedup();
        Observation {
            ground_truth,
            flags,
            weight,
            ingestion_day,
        }
    }
}

/// The feedback dataset a re-optimization runs on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationDataset {
    pub samples: Vec<Observation>,
}

impl ObservationDataset {
    pub fn new(samples: Vec<Observation>) -> Self {
        ObservationDataset { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A single invariant violation found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetViolation {
    pub sample_index: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    /// A flag references a classifier index outside the set.
    FlagIndexOutOfRange {
        flag: usize,
        classifier_count: usize,
    },
    /// Weight outside [0, 1] (or not finite).
    WeightOutOfRange { weight: f64 },
}

impl std::fmt::Display for DatasetViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            ViolationKind::FlagIndexOutOfRange {
                flag,
                classifier_count,
            } => write!(
                f,
                "sample {}: flag index {flag} out of range (classifier count {classifier_count})",
                self.sample_index
            ),
            ViolationKind::WeightOutOfRange { weight } => write!(
                f,
                "sample {}: weight {weight} out of range [0, 1]",
                self.sample_index
            ),
        }
    }
}

/// Check every dataset invariant against a classifier set.
///
/// Returns the full violation list; an empty list means the dataset is valid.
pub fn validate_dataset(
    dataset: &ObservationDataset,
    classifiers: &ClassifierSet,
) -> Vec<DatasetViolation> {
    let n = classifiers.len();
    let mut violations = Vec::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        for &flag in &s.flags {
            if flag >= n {
                violations.push(DatasetViolation {
                    sample_index: i,
                    kind: ViolationKind::FlagIndexOutOfRange {
                        flag,
                        classifier_count: n,
                    },
                });
            }
        }
        if !(0.0..=1.0).contains(&s.weight) || !s.weight.is_finite() {
            violations.push(DatasetViolation {
                sample_index: i,
                kind: ViolationKind::WeightOutOfRange { weight: s.weight },
            });
        }
    }
    violations
}

/// Per-classifier sampling rates, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingVector {
    rates: Vec<f64>,
}

impl SamplingVector {
    pub fn new(rates: Vec<f64>) -> Result<Self, ModelError> {
        for (index, &value) in rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(ModelError::RateOutOfRange { index, value });
            }
        }
        Ok(SamplingVector { rates })
    }

    pub fn uniform(len: usize, rate: f64) -> Result<Self, ModelError> {
        SamplingVector::new(vec![rate; len])
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.rates[index]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rates
    }
}

/// Threshold goals; any subset may be present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Goals {
    /// Keep the true-positive rate at least this high.
    pub tp_min: Option<f64>,
    /// Keep the true-negative rate at least this high.
    pub tn_min: Option<f64>,
    /// Keep the false-positive rate at most this high.
    pub fp_max: Option<f64>,
    /// Keep the false-negative rate at most this high.
    pub fn_max: Option<f64>,
    /// Keep the scan cost at most this high.
    pub cost_max: Option<f64>,
}

impl Goals {
    pub fn validate(&self) -> Result<(), ModelError> {
        let checks = [
            ("tp_min", self.tp_min),
            ("tn_min", self.tn_min),
            ("fp_max", self.fp_max),
            ("fn_max", self.fn_max),
            ("cost_max", self.cost_max),
        ];
        for (name, v) in checks {
            if let Some(value) = v {
                if value < 0.0 || !value.is_finite() {
                    return Err(ModelError::NegativeGoal { name, value });
                }
            }
        }
        Ok(())
    }

    pub fn is_unconstrained(&self) -> bool {
        self.tp_min.is_none()
            && self.tn_min.is_none()
            && self.fp_max.is_none()
            && self.fn_max.is_none()
            && self.cost_max.is_none()
    }
}

/// Relative prices of the two error kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub cost_fn: f64,
    pub cost_fp: f64,
}

impl CostModel {
    pub fn new(cost_fn: f64, cost_fp: f64) -> Result<Self, ModelError> {
        if cost_fn < 0.0 || cost_fp < 0.0 || !cost_fn.is_finite() || !cost_fp.is_finite() {
            return Err(ModelError::NegativeCost { cost_fn, cost_fp });
        }
        Ok(CostModel { cost_fn, cost_fp })
    }

    /// Cost model with unit false-positive cost and the given ratio.
    pub fn from_beta(beta: f64) -> Result<Self, ModelError> {
        CostModel::new(beta, 1.0)
    }

    /// Ratio of false-negative to false-positive cost.
    pub fn beta(&self) -> f64 {
        if self.cost_fp > 0.0 {
            self.cost_fn / self.cost_fp
        } else {
            0.0
        }
    }
}

/// Shape of the severity-driven minimum sampling rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinRateForm {
    /// Rate becomes max(rate, value).
    LowerBound,
    /// Rate becomes min(1, rate + value).
    Additive,
    /// Rate becomes rate + (1 - rate) * value.
    Proportional,
}

/// Severity-indexed minimum sampling rates.
#[derive(Debug, Clone, PartialEq)]
pub struct MinRatePolicy {
    pub form: MinRateForm,
    table: BTreeMap<u8, f64>,
    default: Option<f64>,
}

impl MinRatePolicy {
    pub fn new(
        form: MinRateForm,
        table: BTreeMap<u8, f64>,
        default: Option<f64>,
    ) -> Result<Self, ModelError> {
        for (&severity, &value) in &table {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(ModelError::MinRateOutOfRange { severity, value });
            }
        }
        if let Some(value) = default {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(ModelError::MinRateOutOfRange { severity: 0, value });
            }
        }
        Ok(MinRatePolicy {
            form,
            table,
            default,
        })
    }

    /// Policy that never lifts a rate.
    pub fn disabled() -> Self {
        MinRatePolicy {
            form: MinRateForm::LowerBound,
            table: BTreeMap::new(),
            default: Some(0.0),
        }
    }

    /// Same value for every severity.
    pub fn flat(form: MinRateForm, value: f64) -> Result<Self, ModelError> {
        MinRatePolicy::new(form, BTreeMap::new(), Some(value))
    }

    pub fn value_for(&self, severity: u8) -> Result<f64, ModelError> {
        self.table
            .get(&severity)
            .copied()
            .or(self.default)
            .ok_or(ModelError::MissingSeverity(severity))
    }

    /// Check that every severity in the set has an entry or a default.
    pub fn validate_against(&self, classifiers: &ClassifierSet) -> Result<(), ModelError> {
        for c in classifiers.iter() {
            self.value_for(c.severity)?;
        }
        Ok(())
    }
}

/// How sample weights evolve as the dataset ages.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightPolicy {
    /// Weights never change.
    None,
    /// Weight drops to 0 once a sample is older than `max_age_days`.
    DropOld { max_age_days: u32 },
    /// New samples enter at `w0`; every application multiplies all weights by `delta`.
    Exponential { w0: f64, delta: f64 },
    /// Weight is the reciprocal of the mean sampling rate over the sample's
    /// flagging classifiers, normalized into (0, 1]; samples whose mean rate
    /// is 0 are clamped to weight 1.
    InverseRate,
}

impl WeightPolicy {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            WeightPolicy::Exponential { w0, delta } => {
                if !(w0 > 0.0 && w0 <= 1.0) {
                    return Err(ModelError::WeightParamOutOfRange {
                        name: "w0",
                        value: w0,
                        range: "(0, 1]",
                    });
                }
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(ModelError::WeightParamOutOfRange {
                        name: "delta",
                        value: delta,
                        range: "(0, 1)",
                    });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Weight a sample carries when it first enters the dataset.
    pub fn initial_weight(&self) -> f64 {
        match *self {
            WeightPolicy::Exponential { w0, .. } => w0,
            _ => 1.0,
        }
    }
}

/// Apply a weight policy, returning the reweighted dataset.
///
/// `current_day` anchors age computations; `rates` feed the inverse-rate form.
pub fn apply_weight_policy(
    dataset: &ObservationDataset,
    policy: &WeightPolicy,
    current_day: i64,
    rates: &SamplingVector,
) -> ObservationDataset {
    match policy {
        WeightPolicy::None => dataset.clone(),
        WeightPolicy::DropOld { max_age_days } => {
            let samples = dataset
                .samples
                .iter()
                .map(|s| {
                    let age = current_day - s.ingestion_day;
                    let mut s = s.clone();
                    if age > i64::from(*max_age_days) {
                        s.weight = 0.0;
                    }
                    s
                })
                .collect();
            ObservationDataset::new(samples)
        }
        WeightPolicy::Exponential { delta, .. } => {
            let samples = dataset
                .samples
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    s.weight *= delta;
                    s
                })
                .collect();
            ObservationDataset::new(samples)
        }
        WeightPolicy::InverseRate => {
            // Reciprocal of each sample's mean flagging rate, scaled so the
            // largest finite reciprocal maps to 1. Zero-rate samples clamp to 1.
            let recips: Vec<Option<f64>> = dataset
                .samples
                .iter()
                .map(|s| {
                    if s.flags.is_empty() {
                        return None; // unflagged: keep neutral weight 1
                    }
                    let mean: f64 =
                        s.flags.iter().map(|&j| rates.get(j)).sum::<f64>() / s.flags.len() as f64;
                    if mean <= 0.0 {
                        None // clamp to 1
                    } else {
                        Some(1.0 / mean)
                    }
                })
                .collect();
            let max_recip = recips
                .iter()
                .flatten()
                .fold(0.0_f64, |acc, &r| acc.max(r))
                .max(1.0);
            let samples = dataset
                .samples
                .iter()
                .zip(&recips)
                .map(|(s, r)| {
                    let mut s = s.clone();
                    s.weight = match r {
                        Some(r) => r / max_recip,
                        None => 1.0,
                    };
                    s
                })
                .collect();
            ObservationDataset::new(samples)
        }
    }
}

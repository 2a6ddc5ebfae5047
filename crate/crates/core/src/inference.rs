//! Sampling-rate inference over an OR-factor graph.
//!
//! Each classifier gets a boolean query variable; each decided batch
//! contributes one observed variable tied to the classifiers that flag it
//! through an OR-equality factor: the observation is true exactly when at
//! least one connected classifier variable is true. Posterior marginals of the
//! query variables become the sampling rates.
//!
//! The solver is damped, synchronous loopy sum-product with messages floored
//! away from hard 0/1 after normalization. The floor matters: evidence can be
//! contradictory (one batch demands a classifier on, another demands it off),
//! and flooring *after* normalization keeps opposing certainties at equal,
//! finite log-odds so they cancel to the prior instead of collapsing to NaN.
//! On consistent graphs the floor only perturbs marginals at the 1e-9 scale.
//!
//! [`exact_posterior`] enumerates all assignments and serves as the
//! independent oracle for the message-passing path; it must stay free of any
//! code shared with [`infer_rates`].

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::batch::Batch;
use crate::model::{ClassifierSet, MinRateForm, MinRatePolicy, ModelError, SamplingVector};

/// One OR-equality factor: `evidence == OR(members)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    /// Classifier indices wired into this factor; sorted, unique.
    pub members: Vec<usize>,
    /// Observed value of the attached sample variable.
    pub evidence: bool,
    /// Repetition count; `r` identical samples act as `r` copies of the factor.
    pub repeat: u32,
}

/// Bipartite OR-factor graph over classifier variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    classifier_count: usize,
    factors: Vec<Factor>,
}

/// How batch multiplicity maps to factor repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchMultiplicity {
    /// One factor per batch regardless of batch size.
    #[default]
    Single,
    /// Repeat each batch's factor once per member sample.
    SampleCount,
}

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("batch {index} carries no decision; run selection first")]
    UndecidedBatch { index: usize },
    #[error("factor {index} references classifier {member} but the graph has {count}")]
    MemberOutOfRange {
        index: usize,
        member: usize,
        count: usize,
    },
    #[error("inference exceeded the {0:?} timeout")]
    Timeout(Duration),
    #[error("message passing produced a non-finite marginal for classifier {0}")]
    NumericalCollapse(usize),
    #[error("evidence is inconsistent: no assignment satisfies every factor")]
    InconsistentEvidence,
    #[error("exact enumeration supports at most {max} classifiers, got {got}")]
    TooManyClassifiers { got: usize, max: usize },
    #[error("factor {0} touches no classifier")]
    EmptyFactor(usize),
    #[error("invalid config: {0}")]
    BadConfig(&'static str),
}

impl FactorGraph {
    pub fn new(classifier_count: usize, factors: Vec<Factor>) -> Result<Self, InferenceError> {
        for (index, f) in factors.iter().enumerate() {
            if f.members.is_empty() {
                return Err(InferenceError::EmptyFactor(index));
            }
            for &member in &f.members {
                if member >= classifier_count {
                    return Err(InferenceError::MemberOutOfRange {
                        index,
                        member,
                        count: classifier_count,
                    });
                }
            }
        }
        Ok(FactorGraph {
            classifier_count,
            factors,
        })
    }

    pub fn classifier_count(&self) -> usize {
        self.classifier_count
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Total variable count: one query variable per classifier plus one
    /// observation variable per factor.
    pub fn variable_count(&self) -> usize {
        self.classifier_count + self.factors.len()
    }

    /// Plain-text adjacency listing, one factor per line:
    /// `F<j> S=<0|1> : C<i1> C<i2> ...`
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for (j, f) in self.factors.iter().enumerate() {
            let _ = write!(out, "F{j} S={}", u8::from(f.evidence));
            let _ = write!(out, " :");
            for &m in &f.members {
                let _ = write!(out, " C{m}");
            }
            out.push('\n');
        }
        out
    }

    /// True when no variable participates in a cycle.
    pub fn is_tree(&self) -> bool {
        // Union-find over variables and factors; a repeated edge or a merge of
        // already-joined components closes a cycle.
        let n = self.classifier_count + self.factors.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (j, f) in self.factors.iter().enumerate() {
            if f.repeat > 1 && f.members.len() > 1 {
                return false;
            }
            let fnode = self.classifier_count + j;
            for &m in &f.members {
                let a = find(&mut parent, m);
                let b = find(&mut parent, fnode);
                if a == b {
                    return false;
                }
                parent[a] = b;
            }
        }
        true
    }
}

/// Build the graph from decided batches: one observation per batch, evidence
/// true iff the batch was enabled, edges along the batch key.
pub fn build_factor_graph(
    batches: &[Batch],
    classifier_count: usize,
    multiplicity: BatchMultiplicity,
) -> Result<FactorGraph, InferenceError> {
    let mut factors = Vec::with_capacity(batches.len());
    for (index, b) in batches.iter().enumerate() {
        let evidence = b.decision.ok_or(InferenceError::UndecidedBatch { index })?;
        let repeat = match multiplicity {
            BatchMultiplicity::Single => 1,
            BatchMultiplicity::SampleCount => {
                u32::try_from(b.sample_count.max(1)).unwrap_or(u32::MAX)
            }
        };
        factors.push(Factor {
            members: b.key.indices().to_vec(),
            evidence,
            repeat,
        });
    }
    FactorGraph::new(classifier_count, factors)
}

/// Tunables for the message-passing solver.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    pub max_iterations: usize,
    /// Fraction of the previous message kept on each update, in [0, 1).
    pub damping: f64,
    /// Per-component floor applied to normalized messages.
    pub message_floor: f64,
    /// Convergence threshold: max-norm change of marginals between sweeps.
    pub tolerance: f64,
    /// Bernoulli prior shared by every query variable.
    pub prior: f64,
    /// Wall-clock budget; `None` disables the check.
    pub timeout: Option<Duration>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            max_iterations: 200,
            damping: 0.5,
            // Small enough that floor bias stays orders of magnitude below
            // the tree-exactness tolerance, large enough to absorb conflicts.
            message_floor: 1e-9,
            // Damping leaves a residual of roughly tolerance * d/(1-d) in the
            // marginals, so this sits well below the 1e-6 exactness expected
            // on trees.
            tolerance: 1e-8,
            prior: 0.5,
            timeout: Some(Duration::from_secs(60)),
        }
    }
}

impl InferenceConfig {
    fn validate(&self) -> Result<(), InferenceError> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(InferenceError::BadConfig("damping must be in [0, 1)"));
        }
        if !(self.message_floor > 0.0 && self.message_floor < 0.5) {
            return Err(InferenceError::BadConfig(
                "message_floor must be in (0, 0.5)",
            ));
        }
        if self.tolerance <= 0.0 || self.tolerance.is_nan() {
            return Err(InferenceError::BadConfig("tolerance must be positive"));
        }
        if !(self.prior > 0.0 && self.prior < 1.0) {
            return Err(InferenceError::BadConfig("prior must be in (0, 1)"));
        }
        if self.max_iterations == 0 {
            return Err(InferenceError::BadConfig("max_iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Outcome of a message-passing run.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    /// Posterior P(classifier enabled), one entry per classifier.
    pub marginals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub elapsed: Duration,
}

/// Probability-true of a normalized two-component message.
type Msg = f64;

/// Normalize an unnormalized (m0, m1) pair, then floor both components and
/// renormalize. A vanishing pair maps to the uniform message.
fn settle(m0: f64, m1: f64, floor: f64) -> Msg {
    let sum = m0 + m1;
    let (mut p0, mut p1) = if sum > 0.0 && sum.is_finite() {
        (m0 / sum, m1 / sum)
    } else {
        (0.5, 0.5)
    };
    p0 = p0.max(floor);
    p1 = p1.max(floor);
    p1 / (p0 + p1)
}

/// Damped loopy sum-product; marginals are the sampling rates.
///
/// Messages sweep factors in index order, then variables in index order, so
/// identical inputs give bit-identical outputs. Hitting `max_iterations`
/// returns the best-effort marginals with `converged = false`; only timeouts
/// and non-finite marginals are errors.
pub fn infer_rates(
    graph: &FactorGraph,
    config: &InferenceConfig,
) -> Result<InferenceResult, InferenceError> {
    config.validate()?;
    let start = Instant::now();
    let n = graph.classifier_count;
    let floor = config.message_floor;

    // Edge storage: per factor, the member list with its variable->factor and
    // factor->variable messages.
    let mut var_to_factor: Vec<Vec<Msg>> = graph
        .factors
        .iter()
        .map(|f| vec![config.prior; f.members.len()])
        .collect();
    let mut factor_to_var: Vec<Vec<Msg>> = graph
        .factors
        .iter()
        .map(|f| vec![0.5; f.members.len()])
        .collect();
    // Incident factor list per variable: (factor index, slot in that factor).
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (j, f) in graph.factors.iter().enumerate() {
        for (slot, &m) in f.members.iter().enumerate() {
            incident[m].push((j, slot));
        }
    }

    let mut marginals = vec![config.prior; n];
    let mut iterations = 0;
    let mut converged = false;

    for iter in 0..config.max_iterations {
        iterations = iter + 1;
        if let Some(budget) = config.timeout {
            if start.elapsed() > budget {
                return Err(InferenceError::Timeout(budget));
            }
        }

        // Factor-to-variable sweep.
        for (j, f) in graph.factors.iter().enumerate() {
            let qs = &var_to_factor[j];
            let d = qs.len();
            // Leave-one-out products of (1 - q) via prefix/suffix arrays.
            let mut prefix = vec![1.0; d + 1];
            for k in 0..d {
                prefix[k + 1] = prefix[k] * (1.0 - qs[k]);
            }
            let mut suffix = vec![1.0; d + 1];
            for k in (0..d).rev() {
                suffix[k] = suffix[k + 1] * (1.0 - qs[k]);
            }
            for slot in 0..d {
                let others_all_false = prefix[slot] * suffix[slot + 1];
                let (m0, m1) = if f.evidence {
                    // OR must hold: if this variable is false, some other
                    // member has to be true.
                    (1.0 - others_all_false, 1.0)
                } else {
                    // OR must fail: everyone false.
                    (others_all_false, 0.0)
                };
                let fresh = settle(m0, m1, floor);
                let old = factor_to_var[j][slot];
                factor_to_var[j][slot] = config.damping * old + (1.0 - config.damping) * fresh;
            }
        }

        // Variable-to-factor sweep plus marginals, in the log domain so long
        // products of near-floor components cannot underflow.
        let mut max_delta = 0.0_f64;
        for v in 0..n {
            let log_prior_1 = config.prior.ln();
            let log_prior_0 = (1.0 - config.prior).ln();
            let mut total1 = log_prior_1;
            let mut total0 = log_prior_0;
            for &(j, slot) in &incident[v] {
                let r = factor_to_var[j][slot];
                let w = f64::from(graph.factors[j].repeat);
                total1 += w * r.ln();
                total0 += w * (1.0 - r).ln();
            }
            let belief = logistic(total1 - total0);
            if !belief.is_finite() {
                return Err(InferenceError::NumericalCollapse(v));
            }
            max_delta = max_delta.max((belief - marginals[v]).abs());
            marginals[v] = belief;

            for &(j, slot) in &incident[v] {
                let r = factor_to_var[j][slot];
                // Cavity: divide out this factor once (repeat counts the other
                // copies as context, matching replicated-factor semantics).
                let cav1 = total1 - r.ln();
                let cav0 = total0 - (1.0 - r).ln();
                let q = logistic(cav1 - cav0);
                var_to_factor[j][slot] = settle(1.0 - q, q, floor);
            }
        }

        if max_delta < config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(InferenceResult {
        marginals,
        converged,
        iterations,
        elapsed: start.elapsed(),
    })
}

#[inline]
fn logistic(log_odds: f64) -> f64 {
    if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let e = log_odds.exp();
        e / (1.0 + e)
    }
}

/// Maximum classifier count [`exact_posterior`] will enumerate.
pub const EXACT_POSTERIOR_MAX: usize = 20;

/// Brute-force posterior marginals by enumerating every assignment.
///
/// Factors are hard indicators here; contradictory evidence surfaces as
/// [`InferenceError::InconsistentEvidence`] (total weight zero) instead of
/// being smoothed the way the message-passing path does.
pub fn exact_posterior(graph: &FactorGraph, prior: f64) -> Result<Vec<f64>, InferenceError> {
    let n = graph.classifier_count;
    if n > EXACT_POSTERIOR_MAX {
        return Err(InferenceError::TooManyClassifiers {
            got: n,
            max: EXACT_POSTERIOR_MAX,
        });
    }
    let mut total_weight = 0.0;
    let mut true_weight = vec![0.0; n];
    'assignments: for mask in 0u32..(1u32 << n) {
        for f in &graph.factors {
            let or = f.members.iter().any(|&m| mask & (1 << m) != 0);
            if or != f.evidence {
                continue 'assignments;
            }
        }
        let ones = mask.count_ones() as i32;
        let weight = prior.powi(ones) * (1.0 - prior).powi(n as i32 - ones);
        total_weight += weight;
        for (v, w) in true_weight.iter_mut().enumerate() {
            if mask & (1 << v) != 0 {
                *w += weight;
            }
        }
    }
    if total_weight <= 0.0 {
        return Err(InferenceError::InconsistentEvidence);
    }
    Ok(true_weight.iter().map(|w| w / total_weight).collect())
}

/// Lift rates to their severity-driven minimums.
///
/// Output never drops below the input and stays within [0, 1].
pub fn apply_min_rate(
    rates: &SamplingVector,
    policy: &MinRatePolicy,
    classifiers: &ClassifierSet,
) -> Result<SamplingVector, ModelError> {
    if rates.len() != classifiers.len() {
        return Err(ModelError::RateLengthMismatch {
            expected: classifiers.len(),
            got: rates.len(),
        });
    }
    let mut out = Vec::with_capacity(rates.len());
    for (j, c) in classifiers.iter().enumerate() {
        let rate = rates.get(j);
        let value = policy.value_for(c.severity)?;
        let lifted = match policy.form {
            MinRateForm::LowerBound => rate.max(value),
            MinRateForm::Additive => (rate + value).min(1.0),
            MinRateForm::Proportional => rate + (1.0 - rate) * value,
        };
        out.push(lifted.clamp(0.0, 1.0));
    }
    SamplingVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::BatchKey;
    use crate::rng::Rng;

    fn factor(members: Vec<usize>, evidence: bool) -> Factor {
        Factor {
            members,
            evidence,
            repeat: 1,
        }
    }

    /// The worked three-classifier, five-sample wiring: C1 flags S1 and S2,
    /// C2 flags S2, S3, S4, C3 flags S4 and S5.
    fn example_graph(evidence: [bool; 5]) -> FactorGraph {
        FactorGraph::new(
            3,
            vec![
                factor(vec![0], evidence[0]),
                factor(vec![0, 1], evidence[1]),
                factor(vec![1], evidence[2]),
                factor(vec![1, 2], evidence[3]),
                factor(vec![2], evidence[4]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn example_graph_shape() {
        let g = example_graph([true; 5]);
        assert_eq!(g.variable_count(), 8);
        assert_eq!(g.factors().len(), 5);
        assert!(g.is_tree());
    }

    #[test]
    fn empty_graph_has_only_query_variables() {
        let g = FactorGraph::new(4, vec![]).unwrap();
        assert_eq!(g.variable_count(), 4);
        let r = infer_rates(&g, &InferenceConfig::default()).unwrap();
        assert_eq!(r.marginals, vec![0.5; 4]);
        assert!(r.converged);
    }

    #[test]
    fn build_from_batches() {
        let mut b = Batch {
            key: BatchKey::new(vec![0, 1]).unwrap(),
            tp_mass: 1.0,
            fp_mass: 0.0,
            sample_count: 3,
            decision: Some(true),
        };
        let g = build_factor_graph(&[b.clone()], 2, BatchMultiplicity::Single).unwrap();
        assert_eq!(g.factors().len(), 1);
        assert_eq!(g.factors()[0].members, vec![0, 1]);
        assert!(g.factors()[0].evidence);
        assert_eq!(g.factors()[0].repeat, 1);

        let g = build_factor_graph(&[b.clone()], 2, BatchMultiplicity::SampleCount).unwrap();
        assert_eq!(g.factors()[0].repeat, 3);

        b.decision = None;
        assert_eq!(
            build_factor_graph(&[b], 2, BatchMultiplicity::Single).unwrap_err(),
            InferenceError::UndecidedBatch { index: 0 }
        );
    }

    #[test]
    fn dump_format() {
        let g = example_graph([true, true, true, false, true]);
        let dump = g.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines[0], "F0 S=1 : C0");
        assert_eq!(lines[3], "F3 S=0 : C1 C2");
    }

    #[test]
    fn all_true_evidence_pins_anchored_graph_to_ones() {
        let g = example_graph([true; 5]);
        let r = infer_rates(&g, &InferenceConfig::default()).unwrap();
        assert!(r.converged);
        for (i, m) in r.marginals.iter().enumerate() {
            assert!((m - 1.0).abs() <= 1e-6, "marginal {i} = {m}");
        }
    }

    #[test]
    fn contradictory_evidence_interpolates_to_prior() {
        // S4 false demands C2 and C3 off while S3 and S5 demand them on; the
        // conflict cancels to 0.5 and C1 stays pinned by its own samples.
        let g = example_graph([true, true, true, false, true]);
        let r = infer_rates(&g, &InferenceConfig::default()).unwrap();
        assert!((r.marginals[0] - 1.0).abs() <= 0.05);
        assert!((r.marginals[1] - 0.5).abs() <= 0.05);
        assert!((r.marginals[2] - 0.5).abs() <= 0.05);
    }

    #[test]
    fn single_false_sample_disables_classifier() {
        let g = FactorGraph::new(1, vec![factor(vec![0], false)]).unwrap();
        let r = infer_rates(&g, &InferenceConfig::default()).unwrap();
        assert!(r.marginals[0] <= 1e-6);
    }

    #[test]
    fn exact_posterior_shared_true_factor() {
        let g = FactorGraph::new(2, vec![factor(vec![0, 1], true)]).unwrap();
        let m = exact_posterior(&g, 0.5).unwrap();
        assert!((m[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((m[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_posterior_forced_false() {
        let g = FactorGraph::new(1, vec![factor(vec![0], false)]).unwrap();
        assert_eq!(exact_posterior(&g, 0.5).unwrap(), vec![0.0]);
    }

    #[test]
    fn exact_posterior_detects_contradiction() {
        let g = example_graph([true, true, true, false, true]);
        assert_eq!(
            exact_posterior(&g, 0.5).unwrap_err(),
            InferenceError::InconsistentEvidence
        );
    }

    #[test]
    fn exact_posterior_size_limit() {
        let g = FactorGraph::new(21, vec![]).unwrap();
        assert!(matches!(
            exact_posterior(&g, 0.5).unwrap_err(),
            InferenceError::TooManyClassifiers { got: 21, .. }
        ));
    }

    #[test]
    fn graph_rejects_malformed_factors() {
        assert_eq!(
            FactorGraph::new(2, vec![factor(vec![], true)]).unwrap_err(),
            InferenceError::EmptyFactor(0)
        );
        assert!(matches!(
            FactorGraph::new(2, vec![factor(vec![2], true)]).unwrap_err(),
            InferenceError::MemberOutOfRange { member: 2, .. }
        ));
    }

    #[test]
    fn loopy_matches_exact_on_trees() {
        let g = example_graph([true, true, true, true, false]);
        // S5 false forces C3 off; graph stays a consistent tree.
        let exact = exact_posterior(&g, 0.5).unwrap();
        let r = infer_rates(&g, &InferenceConfig::default()).unwrap();
        for (m, e) in r.marginals.iter().zip(&exact) {
            assert!((m - e).abs() <= 1e-6, "bp {m} vs exact {e}");
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let g = example_graph([true, false, true, true, true]);
        let a = infer_rates(&g, &InferenceConfig::default()).unwrap();
        let b = infer_rates(&g, &InferenceConfig::default()).unwrap();
        assert_eq!(a.marginals, b.marginals);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn all_true_converges_for_any_damping() {
        for damping in [0.0, 0.3, 0.7, 0.9] {
            let config = InferenceConfig {
                damping,
                max_iterations: 2000,
                ..InferenceConfig::default()
            };
            let g = example_graph([true; 5]);
            let r = infer_rates(&g, &config).unwrap();
            assert!(r.converged, "damping {damping}");
            for m in &r.marginals {
                assert!((m - 1.0).abs() <= 1e-6);
            }
        }
    }

    /// Random consistent-evidence graphs shaped like the batch structures the
    /// pipeline produces: most classifiers carry their own singleton batch,
    /// plus a sparse layer of overlap factors.
    pub(crate) fn random_consistent_graph(rng: &mut Rng, max_classifiers: usize) -> FactorGraph {
        let n = 2 + rng.range_usize(max_classifiers - 1);
        let truth: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
        let mut keys = std::collections::BTreeSet::new();
        let mut factors = Vec::new();
        for v in 0..n {
            if rng.bernoulli(0.8) {
                keys.insert(vec![v]);
            }
        }
        let overlap_count = rng.range_usize(n.max(2) / 2 + 1);
        for _ in 0..overlap_count {
            let size = 2 + rng.range_usize(2);
            let mut members: Vec<usize> = (0..size).map(|_| rng.range_usize(n)).collect();
            members.sort_unstable();
            members.dedup();
            if members.len() >= 2 {
                keys.insert(members);
            }
        }
        for members in keys {
            let evidence = members.iter().any(|&m| truth[m]);
            factors.push(factor(members, evidence));
        }
        FactorGraph::new(n, factors).unwrap()
    }

    #[test]
    fn loopy_tracks_exact_on_random_graphs() {
        let mut rng = Rng::new(314159);
        let config = InferenceConfig::default();
        for trial in 0..100 {
            let g = random_consistent_graph(&mut rng, 12);
            let exact = exact_posterior(&g, config.prior).unwrap();
            let r = infer_rates(&g, &config).unwrap();
            let tol = if g.is_tree() { 1e-6 } else { 0.02 };
            for (v, (m, e)) in r.marginals.iter().zip(&exact).enumerate() {
                assert!(
                    (m - e).abs() <= tol,
                    "trial {trial} var {v}: bp {m} vs exact {e} (tree: {})",
                    g.is_tree()
                );
            }
        }
    }

    #[test]
    fn min_rate_forms() {
        let classifiers = ClassifierSet::uniform(2);
        let rates = SamplingVector::new(vec![0.0, 0.4]).unwrap();

        let noop = MinRatePolicy::flat(MinRateForm::LowerBound, 0.0).unwrap();
        assert_eq!(
            apply_min_rate(&rates, &noop, &classifiers)
                .unwrap()
                .as_slice(),
            rates.as_slice()
        );

        let lower = MinRatePolicy::flat(MinRateForm::LowerBound, 0.1).unwrap();
        assert_eq!(
            apply_min_rate(&rates, &lower, &classifiers)
                .unwrap()
                .as_slice(),
            &[0.1, 0.4]
        );

        let prop = MinRatePolicy::flat(MinRateForm::Proportional, 0.5).unwrap();
        let out = apply_min_rate(&rates, &prop, &classifiers).unwrap();
        assert!((out.get(1) - 0.7).abs() < 1e-12);

        let add = MinRatePolicy::flat(MinRateForm::Additive, 0.8).unwrap();
        let out = apply_min_rate(&rates, &add, &classifiers).unwrap();
        assert_eq!(out.as_slice(), &[0.8, 1.0]);
    }

    #[test]
    fn min_rate_never_lowers() {
        let mut rng = Rng::new(7);
        let classifiers = ClassifierSet::uniform(5);
        for _ in 0..100 {
            let rates = SamplingVector::new((0..5).map(|_| rng.next_f64()).collect()).unwrap();
            let value = rng.next_f64();
            for form in [
                MinRateForm::LowerBound,
                MinRateForm::Additive,
                MinRateForm::Proportional,
            ] {
                let policy = MinRatePolicy::flat(form, value).unwrap();
                let out = apply_min_rate(&rates, &policy, &classifiers).unwrap();
                for j in 0..5 {
                    assert!(out.get(j) >= rates.get(j) - 1e-15);
                    assert!((0.0..=1.0).contains(&out.get(j)));
                }
            }
        }
    }
}

//! Overlap batching and the 0/1 enable/disable decision.
//!
//! Samples sharing one exact flagging set form a batch; selection assigns each
//! batch a boolean. Unconstrained budget-style objectives decompose per batch
//! and are solved by a closed-form rule; everything else goes through an exact
//! branch-and-bound up to a size limit, then a documented greedy.
//!
//! Objectives are evaluated on batch masses: at selection time the class
//! totals are constants, so the mass form and the rate form pick the same
//! assignments; the rate-based score used by [`SelectionObjective::F1Sr`]
//! normalizes by the problem totals.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{CostModel, Goals, ObservationDataset, SamplingVector};

/// Canonically sorted, nonempty set of flagging classifier indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BatchKey(Vec<usize>);

impl BatchKey {
    pub fn new(mut indices: Vec<usize>) -> Result<Self, SelectError> {
        if indices.is_empty() {
            return Err(SelectError::EmptyKey);
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(BatchKey(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn is_singleton(&self) -> bool {
        self.0.len() == 1
    }
}

/// One overlap group with its weighted class masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub key: BatchKey,
    /// Weighted count of malicious members.
    pub tp_mass: f64,
    /// Weighted count of benign members.
    pub fp_mass: f64,
    /// Raw number of member samples (multiplicity for graph construction).
    pub sample_count: usize,
    /// Enable/disable decision, once selection ran.
    pub decision: Option<bool>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("batch key must be nonempty")]
    EmptyKey,
    #[error("duplicate batch key {0:?}")]
    DuplicateKey(Vec<usize>),
    #[error("batch {index} has nonpositive total mass")]
    NonPositiveMass { index: usize },
    #[error("beta must be nonnegative and finite, got {0}")]
    BadBeta(f64),
    #[error("no assignment satisfies the goal constraints")]
    Infeasible,
    #[error("objective requires the branch-and-bound or greedy path")]
    NotSeparable,
    #[error("batch {index} carries no decision")]
    MissingDecision { index: usize },
    #[error("batch key {key:?} spans more than one classifier; rates are not 0/1-decidable")]
    OverlapPresent { key: Vec<usize> },
    #[error("prioritized objective requires at least one goal")]
    EmptyPriorityList,
}

/// Summary of the samples excluded from batching because nothing flagged them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnflaggedSummary {
    pub count: usize,
    pub tp_mass: f64,
    pub fp_mass: f64,
}

/// Result of [`partition_batches`].
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Batches in ascending key order.
    pub batches: Vec<Batch>,
    pub unflagged: UnflaggedSummary,
}

/// Group a dataset by exact flagging set.
///
/// Unflagged samples carry no decision variable and are reported separately.
/// Groups whose entire weight is zero are dropped: they contribute no mass to
/// any objective and would violate the positive-mass invariant.
pub fn partition_batches(dataset: &ObservationDataset) -> Partition {
    let mut groups: BTreeMap<Vec<usize>, (f64, f64, usize)> = BTreeMap::new();
    let mut unflagged = UnflaggedSummary::default();
    for s in &dataset.samples {
        if s.flags.is_empty() {
            unflagged.count += 1;
            if s.ground_truth {
                unflagged.tp_mass += s.weight;
            } else {
                unflagged.fp_mass += s.weight;
            }
            continue;
        }
        let entry = groups.entry(s.flags.clone()).or_insert((0.0, 0.0, 0));
        if s.ground_truth {
            entry.0 += s.weight;
        } else {
            entry.1 += s.weight;
        }
        entry.2 += 1;
    }
    let batches = groups
        .into_iter()
        .filter(|(_, (tp, fp, _))| tp + fp > 0.0)
        .map(|(key, (tp_mass, fp_mass, sample_count))| Batch {
            key: BatchKey(key),
            tp_mass,
            fp_mass,
            sample_count,
            decision: None,
        })
        .collect();
    Partition { batches, unflagged }
}

/// Lexicographic goals for [`SelectionObjective::Prioritized`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorityGoal {
    /// Maximize the enabled true-positive mass.
    TruePositives,
    /// Minimize the enabled false-positive mass.
    FalsePositives,
}

/// What the 0/1 assignment optimizes.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionObjective {
    /// Minimize enabled FP mass plus `beta` times disabled TP mass.
    Budget { beta: f64 },
    /// Minimize cost_fp * enabled FP mass + cost_fn * disabled TP mass.
    Expenses { cost_model: CostModel },
    /// Maximize 2*TP*FP/(TP+FP) over the rates induced by the assignment.
    F1Sr,
    /// Optimize the listed goals in order; later goals break ties.
    Prioritized { order: Vec<PriorityGoal> },
}

/// How an assignment was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    SeparableRule,
    BranchAndBound,
    Greedy,
}

/// Strategy override, mostly for tests and benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStrategy {
    /// Separable rule when admissible, branch-and-bound up to the size limit,
    /// greedy beyond it.
    Auto,
    Separable,
    BranchAndBound,
    Greedy,
}

/// A selection instance: batches, objective, optional goal constraints.
#[derive(Debug, Clone)]
pub struct SelectionProblem {
    batches: Vec<Batch>,
    objective: SelectionObjective,
    constraints: Option<Goals>,
    total_tp: f64,
    total_fp: f64,
    /// Above this many batches, `Auto` switches from exact search to greedy.
    pub max_exact_batches: usize,
}

/// Solved assignment. `objective_value` is always the canonical evaluation of
/// `decisions`, whichever method produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub decisions: Vec<bool>,
    pub objective_value: f64,
    pub method: SolveMethod,
    /// False when the greedy fallback produced the assignment.
    pub exact: bool,
}

const DEFAULT_MAX_EXACT_BATCHES: usize = 40;
/// Slack added to branch-and-bound pruning so float rounding in the bound can
/// never cut off the true optimum.
const BOUND_SLACK: f64 = 1e-9;

impl SelectionProblem {
    pub fn new(
        batches: Vec<Batch>,
        objective: SelectionObjective,
        constraints: Option<Goals>,
    ) -> Result<Self, SelectError> {
        let mut seen = std::collections::BTreeSet::new();
        let mut total_tp = 0.0;
        let mut total_fp = 0.0;
        for (index, b) in batches.iter().enumerate() {
            if !seen.insert(b.key.clone()) {
                return Err(SelectError::DuplicateKey(b.key.0.clone()));
            }
            if !(b.tp_mass >= 0.0 && b.fp_mass >= 0.0 && b.tp_mass + b.fp_mass > 0.0) {
                return Err(SelectError::NonPositiveMass { index });
            }
            total_tp += b.tp_mass;
            total_fp += b.fp_mass;
        }
        match &objective {
            SelectionObjective::Budget { beta } if !beta.is_finite() || *beta < 0.0 => {
                return Err(SelectError::BadBeta(*beta));
            }
            SelectionObjective::Prioritized { order } if order.is_empty() => {
                return Err(SelectError::EmptyPriorityList);
            }
            _ => {}
        }
        Ok(SelectionProblem {
            batches,
            objective,
            constraints,
            total_tp,
            total_fp,
            max_exact_batches: DEFAULT_MAX_EXACT_BATCHES,
        })
    }

    pub fn batches(&self) -> &[Batch] {
        &self.batches
    }

    /// Canonical objective for an assignment; lower is better for every
    /// objective (maximized scores are negated).
    pub fn objective_value(&self, decisions: &[bool]) -> f64 {
        assert_eq!(decisions.len(), self.batches.len());
        match &self.objective {
            SelectionObjective::Budget { beta } => self.weighted_error_mass(decisions, 1.0, *beta),
            SelectionObjective::Expenses { cost_model } => {
                self.weighted_error_mass(decisions, cost_model.cost_fp, cost_model.cost_fn)
            }
            SelectionObjective::F1Sr => {
                let (tp_rate, fp_rate) = self.enabled_rates(decisions);
                if tp_rate + fp_rate == 0.0 {
                    0.0
                } else {
                    -(2.0 * tp_rate * fp_rate / (tp_rate + fp_rate))
                }
            }
            SelectionObjective::Prioritized { order } => {
                // Scalar view: the first goal only. Full comparisons use
                // `objective_tuple`.
                self.priority_component(decisions, order[0])
            }
        }
    }

    /// Lexicographic objective vector (all components minimized).
    pub fn objective_tuple(&self, decisions: &[bool]) -> Vec<f64> {
        match &self.objective {
            SelectionObjective::Prioritized { order } => order
                .iter()
                .map(|&g| self.priority_component(decisions, g))
                .collect(),
            _ => vec![self.objective_value(decisions)],
        }
    }

    fn priority_component(&self, decisions: &[bool], goal: PriorityGoal) -> f64 {
        let mut enabled_tp = 0.0;
        let mut enabled_fp = 0.0;
        for (b, &on) in self.batches.iter().zip(decisions) {
            if on {
                enabled_tp += b.tp_mass;
                enabled_fp += b.fp_mass;
            }
        }
        match goal {
            PriorityGoal::TruePositives => -enabled_tp,
            PriorityGoal::FalsePositives => enabled_fp,
        }
    }

    fn weighted_error_mass(&self, decisions: &[bool], w_fp: f64, w_tp: f64) -> f64 {
        let mut obj = 0.0;
        for (b, &on) in self.batches.iter().zip(decisions) {
            if on {
                obj += w_fp * b.fp_mass;
            } else {
                obj += w_tp * b.tp_mass;
            }
        }
        obj
    }

    fn enabled_rates(&self, decisions: &[bool]) -> (f64, f64) {
        let mut tp = 0.0;
        let mut fp = 0.0;
        for (b, &on) in self.batches.iter().zip(decisions) {
            if on {
                tp += b.tp_mass;
                fp += b.fp_mass;
            }
        }
        let tp_rate = if self.total_tp > 0.0 {
            tp / self.total_tp
        } else {
            1.0
        };
        let fp_rate = if self.total_fp > 0.0 {
            fp / self.total_fp
        } else {
            0.0
        };
        (tp_rate, fp_rate)
    }

    /// Goal feasibility of a complete assignment. The scan-cost goal does not
    /// apply at batch granularity (there are no per-classifier costs here) and
    /// is ignored; a rate whose class total is zero is vacuously satisfied.
    pub fn satisfies_constraints(&self, decisions: &[bool]) -> bool {
        let Some(goals) = &self.constraints else {
            return true;
        };
        let (tp_rate, fp_rate) = self.enabled_rates(decisions);
        if let Some(tp_min) = goals.tp_min {
            if self.total_tp > 0.0 && tp_rate < tp_min {
                return false;
            }
        }
        if let Some(fn_max) = goals.fn_max {
            if self.total_tp > 0.0 && (1.0 - tp_rate) > fn_max {
                return false;
            }
        }
        if let Some(fp_max) = goals.fp_max {
            if self.total_fp > 0.0 && fp_rate > fp_max {
                return false;
            }
        }
        if let Some(tn_min) = goals.tn_min {
            if self.total_fp > 0.0 && (1.0 - fp_rate) < tn_min {
                return false;
            }
        }
        true
    }

    fn separable_weights(&self) -> Option<(f64, f64)> {
        match &self.objective {
            SelectionObjective::Budget { beta } => Some((1.0, *beta)),
            SelectionObjective::Expenses { cost_model } => {
                Some((cost_model.cost_fp, cost_model.cost_fn))
            }
            _ => None,
        }
    }

    /// Route to the right solver for this instance.
    pub fn solve(&self) -> Result<Selection, SelectError> {
        self.solve_with(SolveStrategy::Auto)
    }

    pub fn solve_with(&self, strategy: SolveStrategy) -> Result<Selection, SelectError> {
        match strategy {
            SolveStrategy::Separable => self.solve_separable(),
            SolveStrategy::BranchAndBound => self.solve_branch_and_bound(),
            SolveStrategy::Greedy => self.solve_greedy(),
            SolveStrategy::Auto => {
                let unconstrained = self
                    .constraints
                    .as_ref()
                    .is_none_or(|g| g.is_unconstrained());
                if unconstrained && self.separable_weights().is_some() {
                    self.solve_separable()
                } else if self.batches.len() <= self.max_exact_batches {
                    self.solve_branch_and_bound()
                } else {
                    self.solve_greedy()
                }
            }
        }
    }

    /// Per-batch closed form for unconstrained budget-style objectives:
    /// enable batch i iff w_fp * fp_i <= w_tp * tp_i (ties enable).
    pub fn solve_separable(&self) -> Result<Selection, SelectError> {
        let (w_fp, w_tp) = self.separable_weights().ok_or(SelectError::NotSeparable)?;
        if self
            .constraints
            .as_ref()
            .is_some_and(|g| !g.is_unconstrained())
        {
            return Err(SelectError::NotSeparable);
        }
        let decisions: Vec<bool> = self
            .batches
            .iter()
            .map(|b| w_fp * b.fp_mass <= w_tp * b.tp_mass)
            .collect();
        let objective_value = self.objective_value(&decisions);
        Ok(Selection {
            decisions,
            objective_value,
            method: SolveMethod::SeparableRule,
            exact: true,
        })
    }

    /// Exact depth-first search, enable-first, pruned by a fractional-relaxation
    /// lower bound and by goal reachability intervals.
    pub fn solve_branch_and_bound(&self) -> Result<Selection, SelectError> {
        let n = self.batches.len();
        let suffix_tp: Vec<f64> = {
            // suffix_tp[i] = sum of tp over batches i..
            let mut v = vec![0.0; n + 1];
            for i in (0..n).rev() {
                v[i] = v[i + 1] + self.batches[i].tp_mass;
            }
            v
        };
        let suffix_fp: Vec<f64> = {
            let mut v = vec![0.0; n + 1];
            for i in (0..n).rev() {
                v[i] = v[i + 1] + self.batches[i].fp_mass;
            }
            v
        };
        // Per-batch optimistic contribution for the scalar bound.
        let bound_terms: Vec<f64> = match &self.objective {
            SelectionObjective::Budget { .. } | SelectionObjective::Expenses { .. } => {
                let (w_fp, w_tp) = self.separable_weights().expect("budget-style");
                self.batches
                    .iter()
                    .map(|b| (w_fp * b.fp_mass).min(w_tp * b.tp_mass))
                    .collect()
            }
            _ => vec![0.0; n],
        };
        let suffix_bound: Vec<f64> = {
            let mut v = vec![0.0; n + 1];
            for i in (0..n).rev() {
                v[i] = v[i + 1] + bound_terms[i];
            }
            v
        };

        struct Search<'a> {
            problem: &'a SelectionProblem,
            suffix_tp: Vec<f64>,
            suffix_fp: Vec<f64>,
            suffix_bound: Vec<f64>,
            current: Vec<bool>,
            best: Option<(Vec<f64>, Vec<bool>)>,
        }

        impl Search<'_> {
            /// Optimistic (lower) bound on the scalar objective for any
            /// completion of the first `depth` decisions.
            fn scalar_bound(
                &self,
                depth: usize,
                enabled_tp: f64,
                enabled_fp: f64,
                partial: f64,
            ) -> f64 {
                match &self.problem.objective {
                    SelectionObjective::Budget { .. } | SelectionObjective::Expenses { .. } => {
                        partial + self.suffix_bound[depth]
                    }
                    SelectionObjective::F1Sr => {
                        // Score is monotone in both rates; enabling everything
                        // left maximizes it.
                        let tp_up = enabled_tp + self.suffix_tp[depth];
                        let fp_up = enabled_fp + self.suffix_fp[depth];
                        let tp_rate = if self.problem.total_tp > 0.0 {
                            tp_up / self.problem.total_tp
                        } else {
                            1.0
                        };
                        let fp_rate = if self.problem.total_fp > 0.0 {
                            fp_up / self.problem.total_fp
                        } else {
                            0.0
                        };
                        if tp_rate + fp_rate == 0.0 {
                            0.0
                        } else {
                            -(2.0 * tp_rate * fp_rate / (tp_rate + fp_rate))
                        }
                    }
                    SelectionObjective::Prioritized { order } => match order[0] {
                        PriorityGoal::TruePositives => -(enabled_tp + self.suffix_tp[depth]),
                        PriorityGoal::FalsePositives => enabled_fp,
                    },
                }
            }

            /// Can any completion still satisfy the goals?
            fn feasible_reachable(&self, depth: usize, enabled_tp: f64, enabled_fp: f64) -> bool {
                let Some(goals) = &self.problem.constraints else {
                    return true;
                };
                let total_tp = self.problem.total_tp;
                let total_fp = self.problem.total_fp;
                let max_tp = enabled_tp + self.suffix_tp[depth];
                let min_fp = enabled_fp;
                if let Some(tp_min) = goals.tp_min {
                    if total_tp > 0.0 && max_tp / total_tp < tp_min {
                        return false;
                    }
                }
                if let Some(fn_max) = goals.fn_max {
                    if total_tp > 0.0 && 1.0 - max_tp / total_tp > fn_max {
                        return false;
                    }
                }
                if let Some(fp_max) = goals.fp_max {
                    if total_fp > 0.0 && min_fp / total_fp > fp_max {
                        return false;
                    }
                }
                if let Some(tn_min) = goals.tn_min {
                    if total_fp > 0.0 && 1.0 - min_fp / total_fp < tn_min {
                        return false;
                    }
                }
                true
            }

            fn recurse(&mut self, depth: usize, enabled_tp: f64, enabled_fp: f64, partial: f64) {
                if !self.feasible_reachable(depth, enabled_tp, enabled_fp) {
                    return;
                }
                if depth == self.problem.batches.len() {
                    if !self.problem.satisfies_constraints(&self.current) {
                        return;
                    }
                    let tuple = self.problem.objective_tuple(&self.current);
                    let better = match &self.best {
                        None => true,
                        Some((best_tuple, _)) => lex_less(&tuple, best_tuple),
                    };
                    if better {
                        self.best = Some((tuple, self.current.clone()));
                    }
                    return;
                }
                if let Some((best_tuple, _)) = &self.best {
                    let bound = self.scalar_bound(depth, enabled_tp, enabled_fp, partial);
                    if bound > best_tuple[0] + BOUND_SLACK {
                        return;
                    }
                }
                let b = &self.problem.batches[depth];
                let (w_fp, w_tp) = match &self.problem.objective {
                    SelectionObjective::Budget { beta } => (1.0, *beta),
                    SelectionObjective::Expenses { cost_model } => {
                        (cost_model.cost_fp, cost_model.cost_fn)
                    }
                    _ => (0.0, 0.0),
                };
                // Enable-first keeps the declared tie-break: on equal objective
                // values the assignment found first (more enabled) is kept.
                self.current[depth] = true;
                self.recurse(
                    depth + 1,
                    enabled_tp + b.tp_mass,
                    enabled_fp + b.fp_mass,
                    partial + w_fp * b.fp_mass,
                );
                self.current[depth] = false;
                self.recurse(
                    depth + 1,
                    enabled_tp,
                    enabled_fp,
                    partial + w_tp * b.tp_mass,
                );
                self.current[depth] = true;
            }
        }

        let mut search = Search {
            problem: self,
            suffix_tp,
            suffix_fp,
            suffix_bound,
            current: vec![true; n],
            best: None,
        };
        search.recurse(0, 0.0, 0.0, 0.0);
        let Some((_, decisions)) = search.best else {
            return Err(SelectError::Infeasible);
        };
        let objective_value = self.objective_value(&decisions);
        Ok(Selection {
            decisions,
            objective_value,
            method: SolveMethod::BranchAndBound,
            exact: true,
        })
    }

    /// Greedy fallback for oversized instances: seed from the budget rule (or
    /// all-enabled for score objectives), repair constraints by flipping the
    /// cheapest batches, then run 1-flip local improvement to a fixed point.
    pub fn solve_greedy(&self) -> Result<Selection, SelectError> {
        let n = self.batches.len();
        let mut decisions: Vec<bool> = match self.separable_weights() {
            Some((w_fp, w_tp)) => self
                .batches
                .iter()
                .map(|b| w_fp * b.fp_mass <= w_tp * b.tp_mass)
                .collect(),
            None => vec![true; n],
        };

        if !self.satisfies_constraints(&decisions) {
            // Repair order: cost-effectiveness, most TP per FP first.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                let sa = self.batches[a].tp_mass - self.batches[a].fp_mass;
                let sb = self.batches[b].tp_mass - self.batches[b].fp_mass;
                sb.partial_cmp(&sa).unwrap_or(std::cmp::Ordering::Equal)
            });
            // Enable in descending order until TP-side goals hold.
            for &i in &order {
                if self.satisfies_constraints(&decisions) {
                    break;
                }
                decisions[i] = true;
            }
            // Disable in ascending order until FP-side goals hold.
            for &i in order.iter().rev() {
                if self.satisfies_constraints(&decisions) {
                    break;
                }
                decisions[i] = false;
            }
            if !self.satisfies_constraints(&decisions) {
                return Err(SelectError::Infeasible);
            }
        }

        // 1-flip local improvement on the lexicographic objective.
        let mut best_tuple = self.objective_tuple(&decisions);
        loop {
            let mut improved = false;
            for i in 0..n {
                decisions[i] = !decisions[i];
                if self.satisfies_constraints(&decisions) {
                    let tuple = self.objective_tuple(&decisions);
                    if lex_less(&tuple, &best_tuple) {
                        best_tuple = tuple;
                        improved = true;
                        continue;
                    }
                }
                decisions[i] = !decisions[i];
            }
            if !improved {
                break;
            }
        }

        let objective_value = self.objective_value(&decisions);
        Ok(Selection {
            decisions,
            objective_value,
            method: SolveMethod::Greedy,
            exact: false,
        })
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Attach a selection's decisions back onto the batches.
pub fn apply_decisions(batches: &[Batch], selection: &Selection) -> Vec<Batch> {
    batches
        .iter()
        .zip(&selection.decisions)
        .map(|(b, &d)| {
            let mut b = b.clone();
            b.decision = Some(d);
            b
        })
        .collect()
}

/// Translate singleton-batch decisions directly into 0/1 sampling rates.
///
/// Classifiers with no batch have no evidence either way and default to fully
/// enabled, matching how newly introduced classifiers are treated.
pub fn decisions_to_rates_no_overlap(
    batches: &[Batch],
    classifier_count: usize,
) -> Result<SamplingVector, SelectError> {
    let mut rates = vec![1.0; classifier_count];
    for (index, b) in batches.iter().enumerate() {
        if !b.key.is_singleton() {
            return Err(SelectError::OverlapPresent {
                key: b.key.0.clone(),
            });
        }
        let decision = b.decision.ok_or(SelectError::MissingDecision { index })?;
        rates[b.key.0[0]] = if decision { 1.0 } else { 0.0 };
    }
    Ok(SamplingVector::new(rates).expect("0/1 rates are valid"))
}

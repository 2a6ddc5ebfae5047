//! Quick built-in oracle checks, a subset of the full acceptance suite that
//! runs in a couple of seconds. Each section re-derives expected values from
//! first principles (enumeration, brute-force posteriors, direct Bernoulli
//! trials) rather than trusting the code under test.

use anyhow::{bail, Result};

use sigtune::batch::{Batch, BatchKey, SelectionObjective, SelectionProblem};
use sigtune::inference::{exact_posterior, infer_rates, Factor, FactorGraph, InferenceConfig};
use sigtune::metrics::{confusion_rates, Normalization};
use sigtune::model::{Observation, ObservationDataset, SamplingVector};
use sigtune::rng::Rng;

pub fn run() -> Result<()> {
    selection_oracle()?;
    inference_oracle()?;
    rate_formula_oracle()?;
    println!("selftest: all checks passed");
    Ok(())
}

fn selection_oracle() -> Result<()> {
    let mut rng = Rng::new(17);
    for trial in 0..50 {
        let n = 1 + rng.range_usize(12);
        let batches: Vec<Batch> = (0..n)
            .map(|i| Batch {
                key: BatchKey::new(vec![i]).unwrap(),
                tp_mass: (rng.next_f64() * 100.0).round().max(1.0),
                fp_mass: (rng.next_f64() * 100.0).round(),
                sample_count: 1,
                decision: None,
            })
            .collect();
        let beta = [0.0, 0.5, 1.0, 2.0][trial % 4];
        let problem =
            SelectionProblem::new(batches, SelectionObjective::Budget { beta }, None).unwrap();
        let got = problem.solve().map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut best = f64::INFINITY;
        for mask in 0..(1u32 << n) {
            let decisions: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
            best = best.min(problem.objective_value(&decisions));
        }
        if got.objective_value != best {
            bail!(
                "selection trial {trial}: {} vs enumerated {best}",
                got.objective_value
            );
        }
    }
    println!("selftest: selection matches enumeration on 50 instances ... ok");
    Ok(())
}

fn inference_oracle() -> Result<()> {
    // Worked example: three classifiers, five samples.
    let graph = |evidence: [bool; 5]| {
        let members: [&[usize]; 5] = [&[0], &[0, 1], &[1], &[1, 2], &[2]];
        FactorGraph::new(
            3,
            members
                .iter()
                .zip(evidence)
                .map(|(m, evidence)| Factor {
                    members: m.to_vec(),
                    evidence,
                    repeat: 1,
                })
                .collect(),
        )
        .unwrap()
    };
    let config = InferenceConfig::default();
    let all_true = infer_rates(&graph([true; 5]), &config)?;
    if all_true.marginals.iter().any(|m| (m - 1.0).abs() > 1e-6) {
        bail!("all-true evidence: {:?}", all_true.marginals);
    }
    let conflicted = infer_rates(&graph([true, true, true, false, true]), &config)?;
    let expect = [1.0, 0.5, 0.5];
    for (m, e) in conflicted.marginals.iter().zip(expect) {
        if (m - e).abs() > 0.05 {
            bail!("conflicted evidence: {:?}", conflicted.marginals);
        }
    }

    let mut rng = Rng::new(23);
    for trial in 0..20 {
        let n = 2 + rng.range_usize(9);
        let truth: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
        let mut keys = std::collections::BTreeSet::new();
        for v in 0..n {
            if rng.bernoulli(0.8) {
                keys.insert(vec![v]);
            }
        }
        for _ in 0..rng.range_usize(n / 2 + 1) {
            let mut members: Vec<usize> = (0..2 + rng.range_usize(2))
                .map(|_| rng.range_usize(n))
                .collect();
            members.sort_unstable();
            members.dedup();
            if members.len() >= 2 {
                keys.insert(members);
            }
        }
        let g = FactorGraph::new(
            n,
            keys.into_iter()
                .map(|members| Factor {
                    evidence: members.iter().any(|&m| truth[m]),
                    members,
                    repeat: 1,
                })
                .collect(),
        )
        .unwrap();
        let exact = exact_posterior(&g, config.prior)?;
        let loopy = infer_rates(&g, &config)?;
        for (v, (m, e)) in loopy.marginals.iter().zip(&exact).enumerate() {
            if (m - e).abs() > 0.02 {
                bail!("inference trial {trial} var {v}: {m} vs exact {e}");
            }
        }
    }
    println!("selftest: inference matches brute-force posteriors ... ok");
    Ok(())
}

fn rate_formula_oracle() -> Result<()> {
    let trials = 100_000u64;
    let mut rng = Rng::new(31);
    for case in 0..5 {
        let rates_vec: Vec<f64> = (0..4).map(|_| rng.next_f64()).collect();
        let mut samples = Vec::new();
        for i in 0..30 {
            let malicious = i % 2 == 0;
            let flags: Vec<usize> = (0..1 + rng.range_usize(3))
                .map(|_| rng.range_usize(4))
                .collect();
            samples.push(Observation::new(malicious, flags, 1.0, 0));
        }
        let dataset = ObservationDataset::new(samples.clone());
        let rates = SamplingVector::new(rates_vec.clone()).unwrap();
        let c = confusion_rates(&dataset, &rates, Normalization::Conventional)
            .map_err(|e| anyhow::anyhow!("{e}"))?;

        let mut mc = Rng::new(400 + case);
        let mut caught_pos = 0u64;
        let mut caught_neg = 0u64;
        let (pos, neg) = (15u64, 15u64);
        for _ in 0..trials {
            for s in &samples {
                if s.flags.iter().any(|&j| mc.bernoulli(rates_vec[j])) {
                    if s.ground_truth {
                        caught_pos += 1;
                    } else {
                        caught_neg += 1;
                    }
                }
            }
        }
        let mc_tp = caught_pos as f64 / (pos * trials) as f64;
        let mc_fp = caught_neg as f64 / (neg * trials) as f64;
        // Generous 5-sigma-ish band for a quick smoke check.
        let tol = 5.0 * (0.25 / (pos * trials) as f64).sqrt();
        if (c.true_pos - mc_tp).abs() > tol || (c.false_pos - mc_fp).abs() > tol {
            bail!(
                "rate formulas case {case}: TP {} vs {mc_tp}, FP {} vs {mc_fp}",
                c.true_pos,
                c.false_pos
            );
        }
    }
    println!("selftest: confusion rates match Bernoulli trials ... ok");
    Ok(())
}

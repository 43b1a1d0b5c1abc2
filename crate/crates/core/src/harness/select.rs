use serde::{Deserialize, Serialize};

use crate::entropify::EntropifiedModel;
use crate::error::{Error, Result};
use crate::estimators::{block_comp_exact, erm, erm_within, two_part_mdl, PriorOverClass};
use crate::measure::{exact_expectation, exact_fold, ComputeConfig, ProductMeasure};
use crate::problem::LearningProblem;
use crate::report::{Relation, VerificationResult, WorstCase};
use crate::shtarkov::{Estimator, GeneralizedComplexity, Luckiness, Partition, CHECK_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectRow {
    pub n: usize,
    pub estimator: String,
    pub mean_excess_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    /// Block achieving the smallest excess risk, ties to the larger prior mass.
    pub kstar: usize,
    pub eta: f64,
    pub rows: Vec<SelectRow>,
    /// comp_full(F, two-part, W, z^n) ≤ −ln π_K(k*)/η + comp(F_{k*}, ERM) at every
    /// sample and every n.
    pub bound: VerificationResult,
    /// Mean excess risk of two-part MDL ≤ that of ERM on F_{k*} plus
    /// −ln π_K(k*)/(ηn), at every n.
    pub overhead: VerificationResult,
}

pub fn best_block(problem: &LearningProblem, partition: &Partition, pi_k: &PriorOverClass) -> Result<usize> {
    let mut mins = Vec::with_capacity(partition.num_blocks());
    for block in partition.blocks() {
        let mut m = f64::INFINITY;
        for &f in block {
            m = m.min(problem.excess_risk(f)?);
        }
        mins.push(m);
    }
    let best = mins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((0..mins.len())
        .filter(|&k| mins[k] <= best + 1e-15)
        .fold(None, |acc: Option<usize>, k| match acc {
            Some(a) if pi_k.masses()[a] >= pi_k.masses()[k] => Some(a),
            _ => Some(k),
        })
        .expect("at least one block"))
}

fn mean_excess(problem: &LearningProblem, est: &Estimator, cfg: &ComputeConfig) -> Result<f64> {
    let risks: Vec<f64> = (0..problem.num_predictors()).map(|f| problem.excess_risk(f)).collect::<Result<_>>()?;
    let measure = ProductMeasure::of_problem(problem);
    exact_expectation(&measure, cfg, |s| est.support(s).iter().map(|(f, m)| m * risks[*f]).sum())
}

/// Two-part MDL against ERM on the whole class and ERM on the best block, at
/// a fixed η and each n. Block complexities are computed exactly unless
/// `comp_bounds` supplies upper bounds.
pub fn model_select_experiment(
    problem: &LearningProblem,
    partition: &Partition,
    pi_k: &PriorOverClass,
    eta: f64,
    ns: &[usize],
    comp_bounds: Option<&[f64]>,
    cfg: &ComputeConfig,
) -> Result<SelectReport> {
    partition.check_size(problem.num_predictors())?;
    if pi_k.len() != partition.num_blocks() {
        return Err(Error::BadPartition(format!("{} block-prior masses for {} blocks", pi_k.len(), partition.num_blocks())));
    }
    if ns.is_empty() {
        return Err(Error::EmptyGrid("sample sizes"));
    }
    if comp_bounds.is_some_and(|b| b.len() != partition.num_blocks()) {
        return Err(Error::BadPartition("one complexity bound per block required".into()));
    }
    let kstar = best_block(problem, partition, pi_k)?;
    let overhead_nats = -pi_k.masses()[kstar].ln() / eta;
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut overheads = Vec::new();
    for &n in ns {
        let at = problem.with_n(n)?.with_eta(eta)?;
        let model = EntropifiedModel::new(&at);
        let comps = match comp_bounds {
            Some(b) => b.to_vec(),
            None => block_comp_exact(&model, partition, cfg)?,
        };
        let two_part = two_part_mdl(&at, partition, pi_k, &comps, eta)?;
        let erm_full = erm(&at);
        let erm_star = erm_within(&at, partition.block(kstar));

        let tp = mean_excess(&at, &two_part, cfg)?;
        let full = mean_excess(&at, &erm_full, cfg)?;
        let star = mean_excess(&at, &erm_star, cfg)?;
        for (name, v) in [("two-part-mdl", tp), ("erm-full", full), ("erm-kstar", star)] {
            rows.push(SelectRow { n, estimator: name.into(), mean_excess_risk: v });
        }
        overheads.push(VerificationResult::leq(
            format!("mdl-overhead n={n}"),
            tp,
            star + overhead_nats / n as f64,
            CHECK_TOL,
        ));

        let sub_w = vec![Luckiness::one(); partition.num_blocks()];
        let w = Luckiness::composite(partition.clone(), pi_k.masses().to_vec(), two_part.clone(), sub_w)?;
        let gc = GeneralizedComplexity::compute(&model, &two_part, &w, cfg)?;
        let rhs = overhead_nats + comps[kstar];
        let measure = ProductMeasure::of_problem(&at);
        let worst = exact_fold(
            &measure,
            cfg,
            false,
            || WorstCase::new(Relation::LessEq),
            |acc, s| acc.push(gc.comp_full(s.outcomes), rhs, s.index),
            |a, b| a.merge(b),
        )?;
        bounds.push(worst.finish(format!("two-part-bound n={n}"), CHECK_TOL));
    }
    Ok(SelectReport {
        kstar,
        eta,
        rows,
        bound: VerificationResult::all("two-part-bound", &bounds),
        overhead: VerificationResult::all("mdl-overhead", &overheads),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{generate, Family, GeneratorSpec};

    #[test]
    fn single_block_all_coincide() {
        let g = generate(&GeneratorSpec::new(Family::NestedBlocks { outcomes: 3, block_sizes: vec![4], best_block: 0 }, 8))
            .unwrap();
        let part = g.partition.unwrap();
        let r = model_select_experiment(&g.problem, &part, &PriorOverClass::uniform(1), 1.0, &[1, 2, 3], None, &ComputeConfig::default())
            .unwrap();
        for chunk in r.rows.chunks(3) {
            assert!((chunk[0].mean_excess_risk - chunk[1].mean_excess_risk).abs() < 1e-15);
            assert!((chunk[0].mean_excess_risk - chunk[2].mean_excess_risk).abs() < 1e-15);
        }
        assert!(r.bound.passed() && r.overhead.passed());
    }

    #[test]
    fn small_best_block_inside_large_class() {
        let g = generate(&GeneratorSpec::new(
            Family::NestedBlocks { outcomes: 3, block_sizes: vec![1, 8], best_block: 0 },
            21,
        ))
        .unwrap();
        let part = g.partition.unwrap();
        let pi = PriorOverClass::new(vec![0.5, 0.5]).unwrap();
        let r = model_select_experiment(&g.problem, &part, &pi, 1.0, &[1, 2, 3, 4], None, &ComputeConfig::default()).unwrap();
        assert_eq!(r.kstar, 0);
        assert!(r.bound.passed(), "{:?}", r.bound);
    }

    #[test]
    fn dirac_prior_off_best_block() {
        let g = generate(&GeneratorSpec::new(
            Family::NestedBlocks { outcomes: 3, block_sizes: vec![2, 3], best_block: 0 },
            5,
        ))
        .unwrap();
        let part = g.partition.unwrap();
        let pi = PriorOverClass::new(vec![0.0, 1.0]).unwrap();
        let r = model_select_experiment(&g.problem, &part, &pi, 1.0, &[2, 3], None, &ComputeConfig::default()).unwrap();
        // Constrained to block 1: its risk can be no smaller than block 1's best predictor.
        let floor = part.block(1).iter().map(|&f| g.problem.excess_risk(f).unwrap()).fold(f64::INFINITY, f64::min);
        for row in r.rows.iter().filter(|r| r.estimator == "two-part-mdl") {
            assert!(row.mean_excess_risk >= floor - 1e-15);
        }
        assert!(floor > 0.0);
    }
}

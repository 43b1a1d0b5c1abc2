//! ERM, penalized ERM, generalized Bayes, information complexity and
//! two-part MDL over a finite class.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::entropify::EntropifiedModel;
use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;
use crate::measure::{ComputeConfig, McConfig, ProductMeasure};
use crate::problem::LearningProblem;
use crate::shtarkov::{shtarkov_simple, validate_prior, Estimator, EstimatorKind, Partition};

/// A data-independent distribution over predictors (or over blocks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriorOverClass {
    masses: Vec<f64>,
}

impl PriorOverClass {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        validate_prior(&masses, masses.len(), "prior")?;
        Ok(Self { masses })
    }

    pub fn uniform(m: usize) -> Self {
        Self { masses: vec![1.0 / m as f64; m] }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

/// Γ: F → ℝ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFunction {
    pub gamma: Vec<f64>,
}

impl PenaltyFunction {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidConfig("penalty values must be finite".into()));
        }
        Ok(Self { gamma })
    }

    pub fn zero(m: usize) -> Self {
        Self { gamma: vec![0.0; m] }
    }
}

fn loss_table(problem: &LearningProblem) -> Arc<Vec<Vec<f64>>> {
    Arc::new(problem.class().losses().to_vec())
}

fn cumulative(row: &[f64], sample: &[usize]) -> f64 {
    sample.iter().map(|&z| row[z]).sum()
}

/// argmin over `subset` of `score`, ties to the lowest predictor index.
fn argmin_by(subset: &[usize], mut score: impl FnMut(usize) -> f64) -> usize {
    let mut best = (usize::MAX, f64::INFINITY);
    for &f in subset {
        let s = score(f);
        if s < best.1 || (s == best.1 && f < best.0) || best.0 == usize::MAX {
            best = (f, s);
        }
    }
    best.0
}

/// z^n ↦ argmin_f Σ_i ℓ_f(z_i).
pub fn erm(problem: &LearningProblem) -> Estimator {
    let all: Vec<usize> = (0..problem.num_predictors()).collect();
    erm_within(problem, &all)
}

/// ERM restricted to `subset`.
pub fn erm_within(problem: &LearningProblem, subset: &[usize]) -> Estimator {
    let losses = loss_table(problem);
    let subset = subset.to_vec();
    Estimator::deterministic(EstimatorKind::Erm, problem.num_predictors(), move |sample| {
        argmin_by(&subset, |f| cumulative(&losses[f], sample))
    })
}

/// z^n ↦ argmin_f [Σ_i ℓ_f(z_i) + Γ(f)/η].
pub fn penalized_erm(problem: &LearningProblem, gamma: &PenaltyFunction, eta: f64) -> Result<Estimator> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidConfig(format!("eta = {eta} must be positive")));
    }
    if gamma.gamma.len() != problem.num_predictors() {
        return Err(Error::InvalidConfig("penalty length differs from class size".into()));
    }
    let losses = loss_table(problem);
    let gamma = gamma.gamma.clone();
    let all: Vec<usize> = (0..problem.num_predictors()).collect();
    Ok(Estimator::deterministic(EstimatorKind::PenalizedErm { eta }, problem.num_predictors(), move |sample| {
        argmin_by(&all, |f| cumulative(&losses[f], sample) + gamma[f] / eta)
    }))
}

/// Posterior masses π̂(f | z^n) ∝ exp(−η Σ_i ℓ_f(z_i)) π(f).
pub fn gibbs_masses(losses: &[Vec<f64>], prior: &[f64], eta: f64, sample: &[usize]) -> Vec<f64> {
    let logw: Vec<f64> = losses
        .iter()
        .zip(prior)
        .map(|(row, &p)| if p > 0.0 { p.ln() - eta * cumulative(row, sample) } else { f64::NEG_INFINITY })
        .collect();
    let z = log_sum_exp(&logw);
    logw.into_iter().map(|l| (l - z).exp()).collect()
}

pub fn generalized_bayes(problem: &LearningProblem, prior: &PriorOverClass, eta: f64) -> Result<Estimator> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidConfig(format!("eta = {eta} must be positive")));
    }
    if prior.len() != problem.num_predictors() {
        return Err(Error::DegeneratePrior(format!(
            "prior has {} masses for {} predictors",
            prior.len(),
            problem.num_predictors()
        )));
    }
    let losses = loss_table(problem);
    let masses = prior.masses.clone();
    let kind = EstimatorKind::GeneralizedBayes { eta, prior: masses.clone() };
    Ok(Estimator::randomized(kind, problem.num_predictors(), move |sample| {
        gibbs_masses(&losses, &masses, eta, sample)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationComplexity {
    /// E_{f ~ Π̂|z^n}[R_f(z^n)].
    pub expected_excess: f64,
    /// KL(Π̂|z^n ‖ Π).
    pub kl: f64,
    /// expected_excess + kl/η.
    pub value: f64,
    /// −(1/η) ln E_Π[e^{−ηR_f(z^n)}], present when the estimator is the
    /// generalized Bayes posterior for the same prior and η.
    pub extended_stochastic_complexity: Option<f64>,
}

/// −(1/η) ln E_{f ~ Π}[e^{−ηR_f(z^n)}].
pub fn extended_stochastic_complexity(problem: &LearningProblem, prior: &PriorOverClass, sample: &[usize], eta: f64) -> f64 {
    let terms: Vec<f64> = prior
        .masses
        .iter()
        .enumerate()
        .map(|(f, &p)| p.ln() - eta * problem.excess_loss_unchecked(f, sample))
        .collect();
    -log_sum_exp(&terms) / eta
}

pub fn information_complexity(
    problem: &LearningProblem,
    prior: &PriorOverClass,
    est: &Estimator,
    sample: &[usize],
    eta: f64,
) -> Result<InformationComplexity> {
    problem.check_sample(sample)?;
    if prior.len() != problem.num_predictors() {
        return Err(Error::DegeneratePrior("prior size differs from class size".into()));
    }
    let mut expected_excess = 0.0;
    let mut kl = 0.0;
    for (f, m) in est.support(sample) {
        let p = prior.masses[f];
        if p <= 0.0 {
            return Err(Error::AbsoluteContinuityViolated { index: f, mass: m });
        }
        expected_excess += m * problem.excess_loss_unchecked(f, sample);
        kl += m * (m.ln() - p.ln());
    }
    let value = expected_excess + kl / eta;
    let esc = match est.kind() {
        EstimatorKind::GeneralizedBayes { eta: e, prior: p } if *e == eta && p.as_slice() == prior.masses() => {
            let esc = extended_stochastic_complexity(problem, prior, sample, eta);
            if (value - esc).abs() > 1e-10 * esc.abs().max(1.0) {
                return Err(Error::IdentityViolated(format!(
                    "information complexity {value} differs from extended stochastic complexity {esc}"
                )));
            }
            Some(esc)
        }
        _ => None,
    };
    Ok(InformationComplexity { expected_excess, kl, value, extended_stochastic_complexity: esc })
}

/// z^n ↦ ERM within the block k minimizing
/// Σ_i ℓ_{f̂_k}(z_i) − ln π_K(k)/η + comp_bounds[k].
pub fn two_part_mdl(
    problem: &LearningProblem,
    partition: &Partition,
    pi_k: &PriorOverClass,
    comp_bounds: &[f64],
    eta: f64,
) -> Result<Estimator> {
    partition.check_size(problem.num_predictors())?;
    let k = partition.num_blocks();
    if pi_k.len() != k || comp_bounds.len() != k {
        return Err(Error::BadPartition(format!(
            "{k} blocks but {} block-prior masses and {} complexity bounds",
            pi_k.len(),
            comp_bounds.len()
        )));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidConfig(format!("eta = {eta} must be positive")));
    }
    let losses = loss_table(problem);
    let blocks = partition.blocks().to_vec();
    let offsets: Vec<f64> = (0..k).map(|b| -pi_k.masses[b].ln() / eta + comp_bounds[b]).collect();
    Ok(Estimator::deterministic(EstimatorKind::TwoPartMdl { eta }, problem.num_predictors(), move |sample| {
        let mut best = (0usize, f64::INFINITY, usize::MAX);
        for (b, block) in blocks.iter().enumerate() {
            let fk = argmin_by(block, |f| cumulative(&losses[f], sample));
            let crit = cumulative(&losses[fk], sample) + offsets[b];
            if crit < best.1 || best.2 == usize::MAX {
                best = (b, crit, fk);
            }
        }
        best.2
    }))
}

/// Exact comp(F_k, ERM_k) for every block.
pub fn block_comp_exact(model: &EntropifiedModel<'_>, partition: &Partition, cfg: &ComputeConfig) -> Result<Vec<f64>> {
    partition
        .blocks()
        .iter()
        .map(|block| Ok(shtarkov_simple(model, &erm_within(model.problem(), block), cfg)?.comp))
        .collect()
}

/// Train/validate split used by [`eta_grid_select`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRule {
    /// Leading fraction of each simulated sample used for fitting.
    pub train_fraction: f64,
    /// Number of simulated samples of size n.
    pub replicates: u64,
}

impl Default for SplitRule {
    fn default() -> Self {
        Self { train_fraction: 0.5, replicates: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSelection {
    pub eta: f64,
    /// (η, mean held-out cumulative loss) for every grid point.
    pub scores: Vec<(f64, f64)>,
}

/// Grid search for η by held-out loss on simulated samples from P. This is
/// a plain stand-in for data-driven learning-rate tuning.
///
/// Each replicate draws z^n, fits `family(η)` on the first part and scores
/// the posterior-expected loss on the rest. The smallest mean score wins;
/// ties go to the smaller η.
pub fn eta_grid_select<F>(
    problem: &LearningProblem,
    grid: &[f64],
    family: F,
    rule: SplitRule,
    mc: &McConfig,
) -> Result<EtaSelection>
where
    F: Fn(f64) -> Result<Estimator>,
{
    if grid.is_empty() {
        return Err(Error::EmptyGrid("eta grid"));
    }
    if !(rule.train_fraction > 0.0 && rule.train_fraction < 1.0) || rule.replicates == 0 {
        return Err(Error::InvalidConfig("split rule needs 0 < train_fraction < 1 and replicates > 0".into()));
    }
    let n = problem.n();
    if n < 2 {
        return Err(Error::InvalidConfig("held-out selection needs n >= 2".into()));
    }
    let n_train = ((n as f64 * rule.train_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let measure = ProductMeasure::of_problem(problem);
    let mut sampler = measure.sampler(mc)?;
    let mut samples = Vec::with_capacity(rule.replicates as usize);
    let mut buf = Vec::new();
    for _ in 0..rule.replicates {
        sampler.fill(&mut buf);
        samples.push(buf.clone());
    }
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let losses = problem.class().losses();
    let mut scores = Vec::with_capacity(sorted.len());
    for &eta in &sorted {
        let est = family(eta)?;
        let mut total = 0.0;
        for s in &samples {
            let (train, valid) = s.split_at(n_train.min(s.len()));
            for (f, m) in est.support(train) {
                total += m * cumulative(&losses[f], valid);
            }
        }
        scores.push((eta, total / samples.len() as f64));
    }
    let best = scores
        .iter()
        .fold(None::<(f64, f64)>, |best, &(eta, s)| match best {
            Some((_, bs)) if bs <= s => best,
            _ => Some((eta, s)),
        })
        .expect("nonempty");
    Ok(EtaSelection { eta: best.0, scores })
}

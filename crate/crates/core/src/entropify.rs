//! Entropified densities q_f ∝ p·e^{−ηR_f} and annealed expectations.

use crate::error::{Error, Result};
use crate::logspace::{log_sum_exp, LogAccumulator};
use crate::measure::ProductMeasure;
use crate::problem::LearningProblem;

/// Per-predictor entropified densities for a fixed problem and η.
///
/// To work at another learning rate build a new model from
/// [`LearningProblem::with_eta`].
#[derive(Debug, Clone)]
pub struct EntropifiedModel<'p> {
    problem: &'p LearningProblem,
    excess: Vec<Vec<f64>>,
    log_c1: Vec<f64>,
    log_q: Vec<Vec<f64>>,
    log_p_density: Vec<f64>,
}

impl<'p> EntropifiedModel<'p> {
    pub fn new(problem: &'p LearningProblem) -> Self {
        let eta = problem.eta();
        let masses = problem.p().masses();
        let nu = problem.space().nu();
        let k = problem.num_outcomes();
        let log_p_density: Vec<f64> = (0..k).map(|z| masses[z].ln() - nu[z].ln()).collect();
        let excess: Vec<Vec<f64>> = (0..problem.num_predictors())
            .map(|f| (0..k).map(|z| problem.excess(f, z)).collect())
            .collect();
        // Measured against the float total of P so that c1(f*) is exactly 1.
        let log_total = log_sum_exp(&masses.iter().map(|m| m.ln()).collect::<Vec<_>>());
        let log_c1: Vec<f64> = excess
            .iter()
            .map(|row| {
                let terms: Vec<f64> = (0..k).map(|z| masses[z].ln() - eta * row[z]).collect();
                log_sum_exp(&terms) - log_total
            })
            .collect();
        let log_q = excess
            .iter()
            .zip(&log_c1)
            .map(|(row, c)| (0..k).map(|z| log_p_density[z] - eta * row[z] - c).collect())
            .collect();
        Self { problem, excess, log_c1, log_q, log_p_density }
    }

    pub fn problem(&self) -> &'p LearningProblem {
        self.problem
    }

    pub fn eta(&self) -> f64 {
        self.problem.eta()
    }

    pub fn n(&self) -> usize {
        self.problem.n()
    }

    pub fn num_predictors(&self) -> usize {
        self.problem.num_predictors()
    }

    /// ln c1(f) = ln E_P[e^{−ηR_f(Z)}].
    pub fn log_c1(&self, f: usize) -> f64 {
        self.log_c1[f]
    }

    /// ln C(f) = n ln c1(f).
    pub fn normalizer(&self, f: usize) -> Result<f64> {
        self.problem.check_predictor(f)?;
        Ok(self.log_normalizer(f))
    }

    #[inline]
    pub fn log_normalizer(&self, f: usize) -> f64 {
        self.n() as f64 * self.log_c1[f]
    }

    /// ln q_f(z) with respect to ν.
    #[inline]
    pub fn log_q(&self, f: usize, z: usize) -> f64 {
        self.log_q[f][z]
    }

    /// R_f(z) for a single outcome.
    #[inline]
    pub fn excess(&self, f: usize, z: usize) -> f64 {
        self.excess[f][z]
    }

    /// R_f(z^n).
    #[inline]
    pub fn excess_loss(&self, f: usize, sample: &[usize]) -> f64 {
        let row = &self.excess[f];
        sample.iter().map(|&z| row[z]).sum()
    }

    /// ln q_f(z^n) = Σ_i ln q_f(z_i).
    pub fn q_density(&self, f: usize, sample: &[usize]) -> Result<f64> {
        self.problem.check_predictor(f)?;
        self.problem.check_sample(sample)?;
        Ok(self.log_q_sample(f, sample))
    }

    #[inline]
    pub fn log_q_sample(&self, f: usize, sample: &[usize]) -> f64 {
        let row = &self.log_q[f];
        sample.iter().map(|&z| row[z]).sum()
    }

    /// ln p(z^n) with respect to ν^n.
    #[inline]
    pub fn log_p_sample(&self, sample: &[usize]) -> f64 {
        sample.iter().map(|&z| self.log_p_density[z]).sum()
    }

    /// ηR_f(z^n) + ln C(f), which equals ln p(z^n) − ln q_f(z^n) on the
    /// support of P.
    #[inline]
    pub fn codelength_gap(&self, f: usize, sample: &[usize]) -> f64 {
        self.eta() * self.excess_loss(f, sample) + self.log_normalizer(f)
    }

    /// −(1/η) ln c1(f).
    pub fn annealed_excess_risk(&self, f: usize) -> Result<f64> {
        self.problem.check_predictor(f)?;
        Ok(-self.log_c1[f] / self.eta())
    }

    /// max_z q_{f0}(z)/p(z) over the support of P.
    pub fn density_ratio_bound(&self, f0: usize) -> Result<f64> {
        self.problem.check_predictor(f0)?;
        let masses = self.problem.p().masses();
        let mut best = f64::NEG_INFINITY;
        for z in 0..self.problem.num_outcomes() {
            let lq = self.log_q[f0][z];
            if masses[z] == 0.0 {
                if lq > f64::NEG_INFINITY {
                    return Err(Error::SupportMismatch(z));
                }
                continue;
            }
            best = best.max(lq - self.log_p_density[z]);
        }
        Ok(best.exp())
    }

    /// Single-outcome masses q_{f0}(z)·ν(z).
    pub fn q_masses(&self, f0: usize) -> Vec<f64> {
        let nu = self.problem.space().nu();
        self.log_q[f0].iter().zip(nu).map(|(lq, v)| lq.exp() * v).collect()
    }

    /// Q_{f0}^m as a product measure.
    pub fn q_measure(&self, f0: usize, m: usize) -> ProductMeasure {
        ProductMeasure::new(&self.q_masses(f0), self.problem.space().nu(), m)
            .expect("lengths match")
    }
}

/// −(1/η) ln E[e^{−ηU}] for a finite random variable.
pub fn annealed_expectation(values: &[f64], masses: &[f64], eta: f64) -> f64 {
    let mut acc = LogAccumulator::new();
    for (u, m) in values.iter().zip(masses) {
        acc.add(m.ln() - eta * u);
    }
    let annealed = -acc.value() / eta;
    debug_assert!({
        let mean: f64 = values.iter().zip(masses).map(|(u, m)| u * m).sum();
        annealed <= mean + 1e-12 * mean.abs().max(1.0)
    });
    annealed
}

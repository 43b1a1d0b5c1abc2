use serde::{Deserialize, Serialize};

use super::ThresholdGrid;
use crate::error::{Error, Result};
use crate::esi::fit_bernstein;
use crate::estimators::{erm, generalized_bayes, PriorOverClass};
use crate::measure::{exact_expectation, ComputeConfig, Estimate, MeanAccumulator, Method, ProductMeasure};
use crate::problem::LearningProblem;
use crate::shtarkov::Estimator;

/// Slope tolerance of a rate experiment.
pub const SLOPE_TOL: f64 = 0.15;

/// Bernstein exponents tried, largest first, when picking the target.
const BETA_LADDER: [f64; 5] = [1.0, 0.75, 0.5, 0.25, 0.0];
/// Largest Bernstein constant accepted for a rung of the ladder.
const BETA_MAX_B: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateEstimator {
    Erm,
    /// Dirac on the risk minimizer.
    Oracle,
    /// Generalized Bayes with a uniform prior at a fixed η.
    GeneralizedBayes { eta: f64 },
}

impl RateEstimator {
    pub fn label(&self) -> String {
        match self {
            RateEstimator::Erm => "erm".into(),
            RateEstimator::Oracle => "dirac-fstar".into(),
            RateEstimator::GeneralizedBayes { eta } => format!("gen-bayes(eta={eta})"),
        }
    }

    fn build(&self, problem: &LearningProblem) -> Result<Estimator> {
        Ok(match self {
            RateEstimator::Erm => erm(problem),
            RateEstimator::Oracle => Estimator::dirac(problem.fstar(), problem.num_predictors()),
            RateEstimator::GeneralizedBayes { eta } => {
                generalized_bayes(problem, &PriorOverClass::uniform(problem.num_predictors()), *eta)?
            }
        })
    }
}

/// One (n, estimator) row of a rate experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub estimator: String,
    pub mean_excess_risk: f64,
    pub std_error: Option<f64>,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of ln(mean excess risk) on ln n; absent when the
    /// risk vanishes at some n.
    pub slope: Option<f64>,
    pub beta: f64,
    /// −1/(2 − β).
    pub target: f64,
    pub margin: Option<f64>,
    pub degenerate: bool,
    pub pass: bool,
}

/// Largest β on the ladder whose fitted Bernstein constant is at most 2.
pub fn estimate_beta(problem: &LearningProblem) -> f64 {
    BETA_LADDER
        .iter()
        .copied()
        .find(|&b| matches!(fit_bernstein(problem, b), Ok(fit) if fit.b <= BETA_MAX_B))
        .unwrap_or(0.0)
}

/// Ordinary least squares slope of y on x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Mean excess risk of an estimator for each n, and the fitted log-log slope
/// against the target −1/(2 − β).
///
/// Risks are exact sums for each drawn sample; the expectation over samples
/// is exact under the cap and Monte Carlo (stream n) otherwise. ERM on a
/// threshold grid uses prefix counts instead of the generic argmin.
pub fn rate_experiment(
    problem: &LearningProblem,
    estimator: RateEstimator,
    ns: &[usize],
    threshold: Option<&ThresholdGrid>,
    cfg: &ComputeConfig,
) -> Result<RateReport> {
    if ns.len() < 4 {
        return Err(Error::InvalidConfig("a slope fit needs at least 4 sample sizes".into()));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] == 0 {
        return Err(Error::InvalidConfig("sample sizes must be positive and strictly increasing".into()));
    }
    let risks: Vec<f64> = (0..problem.num_predictors()).map(|f| problem.excess_risk(f)).collect::<Result<_>>()?;
    let est = estimator.build(problem)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let measure = ProductMeasure::new(problem.p().masses(), problem.space().nu(), n)?;
        let mean_risk = |s: &[usize]| est.support(s).iter().map(|(f, m)| m * risks[*f]).sum::<f64>();
        let e = match exact_expectation(&measure, cfg, mean_risk) {
            Ok(v) => Estimate::exact(v),
            Err(Error::EnumerationCapExceeded { .. }) => {
                let mc = cfg.mc.with_stream(n as u64);
                if mc.trials < 2 {
                    return Err(Error::InvalidConfig("Monte Carlo needs at least 2 trials".into()));
                }
                let mut sampler = measure.sampler(&mc)?;
                let mut acc = MeanAccumulator::default();
                let mut buf = Vec::with_capacity(n);
                let mut counts = Vec::new();
                for _ in 0..mc.trials {
                    sampler.fill(&mut buf);
                    let r = match (estimator, threshold) {
                        (RateEstimator::Erm, Some(g)) => g.excess_risk[g.erm(&buf, &mut counts)],
                        _ => mean_risk(&buf),
                    };
                    acc.push(r);
                }
                acc.estimate()
            }
            Err(e) => return Err(e),
        };
        rows.push(RateRow {
            n,
            estimator: estimator.label(),
            mean_excess_risk: e.value,
            std_error: e.std_error,
            method: e.method,
        });
    }
    let beta = estimate_beta(problem);
    let target = -1.0 / (2.0 - beta);
    let degenerate = rows.iter().any(|r| r.mean_excess_risk <= 0.0);
    let (slope, margin, pass) = if degenerate {
        let all_zero = rows.iter().all(|r| r.mean_excess_risk <= 0.0);
        (None, None, all_zero)
    } else {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.mean_excess_risk.ln()).collect();
        let s = fit_slope(&x, &y);
        let margin = (s - target).abs();
        (Some(s), Some(margin), margin <= SLOPE_TOL)
    };
    Ok(RateReport { rows, slope, beta, target, margin, degenerate, pass })
}

/// n = 16, 32, ..., 1024.
pub fn default_rate_ns() -> Vec<usize> {
    (4..=10).map(|k| 1usize << k).collect()
}

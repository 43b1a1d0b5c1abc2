//! Pseudometrics and covering numbers over a finite class, and the
//! local-complexity chain built on them (see [`local`]).

pub mod local;

pub use local::*;

use serde::{Deserialize, Serialize};

use crate::entropify::EntropifiedModel;
use crate::error::{Error, Result};
use crate::report::VerificationResult;

/// Sizes up to which the exact minimum cover is searched exhaustively.
pub const EXACT_COVER_MAX: usize = 15;

/// The measure a pseudometric integrates against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricMeasure {
    P,
    /// Empirical measure of a sample.
    Empirical(Vec<usize>),
    /// Entropified Q_{f0}.
    Q(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    L1,
    L2,
}

/// Whether distances compare predictions f(x) or losses ℓ_f(z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Over {
    Predictors,
    /// The class {ℓ_{f0} − ℓ_f}; differences reduce to ℓ_g − ℓ_f.
    Losses,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pseudometric {
    pub measure: MetricMeasure,
    pub norm: Norm,
    pub over: Over,
}

impl Pseudometric {
    pub fn l2_p() -> Self {
        Self { measure: MetricMeasure::P, norm: Norm::L2, over: Over::Predictors }
    }

    pub fn l2_empirical(sample: Vec<usize>) -> Self {
        Self { measure: MetricMeasure::Empirical(sample), norm: Norm::L2, over: Over::Predictors }
    }

    pub fn l2_q_losses(f0: usize) -> Self {
        Self { measure: MetricMeasure::Q(f0), norm: Norm::L2, over: Over::Losses }
    }

    fn masses(&self, model: &EntropifiedModel<'_>) -> Result<Vec<f64>> {
        let problem = model.problem();
        match &self.measure {
            MetricMeasure::P => Ok(problem.p().masses().to_vec()),
            MetricMeasure::Empirical(sample) => {
                if sample.is_empty() {
                    return Err(Error::InvalidConfig("empirical measure of an empty sample".into()));
                }
                let k = problem.num_outcomes();
                let mut m = vec![0.0; k];
                for &z in sample {
                    if z >= k {
                        return Err(Error::IndexOutOfRange { what: "outcome", index: z, len: k });
                    }
                    m[z] += 1.0 / sample.len() as f64;
                }
                Ok(m)
            }
            MetricMeasure::Q(f0) => {
                problem.check_predictor(*f0)?;
                Ok(model.q_masses(*f0))
            }
        }
    }

    /// All pairwise distances among `subset` (row/column order of `subset`).
    pub fn matrix(&self, model: &EntropifiedModel<'_>, subset: &[usize]) -> Result<Vec<Vec<f64>>> {
        let masses = self.masses(model)?;
        for &f in subset {
            model.problem().check_predictor(f)?;
        }
        Ok(subset
            .iter()
            .map(|&a| subset.iter().map(|&b| self.distance_with(model, &masses, a, b)).collect())
            .collect())
    }

    fn distance_with(&self, model: &EntropifiedModel<'_>, masses: &[f64], a: usize, b: usize) -> f64 {
        let class = model.problem().class();
        let diff = |z: usize| match self.over {
            Over::Predictors => class.prediction(a, z) - class.prediction(b, z),
            Over::Losses => class.loss(a, z) - class.loss(b, z),
        };
        match self.norm {
            Norm::L1 => masses.iter().enumerate().map(|(z, m)| m * diff(z).abs()).sum(),
            Norm::L2 => masses.iter().enumerate().map(|(z, m)| m * diff(z).powi(2)).sum::<f64>().sqrt(),
        }
    }
}

pub fn pseudodistance(model: &EntropifiedModel<'_>, metric: &Pseudometric, a: usize, b: usize) -> Result<f64> {
    let problem = model.problem();
    problem.check_predictor(a)?;
    problem.check_predictor(b)?;
    let masses = metric.masses(model)?;
    Ok(metric.distance_with(model, &masses, a, b))
}

/// Largest pairwise distance within `subset`.
pub fn diameter(model: &EntropifiedModel<'_>, metric: &Pseudometric, subset: &[usize]) -> Result<f64> {
    Ok(metric
        .matrix(model, subset)?
        .iter()
        .flatten()
        .fold(0.0f64, |a, &b| a.max(b)))
}

/// An ε-cover of the class by predictor centers, with Voronoi cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverResult {
    pub epsilon: f64,
    pub centers: Vec<usize>,
    /// For every predictor, the position in `centers` of its nearest center
    /// (ties to the earlier center).
    pub cells: Vec<usize>,
    /// Exhaustive minimum over internal centers, when the class is small.
    pub exact_size: Option<usize>,
}

impl CoverResult {
    pub fn size(&self) -> usize {
        self.centers.len()
    }

    /// Predictor indices of each cell, in center order.
    pub fn cell_members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centers.len()];
        for (f, &c) in self.cells.iter().enumerate() {
            out[c].push(f);
        }
        out
    }
}

/// Greedy farthest-point cover starting from predictor 0.
///
/// The farthest-point order does not depend on ε, so the cover size is
/// nonincreasing in ε.
pub fn covering_number(model: &EntropifiedModel<'_>, metric: &Pseudometric, epsilon: f64) -> Result<CoverResult> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon = {epsilon} must be positive")));
    }
    let m = model.num_predictors();
    let all: Vec<usize> = (0..m).collect();
    let d = metric.matrix(model, &all)?;
    let mut centers = vec![0usize];
    let mut nearest: Vec<f64> = d[0].clone();
    loop {
        let (far, dist) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (f, &v)| if v > best.1 { (f, v) } else { best });
        if dist <= epsilon {
            break;
        }
        centers.push(far);
        for f in 0..m {
            nearest[f] = nearest[f].min(d[far][f]);
        }
    }
    let cells = (0..m)
        .map(|f| {
            centers
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (i, &c)| if d[c][f] < best.1 { (i, d[c][f]) } else { best })
                .0
        })
        .collect();
    let exact_size = (m <= EXACT_COVER_MAX).then(|| exact_cover_size(&d, epsilon));
    Ok(CoverResult { epsilon, centers, cells, exact_size })
}

/// Minimum number of internal centers whose ε-balls cover everything.
fn exact_cover_size(d: &[Vec<f64>], epsilon: f64) -> usize {
    let m = d.len();
    let full: u32 = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let balls: Vec<u32> = (0..m)
        .map(|c| (0..m).filter(|&f| d[c][f] <= epsilon).fold(0u32, |acc, f| acc | (1 << f)))
        .collect();
    for k in 1..=m {
        if covers_with(&balls, full, k, 0, 0) {
            return k;
        }
    }
    m
}

fn covers_with(balls: &[u32], full: u32, k: usize, start: usize, acc: u32) -> bool {
    if acc == full {
        return true;
    }
    if k == 0 {
        return false;
    }
    (start..balls.len()).any(|c| covers_with(balls, full, k - 1, c + 1, acc | balls[c]))
}

/// Exact internal covering number.
pub fn exact_covering_number(model: &EntropifiedModel<'_>, metric: &Pseudometric, epsilon: f64) -> Result<usize> {
    let m = model.num_predictors();
    if m > EXACT_COVER_MAX {
        return Err(Error::InvalidConfig(format!("exact covering needs at most {EXACT_COVER_MAX} predictors")));
    }
    let all: Vec<usize> = (0..m).collect();
    Ok(exact_cover_size(&metric.matrix(model, &all)?, epsilon))
}

/// ‖ℓ_f − ℓ_g‖_{L2(Q_{f0})} ≤ e·L·‖f − g‖_{L2(P)} for all f0, f, g.
pub fn lemma_sigma_check(model: &EntropifiedModel<'_>) -> Result<VerificationResult> {
    if model.eta() > 1.0 {
        return Err(Error::Precondition(format!("eta = {} exceeds 1", model.eta())));
    }
    let m = model.num_predictors();
    let all: Vec<usize> = (0..m).collect();
    let factor = std::f64::consts::E * model.problem().class().lipschitz();
    let dp = Pseudometric::l2_p().matrix(model, &all)?;
    let mut parts = Vec::new();
    for f0 in 0..m {
        let dq = Pseudometric::l2_q_losses(f0).matrix(model, &all)?;
        for f in 0..m {
            for g in f + 1..m {
                parts.push(VerificationResult::leq(
                    format!("sigma f0={f0} f={f} g={g}"),
                    dq[f][g],
                    factor * dp[f][g],
                    1e-12,
                ));
            }
        }
    }
    Ok(VerificationResult::all("sigma-density-ratio", &parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{
        FiniteDistribution, LearningProblem, OutcomeSpace, Parameterization, PredictorClass,
    };

    fn problem() -> LearningProblem {
        LearningProblem::new(
            OutcomeSpace::indexed(3).unwrap(),
            FiniteDistribution::new(vec![0.2, 0.5, 0.3]).unwrap(),
            PredictorClass::direct(vec![
                vec![0.1, 0.2, 0.3],
                vec![0.1, 0.2, 0.5],
                vec![0.4, 0.0, 0.3],
                vec![0.35, 0.05, 0.3],
            ])
            .unwrap(),
            1.0,
            2,
        )
        .unwrap()
    }

    #[test]
    fn single_term_distance() {
        let p = problem();
        let m = EntropifiedModel::new(&p);
        let d = pseudodistance(&m, &Pseudometric::l2_p(), 0, 1).unwrap();
        assert!((d - 0.3f64.sqrt() * 0.2).abs() < 1e-15);
        assert_eq!(pseudodistance(&m, &Pseudometric::l2_p(), 2, 2).unwrap(), 0.0);
        let l1 = Pseudometric { measure: MetricMeasure::P, norm: Norm::L1, over: Over::Predictors };
        assert!((pseudodistance(&m, &l1, 0, 1).unwrap() - 0.3 * 0.2).abs() < 1e-15);
        let emp = Pseudometric::l2_empirical(vec![2, 2, 0, 1]);
        assert!((pseudodistance(&m, &emp, 0, 1).unwrap() - (0.5f64 * 0.04).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn triangle_inequality_on_triples() {
        let p = problem();
        let m = EntropifiedModel::new(&p);
        for metric in [Pseudometric::l2_p(), Pseudometric::l2_q_losses(2)] {
            let d = metric.matrix(&m, &[0, 1, 2, 3]).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    assert_eq!(d[a][b], d[b][a]);
                    for c in 0..4 {
                        assert!(d[a][c] <= d[a][b] + d[b][c] + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn cover_extremes_and_monotonicity() {
        let p = problem();
        let m = EntropifiedModel::new(&p);
        let metric = Pseudometric::l2_p();
        let diam = diameter(&m, &metric, &[0, 1, 2, 3]).unwrap();
        assert_eq!(covering_number(&m, &metric, diam).unwrap().size(), 1);
        let tiny = covering_number(&m, &metric, 1e-9).unwrap();
        assert_eq!(tiny.size(), 4);
        assert_eq!(tiny.exact_size, Some(4));
        let mut last = usize::MAX;
        for i in 1..40 {
            let c = covering_number(&m, &metric, diam * i as f64 / 40.0).unwrap();
            assert!(c.size() <= last);
            last = c.size();
            assert!(c.exact_size.unwrap() <= c.size());
            for (f, &cell) in c.cells.iter().enumerate() {
                assert!(pseudodistance(&m, &metric, c.centers[cell], f).unwrap() <= c.epsilon);
            }
        }
    }

    #[test]
    fn exact_cover_matches_subset_oracle() {
        let p = problem();
        let m = EntropifiedModel::new(&p);
        let metric = Pseudometric::l2_p();
        let d = metric.matrix(&m, &[0, 1, 2, 3]).unwrap();
        for eps in [0.01, 0.05, 0.1, 0.15, 0.2] {
            // Brute force over all 15 nonempty center sets.
            let mut best = 4;
            for mask in 1u32..16 {
                let covered = (0..4).all(|f| (0..4).any(|c| mask & (1 << c) != 0 && d[c][f] <= eps));
                if covered {
                    best = best.min(mask.count_ones() as usize);
                }
            }
            assert_eq!(exact_covering_number(&m, &metric, eps).unwrap(), best, "eps {eps}");
        }
    }

    #[test]
    fn lemma_sigma_holds_direct_and_supervised() {
        let p = problem();
        assert!(lemma_sigma_check(&EntropifiedModel::new(&p)).unwrap().passed());
        let features = vec![vec![0.0, 0.0, 0.2], vec![0.3, 0.3, 0.5]];
        let losses = vec![vec![0.0, 0.1, 0.2], vec![0.3, 0.0, 0.4]];
        let class = PredictorClass::new(losses, Parameterization::Supervised { features, lipschitz: 1.0 }).unwrap();
        let sp = LearningProblem::new(
            OutcomeSpace::indexed(3).unwrap(),
            FiniteDistribution::new(vec![0.3, 0.3, 0.4]).unwrap(),
            class,
            0.5,
            1,
        )
        .unwrap();
        assert!(lemma_sigma_check(&EntropifiedModel::new(&sp)).unwrap().passed());
    }
}

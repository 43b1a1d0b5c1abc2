//! Problem generators, the estimator × luckiness catalog, and the
//! experiments built on them.

mod equalizer;
mod rates;
mod select;

pub use equalizer::*;
pub use rates::*;
pub use select::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::entropify::EntropifiedModel;
use crate::error::{Error, Result};
use crate::estimators::{erm, generalized_bayes, penalized_erm, PenaltyFunction, PriorOverClass};
use crate::problem::{FiniteDistribution, LearningProblem, OutcomeSpace, Parameterization, PredictorClass};
use crate::shtarkov::{ml_estimator, Estimator, Luckiness, Partition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Dirichlet(1) P and losses uniform on [0, 1/2].
    RandomFinite { outcomes: usize, predictors: usize },
    /// Classifiers 1{x ≥ t} on an m-point grid, outcomes (x, y).
    ThresholdGrid { m: usize },
    /// Random losses grouped into consecutive blocks, with f* placed in
    /// `best_block`.
    NestedBlocks { outcomes: usize, block_sizes: Vec<usize>, best_block: usize },
    /// Near-uniform densities under log-loss, P equal to one of them.
    LogLoss { outcomes: usize, predictors: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: Family,
    /// Margin h of the threshold grid; ignored by other families.
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "one_usize")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl GeneratorSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self { family, noise: 0.0, eta: 1.0, n: 1, seed }
    }

    pub fn with_noise(mut self, h: f64) -> Self {
        self.noise = h;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }
}

/// A generated problem with whatever structure the family carries.
#[derive(Debug, Clone)]
pub struct Generated {
    pub problem: LearningProblem,
    pub threshold: Option<ThresholdGrid>,
    pub partition: Option<Partition>,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match &spec.family {
        Family::RandomFinite { outcomes, predictors } => {
            check_sizes(*outcomes, *predictors)?;
            let p = dirichlet(&mut rng, *outcomes);
            let losses = uniform_losses(&mut rng, *predictors, *outcomes);
            let problem = LearningProblem::new(
                OutcomeSpace::indexed(*outcomes)?,
                FiniteDistribution::new(p)?,
                PredictorClass::direct(losses)?,
                spec.eta,
                spec.n,
            )?;
            Ok(Generated { problem, threshold: None, partition: None })
        }
        Family::ThresholdGrid { m } => {
            let (problem, grid) = threshold_grid(*m, spec.noise, spec.eta, spec.n)?;
            Ok(Generated { problem, threshold: Some(grid), partition: None })
        }
        Family::NestedBlocks { outcomes, block_sizes, best_block } => {
            let total: usize = block_sizes.iter().sum();
            check_sizes(*outcomes, total)?;
            if block_sizes.contains(&0) || *best_block >= block_sizes.len() {
                return Err(Error::MalformedSpec("blocks must be nonempty and best_block in range".into()));
            }
            let p = dirichlet(&mut rng, *outcomes);
            let mut losses = uniform_losses(&mut rng, total, *outcomes);
            let risk = |row: &Vec<f64>| row.iter().zip(&p).map(|(l, m)| l * m).sum::<f64>();
            let best = (0..total).fold(0, |b, f| if risk(&losses[f]) < risk(&losses[b]) { f } else { b });
            let start: usize = block_sizes[..*best_block].iter().sum();
            losses.swap(best, start);
            let mut blocks = Vec::new();
            let mut next = 0;
            for &s in block_sizes {
                blocks.push((next..next + s).collect());
                next += s;
            }
            let problem = LearningProblem::new(
                OutcomeSpace::indexed(*outcomes)?,
                FiniteDistribution::new(p)?,
                PredictorClass::direct(losses)?,
                spec.eta,
                spec.n,
            )?;
            Ok(Generated { problem, threshold: None, partition: Some(Partition::new(blocks, total)?) })
        }
        Family::LogLoss { outcomes, predictors } => {
            check_sizes(*outcomes, *predictors)?;
            let densities: Vec<Vec<f64>> = (0..*predictors)
                .map(|_| {
                    let u: Vec<f64> = (0..*outcomes).map(|_| rng.random_range(-0.12..=0.12f64).exp()).collect();
                    let t: f64 = u.iter().sum();
                    u.into_iter().map(|x| x / t).collect()
                })
                .collect();
            let truth = rng.random_range(0..*predictors);
            let losses = densities.iter().map(|d| d.iter().map(|x| -x.ln()).collect()).collect();
            let problem = LearningProblem::log_loss(
                OutcomeSpace::indexed(*outcomes)?,
                FiniteDistribution::new(densities[truth].clone())?,
                PredictorClass::direct(losses)?,
                spec.eta,
                spec.n,
            )?;
            Ok(Generated { problem, threshold: None, partition: None })
        }
    }
}

fn check_sizes(outcomes: usize, predictors: usize) -> Result<()> {
    if outcomes == 0 || predictors == 0 {
        return Err(Error::MalformedSpec("need at least one outcome and one predictor".into()));
    }
    Ok(())
}

fn dirichlet(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1) + 1e-3).collect();
    let t: f64 = g.iter().sum();
    let mut p: Vec<f64> = g.iter().map(|x| x / t).collect();
    // Put the rounding residue on the largest mass so the total is 1 to the last bit.
    let residue = 1.0 - p.iter().sum::<f64>();
    let big = (0..k).fold(0, |b, z| if p[z] > p[b] { z } else { b });
    p[big] += residue;
    p
}

fn uniform_losses(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..k).map(|_| rng.random_range(0.0..=0.5)).collect()).collect()
}

/// Structure of a threshold-grid problem, kept for the fast ERM path.
///
/// Outcome 2i + y is the pair (x_i, y), x_i = (i + 1/2)/m uniform. The best
/// label is 1{x ≥ 1/2} and P(Y ≠ best | x) = (1 − margin(x))/2 with
/// margin(x) = h + (1 − h)|2x − 1|³, so h = 1 is noiseless and h = 0 lets
/// the margin vanish at the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    pub m: usize,
    pub h: f64,
    /// Excess risk of threshold t = 0..=m.
    pub excess_risk: Vec<f64>,
}

impl ThresholdGrid {
    /// ERM threshold for a sample (ties to the smallest t).
    pub fn erm(&self, sample: &[usize], counts: &mut Vec<[u32; 2]>) -> usize {
        counts.clear();
        counts.resize(self.m, [0, 0]);
        for &z in sample {
            counts[z / 2][z % 2] += 1;
        }
        // Loss count at t: ones left of t plus zeros at or right of t.
        let mut loss: i64 = counts.iter().map(|c| c[0] as i64).sum();
        let mut best = (0, loss);
        for (i, c) in counts.iter().enumerate() {
            loss += c[1] as i64 - c[0] as i64;
            if loss < best.1 {
                best = (i + 1, loss);
            }
        }
        best.0
    }
}

pub fn margin(x: f64, h: f64) -> f64 {
    h + (1.0 - h) * (2.0 * x - 1.0).abs().powi(3)
}

pub fn threshold_grid(m: usize, h: f64, eta: f64, n: usize) -> Result<(LearningProblem, ThresholdGrid)> {
    if m == 0 || !(0.0..=1.0).contains(&h) {
        return Err(Error::MalformedSpec(format!("threshold grid needs m >= 1 and h in [0, 1], got m = {m}, h = {h}")));
    }
    let mut labels = Vec::with_capacity(2 * m);
    let mut structure = Vec::with_capacity(2 * m);
    let mut p = Vec::with_capacity(2 * m);
    for i in 0..m {
        let x = (i as f64 + 0.5) / m as f64;
        let best = if x >= 0.5 { 1 } else { 0 };
        let wrong = (1.0 - margin(x, h)) / 2.0;
        for y in 0..2 {
            labels.push(format!("x{i}:y{y}"));
            structure.push((format!("x{i}"), format!("{y}")));
            p.push(if y == best { 1.0 - wrong } else { wrong } / m as f64);
        }
    }
    let features: Vec<Vec<f64>> =
        (0..=m).map(|t| (0..2 * m).map(|z| if z / 2 >= t { 1.0 } else { 0.0 }).collect()).collect();
    let losses: Vec<Vec<f64>> = features
        .iter()
        .map(|row| row.iter().enumerate().map(|(z, f)| (f - (z % 2) as f64).abs() / 2.0).collect())
        .collect();
    let class = PredictorClass::new(losses, Parameterization::Supervised { features, lipschitz: 0.5 })?;
    let problem = LearningProblem::new(
        OutcomeSpace::new(labels, None, Some(structure))?,
        FiniteDistribution::new(p)?,
        class,
        eta,
        n,
    )?;
    let excess_risk = (0..=m).map(|t| problem.excess_risk(t)).collect::<Result<Vec<_>>>()?;
    Ok((problem, ThresholdGrid { m, h, excess_risk }))
}

/// One estimator × luckiness pairing.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub estimator: String,
    pub luckiness: String,
    pub est: Estimator,
    pub w: Luckiness,
}

/// The estimator × luckiness pairings exercised by the identity suites.
///
/// Penalty Γ(f) = 0.3·f/|F| and prior π(f) ∝ 1/(f + 1) are fixed functions
/// of the index so the catalog is deterministic.
pub fn catalog(model: &EntropifiedModel<'_>) -> Result<Vec<CatalogEntry>> {
    let problem = model.problem();
    let m = problem.num_predictors();
    let eta = problem.eta();
    let gamma: Vec<f64> = (0..m).map(|f| 0.3 * f as f64 / m as f64).collect();
    let raw: Vec<f64> = (0..m).map(|f| 1.0 / (f as f64 + 1.0)).collect();
    let total: f64 = raw.iter().sum();
    let prior = PriorOverClass::new(raw.iter().map(|x| x / total).collect())?;
    let uniform = PriorOverClass::uniform(m);

    let erm_est = erm(problem);
    let pen = penalized_erm(problem, &PenaltyFunction::new(gamma.clone())?, eta)?;
    let gb = generalized_bayes(problem, &prior, eta)?;
    let gb_uniform = generalized_bayes(problem, &uniform, eta)?;
    let dirac = Estimator::dirac(problem.fstar(), m);
    let ml = ml_estimator(model);

    let entry = |e: &str, est: &Estimator, w: Luckiness| CatalogEntry {
        estimator: e.into(),
        luckiness: w.label(),
        est: est.clone(),
        w,
    };
    Ok(vec![
        entry("erm", &erm_est, Luckiness::one()),
        entry("erm", &erm_est, Luckiness::constant(2.0)?),
        entry("erm", &erm_est, Luckiness::prior_ratio(prior.masses().to_vec(), erm_est.clone())?),
        entry("erm", &erm_est, Luckiness::penalty(gamma.clone(), erm_est.clone())?),
        entry("penalized-erm", &pen, Luckiness::one()),
        entry("penalized-erm", &pen, Luckiness::penalty(gamma.clone(), pen.clone())?),
        entry("ml", &ml, Luckiness::one()),
        entry("gen-bayes", &gb, Luckiness::one()),
        entry("gen-bayes", &gb, Luckiness::prior_ratio(prior.masses().to_vec(), gb.clone())?),
        entry("gen-bayes-uniform", &gb_uniform, Luckiness::prior_ratio(uniform.masses().to_vec(), gb_uniform.clone())?),
        entry("dirac-fstar", &dirac, Luckiness::one()),
        entry("dirac-fstar", &dirac, Luckiness::prior_ratio(prior.masses().to_vec(), dirac.clone())?),
    ])
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv<T: Serialize, W: std::io::Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic_and_valid() {
        let families = [
            Family::RandomFinite { outcomes: 3, predictors: 4 },
            Family::ThresholdGrid { m: 8 },
            Family::NestedBlocks { outcomes: 3, block_sizes: vec![1, 2, 4], best_block: 1 },
            Family::LogLoss { outcomes: 3, predictors: 3 },
        ];
        for fam in families {
            let spec = GeneratorSpec::new(fam, 17).with_noise(0.5);
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            assert_eq!(a.problem.to_spec(), b.problem.to_spec());
        }
    }

    #[test]
    fn one_point_grid_has_two_predictors() {
        let (p, _) = threshold_grid(1, 0.5, 1.0, 1).unwrap();
        assert_eq!(p.num_predictors(), 2);
        // Induced rows: t = 0 predicts 1 everywhere, t = 1 predicts 0.
        assert_eq!(p.class().losses(), &[vec![0.5, 0.0], vec![0.0, 0.5]]);
    }

    #[test]
    fn noiseless_grid_margins() {
        let (p, g) = threshold_grid(6, 1.0, 1.0, 1).unwrap();
        assert_eq!(p.fstar(), 3);
        assert_eq!(g.excess_risk[3], 0.0);
        // Each misclassified grid point costs (1/2)·(1/m) of excess risk.
        for t in 0..=6usize {
            let wrong = t.abs_diff(3) as f64;
            assert!((g.excess_risk[t] - wrong * 0.5 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fast_erm_matches_generic() {
        let (p, g) = threshold_grid(7, 0.3, 1.0, 5).unwrap();
        let est = erm(&p);
        let mut counts = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let s: Vec<usize> = (0..5).map(|_| rng.random_range(0..14)).collect();
            assert_eq!(g.erm(&s, &mut counts), est.point(&s).unwrap());
        }
    }

    #[test]
    fn nested_blocks_place_fstar() {
        let spec = GeneratorSpec::new(Family::NestedBlocks { outcomes: 3, block_sizes: vec![2, 1, 3], best_block: 2 }, 4);
        let g = generate(&spec).unwrap();
        let part = g.partition.unwrap();
        assert_eq!(part.block_of(g.problem.fstar()), 2);
    }

    #[test]
    fn log_loss_instances_are_well_specified() {
        let g = generate(&GeneratorSpec::new(Family::LogLoss { outcomes: 3, predictors: 4 }, 2)).unwrap();
        let m = EntropifiedModel::new(&g.problem);
        for f in 0..4 {
            for z in 0..3 {
                let pf = (-g.problem.class().loss(f, z)).exp();
                assert!((m.log_q(f, z) - pf.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn catalog_covers_pairings() {
        let g = generate(&GeneratorSpec::new(Family::RandomFinite { outcomes: 2, predictors: 3 }, 1)).unwrap();
        let m = EntropifiedModel::new(&g.problem);
        let c = catalog(&m).unwrap();
        assert!(c.len() >= 10);
        assert!(c.iter().any(|e| !e.est.is_deterministic()));
    }
}

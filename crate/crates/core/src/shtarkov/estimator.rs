use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::partition::Partition;

type PointRule = Arc<dyn Fn(&[usize]) -> usize + Send + Sync>;
type MixtureRule = Arc<dyn Fn(&[usize]) -> Vec<f64> + Send + Sync>;

/// What an estimator is, for reporting and for recognising generalized Bayes.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorKind {
    Erm,
    PenalizedErm { eta: f64 },
    GeneralizedBayes { eta: f64, prior: Vec<f64> },
    Dirac { index: usize },
    MaximumLikelihood,
    TwoPartMdl { eta: f64 },
    Conditional { block: usize },
    Custom { name: String },
}

#[derive(Clone)]
enum Rule {
    Point(PointRule),
    Mixture(MixtureRule),
}

/// Deterministic map z^n → predictor, or randomized map z^n → distribution
/// over predictors. A deterministic estimator is used as its Dirac mixture
/// wherever a randomized one is expected.
#[derive(Clone)]
pub struct Estimator {
    kind: EstimatorKind,
    num_predictors: usize,
    rule: Rule,
}

impl fmt::Debug for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Estimator")
            .field("kind", &self.kind)
            .field("deterministic", &self.is_deterministic())
            .field("num_predictors", &self.num_predictors)
            .finish()
    }
}

impl Estimator {
    pub fn deterministic<F>(kind: EstimatorKind, num_predictors: usize, rule: F) -> Self
    where
        F: Fn(&[usize]) -> usize + Send + Sync + 'static,
    {
        Self { kind, num_predictors, rule: Rule::Point(Arc::new(rule)) }
    }

    /// `rule` must return `num_predictors` nonnegative masses summing to 1.
    pub fn randomized<F>(kind: EstimatorKind, num_predictors: usize, rule: F) -> Self
    where
        F: Fn(&[usize]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { kind, num_predictors, rule: Rule::Mixture(Arc::new(rule)) }
    }

    /// Constant estimator that always picks `index`.
    pub fn dirac(index: usize, num_predictors: usize) -> Self {
        Self::deterministic(EstimatorKind::Dirac { index }, num_predictors, move |_| index)
    }

    pub fn kind(&self) -> &EstimatorKind {
        &self.kind
    }

    pub fn num_predictors(&self) -> usize {
        self.num_predictors
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.rule, Rule::Point(_))
    }

    /// The selected predictor, for deterministic estimators.
    pub fn point(&self, sample: &[usize]) -> Option<usize> {
        match &self.rule {
            Rule::Point(r) => Some(r(sample)),
            Rule::Mixture(_) => None,
        }
    }

    /// Dense posterior masses.
    pub fn masses(&self, sample: &[usize]) -> Vec<f64> {
        match &self.rule {
            Rule::Point(r) => {
                let mut m = vec![0.0; self.num_predictors];
                m[r(sample)] = 1.0;
                m
            }
            Rule::Mixture(r) => r(sample),
        }
    }

    /// Predictors with positive posterior mass, with their masses.
    pub fn support(&self, sample: &[usize]) -> Vec<(usize, f64)> {
        match &self.rule {
            Rule::Point(r) => vec![(r(sample), 1.0)],
            Rule::Mixture(r) => r(sample)
                .into_iter()
                .enumerate()
                .filter(|&(_, m)| m > 0.0)
                .collect(),
        }
    }

    /// Posterior mass of each block of `partition`.
    pub fn block_masses(&self, sample: &[usize], partition: &Partition) -> Vec<f64> {
        let mut out = vec![0.0; partition.num_blocks()];
        for (f, m) in self.support(sample) {
            out[partition.block_of(f)] += m;
        }
        out
    }

    /// Posterior conditioned on a block, Π̂(· | z^n, k). Where the block has
    /// zero posterior mass the conditional is uniform on the block.
    pub fn conditional(&self, partition: &Partition, block: usize) -> Estimator {
        let parent = self.clone();
        let members: Vec<usize> = partition.block(block).to_vec();
        let m = self.num_predictors;
        Estimator::randomized(EstimatorKind::Conditional { block }, m, move |sample| {
            let all = parent.masses(sample);
            let total: f64 = members.iter().map(|&f| all[f]).sum();
            let mut out = vec![0.0; m];
            if total > 0.0 {
                for &f in &members {
                    out[f] = all[f] / total;
                }
            } else {
                for &f in &members {
                    out[f] = 1.0 / members.len() as f64;
                }
            }
            out
        })
    }
}

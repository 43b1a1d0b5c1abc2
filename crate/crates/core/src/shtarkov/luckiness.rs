use std::sync::Arc;

use crate::error::{Error, Result};

use super::estimator::Estimator;
use super::partition::Partition;

/// Luckiness function w(z^n, f) ≥ 0, evaluated in log space.
#[derive(Debug, Clone)]
pub enum Luckiness {
    /// w ≡ c.
    Constant(f64),
    /// w(z^n, f) = π(f)/π̂(f | z^n).
    PriorRatio { prior: Vec<f64>, estimator: Estimator },
    /// w(z^n) = exp(−Γ(f̂(z^n))) for a deterministic f̂.
    Penalty { gamma: Vec<f64>, estimator: Estimator },
    /// w(z^n, f) = w_k(z^n, f)·π_K(k)/π̂_K(k | z^n) for f in block k.
    Composite(Arc<Composite>),
    /// c·w for an inner luckiness.
    Scaled { log_scale: f64, inner: Arc<Luckiness> },
}

#[derive(Debug, Clone)]
pub struct Composite {
    pub partition: Partition,
    pub block_prior: Vec<f64>,
    pub estimator: Estimator,
    pub blocks: Vec<Luckiness>,
}

/// Checks that masses form a probability vector.
pub fn validate_prior(masses: &[f64], len: usize, what: &str) -> Result<()> {
    if masses.len() != len {
        return Err(Error::DegeneratePrior(format!("{what} has {} entries, expected {len}", masses.len())));
    }
    if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::DegeneratePrior(format!("{what} has a negative or non-finite mass")));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::DegeneratePrior(format!("{what} sums to {total}")));
    }
    Ok(())
}

impl Luckiness {
    pub fn one() -> Self {
        Luckiness::Constant(1.0)
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidConfig(format!("constant luckiness {c} must be finite and nonnegative")));
        }
        Ok(Luckiness::Constant(c))
    }

    pub fn prior_ratio(prior: Vec<f64>, estimator: Estimator) -> Result<Self> {
        validate_prior(&prior, estimator.num_predictors(), "prior")?;
        Ok(Luckiness::PriorRatio { prior, estimator })
    }

    pub fn penalty(gamma: Vec<f64>, estimator: Estimator) -> Result<Self> {
        if !estimator.is_deterministic() {
            return Err(Error::RequiresDeterministic("penalty luckiness"));
        }
        if gamma.len() != estimator.num_predictors() || gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidConfig("penalty must be finite, one value per predictor".into()));
        }
        Ok(Luckiness::Penalty { gamma, estimator })
    }

    pub fn composite(
        partition: Partition,
        block_prior: Vec<f64>,
        estimator: Estimator,
        blocks: Vec<Luckiness>,
    ) -> Result<Self> {
        partition.check_size(estimator.num_predictors())?;
        validate_prior(&block_prior, partition.num_blocks(), "block prior")?;
        if blocks.len() != partition.num_blocks() {
            return Err(Error::BadPartition(format!(
                "{} sub-luckiness functions for {} blocks",
                blocks.len(),
                partition.num_blocks()
            )));
        }
        Ok(Luckiness::Composite(Arc::new(Composite { partition, block_prior, estimator, blocks })))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidConfig(format!("scale {c} must be positive")));
        }
        Ok(Luckiness::Scaled { log_scale: c.ln(), inner: Arc::new(self.clone()) })
    }

    /// True when w(z^n, f) does not depend on f.
    pub fn ignores_predictor(&self) -> bool {
        match self {
            Luckiness::Constant(_) | Luckiness::Penalty { .. } => true,
            Luckiness::PriorRatio { .. } | Luckiness::Composite(_) => false,
            Luckiness::Scaled { inner, .. } => inner.ignores_predictor(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Luckiness::Constant(c) => format!("const({c})"),
            Luckiness::PriorRatio { .. } => "prior-ratio".into(),
            Luckiness::Penalty { .. } => "penalty".into(),
            Luckiness::Composite(c) => format!("composite({} blocks)", c.partition.num_blocks()),
            Luckiness::Scaled { log_scale, inner } => format!("{}*{}", log_scale.exp(), inner.label()),
        }
    }

    /// ln w(z^n, f). May be −∞ (w = 0) or +∞ off the estimator's support.
    pub fn log_eval(&self, sample: &[usize], f: usize) -> f64 {
        self.log_eval_many(sample, &[f])[0]
    }

    pub fn eval(&self, sample: &[usize], f: usize) -> f64 {
        self.log_eval(sample, f).exp()
    }

    /// ln w(z^n, f) for several f, sharing per-sample work.
    pub fn log_eval_many(&self, sample: &[usize], fs: &[usize]) -> Vec<f64> {
        match self {
            Luckiness::Constant(c) => vec![c.ln(); fs.len()],
            Luckiness::PriorRatio { prior, estimator } => {
                let post = estimator.masses(sample);
                fs.iter()
                    .map(|&f| {
                        if post[f] > 0.0 {
                            prior[f].ln() - post[f].ln()
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            }
            Luckiness::Penalty { gamma, estimator } => {
                let fhat = estimator.point(sample).expect("penalty estimator is deterministic");
                vec![-gamma[fhat]; fs.len()]
            }
            Luckiness::Composite(c) => {
                let block_post = c.estimator.block_masses(sample, &c.partition);
                fs.iter()
                    .map(|&f| {
                        let k = c.partition.block_of(f);
                        if block_post[k] <= 0.0 {
                            return f64::INFINITY;
                        }
                        c.blocks[k].log_eval(sample, f) + c.block_prior[k].ln() - block_post[k].ln()
                    })
                    .collect()
            }
            Luckiness::Scaled { log_scale, inner } => {
                inner.log_eval_many(sample, fs).into_iter().map(|v| v + log_scale).collect()
            }
        }
    }
}

//! Loading problems and the small JSON side files.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use unicomp::estimators::{generalized_bayes, penalized_erm, PenaltyFunction, PriorOverClass};
use unicomp::harness::{generate, GeneratorSpec, ThresholdGrid};
use unicomp::shtarkov::ml_estimator;
use unicomp::{build_problem, BuildOptions, EntropifiedModel, Estimator, LearningProblem, Luckiness, Partition, ProblemSpec};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// A problem plus whatever structure its generator attached.
pub struct Loaded {
    pub problem: LearningProblem,
    pub threshold: Option<ThresholdGrid>,
    pub partition: Option<Partition>,
}

pub fn load(problem: Option<&Path>, generator: Option<&Path>, allow_unscaled: bool) -> Result<Option<Loaded>> {
    match (problem, generator) {
        (Some(_), Some(_)) => bail!("--problem and --generator are mutually exclusive"),
        (Some(path), None) => {
            let spec: ProblemSpec = read_json(path)?;
            let problem = build_problem(&spec, BuildOptions { allow_unscaled })?;
            Ok(Some(Loaded { problem, threshold: None, partition: None }))
        }
        (None, Some(path)) => {
            let spec: GeneratorSpec = read_json(path)?;
            let g = generate(&spec)?;
            Ok(Some(Loaded { problem: g.problem, threshold: g.threshold, partition: g.partition }))
        }
        (None, None) => Ok(None),
    }
}

pub fn require(loaded: Option<Loaded>) -> Result<Loaded> {
    loaded.context("a problem is required: pass --problem <file.json> or --generator <file.json>")
}

pub fn read_prior(path: &Path) -> Result<PriorOverClass> {
    let masses: Vec<f64> = read_json(path)?;
    Ok(PriorOverClass::new(masses)?)
}

pub fn read_penalty(path: &Path) -> Result<PenaltyFunction> {
    let p: PenaltyFunction = read_json(path)?;
    Ok(PenaltyFunction::new(p.gamma)?)
}

pub fn read_partition(path: &Path, num_predictors: usize) -> Result<Partition> {
    let p: Partition = read_json(path)?;
    p.check_size(num_predictors)?;
    Ok(p)
}

#[derive(Deserialize)]
struct CompositeFile {
    blocks: Vec<Vec<usize>>,
    block_prior: Vec<f64>,
}

pub fn read_composite(path: &Path, num_predictors: usize) -> Result<(Partition, Vec<f64>)> {
    let c: CompositeFile = read_json(path)?;
    Ok((Partition::new(c.blocks, num_predictors)?, c.block_prior))
}

/// Comma-separated list, e.g. `0,1,1` or `0.25,0.5`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| anyhow::anyhow!("bad list entry {t:?}: {e}")))
        .collect()
}

/// Estimator and luckiness selection shared by several subcommands.
#[derive(Debug, Clone, clap::Args)]
pub struct Pairing {
    /// erm | bayes | penalized | ml | fstar | dirac:<i>
    #[arg(long, default_value = "erm")]
    pub estimator: String,
    /// const[:c] | prior-ratio | penalty[:<file>] | composite:<file>
    #[arg(long, default_value = "const")]
    pub luckiness: String,
    /// JSON array of prior masses over predictors (default uniform).
    #[arg(long)]
    pub prior: Option<std::path::PathBuf>,
    /// JSON penalty file {"gamma": [...]}.
    #[arg(long)]
    pub penalty: Option<std::path::PathBuf>,
}

impl Pairing {
    pub fn prior(&self, m: usize) -> Result<PriorOverClass> {
        match &self.prior {
            Some(p) => {
                let prior = read_prior(p)?;
                if prior.len() != m {
                    bail!("prior has {} masses for {m} predictors", prior.len());
                }
                Ok(prior)
            }
            None => Ok(PriorOverClass::uniform(m)),
        }
    }

    fn penalty_at(&self, path: Option<&Path>) -> Result<PenaltyFunction> {
        let path = path.or(self.penalty.as_deref()).context("a penalty file is required (--penalty <file>)")?;
        read_penalty(path)
    }

    pub fn estimator(&self, model: &EntropifiedModel<'_>) -> Result<Estimator> {
        let problem = model.problem();
        let m = problem.num_predictors();
        let eta = problem.eta();
        Ok(match self.estimator.as_str() {
            "erm" => unicomp::estimators::erm(problem),
            "bayes" => generalized_bayes(problem, &self.prior(m)?, eta)?,
            "penalized" => penalized_erm(problem, &self.penalty_at(None)?, eta)?,
            "ml" => ml_estimator(model),
            "fstar" => Estimator::dirac(problem.fstar(), m),
            other => match other.strip_prefix("dirac:") {
                Some(i) => {
                    let i: usize = i.parse().with_context(|| format!("bad predictor index in {other:?}"))?;
                    problem.check_predictor(i)?;
                    Estimator::dirac(i, m)
                }
                None => bail!("unknown estimator {other:?}"),
            },
        })
    }

    pub fn luckiness(&self, problem: &LearningProblem, est: &Estimator) -> Result<Luckiness> {
        let m = problem.num_predictors();
        let spec = self.luckiness.as_str();
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        Ok(match (head, arg) {
            ("const", None) => Luckiness::one(),
            ("const", Some(c)) => Luckiness::constant(c.parse().with_context(|| format!("bad constant {c:?}"))?)?,
            ("prior-ratio", None) => Luckiness::prior_ratio(self.prior(m)?.masses().to_vec(), est.clone())?,
            ("penalty", file) => {
                let gamma = self.penalty_at(file.map(Path::new))?.gamma;
                Luckiness::penalty(gamma, est.clone())?
            }
            ("composite", Some(file)) => {
                let (partition, block_prior) = read_composite(Path::new(file), m)?;
                let k = partition.num_blocks();
                Luckiness::composite(partition, block_prior, est.clone(), vec![Luckiness::one(); k])?
            }
            _ => bail!("unknown luckiness {spec:?}"),
        })
    }
}

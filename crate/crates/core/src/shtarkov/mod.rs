//! Shtarkov integrals and the complexities built from them.
//!
//! Every variant reduces to the generalized integral
//!
//! ```text
//! S(F, Π̂, w) = E_{Z^n ~ P} exp(−E_{f ~ Π̂|Z^n}[ηR_f(Z^n) + ln C(f) − ln w(Z^n, f)])
//! ```
//!
//! with a Dirac estimator for the deterministic forms and w ≡ 1 for the plain
//! one. Note that ηR_f + ln C(f) does not depend on the reference predictor,
//! so integrals over sub-classes can reuse the full model's tables.

mod estimator;
mod luckiness;
mod partition;

pub use estimator::{Estimator, EstimatorKind};
pub use luckiness::{validate_prior, Composite, Luckiness};
pub use partition::Partition;

use serde::{Deserialize, Serialize};

use crate::entropify::EntropifiedModel;
use crate::error::{Error, Result};
use crate::logspace::LogAccumulator;
use crate::measure::{
    exact_fold, exact_log_expectation, mc_expectation, ComputeConfig, Method, ProductMeasure,
};
use crate::report::{Relation, VerificationResult, WorstCase};

pub const CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Finite,
    /// ln S is +∞ (or S = 0); downstream complexities are not meaningful.
    InfiniteShtarkov,
    /// w(z^n) = 0 at the requested sample; comp is +∞.
    ZeroLuckiness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Simple,
    Maximal,
    Luckiness,
    Generalized,
}

/// A Shtarkov integral and the complexity derived from it.
///
/// `comp` is `log_shtarkov / eta` plus, when a sample was supplied, the
/// luckiness term `E_Π̂[−ln w(z^n, f)] / eta` for that sample.
/// `std_error` is the standard error of the Monte Carlo estimate of S itself
/// (linear scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub variant: Variant,
    pub eta: f64,
    pub log_shtarkov: f64,
    pub comp: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comp_full: Option<f64>,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub status: Status,
}

/// Per-sample posterior averages entering the generalized complexity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleTerms {
    /// E_Π̂[R_f(z^n)].
    pub expected_excess: f64,
    /// E_Π̂[ln C(f)].
    pub expected_log_normalizer: f64,
    /// E_Π̂[−ln w(z^n, f)].
    pub expected_neg_log_w: f64,
    /// E_Π̂[ηR_f(z^n) + ln C(f)] computed per predictor.
    pub expected_gap: f64,
}

impl SampleTerms {
    /// ln of the Shtarkov integrand at this sample.
    pub fn log_integrand(&self) -> f64 {
        let v = -(self.expected_gap + self.expected_neg_log_w);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

pub fn sample_terms(model: &EntropifiedModel<'_>, est: &Estimator, w: &Luckiness, sample: &[usize]) -> SampleTerms {
    let support = est.support(sample);
    let fs: Vec<usize> = support.iter().map(|&(f, _)| f).collect();
    let logw = w.log_eval_many(sample, &fs);
    let eta = model.eta();
    let mut t = SampleTerms {
        expected_excess: 0.0,
        expected_log_normalizer: 0.0,
        expected_neg_log_w: 0.0,
        expected_gap: 0.0,
    };
    for (&(f, m), lw) in support.iter().zip(logw) {
        let r = model.excess_loss(f, sample);
        let lc = model.log_normalizer(f);
        t.expected_excess += m * r;
        t.expected_log_normalizer += m * lc;
        t.expected_gap += m * (eta * r + lc);
        t.expected_neg_log_w += m * -lw;
    }
    t
}

fn log_shtarkov_of<H>(model: &EntropifiedModel<'_>, cfg: &ComputeConfig, h: H) -> Result<(f64, Method, Option<f64>)>
where
    H: Fn(&[usize]) -> f64 + Sync,
{
    let measure = ProductMeasure::of_problem(model.problem());
    match exact_log_expectation(&measure, cfg, &h) {
        Ok(v) => Ok((v, Method::Exact, None)),
        Err(Error::EnumerationCapExceeded { .. }) => {
            let e = mc_expectation(&measure, &cfg.mc, |s| h(s).exp())?;
            Ok((e.value.ln(), Method::MonteCarlo, e.std_error))
        }
        Err(e) => Err(e),
    }
}

fn status_of(log_s: f64) -> Status {
    if log_s.is_finite() {
        Status::Finite
    } else {
        Status::InfiniteShtarkov
    }
}

/// A computed generalized Shtarkov integral together with the estimator and
/// luckiness it belongs to, ready for per-sample complexity queries.
#[derive(Debug, Clone)]
pub struct GeneralizedComplexity<'m, 'p> {
    model: &'m EntropifiedModel<'p>,
    estimator: Estimator,
    luckiness: Luckiness,
    log_shtarkov: f64,
    method: Method,
    std_error: Option<f64>,
}

impl<'m, 'p> GeneralizedComplexity<'m, 'p> {
    pub fn compute(
        model: &'m EntropifiedModel<'p>,
        estimator: &Estimator,
        luckiness: &Luckiness,
        cfg: &ComputeConfig,
    ) -> Result<Self> {
        if estimator.num_predictors() != model.num_predictors() {
            return Err(Error::InvalidConfig("estimator and model sizes differ".into()));
        }
        let (log_shtarkov, method, std_error) = log_shtarkov_of(model, cfg, |s| {
            sample_terms(model, estimator, luckiness, s).log_integrand()
        })?;
        Ok(Self {
            model,
            estimator: estimator.clone(),
            luckiness: luckiness.clone(),
            log_shtarkov,
            method,
            std_error,
        })
    }

    pub fn model(&self) -> &'m EntropifiedModel<'p> {
        self.model
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    pub fn luckiness(&self) -> &Luckiness {
        &self.luckiness
    }

    pub fn log_shtarkov(&self) -> f64 {
        self.log_shtarkov
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn std_error(&self) -> Option<f64> {
        self.std_error
    }

    pub fn status(&self) -> Status {
        status_of(self.log_shtarkov)
    }

    pub fn terms(&self, sample: &[usize]) -> SampleTerms {
        sample_terms(self.model, &self.estimator, &self.luckiness, sample)
    }

    /// (1/η)(E_Π̂[−ln w(z^n, f)] + ln S).
    pub fn comp(&self, sample: &[usize]) -> f64 {
        let t = self.terms(sample);
        (t.expected_neg_log_w + self.log_shtarkov) / self.model.eta()
    }

    /// comp + E_Π̂[R_f(z^n)].
    pub fn comp_full(&self, sample: &[usize]) -> f64 {
        let t = self.terms(sample);
        (t.expected_neg_log_w + self.log_shtarkov) / self.model.eta() + t.expected_excess
    }

    pub fn report(&self, variant: Variant, sample: Option<&[usize]>) -> ComplexityReport {
        let eta = self.model.eta();
        let (comp, comp_full, status) = match sample {
            None => (self.log_shtarkov / eta, None, self.status()),
            Some(s) => {
                let t = self.terms(s);
                let comp = (t.expected_neg_log_w + self.log_shtarkov) / eta;
                let status = if self.status() != Status::Finite {
                    self.status()
                } else if t.expected_neg_log_w == f64::INFINITY {
                    Status::ZeroLuckiness
                } else {
                    Status::Finite
                };
                (comp, Some(comp + t.expected_excess), status)
            }
        };
        ComplexityReport {
            variant,
            eta,
            log_shtarkov: self.log_shtarkov,
            comp,
            comp_full,
            method: self.method,
            std_error: self.std_error,
            status,
        }
    }
}

/// S(F, f̂) and comp(F, f̂) for a deterministic estimator.
pub fn shtarkov_simple(model: &EntropifiedModel<'_>, est: &Estimator, cfg: &ComputeConfig) -> Result<ComplexityReport> {
    if !est.is_deterministic() {
        return Err(Error::RequiresDeterministic("simple Shtarkov integral"));
    }
    Ok(GeneralizedComplexity::compute(model, est, &Luckiness::one(), cfg)?.report(Variant::Simple, None))
}

/// S(F, f̂, w) for a deterministic estimator and predictor-free w.
pub fn shtarkov_luckiness(
    model: &EntropifiedModel<'_>,
    est: &Estimator,
    w: &Luckiness,
    cfg: &ComputeConfig,
) -> Result<ComplexityReport> {
    if !est.is_deterministic() {
        return Err(Error::RequiresDeterministic("luckiness Shtarkov integral"));
    }
    if !w.ignores_predictor() {
        return Err(Error::RequiresPredictorFree("luckiness Shtarkov integral"));
    }
    Ok(GeneralizedComplexity::compute(model, est, w, cfg)?.report(Variant::Luckiness, None))
}

/// (1/η)(−ln w(z^n) + ln S(F, f̂, w)); +∞ when w(z^n) = 0.
pub fn comp_luckiness(
    model: &EntropifiedModel<'_>,
    est: &Estimator,
    w: &Luckiness,
    sample: &[usize],
    cfg: &ComputeConfig,
) -> Result<f64> {
    shtarkov_luckiness(model, est, w, cfg)?;
    model.problem().check_sample(sample)?;
    Ok(GeneralizedComplexity::compute(model, est, w, cfg)?.comp(sample))
}

/// S(F, Π̂, w) for any estimator.
pub fn shtarkov_generalized(
    model: &EntropifiedModel<'_>,
    est: &Estimator,
    w: &Luckiness,
    cfg: &ComputeConfig,
) -> Result<ComplexityReport> {
    Ok(GeneralizedComplexity::compute(model, est, w, cfg)?.report(Variant::Generalized, None))
}

pub fn comp_generalized(
    model: &EntropifiedModel<'_>,
    est: &Estimator,
    w: &Luckiness,
    sample: &[usize],
    cfg: &ComputeConfig,
) -> Result<f64> {
    model.problem().check_sample(sample)?;
    Ok(GeneralizedComplexity::compute(model, est, w, cfg)?.comp(sample))
}

pub fn comp_full(
    model: &EntropifiedModel<'_>,
    est: &Estimator,
    w: &Luckiness,
    sample: &[usize],
    cfg: &ComputeConfig,
) -> Result<f64> {
    model.problem().check_sample(sample)?;
    Ok(GeneralizedComplexity::compute(model, est, w, cfg)?.comp_full(sample))
}

/// Maximal complexity and the maximum-likelihood estimator table.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxComplexity {
    pub report: ComplexityReport,
    /// argmax_f q_f(z^n) for every sample, in enumeration order.
    pub ml_table: Vec<usize>,
}

/// The estimator z^n ↦ argmax_f q_f(z^n), ties to the lowest index.
pub fn ml_estimator(model: &EntropifiedModel<'_>) -> Estimator {
    let m = model.num_predictors();
    let k = model.problem().num_outcomes();
    let eta = model.eta();
    let n = model.n() as f64;
    let excess: Vec<Vec<f64>> = (0..m).map(|f| (0..k).map(|z| model.excess(f, z)).collect()).collect();
    let log_c1: Vec<f64> = (0..m).map(|f| model.log_c1(f)).collect();
    Estimator::deterministic(EstimatorKind::MaximumLikelihood, m, move |sample| {
        let mut best = (0, f64::INFINITY);
        for f in 0..m {
            let gap = eta * sample.iter().map(|&z| excess[f][z]).sum::<f64>() + n * log_c1[f];
            if gap < best.1 {
                best = (f, gap);
            }
        }
        best.0
    })
}

fn max_log_q_ratio(model: &EntropifiedModel<'_>, subset: &[usize], sample: &[usize]) -> f64 {
    subset
        .iter()
        .map(|&f| -model.codelength_gap(f, sample))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// comp(F_sub) = (1/η) ln ∫ sup_{f ∈ F_sub} q_f dν. Exact only.
pub fn comp_max_within(model: &EntropifiedModel<'_>, subset: &[usize], cfg: &ComputeConfig) -> Result<ComplexityReport> {
    if subset.is_empty() {
        return Err(Error::InvalidConfig("empty predictor subset".into()));
    }
    for &f in subset {
        model.problem().check_predictor(f)?;
    }
    let measure = ProductMeasure::of_problem(model.problem());
    let log_s = exact_log_expectation(&measure, cfg, |s| max_log_q_ratio(model, subset, s))?;
    Ok(ComplexityReport {
        variant: Variant::Maximal,
        eta: model.eta(),
        log_shtarkov: log_s,
        comp: log_s / model.eta(),
        comp_full: None,
        method: Method::Exact,
        std_error: None,
        status: status_of(log_s),
    })
}

pub fn comp_max(model: &EntropifiedModel<'_>, cfg: &ComputeConfig) -> Result<MaxComplexity> {
    let all: Vec<usize> = (0..model.num_predictors()).collect();
    let report = comp_max_within(model, &all, cfg)?;
    let ml = ml_estimator(model);
    let measure = ProductMeasure::of_problem(model.problem());
    let ml_table = exact_fold(
        &measure,
        cfg,
        true,
        Vec::new,
        |acc: &mut Vec<usize>, s| acc.push(ml.point(s.outcomes).expect("deterministic")),
        |a, b| a.extend(b),
    )?;
    Ok(MaxComplexity { report, ml_table })
}

/// Prediction-strategy density r_w over all samples, in log space with
/// respect to ν^n and in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct NmlDensity {
    pub log_shtarkov: f64,
    pub log_density: Vec<f64>,
    pub log_nu: Vec<f64>,
}

impl NmlDensity {
    /// ∫ r_w dν^n; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        let mut acc = LogAccumulator::new();
        for (r, nu) in self.log_density.iter().zip(&self.log_nu) {
            acc.add(r + nu);
        }
        acc.value().exp()
    }
}

pub fn nml_density(model: &EntropifiedModel<'_>, est: &Estimator, w: &Luckiness, cfg: &ComputeConfig) -> Result<NmlDensity> {
    let gc = GeneralizedComplexity::compute(model, est, w, cfg)?;
    if !gc.log_shtarkov.is_finite() {
        return Err(Error::InfiniteShtarkov(gc.log_shtarkov));
    }
    let measure = ProductMeasure::of_problem(model.problem());
    let log_s = gc.log_shtarkov;
    let (log_density, log_nu) = exact_fold(
        &measure,
        cfg,
        true,
        || (Vec::new(), Vec::new()),
        |acc: &mut (Vec<f64>, Vec<f64>), s| {
            let a = gc.terms(s.outcomes).log_integrand();
            let v = if s.log_prob == f64::NEG_INFINITY { f64::NEG_INFINITY } else { s.log_prob - s.log_nu + a - log_s };
            acc.0.push(v);
            acc.1.push(s.log_nu);
        },
        |a, b| {
            a.0.extend(b.0);
            a.1.extend(b.1);
        },
    )?;
    Ok(NmlDensity { log_shtarkov: log_s, log_density, log_nu })
}

/// comp(F, f̂) ≤ ln|K|/η + max_k comp(F_k).
pub fn partition_bound_check(
    model: &EntropifiedModel<'_>,
    partition: &Partition,
    est: &Estimator,
    cfg: &ComputeConfig,
) -> Result<VerificationResult> {
    partition.check_size(model.num_predictors())?;
    let lhs = shtarkov_simple(model, est, cfg)?.comp;
    let mut worst_block = f64::NEG_INFINITY;
    for block in partition.blocks() {
        worst_block = worst_block.max(comp_max_within(model, block, cfg)?.comp);
    }
    let rhs = (partition.num_blocks() as f64).ln() / model.eta() + worst_block;
    Ok(VerificationResult::leq("partition-bound", lhs, rhs, CHECK_TOL)
        .with_note(format!("{} blocks, max block comp {worst_block}", partition.num_blocks())))
}

/// For the composite luckiness built from `block_prior` and `sub_w`, checks
/// comp(F, Π̂, w, z^n) ≤ KL(Π̂_K ‖ π_K)/η + E_{k ~ Π̂_K} comp(F_k, Π̂_{|k}, w_k, z^n)
/// at every sample.
pub fn composite_decomposition_check(
    model: &EntropifiedModel<'_>,
    partition: &Partition,
    block_prior: &[f64],
    sub_w: &[Luckiness],
    est: &Estimator,
    cfg: &ComputeConfig,
) -> Result<VerificationResult> {
    partition.check_size(model.num_predictors())?;
    let w = Luckiness::composite(partition.clone(), block_prior.to_vec(), est.clone(), sub_w.to_vec())?;
    let global = GeneralizedComplexity::compute(model, est, &w, cfg)?;
    let blocks = (0..partition.num_blocks())
        .map(|k| GeneralizedComplexity::compute(model, &est.conditional(partition, k), &sub_w[k], cfg))
        .collect::<Result<Vec<_>>>()?;
    let eta = model.eta();
    let measure = ProductMeasure::of_problem(model.problem());
    let worst = exact_fold(
        &measure,
        cfg,
        false,
        || (WorstCase::new(Relation::LessEq), None::<usize>),
        |(acc, bad), s| {
            let post = est.block_masses(s.outcomes, partition);
            let mut kl = 0.0;
            let mut expected = 0.0;
            for (k, &m) in post.iter().enumerate() {
                if m > 0.0 {
                    if block_prior[k] <= 0.0 {
                        bad.get_or_insert(k);
                    }
                    kl += m * (m.ln() - block_prior[k].ln());
                    expected += m * blocks[k].comp(s.outcomes);
                }
            }
            acc.push(global.comp(s.outcomes), kl / eta + expected, s.index);
        },
        |a, b| {
            a.0.merge(b.0);
            if a.1.is_none() {
                a.1 = b.1;
            }
        },
    )?;
    if let Some(k) = worst.1 {
        return Err(Error::DegeneratePrior(format!("block prior is zero on block {k} with posterior mass")));
    }
    Ok(worst.0.finish("composite-decomposition", CHECK_TOL))
}

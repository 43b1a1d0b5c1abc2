//! Exponential stochastic inequalities and the conditions that feed them.
//!
//! `lhs ⊴_η rhs` means E[e^{η(lhs − rhs)}] ≤ 1 over Z^n ~ P. The moment is
//! computed in log space by exact enumeration when feasible and by seeded
//! Monte Carlo otherwise.

use serde::{Deserialize, Serialize};

use crate::entropify::{annealed_expectation, EntropifiedModel};
use crate::error::{Error, Result};
use crate::measure::{
    exact_fold, exact_log_expectation, mc_expectation, ComputeConfig, Estimate, Method, ProductMeasure,
};
use crate::problem::LearningProblem;
use crate::report::{Relation, VerificationResult};
use crate::shtarkov::{Estimator, GeneralizedComplexity, Luckiness};

pub type SampleFn<'a> = Box<dyn Fn(&[usize]) -> f64 + Send + Sync + 'a>;

/// Tolerance for exact ESI moments.
pub const ESI_TOL: f64 = 1e-10;
/// Tolerance for the exact excess-risk identity.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Monte Carlo checks allow this many standard errors.
pub const MC_SIGMAS: f64 = 4.0;

/// lhs ⊴_η rhs, or the equality form when `strict_equality` is set.
pub struct EsiStatement<'a> {
    pub name: String,
    pub lhs: SampleFn<'a>,
    pub rhs: SampleFn<'a>,
    pub eta: f64,
    pub strict_equality: bool,
}

impl<'a> EsiStatement<'a> {
    pub fn new<L, R>(name: impl Into<String>, lhs: L, rhs: R, eta: f64) -> Result<Self>
    where
        L: Fn(&[usize]) -> f64 + Send + Sync + 'a,
        R: Fn(&[usize]) -> f64 + Send + Sync + 'a,
    {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidConfig(format!("ESI rate {eta} must be positive")));
        }
        Ok(Self { name: name.into(), lhs: Box::new(lhs), rhs: Box::new(rhs), eta, strict_equality: false })
    }

    pub fn equality(mut self) -> Self {
        self.strict_equality = true;
        self
    }

    fn exponent(&self, sample: &[usize]) -> f64 {
        let d = (self.lhs)(sample) - (self.rhs)(sample);
        if d.is_nan() {
            // Both sides infinite in the same direction.
            0.0
        } else {
            self.eta * d
        }
    }
}

/// E_{Z^n ~ P}[e^{η(lhs − rhs)}].
pub fn esi_moment(problem: &LearningProblem, stmt: &EsiStatement<'_>, cfg: &ComputeConfig) -> Result<Estimate> {
    let measure = ProductMeasure::of_problem(problem);
    match exact_log_expectation(&measure, cfg, |s| stmt.exponent(s)) {
        Ok(v) => Ok(Estimate::exact(v.exp())),
        Err(Error::EnumerationCapExceeded { .. }) => mc_expectation(&measure, &cfg.mc, |s| stmt.exponent(s).exp()),
        Err(e) => Err(e),
    }
}

/// Certify the statement: moment ≤ 1 (or = 1) within `tol` when exact and
/// within four standard errors under Monte Carlo.
pub fn esi_check(problem: &LearningProblem, stmt: &EsiStatement<'_>, tol: f64, cfg: &ComputeConfig) -> Result<VerificationResult> {
    let m = esi_moment(problem, stmt, cfg)?;
    let tol = match m.method {
        Method::Exact => tol,
        Method::MonteCarlo => MC_SIGMAS * m.std_error.unwrap_or(f64::INFINITY),
    };
    let relation = if stmt.strict_equality { Relation::Equal } else { Relation::LessEq };
    Ok(VerificationResult::new(format!("esi:{}", stmt.name), relation, m.value, 1.0, tol)
        .with_note(format!("rate {} ({:?})", stmt.eta, m.method)))
}

/// lhs = E_{Π̂}[annealed excess risk], rhs = comp_full/n at rate nη.
pub fn theorem1_statement<'a>(gc: &'a GeneralizedComplexity<'_, '_>) -> Result<EsiStatement<'a>> {
    let model = gc.model();
    let n = model.n() as f64;
    let eta = model.eta();
    let ann: Vec<f64> = (0..model.num_predictors()).map(|f| -model.log_c1(f) / eta).collect();
    let est = gc.estimator().clone();
    Ok(EsiStatement::new(
        "theorem1",
        move |s| est.support(s).into_iter().map(|(f, m)| m * ann[f]).sum(),
        move |s| gc.comp_full(s) / n,
        n * eta,
    )?
    .equality())
}

/// Certify E[exp(nη(E_Π̂[ann(f)] − comp_full/n))] = 1.
pub fn theorem1_identity(model: &EntropifiedModel<'_>, est: &Estimator, w: &Luckiness, cfg: &ComputeConfig) -> Result<VerificationResult> {
    let gc = GeneralizedComplexity::compute(model, est, w, cfg)?;
    if !gc.log_shtarkov().is_finite() {
        return Err(Error::InfiniteShtarkov(gc.log_shtarkov()));
    }
    let stmt = theorem1_statement(&gc)?;
    let r = esi_check(model.problem(), &stmt, IDENTITY_TOL, cfg)?;
    Ok(VerificationResult { name: "theorem1".into(), ..r })
}

/// Mean and tail consequences of an ESI, by enumeration:
/// E[lhs] ≤ E[rhs] and P(lhs > rhs + K/η) ≤ e^{−K} for K = 1, 2, 3.
pub fn esi_implications_check(problem: &LearningProblem, stmt: &EsiStatement<'_>, cfg: &ComputeConfig) -> Result<VerificationResult> {
    const KS: [f64; 3] = [1.0, 2.0, 3.0];
    let measure = ProductMeasure::of_problem(problem);
    let eta = stmt.eta;
    let (mean_l, mean_r, tails) = exact_fold(
        &measure,
        cfg,
        false,
        || (0.0, 0.0, [0.0; 3]),
        |acc: &mut (f64, f64, [f64; 3]), s| {
            let p = s.log_prob.exp();
            let l = (stmt.lhs)(s.outcomes);
            let r = (stmt.rhs)(s.outcomes);
            acc.0 += p * l;
            acc.1 += p * r;
            for (t, k) in acc.2.iter_mut().zip(KS) {
                if l > r + k / eta {
                    *t += p;
                }
            }
        },
        |a, b| {
            a.0 += b.0;
            a.1 += b.1;
            for i in 0..3 {
                a.2[i] += b.2[i];
            }
        },
    )?;
    let mut parts = vec![VerificationResult::leq(format!("{}:mean", stmt.name), mean_l, mean_r, ESI_TOL)];
    for (t, k) in tails.iter().zip(KS) {
        parts.push(VerificationResult::leq(format!("{}:tail K={k}", stmt.name), *t, (-k).exp(), ESI_TOL));
    }
    Ok(VerificationResult::all(format!("esi-implications:{}", stmt.name), &parts))
}

/// E[R_f²] ≤ B·E[R_f]^β for all f.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinFit {
    pub beta: f64,
    pub b: f64,
    /// No predictor constrains B (e.g. a singleton class); B is reported as 0.
    pub vacuous: bool,
}

/// Expected excess risks below this are treated as zero.
const ZERO_RISK: f64 = 1e-15;

/// Smallest B with E[R_f²] ≤ B·E[R_f]^β for every f.
pub fn fit_bernstein(problem: &LearningProblem, beta: f64) -> Result<BernsteinFit> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidConfig(format!("beta = {beta} outside [0, 1]")));
    }
    let masses = problem.p().masses();
    let mut b = 0.0f64;
    let mut constrained = false;
    for f in 0..problem.num_predictors() {
        if f == problem.fstar() {
            continue;
        }
        let mean: f64 = (0..masses.len()).map(|z| masses[z] * problem.excess(f, z)).sum();
        let second: f64 = (0..masses.len()).map(|z| masses[z] * problem.excess(f, z).powi(2)).sum();
        if beta == 0.0 {
            b = b.max(second);
            constrained = true;
        } else if mean > ZERO_RISK {
            b = b.max(second / mean.powf(beta));
            constrained = true;
        } else if second > 0.0 {
            return Err(Error::DegenerateExcess);
        }
    }
    Ok(BernsteinFit { beta, b, vacuous: !constrained })
}

/// v(γ) = min(η0·γ^α, cap).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VFunction {
    pub eta0: f64,
    pub alpha: f64,
    pub cap: f64,
}

impl VFunction {
    pub fn new(eta0: f64, alpha: f64) -> Result<Self> {
        if !(eta0 > 0.0) || !(alpha >= 0.0) {
            return Err(Error::InvalidConfig("v-function needs eta0 > 0 and alpha >= 0".into()));
        }
        Ok(Self { eta0, alpha, cap: 1.0 })
    }

    /// v(γ) = min(γ^{1−β}/B, 1) from a Bernstein fit.
    pub fn from_bernstein(fit: &BernsteinFit) -> Self {
        let eta0 = if fit.b > 0.0 { 1.0 / fit.b } else { f64::INFINITY };
        Self { eta0, alpha: 1.0 - fit.beta, cap: 1.0 }
    }

    pub fn eval(&self, gamma: f64) -> f64 {
        (self.eta0 * gamma.powf(self.alpha)).min(self.cap)
    }
}

/// Logarithmic grid from 1e-3 to 0.5.
pub fn default_gamma_grid() -> Vec<f64> {
    let (lo, hi, k) = (1e-3f64.ln(), 0.5f64.ln(), 10);
    (0..k).map(|i| (lo + (hi - lo) * i as f64 / (k - 1) as f64).exp()).collect()
}

/// Worst slack of E[e^{−vR_f}] ≤ e^{vγ} over predictors at one γ.
fn v_central_at(problem: &LearningProblem, v: f64, gamma: f64) -> VerificationResult {
    let masses = problem.p().masses();
    let parts: Vec<VerificationResult> = (0..problem.num_predictors())
        .map(|f| {
            let vals: Vec<f64> = (0..masses.len()).map(|z| problem.excess(f, z)).collect();
            // ln E[e^{−vR}] ≤ vγ  ⇔  −v·annealed_v ≤ vγ.
            let lhs = -v * annealed_expectation(&vals, masses, v);
            VerificationResult::leq(format!("v-central f={f} gamma={gamma}"), lhs, v * gamma, ESI_TOL)
        })
        .collect();
    VerificationResult::all(format!("v-central gamma={gamma}"), &parts)
}

/// E[e^{−v(γ)R_f}] ≤ e^{v(γ)γ} for every f and every γ in the grid, compared
/// in log space.
pub fn v_central_check(problem: &LearningProblem, v: &VFunction, gamma_grid: &[f64]) -> Result<VerificationResult> {
    if gamma_grid.is_empty() {
        return Err(Error::EmptyGrid("gamma grid"));
    }
    if gamma_grid.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidConfig("gamma grid must be positive".into()));
    }
    let parts: Vec<VerificationResult> = gamma_grid.iter().map(|&g| v_central_at(problem, v.eval(g), g)).collect();
    Ok(VerificationResult::all("v-central", &parts))
}

/// E[R_f] ≤ C_η·annealed_η(R_f) + ((C_η − 1)/η)·v(γ)·γ with C_η = 2 + 2η,
/// at η = v(γ)/2 and at η = v(γ)/4.
pub fn kl_renyi_check(problem: &LearningProblem, f: usize, gamma: f64, v: &VFunction) -> Result<VerificationResult> {
    problem.check_predictor(f)?;
    let vg = v.eval(gamma);
    if !v_central_at(problem, vg, gamma).passed() {
        return Err(Error::Precondition(format!("v-central condition fails at gamma = {gamma}")));
    }
    let masses = problem.p().masses();
    let vals: Vec<f64> = (0..masses.len()).map(|z| problem.excess(f, z)).collect();
    let mean: f64 = vals.iter().zip(masses).map(|(r, m)| r * m).sum();
    let parts: Vec<VerificationResult> = [2.0, 4.0]
        .iter()
        .map(|&d| {
            let eta = vg / d;
            let c = 2.0 + 2.0 * eta;
            let rhs = c * annealed_expectation(&vals, masses, eta) + (c - 1.0) / eta * vg * gamma;
            VerificationResult::leq(format!("kl-renyi f={f} gamma={gamma} eta=v/{d}"), mean, rhs, ESI_TOL)
        })
        .collect();
    Ok(VerificationResult::all(format!("kl-renyi f={f} gamma={gamma}"), &parts))
}

/// Both sides of the excess-risk ESI, per enumerated sample, and its
/// certification.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskBound {
    /// E_{Π̂|z^n}[E_P R_f] per sample (enumeration order; empty under MC).
    pub lhs: Vec<f64>,
    /// 3·comp_full_{v(γ)/2}(z^n)/n + 4γ per sample.
    pub rhs: Vec<f64>,
    pub esi: VerificationResult,
}

/// lhs ⊴_{v(γ)n/6} 3·comp_full_{v(γ)/2}/n + 4γ, with the complexity taken at
/// learning rate v(γ)/2.
pub fn risk_bound_eval(
    problem: &LearningProblem,
    est: &Estimator,
    w: &Luckiness,
    gamma: f64,
    v: &VFunction,
    cfg: &ComputeConfig,
) -> Result<RiskBound> {
    let vg = v.eval(gamma);
    if !v_central_at(problem, vg, gamma).passed() {
        return Err(Error::Precondition(format!("v-central condition fails at gamma = {gamma}")));
    }
    let at_rate = problem.with_eta(vg / 2.0)?;
    let model = EntropifiedModel::new(&at_rate);
    let gc = GeneralizedComplexity::compute(&model, est, w, cfg)?;
    let n = problem.n() as f64;
    let risks: Vec<f64> = (0..problem.num_predictors()).map(|f| problem.excess_risk(f)).collect::<Result<_>>()?;
    let lhs = |s: &[usize]| est.support(s).into_iter().map(|(f, m)| m * risks[f]).sum::<f64>();
    let rhs = |s: &[usize]| 3.0 * gc.comp_full(s) / n + 4.0 * gamma;
    let stmt = EsiStatement::new("risk-bound", lhs, rhs, vg * n / 6.0)?;
    let esi = esi_check(problem, &stmt, ESI_TOL, cfg)?;
    let measure = ProductMeasure::of_problem(problem);
    let (l, r) = match exact_fold(
        &measure,
        cfg,
        true,
        || (Vec::new(), Vec::new()),
        |acc: &mut (Vec<f64>, Vec<f64>), s| {
            acc.0.push(lhs(s.outcomes));
            acc.1.push(rhs(s.outcomes));
        },
        |a, b| {
            a.0.extend(b.0);
            a.1.extend(b.1);
        },
    ) {
        Ok(v) => v,
        Err(Error::EnumerationCapExceeded { .. }) => (Vec::new(), Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(RiskBound { lhs: l, rhs: r, esi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{erm, generalized_bayes, PriorOverClass};
    use crate::problem::{FiniteDistribution, OutcomeSpace, PredictorClass};

    fn cfg() -> ComputeConfig {
        ComputeConfig { threads: 1, ..Default::default() }
    }

    fn problem(losses: Vec<Vec<f64>>, p: Vec<f64>, eta: f64, n: usize) -> LearningProblem {
        LearningProblem::new(
            OutcomeSpace::indexed(p.len()).unwrap(),
            FiniteDistribution::new(p).unwrap(),
            PredictorClass::direct(losses).unwrap(),
            eta,
            n,
        )
        .unwrap()
    }

    fn three(eta: f64, n: usize) -> LearningProblem {
        problem(
            vec![vec![0.1, 0.4, 0.2], vec![0.3, 0.0, 0.25], vec![0.2, 0.2, 0.1]],
            vec![0.3, 0.3, 0.4],
            eta,
            n,
        )
    }

    #[test]
    fn equal_sides_have_unit_moment() {
        let p = three(1.0, 2);
        let s = EsiStatement::new("eq", |s| s[0] as f64, |s| s[0] as f64, 1.0).unwrap();
        assert!((esi_moment(&p, &s, &cfg()).unwrap().value - 1.0).abs() < 1e-15);
        let imp = esi_implications_check(&p, &s, &cfg()).unwrap();
        assert!(imp.passed());
        let s = EsiStatement::new("shift", |_| 0.0, |_| 0.3, 2.0).unwrap();
        assert!((esi_moment(&p, &s, &cfg()).unwrap().value - (-0.6f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn theorem1_examples() {
        let p = three(0.5, 2);
        let m = EntropifiedModel::new(&p);
        let star = theorem1_identity(&m, &Estimator::dirac(p.fstar(), 3), &Luckiness::one(), &cfg()).unwrap();
        assert!(star.passed() && (star.lhs - 1.0).abs() < 1e-12);
        let r = theorem1_identity(&m, &erm(&p), &Luckiness::one(), &cfg()).unwrap();
        assert!(r.passed(), "{r:?}");
        let prior = PriorOverClass::new(vec![0.2, 0.5, 0.3]).unwrap();
        let gb = generalized_bayes(&p, &prior, 0.5).unwrap();
        let w = Luckiness::prior_ratio(prior.masses().to_vec(), gb.clone()).unwrap();
        let r = theorem1_identity(&m, &gb, &w, &cfg()).unwrap();
        assert!(r.passed(), "{r:?}");
        let gc = GeneralizedComplexity::compute(&m, &gb, &w, &cfg()).unwrap();
        let stmt = theorem1_statement(&gc).unwrap();
        assert!(esi_implications_check(&p, &stmt, &cfg()).unwrap().passed());
    }

    #[test]
    fn near_tight_tail() {
        // X = lhs − rhs is 1 + 1e-9 w.p. q, and −a otherwise, with
        // q e^{1+1e-9} + (1 − q) e^{−a} = 1.
        let a: f64 = 30.0;
        let x1: f64 = 1.0 + 1e-9;
        let q = (1.0 - (-a).exp()) / (x1.exp() - (-a).exp());
        let p = problem(vec![vec![0.0, 0.0]], vec![q, 1.0 - q], 1.0, 1);
        let s = EsiStatement::new("tight", move |s| if s[0] == 0 { x1 } else { -a }, |_| 0.0, 1.0).unwrap();
        assert!((esi_moment(&p, &s, &cfg()).unwrap().value - 1.0).abs() < 1e-12);
        let r = esi_implications_check(&p, &s, &cfg()).unwrap();
        assert!(r.passed());
        let tail1 = (-1f64).exp() - q;
        assert!((0.0..0.05).contains(&tail1));
    }

    #[test]
    fn bernstein_examples() {
        let single = problem(vec![vec![0.1, 0.2]], vec![0.5, 0.5], 1.0, 1);
        let fit = fit_bernstein(&single, 1.0).unwrap();
        assert!(fit.vacuous && fit.b == 0.0);
        let p = three(1.0, 1);
        let b0 = fit_bernstein(&p, 0.0).unwrap();
        assert!(b0.b <= 0.25);
        // Direct ratio oracle for a 0-1 style separable instance.
        let p = problem(vec![vec![0.0, 0.5], vec![0.5, 0.0]], vec![0.8, 0.2], 1.0, 1);
        let fit = fit_bernstein(&p, 1.0).unwrap();
        let mean = 0.8 * 0.5 - 0.2 * 0.5;
        let second = 0.25;
        assert!((fit.b - second / mean).abs() < 1e-14);
        let tie = problem(vec![vec![0.0, 0.5], vec![0.5, 0.0]], vec![0.5, 0.5], 1.0, 1);
        assert!(matches!(fit_bernstein(&tie, 0.5), Err(Error::DegenerateExcess)));
        assert!(fit_bernstein(&tie, 0.0).is_ok());
    }

    #[test]
    fn bernstein_b_nondecreasing_in_beta() {
        let p = three(1.0, 1);
        let bs: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&b| fit_bernstein(&p, b).unwrap().b).collect();
        assert!(bs.windows(2).all(|w| w[0] <= w[1] + 1e-15), "{bs:?}");
    }

    #[test]
    fn v_central_and_kl_renyi() {
        let p = three(1.0, 1);
        for beta in [0.0, 0.5, 1.0] {
            let v = VFunction::from_bernstein(&fit_bernstein(&p, beta).unwrap());
            let grid = default_gamma_grid();
            let vc = v_central_check(&p, &v, &grid).unwrap();
            for &g in &grid {
                if v_central_at(&p, v.eval(g), g).passed() {
                    for f in 0..3 {
                        let r = kl_renyi_check(&p, f, g, &v).unwrap();
                        assert!(r.passed(), "{r:?}");
                    }
                }
            }
            assert!(vc.passed(), "beta {beta}: {vc:?}");
        }
        let star_only = problem(vec![vec![0.1, 0.3]], vec![0.5, 0.5], 1.0, 1);
        let v = VFunction::new(1.0, 0.0).unwrap();
        assert!(v_central_check(&star_only, &v, &[0.01, 0.1]).unwrap().passed());
        assert!(v_central_check(&star_only, &v, &[]).is_err());
    }

    #[test]
    fn kl_renyi_constant_excess() {
        let p = problem(vec![vec![0.1, 0.1], vec![0.3, 0.3]], vec![0.5, 0.5], 1.0, 1);
        let v = VFunction::new(1.0, 0.0).unwrap();
        let r = kl_renyi_check(&p, 1, 0.25, &v).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn risk_bound_examples() {
        let p = three(1.0, 3);
        let v = VFunction::from_bernstein(&fit_bernstein(&p, 0.0).unwrap());
        let gamma = 0.1;
        let star = risk_bound_eval(&p, &Estimator::dirac(p.fstar(), 3), &Luckiness::one(), gamma, &v, &cfg()).unwrap();
        assert!(star.esi.passed() && star.lhs.iter().all(|&l| l == 0.0));
        let r = risk_bound_eval(&p, &erm(&p), &Luckiness::one(), gamma, &v, &cfg()).unwrap();
        assert!(r.esi.passed(), "{:?}", r.esi);
        let eta = v.eval(gamma) / 2.0;
        let gb = generalized_bayes(&p, &PriorOverClass::uniform(3), eta).unwrap();
        let w = Luckiness::prior_ratio(vec![1.0 / 3.0; 3], gb.clone()).unwrap();
        let r = risk_bound_eval(&p, &gb, &w, gamma, &v, &cfg()).unwrap();
        assert!(r.esi.passed(), "{:?}", r.esi);
        let m = ProductMeasure::of_problem(&p);
        let mut it = m.enumerate();
        let vg = v.eval(gamma);
        while let Some(s) = it.next_sample() {
            let er: f64 = gb.support(s.outcomes).iter().map(|&(f, q)| q * p.excess_loss(f, s.outcomes).unwrap()).sum();
            let cap = 3.0 * (er / 3.0 + 2.0 * 3f64.ln() / (vg * 3.0)) + 4.0 * gamma;
            assert!(r.rhs[s.index as usize] <= cap + 1e-12);
        }
    }
}

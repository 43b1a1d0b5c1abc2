//! Rademacher and H-local complexities of the f0-centered loss class, and
//! the chain comp ⇐ T_n ⇐ Rademacher.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{covering_number, diameter, exact_cover_size, Pseudometric};
use crate::entropify::EntropifiedModel;
use crate::error::{Error, Result};
use crate::measure::{
    exact_log_expectation, expectation, ComputeConfig, Estimate, McConfig, MeanAccumulator,
    Method, ProductMeasure,
};
use crate::report::VerificationResult;
use crate::shtarkov::comp_max_within;

/// Longest sample for which all 2^n sign vectors are enumerated.
pub const MAX_EXACT_SIGNS: usize = 20;

const CHAIN_TOL: f64 = 1e-10;

/// Measure the outer Rademacher expectation is taken under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleLaw {
    P,
    Q(usize),
}

/// The class {ℓ_{f0} − ℓ_f : f ∈ cell} as a table over outcomes.
#[derive(Debug, Clone)]
pub struct LossClass {
    rows: Vec<Vec<f64>>,
}

impl LossClass {
    pub fn new(model: &EntropifiedModel<'_>, f0: usize, cell: &[usize]) -> Result<Self> {
        let problem = model.problem();
        problem.check_predictor(f0)?;
        if cell.is_empty() {
            return Err(Error::InvalidConfig("empty cell".into()));
        }
        let class = problem.class();
        let rows = cell
            .iter()
            .map(|&f| {
                problem.check_predictor(f)?;
                Ok((0..problem.num_outcomes()).map(|z| class.loss(f0, z) - class.loss(f, z)).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self { rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// sup_h |(1/n) Σ_i ε_i h(S_i)| for one sign pattern (bit i set means ε_i = −1).
    fn signed_sup(&self, sample: &[usize], signs: u64) -> f64 {
        let n = sample.len() as f64;
        self.rows
            .iter()
            .map(|row| {
                let s: f64 = sample
                    .iter()
                    .enumerate()
                    .map(|(i, &z)| if signs >> i & 1 == 1 { -row[z] } else { row[z] })
                    .sum();
                (s / n).abs()
            })
            .fold(0.0, f64::max)
    }

    fn exact_over_signs(&self, sample: &[usize]) -> f64 {
        let count = 1u64 << sample.len();
        (0..count).map(|s| self.signed_sup(sample, s)).sum::<f64>() / count as f64
    }
}

/// E_ε[sup_h |(1/n) Σ ε_i h(S_i)|]; exact up to 20 points, Monte Carlo over signs beyond.
pub fn empirical_rademacher(class: &LossClass, sample: &[usize], mc: &McConfig) -> Result<Estimate> {
    if sample.is_empty() {
        return Err(Error::InvalidConfig("empty sample".into()));
    }
    if sample.len() <= MAX_EXACT_SIGNS {
        return Ok(Estimate::exact(class.exact_over_signs(sample)));
    }
    if mc.trials < 2 {
        return Err(Error::InvalidConfig("Monte Carlo needs at least 2 trials".into()));
    }
    let mut rng = mc.rng();
    let mut acc = MeanAccumulator::default();
    let n = sample.len() as f64;
    for _ in 0..mc.trials {
        let signs: Vec<f64> = sample.iter().map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let sup = class
            .rows
            .iter()
            .map(|row| (sample.iter().zip(&signs).map(|(&z, e)| e * row[z]).sum::<f64>() / n).abs())
            .fold(0.0, f64::max);
        acc.push(sup);
    }
    Ok(acc.estimate())
}

fn law_measure(model: &EntropifiedModel<'_>, law: SampleLaw, n: usize) -> Result<ProductMeasure> {
    match law {
        SampleLaw::P => ProductMeasure::new(model.problem().p().masses(), model.problem().space().nu(), n),
        SampleLaw::Q(f0) => {
            model.problem().check_predictor(f0)?;
            Ok(model.q_measure(f0, n))
        }
    }
}

/// E_{S^n ∼ law}[empirical Rademacher]. Exact when samples × sign vectors fit
/// the cap, otherwise Monte Carlo jointly over samples and signs.
pub fn rademacher(
    model: &EntropifiedModel<'_>,
    class: &LossClass,
    law: SampleLaw,
    n: usize,
    cfg: &ComputeConfig,
) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    let measure = law_measure(model, law, n)?;
    let work = measure.num_states() * 2f64.powi(n as i32);
    if n <= MAX_EXACT_SIGNS && work <= cfg.exact_cap as f64 {
        let v = crate::measure::exact_expectation(&measure, cfg, |s| class.exact_over_signs(s))?;
        return Ok(Estimate::exact(v));
    }
    let mut sampler = measure.sampler(&cfg.mc)?;
    if cfg.mc.trials < 2 {
        return Err(Error::InvalidConfig("Monte Carlo needs at least 2 trials".into()));
    }
    let mut acc = MeanAccumulator::default();
    let mut buf = Vec::with_capacity(n);
    let nf = n as f64;
    for _ in 0..cfg.mc.trials {
        sampler.fill(&mut buf);
        let signs: Vec<f64> = (0..n).map(|_| if sampler.rng().random::<bool>() { 1.0 } else { -1.0 }).collect();
        let sup = class
            .rows
            .iter()
            .map(|row| (buf.iter().zip(&signs).map(|(&z, e)| e * row[z]).sum::<f64>() / nf).abs())
            .fold(0.0, f64::max);
        acc.push(sup);
    }
    Ok(acc.estimate())
}

/// The f0-centered entropified loss process over a cell.
#[derive(Debug, Clone)]
pub struct LocalProcess {
    /// Per cell member, (ℓ_{f0} − ℓ_f)(z) − E_{Q_{f0}}[ℓ_{f0} − ℓ_f].
    centered: Vec<Vec<f64>>,
    f0: usize,
}

impl LocalProcess {
    pub fn new(model: &EntropifiedModel<'_>, f0: usize, cell: &[usize]) -> Result<Self> {
        if !cell.contains(&f0) {
            return Err(Error::Precondition(format!("f0 = {f0} is not in the cell")));
        }
        let class = LossClass::new(model, f0, cell)?;
        let q = model.q_masses(f0);
        let centered = class
            .rows
            .iter()
            .map(|row| {
                let mean: f64 = row.iter().zip(&q).map(|(h, m)| h * m).sum();
                row.iter().map(|h| h - mean).collect()
            })
            .collect();
        Ok(Self { centered, f0 })
    }

    /// T_n(z^n); the f0 term is identically zero so T_n ≥ 0.
    pub fn value(&self, sample: &[usize]) -> f64 {
        self.centered
            .iter()
            .map(|row| sample.iter().map(|&z| row[z]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }

    pub fn f0(&self) -> usize {
        self.f0
    }
}

pub fn t_n_value(model: &EntropifiedModel<'_>, f0: usize, cell: &[usize], sample: &[usize]) -> Result<f64> {
    model.problem().check_sample(sample)?;
    Ok(LocalProcess::new(model, f0, cell)?.value(sample))
}

/// E_{Z^n ∼ Q_{f0}}[T_n].
pub fn h_local(model: &EntropifiedModel<'_>, f0: usize, cell: &[usize], cfg: &ComputeConfig) -> Result<Estimate> {
    let process = LocalProcess::new(model, f0, cell)?;
    expectation(&model.q_measure(f0, model.n()), cfg, |s| process.value(s))
}

/// ln E_{Q_{f0}}[e^{ηT_n}], exact only.
fn log_moment(model: &EntropifiedModel<'_>, process: &LocalProcess, cfg: &ComputeConfig) -> Result<f64> {
    let eta = model.eta();
    exact_log_expectation(&model.q_measure(process.f0(), model.n()), cfg, |s| eta * process.value(s))
}

fn exact_only(e: Estimate, what: &str) -> Result<f64> {
    match e.method {
        Method::Exact => Ok(e.value),
        Method::MonteCarlo => Err(Error::Precondition(format!("{what} needs exact enumeration"))),
    }
}

/// comp_η(cell) ≤ (1/η) ln E_{Q_{f0}}[e^{ηT_n}].
pub fn verify_opper_haussler(
    model: &EntropifiedModel<'_>,
    f0: usize,
    cell: &[usize],
    cfg: &ComputeConfig,
) -> Result<VerificationResult> {
    let process = LocalProcess::new(model, f0, cell)?;
    let comp = comp_max_within(model, cell, cfg)?.comp;
    let rhs = log_moment(model, &process, cfg)? / model.eta();
    Ok(VerificationResult::leq("opper-haussler", comp, rhs, CHAIN_TOL))
}

/// σ = e·L·(L2(P) diameter of the cell).
pub fn cell_sigma(model: &EntropifiedModel<'_>, cell: &[usize]) -> Result<f64> {
    let d = diameter(model, &Pseudometric::l2_p(), cell)?;
    Ok(std::f64::consts::E * model.problem().class().lipschitz() * d)
}

/// E_{Q_{f0}}[e^{ηT_n}] ≤ exp(3η E[T_n] + nη²σ²), compared on the log scale.
///
/// With `epsilon` the cell must have L2(P) diameter at most ε; σ is always
/// taken from the measured diameter.
pub fn verify_talagrand_moment(
    model: &EntropifiedModel<'_>,
    f0: usize,
    cell: &[usize],
    epsilon: Option<f64>,
    cfg: &ComputeConfig,
) -> Result<VerificationResult> {
    let eta = model.eta();
    if eta > 1.0 {
        return Err(Error::Precondition(format!("eta = {eta} exceeds 1")));
    }
    let diam = diameter(model, &Pseudometric::l2_p(), cell)?;
    if let Some(eps) = epsilon {
        if diam > eps {
            return Err(Error::DiameterViolated { diameter: diam, epsilon: eps });
        }
    }
    let sigma = cell_sigma(model, cell)?;
    let process = LocalProcess::new(model, f0, cell)?;
    let lhs = log_moment(model, &process, cfg)?;
    let h = exact_only(h_local(model, f0, cell, cfg)?, "talagrand moment")?;
    let n = model.n() as f64;
    let rhs = 3.0 * eta * h + n * eta * eta * sigma * sigma;
    Ok(VerificationResult::leq("talagrand-moment", lhs, rhs, CHAIN_TOL)
        .with_note(format!("sigma {sigma:.6e} from measured diameter {diam:.6e}")))
}

/// H-local ≤ 2n·Rademacher of the loss class under Q_{f0}.
pub fn symmetrization_check(
    model: &EntropifiedModel<'_>,
    f0: usize,
    cell: &[usize],
    cfg: &ComputeConfig,
) -> Result<VerificationResult> {
    let h = h_local(model, f0, cell, cfg)?;
    let class = LossClass::new(model, f0, cell)?;
    let r = rademacher(model, &class, SampleLaw::Q(f0), model.n(), cfg)?;
    let rhs = 2.0 * model.n() as f64 * r.value;
    let result = VerificationResult::leq("symmetrization", h.value, rhs, CHAIN_TOL);
    Ok(match (h.std_error, r.std_error) {
        (None, None) => result,
        (a, b) => {
            let se = (a.unwrap_or(0.0).powi(2) + (2.0 * model.n() as f64 * b.unwrap_or(0.0)).powi(2)).sqrt();
            VerificationResult::leq("symmetrization", h.value, rhs, 4.0 * se.max(1e-12))
                .with_note("Monte Carlo; tolerance is 4 standard errors")
        }
    })
}

/// Per-cell quantities of the Voronoi bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTerms {
    pub center: usize,
    pub members: Vec<usize>,
    pub diameter: f64,
    pub sigma: f64,
    pub h_local: f64,
    pub rademacher: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhtReport {
    pub epsilon: f64,
    pub comp: f64,
    pub log_cover: f64,
    pub cells: Vec<CellTerms>,
    /// The H-local display.
    pub local: VerificationResult,
    /// The Rademacher display.
    pub rademacher: VerificationResult,
}

impl OhtReport {
    pub fn result(&self) -> VerificationResult {
        VerificationResult::all("oht", &[self.local.clone(), self.rademacher.clone()])
    }
}

/// Builds an ε/2 cover in L2(P), then checks
/// comp ≤ ln N/η + max_k(3·H_k + ηnσ_k²) and comp ≤ ln N/η + max_k(6n·Rad_k + ηnσ_k²).
pub fn verify_oht(model: &EntropifiedModel<'_>, epsilon: f64, cfg: &ComputeConfig) -> Result<OhtReport> {
    let eta = model.eta();
    if eta > 1.0 {
        return Err(Error::Precondition(format!("eta = {eta} exceeds 1")));
    }
    let n = model.n();
    let cover = covering_number(model, &Pseudometric::l2_p(), epsilon / 2.0)?;
    let all: Vec<usize> = (0..model.num_predictors()).collect();
    let comp = comp_max_within(model, &all, cfg)?.comp;
    let log_cover = (cover.size() as f64).ln() / eta;
    let mut cells = Vec::new();
    for (k, members) in cover.cell_members().into_iter().enumerate() {
        let center = cover.centers[k];
        let d = diameter(model, &Pseudometric::l2_p(), &members)?;
        let sigma = std::f64::consts::E * model.problem().class().lipschitz() * d;
        let h = exact_only(h_local(model, center, &members, cfg)?, "oht")?;
        let class = LossClass::new(model, center, &members)?;
        let r = exact_only(rademacher(model, &class, SampleLaw::Q(center), n, cfg)?, "oht")?;
        cells.push(CellTerms { center, members, diameter: d, sigma, h_local: h, rademacher: r });
    }
    let var = |c: &CellTerms| eta * n as f64 * c.sigma * c.sigma;
    let max_local = cells.iter().map(|c| 3.0 * c.h_local + var(c)).fold(f64::NEG_INFINITY, f64::max);
    let max_rad = cells
        .iter()
        .map(|c| 6.0 * n as f64 * c.rademacher + var(c))
        .fold(f64::NEG_INFINITY, f64::max);
    let widest = cells.iter().map(|c| c.diameter).fold(0.0, f64::max);
    let note = format!("nominal epsilon {epsilon:.6e}, widest measured cell diameter {widest:.6e}");
    Ok(OhtReport {
        epsilon,
        comp,
        log_cover,
        local: VerificationResult::leq("oht-local", comp, log_cover + max_local, CHAIN_TOL).with_note(note.clone()),
        rademacher: VerificationResult::leq("oht-rademacher", comp, log_cover + max_rad, CHAIN_TOL).with_note(note),
        cells,
    })
}

/// N(F, L2(P), ε) ≤ max over point sets of N(F, L2(P_n), ε/2), exact internal
/// covers. Point sets are every single outcome plus `budget` random sets
/// drawn from P; a failure only means the budget was too small.
pub fn extended_haussler_check(
    model: &EntropifiedModel<'_>,
    epsilon: f64,
    budget: usize,
    mc: &McConfig,
) -> Result<VerificationResult> {
    let m = model.num_predictors();
    if m > super::EXACT_COVER_MAX {
        return Err(Error::InvalidConfig(format!("exact covering needs at most {} predictors", super::EXACT_COVER_MAX)));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon = {epsilon} must be positive")));
    }
    let all: Vec<usize> = (0..m).collect();
    let lhs = exact_cover_size(&Pseudometric::l2_p().matrix(model, &all)?, epsilon);
    let k = model.problem().num_outcomes();
    let masses = model.problem().p().masses();
    let mut sets: Vec<Vec<usize>> = (0..k).filter(|&z| masses[z] > 0.0).map(|z| vec![z]).collect();
    if budget > 0 {
        let max_len = (10 * k).clamp(2, 200);
        let mut rng = mc.rng();
        let dist = rand::distr::weighted::WeightedIndex::new(masses)
            .map_err(|e| Error::InvalidConfig(format!("sampling weights: {e}")))?;
        for _ in 0..budget {
            let len = rng.random_range(1..=max_len);
            sets.push((0..len).map(|_| rand::distr::Distribution::sample(&dist, &mut rng)).collect());
        }
    }
    let mut best = (0usize, 0usize);
    for (i, s) in sets.into_iter().enumerate() {
        let size = exact_cover_size(&Pseudometric::l2_empirical(s).matrix(model, &all)?, epsilon / 2.0);
        if size > best.0 {
            best = (size, i);
        }
        if best.0 >= lhs {
            break;
        }
    }
    Ok(VerificationResult::leq("extended-haussler", lhs as f64, best.0 as f64, 0.0)
        .with_note(format!("best point set #{}", best.1))
        .inconclusive())
}

/// Rademacher of the f0-centered loss class as a function of the cell radius,
/// for trend checks: returns (σ, Rademacher under Q_{f0}) per nested cell.
pub fn rademacher_sigma_trend(
    model: &EntropifiedModel<'_>,
    f0: usize,
    cfg: &ComputeConfig,
) -> Result<Vec<(f64, f64)>> {
    model.problem().check_predictor(f0)?;
    let metric = Pseudometric::l2_p();
    let m = model.num_predictors();
    let mut order: Vec<(f64, usize)> = (0..m)
        .map(|f| Ok((super::pseudodistance(model, &metric, f0, f)?, f)))
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut cell = Vec::new();
    let mut out = Vec::new();
    for (_, f) in order {
        cell.push(f);
        let sigma = cell_sigma(model, &cell)?;
        let class = LossClass::new(model, f0, &cell)?;
        out.push((sigma, rademacher(model, &class, SampleLaw::Q(f0), model.n(), cfg)?.value));
    }
    Ok(out)
}

// Exhaustive Rademacher over samples and signs, used as an oracle in tests.
#[cfg(test)]
fn rademacher_brute(model: &EntropifiedModel<'_>, class: &LossClass, law: SampleLaw, n: usize) -> f64 {
    let measure = law_measure(model, law, n).unwrap();
    crate::measure::exact_fold(
        &measure,
        &ComputeConfig::default(),
        false,
        || 0.0,
        |acc: &mut f64, s| *acc += s.log_prob.exp() * class.exact_over_signs(s.outcomes),
        |a, b| *a += b,
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{FiniteDistribution, LearningProblem, OutcomeSpace, PredictorClass};

    fn problem(rows: Vec<Vec<f64>>, n: usize) -> LearningProblem {
        let k = rows[0].len();
        let masses: Vec<f64> = (1..=k).map(|i| i as f64).collect();
        let total: f64 = masses.iter().sum();
        LearningProblem::new(
            OutcomeSpace::indexed(k).unwrap(),
            FiniteDistribution::new(masses.iter().map(|m| m / total).collect()).unwrap(),
            PredictorClass::direct(rows).unwrap(),
            1.0,
            n,
        )
        .unwrap()
    }

    fn four() -> LearningProblem {
        problem(
            vec![
                vec![0.1, 0.2, 0.3],
                vec![0.12, 0.22, 0.28],
                vec![0.4, 0.0, 0.35],
                vec![0.38, 0.02, 0.33],
            ],
            3,
        )
    }

    #[test]
    fn empirical_rademacher_small_cases() {
        let mc = McConfig::default();
        let zero = LossClass::from_rows(vec![vec![0.0, 0.0]]);
        assert_eq!(empirical_rademacher(&zero, &[0, 1], &mc).unwrap().value, 0.0);
        let c = LossClass::from_rows(vec![vec![-0.3, -0.3]]);
        assert!((empirical_rademacher(&c, &[1], &mc).unwrap().value - 0.3).abs() < 1e-15);
        // Two patterns, n = 2: average sup over the four sign vectors.
        let two = LossClass::from_rows(vec![vec![0.2, -0.1], vec![0.0, 0.4]]);
        let s = [0, 1];
        let mut total = 0.0;
        for e0 in [1.0, -1.0] {
            for e1 in [1.0, -1.0] {
                let a: f64 = ((e0 * 0.2 + e1 * -0.1) / 2.0f64).abs();
                let b: f64 = ((e0 * 0.0 + e1 * 0.4) / 2.0f64).abs();
                total += a.max(b);
            }
        }
        assert!((empirical_rademacher(&two, &s, &mc).unwrap().value - total / 4.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_rademacher_mc_beyond_exact() {
        let class = LossClass::from_rows(vec![vec![0.5, -0.5]]);
        let sample = vec![0usize; 24];
        let mc = McConfig { trials: 20_000, seed: 3, stream_id: 0 };
        let e = empirical_rademacher(&class, &sample, &mc).unwrap();
        assert_eq!(e.method, Method::MonteCarlo);
        // Closed form: E|S_24|/48 for a simple random walk.
        let exact: f64 = (0..=24u32)
            .map(|k| {
                let binom = (1..=k).fold(1.0, |acc, i| acc * (24 - k + i) as f64 / i as f64);
                binom / 2f64.powi(24) * (2.0 * k as f64 - 24.0).abs() / 48.0
            })
            .sum();
        assert!((e.value - exact).abs() <= 4.0 * e.std_error.unwrap());
    }

    #[test]
    fn rademacher_exact_matches_brute_and_mc() {
        let p = four();
        let m = EntropifiedModel::new(&p);
        let class = LossClass::new(&m, 0, &[0, 1, 2, 3]).unwrap();
        let cfg = ComputeConfig::default();
        for law in [SampleLaw::P, SampleLaw::Q(2)] {
            let e = rademacher(&m, &class, law, 3, &cfg).unwrap();
            assert_eq!(e.method, Method::Exact);
            assert!((e.value - rademacher_brute(&m, &class, law, 3)).abs() < 1e-14);
            let mc_cfg = ComputeConfig { exact_cap: 1, mc: McConfig { trials: 20_000, seed: 9, stream_id: 1 }, ..cfg };
            let mc = rademacher(&m, &class, law, 3, &mc_cfg).unwrap();
            assert!((mc.value - e.value).abs() <= 4.0 * mc.std_error.unwrap());
        }
        let null = LossClass::new(&m, 1, &[1]).unwrap();
        assert_eq!(rademacher(&m, &null, SampleLaw::P, 3, &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn singleton_constant_class_n2() {
        // Constant h ≡ c: E over signs of |(ε1 + ε2)c/2| = |c|/2.
        let class = LossClass::from_rows(vec![vec![0.6, 0.6]]);
        let v = class.exact_over_signs(&[0, 1]);
        assert!((v - 0.3).abs() < 1e-15);
    }

    #[test]
    fn local_process_basics() {
        let p = four();
        let m = EntropifiedModel::new(&p);
        let cfg = ComputeConfig::default();
        assert_eq!(h_local(&m, 2, &[2], &cfg).unwrap().value, 0.0);
        assert_eq!(t_n_value(&m, 2, &[2], &[0, 1, 2]).unwrap(), 0.0);
        assert!(h_local(&m, 0, &[0, 1, 2, 3], &cfg).unwrap().value > 0.0);
        assert!(matches!(t_n_value(&m, 0, &[1, 2], &[0, 0, 0]), Err(Error::Precondition(_))));
        // Direct oracle for T_n on one sample.
        let q = m.q_masses(0);
        let s = [2, 0, 1];
        let mut best = 0.0f64;
        for f in 0..4 {
            let h = |z: usize| p.class().loss(0, z) - p.class().loss(f, z);
            let mean: f64 = (0..3).map(|z| q[z] * h(z)).sum();
            best = best.max(s.iter().map(|&z| h(z)).sum::<f64>() - 3.0 * mean);
        }
        assert!((t_n_value(&m, 0, &[0, 1, 2, 3], &s).unwrap() - best).abs() < 1e-14);
    }

    #[test]
    fn chain_on_small_instance() {
        let p = four();
        let m = EntropifiedModel::new(&p);
        let cfg = ComputeConfig::default();
        for f0 in 0..4 {
            let all = [0, 1, 2, 3];
            assert!(verify_opper_haussler(&m, f0, &all, &cfg).unwrap().passed());
            assert!(verify_talagrand_moment(&m, f0, &all, None, &cfg).unwrap().passed());
            assert!(symmetrization_check(&m, f0, &all, &cfg).unwrap().passed());
        }
        let single = verify_opper_haussler(&m, 1, &[1], &cfg).unwrap();
        assert!(single.lhs.abs() < 1e-14 && single.rhs.abs() < 1e-14 && single.passed());
        let t = verify_talagrand_moment(&m, 1, &[1], None, &cfg).unwrap();
        assert!(t.lhs.abs() < 1e-14 && t.rhs == 0.0 && t.passed());
    }

    #[test]
    fn talagrand_diameter_contract() {
        let p = four();
        let m = EntropifiedModel::new(&p);
        let r = verify_talagrand_moment(&m, 0, &[0, 2], Some(1e-3), &ComputeConfig::default());
        assert!(matches!(r, Err(Error::DiameterViolated { .. })));
    }

    #[test]
    fn oht_two_cells_and_single_cell() {
        let p = four();
        let m = EntropifiedModel::new(&p);
        let cfg = ComputeConfig::default();
        let d_near = diameter(&m, &Pseudometric::l2_p(), &[0, 1]).unwrap();
        let d_all = diameter(&m, &Pseudometric::l2_p(), &[0, 1, 2, 3]).unwrap();
        let two = verify_oht(&m, 3.0 * d_near, &cfg).unwrap();
        assert_eq!(two.cells.len(), 2);
        assert!(two.result().passed(), "{:?}", two.result());
        let one = verify_oht(&m, 2.0 * d_all, &cfg).unwrap();
        assert_eq!(one.cells.len(), 1);
        assert_eq!(one.log_cover, 0.0);
        assert!(one.result().passed());
    }

    #[test]
    fn oht_duplicated_predictors() {
        let row = vec![0.2, 0.3, 0.1];
        let p = problem(vec![row.clone(), row.clone(), row], 2);
        let m = EntropifiedModel::new(&p);
        let r = verify_oht(&m, 0.1, &ComputeConfig::default()).unwrap();
        assert!(r.comp.abs() < 1e-12);
        assert!((r.local.slack - r.log_cover).abs() < 1e-12);
    }

    #[test]
    fn extended_haussler_cases() {
        let p = four();
        let m = EntropifiedModel::new(&p);
        let mc = McConfig::default();
        assert!(extended_haussler_check(&m, 1e-6, 200, &mc).unwrap().passed());
        let single = problem(vec![vec![0.1, 0.2, 0.3]], 1);
        let ms = EntropifiedModel::new(&single);
        let r = extended_haussler_check(&ms, 0.1, 0, &mc).unwrap();
        assert_eq!((r.lhs, r.rhs), (1.0, 1.0));
    }

    #[test]
    fn trend_is_monotone_in_cell() {
        let p = four();
        let m = EntropifiedModel::new(&p);
        let t = rademacher_sigma_trend(&m, 0, &ComputeConfig::default()).unwrap();
        assert_eq!(t.len(), 4);
        for w in t.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1 - 1e-15);
        }
    }
}

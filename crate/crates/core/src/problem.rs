//! Finite learning problems: outcome space, true distribution, predictor
//! class with its loss table, and the standing boundedness / Lipschitz checks.

use serde::{Deserialize, Serialize};

use crate::error::{Assumption, Error, Result};

/// Slack allowed when checking the boundedness and Lipschitz assumptions.
const ASSUMPTION_TOL: f64 = 1e-12;

/// Labelled outcomes with a strictly positive base measure.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSpace {
    labels: Vec<String>,
    structure: Option<Vec<(String, String)>>,
    nu: Vec<f64>,
}

impl OutcomeSpace {
    pub fn new(
        labels: Vec<String>,
        nu: Option<Vec<f64>>,
        structure: Option<Vec<(String, String)>>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::MalformedSpec("outcome space is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::MalformedSpec(format!("duplicate outcome label {l:?}")));
            }
        }
        let nu = nu.unwrap_or_else(|| vec![1.0; labels.len()]);
        if nu.len() != labels.len() {
            return Err(Error::MalformedSpec(format!(
                "nu has {} entries for {} outcomes",
                nu.len(),
                labels.len()
            )));
        }
        if let Some(i) = nu.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::MalformedSpec(format!("nu[{i}] = {} is not strictly positive", nu[i])));
        }
        if let Some(s) = &structure {
            if s.len() != labels.len() {
                return Err(Error::MalformedSpec("structure length differs from outcomes".into()));
            }
        }
        Ok(Self { labels, structure, nu })
    }

    /// Counting-measure space with labels `"0", "1", ...`.
    pub fn indexed(k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| i.to_string()).collect(), None, None)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn structure(&self) -> Option<&[(String, String)]> {
        self.structure.as_deref()
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }
}

/// Probability masses over outcome indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    masses: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::MalformedSpec("empty distribution".into()));
        }
        if let Some(i) = masses.iter().position(|&m| !(m.is_finite() && m >= 0.0)) {
            return Err(Error::MalformedSpec(format!("mass[{i}] = {} is not a probability", masses[i])));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::MalformedSpec(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { masses })
    }

    pub fn uniform(k: usize) -> Self {
        Self { masses: vec![1.0 / k as f64; k] }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ParameterizationKind {
    #[default]
    Direct,
    Supervised,
}

/// How predictions relate to losses.
#[derive(Debug, Clone, PartialEq)]
pub enum Parameterization {
    /// Predictors are identified with their loss rows; L = 1.
    Direct,
    /// `features[f][z]` is f(x) for the x-part of outcome z.
    Supervised { features: Vec<Vec<f64>>, lipschitz: f64 },
}

/// Finite class of predictors, stored as a dense loss table.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorClass {
    losses: Vec<Vec<f64>>,
    parameterization: Parameterization,
}

impl PredictorClass {
    pub fn new(losses: Vec<Vec<f64>>, parameterization: Parameterization) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::MalformedSpec("predictor class is empty".into()));
        }
        let k = losses[0].len();
        for (f, row) in losses.iter().enumerate() {
            if row.len() != k {
                return Err(Error::MalformedSpec(format!("loss row {f} has {} entries, expected {k}", row.len())));
            }
            if let Some(z) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::MalformedSpec(format!("loss[{f}][{z}] is not finite")));
            }
        }
        if let Parameterization::Supervised { features, lipschitz } = &parameterization {
            if features.len() != losses.len() || features.iter().any(|r| r.len() != k) {
                return Err(Error::MalformedSpec("feature table shape differs from loss table".into()));
            }
            if features.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::MalformedSpec("feature table has non-finite entries".into()));
            }
            if !(lipschitz.is_finite() && *lipschitz > 0.0) {
                return Err(Error::MalformedSpec(format!("lipschitz constant {lipschitz} must be positive")));
            }
        }
        Ok(Self { losses, parameterization })
    }

    pub fn direct(losses: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(losses, Parameterization::Direct)
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn losses(&self) -> &[Vec<f64>] {
        &self.losses
    }

    pub fn loss(&self, f: usize, z: usize) -> f64 {
        self.losses[f][z]
    }

    pub fn parameterization(&self) -> &Parameterization {
        &self.parameterization
    }

    /// L in the Lipschitz assumption; 1 for the direct parameterization.
    pub fn lipschitz(&self) -> f64 {
        match &self.parameterization {
            Parameterization::Direct => 1.0,
            Parameterization::Supervised { lipschitz, .. } => *lipschitz,
        }
    }

    /// Prediction value f(x) used by predictor pseudometrics. For direct
    /// classes the predictor is its loss row.
    pub fn prediction(&self, f: usize, z: usize) -> f64 {
        match &self.parameterization {
            Parameterization::Direct => self.losses[f][z],
            Parameterization::Supervised { features, .. } => features[f][z],
        }
    }
}

/// A complete finite learning problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningProblem {
    space: OutcomeSpace,
    p: FiniteDistribution,
    class: PredictorClass,
    eta: f64,
    n: usize,
    fstar: usize,
    log_loss: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Rescale losses so that the pairwise boundedness assumption holds
    /// instead of rejecting the problem.
    pub allow_unscaled: bool,
}

impl LearningProblem {
    pub fn new(
        space: OutcomeSpace,
        p: FiniteDistribution,
        class: PredictorClass,
        eta: f64,
        n: usize,
    ) -> Result<Self> {
        Self::build(space, p, class, eta, n, false, BuildOptions::default())
    }

    /// Constructor for log-loss problems: `losses[f][z] = -ln p_f(z)` where
    /// each `p_f` is a density with respect to ν.
    pub fn log_loss(space: OutcomeSpace, p: FiniteDistribution, class: PredictorClass, eta: f64, n: usize) -> Result<Self> {
        Self::build(space, p, class, eta, n, true, BuildOptions::default())
    }

    pub fn build(
        space: OutcomeSpace,
        p: FiniteDistribution,
        mut class: PredictorClass,
        eta: f64,
        n: usize,
        log_loss: bool,
        opts: BuildOptions,
    ) -> Result<Self> {
        if p.len() != space.len() {
            return Err(Error::MalformedSpec(format!(
                "p has {} masses for {} outcomes",
                p.len(),
                space.len()
            )));
        }
        if class.losses[0].len() != space.len() {
            return Err(Error::MalformedSpec("loss rows do not match outcome count".into()));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::MalformedSpec(format!("eta = {eta} must be positive")));
        }
        if n == 0 {
            return Err(Error::MalformedSpec("n must be positive".into()));
        }
        if log_loss {
            for (f, row) in class.losses.iter().enumerate() {
                let total: f64 = row.iter().zip(space.nu()).map(|(l, nu)| (-l).exp() * nu).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::MalformedSpec(format!(
                        "log-loss predictor {f} has density integrating to {total}"
                    )));
                }
            }
        }

        let (gap, pair) = max_pairwise_gap(&class.losses);
        if gap > 0.5 + ASSUMPTION_TOL {
            if opts.allow_unscaled && !log_loss {
                let scale = 0.5 / gap;
                for row in &mut class.losses {
                    for v in row.iter_mut() {
                        *v *= scale;
                    }
                }
                if let Parameterization::Supervised { lipschitz, .. } = &mut class.parameterization {
                    *lipschitz *= scale;
                }
            } else {
                let (f, g, z) = pair;
                return Err(Error::AssumptionViolated {
                    assumption: Assumption::A1,
                    detail: format!("|loss[{f}][{z}] - loss[{g}][{z}]| = {gap} > 1/2"),
                });
            }
        }
        check_lipschitz(&space, &class)?;

        let mut problem = Self { space, p, class, eta, n, fstar: 0, log_loss };
        problem.fstar = (0..problem.class.len())
            .map(|f| (f, problem.risk_unchecked(f)))
            .fold((0, f64::INFINITY), |best, (f, r)| if r < best.1 { (f, r) } else { best })
            .0;
        Ok(problem)
    }

    pub fn space(&self) -> &OutcomeSpace {
        &self.space
    }

    pub fn p(&self) -> &FiniteDistribution {
        &self.p
    }

    pub fn class(&self) -> &PredictorClass {
        &self.class
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fstar(&self) -> usize {
        self.fstar
    }

    pub fn is_log_loss(&self) -> bool {
        self.log_loss
    }

    pub fn num_outcomes(&self) -> usize {
        self.space.len()
    }

    pub fn num_predictors(&self) -> usize {
        self.class.len()
    }

    /// Same problem at a different learning rate.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta = {eta} must be positive")));
        }
        Ok(Self { eta, ..self.clone() })
    }

    /// Same problem at a different sample size.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        Ok(Self { n, ..self.clone() })
    }

    pub fn check_predictor(&self, f: usize) -> Result<()> {
        if f < self.class.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { what: "predictor", index: f, len: self.class.len() })
        }
    }

    pub fn check_sample(&self, sample: &[usize]) -> Result<()> {
        if sample.len() > self.n {
            return Err(Error::SampleTooLong { len: sample.len(), n: self.n });
        }
        let k = self.space.len();
        match sample.iter().find(|&&z| z >= k) {
            Some(&z) => Err(Error::IndexOutOfRange { what: "outcome", index: z, len: k }),
            None => Ok(()),
        }
    }

    /// Expected loss Σ_z P(z) ℓ_f(z).
    pub fn risk(&self, f: usize) -> Result<f64> {
        self.check_predictor(f)?;
        Ok(self.risk_unchecked(f))
    }

    fn risk_unchecked(&self, f: usize) -> f64 {
        self.p.masses().iter().zip(&self.class.losses[f]).map(|(m, l)| m * l).sum()
    }

    /// Expected excess risk E_P[R_f(Z)] relative to f*.
    pub fn excess_risk(&self, f: usize) -> Result<f64> {
        self.check_predictor(f)?;
        Ok(self
            .p
            .masses()
            .iter()
            .enumerate()
            .map(|(z, m)| m * self.excess_unchecked(f, z))
            .sum())
    }

    /// Per-outcome excess loss ℓ_f(z) − ℓ_{f*}(z).
    pub fn excess(&self, f: usize, z: usize) -> f64 {
        self.excess_unchecked(f, z)
    }

    #[inline]
    fn excess_unchecked(&self, f: usize, z: usize) -> f64 {
        self.class.losses[f][z] - self.class.losses[self.fstar][z]
    }

    /// R_f(z^n) = Σ_i (ℓ_f(z_i) − ℓ_{f*}(z_i)).
    pub fn excess_loss(&self, f: usize, sample: &[usize]) -> Result<f64> {
        self.check_predictor(f)?;
        self.check_sample(sample)?;
        Ok(self.excess_loss_unchecked(f, sample))
    }

    #[inline]
    pub(crate) fn excess_loss_unchecked(&self, f: usize, sample: &[usize]) -> f64 {
        sample.iter().map(|&z| self.excess_unchecked(f, z)).sum()
    }

    pub fn to_spec(&self) -> ProblemSpec {
        let (parameterization, lipschitz, features) = match self.class.parameterization() {
            Parameterization::Direct => (ParameterizationKind::Direct, None, None),
            Parameterization::Supervised { features, lipschitz } => {
                (ParameterizationKind::Supervised, Some(*lipschitz), Some(features.clone()))
            }
        };
        ProblemSpec {
            outcomes: self.space.labels.clone(),
            structure: self
                .space
                .structure
                .as_ref()
                .map(|s| s.iter().map(|(x, y)| [x.clone(), y.clone()]).collect()),
            p: self.p.masses.clone(),
            nu: Some(self.space.nu.clone()),
            predictors: self
                .class
                .losses
                .iter()
                .enumerate()
                .map(|(f, losses)| PredictorSpec {
                    losses: losses.clone(),
                    features: features.as_ref().map(|t| t[f].clone()),
                })
                .collect(),
            eta: self.eta,
            n: self.n,
            parameterization,
            lipschitz,
            log_loss: self.log_loss,
        }
    }
}

/// Largest |ℓ_f(z) − ℓ_g(z)| and a pair (f, g, z) attaining it.
fn max_pairwise_gap(losses: &[Vec<f64>]) -> (f64, (usize, usize, usize)) {
    let k = losses[0].len();
    let mut best = (0.0, (0, 0, 0));
    for z in 0..k {
        let (mut lo, mut hi) = (0, 0);
        for f in 1..losses.len() {
            if losses[f][z] < losses[lo][z] {
                lo = f;
            }
            if losses[f][z] > losses[hi][z] {
                hi = f;
            }
        }
        let gap = losses[hi][z] - losses[lo][z];
        if gap > best.0 {
            best = (gap, (lo.min(hi), lo.max(hi), z));
        }
    }
    best
}

fn check_lipschitz(space: &OutcomeSpace, class: &PredictorClass) -> Result<()> {
    let Parameterization::Supervised { features, lipschitz } = &class.parameterization else {
        return Ok(());
    };
    let m = class.len();
    let gaps = |f: usize, g: usize, z: usize| {
        let dl = (class.losses[f][z] - class.losses[g][z]).abs();
        let dx = lipschitz * (features[f][z] - features[g][z]).abs();
        (dl, dx)
    };
    let mut order: Vec<usize> = (0..m).collect();
    for z in 0..space.len() {
        // If neighbours in prediction order pass without tolerance, every
        // pair does by the triangle inequality.
        order.sort_by(|&a, &b| features[a][z].total_cmp(&features[b][z]));
        if order.windows(2).all(|w| {
            let (dl, dx) = gaps(w[0], w[1], z);
            dl <= dx
        }) {
            continue;
        }
        for f in 0..m {
            for g in f + 1..m {
                let (dl, dx) = gaps(f, g, z);
                if dl > dx + ASSUMPTION_TOL {
                    return Err(Error::AssumptionViolated {
                        assumption: Assumption::A2,
                        detail: format!(
                            "predictors {f},{g} at outcome {z}: loss gap {dl} > L*|f(x)-g(x)| = {dx}"
                        ),
                    });
                }
            }
        }
    }
    if let Some(structure) = &space.structure {
        // f(x) may only depend on the x-part of the outcome.
        for a in 0..space.len() {
            for b in a + 1..space.len() {
                if structure[a].0 == structure[b].0
                    && features.iter().any(|row| row[a] != row[b])
                {
                    return Err(Error::MalformedSpec(format!(
                        "outcomes {a} and {b} share x = {:?} but predictions differ",
                        structure[a].0
                    )));
                }
            }
        }
    }
    Ok(())
}

/// JSON form of a problem.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemSpec {
    pub outcomes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<Vec<[String; 2]>>,
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    pub predictors: Vec<PredictorSpec>,
    pub eta: f64,
    pub n: usize,
    #[serde(default)]
    pub parameterization: ParameterizationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub log_loss: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PredictorSpec {
    pub losses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedSpec(e.to_string()))
    }
}

/// Validate a problem description and compute f*.
pub fn build_problem(spec: &ProblemSpec, opts: BuildOptions) -> Result<LearningProblem> {
    let structure = spec
        .structure
        .as_ref()
        .map(|s| s.iter().map(|[x, y]| (x.clone(), y.clone())).collect());
    let space = OutcomeSpace::new(spec.outcomes.clone(), spec.nu.clone(), structure)?;
    let p = FiniteDistribution::new(spec.p.clone())?;
    let losses: Vec<Vec<f64>> = spec.predictors.iter().map(|p| p.losses.clone()).collect();
    let parameterization = match spec.parameterization {
        ParameterizationKind::Direct => Parameterization::Direct,
        ParameterizationKind::Supervised => {
            let features = spec
                .predictors
                .iter()
                .enumerate()
                .map(|(f, p)| {
                    p.features
                        .clone()
                        .ok_or_else(|| Error::MalformedSpec(format!("predictor {f} lacks features")))
                })
                .collect::<Result<Vec<_>>>()?;
            Parameterization::Supervised { features, lipschitz: spec.lipschitz.unwrap_or(1.0) }
        }
    };
    let class = PredictorClass::new(losses, parameterization)?;
    LearningProblem::build(space, p, class, spec.eta, spec.n, spec.log_loss, opts)
}

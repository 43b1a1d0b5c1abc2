use serde::{Deserialize, Serialize};

use crate::entropify::EntropifiedModel;
use crate::error::{Error, Result};
use crate::measure::{exact_fold, ComputeConfig, ProductMeasure};
use crate::report::VerificationResult;
use crate::shtarkov::{nml_density, sample_terms, Estimator, Luckiness};

/// Largest tolerated spread of the regret over samples.
pub const EQUALIZER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualizerReport {
    pub min_regret: f64,
    pub max_regret: f64,
    pub log_shtarkov: f64,
    /// max − min ≤ 1e-9.
    pub spread: VerificationResult,
    /// The common regret equals ln S.
    pub constant: VerificationResult,
}

impl EqualizerReport {
    pub fn result(&self) -> VerificationResult {
        VerificationResult::all("equalizer", &[self.spread.clone(), self.constant.clone()])
    }
}

/// Regret of the luckiness-NML strategy r_w on every sample.
///
/// Without `gamma` the comparator is E_{Π̂}[−ln q_f(z^n) − ln w(z^n, f)].
/// With a penalty Γ it is min_f(−ln p_f(z^n) + Γ(f)) with p_f = e^{−ℓ_f},
/// which needs a log-loss problem at η = 1.
pub fn equalizer_experiment(
    model: &EntropifiedModel<'_>,
    est: &Estimator,
    w: &Luckiness,
    gamma: Option<&[f64]>,
    cfg: &ComputeConfig,
) -> Result<EqualizerReport> {
    let problem = model.problem();
    if let Some(g) = gamma {
        if !problem.is_log_loss() || (problem.eta() - 1.0).abs() > 1e-12 {
            return Err(Error::NotLogLoss("penalized equalizer needs log-loss at eta = 1".into()));
        }
        if g.len() != problem.num_predictors() {
            return Err(Error::InvalidConfig("penalty must have one value per predictor".into()));
        }
    }
    let nml = nml_density(model, est, w, cfg)?;
    let measure = ProductMeasure::of_problem(problem);
    // E_Π̂[−ln q_f − ln w] = −ln p + E_Π̂[ηR_f + ln C(f)] − E_Π̂[ln w].
    let expected_comparator = |s: &[usize]| {
        let t = sample_terms(model, est, w, s);
        -model.log_p_sample(s) + t.expected_gap + t.expected_neg_log_w
    };
    let m = problem.num_predictors();
    let (lo, hi) = exact_fold(
        &measure,
        cfg,
        true,
        || (f64::INFINITY, f64::NEG_INFINITY),
        |acc, s| {
            let log_r = nml.log_density[s.index as usize];
            let comparator = match gamma {
                Some(g) => (0..m)
                    .map(|f| s.outcomes.iter().map(|&z| problem.class().loss(f, z)).sum::<f64>() + g[f])
                    .fold(f64::INFINITY, f64::min),
                None => expected_comparator(s.outcomes),
            };
            if !(log_r.is_finite() && comparator.is_finite()) {
                return;
            }
            let regret = -log_r - comparator;
            acc.0 = acc.0.min(regret);
            acc.1 = acc.1.max(regret);
        },
        |a, b| {
            a.0 = a.0.min(b.0);
            a.1 = a.1.max(b.1);
        },
    )?;
    Ok(EqualizerReport {
        min_regret: lo,
        max_regret: hi,
        log_shtarkov: nml.log_shtarkov,
        spread: VerificationResult::leq("equalizer-spread", hi - lo, 0.0, EQUALIZER_TOL),
        constant: VerificationResult::equal("equalizer-constant", hi, nml.log_shtarkov, EQUALIZER_TOL),
    })
}

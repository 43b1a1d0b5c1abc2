//! Browser bindings. Each export takes plain numbers and returns a JSON
//! string; the pure `*_json` functions behind them are what the native tests
//! exercise.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use unicomp::esi::theorem1_identity;
use unicomp::harness::{catalog, default_rate_ns, generate, rate_experiment, threshold_grid, Family, GeneratorSpec, RateEstimator};
use unicomp::measure::ProductMeasure;
use unicomp::shtarkov::{comp_max, ml_estimator, nml_density};
use unicomp::{ComputeConfig, EntropifiedModel, Error, LearningProblem, Luckiness, McConfig, Result};

const MAX_OUTCOMES: usize = 4;
const MAX_PREDICTORS: usize = 8;
const MAX_N: usize = 6;

fn cfg(trials: u64, seed: u64) -> ComputeConfig {
    // wasm32 has no threads.
    ComputeConfig { mc: McConfig { trials, seed, stream_id: 0 }, threads: 1, ..ComputeConfig::default() }
}

fn random_problem(outcomes: usize, predictors: usize, n: usize, eta: f64, seed: u64) -> Result<LearningProblem> {
    if outcomes > MAX_OUTCOMES || predictors > MAX_PREDICTORS || n > MAX_N {
        return Err(Error::InvalidConfig(format!(
            "demo limits: |Z| <= {MAX_OUTCOMES}, |F| <= {MAX_PREDICTORS}, n <= {MAX_N}"
        )));
    }
    let spec = GeneratorSpec::new(Family::RandomFinite { outcomes, predictors }, seed).with_eta(eta).with_n(n);
    Ok(generate(&spec)?.problem)
}

#[derive(Debug, Serialize)]
pub struct NmlRow {
    pub sample: Vec<usize>,
    pub p: f64,
    pub nml: f64,
    /// −ln r(z^n) + max_f ln q_f(z^n).
    pub regret: f64,
    pub ml: usize,
}

#[derive(Debug, Serialize)]
pub struct NmlView {
    pub eta: f64,
    pub comp: f64,
    pub log_shtarkov: f64,
    pub fstar: usize,
    pub losses: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub rows: Vec<NmlRow>,
    pub spread: f64,
}

pub fn nml_view(outcomes: usize, predictors: usize, n: usize, eta: f64, seed: u64) -> Result<NmlView> {
    let problem = random_problem(outcomes, predictors, n, eta, seed)?;
    let model = EntropifiedModel::new(&problem);
    let cfg = cfg(1, seed);
    let ml = ml_estimator(&model);
    let nml = nml_density(&model, &ml, &Luckiness::one(), &cfg)?;
    let comp = comp_max(&model, &cfg)?.report.comp;
    let measure = ProductMeasure::of_problem(&problem);
    let mut rows = Vec::new();
    let mut it = measure.enumerate();
    while let Some(s) = it.next_sample() {
        let log_r = nml.log_density[s.index as usize];
        let f = ml.point(s.outcomes).expect("deterministic");
        rows.push(NmlRow {
            sample: s.outcomes.to_vec(),
            p: s.log_prob.exp(),
            nml: log_r.exp(),
            regret: -log_r + model.log_q_sample(f, s.outcomes),
            ml: f,
        });
    }
    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.regret), b.max(r.regret)));
    Ok(NmlView {
        eta,
        comp,
        log_shtarkov: nml.log_shtarkov,
        fstar: problem.fstar(),
        losses: problem.class().losses().to_vec(),
        p: problem.p().masses().to_vec(),
        rows,
        spread: hi - lo,
    })
}

#[derive(Debug, Serialize)]
pub struct MomentRow {
    pub estimator: String,
    pub luckiness: String,
    pub moment: f64,
    pub deviation: f64,
    pub pass: bool,
}

/// E[e^{nη(lhs − rhs)}] for every catalog pairing.
pub fn theorem1_rows(outcomes: usize, predictors: usize, n: usize, eta: f64, seed: u64) -> Result<Vec<MomentRow>> {
    let problem = random_problem(outcomes, predictors, n, eta, seed)?;
    let model = EntropifiedModel::new(&problem);
    let cfg = cfg(1, seed);
    catalog(&model)?
        .into_iter()
        .map(|e| {
            let r = theorem1_identity(&model, &e.est, &e.w, &cfg)?;
            Ok(MomentRow {
                estimator: e.estimator,
                luckiness: e.luckiness,
                moment: r.lhs,
                deviation: r.lhs - r.rhs,
                pass: r.passed(),
            })
        })
        .collect()
}

pub fn rate_report(m: usize, h: f64, trials: u64, seed: u64) -> Result<unicomp::harness::RateReport> {
    let (problem, grid) = threshold_grid(m, h, 1.0, 1)?;
    rate_experiment(&problem, RateEstimator::Erm, &default_rate_ns(), Some(&grid), &cfg(trials, seed))
}

fn to_json<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = nmlExplorer)]
pub fn nml_explorer(outcomes: usize, predictors: usize, n: usize, eta: f64, seed: u32) -> std::result::Result<String, JsError> {
    to_json(nml_view(outcomes, predictors, n, eta, seed.into()))
}

#[wasm_bindgen(js_name = theorem1Moments)]
pub fn theorem1_moments(outcomes: usize, predictors: usize, n: usize, eta: f64, seed: u32) -> std::result::Result<String, JsError> {
    to_json(theorem1_rows(outcomes, predictors, n, eta, seed.into()))
}

#[wasm_bindgen(js_name = rateCurve)]
pub fn rate_curve(m: usize, h: f64, trials: u32, seed: u32) -> std::result::Result<String, JsError> {
    to_json(rate_report(m, h, trials.into(), seed.into()))
}

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};

use unicomp::empirical::{
    extended_haussler_check, lemma_sigma_check, symmetrization_check, verify_oht, verify_opper_haussler,
    verify_talagrand_moment,
};
use unicomp::esi::{
    default_gamma_grid, esi_implications_check, fit_bernstein, kl_renyi_check, risk_bound_eval, theorem1_identity,
    theorem1_statement, v_central_check, VFunction,
};
use unicomp::harness::estimate_beta;
use unicomp::shtarkov::{composite_decomposition_check, partition_bound_check, GeneralizedComplexity};
use unicomp::{ComputeConfig, EntropifiedModel, Error, LearningProblem, Luckiness, Partition, VerificationResult};

use crate::input::{parse_list, read_partition, read_prior, Loaded, Pairing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Theorem1,
    Esi,
    Bernstein,
    Vcentral,
    Klrenyi,
    Riskbound,
    /// theorem1, esi, bernstein, vcentral, klrenyi and riskbound.
    All,
    Oht,
    Opperhaussler,
    Talagrand,
    Symmetrization,
    Sigma,
    Haussler,
    Partition,
    Composite,
}

const ALL: [Check; 6] = [Check::Theorem1, Check::Esi, Check::Bernstein, Check::Vcentral, Check::Klrenyi, Check::Riskbound];

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// May be repeated.
    #[arg(long, value_enum, required = true)]
    pub check: Vec<Check>,
    #[command(flatten)]
    pub pairing: Pairing,
    /// Bernstein exponent for the v-function (default: ladder estimate).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Comma-separated γ grid (default: logarithmic 1e-3 .. 0.5).
    #[arg(long)]
    pub gamma: Option<String>,
    /// Cover radius for oht and haussler; diameter bound for talagrand.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Comma-separated predictor indices of the cell (default: all).
    #[arg(long)]
    pub cell: Option<String>,
    /// Center of the local process (default: first member of the cell).
    #[arg(long)]
    pub f0: Option<usize>,
    /// Random point sets for the extended Haussler check.
    #[arg(long, default_value_t = 200)]
    pub budget: usize,
    /// Partition file {"blocks": [[...], ...]}.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// JSON array of block-prior masses for the composite check (default uniform).
    #[arg(long)]
    pub block_prior: Option<PathBuf>,
}

fn expand(checks: &[Check]) -> Vec<Check> {
    let mut out = Vec::new();
    for &c in checks {
        let items: &[Check] = if c == Check::All { &ALL } else { std::slice::from_ref(&c) };
        for &i in items {
            if !out.contains(&i) {
                out.push(i);
            }
        }
    }
    out
}

struct Ctx<'a> {
    args: &'a VerifyArgs,
    problem: &'a LearningProblem,
    partition: Option<&'a Partition>,
    cfg: &'a ComputeConfig,
}

impl Ctx<'_> {
    fn v_function(&self) -> Result<VFunction> {
        let beta = self.args.beta.unwrap_or_else(|| estimate_beta(self.problem));
        Ok(VFunction::from_bernstein(&fit_bernstein(self.problem, beta)?))
    }

    fn gammas(&self) -> Result<Vec<f64>> {
        match &self.args.gamma {
            Some(s) => parse_list(s),
            None => Ok(default_gamma_grid()),
        }
    }

    fn cell(&self) -> Result<Vec<usize>> {
        let cell = match &self.args.cell {
            Some(s) => parse_list(s)?,
            None => (0..self.problem.num_predictors()).collect(),
        };
        for &f in &cell {
            self.problem.check_predictor(f)?;
        }
        Ok(cell)
    }

    fn f0(&self, cell: &[usize]) -> Result<usize> {
        self.args.f0.or_else(|| cell.first().copied()).context("empty cell")
    }

    fn epsilon(&self, check: &str) -> Result<f64> {
        self.args.epsilon.with_context(|| format!("--epsilon is required for {check}"))
    }

    fn partition(&self) -> Result<Partition> {
        match (&self.args.partition, self.partition) {
            (Some(path), _) => read_partition(path, self.problem.num_predictors()),
            (None, Some(p)) => Ok(p.clone()),
            (None, None) => bail!("--partition <file> is required"),
        }
    }

    fn run(&self, check: Check, out: &mut Vec<VerificationResult>) -> Result<()> {
        let problem = self.problem;
        let model = EntropifiedModel::new(problem);
        let cfg = self.cfg;
        let pairing = &self.args.pairing;
        match check {
            Check::All => unreachable!("expanded"),
            Check::Theorem1 => {
                let est = pairing.estimator(&model)?;
                let w = pairing.luckiness(problem, &est)?;
                out.push(theorem1_identity(&model, &est, &w, cfg)?);
            }
            Check::Esi => {
                let est = pairing.estimator(&model)?;
                let w = pairing.luckiness(problem, &est)?;
                let gc = GeneralizedComplexity::compute(&model, &est, &w, cfg)?;
                let stmt = theorem1_statement(&gc)?;
                out.push(esi_implications_check(problem, &stmt, cfg)?);
            }
            Check::Bernstein => {
                let beta = self.args.beta.unwrap_or_else(|| estimate_beta(problem));
                let fit = fit_bernstein(problem, beta)?;
                out.push(bernstein_result(problem, fit.beta, fit.b, fit.vacuous));
            }
            Check::Vcentral => out.push(v_central_check(problem, &self.v_function()?, &self.gammas()?)?),
            Check::Klrenyi => {
                let v = self.v_function()?;
                for g in self.gammas()? {
                    if !v_central_check(problem, &v, &[g])?.passed() {
                        continue;
                    }
                    for f in 0..problem.num_predictors() {
                        out.push(kl_renyi_check(problem, f, g, &v)?);
                    }
                }
            }
            Check::Riskbound => {
                let v = self.v_function()?;
                let est = pairing.estimator(&model)?;
                let w = pairing.luckiness(problem, &est)?;
                for g in self.gammas()? {
                    match risk_bound_eval(problem, &est, &w, g, &v, cfg) {
                        Ok(rb) => out.push(VerificationResult { name: format!("risk-bound gamma={g}"), ..rb.esi }),
                        Err(Error::Precondition(_)) => continue,
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            Check::Oht => out.push(verify_oht(&model, self.epsilon("oht")?, cfg)?.result()),
            Check::Opperhaussler => {
                let cell = self.cell()?;
                out.push(verify_opper_haussler(&model, self.f0(&cell)?, &cell, cfg)?);
            }
            Check::Talagrand => {
                let cell = self.cell()?;
                out.push(verify_talagrand_moment(&model, self.f0(&cell)?, &cell, self.args.epsilon, cfg)?);
            }
            Check::Symmetrization => {
                let cell = self.cell()?;
                out.push(symmetrization_check(&model, self.f0(&cell)?, &cell, cfg)?);
            }
            Check::Sigma => out.push(lemma_sigma_check(&model)?),
            Check::Haussler => {
                out.push(extended_haussler_check(&model, self.epsilon("haussler")?, self.args.budget, &cfg.mc)?)
            }
            Check::Partition => {
                let est = pairing.estimator(&model)?;
                out.push(partition_bound_check(&model, &self.partition()?, &est, cfg)?);
            }
            Check::Composite => {
                let part = self.partition()?;
                let k = part.num_blocks();
                let block_prior = match &self.args.block_prior {
                    Some(p) => read_prior(p)?.masses().to_vec(),
                    None => vec![1.0 / k as f64; k],
                };
                let est = pairing.estimator(&model)?;
                out.push(composite_decomposition_check(
                    &model,
                    &part,
                    &block_prior,
                    &vec![Luckiness::one(); k],
                    &est,
                    cfg,
                )?);
            }
        }
        Ok(())
    }
}

/// Re-checks E[R_f²] ≤ B·E[R_f]^β for every predictor with the fitted B.
fn bernstein_result(problem: &LearningProblem, beta: f64, b: f64, vacuous: bool) -> VerificationResult {
    let masses = problem.p().masses();
    let parts: Vec<VerificationResult> = (0..problem.num_predictors())
        .map(|f| {
            let mean: f64 = (0..masses.len()).map(|z| masses[z] * problem.excess(f, z)).sum();
            let second: f64 = (0..masses.len()).map(|z| masses[z] * problem.excess(f, z).powi(2)).sum();
            let rhs = if beta == 0.0 { b } else { b * mean.max(0.0).powf(beta) };
            VerificationResult::leq(format!("bernstein f={f}"), second, rhs, 1e-12)
        })
        .collect();
    VerificationResult::all(format!("bernstein beta={beta}"), &parts)
        .with_note(format!("B = {b}{}", if vacuous { " (vacuous)" } else { "" }))
}

pub fn run(args: &VerifyArgs, loaded: &Loaded, cfg: &ComputeConfig) -> Result<Vec<VerificationResult>> {
    let ctx = Ctx { args, problem: &loaded.problem, partition: loaded.partition.as_ref(), cfg };
    let mut out = Vec::new();
    for check in expand(&args.check) {
        ctx.run(check, &mut out).with_context(|| format!("check {check:?}"))?;
    }
    Ok(out)
}

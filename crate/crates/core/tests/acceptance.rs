//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unicomp::empirical::{
    covering_number, h_local, lemma_sigma_check, rademacher, symmetrization_check, verify_oht,
    verify_opper_haussler, verify_talagrand_moment, LossClass, Pseudometric, SampleLaw,
};
use unicomp::entropify::EntropifiedModel;
use unicomp::esi::{
    default_gamma_grid, esi_check, esi_implications_check, esi_moment, fit_bernstein, kl_renyi_check,
    theorem1_identity, theorem1_statement, VFunction, IDENTITY_TOL,
};
use unicomp::estimators::{erm, generalized_bayes, penalized_erm, PenaltyFunction, PriorOverClass};
use unicomp::harness::{
    catalog, default_rate_ns, equalizer_experiment, generate, model_select_experiment, rate_experiment,
    threshold_grid, Family, GeneratorSpec, RateEstimator,
};
use unicomp::measure::{ComputeConfig, McConfig, Method};
use unicomp::shtarkov::{
    composite_decomposition_check, ml_estimator, partition_bound_check, shtarkov_generalized, Luckiness, Partition,
    GeneralizedComplexity,
};
use unicomp::{Error, LearningProblem, VerificationResult};

const SEED: u64 = 20_260_101;

struct Line {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

fn exact_cfg() -> ComputeConfig {
    ComputeConfig::default()
}

/// Tracks pass/fail over many results and remembers the worst one.
#[derive(Default)]
struct Tally {
    checks: usize,
    failures: Vec<String>,
    worst: Option<(f64, String)>,
}

impl Tally {
    fn add(&mut self, r: &VerificationResult, context: &str) {
        self.checks += 1;
        let margin = r.slack + r.tolerance;
        if self.worst.as_ref().is_none_or(|(m, _)| margin < *m) {
            self.worst = Some((margin, format!("{context}: {} slack {:.3e}", r.name, r.slack)));
        }
        if !r.passed() {
            self.failures.push(format!("{context}: {} lhs {:.6e} rhs {:.6e} slack {:.3e}", r.name, r.lhs, r.rhs, r.slack));
        }
    }

    fn fail(&mut self, msg: String) {
        self.checks += 1;
        self.failures.push(msg);
    }

    fn pass(&self) -> bool {
        self.failures.is_empty() && self.checks > 0
    }

    fn summary(&self) -> String {
        let mut s = format!("{} checks, {} failed", self.checks, self.failures.len());
        if let Some((_, w)) = &self.worst {
            s.push_str(&format!("; tightest {w}"));
        }
        for f in self.failures.iter().take(5) {
            s.push_str(&format!("\n        failure {f}"));
        }
        s
    }
}

/// The randomized instances of the identity suites.
fn identity_instances() -> Vec<(String, LearningProblem)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..60)
        .map(|i| {
            let k = rng.random_range(2..=3);
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=5);
            let eta = [0.25, 0.5, 1.0][rng.random_range(0..3)];
            let spec = GeneratorSpec::new(Family::RandomFinite { outcomes: k, predictors: m }, SEED + i)
                .with_eta(eta)
                .with_n(n);
            (format!("inst{i}(|Z|={k},n={n},|F|={m},eta={eta})"), generate(&spec).unwrap().problem)
        })
        .collect()
}

fn criterion1(instances: &[(String, LearningProblem)]) -> (bool, String) {
    let mut t = Tally::default();
    let mut pairings = std::collections::BTreeSet::new();
    for (name, p) in instances {
        let model = EntropifiedModel::new(p);
        for e in catalog(&model).unwrap() {
            pairings.insert(format!("{}x{}", e.estimator, e.luckiness));
            match theorem1_identity(&model, &e.est, &e.w, &exact_cfg()) {
                Ok(r) => t.add(&r, &format!("{name} {}x{}", e.estimator, e.luckiness)),
                Err(err) => t.fail(format!("{name} {}x{}: {err}", e.estimator, e.luckiness)),
            }
        }
    }
    (t.pass(), format!("{} instances, {} pairings, tol {IDENTITY_TOL:e}; {}", instances.len(), pairings.len(), t.summary()))
}

fn criterion2(instances: &[(String, LearningProblem)]) -> (bool, String) {
    let mut t = Tally::default();
    for (name, p) in instances {
        let model = EntropifiedModel::new(p);
        let m = p.num_predictors();
        let raw: Vec<f64> = (0..m).map(|f| 1.0 + f as f64).collect();
        let total: f64 = raw.iter().sum();
        let prior = PriorOverClass::new(raw.iter().map(|x| x / total).collect()).unwrap();
        let ests = [("gen-bayes", generalized_bayes(p, &prior, p.eta()).unwrap()), ("dirac-erm", erm(p))];
        for (label, est) in ests {
            let w = Luckiness::prior_ratio(prior.masses().to_vec(), est.clone()).unwrap();
            let r = shtarkov_generalized(&model, &est, &w, &exact_cfg()).unwrap();
            let s = r.log_shtarkov.exp();
            t.add(&VerificationResult::leq("S<=1", s, 1.0, 1e-10), &format!("{name} {label}"));
        }
    }
    (t.pass(), t.summary())
}

fn criterion3() -> (bool, String) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let count = 24;
    for i in 0..count {
        let k = rng.random_range(2..=3);
        let m = rng.random_range(3..=6);
        let n = rng.random_range(1..=4);
        let eta = [0.5, 1.0][rng.random_range(0..2)];
        let p = generate(
            &GeneratorSpec::new(Family::RandomFinite { outcomes: k, predictors: m }, SEED + 300 + i)
                .with_eta(eta)
                .with_n(n),
        )
        .unwrap()
        .problem;
        let blocks = rng.random_range(2..=3.min(m));
        let mut labels: Vec<usize> = (0..m).map(|f| f % blocks).collect();
        for f in (1..m).rev() {
            labels.swap(f, rng.random_range(0..=f));
        }
        let part = Partition::from_labels(&labels).unwrap();
        let b = part.num_blocks();
        let block_prior = vec![1.0 / b as f64; b];
        let sub_w = vec![Luckiness::one(); b];
        let model = EntropifiedModel::new(&p);
        let name = format!("part{i}(|Z|={k},n={n},|F|={m},blocks={b},eta={eta})");
        let erm_est = erm(&p);
        t.add(&partition_bound_check(&model, &part, &erm_est, &exact_cfg()).unwrap(), &name);
        let gb = generalized_bayes(&p, &PriorOverClass::uniform(m), eta).unwrap();
        for (label, est) in [("erm", erm_est), ("gen-bayes", gb)] {
            match composite_decomposition_check(&model, &part, &block_prior, &sub_w, &est, &exact_cfg()) {
                Ok(r) => t.add(&r, &format!("{name} composite {label}")),
                Err(e) => t.fail(format!("{name} composite {label}: {e}")),
            }
        }
    }
    (t.pass(), format!("{count} partitioned instances; {}", t.summary()))
}

fn criterion4(instances: &[(String, LearningProblem)]) -> (bool, String) {
    let mut t = Tally::default();
    let mut certified = 0;
    for (name, p) in instances {
        let model = EntropifiedModel::new(p);
        for e in catalog(&model).unwrap() {
            let gc = GeneralizedComplexity::compute(&model, &e.est, &e.w, &exact_cfg()).unwrap();
            if !gc.log_shtarkov().is_finite() {
                continue;
            }
            let stmt = theorem1_statement(&gc).unwrap();
            if !esi_check(p, &stmt, IDENTITY_TOL, &exact_cfg()).unwrap().passed() {
                continue;
            }
            certified += 1;
            let r = esi_implications_check(p, &stmt, &exact_cfg()).unwrap();
            t.add(&r, &format!("{name} {}x{}", e.estimator, e.luckiness));
        }
    }
    (t.pass(), format!("{certified} certified ESIs, K in {{1,2,3}}; {}", t.summary()))
}

fn criterion5(instances: &[(String, LearningProblem)]) -> (bool, String) {
    let mut t = Tally::default();
    let mut skipped_gamma = 0;
    let mut degenerate = 0;
    for (name, p) in instances {
        for beta in [0.0, 0.5, 1.0] {
            let fit = match fit_bernstein(p, beta) {
                Ok(f) => f,
                Err(Error::DegenerateExcess) => {
                    degenerate += 1;
                    continue;
                }
                Err(e) => panic!("{e}"),
            };
            let v = VFunction::from_bernstein(&fit);
            for gamma in default_gamma_grid() {
                for f in 0..p.num_predictors() {
                    match kl_renyi_check(p, f, gamma, &v) {
                        Ok(r) => t.add(&r, &format!("{name} beta={beta}")),
                        Err(Error::Precondition(_)) => {
                            skipped_gamma += 1;
                            break;
                        }
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }
    (
        t.pass(),
        format!("{}; {skipped_gamma} (instance, beta, gamma) cells not v-central, {degenerate} degenerate fits", t.summary()),
    )
}

/// Smallest ε whose ε/2 greedy cover has exactly two cells.
fn two_cell_epsilon(model: &EntropifiedModel<'_>) -> Option<f64> {
    let m = model.num_predictors();
    let all: Vec<usize> = (0..m).collect();
    let d = Pseudometric::l2_p().matrix(model, &all).unwrap();
    let mut radii: Vec<f64> = d.iter().flatten().copied().filter(|x| *x > 0.0).collect();
    radii.sort_by(f64::total_cmp);
    radii
        .into_iter()
        .find(|&r| covering_number(model, &Pseudometric::l2_p(), r).unwrap().size() == 2)
        .map(|r| 2.0 * r)
}

fn criterion6() -> (bool, String) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let mut used = 0;
    let mut i = 0u64;
    while used < 24 {
        i += 1;
        let k = rng.random_range(2..=3);
        let m = rng.random_range(3..=5);
        let n = rng.random_range(2..=3);
        let eta = [0.5, 1.0][rng.random_range(0..2)];
        let p = generate(
            &GeneratorSpec::new(Family::RandomFinite { outcomes: k, predictors: m }, SEED + 600 + i)
                .with_eta(eta)
                .with_n(n),
        )
        .unwrap()
        .problem;
        let model = EntropifiedModel::new(&p);
        let Some(eps) = two_cell_epsilon(&model) else { continue };
        used += 1;
        let name = format!("chain{i}(|Z|={k},n={n},|F|={m},eta={eta})");
        let cfg = exact_cfg();
        let oht = verify_oht(&model, eps, &cfg).unwrap();
        assert_eq!(oht.cells.len(), 2);
        t.add(&oht.local, &name);
        t.add(&oht.rademacher, &name);
        t.add(&lemma_sigma_check(&model).unwrap(), &name);
        for c in &oht.cells {
            t.add(&verify_opper_haussler(&model, c.center, &c.members, &cfg).unwrap(), &name);
            t.add(&verify_talagrand_moment(&model, c.center, &c.members, Some(eps), &cfg).unwrap(), &name);
            t.add(&symmetrization_check(&model, c.center, &c.members, &cfg).unwrap(), &name);
        }
        let all: Vec<usize> = (0..m).collect();
        t.add(&verify_opper_haussler(&model, p.fstar(), &all, &cfg).unwrap(), &name);
    }
    (t.pass(), format!("{used} instances with 2-cell covers; {}", t.summary()))
}

fn criterion7(instances: &[(String, LearningProblem)]) -> (bool, String) {
    let mut t = Tally::default();
    for (name, p) in instances {
        let model = EntropifiedModel::new(p);
        let r = equalizer_experiment(&model, &ml_estimator(&model), &Luckiness::one(), None, &exact_cfg()).unwrap();
        t.add(&r.spread, &format!("{name} nml"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let count = 12;
    for i in 0..count {
        let k = rng.random_range(2..=3);
        let m = rng.random_range(2..=4);
        let n = rng.random_range(1..=4);
        let p = generate(&GeneratorSpec::new(Family::LogLoss { outcomes: k, predictors: m }, SEED + 700 + i).with_n(n))
            .unwrap()
            .problem;
        let gamma: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..0.6)).collect();
        let est = penalized_erm(&p, &PenaltyFunction::new(gamma.clone()).unwrap(), 1.0).unwrap();
        let w = Luckiness::penalty(gamma.clone(), est.clone()).unwrap();
        let model = EntropifiedModel::new(&p);
        let r = equalizer_experiment(&model, &est, &w, Some(&gamma), &exact_cfg()).unwrap();
        let name = format!("logloss{i}(|Z|={k},n={n},|F|={m})");
        t.add(&r.spread, &format!("{name} luckiness-nml"));
        t.add(&r.constant, &format!("{name} luckiness-nml"));
    }
    (t.pass(), format!("NML on {} instances, luckiness-NML on {count} log-loss instances; {}", instances.len(), t.summary()))
}

fn criterion8() -> (bool, String) {
    let cfg = ComputeConfig { mc: McConfig { trials: 2000, seed: SEED, stream_id: 0 }, ..exact_cfg() };
    let ns = default_rate_ns();
    let mut pass = true;
    let mut detail = Vec::new();
    for (h, target) in [(0.0, -0.5), (0.9, -1.0)] {
        let (p, grid) = threshold_grid(1024, h, 1.0, 1).unwrap();
        let r = rate_experiment(&p, RateEstimator::Erm, &ns, Some(&grid), &cfg).unwrap();
        let slope = r.slope.unwrap_or(f64::NAN);
        let ok = (slope - target).abs() <= 0.15;
        pass &= ok;
        detail.push(format!(
            "h={h}: slope {slope:.3} vs {target} ± 0.15 (beta-hat {}, -1/(2-beta) {:.3})",
            r.beta, r.target
        ));
    }
    (pass, format!("m=1024, n=16..1024, 2000 draws per n; {}", detail.join("; ")))
}

fn criterion9() -> (bool, String) {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let count = 12;
    for i in 0..count {
        let sizes = [vec![1, 3], vec![2, 4], vec![1, 2, 4], vec![2, 2, 3]][rng.random_range(0..4)].clone();
        let best = rng.random_range(0..sizes.len());
        let k = rng.random_range(2..=3);
        let g = generate(&GeneratorSpec::new(
            Family::NestedBlocks { outcomes: k, block_sizes: sizes.clone(), best_block: best },
            SEED + 900 + i,
        ))
        .unwrap();
        let part = g.partition.unwrap();
        let b = part.num_blocks();
        let pi = PriorOverClass::new(vec![1.0 / b as f64; b]).unwrap();
        let r = model_select_experiment(&g.problem, &part, &pi, 1.0, &[1, 2, 3, 4], None, &exact_cfg()).unwrap();
        let name = format!("blocks{i}({sizes:?},k*={},|Z|={k})", r.kstar);
        t.add(&r.bound, &name);
        t.add(&r.overhead, &name);
    }
    (t.pass(), format!("{count} nested-block instances, n=1..4, eta=1; {}", t.summary()))
}

fn within_4se(t: &mut Tally, name: &str, exact: f64, mc: f64, se: Option<f64>) {
    let se = se.unwrap_or(0.0).max(1e-12);
    t.add(&VerificationResult::leq(name, (mc - exact).abs(), 0.0, 4.0 * se), name);
}

fn criterion10(instances: &[(String, LearningProblem)]) -> (bool, String) {
    let mut t = Tally::default();
    let exact = exact_cfg();
    for (idx, (name, p)) in instances.iter().enumerate().step_by(6) {
        let mc = ComputeConfig {
            exact_cap: 1,
            mc: McConfig { trials: 20_000, seed: SEED + idx as u64, stream_id: 0 },
            ..exact
        };
        let model = EntropifiedModel::new(p);
        for e in catalog(&model).unwrap().into_iter().step_by(3) {
            let a = GeneralizedComplexity::compute(&model, &e.est, &e.w, &exact).unwrap();
            let b = GeneralizedComplexity::compute(&model, &e.est, &e.w, &mc).unwrap();
            assert_eq!(b.method(), Method::MonteCarlo);
            let label = format!("{name} shtarkov {}x{}", e.estimator, e.luckiness);
            within_4se(&mut t, &label, a.log_shtarkov().exp(), b.log_shtarkov().exp(), b.std_error());
            let stmt = theorem1_statement(&a).unwrap();
            let me = esi_moment(p, &stmt, &exact).unwrap();
            let mm = esi_moment(p, &stmt, &mc).unwrap();
            within_4se(&mut t, &format!("{name} theorem1 moment {}", e.estimator), me.value, mm.value, mm.std_error);
        }
        let all: Vec<usize> = (0..p.num_predictors()).collect();
        let f0 = p.fstar();
        let he = h_local(&model, f0, &all, &exact).unwrap();
        let hm = h_local(&model, f0, &all, &mc).unwrap();
        within_4se(&mut t, &format!("{name} h_local"), he.value, hm.value, hm.std_error);
        let class = LossClass::new(&model, f0, &all).unwrap();
        for law in [SampleLaw::P, SampleLaw::Q(f0)] {
            let re = rademacher(&model, &class, law, p.n(), &exact).unwrap();
            let rm = rademacher(&model, &class, law, p.n(), &mc).unwrap();
            within_4se(&mut t, &format!("{name} rademacher {law:?}"), re.value, rm.value, rm.std_error);
        }
    }
    let (p, grid) = threshold_grid(4, 0.3, 1.0, 1).unwrap();
    let ns = [1, 2, 3, 4];
    let re = rate_experiment(&p, RateEstimator::Erm, &ns, Some(&grid), &exact).unwrap();
    let mc = ComputeConfig { exact_cap: 1, mc: McConfig { trials: 20_000, seed: SEED, stream_id: 0 }, ..exact };
    let rm = rate_experiment(&p, RateEstimator::Erm, &ns, Some(&grid), &mc).unwrap();
    for (a, b) in re.rows.iter().zip(&rm.rows) {
        within_4se(&mut t, &format!("rate n={}", a.n), a.mean_excess_risk, b.mean_excess_risk, b.std_error);
    }
    (t.pass(), t.summary())
}

fn run(lines: &mut Vec<Line>, id: usize, title: &'static str, budget: Option<u64>, f: impl FnOnce() -> (bool, String)) {
    let start = Instant::now();
    let (pass, detail) = f();
    let elapsed = start.elapsed();
    let budget = budget.map(Duration::from_secs);
    let line = Line { id, title, pass: pass && budget.is_none_or(|b| elapsed <= b), detail, elapsed, budget };
    print_line(&line);
    lines.push(line);
}

fn print_line(l: &Line) {
    let verdict = if l.pass { "PASS" } else { "FAIL" };
    let budget = l.budget.map(|b| format!(" (budget {} s)", b.as_secs())).unwrap_or_default();
    println!(
        "[{verdict}] criterion {:>2} {}: {} [{:.1} s{budget}]",
        l.id,
        l.title,
        l.detail,
        l.elapsed.as_secs_f64()
    );
}

fn main() {
    let instances = identity_instances();
    let mut lines = Vec::new();
    run(&mut lines, 1, "excess-risk identity", Some(60), || criterion1(&instances));
    run(&mut lines, 2, "S <= 1 under prior-ratio luckiness", None, || criterion2(&instances));
    run(&mut lines, 3, "partition bound and composite decomposition", None, criterion3);
    run(&mut lines, 4, "ESI mean and tail implications", None, || criterion4(&instances));
    run(&mut lines, 5, "KL-Renyi annealed bridge", None, || criterion5(&instances));
    run(&mut lines, 6, "local complexity chain", Some(120), criterion6);
    run(&mut lines, 7, "equalizer", None, || criterion7(&instances));
    run(&mut lines, 8, "rate slopes", Some(600), criterion8);
    run(&mut lines, 9, "two-part MDL", None, criterion9);
    run(&mut lines, 10, "Monte Carlo consistency", None, || criterion10(&instances));
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!("acceptance: {} of {} criteria passed", lines.len() - failed.len(), lines.len());
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}

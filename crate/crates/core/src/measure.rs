//! Exact enumeration of product sample spaces and seeded Monte Carlo.
//!
//! Samples are enumerated as an odometer over outcome indices with the last
//! position moving fastest. Large enumerations are cut into fixed-size chunks
//! that may run on several threads; partial results are always merged in
//! chunk order, so the output does not depend on the thread count.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::{LogAccumulator, SignedLogAccumulator};
use crate::problem::LearningProblem;

pub const DEFAULT_EXACT_CAP: u64 = 10_000_000;
const CHUNK: u64 = 1 << 15;

/// Seeded Monte Carlo settings. `(seed, stream_id)` fixes the draw sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { trials: 10_000, seed: 0, stream_id: 0 }
    }
}

impl McConfig {
    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Limits shared by every computation that may enumerate or sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComputeConfig {
    pub exact_cap: u64,
    pub mc: McConfig,
    pub threads: usize,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        Self {
            exact_cap: DEFAULT_EXACT_CAP,
            mc: McConfig::default(),
            threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// An expectation with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: Option<f64>,
    pub method: Method,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: None, method: Method::Exact }
    }
}

/// i.i.d. product of a single-outcome measure, n times.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure {
    mass: Vec<f64>,
    log_mass: Vec<f64>,
    log_nu: Vec<f64>,
    n: usize,
}

impl ProductMeasure {
    pub fn new(mass: &[f64], nu: &[f64], n: usize) -> Result<Self> {
        if mass.is_empty() || mass.len() != nu.len() {
            return Err(Error::InvalidConfig("measure and base measure lengths differ".into()));
        }
        Ok(Self {
            mass: mass.to_vec(),
            log_mass: mass.iter().map(|m| m.ln()).collect(),
            log_nu: nu.iter().map(|v| v.ln()).collect(),
            n,
        })
    }

    /// P^n for the problem's true distribution.
    pub fn of_problem(problem: &LearningProblem) -> Self {
        Self::new(problem.p().masses(), problem.space().nu(), problem.n())
            .expect("problem is validated")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_outcomes(&self) -> usize {
        self.mass.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// |Z|^n as a float (may exceed u64).
    pub fn num_states(&self) -> f64 {
        (self.mass.len() as f64).powi(self.n as i32)
    }

    /// |Z|^n if it is at most `cap`.
    pub fn states_within(&self, cap: u64) -> Result<u64> {
        let states = self.num_states();
        if states > cap as f64 {
            return Err(Error::EnumerationCapExceeded { states, cap });
        }
        Ok((self.mass.len() as u64).pow(self.n as u32))
    }

    pub fn enumerate(&self) -> SampleEnumerator<'_> {
        let total = (self.mass.len() as u64).saturating_pow(self.n as u32);
        self.enumerate_range(0, total)
    }

    pub fn enumerate_range(&self, start: u64, end: u64) -> SampleEnumerator<'_> {
        let k = self.mass.len() as u64;
        let mut cursor = vec![0usize; self.n];
        let mut rest = start;
        for slot in cursor.iter_mut().rev() {
            *slot = (rest % k) as usize;
            rest /= k;
        }
        SampleEnumerator { measure: self, cursor, next: start, end, started: false }
    }

    /// Log probability of a sample under the product measure.
    pub fn log_prob(&self, sample: &[usize]) -> f64 {
        sample.iter().map(|&z| self.log_mass[z]).sum()
    }

    pub fn log_nu(&self, sample: &[usize]) -> f64 {
        sample.iter().map(|&z| self.log_nu[z]).sum()
    }

    pub fn sampler(&self, cfg: &McConfig) -> Result<McSampler> {
        McSampler::new(&self.mass, self.n, cfg)
    }
}

/// One enumerated sample.
#[derive(Debug, Clone, Copy)]
pub struct EnumeratedSample<'s> {
    pub index: u64,
    pub outcomes: &'s [usize],
    pub log_prob: f64,
    pub log_nu: f64,
}

/// Odometer over outcome sequences, last position fastest.
pub struct SampleEnumerator<'a> {
    measure: &'a ProductMeasure,
    cursor: Vec<usize>,
    next: u64,
    end: u64,
    started: bool,
}

impl SampleEnumerator<'_> {
    /// Advance and return the next sample, or `None` when exhausted.
    pub fn next_sample(&mut self) -> Option<EnumeratedSample<'_>> {
        if self.next >= self.end {
            return None;
        }
        if self.started {
            let k = self.measure.mass.len();
            for slot in self.cursor.iter_mut().rev() {
                *slot += 1;
                if *slot < k {
                    break;
                }
                *slot = 0;
            }
        }
        self.started = true;
        let index = self.next;
        self.next += 1;
        Some(EnumeratedSample {
            index,
            outcomes: &self.cursor,
            log_prob: self.measure.log_prob(&self.cursor),
            log_nu: self.measure.log_nu(&self.cursor),
        })
    }
}

/// Chunked, order-stable reduction over every sample of `measure`.
///
/// `step` sees only samples of positive probability unless `include_null`.
pub fn exact_fold<A, I, S, M>(
    measure: &ProductMeasure,
    cfg: &ComputeConfig,
    include_null: bool,
    init: I,
    step: S,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, &EnumeratedSample<'_>) + Sync,
    M: Fn(&mut A, A),
{
    let total = measure.states_within(cfg.exact_cap)?;
    let chunks = total.div_ceil(CHUNK).max(1);
    let run_chunk = |c: u64| {
        let mut acc = init();
        let mut it = measure.enumerate_range(c * CHUNK, ((c + 1) * CHUNK).min(total));
        while let Some(s) = it.next_sample() {
            if include_null || s.log_prob > f64::NEG_INFINITY {
                step(&mut acc, &s);
            }
        }
        acc
    };
    let threads = (cfg.threads.max(1) as u64).min(chunks);
    let mut parts: Vec<(u64, A)> = if threads <= 1 {
        (0..chunks).map(|c| (c, run_chunk(c))).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let run_chunk = &run_chunk;
                    scope.spawn(move || {
                        (w..chunks)
                            .step_by(threads as usize)
                            .map(|c| (c, run_chunk(c)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("enumeration worker panicked"))
                .collect()
        })
    };
    parts.sort_by_key(|(c, _)| *c);
    let mut iter = parts.into_iter();
    let (_, mut acc) = iter.next().expect("at least one chunk");
    for (_, part) in iter {
        merge(&mut acc, part);
    }
    Ok(acc)
}

/// Σ_{z^n} P(z^n) g(z^n) by signed log-sum-exp.
pub fn exact_expectation<G>(measure: &ProductMeasure, cfg: &ComputeConfig, g: G) -> Result<f64>
where
    G: Fn(&[usize]) -> f64 + Sync,
{
    let acc = exact_fold(
        measure,
        cfg,
        false,
        SignedLogAccumulator::new,
        |acc, s| acc.add_weighted(s.log_prob, g(s.outcomes)),
        |a, b| a.merge(&b),
    )?;
    Ok(acc.value())
}

/// ln Σ_{z^n} P(z^n) exp(h(z^n)); `h` may return −∞.
pub fn exact_log_expectation<H>(measure: &ProductMeasure, cfg: &ComputeConfig, h: H) -> Result<f64>
where
    H: Fn(&[usize]) -> f64 + Sync,
{
    let acc = exact_fold(
        measure,
        cfg,
        false,
        LogAccumulator::new,
        |acc, s| acc.add(s.log_prob + h(s.outcomes)),
        |a, b| a.merge(&b),
    )?;
    Ok(acc.value())
}

/// Draws samples of length n from a single-outcome distribution.
pub struct McSampler {
    rng: ChaCha8Rng,
    dist: WeightedIndex<f64>,
    n: usize,
}

impl McSampler {
    pub fn new(mass: &[f64], n: usize, cfg: &McConfig) -> Result<Self> {
        let dist = WeightedIndex::new(mass)
            .map_err(|e| Error::InvalidConfig(format!("sampling weights: {e}")))?;
        Ok(Self { rng: cfg.rng(), dist, n })
    }

    pub fn fill(&mut self, buf: &mut Vec<usize>) {
        buf.clear();
        buf.extend((0..self.n).map(|_| self.dist.sample(&mut self.rng)));
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Running mean and standard error (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { value: self.mean, std_error: Some(self.std_error()), method: Method::MonteCarlo }
    }
}

/// Sample mean and standard error of g over i.i.d. draws from the measure.
pub fn mc_expectation<G>(measure: &ProductMeasure, cfg: &McConfig, mut g: G) -> Result<Estimate>
where
    G: FnMut(&[usize]) -> f64,
{
    if cfg.trials < 2 {
        return Err(Error::InvalidConfig("Monte Carlo needs at least 2 trials".into()));
    }
    let mut sampler = measure.sampler(cfg)?;
    let mut acc = MeanAccumulator::default();
    let mut buf = Vec::with_capacity(measure.n);
    for _ in 0..cfg.trials {
        sampler.fill(&mut buf);
        acc.push(g(&buf));
    }
    Ok(acc.estimate())
}

/// Exact when the state count is under the cap, Monte Carlo otherwise.
pub fn expectation<G>(measure: &ProductMeasure, cfg: &ComputeConfig, g: G) -> Result<Estimate>
where
    G: Fn(&[usize]) -> f64 + Sync,
{
    match exact_expectation(measure, cfg, &g) {
        Ok(v) => Ok(Estimate::exact(v)),
        Err(Error::EnumerationCapExceeded { .. }) => mc_expectation(measure, &cfg.mc, &g),
        Err(e) => Err(e),
    }
}

//! Log-domain accumulation with compensated merges.

/// ln Σ exp(x_i); −∞ for an empty slice or all −∞ inputs.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut acc = LogAccumulator::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Running ln Σ exp(x_i).
///
/// Terms are stored relative to the running maximum and summed with
/// Neumaier compensation, so merging partial sums in any grouping changes the
/// result only at the level of a few ulps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogAccumulator {
    max: f64,
    sum: f64,
    comp: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl LogAccumulator {
    pub fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0, comp: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x == f64::INFINITY || x.is_nan() {
            self.max = x;
            self.sum = 1.0;
            self.comp = 0.0;
            return;
        }
        if !self.max.is_finite() {
            if self.max == f64::NEG_INFINITY {
                self.max = x;
                self.sum = 1.0;
                self.comp = 0.0;
            }
            return;
        }
        if x > self.max {
            let scale = (self.max - x).exp();
            self.sum *= scale;
            self.comp *= scale;
            self.max = x;
            self.neumaier(1.0);
        } else {
            self.neumaier((x - self.max).exp());
        }
    }

    fn neumaier(&mut self, term: f64) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.comp += (self.sum - t) + term;
        } else {
            self.comp += (term - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &LogAccumulator) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY || !other.max.is_finite() {
            *self = *other;
            return;
        }
        if !self.max.is_finite() {
            return;
        }
        if other.max > self.max {
            let scale = (self.max - other.max).exp();
            self.sum *= scale;
            self.comp *= scale;
            self.max = other.max;
            self.neumaier(other.sum);
            self.comp += other.comp;
        } else {
            let scale = (other.max - self.max).exp();
            self.neumaier(other.sum * scale);
            self.comp += other.comp * scale;
        }
    }

    pub fn value(&self) -> f64 {
        if !self.max.is_finite() {
            return self.max;
        }
        self.max + (self.sum + self.comp).ln()
    }
}

/// Signed sum Σ s_i exp(x_i) kept as two log accumulators.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SignedLogAccumulator {
    pub pos: LogAccumulator,
    pub neg: LogAccumulator,
}

impl SignedLogAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `weight * value` where `log_weight = ln weight`.
    pub fn add_weighted(&mut self, log_weight: f64, value: f64) {
        if value > 0.0 {
            self.pos.add(log_weight + value.ln());
        } else if value < 0.0 {
            self.neg.add(log_weight + (-value).ln());
        } else if value.is_nan() {
            self.pos.add(f64::NAN);
        }
    }

    pub fn merge(&mut self, other: &SignedLogAccumulator) {
        self.pos.merge(&other.pos);
        self.neg.merge(&other.neg);
    }

    pub fn value(&self) -> f64 {
        let p = self.pos.value();
        let n = self.neg.value();
        if n == f64::NEG_INFINITY {
            return p.exp();
        }
        if p == f64::NEG_INFINITY {
            return -n.exp();
        }
        // exp(p) − exp(n) factored around the larger exponent.
        if p >= n {
            p.exp() * (-(n - p).exp_m1())
        } else {
            -(n.exp() * (-(p - n).exp_m1()))
        }
    }
}

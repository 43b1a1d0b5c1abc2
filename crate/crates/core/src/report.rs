use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    LessEq,
    #[serde(rename = "==")]
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The search budget was too small to confirm; not a refutation.
    Inconclusive,
}

/// Outcome of checking one identity or inequality.
///
/// For `<=` the slack is `rhs - lhs`; for `==` it is `-|lhs - rhs|`. A check
/// passes when `slack >= -tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub name: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn slack_of(relation: Relation, lhs: f64, rhs: f64) -> f64 {
    if lhs == rhs {
        return 0.0;
    }
    match relation {
        Relation::LessEq => rhs - lhs,
        Relation::Equal => -(lhs - rhs).abs(),
    }
}

impl VerificationResult {
    pub fn new(name: impl Into<String>, relation: Relation, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = slack_of(relation, lhs, rhs);
        let verdict = if slack >= -tolerance { Verdict::Pass } else { Verdict::Fail };
        Self { name: name.into(), relation, lhs, rhs, slack, tolerance, verdict, notes: Vec::new() }
    }

    pub fn leq(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(name, Relation::LessEq, lhs, rhs, tolerance)
    }

    pub fn equal(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(name, Relation::Equal, lhs, rhs, tolerance)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn inconclusive(mut self) -> Self {
        if self.verdict == Verdict::Fail {
            self.verdict = Verdict::Inconclusive;
        }
        self
    }

    /// Combine several results; the combined one fails if any part fails and
    /// reports the part with the smallest slack.
    pub fn all(name: impl Into<String>, parts: &[VerificationResult]) -> Self {
        let worst = parts
            .iter()
            .min_by(|a, b| (a.slack + a.tolerance).total_cmp(&(b.slack + b.tolerance)))
            .cloned();
        let name = name.into();
        match worst {
            None => Self::leq(name, 0.0, 0.0, 0.0).with_note("no cases"),
            Some(w) => {
                let verdict = if parts.iter().any(|p| p.verdict == Verdict::Fail) {
                    Verdict::Fail
                } else if parts.iter().any(|p| p.verdict == Verdict::Inconclusive) {
                    Verdict::Inconclusive
                } else {
                    Verdict::Pass
                };
                let mut r = Self { name, verdict, ..w.clone() };
                r.notes = vec![format!("{} cases; worst: {}", parts.len(), w.name)];
                r.notes.extend(w.notes);
                r
            }
        }
    }
}

/// Tracks the case with the smallest slack across many evaluations.
#[derive(Debug, Clone)]
pub struct WorstCase {
    relation: Relation,
    worst: Option<(f64, f64, f64, u64)>,
    count: u64,
}

impl WorstCase {
    pub fn new(relation: Relation) -> Self {
        Self { relation, worst: None, count: 0 }
    }

    pub fn push(&mut self, lhs: f64, rhs: f64, index: u64) {
        self.count += 1;
        let slack = slack_of(self.relation, lhs, rhs);
        let replace = match self.worst {
            None => true,
            Some((s, ..)) => slack < s || (slack.is_nan() && !s.is_nan()),
        };
        if replace {
            self.worst = Some((slack, lhs, rhs, index));
        }
    }

    pub fn merge(&mut self, other: WorstCase) {
        self.count += other.count;
        if let Some((s, l, r, i)) = other.worst {
            let replace = match self.worst {
                None => true,
                Some((t, ..)) => s < t,
            };
            if replace {
                self.worst = Some((s, l, r, i));
            }
        }
    }

    pub fn worst_index(&self) -> Option<u64> {
        self.worst.map(|w| w.3)
    }

    pub fn finish(&self, name: impl Into<String>, tolerance: f64) -> VerificationResult {
        match self.worst {
            None => VerificationResult::new(name, self.relation, 0.0, 0.0, tolerance).with_note("no cases"),
            Some((_, l, r, i)) => VerificationResult::new(name, self.relation, l, r, tolerance)
                .with_note(format!("worst of {} cases at sample index {i}", self.count)),
        }
    }
}

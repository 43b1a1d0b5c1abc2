//! Unified complexities for finite learning problems.
//!
//! A [`LearningProblem`] is a finite outcome space with a true distribution
//! and a finite class of predictors given by their losses. From it the crate
//! builds entropified densities q_f, Shtarkov integrals and the complexities
//! derived from them (NML, luckiness, PAC-Bayesian), and checks the excess-risk
//! identities and inequalities that connect them. Expectations are exact over
//! all |Z|^n samples when that is below a cap and seeded Monte Carlo otherwise.

pub mod empirical;
pub mod entropify;
pub mod error;
pub mod esi;
pub mod estimators;
pub mod harness;
pub mod logspace;
pub mod measure;
pub mod problem;
pub mod report;
pub mod shtarkov;

pub use entropify::EntropifiedModel;
pub use error::{Error, Result};
pub use measure::{ComputeConfig, McConfig, Method};
pub use problem::{build_problem, BuildOptions, LearningProblem, ProblemSpec};
pub use report::{VerificationResult, Verdict};
pub use shtarkov::{ComplexityReport, Estimator, Luckiness, Partition};

//! Trust inference and propagation for teams of humans and robots.
//!
//! Trust that a human holds in a robot is a Beta random variable whose shape
//! parameters accumulate experience. Experience arrives directly, from working
//! with the robot, and indirectly, from a teammate's communicated trust.
//!
//! - [`special`]: gamma-family functions and the Beta distribution.
//! - [`kernel`]: trust state, update rules, and trajectory replay.
//! - [`inference`]: log-likelihood, gradient, fitting, and fit metrics.
//! - [`simulator`]: seeded two-human/two-robot experiment simulation.
//! - [`dataio`]: CSV and TOML persistence.
//! - [`cli`]: the `tip` command-line front end.

pub mod cli;
pub mod dataio;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod simulator;
pub mod special;

pub use error::{Error, Result};
pub use inference::{
    fit, fit_direct_only, fit_model, fit_with, gradient, log_likelihood, paired_summary, rmse,
    rmse_by_robot, FitConfig, FitResult, FreeParams, LineSearch, Model, PairedSummary,
};
pub use kernel::{
    asymptotic_trust, direct_update, indirect_update, replay, EventKind, ExperienceState,
    TipParams, Trajectory, TrustEvent,
};
pub use simulator::{ExperimentConfig, PairKey, ReportNoise};
pub use special::{digamma, log_gamma, BetaParams};

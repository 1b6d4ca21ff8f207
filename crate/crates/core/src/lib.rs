//! Simulated tempering with a parallel adaptive Wang-Landau (PAWL) bias.
//!
//! The sampler runs `M` particles on the joint space `(x, k)` where `k`
//! indexes a temperature ladder. A shared weight vector `theta` acts as the
//! pseudo-prior on rungs and is learned by stochastic approximation so that
//! every rung is occupied equally. The within-rung random-walk scale can be
//! adapted toward a 0.234 acceptance rate.
//!
//! ```
//! use pawl_core::{config::RunConfig, engine};
//!
//! let mut cfg = RunConfig::default();
//! cfg.engine.iterations = 2_000;
//! cfg.engine.particles = 4;
//! let summary = engine::run_summary(&cfg).unwrap();
//! assert_eq!(summary.occupation.len(), 10);
//! ```

pub mod bias;
pub mod config;
pub mod engine;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod partition;
pub mod target;

pub use bias::{flat_histogram_met, BiasState, StepSchedule};
pub use config::RunConfig;
pub use engine::{posterior_mean, run, run_summary, Engine, ParticleState, Summary, Trace, TraceRecord};
pub use error::{Error, Result};
pub use kernels::{log_accept_rung, log_accept_x, propose_x, MoveComposition, MoveOutcome, ProposalState};
pub use partition::{SplitPolicy, TemperatureLadder};
pub use target::{GaussianMixture, TargetDensity, TemperedDensity};

//! Run configuration, read from a TOML file with one table per subsystem.
//! Every key has a default matching the bimodal benchmark; unknown keys are
//! rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bias::StepSchedule;
use crate::error::{Error, Result};
use crate::kernels::{MoveComposition, ProposalState};
use crate::partition::{SplitPolicy, TemperatureLadder};
use crate::target::{Component, GaussianMixture};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub target: TargetConfig,
    pub ladder: LadderConfig,
    pub schedule: ScheduleConfig,
    pub proposal: ProposalConfig,
    pub engine: EngineConfig,
    pub split: SplitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Required for RMSE unless the target is the built-in bimodal mixture.
    pub true_mean: Option<f64>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            weights: vec![0.5, 0.5],
            means: vec![-15.0, 15.0],
            sds: vec![1.0, 1.0],
            true_mean: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    /// Explicit temperatures; overrides `t_max`/`rungs` when present.
    pub temps: Option<Vec<f64>>,
    pub t_max: f64,
    pub rungs: usize,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            temps: None,
            t_max: 10.0,
            rungs: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Bias frozen at uniform: plain simulated tempering.
    None,
    Deterministic,
    WangLandau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub t0: u64,
    pub c: f64,
    pub gamma0: f64,
    pub decay: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::WangLandau,
            t0: 1,
            c: 0.1,
            gamma0: 1.0,
            decay: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionConfig {
    Both,
    Alternate,
    XOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposalConfig {
    pub sigma: f64,
    pub adaptive: bool,
    pub target_rate: f64,
    pub adapt_exponent: f64,
    /// Last sweep at which the scale adapts; 0 adapts for the whole run.
    pub adapt_until: u64,
    pub composition: CompositionConfig,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            adaptive: false,
            target_rate: 0.234,
            adapt_exponent: 0.6,
            adapt_until: 0,
            composition: CompositionConfig::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Normal,
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRungs {
    Cold,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub iterations: u64,
    pub particles: usize,
    pub seed: u64,
    pub init: InitKind,
    pub init_mean: f64,
    pub init_sd: f64,
    pub init_rungs: InitRungs,
    pub record_stride: u64,
    /// Sweeps in the trailing acceptance-rate window.
    pub acceptance_window: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            particles: 1,
            seed: 1,
            init: InitKind::Normal,
            init_mean: 0.0,
            init_sd: 1.0,
            init_rungs: InitRungs::Cold,
            record_stride: 1,
            acceptance_window: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub enabled: bool,
    pub skew_threshold: f64,
    pub min_samples: u64,
    pub max_rungs: usize,
    /// Sweeps between split checks; 0 checks only when the flat-histogram
    /// criterion fires.
    pub check_every: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let p = SplitPolicy::default();
        Self {
            enabled: p.enabled,
            skew_threshold: p.skew_threshold,
            min_samples: p.min_samples,
            max_rungs: p.max_rungs,
            check_every: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let ladder = self.ladder()?;
        self.mixture()?;
        self.schedule()?;
        let p = &self.proposal;
        if !(p.sigma > 0.0 && p.sigma.is_finite()) {
            return Err(Error::config("proposal.sigma", "must be positive"));
        }
        if !(p.target_rate > 0.0 && p.target_rate < 1.0) {
            return Err(Error::config("proposal.target_rate", "must lie in (0, 1)"));
        }
        if !(p.adapt_exponent > 0.5 && p.adapt_exponent <= 1.0) {
            return Err(Error::config("proposal.adapt_exponent", "must lie in (0.5, 1]"));
        }
        let e = &self.engine;
        if e.iterations == 0 {
            return Err(Error::config("engine.iterations", "must be >= 1"));
        }
        if e.particles == 0 {
            return Err(Error::config("engine.particles", "must be >= 1"));
        }
        if e.record_stride == 0 {
            return Err(Error::config("engine.record_stride", "must be >= 1"));
        }
        if e.acceptance_window == 0 {
            return Err(Error::config("engine.acceptance_window", "must be >= 1"));
        }
        if !(e.init_mean.is_finite() && e.init_sd >= 0.0 && e.init_sd.is_finite()) {
            return Err(Error::config("engine.init_sd", "initial distribution must be finite with sd >= 0"));
        }
        self.split_policy().validate(ladder.len())?;
        Ok(())
    }

    pub fn mixture(&self) -> Result<GaussianMixture> {
        let t = &self.target;
        if t.means.len() != t.weights.len() || t.sds.len() != t.weights.len() {
            return Err(Error::config("target", "weights, means and sds must have equal lengths"));
        }
        GaussianMixture::new(
            t.weights
                .iter()
                .zip(&t.means)
                .zip(&t.sds)
                .map(|((&weight, &mean), &sd)| Component { weight, mean, sd })
                .collect(),
        )
    }

    /// Known mean of the target for RMSE: explicit `target.true_mean`, or 0
    /// for the built-in bimodal mixture.
    pub fn true_mean(&self) -> Result<f64> {
        match self.target.true_mean {
            Some(m) => Ok(m),
            None if self.mixture()?.is_bimodal_benchmark() => Ok(0.0),
            None => Err(Error::config("target.true_mean", "required to compute RMSE for a custom target")),
        }
    }

    pub fn ladder(&self) -> Result<TemperatureLadder> {
        match &self.ladder.temps {
            Some(t) => TemperatureLadder::new(t.clone()),
            None => TemperatureLadder::arithmetic(self.ladder.t_max, self.ladder.rungs),
        }
    }

    /// `None` when the bias is frozen.
    pub fn schedule(&self) -> Result<Option<StepSchedule>> {
        let s = &self.schedule;
        let schedule = match s.kind {
            ScheduleKind::None => return Ok(None),
            ScheduleKind::Deterministic => StepSchedule::Deterministic { t0: s.t0 },
            ScheduleKind::WangLandau => StepSchedule::FlatHistogram {
                c: s.c,
                gamma0: s.gamma0,
                decay: s.decay,
            },
        };
        schedule.validate()?;
        Ok(Some(schedule))
    }

    pub fn proposal_state(&self) -> ProposalState {
        ProposalState {
            log_sigma: self.proposal.sigma.ln(),
            target_rate: self.proposal.target_rate,
            adapt_rate_exponent: self.proposal.adapt_exponent,
        }
    }

    pub fn composition(&self) -> MoveComposition {
        match self.proposal.composition {
            CompositionConfig::Both => MoveComposition::Both,
            CompositionConfig::Alternate => MoveComposition::Alternate,
            CompositionConfig::XOnly => MoveComposition::XOnly,
        }
    }

    pub fn split_policy(&self) -> SplitPolicy {
        SplitPolicy {
            enabled: self.split.enabled,
            skew_threshold: self.split.skew_threshold,
            min_samples: self.split.min_samples,
            max_rungs: self.split.max_rungs,
        }
    }
}

//! Within-rung random-walk Metropolis, rung moves weighted by the bias
//! pseudo-priors, and Robbins-Monro scaling of the proposal width.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bias::BiasState;
use crate::error::{Error, Result};
use crate::partition::TemperatureLadder;
use crate::target::TargetDensity;

/// Global random-walk scale, adapted in the log domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalState {
    pub log_sigma: f64,
    pub target_rate: f64,
    pub adapt_rate_exponent: f64,
}

impl ProposalState {
    pub fn new(sigma: f64) -> Self {
        Self {
            log_sigma: sigma.ln(),
            target_rate: 0.234,
            adapt_rate_exponent: 0.6,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    /// `log_sigma += t^(-exponent) * (alpha - target_rate)`.
    pub fn adapt_scale(&mut self, alpha: f64, t: u64) -> Result<()> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::contract(format!("acceptance probability {alpha} outside [0, 1]")));
        }
        if t == 0 {
            return Err(Error::contract("adaptation requested at t = 0"));
        }
        let rho = (t as f64).powf(-self.adapt_rate_exponent);
        self.log_sigma += rho * (alpha - self.target_rate);
        Ok(())
    }
}

/// Which moves a sweep performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MoveComposition {
    /// x-move then rung-move every sweep.
    #[default]
    Both,
    /// x-moves on odd sweeps, rung-moves on even sweeps.
    Alternate,
    XOnly,
}

impl MoveComposition {
    pub fn moves_at(self, t: u64) -> (bool, bool) {
        match self {
            MoveComposition::Both => (true, true),
            MoveComposition::Alternate => (!t.is_multiple_of(2), t.is_multiple_of(2)),
            MoveComposition::XOnly => (true, false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveOutcome {
    pub new_x: f64,
    pub new_rung: usize,
    pub accepted_x: bool,
    pub accepted_rung: bool,
    pub log_alpha_x: f64,
    pub log_alpha_rung: f64,
}

/// Metropolis log acceptance for `x -> x_prop` at temperature `temperature`.
pub fn log_accept_x<D: TargetDensity>(target: &D, temperature: f64, x: f64, x_prop: f64) -> f64 {
    log_accept_x_cached(target.log_density(x), target.log_density(x_prop), temperature)
}

#[inline]
pub(crate) fn log_accept_x_cached(log_pi: f64, log_pi_prop: f64, temperature: f64) -> f64 {
    ((log_pi_prop - log_pi) / temperature).min(0.0)
}

/// Log acceptance of a rung move `k -> k_prop` at fixed `x`.
///
/// `k_prop` must be a ladder neighbour of `k`; proposals that fall off
/// either end of the ladder return `-inf`.
pub fn log_accept_rung<D: TargetDensity>(
    target: &D,
    ladder: &TemperatureLadder,
    bias: &BiasState,
    x: f64,
    k: usize,
    k_prop: isize,
) -> Result<f64> {
    ladder.rung_index(k)?;
    if (k_prop - k as isize).abs() != 1 {
        return Err(Error::contract(format!("rung proposal {k} -> {k_prop} is not a unit step")));
    }
    if bias.len() != ladder.len() {
        return Err(Error::contract("bias and ladder sizes differ"));
    }
    Ok(log_accept_rung_cached(target.log_density(x), ladder, bias, k, k_prop))
}

#[inline]
pub(crate) fn log_accept_rung_cached(
    log_pi: f64,
    ladder: &TemperatureLadder,
    bias: &BiasState,
    k: usize,
    k_prop: isize,
) -> f64 {
    if k_prop < 0 || k_prop as usize >= ladder.len() {
        return f64::NEG_INFINITY;
    }
    let kp = k_prop as usize;
    let temps = ladder.temps();
    let tempering = log_pi * (1.0 / temps[kp] - 1.0 / temps[k]);
    // pseudo-prior ratio: -log theta(kp) + log theta(k)
    (tempering + bias.log_theta[k] - bias.log_theta[kp]).min(0.0)
}

/// `x + sigma * z` with exactly one standard normal draw from `rng`.
pub fn propose_x<R: Rng + ?Sized>(x: f64, sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    x + sigma * z
}

/// Current chain position with its cached `log pi(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Walker {
    pub x: f64,
    pub rung: usize,
    pub log_pi: f64,
}

/// One composite step for a single particle: optional x-move, then optional
/// rung move. Every enabled move consumes a fixed number of draws
/// (x: normal + uniform, rung: direction bit + uniform) whether or not it is
/// accepted.
pub(crate) fn step_walker<D: TargetDensity, R: Rng + ?Sized>(
    target: &D,
    ladder: &TemperatureLadder,
    bias: &BiasState,
    sigma: f64,
    moves: (bool, bool),
    walker: &mut Walker,
    rng: &mut R,
) -> MoveOutcome {
    let mut accepted_x = false;
    let mut log_alpha_x = 0.0;
    if moves.0 {
        let x_prop = propose_x(walker.x, sigma, rng);
        let log_pi_prop = target.log_density(x_prop);
        log_alpha_x = log_accept_x_cached(walker.log_pi, log_pi_prop, ladder.temperature(walker.rung));
        let u: f64 = rng.random();
        if u.ln() < log_alpha_x {
            walker.x = x_prop;
            walker.log_pi = log_pi_prop;
            accepted_x = true;
        }
    }
    let mut accepted_rung = false;
    let mut log_alpha_rung = 0.0;
    if moves.1 {
        let up: bool = rng.random();
        let k = walker.rung;
        let k_prop = if up { k as isize + 1 } else { k as isize - 1 };
        log_alpha_rung = log_accept_rung_cached(walker.log_pi, ladder, bias, k, k_prop);
        let u: f64 = rng.random();
        if u.ln() < log_alpha_rung {
            walker.rung = k_prop as usize;
            accepted_rung = true;
        }
    }
    MoveOutcome {
        new_x: walker.x,
        new_rung: walker.rung,
        accepted_x,
        accepted_rung,
        log_alpha_x,
        log_alpha_rung,
    }
}

//! Lock-step particle engine. Between barriers every particle moves
//! independently with its own RNG stream against a shared snapshot of the
//! bias, ladder and proposal scale; at the barrier a single writer updates
//! the bias, the proposal scale and (optionally) the ladder.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bias::{flat_histogram_met, BiasState, StepSchedule};
use crate::config::{InitKind, InitRungs, RunConfig};
use crate::error::{Error, Result};
use crate::kernels::{step_walker, MoveComposition, MoveOutcome, ProposalState, Walker};
use crate::partition::{SplitPolicy, SplitTracker, TemperatureLadder};
use crate::target::{GaussianMixture, TargetDensity};

/// Below this many particles the move loop runs on the calling thread.
pub const PARALLEL_MIN_PARTICLES: usize = 16;

pub const TRACE_HEADER: &str = "t,particle,x,rung,acc_x,acc_rung,sigma,gamma,fh_events";

/// RNG stream of particle `particle` for a run seeded with `seed`.
/// Stream 0 of the seed is reserved for the engine.
pub fn particle_stream(seed: u64, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(particle as u64 + 1);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub x: f64,
    pub rung: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    pub particle: usize,
    pub x: f64,
    pub rung: usize,
    pub accepted_x: bool,
    pub accepted_rung: bool,
    /// Proposal scale used during the sweep.
    pub sigma: f64,
    /// Step size applied at the sweep's barrier (0 when the bias is frozen).
    pub gamma: f64,
    /// Flat-histogram events after the barrier.
    pub fh_events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub final_bias: BiasState,
    pub final_ladder: TemperatureLadder,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                r.particle,
                r.x,
                r.rung,
                u8::from(r.accepted_x),
                u8::from(r.accepted_rung),
                r.sigma,
                r.gamma,
                r.fh_events
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Mean of `x` over recorded states on the cold rung.
pub fn posterior_mean(trace: &Trace) -> Result<f64> {
    let (sum, n) = trace
        .records
        .iter()
        .filter(|r| r.rung == 0)
        .fold((0.0, 0u64), |(s, n), r| (s + r.x, n + 1));
    if n == 0 {
        return Err(Error::NoColdSamples);
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub iterations: u64,
    pub particles: usize,
    /// Cold-rung states over the whole run, initial states included.
    pub cold_samples: u64,
    cold_sum: f64,
    /// Fraction of particle-sweeps per rung of the final ladder.
    pub occupation: Vec<f64>,
    pub theta: Vec<f64>,
    pub temps: Vec<f64>,
    pub accept_x: f64,
    pub accept_rung: f64,
    /// x-move acceptance rate over the trailing window.
    pub accept_x_window: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub fh_events: u64,
    pub splits: u64,
    pub wall_clock_s: f64,
}

impl Summary {
    /// Mean of `x` over every cold-rung chain state, `X_0` included.
    pub fn posterior_mean(&self) -> Result<f64> {
        if self.cold_samples == 0 {
            return Err(Error::NoColdSamples);
        }
        Ok(self.cold_sum / self.cold_samples as f64)
    }

    /// Flat `key = value` text block.
    pub fn to_kv_string(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mean = self.posterior_mean().map_or_else(|_| "none".to_string(), |m| m.to_string());
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "particles = {}", self.particles);
        let _ = writeln!(s, "rungs = {}", self.temps.len());
        let _ = writeln!(s, "posterior_mean = {mean}");
        let _ = writeln!(s, "cold_samples = {}", self.cold_samples);
        let _ = writeln!(s, "occupation = {}", list(&self.occupation));
        let _ = writeln!(s, "theta = {}", list(&self.theta));
        let _ = writeln!(s, "temps = {}", list(&self.temps));
        let _ = writeln!(s, "accept_x = {}", self.accept_x);
        let _ = writeln!(s, "accept_rung = {}", self.accept_rung);
        let _ = writeln!(s, "accept_x_window = {}", self.accept_x_window);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "fh_events = {}", self.fh_events);
        let _ = writeln!(s, "splits = {}", self.splits);
        let _ = writeln!(s, "wall_clock_s = {}", self.wall_clock_s);
        s
    }
}

#[derive(Debug, Clone, Default)]
struct RunStats {
    occupancy: Vec<u64>,
    cold_sum: f64,
    cold_samples: u64,
    accepted_x: u64,
    x_moves: u64,
    accepted_rung: u64,
    rung_moves: u64,
    window: VecDeque<(u64, u64)>,
    window_accepted: u64,
    window_moves: u64,
    window_len: usize,
    splits: u64,
    last_gamma: f64,
}

impl RunStats {
    fn push_window(&mut self, accepted: u64, moves: u64) {
        self.window.push_back((accepted, moves));
        self.window_accepted += accepted;
        self.window_moves += moves;
        if self.window.len() > self.window_len {
            let (a, m) = self.window.pop_front().expect("non-empty");
            self.window_accepted -= a;
            self.window_moves -= m;
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Full sampler state for one run.
pub struct Engine<D> {
    target: D,
    ladder: TemperatureLadder,
    bias: BiasState,
    proposal: ProposalState,
    schedule: Option<StepSchedule>,
    composition: MoveComposition,
    adaptive: bool,
    adapt_until: u64,
    split_policy: SplitPolicy,
    split_check_every: u64,
    tracker: Option<SplitTracker>,
    walkers: Vec<Walker>,
    rngs: Vec<ChaCha8Rng>,
    outcomes: Vec<MoveOutcome>,
    iterations: u64,
    record_stride: u64,
    t: u64,
    stats: RunStats,
}

impl Engine<GaussianMixture> {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let target = config.mixture()?;
        Self::with_target(config, target)
    }
}

impl<D: TargetDensity + Sync> Engine<D> {
    /// Builds the engine with a caller-supplied target; the config's
    /// `[target]` table is ignored.
    pub fn with_target(config: &RunConfig, target: D) -> Result<Self> {
        config.validate()?;
        let ladder = config.ladder()?;
        let d = ladder.len();
        let e = &config.engine;
        let mut rngs: Vec<ChaCha8Rng> = (0..e.particles).map(|p| particle_stream(e.seed, p)).collect();
        let walkers: Vec<Walker> = rngs
            .iter_mut()
            .map(|rng| {
                let x = match e.init {
                    InitKind::Normal => {
                        let z: f64 = rng.sample(StandardNormal);
                        e.init_mean + e.init_sd * z
                    }
                    InitKind::Point => e.init_mean,
                };
                let rung = match e.init_rungs {
                    InitRungs::Cold => 0,
                    InitRungs::Uniform => rng.random_range(0..d),
                };
                Walker {
                    x,
                    rung,
                    log_pi: target.log_density(x),
                }
            })
            .collect();
        let mut stats = RunStats {
            occupancy: vec![0; d],
            window_len: e.acceptance_window as usize,
            ..RunStats::default()
        };
        // X_0 is a chain state; cold starts contribute it to the estimate
        for w in walkers.iter().filter(|w: &&Walker| w.rung == 0) {
            stats.cold_sum += w.x;
            stats.cold_samples += 1;
        }
        let split_policy = config.split_policy();
        let tracker = split_policy.enabled.then(|| SplitTracker::new(d));
        Ok(Self {
            target,
            bias: BiasState::uniform(d),
            ladder,
            proposal: config.proposal_state(),
            schedule: config.schedule()?,
            composition: config.composition(),
            adaptive: config.proposal.adaptive,
            adapt_until: config.proposal.adapt_until,
            split_policy,
            split_check_every: config.split.check_every,
            tracker,
            walkers,
            rngs,
            outcomes: Vec::new(),
            iterations: e.iterations,
            record_stride: e.record_stride,
            t: 0,
            stats,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn bias(&self) -> &BiasState {
        &self.bias
    }

    pub fn ladder(&self) -> &TemperatureLadder {
        &self.ladder
    }

    pub fn proposal(&self) -> &ProposalState {
        &self.proposal
    }

    pub fn particles(&self) -> Vec<ParticleState> {
        self.walkers.iter().map(|w| ParticleState { x: w.x, rung: w.rung }).collect()
    }

    /// Outcomes of the most recent sweep, in particle order.
    pub fn last_outcomes(&self) -> &[MoveOutcome] {
        &self.outcomes
    }

    /// Advances every particle once and runs the barrier.
    pub fn sweep(&mut self) -> Result<()> {
        self.sweep_inner(None)
    }

    fn sweep_inner(&mut self, records: Option<&mut Vec<TraceRecord>>) -> Result<()> {
        self.t += 1;
        let t = self.t;
        let moves = self.composition.moves_at(t);
        let sigma = self.proposal.sigma();
        let m = self.walkers.len();

        self.outcomes.resize(
            m,
            MoveOutcome {
                new_x: 0.0,
                new_rung: 0,
                accepted_x: false,
                accepted_rung: false,
                log_alpha_x: 0.0,
                log_alpha_rung: 0.0,
            },
        );
        let (target, ladder, bias) = (&self.target, &self.ladder, &self.bias);
        let step = |((w, rng), out): ((&mut Walker, &mut ChaCha8Rng), &mut MoveOutcome)| {
            *out = step_walker(target, ladder, bias, sigma, moves, w, rng);
        };
        if m >= PARALLEL_MIN_PARTICLES {
            self.walkers
                .par_iter_mut()
                .zip(self.rngs.par_iter_mut())
                .zip(self.outcomes.par_iter_mut())
                .for_each(step);
        } else {
            self.walkers
                .iter_mut()
                .zip(self.rngs.iter_mut())
                .zip(self.outcomes.iter_mut())
                .for_each(step);
        }

        // barrier: everything below is single-writer and runs in particle order
        let d = self.ladder.len();
        let mut hits = vec![0u64; d];
        let mut alpha_sum = 0.0;
        let mut accepted_x = 0;
        for (w, out) in self.walkers.iter().zip(&self.outcomes) {
            hits[w.rung] += 1;
            alpha_sum += out.log_alpha_x.exp();
            accepted_x += u64::from(out.accepted_x);
            self.stats.accepted_rung += u64::from(out.accepted_rung);
            if w.rung == 0 {
                self.stats.cold_sum += w.x;
                self.stats.cold_samples += 1;
            }
            if let Some(tracker) = &mut self.tracker {
                tracker.observe(w.rung, w.x);
            }
        }
        for (occ, h) in self.stats.occupancy.iter_mut().zip(&hits) {
            *occ += h;
        }
        if moves.0 {
            self.stats.accepted_x += accepted_x;
            self.stats.x_moves += m as u64;
            self.stats.push_window(accepted_x, m as u64);
        }
        if moves.1 {
            self.stats.rung_moves += m as u64;
        }

        let mut gamma = 0.0;
        let mut check_split = self.split_check_every > 0 && t.is_multiple_of(self.split_check_every);
        if let Some(schedule) = self.schedule {
            gamma = schedule.step_size(t, self.bias.fh_events)?;
            self.bias.update_bias(&hits, m as u64, gamma)?;
            if let Some(c) = schedule.flat_histogram_threshold() {
                if flat_histogram_met(&self.bias.nu_counts, c) {
                    self.bias.register_flat_histogram();
                    check_split |= self.split_check_every == 0;
                }
            }
        }
        self.stats.last_gamma = gamma;

        if self.adaptive && moves.0 && (self.adapt_until == 0 || t <= self.adapt_until) {
            self.proposal.adapt_scale((alpha_sum / m as f64).min(1.0), t)?;
        }

        if check_split && self.tracker.is_some() {
            self.try_split()?;
        }

        if let Some(records) = records {
            if t.is_multiple_of(self.record_stride) {
                let fh_events = self.bias.fh_events;
                records.extend(self.walkers.iter().zip(&self.outcomes).enumerate().map(|(p, (w, out))| {
                    TraceRecord {
                        t,
                        particle: p,
                        x: w.x,
                        rung: w.rung,
                        accepted_x: out.accepted_x,
                        accepted_rung: out.accepted_rung,
                        sigma,
                        gamma,
                        fh_events,
                    }
                }));
            }
        }
        Ok(())
    }

    fn try_split(&mut self) -> Result<()> {
        let tracker = self.tracker.as_mut().expect("split tracker enabled");
        let outcome = self.ladder.maybe_split(&self.split_policy, tracker.half_counts())?;
        if let Some(split) = outcome.split {
            self.bias.remap_on_split(&split.mapping, split.parent, split.new_rung)?;
            for w in &mut self.walkers {
                w.rung = split.mapping[w.rung];
            }
            for out in &mut self.outcomes {
                out.new_rung = split.mapping[out.new_rung];
            }
            let mut occupancy = vec![0; outcome.ladder.len()];
            for (old, &new) in split.mapping.iter().enumerate() {
                occupancy[new] = self.stats.occupancy[old];
            }
            self.stats.occupancy = occupancy;
            self.stats.splits += 1;
            self.ladder = outcome.ladder;
        }
        tracker.reset(self.ladder.len());
        Ok(())
    }

    /// Runs the remaining sweeps; appends strided records when `records` is given.
    pub fn run_to_end(&mut self, mut records: Option<&mut Vec<TraceRecord>>) -> Result<Summary> {
        let start = Instant::now();
        if let Some(r) = records.as_deref_mut() {
            let remaining = self.iterations.saturating_sub(self.t);
            r.reserve((remaining / self.record_stride) as usize * self.walkers.len());
        }
        while self.t < self.iterations {
            self.sweep_inner(records.as_deref_mut())?;
        }
        Ok(self.summary(start.elapsed().as_secs_f64()))
    }

    pub fn summary(&self, wall_clock_s: f64) -> Summary {
        let s = &self.stats;
        let total: u64 = s.occupancy.iter().sum();
        Summary {
            iterations: self.t,
            particles: self.walkers.len(),
            cold_samples: s.cold_samples,
            cold_sum: s.cold_sum,
            occupation: s.occupancy.iter().map(|&o| ratio(o, total)).collect(),
            theta: self.bias.weights(),
            temps: self.ladder.temps().to_vec(),
            accept_x: ratio(s.accepted_x, s.x_moves),
            accept_rung: ratio(s.accepted_rung, s.rung_moves),
            accept_x_window: ratio(s.window_accepted, s.window_moves),
            sigma: self.proposal.sigma(),
            gamma: s.last_gamma,
            fh_events: self.bias.fh_events,
            splits: s.splits,
            wall_clock_s,
        }
    }

    pub fn into_trace(self, records: Vec<TraceRecord>) -> Trace {
        Trace {
            records,
            final_bias: self.bias,
            final_ladder: self.ladder,
        }
    }
}

/// Executes a full run, keeping the strided trace.
pub fn run(config: &RunConfig) -> Result<(Trace, Summary)> {
    let mut engine = Engine::new(config)?;
    let mut records = Vec::new();
    let summary = engine.run_to_end(Some(&mut records))?;
    Ok((engine.into_trace(records), summary))
}

/// Executes a full run without storing a trace.
pub fn run_summary(config: &RunConfig) -> Result<Summary> {
    Engine::new(config)?.run_to_end(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScheduleKind;

    fn small(particles: usize, iterations: u64) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.engine.particles = particles;
        cfg.engine.iterations = iterations;
        cfg.engine.seed = 11;
        cfg
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = small(3, 1);
        let a = Engine::new(&cfg).unwrap().particles();
        let b = Engine::new(&cfg).unwrap().particles();
        assert_eq!(a, b);
        assert!(a[0].x != a[1].x && a[1].x != a[2].x && a[0].x != a[2].x);
        assert!(a.iter().all(|p| p.rung == 0));
    }

    #[test]
    fn point_mass_init() {
        let mut cfg = small(4, 1);
        cfg.engine.init = InitKind::Point;
        let ps = Engine::new(&cfg).unwrap().particles();
        assert!(ps.iter().all(|p| p.x == 0.0));
    }

    #[test]
    fn uniform_rung_init_stays_in_range() {
        let mut cfg = small(50, 1);
        cfg.engine.init_rungs = InitRungs::Uniform;
        let ps = Engine::new(&cfg).unwrap().particles();
        assert!(ps.iter().all(|p| p.rung < 10));
        assert!(ps.iter().any(|p| p.rung > 0));
    }

    #[test]
    fn record_count_matches_stride() {
        let mut cfg = small(3, 10);
        cfg.engine.record_stride = 3;
        let (trace, summary) = run(&cfg).unwrap();
        assert_eq!(trace.records.len(), 3 * 3);
        assert_eq!(trace.records[0].t, 3);
        assert!((summary.occupation.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(summary.iterations, 10);
    }

    #[test]
    fn single_rung_keeps_theta_at_one() {
        let mut cfg = small(2, 50);
        cfg.ladder.rungs = 1;
        let (trace, _) = run(&cfg).unwrap();
        assert_eq!(trace.final_bias.weights(), vec![1.0]);
        assert!(trace.records.iter().all(|r| r.rung == 0 && !r.accepted_rung));
    }

    #[test]
    fn zero_step_size_freezes_theta() {
        let mut cfg = small(3, 200);
        cfg.schedule.gamma0 = 0.0;
        let (trace, _) = run(&cfg).unwrap();
        let uniform = BiasState::uniform(10);
        for (a, b) in trace.final_bias.log_theta.iter().zip(&uniform.log_theta) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_bias_never_updates() {
        let mut cfg = small(2, 100);
        cfg.schedule.kind = ScheduleKind::None;
        let (trace, summary) = run(&cfg).unwrap();
        assert_eq!(trace.final_bias.t, 0);
        assert!(trace.records.iter().all(|r| r.gamma == 0.0));
        assert_eq!(summary.fh_events, 0);
    }

    #[test]
    fn deterministic_schedule_has_no_flat_histogram_events() {
        let mut cfg = small(4, 2000);
        cfg.schedule.kind = ScheduleKind::Deterministic;
        cfg.schedule.t0 = 10;
        let (trace, _) = run(&cfg).unwrap();
        assert!(trace.records.iter().all(|r| r.fh_events == 0));
        assert_eq!(trace.records.last().unwrap().gamma, 10.0 / 2000.0);
    }

    #[test]
    fn gamma_never_increases_under_flat_histogram() {
        let (trace, summary) = run(&small(5, 3000)).unwrap();
        let gammas: Vec<f64> = trace.records.iter().step_by(5).map(|r| r.gamma).collect();
        assert!(gammas.windows(2).all(|w| w[1] <= w[0]));
        assert!(summary.fh_events > 0);
    }

    #[test]
    fn summary_mean_adds_initial_states_to_trace_mean() {
        let cfg = small(4, 500);
        let init = Engine::new(&cfg).unwrap().particles();
        let (trace, summary) = run(&cfg).unwrap();
        let cold: Vec<f64> = trace.records.iter().filter(|r| r.rung == 0).map(|r| r.x).collect();
        let n = cold.len() + init.len();
        let want = (cold.iter().sum::<f64>() + init.iter().map(|p| p.x).sum::<f64>()) / n as f64;
        assert_eq!(summary.cold_samples as usize, n);
        assert!((summary.posterior_mean().unwrap() - want).abs() <= 1e-12);
        assert!(posterior_mean(&trace).is_ok());
    }

    #[test]
    fn no_cold_states_is_an_error() {
        let mut cfg = small(1, 3);
        cfg.engine.init_rungs = InitRungs::Uniform;
        cfg.engine.seed = (0..1000)
            .find(|&s| {
                cfg.engine.seed = s;
                Engine::new(&cfg).unwrap().particles()[0].rung > 2
            })
            .unwrap();
        let summary = run_summary(&cfg).unwrap();
        assert_eq!(summary.cold_samples, 0);
        assert!(matches!(summary.posterior_mean(), Err(Error::NoColdSamples)));
    }

    #[test]
    fn posterior_mean_filters_cold_rung() {
        let rec = |x, rung| TraceRecord {
            t: 1,
            particle: 0,
            x,
            rung,
            accepted_x: false,
            accepted_rung: false,
            sigma: 1.0,
            gamma: 0.0,
            fh_events: 0,
        };
        let trace = |records| Trace {
            records,
            final_bias: BiasState::uniform(2),
            final_ladder: TemperatureLadder::new(vec![1.0, 10.0]).unwrap(),
        };
        assert_eq!(posterior_mean(&trace(vec![rec(7.0, 0), rec(7.0, 0)])).unwrap(), 7.0);
        assert_eq!(posterior_mean(&trace(vec![rec(-15.0, 0), rec(99.0, 1)])).unwrap(), -15.0);
        assert_eq!(posterior_mean(&trace(vec![rec(-2.5, 0), rec(2.5, 0)])).unwrap(), 0.0);
        assert!(matches!(
            posterior_mean(&trace(vec![rec(1.0, 1)])),
            Err(Error::NoColdSamples)
        ));
    }

    #[test]
    fn split_run_keeps_invariants() {
        let mut cfg = small(8, 4000);
        cfg.ladder.rungs = 3;
        cfg.ladder.t_max = 10.0;
        cfg.split.enabled = true;
        cfg.split.min_samples = 10;
        cfg.split.skew_threshold = 0.51;
        cfg.split.max_rungs = 6;
        cfg.split.check_every = 100;
        let (trace, summary) = run(&cfg).unwrap();
        let d = trace.final_ladder.len();
        assert!(d <= 6);
        assert!(summary.splits > 0);
        assert_eq!(trace.final_bias.len(), d);
        assert_eq!(summary.occupation.len(), d);
        assert!((trace.final_bias.weights().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(trace.records.iter().all(|r| r.rung < d));
        assert_eq!(trace.final_ladder.temps()[0], 1.0);
    }
}

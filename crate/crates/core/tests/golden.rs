//! Small fixed-seed run checked against a straight-line reimplementation of
//! the sampler and against a frozen trace file.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use pawl_core::config::RunConfig;
use pawl_core::engine::run;

const GOLDEN: &str = include_str!("data/golden_trace_m2_n3.csv");

fn golden_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.engine.particles = 2;
    cfg.engine.iterations = 3;
    cfg.engine.seed = 42;
    cfg.proposal.adaptive = true;
    cfg
}

fn log_pi(x: f64) -> f64 {
    let norm = 0.5 / (2.0 * std::f64::consts::PI).sqrt();
    (norm * (-0.5 * (x - 15.0) * (x - 15.0)).exp() + norm * (-0.5 * (x + 15.0) * (x + 15.0)).exp()).ln()
}

struct Row {
    t: u64,
    x: f64,
    rung: usize,
    acc_x: bool,
    acc_rung: bool,
    sigma: f64,
    gamma: f64,
    fh: u64,
}

/// Wang-Landau simulated tempering written out step by step.
fn reference(seed: u64, m: usize, n: u64) -> Vec<Row> {
    let temps: Vec<f64> = (1..=10).map(f64::from).collect();
    let d = temps.len();
    let mut rngs: Vec<ChaCha8Rng> = (0..m)
        .map(|p| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(p as u64 + 1);
            r
        })
        .collect();
    let mut xs: Vec<f64> = rngs.iter_mut().map(|r| r.sample::<f64, _>(StandardNormal)).collect();
    let mut ks = vec![0usize; m];
    let mut log_theta = vec![-(d as f64).ln(); d];
    let mut nu = vec![0u64; d];
    let mut fh = 0u64;
    let mut log_sigma = 10f64.ln();
    let mut rows = Vec::new();

    for t in 1..=n {
        let sigma = log_sigma.exp();
        let mut alpha_sum = 0.0;
        let mut flags = Vec::new();
        for p in 0..m {
            let rng = &mut rngs[p];
            let z: f64 = rng.sample(StandardNormal);
            let prop = xs[p] + sigma * z;
            let la = ((log_pi(prop) - log_pi(xs[p])) / temps[ks[p]]).min(0.0);
            alpha_sum += la.exp();
            let u: f64 = rng.random();
            let acc_x = u.ln() < la;
            if acc_x {
                xs[p] = prop;
            }
            let up: bool = rng.random();
            let kp = if up { ks[p] as isize + 1 } else { ks[p] as isize - 1 };
            let lr = if kp < 0 || kp as usize >= d {
                f64::NEG_INFINITY
            } else {
                let kp = kp as usize;
                (log_pi(xs[p]) * (1.0 / temps[kp] - 1.0 / temps[ks[p]]) + log_theta[ks[p]] - log_theta[kp]).min(0.0)
            };
            let u2: f64 = rng.random();
            let acc_rung = u2.ln() < lr;
            if acc_rung {
                ks[p] = kp as usize;
            }
            flags.push((acc_x, acc_rung));
        }
        let gamma = 0.5f64.powi(fh as i32);
        for k in 0..d {
            let h = ks.iter().filter(|&&r| r == k).count() as u64;
            log_theta[k] += gamma * (h as f64 / m as f64 - 1.0 / d as f64);
            nu[k] += h;
        }
        let total: f64 = log_theta.iter().map(|l| l.exp()).sum();
        log_theta.iter_mut().for_each(|l| *l -= total.ln());
        let count: u64 = nu.iter().sum();
        let flat = nu
            .iter()
            .all(|&c| (c as f64 / count as f64 - 1.0 / d as f64).abs() < 0.1 / d as f64);
        if flat {
            fh += 1;
            nu.iter_mut().for_each(|c| *c = 0);
        }
        log_sigma += (t as f64).powf(-0.6) * (alpha_sum / m as f64 - 0.234);
        for p in 0..m {
            rows.push(Row {
                t,
                x: xs[p],
                rung: ks[p],
                acc_x: flags[p].0,
                acc_rung: flags[p].1,
                sigma,
                gamma,
                fh,
            });
        }
    }
    rows
}

#[test]
fn engine_matches_reference_implementation() {
    let (trace, _) = run(&golden_config()).unwrap();
    let want = reference(42, 2, 3);
    assert_eq!(trace.records.len(), want.len());
    for (got, want) in trace.records.iter().zip(&want) {
        assert_eq!(got.t, want.t);
        assert_eq!(got.x.to_bits(), want.x.to_bits(), "x at t={}", got.t);
        assert_eq!(got.rung, want.rung);
        assert_eq!(got.accepted_x, want.acc_x);
        assert_eq!(got.accepted_rung, want.acc_rung);
        assert!((got.sigma - want.sigma).abs() <= 1e-12 * want.sigma);
        assert!((got.gamma - want.gamma).abs() <= 1e-15);
        assert_eq!(got.fh_events, want.fh);
    }
}

#[test]
fn longer_run_matches_reference() {
    let mut cfg = golden_config();
    cfg.engine.particles = 3;
    cfg.engine.iterations = 400;
    let (trace, _) = run(&cfg).unwrap();
    let want = reference(42, 3, 400);
    for (got, want) in trace.records.iter().zip(&want) {
        assert_eq!((got.t, got.rung, got.accepted_x, got.accepted_rung), (want.t, want.rung, want.acc_x, want.acc_rung));
        assert!((got.x - want.x).abs() <= 1e-9 * want.x.abs().max(1.0));
        assert_eq!(got.fh_events, want.fh);
    }
}

#[test]
fn trace_matches_golden_file() {
    let (trace, _) = run(&golden_config()).unwrap();
    assert_eq!(trace.to_csv_string(), GOLDEN);
}

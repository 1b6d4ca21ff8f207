//! Wang-Landau bias learning: log-domain weights `theta`, step-size
//! schedules, and the flat-histogram criterion.

use crate::error::{Error, Result};

/// Gain sequence for the `log theta` update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `gamma_t = t0 / max(t0, t)`: constant 1 until `t0`, then `~1/t`.
    Deterministic { t0: u64 },
    /// `gamma = gamma0 * decay^k` after the criterion has fired `k` times.
    FlatHistogram { c: f64, gamma0: f64, decay: f64 },
}

impl StepSchedule {
    pub fn wang_landau(c: f64) -> Self {
        StepSchedule::FlatHistogram {
            c,
            gamma0: 1.0,
            decay: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Deterministic { t0: 0 } => Err(Error::config("schedule.t0", "must be >= 1")),
            StepSchedule::Deterministic { .. } => Ok(()),
            StepSchedule::FlatHistogram { c, gamma0, decay } => {
                if !(c > 0.0 && c <= 1.0) {
                    return Err(Error::config("schedule.c", format!("{c} not in (0, 1]")));
                }
                if !(gamma0 >= 0.0 && gamma0.is_finite()) {
                    return Err(Error::config("schedule.gamma0", format!("{gamma0} must be finite and >= 0")));
                }
                if !(decay > 0.0 && decay < 1.0) {
                    return Err(Error::config("schedule.decay", format!("{decay} not in (0, 1)")));
                }
                Ok(())
            }
        }
    }

    /// Step size at iteration `t >= 1` after `fh_events` flat-histogram events.
    pub fn step_size(&self, t: u64, fh_events: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::contract("step size requested at t = 0"));
        }
        Ok(match *self {
            StepSchedule::Deterministic { t0 } => t0 as f64 / t0.max(t) as f64,
            StepSchedule::FlatHistogram { gamma0, decay, .. } => {
                gamma0 * decay.powi(fh_events.min(i32::MAX as u64) as i32)
            }
        })
    }

    pub fn flat_histogram_threshold(&self) -> Option<f64> {
        match *self {
            StepSchedule::FlatHistogram { c, .. } => Some(c),
            StepSchedule::Deterministic { .. } => None,
        }
    }
}

/// `max_i |nu_i - 1/d| < c/d` with `nu` the normalized counts.
/// All-zero counts never satisfy the criterion.
pub fn flat_histogram_met(nu_counts: &[u64], c: f64) -> bool {
    let total: u64 = nu_counts.iter().sum();
    if total == 0 {
        return false;
    }
    let d = nu_counts.len() as f64;
    let total = total as f64;
    let max_dev = nu_counts
        .iter()
        .map(|&n| (n as f64 / total - 1.0 / d).abs())
        .fold(0.0, f64::max);
    max_dev < c / d
}

/// Shared Wang-Landau state. `log_theta` is kept normalized so that
/// `sum(exp(log_theta)) == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasState {
    pub log_theta: Vec<f64>,
    /// Visits per rung since the flat-histogram criterion last fired.
    pub nu_counts: Vec<u64>,
    pub t: u64,
    pub fh_events: u64,
}

impl BiasState {
    pub fn uniform(rungs: usize) -> Self {
        let v = -(rungs as f64).ln();
        Self {
            log_theta: vec![v; rungs],
            nu_counts: vec![0; rungs],
            t: 0,
            fh_events: 0,
        }
    }

    /// Builds a state from unnormalized weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::contract("bias weights must be positive and finite"));
        }
        let mut b = Self::uniform(weights.len());
        b.log_theta = weights.iter().map(|w| w.ln()).collect();
        b.normalize();
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.log_theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_theta.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_theta.iter().map(|l| l.exp()).collect()
    }

    fn normalize(&mut self) {
        let max = self.log_theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + self.log_theta.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        for l in &mut self.log_theta {
            *l -= lse;
        }
    }

    /// `log theta_i += gamma (hits_i / M - 1/d)`, then renormalize.
    /// With `M = 1` this is the single-chain Wang-Landau update.
    pub fn update_bias(&mut self, rung_hits: &[u64], particles: u64, gamma: f64) -> Result<()> {
        if rung_hits.len() != self.len() {
            return Err(Error::contract(format!(
                "{} rung hits for {} rungs",
                rung_hits.len(),
                self.len()
            )));
        }
        let total: u64 = rung_hits.iter().sum();
        if particles == 0 || total != particles {
            return Err(Error::contract(format!("rung hits sum to {total}, expected {particles}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::contract(format!("step size {gamma} must be finite and >= 0")));
        }
        let inv_d = 1.0 / self.len() as f64;
        let m = particles as f64;
        for ((l, &h), nu) in self.log_theta.iter_mut().zip(rung_hits).zip(&mut self.nu_counts) {
            *l += gamma * (h as f64 / m - inv_d);
            *nu += h;
        }
        self.normalize();
        self.t += 1;
        Ok(())
    }

    /// Records a flat-histogram event: bumps the counter, clears `nu`.
    pub fn register_flat_histogram(&mut self) {
        self.fh_events += 1;
        self.nu_counts.iter_mut().for_each(|n| *n = 0);
    }

    /// Log pseudo-prior of `rung`: `-log theta_rung`.
    pub fn biased_log_weight(&self, rung: usize) -> Result<f64> {
        self.log_theta
            .get(rung)
            .map(|l| -l)
            .ok_or_else(|| Error::contract(format!("rung {rung} out of range for {} rungs", self.len())))
    }

    /// Moves weights to their new indices after a ladder split; the inserted
    /// rung copies the parent's weight. Histogram counts restart from zero.
    pub fn remap_on_split(&mut self, mapping: &[usize], parent_rung: usize, new_rung: usize) -> Result<()> {
        if mapping.len() != self.len() {
            return Err(Error::contract(format!(
                "mapping has {} entries for {} rungs",
                mapping.len(),
                self.len()
            )));
        }
        if mapping.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("split mapping must be strictly increasing"));
        }
        if parent_rung >= self.len() {
            return Err(Error::contract(format!("parent rung {parent_rung} out of range")));
        }
        let identity = mapping.iter().enumerate().all(|(i, &m)| i == m);
        if identity {
            return Ok(());
        }
        let new_len = self.len() + 1;
        if mapping.last().is_some_and(|&m| m >= new_len) || new_rung >= new_len || mapping.contains(&new_rung) {
            return Err(Error::contract("split mapping does not describe a single inserted rung"));
        }
        let mut log_theta = vec![0.0; new_len];
        for (old, &new) in mapping.iter().enumerate() {
            log_theta[new] = self.log_theta[old];
        }
        log_theta[new_rung] = self.log_theta[parent_rung];
        self.log_theta = log_theta;
        self.nu_counts = vec![0; new_len];
        self.normalize();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn weight_sum(b: &BiasState) -> f64 {
        b.weights().iter().sum()
    }

    #[test]
    fn step_sizes() {
        let s = StepSchedule::Deterministic { t0: 1 };
        assert_eq!(s.step_size(4, 0).unwrap(), 0.25);
        let s = StepSchedule::Deterministic { t0: 1000 };
        assert_eq!(s.step_size(500, 7).unwrap(), 1.0);
        assert_eq!(s.step_size(2000, 0).unwrap(), 0.5);
        let s = StepSchedule::FlatHistogram {
            c: 0.1,
            gamma0: 1.0,
            decay: 0.5,
        };
        assert_eq!(s.step_size(99, 3).unwrap(), 0.125);
        assert!(s.step_size(0, 0).is_err());
    }

    #[test]
    fn flat_histogram_cases() {
        assert!(flat_histogram_met(&[50, 50], 0.1));
        assert!(flat_histogram_met(&[60, 40], 0.5));
        assert!(!flat_histogram_met(&[60, 40], 0.1));
        assert!(!flat_histogram_met(&[0, 0, 0], 1.0));
    }

    #[test]
    fn single_hit_update() {
        let mut b = BiasState::uniform(2);
        b.update_bias(&[1, 0], 1, 1.0).unwrap();
        let w = b.weights();
        assert_abs_diff_eq!(w[0], 0.731_058_578_630_004_9, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.268_941_421_369_995_1, epsilon = 1e-12);
        assert_eq!(b.nu_counts, vec![1, 0]);
        assert_eq!(b.t, 1);
    }

    #[test]
    fn balanced_hits_leave_theta_unchanged() {
        let mut b = BiasState::from_weights(&[0.3, 0.7]).unwrap();
        let before = b.log_theta.clone();
        b.update_bias(&[1, 1], 2, 0.8).unwrap();
        for (a, c) in b.log_theta.iter().zip(&before) {
            assert_abs_diff_eq!(a, c, epsilon = 1e-15);
        }
    }

    #[test]
    fn update_rejects_bad_hits() {
        let mut b = BiasState::uniform(3);
        assert!(b.update_bias(&[1, 1, 0], 3, 1.0).is_err());
        assert!(b.update_bias(&[1, 1], 2, 1.0).is_err());
        assert!(b.update_bias(&[1, 0, 0], 1, -1.0).is_err());
    }

    #[test]
    fn pseudo_prior_weights() {
        let b = BiasState::uniform(4);
        for k in 0..4 {
            assert_abs_diff_eq!(b.biased_log_weight(k).unwrap(), 4f64.ln(), epsilon = 1e-15);
        }
        let b = BiasState::from_weights(&[2.0, 1.0]).unwrap();
        let diff = b.biased_log_weight(1).unwrap() - b.biased_log_weight(0).unwrap();
        assert_abs_diff_eq!(diff, 2f64.ln(), epsilon = 1e-14);
        assert!(b.biased_log_weight(2).is_err());
    }

    #[test]
    fn remap_identity_and_split() {
        let mut b = BiasState::from_weights(&[0.6, 0.4]).unwrap();
        b.nu_counts = vec![3, 4];
        let before = b.clone();
        b.remap_on_split(&[0, 1], 0, 0).unwrap();
        assert_eq!(b, before);

        b.remap_on_split(&[0, 2], 0, 1).unwrap();
        let w = b.weights();
        assert_abs_diff_eq!(w[0], 0.6 / 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.6 / 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(w[2], 0.4 / 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(weight_sum(&b), 1.0, epsilon = 1e-10);
        assert_eq!(b.nu_counts, vec![0, 0, 0]);
        assert!(b.remap_on_split(&[0, 1], 0, 1).is_err());
    }

    #[test]
    fn flat_histogram_resets_counts() {
        let mut b = BiasState::uniform(2);
        b.update_bias(&[1, 0], 1, 0.5).unwrap();
        b.register_flat_histogram();
        assert_eq!(b.fh_events, 1);
        assert_eq!(b.nu_counts, vec![0, 0]);
    }

    proptest! {
        #[test]
        fn updates_stay_normalized(
            hits in proptest::collection::vec(proptest::collection::vec(0u64..5, 6), 1..40),
            gamma in 0.0f64..3.0,
        ) {
            let mut b = BiasState::uniform(6);
            for h in &hits {
                let m: u64 = h.iter().sum();
                if m == 0 { continue; }
                b.update_bias(h, m, gamma).unwrap();
                prop_assert!((weight_sum(&b) - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn update_is_shift_invariant(
            raw in proptest::collection::vec(-5.0f64..5.0, 4),
            shift in -50.0f64..50.0,
            hit in 0usize..4,
            gamma in 0.0f64..2.0,
        ) {
            let mut a = BiasState::uniform(4);
            a.log_theta = raw.clone();
            let mut b = a.clone();
            b.log_theta.iter_mut().for_each(|l| *l += shift);
            let mut hits = vec![0; 4];
            hits[hit] = 1;
            a.update_bias(&hits, 1, gamma).unwrap();
            b.update_bias(&hits, 1, gamma).unwrap();
            for (x, y) in a.log_theta.iter().zip(&b.log_theta) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn deterministic_schedule_non_increasing(t0 in 1u64..10_000, t in 1u64..100_000) {
            let s = StepSchedule::Deterministic { t0 };
            let g = s.step_size(t, 0).unwrap();
            prop_assert!(g > 0.0 && g <= 1.0);
            prop_assert!(s.step_size(t + 1, 0).unwrap() <= g);
            if t <= t0 { prop_assert_eq!(g, 1.0); }
        }
    }
}

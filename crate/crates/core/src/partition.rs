//! Temperature ladder (the reaction coordinate is the rung index) and
//! occupancy-skew rung splitting.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Ordered temperatures `1 = T_0 < T_1 < ... < T_{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureLadder {
    temps: Vec<f64>,
}

impl TemperatureLadder {
    pub fn new(temps: Vec<f64>) -> Result<Self> {
        match temps.first() {
            None => return Err(Error::config("ladder.temps", "ladder is empty")),
            Some(&t0) if t0 != 1.0 => {
                return Err(Error::config("ladder.temps", format!("first temperature must be 1, got {t0}")))
            }
            _ => {}
        }
        if temps.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("ladder.temps", "temperatures must be finite"));
        }
        if let Some(w) = temps.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "ladder.temps",
                format!("temperatures must be strictly increasing ({} >= {})", w[0], w[1]),
            ));
        }
        Ok(Self { temps })
    }

    /// `d` evenly spaced temperatures from 1 to `t_max`.
    pub fn arithmetic(t_max: f64, rungs: usize) -> Result<Self> {
        if rungs == 0 {
            return Err(Error::config("ladder.rungs", "need at least one rung"));
        }
        if rungs == 1 {
            return Self::new(vec![1.0]);
        }
        if t_max.is_nan() || t_max <= 1.0 {
            return Err(Error::config("ladder.t_max", format!("t_max must exceed 1, got {t_max}")));
        }
        let step = (t_max - 1.0) / (rungs - 1) as f64;
        let mut temps: Vec<f64> = (0..rungs).map(|i| 1.0 + i as f64 * step).collect();
        temps[rungs - 1] = t_max;
        Self::new(temps)
    }

    pub fn len(&self) -> usize {
        self.temps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temps.is_empty()
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    pub fn temperature(&self, k: usize) -> f64 {
        self.temps[k]
    }

    /// Partition index of ladder state `k`. Identity for the tempering
    /// coordinate; kept separate so the engine never assumes it.
    pub fn rung_index(&self, k: usize) -> Result<usize> {
        self.check(k)?;
        Ok(k)
    }

    pub fn neighbors(&self, k: usize) -> Result<Vec<usize>> {
        self.check(k)?;
        let mut out = Vec::with_capacity(2);
        if k > 0 {
            out.push(k - 1);
        }
        if k + 1 < self.len() {
            out.push(k + 1);
        }
        Ok(out)
    }

    fn check(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::contract(format!("rung {k} out of range for ladder of {} rungs", self.len())));
        }
        Ok(())
    }

    /// Applies the split policy; see [`SplitPolicy`].
    pub fn maybe_split(&self, policy: &SplitPolicy, half_counts: &[(u64, u64)]) -> Result<SplitOutcome> {
        if half_counts.len() != self.len() {
            return Err(Error::contract(format!(
                "{} half-count pairs for a ladder of {} rungs",
                half_counts.len(),
                self.len()
            )));
        }
        let unchanged = SplitOutcome {
            ladder: self.clone(),
            split: None,
        };
        let d = self.len();
        if !policy.enabled || d < 2 || d >= policy.max_rungs {
            return Ok(unchanged);
        }
        let qualifies = |&(below, above): &(u64, u64)| {
            let total = below + above;
            total >= policy.min_samples && below.max(above) as f64 >= policy.skew_threshold * total as f64
        };
        let Some(parent) = half_counts.iter().position(qualifies) else {
            return Ok(unchanged);
        };
        // the gap above `parent`; the top rung splits its lower gap
        let gap = if parent + 1 < d { parent } else { d - 2 };
        let new_rung = gap + 1;
        let mut temps = self.temps.clone();
        temps.insert(new_rung, 0.5 * (self.temps[gap] + self.temps[gap + 1]));
        let mapping = (0..d).map(|k| if k < new_rung { k } else { k + 1 }).collect();
        Ok(SplitOutcome {
            ladder: Self::new(temps)?,
            split: Some(Split {
                parent,
                new_rung,
                mapping,
            }),
        })
    }
}

/// Occupancy-skew splitting rule. A rung splits when it has at least
/// `min_samples` tallied visits and at least `skew_threshold` of them fall on
/// one side of the rung's running median of `|x|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPolicy {
    pub enabled: bool,
    pub skew_threshold: f64,
    pub min_samples: u64,
    pub max_rungs: usize,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        Self {
            enabled: false,
            skew_threshold: 0.75,
            min_samples: 200,
            max_rungs: 20,
        }
    }
}

impl SplitPolicy {
    pub fn validate(&self, rungs: usize) -> Result<()> {
        if !(self.skew_threshold > 0.5 && self.skew_threshold < 1.0) {
            return Err(Error::config("split.skew_threshold", "must lie in (0.5, 1)"));
        }
        if self.min_samples < 10 {
            return Err(Error::config("split.min_samples", "must be at least 10"));
        }
        if self.max_rungs < rungs {
            return Err(Error::config(
                "split.max_rungs",
                format!("{} is below the initial ladder size {rungs}", self.max_rungs),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    /// Rung (old indexing) whose statistics triggered the split.
    pub parent: usize,
    /// Index of the inserted rung in the new ladder.
    pub new_rung: usize,
    /// `mapping[old] = new`, injective and increasing.
    pub mapping: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub ladder: TemperatureLadder,
    pub split: Option<Split>,
}

impl SplitOutcome {
    pub fn split_occurred(&self) -> bool {
        self.split.is_some()
    }
}

#[derive(Debug, Default, Clone)]
struct RunningMedian {
    // max-heap of the lower half, min-heap of the upper half
    lower: BinaryHeap<OrdF64>,
    upper: BinaryHeap<Reverse<OrdF64>>,
}

impl RunningMedian {
    fn median(&self) -> Option<f64> {
        match (self.lower.peek(), self.upper.peek()) {
            (None, _) => None,
            (Some(lo), Some(Reverse(hi))) if self.lower.len() == self.upper.len() => Some(0.5 * (lo.0 + hi.0)),
            (Some(lo), _) => Some(lo.0),
        }
    }

    fn push(&mut self, v: f64) {
        match self.lower.peek() {
            Some(lo) if v > lo.0 => self.upper.push(Reverse(OrdF64(v))),
            _ => self.lower.push(OrdF64(v)),
        }
        if self.lower.len() > self.upper.len() + 1 {
            let v = self.lower.pop().expect("non-empty");
            self.upper.push(Reverse(v));
        } else if self.upper.len() > self.lower.len() {
            let Reverse(v) = self.upper.pop().expect("non-empty");
            self.lower.push(v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Per-rung below/above tallies against the running median of `|x|`.
#[derive(Debug, Clone)]
pub struct SplitTracker {
    medians: Vec<RunningMedian>,
    counts: Vec<(u64, u64)>,
}

impl SplitTracker {
    pub fn new(rungs: usize) -> Self {
        Self {
            medians: vec![RunningMedian::default(); rungs],
            counts: vec![(0, 0); rungs],
        }
    }

    /// Tallies a visit to `rung` at `x` against the median of earlier visits,
    /// then folds `|x|` into that median.
    pub fn observe(&mut self, rung: usize, x: f64) {
        let a = x.abs();
        if let Some(m) = self.medians[rung].median() {
            if a < m {
                self.counts[rung].0 += 1;
            } else {
                self.counts[rung].1 += 1;
            }
        }
        self.medians[rung].push(a);
    }

    pub fn half_counts(&self) -> &[(u64, u64)] {
        &self.counts
    }

    pub fn reset(&mut self, rungs: usize) {
        *self = Self::new(rungs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_ladder() -> TemperatureLadder {
        TemperatureLadder::arithmetic(10.0, 10).unwrap()
    }

    #[test]
    fn arithmetic_ladder_is_integers() {
        let l = paper_ladder();
        let want: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(l.temps(), want.as_slice());
    }

    #[test]
    fn rejects_bad_ladders() {
        assert!(TemperatureLadder::new(vec![]).is_err());
        assert!(TemperatureLadder::new(vec![2.0, 3.0]).is_err());
        assert!(TemperatureLadder::new(vec![1.0, 3.0, 3.0]).is_err());
        assert!(TemperatureLadder::new(vec![1.0, 0.5]).is_err());
        assert!(TemperatureLadder::arithmetic(1.0, 3).is_err());
    }

    #[test]
    fn rung_index_and_neighbors() {
        let l = paper_ladder();
        assert_eq!(l.rung_index(0).unwrap(), 0);
        assert_eq!(l.rung_index(9).unwrap(), 9);
        assert!(l.rung_index(10).is_err());
        assert_eq!(l.neighbors(0).unwrap(), vec![1]);
        assert_eq!(l.neighbors(9).unwrap(), vec![8]);
        assert_eq!(l.neighbors(4).unwrap(), vec![3, 5]);
        assert!(l.neighbors(10).is_err());
    }

    fn enabled() -> SplitPolicy {
        SplitPolicy {
            enabled: true,
            ..SplitPolicy::default()
        }
    }

    #[test]
    fn split_disabled_or_below_guard() {
        let l = TemperatureLadder::new(vec![1.0, 10.0]).unwrap();
        let out = l.maybe_split(&SplitPolicy::default(), &[(0, 500), (250, 250)]).unwrap();
        assert!(!out.split_occurred());
        assert_eq!(out.ladder, l);
        let out = l.maybe_split(&enabled(), &[(0, 150), (0, 199)]).unwrap();
        assert!(!out.split_occurred());
    }

    #[test]
    fn split_inserts_midpoint() {
        let l = TemperatureLadder::new(vec![1.0, 10.0]).unwrap();
        let out = l.maybe_split(&enabled(), &[(40, 160), (100, 100)]).unwrap();
        assert_eq!(out.ladder.temps(), &[1.0, 5.5, 10.0]);
        let s = out.split.unwrap();
        assert_eq!(s.parent, 0);
        assert_eq!(s.new_rung, 1);
        assert_eq!(s.mapping, vec![0, 2]);
    }

    #[test]
    fn top_rung_splits_lower_gap() {
        let l = TemperatureLadder::new(vec![1.0, 2.0, 4.0]).unwrap();
        let out = l.maybe_split(&enabled(), &[(100, 100), (100, 100), (300, 10)]).unwrap();
        assert_eq!(out.ladder.temps(), &[1.0, 2.0, 3.0, 4.0]);
        let s = out.split.unwrap();
        assert_eq!((s.parent, s.new_rung), (2, 2));
        assert_eq!(s.mapping, vec![0, 1, 3]);
    }

    #[test]
    fn lowest_rung_wins_and_cap_holds() {
        let l = TemperatureLadder::new(vec![1.0, 2.0, 4.0]).unwrap();
        let skewed = [(100, 100), (10, 300), (300, 10)];
        let out = l.maybe_split(&enabled(), &skewed).unwrap();
        assert_eq!(out.split.unwrap().parent, 1);
        let capped = SplitPolicy {
            max_rungs: 3,
            ..enabled()
        };
        assert!(!l.maybe_split(&capped, &skewed).unwrap().split_occurred());
    }

    #[test]
    fn tracker_tallies_against_running_median() {
        let mut t = SplitTracker::new(2);
        for x in [1.0, -2.0, 3.0, -4.0, 5.0] {
            t.observe(1, x);
        }
        // medians seen: 1, 1.5, 2, 2.5 -> each new |x| lies above
        assert_eq!(t.half_counts(), &[(0, 0), (0, 4)]);
        t.observe(1, 0.5);
        assert_eq!(t.half_counts()[1], (1, 4));
        t.reset(3);
        assert_eq!(t.half_counts(), &[(0, 0); 3]);
    }

    #[test]
    fn running_median_matches_sort() {
        let mut m = RunningMedian::default();
        let xs = [5.0, 1.0, 9.0, 3.0, 3.0, 8.0, 2.0, 7.0];
        for (i, &x) in xs.iter().enumerate() {
            m.push(x);
            let mut s = xs[..=i].to_vec();
            s.sort_by(f64::total_cmp);
            let n = s.len();
            let want = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
            assert_eq!(m.median(), Some(want));
        }
    }
}

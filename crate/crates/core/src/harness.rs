//! Benchmark harness for the bimodal-mixture RMSE study: variant matrices,
//! paired-seed replicates, result tables and the particle-count speedup
//! report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, ScheduleKind};
use crate::engine::run_summary;
use crate::error::{Error, Result};

/// Step-size delay `t0` as a function of the run length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum T0 {
    One,
    QuarterN,
    HalfN,
}

impl T0 {
    pub fn resolve(self, n: u64) -> u64 {
        match self {
            T0::One => 1,
            T0::QuarterN => (n / 4).max(1),
            T0::HalfN => (n / 2).max(1),
        }
    }

    fn label(self) -> &'static str {
        match self {
            T0::One => "1",
            T0::QuarterN => "N/4",
            T0::HalfN => "N/2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    /// Uniform pseudo-priors, no bias learning.
    PlainSt,
    SaDeterministic(T0),
    WangLandau { c: f64 },
}

impl Algorithm {
    pub fn label(&self) -> String {
        match self {
            Algorithm::PlainSt => "plain_st".into(),
            Algorithm::SaDeterministic(t0) => format!("sa_deterministic(t0={})", t0.label()),
            Algorithm::WangLandau { c } => format!("wang_landau(c={c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSpec {
    pub name: String,
    pub algorithm: Algorithm,
    pub adaptive_proposal: bool,
    pub particles: usize,
    pub split: bool,
}

impl VariantSpec {
    pub fn new(name: &str, algorithm: Algorithm, adaptive_proposal: bool, particles: usize) -> Self {
        Self {
            name: name.to_string(),
            algorithm,
            adaptive_proposal,
            particles,
            split: false,
        }
    }

    /// The run configuration for this variant at length `n` and `seed`.
    pub fn configure(&self, base: &RunConfig, n: u64, seed: u64) -> RunConfig {
        let mut cfg = base.clone();
        cfg.engine.iterations = n;
        cfg.engine.seed = seed;
        cfg.engine.particles = self.particles;
        cfg.proposal.adaptive = self.adaptive_proposal;
        cfg.split.enabled = self.split;
        match self.algorithm {
            Algorithm::PlainSt => cfg.schedule.kind = ScheduleKind::None,
            Algorithm::SaDeterministic(t0) => {
                cfg.schedule.kind = ScheduleKind::Deterministic;
                cfg.schedule.t0 = t0.resolve(n);
            }
            Algorithm::WangLandau { c } => {
                cfg.schedule.kind = ScheduleKind::WangLandau;
                cfg.schedule.c = c;
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Figure {
    /// Step-size schedules: plain ST, SA with three delays, WL with three thresholds.
    Schedules,
    /// Proposal adaptation and particle count.
    Adaptive,
}

impl Figure {
    pub const ALL: [Figure; 2] = [Figure::Schedules, Figure::Adaptive];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Schedules => "schedules",
            Figure::Adaptive => "adaptive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn variants(self) -> Vec<VariantSpec> {
        use Algorithm::*;
        match self {
            Figure::Schedules => vec![
                VariantSpec::new("plain_st", PlainSt, false, 1),
                VariantSpec::new("sa_t0_1", SaDeterministic(T0::One), false, 1),
                VariantSpec::new("sa_t0_n4", SaDeterministic(T0::QuarterN), false, 1),
                VariantSpec::new("sa_t0_n2", SaDeterministic(T0::HalfN), false, 1),
                VariantSpec::new("wl_c0.01", WangLandau { c: 0.01 }, false, 1),
                VariantSpec::new("wl_c0.1", WangLandau { c: 0.1 }, false, 1),
                VariantSpec::new("wl_c0.5", WangLandau { c: 0.5 }, false, 1),
            ],
            Figure::Adaptive => vec![
                VariantSpec::new("plain_st", PlainSt, false, 1),
                VariantSpec::new("plain_st_adaptive", PlainSt, true, 1),
                VariantSpec::new("wl_c0.1", WangLandau { c: 0.1 }, false, 1),
                VariantSpec::new("wl_c0.1_adaptive", WangLandau { c: 0.1 }, true, 1),
                VariantSpec::new("wl_c0.1_adaptive_m10", WangLandau { c: 0.1 }, true, 10),
                VariantSpec::new("wl_c0.1_adaptive_m100", WangLandau { c: 0.1 }, true, 100),
            ],
        }
    }

    pub fn variant_names(self) -> Vec<String> {
        self.variants().into_iter().map(|v| v.name).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub base: RunConfig,
    pub n_grid: Vec<u64>,
    pub replicates: usize,
    pub base_seed: u64,
    pub keep_estimates: bool,
}

impl BenchSettings {
    pub fn desk_scale(base: RunConfig, base_seed: u64) -> Self {
        Self {
            base,
            n_grid: vec![1_000, 10_000, 100_000],
            replicates: 100,
            base_seed,
            keep_estimates: false,
        }
    }

    pub fn full_paper_scale(base: RunConfig, base_seed: u64) -> Self {
        Self {
            n_grid: vec![1_000, 10_000, 100_000, 1_000_000],
            replicates: 1000,
            ..Self::desk_scale(base, base_seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub variant: String,
    pub algorithm: String,
    pub adaptive: bool,
    pub split: bool,
    pub particles: usize,
    pub n: u64,
    pub replicates: usize,
    pub rmse: f64,
    /// Mean wall-clock seconds per replicate run.
    pub runtime_s: Option<f64>,
    pub estimates: Option<Vec<f64>>,
}

/// `sqrt(mean((est - truth)^2))`.
pub fn rmse(estimates: &[f64], truth: f64) -> f64 {
    if estimates.is_empty() {
        return f64::NAN;
    }
    let ss: f64 = estimates.iter().map(|e| (e - truth) * (e - truth)).sum();
    (ss / estimates.len() as f64).sqrt()
}

/// Seed of replicate `r`; identical across variants so comparisons are paired.
pub fn replicate_seed(base_seed: u64, r: usize) -> u64 {
    base_seed.wrapping_add(r as u64)
}

/// Runs every (variant, N) cell with the engine's posterior-mean estimator.
pub fn run_benchmark(variants: &[VariantSpec], settings: &BenchSettings) -> Result<Vec<BenchResult>> {
    run_benchmark_with(variants, settings, |cfg| run_summary(cfg)?.posterior_mean())
}

/// As [`run_benchmark`] with a caller-supplied per-run estimator.
pub fn run_benchmark_with<F>(variants: &[VariantSpec], settings: &BenchSettings, estimator: F) -> Result<Vec<BenchResult>>
where
    F: Fn(&RunConfig) -> Result<f64> + Sync,
{
    if settings.replicates == 0 {
        return Err(Error::config("--replicates", "must be >= 1"));
    }
    if settings.n_grid.is_empty() || settings.n_grid.contains(&0) {
        return Err(Error::config("--n-grid", "needs at least one positive N"));
    }
    let truth = settings.base.true_mean()?;
    let mut out = Vec::with_capacity(variants.len() * settings.n_grid.len());
    for v in variants {
        for &n in &settings.n_grid {
            let probe = v.configure(&settings.base, n, settings.base_seed);
            probe.validate().map_err(|e| Error::Replicate {
                variant: v.name.clone(),
                replicate: 0,
                source: Box::new(e),
            })?;
            let runs: Vec<Result<(f64, f64)>> = (0..settings.replicates)
                .into_par_iter()
                .map(|r| {
                    let cfg = v.configure(&settings.base, n, replicate_seed(settings.base_seed, r));
                    let start = Instant::now();
                    let est = estimator(&cfg).map_err(|e| Error::Replicate {
                        variant: v.name.clone(),
                        replicate: r,
                        source: Box::new(e),
                    })?;
                    Ok((est, start.elapsed().as_secs_f64()))
                })
                .collect();
            let mut estimates = Vec::with_capacity(runs.len());
            let mut seconds = 0.0;
            for run in runs {
                let (e, s) = run?;
                estimates.push(e);
                seconds += s;
            }
            out.push(BenchResult {
                variant: v.name.clone(),
                algorithm: v.algorithm.label(),
                adaptive: v.adaptive_proposal,
                split: v.split,
                particles: v.particles,
                n,
                replicates: settings.replicates,
                rmse: rmse(&estimates, truth),
                runtime_s: Some(seconds / settings.replicates as f64),
                estimates: settings.keep_estimates.then_some(estimates),
            });
        }
    }
    Ok(out)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultRow {
    variant: String,
    algorithm: String,
    adaptive: bool,
    split: bool,
    #[serde(rename = "M")]
    particles: usize,
    #[serde(rename = "N")]
    n: u64,
    replicates: usize,
    rmse: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimingRow {
    variant: String,
    #[serde(rename = "M")]
    particles: usize,
    #[serde(rename = "N")]
    n: u64,
    runtime_s: String,
}

/// Deterministic results table (no timings), one row per (variant, N).
pub fn write_results_csv<W: Write>(results: &[BenchResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in results {
        wtr.serialize(ResultRow {
            variant: r.variant.clone(),
            algorithm: r.algorithm.clone(),
            adaptive: r.adaptive,
            split: r.split,
            particles: r.particles,
            n: r.n,
            replicates: r.replicates,
            rmse: fmt_f64(r.rmse),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_timings_csv<W: Write>(results: &[BenchResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in results {
        wtr.serialize(TimingRow {
            variant: r.variant.clone(),
            particles: r.particles,
            n: r.n,
            runtime_s: r.runtime_s.map(fmt_f64).unwrap_or_default(),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::config(what, format!("cannot parse `{s}` as a number")))
}

/// Reads a results table, joining runtimes from a timings table when given.
pub fn read_results_csv<R: Read, T: Read>(results: R, timings: Option<T>) -> Result<Vec<BenchResult>> {
    let mut times = BTreeMap::new();
    if let Some(t) = timings {
        for row in csv::Reader::from_reader(t).deserialize::<TimingRow>() {
            let row = row?;
            if !row.runtime_s.is_empty() {
                times.insert((row.variant, row.particles, row.n), parse_f64(&row.runtime_s, "runtime_s")?);
            }
        }
    }
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(results).deserialize::<ResultRow>() {
        let row = row?;
        out.push(BenchResult {
            runtime_s: times.get(&(row.variant.clone(), row.particles, row.n)).copied(),
            rmse: parse_f64(&row.rmse, "rmse")?,
            variant: row.variant,
            algorithm: row.algorithm,
            adaptive: row.adaptive,
            split: row.split,
            particles: row.particles,
            n: row.n,
            replicates: row.replicates,
            estimates: None,
        });
    }
    Ok(out)
}

pub const FIGURE_HEADER: &str = "figure,variant,N,rmse,runtime_s";

#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub csv: String,
    pub rows: usize,
    /// (variant, N) cells of the figure absent from the results.
    pub missing: Vec<(String, u64)>,
}

/// Long-format plotting table for one figure, sorted by (figure, variant, N).
pub fn figure_data(results: &[BenchResult], figure: Figure) -> FigureTable {
    let names = figure.variant_names();
    let grid: BTreeSet<u64> = results.iter().map(|r| r.n).collect();
    let mut rows: Vec<&BenchResult> = results.iter().filter(|r| names.contains(&r.variant)).collect();
    rows.sort_by(|a, b| (&a.variant, a.n).cmp(&(&b.variant, b.n)));
    rows.dedup_by(|a, b| a.variant == b.variant && a.n == b.n);
    let mut missing = Vec::new();
    let mut sorted_names = names.clone();
    sorted_names.sort();
    for v in &sorted_names {
        for &n in &grid {
            if !rows.iter().any(|r| &r.variant == v && r.n == n) {
                missing.push((v.clone(), n));
            }
        }
    }
    let mut csv = format!("{FIGURE_HEADER}\n");
    for r in &rows {
        let runtime = r.runtime_s.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{},{}", figure.name(), r.variant, r.n, fmt_f64(r.rmse), runtime);
    }
    FigureTable {
        csv,
        rows: rows.len(),
        missing,
    }
}

/// One parsed row of a figure table.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub figure: String,
    pub variant: String,
    pub n: u64,
    pub rmse: f64,
    pub runtime_s: Option<f64>,
}

pub fn parse_figure_csv(csv: &str) -> Result<Vec<FigureRow>> {
    let mut out = Vec::new();
    for rec in csv::Reader::from_reader(csv.as_bytes()).records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        out.push(FigureRow {
            figure: field(0).to_string(),
            variant: field(1).to_string(),
            n: field(2)
                .parse()
                .map_err(|_| Error::config("N", format!("cannot parse `{}`", field(2))))?,
            rmse: parse_f64(field(3), "rmse")?,
            runtime_s: if field(4).is_empty() { None } else { Some(parse_f64(field(4), "runtime_s")?) },
        });
    }
    Ok(out)
}

/// Wall-clock and RMSE ratios relative to the single-particle run, for
/// every group of results that differ only in particle count.
pub fn speedup_report(results: &[BenchResult]) -> Result<String> {
    type Key = (String, bool, bool, u64);
    let mut groups: BTreeMap<Key, Vec<&BenchResult>> = BTreeMap::new();
    for r in results {
        groups
            .entry((r.algorithm.clone(), r.adaptive, r.split, r.n))
            .or_default()
            .push(r);
    }
    groups.retain(|_, g| g.iter().map(|r| r.particles).collect::<BTreeSet<_>>().len() > 1);
    if groups.is_empty() {
        return Err(Error::config("results", "no variant was run with several particle counts"));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<28} {:>8} {:>6} {:>12} {:>12} {:>12} {:>10}",
        "algorithm", "N", "M", "runtime_x", "rmse", "rmse_ratio", "ideal"
    );
    for ((algorithm, adaptive, split, n), mut group) in groups {
        group.sort_by_key(|r| r.particles);
        let base = group
            .iter()
            .find(|r| r.particles == 1)
            .ok_or_else(|| Error::config("results", format!("missing M=1 baseline for {algorithm} at N={n}")))?;
        let mut label = algorithm.clone();
        if adaptive {
            label.push_str("+adapt");
        }
        if split {
            label.push_str("+split");
        }
        for r in &group {
            let runtime = match (r.runtime_s, base.runtime_s) {
                (Some(a), Some(b)) if b > 0.0 => format!("{:.3}", a / b),
                _ => "n/a".to_string(),
            };
            let _ = writeln!(
                s,
                "{:<28} {:>8} {:>6} {:>12} {:>12.5} {:>12.4} {:>10.4}",
                label,
                n,
                r.particles,
                runtime,
                r.rmse,
                r.rmse / base.rmse,
                1.0 / (r.particles as f64).sqrt()
            );
        }
    }
    Ok(s)
}

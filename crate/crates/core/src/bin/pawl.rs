use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pawl_core::config::RunConfig;
use pawl_core::engine;
use pawl_core::error::{Error, Result};
use pawl_core::harness::{
    figure_data, read_results_csv, run_benchmark, speedup_report, write_results_csv, write_timings_csv,
    BenchSettings, Figure,
};

#[derive(Parser)]
#[command(name = "pawl", version, about = "PAWL-forced simulated tempering sampler and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run from a config file; writes trace.csv and summary.txt.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Variant sweep; writes results.csv and timings.csv.
    Bench {
        /// Base config shared by every variant.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<u64>>,
        /// schedules or adaptive; both when omitted.
        #[arg(long)]
        figure: Option<String>,
        #[arg(long)]
        full_paper_scale: bool,
    },
    /// Reads results.csv (and timings.csv if present); writes figure tables
    /// and prints the particle-count speedup report.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Results table; defaults to <out>/results.csv.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        figure: Option<String>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_path(p),
        None => Ok(RunConfig::default()),
    }
}

fn figures(arg: Option<&str>) -> Result<Vec<Figure>> {
    match arg {
        None => Ok(Figure::ALL.to_vec()),
        Some(s) => Figure::parse(s)
            .map(|f| vec![f])
            .ok_or_else(|| Error::config("--figure", format!("unknown figure `{s}` (schedules|adaptive)"))),
    }
}

fn cmd_run(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.engine.seed = s;
    }
    let (trace, summary) = engine::run(&cfg)?;
    fs::create_dir_all(out)?;
    trace.write_csv(BufWriter::new(File::create(out.join("trace.csv"))?))?;
    let text = summary.to_kv_string();
    fs::write(out.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_bench(
    config: Option<&Path>,
    out: &Path,
    seed: u64,
    replicates: Option<usize>,
    n_grid: Option<Vec<u64>>,
    figure: Option<&str>,
    full: bool,
) -> Result<()> {
    let base = load_config(config)?;
    let mut settings = if full {
        BenchSettings::full_paper_scale(base, seed)
    } else {
        BenchSettings::desk_scale(base, seed)
    };
    if let Some(r) = replicates {
        settings.replicates = r;
    }
    if let Some(grid) = n_grid {
        settings.n_grid = grid;
    }
    let mut variants = Vec::new();
    for f in figures(figure)? {
        for v in f.variants() {
            if !variants.contains(&v) {
                variants.push(v);
            }
        }
    }
    let results = run_benchmark(&variants, &settings)?;
    fs::create_dir_all(out)?;
    write_results_csv(&results, BufWriter::new(File::create(out.join("results.csv"))?))?;
    write_timings_csv(&results, BufWriter::new(File::create(out.join("timings.csv"))?))?;
    eprintln!("wrote {} result rows to {}", results.len(), out.display());
    Ok(())
}

fn cmd_report(out: &Path, results: Option<&Path>, figure: Option<&str>) -> Result<()> {
    let results_path = results.map(Path::to_path_buf).unwrap_or_else(|| out.join("results.csv"));
    let timings_path = results_path.with_file_name("timings.csv");
    let timings = timings_path.exists().then(|| File::open(&timings_path)).transpose()?;
    let results = read_results_csv(File::open(&results_path)?, timings)?;
    fs::create_dir_all(out)?;
    for f in figures(figure)? {
        let table = figure_data(&results, f);
        let path = out.join(format!("figure_{}.csv", f.name()));
        fs::write(&path, &table.csv)?;
        eprintln!("{}: {} rows -> {}", f.name(), table.rows, path.display());
        if !table.missing.is_empty() {
            eprintln!("warning: {} (variant, N) cells missing from {}", table.missing.len(), f.name());
        }
    }
    match speedup_report(&results) {
        Ok(report) => print!("{report}"),
        Err(e) => eprintln!("speedup report skipped: {e}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed } => cmd_run(config.as_deref(), &out, seed),
        Command::Bench {
            config,
            out,
            seed,
            replicates,
            n_grid,
            figure,
            full_paper_scale,
        } => cmd_bench(
            config.as_deref(),
            &out,
            seed,
            replicates,
            n_grid,
            figure.as_deref(),
            full_paper_scale,
        ),
        Command::Report { out, results, figure } => cmd_report(&out, results.as_deref(), figure.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

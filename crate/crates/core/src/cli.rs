//! Command-line front end: `run`, `ensemble`, `bench` and `graph`.
//!
//! Output files (all CSV, written into `--out`):
//!
//! | command    | file                     | columns                                                    |
//! |------------|--------------------------|------------------------------------------------------------|
//! | `run`      | `series.csv`             | `step,S,I,R` then `# truncated=true\|false`                 |
//! | `ensemble` | `curves.csv`             | `step,mean_S,mean_I,mean_R,std_I`                          |
//! | `ensemble` | `summary.csv`            | `runs,peak_mean,peak_time_mean,attack_size_mean,truncated_runs` |
//! | `bench`    | `bench.csv`              | `n,method,i_update,pair_evals,wall_seconds`                |
//! | `graph`    | `positions.csv`          | `id,x,y`                                                   |
//! | `graph`    | `comm_edges.csv`, `interference_edges.csv` | `i,j` with `i < j`, sorted              |
//!
//! Positions carry 6 decimals, means and deviations 8.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::SimConfig;
use crate::ensemble::{aggregate, run_all, run_bench, BenchPlan, BenchRecord, EnsembleStats};
use crate::epidemic::{run_single, RunOutcome};
use crate::geometry::Position;
use crate::mobility::scatter;
use crate::rng::{from_seed, run_seed};
use crate::topology::{export_graph, neighbors_cell_list};
use crate::{Result, SimError};

#[derive(Debug, Parser)]
#[command(name = "adhoc-sim", version, about = "Worm epidemics on mobile WiFi adhoc networks")]
pub struct Cli {
    /// Simulation config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Overrides ensemble.workers.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single run; writes series.csv.
    Run,
    /// Monte Carlo ensemble; writes curves.csv and summary.csv.
    Ensemble {
        /// Overrides ensemble.runs.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Neighbor-list rebuild cost, brute force vs cell list; writes bench.csv.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1000usize, 2000, 4000, 8000])]
        nodes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u32, 2, 5, 10, 20])]
        periods: Vec<u32>,
        /// Epidemic steps per measurement.
        #[arg(long, default_value_t = 100)]
        steps: u32,
    },
    /// One static placement; writes positions.csv and both edge lists.
    Graph,
}

impl Cli {
    pub fn load_config(&self) -> Result<SimConfig> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| SimError::Config("--config <PATH> is required".into()))?;
        let mut config = SimConfig::load(path)?;
        if let Some(seed) = self.seed {
            config = config.with_seed(seed);
        }
        if let Some(workers) = self.workers {
            config = config.with_workers(workers)?;
        }
        Ok(config)
    }

    /// Executes the command and returns the files written.
    pub fn execute(&self) -> Result<Vec<PathBuf>> {
        let mut config = self.load_config()?;
        for w in &config.warnings {
            log::warn!("{w}");
        }
        match &self.command {
            Command::Run => cmd_run(&config, &self.out),
            Command::Ensemble { runs } => {
                if let Some(r) = *runs {
                    if r < 1 {
                        return Err(SimError::Config("ensemble.runs must be >= 1".into()));
                    }
                    config.runs = r;
                }
                cmd_ensemble(&config, &self.out)
            }
            Command::Bench { nodes, periods, steps } => {
                if nodes.is_empty() || periods.is_empty() || periods.contains(&0) || *steps < 1 {
                    return Err(SimError::Config(
                        "bench needs node counts, update periods >= 1 and steps >= 1".into(),
                    ));
                }
                let plan = BenchPlan::new(nodes.clone(), periods.clone(), *steps);
                cmd_bench(&config, &plan, &self.out)
            }
            Command::Graph => cmd_graph(&config, &self.out),
        }
    }
}

struct CsvFile {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl CsvFile {
    fn create(dir: &Path, name: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| SimError::Write { path: dir.to_path_buf(), source })?;
        let path = dir.join(name);
        let file = File::create(&path).map_err(|source| SimError::Write { path: path.clone(), source })?;
        Ok(Self { path, inner: BufWriter::new(file) })
    }

    fn line(&mut self, args: std::fmt::Arguments<'_>) -> Result<()> {
        self.inner
            .write_fmt(args)
            .and_then(|_| self.inner.write_all(b"\n"))
            .map_err(|source| SimError::Write { path: self.path.clone(), source })
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.inner
            .flush()
            .map_err(|source| SimError::Write { path: self.path.clone(), source })?;
        Ok(self.path)
    }
}

pub fn write_series(dir: &Path, run: &RunOutcome) -> Result<PathBuf> {
    let mut f = CsvFile::create(dir, "series.csv")?;
    f.line(format_args!("step,S,I,R"))?;
    for (t, c) in run.series.counts.iter().enumerate() {
        f.line(format_args!("{t},{},{},{}", c.s, c.i, c.r))?;
    }
    f.line(format_args!("# truncated={}", run.truncated))?;
    f.finish()
}

pub fn write_curves(dir: &Path, stats: &EnsembleStats) -> Result<PathBuf> {
    let mut f = CsvFile::create(dir, "curves.csv")?;
    f.line(format_args!("step,mean_S,mean_I,mean_R,std_I"))?;
    for t in 0..stats.len() {
        f.line(format_args!(
            "{t},{:.8},{:.8},{:.8},{:.8}",
            stats.mean_s[t], stats.mean_i[t], stats.mean_r[t], stats.std_i[t]
        ))?;
    }
    f.finish()
}

pub fn write_summary(dir: &Path, stats: &EnsembleStats) -> Result<PathBuf> {
    let mut f = CsvFile::create(dir, "summary.csv")?;
    f.line(format_args!("runs,peak_mean,peak_time_mean,attack_size_mean,truncated_runs"))?;
    f.line(format_args!(
        "{},{:.8},{:.8},{:.8},{}",
        stats.runs, stats.peak_mean, stats.peak_time_mean, stats.attack_size_mean, stats.truncated_runs
    ))?;
    f.finish()
}

pub fn write_bench(dir: &Path, records: &[BenchRecord]) -> Result<PathBuf> {
    let mut f = CsvFile::create(dir, "bench.csv")?;
    f.line(format_args!("n,method,i_update,pair_evals,wall_seconds"))?;
    for r in records {
        f.line(format_args!(
            "{},{},{},{},{:.9}",
            r.n_nodes, r.method, r.i_update, r.pair_evals, r.wall_seconds
        ))?;
    }
    f.finish()
}

pub fn write_positions(dir: &Path, positions: &[Position]) -> Result<PathBuf> {
    let mut f = CsvFile::create(dir, "positions.csv")?;
    f.line(format_args!("id,x,y"))?;
    for (id, p) in positions.iter().enumerate() {
        f.line(format_args!("{id},{:.6},{:.6}", p.x, p.y))?;
    }
    f.finish()
}

pub fn write_edges(dir: &Path, name: &str, edges: &[(usize, usize)]) -> Result<PathBuf> {
    let mut f = CsvFile::create(dir, name)?;
    f.line(format_args!("i,j"))?;
    for (i, j) in edges {
        f.line(format_args!("{i},{j}"))?;
    }
    f.finish()
}

/// Single run seeded like run 0 of an ensemble with the same seed.
pub fn cmd_run(config: &SimConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let run = run_single(&config.scenario, from_seed(run_seed(config.seed, 0)))?;
    Ok(vec![write_series(out, &run)?])
}

pub fn cmd_ensemble(config: &SimConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let runs = run_all(&config.scenario, config.runs, config.seed, config.workers)?;
    let stats = aggregate(&runs)?;
    Ok(vec![write_curves(out, &stats)?, write_summary(out, &stats)?])
}

pub fn cmd_bench(config: &SimConfig, plan: &BenchPlan, out: &Path) -> Result<Vec<PathBuf>> {
    let records = run_bench(plan, &config.scenario, config.seed)?;
    Ok(vec![write_bench(out, &records)?])
}

/// Positions and graphs of the initial placement of run 0.
pub fn cmd_graph(config: &SimConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let sc = &config.scenario;
    let mut rng = from_seed(run_seed(config.seed, 0));
    let positions = scatter(sc.n_nodes, &sc.domain, &mut rng);
    let comm = neighbors_cell_list(&positions, &sc.domain, sc.radio.transmission_range())?;
    let intf = neighbors_cell_list(&positions, &sc.domain, sc.radio.interference_range())?;
    Ok(vec![
        write_positions(out, &positions)?,
        write_edges(out, "comm_edges.csv", &export_graph(&comm))?,
        write_edges(out, "interference_edges.csv", &export_graph(&intf))?,
    ])
}

//! File formats and the `repmatch` command line.
//!
//! ```text
//! repmatch match        --config run.cfg [--units cohort.csv] [--out DIR]
//! repmatch simulate     --config grid.cfg [--out bias.csv]
//! repmatch balance      --pairs pairs.csv --units cohort.csv --config run.cfg
//! repmatch dump-network --config run.cfg [--out net.dimacs]
//! ```
//!
//! Every subcommand accepts `--set key=value`; explicit flags win over
//! `--set`, which wins over the file. Exit status is 0 on success, 1 on a
//! usage or data error and 2 when the match is infeasible.

mod config;
mod io;

pub use config::{
    grid_from_map, ConfigMap, FineBalanceConfig, RunConfig, TargetSpec, MATCH_KEYS, SIMULATE_KEYS,
};
pub use io::{
    balance_table, load_units_csv, pair_records, read_pairs_csv, resolve_pairs, write_balance_csv, write_pairs_csv,
    write_summary, BalanceRow, PairRecord, BALANCE_HEADER, PAIRS_HEADER,
};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::simlab::run_factorial;
use crate::statdist::{CovariateTable, Role, ScoreSet};
use crate::templatematch::{build_template_network, compute_distances, match_with_scores, MatchedSample, TemplateMatchSpec};

/// Environment variable holding the worker thread count for `simulate`.
pub const THREADS_ENV: &str = "REPMATCH_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "repmatch", version, about = "Template-guided optimal matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Match treated units resembling the template to controls.
    Match(MatchArgs),
    /// Run the factorial bias simulation.
    Simulate(SimulateArgs),
    /// Balance table for an existing set of pairs.
    Balance(BalanceArgs),
    /// Write the flow network in DIMACS min-cost-flow format.
    DumpNetwork(DumpArgs),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn map(&self) -> Result<ConfigMap> {
        let mut map = match &self.config {
            Some(p) => ConfigMap::load(p)?,
            None => ConfigMap::default(),
        };
        for s in &self.set {
            map.apply_override(s)?;
        }
        Ok(map)
    }
}

#[derive(Debug, Args)]
struct MatchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    units: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    caliper: Option<f64>,
    #[arg(long)]
    sparsify: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Output CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BalanceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    units: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    units: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn set_opt<T: ToString>(map: &mut ConfigMap, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        map.set(key, v.to_string());
    }
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    let result = match cli.command {
        Command::Match(a) => match_command(a),
        Command::Simulate(a) => simulate_command(a),
        Command::Balance(a) => balance_command(a),
        Command::DumpNetwork(a) => dump_command(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::spec(format!("{THREADS_ENV} = `{value}` is not a thread count")))?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn units_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.units
        .as_deref()
        .ok_or_else(|| Error::spec("no units file (set `units` or pass --units)"))
}

fn load(cfg: &RunConfig) -> Result<(CovariateTable, TemplateMatchSpec)> {
    let table = load_units_csv(units_path(cfg)?, cfg)?;
    let template_categories = match &cfg.fine_balance {
        Some(fb) if fb.targets == TargetSpec::FromTemplate => {
            Some(table.category_keys(&fb.column, table.units(Role::Template))?)
        }
        _ => None,
    };
    let spec = cfg.spec(template_categories.as_deref())?;
    Ok((table, spec))
}

/// Outcome of [`cmd_match`].
#[derive(Debug, Clone)]
pub struct MatchRun {
    pub table: CovariateTable,
    pub sample: MatchedSample,
    pub exit_code: i32,
}

/// Fits scores, matches and writes `pairs.csv`, `balance.csv` and
/// `summary.txt` into `cfg.output`. An infeasible match writes only the
/// summary and exits with [`EXIT_INFEASIBLE`].
pub fn cmd_match(cfg: &RunConfig) -> Result<MatchRun> {
    let (table, spec) = load(cfg)?;
    let scores = ScoreSet::fit(&table)?;
    let sample = match_with_scores(&table, &scores, cfg.kinds, &spec)?;
    std::fs::create_dir_all(&cfg.output)?;
    write_summary(&cfg.output.join("summary.txt"), &sample, cfg.k)?;
    if !sample.feasible {
        return Ok(MatchRun {
            table,
            sample,
            exit_code: EXIT_INFEASIBLE,
        });
    }
    write_pairs_csv(&cfg.output.join("pairs.csv"), &pair_records(&sample, &table))?;
    let rows = balance_table(&table, &sample.treated_units(&table), &sample.control_units(&table))?;
    write_balance_csv(&cfg.output.join("balance.csv"), &rows)?;
    Ok(MatchRun {
        table,
        sample,
        exit_code: EXIT_OK,
    })
}

/// Recomputes the balance table for pairs read from `pairs`.
pub fn cmd_balance(cfg: &RunConfig, pairs: &Path, out: &Path) -> Result<Vec<BalanceRow>> {
    let table = load_units_csv(units_path(cfg)?, cfg)?;
    let records = read_pairs_csv(pairs)?;
    let (treated, controls) = resolve_pairs(&records, &table)?;
    let rows = balance_table(&table, &treated, &controls)?;
    write_balance_csv(out, &rows)?;
    Ok(rows)
}

/// DIMACS text of the network `cmd_match` would solve.
pub fn cmd_dump_network(cfg: &RunConfig) -> Result<String> {
    let (table, spec) = load(cfg)?;
    let scores = ScoreSet::fit(&table)?;
    let (dist, _) = compute_distances(&table, &scores, cfg.kinds, &spec)?;
    Ok(build_template_network(&table, &dist, &spec)?.net.to_dimacs())
}

fn match_command(a: MatchArgs) -> Result<i32> {
    let mut map = a.common.map()?;
    set_opt(&mut map, "units", &a.units.map(|p| p.display().to_string()));
    set_opt(&mut map, "output", &a.out.map(|p| p.display().to_string()));
    set_opt(&mut map, "k", &a.k);
    set_opt(&mut map, "lambda", &a.lambda);
    set_opt(&mut map, "caliper", &a.caliper);
    set_opt(&mut map, "sparsify", &a.sparsify);
    let cfg = RunConfig::from_map(&map)?;
    let run = cmd_match(&cfg)?;
    for w in &run.sample.warnings {
        eprintln!("warning: {w}");
    }
    match &run.sample.infeasibility {
        Some(diag) => eprintln!("{diag}"),
        None => println!(
            "{} pairs, objective {} (s1 {}, s2 {}); wrote {}",
            run.sample.pairs.len(),
            run.sample.objective,
            run.sample.s1_template_cost,
            run.sample.s2_pairing_cost,
            cfg.output.display()
        ),
    }
    Ok(run.exit_code)
}

fn simulate_command(a: SimulateArgs) -> Result<i32> {
    let mut map = a.common.map()?;
    set_opt(&mut map, "output", &a.out.map(|p| p.display().to_string()));
    set_opt(&mut map, "replicates", &a.replicates);
    set_opt(&mut map, "seed", &a.seed);
    let out = PathBuf::from(map.get("output").unwrap_or("bias.csv"));
    let grid = grid_from_map(&map)?;
    let report = run_factorial(&grid)?;
    report.write_csv(std::fs::File::create(&out)?)?;
    let failures: usize = report.rows.iter().map(|r| r.failures).sum();
    if failures > 0 {
        eprintln!("warning: {failures} algorithm run(s) had no feasible match");
    }
    println!("{} rows; wrote {}", report.rows.len(), out.display());
    Ok(EXIT_OK)
}

fn balance_command(a: BalanceArgs) -> Result<i32> {
    let mut map = a.common.map()?;
    set_opt(&mut map, "units", &a.units.map(|p| p.display().to_string()));
    let cfg = RunConfig::from_map(&map)?;
    let out = a.out.unwrap_or_else(|| PathBuf::from("balance.csv"));
    let rows = cmd_balance(&cfg, &a.pairs, &out)?;
    println!("{} covariates; wrote {}", rows.len(), out.display());
    Ok(EXIT_OK)
}

fn dump_command(a: DumpArgs) -> Result<i32> {
    let mut map = a.common.map()?;
    set_opt(&mut map, "units", &a.units.map(|p| p.display().to_string()));
    let cfg = RunConfig::from_map(&map)?;
    let text = cmd_dump_network(&cfg)?;
    match a.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

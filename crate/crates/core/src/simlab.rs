//! Factorial simulation of generalization bias.
//!
//! A template of 300 units is drawn from the target population
//! `N((0.25, 0, 0, 0, 0), I)`. Observational units have `d` covariates drawn
//! from `N((theta * Z, 0, ..., 0), I)`; the first five are shared with the
//! template. Outcomes follow `Y(0) ~ N(X'nu, 1)` and `Y(1) = Y(0) + beta(X1)`.
//! Each matching algorithm's difference-in-means estimate is compared with
//! the average effect over the target population.
//!
//! The full-cohort baseline (`Mopt`) is the penalized-caliper optimal pair
//! match of all treated units from [`crate::pairmatch`]; it targets the
//! effect on the treated group, which for `beta = 2 - X1` and `theta = 0.5`
//! is `1.5`, a `-14.3%` gap from the target effect `1.75`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pairmatch::{match_baseline_mopt_with, MoptOptions};
use crate::statdist::{Caliper, CovariateTable, Role, ScoreSet};
use crate::templatematch::{
    build_template_network, compute_distances, solve_template_match, DistanceKinds, MatchedSample, TemplateMatchSpec,
};

/// Number of covariates shared between template and observational units.
pub const SHARED_DIM: usize = 5;
/// Mean of the first covariate in the target population.
pub const TARGET_X1_MEAN: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Effect {
    /// beta(X1) = 2
    Constant,
    /// beta(X1) = 2 - 0.2 X1
    Mild,
    /// beta(X1) = 2 - X1
    Strong,
}

impl Effect {
    pub fn beta(self, x1: f64) -> f64 {
        match self {
            Effect::Constant => 2.0,
            Effect::Mild => 2.0 - 0.2 * x1,
            Effect::Strong => 2.0 - x1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Effect::Constant => "constant",
            Effect::Mild => "mild",
            Effect::Strong => "strong",
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Effect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "constant" => Ok(Effect::Constant),
            "mild" => Ok(Effect::Mild),
            "strong" => Ok(Effect::Strong),
            other => Err(Error::spec(format!("unknown effect `{other}`"))),
        }
    }
}

/// Average effect over the target population, `E[beta(X1)]` with
/// `X1 ~ N(0.25, 1)`.
pub fn ate_target(effect: Effect) -> f64 {
    match effect {
        Effect::Constant => 2.0,
        Effect::Mild => 1.95,
        Effect::Strong => 1.75,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    /// Optimal match of every treated unit, ignoring the template.
    Mopt,
    Template { k: usize, lambda: f64 },
}

impl Algorithm {
    /// The seven algorithms of the standard grid.
    pub fn standard_set() -> Vec<Algorithm> {
        let mut out = vec![Algorithm::Mopt];
        for k in [1, 2] {
            for lambda in [0.01, 1.0, 100.0] {
                out.push(Algorithm::Template { k, lambda });
            }
        }
        out
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Mopt => "mopt",
            Algorithm::Template { .. } => "template",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Mopt => f.write_str("mopt"),
            Algorithm::Template { k, lambda } => write!(f, "template(k={k},lambda={lambda})"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    /// `mopt` or `template(k, lambda)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "mopt" {
            return Ok(Algorithm::Mopt);
        }
        let inner = s
            .strip_prefix("template(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::spec(format!("unknown algorithm `{s}`")))?;
        let (k, lambda) = inner
            .split_once(['/', ';', ' '])
            .ok_or_else(|| Error::spec(format!("expected template(k/lambda), got `{s}`")))?;
        let bad = |_| Error::spec(format!("bad algorithm `{s}`"));
        Ok(Algorithm::Template {
            k: k.trim().parse().map_err(|_| Error::spec(format!("bad k in `{s}`")))?,
            lambda: lambda.trim().parse().map_err(bad)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sizes {
    pub template: usize,
    pub treated: usize,
    pub control: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            template: 300,
            treated: 1000,
            control: 3000,
        }
    }
}

/// Matching settings shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchSettings {
    /// Hard propensity caliper on treated-control arcs of template matches,
    /// and the penalized caliper width of the baseline.
    pub caliper: f64,
    /// Treated-control arcs kept per treated unit (nearest in propensity).
    pub sparsify: usize,
}

impl Default for MatchSettings {
    fn default() -> Self {
        MatchSettings {
            caliper: 0.05,
            sparsify: 50,
        }
    }
}

/// One cell of the factorial design.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub d: usize,
    pub theta: f64,
    pub nu: f64,
    pub effect: Effect,
    pub sizes: Sizes,
    pub replicates: usize,
    pub master_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub settings: MatchSettings,
}

impl SimConfig {
    pub fn new(d: usize, theta: f64, nu: f64, effect: Effect) -> Self {
        SimConfig {
            d,
            theta,
            nu,
            effect,
            sizes: Sizes::default(),
            replicates: 200,
            master_seed: 20_240_101,
            algorithms: Algorithm::standard_set(),
            settings: MatchSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < SHARED_DIM {
            return Err(Error::spec(format!("d = {} below the {SHARED_DIM} shared covariates", self.d)));
        }
        if !(self.theta.is_finite() && self.nu.is_finite()) {
            return Err(Error::spec("theta and nu must be finite"));
        }
        if self.replicates == 0 {
            return Err(Error::spec("replicates must be positive"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::spec("no algorithms configured"));
        }
        let s = self.sizes;
        if s.template == 0 || s.treated == 0 || s.control == 0 {
            return Err(Error::spec("all group sizes must be positive"));
        }
        Ok(())
    }
}

/// A factorial grid: every combination of the listed factor levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SimGrid {
    pub ds: Vec<usize>,
    pub thetas: Vec<f64>,
    pub nus: Vec<f64>,
    pub effects: Vec<Effect>,
    pub sizes: Sizes,
    pub replicates: usize,
    pub master_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub settings: MatchSettings,
}

impl Default for SimGrid {
    fn default() -> Self {
        SimGrid {
            ds: vec![10, 30, 50],
            thetas: vec![0.5, 0.75],
            nus: vec![0.0, 0.05, 0.1],
            effects: vec![Effect::Constant, Effect::Mild, Effect::Strong],
            sizes: Sizes::default(),
            replicates: 200,
            master_seed: 20_240_101,
            algorithms: Algorithm::standard_set(),
            settings: MatchSettings::default(),
        }
    }
}

impl SimGrid {
    /// Cells ordered by (d, theta, nu, effect).
    pub fn cells(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &d in &self.ds {
            for &theta in &self.thetas {
                for &nu in &self.nus {
                    for &effect in &self.effects {
                        out.push(SimConfig {
                            d,
                            theta,
                            nu,
                            effect,
                            sizes: self.sizes,
                            replicates: self.replicates,
                            master_seed: self.master_seed,
                            algorithms: self.algorithms.clone(),
                            settings: self.settings,
                        });
                    }
                }
            }
        }
        out
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `replicate` under `master_seed`:
/// `splitmix64(master_seed ^ splitmix64(replicate))`.
pub fn replicate_seed(master_seed: u64, replicate: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(replicate as u64))
}

/// Simulated units with both potential outcomes (indexed like the table).
#[derive(Debug, Clone)]
pub struct Population {
    pub table: CovariateTable,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
}

impl Population {
    /// `Y = Z * Y(1) + (1 - Z) * Y(0)`, template units reported as `Y(0)`.
    pub fn observed(&self, unit: usize) -> f64 {
        if self.table.role(unit) == Role::Treated {
            self.y1[unit]
        } else {
            self.y0[unit]
        }
    }
}

impl Population {
    /// Writes `id, role, X1..Xd, y` with the observed outcome; template rows
    /// leave the observational-only covariates and `y` empty.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let t = &self.table;
        let names = t.covariate_names();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string(), "role".to_string()];
        header.extend(names.iter().cloned());
        header.push("y".into());
        w.write_record(&header)?;
        for unit in 0..t.len() {
            let role = t.role(unit);
            let mut row = vec![t.id(unit).to_string(), role.as_str().to_string()];
            for name in &names {
                let v = t.numeric_values(name, &[unit])?[0];
                row.push(if v.is_finite() { v.to_string() } else { String::new() });
            }
            row.push(if role == Role::Template { String::new() } else { self.observed(unit).to_string() });
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws one replicate. Template rows come first, then treated, then controls.
pub fn generate_population(cfg: &SimConfig, replicate: usize) -> Result<Population> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(cfg.master_seed, replicate));
    let Sizes {
        template: r,
        treated: t,
        control: c,
    } = cfg.sizes;
    let n = r + t + c;
    let d = cfg.d;
    let mut shared = DMatrix::zeros(n, SHARED_DIM);
    let mut extended = DMatrix::from_element(n, d - SHARED_DIM, f64::NAN);
    let mut roles = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for i in 0..n {
        let (role, shift, width) = if i < r {
            (Role::Template, TARGET_X1_MEAN, SHARED_DIM)
        } else if i < r + t {
            (Role::Treated, cfg.theta, d)
        } else {
            (Role::Control, 0.0, d)
        };
        let mut linear = 0.0;
        for j in 0..width {
            let z: f64 = rng.sample(StandardNormal);
            let x = if j == 0 { z + shift } else { z };
            if j < SHARED_DIM {
                shared[(i, j)] = x;
            } else {
                extended[(i, j - SHARED_DIM)] = x;
            }
            linear += cfg.nu * x;
        }
        let noise: f64 = rng.sample(StandardNormal);
        let base = linear + noise;
        y0.push(base);
        y1.push(base + cfg.effect.beta(shared[(i, 0)]));
        let prefix = match role {
            Role::Template => "k",
            Role::Treated => "t",
            Role::Control => "c",
        };
        ids.push(format!("{prefix}{i}"));
        roles.push(role);
    }
    let shared_names = (1..=SHARED_DIM).map(|j| format!("X{j}")).collect();
    let extended_names = (SHARED_DIM + 1..=d).map(|j| format!("X{j}")).collect();
    let table = CovariateTable::new(ids, roles, shared_names, shared, extended_names, extended)?;
    Ok(Population { table, y0, y1 })
}

/// Mean over pairs of observed treated outcome minus observed control outcome.
pub fn difference_in_means(sample: &MatchedSample, population: &Population) -> Result<f64> {
    if !sample.feasible || sample.pairs.is_empty() {
        return Err(Error::data("difference in means needs a feasible, non-empty match"));
    }
    let treated = sample.treated_units(&population.table);
    let controls = sample.control_units(&population.table);
    let total: f64 = treated
        .iter()
        .zip(&controls)
        .map(|(&a, &b)| population.observed(a) - population.observed(b))
        .sum();
    Ok(total / sample.pairs.len() as f64)
}

/// Runs every algorithm of `cfg` on one replicate; `None` marks a failure.
pub fn run_replicate(cfg: &SimConfig, replicate: usize) -> Result<Vec<Option<f64>>> {
    let pop = generate_population(cfg, replicate)?;
    let table = &pop.table;
    let scores = ScoreSet::fit(table)?;
    let spec = TemplateMatchSpec {
        sparsify: cfg.settings.sparsify,
        pair_caliper: Some(Caliper::hard(cfg.settings.caliper)),
        compact_template_layer: true,
        ..TemplateMatchSpec::default()
    };
    let needs_template = cfg.algorithms.iter().any(|a| matches!(a, Algorithm::Template { .. }));
    let dist = if needs_template {
        Some(compute_distances(table, &scores, DistanceKinds::default(), &spec)?.0)
    } else {
        None
    };
    let mut out = Vec::with_capacity(cfg.algorithms.len());
    for alg in &cfg.algorithms {
        let sample = match *alg {
            Algorithm::Mopt => match_baseline_mopt_with(
                table,
                &scores,
                MoptOptions {
                    caliper_width: cfg.settings.caliper,
                    sparsify: cfg.settings.sparsify,
                },
            ),
            Algorithm::Template { k, lambda } => {
                let spec = TemplateMatchSpec { k, lambda, ..spec.clone() };
                let dist = dist.as_ref().expect("template distances");
                build_template_network(table, dist, &spec).map(|tn| solve_template_match(&tn))
            }
        };
        out.push(match sample {
            Ok(s) if s.feasible => Some(difference_in_means(&s, &pop)?),
            _ => None,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub d: usize,
    pub theta: f64,
    pub nu: f64,
    pub effect: Effect,
    pub algorithm: Algorithm,
    /// Replicates with a feasible match.
    pub replicates: usize,
    pub failures: usize,
    pub mean_estimate: f64,
    pub ate_target: f64,
    /// `100 * mean(estimate - ATE_target) / ATE_target`.
    pub percent_bias: f64,
    /// Monte-Carlo standard error of `percent_bias`.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BiasReport {
    pub rows: Vec<BiasRow>,
}

pub const BIAS_CSV_HEADER: [&str; 12] = [
    "d",
    "theta",
    "nu",
    "effect",
    "algorithm",
    "k",
    "lambda",
    "replicates",
    "mean_estimate",
    "ate_target",
    "percent_bias",
    "mc_se",
];

impl BiasReport {
    pub fn find(&self, d: usize, theta: f64, nu: f64, effect: Effect, algorithm: Algorithm) -> Option<&BiasRow> {
        self.rows.iter().find(|r| {
            r.d == d && r.theta == theta && r.nu == nu && r.effect == effect && r.algorithm == algorithm
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(BIAS_CSV_HEADER)?;
        for r in &self.rows {
            let (k, lambda) = match r.algorithm {
                Algorithm::Mopt => (String::new(), String::new()),
                Algorithm::Template { k, lambda } => (k.to_string(), lambda.to_string()),
            };
            w.write_record([
                r.d.to_string(),
                r.theta.to_string(),
                r.nu.to_string(),
                r.effect.to_string(),
                r.algorithm.name().to_string(),
                k,
                lambda,
                r.replicates.to_string(),
                r.mean_estimate.to_string(),
                r.ate_target.to_string(),
                r.percent_bias.to_string(),
                r.mc_se.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn summarize(cfg: &SimConfig, algorithm: Algorithm, estimates: &[Option<f64>]) -> BiasRow {
    let ok: Vec<f64> = estimates.iter().flatten().copied().collect();
    let n = ok.len();
    let target = ate_target(cfg.effect);
    let mean = if n > 0 { ok.iter().sum::<f64>() / n as f64 } else { f64::NAN };
    let sd = if n > 1 {
        (ok.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    BiasRow {
        d: cfg.d,
        theta: cfg.theta,
        nu: cfg.nu,
        effect: cfg.effect,
        algorithm,
        replicates: n,
        failures: estimates.len() - n,
        mean_estimate: mean,
        ate_target: target,
        percent_bias: 100.0 * (mean - target) / target,
        mc_se: 100.0 * sd / (n as f64).sqrt() / target,
    }
}

/// Runs one cell; replicates may execute in parallel, results are gathered in
/// replicate order so the report does not depend on scheduling.
pub fn run_cell(cfg: &SimConfig) -> Result<Vec<BiasRow>> {
    cfg.validate()?;
    let per_replicate: Vec<Vec<Option<f64>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| run_replicate(cfg, rep))
        .collect::<Result<_>>()?;
    Ok(cfg
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, &alg)| {
            let column: Vec<Option<f64>> = per_replicate.iter().map(|row| row[a]).collect();
            summarize(cfg, alg, &column)
        })
        .collect())
}

/// Runs every cell of the grid; rows are ordered by cell, then algorithm.
pub fn run_factorial(grid: &SimGrid) -> Result<BiasReport> {
    if grid.algorithms.is_empty() {
        return Err(Error::spec("no algorithms configured"));
    }
    let mut rows = Vec::new();
    for cell in grid.cells() {
        rows.extend(run_cell(&cell)?);
    }
    Ok(BiasReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ate_targets() {
        assert_eq!(ate_target(Effect::Constant), 2.0);
        assert_eq!(ate_target(Effect::Mild), 1.95);
        assert_eq!(ate_target(Effect::Strong), 1.75);
    }

    #[test]
    fn algorithm_parsing() {
        assert_eq!("mopt".parse::<Algorithm>().unwrap(), Algorithm::Mopt);
        assert_eq!(
            "template(2/0.01)".parse::<Algorithm>().unwrap(),
            Algorithm::Template { k: 2, lambda: 0.01 }
        );
        assert!("greedy".parse::<Algorithm>().is_err());
        assert_eq!(Algorithm::standard_set().len(), 7);
    }

    #[test]
    fn seeds_differ_per_replicate() {
        assert_ne!(replicate_seed(1, 0), replicate_seed(1, 1));
        assert_eq!(replicate_seed(7, 3), replicate_seed(7, 3));
    }

    #[test]
    fn empty_algorithm_list_rejected() {
        let grid = SimGrid {
            algorithms: vec![],
            ..SimGrid::default()
        };
        assert!(run_factorial(&grid).unwrap_err().to_string().contains("no algorithms configured"));
    }

    #[test]
    fn constant_effect_is_exactly_two_per_unit() {
        let mut cfg = SimConfig::new(10, 0.5, 0.1, Effect::Constant);
        cfg.sizes = Sizes {
            template: 20,
            treated: 40,
            control: 60,
        };
        let pop = generate_population(&cfg, 0).unwrap();
        assert!(pop.y0.iter().zip(&pop.y1).all(|(a, b)| b - a == 2.0 || (b - a - 2.0).abs() < 1e-12));
    }
}

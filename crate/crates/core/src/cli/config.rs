//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::simlab::{Algorithm, Effect, MatchSettings, SimGrid, Sizes};
use crate::statdist::{Caliper, CaliperMode};
use crate::templatematch::{
    DistanceKinds, FineBalance, ForcedInclusion, PairDistance, TemplateDistance, TemplateMatchSpec, DEFAULT_COST_SCALE,
};

/// Parsed `key = value` pairs. Lines starting with `#` are comments; list
/// values are comma-separated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(parse_err("empty key".into()));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(parse_err(format!("duplicate key `{key}`")));
            }
        }
        Ok(ConfigMap { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::spec(format!("override `{assignment}` is not key=value")))?;
        self.set(key.trim(), value.trim());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
            .unwrap_or_default()
    }

    pub fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::spec(format!("bad value `{v}` for `{key}`"))),
        }
    }

    pub fn values<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        if self.get(key).is_none() {
            return Ok(None);
        }
        self.list(key)
            .iter()
            .map(|v| v.parse().map_err(|_| Error::spec(format!("bad value `{v}` in `{key}`"))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::spec(format!("unknown configuration key `{k}`"))),
            None => Ok(()),
        }
    }
}

pub const MATCH_KEYS: &[&str] = &[
    "units",
    "id_column",
    "role_column",
    "shared",
    "extended",
    "categorical",
    "k",
    "lambda",
    "template_distance",
    "pair_distance",
    "caliper",
    "caliper_mode",
    "caliper_penalty",
    "template_caliper",
    "sparsify",
    "exact",
    "fine_balance_column",
    "fine_balance_targets",
    "fine_balance_penalty",
    "forced",
    "forced_penalty",
    "cost_scale",
    "compact_template_layer",
    "output",
];

pub const SIMULATE_KEYS: &[&str] = &[
    "d",
    "theta",
    "nu",
    "effect",
    "replicates",
    "seed",
    "algorithms",
    "template_size",
    "treated_size",
    "control_size",
    "caliper",
    "sparsify",
    "output",
];

/// Fine-balance targets: explicit `category:count` pairs, or `template` to
/// use `k` times the template's category counts.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Explicit(Vec<(String, i64)>),
    FromTemplate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineBalanceConfig {
    pub column: String,
    pub targets: TargetSpec,
    pub penalty: f64,
}

/// Settings of the `match`, `balance` and `dump-network` commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub units: Option<PathBuf>,
    pub id_column: String,
    pub role_column: String,
    pub shared: Vec<String>,
    pub extended: Vec<String>,
    /// String-valued columns; exact and fine-balance columns are added.
    pub categorical: Vec<String>,
    pub k: usize,
    pub lambda: f64,
    pub kinds: DistanceKinds,
    pub caliper: Option<Caliper>,
    pub template_caliper: Option<Caliper>,
    pub sparsify: usize,
    pub exact: Vec<String>,
    pub fine_balance: Option<FineBalanceConfig>,
    pub forced: Vec<String>,
    pub forced_penalty: f64,
    pub cost_scale: i64,
    pub compact_template_layer: bool,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            units: None,
            id_column: "id".into(),
            role_column: "role".into(),
            shared: Vec::new(),
            extended: Vec::new(),
            categorical: Vec::new(),
            k: 1,
            lambda: 100.0,
            kinds: DistanceKinds::default(),
            caliper: Some(Caliper::hard(0.05)),
            template_caliper: None,
            sparsify: 0,
            exact: Vec::new(),
            fine_balance: None,
            forced: Vec::new(),
            forced_penalty: 1000.0,
            cost_scale: DEFAULT_COST_SCALE,
            compact_template_layer: false,
            output: PathBuf::from("repmatch-out"),
        }
    }
}

fn parse_targets(value: &str) -> Result<TargetSpec> {
    if value.trim() == "template" {
        return Ok(TargetSpec::FromTemplate);
    }
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (name, count) = item
                .rsplit_once(':')
                .ok_or_else(|| Error::spec(format!("fine-balance target `{item}` is not category:count")))?;
            let count = count
                .trim()
                .parse()
                .map_err(|_| Error::spec(format!("bad count in fine-balance target `{item}`")))?;
            Ok((name.trim().to_string(), count))
        })
        .collect::<Result<_>>()
        .map(TargetSpec::Explicit)
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        map.check_keys(MATCH_KEYS)?;
        let mut cfg = RunConfig::default();
        cfg.units = map.get("units").map(PathBuf::from);
        if let Some(v) = map.get("id_column") {
            cfg.id_column = v.to_string();
        }
        if let Some(v) = map.get("role_column") {
            cfg.role_column = v.to_string();
        }
        cfg.shared = map.list("shared");
        cfg.extended = map.list("extended");
        cfg.categorical = map.list("categorical");
        cfg.k = map.value("k")?.unwrap_or(cfg.k);
        cfg.lambda = map.value("lambda")?.unwrap_or(cfg.lambda);
        if let Some(v) = map.get("template_distance") {
            cfg.kinds.template = v.parse::<TemplateDistance>()?;
        }
        if let Some(v) = map.get("pair_distance") {
            cfg.kinds.pair = v.parse::<PairDistance>()?;
        }
        let mode: CaliperMode = match map.get("caliper_mode") {
            Some(v) => v.parse()?,
            None => CaliperMode::Hard,
        };
        let penalty: f64 = map.value("caliper_penalty")?.unwrap_or(1000.0);
        cfg.caliper = match map.get("caliper") {
            Some("none") => None,
            Some(_) => {
                let width: f64 = map.value("caliper")?.expect("present");
                Some(match mode {
                    CaliperMode::Hard => Caliper::hard(width),
                    CaliperMode::Penalty => Caliper::penalty(width, penalty),
                })
            }
            None => cfg.caliper.map(|c| match mode {
                CaliperMode::Hard => c,
                CaliperMode::Penalty => Caliper::penalty(c.width, penalty),
            }),
        };
        cfg.template_caliper = map.value::<f64>("template_caliper")?.map(Caliper::hard);
        cfg.sparsify = map.value("sparsify")?.unwrap_or(0);
        cfg.exact = map.list("exact");
        if let Some(column) = map.get("fine_balance_column") {
            let targets = map
                .get("fine_balance_targets")
                .ok_or_else(|| Error::spec("fine_balance_column needs fine_balance_targets"))?;
            cfg.fine_balance = Some(FineBalanceConfig {
                column: column.to_string(),
                targets: parse_targets(targets)?,
                penalty: map.value("fine_balance_penalty")?.unwrap_or(1000.0),
            });
        } else if map.get("fine_balance_targets").is_some() {
            return Err(Error::spec("fine_balance_targets needs fine_balance_column"));
        }
        cfg.forced = map.list("forced");
        cfg.forced_penalty = map.value("forced_penalty")?.unwrap_or(cfg.forced_penalty);
        cfg.cost_scale = map.value("cost_scale")?.unwrap_or(cfg.cost_scale);
        cfg.compact_template_layer = map.value("compact_template_layer")?.unwrap_or(false);
        if let Some(v) = map.get("output") {
            cfg.output = PathBuf::from(v);
        }
        for column in cfg.exact.iter().chain(cfg.fine_balance.as_ref().map(|f| &f.column)) {
            if !cfg.categorical.contains(column) {
                cfg.categorical.push(column.clone());
            }
        }
        Ok(cfg)
    }

    /// The template-match design. Fine-balance targets taken from the
    /// template need the loaded template categories.
    pub fn spec(&self, template_categories: Option<&[String]>) -> Result<TemplateMatchSpec> {
        let fine_balance = match &self.fine_balance {
            None => None,
            Some(fb) => {
                let targets = match &fb.targets {
                    TargetSpec::Explicit(t) => t.clone(),
                    TargetSpec::FromTemplate => {
                        let cats = template_categories
                            .ok_or_else(|| Error::spec("template fine-balance targets need template categories"))?;
                        let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
                        for c in cats {
                            *counts.entry(c.as_str()).or_default() += self.k as i64;
                        }
                        counts.into_iter().map(|(c, n)| (c.to_string(), n)).collect()
                    }
                };
                Some(FineBalance {
                    column: fb.column.clone(),
                    targets,
                    overflow_penalty: fb.penalty,
                })
            }
        };
        let forced = if self.forced.is_empty() {
            None
        } else {
            Some(ForcedInclusion {
                treated_ids: self.forced.clone(),
                penalty: self.forced_penalty,
            })
        };
        Ok(TemplateMatchSpec {
            k: self.k,
            lambda: self.lambda,
            cost_scale: self.cost_scale,
            exact_columns: self.exact.clone(),
            fine_balance,
            sparsify: self.sparsify,
            forced,
            template_caliper: self.template_caliper,
            pair_caliper: self.caliper,
            compact_template_layer: self.compact_template_layer,
        })
    }
}

/// Simulation grid from `key = value` settings; absent keys keep the
/// defaults of [`SimGrid`].
pub fn grid_from_map(map: &ConfigMap) -> Result<SimGrid> {
    map.check_keys(SIMULATE_KEYS)?;
    let mut grid = SimGrid::default();
    if let Some(v) = map.values("d")? {
        grid.ds = v;
    }
    if let Some(v) = map.values("theta")? {
        grid.thetas = v;
    }
    if let Some(v) = map.values("nu")? {
        grid.nus = v;
    }
    if let Some(v) = map.values::<Effect>("effect")? {
        grid.effects = v;
    }
    if let Some(v) = map.values::<Algorithm>("algorithms")? {
        grid.algorithms = v;
    }
    grid.replicates = map.value("replicates")?.unwrap_or(grid.replicates);
    grid.master_seed = map.value("seed")?.unwrap_or(grid.master_seed);
    let d = Sizes::default();
    grid.sizes = Sizes {
        template: map.value("template_size")?.unwrap_or(d.template),
        treated: map.value("treated_size")?.unwrap_or(d.treated),
        control: map.value("control_size")?.unwrap_or(d.control),
    };
    let s = MatchSettings::default();
    grid.settings = MatchSettings {
        caliper: map.value("caliper")?.unwrap_or(s.caliper),
        sparsify: map.value("sparsify")?.unwrap_or(s.sparsify),
    };
    if grid.ds.is_empty() || grid.thetas.is_empty() || grid.nus.is_empty() || grid.effects.is_empty() {
        return Err(Error::spec("every grid factor needs at least one level"));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_overrides() {
        let mut m = ConfigMap::parse("# c\nshared = X1, X2\n\nk = 2\n", "cfg").unwrap();
        assert_eq!(m.list("shared"), vec!["X1", "X2"]);
        m.apply_override("k=3").unwrap();
        assert_eq!(m.value::<usize>("k").unwrap(), Some(3));
        let err = ConfigMap::parse("k = 1\nnonsense\n", "cfg").unwrap_err().to_string();
        assert!(err.starts_with("cfg:2:"), "{err}");
    }

    #[test]
    fn defaults_and_unknown_keys() {
        let cfg = RunConfig::from_map(&ConfigMap::default()).unwrap();
        assert_eq!(cfg.lambda, 100.0);
        assert_eq!(cfg.caliper, Some(Caliper::hard(0.05)));
        let m = ConfigMap::parse("lamda = 3", "cfg").unwrap();
        assert!(RunConfig::from_map(&m).is_err());
    }

    #[test]
    fn template_targets() {
        let m = ConfigMap::parse("k = 2\nfine_balance_column = site\nfine_balance_targets = template", "c").unwrap();
        let cfg = RunConfig::from_map(&m).unwrap();
        assert_eq!(cfg.categorical, vec!["site"]);
        let spec = cfg.spec(Some(&["b".into(), "a".into(), "b".into()])).unwrap();
        assert_eq!(spec.fine_balance.unwrap().targets, vec![("a".into(), 2), ("b".into(), 4)]);
    }

    #[test]
    fn empty_algorithm_list_is_kept() {
        let m = ConfigMap::parse("algorithms =", "c").unwrap();
        assert!(grid_from_map(&m).unwrap().algorithms.is_empty());
    }
}

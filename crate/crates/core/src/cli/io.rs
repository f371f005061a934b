//! CSV and text formats.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::statdist::{smd, CovariateTable, Role};
use crate::templatematch::MatchedSample;

fn parse_err(path: &Path, line: u64, message: String) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: line as usize,
        message,
    }
}

fn is_missing(v: &str) -> bool {
    v.is_empty() || v.eq_ignore_ascii_case("na")
}

/// Reads a cohort file: one row per unit with an id, a role in
/// `{template, treated, control}`, the configured numeric covariates and any
/// categorical columns. Template rows may leave extended covariates and
/// categorical values empty (or `NA`).
pub fn load_units_csv(path: &Path, cfg: &RunConfig) -> Result<CovariateTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, 1, format!("missing column `{name}`")))
    };
    if cfg.shared.is_empty() {
        return Err(Error::spec("no shared covariates configured"));
    }
    let id_col = column(&cfg.id_column)?;
    let role_col = column(&cfg.role_column)?;
    let shared_cols = cfg.shared.iter().map(|n| column(n)).collect::<Result<Vec<_>>>()?;
    let extended_cols = cfg.extended.iter().map(|n| column(n)).collect::<Result<Vec<_>>>()?;
    let cat_cols = cfg.categorical.iter().map(|n| column(n)).collect::<Result<Vec<_>>>()?;

    let mut ids = Vec::new();
    let mut roles = Vec::new();
    let mut shared = Vec::new();
    let mut extended = Vec::new();
    let mut cats: Vec<Vec<String>> = vec![Vec::new(); cat_cols.len()];
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let role: Role = field(role_col)
            .parse()
            .map_err(|_| parse_err(path, line, format!("unknown role `{}`", field(role_col))))?;
        let id = field(id_col);
        if id.is_empty() {
            return Err(parse_err(path, line, format!("missing value for `{}`", cfg.id_column)));
        }
        let numeric = |i: usize, name: &str, optional: bool| -> Result<f64> {
            let v = field(i);
            if is_missing(v) {
                return if optional {
                    Ok(f64::NAN)
                } else {
                    Err(parse_err(path, line, format!("missing value for `{name}`")))
                };
            }
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("bad number `{v}` for `{name}`")))
        };
        for (&i, name) in shared_cols.iter().zip(&cfg.shared) {
            shared.push(numeric(i, name, false)?);
        }
        for (&i, name) in extended_cols.iter().zip(&cfg.extended) {
            extended.push(numeric(i, name, role == Role::Template)?);
        }
        for ((&i, name), out) in cat_cols.iter().zip(&cfg.categorical).zip(&mut cats) {
            let v = field(i);
            if v.is_empty() && role != Role::Template {
                return Err(parse_err(path, line, format!("missing value for `{name}`")));
            }
            out.push(v.to_string());
        }
        ids.push(id.to_string());
        roles.push(role);
    }
    let n = ids.len();
    let table = CovariateTable::new(
        ids,
        roles,
        cfg.shared.clone(),
        DMatrix::from_row_slice(n, cfg.shared.len(), &shared),
        cfg.extended.clone(),
        DMatrix::from_row_slice(n, cfg.extended.len(), &extended),
    )?;
    cfg.categorical
        .iter()
        .zip(cats)
        .try_fold(table, |t, (name, values)| t.with_categorical(name.clone(), values))
}

/// One row of `pairs.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub pair_index: usize,
    pub treated_id: String,
    pub control_id: String,
    pub template_id: Option<String>,
}

pub const PAIRS_HEADER: [&str; 4] = ["pair_index", "treated_id", "control_id", "template_id"];

pub fn pair_records(sample: &MatchedSample, table: &CovariateTable) -> Vec<PairRecord> {
    sample
        .id_pairs(table)
        .into_iter()
        .enumerate()
        .map(|(i, (t, c, r))| PairRecord {
            pair_index: i + 1,
            treated_id: t.to_string(),
            control_id: c.to_string(),
            template_id: r.map(str::to_string),
        })
        .collect()
}

pub fn write_pairs_csv(path: &Path, records: &[PairRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(PAIRS_HEADER)?;
    for r in records {
        w.write_record([
            r.pair_index.to_string().as_str(),
            &r.treated_id,
            &r.control_id,
            r.template_id.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs_csv(path: &Path) -> Result<Vec<PairRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, 1, format!("missing column `{name}`")))
    };
    let (pi, ti, ci) = (col("pair_index")?, col("treated_id")?, col("control_id")?);
    let ri = headers.iter().position(|h| h == "template_id");
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |i: usize| record.get(i).unwrap_or("").to_string();
        let pair_index = get(pi)
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad pair_index `{}`", get(pi))))?;
        out.push(PairRecord {
            pair_index,
            treated_id: get(ti),
            control_id: get(ci),
            template_id: ri.map(get).filter(|s| !s.is_empty()),
        });
    }
    Ok(out)
}

/// Resolves pair ids to table rows, rejecting dangling, repeated or
/// wrong-role ids.
pub fn resolve_pairs(records: &[PairRecord], table: &CovariateTable) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut seen = std::collections::HashSet::new();
    let mut lookup = |id: &str, role: Role| {
        let unit = table.index_of(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
        if table.role(unit) != role {
            return Err(Error::data(format!("unit `{id}` is not a {} unit", role.as_str())));
        }
        if !seen.insert(unit) {
            return Err(Error::data(format!("unit `{id}` appears in more than one pair")));
        }
        Ok(unit)
    };
    let mut treated = Vec::with_capacity(records.len());
    let mut controls = Vec::with_capacity(records.len());
    for r in records {
        treated.push(lookup(&r.treated_id, Role::Treated)?);
        controls.push(lookup(&r.control_id, Role::Control)?);
    }
    if treated.is_empty() {
        return Err(Error::data("no pairs"));
    }
    Ok((treated, controls))
}

/// One covariate of the balance table.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRow {
    pub covariate: String,
    pub template_mean: Option<f64>,
    pub treated_mean: f64,
    pub control_mean: f64,
    /// All treated against all controls.
    pub smd_before: f64,
    pub matched_treated_mean: f64,
    pub matched_control_mean: f64,
    /// Matched treated against matched controls.
    pub smd_after: f64,
    /// Matched treated against the template; shared covariates only.
    pub smd_template: Option<f64>,
}

pub const BALANCE_HEADER: [&str; 9] = [
    "covariate",
    "template_mean",
    "treated_mean",
    "control_mean",
    "smd_before",
    "matched_treated_mean",
    "matched_control_mean",
    "smd_after",
    "smd_template",
];

pub fn balance_table(table: &CovariateTable, matched_treated: &[usize], matched_controls: &[usize]) -> Result<Vec<BalanceRow>> {
    let treated = table.units(Role::Treated);
    let controls = table.units(Role::Control);
    let templates = table.units(Role::Template);
    let shared = table.shared_names();
    table
        .covariate_names()
        .into_iter()
        .map(|name| {
            let before = smd(&name, &table.numeric_values(&name, treated)?, &table.numeric_values(&name, controls)?)?;
            let mt = table.numeric_values(&name, matched_treated)?;
            let after = smd(&name, &mt, &table.numeric_values(&name, matched_controls)?)?;
            let vs_template = if shared.contains(&name) && !templates.is_empty() {
                Some(smd(&name, &mt, &table.numeric_values(&name, templates)?)?)
            } else {
                None
            };
            Ok(BalanceRow {
                template_mean: vs_template.as_ref().map(|r| r.mean_b),
                treated_mean: before.mean_a,
                control_mean: before.mean_b,
                smd_before: before.smd,
                matched_treated_mean: after.mean_a,
                matched_control_mean: after.mean_b,
                smd_after: after.smd,
                smd_template: vs_template.map(|r| r.smd),
                covariate: name,
            })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_balance_csv(path: &Path, rows: &[BalanceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BALANCE_HEADER)?;
    for r in rows {
        w.write_record([
            r.covariate.clone(),
            opt(r.template_mean),
            r.treated_mean.to_string(),
            r.control_mean.to_string(),
            r.smd_before.to_string(),
            r.matched_treated_mean.to_string(),
            r.matched_control_mean.to_string(),
            r.smd_after.to_string(),
            opt(r.smd_template),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, sample: &MatchedSample, k: usize) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "k = {k}")?;
    writeln!(f, "lambda = {}", sample.lambda)?;
    writeln!(f, "feasible = {}", sample.feasible)?;
    writeln!(f, "pairs = {}", sample.pairs.len())?;
    if sample.feasible {
        writeln!(f, "s1 = {}", sample.s1_template_cost)?;
        writeln!(f, "s2 = {}", sample.s2_pairing_cost)?;
        writeln!(f, "penalty = {}", sample.penalty_cost)?;
        writeln!(f, "objective = {}", sample.objective)?;
    }
    if let Some(diag) = &sample.infeasibility {
        writeln!(f, "infeasible_layer = {}", diag.layer)?;
        writeln!(f, "diagnostic = {diag}")?;
    }
    for w in &sample.warnings {
        writeln!(f, "warning = {w}")?;
    }
    Ok(())
}

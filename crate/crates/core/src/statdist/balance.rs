use super::table::CovariateTable;
use crate::error::{Error, Result};

/// Conventional threshold for an acceptably balanced covariate.
pub const SMD_BALANCE_BAR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRecord {
    pub name: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub pooled_sd: f64,
    pub smd: f64,
    /// Zero pooled SD with unequal means; `smd` is then an infinity of the
    /// sign of the mean gap.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub group_a: String,
    pub group_b: String,
    pub records: Vec<BalanceRecord>,
}

impl BalanceReport {
    pub fn record(&self, name: &str) -> Option<&BalanceRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn mean_abs_smd(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.smd.abs()).sum::<f64>() / self.records.len() as f64
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Standardized mean difference `(mean_a - mean_b) / sqrt((var_a + var_b) / 2)`
/// with unbiased group variances.
pub fn smd(name: &str, a: &[f64], b: &[f64]) -> Result<BalanceRecord> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::data("standardized mean difference needs non-empty groups"));
    }
    let (mean_a, var_a) = mean_var(a);
    let (mean_b, var_b) = mean_var(b);
    let pooled_sd = ((var_a + var_b) / 2.0).sqrt();
    let gap = mean_a - mean_b;
    let (smd, degenerate) = if pooled_sd > 0.0 {
        (gap / pooled_sd, false)
    } else if gap == 0.0 {
        (0.0, false)
    } else {
        (gap.signum() * f64::INFINITY, true)
    };
    Ok(BalanceRecord {
        name: name.to_string(),
        mean_a,
        mean_b,
        pooled_sd,
        smd,
        degenerate,
    })
}

/// Per-covariate SMDs between two groups of units (table row indices).
pub fn standardized_mean_differences(
    table: &CovariateTable,
    group_a: &[usize],
    group_b: &[usize],
    covariates: &[String],
) -> Result<BalanceReport> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::data("balance groups must be non-empty"));
    }
    let records = covariates
        .iter()
        .map(|name| {
            let a = table.numeric_values(name, group_a)?;
            let b = table.numeric_values(name, group_b)?;
            smd(name, &a, &b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BalanceReport {
        group_a: "a".into(),
        group_b: "b".into(),
        records,
    })
}

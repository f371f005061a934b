use super::distance::CostMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaliperMode {
    /// Entries outside the caliper are removed.
    Hard,
    /// Entries outside the caliper pay `penalty_weight * (gap - width)`.
    Penalty,
}

impl std::str::FromStr for CaliperMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hard" => Ok(CaliperMode::Hard),
            "penalty" => Ok(CaliperMode::Penalty),
            other => Err(Error::spec(format!("unknown caliper mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Caliper {
    pub width: f64,
    pub mode: CaliperMode,
    pub penalty_weight: f64,
}

impl Caliper {
    pub fn hard(width: f64) -> Self {
        Caliper {
            width,
            mode: CaliperMode::Hard,
            penalty_weight: 0.0,
        }
    }

    pub fn penalty(width: f64, penalty_weight: f64) -> Self {
        Caliper {
            width,
            mode: CaliperMode::Penalty,
            penalty_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaliperOutcome {
    pub matrix: CostMatrix,
    /// Rows left without any entry (hard mode only). Non-empty means some
    /// unit cannot be matched at all.
    pub empty_rows: Vec<usize>,
}

impl CaliperOutcome {
    pub fn warning(&self, what: &str) -> Option<String> {
        if self.empty_rows.is_empty() {
            return None;
        }
        Some(format!(
            "caliper leaves {} {what} row(s) without any edge: {:?}",
            self.empty_rows.len(),
            self.empty_rows
        ))
    }
}

/// Restricts `distances` to pairs whose scores differ by at most `caliper.width`.
pub fn apply_caliper(
    distances: &CostMatrix,
    score_a: &[f64],
    score_b: &[f64],
    caliper: Caliper,
) -> Result<CaliperOutcome> {
    if !(caliper.width > 0.0) {
        return Err(Error::spec(format!("caliper width {} must be > 0", caliper.width)));
    }
    if score_a.len() != distances.rows() || score_b.len() != distances.cols() {
        return Err(Error::dim(format!(
            "scores ({}, {}) do not match a {}x{} matrix",
            score_a.len(),
            score_b.len(),
            distances.rows(),
            distances.cols()
        )));
    }
    let mut matrix = distances.clone();
    match caliper.mode {
        CaliperMode::Hard => {
            matrix.retain(|i, j, _| (score_a[i] - score_b[j]).abs() <= caliper.width);
        }
        CaliperMode::Penalty => {
            if !(caliper.penalty_weight >= 0.0) {
                return Err(Error::spec("penalty weight must be >= 0"));
            }
            matrix.map_values(|i, j, v| {
                let gap = (score_a[i] - score_b[j]).abs();
                if gap > caliper.width {
                    v + caliper.penalty_weight * (gap - caliper.width)
                } else {
                    v
                }
            });
        }
    }
    let empty_rows = if caliper.mode == CaliperMode::Hard {
        matrix
            .empty_rows()
            .into_iter()
            .filter(|&i| !distances.row(i).is_empty())
            .collect()
    } else {
        Vec::new()
    };
    Ok(CaliperOutcome { matrix, empty_rows })
}

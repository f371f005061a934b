//! Propensity and participation score models.

use super::logistic::{fit_logistic, LogisticModel};
use super::table::{CovariateTable, Role};
use crate::error::Result;

pub const SCORE_MAX_ITER: usize = 100;
pub const SCORE_TOL: f64 = 1e-8;

/// Fitted propensity scores, treated units first, then controls (role order).
///
/// Treatment is regressed on shared and extended covariates.
pub fn propensity_scores(table: &CovariateTable) -> Result<Vec<f64>> {
    Ok(propensity_model(table)?.1)
}

pub fn propensity_model(table: &CovariateTable) -> Result<(LogisticModel, Vec<f64>)> {
    table.require_roles(&[Role::Treated, Role::Control])?;
    let units: Vec<usize> = table
        .units(Role::Treated)
        .iter()
        .chain(table.units(Role::Control))
        .copied()
        .collect();
    let features = table.full_matrix(&units);
    let labels: Vec<bool> = units.iter().map(|&u| table.role(u) == Role::Treated).collect();
    let model = fit_logistic(&features, &labels, SCORE_MAX_ITER, SCORE_TOL)?;
    let scores = model.predict(&features);
    Ok((model, scores))
}

/// Probability of belonging to the template rather than the treated group,
/// given shared covariates only. Template units first, then treated units.
pub fn participation_scores(table: &CovariateTable) -> Result<Vec<f64>> {
    Ok(participation_model(table)?.1)
}

pub fn participation_model(table: &CovariateTable) -> Result<(LogisticModel, Vec<f64>)> {
    table.require_roles(&[Role::Template, Role::Treated])?;
    let units: Vec<usize> = table
        .units(Role::Template)
        .iter()
        .chain(table.units(Role::Treated))
        .copied()
        .collect();
    let features = table.shared_matrix(&units);
    let labels: Vec<bool> = units.iter().map(|&u| table.role(u) == Role::Template).collect();
    let model = fit_logistic(&features, &labels, SCORE_MAX_ITER, SCORE_TOL)?;
    let scores = model.predict(&features);
    Ok((model, scores))
}

/// Both score vectors split by role.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub propensity_treated: Vec<f64>,
    pub propensity_control: Vec<f64>,
    pub participation_template: Vec<f64>,
    pub participation_treated: Vec<f64>,
}

impl ScoreSet {
    /// Fits the propensity model, and the participation model when the table
    /// has template units (otherwise those vectors stay empty).
    pub fn fit(table: &CovariateTable) -> Result<Self> {
        let t = table.count(Role::Treated);
        let r = table.count(Role::Template);
        let mut propensity = propensity_scores(table)?;
        let propensity_control = propensity.split_off(t);
        let (participation_template, participation_treated) = if r > 0 {
            let mut p = participation_scores(table)?;
            let treated = p.split_off(r);
            (p, treated)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(ScoreSet {
            propensity_treated: propensity,
            propensity_control,
            participation_template,
            participation_treated,
        })
    }
}

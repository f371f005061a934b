use std::str::FromStr;

use nalgebra::DMatrix;

use super::spec::TemplateMatchSpec;
use crate::error::{Error, Result};
use crate::statdist::{
    apply_caliper, CaliperMode, CostMatrix, CovariateTable, DistanceMatrices, MahalanobisMetric, Role, ScoreSet,
};

/// Template-to-treated distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemplateDistance {
    /// Absolute difference in participation score.
    #[default]
    ParticipationAbsDiff,
    /// Squared Mahalanobis distance on shared covariates.
    MahalanobisShared,
}

/// Treated-to-control distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairDistance {
    /// Squared rank-based Mahalanobis distance on all covariates.
    #[default]
    RobustMahalanobis,
    /// Squared Mahalanobis distance on all covariates.
    Mahalanobis,
    /// Absolute difference in propensity score.
    PropensityAbsDiff,
}

impl FromStr for TemplateDistance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "participation_abs_diff" => Ok(TemplateDistance::ParticipationAbsDiff),
            "mahalanobis_shared" => Ok(TemplateDistance::MahalanobisShared),
            other => Err(Error::spec(format!("unknown template distance `{other}`"))),
        }
    }
}

impl FromStr for PairDistance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "robust_mahalanobis" => Ok(PairDistance::RobustMahalanobis),
            "mahalanobis" => Ok(PairDistance::Mahalanobis),
            "propensity_abs_diff" => Ok(PairDistance::PropensityAbsDiff),
            other => Err(Error::spec(format!("unknown pair distance `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DistanceKinds {
    pub template: TemplateDistance,
    pub pair: PairDistance,
}

/// Indices of the `count` controls nearest to `score` among `candidates`,
/// ties broken by control index, returned in increasing index order.
pub(crate) fn nearest_by_score(score: f64, control_scores: &[f64], candidates: &mut Vec<usize>, count: usize) {
    if candidates.len() > count {
        let key = |&c: &usize| ((score - control_scores[c]).abs(), c);
        candidates.select_nth_unstable_by(count, |a, b| {
            let (ga, ia) = key(a);
            let (gb, ib) = key(b);
            ga.total_cmp(&gb).then(ia.cmp(&ib))
        });
        candidates.truncate(count);
    }
    candidates.sort_unstable();
}

/// Keeps, per treated row, the `count` present entries whose controls are
/// nearest in propensity score.
pub fn sparsify_pairs(matrix: &CostMatrix, treated_scores: &[f64], control_scores: &[f64], count: usize) -> Result<CostMatrix> {
    if treated_scores.len() != matrix.rows() || control_scores.len() != matrix.cols() {
        return Err(Error::dim("propensity scores do not match the treated-control matrix"));
    }
    if count == 0 {
        return Ok(matrix.clone());
    }
    let rows = (0..matrix.rows())
        .map(|t| {
            let row = matrix.row(t);
            let mut cols: Vec<usize> = row.iter().map(|&(c, _)| c).collect();
            nearest_by_score(treated_scores[t], control_scores, &mut cols, count);
            cols.into_iter().map(|c| (c, matrix.get(t, c).unwrap())).collect()
        })
        .collect();
    CostMatrix::from_rows(matrix.cols(), rows)
}

/// Removes every treated-control entry whose units disagree on any of
/// `columns`. Template-treated costs are untouched.
pub fn remove_exact_mismatch(dist: &DistanceMatrices, table: &CovariateTable, columns: &[String]) -> Result<DistanceMatrices> {
    let mut out = dist.clone();
    for column in columns {
        let treated = table.category_keys(column, table.units(Role::Treated))?;
        let control = table.category_keys(column, table.units(Role::Control))?;
        out.treated_control.retain(|t, c, _| treated[t] == control[c]);
    }
    Ok(out)
}

/// Distance matrices for a template match, with the calipers of `spec` applied.
///
/// When the pair caliper is hard, or `spec.sparsify` is set without exact
/// columns, only surviving treated-control entries are ever computed; the
/// result is identical to computing the dense matrix and filtering it.
pub fn compute_distances(
    table: &CovariateTable,
    scores: &ScoreSet,
    kinds: DistanceKinds,
    spec: &TemplateMatchSpec,
) -> Result<(DistanceMatrices, Vec<String>)> {
    table.require_roles(&[Role::Template, Role::Treated, Role::Control])?;
    let mut warnings = Vec::new();
    let templates = table.units(Role::Template);
    let treated = table.units(Role::Treated);
    let controls = table.units(Role::Control);
    let (r, t, c) = (templates.len(), treated.len(), controls.len());
    if scores.participation_template.len() != r
        || scores.participation_treated.len() != t
        || scores.propensity_treated.len() != t
        || scores.propensity_control.len() != c
    {
        return Err(Error::dim("score vectors do not match role counts"));
    }

    let template_treated = match kinds.template {
        TemplateDistance::ParticipationAbsDiff => CostMatrix::dense(r, t, |i, j| {
            (scores.participation_template[i] - scores.participation_treated[j]).abs()
        })?,
        TemplateDistance::MahalanobisShared => {
            let a = table.shared_matrix(templates);
            let b = table.shared_matrix(treated);
            let pooled: Vec<usize> = templates.iter().chain(treated).copied().collect();
            let metric = MahalanobisMetric::plain(&table.shared_matrix(&pooled))?;
            CostMatrix::from_dmatrix(&metric.matrix(&a, &b)?)?
        }
    };
    let template_treated = match spec.template_caliper {
        Some(cal) => {
            let out = apply_caliper(
                &template_treated,
                &scores.participation_template,
                &scores.participation_treated,
                cal,
            )?;
            warnings.extend(out.warning("template"));
            out.matrix
        }
        None => template_treated,
    };

    let pair_value = pair_metric(table, kinds.pair, scores)?;
    let hard = spec
        .pair_caliper
        .filter(|cal| cal.mode == CaliperMode::Hard)
        .map(|cal| cal.width);
    if let Some(w) = hard {
        if !(w > 0.0) {
            return Err(Error::spec(format!("caliper width {w} must be > 0")));
        }
    }
    let prefilter = if spec.exact_columns.is_empty() { spec.sparsify } else { 0 };
    let pt = &scores.propensity_treated;
    let pc = &scores.propensity_control;
    let mut rows = Vec::with_capacity(t);
    let mut emptied = Vec::new();
    for i in 0..t {
        let mut candidates: Vec<usize> = match hard {
            Some(w) => (0..c).filter(|&j| (pt[i] - pc[j]).abs() <= w).collect(),
            None => (0..c).collect(),
        };
        if candidates.is_empty() {
            emptied.push(i);
        }
        if prefilter > 0 {
            nearest_by_score(pt[i], pc, &mut candidates, prefilter);
        }
        rows.push(candidates.into_iter().map(|j| (j, pair_value(i, j))).collect());
    }
    let mut treated_control = CostMatrix::from_rows(c, rows)?;
    if !emptied.is_empty() {
        warnings.push(format!(
            "caliper leaves {} treated row(s) without any edge: {:?}",
            emptied.len(),
            emptied
        ));
    }
    if let Some(cal) = spec.pair_caliper.filter(|cal| cal.mode == CaliperMode::Penalty) {
        treated_control = apply_caliper(&treated_control, pt, pc, cal)?.matrix;
    }
    let mut dist = DistanceMatrices::new(template_treated, treated_control)?.with_propensity(pt.clone(), pc.clone())?;
    if kinds.template == TemplateDistance::ParticipationAbsDiff && spec.template_caliper.is_none() {
        dist = dist.with_line(scores.participation_template.clone(), scores.participation_treated.clone())?;
    }
    Ok((dist, warnings))
}

/// Treated-by-control distance evaluator for the given kind.
pub(crate) fn pair_metric<'a>(
    table: &CovariateTable,
    kind: PairDistance,
    scores: &'a ScoreSet,
) -> Result<Box<dyn Fn(usize, usize) -> f64 + 'a>> {
    let treated = table.units(Role::Treated);
    let controls = table.units(Role::Control);
    Ok(match kind {
        PairDistance::PropensityAbsDiff => {
            let pt = &scores.propensity_treated;
            let pc = &scores.propensity_control;
            Box::new(move |i, j| (pt[i] - pc[j]).abs())
        }
        PairDistance::RobustMahalanobis | PairDistance::Mahalanobis => {
            let a = table.full_matrix(treated);
            let b = table.full_matrix(controls);
            let pool = stack(&a, &b);
            let metric = if kind == PairDistance::RobustMahalanobis {
                MahalanobisMetric::robust(&pool)?
            } else {
                MahalanobisMetric::plain(&pool)?
            };
            let za = metric.embed(&a)?;
            let zb = metric.embed(&b)?;
            Box::new(move |i, j| za.distance(i, &zb, j))
        }
    })
}

pub(crate) fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    DMatrix::from_fn(na + nb, a.ncols(), |i, j| if i < na { a[(i, j)] } else { b[(i - na, j)] })
}

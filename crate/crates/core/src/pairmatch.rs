//! Optimal bipartite pair matching of treated units to controls.
//!
//! Also provides the full-cohort baseline used by the simulation: every
//! treated unit is matched on a robust Mahalanobis distance with a penalized
//! propensity caliper. It stands in for a match that first balances the
//! propensity-score distributions and then minimizes within-pair distances;
//! both target the effect on the whole treated group and ignore the template.

use crate::error::{Error, Result};
use crate::flownet::{solve_min_cost_flow, Arc, FlowNetwork};
use crate::statdist::{apply_caliper, Caliper, CostMatrix, CovariateTable, Role, ScoreSet};
use crate::templatematch::{
    nearest_by_score, pair_metric, scale_cost, Infeasibility, Layer, MatchedPair, MatchedSample, PairDistance,
    DEFAULT_COST_SCALE,
};

/// Penalty weight of the propensity caliper in [`match_baseline_mopt`].
pub const MOPT_PENALTY_WEIGHT: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteSpec {
    /// Treated x control costs; absent entries are forbidden pairs.
    pub distance: CostMatrix,
    pub pairs_requested: usize,
    pub cost_scale: i64,
}

impl BipartiteSpec {
    pub fn new(distance: CostMatrix, pairs_requested: usize) -> Result<Self> {
        if distance.rows() == 0 || distance.cols() == 0 {
            return Err(Error::spec("distance matrix is empty"));
        }
        if pairs_requested < 1 || pairs_requested > distance.rows() {
            return Err(Error::spec(format!(
                "pairs_requested = {pairs_requested} outside 1..={}",
                distance.rows()
            )));
        }
        Ok(BipartiteSpec {
            distance,
            pairs_requested,
            cost_scale: DEFAULT_COST_SCALE,
        })
    }

    /// Pairs every treated row.
    pub fn full(distance: CostMatrix) -> Result<Self> {
        let rows = distance.rows();
        Self::new(distance, rows)
    }
}

/// Minimum total distance matching of `pairs_requested` treated rows to
/// distinct controls. The returned sample has `s1 = 0` and `lambda = 1`.
pub fn match_optimal_pairs(spec: &BipartiteSpec) -> Result<MatchedSample> {
    let d = &spec.distance;
    let (t, c) = (d.rows(), d.cols());
    let source = 0;
    let sink = 1 + t + c;
    let mut arcs = Vec::with_capacity(t + d.present_count() + c);
    let mut values = Vec::with_capacity(d.present_count());
    for i in 0..t {
        arcs.push(Arc::new(source, 1 + i, 1, 0));
    }
    let first_pair_arc = arcs.len();
    for i in 0..t {
        for &(j, v) in d.row(i) {
            arcs.push(Arc::new(1 + i, 1 + t + j, 1, scale_cost(v, spec.cost_scale)?));
            values.push((i, j, v));
        }
    }
    for j in 0..c {
        arcs.push(Arc::new(1 + t + j, sink, 1, 0));
    }
    let net = FlowNetwork::new(sink + 1, arcs, source, sink, spec.pairs_requested as i64)?;
    let sol = solve_min_cost_flow(&net);
    if !sol.feasible {
        let diagnostic = Infeasibility {
            layer: Layer::TreatedToControl,
            required: net.supply(),
            max_flow: sol.max_flow,
            cut_template_side: 0,
            cut_control_side: sol.cut_arcs(&net).len(),
        };
        let mut warnings = Vec::new();
        let empty = d.empty_rows();
        if !empty.is_empty() {
            warnings.push(format!("{} treated row(s) have no allowed control: {:?}", empty.len(), empty));
        }
        return Ok(MatchedSample::infeasible(1.0, diagnostic, warnings));
    }
    let mut pairs = Vec::with_capacity(spec.pairs_requested);
    let mut total = 0.0;
    for (k, &(i, j, v)) in values.iter().enumerate() {
        if sol.flow[first_pair_arc + k] == 1 {
            pairs.push(MatchedPair {
                treated: i,
                control: j,
                template: None,
            });
            total += v;
        }
    }
    Ok(MatchedSample {
        pairs,
        s1_template_cost: 0.0,
        s2_pairing_cost: total,
        penalty_cost: 0.0,
        lambda: 1.0,
        objective: total,
        feasible: true,
        infeasibility: None,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoptOptions {
    pub caliper_width: f64,
    /// Arcs kept per treated unit, nearest in propensity. Zero is dense. When
    /// the sparse network cannot pair everyone the count doubles until it can.
    pub sparsify: usize,
}

/// Penalized-caliper robust Mahalanobis costs for every treated-control pair
/// (or the `sparsify` nearest in propensity).
pub fn mopt_distances(table: &CovariateTable, scores: &ScoreSet, options: MoptOptions) -> Result<CostMatrix> {
    let (t, c) = (table.count(Role::Treated), table.count(Role::Control));
    let metric = pair_metric(table, PairDistance::RobustMahalanobis, scores)?;
    let pt = &scores.propensity_treated;
    let pc = &scores.propensity_control;
    let rows = (0..t)
        .map(|i| {
            let mut cols: Vec<usize> = (0..c).collect();
            if options.sparsify > 0 {
                nearest_by_score(pt[i], pc, &mut cols, options.sparsify);
            }
            cols.into_iter().map(|j| (j, metric(i, j))).collect()
        })
        .collect();
    let raw = CostMatrix::from_rows(c, rows)?;
    let caliper = Caliper::penalty(options.caliper_width, MOPT_PENALTY_WEIGHT);
    Ok(apply_caliper(&raw, pt, pc, caliper)?.matrix)
}

/// Matches every treated unit to a distinct control on robust Mahalanobis
/// distance (all covariates) plus a propensity-caliper penalty of weight
/// [`MOPT_PENALTY_WEIGHT`].
pub fn match_baseline_mopt(table: &CovariateTable, caliper_width: f64) -> Result<MatchedSample> {
    let scores = ScoreSet::fit(table)?;
    match_baseline_mopt_with(
        table,
        &scores,
        MoptOptions {
            caliper_width,
            sparsify: 0,
        },
    )
}

pub fn match_baseline_mopt_with(table: &CovariateTable, scores: &ScoreSet, options: MoptOptions) -> Result<MatchedSample> {
    table.require_roles(&[Role::Treated, Role::Control])?;
    let (t, c) = (table.count(Role::Treated), table.count(Role::Control));
    if c < t {
        return Err(Error::spec(format!("{t} treated units but only {c} controls")));
    }
    let mut sparsify = options.sparsify;
    loop {
        let dist = mopt_distances(table, scores, MoptOptions { sparsify, ..options })?;
        let sample = match_optimal_pairs(&BipartiteSpec::full(dist)?)?;
        if sample.feasible {
            return Ok(sample);
        }
        if sparsify == 0 || sparsify >= c {
            return Err(Error::spec(format!(
                "full treated match infeasible: {}",
                sample.infeasibility.expect("diagnostic")
            )));
        }
        sparsify = (2 * sparsify).min(c);
    }
}

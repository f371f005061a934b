//! Template matching on the tripartite network.
//!
//! The usual pipeline: fit scores ([`ScoreSet::fit`]), compute distances
//! ([`compute_distances`]), build ([`build_template_network`]) and solve
//! ([`solve_template_match`]). [`match_to_template`] runs all four.

mod distances;
mod enumerate;
mod network;
mod solve;
mod spec;

pub use distances::{
    compute_distances, remove_exact_mismatch, sparsify_pairs, DistanceKinds, PairDistance, TemplateDistance,
};
pub use enumerate::{
    enumerate_matched_samples, matched_outcome_count, min_template_cost, CandidateSample, ENUMERATION_GUARD,
};
pub use network::{add_fine_balance_layer, build_template_network, ArcKind, NodeRole, TemplateNetwork};
pub use solve::{solve_template_match, Infeasibility, Layer, MatchedPair, MatchedSample};
pub use spec::{
    force_include, FineBalance, ForcedInclusion, TemplateMatchSpec, COST_OVERFLOW_BOUND, DEFAULT_COST_SCALE,
};

pub(crate) use distances::{nearest_by_score, pair_metric};
pub(crate) use network::scale_cost;

use crate::error::Result;
use crate::statdist::{CovariateTable, ScoreSet};

/// Scores, distances, network and solution in one call.
pub fn match_to_template(table: &CovariateTable, kinds: DistanceKinds, spec: &TemplateMatchSpec) -> Result<MatchedSample> {
    let scores = ScoreSet::fit(table)?;
    match_with_scores(table, &scores, kinds, spec)
}

/// [`match_to_template`] with precomputed scores.
pub fn match_with_scores(
    table: &CovariateTable,
    scores: &ScoreSet,
    kinds: DistanceKinds,
    spec: &TemplateMatchSpec,
) -> Result<MatchedSample> {
    let (dist, warnings) = compute_distances(table, scores, kinds, spec)?;
    let tn = build_template_network(table, &dist, spec)?;
    let mut sample = solve_template_match(&tn);
    for w in warnings {
        if !sample.warnings.contains(&w) {
            sample.warnings.push(w);
        }
    }
    Ok(sample)
}

//! Covariate data, score models, distances, calipers and balance statistics.

mod balance;
mod caliper;
mod distance;
mod logistic;
mod scores;
mod table;
mod wasserstein;

pub use balance::{smd, standardized_mean_differences, BalanceRecord, BalanceReport, SMD_BALANCE_BAR};
pub use caliper::{apply_caliper, Caliper, CaliperMode, CaliperOutcome};
pub use distance::{
    mahalanobis_matrix, robust_mahalanobis_matrix, sample_covariance, CostMatrix, DistanceMatrices, Embedding, LinePositions,
    MahalanobisMetric, PropensityPair, PINV_RELATIVE_CUTOFF,
};
pub use logistic::{
    fit_logistic, penalized_log_likelihood, score_residuals, sigmoid, LogisticModel, PROB_FLOOR,
    SEPARATION_RIDGE, SEPARATION_THRESHOLD,
};
pub use scores::{participation_model, participation_scores, propensity_model, propensity_scores, ScoreSet};
pub use table::{ColumnRef, CovariateTable, Role};
pub use wasserstein::wasserstein_1d;

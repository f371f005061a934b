use crate::error::{Error, Result};
use crate::statdist::Caliper;

/// Float costs are multiplied by this before rounding to integers.
pub const DEFAULT_COST_SCALE: i64 = 100_000;
/// Scaled costs times the flow value must stay below this bound.
pub const COST_OVERFLOW_BOUND: i128 = 1 << 62;

/// Near-fine balance on one nominal column of the controls.
#[derive(Debug, Clone, PartialEq)]
pub struct FineBalance {
    pub column: String,
    /// Target count per category; must sum to `k * R`.
    pub targets: Vec<(String, i64)>,
    /// Price per control beyond a category's target.
    pub overflow_penalty: f64,
}

/// Treated units that should be preferred: every treated unit *outside*
/// `treated_ids` pays `penalty` to enter the match.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedInclusion {
    pub treated_ids: Vec<String>,
    pub penalty: f64,
}

/// Design of one template match.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateMatchSpec {
    /// Matched pairs per template unit; the match has `k * R` pairs.
    pub k: usize,
    /// Weight on treated-to-control costs. Large values favour close pairs,
    /// small values favour resemblance to the template.
    pub lambda: f64,
    pub cost_scale: i64,
    /// Columns on which treated and control must agree exactly.
    pub exact_columns: Vec<String>,
    pub fine_balance: Option<FineBalance>,
    /// Keep only this many treated-to-control arcs per treated unit, to the
    /// controls nearest in propensity score. Zero keeps all.
    pub sparsify: usize,
    pub forced: Option<ForcedInclusion>,
    /// Caliper on the participation-score gap, template to treated.
    pub template_caliper: Option<Caliper>,
    /// Caliper on the propensity-score gap, treated to control.
    pub pair_caliper: Option<Caliper>,
    /// Replace the `R * T` template-treated arcs by a path through the sorted
    /// one-dimensional positions. Needs [`DistanceMatrices::line`]; the
    /// optimum is the same up to cost rounding.
    ///
    /// [`DistanceMatrices::line`]: crate::statdist::DistanceMatrices::line
    pub compact_template_layer: bool,
}

impl Default for TemplateMatchSpec {
    fn default() -> Self {
        TemplateMatchSpec {
            k: 1,
            lambda: 100.0,
            cost_scale: DEFAULT_COST_SCALE,
            exact_columns: Vec::new(),
            fine_balance: None,
            sparsify: 0,
            forced: None,
            template_caliper: None,
            pair_caliper: Some(Caliper::hard(0.05)),
            compact_template_layer: false,
        }
    }
}

impl TemplateMatchSpec {
    pub fn new(k: usize, lambda: f64) -> Self {
        TemplateMatchSpec {
            k,
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self, templates: usize, treated: usize) -> Result<()> {
        if templates == 0 {
            return Err(Error::spec("no template units"));
        }
        let k_max = treated / templates;
        if self.k < 1 || self.k > k_max {
            return Err(Error::spec(format!(
                "k = {} outside 1..={k_max} (floor(T/R) with T = {treated}, R = {templates})",
                self.k
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::spec(format!("lambda = {} must be positive", self.lambda)));
        }
        if self.cost_scale < 1 {
            return Err(Error::spec("cost_scale must be >= 1"));
        }
        if let Some(fb) = &self.fine_balance {
            let total: i64 = fb.targets.iter().map(|(_, n)| *n).sum();
            if total != (self.k * templates) as i64 {
                return Err(Error::spec(format!(
                    "fine-balance targets sum to {total}, expected k*R = {}",
                    self.k * templates
                )));
            }
        }
        Ok(())
    }

    pub fn pair_count(&self, templates: usize) -> usize {
        self.k * templates
    }
}

/// Returns `spec` with forced inclusion of `treated_ids`. An empty id list
/// clears any forcing.
pub fn force_include(spec: &TemplateMatchSpec, treated_ids: &[String], penalty: f64) -> Result<TemplateMatchSpec> {
    let mut out = spec.clone();
    if treated_ids.is_empty() {
        out.forced = None;
        return Ok(out);
    }
    if !(penalty > 0.0 && penalty.is_finite()) {
        return Err(Error::spec(format!("forced-inclusion penalty {penalty} must be positive")));
    }
    out.forced = Some(ForcedInclusion {
        treated_ids: treated_ids.to_vec(),
        penalty,
    });
    Ok(out)
}

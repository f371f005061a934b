use std::fmt;

use super::network::{ArcKind, NodeRole, TemplateNetwork};
use crate::flownet::solve_min_cost_flow;
use crate::statdist::{CovariateTable, LinePositions, Role};

/// One matched pair, as role-local indices (`treated` in `0..T`, etc.).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchedPair {
    pub treated: usize,
    pub control: usize,
    /// Template unit whose flow selected this treated unit.
    pub template: Option<usize>,
}

/// The part of the network that ran out of capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    TemplateToTreated,
    TreatedToControl,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::TemplateToTreated => "template->treated",
            Layer::TreatedToControl => "treated->control",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Infeasibility {
    pub layer: Layer,
    pub required: i64,
    pub max_flow: i64,
    /// Saturated arcs on the minimum cut, split by layer.
    pub cut_template_side: usize,
    pub cut_control_side: usize,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "infeasible: only {} of {} pairs can be formed; bottleneck in the {} layer \
             (min cut: {} template-side arcs, {} control-side arcs)",
            self.max_flow, self.required, self.layer, self.cut_template_side, self.cut_control_side
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSample {
    /// Pairs ordered by treated index.
    pub pairs: Vec<MatchedPair>,
    /// Sum of template-to-treated costs over used arcs.
    pub s1_template_cost: f64,
    /// Sum of treated-to-control costs over used arcs, without lambda.
    pub s2_pairing_cost: f64,
    /// Forced-inclusion and fine-balance overflow penalties paid.
    pub penalty_cost: f64,
    pub lambda: f64,
    /// `s1 + lambda * s2`.
    pub objective: f64,
    pub feasible: bool,
    pub infeasibility: Option<Infeasibility>,
    pub warnings: Vec<String>,
}

impl MatchedSample {
    pub(crate) fn infeasible(lambda: f64, diagnostic: Infeasibility, warnings: Vec<String>) -> Self {
        MatchedSample {
            pairs: Vec::new(),
            s1_template_cost: 0.0,
            s2_pairing_cost: 0.0,
            penalty_cost: 0.0,
            lambda,
            objective: 0.0,
            feasible: false,
            infeasibility: Some(diagnostic),
            warnings,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(template, treated)` role-local index pairs.
    pub fn template_assignment(&self) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .filter_map(|p| p.template.map(|r| (r, p.treated)))
            .collect()
    }

    pub fn treated_indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.treated).collect()
    }

    pub fn control_indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.control).collect()
    }

    /// Table row indices of matched treated units.
    pub fn treated_units(&self, table: &CovariateTable) -> Vec<usize> {
        let units = table.units(Role::Treated);
        self.pairs.iter().map(|p| units[p.treated]).collect()
    }

    /// Table row indices of matched controls.
    pub fn control_units(&self, table: &CovariateTable) -> Vec<usize> {
        let units = table.units(Role::Control);
        self.pairs.iter().map(|p| units[p.control]).collect()
    }

    /// `(treated_id, control_id, template_id)` triples.
    pub fn id_pairs<'a>(&self, table: &'a CovariateTable) -> Vec<(&'a str, &'a str, Option<&'a str>)> {
        let treated = table.units(Role::Treated);
        let controls = table.units(Role::Control);
        let templates = table.units(Role::Template);
        self.pairs
            .iter()
            .map(|p| {
                (
                    table.id(treated[p.treated]),
                    table.id(controls[p.control]),
                    p.template.map(|r| table.id(templates[r])),
                )
            })
            .collect()
    }
}

/// Sorted (monotone) assignment of template copies to the matched treated
/// units, optimal for absolute differences on a line. Returns its cost.
fn line_assignment(line: &LinePositions, k: usize, pairs: &[MatchedPair], template_of: &mut [Option<usize>]) -> f64 {
    let mut templates: Vec<usize> = (0..line.template.len()).flat_map(|r| std::iter::repeat_n(r, k)).collect();
    templates.sort_by(|&a, &b| line.template[a].total_cmp(&line.template[b]).then(a.cmp(&b)));
    let mut treated: Vec<usize> = pairs.iter().map(|p| p.treated).collect();
    treated.sort_by(|&a, &b| line.treated[a].total_cmp(&line.treated[b]).then(a.cmp(&b)));
    let mut total = 0.0;
    for (&r, &t) in templates.iter().zip(&treated) {
        template_of[t] = Some(r);
        total += (line.template[r] - line.treated[t]).abs();
    }
    total
}

/// Solves the network and reads off the matched sample.
///
/// `s1` and `s2` are summed from the unscaled float costs, so rounding only
/// affects which flow is chosen, not the reported objective.
pub fn solve_template_match(tn: &TemplateNetwork) -> MatchedSample {
    let sol = solve_min_cost_flow(&tn.net);
    if !sol.feasible {
        let mut deepest = 0u8;
        for (v, role) in tn.nodes.iter().enumerate() {
            if !sol.source_side[v] {
                continue;
            }
            let depth = match role {
                NodeRole::Source => 0,
                NodeRole::Template(_) | NodeRole::LinePoint(_) => 1,
                NodeRole::Treated(_) => 2,
                NodeRole::TreatedCopy(_) => 3,
                NodeRole::Control(_) => 4,
                NodeRole::Category(_) => 5,
                NodeRole::Sink => 6,
            };
            deepest = deepest.max(depth);
        }
        let (mut left, mut right) = (0, 0);
        for a in sol.cut_arcs(&tn.net) {
            match tn.arcs[a] {
                ArcKind::SourceTemplate(_)
                | ArcKind::TemplateTreated(..)
                | ArcKind::TemplateLine(_)
                | ArcKind::LineStep(..)
                | ArcKind::LineTreated(_)
                | ArcKind::TreatedInternal(_) => left += 1,
                _ => right += 1,
            }
        }
        let layer = if deepest >= 3 {
            Layer::TreatedToControl
        } else {
            Layer::TemplateToTreated
        };
        let diagnostic = Infeasibility {
            layer,
            required: tn.supply(),
            max_flow: sol.max_flow,
            cut_template_side: left,
            cut_control_side: right,
        };
        return MatchedSample::infeasible(tn.lambda, diagnostic, tn.warnings.clone());
    }

    let mut template_of = vec![None; tn.treated];
    let mut pairs = Vec::with_capacity(tn.supply() as usize);
    let (mut s1, mut s2, mut penalty) = (0.0, 0.0, 0.0);
    for (i, kind) in tn.arcs.iter().enumerate() {
        let f = sol.flow[i];
        if f == 0 {
            continue;
        }
        let value = tn.arc_values[i];
        match *kind {
            ArcKind::TemplateTreated(r, t) => {
                template_of[t] = Some(r);
                s1 += value;
            }
            ArcKind::TreatedControl(t, c) => {
                pairs.push(MatchedPair {
                    treated: t,
                    control: c,
                    template: None,
                });
                s2 += value;
            }
            ArcKind::TreatedInternal(_) | ArcKind::CategoryOverflow(_) => penalty += value * f as f64,
            _ => {}
        }
    }
    if let Some(line) = &tn.line {
        s1 = line_assignment(line, tn.k, &pairs, &mut template_of);
    }
    for p in &mut pairs {
        p.template = template_of[p.treated];
    }
    MatchedSample {
        pairs,
        s1_template_cost: s1,
        s2_pairing_cost: s2,
        penalty_cost: penalty,
        lambda: tn.lambda,
        objective: s1 + tn.lambda * s2,
        feasible: true,
        infeasibility: None,
        warnings: tn.warnings.clone(),
    }
}

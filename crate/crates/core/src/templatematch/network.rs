//! The tripartite network.
//!
//! ```text
//!  source -> template_r -> treated_t -> treated'_t -> control_c -> sink
//!           cap k         cap 1        cap 1         cap 1         cap 1
//!                         cost delta   cost 0        cost lambda*Delta
//! ```
//!
//! Treated units appear twice; the internal arc `treated_t -> treated'_t`
//! carries one unit exactly when `t` is in the match. With fine balance the
//! control arcs end in one node per category instead of the sink.

use std::collections::HashMap;

use super::distances::{remove_exact_mismatch, sparsify_pairs};
use super::spec::{TemplateMatchSpec, COST_OVERFLOW_BOUND};
use crate::error::{Error, Result};
use crate::flownet::{Arc, FlowNetwork, NodeId};
use crate::statdist::{CovariateTable, DistanceMatrices, LinePositions, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Source,
    Template(usize),
    Treated(usize),
    TreatedCopy(usize),
    Control(usize),
    Category(usize),
    /// Point `i` of the compact template layer.
    LinePoint(usize),
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArcKind {
    SourceTemplate(usize),
    TemplateTreated(usize, usize),
    TreatedInternal(usize),
    TreatedControl(usize, usize),
    ControlSink(usize),
    ControlCategory(usize, usize),
    CategoryTarget(usize),
    CategoryOverflow(usize),
    TemplateLine(usize),
    /// Step between line points `i` and `i + 1`; `true` walks upward.
    LineStep(usize, bool),
    LineTreated(usize),
}

impl ArcKind {
    pub fn code(self) -> u64 {
        match self {
            ArcKind::SourceTemplate(_) => 0,
            ArcKind::TemplateTreated(..) => 1,
            ArcKind::TreatedInternal(_) => 2,
            ArcKind::TreatedControl(..) => 3,
            ArcKind::ControlSink(_) => 4,
            ArcKind::ControlCategory(..) => 5,
            ArcKind::CategoryTarget(_) => 6,
            ArcKind::CategoryOverflow(_) => 7,
            ArcKind::TemplateLine(_) => 8,
            ArcKind::LineStep(..) => 9,
            ArcKind::LineTreated(_) => 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TemplateNetwork {
    pub net: FlowNetwork,
    /// Role of each node id.
    pub nodes: Vec<NodeRole>,
    /// Logical kind of each arc, in network arc order.
    pub arcs: Vec<ArcKind>,
    /// Unscaled cost behind each arc: delta for template-treated arcs,
    /// Delta (without lambda) for treated-control arcs, the unscaled penalty
    /// for forced-inclusion and overflow arcs, zero otherwise.
    pub arc_values: Vec<f64>,
    pub templates: usize,
    pub treated: usize,
    pub controls: usize,
    pub k: usize,
    pub lambda: f64,
    pub cost_scale: i64,
    pub categories: Vec<String>,
    /// Positions behind a compact template layer.
    pub line: Option<LinePositions>,
    pub warnings: Vec<String>,
}

pub(crate) fn scale_cost(value: f64, cost_scale: i64) -> Result<i64> {
    let scaled = (value * cost_scale as f64).round();
    if !scaled.is_finite() || scaled < 0.0 || scaled >= COST_OVERFLOW_BOUND as f64 {
        return Err(Error::spec(format!("cost {value} cannot be scaled to an integer")));
    }
    Ok(scaled as i64)
}

impl TemplateNetwork {
    pub fn source(&self) -> NodeId {
        0
    }

    pub fn template_node(&self, r: usize) -> NodeId {
        1 + r
    }

    pub fn treated_node(&self, t: usize) -> NodeId {
        1 + self.templates + t
    }

    pub fn treated_copy_node(&self, t: usize) -> NodeId {
        1 + self.templates + self.treated + t
    }

    pub fn control_node(&self, c: usize) -> NodeId {
        1 + self.templates + 2 * self.treated + c
    }

    pub fn sink(&self) -> NodeId {
        1 + self.templates + 2 * self.treated + self.controls
    }

    pub fn supply(&self) -> i64 {
        (self.k * self.templates) as i64
    }

    pub fn count_arcs(&self, pred: impl Fn(&ArcKind) -> bool) -> usize {
        self.arcs.iter().filter(|a| pred(a)).count()
    }

    fn check_overflow(&self) -> Result<()> {
        let max_cost = self.net.arcs().iter().map(|a| a.cost as i128).max().unwrap_or(0);
        if max_cost * self.supply() as i128 >= COST_OVERFLOW_BOUND {
            return Err(Error::spec(format!(
                "scaled costs overflow: max {max_cost} * flow {} >= 2^62; lower cost_scale",
                self.supply()
            )));
        }
        Ok(())
    }
}

/// Builds the tripartite network for `table` and `dist` under `spec`.
///
/// Treated-control arcs are filtered in this order: absent entries, exact
/// matching columns, then propensity sparsification. Float costs become
/// `round(cost_scale * value)`, with `lambda` applied to treated-control costs.
pub fn build_template_network(table: &CovariateTable, dist: &DistanceMatrices, spec: &TemplateMatchSpec) -> Result<TemplateNetwork> {
    let (r, t, c) = (
        table.count(Role::Template),
        table.count(Role::Treated),
        table.count(Role::Control),
    );
    if dist.sizes() != (r, t, c) {
        return Err(Error::dim(format!(
            "distance matrices are {:?}, table has (R, T, C) = ({r}, {t}, {c})",
            dist.sizes()
        )));
    }
    spec.validate(r, t)?;

    let mut pairs = remove_exact_mismatch(dist, table, &spec.exact_columns)?.treated_control;
    if spec.sparsify > 0 {
        let scores = dist
            .propensity
            .as_ref()
            .ok_or_else(|| Error::spec("sparsification needs propensity scores in the distance matrices"))?;
        pairs = sparsify_pairs(&pairs, &scores.treated, &scores.control, spec.sparsify)?;
    }

    let mut warnings = Vec::new();
    let delta = &dist.template_treated;
    for i in delta.empty_rows() {
        warnings.push(format!(
            "template unit `{}` has no treated edge",
            table.id(table.units(Role::Template)[i])
        ));
    }
    let stranded = pairs.empty_rows();
    if !stranded.is_empty() {
        let ids: Vec<&str> = stranded
            .iter()
            .map(|&i| table.id(table.units(Role::Treated)[i]))
            .collect();
        warnings.push(format!("{} treated unit(s) have no control edge: {:?}", ids.len(), ids));
    }

    let mut outside_penalty = None;
    let mut forced_set = vec![false; t];
    if let Some(forced) = &spec.forced {
        for id in &forced.treated_ids {
            let unit = table.index_of(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
            if table.role(unit) != Role::Treated {
                return Err(Error::spec(format!("forced unit `{id}` is not treated")));
            }
            let pos = table.units(Role::Treated).binary_search(&unit).expect("treated unit index");
            forced_set[pos] = true;
        }
        outside_penalty = Some(forced.penalty);
    }

    let mut nodes = Vec::with_capacity(r + 2 * t + c + 2);
    nodes.push(NodeRole::Source);
    nodes.extend((0..r).map(NodeRole::Template));
    nodes.extend((0..t).map(NodeRole::Treated));
    nodes.extend((0..t).map(NodeRole::TreatedCopy));
    nodes.extend((0..c).map(NodeRole::Control));
    nodes.push(NodeRole::Sink);

    let mut tn = TemplateNetwork {
        net: FlowNetwork::new(2, vec![], 0, 1, 0)?,
        nodes,
        arcs: Vec::new(),
        arc_values: Vec::new(),
        templates: r,
        treated: t,
        controls: c,
        k: spec.k,
        lambda: spec.lambda,
        cost_scale: spec.cost_scale,
        categories: Vec::new(),
        line: None,
        warnings,
    };
    let scale = spec.cost_scale;
    let mut arcs = Vec::with_capacity(r + delta.present_count() + t + pairs.present_count() + c);
    let push = |arcs: &mut Vec<Arc>, tn: &mut TemplateNetwork, arc: Arc, kind: ArcKind, value: f64| {
        arcs.push(arc.labeled(kind.code()));
        tn.arcs.push(kind);
        tn.arc_values.push(value);
    };
    for i in 0..r {
        let arc = Arc::new(tn.source(), tn.template_node(i), spec.k as i64, 0);
        push(&mut arcs, &mut tn, arc, ArcKind::SourceTemplate(i), 0.0);
    }
    if spec.compact_template_layer {
        let line = dist
            .line
            .clone()
            .ok_or_else(|| Error::spec("compact template layer needs line positions in the distance matrices"))?;
        // Points sorted by position, equal positions sharing one node.
        let mut order: Vec<(f64, bool, usize)> = line.template.iter().enumerate().map(|(i, &x)| (x, false, i)).collect();
        order.extend(line.treated.iter().enumerate().map(|(j, &x)| (x, true, j)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut positions: Vec<f64> = Vec::new();
        let mut template_point = vec![0; r];
        let mut treated_point = vec![0; t];
        for &(x, is_treated, i) in &order {
            if positions.last() != Some(&x) {
                positions.push(x);
            }
            let p = positions.len() - 1;
            if is_treated {
                treated_point[i] = p;
            } else {
                template_point[i] = p;
            }
        }
        let first_point = tn.nodes.len();
        tn.nodes.extend((0..positions.len()).map(NodeRole::LinePoint));
        let through = tn.supply();
        for (i, &p) in template_point.iter().enumerate() {
            let arc = Arc::new(tn.template_node(i), first_point + p, spec.k as i64, 0);
            push(&mut arcs, &mut tn, arc, ArcKind::TemplateLine(i), 0.0);
        }
        for (p, w) in positions.windows(2).enumerate() {
            let gap = w[1] - w[0];
            let cost = scale_cost(gap, scale)?;
            let up = Arc::new(first_point + p, first_point + p + 1, through, cost);
            push(&mut arcs, &mut tn, up, ArcKind::LineStep(p, true), gap);
            let down = Arc::new(first_point + p + 1, first_point + p, through, cost);
            push(&mut arcs, &mut tn, down, ArcKind::LineStep(p, false), gap);
        }
        for (j, &p) in treated_point.iter().enumerate() {
            let arc = Arc::new(first_point + p, tn.treated_node(j), 1, 0);
            push(&mut arcs, &mut tn, arc, ArcKind::LineTreated(j), 0.0);
        }
        tn.line = Some(line);
    } else {
        for i in 0..r {
            for &(j, v) in delta.row(i) {
                let arc = Arc::new(tn.template_node(i), tn.treated_node(j), 1, scale_cost(v, scale)?);
                push(&mut arcs, &mut tn, arc, ArcKind::TemplateTreated(i, j), v);
            }
        }
    }
    for j in 0..t {
        let penalty = match outside_penalty {
            Some(p) if !forced_set[j] => p,
            _ => 0.0,
        };
        let arc = Arc::new(tn.treated_node(j), tn.treated_copy_node(j), 1, scale_cost(penalty, scale)?);
        push(&mut arcs, &mut tn, arc, ArcKind::TreatedInternal(j), penalty);
    }
    for j in 0..t {
        for &(cc, v) in pairs.row(j) {
            let cost = scale_cost(spec.lambda * v, scale)?;
            let arc = Arc::new(tn.treated_copy_node(j), tn.control_node(cc), 1, cost);
            push(&mut arcs, &mut tn, arc, ArcKind::TreatedControl(j, cc), v);
        }
    }
    for cc in 0..c {
        let arc = Arc::new(tn.control_node(cc), tn.sink(), 1, 0);
        push(&mut arcs, &mut tn, arc, ArcKind::ControlSink(cc), 0.0);
    }
    tn.net = FlowNetwork::new(tn.nodes.len(), arcs, tn.source(), tn.sink(), tn.supply())?;
    tn.check_overflow()?;

    if let Some(fb) = &spec.fine_balance {
        let categories = table.category_keys(&fb.column, table.units(Role::Control))?;
        tn = add_fine_balance_layer(&tn, &categories, &fb.targets, fb.overflow_penalty)?;
    }
    Ok(tn)
}

/// Routes every control through a node for its category.
///
/// Each category node drains to the sink through a zero-cost arc holding its
/// target count and an overflow arc of capacity `k * R` that charges
/// `overflow_penalty` per extra control.
pub fn add_fine_balance_layer(
    tn: &TemplateNetwork,
    control_categories: &[String],
    targets: &[(String, i64)],
    overflow_penalty: f64,
) -> Result<TemplateNetwork> {
    if !tn.categories.is_empty() {
        return Err(Error::spec("network already has a fine-balance layer"));
    }
    if control_categories.len() != tn.controls {
        return Err(Error::dim(format!(
            "{} control categories for {} controls",
            control_categories.len(),
            tn.controls
        )));
    }
    let total: i64 = targets.iter().map(|(_, n)| *n).sum();
    if total != tn.supply() {
        return Err(Error::spec(format!(
            "fine-balance targets sum to {total}, expected k*R = {}",
            tn.supply()
        )));
    }
    if let Some((name, n)) = targets.iter().find(|(_, n)| *n < 0) {
        return Err(Error::spec(format!("negative target {n} for category `{name}`")));
    }
    let mut index = HashMap::new();
    for (b, (name, _)) in targets.iter().enumerate() {
        if index.insert(name.as_str(), b).is_some() {
            return Err(Error::spec(format!("duplicate category `{name}`")));
        }
    }
    let control_category: Vec<usize> = control_categories
        .iter()
        .map(|cat| {
            index
                .get(cat.as_str())
                .copied()
                .ok_or_else(|| Error::spec(format!("control category `{cat}` has no target")))
        })
        .collect::<Result<_>>()?;

    let mut out = tn.clone();
    let first_category = tn.nodes.len();
    out.nodes.extend((0..targets.len()).map(NodeRole::Category));
    out.categories = targets.iter().map(|(n, _)| n.clone()).collect();
    let mut arcs: Vec<Arc> = tn.net.arcs().to_vec();
    for (i, kind) in tn.arcs.iter().enumerate() {
        if let ArcKind::ControlSink(c) = *kind {
            let b = control_category[c];
            arcs[i].head = first_category + b;
            out.arcs[i] = ArcKind::ControlCategory(c, b);
            arcs[i].label = out.arcs[i].code();
        }
    }
    let penalty_cost = scale_cost(overflow_penalty, tn.cost_scale)?;
    for (b, (_, target)) in targets.iter().enumerate() {
        let node = first_category + b;
        let target_arc = ArcKind::CategoryTarget(b);
        arcs.push(Arc::new(node, tn.sink(), *target, 0).labeled(target_arc.code()));
        out.arcs.push(target_arc);
        out.arc_values.push(0.0);
        let overflow = ArcKind::CategoryOverflow(b);
        arcs.push(Arc::new(node, tn.sink(), tn.supply(), penalty_cost).labeled(overflow.code()));
        out.arcs.push(overflow);
        out.arc_values.push(overflow_penalty);
    }
    out.net = FlowNetwork::new(out.nodes.len(), arcs, tn.source(), tn.sink(), tn.supply())?;
    out.check_overflow()?;
    Ok(out)
}

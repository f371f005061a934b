//! Three template units, four treated, six controls: the smallest network
//! worth drawing. Shows how lambda trades template resemblance against
//! pair quality.

use repmatch::statdist::{CostMatrix, CovariateTable, DistanceMatrices, Role};
use repmatch::templatematch::{build_template_network, solve_template_match, TemplateMatchSpec};

fn main() -> repmatch::Result<()> {
    let (r, t, c) = (3, 4, 6);
    let mut ids = Vec::new();
    let mut roles = Vec::new();
    for (role, prefix, n) in [(Role::Template, "R", r), (Role::Treated, "T", t), (Role::Control, "C", c)] {
        for i in 1..=n {
            ids.push(format!("{prefix}{i}"));
            roles.push(role);
        }
    }
    let n = ids.len();
    let table = CovariateTable::new(
        ids,
        roles,
        vec!["x".into()],
        nalgebra::DMatrix::zeros(n, 1),
        vec![],
        nalgebra::DMatrix::zeros(n, 0),
    )?;

    // T4 looks most like the template but has no good control.
    let delta = CostMatrix::dense(r, t, |_, j| [0.6, 0.5, 0.4, 0.1][j])?;
    let pairs = CostMatrix::dense(t, c, |i, j| match (i, j) {
        (0, 0) | (1, 4) | (2, 3) => 0.1,
        (3, _) => 0.9,
        _ => 1.0,
    })?;
    let dist = DistanceMatrices::new(delta, pairs)?;

    for lambda in [0.01, 1.0, 100.0] {
        let spec = TemplateMatchSpec {
            lambda,
            pair_caliper: None,
            ..TemplateMatchSpec::default()
        };
        let tn = build_template_network(&table, &dist, &spec)?;
        let sample = solve_template_match(&tn);
        if lambda == 0.01 {
            println!("network: {} nodes, {} arcs", tn.net.node_count(), tn.net.arc_count());
        }
        let pairs: Vec<String> = sample
            .pairs
            .iter()
            .map(|p| format!("(T{}, C{})", p.treated + 1, p.control + 1))
            .collect();
        println!(
            "lambda {lambda:>6}: {}  s1 = {:.2}, s2 = {:.2}",
            pairs.join(" "),
            sample.s1_template_cost,
            sample.s2_pairing_cost
        );
    }
    Ok(())
}

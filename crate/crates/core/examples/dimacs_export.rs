//! Writes a template-matching network in DIMACS min-cost-flow format so it
//! can be checked with an external solver.
//!
//! ```text
//! cargo run --example dimacs_export -- toy.dimacs
//! ```

use repmatch::flownet::solve_min_cost_flow;
use repmatch::statdist::{CostMatrix, CovariateTable, DistanceMatrices, Role};
use repmatch::templatematch::{build_template_network, TemplateMatchSpec};

fn main() -> repmatch::Result<()> {
    let (r, t, c) = (2, 3, 4);
    let roles: Vec<Role> = [(Role::Template, r), (Role::Treated, t), (Role::Control, c)]
        .iter()
        .flat_map(|&(role, n)| std::iter::repeat_n(role, n))
        .collect();
    let n = roles.len();
    let ids = (0..n).map(|i| format!("u{i}")).collect();
    let table = CovariateTable::new(
        ids,
        roles,
        vec!["x".into()],
        nalgebra::DMatrix::zeros(n, 1),
        vec![],
        nalgebra::DMatrix::zeros(n, 0),
    )?;
    let dist = DistanceMatrices::new(
        CostMatrix::dense(r, t, |i, j| (i as f64 - j as f64).abs() / 2.0)?,
        CostMatrix::dense(t, c, |i, j| ((i + 2 * j) % 5) as f64 / 4.0)?,
    )?;
    let spec = TemplateMatchSpec {
        cost_scale: 100,
        pair_caliper: None,
        ..TemplateMatchSpec::default()
    };
    let tn = build_template_network(&table, &dist, &spec)?;
    let text = tn.net.to_dimacs();
    match std::env::args().nth(1) {
        Some(path) => {
            std::fs::write(&path, &text)?;
            println!("wrote {path}");
        }
        None => print!("{text}"),
    }
    let sol = solve_min_cost_flow(&tn.net);
    println!("c optimal cost {} (costs scaled by {})", sol.total_cost, spec.cost_scale);
    Ok(())
}

//! Exact matching, near-fine balance and forced inclusion on one cohort.

use std::collections::BTreeMap;

use repmatch::simlab::{generate_population, Effect, SimConfig, Sizes};
use repmatch::statdist::{CovariateTable, Role, ScoreSet};
use repmatch::templatematch::{
    force_include, match_with_scores, DistanceKinds, FineBalance, MatchedSample, TemplateMatchSpec,
};

fn counts(table: &CovariateTable, column: &str, units: &[usize]) -> repmatch::Result<BTreeMap<String, i64>> {
    let mut out = BTreeMap::new();
    for key in table.category_keys(column, units)? {
        *out.entry(key).or_insert(0) += 1;
    }
    Ok(out)
}

fn report(label: &str, table: &CovariateTable, sample: &MatchedSample) -> repmatch::Result<()> {
    let controls = sample.control_units(table);
    println!(
        "{label:<16} pairs {:>3}  objective {:>8.2}  penalty {:>6.2}  control bands {:?}",
        sample.pairs.len(),
        sample.objective,
        sample.penalty_cost,
        counts(table, "band", &controls)?
    );
    for w in &sample.warnings {
        println!("{:<16} warning: {w}", "");
    }
    Ok(())
}

fn main() -> repmatch::Result<()> {
    let mut cfg = SimConfig::new(8, 0.5, 0.0, Effect::Mild);
    cfg.sizes = Sizes {
        template: 40,
        treated: 200,
        control: 600,
    };
    let pop = generate_population(&cfg, 1)?;
    // Two nominal columns derived from shared covariates.
    let x2 = pop.table.numeric_values("X2", &(0..pop.table.len()).collect::<Vec<_>>())?;
    let x3 = pop.table.numeric_values("X3", &(0..pop.table.len()).collect::<Vec<_>>())?;
    let site = x2.iter().map(|&v| if v > 0.0 { "north" } else { "south" }.to_string()).collect();
    let band = x3
        .iter()
        .map(|&v| match v {
            v if v < -0.5 => "low",
            v if v < 0.5 => "mid",
            _ => "high",
        })
        .map(String::from)
        .collect();
    let table = pop.table.with_categorical("site", site)?.with_categorical("band", band)?;
    let scores = ScoreSet::fit(&table)?;
    let kinds = DistanceKinds::default();
    let base = TemplateMatchSpec::new(2, 10.0);

    report("plain", &table, &match_with_scores(&table, &scores, kinds, &base)?)?;

    let exact = TemplateMatchSpec {
        exact_columns: vec!["site".into()],
        ..base.clone()
    };
    report("exact site", &table, &match_with_scores(&table, &scores, kinds, &exact)?)?;

    // Controls spread over bands like twice the template.
    let targets: Vec<(String, i64)> = counts(&table, "band", table.units(Role::Template))?
        .into_iter()
        .map(|(band, n)| (band, 2 * n))
        .collect();
    println!("{:<16} targets {targets:?}", "");
    let balanced = TemplateMatchSpec {
        fine_balance: Some(FineBalance {
            column: "band".into(),
            targets,
            overflow_penalty: 1000.0,
        }),
        ..base.clone()
    };
    report("fine balance", &table, &match_with_scores(&table, &scores, kinds, &balanced)?)?;

    let wanted: Vec<String> = table.units(Role::Treated)[..5].iter().map(|&u| table.id(u).to_string()).collect();
    let forced = force_include(&base, &wanted, 1000.0)?;
    let sample = match_with_scores(&table, &scores, kinds, &forced)?;
    report("forced", &table, &sample)?;
    let chosen = sample.treated_units(&table);
    let kept = table.units(Role::Treated)[..5].iter().filter(|u| chosen.contains(u)).count();
    println!("{:<16} {kept} of {} requested units matched", "", wanted.len());
    Ok(())
}

mod common;

use nalgebra::DMatrix;
use rand::Rng;
use repmatch::pairmatch::{match_baseline_mopt, match_optimal_pairs, BipartiteSpec};
use repmatch::simlab::{generate_population, Effect, SimConfig, Sizes};
use repmatch::statdist::{smd, CostMatrix, CovariateTable, Role};

fn pairs_of(s: &repmatch::templatematch::MatchedSample) -> Vec<(usize, usize)> {
    s.pairs.iter().map(|p| (p.treated, p.control)).collect()
}

#[test]
fn three_by_five_toy() {
    // T1-C3, T2-C1, T3-C4 cost 1; everything else costs 3.
    let cheap = [(0, 2), (1, 0), (2, 3)];
    let d = CostMatrix::dense(3, 5, |t, c| if cheap.contains(&(t, c)) { 1.0 } else { 3.0 }).unwrap();
    let s = match_optimal_pairs(&BipartiteSpec::full(d).unwrap()).unwrap();
    assert_eq!(pairs_of(&s), cheap);
    assert_eq!(s.objective, 3.0);
}

fn permutations_min(d: &DMatrix<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
    if row == d.nrows() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for c in 0..d.ncols() {
        if !used[c] {
            used[c] = true;
            best = best.min(d[(row, c)] + permutations_min(d, row + 1, used));
            used[c] = false;
        }
    }
    best
}

#[test]
fn random_four_by_six_matches_permutations() {
    let mut rng = common::rng(11);
    for _ in 0..200 {
        let d = DMatrix::from_fn(4, 6, |_, _| rng.random::<f64>());
        let s = match_optimal_pairs(&BipartiteSpec::full(CostMatrix::from_dmatrix(&d).unwrap()).unwrap()).unwrap();
        let best = permutations_min(&d, 0, &mut vec![false; 6]);
        assert!((s.objective - best).abs() < 1e-4, "{} vs {best}", s.objective);
        let recomputed: f64 = s.pairs.iter().map(|p| d[(p.treated, p.control)]).sum();
        assert_eq!(recomputed, s.objective);
        let mut controls: Vec<usize> = s.pairs.iter().map(|p| p.control).collect();
        controls.sort();
        controls.dedup();
        assert_eq!(controls.len(), 4);
    }
}

#[test]
fn partial_pairing_picks_cheapest_rows() {
    let d = CostMatrix::dense(3, 3, |t, c| if t == c { [5.0, 1.0, 2.0][t] } else { 9.0 }).unwrap();
    let s = match_optimal_pairs(&BipartiteSpec::new(d.clone(), 2).unwrap()).unwrap();
    assert_eq!(pairs_of(&s), vec![(1, 1), (2, 2)]);
    assert!(BipartiteSpec::new(d.clone(), 0).is_err());
    assert!(BipartiteSpec::new(d, 4).is_err());
}

#[test]
fn duplicated_controls_give_zero_distance() {
    let mut rng = common::rng(12);
    let n = 12;
    let x: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random::<f64>() * 3.0]).collect();
    let mut ids = Vec::new();
    let mut roles = Vec::new();
    let mut rows = Vec::new();
    for (role, prefix) in [(Role::Treated, "t"), (Role::Control, "c")] {
        for (i, v) in x.iter().enumerate() {
            ids.push(format!("{prefix}{i}"));
            roles.push(role);
            rows.extend_from_slice(v);
        }
    }
    let table = CovariateTable::new(
        ids,
        roles,
        vec!["a".into(), "b".into()],
        DMatrix::from_row_slice(2 * n, 2, &rows),
        vec![],
        DMatrix::zeros(2 * n, 0),
    )
    .unwrap();
    let s = match_baseline_mopt(&table, 0.05).unwrap();
    assert_eq!(s.pairs.len(), n);
    assert!(s.objective.abs() < 1e-12);
    for p in &s.pairs {
        assert_eq!(x[p.treated], x[p.control]);
    }
}

#[test]
fn mopt_balances_the_treated_group() {
    {
        let (treated, control) = (1000, 3000);
        let mut cfg = SimConfig::new(10, 0.5, 0.0, Effect::Constant);
        cfg.sizes = Sizes {
            template: 50,
            treated,
            control,
        };
        let pop = generate_population(&cfg, 0).unwrap();
        let table = &pop.table;
        let s = match_baseline_mopt(table, 0.05).unwrap();
        assert_eq!(s.pairs.len(), treated);
        let t_units = table.units(Role::Treated);
        let c_units = table.units(Role::Control);
        let mt: Vec<usize> = s.pairs.iter().map(|p| t_units[p.treated]).collect();
        let mc: Vec<usize> = s.pairs.iter().map(|p| c_units[p.control]).collect();
        let a = table.numeric_values("X1", &mt).unwrap();
        let b = table.numeric_values("X1", &mc).unwrap();
        let before = smd("X1", &a, &table.numeric_values("X1", c_units).unwrap()).unwrap().smd;
        let after = smd("X1", &a, &b).unwrap().smd;
        assert!(after.abs() < 0.1, "post-match SMD {after}");
        assert!(after.abs() < before.abs());
    }
}

#[test]
fn infeasible_bipartite_is_reported() {
    let d = CostMatrix::from_rows(2, vec![vec![(0, 1.0)], vec![(0, 2.0)]]).unwrap();
    let s = match_optimal_pairs(&BipartiteSpec::full(d).unwrap()).unwrap();
    assert!(!s.feasible);
    assert_eq!(s.infeasibility.unwrap().max_flow, 1);
}

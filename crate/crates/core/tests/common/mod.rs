#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use repmatch::flownet::{Arc, FlowNetwork};
use repmatch::statdist::{CostMatrix, CovariateTable, DistanceMatrices, Role};
use repmatch::templatematch::{
    build_template_network, enumerate_matched_samples, min_template_cost, solve_template_match, MatchedSample,
    TemplateMatchSpec,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// At most 8 nodes and 14 arcs, capacities up to 2, costs 0..=9, supply up to 3.
pub fn random_network(rng: &mut ChaCha8Rng) -> FlowNetwork {
    let n = rng.random_range(2..=8);
    let m = rng.random_range(1..=14);
    let mut arcs = Vec::with_capacity(m);
    while arcs.len() < m {
        let tail = rng.random_range(0..n);
        let head = rng.random_range(0..n);
        if tail == head {
            continue;
        }
        arcs.push(Arc::new(tail, head, rng.random_range(0..=2), rng.random_range(0..=9)));
    }
    FlowNetwork::new(n, arcs, 0, n - 1, rng.random_range(0..=3)).unwrap()
}

/// Units `k0..`, `t0..`, `c0..` with one shared covariate.
pub fn role_table(r: usize, t: usize, c: usize) -> CovariateTable {
    let n = r + t + c;
    let mut ids = Vec::with_capacity(n);
    let mut roles = Vec::with_capacity(n);
    for i in 0..r {
        ids.push(format!("k{i}"));
        roles.push(Role::Template);
    }
    for i in 0..t {
        ids.push(format!("t{i}"));
        roles.push(Role::Treated);
    }
    for i in 0..c {
        ids.push(format!("c{i}"));
        roles.push(Role::Control);
    }
    let shared = DMatrix::from_fn(n, 1, |i, _| i as f64);
    CovariateTable::new(ids, roles, vec!["x".into()], shared, vec![], DMatrix::zeros(n, 0)).unwrap()
}

/// Dense uniform distances; each Delta entry is absent with probability `hole`.
pub fn random_distances(rng: &mut ChaCha8Rng, r: usize, t: usize, c: usize, hole: f64) -> DistanceMatrices {
    let delta = CostMatrix::dense(r, t, |_, _| rng.random::<f64>()).unwrap();
    let mut rows = Vec::with_capacity(t);
    for _ in 0..t {
        let mut row = Vec::new();
        for j in 0..c {
            let keep = rng.random::<f64>() >= hole;
            let v: f64 = rng.random();
            if keep {
                row.push((j, v));
            }
        }
        rows.push(row);
    }
    let pairs = CostMatrix::from_rows(c, rows).unwrap();
    DistanceMatrices::new(delta, pairs).unwrap()
}

/// Best `(objective, s1, s2)` over every matched outcome, by enumeration.
pub fn enumeration_optimum(dist: &DistanceMatrices, k: usize, lambda: f64) -> Option<(f64, f64, f64)> {
    let (r, t, c) = dist.sizes();
    let mut best: Option<(f64, f64, f64)> = None;
    for cand in enumerate_matched_samples(r, t, c, k).unwrap() {
        let Some(s1) = min_template_cost(&dist.template_treated, &cand.treated, k) else {
            continue;
        };
        let mut s2 = 0.0;
        let mut ok = true;
        for (&tt, &cc) in cand.treated.iter().zip(&cand.controls) {
            match dist.treated_control.get(tt, cc) {
                Some(v) => s2 += v,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let obj = s1 + lambda * s2;
        if best.is_none_or(|b| obj < b.0) {
            best = Some((obj, s1, s2));
        }
    }
    best
}

/// Scale fine enough that rounding cannot reorder distinct random optima.
pub const ORACLE_SCALE: i64 = 1_000_000_000;

pub fn solve_instance(dist: &DistanceMatrices, k: usize, lambda: f64) -> MatchedSample {
    let (r, t, c) = dist.sizes();
    let table = role_table(r, t, c);
    let spec = TemplateMatchSpec {
        k,
        lambda,
        cost_scale: ORACLE_SCALE,
        pair_caliper: None,
        ..TemplateMatchSpec::default()
    };
    solve_template_match(&build_template_network(&table, dist, &spec).unwrap())
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Every unit used once, `k * R` pairs.
pub fn assert_valid_sample(sample: &MatchedSample, k: usize, r: usize) {
    assert!(sample.feasible);
    assert_eq!(sample.pairs.len(), k * r);
    let mut t: Vec<usize> = sample.treated_indices();
    let mut c: Vec<usize> = sample.control_indices();
    t.sort_unstable();
    t.dedup();
    c.sort_unstable();
    c.dedup();
    assert_eq!(t.len(), k * r, "treated reused");
    assert_eq!(c.len(), k * r, "control reused");
    let mut per_template = vec![0; r];
    for (tmpl, _) in sample.template_assignment() {
        per_template[tmpl] += 1;
    }
    assert!(per_template.iter().all(|&n| n == k), "{per_template:?}");
}

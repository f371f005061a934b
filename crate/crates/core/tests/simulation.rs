use repmatch::simlab::{
    ate_target, difference_in_means, generate_population, run_cell, Algorithm, BiasRow, Effect, SimConfig, Sizes,
    SHARED_DIM, TARGET_X1_MEAN,
};
use repmatch::statdist::{participation_scores, Role};
use repmatch::templatematch::{MatchedPair, MatchedSample};

fn small(theta: f64, effect: Effect, replicates: usize) -> SimConfig {
    let mut cfg = SimConfig::new(8, theta, 0.0, effect);
    cfg.sizes = Sizes {
        template: 60,
        treated: 250,
        control: 750,
    };
    cfg.replicates = replicates;
    cfg.algorithms = vec![Algorithm::Mopt, Algorithm::Template { k: 1, lambda: 0.01 }];
    cfg
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[test]
fn population_layout_and_means() {
    let mut cfg = SimConfig::new(12, 0.75, 0.1, Effect::Strong);
    cfg.sizes = Sizes {
        template: 4000,
        treated: 4000,
        control: 4000,
    };
    let pop = generate_population(&cfg, 9).unwrap();
    let t = &pop.table;
    assert_eq!(t.len(), 12_000);
    assert_eq!(t.shared_names().len(), SHARED_DIM);
    assert_eq!(t.extended_names().len(), 12 - SHARED_DIM);
    assert!(t.id(0).starts_with('k') && t.id(4000).starts_with('t') && t.id(8000).starts_with('c'));
    let tol = 4.0 / (4000f64).sqrt();
    let x1 = |role| mean(&t.numeric_values("X1", t.units(role)).unwrap());
    assert!((x1(Role::Template) - TARGET_X1_MEAN).abs() < tol);
    assert!((x1(Role::Treated) - 0.75).abs() < tol);
    assert!(x1(Role::Control).abs() < tol);
    assert!((mean(&t.numeric_values("X2", t.units(Role::Treated)).unwrap())).abs() < tol);
    assert!(t.numeric_values("X6", t.units(Role::Template)).unwrap().iter().all(|v| v.is_nan()));
    for &u in t.units(Role::Treated) {
        let x1 = t.numeric_values("X1", &[u]).unwrap()[0];
        assert!((pop.y1[u] - pop.y0[u] - (2.0 - x1)).abs() < 1e-12);
    }
}

#[test]
fn participation_score_falls_with_x1_among_treated() {
    let mut cfg = SimConfig::new(10, 1.0, 0.0, Effect::Strong);
    cfg.sizes = Sizes {
        template: 100,
        treated: 500,
        control: 50,
    };
    let pop = generate_population(&cfg, 0).unwrap();
    let t = &pop.table;
    let scores = participation_scores(t).unwrap();
    let x1 = t.numeric_values("X1", t.units(Role::Treated)).unwrap();
    let s = &scores[100..];
    let (mx, ms) = (mean(&x1), mean(s));
    let cov: f64 = x1.iter().zip(s).map(|(a, b)| (a - mx) * (b - ms)).sum();
    assert!(cov < 0.0);
}

#[test]
fn reports_are_reproducible() {
    let cfg = small(0.5, Effect::Strong, 4);
    let a = run_cell(&cfg).unwrap();
    assert_eq!(a, run_cell(&cfg).unwrap());
    let other = SimConfig {
        master_seed: 1,
        ..cfg.clone()
    };
    assert_ne!(a, run_cell(&other).unwrap());
    assert_eq!(a.len(), 2);
    assert!(a.iter().all(|r| r.failures == 0 && r.replicates == 4));
}

#[test]
fn constant_effect_is_recovered_by_every_algorithm() {
    for row in run_cell(&small(0.5, Effect::Constant, 6)).unwrap() {
        assert_eq!(row.ate_target, 2.0);
        assert!(row.percent_bias.abs() < 4.0 * row.mc_se, "{}: {row:?}", row.algorithm);
    }
}

#[test]
fn template_match_reduces_generalization_bias() {
    for theta in [0.0, 0.5] {
        let rows = run_cell(&small(theta, Effect::Strong, 10)).unwrap();
        let (mopt, tm) = (&rows[0], &rows[1]);
        assert_eq!(mopt.ate_target, ate_target(Effect::Strong));
        // The baseline estimates 2 - theta, not the target 1.75.
        let drift = (2.0 - theta - 1.75) / 1.75 * 100.0;
        assert!((mopt.percent_bias - drift).abs() < 4.0 * mopt.mc_se.max(0.5), "{theta}: {mopt:?}");
        assert!(tm.percent_bias.abs() < mopt.percent_bias.abs());
        assert!(tm.percent_bias.abs() < 4.0 * tm.mc_se, "{theta}: {tm:?}");
    }
}

#[test]
fn zero_overlap_shift_leaves_groups_alike() {
    let mut cfg = SimConfig::new(10, 0.0, 0.05, Effect::Mild);
    cfg.sizes = Sizes {
        template: 300,
        treated: 1000,
        control: 1000,
    };
    for rep in 0..5 {
        let pop = generate_population(&cfg, rep).unwrap();
        let t = &pop.table;
        let gap = mean(&t.numeric_values("X1", t.units(Role::Treated)).unwrap())
            - mean(&t.numeric_values("X1", t.units(Role::Control)).unwrap());
        assert!(gap.abs() < 3.0 * (2.0f64 / 1000.0).sqrt(), "{gap}");
        let template = mean(&t.numeric_values("X1", t.units(Role::Template)).unwrap());
        assert!((template - TARGET_X1_MEAN).abs() < 3.0 / 300f64.sqrt());
    }
}

#[test]
fn difference_in_means_of_two_pairs() {
    let mut cfg = SimConfig::new(6, 0.5, 0.0, Effect::Constant);
    cfg.sizes = Sizes {
        template: 1,
        treated: 2,
        control: 2,
    };
    let mut pop = generate_population(&cfg, 0).unwrap();
    // Treated units 1, 2 and controls 3, 4; pair differences 1 and 3.
    pop.y1[1] = 5.0;
    pop.y1[2] = 7.0;
    pop.y0[3] = 4.0;
    pop.y0[4] = 4.0;
    let pair = |treated, control| MatchedPair {
        treated,
        control,
        template: None,
    };
    let sample = MatchedSample {
        pairs: vec![pair(0, 0), pair(1, 1)],
        s1_template_cost: 0.0,
        s2_pairing_cost: 0.0,
        penalty_cost: 0.0,
        lambda: 1.0,
        objective: 0.0,
        feasible: true,
        infeasibility: None,
        warnings: vec![],
    };
    assert_eq!(difference_in_means(&sample, &pop).unwrap(), 2.0);
    let empty = MatchedSample { pairs: vec![], ..sample };
    assert!(difference_in_means(&empty, &pop).is_err());
}

fn row(rows: &[BiasRow], k: usize, lambda: f64) -> &BiasRow {
    rows.iter()
        .find(|r| r.algorithm == Algorithm::Template { k, lambda })
        .expect("algorithm in report")
}

// |bias(a)| <= |bias(b)| up to two Monte-Carlo standard errors.
fn no_worse(a: &BiasRow, b: &BiasRow) -> bool {
    a.percent_bias.abs() <= b.percent_bias.abs() + 2.0 * a.mc_se.max(b.mc_se)
}

#[test]
fn bias_ordering_over_lambda_and_k() {
    let mut cfg = SimConfig::new(10, 0.5, 0.0, Effect::Strong);
    cfg.sizes = Sizes {
        template: 100,
        treated: 400,
        control: 1200,
    };
    cfg.replicates = 60;
    let rows = run_cell(&cfg).unwrap();
    assert_eq!(rows.len(), 7);
    let mopt = &rows[0];
    for k in [1, 2] {
        assert!(no_worse(row(&rows, k, 1.0), row(&rows, k, 100.0)), "k={k}: {rows:#?}");
        assert!(no_worse(row(&rows, k, 0.01), row(&rows, k, 1.0)), "k={k}: {rows:#?}");
        assert!(row(&rows, k, 0.01).percent_bias.abs() < mopt.percent_bias.abs());
    }
    for lambda in [0.01, 1.0, 100.0] {
        assert!(no_worse(row(&rows, 1, lambda), row(&rows, 2, lambda)), "lambda={lambda}: {rows:#?}");
    }
}

//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use repmatch::flownet::{brute_force_min_cost, solve_min_cost_flow};
use repmatch::pairmatch::match_baseline_mopt;
use repmatch::simlab::{ate_target, generate_population, run_cell, Algorithm, Effect, SimConfig, Sizes};
use repmatch::statdist::{fit_logistic, robust_mahalanobis_matrix, score_residuals, sigmoid, smd, Caliper, Role, ScoreSet};
use repmatch::templatematch::{
    build_template_network, compute_distances, enumerate_matched_samples, solve_template_match, DistanceKinds,
    TemplateMatchSpec,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn network_counts() -> Outcome {
    let mut rng = common::rng(101);
    let dist = common::random_distances(&mut rng, 3, 4, 6, 0.0);
    let spec = TemplateMatchSpec::default();
    let tn = build_template_network(&common::role_table(3, 4, 6), &dist, &spec).map_err(|e| e.to_string())?;
    ensure(tn.net.node_count() == 19 && tn.net.arc_count() == 49, || {
        format!("toy has {} nodes, {} arcs", tn.net.node_count(), tn.net.arc_count())
    })?;
    let mut checked = 0;
    for r in 1..=5 {
        for t in r..=8 {
            for c in 1..=10 {
                let dist = common::random_distances(&mut rng, r, t, c, 0.0);
                let tn = build_template_network(&common::role_table(r, t, c), &dist, &spec).map_err(|e| e.to_string())?;
                ensure(
                    tn.net.node_count() == r + 2 * t + c + 2 && tn.net.arc_count() == r + r * t + t + t * c + c,
                    || format!("R={r} T={t} C={c}: {} nodes {} arcs", tn.net.node_count(), tn.net.arc_count()),
                )?;
                checked += 1;
            }
        }
    }
    Ok(format!("19 nodes / 49 arcs; {checked} sizes match the formulas"))
}

fn toy_enumeration() -> Outcome {
    let n = enumerate_matched_samples(3, 4, 6, 1).map_err(|e| e.to_string())?.len();
    ensure(n == 480, || format!("{n} outcomes"))?;
    Ok("480 outcomes".into())
}

fn solver_vs_brute_force() -> Outcome {
    let mut rng = common::rng(103);
    let mut feasible = 0;
    for i in 0..250 {
        let net = common::random_network(&mut rng);
        let fast = solve_min_cost_flow(&net);
        let slow = brute_force_min_cost(&net).map_err(|e| e.to_string())?;
        ensure(fast.feasible == slow.feasible && (!fast.feasible || fast.total_cost == slow.total_cost), || {
            format!("network {i} disagrees: {} vs {}", fast.total_cost, slow.total_cost)
        })?;
        feasible += fast.feasible as usize;
    }
    Ok(format!("250 networks agree ({feasible} feasible)"))
}

struct TemplateSweep {
    optimal: usize,
    monotone: usize,
}

fn template_sweep() -> Result<TemplateSweep, String> {
    let mut rng = common::rng(104);
    let mut optimal = 0;
    let mut monotone = 0;
    while optimal < 120 {
        let r = rng.random_range(1..=3);
        let t = rng.random_range(r..=5);
        let c = rng.random_range(r..=6);
        let k = if 2 * r <= t.min(c) && rng.random_bool(0.3) { 2 } else { 1 };
        let dist = common::random_distances(&mut rng, r, t, c, 0.1);
        if common::enumeration_optimum(&dist, k, 1.0).is_none() {
            continue;
        }
        let mut path = Vec::new();
        for lambda in [0.01, 1.0, 100.0] {
            let (obj, _, _) = common::enumeration_optimum(&dist, k, lambda).expect("feasible");
            let s = common::solve_instance(&dist, k, lambda);
            ensure(s.feasible && common::rel_close(s.objective, obj, 1e-9), || {
                format!("R={r} T={t} C={c} k={k} lambda={lambda}: {} vs {obj}", s.objective)
            })?;
            path.push((s.s1_template_cost, s.s2_pairing_cost));
        }
        let ok = path.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9 && w[1].0 >= w[0].0 - 1e-9);
        ensure(ok, || format!("R={r} T={t} C={c}: s1/s2 path {path:?}"))?;
        optimal += 1;
        monotone += 1;
    }
    Ok(TemplateSweep { optimal, monotone })
}

fn template_optimality() -> Outcome {
    template_sweep().map(|s| format!("{} instances x 3 lambdas equal the enumeration minimum", s.optimal))
}

fn lambda_monotonicity() -> Outcome {
    template_sweep().map(|s| format!("s2 non-increasing, s1 non-decreasing on {} instances", s.monotone))
}

fn bias_simulation() -> Outcome {
    let algorithms = vec![Algorithm::Mopt, Algorithm::Template { k: 1, lambda: 0.01 }];
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for effect in [Effect::Strong, Effect::Constant] {
        let mut cfg = SimConfig::new(10, 0.5, 0.0, effect);
        cfg.algorithms = algorithms.clone();
        let rows = run_cell(&cfg).map_err(|e| e.to_string())?;
        for row in &rows {
            lines.push(format!(
                "{effect}/{} {:+.2}% (mean {:.3}, se {:.2})",
                row.algorithm, row.percent_bias, row.mean_estimate, row.mc_se
            ));
            if row.failures > 0 {
                failures.push(format!("{} failed {} replicates", row.algorithm, row.failures));
            }
        }
        match effect {
            Effect::Strong => {
                if rows[0].percent_bias > -10.0 {
                    failures.push(format!("M_opt bias {:.2}% not <= -10%", rows[0].percent_bias));
                }
                if rows[1].percent_bias.abs() > 6.0 {
                    failures.push(format!("template bias {:.2}% exceeds 6%", rows[1].percent_bias));
                }
            }
            _ => {
                for row in &rows {
                    if row.percent_bias.abs() >= 2.0 {
                        failures.push(format!("constant {} bias {:.2}%", row.algorithm, row.percent_bias));
                    }
                }
            }
        }
    }
    let summary = lines.join(", ");
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

fn target_effects() -> Outcome {
    let got = [Effect::Constant, Effect::Mild, Effect::Strong].map(ate_target);
    ensure(got == [2.0, 1.95, 1.75], || format!("{got:?}"))?;
    Ok("2 / 1.95 / 1.75".into())
}

fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn robust_invariance() -> Outcome {
    let mut rng = common::rng(108);
    for trial in 0..50 {
        let pool = normal_matrix(&mut rng, 30, 4);
        let before = robust_mahalanobis_matrix(&pool, &pool, &pool).map_err(|e| e.to_string())?;
        let col = trial % 4;
        let mut moved = pool.clone();
        for i in 0..moved.nrows() {
            let v = moved[(i, col)];
            moved[(i, col)] = if trial % 2 == 0 { (2.0 * v).exp() } else { v * v * v + v };
        }
        let after = robust_mahalanobis_matrix(&moved, &moved, &moved).map_err(|e| e.to_string())?;
        ensure(before == after, || format!("trial {trial} differs"))?;
    }
    Ok("50 transforms bit-identical".into())
}

fn logistic_oracle() -> Outcome {
    let mut rng = common::rng(109);
    let mut worst_score = 0.0f64;
    let mut worst_coef = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(100..400);
        let p = rng.random_range(1..=4);
        let x = normal_matrix(&mut rng, n, p);
        let beta: Vec<f64> = (0..=p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<bool> = (0..n)
            .map(|i| {
                let eta = beta[0] + (0..p).map(|j| beta[j + 1] * x[(i, j)]).sum::<f64>();
                rng.random::<f64>() < sigmoid(eta)
            })
            .collect();
        let model = fit_logistic(&x, &labels, 100, 1e-10).map_err(|e| e.to_string())?;
        let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let y = DVector::from_iterator(n, labels.iter().map(|&l| l as u8 as f64));
        worst_score = worst_score.max(score_residuals(&design, &y, &model.coefficients, 0.0).amax());
        // Gradient ascent with step 4 / |X|_F^2, below 1 / Lipschitz.
        let step = 4.0 / design.norm_squared();
        let mut b = DVector::zeros(p + 1);
        for _ in 0..1_000_000 {
            let g = design.tr_mul(&(&y - (&design * &b).map(sigmoid)));
            if g.amax() < 1e-11 {
                break;
            }
            b += step * g;
        }
        worst_coef = worst_coef.max((&model.coefficients - &b).amax());
    }
    ensure(worst_score <= 1e-8 && worst_coef <= 1e-5, || {
        format!("score {worst_score:e}, coefficient gap {worst_coef:e}")
    })?;
    Ok(format!("max score {worst_score:.1e}, max coefficient gap {worst_coef:.1e}"))
}

fn illustrative_cohort() -> Outcome {
    let mut cfg = SimConfig::new(10, 1.0, 0.0, Effect::Constant);
    cfg.sizes = Sizes {
        template: 100,
        treated: 500,
        control: 1500,
    };
    let pop = generate_population(&cfg, 0).map_err(|e| e.to_string())?;
    let table = &pop.table;
    let scores = ScoreSet::fit(table).map_err(|e| e.to_string())?;
    let spec = TemplateMatchSpec {
        k: 1,
        lambda: 1.0,
        pair_caliper: Some(Caliper::hard(0.05)),
        ..TemplateMatchSpec::default()
    };
    let (dist, _) = compute_distances(table, &scores, DistanceKinds::default(), &spec).map_err(|e| e.to_string())?;
    let tn = build_template_network(table, &dist, &spec).map_err(|e| e.to_string())?;
    let sample = solve_template_match(&tn);
    ensure(sample.feasible, || "template match infeasible".into())?;
    let x1 = |units: &[usize]| table.numeric_values("X1", units).unwrap();
    let template = x1(table.units(Role::Template));
    let matched = smd("X1", &x1(&sample.treated_units(table)), &template).unwrap().smd;
    let mopt = match_baseline_mopt(table, 0.05).map_err(|e| e.to_string())?;
    let full = smd("X1", &x1(&mopt.treated_units(table)), &template).unwrap().smd;
    ensure(matched.abs() < 0.2 && full > 0.5, || format!("template SMD {matched:.3}, full treated {full:.3}"))?;
    Ok(format!("matched treated SMD {matched:.3}, full treated SMD {full:.3}"))
}

fn run_binary(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_repmatch"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let mut cfg = SimConfig::new(8, 0.5, 0.0, Effect::Mild);
    cfg.sizes = Sizes {
        template: 30,
        treated: 150,
        control: 450,
    };
    let units = root.join("cohort.csv");
    generate_population(&cfg, 0)
        .and_then(|p| p.write_csv(fs::File::create(&units)?))
        .map_err(|e| e.to_string())?;
    let run_cfg = root.join("run.cfg");
    fs::write(
        &run_cfg,
        format!("units = {}\nshared = X1,X2,X3,X4,X5\nextended = X6,X7,X8\nk = 2\nlambda = 1\n", units.display()),
    )
    .map_err(|e| e.to_string())?;
    let grid = root.join("grid.cfg");
    fs::write(
        &grid,
        "d = 6\ntheta = 0.5\nnu = 0, 0.1\neffect = strong\nreplicates = 4\nalgorithms = mopt, template(1/0.01), template(2/100)\n\
         template_size = 15\ntreated_size = 60\ncontrol_size = 180\n",
    )
    .map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for name in ["first", "second"] {
        let out = root.join(name);
        fs::create_dir_all(&out).map_err(|e| e.to_string())?;
        let (cfg_s, out_s) = (run_cfg.to_str().unwrap(), out.join("match"));
        run_binary(&["match", "--config", cfg_s, "--out", out_s.to_str().unwrap()])?;
        let bias = out.join("bias.csv");
        run_binary(&["simulate", "--config", grid.to_str().unwrap(), "--out", bias.to_str().unwrap()])?;
        let mut files = read_all(&out.join("match"));
        files.push(("bias.csv".into(), fs::read(&bias).unwrap()));
        runs.push(files);
    }
    ensure(runs[0] == runs[1], || "outputs differ between runs".into())?;
    Ok(format!("{} output files byte-identical", runs[0].len()))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Duration); 11] = [
        ("1 network node/arc counts", network_counts, Duration::from_secs(1)),
        ("2 toy outcome enumeration", toy_enumeration, Duration::from_secs(1)),
        ("3 solver equals brute force", solver_vs_brute_force, Duration::from_secs(30)),
        ("4 template match is optimal", template_optimality, Duration::from_secs(60)),
        ("5 s1/s2 monotone in lambda", lambda_monotonicity, Duration::from_secs(60)),
        ("6 simulation bias", bias_simulation, Duration::from_secs(600)),
        ("7 target effects", target_effects, Duration::from_secs(1)),
        ("8 robust distance invariance", robust_invariance, Duration::from_secs(60)),
        ("9 logistic fit", logistic_oracle, Duration::from_secs(60)),
        ("10 illustrative cohort balance", illustrative_cohort, Duration::from_secs(30)),
        ("11 deterministic outputs", determinism, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; took {elapsed:.1?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Acceptance criteria, one test each. Every test prints a single
//! `PASS`/`FAIL` line (written straight to stderr so it shows up without
//! `--nocapture`) and then asserts. The tests share a lock so that the
//! timed ones are not disturbed by each other.

use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::Rng;
use topo_opt::experiments::{run_experiment, subsample_supports, ExperimentName, ExperimentSpec};
use topo_opt::filtrations::{torus_complex, vr_filtration, PointCloud, VietorisRips};
use topo_opt::losses::{DiagramLoss, Objective};
use topo_opt::optimizer::descend;
use topo_opt::persistence::{diagram, persistence_pairs, reduce};
use topo_opt::schemes::bigstep::move_with_moving_set;
use topo_opt::schemes::diffeo::diffeo_interpolate;
use topo_opt::schemes::{vanilla_gradient, ParamGradient};
use topo_opt::validation::{
    gradient_suite, metric_suite, moving_set_suite, oracle_pairing, pairing_suite, random_filtration, rng,
    stability_suite, GradFamily, GradLoss,
};
use topo_opt::Filtration;

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict line for a criterion and fails the test if needed.
fn verdict(id: u32, name: &str, elapsed: Duration, problems: &[String]) {
    let status = if problems.is_empty() { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {id:>2} {status}: {name} [{:.2?}]", elapsed);
    for p in problems {
        let _ = writeln!(err, "    - {p}");
    }
    assert!(problems.is_empty(), "criterion {id} failed: {problems:?}");
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("topo_opt_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn criterion_01_torus_betti_numbers() {
    let _g = serial();
    let start = Instant::now();
    let k = Arc::new(torus_complex());
    let f = Filtration::new(k.clone(), vec![0.0; k.len()]).unwrap();
    let dgm = diagram(&f, &persistence_pairs(&f), false);
    let counts: Vec<usize> = (0..3).map(|p| dgm.essential_count(p)).collect();
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    if counts != [1, 2, 1] {
        problems.push(format!("essential counts {counts:?}, expected [1, 2, 1]"));
    }
    if elapsed > Duration::from_secs(1) {
        problems.push(format!("took {elapsed:?}, limit 1 s"));
    }
    verdict(1, "torus essential counts (1, 2, 1)", elapsed, &problems);
}

#[test]
fn criterion_02_pairing_matches_rank_oracle() {
    let _g = serial();
    let start = Instant::now();
    let rep = pairing_suite(2024, 200, 30);
    let elapsed = start.elapsed();
    let mut problems: Vec<String> = rep.failures.iter().take(10).cloned().collect();
    if elapsed > Duration::from_secs(30) {
        problems.push(format!("took {elapsed:?}, limit 30 s"));
    }
    verdict(2, "pairing equals rank oracle on 200 random filtrations", elapsed, &problems);
}

#[test]
fn criterion_03_unit_square_bar() {
    let _g = serial();
    let start = Instant::now();
    let x = PointCloud::new(4, 2, vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap();
    let f = vr_filtration(&x, 2).unwrap();
    let expected = (0.5, std::f64::consts::SQRT_2 / 2.0);
    let mut problems = Vec::new();
    let from_oracle = diagram(&f, &oracle_pairing(&f), true).ordinary(1);
    let from_reduce = diagram(&f, &reduce(&f).pairing(), true).ordinary(1);
    let from_fast = diagram(&f, &persistence_pairs(&f), true).ordinary(1);
    for (name, pts) in [("oracle", from_oracle), ("reduce", from_reduce), ("fast", from_fast)] {
        match pts.as_slice() {
            [p] if (p.birth - expected.0).abs() <= 1e-12 && (p.death - expected.1).abs() <= 1e-12 => {}
            other => problems.push(format!("{name}: H1 = {other:?}, expected one bar {expected:?}")),
        }
    }
    verdict(3, "unit-square H1 bar (0.5, √2/2)", start.elapsed(), &problems);
}

#[test]
fn criterion_04_fg_distance_and_stability() {
    let _g = serial();
    let start = Instant::now();
    let exact = metric_suite(404, 100, 5, 1e-12);
    let stable = stability_suite(405, 100);
    let problems: Vec<String> = exact.failures.iter().chain(&stable.failures).take(10).cloned().collect();
    verdict(4, "FG distance equals enumeration; bottleneck stability", start.elapsed(), &problems);
}

#[test]
fn criterion_05_composite_gradients_match_finite_differences() {
    let _g = serial();
    let start = Instant::now();
    let mut problems = Vec::new();
    let mut worst: f64 = 0.0;
    for fam in [GradFamily::Rips, GradFamily::WeightedRips, GradFamily::LowerStar] {
        for loss in [GradLoss::TotalPersistence, GradLoss::DistanceToTarget, GradLoss::Singleton] {
            let rep = gradient_suite(505, fam, loss, 100, 1e-6, 1e-4);
            worst = worst.max(rep.worst);
            if rep.configs < 100 {
                problems.push(format!("{fam:?} × {loss:?}: only {} configurations", rep.configs));
            }
            problems.extend(rep.failures.into_iter().take(3));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(120) {
        problems.push(format!("took {elapsed:?}, limit 2 min"));
    }
    verdict(5, &format!("9 family × loss suites of 100 configurations (worst rel. error {worst:.1e})"), elapsed, &problems);
}

#[test]
fn criterion_06_stratified_steps_decrease() {
    let _g = serial();
    let start = Instant::now();
    let mut problems = Vec::new();
    let mut accepted = 0;
    let mut rejected = 0;
    for seed in 0..3 {
        let mut spec = ExperimentSpec::preset(ExperimentName::CircleOutlier, scratch_dir("c6"));
        spec.seed = seed;
        let x0 = spec.initial_cloud().unwrap();
        let obj = spec.objective().unwrap();
        let cfg = spec.descent_config("stratified", 0.064, 1.0).unwrap();
        let out = descend(x0.as_slice(), &obj, &cfg).unwrap();
        let rows = &out.trace.rows;
        for c in &out.trace.decrease_checks {
            if !c.accepted {
                rejected += 1;
                continue;
            }
            accepted += 1;
            // β = 0.5 is built into the bound; re-check it against the trace
            if !(c.after <= c.bound) {
                problems.push(format!("seed {seed} step {}: {} > bound {}", c.step, c.after, c.bound));
            }
            if rows[c.step - 1].loss != c.before || rows[c.step].loss != c.after {
                problems.push(format!("seed {seed} step {}: check does not match the trace", c.step));
            }
        }
        // the final loss is reproduced by an independent evaluation
        let again = obj.value(&out.theta).unwrap();
        if again != out.trace.final_loss() {
            problems.push(format!("seed {seed}: final loss {} re-evaluates to {again}", out.trace.final_loss()));
        }
    }
    if accepted == 0 {
        problems.push("no accepted steps".into());
    }
    verdict(
        6,
        &format!("stratified decrease on 3 seeds: {accepted} accepted steps, {rejected} rejected attempts"),
        start.elapsed(),
        &problems,
    );
}

#[test]
fn criterion_07_moving_sets_and_pairing_preservation() {
    let _g = serial();
    let start = Instant::now();
    let (rep, cases) = moving_set_suite(707, 200, 50);
    let mut problems: Vec<String> = rep.failures.iter().take(10).cloned().collect();
    if cases.len() != 4 {
        problems.push(format!("cases exercised: {cases:?}"));
    }
    let mut r = rng(708);
    let mut moves = 0;
    for trial in 0..200 {
        let f = random_filtration(&mut r, 50, true);
        let pairing = persistence_pairs(&f);
        let vmax = f.values().iter().copied().fold(0.0, f64::max);
        for &(b, d) in pairing.pairs.iter().flatten() {
            for (tau, partner) in [(b, d), (d, b)] {
                let t = r.random_range(-0.5..vmax + 0.5);
                let values = move_with_moving_set(&f, tau, partner, t).unwrap();
                moves += 1;
                match Filtration::new(f.complex().clone(), values) {
                    Ok(g) if persistence_pairs(&g).contains_pair(b, d) => {}
                    Ok(_) => problems.push(format!("trial {trial}: pair ({b}, {d}) lost moving {tau} to {t}")),
                    Err(e) => problems.push(format!("trial {trial}: update not a filtration: {e}")),
                }
            }
        }
    }
    verdict(
        7,
        &format!("fast = naive moving sets on 200 filtrations ({} cases); {moves} big-step moves keep their pair", cases.len()),
        start.elapsed(),
        &problems,
    );
}

#[test]
fn criterion_08_diffeomorphic_interpolation() {
    let _g = serial();
    let start = Instant::now();
    let mut problems = Vec::new();
    let mut r = rng(808);
    let sigma = 0.1;
    let mut worst_resid: f64 = 0.0;
    for trial in 0..50 {
        let n = 40;
        let cloud: Vec<f64> = (0..2 * n).map(|_| r.random_range(0.0..1.0)).collect();
        let mut g = ParamGradient::zeros(2 * n, 2);
        for _ in 0..r.random_range(1..=12) {
            let i = r.random_range(0..n);
            g.values[2 * i] = r.random_range(-1.0..1.0);
            g.values[2 * i + 1] = r.random_range(-1.0..1.0);
        }
        let field = diffeo_interpolate(&cloud, &g, sigma, 0.0).unwrap();
        for i in g.support() {
            let v = field.at(&cloud[2 * i..2 * i + 2]);
            let resid = (v[0] - g.values[2 * i]).abs().max((v[1] - g.values[2 * i + 1]).abs());
            worst_resid = worst_resid.max(resid);
            if resid > 1e-8 {
                problems.push(format!("trial {trial}: residual {resid:.2e} at point {i}"));
            }
        }
    }
    // directional derivatives of the composite loss along Ṽ and along g
    let mut worst_dir: f64 = 0.0;
    for trial in 0..50 {
        let n = 16;
        let cloud: Vec<f64> = (0..n)
            .flat_map(|_| {
                let a: f64 = r.random_range(0.0..std::f64::consts::TAU);
                let rad = 1.0 + 0.1 * r.random_range(-1.0..1.0);
                [rad * a.cos(), rad * a.sin()]
            })
            .collect();
        let fam = Arc::new(VietorisRips::new(n, 2, 2).unwrap());
        let obj = Objective::single(fam, 1, DiagramLoss::NegDistanceToEmpty);
        let (g, _) = vanilla_gradient(&obj, &cloud).unwrap();
        if g.support().is_empty() {
            continue;
        }
        let v = diffeo_interpolate(&cloud, &g, sigma, 0.0).unwrap().on_cloud(&cloud);
        let along_v: f64 = g.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
        let along_g: f64 = g.values.iter().map(|a| a * a).sum();
        let rel = (along_v - along_g).abs() / along_g.abs().max(1e-300);
        worst_dir = worst_dir.max(rel);
        if rel > 1e-6 {
            problems.push(format!("trial {trial}: ⟨∇L, Ṽ⟩ = {along_v}, ⟨∇L, g⟩ = {along_g}"));
        }
    }
    verdict(
        8,
        &format!("interpolation residual {worst_resid:.1e}, directional derivative rel. error {worst_dir:.1e}"),
        start.elapsed(),
        &problems,
    );
}

#[test]
fn criterion_09_circle_outlier_reproduction() {
    let _g = serial();
    let start = Instant::now();
    let out = scratch_dir("c9");
    let spec = ExperimentSpec::preset(ExperimentName::CircleOutlier, &out);
    let report = run_experiment(&spec).unwrap();
    let elapsed = start.elapsed();
    let _ = std::fs::remove_dir_all(&out);
    let mut problems = Vec::new();
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "    method        best (lr, decay)   initial → final      mean cell time");
    let mut mean_ms = Vec::new();
    for method in &spec.methods {
        let cells: Vec<_> = report.cells.iter().filter(|c| &c.method == method).collect();
        let mean = cells.iter().map(|c| c.total_ms()).sum::<f64>() / cells.len() as f64;
        mean_ms.push((method.clone(), mean));
        let best = report.best_cell(method).unwrap();
        let _ = writeln!(
            err,
            "    {method:<13} ({:.3}, {:.1})       {:+.4} → {:+.4}    {mean:.0} ms",
            best.lr,
            best.decay,
            best.initial_loss(),
            best.final_loss()
        );
        // (a) the selected cell ends below step 0
        if !(best.final_loss() < best.initial_loss()) {
            problems.push(format!("(a) {method} does not decrease: {} → {}", best.initial_loss(), best.final_loss()));
        }
    }
    drop(err);
    // (b) big-step has the lowest final loss among the four gradient schemes
    let final_of = |m: &str| report.best_cell(m).unwrap().final_loss();
    let big = final_of("big_step");
    for m in ["vanilla", "stratified", "continuation"] {
        if !(big < final_of(m)) {
            problems.push(format!("(b) big_step final {big:.4} not below {m} {:.4}", final_of(m)));
        }
    }
    // (c) big-step slowest; vanilla within 25% of the fastest method
    let time_of = |m: &str| mean_ms.iter().find(|(n, _)| n == m).unwrap().1;
    let (slowest, _) = mean_ms.iter().cloned().fold((String::new(), f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    if slowest != "big_step" {
        problems.push(format!(
            "(c) slowest method is {slowest} ({:.0} ms per cell), not big_step ({:.0} ms)",
            time_of(&slowest),
            time_of("big_step")
        ));
    }
    let fastest = mean_ms.iter().map(|x| x.1).fold(f64::MAX, f64::min);
    if time_of("vanilla") > 1.25 * fastest {
        problems.push(format!("(c) vanilla {:.0} ms is not within 25% of the fastest {fastest:.0} ms", time_of("vanilla")));
    }
    if elapsed > Duration::from_secs(600) {
        problems.push(format!("took {elapsed:?}, limit 10 min"));
    }
    verdict(9, "circle + outlier grid: decrease, big-step lowest loss, timing order", elapsed, &problems);
}

#[test]
fn criterion_10_subsampled_gradient_supports() {
    let _g = serial();
    let start = Instant::now();
    let spec = ExperimentSpec::preset(ExperimentName::CircleSubsample, scratch_dir("c10"));
    let s = subsample_supports(&spec, 100).unwrap();
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    if s.diffeo < 10 * s.vanilla {
        problems.push(format!("diffeo support {} < 10 × vanilla {}", s.diffeo, s.vanilla));
    }
    if s.distributed < 10 * s.vanilla {
        problems.push(format!("distributed support {} < 10 × vanilla {}", s.distributed, s.vanilla));
    }
    if elapsed > Duration::from_secs(120) {
        problems.push(format!("took {elapsed:?}, limit 2 min"));
    }
    verdict(
        10,
        &format!("supports on n = 2000: vanilla {}, diffeo {}, distributed {}", s.vanilla, s.diffeo, s.distributed),
        elapsed,
        &problems,
    );
}

//! Descent driver behaviour: hand-computable iterates, determinism, and the
//! artifacts written by the experiment harness.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use topo_opt::experiments::{gen_circle, run_experiment, ExperimentName, ExperimentSpec};
use topo_opt::filtrations::RawValues;
use topo_opt::losses::{Objective, Regularizer};
use topo_opt::optimizer::{descend, DescentConfig, Method, Schedule, StopReason};
use topo_opt::persistence::PersistenceDiagram;
use topo_opt::SimplicialComplex;

/// L(θ) = Σ θ_i² on isolated vertices: no topology, only the confinement
/// term with a zero-width box.
fn quadratic(n: u32) -> Objective {
    let verts: Vec<Vec<u32>> = (0..n).map(|v| vec![v]).collect();
    let k = Arc::new(SimplicialComplex::from_simplices(&verts, None).unwrap());
    Objective::new(Arc::new(RawValues::new(k)), vec![], Regularizer::Box { half_width: 0.0 })
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("topo_opt_descent_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn quadratic_surrogate_follows_hand_computed_iterates() {
    let obj = quadratic(3);
    let theta0 = [1.0, -2.0, 0.5];
    let cfg = DescentConfig::new(Method::Vanilla, 4, 0.1, 0.5, 0);
    let out = descend(&theta0, &obj, &cfg).unwrap();
    // θ_{k+1} = θ_k − η γ^k · 2 θ_k
    let mut expect = theta0.to_vec();
    let mut losses = vec![expect.iter().map(|x| x * x).sum::<f64>()];
    for k in 0..4 {
        let step = 0.1 * 0.5f64.powi(k);
        for x in &mut expect {
            *x -= step * 2.0 * *x;
        }
        losses.push(expect.iter().map(|x| x * x).sum());
    }
    for (a, b) in out.theta.iter().zip(&expect) {
        assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0), "{a} vs {b}");
    }
    assert_eq!(out.trace.rows.len(), 5);
    for (row, l) in out.trace.rows.iter().zip(&losses) {
        assert!((row.loss - l).abs() <= 1e-15 * l.max(1.0));
    }
    assert_eq!(out.stop, StopReason::Budget);
}

#[test]
fn harmonic_schedule_iterates() {
    let obj = quadratic(1);
    let mut cfg = DescentConfig::new(Method::Vanilla, 3, 0.25, 1.0, 0);
    cfg.schedule = Schedule::Harmonic;
    let out = descend(&[1.0], &obj, &cfg).unwrap();
    // steps 0.25, 0.125, 0.25/3
    let expect = (1.0 - 0.5) * (1.0 - 0.25) * (1.0 - 0.5 / 3.0);
    assert!((out.theta[0] - expect).abs() < 1e-15);
}

#[test]
fn zero_gradient_leaves_parameters_unchanged() {
    let obj = quadratic(4);
    let theta0 = [0.0; 4];
    let out = descend(&theta0, &obj, &DescentConfig::new(Method::Vanilla, 5, 0.2, 1.0, 3)).unwrap();
    assert_eq!(out.theta, theta0.to_vec());
    assert!(out.trace.rows.iter().all(|r| r.loss == 0.0 && r.grad_norm == 0.0));
}

#[test]
fn invalid_configurations_are_rejected() {
    let obj = quadratic(2);
    assert!(descend(&[1.0, 1.0], &obj, &DescentConfig::new(Method::Vanilla, 0, 0.1, 1.0, 0)).is_err());
    assert!(descend(&[1.0, 1.0], &obj, &DescentConfig::new(Method::Vanilla, 3, -0.1, 1.0, 0)).is_err());
    assert!(descend(&[1.0, 1.0], &obj, &DescentConfig::new(Method::Vanilla, 3, 0.1, 1.5, 0)).is_err());
}

#[test]
fn non_finite_loss_stops_the_descent() {
    // a huge step on the quadratic overflows after two iterations
    let obj = quadratic(1);
    let out = descend(&[1e150], &obj, &DescentConfig::new(Method::Vanilla, 50, 1e3, 1.0, 0));
    match out {
        Ok(o) => assert!(matches!(o.stop, StopReason::NonFinite { .. }), "{:?}", o.stop),
        Err(e) => panic!("expected a non-finite stop, got error {e}"),
    }
}

#[test]
fn traces_are_deterministic_under_a_fixed_seed() {
    let mut spec = ExperimentSpec::preset(ExperimentName::CircleOutlier, scratch("det"));
    spec.n_points = 30;
    let x0 = spec.initial_cloud().unwrap();
    let obj = spec.objective().unwrap();
    for method in ["vanilla", "stratified", "big_step", "continuation", "diffeo"] {
        let mut cfg = spec.descent_config(method, 0.128, 0.9).unwrap();
        cfg.steps = 4;
        let a = descend(x0.as_slice(), &obj, &cfg).unwrap();
        let b = descend(x0.as_slice(), &obj, &cfg).unwrap();
        assert!(a.trace.same_values(&b.trace), "{method}: traces differ");
        assert_eq!(a.theta, b.theta, "{method}: final parameters differ");
    }
}

#[test]
fn gradient_noise_is_seeded() {
    let obj = quadratic(3);
    let mut cfg = DescentConfig::new(Method::Vanilla, 3, 0.1, 1.0, 11);
    cfg.noise_std = 0.05;
    let a = descend(&[1.0, 2.0, 3.0], &obj, &cfg).unwrap();
    let b = descend(&[1.0, 2.0, 3.0], &obj, &cfg).unwrap();
    assert_eq!(a.theta, b.theta);
    cfg.seed = 12;
    let c = descend(&[1.0, 2.0, 3.0], &obj, &cfg).unwrap();
    assert_ne!(a.theta, c.theta);
}

fn small_spec(out: &Path) -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(ExperimentName::CircleOutlier, out);
    spec.n_points = 30;
    spec.steps = 3;
    spec.grid = vec![(0.128, 1.0), (0.064, 0.9)];
    spec.methods = vec!["vanilla".into(), "stratified".into(), "big_step".into()];
    spec
}

#[test]
fn manifests_are_byte_identical_across_runs() {
    let (d1, d2) = (scratch("m1"), scratch("m2"));
    let r1 = run_experiment(&small_spec(&d1)).unwrap();
    let r2 = run_experiment(&small_spec(&d2)).unwrap();
    assert_eq!(fs::read(d1.join("manifest.txt")).unwrap(), fs::read(d2.join("manifest.txt")).unwrap());
    for (a, b) in r1.cells.iter().zip(&r2.cells) {
        assert!(a.outcome.trace.same_values(&b.outcome.trace));
    }
    // snapshots and diagrams carry no timing and must agree byte for byte
    let cell = "vanilla/lr_0.128_decay_1";
    for f in ["snapshot_00.csv", "snapshot_01.csv", "diagram_01.csv"] {
        assert_eq!(fs::read(d1.join(cell).join(f)).unwrap(), fs::read(d2.join(cell).join(f)).unwrap(), "{f}");
    }
    let _ = fs::remove_dir_all(&d1);
    let _ = fs::remove_dir_all(&d2);
}

#[test]
fn emitted_files_are_complete_and_diagrams_round_trip() {
    let dir = scratch("files");
    let spec = small_spec(&dir);
    let report = run_experiment(&spec).unwrap();
    assert_eq!(report.cells.len(), 6);
    assert!(dir.join("timing.csv").exists());
    let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    for m in &spec.methods {
        assert!(manifest.contains(&format!("{m}.best_lr = ")), "manifest lacks {m}");
    }
    let mut diagrams = 0;
    for m in &spec.methods {
        for (lr, g) in &spec.grid {
            let cell = dir.join(m).join(format!("lr_{lr}_decay_{g}"));
            let trace = fs::read_to_string(cell.join("trace.csv")).unwrap();
            assert_eq!(trace.lines().next(), Some("step,loss,grad_norm,time_ms"));
            for step in [0, 1] {
                assert!(cell.join(format!("snapshot_{step:02}.csv")).exists());
                let path = cell.join(format!("diagram_{step:02}.csv"));
                let bytes = fs::read(&path).unwrap();
                let dgm = PersistenceDiagram::read_text(bytes.as_slice()).unwrap();
                let mut again = Vec::new();
                dgm.write_text(&mut again).unwrap();
                assert_eq!(again, bytes, "{} does not round-trip", path.display());
                diagrams += 1;
            }
        }
    }
    assert_eq!(diagrams, 12);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn best_cell_has_the_lowest_final_loss() {
    let dir = scratch("best");
    let report = run_experiment(&small_spec(&dir)).unwrap();
    for (m, i) in &report.best {
        let best = report.cells[*i].final_loss();
        for c in report.cells.iter().filter(|c| &c.method == m) {
            assert!(best <= c.final_loss());
        }
    }
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn circle_generator_is_reproducible() {
    assert_eq!(gen_circle(100, 0.05, true, 5).unwrap(), gen_circle(100, 0.05, true, 5).unwrap());
    assert_ne!(gen_circle(100, 0.05, true, 5).unwrap(), gen_circle(100, 0.05, true, 6).unwrap());
}

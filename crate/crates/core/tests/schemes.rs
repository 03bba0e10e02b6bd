//! Behaviour of the gradient schemes on small point clouds.

use std::sync::Arc;

use rand::Rng;
use topo_opt::experiments::{ExperimentName, ExperimentSpec};
use topo_opt::filtrations::{FiltrationFamily, PointCloud, VietorisRips};
use topo_opt::losses::{lift, points_of, DiagramLoss, Objective, Regularizer};
use topo_opt::persistence::persistence_pairs;
use topo_opt::schemes::bigstep::{big_step_gradient, BigStepConfig};
use topo_opt::schemes::continuation::continuation_direction;
use topo_opt::schemes::diffeo::diffeo_interpolate;
use topo_opt::schemes::distributed::distributed_gradient;
use topo_opt::schemes::stratified::{
    goldstein_check, min_norm_point, sample_strata, stratified_gradient, stratified_gradient_const, StratifiedConfig,
};
use topo_opt::schemes::{vanilla_gradient, ParamGradient};
use topo_opt::validation::rng;

/// A slightly irregular square: one generic H1 feature.
fn quad() -> Vec<f64> {
    vec![0.0, 0.0, 1.0, 0.0, 1.05, 0.98, -0.02, 1.03]
}

fn noisy_circle(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .flat_map(|_| {
            let a: f64 = r.random_range(0.0..std::f64::consts::TAU);
            let rad = 1.0 + 0.1 * r.random_range(-1.0..1.0);
            [rad * a.cos(), rad * a.sin()]
        })
        .collect()
}

fn h1_points(fam: &VietorisRips, x: &[f64]) -> Vec<topo_opt::persistence::DiagramPoint> {
    let ev = fam.evaluate(x).unwrap();
    points_of(&lift(&ev.filtration, &persistence_pairs(&ev.filtration), 1))
}

#[test]
fn big_step_with_a_tiny_step_is_the_vanilla_gradient() {
    let x = noisy_circle(12, 1);
    let fam = Arc::new(VietorisRips::new(12, 2, 2).unwrap());
    let obj = Objective::single(fam, 1, DiagramLoss::NegDistanceToEmpty);
    let (v, _) = vanilla_gradient(&obj, &x).unwrap();
    // no value lies between f(τ) and a target this close: moving sets are {τ}
    let b = big_step_gradient(&obj, &x, 1e-12, &BigStepConfig::default()).unwrap();
    for (a, c) in v.values.iter().zip(&b.gradient.values) {
        assert!((a - c).abs() < 1e-12, "{a} vs {c}");
    }
}

#[test]
fn big_step_moves_more_points_than_vanilla_on_the_circle() {
    let spec = ExperimentSpec::preset(ExperimentName::CircleOutlier, std::env::temp_dir());
    let x0 = spec.initial_cloud().unwrap();
    let obj = spec.objective().unwrap();
    let (v, _) = vanilla_gradient(&obj, x0.as_slice()).unwrap();
    let b = big_step_gradient(&obj, x0.as_slice(), 0.064, &BigStepConfig::default()).unwrap();
    assert!(b.gradient.support().len() > v.support().len(), "{} vs {}", b.gradient.support().len(), v.support().len());
}

#[test]
fn continuation_at_the_target_does_not_move() {
    let x = quad();
    let fam = Arc::new(VietorisRips::new(4, 2, 2).unwrap());
    let target = h1_points(&fam, &x);
    let obj = Objective::single(fam, 1, DiagramLoss::DistanceToTarget { target });
    let step = continuation_direction(&obj, &x).unwrap();
    assert!(step.velocity.iter().all(|v| v.abs() < 1e-15));
    assert!(step.direction.norm() < 1e-12);
}

#[test]
fn continuation_raises_the_death_along_the_death_edge() {
    let x = quad();
    let fam = Arc::new(VietorisRips::new(4, 2, 2).unwrap());
    let before = h1_points(&fam, &x);
    assert_eq!(before.len(), 1);
    let delta = 0.05;
    let mut target = before.clone();
    target[0].death += delta;
    let obj = Objective::single(fam.clone(), 1, DiagramLoss::DistanceToTarget { target });
    let step = continuation_direction(&obj, &x).unwrap();
    // prescribed velocity: birth fixed, death up by δ
    assert!(step.velocity[0].abs() < 1e-12 && (step.velocity[1] - delta).abs() < 1e-12);
    // to first order the bar follows the velocity
    let h = 1e-6;
    let moved: Vec<f64> = x.iter().zip(&step.direction.values).map(|(a, d)| a + h * d).collect();
    let after = h1_points(&fam, &moved);
    assert!(((after[0].birth - before[0].birth) / h).abs() < 1e-5);
    assert!(((after[0].death - before[0].death) / h - delta).abs() < 1e-5);
    // the endpoints of the death edge separate at rate δ, and the minimal-norm
    // step leaves every vertex outside the birth edge and death triangle in place
    let ev = fam.evaluate(&x).unwrap();
    let pairing = persistence_pairs(&ev.filtration);
    let lp = lift(&ev.filtration, &pairing, 1)[0];
    // the death simplex is a triangle whose value comes from its longest edge
    let tri = fam.complex().simplex(lp.death_simplex).vertices().to_vec();
    let len = |a: u32, b: u32| (x[2 * a as usize] - x[2 * b as usize]).hypot(x[2 * a as usize + 1] - x[2 * b as usize + 1]);
    let edge = [(tri[0], tri[1]), (tri[0], tri[2]), (tri[1], tri[2])]
        .into_iter()
        .max_by(|p, q| len(p.0, p.1).total_cmp(&len(q.0, q.1)))
        .map(|(a, b)| vec![a, b])
        .unwrap();
    let (i, j) = (edge[0] as usize, edge[1] as usize);
    let e: Vec<f64> = (0..2).map(|c| x[2 * j + c] - x[2 * i + c]).collect();
    let dv: Vec<f64> = (0..2).map(|c| step.direction.values[2 * j + c] - step.direction.values[2 * i + c]).collect();
    // Rips values are half edge lengths
    let rate = 0.5 * (e[0] * dv[0] + e[1] * dv[1]) / e[0].hypot(e[1]);
    assert!((rate - delta).abs() < 1e-9, "rate {rate}, edge {edge:?}, triangle {tri:?}, direction {:?}", step.direction.values);
    let mut touched = tri.clone();
    touched.extend_from_slice(fam.complex().simplex(lp.birth_simplex).vertices());
    for v in (0..4u32).filter(|v| !touched.contains(v)) {
        let (a, b) = (step.direction.values[2 * v as usize], step.direction.values[2 * v as usize + 1]);
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12, "vertex {v} moves");
    }
}

#[test]
fn single_center_field_is_a_bump() {
    let cloud = vec![0.0, 0.0, 3.0, 3.0];
    let g = ParamGradient::new(vec![0.5, -1.0, 0.0, 0.0], 2);
    let field = diffeo_interpolate(&cloud, &g, 0.2, 0.0).unwrap();
    assert_eq!(field.at(&[0.0, 0.0]), vec![0.5, -1.0]);
    let near = field.at(&[0.2, 0.0]);
    let k = (-0.5f64).exp();
    assert!((near[0] - 0.5 * k).abs() < 1e-15 && (near[1] + k).abs() < 1e-15);
    // far from the center the Gaussian tail is e^{-225} relative to the center
    assert!(field.at(&[3.0, 3.0]).iter().all(|v| v.abs() < 1e-90));
}

#[test]
fn diffeo_field_is_smooth_with_bounded_jacobian() {
    let mut r = rng(4);
    let cloud: Vec<f64> = (0..40).map(|_| r.random_range(0.0..1.0)).collect();
    let mut g = ParamGradient::zeros(40, 2);
    for i in [1, 5, 9] {
        g.values[2 * i] = r.random_range(-1.0..1.0);
        g.values[2 * i + 1] = r.random_range(-1.0..1.0);
    }
    let sigma = 0.3;
    let field = diffeo_interpolate(&cloud, &g, sigma, 0.0).unwrap();
    // envelope: each term's derivative is bounded by |α_i| e^{-1/2} / σ
    let bound: f64 = field.coeffs.iter().map(|a| a[0].hypot(a[1])).sum::<f64>() * (-0.5f64).exp() / sigma;
    let h = 1e-6;
    for _ in 0..100 {
        let p = [r.random_range(-0.5..1.5), r.random_range(-0.5..1.5)];
        for c in 0..2 {
            let mut a = p;
            let mut b = p;
            a[c] += h;
            b[c] -= h;
            let (fa, fb) = (field.at(&a), field.at(&b));
            for k in 0..2 {
                assert!(((fa[k] - fb[k]) / (2.0 * h)).abs() <= bound * (1.0 + 1e-6));
            }
        }
    }
}

#[test]
fn distributed_gradient_is_seeded_and_supports_grow() {
    let spec = ExperimentSpec::preset(ExperimentName::CircleSubsample, std::env::temp_dir());
    let x = spec.initial_cloud().unwrap();
    let sub = spec.sub_objective().unwrap();
    let one = |seed: u64| distributed_gradient(&sub, x.as_slice(), 2, 1, Regularizer::None, &mut rng(seed)).unwrap();
    assert_eq!(one(3).values, one(3).values);
    let single = one(3).support().len();
    let ten = distributed_gradient(&sub, x.as_slice(), 2, 10, Regularizer::None, &mut rng(3)).unwrap();
    assert!(ten.support().len() > single, "{} vs {single}", ten.support().len());
}

#[test]
fn strata_sampling_finds_ties_and_respects_radius() {
    // the exact unit square sits on a tie between the two diagonals
    let square = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
    let fam = VietorisRips::new(4, 2, 2).unwrap();
    let mut r = rng(8);
    let samples = sample_strata(&fam, &square, 0.05, 6, &mut r).unwrap();
    assert!(samples.len() >= 2);
    assert_eq!(samples[0].theta, square);
    for s in &samples {
        let d: f64 = s.theta.iter().zip(&square).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(d <= 0.05 + 1e-12);
    }
    assert_eq!(sample_strata(&fam, &square, 0.05, 1, &mut r).unwrap().len(), 1);
    // a generic configuration and a tiny radius stay in one stratum
    let x = quad();
    assert_eq!(sample_strata(&fam, &x, 1e-9, 5, &mut r).unwrap().len(), 1);
}

#[test]
fn stratified_gradient_in_one_stratum_is_the_vanilla_gradient() {
    let x = quad();
    let fam = Arc::new(VietorisRips::new(4, 2, 2).unwrap());
    let obj = Objective::single(
        fam,
        1,
        DiagramLoss::TotalPersistence { sign: 1.0, exponent: 2.0, death_only: false },
    );
    let (v, _) = vanilla_gradient(&obj, &x).unwrap();
    let cfg = StratifiedConfig { lipschitz: 10.0, ..Default::default() };
    let step = stratified_gradient(&obj, &x, 1e-4, &cfg, &mut rng(1)).unwrap();
    assert!(!step.stationary && step.alpha > 0.0);
    for (a, b) in v.values.iter().zip(&step.direction.values) {
        assert!((a - b).abs() < 1e-12);
    }
    // the step satisfies the decrease inequality
    let moved: Vec<f64> = x.iter().zip(&step.direction.values).map(|(a, d)| a - step.alpha * d).collect();
    let n2 = step.direction.norm().powi(2);
    assert!(obj.value(&moved).unwrap() <= obj.value(&x).unwrap() - cfg.beta * step.alpha * n2);
    let c = stratified_gradient_const(&obj, &x, 1e-4, &cfg, &mut rng(1)).unwrap();
    assert_eq!(c.direction.values, step.direction.values);
}

#[test]
fn goldstein_check_on_a_generic_point_reports_the_gradient_norm() {
    let x = quad();
    let fam = Arc::new(VietorisRips::new(4, 2, 2).unwrap());
    let obj = Objective::single(fam, 1, DiagramLoss::NegDistanceToEmpty);
    let (v, _) = vanilla_gradient(&obj, &x).unwrap();
    let (stationary, norm) = goldstein_check(&obj, &x, 1e-9, 1e-3, 4, &mut rng(2)).unwrap();
    assert!(!stationary);
    assert!((norm - v.norm()).abs() < 1e-12);
}

#[test]
fn min_norm_point_satisfies_the_wolfe_criterion() {
    let mut r = rng(6);
    for _ in 0..100 {
        let k = r.random_range(1..8);
        let d = r.random_range(1..6);
        let pts: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let (w, x) = min_norm_point(&pts);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12 && w.iter().all(|&v| v >= 0.0));
        let xx: f64 = x.iter().map(|v| v * v).sum();
        for p in &pts {
            let xp: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
            assert!(xp - xx >= -1e-9, "⟨x, p − x⟩ = {}", xp - xx);
        }
    }
}

#[test]
fn point_cloud_parameters_have_rows_of_the_ambient_dimension() {
    let x = PointCloud::new(4, 2, quad()).unwrap();
    let fam = Arc::new(VietorisRips::new(4, 2, 2).unwrap());
    let obj = Objective::single(fam, 1, DiagramLoss::NegDistanceToEmpty);
    let (g, _) = vanilla_gradient(&obj, x.as_slice()).unwrap();
    assert_eq!(g.row_width, 2);
    assert!(g.support().len() <= 4 && !g.support().is_empty());
}

//! Stratified gradient sampling: collect vanilla gradients from the strata
//! met in a small ball around θ and descend along the minimal-norm element
//! of their convex hull.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{norm, vanilla_gradient, ParamGradient};
use crate::complex::OrderingSignature;
use crate::error::{Result, TopoError};
use crate::filtrations::{signature_of, Evaluation, FiltrationFamily};
use crate::persistence::persistence_pairs;
use crate::losses::Objective;

/// Parameters of the stratified scheme.
#[derive(Clone, Debug)]
pub struct StratifiedConfig {
    /// Number of distinct strata sampled per round (θ's own included).
    pub samples: usize,
    /// Sufficient-decrease constant in (0, 1).
    pub beta: f64,
    /// Radius shrink factor in (0, 1).
    pub gamma: f64,
    /// Stationarity tolerance on the min-norm gradient.
    pub eta: f64,
    /// Lipschitz constant of the loss.
    pub lipschitz: f64,
    /// Safety cap on radius shrinks per step.
    pub max_shrinks: usize,
}

impl Default for StratifiedConfig {
    fn default() -> Self {
        StratifiedConfig { samples: 4, beta: 0.5, gamma: 0.5, eta: 1e-3, lipschitz: 1.0, max_shrinks: 60 }
    }
}

impl StratifiedConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TopoError::InvalidParameter(m.to_string()));
        if self.samples == 0 {
            return bad("stratified samples must be at least 1");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return bad("lipschitz constant must be positive");
        }
        if !(self.eta >= 0.0) {
            return bad("eta must be non-negative");
        }
        Ok(())
    }
}

/// A point of a sampled stratum, with the filtration evaluated there.
#[derive(Clone, Debug)]
pub struct StratumSample {
    pub theta: Vec<f64>,
    pub signature: OrderingSignature,
    pub eval: Evaluation,
}

/// Uniform point in the Euclidean ball of radius `r` around `center`.
pub fn sample_ball<R: Rng>(rng: &mut R, center: &[f64], r: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..center.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = norm(&dir);
    let u: f64 = rng.random();
    let rad = r * u.powf(1.0 / center.len().max(1) as f64);
    center.iter().zip(&dir).map(|(c, d)| c + if n > 0.0 { rad * d / n } else { 0.0 }).collect()
}

/// Up to `m` points from distinct strata within distance `eps` of θ,
/// θ's own stratum first. At most `20 m` random draws are made.
pub fn sample_strata<R: Rng>(
    family: &dyn FiltrationFamily,
    theta: &[f64],
    eps: f64,
    m: usize,
    rng: &mut R,
) -> Result<Vec<StratumSample>> {
    let eval = family.evaluate(theta)?;
    let own = signature_of(&eval);
    let mut seen: HashSet<OrderingSignature> = HashSet::new();
    seen.insert(own.clone());
    let mut out = vec![StratumSample { theta: theta.to_vec(), signature: own, eval }];
    let mut draws = 0;
    while out.len() < m && draws < 20 * m {
        draws += 1;
        let t = sample_ball(rng, theta, eps);
        let eval = family.evaluate(&t)?;
        let sig = signature_of(&eval);
        if seen.insert(sig.clone()) {
            out.push(StratumSample { theta: t, signature: sig, eval });
        }
    }
    Ok(out)
}

/// Minimal-norm point of the convex hull of `points` (Wolfe's algorithm).
/// Returns the convex weights and the point.
pub fn min_norm_point(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = points.len();
    assert!(k > 0, "min_norm_point needs at least one point");
    let gram: Vec<Vec<f64>> = points.iter().map(|a| points.iter().map(|b| super::dot(a, b)).collect()).collect();
    let scale = (0..k).map(|i| gram[i][i]).fold(0.0, f64::max);
    if scale == 0.0 {
        let mut w = vec![0.0; k];
        w[0] = 1.0;
        return (w, points[0].clone());
    }
    let tol = 1e-12 * scale;
    let start = (0..k).min_by(|&a, &b| gram[a][a].total_cmp(&gram[b][b])).unwrap();
    let mut active = vec![start];
    let mut lambda = vec![0.0; k];
    lambda[start] = 1.0;
    let dot_x = |lambda: &[f64], i: usize| -> f64 { (0..k).map(|s| lambda[s] * gram[s][i]).sum() };
    for _ in 0..(100 * k + 100) {
        let xx: f64 = (0..k).map(|i| lambda[i] * dot_x(&lambda, i)).sum();
        let j = (0..k).min_by(|&a, &b| dot_x(&lambda, a).total_cmp(&dot_x(&lambda, b))).unwrap();
        if xx - dot_x(&lambda, j) <= tol || active.contains(&j) {
            break;
        }
        active.push(j);
        loop {
            let mu = affine_min(&gram, &active);
            if mu.iter().all(|&v| v > 1e-14) {
                for (i, &s) in active.iter().enumerate() {
                    lambda[s] = mu[i];
                }
                break;
            }
            let mut step: f64 = 1.0;
            for (i, &s) in active.iter().enumerate() {
                if mu[i] <= 1e-14 {
                    let denom = lambda[s] - mu[i];
                    if denom > 0.0 {
                        step = step.min(lambda[s] / denom);
                    }
                }
            }
            for (i, &s) in active.iter().enumerate() {
                lambda[s] += step * (mu[i] - lambda[s]);
            }
            active.retain(|&s| lambda[s] > 1e-14);
            for s in 0..k {
                if !active.contains(&s) {
                    lambda[s] = 0.0;
                }
            }
            let total: f64 = active.iter().map(|&s| lambda[s]).sum();
            for &s in &active {
                lambda[s] /= total;
            }
            if active.len() == 1 {
                break;
            }
        }
    }
    let dim = points[0].len();
    let mut x = vec![0.0; dim];
    for (w, p) in lambda.iter().zip(points) {
        if *w != 0.0 {
            for (xi, pi) in x.iter_mut().zip(p) {
                *xi += w * pi;
            }
        }
    }
    (lambda, x)
}

/// Weights μ (summing to one) of the minimal-norm point of the affine hull
/// of the active points.
fn affine_min(gram: &[Vec<f64>], active: &[usize]) -> Vec<f64> {
    let a = active.len();
    let mut m = DMatrix::<f64>::zeros(a + 1, a + 1);
    for (i, &s) in active.iter().enumerate() {
        for (j, &t) in active.iter().enumerate() {
            m[(i, j)] = gram[s][t];
        }
        m[(i, a)] = 1.0;
        m[(a, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(a + 1);
    rhs[a] = 1.0;
    // LU is exact enough on affinely independent sets; dependent sets fall
    // back to the least-squares solution
    let sol = match m.clone().lu().solve(&rhs) {
        Some(x) if x.iter().all(|v| v.is_finite()) && (&m * &x - &rhs).amax() < 1e-10 => x,
        _ => m.svd(true, true).solve(&rhs, 1e-12).expect("svd solve with both factors"),
    };
    let mu: Vec<f64> = (0..a).map(|i| sol[i]).collect();
    let total: f64 = mu.iter().sum();
    mu.iter().map(|v| v / total).collect()
}

/// Result of one stratified gradient computation.
#[derive(Clone, Debug)]
pub struct StratifiedStep {
    /// Minimal-norm element of the sampled gradient hull.
    pub direction: ParamGradient,
    /// Step size; zero when θ was declared stationary.
    pub alpha: f64,
    /// Sampling radius actually used.
    pub epsilon: f64,
    pub strata: usize,
    pub shrinks: usize,
    pub stationary: bool,
}

/// Vanilla gradient at a sampled point, from its stored evaluation.
fn sample_gradient(obj: &Objective, s: StratumSample) -> Result<Vec<f64>> {
    let pairing = persistence_pairs(&s.eval.filtration);
    let ev = obj.evaluate_with(&s.theta, s.eval, pairing)?;
    obj.gradient(&s.theta, &ev)
}

fn hull_of<R: Rng>(obj: &Objective, theta: &[f64], eps: f64, m: usize, rng: &mut R) -> Result<(ParamGradient, usize)> {
    let samples = sample_strata(&*obj.family, theta, eps, m, rng)?;
    let count = samples.len();
    let grads: Vec<Vec<f64>> = samples.into_iter().map(|s| sample_gradient(obj, s)).collect::<Result<_>>()?;
    let (_, x) = min_norm_point(&grads);
    Ok((ParamGradient::new(x, obj.family.row_width()), count))
}

/// Stratified gradient with a controlled radius: shrink the sampling
/// radius until it is small compared to the resulting descent direction,
/// or report stationarity.
pub fn stratified_gradient<R: Rng>(obj: &Objective, theta: &[f64], eps: f64, cfg: &StratifiedConfig, rng: &mut R) -> Result<StratifiedStep> {
    cfg.validate()?;
    let factor = (1.0 - cfg.beta) / (2.0 * cfg.lipschitz);
    let mut e = eps;
    let (mut g, mut strata) = hull_of(obj, theta, e, cfg.samples, rng)?;
    let mut shrinks = 0;
    while e > factor * g.norm() {
        if g.norm() <= cfg.eta || shrinks >= cfg.max_shrinks {
            if shrinks >= cfg.max_shrinks {
                log::warn!("stratified radius shrink cap reached at radius {e}");
            }
            return Ok(StratifiedStep { direction: g, alpha: 0.0, epsilon: e, strata, shrinks, stationary: true });
        }
        // Shrink straight to the first radius the current hull would accept;
        // intermediate radii fail the guard for this hull already. The guard
        // is re-checked on a fresh sample at the new radius.
        let target = factor * g.norm();
        while e > target && shrinks < cfg.max_shrinks {
            e *= cfg.gamma;
            shrinks += 1;
        }
        (g, strata) = hull_of(obj, theta, e, cfg.samples, rng)?;
    }
    let n = g.norm();
    let alpha = if n > 0.0 { e / n } else { 0.0 };
    Ok(StratifiedStep { direction: g, alpha, epsilon: e, strata, shrinks, stationary: n == 0.0 })
}

/// Stratified gradient with a single radius adjustment: sample once at
/// radius `eps`, set the radius from the resulting direction, and keep only
/// the samples inside it.
pub fn stratified_gradient_const<R: Rng>(obj: &Objective, theta: &[f64], eps: f64, cfg: &StratifiedConfig, rng: &mut R) -> Result<StratifiedStep> {
    cfg.validate()?;
    let samples = sample_strata(&*obj.family, theta, eps, cfg.samples, rng)?;
    let offsets: Vec<f64> = samples.iter().map(|s| super::dist(&s.theta, theta)).collect();
    let grads: Vec<Vec<f64>> = samples.into_iter().map(|s| sample_gradient(obj, s)).collect::<Result<_>>()?;
    let (_, x) = min_norm_point(&grads);
    let e = ((1.0 - cfg.beta) / (2.0 * cfg.lipschitz) * norm(&x)).min(eps);
    let kept: Vec<Vec<f64>> = offsets.iter().zip(grads).filter(|(o, _)| **o <= e).map(|(_, g)| g).collect();
    let (_, x) = min_norm_point(&kept);
    let g = ParamGradient::new(x, obj.family.row_width());
    let n = g.norm();
    let stationary = n <= cfg.eta;
    let alpha = if stationary || n == 0.0 { 0.0 } else { e / n };
    Ok(StratifiedStep { direction: g, alpha, epsilon: e, strata: kept.len(), shrinks: 0, stationary })
}

/// Whether θ is (ε, η)-stationary in the Goldstein sense, judged from the
/// sampled strata; also returns the min-norm gradient norm.
pub fn goldstein_check<R: Rng>(obj: &Objective, theta: &[f64], eps: f64, eta: f64, m: usize, rng: &mut R) -> Result<(bool, f64)> {
    let (g, _) = hull_of(obj, theta, eps, m, rng)?;
    let n = g.norm();
    Ok((n <= eta, n))
}

/// Heuristic Lipschitz constant: twice the largest gradient norm seen at θ
/// and at `samples` points drawn from the ball of radius `radius`.
pub fn estimate_lipschitz<R: Rng>(obj: &Objective, theta: &[f64], radius: f64, samples: usize, rng: &mut R) -> Result<f64> {
    let mut best = vanilla_gradient(obj, theta)?.0.norm();
    for _ in 0..samples {
        let t = sample_ball(rng, theta, radius);
        best = best.max(vanilla_gradient(obj, &t)?.0.norm());
    }
    Ok((2.0 * best).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Projected gradient on the simplex, as an independent reference.
    fn min_norm_reference(points: &[Vec<f64>]) -> f64 {
        let k = points.len();
        let mut w = vec![1.0 / k as f64; k];
        for _ in 0..20000 {
            let x: Vec<f64> = (0..points[0].len()).map(|c| (0..k).map(|i| w[i] * points[i][c]).sum()).collect();
            let g: Vec<f64> = points.iter().map(|p| 2.0 * super::super::dot(p, &x)).collect();
            let mut y: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - 0.05 * b).collect();
            // Euclidean projection on the probability simplex
            let mut s = y.clone();
            s.sort_by(|a, b| b.total_cmp(a));
            let mut acc = 0.0;
            let mut theta = 0.0;
            for (i, v) in s.iter().enumerate() {
                acc += v;
                let t = (acc - 1.0) / (i + 1) as f64;
                if v - t > 0.0 {
                    theta = t;
                }
            }
            for v in &mut y {
                *v = (*v - theta).max(0.0);
            }
            w = y;
        }
        let x: Vec<f64> = (0..points[0].len()).map(|c| (0..k).map(|i| w[i] * points[i][c]).sum()).collect();
        norm(&x)
    }

    #[test]
    fn min_norm_small_cases() {
        let (_, x) = min_norm_point(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
        let (_, x) = min_norm_point(&[vec![1.0, 1.0], vec![-1.0, 1.0]]);
        assert!(x[0].abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let (_, x) = min_norm_point(&[vec![1.0, 0.0], vec![-1.0, 0.5], vec![0.0, -1.0]]);
        assert!(norm(&x) < 1e-12);
        let (w, x) = min_norm_point(&[vec![2.0, 3.0]]);
        assert_eq!((w, x), (vec![1.0], vec![2.0, 3.0]));
    }

    #[test]
    fn min_norm_matches_reference() {
        let mut rng = crate::validation::rng(5);
        for _ in 0..30 {
            let k = rng.random_range(1..6);
            let d = rng.random_range(1..5);
            let pts: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random_range(-1.0..2.0)).collect()).collect();
            let (w, x) = min_norm_point(&pts);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(w.iter().all(|&v| v >= 0.0));
            assert!((norm(&x) - min_norm_reference(&pts)).abs() < 1e-6, "{pts:?}");
        }
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = crate::validation::rng(1);
        for _ in 0..100 {
            let p = sample_ball(&mut rng, &[1.0, 2.0, 3.0], 0.5);
            assert!(super::super::dist(&p, &[1.0, 2.0, 3.0]) <= 0.5);
        }
    }
}

//! Topological losses on ordinary diagrams, their diagram-coordinate
//! gradients, and the chain rule back to filtration parameters.

use std::sync::Arc;

use crate::complex::Filtration;
use crate::error::{Result, TopoError};
use crate::filtrations::{Evaluation, FiltrationFamily};
use crate::metrics::{diagonal_projection, fg_distance};
use crate::persistence::{persistence_pairs, DiagramPoint, PersistencePairing};

/// Points below this persistence are dropped before losses are evaluated.
pub const MIN_PERSISTENCE: f64 = 1e-12;

/// Per diagram point, (∂L/∂b, ∂L/∂d).
pub type DiagramGradient = Vec<[f64; 2]>;

/// A diagram point together with the simplices that create and destroy it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftPoint {
    pub birth_simplex: usize,
    pub death_simplex: usize,
    pub point: DiagramPoint,
}

/// Ordinary points of dimension `p` in pairing order, with persistence at
/// least [`MIN_PERSISTENCE`].
pub fn lift(f: &Filtration, pairing: &PersistencePairing, p: usize) -> Vec<LiftPoint> {
    pairing
        .pairs_in(p)
        .iter()
        .map(|&(b, d)| LiftPoint {
            birth_simplex: b,
            death_simplex: d,
            point: DiagramPoint::new(f.value(b), f.value(d)),
        })
        .filter(|x| x.point.persistence() >= MIN_PERSISTENCE)
        .collect()
}

pub fn points_of(lift: &[LiftPoint]) -> Vec<DiagramPoint> {
    lift.iter().map(|x| x.point).collect()
}

/// sign · ½ Σ (d − b)^exponent. With `death_only`, birth derivatives are
/// zeroed.
pub fn total_persistence(a: &[DiagramPoint], sign: f64, exponent: f64, death_only: bool) -> (f64, DiagramGradient) {
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(a.len());
    for x in a {
        let pers = x.death - x.birth;
        value += 0.5 * pers.powf(exponent);
        let g = sign * 0.5 * exponent * pers.powf(exponent - 1.0);
        grad.push([if death_only { 0.0 } else { -g }, g]);
    }
    (sign * value, grad)
}

/// Σ (d − b) over points with persistence strictly below `eta`.
pub fn simplification_loss(a: &[DiagramPoint], eta: f64) -> (f64, DiagramGradient) {
    let mut value = 0.0;
    let grad = a
        .iter()
        .map(|x| {
            let pers = x.death - x.birth;
            if pers.abs() < eta {
                value += pers;
                [-1.0, 1.0]
            } else {
                [0.0, 0.0]
            }
        })
        .collect();
    (value, grad)
}

/// ½ FG₂(α, β)², gradient x_i − π(x_i) under the optimal matching.
pub fn distance_to_target(a: &[DiagramPoint], target: &[DiagramPoint]) -> (f64, DiagramGradient) {
    let (d, m) = fg_distance(a, target, 2.0, 2.0);
    let partner = m.partner_of_a(a.len());
    let grad = a
        .iter()
        .zip(partner)
        .map(|(x, p)| {
            let y = match p {
                Some(j) => target[j],
                None => diagonal_projection(x),
            };
            [x.birth - y.birth, x.death - y.death]
        })
        .collect();
    (0.5 * d * d, grad)
}

/// −FG₂(α, ∅) = −(Σ (d − b)²/2)^{1/2}.
pub fn neg_distance_to_empty(a: &[DiagramPoint]) -> (f64, DiagramGradient) {
    let s: f64 = a.iter().map(|x| 0.5 * (x.death - x.birth).powi(2)).sum();
    if s == 0.0 {
        return (0.0, vec![[0.0, 0.0]; a.len()]);
    }
    let r = s.sqrt();
    let grad = a
        .iter()
        .map(|x| {
            let g = (x.death - x.birth) / (2.0 * r);
            [g, -g]
        })
        .collect();
    (-r, grad)
}

/// ‖p₀ − q₀‖ for the point of the pair (birth, death) in `lift`.
pub fn singleton_loss(lift: &[LiftPoint], birth: usize, death: usize, q0: [f64; 2]) -> Result<(f64, DiagramGradient)> {
    let idx = lift
        .iter()
        .position(|x| x.birth_simplex == birth && x.death_simplex == death)
        .ok_or(TopoError::NotAPair { birth, death })?;
    let p = lift[idx].point;
    let (u, v) = (p.birth - q0[0], p.death - q0[1]);
    let n = u.hypot(v);
    let mut grad = vec![[0.0, 0.0]; lift.len()];
    if n > 0.0 {
        grad[idx] = [u / n, v / n];
    }
    Ok((n, grad))
}

/// Σ_x φ(x) on a grid, φ a Gaussian bump of width `s` centered at x.
/// Returns the vector and, per point, the gradient of every grid entry
/// with respect to (b, d).
pub fn linear_vectorization(a: &[DiagramPoint], grid: &[[f64; 2]], s: f64) -> (Vec<f64>, Vec<Vec<[f64; 2]>>) {
    let mut out = vec![0.0; grid.len()];
    let mut jac = Vec::with_capacity(a.len());
    let s2 = s * s;
    for x in a {
        let mut rows = Vec::with_capacity(grid.len());
        for (k, g) in grid.iter().enumerate() {
            let (u, v) = (g[0] - x.birth, g[1] - x.death);
            let phi = (-(u * u + v * v) / (2.0 * s2)).exp();
            out[k] += phi;
            rows.push([phi * u / s2, phi * v / s2]);
        }
        jac.push(rows);
    }
    (out, jac)
}

/// A loss on the ordinary diagram of one homology dimension.
#[derive(Clone, Debug)]
pub enum DiagramLoss {
    TotalPersistence { sign: f64, exponent: f64, death_only: bool },
    Simplification { eta: f64 },
    DistanceToTarget { target: Vec<DiagramPoint> },
    /// −FG₂(α, ∅).
    NegDistanceToEmpty,
    /// ‖p₀ − q₀‖ for the pair (birth, death) of simplex ids.
    Singleton { birth: usize, death: usize, target: [f64; 2] },
}

impl DiagramLoss {
    pub fn eval(&self, lift: &[LiftPoint]) -> Result<(f64, DiagramGradient)> {
        let pts = points_of(lift);
        Ok(match self {
            DiagramLoss::TotalPersistence { sign, exponent, death_only } => {
                total_persistence(&pts, *sign, *exponent, *death_only)
            }
            DiagramLoss::Simplification { eta } => simplification_loss(&pts, *eta),
            DiagramLoss::DistanceToTarget { target } => distance_to_target(&pts, target),
            DiagramLoss::NegDistanceToEmpty => neg_distance_to_empty(&pts),
            DiagramLoss::Singleton { birth, death, target } => singleton_loss(lift, *birth, *death, *target)?,
        })
    }
}

/// Σ over diagram points of ∂L/∂b · ∇θ f(birth) + ∂L/∂d · ∇θ f(death).
pub fn compose_gradient(
    dgm_grad: &[[f64; 2]],
    lift: &[LiftPoint],
    family: &dyn FiltrationFamily,
    theta: &[f64],
    eval: &Evaluation,
) -> Result<Vec<f64>> {
    if dgm_grad.len() != lift.len() {
        return Err(TopoError::LengthMismatch { expected: lift.len(), got: dgm_grad.len() });
    }
    let mut g = vec![0.0; family.num_params()];
    for (dg, x) in dgm_grad.iter().zip(lift) {
        for (coef, s) in [(dg[0], x.birth_simplex), (dg[1], x.death_simplex)] {
            if coef != 0.0 {
                for (i, v) in family.simplex_gradient(theta, eval, s) {
                    g[i] += coef * v;
                }
            }
        }
    }
    Ok(g)
}

/// Soft confinement of parameters: Σ_c (|θ_c| − w)₊².
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    None,
    Box { half_width: f64 },
}

impl Regularizer {
    pub fn value(&self, theta: &[f64]) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::Box { half_width } => theta.iter().map(|x| (x.abs() - half_width).max(0.0).powi(2)).sum(),
        }
    }

    pub fn add_gradient(&self, theta: &[f64], g: &mut [f64]) {
        if let Regularizer::Box { half_width } = *self {
            for (gi, x) in g.iter_mut().zip(theta) {
                let e = x.abs() - half_width;
                if e > 0.0 {
                    *gi += 2.0 * e * x.signum();
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct LossTerm {
    pub dim: usize,
    pub loss: DiagramLoss,
    pub weight: f64,
}

/// L(θ) = Σ_terms weight · loss(Dgm_dim(F(θ))) + Reg(θ).
#[derive(Clone)]
pub struct Objective {
    pub family: Arc<dyn FiltrationFamily>,
    pub terms: Vec<LossTerm>,
    pub regularizer: Regularizer,
}

/// Everything computed while evaluating an objective at θ.
#[derive(Clone, Debug)]
pub struct ObjectiveEval {
    pub loss: f64,
    pub topo_loss: f64,
    pub eval: Evaluation,
    pub pairing: PersistencePairing,
    /// per term: lift and diagram gradient (weight included)
    pub lifts: Vec<Vec<LiftPoint>>,
    pub dgm_grads: Vec<DiagramGradient>,
}

impl Objective {
    pub fn new(family: Arc<dyn FiltrationFamily>, terms: Vec<LossTerm>, regularizer: Regularizer) -> Self {
        Objective { family, terms, regularizer }
    }

    /// A single unweighted term.
    pub fn single(family: Arc<dyn FiltrationFamily>, dim: usize, loss: DiagramLoss) -> Self {
        Self::new(family, vec![LossTerm { dim, loss, weight: 1.0 }], Regularizer::None)
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<ObjectiveEval> {
        let eval = self.family.evaluate(theta)?;
        let pairing = persistence_pairs(&eval.filtration);
        self.evaluate_with(theta, eval, pairing)
    }

    /// Evaluation reusing a precomputed filtration and pairing.
    pub fn evaluate_with(&self, theta: &[f64], eval: Evaluation, pairing: PersistencePairing) -> Result<ObjectiveEval> {
        let mut topo = 0.0;
        let mut lifts = Vec::with_capacity(self.terms.len());
        let mut grads = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let l = lift(&eval.filtration, &pairing, term.dim);
            let (v, mut g) = term.loss.eval(&l)?;
            for x in &mut g {
                x[0] *= term.weight;
                x[1] *= term.weight;
            }
            topo += term.weight * v;
            lifts.push(l);
            grads.push(g);
        }
        Ok(ObjectiveEval {
            loss: topo + self.regularizer.value(theta),
            topo_loss: topo,
            eval,
            pairing,
            lifts,
            dgm_grads: grads,
        })
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.evaluate(theta)?.loss)
    }

    /// Topological part of the gradient, composed through the filtration.
    pub fn topo_gradient(&self, theta: &[f64], ev: &ObjectiveEval) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.family.num_params()];
        for (l, dg) in ev.lifts.iter().zip(&ev.dgm_grads) {
            let part = compose_gradient(dg, l, &*self.family, theta, &ev.eval)?;
            for (a, b) in g.iter_mut().zip(part) {
                *a += b;
            }
        }
        Ok(g)
    }

    /// Full gradient: topological part plus regularizer.
    pub fn gradient(&self, theta: &[f64], ev: &ObjectiveEval) -> Result<Vec<f64>> {
        let mut g = self.topo_gradient(theta, ev)?;
        self.regularizer.add_gradient(theta, &mut g);
        Ok(g)
    }
}

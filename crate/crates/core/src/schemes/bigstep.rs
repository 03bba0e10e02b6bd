//! Big-step gradients: instead of moving only the birth and death simplices
//! of a diagram point, move every simplex of its moving set, so that a
//! large step reaches the target without the pairing switching on the way.

use std::collections::HashMap;

use super::moving_set::{clip_target, moving_set_fast, PartialMatrices};
use super::ParamGradient;
use crate::complex::{total_order, Filtration};
use crate::error::{Result, TopoError};
use crate::filtrations::Witness;
use crate::losses::{DiagramLoss, Objective, ObjectiveEval};

/// Options of the big-step scheme.
#[derive(Clone, Copy, Debug)]
pub struct BigStepConfig {
    /// Count each witness once (largest push wins) rather than once per
    /// simplex sharing it.
    pub dedupe_witnesses: bool,
}

impl Default for BigStepConfig {
    fn default() -> Self {
        BigStepConfig { dedupe_witnesses: true }
    }
}

/// A big-step gradient and some bookkeeping.
#[derive(Clone, Debug)]
pub struct BigStep {
    pub gradient: ParamGradient,
    /// Simplices that received a derivative.
    pub moved_simplices: usize,
    pub eval: ObjectiveEval,
}

/// One requested move of a simplex value.
#[derive(Clone, Copy, Debug)]
struct Push {
    magnitude: f64,
    coef: f64,
    simplex: usize,
}

/// Big-step gradient at θ for step size `lr`.
///
/// Each birth or death simplex τ with derivative a is given the target
/// t = f(τ) − lr·a (the target coordinate itself for a singleton loss);
/// every simplex of the moving set of τ towards t receives the derivative
/// a. A simplex in several moving sets takes the derivative of the largest
/// push |f(σ) − t|.
pub fn big_step_gradient(obj: &Objective, theta: &[f64], lr: f64, cfg: &BigStepConfig) -> Result<BigStep> {
    big_step_gradient_with(obj, theta, obj.evaluate(theta)?, lr, cfg)
}

/// [`big_step_gradient`] from an evaluation of the objective at θ.
pub fn big_step_gradient_with(obj: &Objective, theta: &[f64], ev: ObjectiveEval, lr: f64, cfg: &BigStepConfig) -> Result<BigStep> {
    let f = &ev.eval.filtration;
    let pos = total_order(f).positions();
    let mut dims: Vec<usize> = obj.terms.iter().map(|t| t.dim).collect();
    dims.sort_unstable();
    dims.dedup();
    let mats = PartialMatrices::new(f, &ev.pairing, &dims);

    let mut pushes: HashMap<usize, Push> = HashMap::new();
    let mut by_witness: HashMap<Witness, Push> = HashMap::new();
    for (term, (lift, grads)) in obj.terms.iter().zip(ev.lifts.iter().zip(&ev.dgm_grads)) {
        for (lp, dg) in lift.iter().zip(grads) {
            let moves = [(lp.birth_simplex, lp.death_simplex, dg[0], 0), (lp.death_simplex, lp.birth_simplex, dg[1], 1)];
            for (tau, partner, coef, coord) in moves {
                if coef == 0.0 {
                    continue;
                }
                let t = match &term.loss {
                    DiagramLoss::Singleton { target, .. } => target[coord],
                    _ => f.value(tau) - lr * coef,
                };
                let (set, _) = moving_set_fast(f, &pos, &mats, tau, partner, t);
                for s in set {
                    let push = Push { magnitude: (f.value(s) - t).abs(), coef, simplex: s };
                    let slot = pushes.entry(s).or_insert(push);
                    if push.magnitude > slot.magnitude {
                        *slot = push;
                    }
                }
            }
        }
    }
    let mut chosen: Vec<Push> = if cfg.dedupe_witnesses {
        for p in pushes.values() {
            let w = ev.eval.witnesses[p.simplex];
            let slot = by_witness.entry(w).or_insert(*p);
            if p.magnitude > slot.magnitude || (p.magnitude == slot.magnitude && p.simplex < slot.simplex) {
                *slot = *p;
            }
        }
        by_witness.into_values().collect()
    } else {
        pushes.into_values().collect()
    };
    chosen.sort_unstable_by_key(|p| p.simplex);
    let mut g = vec![0.0; obj.family.num_params()];
    for p in &chosen {
        for (i, v) in obj.family.simplex_gradient(theta, &ev.eval, p.simplex) {
            g[i] += p.coef * v;
        }
    }
    obj.regularizer.add_gradient(theta, &mut g);
    Ok(BigStep {
        gradient: ParamGradient::new(g, obj.family.row_width()),
        moved_simplices: chosen.len(),
        eval: ev,
    })
}

/// Moves `tau` to (at most) `t` in a filtration given by raw values,
/// carrying its moving set along as one block that keeps its internal
/// order; `partner` is the other simplex of the pair. The target is
/// clipped so that no moved simplex passes one of its faces (moving down)
/// or cofaces (moving up). Returns the new values, which are monotone.
pub fn move_with_moving_set(f: &Filtration, tau: usize, partner: usize, t: f64) -> Result<Vec<f64>> {
    if !t.is_finite() {
        return Err(TopoError::NonFinite(t));
    }
    let pairing = crate::persistence::persistence_pairs(f);
    let (b, d) = if pairing.contains_pair(tau, partner) { (tau, partner) } else { (partner, tau) };
    if !pairing.contains_pair(b, d) {
        return Err(TopoError::NotAPair { birth: tau, death: partner });
    }
    let k = f.complex();
    let dim = k.dim_of(b);
    let pos = total_order(f).positions();
    let mats = PartialMatrices::new(f, &pairing, &[dim]);
    let v = f.value(tau);
    let down = t < v;
    let mut t = clip_target(f, tau, t);
    let mut set;
    loop {
        (set, _) = moving_set_fast(f, &pos, &mats, tau, partner, t);
        let bound = if down {
            set.iter().flat_map(|&s| k.facets(s)).map(|&s| f.value(s)).fold(f64::NEG_INFINITY, f64::max)
        } else {
            set.iter().flat_map(|&s| k.cofacets(s)).map(|&s| f.value(s)).fold(f64::INFINITY, f64::min)
        };
        let clipped = if down { t.max(bound) } else { t.min(bound) };
        if clipped == t {
            break;
        }
        log::debug!("big-step target {t} for simplex {tau} clipped to {clipped} by a face of its moving set");
        t = clipped;
    }
    let mut values = f.values().to_vec();
    if t == v {
        return Ok(values);
    }
    let win = crate::schemes::moving_set::window(f, &pos, tau, t);
    let others: Vec<usize> = win.iter().copied().filter(|s| !set.contains(s)).collect();
    let n = set.len() as f64;
    let tiny = 1e-9 * (1.0 + t.abs());
    if down {
        // block sits just above t, below every window simplex left behind
        let upper = others.iter().map(|&s| f.value(s)).fold(v, f64::min);
        let delta = ((upper - t) / (n + 1.0)).min(tiny);
        for (j, &s) in set.iter().enumerate() {
            values[s] = t + (j as f64 + 1.0) * delta;
        }
    } else {
        // block sits just below t, above every window simplex left behind
        let lower = others.iter().map(|&s| f.value(s)).fold(v, f64::max);
        let delta = ((t - lower) / (n + 1.0)).min(tiny);
        for (j, &s) in set.iter().enumerate() {
            values[s] = t - (n - j as f64) * delta;
        }
    }
    Ok(values)
}

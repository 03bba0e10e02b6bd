//! Continuation: prescribe a velocity on the diagram points and pull it
//! back to the parameters through the pseudo-inverse of the Jacobian of the
//! (birth, death) coordinates.

use nalgebra::{DMatrix, DVector};

use super::ParamGradient;
use crate::error::Result;
use crate::losses::{Objective, ObjectiveEval};

/// Relative cutoff on singular values when forming the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

/// A continuation update direction (to be *added* to θ, scaled by the step
/// size) with the evaluation it came from.
#[derive(Clone, Debug)]
pub struct ContinuationStep {
    pub direction: ParamGradient,
    /// Diagram velocity v, two coordinates per point, all terms stacked.
    pub velocity: Vec<f64>,
    pub eval: ObjectiveEval,
}

/// Moore–Penrose solve `J⁺ v` with singular values below
/// `PINV_CUTOFF · σ_max` treated as zero.
pub fn pinv_solve(j: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if j.nrows() == 0 || j.ncols() == 0 {
        return DVector::zeros(j.ncols());
    }
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DVector::zeros(j.ncols());
    }
    svd.solve(v, PINV_CUTOFF * smax).expect("svd computed with both factors")
}

/// Continuation direction at θ: the diagram velocity is v = −∇_D L (for a
/// distance-to-target loss this is π(y) − y, the displacement of each point
/// to its matched target), pulled back as J⁺ v, where J stacks the
/// gradients of the birth and death values of the points in use. The
/// regularizer contributes −∇Reg directly.
pub fn continuation_direction(obj: &Objective, theta: &[f64]) -> Result<ContinuationStep> {
    continuation_direction_with(obj, theta, obj.evaluate(theta)?)
}

/// [`continuation_direction`] from an evaluation of the objective at θ.
pub fn continuation_direction_with(obj: &Objective, theta: &[f64], ev: ObjectiveEval) -> Result<ContinuationStep> {
    let npar = obj.family.num_params();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut velocity = Vec::new();
    for (lift, grads) in ev.lifts.iter().zip(&ev.dgm_grads) {
        for (lp, dg) in lift.iter().zip(grads) {
            for (s, g) in [(lp.birth_simplex, dg[0]), (lp.death_simplex, dg[1])] {
                rows.push(obj.family.simplex_gradient(theta, &ev.eval, s));
                velocity.push(-g);
            }
        }
    }
    let mut j = DMatrix::<f64>::zeros(rows.len(), npar);
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            j[(r, c)] += v;
        }
    }
    let dx = pinv_solve(&j, &DVector::from_vec(velocity.clone()));
    let mut dir: Vec<f64> = dx.iter().copied().collect();
    let mut reg = vec![0.0; npar];
    obj.regularizer.add_gradient(theta, &mut reg);
    for (d, r) in dir.iter_mut().zip(reg) {
        *d -= r;
    }
    Ok(ContinuationStep { direction: ParamGradient::new(dir, obj.family.row_width()), velocity, eval: ev })
}

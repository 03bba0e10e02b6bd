//! Diffeomorphic interpolation: extend a sparse point-cloud gradient to a
//! smooth vector field by Gaussian-kernel interpolation from its support.

use nalgebra::DMatrix;

use super::ParamGradient;
use crate::error::{Result, TopoError};
use crate::filtrations::dist;

/// Ridge used when the kernel system is singular and no ridge was given.
pub const FALLBACK_RIDGE: f64 = 1e-10;

/// Smooth field x ↦ Σ_i k(x, c_i) a_i.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub centers: Vec<Vec<f64>>,
    /// One coefficient row per center.
    pub coeffs: Vec<Vec<f64>>,
    pub sigma: f64,
    pub dim: usize,
}

impl VectorField {
    pub fn at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let s2 = 2.0 * self.sigma * self.sigma;
        for (c, a) in self.centers.iter().zip(&self.coeffs) {
            let d = dist(x, c);
            let k = (-d * d / s2).exp();
            if k != 0.0 {
                for (o, ai) in out.iter_mut().zip(a) {
                    *o += k * ai;
                }
            }
        }
        out
    }

    /// The field evaluated at every point of a row-major cloud.
    pub fn on_cloud(&self, points: &[f64]) -> ParamGradient {
        let values: Vec<f64> = points.chunks(self.dim).flat_map(|p| self.at(p)).collect();
        ParamGradient::new(values, self.dim)
    }
}

fn kernel(centers: &[Vec<f64>], sigma: f64, ridge: f64) -> DMatrix<f64> {
    let m = centers.len();
    let s2 = 2.0 * sigma * sigma;
    DMatrix::from_fn(m, m, |i, j| {
        let d = dist(&centers[i], &centers[j]);
        (-d * d / s2).exp() + if i == j { ridge } else { 0.0 }
    })
}

/// Interpolates the gradient rows on its support: the field takes exactly
/// the value of each nonzero row at its point (up to the ridge). `points`
/// is the row-major cloud the gradient refers to.
pub fn diffeo_interpolate(points: &[f64], grad: &ParamGradient, sigma: f64, ridge: f64) -> Result<VectorField> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(TopoError::InvalidParameter(format!("kernel width must be positive, got {sigma}")));
    }
    if !(ridge >= 0.0) {
        return Err(TopoError::InvalidParameter(format!("ridge must be non-negative, got {ridge}")));
    }
    let d = grad.row_width;
    if points.len() != grad.values.len() {
        return Err(TopoError::LengthMismatch { expected: grad.values.len(), got: points.len() });
    }
    let support = grad.support();
    let centers: Vec<Vec<f64>> = support.iter().map(|&i| points[i * d..(i + 1) * d].to_vec()).collect();
    if support.is_empty() {
        return Ok(VectorField { centers, coeffs: Vec::new(), sigma, dim: d });
    }
    let m = support.len();
    let rhs = DMatrix::from_fn(m, d, |i, c| grad.row(support[i])[c]);
    let solve = |r: f64| -> Option<DMatrix<f64>> {
        let k = kernel(&centers, sigma, r);
        let sol = k.clone().lu().solve(&rhs)?;
        // reject numerically meaningless solutions
        let resid = (&k * &sol - &rhs).norm();
        (sol.iter().all(|x| x.is_finite()) && resid <= 1e-6 * (1.0 + rhs.norm())).then_some(sol)
    };
    let sol = match solve(ridge) {
        Some(s) => s,
        None if ridge == 0.0 => {
            log::warn!("kernel matrix singular; retrying with ridge {FALLBACK_RIDGE}");
            solve(FALLBACK_RIDGE).ok_or_else(|| TopoError::InvalidParameter("kernel system unsolvable".into()))?
        }
        None => return Err(TopoError::InvalidParameter("kernel system unsolvable".into())),
    };
    let coeffs = (0..m).map(|i| (0..d).map(|c| sol[(i, c)]).collect()).collect();
    Ok(VectorField { centers, coeffs, sigma, dim: d })
}

/// Convenience: interpolate and evaluate on the same cloud.
pub fn diffeo_gradient(points: &[f64], grad: &ParamGradient, sigma: f64, ridge: f64) -> Result<ParamGradient> {
    Ok(diffeo_interpolate(points, grad, sigma, ridge)?.on_cloud(points))
}

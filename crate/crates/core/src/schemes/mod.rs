//! Gradient schemes: vanilla, stratified, big-step, continuation,
//! distributed and diffeomorphic.

pub mod bigstep;
pub mod continuation;
pub mod diffeo;
pub mod distributed;
pub mod moving_set;
pub mod stratified;

use crate::error::Result;
use crate::losses::{Objective, ObjectiveEval};

/// A dense gradient over the parameter space, grouped in rows of
/// `row_width` coordinates (one row per point for point clouds).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGradient {
    pub values: Vec<f64>,
    pub row_width: usize,
}

impl ParamGradient {
    pub fn new(values: Vec<f64>, row_width: usize) -> Self {
        assert!(row_width > 0 && values.len() % row_width == 0, "gradient length must be a multiple of the row width");
        ParamGradient { values, row_width }
    }

    pub fn zeros(len: usize, row_width: usize) -> Self {
        Self::new(vec![0.0; len], row_width)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.row_width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.row_width..(i + 1) * self.row_width]
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        norm(self.row(i))
    }

    /// Rows with at least one nonzero entry.
    pub fn support(&self) -> Vec<usize> {
        (0..self.rows()).filter(|&i| self.row(i).iter().any(|&x| x != 0.0)).collect()
    }

    /// Rows whose norm exceeds `rel` times the largest row norm.
    pub fn numerical_support(&self, rel: f64) -> Vec<usize> {
        let max = (0..self.rows()).map(|i| self.row_norm(i)).fold(0.0, f64::max);
        if max == 0.0 {
            return Vec::new();
        }
        (0..self.rows()).filter(|&i| self.row_norm(i) > rel * max).collect()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) use crate::filtrations::dist;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient of the objective at θ through the persistence pairing: loss
/// gradient on diagram coordinates composed with the differentials of the
/// birth and death simplex values, plus the regularizer.
pub fn vanilla_gradient(obj: &Objective, theta: &[f64]) -> Result<(ParamGradient, ObjectiveEval)> {
    let ev = obj.evaluate(theta)?;
    let g = obj.gradient(theta, &ev)?;
    Ok((ParamGradient::new(g, obj.family.row_width()), ev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtrations::{LowerStar, VietorisRips};
    use crate::losses::DiagramLoss;
    use crate::SimplicialComplex;
    use std::sync::Arc;

    #[test]
    fn constant_loss_has_zero_gradient() {
        let k = Arc::new(SimplicialComplex::from_simplices([[0u32, 1], [1, 2]], None).unwrap());
        let obj = Objective::single(Arc::new(LowerStar::new(k)), 0, DiagramLoss::TotalPersistence { sign: 1.0, exponent: 2.0, death_only: false });
        // constant vertex values: every point is on the diagonal and pruned
        let (g, _) = vanilla_gradient(&obj, &[1.0, 1.0, 1.0]).unwrap();
        assert!(g.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unit_square_support_is_three_points() {
        let x = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        // break the side and diagonal ties so the stratum is generic
        let x: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + 1e-3 * ((i * 7 % 5) as f64)).collect();
        let fam = Arc::new(VietorisRips::new(4, 2, 2).unwrap());
        let obj = Objective::single(fam, 1, DiagramLoss::TotalPersistence { sign: 1.0, exponent: 2.0, death_only: false });
        let (g, ev) = vanilla_gradient(&obj, &x).unwrap();
        assert_eq!(ev.lifts[0].len(), 1);
        // the last side and the first diagonal share one endpoint
        assert_eq!(g.support().len(), 3);
    }

    #[test]
    fn numerical_support_thresholds_relative_to_max() {
        let g = ParamGradient::new(vec![1.0, 0.0, 1e-9, 0.0, 0.0, 0.5], 2);
        assert_eq!(g.support(), vec![0, 1, 2]);
        assert_eq!(g.numerical_support(1e-6), vec![0, 2]);
    }
}

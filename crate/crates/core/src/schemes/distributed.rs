//! Distributed gradients: average the topological gradient over random
//! subsamples of a large point cloud.

use rand::seq::index;
use rand::Rng;

use super::ParamGradient;
use crate::error::{Result, TopoError};
use crate::losses::{Objective, Regularizer};

/// Averages, over `repetitions` uniform subsamples of `s` points, the
/// topological gradient of `sub_objective` (whose family lives on `s`
/// points), scattered back to the full cloud. The regularizer is applied
/// once on the full cloud.
pub fn distributed_gradient<R: Rng>(
    sub_objective: &Objective,
    cloud: &[f64],
    dim: usize,
    repetitions: usize,
    regularizer: Regularizer,
    rng: &mut R,
) -> Result<ParamGradient> {
    if dim == 0 || cloud.len() % dim != 0 {
        return Err(TopoError::InvalidParameter(format!("cloud length {} is not a multiple of {dim}", cloud.len())));
    }
    if repetitions == 0 {
        return Err(TopoError::InvalidParameter("at least one repetition is required".into()));
    }
    let n = cloud.len() / dim;
    let params = sub_objective.family.num_params();
    if params % dim != 0 || params / dim > n {
        return Err(TopoError::InvalidParameter(format!(
            "subsample of {} points does not fit a cloud of {n} points",
            params / dim
        )));
    }
    let s = params / dim;
    let mut g = vec![0.0; cloud.len()];
    for _ in 0..repetitions {
        let idx = index::sample(rng, n, s).into_vec();
        let sub: Vec<f64> = idx.iter().flat_map(|&i| cloud[i * dim..(i + 1) * dim].iter().copied()).collect();
        let ev = sub_objective.evaluate(&sub)?;
        let part = sub_objective.topo_gradient(&sub, &ev)?;
        for (r, &i) in idx.iter().enumerate() {
            for c in 0..dim {
                g[i * dim + c] += part[r * dim + c];
            }
        }
    }
    let scale = 1.0 / repetitions as f64;
    for x in &mut g {
        *x *= scale;
    }
    regularizer.add_gradient(cloud, &mut g);
    Ok(ParamGradient::new(g, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtrations::VietorisRips;
    use crate::losses::DiagramLoss;
    use std::sync::Arc;

    #[test]
    fn full_subsample_equals_vanilla() {
        let mut rng = crate::validation::rng(2);
        let cloud: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fam = Arc::new(VietorisRips::new(6, 2, 2).unwrap());
        let obj = Objective::single(fam, 1, DiagramLoss::TotalPersistence { sign: 1.0, exponent: 2.0, death_only: false });
        // with s = n every subsample is a permutation of the cloud
        let g = distributed_gradient(&obj, &cloud, 2, 3, Regularizer::None, &mut rng).unwrap();
        let (v, _) = super::super::vanilla_gradient(&obj, &cloud).unwrap();
        for (a, b) in g.values.iter().zip(&v.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn oversized_subsample_rejected() {
        let mut rng = crate::validation::rng(2);
        let fam = Arc::new(VietorisRips::new(6, 2, 2).unwrap());
        let obj = Objective::single(fam, 1, DiagramLoss::NegDistanceToEmpty);
        assert!(distributed_gradient(&obj, &[0.0; 8], 2, 1, Regularizer::None, &mut rng).is_err());
    }
}

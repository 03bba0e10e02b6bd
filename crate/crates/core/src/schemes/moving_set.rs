//! Moving sets: the simplices that must travel together with one simplex of
//! a persistence pair so that its partner stays the same.

use std::sync::Arc;

use crate::complex::{total_order, Filtration, SimplicialComplex};
use crate::error::{Result, TopoError};
use crate::persistence::{PartialReduction, PersistencePairing, ReducedDecomposition};

/// Which of the four configurations a moving-set query falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MovingCase {
    /// Death simplex moved to an earlier value.
    DeathDown,
    /// Death simplex moved to a later value.
    DeathUp,
    /// Birth simplex moved to an earlier value.
    BirthDown,
    /// Birth simplex moved to a later value.
    BirthUp,
}

/// Clamps a target value so that `tau` cannot pass one of its facets (when
/// moving down) or cofacets (when moving up).
pub fn clip_target(f: &Filtration, tau: usize, t: f64) -> f64 {
    let k = f.complex();
    let v = f.value(tau);
    if t < v {
        let floor = k.facets(tau).iter().map(|&s| f.value(s)).fold(f64::NEG_INFINITY, f64::max);
        if t < floor {
            log::debug!("target {t} below a face of simplex {tau}; clipped to {floor}");
            return floor;
        }
    } else if t > v {
        let ceil = k.cofacets(tau).iter().map(|&s| f.value(s)).fold(f64::INFINITY, f64::min);
        if t > ceil {
            log::debug!("target {t} above a coface of simplex {tau}; clipped to {ceil}");
            return ceil;
        }
    }
    t
}

/// Simplices of the same dimension as `tau` that `tau` passes when its
/// value moves to `t`: strictly beyond `t` is excluded, and ties with
/// `tau`'s own value count when they lie on the crossed side in the total
/// order. Sorted by proximity to `tau`.
pub fn window(f: &Filtration, pos: &[usize], tau: usize, t: f64) -> Vec<usize> {
    let k = f.complex();
    let p = k.dim_of(tau);
    let v = f.value(tau);
    let mut w: Vec<usize> = if t < v {
        k.ids_of_dim(p)
            .filter(|&s| pos[s] < pos[tau] && f.value(s) > t)
            .collect()
    } else if t > v {
        k.ids_of_dim(p)
            .filter(|&s| pos[s] > pos[tau] && f.value(s) < t)
            .collect()
    } else {
        Vec::new()
    };
    w.sort_unstable_by_key(|&s| pos[s].abs_diff(pos[tau]));
    w
}

fn classify(pos: &[usize], tau: usize, partner: usize, v: f64, t: f64) -> Option<MovingCase> {
    let death = pos[partner] < pos[tau];
    if t == v {
        return None;
    }
    Some(match (death, t < v) {
        (true, true) => MovingCase::DeathDown,
        (true, false) => MovingCase::DeathUp,
        (false, true) => MovingCase::BirthDown,
        (false, false) => MovingCase::BirthUp,
    })
}

fn check_pair(pairing: &PersistencePairing, tau: usize, partner: usize) -> Result<()> {
    if pairing.contains_pair(tau, partner) || pairing.contains_pair(partner, tau) {
        Ok(())
    } else {
        Err(TopoError::NotAPair { birth: tau.min(partner), death: tau.max(partner) })
    }
}

/// Moving set by explicit vineyard transpositions: each candidate is swapped
/// past the current block and kept if it takes over the partner.
pub fn moving_set_naive(f: &Filtration, tau: usize, partner: usize, t: f64) -> Result<Vec<usize>> {
    let sig = total_order(f);
    let pos = sig.positions();
    let k = f.complex();
    check_pair(&crate::persistence::pairs_for_order(k, &sig.order), tau, partner)?;
    let t = clip_target(f, tau, t);
    let win = window(f, &pos, tau, t);
    if win.is_empty() {
        return Ok(vec![tau]);
    }
    // dimension-blocked order: the pairing depends only on the order within
    // each dimension, and it keeps all same-dimension simplices contiguous
    let mut blocked: Vec<usize> = Vec::with_capacity(k.len());
    for p in 0..=k.dim() {
        let mut ids: Vec<usize> = k.ids_of_dim(p).collect();
        ids.sort_unstable_by_key(|&s| pos[s]);
        blocked.extend(ids);
    }
    let mut dec = ReducedDecomposition::new(k.clone(), blocked, false);
    let down = t < f.value(tau);
    let mut set = vec![tau];
    let (mut b0, mut b1) = (dec.position(tau), dec.position(tau));
    for &cand in &win {
        if down {
            debug_assert_eq!(dec.position(cand), b0 - 1);
            for i in (b0 - 1)..b1 {
                dec.transpose(i)?;
            }
            if dec.partner(partner) == Some(cand) {
                for i in ((b0 - 1)..b1).rev() {
                    dec.transpose(i)?;
                }
                set.push(cand);
            } else {
                b1 -= 1;
            }
            b0 -= 1;
        } else {
            debug_assert_eq!(dec.position(cand), b1 + 1);
            for i in (b0..=b1).rev() {
                dec.transpose(i)?;
            }
            if dec.partner(partner) == Some(cand) {
                for i in b0..=b1 {
                    dec.transpose(i)?;
                }
                set.push(cand);
            } else {
                b0 += 1;
            }
            b1 += 1;
        }
    }
    set.sort_unstable_by_key(|&s| pos[s]);
    Ok(set)
}

/// Access to the matrix entries used by the fast moving-set rule.
pub trait MovingSetMatrices {
    /// `V[row, col]` of the boundary (`dual = false`) or anti-transposed
    /// (`dual = true`) reduction.
    fn v_entry(&self, dual: bool, row: usize, col: usize) -> bool;
    /// `U[row, col]` of the same reductions.
    fn u_entry(&self, dual: bool, row: usize, col: usize) -> bool;

    /// `U[row, c]` for every c in `cols`.
    fn u_row_entries(&self, dual: bool, row: usize, cols: &[usize]) -> Vec<bool> {
        cols.iter().map(|&c| self.u_entry(dual, row, c)).collect()
    }
}

/// Both full decompositions of a filtration.
pub struct FullMatrices {
    pub homology: ReducedDecomposition,
    pub cohomology: ReducedDecomposition,
}

impl FullMatrices {
    pub fn new(f: &Filtration) -> Self {
        FullMatrices {
            homology: crate::persistence::reduce(f),
            cohomology: crate::persistence::reduce_dual(f),
        }
    }
}

impl MovingSetMatrices for FullMatrices {
    fn v_entry(&self, dual: bool, row: usize, col: usize) -> bool {
        if dual { &self.cohomology } else { &self.homology }.v_entry(row, col)
    }

    fn u_entry(&self, dual: bool, row: usize, col: usize) -> bool {
        if dual { &self.cohomology } else { &self.homology }.u_entry(row, col)
    }
}

/// Reductions of only the pivot columns, for the dimensions in use.
pub struct PartialMatrices {
    complex: Arc<SimplicialComplex>,
    /// per dimension p: reduction of the death columns of dimension p
    homology: Vec<Option<PartialReduction>>,
    /// per dimension p: dual reduction of the birth columns of dimension p
    cohomology: Vec<Option<PartialReduction>>,
}

impl PartialMatrices {
    /// Prepares the reductions needed to move the pairs of homology
    /// dimensions `dims` (births of dimension p, deaths of dimension p + 1).
    pub fn new(f: &Filtration, pairing: &PersistencePairing, dims: &[usize]) -> Self {
        let k = f.complex();
        let order = total_order(f).order;
        let top = k.dim() + 1;
        let mut homology = vec![None; top];
        let mut cohomology = vec![None; top];
        for &p in dims {
            if p + 1 >= top {
                continue;
            }
            let deaths: Vec<usize> = pairing.pairs_in(p).iter().map(|x| x.1).collect();
            let births: Vec<usize> = pairing.pairs_in(p).iter().map(|x| x.0).collect();
            homology[p + 1] = Some(PartialReduction::new(k, &order, false, &deaths));
            cohomology[p] = Some(PartialReduction::new(k, &order, true, &births));
        }
        PartialMatrices { complex: k.clone(), homology, cohomology }
    }

    fn get(&self, dual: bool, simplex: usize) -> &PartialReduction {
        let p = self.complex.dim_of(simplex);
        let slot = if dual { &self.cohomology[p] } else { &self.homology[p] };
        slot.as_ref().expect("reduction prepared for this dimension")
    }
}

impl MovingSetMatrices for PartialMatrices {
    fn v_entry(&self, dual: bool, row: usize, col: usize) -> bool {
        self.get(dual, col).v_entry(row, col)
    }

    fn u_entry(&self, dual: bool, row: usize, col: usize) -> bool {
        self.get(dual, row).u_entry(&self.complex, row, col)
    }

    fn u_row_entries(&self, dual: bool, row: usize, cols: &[usize]) -> Vec<bool> {
        if cols.is_empty() {
            return Vec::new();
        }
        let red = self.get(dual, row);
        let urow = red.u_row(row);
        cols.iter().map(|&c| red.u_row_entry(&self.complex, &urow, c)).collect()
    }
}

/// Moving set read off the reduction matrices, one entry per candidate:
///
/// - death, moving down: `V[τ′, τ] ≠ 0`
/// - death, moving up: `U[τ, τ′] ≠ 0`
/// - birth, moving down: `U⊥[τ, τ′] ≠ 0`
/// - birth, moving up: `V⊥[τ′, τ] ≠ 0`
///
/// where ⊥ denotes the reduction of the anti-transposed boundary matrix.
pub fn moving_set_fast(
    f: &Filtration,
    pos: &[usize],
    mats: &dyn MovingSetMatrices,
    tau: usize,
    partner: usize,
    t: f64,
) -> (Vec<usize>, Option<MovingCase>) {
    let t = clip_target(f, tau, t);
    let case = classify(pos, tau, partner, f.value(tau), t);
    let win = window(f, pos, tau, t);
    let mut set = vec![tau];
    if let Some(case) = case {
        let keep: Vec<bool> = match case {
            MovingCase::DeathDown => win.iter().map(|&c| mats.v_entry(false, c, tau)).collect(),
            MovingCase::DeathUp => mats.u_row_entries(false, tau, &win),
            MovingCase::BirthDown => mats.u_row_entries(true, tau, &win),
            MovingCase::BirthUp => win.iter().map(|&c| mats.v_entry(true, c, tau)).collect(),
        };
        set.extend(win.iter().zip(keep).filter(|(_, k)| *k).map(|(&c, _)| c));
    }
    set.sort_unstable_by_key(|&s| pos[s]);
    (set, case)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Path of three vertices plus one extra edge, generic values.
    fn sample() -> Filtration {
        let k = Arc::new(SimplicialComplex::from_simplices([[0u32, 1], [1, 2], [0, 2], [2, 3]], None).unwrap());
        let id = |v: &[u32]| k.id_of_vertices(v).unwrap();
        let mut values = vec![0.0; k.len()];
        values[id(&[0])] = 0.0;
        values[id(&[1])] = 0.1;
        values[id(&[2])] = 0.2;
        values[id(&[3])] = 0.3;
        values[id(&[0, 1])] = 0.4;
        values[id(&[1, 2])] = 0.5;
        values[id(&[0, 2])] = 0.6;
        values[id(&[2, 3])] = 0.7;
        Filtration::new(k, values).unwrap()
    }

    #[test]
    fn empty_window_gives_singleton() {
        let f = sample();
        let k = f.complex();
        let e = k.id_of_vertices(&[0, 1]).unwrap();
        let v = k.id_of_vertices(&[1]).unwrap();
        assert_eq!(moving_set_naive(&f, e, v, 0.39).unwrap(), vec![e]);
        let pos = total_order(&f).positions();
        let m = FullMatrices::new(&f);
        assert_eq!(moving_set_fast(&f, &pos, &m, e, v, 0.39).0, vec![e]);
    }

    #[test]
    fn non_pair_rejected() {
        let f = sample();
        let k = f.complex();
        let e = k.id_of_vertices(&[2, 3]).unwrap();
        let v = k.id_of_vertices(&[0]).unwrap();
        assert!(matches!(moving_set_naive(&f, e, v, 0.0), Err(TopoError::NotAPair { .. })));
    }

    #[test]
    fn fast_equals_naive_on_sample() {
        let f = sample();
        let pos = total_order(&f).positions();
        let m = FullMatrices::new(&f);
        let pairing = crate::persistence::persistence_pairs(&f);
        for &(b, d) in pairing.pairs.iter().flatten() {
            for t in [-1.0, 0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 2.0] {
                for (tau, partner) in [(b, d), (d, b)] {
                    let naive = moving_set_naive(&f, tau, partner, t).unwrap();
                    let fast = moving_set_fast(&f, &pos, &m, tau, partner, t).0;
                    assert_eq!(naive, fast, "tau {tau} partner {partner} t {t}");
                }
            }
        }
    }
}

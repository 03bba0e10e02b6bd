//! Persistence pairs and the fast pairing path (cohomology reduction with
//! clearing, no V/U bookkeeping).

use crate::complex::{total_order, Filtration, SimplicialComplex};

/// Per homology dimension, the (birth simplex, death simplex) pairs and the
/// essential (unpaired) simplices. Pairs are listed by increasing position
/// of the death simplex; unpaired simplices by increasing position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PersistencePairing {
    pub pairs: Vec<Vec<(usize, usize)>>,
    pub unpaired: Vec<Vec<usize>>,
}

impl PersistencePairing {
    pub(crate) fn from_parts(
        complex: &SimplicialComplex,
        pos: &[usize],
        mut pairs: Vec<(usize, usize)>,
        mut unpaired: Vec<usize>,
    ) -> Self {
        let dims = complex.dim() + 1;
        pairs.sort_unstable_by_key(|&(_, d)| pos[d]);
        unpaired.sort_unstable_by_key(|&s| pos[s]);
        let mut by_dim_pairs = vec![Vec::new(); dims];
        let mut by_dim_unpaired = vec![Vec::new(); dims];
        for (b, d) in pairs {
            by_dim_pairs[complex.dim_of(b)].push((b, d));
        }
        for s in unpaired {
            by_dim_unpaired[complex.dim_of(s)].push(s);
        }
        PersistencePairing {
            pairs: by_dim_pairs,
            unpaired: by_dim_unpaired,
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }

    /// Pairs in homology dimension `p` (empty when out of range).
    pub fn pairs_in(&self, p: usize) -> &[(usize, usize)] {
        self.pairs.get(p).map_or(&[], Vec::as_slice)
    }

    pub fn unpaired_in(&self, p: usize) -> &[usize] {
        self.unpaired.get(p).map_or(&[], Vec::as_slice)
    }

    /// Number of essential classes per dimension.
    pub fn essential_counts(&self) -> Vec<usize> {
        self.unpaired.iter().map(Vec::len).collect()
    }

    /// Partner lookup table: `partner[s]` is the other simplex of the pair
    /// containing `s`.
    pub fn partners(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for &(b, d) in self.pairs.iter().flatten() {
            out[b] = Some(d);
            out[d] = Some(b);
        }
        out
    }

    pub fn contains_pair(&self, birth: usize, death: usize) -> bool {
        self.pairs.iter().flatten().any(|&(b, d)| b == birth && d == death)
    }
}

/// Persistence pairs of `f` in its total order.
///
/// Uses the coboundary matrix reduced dimension by dimension with clearing;
/// the result equals the pairing read off the full `R = D·V` reduction.
pub fn persistence_pairs(f: &Filtration) -> PersistencePairing {
    let order = total_order(f).order;
    pairs_for_order(f.complex(), &order)
}

/// Pairing for an arbitrary face-consistent total order.
pub fn pairs_for_order(complex: &SimplicialComplex, order: &[usize]) -> PersistencePairing {
    let n = complex.len();
    let mut pos = vec![0usize; n];
    for (i, &s) in order.iter().enumerate() {
        pos[s] = i;
    }
    // reversed positions: the coboundary matrix is processed from the last
    // simplex to the first, so its columns are lists of reversed positions
    let rpos = |s: usize| n - 1 - pos[s];

    let mut killed = vec![false; n];
    let mut pairs = Vec::new();
    let mut unpaired = Vec::new();
    // pivot[row in reversed positions] = column reduced so far
    let mut pivot_col: Vec<Option<Vec<usize>>> = vec![None; n];
    for p in 0..=complex.dim() {
        let mut cols: Vec<usize> = complex.ids_of_dim(p).collect();
        cols.sort_unstable_by_key(|&s| rpos(s));
        for s in cols {
            if killed[s] {
                continue;
            }
            let mut col: Vec<usize> = complex.cofacets(s).iter().map(|&c| rpos(c)).collect();
            col.sort_unstable();
            loop {
                let Some(&low) = col.last() else {
                    unpaired.push(s);
                    break;
                };
                match &pivot_col[low] {
                    Some(other) => {
                        let mut merged = col.clone();
                        super::reduction::xor_into(&mut merged, other);
                        col = merged;
                    }
                    None => {
                        let death = order[n - 1 - low];
                        killed[death] = true;
                        pairs.push((s, death));
                        pivot_col[low] = Some(col);
                        break;
                    }
                }
            }
        }
    }
    PersistencePairing::from_parts(complex, &pos, pairs, unpaired)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::reduction::reduce;
    use std::sync::Arc;

    #[test]
    fn path_lower_star_pairs() {
        // a-b-c with vertex values 0, 2, 1
        let k = Arc::new(SimplicialComplex::from_simplices([[0u32, 1], [1, 2]], None).unwrap());
        let id = |v: &[u32]| k.id_of_vertices(v).unwrap();
        let mut values = vec![0.0; k.len()];
        values[id(&[0])] = 0.0;
        values[id(&[1])] = 2.0;
        values[id(&[2])] = 1.0;
        values[id(&[0, 1])] = 2.0;
        values[id(&[1, 2])] = 2.0;
        let f = Filtration::new(k.clone(), values).unwrap();
        let p = persistence_pairs(&f);
        assert_eq!(p, reduce(&f).pairing());
        assert!(p.contains_pair(id(&[2]), id(&[1, 2])));
        assert!(p.contains_pair(id(&[1]), id(&[0, 1])));
        assert_eq!(p.unpaired[0], vec![id(&[0])]);
    }
}

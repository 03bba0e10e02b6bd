//! Boundary matrix reduction `R = D·V` over the two-element field, with
//! `U = V⁻¹` maintained alongside, and vineyard updates under adjacent
//! transpositions.
//!
//! Matrix entries are stored by simplex id rather than by position, so a
//! transposition only touches the permutation and the few columns whose
//! pivot moves. Columns are kept sorted by simplex id; the pivot (lowest
//! nonzero) of a column is the entry with the largest position.

use std::sync::Arc;

use crate::complex::{Filtration, SimplicialComplex};
use crate::error::{Result, TopoError};
use crate::persistence::pairing::PersistencePairing;

/// Symmetric difference of two id-sorted index lists.
pub(crate) fn xor_into(dst: &mut Vec<usize>, src: &[usize]) {
    let mut out = Vec::with_capacity(dst.len() + src.len());
    let (mut i, mut j) = (0, 0);
    while i < dst.len() && j < src.len() {
        match dst[i].cmp(&src[j]) {
            std::cmp::Ordering::Less => {
                out.push(dst[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(src[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&dst[i..]);
    out.extend_from_slice(&src[j..]);
    *dst = out;
}

/// A reduced decomposition of the boundary matrix of a complex in a given
/// total order, or of its anti-transpose (the coboundary matrix in reversed
/// order) when `dual` is set.
#[derive(Clone, Debug)]
pub struct ReducedDecomposition {
    complex: Arc<SimplicialComplex>,
    dual: bool,
    order: Vec<usize>,
    pos: Vec<usize>,
    r: Vec<Vec<usize>>,
    v: Vec<Vec<usize>>,
    u_rows: Vec<Vec<usize>>,
    /// pivot[row] = column whose lowest entry is `row`
    pivot: Vec<Option<usize>>,
}

/// Reduces the boundary matrix of `f` in its total order.
pub fn reduce(f: &Filtration) -> ReducedDecomposition {
    let order = crate::complex::total_order(f).order;
    ReducedDecomposition::new(f.complex().clone(), order, false)
}

/// Reduces the anti-transposed boundary matrix of `f`: columns are
/// coboundaries, processed from the last simplex to the first.
pub fn reduce_dual(f: &Filtration) -> ReducedDecomposition {
    let order = crate::complex::total_order(f).order;
    ReducedDecomposition::new(f.complex().clone(), order, true)
}

/// Returns the decomposition with positions `i` and `i + 1` swapped.
pub fn transpose_adjacent(
    mut dec: ReducedDecomposition,
    i: usize,
) -> Result<ReducedDecomposition> {
    dec.transpose(i)?;
    Ok(dec)
}

impl ReducedDecomposition {
    /// Standard left-to-right reduction for an arbitrary total order in
    /// which faces precede cofaces.
    pub fn new(complex: Arc<SimplicialComplex>, order: Vec<usize>, dual: bool) -> Self {
        let n = complex.len();
        assert_eq!(order.len(), n, "order must list every simplex once");
        let mut pos = vec![usize::MAX; n];
        for (i, &s) in order.iter().enumerate() {
            pos[s] = i;
        }
        let r: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                let mut c = if dual {
                    complex.cofacets(s).to_vec()
                } else {
                    complex.facets(s).to_vec()
                };
                c.sort_unstable();
                c
            })
            .collect();
        let mut dec = ReducedDecomposition {
            complex,
            dual,
            order,
            pos,
            r,
            v: (0..n).map(|s| vec![s]).collect(),
            u_rows: (0..n).map(|s| vec![s]).collect(),
            pivot: vec![None; n],
        };
        let columns: Vec<usize> = if dual {
            dec.order.iter().rev().copied().collect()
        } else {
            dec.order.clone()
        };
        for j in columns {
            while let Some(l) = dec.low(j) {
                match dec.pivot[l] {
                    Some(k) => dec.add_column(k, j),
                    None => {
                        dec.pivot[l] = Some(j);
                        break;
                    }
                }
            }
        }
        dec
    }

    /// Effective position of a simplex in the matrix order: the filtration
    /// position, reversed for the dual decomposition.
    #[inline]
    fn key(&self, s: usize) -> usize {
        if self.dual {
            self.order.len() - 1 - self.pos[s]
        } else {
            self.pos[s]
        }
    }

    fn low(&self, col: usize) -> Option<usize> {
        self.r[col].iter().copied().max_by_key(|&s| self.key(s))
    }

    /// Adds column `src` to column `dst` in R and V, and row `dst` of U to
    /// row `src`, keeping `U = V⁻¹`.
    fn add_column(&mut self, src: usize, dst: usize) {
        debug_assert_ne!(src, dst);
        let (a, b) = two_mut(&mut self.r, src, dst);
        xor_into(b, a);
        let (a, b) = two_mut(&mut self.v, src, dst);
        xor_into(b, a);
        let (a, b) = two_mut(&mut self.u_rows, dst, src);
        xor_into(b, a);
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn is_dual(&self) -> bool {
        self.dual
    }

    /// Simplex ids in filtration order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn position(&self, simplex: usize) -> usize {
        self.pos[simplex]
    }

    pub fn r_column(&self, simplex: usize) -> &[usize] {
        &self.r[simplex]
    }

    pub fn v_column(&self, simplex: usize) -> &[usize] {
        &self.v[simplex]
    }

    pub fn u_row(&self, simplex: usize) -> &[usize] {
        &self.u_rows[simplex]
    }

    pub fn v_entry(&self, row: usize, col: usize) -> bool {
        self.v[col].binary_search(&row).is_ok()
    }

    pub fn u_entry(&self, row: usize, col: usize) -> bool {
        self.u_rows[row].binary_search(&col).is_ok()
    }

    /// The pairing partner of a simplex, if it is paired.
    pub fn partner(&self, simplex: usize) -> Option<usize> {
        if let Some(c) = self.pivot[simplex] {
            return Some(c);
        }
        self.low(simplex).filter(|&l| self.pivot[l] == Some(simplex))
    }

    /// True when the simplex is the later element of its pair in filtration
    /// order (it kills a class).
    pub fn is_death(&self, simplex: usize) -> bool {
        self.partner(simplex)
            .is_some_and(|p| self.pos[p] < self.pos[simplex])
    }

    pub fn pairing(&self) -> PersistencePairing {
        let mut pairs = Vec::new();
        let mut unpaired = Vec::new();
        for (row, col) in self.pivot.iter().enumerate() {
            match col {
                Some(c) if self.dual => pairs.push((*c, row)),
                Some(c) => pairs.push((row, *c)),
                None => {}
            }
        }
        let mut paired = vec![false; self.order.len()];
        for &(b, d) in &pairs {
            paired[b] = true;
            paired[d] = true;
        }
        for s in 0..self.order.len() {
            if !paired[s] {
                unpaired.push(s);
            }
        }
        PersistencePairing::from_parts(&self.complex, &self.pos, pairs, unpaired)
    }

    /// Swaps the simplices at positions `i` and `i + 1` and restores the
    /// decomposition. Linear in the size of the affected columns.
    pub fn transpose(&mut self, i: usize) -> Result<()> {
        if i + 1 >= self.order.len() {
            return Err(TopoError::OutOfRange(i));
        }
        let (a, b) = (self.order[i], self.order[i + 1]);
        if self.complex.facets(b).contains(&a) {
            return Err(TopoError::FaceCofaceSwap(i, i + 1));
        }
        // In matrix order `first` precedes `second`; they trade places.
        let (first, second) = if self.dual { (b, a) } else { (a, b) };

        let mut affected: Vec<usize> = vec![first, second];
        affected.extend(self.pivot[first]);
        affected.extend(self.pivot[second]);
        affected.sort_unstable();
        affected.dedup();
        for &c in &affected {
            if let Some(l) = self.low(c) {
                if self.pivot[l] == Some(c) {
                    self.pivot[l] = None;
                }
            }
        }

        let upper_entry = self.v_entry(first, second);
        self.order.swap(i, i + 1);
        self.pos[a] = i + 1;
        self.pos[b] = i;
        if upper_entry {
            // V[first, second] now sits below the diagonal; clear it with
            // the (now later) column `first`.
            self.add_column(first, second);
        }

        let mut work = affected;
        while let Some(j) = work.pop() {
            while let Some(l) = self.low(j) {
                match self.pivot[l] {
                    None => {
                        self.pivot[l] = Some(j);
                        break;
                    }
                    Some(k) if k == j => break,
                    Some(k) => {
                        if self.key(k) < self.key(j) {
                            self.add_column(k, j);
                        } else {
                            self.add_column(j, k);
                            self.pivot[l] = Some(j);
                            work.push(k);
                            break;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks every structural invariant exactly: R reduced, `R = D·V`, V
    /// upper triangular with unit diagonal, and `V·U = I`.
    pub fn verify(&self) -> std::result::Result<(), String> {
        let n = self.order.len();
        let mut seen = vec![None; n];
        for c in 0..n {
            if let Some(l) = self.low(c) {
                if let Some(other) = seen[l] {
                    return Err(format!("columns {other} and {c} share pivot {l}"));
                }
                seen[l] = Some(c);
                if self.pivot[l] != Some(c) {
                    return Err(format!("stale pivot table at row {l}"));
                }
            }
        }
        for c in 0..n {
            // D·V column c
            let mut acc: Vec<usize> = Vec::new();
            for &k in &self.v[c] {
                let mut col = if self.dual {
                    self.complex.cofacets(k).to_vec()
                } else {
                    self.complex.facets(k).to_vec()
                };
                col.sort_unstable();
                xor_into(&mut acc, &col);
            }
            if acc != self.r[c] {
                return Err(format!("R != D·V at column {c}"));
            }
            if !self.v[c].contains(&c) {
                return Err(format!("V has zero diagonal at {c}"));
            }
            if self.v[c].iter().any(|&row| self.key(row) > self.key(c)) {
                return Err(format!("V not upper triangular in column {c}"));
            }
        }
        // V·U = I  ⇔  for each row r of U, Σ_k U[r,k]·(row k of V) = e_r;
        // check via columns: (V·U)[:, c] = Σ_k V[:, k]·U[k, c]
        let mut u_cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (row, entries) in self.u_rows.iter().enumerate() {
            for &c in entries {
                u_cols[c].push(row);
            }
        }
        for (c, rows) in u_cols.iter().enumerate() {
            let mut acc: Vec<usize> = Vec::new();
            for &k in rows {
                xor_into(&mut acc, &self.v[k]);
            }
            if acc != [c] {
                return Err(format!("V·U != I at column {c}"));
            }
        }
        Ok(())
    }
}

fn two_mut<T>(v: &mut [T], a: usize, b: usize) -> (&T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&hi[0], &mut lo[b])
    }
}

//! Reduction restricted to the columns that end up nonzero.
//!
//! In the standard left-to-right reduction a column whose reduced form is
//! zero is never added to another column, so reducing only the columns known
//! to carry a pivot (from a cheaper pairing computation) reproduces exactly
//! the same nonzero columns of R and the same columns of V. Entries
//! `U[k, j]` in a pivot row k follow from `D = R·U`: they are the
//! coefficients of the unique expansion of column j of D in the basis of
//! nonzero columns of R.

use crate::complex::SimplicialComplex;
use crate::persistence::reduction::xor_into;

/// Reduced pivot columns of one dimension of the boundary matrix (or of
/// the coboundary matrix, processed in reversed order, when `dual`).
#[derive(Clone, Debug)]
pub struct PartialReduction {
    dual: bool,
    /// matrix position of every simplex
    key: Vec<usize>,
    /// R columns as sorted lists of keys, for reduced columns only
    r: Vec<Option<Vec<usize>>>,
    /// V columns as sorted simplex ids, for reduced columns only
    v: Vec<Option<Vec<usize>>>,
    /// pivot key → column simplex
    pivot: Vec<Option<usize>>,
    /// reduced columns in increasing pivot key
    by_low: Vec<usize>,
}

/// Row `k` of U as a linear functional: `U[k, j]` is the parity of the
/// overlap between column j of the matrix and `support`.
#[derive(Clone, Debug)]
pub struct URow {
    support: std::collections::HashSet<usize>,
}

impl PartialReduction {
    /// Reduces the columns `columns` (simplex ids, all of one dimension)
    /// of the boundary matrix in the total order `order`, or of the
    /// coboundary matrix when `dual`. Every listed column must reduce to a
    /// nonzero column.
    pub fn new(complex: &SimplicialComplex, order: &[usize], dual: bool, columns: &[usize]) -> Self {
        let n = complex.len();
        let mut key = vec![0usize; n];
        for (i, &s) in order.iter().enumerate() {
            key[s] = if dual { n - 1 - i } else { i };
        }
        let mut cols = columns.to_vec();
        cols.sort_unstable_by_key(|&s| key[s]);
        let mut pr = PartialReduction {
            dual,
            key,
            r: vec![None; n],
            v: vec![None; n],
            pivot: vec![None; n],
            by_low: Vec::new(),
        };
        for j in cols {
            let mut col = pr.matrix_column(complex, j);
            let mut v = vec![j];
            while let Some(&low) = col.last() {
                match pr.pivot[low] {
                    Some(k) => {
                        xor_into(&mut col, pr.r[k].as_ref().expect("pivot column stored"));
                        xor_into(&mut v, pr.v[k].as_ref().expect("pivot column stored"));
                    }
                    None => break,
                }
            }
            let low = *col.last().expect("column listed as nonzero reduced to zero");
            pr.pivot[low] = Some(j);
            pr.r[j] = Some(col);
            pr.v[j] = Some(v);
        }
        pr.by_low = (0..n).filter_map(|key| pr.pivot[key]).collect();
        pr
    }

    fn matrix_column(&self, complex: &SimplicialComplex, s: usize) -> Vec<usize> {
        let entries = if self.dual { complex.cofacets(s) } else { complex.facets(s) };
        let mut col: Vec<usize> = entries.iter().map(|&e| self.key[e]).collect();
        col.sort_unstable();
        col
    }

    pub fn is_dual(&self) -> bool {
        self.dual
    }

    /// Column `col` of V (only for reduced columns).
    pub fn v_column(&self, col: usize) -> Option<&[usize]> {
        self.v[col].as_deref()
    }

    /// `V[row, col]` for a reduced column `col`.
    pub fn v_entry(&self, row: usize, col: usize) -> bool {
        self.v[col].as_ref().is_some_and(|v| v.binary_search(&row).is_ok())
    }

    /// The pivot columns k with `U[k, col] = 1`, i.e. the expansion of
    /// column `col` of D in the reduced basis. Returns `None` when the
    /// column is not in the span of the reduced columns.
    pub fn expansion(&self, complex: &SimplicialComplex, col: usize) -> Option<Vec<usize>> {
        let mut c = self.matrix_column(complex, col);
        let mut used: Vec<usize> = Vec::new();
        while let Some(&low) = c.last() {
            let k = self.pivot[low]?;
            xor_into(&mut c, self.r[k].as_ref().expect("pivot column stored"));
            match used.iter().position(|&u| u == k) {
                Some(i) => {
                    used.swap_remove(i);
                }
                None => used.push(k),
            }
        }
        Some(used)
    }

    /// `U[row, col]` for a pivot column `row`.
    pub fn u_entry(&self, complex: &SimplicialComplex, row: usize, col: usize) -> bool {
        self.expansion(complex, col).is_some_and(|e| e.contains(&row))
    }

    /// Row `row` (a reduced column) of U as a functional φ on matrix rows
    /// with φ(R_k) = [k = row] for every reduced column k. Since column j
    /// of D expands in the reduced columns, `U[row, j] = φ(D_j)`. φ lives on
    /// pivot rows and is found by one triangular sweep in pivot order.
    pub fn u_row(&self, row: usize) -> URow {
        let mut support = std::collections::HashSet::new();
        let r_row = self.r[row].as_ref().expect("row of U requested for a reduced column");
        let start = *r_row.last().expect("reduced column is nonzero");
        let first = self.by_low.partition_point(|&k| self.r[k].as_ref().unwrap().last().copied().unwrap() < start);
        for &k in &self.by_low[first..] {
            let col = self.r[k].as_ref().expect("pivot column stored");
            let low = *col.last().unwrap();
            let overlap = col[..col.len() - 1].iter().filter(|r| support.contains(*r)).count();
            if (k == row) ^ (overlap % 2 == 1) {
                support.insert(low);
            }
        }
        URow { support }
    }

    /// `U[row, col]` through a precomputed row functional.
    pub fn u_row_entry(&self, complex: &SimplicialComplex, urow: &URow, col: usize) -> bool {
        self.matrix_column(complex, col).iter().filter(|r| urow.support.contains(*r)).count() % 2 == 1
    }
}

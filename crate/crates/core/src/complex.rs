//! Simplices, simplicial complexes over the two-element field, and filtrations.
//!
//! A [`SimplicialComplex`] stores every simplex once, sorted by dimension and
//! then lexicographically, so the simplex id order is already the
//! `(dimension, lexicographic)` tie-break used by [`total_order`].

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Result, TopoError};

/// A simplex as a strictly increasing list of vertex ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex(Vec<u32>);

impl Simplex {
    /// Sorts the vertex list; rejects empty lists and repeated vertices.
    pub fn new(mut vertices: Vec<u32>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(TopoError::EmptySimplex);
        }
        vertices.sort_unstable();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(TopoError::RepeatedVertex(vertices));
        }
        Ok(Simplex(vertices))
    }

    pub(crate) fn from_sorted(vertices: Vec<u32>) -> Self {
        debug_assert!(!vertices.is_empty() && vertices.windows(2).all(|w| w[0] < w[1]));
        Simplex(vertices)
    }

    pub fn vertices(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// Codimension-one faces, the i-th obtained by removing the i-th vertex.
    /// A vertex has an empty boundary.
    pub fn boundary(&self) -> Vec<Simplex> {
        if self.0.len() == 1 {
            return Vec::new();
        }
        (0..self.0.len())
            .map(|skip| {
                Simplex(
                    self.0
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &v)| v)
                        .collect(),
                )
            })
            .collect()
    }

    pub fn is_face_of(&self, other: &Simplex) -> bool {
        self.0.len() <= other.0.len() && self.0.iter().all(|v| other.0.binary_search(v).is_ok())
    }
}

/// Boundary of a chain with coefficients in the two-element field: faces
/// occurring an even number of times cancel.
pub fn boundary_chain(chain: &[Simplex]) -> Vec<Simplex> {
    let mut counts: HashMap<Simplex, usize> = HashMap::new();
    for s in chain {
        for f in s.boundary() {
            *counts.entry(f).or_default() += 1;
        }
    }
    let mut out: Vec<Simplex> = counts
        .into_iter()
        .filter(|(_, c)| c % 2 == 1)
        .map(|(s, _)| s)
        .collect();
    out.sort();
    out
}

/// A finite simplicial complex closed under taking faces.
#[derive(Debug)]
pub struct SimplicialComplex {
    simplices: Vec<Simplex>,
    index: HashMap<Simplex, usize>,
    facets: Vec<Vec<usize>>,
    cofacets: Vec<Vec<usize>>,
    /// `dim_offsets[p]..dim_offsets[p + 1]` are the ids of the p-simplices.
    dim_offsets: Vec<usize>,
}

impl SimplicialComplex {
    /// Face closure of the given vertex lists. Simplices above `max_dim`
    /// (when given) are dropped before closing.
    pub fn from_simplices<I, S>(input: I, max_dim: Option<usize>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u32]>,
    {
        let mut all: std::collections::HashSet<Vec<u32>> = std::collections::HashSet::new();
        for s in input {
            let s = Simplex::new(s.as_ref().to_vec())?;
            let v = s.0;
            let k = v.len();
            let top = max_dim.map_or(k, |d| k.min(d + 1));
            // every non-empty subset of size <= top
            for size in 1..=top {
                for combo in combinations(&v, size) {
                    all.insert(combo);
                }
            }
        }
        let mut simplices: Vec<Simplex> = all.into_iter().map(Simplex::from_sorted).collect();
        simplices.sort_by(cmp_dim_lex);
        Ok(Self::from_sorted_closed(simplices))
    }

    /// The full simplex on `n` vertices truncated at dimension `max_dim`.
    pub fn complete(n: usize, max_dim: usize) -> Self {
        let verts: Vec<u32> = (0..n as u32).collect();
        let mut simplices = Vec::new();
        for size in 1..=(max_dim + 1).min(n) {
            simplices.extend(combinations(&verts, size).map(Simplex::from_sorted));
        }
        Self::from_sorted_closed(simplices)
    }

    fn from_sorted_closed(simplices: Vec<Simplex>) -> Self {
        let index: HashMap<Simplex, usize> = simplices
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let facets: Vec<Vec<usize>> = simplices
            .iter()
            .map(|s| s.boundary().iter().map(|f| index[f]).collect())
            .collect();
        let mut cofacets = vec![Vec::new(); simplices.len()];
        for (i, fs) in facets.iter().enumerate() {
            for &f in fs {
                cofacets[f].push(i);
            }
        }
        let max_dim = simplices.last().map_or(0, |s| s.dim());
        let mut dim_offsets = vec![0; max_dim + 2];
        for s in &simplices {
            dim_offsets[s.dim() + 1] += 1;
        }
        for p in 1..dim_offsets.len() {
            dim_offsets[p] += dim_offsets[p - 1];
        }
        SimplicialComplex {
            simplices,
            index,
            facets,
            cofacets,
            dim_offsets,
        }
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn simplex(&self, id: usize) -> &Simplex {
        &self.simplices[id]
    }

    pub fn id_of(&self, s: &Simplex) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn id_of_vertices(&self, v: &[u32]) -> Result<usize> {
        let s = Simplex::new(v.to_vec())?;
        self.id_of(&s).ok_or(TopoError::UnknownSimplex(s.0))
    }

    /// Codimension-one faces of simplex `id`.
    pub fn facets(&self, id: usize) -> &[usize] {
        &self.facets[id]
    }

    pub fn cofacets(&self, id: usize) -> &[usize] {
        &self.cofacets[id]
    }

    pub fn dim(&self) -> usize {
        self.dim_offsets.len().saturating_sub(2)
    }

    pub fn dim_of(&self, id: usize) -> usize {
        self.simplices[id].dim()
    }

    /// Ids of all p-simplices (empty when p exceeds the dimension).
    pub fn ids_of_dim(&self, p: usize) -> std::ops::Range<usize> {
        if p + 1 >= self.dim_offsets.len() {
            let n = self.len();
            return n..n;
        }
        self.dim_offsets[p]..self.dim_offsets[p + 1]
    }

    pub fn count_of_dim(&self, p: usize) -> usize {
        self.ids_of_dim(p).len()
    }

    /// Number of vertex slots, i.e. one more than the largest vertex id.
    pub fn vertex_count(&self) -> usize {
        self.ids_of_dim(0)
            .map(|i| self.simplices[i].0[0] as usize + 1)
            .max()
            .unwrap_or(0)
    }

    /// Text form: one simplex per line as space-separated vertex ids.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.simplices {
            writeln!(w, "{}", join_ids(&s.0))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lists = Vec::new();
        for (line_no, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            lists.push(parse_ids(line.split_whitespace(), line_no + 1)?);
        }
        Self::from_simplices(lists, None)
    }
}

fn join_ids(v: &[u32]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x}");
    }
    s
}

fn parse_ids<'a>(tokens: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec<u32>> {
    tokens
        .map(|t| {
            t.parse::<u32>().map_err(|e| TopoError::Parse {
                line,
                msg: format!("bad vertex id {t:?}: {e}"),
            })
        })
        .collect()
}

fn cmp_dim_lex(a: &Simplex, b: &Simplex) -> Ordering {
    a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0))
}

/// All `k`-subsets of `items` in lexicographic order.
pub(crate) fn combinations(items: &[u32], k: usize) -> impl Iterator<Item = Vec<u32>> + '_ {
    let n = items.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut done = k > n || k == 0;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out: Vec<u32> = idx.iter().map(|&i| items[i]).collect();
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                done = true;
                break;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    })
}

/// A complex together with one finite value per simplex, monotone under
/// face inclusion.
#[derive(Clone, Debug)]
pub struct Filtration {
    complex: Arc<SimplicialComplex>,
    values: Vec<f64>,
}

impl Filtration {
    pub fn new(complex: Arc<SimplicialComplex>, values: Vec<f64>) -> Result<Self> {
        if values.len() != complex.len() {
            return Err(TopoError::LengthMismatch {
                expected: complex.len(),
                got: values.len(),
            });
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
            return Err(TopoError::NonFinite(v));
        }
        if let Some((face, coface)) = first_violation(&complex, &values) {
            return Err(TopoError::NotMonotone {
                face: complex.simplex(face).0.clone(),
                face_value: values[face],
                coface: complex.simplex(coface).0.clone(),
                coface_value: values[coface],
            });
        }
        Ok(Filtration { complex, values })
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Text form: one simplex per line, value in the last column with 17
    /// significant digits.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (s, v) in self.complex.simplices().iter().zip(&self.values) {
            writeln!(w, "{} {v:.16e}", join_ids(&s.0))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut entries: Vec<(Vec<u32>, f64)> = Vec::new();
        for (line_no, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() < 2 {
                return Err(TopoError::Parse {
                    line: line_no + 1,
                    msg: "expected vertex ids followed by a value".into(),
                });
            }
            let (ids, val) = tokens.split_at(tokens.len() - 1);
            let value: f64 = val[0].parse().map_err(|e| TopoError::Parse {
                line: line_no + 1,
                msg: format!("bad value {:?}: {e}", val[0]),
            })?;
            entries.push((parse_ids(ids.iter().copied(), line_no + 1)?, value));
        }
        let complex = SimplicialComplex::from_simplices(entries.iter().map(|(s, _)| s), None)?;
        if complex.len() != entries.len() {
            return Err(TopoError::Parse {
                line: 0,
                msg: "filtration file is not closed under faces".into(),
            });
        }
        let mut values = vec![0.0; complex.len()];
        for (s, v) in entries {
            values[complex.id_of_vertices(&s)?] = v;
        }
        Filtration::new(Arc::new(complex), values)
    }
}

fn first_violation(complex: &SimplicialComplex, values: &[f64]) -> Option<(usize, usize)> {
    (0..complex.len()).find_map(|s| {
        complex
            .facets(s)
            .iter()
            .find(|&&f| values[f] > values[s])
            .map(|&f| (f, s))
    })
}

/// Restores monotonicity after an update of raw filtration values: faces of
/// decreased simplices are lowered with them, then cofaces are raised to
/// their largest face. Raising wins where the two conflict.
pub fn repair_monotone(complex: &SimplicialComplex, old: &[f64], new: &mut [f64]) {
    let mut lowered: Vec<bool> = old.iter().zip(new.iter()).map(|(o, n)| n < o).collect();
    for p in (1..=complex.dim()).rev() {
        for s in complex.ids_of_dim(p) {
            if !lowered[s] {
                continue;
            }
            for &f in complex.facets(s) {
                if new[f] > new[s] {
                    new[f] = new[s];
                    lowered[f] = true;
                }
            }
        }
    }
    for p in 1..=complex.dim() {
        for s in complex.ids_of_dim(p) {
            for &f in complex.facets(s) {
                if new[f] > new[s] {
                    new[s] = new[f];
                }
            }
        }
    }
}

/// A total order on the simplices of a filtration, listed as simplex ids in
/// increasing order. `ties` lists adjacent positions whose values coincide
/// while their critical witnesses differ (a stratum boundary); it is
/// informational and ignored by equality.
#[derive(Clone, Debug)]
pub struct OrderingSignature {
    pub order: Vec<usize>,
    pub ties: Vec<(usize, usize)>,
}

impl PartialEq for OrderingSignature {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
    }
}

impl Eq for OrderingSignature {}

impl std::hash::Hash for OrderingSignature {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.order.hash(state);
    }
}

impl OrderingSignature {
    /// `position[id]` = rank of simplex `id` in the order.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (i, &s) in self.order.iter().enumerate() {
            pos[s] = i;
        }
        pos
    }

    pub fn has_ties(&self) -> bool {
        !self.ties.is_empty()
    }
}

/// Ascending value, then dimension, then lexicographic vertex list. Faces
/// always precede their cofaces for a monotone filtration.
pub fn total_order(f: &Filtration) -> OrderingSignature {
    OrderingSignature {
        order: order_by_values(f.values()),
        ties: Vec::new(),
    }
}

pub(crate) fn order_by_values(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // ids are already in (dimension, lexicographic) order
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

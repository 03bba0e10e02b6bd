//! Parametrized families of filtrations with closed-form differentials.
//!
//! A family maps a flat parameter vector θ to a filtration of a fixed
//! complex, records for each simplex the witness that realizes its value,
//! and differentiates single simplex values with respect to θ.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::complex::{order_by_values, Filtration, OrderingSignature, SimplicialComplex};
use crate::error::{Result, TopoError};

/// Sparse gradient: (parameter index, partial derivative) entries.
pub type SparseGrad = Vec<(usize, f64)>;

/// An n × d point cloud stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(TopoError::InvalidParameter("point cloud needs n ≥ 1 and d ≥ 1".into()));
        }
        if data.len() != n * d {
            return Err(TopoError::LengthMismatch { expected: n * d, got: data.len() });
        }
        if let Some(&x) = data.iter().find(|x| !x.is_finite()) {
            return Err(TopoError::NonFinite(x));
        }
        Ok(PointCloud { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(TopoError::InvalidParameter("ragged point rows".into()));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Rows at the given indices, in order.
    pub fn select(&self, idx: &[usize]) -> PointCloud {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.point(i));
        }
        PointCloud { n: idx.len(), d: self.d, data }
    }

    /// Text table with header `x0,...,x{d-1}`, one point per row.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.d).map(|k| format!("x{k}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n {
            let row: Vec<String> = self.point(i).iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with('x')) {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|e| TopoError::Parse { line: i + 1, msg: e.to_string() })?);
        }
        Self::from_rows(&rows)
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// What realizes a simplex's filtration value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Witness {
    /// Value identically zero (VR vertices).
    Zero,
    /// Half the distance between two points (VR).
    Pair(u32, u32),
    /// A vertex value (lower-star, height).
    Vertex(u32),
    /// Edge branch ‖x_i − x_j‖ + f(x_i) + f(x_j) of weighted Rips.
    WeightedEdge(u32, u32),
    /// Vertex branch 2·f(x_i) of weighted Rips.
    WeightedVertex(u32),
    /// The raw value of the simplex itself.
    Raw(usize),
}

/// A filtration evaluated at some θ together with its witnesses.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub filtration: Filtration,
    pub witnesses: Vec<Witness>,
    /// Simplices whose witness was chosen among tied branches (weighted Rips).
    pub branch_ties: Vec<usize>,
    pub(crate) weights: Option<Weights>,
}

#[derive(Clone, Debug)]
pub(crate) struct Weights {
    pub values: Vec<f64>,
    /// Per point, gradient of its weight as sparse (coordinate, value).
    pub grads: Vec<SparseGrad>,
}

/// A parametrized family θ ↦ F(θ) of filtrations of a fixed complex.
pub trait FiltrationFamily: Send + Sync {
    fn complex(&self) -> &Arc<SimplicialComplex>;

    fn num_params(&self) -> usize;

    /// Coordinates per parameter row (the ambient dimension for point
    /// clouds, 1 otherwise). Used to report gradient support in rows.
    fn row_width(&self) -> usize {
        1
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation>;

    /// ∇_θ of the value of `simplex` at θ, via its recorded witness.
    fn simplex_gradient(&self, theta: &[f64], eval: &Evaluation, simplex: usize) -> SparseGrad;
}

/// Ordering signature of F(θ), with ties flagged between adjacent simplices
/// of equal value realized by different witnesses.
pub fn strata_signature(family: &dyn FiltrationFamily, theta: &[f64]) -> Result<OrderingSignature> {
    let eval = family.evaluate(theta)?;
    Ok(signature_of(&eval))
}

pub fn signature_of(eval: &Evaluation) -> OrderingSignature {
    let values = eval.filtration.values();
    let order = order_by_values(values);
    let ties = order
        .windows(2)
        .filter(|w| values[w[0]] == values[w[1]] && eval.witnesses[w[0]] != eval.witnesses[w[1]])
        .map(|w| (w[0], w[1]))
        .collect();
    OrderingSignature { order, ties }
}

fn check_len(theta: &[f64], expected: usize) -> Result<()> {
    if theta.len() != expected {
        return Err(TopoError::LengthMismatch { expected, got: theta.len() });
    }
    if let Some(&x) = theta.iter().find(|x| !x.is_finite()) {
        return Err(TopoError::NonFinite(x));
    }
    Ok(())
}

/// Fills higher-simplex values as the max over facets; the witness is the
/// facet witness with the largest value, ties going to the smallest witness.
fn propagate_max(complex: &SimplicialComplex, values: &mut [f64], witnesses: &mut [Witness], from_dim: usize) {
    for p in from_dim..=complex.dim() {
        for s in complex.ids_of_dim(p) {
            let mut best: Option<(f64, Witness)> = None;
            for &f in complex.facets(s) {
                let cand = (values[f], witnesses[f]);
                best = match best {
                    None => Some(cand),
                    Some(b) if cand.0 > b.0 || (cand.0 == b.0 && witness_key(&cand.1) < witness_key(&b.1)) => Some(cand),
                    keep => keep,
                };
            }
            let (v, w) = best.expect("simplex of positive dimension has facets");
            values[s] = v;
            witnesses[s] = w;
        }
    }
}

fn witness_key(w: &Witness) -> (u8, u32, u32) {
    match *w {
        Witness::Zero => (0, 0, 0),
        Witness::Pair(i, j) => (1, i, j),
        Witness::Vertex(i) => (2, i, 0),
        Witness::WeightedEdge(i, j) => (3, i, j),
        Witness::WeightedVertex(i) => (4, i, 0),
        Witness::Raw(s) => (5, s as u32, 0),
    }
}

// ---------------------------------------------------------------------------
// Vietoris–Rips

/// Vietoris–Rips filtration of a point cloud: each simplex enters at half
/// its diameter. θ is the row-major n × d coordinate vector.
pub struct VietorisRips {
    complex: Arc<SimplicialComplex>,
    n: usize,
    d: usize,
}

impl VietorisRips {
    pub fn new(n: usize, d: usize, max_dim: usize) -> Result<Self> {
        if n == 0 || d == 0 || max_dim > n - 1 {
            return Err(TopoError::InvalidParameter(format!(
                "Vietoris–Rips needs n ≥ 1, d ≥ 1 and max_dim ≤ n − 1 (n={n}, d={d}, max_dim={max_dim})"
            )));
        }
        Ok(Self::with_complex(Arc::new(SimplicialComplex::complete(n, max_dim)), d))
    }

    /// Reuses an existing complete complex (e.g. shared between steps).
    pub fn with_complex(complex: Arc<SimplicialComplex>, d: usize) -> Self {
        let n = complex.vertex_count();
        VietorisRips { complex, n, d }
    }
}

/// Convenience: the VR filtration of a point cloud up to `max_dim`.
pub fn vr_filtration(x: &PointCloud, max_dim: usize) -> Result<Filtration> {
    let fam = VietorisRips::new(x.len(), x.dim(), max_dim.min(x.len() - 1))?;
    Ok(fam.evaluate(x.as_slice())?.filtration)
}

/// Gradient of ½‖x_i − x_j‖ for the witness pair of `simplex`.
pub fn vr_gradient(x: &PointCloud, simplex: &[u32]) -> SparseGrad {
    let mut best: Option<(f64, u32, u32)> = None;
    for (a, &i) in simplex.iter().enumerate() {
        for &j in &simplex[a + 1..] {
            let v = 0.5 * dist(x.point(i as usize), x.point(j as usize));
            if best.is_none_or(|b| v > b.0) {
                best = Some((v, i, j));
            }
        }
    }
    match best {
        Some((_, i, j)) => pair_gradient(x.as_slice(), x.dim(), i as usize, j as usize, 0.5),
        None => Vec::new(),
    }
}

/// Gradient of `scale·‖x_i − x_j‖`; zero for coincident points.
fn pair_gradient(theta: &[f64], d: usize, i: usize, j: usize, scale: f64) -> SparseGrad {
    let xi = &theta[i * d..(i + 1) * d];
    let xj = &theta[j * d..(j + 1) * d];
    let len = dist(xi, xj);
    if len == 0.0 {
        return Vec::new();
    }
    let mut g = Vec::with_capacity(2 * d);
    for k in 0..d {
        let u = scale * (xi[k] - xj[k]) / len;
        g.push((i * d + k, u));
        g.push((j * d + k, -u));
    }
    g
}

impl FiltrationFamily for VietorisRips {
    fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    fn num_params(&self) -> usize {
        self.n * self.d
    }

    fn row_width(&self) -> usize {
        self.d
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        check_len(theta, self.num_params())?;
        let k = &*self.complex;
        let mut values = vec![0.0; k.len()];
        let mut witnesses = vec![Witness::Zero; k.len()];
        let d = self.d;
        for s in k.ids_of_dim(1) {
            let v = k.simplex(s).vertices();
            let (i, j) = (v[0] as usize, v[1] as usize);
            values[s] = 0.5 * dist(&theta[i * d..(i + 1) * d], &theta[j * d..(j + 1) * d]);
            witnesses[s] = Witness::Pair(v[0], v[1]);
        }
        propagate_max(k, &mut values, &mut witnesses, 2);
        Ok(Evaluation {
            filtration: Filtration::new(self.complex.clone(), values)?,
            witnesses,
            branch_ties: Vec::new(),
            weights: None,
        })
    }

    fn simplex_gradient(&self, theta: &[f64], eval: &Evaluation, simplex: usize) -> SparseGrad {
        match eval.witnesses[simplex] {
            Witness::Pair(i, j) => pair_gradient(theta, self.d, i as usize, j as usize, 0.5),
            _ => Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Weighted Rips

/// Per-point weight f(x_i) of a weighted Rips filtration.
#[derive(Clone)]
pub enum WeightSpec {
    /// Fixed weights, independent of the coordinates.
    Constant(Vec<f64>),
    /// Weight as a function of the point's own coordinates, returning the
    /// value and its gradient.
    Function(Arc<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync>),
    /// Distance to measure: mean distance to the k nearest other points.
    Dtm { k: usize },
}

impl std::fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeightSpec::Constant(w) => write!(f, "Constant({} weights)", w.len()),
            WeightSpec::Function(_) => write!(f, "Function(..)"),
            WeightSpec::Dtm { k } => write!(f, "Dtm {{ k: {k} }}"),
        }
    }
}

/// Weighted Rips filtration: vertices at 2f(x_i), edges at
/// max{2f(x_i), 2f(x_j), ‖x_i − x_j‖ + f(x_i) + f(x_j)}, higher simplices
/// at the max over their edges.
pub struct WeightedRips {
    complex: Arc<SimplicialComplex>,
    n: usize,
    d: usize,
    weights: WeightSpec,
}

impl WeightedRips {
    pub fn new(n: usize, d: usize, max_dim: usize, weights: WeightSpec) -> Result<Self> {
        Self::with_complex(Arc::new(SimplicialComplex::complete(n, max_dim.min(n.saturating_sub(1)))), d, weights)
    }

    pub fn with_complex(complex: Arc<SimplicialComplex>, d: usize, weights: WeightSpec) -> Result<Self> {
        let n = complex.vertex_count();
        match &weights {
            WeightSpec::Constant(w) if w.len() != n => {
                return Err(TopoError::LengthMismatch { expected: n, got: w.len() });
            }
            WeightSpec::Dtm { k } if *k == 0 || *k >= n => {
                return Err(TopoError::InvalidParameter(format!("DTM needs 1 ≤ k < n (k={k}, n={n})")));
            }
            _ => {}
        }
        Ok(WeightedRips { complex, n, d, weights })
    }

    fn compute_weights(&self, theta: &[f64]) -> Weights {
        let d = self.d;
        let pt = |i: usize| &theta[i * d..(i + 1) * d];
        match &self.weights {
            WeightSpec::Constant(w) => Weights { values: w.clone(), grads: vec![Vec::new(); self.n] },
            WeightSpec::Function(func) => {
                let mut values = Vec::with_capacity(self.n);
                let mut grads = Vec::with_capacity(self.n);
                for i in 0..self.n {
                    let (v, g) = func(pt(i));
                    values.push(v);
                    grads.push(g.into_iter().enumerate().map(|(c, x)| (i * d + c, x)).collect());
                }
                Weights { values, grads }
            }
            WeightSpec::Dtm { k } => {
                let k = *k;
                let mut values = Vec::with_capacity(self.n);
                let mut grads = Vec::with_capacity(self.n);
                for i in 0..self.n {
                    let mut nb: Vec<(f64, usize)> =
                        (0..self.n).filter(|&j| j != i).map(|j| (dist(pt(i), pt(j)), j)).collect();
                    nb.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    nb.truncate(k);
                    values.push(nb.iter().map(|x| x.0).sum::<f64>() / k as f64);
                    let mut g: SparseGrad = Vec::new();
                    for &(_, j) in &nb {
                        for (idx, v) in pair_gradient(theta, d, i, j, 1.0 / k as f64) {
                            g.push((idx, v));
                        }
                    }
                    grads.push(g);
                }
                Weights { values, grads }
            }
        }
    }
}

impl FiltrationFamily for WeightedRips {
    fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    fn num_params(&self) -> usize {
        self.n * self.d
    }

    fn row_width(&self) -> usize {
        self.d
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        check_len(theta, self.num_params())?;
        let w = self.compute_weights(theta);
        let k = &*self.complex;
        let d = self.d;
        let mut values = vec![0.0; k.len()];
        let mut witnesses = vec![Witness::Zero; k.len()];
        let mut branch_ties = Vec::new();
        for s in k.ids_of_dim(0) {
            let i = k.simplex(s).vertices()[0];
            values[s] = 2.0 * w.values[i as usize];
            witnesses[s] = Witness::WeightedVertex(i);
        }
        for s in k.ids_of_dim(1) {
            let v = k.simplex(s).vertices();
            let (i, j) = (v[0] as usize, v[1] as usize);
            let edge = dist(&theta[i * d..(i + 1) * d], &theta[j * d..(j + 1) * d]) + w.values[i] + w.values[j];
            // heavier vertex first; equal weights go to the smaller id
            let (hv, hw) = if w.values[j] > w.values[i] { (v[1], w.values[j]) } else { (v[0], w.values[i]) };
            let vert = 2.0 * hw;
            if edge >= vert {
                values[s] = edge;
                witnesses[s] = Witness::WeightedEdge(v[0], v[1]);
            } else {
                values[s] = vert;
                witnesses[s] = Witness::WeightedVertex(hv);
            }
            if edge == vert || (w.values[i] == w.values[j] && vert > edge) {
                branch_ties.push(s);
            }
        }
        propagate_max(k, &mut values, &mut witnesses, 2);
        Ok(Evaluation {
            filtration: Filtration::new(self.complex.clone(), values)?,
            witnesses,
            branch_ties,
            weights: Some(w),
        })
    }

    fn simplex_gradient(&self, theta: &[f64], eval: &Evaluation, simplex: usize) -> SparseGrad {
        let w = eval.weights.as_ref().expect("weighted Rips evaluation carries weights");
        match eval.witnesses[simplex] {
            Witness::WeightedVertex(i) => w.grads[i as usize].iter().map(|&(c, g)| (c, 2.0 * g)).collect(),
            Witness::WeightedEdge(i, j) => {
                let mut g = pair_gradient(theta, self.d, i as usize, j as usize, 1.0);
                g.extend_from_slice(&w.grads[i as usize]);
                g.extend_from_slice(&w.grads[j as usize]);
                g
            }
            _ => Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Lower-star and height

/// Lower-star filtration of vertex values on a fixed complex: each simplex
/// takes the max over its vertices. θ is the vector of vertex values.
pub struct LowerStar {
    complex: Arc<SimplicialComplex>,
}

impl LowerStar {
    pub fn new(complex: Arc<SimplicialComplex>) -> Self {
        LowerStar { complex }
    }
}

pub fn lower_star_filtration(complex: &Arc<SimplicialComplex>, f: &[f64]) -> Result<Filtration> {
    Ok(LowerStar::new(complex.clone()).evaluate(f)?.filtration)
}

fn lower_star_eval(complex: &Arc<SimplicialComplex>, vertex_values: &[f64]) -> Result<Evaluation> {
    let k = &**complex;
    let mut values = vec![0.0; k.len()];
    let mut witnesses = vec![Witness::Zero; k.len()];
    for s in k.ids_of_dim(0) {
        let i = k.simplex(s).vertices()[0];
        values[s] = vertex_values[i as usize];
        witnesses[s] = Witness::Vertex(i);
    }
    propagate_max(k, &mut values, &mut witnesses, 1);
    Ok(Evaluation {
        filtration: Filtration::new(complex.clone(), values)?,
        witnesses,
        branch_ties: Vec::new(),
        weights: None,
    })
}

impl FiltrationFamily for LowerStar {
    fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    fn num_params(&self) -> usize {
        self.complex.vertex_count()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        check_len(theta, self.num_params())?;
        lower_star_eval(&self.complex, theta)
    }

    fn simplex_gradient(&self, _theta: &[f64], eval: &Evaluation, simplex: usize) -> SparseGrad {
        match eval.witnesses[simplex] {
            Witness::Vertex(i) => vec![(i as usize, 1.0)],
            _ => Vec::new(),
        }
    }
}

/// Height filtration of an embedded complex along a direction θ: the
/// lower-star filtration of x ↦ ⟨x, θ/‖θ‖⟩. θ is the direction.
pub struct Height {
    complex: Arc<SimplicialComplex>,
    positions: PointCloud,
}

impl Height {
    pub fn new(complex: Arc<SimplicialComplex>, positions: PointCloud) -> Result<Self> {
        if positions.len() != complex.vertex_count() {
            return Err(TopoError::LengthMismatch { expected: complex.vertex_count(), got: positions.len() });
        }
        Ok(Height { complex, positions })
    }
}

pub fn height_filtration(complex: &Arc<SimplicialComplex>, positions: &PointCloud, theta: &[f64]) -> Result<Filtration> {
    Ok(Height::new(complex.clone(), positions.clone())?.evaluate(theta)?.filtration)
}

impl FiltrationFamily for Height {
    fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    fn num_params(&self) -> usize {
        self.positions.dim()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        check_len(theta, self.num_params())?;
        let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(TopoError::InvalidParameter("height direction is zero".into()));
        }
        if (norm - 1.0).abs() > 1e-12 {
            log::warn!("height direction has norm {norm}; normalizing");
        }
        let heights: Vec<f64> = (0..self.positions.len())
            .map(|i| self.positions.point(i).iter().zip(theta).map(|(x, t)| x * t).sum::<f64>() / norm)
            .collect();
        lower_star_eval(&self.complex, &heights)
    }

    /// (I − θ̂θ̂ᵀ)·x_witness / ‖θ‖, the derivative of ⟨x, θ/‖θ‖⟩.
    fn simplex_gradient(&self, theta: &[f64], eval: &Evaluation, simplex: usize) -> SparseGrad {
        let Witness::Vertex(i) = eval.witnesses[simplex] else {
            return Vec::new();
        };
        let x = self.positions.point(i as usize);
        let norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        let u: Vec<f64> = theta.iter().map(|t| t / norm).collect();
        let dot: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
        x.iter().zip(&u).enumerate().map(|(k, (xk, uk))| (k, (xk - dot * uk) / norm)).collect()
    }
}

// ---------------------------------------------------------------------------
// Raw values

/// The filtration values themselves as parameters.
pub struct RawValues {
    complex: Arc<SimplicialComplex>,
}

impl RawValues {
    pub fn new(complex: Arc<SimplicialComplex>) -> Self {
        RawValues { complex }
    }
}

impl FiltrationFamily for RawValues {
    fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    fn num_params(&self) -> usize {
        self.complex.len()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        check_len(theta, self.num_params())?;
        Ok(Evaluation {
            filtration: Filtration::new(self.complex.clone(), theta.to_vec())?,
            witnesses: (0..theta.len()).map(Witness::Raw).collect(),
            branch_ties: Vec::new(),
            weights: None,
        })
    }

    fn simplex_gradient(&self, _theta: &[f64], _eval: &Evaluation, simplex: usize) -> SparseGrad {
        vec![(simplex, 1.0)]
    }
}

/// The standard 9-vertex triangulation of the torus: a 3 × 3 grid with
/// opposite sides identified, each square split along its diagonal.
pub fn torus_complex() -> SimplicialComplex {
    let id = |i: u32, j: u32| 3 * (i % 3) + (j % 3);
    let mut tris = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            tris.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tris.push(vec![id(i, j), id(i, j + 1), id(i + 1, j + 1)]);
        }
    }
    SimplicialComplex::from_simplices(tris, None).expect("torus triangles are valid")
}

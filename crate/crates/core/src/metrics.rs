//! Partial-matching distances between persistence diagrams.

use std::io::Write;

use crate::error::Result;
use crate::persistence::DiagramPoint;

/// One assignment of a partial matching: an index into each diagram, or
/// `None` for the diagonal.
pub type MatchPair = (Option<usize>, Option<usize>);

#[derive(Clone, Debug, PartialEq)]
pub struct PartialMatching {
    pub pairs: Vec<MatchPair>,
    pub cost: f64,
}

impl PartialMatching {
    /// `side_a,side_b` table, `-1` for the diagonal.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "side_a,side_b")?;
        let idx = |x: Option<usize>| x.map_or("-1".to_string(), |i| i.to_string());
        for &(a, b) in &self.pairs {
            writeln!(w, "{},{}", idx(a), idx(b))?;
        }
        Ok(())
    }

    /// Index in β matched to each point of α (`None` = diagonal).
    pub fn partner_of_a(&self, m1: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; m1];
        for &(a, b) in &self.pairs {
            if let Some(i) = a {
                out[i] = b;
            }
        }
        out
    }
}

/// L_{q′} distance between two diagram points.
pub fn ground_distance(x: &DiagramPoint, y: &DiagramPoint, q_ground: f64) -> f64 {
    let (u, v) = ((x.birth - y.birth).abs(), (x.death - y.death).abs());
    if q_ground.is_infinite() {
        u.max(v)
    } else if q_ground == 2.0 {
        u.hypot(v)
    } else {
        (u.powf(q_ground) + v.powf(q_ground)).powf(1.0 / q_ground)
    }
}

/// L_{q′} distance from a point to the diagonal, attained at
/// ((b+d)/2, (b+d)/2).
pub fn diagonal_distance(x: &DiagramPoint, q_ground: f64) -> f64 {
    let h = (x.death - x.birth).abs() / 2.0;
    if q_ground.is_infinite() {
        h
    } else if q_ground == 2.0 {
        h * std::f64::consts::SQRT_2
    } else {
        h * 2f64.powf(1.0 / q_ground)
    }
}

/// Orthogonal projection onto the diagonal.
pub fn diagonal_projection(x: &DiagramPoint) -> DiagramPoint {
    let m = (x.birth + x.death) / 2.0;
    DiagramPoint::new(m, m)
}

fn strip_essential(a: &[DiagramPoint]) -> Vec<DiagramPoint> {
    let out: Vec<DiagramPoint> = a.iter().copied().filter(|x| !x.is_essential()).collect();
    if out.len() != a.len() {
        log::debug!("dropped {} essential points", a.len() - out.len());
    }
    out
}

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian
/// algorithm with potentials). Returns `row → column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; p[j] = row assigned to column j
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}

/// Cost of a matching under order q (q = ∞ gives the max).
fn total_cost(costs: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        costs.fold(0.0, f64::max)
    } else {
        costs.map(|c| c.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Cost of each assignment under the ground norm.
pub fn matching_costs(a: &[DiagramPoint], b: &[DiagramPoint], pairs: &[MatchPair], q_ground: f64) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(i, j)| match (i, j) {
            (Some(i), Some(j)) => ground_distance(&a[i], &b[j], q_ground),
            (Some(i), None) => diagonal_distance(&a[i], q_ground),
            (None, Some(j)) => diagonal_distance(&b[j], q_ground),
            (None, None) => 0.0,
        })
        .collect()
}

/// Evaluates the q-cost of a given matching.
pub fn matching_cost(a: &[DiagramPoint], b: &[DiagramPoint], pairs: &[MatchPair], q: f64, q_ground: f64) -> f64 {
    total_cost(matching_costs(a, b, pairs, q_ground).into_iter(), q)
}

/// FG_q distance between the ordinary parts of two diagrams, with an
/// optimal matching. Essential points are ignored.
pub fn fg_distance(a: &[DiagramPoint], b: &[DiagramPoint], q: f64, q_ground: f64) -> (f64, PartialMatching) {
    assert!(q >= 1.0, "order q must be ≥ 1");
    if q.is_infinite() {
        let a = strip_essential(a);
        let b = strip_essential(b);
        let (d, pairs) = bottleneck_matching(&a, &b, q_ground);
        return (d, PartialMatching { pairs, cost: d });
    }
    let a = strip_essential(a);
    let b = strip_essential(b);
    let (m1, m2) = (a.len(), b.len());
    let n = m1 + m2;
    let mut cost = vec![vec![0.0; n]; n];
    for i in 0..m1 {
        for j in 0..m2 {
            cost[i][j] = ground_distance(&a[i], &b[j], q_ground).powf(q);
        }
        let dq = diagonal_distance(&a[i], q_ground).powf(q);
        for j in m2..n {
            cost[i][j] = dq;
        }
    }
    for j in 0..m2 {
        let dq = diagonal_distance(&b[j], q_ground).powf(q);
        for row in cost.iter_mut().skip(m1) {
            row[j] = dq;
        }
    }
    let assign = hungarian(&cost);
    let mut pairs = Vec::with_capacity(n);
    for (i, &j) in assign.iter().enumerate() {
        match (i < m1, j < m2) {
            (true, true) => pairs.push((Some(i), Some(j))),
            (true, false) => pairs.push((Some(i), None)),
            (false, true) => pairs.push((None, Some(j))),
            (false, false) => {}
        }
    }
    let d = matching_cost(&a, &b, &pairs, q, q_ground);
    (d, PartialMatching { pairs, cost: d })
}

/// Bottleneck distance (L∞ ground norm, sup over the matching).
pub fn bottleneck_distance(a: &[DiagramPoint], b: &[DiagramPoint]) -> f64 {
    let a = strip_essential(a);
    let b = strip_essential(b);
    bottleneck_matching(&a, &b, f64::INFINITY).0
}

/// Bottleneck distance of full diagrams: essential points must be matched
/// to essential points (sorted births are optimal in one dimension).
pub fn bottleneck_with_essential(a: &[DiagramPoint], b: &[DiagramPoint]) -> f64 {
    let mut ea: Vec<f64> = a.iter().filter(|x| x.is_essential()).map(|x| x.birth).collect();
    let mut eb: Vec<f64> = b.iter().filter(|x| x.is_essential()).map(|x| x.birth).collect();
    if ea.len() != eb.len() {
        return f64::INFINITY;
    }
    ea.sort_by(f64::total_cmp);
    eb.sort_by(f64::total_cmp);
    let ess = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ess.max(bottleneck_distance(a, b))
}

fn bottleneck_matching(a: &[DiagramPoint], b: &[DiagramPoint], q_ground: f64) -> (f64, Vec<MatchPair>) {
    let (m1, m2) = (a.len(), b.len());
    let n = m1 + m2;
    // edge cost in the augmented bipartite graph; diagonal–diagonal is free
    let edge = |i: usize, j: usize| -> f64 {
        match (i < m1, j < m2) {
            (true, true) => ground_distance(&a[i], &b[j], q_ground),
            (true, false) => diagonal_distance(&a[i], q_ground),
            (false, true) => diagonal_distance(&b[j], q_ground),
            (false, false) => 0.0,
        }
    };
    let mut candidates: Vec<f64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            candidates.push(edge(i, j));
        }
    }
    candidates.push(0.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let feasible = |eps: f64| perfect_matching(n, |i, j| edge(i, j) <= eps);
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let eps = candidates[lo];
    let assign = feasible(eps).expect("largest candidate is always feasible");
    let mut pairs = Vec::new();
    for (i, &j) in assign.iter().enumerate() {
        match (i < m1, j < m2) {
            (true, true) => pairs.push((Some(i), Some(j))),
            (true, false) => pairs.push((Some(i), None)),
            (false, true) => pairs.push((None, Some(j))),
            (false, false) => {}
        }
    }
    (eps, pairs)
}

/// Perfect matching in a bipartite graph on n + n vertices by augmenting
/// paths; returns `left → right` when one exists.
fn perfect_matching(n: usize, adj: impl Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    let mut match_r: Vec<Option<usize>> = vec![None; n];
    fn augment(
        i: usize,
        n: usize,
        adj: &dyn Fn(usize, usize) -> bool,
        seen: &mut [bool],
        match_r: &mut [Option<usize>],
    ) -> bool {
        for j in 0..n {
            if adj(i, j) && !seen[j] {
                seen[j] = true;
                if match_r[j].is_none_or(|k| augment(k, n, adj, seen, match_r)) {
                    match_r[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, n, &adj, &mut seen, &mut match_r) {
            return None;
        }
    }
    let mut left = vec![0; n];
    for (j, i) in match_r.iter().enumerate() {
        left[i.expect("perfect")] = j;
    }
    Some(left)
}

/// Exhaustive minimum over all partial matchings (for small diagrams).
pub fn fg_distance_exhaustive(a: &[DiagramPoint], b: &[DiagramPoint], q: f64, q_ground: f64) -> f64 {
    fn rec(
        i: usize,
        a: &[DiagramPoint],
        b: &[DiagramPoint],
        used: &mut Vec<bool>,
        pairs: &mut Vec<MatchPair>,
        q: f64,
        qg: f64,
        best: &mut f64,
    ) {
        if i == a.len() {
            let mut all = pairs.clone();
            for (j, u) in used.iter().enumerate() {
                if !u {
                    all.push((None, Some(j)));
                }
            }
            let c = matching_cost(a, b, &all, q, qg);
            if c < *best {
                *best = c;
            }
            return;
        }
        pairs.push((Some(i), None));
        rec(i + 1, a, b, used, pairs, q, qg, best);
        pairs.pop();
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                pairs.push((Some(i), Some(j)));
                rec(i + 1, a, b, used, pairs, q, qg, best);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    let a = strip_essential(a);
    let b = strip_essential(b);
    let mut best = f64::INFINITY;
    rec(0, &a, &b, &mut vec![false; b.len()], &mut Vec::new(), q, q_ground, &mut best);
    best
}

//! Independent oracles and randomized property suites, shared by the test
//! suites and the `check` command.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::complex::{total_order, Filtration, SimplicialComplex};
use crate::persistence::{DiagramPoint, PersistencePairing};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random complex on at most 6 vertices with at most `max_simplices`
/// simplices (and at least one).
pub fn random_complex<R: Rng>(rng: &mut R, max_simplices: usize) -> SimplicialComplex {
    let nv: u32 = rng.random_range(2..=6);
    let mut gens: Vec<Vec<u32>> = (0..nv).map(|v| vec![v]).collect();
    let mut current = SimplicialComplex::from_simplices(&gens, None).unwrap();
    for _ in 0..40 {
        let size = rng.random_range(2..=4usize.min(nv as usize));
        let mut verts: Vec<u32> = (0..nv).collect();
        // partial Fisher–Yates
        for i in 0..size {
            let j = rng.random_range(i..verts.len());
            verts.swap(i, j);
        }
        let cand: Vec<u32> = verts[..size].to_vec();
        gens.push(cand);
        let next = SimplicialComplex::from_simplices(&gens, None).unwrap();
        if next.len() > max_simplices {
            gens.pop();
        } else {
            current = next;
        }
    }
    current
}

/// Random monotone values. With `distinct`, every simplex strictly exceeds
/// its facets and values are almost surely pairwise distinct; otherwise
/// values are small integers with many ties.
pub fn random_values<R: Rng>(rng: &mut R, k: &SimplicialComplex, distinct: bool) -> Vec<f64> {
    let mut values = vec![0.0; k.len()];
    for s in 0..k.len() {
        let floor = k.facets(s).iter().map(|&f| values[f]).fold(f64::NEG_INFINITY, f64::max);
        values[s] = if distinct {
            let base = if floor.is_finite() { floor } else { 0.0 };
            base + rng.random_range(0.01..1.0)
        } else if floor.is_finite() {
            floor + f64::from(rng.random_range(0..2u8))
        } else {
            f64::from(rng.random_range(0..4u8))
        };
    }
    values
}

pub fn random_filtration<R: Rng>(rng: &mut R, max_simplices: usize, distinct: bool) -> Filtration {
    let k = Arc::new(random_complex(rng, max_simplices));
    let values = random_values(rng, &k, distinct);
    Filtration::new(k, values).unwrap()
}

/// Rank of a set of F2 vectors given as bitmasks (≤ 64 coordinates each
/// word; vectors are `Vec<u64>`).
fn rank(mut rows: Vec<Vec<u64>>) -> usize {
    let mut r = 0;
    let words = rows.first().map_or(0, Vec::len);
    for bit in 0..words * 64 {
        let (w, b) = (bit / 64, 1u64 << (bit % 64));
        if let Some(i) = (r..rows.len()).find(|&i| rows[i][w] & b != 0) {
            rows.swap(r, i);
            let pivot = rows[r].clone();
            for (j, row) in rows.iter_mut().enumerate() {
                if j != r && row[w] & b != 0 {
                    for (x, y) in row.iter_mut().zip(&pivot) {
                        *x ^= y;
                    }
                }
            }
            r += 1;
        }
    }
    r
}

/// Persistence pairing from ranks of the maps between sublevel complexes:
/// the multiplicity of the pair (position i, position j) in dimension p is
/// β^{i,j−1} − β^{i,j} − β^{i−1,j−1} + β^{i−1,j}, where β^{a,b} is the rank
/// of H_p(K_a) → H_p(K_b) and K_a holds the first a + 1 simplices.
pub fn oracle_pairing(f: &Filtration) -> PersistencePairing {
    let k = f.complex();
    let order = total_order(f).order;
    let n = order.len();
    let mut pos = vec![0; n];
    for (i, &s) in order.iter().enumerate() {
        pos[s] = i;
    }
    let words = n.div_ceil(64);
    let bd = |s: usize| -> Vec<u64> {
        let mut v = vec![0u64; words];
        for &fc in k.facets(s) {
            v[pos[fc] / 64] |= 1 << (pos[fc] % 64);
        }
        v
    };
    // persistent Betti number of dimension p between prefixes a ≤ b
    // (a, b as counts of simplices; K_a = first a simplices)
    let beta = |p: usize, a: usize, b: usize| -> i64 {
        let cp: Vec<usize> = order[..a].iter().copied().filter(|&s| k.dim_of(s) == p).collect();
        let z = cp.len() - rank(cp.iter().map(|&s| bd(s)).collect());
        let bnd: Vec<Vec<u64>> = order[..b].iter().copied().filter(|&s| k.dim_of(s) == p + 1).map(bd).collect();
        let mask_out = |v: &Vec<u64>| -> Vec<u64> {
            let mut m = v.clone();
            for i in 0..a {
                m[i / 64] &= !(1 << (i % 64));
            }
            m
        };
        let rb = rank(bnd.clone());
        let rb_out = rank(bnd.iter().map(mask_out).collect());
        (z as i64) - (rb as i64 - rb_out as i64)
    };
    let mut pairs = Vec::new();
    let mut unpaired = Vec::new();
    for i in 0..n {
        let p = k.dim_of(order[i]);
        for j in (i + 1)..n {
            if k.dim_of(order[j]) != p + 1 {
                continue;
            }
            let mu = beta(p, i + 1, j) - beta(p, i + 1, j + 1) - beta(p, i, j) + beta(p, i, j + 1);
            assert!((0..=1).contains(&mu), "multiplicity {mu} out of range");
            if mu == 1 {
                pairs.push((order[i], order[j]));
            }
        }
        let ess = beta(p, i + 1, n) - beta(p, i, n);
        if ess == 1 {
            unpaired.push(order[i]);
        }
    }
    PersistencePairing::from_parts(k, &pos, pairs, unpaired)
}

/// Result of a randomized equivalence suite.
#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub trials: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares `reduce`, the fast pairing path and the rank oracle on random
/// filtrations with at most `max_simplices` simplices.
pub fn pairing_suite(seed: u64, trials: usize, max_simplices: usize) -> SuiteReport {
    let mut rng = rng(seed);
    let mut rep = SuiteReport { trials, ..Default::default() };
    for t in 0..trials {
        let f = random_filtration(&mut rng, max_simplices, t % 2 == 0);
        let oracle = oracle_pairing(&f);
        let dec = crate::persistence::reduce(&f);
        if let Err(e) = dec.verify() {
            rep.failures.push(format!("trial {t}: decomposition invalid: {e}"));
        }
        if dec.pairing() != oracle {
            rep.failures.push(format!("trial {t}: reduce pairing differs from oracle"));
        }
        if crate::persistence::persistence_pairs(&f) != oracle {
            rep.failures.push(format!("trial {t}: fast pairing differs from oracle"));
        }
    }
    rep
}

/// Every transposition of a random order, checked against re-reduction;
/// each swap is followed by its inverse.
pub fn vineyard_suite(seed: u64, trials: usize, max_simplices: usize) -> SuiteReport {
    use crate::persistence::{pairs_for_order, ReducedDecomposition};
    let mut rng = rng(seed);
    let mut rep = SuiteReport { trials, ..Default::default() };
    for t in 0..trials {
        let f = random_filtration(&mut rng, max_simplices, true);
        let k = f.complex().clone();
        let dual = t % 2 == 1;
        let mut dec = ReducedDecomposition::new(k.clone(), total_order(&f).order, dual);
        for _ in 0..30 {
            let i = rng.random_range(0..k.len().saturating_sub(1).max(1));
            if i + 1 >= k.len() {
                break;
            }
            let before = dec.pairing();
            if dec.transpose(i).is_err() {
                continue;
            }
            let expect = pairs_for_order(&k, dec.order());
            if dec.pairing() != expect {
                rep.failures.push(format!("trial {t}: pairing after swap {i} differs from re-reduction"));
            }
            if let Err(e) = dec.verify() {
                rep.failures.push(format!("trial {t}: invalid after swap {i}: {e}"));
            }
            if rng.random_bool(0.5) {
                dec.transpose(i).expect("inverse swap is valid");
                if dec.pairing() != before {
                    rep.failures.push(format!("trial {t}: swap {i} and its inverse changed the pairing"));
                }
            }
        }
    }
    rep
}

/// Fast versus naive moving sets on random filtrations with distinct
/// values; records which of the four cases were exercised with a
/// non-trivial window.
pub fn moving_set_suite(seed: u64, trials: usize, max_simplices: usize) -> (SuiteReport, HashSet<crate::schemes::moving_set::MovingCase>) {
    use crate::schemes::moving_set::{moving_set_fast, moving_set_naive, window, FullMatrices, PartialMatrices};
    let mut rng = rng(seed);
    let mut rep = SuiteReport { trials, ..Default::default() };
    let mut cases = HashSet::new();
    for trial in 0..trials {
        let f = random_filtration(&mut rng, max_simplices, true);
        let pos = total_order(&f).positions();
        let pairing = crate::persistence::persistence_pairs(&f);
        let full = FullMatrices::new(&f);
        let dims: Vec<usize> = (0..f.complex().dim()).collect();
        let partial = PartialMatrices::new(&f, &pairing, &dims);
        let vmax = f.values().iter().copied().fold(0.0, f64::max);
        for &(b, d) in pairing.pairs.iter().flatten() {
            for (tau, partner) in [(b, d), (d, b)] {
                let t = rng.random_range(-0.5..vmax + 0.5);
                let naive = match moving_set_naive(&f, tau, partner, t) {
                    Ok(x) => x,
                    Err(e) => {
                        rep.failures.push(format!("trial {trial}: naive failed: {e}"));
                        continue;
                    }
                };
                let (fast, case) = moving_set_fast(&f, &pos, &full, tau, partner, t);
                let (fast_p, _) = moving_set_fast(&f, &pos, &partial, tau, partner, t);
                if naive != fast {
                    rep.failures.push(format!(
                        "trial {trial}: {case:?} tau {tau} partner {partner} t {t}: naive {naive:?} fast {fast:?}"
                    ));
                }
                if fast != fast_p {
                    rep.failures.push(format!("trial {trial}: partial matrices disagree with full ({case:?})"));
                }
                let t_clip = crate::schemes::moving_set::clip_target(&f, tau, t);
                if let Some(c) = case {
                    if !window(&f, &pos, tau, t_clip).is_empty() {
                        cases.insert(c);
                    }
                }
            }
        }
    }
    (rep, cases)
}

/// Random diagram of at most `max_points` ordinary points in [0, 2]².
pub fn random_diagram<R: Rng>(rng: &mut R, max_points: usize) -> Vec<DiagramPoint> {
    let n = rng.random_range(0..=max_points);
    (0..n)
        .map(|_| {
            let b: f64 = rng.random_range(0.0..1.0);
            DiagramPoint::new(b, b + rng.random_range(0.0..1.0))
        })
        .collect()
}

/// FG_q from the assignment solver against exhaustive enumeration of
/// partial matchings, for q ∈ {1, 2, ∞} and ground norms {1, 2, ∞};
/// agreement within `tol` relative to max(1, value).
pub fn metric_suite(seed: u64, trials: usize, max_points: usize, tol: f64) -> SuiteReport {
    use crate::metrics::{fg_distance, fg_distance_exhaustive};
    let mut rng = rng(seed);
    let mut rep = SuiteReport { trials, ..Default::default() };
    for t in 0..trials {
        let a = random_diagram(&mut rng, max_points);
        let b = random_diagram(&mut rng, max_points);
        for q in [1.0, 2.0, f64::INFINITY] {
            for qg in [1.0, 2.0, f64::INFINITY] {
                let (fast, m) = fg_distance(&a, &b, q, qg);
                let slow = fg_distance_exhaustive(&a, &b, q, qg);
                if (fast - slow).abs() > tol * slow.abs().max(1.0) {
                    rep.failures.push(format!("trial {t}: q {q} ground {qg}: solver {fast} enumeration {slow}"));
                }
                let replay = crate::metrics::matching_cost(&a, &b, &m.pairs, q, qg);
                if (replay - fast).abs() > tol * fast.abs().max(1.0) {
                    rep.failures.push(format!("trial {t}: q {q} ground {qg}: matching costs {replay}, reported {fast}"));
                }
            }
        }
    }
    rep
}

/// Bottleneck stability for lower-star filtrations: for random vertex
/// functions f and perturbations g, every dimension's bottleneck distance
/// (essential points included) is at most ‖f − g‖_∞.
pub fn stability_suite(seed: u64, trials: usize) -> SuiteReport {
    use crate::filtrations::lower_star_filtration;
    use crate::metrics::bottleneck_with_essential;
    use crate::persistence::{diagram, persistence_pairs};
    let mut rng = rng(seed);
    let mut rep = SuiteReport { trials, ..Default::default() };
    for t in 0..trials {
        let k = Arc::new(random_complex(&mut rng, 40));
        let nv = k.vertex_count();
        let f: Vec<f64> = (0..nv).map(|_| rng.random_range(0.0..1.0)).collect();
        let scale: f64 = rng.random_range(0.0..0.3);
        let g: Vec<f64> = f.iter().map(|x| x + scale * rng.random_range(-1.0..1.0)).collect();
        let sup = f.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (ff, fg) = (lower_star_filtration(&k, &f).unwrap(), lower_star_filtration(&k, &g).unwrap());
        let (da, db) = (diagram(&ff, &persistence_pairs(&ff), false), diagram(&fg, &persistence_pairs(&fg), false));
        for p in 0..=k.dim() {
            let d = bottleneck_with_essential(da.points(p), db.points(p));
            if d > sup + 1e-12 {
                rep.failures.push(format!("trial {t}: dim {p}: bottleneck {d} exceeds sup-norm {sup}"));
            }
        }
    }
    rep
}

/// Filtration families exercised by [`gradient_suite`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradFamily {
    Rips,
    /// Weighted Rips with distance-to-measure weights (k = 2).
    WeightedRips,
    /// Lower-star filtration of a triangulated 4×4 grid.
    LowerStar,
}

/// Losses exercised by [`gradient_suite`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradLoss {
    TotalPersistence,
    DistanceToTarget,
    Singleton,
}

/// Outcome of a finite-difference gradient suite.
#[derive(Clone, Debug, Default)]
pub struct GradientReport {
    /// Generic configurations checked.
    pub configs: usize,
    /// Draws discarded because a perturbation of size h changed the order.
    pub skipped: usize,
    /// Largest observed ‖fd − g‖_∞ / ‖g‖_∞.
    pub worst: f64,
    pub failures: Vec<String>,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Triangulation of an r × r grid of vertices.
pub fn grid_complex(r: u32) -> SimplicialComplex {
    let mut tris = Vec::new();
    for i in 0..r - 1 {
        for j in 0..r - 1 {
            let (a, b, c, d) = (i * r + j, i * r + j + 1, (i + 1) * r + j, (i + 1) * r + j + 1);
            tris.push(vec![a, b, d]);
            tris.push(vec![a, c, d]);
        }
    }
    SimplicialComplex::from_simplices(&tris, None).unwrap()
}

/// Compares the composite vanilla gradient of `loss` over `family` with
/// central differences (step `h`) at `configs` generic random parameters.
/// A draw is generic when no ±h coordinate perturbation changes the
/// ordering signature; other draws are skipped. The check is
/// ‖fd − g‖_∞ ≤ tol · max(‖g‖_∞, 1e-6).
pub fn gradient_suite(seed: u64, family: GradFamily, loss: GradLoss, configs: usize, h: f64, tol: f64) -> GradientReport {
    use crate::filtrations::{signature_of, FiltrationFamily, LowerStar, VietorisRips, WeightSpec, WeightedRips};
    use crate::losses::{lift, DiagramLoss, LossTerm, Objective, Regularizer};
    use crate::persistence::persistence_pairs;
    let mut rng = rng(seed);
    let mut rep = GradientReport::default();
    let n = 7;
    let fam: Arc<dyn FiltrationFamily> = match family {
        GradFamily::Rips => Arc::new(VietorisRips::new(n, 2, 2).unwrap()),
        GradFamily::WeightedRips => Arc::new(WeightedRips::new(n, 2, 2, WeightSpec::Dtm { k: 2 }).unwrap()),
        GradFamily::LowerStar => Arc::new(LowerStar::new(Arc::new(grid_complex(4)))),
    };
    let np = fam.num_params();
    let mut draws = 0;
    while rep.configs < configs && draws < 20 * configs {
        draws += 1;
        let theta: Vec<f64> = (0..np).map(|_| rng.random_range(0.0..1.0)).collect();
        let eval = fam.evaluate(&theta).unwrap();
        let sig = signature_of(&eval);
        let pairing = persistence_pairs(&eval.filtration);
        let lifts: Vec<_> = (0..2).map(|p| lift(&eval.filtration, &pairing, p)).collect();
        let terms: Vec<LossTerm> = match loss {
            GradLoss::TotalPersistence => (0..2)
                .map(|dim| LossTerm {
                    dim,
                    loss: DiagramLoss::TotalPersistence { sign: 1.0, exponent: 2.0, death_only: false },
                    weight: 1.0,
                })
                .collect(),
            GradLoss::DistanceToTarget => (0..2)
                .map(|dim| LossTerm {
                    dim,
                    loss: DiagramLoss::DistanceToTarget { target: random_diagram(&mut rng, 3) },
                    weight: 1.0,
                })
                .collect(),
            GradLoss::Singleton => {
                // the most persistent point, in dimension 1 when there is one
                let dim = if lifts[1].is_empty() { 0 } else { 1 };
                let Some(x) = lifts[dim].iter().max_by(|a, b| a.point.persistence().total_cmp(&b.point.persistence()))
                else {
                    rep.skipped += 1;
                    continue;
                };
                let target = [rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0)];
                vec![LossTerm {
                    dim,
                    loss: DiagramLoss::Singleton { birth: x.birth_simplex, death: x.death_simplex, target },
                    weight: 1.0,
                }]
            }
        };
        let obj = Objective::new(fam.clone(), terms, Regularizer::None);
        let ev = obj.evaluate_with(&theta, eval, pairing).unwrap();
        let g = obj.gradient(&theta, &ev).unwrap();
        let mut fd = vec![0.0; np];
        let mut generic = true;
        for i in 0..np {
            let mut vals = [0.0; 2];
            for (slot, sgn) in [(0, 1.0), (1, -1.0)] {
                let mut t = theta.clone();
                t[i] += sgn * h;
                let e = fam.evaluate(&t).unwrap();
                if signature_of(&e) != sig {
                    generic = false;
                    break;
                }
                vals[slot] = obj.evaluate_with(&t, e.clone(), persistence_pairs(&e.filtration)).unwrap().loss;
            }
            if !generic {
                break;
            }
            fd[i] = (vals[0] - vals[1]) / (2.0 * h);
        }
        if !generic {
            rep.skipped += 1;
            continue;
        }
        rep.configs += 1;
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let err = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let rel = err / gmax.max(1e-6);
        rep.worst = rep.worst.max(rel);
        if rel > tol {
            rep.failures.push(format!("config {}: {family:?} × {loss:?}: relative error {rel:.3e}", rep.configs));
        }
    }
    if rep.configs < configs {
        rep.failures.push(format!("only {} generic configurations in {draws} draws", rep.configs));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_dependent_rows() {
        assert_eq!(rank(vec![vec![0b011], vec![0b110], vec![0b101]]), 2);
    }

    #[test]
    fn oracle_on_triangle() {
        let k = Arc::new(SimplicialComplex::from_simplices([[0u32, 1, 2]], None).unwrap());
        let f = Filtration::new(k, vec![0.0; 7]).unwrap();
        assert_eq!(oracle_pairing(&f), crate::persistence::reduce(&f).pairing());
    }

    #[test]
    fn random_filtrations_respect_size_cap() {
        let mut r = rng(3);
        for _ in 0..20 {
            let f = random_filtration(&mut r, 30, false);
            assert!(f.len() <= 30 && !f.is_empty());
        }
    }
}

//! Independent oracles shared by the integration tests. Nothing here reuses the
//! adjacency, link or search code under test.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num::{BigInt, BigRational, Signed, Zero};
use fibersurf::{BivariateField, ControlEdge, RangePoint, TetMesh, TetSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Link of the edge `(a, b)` re-derived by scanning every tet.
pub struct BruteLink {
    pub vertices: BTreeSet<u32>,
    pub edges: BTreeSet<(u32, u32)>,
}

pub fn brute_links(mesh: &TetMesh) -> BTreeMap<(u32, u32), BruteLink> {
    let mut links: BTreeMap<(u32, u32), BruteLink> = BTreeMap::new();
    for tet in mesh.tets() {
        for i in 0..4 {
            for j in i + 1..4 {
                let (a, b) = (tet[i].min(tet[j]), tet[i].max(tet[j]));
                let rest: Vec<u32> = (0..4).filter(|&k| k != i && k != j).map(|k| tet[k]).collect();
                let link = links.entry((a, b)).or_insert_with(|| BruteLink {
                    vertices: BTreeSet::new(),
                    edges: BTreeSet::new(),
                });
                link.vertices.extend(&rest);
                link.edges.insert((rest[0].min(rest[1]), rest[0].max(rest[1])));
            }
        }
    }
    links
}

/// Kind of the edge `from -> to` computed from a brute-force link: sides by
/// the exact rational cross product `(f(to) - f(from)) x (f(w) - f(from))`
/// with the id rule for zeros, components by depth-first search.
pub fn brute_kind(field: &BivariateField, from: u32, to: u32, link: &BruteLink) -> &'static str {
    let (u, v) = (field.value(from), field.value(to));
    let positive = |w: u32| {
        let p = field.value(w);
        let q = |x: f64| BigRational::from_float(x).unwrap();
        let d = (q(v.a) - q(u.a)) * (q(p.b) - q(u.b)) - (q(v.b) - q(u.b)) * (q(p.a) - q(u.a));
        if !d.is_zero() {
            d.is_positive()
        } else {
            (w > from.min(to)) != (from > to)
        }
    };
    let mut count = [0usize; 2];
    let mut sizes = [0usize; 2];
    let mut seen = BTreeSet::new();
    for &start in &link.vertices {
        let side = positive(start);
        sizes[side as usize] += 1;
        if !seen.insert(start) {
            continue;
        }
        count[side as usize] += 1;
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for &(p, q) in &link.edges {
                let y = if p == x { q } else if q == x { p } else { continue };
                if positive(y) == side && seen.insert(y) {
                    stack.push(y);
                }
            }
        }
    }
    if sizes[0] == 0 || sizes[1] == 0 {
        "extremum"
    } else if count[0] > 1 || count[1] > 1 {
        "saddle"
    } else {
        "regular"
    }
}

/// Barycentric coordinates of `p` in the tet with corners `c`, by Cramer's rule.
pub fn barycentric(c: [[f64; 3]; 4], p: [f64; 3]) -> [f64; 4] {
    let d = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let det = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| {
        a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0])
    };
    let (e1, e2, e3, r) = (d(c[1], c[0]), d(c[2], c[0]), d(c[3], c[0]), d(p, c[0]));
    let vol = det(e1, e2, e3);
    let l1 = det(r, e2, e3) / vol;
    let l2 = det(e1, r, e3) / vol;
    let l3 = det(e1, e2, r) / vol;
    [1.0 - l1 - l2 - l3, l1, l2, l3]
}

/// Field value at `p` interpolated linearly inside tet `t`.
pub fn interpolate(mesh: &TetMesh, field: &BivariateField, t: u32, p: [f64; 3]) -> RangePoint {
    let ids = mesh.tet(t);
    let w = barycentric(ids.map(|v| mesh.position(v)), p);
    let (mut a, mut b) = (0.0, 0.0);
    for k in 0..4 {
        let f = field.value(ids[k]);
        a += w[k] * f.a;
        b += w[k] * f.b;
    }
    RangePoint::new(a, b)
}

/// Euclidean distance from `p` to the closed segment `e`.
pub fn dist_to_segment(p: RangePoint, e: &ControlEdge) -> f64 {
    let (u, v) = (e.u(), e.v());
    let (da, db) = (v.a - u.a, v.b - u.b);
    let s = (((p.a - u.a) * da + (p.b - u.b) * db) / (da * da + db * db)).clamp(0.0, 1.0);
    p.dist(RangePoint::new(u.a + s * da, u.b + s * db))
}

/// Face-connected components of `set`, as sorted member lists, by BFS over
/// shared-face detection from vertex triples.
pub fn face_components(mesh: &TetMesh, set: &[u32]) -> BTreeSet<Vec<u32>> {
    let mut by_face: BTreeMap<[u32; 3], Vec<u32>> = BTreeMap::new();
    for &t in set {
        let mut v = mesh.tet(t);
        v.sort_unstable();
        for skip in 0..4 {
            let mut f = [0; 3];
            let mut k = 0;
            for (i, &x) in v.iter().enumerate() {
                if i != skip {
                    f[k] = x;
                    k += 1;
                }
            }
            by_face.entry(f).or_default().push(t);
        }
    }
    let mut adj: BTreeMap<u32, Vec<u32>> = set.iter().map(|&t| (t, Vec::new())).collect();
    for ts in by_face.values() {
        if let [a, b] = ts.as_slice() {
            adj.get_mut(a).unwrap().push(*b);
            adj.get_mut(b).unwrap().push(*a);
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = BTreeSet::new();
    for &s in set {
        if !seen.insert(s) {
            continue;
        }
        let mut comp = vec![s];
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &y in &adj[&x] {
                if seen.insert(y) {
                    comp.push(y);
                    stack.push(y);
                }
            }
        }
        comp.sort_unstable();
        out.insert(comp);
    }
    out
}

/// Components of a [`TetSet`] according to its own labels.
pub fn labeled_components(set: &TetSet) -> BTreeSet<Vec<u32>> {
    set.components().into_iter().collect()
}

/// `n` random control edges with both endpoints in the range rectangle whose
/// segments meet the image of at least one tet.
pub fn random_edges(
    mesh: &TetMesh,
    field: &BivariateField,
    n: usize,
    seed: u64,
) -> Vec<ControlEdge> {
    let r = fibersurf::range_rect(field);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut pt = || RangePoint::new(rng.gen_range(r.min.a..r.max.a), rng.gen_range(r.min.b..r.max.b));
        let e = ControlEdge::new(pt(), pt()).unwrap();
        if (0..mesh.n_tets() as u32).any(|t| fibersurf::search::tet_overlaps_segment(mesh, field, t, &e)) {
            out.push(e);
        }
    }
    out
}

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

/// Exact overlap of the closed segment `e` with the hull of `pts`, where every
/// point is lifted by `(eps^2, eps)` for an infinitesimal `eps` before the side
/// test. Crossing parameters are exact rationals.
pub fn rational_overlap(pts: &[RangePoint; 4], e: &ControlEdge) -> bool {
    let (ua, ub, va, vb) = (q(e.u().a), q(e.u().b), q(e.v().a), q(e.v().b));
    let (da, db) = (&va - &ua, &vb - &ub);
    let len2 = &da * &da + &db * &db;
    let eval = |p: &RangePoint| {
        let (pa, pb) = (q(p.a), q(p.b));
        // Cross product (v - u) x (p - u); the lift adds eps * da - eps^2 * db.
        let d = &da * (&pb - &ub) - &db * (&pa - &ua);
        let positive = if !d.is_zero() {
            d.is_positive()
        } else if !da.is_zero() {
            da.is_positive()
        } else {
            db.is_negative()
        };
        let t = ((&pa - &ua) * &da + (&pb - &ub) * &db) / &len2;
        (d, positive, t)
    };
    let probes: Vec<_> = pts.iter().map(eval).collect();
    let mut range: Option<(BigRational, BigRational)> = None;
    for i in 0..4 {
        for j in i + 1..4 {
            let (di, si, ti) = &probes[i];
            let (dj, sj, tj) = &probes[j];
            if si == sj {
                continue;
            }
            let t = if di.is_zero() {
                ti.clone()
            } else if dj.is_zero() {
                tj.clone()
            } else {
                ti + (tj - ti) * (di / (di - dj))
            };
            range = Some(match range {
                None => (t.clone(), t),
                Some((lo, hi)) => (lo.min(t.clone()), hi.max(t)),
            });
        }
    }
    match range {
        None => false,
        Some((lo, hi)) => {
            hi >= BigRational::zero() && lo <= BigRational::from_integer(BigInt::from(1))
        }
    }
}

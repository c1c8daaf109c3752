//! Fiber surface geometry inside the collected tetrahedra, single fibers, and
//! the assembled component-labeled surface mesh.
//!
//! Within one tet the signed distance `h` of the field image to the query line
//! is linear, so `h = 0` is a triangle or a quad whose corners sit on the tet
//! edges that `h` changes sign across. The polygon is then clipped to the band
//! `0 <= t <= 1` of the control-edge parameter, which is also linear. Every
//! point is computed from the smaller to the larger vertex id of the mesh edge
//! or face it lies on, so neighboring tets produce bitwise-identical vertices
//! and welding needs no spatial tolerance.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::jacobi::JacobiSet;
use crate::mesh::{BivariateField, TetMesh};
use crate::range_geom::{zero_crossing, ControlEdge, ControlPolygon, Probe, RangePoint, Side};
use crate::search::{
    component_from_jacobi_edge, extract_fiber_surface_tets, Query, SearchError, SearchTrace,
    TetSet,
};
use crate::{EdgeId, TetId, VertexId};

/// Identity of a point of the surface, shared by all tets that produce it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseKey {
    /// The zero crossing coincides with a mesh vertex.
    Vertex(VertexId),
    /// Interior crossing of mesh edge `(lo, hi)`.
    Edge(VertexId, VertexId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexKey {
    Base(BaseKey),
    /// Crossing of the clip line `t = level` with the polygon side between two
    /// base points (sorted).
    Clip { a: BaseKey, b: BaseKey, level: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionVertex {
    pub position: [f64; 3],
    pub t: f64,
    pub key: VertexKey,
}

/// Fiber surface piece inside one tet.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TetSection {
    pub vertices: Vec<SectionVertex>,
    /// Indices into `vertices`, oriented so the normal points to the positive
    /// side of the query line.
    pub triangles: Vec<[usize; 3]>,
}

impl TetSection {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let [p, q, r] = [a, b, c].map(|i| self.vertices[i].position);
                0.5 * norm(cross(sub(q, p), sub(r, p)))
            })
            .sum()
    }
}

#[derive(Clone, Copy)]
struct BasePoint {
    key: BaseKey,
    position: [f64; 3],
    t: f64,
}

fn lerp3(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * s,
        a[1] + (b[1] - a[1]) * s,
        a[2] + (b[2] - a[2]) * s,
    ]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Crossing point of the mesh edge between sorted local vertices `i < j`.
fn edge_crossing(ids: &[VertexId; 4], pos: &[[f64; 3]; 4], probes: &[Probe; 4], i: usize, j: usize) -> BasePoint {
    let s = zero_crossing(&probes[i], &probes[j]);
    if s == 0.0 {
        BasePoint {
            key: BaseKey::Vertex(ids[i]),
            position: pos[i],
            t: probes[i].t,
        }
    } else if s == 1.0 {
        BasePoint {
            key: BaseKey::Vertex(ids[j]),
            position: pos[j],
            t: probes[j].t,
        }
    } else {
        BasePoint {
            key: BaseKey::Edge(ids[i], ids[j]),
            position: lerp3(pos[i], pos[j], s),
            t: probes[i].t + (probes[j].t - probes[i].t) * s,
        }
    }
}

/// Point at parameter `level` on the polygon side between two base points,
/// interpolated from the smaller key so both incident tets agree.
fn clip_point(p: &BasePoint, q: &BasePoint, level: u8) -> SectionVertex {
    let (p, q) = if p.key <= q.key { (p, q) } else { (q, p) };
    let s = (level as f64 - p.t) / (q.t - p.t);
    SectionVertex {
        position: lerp3(p.position, q.position, s),
        t: level as f64,
        key: VertexKey::Clip {
            a: p.key,
            b: q.key,
            level,
        },
    }
}

pub(crate) fn section_in_tet(q: &Query<'_>, tet: TetId) -> TetSection {
    let ids = q.sorted_tet(tet);
    let probes = q.probes(tet);
    let pos = ids.map(|v| q.mesh.position(v));

    let pos_side: Vec<usize> = (0..4).filter(|&i| probes[i].side == Side::Pos).collect();
    let neg_side: Vec<usize> = (0..4).filter(|&i| probes[i].side == Side::Neg).collect();
    let pair = |a: usize, b: usize| edge_crossing(&ids, &pos, &probes, a.min(b), a.max(b));
    // Consecutive corners share a tet face.
    let ring: Vec<BasePoint> = match (pos_side.as_slice(), neg_side.as_slice()) {
        ([s], others) | (others, [s]) if others.len() == 3 => {
            others.iter().map(|&o| pair(*s, o)).collect()
        }
        ([a, b], [c, d]) => vec![pair(*a, *c), pair(*a, *d), pair(*b, *d), pair(*b, *c)],
        _ => return TetSection::default(),
    };

    // Intersect the convex ring with the band 0 <= t <= 1, side by side.
    let mut clipped: Vec<SectionVertex> = Vec::with_capacity(6);
    for k in 0..ring.len() {
        let (p, n) = (&ring[k], &ring[(k + 1) % ring.len()]);
        if p.key == n.key {
            continue;
        }
        if (0.0..=1.0).contains(&p.t) {
            clipped.push(SectionVertex {
                position: p.position,
                t: p.t,
                key: VertexKey::Base(p.key),
            });
        }
        let (lo, hi) = (p.t.min(n.t), p.t.max(n.t));
        let mut levels: Vec<u8> = [0u8, 1].into_iter().filter(|&c| lo < c as f64 && (c as f64) < hi).collect();
        if p.t > n.t {
            levels.reverse();
        }
        clipped.extend(levels.into_iter().map(|c| clip_point(p, n, c)));
    }
    clipped.dedup_by_key(|v| v.key);
    if clipped.len() > 1 && clipped[0].key == clipped[clipped.len() - 1].key {
        clipped.pop();
    }
    if clipped.len() < 3 {
        return TetSection::default();
    }

    // Fan from the corner with the smallest key.
    let apex = (0..clipped.len())
        .min_by_key(|&i| clipped[i].key)
        .expect("non-empty polygon");
    let n = clipped.len();
    let mut triangles: Vec<[usize; 3]> = (1..n - 1)
        .map(|k| [apex, (apex + k) % n, (apex + k + 1) % n])
        .collect();

    // Orient toward the positive side: pick the largest-area triangle for a
    // reliable normal.
    let normal = triangles
        .iter()
        .map(|&[a, b, c]| {
            let [p, q, r] = [a, b, c].map(|i| clipped[i].position);
            cross(sub(q, p), sub(r, p))
        })
        .max_by(|x, y| norm(*x).total_cmp(&norm(*y)))
        .expect("at least one triangle");
    let probe_pos = pos[pos_side[0]];
    if dot(sub(probe_pos, clipped[apex].position), normal) < 0.0 {
        for tri in &mut triangles {
            tri.swap(1, 2);
        }
    }
    TetSection {
        vertices: clipped,
        triangles,
    }
}

/// Fiber surface of the control edge `e` inside one tet: zero to four
/// triangles.
pub fn extract_in_tet(
    mesh: &TetMesh,
    field: &BivariateField,
    tet_id: TetId,
    e: &ControlEdge,
) -> TetSection {
    section_in_tet(&Query::new(mesh, field, e), tet_id)
}

/// Welded triangle mesh of a fiber surface.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FiberSurfaceMesh {
    pub positions: Vec<[f64; 3]>,
    /// Parameter along the generating control edge, per vertex.
    pub t: Vec<f64>,
    pub triangles: Vec<[u32; 3]>,
    pub source_tet: Vec<TetId>,
    pub component_id: Vec<u32>,
    pub control_edge_index: Vec<u32>,
}

impl FiberSurfaceMesh {
    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn n_components(&self) -> usize {
        self.component_id.iter().max().map_or(0, |&m| m as usize + 1)
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let [p, q, r] = [a, b, c].map(|i| self.positions[i as usize]);
                0.5 * norm(cross(sub(q, p), sub(r, p)))
            })
            .sum()
    }

    /// Appends the surface inside `tets` for control edge `e`. Component ids
    /// are the set's labels shifted by `component_offset`.
    fn append_edge(
        &mut self,
        mesh: &TetMesh,
        field: &BivariateField,
        e: &ControlEdge,
        edge_index: u32,
        tets: &TetSet,
        component_offset: u32,
    ) {
        let q = Query::new(mesh, field, e);
        let sections: Vec<TetSection> = tets
            .tets()
            .par_iter()
            .map(|&t| section_in_tet(&q, t))
            .collect();
        let mut welded: HashMap<VertexKey, u32> = HashMap::new();
        for ((section, &tet), &label) in sections.iter().zip(tets.tets()).zip(tets.labels()) {
            let local: Vec<u32> = section
                .vertices
                .iter()
                .map(|v| {
                    *welded.entry(v.key).or_insert_with(|| {
                        self.positions.push(v.position);
                        self.t.push(v.t);
                        (self.positions.len() - 1) as u32
                    })
                })
                .collect();
            for tri in &section.triangles {
                self.triangles.push(tri.map(|i| local[i]));
                self.source_tet.push(tet);
                self.component_id.push(component_offset + label);
                self.control_edge_index.push(edge_index);
            }
        }
    }

    /// Triangles whose source tet is in `tets`, as a new welded mesh.
    pub fn restricted_to(&self, tets: &TetSet) -> FiberSurfaceMesh {
        let mut out = FiberSurfaceMesh::default();
        let mut remap: HashMap<u32, u32> = HashMap::new();
        for (k, tri) in self.triangles.iter().enumerate() {
            if !tets.contains(self.source_tet[k]) {
                continue;
            }
            let tri = tri.map(|v| {
                *remap.entry(v).or_insert_with(|| {
                    out.positions.push(self.positions[v as usize]);
                    out.t.push(self.t[v as usize]);
                    (out.positions.len() - 1) as u32
                })
            });
            out.triangles.push(tri);
            out.source_tet.push(self.source_tet[k]);
            out.component_id.push(self.component_id[k]);
            out.control_edge_index.push(self.control_edge_index[k]);
        }
        out
    }
}

/// Fiber surface of a single control edge restricted to a known tet set.
pub fn surface_from_tets(
    mesh: &TetMesh,
    field: &BivariateField,
    e: &ControlEdge,
    tets: &TetSet,
) -> FiberSurfaceMesh {
    let mut out = FiberSurfaceMesh::default();
    out.append_edge(mesh, field, e, 0, tets, 0);
    out
}

/// Searches and triangulates every edge of the polygon. Component ids are
/// numbered consecutively across edges in polygon order.
pub fn extract_fiber_surface(
    mesh: &TetMesh,
    field: &BivariateField,
    jset: &JacobiSet,
    poly: &ControlPolygon,
) -> (FiberSurfaceMesh, Vec<SearchTrace>) {
    let mut out = FiberSurfaceMesh::default();
    let mut traces = Vec::with_capacity(poly.edges().len());
    let mut offset = 0u32;
    for (k, e) in poly.edges().iter().enumerate() {
        let (tets, trace) = extract_fiber_surface_tets(mesh, field, jset, e);
        out.append_edge(mesh, field, e, k as u32, &tets, offset);
        offset += tets.n_components() as u32;
        traces.push(trace);
    }
    (out, traces)
}

/// Surface of the single component reached from one selected Jacobi edge.
pub fn extract_component(
    mesh: &TetMesh,
    field: &BivariateField,
    jset: &JacobiSet,
    e: &ControlEdge,
    jacobi_edge_id: EdgeId,
) -> Result<(FiberSurfaceMesh, TetSet, SearchTrace), SearchError> {
    let (tets, trace) = component_from_jacobi_edge(mesh, field, jset, e, jacobi_edge_id)?;
    let surface = surface_from_tets(mesh, field, e, &tets);
    Ok((surface, tets, trace))
}

/// Segments of the fiber `f^-1(q)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FiberPolyline {
    pub segments: Vec<[[f64; 3]; 2]>,
    pub source_tets: Vec<TetId>,
    /// Tets where both level sets coincide along a whole face of the section
    /// (parallel, coincident planes); they contribute no segment.
    pub degenerate_tets: Vec<TetId>,
}

impl FiberPolyline {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|[a, b]| norm(sub(*b, *a))).sum()
    }

    /// True when every segment endpoint is shared by exactly two segments.
    pub fn is_closed(&self) -> bool {
        let mut degree: HashMap<[u64; 3], usize> = HashMap::new();
        for seg in &self.segments {
            for p in seg {
                *degree.entry(p.map(f64::to_bits)).or_default() += 1;
            }
        }
        !degree.is_empty() && degree.values().all(|&d| d == 2)
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.segments.iter().flatten().copied()
    }
}

enum FiberPiece {
    None,
    Segment([[f64; 3]; 2]),
    Degenerate,
}

fn fiber_in_tet(mesh: &TetMesh, field: &BivariateField, q: RangePoint, tet: TetId) -> FiberPiece {
    let mut ids = mesh.tet(tet);
    ids.sort_unstable();
    let pos = ids.map(|v| mesh.position(v));
    let vals = ids.map(|v| field.value(v));
    let g1 = vals.map(|p| p.a - q.a);
    let above = g1.map(|g| g >= 0.0);

    // Corners of the f1 = q.a section: (base key, position, f2 - q.b).
    let corner = |i: usize, j: usize| {
        let s = if g1[i] == 0.0 { 0.0 } else { g1[i] / (g1[i] - g1[j]) };
        (
            (ids[i], ids[j]),
            lerp3(pos[i], pos[j], s),
            vals[i].b + (vals[j].b - vals[i].b) * s - q.b,
        )
    };
    let up: Vec<usize> = (0..4).filter(|&i| above[i]).collect();
    let down: Vec<usize> = (0..4).filter(|&i| !above[i]).collect();
    let pair = |a: usize, b: usize| corner(a.min(b), a.max(b));
    let ring: Vec<_> = match (up.as_slice(), down.as_slice()) {
        ([s], others) | (others, [s]) if others.len() == 3 => {
            others.iter().map(|&o| pair(*s, o)).collect()
        }
        ([a, b], [c, d]) => vec![pair(*a, *c), pair(*a, *d), pair(*b, *d), pair(*b, *c)],
        _ => return FiberPiece::None,
    };
    if ring.iter().all(|c| c.2 == 0.0) {
        return FiberPiece::Degenerate;
    }
    let mut ends = Vec::with_capacity(2);
    for k in 0..ring.len() {
        let (mut p, mut n) = (ring[k], ring[(k + 1) % ring.len()]);
        if (p.2 >= 0.0) == (n.2 >= 0.0) {
            continue;
        }
        if n.0 < p.0 {
            std::mem::swap(&mut p, &mut n);
        }
        let s = if p.2 == 0.0 { 0.0 } else { p.2 / (p.2 - n.2) };
        ends.push(lerp3(p.1, n.1, s));
    }
    match ends.as_slice() {
        [a, b] => FiberPiece::Segment([*a, *b]),
        _ => FiberPiece::None,
    }
}

/// Fiber of the range point `q`: one segment per tet where the level sets of
/// `f1` and `f2` meet. Scans `tet_filter` when given, else every tet.
pub fn extract_fiber(
    mesh: &TetMesh,
    field: &BivariateField,
    q: RangePoint,
    tet_filter: Option<&TetSet>,
) -> FiberPolyline {
    let tets: Vec<TetId> = match tet_filter {
        Some(set) => set.tets().to_vec(),
        None => (0..mesh.n_tets() as TetId).collect(),
    };
    let pieces: Vec<(TetId, FiberPiece)> = tets
        .par_iter()
        .map(|&t| (t, fiber_in_tet(mesh, field, q, t)))
        .collect();
    let mut out = FiberPolyline::default();
    for (t, piece) in pieces {
        match piece {
            FiberPiece::None => {}
            FiberPiece::Segment(seg) => {
                out.segments.push(seg);
                out.source_tets.push(t);
            }
            FiberPiece::Degenerate => out.degenerate_tets.push(t),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::range_geom::RangePoint;

    fn reference_tet(values: [(f64, f64); 4]) -> (TetMesh, BivariateField) {
        let mesh = TetMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2, 3]],
        )
        .unwrap();
        (mesh, BivariateField::from_pairs(values).unwrap())
    }

    fn edge(u: (f64, f64), v: (f64, f64)) -> ControlEdge {
        ControlEdge::new(RangePoint::new(u.0, u.1), RangePoint::new(v.0, v.1)).unwrap()
    }

    #[test]
    fn all_positive_gives_nothing() {
        // h = f2 for a rightward horizontal edge.
        let (mesh, field) = reference_tet([(0.5, 1.0), (0.5, 2.0), (0.5, 3.0), (0.5, 4.0)]);
        let e = edge((0.0, 0.0), (1.0, 0.0));
        assert!(extract_in_tet(&mesh, &field, 0, &e).is_empty());
    }

    #[test]
    fn one_vertex_below_gives_one_triangle() {
        let (mesh, field) = reference_tet([(0.5, -1.0), (0.5, 1.0), (0.5, 1.0), (0.5, 1.0)]);
        let e = edge((0.0, 0.0), (1.0, 0.0));
        let s = extract_in_tet(&mesh, &field, 0, &e);
        assert_eq!(s.triangles.len(), 1);
        // Crossings at the midpoints of the edges from vertex 0.
        let mut pts: Vec<[f64; 3]> = s.vertices.iter().map(|v| v.position).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![[0.0, 0.0, 0.5], [0.0, 0.5, 0.0], [0.5, 0.0, 0.0]]);
        assert!(s.vertices.iter().all(|v| v.t == 0.5));
    }

    #[test]
    fn two_below_gives_quad_with_analytic_area() {
        // h = x + y - 1/2 on the reference tet: vertices 0 and 3 below, 1 and 2
        // above. The section x + y = 1/2 is the quad with corners
        // (1/2,0,0), (0,1/2,0), (0,1/2,1/2), (1/2,0,1/2), a rectangle with sides
        // |(1/2,-1/2,0)| = sqrt(2)/2 and |(0,0,1/2)| = 1/2.
        let (mesh, field) = reference_tet([(0.5, -0.5), (0.5, 0.5), (0.5, 0.5), (0.5, -0.5)]);
        let e = edge((0.0, 0.0), (1.0, 0.0));
        let s = extract_in_tet(&mesh, &field, 0, &e);
        assert_eq!(s.triangles.len(), 2);
        let expected = std::f64::consts::SQRT_2 / 2.0 * 0.5;
        assert!((s.area() - expected).abs() < 1e-15, "{}", s.area());
    }

    #[test]
    fn clipping_keeps_the_band() {
        // h = f2 - 0 with f2 = x - 1/2 on vertices; t = f1 runs 0..4 along y.
        let (mesh, field) = reference_tet([(0.0, -0.5), (0.0, 0.5), (4.0, -0.5), (0.0, -0.5)]);
        let e = edge((0.0, 0.0), (1.0, 0.0));
        let full = extract_in_tet(&mesh, &field, 0, &edge((-10.0, 0.0), (10.0, 0.0)));
        let clipped = extract_in_tet(&mesh, &field, 0, &e);
        assert!(!clipped.is_empty());
        assert!(clipped.area() < full.area());
        assert!(clipped.vertices.iter().all(|v| (0.0..=1.0).contains(&v.t)));
        assert!(clipped.triangles.len() <= 4);
    }

    #[test]
    fn fiber_in_single_tet() {
        // f1 = x, f2 = y: the fiber of (0.25, 0.25) is the z-segment at that
        // (x, y) from z = 0 to z = 0.5.
        let (mesh, field) = reference_tet([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]);
        let fiber = extract_fiber(&mesh, &field, RangePoint::new(0.25, 0.25), None);
        assert_eq!(fiber.segments.len(), 1);
        assert!((fiber.length() - 0.5).abs() < 1e-15);
        let outside = extract_fiber(&mesh, &field, RangePoint::new(2.0, 0.25), None);
        assert!(outside.segments.is_empty());
    }

    #[test]
    fn parallel_planes_give_no_segment() {
        // f2 = 2 f1: gradients parallel.
        let (mesh, field) = reference_tet([(0.0, 0.0), (1.0, 2.0), (0.0, 0.0), (0.0, 0.0)]);
        let off = extract_fiber(&mesh, &field, RangePoint::new(0.5, 0.3), None);
        assert!(off.segments.is_empty() && off.degenerate_tets.is_empty());
        let on = extract_fiber(&mesh, &field, RangePoint::new(0.5, 1.0), None);
        assert!(on.segments.is_empty());
        assert_eq!(on.degenerate_tets, vec![0]);
    }
}

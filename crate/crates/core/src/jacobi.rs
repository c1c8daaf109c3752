//! Jacobi set of a PL bivariate field, found by classifying the link of every
//! mesh edge against the line through the edge's range-space image.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{BivariateField, TetMesh};
use crate::range_geom::{edge_image_side, orient, RangePoint, Side};
use crate::union_find::UnionFind;
use crate::{EdgeId, TetId, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Regular,
    Extremum,
    Saddle,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Regular => "regular",
            EdgeKind::Extremum => "extremum",
            EdgeKind::Saddle => "saddle",
        })
    }
}

impl FromStr for EdgeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "regular" => Ok(EdgeKind::Regular),
            "extremum" => Ok(EdgeKind::Extremum),
            "saddle" => Ok(EdgeKind::Saddle),
            other => Err(format!("unknown edge kind {other:?}")),
        }
    }
}

/// Split of an edge's link into the vertices below and above the line through
/// the edge image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkPartition {
    pub lower: Vec<VertexId>,
    pub upper: Vec<VertexId>,
    pub lower_components: usize,
    pub upper_components: usize,
}

impl LinkPartition {
    pub fn kind(&self) -> EdgeKind {
        if self.lower.is_empty() || self.upper.is_empty() {
            EdgeKind::Extremum
        } else if self.lower_components > 1 || self.upper_components > 1 {
            EdgeKind::Saddle
        } else {
            EdgeKind::Regular
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiEdge {
    pub edge_id: EdgeId,
    pub kind: EdgeKind,
    /// `(f(lo), f(hi))`.
    pub image: [RangePoint; 2],
    pub incident_tets: Vec<TetId>,
}

/// Non-regular edges, sorted by edge id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JacobiSet {
    edges: Vec<JacobiEdge>,
    n_extremum: usize,
    n_saddle: usize,
}

impl JacobiSet {
    pub fn from_edges(mut edges: Vec<JacobiEdge>) -> Self {
        edges.sort_by_key(|e| e.edge_id);
        let n_extremum = edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Extremum)
            .count();
        let n_saddle = edges.iter().filter(|e| e.kind == EdgeKind::Saddle).count();
        Self {
            edges,
            n_extremum,
            n_saddle,
        }
    }

    pub fn edges(&self) -> &[JacobiEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn n_extremum(&self) -> usize {
        self.n_extremum
    }

    pub fn n_saddle(&self) -> usize {
        self.n_saddle
    }

    pub fn get(&self, edge_id: EdgeId) -> Option<&JacobiEdge> {
        self.edges
            .binary_search_by_key(&edge_id, |e| e.edge_id)
            .ok()
            .map(|i| &self.edges[i])
    }
}

/// Classifies one edge, oriented from its smaller to its larger vertex id.
pub fn classify_edge(
    mesh: &TetMesh,
    field: &BivariateField,
    edge_id: EdgeId,
) -> (EdgeKind, LinkPartition) {
    let [lo, hi] = mesh.edge(edge_id);
    classify_oriented(mesh, field, edge_id, lo, hi)
}

/// Classifies an edge using the image line oriented `from -> to`. Reversing the
/// orientation swaps the lower and upper link.
pub fn classify_oriented(
    mesh: &TetMesh,
    field: &BivariateField,
    edge_id: EdgeId,
    from: VertexId,
    to: VertexId,
) -> (EdgeKind, LinkPartition) {
    let link = mesh.edge_link(edge_id);
    let (fa, fb) = (field.value(from), field.value(to));
    let sides: Vec<Side> = link
        .link_vertices
        .iter()
        .map(|&w| edge_image_side(orient(fa, fb, field.value(w)), w, from, to))
        .collect();
    let local = |v: VertexId| {
        link.link_vertices
            .binary_search(&v)
            .expect("link edge endpoint is a link vertex") as u32
    };
    let mut uf = UnionFind::new(link.link_vertices.len());
    for &[a, b] in &link.link_edges {
        let (la, lb) = (local(a), local(b));
        if sides[la as usize] == sides[lb as usize] {
            uf.union(la, lb);
        }
    }
    let mut partition = LinkPartition {
        lower: Vec::new(),
        upper: Vec::new(),
        lower_components: 0,
        upper_components: 0,
    };
    for (i, (&w, &side)) in link.link_vertices.iter().zip(&sides).enumerate() {
        let is_root = uf.find(i as u32) == i as u32;
        match side {
            Side::Neg => {
                partition.lower.push(w);
                partition.lower_components += is_root as usize;
            }
            Side::Pos => {
                partition.upper.push(w);
                partition.upper_components += is_root as usize;
            }
        }
    }
    (partition.kind(), partition)
}

/// Classifies every edge in parallel and keeps the non-regular ones.
pub fn compute_jacobi_set(mesh: &TetMesh, field: &BivariateField) -> JacobiSet {
    let edges: Vec<JacobiEdge> = (0..mesh.n_edges() as EdgeId)
        .into_par_iter()
        .filter_map(|e| {
            let (kind, _) = classify_edge(mesh, field, e);
            (kind != EdgeKind::Regular).then(|| {
                let [lo, hi] = mesh.edge(e);
                JacobiEdge {
                    edge_id: e,
                    kind,
                    image: [field.value(lo), field.value(hi)],
                    incident_tets: mesh.edge_tets(e).to_vec(),
                }
            })
        })
        .collect();
    JacobiSet::from_edges(edges)
}

/// Range-space segments of the Jacobi edges, in edge id order.
pub fn project_jacobi_edges(jset: &JacobiSet) -> Vec<(EdgeId, EdgeKind, [RangePoint; 2])> {
    jset.edges()
        .iter()
        .map(|e| (e.edge_id, e.kind, e.image))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TetMesh;

    /// Edge (0,1) along z with a ring of six link vertices around it; the ring
    /// is split into six tets. `ring_values` sets each ring vertex's field value.
    fn ring_fixture(ring_values: [(f64, f64); 6]) -> (TetMesh, BivariateField) {
        let mut positions = vec![[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]];
        for k in 0..6 {
            let ang = std::f64::consts::PI / 3.0 * k as f64;
            positions.push([ang.cos(), ang.sin(), 0.0]);
        }
        let tets = (0..6)
            .map(|k| [0, 1, 2 + k, 2 + (k + 1) % 6])
            .collect::<Vec<_>>();
        let mut values = vec![(0.0, 0.0), (1.0, 0.0)];
        values.extend(ring_values);
        (
            TetMesh::new(positions, tets).unwrap(),
            BivariateField::from_pairs(values).unwrap(),
        )
    }

    #[test]
    fn alternating_runs_make_a_saddle() {
        // Image of edge (0,1) is the f1 axis; sign = sign of f2. Ring order
        // p1 p3 p2 p4 p5 p6 puts + - + - - - around the cycle: two runs each.
        let (mesh, field) = ring_fixture([
            (0.5, 1.0),
            (0.5, -1.0),
            (0.5, 2.0),
            (0.5, -2.0),
            (0.5, -3.0),
            (0.5, -4.0),
        ]);
        let e = mesh.edge_id(0, 1).unwrap();
        let (kind, part) = classify_edge(&mesh, &field, e);
        assert_eq!(kind, EdgeKind::Saddle);
        assert_eq!(part.upper, vec![2, 4]);
        assert_eq!(part.lower, vec![3, 5, 6, 7]);
        assert_eq!((part.lower_components, part.upper_components), (2, 2));
    }

    #[test]
    fn one_sided_link_is_extremum() {
        let (mesh, field) = ring_fixture([(0.2, 1.0); 6]);
        let e = mesh.edge_id(0, 1).unwrap();
        let (kind, part) = classify_edge(&mesh, &field, e);
        assert_eq!(kind, EdgeKind::Extremum);
        assert!(part.lower.is_empty());
        assert_eq!(part.upper_components, 1);
    }

    #[test]
    fn two_runs_are_regular() {
        let (mesh, field) = ring_fixture([
            (0.0, 1.0),
            (0.0, 2.0),
            (0.0, 1.0),
            (0.0, -1.0),
            (0.0, -1.0),
            (0.0, -2.0),
        ]);
        let e = mesh.edge_id(0, 1).unwrap();
        assert_eq!(classify_edge(&mesh, &field, e).0, EdgeKind::Regular);
    }

    #[test]
    fn reversed_orientation_swaps_sides() {
        let (mesh, field) = ring_fixture([
            (0.5, 1.0),
            (0.5, -1.0),
            (0.5, 0.0),
            (0.5, -2.0),
            (0.5, 0.0),
            (0.5, -4.0),
        ]);
        let e = mesh.edge_id(0, 1).unwrap();
        let (k1, p1) = classify_oriented(&mesh, &field, e, 0, 1);
        let (k2, p2) = classify_oriented(&mesh, &field, e, 1, 0);
        assert_eq!(k1, k2);
        assert_eq!(p1.lower, p2.upper);
        assert_eq!(p1.upper, p2.lower);
    }

    #[test]
    fn linear_field_is_regular_off_the_boundary() {
        let mesh = TetMesh::structured([5, 4, 6], [0.0; 3], [1.0, 2.0, 1.5]).unwrap();
        let field =
            BivariateField::from_pairs(mesh.positions().iter().map(|p| (p[0], p[1]))).unwrap();
        // Interior links are cycles, where a linear functional has one run per
        // side. Open boundary links can be one-sided, so only the boundary
        // carries Jacobi edges.
        let jset = compute_jacobi_set(&mesh, &field);
        assert!(!jset.is_empty());
        for je in jset.edges() {
            assert!(mesh.edge_link(je.edge_id).is_boundary_edge, "edge {}", je.edge_id);
        }
    }

    #[test]
    fn projection_is_one_to_one() {
        let jset = JacobiSet::from_edges(vec![JacobiEdge {
            edge_id: 3,
            kind: EdgeKind::Saddle,
            image: [RangePoint::new(0.0, 1.0), RangePoint::new(2.0, 3.0)],
            incident_tets: vec![0],
        }]);
        assert_eq!(
            project_jacobi_edges(&jset),
            vec![(
                3,
                EdgeKind::Saddle,
                [RangePoint::new(0.0, 1.0), RangePoint::new(2.0, 3.0)]
            )]
        );
        assert_eq!(jset.n_saddle(), 1);
        assert!(jset.get(3).is_some() && jset.get(4).is_none());
    }
}

//! Range-space predicates: signed distance to the line through a control edge
//! or an edge image, symbolic tie-breaking, and segment/hull overlap tests.
//!
//! Sides and overlap decisions use exact orientation signs from adaptive
//! double-precision arithmetic (`robust::orient2d`); magnitudes used only for
//! interpolation stay in plain floating point. There are no epsilons. An exact
//! zero is resolved by a deterministic symbolic perturbation so that every
//! point is strictly on one side of every line:
//!
//! * Against a control edge `(u, v)` the query vertex's `f2` is raised by an
//!   infinitesimal, then its `f1`. The resulting side depends only on the edge
//!   direction: positive iff `v.a > u.a`, or `v.a == u.a` and `v.b < u.b`.
//!   All on-line points therefore fall on the same side, which is the same as
//!   shifting the line by an infinitesimal.
//! * Against the image of a mesh edge `(p, q)` a link vertex `w` is positive iff
//!   `w > min(p, q)`, with the answer flipped when the edge is oriented from its
//!   larger id to its smaller one so that reversing an edge swaps its sides.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::VertexId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("control edge endpoints coincide at ({0}, {1})")]
    DegenerateEdge(f64, f64),
    #[error("control polygon needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite range coordinate")]
    NonFinite,
}

/// A point `(f1, f2)` of the range space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RangePoint {
    pub a: f64,
    pub b: f64,
}

impl RangePoint {
    pub const fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }

    pub fn dist(&self, other: RangePoint) -> f64 {
        (self.a - other.a).hypot(self.b - other.b)
    }

    /// `self + (other - self) * s`
    pub fn lerp(&self, other: RangePoint, s: f64) -> RangePoint {
        RangePoint::new(
            self.a + (other.a - self.a) * s,
            self.b + (other.b - self.b) * s,
        )
    }
}

/// Strict side of a line after symbolic perturbation; never zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Neg,
    Pos,
}

impl Side {
    fn of(d: f64, on_line: impl FnOnce() -> Side) -> Side {
        if d > 0.0 {
            Side::Pos
        } else if d < 0.0 {
            Side::Neg
        } else {
            on_line()
        }
    }

    pub fn flip(self) -> Side {
        match self {
            Side::Neg => Side::Pos,
            Side::Pos => Side::Neg,
        }
    }
}

/// One edge `(u, v)` of a control polygon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[RangePoint; 2]", into = "[RangePoint; 2]")]
pub struct ControlEdge {
    u: RangePoint,
    v: RangePoint,
}

impl ControlEdge {
    pub fn new(u: RangePoint, v: RangePoint) -> Result<Self, GeomError> {
        if !u.is_finite() || !v.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if u == v {
            return Err(GeomError::DegenerateEdge(u.a, u.b));
        }
        Ok(Self { u, v })
    }

    pub fn u(&self) -> RangePoint {
        self.u
    }

    pub fn v(&self) -> RangePoint {
        self.v
    }

    pub fn length(&self) -> f64 {
        self.u.dist(self.v)
    }

    pub fn reversed(&self) -> ControlEdge {
        ControlEdge {
            u: self.v,
            v: self.u,
        }
    }
}

impl TryFrom<[RangePoint; 2]> for ControlEdge {
    type Error = GeomError;

    fn try_from([u, v]: [RangePoint; 2]) -> Result<Self, GeomError> {
        ControlEdge::new(u, v)
    }
}

impl From<ControlEdge> for [RangePoint; 2] {
    fn from(e: ControlEdge) -> Self {
        [e.u, e.v]
    }
}

/// Open or closed chain of control edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPolygon {
    edges: Vec<ControlEdge>,
    closed: bool,
}

impl ControlPolygon {
    /// Builds the chain through `points`; a closed polygon gets an extra edge
    /// from the last point back to the first.
    pub fn from_points(points: &[RangePoint], closed: bool) -> Result<Self, GeomError> {
        if points.len() < 2 {
            return Err(GeomError::TooFewPoints(points.len()));
        }
        let mut edges: Vec<ControlEdge> = points
            .windows(2)
            .map(|w| ControlEdge::new(w[0], w[1]))
            .collect::<Result<_, _>>()?;
        if closed && points.len() > 2 {
            edges.push(ControlEdge::new(points[points.len() - 1], points[0])?);
        }
        Ok(Self { edges, closed })
    }

    pub fn single(edge: ControlEdge) -> Self {
        Self {
            edges: vec![edge],
            closed: false,
        }
    }

    pub fn edges(&self) -> &[ControlEdge] {
        &self.edges
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

/// `(p - u) . N` where `N` is the unnormalized left normal of `v - u`.
pub fn signed_distance(p: RangePoint, e: &ControlEdge) -> f64 {
    line_distance(p, e.u, e.v)
}

/// Signed distance to the line `from -> to`, always evaluated from the
/// lexicographically smaller endpoint so that reversing the line negates the
/// result exactly.
pub(crate) fn line_distance(p: RangePoint, from: RangePoint, to: RangePoint) -> f64 {
    if (to.a, to.b) < (from.a, from.b) {
        return -line_distance(p, to, from);
    }
    let (na, nb) = (-(to.b - from.b), to.a - from.a);
    (p.a - from.a) * na + (p.b - from.b) * nb
}

/// Exact sign of the cross product `(b - a) x (c - a)`, positive when `c` lies
/// to the left of `a -> b`. Only the sign of the result is reliable.
pub(crate) fn orient(a: RangePoint, b: RangePoint, c: RangePoint) -> f64 {
    let coord = |p: RangePoint| robust::Coord { x: p.a, y: p.b };
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Reference line for [`sos_sign`].
#[derive(Debug, Clone, Copy)]
pub enum SosLine {
    Control(ControlEdge),
    /// Image of the oriented mesh edge `from -> to`.
    EdgeImage {
        from: (RangePoint, VertexId),
        to: (RangePoint, VertexId),
    },
}

/// Side of the point `p` (the image of vertex `p_id`) relative to `line`,
/// perturbed symbolically when the signed distance is exactly zero.
pub fn sos_sign(p: RangePoint, p_id: VertexId, line: &SosLine) -> Side {
    match *line {
        SosLine::Control(e) => QueryLine::new(&e).side(p),
        SosLine::EdgeImage { from, to } => {
            edge_image_side(orient(from.0, to.0, p), p_id, from.1, to.1)
        }
    }
}

/// Side of a link vertex given the exact sign of its signed distance to the
/// oriented edge image `from -> to`.
pub(crate) fn edge_image_side(d: f64, w: VertexId, from: VertexId, to: VertexId) -> Side {
    Side::of(d, || {
        let side = if w > from.min(to) { Side::Pos } else { Side::Neg };
        if from > to {
            side.flip()
        } else {
            side
        }
    })
}

/// Signed distance, side and projection parameter of one range point relative
/// to a query line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub point: RangePoint,
    /// Floating-point signed distance, for interpolation.
    pub h: f64,
    pub t: f64,
    /// Exact side, perturbed when the point is on the line.
    pub side: Side,
    pub on_line: bool,
}

/// The infinite line through a control edge together with the parameter
/// `t = ((p - u) . (v - u)) / |v - u|^2` along it.
#[derive(Debug, Clone, Copy)]
pub struct QueryLine {
    edge: ControlEdge,
    len2: f64,
    zero_side: Side,
}

impl QueryLine {
    pub fn new(edge: &ControlEdge) -> Self {
        let (da, db) = (edge.v.a - edge.u.a, edge.v.b - edge.u.b);
        let zero_side = if da > 0.0 || (da == 0.0 && db < 0.0) {
            Side::Pos
        } else {
            Side::Neg
        };
        Self {
            edge: *edge,
            len2: da * da + db * db,
            zero_side,
        }
    }

    pub fn edge(&self) -> &ControlEdge {
        &self.edge
    }

    pub fn signed_distance(&self, p: RangePoint) -> f64 {
        signed_distance(p, &self.edge)
    }

    pub fn side(&self, p: RangePoint) -> Side {
        Side::of(orient(self.edge.u, self.edge.v, p), || self.zero_side)
    }

    pub fn param(&self, p: RangePoint) -> f64 {
        let (u, v) = (self.edge.u, self.edge.v);
        ((p.a - u.a) * (v.a - u.a) + (p.b - u.b) * (v.b - u.b)) / self.len2
    }

    pub fn point_at(&self, t: f64) -> RangePoint {
        self.edge.u.lerp(self.edge.v, t)
    }

    pub fn probe(&self, p: RangePoint) -> Probe {
        let o = orient(self.edge.u, self.edge.v, p);
        Probe {
            point: p,
            h: self.signed_distance(p),
            t: self.param(p),
            side: Side::of(o, || self.zero_side),
            on_line: o == 0.0,
        }
    }

    /// Whether the convex hull of `images` meets the closed segment `[u, v]`.
    pub fn hull_overlaps(&self, images: &[RangePoint]) -> bool {
        let probes: Vec<Probe> = images.iter().map(|&p| self.probe(p)).collect();
        self.probes_overlap(&probes)
    }

    /// Whether the hull of the probed points meets the closed segment. The
    /// hull meets the line in a chord spanned by the crossings of the point
    /// pairs on opposite sides; the chord meets `[u, v]` iff some crossing has
    /// `t >= 0` and some crossing has `t <= 1`. Both tests reduce to exact
    /// orientation signs of input points.
    pub(crate) fn probes_overlap(&self, probes: &[Probe]) -> bool {
        let (u, v) = (self.edge.u, self.edge.v);
        let (mut after_u, mut before_v) = (false, false);
        for (i, a) in probes.iter().enumerate() {
            for b in &probes[i + 1..] {
                if a.side == b.side {
                    continue;
                }
                let (ge0, le1) = if a.on_line && b.on_line {
                    // Both on the line: the crossing is taken at the first.
                    let x = a.point;
                    let du = (x.a - u.a) * (v.a - u.a) + (x.b - u.b) * (v.b - u.b);
                    let dv = (x.a - v.a) * (v.a - u.a) + (x.b - v.b) * (v.b - u.b);
                    (du >= 0.0, dv <= 0.0)
                } else {
                    let (p, q) = if a.side == Side::Neg { (a, b) } else { (b, a) };
                    (
                        orient(p.point, q.point, u) >= 0.0,
                        orient(p.point, q.point, v) <= 0.0,
                    )
                };
                after_u |= ge0;
                before_v |= le1;
                if after_u && before_v {
                    return true;
                }
            }
        }
        false
    }
}

/// Fraction along `p -> q` at which the signed distance crosses zero. The two
/// probes must lie on opposite sides.
pub(crate) fn zero_crossing(p: &Probe, q: &Probe) -> f64 {
    if p.on_line {
        0.0
    } else if q.on_line {
        1.0
    } else {
        (p.h / (p.h - q.h)).clamp(0.0, 1.0)
    }
}

/// Intersection of the segment `seg` with the infinite line through `line_of`,
/// if the endpoints lie on opposite (perturbed) sides.
pub fn segment_line_intersection(
    seg: (RangePoint, RangePoint),
    line_of: &ControlEdge,
) -> Option<RangePoint> {
    let line = QueryLine::new(line_of);
    let (p, q) = (line.probe(seg.0), line.probe(seg.1));
    (p.side != q.side).then(|| seg.0.lerp(seg.1, zero_crossing(&p, &q)))
}

/// Whether the convex hull of four range points meets the closed segment `e`.
pub fn hull_overlaps_segment(images: &[RangePoint; 4], e: &ControlEdge) -> bool {
    QueryLine::new(e).hull_overlaps(images)
}

/// Distance from a point on the line through `e` to the nearer endpoint, or
/// zero when the point lies within the segment.
pub fn closest_param_distance(intersection: RangePoint, e: &ControlEdge) -> f64 {
    let t = QueryLine::new(e).param(intersection);
    if (0.0..=1.0).contains(&t) {
        0.0
    } else {
        intersection.dist(e.u).min(intersection.dist(e.v))
    }
}

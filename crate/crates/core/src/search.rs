//! Jacobi-set-driven seed search for the tetrahedra crossed by the fiber
//! surface of one control edge, and the exhaustive scan it is checked against.
//!
//! A query runs in three steps:
//!
//! * **A** scans the Jacobi set for edges whose image crosses the infinite line
//!   through the control edge ([`jacobi_intersections`]).
//! * **B** walks from a tet incident to each hit toward the control edge, always
//!   stepping to the face neighbor holding the edge-image crossing closest to
//!   the segment, until it stands in a tet whose image overlaps the segment
//!   ([`directed_search`]).
//! * **C** grows every new seed by a breadth-first search through face
//!   neighbors that also overlap the segment ([`restricted_bfs`]).
//!
//! Before walking, step B looks for an uncollected overlapping tet among all
//! tets around the hit Jacobi edge; only if there is none does it walk from
//! the lowest-id one. All directed searches and restricted searches of one
//! query share a [`SearchScratch`], so a walk whose start tet was already
//! reached is skipped.

use std::collections::VecDeque;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jacobi::JacobiSet;
use crate::mesh::{BivariateField, TetMesh, BOUNDARY, LOCAL_EDGES};
use crate::range_geom::{
    segment_line_intersection, zero_crossing, ControlEdge, Probe,
    QueryLine, RangePoint,
};
use crate::union_find::UnionFind;
use crate::{EdgeId, TetId, VertexId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("jacobi edge {0} is not intersected by the line through the control edge")]
    JacobiEdgeNotHit(EdgeId),
    #[error("seed tet {0} does not overlap the control edge")]
    SeedDoesNotOverlap(TetId),
}

/// A Jacobi edge whose image crosses the query line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionHit {
    pub jacobi_edge_id: EdgeId,
    /// Crossing point on the query line.
    pub point: RangePoint,
    /// Lowest-id tet incident to the Jacobi edge.
    pub start_tet: TetId,
}

/// Sorted set of tets with a face-connected component label per tet.
///
/// Labels are canonical: components are numbered in order of their smallest
/// tet id, so two sets with the same members and partition compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TetSet {
    tets: Vec<TetId>,
    labels: Vec<u32>,
}

impl TetSet {
    /// Builds a canonical set from `(tet, label)` pairs with arbitrary labels.
    /// Each tet must appear once.
    pub fn from_labeled(mut pairs: Vec<(TetId, u32)>) -> Self {
        pairs.sort_unstable_by_key(|&(t, _)| t);
        debug_assert!(pairs.windows(2).all(|w| w[0].0 != w[1].0));
        let mut remap: std::collections::HashMap<u32, u32> = Default::default();
        let mut tets = Vec::with_capacity(pairs.len());
        let mut labels = Vec::with_capacity(pairs.len());
        for (t, l) in pairs {
            let next = remap.len() as u32;
            tets.push(t);
            labels.push(*remap.entry(l).or_insert(next));
        }
        Self { tets, labels }
    }

    pub fn tets(&self) -> &[TetId] {
        &self.tets
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.tets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tets.is_empty()
    }

    pub fn contains(&self, t: TetId) -> bool {
        self.tets.binary_search(&t).is_ok()
    }

    pub fn label_of(&self, t: TetId) -> Option<u32> {
        self.tets.binary_search(&t).ok().map(|i| self.labels[i])
    }

    pub fn n_components(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m as usize + 1)
    }

    /// Members of each component, each sorted.
    pub fn components(&self) -> Vec<Vec<TetId>> {
        let mut out = vec![Vec::new(); self.n_components()];
        for (&t, &l) in self.tets.iter().zip(&self.labels) {
            out[l as usize].push(t);
        }
        out
    }

    pub fn is_subset_of(&self, other: &TetSet) -> bool {
        self.tets.iter().all(|&t| other.contains(t))
    }
}

/// Counters and step timers of one query.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    /// `|J_int|`, hits of step A.
    pub n_jacobi_intersections: usize,
    /// `|Z|`.
    pub n_tets_fs: usize,
    pub n_components: usize,
    /// Hits skipped because their start tet had already been reached.
    pub hits_skipped: usize,
    /// Seeds taken straight from the star of a hit Jacobi edge, without a walk.
    pub star_seeds: usize,
    pub directed_searches: usize,
    /// `|D_t|`, distinct tets stood on by directed searches.
    pub directed_visited: usize,
    pub dead_ends: usize,
    pub seeds_found: usize,
    /// Seeds that were already collected by an earlier restricted search.
    pub seeds_discarded: usize,
    /// Tets dequeued by restricted searches.
    pub restricted_visited: usize,
    /// Tets pushed onto restricted-search queues.
    pub restricted_enqueued: usize,
    pub jacobi_intersections_ms: f64,
    pub directed_search_ms: f64,
    pub restricted_bfs_ms: f64,
}

impl SearchTrace {
    /// Copy with all timers zeroed, for comparing runs.
    pub fn counters(&self) -> SearchTrace {
        SearchTrace {
            jacobi_intersections_ms: 0.0,
            directed_search_ms: 0.0,
            restricted_bfs_ms: 0.0,
            ..self.clone()
        }
    }

    /// `A + B + C` in milliseconds.
    pub fn traversal_ms(&self) -> f64 {
        self.jacobi_intersections_ms + self.directed_search_ms + self.restricted_bfs_ms
    }
}

const DIRECTED: u8 = 1;
const IN_Z: u8 = 2;
const OVERLAP_KNOWN: u8 = 4;
const OVERLAPS: u8 = 8;

/// Per-query visit marks, plus a cache of overlap tests for the control edge
/// the buffer was last prepared for.
#[derive(Debug, Clone)]
pub struct SearchScratch {
    flags: Vec<u8>,
    edge: Option<ControlEdge>,
}

impl SearchScratch {
    pub fn new(n_tets: usize) -> Self {
        Self {
            flags: vec![0; n_tets],
            edge: None,
        }
    }

    pub fn is_visited(&self, t: TetId) -> bool {
        self.flags[t as usize] & (DIRECTED | IN_Z) != 0
    }

    pub fn in_surface(&self, t: TetId) -> bool {
        self.flags[t as usize] & IN_Z != 0
    }

    /// Clears everything, including cached overlap tests.
    pub fn reset(&mut self) {
        self.flags.fill(0);
        self.edge = None;
    }

    /// Clears the visit marks, keeping cached overlap tests if `e` is the edge
    /// they were computed for.
    pub fn prepare(&mut self, e: &ControlEdge) {
        self.bind(e);
        self.flags.iter_mut().for_each(|f| *f &= OVERLAP_KNOWN | OVERLAPS);
    }

    /// Drops cached overlap tests that belong to another edge.
    fn bind(&mut self, e: &ControlEdge) {
        if self.edge.as_ref() != Some(e) {
            self.flags.iter_mut().for_each(|f| *f &= DIRECTED | IN_Z);
            self.edge = Some(*e);
        }
    }

    fn overlaps(&mut self, q: &Query<'_>, t: TetId) -> bool {
        let f = &mut self.flags[t as usize];
        if *f & OVERLAP_KNOWN == 0 {
            *f |= OVERLAP_KNOWN | if q.overlaps(t) { OVERLAPS } else { 0 };
        }
        *f & OVERLAPS != 0
    }
}

/// Mesh, field and query line bundled for per-tet evaluation.
#[derive(Clone, Copy)]
pub(crate) struct Query<'a> {
    pub(crate) mesh: &'a TetMesh,
    pub(crate) field: &'a BivariateField,
    pub(crate) line: QueryLine,
}

impl<'a> Query<'a> {
    pub(crate) fn new(mesh: &'a TetMesh, field: &'a BivariateField, e: &ControlEdge) -> Self {
        Self {
            mesh,
            field,
            line: QueryLine::new(e),
        }
    }

    /// Tet vertex ids in increasing order, so that every edge is evaluated
    /// from its smaller to its larger endpoint no matter which tet asks.
    pub(crate) fn sorted_tet(&self, t: TetId) -> [VertexId; 4] {
        let mut tet = self.mesh.tet(t);
        tet.sort_unstable();
        tet
    }

    pub(crate) fn probes(&self, t: TetId) -> [Probe; 4] {
        self.sorted_tet(t)
            .map(|v| self.line.probe(self.field.value(v)))
    }

    pub(crate) fn overlaps(&self, t: TetId) -> bool {
        self.line.probes_overlap(&self.probes(t))
    }

    /// Smallest distance from the segment to any crossing of the query line
    /// with an edge image of tet `t`, or `None` if no edge image crosses.
    fn approach_distance(&self, t: TetId) -> Option<f64> {
        let probes = self.probes(t);
        let len = self.line.edge().length();
        LOCAL_EDGES
            .iter()
            .filter(|&&[i, j]| probes[i].side != probes[j].side)
            .map(|&[i, j]| {
                let (p, q) = (probes[i], probes[j]);
                let t = p.t + (q.t - p.t) * zero_crossing(&p, &q);
                if (0.0..=1.0).contains(&t) {
                    0.0
                } else {
                    t.abs().min((t - 1.0).abs()) * len
                }
            })
            .min_by(f64::total_cmp)
    }
}

/// Whether the image of tet `t` overlaps the closed control edge.
pub fn tet_overlaps_segment(mesh: &TetMesh, field: &BivariateField, t: TetId, e: &ControlEdge) -> bool {
    Query::new(mesh, field, e).overlaps(t)
}

/// Step A: Jacobi edges whose image crosses the infinite line through `e`, in
/// edge id order.
pub fn jacobi_intersections(jset: &JacobiSet, e: &ControlEdge) -> Vec<IntersectionHit> {
    jset.edges()
        .par_iter()
        .filter_map(|je| {
            segment_line_intersection((je.image[0], je.image[1]), e).map(|point| IntersectionHit {
                jacobi_edge_id: je.edge_id,
                point,
                start_tet: je.incident_tets[0],
            })
        })
        .collect()
}

/// Lowest-id tet around the hit Jacobi edge that overlaps the segment and is
/// not yet collected. Every tet of the star contains the hit point, so this is
/// checked before walking anywhere.
fn star_seed(
    q: &Query<'_>,
    jset: &JacobiSet,
    hit: &IntersectionHit,
    scratch: &mut SearchScratch,
) -> Option<TetId> {
    jset.get(hit.jacobi_edge_id)?
        .incident_tets
        .iter()
        .copied()
        .find(|&t| !scratch.in_surface(t) && scratch.overlaps(q, t))
}

/// Step B: walks from the hit's start tet toward the control edge. Returns the
/// first tet whose image overlaps the segment, or `None` at a dead end.
///
/// Tets already stood on by a directed search are never re-entered. Stepping
/// into a tet collected by an earlier restricted search returns it; the caller
/// decides whether the seed is new.
pub fn directed_search(
    mesh: &TetMesh,
    field: &BivariateField,
    hit: &IntersectionHit,
    e: &ControlEdge,
    scratch: &mut SearchScratch,
    trace: &mut SearchTrace,
) -> Option<TetId> {
    scratch.bind(e);
    directed_walk(&Query::new(mesh, field, e), hit.start_tet, scratch, trace)
}

fn directed_walk(
    q: &Query<'_>,
    start: TetId,
    scratch: &mut SearchScratch,
    trace: &mut SearchTrace,
) -> Option<TetId> {
    let mut current = start;
    // Each step enters an unvisited tet, so the walk is bounded by the tet count.
    for _ in 0..q.mesh.n_tets() {
        let flags = &mut scratch.flags[current as usize];
        if *flags & DIRECTED == 0 {
            *flags |= DIRECTED;
            trace.directed_visited += 1;
        }
        if scratch.overlaps(q, current) {
            return Some(current);
        }
        let mut best: Option<(f64, TetId)> = None;
        for nb in q.mesh.face_neighbors(current) {
            if nb == BOUNDARY || scratch.flags[nb as usize] & DIRECTED != 0 {
                continue;
            }
            if let Some(d) = q.approach_distance(nb) {
                let better = match best {
                    None => true,
                    Some((bd, bt)) => d < bd || (d == bd && nb < bt),
                };
                if better {
                    best = Some((d, nb));
                }
            }
        }
        match best {
            Some((_, nb)) => current = nb,
            None => break,
        }
    }
    trace.dead_ends += 1;
    None
}

/// Step C: breadth-first search from `seed` through face neighbors whose image
/// overlaps the segment. Returns the newly collected component in visit order
/// (empty if the seed was already collected) and marks it in `scratch`.
pub fn restricted_bfs(
    mesh: &TetMesh,
    field: &BivariateField,
    seed: TetId,
    e: &ControlEdge,
    scratch: &mut SearchScratch,
    trace: &mut SearchTrace,
) -> Result<Vec<TetId>, SearchError> {
    scratch.bind(e);
    restricted_walk(&Query::new(mesh, field, e), seed, scratch, trace)
}

fn restricted_walk(
    q: &Query<'_>,
    seed: TetId,
    scratch: &mut SearchScratch,
    trace: &mut SearchTrace,
) -> Result<Vec<TetId>, SearchError> {
    if !scratch.overlaps(q, seed) {
        return Err(SearchError::SeedDoesNotOverlap(seed));
    }
    if scratch.in_surface(seed) {
        return Ok(Vec::new());
    }
    let mut component = Vec::new();
    let mut queue = VecDeque::from([seed]);
    scratch.flags[seed as usize] |= IN_Z;
    trace.restricted_enqueued += 1;
    while let Some(t) = queue.pop_front() {
        trace.restricted_visited += 1;
        component.push(t);
        for nb in q.mesh.face_neighbors(t) {
            if nb == BOUNDARY || scratch.in_surface(nb) || !scratch.overlaps(q, nb) {
                continue;
            }
            scratch.flags[nb as usize] |= IN_Z;
            trace.restricted_enqueued += 1;
            queue.push_back(nb);
        }
    }
    Ok(component)
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Collects every tet crossed by the fiber surface of `e`.
pub fn extract_fiber_surface_tets(
    mesh: &TetMesh,
    field: &BivariateField,
    jset: &JacobiSet,
    e: &ControlEdge,
) -> (TetSet, SearchTrace) {
    let q = Query::new(mesh, field, e);
    let mut trace = SearchTrace::default();

    let started = Instant::now();
    let hits = jacobi_intersections(jset, e);
    trace.jacobi_intersections_ms = elapsed_ms(started);
    trace.n_jacobi_intersections = hits.len();

    let mut scratch = SearchScratch::new(mesh.n_tets());
    scratch.bind(e);
    let mut members: Vec<(TetId, u32)> = Vec::new();
    let mut n_components = 0u32;
    for hit in &hits {
        let started = Instant::now();
        let seed = if let Some(t) = star_seed(&q, jset, hit, &mut scratch) {
            trace.directed_searches += 1;
            trace.star_seeds += 1;
            t
        } else if scratch.is_visited(hit.start_tet) {
            trace.hits_skipped += 1;
            continue;
        } else {
            trace.directed_searches += 1;
            let seed = directed_walk(&q, hit.start_tet, &mut scratch, &mut trace);
            trace.directed_search_ms += elapsed_ms(started);
            let Some(seed) = seed else { continue };
            if scratch.in_surface(seed) {
                trace.seeds_discarded += 1;
                continue;
            }
            seed
        };
        trace.seeds_found += 1;
        let started = Instant::now();
        let component = restricted_walk(&q, seed, &mut scratch, &mut trace)
            .expect("directed search only stops on overlapping tets");
        trace.restricted_bfs_ms += elapsed_ms(started);
        members.extend(component.into_iter().map(|t| (t, n_components)));
        n_components += 1;
    }
    let set = TetSet::from_labeled(members);
    trace.n_tets_fs = set.len();
    trace.n_components = set.n_components();
    (set, trace)
}

/// One directed search from the selected Jacobi edge and one restricted search
/// from its seed. A dead end yields an empty set.
pub fn component_from_jacobi_edge(
    mesh: &TetMesh,
    field: &BivariateField,
    jset: &JacobiSet,
    e: &ControlEdge,
    selected_jacobi_edge_id: EdgeId,
) -> Result<(TetSet, SearchTrace), SearchError> {
    let mut trace = SearchTrace::default();

    let started = Instant::now();
    let hits = jacobi_intersections(jset, e);
    trace.jacobi_intersections_ms = elapsed_ms(started);
    trace.n_jacobi_intersections = hits.len();
    let hit = hits
        .iter()
        .find(|h| h.jacobi_edge_id == selected_jacobi_edge_id)
        .ok_or(SearchError::JacobiEdgeNotHit(selected_jacobi_edge_id))?;

    let mut scratch = SearchScratch::new(mesh.n_tets());
    let component = component_from_hit(mesh, field, jset, e, hit, &mut scratch, &mut trace)?;
    let set = TetSet::from_labeled(component.into_iter().map(|t| (t, 0)).collect());
    trace.n_tets_fs = set.len();
    trace.n_components = set.n_components();
    Ok((set, trace))
}

/// Isolated step B for one hit: the seed an independent search from this hit
/// would grow. `scratch` is prepared for `e` first, so one buffer can serve
/// many hits.
pub fn seed_from_hit(
    mesh: &TetMesh,
    field: &BivariateField,
    jset: &JacobiSet,
    e: &ControlEdge,
    hit: &IntersectionHit,
    scratch: &mut SearchScratch,
    trace: &mut SearchTrace,
) -> Option<TetId> {
    let q = Query::new(mesh, field, e);
    scratch.prepare(e);
    let started = Instant::now();
    trace.directed_searches += 1;
    let seed = match star_seed(&q, jset, hit, scratch) {
        Some(t) => {
            trace.star_seeds += 1;
            Some(t)
        }
        None => directed_walk(&q, hit.start_tet, scratch, trace),
    };
    trace.directed_search_ms += elapsed_ms(started);
    seed
}

/// [`seed_from_hit`] followed by a restricted search from the seed.
pub fn component_from_hit(
    mesh: &TetMesh,
    field: &BivariateField,
    jset: &JacobiSet,
    e: &ControlEdge,
    hit: &IntersectionHit,
    scratch: &mut SearchScratch,
    trace: &mut SearchTrace,
) -> Result<Vec<TetId>, SearchError> {
    let Some(seed) = seed_from_hit(mesh, field, jset, e, hit, scratch, trace) else {
        return Ok(Vec::new());
    };
    trace.seeds_found += 1;
    let started = Instant::now();
    let component = restricted_walk(&Query::new(mesh, field, e), seed, scratch, trace)?;
    trace.restricted_bfs_ms += elapsed_ms(started);
    Ok(component)
}

/// Scans every tet for overlap with `e` and labels face-connected components.
pub fn exhaustive_oracle(mesh: &TetMesh, field: &BivariateField, e: &ControlEdge) -> TetSet {
    let q = Query::new(mesh, field, e);
    let overlapping: Vec<bool> = (0..mesh.n_tets() as TetId)
        .into_par_iter()
        .map(|t| q.overlaps(t))
        .collect();
    let mut uf = UnionFind::new(mesh.n_tets());
    for (t, &inside) in overlapping.iter().enumerate() {
        if !inside {
            continue;
        }
        for nb in mesh.face_neighbors(t as TetId) {
            if nb != BOUNDARY && overlapping[nb as usize] {
                uf.union(t as u32, nb);
            }
        }
    }
    let pairs = overlapping
        .iter()
        .enumerate()
        .filter(|(_, &inside)| inside)
        .map(|(t, _)| (t as TetId, uf.find(t as u32)))
        .collect();
    TetSet::from_labeled(pairs)
}

//! Tetrahedral meshes with eager adjacency, bivariate vertex data, and the two
//! text formats they are loaded from.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::range_geom::RangePoint;
use crate::{EdgeId, TetId, VertexId};

/// Marker stored in [`TetMesh::face_neighbors`] for faces on the domain boundary.
pub const BOUNDARY: TetId = TetId::MAX;

/// Local vertex pairs of the six edges of a tetrahedron, in the order used by
/// [`TetMesh::tet_edges`].
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("tet {tet} references vertex {vertex} but the mesh has {n_vertices} vertices")]
    IndexOutOfRange {
        tet: usize,
        vertex: u64,
        n_vertices: usize,
    },
    #[error("tet {tet} repeats a vertex id: {ids:?}")]
    RepeatedVertex { tet: usize, ids: [VertexId; 4] },
    #[error("face {face:?} is shared by more than two tets (non-manifold)")]
    NonManifoldFace { face: [VertexId; 3] },
    #[error("grid dimensions must all be >= 2, got {0:?}")]
    BadDims([usize; 3]),
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value at vertex {0}")]
    NonFinite(usize),
}

/// Indexed tetrahedral mesh. Immutable after construction.
#[derive(Debug, Clone)]
pub struct TetMesh {
    positions: Vec<[f64; 3]>,
    tets: Vec<[VertexId; 4]>,
    /// `face_neighbors[t][i]` is the tet across the face opposite local vertex `i`.
    face_neighbors: Vec<[TetId; 4]>,
    edges: Vec<[VertexId; 2]>,
    tet_edges: Vec<[EdgeId; 6]>,
    edge_tets: Csr,
    vertex_tets: Csr,
}

/// Compressed adjacency lists.
#[derive(Debug, Clone, Default)]
struct Csr {
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl Csr {
    fn build(n: usize, pairs: impl Iterator<Item = (u32, u32)> + Clone) -> Self {
        let mut counts = vec![0u32; n + 1];
        for (key, _) in pairs.clone() {
            counts[key as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut items = vec![0u32; offsets[n] as usize];
        let mut cursor = counts;
        for (key, item) in pairs {
            items[cursor[key as usize] as usize] = item;
            cursor[key as usize] += 1;
        }
        Self { offsets, items }
    }

    fn get(&self, key: usize) -> &[u32] {
        &self.items[self.offsets[key] as usize..self.offsets[key + 1] as usize]
    }
}

impl TetMesh {
    /// Validates the tetrahedra and builds face, edge and vertex adjacency.
    pub fn new(positions: Vec<[f64; 3]>, tets: Vec<[VertexId; 4]>) -> Result<Self, MeshError> {
        let nv = positions.len();
        for (t, tet) in tets.iter().enumerate() {
            for &v in tet {
                if v as usize >= nv {
                    return Err(MeshError::IndexOutOfRange {
                        tet: t,
                        vertex: v as u64,
                        n_vertices: nv,
                    });
                }
            }
            let mut s = *tet;
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(MeshError::RepeatedVertex { tet: t, ids: *tet });
            }
        }

        let mut face_neighbors = vec![[BOUNDARY; 4]; tets.len()];
        let mut open: HashMap<[VertexId; 3], (TetId, u8)> = HashMap::with_capacity(tets.len() * 2);
        let mut closed: HashMap<[VertexId; 3], ()> = HashMap::new();
        for (t, tet) in tets.iter().enumerate() {
            for local in 0..4 {
                let face = sorted_face(tet, local);
                if closed.contains_key(&face) {
                    return Err(MeshError::NonManifoldFace { face });
                }
                match open.entry(face) {
                    Entry::Vacant(slot) => {
                        slot.insert((t as TetId, local as u8));
                    }
                    Entry::Occupied(slot) => {
                        let (other, other_local) = slot.remove();
                        face_neighbors[t][local] = other;
                        face_neighbors[other as usize][other_local as usize] = t as TetId;
                        closed.insert(face, ());
                    }
                }
            }
        }

        let mut edges: Vec<[VertexId; 2]> = tets
            .iter()
            .flat_map(|tet| LOCAL_EDGES.iter().map(move |&[i, j]| ordered(tet[i], tet[j])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let tet_edges: Vec<[EdgeId; 6]> = tets
            .iter()
            .map(|tet| {
                let mut ids = [0; 6];
                for (k, &[i, j]) in LOCAL_EDGES.iter().enumerate() {
                    let key = ordered(tet[i], tet[j]);
                    ids[k] = edges.binary_search(&key).expect("edge was collected") as EdgeId;
                }
                ids
            })
            .collect();

        let edge_tets = Csr::build(
            edges.len(),
            tet_edges
                .iter()
                .enumerate()
                .flat_map(|(t, ids)| ids.iter().map(move |&e| (e, t as u32))),
        );
        let vertex_tets = Csr::build(
            nv,
            tets.iter()
                .enumerate()
                .flat_map(|(t, tet)| tet.iter().map(move |&v| (v, t as u32))),
        );

        Ok(Self {
            positions,
            tets,
            face_neighbors,
            edges,
            tet_edges,
            edge_tets,
            vertex_tets,
        })
    }

    /// Regular grid of `dims` vertices spanning `[lo, hi]`, each cube split into
    /// six tets around its `(0,0,0)-(1,1,1)` diagonal. Vertex ids are x-fastest.
    pub fn structured(dims: [usize; 3], lo: [f64; 3], hi: [f64; 3]) -> Result<Self, MeshError> {
        if dims.iter().any(|&d| d < 2) {
            return Err(MeshError::BadDims(dims));
        }
        let [nx, ny, nz] = dims;
        let coord = |axis: usize, i: usize| {
            let n = dims[axis] - 1;
            if i == n {
                hi[axis]
            } else {
                lo[axis] + (hi[axis] - lo[axis]) * i as f64 / n as f64
            }
        };
        let mut positions = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    positions.push([coord(0, i), coord(1, j), coord(2, k)]);
                }
            }
        }
        Self::new(positions, freudenthal_tets(dims))
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn position(&self, v: VertexId) -> [f64; 3] {
        self.positions[v as usize]
    }

    pub fn tets(&self) -> &[[VertexId; 4]] {
        &self.tets
    }

    pub fn tet(&self, t: TetId) -> [VertexId; 4] {
        self.tets[t as usize]
    }

    pub fn face_neighbors(&self, t: TetId) -> [TetId; 4] {
        self.face_neighbors[t as usize]
    }

    /// All edges as `(lo, hi)` with `lo < hi`, sorted.
    pub fn edges(&self) -> &[[VertexId; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> [VertexId; 2] {
        self.edges[e as usize]
    }

    /// Edge ids of a tet in [`LOCAL_EDGES`] order.
    pub fn tet_edges(&self, t: TetId) -> [EdgeId; 6] {
        self.tet_edges[t as usize]
    }

    pub fn edge_id(&self, a: VertexId, b: VertexId) -> Option<EdgeId> {
        self.edges
            .binary_search(&ordered(a, b))
            .ok()
            .map(|i| i as EdgeId)
    }

    /// Tets incident to an edge, in increasing id order.
    pub fn edge_tets(&self, e: EdgeId) -> &[TetId] {
        self.edge_tets.get(e as usize)
    }

    pub fn vertex_tets(&self, v: VertexId) -> &[TetId] {
        self.vertex_tets.get(v as usize)
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.face_neighbors
            .iter()
            .flatten()
            .filter(|&&n| n == BOUNDARY)
            .count()
    }

    /// Unsigned volume of a tet.
    pub fn tet_volume(&self, t: TetId) -> f64 {
        let [a, b, c, d] = self.tet(t).map(|v| self.position(v));
        let u = sub(b, a);
        let v = sub(c, a);
        let w = sub(d, a);
        let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
            + u[2] * (v[0] * w[1] - v[1] * w[0]);
        det.abs() / 6.0
    }

    /// Link of an edge: the opposite edge of every incident tet.
    pub fn edge_link(&self, e: EdgeId) -> EdgeLink {
        let [lo, hi] = self.edge(e);
        let mut link_edges = Vec::new();
        for &t in self.edge_tets(e) {
            let mut rest = self.tet(t).into_iter().filter(|&v| v != lo && v != hi);
            let (a, b) = (rest.next().unwrap(), rest.next().unwrap());
            link_edges.push(ordered(a, b));
        }
        let mut link_vertices: Vec<VertexId> = link_edges.iter().flatten().copied().collect();
        link_vertices.sort_unstable();
        link_vertices.dedup();
        // On a boundary edge the open path has two endpoints of degree one.
        let is_boundary_edge = link_vertices
            .iter()
            .any(|v| link_edges.iter().filter(|le| le.contains(v)).count() == 1);
        EdgeLink {
            link_vertices,
            link_edges,
            is_boundary_edge,
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn ordered(a: VertexId, b: VertexId) -> [VertexId; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted_face(tet: &[VertexId; 4], opposite: usize) -> [VertexId; 3] {
    let mut f = [0; 3];
    let mut k = 0;
    for (i, &v) in tet.iter().enumerate() {
        if i != opposite {
            f[k] = v;
            k += 1;
        }
    }
    f.sort_unstable();
    f
}

/// Freudenthal (Kuhn) subdivision of a vertex grid: six tets per cube, each a
/// monotone lattice path from the cube's `(0,0,0)` corner to its `(1,1,1)` corner.
pub fn freudenthal_tets(dims: [usize; 3]) -> Vec<[VertexId; 4]> {
    const AXIS_ORDERS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let [nx, ny, nz] = dims;
    let strides = [1, nx, nx * ny];
    let mut tets = Vec::with_capacity(6 * (nx - 1) * (ny - 1) * (nz - 1));
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let base = i + nx * (j + ny * k);
                for order in AXIS_ORDERS {
                    let v1 = base + strides[order[0]];
                    let v2 = v1 + strides[order[1]];
                    let v3 = v2 + strides[order[2]];
                    tets.push([base, v1, v2, v3].map(|v| v as VertexId));
                }
            }
        }
    }
    tets
}

/// Per-vertex `(f1, f2)` values.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateField {
    values: Vec<RangePoint>,
    names: [String; 2],
}

impl BivariateField {
    pub fn new(values: Vec<RangePoint>, names: [String; 2]) -> Result<Self, MeshError> {
        if let Some(i) = values.iter().position(|p| !p.is_finite()) {
            return Err(MeshError::NonFinite(i));
        }
        Ok(Self { values, names })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, MeshError> {
        Self::new(
            pairs.into_iter().map(|(a, b)| RangePoint::new(a, b)).collect(),
            ["f1".to_string(), "f2".to_string()],
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[RangePoint] {
        &self.values
    }

    pub fn value(&self, v: VertexId) -> RangePoint {
        self.values[v as usize]
    }

    pub fn names(&self) -> &[String; 2] {
        &self.names
    }
}

/// Link of a mesh edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeLink {
    /// Sorted, unique.
    pub link_vertices: Vec<VertexId>,
    /// One `(lo, hi)` pair per incident tet, in incident-tet order.
    pub link_edges: Vec<[VertexId; 2]>,
    pub is_boundary_edge: bool,
}

/// Whitespace tokenizer over a text file that skips `#` comment lines and
/// remembers line numbers for error messages.
struct Tokens<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    current: std::vec::IntoIter<&'a str>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
            current: Vec::new().into_iter(),
            line: 0,
        }
    }

    /// Tokens of the next non-comment, non-blank line.
    fn next_line(&mut self) -> Option<Vec<&'a str>> {
        for (n, line) in self.lines.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.line = n + 1;
            return Some(line.split_whitespace().collect());
        }
        None
    }

    fn next_token(&mut self) -> Option<&'a str> {
        loop {
            if let Some(tok) = self.current.next() {
                return Some(tok);
            }
            let toks = self.next_line()?;
            self.current = toks.into_iter();
        }
    }

    fn parse_line<T: std::str::FromStr>(&mut self, n: usize, what: &str) -> Result<Vec<T>, MeshError> {
        let toks = self.next_line().ok_or_else(|| MeshError::Parse {
            line: self.line + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })?;
        if toks.len() != n {
            return Err(MeshError::Parse {
                line: self.line,
                msg: format!("expected {n} fields for {what}, found {}", toks.len()),
            });
        }
        toks.iter()
            .map(|tok| {
                tok.parse().map_err(|_| MeshError::Parse {
                    line: self.line,
                    msg: format!("invalid {what}: {tok:?}"),
                })
            })
            .collect()
    }
}

fn read(path: &Path) -> Result<String, MeshError> {
    fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses the explicit-mesh format: `nv nt`, then `nv` lines `x y z f1 f2`,
/// then `nt` lines `a b c d`.
pub fn parse_tet_mesh(text: &str) -> Result<(TetMesh, BivariateField), MeshError> {
    let mut toks = Tokens::new(text);
    let header: Vec<usize> = toks.parse_line(2, "header `nv nt`")?;
    let (nv, nt) = (header[0], header[1]);
    let mut positions = Vec::with_capacity(nv);
    let mut values = Vec::with_capacity(nv);
    for _ in 0..nv {
        let row: Vec<f64> = toks.parse_line(5, "vertex `x y z f1 f2`")?;
        positions.push([row[0], row[1], row[2]]);
        values.push(RangePoint::new(row[3], row[4]));
    }
    let mut tets = Vec::with_capacity(nt);
    for t in 0..nt {
        let row: Vec<u64> = toks.parse_line(4, "tet `a b c d`")?;
        let mut tet = [0; 4];
        for (slot, &v) in tet.iter_mut().zip(&row) {
            if v >= nv as u64 {
                return Err(MeshError::IndexOutOfRange {
                    tet: t,
                    vertex: v,
                    n_vertices: nv,
                });
            }
            *slot = v as VertexId;
        }
        tets.push(tet);
    }
    if toks.next_token().is_some() {
        return Err(MeshError::Parse {
            line: toks.line,
            msg: "trailing data after last tet".into(),
        });
    }
    let field = BivariateField::new(values, ["f1".into(), "f2".into()])?;
    Ok((TetMesh::new(positions, tets)?, field))
}

/// Parses the structured-grid format: `nx ny nz`, the bounding box, then the
/// f1 block and the f2 block in x-fastest order.
pub fn parse_structured_grid(text: &str) -> Result<(TetMesh, BivariateField), MeshError> {
    let mut toks = Tokens::new(text);
    let dims: Vec<usize> = toks.parse_line(3, "header `nx ny nz`")?;
    let dims = [dims[0], dims[1], dims[2]];
    if dims.iter().any(|&d| d < 2) {
        return Err(MeshError::BadDims(dims));
    }
    let bounds: Vec<f64> = toks.parse_line(6, "bounds `xmin ymin zmin xmax ymax zmax`")?;
    let n = dims[0] * dims[1] * dims[2];
    let mut data = Vec::with_capacity(2 * n);
    while let Some(tok) = toks.next_token() {
        data.push(tok.parse::<f64>().map_err(|_| MeshError::Parse {
            line: toks.line,
            msg: format!("invalid scalar value: {tok:?}"),
        })?);
    }
    if data.len() != 2 * n {
        return Err(MeshError::LengthMismatch {
            expected: 2 * n,
            found: data.len(),
        });
    }
    let values = (0..n).map(|i| RangePoint::new(data[i], data[n + i])).collect();
    let field = BivariateField::new(values, ["f1".into(), "f2".into()])?;
    let mesh = TetMesh::structured(
        dims,
        [bounds[0], bounds[1], bounds[2]],
        [bounds[3], bounds[4], bounds[5]],
    )?;
    Ok((mesh, field))
}

pub fn load_tet_mesh(path: impl AsRef<Path>) -> Result<(TetMesh, BivariateField), MeshError> {
    parse_tet_mesh(&read(path.as_ref())?)
}

pub fn load_structured_grid(
    path: impl AsRef<Path>,
) -> Result<(TetMesh, BivariateField), MeshError> {
    parse_structured_grid(&read(path.as_ref())?)
}

/// Loads either format, telling them apart by the header: two integers for an
/// explicit mesh, three for a structured grid.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<(TetMesh, BivariateField), MeshError> {
    let text = read(path.as_ref())?;
    let header_len = Tokens::new(&text)
        .next_line()
        .map(|toks| toks.len())
        .unwrap_or(0);
    match header_len {
        3 => parse_structured_grid(&text),
        _ => parse_tet_mesh(&text),
    }
}

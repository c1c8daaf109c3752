//! Output-sensitive fiber surface extraction for piecewise-linear bivariate
//! fields on tetrahedral meshes.
//!
//! The pipeline is:
//!
//! 1. [`mesh`] loads a tetrahedral mesh (explicit or Freudenthal-subdivided
//!    structured grid) together with a [`BivariateField`] and builds all
//!    adjacency eagerly.
//! 2. [`jacobi`] classifies every mesh edge by the connectivity of its lower and
//!    upper link and collects the Jacobi set.
//! 3. [`search`] intersects the Jacobi set with the line through a control edge,
//!    walks from every hit toward a seed tetrahedron and grows the seeds by a
//!    breadth-first search restricted to tetrahedra whose image overlaps the
//!    control edge. [`search::exhaustive_oracle`] is the brute-force reference.
//! 4. [`fiber`] triangulates the fiber surface inside every collected
//!    tetrahedron and extracts single fibers.
//!
//! [`scatter`] approximates the continuous scatterplot used as the range-space
//! backdrop, and [`export`] holds the text and binary file formats.

pub mod export;
pub mod fiber;
pub mod jacobi;
pub mod mesh;
pub mod range_geom;
pub mod scatter;
pub mod search;
pub mod synth;

mod union_find;

pub use fiber::{
    extract_component, extract_fiber, extract_fiber_surface, extract_in_tet, FiberPolyline,
    FiberSurfaceMesh, TetSection,
};
pub use jacobi::{
    classify_edge, compute_jacobi_set, project_jacobi_edges, EdgeKind, JacobiEdge, JacobiSet,
    LinkPartition,
};
pub use mesh::{
    load_dataset, load_structured_grid, load_tet_mesh, BivariateField, EdgeLink, MeshError,
    TetMesh, BOUNDARY,
};
pub use range_geom::{
    closest_param_distance, hull_overlaps_segment, segment_line_intersection, signed_distance,
    sos_sign, ControlEdge, ControlPolygon, GeomError, QueryLine, RangePoint, Side,
};
pub use scatter::{density_raster, range_rect, DensityRaster, RangeRect};
pub use search::{
    component_from_hit, component_from_jacobi_edge, directed_search, exhaustive_oracle, extract_fiber_surface_tets,
    jacobi_intersections, restricted_bfs, seed_from_hit, IntersectionHit, SearchError, SearchScratch,
    SearchTrace, TetSet,
};

/// Vertex index into [`TetMesh`] positions and [`BivariateField`] values.
pub type VertexId = u32;
/// Tetrahedron index.
pub type TetId = u32;
/// Index into [`TetMesh::edges`].
pub type EdgeId = u32;

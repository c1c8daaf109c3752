//! File formats: structured-grid and explicit-mesh text, Jacobi set listings,
//! OBJ surfaces and fibers with a binary sidecar, and 16-bit PGM rasters.

use std::fmt::Write as _;

use crate::fiber::{FiberPolyline, FiberSurfaceMesh};
use crate::jacobi::JacobiSet;
use crate::mesh::{BivariateField, TetMesh};
use crate::scatter::DensityRaster;

/// Structured-grid text: dims, bounds, then the f1 and f2 blocks x-fastest.
pub fn structured_grid_text(dims: [usize; 3], lo: [f64; 3], hi: [f64; 3], field: &BivariateField) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# fields: {} {}", field.names()[0], field.names()[1]);
    let _ = writeln!(out, "{} {} {}", dims[0], dims[1], dims[2]);
    let _ = writeln!(out, "{} {} {} {} {} {}", lo[0], lo[1], lo[2], hi[0], hi[1], hi[2]);
    for pick in [|p: &crate::RangePoint| p.a, |p: &crate::RangePoint| p.b] {
        for row in field.values().chunks(dims[0]) {
            let line: Vec<String> = row.iter().map(|p| pick(p).to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

/// Explicit-mesh text: `nv nt`, vertices with values, tets.
pub fn tet_mesh_text(mesh: &TetMesh, field: &BivariateField) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", mesh.n_vertices(), mesh.n_tets());
    for (p, f) in mesh.positions().iter().zip(field.values()) {
        let _ = writeln!(out, "{} {} {} {} {}", p[0], p[1], p[2], f.a, f.b);
    }
    for t in mesh.tets() {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    out
}

/// One line per Jacobi edge: `edge_id kind v_lo v_hi a_lo b_lo a_hi b_hi`.
pub fn jacobi_text(mesh: &TetMesh, jset: &JacobiSet) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} extremum, {} saddle\n# edge_id kind v_lo v_hi a_lo b_lo a_hi b_hi",
        jset.n_extremum(),
        jset.n_saddle()
    );
    for je in jset.edges() {
        let [lo, hi] = mesh.edge(je.edge_id);
        let [p, q] = je.image;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            je.edge_id, je.kind, lo, hi, p.a, p.b, q.a, q.b
        );
    }
    out
}

/// OBJ with one `o component_<k>` group per component, in component order.
pub fn surface_obj(surface: &FiberSurfaceMesh) -> String {
    let mut out = String::new();
    for p in &surface.positions {
        let _ = writeln!(out, "v {} {} {}", p[0], p[1], p[2]);
    }
    let mut order: Vec<usize> = (0..surface.n_triangles()).collect();
    order.sort_by_key(|&k| surface.component_id[k]);
    let mut current = None;
    for k in order {
        let c = surface.component_id[k];
        if current != Some(c) {
            let _ = writeln!(out, "o component_{c}");
            current = Some(c);
        }
        let [a, b, d] = surface.triangles[k];
        let _ = writeln!(out, "f {} {} {}", a + 1, b + 1, d + 1);
    }
    out
}

pub const SIDECAR_MAGIC: &[u8; 4] = b"FSMB";

/// Little-endian sidecar: magic, `u32` vertex and triangle counts, `f64` t per
/// vertex, then `u32` source tet per triangle (in the order of the triangle
/// list, not the OBJ grouping).
pub fn surface_sidecar(surface: &FiberSurfaceMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * surface.t.len() + 4 * surface.source_tet.len());
    out.extend_from_slice(SIDECAR_MAGIC);
    out.extend_from_slice(&(surface.n_vertices() as u32).to_le_bytes());
    out.extend_from_slice(&(surface.n_triangles() as u32).to_le_bytes());
    for t in &surface.t {
        out.extend_from_slice(&t.to_le_bytes());
    }
    for s in &surface.source_tet {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Reads back a [`surface_sidecar`] as `(t, source_tet)`.
pub fn parse_surface_sidecar(bytes: &[u8]) -> Option<(Vec<f64>, Vec<u32>)> {
    let rest = bytes.strip_prefix(SIDECAR_MAGIC.as_slice())?;
    let nv = u32::from_le_bytes(rest.get(0..4)?.try_into().ok()?) as usize;
    let nt = u32::from_le_bytes(rest.get(4..8)?.try_into().ok()?) as usize;
    let body = rest.get(8..)?;
    if body.len() != 8 * nv + 4 * nt {
        return None;
    }
    let (tb, sb) = body.split_at(8 * nv);
    let t = tb
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let s = sb
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Some((t, s))
}

/// OBJ line elements, two fresh vertices per segment.
pub fn fiber_obj(fiber: &FiberPolyline) -> String {
    let mut out = String::new();
    for [a, b] in &fiber.segments {
        let _ = writeln!(out, "v {} {} {}", a[0], a[1], a[2]);
        let _ = writeln!(out, "v {} {} {}", b[0], b[1], b[2]);
    }
    for k in 0..fiber.segments.len() {
        let _ = writeln!(out, "l {} {}", 2 * k + 1, 2 * k + 2);
    }
    out
}

/// Densities scaled linearly to `0..=65535` by the maximum density.
pub fn raster_u16(raster: &DensityRaster) -> Vec<u16> {
    let max = raster.max_density();
    raster
        .cells
        .iter()
        .map(|&d| {
            if max > 0.0 {
                (d / max * 65535.0).round() as u16
            } else {
                0
            }
        })
        .collect()
}

/// Binary 16-bit PGM, top row = largest f2. The header comments carry the
/// range rectangle and the density that maps to 65535.
pub fn density_pgm(raster: &DensityRaster) -> Vec<u8> {
    let r = &raster.range_rect;
    let mut out = format!(
        "P5\n# range_rect {} {} {} {}\n# max_density {}\n{} {}\n65535\n",
        r.min.a,
        r.max.a,
        r.min.b,
        r.max.b,
        raster.max_density(),
        raster.width,
        raster.height
    )
    .into_bytes();
    let values = raster_u16(raster);
    for row in values.chunks(raster.width).rev() {
        for v in row {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

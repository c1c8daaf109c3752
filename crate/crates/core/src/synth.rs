//! Synthetic datasets on `[-1, 1]^3` grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{BivariateField, MeshError, TetMesh};
use crate::range_geom::RangePoint;

pub const DOMAIN_LO: [f64; 3] = [-1.0; 3];
pub const DOMAIN_HI: [f64; 3] = [1.0; 3];

/// `n^3` vertex grid over `[-1, 1]^3`.
pub fn cube_grid(n: usize) -> Result<TetMesh, MeshError> {
    TetMesh::structured([n, n, n], DOMAIN_LO, DOMAIN_HI)
}

fn named(values: Vec<RangePoint>, a: &str, b: &str) -> BivariateField {
    BivariateField::new(values, [a.to_string(), b.to_string()]).expect("finite synthetic values")
}

/// `f1 = z`, `f2 = |p|`: height and distance from the origin.
pub fn height_distance_field(mesh: &TetMesh) -> BivariateField {
    let values = mesh
        .positions()
        .iter()
        .map(|&[x, y, z]| RangePoint::new(z, (x * x + y * y + z * z).sqrt()))
        .collect();
    named(values, "z", "distance")
}

/// `f1 = x`, `f2 = y`.
pub fn linear_field(mesh: &TetMesh) -> BivariateField {
    let values = mesh
        .positions()
        .iter()
        .map(|&[x, y, _]| RangePoint::new(x, y))
        .collect();
    named(values, "x", "y")
}

/// Independent uniform values in `[0, 1)^2` per vertex.
pub fn random_field(mesh: &TetMesh, seed: u64) -> BivariateField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..mesh.n_vertices())
        .map(|_| RangePoint::new(rng.gen(), rng.gen()))
        .collect();
    named(values, "random1", "random2")
}

pub fn height_distance_dataset(n: usize) -> Result<(TetMesh, BivariateField), MeshError> {
    let mesh = cube_grid(n)?;
    let field = height_distance_field(&mesh);
    Ok((mesh, field))
}

pub fn linear_dataset(n: usize) -> Result<(TetMesh, BivariateField), MeshError> {
    let mesh = cube_grid(n)?;
    let field = linear_field(&mesh);
    Ok((mesh, field))
}

pub fn random_dataset(n: usize, seed: u64) -> Result<(TetMesh, BivariateField), MeshError> {
    let mesh = cube_grid(n)?;
    let field = random_field(&mesh, seed);
    Ok((mesh, field))
}

//! Monte-Carlo approximation of the continuous scatterplot: the density of the
//! field's pushforward onto the range space, rasterized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{BivariateField, TetMesh};
use crate::range_geom::RangePoint;
use crate::TetId;

/// Component-wise bounds of the field values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeRect {
    pub min: RangePoint,
    pub max: RangePoint,
}

impl RangeRect {
    pub fn width(&self) -> f64 {
        self.max.a - self.min.a
    }

    pub fn height(&self) -> f64 {
        self.max.b - self.min.b
    }

    pub fn diameter(&self) -> f64 {
        self.min.dist(self.max)
    }

    pub fn contains(&self, p: RangePoint) -> bool {
        (self.min.a..=self.max.a).contains(&p.a) && (self.min.b..=self.max.b).contains(&p.b)
    }
}

/// Exact component-wise min/max. Panics on an empty field.
pub fn range_rect(field: &BivariateField) -> RangeRect {
    let first = field.values()[0];
    field.values().iter().fold(
        RangeRect {
            min: first,
            max: first,
        },
        |r, p| RangeRect {
            min: RangePoint::new(r.min.a.min(p.a), r.min.b.min(p.b)),
            max: RangePoint::new(r.max.a.max(p.a), r.max.b.max(p.b)),
        },
    )
}

/// Linear density raster over a [`RangeRect`]. Row `j` covers the `j`-th `f2`
/// band from the bottom; column `i` the `i`-th `f1` band from the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRaster {
    pub width: usize,
    pub height: usize,
    pub range_rect: RangeRect,
    /// Row-major, volume per unit range area.
    pub cells: Vec<f64>,
}

impl DensityRaster {
    /// Pixel extents. An axis with zero extent is treated as one unit wide.
    pub fn cell_size(&self) -> (f64, f64) {
        let span = |s: f64| if s > 0.0 { s } else { 1.0 };
        (
            span(self.range_rect.width()) / self.width as f64,
            span(self.range_rect.height()) / self.height as f64,
        )
    }

    pub fn cell_area(&self) -> f64 {
        let (w, h) = self.cell_size();
        w * h
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().sum::<f64>() * self.cell_area()
    }

    pub fn max_density(&self) -> f64 {
        self.cells.iter().copied().fold(0.0, f64::max)
    }

    pub fn density_at(&self, i: usize, j: usize) -> f64 {
        self.cells[j * self.width + i]
    }

    fn pixel_of(&self, p: RangePoint) -> usize {
        let (cw, ch) = self.cell_size();
        let bin = |x: f64, lo: f64, size: f64, n: usize| {
            let k = ((x - lo) / size).floor();
            if k <= 0.0 {
                0
            } else {
                (k as usize).min(n - 1)
            }
        };
        let i = bin(p.a, self.range_rect.min.a, cw, self.width);
        let j = bin(p.b, self.range_rect.min.b, ch, self.height);
        j * self.width + i
    }
}

const TETS_PER_CHUNK: usize = 4096;
const CHUNKS_PER_BATCH: usize = 32;

/// Stratified barycentric sampling: each tet deposits `samples_per_tet` equal
/// shares of its volume at the images of random points inside it. The result
/// depends only on `seed`, never on the thread count. Panics if a size is zero.
pub fn density_raster(
    mesh: &TetMesh,
    field: &BivariateField,
    width: usize,
    height: usize,
    samples_per_tet: usize,
    seed: u64,
) -> DensityRaster {
    assert!(width >= 1 && height >= 1 && samples_per_tet >= 1);
    let mut raster = DensityRaster {
        width,
        height,
        range_rect: range_rect(field),
        cells: vec![0.0; width * height],
    };
    let n = mesh.n_tets();
    let chunk_starts: Vec<usize> = (0..n).step_by(TETS_PER_CHUNK).collect();
    let mut mass = vec![0.0; width * height];
    for batch in chunk_starts.chunks(CHUNKS_PER_BATCH) {
        let partials: Vec<Vec<f64>> = batch
            .par_iter()
            .map(|&start| {
                let mut local = vec![0.0; width * height];
                for t in start..(start + TETS_PER_CHUNK).min(n) {
                    deposit_tet(mesh, field, &raster, t as TetId, samples_per_tet, seed, &mut local);
                }
                local
            })
            .collect();
        for local in partials {
            for (m, l) in mass.iter_mut().zip(local) {
                *m += l;
            }
        }
    }
    let area = raster.cell_area();
    raster.cells = mass.into_iter().map(|m| m / area).collect();
    raster
}

fn deposit_tet(
    mesh: &TetMesh,
    field: &BivariateField,
    raster: &DensityRaster,
    t: TetId,
    samples: usize,
    seed: u64,
    mass: &mut [f64],
) {
    let volume = mesh.tet_volume(t);
    if volume <= 0.0 {
        return;
    }
    let weight = volume / samples as f64;
    let vals = mesh.tet(t).map(|v| field.value(v));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for k in 0..samples {
        // Sorted uniforms give uniform barycentric weights; the first one is
        // drawn from the k-th stratum.
        let mut cuts = [
            (k as f64 + rng.gen::<f64>()) / samples as f64,
            rng.gen::<f64>(),
            rng.gen::<f64>(),
        ];
        cuts.sort_by(f64::total_cmp);
        let bary = [cuts[0], cuts[1] - cuts[0], cuts[2] - cuts[1], 1.0 - cuts[2]];
        let p = RangePoint::new(
            (0..4).map(|i| bary[i] * vals[i].a).sum(),
            (0..4).map(|i| bary[i] * vals[i].b).sum(),
        );
        mass[raster.pixel_of(p)] += weight;
    }
}

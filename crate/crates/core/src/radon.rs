//! Static parallel-beam Radon transform with a Joseph-type projector.
//!
//! A ray `{x : x·θ(φ) = s}` with `θ = (cos φ, sin φ)` is marched along the
//! pixel axis it is most aligned with. At each column (or row) center the
//! image is linearly interpolated across the other axis and weighted by the
//! ray length per step. The discrete row is exposed as a sparse [`RayRow`];
//! the adjoint is its exact transpose.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::contract;
use crate::geometry::{Image, ImageGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScanGeometry {
    p: usize,
    q: usize,
}

impl ScanGeometry {
    /// `p` angles `iπ/p` and `2q + 1` offsets `k/q`, `k = -q..=q`.
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::Configuration("scan geometry needs p >= 1 and q >= 1".into()));
        }
        Ok(Self { p, q })
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn n_offsets(&self) -> usize {
        2 * self.q + 1
    }

    #[inline]
    pub fn n_rays(&self) -> usize {
        self.p * self.n_offsets()
    }

    /// Offset spacing `1/q`.
    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.q as f64
    }

    #[inline]
    pub fn angle(&self, i: usize) -> f64 {
        i as f64 * PI / self.p as f64
    }

    /// Offset for storage index `k ∈ 0..2q+1`.
    #[inline]
    pub fn offset(&self, k: usize) -> f64 {
        (k as f64 - self.q as f64) / self.q as f64
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.p).map(move |i| self.angle(i))
    }

    pub fn offsets(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_offsets()).map(move |k| self.offset(k))
    }
}

/// Line integrals on a `p × (2q + 1)` grid, angle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    geometry: ScanGeometry,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(geometry: ScanGeometry) -> Self {
        Self { geometry, values: vec![0.0; geometry.n_rays()] }
    }

    pub fn from_values(geometry: ScanGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.n_rays() {
            return Err(contract!(
                "sinogram {}×{} needs {} values, got {}",
                geometry.p(),
                geometry.n_offsets(),
                geometry.n_rays(),
                values.len()
            ));
        }
        Ok(Self { geometry, values })
    }

    #[inline]
    pub fn geometry(&self) -> ScanGeometry {
        self.geometry
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.geometry.n_offsets() + k]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.geometry.n_offsets();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn dot(&self, other: &Sinogram) -> Result<f64> {
        if self.geometry != other.geometry {
            return Err(contract!("sinogram geometry mismatch"));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }
}

/// Sparse discrete ray row: pixel indices (row-major) and weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RayRow {
    pub indices: Vec<u32>,
    pub weights: Vec<f64>,
}

impl RayRow {
    pub fn with_capacity(n: usize) -> Self {
        Self { indices: Vec::with_capacity(n), weights: Vec::with_capacity(n) }
    }

    pub fn clear(&mut self) {
        self.indices.clear();
        self.weights.clear();
    }

    #[inline]
    fn push(&mut self, index: usize, weight: f64) {
        self.indices.push(index as u32);
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `⟨row, f⟩` for a dense pixel vector.
    #[inline]
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.indices.iter().zip(&self.weights).map(|(&i, &w)| w * dense[i as usize]).sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// `dense += a · row`.
    #[inline]
    pub fn axpy(&self, a: f64, dense: &mut [f64]) {
        for (&i, &w) in self.indices.iter().zip(&self.weights) {
            dense[i as usize] += a * w;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().zip(&self.weights).map(|(&i, &w)| (i as usize, w))
    }
}

/// Sample positions visited by the Joseph march for one ray: each entry is
/// `(x, step_length)` with `x` on a column (or row) center line.
pub(crate) fn joseph_samples(grid: ImageGrid, phi: f64, s: f64, mut visit: impl FnMut([f64; 2], f64)) {
    let n = grid.n_pix();
    let h = grid.spacing();
    let (sin, cos) = libm::sincos(phi);
    if cos.abs() >= sin.abs() {
        // more aligned with x2: one sample per column
        let step = h / cos.abs();
        for j in 0..n {
            let x2 = -1.0 + h * (j as f64 + 0.5);
            let x1 = (s - x2 * sin) / cos;
            visit([x1, x2], step);
        }
    } else {
        let step = h / sin.abs();
        for i in 0..n {
            let x1 = 1.0 - h * (i as f64 + 0.5);
            let x2 = (s - x1 * cos) / sin;
            visit([x1, x2], step);
        }
    }
}

/// Assembles the discrete row of the ray `(phi, s)` into `row`.
pub fn trace_ray(grid: ImageGrid, phi: f64, s: f64, row: &mut RayRow) {
    row.clear();
    let n = grid.n_pix();
    let ni = n as isize;
    let (sin, cos) = libm::sincos(phi);
    let by_column = cos.abs() >= sin.abs();
    joseph_samples(grid, phi, s, |x, step| {
        let (r, c) = grid.fractional_index(x);
        // interpolate across the transverse axis only
        let (frac, fixed) = if by_column { (r, c) } else { (c, r) };
        if !(frac > -1.0 && frac < n as f64) {
            return;
        }
        let fixed = libm::round(fixed) as usize;
        let f0 = libm::floor(frac);
        let w1 = frac - f0;
        let f0 = f0 as isize;
        for (idx, w) in [(f0, 1.0 - w1), (f0 + 1, w1)] {
            if w == 0.0 || idx < 0 || idx >= ni {
                continue;
            }
            let idx = idx as usize;
            let pixel = if by_column { idx * n + fixed } else { fixed * n + idx };
            row.push(pixel, w * step);
        }
    });
}

pub fn ray_row(grid: ImageGrid, phi: f64, s: f64) -> RayRow {
    let mut row = RayRow::with_capacity(2 * grid.n_pix());
    trace_ray(grid, phi, s, &mut row);
    row
}

pub fn ray_integral(image: &Image, phi: f64, s: f64) -> f64 {
    ray_row(image.grid(), phi, s).dot(image.values())
}

pub fn forward_static(image: &Image, geom: ScanGeometry) -> Sinogram {
    let grid = image.grid();
    let mut sino = Sinogram::zeros(geom);
    let m = geom.n_offsets();
    let mut row = RayRow::with_capacity(2 * grid.n_pix());
    for i in 0..geom.p() {
        let phi = geom.angle(i);
        for k in 0..m {
            trace_ray(grid, phi, geom.offset(k), &mut row);
            sino.values[i * m + k] = row.dot(image.values());
        }
    }
    sino
}

/// `weight · Aᵀ` for the single ray `(phi, s)`, as an image.
pub fn adjoint_row_apply(_geom: ScanGeometry, grid: ImageGrid, phi: f64, s: f64, weight: f64) -> Image {
    let mut out = Image::zeros(grid);
    if weight != 0.0 {
        ray_row(grid, phi, s).axpy(weight, out.values_mut());
    }
    out
}

/// Full transpose `Rᵀ g` of [`forward_static`].
pub fn backproject_static(sino: &Sinogram, grid: ImageGrid) -> Image {
    let geom = sino.geometry();
    let mut out = Image::zeros(grid);
    let mut row = RayRow::with_capacity(2 * grid.n_pix());
    for i in 0..geom.p() {
        let phi = geom.angle(i);
        for k in 0..geom.n_offsets() {
            let g = sino.get(i, k);
            if g != 0.0 {
                trace_ray(grid, phi, geom.offset(k), &mut row);
                row.axpy(g, out.values_mut());
            }
        }
    }
    out
}

pub fn ray_row_norm(_geom: ScanGeometry, grid: ImageGrid, phi: f64, s: f64) -> f64 {
    libm::sqrt(ray_row(grid, phi, s).norm_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> ImageGrid {
        ImageGrid::new(n).unwrap()
    }

    /// Dense row oracle: the integral of every canonical basis image.
    fn dense_row(grid: ImageGrid, phi: f64, s: f64) -> Vec<f64> {
        (0..grid.len())
            .map(|p| {
                let mut e = Image::zeros(grid);
                e.values_mut()[p] = 1.0;
                ray_integral(&e, phi, s)
            })
            .collect()
    }

    #[test]
    fn geometry_grid_is_symmetric() {
        let g = ScanGeometry::new(6, 4).unwrap();
        let offsets: Vec<f64> = g.offsets().collect();
        assert_eq!(offsets.len(), 9);
        assert_eq!(offsets[0], -1.0);
        assert_eq!(offsets[8], 1.0);
        for k in 0..9 {
            assert_eq!(offsets[k], -offsets[8 - k]);
        }
        assert!(g.angles().all(|a| (0.0..PI).contains(&a)));
    }

    #[test]
    fn disk_chords() {
        let g = grid(128);
        let disk = Image::disk(g, 1.0, 1.0);
        for phi in [0.0, 0.3, PI / 4.0, 1.2, 2.9] {
            assert!((ray_integral(&disk, phi, 0.0) - 2.0).abs() <= 2.0 * g.spacing());
            assert!((ray_integral(&disk, phi, 0.6) - 1.6).abs() <= 2.0 * g.spacing());
            assert_eq!(ray_integral(&Image::zeros(g), phi, 0.3), 0.0);
        }
    }

    #[test]
    fn centered_square_at_zero_angle() {
        let g = grid(128);
        let spec = crate::RectanglePhantom {
            center: [0.0, 0.0],
            half_extents: [0.25, 0.25],
            rotation: 0.0,
            intensity: 1.0,
        };
        let (img, _) = crate::geometry::make_rectangle_phantom(g, &spec).unwrap();
        let sino = forward_static(&img, ScanGeometry::new(4, 16).unwrap());
        assert!((sino.get(0, 16) - 0.5).abs() <= g.spacing());
    }

    #[test]
    fn adjoint_row_matches_dense_oracle() {
        let g = grid(32);
        let geom = ScanGeometry::new(24, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let f = Image::from_values(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let phi = rng.random_range(0.0..PI);
            let s = rng.random_range(-1.0..1.0);
            let w = rng.random_range(-2.0..2.0);
            let dense = dense_row(g, phi, s);
            let forward: f64 = dense.iter().zip(f.values()).map(|(a, b)| a * b).sum::<f64>() * w;
            let back = adjoint_row_apply(geom, g, phi, s, w);
            let rhs = f.dot(&back).unwrap();
            let row_norm = libm::sqrt(dense.iter().map(|v| v * v).sum());
            assert!((forward - rhs).abs() <= 1e-10 * f.norm() * row_norm * w.abs() + 1e-300);
            let norm = ray_row_norm(geom, g, phi, s);
            assert!((norm - row_norm).abs() <= 1e-12 * row_norm.max(1e-300));
        }
    }

    #[test]
    fn zero_weight_gives_zero_image() {
        let g = grid(16);
        let geom = ScanGeometry::new(4, 4).unwrap();
        assert_eq!(adjoint_row_apply(geom, g, 0.4, 0.1, 0.0), Image::zeros(g));
    }

    #[test]
    fn row_support_hugs_the_line() {
        let g = grid(40);
        let (sin, cos) = libm::sincos(0.7);
        let row = ray_row(g, 0.7, 0.23);
        for (p, _) in row.iter() {
            let x = g.center(p / 40, p % 40);
            let dist = (x[0] * cos + x[1] * sin - 0.23).abs();
            assert!(dist <= g.spacing() * core::f64::consts::SQRT_2);
        }
    }

    #[test]
    fn missing_rays_have_zero_norm() {
        let g = grid(16);
        let geom = ScanGeometry::new(4, 4).unwrap();
        assert_eq!(ray_row_norm(geom, g, 0.3, 1.5), 0.0);
        assert_eq!(ray_row_norm(geom, g, 2.0, -1.45), 0.0);
    }

    #[test]
    fn opposite_direction_same_line() {
        let g = grid(32);
        let geom = ScanGeometry::new(4, 4).unwrap();
        for (phi, s) in [(0.2, 0.3), (1.0, -0.5), (2.5, 0.77)] {
            let a = ray_row_norm(geom, g, phi, s);
            let b = ray_row_norm(geom, g, phi + PI, -s);
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn full_adjoint_consistency() {
        let g = grid(32);
        let geom = ScanGeometry::new(24, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = Image::from_values(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let sg = Sinogram::from_values(geom, (0..geom.n_rays()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let lhs = forward_static(&f, geom).dot(&sg).unwrap();
        let rhs = f.dot(&backproject_static(&sg, g)).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * f.norm() * sg.norm());
    }

    #[test]
    fn nonnegative_in_nonnegative_out() {
        let g = grid(24);
        let geom = ScanGeometry::new(10, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Image::from_values(g, (0..g.len()).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        assert!(forward_static(&f, geom).values().iter().all(|&v| v >= 0.0));
    }
}

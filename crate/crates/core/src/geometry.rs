//! Pixel grids on `[-1, 1]²`, images, rectangle phantoms and error metrics.
//!
//! Pixel `(i, j)` has its center at `x1 = 1 - (2/n)(i + 1/2)`,
//! `x2 = -1 + (2/n)(j + 1/2)`: the row index runs down the `x1` axis and the
//! column index runs up the `x2` axis. Every module shares this convention.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::contract;
use crate::linalg::{mat_vec, Mat2, Vec2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageGrid {
    n_pix: usize,
}

impl ImageGrid {
    pub fn new(n_pix: usize) -> Result<Self> {
        if n_pix == 0 {
            return Err(Error::Configuration("grid needs at least one pixel per side".into()));
        }
        Ok(Self { n_pix })
    }

    #[inline]
    pub fn n_pix(&self) -> usize {
        self.n_pix
    }

    /// Side length of one pixel in unit coordinates, `2 / n_pix`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 / self.n_pix as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_pix * self.n_pix
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n_pix == 0
    }

    pub fn pixel_center(&self, i: usize, j: usize) -> Result<Vec2> {
        if i >= self.n_pix || j >= self.n_pix {
            return Err(contract!("pixel ({i}, {j}) outside {0}×{0} grid", self.n_pix));
        }
        Ok(self.center(i, j))
    }

    #[inline]
    pub(crate) fn center(&self, i: usize, j: usize) -> Vec2 {
        let h = self.spacing();
        [1.0 - h * (i as f64 + 0.5), -1.0 + h * (j as f64 + 0.5)]
    }

    /// Fractional (row, column) coordinates of a point; pixel centers map to
    /// integers.
    #[inline]
    pub(crate) fn fractional_index(&self, x: Vec2) -> (f64, f64) {
        let n = self.n_pix as f64;
        ((1.0 - x[0]) * n * 0.5 - 0.5, (x[1] + 1.0) * n * 0.5 - 0.5)
    }
}

/// A square image over `[-1, 1]²`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    grid: ImageGrid,
    values: Vec<f64>,
}

impl Image {
    pub fn zeros(grid: ImageGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: ImageGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(contract!(
                "image of {0}×{0} pixels needs {1} values, got {2}",
                grid.n_pix(),
                grid.len(),
                values.len()
            ));
        }
        Ok(Self { grid, values })
    }

    /// Evaluates `f` at every pixel center.
    pub fn from_fn(grid: ImageGrid, mut f: impl FnMut(Vec2) -> f64) -> Self {
        let n = grid.n_pix();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid.center(i, j)));
            }
        }
        Self { grid, values }
    }

    /// Indicator of the disk of radius `radius` about the origin.
    pub fn disk(grid: ImageGrid, radius: f64, intensity: f64) -> Self {
        let r2 = radius * radius;
        Self::from_fn(grid, |x| if x[0] * x[0] + x[1] * x[1] <= r2 { intensity } else { 0.0 })
    }

    #[inline]
    pub fn grid(&self) -> ImageGrid {
        self.grid
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_pix() + j]
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn dot(&self, other: &Image) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    /// Zeroes every pixel whose center lies outside the closed unit disk.
    pub fn mask_to_unit_disk(&mut self) {
        let n = self.grid.n_pix();
        for i in 0..n {
            for j in 0..n {
                let x = self.grid.center(i, j);
                if x[0] * x[0] + x[1] * x[1] > 1.0 {
                    self.values[i * n + j] = 0.0;
                }
            }
        }
    }

    /// Bilinear interpolation at a point in unit coordinates, treating the
    /// image as zero outside the grid.
    pub fn sample_bilinear(&self, x: Vec2) -> f64 {
        let n = self.grid.n_pix() as isize;
        let (r, c) = self.grid.fractional_index(x);
        if !(r > -1.0 && c > -1.0 && r < n as f64 && c < n as f64) {
            return 0.0;
        }
        let r0 = libm::floor(r);
        let c0 = libm::floor(c);
        let wr = r - r0;
        let wc = c - c0;
        let (r0, c0) = (r0 as isize, c0 as isize);
        let mut acc = 0.0;
        for (di, wi) in [(0isize, 1.0 - wr), (1, wr)] {
            let i = r0 + di;
            if wi == 0.0 || i < 0 || i >= n {
                continue;
            }
            for (dj, wj) in [(0isize, 1.0 - wc), (1, wc)] {
                let j = c0 + dj;
                if wj == 0.0 || j < 0 || j >= n {
                    continue;
                }
                acc += wi * wj * self.values[(i * n + j) as usize];
            }
        }
        acc
    }

    fn check_grid(&self, other: &Image) -> Result<()> {
        if self.grid != other.grid {
            return Err(contract!(
                "grid mismatch: {} vs {} pixels per side",
                self.grid.n_pix(),
                other.grid.n_pix()
            ));
        }
        Ok(())
    }
}

/// One rotated rectangle of constant intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectanglePhantom {
    pub center: Vec2,
    pub half_extents: Vec2,
    /// Counterclockwise rotation in radians.
    pub rotation: f64,
    pub intensity: f64,
}

impl RectanglePhantom {
    /// Corners counterclockwise, starting at the smallest polar angle in
    /// `[0, 2π)` about the center.
    pub fn corners(&self) -> [Vec2; 4] {
        let (s, c) = libm::sincos(self.rotation);
        let [hx, hy] = self.half_extents;
        let mut corners = [[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]].map(|[u, v]| {
            [self.center[0] + c * u - s * v, self.center[1] + s * u + c * v]
        });
        sort_counterclockwise(&mut corners, self.center);
        corners
    }

    pub fn contains(&self, x: Vec2) -> bool {
        let (s, c) = libm::sincos(self.rotation);
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        u.abs() <= self.half_extents[0] && v.abs() <= self.half_extents[1]
    }

    fn validate(&self) -> Result<()> {
        if !(self.half_extents[0] > 0.0 && self.half_extents[1] > 0.0) {
            return Err(Error::InvalidPhantom(format!(
                "half extents must be positive, got {:?}",
                self.half_extents
            )));
        }
        if !(self.intensity > 0.0 && self.intensity <= 1.0) {
            return Err(Error::InvalidPhantom(format!(
                "intensity must lie in (0, 1], got {}",
                self.intensity
            )));
        }
        for corner in self.corners() {
            if corner[0] * corner[0] + corner[1] * corner[1] > 1.0 {
                return Err(Error::InvalidPhantom(format!(
                    "corner ({:.4}, {:.4}) lies outside the unit disk",
                    corner[0], corner[1]
                )));
            }
        }
        Ok(())
    }

    /// Rasterizes `x ↦ rect(C x + b)`, the rectangle seen through the
    /// pullback of an affine map. Pixel-center membership.
    pub fn rasterize_pullback(&self, grid: ImageGrid, c: &Mat2, b: Vec2) -> Image {
        Image::from_fn(grid, |x| {
            let y = mat_vec(c, x);
            if self.contains([y[0] + b[0], y[1] + b[1]]) {
                self.intensity
            } else {
                0.0
            }
        })
    }
}

/// Sorts points counterclockwise by polar angle in `[0, 2π)` about `origin`.
pub fn sort_counterclockwise(points: &mut [Vec2], origin: Vec2) {
    let angle = |p: &Vec2| {
        let a = libm::atan2(p[1] - origin[1], p[0] - origin[0]);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    };
    points.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
}

/// Rasterizes a rectangle by pixel-center membership and returns its
/// ordered corners.
pub fn make_rectangle_phantom(grid: ImageGrid, spec: &RectanglePhantom) -> Result<(Image, [Vec2; 4])> {
    spec.validate()?;
    let image = Image::from_fn(grid, |x| if spec.contains(x) { spec.intensity } else { 0.0 });
    Ok((image, spec.corners()))
}

/// `‖a − b‖₂ / ‖b‖₂`, or `‖a‖₂` when `b` is zero.
pub fn relative_l2_error(a: &Image, b: &Image) -> Result<f64> {
    a.check_grid(b)?;
    let diff: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    let reference = b.norm();
    let diff = libm::sqrt(diff);
    Ok(if reference == 0.0 { diff } else { diff / reference })
}

/// Relative error restricted to pixels whose center lies in the closed unit
/// disk.
pub fn relative_l2_error_in_disk(a: &Image, b: &Image) -> Result<f64> {
    let mut a = a.clone();
    let mut b = b.clone();
    a.mask_to_unit_disk();
    b.mask_to_unit_disk();
    relative_l2_error(&a, &b)
}

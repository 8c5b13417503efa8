//! Dynamic forward operator `R^Γ f = R(f ∘ Γ)`, synthetic noise and the
//! per-ray inexactness of the static model.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::contract;
use crate::geometry::Image;
use crate::linalg::mat_vec;
use crate::motion::AffineMotion;
use crate::radon::{joseph_samples, ScanGeometry, Sinogram};
use crate::{Error, Result};

/// Per-ray model error bounds `η`, noise bounds `δ` and the solution-ball
/// radius `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InexactnessMap {
    geometry: ScanGeometry,
    eta: Vec<f64>,
    delta: Vec<f64>,
    rho: f64,
}

impl InexactnessMap {
    pub fn new(geometry: ScanGeometry, eta: Vec<f64>, delta: Vec<f64>, rho: f64) -> Result<Self> {
        let n = geometry.n_rays();
        if eta.len() != n || delta.len() != n {
            return Err(contract!(
                "inexactness arrays need {n} entries, got {} and {}",
                eta.len(),
                delta.len()
            ));
        }
        if let Some(bad) = eta.iter().chain(&delta).find(|v| !(**v >= 0.0)) {
            return Err(contract!("inexactness bounds must be non-negative, found {bad}"));
        }
        if !(rho > 0.0) {
            return Err(contract!("rho must be positive, got {rho}"));
        }
        Ok(Self { geometry, eta, delta, rho })
    }

    /// The same `η` and `δ` on every ray.
    pub fn uniform(geometry: ScanGeometry, eta: f64, delta: f64, rho: f64) -> Result<Self> {
        let n = geometry.n_rays();
        Self::new(geometry, alloc::vec![eta; n], alloc::vec![delta; n], rho)
    }

    #[inline]
    pub fn geometry(&self) -> ScanGeometry {
        self.geometry
    }

    #[inline]
    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    #[inline]
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Integral of `x ↦ f(Γ_i x)` along the line `(φ_i, s_k)`.
///
/// The line is sampled at the same positions as the static projector and the
/// image is read by bilinear interpolation at the deformed points, so the
/// identity motion reproduces [`crate::radon::ray_integral`].
pub fn dynamic_ray_integral(image: &Image, m: &AffineMotion, i: usize, k: usize, geom: ScanGeometry) -> Result<f64> {
    if i >= geom.p() || k >= geom.n_offsets() {
        return Err(contract!("ray ({i}, {k}) outside a {}×{} sinogram", geom.p(), geom.n_offsets()));
    }
    let (c, b) = m.motion_at_time(i)?;
    let d = crate::linalg::det(&c);
    if !(d.abs() > 1e-12) {
        return Err(Error::SingularMotion { time: i as f64, det: d });
    }
    let mut acc = 0.0;
    joseph_samples(image.grid(), geom.angle(i), geom.offset(k), |x, step| {
        let y = mat_vec(&c, x);
        acc += step * image.sample_bilinear([y[0] + b[0], y[1] + b[1]]);
    });
    Ok(acc)
}

/// Dynamic sinogram: angle `i` sees the object at time `i`.
pub fn forward_dynamic(image: &Image, m: &AffineMotion, geom: ScanGeometry) -> Result<Sinogram> {
    if geom.p() != m.n_times() {
        return Err(Error::Configuration(format!(
            "{} angles but the motion has {} time points",
            geom.p(),
            m.n_times()
        )));
    }
    let n_off = geom.n_offsets();
    let mut values = Vec::with_capacity(geom.n_rays());
    for i in 0..geom.p() {
        for k in 0..n_off {
            values.push(dynamic_ray_integral(image, m, i, k, geom)?);
        }
    }
    Sinogram::from_values(geom, values)
}

/// `η = |dyn − static_ref|` per ray, `δ = noise_bound` everywhere.
pub fn compute_inexactness(dyn_sino: &Sinogram, static_ref: &Sinogram, noise_bound: f64, rho: f64) -> Result<InexactnessMap> {
    if dyn_sino.geometry() != static_ref.geometry() {
        return Err(contract!("dynamic and static sinograms have different geometries"));
    }
    if !(noise_bound >= 0.0) {
        return Err(contract!("noise bound must be non-negative, got {noise_bound}"));
    }
    let eta = dyn_sino
        .values()
        .iter()
        .zip(static_ref.values())
        .map(|(a, b)| (a - b).abs())
        .collect();
    InexactnessMap::new(dyn_sino.geometry(), eta, alloc::vec![noise_bound; dyn_sino.values().len()], rho)
}

/// Adds independent `Uniform(−amplitude, amplitude)` draws from a ChaCha8
/// stream seeded with `seed`, in storage order.
pub fn add_uniform_noise(sino: &Sinogram, amplitude: f64, seed: u64) -> Sinogram {
    let mut out = sino.clone();
    if amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in out.values_mut() {
            *v += rng.random_range(-amplitude..=amplitude);
        }
    }
    out
}

/// Mean absolute value of the offsets `columns` over all angles, the noise
/// level of a sinogram region the object never touches.
pub fn blank_region_noise_level(sino: &Sinogram, columns: Range<usize>) -> Result<f64> {
    let geom = sino.geometry();
    if columns.is_empty() || columns.end > geom.n_offsets() {
        return Err(contract!(
            "blank region {columns:?} invalid for {} offsets",
            geom.n_offsets()
        ));
    }
    let mut sum = 0.0;
    for i in 0..geom.p() {
        sum += sino.row(i)[columns.clone()].iter().map(|v| v.abs()).sum::<f64>();
    }
    Ok(sum / (geom.p() * columns.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_rectangle_phantom, ImageGrid, RectanglePhantom};
    use crate::radon::{forward_static, ray_integral};

    fn setup(n: usize, p: usize, q: usize) -> (ImageGrid, ScanGeometry) {
        (ImageGrid::new(n).unwrap(), ScanGeometry::new(p, q).unwrap())
    }

    fn rect(grid: ImageGrid) -> Image {
        let spec = RectanglePhantom {
            center: [0.1, -0.05],
            half_extents: [0.3, 0.18],
            rotation: 0.3,
            intensity: 0.8,
        };
        make_rectangle_phantom(grid, &spec).unwrap().0
    }

    #[test]
    fn identity_motion_matches_static() {
        let (grid, geom) = setup(48, 30, 20);
        let img = rect(grid);
        let dynamic = forward_dynamic(&img, &AffineMotion::identity(30).unwrap(), geom).unwrap();
        let stat = forward_static(&img, geom);
        for (a, b) in dynamic.values().iter().zip(stat.values()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn first_row_is_static() {
        let (grid, geom) = setup(48, 30, 20);
        let img = rect(grid);
        let m = AffineMotion::new([[1.3, 0.1], [0.0, 0.8]], [0.1, 0.05], 30).unwrap();
        let dynamic = forward_dynamic(&img, &m, geom).unwrap();
        let stat = forward_static(&img, geom);
        for (a, b) in dynamic.row(0).iter().zip(stat.row(0)) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn shift_moves_offsets() {
        let (grid, geom) = setup(128, 20, 32);
        let disk = Image::disk(grid, 0.4, 1.0);
        let m = AffineMotion::translation([0.19, -0.07], 20).unwrap();
        for i in [3usize, 11, 19] {
            let (_, b) = m.motion_at_time(i).unwrap();
            let (sin, cos) = libm::sincos(geom.angle(i));
            for k in (0..geom.n_offsets()).step_by(5) {
                let s = geom.offset(k);
                let got = dynamic_ray_integral(&disk, &m, i, k, geom).unwrap();
                let want = ray_integral(&disk, geom.angle(i), s + b[0] * cos + b[1] * sin);
                assert!((got - want).abs() <= 2.0 * grid.spacing(), "i={i} k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn zero_image_and_mismatch() {
        let (grid, geom) = setup(16, 6, 4);
        let m = AffineMotion::new([[1.5, 0.0], [0.2, 1.0]], [0.1, 0.0], 6).unwrap();
        let z = forward_dynamic(&Image::zeros(grid), &m, geom).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let m7 = AffineMotion::identity(7).unwrap();
        assert!(matches!(forward_dynamic(&Image::zeros(grid), &m7, geom), Err(Error::Configuration(_))));
    }

    #[test]
    fn inexactness_examples() {
        let (grid, geom) = setup(16, 6, 4);
        let s = forward_static(&rect(grid), geom);
        let map = compute_inexactness(&s, &s, 0.02, 1.0).unwrap();
        assert!(map.eta().iter().all(|&v| v == 0.0));
        assert!(map.delta().iter().all(|&v| v == 0.02));

        let mut d = s.clone();
        d.values_mut()[13] += -0.75;
        let map = compute_inexactness(&d, &s, 0.0, 1.0).unwrap();
        for (idx, &e) in map.eta().iter().enumerate() {
            if idx == 13 {
                assert!((e - 0.75).abs() < 1e-12);
            } else {
                assert_eq!(e, 0.0);
            }
        }
        let other = Sinogram::zeros(ScanGeometry::new(6, 5).unwrap());
        assert!(matches!(compute_inexactness(&other, &s, 0.0, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn noise_contract() {
        let geom = ScanGeometry::new(100, 100).unwrap();
        let s = Sinogram::zeros(geom);
        assert_eq!(add_uniform_noise(&s, 0.0, 5), s);
        let a = add_uniform_noise(&s, 0.02, 5);
        assert_eq!(a, add_uniform_noise(&s, 0.02, 5));
        assert_ne!(a, add_uniform_noise(&s, 0.02, 6));
        let n = a.values().len() as f64;
        assert!(a.values().iter().all(|v| v.abs() <= 0.02));
        let mean = a.values().iter().sum::<f64>() / n;
        let sigma = 0.02 / libm::sqrt(3.0) / libm::sqrt(n);
        assert!(mean.abs() <= 3.0 * sigma);
    }

    #[test]
    fn blank_region_level() {
        let geom = ScanGeometry::new(10, 50).unwrap();
        let noisy = add_uniform_noise(&Sinogram::zeros(geom), 0.02, 1);
        let level = blank_region_noise_level(&noisy, 0..20).unwrap();
        // E|U(-a, a)| = a / 2
        assert!((level - 0.01).abs() < 0.002);
        assert!(blank_region_noise_level(&noisy, 0..0).is_err());
    }
}

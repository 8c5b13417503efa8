//! Filtered backprojection with a Gaussian mollifier, for static objects and
//! for objects under a known affine motion.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::error::contract;
use crate::geometry::{Image, ImageGrid};
use crate::linalg::{det, inverse, mat_vec, transpose, Vec2, IDENTITY};
use crate::motion::{h_of_theta, AffineMotion};
use crate::radon::{ScanGeometry, Sinogram};
use crate::{Error, Result};

/// Mollifier width and output grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbpConfig {
    pub gamma: f64,
    pub n_pix_out: usize,
}

impl FbpConfig {
    pub fn new(gamma: f64, n_pix_out: usize) -> Result<Self> {
        let cfg = Self { gamma, n_pix_out };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `γ = 1.5 h`, one and a half offset spacings.
    pub fn for_geometry(geom: ScanGeometry, n_pix_out: usize) -> Result<Self> {
        Self::new(1.5 * geom.h(), n_pix_out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Configuration(alloc::format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.n_pix_out == 0 {
            return Err(Error::Configuration("output grid must have at least one pixel".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<ImageGrid> {
        ImageGrid::new(self.n_pix_out)
    }
}

const SERIES_LIMIT: f64 = 6.0;

/// Dawson's integral `D(x) = e^{−x²} ∫₀ˣ e^{t²} dt`.
///
/// Below |x| = 6 the positive-term expansion
/// `e^{−x²} Σ x^{2n+1} / (n! (2n+1))` is summed, which avoids the
/// cancellation of the alternating Maclaurin series; beyond that the
/// asymptotic series `1/(2x) Σ (2k−1)!! / (2x²)^k`.
pub fn dawson(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(contract!("dawson argument must be finite, got {x}"));
    }
    Ok(dawson_finite(x))
}

pub(crate) fn dawson_finite(x: f64) -> f64 {
    let ax = x.abs();
    let d = if ax < SERIES_LIMIT {
        let x2 = ax * ax;
        let mut term = ax; // x^{2n+1} / n!
        let mut sum = ax;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= x2 / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add <= 1e-17 * sum {
                break;
            }
        }
        libm::exp(-x2) * sum
    } else {
        let r = 1.0 / (2.0 * ax * ax);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            k += 1.0;
            let next = term * (2.0 * k - 1.0) * r;
            if next >= term || next < 1e-17 * sum {
                break;
            }
            term = next;
            sum += term;
        }
        sum / (2.0 * ax)
    };
    if x < 0.0 {
        -d
    } else {
        d
    }
}

/// Per-angle constants of the reconstruction kernel:
/// `ψ(s) = amp · (1 − √2 z / scale · D(z / (√2 scale)))`, `z = s + shift`.
#[derive(Debug, Clone, Copy)]
struct AngleKernel {
    amp: f64,
    scale: f64,
    shift: f64,
}

impl AngleKernel {
    fn new(m: &AffineMotion, i: usize, gamma: f64, geom: ScanGeometry) -> Result<Self> {
        let (c, b) = m.motion_at_time(i)?;
        let inv = inverse(&c, 1e-12).ok_or(Error::SingularMotion { time: i as f64, det: det(&c) })?;
        let (sin, cos) = libm::sincos(geom.angle(i));
        let theta = [cos, sin];
        // C(t) ≡ I makes the angular Jacobian exactly 1
        let h = if m.end_matrix() == IDENTITY { 1.0 } else { h_of_theta(m, i, geom)? };
        let w = mat_vec(&transpose(&inv), theta);
        let w_norm_sq = w[0] * w[0] + w[1] * w[1];
        let cb = mat_vec(&inv, b);
        Ok(Self {
            amp: det(&c).abs() * h.abs() / (4.0 * PI * PI * gamma * gamma * w_norm_sq),
            scale: gamma * libm::sqrt(w_norm_sq),
            shift: cb[0] * theta[0] + cb[1] * theta[1],
        })
    }

    #[inline]
    fn eval(&self, s: f64) -> f64 {
        let z = s + self.shift;
        self.amp * (1.0 - SQRT_2 * z / self.scale * dawson_finite(z / (SQRT_2 * self.scale)))
    }
}

fn check_motion(m: &AffineMotion, geom: ScanGeometry) -> Result<()> {
    if m.n_times() != geom.p() {
        return Err(contract!("motion has {} time points but geometry has {} angles", m.n_times(), geom.p()));
    }
    Ok(())
}

/// Reconstruction kernel `ψ^γ(θ_i, s)` for the motion at time `i`.
pub fn kernel_value(m: &AffineMotion, i: usize, s: f64, cfg: &FbpConfig, geom: ScanGeometry) -> Result<f64> {
    cfg.validate()?;
    if !s.is_finite() {
        return Err(contract!("kernel offset must be finite, got {s}"));
    }
    Ok(AngleKernel::new(m, i, cfg.gamma, geom)?.eval(s))
}

/// `v[i][k] = h Σ_j ψ^γ(θ_i, s_j − s_k) g[i][j]` by direct summation.
///
/// The data are line integrals of `f ∘ Γ_t`, so the kernel is centred on
/// `s_j = s_k − (C⁻¹b)·θ`; the sign of the kernel argument follows from that.
pub fn filter_sinogram(sino: &Sinogram, m: &AffineMotion, cfg: &FbpConfig) -> Result<Sinogram> {
    cfg.validate()?;
    let geom = sino.geometry();
    check_motion(m, geom)?;
    let q = geom.q();
    let n_off = geom.n_offsets();
    let h = geom.h();
    let mut out = Sinogram::zeros(geom);
    // table[d + 2q] = h ψ(d h) for d = j − k
    let mut table = vec![0.0; 2 * n_off - 1];
    for i in 0..geom.p() {
        let g = sino.row(i);
        if g.iter().all(|&x| x == 0.0) {
            continue;
        }
        let kernel = AngleKernel::new(m, i, cfg.gamma, geom)?;
        for (idx, t) in table.iter_mut().enumerate() {
            *t = h * kernel.eval((idx as f64 - 2.0 * q as f64) * h);
        }
        let row = &mut out.values_mut()[i * n_off..(i + 1) * n_off];
        for (k, v) in row.iter_mut().enumerate() {
            let taps = &table[2 * q - k..2 * q - k + n_off];
            *v = taps.iter().zip(g).map(|(a, b)| a * b).sum();
        }
    }
    Ok(out)
}

/// Interpolated backprojection of filtered data onto `cfg.n_pix_out²`
/// pixels, scaled by `2π/p`. Pixels outside the unit disk stay 0 and
/// offsets beyond ±1 contribute nothing.
pub fn backproject_filtered(v: &Sinogram, m: &AffineMotion, cfg: &FbpConfig) -> Result<Image> {
    cfg.validate()?;
    let geom = v.geometry();
    check_motion(m, geom)?;
    let grid = cfg.grid()?;
    let q = geom.q() as f64;
    let n_off = geom.n_offsets();
    let last = n_off - 1;

    // s = (C⁻¹x)·θ = x·(C^{-T}θ)
    let mut dirs: Vec<Vec2> = Vec::with_capacity(geom.p());
    for l in 0..geom.p() {
        let (c, _) = m.motion_at_time(l)?;
        let inv = inverse(&c, 1e-12).ok_or(Error::SingularMotion { time: l as f64, det: det(&c) })?;
        let (sin, cos) = libm::sincos(geom.angle(l));
        dirs.push(mat_vec(&transpose(&inv), [cos, sin]));
    }

    let n = grid.n_pix();
    let values = v.values();
    let scale = 2.0 * PI / geom.p() as f64;
    let mut out = Image::zeros(grid);
    let img = out.values_mut();
    for i in 0..n {
        for j in 0..n {
            let x = grid.center(i, j);
            if x[0] * x[0] + x[1] * x[1] > 1.0 {
                continue;
            }
            let mut sum = 0.0;
            for (l, w) in dirs.iter().enumerate() {
                let s = x[0] * w[0] + x[1] * w[1];
                if !(-1.0..=1.0).contains(&s) {
                    continue;
                }
                let sq = s * q;
                let fl = libm::floor(sq);
                let k = (fl + q) as usize;
                let row = &values[l * n_off..(l + 1) * n_off];
                sum += if k >= last {
                    row[last]
                } else {
                    let mu = sq - fl;
                    (1.0 - mu) * row[k] + mu * row[k + 1]
                };
            }
            img[i * n + j] = scale * sum;
        }
    }
    Ok(out)
}

/// Filter then backproject with the given motion.
pub fn dynamic_fbp(sino: &Sinogram, m: &AffineMotion, cfg: &FbpConfig) -> Result<Image> {
    let v = filter_sinogram(sino, m, cfg)?;
    backproject_filtered(&v, m, cfg)
}

/// Static FBP: the identity motion through the dynamic code path.
pub fn static_fbp(sino: &Sinogram, cfg: &FbpConfig) -> Result<Image> {
    let m = AffineMotion::identity(sino.geometry().p())?;
    dynamic_fbp(sino, &m, cfg)
}

//! Affine motion with constant speed.
//!
//! The object seen at time `t ∈ {0, …, N−1}` is `f ∘ Γ_t` with
//! `Γ_t x = C(t) x + b(t)`, `C(t) = I + t/(N−1) (A − I)` and
//! `b(t) = t/(N−1) b`. Time `t` is identified with the angle index.

use alloc::format;

use crate::linalg::{self, det, inverse, mat_vec, transpose, Mat2, Vec2, IDENTITY};
use crate::radon::ScanGeometry;
use crate::{Error, Result};

const SINGULAR_TOL: f64 = 1e-12;
const H_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMotion {
    end_matrix: Mat2,
    end_shift: Vec2,
    n_times: usize,
}

impl AffineMotion {
    /// Fails if `n_times < 2` or `C(t)` is singular at any time point.
    pub fn new(end_matrix: Mat2, end_shift: Vec2, n_times: usize) -> Result<Self> {
        if n_times < 2 {
            return Err(Error::Configuration(format!(
                "motion needs at least two time points, got {n_times}"
            )));
        }
        let motion = Self { end_matrix, end_shift, n_times };
        for t in 0..n_times {
            let d = det(&motion.matrix_at(t as f64));
            if !(d.abs() > SINGULAR_TOL) {
                return Err(Error::SingularMotion { time: t as f64, det: d });
            }
        }
        Ok(motion)
    }

    pub fn identity(n_times: usize) -> Result<Self> {
        Self::new(IDENTITY, [0.0, 0.0], n_times)
    }

    pub fn translation(end_shift: Vec2, n_times: usize) -> Result<Self> {
        Self::new(IDENTITY, end_shift, n_times)
    }

    #[inline]
    pub fn end_matrix(&self) -> Mat2 {
        self.end_matrix
    }

    #[inline]
    pub fn end_shift(&self) -> Vec2 {
        self.end_shift
    }

    #[inline]
    pub fn n_times(&self) -> usize {
        self.n_times
    }

    /// Same end state on a different number of time points.
    pub fn with_n_times(&self, n_times: usize) -> Result<Self> {
        Self::new(self.end_matrix, self.end_shift, n_times)
    }

    #[inline]
    fn fraction(&self, t: f64) -> f64 {
        t / (self.n_times - 1) as f64
    }

    /// `C(t)`, linearly extended to real `t`.
    pub fn matrix_at(&self, t: f64) -> Mat2 {
        let w = self.fraction(t);
        let a = &self.end_matrix;
        [
            [1.0 + w * (a[0][0] - 1.0), w * a[0][1]],
            [w * a[1][0], 1.0 + w * (a[1][1] - 1.0)],
        ]
    }

    /// `b(t)`, linearly extended to real `t`.
    pub fn shift_at(&self, t: f64) -> Vec2 {
        let w = self.fraction(t);
        [w * self.end_shift[0], w * self.end_shift[1]]
    }

    pub fn motion_at_time(&self, t: usize) -> Result<(Mat2, Vec2)> {
        self.check_time(t)?;
        Ok((self.matrix_at(t as f64), self.shift_at(t as f64)))
    }

    /// `true` when `Γ_t` is exactly the identity map.
    pub fn is_identity_at(&self, t: usize) -> bool {
        self.matrix_at(t as f64) == IDENTITY && self.shift_at(t as f64) == [0.0, 0.0]
    }

    /// `Γ_t y = C(t) y + b(t)`.
    pub fn apply(&self, t: usize, y: Vec2) -> Result<Vec2> {
        let (c, b) = self.motion_at_time(t)?;
        let v = mat_vec(&c, y);
        Ok([v[0] + b[0], v[1] + b[1]])
    }

    /// `Γ_t⁻¹ y = C(t)⁻¹ (y − b(t))`.
    pub fn inverse_apply(&self, t: usize, y: Vec2) -> Result<Vec2> {
        let (c, b) = self.motion_at_time(t)?;
        let inv = inverse(&c, SINGULAR_TOL).ok_or(Error::SingularMotion { time: t as f64, det: det(&c) })?;
        Ok(mat_vec(&inv, [y[0] - b[0], y[1] - b[1]]))
    }

    fn check_time(&self, t: usize) -> Result<()> {
        if t >= self.n_times {
            return Err(crate::error::contract!("time {t} outside 0..{}", self.n_times));
        }
        Ok(())
    }

    /// `C(t)^{-T} θ(φ)` with `t = φ / Δφ`.
    fn inverse_adjoint_direction(&self, phi: f64, dphi: f64) -> Result<Vec2> {
        let t = phi / dphi;
        let c = self.matrix_at(t);
        let inv = inverse(&c, SINGULAR_TOL).ok_or(Error::SingularMotion { time: t, det: det(&c) })?;
        let (s, co) = libm::sincos(phi);
        Ok(mat_vec(&transpose(&inv), [co, s]))
    }
}

/// Angular Jacobian `h(θ_i) = w₁ ∂w₂/∂φ − w₂ ∂w₁/∂φ` for
/// `w(φ) = C(t(φ))^{-T} θ(φ)`, `t(φ) = φ p / π`, by central differences.
pub fn h_of_theta(m: &AffineMotion, i: usize, geom: ScanGeometry) -> Result<f64> {
    let dphi = core::f64::consts::PI / geom.p() as f64;
    let h = angular_jacobian(|phi| m.inverse_adjoint_direction(phi, dphi), geom.angle(i))?;
    if !(h.abs() >= 1e-12) {
        return Err(Error::DegenerateMotion { angle_index: i, h });
    }
    Ok(h)
}

fn angular_jacobian(w: impl Fn(f64) -> Result<Vec2>, phi: f64) -> Result<f64> {
    let w0 = w(phi)?;
    let wp = w(phi + H_STEP)?;
    let wm = w(phi - H_STEP)?;
    let d1 = (wp[0] - wm[0]) / (2.0 * H_STEP);
    let d2 = (wp[1] - wm[1]) / (2.0 * H_STEP);
    Ok(w0[0] * d2 - w0[1] * d1)
}

/// Fitted motion together with the least-squares residual
/// `sqrt(Σ_k ‖A s_k + b − e_k‖²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionEstimate {
    pub motion: AffineMotion,
    pub residual: f64,
}

/// Least-squares affine map `end_k ≈ A start_k + b` from four landmark
/// pairs (eight equations, six unknowns).
pub fn estimate_affine_motion(start: &[Vec2; 4], end: &[Vec2; 4], n_times: usize) -> Result<MotionEstimate> {
    let design: [[f64; 3]; 4] = start.map(|s| [s[0], s[1], 1.0]);
    let mut gram = [[0.0; 3]; 3];
    for row in &design {
        for a in 0..3 {
            for b in 0..3 {
                gram[a][b] += row[a] * row[b];
            }
        }
    }
    let sigma_min = linalg::sym3_eigenvalues(gram)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let sigma_min = libm::sqrt(sigma_min);
    if !(sigma_min > 1e-10) {
        return Err(Error::DegenerateLandmarks { sigma_min });
    }
    let degenerate = Error::DegenerateLandmarks { sigma_min };
    let first = linalg::lstsq3(&design, &end.map(|e| e[0])).ok_or(degenerate.clone())?;
    let second = linalg::lstsq3(&design, &end.map(|e| e[1])).ok_or(degenerate)?;
    let a = [[first[0], first[1]], [second[0], second[1]]];
    let b = [first[2], second[2]];
    let motion = AffineMotion::new(a, b, n_times)?;
    Ok(MotionEstimate { motion, residual: fit_residual(&a, b, start, end) })
}

/// Translation-only fit: `b` is the mean corner displacement, `A = I`.
pub fn estimate_translation(start: &[Vec2; 4], end: &[Vec2; 4], n_times: usize) -> Result<MotionEstimate> {
    let mut b = [0.0; 2];
    for (s, e) in start.iter().zip(end) {
        b[0] += (e[0] - s[0]) / 4.0;
        b[1] += (e[1] - s[1]) / 4.0;
    }
    let motion = AffineMotion::translation(b, n_times)?;
    Ok(MotionEstimate { motion, residual: fit_residual(&IDENTITY, b, start, end) })
}

fn fit_residual(a: &Mat2, b: Vec2, start: &[Vec2; 4], end: &[Vec2; 4]) -> f64 {
    let sum: f64 = start
        .iter()
        .zip(end)
        .map(|(s, e)| {
            let p = mat_vec(a, *s);
            let d = [p[0] + b[0] - e[0], p[1] + b[1] - e[1]];
            linalg::dot2(d, d)
        })
        .sum();
    libm::sqrt(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stretch(n: usize) -> AffineMotion {
        AffineMotion::new([[2.0, 0.0], [0.0, 1.0]], [0.0, 0.0], n).unwrap()
    }

    #[test]
    fn endpoints() {
        let m = AffineMotion::new([[1.5, 0.2], [-0.1, 0.9]], [0.1, -0.3], 10).unwrap();
        assert_eq!(m.motion_at_time(0).unwrap(), (IDENTITY, [0.0, 0.0]));
        let (c, b) = m.motion_at_time(9).unwrap();
        for r in 0..2 {
            for k in 0..2 {
                assert!((c[r][k] - m.end_matrix()[r][k]).abs() < 1e-15);
            }
        }
        assert_eq!(b, [0.1, -0.3]);
        assert!(matches!(m.motion_at_time(10), Err(Error::Contract(_))));
    }

    #[test]
    fn stretch_midpoint() {
        let (c, b) = stretch(450).motion_at_time(224).unwrap();
        assert_eq!(c, [[1.0 + 224.0 / 449.0, 0.0], [0.0, 1.0]]);
        assert_eq!(b, [0.0, 0.0]);
    }

    #[test]
    fn too_few_times_is_configuration_error() {
        assert!(matches!(AffineMotion::identity(1), Err(Error::Configuration(_))));
    }

    #[test]
    fn singular_path_rejected() {
        // C(t) passes through the zero matrix halfway
        let r = AffineMotion::new([[-1.0, 0.0], [0.0, -1.0]], [0.0, 0.0], 3);
        assert!(matches!(r, Err(Error::SingularMotion { .. })));
    }

    #[test]
    fn inverse_examples() {
        let id = AffineMotion::identity(5).unwrap();
        assert_eq!(id.inverse_apply(3, [0.3, -0.2]).unwrap(), [0.3, -0.2]);
        let sh = AffineMotion::translation([0.2, 0.1], 5).unwrap();
        let y = sh.inverse_apply(4, [0.5, 0.5]).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-15 && (y[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn h_is_one_without_deformation() {
        let geom = ScanGeometry::new(90, 10).unwrap();
        let id = AffineMotion::identity(90).unwrap();
        let sh = AffineMotion::translation([0.4, -0.2], 90).unwrap();
        for i in 0..90 {
            assert!((h_of_theta(&id, i, geom).unwrap() - 1.0).abs() < 1e-6);
            assert!((h_of_theta(&sh, i, geom).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn h_is_unit_for_constant_orthogonal_deformation() {
        for (angle, flip) in [(0.7, 1.0), (-2.1, -1.0)] {
            let (s, c) = libm::sincos(angle);
            let q = [[c, -s], [flip * s, flip * c]];
            let inv_t = transpose(&inverse(&q, 1e-12).unwrap());
            for phi in [0.0, 0.9, 2.4] {
                let h = angular_jacobian(
                    |p| {
                        let (sp, cp) = libm::sincos(p);
                        Ok(mat_vec(&inv_t, [cp, sp]))
                    },
                    phi,
                )
                .unwrap();
                assert!((h - flip).abs() < 1e-6, "h = {h}");
            }
        }
    }

    #[test]
    fn degenerate_landmarks() {
        let line = [[0.0, 0.0], [0.1, 0.1], [0.2, 0.2], [0.3, 0.3]];
        assert!(matches!(
            estimate_affine_motion(&line, &line, 10),
            Err(Error::DegenerateLandmarks { .. })
        ));
    }

    const SQUARE: [Vec2; 4] = [[0.25, 0.25], [-0.25, 0.25], [-0.25, -0.25], [0.25, -0.25]];

    #[test]
    fn estimate_examples() {
        let e = estimate_affine_motion(&SQUARE, &SQUARE, 10).unwrap();
        assert_eq!(e.motion.end_matrix(), IDENTITY);
        assert!(e.motion.end_shift()[0].abs() < 1e-15 && e.residual < 1e-15);

        let d = 51.0 * 2.0 / 512.0;
        let shifted = SQUARE.map(|c| [c[0] + d, c[1] + d]);
        let e = estimate_affine_motion(&SQUARE, &shifted, 450).unwrap();
        let a = e.motion.end_matrix();
        assert!((a[0][0] - 1.0).abs() < 1e-9 && a[0][1].abs() < 1e-9);
        assert!(a[1][0].abs() < 1e-9 && (a[1][1] - 1.0).abs() < 1e-9);
        assert!((e.motion.end_shift()[0] - 0.19921875).abs() < 1e-9);
        assert!((e.motion.end_shift()[1] - 0.19921875).abs() < 1e-9);

        let stretched = SQUARE.map(|c| [2.0 * c[0], c[1]]);
        let e = estimate_affine_motion(&SQUARE, &stretched, 450).unwrap();
        let a = e.motion.end_matrix();
        assert!((a[0][0] - 2.0).abs() < 1e-9 && (a[1][1] - 1.0).abs() < 1e-9);
        assert!(a[0][1].abs() < 1e-9 && a[1][0].abs() < 1e-9);
        assert!(e.motion.end_shift()[0].abs() < 1e-9 && e.motion.end_shift()[1].abs() < 1e-9);
    }

    #[test]
    fn translation_estimate_is_mean_displacement() {
        let end = [[0.3, 0.2], [-0.2, 0.3], [-0.25, -0.2], [0.2, -0.25]];
        let e = estimate_translation(&SQUARE, &end, 5).unwrap();
        let b = e.motion.end_shift();
        assert!((b[0] - 0.0125).abs() < 1e-15 && (b[1] - 0.0125).abs() < 1e-15);
    }

    fn arb_vec(r: f64) -> impl Strategy<Value = Vec2> {
        (-r..r, -r..r).prop_map(|(a, b)| [a, b])
    }

    proptest! {
        #[test]
        fn round_trip(y in arb_vec(1.0), t in 0usize..20, b in arb_vec(0.5),
                      a00 in 0.5f64..2.0, a01 in -0.3f64..0.3, a10 in -0.3f64..0.3, a11 in 0.5f64..2.0) {
            let m = AffineMotion::new([[a00, a01], [a10, a11]], b, 20).unwrap();
            let back = m.inverse_apply(t, m.apply(t, y).unwrap()).unwrap();
            prop_assert!((back[0] - y[0]).abs() < 1e-12 && (back[1] - y[1]).abs() < 1e-12);
        }

        #[test]
        fn affine_in_time(t1 in 0.0f64..30.0, t2 in 0.0f64..30.0, b in arb_vec(0.5),
                          a00 in 0.5f64..2.0, a01 in -0.3f64..0.3) {
            let m = AffineMotion::new([[a00, a01], [0.1, 1.2]], b, 31).unwrap();
            let mid = m.matrix_at((t1 + t2) / 2.0);
            let (c1, c2) = (m.matrix_at(t1), m.matrix_at(t2));
            for r in 0..2 { for k in 0..2 {
                prop_assert!((mid[r][k] - (c1[r][k] + c2[r][k]) / 2.0).abs() < 1e-12);
            }}
            let bm = m.shift_at((t1 + t2) / 2.0);
            let (b1, b2) = (m.shift_at(t1), m.shift_at(t2));
            prop_assert!((bm[0] - (b1[0] + b2[0]) / 2.0).abs() < 1e-12);
            prop_assert!((bm[1] - (b1[1] + b2[1]) / 2.0).abs() < 1e-12);
        }

        #[test]
        fn exact_for_true_affine_maps(a00 in 0.5f64..2.0, a01 in -0.5f64..0.5, a10 in -0.5f64..0.5,
                                      a11 in 0.5f64..2.0, b in arb_vec(0.3), jitter in arb_vec(0.05)) {
            let start = [[0.3 + jitter[0], 0.2], [-0.25, 0.3 + jitter[1]], [-0.3, -0.2], [0.25, -0.3]];
            let a = [[a00, a01], [a10, a11]];
            prop_assume!(det(&a) > 0.1);
            let end = start.map(|s| { let p = mat_vec(&a, s); [p[0] + b[0], p[1] + b[1]] });
            let e = estimate_affine_motion(&start, &end, 2).unwrap();
            prop_assert!(e.residual <= 1e-9);
            let got = e.motion.end_matrix();
            for r in 0..2 { for k in 0..2 { prop_assert!((got[r][k] - a[r][k]).abs() < 1e-9); } }
        }

        #[test]
        fn translation_equivariance(v in arb_vec(0.3), a00 in 0.7f64..1.5, a01 in -0.3f64..0.3,
                                    noise in arb_vec(0.02)) {
            let start = [[0.3, 0.2], [-0.25, 0.3], [-0.3, -0.2], [0.25, -0.3]];
            let a = [[a00, a01], [0.05, 1.1]];
            let end = start.map(|s| { let p = mat_vec(&a, s); [p[0] + 0.1 + noise[0], p[1] - noise[1]] });
            let base = estimate_affine_motion(&start, &end, 2).unwrap();
            let moved = estimate_affine_motion(&start.map(|s| [s[0] + v[0], s[1] + v[1]]),
                                               &end.map(|s| [s[0] + v[0], s[1] + v[1]]), 2).unwrap();
            let a0 = base.motion.end_matrix();
            let b0 = base.motion.end_shift();
            let av = mat_vec(&a0, v);
            let want = [b0[0] + v[0] - av[0], b0[1] + v[1] - av[1]];
            let got = moved.motion.end_shift();
            prop_assert!((got[0] - want[0]).abs() < 1e-9 && (got[1] - want[1]).abs() < 1e-9);
            let a1 = moved.motion.end_matrix();
            for r in 0..2 { for k in 0..2 { prop_assert!((a1[r][k] - a0[r][k]).abs() < 1e-9); } }
        }
    }
}

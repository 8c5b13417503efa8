//! RESESOP-Kaczmarz with two search directions, one ray per subproblem.
//!
//! Each ray `(k, l)` defines a stripe
//! `{f : |⟨u, f⟩ − α| ≤ ξ}` with `u = Aᵀ res`, `α = res · g`,
//! `ξ = |res| (η + δ)`. A ray whose residual exceeds `τ (η + δ)` is handled
//! by projecting the iterate onto the near boundary of its stripe and then
//! onto the intersection with the previous ray's stripe.
//!
//! Search directions are multiples of sparse ray rows, so every inner
//! product and update costs O(row length) instead of O(pixels).

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamic::InexactnessMap;
use crate::error::contract;
use crate::geometry::{Image, ImageGrid};
use crate::radon::{trace_ray, RayRow, ScanGeometry, Sinogram};
use crate::{Error, Result};

/// Relative Gram-determinant threshold below which two directions are
/// treated as parallel.
const GRAM_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct StripeParams {
    pub u: Image,
    pub alpha: f64,
    pub xi: f64,
}

impl StripeParams {
    pub fn contains(&self, f: &Image) -> Result<bool> {
        Ok(stripe_contains(self.u.dot(f)?, self.alpha, self.xi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResesopConfig {
    pub tau: f64,
    pub max_full_iterations: usize,
    /// Kept for callers that pre-scale `η`; the discrepancy threshold is
    /// `τ (η + δ)`.
    pub rho: f64,
    pub nonnegativity: bool,
}

impl Default for ResesopConfig {
    fn default() -> Self {
        Self { tau: 1.00001, max_full_iterations: 30, rho: 1.0, nonnegativity: true }
    }
}

impl ResesopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) {
            return Err(Error::Configuration(alloc::format!("tau must exceed 1, got {}", self.tau)));
        }
        if self.max_full_iterations == 0 {
            return Err(Error::Configuration("max_full_iterations must be positive".into()));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Configuration(alloc::format!("rho must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResesopReport {
    pub iterations_run: usize,
    /// Share of rays with a nonzero row that passed the discrepancy test in
    /// the last sweep.
    pub stopped_ray_fraction: f64,
    /// Largest `|res|` met during the last sweep.
    pub final_residual_max: f64,
    /// `sqrt(Σ res²)` over the residuals met during each sweep.
    pub per_sweep_residual_norms: Vec<f64>,
    /// Per ray: passed the discrepancy test during the last sweep.
    pub stopped: Vec<bool>,
    /// Every active ray passed in the last sweep.
    pub converged: bool,
}

/// Row provider for the solver: one linear functional per ray.
pub trait RayModel {
    fn n_rays(&self) -> usize;
    fn n_pixels(&self) -> usize;
    fn row(&self, ray: usize, out: &mut RayRow);
}

/// Static Radon rays in angle-major, offset-minor order.
#[derive(Debug, Clone, Copy)]
pub struct RadonRays {
    pub grid: ImageGrid,
    pub geom: ScanGeometry,
}

impl RayModel for RadonRays {
    fn n_rays(&self) -> usize {
        self.geom.n_rays()
    }

    fn n_pixels(&self) -> usize {
        self.grid.len()
    }

    fn row(&self, ray: usize, out: &mut RayRow) {
        let m = self.geom.n_offsets();
        trace_ray(self.grid, self.geom.angle(ray / m), self.geom.offset(ray % m), out);
    }
}

/// Explicit sparse rows.
#[derive(Debug, Clone)]
pub struct ExplicitRays {
    pub n_pixels: usize,
    pub rows: Vec<RayRow>,
}

impl RayModel for ExplicitRays {
    fn n_rays(&self) -> usize {
        self.rows.len()
    }

    fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    fn row(&self, ray: usize, out: &mut RayRow) {
        out.clone_from(&self.rows[ray]);
    }
}

#[inline]
fn stripe_contains(u_dot_f: f64, alpha: f64, xi: f64) -> bool {
    (u_dot_f - alpha).abs() <= xi
}

/// Step `|res| (|res| − bound) / ‖u‖²` along `−u` onto the near boundary
/// hyperplane of the stripe.
#[inline]
pub fn single_step_coefficient(residual_abs: f64, bound: f64, u_norm_sq: f64) -> f64 {
    residual_abs * (residual_abs - bound) / u_norm_sq
}

/// Coefficients `(c_new, c_old)` with `f = f̃ + c_new u_new + c_old u_old`
/// projecting `f̃` from the new hyperplane onto its intersection with the
/// old stripe's violated boundary. `None` if `f̃` already lies in the old
/// stripe or the directions are (numerically) parallel.
pub fn two_stripe_coefficients(
    u_old_dot_f: f64,
    u_new_dot_u_old: f64,
    u_new_sq: f64,
    u_old_sq: f64,
    alpha_old: f64,
    xi_old: f64,
) -> Option<(f64, f64)> {
    if stripe_contains(u_old_dot_f, alpha_old, xi_old) {
        return None;
    }
    let gram = u_new_sq * u_old_sq - u_new_dot_u_old * u_new_dot_u_old;
    if !(gram > GRAM_TOL * u_new_sq * u_old_sq) {
        return None;
    }
    // choose the side by the sign of the offset; comparing against α ± ξ can
    // disagree with the containment test when |α| ≫ ξ
    let side = if u_old_dot_f - alpha_old > 0.0 { alpha_old + xi_old } else { alpha_old - xi_old };
    let t = (u_old_dot_f - side) / gram;
    Some((u_new_dot_u_old * t, -u_new_sq * t))
}

/// Projects `f` onto the boundary of the stripe `(u, α, ξ)` that it
/// violates: `f ∓ |res|(|res| − bound)/‖u‖² · u`. A point inside the stripe
/// is returned unchanged.
pub fn project_stripe_single(f: &Image, u: &Image, alpha: f64, xi: f64, residual_abs: f64, bound: f64) -> Result<Image> {
    let u_sq = u.dot(u)?;
    if !(u_sq > 0.0) {
        return Err(Error::ZeroDirection);
    }
    let u_dot_f = u.dot(f)?;
    if stripe_contains(u_dot_f, alpha, xi) {
        return Ok(f.clone());
    }
    let c = single_step_coefficient(residual_abs, bound, u_sq);
    let sign = if u_dot_f - alpha < 0.0 { -1.0 } else { 1.0 };
    let mut out = f.clone();
    for (o, &ui) in out.values_mut().iter_mut().zip(u.values()) {
        *o -= sign * c * ui;
    }
    Ok(out)
}

/// Second projection step: from the new hyperplane onto its intersection
/// with the old stripe. Returns `f_tilde` unchanged when it already lies in
/// the old stripe or the directions are parallel.
pub fn project_two_stripes(f_tilde: &Image, u_new: &Image, u_old: &Image, alpha_old: f64, xi_old: f64) -> Result<Image> {
    let coeffs = two_stripe_coefficients(
        u_old.dot(f_tilde)?,
        u_new.dot(u_old)?,
        u_new.dot(u_new)?,
        u_old.dot(u_old)?,
        alpha_old,
        xi_old,
    );
    let mut out = f_tilde.clone();
    if let Some((c_new, c_old)) = coeffs {
        for ((o, &a), &b) in out.values_mut().iter_mut().zip(u_new.values()).zip(u_old.values()) {
            *o += c_new * a + c_old * b;
        }
    }
    Ok(out)
}

/// Reconstructs an image from `sino` with the static projector as inexact
/// model. See [`resesop_kaczmarz_model`].
pub fn resesop_kaczmarz(
    sino: &Sinogram,
    inexact: &InexactnessMap,
    geom: ScanGeometry,
    grid: ImageGrid,
    cfg: &ResesopConfig,
) -> Result<(Image, ResesopReport)> {
    if sino.geometry() != geom || inexact.geometry() != geom {
        return Err(contract!("sinogram, inexactness map and scan geometry disagree"));
    }
    let model = RadonRays { grid, geom };
    let (values, report) = resesop_kaczmarz_model(&model, sino.values(), inexact.eta(), inexact.delta(), cfg)?;
    Ok((Image::from_values(grid, values)?, report))
}

/// Sequential sweeps over all rays starting from `f = 0`, until every ray
/// with a nonzero row passes `|res| ≤ τ (η + δ)` within one sweep or
/// `max_full_iterations` sweeps are done.
pub fn resesop_kaczmarz_model<M: RayModel>(
    model: &M,
    data: &[f64],
    eta: &[f64],
    delta: &[f64],
    cfg: &ResesopConfig,
) -> Result<(Vec<f64>, ResesopReport)> {
    cfg.validate()?;
    let n_rays = model.n_rays();
    if data.len() != n_rays || eta.len() != n_rays || delta.len() != n_rays {
        return Err(contract!(
            "model has {n_rays} rays but data/eta/delta have {}/{}/{} entries",
            data.len(),
            eta.len(),
            delta.len()
        ));
    }
    let n_pix = model.n_pixels();
    let mut f = vec![0.0; n_pix];
    let mut row = RayRow::default();

    // previous search direction, sparse and scattered
    let mut old = RayRow::default();
    let mut old_dense = vec![0.0; n_pix];
    let mut old_sq = 0.0;
    let mut alpha_old = 0.0;
    let mut xi_old = 0.0;

    let mut stopped = vec![false; n_rays];
    let mut active = vec![true; n_rays];
    let mut sweep_norms = Vec::new();
    let mut last_max = 0.0;
    let mut converged = false;

    for _sweep in 0..cfg.max_full_iterations {
        let mut sum_sq = 0.0;
        let mut max_res: f64 = 0.0;
        let mut all_stopped = true;
        for ray in 0..n_rays {
            model.row(ray, &mut row);
            let row_sq = row.norm_sq();
            if !(row_sq > 0.0) {
                active[ray] = false;
                stopped[ray] = false;
                continue;
            }
            let g = data[ray];
            let res = row.dot(&f) - g;
            let bound = eta[ray] + delta[ray];
            sum_sq += res * res;
            max_res = max_res.max(res.abs());
            if res.abs() <= cfg.tau * bound {
                stopped[ray] = true;
                continue;
            }
            stopped[ray] = false;
            all_stopped = false;

            let new_sq = res * res * row_sq;
            if !(new_sq > 0.0) {
                continue;
            }
            let alpha_new = res * g;
            let xi_new = res.abs() * bound;
            let c = single_step_coefficient(res.abs(), bound, new_sq);

            let old_dot_f = old.dot(&f);
            let new_dot_old = res * row.dot(&old_dense);
            // f̃ = f − c u_new
            row.axpy(-c * res, &mut f);
            let old_dot_ftilde = old_dot_f - c * new_dot_old;
            if let Some((c_new, c_old)) =
                two_stripe_coefficients(old_dot_ftilde, new_dot_old, new_sq, old_sq, alpha_old, xi_old)
            {
                row.axpy(c_new * res, &mut f);
                old.axpy(c_old, &mut f);
            }
            if cfg.nonnegativity {
                // only entries touched by the two directions can turn negative
                for (i, _) in row.iter().chain(old.iter()) {
                    if f[i] < 0.0 {
                        f[i] = 0.0;
                    }
                }
            }

            for (i, _) in old.iter() {
                old_dense[i] = 0.0;
            }
            old.clone_from(&row);
            for w in old.weights.iter_mut() {
                *w *= res;
            }
            for (i, w) in old.iter() {
                old_dense[i] += w;
            }
            old_sq = new_sq;
            alpha_old = alpha_new;
            xi_old = xi_new;
        }
        sweep_norms.push(libm::sqrt(sum_sq));
        last_max = max_res;
        if all_stopped {
            converged = true;
            break;
        }
    }

    let n_active = active.iter().filter(|a| **a).count();
    let n_stopped = stopped.iter().zip(&active).filter(|(s, a)| **s && **a).count();
    let report = ResesopReport {
        iterations_run: sweep_norms.len(),
        stopped_ray_fraction: if n_active == 0 { 1.0 } else { n_stopped as f64 / n_active as f64 },
        final_residual_max: last_max,
        per_sweep_residual_norms: sweep_norms,
        stopped,
        converged,
    };
    Ok((f, report))
}

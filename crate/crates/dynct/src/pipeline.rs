//! The three-step hybrid reconstruction and its baselines on synthetic data.

use std::path::PathBuf;
use std::time::Instant;

use dynct_core::dynamic::{add_uniform_noise, compute_inexactness, forward_dynamic};
use dynct_core::fbp::{dynamic_fbp, static_fbp, FbpConfig};
use dynct_core::geometry::{make_rectangle_phantom, relative_l2_error};
use dynct_core::landmarks::{detect_rectangle_corners, match_corner_correspondence};
use dynct_core::motion::{estimate_affine_motion, estimate_translation};
use dynct_core::radon::forward_static;
use dynct_core::resesop::{resesop_kaczmarz, ResesopConfig};
use dynct_core::{AffineMotion, Image, ImageGrid, Mat2, RectanglePhantom, ScanGeometry, Sinogram, Vec2};

const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageContext};
use crate::{io, png};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    pub center: Vec2,
    pub half_extents: Vec2,
    pub rotation: f64,
    pub intensity: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self { center: [0.1, 0.1], half_extents: [0.3, 0.2], rotation: 0.35, intensity: 1.0 }
    }
}

impl From<PhantomConfig> for RectanglePhantom {
    fn from(p: PhantomConfig) -> Self {
        RectanglePhantom { center: p.center, half_extents: p.half_extents, rotation: p.rotation, intensity: p.intensity }
    }
}

/// End state of the motion. Shifts are given in synthesis-grid pixels along
/// the `(x1, x2)` axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionConfig {
    Shift { pixels: Vec2 },
    Affine { matrix: Mat2, shift_pixels: Vec2 },
}

impl Default for MotionConfig {
    fn default() -> Self {
        MotionConfig::Shift { pixels: [51.0, 51.0] }
    }
}

impl MotionConfig {
    pub fn to_motion(&self, synth_grid: usize, n_times: usize) -> Result<AffineMotion> {
        let px = 2.0 / synth_grid as f64;
        let m = match *self {
            MotionConfig::Shift { pixels } => AffineMotion::translation([pixels[0] * px, pixels[1] * px], n_times),
            MotionConfig::Affine { matrix, shift_pixels } => {
                AffineMotion::new(matrix, [shift_pixels[0] * px, shift_pixels[1] * px], n_times)
            }
        };
        Ok(m?)
    }

    pub fn is_shift(&self) -> bool {
        matches!(self, MotionConfig::Shift { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub phantom: PhantomConfig,
    /// Grid the phantom and the data are synthesized on.
    pub synth_grid: usize,
    /// Grid of the RESESOP reconstructions.
    pub coarse_grid: usize,
    /// Grid of the FBP reconstructions.
    pub output_grid: usize,
    pub angles: usize,
    /// Number of detector offsets, odd.
    pub offsets: usize,
    pub motion: MotionConfig,
    /// Uniform noise amplitude added to every ray.
    pub noise: f64,
    pub tau: f64,
    pub coarse_iterations: usize,
    pub baseline_iterations: usize,
    /// Mollifier width; `1.5 / q` when absent.
    pub gamma: Option<f64>,
    pub seed: u64,
    pub allow_inverse_crime: bool,
    pub run_baselines: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            phantom: PhantomConfig::default(),
            synth_grid: 512,
            coarse_grid: 128,
            output_grid: 487,
            angles: 450,
            offsets: 301,
            motion: MotionConfig::default(),
            noise: 0.02,
            tau: 1.00001,
            coarse_iterations: 3,
            baseline_iterations: 30,
            gamma: None,
            seed: 0,
            allow_inverse_crime: false,
            run_baselines: true,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [("synth-grid", self.synth_grid), ("coarse-grid", self.coarse_grid), ("output-grid", self.output_grid)] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.angles < 2 {
            return bad(format!("need at least 2 angles, got {}", self.angles));
        }
        if self.offsets < 3 || self.offsets % 2 == 0 {
            return bad(format!("offsets must be odd and at least 3, got {}", self.offsets));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        if !(self.tau > 1.0 && self.tau.is_finite()) {
            return bad(format!("tau must exceed 1, got {}", self.tau));
        }
        if self.coarse_iterations == 0 || self.baseline_iterations == 0 {
            return bad("iteration counts must be positive".into());
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("gamma must be positive, got {g}"));
            }
        }
        if self.synth_grid == self.output_grid && !self.allow_inverse_crime {
            return bad(format!(
                "inverse crime: synthesis and output grids are both {0}×{0}; pick different sizes or pass --allow-inverse-crime",
                self.synth_grid
            ));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ScanGeometry> {
        Ok(ScanGeometry::new(self.angles, (self.offsets - 1) / 2)?)
    }

    pub fn fbp_config(&self, n_pix_out: usize) -> Result<FbpConfig> {
        let geom = self.geometry()?;
        Ok(match self.gamma {
            Some(g) => FbpConfig::new(g, n_pix_out)?,
            None => FbpConfig::for_geometry(geom, n_pix_out)?,
        })
    }

    fn resesop(&self, sweeps: usize) -> ResesopConfig {
        ResesopConfig { tau: self.tau, max_full_iterations: sweeps, ..ResesopConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionSummary {
    pub a: Mat2,
    pub b: Vec2,
    /// `b` in synthesis-grid pixels.
    pub b_pixels: Vec2,
}

impl MotionSummary {
    fn new(m: &AffineMotion, synth_grid: usize) -> Self {
        let b = m.end_shift();
        let scale = synth_grid as f64 / 2.0;
        Self { a: m.end_matrix(), b, b_pixels: [b[0] * scale, b[1] * scale] }
    }
}

/// Relative L2 errors against the start-state phantom on each method's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodErrors {
    pub hybrid_fbp: Option<f64>,
    pub static_fbp: f64,
    pub true_motion_fbp: f64,
    pub baseline_resesop: Option<f64>,
    pub coarse_start: f64,
    /// Against the end-state phantom.
    pub coarse_end: f64,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub synthesis: f64,
    pub coarse_start: f64,
    pub coarse_end: f64,
    pub landmarks: f64,
    pub motion_estimation: f64,
    pub hybrid_fbp: f64,
    pub static_fbp: f64,
    pub true_motion_fbp: f64,
    pub baseline_resesop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub errors: MethodErrors,
    pub true_motion: MotionSummary,
    pub estimated_motion: Option<MotionSummary>,
    /// Euclidean distance between estimated and true shift, synthesis pixels.
    pub shift_error_pixels: Option<f64>,
    pub landmark_failure: Option<String>,
    pub start_corners: Option<[Vec2; 4]>,
    pub end_corners: Option<[Vec2; 4]>,
    pub coarse_sweeps: [usize; 2],
    pub baseline_sweeps: Option<usize>,
    /// Time state the RESESOP baseline reconstructs.
    pub baseline_target: String,
    pub times: StageTimes,
    /// Coarse RESESOP (both states), landmarks, estimation and hybrid FBP.
    pub hybrid_seconds: Option<f64>,
    pub images: Vec<PathBuf>,
}

impl ComparisonReport {
    /// Copy with all wall-clock fields zeroed, for comparing runs.
    pub fn without_times(&self) -> Self {
        let mut r = self.clone();
        r.times = StageTimes { baseline_resesop: r.times.baseline_resesop.map(|_| 0.0), ..StageTimes::default() };
        r.hybrid_seconds = r.hybrid_seconds.map(|_| 0.0);
        r
    }
}

/// Phantom, motion and data of one synthetic experiment.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub geometry: ScanGeometry,
    pub phantom: RectanglePhantom,
    pub motion: AffineMotion,
    pub start: Image,
    pub end: Image,
    pub clean: Sinogram,
    pub noisy: Sinogram,
}

pub fn synthesize(cfg: &PipelineConfig) -> Result<Synthesis> {
    let geometry = cfg.geometry()?;
    let grid = ImageGrid::new(cfg.synth_grid)?;
    let phantom: RectanglePhantom = cfg.phantom.into();
    let (start, _) = make_rectangle_phantom(grid, &phantom)?;
    let motion = cfg.motion.to_motion(cfg.synth_grid, cfg.angles)?;
    let end = phantom.rasterize_pullback(grid, &motion.end_matrix(), motion.end_shift());
    let clean = forward_dynamic(&start, &motion, geometry)?;
    let noisy = add_uniform_noise(&clean, cfg.noise, cfg.seed);
    Ok(Synthesis { geometry, phantom, motion, start, end, clean, noisy })
}

/// Everything computed by one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: ComparisonReport,
    pub synthesis: Synthesis,
    pub coarse_start: Image,
    pub coarse_end: Image,
    pub hybrid: Option<Image>,
    pub estimated_motion: Option<AffineMotion>,
    pub static_fbp: Image,
    pub true_motion_fbp: Image,
    pub baseline: Option<Image>,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed().as_secs_f64())
}

/// Landmarks in both coarse images and the fitted motion mapping end-state
/// corners onto start-state corners.
fn estimate_from_images(
    start: &Image,
    end: &Image,
    shift_only: bool,
    n_times: usize,
    times: &mut StageTimes,
) -> std::result::Result<([Vec2; 4], [Vec2; 4], AffineMotion), dynct_core::Error> {
    let t0 = Instant::now();
    let start_c = detect_rectangle_corners(start)?;
    let end_c = detect_rectangle_corners(end)?;
    let end_c = match_corner_correspondence(&start_c, &end_c);
    times.landmarks = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    // the end object is f∘Γ, so Γ maps end corners onto start corners
    let fit = if shift_only {
        estimate_translation(&end_c, &start_c, n_times)?
    } else {
        estimate_affine_motion(&end_c, &start_c, n_times)?
    };
    times.motion_estimation = t0.elapsed().as_secs_f64();
    Ok((start_c, end_c, fit.motion))
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let mut times = StageTimes::default();

    let (syn, t) = timed(|| synthesize(cfg));
    let syn = syn.stage("synthesis")?;
    times.synthesis = t;
    let geom = syn.geometry;

    let start_ref = forward_static(&syn.start, geom);
    let end_ref = forward_static(&syn.end, geom);
    let inexact_start = compute_inexactness(&syn.clean, &start_ref, cfg.noise, 1.0).stage("inexactness")?;
    let inexact_end = compute_inexactness(&syn.clean, &end_ref, cfg.noise, 1.0).stage("inexactness")?;

    let coarse_grid = ImageGrid::new(cfg.coarse_grid)?;
    let coarse = cfg.resesop(cfg.coarse_iterations);
    let (res, t) = timed(|| resesop_kaczmarz(&syn.noisy, &inexact_start, geom, coarse_grid, &coarse));
    let (coarse_start, rep_start) = res.stage("coarse-resesop")?;
    times.coarse_start = t;
    let (res, t) = timed(|| resesop_kaczmarz(&syn.noisy, &inexact_end, geom, coarse_grid, &coarse));
    let (coarse_end, rep_end) = res.stage("coarse-resesop")?;
    times.coarse_end = t;

    let estimate = estimate_from_images(&coarse_start, &coarse_end, cfg.motion.is_shift(), cfg.angles, &mut times);

    let out_cfg = cfg.fbp_config(cfg.output_grid)?;
    let out_grid = ImageGrid::new(cfg.output_grid)?;
    let phantom = syn.phantom;
    let truth_out = phantom.rasterize_pullback(out_grid, &IDENTITY, [0.0, 0.0]);
    let truth_coarse = phantom.rasterize_pullback(coarse_grid, &IDENTITY, [0.0, 0.0]);
    let m = &syn.motion;
    let truth_coarse_end = phantom.rasterize_pullback(coarse_grid, &m.end_matrix(), m.end_shift());

    let (hybrid, estimated, landmark_failure, corners) = match estimate {
        Ok((start_c, end_c, motion)) => {
            let (img, t) = timed(|| dynamic_fbp(&syn.noisy, &motion, &out_cfg));
            times.hybrid_fbp = t;
            (Some(img.stage("dynamic-fbp")?), Some(motion), None, Some((start_c, end_c)))
        }
        Err(e) => (None, None, Some(e.to_string()), None),
    };

    let (img, t) = timed(|| static_fbp(&syn.noisy, &out_cfg));
    let static_img = img.stage("static-fbp")?;
    times.static_fbp = t;
    let (img, t) = timed(|| dynamic_fbp(&syn.noisy, m, &out_cfg));
    let true_img = img.stage("true-motion-fbp")?;
    times.true_motion_fbp = t;

    let (baseline, baseline_sweeps) = if cfg.run_baselines {
        let base = cfg.resesop(cfg.baseline_iterations);
        let (res, t) = timed(|| resesop_kaczmarz(&syn.noisy, &inexact_start, geom, coarse_grid, &base));
        let (img, rep) = res.stage("baseline-resesop")?;
        times.baseline_resesop = Some(t);
        (Some(img), Some(rep.iterations_run))
    } else {
        (None, None)
    };

    let err = |a: &Image, b: &Image| relative_l2_error(a, b).stage("comparison");
    let errors = MethodErrors {
        hybrid_fbp: hybrid.as_ref().map(|h| err(h, &truth_out)).transpose()?,
        static_fbp: err(&static_img, &truth_out)?,
        true_motion_fbp: err(&true_img, &truth_out)?,
        baseline_resesop: baseline.as_ref().map(|b| err(b, &truth_coarse)).transpose()?,
        coarse_start: err(&coarse_start, &truth_coarse)?,
        coarse_end: err(&coarse_end, &truth_coarse_end)?,
    };

    let true_motion = MotionSummary::new(m, cfg.synth_grid);
    let estimated_motion = estimated.as_ref().map(|e| MotionSummary::new(e, cfg.synth_grid));
    let shift_error_pixels = estimated_motion.map(|e| {
        let d = [e.b_pixels[0] - true_motion.b_pixels[0], e.b_pixels[1] - true_motion.b_pixels[1]];
        d[0].hypot(d[1])
    });
    let hybrid_seconds = hybrid
        .as_ref()
        .map(|_| times.coarse_start + times.coarse_end + times.landmarks + times.motion_estimation + times.hybrid_fbp);

    let mut report = ComparisonReport {
        errors,
        true_motion,
        estimated_motion,
        shift_error_pixels,
        landmark_failure,
        start_corners: corners.map(|c| c.0),
        end_corners: corners.map(|c| c.1),
        coarse_sweeps: [rep_start.iterations_run, rep_end.iterations_run],
        baseline_sweeps,
        baseline_target: "start".into(),
        times,
        hybrid_seconds,
        images: Vec::new(),
    };

    let run = PipelineRun {
        synthesis: syn,
        coarse_start,
        coarse_end,
        hybrid,
        estimated_motion: estimated,
        static_fbp: static_img,
        true_motion_fbp: true_img,
        baseline,
        report: report.clone(),
    };
    if let Some(dir) = &cfg.output_dir {
        report.images = write_outputs(&run, &truth_out, dir).stage("output")?;
    }
    Ok(PipelineRun { report, ..run })
}

pub fn run_hybrid_pipeline(cfg: &PipelineConfig) -> Result<ComparisonReport> {
    Ok(run_pipeline(cfg)?.report)
}

/// Writes every image as `.bin` and `.png` plus the noisy sinogram and
/// returns the written paths.
fn write_outputs(run: &PipelineRun, truth: &Image, dir: &std::path::Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut images: Vec<(&str, &Image)> = vec![
        ("truth", truth),
        ("coarse_start", &run.coarse_start),
        ("coarse_end", &run.coarse_end),
        ("static_fbp", &run.static_fbp),
        ("true_motion_fbp", &run.true_motion_fbp),
    ];
    if let Some(h) = &run.hybrid {
        images.push(("hybrid_fbp", h));
    }
    if let Some(b) = &run.baseline {
        images.push(("baseline_resesop", b));
    }
    let mut paths = Vec::new();
    for (name, img) in images {
        let bin = dir.join(format!("{name}.bin"));
        io::write_image(&bin, img)?;
        let pic = dir.join(format!("{name}.png"));
        png::export_png(img, &pic)?;
        paths.push(bin);
        paths.push(pic);
    }
    let sino = dir.join("sinogram.bin");
    io::write_sinogram(&sino, &run.synthesis.noisy)?;
    paths.push(sino);
    Ok(paths)
}

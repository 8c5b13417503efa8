use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynct::error::{Error, Result, StageContext};
use dynct::io::{self, CornersFile, MotionFile};
use dynct::pipeline::{run_hybrid_pipeline, MotionConfig, PipelineConfig};
use dynct::png::export_png;
use dynct_core::dynamic::{add_uniform_noise, compute_inexactness, forward_dynamic, InexactnessMap};
use dynct_core::fbp::{dynamic_fbp, FbpConfig};
use dynct_core::geometry::{make_rectangle_phantom, relative_l2_error, relative_l2_error_in_disk};
use dynct_core::landmarks::{detect_rectangle_corners, match_corner_correspondence};
use dynct_core::motion::{estimate_affine_motion, estimate_translation};
use dynct_core::radon::forward_static;
use dynct_core::resesop::{resesop_kaczmarz, ResesopConfig};
use dynct_core::{AffineMotion, ImageGrid, RectanglePhantom, ScanGeometry, Sinogram};

/// Dynamic CT toolkit: phantoms, projections, RESESOP-Kaczmarz, landmark
/// motion estimation and motion-compensated filtered backprojection.
#[derive(Parser)]
#[command(name = "dynct", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize a rectangle phantom.
    Phantom(PhantomArgs),
    /// Static or dynamic (with --motion) Radon transform.
    Forward(ForwardArgs),
    /// Add uniform noise to a sinogram.
    Noise(NoiseArgs),
    /// Per-ray inexactness between a dynamic and a static sinogram.
    Inexactness(InexactnessArgs),
    /// RESESOP-Kaczmarz reconstruction.
    Resesop(ResesopArgs),
    /// Detect the four corners of a rectangular object.
    Landmarks(LandmarksArgs),
    /// Fit a motion mapping end-state corners onto start-state corners.
    EstimateMotion(EstimateArgs),
    /// Filtered backprojection, motion compensated with --motion.
    Dynfbp(DynfbpArgs),
    /// Run the full hybrid method with baselines and print a report.
    Pipeline(PipelineArgs),
    /// Relative L2 error between two images.
    Compare(CompareArgs),
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got {s:?}"));
    }
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok([p(parts[0])?, p(parts[1])?])
}

fn parse_matrix(s: &str) -> std::result::Result<[[f64; 2]; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != 4 {
        return Err(format!("expected four comma-separated numbers a11,a12,a21,a22, got {s:?}"));
    }
    Ok([[v[0], v[1]], [v[2], v[3]]])
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 512)]
    grid: usize,
    #[arg(long, value_parser = parse_pair, default_value = "0.1,0.1")]
    center: [f64; 2],
    #[arg(long, value_parser = parse_pair, default_value = "0.3,0.2")]
    half_extents: [f64; 2],
    #[arg(long, default_value_t = 0.35, allow_negative_numbers = true)]
    rotation: f64,
    #[arg(long, default_value_t = 1.0)]
    intensity: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the exact corners as JSON.
    #[arg(long)]
    corners: Option<PathBuf>,
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args)]
struct ForwardArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 450)]
    angles: usize,
    #[arg(long, default_value_t = 301)]
    offsets: usize,
    /// Motion JSON file; its `n` must equal the number of angles.
    #[arg(long)]
    motion: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InexactnessArgs {
    #[arg(long)]
    dynamic: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// Noise bound δ, the same for every ray.
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long)]
    eta_out: PathBuf,
    #[arg(long)]
    delta_out: PathBuf,
}

#[derive(Args)]
struct ResesopArgs {
    #[arg(long)]
    sinogram: PathBuf,
    #[arg(long)]
    eta: PathBuf,
    #[arg(long)]
    delta: PathBuf,
    #[arg(long, default_value_t = 128)]
    grid: usize,
    #[arg(long, default_value_t = 1.00001)]
    tau: f64,
    #[arg(long, default_value_t = 30)]
    iterations: usize,
    #[arg(long)]
    no_nonnegativity: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args)]
struct LandmarksArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    start: PathBuf,
    #[arg(long)]
    end: PathBuf,
    /// Number of time points (angles) of the motion.
    #[arg(long)]
    n_times: usize,
    /// Fit only a shift.
    #[arg(long)]
    translation_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DynfbpArgs {
    #[arg(long)]
    sinogram: PathBuf,
    /// Motion JSON file; identity when absent.
    #[arg(long)]
    motion: Option<PathBuf>,
    #[arg(long, default_value_t = 487)]
    output_grid: usize,
    /// Mollifier width, default 1.5 / q.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    synth_grid: Option<usize>,
    #[arg(long)]
    coarse_grid: Option<usize>,
    #[arg(long)]
    output_grid: Option<usize>,
    #[arg(long)]
    angles: Option<usize>,
    #[arg(long)]
    offsets: Option<usize>,
    /// End shift in synthesis pixels, `d1,d2`.
    #[arg(long, value_parser = parse_pair, allow_negative_numbers = true, conflicts_with = "matrix")]
    shift_pixels: Option<[f64; 2]>,
    /// End matrix `a11,a12,a21,a22`; combined with --matrix-shift-pixels.
    #[arg(long, value_parser = parse_matrix, allow_negative_numbers = true)]
    matrix: Option<[[f64; 2]; 2]>,
    #[arg(long, value_parser = parse_pair, allow_negative_numbers = true, requires = "matrix")]
    matrix_shift_pixels: Option<[f64; 2]>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    coarse_iterations: Option<usize>,
    #[arg(long)]
    baseline_iterations: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    allow_inverse_crime: bool,
    #[arg(long)]
    no_baselines: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    reconstruction: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Only pixels inside the unit disk.
    #[arg(long)]
    disk: bool,
}

fn read_motion(path: &Option<PathBuf>, n_times: usize) -> Result<AffineMotion> {
    match path {
        Some(p) => {
            let m: MotionFile = io::read_json(p)?;
            m.to_motion()
        }
        None => Ok(AffineMotion::identity(n_times)?),
    }
}

fn geometry(angles: usize, offsets: usize) -> Result<ScanGeometry> {
    if offsets < 3 || offsets % 2 == 0 {
        return Err(Error::Config(format!("offsets must be odd and at least 3, got {offsets}")));
    }
    Ok(ScanGeometry::new(angles, (offsets - 1) / 2)?)
}

fn phantom(a: PhantomArgs) -> Result<()> {
    let spec = RectanglePhantom { center: a.center, half_extents: a.half_extents, rotation: a.rotation, intensity: a.intensity };
    let (img, corners) = make_rectangle_phantom(ImageGrid::new(a.grid)?, &spec)?;
    io::write_image(&a.out, &img)?;
    if let Some(p) = a.corners {
        io::write_json(p, &CornersFile { corners })?;
    }
    if let Some(p) = a.png {
        export_png(&img, p)?;
    }
    Ok(())
}

fn forward(a: ForwardArgs) -> Result<()> {
    let img = io::read_image(&a.input)?;
    let geom = geometry(a.angles, a.offsets)?;
    let sino = match &a.motion {
        Some(_) => forward_dynamic(&img, &read_motion(&a.motion, a.angles)?, geom)?,
        None => forward_static(&img, geom),
    };
    io::write_sinogram(&a.out, &sino)
}

fn noise(a: NoiseArgs) -> Result<()> {
    if !(a.noise >= 0.0) {
        return Err(Error::Config(format!("noise must be non-negative, got {}", a.noise)));
    }
    let sino = io::read_sinogram(&a.input)?;
    io::write_sinogram(&a.out, &add_uniform_noise(&sino, a.noise, a.seed))
}

fn inexactness(a: InexactnessArgs) -> Result<()> {
    let dynamic = io::read_sinogram(&a.dynamic)?;
    let reference = io::read_sinogram(&a.reference)?;
    let map = compute_inexactness(&dynamic, &reference, a.noise, 1.0)?;
    let geom = map.geometry();
    io::write_sinogram(&a.eta_out, &Sinogram::from_values(geom, map.eta().to_vec())?)?;
    io::write_sinogram(&a.delta_out, &Sinogram::from_values(geom, map.delta().to_vec())?)
}

fn resesop(a: ResesopArgs) -> Result<()> {
    let sino = io::read_sinogram(&a.sinogram)?;
    let eta = io::read_sinogram(&a.eta)?;
    let delta = io::read_sinogram(&a.delta)?;
    let geom = sino.geometry();
    let map = InexactnessMap::new(geom, eta.into_values(), delta.into_values(), 1.0)?;
    let cfg = ResesopConfig { tau: a.tau, max_full_iterations: a.iterations, nonnegativity: !a.no_nonnegativity, ..ResesopConfig::default() };
    let (img, report) = resesop_kaczmarz(&sino, &map, geom, ImageGrid::new(a.grid)?, &cfg)?;
    io::write_image(&a.out, &img)?;
    if let Some(p) = a.png {
        export_png(&img, p)?;
    }
    eprintln!(
        "{} sweeps, {:.1}% of rays stopped, converged: {}",
        report.iterations_run,
        100.0 * report.stopped_ray_fraction,
        report.converged
    );
    Ok(())
}

fn landmarks(a: LandmarksArgs) -> Result<()> {
    let img = io::read_image(&a.input)?;
    let corners = detect_rectangle_corners(&img)?;
    io::write_json(&a.out, &CornersFile { corners })
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let start: CornersFile = io::read_json(&a.start)?;
    let end: CornersFile = io::read_json(&a.end)?;
    let end = match_corner_correspondence(&start.corners, &end.corners);
    let fit = if a.translation_only {
        estimate_translation(&end, &start.corners, a.n_times)?
    } else {
        estimate_affine_motion(&end, &start.corners, a.n_times)?
    };
    eprintln!("fit residual {:e}", fit.residual);
    io::write_json(&a.out, &MotionFile::from(&fit.motion))
}

fn dynfbp(a: DynfbpArgs) -> Result<()> {
    let sino = io::read_sinogram(&a.sinogram)?;
    let geom = sino.geometry();
    let motion = read_motion(&a.motion, geom.p())?;
    let cfg = match a.gamma {
        Some(g) => FbpConfig::new(g, a.output_grid)?,
        None => FbpConfig::for_geometry(geom, a.output_grid)?,
    };
    let img = dynamic_fbp(&sino, &motion, &cfg)?;
    io::write_image(&a.out, &img)?;
    if let Some(p) = a.png {
        export_png(&img, p)?;
    }
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let mut cfg: PipelineConfig = match &a.config {
        Some(p) => io::read_json(p)?,
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { cfg.$field = v; })* };
    }
    set!(synth_grid, coarse_grid, output_grid, angles, offsets, noise, tau, coarse_iterations, baseline_iterations, seed);
    if a.gamma.is_some() {
        cfg.gamma = a.gamma;
    }
    if let Some(pixels) = a.shift_pixels {
        cfg.motion = MotionConfig::Shift { pixels };
    }
    if let Some(matrix) = a.matrix {
        cfg.motion = MotionConfig::Affine { matrix, shift_pixels: a.matrix_shift_pixels.unwrap_or([0.0, 0.0]) };
    }
    cfg.allow_inverse_crime |= a.allow_inverse_crime;
    cfg.run_baselines &= !a.no_baselines;
    if a.output_dir.is_some() {
        cfg.output_dir = a.output_dir;
    }
    let report = run_hybrid_pipeline(&cfg)?;
    match a.report {
        Some(p) => io::write_json(p, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn compare(a: CompareArgs) -> Result<()> {
    let rec = io::read_image(&a.reconstruction)?;
    let truth = io::read_image(&a.truth)?;
    let e = if a.disk { relative_l2_error_in_disk(&rec, &truth)? } else { relative_l2_error(&rec, &truth)? };
    println!("{}", serde_json::json!({ "relative_l2_error": e }));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phantom(a) => phantom(a).stage("phantom"),
        Command::Forward(a) => forward(a).stage("forward"),
        Command::Noise(a) => noise(a).stage("noise"),
        Command::Inexactness(a) => inexactness(a).stage("inexactness"),
        Command::Resesop(a) => resesop(a).stage("resesop"),
        Command::Landmarks(a) => landmarks(a).stage("landmarks"),
        Command::EstimateMotion(a) => estimate(a).stage("estimate-motion"),
        Command::Dynfbp(a) => dynfbp(a).stage("dynfbp"),
        Command::Pipeline(a) => pipeline(a).stage("pipeline"),
        Command::Compare(a) => compare(a).stage("compare"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

//! Command-line front end.
//!
//! Every subcommand prints one `key=value` line to stdout. Exit codes: 0 on
//! success, 2 for usage errors and violated invariants, 1 for runtime errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{axial_psf, extract_depth_map, fwhm, rect_slit_fwhm_sections};
use crate::bench::{bench_reconstruction, BenchConfig};
use crate::calibration::{fit_mask_model_with, AffineMap, Anchors, FitOptions, FitResiduals, MaskModel};
use crate::config::RunConfig;
use crate::error::{AspiError, Result};
use crate::forward::{acquire_stack, make_tilted_plane_scene, AcquisitionSet, Layer, Scene};
use crate::frame::{Frame, SENTINEL};
use crate::imaging::{camera_base_mask, synthesize_mask, MaskMode, ShiftDirection, ZGrid};
use crate::reconstruct::{reconstruct_volume, MaskSource, VolumeStack};
use crate::stack::{read_stack, write_pgm16, write_stack, Metadata, Stack};

#[derive(Parser, Debug)]
#[command(name = "aspi", version, about = "Axially shifted pattern illumination toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic acquisition.
    Simulate(SimulateArgs),
    /// Fit a mask model from three reference masks.
    Calibrate(CalibrateArgs),
    /// Reconstruct a confocal volume from an acquisition.
    Reconstruct(ReconstructArgs),
    /// Extract a peak-depth map from a volume.
    Depthmap(DepthmapArgs),
    /// Compute the axial PSF of a rig at one pixel.
    Psf(PsfArgs),
    /// Measure reconstruction throughput on synthetic data.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct RigArgs {
    #[arg(long, default_value_t = 256)]
    proj_width: usize,
    #[arg(long, default_value_t = 256)]
    proj_height: usize,
    /// Slit period in projector pixels.
    #[arg(long, default_value_t = 120)]
    period: usize,
    /// Slit width in projector pixels.
    #[arg(long, default_value_t = 4)]
    linewidth: usize,
    /// Lateral step per shift in projector pixels.
    #[arg(long, default_value_t = 1)]
    step: usize,
    /// Number of lateral shifts.
    #[arg(long, short = 'n', default_value_t = 120)]
    shifts: usize,
    #[arg(long, default_value_t = 25.0)]
    theta_deg: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    z0: f64,
    #[arg(long, default_value_t = 0.05)]
    z_step: f64,
    /// Number of z sections.
    #[arg(long, short = 'k', default_value_t = 100)]
    sections: usize,
    /// Mask shift per section in camera pixels (sets the pixel pitch).
    #[arg(long, conflicts_with = "pixel_pitch")]
    shear: Option<f64>,
    #[arg(long)]
    pixel_pitch: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    magnification: f64,
    /// Sheared masks move toward -x.
    #[arg(long)]
    negative_direction: bool,
}

impl RigArgs {
    fn to_config(&self) -> Result<RunConfig> {
        let mut c = RunConfig {
            proj_width: self.proj_width,
            proj_height: self.proj_height,
            period: self.period,
            linewidth: self.linewidth,
            shift_step: self.step,
            num_shifts: self.shifts,
            theta_deg: self.theta_deg,
            z0: self.z0,
            z_step: self.z_step,
            sections: self.sections,
            magnification: self.magnification,
            direction: if self.negative_direction {
                ShiftDirection::NegativeX
            } else {
                ShiftDirection::PositiveX
            },
            ..RunConfig::default()
        };
        match (self.shear, self.pixel_pitch) {
            (_, Some(p)) => c.pixel_pitch = p,
            (Some(s), None) => c.set_shear(s)?,
            (None, None) => c.set_shear(1.0)?,
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SceneKind {
    /// Plane tilted along x, stepping one section every 1/slope columns.
    Tilted,
    /// Semi-transparent flat layers at the sections given by --layers.
    Layers,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    rig: RigArgs,
    #[arg(long, value_enum, default_value_t = SceneKind::Tilted)]
    scene: SceneKind,
    /// Sections per column for the tilted scene [default: sections / width].
    #[arg(long)]
    slope: Option<f64>,
    /// Comma-separated section indices for the layers scene.
    #[arg(long, value_delimiter = ',', default_value = "20,50,80")]
    layers: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    haze: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    poisson_scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the ground-truth depth map.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Also write the three calibration reference masks.
    #[arg(long)]
    references: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    lateral_anchor: usize,
    #[arg(long, default_value_t = 51)]
    axial_anchor: usize,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Stack of three references: base, lateral anchor, axial anchor.
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the lateral anchor stored with the references.
    #[arg(long)]
    lateral_anchor: Option<usize>,
    /// Overrides the axial anchor stored with the references.
    #[arg(long)]
    axial_anchor: Option<usize>,
    /// Rescale references to [0, 1] before fitting.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    acq: PathBuf,
    /// Calibrated mask model; the acquisition geometry is used otherwise.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    floor: Option<f64>,
    /// Reduce masks to one-pixel slits.
    #[arg(long)]
    threshold: bool,
    /// Worker threads [default: $ASPI_THREADS, else all cores].
    #[arg(long)]
    threads: Option<usize>,
    /// Override the number of sections.
    #[arg(long)]
    sections: Option<usize>,
    /// Override the first section depth.
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<f64>,
}

#[derive(Args, Debug)]
struct DepthmapArgs {
    #[arg(long)]
    volume: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    min_confidence: Option<f64>,
    /// Parabolic sub-section peak refinement.
    #[arg(long)]
    refine: bool,
    /// Also export a 16-bit PGM spanning the z grid.
    #[arg(long)]
    pgm: Option<PathBuf>,
    /// Ground-truth depth stack to compare against.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PsfArgs {
    #[command(flatten)]
    rig: RigArgs,
    /// Probe pixel as x,y.
    #[arg(long, value_parser = parse_probe)]
    probe: (usize, usize),
    /// Section of the reflecting layer [default: middle of the grid].
    #[arg(long)]
    layer: Option<usize>,
    /// Two-column (z, response) text output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 512)]
    height: usize,
    #[arg(long, short = 'n', default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    sections: usize,
    #[arg(long)]
    threads: Option<usize>,
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// As [`run_cli`], writing to the given streams.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Depthmap(a) => depthmap(a),
        Command::Psf(a) => psf(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(summary) => {
            let _ = writeln!(out, "{summary}");
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn kind_check(meta: &Metadata, expected: &str, path: &Path) -> Result<()> {
    match meta.get("kind") {
        Some(k) if k == expected => Ok(()),
        Some(k) => Err(AspiError::Metadata(format!(
            "{} holds a `{k}` stack, expected `{expected}`",
            path.display()
        ))),
        None => Err(AspiError::Metadata(format!(
            "{} has no sidecar metadata",
            path.display()
        ))),
    }
}

fn simulate(a: SimulateArgs) -> Result<String> {
    let mut cfg = a.rig.to_config()?;
    cfg.haze = a.haze;
    cfg.noise_sigma = a.sigma;
    cfg.poisson_scale = a.poisson_scale;
    cfg.seed = a.seed;
    cfg.validate()?;
    let spec = cfg.pattern_spec()?;
    let geom = cfg.geometry()?;
    let grid = cfg.grid()?;
    let (w, h) = geom.camera_dims(&spec);
    let scene = match a.scene {
        SceneKind::Tilted => {
            let slope = a.slope.unwrap_or(grid.count as f64 / w as f64);
            make_tilted_plane_scene(&grid, slope, &Frame::filled(w, h, 1.0)?)?
        }
        SceneKind::Layers => {
            let mut idx = a.layers.clone();
            idx.sort_unstable();
            idx.dedup();
            let r = 1.0 / idx.len().max(1) as f32;
            let layers = idx
                .into_iter()
                .map(|z| Layer {
                    z_index: z,
                    reflectance: Frame::filled(w, h, r).expect("finite reflectance"),
                })
                .collect();
            Scene::new(layers, 0.0, Default::default())?
        }
    }
    .with_haze(cfg.haze)?
    .with_noise(cfg.noise())?;
    let acq = acquire_stack(&scene, &spec, &geom, &grid)?;

    let mut meta = cfg.to_metadata();
    meta.set("kind", "acquisition").set("scene", format!("{:?}", a.scene).to_lowercase());
    write_stack(&a.out, &Stack::from_frames(&acq.frames, meta.clone())?)?;
    let mut summary = format!(
        "command=simulate out={} frames={} width={w} height={h} sections={} shear_px={}",
        a.out.display(),
        acq.frames.len(),
        grid.count,
        geom.shear_px_per_section()
    );

    if let Some(path) = &a.truth {
        let depth = scene.ground_truth_depth(&grid);
        let mut m = meta.clone();
        m.set("kind", "depth").set("depth_sentinel", "nan");
        let plane = depth.iter().map(|&d| d as f32).collect();
        write_stack(path, &Stack::new(w, h, vec![plane], m)?)?;
        summary.push_str(&format!(" truth={}", path.display()));
    }
    if let Some(path) = &a.references {
        let base = camera_base_mask(&spec, &geom)?;
        let grid0 = ZGrid::new(grid.z0, grid.z_step, a.axial_anchor.max(1))?;
        let refs = [
            synthesize_mask(&base, 0.0, 0, &geom, &grid0)?,
            synthesize_mask(&base, a.lateral_anchor.saturating_sub(1) as f64 * geom.lateral_step_px(&spec), 0, &geom, &grid0)?,
            synthesize_mask(&base, 0.0, a.axial_anchor.saturating_sub(1), &geom, &grid0)?,
        ];
        let mut m = meta.clone();
        m.set("kind", "references")
            .set("lateral_anchor", a.lateral_anchor)
            .set("axial_anchor", a.axial_anchor);
        write_stack(path, &Stack::from_frames(&refs, m)?)?;
        summary.push_str(&format!(" references={}", path.display()));
    }
    Ok(summary)
}

fn calibrate(a: CalibrateArgs) -> Result<String> {
    let stack = read_stack(&a.refs)?;
    if stack.planes.len() != 3 {
        return Err(AspiError::arg(format!(
            "reference stack must hold 3 planes, found {}",
            stack.planes.len()
        )));
    }
    let meta = &stack.metadata;
    let anchors = Anchors {
        lateral_steps: match a.lateral_anchor {
            Some(n) => n,
            None => meta.parse("lateral_anchor")?,
        },
        axial_sections: match a.axial_anchor {
            Some(k) => k,
            None => meta.parse("axial_anchor")?,
        },
    };
    let frames = stack.to_frames()?;
    let options = FitOptions {
        normalize: a.normalize,
        ..Default::default()
    };
    let model = fit_mask_model_with(&frames[0], &frames[1], &frames[2], anchors, &options)?;
    let mut m = meta.clone();
    write_model_metadata(&mut m, &model);
    write_stack(&a.out, &Stack::from_frames(std::slice::from_ref(&model.base_mask), m)?)?;
    let (ldx, ldy) = model.lateral_map.translation_part();
    let (adx, ady) = model.axial_map.translation_part();
    Ok(format!(
        "command=calibrate out={} lateral_dx={ldx:.6} lateral_dy={ldy:.6} axial_dx={adx:.6} axial_dy={ady:.6} residual_lateral={:.6} residual_axial={:.6}",
        a.out.display(),
        model.residuals.lateral,
        model.residuals.axial
    ))
}

fn write_model_metadata(m: &mut Metadata, model: &MaskModel) {
    let (ldx, ldy) = model.lateral_map.translation_part();
    let (adx, ady) = model.axial_map.translation_part();
    m.set("kind", "mask_model")
        .set("lateral_dx", ldx)
        .set("lateral_dy", ldy)
        .set("axial_dx", adx)
        .set("axial_dy", ady)
        .set("lateral_anchor", model.anchors.lateral_steps)
        .set("axial_anchor", model.anchors.axial_sections)
        .set("residual_lateral", model.residuals.lateral)
        .set("residual_axial", model.residuals.axial);
}

/// Loads a mask model written by `calibrate`.
pub fn read_mask_model(path: &Path) -> Result<MaskModel> {
    let stack = read_stack(path)?;
    let m = &stack.metadata;
    kind_check(m, "mask_model", path)?;
    let base_mask = stack
        .to_frames()?
        .into_iter()
        .next()
        .ok_or_else(|| AspiError::Metadata("mask model has no base plane".into()))?;
    Ok(MaskModel {
        base_mask,
        lateral_map: AffineMap::translation(m.parse("lateral_dx")?, m.parse("lateral_dy")?),
        axial_map: AffineMap::translation(m.parse("axial_dx")?, m.parse("axial_dy")?),
        anchors: Anchors {
            lateral_steps: m.parse("lateral_anchor")?,
            axial_sections: m.parse("axial_anchor")?,
        },
        residuals: FitResiduals {
            lateral: m.parse_or("residual_lateral", f64::NAN)?,
            axial: m.parse_or("residual_axial", f64::NAN)?,
        },
    })
}

/// Loads an acquisition written by `simulate`, checking frames against the
/// rig recorded in its metadata.
pub fn read_acquisition(path: &Path) -> Result<(AcquisitionSet, RunConfig)> {
    let stack = read_stack(path)?;
    kind_check(&stack.metadata, "acquisition", path)?;
    let cfg = RunConfig::from_metadata(&stack.metadata)?;
    let spec = cfg.pattern_spec()?;
    let geom = cfg.geometry()?;
    let expected = geom.camera_dims(&spec);
    if (stack.width, stack.height) != expected {
        return Err(AspiError::dims(expected, (stack.width, stack.height)));
    }
    let acq = AcquisitionSet::new(stack.to_frames()?, spec, geom, cfg.grid()?)?;
    Ok((acq, cfg))
}

fn mode_name(mode: MaskMode) -> &'static str {
    match mode {
        MaskMode::Grayscale => "grayscale",
        MaskMode::Thresholded => "thresholded",
    }
}

fn reconstruct(a: ReconstructArgs) -> Result<String> {
    let (acq, mut cfg) = read_acquisition(&a.acq)?;
    if let Some(k) = a.sections {
        cfg.sections = k;
    }
    if let Some(z0) = a.z0 {
        cfg.z0 = z0;
    }
    cfg.floor = a.floor;
    cfg.threshold = a.threshold;
    cfg.threads = RunConfig::resolve_threads(a.threads);
    cfg.validate()?;
    let grid = cfg.grid()?;
    let options = cfg.reconstruct_options();
    let base;
    let model;
    let source = match &a.model {
        Some(path) => {
            model = read_mask_model(path)?;
            MaskSource::Model(&model)
        }
        None => {
            base = camera_base_mask(&acq.spec, &acq.geom)?;
            MaskSource::Geometry { base: &base }
        }
    };
    let volume = reconstruct_volume(&acq, &source, &grid, &options)?;
    let mut meta = cfg.to_metadata();
    meta.set("kind", "volume")
        .set("floor_used", volume.coverage_floor_used)
        .set("sentinel", volume.sentinel)
        .set("mask_source", &volume.mask_source)
        .set("mask_mode", mode_name(volume.mask_mode));
    write_stack(&a.out, &Stack::from_frames(&volume.sections, meta)?)?;
    let sentinels = volume
        .sections
        .iter()
        .map(|s| s.data().iter().filter(|&&v| v == SENTINEL).count())
        .sum::<usize>();
    Ok(format!(
        "command=reconstruct out={} sections={} width={} height={} floor={} mask_source={} mask_mode={} sentinel_pixels={sentinels}",
        a.out.display(),
        grid.count,
        volume.dims().0,
        volume.dims().1,
        volume.coverage_floor_used,
        volume.mask_source,
        mode_name(volume.mask_mode)
    ))
}

/// Loads a volume written by `reconstruct`.
pub fn read_volume(path: &Path) -> Result<VolumeStack> {
    let stack = read_stack(path)?;
    let m = &stack.metadata;
    kind_check(m, "volume", path)?;
    let grid = ZGrid::new(m.parse("z0")?, m.parse("z_step")?, m.parse("sections")?)?;
    if stack.planes.len() != grid.count {
        return Err(AspiError::Metadata(format!(
            "volume has {} planes but metadata declares {} sections",
            stack.planes.len(),
            grid.count
        )));
    }
    let mask_mode = match m.get("mask_mode") {
        Some("thresholded") => MaskMode::Thresholded,
        _ => MaskMode::Grayscale,
    };
    Ok(VolumeStack {
        sections: stack.to_frames_with_sentinel()?,
        grid,
        coverage_floor_used: m.parse_or("floor_used", f64::NAN)?,
        sentinel: m.parse_or("sentinel", SENTINEL)?,
        mask_source: m.get("mask_source").unwrap_or("unknown").to_string(),
        mask_mode,
    })
}

fn depthmap(a: DepthmapArgs) -> Result<String> {
    let volume = read_volume(&a.volume)?;
    let map = extract_depth_map(&volume, a.min_confidence, a.refine);
    let mut meta = read_stack(&a.volume)?.metadata;
    meta.set("kind", "depth")
        .set("depth_sentinel", "nan")
        .set("min_confidence", map.min_confidence)
        .set("refine", a.refine);
    let plane = map.depth.iter().map(|&d| d as f32).collect();
    write_stack(&a.out, &Stack::new(map.width, map.height, vec![plane], meta)?)?;
    let mut summary = format!(
        "command=depthmap out={} valid_pixels={} total_pixels={} min_confidence={}",
        a.out.display(),
        map.valid_count(),
        map.width * map.height,
        map.min_confidence
    );
    if let Some(pgm) = &a.pgm {
        write_pgm16(pgm, map.width, map.height, &map.depth, volume.grid.z0, volume.grid.z_max())?;
        summary.push_str(&format!(" pgm={}", pgm.display()));
    }
    if let Some(path) = &a.truth {
        let truth = read_stack(path)?;
        if (truth.width, truth.height) != (map.width, map.height) {
            return Err(AspiError::dims((map.width, map.height), (truth.width, truth.height)));
        }
        let t: Vec<f64> = truth.planes[0].iter().map(|&v| v as f64).collect();
        let rms = map.rms_error(&t, |_, _| true).unwrap_or(f64::NAN);
        summary.push_str(&format!(
            " rms_error={rms} rms_error_sections={}",
            rms / volume.grid.z_step
        ));
    }
    Ok(summary)
}

fn parse_probe(s: &str) -> std::result::Result<(usize, usize), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(x)?, parse(y)?))
}

fn psf(a: PsfArgs) -> Result<String> {
    let cfg = a.rig.to_config()?;
    let spec = cfg.pattern_spec()?;
    let geom = cfg.geometry()?;
    let grid = cfg.grid()?;
    let base = camera_base_mask(&spec, &geom)?;
    let probe = a.probe;
    let layer = a.layer.unwrap_or(grid.count / 2);
    let pattern = synthesize_mask(&base, 0.0, layer, &geom, &grid)?;
    let curve = axial_psf(&pattern, &base, &spec, &geom, &grid, probe)?;
    let (peak_z, _) = curve.peak();
    let width = fwhm(&curve).map(|f| f / grid.z_step).unwrap_or(f64::NAN);
    let predicted = rect_slit_fwhm_sections(
        cfg.linewidth as f64 * cfg.magnification,
        geom.shear_px_per_section(),
    );
    let mut summary = format!(
        "command=psf probe={},{} peak_z={peak_z} fwhm_sections={width} predicted_fwhm_sections={predicted}",
        probe.0, probe.1
    );
    if let Some(path) = &a.out {
        std::fs::write(path, curve.to_text())?;
        summary.push_str(&format!(" out={}", path.display()));
    }
    Ok(summary)
}

fn bench(a: BenchArgs) -> Result<String> {
    let report = bench_reconstruction(&BenchConfig {
        width: a.width,
        height: a.height,
        num_shifts: a.n,
        sections: a.sections,
        threads: RunConfig::resolve_threads(a.threads),
    })?;
    Ok(format!("command=bench {}", report.summary()))
}

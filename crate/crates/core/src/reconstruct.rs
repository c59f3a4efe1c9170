//! Virtual confocal reconstruction.
//!
//! Section `j` is the mask-weighted mean of the scan:
//!
//! ```text
//! I_j = (sum_i O_i * M_ij) / (sum_i M_ij)
//! ```
//!
//! The multiplication by `M_ij` plays the role of the confocal pinhole and the
//! denominator (the coverage) normalizes uneven illumination. Where the
//! coverage falls below a floor the section holds [`SENTINEL`].
//!
//! Each pixel accumulates in `f64` over `i = 0..n` in order, so results are
//! bit-identical whatever the thread count, and whether masks are stored or
//! regenerated from a base mask on the fly.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::calibration::MaskModel;
use crate::error::{AspiError, Result};
use crate::forward::AcquisitionSet;
use crate::frame::{Frame, ShiftKernel, SENTINEL};
use crate::imaging::{threshold_mask, MaskMode, ShearPlan, ZGrid};

/// Default coverage floor as a fraction of `max(base mask) * n`.
pub const DEFAULT_FLOOR_FRACTION: f64 = 1e-3;

pub fn default_floor(base_mask: &Frame, num_shifts: usize) -> f64 {
    DEFAULT_FLOOR_FRACTION * base_mask.max() as f64 * num_shifts as f64
}

/// Where the per-section masks come from.
#[derive(Clone, Copy, Debug)]
pub enum MaskSource<'a> {
    /// A camera-plane base mask shifted by the acquisition geometry.
    Geometry { base: &'a Frame },
    /// Masks predicted by a calibrated model.
    Model(&'a MaskModel),
    /// Explicit masks, one list of `n` frames per section.
    Listed(&'a [Vec<Frame>]),
}

impl MaskSource<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            MaskSource::Geometry { .. } => "geometry",
            MaskSource::Model(_) => "model",
            MaskSource::Listed(_) => "listed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructOptions {
    /// Coverage floor; `None` uses [`default_floor`].
    pub floor: Option<f64>,
    pub mode: MaskMode,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
    /// Build every mask before accumulating instead of shifting rows on the
    /// fly. Same output, more memory.
    pub materialize: bool,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            floor: None,
            mode: MaskMode::Grayscale,
            threads: 0,
            materialize: false,
        }
    }
}

/// Reconstructed confocal sections on a z grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeStack {
    pub sections: Vec<Frame>,
    pub grid: ZGrid,
    pub coverage_floor_used: f64,
    pub sentinel: f32,
    pub mask_source: String,
    pub mask_mode: MaskMode,
}

impl VolumeStack {
    pub fn dims(&self) -> (usize, usize) {
        self.sections[0].dims()
    }

    /// Intensities of pixel `(x, y)` across sections.
    pub fn column(&self, x: usize, y: usize) -> Vec<f32> {
        self.sections.iter().map(|s| s.get(x, y)).collect()
    }
}

/// Masks for one section, either stored or generated row by row.
enum SectionMasks<'a> {
    Shifted {
        base: &'a Frame,
        kernels: Vec<ShiftKernel>,
    },
    Listed(Cow<'a, [Frame]>),
}

impl SectionMasks<'_> {
    #[inline]
    fn row<'b>(&'b self, i: usize, y: usize, buf: &'b mut [f32]) -> &'b [f32] {
        match self {
            SectionMasks::Shifted { base, kernels } => {
                kernels[i].fill_row(base, y, buf);
                buf
            }
            SectionMasks::Listed(m) => m[i].row(y),
        }
    }
}

fn check_floor(floor: f64) -> Result<()> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(AspiError::arg(format!("coverage floor {floor} must be finite and > 0")));
    }
    Ok(())
}

/// Accumulates one section. Returns `(section, coverage)` pixel buffers.
fn accumulate(frames: &[Frame], masks: &SectionMasks, floor: f64) -> (Vec<f32>, Vec<f32>) {
    let (w, h) = frames[0].dims();
    let mut section = vec![0.0f32; w * h];
    let mut coverage = vec![0.0f32; w * h];
    section
        .par_chunks_mut(w)
        .zip(coverage.par_chunks_mut(w))
        .enumerate()
        .for_each_init(
            || (vec![0.0f64; w], vec![0.0f64; w], vec![0.0f32; w]),
            |(num, den, buf), (y, (out, cov))| {
                num.fill(0.0);
                den.fill(0.0);
                for (i, frame) in frames.iter().enumerate() {
                    let mask = masks.row(i, y, buf);
                    let obj = frame.row(y);
                    for x in 0..w {
                        let m = mask[x] as f64;
                        num[x] += obj[x] as f64 * m;
                        den[x] += m;
                    }
                }
                for x in 0..w {
                    cov[x] = den[x] as f32;
                    out[x] = if den[x] >= floor {
                        (num[x] / den[x]) as f32
                    } else {
                        SENTINEL
                    };
                }
            },
        );
    (section, coverage)
}

/// Reconstructs one section from explicit masks for that section.
/// Returns the section and its coverage map.
pub fn reconstruct_section(acq: &AcquisitionSet, masks: &[Frame], floor: f64) -> Result<(Frame, Frame)> {
    check_floor(floor)?;
    if masks.is_empty() || acq.frames.is_empty() {
        return Err(AspiError::arg("reconstruction needs at least one frame and mask"));
    }
    if masks.len() != acq.frames.len() {
        return Err(AspiError::arg(format!(
            "{} masks for {} frames",
            masks.len(),
            acq.frames.len()
        )));
    }
    let dims = acq.dims();
    for f in acq.frames.iter().chain(masks) {
        if f.dims() != dims {
            return Err(AspiError::dims(dims, f.dims()));
        }
    }
    let (section, coverage) = accumulate(&acq.frames, &SectionMasks::Listed(Cow::Borrowed(masks)), floor);
    Ok((
        Frame::from_raw(dims.0, dims.1, section),
        Frame::from_raw(dims.0, dims.1, coverage),
    ))
}

/// Per-(shift, section) translation of a base mask.
type ShiftFn<'a> = Box<dyn Fn(usize, usize) -> (f64, f64) + Sync + 'a>;

fn shift_fn<'a>(acq: &'a AcquisitionSet, source: &MaskSource<'a>, grid: &ZGrid) -> Result<Option<(&'a Frame, ShiftFn<'a>)>> {
    match *source {
        MaskSource::Geometry { base } => {
            let plan = ShearPlan::new(&acq.geom, grid)?;
            let lateral = acq.geom.lateral_step_px(&acq.spec);
            Ok(Some((
                base,
                Box::new(move |i, j| (i as f64 * lateral + plan.shift(j), 0.0)),
            )))
        }
        MaskSource::Model(model) => Ok(Some((&model.base_mask, Box::new(move |i, j| model.shift(i, j))))),
        MaskSource::Listed(_) => Ok(None),
    }
}

fn section_masks<'a>(
    n: usize,
    j: usize,
    source: &MaskSource<'a>,
    shifts: &Option<(&'a Frame, ShiftFn<'a>)>,
    options: &ReconstructOptions,
) -> Result<SectionMasks<'a>> {
    let masks = match (source, shifts) {
        (MaskSource::Listed(lists), _) => SectionMasks::Listed(Cow::Borrowed(&lists[j][..])),
        (_, Some((base, shift))) => {
            let kernels = (0..n)
                .map(|i| {
                    let (dx, dy) = shift(i, j);
                    ShiftKernel::new(dx, dy)
                })
                .collect();
            SectionMasks::Shifted { base, kernels }
        }
        _ => unreachable!("shift function exists for non-listed sources"),
    };
    let needs_frames = options.materialize || options.mode == MaskMode::Thresholded;
    if !needs_frames {
        return Ok(masks);
    }
    let mut frames: Vec<Frame> = match masks {
        SectionMasks::Listed(list) => list.into_owned(),
        SectionMasks::Shifted { base, kernels } => kernels
            .iter()
            .map(|k| {
                let mut data = vec![0.0f32; base.len()];
                for (y, row) in data.chunks_exact_mut(base.width()).enumerate() {
                    k.fill_row(base, y, row);
                }
                Frame::from_raw(base.width(), base.height(), data)
            })
            .collect(),
    };
    if options.mode == MaskMode::Thresholded {
        frames = frames.iter().map(threshold_mask).collect::<Result<_>>()?;
    }
    Ok(SectionMasks::Listed(Cow::Owned(frames)))
}

pub(crate) fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AspiError::arg(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn check_source(acq: &AcquisitionSet, source: &MaskSource, grid: &ZGrid) -> Result<Frame> {
    let dims = acq.dims();
    let n = acq.frames.len();
    match source {
        MaskSource::Geometry { base } => {
            if base.dims() != dims {
                return Err(AspiError::dims(dims, base.dims()));
            }
            Ok((*base).clone())
        }
        MaskSource::Model(model) => {
            if model.base_mask.dims() != dims {
                return Err(AspiError::dims(dims, model.base_mask.dims()));
            }
            Ok(model.base_mask.clone())
        }
        MaskSource::Listed(lists) => {
            if lists.len() != grid.count {
                return Err(AspiError::arg(format!(
                    "{} mask sections for a grid of {}",
                    lists.len(),
                    grid.count
                )));
            }
            for list in lists.iter() {
                if list.len() != n {
                    return Err(AspiError::arg(format!("{} masks for {n} frames", list.len())));
                }
                if let Some(f) = list.iter().find(|f| f.dims() != dims) {
                    return Err(AspiError::dims(dims, f.dims()));
                }
            }
            Ok(lists[0][0].clone())
        }
    }
}

/// Reconstructs the sections of `grid` in z order, handing each to `sink`
/// without keeping it. Returns the coverage floor used.
pub fn reconstruct_sections(
    acq: &AcquisitionSet,
    source: &MaskSource,
    grid: &ZGrid,
    options: &ReconstructOptions,
    mut sink: impl FnMut(usize, Frame) -> Result<()> + Send,
) -> Result<f64> {
    if acq.frames.is_empty() {
        return Err(AspiError::arg("acquisition has no frames"));
    }
    let reference = check_source(acq, source, grid)?;
    let n = acq.frames.len();
    let floor = options.floor.unwrap_or_else(|| default_floor(&reference, n));
    check_floor(floor)?;
    let shifts = shift_fn(acq, source, grid)?;
    let (w, h) = acq.dims();
    with_threads(options.threads, || {
        for j in 0..grid.count {
            let masks = section_masks(n, j, source, &shifts, options)?;
            let (data, _) = accumulate(&acq.frames, &masks, floor);
            sink(j, Frame::from_raw(w, h, data))?;
        }
        Ok::<(), AspiError>(())
    })??;
    Ok(floor)
}

/// Reconstructs every section of `grid` from one acquisition.
pub fn reconstruct_volume(
    acq: &AcquisitionSet,
    source: &MaskSource,
    grid: &ZGrid,
    options: &ReconstructOptions,
) -> Result<VolumeStack> {
    let mut sections = Vec::with_capacity(grid.count);
    let floor = reconstruct_sections(acq, source, grid, options, |_, s| {
        sections.push(s);
        Ok(())
    })?;
    Ok(VolumeStack {
        sections,
        grid: *grid,
        coverage_floor_used: floor,
        sentinel: SENTINEL,
        mask_source: source.label().to_string(),
        mask_mode: options.mode,
    })
}

/// Per-section denominators of the reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageMap {
    pub sections: Vec<Frame>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectionCoverage {
    pub min: f64,
    pub mean: f64,
    pub below_floor_fraction: f64,
    /// Columns with zero coverage in every row.
    pub zero_columns: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub map: CoverageMap,
    pub floor: f64,
    pub per_section: Vec<SectionCoverage>,
    pub min: f64,
    pub mean: f64,
    pub below_floor_fraction: f64,
}

fn summarize(coverage: &Frame, floor: f64) -> SectionCoverage {
    let below = coverage.data().iter().filter(|&&c| (c as f64) < floor).count();
    let zero_columns = (0..coverage.width())
        .filter(|&x| (0..coverage.height()).all(|y| coverage.get(x, y) == 0.0))
        .collect();
    SectionCoverage {
        min: coverage.min() as f64,
        mean: coverage.mean(),
        below_floor_fraction: below as f64 / coverage.len() as f64,
        zero_columns,
    }
}

fn build_report(sections: Vec<Frame>, floor: f64) -> CoverageReport {
    let per_section: Vec<SectionCoverage> = sections.iter().map(|c| summarize(c, floor)).collect();
    let k = per_section.len() as f64;
    CoverageReport {
        min: per_section.iter().map(|s| s.min).fold(f64::INFINITY, f64::min),
        mean: per_section.iter().map(|s| s.mean).sum::<f64>() / k,
        below_floor_fraction: per_section.iter().map(|s| s.below_floor_fraction).sum::<f64>() / k,
        per_section,
        map: CoverageMap { sections },
        floor,
    }
}

/// Exact per-pixel coverage `sum_i M_ij` for explicit per-section masks.
pub fn coverage_report(masks: &[Vec<Frame>], floor: f64) -> Result<CoverageReport> {
    if masks.is_empty() || masks.iter().any(|m| m.is_empty()) {
        return Err(AspiError::arg("coverage needs at least one mask per section"));
    }
    let dims = masks[0][0].dims();
    let sections = masks
        .iter()
        .map(|list| {
            let mut acc = vec![0.0f64; dims.0 * dims.1];
            for m in list {
                if m.dims() != dims {
                    return Err(AspiError::dims(dims, m.dims()));
                }
                acc.iter_mut().zip(m.data()).for_each(|(a, &v)| *a += v as f64);
            }
            Ok(Frame::from_raw(dims.0, dims.1, acc.into_iter().map(|a| a as f32).collect()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(build_report(sections, floor))
}

/// Coverage of the masks [`reconstruct_volume`] would use for `source`,
/// without storing them.
pub fn source_coverage(
    acq: &AcquisitionSet,
    source: &MaskSource,
    grid: &ZGrid,
    options: &ReconstructOptions,
) -> Result<CoverageReport> {
    let reference = check_source(acq, source, grid)?;
    let n = acq.frames.len();
    let floor = options.floor.unwrap_or_else(|| default_floor(&reference, n));
    let shifts = shift_fn(acq, source, grid)?;
    let (w, h) = acq.dims();
    let ones: Vec<Frame> = (0..n).map(|_| Frame::from_raw(w, h, vec![1.0; w * h])).collect();
    let sections = (0..grid.count)
        .map(|j| {
            let masks = section_masks(n, j, source, &shifts, options)?;
            let (_, cov) = accumulate(&ones, &masks, floor);
            Ok(Frame::from_raw(w, h, cov))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(build_report(sections, floor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{acquire_stack, Scene};
    use crate::imaging::{camera_base_mask, synthesize_mask, GeometryConfig, PatternSpec};

    fn rig(shear: f64) -> (PatternSpec, GeometryConfig, ZGrid) {
        let spec = PatternSpec::new(48, 5, 24, 3, 3, 8).unwrap();
        let geom = GeometryConfig::with_shear(25f64.to_radians(), 0.05, shear, 1.0).unwrap();
        let grid = ZGrid::for_geometry(&geom, 0.0, 12).unwrap();
        (spec, geom, grid)
    }

    fn masks_for(base: &Frame, spec: &PatternSpec, geom: &GeometryConfig, grid: &ZGrid, j: usize) -> Vec<Frame> {
        (0..spec.num_shifts)
            .map(|i| synthesize_mask(base, (i * spec.shift_step) as f64, j, geom, grid).unwrap())
            .collect()
    }

    #[test]
    fn binary_masks_on_perfect_reflector_give_one() {
        let (spec, geom, grid) = rig(1.0);
        let base = camera_base_mask(&spec, &geom).unwrap();
        let masks = masks_for(&base, &spec, &geom, &grid, 0);
        let acq = AcquisitionSet::new(masks.clone(), spec, geom, grid).unwrap();
        let (section, cov) = reconstruct_section(&acq, &masks, 0.5).unwrap();
        for (s, c) in section.data().iter().zip(cov.data()) {
            if *c >= 0.5 {
                assert_eq!(*s, 1.0);
            } else {
                assert_eq!(*s, SENTINEL);
            }
        }
    }

    #[test]
    fn grayscale_reflector_exceeds_mask_mean() {
        let (spec, geom, grid) = rig(1.0);
        let base = camera_base_mask(&spec, &geom).unwrap().translate(0.4, 0.0);
        let masks = masks_for(&base, &spec, &geom, &grid, 0);
        let acq = AcquisitionSet::new(masks.clone(), spec, geom, grid).unwrap();
        let (section, cov) = reconstruct_section(&acq, &masks, 1e-6).unwrap();
        for p in 0..section.len() {
            if cov.data()[p] > 1e-3 {
                let mean = cov.data()[p] / masks.len() as f32;
                assert!(section.data()[p] >= mean - 1e-6);
            }
        }
    }

    #[test]
    fn section_argument_errors() {
        let (spec, geom, grid) = rig(1.0);
        let base = camera_base_mask(&spec, &geom).unwrap();
        let masks = masks_for(&base, &spec, &geom, &grid, 0);
        let acq = AcquisitionSet::new(masks.clone(), spec, geom, grid).unwrap();
        assert!(reconstruct_section(&acq, &masks[..3], 0.5).is_err());
        assert!(reconstruct_section(&acq, &[], 0.5).is_err());
        assert!(reconstruct_section(&acq, &masks, 0.0).is_err());
        let mut wrong = masks.clone();
        wrong[2] = Frame::zeros(10, 5);
        assert!(matches!(
            reconstruct_section(&acq, &wrong, 0.5),
            Err(AspiError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn volume_with_one_section_equals_section() {
        let (spec, geom, _) = rig(1.0);
        let grid = ZGrid::for_geometry(&geom, 0.0, 1).unwrap();
        let scene = Scene::single_layer(0, Frame::filled(48, 5, 0.8).unwrap()).unwrap();
        let acq = acquire_stack(&scene, &spec, &geom, &grid).unwrap();
        let base = camera_base_mask(&spec, &geom).unwrap();
        let vol = reconstruct_volume(&acq, &MaskSource::Geometry { base: &base }, &grid, &ReconstructOptions::default()).unwrap();
        let masks = masks_for(&base, &spec, &geom, &grid, 0);
        let (section, _) = reconstruct_section(&acq, &masks, vol.coverage_floor_used).unwrap();
        assert_eq!(vol.sections, vec![section]);
        assert_eq!(vol.mask_source, "geometry");
    }

    #[test]
    fn on_the_fly_listed_and_materialized_agree_bitwise() {
        let (spec, geom, grid) = rig(0.7);
        let r = Frame::from_fn(48, 5, |x, y| ((x * 3 + y) % 7) as f32 / 7.0).unwrap();
        let scene = Scene::single_layer(4, r).unwrap().with_haze(0.2).unwrap();
        let acq = acquire_stack(&scene, &spec, &geom, &grid).unwrap();
        let base = camera_base_mask(&spec, &geom).unwrap();
        let src = MaskSource::Geometry { base: &base };
        let a = reconstruct_volume(&acq, &src, &grid, &ReconstructOptions::default()).unwrap();
        let opts = ReconstructOptions { materialize: true, ..Default::default() };
        let b = reconstruct_volume(&acq, &src, &grid, &opts).unwrap();
        assert_eq!(a.sections, b.sections);
        let lists: Vec<Vec<Frame>> = (0..grid.count).map(|j| masks_for(&base, &spec, &geom, &grid, j)).collect();
        let c = reconstruct_volume(&acq, &MaskSource::Listed(&lists), &grid, &ReconstructOptions::default()).unwrap();
        assert_eq!(a.sections, c.sections);
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let (spec, geom, grid) = rig(0.6);
        let r = Frame::from_fn(48, 5, |x, y| ((x * 5 + y * 3) % 9) as f32 / 9.0).unwrap();
        let scene = Scene::single_layer(6, r).unwrap();
        let acq = acquire_stack(&scene, &spec, &geom, &grid).unwrap();
        let base = camera_base_mask(&spec, &geom).unwrap();
        let src = MaskSource::Geometry { base: &base };
        let one = reconstruct_volume(&acq, &src, &grid, &ReconstructOptions { threads: 1, ..Default::default() }).unwrap();
        let four = reconstruct_volume(&acq, &src, &grid, &ReconstructOptions { threads: 4, ..Default::default() }).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn listed_source_shape_errors() {
        let (spec, geom, grid) = rig(1.0);
        let base = camera_base_mask(&spec, &geom).unwrap();
        let scene = Scene::single_layer(0, Frame::filled(48, 5, 1.0).unwrap()).unwrap();
        let acq = acquire_stack(&scene, &spec, &geom, &grid).unwrap();
        let lists = vec![masks_for(&base, &spec, &geom, &grid, 0)];
        assert!(reconstruct_volume(&acq, &MaskSource::Listed(&lists), &grid, &ReconstructOptions::default()).is_err());
    }

    #[test]
    fn full_coverage_is_constant() {
        // w = step: every interior pixel lit exactly once per section
        let (spec, geom, grid) = rig(1.0);
        let base = camera_base_mask(&spec, &geom).unwrap();
        let lists: Vec<Vec<Frame>> = (0..3).map(|j| masks_for(&base, &spec, &geom, &grid, j)).collect();
        let report = coverage_report(&lists, 0.5).unwrap();
        for (j, cov) in report.map.sections.iter().enumerate() {
            for y in 0..5 {
                for x in j..48 {
                    assert_eq!(cov.get(x, y), 1.0);
                }
            }
        }
    }

    #[test]
    fn partial_scan_leaves_periodic_stripes() {
        // 6 of 8 shifts: columns with residue 18..24 mod 24 never lit
        let spec = PatternSpec::new(48, 3, 24, 3, 3, 6).unwrap();
        let geom = GeometryConfig::with_shear(0.4, 0.05, 1.0, 1.0).unwrap();
        let grid = ZGrid::for_geometry(&geom, 0.0, 1).unwrap();
        let base = camera_base_mask(&spec, &geom).unwrap();
        let lists = vec![masks_for(&base, &spec, &geom, &grid, 0)];
        let report = coverage_report(&lists, 0.5).unwrap();
        let expected: Vec<usize> = (0..48).filter(|c| c % 24 >= 18).collect();
        assert_eq!(report.per_section[0].zero_columns, expected);
        assert!((report.below_floor_fraction - 12.0 / 48.0).abs() < 1e-12);
    }

    #[test]
    fn shear_vacates_border_columns() {
        let (spec, geom, grid) = rig(2.0);
        let base = camera_base_mask(&spec, &geom).unwrap();
        let scene = Scene::single_layer(0, Frame::filled(48, 5, 1.0).unwrap()).unwrap();
        let acq = acquire_stack(&scene, &spec, &geom, &grid).unwrap();
        let report = source_coverage(&acq, &MaskSource::Geometry { base: &base }, &grid, &ReconstructOptions::default()).unwrap();
        for (j, s) in report.per_section.iter().enumerate() {
            let vacated = (j as f64 * 2.0) as usize;
            assert_eq!(s.zero_columns, (0..vacated).collect::<Vec<_>>(), "section {j}");
        }
    }
}

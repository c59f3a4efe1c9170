//! Slit-array patterns, tilted-projection geometry and virtual confocal
//! mask synthesis.
//!
//! A pattern shifted laterally by `x_i` and observed at depth `z_j` is the
//! reference mask translated by `x_i + z_j * tan(theta) / pixel_pitch` camera
//! pixels. All translations go through [`Frame::translate`] (bilinear,
//! zero fill).

use crate::error::{AspiError, Result};
use crate::frame::Frame;

/// Default slit segmentation threshold for [`threshold_mask`], as a fraction
/// of the strongest column.
pub const DEFAULT_SLIT_BACKGROUND: f64 = 0.1;

/// Slit-array geometry on the projector, in projector pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatternSpec {
    pub proj_width: usize,
    pub proj_height: usize,
    /// Gap between adjacent slits.
    pub period: usize,
    pub linewidth: usize,
    pub shift_step: usize,
    pub num_shifts: usize,
}

impl PatternSpec {
    pub fn new(
        proj_width: usize,
        proj_height: usize,
        period: usize,
        linewidth: usize,
        shift_step: usize,
        num_shifts: usize,
    ) -> Result<Self> {
        let spec = Self {
            proj_width,
            proj_height,
            period,
            linewidth,
            shift_step,
            num_shifts,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.proj_width == 0 || self.proj_height == 0 {
            return Err(AspiError::arg("projector dimensions must be >= 1"));
        }
        if self.linewidth == 0 || self.linewidth > self.period {
            return Err(AspiError::arg(format!(
                "linewidth {} must lie in 1..={}",
                self.linewidth, self.period
            )));
        }
        if self.shift_step == 0 || self.num_shifts == 0 {
            return Err(AspiError::arg("shift_step and num_shifts must be >= 1"));
        }
        if self.num_shifts * self.shift_step > self.period {
            return Err(AspiError::arg(format!(
                "num_shifts * shift_step = {} exceeds the period {}",
                self.num_shifts * self.shift_step,
                self.period
            )));
        }
        Ok(())
    }

    /// True when the shifted slits tile the whole period.
    pub fn is_full_coverage(&self) -> bool {
        self.num_shifts * self.shift_step == self.period && self.linewidth >= self.shift_step
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ShiftDirection {
    /// Increasing z moves the pattern toward +x.
    #[default]
    PositiveX,
    NegativeX,
}

impl ShiftDirection {
    pub fn sign(self) -> f64 {
        match self {
            ShiftDirection::PositiveX => 1.0,
            ShiftDirection::NegativeX => -1.0,
        }
    }
}

/// Tilted projection geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryConfig {
    /// Angle between projection and detection axes, radians.
    pub tilt_theta: f64,
    /// Axial distance between adjacent sections (length units).
    pub z_step: f64,
    /// Object-space length covered by one camera pixel.
    pub camera_pixel_pitch: f64,
    /// Camera pixels per projector pixel.
    pub magnification: f64,
    pub direction: ShiftDirection,
}

impl GeometryConfig {
    pub fn new(
        tilt_theta: f64,
        z_step: f64,
        camera_pixel_pitch: f64,
        magnification: f64,
    ) -> Result<Self> {
        let geom = Self {
            tilt_theta,
            z_step,
            camera_pixel_pitch,
            magnification,
            direction: ShiftDirection::PositiveX,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Geometry whose shear is exactly `shear_px` camera pixels per section.
    pub fn with_shear(tilt_theta: f64, z_step: f64, shear_px: f64, magnification: f64) -> Result<Self> {
        if !(shear_px > 0.0 && shear_px.is_finite()) {
            return Err(AspiError::arg("shear must be finite and > 0"));
        }
        Self::new(
            tilt_theta,
            z_step,
            z_step * tilt_theta.tan() / shear_px,
            magnification,
        )
    }

    pub fn with_direction(mut self, direction: ShiftDirection) -> Self {
        self.direction = direction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tilt_theta > 0.0 && self.tilt_theta < std::f64::consts::FRAC_PI_2) {
            return Err(AspiError::arg(format!(
                "tilt angle {} rad must lie in (0, pi/2)",
                self.tilt_theta
            )));
        }
        if !(self.z_step > 0.0 && self.z_step.is_finite()) {
            return Err(AspiError::arg("z_step must be finite and > 0"));
        }
        if !(self.camera_pixel_pitch > 0.0 && self.camera_pixel_pitch.is_finite()) {
            return Err(AspiError::arg("camera pixel pitch must be finite and > 0"));
        }
        if !(self.magnification > 0.0 && self.magnification.is_finite()) {
            return Err(AspiError::arg("magnification must be finite and > 0"));
        }
        let shear = self.shear_px_per_section();
        if !(shear > 0.0 && shear.is_finite()) {
            return Err(AspiError::arg(format!("derived shear {shear} is not usable")));
        }
        Ok(())
    }

    /// Lateral mask displacement per unit of z, in camera pixels.
    pub fn px_per_length(&self) -> f64 {
        self.tilt_theta.tan() / self.camera_pixel_pitch
    }

    /// Camera pixels of mask shift between adjacent sections (unsigned).
    pub fn shear_px_per_section(&self) -> f64 {
        self.z_step * self.px_per_length()
    }

    /// Lateral mask displacement, in camera pixels, of one projector shift step.
    pub fn lateral_step_px(&self, spec: &PatternSpec) -> f64 {
        spec.shift_step as f64 * self.magnification
    }

    /// Slit period expressed in camera pixels.
    pub fn period_px(&self, spec: &PatternSpec) -> f64 {
        spec.period as f64 * self.magnification
    }

    pub fn camera_dims(&self, spec: &PatternSpec) -> (usize, usize) {
        let w = (spec.proj_width as f64 * self.magnification).round().max(1.0) as usize;
        let h = (spec.proj_height as f64 * self.magnification).round().max(1.0) as usize;
        (w, h)
    }
}

/// Axial sampling grid: section `j` sits at `z0 + j * z_step`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZGrid {
    pub z0: f64,
    pub z_step: f64,
    pub count: usize,
}

impl ZGrid {
    pub fn new(z0: f64, z_step: f64, count: usize) -> Result<Self> {
        if !(z_step > 0.0 && z_step.is_finite()) || !z0.is_finite() {
            return Err(AspiError::arg("z grid needs finite z0 and z_step > 0"));
        }
        if count == 0 {
            return Err(AspiError::arg("z grid needs at least one section"));
        }
        Ok(Self { z0, z_step, count })
    }

    /// Grid sharing the geometry's section spacing.
    pub fn for_geometry(geom: &GeometryConfig, z0: f64, count: usize) -> Result<Self> {
        Self::new(z0, geom.z_step, count)
    }

    #[inline]
    pub fn z_at(&self, section: usize) -> f64 {
        self.z0 + section as f64 * self.z_step
    }

    pub fn z_max(&self) -> f64 {
        self.z_at(self.count - 1)
    }

    pub fn check_index(&self, section: usize) -> Result<()> {
        if section >= self.count {
            return Err(AspiError::arg(format!(
                "section {section} outside grid of {} sections",
                self.count
            )));
        }
        Ok(())
    }
}

/// Per-section mask displacement, precomputed once for a (geometry, grid) pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShearPlan {
    /// Signed shift of section 0 relative to the z = 0 reference mask.
    pub offset_px: f64,
    /// Signed shift between consecutive sections.
    pub shear_px: f64,
}

impl ShearPlan {
    pub fn new(geom: &GeometryConfig, grid: &ZGrid) -> Result<Self> {
        let rel = (geom.z_step - grid.z_step).abs() / geom.z_step;
        if rel > 1e-9 {
            return Err(AspiError::arg(format!(
                "grid z_step {} differs from geometry z_step {}",
                grid.z_step, geom.z_step
            )));
        }
        let sign = geom.direction.sign();
        Ok(Self {
            offset_px: sign * grid.z0 * geom.px_per_length(),
            shear_px: sign * geom.shear_px_per_section(),
        })
    }

    #[inline]
    pub fn shift(&self, section: usize) -> f64 {
        self.offset_px + section as f64 * self.shear_px
    }
}

/// Binary slit-array pattern at lateral shift `shift_index`: column `c` is lit
/// iff `(c - shift_index * shift_step) mod period < linewidth`.
pub fn make_slit_pattern(spec: &PatternSpec, shift_index: usize) -> Result<Frame> {
    spec.validate()?;
    if shift_index >= spec.num_shifts {
        return Err(AspiError::arg(format!(
            "shift index {shift_index} outside 0..{}",
            spec.num_shifts
        )));
    }
    let offset = (shift_index * spec.shift_step) as i64;
    let period = spec.period as i64;
    let row: Vec<f32> = (0..spec.proj_width as i64)
        .map(|c| {
            if (c - offset).rem_euclid(period) < spec.linewidth as i64 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut data = Vec::with_capacity(spec.proj_width * spec.proj_height);
    for _ in 0..spec.proj_height {
        data.extend_from_slice(&row);
    }
    Frame::new(spec.proj_width, spec.proj_height, data)
}

/// Depth span over which the mask shift stays within one slit period:
/// `period * magnification * pixel_pitch / tan(theta)`.
pub fn axial_range(spec: &PatternSpec, geom: &GeometryConfig) -> f64 {
    geom.period_px(spec) * geom.camera_pixel_pitch / geom.tilt_theta.tan()
}

/// The unshifted pattern as seen by the camera: shift index 0 resampled
/// once by the projector-to-camera magnification.
pub fn camera_base_mask(spec: &PatternSpec, geom: &GeometryConfig) -> Result<Frame> {
    let pattern = make_slit_pattern(spec, 0)?;
    let (w, h) = geom.camera_dims(spec);
    if (w, h) == pattern.dims() {
        return Ok(pattern);
    }
    pattern.resample(w, h)
}

/// Mask at lateral offset `x_shift` (camera pixels) and section `z_index`:
/// `base` translated along x by `x_shift + shift(z_index)`.
pub fn synthesize_mask(
    base: &Frame,
    x_shift: f64,
    z_index: usize,
    geom: &GeometryConfig,
    grid: &ZGrid,
) -> Result<Frame> {
    grid.check_index(z_index)?;
    let plan = ShearPlan::new(geom, grid)?;
    Ok(base.translate(x_shift + plan.shift(z_index), 0.0))
}

/// Reduces each slit to its single brightest column (see
/// [`threshold_mask_with`]) using [`DEFAULT_SLIT_BACKGROUND`].
pub fn threshold_mask(mask: &Frame) -> Result<Frame> {
    threshold_mask_with(mask, DEFAULT_SLIT_BACKGROUND)
}

/// Binary one-pixel-slit mask. Slits are maximal runs of columns whose mean
/// exceeds `background_fraction` of the brightest column mean; within each
/// run only the brightest column is kept (lowest index on ties).
pub fn threshold_mask_with(mask: &Frame, background_fraction: f64) -> Result<Frame> {
    if !(0.0..1.0).contains(&background_fraction) {
        return Err(AspiError::arg("background fraction must lie in [0, 1)"));
    }
    let means = mask.column_means();
    let peak = means.iter().copied().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(AspiError::EmptyMask);
    }
    let background = background_fraction * peak;
    let mut keep = vec![false; means.len()];
    let mut run: Option<(usize, f64)> = None;
    for (c, &m) in means.iter().enumerate() {
        if m > background {
            match run {
                Some((_, best)) if m <= best => {}
                _ => run = Some((c, m)),
            }
        } else if let Some((best_c, _)) = run.take() {
            keep[best_c] = true;
        }
    }
    if let Some((best_c, _)) = run {
        keep[best_c] = true;
    }
    let row: Vec<f32> = keep.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
    let mut data = Vec::with_capacity(mask.len());
    for _ in 0..mask.height() {
        data.extend_from_slice(&row);
    }
    Frame::new(mask.width(), mask.height(), data)
}

/// How masks are applied during reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MaskMode {
    #[default]
    Grayscale,
    /// One-pixel slits via [`threshold_mask`].
    Thresholded,
}

/// Relation between the reconstructed depth span and the unambiguous axial
/// range of the pattern.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxialSpan {
    pub axial_range: f64,
    pub period_px: f64,
    pub shear_px: f64,
    /// `count * shear` in camera pixels.
    pub grid_shift_px: f64,
    /// The grid spans more than one period of shear, so depths alias.
    pub exceeds_period: bool,
}

pub fn axial_span(spec: &PatternSpec, geom: &GeometryConfig, grid: &ZGrid) -> AxialSpan {
    let shear = geom.shear_px_per_section();
    let period_px = geom.period_px(spec);
    let grid_shift_px = grid.count as f64 * shear;
    AxialSpan {
        axial_range: axial_range(spec, geom),
        period_px,
        shear_px: shear,
        grid_shift_px,
        exceeds_period: grid_shift_px > period_px,
    }
}

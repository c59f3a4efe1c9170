//! Run configuration shared by the CLI and the sidecar metadata.

use crate::error::{AspiError, Result};
use crate::forward::NoiseSpec;
use crate::imaging::{GeometryConfig, MaskMode, PatternSpec, ShiftDirection, ZGrid};
use crate::reconstruct::ReconstructOptions;
use crate::stack::Metadata;

/// Environment variable consulted when no thread count is given.
pub const THREADS_ENV: &str = "ASPI_THREADS";

/// Every tunable of a simulate / reconstruct / analyse run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub proj_width: usize,
    pub proj_height: usize,
    pub period: usize,
    pub linewidth: usize,
    pub shift_step: usize,
    pub num_shifts: usize,
    pub theta_deg: f64,
    pub z0: f64,
    pub z_step: f64,
    pub sections: usize,
    pub pixel_pitch: f64,
    pub magnification: f64,
    pub direction: ShiftDirection,
    pub haze: f64,
    pub noise_sigma: f64,
    pub poisson_scale: f64,
    pub seed: u64,
    pub floor: Option<f64>,
    pub threshold: bool,
    pub refine: bool,
    pub threads: usize,
}

impl Default for RunConfig {
    /// 256x256 rig, 120 px period, 4 px slits stepped 1 px (120 shifts),
    /// 25 degree tilt, 100 sections of 50 um at one camera pixel of shear each.
    fn default() -> Self {
        let theta_deg = 25.0;
        let z_step = 0.05;
        Self {
            proj_width: 256,
            proj_height: 256,
            period: 120,
            linewidth: 4,
            shift_step: 1,
            num_shifts: 120,
            theta_deg,
            z0: 0.0,
            z_step,
            sections: 100,
            pixel_pitch: z_step * theta_deg.to_radians().tan(),
            magnification: 1.0,
            direction: ShiftDirection::PositiveX,
            haze: 0.0,
            noise_sigma: 0.0,
            poisson_scale: 0.0,
            seed: 1,
            floor: None,
            threshold: false,
            refine: false,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn pattern_spec(&self) -> Result<PatternSpec> {
        PatternSpec::new(
            self.proj_width,
            self.proj_height,
            self.period,
            self.linewidth,
            self.shift_step,
            self.num_shifts,
        )
    }

    pub fn geometry(&self) -> Result<GeometryConfig> {
        Ok(GeometryConfig::new(
            self.theta_deg.to_radians(),
            self.z_step,
            self.pixel_pitch,
            self.magnification,
        )?
        .with_direction(self.direction))
    }

    pub fn grid(&self) -> Result<ZGrid> {
        ZGrid::new(self.z0, self.z_step, self.sections)
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            gaussian_sigma: self.noise_sigma,
            poisson_scale: self.poisson_scale,
            seed: self.seed,
        }
    }

    /// Sets the pixel pitch so one section shifts the mask by `shear_px`.
    pub fn set_shear(&mut self, shear_px: f64) -> Result<()> {
        if !(shear_px > 0.0 && shear_px.is_finite()) {
            return Err(AspiError::arg("shear must be finite and > 0"));
        }
        self.pixel_pitch = self.z_step * self.theta_deg.to_radians().tan() / shear_px;
        Ok(())
    }

    pub fn reconstruct_options(&self) -> ReconstructOptions {
        ReconstructOptions {
            floor: self.floor,
            mode: if self.threshold {
                MaskMode::Thresholded
            } else {
                MaskMode::Grayscale
            },
            threads: self.threads,
            materialize: false,
        }
    }

    /// Explicit count, else `ASPI_THREADS`, else 0 (all cores).
    pub fn resolve_threads(explicit: Option<usize>) -> usize {
        explicit
            .or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok())
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.pattern_spec()?;
        self.geometry()?;
        self.grid()?;
        if !(0.0..1.0).contains(&self.haze) {
            return Err(AspiError::arg("haze must lie in [0, 1)"));
        }
        if self.noise_sigma < 0.0 || self.poisson_scale < 0.0 {
            return Err(AspiError::arg("noise parameters must be >= 0"));
        }
        if let Some(f) = self.floor {
            if !(f > 0.0) {
                return Err(AspiError::arg("floor must be > 0"));
            }
        }
        Ok(())
    }

    pub fn to_metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.set("proj_width", self.proj_width)
            .set("proj_height", self.proj_height)
            .set("period", self.period)
            .set("linewidth", self.linewidth)
            .set("shift_step", self.shift_step)
            .set("num_shifts", self.num_shifts)
            .set("theta_deg", self.theta_deg)
            .set("z0", self.z0)
            .set("z_step", self.z_step)
            .set("sections", self.sections)
            .set("pixel_pitch", self.pixel_pitch)
            .set("magnification", self.magnification)
            .set(
                "direction",
                match self.direction {
                    ShiftDirection::PositiveX => "+x",
                    ShiftDirection::NegativeX => "-x",
                },
            )
            .set("haze", self.haze)
            .set("noise_sigma", self.noise_sigma)
            .set("poisson_scale", self.poisson_scale)
            .set("seed", self.seed)
            .set("threshold", self.threshold)
            .set("refine", self.refine);
        if let Some(f) = self.floor {
            m.set("floor", f);
        }
        m
    }

    /// Rig keys are required; run knobs fall back to defaults.
    pub fn from_metadata(m: &Metadata) -> Result<Self> {
        let d = RunConfig::default();
        let direction = match m.get("direction").unwrap_or("+x") {
            "+x" => ShiftDirection::PositiveX,
            "-x" => ShiftDirection::NegativeX,
            other => return Err(AspiError::Metadata(format!("unknown direction `{other}`"))),
        };
        let floor = if m.contains("floor") {
            Some(m.parse("floor")?)
        } else {
            None
        };
        let cfg = Self {
            proj_width: m.parse("proj_width")?,
            proj_height: m.parse("proj_height")?,
            period: m.parse("period")?,
            linewidth: m.parse("linewidth")?,
            shift_step: m.parse("shift_step")?,
            num_shifts: m.parse("num_shifts")?,
            theta_deg: m.parse("theta_deg")?,
            z0: m.parse("z0")?,
            z_step: m.parse("z_step")?,
            sections: m.parse("sections")?,
            pixel_pitch: m.parse("pixel_pitch")?,
            magnification: m.parse_or("magnification", d.magnification)?,
            direction,
            haze: m.parse_or("haze", d.haze)?,
            noise_sigma: m.parse_or("noise_sigma", d.noise_sigma)?,
            poisson_scale: m.parse_or("poisson_scale", d.poisson_scale)?,
            seed: m.parse_or("seed", d.seed)?,
            floor,
            threshold: m.parse_or("threshold", d.threshold)?,
            refine: m.parse_or("refine", d.refine)?,
            threads: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

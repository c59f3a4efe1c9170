//! Reconstruction throughput measurement.

use std::hash::{DefaultHasher, Hasher};
use std::time::Instant;

use crate::error::{AspiError, Result};
use crate::forward::{acquire_stack, NoiseSpec, Scene};
use crate::frame::Frame;
use crate::imaging::{camera_base_mask, GeometryConfig, PatternSpec, ZGrid};
use crate::reconstruct::{reconstruct_sections, MaskSource, ReconstructOptions};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchConfig {
    pub width: usize,
    pub height: usize,
    pub num_shifts: usize,
    pub sections: usize,
    /// 0 uses every core.
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub threads_used: usize,
    pub elapsed_s: f64,
    /// Output section pixels produced per second, in millions.
    pub megapixels_per_second: f64,
    pub per_section_ms: f64,
    /// Hash of every section's bits in z order.
    pub checksum: u64,
}

impl BenchReport {
    pub fn summary(&self) -> String {
        format!(
            "width={} height={} n={} sections={} threads={} elapsed_s={:.3} megapixels_per_second={:.1} per_section_ms={:.2} checksum={:016x}",
            self.config.width,
            self.config.height,
            self.config.num_shifts,
            self.config.sections,
            self.threads_used,
            self.elapsed_s,
            self.megapixels_per_second,
            self.per_section_ms,
            self.checksum
        )
    }
}

/// Rig used for benchmarking: unit-step slits with one pixel of shear.
pub fn bench_rig(cfg: &BenchConfig) -> Result<(PatternSpec, GeometryConfig, ZGrid)> {
    if cfg.num_shifts == 0 || cfg.sections == 0 {
        return Err(AspiError::arg("bench needs n >= 1 and sections >= 1"));
    }
    let spec = PatternSpec::new(
        cfg.width,
        cfg.height,
        cfg.num_shifts,
        (cfg.num_shifts / 10).max(1),
        1,
        cfg.num_shifts,
    )?;
    let geom = GeometryConfig::with_shear(25f64.to_radians(), 0.05, 1.0, 1.0)?;
    let grid = ZGrid::for_geometry(&geom, 0.0, cfg.sections)?;
    Ok((spec, geom, grid))
}

/// Synthesizes an acquisition in memory, then times only the reconstruction.
pub fn bench_reconstruction(cfg: &BenchConfig) -> Result<BenchReport> {
    let (spec, geom, grid) = bench_rig(cfg)?;
    let base = camera_base_mask(&spec, &geom)?;
    let reflectance = Frame::from_fn(cfg.width, cfg.height, |x, y| {
        0.5 + 0.4 * (((x * 7 + y * 13) % 17) as f32 / 16.0)
    });
    let scene = Scene::single_layer(cfg.sections / 2, reflectance?)?.with_noise(NoiseSpec::off())?;
    let acq = acquire_stack(&scene, &spec, &geom, &grid)?;
    let options = ReconstructOptions {
        threads: cfg.threads,
        ..Default::default()
    };
    let mut threads_used = 0;
    let mut hasher = DefaultHasher::new();
    let start = Instant::now();
    reconstruct_sections(&acq, &MaskSource::Geometry { base: &base }, &grid, &options, |j, section| {
        if j == 0 {
            threads_used = rayon::current_num_threads();
        }
        for v in section.data() {
            hasher.write_u32(v.to_bits());
        }
        Ok(())
    })?;
    let elapsed_s = start.elapsed().as_secs_f64();
    let pixels = (cfg.width * cfg.height * cfg.sections) as f64;
    Ok(BenchReport {
        config: *cfg,
        threads_used,
        elapsed_s,
        megapixels_per_second: pixels / elapsed_s.max(1e-12) / 1e6,
        per_section_ms: elapsed_s * 1e3 / cfg.sections as f64,
        checksum: hasher.finish(),
    })
}

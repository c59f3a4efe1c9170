//! Signal of a hazy, noisy layer in its own section against a section far
//! from focus, next to the widefield texture contrast.

use aspi::imaging::camera_base_mask;
use aspi::{acquire_stack, reconstruct_volume, Frame, MaskSource, NoiseSpec, ReconstructOptions, RunConfig, Scene};

fn main() -> aspi::Result<()> {
    let cfg = RunConfig {
        proj_width: 160,
        proj_height: 32,
        period: 60,
        linewidth: 3,
        num_shifts: 60,
        sections: 40,
        ..RunConfig::default()
    };
    let (spec, geom, grid) = (cfg.pattern_spec()?, cfg.geometry()?, cfg.grid()?);
    let base = camera_base_mask(&spec, &geom)?;
    let texture = Frame::from_fn(160, 32, |x, y| if (x / 8 + y / 8) % 2 == 0 { 0.9 } else { 0.2 })?;
    for haze in [0.0, 0.3, 0.6] {
        let scene = Scene::single_layer(20, texture.clone())?
            .with_haze(haze)?
            .with_noise(NoiseSpec {
                gaussian_sigma: 0.005,
                poisson_scale: 5000.0,
                seed: 3,
            })?;
        let acq = acquire_stack(&scene, &spec, &geom, &grid)?;
        let widefield: Vec<f64> = (0..acq.frames[0].len())
            .map(|i| acq.frames.iter().map(|f| f.data()[i] as f64).sum())
            .collect();
        let volume = reconstruct_volume(&acq, &MaskSource::Geometry { base: &base }, &grid, &ReconstructOptions::default())?;
        println!(
            "haze {haze:.1}: widefield modulation {:.3}, in-focus mean {:.4}, mean 15 sections away {:.4}",
            modulation(&widefield[16 * 160 + 80..16 * 160 + 112]),
            mean(&row(&volume.sections[20])),
            mean(&row(&volume.sections[5])),
        );
    }
    Ok(())
}

fn row(section: &Frame) -> Vec<f64> {
    section.row(16)[80..112].iter().map(|&v| v as f64).collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard deviation over mean.
fn modulation(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt() / m
}

//! Reconstruct a three-layer scene and report which section each layer
//! lands in.

use aspi::forward::{Layer, Scene};
use aspi::imaging::camera_base_mask;
use aspi::{acquire_stack, reconstruct_volume, Frame, MaskSource, NoiseSpec, ReconstructOptions, RunConfig};

fn main() -> aspi::Result<()> {
    let cfg = RunConfig {
        proj_width: 192,
        proj_height: 32,
        period: 60,
        linewidth: 3,
        num_shifts: 60,
        sections: 48,
        ..RunConfig::default()
    };
    let (spec, geom, grid) = (cfg.pattern_spec()?, cfg.geometry()?, cfg.grid()?);
    let bands = [(0, 64, 8), (64, 128, 24), (128, 192, 40)];
    let layers = bands
        .iter()
        .map(|&(lo, hi, z)| {
            Ok(Layer {
                z_index: z,
                reflectance: Frame::from_fn(192, 32, |x, _| if (lo..hi).contains(&x) { 1.0 } else { 0.0 })?,
            })
        })
        .collect::<aspi::Result<Vec<_>>>()?;
    let scene = Scene::new(layers, 0.0, NoiseSpec::off())?;
    let acq = acquire_stack(&scene, &spec, &geom, &grid)?;
    let base = camera_base_mask(&spec, &geom)?;
    let volume = reconstruct_volume(&acq, &MaskSource::Geometry { base: &base }, &grid, &ReconstructOptions::default())?;
    for &(lo, hi, z) in &bands {
        let column = volume.column((lo + hi) / 2 + 20, 16);
        let best = (0..column.len()).max_by(|&a, &b| column[a].total_cmp(&column[b])).unwrap_or(0);
        println!("layer at section {z:>2}: brightest section {best:>2}");
    }
    Ok(())
}

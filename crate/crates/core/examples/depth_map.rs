//! Recover a height map from a tilted plane and compare with ground truth.

use aspi::imaging::camera_base_mask;
use aspi::{acquire_stack, extract_depth_map, make_tilted_plane_scene, reconstruct_volume, Frame, MaskSource, RunConfig};

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
    let scene = make_tilted_plane_scene(&grid, 39.0 / 160.0, &Frame::filled(160, 32, 0.7)?)?;
    let truth = scene.ground_truth_depth(&grid);
    let acq = acquire_stack(&scene, &spec, &geom, &grid)?;
    let base = camera_base_mask(&spec, &geom)?;
    let volume = reconstruct_volume(&acq, &MaskSource::Geometry { base: &base }, &grid, &cfg.reconstruct_options())?;
    for refine in [false, true] {
        let map = extract_depth_map(&volume, None, refine);
        let rms = map.rms_error(&truth, |x, _| x >= 40).unwrap_or(f64::NAN);
        println!("refine={refine}: {} valid pixels, rms {:.4} ({:.3} sections)", map.valid_count(), rms, rms / grid.z_step);
    }
    Ok(())
}

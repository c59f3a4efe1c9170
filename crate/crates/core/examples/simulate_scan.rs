//! Simulate a slit scan of a tilted plane and print frame statistics.

use aspi::{acquire_stack, make_tilted_plane_scene, Frame, RunConfig};

fn main() -> aspi::Result<()> {
    let cfg = RunConfig {
        proj_width: 160,
        proj_height: 48,
        period: 40,
        num_shifts: 40,
        sections: 40,
        ..RunConfig::default()
    };
    let (spec, geom, grid) = (cfg.pattern_spec()?, cfg.geometry()?, cfg.grid()?);
    let scene = make_tilted_plane_scene(&grid, 40.0 / 160.0, &Frame::filled(160, 48, 0.9)?)?;
    let acq = acquire_stack(&scene, &spec, &geom, &grid)?;
    println!("{} frames of {}x{}", acq.frames.len(), acq.dims().0, acq.dims().1);
    for (i, f) in acq.frames.iter().enumerate().step_by(10) {
        println!("frame {i:>3}: mean {:.4} max {:.4}", f.mean(), f.max());
    }
    Ok(())
}

//! Measure the axial point-spread function and its width for several slit
//! widths.

use aspi::analysis::rect_slit_fwhm_sections;
use aspi::imaging::{camera_base_mask, make_slit_pattern, GeometryConfig, PatternSpec, ZGrid};
use aspi::{axial_psf, fwhm};

fn main() -> aspi::Result<()> {
    let geom = GeometryConfig::with_shear(25f64.to_radians(), 0.05, 1.0, 1.0)?;
    let grid = ZGrid::for_geometry(&geom, 0.0, 60)?;
    for linewidth in [2, 4, 8] {
        let spec = PatternSpec::new(200, 8, 80, linewidth, 1, 80)?;
        let base = camera_base_mask(&spec, &geom)?;
        let pattern = make_slit_pattern(&spec, 0)?;
        let object = pattern.translate(-30.0 * geom.shear_px_per_section(), 0.0);
        let curve = axial_psf(&object, &base, &spec, &geom, &grid, (150, 4))?;
        println!(
            "linewidth {linewidth}: peak at z = {:.3}, fwhm {:.2} sections (expected {:.2})",
            curve.peak().0,
            fwhm(&curve)? / grid.z_step,
            rect_slit_fwhm_sections(linewidth as f64, 1.0),
        );
    }
    Ok(())
}

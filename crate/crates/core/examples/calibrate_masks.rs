//! Fit the shear model from three reference mask images and compare the
//! prediction against masks synthesized directly from the geometry.

use aspi::calibration::fit_mask_model;
use aspi::imaging::{camera_base_mask, synthesize_mask, GeometryConfig, PatternSpec, ZGrid};
use aspi::{predict_mask, Anchors};

fn main() -> aspi::Result<()> {
    let spec = PatternSpec::new(120, 24, 60, 3, 1, 60)?;
    let geom = GeometryConfig::with_shear(25f64.to_radians(), 0.05, 0.75, 1.0)?;
    let grid = ZGrid::for_geometry(&geom, 0.0, 40)?;
    let base = camera_base_mask(&spec, &geom)?;
    let lateral_ref = synthesize_mask(&base, 7.0 * geom.lateral_step_px(&spec), 0, &geom, &grid)?;
    let axial_ref = synthesize_mask(&base, 0.0, 20, &geom, &grid)?;
    let anchors = Anchors {
        lateral_steps: 8,
        axial_sections: 21,
    };
    let model = fit_mask_model(&base, &lateral_ref, &axial_ref, anchors)?;
    println!("lateral per step: {:?}", model.shift(1, 0));
    println!("axial per section: {:?}", model.shift(0, 1));
    println!("fit residuals: {:?}", model.residuals);
    let direct = synthesize_mask(&base, 10.0, 30, &geom, &grid)?;
    let predicted = predict_mask(&model, 10, 30);
    let err: f64 = direct.data().iter().zip(predicted.data()).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
    println!("relative rms at (10, 30): {:.4}", (err / direct.data().iter().map(|&a| (a as f64).powi(2)).sum::<f64>()).sqrt());
    Ok(())
}

//! Axially shifted pattern illumination: virtual volumetric confocal imaging
//! from a single lateral scan of a tilted slit array.
//!
//! A projector sweeps `n` shifted slit patterns across a sample. Because the
//! projection axis is tilted, the in-focus mask at depth `z` is the z = 0
//! mask translated sideways by `z * tan(theta)`. Multiplying each captured
//! frame by the mask for a chosen depth and normalizing by the summed masks
//! keeps only light from that depth, so one scan yields a whole stack of
//! confocal sections.
//!
//! Modules follow the pipeline:
//!
//! - [`imaging`]: slit patterns, geometry, z grids, camera masks.
//! - [`calibration`]: translation fitting of measured masks.
//! - [`forward`]: synthetic scenes and acquisitions.
//! - [`reconstruct`]: mask-multiply reconstruction and coverage maps.
//! - [`analysis`]: axial PSF, FWHM and depth maps.
//! - [`stack`], [`config`], [`bench`], [`cli`]: files, settings, throughput
//!   and the command line.

pub mod analysis;
pub mod bench;
pub mod calibration;
pub mod cli;
pub mod config;
pub mod error;
pub mod forward;
pub mod frame;
pub mod imaging;
pub mod reconstruct;
pub mod stack;

pub use analysis::{axial_psf, axial_response, extract_depth_map, fwhm, AxialCurve, DepthMap};
pub use calibration::{estimate_translation, fit_mask_model, predict_mask, AffineMap, Anchors, MaskModel};
pub use config::RunConfig;
pub use error::{AspiError, Result};
pub use forward::{acquire_stack, make_tilted_plane_scene, AcquisitionSet, Layer, NoiseSpec, Scene};
pub use frame::{Frame, SENTINEL};
pub use imaging::{
    axial_range, camera_base_mask, make_slit_pattern, synthesize_mask, threshold_mask, GeometryConfig, MaskMode,
    PatternSpec, ShiftDirection, ZGrid,
};
pub use reconstruct::{reconstruct_volume, MaskSource, ReconstructOptions, VolumeStack};
pub use stack::{read_stack, write_stack, Metadata, Stack};

//! Axial response, FWHM and depth maps.

use rayon::prelude::*;

use crate::error::{AspiError, Result};
use crate::frame::{Frame, SENTINEL};
use crate::imaging::{GeometryConfig, PatternSpec, ShearPlan, ZGrid};
use crate::reconstruct::{default_floor, VolumeStack};

/// Multiple of the background level used as the default depth confidence cut.
pub const DEFAULT_CONFIDENCE_FACTOR: f64 = 5.0;

/// Response versus depth.
#[derive(Clone, Debug, PartialEq)]
pub struct AxialCurve {
    samples: Vec<(f64, f64)>,
    normalized: bool,
}

impl AxialCurve {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(AspiError::arg("axial curve needs at least one sample"));
        }
        if samples.windows(2).any(|p| !(p[1].0 > p[0].0)) {
            return Err(AspiError::arg("axial curve z values must be strictly increasing"));
        }
        if samples.iter().any(|&(z, r)| !z.is_finite() || !r.is_finite() || r < 0.0) {
            return Err(AspiError::arg("axial curve responses must be finite and >= 0"));
        }
        Ok(Self {
            samples,
            normalized: false,
        })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn peak(&self) -> (f64, f64) {
        self.samples
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |best, s| if s.1 > best.1 { s } else { best })
    }

    /// Copy scaled so the peak is 1.
    pub fn normalized(&self) -> Result<AxialCurve> {
        let (_, peak) = self.peak();
        if peak <= 0.0 {
            return Err(AspiError::Degenerate("axial curve is identically zero".into()));
        }
        Ok(AxialCurve {
            samples: self.samples.iter().map(|&(z, r)| (z, r / peak)).collect(),
            normalized: true,
        })
    }

    /// Largest absolute response difference at matching samples.
    pub fn max_abs_diff(&self, other: &AxialCurve) -> Result<f64> {
        if self.samples.len() != other.samples.len() {
            return Err(AspiError::arg("curves have different sample counts"));
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a.1 - b.1).abs())
            .fold(0.0, f64::max))
    }

    /// Two-column `z response` text, one sample per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# z response\n");
        for (z, r) in &self.samples {
            out.push_str(&format!("{z:.9} {r:.9e}\n"));
        }
        out
    }
}

/// Axial PSF at `probe` by direct summation:
/// `PSF(z_j) = sum_i O(x - x_i, y) * M(x - x_i - shift_j, y)`, peak-normalized.
///
/// `base_pattern` is the first object frame, `base_mask` the z = 0 reference
/// mask. Both are sampled bilinearly with zero outside the frame.
pub fn axial_psf(
    base_pattern: &Frame,
    base_mask: &Frame,
    spec: &PatternSpec,
    geom: &GeometryConfig,
    grid: &ZGrid,
    probe: (usize, usize),
) -> Result<AxialCurve> {
    let floor = default_floor(base_mask, spec.num_shifts);
    axial_psf_with_floor(base_pattern, base_mask, spec, geom, grid, probe, floor)
}

pub fn axial_psf_with_floor(
    base_pattern: &Frame,
    base_mask: &Frame,
    spec: &PatternSpec,
    geom: &GeometryConfig,
    grid: &ZGrid,
    probe: (usize, usize),
    floor: f64,
) -> Result<AxialCurve> {
    base_pattern.same_dims(base_mask)?;
    let (px, py) = probe;
    if px >= base_mask.width() || py >= base_mask.height() {
        return Err(AspiError::arg(format!("probe ({px}, {py}) outside the frame")));
    }
    let plan = ShearPlan::new(geom, grid)?;
    let lateral = geom.lateral_step_px(spec);
    let (x, y) = (px as f64, py as f64);
    let mut samples = Vec::with_capacity(grid.count);
    for j in 0..grid.count {
        let shift = plan.shift(j);
        let mut psf = 0.0;
        let mut coverage = 0.0;
        for i in 0..spec.num_shifts {
            let xi = i as f64 * lateral;
            let m = base_mask.sample(x - xi - shift, y);
            psf += base_pattern.sample(x - xi, y) * m;
            coverage += m;
        }
        if coverage < floor {
            return Err(AspiError::Coverage {
                x: px,
                y: py,
                section: j,
                coverage,
                floor,
            });
        }
        samples.push((grid.z_at(j), psf));
    }
    AxialCurve::new(samples)?.normalized()
}

/// Reconstructed response of pixel `probe` across the volume, peak-normalized.
pub fn axial_response(volume: &VolumeStack, probe: (usize, usize)) -> Result<AxialCurve> {
    let (w, h) = volume.dims();
    if probe.0 >= w || probe.1 >= h {
        return Err(AspiError::arg("probe outside the volume"));
    }
    let mut samples = Vec::with_capacity(volume.sections.len());
    for (j, section) in volume.sections.iter().enumerate() {
        let v = section.get(probe.0, probe.1);
        if v == volume.sentinel {
            return Err(AspiError::Coverage {
                x: probe.0,
                y: probe.1,
                section: j,
                coverage: 0.0,
                floor: volume.coverage_floor_used,
            });
        }
        samples.push((volume.grid.z_at(j), v as f64));
    }
    AxialCurve::new(samples)?.normalized()
}

/// Full width at half maximum, in z units.
///
/// Each half crossing is linearly interpolated between the bracketing
/// samples. With a flat-topped or multi-peaked maximum the outermost
/// crossings are used.
pub fn fwhm(curve: &AxialCurve) -> Result<f64> {
    let s = curve.samples();
    let (_, peak) = curve.peak();
    if peak <= 0.0 {
        return Err(AspiError::Degenerate("curve has no positive maximum".into()));
    }
    let half = peak / 2.0;
    let first = s.iter().position(|p| p.1 == peak).expect("peak exists");
    let last = s.iter().rposition(|p| p.1 == peak).expect("peak exists");

    let left = (0..first)
        .rev()
        .find(|&k| s[k].1 <= half)
        .map(|k| crossing(s[k], s[k + 1], half))
        .ok_or_else(|| AspiError::Range("left half-maximum crossing outside the sampled range".into()))?;
    let right = (last + 1..s.len())
        .find(|&k| s[k].1 <= half)
        .map(|k| crossing(s[k - 1], s[k], half))
        .ok_or_else(|| AspiError::Range("right half-maximum crossing outside the sampled range".into()))?;
    Ok(right - left)
}

fn crossing(a: (f64, f64), b: (f64, f64), level: f64) -> f64 {
    if a.1 == b.1 {
        return a.0;
    }
    a.0 + (level - a.1) / (b.1 - a.1) * (b.0 - a.0)
}

/// FWHM, in sections, of the axial response of a rectangular slit of width
/// `linewidth_px` sheared by `shear_px` per section: the autocorrelation of a
/// rectangle is a triangle whose half-height width equals the slit width.
pub fn rect_slit_fwhm_sections(linewidth_px: f64, shear_px: f64) -> f64 {
    linewidth_px / shear_px
}

/// Per-pixel depth of peak reconstructed intensity.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    /// Depth in z units; NaN where no confident peak exists.
    pub depth: Vec<f64>,
    /// Peak intensity; [`SENTINEL`] where every section is a sentinel.
    pub confidence: Vec<f32>,
    pub min_confidence: f64,
}

impl DepthMap {
    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| !d.is_nan()).count()
    }

    /// RMS of `depth - truth` over pixels where both are defined and
    /// `include` holds.
    pub fn rms_error(&self, truth: &[f64], include: impl Fn(usize, usize) -> bool) -> Option<f64> {
        let mut ss = 0.0;
        let mut n = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                let p = y * self.width + x;
                if include(x, y) && !self.depth[p].is_nan() && !truth[p].is_nan() {
                    ss += (self.depth[p] - truth[p]).powi(2);
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (ss / n as f64).sqrt())
    }
}

/// Mean of the lowest decile of non-sentinel intensities in the volume.
pub fn background_level(volume: &VolumeStack) -> f64 {
    let mut values: Vec<f32> = volume
        .sections
        .iter()
        .flat_map(|s| s.data().iter().copied())
        .filter(|&v| v != volume.sentinel)
        .collect();
    if values.is_empty() {
        return 0.0;
    }
    let count = (values.len() / 10).max(1);
    values.select_nth_unstable_by(count - 1, |a, b| a.total_cmp(b));
    values[..count].iter().map(|&v| v as f64).sum::<f64>() / count as f64
}

/// Depth at the brightest section of every pixel.
///
/// Sentinel entries are skipped and ties go to the lower z. With `refine`, an
/// interior peak is moved by a three-point parabola through its neighbours
/// (at most half a section). Pixels whose peak is below `min_confidence`
/// (default five times [`background_level`]) get NaN.
pub fn extract_depth_map(volume: &VolumeStack, min_confidence: Option<f64>, refine: bool) -> DepthMap {
    let (w, h) = volume.dims();
    let min_confidence =
        min_confidence.unwrap_or_else(|| DEFAULT_CONFIDENCE_FACTOR * background_level(volume));
    let grid = volume.grid;
    let k = volume.sections.len();
    let sentinel = volume.sentinel;
    let results: Vec<(f64, f32)> = (0..w * h)
        .into_par_iter()
        .map(|p| {
            let value = |j: usize| volume.sections[j].data()[p];
            let mut best: Option<(usize, f32)> = None;
            for j in 0..k {
                let v = value(j);
                if v == sentinel {
                    continue;
                }
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            let Some((j, peak)) = best else {
                return (f64::NAN, SENTINEL);
            };
            if (peak as f64) < min_confidence {
                return (f64::NAN, peak);
            }
            let mut z = grid.z_at(j);
            if refine && j > 0 && j + 1 < k {
                let (a, c) = (value(j - 1), value(j + 1));
                if a != sentinel && c != sentinel {
                    let (a, b, c) = (a as f64, peak as f64, c as f64);
                    let curvature = a - 2.0 * b + c;
                    if curvature < 0.0 {
                        let offset = ((a - c) / (2.0 * curvature)).clamp(-0.5, 0.5);
                        z += offset * grid.z_step;
                    }
                }
            }
            (z, peak)
        })
        .collect();
    let (depth, confidence) = results.into_iter().unzip();
    DepthMap {
        width: w,
        height: h,
        depth,
        confidence,
        min_confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::MaskMode;

    fn curve(values: &[f64]) -> AxialCurve {
        AxialCurve::new(values.iter().enumerate().map(|(i, &r)| (i as f64, r)).collect()).unwrap()
    }

    fn volume(sections: Vec<Vec<f32>>, w: usize, h: usize) -> VolumeStack {
        let grid = ZGrid::new(2.0, 0.5, sections.len()).unwrap();
        VolumeStack {
            sections: sections.into_iter().map(|d| Frame::with_sentinel(w, h, d).unwrap()).collect(),
            grid,
            coverage_floor_used: 1e-3,
            sentinel: SENTINEL,
            mask_source: "test".into(),
            mask_mode: MaskMode::Grayscale,
        }
    }

    #[test]
    fn curve_invariants() {
        assert!(AxialCurve::new(vec![]).is_err());
        assert!(AxialCurve::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(AxialCurve::new(vec![(0.0, -1.0)]).is_err());
        let c = curve(&[0.0, 2.0, 4.0, 1.0]).normalized().unwrap();
        assert!(c.is_normalized());
        assert_eq!(c.peak(), (2.0, 1.0));
    }

    #[test]
    fn triangle_fwhm_is_half_width() {
        // triangle of half-width 4 sampled every unit
        let values: Vec<f64> = (0..21).map(|i| (4.0 - (i as f64 - 10.0).abs()).max(0.0)).collect();
        assert!((fwhm(&curve(&values)).unwrap() - 4.0).abs() < 1e-12);
        // half-width 3 puts the crossings between samples
        let values: Vec<f64> = (0..21).map(|i| (3.0 - (i as f64 - 10.0).abs()).max(0.0)).collect();
        assert!((fwhm(&curve(&values)).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fwhm_scale_and_translation_invariant() {
        let values: Vec<f64> = (0..30).map(|i| (-((i as f64 - 14.3) / 4.0).powi(2)).exp()).collect();
        let base = fwhm(&curve(&values)).unwrap();
        let scaled: Vec<f64> = values.iter().map(|v| v * 5.0).collect();
        assert!((fwhm(&curve(&scaled)).unwrap() - base).abs() < 1e-12);
        let shifted = AxialCurve::new(values.iter().enumerate().map(|(i, &r)| (i as f64 + 7.25, r)).collect()).unwrap();
        assert!((fwhm(&shifted).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn fwhm_plateau_uses_outer_crossings() {
        let c = curve(&[0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
        assert!((fwhm(&c).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fwhm_crossing_outside_range() {
        assert!(matches!(fwhm(&curve(&[1.0, 0.9, 0.2])), Err(AspiError::Range(_))));
        assert!(matches!(fwhm(&curve(&[0.1, 0.9, 1.0])), Err(AspiError::Range(_))));
    }

    #[test]
    fn single_section_depth_is_z0() {
        let v = volume(vec![vec![0.5, 0.0, 2.0, SENTINEL]], 2, 2);
        let d = extract_depth_map(&v, Some(0.1), false);
        assert_eq!(d.depth[0], 2.0);
        assert!(d.depth[1].is_nan());
        assert_eq!(d.depth[2], 2.0);
        assert!(d.depth[3].is_nan());
        assert_eq!(d.confidence[3], SENTINEL);
    }

    #[test]
    fn argmax_ties_and_sentinels() {
        let v = volume(
            vec![vec![1.0, SENTINEL], vec![3.0, 9.0], vec![3.0, 2.0], vec![0.0, 1.0]],
            2,
            1,
        );
        let d = extract_depth_map(&v, Some(0.0), false);
        assert_eq!(d.depth, vec![2.5, 2.5]);
        assert_eq!(d.confidence, vec![3.0, 9.0]);
    }

    #[test]
    fn refine_recovers_parabola_vertex() {
        // samples of -(j - 1.3)^2 + 10 at j = 0..4
        let col: Vec<f32> = (0..4).map(|j| (10.0 - (j as f64 - 1.3).powi(2)) as f32).collect();
        let v = volume(col.iter().map(|&c| vec![c]).collect(), 1, 1);
        let d = extract_depth_map(&v, Some(0.0), true);
        assert!((d.depth[0] - (2.0 + 1.3 * 0.5)).abs() < 1e-6, "{}", d.depth[0]);
    }

    #[test]
    fn argmax_invariant_under_scaling() {
        let sections: Vec<Vec<f32>> = (0..6)
            .map(|j| (0..12).map(|p| ((p * 7 + j * 5) % 11) as f32).collect())
            .collect();
        let scaled: Vec<Vec<f32>> = sections.iter().map(|s| s.iter().map(|v| v * 3.5).collect()).collect();
        let a = extract_depth_map(&volume(sections, 4, 3), Some(0.0), false);
        let b = extract_depth_map(&volume(scaled, 4, 3), Some(0.0), false);
        assert_eq!(a.depth, b.depth);
    }

    #[test]
    fn default_confidence_uses_background() {
        let mut sections = vec![vec![0.1f32; 10]; 10];
        sections[4][3] = 2.0;
        let v = volume(sections, 10, 1);
        assert!((background_level(&v) - 0.1).abs() < 1e-6);
        let d = extract_depth_map(&v, None, false);
        assert!((d.min_confidence - 0.5).abs() < 1e-6);
        assert_eq!(d.valid_count(), 1);
        assert_eq!(d.depth[3], v.grid.z_at(4));
    }
}

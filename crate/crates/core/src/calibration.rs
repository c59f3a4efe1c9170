//! Mask calibration from three reference captures.
//!
//! A flat reference plate is imaged at the first pattern shift and first
//! section (`x1 z1`), at a later pattern shift (`xN z1`) and at a later
//! section (`x1 zK`). Normalized cross-correlation between the base capture and
//! each of the other two gives one translation per anchor pair; dividing by
//! the anchor distance yields per-step lateral and axial maps from which any
//! `(x_i, z_j)` mask is predicted.
//!
//! Only translation is estimated. Two captures of a periodic slit pattern
//! constrain nothing else, and a displacement is only known modulo the slit
//! period, so every anchor displacement must stay under half a period.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{AspiError, Result};
use crate::frame::Frame;

/// Frames with more pixels than this use the FFT correlation path.
pub const SPATIAL_PIXEL_LIMIT: usize = 256 * 256;

/// Upper bound on pixel-lag products for the spatial path.
const SPATIAL_WORK_LIMIT: usize = 1 << 28;

/// Maximum vertical lag searched when fitting a [`MaskModel`].
const FIT_MAX_DY: usize = 8;

/// Minimum anchor displacement (pixels) accepted by [`fit_mask_model`].
const MIN_ANCHOR_SHIFT: f64 = 1e-3;

/// General 2D affine map `(x, y) -> (a x + b y + c, d x + e y + f)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl AffineMap {
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Result<Self> {
        let m = Self { a, b, c, d, e, f };
        let det = m.determinant();
        if !(det.is_finite() && det.abs() > 1e-12) || ![c, f].iter().all(|v| v.is_finite()) {
            return Err(AspiError::arg(format!("affine map is not invertible (det {det})")));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        Self::translation(0.0, 0.0)
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            c: dx,
            d: 0.0,
            e: 1.0,
            f: dy,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a * x + self.b * y + self.c,
            self.d * x + self.e * y + self.f,
        )
    }

    pub fn is_translation(&self) -> bool {
        self.a == 1.0 && self.b == 0.0 && self.d == 0.0 && self.e == 1.0
    }

    pub fn translation_part(&self) -> (f64, f64) {
        (self.c, self.f)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &AffineMap) -> AffineMap {
        AffineMap {
            a: self.a * other.a + self.b * other.d,
            b: self.a * other.b + self.b * other.e,
            c: self.a * other.c + self.b * other.f + self.c,
            d: self.d * other.a + self.e * other.d,
            e: self.d * other.b + self.e * other.e,
            f: self.d * other.c + self.e * other.f + self.f,
        }
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let det = self.determinant();
        if det.abs() <= 1e-12 {
            return Err(AspiError::Degenerate("singular affine map".into()));
        }
        let (a, b, d, e) = (self.e / det, -self.b / det, -self.d / det, self.a / det);
        Ok(AffineMap {
            a,
            b,
            c: -(a * self.c + b * self.f),
            d,
            e,
            f: -(d * self.c + e * self.f),
        })
    }

    /// `k`-fold composition. Pure translations are scaled directly.
    pub fn powi(&self, k: usize) -> AffineMap {
        if self.is_translation() {
            return AffineMap::translation(k as f64 * self.c, k as f64 * self.f);
        }
        (0..k).fold(AffineMap::identity(), |acc, _| self.compose(&acc))
    }
}

/// Anchor distances of the two non-base references: the lateral reference
/// is the `lateral_steps`-th pattern shift (1-based), the axial one the
/// `axial_sections`-th section.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Anchors {
    pub lateral_steps: usize,
    pub axial_sections: usize,
}

/// Relative RMS mismatch between each reference and its reproduction from
/// the fitted model.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FitResiduals {
    pub lateral: f64,
    pub axial: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskModel {
    pub base_mask: Frame,
    /// Translation per pattern shift step.
    pub lateral_map: AffineMap,
    /// Translation per section.
    pub axial_map: AffineMap,
    pub anchors: Anchors,
    pub residuals: FitResiduals,
}

impl MaskModel {
    /// Accumulated translation for pattern shift `x_index` at section `z_index`.
    pub fn shift(&self, x_index: usize, z_index: usize) -> (f64, f64) {
        self.lateral_map
            .powi(x_index)
            .compose(&self.axial_map.powi(z_index))
            .translation_part()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CorrelationEngine {
    /// Spatial for small frames, FFT otherwise.
    #[default]
    Auto,
    Spatial,
    Fourier,
}

/// Circular lag window `[-max_dx, max_dx] x [-max_dy, max_dy]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TranslationSearch {
    pub max_dx: usize,
    pub max_dy: usize,
    pub engine: CorrelationEngine,
}

impl TranslationSearch {
    /// Every distinct circular lag of a `width x height` frame.
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            max_dx: (width - 1) / 2,
            max_dy: (height - 1) / 2,
            engine: CorrelationEngine::Auto,
        }
    }

    fn clamped(&self, width: usize, height: usize) -> Self {
        Self {
            max_dx: self.max_dx.min((width - 1) / 2),
            max_dy: self.max_dy.min((height - 1) / 2),
            engine: self.engine,
        }
    }

    fn lag_count(&self) -> usize {
        (2 * self.max_dx + 1) * (2 * self.max_dy + 1)
    }
}

/// Normalized cross-correlation over a lag window. `value(u, v)` is the NCC
/// of `b` against `a` translated by `(u, v)`.
#[derive(Clone, Debug)]
pub struct CorrelationSurface {
    max_dx: usize,
    max_dy: usize,
    values: Vec<f64>,
}

impl CorrelationSurface {
    pub fn value(&self, u: isize, v: isize) -> f64 {
        let w = 2 * self.max_dx + 1;
        let col = (u + self.max_dx as isize) as usize;
        let row = (v + self.max_dy as isize) as usize;
        self.values[row * w + col]
    }

    pub fn max_dx(&self) -> usize {
        self.max_dx
    }

    pub fn max_dy(&self) -> usize {
        self.max_dy
    }

    fn lags(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        let (mx, my) = (self.max_dx as isize, self.max_dy as isize);
        (-my..=my).flat_map(move |v| (-mx..=mx).map(move |u| (u, v)))
    }

    /// Integer peak; near-ties go to the lag closest to the origin.
    fn peak(&self) -> (isize, isize, f64) {
        let best = self
            .lags()
            .map(|(u, v)| self.value(u, v))
            .fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * best.abs().max(1e-300);
        let (u, v) = self
            .lags()
            .filter(|&(u, v)| self.value(u, v) >= best - tol)
            .min_by_key(|&(u, v)| u * u + v * v)
            .expect("non-empty lag window");
        (u, v, self.value(u, v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TranslationEstimate {
    pub dx: f64,
    pub dy: f64,
    pub peak_ncc: f64,
}

fn zero_mean(frame: &Frame) -> Result<(Vec<f64>, f64)> {
    let mean = frame.mean();
    let centered: Vec<f64> = frame.data().iter().map(|&v| v as f64 - mean).collect();
    let energy: f64 = centered.iter().map(|v| v * v).sum();
    if energy <= 1e-12 * (1.0 + mean * mean) * frame.len() as f64 {
        return Err(AspiError::Degenerate("frame is constant".into()));
    }
    Ok((centered, energy))
}

/// Computes the normalized circular cross-correlation surface.
pub fn correlation_surface(
    frame_a: &Frame,
    frame_b: &Frame,
    search: &TranslationSearch,
) -> Result<CorrelationSurface> {
    frame_a.same_dims(frame_b)?;
    let (w, h) = frame_a.dims();
    let search = search.clamped(w, h);
    let (a, ea) = zero_mean(frame_a)?;
    let (b, eb) = zero_mean(frame_b)?;
    let norm = (ea * eb).sqrt();
    let use_fft = match search.engine {
        CorrelationEngine::Spatial => false,
        CorrelationEngine::Fourier => true,
        CorrelationEngine::Auto => {
            w * h > SPATIAL_PIXEL_LIMIT || w * h * search.lag_count() > SPATIAL_WORK_LIMIT
        }
    };
    let mut values = if use_fft {
        fourier_correlation(&a, &b, w, h, &search)
    } else {
        spatial_correlation(&a, &b, w, h, &search)
    };
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(CorrelationSurface {
        max_dx: search.max_dx,
        max_dy: search.max_dy,
        values,
    })
}

fn spatial_correlation(a: &[f64], b: &[f64], w: usize, h: usize, s: &TranslationSearch) -> Vec<f64> {
    let (mx, my) = (s.max_dx as isize, s.max_dy as isize);
    let mut out = Vec::with_capacity(s.lag_count());
    for v in -my..=my {
        for u in -mx..=mx {
            let shift = u.rem_euclid(w as isize) as usize;
            let mut acc = 0.0;
            for y in 0..h {
                let ya = (y as isize - v).rem_euclid(h as isize) as usize;
                let brow = &b[y * w..(y + 1) * w];
                let arow = &a[ya * w..(ya + 1) * w];
                // a index (x - u) mod w, split into two contiguous runs
                let (b_head, b_tail) = brow.split_at(shift);
                acc += b_tail.iter().zip(arow).map(|(p, q)| p * q).sum::<f64>();
                acc += b_head
                    .iter()
                    .zip(&arow[w - shift..])
                    .map(|(p, q)| p * q)
                    .sum::<f64>();
            }
            out.push(acc);
        }
    }
    out
}

fn fft_2d(data: &mut [Complex<f64>], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
}

fn fourier_correlation(a: &[f64], b: &[f64], w: usize, h: usize, s: &TranslationSearch) -> Vec<f64> {
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_2d(&mut fa, w, h, false);
    fft_2d(&mut fb, w, h, false);
    let mut prod: Vec<Complex<f64>> = fa.iter().zip(&fb).map(|(p, q)| p.conj() * q).collect();
    fft_2d(&mut prod, w, h, true);
    let scale = 1.0 / (w * h) as f64;
    let (mx, my) = (s.max_dx as isize, s.max_dy as isize);
    let mut out = Vec::with_capacity(s.lag_count());
    for v in -my..=my {
        let row = v.rem_euclid(h as isize) as usize;
        for u in -mx..=mx {
            let col = u.rem_euclid(w as isize) as usize;
            out.push(prod[row * w + col].re * scale);
        }
    }
    out
}

fn parabolic_offset(prev: f64, centre: f64, next: f64) -> f64 {
    let curvature = prev - 2.0 * centre + next;
    if curvature >= -1e-9 * centre.abs().max(1e-12) {
        return 0.0;
    }
    ((prev - next) / (2.0 * curvature)).clamp(-0.5, 0.5)
}

/// Displacement `(dx, dy)` such that `frame_b ≈ frame_a` translated by it,
/// searched over every circular lag.
pub fn estimate_translation(frame_a: &Frame, frame_b: &Frame) -> Result<(f64, f64)> {
    let search = TranslationSearch::full(frame_a.width(), frame_a.height());
    let est = estimate_translation_with(frame_a, frame_b, &search)?;
    Ok((est.dx, est.dy))
}

/// NCC peak over `search`, refined by a three-point parabola along each axis.
/// Refinement is skipped at the window edge.
pub fn estimate_translation_with(
    frame_a: &Frame,
    frame_b: &Frame,
    search: &TranslationSearch,
) -> Result<TranslationEstimate> {
    let surface = correlation_surface(frame_a, frame_b, search)?;
    let (u, v, peak) = surface.peak();
    let (mx, my) = (surface.max_dx as isize, surface.max_dy as isize);
    let dx = if u.abs() < mx {
        parabolic_offset(surface.value(u - 1, v), peak, surface.value(u + 1, v))
    } else {
        0.0
    };
    let dy = if v.abs() < my {
        parabolic_offset(surface.value(u, v - 1), peak, surface.value(u, v + 1))
    } else {
        0.0
    };
    Ok(TranslationEstimate {
        dx: u as f64 + dx,
        dy: v as f64 + dy,
        peak_ncc: peak,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Rescale each reference to [0, 1] (min subtracted) before fitting.
    pub normalize: bool,
    pub engine: CorrelationEngine,
    /// Polish each anchor displacement with [`refine_translation`].
    pub refine: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            normalize: false,
            engine: CorrelationEngine::Auto,
            refine: true,
        }
    }
}

/// NCC between `target` and `base` translated by `(dx, dy)`, over the pixels
/// at least `margin` away from every edge.
fn window_ncc(base: &Frame, target: &Frame, dx: f64, dy: f64, margin: (usize, usize)) -> f64 {
    let moved = base.translate(dx, dy);
    let (w, h) = base.dims();
    let (mut sa, mut sb, mut saa, mut sbb, mut sab, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for y in margin.1..h - margin.1 {
        for (&a, &b) in moved.row(y)[margin.0..w - margin.0]
            .iter()
            .zip(&target.row(y)[margin.0..w - margin.0])
        {
            let (a, b) = (a as f64, b as f64);
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
            n += 1.0;
        }
    }
    let cov = sab - sa * sb / n;
    let var = (saa - sa * sa / n) * (sbb - sb * sb / n);
    if var <= 0.0 {
        0.0
    } else {
        cov / var.sqrt()
    }
}

fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-9 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Polishes a displacement estimate by maximizing the NCC between `target`
/// and `base` translated with the bilinear interpolator, one axis at a time
/// within 0.6 px of `start`. Zero-filled borders are excluded. An axis along
/// which the frames carry no structure keeps its starting value.
pub fn refine_translation(base: &Frame, target: &Frame, start: (f64, f64)) -> Result<(f64, f64)> {
    base.same_dims(target)?;
    let (w, h) = base.dims();
    let margin = (
        start.0.abs().ceil() as usize + 2,
        start.1.abs().ceil() as usize + 2,
    );
    if w <= 2 * margin.0 + 2 {
        return Ok(start);
    }
    let margin = (margin.0, if h > 2 * margin.1 + 2 { margin.1 } else { 0 });
    let (mut dx, mut dy) = start;
    dx = golden_max(|x| window_ncc(base, target, x, dy, margin), dx - 0.6, dx + 0.6);
    if margin.1 > 0 {
        let centre = window_ncc(base, target, dx, dy, margin);
        let flat = [-0.5, 0.5]
            .iter()
            .all(|o| (window_ncc(base, target, dx, dy + o, margin) - centre).abs() < 1e-12);
        if !flat {
            dy = golden_max(|y| window_ncc(base, target, dx, y, margin), dy - 0.6, dy + 0.6);
        }
    }
    Ok((dx, dy))
}

fn normalized(frame: &Frame) -> Result<Frame> {
    let (lo, hi) = (frame.min(), frame.max());
    if hi <= lo {
        return Err(AspiError::Degenerate("reference frame is constant".into()));
    }
    Ok(frame.map(|v| (v - lo) / (hi - lo)))
}

fn relative_rms(a: &Frame, b: &Frame) -> f64 {
    let range = (b.max() - b.min()).max(f32::MIN_POSITIVE) as f64;
    let ss: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&p, &q)| (p as f64 - q as f64).powi(2))
        .sum();
    (ss / a.len() as f64).sqrt() / range
}

pub fn fit_mask_model(
    ref_x1z1: &Frame,
    ref_xnz1: &Frame,
    ref_x1zk: &Frame,
    anchors: Anchors,
) -> Result<MaskModel> {
    fit_mask_model_with(ref_x1z1, ref_xnz1, ref_x1zk, anchors, &FitOptions::default())
}

/// Fits per-step lateral and axial translations from three references.
///
/// Both anchor displacements must be under half a slit period; larger
/// spans alias to a shorter displacement and have to be chained.
pub fn fit_mask_model_with(
    ref_x1z1: &Frame,
    ref_xnz1: &Frame,
    ref_x1zk: &Frame,
    anchors: Anchors,
    options: &FitOptions,
) -> Result<MaskModel> {
    if anchors.lateral_steps < 2 || anchors.axial_sections < 2 {
        return Err(AspiError::arg(format!(
            "anchors must be >= 2, got N = {} and K = {}",
            anchors.lateral_steps, anchors.axial_sections
        )));
    }
    ref_x1z1.same_dims(ref_xnz1)?;
    ref_x1z1.same_dims(ref_x1zk)?;
    let (base, lateral_ref, axial_ref) = if options.normalize {
        (normalized(ref_x1z1)?, normalized(ref_xnz1)?, normalized(ref_x1zk)?)
    } else {
        (ref_x1z1.clone(), ref_xnz1.clone(), ref_x1zk.clone())
    };
    let (w, h) = base.dims();
    let search = TranslationSearch {
        max_dx: (w - 1) / 2,
        max_dy: ((h - 1) / 2).min(FIT_MAX_DY),
        engine: options.engine,
    };
    let fit_pair = |target: &Frame, steps: usize, label: &str| -> Result<(f64, f64)> {
        let mut est = estimate_translation_with(&base, target, &search)?;
        if options.refine && est.dx.hypot(est.dy) >= MIN_ANCHOR_SHIFT {
            (est.dx, est.dy) = refine_translation(&base, target, (est.dx, est.dy))?;
        }
        if est.dx.hypot(est.dy) < MIN_ANCHOR_SHIFT {
            return Err(AspiError::Degenerate(format!(
                "{label} reference shows no displacement from the base"
            )));
        }
        let n = (steps - 1) as f64;
        Ok((est.dx / n, est.dy / n))
    };
    let (ldx, ldy) = fit_pair(&lateral_ref, anchors.lateral_steps, "lateral")?;
    let (adx, ady) = fit_pair(&axial_ref, anchors.axial_sections, "axial")?;
    let lateral_map = AffineMap::translation(ldx, ldy);
    let axial_map = AffineMap::translation(adx, ady);

    let lateral_steps = anchors.lateral_steps - 1;
    let axial_steps = anchors.axial_sections - 1;
    let residuals = FitResiduals {
        lateral: relative_rms(
            &base.translate(lateral_steps as f64 * ldx, lateral_steps as f64 * ldy),
            &lateral_ref,
        ),
        axial: relative_rms(
            &base.translate(axial_steps as f64 * adx, axial_steps as f64 * ady),
            &axial_ref,
        ),
    };
    Ok(MaskModel {
        base_mask: base,
        lateral_map,
        axial_map,
        anchors,
        residuals,
    })
}

/// Mask for pattern shift `x_index` at section `z_index`, warped from the
/// base mask in a single bilinear translation.
pub fn predict_mask(model: &MaskModel, x_index: usize, z_index: usize) -> Frame {
    if x_index == 0 && z_index == 0 {
        return model.base_mask.clone();
    }
    let (dx, dy) = model.shift(x_index, z_index);
    model.base_mask.translate(dx, dy)
}

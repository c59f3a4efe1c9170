//! Row-major intensity images and the sub-pixel translation kernel shared by
//! mask synthesis, calibration and reconstruction.

use crate::error::{AspiError, Result};

/// Value written into reconstructed sections where the normalization
/// denominator falls below the coverage floor.
pub const SENTINEL: f32 = -1.0;

/// A 2D real-valued intensity image.
///
/// Frames built with [`Frame::new`] hold finite, non-negative values. Frames
/// produced by reconstruction may also carry [`SENTINEL`].
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some((i, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(AspiError::arg(format!(
                "pixel {i} has invalid intensity {v} (must be finite and >= 0)"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Like [`Frame::new`] but also accepts the low-coverage sentinel.
    pub fn with_sentinel(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some((i, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (**v >= 0.0 || **v == SENTINEL)))
        {
            return Err(AspiError::arg(format!(
                "pixel {i} has invalid intensity {v}"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(width * height, data.len());
        Self {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "frame must be at least 1x1");
        Self::from_raw(width, height, vec![0.0; width * height])
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Pixel value with zero outside the frame.
    #[inline]
    pub fn get_or_zero(&self, x: isize, y: isize) -> f64 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0.0
        } else {
            self.data[y as usize * self.width + x as usize] as f64
        }
    }

    /// Bilinear sample at a real position, zero outside the frame.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let kx = x.floor();
        let ky = y.floor();
        let tx = x - kx;
        let ty = y - ky;
        let (kx, ky) = (kx as isize, ky as isize);
        let top = lerp_pair(self.get_or_zero(kx, ky), self.get_or_zero(kx + 1, ky), tx);
        if ty == 0.0 {
            return top;
        }
        let bottom = lerp_pair(
            self.get_or_zero(kx, ky + 1),
            self.get_or_zero(kx + 1, ky + 1),
            tx,
        );
        (1.0 - ty) * top + ty * bottom
    }

    pub fn same_dims(&self, other: &Frame) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(AspiError::dims(self.dims(), other.dims()));
        }
        Ok(())
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn min(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Multiplies every pixel by a non-negative factor.
    pub fn scaled(&self, factor: f32) -> Frame {
        assert!(factor >= 0.0 && factor.is_finite());
        Frame::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    pub(crate) fn map(&self, f: impl Fn(f32) -> f32) -> Frame {
        Frame::from_raw(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Per-column mean intensity.
    pub fn column_means(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.width];
        for y in 0..self.height {
            for (a, &v) in acc.iter_mut().zip(self.row(y)) {
                *a += v as f64;
            }
        }
        let h = self.height as f64;
        acc.iter_mut().for_each(|a| *a /= h);
        acc
    }

    /// Translates content by `(dx, dy)` pixels: `out(x, y) = self(x - dx, y - dy)`.
    ///
    /// Sub-pixel shifts use bilinear interpolation; pixels shifted in from
    /// outside the frame are zero.
    pub fn translate(&self, dx: f64, dy: f64) -> Frame {
        let kernel = ShiftKernel::new(dx, dy);
        let mut out = vec![0.0f32; self.data.len()];
        for (y, row) in out.chunks_exact_mut(self.width).enumerate() {
            kernel.fill_row(self, y, row);
        }
        Frame::from_raw(self.width, self.height, out)
    }

    /// Bilinear resample to a new size, clamping at the borders.
    ///
    /// A pixel centre `u` in the output maps to `(u + 0.5) / scale - 0.5` in the
    /// input, so a scale of exactly 1 is the identity.
    pub fn resample(&self, width: usize, height: usize) -> Result<Frame> {
        check_dims(width, height, width * height)?;
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        let clamp = |v: f64, max: usize| v.max(0.0).min((max - 1) as f64);
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            let py = clamp((v as f64 + 0.5) / sy - 0.5, self.height);
            let y0 = py.floor() as usize;
            let ty = py - y0 as f64;
            let y1 = (y0 + 1).min(self.height - 1);
            for u in 0..width {
                let px = clamp((u as f64 + 0.5) / sx - 0.5, self.width);
                let x0 = px.floor() as usize;
                let tx = px - x0 as f64;
                let x1 = (x0 + 1).min(self.width - 1);
                let top = lerp_pair(self.get(x0, y0) as f64, self.get(x1, y0) as f64, tx);
                let value = if ty == 0.0 {
                    top
                } else {
                    let bottom =
                        lerp_pair(self.get(x0, y1) as f64, self.get(x1, y1) as f64, tx);
                    (1.0 - ty) * top + ty * bottom
                };
                data.push(value as f32);
            }
        }
        Ok(Frame::from_raw(width, height, data))
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(AspiError::arg(format!(
            "frame dimensions must be >= 1, got {width}x{height}"
        )));
    }
    match width.checked_mul(height) {
        Some(n) if n == len => Ok(()),
        _ => Err(AspiError::arg(format!(
            "pixel count {len} does not match {width}x{height}"
        ))),
    }
}

#[inline]
fn lerp_pair(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        (1.0 - t) * a + t * b
    }
}

/// Precomputed integer offsets and bilinear weights for a constant
/// translation. Every shifted mask in the crate goes through this kernel, so
/// materialized and on-the-fly masks are bit-identical.
#[derive(Clone, Copy, Debug)]
pub struct ShiftKernel {
    kx: isize,
    tx: f64,
    ky: isize,
    ty: f64,
}

impl ShiftKernel {
    pub fn new(dx: f64, dy: f64) -> Self {
        let (ox, oy) = (-dx, -dy);
        let (fx, fy) = (ox.floor(), oy.floor());
        Self {
            kx: fx as isize,
            tx: ox - fx,
            ky: fy as isize,
            ty: oy - fy,
        }
    }

    #[inline]
    fn blend_row(&self, row: Option<&[f32]>, x: usize) -> f64 {
        let Some(row) = row else { return 0.0 };
        let w = row.len() as isize;
        let sx = x as isize + self.kx;
        let at = |i: isize| if i >= 0 && i < w { row[i as usize] as f64 } else { 0.0 };
        lerp_pair(at(sx), at(sx + 1), self.tx)
    }

    /// Writes output row `y` of `src` translated by this kernel.
    pub fn fill_row(&self, src: &Frame, y: usize, out: &mut [f32]) {
        debug_assert_eq!(out.len(), src.width);
        let src_row = |r: isize| {
            if r >= 0 && (r as usize) < src.height {
                Some(src.row(r as usize))
            } else {
                None
            }
        };
        let ra = y as isize + self.ky;
        let top = src_row(ra);
        if self.ty == 0.0 {
            if self.tx == 0.0 {
                // integer shift: plain copy with zero fill
                let Some(row) = top else {
                    out.fill(0.0);
                    return;
                };
                let w = row.len() as isize;
                for (x, o) in out.iter_mut().enumerate() {
                    let sx = x as isize + self.kx;
                    *o = if sx >= 0 && sx < w { row[sx as usize] } else { 0.0 };
                }
            } else {
                for (x, o) in out.iter_mut().enumerate() {
                    *o = self.blend_row(top, x) as f32;
                }
            }
        } else {
            let bottom = src_row(ra + 1);
            for (x, o) in out.iter_mut().enumerate() {
                let a = self.blend_row(top, x);
                let b = self.blend_row(bottom, x);
                *o = ((1.0 - self.ty) * a + self.ty * b) as f32;
            }
        }
    }
}

//! Synthetic acquisition: layered scenes lit by the tilted slit projector
//! and imaged by the camera.
//!
//! A frame for pattern shift `i` is
//!
//! ```text
//! O_i = (1 - h) * sum_L R_L * M(i, z_L) + h * B,   B = mean_i sum_L R_L * M(i, z_L)
//! ```
//!
//! followed by optional scaled-Poisson and Gaussian noise. Layers add without
//! occlusion; `B` is the pattern-free light a turbid medium would contribute.
//! Noise for frame `i` is drawn from ChaCha8 seeded with `seed + i`, pixels
//! in row-major order, Poisson before Gaussian, and the result clamped at 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::error::{AspiError, Result};
use crate::frame::{Frame, ShiftKernel};
use crate::imaging::{camera_base_mask, GeometryConfig, PatternSpec, ShearPlan, ZGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub gaussian_sigma: f64,
    /// Photons per unit intensity; 0 disables shot noise.
    pub poisson_scale: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::off()
    }
}

impl NoiseSpec {
    pub fn off() -> Self {
        Self {
            gaussian_sigma: 0.0,
            poisson_scale: 0.0,
            seed: 1,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            gaussian_sigma: sigma,
            poisson_scale: 0.0,
            seed,
        }
    }

    pub fn is_off(&self) -> bool {
        self.gaussian_sigma == 0.0 && self.poisson_scale == 0.0
    }

    fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return Err(AspiError::arg("gaussian sigma must be finite and >= 0"));
        }
        if !(self.poisson_scale >= 0.0 && self.poisson_scale.is_finite()) {
            return Err(AspiError::arg("poisson scale must be finite and >= 0"));
        }
        Ok(())
    }

    fn apply(&self, frame_index: usize, data: &mut [f32]) {
        if self.is_off() {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(frame_index as u64));
        let gauss = (self.gaussian_sigma > 0.0)
            .then(|| Normal::new(0.0, self.gaussian_sigma).expect("validated sigma"));
        for v in data.iter_mut() {
            let mut value = *v as f64;
            if self.poisson_scale > 0.0 {
                let mean = value * self.poisson_scale;
                value = if mean > 0.0 {
                    let counts: f64 = Poisson::new(mean).expect("positive mean").sample(&mut rng);
                    counts / self.poisson_scale
                } else {
                    0.0
                };
            }
            if let Some(g) = &gauss {
                value += g.sample(&mut rng);
            }
            *v = value.max(0.0) as f32;
        }
    }
}

/// A reflective sheet at grid section `z_index`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub z_index: usize,
    pub reflectance: Frame,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    layers: Vec<Layer>,
    pub haze_fraction: f64,
    pub noise: NoiseSpec,
}

impl Scene {
    /// Layers must be non-empty, share dimensions, have strictly increasing
    /// sections and reflectance in `[0, 1]`.
    pub fn new(layers: Vec<Layer>, haze_fraction: f64, noise: NoiseSpec) -> Result<Self> {
        if layers.is_empty() {
            return Err(AspiError::arg("scene has no layers"));
        }
        if !(0.0..1.0).contains(&haze_fraction) {
            return Err(AspiError::arg(format!(
                "haze fraction {haze_fraction} must lie in [0, 1)"
            )));
        }
        noise.validate()?;
        let dims = layers[0].reflectance.dims();
        for pair in layers.windows(2) {
            if pair[1].z_index <= pair[0].z_index {
                return Err(AspiError::arg("layer sections must be strictly increasing"));
            }
        }
        for layer in &layers {
            if layer.reflectance.dims() != dims {
                return Err(AspiError::dims(dims, layer.reflectance.dims()));
            }
            if layer.reflectance.max() > 1.0 || layer.reflectance.min() < 0.0 {
                return Err(AspiError::arg("reflectance must lie in [0, 1]"));
            }
        }
        Ok(Self {
            layers,
            haze_fraction,
            noise,
        })
    }

    pub fn single_layer(z_index: usize, reflectance: Frame) -> Result<Self> {
        Self::new(vec![Layer { z_index, reflectance }], 0.0, NoiseSpec::off())
    }

    pub fn with_haze(mut self, haze_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&haze_fraction) {
            return Err(AspiError::arg("haze fraction must lie in [0, 1)"));
        }
        self.haze_fraction = haze_fraction;
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Result<Self> {
        noise.validate()?;
        self.noise = noise;
        Ok(self)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn dims(&self) -> (usize, usize) {
        self.layers[0].reflectance.dims()
    }

    /// Section-wise depth of the shallowest reflecting layer at each pixel,
    /// NaN where nothing reflects.
    pub fn ground_truth_depth(&self, grid: &ZGrid) -> Vec<f64> {
        let (w, h) = self.dims();
        let mut depth = vec![f64::NAN; w * h];
        for layer in self.layers.iter().rev() {
            let z = grid.z_at(layer.z_index);
            for (d, &r) in depth.iter_mut().zip(layer.reflectance.data()) {
                if r > 0.0 {
                    *d = z;
                }
            }
        }
        depth
    }

    fn check_rig(&self, spec: &PatternSpec, geom: &GeometryConfig, grid: &ZGrid) -> Result<()> {
        spec.validate()?;
        geom.validate()?;
        let cam = geom.camera_dims(spec);
        if self.dims() != cam {
            return Err(AspiError::dims(cam, self.dims()));
        }
        if let Some(layer) = self.layers.iter().find(|l| l.z_index >= grid.count) {
            return Err(AspiError::arg(format!(
                "layer section {} outside grid of {} sections",
                layer.z_index, grid.count
            )));
        }
        Ok(())
    }
}

/// The `n` camera frames `O_0..O_{n-1}` of one lateral pattern scan.
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionSet {
    pub frames: Vec<Frame>,
    pub spec: PatternSpec,
    pub geom: GeometryConfig,
    pub grid: ZGrid,
}

impl AcquisitionSet {
    pub fn new(frames: Vec<Frame>, spec: PatternSpec, geom: GeometryConfig, grid: ZGrid) -> Result<Self> {
        if frames.len() != spec.num_shifts {
            return Err(AspiError::arg(format!(
                "{} frames for {} pattern shifts",
                frames.len(),
                spec.num_shifts
            )));
        }
        let dims = frames[0].dims();
        if let Some(f) = frames.iter().find(|f| f.dims() != dims) {
            return Err(AspiError::dims(dims, f.dims()));
        }
        Ok(Self {
            frames,
            spec,
            geom,
            grid,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}

/// Noise-free, haze-free illuminated scene for one pattern shift.
fn modulated(
    scene: &Scene,
    base: &Frame,
    shift_index: usize,
    spec: &PatternSpec,
    geom: &GeometryConfig,
    plan: &ShearPlan,
) -> Vec<f32> {
    let (w, h) = base.dims();
    let lateral = shift_index as f64 * geom.lateral_step_px(spec);
    let kernels: Vec<ShiftKernel> = scene
        .layers
        .iter()
        .map(|l| ShiftKernel::new(lateral + plan.shift(l.z_index), 0.0))
        .collect();
    let mut out = vec![0.0f32; w * h];
    let mut mask_row = vec![0.0f32; w];
    let mut acc = vec![0.0f64; w];
    for (y, out_row) in out.chunks_exact_mut(w).enumerate() {
        acc.fill(0.0);
        for (layer, kernel) in scene.layers.iter().zip(&kernels) {
            kernel.fill_row(base, y, &mut mask_row);
            for ((a, &m), &r) in acc.iter_mut().zip(&mask_row).zip(layer.reflectance.row(y)) {
                *a += r as f64 * m as f64;
            }
        }
        out_row.iter_mut().zip(&acc).for_each(|(o, &a)| *o = a as f32);
    }
    out
}

fn haze_field(mods: &[Vec<f32>]) -> Vec<f64> {
    let n = mods.len() as f64;
    let mut acc = vec![0.0f64; mods[0].len()];
    for m in mods {
        acc.iter_mut().zip(m).for_each(|(a, &v)| *a += v as f64);
    }
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

fn finish_frame(
    scene: &Scene,
    shift_index: usize,
    mut data: Vec<f32>,
    haze: Option<&[f64]>,
    dims: (usize, usize),
) -> Frame {
    if let Some(b) = haze {
        let h = scene.haze_fraction;
        data.iter_mut()
            .zip(b)
            .for_each(|(v, &bg)| *v = ((1.0 - h) * *v as f64 + h * bg) as f32);
    }
    scene.noise.apply(shift_index, &mut data);
    Frame::from_raw(dims.0, dims.1, data)
}

/// Camera frame `O_i` for pattern shift `shift_index`.
///
/// With haze enabled this renders every shift to form the background term;
/// use [`acquire_stack`] for whole scans.
pub fn render_frame(
    scene: &Scene,
    shift_index: usize,
    spec: &PatternSpec,
    geom: &GeometryConfig,
    grid: &ZGrid,
) -> Result<Frame> {
    scene.check_rig(spec, geom, grid)?;
    if shift_index >= spec.num_shifts {
        return Err(AspiError::arg(format!(
            "shift index {shift_index} outside 0..{}",
            spec.num_shifts
        )));
    }
    let base = camera_base_mask(spec, geom)?;
    let plan = ShearPlan::new(geom, grid)?;
    let dims = base.dims();
    if scene.haze_fraction > 0.0 {
        let mods: Vec<Vec<f32>> = (0..spec.num_shifts)
            .into_par_iter()
            .map(|i| modulated(scene, &base, i, spec, geom, &plan))
            .collect();
        let haze = haze_field(&mods);
        let data = mods.into_iter().nth(shift_index).expect("index checked");
        Ok(finish_frame(scene, shift_index, data, Some(&haze), dims))
    } else {
        let data = modulated(scene, &base, shift_index, spec, geom, &plan);
        Ok(finish_frame(scene, shift_index, data, None, dims))
    }
}

/// Renders all `num_shifts` frames. Deterministic for a given noise seed and
/// identical to calling [`render_frame`] per shift.
pub fn acquire_stack(
    scene: &Scene,
    spec: &PatternSpec,
    geom: &GeometryConfig,
    grid: &ZGrid,
) -> Result<AcquisitionSet> {
    scene.check_rig(spec, geom, grid)?;
    let base = camera_base_mask(spec, geom)?;
    let plan = ShearPlan::new(geom, grid)?;
    let dims = base.dims();
    let mods: Vec<Vec<f32>> = (0..spec.num_shifts)
        .into_par_iter()
        .map(|i| modulated(scene, &base, i, spec, geom, &plan))
        .collect();
    let haze = (scene.haze_fraction > 0.0).then(|| haze_field(&mods));
    let frames: Vec<Frame> = mods
        .into_par_iter()
        .enumerate()
        .map(|(i, data)| finish_frame(scene, i, data, haze.as_deref(), dims))
        .collect();
    AcquisitionSet::new(frames, *spec, *geom, *grid)
}

/// Plane tilted along x: column `c` lies at section `floor(c * slope)`.
/// Each occupied section becomes one layer holding the reflectance of its
/// column band.
pub fn make_tilted_plane_scene(grid: &ZGrid, slope: f64, reflectance: &Frame) -> Result<Scene> {
    if !(slope >= 0.0 && slope.is_finite()) {
        return Err(AspiError::arg(format!(
            "slope {slope} must be finite and >= 0 (sections are indexed from 0)"
        )));
    }
    let (w, h) = reflectance.dims();
    // tolerance keeps exact multiples like c * K / W on the intended section
    let section_of = |c: usize| (c as f64 * slope + 1e-9).floor() as usize;
    let last = section_of(w - 1);
    if last >= grid.count {
        return Err(AspiError::arg(format!(
            "slope {slope} puts column {} at section {last}, outside {} sections",
            w - 1,
            grid.count
        )));
    }
    let mut layers = Vec::new();
    let mut c = 0;
    while c < w {
        let j = section_of(c);
        let start = c;
        while c < w && section_of(c) == j {
            c += 1;
        }
        let band = start..c;
        let data: Vec<f32> = (0..h)
            .flat_map(|y| {
                let band = band.clone();
                (0..w).map(move |x| (x, y)).map(move |(x, y)| {
                    if band.contains(&x) {
                        reflectance.get(x, y)
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        layers.push(Layer {
            z_index: j,
            reflectance: Frame::new(w, h, data)?,
        });
    }
    Scene::new(layers, 0.0, NoiseSpec::off())
}

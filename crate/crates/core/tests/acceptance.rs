//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use aspi::analysis::{axial_psf, axial_response, extract_depth_map, fwhm, rect_slit_fwhm_sections};
use aspi::bench::{bench_reconstruction, BenchConfig};
use aspi::calibration::{fit_mask_model, Anchors};
use aspi::forward::{acquire_stack, make_tilted_plane_scene, Layer, NoiseSpec, Scene};
use aspi::frame::{Frame, SENTINEL};
use aspi::imaging::{axial_range, axial_span, camera_base_mask, synthesize_mask, GeometryConfig, PatternSpec, ZGrid};
use aspi::reconstruct::{reconstruct_volume, MaskSource, ReconstructOptions, VolumeStack};
use aspi::stack::{decode_stack, encode_stack, Metadata, Stack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Rig {
    spec: PatternSpec,
    geom: GeometryConfig,
    grid: ZGrid,
    base: Frame,
}

fn rig(size: usize, period: usize, linewidth: usize, step: usize, n: usize, shear: f64, sections: usize) -> Rig {
    let spec = PatternSpec::new(size, size, period, linewidth, step, n).unwrap();
    let geom = GeometryConfig::with_shear(25f64.to_radians(), 0.05, shear, 1.0).unwrap();
    let grid = ZGrid::for_geometry(&geom, 0.0, sections).unwrap();
    let base = camera_base_mask(&spec, &geom).unwrap();
    Rig { spec, geom, grid, base }
}

fn volume_of(r: &Rig, scene: &Scene, grid: &ZGrid) -> VolumeStack {
    let acq = acquire_stack(scene, &r.spec, &r.geom, &r.grid).unwrap();
    reconstruct_volume(&acq, &MaskSource::Geometry { base: &r.base }, grid, &ReconstructOptions::default()).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let r = rig(256, 120, 4, 4, 30, 1.0, 100);
    let layer = 50;
    let scene = Scene::single_layer(layer, Frame::filled(256, 256, 1.0).unwrap()).unwrap();
    let acq = acquire_stack(&scene, &r.spec, &r.geom, &r.grid).unwrap();
    let volume = reconstruct_volume(&acq, &MaskSource::Geometry { base: &r.base }, &r.grid, &ReconstructOptions::default())
        .unwrap();
    let mut worst: f64 = 0.0;
    for probe in [(220, 128), (230, 7), (255, 255)] {
        let reconstructed = axial_response(&volume, probe).unwrap();
        let direct = axial_psf(&acq.frames[0], &r.base, &r.spec, &r.geom, &r.grid, probe).unwrap();
        worst = worst.max(reconstructed.max_abs_diff(&direct).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-6 && secs < 10.0,
        format!("max |reconstructed - direct| = {worst:.3e} (< 1e-6), runtime {secs:.2} s (< 10 s)"),
    )
}

fn coefficient_of_variation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean.abs()
}

fn bitwise_equal(a: &VolumeStack, b: &VolumeStack, factor: f32) -> bool {
    a.sections.iter().zip(&b.sections).all(|(s, t)| {
        s.data()
            .iter()
            .zip(t.data())
            .all(|(&x, &y)| if x == SENTINEL { y == SENTINEL } else { (x * factor).to_bits() == y.to_bits() })
    })
}

fn in_frame_cv(volume: &VolumeStack, reach: usize, sections: impl Iterator<Item = usize>) -> f64 {
    let (w, h) = volume.dims();
    let mut worst: f64 = 0.0;
    for j in sections {
        let section = &volume.sections[j];
        let values: Vec<f64> = (0..h)
            .flat_map(|y| (reach..w).map(move |x| (x, y)))
            .map(|(x, y)| section.get(x, y) as f64)
            .collect();
        if values.iter().any(|&v| v != 0.0) {
            worst = worst.max(coefficient_of_variation(&values));
        }
    }
    worst
}

fn criterion_2() -> Outcome {
    let r = rig(256, 120, 4, 4, 30, 1.0, 100);
    let layer = 50;
    let scene = Scene::single_layer(layer, Frame::filled(256, 256, 1.0).unwrap()).unwrap();
    let acq = acquire_stack(&scene, &r.spec, &r.geom, &r.grid).unwrap();
    let opts = ReconstructOptions::default();
    let volume = reconstruct_volume(&acq, &MaskSource::Geometry { base: &r.base }, &r.grid, &opts).unwrap();
    // columns where every lateral shift of every section stays inside the frame
    let reach = |r: &Rig| r.grid.count - 1 + (r.spec.num_shifts - 1) * r.spec.shift_step;
    let focus_cv = in_frame_cv(&volume, reach(&r), layer..layer + 1);

    // unit steps: every pixel samples the whole slit profile at every section
    let fine = rig(160, 60, 4, 1, 60, 1.0, 50);
    let fine_scene = Scene::single_layer(25, Frame::filled(160, 160, 1.0).unwrap()).unwrap();
    let fine_volume = volume_of(&fine, &fine_scene, &fine.grid);
    let all_cv = in_frame_cv(&fine_volume, reach(&fine), 0..fine.grid.count);

    let mut mask_scale_exact = true;
    for c in [0.5f32, 2.0, 3.0, 8.0] {
        let scaled = r.base.scaled(c);
        let v = reconstruct_volume(&acq, &MaskSource::Geometry { base: &scaled }, &r.grid, &opts).unwrap();
        mask_scale_exact &= bitwise_equal(&volume, &v, 1.0);
    }

    let mut object_scale_exact = true;
    for c in [0.25f32, 2.0, 4.0] {
        let mut scaled = acq.clone();
        scaled.frames = acq.frames.iter().map(|f| f.scaled(c)).collect();
        let v = reconstruct_volume(&scaled, &MaskSource::Geometry { base: &r.base }, &r.grid, &opts).unwrap();
        object_scale_exact &= bitwise_equal(&volume, &v, c);
    }
    check(
        focus_cv < 1e-9 && all_cv < 1e-9 && mask_scale_exact && object_scale_exact,
        format!(
            "in-focus section CV = {focus_cv:.3e}, worst CV over all sections with unit steps = {all_cv:.3e} (< 1e-9); mask-scale exact = {mask_scale_exact}, object-scale exact = {object_scale_exact}"
        ),
    )
}

/// Spatially summed axial profile of `rows`, over pixels that are never sentinel.
fn layer_profile(volume: &VolumeStack, rows: std::ops::Range<usize>) -> Vec<f64> {
    let (w, _) = volume.dims();
    let mut profile = vec![0.0; volume.sections.len()];
    let mut pixels = 0usize;
    for y in rows {
        for x in 0..w {
            let column = volume.column(x, y);
            if column.contains(&SENTINEL) {
                continue;
            }
            pixels += 1;
            for (p, v) in profile.iter_mut().zip(column) {
                *p += v as f64;
            }
        }
    }
    profile.iter().map(|p| p / pixels.max(1) as f64).collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

/// (baseline-subtracted ratio, raw ratio) of out-of-band to in-band energy.
fn band_ratios(profile: &[f64], centre: usize, half_width: usize) -> (f64, f64) {
    let band = centre.saturating_sub(half_width)..=centre + half_width;
    let baseline = median(profile);
    let (mut inside, mut outside, mut raw_in, mut raw_out) = (0.0, 0.0, 0.0, 0.0);
    for (j, &p) in profile.iter().enumerate() {
        let above = (p - baseline).max(0.0);
        if band.contains(&j) {
            inside += above;
            raw_in += p;
        } else {
            outside += above;
            raw_out += p;
        }
    }
    (outside / inside, raw_out / raw_in)
}

fn three_layer_scene(size: usize, sections: &[usize], texture: bool) -> (Scene, Vec<std::ops::Range<usize>>) {
    let rows_per = size / sections.len();
    let mut bands = Vec::new();
    let layers = sections
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            let rows = k * rows_per..(k + 1) * rows_per;
            bands.push(rows.clone());
            let reflectance = Frame::from_fn(size, size, |x, y| {
                if !rows.contains(&y) {
                    0.0
                } else if texture {
                    0.6 + 0.4 * (((x / 9 + y / 7) % 2) as f32)
                } else {
                    1.0
                }
            })
            .unwrap();
            Layer { z_index: z, reflectance }
        })
        .collect();
    (Scene::new(layers, 0.0, NoiseSpec::off()).unwrap(), bands)
}

fn criterion_3() -> Outcome {
    let r = rig(256, 120, 4, 4, 30, 1.0, 100);
    let predicted = rect_slit_fwhm_sections(4.0, 1.0);
    let centres = [20usize, 50, 80];
    let separation = (centres[1] - centres[0]) as f64;
    let half_width = predicted.ceil() as usize;
    let (scene, bands) = three_layer_scene(256, &centres, true);

    let clean = volume_of(&r, &scene, &r.grid);
    let peak = scene.layers().iter().map(|l| l.reflectance.max()).fold(0.0f32, f32::max) as f64;
    let noisy_scene = scene
        .clone()
        .with_haze(0.3)
        .unwrap()
        .with_noise(NoiseSpec::gaussian(0.01 * peak, 1))
        .unwrap();
    let noisy = volume_of(&r, &noisy_scene, &r.grid);

    let mut worst_clean: f64 = 0.0;
    let mut worst_noisy: f64 = 0.0;
    let mut raw = Vec::new();
    for (k, rows) in bands.iter().enumerate() {
        let (c, _) = band_ratios(&layer_profile(&clean, rows.clone()), centres[k], half_width);
        let (n, raw_n) = band_ratios(&layer_profile(&noisy, rows.clone()), centres[k], half_width);
        worst_clean = worst_clean.max(c);
        worst_noisy = worst_noisy.max(n);
        raw.push(format!("{raw_n:.3}"));
    }
    check(
        separation >= 3.0 * predicted && worst_clean < 0.01 && worst_noisy < 0.05,
        format!(
            "separation {separation} >= 3 x FWHM {predicted}; out/in band energy clean {:.3}% (< 1%), haze 0.3 + 1% noise {:.3}% (< 5%) above the axial median baseline; raw ratios without baseline [{}]",
            100.0 * worst_clean,
            100.0 * worst_noisy,
            raw.join(", ")
        ),
    )
}

fn criterion_4() -> Outcome {
    let shear = 0.8;
    let r = rig(256, 120, 4, 4, 30, shear, 100);
    let anchors = Anchors {
        lateral_steps: 10,
        axial_sections: 51,
    };
    let lateral_px = r.geom.lateral_step_px(&r.spec);
    let ref_grid = ZGrid::for_geometry(&r.geom, 0.0, anchors.axial_sections).unwrap();
    let ref_base = synthesize_mask(&r.base, 0.0, 0, &r.geom, &ref_grid).unwrap();
    let ref_lateral = synthesize_mask(&r.base, 9.0 * lateral_px, 0, &r.geom, &ref_grid).unwrap();
    let ref_axial = synthesize_mask(&r.base, 0.0, 50, &r.geom, &ref_grid).unwrap();
    let model = fit_mask_model(&ref_base, &ref_lateral, &ref_axial, anchors).unwrap();
    let (fitted_shear, _) = model.axial_map.translation_part();
    let shear_error = (fitted_shear - shear).abs();

    let scene = make_tilted_plane_scene(&r.grid, 100.0 / 256.0, &Frame::filled(256, 256, 1.0).unwrap()).unwrap();
    let acq = acquire_stack(&scene, &r.spec, &r.geom, &r.grid).unwrap();
    let opts = ReconstructOptions::default();
    let direct = reconstruct_volume(&acq, &MaskSource::Geometry { base: &r.base }, &r.grid, &opts).unwrap();
    let predicted = reconstruct_volume(&acq, &MaskSource::Model(&model), &r.grid, &opts).unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in direct.sections.iter().zip(&predicted.sections) {
        let (mut diff, mut norm) = (0.0, 0.0);
        for (&x, &y) in a.data().iter().zip(b.data()) {
            if x == SENTINEL || y == SENTINEL {
                continue;
            }
            diff += ((x - y) as f64).powi(2);
            norm += (x as f64).powi(2);
        }
        if norm > 0.0 {
            worst = worst.max((diff / norm).sqrt());
        }
    }
    check(
        shear_error < 0.02 && worst < 0.02,
        format!(
            "fitted shear {fitted_shear:.5} px/section (error {shear_error:.2e} < 0.02); worst per-section RMS difference {:.3}% (< 2%)",
            100.0 * worst
        ),
    )
}

fn criterion_5() -> Outcome {
    let r = rig(256, 120, 4, 1, 120, 1.0, 100);
    let scene = make_tilted_plane_scene(&r.grid, 100.0 / 256.0, &Frame::filled(256, 256, 1.0).unwrap()).unwrap();
    let truth = scene.ground_truth_depth(&r.grid);
    let dz = r.grid.z_step;
    let rms = |volume: &VolumeStack, refine: bool| {
        let map = extract_depth_map(volume, None, refine);
        let valid = map.valid_count() as f64 / (map.width * map.height) as f64;
        (map.rms_error(&truth, |_, _| true).unwrap_or(f64::INFINITY) / dz, valid)
    };
    let clean = volume_of(&r, &scene, &r.grid);
    let (argmax, valid) = rms(&clean, false);
    let (refined, _) = rms(&clean, true);
    let hazy = volume_of(&r, &scene.clone().with_haze(0.5).unwrap(), &r.grid);
    let (haze, haze_valid) = rms(&hazy, false);
    check(
        argmax < 0.5 && refined < 0.1 && haze < 1.0 && valid > 0.9 && haze_valid > 0.9,
        format!(
            "depth RMS / z_step: argmax {argmax:.4} (< 0.5), refined {refined:.4} (< 0.1), haze 0.5 {haze:.4} (< 1); valid pixels {:.1}% / {:.1}%",
            100.0 * valid,
            100.0 * haze_valid
        ),
    )
}

fn criterion_6() -> Outcome {
    // 20 px period with one pixel of shear per section: 20 sections of range
    let r = rig(128, 20, 2, 1, 20, 1.0, 30);
    let range = axial_range(&r.spec, &r.geom);
    let layer = 25;
    let layer_z = r.grid.z_at(layer);
    let scene = Scene::single_layer(layer, Frame::filled(128, 128, 1.0).unwrap()).unwrap();
    let short = ZGrid::for_geometry(&r.geom, 0.0, 20).unwrap();
    let volume = volume_of(&r, &scene, &short);
    let map = extract_depth_map(&volume, None, false);
    let period_sections = r.geom.period_px(&r.spec) / r.geom.shear_px_per_section();
    let expected = r.grid.z_at(layer - period_sections as usize);
    let interior: Vec<f64> = (0..128)
        .flat_map(|y| (50..128).map(move |x| (x, y)))
        .map(|(x, y)| map.depth[y * 128 + x])
        .collect();
    let aliased = interior.iter().all(|&z| (z - expected).abs() < 1e-9);
    let flagged_long = axial_span(&r.spec, &r.geom, &r.grid).exceeds_period;
    let flagged_short = axial_span(&r.spec, &r.geom, &short).exceeds_period;
    let flagged_edge = axial_span(&r.spec, &r.geom, &ZGrid::for_geometry(&r.geom, 0.0, 21).unwrap()).exceeds_period;
    check(
        layer_z > range && aliased && flagged_long && flagged_edge && !flagged_short,
        format!(
            "layer at z = {layer_z:.3} beyond range {range:.3} reads as z = {expected:.3} ({period_sections} sections away) on every interior pixel: {aliased}; flags K=30: {flagged_long}, K=21: {flagged_edge}, K=20: {flagged_short}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for (w, shear) in [(4usize, 1.0), (6, 0.5), (5, 0.8), (3, 0.25), (8, 2.0)] {
        let sections = (48.0 / shear) as usize;
        let r = rig(192, 60, w, 1, 60, shear, sections);
        let scene_layer = sections / 2;
        let pattern = synthesize_mask(&r.base, 0.0, scene_layer, &r.geom, &r.grid).unwrap();
        let curve = axial_psf(&pattern, &r.base, &r.spec, &r.geom, &r.grid, (150, 10)).unwrap();
        let measured = fwhm(&curve).unwrap() / r.grid.z_step;
        let predicted = rect_slit_fwhm_sections(w as f64, shear);
        let rel = (measured - predicted).abs() / predicted;
        worst = worst.max(rel);
        details.push(format!("w={w} s={shear}: {measured:.3}/{predicted:.3}"));
    }

    // 25 degrees, 50 um sections, 0.5 px shear, 5 px slits: 10 sections, 0.5 mm
    let spec = PatternSpec::new(160, 16, 60, 5, 1, 60).unwrap();
    let pitch = 0.1 * 25f64.to_radians().tan();
    let geom = GeometryConfig::new(25f64.to_radians(), 0.05, pitch, 1.0).unwrap();
    let grid = ZGrid::for_geometry(&geom, 0.0, 60).unwrap();
    let base = camera_base_mask(&spec, &geom).unwrap();
    let pattern = synthesize_mask(&base, 0.0, 30, &geom, &grid).unwrap();
    let curve = axial_psf(&pattern, &base, &spec, &geom, &grid, (120, 8)).unwrap();
    let width = fwhm(&curve).unwrap();
    let sections = width / grid.z_step;
    check(
        worst < 0.02 && (sections - 10.0).abs() <= 0.2,
        format!(
            "worst relative FWHM error {:.3}% (< 2%) [{}]; tuned rig FWHM {sections:.3} sections = {width:.4} mm (10 +/- 0.2)",
            100.0 * worst,
            details.join("; ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let reference = bench_reconstruction(&BenchConfig {
        width: 2048,
        height: 2048,
        num_shifts: 30,
        sections: 100,
        threads: 0,
    })
    .map_err(|e| e.to_string())?;

    let timed = |sections| {
        (0..3)
            .map(|_| {
                bench_reconstruction(&BenchConfig {
                    width: 512,
                    height: 512,
                    num_shifts: 30,
                    sections,
                    threads: 0,
                })
                .unwrap()
                .elapsed_s
            })
            .fold(f64::INFINITY, f64::min)
    };
    let ratio = timed(40) / timed(20);

    let small = |threads| BenchConfig {
        width: 256,
        height: 256,
        num_shifts: 30,
        sections: 20,
        threads,
    };
    let max_threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let checksums: Vec<u64> = [1, max_threads, 4]
        .into_iter()
        .map(|t| bench_reconstruction(&small(t)).unwrap().checksum)
        .collect();
    let identical = checksums.windows(2).all(|w| w[0] == w[1]);
    check(
        (1.6..=2.4).contains(&ratio) && identical,
        format!(
            "reference shape 2048x2048, n=30, 100 sections: {:.1} MP/s on {} thread(s) ({:.1} ms/section, reported only); time ratio for doubled sections {ratio:.3} (2 +/- 20%); checksums for 1/{max_threads}/4 threads identical: {identical}",
            reference.megapixels_per_second, reference.threads_used, reference.per_section_ms
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_aspi"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
    } else {
        Err(format!(
            "`aspi {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn summary_value(line: &str, key: &str) -> Option<f64> {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
        .and_then(|v| v.parse().ok())
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut frames = 0usize;
    let mut exact = true;
    while frames < 10_000 {
        let (w, h) = (rng.gen_range(1..24), rng.gen_range(1..24));
        let planes = rng.gen_range(1..8).min(10_000 - frames);
        let data: Vec<Vec<f32>> = (0..planes)
            .map(|_| {
                (0..w * h)
                    .map(|_| match rng.gen_range(0..10) {
                        0 => SENTINEL,
                        1 => f32::from_bits(rng.gen::<u32>() & 0x7f7f_ffff),
                        _ => rng.gen_range(-1e6f32..1e6),
                    })
                    .collect()
            })
            .collect();
        let stack = Stack::new(w, h, data, Metadata::new()).unwrap();
        let back = decode_stack(&encode_stack(&stack).unwrap()).unwrap();
        exact &= back.width == w
            && back.height == h
            && back
                .planes
                .iter()
                .flatten()
                .zip(stack.planes.iter().flatten())
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && back.planes.len() == planes;
        frames += planes;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (acq, truth, vol, depth) = (p("acq.aspi"), p("truth.aspi"), p("vol.aspi"), p("depth.aspi"));
    let start = Instant::now();
    run_cli(&["simulate", "--scene", "tilted", "--out", &acq, "--truth", &truth])?;
    run_cli(&["reconstruct", "--acq", &acq, "--out", &vol])?;
    let summary = run_cli(&["depthmap", "--volume", &vol, "--out", &depth, "--truth", &truth])?;
    let secs = start.elapsed().as_secs_f64();
    let rms = summary_value(&summary, "rms_error_sections").unwrap_or(f64::NAN);
    let outputs = [&acq, &vol, &depth].iter().all(|f| Path::new(f).exists());
    check(
        exact && outputs && secs < 60.0 && rms < 0.5,
        format!(
            "{frames} random frames round-trip bit-exact: {exact}; simulate -> reconstruct -> depthmap at 256x256 in {secs:.2} s (< 60 s), depth RMS {rms:.4} sections"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("mask-multiply response equals direct axial PSF", criterion_1),
        ("normalization contract", criterion_2),
        ("three-layer sectioning", criterion_3),
        ("translation-model mask prediction", criterion_4),
        ("tilted-plane depth accuracy", criterion_5),
        ("axial range aliasing", criterion_6),
        ("axial FWHM", criterion_7),
        ("reconstruction throughput", criterion_8),
        ("stack format and CLI pipeline", criterion_9),
    ];
    let only: Option<usize> = std::env::var("ASPI_CRITERION").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let number = k + 1;
        if only.is_some_and(|o| o != number) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {number} ({name}): PASS [{secs:.1} s] {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {number} ({name}): FAIL [{secs:.1} s] {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

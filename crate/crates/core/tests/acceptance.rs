//! Acceptance checks. Each test prints exactly one `PASS`/`FAIL` line with the
//! measured values, then asserts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use wheelforge::autoenc::{
    grad_check, train, train_with_validation, AutoencoderModel, AutoencoderSpec, TrainConfig, TrainReport,
};
use wheelforge::contour::{decimate, extract_contours, sort_and_group, ContourConfig, Point, PointGroup};
use wheelforge::designspace::{
    augment_rotations, synth_reference, DesignImage, DesignSet, Provenance, ReferenceParams,
};
use wheelforge::doe::{coverage_metric, fit_latent_gaussian, lhs_normal, snap_to_nearest, Normalizer};
use wheelforge::insight::{frequency_groups, grad_cam, grad_cam_sequential, kmeans, lloyd, tsne, TsneConfig};
use wheelforge::modal::{
    analyze_solid, assemble, mesh_from_voxels, solve_free_free, EigenSettings, HexMesh, MassKind, Material,
    ModalSettings,
};
use wheelforge::nn::{Layer, Sequential, Tensor};
use wheelforge::solid::{build_wheel, CrossSection, VoxelGrid, VoxelSolid, WheelBuildSpec};
use wheelforge::studio::{run_all, PipelineConfig, Stage, Workspace};
use wheelforge::surrogate::{
    augment_labeled, evaluate_model, train_baseline, train_ensemble, LabeledItem, LabeledSet, MinMaxScaler,
    RegressorModel, Split, SurrogateConfig, Target,
};
use wheelforge::topopt::{optimize, DomainSpec, TopOptProblem, TopOptSettings, WheelDomain};

/// The checks share one core; running them one at a time keeps timings honest
/// and memory bounded.
fn exclusive() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(criterion: &str, ok: bool, detail: String) {
    let line = format!("{} {criterion}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    // bypasses the test harness capture so the line always shows up
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "{criterion}: {detail}");
}

fn random_references(n: usize, size: usize, seed: u64) -> Vec<(ReferenceParams, DesignImage)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let p = ReferenceParams::sample(&mut rng);
            let img = synth_reference(&p, size, format!("w{i:04}")).unwrap();
            (p, img)
        })
        .collect()
}

// ---------------------------------------------------------------- topopt

fn slice_problem(lambda: f64) -> TopOptProblem {
    let d = WheelDomain::wheel_slice(6, 6, 0.3);
    let reference: Vec<f64> = (0..36).map(|e| f64::from((e * 7 + e / 6) % 5 < 2)).collect();
    TopOptProblem::with_reference_field(d, reference, lambda, 0.5, TopOptSettings::default()).unwrap()
}

#[test]
fn c01_topopt_gradient_check() {
    let _g = exclusive();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for lambda in [0.0, 0.05, 5.0] {
        let p = slice_problem(lambda);
        for beta in [1.0, 4.0] {
            let raw: Vec<f64> = p
                .uniform_raw(0.0)
                .iter()
                .zip(p.domain.kinds())
                .map(|(&v, k)| if k.pinned_density().is_some() { v } else { rng.random_range(0.2..0.8) })
                .collect();
            let s = p.objective_and_sensitivity(&raw, beta).unwrap();
            let gmax = s.grad_raw.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let h = 1e-6;
            for e in p.domain.design_elements() {
                let (mut plus, mut minus) = (raw.clone(), raw.clone());
                plus[e] += h;
                minus[e] -= h;
                let fd = (p.objective_and_sensitivity(&plus, beta).unwrap().value
                    - p.objective_and_sensitivity(&minus, beta).unwrap().value)
                    / (2.0 * h);
                let rel = (fd - s.grad_raw[e]).abs() / s.grad_raw[e].abs().max(fd.abs()).max(1e-6 * gmax);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        "topopt gradient check (6x6 wheel slice)",
        worst < 1e-4 && secs < 10.0,
        format!("max rel error {worst:.2e} over {checked} derivatives, {secs:.1}s"),
    );
}

struct SweepCase {
    lambda: f64,
    shear: f64,
    vol_frac: f64,
    target: f64,
    volume: f64,
    l1: f64,
}

/// 3x3x3 sweep around the default reference, with volumes and normalized L1
/// distances recomputed from the returned fields.
fn desk_sweep() -> &'static (Vec<SweepCase>, f64) {
    static SWEEP: OnceLock<(Vec<SweepCase>, f64)> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let t = Instant::now();
        let spec = DomainSpec::default();
        let reference = synth_reference(&ReferenceParams::default(), spec.grid, "ref").unwrap();
        let mut cases = Vec::new();
        for &lambda in &[0.0005, 0.05, 5.0] {
            for &shear in &[0.0, 0.2, 0.4] {
                for &vol_frac in &[0.8, 0.9, 1.0] {
                    let domain = WheelDomain::wheel(&DomainSpec {
                        shear_ratio: shear,
                        ..spec.clone()
                    })
                    .unwrap();
                    let field: Vec<f64> = domain
                        .sample_image(&reference)
                        .unwrap()
                        .into_iter()
                        .map(|v| f64::from(v >= 0.5))
                        .collect();
                    let design: Vec<usize> = domain.design_elements().collect();
                    let ref_frac = design.iter().map(|&e| field[e]).sum::<f64>() / design.len() as f64;
                    let target = (vol_frac * ref_frac).min(1.0);
                    let p = TopOptProblem::with_reference_field(
                        domain,
                        field.clone(),
                        lambda,
                        target,
                        TopOptSettings::default(),
                    )
                    .unwrap();
                    let r = optimize(&p).unwrap();
                    let x = &r.density.physical;
                    let volume = design.iter().map(|&e| x[e]).sum::<f64>() / design.len() as f64;
                    let l1 = design
                        .iter()
                        .map(|&e| (f64::from(x[e] >= 0.5) - field[e]).abs())
                        .sum::<f64>()
                        / design.len() as f64;
                    cases.push(SweepCase {
                        lambda,
                        shear,
                        vol_frac,
                        target,
                        volume,
                        l1,
                    });
                }
            }
        }
        (cases, t.elapsed().as_secs_f64())
    })
}

#[test]
fn c02_volume_constraint_over_sweep() {
    let _g = exclusive();
    let (cases, secs) = desk_sweep();
    let worst = cases.iter().map(|c| (c.volume - c.target).abs()).fold(0.0, f64::max);
    verdict(
        "volume constraint over 27-problem sweep",
        cases.len() == 27 && worst <= 1e-3 && *secs < 600.0,
        format!("max |V/V0 - f| = {worst:.2e} over {} runs, {secs:.0}s", cases.len()),
    );
}

#[test]
fn c03_similarity_term_extremes() {
    let _g = exclusive();
    let (cases, _) = desk_sweep();
    let mut ratios = Vec::new();
    for &shear in &[0.0, 0.2, 0.4] {
        let at = |lambda: f64| {
            cases
                .iter()
                .find(|c| c.lambda == lambda && c.shear == shear && c.vol_frac == 1.0)
                .unwrap()
                .l1
        };
        ratios.push((shear, at(5.0), at(0.0005)));
    }
    let ok = ratios.iter().all(|&(_, hi, lo)| hi < 0.1 * lo);
    let detail = ratios
        .iter()
        .map(|(s, hi, lo)| format!("shear {s}: L1 {hi:.4} vs {lo:.4} (x{:.3})", hi / lo))
        .collect::<Vec<_>>()
        .join("; ");
    verdict("similarity term: lambda 5 vs 0.0005 (vol 1.0)", ok, detail);
}

// ---------------------------------------------------------------- autoencoder and DOE

const DESK_SIZE: usize = 32;

fn desk_spec() -> AutoencoderSpec {
    AutoencoderSpec {
        input_size: DESK_SIZE,
        channels: [8, 16, 32, 32, 8],
        dropout: 0.1,
    }
}

struct DeskAutoencoder {
    augmented: AutoencoderModel,
    aug_report: TrainReport,
    plain_report: TrainReport,
    aug_val: f64,
    plain_val: f64,
    corpus: DesignSet,
    n_images: usize,
    seconds: f64,
}

/// 250 references: 200 training sources (8 rotations each) and 50 held-out
/// sources (8 rotations each), i.e. a 2,000-image corpus.
fn desk_autoencoder() -> &'static DeskAutoencoder {
    static AE: OnceLock<DeskAutoencoder> = OnceLock::new();
    AE.get_or_init(|| {
        let t = Instant::now();
        let refs: Vec<DesignImage> = random_references(250, DESK_SIZE, 21).into_iter().map(|r| r.1).collect();
        let train_src = DesignSet::from_items(refs[..200].iter().cloned()).unwrap();
        let val_src = DesignSet::from_items(refs[200..].iter().cloned()).unwrap();
        let train_aug = augment_rotations(&train_src, 8, 1).unwrap();
        let val = augment_rotations(&val_src, 8, 2).unwrap();
        let cfg = TrainConfig {
            lr: 2e-3,
            batch_size: 32,
            epochs: 20,
            seed: 5,
            val_fraction: 0.0,
        };
        let (augmented, aug_report) =
            train_with_validation(AutoencoderModel::new(desk_spec(), 5).unwrap(), &train_aug, &val, &cfg).unwrap();
        let (_, plain_report) =
            train_with_validation(AutoencoderModel::new(desk_spec(), 5).unwrap(), &train_src, &val, &cfg).unwrap();
        let mut corpus = DesignSet::new();
        for set in [&train_aug, &val] {
            for (img, meta) in set.iter() {
                corpus.push(img.clone(), meta.clone()).unwrap();
            }
        }
        DeskAutoencoder {
            aug_val: *aug_report.val_loss.last().unwrap(),
            plain_val: *plain_report.val_loss.last().unwrap(),
            augmented,
            aug_report,
            plain_report,
            n_images: corpus.len(),
            corpus,
            seconds: t.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn c04_autoencoder_training() {
    let _g = exclusive();
    let ae = desk_autoencoder();
    let first = ae.aug_report.val_loss[0];

    // finite-difference gradient check on small networks; the probe is smooth
    // so no max-pool window holds a tie
    let probe = DesignImage::from_fn("probe", Provenance::Test, 32, |x, y| {
        0.5 + 0.45 * ((0.37 * x as f64 + 0.11).sin() * (0.23 * y as f64 + 0.007 * x as f64).cos())
    })
    .unwrap();
    let spec = AutoencoderSpec {
        input_size: 32,
        channels: [2, 2, 2, 2, 2],
        dropout: 0.0,
    };
    let mut worst_gc = 0.0f64;
    let mut n_params = 0;
    for seed in 0..6 {
        let mut small = AutoencoderModel::new(spec.clone(), seed).unwrap();
        for net in [&mut small.encoder, &mut small.decoder] {
            for layer in &mut net.layers {
                if let Layer::Conv2d { bias, .. } | Layer::Dense { bias, .. } = layer {
                    for (i, b) in bias.iter_mut().enumerate() {
                        *b = 0.03 + 0.02 * i as f64;
                    }
                }
            }
        }
        let gc = grad_check(&small, &probe, 1e-5).unwrap();
        worst_gc = worst_gc.max(gc.max_rel_error);
        n_params = gc.n_params;
    }

    let ok = ae.n_images == 2000
        && ae.aug_val < 0.5 * first
        && ae.aug_val <= ae.plain_val
        && worst_gc < 1e-4
        && ae.seconds < 1800.0;
    verdict(
        "autoencoder (2,000 images)",
        ok,
        format!(
            "val MSE epoch 1 {first:.5} -> final {:.5} (x{:.3}); augmented {:.5} vs plain {:.5} (plain epoch 1 {:.5}); grad check {:.2e} (6 seeds, {} params); {:.0}s",
            ae.aug_val,
            ae.aug_val / first,
            ae.aug_val,
            ae.plain_val,
            ae.plain_report.val_loss[0],
            worst_gc,
            n_params,
            ae.seconds
        ),
    );
}

/// Latin hypercube on [0, 1]^d: one point per stratum per dimension.
fn uniform_lhs(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![vec![0.0; d]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(&mut rng);
        for (i, row) in out.iter_mut().enumerate() {
            row[j] = (perm[i] as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    out
}

#[test]
fn c05_doe_coverage() {
    let _g = exclusive();
    let ae = desk_autoencoder();
    let model = &ae.augmented;
    let imgs: Vec<&DesignImage> = ae.corpus.items().iter().collect();
    let cloud: Vec<Vec<f64>> = model.encode_batch(&imgs).unwrap().into_iter().map(|z| z.z).collect();
    let norm = Normalizer::fit(&cloud).unwrap();

    let g = fit_latent_gaussian(&cloud).unwrap();
    let samples = lhs_normal(100, &g, 3, false);
    let snapped = snap_to_nearest(&samples, &cloud, &ae.corpus).unwrap();
    let latent_rows: Vec<Vec<f64>> = snapped.selected.iter().map(|&i| cloud[i].clone()).collect();
    let latent_cov = coverage_metric(&latent_rows, &norm).unwrap();

    let pixel_designs: Vec<DesignImage> = uniform_lhs(100, DESK_SIZE * DESK_SIZE, 3)
        .into_iter()
        .enumerate()
        .map(|(i, px)| DesignImage::new(format!("px{i}"), Provenance::Test, DESK_SIZE, px).unwrap())
        .collect();
    let refs: Vec<&DesignImage> = pixel_designs.iter().collect();
    let pixel_rows: Vec<Vec<f64>> = model.encode_batch(&refs).unwrap().into_iter().map(|z| z.z).collect();
    let pixel_cov = coverage_metric(&pixel_rows, &norm).unwrap();

    let ratio = latent_cov / pixel_cov;
    verdict(
        "DOE coverage: latent LHS vs pixel LHS",
        ratio >= 5.0,
        format!(
            "latent {latent_cov:.4} ({} distinct snapped designs) vs pixel {pixel_cov:.4}: x{ratio:.1}",
            latent_rows.len()
        ),
    );
}

// ---------------------------------------------------------------- contours

/// Plain list walk: start from the first point, always move to the closest
/// remaining point, open a new group when that jump is at least `threshold`.
fn brute_sort_and_group(points: &[Point], threshold: f64) -> Vec<Vec<Point>> {
    let mut remaining: Vec<Point> = points.to_vec();
    let mut cur = remaining.remove(0);
    let mut groups = vec![vec![cur]];
    while !remaining.is_empty() {
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for (i, p) in remaining.iter().enumerate() {
            let d = ((p[0] - cur[0]).powi(2) + (p[1] - cur[1]).powi(2)).sqrt();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let next = remaining.remove(best);
        if best_d >= threshold {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(next);
        cur = next;
    }
    groups
}

fn expected_decimated(n: usize) -> Option<usize> {
    match n {
        0..=3 => None,
        4..=19 => Some(n),
        20..=99 => Some(n.div_ceil(6)),
        _ => Some(n.div_ceil(12)),
    }
}

#[test]
fn c06_contour_grouping_and_decimation() {
    let _g = exclusive();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    for trial in 0..100 {
        let n = rng.random_range(1..400);
        let span: f64 = rng.random_range(4.0..120.0);
        let lattice = trial % 3 == 0;
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let p = [rng.random_range(0.0..span), rng.random_range(0.0..span)];
                if lattice { [p[0].round(), p[1].round()] } else { p }
            })
            .collect();
        let fast: Vec<Vec<Point>> = sort_and_group(&pts, 5.0).into_iter().map(|g| g.points).collect();
        if fast != brute_sort_and_group(&pts, 5.0) {
            mismatches += 1;
        }
    }
    let mut bad_counts = Vec::new();
    for n in 0..=500 {
        let g = PointGroup {
            points: (0..n).map(|i| [i as f64, (i * i) as f64]).collect(),
            closed: true,
        };
        let got = decimate(&g);
        let count = got.as_ref().map(|d| d.points.len());
        let first_kept = got.as_ref().is_none_or(|d| d.points[0] == g.points[0]);
        if count != expected_decimated(n) || !first_kept {
            bad_counts.push(n);
        }
    }
    verdict(
        "contour sort_and_group and decimation",
        mismatches == 0 && bad_counts.is_empty(),
        format!(
            "{mismatches}/100 grouping mismatches; decimation wrong for {} of 501 sizes",
            bad_counts.len()
        ),
    );
}

// ---------------------------------------------------------------- modal FEM

fn bar(nx: usize, ny: usize, nz: usize, pitch: f64) -> VoxelSolid {
    let mut s = VoxelSolid::empty(VoxelGrid {
        dims: [nx, ny, nz],
        pitch,
        origin: [0.0; 3],
    });
    s.occupied.iter_mut().for_each(|o| *o = true);
    s
}

fn settings(n_modes: usize) -> ModalSettings {
    ModalSettings {
        eigen: EigenSettings {
            n_modes,
            ..EigenSettings::default()
        },
        ..ModalSettings::default()
    }
}

#[test]
fn c07_fem_oracles() {
    let _g = exclusive();
    let mat = Material::default();
    let mut notes = Vec::new();
    let mut ok = true;

    // free-free rod, 40 elements
    let t = Instant::now();
    let (len, cells) = (500.0, 40);
    let rod = mesh_from_voxels(&bar(cells, 1, 1, len / cells as f64), mat).unwrap();
    let res = solve_free_free(&rod, &settings(30)).unwrap();
    let exact = (mat.e / mat.rho).sqrt() / (2.0 * len);
    // the longitudinal mode is the one whose shape is dominated by x motion
    let axial = |u: &[f64]| {
        let x: f64 = u.iter().step_by(3).map(|v| v * v).sum();
        x / u.iter().map(|v| v * v).sum::<f64>()
    };
    let long = (6..res.frequencies_hz.len())
        .find(|&i| axial(&res.mode_shapes[i]) > 0.9)
        .map(|i| res.frequencies_hz[i]);
    let rod_err = long.map_or(f64::INFINITY, |f| (f - exact).abs() / exact);
    ok &= rod_err < 0.02 && t.elapsed().as_secs_f64() < 60.0;
    notes.push(format!("rod {:.1} Hz vs {exact:.1} Hz ({:.2}%)", long.unwrap_or(f64::NAN), 100.0 * rod_err));

    // rigid modes of an irregular block
    let t = Instant::now();
    let mut solid = bar(7, 4, 3, 5.0);
    solid.occupied[0] = false;
    solid.occupied[10] = false;
    let mesh = mesh_from_voxels(&solid, mat).unwrap();
    let base = solve_free_free(&mesh, &settings(14)).unwrap();
    let gap = base.frequencies_hz[5] / base.frequencies_hz[6];
    ok &= base.n_rigid == 6 && gap < 1e-3 && t.elapsed().as_secs_f64() < 60.0;
    notes.push(format!("{} rigid modes, f6/f7 = {gap:.1e}", base.n_rigid));

    // density scaling
    let heavy = HexMesh {
        material: Material { rho: 4.0 * mat.rho, ..mat },
        ..mesh.clone()
    };
    let h = solve_free_free(&heavy, &settings(14)).unwrap();
    let scale_err = (6..14)
        .map(|i| (h.frequencies_hz[i] / base.frequencies_hz[i] - 0.5).abs() / 0.5)
        .fold(0.0, f64::max);
    ok &= scale_err <= 1e-9;
    notes.push(format!("rho x4 ratio error {scale_err:.1e}"));

    // total mass from the assembled mass matrix: 1ᵀ M 1 per direction
    let asm = assemble(&mesh, MassKind::Consistent);
    let n = mesh.n_dofs();
    let rho_v = mat.rho * solid.count() as f64 * 125.0;
    let mut worst = 0.0f64;
    for dir in 0..3 {
        let u: Vec<f64> = (0..n).map(|i| f64::from(i % 3 == dir)).collect();
        let mut mu = vec![0.0; n];
        asm.m.mul_vec(&u, &mut mu);
        let m: f64 = u.iter().zip(&mu).map(|(a, b)| a * b).sum();
        worst = worst.max((m - rho_v).abs() / rho_v);
    }
    ok &= worst <= 1e-9;
    notes.push(format!("mass error {worst:.1e}"));
    verdict("FEM oracles", ok, notes.join("; "));
}

// ---------------------------------------------------------------- surrogate

#[derive(Clone, Debug, Serialize, Deserialize)]
struct WheelLabel {
    id: String,
    params: ReferenceParams,
    frequency_hz: f64,
    mass_kg: f64,
}

const N_WHEELS: usize = 150;

fn label_cache_path(key: &str) -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("wheel-labels-{key}.json"))
}

/// Modal labels of random reference wheels built at the 6 mm pitch. Results are
/// cached under the cargo target directory, keyed by every input that affects them.
fn simulated_wheels() -> Vec<WheelLabel> {
    let spec = WheelBuildSpec {
        voxel_pitch_mm: 6.0,
        ..WheelBuildSpec::default()
    };
    let modal = ModalSettings::default();
    let mat = Material::default();
    let key_doc = serde_json::json!({
        "n": N_WHEELS, "seed": 314, "spec": spec, "modal": modal, "mat": mat,
        "contour": ContourConfig::default(), "version": env!("CARGO_PKG_VERSION"),
    });
    let key = wheelforge::studio::sha256_hex(&serde_json::to_vec(&key_doc).unwrap());
    let cache = label_cache_path(&key[..16]);
    if let Ok(text) = std::fs::read_to_string(&cache) {
        if let Ok(rows) = serde_json::from_str::<Vec<WheelLabel>>(&text) {
            return rows;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let mut rows = Vec::new();
    let mut i = 0;
    while rows.len() < N_WHEELS {
        let params = ReferenceParams::sample(&mut rng);
        let id = format!("wheel{i:04}");
        i += 1;
        let img = synth_reference(&params, 64, &id).unwrap();
        let Ok((sketch, _)) = extract_contours(&img, &ContourConfig::default()) else { continue };
        let Ok((solid, report)) =
            build_wheel(&sketch, &CrossSection::default_spoke(), &CrossSection::default_rim(), &spec)
        else {
            continue;
        };
        if !report.connected {
            continue;
        }
        let Ok(r) = analyze_solid(&solid, mat, &modal) else { continue };
        rows.push(WheelLabel {
            id,
            params,
            frequency_hz: r.lateral_frequency_hz,
            mass_kg: r.mass_kg,
        });
    }
    std::fs::write(&cache, serde_json::to_vec(&rows).unwrap()).unwrap();
    rows
}

/// Autoencoder pretrained without labels on the simulated wheels plus 850
/// other random references (4 rotations each), as the pipeline pretrains on
/// the whole corpus before any design is labelled.
fn pretrained_encoder(wheels: &[WheelLabel]) -> AutoencoderModel {
    let mut images: Vec<DesignImage> = wheels
        .iter()
        .map(|w| synth_reference(&w.params, DESK_SIZE, &w.id).unwrap())
        .collect();
    images.extend(random_references(850, DESK_SIZE, 2718).into_iter().map(|r| r.1));
    let corpus = augment_rotations(&DesignSet::from_items(images).unwrap(), 4, 6).unwrap();
    let cfg = TrainConfig {
        lr: 2e-3,
        batch_size: 32,
        epochs: 12,
        seed: 6,
        val_fraction: 0.1,
    };
    train(&corpus, &desk_spec(), &cfg).unwrap().0
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn c08_surrogate_comparison() {
    let _g = exclusive();
    let t = Instant::now();
    let wheels = simulated_wheels();
    let label_secs = t.elapsed().as_secs_f64();
    let items: Vec<LabeledItem> = wheels
        .iter()
        .map(|w| {
            let img = synth_reference(&w.params, DESK_SIZE, &w.id).unwrap();
            LabeledItem::new(img, w.frequency_hz, w.mass_kg)
        })
        .collect();
    let mut set = LabeledSet::new(items).unwrap();
    set.assign_splits(0.2, 0.1, 8).unwrap();
    let aug = augment_labeled(&set);
    let encoder = &pretrained_encoder(&wheels);

    let mut cnn = Vec::new();
    let mut tl = Vec::new();
    let mut ens = Vec::new();
    let mut convex = true;
    let mut worst_gap = f64::NEG_INFINITY;
    for seed in [0u64, 1, 2] {
        let cfg = SurrogateConfig {
            lr: 4e-3,
            decay: 1e-3,
            batch_size: 64,
            max_epochs: 80,
            patience: 15,
            seed: 100 + seed,
            head_max_width: 128,
            n_frequency: 5,
            n_mass: 1,
            ..SurrogateConfig::default()
        };
        let (baseline, _) = train_baseline(&aug, &desk_spec(), Target::Frequency, &cfg).unwrap();
        cnn.push(evaluate_model(&baseline, &aug, Split::Val).unwrap().rmse);
        let (ensemble, _) = train_ensemble(encoder, &aug, &cfg).unwrap();
        // member 0 is the single transfer-learned model trained with cfg.seed
        let members = ensemble.members(Target::Frequency);
        tl.push(evaluate_model(&members[0], &aug, Split::Val).unwrap().rmse);

        for split in [Split::Train, Split::Val, Split::Test] {
            let its = aug.split(split);
            let imgs: Vec<&DesignImage> = its.iter().map(|i| &i.image).collect();
            let y: Vec<f64> = its.iter().map(|i| i.frequency_hz).collect();
            let mean = ensemble.predict_target(Target::Frequency, &imgs).unwrap();
            let avg_member = members
                .iter()
                .map(|m| mse(&m.predict_batch(&imgs).unwrap(), &y))
                .sum::<f64>()
                / members.len() as f64;
            let ens_mse = mse(&mean, &y);
            worst_gap = worst_gap.max((ens_mse - avg_member) / avg_member);
            convex &= ens_mse <= avg_member * (1.0 + 1e-12);
            if split == Split::Val {
                ens.push(ens_mse.sqrt());
            }
        }
    }
    let (m_cnn, m_tl, m_ens) = (median(cnn.clone()), median(tl.clone()), median(ens.clone()));
    let secs = t.elapsed().as_secs_f64();
    verdict(
        "surrogate: TL_CAE <= CNN, ensemble <= TL_CAE, convexity",
        m_tl <= m_cnn && m_ens <= m_tl && convex && secs < 7200.0,
        format!(
            "{} wheels ({} augmented); median val RMSE CNN {m_cnn:.1} Hz, TL_CAE {m_tl:.1} Hz, ensemble {m_ens:.1} Hz; per seed CNN {cnn:.1?} TL {tl:.1?} ens {ens:.1?}; max (ens-avg)/avg {worst_gap:.2e}; labels {label_secs:.0}s, total {secs:.0}s",
            wheels.len(),
            aug.len()
        ),
    );
}

// ---------------------------------------------------------------- insight

#[test]
fn c09_grad_cam() {
    let _g = exclusive();
    let side = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a: Vec<f64> = (0..side * side).map(|_| rng.random::<f64>()).collect();
    let x = Tensor::new(vec![1, 1, side, side], a.clone()).unwrap();
    // two channels: A1 = a, A2 = 2a; y = w1 ΣA1 + w2 ΣA2 + b
    let mut toy_err = 0.0f64;
    for (w1, w2) in [(0.4, 0.1), (-0.5, 0.2), (0.3, -0.6)] {
        let mut weight = vec![0.0; 18];
        weight[4] = 1.0;
        weight[13] = 2.0;
        let mut dense = vec![w1; side * side];
        dense.extend(vec![w2; side * side]);
        let net = Sequential::new(vec![
            Layer::Conv2d {
                in_channels: 1,
                out_channels: 2,
                weight,
                bias: vec![0.0, 0.0],
            },
            Layer::Relu,
            Layer::Flatten,
            Layer::Dense {
                in_features: 2 * side * side,
                out_features: 1,
                weight: dense,
                bias: vec![0.25],
            },
        ]);
        let g = grad_cam_sequential(&net, 1, &x).unwrap();
        toy_err = toy_err.max((g.weights[0] - w1).abs()).max((g.weights[1] - w2).abs());
        for (h, av) in g.raw.values.iter().zip(&a) {
            toy_err = toy_err.max((h - ((w1 + 2.0 * w2) * av).max(0.0)).abs());
        }
    }

    let spec = AutoencoderSpec {
        input_size: 32,
        channels: [4, 4, 4, 4, 2],
        dropout: 0.0,
    };
    let mut flat = RegressorModel::baseline(Target::Frequency, &spec, 32, 1).unwrap();
    if let Some(Layer::Dense { weight, .. }) = flat.head.layers.last_mut() {
        weight.iter_mut().for_each(|w| *w = 0.0);
    }
    flat.scaler = Some(MinMaxScaler::fit(&[1000.0, 1400.0]).unwrap());
    let imgs: Vec<DesignImage> = random_references(6, 32, 5).into_iter().map(|r| r.1).collect();
    let zero = imgs
        .iter()
        .all(|img| grad_cam(&flat, img).unwrap().raw.values.iter().all(|&v| v == 0.0));

    let mut negative = 0usize;
    let mut total = 0usize;
    for seed in 0..6 {
        let mut m = RegressorModel::baseline(Target::Mass, &spec, 32, seed).unwrap();
        m.scaler = Some(MinMaxScaler::fit(&[15.0, 20.0]).unwrap());
        for img in &imgs {
            let g = grad_cam(&m, img).unwrap();
            negative += g.raw.values.iter().chain(&g.upsampled.values).filter(|&&v| v < 0.0).count();
            total += g.raw.values.len() + g.upsampled.values.len();
        }
    }
    verdict(
        "Grad-CAM oracles",
        toy_err < 1e-6 && zero && negative == 0,
        format!("toy max error {toy_err:.1e}; constant model zero map: {zero}; {negative}/{total} negative values"),
    );
}

#[test]
fn c10_clustering_and_embedding() {
    let _g = exclusive();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let normal = Normal::new(0.0, 1.0).unwrap();

    // k-means: SSE never increases on random data
    let mut sse_ok = true;
    let mut runs = 0;
    for trial in 0..20u64 {
        let n = rng.random_range(20..200);
        let d = rng.random_range(1..6);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal.sample(&mut rng) * 3.0).collect()).collect();
        let k = rng.random_range(1..8);
        let c = kmeans(&x, k, trial, 100).unwrap();
        sse_ok &= c.sse_history.windows(2).all(|w| w[1] <= w[0]);
        let starts: Vec<Vec<f64>> = x.choose_multiple(&mut rng, k).cloned().collect();
        let l = lloyd(&x, starts, 100).unwrap();
        sse_ok &= l.sse_history.windows(2).all(|w| w[1] <= w[0]);
        runs += 2;
    }

    // 1D frequency groups: ordered, disjoint, covering their members
    let mut groups_ok = true;
    for trial in 0..10u64 {
        let freqs: Vec<f64> = (0..150).map(|_| 700.0 + 600.0 * rng.random::<f64>()).collect();
        let g = frequency_groups(&freqs, 10, trial).unwrap();
        groups_ok &= g.ranges.windows(2).all(|w| w[0][1] < w[1][0]);
        groups_ok &= g.ranges.iter().all(|r| r[0] <= r[1]);
        groups_ok &= g.centroids.windows(2).all(|w| w[0] < w[1]);
        for (f, &l) in freqs.iter().zip(&g.labels) {
            groups_ok &= g.ranges[l][0] <= *f && *f <= g.ranges[l][1];
        }
    }

    // t-SNE: two Gaussian clouds in 10-D end up linearly separable in 2-D
    let mut x = Vec::new();
    for c in 0..2 {
        for _ in 0..60 {
            x.push(
                (0..10)
                    .map(|j| normal.sample(&mut rng) + if j == 0 { 8.0 * c as f64 } else { 0.0 })
                    .collect::<Vec<f64>>(),
            );
        }
    }
    let emb = tsne(
        &x,
        &TsneConfig {
            perplexity: 20.0,
            iterations: 600,
            seed: 3,
            ..TsneConfig::default()
        },
    )
    .unwrap();
    let separable = (0..3600).any(|k| {
        let th = k as f64 * std::f64::consts::PI / 1800.0;
        let proj = |p: &[f64]| p[0] * th.cos() + p[1] * th.sin();
        let a_max = emb.coords[..60].iter().map(|p| proj(p)).fold(f64::NEG_INFINITY, f64::max);
        let b_min = emb.coords[60..].iter().map(|p| proj(p)).fold(f64::INFINITY, f64::min);
        a_max < b_min
    });
    verdict(
        "clustering and embedding",
        sse_ok && groups_ok && separable,
        format!("SSE monotone in {runs} runs: {sse_ok}; frequency groups ordered: {groups_ok}; t-SNE separable: {separable}"),
    );
}

// ---------------------------------------------------------------- end to end

#[test]
fn c11_end_to_end_determinism() {
    let _g = exclusive();
    let t = Instant::now();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.json");
    let mut hashes: Vec<BTreeMap<Stage, String>> = Vec::new();
    let mut complete = true;
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::load(&config).unwrap();
        cfg.workspace = dir.path().to_path_buf();
        let ws = Workspace::new(dir.path());
        let outcomes = run_all(&cfg, &ws, false).unwrap();
        complete &= ws.ensemble().is_ok() && !ws.candidates().unwrap().is_empty();
        complete &= ws.stage_dir(Stage::Explain).join("report/index.json").exists();
        hashes.push(outcomes.into_iter().map(|o| (o.stage, o.manifest.outputs_hash)).collect());
    }
    let secs = t.elapsed().as_secs_f64();
    let differing: Vec<String> = Stage::ALL
        .iter()
        .filter(|s| hashes[0].get(s) != hashes[1].get(s))
        .map(|s| s.to_string())
        .collect();
    verdict(
        "end-to-end desk run is deterministic",
        complete && differing.is_empty() && secs < 4.0 * 3600.0,
        format!(
            "two runs, {} stages, differing: {:?}; explain hash {}; {secs:.0}s",
            hashes[0].len(),
            differing,
            &hashes[0][&Stage::Explain][..12]
        ),
    );
}


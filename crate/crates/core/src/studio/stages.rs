use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::artifacts::{
    write_csv_rows, CandidateRecord, ItemStatus, LabelRow, LatentRow, MapMeta, SimulatedLabels,
};
use super::config::{EmbeddingKind, PipelineConfig};
use super::report::render_report;
use super::workspace::{sha256_hex, RunManifest, Stage, Workspace, TOOL_VERSION};
use crate::autoenc::{self, TrainConfig};
use crate::contour::{extract_contours, ContourSet};
use crate::designspace::{
    augment_rotations, deduplicate, synth_reference, write_png, DesignImage, DesignSet, ReferenceParams,
};
use crate::doe::{coverage_metric, filter_similar, fit_latent_gaussian, lhs_normal, snap_to_nearest, Normalizer};
use crate::error::{Error, Result};
use crate::insight::{
    elbow_curve, frequency_groups, grad_cam_ensemble, kmeans, overlay, pca_2d, tsne, write_embedding_csv,
    EmbeddingRow, Pca, TsneConfig,
};
use crate::modal::analyze_solid;
use crate::solid::{build_wheel, export_mesh, CrossSection, SectionKind, VoxelSolid};
use crate::surrogate::{
    augment_labeled, evaluate, rank_by_stiffness, train_ensemble, Candidate, LabeledItem, LabeledSet, Split, Target,
};
use crate::topopt::sweep;
use crate::util::{read_json, write_json};

/// What happened to a stage during a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub skipped: bool,
    pub manifest: RunManifest,
}

fn stage_inputs(cfg: &PipelineConfig, stage: Stage) -> Result<Value> {
    Ok(match stage {
        Stage::Generate => serde_json::to_value(&cfg.generate)?,
        Stage::Reduce => serde_json::to_value(&cfg.reduce)?,
        Stage::Doe => serde_json::to_value(&cfg.doe)?,
        Stage::Build3d => serde_json::to_value(&cfg.build3d)?,
        // simulation rebuilds the solids from the stored contours
        Stage::Simulate => json!({ "simulate": cfg.simulate, "build3d": cfg.build3d }),
        Stage::Train => serde_json::to_value(&cfg.train)?,
        Stage::Explain => serde_json::to_value(&cfg.explain)?,
    })
}

fn inputs_hash(cfg: &PipelineConfig, ws: &Workspace, stage: Stage) -> Result<String> {
    let mut prereqs = serde_json::Map::new();
    for &p in stage.prerequisites() {
        prereqs.insert(p.name().into(), json!(ws.require(p)?.outputs_hash));
    }
    let mut sections = serde_json::Map::new();
    if matches!(stage, Stage::Build3d | Stage::Simulate) {
        for (name, path) in [("spoke", &cfg.build3d.spoke_section), ("rim", &cfg.build3d.rim_section)] {
            if let Some(p) = path {
                let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
                sections.insert(name.into(), json!(sha256_hex(&bytes)));
            }
        }
    }
    let doc = json!({
        "stage": stage.name(),
        "tool_version": TOOL_VERSION,
        "seed": cfg.seed,
        "config": stage_inputs(cfg, stage)?,
        "sections": sections,
        "prerequisites": prereqs,
    });
    Ok(sha256_hex(&serde_json::to_vec(&doc)?))
}

/// Runs one stage unless its inputs and outputs are unchanged since the last run.
pub fn run_stage(cfg: &PipelineConfig, ws: &Workspace, stage: Stage, force: bool) -> Result<StageOutcome> {
    let inputs = inputs_hash(cfg, ws, stage)?;
    if !force {
        if let Some(m) = ws.manifest(stage)? {
            if m.inputs_hash == inputs && ws.hash_outputs(stage)?.0 == m.outputs_hash {
                ws.log_run(&json!({
                    "stage": stage, "status": "skipped", "inputs_hash": inputs,
                    "outputs_hash": m.outputs_hash, "seed": cfg.seed, "tool_version": TOOL_VERSION,
                }))?;
                return Ok(StageOutcome {
                    stage,
                    skipped: true,
                    manifest: m,
                });
            }
        }
    }
    let start = Instant::now();
    let dir = ws.reset_stage(stage)?;
    let result = match stage {
        Stage::Generate => generate(cfg, &dir),
        Stage::Reduce => reduce(cfg, ws, &dir),
        Stage::Doe => doe(cfg, ws, &dir),
        Stage::Build3d => build3d(cfg, ws, &dir),
        Stage::Simulate => simulate(cfg, ws, &dir),
        Stage::Train => train(cfg, ws, &dir),
        Stage::Explain => explain(cfg, ws, &dir),
    };
    if let Err(e) = result {
        // leave no manifest behind so later stages see the prerequisite as missing
        let _ = std::fs::remove_dir_all(&dir);
        return Err(e);
    }
    let (outputs_hash, outputs) = ws.hash_outputs(stage)?;
    let manifest = RunManifest {
        stage,
        inputs_hash: inputs,
        outputs_hash,
        outputs,
        seed: cfg.seed,
        seconds: start.elapsed().as_secs_f64(),
        tool_version: TOOL_VERSION.into(),
    };
    ws.write_manifest(&manifest)?;
    ws.log_run(&json!({
        "stage": stage, "status": "ran", "inputs_hash": manifest.inputs_hash,
        "outputs_hash": manifest.outputs_hash, "seconds": manifest.seconds,
        "seed": cfg.seed, "tool_version": TOOL_VERSION,
    }))?;
    Ok(StageOutcome {
        stage,
        skipped: false,
        manifest,
    })
}

/// Runs every stage in order.
pub fn run_all(cfg: &PipelineConfig, ws: &Workspace, force: bool) -> Result<Vec<StageOutcome>> {
    Stage::ALL.iter().map(|&s| run_stage(cfg, ws, s, force)).collect()
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    id: &'a str,
    reference_id: &'a str,
    lambda: f64,
    shear_ratio: f64,
    vol_frac: f64,
    target_fraction: f64,
    status: &'a str,
    compliance: Option<f64>,
    l1_to_reference: Option<f64>,
    l1_design_normalized: Option<f64>,
    iterations: usize,
    converged: bool,
}

fn generate(cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    let g = &cfg.generate;
    let grid = g.domain.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed_for(g.reference_seed));
    let mut refs = DesignSet::new();
    for i in 0..g.n_references {
        let params = ReferenceParams::sample(&mut rng);
        let img = synth_reference(&params, grid, format!("ref{i:03}"))?;
        let Value::Object(meta) = serde_json::to_value(&params)? else {
            unreachable!("params serialize to an object")
        };
        refs.push(img, meta)?;
    }
    refs.save_dir(&dir.join("references"))?;

    let mut designs = DesignSet::new();
    let mut rows = Vec::new();
    let mut timings = serde_json::Map::new();
    for r in refs.items() {
        let out = sweep(r, &g.levels, &g.domain, &g.topopt)?;
        for (item, meta) in out.set.iter() {
            designs.push(item.clone(), meta.clone())?;
        }
        for row in out.rows {
            timings.insert(row.id.clone(), json!(row.seconds));
            rows.push(row);
        }
    }
    designs.save_dir(&dir.join("designs"))?;
    let csv: Vec<SweepCsvRow> = rows
        .iter()
        .map(|r| SweepCsvRow {
            id: &r.id,
            reference_id: &r.reference_id,
            lambda: r.lambda,
            shear_ratio: r.shear_ratio,
            vol_frac: r.vol_frac,
            target_fraction: r.target_fraction,
            status: &r.status,
            compliance: r.compliance,
            l1_to_reference: r.l1_to_reference,
            l1_design_normalized: r.l1_design_normalized,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect();
    write_csv_rows(&dir.join("sweep.csv"), &csv)?;
    write_json(&dir.join("timings.json"), &timings)
}

fn reduce(cfg: &PipelineConfig, ws: &Workspace, dir: &Path) -> Result<()> {
    let r = &cfg.reduce;
    let mut all = DesignSet::new();
    if cfg.generate.include_references {
        for (item, meta) in ws.references()?.iter() {
            all.push(item.clone(), meta.clone())?;
        }
    }
    for (item, meta) in ws.generated()?.iter() {
        all.push(item.clone(), meta.clone())?;
    }
    let corpus = deduplicate(&all, r.dedup_threshold)?;
    if corpus.len() < 2 {
        return Err(Error::validation(format!(
            "only {} distinct designs after deduplication; widen the sweep",
            corpus.len()
        )));
    }
    corpus.save_dir(&dir.join("corpus"))?;
    let seed = cfg.seed_for(r.train.seed);
    let training = augment_rotations(&corpus, r.rotation_copies, seed)?;
    let tc = TrainConfig {
        seed,
        ..r.train.clone()
    };
    let (model, report) = autoenc::train(&training, &r.autoencoder, &tc)?;
    model.save(&dir.join("autoencoder.json"))?;
    report.write_csv(&dir.join("curve.csv"))?;
    let refs: Vec<&DesignImage> = corpus.items().iter().collect();
    let latents: Vec<LatentRow> = model
        .encode_batch(&refs)?
        .into_iter()
        .zip(corpus.items())
        .map(|(z, img)| LatentRow {
            id: img.id().to_string(),
            z: z.z,
        })
        .collect();
    write_json(&dir.join("latents.json"), &latents)
}

fn doe(cfg: &PipelineConfig, ws: &Workspace, dir: &Path) -> Result<()> {
    let plan = &cfg.doe;
    let corpus = ws.corpus()?;
    let z: Vec<Vec<f64>> = ws.latents()?.into_iter().map(|r| r.z).collect();
    let gauss = fit_latent_gaussian(&z)?;
    let seed = cfg.seed_for(plan.seed);
    let samples = lhs_normal(plan.n_samples, &gauss, seed, false);
    let (set, sample_to_design) = if plan.snap {
        let snapped = snap_to_nearest(&samples, &z, &corpus)?;
        let mut set = snapped.set;
        let mut selected = snapped.selected;
        if plan.filter_threshold > 0.0 {
            let zs: Vec<Vec<f64>> = selected.iter().map(|&i| z[i].clone()).collect();
            let kept = filter_similar(&zs, plan.filter_threshold);
            set = set.select(&kept)?;
            selected = kept.iter().map(|&k| selected[k]).collect();
        }
        let ids: Vec<String> = snapped
            .sample_to_design
            .iter()
            .map(|&i| corpus.items()[i].id().to_string())
            .collect();
        let _ = selected;
        (set, ids)
    } else {
        return Err(Error::validation(
            "doe.snap = false would require decoded designs; only snapped plans are supported by the pipeline",
        ));
    };
    set.save_dir(&dir.join("selected"))?;
    let norm = Normalizer::fit(&z)?;
    let sel_z: Vec<Vec<f64>> = set
        .items()
        .iter()
        .map(|img| z[corpus.position(img.id()).expect("selected from corpus")].clone())
        .collect();
    let coverage = if sel_z.len() >= 2 { Some(coverage_metric(&sel_z, &norm)?) } else { None };
    write_json(
        &dir.join("plan.json"),
        &json!({
            "n_samples": plan.n_samples,
            "seed": seed,
            "samples": samples,
            "sample_to_design": sample_to_design,
            "selected": set.items().iter().map(|i| i.id()).collect::<Vec<_>>(),
            "coverage": coverage,
        }),
    )
}

fn sections(cfg: &PipelineConfig) -> Result<(CrossSection, CrossSection)> {
    let b = &cfg.build3d;
    let spoke = match &b.spoke_section {
        Some(p) => CrossSection::read_csv(p, SectionKind::Spoke)?,
        None => CrossSection::default_spoke(),
    };
    let rim = match &b.rim_section {
        Some(p) => CrossSection::read_csv(p, SectionKind::Rim)?,
        None => CrossSection::default_rim(),
    };
    Ok((spoke, rim))
}

fn build_one(cfg: &PipelineConfig, sketch: &ContourSet) -> Result<(VoxelSolid, crate::solid::BuildReport)> {
    let (spoke, rim) = sections(cfg)?;
    let (solid, report) = build_wheel(sketch, &spoke, &rim, &cfg.build3d.wheel)?;
    if !report.connected {
        return Err(Error::Structural(format!(
            "wheel solid has {} connected components",
            report.components
        )));
    }
    Ok((solid, report))
}

fn build3d(cfg: &PipelineConfig, ws: &Workspace, dir: &Path) -> Result<()> {
    let selected = ws.selected()?;
    sections(cfg)?;
    let mut index = Vec::new();
    for img in selected.items() {
        let sub = dir.join(img.id());
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let attempt = || -> Result<()> {
            let (sketch, _) = extract_contours(img, &cfg.build3d.contour)?;
            sketch.write_csv(&sub.join("contours.csv"))?;
            let (solid, report) = build_one(cfg, &sketch)?;
            write_json(&sub.join("build.json"), &report)?;
            if cfg.build3d.write_stl {
                crate::util::write_atomic(&sub.join("mesh.stl"), &export_mesh(&solid)?.to_stl_bytes())?;
            }
            Ok(())
        };
        let status = match attempt() {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("failed: {e}"),
        };
        index.push(ItemStatus {
            id: img.id().to_string(),
            status,
        });
    }
    write_json(&dir.join("index.json"), &index)
}

fn simulate(cfg: &PipelineConfig, ws: &Workspace, dir: &Path) -> Result<()> {
    let mut index = Vec::new();
    let mut labels = Vec::new();
    for b in ws.builds()?.into_iter().filter(ItemStatus::ok) {
        let attempt = || -> Result<LabelRow> {
            let sketch = ContourSet::read_csv(&ws.design_dir(&b.id).join("contours.csv"), &b.id)?;
            let (solid, _) = build_one(cfg, &sketch)?;
            let res = analyze_solid(&solid, cfg.simulate.material, &cfg.simulate.modal)?;
            write_json(&dir.join(format!("{}.json", b.id)), &res)?;
            Ok(LabelRow {
                id: b.id.clone(),
                frequency_hz: res.lateral_frequency_hz,
                mass_kg: res.mass_kg,
                lateral_index: res.lateral_index,
                n_dofs: res.n_dofs,
            })
        };
        let status = match attempt() {
            Ok(row) => {
                labels.push(row);
                "ok".to_string()
            }
            Err(e) => format!("failed: {e}"),
        };
        index.push(ItemStatus { id: b.id, status });
    }
    if labels.is_empty() {
        return Err(Error::validation("no design could be simulated; see the build3d index"));
    }
    write_json(&dir.join("index.json"), &index)?;
    write_csv_rows(&dir.join("labels.csv"), &labels)
}

#[derive(Serialize)]
struct SplitRow<'a> {
    id: &'a str,
    split: Split,
}

fn train(cfg: &PipelineConfig, ws: &Workspace, dir: &Path) -> Result<()> {
    let t = &cfg.train;
    let selected = ws.selected()?;
    let mut items = Vec::new();
    for row in ws.labels()? {
        let (img, _) = selected
            .get(&row.id)
            .ok_or_else(|| Error::validation(format!("labeled design `{}` is not in the DOE selection", row.id)))?;
        items.push(LabeledItem::new(img.clone(), row.frequency_hz, row.mass_kg));
    }
    let mut set = LabeledSet::new(items)?;
    set.assign_splits(t.val_fraction, t.test_fraction, cfg.seed_for(t.split_seed))?;
    let splits: Vec<SplitRow> = set
        .items()
        .iter()
        .map(|i| SplitRow {
            id: i.image.id(),
            split: i.split,
        })
        .collect();
    write_csv_rows(&dir.join("splits.csv"), &splits)?;
    let aug = augment_labeled(&set);
    let sc = crate::surrogate::SurrogateConfig {
        seed: cfg.seed_for(t.surrogate.seed),
        ..t.surrogate.clone()
    };
    let encoder = ws.autoencoder()?;
    let (ensemble, report) = train_ensemble(&encoder, &aug, &sc)?;
    ensemble.save(&dir.join("ensemble.json"))?;
    let curves = dir.join("curves");
    std::fs::create_dir_all(&curves).map_err(|e| Error::io(&curves, e))?;
    for (k, r) in report.frequency.iter().enumerate() {
        r.write_csv(&curves.join(format!("frequency_{k}.csv")))?;
    }
    for (k, r) in report.mass.iter().enumerate() {
        r.write_csv(&curves.join(format!("mass_{k}.csv")))?;
    }
    let split = [Split::Test, Split::Val, Split::Train]
        .into_iter()
        .find(|&s| !aug.split(s).is_empty())
        .expect("nonempty labeled set");
    let eval = evaluate(&ensemble, &aug, split)?;
    eval.write_json(&dir.join("evaluation.json"))?;
    eval.write_csv(&dir.join("errors.csv"))
}

fn explain(cfg: &PipelineConfig, ws: &Workspace, dir: &Path) -> Result<()> {
    let e = &cfg.explain;
    let corpus = ws.corpus()?;
    let latents = ws.latents()?;
    let ensemble = ws.ensemble()?;
    let z: Vec<Vec<f64>> = latents.iter().map(|r| r.z.clone()).collect();
    let n = z.len();
    let images: Vec<&DesignImage> = corpus.items().iter().collect();
    let preds = ensemble.predict_batch(&images)?;

    let kseed = cfg.seed_for(e.kmeans_seed);
    let k = e.k_clusters.min(n);
    let clusters = kmeans(&z, k, kseed, 300)?;
    let ks: Vec<usize> = (1..=(k + 5).min(n)).collect();
    let elbow = elbow_curve(&z, &ks, kseed, 5)?;
    let freqs: Vec<f64> = preds.iter().map(|p| p.frequency_hz).collect();
    let mut distinct = freqs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let groups = frequency_groups(&freqs, e.k_frequency.min(distinct.len()), kseed)?;

    let embedding = match e.embedding {
        EmbeddingKind::Pca => pca_2d(&z)?,
        EmbeddingKind::Tsne => {
            let perplexity = e.tsne.perplexity.min(n as f64 / 3.0);
            if perplexity < 5.0 {
                pca_2d(&z)?
            } else {
                tsne(
                    &z,
                    &TsneConfig {
                        perplexity,
                        seed: cfg.seed_for(e.tsne.seed),
                        ..e.tsne.clone()
                    },
                )?
            }
        }
    };

    let candidates: Vec<Candidate> = corpus
        .items()
        .iter()
        .zip(&preds)
        .map(|(img, p)| Candidate {
            id: img.id().to_string(),
            prediction: *p,
        })
        .collect();
    let ranked = rank_by_stiffness(&candidates);
    let mut rank = std::collections::HashMap::new();
    for r in &ranked {
        rank.insert(r.id.as_str(), r.rank);
    }
    let labels: std::collections::HashMap<String, SimulatedLabels> = ws
        .labels()
        .unwrap_or_default()
        .into_iter()
        .map(|l| {
            (
                l.id,
                SimulatedLabels {
                    frequency_hz: l.frequency_hz,
                    mass_kg: l.mass_kg,
                },
            )
        })
        .collect();
    let records: Vec<CandidateRecord> = (0..n)
        .map(|i| {
            let id = corpus.items()[i].id().to_string();
            let mut r = CandidateRecord {
                rank: rank[id.as_str()],
                simulated: labels.get(&id).copied(),
                id,
                frequency_hz: preds[i].frequency_hz,
                mass_kg: preds[i].mass_kg,
                stiffness: 0.0,
                u: embedding.coords[i][0],
                v: embedding.coords[i][1],
                cluster: clusters.labels[i],
                frequency_group: groups.labels[i],
                shortlisted: false,
            };
            r.refresh();
            r
        })
        .collect();
    write_json(&dir.join("candidates.json"), &records)?;
    let rows: Vec<EmbeddingRow> = records
        .iter()
        .map(|r| EmbeddingRow {
            id: r.id.clone(),
            u: r.u,
            v: r.v,
            cluster: r.cluster,
            frequency: r.frequency_hz,
        })
        .collect();
    write_embedding_csv(&dir.join("embedding.csv"), &rows)?;
    write_json(
        &dir.join("clusters.json"),
        &json!({ "k": k, "sse": clusters.sse, "sse_history": clusters.sse_history, "elbow": elbow }),
    )?;
    write_json(&dir.join("frequency_groups.json"), &groups)?;
    let meta = MapMeta {
        latent_dim: z[0].len(),
        pca: Pca::fit(&z, e.pca_components)?,
        embedding_method: format!("{:?}", embedding.method).to_lowercase(),
        frequency_ranges: groups.ranges.clone(),
    };
    write_json(&dir.join("map_meta.json"), &meta)?;

    let gdir = dir.join("gradcam");
    std::fs::create_dir_all(&gdir).map_err(|e| Error::io(&gdir, e))?;
    for r in ranked.iter().take(e.gradcam_top) {
        let (img, _) = corpus.get(&r.id).expect("ranked ids come from the corpus");
        let g = grad_cam_ensemble(&ensemble, Target::Frequency, img)?;
        g.upsampled
            .to_gray8()
            .save(gdir.join(format!("{}_heatmap.png", r.id)))?;
        overlay(&g.upsampled, img, e.overlay_alpha)?.save(gdir.join(format!("{}_overlay.png", r.id)))?;
    }
    write_png_thumbs(&corpus, &dir.join("designs"))?;
    render_report(&corpus, &records, &meta, &gdir, &dir.join("report"))?;
    Ok(())
}

fn write_png_thumbs(corpus: &DesignSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for img in corpus.items() {
        write_png(img, &dir.join(format!("{}.png", img.id())))?;
    }
    Ok(())
}

/// Reads the DOE plan written by the `doe` stage.
pub fn read_plan(ws: &Workspace) -> Result<Value> {
    read_json(&ws.stage_dir(Stage::Doe).join("plan.json"))
}

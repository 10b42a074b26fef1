//! Labels a handful of random wheels with the modal solver, then trains a
//! from-scratch CNN, a transfer-learned regressor and an ensemble on them.
//! Labelling dominates the run time (about 15 s per wheel).
//!
//! cargo run --example surrogate_ensemble -- [n_wheels]

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wheelforge::autoenc::{train, AutoencoderSpec, TrainConfig};
use wheelforge::contour::{extract_contours, ContourConfig};
use wheelforge::designspace::{augment_rotations, synth_reference, DesignSet, ReferenceParams};
use wheelforge::modal::{analyze_solid, Material, ModalSettings};
use wheelforge::solid::{build_wheel, CrossSection, WheelBuildSpec};
use wheelforge::surrogate::{
    augment_labeled, evaluate_model, rank_by_stiffness, train_baseline, train_ensemble, Candidate, LabeledItem,
    LabeledSet, Split, SurrogateConfig, Target,
};

fn main() -> wheelforge::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(12);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = WheelBuildSpec {
        voxel_pitch_mm: 6.0,
        ..WheelBuildSpec::default()
    };

    let t = Instant::now();
    let mut items = Vec::new();
    let mut refs = Vec::new();
    while items.len() < n {
        let params = ReferenceParams::sample(&mut rng);
        let id = format!("w{:02}", items.len());
        let sketch_src = synth_reference(&params, 64, &id)?;
        let (sketch, _) = extract_contours(&sketch_src, &ContourConfig::default())?;
        let (solid, report) =
            build_wheel(&sketch, &CrossSection::default_spoke(), &CrossSection::default_rim(), &spec)?;
        if !report.connected {
            continue;
        }
        let modal = analyze_solid(&solid, Material::default(), &ModalSettings::default())?;
        println!("{id}: {:.1} Hz, {:.2} kg", modal.lateral_frequency_hz, modal.mass_kg);
        let img = synth_reference(&params, 32, &id)?;
        refs.push(img.clone());
        items.push(LabeledItem::new(img, modal.lateral_frequency_hz, modal.mass_kg));
    }
    println!("labelled {n} wheels in {:.0}s", t.elapsed().as_secs_f64());

    let ae_spec = AutoencoderSpec {
        input_size: 32,
        channels: [8, 8, 16, 16, 4],
        dropout: 0.1,
    };
    let corpus = augment_rotations(&DesignSet::from_items(refs)?, 8, 1)?;
    let ae_cfg = TrainConfig {
        lr: 2e-3,
        batch_size: 32,
        epochs: 10,
        seed: 2,
        val_fraction: 0.2,
    };
    let (encoder, _) = train(&corpus, &ae_spec, &ae_cfg)?;

    let mut set = LabeledSet::new(items)?;
    set.assign_splits(0.2, 0.2, 4)?;
    let set = augment_labeled(&set);
    let cfg = SurrogateConfig {
        batch_size: 32,
        max_epochs: 30,
        head_max_width: 64,
        n_frequency: 3,
        n_mass: 1,
        ..SurrogateConfig::default()
    };
    let (cnn, _) = train_baseline(&set, &ae_spec, Target::Frequency, &cfg)?;
    let (ensemble, _) = train_ensemble(&encoder, &set, &cfg)?;
    let tl = &ensemble.members(Target::Frequency)[0];
    for split in [Split::Val, Split::Test] {
        println!(
            "{split:?} frequency RMSE: CNN {:.1} Hz, transfer {:.1} Hz",
            evaluate_model(&cnn, &set, split)?.rmse,
            evaluate_model(tl, &set, split)?.rmse
        );
    }

    let test = set.split(Split::Test);
    let imgs: Vec<_> = test.iter().map(|i| &i.image).collect();
    let candidates: Vec<Candidate> = ensemble
        .predict_batch(&imgs)?
        .into_iter()
        .zip(&test)
        .map(|(prediction, item)| Candidate {
            id: item.image.id().to_string(),
            prediction,
        })
        .collect();
    for r in rank_by_stiffness(&candidates).iter().take(5) {
        println!(
            "#{} {}: {:.1} Hz, {:.2} kg, k = {:.3e} N/m",
            r.rank, r.id, r.frequency_hz, r.mass_kg, r.stiffness
        );
    }
    Ok(())
}

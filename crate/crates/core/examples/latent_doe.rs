//! Trains a small convolutional autoencoder on synthetic reference wheels,
//! then picks a design-of-experiments plan by Latin hypercube sampling in the
//! latent space and snapping each sample to the closest real design.
//!
//! cargo run --example latent_doe -- [n_refs] [epochs] [n_samples]

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wheelforge::autoenc::{reconstruction_report, train, AutoencoderSpec, TrainConfig};
use wheelforge::designspace::{augment_rotations, synth_reference, DesignSet, ReferenceParams};
use wheelforge::doe::{coverage_metric, fit_latent_gaussian, lhs_normal, snap_to_nearest, Normalizer};

fn main() -> wheelforge::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n_refs = args.first().copied().unwrap_or(40);
    let epochs = args.get(1).copied().unwrap_or(10);
    let n_samples = args.get(2).copied().unwrap_or(20);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let refs = (0..n_refs)
        .map(|i| synth_reference(&ReferenceParams::sample(&mut rng), 32, format!("ref{i:03}")))
        .collect::<wheelforge::Result<Vec<_>>>()?;
    let corpus = augment_rotations(&DesignSet::from_items(refs)?, 4, 2)?;

    let spec = AutoencoderSpec {
        input_size: 32,
        channels: [8, 8, 16, 16, 4],
        dropout: 0.1,
    };
    let cfg = TrainConfig {
        lr: 2e-3,
        batch_size: 32,
        epochs,
        seed: 3,
        val_fraction: 0.2,
    };
    let t = Instant::now();
    let (model, report) = train(&corpus, &spec, &cfg)?;
    println!(
        "autoencoder: {} images, {} params, latent dim {}, {:.1}s",
        corpus.len(),
        model.param_count(),
        model.latent_dim(),
        t.elapsed().as_secs_f64()
    );
    for (e, (tr, va)) in report.train_loss.iter().zip(&report.val_loss).enumerate() {
        println!("  epoch {:>2}  train {tr:.5}  val {va:.5}", e + 1);
    }
    let rec = reconstruction_report(&model, &corpus)?;
    println!("reconstruction MSE {:.5}", rec.mean);

    let imgs: Vec<_> = corpus.items().iter().collect();
    let cloud: Vec<Vec<f64>> = model.encode_batch(&imgs)?.into_iter().map(|z| z.z).collect();
    let gaussian = fit_latent_gaussian(&cloud)?;
    let samples = lhs_normal(n_samples, &gaussian, 5, false);
    let snapped = snap_to_nearest(&samples, &cloud, &corpus)?;
    let norm = Normalizer::fit(&cloud)?;
    let rows: Vec<Vec<f64>> = snapped.selected.iter().map(|&i| cloud[i].clone()).collect();
    println!(
        "plan: {} samples snapped to {} distinct designs, coverage {:.3}",
        n_samples,
        snapped.selected.len(),
        coverage_metric(&rows, &norm)?
    );
    for (img, _) in snapped.set.iter() {
        println!("  {}", img.id());
    }
    Ok(())
}

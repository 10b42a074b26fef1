//! Builds a design map from autoencoder latents: k-means clusters with an
//! elbow curve, a t-SNE layout, and Grad-CAM heatmaps of a small regressor
//! trained to predict material fraction. Writes PNGs to the output directory.
//!
//! cargo run --example design_map -- [out_dir]

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wheelforge::autoenc::{train, AutoencoderSpec, TrainConfig};
use wheelforge::designspace::{synth_reference, DesignSet, ReferenceParams};
use wheelforge::insight::{elbow_curve, elbow_k, grad_cam, kmeans, overlay, tsne, TsneConfig};
use wheelforge::surrogate::{train_transfer, LabeledItem, LabeledSet, SurrogateConfig, Target};

fn main() -> wheelforge::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "design-map".into()));
    std::fs::create_dir_all(&out).map_err(|e| wheelforge::Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let refs = (0..90)
        .map(|i| synth_reference(&ReferenceParams::sample(&mut rng), 32, format!("d{i:02}")))
        .collect::<wheelforge::Result<Vec<_>>>()?;
    let set = DesignSet::from_items(refs.clone())?;
    let spec = AutoencoderSpec {
        input_size: 32,
        channels: [8, 8, 16, 16, 4],
        dropout: 0.0,
    };
    let cfg = TrainConfig {
        lr: 2e-3,
        batch_size: 16,
        epochs: 12,
        seed: 1,
        val_fraction: 0.2,
    };
    let (ae, _) = train(&set, &spec, &cfg)?;
    let imgs: Vec<_> = refs.iter().collect();
    let z: Vec<Vec<f64>> = ae.encode_batch(&imgs)?.into_iter().map(|l| l.z).collect();

    let curve = elbow_curve(&z, &(1..=10).collect::<Vec<_>>(), 0, 3)?;
    for (k, sse) in &curve {
        println!("k = {k:>2}  SSE {sse:.3}");
    }
    let k = elbow_k(&curve).unwrap_or(4);
    let clusters = kmeans(&z, k, 0, 100)?;
    let emb = tsne(
        &z,
        &TsneConfig {
            perplexity: 20.0,
            seed: 2,
            ..TsneConfig::default()
        },
    )?;
    println!("elbow at k = {k}");
    for c in 0..k {
        let members: Vec<usize> = (0..z.len()).filter(|&i| clusters.labels[i] == c).collect();
        let (sx, sy) = members
            .iter()
            .fold((0.0, 0.0), |(x, y), &i| (x + emb.coords[i][0], y + emb.coords[i][1]));
        let m = members.len().max(1) as f64;
        println!("  cluster {c}: {:>2} designs, t-SNE centre ({:.1}, {:.1})", members.len(), sx / m, sy / m);
    }

    let items = refs
        .iter()
        .map(|img| LabeledItem::new(img.clone(), img.material_fraction(), 1.0))
        .collect();
    let mut labeled = LabeledSet::new(items)?;
    labeled.assign_splits(0.2, 0.0, 3)?;
    let scfg = SurrogateConfig {
        batch_size: 16,
        max_epochs: 20,
        head_max_width: 32,
        ..SurrogateConfig::default()
    };
    let (model, _) = train_transfer(&ae, &labeled, Target::Frequency, &scfg)?;
    for img in refs.iter().take(4) {
        let cam = grad_cam(&model, img)?;
        let path = out.join(format!("{}_gradcam.png", img.id()));
        overlay(&cam.upsampled, img, 0.5)?.save(&path).map_err(|e| wheelforge::Error::Io {
            path: path.clone(),
            source: std::io::Error::other(e),
        })?;
        println!("{}: fraction {:.3}, predicted {:.3}, {}", img.id(), img.material_fraction(), model.predict(img)?, path.display());
    }
    Ok(())
}

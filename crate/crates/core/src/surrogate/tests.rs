use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autoenc::{AutoencoderModel, AutoencoderSpec};
use crate::designspace::{DesignImage, Provenance};
use crate::error::Error;

fn tiny_spec() -> AutoencoderSpec {
    AutoencoderSpec {
        input_size: 32,
        channels: [4, 4, 4, 4, 2],
        dropout: 0.0,
    }
}

fn disc(id: &str, r: f64) -> DesignImage {
    DesignImage::from_fn(id, Provenance::Test, 32, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - 16.0, y as f64 + 0.5 - 16.0);
        f64::from((dx * dx + dy * dy).sqrt() < r)
    })
    .unwrap()
}

fn disc_set(n: usize) -> LabeledSet {
    let items = (0..n)
        .map(|i| {
            let r = 4.0 + 10.0 * i as f64 / (n - 1).max(1) as f64;
            LabeledItem::new(disc(&format!("d{i}"), r), 1000.0 + 40.0 * r, 5.0 + 0.1 * r * r)
        })
        .collect();
    LabeledSet::new(items).unwrap()
}

fn quick_cfg() -> SurrogateConfig {
    SurrogateConfig {
        batch_size: 8,
        max_epochs: 20,
        head_max_width: 32,
        ..SurrogateConfig::default()
    }
}

#[test]
fn defaults_follow_published_settings() {
    let c = SurrogateConfig::default();
    assert_eq!((c.lr, c.decay, c.batch_size), (0.002, 0.001, 256));
    assert_eq!((c.n_frequency, c.n_mass), (9, 5));
    assert!(!c.freeze_backbone);
}

#[test]
fn one_item_expands_to_ten_copies() {
    let set = disc_set(1);
    let aug = augment_labeled(&set);
    assert_eq!(aug.len(), 10);
    let src = &set.items()[0];
    assert_eq!(aug.items()[0].image.pixels(), src.image.pixels());
    let mut ids: Vec<&str> = aug.items().iter().map(|i| i.image.id()).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), 10);
    for it in aug.items() {
        assert_eq!((it.frequency_hz, it.mass_kg), (src.frequency_hz, src.mass_kg));
        assert_eq!(it.source_id, "d0");
    }
}

#[test]
fn test_items_are_not_augmented_and_splits_follow_sources() {
    let mut set = disc_set(20);
    set.assign_splits(0.2, 0.1, 3).unwrap();
    let n_test = set.split(Split::Test).len();
    assert_eq!(n_test, 2);
    assert_eq!(set.split(Split::Val).len(), 4);
    let aug = augment_labeled(&set);
    assert_eq!(aug.len(), 18 * 10 + 2);
    let mut aug2 = aug.clone();
    aug2.assign_splits(0.3, 0.2, 9).unwrap();
    for a in aug2.items() {
        for b in aug2.items() {
            if a.source_id == b.source_id {
                assert_eq!(a.split, b.split);
            }
        }
    }
}

#[test]
fn small_sets_keep_two_training_sources() {
    let mut set = disc_set(3);
    set.assign_splits(0.25, 0.25, 0).unwrap();
    assert_eq!(set.split(Split::Train).len(), 2);
    assert_eq!(set.split(Split::Test).len(), 1);
    assert!(set.split(Split::Val).is_empty());
}

#[test]
fn labels_must_be_positive() {
    let bad = LabeledItem::new(disc("x", 5.0), 0.0, 1.0);
    assert!(matches!(LabeledSet::new(vec![bad]), Err(Error::Validation(_))));
    let bad = LabeledItem::new(disc("x", 5.0), 1.0, f64::NAN);
    assert!(matches!(LabeledSet::new(vec![bad]), Err(Error::Validation(_))));
}

#[test]
fn scaler_maps_range_to_unit_interval() {
    let s = MinMaxScaler::fit(&[3.0, 7.0, 5.0]).unwrap();
    assert_eq!(s.scale(3.0), 0.0);
    assert_eq!(s.scale(7.0), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let y: f64 = rng.random_range(-1e4..1e4);
        assert!((s.unscale(s.scale(y)) - y).abs() <= 1e-12 * y.abs().max(1.0));
    }
    assert!(matches!(MinMaxScaler::fit(&[2.0, 2.0]), Err(Error::Validation(_))));
    assert!(matches!(MinMaxScaler::fit(&[]), Err(Error::Validation(_))));
}

#[test]
fn head_has_seven_dense_layers() {
    assert_eq!(head_widths(512, 512), vec![512, 256, 128, 64, 32, 16, 1]);
    assert_eq!(head_widths(8, 512), vec![16, 8, 8, 8, 8, 8, 1]);
    let m = RegressorModel::baseline(Target::Mass, &tiny_spec(), 512, 0).unwrap();
    assert_eq!(m.head_depth(), HEAD_DEPTH);
    assert!(matches!(m.head.layers.last(), Some(crate::nn::Layer::Dense { out_features: 1, .. })));
}

#[test]
fn untrained_model_refuses_to_predict() {
    let m = RegressorModel::baseline(Target::Frequency, &tiny_spec(), 32, 0).unwrap();
    assert!(matches!(m.predict(&disc("a", 5.0)), Err(Error::State(_))));
}

#[test]
fn incompatible_encoder_is_rejected() {
    let enc = AutoencoderModel::new(
        AutoencoderSpec {
            input_size: 64,
            ..tiny_spec()
        },
        0,
    )
    .unwrap();
    let set = disc_set(4);
    let r = train_transfer(&enc, &set, Target::Mass, &quick_cfg());
    assert!(matches!(r, Err(Error::Validation(_))));
}

#[test]
fn overfits_ten_items() {
    let set = disc_set(10);
    let cfg = SurrogateConfig {
        batch_size: 10,
        max_epochs: 2000,
        patience: 2000,
        decay: 0.0,
        head_max_width: 64,
        ..SurrogateConfig::default()
    };
    let spec = AutoencoderSpec {
        channels: [8, 8, 8, 8, 8],
        ..tiny_spec()
    };
    let (m, report) = train_baseline(&set, &spec, Target::Frequency, &cfg).unwrap();
    let range = m.scaler.unwrap().range();
    let metrics = evaluate_model(&m, &set, Split::Train).unwrap();
    assert!(metrics.rmse < 0.01 * range, "rmse {} range {range}", metrics.rmse);
    assert_eq!(report.val_rmse.len(), report.train_loss.len());
    for it in set.items() {
        let p = m.predict(&it.image).unwrap();
        assert!((p - it.frequency_hz).abs() < 0.01 * it.frequency_hz);
    }
}

#[test]
fn training_is_reproducible() {
    let mut set = disc_set(12);
    set.assign_splits(0.25, 0.0, 0).unwrap();
    let cfg = SurrogateConfig {
        max_epochs: 5,
        ..quick_cfg()
    };
    let a = train_baseline(&set, &tiny_spec(), Target::Mass, &cfg).unwrap();
    let b = train_baseline(&set, &tiny_spec(), Target::Mass, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn early_stopping_halts_after_patience() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let items = (0..16)
        .map(|i| {
            let mut it = LabeledItem::new(disc(&format!("n{i}"), rng.random_range(3.0..14.0)), 0.0, 0.0);
            it.frequency_hz = rng.random_range(900.0..1500.0);
            it.mass_kg = rng.random_range(5.0..25.0);
            it
        })
        .collect();
    let mut set = LabeledSet::new(items).unwrap();
    set.assign_splits(0.5, 0.0, 1).unwrap();
    let cfg = SurrogateConfig {
        max_epochs: 400,
        patience: 3,
        ..quick_cfg()
    };
    let (_, r) = train_baseline(&set, &tiny_spec(), Target::Frequency, &cfg).unwrap();
    assert!(r.stopped_early);
    assert_eq!(r.train_loss.len(), r.best_epoch + cfg.patience + 1);
    assert!(r.train_loss.len() < cfg.max_epochs);
    let best = r.val_loss[r.best_epoch];
    assert!(r.val_loss.iter().all(|&v| v >= best));
}

#[test]
fn informative_encoder_beats_fresh_backbone() {
    let spec = tiny_spec();
    let enc = AutoencoderModel::new(spec.clone(), 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let images: Vec<DesignImage> = (0..40)
        .map(|i| {
            DesignImage::from_fn(format!("t{i}"), Provenance::Test, 32, |_, _| rng.random::<f64>()).unwrap()
        })
        .collect();
    let refs: Vec<&DesignImage> = images.iter().collect();
    let z = enc.encode_batch(&refs).unwrap();
    let w: Vec<f64> = (0..enc.latent_dim()).map(|k| 1.0 + 0.25 * k as f64).collect();
    let items = images
        .into_iter()
        .zip(&z)
        .map(|(img, z)| {
            let s: f64 = z.z.iter().zip(&w).map(|(a, b)| a * b).sum();
            LabeledItem::new(img, 1000.0 + 100.0 * s, 10.0 + s)
        })
        .collect();
    let mut set = LabeledSet::new(items).unwrap();
    set.assign_splits(0.25, 0.0, 4).unwrap();
    let cfg = SurrogateConfig {
        max_epochs: 40,
        patience: 40,
        ..quick_cfg()
    };
    let (tl, _) = train_transfer(&enc, &set, Target::Frequency, &cfg).unwrap();
    let (cnn, _) = train_baseline(&set, &spec, Target::Frequency, &cfg).unwrap();
    let tl_rmse = evaluate_model(&tl, &set, Split::Val).unwrap().rmse;
    let cnn_rmse = evaluate_model(&cnn, &set, Split::Val).unwrap().rmse;
    assert!(tl_rmse < cnn_rmse, "transfer {tl_rmse} vs baseline {cnn_rmse}");
}

fn small_ensemble(n_f: usize, n_m: usize) -> (AutoencoderModel, LabeledSet, SurrogateConfig, EnsembleModel) {
    let enc = AutoencoderModel::new(tiny_spec(), 1).unwrap();
    let mut set = disc_set(12);
    set.assign_splits(0.25, 0.25, 2).unwrap();
    let cfg = SurrogateConfig {
        max_epochs: 6,
        n_frequency: n_f,
        n_mass: n_m,
        ..quick_cfg()
    };
    let (e, report) = train_ensemble(&enc, &set, &cfg).unwrap();
    assert_eq!((report.frequency.len(), report.mass.len()), (n_f, n_m));
    (enc, set, cfg, e)
}

#[test]
fn single_member_ensemble_equals_single_model() {
    let (enc, set, cfg, e) = small_ensemble(1, 1);
    let (single, _) = train_transfer(&enc, &set, Target::Frequency, &cfg).unwrap();
    for it in set.items() {
        assert_eq!(e.predict(&it.image).unwrap().frequency_hz, single.predict(&it.image).unwrap());
    }
}

#[test]
fn ensemble_mse_not_above_mean_member_mse() {
    let (_, set, _, e) = small_ensemble(3, 2);
    let items = set.split(Split::Test);
    let imgs: Vec<&DesignImage> = items.iter().map(|i| &i.image).collect();
    for target in [Target::Frequency, Target::Mass] {
        let y: Vec<f64> = items.iter().map(|i| i.label(target)).collect();
        let mse = |p: &[f64]| p.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
        let ens = mse(&e.predict_target(target, &imgs).unwrap());
        let members = e.members(target);
        let avg = members.iter().map(|m| mse(&m.predict_batch(&imgs).unwrap())).sum::<f64>() / members.len() as f64;
        assert!(ens <= avg * (1.0 + 1e-12), "{target:?}: {ens} > {avg}");
    }
    assert_ne!(e.frequency_members[0], e.frequency_members[1]);
}

#[test]
fn batch_prediction_matches_itemwise_and_checkpoint() {
    let (_, set, _, e) = small_ensemble(2, 1);
    let imgs: Vec<&DesignImage> = set.items().iter().map(|i| &i.image).collect();
    let batch = e.predict_batch(&imgs).unwrap();
    for (img, p) in imgs.iter().zip(&batch) {
        assert_eq!(e.predict(img).unwrap(), *p);
        assert_eq!(e.predict(img).unwrap(), *p);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.json");
    e.save(&path).unwrap();
    let back = EnsembleModel::load(&path).unwrap();
    assert_eq!(back.predict_batch(&imgs).unwrap(), batch);
    let report = evaluate(&e, &set, Split::Test).unwrap();
    assert_eq!(report.items.len(), set.split(Split::Test).len());
    report.write_csv(&dir.path().join("errors.csv")).unwrap();
    report.write_json(&dir.path().join("eval.json")).unwrap();
}

#[test]
fn hand_computed_metrics() {
    let m = metrics(&[3.0, 2.0], &[2.0, 2.0]).unwrap();
    assert!((m.rmse - 0.5f64.sqrt()).abs() < 1e-15);
    assert!((m.mape - 25.0).abs() < 1e-12);
    assert_eq!(metrics(&[1.0, 4.0], &[1.0, 4.0]).unwrap(), Metrics { rmse: 0.0, mape: 0.0 });
    assert!(matches!(metrics(&[1.0], &[0.0]), Err(Error::Validation(_))));
}

fn cand(id: &str, f: f64, m: f64) -> Candidate {
    Candidate {
        id: id.into(),
        prediction: Prediction {
            frequency_hz: f,
            mass_kg: m,
        },
    }
}

#[test]
fn ranking_by_stiffness() {
    let c = [cand("a", 1000.0, 20.0), cand("b", 1200.0, 20.0), cand("c", 1100.0, 20.0)];
    let ids: Vec<String> = rank_by_stiffness(&c).into_iter().map(|r| r.id).collect();
    assert_eq!(ids, ["b", "c", "a"]);
    let doubled: Vec<Candidate> = c.iter().map(|x| cand(&x.id, x.prediction.frequency_hz, 40.0)).collect();
    let ids2: Vec<String> = rank_by_stiffness(&doubled).into_iter().map(|r| r.id).collect();
    assert_eq!(ids, ids2);
    let ties = [cand("z", 1000.0, 20.0), cand("y", 1000.0, 20.0)];
    assert_eq!(rank_by_stiffness(&ties)[0].id, "y");
}

#[test]
fn ranking_matches_selection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c: Vec<Candidate> = (0..100)
        .map(|i| cand(&format!("w{i:03}"), rng.random_range(800.0..1600.0), rng.random_range(10.0..30.0)))
        .collect();
    let ranked = rank_by_stiffness(&c);
    let mut pool: Vec<(f64, String)> = c
        .iter()
        .map(|x| {
            let w = 2.0 * std::f64::consts::PI * x.prediction.frequency_hz;
            (w * w * x.prediction.mass_kg, x.id.clone())
        })
        .collect();
    for (k, r) in ranked.iter().enumerate() {
        let mut best = 0;
        for j in 1..pool.len() {
            if pool[j].0 > pool[best].0 || (pool[j].0 == pool[best].0 && pool[j].1 < pool[best].1) {
                best = j;
            }
        }
        let (_, id) = pool.swap_remove(best);
        assert_eq!(r.id, id);
        assert_eq!(r.rank, k + 1);
    }
}

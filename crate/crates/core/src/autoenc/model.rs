use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::designspace::{DesignImage, Provenance};
use crate::error::{Error, Result};
use crate::nn::{load_checkpoint, save_checkpoint, Layer, Sequential, Tensor};

pub const CHECKPOINT_KIND: &str = "autoencoder";

/// Architecture of the convolutional autoencoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderSpec {
    /// Input side length; must be divisible by 16.
    pub input_size: usize,
    /// Encoder channels `c1..c4` and the bottleneck channel count.
    pub channels: [usize; 5],
    pub dropout: f64,
}

impl Default for AutoencoderSpec {
    fn default() -> Self {
        Self {
            input_size: 64,
            channels: [16, 32, 64, 128, 2],
            dropout: 0.5,
        }
    }
}

impl AutoencoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_size < 16 || self.input_size % 16 != 0 {
            return Err(Error::validation(format!(
                "input_size must be a positive multiple of 16, got {}",
                self.input_size
            )));
        }
        if self.channels.contains(&0) {
            return Err(Error::validation("channel counts must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::validation("dropout must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn bottleneck_side(&self) -> usize {
        self.input_size / 16
    }

    pub fn latent_dim(&self) -> usize {
        self.channels[4] * self.bottleneck_side().pow(2)
    }
}

/// Latent code of one design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentVector {
    pub z: Vec<f64>,
}

/// Encoder (five convolutions, four max-pools) and mirrored decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub spec: AutoencoderSpec,
    pub encoder: Sequential,
    pub decoder: Sequential,
}

impl AutoencoderModel {
    pub fn new(spec: AutoencoderSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [c1, c2, c3, c4, cb] = spec.channels;
        let mut enc = Vec::new();
        let mut prev = 1;
        for c in [c1, c2, c3, c4] {
            enc.push(Layer::conv(prev, c, &mut rng));
            enc.push(Layer::Relu);
            enc.push(Layer::MaxPool2);
            prev = c;
        }
        enc.push(Layer::conv(c4, cb, &mut rng));
        enc.push(Layer::Relu);
        enc.push(Layer::Flatten);

        let s = spec.bottleneck_side();
        let mut dec = vec![
            Layer::Unflatten {
                channels: cb,
                height: s,
                width: s,
            },
            Layer::conv(cb, c4, &mut rng),
            Layer::Relu,
            Layer::Dropout { rate: spec.dropout },
        ];
        let mut prev = c4;
        for c in [c3, c2, c1] {
            dec.push(Layer::Upsample2);
            dec.push(Layer::conv(prev, c, &mut rng));
            dec.push(Layer::Relu);
            prev = c;
        }
        dec.push(Layer::Upsample2);
        dec.push(Layer::conv(c1, 1, &mut rng));
        dec.push(Layer::Sigmoid);

        Ok(Self {
            spec,
            encoder: Sequential::new(enc),
            decoder: Sequential::new(dec),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.latent_dim()
    }

    pub fn input_size(&self) -> usize {
        self.spec.input_size
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    /// Index of the last ReLU in the encoder (the bottleneck activation).
    pub fn encoder_last_relu(&self) -> usize {
        self.encoder
            .layers
            .iter()
            .rposition(|l| matches!(l, Layer::Relu))
            .expect("encoder has a ReLU")
    }

    pub fn images_to_tensor(&self, images: &[&DesignImage]) -> Result<Tensor> {
        let s = self.spec.input_size;
        for img in images {
            if img.size() != s {
                return Err(Error::dimension(format!("{s}x{s} image"), format!("{0}x{0}", img.size())));
            }
        }
        Tensor::stack(images.iter().map(|i| i.pixels()), &[1, s, s])
    }

    pub fn encode(&self, image: &DesignImage) -> Result<LatentVector> {
        Ok(self.encode_batch(&[image])?.remove(0))
    }

    pub fn encode_batch(&self, images: &[&DesignImage]) -> Result<Vec<LatentVector>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(32) {
            let t = self.encoder.predict(&self.images_to_tensor(chunk)?)?;
            for i in 0..t.batch() {
                out.push(LatentVector { z: t.item(i).to_vec() });
            }
        }
        Ok(out)
    }

    pub fn decode(&self, z: &LatentVector, id: impl Into<String>) -> Result<DesignImage> {
        if z.z.len() != self.latent_dim() {
            return Err(Error::dimension(self.latent_dim(), z.z.len()));
        }
        if z.z.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("latent vector has non-finite entries"));
        }
        let t = self
            .decoder
            .predict(&Tensor::new(vec![1, self.latent_dim()], z.z.clone())?)?;
        DesignImage::new(id, Provenance::Decoded, self.spec.input_size, t.into_data())
    }

    pub fn reconstruct(&self, image: &DesignImage) -> Result<DesignImage> {
        self.decode(&self.encode(image)?, format!("{}_recon", image.id()))
    }

    /// Encoder followed by decoder as one network (dropout inactive at inference).
    pub fn as_sequential(&self) -> Sequential {
        let mut layers = self.encoder.layers.clone();
        layers.extend(self.decoder.layers.iter().cloned());
        Sequential::new(layers)
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        save_checkpoint(path, CHECKPOINT_KIND, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = load_checkpoint(path, CHECKPOINT_KIND)?;
        m.spec.validate()?;
        Ok(m)
    }
}

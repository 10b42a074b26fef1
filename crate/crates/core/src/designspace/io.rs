use std::fs;
use std::path::Path;

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use super::image::{DesignImage, Provenance};
use super::set::{DesignSet, ItemMeta};
use crate::error::{Error, Result};

pub fn to_gray8(image: &DesignImage) -> GrayImage {
    let n = image.size() as u32;
    GrayImage::from_fn(n, n, |x, y| {
        Luma([(image.get(x as usize, y as usize) * 255.0).round() as u8])
    })
}

pub fn write_png(image: &DesignImage, path: &Path) -> Result<()> {
    to_gray8(image).save(path)?;
    Ok(())
}

/// PNG bytes of an 8-bit grayscale rendering.
pub fn png_bytes(image: &DesignImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    to_gray8(image).write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}

pub fn decode_png(bytes: &[u8], id: &str, provenance: Provenance) -> Result<DesignImage> {
    let img = image::load_from_memory(bytes)?.to_luma8();
    from_gray8(&img, id, provenance)
}

pub fn read_png(path: &Path, id: &str, provenance: Provenance) -> Result<DesignImage> {
    let img = image::open(path)?.to_luma8();
    from_gray8(&img, id, provenance)
}

fn from_gray8(img: &GrayImage, id: &str, provenance: Provenance) -> Result<DesignImage> {
    if img.width() != img.height() {
        return Err(Error::validation(format!(
            "design PNG must be square, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let pixels = img.pixels().map(|p| f64::from(p[0]) / 255.0).collect();
    DesignImage::new(id, provenance, img.width() as usize, pixels)
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    resolution: usize,
    items: Vec<ManifestRow>,
}

#[derive(Serialize, Deserialize)]
struct ManifestRow {
    id: String,
    provenance: Provenance,
    file: String,
    #[serde(default)]
    meta: ItemMeta,
}

impl DesignSet {
    /// Writes one PNG per item plus `manifest.json` into `dir`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut rows = Vec::with_capacity(self.len());
        for (item, meta) in self.iter() {
            let file = format!("{}.png", item.id());
            write_png(item, &dir.join(&file))?;
            rows.push(ManifestRow {
                id: item.id().to_string(),
                provenance: item.provenance(),
                file,
                meta: meta.clone(),
            });
        }
        let manifest = ManifestFile {
            resolution: self.items().first().map_or(0, DesignImage::size),
            items: rows,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: ManifestFile = serde_json::from_slice(&text)?;
        let mut set = DesignSet::new();
        for row in manifest.items {
            let img = read_png(&dir.join(&row.file), &row.id, row.provenance)?;
            set.push(img, row.meta)?;
        }
        Ok(set)
    }
}

//! Design images, geometric transforms, distances, deduplication and the
//! parametric reference-wheel generator.

mod image;
mod io;
mod reference;
mod set;
pub(crate) mod transform;

pub use self::image::{DesignImage, Provenance};
pub use io::{decode_png, png_bytes, read_png, to_gray8, write_png};
pub use reference::{synth_reference, ReferenceParams, BORE_FRAC, OUTER_RADIUS_FRAC};
pub use set::{augment_rotations, augment_rotations_with, deduplicate, DesignSet, ItemMeta};
pub use transform::{flip_horizontal, l1_distance, rotate};

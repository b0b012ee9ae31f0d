//! Synthetic chest phantoms and their on-disk dataset layout.

mod dataset;
mod netpbm;
mod phantom;

pub use dataset::{generate_dataset, load_dataset, Manifest, ManifestRow, Split, MANIFEST_FILE};
pub use netpbm::{
    decode_pgm, decode_ppm, encode_pgm, encode_ppm, read_pgm, read_pgm_gray, read_pgm_mask,
    read_ppm, write_pgm, write_ppm, Raster,
};
pub use phantom::{generate_phantom, Label, Sample, PHANTOM_NOISE_STD};

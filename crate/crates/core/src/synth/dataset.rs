//! On-disk phantom datasets.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.csv                sample_id,split,label,image_path,lung_path,inf_path
//! images/<sample_id>.pgm
//! lung/<sample_id>.pgm        0 / 255
//! infection/<sample_id>.pgm   0 / 255
//! ```
//!
//! Paths in the manifest are relative to the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::netpbm::{read_pgm_gray, read_pgm_mask, write_pgm};
use super::phantom::{generate_phantom, Label, Sample};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub sample_id: String,
    pub split: Split,
    pub label: usize,
    pub image_path: String,
    pub lung_path: String,
    pub inf_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory the row paths are relative to.
    pub root: PathBuf,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let rows = reader
            .deserialize()
            .collect::<std::result::Result<Vec<ManifestRow>, _>>()?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let manifest = Self { root, rows };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn write(&self) -> Result<()> {
        let path = self.root.join(MANIFEST_FILE);
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    /// Sample ids are unique (so splits are disjoint), labels are in range
    /// and every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for row in &self.rows {
            if !seen.insert(&row.sample_id) {
                return Err(Error::Dataset(format!(
                    "sample `{}` appears more than once",
                    row.sample_id
                )));
            }
            Label::from_id(row.label)
                .map_err(|e| Error::Dataset(format!("sample `{}`: {e}", row.sample_id)))?;
            for p in [&row.image_path, &row.lung_path, &row.inf_path] {
                let full = self.root.join(p);
                if !full.is_file() {
                    return Err(Error::Dataset(format!(
                        "sample `{}`: missing file {}",
                        row.sample_id,
                        full.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn split_rows(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn load_row(&self, row: &ManifestRow) -> Result<Sample> {
        let ctx = |e: Error| Error::Dataset(format!("sample `{}`: {e}", row.sample_id));
        let image = read_pgm_gray(self.root.join(&row.image_path)).map_err(ctx)?;
        let lung_mask = read_pgm_mask(self.root.join(&row.lung_path)).map_err(ctx)?;
        let inf_mask = read_pgm_mask(self.root.join(&row.inf_path)).map_err(ctx)?;
        let sample = Sample {
            image,
            lung_mask,
            inf_mask,
            label: Label::from_id(row.label).map_err(ctx)?,
        };
        sample.validate().map_err(ctx)?;
        Ok(sample)
    }
}

/// Per-sample seed from the dataset seed, class and index.
fn sample_seed(seed: u64, label: Label, index: usize) -> u64 {
    let mut z = seed
        ^ (label.id() as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (index as u64).wrapping_mul(0xd1b5_4a32_d192_ed03);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 70 / 15 / 15 split sizes for `n` samples of one class.
fn split_sizes(n: usize) -> (usize, usize) {
    let train = (n * 70 + 50) / 100;
    let val = ((n * 15 + 50) / 100).min(n - train);
    (train, val)
}

/// Generates `n_per_class` phantoms of each class and writes them with a
/// manifest. Splits are stratified by class; within a class, samples are
/// ordered by their seed hash and cut 70 / 15 / 15.
pub fn generate_dataset(
    n_per_class: usize,
    seed: u64,
    hw: usize,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    for sub in ["images", "lung", "infection"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut rows = Vec::with_capacity(3 * n_per_class);
    for label in Label::ALL {
        let mut order: Vec<(u64, usize)> = (0..n_per_class)
            .map(|i| (sample_seed(seed, label, i), i))
            .collect();
        order.sort();
        let (n_train, n_val) = split_sizes(n_per_class);
        let mut splits = vec![Split::Test; n_per_class];
        for (rank, &(_, i)) in order.iter().enumerate() {
            splits[i] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
        for (i, &split) in splits.iter().enumerate() {
            let sample = generate_phantom(&mut Rng::new(sample_seed(seed, label, i)), label, hw)?;
            let id = format!("{}_{i:04}", label.name());
            let image_path = format!("images/{id}.pgm");
            let lung_path = format!("lung/{id}.pgm");
            let inf_path = format!("infection/{id}.pgm");
            write_pgm(out_dir.join(&image_path), hw, hw, &sample.image.to_bytes())?;
            write_pgm(
                out_dir.join(&lung_path),
                hw,
                hw,
                &mask_bytes(sample.lung_mask.bits()),
            )?;
            write_pgm(
                out_dir.join(&inf_path),
                hw,
                hw,
                &mask_bytes(sample.inf_mask.bits()),
            )?;
            rows.push(ManifestRow {
                sample_id: id,
                split,
                label: label.id(),
                image_path,
                lung_path,
                inf_path,
            });
        }
    }
    let manifest = Manifest {
        root: out_dir.to_path_buf(),
        rows,
    };
    manifest.write()?;
    Ok(manifest)
}

fn mask_bytes(bits: &[u8]) -> Vec<u8> {
    bits.iter().map(|&b| b * 255).collect()
}

/// Loads the samples of one split in manifest order.
pub fn load_dataset(manifest: &Manifest, split: Split) -> Result<Vec<Sample>> {
    manifest
        .split_rows(split)
        .map(|row| manifest.load_row(row))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_arithmetic() {
        assert_eq!(split_sizes(100), (70, 15));
        assert_eq!(split_sizes(10), (7, 2));
        assert_eq!(split_sizes(1), (1, 0));
        assert_eq!(split_sizes(0), (0, 0));
    }

    #[test]
    fn seeds_differ_by_class_and_index() {
        let a = sample_seed(42, Label::Normal, 0);
        assert_ne!(a, sample_seed(42, Label::Normal, 1));
        assert_ne!(a, sample_seed(42, Label::CovidLike, 0));
        assert_ne!(a, sample_seed(43, Label::Normal, 0));
    }
}

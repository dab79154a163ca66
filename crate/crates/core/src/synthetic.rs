//! Planted-structure datasets for end-to-end checks without real images.
//!
//! Each class owns a few signature channels that fire inside a small
//! object blob at a random grid position. Every remaining channel is
//! shared: in the bursty variant the shared channels respond almost
//! uniformly over the whole grid with a per-image random strength, which
//! swamps plain sum pooling; in the clean variant they only carry sparse
//! low-level noise.
//!
//! The whitening set holds distractor landmarks whose blobs fire random
//! mixtures of all signature channels. Its leading principal directions
//! therefore span the signature subspace, so whitening to fewer dimensions
//! than channels drops the shared channels instead of inflating
//! within-class noise.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{write_oxford_ground_truth, QueryGroundTruth};
use crate::io::save_tensor;
use crate::tensor::FeatureTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Clean,
    Bursty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub per_class: usize,
    pub queries_per_class: usize,
    /// Distractor images in the disjoint whitening set.
    pub whitening_images: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub signature_channels: usize,
    pub variant: Variant,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            per_class: 10,
            queries_per_class: 2,
            whitening_images: 30,
            channels: 16,
            height: 5,
            width: 5,
            signature_channels: 3,
            variant: Variant::Bursty,
            seed: 2018,
        }
    }
}

/// In-memory dataset: database, queries, whitening set and ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub database: Vec<FeatureTensor<f64>>,
    pub queries: Vec<FeatureTensor<f64>>,
    pub whitening: Vec<FeatureTensor<f64>>,
    pub ground_truth: Vec<QueryGroundTruth>,
}

/// Paths written by [`write_dataset`].
#[derive(Debug, Clone)]
pub struct SyntheticPaths {
    pub database: PathBuf,
    pub queries: PathBuf,
    pub whitening: PathBuf,
    pub ground_truth: PathBuf,
}

const BLOB: usize = 2;

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    if cfg.classes == 0 || cfg.per_class == 0 || cfg.queries_per_class == 0 || cfg.whitening_images == 0 {
        return Err(Error::InvalidArgument("class, image and query counts must be >= 1".into()));
    }
    if cfg.classes * cfg.signature_channels > cfg.channels {
        return Err(Error::InvalidArgument(format!(
            "{} classes x {} signature channels exceed {} channels",
            cfg.classes, cfg.signature_channels, cfg.channels
        )));
    }
    if cfg.height < BLOB || cfg.width < BLOB {
        return Err(Error::InvalidArgument(format!("grid must be at least {BLOB}x{BLOB}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sig = cfg.signature_channels;
    let mut set = |prefix: &str, per_class: usize| -> Result<Vec<FeatureTensor<f64>>> {
        let mut out = Vec::with_capacity(cfg.classes * per_class);
        for c in 0..cfg.classes {
            for n in 0..per_class {
                let amps: Vec<(usize, f64)> =
                    (c * sig..(c + 1) * sig).map(|ch| (ch, rng.random_range(2.5..3.5))).collect();
                out.push(image(cfg, &mut rng, format!("{prefix}c{c}_{n:03}"), &amps)?);
            }
        }
        Ok(out)
    };
    let database = set("db_", cfg.per_class)?;
    let queries = set("q_", cfg.queries_per_class)?;
    let whitening = (0..cfg.whitening_images)
        .map(|n| {
            let amps: Vec<(usize, f64)> =
                (0..cfg.classes * sig).map(|ch| (ch, rng.random_range(0.0..3.5))).collect();
            image(cfg, &mut rng, format!("wh_{n:03}"), &amps)
        })
        .collect::<Result<Vec<_>>>()?;

    let ground_truth = queries
        .iter()
        .map(|q| {
            let class = class_of(q.image_id());
            let positives = database
                .iter()
                .filter(|d| class_of(d.image_id()) == class)
                .map(|d| d.image_id().to_string());
            let mut gt = QueryGroundTruth::new(q.image_id(), positives, Vec::<String>::new())?;
            gt.crop = Some([0.0, 0.0, cfg.width as f64, cfg.height as f64]);
            Ok(gt)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SyntheticDataset {
        database,
        queries,
        whitening,
        ground_truth,
    })
}

fn class_of(id: &str) -> &str {
    let rest = id.split_once('c').map_or(id, |(_, r)| r);
    rest.split('_').next().unwrap_or(rest)
}

/// `amps` lists (channel, amplitude) pairs that fire inside the blob.
fn image(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng, id: String, amps: &[(usize, f64)]) -> Result<FeatureTensor<f64>> {
    let (k, h, w) = (cfg.channels, cfg.height, cfg.width);
    let cells = h * w;
    let mut values = vec![0.0f64; k * cells];

    // sparse rectified background noise on every channel
    for v in values.iter_mut() {
        if rng.random_bool(0.1) {
            *v = rng.random_range(0.0..0.2);
        }
    }

    let top = rng.random_range(0..=h - BLOB);
    let left = rng.random_range(0..=w - BLOB);
    for &(ch, amp) in amps {
        for i in top..top + BLOB {
            for j in left..left + BLOB {
                values[ch * cells + i * w + j] += amp * rng.random_range(0.8..1.2);
            }
        }
    }

    if cfg.variant == Variant::Bursty {
        let shared = (0..k).filter(|ch| *ch >= cfg.classes * cfg.signature_channels);
        for ch in shared {
            let amp = rng.random_range(0.2..2.0);
            for cell in 0..cells {
                values[ch * cells + cell] += amp * rng.random_range(0.9..1.1);
            }
        }
    }
    FeatureTensor::new(id, k, h, w, values)
}

/// Writes tensors as DFT1 files plus `database.tsv`, `queries.tsv`,
/// `whitening.tsv` and an Oxford-layout `gt/` directory under `dir`.
pub fn write_dataset(data: &SyntheticDataset, dir: impl AsRef<Path>) -> Result<SyntheticPaths> {
    let dir = dir.as_ref();
    let tensors = dir.join("tensors");
    let gt_dir = dir.join("gt");
    for d in [&tensors, &gt_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let write_set = |name: &str, set: &[FeatureTensor<f64>]| -> Result<PathBuf> {
        let mut manifest = String::from("# image_id\tpath\n");
        for t in set {
            let rel = format!("tensors/{}.dft", t.image_id());
            save_tensor(t, dir.join(&rel))?;
            manifest.push_str(&format!("{}\t{rel}\n", t.image_id()));
        }
        let path = dir.join(name);
        std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let paths = SyntheticPaths {
        database: write_set("database.tsv", &data.database)?,
        queries: write_set("queries.tsv", &data.queries)?,
        whitening: write_set("whitening.tsv", &data.whitening)?,
        ground_truth: gt_dir.clone(),
    };
    for gt in &data.ground_truth {
        let good: Vec<String> = gt.positives.iter().cloned().collect();
        write_oxford_ground_truth(&gt_dir, gt, &good, &[])?;
    }
    Ok(paths)
}

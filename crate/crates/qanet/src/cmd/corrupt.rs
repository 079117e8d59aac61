//! Training pairs from ground truth: several corrupted segmentations per
//! image, each with its exact quality score.

use std::path::PathBuf;

use qanet_core::corrupt::{corrupt, sample_params, Domain};
use qanet_core::rng::derive_seed;
use qanet_core::Measure;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::imageio::{read_labels, write_labels};
use crate::manifest::{create_dir, relative, write_csv, Manifest};
use crate::par;

#[derive(Debug, Clone)]
pub struct CorruptOptions {
    pub manifest: PathBuf,
    pub count_per_image: usize,
    pub measure: Measure,
    pub domain: Domain,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorruptRow {
    pub id: String,
    pub image: String,
    pub corrupted_seg: String,
    pub gt_seg: String,
    pub op: String,
    pub kernel_radius: usize,
    pub seed: u64,
    pub true_q: f64,
}

#[derive(Debug, Clone)]
pub struct CorruptOutput {
    pub manifest: PathBuf,
    pub rows: Vec<CorruptRow>,
    /// Ids whose score came with a degenerate-case warning.
    pub warnings: Vec<(String, String)>,
}

/// Keeps ids usable as file names.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn corrupt_dataset(opts: &CorruptOptions) -> Result<CorruptOutput> {
    if opts.count_per_image == 0 {
        return Err(Error::input("count per image must be at least 1"));
    }
    let m = Manifest::read(&opts.manifest)?;
    let seg_dir = opts.out.join("corrupted");
    create_dir(&seg_dir)?;
    let indexed: Vec<(usize, &crate::manifest::Row)> = m.rows.iter().enumerate().collect();
    let per_row = par::map(&indexed, |&(i, row)| {
        let image = relative(row.image()?, &opts.out);
        let gt_path = row.gt_seg()?;
        let gt = read_labels(gt_path)?;
        let mut out = Vec::with_capacity(opts.count_per_image);
        for k in 0..opts.count_per_image {
            let seed = derive_seed(derive_seed(opts.seed, i as u64), k as u64);
            let params = sample_params(seed, opts.domain);
            let pair = corrupt(&gt, &params, opts.measure).map_err(|e| Error::input(format!("row {}: {e}", row.id)))?;
            let id = format!("{}_{k}", row.id);
            let seg = seg_dir.join(format!("{}.png", file_stem(&id)));
            write_labels(&seg, &pair.corrupted)?;
            let warning = pair.warning.map(|w| (id.clone(), w.to_string()));
            out.push((
                CorruptRow {
                    id,
                    image: image.clone(),
                    corrupted_seg: relative(&seg, &opts.out),
                    gt_seg: relative(gt_path, &opts.out),
                    op: params.op.name().to_string(),
                    kernel_radius: params.kernel_radius,
                    seed,
                    true_q: pair.true_q.value(),
                },
                warning,
            ));
        }
        Ok(out)
    })?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (row, w) in per_row.into_iter().flatten() {
        rows.push(row);
        warnings.extend(w);
    }
    let manifest = opts.out.join("corrupted.csv");
    write_csv(&manifest, &rows)?;
    Ok(CorruptOutput { manifest, rows, warnings })
}


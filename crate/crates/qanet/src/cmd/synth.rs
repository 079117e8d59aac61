//! Phantom image/ground-truth datasets with a train/validation split.

use std::path::PathBuf;

use qanet_core::nn::train::epoch_order;
use qanet_core::phantom::{synth_phantom, PhantomConfig};
use qanet_core::rng::derive_seed;
use serde::Serialize;

use crate::error::{Context, Error, Result};
use crate::imageio::{write_image, write_labels};
use crate::manifest::{create_dir, relative, write_csv};
use crate::par;

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub phantom: PhantomConfig,
    pub count: usize,
    /// Fraction of images in the training manifest.
    pub split: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct GtRow {
    id: String,
    image: String,
    gt_seg: String,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub train: PathBuf,
    pub val: PathBuf,
    pub n_train: usize,
    pub n_val: usize,
}

/// Rows in the training part: `round(count * split)`, keeping both parts
/// non-empty.
pub fn train_count(count: usize, split: f64) -> usize {
    ((count as f64 * split).round() as usize).clamp(1, count - 1)
}

pub fn synth(opts: &SynthOptions) -> Result<SynthOutput> {
    if opts.count < 2 {
        return Err(Error::input("count must be at least 2"));
    }
    if !(opts.split > 0.0 && opts.split < 1.0) {
        return Err(Error::input(format!("split must lie in (0, 1), got {}", opts.split)));
    }
    opts.phantom.validate().input_err("phantom config")?;
    let (img_dir, gt_dir) = (opts.out.join("images"), opts.out.join("gt"));
    create_dir(&img_dir)?;
    create_dir(&gt_dir)?;
    std::fs::write(
        opts.out.join("phantom.json"),
        serde_json::to_string_pretty(&opts.phantom).expect("config serializes"),
    )
    .internal_err("phantom.json")?;

    let width = (opts.count - 1).to_string().len().max(4);
    let indices: Vec<usize> = (0..opts.count).collect();
    let rows = par::map(&indices, |&i| {
        let id = format!("{i:0width$}");
        let cfg = opts.phantom.with_seed(derive_seed(opts.phantom.seed, i as u64));
        let p = synth_phantom(&cfg).input_err(format_args!("phantom {id}"))?;
        let (img, gt) = (img_dir.join(format!("{id}.png")), gt_dir.join(format!("{id}.png")));
        write_image(&img, &p.image)?;
        write_labels(&gt, &p.gt)?;
        Ok(GtRow {
            image: relative(&img, &opts.out),
            gt_seg: relative(&gt, &opts.out),
            id,
        })
    })?;

    let n_train = train_count(opts.count, opts.split);
    let mut in_train = vec![false; opts.count];
    for &i in &epoch_order(opts.phantom.seed, 0, opts.count)[..n_train] {
        in_train[i] = true;
    }
    let (train, val): (Vec<GtRow>, Vec<GtRow>) = rows.into_iter().zip(&in_train).fold(
        (Vec::new(), Vec::new()),
        |(mut t, mut v), (row, &is_train)| {
            if is_train { t.push(row) } else { v.push(row) }
            (t, v)
        },
    );
    let out = SynthOutput {
        train: opts.out.join("train.csv"),
        val: opts.out.join("val.csv"),
        n_train: train.len(),
        n_val: val.len(),
    };
    write_csv(&out.train, &train)?;
    write_csv(&out.val, &val)?;
    Ok(out)
}

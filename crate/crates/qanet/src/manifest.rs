//! CSV manifests.
//!
//! A manifest lists image/segmentation pairs. Recognised columns are `id`,
//! `image`, `eval_seg` (or `corrupted_seg`), `gt_seg`, `true_q` and
//! `predicted_q`; all are optional at parse time and other columns are
//! ignored. Relative paths are resolved against the manifest's directory.
//! Without an `id` column rows are numbered from 0.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Context, Error, Result};

#[derive(Debug, Deserialize)]
struct RawRow {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    image: Option<String>,
    #[serde(default, alias = "corrupted_seg")]
    eval_seg: Option<String>,
    #[serde(default)]
    gt_seg: Option<String>,
    #[serde(default)]
    true_q: Option<f64>,
    #[serde(default)]
    predicted_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub id: String,
    pub image: Option<PathBuf>,
    pub eval_seg: Option<PathBuf>,
    pub gt_seg: Option<PathBuf>,
    pub true_q: Option<f64>,
    pub predicted_q: Option<f64>,
}

impl Row {
    fn need<'a>(&self, p: &'a Option<PathBuf>, column: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| Error::input(format!("row {}: missing {column}", self.id)))
    }

    pub fn image(&self) -> Result<&Path> {
        self.need(&self.image, "image")
    }

    pub fn eval_seg(&self) -> Result<&Path> {
        self.need(&self.eval_seg, "eval_seg")
    }

    pub fn gt_seg(&self) -> Result<&Path> {
        self.need(&self.gt_seg, "gt_seg")
    }

    pub fn true_q(&self) -> Result<f64> {
        self.true_q
            .ok_or_else(|| Error::input(format!("row {}: missing true_q", self.id)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub path: PathBuf,
    pub rows: Vec<Row>,
}

impl Manifest {
    /// Reads and validates a manifest; an empty one is an error.
    pub fn read(path: &Path) -> Result<Self> {
        let dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let mut reader = csv::Reader::from_path(path).input_err(path.display())?;
        let resolve = |s: Option<String>| -> Option<PathBuf> {
            s.filter(|s| !s.trim().is_empty()).map(|s| dir.join(s.trim()))
        };
        let mut rows = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, rec) in reader.deserialize::<RawRow>().enumerate() {
            let raw = rec.input_err(path.display())?;
            let id = raw.id.map(|s| s.trim().to_string()).unwrap_or_else(|| i.to_string());
            if !seen.insert(id.clone()) {
                return Err(Error::input(format!("{}: duplicate id {id}", path.display())));
            }
            for (name, q) in [("true_q", raw.true_q), ("predicted_q", raw.predicted_q)] {
                if let Some(q) = q {
                    if !q.is_finite() || (name == "true_q" && !(0.0..=1.0).contains(&q)) {
                        return Err(Error::input(format!("{}: row {id}: {name} {q} is invalid", path.display())));
                    }
                }
            }
            rows.push(Row {
                id,
                image: resolve(raw.image),
                eval_seg: resolve(raw.eval_seg),
                gt_seg: resolve(raw.gt_seg),
                true_q: raw.true_q,
                predicted_q: raw.predicted_q,
            });
        }
        if rows.is_empty() {
            return Err(Error::input(format!("{}: empty manifest", path.display())));
        }
        Ok(Self {
            path: path.to_path_buf(),
            rows,
        })
    }

    pub fn has_column(&self, f: impl Fn(&Row) -> bool) -> bool {
        self.rows.iter().all(f)
    }
}

/// Lists ids present on only one side; errors if there are any.
pub fn check_same_ids<'a>(
    a: impl IntoIterator<Item = &'a str>,
    b: impl IntoIterator<Item = &'a str>,
    names: (&str, &str),
) -> Result<()> {
    let a: BTreeSet<&str> = a.into_iter().collect();
    let b: BTreeSet<&str> = b.into_iter().collect();
    let only_a: Vec<&str> = a.difference(&b).copied().collect();
    let only_b: Vec<&str> = b.difference(&a).copied().collect();
    if only_a.is_empty() && only_b.is_empty() {
        return Ok(());
    }
    let mut msg = String::from("ids do not match");
    if !only_a.is_empty() {
        msg += &format!("; missing from {}: {}", names.1, only_a.join(", "));
    }
    if !only_b.is_empty() {
        msg += &format!("; missing from {}: {}", names.0, only_b.join(", "));
    }
    Err(Error::Input(msg))
}

/// `path` written relative to `base` (both made absolute first).
pub fn relative(path: &Path, base: &Path) -> String {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let rel = pathdiff::diff_paths(abs(path), abs(base)).unwrap_or_else(|| abs(path));
    rel.to_string_lossy().into_owned()
}

/// Writes rows with a header; the parent directory must exist.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).internal_err(path.display())?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).internal_err(path.display())?;
    }
    w.flush().internal_err(path.display())
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).internal_err(format_args!("cannot create {}", path.display()))
}

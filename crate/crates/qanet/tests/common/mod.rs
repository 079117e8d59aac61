#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qanet::imageio::{write_image, write_labels};
use qanet_core::phantom::{synth_phantom, PhantomConfig};
use qanet_core::{rng, InstanceMap};
use rand::Rng;

pub fn qanet() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qanet"));
    c.env_remove("QANET_THREADS");
    c
}

/// Runs the binary and returns (exit code, stdout, stderr).
pub fn run(args: &[&str], cwd: &Path) -> (i32, String, String) {
    run_cmd(qanet().args(args).current_dir(cwd))
}

pub fn run_cmd(c: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = c.output().expect("binary runs");
    (
        status.code().unwrap_or(-1),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

pub fn labels(dir: &Path, name: &str, w: usize, h: usize, values: &[u16]) -> PathBuf {
    let p = dir.join(name);
    write_labels(&p, &InstanceMap::from_labels(w, h, values.to_vec()).unwrap()).unwrap();
    p
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// `n` phantoms written as image/gt PNGs plus a manifest `gt.csv`.
pub fn phantom_set(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut csv = String::from("id,image,gt_seg\n");
    for i in 0..n {
        let cfg = PhantomConfig { seed: seed * 1000 + i as u64, ..PhantomConfig::default() };
        let p = synth_phantom(&cfg).unwrap();
        write_image(&dir.join(format!("img{i}.png")), &p.image).unwrap();
        write_labels(&dir.join(format!("gt{i}.png")), &p.gt).unwrap();
        csv += &format!("p{i},img{i}.png,gt{i}.png\n");
    }
    write(dir, "gt.csv", &csv)
}

pub fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(base: &Path, d: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.push((p.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Up to `max_instances` rectangles or random-walk blobs with distinct
/// arbitrary ids; later paint wins.
pub fn random_map(r: &mut impl Rng, width: usize, height: usize, max_instances: usize) -> InstanceMap {
    let mut labels = vec![0u16; width * height];
    let k = r.random_range(0..=max_instances);
    let mut ids: Vec<u16> = Vec::new();
    while ids.len() < k {
        let id = r.random_range(1..=u16::MAX);
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    for &id in &ids {
        if r.random_bool(0.5) {
            let (x0, y0) = (r.random_range(0..width), r.random_range(0..height));
            let (x1, y1) = (r.random_range(x0..width), r.random_range(y0..height));
            for y in y0..=y1 {
                for x in x0..=x1 {
                    labels[y * width + x] = id;
                }
            }
        } else {
            let (mut x, mut y) = (r.random_range(0..width), r.random_range(0..height));
            for _ in 0..r.random_range(1..(width * height).max(2)) {
                labels[y * width + x] = id;
                match r.random_range(0..4) {
                    0 => x = (x + 1).min(width - 1),
                    1 => x = x.saturating_sub(1),
                    2 => y = (y + 1).min(height - 1),
                    _ => y = y.saturating_sub(1),
                }
            }
        }
    }
    InstanceMap::from_labels(width, height, labels).unwrap()
}

pub fn map_pair(seed: u64, max_side: usize, max_instances: usize) -> (InstanceMap, InstanceMap) {
    let mut r = rng::stream(seed, 900);
    let (w, h) = (r.random_range(1..=max_side), r.random_range(1..=max_side));
    (random_map(&mut r, w, h, max_instances), random_map(&mut r, w, h, max_instances))
}

/// Random bijection of instance ids; background stays 0.
pub fn shuffle_ids(m: &InstanceMap, seed: u64) -> InstanceMap {
    let mut r = rng::stream(seed, 901);
    let ids = m.instance_ids();
    let mut targets: Vec<u16> = Vec::new();
    while targets.len() < ids.len() {
        let t = r.random_range(1..=u16::MAX);
        if !targets.contains(&t) {
            targets.push(t);
        }
    }
    m.map_labels(|l| ids.iter().position(|&i| i == l).map_or(0, |p| targets[p]))
}

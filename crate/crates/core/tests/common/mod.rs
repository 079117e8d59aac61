#![allow(dead_code)]

use qanet_core::rng;
use qanet_core::seg::InstanceMap;
use rand::Rng;

/// Up to `max_instances` random rectangles and random-walk blobs painted in
/// order with distinct arbitrary ids; later paint wins.
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
            let (mut x, mut y) = (r.random_range(0..width) as isize, r.random_range(0..height) as isize);
            for _ in 0..r.random_range(1..(width * height).max(2)) {
                labels[y as usize * width + x as usize] = id;
                match r.random_range(0..4) {
                    0 => x = (x + 1).min(width as isize - 1),
                    1 => x = (x - 1).max(0),
                    2 => y = (y + 1).min(height as isize - 1),
                    _ => y = (y - 1).max(0),
                }
            }
        }
    }
    InstanceMap::from_labels(width, height, labels).unwrap()
}

pub fn map_pair(seed: u64, max_side: usize, max_instances: usize) -> (InstanceMap, InstanceMap) {
    let mut r = rng::stream(seed, 300);
    let (w, h) = (r.random_range(1..=max_side), r.random_range(1..=max_side));
    (random_map(&mut r, w, h, max_instances), random_map(&mut r, w, h, max_instances))
}

/// A random bijection on the instance ids of `m`, keeping 0 fixed.
pub fn shuffle_ids(m: &InstanceMap, seed: u64) -> InstanceMap {
    let mut r = rng::stream(seed, 301);
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

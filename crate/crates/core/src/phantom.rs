//! Toy image / ground-truth generator: random non-overlapping ellipses,
//! Gaussian blur as the optics, additive Gaussian noise as the sensor.

use alloc::vec::Vec;

use crate::filter::gaussian_blur;
use crate::grid::Grid;
use crate::rng::{self, STREAM_NOISE, STREAM_PHANTOM};
use crate::seg::{connected_components, Connectivity, InstanceMap, IntensityImage};

use rand::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhantomError {
    #[error("invalid phantom config: {0}")]
    Invalid(&'static str),
    #[error("placed only {placed} of the required {min} instances")]
    Infeasible { placed: usize, min: usize },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub width: usize,
    pub height: usize,
    /// Inclusive `[min, max]` instance count.
    pub n_instances: [usize; 2],
    /// Semi-major axis range in pixels.
    pub radius: [f64; 2],
    /// Major/minor axis ratio range, starting at 1 or above.
    pub eccentricity: [f64; 2],
    pub blur_sigma: f64,
    pub noise_std: f64,
    pub background_level: f64,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            n_instances: [1, 10],
            radius: [3.0, 8.0],
            eccentricity: [1.0, 2.0],
            blur_sigma: 1.0,
            noise_std: 0.05,
            background_level: 0.1,
            seed: 0,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<(), PhantomError> {
        let bad = PhantomError::Invalid;
        if self.width == 0 || self.height == 0 {
            return Err(bad("canvas must be non-empty"));
        }
        if self.n_instances[0] > self.n_instances[1] {
            return Err(bad("n_instances range is empty"));
        }
        if self.n_instances[1] > u16::MAX as usize {
            return Err(bad("too many instances for 16-bit labels"));
        }
        if !(self.radius[0] > 0.0 && self.radius[0] <= self.radius[1]) {
            return Err(bad("radius range must be positive and non-empty"));
        }
        if !(self.eccentricity[0] >= 1.0 && self.eccentricity[0] <= self.eccentricity[1]) {
            return Err(bad("eccentricity range must start at 1 or above"));
        }
        if !(self.blur_sigma >= 0.0) || !(self.noise_std >= 0.0) {
            return Err(bad("blur_sigma and noise_std must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.background_level) {
            return Err(bad("background_level must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: IntensityImage,
    pub gt: InstanceMap,
}

struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        (u * u) / (self.a * self.a) + (v * v) / (self.b * self.b) <= 1.0
    }
}

/// Generates one image and its ground truth.
///
/// Placement is by rejection: a candidate is refused if its centre lies
/// within 2 px of an earlier centre, or if what is left of it after
/// clipping against earlier instances is empty or not 4-connected. At most
/// `10 * N` candidates are tried for a target count `N`.
pub fn synth_phantom(cfg: &PhantomConfig) -> Result<Phantom, PhantomError> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let mut rng = rng::stream(cfg.seed, STREAM_PHANTOM);
    let target = rng.random_range(cfg.n_instances[0]..=cfg.n_instances[1]);
    let mut labels = Grid::filled(w, h, 0u16);
    let mut centres: Vec<(f64, f64)> = Vec::new();
    let mut intensities: Vec<f64> = Vec::new();

    for _ in 0..10 * target {
        if centres.len() == target {
            break;
        }
        let a = rng::uniform(&mut rng, cfg.radius[0], cfg.radius[1].max(cfg.radius[0]));
        let ratio = rng::uniform(&mut rng, cfg.eccentricity[0], cfg.eccentricity[1]);
        let theta = rng::uniform(&mut rng, 0.0, core::f64::consts::PI);
        let e = Ellipse {
            cx: rng::uniform(&mut rng, 0.0, w as f64),
            cy: rng::uniform(&mut rng, 0.0, h as f64),
            a,
            b: a / ratio,
            cos: libm::cos(theta),
            sin: libm::sin(theta),
        };
        let intensity = rng::uniform(&mut rng, 0.4, 0.9);
        if centres
            .iter()
            .any(|&(x, y)| (x - e.cx) * (x - e.cx) + (y - e.cy) * (y - e.cy) < 4.0)
        {
            continue;
        }
        let x0 = libm::floor(e.cx - e.a).max(0.0) as usize;
        let y0 = libm::floor(e.cy - e.a).max(0.0) as usize;
        let x1 = (libm::ceil(e.cx + e.a) as usize).min(w - 1);
        let y1 = (libm::ceil(e.cy + e.a) as usize).min(h - 1);
        let mut pixels = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                if *labels.get(x, y) == 0 && e.contains(x as f64 + 0.5, y as f64 + 0.5) {
                    pixels.push((x, y));
                }
            }
        }
        if pixels.is_empty() || !is_connected(&pixels, w, h) {
            continue;
        }
        let label = (centres.len() + 1) as u16;
        for (x, y) in pixels {
            labels.set(x, y, label);
        }
        centres.push((e.cx, e.cy));
        intensities.push(intensity);
    }
    if centres.len() < cfg.n_instances[0] {
        return Err(PhantomError::Infeasible {
            placed: centres.len(),
            min: cfg.n_instances[0],
        });
    }

    let clean = labels.map(|&l| {
        cfg.background_level
            + if l == 0 {
                0.0
            } else {
                intensities[l as usize - 1]
            }
    });
    let mut image = gaussian_blur(&clean, cfg.blur_sigma);
    if cfg.noise_std > 0.0 {
        let mut noise = rng::stream(cfg.seed, STREAM_NOISE);
        for v in image.as_mut_slice() {
            *v += cfg.noise_std * rng::standard_normal(&mut noise);
        }
    }
    let pixels: Vec<f32> = image.as_slice().iter().map(|&v| v.clamp(0.0, 1.0) as f32).collect();
    Ok(Phantom {
        image: IntensityImage::new(w, h, 1, pixels).expect("values clamped"),
        gt: InstanceMap::from_grid(labels).expect("non-empty canvas"),
    })
}

fn is_connected(pixels: &[(usize, usize)], w: usize, h: usize) -> bool {
    let mut mask = Grid::filled(w, h, false);
    for &(x, y) in pixels {
        mask.set(x, y, true);
    }
    connected_components(&mask, Connectivity::Four)
        .map(|cc| cc.instance_count() == 1)
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::seg_measure;

    #[test]
    fn empty_range_gives_background() {
        let cfg = PhantomConfig {
            n_instances: [0, 0],
            ..Default::default()
        };
        let p = synth_phantom(&cfg).unwrap();
        assert_eq!(p.gt.instance_count(), 0);
        // background plus noise only
        let mean = p.image.as_slice().iter().map(|&v| v as f64).sum::<f64>() / 4096.0;
        assert!((mean - 0.1).abs() < 0.01);
    }

    #[test]
    fn clean_image_matches_support() {
        let cfg = PhantomConfig {
            blur_sigma: 0.0,
            noise_std: 0.0,
            seed: 11,
            ..Default::default()
        };
        let p = synth_phantom(&cfg).unwrap();
        assert!(p.gt.instance_count() >= 1);
        for y in 0..64 {
            for x in 0..64 {
                let v = p.image.value(0, x, y);
                if p.gt.label(x, y) == 0 {
                    assert_eq!(v, 0.1f64 as f32);
                } else {
                    assert!(v >= 0.5 - 1e-6 && v <= 1.0);
                }
            }
        }
    }

    #[test]
    fn default_phantom_scores_one_against_itself() {
        for seed in 0..20 {
            let p = synth_phantom(&PhantomConfig::default().with_seed(seed)).unwrap();
            let n = p.gt.instance_count();
            assert!((1..=10).contains(&n));
            assert_eq!(seg_measure(&p.gt, &p.gt).unwrap().value(), 1.0);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = PhantomConfig::default().with_seed(42);
        assert_eq!(synth_phantom(&cfg).unwrap(), synth_phantom(&cfg).unwrap());
    }

    #[test]
    fn instances_are_single_components() {
        let p = synth_phantom(&PhantomConfig::default().with_seed(5)).unwrap();
        for l in p.gt.instance_ids() {
            let cc = connected_components(&p.gt.mask_of(l), Connectivity::Four).unwrap();
            assert_eq!(cc.instance_count(), 1);
        }
    }

    #[test]
    fn infeasible_config_is_reported() {
        let cfg = PhantomConfig {
            width: 4,
            height: 4,
            n_instances: [30, 30],
            ..Default::default()
        };
        assert!(matches!(synth_phantom(&cfg), Err(PhantomError::Infeasible { .. })));
    }

    #[test]
    fn invalid_configs() {
        let base = PhantomConfig::default();
        assert!(PhantomConfig { n_instances: [3, 2], ..base.clone() }.validate().is_err());
        assert!(PhantomConfig { eccentricity: [0.5, 2.0], ..base.clone() }.validate().is_err());
        assert!(PhantomConfig { background_level: 1.0, ..base.clone() }.validate().is_err());
        assert!(PhantomConfig { noise_std: -0.1, ..base }.validate().is_err());
    }
}

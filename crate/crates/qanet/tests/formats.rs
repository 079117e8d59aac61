mod common;

use image::{ImageBuffer, Luma, Rgb, Rgba};
use qanet::checkpoint::{self, decode, encode};
use qanet::imageio::{read_image, read_labels, write_image, write_labels};
use qanet::Error;
use qanet_core::nn::train::predict_pairs;
use qanet_core::nn::{ArchConfig, InputEncoding, ModelParams, PreparedPair, Variant};
use qanet_core::{InstanceMap, IntensityImage};

#[test]
fn labels_round_trip_at_full_16_bit_range() {
    let dir = tempfile::tempdir().unwrap();
    let m = InstanceMap::from_labels(3, 2, vec![0, 1, 65535, 300, 0, 7]).unwrap();
    let p = dir.path().join("m.png");
    write_labels(&p, &m).unwrap();
    assert_eq!(read_labels(&p).unwrap(), m);
    // stored as 16-bit gray
    assert!(matches!(image::open(&p).unwrap(), image::DynamicImage::ImageLuma16(_)));
}

#[test]
fn eight_bit_labels_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m8.png");
    ImageBuffer::<Luma<u8>, _>::from_raw(2, 2, vec![0u8, 3, 3, 200]).unwrap().save(&p).unwrap();
    assert_eq!(read_labels(&p).unwrap().as_slice(), &[0, 3, 3, 200]);
}

#[test]
fn images_are_normalised_by_their_bit_depth() {
    let dir = tempfile::tempdir().unwrap();
    let p8 = dir.path().join("g8.png");
    ImageBuffer::<Luma<u8>, _>::from_raw(2, 1, vec![0u8, 255]).unwrap().save(&p8).unwrap();
    assert_eq!(read_image(&p8).unwrap().as_slice(), &[0.0, 1.0]);

    let p16 = dir.path().join("g16.png");
    ImageBuffer::<Luma<u16>, _>::from_raw(2, 1, vec![65535u16, 32768]).unwrap().save(&p16).unwrap();
    let img = read_image(&p16).unwrap();
    assert_eq!(img.value(0, 0, 0), 1.0);
    assert!((img.value(0, 1, 0) - 32768.0 / 65535.0).abs() < 1e-7);

    // interleaved RGB comes back as channel planes
    let prgb = dir.path().join("c.png");
    ImageBuffer::<Rgb<u8>, _>::from_raw(2, 1, vec![255u8, 0, 51, 0, 255, 102]).unwrap().save(&prgb).unwrap();
    let img = read_image(&prgb).unwrap();
    assert_eq!(img.channels(), 3);
    assert_eq!(img.channel(0), &[1.0, 0.0]);
    assert_eq!(img.channel(1), &[0.0, 1.0]);
    assert_eq!(img.channel(2), &[0.2, 0.4]);
}

#[test]
fn gray_images_survive_a_write_read_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let data: Vec<f32> = (0..20).map(|i| i as f32 / 19.0).collect();
    let img = IntensityImage::new(5, 4, 1, data.clone()).unwrap();
    let p = dir.path().join("i.png");
    write_image(&p, &img).unwrap();
    for (a, b) in read_image(&p).unwrap().as_slice().iter().zip(&data) {
        assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
    }
}

#[test]
fn unsupported_pixel_formats_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rgba.png");
    ImageBuffer::<Rgba<u8>, _>::from_raw(1, 1, vec![1u8, 2, 3, 4]).unwrap().save(&p).unwrap();
    assert!(matches!(read_labels(&p), Err(Error::Input(_))));
    assert!(matches!(read_image(&p), Err(Error::Input(_))));
    let junk = common::write(dir.path(), "junk.png", "not a png");
    assert!(matches!(read_labels(&junk), Err(Error::Input(_))));
    assert!(matches!(read_labels(&dir.path().join("missing.png")), Err(Error::Input(_))));
}

fn small_params(seed: u64) -> ModelParams<f32> {
    let arch = ArchConfig {
        input_size: 16,
        n_blocks: 2,
        features_per_block: vec![4, 4],
        fc_widths: vec![8],
        ..ArchConfig::desk(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch)
    };
    let mut p = ModelParams::<f32>::init(&arch, seed).unwrap();
    // make running statistics distinguishable from their initial values
    for i in 0..p.tensors().len() {
        if p.graph().specs[i].name.ends_with("running_var") {
            p.tensor_mut(i).iter_mut().enumerate().for_each(|(k, v)| *v = 0.5 + k as f32);
        }
    }
    p
}

#[test]
fn checkpoint_layout_and_round_trip() {
    let p = small_params(4);
    let bytes = encode(&p);
    assert_eq!(&bytes[..4], b"QANT");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let arch: ArchConfig = serde_json::from_slice(&bytes[12..12 + len]).unwrap();
    assert_eq!(&arch, p.arch());
    // first tensor follows the config directly
    let first = f32::from_le_bytes(bytes[12 + len..16 + len].try_into().unwrap());
    assert_eq!(first, p.tensors()[0][0]);
    let total: usize = p.tensors().iter().map(Vec::len).sum();
    assert_eq!(bytes.len(), 12 + len + 4 * total);

    assert!(String::from_utf8_lossy(&bytes[12..12 + len]).contains("\"trinary_onehot_3ch\""));
    let back = decode(&bytes).unwrap();
    assert_eq!(back, p);

    // predictions are bit-identical after reloading from disk
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.qant");
    checkpoint::save(&path, &p).unwrap();
    let loaded = checkpoint::load(&path).unwrap();
    let pair = PreparedPair {
        image: (0..256).map(|i| (i % 7) as f32 / 7.0).collect(),
        classes: (0..256).map(|i| (i % 3) as u8).collect(),
    };
    assert_eq!(
        predict_pairs(&p, &[&pair], 1).unwrap(),
        predict_pairs(&loaded, &[&pair], 1).unwrap()
    );
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let good = encode(&small_params(5));
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    let mut bad_version = good.clone();
    bad_version[4] = 9;
    let mut trailing = good.clone();
    trailing.push(0);
    let mut bad_var = good.clone();
    // zero out the last running variance (the running stats precede the head)
    let p = small_params(5);
    let len = u32::from_le_bytes(good[8..12].try_into().unwrap()) as usize;
    let mut offset = 12 + len;
    for (spec, t) in p.graph().specs.iter().zip(p.tensors()) {
        if spec.name.ends_with("running_var") {
            bad_var[offset..offset + 4].copy_from_slice(&0f32.to_le_bytes());
        }
        offset += 4 * t.len();
    }
    for (what, bytes) in [
        ("magic", bad_magic),
        ("version", bad_version),
        ("truncated", good[..good.len() - 3].to_vec()),
        ("short header", good[..6].to_vec()),
        ("trailing", trailing),
        ("variance", bad_var),
    ] {
        assert!(matches!(decode(&bytes), Err(Error::Input(_))), "{what}");
    }
}

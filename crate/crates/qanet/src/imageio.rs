//! PNG reading and writing.
//!
//! Label maps are single-channel 16-bit PNGs (8-bit is accepted on read).
//! Intensity images may be 8/16-bit gray or 8-bit RGB and are divided by the
//! largest representable value on load.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, Rgb};
use qanet_core::{InstanceMap, IntensityImage};

use crate::error::{Context, Error, Result};

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path).input_err(path.display())?;
    reader
        .with_guessed_format()
        .input_err(path.display())?
        .decode()
        .input_err(format_args!("{}: cannot decode PNG", path.display()))
}

pub fn read_labels(path: &Path) -> Result<InstanceMap> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let labels: Vec<u16> = match img {
        DynamicImage::ImageLuma16(b) => b.into_raw(),
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u16::from).collect(),
        other => {
            return Err(Error::input(format!(
                "{}: label maps must be single-channel 8- or 16-bit, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    InstanceMap::from_labels(w, h, labels).input_err(path.display())
}

pub fn write_labels(path: &Path, map: &InstanceMap) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width() as u32, map.height() as u32, map.as_slice().to_vec())
            .expect("buffer length matches dimensions");
    buf.save_with_format(path, ImageFormat::Png).internal_err(path.display())
}

pub fn read_image(path: &Path) -> Result<IntensityImage> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw().into_iter().map(|v| v as f32 / 255.0).collect()),
        DynamicImage::ImageLuma16(b) => (1, b.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect()),
        DynamicImage::ImageRgb8(b) => {
            // interleaved RGB to channel planes
            let raw = b.into_raw();
            let mut planes = vec![0f32; 3 * w * h];
            for (i, px) in raw.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    planes[c * w * h + i] = px[c] as f32 / 255.0;
                }
            }
            (3, planes)
        }
        other => {
            return Err(Error::input(format!(
                "{}: images must be 8/16-bit gray or 8-bit RGB, found {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    IntensityImage::new(w, h, channels, data).input_err(path.display())
}

/// Gray images are stored as 16-bit, RGB as 8-bit.
pub fn write_image(path: &Path, img: &IntensityImage) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let plane = img.width() * img.height();
    let res = if img.channels() == 1 {
        let raw: Vec<u16> = img.as_slice().iter().map(|&v| (v * 65535.0).round() as u16).collect();
        ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw)
            .expect("buffer length matches dimensions")
            .save_with_format(path, ImageFormat::Png)
    } else {
        let mut raw = vec![0u8; 3 * plane];
        for i in 0..plane {
            for c in 0..3 {
                raw[3 * i + c] = (img.channel(c)[i] * 255.0).round() as u8;
            }
        }
        ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw)
            .expect("buffer length matches dimensions")
            .save_with_format(path, ImageFormat::Png)
    };
    res.internal_err(path.display())
}

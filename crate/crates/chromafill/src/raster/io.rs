//! 8-bit PNG input/output.
//!
//! Values map as `v/255` on load and `round(v*255)` on save, so a save/load
//! round trip is exact at 8-bit resolution. Mask files are 8-bit gray with
//! 255 marking missing pixels; on load any value >= 128 counts as missing,
//! which tolerates antialiased mask exports.

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{GrayImage, Mask, RgbImage};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn img_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image { path: path.to_path_buf(), source }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|e| io_err(path, e))?
        .decode()
        .map_err(|e| img_err(path, e))?
        .into_rgb8();
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
    RgbImage::new(h as usize, w as usize, data)
}

pub fn save_image(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("raster dimensions already validated");
    buf.save(path).map_err(|e| img_err(path, e))
}

pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|e| io_err(path, e))?
        .decode()
        .map_err(|e| img_err(path, e))?
        .into_luma8();
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
    GrayImage::new(h as usize, w as usize, data)
}

pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("raster dimensions already validated");
    buf.save(path).map_err(|e| img_err(path, e))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|e| io_err(path, e))?
        .decode()
        .map_err(|e| img_err(path, e))?
        .into_luma8();
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|&v| u8::from(v >= 128)).collect();
    Mask::new(h as usize, w as usize, data)
}

pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    let buf = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, bytes)
        .expect("raster dimensions already validated");
    buf.save(path).map_err(|e| img_err(path, e))
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

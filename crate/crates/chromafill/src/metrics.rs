//! Image-quality metrics and the de-colorization benchmark.
//!
//! PSNR is computed in the `[0, 1]` dynamic range over the RGB channels
//! jointly; SSIM uses the standard 11x11 Gaussian window (sigma 1.5) on the
//! monochrome conversion of both images.

use crate::error::{Error, Result};
use crate::raster::{Mask, RgbImage};

/// Pixel set a metric is computed over.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    Whole,
    /// Restrict to pixels where the mask is 1.
    Masked(&'a Mask),
}

/// Peak signal-to-noise ratio in dB; identical inputs return
/// `f64::INFINITY`.
pub fn psnr(a: &RgbImage, b: &RgbImage, region: Region<'_>) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::invalid("psnr requires equal image dimensions"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    match region {
        Region::Whole => {
            for (x, y) in a.data().iter().zip(b.data()) {
                let d = x - y;
                sum += d * d;
            }
            count = a.data().len();
        }
        Region::Masked(mask) => {
            if mask.height() != a.height() || mask.width() != a.width() {
                return Err(Error::invalid("psnr region mask dimensions must match the images"));
            }
            for (i, &m) in mask.data().iter().enumerate() {
                if m == 1 {
                    for c in 0..3 {
                        let d = a.data()[i * 3 + c] - b.data()[i * 3 + c];
                        sum += d * d;
                    }
                    count += 3;
                }
            }
            if count == 0 {
                return Err(Error::invalid("psnr region is empty"));
            }
        }
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01; // (0.01 L)^2, L = 1
const SSIM_C2: f64 = 0.03 * 0.03;

/// Mean structural similarity over luminance with an 11x11 Gaussian window.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::invalid("ssim requires equal image dimensions"));
    }
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    let ga = a.to_monochrome();
    let gb = b.to_monochrome();

    // Normalized Gaussian taps.
    let half = SSIM_WINDOW / 2;
    let mut kernel = [0.0f64; SSIM_WINDOW];
    for (i, k) in kernel.iter_mut().enumerate() {
        let d = i as f64 - half as f64;
        *k = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let ksum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= ksum;
    }

    let mut total = 0.0;
    let mut windows = 0usize;
    for top in 0..=(h - SSIM_WINDOW) {
        for left in 0..=(w - SSIM_WINDOW) {
            let mut mx = 0.0;
            let mut my = 0.0;
            let mut sxx = 0.0;
            let mut syy = 0.0;
            let mut sxy = 0.0;
            for dy in 0..SSIM_WINDOW {
                for dx in 0..SSIM_WINDOW {
                    let wgt = kernel[dy] * kernel[dx];
                    let x = ga.get(top + dy, left + dx);
                    let y = gb.get(top + dy, left + dx);
                    mx += wgt * x;
                    my += wgt * y;
                    sxx += wgt * x * x;
                    syy += wgt * y * y;
                    sxy += wgt * x * y;
                }
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2);
            total += num / den;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GrayImage;

    fn noisy(h: usize, w: usize, seed: u64) -> RgbImage {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, "metrics-test");
        let data: Vec<f64> = (0..h * w * 3).map(|_| rng.gen_range(0.0..1.0)).collect();
        RgbImage::new(h, w, data).unwrap()
    }

    #[test]
    fn identical_images_have_infinite_psnr() {
        let img = noisy(8, 8, 1);
        assert_eq!(psnr(&img, &img, Region::Whole).unwrap(), f64::INFINITY);
    }

    #[test]
    fn uniform_tenth_difference_is_twenty_db() {
        let a = RgbImage::filled(16, 16, [0.5, 0.5, 0.5]).unwrap();
        let b = RgbImage::filled(16, 16, [0.6, 0.6, 0.6]).unwrap();
        let got = psnr(&a, &b, Region::Whole).unwrap();
        assert!((got - 20.0).abs() < 1e-6, "{got}");
    }

    #[test]
    fn single_pixel_region_full_error_is_zero_db() {
        let a = RgbImage::filled(4, 4, [0.0, 0.0, 0.0]).unwrap();
        let mut b = a.clone();
        b.set_pixel(2, 1, [1.0, 1.0, 1.0]);
        let mut mask = Mask::empty(4, 4).unwrap();
        mask.set(2, 1, true);
        let got = psnr(&a, &b, Region::Masked(&mask)).unwrap();
        assert!((got - 0.0).abs() < 1e-9, "{got}");
    }

    #[test]
    fn empty_region_is_invalid() {
        let img = noisy(4, 4, 2);
        let mask = Mask::empty(4, 4).unwrap();
        assert!(psnr(&img, &img, Region::Masked(&mask)).is_err());
    }

    #[test]
    fn psnr_is_symmetric() {
        let a = noisy(8, 8, 3);
        let b = noisy(8, 8, 4);
        let ab = psnr(&a, &b, Region::Whole).unwrap();
        let ba = psnr(&b, &a, Region::Whole).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn ssim_self_is_exactly_one() {
        let img = noisy(16, 20, 5);
        assert_eq!(ssim(&img, &img).unwrap(), 1.0);
    }

    #[test]
    fn ssim_negative_image_below_one() {
        let img = noisy(16, 16, 6);
        let neg_data: Vec<f64> = img.data().iter().map(|v| 1.0 - v).collect();
        let neg = RgbImage::new(16, 16, neg_data).unwrap();
        assert!(ssim(&img, &neg).unwrap() < 1.0);
    }

    #[test]
    fn ssim_constant_images_closed_form() {
        let a = RgbImage::filled(12, 12, [0.5, 0.5, 0.5]).unwrap();
        let b = RgbImage::filled(12, 12, [0.6, 0.6, 0.6]).unwrap();
        // Zero variances: SSIM = (2 mx my + C1)/(mx² + my² + C1).
        let want = (2.0 * 0.5 * 0.6 + SSIM_C1) / (0.25 + 0.36 + SSIM_C1);
        let got = ssim(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = RgbImage::filled(8, 8, [0.5; 3]).unwrap();
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn gray_replication_roundtrip_matches_luma() {
        let g = GrayImage::new(1, 2, vec![0.25, 0.75]).unwrap();
        let rgb = g.replicate_rgb();
        for (a, b) in rgb.to_monochrome().data().iter().zip(g.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

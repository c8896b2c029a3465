//! Monochrome completion: the stage that fills grayscale structure into the
//! missing region before any color is restored.
//!
//! Two sources are supported: an external file produced by any inpainting
//! backend, and a built-in learning-free harmonic fill that solves the
//! Laplace equation on the hole with the known pixels as Dirichlet boundary.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::{GrayImage, Mask};

/// Where a completed monochrome came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    ExternalFile,
    DiffusionFill,
}

/// A completed monochrome bottleneck. Unmasked pixels always agree with the
/// original input (exactly for the diffusion fill, within file quantization
/// for external sources).
#[derive(Debug, Clone)]
pub struct MonoCompletion {
    pub gray: GrayImage,
    pub provenance: Provenance,
    pub source_path: Option<PathBuf>,
}

/// How [`load_external_mono`] reacts when unmasked pixels disagree with the
/// original image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonoValidation {
    /// Reject the file, reporting the worst offending pixel.
    Strict,
    /// Keep the file's hole content but copy the original unmasked pixels
    /// over verbatim.
    ForceCopy,
}

pub const DEFAULT_DIFFUSION_TOL: f64 = 1e-5;

/// Default iteration cap, scaled with the domain diameter squared (the
/// convergence rate of Jacobi-type sweeps).
pub fn default_diffusion_max_iters(h: usize, w: usize) -> usize {
    10 * (h + w) * (h + w)
}

/// Fill the masked region of `gray` with the harmonic extension of its
/// boundary values: red-black Gauss-Seidel sweeps of the 4-neighbor
/// Laplacian until the largest update drops below `tol`.
///
/// Unmasked pixels are returned untouched. Image borders use the available
/// in-bounds neighbors only.
pub fn diffusion_fill(gray: &GrayImage, mask: &Mask, tol: f64, max_iters: usize) -> Result<MonoCompletion> {
    if gray.height() != mask.height() || gray.width() != mask.width() {
        return Err(Error::invalid("gray image and mask dimensions must match"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("diffusion tolerance must be positive"));
    }
    let (h, w) = (gray.height(), gray.width());
    let missing = mask.count_missing();
    if missing == h * w {
        return Err(Error::invalid("diffusion fill needs at least one unmasked pixel"));
    }
    if missing == 0 {
        return Ok(MonoCompletion {
            gray: gray.clone(),
            provenance: Provenance::DiffusionFill,
            source_path: None,
        });
    }

    let mut values: Vec<f64> = gray.data().to_vec();

    // Clamp the hole's starting values into the range of the Dirichlet
    // boundary (the known pixels adjacent to the hole). Every later update
    // is an average of in-range values, so the fill can never leave that
    // range; and rerunning on an already-filled image keeps its values,
    // which makes the fill idempotent up to one final sweep.
    let mut bmin = f64::INFINITY;
    let mut bmax = f64::NEG_INFINITY;
    for row in 0..h {
        for col in 0..w {
            if mask.is_missing(row, col) {
                continue;
            }
            if neighbors(row, col, h, w).any(|(r, c)| mask.is_missing(r, c)) {
                let v = values[row * w + col];
                bmin = bmin.min(v);
                bmax = bmax.max(v);
            }
        }
    }
    // A masked region without boundary cannot occur on a connected grid
    // with at least one known pixel.
    assert!(bmin <= bmax, "masked region without boundary");
    let holes: Vec<(usize, usize)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| mask.is_missing(r, c))
        .collect();
    for &(r, c) in &holes {
        values[r * w + c] = values[r * w + c].clamp(bmin, bmax);
    }

    // Red-black ordering: sweeps touch independent sets, so the update
    // order inside a color class cannot matter.
    let (reds, blacks): (Vec<_>, Vec<_>) = holes.iter().partition(|&&(r, c)| (r + c) % 2 == 0);
    let mut max_update = f64::INFINITY;
    let mut iters = 0usize;
    while max_update >= tol {
        if iters >= max_iters {
            return Err(Error::numeric(format!(
                "diffusion fill did not converge within {max_iters} sweeps; last max update {max_update:.3e}"
            )));
        }
        max_update = 0.0;
        for class in [&reds, &blacks] {
            for &&(r, c) in class {
                let mut sum = 0.0;
                let mut n = 0usize;
                for (nr, nc) in neighbors(r, c, h, w) {
                    sum += values[nr * w + nc];
                    n += 1;
                }
                let next = sum / n as f64;
                let delta = (next - values[r * w + c]).abs();
                if delta > max_update {
                    max_update = delta;
                }
                values[r * w + c] = next;
            }
        }
        iters += 1;
    }

    Ok(MonoCompletion {
        gray: GrayImage::new(h, w, values)?,
        provenance: Provenance::DiffusionFill,
        source_path: None,
    })
}

fn neighbors(r: usize, c: usize, h: usize, w: usize) -> impl Iterator<Item = (usize, usize)> {
    [
        (r.wrapping_sub(1), c),
        (r + 1, c),
        (r, c.wrapping_sub(1)),
        (r, c + 1),
    ]
    .into_iter()
    .filter(move |&(nr, nc)| nr < h && nc < w)
}

/// Tolerance for agreement between an external monochrome and the original
/// on unmasked pixels: two 8-bit quantization steps.
pub const EXTERNAL_MONO_TOL: f64 = 2.0 / 255.0;

/// Load a completed monochrome produced by an external backend and validate
/// that it left the known pixels alone.
pub fn load_external_mono(
    path: impl AsRef<Path>,
    original_gray: &GrayImage,
    mask: &Mask,
    validation: MonoValidation,
) -> Result<MonoCompletion> {
    let path = path.as_ref();
    let mut file = crate::raster::load_gray(path)?;
    if file.height() != original_gray.height() || file.width() != original_gray.width() {
        return Err(Error::invalid(format!(
            "{}: dimensions {}x{} do not match the input image {}x{}",
            path.display(),
            file.height(),
            file.width(),
            original_gray.height(),
            original_gray.width()
        )));
    }
    if mask.height() != original_gray.height() || mask.width() != original_gray.width() {
        return Err(Error::invalid("mask dimensions must match the input image"));
    }

    match validation {
        MonoValidation::Strict => {
            let mut worst: Option<(usize, usize, f64)> = None;
            for row in 0..file.height() {
                for col in 0..file.width() {
                    if mask.is_missing(row, col) {
                        continue;
                    }
                    let diff = (file.get(row, col) - original_gray.get(row, col)).abs();
                    if diff > EXTERNAL_MONO_TOL && worst.map_or(true, |(_, _, d)| diff > d) {
                        worst = Some((row, col, diff));
                    }
                }
            }
            if let Some((row, col, diff)) = worst {
                return Err(Error::invalid(format!(
                    "{}: unmasked pixel ({row}, {col}) differs from the input monochrome by {diff:.4} \
                     (tolerance {EXTERNAL_MONO_TOL:.4}); pass force mode to overwrite known pixels",
                    path.display()
                )));
            }
        }
        MonoValidation::ForceCopy => {
            for row in 0..file.height() {
                for col in 0..file.width() {
                    if !mask.is_missing(row, col) {
                        file.set(row, col, original_gray.get(row, col));
                    }
                }
            }
        }
    }

    Ok(MonoCompletion {
        gray: file,
        provenance: Provenance::ExternalFile,
        source_path: Some(path.to_path_buf()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskgen;

    #[test]
    fn one_dimensional_fill_is_linear_interpolation() {
        let gray = GrayImage::new(1, 5, vec![0.0, 0.9, 0.9, 0.9, 1.0]).unwrap();
        let mask = Mask::new(1, 5, vec![0, 1, 1, 1, 0]).unwrap();
        let fill = diffusion_fill(&gray, &mask, 1e-10, 100_000).unwrap();
        let want = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (a, b) in fill.gray.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-6, "{:?}", fill.gray.data());
        }
    }

    #[test]
    fn constant_region_fills_constant() {
        let gray = GrayImage::filled(8, 8, 0.42).unwrap();
        let mask = maskgen::rectangle_mask(8, 8, 2, 2, 4, 4).unwrap();
        let fill = diffusion_fill(&gray, &mask, 1e-8, 100_000).unwrap();
        for &v in fill.gray.data() {
            assert!((v - 0.42).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_mask_is_identity() {
        let gray = GrayImage::new(2, 2, vec![0.1, 0.4, 0.6, 0.9]).unwrap();
        let mask = Mask::empty(2, 2).unwrap();
        let fill = diffusion_fill(&gray, &mask, 1e-6, 10).unwrap();
        assert_eq!(fill.gray, gray);
    }

    #[test]
    fn fully_masked_image_is_rejected() {
        let gray = GrayImage::filled(4, 4, 0.5).unwrap();
        let mask = Mask::new(4, 4, vec![1; 16]).unwrap();
        assert!(diffusion_fill(&gray, &mask, 1e-6, 100).is_err());
    }

    #[test]
    fn unmasked_pixels_are_untouched() {
        let data: Vec<f64> = (0..64).map(|i| (i as f64 * 0.31) % 1.0).collect();
        let gray = GrayImage::new(8, 8, data.clone()).unwrap();
        let mask = maskgen::rectangle_mask(8, 8, 3, 3, 3, 3).unwrap();
        let fill = diffusion_fill(&gray, &mask, 1e-7, 100_000).unwrap();
        for row in 0..8 {
            for col in 0..8 {
                if !mask.is_missing(row, col) {
                    assert_eq!(fill.gray.get(row, col), gray.get(row, col));
                }
            }
        }
    }

    #[test]
    fn fill_is_idempotent_within_tolerance() {
        let data: Vec<f64> = (0..256).map(|i| ((i as f64 * 0.7).sin() * 0.5 + 0.5) * 0.9).collect();
        let gray = GrayImage::new(16, 16, data).unwrap();
        let mask = maskgen::rectangle_mask(16, 16, 4, 4, 8, 8).unwrap();
        let tol = 1e-7;
        let once = diffusion_fill(&gray, &mask, tol, 1_000_000).unwrap();
        let twice = diffusion_fill(&once.gray, &mask, tol, 1_000_000).unwrap();
        for (a, b) in once.gray.data().iter().zip(twice.gray.data()) {
            assert!((a - b).abs() <= tol);
        }
    }

    fn write_gray_png(path: &Path, img: &GrayImage) {
        crate::raster::save_gray(img, path).unwrap();
    }

    #[test]
    fn external_mono_accepted_when_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mono.png");
        let gray = GrayImage::new(4, 4, (0..16).map(|i| i as f64 / 16.0).collect()).unwrap();
        let mask = maskgen::rectangle_mask(4, 4, 1, 1, 2, 2).unwrap();
        write_gray_png(&path, &gray);
        let loaded = load_external_mono(&path, &gray, &mask, MonoValidation::Strict).unwrap();
        assert_eq!(loaded.provenance, Provenance::ExternalFile);
        for row in 0..4 {
            for col in 0..4 {
                if !mask.is_missing(row, col) {
                    assert!((loaded.gray.get(row, col) - gray.get(row, col)).abs() <= 1.0 / 255.0);
                }
            }
        }
    }

    #[test]
    fn external_mono_strict_rejects_and_names_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mono.png");
        let gray = GrayImage::filled(4, 4, 0.2).unwrap();
        let mask = maskgen::rectangle_mask(4, 4, 0, 0, 2, 2).unwrap();
        let mut tampered = gray.clone();
        tampered.set(3, 2, 0.7); // unmasked pixel, off by 0.5
        write_gray_png(&path, &tampered);
        let err = load_external_mono(&path, &gray, &mask, MonoValidation::Strict).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(3, 2)"), "{msg}");
    }

    #[test]
    fn external_mono_force_copies_known_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mono.png");
        let gray = GrayImage::filled(4, 4, 0.2).unwrap();
        let mask = maskgen::rectangle_mask(4, 4, 0, 0, 2, 2).unwrap();
        let mut tampered = gray.clone();
        tampered.set(3, 2, 0.7);
        tampered.set(0, 0, 0.9); // inside the hole: must be kept
        write_gray_png(&path, &tampered);
        let loaded = load_external_mono(&path, &gray, &mask, MonoValidation::ForceCopy).unwrap();
        assert_eq!(loaded.gray.get(3, 2), 0.2);
        assert!((loaded.gray.get(0, 0) - 0.9).abs() <= 1.0 / 255.0);
    }
}

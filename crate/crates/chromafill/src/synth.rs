//! Deterministic synthetic scenes for demos, tests, and benchmarks.
//!
//! The repository ships no image assets, so everything runnable builds its
//! inputs here. Scenes are natural-image-like: multi-octave value noise for
//! texture, smooth region boundaries, and palettes in which the same
//! luminance can mean different colors in different regions. That last
//! property is what makes guided colorization non-trivial: a local
//! gray-to-color map is ambiguous, and only spatial context resolves it.

use rand::Rng;

use crate::raster::{GrayImage, RgbImage};

/// Luma-neutral chroma directions: adding a multiple of either to a gray
/// pixel leaves the monochrome conversion unchanged (0.30/0.59/0.11
/// weights).
const CHROMA_A: [f64; 3] = [0.59, -0.30, 0.0]; // red-green axis
const CHROMA_B: [f64; 3] = [0.11, 0.0, -0.30]; // red-blue axis

/// Bilinearly interpolated random grid with `cell`-pixel spacing.
fn value_noise(h: usize, w: usize, cell: usize, seed: u64, label: &str) -> GrayImage {
    let cell = cell.max(1);
    let gh = h.div_ceil(cell) + 1;
    let gw = w.div_ceil(cell) + 1;
    let mut rng = crate::rng::stream(seed, label);
    let grid: Vec<f64> = (0..gh * gw).map(|_| rng.gen_range(0.0..1.0)).collect();
    let coarse = GrayImage::new(gh, gw, grid).expect("grid is well-formed");
    let up = coarse
        .bilinear_upsample((gh - 1) * cell + 1, (gw - 1) * cell + 1)
        .expect("upsample target covers the image");
    let data: Vec<f64> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| up.get(r, c))
        .collect();
    GrayImage::new(h, w, data).expect("cropped noise is well-formed")
}

/// Sum of octaves of value noise, normalized to `[0, 1]`.
fn fractal_noise(h: usize, w: usize, base_cell: usize, octaves: usize, seed: u64, label: &str) -> GrayImage {
    let mut acc = vec![0.0f64; h * w];
    let mut amplitude = 1.0;
    let mut total = 0.0;
    for o in 0..octaves {
        let cell = (base_cell >> o).max(2);
        let layer = value_noise(h, w, cell, seed, &format!("{label}/oct{o}"));
        for (a, &v) in acc.iter_mut().zip(layer.data()) {
            *a += amplitude * v;
        }
        total += amplitude;
        amplitude *= 0.5;
    }
    for a in &mut acc {
        *a /= total;
    }
    GrayImage::new(h, w, acc).expect("normalized noise is well-formed")
}

fn chroma_shift(luma: f64, dir: [f64; 3], amount: f64) -> [f64; 3] {
    [
        (luma + dir[0] * amount).clamp(0.0, 1.0),
        (luma + dir[1] * amount).clamp(0.0, 1.0),
        (luma + dir[2] * amount).clamp(0.0, 1.0),
    ]
}

fn squash(v: f64, lo: f64, hi: f64) -> f64 {
    lo + v * (hi - lo)
}

/// Scene families; see [`demo_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// Two textured regions with a smooth boundary; both share luminance
    /// statistics but carry opposite chroma.
    TwoRegions,
    /// Vertical sky gradient over a textured ground band.
    SkyGround,
    /// Four quadrant-ish patches of one texture, each with its own chroma.
    Quilt,
    /// Smooth large-scale color field where chroma follows luminance.
    SmoothField,
    /// Diagonal color bands over shared texture.
    Bands,
}

pub const SCENE_KINDS: [SceneKind; 5] = [
    SceneKind::TwoRegions,
    SceneKind::SkyGround,
    SceneKind::Quilt,
    SceneKind::SmoothField,
    SceneKind::Bands,
];

/// Render one deterministic scene.
pub fn demo_image(kind: SceneKind, h: usize, w: usize, seed: u64) -> RgbImage {
    let texture = fractal_noise(h, w, (h.min(w) / 2).max(4), 4, seed, "synth/texture");
    let regions = fractal_noise(h, w, (h.min(w)).max(4), 2, seed, "synth/regions");
    let mut data = Vec::with_capacity(h * w * 3);
    for row in 0..h {
        for col in 0..w {
            let t = squash(texture.get(row, col), 0.18, 0.82);
            let px = match kind {
                SceneKind::TwoRegions => {
                    let a = regions.get(row, col) > 0.5;
                    if a {
                        chroma_shift(t, CHROMA_A, 0.5)
                    } else {
                        chroma_shift(t, CHROMA_A, -0.5)
                    }
                }
                SceneKind::SkyGround => {
                    let horizon = 0.45 + 0.15 * (regions.get(0, col) - 0.5);
                    let y = row as f64 / h as f64;
                    if y < horizon {
                        // Sky: brightness falls toward the horizon, blue chroma.
                        let sky = squash(1.0 - y / horizon, 0.45, 0.85)
                            * squash(texture.get(row, col), 0.85, 1.0);
                        chroma_shift(sky, CHROMA_B, -0.9)
                    } else {
                        chroma_shift(t * 0.8, CHROMA_A, 0.45)
                    }
                }
                SceneKind::Quilt => {
                    let qr = (row * 2) / h.max(1);
                    let qc = (col * 2) / w.max(1);
                    match (qr.min(1), qc.min(1)) {
                        (0, 0) => chroma_shift(t, CHROMA_A, 0.5),
                        (0, 1) => chroma_shift(t, CHROMA_B, 0.8),
                        (1, 0) => chroma_shift(t, CHROMA_B, -0.8),
                        _ => chroma_shift(t, CHROMA_A, -0.5),
                    }
                }
                SceneKind::SmoothField => {
                    let c = regions.get(row, col) - 0.5;
                    chroma_shift(t, CHROMA_A, c * 0.9)
                }
                SceneKind::Bands => {
                    let phase = (row + col) as f64 / (h + w) as f64;
                    let band = ((phase * 4.0) as usize).min(3);
                    let dirs = [0.55, -0.55, 0.0, 0.0];
                    let dirs_b = [0.0, 0.0, 0.85, -0.85];
                    let a = chroma_shift(t, CHROMA_A, dirs[band]);
                    let b = chroma_shift(t, CHROMA_B, dirs_b[band]);
                    [(a[0] + b[0] - t), (a[1] + b[1] - t), (a[2] + b[2] - t)]
                        .map(|v| v.clamp(0.0, 1.0))
                }
            };
            data.extend_from_slice(&px);
        }
    }
    RgbImage::new(h, w, data).expect("scene values are clamped")
}

/// A deterministic set of named scenes cycling through every kind.
pub fn demo_set(count: usize, h: usize, w: usize, seed: u64) -> Vec<(String, RgbImage)> {
    (0..count)
        .map(|i| {
            let kind = SCENE_KINDS[i % SCENE_KINDS.len()];
            let name = format!("scene-{i:02}-{}", kind_slug(kind));
            (name, demo_image(kind, h, w, seed.wrapping_add(i as u64)))
        })
        .collect()
}

fn kind_slug(kind: SceneKind) -> &'static str {
    match kind {
        SceneKind::TwoRegions => "two-regions",
        SceneKind::SkyGround => "sky-ground",
        SceneKind::Quilt => "quilt",
        SceneKind::SmoothField => "smooth-field",
        SceneKind::Bands => "bands",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic() {
        let a = demo_image(SceneKind::TwoRegions, 32, 32, 5);
        let b = demo_image(SceneKind::TwoRegions, 32, 32, 5);
        assert_eq!(a, b);
        let c = demo_image(SceneKind::TwoRegions, 32, 32, 6);
        assert_ne!(a, c);
    }

    #[test]
    fn two_region_scene_is_roughly_isoluminant() {
        // Chroma shifts are luma-neutral, so the monochrome image should
        // match the underlying texture closely except where clamping bit.
        let img = demo_image(SceneKind::TwoRegions, 64, 64, 1);
        let gray = img.to_monochrome();
        let in_range = gray
            .data()
            .iter()
            .filter(|&&v| (0.17..=0.83).contains(&v))
            .count();
        assert!(in_range > 64 * 64 / 2);
        // Both chroma variants appear.
        let reddish = img.data().chunks_exact(3).filter(|p| p[0] > p[1] + 0.2).count();
        let greenish = img.data().chunks_exact(3).filter(|p| p[1] > p[0] + 0.2).count();
        assert!(reddish > 100 && greenish > 100, "reddish {reddish} greenish {greenish}");
    }

    #[test]
    fn demo_set_names_and_sizes() {
        let set = demo_set(6, 16, 24, 0);
        assert_eq!(set.len(), 6);
        assert!(set[0].0.contains("two-regions"));
        assert!(set[5].0.contains("sky-ground"));
        assert!(set.iter().all(|(_, img)| img.height() == 16 && img.width() == 24));
    }
}

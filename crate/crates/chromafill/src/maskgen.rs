//! Free-form and rectangular mask simulation.
//!
//! Free-form masks imitate eraser strokes: each stroke is a random walk whose
//! segments are rasterized as thick lines with round caps. Everything is
//! driven by a seeded stream (see [`crate::rng`]), so equal seed and config
//! give byte-identical masks on any machine.

use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::Mask;

/// Stroke sampling bounds for [`free_form_mask`].
#[derive(Debug, Clone)]
pub struct MaskGenConfig {
    pub min_strokes: usize,
    pub max_strokes: usize,
    /// Stroke thickness bounds in pixels.
    pub min_width: usize,
    pub max_width: usize,
    pub max_vertices_per_stroke: usize,
    /// Largest direction change between consecutive segments, radians.
    pub max_turn_angle: f64,
    pub max_segment_length: f64,
    pub seed: u64,
}

impl Default for MaskGenConfig {
    /// Defaults calibrated for 256x256 images; see the ratio-band test below.
    fn default() -> Self {
        Self {
            min_strokes: 1,
            max_strokes: 8,
            min_width: 8,
            max_width: 40,
            max_vertices_per_stroke: 12,
            max_turn_angle: std::f64::consts::FRAC_PI_2,
            max_segment_length: 60.0,
            seed: 0,
        }
    }
}

impl MaskGenConfig {
    fn validate(&self) -> Result<()> {
        if self.min_strokes > self.max_strokes {
            return Err(Error::invalid("min_strokes exceeds max_strokes"));
        }
        if self.min_width > self.max_width || self.min_width < 1 {
            return Err(Error::invalid("stroke widths must satisfy 1 <= min <= max"));
        }
        if self.max_vertices_per_stroke < 2 {
            return Err(Error::invalid("strokes need at least 2 vertices"));
        }
        if !(self.max_turn_angle >= 0.0) || !(self.max_segment_length >= 1.0) {
            return Err(Error::invalid("turn angle must be >= 0 and segment length >= 1"));
        }
        Ok(())
    }
}

/// One brush stroke: a vertex chain and a thickness.
#[derive(Debug, Clone)]
pub struct BrushStroke {
    /// `(row, col)` vertices, clamped inside the image bounds.
    pub vertices: Vec<(f64, f64)>,
    pub width: f64,
}

/// Generate a free-form mask of random brush strokes.
///
/// `max_strokes = 0` is allowed and yields an empty mask.
pub fn free_form_mask(h: usize, w: usize, cfg: &MaskGenConfig) -> Result<Mask> {
    if h < 16 || w < 16 {
        return Err(Error::invalid(format!(
            "free-form masks need at least 16x16 pixels, got {h}x{w}"
        )));
    }
    cfg.validate()?;
    let mut rng = crate::rng::stream(cfg.seed, "maskgen/free-form");
    let n_strokes = rng.gen_range(cfg.min_strokes..=cfg.max_strokes);

    let mut mask = Mask::empty(h, w)?;
    for _ in 0..n_strokes {
        let stroke = sample_stroke(h, w, cfg, &mut rng);
        rasterize_stroke(&mut mask, &stroke);
    }
    Ok(mask)
}

fn sample_stroke(h: usize, w: usize, cfg: &MaskGenConfig, rng: &mut impl Rng) -> BrushStroke {
    let width = rng.gen_range(cfg.min_width..=cfg.max_width) as f64;
    let n_vertices = rng.gen_range(2..=cfg.max_vertices_per_stroke);
    let mut row = rng.gen_range(0.0..h as f64);
    let mut col = rng.gen_range(0.0..w as f64);
    let mut dir = rng.gen_range(0.0..std::f64::consts::TAU);

    let mut vertices = vec![(row, col)];
    for _ in 1..n_vertices {
        dir += rng.gen_range(-cfg.max_turn_angle..=cfg.max_turn_angle);
        let len = rng.gen_range(1.0..=cfg.max_segment_length);
        row = (row + len * dir.sin()).clamp(0.0, (h - 1) as f64);
        col = (col + len * dir.cos()).clamp(0.0, (w - 1) as f64);
        vertices.push((row, col));
    }
    BrushStroke { vertices, width }
}

/// Mark every pixel within `width/2` of a stroke segment (round caps).
fn rasterize_stroke(mask: &mut Mask, stroke: &BrushStroke) {
    let radius = stroke.width / 2.0;
    let (h, w) = (mask.height() as f64, mask.width() as f64);
    for seg in stroke.vertices.windows(2) {
        let (r0, c0) = seg[0];
        let (r1, c1) = seg[1];
        let lo_r = ((r0.min(r1) - radius).floor().max(0.0)) as usize;
        let hi_r = ((r0.max(r1) + radius).ceil().min(h - 1.0)) as usize;
        let lo_c = ((c0.min(c1) - radius).floor().max(0.0)) as usize;
        let hi_c = ((c0.max(c1) + radius).ceil().min(w - 1.0)) as usize;
        for row in lo_r..=hi_r {
            for col in lo_c..=hi_c {
                if point_segment_dist(row as f64, col as f64, r0, c0, r1, c1) <= radius {
                    mask.set(row, col, true);
                }
            }
        }
    }
}

fn point_segment_dist(pr: f64, pc: f64, r0: f64, c0: f64, r1: f64, c1: f64) -> f64 {
    let (dr, dc) = (r1 - r0, c1 - c0);
    let len2 = dr * dr + dc * dc;
    let t = if len2 > 0.0 {
        (((pr - r0) * dr + (pc - c0) * dc) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qr, qc) = (r0 + t * dr, c0 + t * dc);
    ((pr - qr).powi(2) + (pc - qc).powi(2)).sqrt()
}

/// Axis-aligned rectangle mask: 1 inside, 0 outside.
pub fn rectangle_mask(
    h: usize,
    w: usize,
    top: usize,
    left: usize,
    rect_h: usize,
    rect_w: usize,
) -> Result<Mask> {
    if top + rect_h > h || left + rect_w > w {
        return Err(Error::invalid(format!(
            "rectangle {rect_h}x{rect_w} at ({top}, {left}) lies outside a {h}x{w} image"
        )));
    }
    let mut mask = Mask::empty(h, w)?;
    for row in top..top + rect_h {
        for col in left..left + rect_w {
            mask.set(row, col, true);
        }
    }
    Ok(mask)
}

/// Fraction of pixels marked missing.
pub fn mask_ratio(mask: &Mask) -> f64 {
    mask.count_missing() as f64 / (mask.height() * mask.width()) as f64
}

const SCALE_STEP_CAP: usize = 10_000;

/// Morphologically dilate or erode the missing region until its ratio is
/// within `tol` of `target`.
///
/// Full 4-neighborhood steps are applied while they fit; the final step
/// flips just enough boundary pixels (in row-major order) to land on the
/// target exactly, so the result is deterministic.
pub fn scale_mask_to_ratio(mask: &Mask, target: f64, tol: f64) -> Result<Mask> {
    if !(0.0 < target && target < 1.0) {
        return Err(Error::invalid(format!("target ratio {target} must lie in (0, 1)")));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let total = mask.height() * mask.width();
    let target_count = (target * total as f64).round() as usize;
    let tol_count = (tol * total as f64).floor() as usize;

    let mut out = mask.clone();
    for _ in 0..SCALE_STEP_CAP {
        let count = out.count_missing();
        if count.abs_diff(target_count) <= tol_count {
            return Ok(out);
        }
        let grow = count < target_count;
        let candidates = boundary_candidates(&out, grow);
        if candidates.is_empty() {
            return Err(Error::numeric(format!(
                "mask ratio {target:.4} unreachable: stuck at {:.4} with no pixels left to {}",
                mask_ratio(&out),
                if grow { "dilate" } else { "erode" }
            )));
        }
        let needed = target_count.abs_diff(count);
        for &(row, col) in candidates.iter().take(needed) {
            out.set(row, col, grow);
        }
    }
    Err(Error::numeric(format!(
        "mask ratio {target:.4} not reached within {SCALE_STEP_CAP} steps; achieved {:.4}",
        mask_ratio(&out)
    )))
}

/// Pixels eligible for the next morphological step, in row-major order.
/// Growing: known pixels 4-adjacent to a missing one. Shrinking: missing
/// pixels 4-adjacent to a known one or on the image border.
fn boundary_candidates(mask: &Mask, grow: bool) -> Vec<(usize, usize)> {
    let (h, w) = (mask.height(), mask.width());
    let mut out = Vec::new();
    for row in 0..h {
        for col in 0..w {
            if mask.is_missing(row, col) == grow {
                continue;
            }
            let mut adjacent = false;
            let mut on_border = false;
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (row as i64 + dr, col as i64 + dc);
                if nr < 0 || nr >= h as i64 || nc < 0 || nc >= w as i64 {
                    on_border = true;
                    continue;
                }
                if mask.is_missing(nr as usize, nc as usize) == grow {
                    adjacent = true;
                    break;
                }
            }
            if adjacent || (!grow && on_border) {
                out.push((row, col));
            }
        }
    }
    out
}

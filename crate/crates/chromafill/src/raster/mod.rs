//! Raster types and resampling shared by the whole pipeline.
//!
//! Images are row-major `f64` planes with values in `[0, 1]`; masks are
//! binary with 1 marking a missing pixel. Coordinates are `(row, col)` with
//! the origin at the top-left.

mod io;

pub use io::{load_gray, load_image, load_mask, save_gray, save_image, save_mask};

use crate::error::{Error, Result};

/// Luma weights for the monochrome conversion (classic NTSC coefficients).
pub const LUMA_WEIGHTS: [f64; 3] = [0.30, 0.59, 0.11];

/// An RGB image with interleaved channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// A single-channel luminance image, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// A binary mask; 1 marks a missing pixel, 0 a known pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        if data.len() != height * width * 3 {
            return Err(Error::invalid(format!(
                "rgb data length {} does not match {}x{}x3",
                data.len(),
                height,
                width
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("rgb value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [f64; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i] = rgb[0].clamp(0.0, 1.0);
        self.data[i + 1] = rgb[1].clamp(0.0, 1.0);
        self.data[i + 2] = rgb[2].clamp(0.0, 1.0);
    }

    /// Weighted single-channel conversion, clamped to `[0, 1]`.
    pub fn to_monochrome(&self) -> GrayImage {
        let [wr, wg, wb] = LUMA_WEIGHTS;
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (wr * p[0] + wg * p[1] + wb * p[2]).clamp(0.0, 1.0))
            .collect();
        GrayImage { height: self.height, width: self.width, data }
    }

    /// Block-average downsampling. Edge blocks that hang over the image
    /// average only the in-bounds pixels.
    pub fn box_downsample(&self, factor: usize) -> Result<Self> {
        let (oh, ow) = downsampled_dims(self.height, self.width, factor)?;
        let mut data = vec![0.0; oh * ow * 3];
        for oy in 0..oh {
            for ox in 0..ow {
                let (y0, y1) = block_range(oy, factor, self.height);
                let (x0, x1) = block_range(ox, factor, self.width);
                let mut acc = [0.0f64; 3];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let i = (y * self.width + x) * 3;
                        acc[0] += self.data[i];
                        acc[1] += self.data[i + 1];
                        acc[2] += self.data[i + 2];
                    }
                }
                let n = ((y1 - y0) * (x1 - x0)) as f64;
                let o = (oy * ow + ox) * 3;
                data[o] = acc[0] / n;
                data[o + 1] = acc[1] / n;
                data[o + 2] = acc[2] / n;
            }
        }
        Ok(Self { height: oh, width: ow, data })
    }

    /// Corner-aligned bilinear interpolation up to `out_h` x `out_w`.
    pub fn bilinear_upsample(&self, out_h: usize, out_w: usize) -> Result<Self> {
        let plan = UpsamplePlan::new(self.height, self.width, out_h, out_w)?;
        let mut data = vec![0.0; out_h * out_w * 3];
        for oy in 0..out_h {
            let (y0, y1, ty) = plan.rows[oy];
            for ox in 0..out_w {
                let (x0, x1, tx) = plan.cols[ox];
                for c in 0..3 {
                    let p00 = self.data[(y0 * self.width + x0) * 3 + c];
                    let p01 = self.data[(y0 * self.width + x1) * 3 + c];
                    let p10 = self.data[(y1 * self.width + x0) * 3 + c];
                    let p11 = self.data[(y1 * self.width + x1) * 3 + c];
                    data[(oy * out_w + ox) * 3 + c] = lerp2(p00, p01, p10, p11, tx, ty);
                }
            }
        }
        Ok(Self { height: out_h, width: out_w, data })
    }
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "gray data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("gray value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value.clamp(0.0, 1.0);
    }

    /// Expand to an RGB image with all three channels equal.
    pub fn replicate_rgb(&self) -> RgbImage {
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for &v in &self.data {
            data.extend_from_slice(&[v, v, v]);
        }
        RgbImage { height: self.height, width: self.width, data }
    }

    pub fn box_downsample(&self, factor: usize) -> Result<Self> {
        let (oh, ow) = downsampled_dims(self.height, self.width, factor)?;
        let mut data = vec![0.0; oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let (y0, y1) = block_range(oy, factor, self.height);
                let (x0, x1) = block_range(ox, factor, self.width);
                let mut acc = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        acc += self.data[y * self.width + x];
                    }
                }
                data[oy * ow + ox] = acc / ((y1 - y0) * (x1 - x0)) as f64;
            }
        }
        Ok(Self { height: oh, width: ow, data })
    }

    pub fn bilinear_upsample(&self, out_h: usize, out_w: usize) -> Result<Self> {
        let plan = UpsamplePlan::new(self.height, self.width, out_h, out_w)?;
        let mut data = vec![0.0; out_h * out_w];
        for oy in 0..out_h {
            let (y0, y1, ty) = plan.rows[oy];
            for ox in 0..out_w {
                let (x0, x1, tx) = plan.cols[ox];
                let p00 = self.data[y0 * self.width + x0];
                let p01 = self.data[y0 * self.width + x1];
                let p10 = self.data[y1 * self.width + x0];
                let p11 = self.data[y1 * self.width + x1];
                data[oy * out_w + ox] = lerp2(p00, p01, p10, p11, tx, ty);
            }
        }
        Ok(Self { height: out_h, width: out_w, data })
    }
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("mask dimensions must be at least 1x1"));
        }
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "mask data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::invalid("mask values must be 0 or 1"));
        }
        Ok(Self { height, width, data })
    }

    pub fn empty(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] == 1
    }

    pub fn set(&mut self, row: usize, col: usize, missing: bool) {
        self.data[row * self.width + col] = u8::from(missing);
    }

    pub fn count_missing(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// Max-pool downsampling: a block containing any missing pixel becomes
    /// missing, so no coarse pixel ever mixes known and unknown content.
    pub fn maxpool_downsample(&self, factor: usize) -> Result<Self> {
        let (oh, ow) = downsampled_dims(self.height, self.width, factor)?;
        let mut data = vec![0u8; oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let (y0, y1) = block_range(oy, factor, self.height);
                let (x0, x1) = block_range(ox, factor, self.width);
                let mut m = 0;
                'block: for y in y0..y1 {
                    for x in x0..x1 {
                        if self.data[y * self.width + x] == 1 {
                            m = 1;
                            break 'block;
                        }
                    }
                }
                data[oy * ow + ox] = m;
            }
        }
        Ok(Self { height: oh, width: ow, data })
    }
}

fn downsampled_dims(h: usize, w: usize, factor: usize) -> Result<(usize, usize)> {
    if factor < 1 {
        return Err(Error::invalid("downsample factor must be at least 1"));
    }
    if h < factor || w < factor {
        return Err(Error::invalid(format!(
            "cannot downsample {h}x{w} by factor {factor}"
        )));
    }
    Ok((h.div_ceil(factor), w.div_ceil(factor)))
}

fn block_range(out_idx: usize, factor: usize, len: usize) -> (usize, usize) {
    let start = out_idx * factor;
    (start, (start + factor).min(len))
}

fn lerp2(p00: f64, p01: f64, p10: f64, p11: f64, tx: f64, ty: f64) -> f64 {
    let top = p00 + (p01 - p00) * tx;
    let bot = p10 + (p11 - p10) * tx;
    top + (bot - top) * ty
}

/// Precomputed source rows/cols and fractional offsets for one upsample.
struct UpsamplePlan {
    rows: Vec<(usize, usize, f64)>,
    cols: Vec<(usize, usize, f64)>,
}

impl UpsamplePlan {
    fn new(src_h: usize, src_w: usize, out_h: usize, out_w: usize) -> Result<Self> {
        if out_h < src_h || out_w < src_w {
            return Err(Error::invalid(format!(
                "upsample target {out_h}x{out_w} is smaller than source {src_h}x{src_w}"
            )));
        }
        Ok(Self {
            rows: Self::axis(src_h, out_h),
            cols: Self::axis(src_w, out_w),
        })
    }

    fn axis(src: usize, out: usize) -> Vec<(usize, usize, f64)> {
        let scale = if out > 1 { (src - 1) as f64 / (out - 1) as f64 } else { 0.0 };
        (0..out)
            .map(|o| {
                let s = o as f64 * scale;
                let i0 = (s.floor() as usize).min(src - 1);
                let i1 = (i0 + 1).min(src - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    }
}

/// One pyramid level: grayscale, color, and mask at the same resolution.
#[derive(Debug, Clone)]
pub struct PyramidLevel {
    pub gray: GrayImage,
    pub color: RgbImage,
    pub mask: Mask,
}

/// Aligned grayscale/color/mask pyramids ordered coarsest-first.
#[derive(Debug, Clone)]
pub struct PyramidSet {
    levels: Vec<PyramidLevel>,
    factor: usize,
}

/// Minimum side length allowed for the coarsest pyramid level.
pub const MIN_COARSE_SIDE: usize = 8;

impl PyramidSet {
    /// Build aligned pyramids from independent gray, color and mask planes.
    ///
    /// Images go through box downsampling and the mask through max-pooling,
    /// one factor step per level. The finest level keeps the inputs as-is.
    pub fn from_parts(
        gray: GrayImage,
        color: RgbImage,
        mask: Mask,
        height: usize,
        factor: usize,
    ) -> Result<Self> {
        if gray.height() != color.height()
            || gray.width() != color.width()
            || gray.height() != mask.height()
            || gray.width() != mask.width()
        {
            return Err(Error::invalid("gray, color, and mask dimensions must match"));
        }
        if height < 1 {
            return Err(Error::invalid("pyramid height must be at least 1"));
        }
        if factor < 1 {
            return Err(Error::invalid("pyramid factor must be at least 1"));
        }
        let (mut ch, mut cw) = (gray.height(), gray.width());
        let mut max_height = 1;
        while ch.div_ceil(factor) >= MIN_COARSE_SIDE && cw.div_ceil(factor) >= MIN_COARSE_SIDE && factor > 1 {
            ch = ch.div_ceil(factor);
            cw = cw.div_ceil(factor);
            max_height += 1;
        }
        if factor > 1 && height > max_height {
            return Err(Error::invalid(format!(
                "pyramid height {height} leaves a coarsest level below {MIN_COARSE_SIDE} pixels per side \
                 for a {}x{} image; the largest usable height is {max_height}",
                gray.height(),
                gray.width()
            )));
        }

        let mut levels = vec![PyramidLevel { gray, color, mask }];
        for _ in 1..height {
            let prev = levels.last().unwrap();
            levels.push(PyramidLevel {
                gray: prev.gray.box_downsample(factor)?,
                color: prev.color.box_downsample(factor)?,
                mask: prev.mask.maxpool_downsample(factor)?,
            });
        }
        levels.reverse();
        Ok(Self { levels, factor })
    }

    pub fn levels(&self) -> &[PyramidLevel] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &PyramidLevel {
        &self.levels[n]
    }

    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn factor(&self) -> usize {
        self.factor
    }
}

/// Build pyramids for a color image and its mask; the grayscale pyramid is
/// derived from the monochrome conversion of `img`.
pub fn build_pyramids(img: &RgbImage, mask: &Mask, height: usize, factor: usize) -> Result<PyramidSet> {
    PyramidSet::from_parts(img.to_monochrome(), img.clone(), mask.clone(), height, factor)
}

/// Shift every pixel's channels by a common offset so its luminance matches
/// `gray`, then clamp to `[0, 1]`. Channel differences are preserved wherever
/// no clamp engages. Optional post-process; the pipeline leaves it off by
/// default.
pub fn reattach_luminance(colorized: &RgbImage, gray: &GrayImage) -> Result<RgbImage> {
    if colorized.height() != gray.height() || colorized.width() != gray.width() {
        return Err(Error::invalid(format!(
            "luminance reattach dimension mismatch: {}x{} vs {}x{}",
            colorized.height(),
            colorized.width(),
            gray.height(),
            gray.width()
        )));
    }
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let mut data = Vec::with_capacity(colorized.data.len());
    for (p, &g) in colorized.data.chunks_exact(3).zip(gray.data.iter()) {
        let luma = wr * p[0] + wg * p[1] + wb * p[2];
        let shift = g - luma;
        data.push((p[0] + shift).clamp(0.0, 1.0));
        data.push((p[1] + shift).clamp(0.0, 1.0));
        data.push((p[2] + shift).clamp(0.0, 1.0));
    }
    Ok(RgbImage { height: colorized.height, width: colorized.width, data })
}

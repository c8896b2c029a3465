//! Layer implementations with exact analytic gradients.
//!
//! Convolutions run as im2col + GEMM. Parallel sections are structured so
//! results never depend on thread scheduling: output blocks are disjoint and
//! reductions happen in a fixed order.

use rand::Rng;
use rayon::prelude::*;

use super::tensor::{matmul, matmul_at, matmul_bt_acc};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Negative slope shared by every leaky ReLU in the generator stacks.
pub const LEAKY_SLOPE: f64 = 0.2;

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A named parameter (or non-trainable buffer) with its gradient.
#[derive(Debug, Clone)]
pub struct ParamTensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    pub grad: Vec<T>,
    /// Running statistics set this to false; Adam skips them.
    pub trainable: bool,
}

impl<T: Real> ParamTensor<T> {
    fn new(name: String, shape: Vec<usize>, data: Vec<T>, trainable: bool) -> Self {
        let n = data.len();
        debug_assert_eq!(n, shape.iter().product::<usize>());
        Self { name, shape, data, grad: vec![T::ZERO; n], trainable }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::ZERO);
    }
}

fn stale_tape(layer: &str) -> Error {
    Error::InvalidState(format!(
        "{layer}: backward called without a recorded train-mode forward pass"
    ))
}

/// Reflect an index one step past either border back inside (reflect-101).
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    if i < 0 {
        (-i) as usize
    } else if i as usize >= n {
        2 * n - 2 - i as usize
    } else {
        i as usize
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Activation record for one conv backward pass. For 3x3 convs the unfolded
/// column matrix is what both gradient products consume, and it lives in the
/// layer's persistent scratch buffer; the tape only marks it valid.
#[derive(Debug, Clone)]
enum ConvTape<T> {
    Cols { h: usize, w: usize },
    Input(Tensor<T>),
}

#[derive(Debug, Clone)]
pub struct Conv2d<T: Real> {
    pub(crate) in_ch: usize,
    pub(crate) out_ch: usize,
    pub(crate) ksize: usize,
    pub(crate) weight: ParamTensor<T>,
    pub(crate) bias: ParamTensor<T>,
    saved: Option<ConvTape<T>>,
    // Reused across iterations so the training loop does not re-fault tens
    // of megabytes of fresh pages every step.
    cols_buf: Vec<T>,
    dcols_buf: Vec<T>,
}

impl<T: Real> Conv2d<T> {
    /// He-style fan-in uniform init for the kernel, zero bias.
    pub fn new(name: &str, in_ch: usize, out_ch: usize, ksize: usize, rng: &mut impl Rng) -> Self {
        assert!(ksize == 1 || ksize == 3, "only 1x1 and 3x3 kernels are supported");
        let fan_in = (in_ch * ksize * ksize) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let weight: Vec<T> = (0..out_ch * in_ch * ksize * ksize)
            .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
            .collect();
        Self {
            in_ch,
            out_ch,
            ksize,
            weight: ParamTensor::new(
                format!("{name}.weight"),
                vec![out_ch, in_ch, ksize, ksize],
                weight,
                true,
            ),
            bias: ParamTensor::new(format!("{name}.bias"), vec![out_ch], vec![T::ZERO; out_ch], true),
            saved: None,
            cols_buf: Vec::new(),
            dcols_buf: Vec::new(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.channels() != self.in_ch {
            return Err(Error::invalid(format!(
                "{}: expected {} input channels, got {}",
                self.weight.name,
                self.in_ch,
                x.channels()
            )));
        }
        if self.ksize == 3 && (x.height() < 2 || x.width() < 2) {
            return Err(Error::invalid(format!(
                "{}: reflection padding needs spatial dims >= 2, got {}x{}",
                self.weight.name,
                x.height(),
                x.width()
            )));
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let p = x.plane_len();
        let k2 = self.ksize * self.ksize;
        let mut y = Tensor::zeros(self.out_ch, x.height(), x.width());
        if self.ksize == 1 {
            matmul(self.out_ch, self.in_ch, p, &self.weight.data, x.data(), y.data_mut());
            if mode == Mode::Train {
                self.saved = Some(ConvTape::Input(x.clone()));
            }
        } else {
            self.cols_buf.resize(self.in_ch * k2 * p, T::ZERO);
            im2col_reflect(x, &mut self.cols_buf);
            matmul(self.out_ch, self.in_ch * k2, p, &self.weight.data, &self.cols_buf, y.data_mut());
            if mode == Mode::Train {
                self.saved = Some(ConvTape::Cols { h: x.height(), w: x.width() });
            }
        }
        for c in 0..self.out_ch {
            let b = self.bias.data[c];
            for v in y.plane_mut(c) {
                *v += b;
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let tape = self.saved.take().ok_or_else(|| stale_tape(&self.weight.name))?;
        let p = dy.plane_len();
        let k2 = self.ksize * self.ksize;

        for c in 0..self.out_ch {
            let mut sum = T::ZERO;
            for &v in dy.plane(c) {
                sum += v;
            }
            self.bias.grad[c] += sum;
        }

        match tape {
            ConvTape::Input(x) => {
                let mut dx = Tensor::zeros(self.in_ch, x.height(), x.width());
                matmul_bt_acc(self.out_ch, p, self.in_ch, dy.data(), x.data(), &mut self.weight.grad);
                matmul_at(self.in_ch, self.out_ch, p, &self.weight.data, dy.data(), dx.data_mut());
                Ok(dx)
            }
            ConvTape::Cols { h, w } => {
                let mut dx = Tensor::zeros(self.in_ch, h, w);
                matmul_bt_acc(
                    self.out_ch,
                    p,
                    self.in_ch * k2,
                    dy.data(),
                    &self.cols_buf,
                    &mut self.weight.grad,
                );
                self.dcols_buf.resize(self.in_ch * k2 * p, T::ZERO);
                matmul_at(self.in_ch * k2, self.out_ch, p, &self.weight.data, dy.data(), &mut self.dcols_buf);
                col2im_reflect(&self.dcols_buf, &mut dx);
                Ok(dx)
            }
        }
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Unfold 3x3 reflection-padded neighborhoods into a `(in_ch*9) x (h*w)`
/// row-major matrix written into `cols`.
fn im2col_reflect<T: Real>(x: &Tensor<T>, cols: &mut [T]) {
    let (h, w) = (x.height(), x.width());
    let p = h * w;
    debug_assert_eq!(cols.len(), x.channels() * 9 * p);
    cols.par_chunks_mut(9 * p).enumerate().for_each(|(ci, chunk)| {
        let plane = x.plane(ci);
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut chunk[(ky * 3 + kx) * p..(ky * 3 + kx + 1) * p];
                for y in 0..h {
                    let sy = reflect(y as isize + ky as isize - 1, h);
                    let src = &plane[sy * w..(sy + 1) * w];
                    let dst = &mut row[y * w..(y + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = src[reflect(-1, w)];
                            dst[1..w].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..w]);
                            dst[w - 1] = src[reflect(w as isize, w)];
                        }
                    }
                }
            }
        }
    });
}

/// Transpose of [`im2col_reflect`]: scatter-add column gradients back onto
/// the input grid, folding reflected border taps onto their source pixels.
fn col2im_reflect<T: Real>(dcols: &[T], dx: &mut Tensor<T>) {
    let (h, w) = (dx.height(), dx.width());
    let p = h * w;
    let planes: Vec<&[T]> = dcols.chunks(9 * p).collect();
    dx.data_mut()
        .par_chunks_mut(p)
        .zip(planes)
        .for_each(|(plane, chunk)| {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &chunk[(ky * 3 + kx) * p..(ky * 3 + kx + 1) * p];
                    for y in 0..h {
                        let ty = reflect(y as isize + ky as isize - 1, h);
                        let dst = &mut plane[ty * w..(ty + 1) * w];
                        let src = &row[y * w..(y + 1) * w];
                        match kx {
                            0 => {
                                dst[reflect(-1, w)] += src[0];
                                for (d, s) in dst[..w - 1].iter_mut().zip(&src[1..w]) {
                                    *d += *s;
                                }
                            }
                            1 => {
                                for (d, s) in dst.iter_mut().zip(src) {
                                    *d += *s;
                                }
                            }
                            _ => {
                                for (d, s) in dst[1..w].iter_mut().zip(&src[..w - 1]) {
                                    *d += *s;
                                }
                                dst[reflect(w as isize, w)] += src[w - 1];
                            }
                        }
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct BnTape<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BatchNorm<T: Real> {
    channels: usize,
    pub(crate) gamma: ParamTensor<T>,
    pub(crate) beta: ParamTensor<T>,
    pub(crate) running_mean: ParamTensor<T>,
    pub(crate) running_var: ParamTensor<T>,
    saved: Option<BnTape<T>>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            channels,
            gamma: ParamTensor::new(format!("{name}.gamma"), vec![channels], vec![T::ONE; channels], true),
            beta: ParamTensor::new(format!("{name}.beta"), vec![channels], vec![T::ZERO; channels], true),
            running_mean: ParamTensor::new(
                format!("{name}.running_mean"),
                vec![channels],
                vec![T::ZERO; channels],
                false,
            ),
            running_var: ParamTensor::new(
                format!("{name}.running_var"),
                vec![channels],
                vec![T::ONE; channels],
                false,
            ),
            saved: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if x.channels() != self.channels {
            return Err(Error::invalid(format!(
                "{}: expected {} channels, got {}",
                self.gamma.name,
                self.channels,
                x.channels()
            )));
        }
        let p = x.plane_len();
        let eps = T::from_f64(BN_EPS);
        let mut y = Tensor::zeros(self.channels, x.height(), x.width());

        if mode == Mode::Eval {
            let planes: Vec<&[T]> = (0..self.channels).map(|c| x.plane(c)).collect();
            y.data_mut().par_chunks_mut(p).enumerate().for_each(|(c, out)| {
                let inv = T::ONE / (self.running_var.data[c] + eps).sqrt();
                let (g, b, m) = (self.gamma.data[c], self.beta.data[c], self.running_mean.data[c]);
                for (o, &v) in out.iter_mut().zip(planes[c]) {
                    *o = g * (v - m) * inv + b;
                }
            });
            return Ok(y);
        }

        // Batch size is one image, so normalization is over spatial
        // positions only.
        let mut xhat = Tensor::zeros(self.channels, x.height(), x.width());
        let stats: Vec<(T, T)> = {
            let planes: Vec<&[T]> = (0..self.channels).map(|c| x.plane(c)).collect();
            y.data_mut()
                .par_chunks_mut(p)
                .zip(xhat.data_mut().par_chunks_mut(p))
                .enumerate()
                .map(|(c, (out, xh))| {
                    // Single fused pass; f64 accumulators keep the f32 path
                    // accurate over large planes.
                    let plane = planes[c];
                    let mut sum = 0.0f64;
                    let mut sumsq = 0.0f64;
                    for &v in plane {
                        let x = v.to_f64();
                        sum += x;
                        sumsq += x * x;
                    }
                    let mean_f = sum / p as f64;
                    let var_f = (sumsq / p as f64 - mean_f * mean_f).max(0.0);
                    let mean = T::from_f64(mean_f);
                    let var = T::from_f64(var_f);
                    let inv = T::ONE / (var + eps).sqrt();
                    let (g, b) = (self.gamma.data[c], self.beta.data[c]);
                    for ((o, xh), &v) in out.iter_mut().zip(xh.iter_mut()).zip(plane) {
                        let n = (v - mean) * inv;
                        *xh = n;
                        *o = g * n + b;
                    }
                    (mean, var)
                })
                .collect()
        };

        let mom = T::from_f64(BN_MOMENTUM);
        let keep = T::ONE - mom;
        let mut inv_std = Vec::with_capacity(self.channels);
        for (c, (mean, var)) in stats.into_iter().enumerate() {
            self.running_mean.data[c] = keep * self.running_mean.data[c] + mom * mean;
            self.running_var.data[c] = keep * self.running_var.data[c] + mom * var;
            inv_std.push(T::ONE / (var + eps).sqrt());
        }
        self.saved = Some(BnTape { xhat, inv_std });
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let tape = self.saved.take().ok_or_else(|| stale_tape(&self.gamma.name))?;
        let p = dy.plane_len();
        let count = T::from_f64(p as f64);
        let mut dx = Tensor::zeros(self.channels, dy.height(), dy.width());

        let grads: Vec<(T, T)> = {
            let dy_planes: Vec<&[T]> = (0..self.channels).map(|c| dy.plane(c)).collect();
            let xh_planes: Vec<&[T]> = (0..self.channels).map(|c| tape.xhat.plane(c)).collect();
            dx.data_mut()
                .par_chunks_mut(p)
                .enumerate()
                .map(|(c, dxp)| {
                    let (dyp, xhp) = (dy_planes[c], xh_planes[c]);
                    let mut dbeta = T::ZERO;
                    let mut dgamma = T::ZERO;
                    for (&d, &xh) in dyp.iter().zip(xhp) {
                        dbeta += d;
                        dgamma += d * xh;
                    }
                    let g = self.gamma.data[c];
                    let inv = tape.inv_std[c];
                    let mean_dxhat = g * dbeta / count;
                    let mean_dxhat_xhat = g * dgamma / count;
                    for ((o, &d), &xh) in dxp.iter_mut().zip(dyp).zip(xhp) {
                        *o = inv * (g * d - mean_dxhat - xh * mean_dxhat_xhat);
                    }
                    (dgamma, dbeta)
                })
                .collect()
        };
        for (c, (dg, db)) in grads.into_iter().enumerate() {
            self.gamma.grad[c] += dg;
            self.beta.grad[c] += db;
        }
        Ok(dx)
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
        f(&mut self.running_mean);
        f(&mut self.running_var);
    }
}

// ---------------------------------------------------------------------------
// Leaky ReLU
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LeakyRelu<T: Real> {
    slope: T,
    /// 1 where the input was negative.
    saved_signs: Option<Vec<u8>>,
}

impl<T: Real> LeakyRelu<T> {
    pub fn new(negative_slope: f64) -> Self {
        Self { slope: T::from_f64(negative_slope), saved_signs: None }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let slope = self.slope;
        let mut y = x.clone();
        if mode == Mode::Train {
            let mut signs = vec![0u8; x.data().len()];
            y.data_mut()
                .par_chunks_mut(1 << 14)
                .zip(signs.par_chunks_mut(1 << 14))
                .for_each(|(chunk, schunk)| {
                    for (v, s) in chunk.iter_mut().zip(schunk) {
                        if *v < T::ZERO {
                            *s = 1;
                            *v *= slope;
                        }
                    }
                });
            self.saved_signs = Some(signs);
        } else {
            y.data_mut().par_chunks_mut(1 << 14).for_each(|chunk| {
                for v in chunk {
                    if *v < T::ZERO {
                        *v *= slope;
                    }
                }
            });
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let signs = self.saved_signs.take().ok_or_else(|| stale_tape("leaky-relu"))?;
        let slope = self.slope;
        let mut dx = dy.clone();
        dx.data_mut()
            .par_chunks_mut(1 << 14)
            .zip(signs.par_chunks(1 << 14))
            .for_each(|(dchunk, schunk)| {
                for (d, &neg) in dchunk.iter_mut().zip(schunk) {
                    if neg == 1 {
                        *d *= slope;
                    }
                }
            });
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------
// Resampling layers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BilinearUp {
    factor: usize,
    saved_dims: Option<(usize, usize, usize)>,
}

/// Corner-aligned source taps for one output axis position.
fn up_axis(src: usize, out: usize) -> Vec<(usize, usize, f64)> {
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

impl BilinearUp {
    pub fn new(factor: usize) -> Self {
        Self { factor, saved_dims: None }
    }

    pub fn forward<T: Real>(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if self.factor < 1 {
            return Err(Error::invalid("bilinear-up factor must be at least 1"));
        }
        let (h, w) = (x.height(), x.width());
        let (oh, ow) = (h * self.factor, w * self.factor);
        let rows = up_axis(h, oh);
        let cols = up_axis(w, ow);
        let mut y = Tensor::zeros(x.channels(), oh, ow);
        let planes: Vec<&[T]> = (0..x.channels()).map(|c| x.plane(c)).collect();
        y.data_mut().par_chunks_mut(oh * ow).zip(planes).for_each(|(out, plane)| {
            for (oy, &(y0, y1, ty)) in rows.iter().enumerate() {
                for (ox, &(x0, x1, tx)) in cols.iter().enumerate() {
                    let p00 = plane[y0 * w + x0].to_f64();
                    let p01 = plane[y0 * w + x1].to_f64();
                    let p10 = plane[y1 * w + x0].to_f64();
                    let p11 = plane[y1 * w + x1].to_f64();
                    let top = p00 + (p01 - p00) * tx;
                    let bot = p10 + (p11 - p10) * tx;
                    out[oy * ow + ox] = T::from_f64(top + (bot - top) * ty);
                }
            }
        });
        if mode == Mode::Train {
            self.saved_dims = Some((x.channels(), h, w));
        }
        Ok(y)
    }

    pub fn backward<T: Real>(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (c, h, w) = self.saved_dims.take().ok_or_else(|| stale_tape("bilinear-up"))?;
        let (oh, ow) = (dy.height(), dy.width());
        let rows = up_axis(h, oh);
        let cols = up_axis(w, ow);
        let mut dx = Tensor::zeros(c, h, w);
        let dy_planes: Vec<&[T]> = (0..c).map(|ci| dy.plane(ci)).collect();
        dx.data_mut().par_chunks_mut(h * w).zip(dy_planes).for_each(|(dplane, dyp)| {
            for (oy, &(y0, y1, ty)) in rows.iter().enumerate() {
                for (ox, &(x0, x1, tx)) in cols.iter().enumerate() {
                    let g = dyp[oy * ow + ox];
                    dplane[y0 * w + x0] += g * T::from_f64((1.0 - tx) * (1.0 - ty));
                    dplane[y0 * w + x1] += g * T::from_f64(tx * (1.0 - ty));
                    dplane[y1 * w + x0] += g * T::from_f64((1.0 - tx) * ty);
                    dplane[y1 * w + x1] += g * T::from_f64(tx * ty);
                }
            }
        });
        Ok(dx)
    }
}

#[derive(Debug, Clone)]
pub struct BoxDown {
    factor: usize,
    saved_dims: Option<(usize, usize, usize)>,
}

impl BoxDown {
    pub fn new(factor: usize) -> Self {
        Self { factor, saved_dims: None }
    }

    pub fn forward<T: Real>(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if self.factor < 1 {
            return Err(Error::invalid("box-down factor must be at least 1"));
        }
        let f = self.factor;
        let (h, w) = (x.height(), x.width());
        if h < f || w < f {
            return Err(Error::invalid(format!("cannot box-down {h}x{w} by factor {f}")));
        }
        let (oh, ow) = (h.div_ceil(f), w.div_ceil(f));
        let mut y = Tensor::zeros(x.channels(), oh, ow);
        let planes: Vec<&[T]> = (0..x.channels()).map(|c| x.plane(c)).collect();
        y.data_mut().par_chunks_mut(oh * ow).zip(planes).for_each(|(out, plane)| {
            for oy in 0..oh {
                for ox in 0..ow {
                    let (y0, y1) = (oy * f, (oy * f + f).min(h));
                    let (x0, x1) = (ox * f, (ox * f + f).min(w));
                    let mut acc = T::ZERO;
                    for yy in y0..y1 {
                        for xx in x0..x1 {
                            acc += plane[yy * w + xx];
                        }
                    }
                    out[oy * ow + ox] = acc / T::from_f64(((y1 - y0) * (x1 - x0)) as f64);
                }
            }
        });
        if mode == Mode::Train {
            self.saved_dims = Some((x.channels(), h, w));
        }
        Ok(y)
    }

    pub fn backward<T: Real>(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (c, h, w) = self.saved_dims.take().ok_or_else(|| stale_tape("box-down"))?;
        let f = self.factor;
        let (oh, ow) = (dy.height(), dy.width());
        let mut dx = Tensor::zeros(c, h, w);
        let dy_planes: Vec<&[T]> = (0..c).map(|ci| dy.plane(ci)).collect();
        dx.data_mut().par_chunks_mut(h * w).zip(dy_planes).for_each(|(dplane, dyp)| {
            for oy in 0..oh {
                for ox in 0..ow {
                    let (y0, y1) = (oy * f, (oy * f + f).min(h));
                    let (x0, x1) = (ox * f, (ox * f + f).min(w));
                    let share = dyp[oy * ow + ox] / T::from_f64(((y1 - y0) * (x1 - x0)) as f64);
                    for yy in y0..y1 {
                        for xx in x0..x1 {
                            dplane[yy * w + xx] += share;
                        }
                    }
                }
            }
        });
        Ok(dx)
    }
}

// ---------------------------------------------------------------------------
// Residual block
// ---------------------------------------------------------------------------

/// conv3x3 -> bn -> lrelu -> conv3x3 -> bn, identity skip, lrelu after the
/// sum.
#[derive(Debug, Clone)]
pub struct ResidualBlock<T: Real> {
    conv1: Conv2d<T>,
    bn1: BatchNorm<T>,
    act1: LeakyRelu<T>,
    conv2: Conv2d<T>,
    bn2: BatchNorm<T>,
    act2: LeakyRelu<T>,
}

impl<T: Real> ResidualBlock<T> {
    pub fn new(name: &str, channels: usize, rng: &mut impl Rng) -> Self {
        Self {
            conv1: Conv2d::new(&format!("{name}.conv1"), channels, channels, 3, rng),
            bn1: BatchNorm::new(&format!("{name}.bn1"), channels),
            act1: LeakyRelu::new(LEAKY_SLOPE),
            conv2: Conv2d::new(&format!("{name}.conv2"), channels, channels, 3, rng),
            bn2: BatchNorm::new(&format!("{name}.bn2"), channels),
            act2: LeakyRelu::new(LEAKY_SLOPE),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let t = self.conv1.forward(x, mode)?;
        let t = self.bn1.forward(&t, mode)?;
        let t = self.act1.forward(&t, mode)?;
        let t = self.conv2.forward(&t, mode)?;
        let mut t = self.bn2.forward(&t, mode)?;
        for (v, &s) in t.data_mut().iter_mut().zip(x.data()) {
            *v += s;
        }
        self.act2.forward(&t, mode)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let dsum = self.act2.backward(dy)?;
        let d = self.bn2.backward(&dsum)?;
        let d = self.conv2.backward(&d)?;
        let d = self.act1.backward(&d)?;
        let d = self.bn1.backward(&d)?;
        let mut dx = self.conv1.backward(&d)?;
        for (v, &s) in dx.data_mut().iter_mut().zip(dsum.data()) {
            *v += s;
        }
        Ok(dx)
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        self.conv1.visit_params(f);
        self.bn1.visit_params(f);
        self.conv2.visit_params(f);
        self.bn2.visit_params(f);
    }
}

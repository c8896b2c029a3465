//! Dense 4-d tensors (batch, channels, height, width) plus the parallel
//! matrix products the convolution layers are built on.
//!
//! The batch dimension is always 1 here (training happens on a single
//! image), but it stays in the shape so checkpoints and layer contracts are
//! explicit about the layout.

use rayon::prelude::*;

use super::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            shape: [1, channels, height, width],
            data: vec![T::ZERO; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::invalid(format!(
                "tensor data length {} does not match shape 1x{channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self { shape: [1, channels, height, width], data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    /// Spatial size `height * width`.
    pub fn plane_len(&self) -> usize {
        self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let p = self.plane_len();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let p = self.plane_len();
        &mut self.data[c * p..(c + 1) * p]
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stack `self` and `other` along the channel dimension.
    pub fn concat_channels(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        if self.height() != other.height() || self.width() != other.width() {
            return Err(Error::invalid("channel concat requires equal spatial dims"));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Tensor::from_vec(self.channels() + other.channels(), self.height(), self.width(), data)
    }
}

/// Column chunks processed per rayon task. Each chunk is an independent
/// matrix product writing a disjoint column range, so the result does not
/// depend on thread scheduling.
const MIN_GEMM_CHUNK: usize = 1024;

fn column_chunks(n: usize) -> Vec<(usize, usize)> {
    let threads = rayon::current_num_threads().max(1);
    let chunk = n.div_ceil(threads).max(MIN_GEMM_CHUNK);
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        out.push((start, end));
        start = end;
    }
    out
}

struct ConstPtr<T>(*const T);
unsafe impl<T> Send for ConstPtr<T> {}
unsafe impl<T> Sync for ConstPtr<T> {}
impl<T> ConstPtr<T> {
    fn get(&self) -> *const T {
        self.0
    }
}

struct MutPtr<T>(*mut T);
unsafe impl<T> Send for MutPtr<T> {}
unsafe impl<T> Sync for MutPtr<T> {}
impl<T> MutPtr<T> {
    fn get(&self) -> *mut T {
        self.0
    }
}

/// `c = a @ b` for row-major contiguous matrices, parallelized over column
/// blocks of `b`/`c`.
pub(crate) fn matmul<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let chunks = column_chunks(n);
    let (ap, bp, cp) = (ConstPtr(a.as_ptr()), ConstPtr(b.as_ptr()), MutPtr(c.as_mut_ptr()));
    chunks.par_iter().for_each(|&(start, end)| {
        let w = end - start;
        // Safety: chunks write disjoint column ranges of c; a and b are
        // read-only; strides match the row-major layouts asserted above.
        unsafe {
            T::gemm(
                m,
                k,
                w,
                T::ONE,
                ap.get(),
                k as isize,
                1,
                bp.get().add(start),
                n as isize,
                1,
                T::ZERO,
                cp.get().add(start),
                n as isize,
                1,
            );
        }
    });
}

/// `c += a @ b^T` where `a` is row-major `m x p` and `b` is row-major
/// `n x p`.
///
/// This is the weight-gradient shape: a tall shared dimension `p` feeding a
/// small `m x n` output. Library GEMM spends most of its time packing here,
/// so a direct blocked kernel is used instead: rows of `b` stream through
/// once while the whole of `a` stays cache-resident, and each `c` element is
/// accumulated by exactly one task.
pub(crate) fn matmul_bt_acc<T: Real>(m: usize, p: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    assert_eq!(a.len(), m * p);
    assert_eq!(b.len(), n * p);
    assert_eq!(c.len(), m * n);

    const K_BLOCK: usize = 2048;
    let rows: Vec<usize> = (0..n).collect();
    let threads = rayon::current_num_threads().max(1);
    let per = n.div_ceil(threads * 4).max(8);
    let acc_cols: Vec<(usize, Vec<T>)> = rows
        .par_chunks(per)
        .map(|js| {
            // col[j - js0, i] = sum_t b[j, t] * a[i, t]
            let mut col = vec![T::ZERO; js.len() * m];
            for k0 in (0..p).step_by(K_BLOCK) {
                let k1 = (k0 + K_BLOCK).min(p);
                let klen = k1 - k0;
                for (jj, &j) in js.iter().enumerate() {
                    let bj = &b[j * p + k0..j * p + k0 + klen];
                    let out = &mut col[jj * m..(jj + 1) * m];
                    let mut i = 0;
                    while i + 4 <= m {
                        let base = i * p + k0;
                        let d = dot4(
                            &a[base..base + klen],
                            &a[base + p..base + p + klen],
                            &a[base + 2 * p..base + 2 * p + klen],
                            &a[base + 3 * p..base + 3 * p + klen],
                            bj,
                        );
                        for (o, v) in out[i..i + 4].iter_mut().zip(d) {
                            *o += v;
                        }
                        i += 4;
                    }
                    while i < m {
                        out[i] += dot(&a[i * p + k0..i * p + k0 + klen], bj);
                        i += 1;
                    }
                }
            }
            (js[0], col)
        })
        .collect();
    for (j0, col) in acc_cols {
        for (jj, block) in col.chunks_exact(m).enumerate() {
            let j = j0 + jj;
            for (i, &v) in block.iter().enumerate() {
                c[i * n + j] += v;
            }
        }
    }
}

const DOT_LANES: usize = 16;

/// Dot product with enough independent accumulators to keep the FMA units
/// busy; the lane loops auto-vectorize.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::ZERO; DOT_LANES * 2];
    let mut ca = a.chunks_exact(DOT_LANES * 2);
    let mut cb = b.chunks_exact(DOT_LANES * 2);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..DOT_LANES * 2 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut sum = T::ZERO;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        sum = sum + *x * *y;
    }
    for v in acc {
        sum = sum + v;
    }
    sum
}

/// Four simultaneous dot products against a shared right-hand side, so each
/// `b` load feeds four FMA chains.
fn dot4<T: Real>(a0: &[T], a1: &[T], a2: &[T], a3: &[T], b: &[T]) -> [T; 4] {
    const L: usize = DOT_LANES;
    let mut acc = [[T::ZERO; L]; 4];
    let n = b.len() / L * L;
    let mut t = 0;
    while t < n {
        let y = &b[t..t + L];
        let (x0, x1, x2, x3) = (&a0[t..t + L], &a1[t..t + L], &a2[t..t + L], &a3[t..t + L]);
        for l in 0..L {
            acc[0][l] = acc[0][l] + x0[l] * y[l];
            acc[1][l] = acc[1][l] + x1[l] * y[l];
            acc[2][l] = acc[2][l] + x2[l] * y[l];
            acc[3][l] = acc[3][l] + x3[l] * y[l];
        }
        t += L;
    }
    let mut out = [T::ZERO; 4];
    for t in n..b.len() {
        let y = b[t];
        out[0] = out[0] + a0[t] * y;
        out[1] = out[1] + a1[t] * y;
        out[2] = out[2] + a2[t] * y;
        out[3] = out[3] + a3[t] * y;
    }
    for (o, lanes) in out.iter_mut().zip(acc) {
        for v in lanes {
            *o = *o + v;
        }
    }
    out
}

/// `c = a^T @ b` where `a` is row-major `k x m` and `b` is row-major
/// `k x n`; parallel over column blocks.
pub(crate) fn matmul_at<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    assert_eq!(a.len(), k * m);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let chunks = column_chunks(n);
    let (ap, bp, cp) = (ConstPtr(a.as_ptr()), ConstPtr(b.as_ptr()), MutPtr(c.as_mut_ptr()));
    chunks.par_iter().for_each(|&(start, end)| {
        let w = end - start;
        // Safety: disjoint output columns per chunk, as in `matmul`.
        unsafe {
            T::gemm(
                m,
                k,
                w,
                T::ONE,
                ap.get(),
                1,
                m as isize,
                bp.get().add(start),
                n as isize,
                1,
                T::ZERO,
                cp.get().add(start),
                n as isize,
                1,
            );
        }
    });
}

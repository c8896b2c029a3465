//! Optimization-based guided colorization baseline.
//!
//! Colors are propagated by similar intensities: each pixel's color is
//! encouraged to equal an affinity-weighted average of its neighbors, with
//! weights derived from the grayscale image alone. Known pixels act as hard
//! constraints and the resulting quadratic objective is minimized per RGB
//! channel with conjugate gradient on the normal equations.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{GrayImage, Mask, RgbImage};

/// Row-normalized neighbor affinities over a square window.
#[derive(Debug, Clone)]
pub struct AffinitySystem {
    height: usize,
    width: usize,
    /// Per pixel: start offset into `entries`.
    offsets: Vec<usize>,
    /// `(neighbor_index, weight)` pairs; each pixel's weights sum to 1.
    entries: Vec<(u32, f64)>,
}

pub const DEFAULT_WINDOW_RADIUS: usize = 1;
pub const DEFAULT_SIGMA_FLOOR: f64 = 0.01;

/// Build affinity weights from intensities: `w_rs ∝ exp(-(Y(r)-Y(s))² / 2σ_r²)`
/// over the window around `r` (excluding `r` itself), where `σ_r` is the
/// local intensity standard deviation floored at `sigma_floor`. Rows are
/// normalized to sum to one.
pub fn build_affinity(gray: &GrayImage, window_radius: usize, sigma_floor: f64) -> AffinitySystem {
    let (h, w) = (gray.height(), gray.width());
    let rad = window_radius as isize;
    let mut offsets = Vec::with_capacity(h * w + 1);
    let mut entries = Vec::with_capacity(h * w * (2 * window_radius + 1) * (2 * window_radius + 1));

    for row in 0..h {
        for col in 0..w {
            offsets.push(entries.len());
            let y_r = gray.get(row, col);

            // Local std over the window including the center pixel.
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let mut count = 0.0;
            for dr in -rad..=rad {
                for dc in -rad..=rad {
                    let (nr, nc) = (row as isize + dr, col as isize + dc);
                    if nr < 0 || nr >= h as isize || nc < 0 || nc >= w as isize {
                        continue;
                    }
                    let v = gray.get(nr as usize, nc as usize);
                    sum += v;
                    sumsq += v * v;
                    count += 1.0;
                }
            }
            let mean = sum / count;
            let var = (sumsq / count - mean * mean).max(0.0);
            let sigma = var.sqrt().max(sigma_floor);
            let denom = 2.0 * sigma * sigma;

            let start = entries.len();
            let mut total = 0.0;
            for dr in -rad..=rad {
                for dc in -rad..=rad {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (row as isize + dr, col as isize + dc);
                    if nr < 0 || nr >= h as isize || nc < 0 || nc >= w as isize {
                        continue;
                    }
                    let y_s = gray.get(nr as usize, nc as usize);
                    let wgt = (-(y_r - y_s) * (y_r - y_s) / denom).exp();
                    entries.push(((nr as usize * w + nc as usize) as u32, wgt));
                    total += wgt;
                }
            }
            for e in &mut entries[start..] {
                e.1 /= total;
            }
        }
    }
    offsets.push(entries.len());
    AffinitySystem { height: h, width: w, offsets, entries }
}

impl AffinitySystem {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Neighbor weights of pixel `(row, col)` as `(flat_index, weight)`.
    pub fn row(&self, row: usize, col: usize) -> &[(u32, f64)] {
        let i = row * self.width + col;
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `out = (I - W) v`.
    fn apply_residual_op(&self, v: &[f64], out: &mut [f64]) {
        out.par_chunks_mut(self.width)
            .enumerate()
            .for_each(|(row, out_row)| {
                for (col, o) in out_row.iter_mut().enumerate() {
                    let i = row * self.width + col;
                    let mut acc = v[i];
                    for &(j, wgt) in &self.entries[self.offsets[i]..self.offsets[i + 1]] {
                        acc -= wgt * v[j as usize];
                    }
                    *o = acc;
                }
            });
    }

    /// `out = (I - W)^T v`.
    fn apply_residual_op_t(&self, v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(v);
        for i in 0..self.height * self.width {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for &(j, wgt) in &self.entries[self.offsets[i]..self.offsets[i + 1]] {
                out[j as usize] -= wgt * vi;
            }
        }
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Conjugate gradient for a symmetric positive semi-definite operator.
/// Stops when the residual norm falls to `tol * ||b||` or after `max_iters`
/// iterations (reported via `converged`).
pub fn cg_solve(
    apply_a: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, residual_norm: 0.0, converged: true });
    }
    let threshold = tol * b_norm;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut ap = vec![0.0; n];
    let mut rs = r.iter().map(|v| v * v).sum::<f64>();

    for iter in 0..max_iters {
        if rs.sqrt() <= threshold {
            return Ok(CgOutcome { x, iterations: iter, residual_norm: rs.sqrt(), converged: true });
        }
        apply_a(&p, &mut ap);
        let curvature: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if curvature.abs() < 1e-300 || !curvature.is_finite() {
            return Err(Error::numeric(format!(
                "conjugate gradient breakdown at iteration {iter}: curvature {curvature:.3e}"
            )));
        }
        let alpha = rs / curvature;
        for ((xi, pi), (ri, api)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(&ap)) {
            *xi += alpha * pi;
            *ri -= alpha * api;
        }
        let rs_new = r.iter().map(|v| v * v).sum::<f64>();
        let beta = rs_new / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rs = rs_new;
    }
    Ok(CgOutcome { x, iterations: max_iters, residual_norm: rs.sqrt(), converged: rs.sqrt() <= threshold })
}

pub const LEVIN_CG_TOL: f64 = 1e-8;

/// Propagate known colors into the masked region by minimizing the
/// affinity residual `Σ_r (U(r) - Σ_s w_rs U(s))²` per RGB channel with the
/// unmasked pixels held fixed. Output is clamped to `[0, 1]`; unmasked
/// pixels pass through exactly.
pub fn levin_colorize(gray: &GrayImage, known_color: &RgbImage, mask: &Mask) -> Result<RgbImage> {
    levin_colorize_with(gray, known_color, mask, DEFAULT_WINDOW_RADIUS, DEFAULT_SIGMA_FLOOR)
}

pub fn levin_colorize_with(
    gray: &GrayImage,
    known_color: &RgbImage,
    mask: &Mask,
    window_radius: usize,
    sigma_floor: f64,
) -> Result<RgbImage> {
    let (h, w) = (gray.height(), gray.width());
    if known_color.height() != h || known_color.width() != w || mask.height() != h || mask.width() != w {
        return Err(Error::invalid("gray, color, and mask dimensions must match"));
    }
    let n = h * w;
    let n_missing = mask.count_missing();
    if n_missing == n {
        return Err(Error::invalid("colorization needs at least one unmasked pixel"));
    }
    if n_missing == 0 {
        return Ok(known_color.clone());
    }

    let affinity = build_affinity(gray, window_radius, sigma_floor);
    let unknown: Vec<usize> = (0..n).filter(|&i| mask.data()[i] == 1).collect();

    // Normal equations restricted to the unknowns: with L = I - W and the
    // full vector u = embed(x on holes, fixed colors elsewhere),
    // minimize ||L u||² over x. A x = restrict(Lᵀ L embed(x; 0)),
    // b = -restrict(Lᵀ L embed(0; fixed)).
    let apply_a = |x: &[f64], out: &mut [f64]| {
        let mut full = vec![0.0; n];
        for (k, &i) in unknown.iter().enumerate() {
            full[i] = x[k];
        }
        let mut lu = vec![0.0; n];
        affinity.apply_residual_op(&full, &mut lu);
        let mut ltlu = vec![0.0; n];
        affinity.apply_residual_op_t(&lu, &mut ltlu);
        for (o, &i) in out.iter_mut().zip(&unknown) {
            *o = ltlu[i];
        }
    };

    let channel_solutions: Vec<Result<Vec<f64>>> = (0..3usize)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&ch| {
            let mut fixed = vec![0.0; n];
            for i in 0..n {
                if mask.data()[i] == 0 {
                    fixed[i] = known_color.data()[i * 3 + ch];
                }
            }
            let mut lu = vec![0.0; n];
            affinity.apply_residual_op(&fixed, &mut lu);
            let mut ltlu = vec![0.0; n];
            affinity.apply_residual_op_t(&lu, &mut ltlu);
            let b: Vec<f64> = unknown.iter().map(|&i| -ltlu[i]).collect();

            let max_iters = 20 * (unknown.len() + 100);
            let outcome = cg_solve(apply_a, &b, LEVIN_CG_TOL, max_iters).map_err(|e| {
                Error::numeric(format!("channel {ch}: {e}"))
            })?;
            if !outcome.converged {
                return Err(Error::numeric(format!(
                    "channel {ch}: conjugate gradient stalled at residual {:.3e} after {} iterations",
                    outcome.residual_norm, outcome.iterations
                )));
            }
            Ok(outcome.x)
        })
        .collect();

    let mut out = known_color.clone();
    for (ch, sol) in channel_solutions.into_iter().enumerate() {
        let sol = sol?;
        for (k, &i) in unknown.iter().enumerate() {
            let (row, col) = (i / w, i % w);
            let mut px = out.pixel(row, col);
            px[ch] = sol[k].clamp(0.0, 1.0);
            out.set_pixel(row, col, px);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskgen;

    #[test]
    fn constant_image_gives_uniform_weights() {
        let gray = GrayImage::filled(4, 4, 0.5).unwrap();
        let sys = build_affinity(&gray, 1, 0.01);
        // Interior pixel: 8 neighbors, each weight 1/8.
        for &(_, w) in sys.row(1, 1) {
            assert!((w - 0.125).abs() < 1e-12);
        }
        assert_eq!(sys.row(1, 1).len(), 8);
        // Corner pixel: 3 in-bounds neighbors, each 1/3.
        assert_eq!(sys.row(0, 0).len(), 3);
        for &(_, w) in sys.row(0, 0) {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn affinity_rows_sum_to_one() {
        let data: Vec<f64> = (0..48).map(|i| ((i * 37) % 48) as f64 / 48.0).collect();
        let gray = GrayImage::new(6, 8, data).unwrap();
        let sys = build_affinity(&gray, 1, 0.01);
        for row in 0..6 {
            for col in 0..8 {
                let sum: f64 = sys.row(row, col).iter().map(|&(_, w)| w).sum();
                assert!((sum - 1.0).abs() < 1e-9, "({row},{col}) sums to {sum}");
            }
        }
    }

    #[test]
    fn affinity_weights_match_direct_formula() {
        // Hand-evaluate the weights of the center pixel of a 3x3 patch.
        let vals = [0.2, 0.4, 0.3, 0.5, 0.45, 0.6, 0.1, 0.35, 0.55];
        let gray = GrayImage::new(3, 3, vals.to_vec()).unwrap();
        let sigma_floor = 0.01;
        let sys = build_affinity(&gray, 1, sigma_floor);

        let mean: f64 = vals.iter().sum::<f64>() / 9.0;
        let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
        let sigma = var.sqrt().max(sigma_floor);
        let yc = vals[4];
        let mut expected: Vec<f64> = (0..9)
            .filter(|&i| i != 4)
            .map(|i| (-(yc - vals[i]).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = expected.iter().sum();
        for e in &mut expected {
            *e /= total;
        }

        let got: Vec<f64> = sys.row(1, 1).iter().map(|&(_, w)| w).collect();
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12, "{got:?} vs {expected:?}");
        }
    }

    #[test]
    fn cg_identity_converges_immediately() {
        let b = vec![1.0, -2.0, 3.0];
        let outcome = cg_solve(|v, out| out.copy_from_slice(v), &b, 1e-12, 10).unwrap();
        assert!(outcome.converged);
        assert!(outcome.iterations <= 1, "took {} iterations", outcome.iterations);
        for (x, want) in outcome.x.iter().zip(&b) {
            assert!((x - want).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_solves_hand_system() {
        // [[4,1],[1,3]] x = [1,2]  =>  x = (1/11, 7/11)
        let apply = |v: &[f64], out: &mut [f64]| {
            out[0] = 4.0 * v[0] + v[1];
            out[1] = v[0] + 3.0 * v[1];
        };
        let outcome = cg_solve(apply, &[1.0, 2.0], 1e-12, 50).unwrap();
        assert!((outcome.x[0] - 1.0 / 11.0).abs() < 1e-10);
        assert!((outcome.x[1] - 7.0 / 11.0).abs() < 1e-10);
    }

    #[test]
    fn cg_zero_rhs_returns_zero() {
        let outcome = cg_solve(|v, out| out.copy_from_slice(v), &[0.0; 4], 1e-10, 10).unwrap();
        assert_eq!(outcome.x, vec![0.0; 4]);
        assert_eq!(outcome.iterations, 0);
    }

    #[test]
    fn constant_color_is_recovered_exactly() {
        let data: Vec<f64> = (0..64).map(|i| ((i * 29) % 64) as f64 / 64.0).collect();
        let gray = GrayImage::new(8, 8, data).unwrap();
        let color = RgbImage::filled(8, 8, [0.3, 0.6, 0.2]).unwrap();
        let mask = maskgen::rectangle_mask(8, 8, 2, 2, 4, 4).unwrap();
        let out = levin_colorize(&gray, &color, &mask).unwrap();
        for (a, b) in out.data().iter().zip(color.data()) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn empty_mask_returns_known_color() {
        let gray = GrayImage::filled(4, 4, 0.5).unwrap();
        let data: Vec<f64> = (0..48).map(|i| (i as f64 * 0.19) % 1.0).collect();
        let color = RgbImage::new(4, 4, data).unwrap();
        let mask = Mask::empty(4, 4).unwrap();
        assert_eq!(levin_colorize(&gray, &color, &mask).unwrap(), color);
    }

    #[test]
    fn unmasked_pixels_pass_through_exactly() {
        let data: Vec<f64> = (0..64).map(|i| ((i * 13) % 64) as f64 / 64.0).collect();
        let gray = GrayImage::new(8, 8, data.clone()).unwrap();
        let color_data: Vec<f64> = (0..192).map(|i| ((i * 7) % 192) as f64 / 192.0).collect();
        let color = RgbImage::new(8, 8, color_data).unwrap();
        let mask = maskgen::rectangle_mask(8, 8, 1, 1, 3, 3).unwrap();
        let out = levin_colorize(&gray, &color, &mask).unwrap();
        for row in 0..8 {
            for col in 0..8 {
                if !mask.is_missing(row, col) {
                    assert_eq!(out.pixel(row, col), color.pixel(row, col));
                }
            }
        }
    }

    /// Dense Gaussian-elimination oracle for the same normal equations.
    fn dense_solve_oracle(
        gray: &GrayImage,
        known: &RgbImage,
        mask: &Mask,
        ch: usize,
    ) -> Vec<f64> {
        let (h, w) = (gray.height(), gray.width());
        let n = h * w;
        let sys = build_affinity(gray, 1, 0.01);
        // L = I - W as a dense matrix.
        let mut l = vec![0.0; n * n];
        for row in 0..h {
            for col in 0..w {
                let i = row * w + col;
                l[i * n + i] = 1.0;
                for &(j, wgt) in sys.row(row, col) {
                    l[i * n + j as usize] -= wgt;
                }
            }
        }
        // A_full = Lᵀ L.
        let mut a_full = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += l[k * n + i] * l[k * n + j];
                }
                a_full[i * n + j] = s;
            }
        }
        let unknown: Vec<usize> = (0..n).filter(|&i| mask.data()[i] == 1).collect();
        let m = unknown.len();
        let mut a = vec![0.0; m * (m + 1)];
        for (r, &i) in unknown.iter().enumerate() {
            for (c, &j) in unknown.iter().enumerate() {
                a[r * (m + 1) + c] = a_full[i * n + j];
            }
            let mut rhs = 0.0;
            for j in 0..n {
                if mask.data()[j] == 0 {
                    rhs -= a_full[i * n + j] * known.data()[j * 3 + ch];
                }
            }
            a[r * (m + 1) + m] = rhs;
        }
        // Gaussian elimination with partial pivoting.
        for col in 0..m {
            let pivot = (col..m).max_by(|&x, &y| {
                a[x * (m + 1) + col].abs().partial_cmp(&a[y * (m + 1) + col].abs()).unwrap()
            }).unwrap();
            if pivot != col {
                for k in 0..=m {
                    a.swap(col * (m + 1) + k, pivot * (m + 1) + k);
                }
            }
            let d = a[col * (m + 1) + col];
            for r in col + 1..m {
                let f = a[r * (m + 1) + col] / d;
                for k in col..=m {
                    a[r * (m + 1) + k] -= f * a[col * (m + 1) + k];
                }
            }
        }
        let mut x = vec![0.0; m];
        for r in (0..m).rev() {
            let mut s = a[r * (m + 1) + m];
            for c in r + 1..m {
                s -= a[r * (m + 1) + c] * x[c];
            }
            x[r] = s / a[r * (m + 1) + r];
        }
        x
    }

    #[test]
    fn small_instance_matches_dense_oracle() {
        // Two-region 8x8 image: left dark red-ish, right bright green-ish,
        // with a hole inside the right region.
        let mut gray_data = vec![0.0; 64];
        let mut color_data = vec![0.0; 192];
        for row in 0..8 {
            for col in 0..8 {
                let i = row * 8 + col;
                if col < 4 {
                    gray_data[i] = 0.2;
                    color_data[i * 3] = 0.6;
                    color_data[i * 3 + 1] = 0.1;
                    color_data[i * 3 + 2] = 0.1;
                } else {
                    gray_data[i] = 0.7;
                    color_data[i * 3] = 0.1;
                    color_data[i * 3 + 1] = 0.8;
                    color_data[i * 3 + 2] = 0.2;
                }
            }
        }
        let gray = GrayImage::new(8, 8, gray_data).unwrap();
        let color = RgbImage::new(8, 8, color_data).unwrap();
        let mask = maskgen::rectangle_mask(8, 8, 2, 5, 3, 2).unwrap();
        assert!(mask.count_missing() <= 64);

        let out = levin_colorize(&gray, &color, &mask).unwrap();
        let unknown: Vec<usize> = (0..64).filter(|&i| mask.data()[i] == 1).collect();
        for ch in 0..3 {
            let oracle = dense_solve_oracle(&gray, &color, &mask, ch);
            for (k, &i) in unknown.iter().enumerate() {
                let got = out.data()[i * 3 + ch];
                assert!(
                    (got - oracle[k]).abs() < 1e-6,
                    "channel {ch} pixel {i}: {got} vs oracle {}",
                    oracle[k]
                );
            }
        }
        // The hole sits inside the green region and must take its color.
        for &i in &unknown {
            assert!(out.data()[i * 3 + 1] > 0.5, "hole pixel {i} lost the region color");
        }
    }
}

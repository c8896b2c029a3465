//! Central-finite-difference verification of the analytic gradients.
//!
//! Every layer kind (and the full generator stack at reduced width) is
//! checked in double precision: the loss is a fixed random projection of the
//! output, analytic gradients come from one backward pass, and numeric
//! gradients perturb each parameter and input scalar by +/- `FD_EPS`.

use rand::Rng;
use rayon::prelude::*;

use super::{LayerSpec, Mode, Network, Tensor};
use crate::error::{Error, Result};

const FD_EPS: f64 = 1e-5;
const PARAM_LIMIT: usize = 10_000;

/// Relative error with a floored denominator so near-zero gradients do not
/// blow up the ratio.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub name: String,
    pub max_rel_err: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub cases: Vec<GradCheckCase>,
}

impl GradCheckReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.cases {
            writeln!(
                f,
                "{:<22} max rel err {:.3e}  (tol {:.0e})  {}",
                c.name,
                c.max_rel_err,
                c.tol,
                if c.passed { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

struct Harness {
    net: Network<f64>,
    input: Tensor<f64>,
    projection: Tensor<f64>,
}

impl Harness {
    fn new(spec: &[LayerSpec], in_ch: usize, h: usize, w: usize, seed: u64) -> Result<Self> {
        let mut rng = crate::rng::stream(seed, "gradcheck");
        let mut net = Network::<f64>::from_spec(spec, &mut rng)?;
        if net.param_count() > PARAM_LIMIT {
            return Err(Error::invalid(format!(
                "network has {} trainable parameters; finite differences are limited to {PARAM_LIMIT}",
                net.param_count()
            )));
        }
        let input = Tensor::from_vec(
            in_ch,
            h,
            w,
            (0..in_ch * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )?;
        let y = net.forward(&input, Mode::Train)?;
        let projection = Tensor::from_vec(
            y.channels(),
            y.height(),
            y.width(),
            (0..y.data().len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )?;
        Ok(Self { net, input, projection })
    }

    fn loss(net: &mut Network<f64>, input: &Tensor<f64>, projection: &Tensor<f64>) -> f64 {
        let y = net.forward(input, Mode::Train).expect("forward succeeded during setup");
        y.data().iter().zip(projection.data()).map(|(a, b)| a * b).sum()
    }

    fn analytic_grads(&mut self) -> Result<(Vec<Vec<f64>>, Tensor<f64>)> {
        self.net.zero_grads();
        self.net.forward(&self.input, Mode::Train)?;
        let dinput = self.net.backward(&self.projection)?;
        let mut grads = Vec::new();
        self.net.visit_params(|p| {
            if p.trainable {
                grads.push(p.grad.clone());
            }
        });
        Ok((grads, dinput))
    }

    /// Numeric gradient of one trainable parameter scalar.
    fn numeric_param_grad(net: &mut Network<f64>, input: &Tensor<f64>, proj: &Tensor<f64>, ti: usize, j: usize) -> f64 {
        let read = |net: &mut Network<f64>| {
            let mut v = 0.0;
            let mut k = 0;
            net.visit_params(|p| {
                if p.trainable {
                    if k == ti {
                        v = p.data[j];
                    }
                    k += 1;
                }
            });
            v
        };
        let write = |net: &mut Network<f64>, value: f64| {
            let mut k = 0;
            net.visit_params(|p| {
                if p.trainable {
                    if k == ti {
                        p.data[j] = value;
                    }
                    k += 1;
                }
            });
        };
        let orig = read(net);
        write(net, orig + FD_EPS);
        let up = Self::loss(net, input, proj);
        write(net, orig - FD_EPS);
        let down = Self::loss(net, input, proj);
        write(net, orig);
        (up - down) / (2.0 * FD_EPS)
    }

    fn numeric_input_grad(net: &mut Network<f64>, input: &Tensor<f64>, proj: &Tensor<f64>, j: usize) -> f64 {
        let mut x = input.clone();
        x.data_mut()[j] += FD_EPS;
        let up = Self::loss(net, &x, proj);
        x.data_mut()[j] = input.data()[j] - FD_EPS;
        let down = Self::loss(net, &x, proj);
        (up - down) / (2.0 * FD_EPS)
    }
}

fn run_check(spec: &[LayerSpec], in_ch: usize, h: usize, w: usize, seed: u64, skew: f64) -> Result<f64> {
    let mut harness = Harness::new(spec, in_ch, h, w, seed)?;
    let (mut analytic, dinput) = harness.analytic_grads()?;
    if let Some(first) = analytic.iter_mut().flat_map(|g| g.iter_mut()).next() {
        *first = *first * skew + 0.1 * (skew - 1.0);
    }

    // Perturbations are independent, so they parallelize over clones of the
    // network; each scalar's result is computed by exactly one task.
    let mut jobs: Vec<(usize, usize, f64)> = Vec::new();
    for (ti, grads) in analytic.iter().enumerate() {
        for (j, &g) in grads.iter().enumerate() {
            jobs.push((ti, j, g));
        }
    }
    let param_err = jobs
        .par_chunks(256)
        .map(|chunk| {
            let mut net = harness.net.clone();
            let mut worst = 0.0f64;
            for &(ti, j, a) in chunk {
                let n = Harness::numeric_param_grad(&mut net, &harness.input, &harness.projection, ti, j);
                worst = worst.max(rel_err(a, n));
            }
            worst
        })
        .reduce(|| 0.0, f64::max);

    let input_err = (0..harness.input.data().len())
        .collect::<Vec<_>>()
        .par_chunks(64)
        .map(|chunk| {
            let mut net = harness.net.clone();
            let mut worst = 0.0f64;
            for &j in chunk {
                let n = Harness::numeric_input_grad(&mut net, &harness.input, &harness.projection, j);
                worst = worst.max(rel_err(dinput.data()[j], n));
            }
            worst
        })
        .reduce(|| 0.0, f64::max);

    Ok(param_err.max(input_err))
}

/// Compare analytic and central-difference gradients for `spec` on a random
/// `1 x in_ch x h x w` input; returns the worst relative error observed.
pub fn grad_check(spec: &[LayerSpec], in_ch: usize, h: usize, w: usize, seed: u64) -> Result<f64> {
    run_check(spec, in_ch, h, w, seed, 1.0)
}

/// Negative control: deliberately skews the first analytic gradient before
/// the comparison, so a working harness must report a large error.
#[doc(hidden)]
pub fn grad_check_corrupted(spec: &[LayerSpec], in_ch: usize, h: usize, w: usize, seed: u64) -> Result<f64> {
    run_check(spec, in_ch, h, w, seed, 1.5)
}

/// Generator stack shape used by the suite: full depth, reduced width so the
/// parameter count stays inside the finite-difference limit.
fn slim_generator_spec(in_ch: usize, features: usize) -> Vec<LayerSpec> {
    let mut spec = vec![
        LayerSpec::Conv3x3 { in_ch, out_ch: features },
        LayerSpec::BatchNorm { channels: features },
        LayerSpec::LeakyRelu { negative_slope: super::layers::LEAKY_SLOPE },
    ];
    for _ in 0..9 {
        spec.push(LayerSpec::Residual { channels: features });
    }
    spec.push(LayerSpec::Conv1x1 { in_ch: features, out_ch: 3 });
    spec
}

/// Gradient checks for every supported layer kind plus the full-depth
/// generator stack, all on 1x4x8x8 inputs in double precision.
pub fn standard_suite(seed: u64) -> GradCheckReport {
    let slope = super::layers::LEAKY_SLOPE;
    let cases: Vec<(&str, Vec<LayerSpec>, f64)> = vec![
        ("conv3x3", vec![LayerSpec::Conv3x3 { in_ch: 4, out_ch: 8 }], 1e-6),
        ("conv1x1-output", vec![LayerSpec::Conv1x1 { in_ch: 4, out_ch: 3 }], 1e-6),
        ("batch-norm", vec![LayerSpec::BatchNorm { channels: 4 }], 1e-4),
        ("leaky-relu", vec![LayerSpec::LeakyRelu { negative_slope: slope }], 1e-4),
        ("residual-block", vec![LayerSpec::Residual { channels: 4 }], 1e-4),
        ("bilinear-up", vec![LayerSpec::BilinearUp { factor: 2 }], 1e-6),
        ("box-down", vec![LayerSpec::BoxDown { factor: 2 }], 1e-6),
        ("generator-9-blocks", slim_generator_spec(4, 6), 1e-4),
    ];
    let cases = cases
        .into_iter()
        .map(|(name, spec, tol)| {
            let max_rel_err = grad_check(&spec, 4, 8, 8, seed).expect("suite specs are valid");
            GradCheckCase { name: name.to_string(), max_rel_err, tol, passed: max_rel_err <= tol }
        })
        .collect();
    GradCheckReport { cases }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_layers_pass_tight_tolerance() {
        let err = grad_check(&[LayerSpec::Conv3x3 { in_ch: 2, out_ch: 3 }], 2, 6, 6, 0).unwrap();
        assert!(err < 1e-6, "conv3x3 err {err}");
        let err = grad_check(&[LayerSpec::Conv1x1 { in_ch: 3, out_ch: 2 }], 3, 6, 6, 0).unwrap();
        assert!(err < 1e-6, "conv1x1 err {err}");
    }

    #[test]
    fn norm_activation_and_block_pass() {
        let err = grad_check(&[LayerSpec::BatchNorm { channels: 3 }], 3, 6, 6, 0).unwrap();
        assert!(err < 1e-4, "batch-norm err {err}");
        let err = grad_check(&[LayerSpec::LeakyRelu { negative_slope: 0.2 }], 2, 6, 6, 0).unwrap();
        assert!(err < 1e-4, "leaky-relu err {err}");
        let err = grad_check(&[LayerSpec::Residual { channels: 3 }], 3, 6, 6, 0).unwrap();
        assert!(err < 1e-4, "residual err {err}");
    }

    #[test]
    fn resampling_layers_pass() {
        let err = grad_check(&[LayerSpec::BilinearUp { factor: 2 }], 2, 5, 5, 0).unwrap();
        assert!(err < 1e-6, "bilinear-up err {err}");
        let err = grad_check(&[LayerSpec::BoxDown { factor: 2 }], 2, 5, 5, 0).unwrap();
        assert!(err < 1e-6, "box-down err {err}");
    }

    #[test]
    fn corrupted_gradients_are_detected() {
        let err =
            grad_check_corrupted(&[LayerSpec::Conv3x3 { in_ch: 2, out_ch: 3 }], 2, 6, 6, 0).unwrap();
        assert!(err > 1e-3, "corruption went unnoticed: err {err}");
    }

    #[test]
    fn oversized_network_is_rejected() {
        let spec = slim_generator_spec(4, 32);
        let err = grad_check(&spec, 4, 8, 8, 0).unwrap_err();
        assert!(err.to_string().contains("finite differences"), "{err}");
    }
}

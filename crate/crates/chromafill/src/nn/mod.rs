//! Minimal differentiable-network engine.
//!
//! Supports exactly the layer kinds the per-image generators need: 3x3
//! convolutions with reflection padding, a 1x1 output projection, batch
//! normalization, leaky ReLU, two-layer residual blocks, corner-aligned
//! bilinear upsampling, and box downsampling. Forward passes in train mode
//! record the activations needed for an exact analytic backward pass, and
//! parameters are updated with Adam.
//!
//! The engine is generic over [`Real`] so training runs in `f32` while
//! gradient checking runs in `f64`, where central finite differences are
//! meaningful.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;
mod network;
mod tensor;

pub use adam::{adam_step, AdamState, TrainHyper};
pub use checkpoint::{load_params, save_params};
pub use gradcheck::{grad_check, grad_check_corrupted, standard_suite, GradCheckCase, GradCheckReport};
pub use network::{Mode, Network, ParamTensor};
pub use tensor::Tensor;

/// Scalar type the engine computes in.
pub trait Real:
    Copy
    + Send
    + Sync
    + PartialOrd
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn is_finite(self) -> bool;

    /// `C = alpha * A @ B + beta * C` with explicit strides; see
    /// `matrixmultiply` for the exact contract.
    ///
    /// # Safety
    /// Pointers must cover matrices of the given dimensions and strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    fn sqrt(self) -> Self {
        self.sqrt()
    }
    fn abs(self) -> Self {
        self.abs()
    }
    fn is_finite(self) -> bool {
        self.is_finite()
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Real for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        self.sqrt()
    }
    fn abs(self) -> Self {
        self.abs()
    }
    fn is_finite(self) -> bool {
        self.is_finite()
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// One layer in a network description.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// 3x3 convolution with reflection padding 1 (spatial size preserved).
    Conv3x3 { in_ch: usize, out_ch: usize },
    /// 1x1 projection, used as the output layer.
    Conv1x1 { in_ch: usize, out_ch: usize },
    BatchNorm { channels: usize },
    LeakyRelu { negative_slope: f64 },
    /// Two 3x3 conv + batch-norm pairs with a leaky-ReLU between them,
    /// an identity skip, and a leaky-ReLU after the sum.
    Residual { channels: usize },
    /// Corner-aligned bilinear upsampling by an integer factor.
    BilinearUp { factor: usize },
    /// Block-average downsampling by an integer factor.
    BoxDown { factor: usize },
}

pub use layers::LEAKY_SLOPE;

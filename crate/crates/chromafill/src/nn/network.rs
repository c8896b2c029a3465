//! Sequential networks built from [`LayerSpec`] lists.

use rand::Rng;

use super::layers::{BatchNorm, BilinearUp, BoxDown, Conv2d, LeakyRelu, ResidualBlock};
use super::{LayerSpec, Real, Tensor};
use crate::error::{Error, Result};

pub use super::layers::{Mode, ParamTensor};

#[derive(Debug, Clone)]
enum Node<T: Real> {
    Conv(Conv2d<T>),
    Bn(BatchNorm<T>),
    Act(LeakyRelu<T>),
    Res(ResidualBlock<T>),
    Up(BilinearUp),
    Down(BoxDown),
}

/// A sequential network owning its parameters and, after a train-mode
/// forward pass, the activation record for one backward pass.
#[derive(Debug, Clone)]
pub struct Network<T: Real> {
    spec: Vec<LayerSpec>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> Network<T> {
    /// Build a network with deterministic fan-in-scaled uniform init drawn
    /// from `rng`.
    pub fn from_spec(spec: &[LayerSpec], rng: &mut impl Rng) -> Result<Self> {
        if spec.is_empty() {
            return Err(Error::invalid("network spec must contain at least one layer"));
        }
        let nodes = spec
            .iter()
            .enumerate()
            .map(|(i, layer)| match *layer {
                LayerSpec::Conv3x3 { in_ch, out_ch } => {
                    Node::Conv(Conv2d::new(&format!("l{i}.conv3x3"), in_ch, out_ch, 3, rng))
                }
                LayerSpec::Conv1x1 { in_ch, out_ch } => {
                    Node::Conv(Conv2d::new(&format!("l{i}.conv1x1"), in_ch, out_ch, 1, rng))
                }
                LayerSpec::BatchNorm { channels } => Node::Bn(BatchNorm::new(&format!("l{i}.bn"), channels)),
                LayerSpec::LeakyRelu { negative_slope } => Node::Act(LeakyRelu::new(negative_slope)),
                LayerSpec::Residual { channels } => {
                    Node::Res(ResidualBlock::new(&format!("l{i}.res"), channels, rng))
                }
                LayerSpec::BilinearUp { factor } => Node::Up(BilinearUp::new(factor)),
                LayerSpec::BoxDown { factor } => Node::Down(BoxDown::new(factor)),
            })
            .collect();
        Ok(Self { spec: spec.to_vec(), nodes })
    }

    pub fn spec(&self) -> &[LayerSpec] {
        &self.spec
    }

    /// Run the network. Train mode records the activations backward needs
    /// and lets batch norm use (and update) batch statistics; eval mode uses
    /// running statistics and records nothing.
    pub fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut x = input.clone();
        for (i, node) in self.nodes.iter_mut().enumerate() {
            x = match node {
                Node::Conv(l) => l.forward(&x, mode),
                Node::Bn(l) => l.forward(&x, mode),
                Node::Act(l) => l.forward(&x, mode),
                Node::Res(l) => l.forward(&x, mode),
                Node::Up(l) => l.forward(&x, mode),
                Node::Down(l) => l.forward(&x, mode),
            }
            .map_err(|e| Error::invalid(format!("layer {i}: {e}")))?;
        }
        Ok(x)
    }

    /// Propagate `loss_grad` back through the recorded forward pass,
    /// accumulating parameter gradients; returns the input gradient.
    pub fn backward(&mut self, loss_grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mut d = loss_grad.clone();
        for node in self.nodes.iter_mut().rev() {
            d = match node {
                Node::Conv(l) => l.backward(&d),
                Node::Bn(l) => l.backward(&d),
                Node::Act(l) => l.backward(&d),
                Node::Res(l) => l.backward(&d),
                Node::Up(l) => l.backward(&d),
                Node::Down(l) => l.backward(&d),
            }?;
        }
        Ok(d)
    }

    pub fn visit_params(&mut self, mut f: impl FnMut(&mut ParamTensor<T>)) {
        for node in &mut self.nodes {
            match node {
                Node::Conv(l) => l.visit_params(&mut f),
                Node::Bn(l) => l.visit_params(&mut f),
                Node::Res(l) => l.visit_params(&mut f),
                Node::Act(_) | Node::Up(_) | Node::Down(_) => {}
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(|p| p.zero_grad());
    }

    /// Number of trainable scalars.
    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(|p| {
            if p.trainable {
                n += p.data.len();
            }
        });
        n
    }

    /// Snapshot of every parameter and buffer, in visitation order.
    pub fn param_snapshot(&mut self) -> Vec<Vec<T>> {
        let mut out = Vec::new();
        self.visit_params(|p| out.push(p.data.clone()));
        out
    }
}

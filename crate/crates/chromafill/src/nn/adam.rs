//! Adam with bias correction.

use super::{Network, Real};
use crate::error::{Error, Result};

/// Optimizer and training-loop hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl TrainHyper {
    pub fn new(learning_rate: f64, iterations: usize, seed: u64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, iterations, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.iterations < 1 {
            return Err(Error::invalid("iteration count must be at least 1"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// First/second-moment accumulators mirroring a network's trainable
/// parameters, plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn for_network(net: &mut Network<T>) -> Self {
        let mut m = Vec::new();
        net.visit_params(|p| {
            if p.trainable {
                m.push(vec![T::ZERO; p.data.len()]);
            }
        });
        let v = m.clone();
        Self { m, v, step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam update over every trainable parameter.
///
/// Fails without touching the step counter if any gradient is non-finite,
/// naming the offending parameter.
pub fn adam_step<T: Real>(
    net: &mut Network<T>,
    state: &mut AdamState<T>,
    hyper: &TrainHyper,
) -> Result<()> {
    let mut bad: Option<String> = None;
    net.visit_params(|p| {
        if bad.is_none() && p.trainable && !p.grad.iter().all(|g| g.is_finite()) {
            bad = Some(p.name.clone());
        }
    });
    if let Some(name) = bad {
        return Err(Error::numeric(format!("non-finite gradient in parameter {name}")));
    }

    let t = state.step + 1;
    let bc1 = T::from_f64(1.0 - hyper.beta1.powi(t as i32));
    let bc2 = T::from_f64(1.0 - hyper.beta2.powi(t as i32));
    let lr = T::from_f64(hyper.learning_rate);
    let b1 = T::from_f64(hyper.beta1);
    let b2 = T::from_f64(hyper.beta2);
    let one_m_b1 = T::ONE - b1;
    let one_m_b2 = T::ONE - b2;
    let eps = T::from_f64(hyper.epsilon);

    let mut idx = 0;
    net.visit_params(|p| {
        if !p.trainable {
            return;
        }
        let (m, v) = (&mut state.m[idx], &mut state.v[idx]);
        for ((w, &g), (mi, vi)) in
            p.data.iter_mut().zip(p.grad.iter()).zip(m.iter_mut().zip(v.iter_mut()))
        {
            *mi = b1 * *mi + one_m_b1 * g;
            *vi = b2 * *vi + one_m_b2 * g * g;
            let mhat = *mi / bc1;
            let vhat = *vi / bc2;
            *w -= lr * mhat / (vhat.sqrt() + eps);
        }
        idx += 1;
    });
    state.step = t;
    Ok(())
}

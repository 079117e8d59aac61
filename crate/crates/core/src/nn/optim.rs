use alloc::vec;
use alloc::vec::Vec;

use super::params::{Gradients, ModelParams};
use super::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    #[default]
    Adam,
}

const MOMENTUM: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// SGD with momentum 0.9, or Adam with (0.9, 0.999, 1e-8). Running
/// batch-norm statistics are never touched.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: T,
    step: i32,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &ModelParams<T>) -> Self {
        let zeros = || params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect::<Vec<_>>();
        Self {
            kind,
            lr: T::from_f64(learning_rate).expect("finite"),
            step: 0,
            first: zeros(),
            second: if kind == OptimizerKind::Adam { zeros() } else { Vec::new() },
        }
    }

    pub fn set_learning_rate(&mut self, learning_rate: f64) {
        self.lr = T::from_f64(learning_rate).expect("finite");
    }

    pub fn step(&mut self, params: &mut ModelParams<T>, grads: &Gradients<T>) {
        self.step += 1;
        let c = |v: f64| T::from_f64(v).expect("finite");
        let trainable: Vec<bool> = params.graph().specs.iter().map(|s| s.kind.trainable()).collect();
        match self.kind {
            OptimizerKind::SgdMomentum => {
                let mu = c(MOMENTUM);
                for (i, g) in grads.tensors.iter().enumerate().filter(|(i, _)| trainable[*i]) {
                    let vel = &mut self.first[i];
                    for ((p, v), &gi) in params.tensor_mut(i).iter_mut().zip(vel.iter_mut()).zip(g) {
                        *v = mu * *v + gi;
                        *p -= self.lr * *v;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (c(MOMENTUM), c(BETA2));
                let t = self.step;
                let lr_t = self.lr * (T::one() - b2.powi(t)).sqrt() / (T::one() - b1.powi(t));
                let eps = c(ADAM_EPS);
                for (i, g) in grads.tensors.iter().enumerate().filter(|(i, _)| trainable[*i]) {
                    let (m, v) = (&mut self.first[i], &mut self.second[i]);
                    for (((p, mi), vi), &gi) in params.tensor_mut(i).iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                        *mi = b1 * *mi + (T::one() - b1) * gi;
                        *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                        *p -= lr_t * *mi / (vi.sqrt() + eps);
                    }
                }
            }
        }
    }
}

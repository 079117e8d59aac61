use alloc::vec;
use alloc::vec::Vec;

use super::arch::{ArchConfig, Graph, ParamKind};
use super::{NetError, Real};
use crate::rng::{self, STREAM_INIT};

/// All tensors of a network, in layout declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    arch: ArchConfig,
    graph: Graph,
    tensors: Vec<Vec<T>>,
}

impl<T: Real> ModelParams<T> {
    /// Every tensor zero except running variances, which start at 1.
    pub fn zeros(arch: &ArchConfig) -> Result<Self, NetError> {
        let graph = Graph::build(arch)?;
        let tensors = graph
            .specs
            .iter()
            .map(|s| {
                let fill = if s.kind == ParamKind::RunningVar { T::one() } else { T::zero() };
                vec![fill; s.len()]
            })
            .collect();
        Ok(Self {
            arch: arch.clone(),
            graph,
            tensors,
        })
    }

    /// He-normal weights (`std = sqrt(2 / fan_in)`, `sqrt(1 / fan_in)` for
    /// the linear output layer), zero biases, unit BN scale, zero BN shift.
    /// Values are drawn in declaration order from one seeded stream.
    pub fn init(arch: &ArchConfig, seed: u64) -> Result<Self, NetError> {
        let mut p = Self::zeros(arch)?;
        let mut rng = rng::stream(seed, STREAM_INIT);
        let out_weight = p.graph.dense.last().expect("head has an output layer").weight;
        for (i, spec) in p.graph.specs.iter().enumerate() {
            match spec.kind {
                ParamKind::ConvWeight | ParamKind::DenseWeight => {
                    let gain = if i == out_weight { 1.0 } else { 2.0 };
                    let std = libm::sqrt(gain / spec.fan_in as f64);
                    for v in &mut p.tensors[i] {
                        *v = T::from_f64(std * rng::standard_normal(&mut rng)).expect("finite");
                    }
                }
                ParamKind::BnScale => p.tensors[i].iter_mut().for_each(|v| *v = T::one()),
                _ => {}
            }
        }
        Ok(p)
    }

    /// Rebuilds parameters from raw tensors, checking every length.
    pub fn from_tensors(arch: &ArchConfig, tensors: Vec<Vec<T>>) -> Result<Self, NetError> {
        let graph = Graph::build(arch)?;
        if tensors.len() != graph.specs.len() {
            return Err(NetError::Shape(alloc::format!(
                "expected {} tensors, got {}",
                graph.specs.len(),
                tensors.len()
            )));
        }
        for (spec, t) in graph.specs.iter().zip(&tensors) {
            if spec.len() != t.len() {
                return Err(NetError::Shape(alloc::format!(
                    "{}: expected {} values, got {}",
                    spec.name,
                    spec.len(),
                    t.len()
                )));
            }
            if spec.kind == ParamKind::RunningVar && t.iter().any(|v| !(*v > T::zero())) {
                return Err(NetError::Shape(alloc::format!("{}: variances must be positive", spec.name)));
            }
        }
        Ok(Self {
            arch: arch.clone(),
            graph,
            tensors,
        })
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            arch: self.arch.clone(),
            graph: self.graph.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| t.iter().map(|v| U::from_f64(v.to_f64().expect("finite")).expect("finite")).collect())
                .collect(),
        }
    }
}

impl<T> ModelParams<T> {
    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn tensors(&self) -> &[Vec<T>] {
        &self.tensors
    }

    pub fn tensor(&self, index: usize) -> &[T] {
        &self.tensors[index]
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut Vec<T> {
        &mut self.tensors[index]
    }

    pub fn tensor_by_name(&self, name: &str) -> Option<&[T]> {
        self.graph
            .specs
            .iter()
            .position(|s| s.name == name)
            .map(|i| self.tensors[i].as_slice())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.graph.specs.iter().position(|s| s.name == name)
    }
}

/// Gradients aligned with [`ModelParams`] tensors; running statistics have
/// all-zero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(params: &ModelParams<T>) -> Self {
        Self {
            tensors: params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|v| *v == T::zero())
    }
}

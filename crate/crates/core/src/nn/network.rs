//! Forward and reverse-mode passes over the layer graph.

use alloc::vec;
use alloc::vec::Vec;

use super::arch::{ArchConfig, ConvNode, Source};
use super::encode::Batch;
use super::ops::{col2im_add, im2col, matmul_acc, matmul_grad_input, matmul_grad_weight};
use super::params::{Gradients, ModelParams};
use super::{NetError, Real};

pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm; the cache supports [`backward`].
    Train,
    /// Running statistics in batch norm.
    Eval,
}

#[derive(Debug, Clone)]
struct NodeCache<T> {
    /// Post-ReLU output `[n, c, side, side]`.
    output: Vec<T>,
    /// Normalised pre-affine values, same layout.
    xhat: Vec<T>,
    mean: Vec<T>,
    var: Vec<T>,
    inv_std: Vec<T>,
}

/// Activations saved by [`forward`].
#[derive(Debug, Clone)]
pub struct Cache<T> {
    mode: Mode,
    batch: usize,
    arch: ArchConfig,
    input: Batch<T>,
    nodes: Vec<NodeCache<T>>,
    /// Input to each dense layer, `[n, in_dim]`.
    dense_inputs: Vec<Vec<T>>,
    /// Pre-activation of each dense layer, `[n, out_dim]`.
    dense_pre: Vec<Vec<T>>,
}

impl<T: Real> Cache<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// `running = momentum * running + (1 - momentum) * batch` for every
    /// batch-norm layer. Only meaningful for train-mode caches.
    pub fn update_running_stats(&self, params: &mut ModelParams<T>, momentum: T) -> Result<(), NetError> {
        if self.mode != Mode::Train {
            return Err(NetError::StaleCache("running statistics need a train-mode cache"));
        }
        if &self.arch != params.arch() {
            return Err(NetError::StaleCache("cache belongs to a different architecture"));
        }
        let keep = T::one() - momentum;
        let nodes = params.graph().nodes.clone();
        for (node, nc) in nodes.iter().zip(&self.nodes) {
            for (r, &m) in params.tensor_mut(node.running_mean).iter_mut().zip(&nc.mean) {
                *r = momentum * *r + keep * m;
            }
            for (r, &v) in params.tensor_mut(node.running_var).iter_mut().zip(&nc.var) {
                *r = momentum * *r + keep * v;
            }
        }
        Ok(())
    }

    /// Batch mean and variance of a node's pre-normalisation values.
    pub fn batch_stats(&self, node: usize) -> (&[T], &[T]) {
        (&self.nodes[node].mean, &self.nodes[node].var)
    }

    /// Post-ReLU output of a node.
    pub fn node_output(&self, node: usize) -> &[T] {
        &self.nodes[node].output
    }
}

fn check_batch<T: Real>(arch: &ArchConfig, batch: &Batch<T>) -> Result<(), NetError> {
    let plane = arch.input_size * arch.input_size;
    let n = batch.size;
    if n == 0 {
        return Err(NetError::Shape("empty batch".into()));
    }
    let want_img = n * arch.image_channels * plane;
    let want_seg = n * arch.seg_channels() * plane;
    if batch.image.len() != want_img || batch.seg.len() != want_seg {
        return Err(NetError::Shape(alloc::format!(
            "batch tensors have {}/{} values, expected {}/{}",
            batch.image.len(),
            batch.seg.len(),
            want_img,
            want_seg
        )));
    }
    if arch.variant == super::Variant::Naive && batch.joint.len() != want_img + want_seg {
        return Err(NetError::Shape("naive variant needs the joint input".into()));
    }
    Ok(())
}

/// Per-sample slice of a source tensor.
fn source_sample<'a, T: Real>(
    source: Source,
    sample: usize,
    len: usize,
    batch: &'a Batch<T>,
    nodes: &'a [NodeCache<T>],
) -> &'a [T] {
    let full: &[T] = match source {
        Source::Image => &batch.image,
        Source::Seg => &batch.seg,
        Source::Joint => &batch.joint,
        Source::Node(j) => &nodes[j].output,
    };
    &full[sample * len..(sample + 1) * len]
}

fn node_forward<T: Real>(
    node: &ConvNode,
    params: &ModelParams<T>,
    batch: &Batch<T>,
    done: &[NodeCache<T>],
    mode: Mode,
    col: &mut Vec<T>,
) -> NodeCache<T> {
    let n = batch.size;
    let (co, plane) = (node.out_channels, node.out_side * node.out_side);
    // the whole batch shares one column matrix: [k, n * plane]
    let ld = n * plane;
    let mut zb = vec![T::zero(); co * ld];
    for term in &node.terms {
        let k = term.in_channels * 9;
        let in_len = term.in_channels * node.in_side * node.in_side;
        col.resize(k * ld, T::zero());
        for i in 0..n {
            let src = source_sample(term.source, i, in_len, batch, done);
            im2col(src, term.in_channels, node.in_side, node.out_side, &mut col[i * plane..], ld);
        }
        matmul_acc(params.tensor(term.weight), col, &mut zb, co, k, ld);
    }
    let mut z = vec![T::zero(); n * co * plane];
    for c in 0..co {
        for i in 0..n {
            z[(i * co + c) * plane..][..plane].copy_from_slice(&zb[c * ld + i * plane..][..plane]);
        }
    }

    let count = T::from_usize(n * plane).expect("small");
    let eps = T::from_f64(BN_EPS).expect("finite");
    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![T::zero(); co];
            let mut var = vec![T::zero(); co];
            for c in 0..co {
                let mut s = T::zero();
                for i in 0..n {
                    s += z[(i * co + c) * plane..][..plane].iter().copied().sum::<T>();
                }
                let m = s / count;
                let mut v = T::zero();
                for i in 0..n {
                    for &x in &z[(i * co + c) * plane..][..plane] {
                        v += (x - m) * (x - m);
                    }
                }
                mean[c] = m;
                var[c] = v / count;
            }
            (mean, var)
        }
        Mode::Eval => (
            params.tensor(node.running_mean).to_vec(),
            params.tensor(node.running_var).to_vec(),
        ),
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let gamma = params.tensor(node.gamma);
    let beta = params.tensor(node.beta);
    let mut xhat = z;
    let mut output = vec![T::zero(); xhat.len()];
    for i in 0..n {
        for c in 0..co {
            let range = (i * co + c) * plane..(i * co + c + 1) * plane;
            for (x, o) in xhat[range.clone()].iter_mut().zip(&mut output[range]) {
                *x = (*x - mean[c]) * inv_std[c];
                let y = gamma[c] * *x + beta[c];
                *o = if y > T::zero() { y } else { T::zero() };
            }
        }
    }
    NodeCache {
        output,
        xhat,
        mean,
        var,
        inv_std,
    }
}

/// Runs the network on a batch and returns the raw (unclamped) outputs and
/// the activation cache.
///
/// In train mode batch norm uses batch statistics; apply
/// [`Cache::update_running_stats`] afterwards to fold them into the running
/// averages.
pub fn forward<T: Real>(params: &ModelParams<T>, batch: &Batch<T>, mode: Mode) -> Result<(Vec<T>, Cache<T>), NetError> {
    let arch = params.arch();
    check_batch(arch, batch)?;
    let graph = params.graph();
    let n = batch.size;
    let mut col = Vec::new();
    let mut nodes: Vec<NodeCache<T>> = Vec::with_capacity(graph.nodes.len());
    for node in &graph.nodes {
        let nc = node_forward(node, params, batch, &nodes, mode, &mut col);
        nodes.push(nc);
    }

    let dim = graph.head_dim();
    let mut h = Vec::with_capacity(n * dim);
    for i in 0..n {
        for &id in &graph.head_inputs {
            let node = &graph.nodes[id];
            let len = node.out_channels * node.out_side * node.out_side;
            h.extend_from_slice(&nodes[id].output[i * len..(i + 1) * len]);
        }
    }
    let mut dense_inputs = Vec::with_capacity(graph.dense.len());
    let mut dense_pre = Vec::with_capacity(graph.dense.len());
    for layer in &graph.dense {
        let w = params.tensor(layer.weight);
        let b = params.tensor(layer.bias);
        let mut pre = vec![T::zero(); n * layer.out_dim];
        for i in 0..n {
            let x = &h[i * layer.in_dim..(i + 1) * layer.in_dim];
            for o in 0..layer.out_dim {
                pre[i * layer.out_dim + o] = b[o] + super::ops::dot(&w[o * layer.in_dim..(o + 1) * layer.in_dim], x);
            }
        }
        let act: Vec<T> = if layer.relu {
            pre.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
        } else {
            pre.clone()
        };
        dense_inputs.push(core::mem::replace(&mut h, act));
        dense_pre.push(pre);
    }
    Ok((
        h,
        Cache {
            mode,
            batch: n,
            arch: arch.clone(),
            input: batch.clone(),
            nodes,
            dense_inputs,
            dense_pre,
        },
    ))
}

/// Eval-mode outputs clamped to `[0, 1]`.
pub fn predict<T: Real>(params: &ModelParams<T>, batch: &Batch<T>) -> Result<Vec<T>, NetError> {
    let (out, _) = forward(params, batch, Mode::Eval)?;
    Ok(out.into_iter().map(|v| v.max(T::zero()).min(T::one())).collect())
}

/// Mean squared error over a batch and its gradient w.r.t. the outputs.
pub fn mse_loss<T: Real>(pred: &[T], target: &[T]) -> (T, Vec<T>) {
    assert_eq!(pred.len(), target.len(), "prediction/target length");
    let n = T::from_usize(pred.len()).expect("small");
    let two = T::one() + T::one();
    let mut loss = T::zero();
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            loss += (p - t) * (p - t);
            two * (p - t) / n
        })
        .collect();
    (loss / n, grad)
}

/// Exact gradients of a scalar loss given `d_out = dL/d(output)` for every
/// sample of the batch the cache was built from.
pub fn backward<T: Real>(params: &ModelParams<T>, cache: &Cache<T>, d_out: &[T]) -> Result<Gradients<T>, NetError> {
    if cache.mode != Mode::Train {
        return Err(NetError::StaleCache("cache was produced in eval mode"));
    }
    if &cache.arch != params.arch() {
        return Err(NetError::StaleCache("cache belongs to a different architecture"));
    }
    if d_out.len() != cache.batch {
        return Err(NetError::StaleCache("output gradient does not match the cached batch"));
    }
    let graph = params.graph();
    let n = cache.batch;
    let mut grads = Gradients::zeros_like(params);

    // fully connected head
    let mut d = d_out.to_vec();
    for (li, layer) in graph.dense.iter().enumerate().rev() {
        if layer.relu {
            for (g, &p) in d.iter_mut().zip(&cache.dense_pre[li]) {
                if !(p > T::zero()) {
                    *g = T::zero();
                }
            }
        }
        let x = &cache.dense_inputs[li];
        let w = params.tensor(layer.weight);
        let mut dx = vec![T::zero(); n * layer.in_dim];
        for i in 0..n {
            let xi = &x[i * layer.in_dim..(i + 1) * layer.in_dim];
            let dxi = &mut dx[i * layer.in_dim..(i + 1) * layer.in_dim];
            for o in 0..layer.out_dim {
                let g = d[i * layer.out_dim + o];
                if g == T::zero() {
                    continue;
                }
                grads.tensors[layer.bias][o] += g;
                let dw = &mut grads.tensors[layer.weight][o * layer.in_dim..(o + 1) * layer.in_dim];
                let wr = &w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for ((dwj, &xj), (dxj, &wj)) in dw.iter_mut().zip(xi).zip(dxi.iter_mut().zip(wr)) {
                    *dwj += g * xj;
                    *dxj += g * wj;
                }
            }
        }
        d = dx;
    }

    // scatter the head gradient back onto the node outputs
    let mut d_nodes: Vec<Vec<T>> = cache.nodes.iter().map(|c| vec![T::zero(); c.output.len()]).collect();
    let dim = graph.head_dim();
    for i in 0..n {
        let mut offset = 0;
        for &id in &graph.head_inputs {
            let node = &graph.nodes[id];
            let len = node.out_channels * node.out_side * node.out_side;
            d_nodes[id][i * len..(i + 1) * len].copy_from_slice(&d[i * dim + offset..i * dim + offset + len]);
            offset += len;
        }
    }

    let mut col = Vec::new();
    let mut dcol = Vec::new();
    for (id, node) in graph.nodes.iter().enumerate().rev() {
        let nc = &cache.nodes[id];
        let (co, plane) = (node.out_channels, node.out_side * node.out_side);
        let count = T::from_usize(n * plane).expect("small");
        let gamma = params.tensor(node.gamma);

        // ReLU, then the affine part of batch norm
        let mut dz = core::mem::take(&mut d_nodes[id]);
        for (g, &o) in dz.iter_mut().zip(&nc.output) {
            if !(o > T::zero()) {
                *g = T::zero();
            }
        }
        let mut sum_dy = vec![T::zero(); co];
        let mut sum_dy_xhat = vec![T::zero(); co];
        for i in 0..n {
            for c in 0..co {
                let r = (i * co + c) * plane..(i * co + c + 1) * plane;
                for (&g, &xh) in dz[r.clone()].iter().zip(&nc.xhat[r]) {
                    sum_dy[c] += g;
                    sum_dy_xhat[c] += g * xh;
                }
            }
        }
        for c in 0..co {
            grads.tensors[node.gamma][c] += sum_dy_xhat[c];
            grads.tensors[node.beta][c] += sum_dy[c];
        }
        // normalisation with batch statistics
        for i in 0..n {
            for c in 0..co {
                let r = (i * co + c) * plane..(i * co + c + 1) * plane;
                let scale = gamma[c] * nc.inv_std[c] / count;
                for (g, &xh) in dz[r.clone()].iter_mut().zip(&nc.xhat[r]) {
                    *g = scale * (count * *g - sum_dy[c] - xh * sum_dy_xhat[c]);
                }
            }
        }

        let ld = n * plane;
        let mut dzb = vec![T::zero(); co * ld];
        for c in 0..co {
            for i in 0..n {
                dzb[c * ld + i * plane..][..plane].copy_from_slice(&dz[(i * co + c) * plane..][..plane]);
            }
        }
        for term in &node.terms {
            let k = term.in_channels * 9;
            let in_len = term.in_channels * node.in_side * node.in_side;
            col.resize(k * ld, T::zero());
            for i in 0..n {
                let src = source_sample(term.source, i, in_len, &cache.input, &cache.nodes);
                im2col(src, term.in_channels, node.in_side, node.out_side, &mut col[i * plane..], ld);
            }
            matmul_grad_weight(&dzb, &col, &mut grads.tensors[term.weight], co, k, ld);
            if let Source::Node(j) = term.source {
                dcol.resize(k * ld, T::zero());
                matmul_grad_input(params.tensor(term.weight), &dzb, &mut dcol, co, k, ld);
                for i in 0..n {
                    col2im_add(
                        &dcol[i * plane..],
                        term.in_channels,
                        node.in_side,
                        node.out_side,
                        &mut d_nodes[j][i * in_len..(i + 1) * in_len],
                        ld,
                    );
                }
            }
        }
    }
    Ok(grads)
}

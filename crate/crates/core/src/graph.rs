//! Reverse-mode autodiff tape.
//!
//! A [`Graph`] owns every tensor produced during a forward pass. Nodes are
//! appended in execution order, so the node list is already a topological
//! order and [`Graph::backward`] simply walks it in reverse.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{self, axis_split, Conv3dGeom};
use crate::real::Real;
use crate::tensor::{self, numel, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

/// Sentinel gather index: the output element is zero.
pub const GATHER_ZERO: usize = usize::MAX;

enum Op<T> {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddBias { x: Var, bias: Var, axis: usize },
    MatMul(Var, Var),
    Bmm(Var, Var),
    Relu(Var),
    Gelu(Var),
    Softmax { x: Var, axis: usize },
    LayerNorm { x: Var, gamma: Var, beta: Var, mean: Vec<T>, rstd: Vec<T> },
    Conv3d { x: Var, w: Var, b: Option<Var>, geom: Conv3dGeom },
    MaxPool3d { x: Var, argmax: Vec<usize> },
    Gather { x: Var, index: Vec<usize> },
    Reshape(Var),
    MeanAxis { x: Var, axis: usize },
    Sum(Var),
    CrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<T> },
}

struct Node<T> {
    value: Tensor<T>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
    op: Op<T>,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    backward_done: bool,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn bmm_dims(a: &[usize], b: &[usize]) -> Result<(usize, usize, usize, usize)> {
    if a.len() != 3 || b.len() != 3 || a[0] != b[0] || a[2] != b[1] {
        return Err(Error::DimensionMismatch {
            op: "bmm",
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        });
    }
    Ok((a[0], a[1], a[2], b[2]))
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Input data or a frozen tensor.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Trainable leaf: receives a gradient on [`Graph::backward`].
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::DimensionMismatch {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&shape, data)?, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x * y).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&shape, data)?, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let t = self.value(x).map(|v| v * s);
        let rg = self.rg(x);
        self.push(t, Op::Scale(x, s), rg)
    }

    /// Adds a 1-D `bias` broadcast along `axis` of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::AxisOutOfRange { axis, rank: shape.len() });
        }
        if self.shape(bias) != [shape[axis]] {
            return Err(Error::DimensionMismatch {
                op: "add_bias",
                lhs: shape,
                rhs: self.shape(bias).to_vec(),
            });
        }
        let (_, len, inner) = axis_split(&shape, axis);
        let b = self.value(bias).data();
        let data = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + b[(i / inner) % len])
            .collect();
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(Tensor::new(&shape, data)?, Op::AddBias { x, bias, axis }, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let data = kernels::matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&[m, n], data)?, Op::MatMul(a, b), rg))
    }

    /// Batched matmul `[B×m×k] · [B×k×n] → [B×m×n]`.
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        let (bs, m, k, n) = bmm_dims(self.shape(a), self.shape(b))?;
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut data = vec![T::ZERO; bs * m * n];
        for i in 0..bs {
            kernels::matmul_acc(
                &ad[i * m * k..(i + 1) * m * k],
                &bd[i * k * n..(i + 1) * k * n],
                &mut data[i * m * n..(i + 1) * m * n],
                m,
                k,
                n,
            );
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&[bs, m, n], data)?, Op::Bmm(a, b), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor::new(v.shape(), kernels::relu(v.data())).expect("shape preserved");
        let rg = self.rg(x);
        self.push(t, Op::Relu(x), rg)
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor::new(v.shape(), kernels::gelu(v.data())).expect("shape preserved");
        let rg = self.rg(x);
        self.push(t, Op::Gelu(x), rg)
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::AxisOutOfRange { axis, rank: shape.len() });
        }
        let (o, l, i) = axis_split(&shape, axis);
        let data = kernels::softmax(self.value(x).data(), o, l, i);
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(&shape, data)?, Op::Softmax { x, axis }, rg))
    }

    /// Normalizes contiguous trailing slices of `normalized` elements, then
    /// applies the per-element affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, normalized: usize, gamma: Var, beta: Var, eps: T) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if normalized == 0
            || *shape.last().unwrap() != normalized
            || self.shape(gamma) != [normalized]
            || self.shape(beta) != [normalized]
        {
            return Err(Error::DimensionMismatch {
                op: "layer_norm",
                lhs: shape,
                rhs: self.shape(gamma).to_vec(),
            });
        }
        let (y, mean, rstd) = kernels::layer_norm(
            self.value(x).data(),
            self.value(gamma).data(),
            self.value(beta).data(),
            normalized,
            eps,
        );
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(
            Tensor::new(&shape, y)?,
            Op::LayerNorm { x, gamma, beta, mean, rstd },
            rg,
        ))
    }

    pub fn conv3d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: [usize; 3],
        padding: [usize; 3],
    ) -> Result<Var> {
        let geom = Conv3dGeom::new(self.shape(x), self.shape(w), stride, padding)?;
        if let Some(b) = b {
            if self.shape(b) != [geom.out_channels] {
                return Err(Error::DimensionMismatch {
                    op: "conv3d bias",
                    lhs: self.shape(w).to_vec(),
                    rhs: self.shape(b).to_vec(),
                });
            }
        }
        let data = kernels::conv3d(
            &geom,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
        );
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        Ok(self.push(Tensor::new(&geom.output_shape(), data)?, Op::Conv3d { x, w, b, geom }, rg))
    }

    /// Max pooling over the last three axes of a rank-5 tensor.
    pub fn max_pool3d(&mut self, x: Var, window: [usize; 3], stride: [usize; 3]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 5 {
            return Err(Error::InvalidShape {
                shape,
                reason: "max_pool3d expects N×C×T×H×W".into(),
            });
        }
        let input = [shape[2], shape[3], shape[4]];
        let out = kernels::pool_output(input, window, stride)?;
        let (vals, argmax) =
            kernels::max_pool3d(self.value(x).data(), shape[0] * shape[1], input, window, stride, out);
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(&[shape[0], shape[1], out[0], out[1], out[2]], vals)?,
            Op::MaxPool3d { x, argmax },
            rg,
        ))
    }

    /// `out[i] = x[index[i]]`, or zero where `index[i] == GATHER_ZERO`.
    /// Covers permutation, broadcasting, padding, shifting and windowing.
    pub fn gather(&mut self, x: Var, index: Vec<usize>, shape: &[usize]) -> Result<Var> {
        tensor::check_shape(shape)?;
        let src = self.value(x).data();
        if index.len() != numel(shape) || index.iter().any(|&i| i != GATHER_ZERO && i >= src.len()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "gather index incompatible with source of {} elements and output {:?}",
                src.len(),
                shape
            )));
        }
        let data = index
            .iter()
            .map(|&i| if i == GATHER_ZERO { T::ZERO } else { src[i] })
            .collect();
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(shape, data)?, Op::Gather { x, index }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let (index, shape) = permute_index(self.shape(x), axes)?;
        self.gather(x, index, &shape)
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::AxisOutOfRange { axis, rank: shape.len() });
        }
        let (outer, len, inner) = axis_split(&shape, axis);
        let src = self.value(x).data();
        let mut data = vec![T::ZERO; outer * inner];
        for o in 0..outer {
            for j in 0..len {
                for i in 0..inner {
                    data[o * inner + i] += src[(o * len + j) * inner + i];
                }
            }
        }
        let denom = T::from_usize(len);
        data.iter_mut().for_each(|v| *v /= denom);
        let mut out_shape: Vec<usize> = shape.clone();
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(&out_shape, data)?, Op::MeanAxis { x, axis }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Mean cross-entropy of `logits[N×C]` against class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.shape(logits).to_vec();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(Error::DimensionMismatch {
                op: "cross_entropy",
                lhs: shape,
                rhs: vec![labels.len()],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= shape[1]) {
            return Err(Error::InvalidArgument(alloc::format!(
                "label {bad} out of range for {} classes",
                shape[1]
            )));
        }
        let (loss, probs) = kernels::cross_entropy(self.value(logits).data(), labels, shape[1]);
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Fingerprint of every non-differentiable decision taken on the tape
    /// (ReLU signs, pooling argmaxes). Finite-difference checks compare it
    /// across perturbations to detect kink crossings.
    pub fn kink_signature(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => {
                    for &v in self.nodes[x.0].value.data() {
                        mix((v > T::ZERO) as u64);
                    }
                }
                Op::MaxPool3d { argmax, .. } => argmax.iter().for_each(|&i| mix(i as u64)),
                _ => {}
            }
        }
        h
    }

    /// Populates gradients of every trainable node reachable from `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::BackwardTwice);
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::NonScalarLoss(self.shape(loss).to_vec()));
        }
        self.backward_done = true;
        if self.rg(loss) {
            self.nodes[loss.0].grad = Some(vec![T::ONE]);
        }
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            self.propagate(i, &g);
            self.nodes[i].grad = Some(g);
        }
        // Trainable leaves the loss never reached get an explicit zero gradient.
        for node in &mut self.nodes {
            if node.requires_grad && node.grad.is_none() {
                node.grad = Some(vec![T::ZERO; node.value.numel()]);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, contribution: &[T]) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(g) => g.iter_mut().zip(contribution).for_each(|(a, &b)| *a += b),
            None => node.grad = Some(contribution.to_vec()),
        }
    }

    fn propagate(&mut self, i: usize, g: &[T]) {
        // Temporarily detach the op so inputs can be borrowed mutably.
        let op = core::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(*a, g);
                self.accumulate(*b, g);
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let d: Vec<T> = g.iter().zip(self.value(*b).data()).map(|(&x, &y)| x * y).collect();
                    self.accumulate(*a, &d);
                }
                if self.rg(*b) {
                    let d: Vec<T> = g.iter().zip(self.value(*a).data()).map(|(&x, &y)| x * y).collect();
                    self.accumulate(*b, &d);
                }
            }
            Op::Scale(x, s) => {
                let d: Vec<T> = g.iter().map(|&v| v * *s).collect();
                self.accumulate(*x, &d);
            }
            Op::AddBias { x, bias, axis } => {
                self.accumulate(*x, g);
                if self.rg(*bias) {
                    let (_, len, inner) = axis_split(self.shape(*x), *axis);
                    let mut d = vec![T::ZERO; len];
                    for (k, &v) in g.iter().enumerate() {
                        d[(k / inner) % len] += v;
                    }
                    self.accumulate(*bias, &d);
                }
            }
            Op::MatMul(a, b) => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = self.shape(*b)[1];
                let (da, db) = kernels::matmul_backward(self.value(*a).data(), self.value(*b).data(), g, m, k, n);
                self.accumulate(*a, &da);
                self.accumulate(*b, &db);
            }
            Op::Bmm(a, b) => {
                let (bs, m, k, n) = bmm_dims(self.shape(*a), self.shape(*b)).expect("validated in forward");
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                let mut da = vec![T::ZERO; bs * m * k];
                let mut db = vec![T::ZERO; bs * k * n];
                for s in 0..bs {
                    let (x, y) = kernels::matmul_backward(
                        &ad[s * m * k..(s + 1) * m * k],
                        &bd[s * k * n..(s + 1) * k * n],
                        &g[s * m * n..(s + 1) * m * n],
                        m,
                        k,
                        n,
                    );
                    da[s * m * k..(s + 1) * m * k].copy_from_slice(&x);
                    db[s * k * n..(s + 1) * k * n].copy_from_slice(&y);
                }
                self.accumulate(*a, &da);
                self.accumulate(*b, &db);
            }
            Op::Relu(x) => {
                let d = kernels::relu_backward(self.value(*x).data(), g);
                self.accumulate(*x, &d);
            }
            Op::Gelu(x) => {
                let d = kernels::gelu_backward(self.value(*x).data(), g);
                self.accumulate(*x, &d);
            }
            Op::Softmax { x, axis } => {
                let (o, l, inner) = axis_split(self.shape(*x), *axis);
                let d = kernels::softmax_backward(self.nodes[i].value.data(), g, o, l, inner);
                self.accumulate(*x, &d);
            }
            Op::LayerNorm { x, gamma, beta, mean, rstd } => {
                let width = self.shape(*gamma)[0];
                let (dx, dg, db) = kernels::layer_norm_backward(
                    self.value(*x).data(),
                    self.value(*gamma).data(),
                    mean,
                    rstd,
                    g,
                    width,
                );
                self.accumulate(*x, &dx);
                self.accumulate(*gamma, &dg);
                self.accumulate(*beta, &db);
            }
            Op::Conv3d { x, w, b, geom } => {
                let (dx, dw, db) = kernels::conv3d_backward(geom, self.value(*x).data(), self.value(*w).data(), g);
                self.accumulate(*x, &dx);
                self.accumulate(*w, &dw);
                if let Some(b) = b {
                    self.accumulate(*b, &db);
                }
            }
            Op::MaxPool3d { x, argmax } => {
                if self.rg(*x) {
                    let mut d = vec![T::ZERO; self.value(*x).numel()];
                    for (&idx, &v) in argmax.iter().zip(g) {
                        d[idx] += v;
                    }
                    self.accumulate(*x, &d);
                }
            }
            Op::Gather { x, index } => {
                if self.rg(*x) {
                    let mut d = vec![T::ZERO; self.value(*x).numel()];
                    for (&idx, &v) in index.iter().zip(g) {
                        if idx != GATHER_ZERO {
                            d[idx] += v;
                        }
                    }
                    self.accumulate(*x, &d);
                }
            }
            Op::Reshape(x) => self.accumulate(*x, g),
            Op::MeanAxis { x, axis } => {
                let (outer, len, inner) = axis_split(self.shape(*x), *axis);
                let denom = T::from_usize(len);
                let mut d = vec![T::ZERO; outer * len * inner];
                for o in 0..outer {
                    for j in 0..len {
                        for k in 0..inner {
                            d[(o * len + j) * inner + k] = g[o * inner + k] / denom;
                        }
                    }
                }
                self.accumulate(*x, &d);
            }
            Op::Sum(x) => {
                let d = vec![g[0]; self.value(*x).numel()];
                self.accumulate(*x, &d);
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let classes = self.shape(*logits)[1];
                let d = kernels::cross_entropy_backward(probs, labels, classes, g[0]);
                self.accumulate(*logits, &d);
            }
        }
        self.nodes[i].op = op;
    }
}

/// Gather index realizing an axis permutation, plus the permuted shape.
pub fn permute_index(shape: &[usize], axes: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let rank = shape.len();
    let mut seen = vec![false; rank];
    if axes.len() != rank {
        return Err(Error::InvalidArgument(alloc::format!("permutation {axes:?} for rank {rank}")));
    }
    for &a in axes {
        if a >= rank || seen[a] {
            return Err(Error::InvalidArgument(alloc::format!("permutation {axes:?} for rank {rank}")));
        }
        seen[a] = true;
    }
    let in_strides = tensor::strides(shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let total = numel(shape);
    let mut index = Vec::with_capacity(total);
    let mut counter = vec![0usize; rank];
    for _ in 0..total {
        index.push(counter.iter().zip(axes).map(|(&c, &a)| c * in_strides[a]).sum());
        for d in (0..rank).rev() {
            counter[d] += 1;
            if counter[d] < out_shape[d] {
                break;
            }
            counter[d] = 0;
        }
    }
    Ok((index, out_shape))
}

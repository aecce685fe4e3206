//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! Every primitive appends a node to a [`Tape`]; [`Tape::backward`] walks the
//! nodes in exact reverse recording order. Nodes whose inputs carry no
//! gradient are computed but never visited on the way back, so constant masks
//! cost only their storage.
//!
//! Broadcasting is limited to a one-element tensor combined with any shape.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::math;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    index: usize,
    tape: u64,
}

impl Var {
    pub fn tape_id(self) -> u64 {
        self.tape
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    Div,
    /// Elementwise minimum; the gradient goes to the smaller operand, the first on ties.
    Min2,
    Neg,
    Exp,
    Sigmoid,
    /// `|x|` with subgradient `sign(0) = 0`.
    Abs,
    LeakyRelu(f64),
    ScaleByScalar(f64),
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Binary(ElementwiseOp, usize, usize),
    Unary(ElementwiseOp, usize),
    Sum(usize),
    Inner(usize, usize),
    ConvFixed { input: usize, kernel: [[f64; 3]; 3] },
    Conv { input: usize, weight: usize, bias: usize },
    StraightThrough(usize),
    MaxPool2 { input: usize, argmax: Vec<u32> },
    Upsample2(usize),
    Concat(Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    requires_grad: bool,
    op: Op,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// `dLoss/dvar` for a leaf that requires gradients; `None` for detached tensors.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        assert_eq!(var.tape, self.tape, "gradient lookup with a Var from another tape");
        self.grads.get(var.index).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<f64>> {
        assert_eq!(var.tape, self.tape, "gradient lookup with a Var from another tape");
        self.grads.get_mut(var.index).and_then(Option::take)
    }
}

/// An append-only record of primitive applications.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed), nodes: Vec::new(), consumed: false }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node and makes the tape usable again.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
        self.id = NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed);
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, requires_grad: bool, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node { shape, value, requires_grad, op });
        Var { index: self.nodes.len() - 1, tape: self.id }
    }

    #[inline]
    fn node(&self, v: Var) -> &Node {
        assert_eq!(v.tape, self.id, "Var used with a different tape");
        &self.nodes[v.index]
    }

    pub fn leaf(&mut self, shape: &[usize], values: Vec<f64>, requires_grad: bool) -> Result<Var> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::shape("tensor dimensions must be positive"));
        }
        if shape.iter().product::<usize>() != values.len() {
            return Err(Error::shape(format!("shape {shape:?} does not hold {} values", values.len())));
        }
        Ok(self.push(shape.to_vec(), values, requires_grad, Op::Leaf))
    }

    /// A trainable leaf.
    pub fn param(&mut self, shape: &[usize], values: Vec<f64>) -> Result<Var> {
        self.leaf(shape, values, true)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, shape: &[usize], values: Vec<f64>) -> Result<Var> {
        self.leaf(shape, values, false)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.push(vec![1], vec![value], false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    /// Same values, cut from the backward graph.
    pub fn detach(&mut self, a: Var) -> Var {
        let n = self.node(a);
        let (shape, value) = (n.shape.clone(), n.value.clone());
        self.push(shape, value, false, Op::Leaf)
    }

    pub fn elementwise(&mut self, op: ElementwiseOp, a: Var, b: Option<Var>) -> Result<Var> {
        use ElementwiseOp::*;
        match (op, b) {
            (Add | Sub | Mul | Div | Min2, Some(b)) => self.binary(op, a, b),
            (Neg | Exp | Sigmoid | Abs | LeakyRelu(_) | ScaleByScalar(_), None) => Ok(self.unary(op, a)),
            _ => Err(Error::invalid(format!("{op:?} called with the wrong operand count"))),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(ElementwiseOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(ElementwiseOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(ElementwiseOp::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(ElementwiseOp::Div, a, b)
    }

    pub fn min2(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(ElementwiseOp::Min2, a, b)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(ElementwiseOp::Neg, a)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(ElementwiseOp::Exp, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(ElementwiseOp::Sigmoid, a)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(ElementwiseOp::Abs, a)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(ElementwiseOp::LeakyRelu(slope), a)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.unary(ElementwiseOp::ScaleByScalar(s), a)
    }

    fn binary(&mut self, op: ElementwiseOp, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.node(a), self.node(b));
        let (la, lb) = (na.value.len(), nb.value.len());
        let shape = if na.shape == nb.shape || lb == 1 {
            na.shape.clone()
        } else if la == 1 {
            nb.shape.clone()
        } else {
            return Err(Error::shape(format!("{op:?} on shapes {:?} and {:?}", na.shape, nb.shape)));
        };
        let n = la.max(lb);
        let (va, vb) = (&na.value, &nb.value);
        let at = |i: usize| if la == 1 { va[0] } else { va[i] };
        let bt = |i: usize| if lb == 1 { vb[0] } else { vb[i] };
        let f: fn(f64, f64) -> f64 = match op {
            ElementwiseOp::Add => |x, y| x + y,
            ElementwiseOp::Sub => |x, y| x - y,
            ElementwiseOp::Mul => |x, y| x * y,
            ElementwiseOp::Div => |x, y| x / y,
            ElementwiseOp::Min2 => |x, y| if x <= y { x } else { y },
            _ => unreachable!(),
        };
        let value: Vec<f64> = if la == lb {
            va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect()
        } else {
            (0..n).map(|i| f(at(i), bt(i))).collect()
        };
        let rg = na.requires_grad || nb.requires_grad;
        Ok(self.push(shape, value, rg, Op::Binary(op, a.index, b.index)))
    }

    fn unary(&mut self, op: ElementwiseOp, a: Var) -> Var {
        let na = self.node(a);
        let value: Vec<f64> = match op {
            ElementwiseOp::Neg => na.value.iter().map(|x| -x).collect(),
            ElementwiseOp::Exp => na.value.iter().map(|&x| math::exp(x)).collect(),
            ElementwiseOp::Sigmoid => na.value.iter().map(|&x| sigmoid(x)).collect(),
            ElementwiseOp::Abs => na.value.iter().map(|x| x.abs()).collect(),
            ElementwiseOp::LeakyRelu(s) => na.value.iter().map(|&x| if x > 0.0 { x } else { s * x }).collect(),
            ElementwiseOp::ScaleByScalar(s) => na.value.iter().map(|x| s * x).collect(),
            _ => unreachable!(),
        };
        let (shape, rg) = (na.shape.clone(), na.requires_grad);
        self.push(shape, value, rg, Op::Unary(op, a.index))
    }

    /// Sum of all entries, as a one-element tensor.
    pub fn reduce_sum(&mut self, a: Var) -> Var {
        let na = self.node(a);
        let s = na.value.iter().sum();
        let rg = na.requires_grad;
        self.push(vec![1], vec![s], rg, Op::Sum(a.index))
    }

    /// `⟨a, b⟩ = Σ a ⊙ b`.
    pub fn inner(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.node(a), self.node(b));
        if na.shape != nb.shape {
            return Err(Error::shape(format!("inner on shapes {:?} and {:?}", na.shape, nb.shape)));
        }
        let s = math::dot(&na.value, &nb.value);
        let rg = na.requires_grad || nb.requires_grad;
        Ok(self.push(vec![1], vec![s], rg, Op::Inner(a.index, b.index)))
    }

    /// 3×3 cross-correlation of an `H×W` (or `1×H×W`) tensor with a constant
    /// kernel, zero padding of one.
    pub fn conv2d_fixed(&mut self, a: Var, kernel: [[f64; 3]; 3]) -> Result<Var> {
        let na = self.node(a);
        let (h, w) = plane_dims(&na.shape)?;
        let value = correlate3(&na.value, h, w, &kernel);
        let (shape, rg) = (na.shape.clone(), na.requires_grad);
        Ok(self.push(shape, value, rg, Op::ConvFixed { input: a.index, kernel }))
    }

    /// Stride-one cross-correlation with learned weights.
    ///
    /// `input` is `C_in×H×W`, `weight` is `C_out×C_in×k×k` with odd `k`, `bias`
    /// is `C_out`. Padding is `k/2` so spatial size is preserved.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (ni, nw, nb) = (self.node(input), self.node(weight), self.node(bias));
        let [cin, h, w] = dims3(&ni.shape)?;
        let [cout, wcin, k, k2] = dims4(&nw.shape)?;
        if wcin != cin || k != k2 || k % 2 == 0 || nb.value.len() != cout {
            return Err(Error::shape(format!(
                "conv2d input {:?}, weight {:?}, bias {:?}",
                ni.shape, nw.shape, nb.shape
            )));
        }
        let geo = ConvGeometry { cin, cout, h, w, k };
        let cols = im2col(&ni.value, &geo);
        let hw = h * w;
        let mut out = vec![0.0; cout * hw];
        for co in 0..cout {
            out[co * hw..(co + 1) * hw].fill(nb.value[co]);
        }
        math::gemm_acc(&nw.value, &cols, &mut out, cout, cin * k * k, hw);
        let rg = ni.requires_grad || nw.requires_grad || nb.requires_grad;
        Ok(self.push(
            vec![cout, h, w],
            out,
            rg,
            Op::Conv { input: input.index, weight: weight.index, bias: bias.index },
        ))
    }

    /// Straight-through argmax: one-hot at the largest entry going forward
    /// (ties to the smallest row-major index), identity going backward.
    pub fn st_argmax(&mut self, a: Var) -> Result<Var> {
        let na = self.node(a);
        let mut best: Option<(usize, f64)> = None;
        for (i, &x) in na.value.iter().enumerate() {
            if x > 0.0 && best.is_none_or(|(_, b)| x > b) {
                best = Some((i, x));
            }
        }
        let (index, _) = best.ok_or(Error::AllZeroInput)?;
        Ok(self.st_onehot(a, index))
    }

    /// Straight-through one-hot at a caller-chosen index.
    ///
    /// Used when the argmax is known exactly from an equivalent ordering, so
    /// rounding in the forward values cannot flip the selection.
    pub fn st_onehot(&mut self, a: Var, index: usize) -> Var {
        let na = self.node(a);
        let mut value = vec![0.0; na.value.len()];
        value[index] = 1.0;
        let (shape, rg) = (na.shape.clone(), na.requires_grad);
        self.push(shape, value, rg, Op::StraightThrough(a.index))
    }

    /// 2×2 max pooling with stride 2 over a `C×H×W` tensor.
    pub fn max_pool2(&mut self, a: Var) -> Result<Var> {
        let na = self.node(a);
        let [c, h, w] = dims3(&na.shape)?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::shape(format!("max_pool2 needs even dims, got {:?}", na.shape)));
        }
        let (oh, ow) = (h / 2, w / 2);
        let mut value = Vec::with_capacity(c * oh * ow);
        let mut argmax = Vec::with_capacity(c * oh * ow);
        for ch in 0..c {
            let base = ch * h * w;
            for y in 0..oh {
                for x in 0..ow {
                    let cands = [
                        base + 2 * y * w + 2 * x,
                        base + 2 * y * w + 2 * x + 1,
                        base + (2 * y + 1) * w + 2 * x,
                        base + (2 * y + 1) * w + 2 * x + 1,
                    ];
                    let mut bi = cands[0];
                    for &ci in &cands[1..] {
                        if na.value[ci] > na.value[bi] {
                            bi = ci;
                        }
                    }
                    value.push(na.value[bi]);
                    argmax.push(bi as u32);
                }
            }
        }
        let rg = na.requires_grad;
        Ok(self.push(vec![c, oh, ow], value, rg, Op::MaxPool2 { input: a.index, argmax }))
    }

    /// Nearest-neighbour 2× upsampling of a `C×H×W` tensor.
    pub fn upsample2(&mut self, a: Var) -> Result<Var> {
        let na = self.node(a);
        let [c, h, w] = dims3(&na.shape)?;
        let (oh, ow) = (2 * h, 2 * w);
        let mut value = vec![0.0; c * oh * ow];
        for ch in 0..c {
            for y in 0..oh {
                for x in 0..ow {
                    value[(ch * oh + y) * ow + x] = na.value[(ch * h + y / 2) * w + x / 2];
                }
            }
        }
        let rg = na.requires_grad;
        Ok(self.push(vec![c, oh, ow], value, rg, Op::Upsample2(a.index)))
    }

    /// Concatenation of `C_i×H×W` tensors along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::shape("concat of nothing"))?;
        let [_, h, w] = dims3(self.shape(*first))?;
        let mut channels = 0;
        let mut value = Vec::new();
        let mut rg = false;
        for &p in parts {
            let np = self.node(p);
            let [c, ph, pw] = dims3(&np.shape)?;
            if (ph, pw) != (h, w) {
                return Err(Error::shape(format!("concat of {:?} with {h}x{w}", np.shape)));
            }
            channels += c;
            value.extend_from_slice(&np.value);
            rg |= np.requires_grad;
        }
        let idx = parts.iter().map(|p| p.index).collect();
        Ok(self.push(vec![channels, h, w], value, rg, Op::Concat(idx)))
    }

    /// Reinterprets a tensor with a new shape of the same size. Shares the
    /// gradient path through an identity straight-through node.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let na = self.node(a);
        if shape.iter().product::<usize>() != na.value.len() {
            return Err(Error::shape(format!("cannot reshape {:?} to {shape:?}", na.shape)));
        }
        let (value, rg) = (na.value.clone(), na.requires_grad);
        Ok(self.push(shape.to_vec(), value, rg, Op::StraightThrough(a.index)))
    }

    /// Back-propagates from a one-element `loss`. Every trainable leaf gets
    /// `dLoss/dleaf`; the tape cannot be differentiated again until [`reset`](Self::reset).
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if self.node(loss).value.len() != 1 {
            return Err(Error::NotScalar);
        }
        self.consumed = true;
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        if self.nodes[loss.index].requires_grad {
            grads[loss.index] = Some(vec![1.0]);
        }
        for i in (0..=loss.index).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
        }
        // Reached leaves keep their gradient; unreached trainable leaves get zeros.
        for (i, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) {
                if grads[i].is_none() {
                    grads[i] = Some(vec![0.0; node.value.len()]);
                }
            } else {
                grads[i] = None;
            }
        }
        Ok(Gradients { tape: self.id, grads })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Binary(op, a, b) => {
                let (na, nb) = (&self.nodes[*a], &self.nodes[*b]);
                let (va, vb) = (&na.value, &nb.value);
                let (la, lb) = (va.len(), vb.len());
                let at = |k: usize| if la == 1 { va[0] } else { va[k] };
                let bt = |k: usize| if lb == 1 { vb[0] } else { vb[k] };
                let (da, db): (fn(f64, f64, f64) -> f64, fn(f64, f64, f64) -> f64) = match op {
                    ElementwiseOp::Add => (|g, _, _| g, |g, _, _| g),
                    ElementwiseOp::Sub => (|g, _, _| g, |g, _, _| -g),
                    ElementwiseOp::Mul => (|g, _, y| g * y, |g, x, _| g * x),
                    ElementwiseOp::Div => (|g, _, y| g / y, |g, x, y| -g * x / (y * y)),
                    ElementwiseOp::Min2 => {
                        (|g, x, y| if x <= y { g } else { 0.0 }, |g, x, y| if x <= y { 0.0 } else { g })
                    }
                    _ => unreachable!(),
                };
                if na.requires_grad {
                    let acc = grad_slot(grads, *a, la);
                    for (k, &gk) in g.iter().enumerate() {
                        acc[if la == 1 { 0 } else { k }] += da(gk, at(k), bt(k));
                    }
                }
                if nb.requires_grad {
                    let acc = grad_slot(grads, *b, lb);
                    for (k, &gk) in g.iter().enumerate() {
                        acc[if lb == 1 { 0 } else { k }] += db(gk, at(k), bt(k));
                    }
                }
            }
            Op::Unary(op, a) => {
                let na = &self.nodes[*a];
                let (x, y) = (&na.value, &node.value);
                let acc = grad_slot(grads, *a, x.len());
                match *op {
                    ElementwiseOp::Neg => acc.iter_mut().zip(g).for_each(|(d, &gk)| *d -= gk),
                    ElementwiseOp::Exp => {
                        for k in 0..g.len() {
                            acc[k] += g[k] * y[k];
                        }
                    }
                    ElementwiseOp::Sigmoid => {
                        for k in 0..g.len() {
                            acc[k] += g[k] * y[k] * (1.0 - y[k]);
                        }
                    }
                    ElementwiseOp::Abs => {
                        for k in 0..g.len() {
                            acc[k] += g[k] * sign(x[k]);
                        }
                    }
                    ElementwiseOp::LeakyRelu(s) => {
                        for k in 0..g.len() {
                            acc[k] += if x[k] > 0.0 { g[k] } else { s * g[k] };
                        }
                    }
                    ElementwiseOp::ScaleByScalar(s) => math::axpy(acc, s, g),
                    _ => unreachable!(),
                }
            }
            Op::Sum(a) => {
                let len = self.nodes[*a].value.len();
                grad_slot(grads, *a, len).iter_mut().for_each(|d| *d += g[0]);
            }
            Op::Inner(a, b) => {
                let (na, nb) = (&self.nodes[*a], &self.nodes[*b]);
                if na.requires_grad {
                    math::axpy(grad_slot(grads, *a, na.value.len()), g[0], &nb.value);
                }
                if nb.requires_grad {
                    math::axpy(grad_slot(grads, *b, nb.value.len()), g[0], &na.value);
                }
            }
            Op::ConvFixed { input, kernel } => {
                let (h, w) = plane_dims(&node.shape).expect("validated on record");
                let flipped = flip(kernel);
                let back = correlate3(g, h, w, &flipped);
                let acc = grad_slot(grads, *input, back.len());
                acc.iter_mut().zip(&back).for_each(|(d, b)| *d += b);
            }
            Op::Conv { input, weight, bias } => self.conv_backward(g, *input, *weight, *bias, grads),
            Op::StraightThrough(a) => {
                let acc = grad_slot(grads, *a, g.len());
                acc.iter_mut().zip(g).for_each(|(d, gk)| *d += gk);
            }
            Op::MaxPool2 { input, argmax } => {
                let len = self.nodes[*input].value.len();
                let acc = grad_slot(grads, *input, len);
                for (gk, &src) in g.iter().zip(argmax) {
                    acc[src as usize] += gk;
                }
            }
            Op::Upsample2(a) => {
                let na = &self.nodes[*a];
                let [c, h, w] = dims3(&na.shape).expect("validated on record");
                let (oh, ow) = (2 * h, 2 * w);
                let acc = grad_slot(grads, *a, na.value.len());
                for ch in 0..c {
                    for y in 0..oh {
                        for x in 0..ow {
                            acc[(ch * h + y / 2) * w + x / 2] += g[(ch * oh + y) * ow + x];
                        }
                    }
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let np = &self.nodes[p];
                    let len = np.value.len();
                    if np.requires_grad {
                        let acc = grad_slot(grads, p, len);
                        acc.iter_mut().zip(&g[offset..offset + len]).for_each(|(d, gk)| *d += gk);
                    }
                    offset += len;
                }
            }
        }
    }

    fn conv_backward(&self, g: &[f64], input: usize, weight: usize, bias: usize, grads: &mut [Option<Vec<f64>>]) {
        let (ni, nw, nb) = (&self.nodes[input], &self.nodes[weight], &self.nodes[bias]);
        let [cin, h, w] = dims3(&ni.shape).expect("validated on record");
        let [cout, _, k, _] = dims4(&nw.shape).expect("validated on record");
        let geo = ConvGeometry { cin, cout, h, w, k };
        let hw = h * w;
        let kk = cin * k * k;
        if nb.requires_grad {
            let acc = grad_slot(grads, bias, cout);
            for co in 0..cout {
                acc[co] += g[co * hw..(co + 1) * hw].iter().sum::<f64>();
            }
        }
        if nw.requires_grad {
            let cols_t = math::transpose(&im2col(&ni.value, &geo), kk, hw);
            let acc = grad_slot(grads, weight, cout * kk);
            math::gemm_acc(g, &cols_t, acc, cout, hw, kk);
        }
        if ni.requires_grad {
            let w_t = math::transpose(&nw.value, cout, kk);
            let mut gcols = vec![0.0; kk * hw];
            math::gemm_acc(&w_t, g, &mut gcols, kk, cout, hw);
            let acc = grad_slot(grads, input, cin * hw);
            col2im_add(&gcols, &geo, acc);
        }
    }
}

#[inline]
fn grad_slot(grads: &mut [Option<Vec<f64>>], i: usize, len: usize) -> &mut Vec<f64> {
    grads[i].get_or_insert_with(|| vec![0.0; len])
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + math::exp(-x))
    } else {
        let e = math::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn plane_dims(shape: &[usize]) -> Result<(usize, usize)> {
    match *shape {
        [h, w] => Ok((h, w)),
        [1, h, w] => Ok((h, w)),
        _ => Err(Error::shape(format!("expected an H×W plane, got {shape:?}"))),
    }
}

fn dims3(shape: &[usize]) -> Result<[usize; 3]> {
    match *shape {
        [c, h, w] => Ok([c, h, w]),
        _ => Err(Error::shape(format!("expected C×H×W, got {shape:?}"))),
    }
}

fn dims4(shape: &[usize]) -> Result<[usize; 4]> {
    match *shape {
        [a, b, c, d] => Ok([a, b, c, d]),
        _ => Err(Error::shape(format!("expected a rank-4 weight, got {shape:?}"))),
    }
}

fn flip(k: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (y, row) in k.iter().enumerate() {
        for (x, &v) in row.iter().enumerate() {
            out[2 - y][2 - x] = v;
        }
    }
    out
}

/// Zero-padded 3×3 cross-correlation of one plane.
pub(crate) fn correlate3(a: &[f64], h: usize, w: usize, k: &[[f64; 3]; 3]) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for (ky, row) in k.iter().enumerate() {
        for (kx, &kv) in row.iter().enumerate() {
            if kv == 0.0 {
                continue;
            }
            let (dy, dx) = (ky as isize - 1, kx as isize - 1);
            for y in 0..h {
                let sy = y as isize + dy;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for x in 0..w {
                    let sx = x as isize + dx;
                    if sx >= 0 && sx < w as isize {
                        out[y * w + x] += kv * a[sy as usize * w + sx as usize];
                    }
                }
            }
        }
    }
    out
}

struct ConvGeometry {
    cin: usize,
    #[allow(dead_code)]
    cout: usize,
    h: usize,
    w: usize,
    k: usize,
}

/// Rows are `(ci, ky, kx)` taps, columns output pixels.
fn im2col(input: &[f64], geo: &ConvGeometry) -> Vec<f64> {
    let ConvGeometry { cin, h, w, k, .. } = *geo;
    if k == 1 {
        return input.to_vec();
    }
    let hw = h * w;
    let p = (k / 2) as isize;
    let mut cols = vec![0.0; cin * k * k * hw];
    for ci in 0..cin {
        let plane = &input[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            let dy = ky as isize - p;
            for kx in 0..k {
                let dx = kx as isize - p;
                let row = ((ci * k + ky) * k + kx) * hw;
                let dst = &mut cols[row..row + hw];
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx.max(0)) as usize;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = sy as usize * w;
                    let sx0 = (x0 as isize + dx) as usize;
                    dst[y * w + x0..y * w + x1].copy_from_slice(&plane[src + sx0..src + sx0 + (x1 - x0)]);
                }
            }
        }
    }
    cols
}

fn col2im_add(cols: &[f64], geo: &ConvGeometry, out: &mut [f64]) {
    let ConvGeometry { cin, h, w, k, .. } = *geo;
    let hw = h * w;
    if k == 1 {
        out.iter_mut().zip(cols).for_each(|(o, c)| *o += c);
        return;
    }
    let p = (k / 2) as isize;
    for ci in 0..cin {
        let plane = &mut out[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            let dy = ky as isize - p;
            for kx in 0..k {
                let dx = kx as isize - p;
                let row = ((ci * k + ky) * k + kx) * hw;
                let src = &cols[row..row + hw];
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx.max(0)) as usize;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let base = sy as usize * w;
                    let sx0 = (x0 as isize + dx) as usize;
                    let dst = &mut plane[base + sx0..base + sx0 + (x1 - x0)];
                    dst.iter_mut().zip(&src[y * w + x0..y * w + x1]).for_each(|(d, s)| *d += s);
                }
            }
        }
    }
}

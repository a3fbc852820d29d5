//! Tape-based reverse-mode differentiation over dense tensors.
//!
//! A [`Graph`] records every operation in creation order, which is already a
//! topological order: inputs always precede the nodes that consume them. A
//! backward pass walks the tape once in reverse.
//!
//! Broadcasting is limited to [`Graph::add_row`], which adds a bias vector to
//! every row of a matrix. `relu` uses derivative 0 at exactly 0; `sqrt` and
//! `l2_norm` use derivative 0 where their output is exactly 0.

use super::kernels::{matmul_acc, matmul_nt_acc, matmul_tn_acc, sigmoid, softplus};
use super::tensor::{split_axis, Result, Tensor, TensorError};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Concat(Vec<Var>, usize),
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Sum(Var, Option<usize>),
    Mean(Var, Option<usize>),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Sqrt(Var),
    L2Norm(Var, usize),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    trainable: bool,
}

/// Records operations for one forward pass.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `v`, or `None` when `v` does not influence the output
    /// (or is not a leaf).
    pub fn get(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::from_parts(self.shapes[v.0].clone(), g.clone()))
    }

    /// Gradient of a leaf with zeros filled in when it did not reach the output.
    pub fn wrt(&self, v: Var) -> Tensor {
        self.get(v)
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }

    pub fn raw(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn check_axis(op: &'static str, t: &Tensor, axis: usize) -> Result<()> {
    if axis >= t.shape().len() {
        return Err(TensorError::InvalidShape {
            op,
            shape: t.shape().to_vec(),
            reason: format!("axis {axis} out of range"),
        });
    }
    Ok(())
}

fn add_into(dst: &mut Option<Vec<f64>>, src: impl Iterator<Item = f64>, len: usize) {
    let buf = dst.get_or_insert_with(|| vec![0.0; len]);
    for (d, s) in buf.iter_mut().zip(src) {
        *d += s;
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
            trainable: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
            trainable: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn is_trainable(&self, v: Var) -> bool {
        self.nodes[v.0].trainable
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, needs_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            trainable: false,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn unary(&mut self, name: &'static str, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let value = self.value(x).map(f);
        let ng = self.needs(x);
        self.push(name, value, op, ng)
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape(name, ta, tb)?;
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::from_parts(ta.shape().to_vec(), data);
        let ng = self.needs(a) || self.needs(b);
        self.push(name, value, op, ng)
    }

    /// Matrix product of a `[m, k]` and a `[k, n]` tensor.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * n];
        matmul_acc(&mut out, ta.data(), tb.data(), m, k, n);
        let ng = self.needs(a) || self.needs(b);
        self.push("matmul", Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// Adds the vector `bias` (`[n]`) to every row of `m` (`[rows, n]`).
    pub fn add_row(&mut self, m: Var, bias: Var) -> Result<Var> {
        let (tm, tb) = (self.value(m), self.value(bias));
        if tm.shape().len() != 2 || tb.shape() != [tm.shape()[1]] {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                left: tm.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let n = tm.shape()[1];
        let mut data = tm.data().to_vec();
        for row in data.chunks_mut(n) {
            for (x, &b) in row.iter_mut().zip(tb.data()) {
                *x += b;
            }
        }
        let value = Tensor::from_parts(tm.shape().to_vec(), data);
        let ng = self.needs(m) || self.needs(bias);
        self.push("add_row", value, Op::AddRow(m, bias), ng)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary("scale", x, |v| c * v, Op::Scale(x, c))
    }

    pub fn offset(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary("offset", x, |v| v + c, Op::Offset(x))
    }

    pub fn neg(&mut self, x: Var) -> Result<Var> {
        self.scale(x, -1.0)
    }

    /// Concatenates tensors along `axis`; all other extents must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = self.value(*inputs.first().ok_or_else(|| TensorError::InvalidShape {
            op: "concat",
            shape: vec![],
            reason: "no inputs".into(),
        })?);
        check_axis("concat", first, axis)?;
        let base = first.shape().to_vec();
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: base,
                    right: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = split_axis(&shape, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let ng = inputs.iter().any(|&v| self.needs(v));
        self.push(
            "concat",
            Tensor::from_parts(shape, data),
            Op::Concat(inputs.to_vec(), axis),
            ng,
        )
    }

    /// Takes `len` entries starting at `start` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        check_axis("slice", t, axis)?;
        if len == 0 || start + len > t.shape()[axis] {
            return Err(TensorError::InvalidShape {
                op: "slice",
                shape: t.shape().to_vec(),
                reason: format!("range {start}..{} out of bounds on axis {axis}", start + len),
            });
        }
        let (outer, extent, inner) = split_axis(t.shape(), axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * extent + start) * inner;
            data.extend_from_slice(&t.data()[base..base + len * inner]);
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = len;
        let ng = self.needs(x);
        self.push(
            "slice",
            Tensor::from_parts(shape, data),
            Op::Slice {
                input: x,
                axis,
                start,
            },
            ng,
        )
    }

    fn reduce(&self, name: &'static str, x: Var, axis: Option<usize>) -> Result<(Vec<usize>, Vec<f64>)> {
        let t = self.value(x);
        match axis {
            None => Ok((vec![], vec![t.data().iter().sum()])),
            Some(axis) => {
                check_axis(name, t, axis)?;
                let (outer, extent, inner) = split_axis(t.shape(), axis);
                let mut out = vec![0.0; outer * inner];
                for o in 0..outer {
                    for a in 0..extent {
                        let src = &t.data()[(o * extent + a) * inner..(o * extent + a + 1) * inner];
                        for (d, &s) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
                let mut shape = t.shape().to_vec();
                shape.remove(axis);
                Ok((shape, out))
            }
        }
    }

    /// Sum over one axis, or over everything when `axis` is `None`.
    pub fn sum(&mut self, x: Var, axis: Option<usize>) -> Result<Var> {
        let (shape, data) = self.reduce("sum", x, axis)?;
        let ng = self.needs(x);
        self.push("sum", Tensor::from_parts(shape, data), Op::Sum(x, axis), ng)
    }

    pub fn mean(&mut self, x: Var, axis: Option<usize>) -> Result<Var> {
        let count = match axis {
            None => self.value(x).len(),
            Some(a) => {
                check_axis("mean", self.value(x), a)?;
                self.shape(x)[a]
            }
        } as f64;
        let (shape, mut data) = self.reduce("mean", x, axis)?;
        data.iter_mut().for_each(|v| *v /= count);
        let ng = self.needs(x);
        self.push("mean", Tensor::from_parts(shape, data), Op::Mean(x, axis), ng)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary("relu", x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary("tanh", x, f64::tanh, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary("sigmoid", x, sigmoid, Op::Sigmoid(x))
    }

    pub fn softplus(&mut self, x: Var) -> Result<Var> {
        self.unary("softplus", x, softplus, Op::Softplus(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary("exp", x, f64::exp, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary("log", x, f64::ln, Op::Log(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.unary("square", x, |v| v * v, Op::Square(x))
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        self.unary("sqrt", x, f64::sqrt, Op::Sqrt(x))
    }

    /// Euclidean norm along `axis`.
    pub fn l2_norm(&mut self, x: Var, axis: usize) -> Result<Var> {
        let sq = self.value(x).map(|v| v * v);
        let t = self.value(x);
        check_axis("l2_norm", t, axis)?;
        let (outer, extent, inner) = split_axis(t.shape(), axis);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..extent {
                for i in 0..inner {
                    out[o * inner + i] += sq.data()[(o * extent + a) * inner + i];
                }
            }
        }
        out.iter_mut().for_each(|v| *v = v.sqrt());
        let mut shape = t.shape().to_vec();
        shape.remove(axis);
        let ng = self.needs(x);
        self.push("l2_norm", Tensor::from_parts(shape, out), Op::L2Norm(x, axis), ng)
    }

    /// Reverse pass from a scalar output. Returns gradients for every leaf
    /// that needs one.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if !out.is_scalar() {
            return Err(TensorError::NonScalarOutput(out.shape().to_vec()));
        }
        let n = output.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(vec![1.0]);

        for idx in (0..n).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
        }

        for (idx, node) in self.nodes.iter().enumerate() {
            if !node.trainable {
                grads[idx] = None;
            } else if grads[idx].is_none() {
                grads[idx] = Some(vec![0.0; node.value.len()]);
            }
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.needs(*a) {
                    let buf = grads[a.0].get_or_insert_with(|| vec![0.0; m * k]);
                    matmul_nt_acc(buf, g, tb.data(), m, k, n);
                }
                if self.needs(*b) {
                    let buf = grads[b.0].get_or_insert_with(|| vec![0.0; k * n]);
                    matmul_tn_acc(buf, ta.data(), g, m, k, n);
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.needs(*v) {
                        add_into(&mut grads[v.0], g.iter().copied(), g.len());
                    }
                }
            }
            Op::Sub(a, b) => {
                if self.needs(*a) {
                    add_into(&mut grads[a.0], g.iter().copied(), g.len());
                }
                if self.needs(*b) {
                    add_into(&mut grads[b.0], g.iter().map(|v| -v), g.len());
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                if self.needs(*a) {
                    add_into(&mut grads[a.0], g.iter().zip(tb).map(|(g, b)| g * b), g.len());
                }
                if self.needs(*b) {
                    add_into(&mut grads[b.0], g.iter().zip(ta).map(|(g, a)| g * a), g.len());
                }
            }
            Op::Div(a, b) => {
                let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                if self.needs(*a) {
                    add_into(&mut grads[a.0], g.iter().zip(tb).map(|(g, b)| g / b), g.len());
                }
                if self.needs(*b) {
                    let it = g.iter().zip(ta).zip(tb).map(|((g, a), b)| -g * a / (b * b));
                    add_into(&mut grads[b.0], it, g.len());
                }
            }
            Op::AddRow(m, bias) => {
                if self.needs(*m) {
                    add_into(&mut grads[m.0], g.iter().copied(), g.len());
                }
                if self.needs(*bias) {
                    let n = self.value(*bias).len();
                    let buf = grads[bias.0].get_or_insert_with(|| vec![0.0; n]);
                    for row in g.chunks(n) {
                        for (d, &s) in buf.iter_mut().zip(row) {
                            *d += s;
                        }
                    }
                }
            }
            Op::Scale(x, c) => add_into(&mut grads[x.0], g.iter().map(|v| c * v), g.len()),
            Op::Offset(x) => add_into(&mut grads[x.0], g.iter().copied(), g.len()),
            Op::Concat(inputs, axis) => {
                let (outer, total, inner) = split_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for v in inputs {
                    let t = self.value(*v);
                    let extent = t.shape()[*axis];
                    if self.needs(*v) {
                        let buf = grads[v.0].get_or_insert_with(|| vec![0.0; t.len()]);
                        for o in 0..outer {
                            let src = &g[(o * total + offset) * inner..(o * total + offset + extent) * inner];
                            let dst = &mut buf[o * extent * inner..(o + 1) * extent * inner];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                    offset += extent;
                }
            }
            Op::Slice { input, axis, start } => {
                let t = self.value(*input);
                let (outer, extent, inner) = split_axis(t.shape(), *axis);
                let len = node.value.shape()[*axis];
                let buf = grads[input.0].get_or_insert_with(|| vec![0.0; t.len()]);
                for o in 0..outer {
                    let base = (o * extent + start) * inner;
                    let src = &g[o * len * inner..(o + 1) * len * inner];
                    for (d, &s) in buf[base..base + len * inner].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
            Op::Sum(x, axis) | Op::Mean(x, axis) => {
                let t = self.value(*x);
                let scale = match (&node.op, axis) {
                    (Op::Mean(..), None) => 1.0 / t.len() as f64,
                    (Op::Mean(..), Some(a)) => 1.0 / t.shape()[*a] as f64,
                    _ => 1.0,
                };
                let buf = grads[x.0].get_or_insert_with(|| vec![0.0; t.len()]);
                match axis {
                    None => buf.iter_mut().for_each(|d| *d += scale * g[0]),
                    Some(a) => {
                        let (outer, extent, inner) = split_axis(t.shape(), *a);
                        for o in 0..outer {
                            for e in 0..extent {
                                for i in 0..inner {
                                    buf[(o * extent + e) * inner + i] += scale * g[o * inner + i];
                                }
                            }
                        }
                    }
                }
            }
            Op::Relu(x) => {
                let xs = self.value(*x).data();
                let it = g.iter().zip(xs).map(|(g, &x)| if x > 0.0 { *g } else { 0.0 });
                add_into(&mut grads[x.0], it, g.len());
            }
            Op::Tanh(x) => {
                add_into(&mut grads[x.0], g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)), g.len())
            }
            Op::Sigmoid(x) => {
                add_into(&mut grads[x.0], g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)), g.len())
            }
            Op::Softplus(x) => {
                let xs = self.value(*x).data();
                add_into(&mut grads[x.0], g.iter().zip(xs).map(|(g, &x)| g * sigmoid(x)), g.len());
            }
            Op::Exp(x) => add_into(&mut grads[x.0], g.iter().zip(y).map(|(g, y)| g * y), g.len()),
            Op::Log(x) => {
                let xs = self.value(*x).data();
                add_into(&mut grads[x.0], g.iter().zip(xs).map(|(g, x)| g / x), g.len());
            }
            Op::Square(x) => {
                let xs = self.value(*x).data();
                add_into(&mut grads[x.0], g.iter().zip(xs).map(|(g, x)| 2.0 * g * x), g.len());
            }
            Op::Sqrt(x) => {
                let it = g.iter().zip(y).map(|(g, &y)| if y > 0.0 { g / (2.0 * y) } else { 0.0 });
                add_into(&mut grads[x.0], it, g.len());
            }
            Op::L2Norm(x, axis) => {
                let t = self.value(*x);
                let (outer, extent, inner) = split_axis(t.shape(), *axis);
                let buf = grads[x.0].get_or_insert_with(|| vec![0.0; t.len()]);
                for o in 0..outer {
                    for e in 0..extent {
                        for i in 0..inner {
                            let norm = y[o * inner + i];
                            if norm > 0.0 {
                                let at = (o * extent + e) * inner + i;
                                buf[at] += g[o * inner + i] * t.data()[at] / norm;
                            }
                        }
                    }
                }
            }
        }
    }
}

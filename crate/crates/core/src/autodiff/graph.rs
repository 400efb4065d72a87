//! Define-by-run computation graph.
//!
//! Nodes are appended in evaluation order, so the node vector is already a
//! topological order and `backward` is a single reverse sweep.

use super::tensor::{gemm, Tensor};
use super::AutodiffError;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Linear { input: Var, weight: Var, bias: Var },
    Relu(Var),
    Sigmoid(Var),
    /// `argmax[g * channels + c]` is the winning input row.
    MaxPool { input: Var, argmax: Vec<usize> },
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f32),
    RowNorm(Var),
    Mean(Var),
    SquaredDistance(Var, Var),
    /// Scalar whose derivative with respect to `input` was computed outside the graph.
    External { input: Var, local_grad: Tensor },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A computation graph over [`Tensor`] values with reverse-mode gradients.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf whose gradient is tracked.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf treated as a constant; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Accumulated gradient of the last `backward` roots with respect to `var`.
    pub fn grad(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.nodes[var.0].value.shape()),
        }
    }

    /// Clears every accumulated gradient.
    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// `input[B×I] · weight[I×O] + bias[O]`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var, AutodiffError> {
        let (rows, inner) = self.value(input).dims2()?;
        let w = self.value(weight);
        let (w_in, out) = match w.shape() {
            [i, o] => (*i, *o),
            s => return Err(AutodiffError::Shape(format!("linear weight must be 2-D, got {s:?}"))),
        };
        if w_in != inner {
            return Err(AutodiffError::Shape(format!(
                "linear: input has {inner} columns but weight has {w_in} rows"
            )));
        }
        if self.value(bias).len() != out || self.value(bias).shape().len() != 1 {
            return Err(AutodiffError::Shape(format!(
                "linear: bias shape {:?} does not match {out} outputs",
                self.value(bias).shape()
            )));
        }
        let mut data = Vec::with_capacity(rows * out);
        let b = self.value(bias).data();
        for _ in 0..rows {
            data.extend_from_slice(b);
        }
        gemm(rows, inner, out, self.value(input).data(), false, w.data(), false, &mut data, true);
        let value = Tensor::new(vec![rows, out], data)?;
        let rg = self.any_grad(&[input, weight, bias]);
        Ok(self.push(value, Op::Linear { input, weight, bias }, rg))
    }

    /// The same linear map applied to each of the `N` rows (a 1×1 convolution).
    pub fn pointwise_linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var, AutodiffError> {
        self.linear(input, weight, bias)
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let value = self.value(input).map(|v| if v > 0.0 { v } else { 0.0 });
        let rg = self.any_grad(&[input]);
        self.push(value, Op::Relu(input), rg)
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        let value = self.value(input).map(sigmoid);
        let rg = self.any_grad(&[input]);
        self.push(value, Op::Sigmoid(input), rg)
    }

    /// Channel-wise max over the point axis of an `N×C` input, giving `[C]`.
    pub fn max_pool_points(&mut self, input: Var) -> Result<Var, AutodiffError> {
        let pooled = self.max_pool_groups(input, 1)?;
        let channels = self.value(pooled).len();
        let node = &mut self.nodes[pooled.0];
        node.value = node.value.clone().reshape(vec![channels])?;
        Ok(pooled)
    }

    /// Splits the rows of a `(G·N)×C` input into `groups` consecutive blocks and
    /// max-pools each, giving `G×C`. Ties go to the lowest row.
    pub fn max_pool_groups(&mut self, input: Var, groups: usize) -> Result<Var, AutodiffError> {
        let x = self.value(input);
        let (rows, channels) = match x.shape() {
            [r, c] => (*r, *c),
            s => return Err(AutodiffError::Shape(format!("max pool expects N×C, got {s:?}"))),
        };
        if groups == 0 || rows == 0 {
            return Err(AutodiffError::EmptyPool);
        }
        if rows % groups != 0 {
            return Err(AutodiffError::Shape(format!("{rows} rows do not split into {groups} groups")));
        }
        let per_group = rows / groups;
        let data = x.data();
        let mut out = vec![0.0f32; groups * channels];
        let mut argmax = vec![0usize; groups * channels];
        for g in 0..groups {
            let first = g * per_group;
            let dst = &mut out[g * channels..(g + 1) * channels];
            let idx = &mut argmax[g * channels..(g + 1) * channels];
            dst.copy_from_slice(&data[first * channels..(first + 1) * channels]);
            idx.fill(first);
            for r in first + 1..first + per_group {
                let row = &data[r * channels..(r + 1) * channels];
                for c in 0..channels {
                    if row[c] > dst[c] {
                        dst[c] = row[c];
                        idx[c] = r;
                    }
                }
            }
        }
        let value = Tensor::new(vec![groups, channels], out)?;
        let rg = self.any_grad(&[input]);
        Ok(self.push(value, Op::MaxPool { input, argmax }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.check_same("add", a, b)?;
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.check_same("sub", a, b)?;
        let mut value = self.value(a).clone();
        for (x, y) in value.data_mut().iter_mut().zip(self.value(b).data()) {
            *x -= *y;
        }
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, factor: f32) -> Var {
        let value = self.value(a).map(|v| v * factor);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Scale(a, factor), rg)
    }

    /// Euclidean norm of each row of a `B×D` input, giving `[B]`.
    pub fn row_norm(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let (rows, cols) = self.value(a).dims2()?;
        let data = self.value(a).data();
        let norms = (0..rows)
            .map(|r| {
                let s: f32 = data[r * cols..(r + 1) * cols].iter().map(|v| v * v).sum();
                s.sqrt()
            })
            .collect();
        let value = Tensor::new(vec![rows], norms)?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(value, Op::RowNorm(a), rg))
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let m = x.data().iter().sum::<f32>() / x.len() as f32;
        let rg = self.any_grad(&[a]);
        self.push(Tensor::scalar(m), Op::Mean(a), rg)
    }

    /// `Σ (a − b)²` over all elements.
    pub fn l2_distance_sq(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.check_same("l2_distance_sq", a, b)?;
        let s: f32 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::scalar(s), Op::SquaredDistance(a, b), rg))
    }

    /// A scalar computed outside the graph from `input`, with its derivative
    /// `local_grad` (same shape as `input`) supplied by the caller.
    pub fn external_scalar(&mut self, input: Var, value: f32, local_grad: Tensor) -> Result<Var, AutodiffError> {
        if local_grad.shape() != self.value(input).shape() {
            return Err(AutodiffError::Shape(format!(
                "external gradient shape {:?} does not match input {:?}",
                local_grad.shape(),
                self.value(input).shape()
            )));
        }
        let rg = self.any_grad(&[input]);
        Ok(self.push(Tensor::scalar(value), Op::External { input, local_grad }, rg))
    }

    fn check_same(&self, op: &str, a: Var, b: Var) -> Result<(), AutodiffError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(AutodiffError::Shape(format!("{op}: operand shapes {sa:?} and {sb:?} differ")));
        }
        Ok(())
    }

    /// Accumulates `∂root/∂node` into every node reachable from the scalar `root`.
    ///
    /// Gradients add up across calls until [`Graph::zero_grad`].
    pub fn backward(&mut self, root: Var) -> Result<(), AutodiffError> {
        if !self.value(root).is_scalar() {
            return Err(AutodiffError::NonScalarRoot(self.value(root).shape().to_vec()));
        }
        let mut pending: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        pending[root.0] = Some(Tensor::filled(self.value(root).shape(), 1.0));

        for i in (0..=root.0).rev() {
            let Some(upstream) = pending[i].take() else { continue };
            if self.nodes[i].requires_grad {
                self.propagate(i, &upstream, &mut pending);
            }
            match &mut self.grads[i] {
                Some(acc) => acc.add_assign(&upstream),
                slot @ None => *slot = Some(upstream),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, up: &Tensor, pending: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let wants = |v: Var| nodes[v.0].requires_grad;
        match &nodes[i].op {
            Op::Leaf => {}
            Op::Linear { input, weight, bias } => {
                let x = &nodes[input.0].value;
                let w = &nodes[weight.0].value;
                let (rows, inner) = x.dims2().expect("checked in forward");
                let out = w.shape()[1];
                if wants(*input) {
                    let g = slot(pending, *input, x.shape());
                    gemm(rows, out, inner, up.data(), false, w.data(), true, g.data_mut(), true);
                }
                if wants(*weight) {
                    let g = slot(pending, *weight, w.shape());
                    gemm(inner, rows, out, x.data(), true, up.data(), false, g.data_mut(), true);
                }
                if wants(*bias) {
                    let g = slot(pending, *bias, &[out]);
                    let gd = g.data_mut();
                    for r in 0..rows {
                        for (acc, v) in gd.iter_mut().zip(&up.data()[r * out..(r + 1) * out]) {
                            *acc += *v;
                        }
                    }
                }
            }
            Op::Relu(a) => {
                if wants(*a) {
                    let x = &nodes[a.0].value;
                    let g = slot(pending, *a, x.shape());
                    for ((acc, &u), &xv) in g.data_mut().iter_mut().zip(up.data()).zip(x.data()) {
                        if xv > 0.0 {
                            *acc += u;
                        }
                    }
                }
            }
            Op::Sigmoid(a) => {
                if wants(*a) {
                    let y = &nodes[i].value;
                    let g = slot(pending, *a, y.shape());
                    for ((acc, &u), &yv) in g.data_mut().iter_mut().zip(up.data()).zip(y.data()) {
                        *acc += u * yv * (1.0 - yv);
                    }
                }
            }
            Op::MaxPool { input, argmax } => {
                if wants(*input) {
                    let shape = nodes[input.0].value.shape().to_vec();
                    let channels = shape[1];
                    let g = slot(pending, *input, &shape);
                    let gd = g.data_mut();
                    for (k, (&row, &u)) in argmax.iter().zip(up.data()).enumerate() {
                        gd[row * channels + k % channels] += u;
                    }
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(nodes[i].op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if wants(*a) {
                    slot(pending, *a, up.shape()).add_assign(up);
                }
                if wants(*b) {
                    let g = slot(pending, *b, up.shape());
                    for (acc, &u) in g.data_mut().iter_mut().zip(up.data()) {
                        *acc += sign * u;
                    }
                }
            }
            Op::Scale(a, factor) => {
                if wants(*a) {
                    let g = slot(pending, *a, up.shape());
                    for (acc, &u) in g.data_mut().iter_mut().zip(up.data()) {
                        *acc += factor * u;
                    }
                }
            }
            Op::RowNorm(a) => {
                if wants(*a) {
                    let x = &nodes[a.0].value;
                    let norms = nodes[i].value.data();
                    let cols = x.len() / norms.len();
                    let g = slot(pending, *a, x.shape());
                    let gd = g.data_mut();
                    for (r, (&n, &u)) in norms.iter().zip(up.data()).enumerate() {
                        if n > 0.0 {
                            for c in r * cols..(r + 1) * cols {
                                gd[c] += u * x.data()[c] / n;
                            }
                        }
                    }
                }
            }
            Op::Mean(a) => {
                if wants(*a) {
                    let x = &nodes[a.0].value;
                    let share = up.item() / x.len() as f32;
                    let g = slot(pending, *a, x.shape());
                    g.data_mut().iter_mut().for_each(|acc| *acc += share);
                }
            }
            Op::SquaredDistance(a, b) => {
                let (xa, xb) = (&nodes[a.0].value, &nodes[b.0].value);
                let u = up.item();
                for (var, sign) in [(*a, 2.0f32), (*b, -2.0)] {
                    if wants(var) {
                        let g = slot(pending, var, xa.shape());
                        for ((acc, &p), &q) in g.data_mut().iter_mut().zip(xa.data()).zip(xb.data()) {
                            *acc += sign * u * (p - q);
                        }
                    }
                }
            }
            Op::External { input, local_grad } => {
                if wants(*input) {
                    let u = up.item();
                    let g = slot(pending, *input, local_grad.shape());
                    for (acc, &d) in g.data_mut().iter_mut().zip(local_grad.data()) {
                        *acc += u * d;
                    }
                }
            }
        }
    }
}

fn slot<'a>(pending: &'a mut [Option<Tensor>], var: Var, shape: &[usize]) -> &'a mut Tensor {
    pending[var.0].get_or_insert_with(|| Tensor::zeros(shape))
}

pub(crate) fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

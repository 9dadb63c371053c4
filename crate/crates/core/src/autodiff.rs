//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every operation as a node whose inputs are strictly
//! earlier nodes, so node order is already a topological order. The tape is
//! rebuilt for every batch. [`Tape::backward`] walks the nodes in reverse and
//! accumulates vector-Jacobian products.
//!
//! ```
//! use steinmetz::autodiff::Tape;
//! use steinmetz::tensor::Tensor;
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::from_rows(&[vec![-1.0, 2.0]]).unwrap());
//! let y = tape.relu(x);
//! let loss = tape.sum(y);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[0.0, 1.0]);
//! ```

use crate::error::{Error, Result};
use crate::signal;
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
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
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// Adds a `[1, n]` row vector to every row of a `[m, n]` matrix.
    AddRow(Var, Var),
    Relu(Var),
    Concat(Var, Var),
    SliceCols {
        input: Var,
        start: usize,
    },
    MeanCenterRows(Var),
    Sum(Var),
    Mean(Var),
    /// `√(re² + im² + ε)` elementwise.
    Magnitude {
        re: Var,
        im: Var,
    },
    HilbertRows(Var),
    /// Mean cross-entropy; saves the softmax probabilities.
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every node that feeds it.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the node does not influence the loss.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros shaped like `like` when `var` is disconnected.
    pub fn get_or_zeros(&self, var: Var, like: &Tensor) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::from_parts(like.shape().to_vec(), vec![0.0; like.len()]))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Registers an input or parameter tensor.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    /// `a · bᵀ`, used by dense layers that store weights as `[out, in]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_nt(self.value(b))?;
        Ok(self.push(Op::MatMulNt(a, b), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(Op::Sub(a, b), value))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(Op::Scale(a, factor), value)
    }

    /// Broadcasts a `[1, n]` bias over the rows of a `[m, n]` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (m, n) = self.value(a).expect_matrix("add_row")?;
        let bias = self.value(row);
        if bias.len() != n {
            return Err(Error::shape(format!(
                "add_row: bias of length {} for {n} columns",
                bias.len()
            )));
        }
        let mut data = self.value(a).data().to_vec();
        for chunk in data.chunks_mut(n.max(1)) {
            for (v, b) in chunk.iter_mut().zip(bias.data()) {
                *v += b;
            }
        }
        Ok(self.push(Op::AddRow(a, row), Tensor::from_parts(vec![m, n], data)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(Op::Relu(a), value)
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).concat_cols(self.value(b))?;
        Ok(self.push(Op::Concat(a, b), value))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let value = self.value(a).slice_cols(start, width)?;
        Ok(self.push(Op::SliceCols { input: a, start }, value))
    }

    /// Splits the columns of `a` at `at`.
    pub fn split(&mut self, a: Var, at: usize) -> Result<(Var, Var)> {
        let cols = self.value(a).cols();
        if at > cols {
            return Err(Error::shape(format!("split at {at} of {cols} columns")));
        }
        let left = self.slice_cols(a, 0, at)?;
        let right = self.slice_cols(a, at, cols - at)?;
        Ok((left, right))
    }

    /// Subtracts each row's mean from that row.
    pub fn mean_center_rows(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).mean_center_rows()?;
        Ok(self.push(Op::MeanCenterRows(a), value))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), value)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let value = Tensor::scalar(t.sum() / t.len().max(1) as f64);
        self.push(Op::Mean(a), value)
    }

    pub fn magnitude(&mut self, re: Var, im: Var) -> Result<Var> {
        let value = self.value(re).zip_map(self.value(im), |r, i| {
            (r * r + i * i + MAGNITUDE_EPS).sqrt()
        })?;
        Ok(self.push(Op::Magnitude { re, im }, value))
    }

    /// Applies [`signal::hilbert_freq`] to every row.
    pub fn hilbert_rows(&mut self, a: Var) -> Result<Var> {
        let value = map_rows(self.value(a), signal::hilbert_freq)?;
        Ok(self.push(Op::HilbertRows(a), value))
    }

    /// Mean over rows of `−log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        let (m, k) = t.expect_matrix("cross_entropy")?;
        if labels.len() != m {
            return Err(Error::shape(format!(
                "cross_entropy: {m} logit rows but {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::data(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        let mut probs = Vec::with_capacity(m * k);
        let mut loss = 0.0;
        for (row, &label) in t.row_iter().zip(labels) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_denom = denom.ln();
            loss -= row[label] - max - log_denom;
            probs.extend(row.iter().map(|v| (v - max).exp() / denom));
        }
        let value = Tensor::scalar(loss / m.max(1) as f64);
        Ok(self.push(
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs: Tensor::from_parts(vec![m, k], probs),
            },
            value,
        ))
    }

    /// Reverse-mode sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0].value;
        if !root.is_scalar() {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            for (input, contribution) in self.vjp(node, &upstream)? {
                debug_assert!(input.0 < idx, "tape inputs must precede their node");
                match &mut grads[input.0] {
                    Some(existing) => existing.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
            grads[idx] = Some(upstream);
        }
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads })
    }

    /// Vector-Jacobian products of one node with respect to each of its inputs.
    fn vjp(&self, node: &Node, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let v = |var: Var| self.value(var);
        Ok(match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => vec![(*a, g.matmul_nt(v(*b))?), (*b, v(*a).matmul_tn(g)?)],
            // C = A·Bᵀ: dA = dC·B, dB = dCᵀ·A
            Op::MatMulNt(a, b) => vec![(*a, g.matmul(v(*b))?), (*b, g.matmul_tn(v(*a))?)],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.map(|x| -x))],
            Op::Mul(a, b) => vec![
                (*a, g.zip_map(v(*b), |gi, bi| gi * bi)?),
                (*b, g.zip_map(v(*a), |gi, ai| gi * ai)?),
            ],
            Op::Scale(a, f) => vec![(*a, g.map(|x| x * f))],
            Op::AddRow(a, row) => {
                let n = g.cols();
                let mut bias = vec![0.0; n];
                for chunk in g.row_iter() {
                    for (acc, x) in bias.iter_mut().zip(chunk) {
                        *acc += x;
                    }
                }
                let row_shape = v(*row).shape().to_vec();
                vec![(*a, g.clone()), (*row, Tensor::from_parts(row_shape, bias))]
            }
            Op::Relu(a) => vec![(
                *a,
                g.zip_map(v(*a), |gi, x| if x > 0.0 { gi } else { 0.0 })?,
            )],
            Op::Concat(a, b) => {
                let width = v(*a).cols();
                vec![
                    (*a, g.slice_cols(0, width)?),
                    (*b, g.slice_cols(width, g.cols() - width)?),
                ]
            }
            Op::SliceCols { input, start } => {
                let src = v(*input);
                let (rows, cols) = (src.rows(), src.cols());
                let width = g.cols();
                let mut data = vec![0.0; rows * cols];
                for (r, chunk) in g.row_iter().enumerate() {
                    data[r * cols + start..r * cols + start + width].copy_from_slice(chunk);
                }
                vec![(*input, Tensor::from_parts(src.shape().to_vec(), data))]
            }
            // (I − 11ᵀ/n) is symmetric, so the VJP is another row centering.
            Op::MeanCenterRows(a) => vec![(*a, g.mean_center_rows()?)],
            Op::Sum(a) => {
                let s = g.item()?;
                vec![(*a, v(*a).map(|_| s))]
            }
            Op::Mean(a) => {
                let s = g.item()? / v(*a).len().max(1) as f64;
                vec![(*a, v(*a).map(|_| s))]
            }
            Op::Magnitude { re, im } => {
                let mag = &node.value;
                let scale = g.zip_map(mag, |gi, m| gi / m)?;
                vec![
                    (*re, scale.zip_map(v(*re), |s, r| s * r)?),
                    (*im, scale.zip_map(v(*im), |s, i| s * i)?),
                ]
            }
            Op::HilbertRows(a) => vec![(*a, map_rows(g, signal::hilbert_freq_transpose)?)],
            Op::CrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let scale = g.item()? / labels.len().max(1) as f64;
                let k = probs.cols();
                let mut data = probs.data().to_vec();
                for (r, &label) in labels.iter().enumerate() {
                    data[r * k + label] -= 1.0;
                }
                data.iter_mut().for_each(|x| *x *= scale);
                vec![(*logits, Tensor::from_parts(probs.shape().to_vec(), data))]
            }
        })
    }
}

/// Added under the square root of [`Tape::magnitude`] so its gradient stays finite at zero.
pub const MAGNITUDE_EPS: f64 = 1e-12;

fn map_rows(t: &Tensor, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Tensor> {
    let (rows, cols) = t.expect_matrix("row transform")?;
    let mut data = Vec::with_capacity(rows * cols);
    for row in t.row_iter().take(rows) {
        data.extend(f(row)?);
    }
    Ok(Tensor::from_parts(vec![rows, cols], data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let mut tape = Tape::new();
        let i = tape.leaf(m(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        let b = tape.leaf(m(&[vec![3.0, 4.0], vec![5.0, 6.0]]));
        let c = tape.matmul(i, b).unwrap();
        assert_eq!(tape.value(c), tape.value(b));

        let row = tape.leaf(m(&[vec![1.0, 2.0]]));
        let col = tape.leaf(m(&[vec![3.0], vec![4.0]]));
        let dot = tape.matmul(row, col).unwrap();
        assert_eq!(tape.value(dot).data(), &[11.0]);

        assert!(matches!(tape.matmul(row, row), Err(Error::Shape(_))));
    }

    #[test]
    fn relu_values_and_tie_break() {
        let mut tape = Tape::new();
        let x = tape.leaf(m(&[vec![-1.0, 0.0, 2.0]]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
        let loss = tape.sum(y);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn relu_all_negative() {
        let mut tape = Tape::new();
        let x = tape.leaf(m(&[vec![-3.0, -0.5], vec![-1.0, -2.0]]));
        let y = tape.relu(x);
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
        let loss = tape.sum(y);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mean_center_examples() {
        let mut tape = Tape::new();
        let x = tape.leaf(m(&[vec![1.0, 2.0, 3.0]]));
        let c = tape.mean_center_rows(x).unwrap();
        assert_eq!(tape.value(c).data(), &[-1.0, 0.0, 1.0]);
        let again = tape.mean_center_rows(c).unwrap();
        assert_eq!(tape.value(again), tape.value(c));
    }

    #[test]
    fn concat_example() {
        let mut tape = Tape::new();
        let a = tape.leaf(m(&[vec![1.0, 2.0]]));
        let b = tape.leaf(m(&[vec![3.0, 4.0]]));
        let c = tape.concat(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 2.0, 3.0, 4.0]);
        let (l, r) = tape.split(c, 2).unwrap();
        assert_eq!(tape.value(l), tape.value(a));
        assert_eq!(tape.value(r), tape.value(b));
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(m(&[vec![0.3, -7.0], vec![2.0, 1e3]]));
        let loss = tape.sum(x);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0; 4]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(m(&[vec![1.0, 2.0]]));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn shared_input_accumulates() {
        // loss = sum(x * x) → grad 2x
        let mut tape = Tape::new();
        let x = tape.leaf(m(&[vec![1.5, -2.0]]));
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[3.0, -4.0]);
    }

    #[test]
    fn disconnected_nodes_have_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(m(&[vec![1.0]]));
        let unused = tape.leaf(m(&[vec![2.0]]));
        let loss = tape.sum(x);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(unused).is_none());
        assert_eq!(
            grads.get_or_zeros(unused, tape.value(unused)).data(),
            &[0.0]
        );
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let mut tape = Tape::new();
        let logits = tape.leaf(m(&[vec![0.0, 1.0]]));
        assert!(matches!(
            tape.cross_entropy(logits, &[2]),
            Err(Error::Data(_))
        ));
    }
}

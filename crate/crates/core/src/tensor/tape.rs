use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use super::kernels::{self, ConvGeom, PoolGeom};
use super::{Parameter, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Conv2d { geom: ConvGeom },
    AvgPool2d { geom: PoolGeom },
    Linear { batch: usize, n_in: usize, n_out: usize },
    Elu { alpha: f64 },
    Softplus,
    Add,
    Scale(f64),
    Sum,
    Mean,
    MeanLastAxis { width: usize },
    Reshape,
    ConcatLast { rows: usize, left: usize, right: usize },
    CrossEntropy { probs: Vec<f64>, labels: Vec<usize> },
}

struct Node {
    value: Tensor,
    op: Op,
    inputs: Vec<usize>,
    requires_grad: bool,
}

/// Records a forward computation for one reverse pass.
///
/// Nodes are appended in evaluation order, so the node list is always
/// topologically sorted. Parameters bound through [`Tape::param`] are
/// deduplicated by name: binding the same parameter twice yields the same
/// node, and gradients from every use accumulate there.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<HashMap<String, usize>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.borrow().len())
            .field("params", &self.params.borrow().len())
            .finish()
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A value that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, vec![], false)
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, vec![], true)
    }

    /// Binds a named parameter as a differentiable leaf.
    pub fn param(&self, p: &Parameter) -> Var<'_> {
        if let Some(&id) = self.params.borrow().get(&p.name) {
            return Var { tape: self, id };
        }
        let var = self.leaf(p.value.clone());
        self.params.borrow_mut().insert(p.name.clone(), var.id);
        var
    }

    /// Binds a parameter either as trainable or frozen.
    pub fn bind(&self, p: &Parameter, trainable: bool) -> Var<'_> {
        if trainable {
            self.param(p)
        } else {
            self.constant(p.value.clone())
        }
    }

    fn push(&self, value: Tensor, op: Op, inputs: Vec<usize>, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            inputs,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value_of(&self, id: usize) -> Tensor {
        self.nodes.borrow()[id].value.clone()
    }

    fn requires(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    fn check_same(&self, other: &Var<'_>, op: &'static str) -> Result<()> {
        if std::ptr::eq(self, other.tape) {
            Ok(())
        } else {
            Err(Error::Tape(format!(
                "{op}: operand belongs to a different tape"
            )))
        }
    }

    /// Reverse-mode accumulation from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        self.check_same(&loss, "backward")?;
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.len() != 1 {
            return Err(Error::contract(
                "backward",
                format!("loss must be scalar, got shape {:?}", root.value.shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad || node.inputs.is_empty() {
                continue;
            }
            let Some(gout) = grads[id].take() else {
                continue;
            };
            let needs: Vec<bool> = node.inputs.iter().map(|&i| nodes[i].requires_grad).collect();
            let contributions = backward_node(node, &nodes, &gout, &needs);
            for (slot, contribution) in node.inputs.iter().zip(contributions) {
                if let Some(c) = contribution {
                    accumulate(&mut grads[*slot], c);
                }
            }
            grads[id] = Some(gout);
        }

        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients {
            grads,
            shapes,
            params: self.params.borrow().clone(),
            tape: self as *const Tape as usize,
        })
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, contribution: Vec<f64>) {
    match slot {
        Some(existing) => {
            for (e, c) in existing.iter_mut().zip(contribution) {
                *e += c;
            }
        }
        None => *slot = Some(contribution),
    }
}

fn backward_node(node: &Node, nodes: &[Node], gout: &[f64], needs: &[bool]) -> Vec<Option<Vec<f64>>> {
    let input = |k: usize| nodes[node.inputs[k]].value.data();
    match &node.op {
        Op::Leaf => vec![],
        Op::Conv2d { geom } => {
            let (gx, gw, gb) = kernels::conv2d_backward(input(0), input(1), gout, *geom, needs[0]);
            vec![gx, needs[1].then_some(gw), needs[2].then_some(gb)]
        }
        Op::AvgPool2d { geom } => vec![Some(kernels::avgpool2d_backward(gout, *geom))],
        Op::Linear { batch, n_in, n_out } => {
            let (gx, gw, gb) = kernels::linear_backward(
                input(0),
                input(1),
                gout,
                *batch,
                *n_in,
                *n_out,
                needs[0],
            );
            vec![gx, needs[1].then_some(gw), needs[2].then_some(gb)]
        }
        Op::Elu { alpha } => {
            let g = input(0)
                .iter()
                .zip(gout)
                .map(|(&x, &g)| g * kernels::elu_grad(x, *alpha))
                .collect();
            vec![Some(g)]
        }
        Op::Softplus => {
            let g = input(0)
                .iter()
                .zip(gout)
                .map(|(&x, &g)| g * kernels::sigmoid(x))
                .collect();
            vec![Some(g)]
        }
        Op::Add => vec![
            needs[0].then(|| gout.to_vec()),
            needs[1].then(|| gout.to_vec()),
        ],
        Op::Scale(c) => vec![Some(gout.iter().map(|g| g * c).collect())],
        Op::Sum => {
            let n = nodes[node.inputs[0]].value.len();
            vec![Some(vec![gout[0]; n])]
        }
        Op::Mean => {
            let n = nodes[node.inputs[0]].value.len();
            vec![Some(vec![gout[0] / n as f64; n])]
        }
        Op::MeanLastAxis { width } => {
            let scale = 1.0 / *width as f64;
            let g = gout
                .iter()
                .flat_map(|&g| std::iter::repeat_n(g * scale, *width))
                .collect();
            vec![Some(g)]
        }
        Op::Reshape => vec![Some(gout.to_vec())],
        Op::ConcatLast { rows, left, right } => {
            let width = left + right;
            let mut gl = Vec::with_capacity(rows * left);
            let mut gr = Vec::with_capacity(rows * right);
            for r in 0..*rows {
                let row = &gout[r * width..(r + 1) * width];
                gl.extend_from_slice(&row[..*left]);
                gr.extend_from_slice(&row[*left..]);
            }
            vec![needs[0].then_some(gl), needs[1].then_some(gr)]
        }
        Op::CrossEntropy { probs, labels } => {
            let batch = labels.len();
            let classes = probs.len() / batch;
            let scale = gout[0] / batch as f64;
            let mut g = probs.clone();
            for (b, &label) in labels.iter().enumerate() {
                g[b * classes + label] -= 1.0;
            }
            g.iter_mut().for_each(|v| *v *= scale);
            vec![Some(g)]
        }
    }
}

/// Gradients of one backward pass, indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
    params: HashMap<String, usize>,
    tape: usize,
}

impl Gradients {
    /// Gradient with respect to `var`; `None` when the loss does not depend on it
    /// through differentiable nodes.
    pub fn get(&self, var: &Var<'_>) -> Option<Tensor> {
        if var.tape as *const Tape as usize != self.tape {
            return None;
        }
        self.tensor_at(var.id)
    }

    pub fn param(&self, name: &str) -> Option<Tensor> {
        self.params.get(name).and_then(|&id| self.tensor_at(id))
    }

    fn tensor_at(&self, id: usize) -> Option<Tensor> {
        let g = self.grads.get(id)?.as_ref()?;
        Tensor::new(self.shapes[id].clone(), g.clone()).ok()
    }

    /// Stores each parameter's gradient into its `grad` slot. A parameter bound
    /// on the tape but unreachable from the loss gets zeros; one never bound
    /// is an error.
    pub fn attach<'a>(&self, params: impl IntoIterator<Item = &'a mut Parameter>) -> Result<()> {
        for p in params {
            let Some(&id) = self.params.get(&p.name) else {
                return Err(Error::Tape(format!(
                    "parameter `{}` was not bound on this tape",
                    p.name
                )));
            };
            let grad = self
                .tensor_at(id)
                .unwrap_or_else(|| Tensor::zeros(&self.shapes[id]));
            p.grad = Some(grad);
        }
        Ok(())
    }
}

fn dims4(t: &Tensor, op: &'static str, what: &str) -> Result<[usize; 4]> {
    match *t.shape() {
        [c, h, w] => Ok([1, c, h, w]),
        [b, c, h, w] => Ok([b, c, h, w]),
        ref s => Err(Error::dim(op, format!("{what} rank"), "3 or 4", s.len())),
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Tensor {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    /// A gradient-blocked copy of this value on the same tape.
    pub fn detach(&self) -> Var<'t> {
        self.tape.constant(self.value())
    }

    fn unary(&self, value: Tensor, op: Op) -> Var<'t> {
        let rg = self.requires_grad();
        self.tape.push(value, op, vec![self.id], rg)
    }

    fn nary(&self, inputs: Vec<usize>, value: Tensor, op: Op) -> Var<'t> {
        let rg = self.tape.requires(&inputs);
        self.tape.push(value, op, inputs, rg)
    }

    /// Valid 2-D cross-correlation of `[C,H,W]` or `[B,C,H,W]` input with
    /// `[O,C,kH,kW]` weights.
    pub fn conv2d(&self, weight: &Var<'t>, bias: &Var<'t>, stride: (usize, usize)) -> Result<Var<'t>> {
        const OP: &str = "conv2d";
        self.tape.check_same(weight, OP)?;
        self.tape.check_same(bias, OP)?;
        let x = self.value();
        let w = weight.value();
        let b = bias.value();
        let [batch, c, h, wd] = dims4(&x, OP, "input")?;
        let &[o, wc, kh, kw] = w.shape() else {
            return Err(Error::dim(OP, "weight rank", 4, w.rank()));
        };
        if wc != c {
            return Err(Error::dim(OP, "input channels", wc, c));
        }
        if b.shape() != [o] {
            return Err(Error::dim(OP, "bias length", o, format!("{:?}", b.shape())));
        }
        if kh > h {
            return Err(Error::dim(OP, "height (kernel larger than input)", format!("<= {h}"), kh));
        }
        if kw > wd {
            return Err(Error::dim(OP, "width (kernel larger than input)", format!("<= {wd}"), kw));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(Error::contract(OP, "stride must be positive"));
        }
        let geom = ConvGeom {
            batch,
            in_ch: c,
            height: h,
            width: wd,
            out_ch: o,
            k_h: kh,
            k_w: kw,
            s_h: stride.0,
            s_w: stride.1,
        };
        let out = kernels::conv2d_forward(x.data(), w.data(), b.data(), geom);
        let shape = if x.rank() == 3 {
            vec![o, geom.out_h(), geom.out_w()]
        } else {
            vec![batch, o, geom.out_h(), geom.out_w()]
        };
        let value = Tensor::new(shape, out)?;
        Ok(self.nary(vec![self.id, weight.id, bias.id], value, Op::Conv2d { geom }))
    }

    /// Mean over non-overlapping or strided windows, no padding.
    pub fn avgpool2d(&self, kernel: (usize, usize), stride: (usize, usize)) -> Result<Var<'t>> {
        const OP: &str = "avgpool2d";
        let x = self.value();
        let [batch, c, h, w] = dims4(&x, OP, "input")?;
        if kernel.0 == 0 || kernel.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(Error::contract(OP, "kernel and stride must be positive"));
        }
        if kernel.0 > h {
            return Err(Error::dim(OP, "height (kernel larger than input)", format!("<= {h}"), kernel.0));
        }
        if kernel.1 > w {
            return Err(Error::dim(OP, "width (kernel larger than input)", format!("<= {w}"), kernel.1));
        }
        let geom = PoolGeom {
            planes: batch * c,
            height: h,
            width: w,
            k_h: kernel.0,
            k_w: kernel.1,
            s_h: stride.0,
            s_w: stride.1,
        };
        let out = kernels::avgpool2d_forward(x.data(), geom);
        let mut shape = x.shape().to_vec();
        let r = shape.len();
        shape[r - 2] = geom.out_h();
        shape[r - 1] = geom.out_w();
        Ok(self.unary(Tensor::new(shape, out)?, Op::AvgPool2d { geom }))
    }

    /// `weight·x + bias` for `[N_in]` or `[B,N_in]` input.
    pub fn linear(&self, weight: &Var<'t>, bias: &Var<'t>) -> Result<Var<'t>> {
        const OP: &str = "linear";
        self.tape.check_same(weight, OP)?;
        self.tape.check_same(bias, OP)?;
        let x = self.value();
        let w = weight.value();
        let b = bias.value();
        let (batch, n_in) = match *x.shape() {
            [n] => (1, n),
            [bt, n] => (bt, n),
            ref s => return Err(Error::dim(OP, "input rank", "1 or 2", s.len())),
        };
        let &[n_out, w_in] = w.shape() else {
            return Err(Error::dim(OP, "weight rank", 2, w.rank()));
        };
        if w_in != n_in {
            return Err(Error::dim(OP, "input features", w_in, n_in));
        }
        if b.shape() != [n_out] {
            return Err(Error::dim(OP, "bias length", n_out, format!("{:?}", b.shape())));
        }
        let out = kernels::linear_forward(x.data(), w.data(), b.data(), batch, n_in, n_out);
        let shape = if x.rank() == 1 { vec![n_out] } else { vec![batch, n_out] };
        let value = Tensor::new(shape, out)?;
        Ok(self.nary(
            vec![self.id, weight.id, bias.id],
            value,
            Op::Linear { batch, n_in, n_out },
        ))
    }

    pub fn elu(&self, alpha: f64) -> Var<'t> {
        let x = self.value();
        let out = x.data().iter().map(|&v| kernels::elu(v, alpha)).collect();
        let value = Tensor::new(x.shape().to_vec(), out).expect("same shape");
        self.unary(value, Op::Elu { alpha })
    }

    /// Elementwise `ln(1 + e^x)`.
    pub fn softplus(&self) -> Var<'t> {
        let x = self.value();
        let out = x.data().iter().map(|&v| kernels::softplus(v)).collect();
        let value = Tensor::new(x.shape().to_vec(), out).expect("same shape");
        self.unary(value, Op::Softplus)
    }

    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        self.tape.check_same(other, "add")?;
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(Error::dim(
                "add",
                "shape",
                format!("{:?}", a.shape()),
                format!("{:?}", b.shape()),
            ));
        }
        let out = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(a.shape().to_vec(), out)?;
        Ok(self.nary(vec![self.id, other.id], value, Op::Add))
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        let x = self.value();
        let out = x.data().iter().map(|v| v * c).collect();
        let value = Tensor::new(x.shape().to_vec(), out).expect("same shape");
        self.unary(value, Op::Scale(c))
    }

    pub fn neg(&self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn sum(&self) -> Var<'t> {
        let s = self.value().data().iter().sum();
        self.unary(Tensor::scalar(s), Op::Sum)
    }

    pub fn mean(&self) -> Var<'t> {
        let x = self.value();
        let s = x.data().iter().sum::<f64>() / x.len() as f64;
        self.unary(Tensor::scalar(s), Op::Mean)
    }

    /// Averages the last axis away: `[.., K]` becomes `[..]` (or `[1]`).
    pub fn mean_last_axis(&self) -> Var<'t> {
        let x = self.value();
        let width = *x.shape().last().expect("rank >= 1");
        let out: Vec<f64> = x
            .data()
            .chunks(width)
            .map(|c| c.iter().sum::<f64>() / width as f64)
            .collect();
        let mut shape = x.shape()[..x.rank() - 1].to_vec();
        if shape.is_empty() {
            shape.push(1);
        }
        let value = Tensor::new(shape, out).expect("consistent shape");
        self.unary(value, Op::MeanLastAxis { width })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let value = self.value().reshape(shape)?;
        Ok(self.unary(value, Op::Reshape))
    }

    /// Collapses everything after the leading (batch) axis.
    pub fn flatten_batch(&self) -> Result<Var<'t>> {
        let shape = self.shape();
        let rest: usize = shape[1..].iter().product();
        self.reshape(&[shape[0], rest])
    }

    /// Joins two tensors along their last axis; leading axes must agree.
    pub fn concat_last(&self, other: &Var<'t>) -> Result<Var<'t>> {
        const OP: &str = "concat";
        self.tape.check_same(other, OP)?;
        let (a, b) = (self.value(), other.value());
        let (sa, sb) = (a.shape(), b.shape());
        if sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(Error::dim(
                OP,
                "leading axes",
                format!("{:?}", &sa[..sa.len() - 1]),
                format!("{:?}", &sb[..sb.len().saturating_sub(1)]),
            ));
        }
        let left = sa[sa.len() - 1];
        let right = sb[sb.len() - 1];
        let rows = a.len() / left;
        let mut out = Vec::with_capacity(a.len() + b.len());
        for r in 0..rows {
            out.extend_from_slice(&a.data()[r * left..(r + 1) * left]);
            out.extend_from_slice(&b.data()[r * right..(r + 1) * right]);
        }
        let mut shape = sa.to_vec();
        *shape.last_mut().unwrap() = left + right;
        let value = Tensor::new(shape, out)?;
        Ok(self.nary(
            vec![self.id, other.id],
            value,
            Op::ConcatLast { rows, left, right },
        ))
    }

    /// Mean negative log-likelihood of `labels` under `softmax(self)`, where
    /// `self` is `[K]` or `[B,K]` logits.
    pub fn cross_entropy(&self, labels: &[usize]) -> Result<Var<'t>> {
        const OP: &str = "cross_entropy";
        let x = self.value();
        let (batch, classes) = match *x.shape() {
            [k] => (1, k),
            [b, k] => (b, k),
            ref s => return Err(Error::dim(OP, "logits rank", "1 or 2", s.len())),
        };
        if labels.len() != batch {
            return Err(Error::dim(OP, "batch", batch, labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::contract(
                OP,
                format!("label {bad} out of range for {classes} classes"),
            ));
        }
        let mut probs = Vec::with_capacity(x.len());
        let mut total = 0.0;
        for (row, &label) in x.data().chunks(classes).zip(labels) {
            total += kernels::log_sum_exp(row) - row[label];
            probs.extend(kernels::softmax(row));
        }
        let value = Tensor::scalar(total / batch as f64);
        Ok(self.unary(
            value,
            Op::CrossEntropy {
                probs,
                labels: labels.to_vec(),
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap());
        let loss = x.sum();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(&x).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn elu_gradient_closed_form() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![-1.0, 2.0]));
        let g = tape.backward(x.elu(1.0).sum()).unwrap();
        let gx = g.get(&x).unwrap();
        assert!((gx.data()[0] - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(gx.data()[1], 1.0);
    }

    #[test]
    fn reused_node_accumulates() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![3.0]));
        let y = x.add(&x).unwrap().add(&x).unwrap();
        let g = tape.backward(y.sum()).unwrap();
        assert_eq!(g.get(&x).unwrap().data(), &[3.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Contract { .. })));
    }

    #[test]
    fn foreign_tape_rejected() {
        let a = Tape::new();
        let b = Tape::new();
        let x = a.leaf(Tensor::from_vec(vec![1.0]));
        let y = b.leaf(Tensor::from_vec(vec![1.0]));
        assert!(matches!(x.add(&y), Err(Error::Tape(_))));
        assert!(matches!(b.backward(x.sum()), Err(Error::Tape(_))));
    }

    #[test]
    fn constants_and_detach_block_gradients() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]));
        let d = x.detach();
        let loss = d.add(&x).unwrap().sum();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(&x).unwrap().data(), &[1.0, 1.0]);
        assert!(g.get(&d).is_none());
    }

    #[test]
    fn param_binding_is_deduplicated() {
        let tape = Tape::new();
        let p = Parameter::new("w", Tensor::from_vec(vec![2.0]));
        let a = tape.param(&p);
        let b = tape.param(&p);
        assert_eq!(a.id(), b.id());
        let g = tape.backward(a.add(&b).unwrap().sum()).unwrap();
        assert_eq!(g.param("w").unwrap().data(), &[2.0]);
    }

    #[test]
    fn conv_shape_errors_name_the_axis() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 4, 4]));
        let w = tape.constant(Tensor::zeros(&[2, 3, 1, 1]));
        let b = tape.constant(Tensor::zeros(&[2]));
        let err = x.conv2d(&w, &b, (1, 1)).unwrap_err();
        assert!(err.to_string().contains("input channels"), "{err}");
        let w = tape.constant(Tensor::zeros(&[2, 1, 5, 1]));
        let err = x.conv2d(&w, &b, (1, 1)).unwrap_err();
        assert!(err.to_string().contains("height"), "{err}");
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![0.0; 4]));
        assert!(x.cross_entropy(&[4]).is_err());
        let l = x.cross_entropy(&[2]).unwrap();
        assert!((l.value().item().unwrap() - 4f64.ln()).abs() < 1e-12);
    }
}

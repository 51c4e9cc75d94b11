use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::Rc;

use super::array::Array;
use super::kernels::{self, ConvParams, PoolParams};
use crate::error::{Error, Result};

/// Operation recorded for a graph node.
///
/// The `*Grad`/`*Adjoint` kinds are the adjoints of their forward
/// counterparts. They are ordinary differentiable ops so that gradients
/// produced by [`Graph::backward`] can be differentiated again.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Scale(f64),
    AddScalar(f64),
    MatMul,
    Transpose,
    Conv2d(ConvParams),
    Conv2dInputGrad(ConvParams, [usize; 4]),
    Conv2dWeightGrad(ConvParams, [usize; 4]),
    AvgPool2d(PoolParams),
    AvgPool2dAdjoint(PoolParams, usize, usize),
    UpsampleNearest(usize),
    Reshape(Vec<usize>),
    PadZero(Vec<(usize, usize)>),
    Slice(Vec<(usize, usize)>),
    Abs,
    /// Full reduction; backward routes to the first maximal element.
    MaxReduce,
    MeanReduce,
    SumReduce,
    /// Single element broadcast to the given shape.
    Broadcast(Vec<usize>),
    /// `[n]` repeated into `[rows, n]`.
    BroadcastRows(usize),
    /// `[rows, n]` summed down to `[n]`.
    SumRows,
    Square,
    Tanh,
    Softplus,
    /// Slope `alpha` for negative inputs; slope 1 at zero.
    LeakyRelu(f64),
    Sigmoid,
    Log,
    Mse,
}

impl OpKind {
    fn arity(&self) -> usize {
        use OpKind::*;
        match self {
            Leaf => 0,
            Add | Sub | Mul | Div | MatMul | Conv2d(_) | Conv2dInputGrad(..) | Conv2dWeightGrad(..) | Mse => 2,
            _ => 1,
        }
    }
}

struct Node {
    value: Rc<Array>,
    op: OpKind,
    inputs: Vec<usize>,
    requires_grad: bool,
}

/// Append-only record of tensor operations.
///
/// Node ids are assigned in creation order, which is a topological order,
/// so backward is a single reverse sweep. A graph is single-writer; build a
/// fresh one per training step.
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    recording: Cell<bool>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph").field("nodes", &self.len()).finish()
    }
}

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy)]
pub struct Tensor<'g> {
    graph: &'g Graph,
    id: usize,
}

impl fmt::Debug for Tensor<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .field("requires_grad", &self.requires_grad())
            .finish()
    }
}

/// Result of [`Graph::backward`]: one gradient per requested tensor.
pub struct Gradients<'g> {
    grads: Vec<Tensor<'g>>,
    unreachable: Vec<bool>,
}

impl<'g> Gradients<'g> {
    pub fn get(&self, i: usize) -> Tensor<'g> {
        self.grads[i]
    }

    pub fn tensors(&self) -> &[Tensor<'g>] {
        &self.grads
    }

    /// True when `wrt[i]` does not influence the output; its gradient is zero.
    pub fn is_unreachable(&self, i: usize) -> bool {
        self.unreachable[i]
    }

    pub fn any_unreachable(&self) -> bool {
        self.unreachable.iter().any(|&u| u)
    }

    pub fn values(&self) -> Vec<Array> {
        self.grads.iter().map(|t| (*t.value()).clone()).collect()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: RefCell::new(Vec::new()),
            recording: Cell::new(true),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Array) -> Tensor<'_> {
        self.push_leaf(value, false)
    }

    /// Leaf that gradients can be taken with respect to.
    pub fn variable(&self, value: Array) -> Tensor<'_> {
        self.push_leaf(value, true)
    }

    pub fn scalar(&self, value: f64) -> Tensor<'_> {
        self.constant(Array::scalar(value))
    }

    fn push_leaf(&self, value: Array, requires_grad: bool) -> Tensor<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op: OpKind::Leaf,
            inputs: Vec::new(),
            requires_grad,
        });
        Tensor {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, value: Array, op: OpKind, inputs: &[usize]) -> Tensor<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = self.recording.get() && inputs.iter().any(|&i| nodes[i].requires_grad);
        let (op, inputs) = if requires_grad {
            (op, inputs.to_vec())
        } else {
            (OpKind::Leaf, Vec::new())
        };
        nodes.push(Node {
            value: Rc::new(value),
            op,
            inputs,
            requires_grad,
        });
        Tensor {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn value_of(&self, id: usize) -> Rc<Array> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires_grad_of(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Applies `kind` to `inputs`, the uniform entry point behind the
    /// per-op methods on [`Tensor`].
    pub fn forward_op<'g>(&'g self, kind: &OpKind, inputs: &[Tensor<'g>]) -> Result<Tensor<'g>> {
        if inputs.len() != kind.arity() || kind == &OpKind::Leaf {
            return Err(Error::invalid(format!(
                "{kind:?} takes {} inputs, got {}",
                kind.arity(),
                inputs.len()
            )));
        }
        for t in inputs {
            if !std::ptr::eq(t.graph, self) {
                return Err(Error::invalid("tensor belongs to a different graph"));
            }
        }
        let a = inputs[0].value();
        let b = inputs.get(1).map(|t| t.value());
        let b_ref = || b.as_deref().expect("binary op");
        use OpKind::*;
        let value = match kind {
            Leaf => unreachable!(),
            Add => a.zip_map(b_ref(), "add", |x, y| x + y)?,
            Sub => a.zip_map(b_ref(), "sub", |x, y| x - y)?,
            Mul => a.zip_map(b_ref(), "mul", |x, y| x * y)?,
            Div => {
                if b_ref().data().contains(&0.0) {
                    return Err(Error::Domain {
                        op: "div",
                        detail: "division by zero".into(),
                    });
                }
                a.zip_map(b_ref(), "div", |x, y| x / y)?
            }
            Scale(c) => a.map(|x| x * c),
            AddScalar(c) => a.map(|x| x + c),
            MatMul => kernels::matmul(&a, b_ref())?,
            Transpose => kernels::transpose(&a)?,
            Conv2d(p) => kernels::conv2d(&a, b_ref(), *p)?,
            Conv2dInputGrad(p, s) => kernels::conv2d_input_grad(&a, b_ref(), *p, *s)?,
            Conv2dWeightGrad(p, s) => kernels::conv2d_weight_grad(&a, b_ref(), *p, *s)?,
            AvgPool2d(p) => kernels::avg_pool2d(&a, *p)?,
            AvgPool2dAdjoint(p, h, w) => kernels::avg_pool2d_adjoint(&a, *p, *h, *w)?,
            UpsampleNearest(f) => kernels::upsample_nearest(&a, *f)?,
            Reshape(s) => a
                .reshaped(s)
                .map_err(|_| Error::shape("reshape", &[a.shape(), s], "element count differs"))?,
            PadZero(p) => kernels::pad_zero(&a, p)?,
            Slice(r) => kernels::slice(&a, r)?,
            Abs => a.map(f64::abs),
            MaxReduce => {
                let i = kernels::argmax(a.data())
                    .ok_or_else(|| Error::shape("max_reduce", &[a.shape()], "empty tensor"))?;
                Array::scalar(a.data()[i])
            }
            MeanReduce => {
                if a.is_empty() {
                    return Err(Error::shape("mean_reduce", &[a.shape()], "empty tensor"));
                }
                Array::scalar(a.sum() / a.len() as f64)
            }
            SumReduce => Array::scalar(a.sum()),
            Broadcast(s) => Array::full(s, a.item().map_err(|_| Error::shape("broadcast", &[a.shape(), s], "source must have one element"))?),
            BroadcastRows(rows) => {
                if a.shape().len() != 1 {
                    return Err(Error::shape("broadcast_rows", &[a.shape()], "expected a vector"));
                }
                let mut d = Vec::with_capacity(rows * a.len());
                for _ in 0..*rows {
                    d.extend_from_slice(a.data());
                }
                Array::new(vec![*rows, a.len()], d)?
            }
            SumRows => {
                let s = a.shape();
                if s.len() != 2 {
                    return Err(Error::shape("sum_rows", &[s], "expected a matrix"));
                }
                let mut d = vec![0.0; s[1]];
                for r in a.data().chunks(s[1]) {
                    for (o, v) in d.iter_mut().zip(r) {
                        *o += v;
                    }
                }
                Array::vector(d)
            }
            Square => a.map(|x| x * x),
            Tanh => a.map(f64::tanh),
            Softplus => a.map(kernels::softplus),
            LeakyRelu(alpha) => a.map(|x| if x >= 0.0 { x } else { alpha * x }),
            Sigmoid => a.map(kernels::sigmoid),
            Log => {
                if a.data().iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Domain {
                        op: "log",
                        detail: "argument must be strictly positive".into(),
                    });
                }
                a.map(f64::ln)
            }
            Mse => {
                let d = a.zip_map(b_ref(), "mse", |x, y| (x - y) * (x - y))?;
                if d.is_empty() {
                    return Err(Error::shape("mse", &[a.shape()], "empty tensor"));
                }
                Array::scalar(d.sum() / d.len() as f64)
            }
        };
        let ids: Vec<usize> = inputs.iter().map(|t| t.id).collect();
        Ok(self.push(value, kind.clone(), &ids))
    }

    /// Reverse-mode gradients of the scalar `output` with respect to `wrt`.
    ///
    /// With `create_graph` the returned gradients are themselves recorded
    /// nodes and can be differentiated again; otherwise they are constants.
    /// A `wrt` tensor that does not influence `output` gets a zero gradient
    /// and is flagged in [`Gradients::is_unreachable`].
    pub fn backward<'g>(
        &'g self,
        output: Tensor<'g>,
        wrt: &[Tensor<'g>],
        create_graph: bool,
    ) -> Result<Gradients<'g>> {
        if !std::ptr::eq(output.graph, self) || wrt.iter().any(|t| !std::ptr::eq(t.graph, self)) {
            return Err(Error::invalid("tensor belongs to a different graph"));
        }
        let out_value = output.value();
        if out_value.len() != 1 {
            return Err(Error::shape("backward", &[out_value.shape()], "output must be a scalar"));
        }
        let prev = self.recording.replace(create_graph);
        let result = self.sweep(output, wrt);
        self.recording.set(prev);
        result
    }

    fn sweep<'g>(&'g self, output: Tensor<'g>, wrt: &[Tensor<'g>]) -> Result<Gradients<'g>> {
        let n = output.id + 1;
        let mut grads: Vec<Option<Tensor<'g>>> = vec![None; n];
        if self.requires_grad_of(output.id) {
            grads[output.id] = Some(self.constant(Array::full(output.value().shape(), 1.0)));
        }
        for id in (0..n).rev() {
            let Some(g) = grads[id] else { continue };
            let (op, inputs) = {
                let nodes = self.nodes.borrow();
                let node = &nodes[id];
                if node.inputs.is_empty() {
                    continue;
                }
                (node.op.clone(), node.inputs.clone())
            };
            let needs: Vec<bool> = inputs.iter().map(|&i| self.requires_grad_of(i)).collect();
            let vjps = self.vjp(id, &op, &inputs, &needs, g)?;
            for ((&input, need), gi) in inputs.iter().zip(needs).zip(vjps) {
                if !need {
                    continue;
                }
                let Some(gi) = gi else { continue };
                grads[input] = Some(match grads[input] {
                    Some(acc) => acc.add(gi)?,
                    None => gi,
                });
            }
        }
        let mut out = Vec::with_capacity(wrt.len());
        let mut unreachable = Vec::with_capacity(wrt.len());
        for t in wrt {
            match grads.get(t.id).copied().flatten() {
                Some(g) => {
                    out.push(g);
                    unreachable.push(false);
                }
                None => {
                    out.push(self.constant(Array::zeros(t.value().shape())));
                    unreachable.push(true);
                }
            }
        }
        Ok(Gradients {
            grads: out,
            unreachable,
        })
    }

    /// Vector-Jacobian products of node `id` for each input, expressed with
    /// graph ops so they stay differentiable.
    fn vjp<'g>(
        &'g self,
        id: usize,
        op: &OpKind,
        inputs: &[usize],
        needs: &[bool],
        g: Tensor<'g>,
    ) -> Result<Vec<Option<Tensor<'g>>>> {
        let t = |i: usize| Tensor {
            graph: self,
            id: inputs[i],
        };
        let out = Tensor { graph: self, id };
        let need = |i: usize| needs[i];
        use OpKind::*;
        let res = match op {
            Leaf => vec![],
            Add => vec![Some(g), Some(g)],
            Sub => vec![Some(g), Some(g.neg())],
            Mul => vec![
                need(0).then(|| g.mul(t(1))).transpose()?,
                need(1).then(|| g.mul(t(0))).transpose()?,
            ],
            Div => {
                let ga = g.div(t(1))?;
                let gb = if need(1) {
                    Some(ga.mul(t(0))?.div(t(1))?.neg())
                } else {
                    None
                };
                vec![Some(ga), gb]
            }
            Scale(c) => vec![Some(g.scale(*c))],
            AddScalar(_) => vec![Some(g)],
            MatMul => vec![
                need(0).then(|| g.matmul(t(1).transpose()?)).transpose()?,
                need(1).then(|| t(0).transpose()?.matmul(g)).transpose()?,
            ],
            Transpose => vec![Some(g.transpose()?)],
            Conv2d(p) => {
                let xs = shape4(&t(0).shape());
                let ws = shape4(&t(1).shape());
                vec![
                    need(0).then(|| g.conv2d_input_grad(t(1), *p, xs)).transpose()?,
                    need(1).then(|| t(0).conv2d_weight_grad(g, *p, ws)).transpose()?,
                ]
            }
            Conv2dInputGrad(p, _) => {
                // value = A(g0, w); <A(g0,w), u> = <g0, conv(u,w)> = <w, Wg(u,g0)>
                let ws = shape4(&t(1).shape());
                vec![
                    need(0).then(|| g.conv2d(t(1), *p)).transpose()?,
                    need(1).then(|| g.conv2d_weight_grad(t(0), *p, ws)).transpose()?,
                ]
            }
            Conv2dWeightGrad(p, _) => {
                // value = Wg(x, g0); <Wg(x,g0), v> = <conv(x,v), g0> = <x, A(g0,v)>
                let xs = shape4(&t(0).shape());
                vec![
                    need(0).then(|| t(1).conv2d_input_grad(g, *p, xs)).transpose()?,
                    need(1).then(|| t(0).conv2d(g, *p)).transpose()?,
                ]
            }
            AvgPool2d(p) => {
                let s = t(0).shape();
                let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
                vec![Some(g.avg_pool2d_adjoint(*p, h, w)?)]
            }
            AvgPool2dAdjoint(p, _, _) => vec![Some(g.avg_pool2d(p.kernel, p.stride)?)],
            UpsampleNearest(f) => {
                let f = *f;
                vec![Some(g.avg_pool2d(f, f)?.scale((f * f) as f64))]
            }
            Reshape(_) => vec![Some(g.reshape(&t(0).shape())?)],
            PadZero(pads) => {
                let s = t(0).shape();
                let ranges: Vec<_> = s.iter().zip(pads).map(|(&d, &(a, _))| (a, a + d)).collect();
                vec![Some(g.slice(&ranges)?)]
            }
            Slice(ranges) => {
                let s = t(0).shape();
                let pads: Vec<_> = s.iter().zip(ranges).map(|(&d, &(a, b))| (a, d - b)).collect();
                vec![Some(g.pad_zero(&pads)?)]
            }
            Abs => {
                let sign = t(0).value().map(|x| if x >= 0.0 { 1.0 } else { -1.0 });
                vec![Some(g.mul(self.constant(sign))?)]
            }
            MaxReduce => {
                let x = t(0).value();
                let i = kernels::argmax(x.data()).expect("non-empty");
                let mut onehot = Array::zeros(x.shape());
                onehot.data_mut()[i] = 1.0;
                vec![Some(g.broadcast(x.shape())?.mul(self.constant(onehot))?)]
            }
            MeanReduce => {
                let s = t(0).shape();
                let n: usize = s.iter().product();
                vec![Some(g.broadcast(&s)?.scale(1.0 / n as f64))]
            }
            SumReduce => vec![Some(g.broadcast(&t(0).shape())?)],
            Broadcast(_) => vec![Some(g.sum_reduce().reshape(&t(0).shape())?)],
            BroadcastRows(_) => vec![Some(g.sum_rows()?)],
            SumRows => vec![Some(g.broadcast_rows(t(0).shape()[0])?)],
            Square => vec![Some(g.mul(t(0))?.scale(2.0))],
            Tanh => {
                let d = out.square().scale(-1.0).add_scalar(1.0);
                vec![Some(g.mul(d)?)]
            }
            Softplus => vec![Some(g.mul(t(0).sigmoid())?)],
            LeakyRelu(alpha) => {
                let alpha = *alpha;
                let slope = t(0).value().map(|x| if x >= 0.0 { 1.0 } else { alpha });
                vec![Some(g.mul(self.constant(slope))?)]
            }
            Sigmoid => {
                let d = out.mul(out.scale(-1.0).add_scalar(1.0))?;
                vec![Some(g.mul(d)?)]
            }
            Log => vec![Some(g.div(t(0))?)],
            Mse => {
                let s = t(0).shape();
                let n: usize = s.iter().product();
                let ga = g.broadcast(&s)?.mul(t(0).sub(t(1))?)?.scale(2.0 / n as f64);
                vec![Some(ga), need(1).then(|| ga.neg())]
            }
        };
        Ok(res)
    }
}

fn shape4(s: &[usize]) -> [usize; 4] {
    [s[0], s[1], s[2], s[3]]
}

impl<'g> Tensor<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Array> {
        self.graph.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn item(&self) -> Result<f64> {
        self.value().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.requires_grad_of(self.id)
    }

    /// Constant copy of this tensor's value, cut from the graph.
    pub fn detach(&self) -> Tensor<'g> {
        self.graph.constant((*self.value()).clone())
    }

    fn unary(&self, kind: OpKind) -> Result<Tensor<'g>> {
        self.graph.forward_op(&kind, &[*self])
    }

    fn infallible(&self, kind: OpKind) -> Tensor<'g> {
        self.unary(kind).expect("elementwise op on a valid tensor")
    }

    fn binary(&self, kind: OpKind, other: Tensor<'g>) -> Result<Tensor<'g>> {
        self.graph.forward_op(&kind, &[*self, other])
    }

    pub fn add(&self, other: Tensor<'g>) -> Result<Tensor<'g>> {
        self.binary(OpKind::Add, other)
    }

    pub fn sub(&self, other: Tensor<'g>) -> Result<Tensor<'g>> {
        self.binary(OpKind::Sub, other)
    }

    pub fn mul(&self, other: Tensor<'g>) -> Result<Tensor<'g>> {
        self.binary(OpKind::Mul, other)
    }

    pub fn div(&self, other: Tensor<'g>) -> Result<Tensor<'g>> {
        self.binary(OpKind::Div, other)
    }

    pub fn scale(&self, c: f64) -> Tensor<'g> {
        self.infallible(OpKind::Scale(c))
    }

    pub fn neg(&self) -> Tensor<'g> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor<'g> {
        self.infallible(OpKind::AddScalar(c))
    }

    pub fn matmul(&self, other: Tensor<'g>) -> Result<Tensor<'g>> {
        self.binary(OpKind::MatMul, other)
    }

    pub fn transpose(&self) -> Result<Tensor<'g>> {
        self.unary(OpKind::Transpose)
    }

    pub fn conv2d(&self, weight: Tensor<'g>, p: ConvParams) -> Result<Tensor<'g>> {
        self.binary(OpKind::Conv2d(p), weight)
    }

    pub fn conv2d_input_grad(&self, weight: Tensor<'g>, p: ConvParams, input_shape: [usize; 4]) -> Result<Tensor<'g>> {
        self.binary(OpKind::Conv2dInputGrad(p, input_shape), weight)
    }

    pub fn conv2d_weight_grad(&self, grad_out: Tensor<'g>, p: ConvParams, weight_shape: [usize; 4]) -> Result<Tensor<'g>> {
        self.binary(OpKind::Conv2dWeightGrad(p, weight_shape), grad_out)
    }

    /// Average pool over the last two axes.
    pub fn avg_pool2d(&self, kernel: usize, stride: usize) -> Result<Tensor<'g>> {
        self.unary(OpKind::AvgPool2d(PoolParams { kernel, stride }))
    }

    pub fn avg_pool2d_adjoint(&self, p: PoolParams, h: usize, w: usize) -> Result<Tensor<'g>> {
        self.unary(OpKind::AvgPool2dAdjoint(p, h, w))
    }

    /// Nearest-neighbour upsampling of the last two axes.
    pub fn upsample_nearest(&self, factor: usize) -> Result<Tensor<'g>> {
        self.unary(OpKind::UpsampleNearest(factor))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<'g>> {
        self.unary(OpKind::Reshape(shape.to_vec()))
    }

    /// Zero padding, `(before, after)` per axis.
    pub fn pad_zero(&self, pads: &[(usize, usize)]) -> Result<Tensor<'g>> {
        self.unary(OpKind::PadZero(pads.to_vec()))
    }

    /// Sub-box, `[start, end)` per axis.
    pub fn slice(&self, ranges: &[(usize, usize)]) -> Result<Tensor<'g>> {
        self.unary(OpKind::Slice(ranges.to_vec()))
    }

    pub fn abs(&self) -> Tensor<'g> {
        self.infallible(OpKind::Abs)
    }

    pub fn max_reduce(&self) -> Result<Tensor<'g>> {
        self.unary(OpKind::MaxReduce)
    }

    pub fn mean_reduce(&self) -> Result<Tensor<'g>> {
        self.unary(OpKind::MeanReduce)
    }

    pub fn sum_reduce(&self) -> Tensor<'g> {
        self.infallible(OpKind::SumReduce)
    }

    pub fn broadcast(&self, shape: &[usize]) -> Result<Tensor<'g>> {
        self.unary(OpKind::Broadcast(shape.to_vec()))
    }

    pub fn broadcast_rows(&self, rows: usize) -> Result<Tensor<'g>> {
        self.unary(OpKind::BroadcastRows(rows))
    }

    pub fn sum_rows(&self) -> Result<Tensor<'g>> {
        self.unary(OpKind::SumRows)
    }

    pub fn square(&self) -> Tensor<'g> {
        self.infallible(OpKind::Square)
    }

    pub fn tanh(&self) -> Tensor<'g> {
        self.infallible(OpKind::Tanh)
    }

    pub fn softplus(&self) -> Tensor<'g> {
        self.infallible(OpKind::Softplus)
    }

    pub fn leaky_relu(&self, alpha: f64) -> Tensor<'g> {
        self.infallible(OpKind::LeakyRelu(alpha))
    }

    pub fn relu(&self) -> Tensor<'g> {
        self.leaky_relu(0.0)
    }

    pub fn sigmoid(&self) -> Tensor<'g> {
        self.infallible(OpKind::Sigmoid)
    }

    pub fn log(&self) -> Result<Tensor<'g>> {
        self.unary(OpKind::Log)
    }

    pub fn mse(&self, other: Tensor<'g>) -> Result<Tensor<'g>> {
        self.binary(OpKind::Mse, other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_first_and_second_derivative() {
        let g = Graph::new();
        let x = g.variable(Array::scalar(3.0));
        let y = x.square();
        let d = g.backward(y, &[x], false).unwrap();
        assert_eq!(d.get(0).item().unwrap(), 6.0);

        let g = Graph::new();
        let x = g.variable(Array::scalar(2.0));
        let cube = x.square().mul(x).unwrap();
        let dx = g.backward(cube, &[x], true).unwrap().get(0);
        assert_eq!(dx.item().unwrap(), 12.0);
        let ddx = g.backward(dx, &[x], false).unwrap().get(0);
        assert_eq!(ddx.item().unwrap(), 12.0);
    }

    #[test]
    fn sigmoid_at_zero() {
        let g = Graph::new();
        assert_eq!(g.scalar(0.0).sigmoid().item().unwrap(), 0.5);
    }

    #[test]
    fn unreachable_wrt_is_flagged() {
        let g = Graph::new();
        let x = g.variable(Array::scalar(1.0));
        let y = g.variable(Array::vector(vec![1.0, 2.0]));
        let out = x.square();
        let d = g.backward(out, &[x, y], false).unwrap();
        assert!(!d.is_unreachable(0));
        assert!(d.is_unreachable(1));
        assert_eq!(d.get(1).value().data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let g = Graph::new();
        let x = g.variable(Array::vector(vec![1.0, 2.0]));
        assert!(g.backward(x.square(), &[x], false).is_err());
    }

    #[test]
    fn log_rejects_non_positive() {
        let g = Graph::new();
        let x = g.constant(Array::vector(vec![1.0, 0.0]));
        let err = x.log().unwrap_err();
        assert!(matches!(err, Error::Domain { op: "log", .. }));
    }

    #[test]
    fn shape_errors_name_the_op() {
        let g = Graph::new();
        let a = g.constant(Array::zeros(&[2, 2]));
        let b = g.constant(Array::zeros(&[3]));
        let msg = a.add(b).unwrap_err().to_string();
        assert!(msg.starts_with("add:"), "{msg}");
        assert!(msg.contains("[2, 2]") && msg.contains("[3]"), "{msg}");
    }

    #[test]
    fn gradients_without_create_graph_are_constants() {
        let g = Graph::new();
        let x = g.variable(Array::scalar(2.0));
        let dx = g.backward(x.square(), &[x], false).unwrap().get(0);
        assert!(!dx.requires_grad());
    }

    #[test]
    fn leaky_relu_slope_at_zero_is_one() {
        let g = Graph::new();
        let x = g.variable(Array::vector(vec![0.0, -1.0]));
        let y = x.leaky_relu(0.2).sum_reduce();
        let d = g.backward(y, &[x], false).unwrap();
        assert_eq!(d.get(0).value().data(), &[1.0, 0.2]);
    }

    #[test]
    fn max_reduce_routes_to_first_maximum() {
        let g = Graph::new();
        let x = g.variable(Array::vector(vec![1.0, 5.0, 5.0]));
        let d = g.backward(x.max_reduce().unwrap(), &[x], false).unwrap();
        assert_eq!(d.get(0).value().data(), &[0.0, 1.0, 0.0]);
    }
}

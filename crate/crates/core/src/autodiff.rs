//! Minimal reverse-mode automatic differentiation over dense f64 arrays.
//!
//! A [`Graph`] is an append-only tape of operation records. Forward methods
//! compute values eagerly and push a record; [`Graph::backward`] walks the
//! tape once in reverse insertion order and accumulates `d(loss)/d(node)`
//! into every node. Because inputs always precede their outputs on the tape,
//! reverse insertion order is a valid reverse topological order.
//!
//! Tensors are lightweight handles into their owning graph. A graph and its
//! tensors belong to one thread for the duration of a forward/backward
//! episode; independent graphs can run on independent threads.
//!
//! Supported shapes are 1-D `[n]` and 2-D `[r, c]` (row-major). Elementwise
//! binary ops accept equal shapes or a scalar (`[1]`) on either side.

use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_nt, matmul_tn};
use std::sync::atomic::{AtomicU64, Ordering};

static GRAPH_IDS: AtomicU64 = AtomicU64::new(0);

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tensor {
    graph: u64,
    node: usize,
}

impl Tensor {
    pub fn node_id(&self) -> usize {
        self.node
    }
}

/// Operation kinds accepted by [`Graph::forward_op`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpKind {
    Matmul,
    Add,
    Sub,
    Mul,
    Neg,
    Scale(f64),
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
    Log,
    Mean,
    Sum,
    Abs,
}

enum Record {
    Leaf,
    Matmul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Relu(usize),
    LeakyRelu(usize, f64),
    Tanh(usize),
    Sigmoid(usize),
    Log(usize),
    Mean(usize),
    Sum(usize),
    Abs(usize),
    /// `[r,c] + [c]` row broadcast, used for layer biases.
    AddBias(usize, usize),
    Clamp(usize, f64, f64),
    /// Value copy that blocks gradient flow.
    Detach,
}

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
    op: Record,
}

/// Append-only reverse-mode tape.
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            id: GRAPH_IDS.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Record) -> Tensor {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        self.nodes.push(Node {
            shape,
            data,
            grad: None,
            op,
        });
        Tensor {
            graph: self.id,
            node: self.nodes.len() - 1,
        }
    }

    fn check(&self, t: Tensor) -> usize {
        assert_eq!(t.graph, self.id, "tensor belongs to a different graph");
        t.node
    }

    /// Insert an input node.
    pub fn leaf(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || data.len() != expected {
            return Err(Error::DimMismatch(format!(
                "leaf shape {:?} incompatible with {} values",
                shape,
                data.len()
            )));
        }
        Ok(self.push(shape.to_vec(), data, Record::Leaf))
    }

    pub fn scalar(&mut self, v: f64) -> Tensor {
        self.push(vec![1], vec![v], Record::Leaf)
    }

    pub fn shape(&self, t: Tensor) -> &[usize] {
        &self.nodes[self.check(t)].shape
    }

    pub fn data(&self, t: Tensor) -> &[f64] {
        &self.nodes[self.check(t)].data
    }

    /// Value of a scalar-shaped tensor.
    pub fn value(&self, t: Tensor) -> f64 {
        let n = self.check(t);
        debug_assert_eq!(self.nodes[n].data.len(), 1);
        self.nodes[n].data[0]
    }

    /// Gradient populated by [`Graph::backward`]; `None` before the first
    /// backward pass.
    pub fn grad(&self, t: Tensor) -> Option<&[f64]> {
        self.nodes[self.check(t)].grad.as_deref()
    }

    /// Dispatch by kind; the spelled-out methods below do the work.
    pub fn forward_op(&mut self, kind: OpKind, inputs: &[Tensor]) -> Result<Tensor> {
        let unary = |inputs: &[Tensor]| -> Result<Tensor> {
            match inputs {
                [a] => Ok(*a),
                _ => Err(Error::InvalidArg(format!(
                    "op expects 1 input, got {}",
                    inputs.len()
                ))),
            }
        };
        let binary = |inputs: &[Tensor]| -> Result<(Tensor, Tensor)> {
            match inputs {
                [a, b] => Ok((*a, *b)),
                _ => Err(Error::InvalidArg(format!(
                    "op expects 2 inputs, got {}",
                    inputs.len()
                ))),
            }
        };
        match kind {
            OpKind::Matmul => {
                let (a, b) = binary(inputs)?;
                self.matmul(a, b)
            }
            OpKind::Add => {
                let (a, b) = binary(inputs)?;
                self.add(a, b)
            }
            OpKind::Sub => {
                let (a, b) = binary(inputs)?;
                self.sub(a, b)
            }
            OpKind::Mul => {
                let (a, b) = binary(inputs)?;
                self.mul(a, b)
            }
            OpKind::Neg => Ok(self.neg(unary(inputs)?)),
            OpKind::Scale(k) => Ok(self.scale(unary(inputs)?, k)),
            OpKind::Relu => Ok(self.relu(unary(inputs)?)),
            OpKind::LeakyRelu(s) => Ok(self.leaky_relu(unary(inputs)?, s)),
            OpKind::Tanh => Ok(self.tanh(unary(inputs)?)),
            OpKind::Sigmoid => Ok(self.sigmoid(unary(inputs)?)),
            OpKind::Log => self.log(unary(inputs)?),
            OpKind::Mean => Ok(self.mean(unary(inputs)?)),
            OpKind::Sum => Ok(self.sum(unary(inputs)?)),
            OpKind::Abs => Ok(self.abs(unary(inputs)?)),
        }
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (ia, ib) = (self.check(a), self.check(b));
        let (sa, sb) = (&self.nodes[ia].shape, &self.nodes[ib].shape);
        let ([r, k], [k2, c]) = (dims2(sa), dims2(sb));
        if sa.len() != 2 || sb.len() != 2 || k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let data = matmul(&self.nodes[ia].data, &self.nodes[ib].data, r, k, c);
        Ok(self.push(vec![r, c], data, Record::Matmul(ia, ib)))
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.elementwise(a, b, "add", |x, y| x + y, Record::Add)
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.elementwise(a, b, "sub", |x, y| x - y, Record::Sub)
    }

    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.elementwise(a, b, "mul", |x, y| x * y, Record::Mul)
    }

    fn elementwise(
        &mut self,
        a: Tensor,
        b: Tensor,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        rec: impl Fn(usize, usize) -> Record,
    ) -> Result<Tensor> {
        let (ia, ib) = (self.check(a), self.check(b));
        let (sa, sb) = (&self.nodes[ia].shape, &self.nodes[ib].shape);
        let (da, db) = (&self.nodes[ia].data, &self.nodes[ib].data);
        let (shape, data) = if sa == sb {
            (
                sa.clone(),
                da.iter().zip(db).map(|(&x, &y)| f(x, y)).collect(),
            )
        } else if db.len() == 1 {
            let s = db[0];
            (sa.clone(), da.iter().map(|&x| f(x, s)).collect())
        } else if da.len() == 1 {
            let s = da[0];
            (sb.clone(), db.iter().map(|&y| f(s, y)).collect())
        } else {
            return Err(Error::ShapeMismatch {
                op: name,
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        };
        Ok(self.push(shape, data, rec(ia, ib)))
    }

    pub fn neg(&mut self, a: Tensor) -> Tensor {
        self.map_unary(a, |x| -x, Record::Neg)
    }

    pub fn scale(&mut self, a: Tensor, k: f64) -> Tensor {
        self.map_unary(a, |x| k * x, |i| Record::Scale(i, k))
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        self.map_unary(a, |x| if x > 0.0 { x } else { 0.0 }, Record::Relu)
    }

    pub fn leaky_relu(&mut self, a: Tensor, slope: f64) -> Tensor {
        self.map_unary(
            a,
            |x| if x > 0.0 { x } else { slope * x },
            |i| Record::LeakyRelu(i, slope),
        )
    }

    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        self.map_unary(a, f64::tanh, Record::Tanh)
    }

    pub fn sigmoid(&mut self, a: Tensor) -> Tensor {
        self.map_unary(a, |x| 1.0 / (1.0 + (-x).exp()), Record::Sigmoid)
    }

    pub fn log(&mut self, a: Tensor) -> Result<Tensor> {
        let ia = self.check(a);
        if let Some(&bad) = self.nodes[ia].data.iter().find(|&&x| x <= 0.0) {
            return Err(Error::LogDomain { value: bad });
        }
        Ok(self.map_unary(a, f64::ln, Record::Log))
    }

    /// Mean over all elements; result has shape `[1]`.
    pub fn mean(&mut self, a: Tensor) -> Tensor {
        let ia = self.check(a);
        let n = self.nodes[ia].data.len() as f64;
        let v = self.nodes[ia].data.iter().sum::<f64>() / n;
        self.push(vec![1], vec![v], Record::Mean(ia))
    }

    /// Sum over all elements; result has shape `[1]`.
    pub fn sum(&mut self, a: Tensor) -> Tensor {
        let ia = self.check(a);
        let v = self.nodes[ia].data.iter().sum::<f64>();
        self.push(vec![1], vec![v], Record::Sum(ia))
    }

    pub fn abs(&mut self, a: Tensor) -> Tensor {
        self.map_unary(a, f64::abs, Record::Abs)
    }

    /// `[r,c] + [c]` with the bias broadcast across rows.
    pub fn add_bias(&mut self, a: Tensor, bias: Tensor) -> Result<Tensor> {
        let (ia, ib) = (self.check(a), self.check(bias));
        let (sa, sb) = (&self.nodes[ia].shape, &self.nodes[ib].shape);
        let [r, c] = dims2(sa);
        if sa.len() != 2 || sb.len() != 1 || sb[0] != c {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let mut data = self.nodes[ia].data.clone();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] += self.nodes[ib].data[j];
            }
        }
        Ok(self.push(vec![r, c], data, Record::AddBias(ia, ib)))
    }

    /// Clamp to `[lo, hi]`; gradient passes through strictly inside the
    /// interval and is zero where the value was clipped.
    pub fn clamp(&mut self, a: Tensor, lo: f64, hi: f64) -> Tensor {
        self.map_unary(a, |x| x.clamp(lo, hi), |i| Record::Clamp(i, lo, hi))
    }

    /// Copy of `a` through which no gradient flows.
    pub fn detach(&mut self, a: Tensor) -> Tensor {
        let ia = self.check(a);
        let (shape, data) = (self.nodes[ia].shape.clone(), self.nodes[ia].data.clone());
        self.push(shape, data, Record::Detach)
    }

    fn map_unary(
        &mut self,
        a: Tensor,
        f: impl Fn(f64) -> f64,
        rec: impl Fn(usize) -> Record,
    ) -> Tensor {
        let ia = self.check(a);
        let shape = self.nodes[ia].shape.clone();
        let data = self.nodes[ia].data.iter().map(|&x| f(x)).collect();
        self.push(shape, data, rec(ia))
    }

    /// Populate `d(loss)/d(node)` for every node on the tape. Nodes the loss
    /// does not depend on end up with zero gradients.
    pub fn backward(&mut self, loss: Tensor) -> Result<()> {
        let il = self.check(loss);
        if self.nodes[il].shape != [1] {
            return Err(Error::NonScalarLoss {
                shape: self.nodes[il].shape.clone(),
            });
        }
        let mut grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.data.len()])
            .collect();
        grads[il][0] = 1.0;

        for i in (0..self.nodes.len()).rev() {
            // Inputs strictly precede node i on the tape, so taking grads[i]
            // out never aliases an accumulation target.
            let g = std::mem::take(&mut grads[i]);
            match self.nodes[i].op {
                Record::Leaf => {}
                Record::Matmul(a, b) => {
                    let [r, c] = dims2(&self.nodes[i].shape);
                    let k = self.nodes[a].shape[1];
                    let da = matmul_nt(&g, &self.nodes[b].data, r, c, k);
                    let db = matmul_tn(&self.nodes[a].data, &g, k, r, c);
                    acc(&mut grads[a], &da);
                    acc(&mut grads[b], &db);
                }
                Record::Add(a, b) => {
                    self.bcast_acc(&mut grads, a, &g, 1.0, None);
                    self.bcast_acc(&mut grads, b, &g, 1.0, None);
                }
                Record::Sub(a, b) => {
                    self.bcast_acc(&mut grads, a, &g, 1.0, None);
                    self.bcast_acc(&mut grads, b, &g, -1.0, None);
                }
                Record::Mul(a, b) => {
                    self.bcast_acc(&mut grads, a, &g, 1.0, Some(b));
                    self.bcast_acc(&mut grads, b, &g, 1.0, Some(a));
                }
                Record::Neg(a) => {
                    for (ga, &go) in grads[a].iter_mut().zip(&g) {
                        *ga -= go;
                    }
                }
                Record::Scale(a, k) => {
                    for (ga, &go) in grads[a].iter_mut().zip(&g) {
                        *ga += k * go;
                    }
                }
                Record::Relu(a) => {
                    for ((ga, &go), &x) in grads[a].iter_mut().zip(&g).zip(&self.nodes[a].data) {
                        if x > 0.0 {
                            *ga += go;
                        }
                    }
                }
                Record::LeakyRelu(a, s) => {
                    for ((ga, &go), &x) in grads[a].iter_mut().zip(&g).zip(&self.nodes[a].data) {
                        *ga += if x > 0.0 { go } else { s * go };
                    }
                }
                Record::Tanh(a) => {
                    for ((ga, &go), &y) in grads[a].iter_mut().zip(&g).zip(&self.nodes[i].data) {
                        *ga += go * (1.0 - y * y);
                    }
                }
                Record::Sigmoid(a) => {
                    for ((ga, &go), &y) in grads[a].iter_mut().zip(&g).zip(&self.nodes[i].data) {
                        *ga += go * y * (1.0 - y);
                    }
                }
                Record::Log(a) => {
                    for ((ga, &go), &x) in grads[a].iter_mut().zip(&g).zip(&self.nodes[a].data) {
                        *ga += go / x;
                    }
                }
                Record::Mean(a) => {
                    let go = g[0] / grads[a].len() as f64;
                    for ga in grads[a].iter_mut() {
                        *ga += go;
                    }
                }
                Record::Sum(a) => {
                    let go = g[0];
                    for ga in grads[a].iter_mut() {
                        *ga += go;
                    }
                }
                Record::Abs(a) => {
                    // Subgradient convention: sign(0) = 0.
                    for ((ga, &go), &x) in grads[a].iter_mut().zip(&g).zip(&self.nodes[a].data) {
                        *ga += go * sign(x);
                    }
                }
                Record::AddBias(a, b) => {
                    acc(&mut grads[a], &g);
                    let c = grads[b].len();
                    for (idx, &go) in g.iter().enumerate() {
                        grads[b][idx % c] += go;
                    }
                }
                Record::Clamp(a, lo, hi) => {
                    for ((ga, &go), &x) in grads[a].iter_mut().zip(&g).zip(&self.nodes[a].data) {
                        if x > lo && x < hi {
                            *ga += go;
                        }
                    }
                }
                Record::Detach => {}
            }
            grads[i] = g;
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            node.grad = Some(g);
        }
        Ok(())
    }

    /// Accumulate `scale * g * (other or 1)` into `grads[target]`, reducing
    /// over the broadcast when the target is a scalar.
    fn bcast_acc(
        &self,
        grads: &mut [Vec<f64>],
        target: usize,
        g: &[f64],
        scale: f64,
        factor: Option<usize>,
    ) {
        let contrib = |idx: usize| -> f64 {
            let f = match factor {
                Some(o) => {
                    let od = &self.nodes[o].data;
                    if od.len() == 1 {
                        od[0]
                    } else {
                        od[idx]
                    }
                }
                None => 1.0,
            };
            scale * g[idx] * f
        };
        if grads[target].len() == g.len() {
            for idx in 0..g.len() {
                grads[target][idx] += contrib(idx);
            }
        } else {
            debug_assert_eq!(grads[target].len(), 1);
            let mut s = 0.0;
            for idx in 0..g.len() {
                s += contrib(idx);
            }
            grads[target][0] += s;
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn acc(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// First two dims, tolerating 1-D shapes for error paths.
fn dims2(shape: &[usize]) -> [usize; 2] {
    match *shape {
        [r, c] => [r, c],
        [n] => [n, 1],
        _ => [0, 0],
    }
}

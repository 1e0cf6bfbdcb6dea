//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Graph`] borrows a [`ParamStore`] and records every operation applied
//! during a forward pass. [`Graph::backward`] walks the tape in reverse and
//! returns the gradient of a scalar node with respect to every parameter
//! that took part in the computation.
//!
//! Embedding rows fetched with [`Graph::lookup`] produce row-sparse
//! gradients so the optimizer only touches the rows that were used.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::params::{ParamId, ParamStore};
use super::tensor::{log_sum_exp, sigmoid, Float, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// An operation whose forward value is computed by the caller and whose
/// backward pass is supplied through this trait.
pub trait CustomOp {
    fn name(&self) -> &'static str;

    /// Gradients with respect to each input, given the upstream gradient
    /// of the output.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Vec<Tensor>;
}

enum Op {
    Constant,
    Param(ParamId),
    Lookup { param: ParamId, row: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine { x: Var, scale: Float },
    MulConst { x: Var, factor: Vec<Float> },
    MatVec { w: Var, x: Var },
    MatMul { a: Var, b: Var },
    MatMulT { a: Var, b: Var },
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu { x: Var, slope: Float },
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    StackRows(Vec<Var>),
    Row { x: Var, i: usize },
    Softmax(Var),
    VecMat { x: Var, m: Var },
    Bilinear { u: Var, w: Var, v: Var },
    Sum(Vec<Var>),
    Dot(Var, Var),
    CrossEntropy { logits: Var, gold: usize, exclude: Option<usize> },
    Custom { inputs: Vec<Var>, op: Box<dyn CustomOp> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::Lookup { .. } => "lookup",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Affine { .. } => "affine",
            Op::MulConst { .. } => "mul_const",
            Op::MatVec { .. } => "matvec",
            Op::MatMul { .. } => "matmul",
            Op::MatMulT { .. } => "matmul_t",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::LeakyRelu { .. } => "leaky_relu",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::StackRows(_) => "stack_rows",
            Op::Row { .. } => "row",
            Op::Softmax(_) => "softmax",
            Op::VecMat { .. } => "vecmat",
            Op::Bilinear { .. } => "bilinear",
            Op::Sum(_) => "sum",
            Op::Dot(..) => "dot",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::Custom { op, .. } => op.name(),
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradient of one parameter. `rows` lists the touched rows when only
/// embedding lookups reached the parameter.
#[derive(Clone, Debug)]
pub struct Grad {
    pub tensor: Tensor,
    pub rows: Option<BTreeSet<usize>>,
}

#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Grad>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Grad> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Grad)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Adds `other` into `self`.
    pub fn accumulate(&mut self, other: Gradients) {
        for (id, g) in other.grads {
            match self.grads.get_mut(&id) {
                None => {
                    self.grads.insert(id, g);
                }
                Some(mine) => {
                    mine.tensor.add_assign(&g.tensor);
                    mine.rows = match (mine.rows.take(), g.rows) {
                        (Some(mut a), Some(b)) => {
                            a.extend(b);
                            Some(a)
                        }
                        _ => None,
                    };
                }
            }
        }
    }

    pub fn scale(&mut self, c: Float) {
        for g in self.grads.values_mut() {
            g.tensor.data_mut().iter_mut().for_each(|v| *v *= c);
        }
    }

    /// Dense view of a parameter's gradient, zeros when it was not reached.
    pub fn dense(&self, id: ParamId, store: &ParamStore) -> Tensor {
        self.grads
            .get(&id)
            .map(|g| g.tensor.clone())
            .unwrap_or_else(|| Tensor::zeros(store.get(id).shape()))
    }
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    bound: HashMap<ParamId, Var>,
    nonfinite: Option<&'static str>,
}

fn mat_dims(t: &Tensor) -> (usize, usize) {
    match t.shape() {
        [r, c] => (*r, *c),
        s => panic!("expected a matrix, got shape {s:?}"),
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            bound: HashMap::new(),
            nonfinite: None,
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        if self.nonfinite.is_none() && !value.is_finite() {
            self.nonfinite = Some(op.name());
        }
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Value of a one-element node.
    pub fn scalar(&self, v: Var) -> Float {
        self.nodes[v.0].value.data()[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fails if any recorded value was NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        match self.nonfinite {
            Some(op) => Err(Error::NonFinite(op.to_string())),
            None => Ok(()),
        }
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn input(&mut self, data: Vec<Float>) -> Var {
        self.constant(Tensor::vector(data))
    }

    /// Binds a whole parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let v = self.push(self.params.get(id).clone(), Op::Param(id));
        self.bound.insert(id, v);
        v
    }

    /// Fetches row `row` of a matrix parameter as a vector.
    pub fn lookup(&mut self, param: ParamId, row: usize) -> Var {
        let value = Tensor::vector(self.params.get(param).row(row).to_vec());
        self.push(value, Op::Lookup { param, row })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "add shape mismatch");
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect();
        let value = Tensor::new(x.shape().to_vec(), data).unwrap();
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "sub shape mismatch");
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p - q).collect();
        let value = Tensor::new(x.shape().to_vec(), data).unwrap();
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "mul shape mismatch");
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let value = Tensor::new(x.shape().to_vec(), data).unwrap();
        self.push(value, Op::Mul(a, b))
    }

    /// `scale · x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: Float, shift: Float) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|v| scale * v + shift).collect();
        let value = Tensor::new(t.shape().to_vec(), data).unwrap();
        self.push(value, Op::Affine { x, scale })
    }

    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 1.0)
    }

    /// Elementwise product with a constant vector (dropout masks).
    pub fn mul_const(&mut self, x: Var, factor: Vec<Float>) -> Var {
        let t = self.value(x);
        assert_eq!(t.len(), factor.len(), "mul_const length mismatch");
        let data = t.data().iter().zip(&factor).map(|(a, b)| a * b).collect();
        let value = Tensor::new(t.shape().to_vec(), data).unwrap();
        self.push(value, Op::MulConst { x, factor })
    }

    /// Matrix `[m, n]` times vector `[n]`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (m, n) = mat_dims(self.value(w));
        let xv = self.value(x).data();
        assert_eq!(xv.len(), n, "matvec: matrix has {n} columns, vector {}", xv.len());
        let wt = self.value(w);
        let out = (0..m)
            .map(|i| wt.row(i).iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        self.push(Tensor::vector(out), Op::MatVec { w, x })
    }

    /// Row vector `[m]` times matrix `[m, n]`.
    pub fn vecmat(&mut self, x: Var, mat: Var) -> Var {
        let (m, n) = mat_dims(self.value(mat));
        let xv = self.value(x).data();
        assert_eq!(xv.len(), m, "vecmat length mismatch");
        let mt = self.value(mat);
        let mut out = vec![0.0; n];
        for (i, &xi) in xv.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(mt.row(i)) {
                *o += xi * w;
            }
        }
        self.push(Tensor::vector(out), Op::VecMat { x, m: mat })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = mat_dims(self.value(a));
        let (k2, n) = mat_dims(self.value(b));
        assert_eq!(k, k2, "matmul inner dimension mismatch");
        let (at, bt) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for l in 0..k {
                let ail = at.get(i, l);
                if ail == 0.0 {
                    continue;
                }
                for (o, bv) in out[i * n..(i + 1) * n].iter_mut().zip(bt.row(l)) {
                    *o += ail * bv;
                }
            }
        }
        self.push(Tensor::new(vec![m, n], out).unwrap(), Op::MatMul { a, b })
    }

    /// `a · bᵀ` for `a: [m, k]`, `b: [n, k]`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = mat_dims(self.value(a));
        let (n, k2) = mat_dims(self.value(b));
        assert_eq!(k, k2, "matmul_t inner dimension mismatch");
        let (at, bt) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                out.push(at.row(i).iter().zip(bt.row(j)).map(|(p, q)| p * q).sum());
            }
        }
        self.push(Tensor::new(vec![m, n], out).unwrap(), Op::MatMulT { a, b })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| sigmoid(v)).collect();
        let value = Tensor::new(t.shape().to_vec(), data).unwrap();
        self.push(value, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|v| v.tanh()).collect();
        let value = Tensor::new(t.shape().to_vec(), data).unwrap();
        self.push(value, Op::Tanh(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: Float) -> Var {
        let t = self.value(x);
        let data = t
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { slope * v })
            .collect();
        let value = Tensor::new(t.shape().to_vec(), data).unwrap();
        self.push(value, Op::LeakyRelu { x, slope })
    }

    /// Concatenates vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        self.push(Tensor::vector(data), Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let data = self.value(x).data()[start..start + len].to_vec();
        self.push(Tensor::vector(data), Op::Slice { x, start })
    }

    /// Stacks equally long vectors into a `[rows.len(), d]` matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Var {
        let d = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(d * rows.len());
        for &r in rows {
            let v = self.value(r).data();
            assert_eq!(v.len(), d, "stack_rows: ragged rows");
            data.extend_from_slice(v);
        }
        let value = Tensor::new(vec![rows.len(), d], data).unwrap();
        self.push(value, Op::StackRows(rows.to_vec()))
    }

    pub fn row(&mut self, x: Var, i: usize) -> Var {
        let data = self.value(x).row(i).to_vec();
        self.push(Tensor::vector(data), Op::Row { x, i })
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let p = super::tensor::softmax(self.value(x).data());
        self.push(Tensor::vector(p), Op::Softmax(x))
    }

    /// `s_l = Σ_ij u_i · w[l, i, j] · v_j` for a `[L, p, q]` tensor.
    pub fn bilinear(&mut self, u: Var, w: Var, v: Var) -> Var {
        let wt = self.value(w);
        let (labels, p, q) = match wt.shape() {
            [l, p, q] => (*l, *p, *q),
            s => panic!("bilinear expects a 3-tensor, got {s:?}"),
        };
        let (uv, vv) = (self.value(u).data(), self.value(v).data());
        assert_eq!(uv.len(), p, "bilinear: left vector length");
        assert_eq!(vv.len(), q, "bilinear: right vector length");
        let wd = wt.data();
        let out = (0..labels)
            .map(|l| {
                let mut s = 0.0;
                for (i, ui) in uv.iter().enumerate() {
                    let base = (l * p + i) * q;
                    let inner: Float = wd[base..base + q].iter().zip(vv).map(|(a, b)| a * b).sum();
                    s += ui * inner;
                }
                s
            })
            .collect();
        self.push(Tensor::vector(out), Op::Bilinear { u, w, v })
    }

    /// Elementwise sum of equally shaped nodes.
    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let mut acc = self.value(xs[0]).clone();
        for &x in &xs[1..] {
            assert_eq!(self.value(x).shape(), acc.shape(), "sum shape mismatch");
            acc.add_assign(self.value(x));
        }
        self.push(acc, Op::Sum(xs.to_vec()))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a).data(), self.value(b).data());
        assert_eq!(x.len(), y.len(), "dot length mismatch");
        let s = x.iter().zip(y).map(|(p, q)| p * q).sum();
        self.push(Tensor::scalar(s), Op::Dot(a, b))
    }

    /// `-log softmax(logits)[gold]`, with `exclude` removed from the support.
    pub fn cross_entropy(&mut self, logits: Var, gold: usize, exclude: Option<usize>) -> Var {
        let xs = self.value(logits).data();
        assert!(gold < xs.len() && Some(gold) != exclude, "invalid gold index");
        let support: Vec<Float> = xs
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(_, &v)| v)
            .collect();
        let loss = log_sum_exp(&support) - xs[gold];
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                gold,
                exclude,
            },
        )
    }

    /// Records an externally computed node with a custom backward pass.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, op: Box<dyn CustomOp>) -> Var {
        self.push(
            value,
            Op::Custom {
                inputs: inputs.to_vec(),
                op,
            },
        )
    }

    /// Inverted dropout: zero each element with probability `rate` and
    /// scale survivors by `1 / (1 - rate)`. Identity when `rng` is `None`
    /// or `rate` is zero.
    pub fn dropout<R: rand::Rng>(&mut self, x: Var, rate: Float, rng: Option<&mut R>) -> Var {
        match rng {
            Some(rng) if rate > 0.0 => {
                let mask = dropout_mask(self.value(x).len(), rate, rng);
                self.mul_const(x, mask)
            }
            _ => x,
        }
    }

    /// Gradients of the scalar node `loss` with respect to all parameters
    /// reachable from it.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar loss");
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut acc = |v: Var, delta: &[Float]| {
                let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(self.nodes[v.0].value.shape()));
                for (s, d) in slot.data_mut().iter_mut().zip(delta) {
                    *s += d;
                }
            };
            let gd = g.data();
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let entry = out.grads.entry(*id).or_insert_with(|| Grad {
                        tensor: Tensor::zeros(self.params.get(*id).shape()),
                        rows: Some(BTreeSet::new()),
                    });
                    entry.tensor.add_assign(&g);
                    entry.rows = None;
                }
                Op::Lookup { param, row } => {
                    let entry = out.grads.entry(*param).or_insert_with(|| Grad {
                        tensor: Tensor::zeros(self.params.get(*param).shape()),
                        rows: Some(BTreeSet::new()),
                    });
                    for (s, d) in entry.tensor.row_mut(*row).iter_mut().zip(gd) {
                        *s += d;
                    }
                    if let Some(rows) = entry.rows.as_mut() {
                        rows.insert(*row);
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, gd);
                    acc(*b, gd);
                }
                Op::Sub(a, b) => {
                    acc(*a, gd);
                    let neg: Vec<Float> = gd.iter().map(|v| -v).collect();
                    acc(*b, &neg);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    let ga: Vec<Float> = gd.iter().zip(bv).map(|(g, y)| g * y).collect();
                    let gb: Vec<Float> = gd.iter().zip(av).map(|(g, x)| g * x).collect();
                    acc(*a, &ga);
                    acc(*b, &gb);
                }
                Op::Affine { x, scale } => {
                    let gx: Vec<Float> = gd.iter().map(|g| g * scale).collect();
                    acc(*x, &gx);
                }
                Op::MulConst { x, factor } => {
                    let gx: Vec<Float> = gd.iter().zip(factor).map(|(g, f)| g * f).collect();
                    acc(*x, &gx);
                }
                Op::MatVec { w, x } => {
                    let (wt, xv) = (self.value(*w), self.value(*x).data());
                    let (m, n) = mat_dims(wt);
                    let mut gw = vec![0.0; m * n];
                    let mut gx = vec![0.0; n];
                    for i in 0..m {
                        let gi = gd[i];
                        if gi == 0.0 {
                            continue;
                        }
                        let wr = wt.row(i);
                        for j in 0..n {
                            gw[i * n + j] = gi * xv[j];
                            gx[j] += wr[j] * gi;
                        }
                    }
                    acc(*w, &gw);
                    acc(*x, &gx);
                }
                Op::VecMat { x, m: mat } => {
                    let (mt, xv) = (self.value(*mat), self.value(*x).data());
                    let (m, n) = mat_dims(mt);
                    let mut gm = vec![0.0; m * n];
                    let mut gx = vec![0.0; m];
                    for i in 0..m {
                        let mr = mt.row(i);
                        for j in 0..n {
                            gm[i * n + j] = xv[i] * gd[j];
                            gx[i] += mr[j] * gd[j];
                        }
                    }
                    acc(*x, &gx);
                    acc(*mat, &gm);
                }
                Op::MatMul { a, b } => {
                    let (at, bt) = (self.value(*a), self.value(*b));
                    let (m, k) = mat_dims(at);
                    let (_, n) = mat_dims(bt);
                    // gA = G Bᵀ, gB = Aᵀ G
                    let mut ga = vec![0.0; m * k];
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        let grow = &gd[i * n..(i + 1) * n];
                        for l in 0..k {
                            let brow = bt.row(l);
                            ga[i * k + l] = grow.iter().zip(brow).map(|(p, q)| p * q).sum();
                            let ail = at.get(i, l);
                            for j in 0..n {
                                gb[l * n + j] += ail * grow[j];
                            }
                        }
                    }
                    acc(*a, &ga);
                    acc(*b, &gb);
                }
                Op::MatMulT { a, b } => {
                    let (at, bt) = (self.value(*a), self.value(*b));
                    let (m, k) = mat_dims(at);
                    let (n, _) = mat_dims(bt);
                    // gA = G B, gB = Gᵀ A
                    let mut ga = vec![0.0; m * k];
                    let mut gb = vec![0.0; n * k];
                    for i in 0..m {
                        for j in 0..n {
                            let gij = gd[i * n + j];
                            if gij == 0.0 {
                                continue;
                            }
                            let (arow, brow) = (at.row(i), bt.row(j));
                            for l in 0..k {
                                ga[i * k + l] += gij * brow[l];
                                gb[j * k + l] += gij * arow[l];
                            }
                        }
                    }
                    acc(*a, &ga);
                    acc(*b, &gb);
                }
                Op::Sigmoid(x) => {
                    let y = node.value.data();
                    let gx: Vec<Float> = gd.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect();
                    acc(*x, &gx);
                }
                Op::Tanh(x) => {
                    let y = node.value.data();
                    let gx: Vec<Float> = gd.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect();
                    acc(*x, &gx);
                }
                Op::LeakyRelu { x, slope } => {
                    let xv = self.value(*x).data();
                    let gx: Vec<Float> = gd
                        .iter()
                        .zip(xv)
                        .map(|(g, &v)| if v > 0.0 { *g } else { g * slope })
                        .collect();
                    acc(*x, &gx);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        acc(*p, &gd[off..off + n]);
                        off += n;
                    }
                }
                Op::Slice { x, start } => {
                    let mut gx = vec![0.0; self.value(*x).len()];
                    gx[*start..start + gd.len()].copy_from_slice(gd);
                    acc(*x, &gx);
                }
                Op::StackRows(rows) => {
                    let d = node.value.cols();
                    for (i, r) in rows.iter().enumerate() {
                        acc(*r, &gd[i * d..(i + 1) * d]);
                    }
                }
                Op::Row { x, i } => {
                    let xt = self.value(*x);
                    let d = xt.cols();
                    let mut gx = vec![0.0; xt.len()];
                    gx[i * d..(i + 1) * d].copy_from_slice(gd);
                    acc(*x, &gx);
                }
                Op::Softmax(x) => {
                    let y = node.value.data();
                    let gy: Float = gd.iter().zip(y).map(|(g, y)| g * y).sum();
                    let gx: Vec<Float> = gd.iter().zip(y).map(|(g, y)| y * (g - gy)).collect();
                    acc(*x, &gx);
                }
                Op::Bilinear { u, w, v } => {
                    let wt = self.value(*w);
                    let (labels, p, q) = match wt.shape() {
                        [l, p, q] => (*l, *p, *q),
                        _ => unreachable!(),
                    };
                    let (uv, vv, wd) = (self.value(*u).data(), self.value(*v).data(), wt.data());
                    let mut gu = vec![0.0; p];
                    let mut gv = vec![0.0; q];
                    let mut gw = vec![0.0; labels * p * q];
                    for l in 0..labels {
                        let gl = gd[l];
                        if gl == 0.0 {
                            continue;
                        }
                        for i in 0..p {
                            let base = (l * p + i) * q;
                            let wrow = &wd[base..base + q];
                            gu[i] += gl * wrow.iter().zip(vv).map(|(a, b)| a * b).sum::<Float>();
                            for j in 0..q {
                                gv[j] += gl * uv[i] * wrow[j];
                                gw[base + j] = gl * uv[i] * vv[j];
                            }
                        }
                    }
                    acc(*u, &gu);
                    acc(*w, &gw);
                    acc(*v, &gv);
                }
                Op::Sum(xs) => {
                    for x in xs {
                        acc(*x, gd);
                    }
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    let ga: Vec<Float> = bv.iter().map(|y| gd[0] * y).collect();
                    let gb: Vec<Float> = av.iter().map(|x| gd[0] * x).collect();
                    acc(*a, &ga);
                    acc(*b, &gb);
                }
                Op::CrossEntropy {
                    logits,
                    gold,
                    exclude,
                } => {
                    let xs = self.value(*logits).data();
                    let support: Vec<Float> = xs
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| if Some(i) == *exclude { Float::NEG_INFINITY } else { v })
                        .collect();
                    let lse = log_sum_exp(&support);
                    let mut gx: Vec<Float> = support.iter().map(|v| gd[0] * (v - lse).exp()).collect();
                    gx[*gold] -= gd[0];
                    acc(*logits, &gx);
                }
                Op::Custom { inputs, op } => {
                    let ins: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
                    let gs = op.backward(&ins, &node.value, &g);
                    for (v, gi) in inputs.iter().zip(gs) {
                        acc(*v, gi.data());
                    }
                }
            }
        }
        out
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<R: rand::Rng>(len: usize, rate: Float, rng: &mut R) -> Vec<Float> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| {
            if (rng.random::<f64>() as Float) < rate {
                0.0
            } else {
                keep
            }
        })
        .collect()
}

//! Tensor-level reverse-mode tape.
//!
//! Every operation appends one node holding its forward value. Parameters are
//! referenced by id instead of copied, and their gradients are routed straight
//! into a [`Gradients`] accumulator during the backward sweep, so embedding
//! tables and large weight matrices never get per-node gradient buffers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::kernels::{axpy, dot};
use super::{Gradients, ParamId, ParamSet, Tensor};

/// SeLU scale.
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
/// SeLU negative saturation.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Input,
    Param(ParamId),
    MatMul { m: usize, n: usize, p: usize },
    Affine { rows: usize, cols: usize },
    Add,
    Sub,
    Mul,
    Scale(T),
    Concat,
    Slice { start: usize },
    GatherRow { row: usize, width: usize },
    Sigmoid,
    LogSigmoid,
    Tanh,
    Selu,
    Softmax { width: usize },
    LogSoftmax { width: usize },
    ClampMin(T),
    Sum,
    WeightedSum,
    LstmStep { input: usize, hidden: usize },
}

#[derive(Clone, Debug)]
struct Node<T> {
    op: Op<T>,
    parents: Vec<usize>,
    shape: Vec<usize>,
    value: Vec<T>,
    /// Op-specific cache: softmax outputs, LSTM gate activations, weights.
    aux: Vec<T>,
}

/// Counters collected during [`Tape::backward`].
#[derive(Clone, Debug, Default)]
pub struct BackwardStats {
    /// Per node, how many times the reverse sweep processed it.
    pub visits: Vec<u32>,
    /// Nodes reachable from the root.
    pub reached: usize,
}

/// Append-only record of a forward computation.
pub struct Tape<'p, T> {
    params: &'p ParamSet<T>,
    nodes: Vec<Node<T>>,
    param_vars: Vec<Option<Var>>,
}

fn value<'a, T: Scalar>(nodes: &'a [Node<T>], params: &'a ParamSet<T>, i: usize) -> &'a [T] {
    match nodes[i].op {
        Op::Param(id) => params.get(id).data(),
        _ => &nodes[i].value,
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn selu<T: Scalar>(x: T) -> T {
    let lambda = T::lit(SELU_LAMBDA);
    if x > T::zero() {
        lambda * x
    } else {
        lambda * T::lit(SELU_ALPHA) * x.exp_m1()
    }
}

fn check_finite<T: Scalar>(xs: &[T], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite input to {what}")))
    }
}

fn softmax_row<T: Scalar>(x: &[T], out: &mut [T]) {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamSet<T>) -> Self {
        Self { params, nodes: Vec::with_capacity(256), param_vars: vec![None; params.len()] }
    }

    pub fn params(&self) -> &'p ParamSet<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, parents: Vec<usize>, shape: Vec<usize>, value: Vec<T>, aux: Vec<T>) -> Var {
        debug_assert!(parents.iter().all(|&p| p < self.nodes.len()));
        self.nodes.push(Node { op, parents, shape, value, aux });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[T] {
        value(&self.nodes, self.params, v.0)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        match self.nodes[v.0].op {
            Op::Param(id) => self.params.get(id).shape(),
            _ => &self.nodes[v.0].shape,
        }
    }

    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    fn len_of(&self, v: Var) -> usize {
        self.value(v).len()
    }

    /// Records a constant; no gradient flows into it.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        let shape = t.shape().to_vec();
        self.push(Op::Input, vec![], shape, t.into_data(), vec![])
    }

    pub fn input_vec(&mut self, data: Vec<T>) -> Var {
        let shape = vec![data.len()];
        self.push(Op::Input, vec![], shape, data, vec![])
    }

    /// Leaf for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.index()] {
            return v;
        }
        let v = self.push(Op::Param(id), vec![], vec![], vec![], vec![]);
        self.param_vars[id.index()] = Some(v);
        v
    }

    /// Matrix product of `a` (`m×n`) and `b` (`n×p`, or a length-`n` vector).
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.is_empty() || sb.len() > 2 || sa[1] != sb[0] {
            return Err(Error::shape(format!("matmul of {sa:?} and {sb:?}")));
        }
        let (m, n) = (sa[0], sa[1]);
        let p = if sb.len() == 2 { sb[1] } else { 1 };
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![T::zero(); m * p];
        for i in 0..m {
            let arow = &av[i * n..(i + 1) * n];
            let orow = &mut out[i * p..(i + 1) * p];
            for (k, &aik) in arow.iter().enumerate() {
                axpy(aik, &bv[k * p..(k + 1) * p], orow);
            }
        }
        let shape = if sb.len() == 2 { vec![m, p] } else { vec![m] };
        Ok(self.push(Op::MatMul { m, n, p }, vec![a.0, b.0], shape, out, vec![]))
    }

    /// `w · x + b` for `w: rows×cols`, `x: cols`, `b: rows`.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var> {
        let sw = self.shape(w).to_vec();
        let (lx, lb) = (self.len_of(x), self.len_of(b));
        if sw.len() != 2 || sw[1] != lx || sw[0] != lb {
            return Err(Error::shape(format!("affine with weight {sw:?}, input [{lx}], bias [{lb}]")));
        }
        let (rows, cols) = (sw[0], sw[1]);
        let (wv, xv, bv) = (self.value(w), self.value(x), self.value(b));
        let out: Vec<T> = (0..rows).map(|r| dot(&wv[r * cols..(r + 1) * cols], xv) + bv[r]).collect();
        Ok(self.push(Op::Affine { rows, cols }, vec![w.0, x.0, b.0], vec![rows], out, vec![]))
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T, name: &str) -> Result<Var> {
        let (la, lb) = (self.len_of(a), self.len_of(b));
        if la != lb {
            return Err(Error::shape(format!(
                "{name} of {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(op, vec![a.0, b.0], shape, out, vec![]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add, |x, y| x + y, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub, |x, y| x - y, "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul, |x, y| x * y, "mul")
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).iter().map(|&x| x * c).collect();
        let shape = self.shape(a).to_vec();
        self.push(Op::Scale(c), vec![a.0], shape, out, vec![])
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::with_capacity(parts.iter().map(|&p| self.len_of(p)).sum());
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let shape = vec![out.len()];
        self.push(Op::Concat, parts.iter().map(|p| p.0).collect(), shape, out, vec![])
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let total = self.len_of(a);
        if len == 0 || start + len > total {
            return Err(Error::shape(format!("slice [{start}, {}) of length-{total} tensor", start + len)));
        }
        let out = self.value(a)[start..start + len].to_vec();
        Ok(self.push(Op::Slice { start }, vec![a.0], vec![len], out, vec![]))
    }

    /// Row `row` of a 2-D tensor (embedding lookup).
    pub fn gather_row(&mut self, table: Var, row: usize) -> Result<Var> {
        let s = self.shape(table).to_vec();
        if s.len() != 2 || row >= s[0] {
            return Err(Error::shape(format!("row {row} of table {s:?}")));
        }
        let width = s[1];
        let out = self.value(table)[row * width..(row + 1) * width].to_vec();
        Ok(self.push(Op::GatherRow { row, width }, vec![table.0], vec![width], out, vec![]))
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(op, vec![a.0], shape, out, vec![])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid, sigmoid)
    }

    /// `ln σ(a)`, computed without overflow.
    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::LogSigmoid, |x| {
            if x >= T::zero() {
                -(-x).exp().ln_1p()
            } else {
                x - x.exp().ln_1p()
            }
        })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh, T::tanh)
    }

    pub fn selu(&mut self, a: Var) -> Result<Var> {
        check_finite(self.value(a), "selu")?;
        Ok(self.unary(a, Op::Selu, selu))
    }

    /// Softmax over the whole tensor.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let w = self.len_of(a);
        self.softmax_rows(a, w)
    }

    /// Softmax over consecutive groups of `width` entries.
    pub fn softmax_rows(&mut self, a: Var, width: usize) -> Result<Var> {
        let x = self.value(a);
        if width == 0 || x.len() % width != 0 {
            return Err(Error::shape(format!("softmax rows of width {width} over {} entries", x.len())));
        }
        check_finite(x, "softmax")?;
        let mut out = vec![T::zero(); x.len()];
        for (xr, or) in x.chunks(width).zip(out.chunks_mut(width)) {
            softmax_row(xr, or);
        }
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::Softmax { width }, vec![a.0], shape, out, vec![]))
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let w = self.len_of(a);
        self.log_softmax_rows(a, w)
    }

    pub fn log_softmax_rows(&mut self, a: Var, width: usize) -> Result<Var> {
        let x = self.value(a);
        if width == 0 || x.len() % width != 0 {
            return Err(Error::shape(format!("log-softmax rows of width {width} over {} entries", x.len())));
        }
        check_finite(x, "log_softmax")?;
        let mut probs = vec![T::zero(); x.len()];
        let mut out = vec![T::zero(); x.len()];
        for ((xr, pr), or) in x.chunks(width).zip(probs.chunks_mut(width)).zip(out.chunks_mut(width)) {
            let max = xr.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = max + xr.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            for ((o, p), &v) in or.iter_mut().zip(pr.iter_mut()).zip(xr) {
                *o = v - lse;
                *p = o.exp();
            }
        }
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::LogSoftmax { width }, vec![a.0], shape, out, probs))
    }

    /// `max(a, floor)`; gradient flows only where `a > floor`.
    pub fn clamp_min(&mut self, a: Var, floor: T) -> Var {
        self.unary(a, Op::ClampMin(floor), |x| x.max(floor))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        self.push(Op::Sum, vec![a.0], vec![1], vec![s], vec![])
    }

    /// `Σ wᵢ aᵢ` with constant weights.
    pub fn weighted_sum(&mut self, a: Var, weights: Vec<T>) -> Result<Var> {
        if weights.len() != self.len_of(a) {
            return Err(Error::shape(format!(
                "weighted sum of {} weights over {:?}",
                weights.len(),
                self.shape(a)
            )));
        }
        let s = dot(self.value(a), &weights);
        Ok(self.push(Op::WeightedSum, vec![a.0], vec![1], vec![s], weights))
    }

    /// One LSTM cell update.
    ///
    /// `state` packs `[h | c]` (length `2·hidden`), `w` is `4·hidden × (input + hidden)`
    /// with gate blocks ordered input, forget, candidate, output, and `b` is
    /// `4·hidden`. Returns the new packed state.
    pub fn lstm_step(&mut self, x: Var, state: Var, w: Var, b: Var) -> Result<Var> {
        let sw = self.shape(w).to_vec();
        let (lx, ls, lb) = (self.len_of(x), self.len_of(state), self.len_of(b));
        let hidden = ls / 2;
        if ls % 2 != 0 || sw.len() != 2 || sw[0] != 4 * hidden || sw[1] != lx + hidden || lb != 4 * hidden {
            return Err(Error::shape(format!(
                "lstm step with input [{lx}], state [{ls}], weight {sw:?}, bias [{lb}]"
            )));
        }
        let input = lx;
        let cols = input + hidden;
        let (xv, sv, wv, bv) = (self.value(x), self.value(state), self.value(w), self.value(b));
        let (h_prev, c_prev) = sv.split_at(hidden);
        let mut z = vec![T::zero(); 4 * hidden];
        for (r, zr) in z.iter_mut().enumerate() {
            let row = &wv[r * cols..(r + 1) * cols];
            *zr = dot(&row[..input], xv) + dot(&row[input..], h_prev) + bv[r];
        }
        // aux = [i | f | g | o | tanh(c)]
        let mut aux = vec![T::zero(); 5 * hidden];
        let mut out = vec![T::zero(); 2 * hidden];
        for j in 0..hidden {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[hidden + j]);
            let g = z[2 * hidden + j].tanh();
            let o = sigmoid(z[3 * hidden + j]);
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            out[j] = o * tc;
            out[hidden + j] = c;
            aux[j] = i;
            aux[hidden + j] = f;
            aux[2 * hidden + j] = g;
            aux[3 * hidden + j] = o;
            aux[4 * hidden + j] = tc;
        }
        Ok(self.push(
            Op::LstmStep { input, hidden },
            vec![x.0, state.0, w.0, b.0],
            vec![2 * hidden],
            out,
            aux,
        ))
    }

    /// Propagates `d root = 1` back through the tape, adding parameter
    /// gradients into `grads`. `root` must be a single-element node.
    pub fn backward(self, root: Var, grads: &mut Gradients<T>) -> Result<BackwardStats> {
        let Tape { params, nodes, .. } = self;
        if value(&nodes, params, root.0).len() != 1 {
            return Err(Error::shape("backward from a non-scalar node"));
        }
        if grads.bufs.len() != params.len() {
            return Err(Error::contract("gradient accumulator built for a different parameter set"));
        }
        let mut sink = Sink {
            node_grads: vec![Vec::new(); root.0 + 1],
            reached: vec![false; root.0 + 1],
            grads,
        };
        sink.node_grads[root.0] = vec![T::one()];
        sink.reached[root.0] = true;
        let mut stats = BackwardStats { visits: vec![0; nodes.len()], reached: 0 };

        for idx in (0..=root.0).rev() {
            if !sink.reached[idx] {
                continue;
            }
            stats.visits[idx] += 1;
            stats.reached += 1;
            let node = &nodes[idx];
            if matches!(node.op, Op::Input | Op::Param(_)) {
                continue;
            }
            let g = std::mem::take(&mut sink.node_grads[idx]);
            let pv = |k: usize| value(&nodes, params, node.parents[k]);
            let par = &node.parents;
            match node.op {
                Op::Input | Op::Param(_) => unreachable!(),
                Op::MatMul { m, n, p } => {
                    let (av, bv) = (pv(0), pv(1));
                    sink.with(par[0], &nodes, params, |da| {
                        for i in 0..m {
                            let grow = &g[i * p..(i + 1) * p];
                            for k in 0..n {
                                da[i * n + k] = da[i * n + k] + dot(grow, &bv[k * p..(k + 1) * p]);
                            }
                        }
                    });
                    sink.with(par[1], &nodes, params, |db| {
                        for i in 0..m {
                            let grow = &g[i * p..(i + 1) * p];
                            for k in 0..n {
                                axpy(av[i * n + k], grow, &mut db[k * p..(k + 1) * p]);
                            }
                        }
                    });
                }
                Op::Affine { rows, cols } => {
                    let (wv, xv) = (pv(0), pv(1));
                    sink.with(par[0], &nodes, params, |dw| {
                        for (r, &gr) in g.iter().enumerate() {
                            axpy(gr, xv, &mut dw[r * cols..(r + 1) * cols]);
                        }
                    });
                    sink.with(par[1], &nodes, params, |dx| {
                        for (r, &gr) in g.iter().enumerate().take(rows) {
                            axpy(gr, &wv[r * cols..(r + 1) * cols], dx);
                        }
                    });
                    sink.with(par[2], &nodes, params, |db| axpy(T::one(), &g, db));
                }
                Op::Add => {
                    sink.with(par[0], &nodes, params, |d| axpy(T::one(), &g, d));
                    sink.with(par[1], &nodes, params, |d| axpy(T::one(), &g, d));
                }
                Op::Sub => {
                    sink.with(par[0], &nodes, params, |d| axpy(T::one(), &g, d));
                    sink.with(par[1], &nodes, params, |d| axpy(-T::one(), &g, d));
                }
                Op::Mul => {
                    let (av, bv) = (pv(0), pv(1));
                    sink.with(par[0], &nodes, params, |d| {
                        for ((d, &gi), &b) in d.iter_mut().zip(&g).zip(bv) {
                            *d = *d + gi * b;
                        }
                    });
                    sink.with(par[1], &nodes, params, |d| {
                        for ((d, &gi), &a) in d.iter_mut().zip(&g).zip(av) {
                            *d = *d + gi * a;
                        }
                    });
                }
                Op::Scale(c) => sink.with(par[0], &nodes, params, |d| axpy(c, &g, d)),
                Op::Concat => {
                    let mut off = 0;
                    for &p in par {
                        let len = value(&nodes, params, p).len();
                        sink.with(p, &nodes, params, |d| axpy(T::one(), &g[off..off + len], d));
                        off += len;
                    }
                }
                Op::Slice { start } => {
                    sink.with(par[0], &nodes, params, |d| axpy(T::one(), &g, &mut d[start..start + g.len()]))
                }
                Op::GatherRow { row, width } => sink.with(par[0], &nodes, params, |d| {
                    axpy(T::one(), &g, &mut d[row * width..(row + 1) * width])
                }),
                Op::Sigmoid => sink.with(par[0], &nodes, params, |d| {
                    for ((d, &gi), &y) in d.iter_mut().zip(&g).zip(&node.value) {
                        *d = *d + gi * y * (T::one() - y);
                    }
                }),
                Op::LogSigmoid => {
                    let xv = pv(0);
                    sink.with(par[0], &nodes, params, |d| {
                        for ((d, &gi), &x) in d.iter_mut().zip(&g).zip(xv) {
                            *d = *d + gi * sigmoid(-x);
                        }
                    })
                }
                Op::Tanh => sink.with(par[0], &nodes, params, |d| {
                    for ((d, &gi), &y) in d.iter_mut().zip(&g).zip(&node.value) {
                        *d = *d + gi * (T::one() - y * y);
                    }
                }),
                Op::Selu => {
                    let xv = pv(0);
                    let lambda = T::lit(SELU_LAMBDA);
                    let la = lambda * T::lit(SELU_ALPHA);
                    sink.with(par[0], &nodes, params, |d| {
                        for ((d, &gi), &x) in d.iter_mut().zip(&g).zip(xv) {
                            let dydx = if x > T::zero() { lambda } else { la * x.exp() };
                            *d = *d + gi * dydx;
                        }
                    })
                }
                Op::Softmax { width } => sink.with(par[0], &nodes, params, |d| {
                    for ((dr, gr), yr) in d.chunks_mut(width).zip(g.chunks(width)).zip(node.value.chunks(width)) {
                        let s = dot(gr, yr);
                        for ((d, &gi), &y) in dr.iter_mut().zip(gr).zip(yr) {
                            *d = *d + y * (gi - s);
                        }
                    }
                }),
                Op::LogSoftmax { width } => sink.with(par[0], &nodes, params, |d| {
                    for ((dr, gr), pr) in d.chunks_mut(width).zip(g.chunks(width)).zip(node.aux.chunks(width)) {
                        let s: T = gr.iter().copied().sum();
                        for ((d, &gi), &p) in dr.iter_mut().zip(gr).zip(pr) {
                            *d = *d + gi - p * s;
                        }
                    }
                }),
                Op::ClampMin(floor) => {
                    let xv = pv(0);
                    sink.with(par[0], &nodes, params, |d| {
                        for ((d, &gi), &x) in d.iter_mut().zip(&g).zip(xv) {
                            if x > floor {
                                *d = *d + gi;
                            }
                        }
                    })
                }
                Op::Sum => sink.with(par[0], &nodes, params, |d| d.iter_mut().for_each(|d| *d = *d + g[0])),
                Op::WeightedSum => sink.with(par[0], &nodes, params, |d| axpy(g[0], &node.aux, d)),
                Op::LstmStep { input, hidden } => {
                    let (xv, sv, wv) = (pv(0), pv(1), pv(2));
                    let cols = input + hidden;
                    let a = &node.aux;
                    let (dh, dc) = g.split_at(hidden);
                    let c_prev = &sv[hidden..];
                    let mut dz = vec![T::zero(); 4 * hidden];
                    let mut dc_prev = vec![T::zero(); hidden];
                    for j in 0..hidden {
                        let (i, f, gg, o, tc) =
                            (a[j], a[hidden + j], a[2 * hidden + j], a[3 * hidden + j], a[4 * hidden + j]);
                        let dct = dc[j] + dh[j] * o * (T::one() - tc * tc);
                        dz[j] = dct * gg * i * (T::one() - i);
                        dz[hidden + j] = dct * c_prev[j] * f * (T::one() - f);
                        dz[2 * hidden + j] = dct * i * (T::one() - gg * gg);
                        dz[3 * hidden + j] = dh[j] * tc * o * (T::one() - o);
                        dc_prev[j] = dct * f;
                    }
                    let h_prev = &sv[..hidden];
                    sink.with(par[2], &nodes, params, |dw| {
                        for (r, &dzr) in dz.iter().enumerate() {
                            let row = &mut dw[r * cols..(r + 1) * cols];
                            axpy(dzr, xv, &mut row[..input]);
                            axpy(dzr, h_prev, &mut row[input..]);
                        }
                    });
                    sink.with(par[3], &nodes, params, |db| axpy(T::one(), &dz, db));
                    if sink.wants(par[0], &nodes) || sink.wants(par[1], &nodes) {
                        let mut dxh = vec![T::zero(); cols];
                        for (r, &dzr) in dz.iter().enumerate() {
                            axpy(dzr, &wv[r * cols..(r + 1) * cols], &mut dxh);
                        }
                        sink.with(par[0], &nodes, params, |dx| axpy(T::one(), &dxh[..input], dx));
                        sink.with(par[1], &nodes, params, |ds| {
                            axpy(T::one(), &dxh[input..], &mut ds[..hidden]);
                            axpy(T::one(), &dc_prev, &mut ds[hidden..]);
                        });
                    }
                }
            }
        }
        Ok(stats)
    }
}

struct Sink<'g, T> {
    node_grads: Vec<Vec<T>>,
    reached: Vec<bool>,
    grads: &'g mut Gradients<T>,
}

impl<T: Scalar> Sink<'_, T> {
    fn wants(&self, parent: usize, nodes: &[Node<T>]) -> bool {
        !matches!(nodes[parent].op, Op::Input)
    }

    /// Runs `f` on the gradient buffer of `parent`, allocating it on first use.
    fn with(&mut self, parent: usize, nodes: &[Node<T>], params: &ParamSet<T>, f: impl FnOnce(&mut [T])) {
        match nodes[parent].op {
            Op::Input => self.reached[parent] = true,
            Op::Param(id) => {
                self.reached[parent] = true;
                let t = params.get(id);
                if t.requires_grad() {
                    f(self.grads.buf_mut(id, t.len()));
                }
            }
            _ => {
                self.reached[parent] = true;
                let buf = &mut self.node_grads[parent];
                if buf.is_empty() {
                    buf.resize(nodes[parent].value.len(), T::zero());
                }
                f(buf);
            }
        }
    }
}

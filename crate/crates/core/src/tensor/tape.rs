//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] is an append-only list of nodes. Every operation appends one
//! node holding its forward value, so parents always precede children and the
//! reverse pass is a single sweep from the root down to node 0.
//!
//! Two reverse passes share the same vector-Jacobian rules:
//!
//! * [`Tape::backward`] evaluates the rules on plain matrices and returns
//!   numeric gradients for every leaf that requires one.
//! * [`Tape::grad`] evaluates the rules *as tape operations*, so the returned
//!   gradients are themselves differentiable. Unrolled training uses this to
//!   record parameter updates, which lets a later loss be differentiated with
//!   respect to the adjacency through every step.
//!
//! ```
//! use linkpoison::tensor::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let a = tape.param(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
//! let s = tape.sum(a);
//! let grads = tape.backward(s).unwrap();
//! assert_eq!(grads.wrt(a), &Matrix::ones(2, 2));
//! ```

use std::collections::BTreeMap;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use super::matrix::Matrix;
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

pub type NodeId = usize;

/// Handle to a value recorded on a [`Tape`].
///
/// A `Var` is only meaningful for the tape that created it; using it with any
/// other tape panics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    id: NodeId,
    tape: u64,
}

impl Var {
    pub fn id(self) -> NodeId {
        self.id
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    Scale(f64),
    AddScalar(f64),
    Exp,
    Log,
    Sigmoid,
    Relu,
    LeakyRelu(f64),
    Powf(f64),
    Clamp(f64, f64),
    Sum,
    Mean,
    Frobenius,
    RowSum,
    RepeatCols(usize),
    Broadcast(usize, usize),
    GatherRows(Rc<[usize]>),
    ScatterRows(Rc<[usize]>, usize),
}

/// Entrywise operation kinds exposed through [`Tape::elementwise`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Sigmoid,
    Exp,
    Log,
    Relu,
    Scale(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
    Frobenius,
}

struct Node {
    op: Op,
    parents: Vec<NodeId>,
    value: Rc<Matrix>,
    requires_grad: bool,
}

pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn var(&self, id: NodeId) -> Var {
        Var { id, tape: self.id }
    }

    #[inline]
    fn check(&self, v: Var) -> NodeId {
        assert_eq!(v.tape, self.id, "Var used with a tape that did not create it");
        v.id
    }

    pub fn value(&self, v: Var) -> &Matrix {
        let id = self.check(v);
        &self.nodes[id].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        let id = self.check(v);
        self.nodes[id].requires_grad
    }

    /// Leaf whose gradient is tracked.
    pub fn param(&mut self, m: Matrix) -> Var {
        self.leaf(m, true)
    }

    /// Leaf that never accumulates gradient.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.leaf(m, false)
    }

    pub fn leaf(&mut self, m: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Leaf,
            parents: Vec::new(),
            value: Rc::new(m),
            requires_grad,
        });
        self.var(self.nodes.len() - 1)
    }

    fn record(&mut self, op: Op, parents: &[NodeId]) -> Result<Var> {
        let value = {
            let args: Vec<&Matrix> = parents.iter().map(|&p| &*self.nodes[p].value).collect();
            eval(&op, &args)
        };
        if !value.all_finite() {
            return Err(Error::NonFinite(format!("{op:?} produced a non-finite entry")));
        }
        let requires_grad = parents.iter().any(|&p| self.nodes[p].requires_grad);
        self.nodes.push(Node {
            op,
            parents: parents.to_vec(),
            value: Rc::new(value),
            requires_grad,
        });
        Ok(self.var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::Shape {
                op: "matmul",
                left: sa,
                right: sb,
            });
        }
        self.record(Op::MatMul, &[a.id, b.id])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a);
        self.record(Op::Transpose, &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        self.record(Op::Add, &[a.id, b.id])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        self.record(Op::Sub, &[a.id, b.id])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        self.record(Op::Mul, &[a.id, b.id])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let a = self.check(a);
        self.record(Op::Scale(s), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let a = self.check(a);
        self.record(Op::AddScalar(c), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a);
        self.record(Op::Exp, &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(bad) = self.value(a).data().iter().find(|&&v| v <= 0.0) {
            return Err(Error::Domain {
                op: "log",
                msg: format!("non-positive entry {bad}"),
            });
        }
        self.record(Op::Log, &[a.id])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a);
        self.record(Op::Sigmoid, &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a);
        self.record(Op::Relu, &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let a = self.check(a);
        self.record(Op::LeakyRelu(slope), &[a])
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Result<Var> {
        let a = self.check(a);
        self.record(Op::Powf(p), &[a])
    }

    /// Entrywise clamp; gradient is zero where the input was clipped.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let a = self.check(a);
        self.record(Op::Clamp(lo, hi), &[a])
    }

    pub fn elementwise(&mut self, kind: Elementwise, operands: &[Var]) -> Result<Var> {
        let unary = |operands: &[Var]| -> Result<Var> {
            match operands {
                [a] => Ok(*a),
                _ => Err(Error::Domain {
                    op: "elementwise",
                    msg: format!("{kind:?} takes one operand, got {}", operands.len()),
                }),
            }
        };
        let binary = |operands: &[Var]| -> Result<(Var, Var)> {
            match operands {
                [a, b] => Ok((*a, *b)),
                _ => Err(Error::Domain {
                    op: "elementwise",
                    msg: format!("{kind:?} takes two operands, got {}", operands.len()),
                }),
            }
        };
        match kind {
            Elementwise::Add => binary(operands).and_then(|(a, b)| self.add(a, b)),
            Elementwise::Sub => binary(operands).and_then(|(a, b)| self.sub(a, b)),
            Elementwise::Mul => binary(operands).and_then(|(a, b)| self.mul(a, b)),
            Elementwise::Sigmoid => unary(operands).and_then(|a| self.sigmoid(a)),
            Elementwise::Exp => unary(operands).and_then(|a| self.exp(a)),
            Elementwise::Log => unary(operands).and_then(|a| self.log(a)),
            Elementwise::Relu => unary(operands).and_then(|a| self.relu(a)),
            Elementwise::Scale(s) => unary(operands).and_then(|a| self.scale(a, s)),
        }
    }

    pub fn reduce(&mut self, kind: Reduction, a: Var) -> Result<Var> {
        let a = self.check(a);
        let op = match kind {
            Reduction::Sum => Op::Sum,
            Reduction::Mean => Op::Mean,
            Reduction::Frobenius => Op::Frobenius,
        };
        self.record(op, &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        self.reduce(Reduction::Sum, a).expect("sum of finite values")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduction::Mean, a)
    }

    pub fn frobenius(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduction::Frobenius, a)
    }

    /// Sum over columns: `r x c -> r x 1`.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let a = self.check(a);
        self.record(Op::RowSum, &[a])
    }

    /// Repeats an `r x 1` column `c` times: `r x 1 -> r x c`.
    pub fn repeat_cols(&mut self, a: Var, c: usize) -> Result<Var> {
        let (_, cols) = self.shape(a);
        if cols != 1 {
            return Err(Error::Shape {
                op: "repeat_cols",
                left: self.shape(a),
                right: (0, 1),
            });
        }
        self.record(Op::RepeatCols(c), &[a.id])
    }

    /// Broadcasts a 1x1 value to `r x c`.
    pub fn broadcast(&mut self, a: Var, r: usize, c: usize) -> Result<Var> {
        if self.shape(a) != (1, 1) {
            return Err(Error::Shape {
                op: "broadcast",
                left: self.shape(a),
                right: (1, 1),
            });
        }
        self.record(Op::Broadcast(r, c), &[a.id])
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let rows = self.shape(a).0;
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::Domain {
                op: "gather_rows",
                msg: format!("row {bad} out of range for {rows} rows"),
            });
        }
        self.record(Op::GatherRows(idx.into()), &[a.id])
    }

    /// Numeric gradients of a scalar root with respect to every leaf that
    /// requires a gradient. Leaves the tape untouched.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root = self.check(root);
        let shape = self.nodes[root].value.shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarRoot(shape));
        }
        let mut alg = Numeric { tape: self };
        let seed = Rc::new(Matrix::scalar(1.0));
        let grads = backprop(&mut alg, root, seed)?;

        let mut table = BTreeMap::new();
        for (id, node) in self.nodes.iter().enumerate().take(root + 1) {
            if matches!(node.op, Op::Leaf) && node.requires_grad {
                let g = match &grads[id] {
                    Some(g) => (**g).clone(),
                    None => {
                        let (r, c) = node.value.shape();
                        Matrix::zeros(r, c)
                    }
                };
                table.insert(id, g);
            }
        }
        for (id, node) in self.nodes.iter().enumerate().skip(root + 1) {
            if matches!(node.op, Op::Leaf) && node.requires_grad {
                let (r, c) = node.value.shape();
                table.insert(id, Matrix::zeros(r, c));
            }
        }
        Ok(Gradients {
            tape: self.id,
            table,
        })
    }

    /// Differentiable gradients of a scalar root with respect to `wrt`. The
    /// reverse pass is recorded on this tape, so the returned variables can
    /// take part in further computation and be differentiated again.
    pub fn grad(&mut self, root: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        let root = self.check(root);
        let shape = self.nodes[root].value.shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarRoot(shape));
        }
        let seed = self.constant(Matrix::scalar(1.0));
        let grads = {
            let mut alg = Traced { tape: self };
            backprop(&mut alg, root, seed)?
        };
        wrt.iter()
            .map(|&v| {
                let id = self.check(v);
                match grads.get(id).and_then(|g| g.as_ref()) {
                    Some(g) => Ok(*g),
                    None => {
                        let (r, c) = self.shape(v);
                        Ok(self.constant(Matrix::zeros(r, c)))
                    }
                }
            })
            .collect()
    }
}

/// Gradient table produced by [`Tape::backward`], keyed by leaf.
#[derive(Clone, Debug)]
pub struct Gradients {
    tape: u64,
    table: BTreeMap<NodeId, Matrix>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        if v.tape != self.tape {
            return None;
        }
        self.table.get(&v.id)
    }

    /// Gradient for a leaf known to require one. Panics otherwise.
    pub fn wrt(&self, v: Var) -> &Matrix {
        self.get(v).expect("no gradient recorded for this variable")
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

fn eval(op: &Op, args: &[&Matrix]) -> Matrix {
    match op {
        Op::Leaf => unreachable!("leaves are not evaluated"),
        Op::MatMul => args[0].matmul_unchecked(args[1]),
        Op::Transpose => args[0].transpose(),
        Op::Add => args[0].zip_map(args[1], |a, b| a + b),
        Op::Sub => args[0].zip_map(args[1], |a, b| a - b),
        Op::Mul => args[0].zip_map(args[1], |a, b| a * b),
        Op::Scale(s) => args[0].map(|v| v * s),
        Op::AddScalar(c) => args[0].map(|v| v + c),
        Op::Exp => args[0].map(f64::exp),
        Op::Log => args[0].map(f64::ln),
        Op::Sigmoid => args[0].map(sigmoid),
        Op::Relu => args[0].map(|v| v.max(0.0)),
        Op::LeakyRelu(s) => args[0].map(|v| if v > 0.0 { v } else { s * v }),
        Op::Powf(p) => args[0].map(|v| v.powf(*p)),
        Op::Clamp(lo, hi) => args[0].map(|v| v.clamp(*lo, *hi)),
        Op::Sum => Matrix::scalar(args[0].sum()),
        Op::Mean => {
            let a = args[0];
            Matrix::scalar(a.sum() / (a.rows() * a.cols()) as f64)
        }
        Op::Frobenius => Matrix::scalar(args[0].frobenius_norm()),
        Op::RowSum => {
            let a = args[0];
            Matrix::from_fn(a.rows(), 1, |i, _| a.row(i).iter().sum())
        }
        Op::RepeatCols(c) => {
            let a = args[0];
            Matrix::from_fn(a.rows(), *c, |i, _| a[(i, 0)])
        }
        Op::Broadcast(r, c) => Matrix::filled(*r, *c, args[0].item()),
        Op::GatherRows(idx) => {
            let a = args[0];
            let mut out = Matrix::zeros(idx.len(), a.cols());
            for (k, &i) in idx.iter().enumerate() {
                out.row_mut(k).copy_from_slice(a.row(i));
            }
            out
        }
        Op::ScatterRows(idx, rows) => {
            let a = args[0];
            let mut out = Matrix::zeros(*rows, a.cols());
            for (k, &i) in idx.iter().enumerate() {
                for (o, &v) in out.row_mut(i).iter_mut().zip(a.row(k)) {
                    *o += v;
                }
            }
            out
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Where the reverse pass materialises its intermediate values.
trait Algebra {
    type T: Clone;
    fn node(&mut self, id: NodeId) -> Self::T;
    fn constant(&mut self, m: Matrix) -> Self::T;
    fn apply(&mut self, op: Op, args: &[&Self::T]) -> Result<Self::T>;
    fn info(&self, id: NodeId) -> (Op, Vec<NodeId>, Rc<Matrix>, bool);
}

struct Numeric<'a> {
    tape: &'a Tape,
}

impl Algebra for Numeric<'_> {
    type T = Rc<Matrix>;

    fn node(&mut self, id: NodeId) -> Rc<Matrix> {
        self.tape.nodes[id].value.clone()
    }

    fn constant(&mut self, m: Matrix) -> Rc<Matrix> {
        Rc::new(m)
    }

    fn apply(&mut self, op: Op, args: &[&Rc<Matrix>]) -> Result<Rc<Matrix>> {
        let args: Vec<&Matrix> = args.iter().map(|a| &***a).collect();
        Ok(Rc::new(eval(&op, &args)))
    }

    fn info(&self, id: NodeId) -> (Op, Vec<NodeId>, Rc<Matrix>, bool) {
        let n = &self.tape.nodes[id];
        (n.op.clone(), n.parents.clone(), n.value.clone(), n.requires_grad)
    }
}

struct Traced<'a> {
    tape: &'a mut Tape,
}

impl Algebra for Traced<'_> {
    type T = Var;

    fn node(&mut self, id: NodeId) -> Var {
        self.tape.var(id)
    }

    fn constant(&mut self, m: Matrix) -> Var {
        self.tape.constant(m)
    }

    fn apply(&mut self, op: Op, args: &[&Var]) -> Result<Var> {
        let ids: Vec<NodeId> = args.iter().map(|v| v.id).collect();
        self.tape.record(op, &ids)
    }

    fn info(&self, id: NodeId) -> (Op, Vec<NodeId>, Rc<Matrix>, bool) {
        let n = &self.tape.nodes[id];
        (n.op.clone(), n.parents.clone(), n.value.clone(), n.requires_grad)
    }
}

fn backprop<A: Algebra>(alg: &mut A, root: NodeId, seed: A::T) -> Result<Vec<Option<A::T>>> {
    let mut grads: Vec<Option<A::T>> = vec![None; root + 1];
    grads[root] = Some(seed);
    for id in (0..=root).rev() {
        let Some(g) = grads[id].take() else { continue };
        let (op, parents, _, requires_grad) = alg.info(id);
        if !requires_grad || matches!(op, Op::Leaf) {
            grads[id] = Some(g);
            continue;
        }
        let needs: Vec<bool> = parents.iter().map(|&p| alg.info(p).3).collect();
        let parent_grads = vjp(alg, &op, id, &parents, &needs, &g)?;
        for (&p, pg) in parents.iter().zip(parent_grads) {
            let Some(pg) = pg else { continue };
            grads[p] = Some(match grads[p].take() {
                None => pg,
                Some(acc) => alg.apply(Op::Add, &[&acc, &pg])?,
            });
        }
        grads[id] = Some(g);
    }
    Ok(grads)
}

fn mask_from(value: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    value.map(f)
}

/// Vector-Jacobian products for each op, written once for both algebras.
fn vjp<A: Algebra>(
    alg: &mut A,
    op: &Op,
    out: NodeId,
    parents: &[NodeId],
    needs: &[bool],
    g: &A::T,
) -> Result<Vec<Option<A::T>>> {
    let parent_value = |alg: &A, k: usize| alg.info(parents[k]).2;
    let single = |v: Result<A::T>| -> Result<Vec<Option<A::T>>> { Ok(vec![Some(v?)]) };

    match op {
        Op::Leaf => Ok(vec![]),
        Op::MatMul => {
            let a = alg.node(parents[0]);
            let b = alg.node(parents[1]);
            let ga = if needs[0] {
                let bt = alg.apply(Op::Transpose, &[&b])?;
                Some(alg.apply(Op::MatMul, &[g, &bt])?)
            } else {
                None
            };
            let gb = if needs[1] {
                let at = alg.apply(Op::Transpose, &[&a])?;
                Some(alg.apply(Op::MatMul, &[&at, g])?)
            } else {
                None
            };
            Ok(vec![ga, gb])
        }
        Op::Transpose => single(alg.apply(Op::Transpose, &[g])),
        Op::Add => Ok(vec![
            needs[0].then(|| g.clone()),
            needs[1].then(|| g.clone()),
        ]),
        Op::Sub => {
            let gb = if needs[1] {
                Some(alg.apply(Op::Scale(-1.0), &[g])?)
            } else {
                None
            };
            Ok(vec![needs[0].then(|| g.clone()), gb])
        }
        Op::Mul => {
            let a = alg.node(parents[0]);
            let b = alg.node(parents[1]);
            let ga = if needs[0] {
                Some(alg.apply(Op::Mul, &[g, &b])?)
            } else {
                None
            };
            let gb = if needs[1] {
                Some(alg.apply(Op::Mul, &[g, &a])?)
            } else {
                None
            };
            Ok(vec![ga, gb])
        }
        Op::Scale(s) => single(alg.apply(Op::Scale(*s), &[g])),
        Op::AddScalar(_) => Ok(vec![Some(g.clone())]),
        Op::Exp => {
            let y = alg.node(out);
            single(alg.apply(Op::Mul, &[g, &y]))
        }
        Op::Log => {
            let a = alg.node(parents[0]);
            let inv = alg.apply(Op::Powf(-1.0), &[&a])?;
            single(alg.apply(Op::Mul, &[g, &inv]))
        }
        Op::Sigmoid => {
            let y = alg.node(out);
            let yy = alg.apply(Op::Mul, &[&y, &y])?;
            let d = alg.apply(Op::Sub, &[&y, &yy])?;
            single(alg.apply(Op::Mul, &[g, &d]))
        }
        Op::Relu => {
            let m = mask_from(&parent_value(alg, 0), |v| if v > 0.0 { 1.0 } else { 0.0 });
            let m = alg.constant(m);
            single(alg.apply(Op::Mul, &[g, &m]))
        }
        Op::LeakyRelu(s) => {
            let s = *s;
            let m = mask_from(&parent_value(alg, 0), |v| if v > 0.0 { 1.0 } else { s });
            let m = alg.constant(m);
            single(alg.apply(Op::Mul, &[g, &m]))
        }
        Op::Powf(p) => {
            let a = alg.node(parents[0]);
            let d = alg.apply(Op::Powf(p - 1.0), &[&a])?;
            let d = alg.apply(Op::Scale(*p), &[&d])?;
            single(alg.apply(Op::Mul, &[g, &d]))
        }
        Op::Clamp(lo, hi) => {
            let (lo, hi) = (*lo, *hi);
            let m = mask_from(&parent_value(alg, 0), |v| {
                if (lo..=hi).contains(&v) {
                    1.0
                } else {
                    0.0
                }
            });
            let m = alg.constant(m);
            single(alg.apply(Op::Mul, &[g, &m]))
        }
        Op::Sum => {
            let (r, c) = parent_value(alg, 0).shape();
            single(alg.apply(Op::Broadcast(r, c), &[g]))
        }
        Op::Mean => {
            let (r, c) = parent_value(alg, 0).shape();
            let b = alg.apply(Op::Broadcast(r, c), &[g])?;
            single(alg.apply(Op::Scale(1.0 / (r * c) as f64), &[&b]))
        }
        Op::Frobenius => {
            let value = parent_value(alg, 0);
            let (r, c) = value.shape();
            let norm = alg.info(out).2.item();
            if norm == 0.0 {
                // Subgradient at the origin.
                return Ok(vec![Some(alg.constant(Matrix::zeros(r, c)))]);
            }
            let a = alg.node(parents[0]);
            let y = alg.node(out);
            let inv = alg.apply(Op::Powf(-1.0), &[&y])?;
            let s = alg.apply(Op::Mul, &[g, &inv])?;
            let s = alg.apply(Op::Broadcast(r, c), &[&s])?;
            single(alg.apply(Op::Mul, &[&a, &s]))
        }
        Op::RowSum => {
            let c = parent_value(alg, 0).cols();
            single(alg.apply(Op::RepeatCols(c), &[g]))
        }
        Op::RepeatCols(_) => single(alg.apply(Op::RowSum, &[g])),
        Op::Broadcast(_, _) => single(alg.apply(Op::Sum, &[g])),
        Op::GatherRows(idx) => {
            let rows = parent_value(alg, 0).rows();
            single(alg.apply(Op::ScatterRows(idx.clone(), rows), &[g]))
        }
        Op::ScatterRows(idx, _) => single(alg.apply(Op::GatherRows(idx.clone()), &[g])),
    }
}

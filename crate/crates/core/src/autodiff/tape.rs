use std::cell::{Cell, RefCell};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use super::Real;

/// Operation kind recorded for every tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Sqrt,
    Pow2,
    Ln,
    Tanh,
    Logistic,
    MinSelect,
    MaxSelect,
    StopGradient,
    Norm,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AdError {
    #[error("non-finite value {value} produced by {op:?} at tape node {node}")]
    NonFinite { op: Op, node: usize, value: f64 },

    #[error("variable belongs to a different tape")]
    ForeignVariable,
}

#[derive(Clone, Copy)]
struct Node {
    edge_start: u32,
    edge_len: u32,
}

/// Append-only record of scalar operations.
///
/// Nodes are pushed in evaluation order, so parents always precede children
/// and the backward sweep is a single reverse pass.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
    first_bad: Cell<Option<(usize, Op, f64)>>,
}

#[derive(Default)]
struct Inner {
    nodes: Vec<Node>,
    edges: Vec<(u32, f64)>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Tape {
            inner: RefCell::new(Inner {
                nodes: Vec::with_capacity(nodes),
                edges: Vec::with_capacity(nodes * 2),
            }),
            first_bad: Cell::new(None),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records an independent input.
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(Op::Leaf, value, &[])
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    #[inline]
    fn push(&self, op: Op, value: f64, parents: &[(u32, f64)]) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.nodes.len();
        let edge_start = inner.edges.len() as u32;
        inner.nodes.push(Node {
            edge_start,
            edge_len: parents.len() as u32,
        });
        inner.edges.extend_from_slice(parents);
        if !value.is_finite() && self.first_bad.get().is_none() {
            self.first_bad.set(Some((idx, op, value)));
        }
        Var {
            tape: self,
            idx: idx as u32,
            val: value,
        }
    }

    /// Adjoints of every node with respect to `output`.
    pub fn backward(&self, output: Var<'_>) -> Result<Vec<f64>, AdError> {
        if !std::ptr::eq(output.tape, self) {
            return Err(AdError::ForeignVariable);
        }
        if let Some((node, op, value)) = self.first_bad.get() {
            return Err(AdError::NonFinite { op, node, value });
        }
        let inner = self.inner.borrow();
        let (nodes, edges) = (&inner.nodes, &inner.edges);
        let mut adj = vec![0.0; output.idx as usize + 1];
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            let start = node.edge_start as usize;
            for &(parent, partial) in &edges[start..start + node.edge_len as usize] {
                adj[parent as usize] += a * partial;
            }
        }
        Ok(adj)
    }

    /// Gradient of `output` with respect to `wrt`.
    pub fn gradient(&self, output: Var<'_>, wrt: &[Var<'_>]) -> Result<Vec<f64>, AdError> {
        let adj = self.backward(output)?;
        wrt.iter()
            .map(|v| {
                if !std::ptr::eq(v.tape, self) {
                    return Err(AdError::ForeignVariable);
                }
                Ok(adj.get(v.idx as usize).copied().unwrap_or(0.0))
            })
            .collect()
    }
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{}={})", self.idx, self.val)
    }
}

impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.idx as usize
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    #[inline]
    fn unary(self, op: Op, value: f64, partial: f64) -> Self {
        self.tape.push(op, value, &[(self.idx, partial)])
    }

    #[inline]
    fn binary(self, other: Self, op: Op, value: f64, da: f64, db: f64) -> Self {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "mixed tapes");
        self.tape
            .push(op, value, &[(self.idx, da), (other.idx, db)])
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Add, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Sub, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Mul, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        let q = self.val / rhs.val;
        self.binary(rhs, Op::Div, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(Op::Neg, -self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Self {
        self.unary(Op::Add, self.val + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Self {
        self.unary(Op::Sub, self.val - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Self {
        self.unary(Op::Mul, self.val * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Self {
        self.unary(Op::Div, self.val / rhs, 1.0 / rhs)
    }
}

impl<'t> Real for Var<'t> {
    #[inline]
    fn value(self) -> f64 {
        self.val
    }

    fn constant(self, v: f64) -> Self {
        self.tape.push(Op::Leaf, v, &[])
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(Op::Exp, e, e)
    }

    fn sqrt(self) -> Self {
        let r = self.val.sqrt();
        self.unary(Op::Sqrt, r, 0.5 / r)
    }

    fn pow2(self) -> Self {
        self.unary(Op::Pow2, self.val * self.val, 2.0 * self.val)
    }

    fn ln(self) -> Self {
        self.unary(Op::Ln, self.val.ln(), 1.0 / self.val)
    }

    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(Op::Tanh, t, 1.0 - t * t)
    }

    fn logistic(self) -> Self {
        let s = super::logistic(self.val);
        self.unary(Op::Logistic, s, s * (1.0 - s))
    }

    fn min_select(self, other: Self) -> Self {
        if other.val < self.val {
            self.binary(other, Op::MinSelect, other.val, 0.0, 1.0)
        } else {
            self.binary(other, Op::MinSelect, self.val, 1.0, 0.0)
        }
    }

    fn max_select(self, other: Self) -> Self {
        if other.val > self.val {
            self.binary(other, Op::MaxSelect, other.val, 0.0, 1.0)
        } else {
            self.binary(other, Op::MaxSelect, self.val, 1.0, 0.0)
        }
    }

    fn stop_gradient(self) -> Self {
        self.tape.push(Op::StopGradient, self.val, &[])
    }

    fn norm(xs: &[Self]) -> Self {
        let tape = xs
            .first()
            .expect("norm of an empty slice has no tape")
            .tape;
        let n = xs.iter().map(|x| x.val * x.val).sum::<f64>().sqrt();
        let mut parents = Vec::with_capacity(xs.len());
        for x in xs {
            let partial = if n > 0.0 { x.val / n } else { 0.0 };
            parents.push((x.idx, partial));
        }
        tape.push(Op::Norm, n, &parents)
    }
}

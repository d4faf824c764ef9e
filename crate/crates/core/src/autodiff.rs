//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Graph`] is an append-only tape. Every primitive records its value and
//! the local partial derivatives with respect to each operand at the time it
//! is applied, so the backward pass is a single reverse sweep that
//! accumulates adjoints. Operands always precede their results on the tape.
//!
//! Values that carry no graph (plain constants) never touch the tape; a
//! primitive whose operands are all constants yields another constant.
//!
//! The [`Real`] trait abstracts over `f64` and [`Var`], letting densities,
//! transforms, and model log-joints be written once and evaluated either
//! plainly (for ELBO estimates and predictive scoring) or on a tape (for
//! gradients).

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use statrs::function::gamma::digamma;

use crate::error::AdError;

/// Primitive operations understood by the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Log,
    Exp,
    Sqrt,
    Pow,
    Logistic,
    LogGamma,
    LogSumExp,
    Dot,
    Sum,
}

impl Primitive {
    pub fn name(self) -> &'static str {
        match self {
            Primitive::Leaf => "leaf",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Div => "div",
            Primitive::Neg => "neg",
            Primitive::Log => "log",
            Primitive::Exp => "exp",
            Primitive::Sqrt => "sqrt",
            Primitive::Pow => "pow",
            Primitive::Logistic => "logistic",
            Primitive::LogGamma => "log_gamma",
            Primitive::LogSumExp => "log_sum_exp",
            Primitive::Dot => "dot",
            Primitive::Sum => "sum",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Primitive,
    first_edge: usize,
    n_edges: usize,
    value: f64,
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    parent: usize,
    partial: f64,
}

#[derive(Default)]
struct Tape {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    leaves: Vec<usize>,
}

/// An append-only expression graph.
///
/// Single-owner: a `Graph` is not `Sync`, and each worker that needs
/// gradients builds its own.
#[derive(Default)]
pub struct Graph {
    tape: RefCell<Tape>,
    error: RefCell<Option<AdError>>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tape = self.tape.borrow();
        f.debug_struct("Graph")
            .field("nodes", &tape.nodes.len())
            .field("leaves", &tape.leaves.len())
            .finish()
    }
}

/// A scalar that is either a node on a [`Graph`] or a free constant.
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: Option<&'g Graph>,
    index: usize,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.graph {
            Some(_) => write!(f, "Var(#{} = {})", self.index, self.value),
            None => write!(f, "Const({})", self.value),
        }
    }
}

impl<'g> Var<'g> {
    /// A constant that participates in expressions without being recorded.
    pub fn constant(value: f64) -> Self {
        Var {
            graph: None,
            index: usize::MAX,
            value,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Tape position, or `None` for constants.
    pub fn index(&self) -> Option<usize> {
        self.graph.map(|_| self.index)
    }

    pub fn is_constant(&self) -> bool {
        self.graph.is_none()
    }
}

impl From<f64> for Var<'_> {
    fn from(value: f64) -> Self {
        Var::constant(value)
    }
}

/// Partial derivatives of one output with respect to every leaf.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    leaves: Vec<usize>,
    adjoints: Vec<f64>,
}

impl Gradients {
    /// ∂output/∂var; zero for constants and for nodes the output ignores.
    pub fn wrt(&self, var: &Var<'_>) -> f64 {
        var.index().map_or(0.0, |i| self.adjoints[i])
    }

    /// Leaf partials in the order the leaves were created.
    pub fn leaf_partials(&self) -> Vec<f64> {
        self.leaves.iter().map(|&i| self.adjoints[i]).collect()
    }

    /// `(leaf node index, partial)` pairs in creation order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.leaves.iter().map(move |&i| (i, self.adjoints[i]))
    }
}

thread_local! {
    /// Cleared tapes kept for reuse, so repeated gradient evaluations on one
    /// thread do not regrow their buffers from empty.
    static SPARE_TAPES: RefCell<Vec<Tape>> = const { RefCell::new(Vec::new()) };
}

const MAX_SPARE_TAPES: usize = 4;

impl Drop for Graph {
    fn drop(&mut self) {
        let mut tape = std::mem::take(self.tape.get_mut());
        if tape.nodes.capacity() == 0 {
            return;
        }
        tape.nodes.clear();
        tape.edges.clear();
        tape.leaves.clear();
        let _ = SPARE_TAPES.try_with(|spare| {
            let mut spare = spare.borrow_mut();
            if spare.len() < MAX_SPARE_TAPES {
                spare.push(tape);
            }
        });
    }
}

impl Graph {
    pub fn new() -> Self {
        let tape = SPARE_TAPES
            .try_with(|spare| spare.borrow_mut().pop())
            .ok()
            .flatten()
            .unwrap_or_default();
        Graph {
            tape: RefCell::new(tape),
            error: RefCell::new(None),
        }
    }

    pub fn len(&self) -> usize {
        self.tape.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Append an independent variable.
    pub fn variable(&self, value: f64) -> Result<Var<'_>, AdError> {
        if !value.is_finite() {
            return Err(AdError::NonFiniteInput(value));
        }
        let mut tape = self.tape.borrow_mut();
        let index = tape.nodes.len();
        let first_edge = tape.edges.len();
        tape.nodes.push(Node {
            op: Primitive::Leaf,
            first_edge,
            n_edges: 0,
            value,
        });
        tape.leaves.push(index);
        Ok(Var {
            graph: Some(self),
            index,
            value,
        })
    }

    /// Append one leaf per value.
    pub fn variables(&self, values: &[f64]) -> Result<Vec<Var<'_>>, AdError> {
        values.iter().map(|&v| self.variable(v)).collect()
    }

    /// Cached value of the node at `index`.
    pub fn value_at(&self, index: usize) -> Option<f64> {
        self.tape.borrow().nodes.get(index).map(|n| n.value)
    }

    pub fn op_at(&self, index: usize) -> Option<Primitive> {
        self.tape.borrow().nodes.get(index).map(|n| n.op)
    }

    /// Operand indices of the node at `index`.
    pub fn operands_of(&self, index: usize) -> Vec<usize> {
        let tape = self.tape.borrow();
        tape.nodes
            .get(index)
            .map(|n| {
                tape.edges[n.first_edge..n.first_edge + n.n_edges]
                    .iter()
                    .map(|e| e.parent)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// First domain violation recorded by the infallible operator methods.
    pub fn error(&self) -> Option<AdError> {
        self.error.borrow().clone()
    }

    pub fn take_error(&self) -> Option<AdError> {
        self.error.borrow_mut().take()
    }

    /// Apply a primitive with domain checking.
    ///
    /// Binary primitives take two operands, unary ones take one, `LogSumExp`
    /// and `Sum` any nonzero count, and `Dot` an even count laid out as the
    /// left list followed by the right list.
    pub fn apply<'g>(&'g self, op: Primitive, operands: &[Var<'g>]) -> Result<Var<'g>, AdError> {
        for v in operands {
            if let Some(g) = v.graph {
                if !std::ptr::eq(g, self) {
                    return Err(AdError::ForeignOperand);
                }
            }
        }
        let arity_ok = match op {
            Primitive::Leaf => false,
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div | Primitive::Pow => operands.len() == 2,
            Primitive::Neg
            | Primitive::Log
            | Primitive::Exp
            | Primitive::Sqrt
            | Primitive::Logistic
            | Primitive::LogGamma => operands.len() == 1,
            Primitive::LogSumExp | Primitive::Sum => !operands.is_empty(),
            Primitive::Dot => operands.len().is_multiple_of(2),
        };
        if !arity_ok {
            return Err(AdError::Arity {
                op,
                got: operands.len(),
            });
        }
        let (value, partials) = evaluate(op, operands)?;
        Ok(record(Some(self), op, operands, value, partials.as_slice()))
    }

    /// Reverse sweep from `output` with seed adjoint 1.
    pub fn backward(&self, output: &Var<'_>) -> Gradients {
        let tape = self.tape.borrow();
        let mut adjoints = vec![0.0; tape.nodes.len()];
        if let Some(g) = output.graph {
            assert!(std::ptr::eq(g, self), "output belongs to another graph");
            adjoints[output.index] = 1.0;
            for i in (0..=output.index).rev() {
                let adj = adjoints[i];
                if adj == 0.0 {
                    continue;
                }
                let node = tape.nodes[i];
                for e in &tape.edges[node.first_edge..node.first_edge + node.n_edges] {
                    adjoints[e.parent] += adj * e.partial;
                }
            }
        }
        Gradients {
            leaves: tape.leaves.clone(),
            adjoints,
        }
    }
}

/// Local partials; unary and binary primitives stay off the heap.
enum Partials {
    Fixed([f64; 2]),
    Heap(Vec<f64>),
}

impl Partials {
    fn as_slice(&self) -> &[f64] {
        match self {
            Partials::Fixed(p) => p,
            Partials::Heap(p) => p,
        }
    }
}

/// Value and local partials of a primitive, checking its domain.
fn evaluate(op: Primitive, xs: &[Var<'_>]) -> Result<(f64, Partials), AdError> {
    use Partials::{Fixed, Heap};
    let domain = |value: f64| Err(AdError::Domain { op, value });
    let v = |i: usize| xs[i].value;
    let out = match op {
        Primitive::Leaf => unreachable!("leaves are created with Graph::variable"),
        Primitive::Add => (v(0) + v(1), Fixed([1.0, 1.0])),
        Primitive::Sub => (v(0) - v(1), Fixed([1.0, -1.0])),
        Primitive::Mul => (v(0) * v(1), Fixed([v(1), v(0)])),
        Primitive::Div => {
            if v(1) == 0.0 {
                return domain(v(1));
            }
            let q = v(0) / v(1);
            (q, Fixed([1.0 / v(1), -q / v(1)]))
        }
        Primitive::Neg => (-v(0), Fixed([-1.0, 0.0])),
        Primitive::Log => {
            if !(v(0) > 0.0) {
                return domain(v(0));
            }
            (v(0).ln(), Fixed([1.0 / v(0), 0.0]))
        }
        Primitive::Exp => {
            let e = v(0).exp();
            (e, Fixed([e, 0.0]))
        }
        Primitive::Sqrt => {
            if !(v(0) >= 0.0) {
                return domain(v(0));
            }
            let s = v(0).sqrt();
            (s, Fixed([0.5 / s, 0.0]))
        }
        Primitive::Pow => {
            let (base, exponent) = (v(0), v(1));
            let base_ok = base > 0.0 || (xs[1].is_constant() && base == 0.0 && exponent >= 1.0);
            if !base_ok {
                return domain(base);
            }
            let p = base.powf(exponent);
            let d_base = if base == 0.0 {
                if exponent == 1.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                exponent * p / base
            };
            let d_exp = if base > 0.0 { p * base.ln() } else { 0.0 };
            (p, Fixed([d_base, d_exp]))
        }
        Primitive::Logistic => {
            let s = logistic(v(0));
            (s, Fixed([s * (1.0 - s), 0.0]))
        }
        Primitive::LogGamma => {
            if !(v(0) > 0.0) {
                return domain(v(0));
            }
            (log_gamma(v(0)), Fixed([digamma(v(0)), 0.0]))
        }
        Primitive::LogSumExp => {
            let values: Vec<f64> = xs.iter().map(|x| x.value).collect();
            let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                (m, Heap(vec![0.0; xs.len()]))
            } else {
                let w: Vec<f64> = values.iter().map(|&x| (x - m).exp()).collect();
                let total: f64 = w.iter().sum();
                (m + total.ln(), Heap(w.iter().map(|wi| wi / total).collect()))
            }
        }
        Primitive::Dot => {
            let n = xs.len() / 2;
            let mut acc = 0.0;
            let mut partials = vec![0.0; xs.len()];
            for i in 0..n {
                acc += v(i) * v(n + i);
                partials[i] = v(n + i);
                partials[n + i] = v(i);
            }
            (acc, Heap(partials))
        }
        Primitive::Sum => (xs.iter().map(|x| x.value).sum(), Heap(vec![1.0; xs.len()])),
    };
    Ok(out)
}

/// Append a node for `op`, skipping edges to constants. Returns a constant
/// when no operand lives on a graph.
fn record<'g>(graph: Option<&'g Graph>, op: Primitive, operands: &[Var<'g>], value: f64, partials: &[f64]) -> Var<'g> {
    let graph = match graph.or_else(|| operands.iter().find_map(|v| v.graph)) {
        Some(g) => g,
        None => return Var::constant(value),
    };
    let mut tape = graph.tape.borrow_mut();
    let first_edge = tape.edges.len();
    for (x, &partial) in operands.iter().zip(partials) {
        if x.graph.is_some() {
            tape.edges.push(Edge {
                parent: x.index,
                partial,
            });
        }
    }
    let n_edges = tape.edges.len() - first_edge;
    if n_edges == 0 {
        return Var::constant(value);
    }
    let index = tape.nodes.len();
    tape.nodes.push(Node {
        op,
        first_edge,
        n_edges,
        value,
    });
    Var {
        graph: Some(graph),
        index,
        value,
    }
}

/// Infallible application used by operator overloads. A domain violation is
/// stored on the graph and the result is NaN, which surfaces as a non-finite
/// log density.
fn apply_lenient<'g>(op: Primitive, operands: &[Var<'g>]) -> Var<'g> {
    let graph = operands.iter().find_map(|v| v.graph);
    if let Some(g) = graph {
        debug_assert!(
            operands.iter().all(|v| v.graph.is_none_or(|h| std::ptr::eq(g, h))),
            "operands from different graphs"
        );
    }
    match evaluate(op, operands) {
        Ok((value, partials)) => record(graph, op, operands, value, partials.as_slice()),
        Err(err) => {
            if let Some(g) = graph {
                let mut slot = g.error.borrow_mut();
                if slot.is_none() {
                    *slot = Some(err);
                }
            }
            let nan = vec![f64::NAN; operands.len()];
            record(graph, op, operands, f64::NAN, &nan)
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log Γ(x), exact at the integers 1 and 2 where the series rounds.
pub fn log_gamma(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        0.0
    } else {
        statrs::function::gamma::ln_gamma(x)
    }
}

/// Numeric type usable both as a plain float and as a tape variable.
pub trait Real:
    Copy
    + fmt::Debug
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn powf(self, exponent: Self) -> Self;
    fn logistic(self) -> Self;
    fn ln_gamma(self) -> Self;
    fn log_sum_exp(xs: &[Self]) -> Self;
    fn dot(a: &[Self], b: &[Self]) -> Self;
    fn sum(xs: &[Self]) -> Self;

    fn square(self) -> Self {
        self * self
    }

    /// log(1 + exp(x)) without overflow.
    fn softplus(self) -> Self {
        Self::log_sum_exp(&[Self::from(0.0), self])
    }

    /// Σ coeffs[i]·xs[i] where the coefficients are data.
    fn weighted_sum(coeffs: &[f64], xs: &[Self]) -> Self {
        let lifted: Vec<Self> = coeffs.iter().map(|&c| Self::from(c)).collect();
        Self::dot(&lifted, xs)
    }
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powf(self, exponent: Self) -> Self {
        f64::powf(self, exponent)
    }
    fn logistic(self) -> Self {
        logistic(self)
    }
    fn ln_gamma(self) -> Self {
        if self > 0.0 {
            log_gamma(self)
        } else {
            f64::NAN
        }
    }
    fn log_sum_exp(xs: &[Self]) -> Self {
        log_sum_exp(xs)
    }
    fn dot(a: &[Self], b: &[Self]) -> Self {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
    fn sum(xs: &[Self]) -> Self {
        xs.iter().sum()
    }
    fn weighted_sum(coeffs: &[f64], xs: &[Self]) -> Self {
        Self::dot(coeffs, xs)
    }
}

/// Overflow-safe log Σ exp(x).
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

impl Real for Var<'_> {
    fn value(&self) -> f64 {
        self.value
    }
    fn ln(self) -> Self {
        apply_lenient(Primitive::Log, &[self])
    }
    fn exp(self) -> Self {
        apply_lenient(Primitive::Exp, &[self])
    }
    fn sqrt(self) -> Self {
        apply_lenient(Primitive::Sqrt, &[self])
    }
    fn powf(self, exponent: Self) -> Self {
        apply_lenient(Primitive::Pow, &[self, exponent])
    }
    fn logistic(self) -> Self {
        apply_lenient(Primitive::Logistic, &[self])
    }
    fn ln_gamma(self) -> Self {
        apply_lenient(Primitive::LogGamma, &[self])
    }
    fn log_sum_exp(xs: &[Self]) -> Self {
        apply_lenient(Primitive::LogSumExp, xs)
    }
    fn dot(a: &[Self], b: &[Self]) -> Self {
        assert_eq!(a.len(), b.len(), "dot of unequal lengths");
        let mut operands = Vec::with_capacity(2 * a.len());
        operands.extend_from_slice(a);
        operands.extend_from_slice(b);
        apply_lenient(Primitive::Dot, &operands)
    }
    fn sum(xs: &[Self]) -> Self {
        if xs.is_empty() {
            return Var::constant(0.0);
        }
        apply_lenient(Primitive::Sum, xs)
    }
    fn weighted_sum(coeffs: &[f64], xs: &[Self]) -> Self {
        assert_eq!(coeffs.len(), xs.len(), "weighted_sum of unequal lengths");
        let graph = xs.iter().find_map(|v| v.graph);
        let value = coeffs.iter().zip(xs).map(|(c, x)| c * x.value).sum();
        record(graph, Primitive::Dot, xs, value, coeffs)
    }
}

/// Record a binary node whose value and partials are already known.
#[inline]
fn record_binary<'g>(op: Primitive, a: Var<'g>, b: Var<'g>, value: f64, da: f64, db: f64) -> Var<'g> {
    let graph = match a.graph.or(b.graph) {
        Some(g) => g,
        None => return Var::constant(value),
    };
    debug_assert!(
        [a.graph, b.graph].iter().flatten().all(|h| std::ptr::eq(graph, *h)),
        "operands from different graphs"
    );
    let mut tape = graph.tape.borrow_mut();
    let first_edge = tape.edges.len();
    if a.graph.is_some() {
        tape.edges.push(Edge {
            parent: a.index,
            partial: da,
        });
    }
    if b.graph.is_some() {
        tape.edges.push(Edge {
            parent: b.index,
            partial: db,
        });
    }
    let index = tape.nodes.len();
    let n_edges = tape.edges.len() - first_edge;
    tape.nodes.push(Node {
        op,
        first_edge,
        n_edges,
        value,
    });
    Var {
        graph: Some(graph),
        index,
        value,
    }
}

#[inline]
fn add<'g>(a: Var<'g>, b: Var<'g>) -> Var<'g> {
    record_binary(Primitive::Add, a, b, a.value + b.value, 1.0, 1.0)
}

#[inline]
fn sub<'g>(a: Var<'g>, b: Var<'g>) -> Var<'g> {
    record_binary(Primitive::Sub, a, b, a.value - b.value, 1.0, -1.0)
}

#[inline]
fn mul<'g>(a: Var<'g>, b: Var<'g>) -> Var<'g> {
    record_binary(Primitive::Mul, a, b, a.value * b.value, b.value, a.value)
}

#[inline]
fn div<'g>(a: Var<'g>, b: Var<'g>) -> Var<'g> {
    if b.value == 0.0 {
        return apply_lenient(Primitive::Div, &[a, b]);
    }
    let q = a.value / b.value;
    record_binary(Primitive::Div, a, b, q, 1.0 / b.value, -q / b.value)
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $f:ident) => {
        impl<'g> $trait for Var<'g> {
            type Output = Var<'g>;
            fn $method(self, rhs: Var<'g>) -> Var<'g> {
                $f(self, rhs)
            }
        }
        impl<'g> $trait<f64> for Var<'g> {
            type Output = Var<'g>;
            fn $method(self, rhs: f64) -> Var<'g> {
                $f(self, Var::constant(rhs))
            }
        }
        impl<'g> $trait<Var<'g>> for f64 {
            type Output = Var<'g>;
            fn $method(self, rhs: Var<'g>) -> Var<'g> {
                $f(Var::constant(self), rhs)
            }
        }
    };
}

binary_op!(Add, add, add);
binary_op!(Sub, sub, sub);
binary_op!(Mul, mul, mul);
binary_op!(Div, div, div);

impl<'g> Neg for Var<'g> {
    type Output = Var<'g>;
    fn neg(self) -> Var<'g> {
        apply_lenient(Primitive::Neg, &[self])
    }
}

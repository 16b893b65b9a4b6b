use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use super::{AutodiffError, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Shape of a tape value. A `Scalar` is distinct from a length-1 vector:
/// scalars broadcast against vectors in binary ops, vectors never do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector(n) => *n,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Shape::Scalar)
    }
}

/// Handle to a recorded node. Only combinable with vars of the same tape;
/// shape is fixed at creation.
#[derive(Debug, Clone, Copy)]
pub struct Var {
    tape_id: u64,
    node: usize,
    shape: Shape,
}

impl Var {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn node_id(&self) -> usize {
        self.node
    }
}

/// Constant matrix (row-major) usable on any tape via [`Tape::matvec_const`].
/// The matrix is not differentiated; only the vector operand is.
#[derive(Debug, Clone)]
pub struct ConstMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ConstMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        ConstMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// y = M x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matrix-vector length mismatch");
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (m, v) in row.iter().zip(x) {
                acc += m * v;
            }
            out.push(acc);
        }
        out
    }

    /// adj_x += M^T * g
    fn apply_transposed_into(&self, g: &[f64], adj_x: &mut [f64]) {
        for r in 0..self.rows {
            let gr = g[r];
            if gr == 0.0 {
                continue;
            }
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (a, m) in adj_x.iter_mut().zip(row) {
                *a += gr * m;
            }
        }
    }
}

/// Constant operand of a clamp op: one bound per element or a shared scalar.
#[derive(Debug, Clone)]
enum Clamp {
    Scalar(f64),
    Vector(Rc<[f64]>),
}

impl Clamp {
    fn get(&self, i: usize) -> f64 {
        match self {
            Clamp::Scalar(c) => *c,
            Clamp::Vector(v) => v[i],
        }
    }
}

/// Recorded primitive operation. Operand node ids are always smaller than
/// the id of the node holding the op.
#[derive(Debug, Clone)]
enum Op {
    Input,
    Const,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Abs(usize),
    Sqrt(usize),
    Square(usize),
    Tanh(usize),
    Ln(usize),
    Log10(usize),
    Sum(usize),
    Mean(usize),
    Dot(usize, usize),
    SumSq(usize),
    MinConst(usize, Clamp),
    MaxConst(usize, Clamp),
    Scale(usize, f64),
    Offset(usize),
    MatVecConst(Rc<ConstMatrix>, usize),
    MatVec {
        matrix: usize,
        x: usize,
        rows: usize,
        cols: usize,
    },
    Slice {
        src: usize,
        start: usize,
    },
    Concat(Vec<usize>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    shape: Shape,
    value: Vec<f64>,
}

/// Append-only record of a forward computation.
///
/// Forward values are computed eagerly as ops are recorded. A tape is
/// single-threaded; distinct tapes may run on distinct threads.
#[derive(Debug)]
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
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    /// Drops all nodes but keeps the allocation. The tape takes a fresh
    /// identity, so vars from before the clear are rejected as cross-tape.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.id = NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, shape: Shape, value: Vec<f64>) -> Var {
        debug_assert_eq!(shape.len(), value.len());
        let node = self.nodes.len();
        self.nodes.push(Node { op, shape, value });
        Var {
            tape_id: self.id,
            node,
            shape,
        }
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.tape_id != self.id {
            return Err(AutodiffError::CrossTape);
        }
        Ok(())
    }

    // ----- leaves -------------------------------------------------------

    /// Differentiable vector leaf.
    pub fn input(&mut self, values: &[f64]) -> Var {
        self.push(Op::Input, Shape::Vector(values.len()), values.to_vec())
    }

    /// Differentiable scalar leaf.
    pub fn input_scalar(&mut self, value: f64) -> Var {
        self.push(Op::Input, Shape::Scalar, vec![value])
    }

    /// Constant vector leaf (recorded, but with no upstream to push into).
    pub fn constant(&mut self, values: &[f64]) -> Var {
        self.push(Op::Const, Shape::Vector(values.len()), values.to_vec())
    }

    pub fn constant_scalar(&mut self, value: f64) -> Var {
        self.push(Op::Const, Shape::Scalar, vec![value])
    }

    // ----- accessors ----------------------------------------------------

    /// Forward value of a var. Panics on a var from a different tape.
    pub fn value(&self, v: Var) -> &[f64] {
        assert_eq!(v.tape_id, self.id, "var from a different tape");
        &self.nodes[v.node].value
    }

    /// Forward value of a scalar var.
    pub fn scalar_value(&self, v: Var) -> f64 {
        assert!(v.shape.is_scalar(), "expected scalar var");
        self.value(v)[0]
    }

    // ----- elementwise binary (with scalar broadcast) ---------------------

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: impl Fn(usize, usize) -> Op,
    ) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let shape = match (a.shape, b.shape) {
            (Shape::Scalar, Shape::Scalar) => Shape::Scalar,
            (Shape::Vector(n), Shape::Scalar) | (Shape::Scalar, Shape::Vector(n)) => {
                Shape::Vector(n)
            }
            (Shape::Vector(n), Shape::Vector(m)) if n == m => Shape::Vector(n),
            (lhs, rhs) => return Err(AutodiffError::ShapeMismatch { op: name, lhs, rhs }),
        };
        let n = shape.len();
        let mut out = Vec::with_capacity(n);
        {
            let av = &self.nodes[a.node].value;
            let bv = &self.nodes[b.node].value;
            let a_scalar = a.shape.is_scalar();
            let b_scalar = b.shape.is_scalar();
            for i in 0..n {
                let x = av[if a_scalar { 0 } else { i }];
                let y = bv[if b_scalar { 0 } else { i }];
                out.push(f(x, y));
            }
        }
        Ok(self.push(op(a.node, b.node), shape, out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div)
    }

    // ----- elementwise unary ---------------------------------------------

    fn unary(
        &mut self,
        a: Var,
        f: impl Fn(f64) -> f64,
        op: impl Fn(usize) -> Op,
    ) -> Result<Var> {
        self.check(a)?;
        let out = self.nodes[a.node].value.iter().map(|&x| f(x)).collect();
        Ok(self.push(op(a.node), a.shape, out))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| -x, Op::Neg)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::abs, Op::Abs)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::sqrt, Op::Sqrt)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| x * x, Op::Square)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::tanh, Op::Tanh)
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::ln, Op::Ln)
    }

    pub fn log10(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::log10, Op::Log10)
    }

    /// c * x elementwise with a literal constant.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, |x| c * x, |n| Op::Scale(n, c))
    }

    /// x + c elementwise with a literal constant.
    pub fn offset(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, |x| x + c, Op::Offset)
    }

    // ----- clamps against constants ---------------------------------------

    fn clamp(
        &mut self,
        a: Var,
        bound: Clamp,
        f: impl Fn(f64, f64) -> f64,
        op: impl Fn(usize, Clamp) -> Op,
    ) -> Result<Var> {
        self.check(a)?;
        if let Clamp::Vector(v) = &bound {
            if v.len() != a.shape.len() {
                return Err(AutodiffError::ShapeMismatch {
                    op: "clamp",
                    lhs: a.shape,
                    rhs: Shape::Vector(v.len()),
                });
            }
        }
        let out = self
            .nodes[a.node]
            .value
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, bound.get(i)))
            .collect();
        Ok(self.push(op(a.node, bound), a.shape, out))
    }

    /// Elementwise min(x, c) with a scalar constant.
    pub fn min_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.clamp(a, Clamp::Scalar(c), f64::min, Op::MinConst)
    }

    /// Elementwise min(x_i, c_i) with a constant bound per element.
    pub fn min_elements(&mut self, a: Var, bounds: &[f64]) -> Result<Var> {
        self.clamp(a, Clamp::Vector(bounds.into()), f64::min, Op::MinConst)
    }

    pub fn max_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.clamp(a, Clamp::Scalar(c), f64::max, Op::MaxConst)
    }

    pub fn max_elements(&mut self, a: Var, bounds: &[f64]) -> Result<Var> {
        self.clamp(a, Clamp::Vector(bounds.into()), f64::max, Op::MaxConst)
    }

    // ----- reductions ------------------------------------------------------

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let s = self.nodes[a.node].value.iter().sum();
        Ok(self.push(Op::Sum(a.node), Shape::Scalar, vec![s]))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let v = &self.nodes[a.node].value;
        let m = v.iter().sum::<f64>() / v.len() as f64;
        Ok(self.push(Op::Mean(a.node), Shape::Scalar, vec![m]))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        match (a.shape, b.shape) {
            (Shape::Vector(n), Shape::Vector(m)) if n == m => {}
            (lhs, rhs) => return Err(AutodiffError::ShapeMismatch { op: "dot", lhs, rhs }),
        }
        let s = self.nodes[a.node]
            .value
            .iter()
            .zip(&self.nodes[b.node].value)
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Op::Dot(a.node, b.node), Shape::Scalar, vec![s]))
    }

    /// Squared L2 norm: sum of squared elements.
    pub fn sumsq(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let s = self.nodes[a.node].value.iter().map(|x| x * x).sum();
        Ok(self.push(Op::SumSq(a.node), Shape::Scalar, vec![s]))
    }

    // ----- linear maps -----------------------------------------------------

    /// y = M x for a constant matrix M; only x is differentiated.
    pub fn matvec_const(&mut self, m: &Rc<ConstMatrix>, x: Var) -> Result<Var> {
        self.check(x)?;
        if x.shape.len() != m.cols {
            return Err(AutodiffError::MatVecMismatch {
                rows: m.rows,
                cols: m.cols,
                len: x.shape.len(),
            });
        }
        let out = m.mul_vec(&self.nodes[x.node].value);
        Ok(self.push(
            Op::MatVecConst(Rc::clone(m), x.node),
            Shape::Vector(m.rows),
            out,
        ))
    }

    /// y = M x where M is a differentiable var holding a row-major
    /// `rows x cols` matrix flattened to a vector.
    pub fn matvec(&mut self, matrix: Var, x: Var, rows: usize, cols: usize) -> Result<Var> {
        self.check(matrix)?;
        self.check(x)?;
        if matrix.shape.len() != rows * cols || x.shape.len() != cols {
            return Err(AutodiffError::MatVecMismatch {
                rows,
                cols,
                len: x.shape.len(),
            });
        }
        let mut out = Vec::with_capacity(rows);
        {
            let mv = &self.nodes[matrix.node].value;
            let xv = &self.nodes[x.node].value;
            for r in 0..rows {
                let row = &mv[r * cols..(r + 1) * cols];
                let mut acc = 0.0;
                for (m, v) in row.iter().zip(xv) {
                    acc += m * v;
                }
                out.push(acc);
            }
        }
        Ok(self.push(
            Op::MatVec {
                matrix: matrix.node,
                x: x.node,
                rows,
                cols,
            },
            Shape::Vector(rows),
            out,
        ))
    }

    // ----- structural ------------------------------------------------------

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        self.check(a)?;
        let n = a.shape.len();
        if len == 0 || start + len > n {
            return Err(AutodiffError::SliceOutOfBounds {
                start,
                end: start + len,
                len: n,
            });
        }
        let out = self.nodes[a.node].value[start..start + len].to_vec();
        Ok(self.push(
            Op::Slice {
                src: a.node,
                start,
            },
            Shape::Vector(len),
            out,
        ))
    }

    /// Concatenates scalars and vectors into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(AutodiffError::EmptyConcat);
        }
        for p in parts {
            self.check(*p)?;
        }
        let total: usize = parts.iter().map(|p| p.shape.len()).sum();
        let mut out = Vec::with_capacity(total);
        for p in parts {
            out.extend_from_slice(&self.nodes[p.node].value);
        }
        let ids = parts.iter().map(|p| p.node).collect();
        Ok(self.push(Op::Concat(ids), Shape::Vector(total), out))
    }

    // ----- reverse sweep ---------------------------------------------------

    /// Computes d(root)/d(node) for every node of the tape in one reverse
    /// sweep. The root must be scalar; its own adjoint is 1. Nodes that do
    /// not feed the root keep adjoint zero.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        self.check(root)?;
        if !root.shape.is_scalar() {
            return Err(AutodiffError::NonScalarRoot(root.shape));
        }
        let mut adjoints: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        adjoints[root.node][0] = 1.0;

        for id in (0..=root.node).rev() {
            // Operand ids are strictly smaller than `id`, so the adjoint of
            // `id` and the adjoints it feeds never alias.
            let (lower, upper) = adjoints.split_at_mut(id);
            let g: &[f64] = &upper[0];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            let node = &self.nodes[id];
            match &node.op {
                Op::Input | Op::Const => {}
                Op::Add(a, b) => {
                    self.binary_back(*a, *b, g, lower, |_, _, g| (g, g));
                }
                Op::Sub(a, b) => {
                    self.binary_back(*a, *b, g, lower, |_, _, g| (g, -g));
                }
                Op::Mul(a, b) => {
                    self.binary_back(*a, *b, g, lower, |x, y, g| (g * y, g * x));
                }
                Op::Div(a, b) => {
                    self.binary_back(*a, *b, g, lower, |x, y, g| (g / y, -g * x / (y * y)));
                }
                Op::Neg(a) => {
                    for (adj, gv) in lower[*a].iter_mut().zip(g) {
                        *adj -= gv;
                    }
                }
                Op::Abs(a) => {
                    // subgradient at 0 defined as 0
                    let av = &self.nodes[*a].value;
                    for i in 0..g.len() {
                        let s = if av[i] > 0.0 {
                            1.0
                        } else if av[i] < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        lower[*a][i] += s * g[i];
                    }
                }
                Op::Sqrt(a) => {
                    let yv = &node.value;
                    for i in 0..g.len() {
                        lower[*a][i] += g[i] / (2.0 * yv[i]);
                    }
                }
                Op::Square(a) => {
                    let av = &self.nodes[*a].value;
                    for i in 0..g.len() {
                        lower[*a][i] += 2.0 * av[i] * g[i];
                    }
                }
                Op::Tanh(a) => {
                    let yv = &node.value;
                    for i in 0..g.len() {
                        lower[*a][i] += (1.0 - yv[i] * yv[i]) * g[i];
                    }
                }
                Op::Ln(a) => {
                    let av = &self.nodes[*a].value;
                    for i in 0..g.len() {
                        lower[*a][i] += g[i] / av[i];
                    }
                }
                Op::Log10(a) => {
                    let av = &self.nodes[*a].value;
                    let ln10 = std::f64::consts::LN_10;
                    for i in 0..g.len() {
                        lower[*a][i] += g[i] / (av[i] * ln10);
                    }
                }
                Op::Scale(a, c) => {
                    for (adj, gv) in lower[*a].iter_mut().zip(g) {
                        *adj += c * gv;
                    }
                }
                Op::Offset(a) => {
                    for (adj, gv) in lower[*a].iter_mut().zip(g) {
                        *adj += gv;
                    }
                }
                Op::MinConst(a, bound) => {
                    // at a tie the identity branch is taken
                    let av = &self.nodes[*a].value;
                    for i in 0..g.len() {
                        if av[i] <= bound.get(i) {
                            lower[*a][i] += g[i];
                        }
                    }
                }
                Op::MaxConst(a, bound) => {
                    let av = &self.nodes[*a].value;
                    for i in 0..g.len() {
                        if av[i] >= bound.get(i) {
                            lower[*a][i] += g[i];
                        }
                    }
                }
                Op::Sum(a) => {
                    let gs = g[0];
                    for adj in lower[*a].iter_mut() {
                        *adj += gs;
                    }
                }
                Op::Mean(a) => {
                    let gs = g[0] / lower[*a].len() as f64;
                    for adj in lower[*a].iter_mut() {
                        *adj += gs;
                    }
                }
                Op::Dot(a, b) => {
                    let gs = g[0];
                    if a == b {
                        let av = &self.nodes[*a].value;
                        for (adj, x) in lower[*a].iter_mut().zip(av) {
                            *adj += 2.0 * gs * x;
                        }
                    } else {
                        let av = &self.nodes[*a].value;
                        let bv = &self.nodes[*b].value;
                        for i in 0..av.len() {
                            lower[*a][i] += gs * bv[i];
                        }
                        for i in 0..bv.len() {
                            lower[*b][i] += gs * av[i];
                        }
                    }
                }
                Op::SumSq(a) => {
                    let gs = g[0];
                    let av = &self.nodes[*a].value;
                    for i in 0..av.len() {
                        lower[*a][i] += 2.0 * gs * av[i];
                    }
                }
                Op::MatVecConst(m, x) => {
                    m.apply_transposed_into(g, &mut lower[*x]);
                }
                Op::MatVec {
                    matrix,
                    x,
                    rows,
                    cols,
                } => {
                    let (rows, cols) = (*rows, *cols);
                    let xv = &self.nodes[*x].value;
                    let mv = &self.nodes[*matrix].value;
                    // d/dM: g outer x; d/dx: M^T g
                    {
                        let adj_m = &mut lower[*matrix];
                        for r in 0..rows {
                            let gr = g[r];
                            if gr == 0.0 {
                                continue;
                            }
                            let row = &mut adj_m[r * cols..(r + 1) * cols];
                            for (a, v) in row.iter_mut().zip(xv) {
                                *a += gr * v;
                            }
                        }
                    }
                    {
                        let adj_x = &mut lower[*x];
                        for r in 0..rows {
                            let gr = g[r];
                            if gr == 0.0 {
                                continue;
                            }
                            let row = &mv[r * cols..(r + 1) * cols];
                            for (a, m) in adj_x.iter_mut().zip(row) {
                                *a += gr * m;
                            }
                        }
                    }
                }
                Op::Slice { src, start } => {
                    let adj = &mut lower[*src];
                    for (i, gv) in g.iter().enumerate() {
                        adj[start + i] += gv;
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let len = self.nodes[*p].value.len();
                        let adj = &mut lower[*p];
                        for i in 0..len {
                            adj[i] += g[offset + i];
                        }
                        offset += len;
                    }
                }
            }
        }
        Ok(Gradients {
            tape_id: self.id,
            adjoints,
        })
    }

    fn binary_back(
        &self,
        a: usize,
        b: usize,
        g: &[f64],
        lower: &mut [Vec<f64>],
        f: impl Fn(f64, f64, f64) -> (f64, f64),
    ) {
        let a_scalar = self.nodes[a].shape.is_scalar();
        let b_scalar = self.nodes[b].shape.is_scalar();
        let av = &self.nodes[a].value;
        let bv = &self.nodes[b].value;
        for (i, &gv) in g.iter().enumerate() {
            let x = av[if a_scalar { 0 } else { i }];
            let y = bv[if b_scalar { 0 } else { i }];
            let (da, db) = f(x, y, gv);
            lower[a][if a_scalar { 0 } else { i }] += da;
            lower[b][if b_scalar { 0 } else { i }] += db;
        }
    }

    /// Signs of every kink-op operand relative to its threshold (`abs` at 0,
    /// clamps at their bound). Two evaluations of the same graph whose
    /// signatures differ straddle a non-differentiable point.
    pub fn kink_signature(&self) -> Vec<i8> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Abs(a) => {
                    for &x in &self.nodes[*a].value {
                        sig.push(sign8(x));
                    }
                }
                Op::MinConst(a, bound) | Op::MaxConst(a, bound) => {
                    for (i, &x) in self.nodes[*a].value.iter().enumerate() {
                        sig.push(sign8(x - bound.get(i)));
                    }
                }
                _ => {}
            }
        }
        sig
    }
}

fn sign8(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Adjoints of every tape node with respect to a scalar root.
#[derive(Debug)]
pub struct Gradients {
    tape_id: u64,
    adjoints: Vec<Vec<f64>>,
}

impl Gradients {
    /// Adjoint of a var (same shape as the var's value).
    pub fn wrt(&self, v: Var) -> &[f64] {
        assert_eq!(v.tape_id, self.tape_id, "var from a different tape");
        &self.adjoints[v.node_id()]
    }

    pub fn scalar_wrt(&self, v: Var) -> f64 {
        assert!(v.shape().is_scalar(), "expected scalar var");
        self.wrt(v)[0]
    }
}

//! Operation tape for reverse-mode differentiation.
//!
//! Every primitive appends one node holding its forward value. `backward`
//! walks the nodes once in reverse creation order, so the tape is always in
//! topological order. Parameters are read in place from a borrowed
//! [`ParamStore`]; their gradients come back as a [`Gradients`] buffer.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use super::{DiffError, Gradients, ParamId, ParamStore, Shape, Tensor};
use crate::math;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    idx: u32,
}

/// Primitive kinds, used for error reporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Param,
    Constant,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    Scale,
    Tanh,
    Sigmoid,
    Log,
    Softmax,
    Concat,
    Stack,
    Slice,
    Embedding,
    Pick,
    Sum,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OpKind::Leaf => "leaf",
            OpKind::Param => "param",
            OpKind::Constant => "constant",
            OpKind::MatMul => "matmul",
            OpKind::Transpose => "transpose",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Scale => "scale",
            OpKind::Tanh => "tanh",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Log => "log",
            OpKind::Softmax => "softmax",
            OpKind::Concat => "concat",
            OpKind::Stack => "stack",
            OpKind::Slice => "slice",
            OpKind::Embedding => "embedding",
            OpKind::Pick => "pick",
            OpKind::Sum => "sum",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Constant,
    MatVec { a: usize, b: usize },
    MatMul { a: usize, b: usize },
    Transpose { a: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: f64 },
    Tanh { a: usize },
    Sigmoid { a: usize },
    Log { a: usize, floor: f64 },
    Softmax { a: usize },
    Concat(Vec<usize>),
    Stack(Vec<usize>),
    Slice { a: usize, start: usize },
    Embedding { table: usize, row: usize },
    Pick { a: usize, index: usize },
    Sum { a: usize },
}

struct Node {
    shape: Shape,
    // `None` for parameter nodes, whose values live in the store.
    value: Option<Vec<f64>>,
    op: Op,
    needs_grad: bool,
}

/// Records primitive operations for one forward pass.
///
/// A tape is used from a single thread; build a fresh one per forward pass.
pub struct Tape<'p> {
    id: u64,
    store: Option<&'p ParamStore>,
    params_need_grad: bool,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<usize>>,
}

/// Result of [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Backward {
    tape: u64,
    params: Option<Gradients>,
    leaves: BTreeMap<u32, Tensor>,
}

impl Backward {
    /// Gradients of all store parameters (zeros for unreached ones).
    pub fn params(&self) -> Option<&Gradients> {
        self.params.as_ref()
    }

    pub fn into_params(self) -> Option<Gradients> {
        self.params
    }

    /// Gradient of a leaf created with `requires_grad = true`.
    pub fn wrt(&self, var: Var) -> Option<&Tensor> {
        if var.tape != self.tape {
            return None;
        }
        self.leaves.get(&var.idx)
    }
}

impl Tape<'static> {
    /// A tape without parameters, for free-standing computations.
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            store: None,
            params_need_grad: false,
            nodes: Vec::new(),
            param_nodes: Vec::new(),
        }
    }
}

impl Default for Tape<'static> {
    fn default() -> Self {
        Tape::new()
    }
}

impl<'p> Tape<'p> {
    /// A tape whose parameters receive gradients.
    pub fn with_params(store: &'p ParamStore) -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            store: Some(store),
            params_need_grad: true,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
        }
    }

    /// A tape for inference: parameters are read but treated as constants.
    pub fn inference(store: &'p ParamStore) -> Self {
        let mut tape = Tape::with_params(store);
        tape.params_need_grad = false;
        tape
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn index(&self, v: Var) -> Result<usize, DiffError> {
        if v.tape != self.id || v.idx as usize >= self.nodes.len() {
            return Err(DiffError::ForeignVar);
        }
        Ok(v.idx as usize)
    }

    fn val(&self, i: usize) -> &[f64] {
        let node = &self.nodes[i];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(id)) => self
                .store
                .expect("param node implies a store")
                .get(*id)
                .data(),
            (None, _) => unreachable!("only param nodes borrow their value"),
        }
    }

    fn push(&mut self, shape: Shape, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.numel(), value.len());
        self.nodes.push(Node {
            shape,
            value: Some(value),
            op,
            needs_grad,
        });
        Var {
            tape: self.id,
            idx: (self.nodes.len() - 1) as u32,
        }
    }

    fn ng(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    pub fn value(&self, v: Var) -> Result<&[f64], DiffError> {
        let i = self.index(v)?;
        Ok(self.val(i))
    }

    pub fn shape(&self, v: Var) -> Result<&Shape, DiffError> {
        let i = self.index(v)?;
        Ok(&self.nodes[i].shape)
    }

    pub fn tensor(&self, v: Var) -> Result<Tensor, DiffError> {
        let i = self.index(v)?;
        Tensor::new(self.nodes[i].shape.clone(), self.val(i).to_vec())
    }

    /// Value of a one-element variable.
    pub fn scalar(&self, v: Var) -> Result<f64, DiffError> {
        let i = self.index(v)?;
        let shape = &self.nodes[i].shape;
        if !shape.is_scalar() {
            return Err(DiffError::NotScalar(shape.clone()));
        }
        Ok(self.val(i)[0])
    }

    /// Input tensor; when `requires_grad` its gradient is reported by backward.
    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Var {
        let shape = t.shape().clone();
        self.push(shape, t.into_data(), Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        let shape = t.shape().clone();
        self.push(shape, t.into_data(), Op::Constant, false)
    }

    pub fn constant_vector(&mut self, values: &[f64]) -> Var {
        self.constant(Tensor::vector(values.to_vec()))
    }

    /// Variable for a store parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Result<Var, DiffError> {
        let store = self.store.ok_or(DiffError::NoParamStore)?;
        if id.0 >= store.len() {
            return Err(DiffError::UnknownParam(id.0));
        }
        if let Some(i) = self.param_nodes[id.0] {
            return Ok(Var {
                tape: self.id,
                idx: i as u32,
            });
        }
        self.nodes.push(Node {
            shape: store.get(id).shape().clone(),
            value: None,
            op: Op::Param(id),
            needs_grad: self.params_need_grad,
        });
        let i = self.nodes.len() - 1;
        self.param_nodes[id.0] = Some(i);
        Ok(Var {
            tape: self.id,
            idx: i as u32,
        })
    }

    /// Matrix product. Supports `[m,k]·[k]` and `[m,k]·[k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        let sa = self.nodes[ia].shape.clone();
        let sb = self.nodes[ib].shape.clone();
        let mismatch = || DiffError::ShapeMismatch {
            op: OpKind::MatMul,
            left: sa.clone(),
            right: sb.clone(),
        };
        if sa.rank() != 2 {
            return Err(mismatch());
        }
        let (m, k) = (sa.dims()[0], sa.dims()[1]);
        let needs = self.ng(ia) || self.ng(ib);
        match *sb.dims() {
            [kb] if kb == k => {
                let (av, bv) = (self.val(ia), self.val(ib));
                let out: Vec<f64> = (0..m)
                    .map(|i| math::dot(&av[i * k..(i + 1) * k], bv))
                    .collect();
                Ok(self.push(Shape::vector(m), out, Op::MatVec { a: ia, b: ib }, needs))
            }
            [kb, n] if kb == k => {
                let (av, bv) = (self.val(ia), self.val(ib));
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    let row = &mut out[i * n..(i + 1) * n];
                    for p in 0..k {
                        math::axpy(av[i * k + p], &bv[p * n..(p + 1) * n], row);
                    }
                }
                Ok(self.push(Shape::matrix(m, n), out, Op::MatMul { a: ia, b: ib }, needs))
            }
            _ => Err(mismatch()),
        }
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, DiffError> {
        let ia = self.index(a)?;
        let s = self.nodes[ia].shape.clone();
        if s.rank() != 2 {
            return Err(DiffError::BadOperand {
                op: OpKind::Transpose,
                shape: s,
            });
        }
        let (m, n) = (s.dims()[0], s.dims()[1]);
        let av = self.val(ia);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = av[i * n + j];
            }
        }
        let needs = self.ng(ia);
        Ok(self.push(Shape::matrix(n, m), out, Op::Transpose { a: ia }, needs))
    }

    fn binary(
        &mut self,
        kind: OpKind,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(usize, usize, Shape, Vec<f64>), DiffError> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        let (sa, sb) = (&self.nodes[ia].shape, &self.nodes[ib].shape);
        if sa != sb {
            return Err(DiffError::ShapeMismatch {
                op: kind,
                left: sa.clone(),
                right: sb.clone(),
            });
        }
        let shape = sa.clone();
        let out = self
            .val(ia)
            .iter()
            .zip(self.val(ib))
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok((ia, ib, shape, out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (ia, ib, shape, out) = self.binary(OpKind::Add, a, b, |x, y| x + y)?;
        let needs = self.ng(ia) || self.ng(ib);
        Ok(self.push(shape, out, Op::Add { a: ia, b: ib }, needs))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (ia, ib, shape, out) = self.binary(OpKind::Sub, a, b, |x, y| x - y)?;
        let needs = self.ng(ia) || self.ng(ib);
        Ok(self.push(shape, out, Op::Sub { a: ia, b: ib }, needs))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (ia, ib, shape, out) = self.binary(OpKind::Mul, a, b, |x, y| x * y)?;
        let needs = self.ng(ia) || self.ng(ib);
        Ok(self.push(shape, out, Op::Mul { a: ia, b: ib }, needs))
    }

    /// Multiplies by a constant.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, DiffError> {
        let ia = self.index(a)?;
        let out = self.val(ia).iter().map(|x| x * c).collect();
        let (shape, needs) = (self.nodes[ia].shape.clone(), self.ng(ia));
        Ok(self.push(shape, out, Op::Scale { a: ia, c }, needs))
    }

    fn unary(
        &mut self,
        a: Var,
        f: impl Fn(f64) -> f64,
        op: impl FnOnce(usize) -> Op,
    ) -> Result<Var, DiffError> {
        let ia = self.index(a)?;
        let out = self.val(ia).iter().map(|&x| f(x)).collect();
        let (shape, needs) = (self.nodes[ia].shape.clone(), self.ng(ia));
        Ok(self.push(shape, out, op(ia), needs))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, DiffError> {
        self.unary(a, math::tanh, |a| Op::Tanh { a })
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, DiffError> {
        self.unary(a, math::sigmoid, |a| Op::Sigmoid { a })
    }

    /// Natural log with inputs clamped below at the smallest normal `f64`,
    /// so the output stays finite.
    pub fn log(&mut self, a: Var) -> Result<Var, DiffError> {
        self.log_clamped(a, f64::MIN_POSITIVE)
    }

    /// `ln(max(x, floor))`; the gradient is zero where the clamp is active.
    pub fn log_clamped(&mut self, a: Var, floor: f64) -> Result<Var, DiffError> {
        self.unary(
            a,
            move |x| math::ln(if x > floor { x } else { floor }),
            |a| Op::Log { a, floor },
        )
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var, DiffError> {
        let ia = self.index(a)?;
        let shape = self.nodes[ia].shape.clone();
        let out = softmax_rows(self.val(ia), shape.last());
        let needs = self.ng(ia);
        Ok(self.push(shape, out, Op::Softmax { a: ia }, needs))
    }

    /// Concatenates rank-1 variables.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        if parts.is_empty() {
            return Err(DiffError::EmptyInput(OpKind::Concat));
        }
        let mut idx = Vec::with_capacity(parts.len());
        let mut out = Vec::new();
        let mut needs = false;
        for &p in parts {
            let i = self.index(p)?;
            let s = &self.nodes[i].shape;
            if s.rank() != 1 {
                return Err(DiffError::BadOperand {
                    op: OpKind::Concat,
                    shape: s.clone(),
                });
            }
            out.extend_from_slice(self.val(i));
            needs |= self.ng(i);
            idx.push(i);
        }
        Ok(self.push(Shape::vector(out.len()), out, Op::Concat(idx), needs))
    }

    /// Stacks equal-length rank-1 variables as the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var, DiffError> {
        if rows.is_empty() {
            return Err(DiffError::EmptyInput(OpKind::Stack));
        }
        let first = self.index(rows[0])?;
        let s0 = self.nodes[first].shape.clone();
        if s0.rank() != 1 {
            return Err(DiffError::BadOperand {
                op: OpKind::Stack,
                shape: s0,
            });
        }
        let n = s0.numel();
        let mut idx = Vec::with_capacity(rows.len());
        let mut out = Vec::with_capacity(n * rows.len());
        let mut needs = false;
        for &r in rows {
            let i = self.index(r)?;
            if self.nodes[i].shape != s0 {
                return Err(DiffError::ShapeMismatch {
                    op: OpKind::Stack,
                    left: s0,
                    right: self.nodes[i].shape.clone(),
                });
            }
            out.extend_from_slice(self.val(i));
            needs |= self.ng(i);
            idx.push(i);
        }
        Ok(self.push(Shape::matrix(rows.len(), n), out, Op::Stack(idx), needs))
    }

    /// Elements `start..start + len` of a rank-1 variable.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var, DiffError> {
        let ia = self.index(a)?;
        let s = self.nodes[ia].shape.clone();
        if s.rank() != 1 || len == 0 || start + len > s.numel() {
            return Err(DiffError::IndexOutOfRange {
                op: OpKind::Slice,
                index: start + len,
                extent: s.numel(),
            });
        }
        let out = self.val(ia)[start..start + len].to_vec();
        let needs = self.ng(ia);
        Ok(self.push(Shape::vector(len), out, Op::Slice { a: ia, start }, needs))
    }

    /// Row `row` of a `[rows, dim]` table.
    pub fn embedding(&mut self, table: Var, row: usize) -> Result<Var, DiffError> {
        let it = self.index(table)?;
        let s = self.nodes[it].shape.clone();
        if s.rank() != 2 {
            return Err(DiffError::BadOperand {
                op: OpKind::Embedding,
                shape: s,
            });
        }
        let (rows, dim) = (s.dims()[0], s.dims()[1]);
        if row >= rows {
            return Err(DiffError::IndexOutOfRange {
                op: OpKind::Embedding,
                index: row,
                extent: rows,
            });
        }
        let out = self.val(it)[row * dim..(row + 1) * dim].to_vec();
        let needs = self.ng(it);
        Ok(self.push(
            Shape::vector(dim),
            out,
            Op::Embedding { table: it, row },
            needs,
        ))
    }

    /// Element `index` of the flattened value, as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var, DiffError> {
        let ia = self.index(a)?;
        let n = self.nodes[ia].shape.numel();
        if index >= n {
            return Err(DiffError::IndexOutOfRange {
                op: OpKind::Pick,
                index,
                extent: n,
            });
        }
        let out = vec![self.val(ia)[index]];
        let needs = self.ng(ia);
        Ok(self.push(Shape::scalar(), out, Op::Pick { a: ia, index }, needs))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var, DiffError> {
        let ia = self.index(a)?;
        let total: f64 = self.val(ia).iter().sum();
        let needs = self.ng(ia);
        Ok(self.push(Shape::scalar(), vec![total], Op::Sum { a: ia }, needs))
    }

    /// Sums several scalars (a chain of `add`).
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var, DiffError> {
        let (&first, rest) = terms
            .split_first()
            .ok_or(DiffError::EmptyInput(OpKind::Add))?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// Reverse pass from a scalar output.
    ///
    /// Gradients from several uses of the same value are summed.
    pub fn backward(&self, output: Var) -> Result<Backward, DiffError> {
        let out = self.index(output)?;
        if !self.nodes[out].shape.is_scalar() {
            return Err(DiffError::NotScalar(self.nodes[out].shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; out + 1];
        grads[out] = Some(vec![1.0]);
        let mut params = self
            .store
            .filter(|_| self.params_need_grad)
            .map(Gradients::zeros_like);
        let mut leaves = BTreeMap::new();

        for i in (0..=out).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                if matches!(node.op, Op::Leaf) {
                    leaves.insert(i as u32, Tensor::zeros(node.shape.clone()));
                }
                continue;
            };
            self.propagate(i, &g, &mut grads);
            match node.op {
                Op::Param(id) => {
                    if let Some(p) = params.as_mut() {
                        math::axpy(1.0, &g, p.get_mut(id).data_mut());
                    }
                }
                Op::Leaf => {
                    leaves.insert(i as u32, Tensor::new(node.shape.clone(), g)?);
                }
                _ => {}
            }
        }
        Ok(Backward {
            tape: self.id,
            params,
            leaves,
        })
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let mut acc = |j: usize, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[j].needs_grad {
                return;
            }
            let buf = grads[j].get_or_insert_with(|| vec![0.0; self.nodes[j].shape.numel()]);
            f(buf);
        };
        match &node.op {
            Op::Leaf | Op::Param(_) | Op::Constant => {}
            &Op::MatVec { a, b } => {
                let k = self.nodes[a].shape.dims()[1];
                let (av, bv) = (self.val(a), self.val(b));
                acc(a, &mut |ga| {
                    for (r, &gi) in g.iter().enumerate() {
                        if gi != 0.0 {
                            math::axpy(gi, bv, &mut ga[r * k..(r + 1) * k]);
                        }
                    }
                });
                acc(b, &mut |gb| {
                    for (r, &gi) in g.iter().enumerate() {
                        if gi != 0.0 {
                            math::axpy(gi, &av[r * k..(r + 1) * k], gb);
                        }
                    }
                });
            }
            &Op::MatMul { a, b } => {
                let (m, k) = (self.nodes[a].shape.dims()[0], self.nodes[a].shape.dims()[1]);
                let n = self.nodes[b].shape.dims()[1];
                let (av, bv) = (self.val(a), self.val(b));
                acc(a, &mut |ga| {
                    for r in 0..m {
                        for p in 0..k {
                            ga[r * k + p] +=
                                math::dot(&g[r * n..(r + 1) * n], &bv[p * n..(p + 1) * n]);
                        }
                    }
                });
                acc(b, &mut |gb| {
                    for r in 0..m {
                        for p in 0..k {
                            math::axpy(
                                av[r * k + p],
                                &g[r * n..(r + 1) * n],
                                &mut gb[p * n..(p + 1) * n],
                            );
                        }
                    }
                });
            }
            &Op::Transpose { a } => {
                let (m, n) = (self.nodes[a].shape.dims()[0], self.nodes[a].shape.dims()[1]);
                acc(a, &mut |ga| {
                    for r in 0..m {
                        for c in 0..n {
                            ga[r * n + c] += g[c * m + r];
                        }
                    }
                });
            }
            &Op::Add { a, b } => {
                acc(a, &mut |ga| math::axpy(1.0, g, ga));
                acc(b, &mut |gb| math::axpy(1.0, g, gb));
            }
            &Op::Sub { a, b } => {
                acc(a, &mut |ga| math::axpy(1.0, g, ga));
                acc(b, &mut |gb| math::axpy(-1.0, g, gb));
            }
            &Op::Mul { a, b } => {
                let (av, bv) = (self.val(a), self.val(b));
                acc(a, &mut |ga| {
                    for ((x, gi), bi) in ga.iter_mut().zip(g).zip(bv) {
                        *x += gi * bi;
                    }
                });
                acc(b, &mut |gb| {
                    for ((x, gi), ai) in gb.iter_mut().zip(g).zip(av) {
                        *x += gi * ai;
                    }
                });
            }
            &Op::Scale { a, c } => acc(a, &mut |ga| math::axpy(c, g, ga)),
            &Op::Tanh { a } => {
                let y = self.val(i);
                acc(a, &mut |ga| {
                    for ((x, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        *x += gi * (1.0 - yi * yi);
                    }
                });
            }
            &Op::Sigmoid { a } => {
                let y = self.val(i);
                acc(a, &mut |ga| {
                    for ((x, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        *x += gi * yi * (1.0 - yi);
                    }
                });
            }
            &Op::Log { a, floor } => {
                let av = self.val(a);
                acc(a, &mut |ga| {
                    for ((x, gi), ai) in ga.iter_mut().zip(g).zip(av) {
                        if *ai > floor {
                            *x += gi / ai;
                        }
                    }
                });
            }
            &Op::Softmax { a } => {
                let y = self.val(i);
                let w = node.shape.last();
                acc(a, &mut |ga| {
                    for ((gr, yr), xr) in g.chunks(w).zip(y.chunks(w)).zip(ga.chunks_mut(w)) {
                        let s = math::dot(gr, yr);
                        for ((x, gi), yi) in xr.iter_mut().zip(gr).zip(yr) {
                            *x += yi * (gi - s);
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.nodes[p].shape.numel();
                    acc(p, &mut |gp| math::axpy(1.0, &g[off..off + n], gp));
                    off += n;
                }
            }
            Op::Stack(rows) => {
                let n = node.shape.last();
                for (r, &p) in rows.iter().enumerate() {
                    acc(p, &mut |gp| math::axpy(1.0, &g[r * n..(r + 1) * n], gp));
                }
            }
            &Op::Slice { a, start } => {
                acc(a, &mut |ga| {
                    math::axpy(1.0, g, &mut ga[start..start + g.len()])
                });
            }
            &Op::Embedding { table, row } => {
                let d = g.len();
                acc(table, &mut |gt| {
                    math::axpy(1.0, g, &mut gt[row * d..(row + 1) * d])
                });
            }
            &Op::Pick { a, index } => acc(a, &mut |ga| ga[index] += g[0]),
            &Op::Sum { a } => acc(a, &mut |ga| ga.iter_mut().for_each(|x| *x += g[0])),
        }
    }
}

/// Numerically stable softmax over consecutive rows of width `width`.
pub fn softmax_rows(values: &[f64], width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for row in values.chunks(width) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        let mut total = 0.0;
        for &x in row {
            let e = math::exp(x - max);
            total += e;
            out.push(e);
        }
        out[start..].iter_mut().for_each(|e| *e /= total);
    }
    out
}

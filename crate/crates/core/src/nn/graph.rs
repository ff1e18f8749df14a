//! Reverse-mode tape over dense matrices.
//!
//! Every operation appends a node holding its value; [`Graph::backward`] walks
//! the nodes in reverse and accumulates gradients into one slot per parameter.
//! Rows are batch entries throughout.

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{Matrix, Real};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MulConst(NodeId, Matrix<T>),
    Scale(NodeId, T),
    AddScalar(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Abs(NodeId),
    Square(NodeId),
    Exp(NodeId),
    LogSoftmax(NodeId),
    Gather(NodeId, Vec<usize>),
    SumCols(NodeId),
    Sum(NodeId),
    Min(NodeId, NodeId),
    Clamp(NodeId, T, T),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols(NodeId, usize),
    SliceRows(NodeId, usize),
    BatchedVecMat(NodeId, NodeId),
    SelectRows(NodeId, Vec<usize>),
    Reshape(NodeId),
}

struct Node<T> {
    op: Op<T>,
    // Parameter nodes read their value from the store.
    value: Option<Matrix<T>>,
}

pub struct Graph<'p, T> {
    store: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: Vec<Option<NodeId>>,
}

fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> NnError {
    NnError::ShapeMismatch {
        op,
        left: a,
        right: b,
    }
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(store: &'p ParamStore<T>) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParamStore<T> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix<T> {
        let node = &self.nodes[id.0];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.store.get(*p),
            _ => unreachable!("non-parameter nodes own their value"),
        }
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.value(id).shape()
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> T {
        let v = self.value(id);
        debug_assert_eq!(v.shape(), (1, 1));
        v.data[0]
    }

    fn push(&mut self, op: Op<T>, value: Matrix<T>) -> NodeId {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant input; receives no gradient.
    pub fn input(&mut self, value: Matrix<T>) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Parameter leaf; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        let n = NodeId(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(n);
        n
    }

    /// Copy of a value cut off from the tape.
    pub fn detach(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).clone();
        self.input(v)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols != bv.rows {
            return Err(shape_err("matmul", av.shape(), bv.shape()));
        }
        let v = av.matmul(bv);
        Ok(self.push(Op::MatMul(a, b), v))
    }

    /// `x + b` with `b` a single row broadcast over the rows of `x`.
    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows != 1 || bv.cols != xv.cols {
            return Err(shape_err("add_bias", xv.shape(), bv.shape()));
        }
        let mut v = xv.clone();
        for r in 0..v.rows {
            for (o, &bb) in v.row_mut(r).iter_mut().zip(&bv.data) {
                *o = *o + bb;
            }
        }
        Ok(self.push(Op::AddBias(x, b), v))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(), NnError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), v))
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mul_const(&mut self, a: NodeId, c: Matrix<T>) -> Result<NodeId, NnError> {
        let sa = self.shape(a);
        if sa != c.shape() {
            return Err(shape_err("mul_const", sa, c.shape()));
        }
        let v = self.value(a).zip_map(&c, |x, y| x * y);
        Ok(self.push(Op::MulConst(a, c), v))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let s = T::from_f64(s);
        let v = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), v)
    }

    pub fn add_scalar(&mut self, a: NodeId, s: f64) -> NodeId {
        let s = T::from_f64(s);
        let v = self.value(a).map(|x| x + s);
        self.push(Op::AddScalar(a), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(T::zero()));
        self.push(Op::Relu(a), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| T::one() / (T::one() + (-x).exp()));
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.tanh());
        self.push(Op::Tanh(a), v)
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.abs());
        self.push(Op::Abs(a), v)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.exp());
        self.push(Op::Exp(a), v)
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let mut v = x.clone();
        for r in 0..v.rows {
            let row = v.row_mut(r);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = row.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
            for z in row.iter_mut() {
                *z = *z - lse;
            }
        }
        self.push(Op::LogSoftmax(a), v)
    }

    /// Picks column `idx[r]` from each row `r`; result is a column vector.
    pub fn gather(&mut self, a: NodeId, idx: Vec<usize>) -> Result<NodeId, NnError> {
        let x = self.value(a);
        if idx.len() != x.rows || idx.iter().any(|&i| i >= x.cols) {
            return Err(shape_err("gather", x.shape(), (idx.len(), 1)));
        }
        let data = idx.iter().enumerate().map(|(r, &c)| x.get(r, c)).collect();
        let v = Matrix::from_vec(x.rows, 1, data);
        Ok(self.push(Op::Gather(a, idx), v))
    }

    /// Row sums as a column vector.
    pub fn sum_cols(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let data = (0..x.rows).map(|r| x.row(r).iter().copied().sum()).collect();
        let v = Matrix::from_vec(x.rows, 1, data);
        self.push(Op::SumCols(a), v)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data.iter().copied().sum();
        self.push(Op::Sum(a), Matrix::from_vec(1, 1, vec![s]))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).len().max(1);
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// Elementwise minimum; ties send the gradient to `a`.
    pub fn min(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.same_shape("min", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| if x <= y { x } else { y });
        Ok(self.push(Op::Min(a, b), v))
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let (lo, hi) = (T::from_f64(lo), T::from_f64(hi));
        let v = self.value(a).map(|x| x.max(lo).min(hi));
        self.push(Op::Clamp(a, lo, hi), v)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NnError> {
        let rows = self.shape(parts[0]).0;
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(shape_err("concat_cols", (rows, cols), s));
            }
            cols += s.1;
        }
        let mut v = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p);
                v.row_mut(r)[off..off + src.cols].copy_from_slice(src.row(r));
                off += src.cols;
            }
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), v))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, NnError> {
        let cols = self.shape(parts[0]).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let src = self.value(p);
            if src.cols != cols {
                return Err(shape_err("concat_rows", (rows, cols), src.shape()));
            }
            data.extend_from_slice(&src.data);
            rows += src.rows;
        }
        let v = Matrix::from_vec(rows, cols, data);
        Ok(self.push(Op::ConcatRows(parts.to_vec()), v))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId, NnError> {
        let x = self.value(a);
        if start + len > x.cols {
            return Err(shape_err("slice_cols", x.shape(), (start, len)));
        }
        let mut v = Matrix::zeros(x.rows, len);
        for r in 0..x.rows {
            v.row_mut(r).copy_from_slice(&x.row(r)[start..start + len]);
        }
        Ok(self.push(Op::SliceCols(a, start), v))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId, NnError> {
        let x = self.value(a);
        if start + len > x.rows {
            return Err(shape_err("slice_rows", x.shape(), (start, len)));
        }
        let v = Matrix::from_vec(len, x.cols, x.data[start * x.cols..(start + len) * x.cols].to_vec());
        Ok(self.push(Op::SliceRows(a, start), v))
    }

    /// Rows `idx[k]` of `a` stacked in order; indices may repeat.
    pub fn select_rows(&mut self, a: NodeId, idx: Vec<usize>) -> Result<NodeId, NnError> {
        let x = self.value(a);
        if idx.iter().any(|&i| i >= x.rows) {
            return Err(shape_err("select_rows", x.shape(), (idx.len(), x.cols)));
        }
        let mut data = Vec::with_capacity(idx.len() * x.cols);
        for &i in &idx {
            data.extend_from_slice(x.row(i));
        }
        let v = Matrix::from_vec(idx.len(), x.cols, data);
        Ok(self.push(Op::SelectRows(a, idx), v))
    }

    /// Same row-major data viewed with a new shape.
    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId, NnError> {
        let x = self.value(a);
        if rows * cols != x.len() {
            return Err(shape_err("reshape", x.shape(), (rows, cols)));
        }
        let v = Matrix::from_vec(rows, cols, x.data.clone());
        Ok(self.push(Op::Reshape(a), v))
    }

    /// Per-row vector-matrix product: row `b` of `v` (length `n`) times the
    /// `n`x`e` matrix stored row-major in row `b` of `m`.
    pub fn batched_vec_mat(&mut self, v: NodeId, m: NodeId) -> Result<NodeId, NnError> {
        let (vv, mv) = (self.value(v), self.value(m));
        let n = vv.cols;
        if vv.rows != mv.rows || n == 0 || mv.cols % n != 0 {
            return Err(shape_err("batched_vec_mat", vv.shape(), mv.shape()));
        }
        let e = mv.cols / n;
        let mut out = Matrix::zeros(vv.rows, e);
        for b in 0..vv.rows {
            let mrow = mv.row(b);
            let vrow = vv.row(b);
            let orow = out.row_mut(b);
            for i in 0..n {
                let w = vrow[i];
                for (o, &mm) in orow.iter_mut().zip(&mrow[i * e..(i + 1) * e]) {
                    *o = *o + w * mm;
                }
            }
        }
        Ok(self.push(Op::BatchedVecMat(v, m), out))
    }

    /// Backpropagates from a scalar node.
    pub fn backward(&self, output: NodeId) -> Gradients<T> {
        let seed = Matrix::filled(1, 1, T::one());
        self.backward_with(output, seed)
    }

    /// Backpropagates `output_grad` (shaped like `output`) through the tape.
    pub fn backward_with(&self, output: NodeId, output_grad: Matrix<T>) -> Gradients<T> {
        assert_eq!(self.shape(output), output_grad.shape(), "output gradient shape");
        let mut grads: Vec<Option<Matrix<T>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(output_grad);
        let mut out = self.store.zero_grads();

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut acc = |id: NodeId, d: Matrix<T>| match &mut grads[id.0] {
                Some(existing) => existing.add_assign(&d),
                slot @ None => *slot = Some(d),
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(p) => out.slots[p.0].add_assign(&g),
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut da = Matrix::zeros(av.rows, av.cols);
                    g.matmul_into(false, bv, true, T::one(), T::zero(), &mut da);
                    let mut db = Matrix::zeros(bv.rows, bv.cols);
                    av.matmul_into(true, &g, false, T::one(), T::zero(), &mut db);
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::AddBias(x, b) => {
                    let mut db = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (d, &v) in db.data.iter_mut().zip(g.row(r)) {
                            *d = *d + v;
                        }
                    }
                    acc(*b, db);
                    acc(*x, g);
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|v| -v));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    let da = g.zip_map(self.value(*b), |d, y| d * y);
                    let db = g.zip_map(self.value(*a), |d, x| d * x);
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::MulConst(a, c) => acc(*a, g.zip_map(c, |d, y| d * y)),
                Op::Scale(a, s) => {
                    let s = *s;
                    acc(*a, g.map(|d| d * s));
                }
                Op::AddScalar(a) => acc(*a, g),
                Op::Relu(a) => {
                    acc(*a, g.zip_map(self.value(*a), |d, x| if x > T::zero() { d } else { T::zero() }))
                }
                Op::Sigmoid(_) | Op::Tanh(_) | Op::Exp(_) => {
                    let y = self.value(NodeId(idx));
                    let (a, d) = match &node.op {
                        Op::Sigmoid(a) => (*a, g.zip_map(y, |d, y| d * y * (T::one() - y))),
                        Op::Tanh(a) => (*a, g.zip_map(y, |d, y| d * (T::one() - y * y))),
                        Op::Exp(a) => (*a, g.zip_map(y, |d, y| d * y)),
                        _ => unreachable!(),
                    };
                    acc(a, d);
                }
                Op::Abs(a) => acc(
                    *a,
                    g.zip_map(self.value(*a), |d, x| {
                        if x > T::zero() {
                            d
                        } else if x < T::zero() {
                            -d
                        } else {
                            T::zero()
                        }
                    }),
                ),
                Op::Square(a) => {
                    let two = T::from_f64(2.0);
                    acc(*a, g.zip_map(self.value(*a), |d, x| two * x * d))
                }
                Op::LogSoftmax(a) => {
                    let y = self.value(NodeId(idx));
                    let mut dx = g.clone();
                    for r in 0..dx.rows {
                        let total: T = g.row(r).iter().copied().sum();
                        for (d, &ly) in dx.row_mut(r).iter_mut().zip(y.row(r)) {
                            *d = *d - ly.exp() * total;
                        }
                    }
                    acc(*a, dx);
                }
                Op::Gather(a, cols) => {
                    let x = self.value(*a);
                    let mut dx = Matrix::zeros(x.rows, x.cols);
                    for (r, &c) in cols.iter().enumerate() {
                        dx.set(r, c, g.data[r]);
                    }
                    acc(*a, dx);
                }
                Op::SumCols(a) => {
                    let x = self.value(*a);
                    let mut dx = Matrix::zeros(x.rows, x.cols);
                    for r in 0..x.rows {
                        dx.row_mut(r).fill(g.data[r]);
                    }
                    acc(*a, dx);
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    acc(*a, Matrix::filled(r, c, g.data[0]));
                }
                Op::Min(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut da = Matrix::zeros(av.rows, av.cols);
                    let mut db = Matrix::zeros(av.rows, av.cols);
                    for i in 0..g.data.len() {
                        if av.data[i] <= bv.data[i] {
                            da.data[i] = g.data[i];
                        } else {
                            db.data[i] = g.data[i];
                        }
                    }
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::Clamp(a, lo, hi) => {
                    let (lo, hi) = (*lo, *hi);
                    acc(
                        *a,
                        g.zip_map(self.value(*a), |d, x| if x >= lo && x <= hi { d } else { T::zero() }),
                    )
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let (rows, cols) = self.shape(p);
                        let mut dp = Matrix::zeros(rows, cols);
                        for r in 0..rows {
                            dp.row_mut(r).copy_from_slice(&g.row(r)[off..off + cols]);
                        }
                        off += cols;
                        acc(p, dp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let (rows, cols) = self.shape(p);
                        let dp = Matrix::from_vec(rows, cols, g.data[off * cols..(off + rows) * cols].to_vec());
                        off += rows;
                        acc(p, dp);
                    }
                }
                Op::SliceCols(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut dx = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        dx.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(*a, dx);
                }
                Op::SliceRows(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut dx = Matrix::zeros(rows, cols);
                    dx.data[start * cols..(start + g.rows) * cols].copy_from_slice(&g.data);
                    acc(*a, dx);
                }
                Op::SelectRows(a, rows) => {
                    let (r, c) = self.shape(*a);
                    let mut dx = Matrix::zeros(r, c);
                    for (k, &i) in rows.iter().enumerate() {
                        for (d, &v) in dx.row_mut(i).iter_mut().zip(g.row(k)) {
                            *d = *d + v;
                        }
                    }
                    acc(*a, dx);
                }
                Op::Reshape(a) => {
                    let (r, c) = self.shape(*a);
                    acc(*a, Matrix::from_vec(r, c, g.data));
                }
                Op::BatchedVecMat(v, m) => {
                    let (vv, mv) = (self.value(*v), self.value(*m));
                    let (n, e) = (vv.cols, g.cols);
                    let mut dv = Matrix::zeros(vv.rows, n);
                    let mut dm = Matrix::zeros(mv.rows, mv.cols);
                    for b in 0..vv.rows {
                        let grow = g.row(b);
                        for i in 0..n {
                            let mrow = &mv.row(b)[i * e..(i + 1) * e];
                            let dot: T = mrow.iter().zip(grow).map(|(&x, &y)| x * y).sum();
                            dv.set(b, i, dot);
                            let w = vv.get(b, i);
                            for (d, &gg) in dm.row_mut(b)[i * e..(i + 1) * e].iter_mut().zip(grow) {
                                *d = w * gg;
                            }
                        }
                    }
                    acc(*v, dv);
                    acc(*m, dm);
                }
            }
        }
        out
    }
}

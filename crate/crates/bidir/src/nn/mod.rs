//! Minimal reverse-mode autodiff over dense f64 matrices. Just enough for
//! the policy network: matmul, elementwise nonlinearities, pooling, concat,
//! masked log-softmax, and an im2col-based convolution. Parameters live in a
//! named [`ParamStore`]; a [`Tape`] references them without copying.

pub mod adam;

use std::collections::HashMap;

/// Dense row-major matrix. Column vectors are (n, 1), row vectors (1, n).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Tensor { rows, cols, data }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Xavier-uniform init.
    pub fn glorot(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
        Tensor { rows, cols, data }
    }
}

/// C = A * B
fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    assert_eq!(a.cols, b.rows, "matmul {}x{} * {}x{}", a.rows, a.cols, b.rows, b.cols);
    let mut out = Tensor::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let arow = &a.data[i * a.cols..(i + 1) * a.cols];
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    out
}

/// C += A^T * B (used for weight gradients)
fn matmul_at_b_acc(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    assert_eq!(a.rows, b.rows);
    assert_eq!(out.rows, a.cols);
    assert_eq!(out.cols, b.cols);
    for k in 0..a.rows {
        let arow = &a.data[k * a.cols..(k + 1) * a.cols];
        let brow = &b.data[k * b.cols..(k + 1) * b.cols];
        for (i, &aki) in arow.iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            let orow = &mut out.data[i * out.cols..(i + 1) * out.cols];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aki * bkj;
            }
        }
    }
}

/// C += A * B^T (used for input gradients)
fn matmul_a_bt_acc(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    assert_eq!(a.cols, b.cols);
    assert_eq!(out.rows, a.rows);
    assert_eq!(out.cols, b.rows);
    for i in 0..a.rows {
        let arow = &a.data[i * a.cols..(i + 1) * a.cols];
        let orow = &mut out.data[i * out.cols..(i + 1) * out.cols];
        for (j, o) in orow.iter_mut().enumerate() {
            let brow = &b.data[j * b.cols..(j + 1) * b.cols];
            let mut s = 0.0;
            for (&x, &y) in arow.iter().zip(brow) {
                s += x * y;
            }
            *o += s;
        }
    }
}

/// Geometry of one im2col convolution (square kernel, zero padding).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvSpec {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// For each output position (column), the flat input index of each patch
    /// element, or None where the patch hangs over the zero padding.
    fn gather_indices(&self) -> Vec<Option<usize>> {
        let (oh, ow) = (self.out_height(), self.out_width());
        let mut idx = Vec::with_capacity(self.patch_len() * oh * ow);
        for c in 0..self.in_channels {
            for kr in 0..self.kernel {
                for kc in 0..self.kernel {
                    for or_ in 0..oh {
                        for oc in 0..ow {
                            let r = (or_ * self.stride + kr) as isize - self.pad as isize;
                            let col = (oc * self.stride + kc) as isize - self.pad as isize;
                            if r < 0
                                || col < 0
                                || r as usize >= self.height
                                || col as usize >= self.width
                            {
                                idx.push(None);
                            } else {
                                idx.push(Some(
                                    c * self.height * self.width
                                        + r as usize * self.width
                                        + col as usize,
                                ));
                            }
                        }
                    }
                }
            }
        }
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<usize> },
    MatMul(Var, Var),
    Add(Var, Var),
    /// (n,m) + (1,m), the bias broadcast over rows.
    AddRow(Var, Var),
    /// (n,m) + (n,1), the bias broadcast over columns.
    AddCol(Var, Var),
    Relu(Var),
    Tanh(Var),
    Scale(Var, f64),
    /// (n,m) -> (1,m)
    MeanRows(Var),
    /// (n,m) -> (n,1)
    MeanCols(Var),
    /// (g*k, m) -> (g, m), mean over consecutive groups of k rows.
    MeanGroups(Var, usize),
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    Transpose(Var),
    RowSelect(Var, usize),
    /// Column vector (n,1); masked-out entries become -inf with zero grad.
    LogSoftmaxMasked(Var, Vec<bool>),
    /// Scalar pick from a column vector.
    Pick(Var, usize),
    /// Shannon entropy of a masked log-prob column vector.
    Entropy(Var, Vec<bool>),
    /// im2col patch gathering; input is (C, H*W), output (patch_len, OH*OW).
    Im2Col(Var, ConvSpec),
    Mul(Var, Var),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Named parameter collection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, t: Tensor) -> usize {
        assert!(!self.index.contains_key(name), "duplicate param {name}");
        let i = self.entries.len();
        self.index.insert(name.to_string(), i);
        self.entries.push((name.to_string(), t));
        i
    }

    pub fn idx(&self, name: &str) -> usize {
        *self.index.get(name).unwrap_or_else(|| panic!("no param {name}"))
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.entries[self.idx(name)].1
    }

    pub fn by_idx(&self, i: usize) -> &Tensor {
        &self.entries[i].1
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_scalars());
        for (_, t) in &self.entries {
            v.extend_from_slice(&t.data);
        }
        v
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for (_, t) in &mut self.entries {
            let len = t.data.len();
            t.data.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        assert_eq!(off, flat.len());
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }
}

/// Gradients, shaped like a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct GradStore {
    pub grads: Vec<Tensor>,
}

impl GradStore {
    pub fn zeros_like(params: &ParamStore) -> Self {
        GradStore {
            grads: params.entries().iter().map(|(_, t)| Tensor::zeros(t.rows, t.cols)).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for t in &self.grads {
            v.extend_from_slice(&t.data);
        }
        v
    }

    pub fn add_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for t in &mut self.grads {
            for d in &mut t.data {
                *d += flat[off];
                off += 1;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.grads {
            for d in &mut t.data {
                *d *= s;
            }
        }
    }
}

/// One forward computation; build ops, then call [`Tape::backward`].
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape { params, nodes: Vec::with_capacity(64) }
    }

    pub fn val(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].op {
            Op::Leaf { param: Some(p) } => self.params.by_idx(*p),
            _ => &self.nodes[v.0].value,
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, name: &str) -> Var {
        let idx = self.params.idx(name);
        self.push(Tensor::zeros(0, 0), Op::Leaf { param: Some(idx) })
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf { param: None })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = matmul(self.val(a), self.val(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.val(a), self.val(b));
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols));
        let data = ta.data.iter().zip(&tb.data).map(|(&x, &y)| x + y).collect();
        let v = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(v, Op::Add(a, b))
    }

    /// (n,m) plus a (1,m) row bias.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.val(a), self.val(b));
        assert_eq!(tb.rows, 1);
        assert_eq!(ta.cols, tb.cols);
        let mut v = ta.clone();
        for r in 0..v.rows {
            for c in 0..v.cols {
                v.data[r * v.cols + c] += tb.data[c];
            }
        }
        self.push(v, Op::AddRow(a, b))
    }

    /// (n,m) plus an (n,1) column bias.
    pub fn add_col(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.val(a), self.val(b));
        assert_eq!(tb.cols, 1);
        assert_eq!(ta.rows, tb.rows);
        let mut v = ta.clone();
        for r in 0..v.rows {
            for c in 0..v.cols {
                v.data[r * v.cols + c] += tb.data[r];
            }
        }
        self.push(v, Op::AddCol(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let ta = self.val(a);
        let data = ta.data.iter().map(|&x| x.max(0.0)).collect();
        let v = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let ta = self.val(a);
        let data = ta.data.iter().map(|&x| x.tanh()).collect();
        let v = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(v, Op::Tanh(a))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let ta = self.val(a);
        let data = ta.data.iter().map(|&x| x * s).collect();
        let v = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(v, Op::Scale(a, s))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let ta = self.val(a);
        let mut v = Tensor::zeros(1, ta.cols);
        for r in 0..ta.rows {
            for c in 0..ta.cols {
                v.data[c] += ta.at(r, c);
            }
        }
        for d in &mut v.data {
            *d /= ta.rows as f64;
        }
        self.push(v, Op::MeanRows(a))
    }

    pub fn mean_cols(&mut self, a: Var) -> Var {
        let ta = self.val(a);
        let mut v = Tensor::zeros(ta.rows, 1);
        for r in 0..ta.rows {
            let mut s = 0.0;
            for c in 0..ta.cols {
                s += ta.at(r, c);
            }
            v.data[r] = s / ta.cols as f64;
        }
        self.push(v, Op::MeanCols(a))
    }

    /// Mean over consecutive groups of `k` rows: (g*k, m) -> (g, m).
    pub fn mean_groups(&mut self, a: Var, k: usize) -> Var {
        let ta = self.val(a);
        assert_eq!(ta.rows % k, 0);
        let g = ta.rows / k;
        let mut v = Tensor::zeros(g, ta.cols);
        for r in 0..ta.rows {
            for c in 0..ta.cols {
                v.data[(r / k) * ta.cols + c] += ta.at(r, c);
            }
        }
        for d in &mut v.data {
            *d /= k as f64;
        }
        self.push(v, Op::MeanGroups(a, k))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.val(a), self.val(b));
        assert_eq!(ta.rows, tb.rows);
        let mut v = Tensor::zeros(ta.rows, ta.cols + tb.cols);
        for r in 0..ta.rows {
            let dst = &mut v.data[r * (ta.cols + tb.cols)..];
            dst[..ta.cols].copy_from_slice(&ta.data[r * ta.cols..(r + 1) * ta.cols]);
            dst[ta.cols..ta.cols + tb.cols]
                .copy_from_slice(&tb.data[r * tb.cols..(r + 1) * tb.cols]);
        }
        self.push(v, Op::ConcatCols(a, b))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.val(a), self.val(b));
        assert_eq!(ta.cols, tb.cols);
        let mut data = ta.data.clone();
        data.extend_from_slice(&tb.data);
        let v = Tensor::from_vec(ta.rows + tb.rows, ta.cols, data);
        self.push(v, Op::ConcatRows(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let ta = self.val(a);
        let mut v = Tensor::zeros(ta.cols, ta.rows);
        for r in 0..ta.rows {
            for c in 0..ta.cols {
                v.data[c * ta.rows + r] = ta.at(r, c);
            }
        }
        self.push(v, Op::Transpose(a))
    }

    pub fn row(&mut self, a: Var, r: usize) -> Var {
        let ta = self.val(a);
        let v = Tensor::from_vec(1, ta.cols, ta.data[r * ta.cols..(r + 1) * ta.cols].to_vec());
        self.push(v, Op::RowSelect(a, r))
    }

    /// Masked log-softmax over a column vector. Masked-out entries get -inf.
    pub fn log_softmax_masked(&mut self, a: Var, mask: Vec<bool>) -> Var {
        let ta = self.val(a);
        assert_eq!(ta.cols, 1);
        assert_eq!(ta.rows, mask.len());
        assert!(mask.iter().any(|&m| m), "empty mask support");
        let max = ta
            .data
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(&x, _)| x)
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = max
            + ta.data
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(&x, _)| (x - max).exp())
                .sum::<f64>()
                .ln();
        let data = ta
            .data
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| if m { x - lse } else { f64::NEG_INFINITY })
            .collect();
        let v = Tensor::from_vec(ta.rows, 1, data);
        self.push(v, Op::LogSoftmaxMasked(a, mask))
    }

    pub fn pick(&mut self, a: Var, i: usize) -> Var {
        let x = self.val(a).data[i];
        assert!(x.is_finite(), "pick of masked (or non-finite) entry {i}");
        self.push(Tensor::scalar(x), Op::Pick(a, i))
    }

    /// Entropy (nats) of a masked log-probability column vector.
    pub fn entropy(&mut self, logp: Var, mask: Vec<bool>) -> Var {
        let ta = self.val(logp);
        assert_eq!(ta.rows, mask.len());
        let h = ta
            .data
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(&lp, _)| -lp.exp() * lp)
            .sum::<f64>();
        self.push(Tensor::scalar(h), Op::Entropy(logp, mask))
    }

    pub fn im2col(&mut self, a: Var, spec: ConvSpec) -> Var {
        let ta = self.val(a);
        assert_eq!(ta.rows, spec.in_channels);
        assert_eq!(ta.cols, spec.height * spec.width);
        let idx = spec.gather_indices();
        let cols = spec.out_height() * spec.out_width();
        let data = idx
            .iter()
            .map(|opt| opt.map_or(0.0, |i| ta.data[i]))
            .collect::<Vec<f64>>();
        let v = Tensor::from_vec(spec.patch_len(), cols, data);
        self.push(v, Op::Im2Col(a, spec))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.val(a), self.val(b));
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols));
        let data = ta.data.iter().zip(&tb.data).map(|(&x, &y)| x * y).collect();
        let v = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(v, Op::Mul(a, b))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.val(a).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Backpropagate `seed` through the scalar `out`, accumulating parameter
    /// gradients into `grads`.
    pub fn backward(&self, out: Var, seed: f64, grads: &mut GradStore) {
        let mut adj: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        {
            let t = self.val(out);
            assert_eq!((t.rows, t.cols), (1, 1), "backward from non-scalar");
        }
        adj[out.0] = Some(Tensor::scalar(seed));
        for i in (0..self.nodes.len()).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf { param } => {
                    if let Some(p) = *param {
                        for (dst, src) in grads.grads[p].data.iter_mut().zip(&g.data) {
                            *dst += src;
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.val(*a), self.val(*b));
                    let ga = self.grad_slot(&mut adj, *a);
                    matmul_a_bt_acc(&g, tb, ga);
                    let gb = self.grad_slot(&mut adj, *b);
                    matmul_at_b_acc(ta, &g, gb);
                }
                Op::Add(a, b) => {
                    self.acc(&mut adj, *a, &g.data);
                    self.acc(&mut adj, *b, &g.data);
                }
                Op::AddRow(a, b) => {
                    self.acc(&mut adj, *a, &g.data);
                    let gb = self.grad_slot(&mut adj, *b);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            gb.data[c] += g.at(r, c);
                        }
                    }
                }
                Op::AddCol(a, b) => {
                    self.acc(&mut adj, *a, &g.data);
                    let gb = self.grad_slot(&mut adj, *b);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            gb.data[r] += g.at(r, c);
                        }
                    }
                }
                Op::Relu(a) => {
                    let ta = self.val(*a);
                    let ga = self.grad_slot(&mut adj, *a);
                    for ((d, &x), &gv) in ga.data.iter_mut().zip(&ta.data).zip(&g.data) {
                        if x > 0.0 {
                            *d += gv;
                        }
                    }
                }
                Op::Tanh(a) => {
                    let ty = &self.nodes[i].value;
                    let ga = self.grad_slot(&mut adj, *a);
                    for ((d, &y), &gv) in ga.data.iter_mut().zip(&ty.data).zip(&g.data) {
                        *d += gv * (1.0 - y * y);
                    }
                }
                Op::Scale(a, s) => {
                    let ga = self.grad_slot(&mut adj, *a);
                    for (d, &gv) in ga.data.iter_mut().zip(&g.data) {
                        *d += gv * s;
                    }
                }
                Op::MeanRows(a) => {
                    let n = self.val(*a).rows as f64;
                    let ga = self.grad_slot(&mut adj, *a);
                    let cols = ga.cols;
                    for r in 0..ga.rows {
                        for c in 0..cols {
                            ga.data[r * cols + c] += g.data[c] / n;
                        }
                    }
                }
                Op::MeanCols(a) => {
                    let m = self.val(*a).cols as f64;
                    let ga = self.grad_slot(&mut adj, *a);
                    let cols = ga.cols;
                    for r in 0..ga.rows {
                        for c in 0..cols {
                            ga.data[r * cols + c] += g.data[r] / m;
                        }
                    }
                }
                Op::MeanGroups(a, k) => {
                    let ga = self.grad_slot(&mut adj, *a);
                    let cols = ga.cols;
                    for r in 0..ga.rows {
                        for c in 0..cols {
                            ga.data[r * cols + c] += g.data[(r / k) * cols + c] / *k as f64;
                        }
                    }
                }
                Op::ConcatCols(a, b) => {
                    let (ca, cb) = (self.val(*a).cols, self.val(*b).cols);
                    {
                        let ga = self.grad_slot(&mut adj, *a);
                        for r in 0..g.rows {
                            for c in 0..ca {
                                ga.data[r * ca + c] += g.at(r, c);
                            }
                        }
                    }
                    let gb = self.grad_slot(&mut adj, *b);
                    for r in 0..g.rows {
                        for c in 0..cb {
                            gb.data[r * cb + c] += g.at(r, ca + c);
                        }
                    }
                }
                Op::ConcatRows(a, b) => {
                    let na = self.val(*a).len();
                    {
                        let ga = self.grad_slot(&mut adj, *a);
                        for (d, &gv) in ga.data.iter_mut().zip(&g.data[..na]) {
                            *d += gv;
                        }
                    }
                    let gb = self.grad_slot(&mut adj, *b);
                    for (d, &gv) in gb.data.iter_mut().zip(&g.data[na..]) {
                        *d += gv;
                    }
                }
                Op::Transpose(a) => {
                    let ga = self.grad_slot(&mut adj, *a);
                    let cols = ga.cols;
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            ga.data[c * cols + r] += g.at(r, c);
                        }
                    }
                }
                Op::RowSelect(a, r) => {
                    let ga = self.grad_slot(&mut adj, *a);
                    let cols = ga.cols;
                    for (c, &gv) in g.data.iter().enumerate() {
                        ga.data[r * cols + c] += gv;
                    }
                }
                Op::LogSoftmaxMasked(a, mask) => {
                    // dx_j = dy_j - softmax_j * sum(dy) over unmasked.
                    let y = &self.nodes[i].value;
                    let gsum: f64 = g
                        .data
                        .iter()
                        .zip(mask)
                        .filter(|(_, &m)| m)
                        .map(|(&gv, _)| gv)
                        .sum();
                    let ga = self.grad_slot(&mut adj, *a);
                    for j in 0..ga.rows {
                        if mask[j] {
                            ga.data[j] += g.data[j] - y.data[j].exp() * gsum;
                        }
                    }
                }
                Op::Pick(a, idx) => {
                    let ga = self.grad_slot(&mut adj, *a);
                    ga.data[*idx] += g.data[0];
                }
                Op::Entropy(a, mask) => {
                    let ta = self.val(*a);
                    let ga = self.grad_slot(&mut adj, *a);
                    for j in 0..ga.rows {
                        if mask[j] {
                            let lp = ta.data[j];
                            ga.data[j] += -g.data[0] * lp.exp() * (1.0 + lp);
                        }
                    }
                }
                Op::Im2Col(a, spec) => {
                    let idx = spec.gather_indices();
                    let ga = self.grad_slot(&mut adj, *a);
                    for (pos, opt) in idx.iter().enumerate() {
                        if let Some(src) = opt {
                            ga.data[*src] += g.data[pos];
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.val(*a).clone(), self.val(*b).clone());
                    {
                        let ga = self.grad_slot(&mut adj, *a);
                        for ((d, &y), &gv) in ga.data.iter_mut().zip(&tb.data).zip(&g.data) {
                            *d += gv * y;
                        }
                    }
                    let gb = self.grad_slot(&mut adj, *b);
                    for ((d, &x), &gv) in gb.data.iter_mut().zip(&ta.data).zip(&g.data) {
                        *d += gv * x;
                    }
                }
                Op::Sum(a) => {
                    let ga = self.grad_slot(&mut adj, *a);
                    for d in &mut ga.data {
                        *d += g.data[0];
                    }
                }
            }
        }
    }

    fn grad_slot<'a>(&self, adj: &'a mut Vec<Option<Tensor>>, v: Var) -> &'a mut Tensor {
        if adj[v.0].is_none() {
            let t = self.val(v);
            adj[v.0] = Some(Tensor::zeros(t.rows, t.cols));
        }
        adj[v.0].as_mut().unwrap()
    }

    fn acc(&self, adj: &mut Vec<Option<Tensor>>, v: Var, g: &[f64]) {
        let slot = self.grad_slot(adj, v);
        for (d, &x) in slot.data.iter_mut().zip(g) {
            *d += x;
        }
    }
}

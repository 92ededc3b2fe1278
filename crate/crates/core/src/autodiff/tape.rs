use std::collections::BTreeMap;

use super::params::{ParamId, ParamStore};
use super::Tensor;
use crate::error::{Error, Result};

/// Probability floor applied inside [`Tape::cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    ParamRow {
        param: ParamId,
        row: usize,
        rows: usize,
    },
    MatMul(Var, Var),
    MatVec(Var, Var),
    VecMat(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    ScalarMul(Var, f64),
    ScaleBy {
        x: Var,
        s: Var,
        index: usize,
    },
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Stack(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    Row {
        x: Var,
        index: usize,
    },
    Sum(Var),
    CrossEntropy {
        probs: Var,
        target: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Linear record of a forward computation.
///
/// Nodes are appended in evaluation order, so every input precedes the node
/// that consumes it; [`Tape::backward`] walks the record in reverse.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of a backward pass: gradients per node and per parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Vec<f64>>>,
    params: BTreeMap<ParamId, Vec<f64>>,
}

impl Gradients {
    /// Gradient of the loss with respect to a recorded node.
    pub fn of(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].as_deref()
    }

    /// Accumulated gradient of a parameter, if it was reached.
    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params.get(&id).map(Vec::as_slice)
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.params.iter().map(|(id, g)| (*id, g.as_slice()))
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn expect_rank(op: &'static str, t: &Tensor, rank: usize) -> Result<()> {
    if t.rank() != rank {
        return Err(Error::dim(
            op,
            format!("expected rank {rank}, got shape {:?}", t.shape()),
        ));
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_of(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Records a value that takes no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Records a snapshot of a parameter as a differentiable leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    /// Records one row of a matrix parameter (embedding lookup).
    pub fn param_row(&mut self, store: &ParamStore, id: ParamId, row: usize) -> Result<Var> {
        let value = store.value(id);
        if value.rank() != 2 || row >= value.shape()[0] {
            return Err(Error::dim(
                "param_row",
                format!("row {row} out of range for shape {:?}", value.shape()),
            ));
        }
        let rows = value.shape()[0];
        let v = Tensor::vector(value.row(row).to_vec());
        Ok(self.push(
            v,
            Op::ParamRow {
                param: id,
                row,
                rows,
            },
            true,
        ))
    }

    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        expect_rank("matmul", ta, 2)?;
        expect_rank("matmul", tb, 2)?;
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        if tb.shape()[0] != k {
            return Err(Error::Shape {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (ad, bd) = (ta.data(), tb.data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = ad[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        let ng = self.grad_of(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), ng))
    }

    /// Matrix-vector product of `[m, k]` and `[k]`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (tw, tx) = (self.value(w), self.value(x));
        expect_rank("matvec", tw, 2)?;
        expect_rank("matvec", tx, 1)?;
        let (m, k) = (tw.shape()[0], tw.shape()[1]);
        if tx.len() != k {
            return Err(Error::Shape {
                op: "matvec",
                lhs: tw.shape().to_vec(),
                rhs: tx.shape().to_vec(),
            });
        }
        let xd = tx.data();
        let out: Vec<f64> = tw
            .data()
            .chunks_exact(k)
            .map(|row| row.iter().zip(xd).map(|(a, b)| a * b).sum())
            .collect();
        debug_assert_eq!(out.len(), m);
        let ng = self.grad_of(&[w, x]);
        Ok(self.push(Tensor::vector(out), Op::MatVec(w, x), ng))
    }

    /// Row-vector times matrix: `[k]` and `[k, n]` give `[n]`.
    pub fn vecmat(&mut self, a: Var, m: Var) -> Result<Var> {
        let (ta, tm) = (self.value(a), self.value(m));
        expect_rank("vecmat", ta, 1)?;
        expect_rank("vecmat", tm, 2)?;
        let (k, n) = (tm.shape()[0], tm.shape()[1]);
        if ta.len() != k {
            return Err(Error::Shape {
                op: "vecmat",
                lhs: ta.shape().to_vec(),
                rhs: tm.shape().to_vec(),
            });
        }
        let mut out = vec![0.0; n];
        for (i, &ai) in ta.data().iter().enumerate() {
            for (o, &mv) in out.iter_mut().zip(tm.row(i)) {
                *o += ai * mv;
            }
        }
        let ng = self.grad_of(&[a, m]);
        Ok(self.push(Tensor::vector(out), Op::VecMat(a, m), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape("add", ta, tb)?;
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.grad_of(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    /// Adds the vector `r` to every row of matrix `m`.
    pub fn add_row(&mut self, m: Var, r: Var) -> Result<Var> {
        let (tm, tr) = (self.value(m), self.value(r));
        expect_rank("add_row", tm, 2)?;
        if tr.rank() != 1 || tr.len() != tm.shape()[1] {
            return Err(Error::Shape {
                op: "add_row",
                lhs: tm.shape().to_vec(),
                rhs: tr.shape().to_vec(),
            });
        }
        let cols = tr.len();
        let rd = tr.data();
        let data = tm
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + rd[i % cols])
            .collect();
        let value = Tensor::new(tm.shape().to_vec(), data)?;
        let ng = self.grad_of(&[m, r]);
        Ok(self.push(value, Op::AddRow(m, r), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape("mul", ta, tb)?;
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let ng = self.grad_of(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), ng))
    }

    pub fn scalar_mul(&mut self, x: Var, c: f64) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| v * c).collect();
        let value = Tensor::new(tx.shape().to_vec(), data).expect("same shape");
        let ng = self.grad_of(&[x]);
        self.push(value, Op::ScalarMul(x, c), ng)
    }

    /// Scales `x` by the single element `s[index]`, differentiable in both.
    pub fn scale_by(&mut self, x: Var, s: Var, index: usize) -> Result<Var> {
        let ts = self.value(s);
        if index >= ts.len() {
            return Err(Error::dim(
                "scale_by",
                format!("index {index} out of range for shape {:?}", ts.shape()),
            ));
        }
        let c = ts.data()[index];
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| v * c).collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        let ng = self.grad_of(&[x, s]);
        Ok(self.push(value, Op::ScaleBy { x, s, index }, ng))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| v.tanh()).collect();
        let value = Tensor::new(tx.shape().to_vec(), data).expect("same shape");
        let ng = self.grad_of(&[x]);
        self.push(value, Op::Tanh(x), ng)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|&v| sigmoid(v)).collect();
        let value = Tensor::new(tx.shape().to_vec(), data).expect("same shape");
        let ng = self.grad_of(&[x]);
        self.push(value, Op::Sigmoid(x), ng)
    }

    /// Softmax over a vector, computed with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        expect_rank("softmax", tx, 1)?;
        if tx.is_empty() {
            return Err(Error::dim("softmax", "empty input"));
        }
        let value = Tensor::vector(softmax(tx.data()));
        let ng = self.grad_of(&[x]);
        Ok(self.push(value, Op::Softmax(x), ng))
    }

    /// Concatenates same-rank tensors along `axis`.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::dim("concat", "no inputs"))?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(Error::dim(
                "concat",
                format!("axis {axis} out of range for shape {base:?}"),
            ));
        }
        let mut total = 0;
        for v in inputs {
            let s = self.value(*v).shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in inputs {
                let t = self.value(*v);
                let block = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let ng = self.grad_of(inputs);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            ng,
        ))
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let first = rows
            .first()
            .ok_or_else(|| Error::dim("stack", "no inputs"))?;
        let width = self.value(*first).len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for v in rows {
            let t = self.value(*v);
            if t.rank() != 1 || t.len() != width {
                return Err(Error::Shape {
                    op: "stack",
                    lhs: vec![width],
                    rhs: t.shape().to_vec(),
                });
            }
            data.extend_from_slice(t.data());
        }
        let value = Tensor::new(vec![rows.len(), width], data)?;
        let ng = self.grad_of(rows);
        Ok(self.push(value, Op::Stack(rows.to_vec()), ng))
    }

    /// Contiguous sub-vector `x[start..start + len]`.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let tx = self.value(x);
        expect_rank("slice", tx, 1)?;
        if start + len > tx.len() {
            return Err(Error::dim(
                "slice",
                format!("range {start}..{} exceeds length {}", start + len, tx.len()),
            ));
        }
        let value = Tensor::vector(tx.data()[start..start + len].to_vec());
        let ng = self.grad_of(&[x]);
        Ok(self.push(value, Op::Slice { x, start }, ng))
    }

    /// Row `index` of a matrix, as a vector.
    pub fn row(&mut self, x: Var, index: usize) -> Result<Var> {
        let tx = self.value(x);
        expect_rank("row", tx, 2)?;
        if index >= tx.shape()[0] {
            return Err(Error::dim(
                "row",
                format!("row {index} out of range for shape {:?}", tx.shape()),
            ));
        }
        let value = Tensor::vector(tx.row(index).to_vec());
        let ng = self.grad_of(&[x]);
        Ok(self.push(value, Op::Row { x, index }, ng))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let ng = self.grad_of(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), ng)
    }

    /// `-sum(target * ln(max(probs, PROB_FLOOR)))`.
    pub fn cross_entropy(&mut self, probs: Var, target: &Tensor) -> Result<Var> {
        let tp = self.value(probs);
        if tp.len() != target.len() {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: tp.shape().to_vec(),
                rhs: target.shape().to_vec(),
            });
        }
        let loss = -tp
            .data()
            .iter()
            .zip(target.data())
            .filter(|(_, &t)| t != 0.0)
            .map(|(&p, &t)| t * p.max(PROB_FLOOR).ln())
            .sum::<f64>();
        let ng = self.grad_of(&[probs]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                probs,
                target: target.data().to_vec(),
            },
            ng,
        ))
    }

    /// Cross entropy against a one-hot target given by class index.
    pub fn cross_entropy_index(&mut self, probs: Var, class: usize) -> Result<Var> {
        let n = self.value(probs).len();
        if class >= n {
            return Err(Error::dim(
                "cross_entropy",
                format!("class {class} out of range for {n} classes"),
            ));
        }
        let mut target = vec![0.0; n];
        target[class] = 1.0;
        self.cross_entropy(probs, &Tensor::vector(target))
    }

    /// Reverse-mode sweep from a single-element output.
    ///
    /// The tape is not consumed; sweeping twice yields identical gradients.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).len() != 1 {
            return Err(Error::dim(
                "backward",
                format!(
                    "output must hold one value, got shape {:?}",
                    self.value(output).shape()
                ),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut params: BTreeMap<ParamId, Vec<f64>> = BTreeMap::new();
        grads[output.0] = Some(vec![1.0]);

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut grads, &mut params);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            nodes: grads,
            params,
        })
    }

    fn propagate(
        &self,
        node: &Node,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
        params: &mut BTreeMap<ParamId, Vec<f64>>,
    ) {
        // Accumulates `f(j)` into the gradient buffer of `v`, if it needs one.
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let n = &self.nodes[v.0];
            if !n.needs_grad {
                return;
            }
            let buf = grads[v.0].get_or_insert_with(|| vec![0.0; n.value.len()]);
            f(buf);
        };

        match &node.op {
            Op::Constant => {}
            Op::Param(id) => {
                let buf = params
                    .entry(*id)
                    .or_insert_with(|| vec![0.0; node.value.len()]);
                for (b, v) in buf.iter_mut().zip(g) {
                    *b += v;
                }
            }
            Op::ParamRow { param, row, rows } => {
                let cols = node.value.len();
                let buf = params
                    .entry(*param)
                    .or_insert_with(|| vec![0.0; rows * cols]);
                for (b, v) in buf[row * cols..(row + 1) * cols].iter_mut().zip(g) {
                    *b += v;
                }
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                acc(*a, &mut |ga| {
                    for i in 0..m {
                        for p in 0..k {
                            let brow = &tb.data()[p * n..(p + 1) * n];
                            let grow = &g[i * n..(i + 1) * n];
                            ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                acc(*b, &mut |gb| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = ta.data()[i * k + p];
                            for (o, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *o += aip * gv;
                            }
                        }
                    }
                });
            }
            Op::MatVec(w, x) => {
                let (tw, tx) = (self.value(*w), self.value(*x));
                let k = tw.shape()[1];
                acc(*w, &mut |gw| {
                    for (i, &gi) in g.iter().enumerate() {
                        if gi == 0.0 {
                            continue;
                        }
                        for (o, &xv) in gw[i * k..(i + 1) * k].iter_mut().zip(tx.data()) {
                            *o += gi * xv;
                        }
                    }
                });
                acc(*x, &mut |gx| {
                    for (i, &gi) in g.iter().enumerate() {
                        if gi == 0.0 {
                            continue;
                        }
                        for (o, &wv) in gx.iter_mut().zip(tw.row(i)) {
                            *o += gi * wv;
                        }
                    }
                });
            }
            Op::VecMat(a, m) => {
                let (ta, tm) = (self.value(*a), self.value(*m));
                acc(*a, &mut |ga| {
                    for (i, o) in ga.iter_mut().enumerate() {
                        *o += tm.row(i).iter().zip(g).map(|(x, y)| x * y).sum::<f64>();
                    }
                });
                acc(*m, &mut |gm| {
                    let n = g.len();
                    for (i, &ai) in ta.data().iter().enumerate() {
                        for (o, &gv) in gm[i * n..(i + 1) * n].iter_mut().zip(g) {
                            *o += ai * gv;
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    acc(v, &mut |gv| add_into(gv, g));
                }
            }
            Op::AddRow(m, r) => {
                acc(*m, &mut |gm| add_into(gm, g));
                acc(*r, &mut |gr| {
                    let cols = gr.len();
                    for (i, &gv) in g.iter().enumerate() {
                        gr[i % cols] += gv;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                acc(*a, &mut |ga| {
                    for ((o, &gv), &bv) in ga.iter_mut().zip(g).zip(tb.data()) {
                        *o += gv * bv;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((o, &gv), &av) in gb.iter_mut().zip(g).zip(ta.data()) {
                        *o += gv * av;
                    }
                });
            }
            Op::ScalarMul(x, c) => {
                acc(*x, &mut |gx| {
                    for (o, &gv) in gx.iter_mut().zip(g) {
                        *o += gv * c;
                    }
                });
            }
            Op::ScaleBy { x, s, index } => {
                let (tx, ts) = (self.value(*x), self.value(*s));
                let c = ts.data()[*index];
                acc(*x, &mut |gx| {
                    for (o, &gv) in gx.iter_mut().zip(g) {
                        *o += gv * c;
                    }
                });
                acc(*s, &mut |gs| {
                    gs[*index] += g.iter().zip(tx.data()).map(|(a, b)| a * b).sum::<f64>();
                });
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                acc(*x, &mut |gx| {
                    for ((o, &gv), &yv) in gx.iter_mut().zip(g).zip(y) {
                        *o += gv * (1.0 - yv * yv);
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                acc(*x, &mut |gx| {
                    for ((o, &gv), &yv) in gx.iter_mut().zip(g).zip(y) {
                        *o += gv * yv * (1.0 - yv);
                    }
                });
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                acc(*x, &mut |gx| {
                    for ((o, &gv), &yv) in gx.iter_mut().zip(g).zip(y) {
                        *o += yv * (gv - dot);
                    }
                });
            }
            Op::Concat { inputs, axis } => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let row = shape[*axis] * inner;
                let mut offset = 0;
                for v in inputs {
                    let block = self.value(*v).shape()[*axis] * inner;
                    acc(*v, &mut |gv| {
                        for o in 0..outer {
                            let src = &g[o * row + offset..o * row + offset + block];
                            add_into(&mut gv[o * block..(o + 1) * block], src);
                        }
                    });
                    offset += block;
                }
            }
            Op::Stack(rows) => {
                let width = node.value.shape()[1];
                for (i, v) in rows.iter().enumerate() {
                    acc(*v, &mut |gv| add_into(gv, &g[i * width..(i + 1) * width]));
                }
            }
            Op::Slice { x, start } => {
                acc(*x, &mut |gx| add_into(&mut gx[*start..*start + g.len()], g));
            }
            Op::Row { x, index } => {
                let w = g.len();
                acc(*x, &mut |gx| {
                    add_into(&mut gx[index * w..(index + 1) * w], g)
                });
            }
            Op::Sum(x) => {
                acc(*x, &mut |gx| {
                    for o in gx.iter_mut() {
                        *o += g[0];
                    }
                });
            }
            Op::CrossEntropy { probs, target } => {
                let p = self.value(*probs).data();
                acc(*probs, &mut |gp| {
                    for ((o, &pv), &t) in gp.iter_mut().zip(p).zip(target) {
                        if t != 0.0 && pv > PROB_FLOOR {
                            *o -= g[0] * t / pv;
                        }
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of a non-empty slice.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

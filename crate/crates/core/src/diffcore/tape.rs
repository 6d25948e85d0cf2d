use super::tensor::gemm;
use super::{ParamId, ParameterStore, Tensor};
use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

/// `ln(max(p, LOG_FLOOR))`, letting NaN through so broken forwards surface.
pub fn floored_ln(p: f64) -> f64 {
    if p.is_nan() {
        p
    } else {
        p.max(LOG_FLOOR).ln()
    }
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// One term of a [`Tape::pair_diff`]: `coef * (p[second, col] - p[first, col])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub first: usize,
    pub second: usize,
    pub col: usize,
    pub coef: f64,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Affine { x: Var, w: Var, b: Var },
    Relu(Var),
    MaskedSoftmax(Var),
    MulConst(Var, Tensor),
    Add(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    Nll { p: Var, chosen: Vec<usize> },
    PairDiff { p: Var, terms: Vec<PairTerm> },
    Sum(Var),
    WeightedSum(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    trainable: bool,
}

/// Record of one forward pass, replayed in reverse by [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    fn push(&mut self, value: Tensor, op: Op, trainable: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            trainable,
        });
        Var(self.nodes.len() - 1)
    }

    fn trainable(&self, v: Var) -> bool {
        self.nodes[v.0].trainable
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Records the current value of a parameter as a trainable leaf.
    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    /// `x[batch, in] * w[in, out] + b[out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (batch, inp) = (xv.rows(), xv.cols());
        let (w_in, out) = (wv.rows(), wv.cols());
        if xv.shape().len() != 2 || wv.shape().len() != 2 || inp != w_in || bv.len() != out {
            return Err(Error::Shape(format!(
                "affine: input {:?}, weight {:?}, bias {:?}",
                xv.shape(),
                wv.shape(),
                bv.shape()
            )));
        }
        let mut values = Vec::with_capacity(batch * out);
        for _ in 0..batch {
            values.extend_from_slice(bv.values());
        }
        gemm(batch, inp, out, xv.values(), false, wv.values(), false, &mut values, 1.0);
        let trainable = self.trainable(x) || self.trainable(w) || self.trainable(b);
        let t = Tensor::new(vec![batch, out], values)?;
        Ok(self.push(t, Op::Affine { x, w, b }, trainable))
    }

    /// Elementwise `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let values = xv.values().iter().map(|&v| v.max(0.0)).collect();
        let t = Tensor::new(xv.shape().to_vec(), values).expect("same shape");
        let trainable = self.trainable(x);
        self.push(t, Op::Relu(x), trainable)
    }

    /// Row-wise softmax over available columns; unavailable entries are
    /// exactly zero. `avail` is row-major with the same layout as `scores`.
    pub fn masked_softmax(&mut self, scores: Var, avail: &[bool]) -> Result<Var> {
        let sv = self.value(scores);
        let (rows, cols) = (sv.rows(), sv.cols());
        if avail.len() != rows * cols {
            return Err(Error::Shape(format!(
                "masked_softmax: scores {:?} but mask has {} entries",
                sv.shape(),
                avail.len()
            )));
        }
        let out = masked_softmax_values(sv.values(), avail, cols)?;
        let t = Tensor::new(vec![rows, cols], out)?;
        let trainable = self.trainable(scores);
        Ok(self.push(t, Op::MaskedSoftmax(scores), trainable))
    }

    /// Elementwise product with a constant tensor of the same shape.
    pub fn mul_const(&mut self, x: Var, c: Tensor) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape() != c.shape() {
            return Err(Error::Shape(format!(
                "mul_const: {:?} vs {:?}",
                xv.shape(),
                c.shape()
            )));
        }
        let values = xv.values().iter().zip(c.values()).map(|(a, b)| a * b).collect();
        let t = Tensor::new(xv.shape().to_vec(), values)?;
        let trainable = self.trainable(x);
        Ok(self.push(t, Op::MulConst(x, c), trainable))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::Shape(format!("add: {:?} vs {:?}", av.shape(), bv.shape())));
        }
        let values = av.values().iter().zip(bv.values()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(av.shape().to_vec(), values)?;
        let trainable = self.trainable(a) || self.trainable(b);
        Ok(self.push(t, Op::Add(a, b), trainable))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let xv = self.value(x);
        let values = xv.values().iter().map(|v| v * s).collect();
        let t = Tensor::new(xv.shape().to_vec(), values).expect("same shape");
        let trainable = self.trainable(x);
        self.push(t, Op::Scale(x, s), trainable)
    }

    /// Concatenates `[batch, *]` matrices along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(first) = parts.first() else {
            return Err(Error::Shape("concat_cols: no inputs".into()));
        };
        let rows = self.value(*first).rows();
        let mut cols = 0;
        for p in parts {
            let v = self.value(*p);
            if v.rows() != rows {
                return Err(Error::Shape(format!(
                    "concat_cols: {} rows vs {rows}",
                    v.rows()
                )));
            }
            cols += v.cols();
        }
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                values.extend_from_slice(self.value(*p).row_slice(r));
            }
        }
        let trainable = parts.iter().any(|p| self.trainable(*p));
        let t = Tensor::new(vec![rows, cols], values)?;
        Ok(self.push(t, Op::ConcatCols(parts.to_vec()), trainable))
    }

    /// Summed negative log-likelihood `-sum_i log p[i, chosen_i]`.
    pub fn nll(&mut self, probs: Var, chosen: &[usize]) -> Result<Var> {
        let pv = self.value(probs);
        if pv.rows() != chosen.len() {
            return Err(Error::Shape(format!(
                "nll: {} rows but {} choices",
                pv.rows(),
                chosen.len()
            )));
        }
        let mut total = 0.0;
        for (i, &c) in chosen.iter().enumerate() {
            if c >= pv.cols() {
                return Err(Error::Shape(format!("nll: choice {c} out of range")));
            }
            let p = pv.get(i, c);
            if p == 0.0 {
                return Err(Error::Domain(format!(
                    "nll: chosen alternative {c} has probability 0 in row {i}"
                )));
            }
            total -= floored_ln(p);
        }
        let trainable = self.trainable(probs);
        Ok(self.push(
            Tensor::scalar(total),
            Op::Nll {
                p: probs,
                chosen: chosen.to_vec(),
            },
            trainable,
        ))
    }

    /// Column vector with one entry per term:
    /// `coef * (p[second, col] - p[first, col])`.
    pub fn pair_diff(&mut self, probs: Var, terms: Vec<PairTerm>) -> Result<Var> {
        let pv = self.value(probs);
        let mut out = Vec::with_capacity(terms.len());
        for t in &terms {
            if t.first >= pv.rows() || t.second >= pv.rows() || t.col >= pv.cols() {
                return Err(Error::Shape(format!(
                    "pair_diff: term {t:?} outside {:?}",
                    pv.shape()
                )));
            }
            out.push(t.coef * (pv.get(t.second, t.col) - pv.get(t.first, t.col)));
        }
        let n = out.len();
        let trainable = self.trainable(probs);
        let t = Tensor::new(vec![n, 1], out)?;
        Ok(self.push(t, Op::PairDiff { p: probs, terms }, trainable))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).values().iter().sum();
        let trainable = self.trainable(x);
        self.push(Tensor::scalar(s), Op::Sum(x), trainable)
    }

    /// `sum_i weights[i] * x[i]` over the flattened tensor.
    pub fn weighted_sum(&mut self, x: Var, weights: Vec<f64>) -> Result<Var> {
        let xv = self.value(x);
        if xv.len() != weights.len() {
            return Err(Error::Shape(format!(
                "weighted_sum: {} values, {} weights",
                xv.len(),
                weights.len()
            )));
        }
        let s = xv.values().iter().zip(&weights).map(|(a, w)| a * w).sum();
        let trainable = self.trainable(x);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum(x, weights), trainable))
    }

    /// Sign pattern of every relu input recorded so far. Two evaluations with
    /// equal patterns lie on the same smooth piece of the function.
    pub fn kink_pattern(&self) -> Vec<bool> {
        let mut pattern = Vec::new();
        for node in &self.nodes {
            if let Op::Relu(x) = node.op {
                pattern.extend(self.value(x).values().iter().map(|&v| v > 0.0));
            }
        }
        pattern
    }

    /// Propagates `d loss / d node` backwards and accumulates the gradient
    /// of every recorded parameter into `store`. Consumes the tape.
    pub fn backward(self, loss: Var, store: &mut ParameterStore) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Usage("backward called on an empty tape".into()));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::Usage(
                "backward: loss was not recorded on this tape".into(),
            ));
        }
        if !self.value(loss).is_scalar() {
            return Err(Error::Usage(format!(
                "backward: loss must be scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }

        let mut adj: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.trainable {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => store.grad_mut(*id).add_assign(&g),
                Op::Affine { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (batch, inp, out) = (xv.rows(), xv.cols(), wv.cols());
                    if self.trainable(*x) {
                        let mut dx = vec![0.0; batch * inp];
                        gemm(batch, out, inp, g.values(), false, wv.values(), true, &mut dx, 0.0);
                        accumulate(&mut adj, *x, Tensor::new(xv.shape().to_vec(), dx)?);
                    }
                    if self.trainable(*w) {
                        let mut dw = vec![0.0; inp * out];
                        gemm(inp, batch, out, xv.values(), true, g.values(), false, &mut dw, 0.0);
                        accumulate(&mut adj, *w, Tensor::new(wv.shape().to_vec(), dw)?);
                    }
                    if self.trainable(*b) {
                        let mut db = vec![0.0; out];
                        for r in 0..batch {
                            for (d, v) in db.iter_mut().zip(g.row_slice(r)) {
                                *d += v;
                            }
                        }
                        let shape = self.value(*b).shape().to_vec();
                        accumulate(&mut adj, *b, Tensor::new(shape, db)?);
                    }
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    let d = g
                        .values()
                        .iter()
                        .zip(xv.values())
                        .map(|(gi, &xi)| if xi > 0.0 { *gi } else { 0.0 })
                        .collect();
                    accumulate(&mut adj, *x, Tensor::new(xv.shape().to_vec(), d)?);
                }
                Op::MaskedSoftmax(x) => {
                    let p = &node.value;
                    let cols = p.cols();
                    let mut d = vec![0.0; p.len()];
                    for r in 0..p.rows() {
                        let pr = p.row_slice(r);
                        let gr = g.row_slice(r);
                        let dot: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for c in 0..cols {
                            d[r * cols + c] = pr[c] * (gr[c] - dot);
                        }
                    }
                    accumulate(&mut adj, *x, Tensor::new(p.shape().to_vec(), d)?);
                }
                Op::MulConst(x, c) => {
                    let d = g.values().iter().zip(c.values()).map(|(a, b)| a * b).collect();
                    accumulate(&mut adj, *x, Tensor::new(c.shape().to_vec(), d)?);
                }
                Op::Add(a, b) => {
                    if self.trainable(*a) {
                        accumulate(&mut adj, *a, g.clone());
                    }
                    if self.trainable(*b) {
                        accumulate(&mut adj, *b, g);
                    }
                }
                Op::Scale(x, s) => {
                    let d = g.values().iter().map(|v| v * s).collect();
                    accumulate(&mut adj, *x, Tensor::new(g.shape().to_vec(), d)?);
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for p in parts {
                        let pc = self.value(*p).cols();
                        if self.trainable(*p) {
                            let mut d = Vec::with_capacity(rows * pc);
                            for r in 0..rows {
                                d.extend_from_slice(&g.row_slice(r)[offset..offset + pc]);
                            }
                            let shape = self.value(*p).shape().to_vec();
                            accumulate(&mut adj, *p, Tensor::new(shape, d)?);
                        }
                        offset += pc;
                    }
                }
                Op::Nll { p, chosen } => {
                    let pv = self.value(*p);
                    let scale = g.item();
                    let mut d = Tensor::zeros(pv.shape());
                    for (i, &c) in chosen.iter().enumerate() {
                        let prob = pv.get(i, c);
                        // the floor is flat, so no gradient below it
                        if prob > LOG_FLOOR {
                            d.set(i, c, -scale / prob);
                        }
                    }
                    accumulate(&mut adj, *p, d);
                }
                Op::PairDiff { p, terms } => {
                    let mut d = Tensor::zeros(self.value(*p).shape());
                    for (t, gi) in terms.iter().zip(g.values()) {
                        let v = gi * t.coef;
                        let cols = d.cols();
                        d.values_mut()[t.second * cols + t.col] += v;
                        d.values_mut()[t.first * cols + t.col] -= v;
                    }
                    accumulate(&mut adj, *p, d);
                }
                Op::Sum(x) => {
                    let shape = self.value(*x).shape();
                    accumulate(&mut adj, *x, Tensor::full(shape, g.item()));
                }
                Op::WeightedSum(x, w) => {
                    let s = g.item();
                    let d = w.iter().map(|wi| wi * s).collect();
                    let shape = self.value(*x).shape().to_vec();
                    accumulate(&mut adj, *x, Tensor::new(shape, d)?);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut adj[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Masked, max-shifted softmax over row-major `scores` with `cols` columns.
pub fn masked_softmax_values(scores: &[f64], avail: &[bool], cols: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; scores.len()];
    for (r, (row, mask)) in scores.chunks(cols).zip(avail.chunks(cols)).enumerate() {
        if !mask.iter().any(|&a| a) {
            return Err(Error::Domain(format!(
                "masked_softmax: row {r} has no available alternative"
            )));
        }
        // non-finite scores yield NaN rows, which callers report as such
        let max = row
            .iter()
            .zip(mask)
            .filter(|(_, &a)| a)
            .map(|(&s, _)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let o = &mut out[r * cols..(r + 1) * cols];
        let mut z = 0.0;
        for c in 0..cols {
            if mask[c] {
                o[c] = (row[c] - max).exp();
                z += o[c];
            }
        }
        for v in o.iter_mut() {
            *v /= z;
        }
    }
    Ok(out)
}

use crate::{Error, Result};

use super::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Softmax(Var),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
    },
    GatherRows {
        x: Var,
        indices: Vec<usize>,
    },
    Sum(Var),
    Bce {
        logits: Var,
        labels: Vec<f64>,
        mask: Option<Vec<f64>>,
        count: f64,
    },
    /// Test fixture: forward is identity, backward scales by the factor.
    #[doc(hidden)]
    Faulty(Var, f64),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation graph.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

/// `c = beta * c + op(a) · op(b)` for row-major storage, where `op(a)` is
/// `m x k` and `op(b)` is `k x n`.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the strides above address exactly the m*k, k*n and m*n
    // elements of the row-major buffers whose lengths are checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn add_into(acc: &mut Option<Tensor>, shape: &[usize], f: impl FnOnce(&mut [f64])) {
    let t = acc.get_or_insert_with(|| Tensor::zeros(shape));
    f(t.data_mut());
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn matrix_dims(&self, v: Var) -> (usize, usize) {
        let t = self.value(v);
        (t.rows(), t.cols())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix_dims(a);
        let (k2, n) = self.matrix_dims(b);
        if k != k2 || self.value(b).shape().len() != 2 {
            return Err(shape_err("matmul", self.value(a), self.value(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), false, 0.0, &mut out);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b)))
    }

    /// `a · bᵀ` without materialising the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix_dims(a);
        let (n, k2) = self.matrix_dims(b);
        if k != k2 {
            return Err(shape_err("matmul_nt", self.value(a), self.value(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), true, 0.0, &mut out);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMulNt(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let shape = ta.shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Add(a, b)))
    }

    /// Adds the vector `bias` (length `cols`) to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.len() != ta.cols() {
            return Err(shape_err("broadcast_add", ta, tb));
        }
        let c = ta.cols();
        let data = ta.data().iter().enumerate().map(|(i, x)| x + tb.data()[i % c]).collect();
        let shape = ta.shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::AddRow(a, bias)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("mul", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let shape = ta.shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Mul(a, b)))
    }

    /// `max(x, 0)`; the gradient at exactly 0 is 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Relu(x))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| v * factor).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Scale(x, factor))
    }

    /// Normalises each row to zero mean and unit variance, then applies
    /// `gain` and `bias` (both of length `cols`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        let c = tx.cols();
        if tg.len() != c || tb.len() != c {
            return Err(shape_err("layer_norm", tx, tg));
        }
        let rows = tx.rows();
        let mut normalized = Vec::with_capacity(tx.len());
        let mut inv_std = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(tx.len());
        for r in 0..rows {
            let row = tx.row(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            for (j, v) in row.iter().enumerate() {
                let n = (v - mean) * is;
                normalized.push(n);
                out.push(n * tg.data()[j] + tb.data()[j]);
            }
        }
        let value = Tensor::new(tx.shape().to_vec(), out)?;
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            },
        ))
    }

    /// Row-wise softmax over the last axis, shifted by the row maximum.
    pub fn softmax(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let c = t.cols();
        let mut out = Vec::with_capacity(t.len());
        for r in 0..t.rows() {
            let row = t.row(r);
            let peak = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = out.len();
            out.extend(row.iter().map(|v| (v - peak).exp()));
            let total: f64 = out[start..].iter().sum();
            out[start..].iter_mut().for_each(|v| *v /= total);
        }
        debug_assert_eq!(out.len(), t.rows() * c);
        let value = Tensor::new(t.shape().to_vec(), out).expect("same shape");
        self.push(value, Op::Softmax(x))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let (r, c) = (t.rows(), t.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = t.data()[i * c + j];
            }
        }
        self.push(Tensor::new(vec![c, r], out).expect("transpose"), Op::Transpose(x))
    }

    /// Concatenates matrices with equal row counts along the last axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::InvalidInput("concat of zero tensors".into()));
        };
        let rows = self.value(first).rows();
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(shape_err("concat", self.value(first), self.value(p)));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        Ok(self.push(Tensor::new(vec![rows, total], out)?, Op::ConcatCols(parts.to_vec())))
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        if start + len > t.cols() {
            return Err(Error::Shape {
                op: "slice",
                lhs: t.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let out = (0..t.rows())
            .flat_map(|r| t.row(r)[start..start + len].iter().copied())
            .collect();
        let value = Tensor::new(vec![t.rows(), len], out)?;
        Ok(self.push(value, Op::SliceCols { x, start }))
    }

    /// Row lookup: output row `i` is row `indices[i]` of `x`.
    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(x);
        if let Some(&bad) = indices.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::Shape {
                op: "gather_rows",
                lhs: t.shape().to_vec(),
                rhs: vec![bad],
            });
        }
        let out = indices.iter().flat_map(|&i| t.row(i).iter().copied()).collect();
        let value = Tensor::new(vec![indices.len(), t.cols()], out)?;
        Ok(self.push(
            value,
            Op::GatherRows {
                x,
                indices: indices.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Mean binary cross-entropy of `logits` against 0/1 `labels` over the
    /// entries where `mask` is non-zero, in the stable form
    /// `max(l, 0) - l b + ln(1 + e^{-|l|})`.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &Tensor, mask: Option<&Tensor>) -> Result<Var> {
        let tl = self.value(logits);
        if tl.shape() != labels.shape() {
            return Err(shape_err("bce_with_logits", tl, labels));
        }
        if let Some(&bad) = labels.data().iter().find(|&&b| b != 0.0 && b != 1.0) {
            return Err(Error::InvalidLabel(bad));
        }
        if let Some(m) = mask {
            if m.shape() != labels.shape() {
                return Err(shape_err("bce_with_logits mask", tl, m));
            }
        }
        let weight = |i: usize| mask.map_or(1.0, |m| if m.data()[i] != 0.0 { 1.0 } else { 0.0 });
        let mut total = 0.0;
        let mut count = 0.0;
        for (i, (&l, &b)) in tl.data().iter().zip(labels.data()).enumerate() {
            let w = weight(i);
            if w > 0.0 {
                total += l.max(0.0) - l * b + (-l.abs()).exp().ln_1p();
                count += 1.0;
            }
        }
        let loss = if count > 0.0 { total / count } else { 0.0 };
        let mask = mask.map(|m| (0..m.len()).map(weight).collect());
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Bce {
                logits,
                labels: labels.data().to_vec(),
                mask,
                count,
            },
        ))
    }

    #[doc(hidden)]
    pub fn faulty_identity(&mut self, x: Var, backward_factor: f64) -> Var {
        let value = self.value(x).clone();
        self.push(value, Op::Faulty(x, backward_factor))
    }

    /// Reverse pass from the scalar `out`.
    pub fn backward(&self, out: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Tensor::full(self.value(out).shape(), 1.0));

        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let gd = g.data();
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (m, k) = self.matrix_dims(*a);
                    let n = node.value.cols();
                    let (av, bv) = (self.value(*a), self.value(*b));
                    add_into(&mut grads[a.0], av.shape(), |d| gemm(m, n, k, gd, false, bv.data(), true, 1.0, d));
                    add_into(&mut grads[b.0], bv.shape(), |d| gemm(k, m, n, av.data(), true, gd, false, 1.0, d));
                }
                Op::MatMulNt(a, b) => {
                    let (m, k) = self.matrix_dims(*a);
                    let n = node.value.cols();
                    let (av, bv) = (self.value(*a), self.value(*b));
                    add_into(&mut grads[a.0], av.shape(), |d| gemm(m, n, k, gd, false, bv.data(), false, 1.0, d));
                    add_into(&mut grads[b.0], bv.shape(), |d| gemm(n, m, k, gd, true, av.data(), false, 1.0, d));
                }
                Op::Add(a, b) => {
                    for v in [a, b] {
                        add_into(&mut grads[v.0], node.value.shape(), |d| {
                            d.iter_mut().zip(gd).for_each(|(x, y)| *x += y)
                        });
                    }
                }
                Op::AddRow(a, bias) => {
                    add_into(&mut grads[a.0], node.value.shape(), |d| {
                        d.iter_mut().zip(gd).for_each(|(x, y)| *x += y)
                    });
                    let c = node.value.cols();
                    add_into(&mut grads[bias.0], self.value(*bias).shape(), |d| {
                        gd.chunks_exact(c).for_each(|row| d.iter_mut().zip(row).for_each(|(x, y)| *x += y))
                    });
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    add_into(&mut grads[a.0], av.shape(), |d| {
                        d.iter_mut().zip(gd).zip(bv.data()).for_each(|((x, g), o)| *x += g * o)
                    });
                    add_into(&mut grads[b.0], bv.shape(), |d| {
                        d.iter_mut().zip(gd).zip(av.data()).for_each(|((x, g), o)| *x += g * o)
                    });
                }
                Op::Relu(x) => {
                    let xv = self.value(*x);
                    add_into(&mut grads[x.0], xv.shape(), |d| {
                        d.iter_mut()
                            .zip(gd)
                            .zip(xv.data())
                            .for_each(|((acc, g), v)| if *v > 0.0 { *acc += g })
                    });
                }
                Op::Scale(x, f) => {
                    add_into(&mut grads[x.0], node.value.shape(), |d| {
                        d.iter_mut().zip(gd).for_each(|(acc, g)| *acc += g * f)
                    });
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    normalized,
                    inv_std,
                } => {
                    let c = node.value.cols();
                    let gv = self.value(*gain).data().to_vec();
                    add_into(&mut grads[gain.0], self.value(*gain).shape(), |d| {
                        for (grow, nrow) in gd.chunks_exact(c).zip(normalized.chunks_exact(c)) {
                            for j in 0..c {
                                d[j] += grow[j] * nrow[j];
                            }
                        }
                    });
                    add_into(&mut grads[bias.0], self.value(*bias).shape(), |d| {
                        gd.chunks_exact(c).for_each(|row| d.iter_mut().zip(row).for_each(|(a, b)| *a += b))
                    });
                    add_into(&mut grads[x.0], node.value.shape(), |d| {
                        let mut dn = vec![0.0; c];
                        for (r, (grow, nrow)) in gd.chunks_exact(c).zip(normalized.chunks_exact(c)).enumerate() {
                            for j in 0..c {
                                dn[j] = grow[j] * gv[j];
                            }
                            let sum_dn: f64 = dn.iter().sum();
                            let sum_dn_n: f64 = dn.iter().zip(nrow).map(|(a, b)| a * b).sum();
                            let scale = inv_std[r] / c as f64;
                            for j in 0..c {
                                d[r * c + j] += scale * (c as f64 * dn[j] - sum_dn - nrow[j] * sum_dn_n);
                            }
                        }
                    });
                }
                Op::Softmax(x) => {
                    let c = node.value.cols();
                    let y = node.value.data();
                    add_into(&mut grads[x.0], node.value.shape(), |d| {
                        for ((drow, grow), yrow) in d.chunks_exact_mut(c).zip(gd.chunks_exact(c)).zip(y.chunks_exact(c)) {
                            let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                            for j in 0..c {
                                drow[j] += yrow[j] * (grow[j] - dot);
                            }
                        }
                    });
                }
                Op::Transpose(x) => {
                    let (r, c) = self.matrix_dims(*x);
                    add_into(&mut grads[x.0], self.value(*x).shape(), |d| {
                        for i in 0..r {
                            for j in 0..c {
                                d[i * c + j] += gd[j * r + i];
                            }
                        }
                    });
                }
                Op::ConcatCols(parts) => {
                    let total = node.value.cols();
                    let mut offset = 0;
                    for p in parts {
                        let pv = self.value(*p);
                        let w = pv.cols();
                        add_into(&mut grads[p.0], pv.shape(), |d| {
                            for (drow, grow) in d.chunks_exact_mut(w).zip(gd.chunks_exact(total)) {
                                drow.iter_mut().zip(&grow[offset..offset + w]).for_each(|(a, b)| *a += b);
                            }
                        });
                        offset += w;
                    }
                }
                Op::SliceCols { x, start } => {
                    let xv = self.value(*x);
                    let (c, w) = (xv.cols(), node.value.cols());
                    add_into(&mut grads[x.0], xv.shape(), |d| {
                        for (drow, grow) in d.chunks_exact_mut(c).zip(gd.chunks_exact(w)) {
                            drow[*start..start + w].iter_mut().zip(grow).for_each(|(a, b)| *a += b);
                        }
                    });
                }
                Op::GatherRows { x, indices } => {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    add_into(&mut grads[x.0], xv.shape(), |d| {
                        for (grow, &i) in gd.chunks_exact(c).zip(indices) {
                            d[i * c..(i + 1) * c].iter_mut().zip(grow).for_each(|(a, b)| *a += b);
                        }
                    });
                }
                Op::Sum(x) => {
                    let g0 = gd[0];
                    add_into(&mut grads[x.0], self.value(*x).shape(), |d| d.iter_mut().for_each(|a| *a += g0));
                }
                Op::Bce {
                    logits,
                    labels,
                    mask,
                    count,
                } => {
                    if *count > 0.0 {
                        let g0 = gd[0] / count;
                        let lv = self.value(*logits);
                        add_into(&mut grads[logits.0], lv.shape(), |d| {
                            for (i, (acc, &l)) in d.iter_mut().zip(lv.data()).enumerate() {
                                let w = mask.as_ref().map_or(1.0, |m| m[i]);
                                if w > 0.0 {
                                    let sig = 1.0 / (1.0 + (-l).exp());
                                    *acc += g0 * (sig - labels[i]);
                                }
                            }
                        });
                    }
                }
                Op::Faulty(x, f) => {
                    add_into(&mut grads[x.0], node.value.shape(), |d| {
                        d.iter_mut().zip(gd).for_each(|(acc, g)| *acc += g * f)
                    });
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values_and_subgradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::new(vec![3], vec![-1.5, 2.0, 0.0]).unwrap());
        let y = t.relu(x);
        assert_eq!(t.value(y).data(), &[0.0, 2.0, 0.0]);
        let s = t.sum(y);
        let g = t.backward(s);
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn matmul_reference() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let b = t.leaf(Tensor::from_rows(&[&[5.0], &[6.0]]));
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.value(c).data(), &[17.0, 39.0]);
        assert_eq!(t.value(c).shape(), &[2, 1]);
        assert!(matches!(t.matmul(b, b), Err(Error::Shape { op: "matmul", .. })));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut t = Tape::new();
        let mut rng = crate::rng::rng_from(1);
        use rand::Rng;
        let data: Vec<f64> = (0..40).map(|_| rng.random_range(-30.0..30.0)).collect();
        let x = t.leaf(Tensor::new(vec![5, 8], data).unwrap());
        let y = t.softmax(x);
        for r in 0..5 {
            let row = t.value(y).row(r);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    proptest::proptest! {
        #[test]
        fn layer_norm_standardises_rows(
            data in proptest::collection::vec(-50.0f64..50.0, 16),
            spread in 1.0f64..20.0,
        ) {
            // Stretch each row so its variance is at least 100, where the
            // ε = 1e-6 term moves the output variance by under 1e-8.
            let mut rows = data.clone();
            for (i, v) in rows.iter_mut().enumerate() {
                *v += if i % 2 == 0 { 10.0 } else { -10.0 } * spread;
            }
            let mut t = Tape::new();
            let x = t.leaf(Tensor::new(vec![2, 8], rows).unwrap());
            let g = t.leaf(Tensor::full(&[8], 1.0));
            let b = t.leaf(Tensor::zeros(&[8]));
            let y = t.layer_norm(x, g, b).unwrap();
            for r in 0..2 {
                let row = t.value(y).row(r);
                let mean = row.iter().sum::<f64>() / 8.0;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
                proptest::prop_assert!(mean.abs() < 1e-10);
                proptest::prop_assert!((var - 1.0).abs() < 1e-8, "{}", var);
            }
        }
    }

    #[test]
    fn layer_norm_epsilon_shrinks_variance() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::new(vec![1, 2], vec![-1e-3, 1e-3]).unwrap());
        let g = t.leaf(Tensor::full(&[2], 1.0));
        let b = t.leaf(Tensor::zeros(&[2]));
        let y = t.layer_norm(x, g, b).unwrap();
        let expected = 1e-3 / (1e-6f64 + 1e-6).sqrt();
        assert!((t.value(y).data()[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn bce_reference_values() {
        let mut t = Tape::new();
        let l = t.leaf(Tensor::new(vec![1], vec![0.0]).unwrap());
        let loss = t.bce_with_logits(l, &Tensor::scalar(1.0), None).unwrap();
        assert!((t.value(loss).item() - std::f64::consts::LN_2).abs() < 1e-12);

        let l = t.leaf(Tensor::scalar(30.0));
        let loss = t.bce_with_logits(l, &Tensor::scalar(1.0), None).unwrap();
        assert!(t.value(loss).item() < 1e-12);

        assert!(matches!(
            t.bce_with_logits(l, &Tensor::scalar(0.5), None),
            Err(Error::InvalidLabel(_))
        ));
    }

    #[test]
    fn bce_mask_excludes_entries() {
        let mut t = Tape::new();
        let l = t.leaf(Tensor::new(vec![2], vec![0.0, 100.0]).unwrap());
        let labels = Tensor::new(vec![2], vec![1.0, 0.0]).unwrap();
        let mask = Tensor::new(vec![2], vec![1.0, 0.0]).unwrap();
        let loss = t.bce_with_logits(l, &labels, Some(&mask)).unwrap();
        assert!((t.value(loss).item() - std::f64::consts::LN_2).abs() < 1e-12);
        let g = t.backward(loss);
        assert_eq!(g.get(l).unwrap().data(), &[-0.5, 0.0]);
    }

    #[test]
    fn identity_gradient_is_one() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(3.25));
        let g = t.backward(x);
        assert_eq!(g.get(x).unwrap().data(), &[1.0]);
    }

    #[test]
    fn shared_inputs_accumulate() {
        // y = sum(x * x) => dy/dx = 2x
        let mut t = Tape::new();
        let x = t.leaf(Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap());
        let sq = t.mul(x, x).unwrap();
        let y = t.sum(sq);
        let g = t.backward(y);
        assert_eq!(g.get(x).unwrap().data(), &[2.0, -4.0, 1.0]);
    }
}

//! Reverse-mode automatic differentiation over dense matrices.
//!
//! Every value on a [`Tape`] is a 2-D matrix; scalars are `1×1`. Operations
//! append nodes, [`Tape::backward`] walks them in reverse and returns the
//! gradient of a scalar node with respect to every node on the tape.

use std::rc::Rc;

use ndarray::{s, Array2, Axis, Zip};

use super::sparse::Csr;
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(Rc<Csr<T>>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Log(Var),
    Sqrt(Var),
    Square(Var),
    Transpose(Var),
    SoftmaxRows(Var),
    SliceCols(Var, usize),
    ConcatCols(Var, Var),
    Sum(Var),
    MeanRows(Var),
    RowSums(Var),
    DivRows(Var, Var),
    Div(Var, Var),
    MulScalar(Var, Var),
    Trace(Var),
    ClampMin(Var, T),
    SoftmaxCrossEntropy {
        logits: Var,
        probs: Array2<T>,
        targets: Vec<usize>,
    },
    BceWithLogits {
        logits: Var,
        targets: Array2<T>,
        weights: Array2<T>,
        total: T,
    },
    BceProbs {
        probs: Var,
        targets: Array2<T>,
        weights: Array2<T>,
        total: T,
        eps: T,
    },
}

struct Node<T> {
    value: Array2<T>,
    op: Op<T>,
}

/// Records a computation for later differentiation.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of one scalar output with respect to every tape node.
pub struct Gradients<T> {
    grads: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Array2<T>> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Array2<T>> {
        self.grads[v.0].take()
    }
}

fn scalar<T: Scalar>(x: T) -> Array2<T> {
    Array2::from_elem((1, 1), x)
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1×1` node.
    pub fn scalar(&self, v: Var) -> T {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    pub fn leaf(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant_scalar(&mut self, x: T) -> Var {
        self.leaf(scalar(x))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `m · a` for a constant sparse `m`.
    pub fn sparse_matmul(&mut self, m: Rc<Csr<T>>, a: Var) -> Var {
        let v = m.matmul(self.value(a));
        self.push(v, Op::SparseMatMul(m, a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    /// Adds the `1×d` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::AddRow(a, b))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a) + c;
        self.push(v, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| if x > T::zero() { x } else { T::zero() });
        self.push(v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(T::ln);
        self.push(v, Op::Log(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(T::sqrt);
        self.push(v, Op::Sqrt(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let v = ndarray::concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("concat_cols: row counts differ");
        self.push(v, Op::ConcatCols(a, b))
    }

    /// Sum of all entries, as `1×1`.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = scalar(self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Column-wise mean, `n×d → 1×d`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let n = T::of_usize(m.nrows());
        let v = m.sum_axis(Axis(0)).insert_axis(Axis(0)) / n;
        self.push(v, Op::MeanRows(a))
    }

    /// Row sums, `n×d → n×1`.
    pub fn row_sums(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(v, Op::RowSums(a))
    }

    /// Divides row `i` of `a` by `b[i, 0]`.
    pub fn div_rows(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) / self.value(b);
        self.push(v, Op::DivRows(a, b))
    }

    /// Scalar division of `1×1` nodes.
    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = scalar(self.scalar(a) / self.scalar(b));
        self.push(v, Op::Div(a, b))
    }

    /// `a · s` for a `1×1` node `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Var {
        let v = self.value(a) * self.scalar(s);
        self.push(v, Op::MulScalar(a, s))
    }

    pub fn trace(&mut self, a: Var) -> Var {
        let v = scalar(self.value(a).diag().sum());
        self.push(v, Op::Trace(a))
    }

    pub fn clamp_min(&mut self, a: Var, lo: T) -> Var {
        let v = self.value(a).mapv(|x| if x > lo { x } else { lo });
        self.push(v, Op::ClampMin(a, lo))
    }

    /// Mean softmax cross-entropy of `n×C` logits against one class per row.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let z = self.value(logits);
        assert_eq!(z.nrows(), targets.len(), "one target per logit row");
        let probs = softmax_rows(z);
        let n = T::of_usize(targets.len());
        let mut loss = T::zero();
        for (i, &t) in targets.iter().enumerate() {
            let row = z.row(i);
            let max = row.fold(T::neg_infinity(), |m, &x| m.max(x));
            let lse = max + row.mapv(|x| (x - max).exp()).sum().ln();
            loss = loss + lse - row[t];
        }
        self.push(
            scalar(loss / n),
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                targets: targets.to_vec(),
            },
        )
    }

    /// Weighted binary cross-entropy on logits, normalised by total weight.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Array2<T>, weights: Array2<T>) -> Var {
        let z = self.value(logits);
        assert_eq!(z.dim(), targets.dim());
        assert_eq!(z.dim(), weights.dim());
        let total = weights.sum();
        let mut loss = T::zero();
        Zip::from(z).and(&targets).and(&weights).for_each(|&x, &y, &w| {
            let l = x.max(T::zero()) - x * y + (T::one() + (-x.abs()).exp()).ln();
            loss = loss + w * l;
        });
        self.push(
            scalar(loss / total),
            Op::BceWithLogits {
                logits,
                targets,
                weights,
                total,
            },
        )
    }

    /// Weighted binary cross-entropy on probabilities clamped to `[eps, 1 - eps]`,
    /// normalised by total weight. Clamped entries pass no gradient.
    pub fn bce_probs(&mut self, probs: Var, targets: Array2<T>, weights: Array2<T>, eps: T) -> Var {
        let p = self.value(probs);
        assert_eq!(p.dim(), targets.dim());
        assert_eq!(p.dim(), weights.dim());
        let total = weights.sum();
        let mut loss = T::zero();
        Zip::from(p).and(&targets).and(&weights).for_each(|&p, &y, &w| {
            let c = p.max(eps).min(T::one() - eps);
            loss = loss - w * (y * c.ln() + (T::one() - y) * (T::one() - c).ln());
        });
        self.push(
            scalar(loss / total),
            Op::BceProbs {
                probs,
                targets,
                weights,
                total,
                eps,
            },
        )
    }

    /// Gradients of the `1×1` node `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Gradients<T> {
        assert_eq!(self.value(output).dim(), (1, 1), "backward needs a scalar output");
        let mut grads: Vec<Option<Array2<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(scalar(T::one()));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    accumulate(&mut grads, *a, g.dot(&val(*b).t()));
                    accumulate(&mut grads, *b, val(*a).t().dot(&g));
                }
                Op::SparseMatMul(m, a) => accumulate(&mut grads, *a, m.t_matmul(&g)),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.mapv(|x| -x));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    accumulate(&mut grads, *a, &g * val(*b));
                    accumulate(&mut grads, *b, &g * val(*a));
                }
                Op::AddRow(a, b) => {
                    accumulate(&mut grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    accumulate(&mut grads, *a, g);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g * *c),
                Op::AddScalar(a) => accumulate(&mut grads, *a, g),
                Op::Relu(a) => {
                    let mut d = g;
                    Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                        if x <= T::zero() {
                            *d = T::zero();
                        }
                    });
                    accumulate(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let d = Zip::from(&g).and(y).map_collect(|&g, &y| g * y * (T::one() - y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Log(a) => accumulate(&mut grads, *a, g / val(*a)),
                Op::Sqrt(a) => {
                    let two = T::of(2.0);
                    let d = Zip::from(&g).and(&node.value).map_collect(|&g, &y| g / (two * y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Square(a) => accumulate(&mut grads, *a, g * val(*a) * T::of(2.0)),
                Op::Transpose(a) => accumulate(&mut grads, *a, g.t().to_owned()),
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                    accumulate(&mut grads, *a, y * &(&g - &dot));
                }
                Op::SliceCols(a, start) => {
                    let src = val(*a);
                    let mut d = Array2::zeros(src.dim());
                    d.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    accumulate(&mut grads, *a, d);
                }
                Op::ConcatCols(a, b) => {
                    let split = val(*a).ncols();
                    accumulate(&mut grads, *a, g.slice(s![.., ..split]).to_owned());
                    accumulate(&mut grads, *b, g.slice(s![.., split..]).to_owned());
                }
                Op::Sum(a) => accumulate(&mut grads, *a, Array2::from_elem(val(*a).dim(), g[[0, 0]])),
                Op::MeanRows(a) => {
                    let src = val(*a);
                    let n = T::of_usize(src.nrows());
                    let d = g.broadcast(src.dim()).expect("row broadcast").mapv(|x| x / n);
                    accumulate(&mut grads, *a, d);
                }
                Op::RowSums(a) => {
                    let d = g.broadcast(val(*a).dim()).expect("column broadcast").to_owned();
                    accumulate(&mut grads, *a, d);
                }
                Op::DivRows(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let db = -((&g * av).sum_axis(Axis(1)).insert_axis(Axis(1))) / (bv * bv);
                    accumulate(&mut grads, *b, db);
                    accumulate(&mut grads, *a, g / bv);
                }
                Op::Div(a, b) => {
                    let (av, bv) = (self.scalar(*a), self.scalar(*b));
                    let gs = g[[0, 0]];
                    accumulate(&mut grads, *a, scalar(gs / bv));
                    accumulate(&mut grads, *b, scalar(-gs * av / (bv * bv)));
                }
                Op::MulScalar(a, sv) => {
                    let sval = self.scalar(*sv);
                    accumulate(&mut grads, *sv, scalar((&g * val(*a)).sum()));
                    accumulate(&mut grads, *a, g * sval);
                }
                Op::Trace(a) => {
                    let n = val(*a).nrows();
                    accumulate(&mut grads, *a, Array2::eye(n) * g[[0, 0]]);
                }
                Op::ClampMin(a, lo) => {
                    let mut d = g;
                    Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                        if x <= *lo {
                            *d = T::zero();
                        }
                    });
                    accumulate(&mut grads, *a, d);
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    probs,
                    targets,
                } => {
                    let n = T::of_usize(targets.len());
                    let mut d = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        d[[i, t]] = d[[i, t]] - T::one();
                    }
                    accumulate(&mut grads, *logits, d * (g[[0, 0]] / n));
                }
                Op::BceWithLogits {
                    logits,
                    targets,
                    weights,
                    total,
                } => {
                    let scale = g[[0, 0]] / *total;
                    let d = Zip::from(val(*logits))
                        .and(targets)
                        .and(weights)
                        .map_collect(|&x, &y, &w| w * (sigmoid(x) - y) * scale);
                    accumulate(&mut grads, *logits, d);
                }
                Op::BceProbs {
                    probs,
                    targets,
                    weights,
                    total,
                    eps,
                } => {
                    let scale = g[[0, 0]] / *total;
                    let (eps, one) = (*eps, T::one());
                    let d = Zip::from(val(*probs))
                        .and(targets)
                        .and(weights)
                        .map_collect(|&p, &y, &w| {
                            if p <= eps || p >= one - eps {
                                T::zero()
                            } else {
                                w * (-y / p + (one - y) / (one - p)) * scale
                            }
                        });
                    accumulate(&mut grads, *probs, d);
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Array2<T>>], v: Var, g: Array2<T>) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softmax_rows<T: Scalar>(z: &Array2<T>) -> Array2<T> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(T::neg_infinity(), |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let total = row.sum();
        row.mapv_inplace(|x| x / total);
    }
    out
}

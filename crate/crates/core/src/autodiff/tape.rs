use super::norm::{self, NormSaved};
use super::{Mode, NormKind, ParamId, ParamStore, RunningStats, Tensor, TensorError};
use crate::scalar::Scalar;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T: Scalar> {
    Input,
    Param(ParamId),
    Affine { x: Var, w: Var, b: Var },
    Relu { x: Var },
    Norm { x: Var, gamma: Var, beta: Var, saved: NormSaved<T> },
    Concat { x: Var, y: Var },
    Add { x: Var, y: Var },
    MeanRows { x: Var },
    CrossEntropy { logits: Var, probs: Tensor<T>, targets: Vec<usize> },
    Dot { x: Var, weights: Tensor<T> },
}

#[derive(Debug)]
struct Node<T: Scalar> {
    op: Op<T>,
    value: Tensor<T>,
}

/// Records executed ops and their saved activations in execution order.
#[derive(Debug, Default)]
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

/// Gradients of one backward pass for the leaf nodes (inputs and parameters).
#[derive(Debug)]
pub struct Gradients<T: Scalar> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn mismatch(op: &'static str, detail: String) -> TensorError {
    TensorError::ShapeMismatch { op, detail }
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

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v).get(0, 0)
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Input, t)
    }

    /// Leaf holding a copy of a parameter value; its gradient flows back into
    /// the store on [`Tape::backward`].
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(Op::Param(id), store.get(id).value.clone())
    }

    /// `x W + b` with `b` broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if bv.shape() != (1, wv.cols()) {
            return Err(mismatch("affine", format!("bias {:?} for weight {:?}", bv.shape(), wv.shape())));
        }
        let mut y = xv.matmul(wv).map_err(|_| mismatch("affine", format!("{:?} x {:?}", xv.shape(), wv.shape())))?;
        let bias = bv.row(0).to_vec();
        for r in 0..y.rows() {
            for (o, &bb) in y.row_mut(r).iter_mut().zip(&bias) {
                *o = *o + bb;
            }
        }
        Ok(self.push(Op::Affine { x, w, b }, y))
    }

    /// Which inputs of every recorded ReLU are positive, in tape order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu { x } => Some(x),
                _ => None,
            })
            .flat_map(|x| self.value(x).data().iter().map(|&v| v > T::zero()))
            .collect()
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(Op::Relu { x }, y)
    }

    /// Normalization followed by the per-channel affine `gamma`, `beta`.
    ///
    /// `groups` is only read for group norm. Batch norm needs `running` and in
    /// eval mode normalizes with it instead of the batch statistics.
    #[allow(clippy::too_many_arguments)]
    pub fn norm(
        &mut self,
        x: Var,
        kind: NormKind,
        groups: usize,
        gamma: Var,
        beta: Var,
        mode: Mode,
        running: Option<RunningStats<'_, T>>,
    ) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let c = xv.cols();
        for (name, p) in [("gamma", gamma), ("beta", beta)] {
            if self.shape(p) != (1, c) {
                return Err(mismatch("norm", format!("{name} {:?} for {c} channels", self.shape(p))));
            }
        }
        let saved = match kind {
            NormKind::Layer => norm::row_groups_forward(xv, 1),
            NormKind::Group => {
                if groups == 0 || c % groups != 0 {
                    return Err(TensorError::InvalidGroupCount { channels: c, groups });
                }
                norm::row_groups_forward(xv, groups)
            }
            NormKind::Instance => norm::columns_forward(xv).0,
            NormKind::GlobalResponse => norm::grn_forward(xv),
            NormKind::Batch => {
                let stats = running.ok_or_else(|| mismatch("norm", "batch norm without running statistics".into()))?;
                if stats.mean.shape() != (1, c) || stats.var.shape() != (1, c) {
                    return Err(mismatch("norm", format!("running statistics for {c} channels")));
                }
                match mode {
                    Mode::Train => {
                        let (saved, mean, var) = norm::columns_forward(xv);
                        let m = T::of(norm::BN_MOMENTUM);
                        let one_m = T::one() - m;
                        for j in 0..c {
                            stats.mean.set(0, j, m * stats.mean.get(0, j) + one_m * mean[j]);
                            stats.var.set(0, j, m * stats.var.get(0, j) + one_m * var[j]);
                        }
                        saved
                    }
                    Mode::Eval => norm::frozen_forward(xv, stats.mean.row(0), stats.var.row(0)),
                }
            }
        };
        let y = saved.output(self.value(gamma).row(0), self.value(beta).row(0));
        Ok(self.push(Op::Norm { x, gamma, beta, saved }, y))
    }

    /// Channel concatenation `[x | y]`.
    pub fn concat(&mut self, x: Var, y: Var) -> Result<Var, TensorError> {
        let (xv, yv) = (self.value(x), self.value(y));
        if xv.rows() != yv.rows() {
            return Err(mismatch("concat", format!("{:?} with {:?}", xv.shape(), yv.shape())));
        }
        let (a, b) = (xv.cols(), yv.cols());
        let out = Tensor::from_fn(xv.rows(), a + b, |r, c| if c < a { xv.get(r, c) } else { yv.get(r, c - a) });
        Ok(self.push(Op::Concat { x, y }, out))
    }

    pub fn add(&mut self, x: Var, y: Var) -> Result<Var, TensorError> {
        let (xv, yv) = (self.value(x), self.value(y));
        if xv.shape() != yv.shape() {
            return Err(mismatch("add", format!("{:?} + {:?}", xv.shape(), yv.shape())));
        }
        let mut out = xv.clone();
        out.add_assign(yv);
        Ok(self.push(Op::Add { x, y }, out))
    }

    /// Column means as a `1 x c` row.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var, TensorError> {
        let xv = self.value(x);
        if xv.rows() == 0 {
            return Err(mismatch("mean_rows", "no rows".into()));
        }
        let n = T::of_usize(xv.rows());
        let means: Vec<T> = xv.column_sums().into_iter().map(|s| s / n).collect();
        let c = means.len();
        let out = Tensor::from_vec(1, c, means)?;
        Ok(self.push(Op::MeanRows { x }, out))
    }

    /// Mean over rows of `-log softmax(logits)[target]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, TensorError> {
        let lv = self.value(logits);
        let (n, k) = lv.shape();
        if targets.len() != n || n == 0 {
            return Err(mismatch("softmax_cross_entropy", format!("{} targets for {n} rows", targets.len())));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= k) {
            return Err(TensorError::InvalidTarget { target: t, classes: k });
        }
        let mut probs = Tensor::zeros(n, k);
        let mut total = T::zero();
        for (r, &t) in targets.iter().enumerate() {
            let row = lv.row(r);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for (p, &l) in probs.row_mut(r).iter_mut().zip(row) {
                *p = (l - max).exp();
                z = z + *p;
            }
            probs.row_mut(r).iter_mut().for_each(|p| *p = *p / z);
            total = total + (z.ln() - (row[t] - max));
        }
        let loss = Tensor::filled(1, 1, total / T::of_usize(n));
        Ok(self.push(
            Op::CrossEntropy {
                logits,
                probs,
                targets: targets.to_vec(),
            },
            loss,
        ))
    }

    /// `sum(x * weights)` as a `1 x 1` node; turns any output into a scalar
    /// objective for gradient checks.
    pub fn dot(&mut self, x: Var, weights: Tensor<T>) -> Result<Var, TensorError> {
        let xv = self.value(x);
        if xv.shape() != weights.shape() {
            return Err(mismatch("dot", format!("{:?} . {:?}", xv.shape(), weights.shape())));
        }
        let s: T = xv.data().iter().zip(weights.data()).map(|(&a, &b)| a * b).sum();
        Ok(self.push(Op::Dot { x, weights }, Tensor::filled(1, 1, s)))
    }

    /// Reverse pass from a `1 x 1` node. Parameter gradients are added into
    /// `store`; all node gradients are returned.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Gradients<T> {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar node");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(1, 1, T::one()));

        fn acc<T: Scalar>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => store.get_mut(*id).grad.add_assign(&dy),
                Op::Affine { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (n, a, bcols) = (xv.rows(), xv.cols(), wv.cols());
                    let mut dx = Tensor::zeros(n, a);
                    T::gemm(
                        n,
                        bcols,
                        a,
                        T::one(),
                        dy.data(),
                        bcols as isize,
                        1,
                        wv.data(),
                        1,
                        bcols as isize,
                        T::zero(),
                        dx.data_mut(),
                        a as isize,
                        1,
                    );
                    let mut dw = Tensor::zeros(a, bcols);
                    T::gemm(
                        a,
                        n,
                        bcols,
                        T::one(),
                        xv.data(),
                        1,
                        a as isize,
                        dy.data(),
                        bcols as isize,
                        1,
                        T::zero(),
                        dw.data_mut(),
                        bcols as isize,
                        1,
                    );
                    let db = Tensor::from_vec(1, bcols, dy.column_sums()).expect("bias shape");
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *w, dw);
                    acc(&mut grads, *b, db);
                }
                Op::Relu { x } => {
                    let mut dx = dy.clone();
                    for (d, &y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                        if y <= T::zero() {
                            *d = T::zero();
                        }
                    }
                    acc(&mut grads, *x, dx);
                }
                Op::Norm { x, gamma, beta, saved } => {
                    let (dx, dg, db) = saved.backward(&dy, self.value(*gamma).row(0));
                    let c = dg.len();
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *gamma, Tensor::from_vec(1, c, dg).expect("gamma shape"));
                    acc(&mut grads, *beta, Tensor::from_vec(1, c, db).expect("beta shape"));
                }
                Op::Concat { x, y } => {
                    let a = self.value(*x).cols();
                    let b = self.value(*y).cols();
                    let n = dy.rows();
                    let dx = Tensor::from_fn(n, a, |r, c| dy.get(r, c));
                    let dyy = Tensor::from_fn(n, b, |r, c| dy.get(r, a + c));
                    acc(&mut grads, *x, dx);
                    acc(&mut grads, *y, dyy);
                }
                Op::Add { x, y } => {
                    acc(&mut grads, *x, dy.clone());
                    acc(&mut grads, *y, dy.clone());
                }
                Op::MeanRows { x } => {
                    let n = self.value(*x).rows();
                    let inv = T::one() / T::of_usize(n);
                    let dx = Tensor::from_fn(n, dy.cols(), |_, c| dy.get(0, c) * inv);
                    acc(&mut grads, *x, dx);
                }
                Op::CrossEntropy { logits, probs, targets } => {
                    let scale = dy.get(0, 0) / T::of_usize(targets.len());
                    let mut dl = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        let row = dl.row_mut(r);
                        row[t] = row[t] - T::one();
                        row.iter_mut().for_each(|v| *v = *v * scale);
                    }
                    acc(&mut grads, *logits, dl);
                }
                Op::Dot { x, weights } => {
                    let mut dx = weights.clone();
                    dx.scale_mut(dy.get(0, 0));
                    acc(&mut grads, *x, dx);
                }
            }
            // Interior gradients are dropped once consumed to bound memory.
            if matches!(node.op, Op::Input | Op::Param(_)) {
                grads[i] = Some(dy);
            }
        }
        Gradients { grads }
    }
}

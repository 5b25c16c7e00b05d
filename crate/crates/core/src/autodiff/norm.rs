//! Normalization kernels shared by the tape: forward passes return the saved
//! state their backward passes need.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::scalar::Scalar;

/// Denominator guard for every normalization kind.
pub const EPS_NORM: f64 = 1e-5;
/// Weight of the previous running statistic in batch norm.
pub const BN_MOMENTUM: f64 = 0.9;
/// Default channel groups for group norm.
pub const DEFAULT_GROUPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    /// Per row over all channels.
    #[serde(rename = "ln")]
    Layer,
    /// Per channel over rows; running statistics for eval.
    #[serde(rename = "bn")]
    Batch,
    /// Per row over channel groups.
    #[serde(rename = "gn")]
    Group,
    /// Per channel over the rows of one mesh, no running statistics.
    #[serde(rename = "in")]
    Instance,
    /// Global response normalization with an additive skip.
    #[serde(rename = "grn")]
    GlobalResponse,
}

impl NormKind {
    pub const ALL: [NormKind; 5] = [
        NormKind::Layer,
        NormKind::Batch,
        NormKind::Group,
        NormKind::Instance,
        NormKind::GlobalResponse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::Layer => "ln",
            NormKind::Batch => "bn",
            NormKind::Group => "gn",
            NormKind::Instance => "in",
            NormKind::GlobalResponse => "grn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        NormKind::ALL.into_iter().find(|k| k.as_str() == s.to_ascii_lowercase())
    }

    pub fn has_running_stats(self) -> bool {
        self == NormKind::Batch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Mutable running mean/variance (each `1 x c`) for batch norm.
pub struct RunningStats<'a, T: Scalar> {
    pub mean: &'a mut Tensor<T>,
    pub var: &'a mut Tensor<T>,
}

#[derive(Debug, Clone)]
pub(crate) enum NormSaved<T: Scalar> {
    /// Statistics over contiguous channel groups of each row.
    RowGroups {
        xhat: Tensor<T>,
        inv_std: Vec<T>,
        groups: usize,
    },
    /// Statistics over rows of each column.
    Columns { xhat: Tensor<T>, inv_std: Vec<T> },
    /// Fixed (running) statistics: the map is affine in `x`.
    Frozen { xhat: Tensor<T>, inv_std: Vec<T> },
    Grn {
        x: Tensor<T>,
        g: Vec<T>,
        nrm: Vec<T>,
        denom: T,
    },
}

pub(crate) fn row_groups_forward<T: Scalar>(x: &Tensor<T>, groups: usize) -> NormSaved<T> {
    let (n, c) = x.shape();
    let size = c / groups;
    let eps = T::of(EPS_NORM);
    let mut xhat = Tensor::zeros(n, c);
    let mut inv_std = Vec::with_capacity(n * groups);
    let sz = T::of_usize(size);
    for r in 0..n {
        for g in 0..groups {
            let src = &x.row(r)[g * size..(g + 1) * size];
            let mean = src.iter().copied().sum::<T>() / sz;
            let var = src.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / sz;
            let inv = T::one() / (var + eps).sqrt();
            for (o, &v) in xhat.row_mut(r)[g * size..(g + 1) * size].iter_mut().zip(src) {
                *o = (v - mean) * inv;
            }
            inv_std.push(inv);
        }
    }
    NormSaved::RowGroups { xhat, inv_std, groups }
}

pub(crate) fn columns_forward<T: Scalar>(x: &Tensor<T>) -> (NormSaved<T>, Vec<T>, Vec<T>) {
    let (n, c) = x.shape();
    let eps = T::of(EPS_NORM);
    let nn = T::of_usize(n.max(1));
    let mean: Vec<T> = x.column_sums().into_iter().map(|s| s / nn).collect();
    let mut var = vec![T::zero(); c];
    for r in 0..n {
        for (j, &v) in x.row(r).iter().enumerate() {
            let d = v - mean[j];
            var[j] = var[j] + d * d;
        }
    }
    var.iter_mut().for_each(|v| *v = *v / nn);
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = Tensor::zeros(n, c);
    for r in 0..n {
        for (j, (o, &v)) in xhat.row_mut(r).iter_mut().zip(x.row(r)).enumerate() {
            *o = (v - mean[j]) * inv_std[j];
        }
    }
    (NormSaved::Columns { xhat, inv_std }, mean, var)
}

pub(crate) fn frozen_forward<T: Scalar>(x: &Tensor<T>, mean: &[T], var: &[T]) -> NormSaved<T> {
    let eps = T::of(EPS_NORM);
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = Tensor::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        for (j, (o, &v)) in xhat.row_mut(r).iter_mut().zip(x.row(r)).enumerate() {
            *o = (v - mean[j]) * inv_std[j];
        }
    }
    NormSaved::Frozen { xhat, inv_std }
}

pub(crate) fn grn_forward<T: Scalar>(x: &Tensor<T>) -> NormSaved<T> {
    let (n, c) = x.shape();
    let eps = T::of(EPS_NORM);
    let mut sq = vec![T::zero(); c];
    for r in 0..n {
        for (s, &v) in sq.iter_mut().zip(x.row(r)) {
            *s = *s + v * v;
        }
    }
    let g: Vec<T> = sq.into_iter().map(|s| (s + eps).sqrt()).collect();
    let denom = g.iter().copied().sum::<T>() / T::of_usize(c.max(1)) + eps;
    let nrm = g.iter().map(|&gi| gi / denom).collect();
    NormSaved::Grn {
        x: x.clone(),
        g,
        nrm,
        denom,
    }
}

impl<T: Scalar> NormSaved<T> {
    /// Output given the per-channel affine parameters.
    pub(crate) fn output(&self, gamma: &[T], beta: &[T]) -> Tensor<T> {
        match self {
            NormSaved::RowGroups { xhat, .. }
            | NormSaved::Columns { xhat, .. }
            | NormSaved::Frozen { xhat, .. } => {
                let mut y = xhat.clone();
                for r in 0..y.rows() {
                    for (j, v) in y.row_mut(r).iter_mut().enumerate() {
                        *v = gamma[j] * *v + beta[j];
                    }
                }
                y
            }
            NormSaved::Grn { x, nrm, .. } => {
                let mut y = x.clone();
                for r in 0..y.rows() {
                    for (j, v) in y.row_mut(r).iter_mut().enumerate() {
                        *v = gamma[j] * *v * nrm[j] + beta[j] + *v;
                    }
                }
                y
            }
        }
    }

    /// Returns `(dx, dgamma, dbeta)`.
    pub(crate) fn backward(&self, dy: &Tensor<T>, gamma: &[T]) -> (Tensor<T>, Vec<T>, Vec<T>) {
        let (n, c) = dy.shape();
        let dbeta = dy.column_sums();
        match self {
            NormSaved::Grn { x, g, nrm, denom } => {
                let mut dgamma = vec![T::zero(); c];
                let mut a = vec![T::zero(); c];
                let mut dx = Tensor::zeros(n, c);
                for r in 0..n {
                    for j in 0..c {
                        let d = dy.get(r, j);
                        let xv = x.get(r, j);
                        dgamma[j] = dgamma[j] + d * xv * nrm[j];
                        a[j] = a[j] + d * gamma[j] * xv;
                        dx.set(r, j, d * (T::one() + gamma[j] * nrm[j]));
                    }
                }
                // N_j = G_j / (mean(G) + eps); G_j = sqrt(sum_r x_rj^2 + eps).
                let cc = T::of_usize(c);
                let cross: T = a.iter().zip(g).map(|(&ai, &gi)| ai * gi).sum::<T>() / (*denom * *denom * cc);
                let dg: Vec<T> = a.iter().map(|&ai| ai / *denom - cross).collect();
                for r in 0..n {
                    for j in 0..c {
                        let v = dx.get(r, j) + dg[j] * x.get(r, j) / g[j];
                        dx.set(r, j, v);
                    }
                }
                (dx, dgamma, dbeta)
            }
            NormSaved::RowGroups { xhat, inv_std, groups } => {
                let dgamma = weighted_column_sums(dy, xhat);
                let size = c / groups;
                let sz = T::of_usize(size);
                let mut dx = Tensor::zeros(n, c);
                for r in 0..n {
                    for gi in 0..*groups {
                        let range = gi * size..(gi + 1) * size;
                        let inv = inv_std[r * groups + gi];
                        let xh = &xhat.row(r)[range.clone()];
                        let dyr = &dy.row(r)[range.clone()];
                        let gm = &gamma[range.clone()];
                        let mut sum_d = T::zero();
                        let mut sum_dx = T::zero();
                        for k in 0..size {
                            let d = dyr[k] * gm[k];
                            sum_d = sum_d + d;
                            sum_dx = sum_dx + d * xh[k];
                        }
                        let out = &mut dx.row_mut(r)[range];
                        for k in 0..size {
                            let d = dyr[k] * gm[k];
                            out[k] = inv * (d - sum_d / sz - xh[k] * sum_dx / sz);
                        }
                    }
                }
                (dx, dgamma, dbeta)
            }
            NormSaved::Columns { xhat, inv_std } => {
                let dgamma = weighted_column_sums(dy, xhat);
                let nn = T::of_usize(n.max(1));
                let mut sum_d = vec![T::zero(); c];
                let mut sum_dx = vec![T::zero(); c];
                for r in 0..n {
                    for j in 0..c {
                        let d = dy.get(r, j) * gamma[j];
                        sum_d[j] = sum_d[j] + d;
                        sum_dx[j] = sum_dx[j] + d * xhat.get(r, j);
                    }
                }
                let mut dx = Tensor::zeros(n, c);
                for r in 0..n {
                    for j in 0..c {
                        let d = dy.get(r, j) * gamma[j];
                        let v = inv_std[j] * (d - sum_d[j] / nn - xhat.get(r, j) * sum_dx[j] / nn);
                        dx.set(r, j, v);
                    }
                }
                (dx, dgamma, dbeta)
            }
            NormSaved::Frozen { xhat, inv_std } => {
                let dgamma = weighted_column_sums(dy, xhat);
                let mut dx = dy.clone();
                for r in 0..n {
                    for (j, v) in dx.row_mut(r).iter_mut().enumerate() {
                        *v = *v * gamma[j] * inv_std[j];
                    }
                }
                (dx, dgamma, dbeta)
            }
        }
    }
}

fn weighted_column_sums<T: Scalar>(dy: &Tensor<T>, w: &Tensor<T>) -> Vec<T> {
    let mut s = vec![T::zero(); dy.cols()];
    for r in 0..dy.rows() {
        for ((acc, &d), &x) in s.iter_mut().zip(dy.row(r)).zip(w.row(r)) {
            *acc = *acc + d * x;
        }
    }
    s
}

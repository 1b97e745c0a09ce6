//! Layers that own no storage: each records where its parameters live inside
//! the flat parameter vector of the component it belongs to.

use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::ops;
use crate::scalar::Scalar;

/// Hands out consecutive ranges of a flat parameter vector.
#[derive(Default)]
pub struct ParamAlloc {
    len: usize,
}

impl ParamAlloc {
    pub fn take(&mut self, n: usize) -> usize {
        let off = self.len;
        self.len += n;
        off
    }

    pub fn len(&self) -> usize {
        self.len
    }
}

/// 3x3 convolution, stride 1, padding 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv3 {
    pub cin: usize,
    pub cout: usize,
    w: usize,
    b: usize,
}

pub struct ConvCache<T> {
    col: Vec<T>,
}

impl Conv3 {
    pub fn new(cin: usize, cout: usize, alloc: &mut ParamAlloc) -> Self {
        let w = alloc.take(cout * cin * 9);
        let b = alloc.take(cout);
        Self { cin, cout, w, b }
    }

    pub fn init<T: Scalar>(&self, params: &mut [T], rng: &mut impl rand::Rng) {
        let fan_in = (self.cin * 9) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let dist = Uniform::new(-bound, bound).unwrap();
        for p in &mut params[self.w..self.w + self.cout * self.cin * 9] {
            *p = T::c(dist.sample(rng));
        }
        for p in &mut params[self.b..self.b + self.cout] {
            *p = T::zero();
        }
    }

    pub fn forward<T: Scalar>(&self, params: &[T], input: &[T], h: usize, w: usize) -> (Vec<T>, ConvCache<T>) {
        let hw = h * w;
        let k = self.cin * 9;
        let col = ops::im2col3(input, self.cin, h, w);
        let mut out = vec![T::zero(); self.cout * hw];
        for o in 0..self.cout {
            let bias = params[self.b + o];
            out[o * hw..(o + 1) * hw].iter_mut().for_each(|v| *v = bias);
        }
        ops::gemm_acc(&params[self.w..self.w + self.cout * k], &col, &mut out, self.cout, k, hw);
        (out, ConvCache { col })
    }

    /// Accumulates parameter gradients; returns the input gradient when asked.
    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        grads: &mut [T],
        cache: &ConvCache<T>,
        grad_out: &[T],
        h: usize,
        w: usize,
        need_input_grad: bool,
    ) -> Option<Vec<T>> {
        let hw = h * w;
        let k = self.cin * 9;
        ops::gemm_abt_acc(grad_out, &cache.col, &mut grads[self.w..self.w + self.cout * k], self.cout, hw, k);
        for o in 0..self.cout {
            grads[self.b + o] += grad_out[o * hw..(o + 1) * hw].iter().copied().sum::<T>();
        }
        if !need_input_grad {
            return None;
        }
        let mut dcol = vec![T::zero(); k * hw];
        ops::gemm_atb_acc(&params[self.w..self.w + self.cout * k], grad_out, &mut dcol, self.cout, k, hw);
        Some(ops::col2im3(&dcol, self.cin, h, w))
    }
}

/// Fully connected layer, `y = W x + b` with `W` stored `fout x fin`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub fin: usize,
    pub fout: usize,
    w: usize,
    b: usize,
}

impl Linear {
    pub fn new(fin: usize, fout: usize, alloc: &mut ParamAlloc) -> Self {
        let w = alloc.take(fin * fout);
        let b = alloc.take(fout);
        Self { fin, fout, w, b }
    }

    pub fn init<T: Scalar>(&self, params: &mut [T], rng: &mut impl rand::Rng) {
        let bound = (6.0 / self.fin as f64).sqrt();
        let dist = Uniform::new(-bound, bound).unwrap();
        for p in &mut params[self.w..self.w + self.fin * self.fout] {
            *p = T::c(dist.sample(rng));
        }
        for p in &mut params[self.b..self.b + self.fout] {
            *p = T::zero();
        }
    }

    pub fn forward<T: Scalar>(&self, params: &[T], x: &[T]) -> Vec<T> {
        let w = &params[self.w..self.w + self.fin * self.fout];
        (0..self.fout)
            .map(|o| params[self.b + o] + crate::scalar::dot(&w[o * self.fin..(o + 1) * self.fin], x))
            .collect()
    }

    pub fn backward<T: Scalar>(&self, params: &[T], grads: &mut [T], x: &[T], grad_out: &[T]) -> Vec<T> {
        let mut dx = vec![T::zero(); self.fin];
        for o in 0..self.fout {
            let g = grad_out[o];
            if g == T::zero() {
                continue;
            }
            grads[self.b + o] += g;
            let row = self.w + o * self.fin;
            for i in 0..self.fin {
                grads[row + i] += g * x[i];
                dx[i] += g * params[row + i];
            }
        }
        dx
    }
}

/// Weight-normalized linear layer: row `r` of the weight is `g_r * v_r / |v_r|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WnLinear {
    pub fin: usize,
    pub fout: usize,
    v: usize,
    g: usize,
    b: usize,
}

impl WnLinear {
    pub fn new(fin: usize, fout: usize, alloc: &mut ParamAlloc) -> Self {
        let v = alloc.take(fin * fout);
        let g = alloc.take(fout);
        let b = alloc.take(fout);
        Self { fin, fout, v, g, b }
    }

    /// Xavier-normal direction; the gain starts at the row norm so the
    /// effective weight equals `v`.
    pub fn init<T: Scalar>(&self, params: &mut [T], rng: &mut impl rand::Rng) {
        let std = (2.0 / (self.fin + self.fout) as f64).sqrt();
        let dist = Normal::new(0.0, std).unwrap();
        for o in 0..self.fout {
            let row = &mut params[self.v + o * self.fin..self.v + (o + 1) * self.fin];
            for p in row.iter_mut() {
                *p = T::c(dist.sample(rng));
            }
            let norm = crate::scalar::l2_norm(row);
            params[self.g + o] = norm;
            params[self.b + o] = T::zero();
        }
    }

    fn row_norm<T: Scalar>(&self, params: &[T], o: usize) -> T {
        crate::scalar::l2_norm(&params[self.v + o * self.fin..self.v + (o + 1) * self.fin])
    }

    pub fn forward<T: Scalar>(&self, params: &[T], x: &[T]) -> Vec<T> {
        (0..self.fout)
            .map(|o| {
                let v = &params[self.v + o * self.fin..self.v + (o + 1) * self.fin];
                let scale = params[self.g + o] / self.row_norm(params, o);
                params[self.b + o] + scale * crate::scalar::dot(v, x)
            })
            .collect()
    }

    pub fn backward<T: Scalar>(&self, params: &[T], grads: &mut [T], x: &[T], grad_out: &[T]) -> Vec<T> {
        let mut dx = vec![T::zero(); self.fin];
        for o in 0..self.fout {
            let go = grad_out[o];
            if go == T::zero() {
                continue;
            }
            let v = &params[self.v + o * self.fin..self.v + (o + 1) * self.fin];
            let norm = self.row_norm(params, o);
            let g = params[self.g + o];
            let vx = crate::scalar::dot(v, x);
            grads[self.b + o] += go;
            // d(out)/dg = v.x / |v|
            grads[self.g + o] += go * vx / norm;
            // d(out)/dv = g/|v| * (x - (v.x / |v|^2) v)
            let scale = g / norm;
            let proj = vx / (norm * norm);
            for i in 0..self.fin {
                grads[self.v + o * self.fin + i] += go * scale * (x[i] - proj * v[i]);
                dx[i] += go * scale * v[i];
            }
        }
        dx
    }
}

/// Batch normalization over a `batch x dim` matrix. Running statistics are
/// buffers held outside the parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub dim: usize,
    gamma: usize,
    beta: usize,
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct BnStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Scalar> BnStats<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![T::zero(); dim],
            var: vec![T::one(); dim],
        }
    }
}

pub struct BnCache<T> {
    xhat: Vec<Vec<T>>,
    inv_std: Vec<T>,
    batch_stats: bool,
    /// Batch mean and unbiased variance, for the running-stat update.
    pub mean: Vec<T>,
    pub var_unbiased: Vec<T>,
}

impl BatchNorm {
    pub fn new(dim: usize, alloc: &mut ParamAlloc) -> Self {
        let gamma = alloc.take(dim);
        let beta = alloc.take(dim);
        Self { dim, gamma, beta }
    }

    pub fn init<T: Scalar>(&self, params: &mut [T]) {
        for i in 0..self.dim {
            params[self.gamma + i] = T::one();
            params[self.beta + i] = T::zero();
        }
    }

    /// Uses batch statistics when `train` and the batch has at least two
    /// rows; otherwise the running statistics.
    pub fn forward<T: Scalar>(
        &self,
        params: &[T],
        running: &BnStats<T>,
        x: &[Vec<T>],
        train: bool,
    ) -> (Vec<Vec<T>>, BnCache<T>) {
        let n = x.len();
        let batch_stats = train && n >= 2;
        let eps = T::c(BN_EPS);
        let (mean, var) = if batch_stats {
            let nf = T::c(n as f64);
            let mean: Vec<T> = (0..self.dim).map(|j| x.iter().map(|r| r[j]).sum::<T>() / nf).collect();
            let var: Vec<T> = (0..self.dim)
                .map(|j| x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<T>() / nf)
                .collect();
            (mean, var)
        } else {
            (running.mean.clone(), running.var.clone())
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        for row in x {
            let xh: Vec<T> = (0..self.dim).map(|j| (row[j] - mean[j]) * inv_std[j]).collect();
            out.push((0..self.dim).map(|j| params[self.gamma + j] * xh[j] + params[self.beta + j]).collect());
            xhat.push(xh);
        }
        let var_unbiased = if batch_stats {
            let c = T::c(n as f64 / (n as f64 - 1.0));
            var.iter().map(|&v| v * c).collect()
        } else {
            var
        };
        (
            out,
            BnCache {
                xhat,
                inv_std,
                batch_stats,
                mean,
                var_unbiased,
            },
        )
    }

    pub fn update_running<T: Scalar>(&self, running: &mut BnStats<T>, cache: &BnCache<T>) {
        if !cache.batch_stats {
            return;
        }
        let m = T::c(BN_MOMENTUM);
        for j in 0..self.dim {
            running.mean[j] = (T::one() - m) * running.mean[j] + m * cache.mean[j];
            running.var[j] = (T::one() - m) * running.var[j] + m * cache.var_unbiased[j];
        }
    }

    pub fn backward<T: Scalar>(&self, params: &[T], grads: &mut [T], cache: &BnCache<T>, grad_out: &[Vec<T>]) -> Vec<Vec<T>> {
        let n = grad_out.len();
        let mut dx = vec![vec![T::zero(); self.dim]; n];
        for j in 0..self.dim {
            let gamma = params[self.gamma + j];
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for i in 0..n {
                sum_dy += grad_out[i][j];
                sum_dy_xhat += grad_out[i][j] * cache.xhat[i][j];
            }
            grads[self.beta + j] += sum_dy;
            grads[self.gamma + j] += sum_dy_xhat;
            let inv = cache.inv_std[j];
            if cache.batch_stats {
                let nf = T::c(n as f64);
                for i in 0..n {
                    dx[i][j] = gamma * inv / nf * (nf * grad_out[i][j] - sum_dy - cache.xhat[i][j] * sum_dy_xhat);
                }
            } else {
                for i in 0..n {
                    dx[i][j] = gamma * inv * grad_out[i][j];
                }
            }
        }
        dx
    }
}

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::tree::tree_rng;
use crate::label::Label;
use crate::num::Scalar;

/// Per-feature standardization fitted on training rows. Constant features
/// are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Scaler<T> {
    pub fn fit(x: &[Vec<T>]) -> Self {
        let p = x.first().map_or(0, Vec::len);
        let n = T::from_count(x.len().max(1));
        let mut mean = vec![T::zero(); p];
        for row in x {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); p];
        for row in x {
            for j in 0..p {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let scale = var
            .iter()
            .map(|&v| {
                if v > T::zero() {
                    (v / n).sqrt()
                } else {
                    T::one()
                }
            })
            .collect();
        Scaler { mean, scale }
    }

    pub fn apply(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T> {
    pub scaler: Scaler<T>,
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Scalar> LinearModel<T> {
    pub fn margin(&self, row: &[T]) -> T {
        let z = self.scaler.apply(row);
        z.iter()
            .zip(&self.weights)
            .fold(self.bias, |a, (&x, &w)| a + x * w)
    }
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn target<T: Scalar>(l: Label) -> T {
    if l.is_malware() {
        T::one()
    } else {
        T::zero()
    }
}

/// Mean log-loss plus `l2/2 * |w|^2`, with its gradient `(dw, db)`.
pub fn logistic_loss_grad<T: Scalar>(
    w: &[T],
    b: T,
    x: &[Vec<T>],
    y: &[Label],
    l2: T,
) -> (T, Vec<T>, T) {
    let n = T::from_count(x.len().max(1));
    let mut loss = T::zero();
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = T::zero();
    for (row, &l) in x.iter().zip(y) {
        let z = row.iter().zip(w).fold(b, |a, (&xi, &wi)| a + xi * wi);
        let t = target::<T>(l);
        // -t ln σ(z) - (1-t) ln(1-σ(z)) = softplus(z) - t z
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, &xi) in gw.iter_mut().zip(row) {
            *g += r * xi;
        }
        gb += r;
    }
    let half = T::lit(0.5);
    loss = loss / n + half * l2 * w.iter().fold(T::zero(), |a, &v| a + v * v);
    for (g, &wi) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wi;
    }
    (loss, gw, gb / n)
}

pub(crate) fn fit_logistic<T: Scalar>(
    x: &[Vec<T>],
    y: &[Label],
    lr: T,
    epochs: usize,
    l2: T,
) -> LinearModel<T> {
    let scaler = Scaler::fit(x);
    let z: Vec<Vec<T>> = x.iter().map(|r| scaler.apply(r)).collect();
    let p = scaler.mean.len();
    let mut w = vec![T::zero(); p];
    let mut b = T::zero();
    for _ in 0..epochs {
        let (_, gw, gb) = logistic_loss_grad(&w, b, &z, y, l2);
        for (wi, g) in w.iter_mut().zip(gw) {
            *wi -= lr * g;
        }
        b -= lr * gb;
    }
    LinearModel {
        scaler,
        weights: w,
        bias: b,
    }
}

/// Dual coordinate descent on the hinge loss, minimising
/// `|w|^2 / 2 + C * sum(max(0, 1 - y_i w.x_i))`. The bias is an extra
/// constant feature. `epochs` caps the number of passes; rows are visited
/// in a seeded shuffle and the loop stops once the projected gradient
/// spread falls below `1e-6`.
pub(crate) fn fit_svm<T: Scalar>(
    x: &[Vec<T>],
    y: &[Label],
    c: T,
    epochs: usize,
    seed: u64,
) -> LinearModel<T> {
    let scaler = Scaler::fit(x);
    let z: Vec<Vec<T>> = x.iter().map(|r| scaler.apply(r)).collect();
    let p = scaler.mean.len();
    let n = z.len();
    let sign = |l: Label| if l.is_malware() { T::one() } else { -T::one() };
    let diag: Vec<T> = z
        .iter()
        .map(|r| r.iter().fold(T::one(), |a, &v| a + v * v))
        .collect();
    let mut alpha = vec![T::zero(); n];
    let mut w = vec![T::zero(); p + 1];
    let mut rng = tree_rng(seed, 0);
    let mut order: Vec<usize> = (0..n).collect();
    let tol = T::lit(1e-6);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (T::neg_infinity(), T::infinity());
        for &i in &order {
            let yi = sign(y[i]);
            let m = z[i].iter().zip(&w).fold(w[p], |a, (&xi, &wi)| a + xi * wi);
            let g = yi * m - T::one();
            let pg = if alpha[i] <= T::zero() {
                g.min(T::zero())
            } else if alpha[i] >= c {
                g.max(T::zero())
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != T::zero() {
                let old = alpha[i];
                alpha[i] = (old - g / diag[i]).max(T::zero()).min(c);
                let step = (alpha[i] - old) * yi;
                for (wj, &xj) in w.iter_mut().zip(&z[i]) {
                    *wj += step * xj;
                }
                w[p] += step;
            }
        }
        if pg_max - pg_min < tol {
            break;
        }
    }
    let bias = w.pop().unwrap_or_else(T::zero);
    LinearModel {
        scaler,
        weights: w,
        bias,
    }
}

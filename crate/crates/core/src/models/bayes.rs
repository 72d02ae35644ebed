use serde::{Deserialize, Serialize};

use crate::label::{class_counts, Label};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NaiveBayes<T> {
    /// Presence model: `log_p[j][c] = ln P(x_j > 0 | c)`.
    Bernoulli {
        log_prior: [T; 2],
        log_p: Vec<[T; 2]>,
        log_q: Vec<[T; 2]>,
    },
    Gaussian {
        log_prior: [T; 2],
        mean: Vec<[T; 2]>,
        var: Vec<[T; 2]>,
    },
}

impl<T: Scalar> NaiveBayes<T> {
    pub fn fit_bernoulli(x: &[Vec<T>], y: &[Label], alpha: T) -> Self {
        let counts = class_counts(y);
        let p = x.first().map_or(0, Vec::len);
        let mut present = vec![[0usize; 2]; p];
        for (row, l) in x.iter().zip(y) {
            for (j, &v) in row.iter().enumerate() {
                if v > T::zero() {
                    present[j][l.index()] += 1;
                }
            }
        }
        let two = T::lit(2.0);
        let mut log_p = Vec::with_capacity(p);
        let mut log_q = Vec::with_capacity(p);
        for pr in &present {
            let mut lp = [T::zero(); 2];
            let mut lq = [T::zero(); 2];
            for c in 0..2 {
                let prob =
                    (T::from_count(pr[c]) + alpha) / (T::from_count(counts[c]) + two * alpha);
                lp[c] = prob.ln();
                lq[c] = (T::one() - prob).ln();
            }
            log_p.push(lp);
            log_q.push(lq);
        }
        NaiveBayes::Bernoulli {
            log_prior: log_prior(counts),
            log_p,
            log_q,
        }
    }

    /// Class variances get `1e-9` times the largest feature variance added.
    pub fn fit_gaussian(x: &[Vec<T>], y: &[Label]) -> Self {
        let counts = class_counts(y);
        let p = x.first().map_or(0, Vec::len);
        let mut mean = vec![[T::zero(); 2]; p];
        for (row, l) in x.iter().zip(y) {
            for (j, &v) in row.iter().enumerate() {
                mean[j][l.index()] += v;
            }
        }
        for m in mean.iter_mut() {
            for c in 0..2 {
                m[c] /= T::from_count(counts[c].max(1));
            }
        }
        let mut var = vec![[T::zero(); 2]; p];
        for (row, l) in x.iter().zip(y) {
            for (j, &v) in row.iter().enumerate() {
                let d = v - mean[j][l.index()];
                var[j][l.index()] += d * d;
            }
        }
        let mut max_var = T::zero();
        for v in var.iter_mut() {
            for c in 0..2 {
                v[c] /= T::from_count(counts[c].max(1));
                max_var = max_var.max(v[c]);
            }
        }
        let eps = T::lit(1e-9) * max_var.max(T::one());
        for v in var.iter_mut() {
            for c in v.iter_mut() {
                *c += eps;
            }
        }
        NaiveBayes::Gaussian {
            log_prior: log_prior(counts),
            mean,
            var,
        }
    }

    /// Unnormalized log joint per class.
    pub fn log_joint(&self, row: &[T]) -> [T; 2] {
        match self {
            NaiveBayes::Bernoulli {
                log_prior,
                log_p,
                log_q,
            } => {
                let mut out = *log_prior;
                for (j, &v) in row.iter().enumerate() {
                    let t = if v > T::zero() { &log_p[j] } else { &log_q[j] };
                    out[0] += t[0];
                    out[1] += t[1];
                }
                out
            }
            NaiveBayes::Gaussian {
                log_prior,
                mean,
                var,
            } => {
                let mut out = *log_prior;
                let tau = T::lit(2.0) * T::PI();
                for (j, &v) in row.iter().enumerate() {
                    for c in 0..2 {
                        let d = v - mean[j][c];
                        out[c] -= T::lit(0.5) * (tau * var[j][c]).ln()
                            + d * d / (T::lit(2.0) * var[j][c]);
                    }
                }
                out
            }
        }
    }

    /// `[P(benign | x), P(malware | x)]`.
    pub fn posterior(&self, row: &[T]) -> [T; 2] {
        let lj = self.log_joint(row);
        let m = lj[0].max(lj[1]);
        let e = [(lj[0] - m).exp(), (lj[1] - m).exp()];
        let z = e[0] + e[1];
        [e[0] / z, e[1] / z]
    }
}

fn log_prior<T: Scalar>(counts: [usize; 2]) -> [T; 2] {
    let n = T::from_count(counts[0] + counts[1]);
    [
        (T::from_count(counts[0]) / n).ln(),
        (T::from_count(counts[1]) / n).ln(),
    ]
}

use serde::{Deserialize, Serialize};

use super::Metric;
use crate::label::Label;
use crate::num::{total_cmp, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel<T> {
    pub k: usize,
    pub metric: Metric,
    /// Training rows in app-id order.
    pub rows: Vec<Vec<T>>,
    pub labels: Vec<Label>,
}

impl<T: Scalar> KnnModel<T> {
    fn distance(&self, a: &[T], b: &[T]) -> T {
        match self.metric {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y))
                .sqrt(),
            Metric::Manhattan => a
                .iter()
                .zip(b)
                .fold(T::zero(), |s, (&x, &y)| s + (x - y).abs()),
        }
    }

    /// Malware fraction among the `k` nearest rows; equal distances are
    /// ordered by app id.
    pub fn score(&self, q: &[T]) -> T {
        let mut d: Vec<(T, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (self.distance(q, r), i))
            .collect();
        d.sort_by(|a, b| total_cmp(a.0, b.0).then(a.1.cmp(&b.1)));
        let k = self.k.min(d.len()).max(1);
        let mal = d
            .iter()
            .take(k)
            .filter(|(_, i)| self.labels[*i].is_malware())
            .count();
        T::from_count(mal) / T::from_count(k)
    }
}

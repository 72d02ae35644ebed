use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Criterion;
use crate::label::Label;
use crate::num::{total_cmp, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    Leaf {
        score: T,
        n: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    /// Fraction of malware training rows in the reached leaf.
    pub fn score(&self, x: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { score, .. } => return *score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

pub(crate) struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub criterion: Criterion,
    /// Features examined per split; `None` means all, in index order.
    pub features_per_split: Option<usize>,
}

fn impurity<T: Scalar>(c: [usize; 2], crit: Criterion) -> T {
    let n = c[0] + c[1];
    if n == 0 {
        return T::zero();
    }
    let p = [
        T::from_count(c[0]) / T::from_count(n),
        T::from_count(c[1]) / T::from_count(n),
    ];
    match crit {
        Criterion::Gini => T::one() - p[0] * p[0] - p[1] * p[1],
        Criterion::Entropy => -p
            .iter()
            .filter(|&&q| q > T::zero())
            .fold(T::zero(), |a, &q| a + q * q.ln()),
    }
}

/// Midpoint that is guaranteed to separate `a < b`.
fn midpoint<T: Scalar>(a: T, b: T) -> T {
    let m = a + (b - a) / T::lit(2.0);
    if m >= b || m < a {
        a
    } else {
        m
    }
}

struct Builder<'a, T> {
    x: &'a [Vec<T>],
    y: &'a [Label],
    cfg: &'a TreeConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Builder<'_, T> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let m = idx.iter().filter(|&&i| self.y[i].is_malware()).count();
        [idx.len() - m, m]
    }

    fn leaf(&mut self, c: [usize; 2]) -> usize {
        let n = c[0] + c[1];
        let score = if n == 0 {
            T::zero()
        } else {
            T::from_count(c[1]) / T::from_count(n)
        };
        self.nodes.push(Node::Leaf { score, n });
        self.nodes.len() - 1
    }

    fn candidate_features(&mut self, p: usize) -> Vec<usize> {
        match self.cfg.features_per_split {
            Some(m) if m < p => {
                let mut f = sample(&mut self.rng, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    /// Best `(feature, threshold)`; a later candidate must be strictly
    /// better to replace the current one.
    fn best_split(&mut self, idx: &mut [usize], parent: [usize; 2]) -> Option<(usize, T)> {
        let p = self.x.first().map_or(0, Vec::len);
        let crit = self.cfg.criterion;
        let min_leaf = self.cfg.min_leaf.max(1);
        let n = idx.len();
        let parent_imp: T = impurity(parent, crit);
        let mut best: Option<(T, usize, T)> = None;
        for f in self.candidate_features(p) {
            idx.sort_by(|&a, &b| total_cmp(self.x[a][f], self.x[b][f]).then(a.cmp(&b)));
            let mut left = [0usize; 2];
            for k in 0..n - 1 {
                left[self.y[idx[k]].index()] += 1;
                let (a, b) = (self.x[idx[k]][f], self.x[idx[k + 1]][f]);
                if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less)
                    || k + 1 < min_leaf
                    || n - k - 1 < min_leaf
                {
                    continue;
                }
                let right = [parent[0] - left[0], parent[1] - left[1]];
                let wl = T::from_count(k + 1) / T::from_count(n);
                let wr = T::from_count(n - k - 1) / T::from_count(n);
                let gain = parent_imp - wl * impurity(left, crit) - wr * impurity(right, crit);
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, midpoint(a, b)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let c = self.counts(idx);
        let stop = c[0] == 0
            || c[1] == 0
            || self.cfg.max_depth.is_some_and(|d| depth >= d)
            || idx.len() < 2 * self.cfg.min_leaf.max(1);
        if stop {
            return self.leaf(c);
        }
        let Some((feature, threshold)) = self.best_split(idx, c) else {
            return self.leaf(c);
        };
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            score: T::zero(),
            n: 0,
        });
        let mut l: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| self.x[i][feature] <= threshold)
            .collect();
        let mut r: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| self.x[i][feature] > threshold)
            .collect();
        let left = self.build(&mut l, depth + 1);
        let right = self.build(&mut r, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

pub(crate) fn fit_tree<T: Scalar>(
    x: &[Vec<T>],
    y: &[Label],
    rows: &[usize],
    cfg: &TreeConfig,
    rng: ChaCha8Rng,
) -> Tree<T> {
    let mut b = Builder {
        x,
        y,
        cfg,
        rng,
        nodes: Vec::new(),
    };
    let mut idx = rows.to_vec();
    if idx.is_empty() {
        b.leaf([0, 0]);
    } else {
        b.build(&mut idx, 0);
    }
    Tree { nodes: b.nodes }
}

/// Per-tree generator: stream `tree` of the seed.
pub(crate) fn tree_rng(seed: u64, tree: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(tree);
    r
}

pub(crate) fn fit_forest<T: Scalar>(
    x: &[Vec<T>],
    y: &[Label],
    cfg: &TreeConfig,
    n_trees: usize,
    bootstrap: bool,
    seed: u64,
) -> Vec<Tree<T>> {
    let n = x.len();
    (0..n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let rows: Vec<usize> = if bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree(x, y, &rows, cfg, rng)
        })
        .collect()
}

//! Brute-force reference implementations shared by the integration and
//! acceptance tests. Everything here works on dense rows and booleans and
//! recounts from scratch instead of reusing library helpers.
#![allow(dead_code)]

/// Rows of 0/1 values; `y[i]` is true for malware.
#[derive(Debug, Clone)]
pub struct Dense {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<bool>,
}

impl Dense {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|r| r[j]).collect()
    }
}

fn count(pairs: &[(f64, bool)], x: f64, y: bool) -> f64 {
    pairs.iter().filter(|&&(a, b)| a == x && b == y).count() as f64
}

fn pairs(col: &[f64], y: &[bool]) -> Vec<(f64, bool)> {
    col.iter().copied().zip(y.iter().copied()).collect()
}

fn distinct(col: &[f64]) -> Vec<f64> {
    let mut v = col.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

fn entropy(probs: impl Iterator<Item = f64>) -> f64 {
    probs.filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

/// I(X;Y) = H(X) + H(Y) - H(X,Y) over the empirical joint distribution.
pub fn mutual_information(col: &[f64], y: &[bool]) -> f64 {
    let n = col.len() as f64;
    let p = pairs(col, y);
    let xs = distinct(col);
    let hx = entropy(
        xs.iter()
            .map(|&x| col.iter().filter(|&&v| v == x).count() as f64 / n),
    );
    let hy = entropy(
        [true, false]
            .iter()
            .map(|&c| y.iter().filter(|&&v| v == c).count() as f64 / n),
    );
    let hxy = entropy(
        xs.iter()
            .flat_map(|&x| [true, false].map(|c| count(&p, x, c) / n)),
    );
    (hx + hy - hxy).max(0.0)
}

pub fn chi_square(col: &[f64], y: &[bool]) -> f64 {
    let n = col.len() as f64;
    let p = pairs(col, y);
    let mut chi = 0.0;
    for x in distinct(col) {
        for c in [true, false] {
            let row = col.iter().filter(|&&v| v == x).count() as f64;
            let class = y.iter().filter(|&&v| v == c).count() as f64;
            let e = row * class / n;
            if e > 0.0 {
                chi += (count(&p, x, c) - e).powi(2) / e;
            }
        }
    }
    chi
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pearson(col: &[f64], y: &[bool]) -> f64 {
    let t: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let (mx, my) = (mean(col), mean(&t));
    let sxy: f64 = col.iter().zip(&t).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = col.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = t.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Population variance.
pub fn variance(col: &[f64]) -> f64 {
    let m = mean(col);
    col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64
}

/// |Welch t|; a zero standard error gives 0 for equal means and
/// `f64::MAX` otherwise.
pub fn welch_t(col: &[f64], y: &[bool]) -> f64 {
    let split = |c: bool| -> Vec<f64> {
        col.iter()
            .zip(y)
            .filter(|(_, &b)| b == c)
            .map(|(v, _)| *v)
            .collect()
    };
    let (a, b) = (split(false), split(true));
    let var = |s: &[f64]| {
        let m = mean(s);
        s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (s.len() as f64 - 1.0)
    };
    let se = (var(&a) / a.len() as f64 + var(&b) / b.len() as f64).sqrt();
    let diff = (mean(&b) - mean(&a)).abs();
    if se > 0.0 {
        diff / se
    } else if diff > 0.0 {
        f64::MAX
    } else {
        0.0
    }
}

/// Malware share of the column's total occurrences.
pub fn wfs(col: &[f64], y: &[bool]) -> f64 {
    let mal: f64 = col.iter().zip(y).filter(|(_, &b)| b).map(|(v, _)| v).sum();
    let total: f64 = col.iter().sum();
    if total > 0.0 {
        mal / total
    } else {
        0.0
    }
}

/// The five rates straight from their defining ratios, 0 for 0/0.
/// Order: accuracy, precision, f1, tpr, tnr.
pub fn rates(tp: u64, fp: u64, tn: u64, fn_: u64) -> [f64; 5] {
    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    [
        div(tp + tn, tp + tn + fp + fn_),
        div(tp, tp + fp),
        div(2 * tp, 2 * tp + fp + fn_),
        div(tp, tp + fn_),
        div(tn, fp + tn),
    ]
}

/// Kruskal-Wallis H with average ranks and tie correction.
pub fn kruskal_h(groups: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let rank = |v: f64| {
        let below = all.iter().filter(|&&w| w < v).count() as f64;
        let equal = all.iter().filter(|&&w| w == v).count() as f64;
        below + (equal + 1.0) / 2.0
    };
    let s: f64 = groups
        .iter()
        .map(|g| {
            let r: f64 = g.iter().map(|&v| rank(v)).sum();
            r * r / g.len() as f64
        })
        .sum();
    let h = 12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0);
    let ties: f64 = distinct(&all)
        .iter()
        .map(|&v| {
            let t = all.iter().filter(|&&w| w == v).count() as f64;
            t * t * t - t
        })
        .sum();
    let c = 1.0 - ties / (n * n * n - n);
    if c <= 0.0 {
        0.0
    } else {
        h / c
    }
}

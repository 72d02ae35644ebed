use std::fmt::Write as _;

use super::vocab::{ValueKind, Vocabulary};
use super::EncodingError;
use crate::num::Scalar;
use crate::report::AppId;

/// Sparse row-major matrix; absent cells are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    vocab: Vocabulary,
    row_ids: Vec<AppId>,
    /// `(row, col, value)` sorted by row then column, no zeros.
    cells: Vec<(usize, usize, T)>,
    /// `row_start[r]..row_start[r + 1]` indexes the cells of row `r`.
    row_start: Vec<usize>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(
        vocab: Vocabulary,
        row_ids: Vec<AppId>,
        mut cells: Vec<(usize, usize, T)>,
    ) -> Result<Self, EncodingError> {
        let n_rows = row_ids.len();
        let mut ids = row_ids.clone();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(EncodingError::DuplicateRow(w[0].to_string()));
        }
        cells.retain(|c| c.2 != T::zero());
        cells.sort_by_key(|a| (a.0, a.1));
        for w in cells.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(EncodingError::InvalidCell {
                    row: w[0].0,
                    col: w[0].1,
                });
            }
        }
        for &(r, c, v) in &cells {
            let ok = r < n_rows
                && c < vocab.len()
                && v.is_finite()
                && match vocab.kind() {
                    ValueKind::Binary => v == T::one(),
                    ValueKind::Count => v > T::zero() && v.fract() == T::zero(),
                    ValueKind::Numeric => true,
                };
            if !ok {
                return Err(EncodingError::InvalidCell { row: r, col: c });
            }
        }
        let mut row_start = vec![0; n_rows + 1];
        for &(r, _, _) in &cells {
            row_start[r + 1] += 1;
        }
        for r in 0..n_rows {
            row_start[r + 1] += row_start[r];
        }
        Ok(FeatureMatrix {
            vocab,
            row_ids,
            cells,
            row_start,
        })
    }

    pub fn from_dense(
        vocab: Vocabulary,
        row_ids: Vec<AppId>,
        rows: &[Vec<T>],
    ) -> Result<Self, EncodingError> {
        let mut cells = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != vocab.len() {
                return Err(EncodingError::InvalidCell {
                    row: r,
                    col: row.len(),
                });
            }
            cells.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != T::zero())
                    .map(|(c, &v)| (r, c, v)),
            );
        }
        if rows.len() != row_ids.len() {
            return Err(EncodingError::InvalidCell {
                row: rows.len(),
                col: 0,
            });
        }
        FeatureMatrix::new(vocab, row_ids, cells)
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn kind(&self) -> ValueKind {
        self.vocab.kind()
    }

    pub fn row_ids(&self) -> &[AppId] {
        &self.row_ids
    }

    pub fn cells(&self) -> &[(usize, usize, T)] {
        &self.cells
    }

    pub fn row(&self, r: usize) -> &[(usize, usize, T)] {
        &self.cells[self.row_start[r]..self.row_start[r + 1]]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let row = self.row(r);
        row.binary_search_by_key(&c, |x| x.1)
            .map_or(T::zero(), |i| row[i].2)
    }

    pub fn dense_row(&self, r: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_cols()];
        for &(_, c, v) in self.row(r) {
            out[c] = v;
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n_rows()).map(|r| self.dense_row(r)).collect()
    }

    /// Dense columns, `out[col][row]`.
    pub fn columns(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.n_rows()]; self.n_cols()];
        for &(r, c, v) in &self.cells {
            out[c][r] = v;
        }
        out
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self, EncodingError> {
        let vocab = self.vocab.select(cols)?;
        let mut map = vec![usize::MAX; self.n_cols()];
        for (new, &old) in cols.iter().enumerate() {
            map[old] = new;
        }
        let cells = self
            .cells
            .iter()
            .filter(|c| map[c.1] != usize::MAX)
            .map(|&(r, c, v)| (r, map[c], v))
            .collect();
        FeatureMatrix::new(vocab, self.row_ids.clone(), cells)
    }

    /// Rows in the given order (indices must be distinct).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, EncodingError> {
        let mut cells = Vec::new();
        for (new, &old) in rows.iter().enumerate() {
            cells.extend(self.row(old).iter().map(|&(_, c, v)| (new, c, v)));
        }
        FeatureMatrix::new(
            self.vocab.clone(),
            rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            cells,
        )
    }

    /// Row permutation that sorts rows by app id.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_rows()).collect();
        idx.sort_by(|&a, &b| self.row_ids[a].cmp(&self.row_ids[b]));
        idx
    }

    /// Rows reordered to follow `ids`; every id must be present.
    pub fn align_rows(&self, ids: &[AppId]) -> Result<Self, EncodingError> {
        let pos: std::collections::HashMap<&AppId, usize> = self
            .row_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect();
        let rows = ids
            .iter()
            .map(|id| {
                pos.get(id)
                    .copied()
                    .ok_or_else(|| EncodingError::RowMismatch(id.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.select_rows(&rows)
    }

    /// Prefixes every column name with `tag:`.
    pub fn with_tag(&self, tag: &str) -> Result<Self, EncodingError> {
        let names = self
            .vocab
            .names()
            .iter()
            .map(|n| format!("{tag}:{n}"))
            .collect();
        Ok(FeatureMatrix {
            vocab: Vocabulary::new(names, self.kind())?,
            ..self.clone()
        })
    }

    /// Same cells over a vocabulary of a different kind (values must fit it).
    pub fn with_kind(&self, kind: ValueKind) -> Result<Self, EncodingError> {
        FeatureMatrix::new(
            self.vocab.with_kind(kind),
            self.row_ids.clone(),
            self.cells.clone(),
        )
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMatrix<U> {
        FeatureMatrix {
            vocab: self.vocab.clone(),
            row_ids: self.row_ids.clone(),
            cells: self
                .cells
                .iter()
                .map(|&(r, c, v)| (r, c, U::lit(v.as_f64())))
                .collect(),
            row_start: self.row_start.clone(),
        }
    }

    /// Text form: `#vocab <n> <kind>`, names, `row col value` triples,
    /// `#rows`, app ids.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "#vocab {} {}", self.n_cols(), self.kind());
        for n in self.vocab.names() {
            let _ = writeln!(s, "{n}");
        }
        for &(r, c, v) in &self.cells {
            match self.kind() {
                ValueKind::Numeric => {
                    let _ = writeln!(s, "{r} {c} {v}");
                }
                _ => {
                    let _ = writeln!(s, "{r} {c} {}", v.as_f64() as u64);
                }
            }
        }
        s.push_str("#rows\n");
        for id in &self.row_ids {
            let _ = writeln!(s, "{id}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, EncodingError> {
        let bad = |line: usize| EncodingError::MalformedMatrixFile { line };
        let lines: Vec<&str> = text.lines().collect();
        let header = lines.first().ok_or(bad(1))?;
        let mut parts = header.split(' ');
        if parts.next() != Some("#vocab") {
            return Err(bad(1));
        }
        let n: usize = parts.next().and_then(|x| x.parse().ok()).ok_or(bad(1))?;
        let kind: ValueKind = parts.next().and_then(|x| x.parse().ok()).ok_or(bad(1))?;
        if parts.next().is_some() || lines.len() < n + 1 {
            return Err(bad(1));
        }
        let names: Vec<String> = lines[1..=n].iter().map(|s| s.to_string()).collect();
        let vocab = Vocabulary::new(names, kind).map_err(|_| bad(1))?;
        let mut cells = Vec::new();
        let mut i = n + 1;
        while i < lines.len() && lines[i] != "#rows" {
            let f: Vec<&str> = lines[i].split(' ').collect();
            if f.len() != 3 {
                return Err(bad(i + 1));
            }
            let r = f[0].parse().map_err(|_| bad(i + 1))?;
            let c = f[1].parse().map_err(|_| bad(i + 1))?;
            let v = f[2].parse::<T>().map_err(|_| bad(i + 1))?;
            cells.push((r, c, v));
            i += 1;
        }
        if i == lines.len() {
            return Err(bad(i + 1));
        }
        let row_ids = lines[i + 1..]
            .iter()
            .enumerate()
            .map(|(k, l)| l.parse::<AppId>().map_err(|_| bad(i + 2 + k)))
            .collect::<Result<Vec<_>, _>>()?;
        FeatureMatrix::new(vocab, row_ids, cells).map_err(|e| match e {
            EncodingError::InvalidCell { .. } | EncodingError::DuplicateRow(_) => bad(i + 1),
            other => other,
        })
    }
}

/// Appends the columns of `right` after those of `left`. Rows must carry
/// the same app ids in the same order and names must be disjoint (see
/// [`FeatureMatrix::with_tag`]). Mixed kinds give a numeric matrix.
pub fn concat_matrices<T: Scalar>(
    left: &FeatureMatrix<T>,
    right: &FeatureMatrix<T>,
) -> Result<FeatureMatrix<T>, EncodingError> {
    if let Some(i) = (0..left.n_rows().max(right.n_rows()))
        .find(|&i| left.row_ids.get(i) != right.row_ids.get(i))
    {
        let id = left
            .row_ids
            .get(i)
            .or(right.row_ids.get(i))
            .map(|x| x.to_string())
            .unwrap_or_default();
        return Err(EncodingError::RowMismatch(id));
    }
    let kind = if left.n_cols() == 0 {
        right.kind()
    } else if right.n_cols() == 0 || left.kind() == right.kind() {
        left.kind()
    } else {
        ValueKind::Numeric
    };
    let names: Vec<String> = left
        .vocab
        .names()
        .iter()
        .chain(right.vocab.names())
        .cloned()
        .collect();
    let vocab = Vocabulary::new(names, kind)?;
    let off = left.n_cols();
    let cells = left
        .cells
        .iter()
        .copied()
        .chain(right.cells.iter().map(|&(r, c, v)| (r, c + off, v)))
        .collect();
    FeatureMatrix::new(vocab, left.row_ids.clone(), cells)
}

//! Compressed-row sparse operators and a triplet accumulator for assembly.

use nalgebra::DMatrix;

/// Accumulates `(row, col, value)` contributions; duplicates are summed on
/// conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            ..Default::default()
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        if value != 0.0 {
            self.rows.push(row);
            self.cols.push(col);
            self.vals.push(value);
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Appends another builder shifted by `(row_off, col_off)`.
    pub fn extend_shifted(&mut self, other: &TripletBuilder, row_off: usize, col_off: usize) {
        for ((&r, &c), &v) in other.rows.iter().zip(&other.cols).zip(&other.vals) {
            self.push(r + row_off, c + col_off, v);
        }
    }

    /// Appends the transpose of another builder shifted by `(row_off, col_off)`.
    pub fn extend_transposed(&mut self, other: &TripletBuilder, row_off: usize, col_off: usize) {
        for ((&r, &c), &v) in other.rows.iter().zip(&other.cols).zip(&other.vals) {
            self.push(c + row_off, r + col_off, v);
        }
    }

    pub fn build(&self) -> SparseOperator {
        let mut order: Vec<usize> = (0..self.vals.len()).collect();
        order.sort_unstable_by_key(|&k| (self.rows[k], self.cols[k]));

        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(order.len());
        let mut values: Vec<f64> = Vec::with_capacity(order.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let key = (self.rows[k], self.cols[k]);
            if last == Some(key) {
                *values.last_mut().unwrap() += self.vals[k];
            } else {
                row_ptr[key.0 + 1] += 1;
                col_idx.push(key.1);
                values.push(self.vals[k]);
                last = Some(key);
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut op = SparseOperator {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        };
        op.symmetric = op.n_rows == op.n_cols && op.symmetry_defect() <= 1e-14;
        op
    }
}

/// Square or rectangular operator in compressed-row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = TripletBuilder::new(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                t.push(i, j, m[(i, j)]);
            }
        }
        t.build()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `y = Aᵀ x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
        y
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut t = TripletBuilder::with_capacity(self.n_cols, self.n_rows, self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        t.build()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                if j > i {
                    worst = worst.max((v - self.get(j, i)).abs());
                } else if j < i && self.get(j, i) == 0.0 {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst / scale
    }

    /// Rows whose stored entries are all zero (or that store nothing).
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.n_rows)
            .filter(|&i| self.row(i).all(|(_, v)| v == 0.0))
            .collect()
    }

    /// Half bandwidth `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n_rows)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn to_triplets(&self) -> TripletBuilder {
        let mut t = TripletBuilder::with_capacity(self.n_rows, self.n_cols, self.nnz());
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                t.push(i, j, v);
            }
        }
        t
    }

    /// `Pᵀ A P` for a prolongation `P` (n × m).
    pub fn galerkin_project(&self, p: &SparseOperator) -> SparseOperator {
        assert_eq!(p.n_rows, self.n_cols);
        assert_eq!(self.n_rows, self.n_cols);
        let mut t = TripletBuilder::with_capacity(p.n_cols, p.n_cols, self.nnz());
        for i in 0..self.n_rows {
            for (j, a) in self.row(i) {
                for (ri, pi) in p.row(i) {
                    for (rj, pj) in p.row(j) {
                        t.push(ri, rj, pi * a * pj);
                    }
                }
            }
        }
        t.build()
    }
}

/// Builds the symmetric block operator `[[K, Bᵀ], [B, C]]` (C optional).
pub fn block_saddle(k: &SparseOperator, b: &SparseOperator, c: Option<&SparseOperator>) -> SparseOperator {
    let n = k.n_rows();
    let m = b.n_rows();
    assert_eq!(b.n_cols(), n);
    let mut t = TripletBuilder::with_capacity(n + m, n + m, k.nnz() + 2 * b.nnz());
    t.extend_shifted(&k.to_triplets(), 0, 0);
    let bt = b.to_triplets();
    t.extend_shifted(&bt, n, 0);
    t.extend_transposed(&bt, 0, n);
    if let Some(c) = c {
        t.extend_shifted(&c.to_triplets(), n, n);
    }
    t.build()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

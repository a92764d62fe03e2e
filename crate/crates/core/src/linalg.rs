//! Dense column-major matrices and the handful of kernels the pipeline needs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Error, Result};

/// Dense real matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Wraps column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_err("column-major buffer length", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_err("row-major buffer length", rows * cols, data.len()));
        }
        Ok(Self::from_fn(rows, cols, |i, j| data[i * cols + j]))
    }

    /// Stacks equal-length vectors as columns.
    pub fn from_columns<C: AsRef<[f64]>>(rows: usize, columns: &[C]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(dim_err("column length", rows, c.len()));
            }
            data.extend_from_slice(c);
        }
        Ok(Self { rows, cols: columns.len(), data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.cols).map(move |j| self.col(j))
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(dim_err("vector length for A x", self.cols, x.len()));
        }
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        Ok(out)
    }

    /// `out = A x`; lengths are the caller's responsibility.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.col(j), out);
            }
        }
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(dim_err("vector length for Aᵀ y", self.rows, y.len()));
        }
        let mut out = vec![0.0; self.cols];
        self.tr_mul_vec_into(y, &mut out);
        Ok(out)
    }

    pub fn tr_mul_vec_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(self.col(j), y);
        }
    }

    /// `A B`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(dim_err("inner dimension of A B", self.cols, other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in other.col(j).iter().enumerate() {
                if b != 0.0 {
                    axpy(b, &self.data[k * self.rows..(k + 1) * self.rows], dst);
                }
            }
        }
        Ok(out)
    }

    /// `A Aᵀ`, symmetric `rows × rows`.
    pub fn outer_gram(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.rows);
        for k in 0..self.cols {
            let c = self.col(k);
            for j in 0..self.rows {
                let cj = c[j];
                if cj == 0.0 {
                    continue;
                }
                let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
                axpy(cj, c, dst);
            }
        }
        out
    }

    /// `A diag(w) Aᵀ`, `rows × rows`.
    pub fn weighted_outer_gram(&self, w: &[f64]) -> Result<Matrix> {
        if w.len() != self.cols {
            return Err(dim_err("weight length", self.cols, w.len()));
        }
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        // rank-4 updates of the lower triangle
        let mut blocks = w.chunks(4).enumerate();
        for (b, ws) in &mut blocks {
            let cols: Vec<&[f64]> = (0..ws.len()).map(|t| self.col(4 * b + t)).collect();
            for j in 0..n {
                let dst = &mut out.data[j * n + j..(j + 1) * n];
                match ws.len() {
                    4 => {
                        let len = dst.len();
                        let (c0, c1, c2, c3) =
                            (&cols[0][j..], &cols[1][j..], &cols[2][j..], &cols[3][j..]);
                        let (a0, a1, a2, a3) = (ws[0] * c0[0], ws[1] * c1[0], ws[2] * c2[0], ws[3] * c3[0]);
                        let (c0, c1, c2, c3) = (&c0[..len], &c1[..len], &c2[..len], &c3[..len]);
                        for i in 0..len {
                            dst[i] += a0 * c0[i] + a1 * c1[i] + a2 * c2[i] + a3 * c3[i];
                        }
                    }
                    _ => {
                        for (t, c) in cols.iter().enumerate() {
                            axpy(ws[t] * c[j], &c[j..], dst);
                        }
                    }
                }
            }
        }
        for j in 0..n {
            for i in 0..j {
                out.data[j * n + i] = out.data[i * n + j];
            }
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// `y += alpha x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Cholesky factor `A = L Lᵀ` of a symmetric positive definite matrix.
///
/// Stored as `Lᵀ` in column-major order so that rows of `L` are contiguous.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lt: Matrix,
}

impl Cholesky {
    /// Factors `a`, reading only its lower triangle.
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(dim_err("square matrix for Cholesky", n, a.cols()));
        }
        let mut lt = Matrix::zeros(n, n);
        for j in 0..n {
            let (head, tail) = lt.data.split_at_mut((j + 1) * n);
            let row_j = &mut head[j * n..];
            let diag = a.get(j, j) - dot(&row_j[..j], &row_j[..j]);
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = libm::sqrt(diag);
            row_j[j] = ljj;
            for i in j + 1..n {
                let row_i = &mut tail[(i - j - 1) * n..(i - j) * n];
                row_i[j] = (a.get(i, j) - dot(&row_i[..j], &row_j[..j])) / ljj;
            }
        }
        Ok(Self { lt })
    }

    pub fn dim(&self) -> usize {
        self.lt.rows()
    }

    /// `max Lᵢᵢ / min Lᵢᵢ`, a cheap lower bound on `sqrt(cond(A))`.
    pub fn diag_ratio(&self) -> f64 {
        let n = self.dim();
        let (lo, hi) = (0..n).map(|i| self.lt.get(i, i)).fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if n == 0 {
            1.0
        } else {
            hi / lo
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        // L z = b
        for i in 0..n {
            let row = self.lt.col(i);
            b[i] = (b[i] - dot(&row[..i], &b[..i])) / row[i];
        }
        // Lᵀ x = z, column by column
        for k in (0..n).rev() {
            let row = self.lt.col(k);
            b[k] /= row[k];
            let xk = b[k];
            axpy(-xk, &row[..k], &mut b[..k]);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Least-squares solve `min ‖A_S c − y‖` over the listed columns of `a`.
///
/// Uses modified Gram–Schmidt with one reorthogonalization pass. Returns
/// `None` when the selected columns are numerically dependent.
pub fn lstsq_columns(a: &Matrix, support: &[usize], y: &[f64]) -> Option<Vec<f64>> {
    let mut qr = IncrementalQr::new(a.rows());
    for &j in support {
        if !qr.push(a.col(j)) {
            return None;
        }
    }
    Some(qr.solve(y))
}

/// Thin QR built one column at a time.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    rows: usize,
    q: Vec<Vec<f64>>,
    // r[j] holds column j of R (length j + 1)
    r: Vec<Vec<f64>>,
}

impl IncrementalQr {
    pub fn new(rows: usize) -> Self {
        Self { rows, q: Vec::new(), r: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Appends a column; returns false (and leaves the factorization
    /// untouched) when it is numerically in the span of the previous ones.
    pub fn push(&mut self, column: &[f64]) -> bool {
        self.push_with_tol(column, 1e-10)
    }

    /// [`push`](Self::push) with the relative size below which the new
    /// direction counts as dependent.
    pub fn push_with_tol(&mut self, column: &[f64], tol: f64) -> bool {
        debug_assert_eq!(column.len(), self.rows);
        let scale = norm2(column);
        if scale == 0.0 {
            return false;
        }
        let mut v = column.to_vec();
        let mut rcol = vec![0.0; self.q.len() + 1];
        for _pass in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let c = dot(qk, &v);
                rcol[k] += c;
                axpy(-c, qk, &mut v);
            }
        }
        let nv = norm2(&v);
        if nv <= tol * scale || nv == 0.0 {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        *rcol.last_mut().unwrap() = nv;
        self.q.push(v);
        self.r.push(rcol);
        true
    }

    /// Residual `y − Q Qᵀ y`.
    pub fn residual(&self, y: &[f64]) -> Vec<f64> {
        let mut r = y.to_vec();
        for _pass in 0..2 {
            for qk in &self.q {
                let c = dot(qk, &r);
                axpy(-c, qk, &mut r);
            }
        }
        r
    }

    /// Coefficients `c` minimizing `‖A c − y‖` for the pushed columns.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let b: Vec<f64> = self.q.iter().map(|qk| dot(qk, y)).collect();
        self.solve_r(&b)
    }

    /// Solves `R x = b`.
    pub fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let k = self.q.len();
        let mut x = b.to_vec();
        for i in (0..k).rev() {
            let mut s = x[i];
            for j in i + 1..k {
                s -= self.r[j][i] * x[j];
            }
            x[i] = s / self.r[i][i];
        }
        x
    }

    /// Solves `Rᵀ u = t`.
    pub fn solve_rt(&self, t: &[f64]) -> Vec<f64> {
        let k = self.q.len();
        let mut u = t.to_vec();
        for i in 0..k {
            let col = &self.r[i];
            u[i] = (u[i] - dot(&col[..i], &u[..i])) / col[i];
        }
        u
    }

    /// `Q u`.
    pub fn q_mul(&self, u: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.rows];
        for (qk, &uk) in self.q.iter().zip(u) {
            axpy(uk, qk, &mut x);
        }
        x
    }

    /// `Q` as a `rows × len` matrix.
    pub fn q_matrix(&self) -> Matrix {
        Matrix::from_columns(self.rows, &self.q).expect("columns have `rows` entries")
    }

    /// Minimum-norm `x` with `Aᵀ x = t`, i.e. `Q R⁻ᵀ t`.
    pub fn min_norm(&self, t: &[f64]) -> Vec<f64> {
        self.q_mul(&self.solve_rt(t))
    }

    /// `(AᵀA)⁻¹ t` as `R⁻¹ R⁻ᵀ t`, without forming `AᵀA`.
    pub fn gram_solve(&self, t: &[f64]) -> Vec<f64> {
        self.solve_r(&self.solve_rt(t))
    }
}

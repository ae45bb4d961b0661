//! Dense matrix storage and the factorizations used by the solvers.
//!
//! Everything here is plain row-major `f64`. The inner loops of the
//! factorizations are written as contiguous slice dot products so the
//! compiler can vectorize them; that is what keeps the dense Cholesky
//! competitive at the 2000x2000 scale used by the factorization benchmark.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FactorError {
    /// A pivot fell below the breakdown threshold.
    #[error("factorization breakdown at pivot {index}")]
    Breakdown { index: usize },
    /// The matrix is not positive definite where it must be.
    #[error("matrix is not positive definite (pivot {index})")]
    NotPositiveDefinite { index: usize },
    #[error("matrix is singular")]
    Singular,
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// xᵀ M x for a square matrix.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(&self.matvec(x), x)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)].abs())
            .fold(0.0, f64::max)
    }

    /// Fraction of exactly-zero entries.
    pub fn zero_fraction(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        let zeros = self.data.iter().filter(|v| **v == 0.0).count();
        zeros as f64 / self.data.len() as f64
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Matrix {
        let k = keep.len();
        let mut out = Matrix::zeros(k, k);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Lower-triangular Cholesky factor L with A = L Lᵀ.
///
/// Row-by-row formulation; the update for entry (i, j) is a single dot of
/// the two finished row prefixes, which are contiguous in memory.
pub fn cholesky_lower(a: &Matrix) -> Result<Matrix, FactorError> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        // split_at keeps the borrow checker happy: rows before i are done.
        let (head, tail) = l.data.split_at_mut(i * n);
        let row_i = &mut tail[..n];
        for j in 0..i {
            let row_j = &head[j * n..j * n + j];
            let s = a[(i, j)] - dot(&row_i[..j], row_j);
            row_i[j] = s / head[j * n + j];
        }
        let s = a[(i, i)] - dot(&row_i[..i], &row_i[..i]);
        if s <= 0.0 {
            return Err(FactorError::NotPositiveDefinite { index: i });
        }
        row_i[i] = s.sqrt();
    }
    Ok(l)
}

/// Cholesky factorization in place (lower triangle of `a` becomes L).
///
/// Same algorithm as [`cholesky_lower`] but without the extra allocation,
/// for the benchmark loop where the factor itself is discarded.
pub fn cholesky_in_place(a: &mut Matrix) -> Result<(), FactorError> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    for i in 0..n {
        let (head, tail) = a.data.split_at_mut(i * n);
        let row_i = &mut tail[..n];
        for j in 0..i {
            let row_j = &head[j * n..j * n + j];
            let s = row_i[j] - dot(&row_i[..j], row_j);
            row_i[j] = s / head[j * n + j];
        }
        let s = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if s <= 0.0 {
            return Err(FactorError::NotPositiveDefinite { index: i });
        }
        row_i[i] = s.sqrt();
    }
    Ok(())
}

/// Unpivoted LDLᵀ of a symmetric (possibly quasidefinite) matrix.
///
/// `l` is unit lower triangular (the unit diagonal is stored explicitly so
/// the triangular solves are uniform); `d` may carry negative entries.
#[derive(Clone, Debug)]
pub struct DenseLdlt {
    l: Matrix,
    d: Vec<f64>,
}

impl DenseLdlt {
    /// Factor `a`. `breakdown` is the absolute pivot threshold.
    pub fn factor(a: &Matrix, breakdown: f64) -> Result<Self, FactorError> {
        assert_eq!(a.rows, a.cols);
        let n = a.rows;
        let mut l = Matrix::identity(n);
        let mut d = vec![0.0; n];
        // s holds the scaled row D·L[i][..i] during the forward solve.
        let mut s = vec![0.0; n];
        for i in 0..n {
            for j in 0..i {
                s[j] = a[(i, j)] - dot(&l.row(j)[..j], &s[..j]);
            }
            let mut di = a[(i, i)];
            for j in 0..i {
                let lij = s[j] / d[j];
                di -= lij * s[j];
                l[(i, j)] = lij;
            }
            if di.abs() < breakdown {
                return Err(FactorError::Breakdown { index: i });
            }
            d[i] = di;
        }
        Ok(Self { l, d })
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn l(&self) -> &Matrix {
        &self.l
    }

    /// Solve A x = b given A = L D Lᵀ.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n {
            x[i] -= dot(&self.l.row(i)[..i], &x[..i]);
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let xi = x[i];
            for j in 0..i {
                x[j] -= self.l[(i, j)] * xi;
            }
        }
    }
}

/// Solve A x = b by LU with partial pivoting. Consumes scratch copies.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, FactorError> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut x = b.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = m[(piv[k], k)].abs();
        for r in (k + 1)..n {
            let v = m[(piv[r], k)].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best < 1e-300 {
            return Err(FactorError::Singular);
        }
        piv.swap(k, p);
        let pk = piv[k];
        let pivot = m[(pk, k)];
        for r in (k + 1)..n {
            let pr = piv[r];
            let factor = m[(pr, k)] / pivot;
            m[(pr, k)] = factor;
            for c in (k + 1)..n {
                m[(pr, c)] -= factor * m[(pk, c)];
            }
            x[pr] -= factor * x[pk];
        }
    }
    let mut out = vec![0.0; n];
    for k in (0..n).rev() {
        let pk = piv[k];
        let mut s = x[pk];
        for c in (k + 1)..n {
            s -= m[(pk, c)] * out[c];
        }
        out[k] = s / m[(pk, k)];
    }
    Ok(out)
}

/// Invert a square matrix by Gauss-Jordan with partial pivoting.
pub fn invert(a: &Matrix) -> Result<Matrix, FactorError> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut inv = Matrix::identity(n);
    for k in 0..n {
        let mut p = k;
        let mut best = m[(k, k)].abs();
        for r in (k + 1)..n {
            let v = m[(r, k)].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best < 1e-300 {
            return Err(FactorError::Singular);
        }
        if p != k {
            for c in 0..n {
                let t = m[(k, c)];
                m[(k, c)] = m[(p, c)];
                m[(p, c)] = t;
                let t = inv[(k, c)];
                inv[(k, c)] = inv[(p, c)];
                inv[(p, c)] = t;
            }
        }
        let pivot = m[(k, k)];
        for c in 0..n {
            m[(k, c)] /= pivot;
            inv[(k, c)] /= pivot;
        }
        for r in 0..n {
            if r == k {
                continue;
            }
            let f = m[(r, k)];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m[(r, c)] -= f * m[(k, c)];
                inv[(r, c)] -= f * inv[(k, c)];
            }
        }
    }
    Ok(inv)
}

/// All eigenvalues of a symmetric matrix by the cyclic Jacobi method,
/// returned in ascending order.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 {
        return vec![];
    }
    let mut m = a.clone();
    // symmetrize defensively so rounding in the caller cannot stall the sweep
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let scale = m.data.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[(i, j)].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Matrix) -> f64 {
    symmetric_eigenvalues(a)[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn cholesky_hand_example() {
        // ((4,2),(2,3)) factors as ((2,0),(1,sqrt 2))
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let l = cholesky_lower(&a).unwrap();
        assert_close(l[(0, 0)], 2.0, 1e-15);
        assert_close(l[(1, 0)], 1.0, 1e-15);
        assert_close(l[(1, 1)], 2.0f64.sqrt(), 1e-15);
        assert_eq!(l[(0, 1)], 0.0);
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky_lower(&Matrix::identity(5)).unwrap();
        assert_eq!(l, Matrix::identity(5));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            cholesky_lower(&a),
            Err(FactorError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn ldlt_solves_quasidefinite() {
        // [[2, 0, 1], [0, 3, 1], [1, 1, -1]] is quasidefinite
        let a = Matrix::from_rows(&[
            vec![2.0, 0.0, 1.0],
            vec![0.0, 3.0, 1.0],
            vec![1.0, 1.0, -1.0],
        ]);
        let f = DenseLdlt::factor(&a, 1e-14).unwrap();
        let b = vec![1.0, 2.0, 3.0];
        let x = f.solve(&b);
        let r = a.matvec(&x);
        for i in 0..3 {
            assert_close(r[i], b[i], 1e-12);
        }
        assert!(f.d()[2] < 0.0);
    }

    #[test]
    fn lu_solve_matches_direct() {
        let a = Matrix::from_rows(&[
            vec![0.0, 2.0, 1.0],
            vec![1.0, -1.0, 0.5],
            vec![3.0, 0.1, -2.0],
        ]);
        let x_true = vec![1.5, -2.0, 0.25];
        let b = a.matvec(&x_true);
        let x = lu_solve(&a, &b).unwrap();
        for i in 0..3 {
            assert_close(x[i], x_true[i], 1e-12);
        }
    }

    #[test]
    fn jacobi_two_by_two() {
        // ((1,2),(2,1)) has eigenvalues -1 and 3
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let e = symmetric_eigenvalues(&a);
        assert_close(e[0], -1.0, 1e-12);
        assert_close(e[1], 3.0, 1e-12);
    }

    #[test]
    fn invert_roundtrip() {
        let a = Matrix::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 4.0],
        ]);
        let inv = invert(&a).unwrap();
        let mut prod = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                let col: Vec<f64> = (0..3).map(|k| inv[(k, j)]).collect();
                prod[(i, j)] = dot(a.row(i), &col);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_close(prod[(i, j)], if i == j { 1.0 } else { 0.0 }, 1e-12);
            }
        }
    }
}

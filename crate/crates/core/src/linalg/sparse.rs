//! Sparse symmetric storage in upper-triangular CSC form.
//!
//! Only the upper triangle (including the diagonal) is stored; the row
//! indices within each column are kept sorted. This is the input format
//! expected by the LDLᵀ factorization.

use super::dense::Matrix;

#[derive(Clone, Debug)]
pub struct SparseSym {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Build from (row, col, value) triplets of the upper triangle.
    /// Triplets with row > col are mirrored; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            let (i, j) = if r <= c { (r, c) } else { (c, r) };
            assert!(j < n, "index out of range");
            cols[j].push((i, v));
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for col in cols.iter_mut() {
            col.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(i, v) in col.iter() {
                if last == Some(i) {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                    last = Some(i);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self { n, col_ptr, row_idx, values }
    }

    /// Upper triangle of a dense symmetric matrix, dropping exact zeros
    /// off the diagonal (the diagonal is always kept).
    pub fn from_dense(a: &Matrix) -> Self {
        assert_eq!(a.rows(), a.cols());
        let n = a.rows();
        let mut triplets = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                let v = a[(i, j)];
                if v != 0.0 || i == j {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &triplets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz_upper(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        self.row_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn col_pattern(&self, j: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// y = A x with the symmetric structure expanded on the fly.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for j in 0..self.n {
            for (i, v) in self.col(j) {
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
    }

    /// Adjacency lists of the symmetric pattern, diagonal excluded.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for j in 0..self.n {
            for i in self.col_pattern(j).iter().copied() {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        adj
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for (i, v) in self.col(j) {
                m[(i, j)] = v;
                if i != j {
                    m[(j, i)] = v;
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_mirror_and_sum() {
        let a = SparseSym::from_triplets(3, &[(2, 0, 1.5), (0, 2, 0.5), (1, 1, 3.0), (0, 0, 1.0), (2, 2, 1.0)]);
        let d = a.to_dense();
        assert_eq!(d[(0, 2)], 2.0);
        assert_eq!(d[(2, 0)], 2.0);
        assert_eq!(d[(1, 1)], 3.0);
    }

    #[test]
    fn dense_roundtrip_and_matvec() {
        let m = Matrix::from_rows(&[
            vec![2.0, 0.0, 1.0],
            vec![0.0, 3.0, 0.0],
            vec![1.0, 0.0, 4.0],
        ]);
        let s = SparseSym::from_dense(&m);
        assert_eq!(s.nnz_upper(), 4);
        let x = vec![1.0, 2.0, 3.0];
        let mut y = vec![0.0; 3];
        s.matvec(&x, &mut y);
        assert_eq!(y, m.matvec(&x));
    }
}

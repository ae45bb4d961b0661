//! KKT systems for the simplex-constrained QP.
//!
//! Each interior-point iteration solves
//!
//! ```text
//! [ Q + W⁻¹Z + δI   e  ] [ dw ]   [ f ]
//! [ eᵀ             -δ  ] [ u  ] = [ g ]
//! ```
//!
//! a symmetric quasidefinite matrix. Only the diagonal of the (1,1)
//! block changes between iterations, so the sparse backend analyzes the
//! pattern once and refactors numerically. Solutions are polished with
//! one step of iterative refinement against the unregularized system.

use crate::linalg::{
    DenseLdlt, FactorError, LdltFactor, Matrix, SparseSym, SymbolicFactor, PIVOT_BREAKDOWN,
};

pub enum KktBackend {
    Dense(DenseKkt),
    Sparse(SparseKkt),
}

/// Outcome of a factorization attempt with pivot-sign information.
pub enum FactorOutcome {
    Ok,
    /// A pivot belonging to the (1,1) block came out non-positive: the
    /// risk matrix is not positive semidefinite.
    IndefiniteBlock,
    Breakdown,
}

impl KktBackend {
    /// Choose storage: sparse when the quadratic block is mostly zeros
    /// (nonzero fraction below 25%), dense otherwise.
    pub fn choose(q: &Matrix, delta_primal: f64, delta_dual: f64) -> Self {
        let nonzero_fraction = 1.0 - q.zero_fraction();
        if nonzero_fraction < 0.25 {
            KktBackend::Sparse(SparseKkt::new(q, delta_primal, delta_dual))
        } else {
            KktBackend::Dense(DenseKkt::new(q, delta_primal, delta_dual))
        }
    }

    pub fn factor(&mut self, barrier_diag: &[f64]) -> FactorOutcome {
        match self {
            KktBackend::Dense(b) => b.factor(barrier_diag),
            KktBackend::Sparse(b) => b.factor(barrier_diag),
        }
    }

    /// Solve for (dw, u) given the stacked right-hand side (f, g).
    pub fn solve(&mut self, f: &[f64], g: f64) -> (Vec<f64>, f64) {
        match self {
            KktBackend::Dense(b) => b.solve(f, g),
            KktBackend::Sparse(b) => b.solve(f, g),
        }
    }

    pub fn factor_nonzeros(&self) -> usize {
        match self {
            KktBackend::Dense(b) => (b.n + 1) * (b.n + 2) / 2,
            KktBackend::Sparse(b) => b.symbolic.factor_nonzeros(),
        }
    }
}

pub struct DenseKkt {
    n: usize,
    q: Matrix,
    delta_primal: f64,
    delta_dual: f64,
    kkt: Matrix,
    factor: Option<DenseLdlt>,
}

impl DenseKkt {
    pub fn new(q: &Matrix, delta_primal: f64, delta_dual: f64) -> Self {
        let n = q.rows();
        let mut kkt = Matrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = q[(i, j)];
            }
            kkt[(i, n)] = 1.0;
            kkt[(n, i)] = 1.0;
        }
        Self { n, q: q.clone(), delta_primal, delta_dual, kkt, factor: None }
    }

    fn factor(&mut self, barrier_diag: &[f64]) -> FactorOutcome {
        let n = self.n;
        for i in 0..n {
            self.kkt[(i, i)] = self.q[(i, i)] + barrier_diag[i] + self.delta_primal;
        }
        self.kkt[(n, n)] = -self.delta_dual;
        match DenseLdlt::factor(&self.kkt, PIVOT_BREAKDOWN) {
            Ok(f) => {
                // leading n pivots belong to the (1,1) block in natural order
                if f.d()[..n].iter().any(|&d| d <= 0.0) {
                    return FactorOutcome::IndefiniteBlock;
                }
                self.factor = Some(f);
                FactorOutcome::Ok
            }
            Err(FactorError::Breakdown { index }) if index < n => FactorOutcome::IndefiniteBlock,
            Err(_) => FactorOutcome::Breakdown,
        }
    }

    fn solve(&mut self, f: &[f64], g: f64) -> (Vec<f64>, f64) {
        let n = self.n;
        let factor = self.factor.as_ref().expect("factor before solve");
        let mut rhs = Vec::with_capacity(n + 1);
        rhs.extend_from_slice(f);
        rhs.push(g);
        let mut x = factor.solve(&rhs);
        // one refinement step against the unregularized system
        let mut resid = self.unregularized_residual(&x, &rhs);
        factor.solve_in_place(&mut resid);
        for i in 0..=n {
            x[i] += resid[i];
        }
        let u = x[n];
        x.truncate(n);
        (x, u)
    }

    fn unregularized_residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut r = vec![0.0; n + 1];
        for i in 0..n {
            // row i of K0: (Q + barrier)·dw + e·u; the barrier part is in kkt
            let mut s = 0.0;
            for j in 0..n {
                let kij = if i == j {
                    self.kkt[(i, i)] - self.delta_primal
                } else {
                    self.kkt[(i, j)]
                };
                s += kij * x[j];
            }
            s += x[n];
            r[i] = rhs[i] - s;
        }
        let sum: f64 = x[..n].iter().sum();
        r[n] = rhs[n] - sum;
        r
    }
}

pub struct SparseKkt {
    n: usize,
    reg: SparseSym,
    plain: SparseSym,
    /// slot of the diagonal entry of column j (last entry in upper CSC)
    diag_slots: Vec<usize>,
    base_diag: Vec<f64>,
    delta_primal: f64,
    symbolic: SymbolicFactor,
    numeric: LdltFactor,
    border_position: usize,
}

impl SparseKkt {
    pub fn new(q: &Matrix, delta_primal: f64, delta_dual: f64) -> Self {
        let n = q.rows();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = q[(i, j)];
                if v != 0.0 || i == j {
                    triplets.push((i, j, v));
                }
            }
            triplets.push((i, n, 1.0));
        }
        triplets.push((n, n, -delta_dual));
        let reg = SparseSym::from_triplets(n + 1, &triplets);
        let mut plain = reg.clone();
        // strip the dual regularization from the refinement target
        let corner_slot = plain.col_pattern(n).len() - 1 + plain_col_start(&plain, n);
        plain.values_mut()[corner_slot] = 0.0;

        let diag_slots: Vec<usize> = (0..=n)
            .map(|j| {
                let start = plain_col_start(&reg, j);
                start + reg.col_pattern(j).len() - 1
            })
            .collect();
        let base_diag: Vec<f64> = (0..n).map(|i| q[(i, i)]).collect();

        let symbolic = SymbolicFactor::analyze(&reg, None);
        let numeric = LdltFactor::new(&symbolic);
        let border_position = symbolic
            .perm()
            .iter()
            .position(|&p| p == n)
            .expect("border index present");
        Self {
            n,
            reg,
            plain,
            diag_slots,
            base_diag,
            delta_primal,
            symbolic,
            numeric,
            border_position,
        }
    }

    fn factor(&mut self, barrier_diag: &[f64]) -> FactorOutcome {
        let n = self.n;
        for i in 0..n {
            let v = self.base_diag[i] + barrier_diag[i];
            self.reg.values_mut()[self.diag_slots[i]] = v + self.delta_primal;
            self.plain.values_mut()[self.diag_slots[i]] = v;
        }
        match self.numeric.refactor(&self.symbolic, &self.reg, PIVOT_BREAKDOWN) {
            Ok(()) => {
                for (k, &d) in self.numeric.d().iter().enumerate() {
                    if k != self.border_position && d <= 0.0 {
                        return FactorOutcome::IndefiniteBlock;
                    }
                }
                FactorOutcome::Ok
            }
            Err(FactorError::Breakdown { index }) if self.symbolic.perm()[index] < n => {
                FactorOutcome::IndefiniteBlock
            }
            Err(_) => FactorOutcome::Breakdown,
        }
    }

    fn solve(&mut self, f: &[f64], g: f64) -> (Vec<f64>, f64) {
        let n = self.n;
        let mut rhs = Vec::with_capacity(n + 1);
        rhs.extend_from_slice(f);
        rhs.push(g);
        let mut x = self.numeric.solve_refined(&self.symbolic, &self.plain, &rhs);
        let u = x[n];
        x.truncate(n);
        (x, u)
    }
}

fn plain_col_start(m: &SparseSym, j: usize) -> usize {
    // col_pattern gives the slice; recover its offset from lengths
    let mut start = 0;
    for c in 0..j {
        start += m.col_pattern(c).len();
    }
    start
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_both(q: &Matrix, d: &[f64], f: &[f64], g: f64) -> ((Vec<f64>, f64), (Vec<f64>, f64)) {
        let mut dense = DenseKkt::new(q, 1e-9, 1e-9);
        assert!(matches!(dense.factor(d), FactorOutcome::Ok));
        let a = dense.solve(f, g);
        let mut sparse = SparseKkt::new(q, 1e-9, 1e-9);
        assert!(matches!(sparse.factor(d), FactorOutcome::Ok));
        let b = sparse.solve(f, g);
        (a, b)
    }

    #[test]
    fn dense_and_sparse_agree() {
        let q = Matrix::from_rows(&[
            vec![2.0, 0.5, 0.0],
            vec![0.5, 3.0, 0.1],
            vec![0.0, 0.1, 1.0],
        ]);
        let d = [0.7, 0.2, 1.3];
        let f = [1.0, -2.0, 0.5];
        let ((dw1, u1), (dw2, u2)) = solve_both(&q, &d, &f, 0.25);
        for i in 0..3 {
            assert!((dw1[i] - dw2[i]).abs() < 1e-9, "{dw1:?} vs {dw2:?}");
        }
        assert!((u1 - u2).abs() < 1e-9);
        // verify against the exact unregularized system
        let sum: f64 = dw1.iter().sum();
        assert!((sum - 0.25).abs() < 1e-10);
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                s += q[(i, j)] * dw1[j];
            }
            s += d[i] * dw1[i] + u1;
            assert!((s - f[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn indefinite_block_detected() {
        let q = Matrix::from_rows(&[vec![2.0, 4.0], vec![4.0, 2.0]]);
        let d = [0.0, 0.0];
        let mut dense = DenseKkt::new(&q, 1e-9, 1e-9);
        assert!(matches!(dense.factor(&d), FactorOutcome::IndefiniteBlock));
    }
}

//! Factorization timing comparison: a large sparse PSD matrix against a
//! smaller dense one. Symbolic analysis and matrix construction are
//! excluded from the timed region; only the numeric factorization is
//! measured, since that is the per-iteration cost inside the solver.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{cholesky_in_place, LdltFactor, Matrix, SparseSym, SymbolicFactor, PIVOT_BREAKDOWN};

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub dense_n: usize,
    pub sparse_n: usize,
    pub sparsity: f64,
    pub reps: usize,
    pub dense_mean_seconds: f64,
    pub sparse_mean_seconds: f64,
    pub sparse_factor_nonzeros: usize,
}

/// Mean wall time over `reps` numeric factorizations of (a) a dense
/// `n_dense`² PSD matrix and (b) a sparse `n_sparse`² PSD matrix with
/// roughly the requested zero fraction, built as L·Lᵀ of a banded random
/// lower factor.
pub fn bench_factorization(
    n_dense: usize,
    n_sparse: usize,
    sparsity: f64,
    reps: usize,
    seed: u64,
) -> BenchReport {
    assert!(n_dense >= 1 && n_sparse >= 1 && reps >= 1);
    assert!(sparsity > 0.0 && sparsity < 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // dense PSD by diagonal dominance (O(n²) to build)
    let dense = {
        let n = n_dense;
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.gen_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        for i in 0..n {
            let row_sum: f64 = m.row(i).iter().map(|v| v.abs()).sum();
            m[(i, i)] = row_sum + 1.0;
        }
        m
    };

    let mut scratch = dense.clone();
    let mut dense_total = 0.0;
    for _ in 0..reps {
        scratch.clone_from(&dense); // reset outside the timed region
        let t0 = Instant::now();
        cholesky_in_place(&mut scratch).expect("diagonally dominant matrix is PD");
        dense_total += t0.elapsed().as_secs_f64();
    }
    let dense_mean = dense_total / reps as f64;

    // banded L so that L·Lᵀ hits the target nonzero fraction
    let sparse = banded_psd(n_sparse, sparsity, &mut rng);
    let symbolic = SymbolicFactor::analyze(&sparse, None);
    let mut numeric = LdltFactor::new(&symbolic);
    let mut sparse_total = 0.0;
    for _ in 0..reps {
        let t0 = Instant::now();
        numeric
            .refactor(&symbolic, &sparse, PIVOT_BREAKDOWN)
            .expect("banded product is PD");
        sparse_total += t0.elapsed().as_secs_f64();
    }
    let sparse_mean = sparse_total / reps as f64;

    BenchReport {
        dense_n: n_dense,
        sparse_n: n_sparse,
        sparsity,
        reps,
        dense_mean_seconds: dense_mean,
        sparse_mean_seconds: sparse_mean,
        sparse_factor_nonzeros: symbolic.factor_nonzeros(),
    }
}

/// PSD matrix with bandwidth 2b where b is sized so the zero fraction is
/// approximately `sparsity`.
fn banded_psd(n: usize, sparsity: f64, rng: &mut ChaCha8Rng) -> SparseSym {
    let nonzero_per_row = ((1.0 - sparsity) * n as f64).max(1.0);
    let half_band = (((nonzero_per_row - 1.0) / 4.0).round() as usize).max(1);
    // lower banded factor
    let mut l_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half_band);
        let mut row: Vec<(usize, f64)> = (lo..i).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
        row.push((i, rng.gen_range(1.0..2.0) + half_band as f64));
        l_rows.push(row);
    }
    // M = L·Lᵀ restricted to the upper triangle; band(i,j) ≤ 2·half_band
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in i..(i + 2 * half_band + 1).min(n) {
            let mut v = 0.0;
            // dot of rows i and j of L over shared columns
            let (short, long) = (&l_rows[i], &l_rows[j]);
            let mut si = 0;
            for &(col, lv) in long {
                while si < short.len() && short[si].0 < col {
                    si += 1;
                }
                if si < short.len() && short[si].0 == col {
                    v += short[si].1 * lv;
                }
            }
            if v != 0.0 || i == j {
                triplets.push((i, j, v));
            }
        }
    }
    SparseSym::from_triplets(n, &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rep_small_sizes() {
        let r = bench_factorization(10, 10, 0.5, 1, 0);
        assert!(r.dense_mean_seconds > 0.0);
        assert!(r.sparse_mean_seconds > 0.0);
    }

    #[test]
    fn banded_construction_hits_target_roughly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = banded_psd(400, 0.9, &mut rng);
        let nnz_full = 2 * m.nnz_upper() - 400; // mirror the off-diagonal count
        let frac_zero = 1.0 - nnz_full as f64 / (400.0 * 400.0);
        assert!((frac_zero - 0.9).abs() < 0.05, "zero fraction {frac_zero}");
        // and it must factor
        let (_, f) = crate::linalg::factorize(&m, None, PIVOT_BREAKDOWN).unwrap();
        assert!(f.d().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn dense_scaling_superlinear() {
        let small = bench_factorization(200, 4, 0.5, 3, 2);
        let large = bench_factorization(400, 4, 0.5, 3, 2);
        assert!(
            large.dense_mean_seconds > 2.0 * small.dense_mean_seconds,
            "expected superlinear growth: {} vs {}",
            large.dense_mean_seconds,
            small.dense_mean_seconds
        );
    }
}

//! Covariance sparsification by correlation thresholding, with partial
//! matrix completion to restore positive semidefiniteness.
//!
//! Thresholding zeroes Σ entries whose correlation magnitude is at or
//! below τ. The completion step finds the columns that still carry an
//! off-diagonal entry and restores every original value on that index
//! set, which leaves a matrix that is permutation-similar to
//! diag(C, D) — C diagonal, D a principal submatrix of Σ — and therefore
//! positive semidefinite whenever Σ is.

use thiserror::Error;

use crate::linalg::{min_eigenvalue, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparsifyError {
    #[error("no completed sparsity level within 0.2 of target {target}")]
    TargetUnreachable { target: f64 },
    #[error("dimension mismatch between sigma and theta")]
    DimensionMismatch,
}

/// A thresholded covariance matrix with bookkeeping.
#[derive(Clone, Debug)]
pub struct SparseCovariance {
    pub matrix: Matrix,
    pub tau: f64,
    pub sparsity: f64,
    pub completed: bool,
    pub psd: bool,
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub tau: f64,
    pub sparsity_raw: f64,
    pub psd_raw: bool,
    pub sparsity_completed: f64,
}

/// One row per threshold candidate; the data behind the
/// sparsity-vs-definiteness trade-off plot.
#[derive(Clone, Debug)]
pub struct SparsitySweep {
    pub rows: Vec<SweepRow>,
}

/// Sorted unique absolute values of the correlation entries (diagonal
/// included, so the largest candidate is 1).
pub fn threshold_candidates(theta: &Matrix) -> Vec<f64> {
    let n = theta.rows();
    let mut vals: Vec<f64> = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            vals.push(theta[(i, j)].abs());
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup();
    vals
}

/// Zero Σ entries with |θ| ≤ τ (inclusive); the diagonal is always kept.
pub fn sparsify(sigma: &Matrix, theta: &Matrix, tau: f64) -> SparseCovariance {
    assert_eq!(sigma.rows(), theta.rows());
    let n = sigma.rows();
    let mut out = sigma.clone();
    for i in 0..n {
        for j in 0..n {
            if i != j && theta[(i, j)].abs() <= tau {
                out[(i, j)] = 0.0;
            }
        }
    }
    let psd = is_psd(&out, 1e-10);
    let sp = sparsity(&out);
    SparseCovariance { matrix: out, tau, sparsity: sp, completed: false, psd }
}

/// Partial matrix completion: restore every original entry on the index
/// set of columns that retain an off-diagonal nonzero.
pub fn complete(sigma: &Matrix, sc: &SparseCovariance) -> SparseCovariance {
    let n = sigma.rows();
    assert_eq!(sc.matrix.rows(), n);
    let mut keep: Vec<usize> = Vec::new();
    for j in 0..n {
        let has_offdiag = (0..n).any(|i| i != j && sc.matrix[(i, j)] != 0.0);
        if has_offdiag {
            keep.push(j);
        }
    }
    let mut out = sc.matrix.clone();
    for &i in &keep {
        for &j in &keep {
            out[(i, j)] = sigma[(i, j)];
        }
    }
    let psd = is_psd(&out, 1e-10);
    let sp = sparsity(&out);
    SparseCovariance { matrix: out, tau: sc.tau, sparsity: sp, completed: true, psd }
}

/// Fraction of exactly-zero entries.
pub fn sparsity(matrix: &Matrix) -> f64 {
    matrix.zero_fraction()
}

/// Positive-semidefiniteness check: diagonally pivoted Cholesky first
/// (that factorization is what the downstream solver runs), falling back
/// to eigenvalues when the pivoted pass is inconclusive near the
/// semidefinite boundary.
pub fn is_psd(matrix: &Matrix, tol: f64) -> bool {
    debug_assert!(matrix.is_symmetric(1e-12 * matrix.max_abs_diag().max(1.0)));
    match psd_by_pivoted_cholesky(matrix, tol) {
        Some(flag) => flag,
        None => {
            let scale = matrix.max_abs_diag();
            min_eigenvalue(matrix) >= -tol * scale
        }
    }
}

fn psd_by_pivoted_cholesky(matrix: &Matrix, tol: f64) -> Option<bool> {
    let n = matrix.rows();
    let scale = matrix.max_abs_diag();
    if scale == 0.0 {
        return Some(matrix.data().iter().all(|&v| v == 0.0));
    }
    let cut = tol * scale;
    let mut a = matrix.clone();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..n {
        // symmetric pivot: bring the largest remaining diagonal to front
        let mut p = k;
        let mut best = a[(order[k], order[k])];
        for r in (k + 1)..n {
            let v = a[(order[r], order[r])];
            if v > best {
                best = v;
                p = r;
            }
        }
        order.swap(k, p);
        let piv = a[(order[k], order[k])];
        if piv < -cut {
            return Some(false);
        }
        if piv <= cut {
            // remaining diagonal is numerically zero; PSD only if the
            // whole remaining block vanishes, otherwise inconclusive
            let mut max_off: f64 = 0.0;
            for r in k..n {
                for c in k..n {
                    if r != c {
                        max_off = max_off.max(a[(order[r], order[c])].abs());
                    }
                }
            }
            if max_off <= cut {
                return Some(true);
            }
            return None;
        }
        for r in (k + 1)..n {
            let f = a[(order[r], order[k])] / piv;
            for c in (k + 1)..n {
                let v = a[(order[k], order[c])];
                a[(order[r], order[c])] -= f * v;
            }
        }
    }
    Some(true)
}

/// Evaluate every threshold candidate of θ.
pub fn sweep(sigma: &Matrix, theta: &Matrix) -> SparsitySweep {
    sweep_over(sigma, theta, &threshold_candidates(theta))
}

/// Sweep over an explicit candidate list (callers working at large N can
/// subsample the full candidate set; rows stay sorted by τ).
pub fn sweep_over(sigma: &Matrix, theta: &Matrix, candidates: &[f64]) -> SparsitySweep {
    let rows = candidates
        .iter()
        .map(|&tau| {
            let raw = sparsify(sigma, theta, tau);
            let completed = complete(sigma, &raw);
            SweepRow {
                tau,
                sparsity_raw: raw.sparsity,
                psd_raw: raw.psd,
                sparsity_completed: completed.sparsity,
            }
        })
        .collect();
    SparsitySweep { rows }
}

/// Evenly subsampled candidate list capped at `max_len`, always keeping
/// the first and last candidates.
pub fn capped_candidates(theta: &Matrix, max_len: usize) -> Vec<f64> {
    let all = threshold_candidates(theta);
    if all.len() <= max_len.max(2) {
        return all;
    }
    let m = max_len.max(2);
    (0..m)
        .map(|k| all[k * (all.len() - 1) / (m - 1)])
        .collect()
}

/// Pick, for each target fraction, the completed matrix whose sparsity is
/// nearest (ties toward the sparser row). Target 0 returns the original Σ.
pub fn select_levels(
    sweep: &SparsitySweep,
    sigma: &Matrix,
    theta: &Matrix,
    targets: &[f64],
) -> Result<Vec<SparseCovariance>, SparsifyError> {
    let mut out = Vec::with_capacity(targets.len());
    for &target in targets {
        assert!((0.0..1.0).contains(&target), "target outside [0, 1)");
        if target == 0.0 {
            let psd = is_psd(sigma, 1e-10);
            out.push(SparseCovariance {
                matrix: sigma.clone(),
                tau: 0.0,
                sparsity: sparsity(sigma),
                completed: false,
                psd,
            });
            continue;
        }
        let mut best: Option<&SweepRow> = None;
        for row in &sweep.rows {
            let better = match best {
                None => true,
                Some(b) => {
                    let d_new = (row.sparsity_completed - target).abs();
                    let d_old = (b.sparsity_completed - target).abs();
                    d_new < d_old
                        || (d_new == d_old && row.sparsity_completed > b.sparsity_completed)
                }
            };
            if better {
                best = Some(row);
            }
        }
        let row = best.ok_or(SparsifyError::TargetUnreachable { target })?;
        if (row.sparsity_completed - target).abs() > 0.2 {
            return Err(SparsifyError::TargetUnreachable { target });
        }
        let completed = complete(sigma, &sparsify(sigma, theta, row.tau));
        out.push(completed);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{compute_returns, moments, synth_prices, MomentSet, PriceMatrix};

    fn appendix_moments() -> MomentSet {
        let prices = Matrix::from_rows(&[
            vec![2.0, 3.0, 5.0, 2.0],
            vec![6.0, 7.0, 9.0, 3.0],
            vec![4.0, 8.0, 6.0, 5.0],
            vec![5.0, 2.0, 1.0, 2.0],
            vec![2.0, 5.0, 3.0, 6.0],
        ]);
        let dates = (0..5).map(|i| format!("d{i}")).collect();
        let tickers = (0..4).map(|j| format!("A{j}")).collect();
        let p = PriceMatrix::new(dates, tickers, prices).unwrap();
        moments(&compute_returns(&p)).unwrap()
    }

    #[test]
    fn appendix_candidates() {
        let m = appendix_moments();
        let cands = threshold_candidates(&m.theta);
        let printed = [0.05, 0.21, 0.38, 0.82, 0.9, 0.93, 1.0];
        assert_eq!(cands.len(), printed.len());
        for (c, p) in cands.iter().zip(printed.iter()) {
            assert!((c - p).abs() < 0.01, "candidate {c} vs printed {p}");
        }
    }

    #[test]
    fn identity_theta_candidates() {
        let theta = Matrix::identity(3);
        assert_eq!(threshold_candidates(&theta), vec![0.0, 1.0]);
    }

    #[test]
    fn two_by_two_candidates() {
        let theta = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        assert_eq!(threshold_candidates(&theta), vec![0.5, 1.0]);
    }

    #[test]
    fn appendix_sparsify_first_two_thresholds() {
        let m = appendix_moments();
        let cands = threshold_candidates(&m.theta);

        let s1 = sparsify(&m.sigma, &m.theta, cands[0]);
        assert_eq!(s1.matrix[(0, 2)], 0.0);
        assert_eq!(s1.matrix[(2, 0)], 0.0);
        assert_ne!(s1.matrix[(0, 1)], 0.0);
        assert!(!s1.psd, "tau1 matrix should be indefinite");

        let s2 = sparsify(&m.sigma, &m.theta, cands[1]);
        assert_eq!(s2.matrix[(0, 1)], 0.0);
        assert_eq!(s2.matrix[(0, 2)], 0.0);
        assert_ne!(s2.matrix[(0, 3)], 0.0);
        assert!(s2.psd, "tau2 matrix should be PSD");
    }

    #[test]
    fn tau_zero_keeps_everything_without_exact_zero_correlations() {
        let m = appendix_moments();
        let s = sparsify(&m.sigma, &m.theta, 0.0);
        assert_eq!(s.matrix, m.sigma);
    }

    #[test]
    fn appendix_psd_pattern_and_completion() {
        let m = appendix_moments();
        let cands = threshold_candidates(&m.theta);
        let expected = [false, true, true, false, true, true];
        for (k, &want) in expected.iter().enumerate() {
            let raw = sparsify(&m.sigma, &m.theta, cands[k]);
            assert_eq!(raw.psd, want, "raw PSD flag at tau index {k}");
        }
        // tau4: completion restores exactly (2,4)/(4,2) in 1-based indexing
        let raw4 = sparsify(&m.sigma, &m.theta, cands[3]);
        let comp4 = complete(&m.sigma, &raw4);
        assert!(comp4.psd);
        assert_ne!(comp4.matrix[(1, 3)], 0.0);
        assert_ne!(comp4.matrix[(3, 1)], 0.0);
        assert_eq!(comp4.matrix[(1, 3)], m.sigma[(1, 3)]);
        // row/col 0 stays cleared
        for j in 1..4 {
            assert_eq!(comp4.matrix[(0, j)], 0.0);
            assert_eq!(comp4.matrix[(j, 0)], 0.0);
        }
        // the only difference between raw and completed is that one pair
        let mut diffs = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if comp4.matrix[(i, j)] != raw4.matrix[(i, j)] {
                    diffs.push((i, j));
                }
            }
        }
        assert_eq!(diffs, vec![(1, 3), (3, 1)]);
        // six zeros remain in the completed matrix
        assert!((comp4.sparsity - 6.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn star_example_completion() {
        // 4x4 pattern with off-diagonals (2,3) and (3,4): completion adds (2,4)
        let sigma = Matrix::from_rows(&[
            vec![2.0, 0.3, 0.2, 0.1],
            vec![0.3, 2.0, 0.5, 0.4],
            vec![0.2, 0.5, 2.0, 0.6],
            vec![0.1, 0.4, 0.6, 2.0],
        ]);
        let star = SparseCovariance {
            matrix: Matrix::from_rows(&[
                vec![2.0, 0.0, 0.0, 0.0],
                vec![0.0, 2.0, 0.5, 0.0],
                vec![0.0, 0.5, 2.0, 0.6],
                vec![0.0, 0.0, 0.6, 2.0],
            ]),
            tau: 0.0,
            sparsity: 0.5,
            completed: false,
            psd: true,
        };
        let c = complete(&sigma, &star);
        assert_eq!(c.matrix[(1, 3)], 0.4);
        assert_eq!(c.matrix[(3, 1)], 0.4);
        for j in 1..4 {
            assert_eq!(c.matrix[(0, j)], 0.0);
        }
    }

    #[test]
    fn diagonal_only_completion_is_identity() {
        let sigma = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]);
        let diag = SparseCovariance {
            matrix: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]),
            tau: 0.9,
            sparsity: 0.5,
            completed: false,
            psd: true,
        };
        let c = complete(&sigma, &diag);
        assert_eq!(c.matrix, diag.matrix);
        assert!(c.psd);
    }

    #[test]
    fn is_psd_basics() {
        assert!(is_psd(&Matrix::identity(4), 1e-10));
        let indef = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(!is_psd(&indef, 1e-10));
        let semidef = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(is_psd(&semidef, 1e-10));
        let zero = Matrix::zeros(3, 3);
        assert!(is_psd(&zero, 1e-10));
    }

    #[test]
    fn sparsity_counts() {
        let mut d = Matrix::identity(4);
        assert_eq!(sparsity(&d), 0.75);
        for i in 0..4 {
            for j in 0..4 {
                d[(i, j)] = 1.0;
            }
        }
        assert_eq!(sparsity(&d), 0.0);
    }

    #[test]
    fn sweep_is_monotone_and_complete_only_restores() {
        let m = appendix_moments();
        let sw = sweep(&m.sigma, &m.theta);
        assert_eq!(sw.rows.len(), 7);
        for w in sw.rows.windows(2) {
            assert!(w[0].tau < w[1].tau);
            assert!(w[0].sparsity_raw <= w[1].sparsity_raw);
        }
        for row in &sw.rows {
            assert!(row.sparsity_completed <= row.sparsity_raw);
        }
        let raw_pattern: Vec<bool> = sw.rows.iter().take(6).map(|r| r.psd_raw).collect();
        assert_eq!(raw_pattern, vec![false, true, true, false, true, true]);
    }

    #[test]
    fn sweep_identity_theta_unchanged_by_completion() {
        let sigma = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        let theta = Matrix::identity(2);
        let sw = sweep(&sigma, &theta);
        for row in &sw.rows {
            assert_eq!(row.sparsity_completed, row.sparsity_raw);
        }
    }

    #[test]
    fn max_candidate_yields_diagonal() {
        let m = appendix_moments();
        let cands = threshold_candidates(&m.theta);
        let s = sparsify(&m.sigma, &m.theta, *cands.last().unwrap());
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(s.matrix[(i, j)], 0.0);
                }
            }
        }
        assert!(s.psd);
    }

    #[test]
    fn completion_idempotent() {
        let m = appendix_moments();
        for tau in threshold_candidates(&m.theta) {
            let once = complete(&m.sigma, &sparsify(&m.sigma, &m.theta, tau));
            let twice = complete(&m.sigma, &once);
            assert_eq!(once.matrix, twice.matrix);
        }
    }

    #[test]
    fn select_levels_on_synthetic_data() {
        let p = synth_prices(30, 120, 5);
        let m = moments(&compute_returns(&p)).unwrap();
        let sw = sweep(&m.sigma, &m.theta);
        let targets = [0.0, 0.5, 0.7, 0.9];
        let levels = select_levels(&sw, &m.sigma, &m.theta, &targets).unwrap();
        assert_eq!(levels.len(), 4);
        assert_eq!(levels[0].sparsity, 0.0);
        assert!(!levels[0].completed);
        for lv in &levels[1..] {
            assert!(lv.completed);
            assert!(lv.psd);
        }
        for w in levels.windows(2) {
            assert!(w[0].sparsity <= w[1].sparsity + 1e-12);
        }
    }

    #[test]
    fn select_levels_unreachable() {
        // 2x2 with a strong correlation: completed sparsities are only 0 or 0.5
        let sigma = Matrix::from_rows(&[vec![1.0, 0.9], vec![0.9, 1.0]]);
        let theta = sigma.clone();
        let sw = sweep(&sigma, &theta);
        let err = select_levels(&sw, &sigma, &theta, &[0.25]).unwrap_err();
        assert!(matches!(err, SparsifyError::TargetUnreachable { .. }));
    }
}

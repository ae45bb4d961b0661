//! Sparse LDLᵀ factorization for symmetric quasidefinite systems.
//!
//! The factorization is split into a symbolic phase (fill-reducing
//! permutation, elimination tree, column counts) that depends only on the
//! sparsity pattern, and a numeric phase that can be repeated for new
//! values on the same pattern without allocating. The permutation is a
//! greedy minimum-degree ordering, which pushes dense rows (such as the
//! budget-constraint border of a KKT system) to the end of the
//! elimination order.

use std::collections::HashSet;

use super::dense::FactorError;
use super::sparse::SparseSym;

const NONE: usize = usize::MAX;

/// Default absolute pivot breakdown threshold.
pub const PIVOT_BREAKDOWN: f64 = 1e-14;

/// Greedy minimum-degree ordering of the undirected graph given by
/// adjacency lists. Returns `perm` with `perm[k]` = node eliminated at
/// step `k`. Ties break toward the smallest node index so the ordering
/// is deterministic.
pub fn min_degree_order(n: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut sets: Vec<HashSet<usize>> = adj
        .iter()
        .map(|list| list.iter().copied().collect())
        .collect();
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n)
        .map(|v| Reverse((sets[v].len(), v)))
        .collect();
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || sets[v].len() != deg {
            continue; // stale heap entry
        }
        eliminated[v] = true;
        perm.push(v);
        let neighbors: Vec<usize> = sets[v].iter().copied().collect();
        for &a in &neighbors {
            sets[a].remove(&v);
        }
        for (idx, &a) in neighbors.iter().enumerate() {
            for &b in &neighbors[idx + 1..] {
                if sets[a].insert(b) {
                    sets[b].insert(a);
                }
            }
        }
        for &a in &neighbors {
            heap.push(Reverse((sets[a].len(), a)));
        }
    }
    perm
}

/// Pattern-only analysis: permutation, elimination tree, and the column
/// layout of L. Reusable across factorizations with the same pattern.
#[derive(Clone, Debug)]
pub struct SymbolicFactor {
    n: usize,
    /// perm[k] = original index placed at elimination position k.
    perm: Vec<usize>,
    iperm: Vec<usize>,
    parent: Vec<usize>,
    /// Upper CSC pattern of the permuted matrix.
    b_col_ptr: Vec<usize>,
    b_row_idx: Vec<usize>,
    /// Map from permuted-pattern slot to the source slot in the input matrix.
    value_map: Vec<usize>,
    /// Column pointers of L (strictly lower part).
    l_col_ptr: Vec<usize>,
}

impl SymbolicFactor {
    /// Analyze the pattern of `a`, computing a minimum-degree ordering
    /// unless an explicit permutation is supplied.
    pub fn analyze(a: &SparseSym, perm: Option<Vec<usize>>) -> Self {
        let n = a.n();
        let perm = perm.unwrap_or_else(|| min_degree_order(n, &a.adjacency()));
        assert_eq!(perm.len(), n, "permutation length mismatch");
        let mut iperm = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }

        // Permuted upper-triangular pattern with value source map.
        let mut cols: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut src_slot = 0usize;
        for j in 0..n {
            for &i in a.col_pattern(j) {
                let (p, q) = {
                    let (bi, bj) = (iperm[i], iperm[j]);
                    if bi <= bj {
                        (bi, bj)
                    } else {
                        (bj, bi)
                    }
                };
                cols[q].push((p, src_slot));
                src_slot += 1;
            }
        }
        let mut b_col_ptr = Vec::with_capacity(n + 1);
        let mut b_row_idx = Vec::new();
        let mut value_map = Vec::new();
        b_col_ptr.push(0);
        for col in cols.iter_mut() {
            col.sort_unstable_by_key(|e| e.0);
            for &(i, s) in col.iter() {
                b_row_idx.push(i);
                value_map.push(s);
            }
            b_col_ptr.push(b_row_idx.len());
        }

        // Elimination tree (Liu's algorithm with path compression).
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &i0 in &b_row_idx[b_col_ptr[k]..b_col_ptr[k + 1]] {
                if i0 == k {
                    continue;
                }
                let mut i = i0;
                while i != NONE && i < k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    if next == NONE {
                        parent[i] = k;
                        break;
                    }
                    i = next;
                }
            }
        }

        // Column counts of L via the same reach walks the numeric phase uses.
        let mut counts = vec![0usize; n];
        let mut stamp = vec![NONE; n];
        for k in 0..n {
            stamp[k] = k;
            for &i0 in &b_row_idx[b_col_ptr[k]..b_col_ptr[k + 1]] {
                if i0 == k {
                    continue;
                }
                let mut i = i0;
                while stamp[i] != k {
                    stamp[i] = k;
                    counts[i] += 1;
                    i = parent[i];
                }
            }
        }
        let mut l_col_ptr = Vec::with_capacity(n + 1);
        l_col_ptr.push(0);
        for j in 0..n {
            l_col_ptr.push(l_col_ptr[j] + counts[j]);
        }

        Self {
            n,
            perm,
            iperm,
            parent,
            b_col_ptr,
            b_row_idx,
            value_map,
            l_col_ptr,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Stored factor entries: strictly-lower L plus the n pivots of D.
    pub fn factor_nonzeros(&self) -> usize {
        self.l_col_ptr[self.n] + self.n
    }
}

/// Numeric LDLᵀ factor on a fixed symbolic structure.
///
/// `refactor` reuses every buffer; no allocation happens after
/// construction, so the symbolic analysis is paid once per pattern.
#[derive(Clone, Debug)]
pub struct LdltFactor {
    l_row_idx: Vec<usize>,
    l_values: Vec<f64>,
    l_fill: Vec<usize>,
    d: Vec<f64>,
    b_values: Vec<f64>,
    y: Vec<f64>,
    pattern: Vec<usize>,
    stamp: Vec<usize>,
    work: Vec<f64>,
}

impl LdltFactor {
    pub fn new(sym: &SymbolicFactor) -> Self {
        let lnz = sym.l_col_ptr[sym.n];
        Self {
            l_row_idx: vec![0; lnz],
            l_values: vec![0.0; lnz],
            l_fill: vec![0; sym.n],
            d: vec![0.0; sym.n],
            b_values: vec![0.0; sym.value_map.len()],
            y: vec![0.0; sym.n],
            pattern: Vec::with_capacity(sym.n),
            stamp: vec![NONE; sym.n],
            work: vec![0.0; sym.n],
        }
    }

    /// Compute the factorization of `a` (whose pattern must match the one
    /// analyzed in `sym`). Fails if any pivot magnitude drops below
    /// `breakdown`.
    pub fn refactor(
        &mut self,
        sym: &SymbolicFactor,
        a: &SparseSym,
        breakdown: f64,
    ) -> Result<(), FactorError> {
        let n = sym.n;
        assert_eq!(a.n(), n);
        assert_eq!(a.values().len(), sym.value_map.len(), "pattern mismatch");
        for (slot, &src) in sym.value_map.iter().enumerate() {
            self.b_values[slot] = a.values()[src];
        }
        self.l_fill.copy_from_slice(&sym.l_col_ptr[..n]);
        self.stamp.fill(NONE);
        self.y.fill(0.0);

        for k in 0..n {
            self.pattern.clear();
            self.stamp[k] = k; // the walk below terminates at k
            let mut dk = 0.0;
            for p in sym.b_col_ptr[k]..sym.b_col_ptr[k + 1] {
                let i0 = sym.b_row_idx[p];
                let v = self.b_values[p];
                if i0 == k {
                    dk = v;
                    continue;
                }
                self.y[i0] = v;
                let mut i = i0;
                while self.stamp[i] != k {
                    self.stamp[i] = k;
                    self.pattern.push(i);
                    i = sym.parent[i];
                }
            }
            self.pattern.sort_unstable();
            for pi in 0..self.pattern.len() {
                let j = self.pattern[pi];
                let sj = self.y[j];
                self.y[j] = 0.0;
                for p in sym.l_col_ptr[j]..self.l_fill[j] {
                    self.y[self.l_row_idx[p]] -= self.l_values[p] * sj;
                }
                let lkj = sj / self.d[j];
                dk -= lkj * sj;
                let slot = self.l_fill[j];
                self.l_row_idx[slot] = k;
                self.l_values[slot] = lkj;
                self.l_fill[j] += 1;
            }
            if dk.abs() < breakdown {
                return Err(FactorError::Breakdown { index: k });
            }
            self.d[k] = dk;
        }
        Ok(())
    }

    /// Pivots of D in elimination order. `sym.perm()[k]` gives the
    /// original index of pivot `k`.
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    /// Solve A x = b in place.
    pub fn solve(&mut self, sym: &SymbolicFactor, b: &mut [f64]) {
        let n = sym.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            self.work[k] = b[sym.perm[k]];
        }
        // forward: L y = b (unit diagonal, column oriented)
        for j in 0..n {
            let xj = self.work[j];
            if xj != 0.0 {
                for p in sym.l_col_ptr[j]..sym.l_col_ptr[j + 1] {
                    self.work[self.l_row_idx[p]] -= self.l_values[p] * xj;
                }
            }
        }
        for j in 0..n {
            self.work[j] /= self.d[j];
        }
        // backward: Lᵀ x = y
        for j in (0..n).rev() {
            let mut acc = self.work[j];
            for p in sym.l_col_ptr[j]..sym.l_col_ptr[j + 1] {
                acc -= self.l_values[p] * self.work[self.l_row_idx[p]];
            }
            self.work[j] = acc;
        }
        for k in 0..n {
            b[sym.perm[k]] = self.work[k];
        }
    }

    /// Solve `target x = b` where this factor holds a (regularized)
    /// approximation of `target`, applying one step of iterative
    /// refinement against the true matrix.
    pub fn solve_refined(&mut self, sym: &SymbolicFactor, target: &SparseSym, b: &[f64]) -> Vec<f64> {
        let n = sym.n;
        let mut x = b.to_vec();
        self.solve(sym, &mut x);
        let mut residual = vec![0.0; n];
        target.matvec(&x, &mut residual);
        for i in 0..n {
            residual[i] = b[i] - residual[i];
        }
        self.solve(sym, &mut residual);
        for i in 0..n {
            x[i] += residual[i];
        }
        x
    }
}

/// One-shot convenience: analyze, factor, and return both parts.
pub fn factorize(
    a: &SparseSym,
    sym: Option<SymbolicFactor>,
    breakdown: f64,
) -> Result<(SymbolicFactor, LdltFactor), FactorError> {
    let sym = sym.unwrap_or_else(|| SymbolicFactor::analyze(a, None));
    let mut num = LdltFactor::new(&sym);
    num.refactor(&sym, a, breakdown)?;
    Ok((sym, num))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::Matrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_factors_to_identity() {
        let a = SparseSym::from_dense(&Matrix::identity(6));
        let (sym, num) = factorize(&a, None, PIVOT_BREAKDOWN).unwrap();
        assert!(num.d().iter().all(|&d| (d - 1.0).abs() < 1e-15));
        assert_eq!(sym.factor_nonzeros(), 6); // no strictly-lower entries, D only
    }

    #[test]
    fn hand_cholesky_2x2() {
        // LDLᵀ of ((4,2),(2,3)): effective Cholesky lower ((2,0),(1,√2))
        let a = SparseSym::from_triplets(2, &[(0, 0, 4.0), (0, 1, 2.0), (1, 1, 3.0)]);
        let (sym, num) = factorize(&a, Some(SymbolicFactor::analyze(&a, Some(vec![0, 1]))), PIVOT_BREAKDOWN).unwrap();
        let d = num.d();
        // L = ((1,0),(0.5,1)), D = (4, 2) -> L·sqrt(D) = ((2,0),(1,√2))
        assert!((d[0].sqrt() - 2.0).abs() < 1e-15);
        assert!((num.l_values[0] * d[0].sqrt() - 1.0).abs() < 1e-15);
        assert!((d[1].sqrt() - 2.0f64.sqrt()).abs() < 1e-15);
        let _ = sym;
    }

    #[test]
    fn random_psd_reconstruction() {
        // random 50x50 PSD + 1e-8 diagonal: check ‖LDLᵀ − M‖∞ ≤ 1e-9
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let v = crate::linalg::dense::dot(g.row(i), g.row(j));
                m[(i, j)] = v;
            }
        }
        for i in 0..n {
            m[(i, i)] += 1e-8;
        }
        let a = SparseSym::from_dense(&m);
        let (sym, num) = factorize(&a, None, PIVOT_BREAKDOWN).unwrap();
        // reconstruct P A Pᵀ from L and D
        let mut l = Matrix::identity(n);
        for j in 0..n {
            for p in sym.l_col_ptr[j]..sym.l_col_ptr[j + 1] {
                l[(num.l_row_idx[p], j)] = num.l_values[p];
            }
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += l[(i, k)] * num.d()[k] * l[(j, k)];
                }
                err = err.max((v - m[(sym.perm[i], sym.perm[j])]).abs());
            }
        }
        assert!(err <= 1e-9, "reconstruction error {err}");
    }

    #[test]
    fn solve_with_refinement_hits_tight_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = if rng.gen_bool(0.1) { rng.gen_range(-1.0..1.0) } else { 0.0 };
            }
        }
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = crate::linalg::dense::dot(g.row(i), g.row(j));
            }
        }
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        let a = SparseSym::from_dense(&m);
        let (sym, mut num) = factorize(&a, None, PIVOT_BREAKDOWN).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = num.solve_refined(&sym, &a, &b);
        let mut r = vec![0.0; n];
        a.matvec(&x, &mut r);
        let mut num_err: f64 = 0.0;
        let mut den: f64 = 0.0;
        for i in 0..n {
            num_err = num_err.max((r[i] - b[i]).abs());
            den = den.max(b[i].abs());
        }
        assert!(num_err / den <= 1e-10, "relative residual {}", num_err / den);
    }

    #[test]
    fn quasidefinite_signs_follow_blocks() {
        // [[2, 1], [1, -3]] is quasidefinite: pivots one positive, one negative
        let a = SparseSym::from_triplets(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, -3.0)]);
        let (sym, num) = factorize(&a, None, PIVOT_BREAKDOWN).unwrap();
        let mut signs: Vec<bool> = vec![false; 2];
        for k in 0..2 {
            signs[sym.perm()[k]] = num.d()[k] > 0.0;
        }
        assert!(signs[0]);
        assert!(!signs[1]);
    }

    #[test]
    fn refactor_reuses_structure() {
        let base = SparseSym::from_triplets(
            4,
            &[(0, 0, 4.0), (1, 1, 5.0), (2, 2, 6.0), (3, 3, 7.0), (0, 2, 1.0), (1, 3, 2.0)],
        );
        let sym = SymbolicFactor::analyze(&base, None);
        let mut num = LdltFactor::new(&sym);
        num.refactor(&sym, &base, PIVOT_BREAKDOWN).unwrap();
        let cap_before = (num.l_values.capacity(), num.l_row_idx.capacity());
        let mut modified = base.clone();
        for v in modified.values_mut() {
            *v *= 2.0;
        }
        num.refactor(&sym, &modified, PIVOT_BREAKDOWN).unwrap();
        assert_eq!(cap_before, (num.l_values.capacity(), num.l_row_idx.capacity()));
        let mut b = vec![1.0, 1.0, 1.0, 1.0];
        num.solve(&sym, &mut b);
        let mut check = vec![0.0; 4];
        modified.matvec(&b, &mut check);
        for v in check {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn breakdown_detected() {
        let a = SparseSym::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]);
        // Schur complement is exactly zero
        let r = factorize(&a, None, 1e-14);
        assert!(matches!(r, Err(FactorError::Breakdown { .. })));
    }

    #[test]
    fn min_degree_puts_dense_border_last() {
        // star graph: node 0 connected to everyone
        let n = 8;
        let mut adj = vec![Vec::new(); n];
        for i in 1..n {
            adj[0].push(i);
            adj[i].push(0);
        }
        let perm = min_degree_order(n, &adj);
        let pos = perm.iter().position(|&v| v == 0).unwrap();
        assert!(pos >= n - 2, "hub eliminated at position {pos}");
    }
}

//! Linear-algebra kernels shared by the solvers: dense row-major
//! matrices, upper-CSC sparse symmetric storage, and LDLᵀ/Cholesky
//! factorizations with fill-reducing ordering.

pub mod dense;
pub mod ldlt;
pub mod sparse;

pub use dense::{
    axpy, cholesky_in_place, cholesky_lower, dot, invert, lu_solve, min_eigenvalue, norm_inf,
    symmetric_eigenvalues, DenseLdlt, FactorError, Matrix,
};
pub use ldlt::{factorize, min_degree_order, LdltFactor, SymbolicFactor, PIVOT_BREAKDOWN};
pub use sparse::SparseSym;

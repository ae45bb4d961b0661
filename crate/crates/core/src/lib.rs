//! Portfolio-optimization engine: Markowitz efficient frontiers via an
//! interior-point quadratic programming solver, with three accelerators
//! for large instances — covariance sparsification with PSD-preserving
//! partial matrix completion, universe reduction from a parametric-simplex
//! LP frontier, and universe reduction from an LSTM classifier.

pub mod linalg;
pub mod market;
pub mod qp;
pub mod sparsify;

//! Markowitz QP solver: problem/result types, the interior-point entry
//! points, and the factorization benchmark.

mod bench;
mod ipm;
mod kkt;

pub use bench::{bench_factorization, BenchReport};
pub use ipm::IpmOptions;

use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("risk matrix is not positive semidefinite")]
    IndefiniteRisk,
    #[error("no convergence at lambda {lambda} after {iterations} iterations")]
    NoConvergence { lambda: f64, iterations: usize },
    #[error("KKT factorization failed")]
    Factorization,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// One Markowitz instance: moments plus a risk-aversion level.
#[derive(Clone, Debug)]
pub struct QpProblem {
    pub mu: Vec<f64>,
    pub sigma: Matrix,
    pub lambda: f64,
}

impl QpProblem {
    pub fn new(mu: Vec<f64>, sigma: Matrix, lambda: f64) -> Result<Self, QpError> {
        let n = mu.len();
        if n == 0 {
            return Err(QpError::InvalidProblem("empty universe".into()));
        }
        if sigma.rows() != n || sigma.cols() != n {
            return Err(QpError::Dimension { expected: n, got: sigma.rows() });
        }
        if !(lambda >= 0.0) {
            return Err(QpError::InvalidProblem(format!("negative lambda {lambda}")));
        }
        let tol = 1e-12 * sigma.max_abs_diag().max(1.0);
        if !sigma.is_symmetric(tol) {
            return Err(QpError::InvalidProblem("sigma not symmetric".into()));
        }
        Ok(Self { mu, sigma, lambda })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }
}

/// Optimal weights for one λ with the objective split out.
#[derive(Clone, Debug, PartialEq)]
pub struct Portfolio {
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// μᵀw − λ wᵀΣw
    pub objective: f64,
    /// wᵀΣw
    pub risk: f64,
    /// μᵀw
    pub expected_return: f64,
}

/// Primal/dual point usable to warmstart the next solve in a λ sweep.
/// Duals are stored in the units of the original (unscaled) problem.
#[derive(Clone, Debug)]
pub struct WarmStart {
    pub weights: Vec<f64>,
    pub eq_dual: f64,
    pub bound_duals: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub cpu_time: f64,
    pub warmstarted: bool,
    pub factor_nonzeros: usize,
}

/// Solve one Markowitz instance to the default 1e-8 relative tolerance.
pub fn solve_markowitz(
    problem: &QpProblem,
    warm: Option<&WarmStart>,
) -> Result<(Portfolio, WarmStart, SolveStats), QpError> {
    ipm::solve(problem, warm, &IpmOptions::default())
}

pub fn solve_markowitz_with(
    problem: &QpProblem,
    warm: Option<&WarmStart>,
    opts: &IpmOptions,
) -> Result<(Portfolio, WarmStart, SolveStats), QpError> {
    ipm::solve(problem, warm, opts)
}

/// Minimize wᵀΣw over the simplex (tight 1e-10 gap); returns the
/// portfolio and its risk.
pub fn solve_min_risk(sigma: &Matrix) -> Result<(Portfolio, f64), QpError> {
    let n = sigma.rows();
    let problem = QpProblem::new(vec![0.0; n], sigma.clone(), 1.0)?;
    let opts = IpmOptions { tol: 1e-10, max_iterations: 300 };
    let (portfolio, _, _) = ipm::solve(&problem, None, &opts)?;
    let min_risk = portfolio.risk;
    Ok((portfolio, min_risk))
}

//! Infeasible primal-dual interior-point method with Mehrotra
//! predictor-corrector steps for
//!
//! ```text
//! max  μᵀw − λ wᵀΣw   s.t.  eᵀw = 1,  w ≥ 0
//! ```
//!
//! solved internally as  min ½wᵀQw + cᵀw  with Q = 2λΣ, c = −μ. The
//! objective is normalized so the stopping tolerances stay meaningful
//! across the whole λ sweep.

use std::time::Instant;

use super::kkt::{FactorOutcome, KktBackend};
use super::{Portfolio, QpError, QpProblem, SolveStats, WarmStart};
use crate::linalg::{dot, norm_inf, Matrix};

#[derive(Clone, Copy, Debug)]
pub struct IpmOptions {
    /// Relative tolerance on duality gap and primal/dual infeasibility.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iterations: 200 }
    }
}

/// Primal (1,1)-block regularization factor; scaled by the block's
/// largest diagonal entry.
const DELTA_SCALE: f64 = 1e-9;
/// Fraction of the step to the boundary that is actually taken.
const STEP_FRACTION: f64 = 0.995;
/// Warmstart points are pulled this far toward the analytic center.
const WARM_SHIFT: f64 = 0.1;

pub fn solve(
    problem: &QpProblem,
    warm: Option<&WarmStart>,
    opts: &IpmOptions,
) -> Result<(Portfolio, WarmStart, SolveStats), QpError> {
    let started = Instant::now();
    let n = problem.n();
    let sigma = &problem.sigma;
    let lambda = problem.lambda;

    // scaled minimization data
    let mut q = Matrix::zeros(n, n);
    let mut q_max_diag = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let v = 2.0 * lambda * sigma[(i, j)];
            q[(i, j)] = v;
        }
        q_max_diag = q_max_diag.max(q[(i, i)].abs());
    }
    let scale = q_max_diag.max(norm_inf(&problem.mu)).max(1.0);
    for v_idx in 0..n {
        for j in 0..n {
            q[(v_idx, j)] /= scale;
        }
    }
    let c: Vec<f64> = problem.mu.iter().map(|&m| -m / scale).collect();
    let delta = DELTA_SCALE * q.max_abs_diag().max(1.0);
    let mut backend = if lambda == 0.0 {
        KktBackend::choose(&Matrix::zeros(n, n), delta, delta)
    } else {
        KktBackend::choose(&q, delta, delta)
    };

    // starting point
    let (mut w, mut y, mut z) = match warm {
        Some(ws) => {
            if ws.weights.len() != n || ws.bound_duals.len() != n {
                return Err(QpError::Dimension { expected: n, got: ws.weights.len() });
            }
            let w: Vec<f64> = ws
                .weights
                .iter()
                .map(|&v| (1.0 - WARM_SHIFT) * v.max(0.0) + WARM_SHIFT / n as f64)
                .collect();
            let z: Vec<f64> = ws
                .bound_duals
                .iter()
                .map(|&v| (1.0 - WARM_SHIFT) * (v / scale).max(0.0) + WARM_SHIFT)
                .collect();
            (w, ws.eq_dual / scale, z)
        }
        None => (vec![1.0 / n as f64; n], 0.0, vec![1.0; n]),
    };

    let c_norm = norm_inf(&c);
    let mut iterations = 0usize;
    let mut converged = false;
    let mut qw = vec![0.0; n];
    for iter in 0..opts.max_iterations {
        qw.copy_from_slice(&q.matvec(&w));
        let obj = 0.5 * dot(&qw, &w) + dot(&c, &w);
        let r_dual: Vec<f64> = (0..n).map(|i| qw[i] + c[i] - y - z[i]).collect();
        let sum_w: f64 = w.iter().sum();
        let r_primal = 1.0 - sum_w;
        let gap = dot(&w, &z);

        let rel_gap = gap / (1.0 + obj.abs());
        let pinf = r_primal.abs();
        let dinf = norm_inf(&r_dual) / (1.0 + c_norm);
        if rel_gap <= opts.tol && pinf <= opts.tol && dinf <= opts.tol {
            converged = true;
            iterations = iter;
            break;
        }
        iterations = iter + 1;

        let mu_c = gap / n as f64;
        let barrier: Vec<f64> = (0..n).map(|i| z[i] / w[i]).collect();
        match backend.factor(&barrier) {
            FactorOutcome::Ok => {}
            FactorOutcome::IndefiniteBlock => return Err(QpError::IndefiniteRisk),
            FactorOutcome::Breakdown => return Err(QpError::Factorization),
        }

        // predictor
        let f_aff: Vec<f64> = (0..n).map(|i| -r_dual[i] - z[i]).collect();
        let (dw_aff, u_aff) = backend.solve(&f_aff, r_primal);
        let _ = u_aff;
        let dz_aff: Vec<f64> = (0..n).map(|i| -z[i] - barrier[i] * dw_aff[i]).collect();
        let alpha_p_aff = max_step(&w, &dw_aff);
        let alpha_d_aff = max_step(&z, &dz_aff);
        let mut mu_aff = 0.0;
        for i in 0..n {
            mu_aff += (w[i] + alpha_p_aff * dw_aff[i]) * (z[i] + alpha_d_aff * dz_aff[i]);
        }
        mu_aff /= n as f64;
        let sigma_center = ((mu_aff / mu_c).powi(3)).clamp(1e-10, 1.0);

        // corrector
        let target = sigma_center * mu_c;
        let f_cor: Vec<f64> = (0..n)
            .map(|i| -r_dual[i] + (-w[i] * z[i] + target - dw_aff[i] * dz_aff[i]) / w[i])
            .collect();
        let (dw, u) = backend.solve(&f_cor, r_primal);
        let dy = -u;
        let dz: Vec<f64> = (0..n)
            .map(|i| (-w[i] * z[i] + target - dw_aff[i] * dz_aff[i] - z[i] * dw[i]) / w[i])
            .collect();

        let alpha_p = (STEP_FRACTION * max_step(&w, &dw)).min(1.0);
        let alpha_d = (STEP_FRACTION * max_step(&z, &dz)).min(1.0);
        for i in 0..n {
            w[i] += alpha_p * dw[i];
            z[i] += alpha_d * dz[i];
        }
        y += alpha_d * dy;
    }

    if !converged {
        return Err(QpError::NoConvergence { lambda, iterations: opts.max_iterations });
    }

    let expected_return = dot(&problem.mu, &w);
    let risk = sigma.quad_form(&w);
    let portfolio = Portfolio {
        weights: w.clone(),
        lambda,
        objective: expected_return - lambda * risk,
        risk,
        expected_return,
    };
    let warmstart = WarmStart {
        weights: w,
        eq_dual: y * scale,
        bound_duals: z.iter().map(|&v| v * scale).collect(),
    };
    let stats = SolveStats {
        iterations,
        cpu_time: started.elapsed().as_secs_f64(),
        warmstarted: warm.is_some(),
        factor_nonzeros: backend.factor_nonzeros(),
    };
    Ok((portfolio, warmstart, stats))
}

fn max_step(x: &[f64], dx: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xi, di) in x.iter().zip(dx) {
        if *di < 0.0 {
            alpha = alpha.min(-xi / di);
        }
    }
    alpha
}

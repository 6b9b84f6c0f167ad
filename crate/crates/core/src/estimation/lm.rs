//! Levenberg-Marquardt on unconstrained (log) parameters.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
const RELATIVE_STEP_TOLERANCE: f64 = 1e-10;
const MAX_DAMPING: f64 = 1e16;
/// Smallest singular-value ratio accepted at the optimum.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct LmOptions {
    /// Central-difference step on the log parameters.
    pub fd_step: f64,
    /// Reject a numerically singular Jacobian at the start and at the optimum.
    /// Off for over-parameterised candidates whose extra parameter may vanish.
    pub require_full_rank: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-6,
            require_full_rank: true,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub x: Vec<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub step_norm: f64,
    pub converged: bool,
}

fn sum_squares(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

fn jacobian<F>(f: &F, x: &DVector<f64>, m: usize, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut up = x.clone();
        let mut down = x.clone();
        up[j] += h;
        down[j] -= h;
        let ru = f(up.as_slice())?;
        let rd = f(down.as_slice())?;
        for i in 0..m {
            jac[(i, j)] = (ru[i] - rd[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn check_rank(jac: &DMatrix<f64>) -> Result<()> {
    let sv = jac.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min / max < RANK_TOLERANCE {
        return Err(Error::RankDeficient(format!(
            "Jacobian singular values span [{min:.3e}, {max:.3e}]; parameters are not identifiable from this trace"
        )));
    }
    Ok(())
}

/// Minimises `|f(x)|^2`. Fails with a rank-deficiency error if the Jacobian
/// at the starting point or at the optimum is numerically singular.
pub(crate) fn minimize<F>(f: F, x0: Vec<f64>, options: &LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = DVector::from_vec(x0);
    let mut r = DVector::from_vec(f(x.as_slice())?);
    let m = r.len();
    if m < x.len() {
        return Err(Error::InsufficientData(format!(
            "{m} residuals for {} parameters",
            x.len()
        )));
    }
    let mut rss = sum_squares(&r);
    let mut lambda = 1e-3;
    let mut step_norm = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut jac = jacobian(&f, &x, m, options.fd_step)?;
    if options.require_full_rank {
        check_rank(&jac)?;
    }

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if rss == 0.0 {
            converged = true;
            step_norm = 0.0;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let mut improved = false;
        while lambda <= MAX_DAMPING {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = -chol.solve(&grad);
            let trial = &x + &delta;
            let candidate = match f(trial.as_slice()) {
                Ok(v) => DVector::from_vec(v),
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial_rss = sum_squares(&candidate);
            if trial_rss.is_finite() && trial_rss <= rss {
                step_norm = delta.norm();
                let relative = step_norm / (x.norm() + RELATIVE_STEP_TOLERANCE);
                x = trial;
                r = candidate;
                rss = trial_rss;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if relative < RELATIVE_STEP_TOLERANCE {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left at working precision.
            converged = true;
            step_norm = 0.0;
            break;
        }
        if converged {
            break;
        }
        jac = jacobian(&f, &x, m, options.fd_step)?;
    }
    if options.require_full_rank {
        check_rank(&jacobian(&f, &x, m, options.fd_step)?)?;
    }
    Ok(LmOutcome {
        x: x.as_slice().to_vec(),
        rss,
        iterations,
        step_norm,
        converged,
    })
}

//! Box-constrained Levenberg-Marquardt for dense least-squares problems.

use ndarray::{ArrayView1, ArrayView2};

use crate::linalg::cholesky_solve;
use crate::scalar::Real;

/// A least-squares problem `min ½‖r(p)‖²` with an analytic Jacobian.
pub trait LeastSquaresProblem<T: Real> {
    fn n_residuals(&self) -> usize;

    /// Writes `r(p)` into `out`.
    fn residuals(&self, params: &[T], out: &mut [T]);

    /// Writes the row-major `m×n` Jacobian of `r` at `params` into `jac`.
    fn jacobian(&self, params: &[T], jac: &mut [T]);

    /// Projects `params` back into the feasible box.
    fn project(&self, _params: &mut [T]) {}
}

#[derive(Debug, Clone, Copy)]
pub struct LmSettings<T> {
    pub max_iterations: usize,
    pub lambda0: T,
    /// Relative decrease of the cost below which an accepted step ends the run.
    pub tolerance: T,
}

#[derive(Debug, Clone)]
pub struct LmOutcome<T> {
    pub params: Vec<T>,
    /// `½‖r‖²` at `params`.
    pub cost: T,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after the initial evaluation and after every accepted step.
    pub cost_history: Vec<T>,
}

const LAMBDA_MAX: f64 = 1e16;

fn half_sq_norm<T: Real>(r: &[T]) -> T {
    r.iter().map(|&v| v * v).sum::<T>() * T::lit(0.5)
}

/// Minimizes the problem starting from `initial` (projected first).
///
/// Damping is multiplied by 10 after a rejected step and divided by 10 after
/// an accepted one. The returned parameters are always the best seen.
pub fn levenberg_marquardt<T: Real, P: LeastSquaresProblem<T>>(
    problem: &P,
    initial: &[T],
    settings: &LmSettings<T>,
) -> LmOutcome<T> {
    let n = initial.len();
    let m = problem.n_residuals();
    let mut params = initial.to_vec();
    problem.project(&mut params);

    let mut r = vec![T::zero(); m];
    problem.residuals(&params, &mut r);
    let mut cost = half_sq_norm(&r);
    let mut history = vec![cost];

    if n == 0 || cost == T::zero() {
        return LmOutcome { params, cost, iterations: 0, converged: true, cost_history: history };
    }

    let mut jac = vec![T::zero(); m * n];
    let mut jtj = Vec::new();
    let mut jtr = Vec::new();
    let mut trial = vec![T::zero(); n];
    let mut r_trial = vec![T::zero(); m];
    let mut lambda = settings.lambda0;
    let mut converged = false;
    let mut iterations = 0;
    let mut fresh_jacobian = true;

    while iterations < settings.max_iterations {
        if fresh_jacobian {
            problem.jacobian(&params, &mut jac);
            let j = ArrayView2::from_shape((m, n), &jac).expect("m×n jacobian");
            let rv = ArrayView1::from(&r);
            jtj = j.t().dot(&j).iter().copied().collect();
            jtr = j.t().dot(&rv).to_vec();
            fresh_jacobian = false;
        }
        iterations += 1;

        let mut damped = jtj.clone();
        let max_diag = (0..n).map(|a| jtj[a * n + a]).fold(T::zero(), T::max);
        let floor = max_diag * T::lit(1e-12) + T::min_positive_value();
        for a in 0..n {
            let d = jtj[a * n + a].max(floor);
            damped[a * n + a] = jtj[a * n + a] + lambda * d;
        }
        let rhs: Vec<T> = jtr.iter().map(|&g| -g).collect();
        let step = cholesky_solve(&damped, &rhs, n);

        let accepted = match step {
            Some(delta) if delta.iter().all(|d| d.is_finite()) => {
                for ((t, &p), &d) in trial.iter_mut().zip(&params).zip(&delta) {
                    *t = p + d;
                }
                problem.project(&mut trial);
                problem.residuals(&trial, &mut r_trial);
                let c = half_sq_norm(&r_trial);
                if c.is_finite() && c < cost {
                    let decrease = (cost - c) / cost;
                    std::mem::swap(&mut params, &mut trial);
                    std::mem::swap(&mut r, &mut r_trial);
                    cost = c;
                    history.push(cost);
                    if decrease < settings.tolerance || cost == T::zero() {
                        converged = true;
                    }
                    true
                } else {
                    false
                }
            }
            _ => false,
        };

        if converged {
            break;
        }
        if accepted {
            lambda = (lambda / T::lit(10.0)).max(T::lit(1e-15));
            fresh_jacobian = true;
        } else {
            lambda *= T::lit(10.0);
            if lambda > T::lit(LAMBDA_MAX) {
                // no descent direction left at working precision
                converged = true;
                break;
            }
        }
    }

    LmOutcome { params, cost, iterations, converged, cost_history: history }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fits `y = a exp(b x)`.
    struct ExpFit {
        x: Vec<f64>,
        y: Vec<f64>,
    }

    impl LeastSquaresProblem<f64> for ExpFit {
        fn n_residuals(&self) -> usize {
            self.x.len()
        }
        fn residuals(&self, p: &[f64], out: &mut [f64]) {
            for ((o, &x), &y) in out.iter_mut().zip(&self.x).zip(&self.y) {
                *o = p[0] * (p[1] * x).exp() - y;
            }
        }
        fn jacobian(&self, p: &[f64], jac: &mut [f64]) {
            for (row, &x) in jac.chunks_exact_mut(2).zip(&self.x) {
                row[0] = (p[1] * x).exp();
                row[1] = p[0] * x * (p[1] * x).exp();
            }
        }
        fn project(&self, p: &mut [f64]) {
            p[0] = p[0].max(0.0);
        }
    }

    fn settings() -> LmSettings<f64> {
        LmSettings { max_iterations: 200, lambda0: 1e-3, tolerance: 1e-12 }
    }

    #[test]
    fn recovers_exponential() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.05).collect();
        let y = x.iter().map(|&v| 2.5 * (-1.3 * v).exp()).collect();
        let out = levenberg_marquardt(&ExpFit { x, y }, &[1.0, 0.0], &settings());
        assert!(out.converged);
        assert!((out.params[0] - 2.5).abs() < 1e-6);
        assert!((out.params[1] + 1.3).abs() < 1e-6);
        assert!(out.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn projection_is_respected() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y = x.iter().map(|&v| -(v + 1.0)).collect();
        let out = levenberg_marquardt(&ExpFit { x, y }, &[1.0, 0.1], &settings());
        assert!(out.params[0] >= 0.0);
    }
}

//! SQP for `min f(x)` subject to one equality `c(x) = 0` and box bounds.
//!
//! Full-space method: damped BFGS approximation of the Lagrangian Hessian,
//! an equality-constrained QP on the variables not held at a bound, steps
//! truncated at the first blocking bound, and backtracking on the ℓ₁ merit
//! function `f + μ|c|`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqpError {
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("starting point has {got} entries, problem has {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("bounds are inconsistent at index {0}")]
    BadBounds(usize),
}

/// Values at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    pub f: f64,
    pub c: f64,
}

/// Values and gradients at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub f: f64,
    pub c: f64,
    pub grad_f: Vec<f64>,
    pub grad_c: Vec<f64>,
}

/// A smooth problem with one equality constraint.
pub trait NlpProblem {
    fn dim(&self) -> usize;
    /// `(lower, upper)`; infinite entries mean unbounded.
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// Indices that never move from their starting value.
    fn fixed(&self) -> Vec<usize> {
        Vec::new()
    }
    fn values(&self, x: &[f64]) -> Result<Values, SqpError>;
    fn derivatives(&self, x: &[f64]) -> Result<Derivatives, SqpError>;
    /// Known part of `∇²L` to start the quasi-Newton matrix from. Must be
    /// symmetric positive definite; otherwise a scaled identity is used.
    fn initial_hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqpOptions {
    /// Stationarity tolerance, relative to `max(1, ‖∇f‖∞)`.
    pub tol_kkt: f64,
    /// Absolute tolerance on `|c|`.
    pub tol_feas: f64,
    pub max_iterations: usize,
    pub max_backtracks: usize,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self { tol_kkt: 1e-6, tol_feas: 1e-8, max_iterations: 200, max_backtracks: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqpStatus {
    Converged,
    MaxIterations,
    LineSearchFailure,
    SingularKkt,
}

/// One accepted iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub objective: f64,
    pub constraint: f64,
    pub stationarity: f64,
    pub step_norm: f64,
    /// Accepted step length and the longest one the bounds allowed.
    pub alpha: f64,
    pub alpha_max: f64,
    /// ℓ₁ merit `f + μ|c|` at the accepted point.
    pub merit: f64,
    /// Penalty `μ` used in this iteration's line search.
    pub penalty: f64,
    pub lambda: f64,
    pub free_variables: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpReport {
    pub status: SqpStatus,
    pub iterations: usize,
    pub objective: f64,
    pub constraint: f64,
    pub stationarity: f64,
    pub feasibility: f64,
    pub function_evaluations: usize,
    pub gradient_evaluations: usize,
    pub history: Vec<IterationLog>,
    /// Smallest eigenvalue of the final Hessian approximation.
    pub min_hessian_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpOutcome {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub report: SqpReport,
}

impl SqpOutcome {
    pub fn converged(&self) -> bool {
        self.report.status == SqpStatus::Converged
    }
}

/// Which side of the box a variable sits on, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Free,
    Lower,
    Upper,
}

fn side(x: f64, l: f64, u: f64) -> Side {
    let tol = |b: f64| 1e-12 * (1.0 + b.abs());
    if l.is_finite() && x - l <= tol(l) {
        Side::Lower
    } else if u.is_finite() && u - x <= tol(u) {
        Side::Upper
    } else {
        Side::Free
    }
}

/// `‖projected ∇L‖∞`: components of `∇f + λ∇c` pushing into an active
/// bound are dropped, fixed indices are ignored.
fn projected_stationarity(x: &[f64], d: &Derivatives, lambda: f64, lo: &[f64], hi: &[f64], fixed: &[bool]) -> f64 {
    (0..x.len())
        .filter(|&i| !fixed[i])
        .map(|i| {
            let r = d.grad_f[i] + lambda * d.grad_c[i];
            match side(x[i], lo[i], hi[i]) {
                Side::Lower if r > 0.0 => 0.0,
                Side::Upper if r < 0.0 => 0.0,
                _ => r.abs(),
            }
        })
        .fold(0.0, f64::max)
}

/// `(stationarity, feasibility)` of the KKT conditions at `(x, λ)`.
pub fn kkt_residual(problem: &dyn NlpProblem, x: &[f64], lambda: f64) -> Result<(f64, f64), SqpError> {
    let d = problem.derivatives(x)?;
    let (lo, hi) = problem.bounds();
    let fixed = fixed_mask(problem);
    Ok((projected_stationarity(x, &d, lambda, &lo, &hi, &fixed), d.c.abs()))
}

fn fixed_mask(problem: &dyn NlpProblem) -> Vec<bool> {
    let mut mask = vec![false; problem.dim()];
    for i in problem.fixed() {
        if i < mask.len() {
            mask[i] = true;
        }
    }
    mask
}

fn lagrangian_gradient(d: &Derivatives, lambda: f64) -> DVector<f64> {
    DVector::from_iterator(d.grad_f.len(), d.grad_f.iter().zip(&d.grad_c).map(|(g, a)| g + lambda * a))
}

fn least_squares_multiplier(d: &Derivatives, free: &[bool]) -> f64 {
    let (mut ag, mut aa) = (0.0, 0.0);
    for i in 0..d.grad_f.len() {
        if free[i] {
            ag += d.grad_c[i] * d.grad_f[i];
            aa += d.grad_c[i] * d.grad_c[i];
        }
    }
    if aa > 0.0 {
        -ag / aa
    } else {
        0.0
    }
}

/// Runs SQP from `x0` (projected into the box).
pub fn solve(problem: &dyn NlpProblem, x0: &[f64], opts: &SqpOptions) -> Result<SqpOutcome, SqpError> {
    solve_observed(problem, x0, opts, &mut |_| {})
}

/// As [`solve`], calling `observer` after every accepted step.
pub fn solve_observed(
    problem: &dyn NlpProblem,
    x0: &[f64],
    opts: &SqpOptions,
    observer: &mut dyn FnMut(&IterationLog),
) -> Result<SqpOutcome, SqpError> {
    let n = problem.dim();
    if x0.len() != n {
        return Err(SqpError::DimensionMismatch { got: x0.len(), expected: n });
    }
    let (lo, hi) = problem.bounds();
    for i in 0..n {
        if !(lo[i] <= hi[i]) {
            return Err(SqpError::BadBounds(i));
        }
    }
    let fixed = fixed_mask(problem);
    let movable: Vec<bool> = fixed.iter().map(|f| !f).collect();
    let mut x: Vec<f64> = x0.iter().zip(lo.iter().zip(&hi)).map(|(v, (l, u))| v.clamp(*l, *u)).collect();
    let mut nf = 0usize;
    let mut ng = 1usize;
    let mut d = problem.derivatives(&x)?;
    let mut lambda = least_squares_multiplier(&d, &movable);

    let mut w = match problem.initial_hessian(&x).filter(|h| is_positive_definite(h, n)) {
        Some(h) => h,
        None => DMatrix::identity(n, n) * initial_curvature(problem, &x, &d, lambda, &lo, &hi, &fixed, &mut ng),
    };
    let mut mu = 2.0 * lambda.abs() + 1.0;
    let mut history = Vec::new();
    let mut status = SqpStatus::MaxIterations;
    let mut iterations = 0;
    let mut stationarity = projected_stationarity(&x, &d, lambda, &lo, &hi, &fixed);

    for it in 0..=opts.max_iterations {
        stationarity = projected_stationarity(&x, &d, lambda, &lo, &hi, &fixed);
        let scale = 1.0 + d.grad_f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if stationarity <= opts.tol_kkt * scale && d.c.abs() <= opts.tol_feas {
            status = SqpStatus::Converged;
            break;
        }
        if it == opts.max_iterations {
            break;
        }
        iterations = it + 1;

        let gl = lagrangian_gradient(&d, lambda);
        let mut free: Vec<bool> = (0..n)
            .map(|i| {
                !fixed[i]
                    && match side(x[i], lo[i], hi[i]) {
                        Side::Lower => gl[i] <= 0.0,
                        Side::Upper => gl[i] >= 0.0,
                        Side::Free => true,
                    }
            })
            .collect();
        // a released variable whose step still leaves the box is frozen
        // again and the QP re-solved
        let step = loop {
            let Some((dir, lambda_qp)) = qp_step(&w, &d, &free) else {
                break None;
            };
            let leaving: Vec<usize> = (0..n)
                .filter(|&i| {
                    free[i]
                        && match side(x[i], lo[i], hi[i]) {
                            Side::Lower => dir[i] < 0.0,
                            Side::Upper => dir[i] > 0.0,
                            Side::Free => false,
                        }
                })
                .collect();
            if leaving.is_empty() {
                break Some((dir, lambda_qp));
            }
            for i in leaving {
                free[i] = false;
            }
        };
        let Some((dir, lambda_qp)) = step else {
            status = SqpStatus::SingularKkt;
            break;
        };

        // longest feasible fraction of the step
        let mut alpha_max: f64 = 1.0;
        for i in 0..n {
            if dir[i] < 0.0 && lo[i].is_finite() {
                alpha_max = alpha_max.min((lo[i] - x[i]) / dir[i]);
            } else if dir[i] > 0.0 && hi[i].is_finite() {
                alpha_max = alpha_max.min((hi[i] - x[i]) / dir[i]);
            }
        }
        let alpha_max = alpha_max.max(0.0);

        mu = mu.max(2.0 * lambda_qp.abs() + 1.0);
        let merit0 = d.f + mu * d.c.abs();
        let slope = d.grad_f.iter().zip(dir.iter()).map(|(g, p)| g * p).sum::<f64>() - mu * d.c.abs();
        let mut alpha = alpha_max;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            if alpha <= 0.0 {
                break;
            }
            let trial: Vec<f64> = (0..n).map(|i| (x[i] + alpha * dir[i]).clamp(lo[i], hi[i])).collect();
            let target = merit0 + 1e-4 * alpha * slope.min(0.0);
            nf += 1;
            if let Ok(v) = problem.values(&trial) {
                let merit = v.f + mu * v.c.abs();
                if merit.is_finite() && merit <= target {
                    accepted = Some(trial);
                    break;
                }
                // the step may fail only through the curvature of the
                // constraint: pull it back onto the linearization
                if v.c.abs() > d.c.abs() {
                    let corrected = second_order_correction(&trial, v.c, &d.grad_c, &free, &lo, &hi);
                    nf += 1;
                    if let Ok(v) = problem.values(&corrected) {
                        let merit = v.f + mu * v.c.abs();
                        if merit.is_finite() && merit <= target {
                            accepted = Some(corrected);
                            break;
                        }
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some(x_new) = accepted else {
            status = SqpStatus::LineSearchFailure;
            break;
        };
        ng += 1;
        let d_new = problem.derivatives(&x_new)?;
        let lambda_new = lambda + (alpha / alpha_max.max(f64::MIN_POSITIVE)).min(1.0) * (lambda_qp - lambda);

        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let y = lagrangian_gradient(&d_new, lambda_new) - lagrangian_gradient(&d, lambda_new);
        damped_bfgs(&mut w, &s, &y);

        x = x_new;
        d = d_new;
        lambda = lambda_new;
        let log = IterationLog {
            iteration: iterations,
            objective: d.f,
            constraint: d.c,
            stationarity: projected_stationarity(&x, &d, lambda, &lo, &hi, &fixed),
            step_norm: s.amax(),
            alpha,
            alpha_max,
            merit: d.f + mu * d.c.abs(),
            penalty: mu,
            lambda,
            free_variables: free.iter().filter(|f| **f).count(),
        };
        observer(&log);
        history.push(log);
    }
    let min_eig = w.clone().symmetric_eigen().eigenvalues.min();
    Ok(SqpOutcome {
        report: SqpReport {
            status,
            iterations,
            objective: d.f,
            constraint: d.c,
            stationarity,
            feasibility: d.c.abs(),
            function_evaluations: nf,
            gradient_evaluations: ng,
            history,
            min_hessian_eigenvalue: min_eig,
        },
        x,
        lambda,
    })
}

/// Scale of the initial Hessian from the change of `∇L` along a short
/// step; 1 when the probe sees no positive curvature.
#[allow(clippy::too_many_arguments)]
fn initial_curvature(
    problem: &dyn NlpProblem,
    x: &[f64],
    d: &Derivatives,
    lambda: f64,
    lo: &[f64],
    hi: &[f64],
    fixed: &[bool],
    ng: &mut usize,
) -> f64 {
    let g = lagrangian_gradient(d, lambda);
    let mut p: Vec<f64> = (0..x.len()).map(|i| if fixed[i] { 0.0 } else { -g[i] }).collect();
    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(pn > 0.0) {
        // stationary start: probe along the constraint gradient instead
        p = (0..x.len()).map(|i| if fixed[i] { 0.0 } else { d.grad_c[i] }).collect();
    }
    let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(pn > 0.0) {
        return 1.0;
    }
    let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let eps = 1e-2 * (1.0 + xn) / pn;
    let mut trial: Vec<f64> = (0..x.len()).map(|i| x[i] + eps * p[i]).collect();
    // fall back to the opposite direction at a bound
    if (0..x.len()).any(|i| trial[i] < lo[i] || trial[i] > hi[i]) {
        trial = (0..x.len()).map(|i| (x[i] - eps * p[i]).clamp(lo[i], hi[i])).collect();
    }
    let s: Vec<f64> = trial.iter().zip(x).map(|(a, b)| a - b).collect();
    let ss: f64 = s.iter().map(|v| v * v).sum();
    *ng += 1;
    let Ok(dt) = problem.derivatives(&trial) else { return 1.0 };
    let y = lagrangian_gradient(&dt, lambda) - g;
    let sy: f64 = s.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let theta = sy / ss;
    if theta.is_finite() && theta > 0.0 {
        theta
    } else {
        1.0
    }
}

/// Equality-constrained QP on the free variables:
/// `[W_FF a_F; a_Fᵀ 0] [d_F; λ] = [-∇f_F; -c]`.
fn qp_step(w: &DMatrix<f64>, d: &Derivatives, free: &[bool]) -> Option<(DVector<f64>, f64)> {
    let idx: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
    let k = idx.len();
    let anorm = idx.iter().map(|&i| d.grad_c[i].abs()).fold(0.0, f64::max);
    if k == 0 || !(anorm > 0.0) {
        return None;
    }
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            kkt[(r, c)] = w[(i, j)];
        }
        kkt[(r, k)] = d.grad_c[i];
        kkt[(k, r)] = d.grad_c[i];
        rhs[r] = -d.grad_f[i];
    }
    rhs[k] = -d.c;
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut dir = DVector::zeros(free.len());
    for (r, &i) in idx.iter().enumerate() {
        dir[i] = sol[r];
    }
    Some((dir, sol[k]))
}

/// Least-norm move over the free variables cancelling `c` to first order.
fn second_order_correction(x: &[f64], c: f64, grad_c: &[f64], free: &[bool], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let aa: f64 = (0..x.len()).filter(|&i| free[i]).map(|i| grad_c[i] * grad_c[i]).sum();
    (0..x.len())
        .map(|i| {
            if free[i] && aa > 0.0 {
                (x[i] - c * grad_c[i] / aa).clamp(lo[i], hi[i])
            } else {
                x[i]
            }
        })
        .collect()
}

fn is_positive_definite(h: &DMatrix<f64>, n: usize) -> bool {
    h.shape() == (n, n) && (h - h.transpose()).amax() <= 1e-12 * h.amax() && h.clone().cholesky().is_some()
}

/// BFGS update with Powell damping, which keeps `W` positive definite.
///
/// Repeated damping shrinks the curvature along each `s` by up to a factor
/// 5, so in floating point the smallest eigenvalue can still reach zero.
/// An update that would push the condition number past `1e12` is skipped.
pub fn damped_bfgs(w: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let ws = &*w * s;
    let sws = s.dot(&ws);
    if !(sws > 0.0) {
        return;
    }
    let sy = s.dot(y);
    let r = if sy >= 0.2 * sws {
        y.clone()
    } else {
        let theta = 0.8 * sws / (sws - sy);
        y * theta + &ws * (1.0 - theta)
    };
    let sr = s.dot(&r);
    if !(sr > 0.0) {
        return;
    }
    let mut next = w.clone();
    next.ger(-1.0 / sws, &ws, &ws, 1.0);
    next.ger(1.0 / sr, &r, &r, 1.0);
    // keep exact symmetry against round-off drift
    let next = (&next + next.transpose()) * 0.5;
    let eig = next.clone().symmetric_eigen().eigenvalues;
    if eig.min() > 1e-12 * eig.max() {
        *w = next;
    }
}

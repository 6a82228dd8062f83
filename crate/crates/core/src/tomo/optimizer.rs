//! Quasi-Newton minimizer shared by the state and process estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer outcome, attached to reports and to non-convergence errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Max-norm of the gradient at the returned point.
    pub gradient_norm: f64,
    pub objective: f64,
    pub stop_reason: StopReason,
    /// Best point found; populated on failure so callers can inspect it.
    #[serde(skip)]
    pub best: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    Improvement,
    LineSearchStall,
    MaxIterations,
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient max-norm falls below this.
    pub grad_tol: f64,
    /// Stop after `stall_iters` consecutive relative improvements below this.
    pub rel_tol: f64,
    pub stall_iters: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            grad_tol: 1e-8,
            rel_tol: 1e-12,
            stall_iters: 3,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// BFGS with Armijo backtracking on an objective returning `(value, gradient)`.
///
/// A line search that cannot decrease the objective even along the steepest
/// descent direction means the iterate is optimal to machine precision and is
/// reported as converged.
pub fn minimize<F>(objective: F, x0: Vec<f64>, opts: &BfgsOptions) -> Result<(Vec<f64>, Diagnostics)>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = objective(&x);
    let mut h = identity(n);
    let mut stalled = 0;
    let done = |x: Vec<f64>, fx: f64, g: &[f64], it: usize, reason: StopReason| {
        Ok((
            x,
            Diagnostics {
                iterations: it,
                gradient_norm: max_norm(g),
                objective: fx,
                stop_reason: reason,
                best: Vec::new(),
            },
        ))
    };

    for it in 0..opts.max_iter {
        if max_norm(&g) < opts.grad_tol {
            return done(x, fx, &g, it, StopReason::Gradient);
        }
        let mut d = mat_vec(&h, &g).into_iter().map(|v| -v).collect::<Vec<_>>();
        if dot(&d, &g) >= 0.0 {
            h = identity(n);
            d = g.iter().map(|v| -v).collect();
        }
        let step = match line_search(&objective, &x, fx, &g, &d) {
            Some(s) => s,
            None => {
                // retry once along steepest descent before declaring a stall
                let sd: Vec<f64> = g.iter().map(|v| -v).collect();
                h = identity(n);
                match line_search(&objective, &x, fx, &g, &sd) {
                    Some(s) => s,
                    None => return done(x, fx, &g, it, StopReason::LineSearchStall),
                }
            }
        };
        let (x_new, f_new, g_new) = step;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            bfgs_update(&mut h, &s, &y, sy);
        }
        let improvement = (fx - f_new) / fx.abs().max(1.0);
        stalled = if improvement < opts.rel_tol { stalled + 1 } else { 0 };
        x = x_new;
        fx = f_new;
        g = g_new;
        if stalled >= opts.stall_iters {
            return done(x, fx, &g, it + 1, StopReason::Improvement);
        }
    }
    if max_norm(&g) < opts.grad_tol {
        return done(x, fx, &g, opts.max_iter, StopReason::Gradient);
    }
    Err(Error::NonConvergence(Box::new(Diagnostics {
        iterations: opts.max_iter,
        gradient_norm: max_norm(&g),
        objective: fx,
        stop_reason: StopReason::MaxIterations,
        best: x,
    })))
}

type Step = (Vec<f64>, f64, Vec<f64>);

fn line_search<F>(objective: &F, x: &[f64], fx: f64, g: &[f64], d: &[f64]) -> Option<Step>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    const C1: f64 = 1e-4;
    let slope = dot(g, d);
    if slope >= 0.0 {
        return None;
    }
    let mut alpha = 1.0;
    for _ in 0..60 {
        let xn: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
        let (fnew, gnew) = objective(&xn);
        if fnew.is_finite() && fnew <= fx + C1 * alpha * slope {
            return Some((xn, fnew, gnew));
        }
        alpha *= 0.5;
    }
    None
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// Inverse-Hessian update `H ← (I - ρsyᵀ) H (I - ρysᵀ) + ρssᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

//! BFGS with a weak-Wolfe bisection line search.
//!
//! Steps are only taken when they do not increase the objective, so a
//! warm-started run never ends above its starting value.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BfgsOptions {
    /// Stop when `max_i |grad_i|` falls below this.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Armijo constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Largest allowed `|step|_inf` for a unit step length.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-5, max_iters: 500, c1: 1e-4, c2: 0.9, max_step: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl BfgsResult {
    pub fn grad_inf(&self) -> f64 {
        inf_norm(&self.grad)
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` from `x0`. `f` returns the value and gradient.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if n == 0 {
        return Ok(BfgsResult { x, f: fx, grad: g, iterations: 0, evaluations, converged: true });
    }
    // Inverse Hessian approximation, row-major.
    let mut h = identity(n);
    let mut first = true;
    let mut iterations = 0;
    let mut converged = inf_norm(&g) < opts.grad_tol;
    while !converged && iterations < opts.max_iters {
        iterations += 1;
        let mut d = matvec(&h, &g);
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let dmax = inf_norm(&d);
        if dmax > opts.max_step {
            let k = opts.max_step / dmax;
            d.iter_mut().for_each(|v| *v *= k);
            slope *= k;
        }

        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        let mut alpha = 1.0;
        let mut accepted: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        let mut fallback: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        for _ in 0..60 {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let (ft, gt) = f(&xt)?;
            evaluations += 1;
            let finite = ft.is_finite() && gt.iter().all(|v| v.is_finite());
            if finite && ft <= fx && fallback.as_ref().is_none_or(|b| ft < b.0) {
                fallback = Some((ft, xt.clone(), gt.clone()));
            }
            if !finite || ft > fx + opts.c1 * alpha * slope {
                hi = alpha;
            } else if dot(&gt, &d) < opts.c2 * slope {
                lo = alpha;
            } else {
                accepted = Some((ft, xt, gt));
                break;
            }
            alpha = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * alpha };
            if hi.is_finite() && (hi - lo) < 1e-16 {
                break;
            }
        }
        let Some((fnew, xnew, gnew)) = accepted.or(fallback) else {
            // No non-increasing point along the direction.
            break;
        };
        let s: Vec<f64> = xnew.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if first {
                let scale = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().for_each(|v| *v *= scale);
                first = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        let stalled = s.iter().all(|v| v.abs() == 0.0);
        x = xnew;
        fx = fnew;
        g = gnew;
        converged = inf_norm(&g) < opts.grad_tol;
        if stalled {
            break;
        }
    }
    Ok(BfgsResult { x, f: fx, grad: g, iterations, evaluations, converged })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn matvec(h: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| dot(&h[i * n..(i + 1) * n], v)).collect()
}

/// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy = matvec(h, y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let opts = BfgsOptions { grad_tol: 1e-8, max_iters: 1000, ..Default::default() };
        let r = minimize(f, &[-1.2, 1.0], &opts).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((x[0].cos(), vec![-x[0].sin()])) };
        let r = minimize(f, &[std::f64::consts::PI], &BfgsOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.evaluations, 1);
        assert!(r.converged);
    }

    #[test]
    fn never_increases() {
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let v: f64 = x.iter().map(|t| t.sin() * (3.0 * t).cos()).sum();
            let g = x.iter().map(|t| t.cos() * (3.0 * t).cos() - 3.0 * t.sin() * (3.0 * t).sin()).collect();
            Ok((v, g))
        };
        let x0 = [0.3, -1.2, 2.5];
        let f0 = f(&x0).unwrap().0;
        let r = minimize(f, &x0, &BfgsOptions::default()).unwrap();
        assert!(r.f <= f0);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((f64::NAN, vec![0.0])) };
        assert!(matches!(minimize(f, &[0.0], &BfgsOptions::default()), Err(Error::NonFinite)));
    }
}

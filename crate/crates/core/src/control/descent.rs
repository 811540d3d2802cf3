use nalgebra::{DMatrix, DVector};

use super::{Bounds, Diagnostics, SolveResult, WindowProblem};
use crate::demand::GaussianLaw;
use crate::error::{Error, Result};
use crate::objective::PenaltyParams;
use crate::transport::{ControlSchedule, LineState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    /// Stop once the projected gradient's max-norm is at most this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iter: 500,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

fn projected_grad_norm(x: &[f64], g: &[f64], bounds: &Bounds) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&x, &g)| (x - bounds.project(x - g)).abs())
        .fold(0.0, f64::max)
}

/// Components within `eps` of a bound with the gradient pushing outward.
fn active_set(x: &[f64], g: &[f64], bounds: &Bounds, eps: f64) -> Vec<bool> {
    x.iter()
        .zip(g)
        .map(|(&x, &g)| {
            (x <= bounds.u_min() + eps && g > 0.0) || (bounds.u_max().is_some_and(|hi| x >= hi - eps) && g < 0.0)
        })
        .collect()
}

/// Reduced Hessian `A_Fᵀ D A_F` over the free components.
fn reduced_hessian(cols: &[Vec<f64>], curv: &[f64], free: &[usize]) -> DMatrix<f64> {
    let n = free.len();
    let mut h = DMatrix::zeros(n, n);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate().skip(a) {
            let v: f64 = cols[i].iter().zip(&cols[j]).zip(curv).map(|((p, q), d)| p * q * d).sum();
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    h
}

/// Solves `H d = −g`, adding a growing ridge if `H` is not numerically positive definite.
fn newton_step(h: DMatrix<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_iterator(g.len(), g.iter().map(|v| -v));
    let scale = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d.iter().copied().collect());
            }
        }
        ridge = if ridge == 0.0 { 1e-12 * scale } else { ridge * 100.0 };
    }
    None
}

/// Projected Newton descent on the window's control vector.
///
/// The outputs are affine in the controls, so the exact Hessian is
/// `Aᵀ·diag(Δτ·∂²of_pen/∂y²)·A` with `A` the line's impulse response. Steps
/// are taken on the free components, components held at a bound by the
/// gradient stay there, and an Armijo backtracking search runs along the
/// projected path.
///
/// Non-convergence is reported through [`Diagnostics::converged`], not as
/// an error.
pub fn solve_descent<F>(
    laws: F,
    pen: PenaltyParams,
    bounds: &Bounds,
    z_init: &LineState,
    u0: &ControlSchedule,
    opts: &DescentOptions,
) -> Result<SolveResult>
where
    F: Fn(f64) -> Result<GaussianLaw>,
{
    let grid = z_init.grid();
    if (u0.t_start - z_init.t()).abs() > 1e-9 || (u0.dt - grid.dt()).abs() > 1e-9 * grid.dt() {
        return Err(Error::Misaligned("initial control does not start at the line time".into()));
    }
    let n = u0.values.len();
    let problem = WindowProblem::new(z_init, n, laws, pen)?;
    let cols = problem.response(n)?;
    let mut x: Vec<f64> = u0.values.iter().map(|&v| bounds.project(v)).collect();
    let (mut f, mut g) = problem.value_and_grad(&x)?;
    let mut iterations = 0;
    let mut pg = projected_grad_norm(&x, &g, bounds);
    let mut converged = pg <= opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let y = problem.outputs(&problem.schedule(x.clone())?)?;
        let curv = problem.curvatures(&y);
        let active = active_set(&x, &g, bounds, pg.min(1e-6));
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();

        let mut d = vec![0.0; n];
        let g_free: Vec<f64> = free.iter().map(|&i| g[i]).collect();
        match newton_step(reduced_hessian(&cols, &curv, &free), &g_free) {
            Some(step) => free.iter().zip(step).for_each(|(&i, v)| d[i] = v),
            None => free.iter().for_each(|&i| d[i] = -g[i]),
        }
        // held components move along the scaled negative gradient and are clipped
        for i in (0..n).filter(|&i| active[i]) {
            let hii: f64 = cols[i].iter().zip(&curv).map(|(a, c)| a * a * c).sum();
            d[i] = -g[i] / hii.max(f64::MIN_POSITIVE);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(&xi, &di)| bounds.project(xi + t * di)).collect();
            let predicted: f64 = (0..n)
                .map(|i| if active[i] { g[i] * (x[i] - trial[i]) } else { -t * g[i] * d[i] })
                .sum();
            let (ft, gt) = problem.value_and_grad(&trial)?;
            if ft <= f - opts.armijo * predicted.max(0.0) && ft <= f {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft, gt)) = accepted else {
            break;
        };
        x = trial;
        f = ft;
        g = gt;
        pg = projected_grad_norm(&x, &g, bounds);
        converged = pg <= opts.grad_tol;
    }
    problem.result(
        x,
        Diagnostics {
            iterations,
            grad_norm: pg,
            converged,
        },
    )
}

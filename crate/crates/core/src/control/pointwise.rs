use super::{Bounds, Diagnostics, SolveResult, WindowProblem};
use crate::demand::GaussianLaw;
use crate::error::{Error, Result};
use crate::objective::{of_pen_grad, PenaltyParams};
use crate::transport::LineState;

/// Absolute tolerance on the per-node minimizer.
pub const NODE_TOL: f64 = 1e-10;

const MAX_EXPANSIONS: usize = 200;

/// Minimizer of `of_pen(law, ·)` over the bounds.
///
/// The total is decreasing below the mean (both terms are), so the
/// minimizer lies in `[mean, ∞)`. The bracket is grown until the derivative
/// turns positive and the derivative's sign change is then bisected: value
/// comparisons cannot resolve a flat minimum below `√ε`, sign tests can.
pub fn minimize_node(law: &GaussianLaw, pen: PenaltyParams, bounds: &Bounds) -> Result<f64> {
    if law.variance == 0.0 || pen.alpha() == 0.0 {
        return Ok(bounds.project(law.mean));
    }
    let g = |y: f64| of_pen_grad(law, y, pen);
    let lo = law.mean;
    let mut step = law.std_dev();
    let mut hi = lo + step;
    let mut expansions = 0;
    while g(hi) < 0.0 {
        step *= 2.0;
        hi = lo + step;
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !hi.is_finite() {
            return Err(Error::Solver(format!(
                "could not bracket the node minimizer for law {law:?}"
            )));
        }
    }
    let mut a = bounds.project(lo);
    let mut b = bounds.project(hi);
    if g(a) >= 0.0 {
        return Ok(a);
    }
    if g(b) <= 0.0 {
        return Ok(b);
    }
    while b - a > NODE_TOL * 1e-2 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Per-node minimization exploiting the exact delay at CFL number one.
///
/// Every control step `j` of the window drives exactly the output node
/// `first + j + N`; content already on the line (from `z_init`) only reaches
/// nodes before the window.
pub fn solve_pointwise<F>(
    laws: F,
    pen: PenaltyParams,
    bounds: &Bounds,
    z_init: &LineState,
    n_controls: usize,
) -> Result<SolveResult>
where
    F: Fn(f64) -> Result<GaussianLaw>,
{
    if !z_init.grid().is_exact_shift() {
        return Err(Error::Solver(format!(
            "pointwise decoupling needs CFL number 1, grid has {}",
            z_init.grid().cfl()
        )));
    }
    let problem = WindowProblem::new(z_init, n_controls, laws, pen)?;
    let targets = problem
        .laws
        .iter()
        .map(|l| minimize_node(l, pen, bounds))
        .collect::<Result<Vec<_>>>()?;
    // controls past the last reachable node never affect the objective
    let mut values = targets.clone();
    let last = *values.last().expect("non-empty window");
    values.resize(n_controls, last);
    let (_, grad) = problem.value_and_grad(&values)?;
    let grad_norm = values
        .iter()
        .zip(&grad)
        .map(|(&x, &g)| (x - bounds.project(x - g)).abs())
        .fold(0.0, f64::max);
    problem.result(
        values,
        Diagnostics {
            iterations: 1,
            grad_norm,
            converged: true,
        },
    )
}

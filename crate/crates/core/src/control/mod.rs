//! Optimal inflow control on the discretized line.
//!
//! The objective over a window of output nodes `s_k = kΔτ` is the rectangle
//! rule `Σ Δτ·of_pen(law(s_k), y(s_k))`, where `y` is produced by running the
//! inflow schedule through the upwind line. Controls are piecewise constant
//! per `Δτ` step, so at CFL number one `y(s_k) = u_{k − N}` with `N` the
//! transit time in steps, and the problem splits into independent scalar
//! problems per node ([`solve_pointwise`]). [`solve_descent`] solves the
//! coupled problem directly and serves as the cross-check and as the only
//! solver for grids with CFL number below one.

mod descent;
mod methods;
mod pointwise;

pub use descent::{solve_descent, DescentOptions};
pub use methods::{post_horizon_independent, solve_cm1, solve_cm1_with, solve_cm2, solve_cm2_with, SolverChoice};
pub use pointwise::{minimize_node, solve_pointwise, NODE_TOL};

use crate::demand::GaussianLaw;
use crate::error::{Error, Result};
use crate::objective::{of_pen, of_pen_curvature, of_pen_grad, PenaltyParams};
use crate::transport::{run_schedule, ControlSchedule, GridSpec, LineState};

/// Optimization horizon `[0, T]` and the transit time `1/λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    horizon: f64,
    lambda: f64,
}

impl Horizon {
    pub fn new(horizon: f64, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", "lambda > 0 required"));
        }
        if !(horizon > 1.0 / lambda) {
            return Err(Error::HorizonTooShort {
                horizon,
                transit: 1.0 / lambda,
            });
        }
        Ok(Self { horizon, lambda })
    }

    pub fn from_grid(grid: &GridSpec) -> Result<Self> {
        Self::new(grid.horizon(), grid.lambda())
    }

    pub fn end(&self) -> f64 {
        self.horizon
    }
    pub fn transit(&self) -> f64 {
        1.0 / self.lambda
    }
    /// Last time at which inflow can still reach the outlet by `T`.
    pub fn control_end(&self) -> f64 {
        self.horizon - self.transit()
    }
}

/// Grid step counts derived from a grid/horizon pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct StepLayout {
    /// Transit time in steps.
    pub transit: usize,
    /// Number of control steps in `[0, T − 1/λ)`.
    pub controls: usize,
    pub n_steps: usize,
}

impl StepLayout {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        let h = Horizon::from_grid(grid)?;
        let transit = grid.step_of(h.transit()).map_err(|_| {
            Error::Grid(format!("transit time 1/lambda = {} is not a multiple of dt", h.transit()))
        })?;
        Ok(Self {
            transit,
            controls: grid.n_steps() - transit,
            n_steps: grid.n_steps(),
        })
    }
}

/// Box constraints on the inflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    u_min: f64,
    u_max: Option<f64>,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            u_min: 0.0,
            u_max: None,
        }
    }
}

impl Bounds {
    pub fn new(u_min: f64, u_max: Option<f64>) -> Result<Self> {
        if u_min.is_nan() || u_min == f64::INFINITY {
            return Err(Error::param("u_min", "must be a number below +inf"));
        }
        if let Some(hi) = u_max {
            if hi.is_nan() || hi < u_min {
                return Err(Error::param("u_max", "u_min <= u_max required"));
            }
        }
        Ok(Self { u_min, u_max })
    }

    pub fn unbounded() -> Self {
        Self {
            u_min: f64::NEG_INFINITY,
            u_max: None,
        }
    }

    pub fn u_min(&self) -> f64 {
        self.u_min
    }
    pub fn u_max(&self) -> Option<f64> {
        self.u_max
    }
    fn upper(&self) -> f64 {
        self.u_max.unwrap_or(f64::INFINITY)
    }

    pub fn project(&self, x: f64) -> f64 {
        x.max(self.u_min).min(self.upper())
    }
}

/// Update times `0 = t̂_0 < t̂_1 < … ≤ T − 1/λ` for receding-horizon control.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateSchedule {
    times: Vec<f64>,
}

impl UpdateSchedule {
    pub fn new(times: Vec<f64>, grid: &GridSpec) -> Result<Self> {
        let h = Horizon::from_grid(grid)?;
        if times.first() != Some(&0.0) {
            return Err(Error::param("update_times", "first update time must be 0"));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::param(
                "update_times",
                format!("update times must be strictly increasing (index {})", i + 1),
            ));
        }
        for &t in &times {
            grid.step_of(t)
                .map_err(|_| Error::param("update_times", format!("{t} is not a multiple of dt")))?;
            if t > h.control_end() + 1e-9 {
                return Err(Error::param(
                    "update_times",
                    format!("{t} exceeds the control horizon end {}", h.control_end()),
                ));
            }
        }
        Ok(Self { times })
    }

    /// `n` equal subintervals of `[0, T − 1/λ]`, updating at the start of each.
    pub fn uniform(n: usize, grid: &GridSpec) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("update_intervals", "at least one interval required"));
        }
        let layout = StepLayout::new(grid)?;
        if layout.controls % n != 0 {
            return Err(Error::param(
                "update_intervals",
                format!("{} control steps do not split into {n} equal parts", layout.controls),
            ));
        }
        let per = layout.controls / n;
        Self::new((0..n).map(|i| grid.time(i * per)).collect(), grid)
    }

    /// Only the initial time: no re-conditioning.
    pub fn single() -> Self {
        Self { times: vec![0.0] }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Most recent update time at or before `t`.
    pub fn latest_before(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&x| x <= t + 1e-9);
        self.times[i.saturating_sub(1)]
    }
}

/// Output nodes (grid step indices) entering the objective: `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectiveWindow {
    pub start: usize,
    pub end: usize,
}

impl ObjectiveWindow {
    /// Nodes reached by controls on steps `[first, first + n)`.
    pub fn for_controls(grid: &GridSpec, first: usize, n: usize) -> Result<Self> {
        let layout = StepLayout::new(grid)?;
        let start = first + layout.transit;
        let end = (first + n + layout.transit).min(layout.n_steps);
        if start >= end {
            return Err(Error::Misaligned(format!(
                "controls starting at step {first} reach no node before T"
            )));
        }
        Ok(Self { start, end })
    }

    /// `[1/λ, T)`: every node the full control horizon reaches.
    pub fn full(grid: &GridSpec) -> Result<Self> {
        let layout = StepLayout::new(grid)?;
        Self::for_controls(grid, 0, layout.controls)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn steps(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Max-norm of the projected gradient at the returned control.
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub schedule: ControlSchedule,
    /// Node times `s_k`.
    pub nodes: Vec<f64>,
    pub output_trace: Vec<f64>,
    /// Demand law used at each node.
    pub laws: Vec<GaussianLaw>,
    pub objective_value: f64,
    pub diagnostics: Diagnostics,
}

/// A window problem with laws evaluated once per node.
pub(crate) struct WindowProblem<'a> {
    pub z_init: &'a LineState,
    pub window: ObjectiveWindow,
    pub laws: Vec<GaussianLaw>,
    pub pen: PenaltyParams,
}

impl<'a> WindowProblem<'a> {
    pub fn new<F>(z_init: &'a LineState, n_controls: usize, laws: F, pen: PenaltyParams) -> Result<Self>
    where
        F: Fn(f64) -> Result<GaussianLaw>,
    {
        let grid = z_init.grid();
        let window = ObjectiveWindow::for_controls(grid, z_init.step_index(), n_controls)?;
        Self::with_window(z_init, n_controls, window, laws, pen)
    }

    pub fn with_window<F>(
        z_init: &'a LineState,
        n_controls: usize,
        window: ObjectiveWindow,
        laws: F,
        pen: PenaltyParams,
    ) -> Result<Self>
    where
        F: Fn(f64) -> Result<GaussianLaw>,
    {
        if n_controls == 0 {
            return Err(Error::param("u", "no control steps"));
        }
        if window.start <= z_init.step_index() {
            return Err(Error::Misaligned("objective window starts before the first update".into()));
        }
        if window.end > z_init.grid().n_steps() {
            return Err(Error::PastHorizon(window.end));
        }
        let grid = z_init.grid();
        let laws = window.steps().map(|k| laws(grid.time(k))).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            z_init,
            window,
            laws,
            pen,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.z_init.grid()
    }

    pub fn first_step(&self) -> usize {
        self.z_init.step_index()
    }

    pub fn schedule(&self, values: Vec<f64>) -> Result<ControlSchedule> {
        ControlSchedule::new(self.grid().time(self.first_step()), self.grid().dt(), values)
    }

    pub fn node_times(&self) -> Vec<f64> {
        self.window.steps().map(|k| self.grid().time(k)).collect()
    }

    /// Outputs at the window nodes.
    pub fn outputs(&self, u: &ControlSchedule) -> Result<Vec<f64>> {
        let t_end = self.grid().time(self.window.end - 1);
        let (_, trace) = run_schedule(self.z_init, u, t_end)?;
        // trace[i] is the output after step first + i + 1
        let offset = self.first_step() + 1;
        Ok(trace[self.window.start - offset..].to_vec())
    }

    pub fn value_of_outputs(&self, y: &[f64]) -> f64 {
        let dt = self.grid().dt();
        self.laws
            .iter()
            .zip(y)
            .map(|(l, &y)| dt * of_pen(l, y, self.pen).total)
            .sum()
    }

    #[cfg(test)]
    pub fn value(&self, u: &[f64]) -> Result<f64> {
        let y = self.outputs(&self.schedule(u.to_vec())?)?;
        Ok(self.value_of_outputs(&y))
    }

    /// Objective and gradient with respect to the control vector.
    ///
    /// The gradient is the adjoint of the upwind recursion applied to the
    /// per-node derivatives `Δτ·∂of_pen/∂y`; inflow held past the last
    /// control accumulates onto the last component.
    pub fn value_and_grad(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let y = self.outputs(&self.schedule(u.to_vec())?)?;
        let value = self.value_of_outputs(&y);
        let grid = self.grid();
        let dt = grid.dt();
        let c = grid.cfl();
        let keep = 1.0 - c;
        let n_cells = grid.n_cells();
        let first = self.first_step();
        let mut costate = vec![0.0; n_cells];
        let mut grad = vec![0.0; u.len()];
        for k in (first + 1..self.window.end).rev() {
            if k >= self.window.start {
                let i = k - self.window.start;
                costate[n_cells - 1] += dt * of_pen_grad(&self.laws[i], y[i], self.pen);
            }
            // step k−1 → k consumed inflow value number k−1−first
            let slot = (k - 1 - first).min(u.len() - 1);
            grad[slot] += c * costate[0];
            for j in 0..n_cells - 1 {
                costate[j] = keep * costate[j] + c * costate[j + 1];
            }
            costate[n_cells - 1] *= keep;
        }
        Ok((value, grad))
    }

    /// Per-node second derivatives `Δτ·∂²of_pen/∂y²` at outputs `y`.
    pub fn curvatures(&self, y: &[f64]) -> Vec<f64> {
        let dt = self.grid().dt();
        self.laws
            .iter()
            .zip(y)
            .map(|(l, &y)| dt * of_pen_curvature(l, y, self.pen))
            .collect()
    }

    /// Columns `∂y/∂u_j` of the (affine) control-to-output map.
    pub fn response(&self, n_controls: usize) -> Result<Vec<Vec<f64>>> {
        let base = self.outputs(&self.schedule(vec![0.0; n_controls])?)?;
        (0..n_controls)
            .map(|j| {
                let mut e = vec![0.0; n_controls];
                e[j] = 1.0;
                let y = self.outputs(&self.schedule(e)?)?;
                Ok(y.iter().zip(&base).map(|(a, b)| a - b).collect())
            })
            .collect()
    }

    pub fn result(&self, values: Vec<f64>, diagnostics: Diagnostics) -> Result<SolveResult> {
        let schedule = self.schedule(values)?;
        let output_trace = self.outputs(&schedule)?;
        let objective_value = self.value_of_outputs(&output_trace);
        Ok(SolveResult {
            schedule,
            nodes: self.node_times(),
            output_trace,
            laws: self.laws.clone(),
            objective_value,
            diagnostics,
        })
    }
}

/// Rectangle-rule objective `Σ_k Δτ·of_pen(law(s_k), y(s_k))` over `window`,
/// with `y` obtained by running `u` from `z_init`.
pub fn objective_functional<F>(
    u: &ControlSchedule,
    laws: F,
    pen: PenaltyParams,
    z_init: &LineState,
    window: ObjectiveWindow,
) -> Result<f64>
where
    F: Fn(f64) -> Result<GaussianLaw>,
{
    let problem = WindowProblem::with_window(z_init, u.values.len(), window, laws, pen)?;
    let y = problem.outputs(u)?;
    Ok(problem.value_of_outputs(&y))
}

use serde::{Deserialize, Serialize};

use super::{
    objective_functional, solve_descent, solve_pointwise, Bounds, DescentOptions, Diagnostics, ObjectiveWindow,
    SolveResult, StepLayout, UpdateSchedule,
};
use crate::demand::{law, DemandPath, GaussianLaw, OUParams};
use crate::error::{Error, Result};
use crate::objective::PenaltyParams;
use crate::transport::{run_schedule, ControlSchedule, GridSpec, LineState};

/// Which solver handles each window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Pointwise at CFL number one, descent otherwise.
    #[default]
    Auto,
    Pointwise,
    Descent,
}

fn solve_window<F>(
    laws: F,
    pen: PenaltyParams,
    bounds: &Bounds,
    line: &LineState,
    n_controls: usize,
    choice: SolverChoice,
) -> Result<SolveResult>
where
    F: Fn(f64) -> Result<GaussianLaw>,
{
    let pointwise = match choice {
        SolverChoice::Auto => line.grid().is_exact_shift(),
        SolverChoice::Pointwise => true,
        SolverChoice::Descent => false,
    };
    if pointwise {
        return solve_pointwise(laws, pen, bounds, line, n_controls);
    }
    // start from the projected mean of the node each control feeds
    let grid = *line.grid();
    let window = ObjectiveWindow::for_controls(&grid, line.step_index(), n_controls)?;
    let u0 = (0..n_controls)
        .map(|j| {
            let k = (window.start + j).min(window.end - 1);
            laws(grid.time(k)).map(|l| bounds.project(l.mean))
        })
        .collect::<Result<Vec<_>>>()?;
    let u0 = ControlSchedule::new(line.t(), grid.dt(), u0)?;
    let r = solve_descent(laws, pen, bounds, line, &u0, &DescentOptions::default())?;
    if !r.diagnostics.converged {
        return Err(Error::Solver(format!(
            "descent stopped after {} iterations with projected gradient {:e}",
            r.diagnostics.iterations, r.diagnostics.grad_norm
        )));
    }
    Ok(r)
}

/// Open-loop control from the time-0 demand law over the full horizon.
pub fn solve_cm1(p: &OUParams, pen: PenaltyParams, grid: &GridSpec, bounds: &Bounds) -> Result<SolveResult> {
    solve_cm1_with(p, pen, grid, bounds, SolverChoice::Auto)
}

pub fn solve_cm1_with(
    p: &OUParams,
    pen: PenaltyParams,
    grid: &GridSpec,
    bounds: &Bounds,
    choice: SolverChoice,
) -> Result<SolveResult> {
    let layout = StepLayout::new(grid)?;
    let line = LineState::new(*grid);
    solve_window(|s| law(p, 0.0, p.y0(), s), pen, bounds, &line, layout.controls, choice)
}

/// Receding-horizon control re-conditioned on `path` at each update time.
///
/// Window `i` controls `[t̂_i, t̂_{i+1})` and is scored on the nodes those
/// controls reach; the line content left by earlier windows is carried
/// forward. Only the path's values at update times are read.
pub fn solve_cm2(
    p: &OUParams,
    pen: PenaltyParams,
    grid: &GridSpec,
    bounds: &Bounds,
    sched: &UpdateSchedule,
    path: &DemandPath,
) -> Result<SolveResult> {
    solve_cm2_with(p, pen, grid, bounds, sched, path, SolverChoice::Auto)
}

pub fn solve_cm2_with(
    p: &OUParams,
    pen: PenaltyParams,
    grid: &GridSpec,
    bounds: &Bounds,
    sched: &UpdateSchedule,
    path: &DemandPath,
    choice: SolverChoice,
) -> Result<SolveResult> {
    let layout = StepLayout::new(grid)?;
    let observed = sched
        .times()
        .iter()
        .map(|&t| path.value_at(t).ok_or(Error::MissingUpdateValue(t)))
        .collect::<Result<Vec<_>>>()?;
    let mut starts = sched
        .times()
        .iter()
        .map(|&t| grid.step_of(t))
        .collect::<Result<Vec<_>>>()?;
    starts.push(layout.controls);

    let mut line = LineState::new(*grid);
    let mut values = Vec::with_capacity(layout.controls);
    let mut nodes = Vec::new();
    let mut output_trace = Vec::new();
    let mut laws = Vec::new();
    let mut objective_value = 0.0;
    let mut diagnostics = Diagnostics {
        iterations: 0,
        grad_norm: 0.0,
        converged: true,
    };
    for (i, w) in starts.windows(2).enumerate() {
        let (first, next) = (w[0], w[1]);
        if next <= first {
            continue;
        }
        let (t_i, y_i) = (sched.times()[i], observed[i]);
        let r = solve_window(|s| law(p, t_i, y_i, s), pen, bounds, &line, next - first, choice)?;
        let applied = ControlSchedule::new(line.t(), grid.dt(), r.schedule.values[..next - first].to_vec())?;
        line = run_schedule(&line, &applied, grid.time(next))?.0;
        values.extend_from_slice(&applied.values);
        nodes.extend(r.nodes);
        output_trace.extend(r.output_trace);
        laws.extend(r.laws);
        objective_value += r.objective_value;
        diagnostics.iterations += r.diagnostics.iterations;
        diagnostics.grad_norm = diagnostics.grad_norm.max(r.diagnostics.grad_norm);
        diagnostics.converged &= r.diagnostics.converged;
    }
    Ok(SolveResult {
        schedule: ControlSchedule::new(0.0, grid.dt(), values)?,
        nodes,
        output_trace,
        laws,
        objective_value,
        diagnostics,
    })
}

/// Whether replacing the inflow after the end of `u` by `tail_value` leaves
/// the objective over `window` unchanged (to `1e-13`).
pub fn post_horizon_independent<F>(
    u: &ControlSchedule,
    tail_value: f64,
    laws: F,
    pen: PenaltyParams,
    z_init: &LineState,
    window: ObjectiveWindow,
) -> Result<bool>
where
    F: Fn(f64) -> Result<GaussianLaw>,
{
    let grid = z_init.grid();
    let remaining = grid.n_steps().saturating_sub(z_init.step_index() + u.values.len());
    let mut extended = u.values.clone();
    extended.extend(std::iter::repeat_n(tail_value, remaining));
    let extended = ControlSchedule::new(u.t_start, u.dt, extended)?;
    let base = objective_functional(u, &laws, pen, z_init, window)?;
    let tail = objective_functional(&extended, &laws, pen, z_init, window)?;
    Ok((base - tail).abs() <= 1e-13)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{simulate_path, MeanFunction, PathSeed};

    #[test]
    fn degenerate_demand_gives_constant_control() {
        let g = GridSpec::case_study();
        let p = OUParams::new(3.0, 1e-9, 2.0, MeanFunction::constant(2.0)).unwrap();
        let r = solve_cm1(&p, PenaltyParams::none(), &g, &Bounds::default()).unwrap();
        assert!(r.schedule.values.iter().all(|&u| (u - 2.0).abs() < 1e-12));
        assert!(r.objective_value < 1e-16);
    }

    #[test]
    fn single_update_cm2_equals_cm1() {
        let g = GridSpec::case_study();
        let p = OUParams::case_study();
        let pen = PenaltyParams::new(1.0).unwrap();
        let path = simulate_path(&p, &g.times(), p.y0(), PathSeed::new(3, 0)).unwrap();
        let a = solve_cm1(&p, pen, &g, &Bounds::default()).unwrap();
        let b = solve_cm2(&p, pen, &g, &Bounds::default(), &UpdateSchedule::single(), &path).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_update_value_is_rejected() {
        let g = GridSpec::case_study();
        let p = OUParams::case_study();
        let sched = UpdateSchedule::uniform(5, &g).unwrap();
        let coarse = simulate_path(&p, &[0.0, 0.5, 1.0], 1.0, PathSeed::new(0, 0)).unwrap();
        let err = solve_cm2(&p, PenaltyParams::none(), &g, &Bounds::default(), &sched, &coarse).unwrap_err();
        assert!(matches!(err, Error::MissingUpdateValue(_)));
    }

    #[test]
    fn post_horizon_inflow_is_irrelevant() {
        let g = GridSpec::case_study();
        let p = OUParams::case_study();
        let provider = |s: f64| law(&p, 0.0, 1.0, s);
        let line = LineState::new(g);
        let w = ObjectiveWindow::full(&g).unwrap();
        let pen = PenaltyParams::new(1.0).unwrap();
        let u = ControlSchedule::new(0.0, g.dt(), (0..30).map(|i| 1.0 + 0.1 * i as f64).collect()).unwrap();
        for tail in [0.0, 1e6] {
            assert!(post_horizon_independent(&u, tail, provider, pen, &line, w).unwrap());
        }
        // a schedule ending early leaves part of the window to the tail
        let short = ControlSchedule::new(0.0, g.dt(), u.values[..20].to_vec()).unwrap();
        assert!(!post_horizon_independent(&short, 1e6, provider, pen, &line, w).unwrap());
    }
}

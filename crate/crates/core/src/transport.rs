//! Linear advection `z_t + λ z_x = 0` on `x ∈ (0, 1)` with inflow `z(0, t) = u(t)`,
//! discretized by the first-order upwind scheme
//!
//! ```text
//! z_j ← (1 − c)·z_j + c·z_{j−1},   c = λΔτ/Δx,   z_{−1} = u(t)
//! ```
//!
//! At `c = 1` the update is an exact shift by one cell per step, so the
//! output `y(t) = z(1, t)` reproduces the delay map `y(t) = u(t − 1/λ)`
//! without discretization error.

use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-9;

/// Space/time discretization of the unit-length line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dx: f64,
    lambda: f64,
    dt: f64,
    horizon: f64,
    n_cells: usize,
    n_steps: usize,
    cfl: f64,
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > ALIGN_TOL * n.max(1.0) {
        return Err(Error::Grid(format!("{what} = {r} is not a positive integer")));
    }
    Ok(n as usize)
}

impl GridSpec {
    pub fn new(dx: f64, lambda: f64, dt: f64, horizon: f64) -> Result<Self> {
        for (name, v) in [("dx", dx), ("lambda", lambda), ("dt", dt), ("horizon", horizon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Grid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let n_cells = integer_ratio(1.0, dx, "1/dx")?;
        let n_steps = integer_ratio(horizon, dt, "T/dt")?;
        let mut cfl = lambda * dt / dx;
        if (cfl - 1.0).abs() <= 1e-12 {
            cfl = 1.0;
        }
        if cfl > 1.0 {
            return Err(Error::Grid(format!("CFL number {cfl} exceeds 1")));
        }
        Ok(Self {
            dx,
            lambda,
            dt,
            horizon,
            n_cells,
            n_steps,
            cfl,
        })
    }

    /// Grid with `Δτ = Δx/λ`, i.e. CFL number exactly one.
    pub fn exact_shift(dx: f64, lambda: f64, horizon: f64) -> Result<Self> {
        Self::new(dx, lambda, dx / lambda, horizon)
    }

    /// `Δx = 0.1`, `λ = 4`, `Δτ = 0.025`, `T = 1`.
    pub fn case_study() -> Self {
        Self::exact_shift(0.1, 4.0, 1.0).expect("valid constants")
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }
    pub fn cfl(&self) -> f64 {
        self.cfl
    }

    pub fn is_exact_shift(&self) -> bool {
        self.cfl == 1.0
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// Grid index of `t`, rejecting times that are not multiples of `Δτ`.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let r = t / self.dt;
        let k = r.round();
        if k < 0.0 || (r - k).abs() > ALIGN_TOL * k.max(1.0) {
            return Err(Error::Misaligned(format!("t = {t} is not a multiple of dt = {}", self.dt)));
        }
        Ok(k as usize)
    }

    /// Every grid time `0, Δτ, …, T`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}

/// Piecewise-constant inflow: `values[k]` holds on `[t_start + kΔτ, t_start + (k+1)Δτ)`.
/// Past the last value the final value is held.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub t_start: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl ControlSchedule {
    pub fn new(t_start: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("u", "control schedule is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("u", "control values must be finite"));
        }
        Ok(Self { t_start, dt, values })
    }

    /// Value applied on the step starting `k` steps after `t_start`.
    pub fn value_at_offset(&self, k: usize) -> f64 {
        self.values[k.min(self.values.len() - 1)]
    }

    /// Value at time `t` (right-continuous, held after the end).
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let r = (t - self.t_start) / self.dt + ALIGN_TOL;
        if r < 0.0 {
            return None;
        }
        Some(self.value_at_offset(r.floor() as usize))
    }

    fn start_step(&self, grid: &GridSpec) -> Result<usize> {
        if (self.dt - grid.dt).abs() > ALIGN_TOL * grid.dt {
            return Err(Error::Misaligned(format!(
                "schedule step {} differs from grid step {}",
                self.dt, grid.dt
            )));
        }
        grid.step_of(self.t_start)
    }
}

/// Content of the line at one grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct LineState {
    grid: GridSpec,
    z: Vec<f64>,
    step: usize,
}

impl LineState {
    /// Empty line at `t = 0`.
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            z: vec![0.0; grid.n_cells],
            step: 0,
        }
    }

    /// Line with given cell values at grid step `step`.
    pub fn from_cells(grid: GridSpec, z: Vec<f64>, step: usize) -> Result<Self> {
        if z.len() != grid.n_cells {
            return Err(Error::Grid(format!("expected {} cells, got {}", grid.n_cells, z.len())));
        }
        if step > grid.n_steps {
            return Err(Error::PastHorizon(step));
        }
        Ok(Self { grid, z, step })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn cells(&self) -> &[f64] {
        &self.z
    }
    pub fn step_index(&self) -> usize {
        self.step
    }
    pub fn t(&self) -> f64 {
        self.grid.time(self.step)
    }

    /// Outlet value `y(t) = z(1, t)`.
    pub fn output(&self) -> f64 {
        *self.z.last().expect("at least one cell")
    }

    /// Advances one step with inflow `inflow` on the ghost cell left of `x = 0`.
    pub fn step(&mut self, inflow: f64) -> Result<()> {
        if self.step >= self.grid.n_steps {
            return Err(Error::PastHorizon(self.step));
        }
        let c = self.grid.cfl;
        let keep = 1.0 - c;
        // right to left so every cell still sees its left neighbour's old value
        for j in (1..self.z.len()).rev() {
            self.z[j] = keep * self.z[j] + c * self.z[j - 1];
        }
        self.z[0] = keep * self.z[0] + c * inflow;
        self.step += 1;
        Ok(())
    }
}

/// Runs `u` from `state` until `t_end`; returns the final state and the
/// output after every step.
pub fn run_schedule(state: &LineState, u: &ControlSchedule, t_end: f64) -> Result<(LineState, Vec<f64>)> {
    let grid = state.grid;
    let start = u.start_step(&grid)?;
    if start > state.step {
        return Err(Error::Misaligned(format!(
            "schedule starts at {} after the line time {}",
            u.t_start,
            state.t()
        )));
    }
    let end = grid.step_of(t_end)?;
    if end > grid.n_steps {
        return Err(Error::PastHorizon(end));
    }
    if end < state.step {
        return Err(Error::Misaligned(format!("t_end = {t_end} precedes line time {}", state.t())));
    }
    let mut line = state.clone();
    let mut trace = Vec::with_capacity(end - state.step);
    for k in state.step..end {
        line.step(u.value_at_offset(k - start))?;
        trace.push(line.output());
    }
    Ok((line, trace))
}

/// Exact outlet value of the continuous problem with empty initial line:
/// `u(s − 1/λ)`.
pub fn delay_oracle(u: &ControlSchedule, lambda: f64, s: f64) -> Result<f64> {
    let transit = 1.0 / lambda;
    if s < transit - ALIGN_TOL {
        return Err(Error::TimeOrder { t0: transit, s });
    }
    u.value_at(s - transit)
        .ok_or_else(|| Error::Misaligned(format!("schedule undefined at t = {}", s - transit)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_study_grid() {
        let g = GridSpec::case_study();
        assert_eq!(g.n_cells(), 10);
        assert_eq!(g.n_steps(), 40);
        assert!(g.is_exact_shift());
        let line = LineState::new(g);
        assert_eq!(line.cells(), &[0.0; 10]);
        assert_eq!(line.t(), 0.0);
    }

    #[test]
    fn invalid_grids() {
        assert!(matches!(GridSpec::new(0.5, 1.0, 1.0, 2.0), Err(Error::Grid(m)) if m.contains("CFL")));
        assert!(GridSpec::new(0.3, 1.0, 0.1, 1.0).is_err());
        assert!(GridSpec::new(0.1, 4.0, 0.025, 1.01).is_err());
        assert!(GridSpec::new(0.1, -4.0, 0.025, 1.0).is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let mut line = LineState::new(GridSpec::case_study());
        line.step(0.0).unwrap();
        assert_eq!(line.cells(), &[0.0; 10]);
        assert_eq!(line.step_index(), 1);
        assert_eq!(line.output(), 0.0);
    }

    #[test]
    fn unit_cfl_is_a_pure_shift() {
        let g = GridSpec::case_study();
        let z: Vec<f64> = (0..10).map(|j| (j as f64).sin() * 1e3 + 0.1).collect();
        let mut line = LineState::from_cells(g, z.clone(), 3).unwrap();
        line.step(42.0).unwrap();
        assert_eq!(line.cells()[0], 42.0);
        assert_eq!(&line.cells()[1..], &z[..9]);
    }

    #[test]
    fn constants_are_preserved_below_unit_cfl() {
        let g = GridSpec::new(0.1, 4.0, 0.0125, 1.0).unwrap();
        assert_eq!(g.cfl(), 0.5);
        let mut line = LineState::from_cells(g, vec![1.0; 10], 0).unwrap();
        line.step(1.0).unwrap();
        assert_eq!(line.cells(), &[1.0; 10]);
    }

    #[test]
    fn cannot_step_past_horizon() {
        let g = GridSpec::case_study();
        let mut line = LineState::from_cells(g, vec![0.0; 10], 40).unwrap();
        assert_eq!(line.step(1.0), Err(Error::PastHorizon(40)));
    }

    #[test]
    fn output_after_transit() {
        let g = GridSpec::case_study();
        let mut line = LineState::new(g);
        for k in 0..10 {
            assert_eq!(line.output(), 0.0, "step {k}");
            line.step(3.5).unwrap();
        }
        assert_eq!(line.output(), 3.5);
    }

    #[test]
    fn linear_ramp_is_delayed_exactly() {
        let g = GridSpec::case_study();
        let u = ControlSchedule::new(0.0, g.dt(), (0..30).map(|k| g.time(k)).collect()).unwrap();
        let (end, trace) = run_schedule(&LineState::new(g), &u, 1.0).unwrap();
        assert_eq!(end.step_index(), 40);
        for (i, y) in trace.iter().enumerate() {
            let k = i + 1;
            let want = if k >= 10 { g.time((k - 10).min(29)) } else { 0.0 };
            assert_eq!(*y, want, "k = {k}");
        }
    }

    #[test]
    fn zero_schedule_gives_zero_trace() {
        let g = GridSpec::case_study();
        let u = ControlSchedule::new(0.0, g.dt(), vec![0.0; 30]).unwrap();
        let (_, trace) = run_schedule(&LineState::new(g), &u, 1.0).unwrap();
        assert!(trace.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn misaligned_schedules_are_rejected() {
        let g = GridSpec::case_study();
        let line = LineState::new(g);
        let wrong_dt = ControlSchedule::new(0.0, 0.05, vec![1.0]).unwrap();
        assert!(matches!(run_schedule(&line, &wrong_dt, 1.0), Err(Error::Misaligned(_))));
        let off_grid = ControlSchedule::new(0.01, g.dt(), vec![1.0]).unwrap();
        assert!(run_schedule(&line, &off_grid, 1.0).is_err());
        let ok = ControlSchedule::new(0.0, g.dt(), vec![1.0]).unwrap();
        assert!(run_schedule(&line, &ok, 0.0123).is_err());
        assert!(matches!(run_schedule(&line, &ok, 1.1), Err(Error::PastHorizon(44))));
    }

    #[test]
    fn delay_oracle_examples() {
        let c = ControlSchedule::new(0.0, 0.025, vec![2.5; 30]).unwrap();
        for s in [0.25, 0.6, 1.0] {
            assert_eq!(delay_oracle(&c, 4.0, s).unwrap(), 2.5);
        }
        let ramp = ControlSchedule::new(0.0, 0.025, (0..30).map(|k| k as f64 * 0.025).collect()).unwrap();
        assert_eq!(delay_oracle(&ramp, 4.0, 0.5).unwrap(), 0.25);
        assert!(delay_oracle(&ramp, 4.0, 0.2).is_err());
    }
}

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde_json::{json, Value};
use thiserror::Error;

use super::config::{ConfigError, RunConfig};
use super::csv::{write_csv, Cell, CsvTable};
use crate::control::{
    solve_cm1_with, solve_cm2_with, solve_descent, solve_pointwise, DescentOptions, SolveResult, StepLayout,
};
use crate::demand::{band_of, conditional_mean, law, GaussianLaw, PathSeed};
use crate::error::Error;
use crate::montecarlo::{band_data, compare_policies, run_study, study_path, BandTable, MCStudy, Policy};
use crate::objective::{of_pen, of_pen_grad, partial_sq_moment, PenaltyParams};
use crate::quadrature::Simpson;
use crate::transport::{delay_oracle, run_schedule, ControlSchedule, GridSpec, LineState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Mc,
    Figures,
    Selfcheck,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("self-check failed: {}", .0.join(", "))]
    Checks(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Run(e) if e.is_validation() => 1,
            CliError::Run(_) | CliError::Checks(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    /// Machine-readable record written to stderr.
    pub fn record(&self) -> Value {
        let kind = match self.exit_code() {
            1 => "validation",
            2 => "solver",
            _ => "io",
        };
        let mut r = json!({ "error": kind, "exit_code": self.exit_code(), "message": self.to_string() });
        match self {
            CliError::Config(e) => {
                if let Some(k) = e.key() {
                    r["key"] = json!(k);
                }
            }
            CliError::Io { path, .. } => r["path"] = json!(path.display().to_string()),
            CliError::Run(Error::Path { index, .. }) => r["path_index"] = json!(index),
            _ => {}
        }
        r
    }
}

/// Files written by a command plus a human-readable summary.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn level_columns(levels: &[f64]) -> Vec<String> {
    levels
        .iter()
        .flat_map(|q| [format!("band_lo_{q}"), format!("band_hi_{q}")])
        .collect()
}

fn push_bands(row: &mut Vec<Cell>, l: &GaussianLaw, levels: &[f64]) {
    for &q in levels {
        let (lo, hi) = band_of(l, q);
        row.push(lo.into());
        row.push(hi.into());
    }
}

/// One row per objective node. `u` is the inflow that reaches the outlet at
/// `t`, i.e. the control applied one transit time earlier.
pub fn trace_table(r: &SolveResult, grid: &GridSpec, levels: &[f64]) -> Result<CsvTable, Error> {
    let layout = StepLayout::new(grid)?;
    let mut cols: Vec<String> = ["t", "u", "y", "mean_demand"].map(String::from).to_vec();
    cols.extend(level_columns(levels));
    let mut table = CsvTable::new("trace", cols);
    for ((&t, &y), l) in r.nodes.iter().zip(&r.output_trace).zip(&r.laws) {
        let k = grid.step_of(t)?;
        let u = r.schedule.value_at_offset(k - layout.transit);
        let mut row = vec![t.into(), u.into(), y.into(), l.mean.into()];
        push_bands(&mut row, l, levels);
        table.push(row);
    }
    Ok(table)
}

pub fn undersupply_table(s: &MCStudy) -> CsvTable {
    let mut table = CsvTable::new("undersupply", ["t", "count", "avg_undersupply"].map(String::from).to_vec());
    for ((&t, &c), &a) in s.times.iter().zip(&s.undersupply_count).zip(&s.avg_undersupply) {
        table.push(vec![t.into(), c.into(), a.into()]);
    }
    table
}

pub fn band_table(b: &BandTable) -> CsvTable {
    let mut cols: Vec<String> = ["t", "demand", "mean_demand"].map(String::from).to_vec();
    cols.extend(level_columns(&b.levels));
    let mut table = CsvTable::new("bands", cols);
    for (i, &t) in b.times.iter().enumerate() {
        let mut row = vec![t.into(), b.path_values[i].into(), b.means[i].into()];
        for &(lo, hi) in &b.bands[i] {
            row.push(lo.into());
            row.push(hi.into());
        }
        table.push(row);
    }
    table
}

struct Writer {
    dir: PathBuf,
    report: Report,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            report: Report::default(),
        })
    }

    fn write(&mut self, name: String, table: &CsvTable) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_csv(table, &path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.report.files.push(path);
        Ok(())
    }

    fn line(&mut self, s: String) {
        self.report.summary.push_str(&s);
        self.report.summary.push('\n');
    }
}

fn artifact(kind: &str, method: &str, alpha: f64, seed: u64) -> String {
    format!("{kind}_{method}_alpha{alpha}_seed{seed}.csv")
}

fn cm2_on_display_path(cfg: &RunConfig) -> Result<SolveResult, Error> {
    let path = study_path(&cfg.demand, &cfg.grid, cfg.seed(), cfg.display_path())?;
    solve_cm2_with(&cfg.demand, cfg.penalty, &cfg.grid, &cfg.bounds, &cfg.updates, &path, cfg.solver)
}

fn study(cfg: &RunConfig, policy: Policy) -> Result<MCStudy, Error> {
    run_study(&cfg.demand, cfg.penalty, &cfg.grid, &cfg.bounds, &cfg.mc_config(policy))
}

fn summed(s: &MCStudy) -> usize {
    s.undersupply_count.iter().sum()
}

pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    match cmd {
        Command::Solve => solve(cfg),
        Command::Mc => mc(cfg),
        Command::Figures => figures(cfg),
        Command::Selfcheck => selfcheck(cfg),
    }
}

fn solve(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut w = Writer::new(cfg.out_dir())?;
    let (alpha, seed, levels) = (cfg.penalty.alpha(), cfg.seed(), cfg.band_levels());
    let cm1 = solve_cm1_with(&cfg.demand, cfg.penalty, &cfg.grid, &cfg.bounds, cfg.solver)?;
    let cm2 = cm2_on_display_path(cfg)?;
    w.write(artifact("trace", "cm1", alpha, seed), &trace_table(&cm1, &cfg.grid, levels)?)?;
    w.write(artifact("trace", "cm2", alpha, seed), &trace_table(&cm2, &cfg.grid, levels)?)?;
    for (name, r) in [("cm1", &cm1), ("cm2", &cm2)] {
        w.line(format!(
            "{name}: objective {:.6} over {} nodes, {} iterations, projected gradient {:.2e}",
            r.objective_value,
            r.nodes.len(),
            r.diagnostics.iterations,
            r.diagnostics.grad_norm
        ));
    }
    Ok(w.report)
}

fn mc(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut w = Writer::new(cfg.out_dir())?;
    let (alpha, seed) = (cfg.penalty.alpha(), cfg.seed());
    let cm1 = study(cfg, Policy::Cm1)?;
    let cm2 = study(cfg, Policy::Cm2(cfg.updates.clone()))?;
    w.write(artifact("undersupply", "cm1", alpha, seed), &undersupply_table(&cm1))?;
    w.write(artifact("undersupply", "cm2", alpha, seed), &undersupply_table(&cm2))?;
    let cmp = compare_policies(&cm2, &cm1)?;
    w.line(format!("paths {}, alpha {alpha}, seed {seed}", cm1.n_paths));
    w.line(format!("cm1: {} undersupply cases", summed(&cm1)));
    w.line(format!("cm2: {} undersupply cases", summed(&cm2)));
    w.line(format!(
        "cm2 average undersupply <= cm1 at {:.0}% of nodes",
        100.0 * cmp.frac_avg_within(0.0)
    ));
    Ok(w.report)
}

fn figures(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut w = Writer::new(cfg.out_dir())?;
    let seed = cfg.seed();
    let levels = cfg.band_levels();
    w.line(format!("{:>6} {:>6} {:>12} {:>12}", "method", "alpha", "cases", "objective"));
    for alpha in [1.0, 3.0] {
        let run = cfg.with_alpha(alpha)?;
        let cm1 = solve_cm1_with(&run.demand, run.penalty, &run.grid, &run.bounds, run.solver)?;
        let cm2 = cm2_on_display_path(&run)?;
        let s1 = study(&run, Policy::Cm1)?;
        let s2 = study(&run, Policy::Cm2(run.updates.clone()))?;
        for (method, r, s) in [("cm1", &cm1, &s1), ("cm2", &cm2, &s2)] {
            w.write(artifact("trace", method, alpha, seed), &trace_table(r, &run.grid, levels)?)?;
            w.write(artifact("undersupply", method, alpha, seed), &undersupply_table(s))?;
            w.line(format!(
                "{method:>6} {alpha:>6} {:>12} {:>12.6}",
                summed(s),
                s.per_path_objective_mean
            ));
        }
    }
    let path = study_path(&cfg.demand, &cfg.grid, seed, cfg.display_path())?;
    let bands = band_data(&cfg.demand, &path, &cfg.updates, levels)?;
    w.write(format!("bands_cm2_seed{seed}.csv"), &band_table(&bands))?;
    Ok(w.report)
}

struct Check {
    name: &'static str,
    worst: f64,
    tol: f64,
}

fn selfcheck(cfg: &RunConfig) -> Result<Report, CliError> {
    let checks = [
        check_quadrature(cfg)?,
        check_delay(cfg)?,
        check_gradient(cfg),
        check_solvers(cfg)?,
    ];
    let mut report = Report::default();
    let mut failed = Vec::new();
    for c in &checks {
        let pass = c.worst <= c.tol;
        let _ = writeln!(
            report.summary,
            "{} {:<10} worst {:.3e} (tolerance {:.0e})",
            if pass { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tol
        );
        if !pass {
            failed.push(c.name.to_string());
        }
    }
    if failed.is_empty() {
        Ok(report)
    } else {
        print!("{}", report.summary);
        Err(CliError::Checks(failed))
    }
}

fn check_quadrature(cfg: &RunConfig) -> Result<Check, Error> {
    let p = &cfg.demand;
    let simpson = Simpson::new(1e-13);
    let mut worst = 0.0f64;
    for &(t0, s) in &[(0.0, 0.25), (0.0, 1.0), (0.3, 0.7)] {
        let k = p.kappa();
        let tail = simpson.integrate(|r| (-k * (s - r)).exp() * p.mu().eval(r).unwrap_or(f64::NAN), t0, s)?;
        let want = p.y0() * (-k * (s - t0)).exp() + k * tail;
        let got = conditional_mean(p, t0, p.y0(), s)?;
        worst = worst.max((got - want).abs() / want.abs().max(1e-300));
    }
    for &(m, v, y) in &[(0.0, 1.0, 1.0), (1.5, 0.5, 1.0), (2.0, 2.0, 4.0)] {
        let l = GaussianLaw::new(m, v);
        let sd: f64 = l.std_dev();
        let dens = |x: f64| (-(x - m) * (x - m) / (2.0 * v)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let want = simpson.integrate(|x| (x - y) * (x - y) * dens(x), y, m + 40.0 * sd)?;
        worst = worst.max((partial_sq_moment(&l, y) - want).abs() / want);
    }
    Ok(Check {
        name: "quadrature",
        worst,
        tol: 1e-8,
    })
}

fn exact_grid(cfg: &RunConfig) -> Result<GridSpec, Error> {
    if cfg.grid.is_exact_shift() {
        Ok(cfg.grid)
    } else {
        GridSpec::exact_shift(cfg.grid.dx(), cfg.grid.lambda(), cfg.grid.horizon())
    }
}

fn check_delay(cfg: &RunConfig) -> Result<Check, Error> {
    let g = exact_grid(cfg)?;
    let mut rng = PathSeed::new(cfg.seed(), u64::MAX).rng();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u: Vec<f64> = (0..g.n_steps()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let u = ControlSchedule::new(0.0, g.dt(), u)?;
        let (_, trace) = run_schedule(&LineState::new(g), &u, g.horizon())?;
        let n = g.step_of(1.0 / g.lambda())?;
        for k in n..=g.n_steps() {
            let want = delay_oracle(&u, g.lambda(), g.time(k))?;
            worst = worst.max((trace[k - 1] - want).abs());
        }
    }
    Ok(Check {
        name: "delay",
        worst,
        tol: 1e-13,
    })
}

fn check_gradient(cfg: &RunConfig) -> Check {
    let pen = PenaltyParams::new(cfg.penalty.alpha().max(1.0)).expect("positive alpha");
    let mut worst = 0.0f64;
    for &(m, v) in &[(0.0, 1.0), (2.0, 0.3), (-1.0, 4.0)] {
        let l = GaussianLaw::new(m, v);
        for z in [-2.0, -0.7, 0.0, 0.4, 1.3, 2.5] {
            let y = m + z * l.std_dev();
            let h = 1e-5 * l.std_dev();
            let fd = (of_pen(&l, y + h, pen).total - of_pen(&l, y - h, pen).total) / (2.0 * h);
            let g = of_pen_grad(&l, y, pen);
            worst = worst.max((g - fd).abs() / g.abs().max(1e-3));
        }
    }
    Check {
        name: "gradient",
        worst,
        tol: 1e-6,
    }
}

fn check_solvers(cfg: &RunConfig) -> Result<Check, Error> {
    let g = exact_grid(cfg)?;
    let p = &cfg.demand;
    let layout = StepLayout::new(&g)?;
    let line = LineState::new(g);
    let laws = |s| law(p, 0.0, p.y0(), s);
    let a = solve_pointwise(laws, cfg.penalty, &cfg.bounds, &line, layout.controls)?;
    let u0 = ControlSchedule::new(0.0, g.dt(), vec![p.y0(); layout.controls])?;
    let b = solve_descent(laws, cfg.penalty, &cfg.bounds, &line, &u0, &DescentOptions::default())?;
    let worst = a
        .schedule
        .values
        .iter()
        .zip(&b.schedule.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(Check {
        name: "solvers",
        worst,
        tol: 1e-6,
    })
}

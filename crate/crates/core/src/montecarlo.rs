//! Seeded path-ensemble evaluation of CM1/CM2 control.
//!
//! Path `i` draws from its own generator substream `(seed, i)`, and results
//! are reduced in path-index order, so a study is bit-identical whether the
//! paths run sequentially or in parallel.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::control::{solve_cm1, solve_cm2, Bounds, SolveResult, UpdateSchedule};
use crate::demand::{band_of, law, simulate_path, DemandPath, OUParams, PathSeed};
use crate::error::{Error, Result};
use crate::objective::PenaltyParams;
use crate::transport::GridSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// One open-loop control for every path.
    Cm1,
    /// Per-path receding-horizon control.
    Cm2(UpdateSchedule),
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Cm1 => "cm1",
            Policy::Cm2(_) => "cm2",
        }
    }
}

/// How paths are scheduled. `Parallel` runs sequentially when the crate is
/// built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub policy: Policy,
    /// Central coverage levels for the empirical demand bands.
    pub band_levels: Vec<f64>,
    pub execution: Execution,
}

impl MCConfig {
    pub fn new(n_paths: usize, seed: u64, policy: Policy) -> Self {
        Self {
            n_paths,
            seed,
            policy,
            band_levels: Vec::new(),
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::param("n_paths", "n_paths >= 1 required"));
        }
        check_levels(&self.band_levels)
    }
}

pub(crate) fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(Error::param("band_levels", "levels must lie in (0, 1)"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCStudy {
    pub n_paths: usize,
    /// Objective nodes on `[1/λ, T)`.
    pub times: Vec<f64>,
    /// Paths with demand strictly above the output, per node.
    pub undersupply_count: Vec<usize>,
    /// Mean of `Y − y` over undersupplied paths (0 where there are none).
    pub avg_undersupply: Vec<f64>,
    pub band_levels: Vec<f64>,
    /// Empirical central demand interval per node, one entry per level.
    pub band_quantiles: Vec<Vec<(f64, f64)>>,
    /// Mean over paths of the objective value of the governing solve.
    pub per_path_objective_mean: f64,
}

/// The path with index `index` on the grid, started at `y0`.
pub fn study_path(p: &OUParams, grid: &GridSpec, seed: u64, index: u64) -> Result<DemandPath> {
    simulate_path(p, &grid.times(), p.y0(), PathSeed::new(seed, index))
}

fn map_paths<T, F>(n: usize, execution: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let wrap = |i: usize| {
        f(i).map_err(|e| Error::Path {
            index: i,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<T>> = match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(wrap).collect(),
        _ => (0..n).map(wrap).collect(),
    };
    // first failure in index order, independent of scheduling
    results.into_iter().collect()
}

struct PathOutcome {
    demand: Vec<f64>,
    output: Vec<f64>,
    objective: f64,
}

fn outcome(path: &DemandPath, grid: &GridSpec, solve: &SolveResult) -> Result<PathOutcome> {
    let demand = solve
        .nodes
        .iter()
        .map(|&t| path.value_at(t).ok_or(Error::MissingUpdateValue(t)))
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(path.times.len(), grid.n_steps() + 1);
    Ok(PathOutcome {
        demand,
        output: solve.output_trace.clone(),
        objective: solve.objective_value,
    })
}

/// Type-7 empirical quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Simulates `cfg.n_paths` demand paths, controls them under `cfg.policy`
/// and tallies undersupply per objective node.
pub fn run_study(
    p: &OUParams,
    pen: PenaltyParams,
    grid: &GridSpec,
    bounds: &Bounds,
    cfg: &MCConfig,
) -> Result<MCStudy> {
    cfg.validate()?;
    let shared = match cfg.policy {
        Policy::Cm1 => Some(solve_cm1(p, pen, grid, bounds)?),
        Policy::Cm2(_) => None,
    };
    let outcomes = map_paths(cfg.n_paths, cfg.execution, |i| {
        let path = study_path(p, grid, cfg.seed, i as u64)?;
        match (&cfg.policy, &shared) {
            (Policy::Cm1, Some(sol)) => outcome(&path, grid, sol),
            (Policy::Cm2(sched), _) => outcome(&path, grid, &solve_cm2(p, pen, grid, bounds, sched, &path)?),
            (Policy::Cm1, None) => unreachable!("CM1 solution computed above"),
        }
    })?;

    let times = match &shared {
        Some(sol) => sol.nodes.clone(),
        None => {
            let w = crate::control::ObjectiveWindow::full(grid)?;
            w.steps().map(|k| grid.time(k)).collect()
        }
    };
    let n_nodes = times.len();
    let mut undersupply_count = vec![0usize; n_nodes];
    let mut excess_sum = vec![0.0; n_nodes];
    let mut objective_sum = 0.0;
    let mut by_node = vec![Vec::with_capacity(cfg.n_paths); n_nodes];
    for o in &outcomes {
        for k in 0..n_nodes {
            let gap = o.demand[k] - o.output[k];
            if gap > 0.0 {
                undersupply_count[k] += 1;
                excess_sum[k] += gap;
            }
            by_node[k].push(o.demand[k]);
        }
        objective_sum += o.objective;
    }
    let avg_undersupply = excess_sum
        .iter()
        .zip(&undersupply_count)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let band_quantiles = by_node
        .iter_mut()
        .map(|v| {
            v.sort_by(f64::total_cmp);
            cfg.band_levels
                .iter()
                .map(|&l| (quantile_sorted(v, 0.5 * (1.0 - l)), quantile_sorted(v, 0.5 * (1.0 + l))))
                .collect()
        })
        .collect();
    Ok(MCStudy {
        n_paths: cfg.n_paths,
        times,
        undersupply_count,
        avg_undersupply,
        band_levels: cfg.band_levels.clone(),
        band_quantiles,
        per_path_objective_mean: objective_sum / cfg.n_paths as f64,
    })
}

/// Node-by-node differences `a − b` between two studies.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub times: Vec<f64>,
    pub count_diff: Vec<i64>,
    pub avg_diff: Vec<f64>,
}

impl Comparison {
    /// Fraction of nodes with `count(a) ≤ count(b)`.
    pub fn frac_count_le(&self) -> f64 {
        self.count_diff.iter().filter(|&&d| d <= 0).count() as f64 / self.count_diff.len() as f64
    }

    /// Fraction of nodes with `avg(a) ≤ avg(b) + tol`.
    pub fn frac_avg_within(&self, tol: f64) -> f64 {
        self.avg_diff.iter().filter(|&&d| d <= tol).count() as f64 / self.avg_diff.len() as f64
    }
}

pub fn compare_policies(a: &MCStudy, b: &MCStudy) -> Result<Comparison> {
    let same_grid = a.times.len() == b.times.len() && a.times.iter().zip(&b.times).all(|(x, y)| (x - y).abs() < 1e-12);
    if !same_grid {
        return Err(Error::Misaligned("studies are on different node grids".into()));
    }
    Ok(Comparison {
        times: a.times.clone(),
        count_diff: a
            .undersupply_count
            .iter()
            .zip(&b.undersupply_count)
            .map(|(&x, &y)| x as i64 - y as i64)
            .collect(),
        avg_diff: a.avg_undersupply.iter().zip(&b.avg_undersupply).map(|(x, y)| x - y).collect(),
    })
}

/// Demand bands along one path, re-conditioned at each update time.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    pub times: Vec<f64>,
    pub path_values: Vec<f64>,
    /// Conditional mean from the latest update.
    pub means: Vec<f64>,
    pub levels: Vec<f64>,
    /// Per time, one `(lo, hi)` per level.
    pub bands: Vec<Vec<(f64, f64)>>,
}

pub fn band_data(p: &OUParams, path: &DemandPath, sched: &UpdateSchedule, levels: &[f64]) -> Result<BandTable> {
    check_levels(levels)?;
    let mut means = Vec::with_capacity(path.times.len());
    let mut bands = Vec::with_capacity(path.times.len());
    for &t in &path.times {
        let t_hat = sched.latest_before(t);
        let y_hat = path.value_at(t_hat).ok_or(Error::MissingUpdateValue(t_hat))?;
        let l = law(p, t_hat, y_hat, t.max(t_hat))?;
        means.push(l.mean);
        bands.push(levels.iter().map(|&q| band_of(&l, q)).collect());
    }
    Ok(BandTable {
        times: path.times.clone(),
        path_values: path.values.clone(),
        means,
        levels: levels.to_vec(),
        bands,
    })
}

//! Adaptive Simpson quadrature for smooth one-dimensional integrands.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("subdivision cap of {cap} intervals reached with error estimate {estimate:e}")]
    SubdivisionCap { cap: usize, estimate: f64 },
    #[error("non-finite integrand value at x = {0}")]
    NonFinite(f64),
}

/// Absolute tolerance and subdivision budget.
#[derive(Debug, Clone, Copy)]
pub struct Simpson {
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for Simpson {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_intervals: 1_000_000,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

impl Simpson {
    pub fn new(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[a, b]` (returns 0 for an empty interval).
    pub fn integrate<F>(&self, f: F, a: f64, b: f64) -> Result<f64, QuadratureError>
    where
        F: Fn(f64) -> f64,
    {
        if a == b {
            return Ok(0.0);
        }
        if b < a {
            return self.integrate(f, b, a).map(|v| -v);
        }
        let eval = |x: f64| {
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(QuadratureError::NonFinite(x))
            }
        };
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (eval(a)?, eval(m)?, eval(b)?);
        let mut stack = vec![Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole: (b - a) / 6.0 * (fa + 4.0 * fm + fb),
            tol: self.abs_tol,
            depth: 0,
        }];
        let mut total = 0.0;
        let mut intervals = 1usize;
        while let Some(p) = stack.pop() {
            let m = 0.5 * (p.a + p.b);
            let lm = 0.5 * (p.a + m);
            let rm = 0.5 * (m + p.b);
            let flm = eval(lm)?;
            let frm = eval(rm)?;
            let left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
            let right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
            let delta = left + right - p.whole;
            // depth floor avoids accepting a lucky coarse estimate on oscillatory data
            if (p.depth >= 3 && delta.abs() <= 15.0 * p.tol) || m <= p.a || m >= p.b {
                total += left + right + delta / 15.0;
                continue;
            }
            intervals += 1;
            if intervals > self.max_intervals {
                return Err(QuadratureError::SubdivisionCap {
                    cap: self.max_intervals,
                    estimate: delta.abs(),
                });
            }
            let tol = 0.5 * p.tol;
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                tol,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                tol,
                depth: p.depth + 1,
            });
        }
        Ok(total)
    }
}

#![allow(dead_code)]

use std::f64::consts::PI;

/// Recursive adaptive Simpson with Richardson extrapolation.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth > 50 || (depth > 4 && delta.abs() <= 15.0 * tol) {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 0)
}

pub fn gauss_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// `∫_y^∞ (x − y)^p φ_{m,v}(x) dx` by quadrature in the standardized variable.
pub fn tail_moment(mean: f64, var: f64, y: f64, p: i32) -> f64 {
    let sd = var.sqrt();
    let a = (y - mean) / sd;
    let g = |z: f64| (sd * (z - a)).powi(p) * (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let upper = a.max(0.0) + 40.0;
    // size the tolerance from a fixed composite rule
    let n = 4000;
    let h = (upper - a) / n as f64;
    let rough: f64 = (0..n)
        .map(|i| {
            let x = a + i as f64 * h;
            h / 6.0 * (g(x) + 4.0 * g(x + 0.5 * h) + g(x + h))
        })
        .sum();
    simpson(&g, a, upper, 1e-13 * rough.abs().max(1e-300))
}

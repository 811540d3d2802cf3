//! Pointwise loss of an output `y` against Gaussian demand `Y ~ N(m, v)`:
//!
//! ```text
//! total = E[(Y − y)²] + α·E[(Y − y)² | Y > y]
//! ```
//!
//! With `a = (y − m)/√v`, `Q = 1 − Φ(a)` and the Mills ratio `M = φ(a)/Q`:
//!
//! ```text
//! E[(Y − y)²]              = (m − y)² + v
//! E[(Y − y)² 1{Y > y}]     = v·[(1 + a²)·Q − a·φ(a)]
//! E[(Y − y)² | Y > y]      = v·[(1 + a²) − a·M]
//! d/dy E[(Y − y)² | Y > y] = √v·[(a² − 1)·M + 2a − a·M²]
//! ```
//!
//! The conditional term is defined as zero when the exceedance probability
//! is at most [`EPS_TAIL`].

use crate::demand::GaussianLaw;
use crate::error::{Error, Result};
use crate::special::{mills_ratio, norm_pdf, norm_sf};

/// Exceedance probability below which the conditional penalty is zero.
pub const EPS_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    alpha: f64,
}

impl PenaltyParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", "alpha >= 0 required"));
        }
        Ok(Self { alpha })
    }

    /// Plain tracking objective.
    pub fn none() -> Self {
        Self { alpha: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Components of the penalized loss at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerm {
    pub tracking: f64,
    /// Conditional undersupply expectation, before weighting by α.
    pub penalty: f64,
    pub total: f64,
}

fn standardized(law: &GaussianLaw, y: f64) -> (f64, f64) {
    let sd = law.std_dev();
    (sd, (y - law.mean) / sd)
}

/// `E[(Y − y)²]`.
pub fn tracking_term(law: &GaussianLaw, y: f64) -> f64 {
    let d = law.mean - y;
    d * d + law.variance
}

/// `E[(Y − y)² 1{Y > y}]`.
pub fn partial_sq_moment(law: &GaussianLaw, y: f64) -> f64 {
    if law.variance == 0.0 {
        let d = law.mean - y;
        return if d > 0.0 { d * d } else { 0.0 };
    }
    let (_, a) = standardized(law, y);
    law.variance * ((1.0 + a * a) * norm_sf(a) - a * norm_pdf(a))
}

/// Exceedance probability `P(Y > y)`.
pub fn exceedance_probability(law: &GaussianLaw, y: f64) -> f64 {
    if law.variance == 0.0 {
        return if law.mean > y { 1.0 } else { 0.0 };
    }
    norm_sf(standardized(law, y).1)
}

/// `E[(Y − y)² | Y > y]`, or zero when `P(Y > y) ≤ eps_tail`.
pub fn undersupply_term(law: &GaussianLaw, y: f64, eps_tail: f64) -> f64 {
    if law.variance == 0.0 {
        let d = law.mean - y;
        return if d > 0.0 { d * d } else { 0.0 };
    }
    let (_, a) = standardized(law, y);
    if norm_sf(a) <= eps_tail {
        return 0.0;
    }
    // ratio form: no division by a small tail probability
    law.variance * (1.0 + a * a - a * mills_ratio(a)).max(0.0)
}

/// Penalized loss with components.
pub fn of_pen(law: &GaussianLaw, y: f64, pen: PenaltyParams) -> ObjectiveTerm {
    let tracking = tracking_term(law, y);
    let penalty = undersupply_term(law, y, EPS_TAIL);
    ObjectiveTerm {
        tracking,
        penalty,
        total: tracking + pen.alpha * penalty,
    }
}

/// Derivative of [`of_pen`]'s total with respect to `y`.
pub fn of_pen_grad(law: &GaussianLaw, y: f64, pen: PenaltyParams) -> f64 {
    let tracking = 2.0 * (y - law.mean);
    if pen.alpha == 0.0 {
        return tracking;
    }
    tracking + pen.alpha * undersupply_grad(law, y)
}

/// Second derivative of [`of_pen`]'s total with respect to `y`.
pub fn of_pen_curvature(law: &GaussianLaw, y: f64, pen: PenaltyParams) -> f64 {
    if pen.alpha == 0.0 {
        return 2.0;
    }
    2.0 + pen.alpha * undersupply_curvature(law, y)
}

fn undersupply_curvature(law: &GaussianLaw, y: f64) -> f64 {
    if law.variance == 0.0 {
        return if law.mean > y { 2.0 } else { 0.0 };
    }
    let (_, a) = standardized(law, y);
    if norm_sf(a) <= EPS_TAIL {
        return 0.0;
    }
    let m = mills_ratio(a);
    let dm = m * (m - a);
    2.0 * a * m + (a * a - 1.0) * dm + 2.0 - m * m - 2.0 * a * m * dm
}

fn undersupply_grad(law: &GaussianLaw, y: f64) -> f64 {
    if law.variance == 0.0 {
        return if law.mean > y { 2.0 * (y - law.mean) } else { 0.0 };
    }
    let (sd, a) = standardized(law, y);
    if norm_sf(a) <= EPS_TAIL {
        return 0.0;
    }
    let m = mills_ratio(a);
    sd * ((a * a - 1.0) * m + 2.0 * a - a * m * m)
}

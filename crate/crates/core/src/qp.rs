//! Exact solver for the two-dimensional position subproblem
//!
//! ```text
//! min_t (δ/2)‖t‖² + cᵀt   s.t.  |t_y|, |t_z| ≤ A/2,  a_iᵀt ≥ b_i
//! ```
//!
//! The objective is an isotropic quadratic, so the minimizer is the Euclidean
//! projection of `t* = −c/δ` onto a convex polygon. That projection lies in
//! the interior, on the relative interior of one edge, or at a vertex, so
//! enumerating those candidates and keeping the closest feasible one is exact.

use crate::error::{Error, Result};
use crate::geometry::{MovingRegion, Point2};

/// Halfplane `a·t ≥ b` with `‖a‖ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Point2,
    pub offset: f64,
}

impl HalfPlane {
    /// `a·t − b`; nonnegative inside.
    pub fn slack(&self, t: &Point2) -> f64 {
        self.normal.dot(t) - self.offset
    }
}

/// Linearize `‖t − t̂‖ ≥ d_min` around `anchor`.
///
/// The norm is convex, so its tangent plane is a global under-estimator and
/// every point of the halfplane `a·(t − t̂) ≥ d_min` keeps the true spacing.
pub fn linearize_min_distance(anchor: &Point2, other: &Point2, min_spacing: f64) -> Result<HalfPlane> {
    let diff = anchor - other;
    let dist = diff.norm();
    if !(dist > 0.0) {
        return Err(Error::CoincidentPoints { distance: dist });
    }
    let normal = diff / dist;
    Ok(HalfPlane { normal, offset: min_spacing + normal.dot(other) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    /// No feasible candidate was found; the anchor is returned unchanged.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSolution {
    pub point: Point2,
    pub status: QpStatus,
}

/// Absolute feasibility tolerance in meters.
pub const QP_FEASIBILITY_TOL: f64 = 1e-12;

/// Minimize `(δ/2)‖t‖² + cᵀt` over the box of `region` intersected with
/// `halfplanes`.
///
/// `anchor` must be feasible; it is the fallback and is also used to discard
/// constraints that cannot be active: the projection lies within
/// `2‖t* − anchor‖` of the anchor, so any constraint with more slack than
/// that at the anchor is inactive.
pub fn solve_position_qp(
    delta: f64,
    c: &Point2,
    region: &MovingRegion,
    halfplanes: &[HalfPlane],
    anchor: &Point2,
) -> QpSolution {
    if !(delta > 0.0) || !c.iter().all(|x| x.is_finite()) {
        return QpSolution { point: *anchor, status: QpStatus::Optimal };
    }
    let target = -c / delta;
    let h = region.half_width();
    let radius = 2.0 * (target - anchor).norm();

    let boxes = [
        HalfPlane { normal: Point2::new(1.0, 0.0), offset: -h },
        HalfPlane { normal: Point2::new(-1.0, 0.0), offset: -h },
        HalfPlane { normal: Point2::new(0.0, 1.0), offset: -h },
        HalfPlane { normal: Point2::new(0.0, -1.0), offset: -h },
    ];
    let all: Vec<HalfPlane> = boxes.iter().chain(halfplanes).copied().collect();
    let feasible = |t: &Point2| all.iter().all(|p| p.slack(t) >= -QP_FEASIBILITY_TOL);
    if feasible(&target) {
        return QpSolution { point: target, status: QpStatus::Optimal };
    }
    let near: Vec<HalfPlane> = all.iter().filter(|p| p.slack(anchor) <= radius + QP_FEASIBILITY_TOL).copied().collect();

    let mut best: Option<(f64, Point2)> = None;
    let mut consider = |t: Point2| {
        if feasible(&t) {
            let d = (t - target).norm_squared();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, t));
            }
        }
    };
    for p in &near {
        consider(target - p.normal * p.slack(&target));
    }
    for (i, p) in near.iter().enumerate() {
        for q in &near[i + 1..] {
            if let Some(v) = intersect(p, q) {
                consider(v);
            }
        }
    }
    match best {
        Some((_, t)) => {
            QpSolution { point: Point2::new(t.x.clamp(-h, h), t.y.clamp(-h, h)), status: QpStatus::Optimal }
        }
        None => QpSolution { point: *anchor, status: QpStatus::Infeasible },
    }
}

/// Intersection of the boundary lines `a·t = b`, if they are not parallel.
fn intersect(p: &HalfPlane, q: &HalfPlane) -> Option<Point2> {
    let det = p.normal.x * q.normal.y - p.normal.y * q.normal.x;
    if det.abs() < 1e-14 {
        return None;
    }
    let y = (p.offset * q.normal.y - q.offset * p.normal.y) / det;
    let z = (p.normal.x * q.offset - q.normal.x * p.offset) / det;
    Some(Point2::new(y, z))
}

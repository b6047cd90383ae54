//! Antenna-position updates by majorization–minimization.
//!
//! With the precoder `V` and the auxiliaries `P`, `Q_U`, `Q_E` fixed, the
//! negated WMMSE objective as a function of one antenna position `t_m` is
//!
//! ```text
//! f₄(t) = h^H D^U h + 2Re{h^H r^U} + z^H D^E z + 2Re{z^H r^E} + const
//! D^U = ‖v_m‖² P Q_U P^H      r^U = P Q_U P^H (Σ_{i≠m} h_i v_i) v_m^H − P Q_U v_m^H
//! D^E = ‖v_m‖² Q_E            r^E = Q_E (Σ_{i≠m} z_i v_i) v_m^H
//! ```
//!
//! where `h = h̃(t)`, `z = z̃(t)` are whitened channel columns and `v_i` is
//! row `i` of `V`. Replacing each quadratic by its largest-eigenvalue bound
//! leaves, for fixed gains, a sum of cosines
//!
//! ```text
//! f₅(t) = 2 Σ_l ϱ_l cos(k γ_l(t) + ∠τ_l),    ϱ_l = |τ_l| g_l / σ
//! ```
//!
//! with `γ_l` the Fresnel (or planar) distance. A global curvature bound
//! `δ` turns `f₅` into an isotropic quadratic whose constrained minimizer is
//! found exactly by [`crate::qp`].

use nalgebra::{Matrix2, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{path_gain, to_cartesian, AntennaLayout, ChannelModel, Point2, Point3, PolarPoint};
use crate::linalg::{max_eigenvalue_psd, CMatrix, CVector, C64};
use crate::qp::{linearize_min_distance, solve_position_qp, HalfPlane, QpStatus};
use crate::rates::ln_secrecy_margin;
use crate::scene::Scene;
use crate::wmmse::{update_receive_filter, update_weights};

/// Per-antenna quadratic model of the negated WMMSE objective.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionSubproblem {
    pub m: usize,
    pub d_u: CMatrix,
    pub d_e: CMatrix,
    pub r_u: CVector,
    pub r_e: CVector,
    /// Largest eigenvalues of `D^U` and `D^E`.
    pub zeta_u: f64,
    pub zeta_e: f64,
}

/// Assemble the `f₄` coefficients for antenna `m` from whitened channels.
pub fn build_subproblem(
    v: &CMatrix,
    ht: &CMatrix,
    zt: &CMatrix,
    p: &CMatrix,
    q_u: &CMatrix,
    q_e: &CMatrix,
    m: usize,
) -> Result<PositionSubproblem> {
    if m >= v.nrows() || ht.ncols() != v.nrows() || zt.ncols() != v.nrows() {
        return Err(Error::Dimension(format!("antenna index {m} with {} antennas", v.nrows())));
    }
    let vm = v.row(m).into_owned();
    let vm_h = vm.adjoint();
    let weight = vm.norm_squared();
    let c_mat = p * q_u * p.adjoint();
    let others_u = ht * v - ht.column(m) * &vm;
    let others_e = zt * v - zt.column(m) * &vm;
    let b_m = p * q_u * &vm_h;
    let r_u = &c_mat * others_u * &vm_h - b_m;
    let r_e = q_e * others_e * &vm_h;
    let d_u = c_mat.scale(weight);
    let d_e = q_e.scale(weight);
    let (zeta_u, _) = surrogate_phi(&d_u);
    let (zeta_e, _) = surrogate_phi(&d_e);
    Ok(PositionSubproblem {
        m,
        d_u,
        d_e,
        r_u: r_u.column(0).into_owned(),
        r_e: r_e.column(0).into_owned(),
        zeta_u,
        zeta_e,
    })
}

/// `f₄` at whitened channel columns `h`, `z` (constant dropped).
pub fn f4_value(sub: &PositionSubproblem, h: &CVector, z: &CVector) -> f64 {
    quad(&sub.d_u, h) + 2.0 * h.dotc(&sub.r_u).re + quad(&sub.d_e, z) + 2.0 * z.dotc(&sub.r_e).re
}

fn quad(d: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(d * x)).re
}

/// `f₄` at an in-plane position under `model`.
pub fn f4_at(sub: &PositionSubproblem, scene: &Scene, model: ChannelModel, t: &Point2) -> Result<f64> {
    Ok(f4_value(sub, &scene.user_column(t, model)?, &scene.eve_column(t, model)?))
}

/// Largest eigenvalue `ζ` of a Hermitian PSD weight and the bound `Φ = ζI`.
pub fn surrogate_phi(d: &CMatrix) -> (f64, CMatrix) {
    let zeta = max_eigenvalue_psd(d, 1e-10, 200).max(0.0);
    (zeta, CMatrix::identity(d.nrows(), d.ncols()).scale(zeta))
}

/// `τ^U = r^U − (Φ^U − D^U) h₀` and `τ^E = r^E − (Φ^E − D^E) z₀`.
pub fn tau_vectors(sub: &PositionSubproblem, h0: &CVector, z0: &CVector) -> (CVector, CVector) {
    let tau_u = &sub.r_u - (h0 * C64::from(sub.zeta_u) - &sub.d_u * h0);
    let tau_e = &sub.r_e - (z0 * C64::from(sub.zeta_e) - &sub.d_e * z0);
    (tau_u, tau_e)
}

/// Lemma-style majorizer of `f₄` built at the anchor channels `h₀`, `z₀`,
/// evaluated at exact channels `h`, `z`. Equals `f₄` at the anchor.
pub fn surrogate_value(sub: &PositionSubproblem, h: &CVector, z: &CVector, h0: &CVector, z0: &CVector) -> f64 {
    let (tau_u, tau_e) = tau_vectors(sub, h0, z0);
    let constant =
        sub.zeta_u * h0.norm_squared() - quad(&sub.d_u, h0) + sub.zeta_e * z0.norm_squared() - quad(&sub.d_e, z0);
    sub.zeta_u * h.norm_squared()
        + sub.zeta_e * z.norm_squared()
        + 2.0 * h.dotc(&tau_u).re
        + 2.0 * z.dotc(&tau_e).re
        + constant
}

/// One cosine of `f₅`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTerm {
    /// Frozen amplitude `ϱ = |τ_l| g_l / σ`.
    pub amplitude: f64,
    /// Phase offset `∠τ_l`.
    pub offset: f64,
    pub element: PolarPoint,
    /// [`PolarPoint::planar_direction`] of `element`.
    pub direction: Point2,
}

/// `f₅(t) = 2 Σ ϱ cos(kγ(t) + ∠τ)` with its derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseModel {
    pub terms: Vec<PhaseTerm>,
    pub wavenumber: f64,
    pub model: ChannelModel,
}

impl PhaseModel {
    /// Freeze amplitudes and offsets of `τ` at `anchor`.
    pub fn new(scene: &Scene, model: ChannelModel, tau_u: &CVector, tau_e: &CVector, anchor: &Point2) -> Result<Self> {
        let mut terms = Vec::with_capacity(tau_u.len() + tau_e.len());
        let t3 = to_cartesian(anchor);
        let mut push = |tau: &CVector, geom: &crate::geometry::ReceiverGeometry| -> Result<()> {
            let sigma = geom.noise_variance.sqrt();
            for ((tau_l, e), r) in tau.iter().zip(geom.elements()).zip(geom.positions()) {
                let gain = match model {
                    ChannelModel::NearField => path_gain(&t3, r, scene.wavelength)?,
                    ChannelModel::FarField => path_gain(&Point3::zeros(), r, scene.wavelength)?,
                };
                terms.push(PhaseTerm {
                    amplitude: tau_l.norm() * gain / sigma,
                    offset: tau_l.arg(),
                    element: *e,
                    direction: Point2::new(r.y, r.z) / e.r,
                });
            }
            Ok(())
        };
        push(tau_u, &scene.user)?;
        if scene.eavesdropper_present {
            push(tau_e, &scene.eavesdropper)?;
        }
        Ok(Self { terms, wavenumber: 2.0 * std::f64::consts::PI / scene.wavelength, model })
    }

    /// `γ`, `∇γ` and `∇²γ` of one term.
    fn gamma(&self, t: &Point2, term: &PhaseTerm) -> (f64, Point2, Matrix2<f64>) {
        let (u, r) = (term.direction, term.element.r);
        let proj = t.dot(&u);
        match self.model {
            ChannelModel::NearField => {
                let grad = -u + (t - u * proj) / r;
                let hess = (Matrix2::identity() - u * u.transpose()) / r;
                (r - proj + (t.norm_squared() - proj * proj) / (2.0 * r), grad, hess)
            }
            ChannelModel::FarField => (r - proj, -u, Matrix2::zeros()),
        }
    }

    pub fn value(&self, t: &Point2) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let (g, _, _) = self.gamma(t, term);
                2.0 * term.amplitude * (self.wavenumber * g + term.offset).cos()
            })
            .sum()
    }

    pub fn gradient(&self, t: &Point2) -> Point2 {
        let k = self.wavenumber;
        self.terms.iter().fold(Point2::zeros(), |acc, term| {
            let (g, dg, _) = self.gamma(t, term);
            acc - dg * (2.0 * k * term.amplitude * (k * g + term.offset).sin())
        })
    }

    pub fn hessian(&self, t: &Point2) -> Matrix2<f64> {
        let k = self.wavenumber;
        self.terms.iter().fold(Matrix2::zeros(), |acc, term| {
            let (g, dg, d2g) = self.gamma(t, term);
            let phase = k * g + term.offset;
            acc - (dg * dg.transpose()) * (2.0 * k * k * term.amplitude * phase.cos())
                - d2g * (2.0 * k * term.amplitude * phase.sin())
        })
    }

    /// Global bound on the Hessian spectral norm over a region of half
    /// diagonal `reach`:
    /// `2k²Σϱ·max(1, max_l(|u_l| + reach/r_l)²) + 2kΣϱ·max_l(2/r_l)`.
    pub fn delta_bound(&self, reach: f64) -> f64 {
        let k = self.wavenumber;
        let total: f64 = self.terms.iter().map(|t| t.amplitude).sum();
        if total == 0.0 {
            return 0.0;
        }
        let (mut slope, mut bend) = (1.0f64, 0.0f64);
        for term in &self.terms {
            let e = &term.element;
            if self.model == ChannelModel::NearField {
                slope = slope.max((term.direction.norm() + reach / e.r).powi(2));
                bend = bend.max(2.0 / e.r);
            }
        }
        2.0 * k * k * total * slope + 2.0 * k * total * bend
    }
}

/// Doublings allowed when `δ` fails to dominate the anchor Hessian.
pub const MAX_DELTA_DOUBLINGS: usize = 30;

/// [`PhaseModel::delta_bound`], doubled until `δI − ∇²f₅(anchor)` is PSD.
pub fn verified_delta(phase: &PhaseModel, reach: f64, anchor: &Point2) -> Result<f64> {
    let mut delta = phase.delta_bound(reach);
    let top = SymmetricEigen::new(phase.hessian(anchor)).eigenvalues.max();
    for _ in 0..MAX_DELTA_DOUBLINGS {
        if delta >= top {
            return Ok(delta);
        }
        delta *= 2.0;
    }
    if delta >= top {
        Ok(delta)
    } else {
        Err(Error::CurvatureBound(MAX_DELTA_DOUBLINGS))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmOptions {
    /// Relative `f₄` change that ends the per-antenna iteration.
    pub tol: f64,
    pub max_iters: usize,
}

// The isotropic curvature bound is far above the true range-direction
// curvature, so a loose stop leaves the outer loop creeping; these values
// trade that drift against runtime.
impl Default for MmOptions {
    fn default() -> Self {
        Self { tol: 1e-14, max_iters: 50_000 }
    }
}

#[derive(Debug, Clone)]
pub struct MmOutcome {
    pub position: Point2,
    /// `f₄` at the start and after every accepted step.
    pub f4_trace: Vec<f64>,
    pub iterations: usize,
}

/// Minimum-distance halfplanes of antenna `m` linearized at `anchor`.
///
/// The spacing is padded by a few ulps so that points the QP places on a
/// tangent line still clear `d_min` after rounding.
pub fn spacing_halfplanes(layout: &AntennaLayout, m: usize, anchor: &Point2) -> Result<Vec<HalfPlane>> {
    let padded = layout.min_spacing() * (1.0 + 64.0 * f64::EPSILON);
    layout
        .positions()
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != m)
        .map(|(_, other)| linearize_min_distance(anchor, other, padded))
        .collect()
}

/// True if antenna `m` at `t` keeps the box and the exact spacing to all
/// others.
fn placement_ok(scene: &Scene, layout: &AntennaLayout, m: usize, t: &Point2) -> bool {
    scene.region.contains(t)
        && layout.positions().iter().enumerate().all(|(j, o)| j == m || (t - o).norm() >= layout.min_spacing())
}

/// MM iterations on antenna `sub.m` with every other antenna fixed.
///
/// Each iteration builds `f₅` at the current anchor, minimizes its quadratic
/// upper bound over the box and the linearized spacing constraints, and
/// accepts the move only if the exact `f₄` does not increase. The returned
/// position always keeps `layout` feasible.
pub fn optimize_position_m(
    scene: &Scene,
    model: ChannelModel,
    layout: &AntennaLayout,
    sub: &PositionSubproblem,
    options: MmOptions,
) -> Result<MmOutcome> {
    let m = sub.m;
    let reach = scene.region.half_diagonal();
    let mut anchor = layout.position(m);
    let mut h0 = scene.user_column(&anchor, model)?;
    let mut z0 = scene.eve_column(&anchor, model)?;
    let mut value = f4_value(sub, &h0, &z0);
    let mut trace = vec![value];
    let mut iterations = 0;
    while iterations < options.max_iters {
        iterations += 1;
        let (tau_u, tau_e) = tau_vectors(sub, &h0, &z0);
        let phase = PhaseModel::new(scene, model, &tau_u, &tau_e, &anchor)?;
        let delta = verified_delta(&phase, reach, &anchor)?;
        if delta == 0.0 {
            break;
        }
        let c = phase.gradient(&anchor) - anchor * delta;
        let planes = spacing_halfplanes(layout, m, &anchor)?;
        let qp = solve_position_qp(delta, &c, &scene.region, &planes, &anchor);
        if qp.status == QpStatus::Infeasible || !placement_ok(scene, layout, m, &qp.point) {
            break;
        }
        let h = scene.user_column(&qp.point, model)?;
        let z = scene.eve_column(&qp.point, model)?;
        let next = f4_value(sub, &h, &z);
        if !(next <= value) {
            break;
        }
        let change = (value - next).abs() / value.abs().max(f64::MIN_POSITIVE);
        anchor = qp.point;
        h0 = h;
        z0 = z;
        value = next;
        trace.push(value);
        if change <= options.tol {
            break;
        }
    }
    Ok(MmOutcome { position: anchor, f4_trace: trace, iterations })
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub layout: AntennaLayout,
    /// Natural-log secrecy margin under the design model after the sweep.
    pub ln_margin: f64,
    /// Antennas whose move was reverted because the margin dropped.
    pub reverted: usize,
    pub mm_iterations: usize,
}

/// One pass `m = 1..M` of per-antenna MM updates with the precoder fixed.
///
/// The auxiliaries are refreshed from the current layout before each
/// antenna, which makes every accepted move raise the secrecy margin; a move
/// that nevertheless lowers it is reverted.
pub fn position_sweep(
    scene: &Scene,
    model: ChannelModel,
    layout: &AntennaLayout,
    v: &CMatrix,
    options: MmOptions,
) -> Result<SweepOutcome> {
    let mut layout = layout.clone();
    let (mut ht, mut zt) = scene.whitened_channels(&layout, model)?;
    let mut margin = ln_secrecy_margin(&ht, &zt, v)?;
    let mut reverted = 0;
    let mut mm_iterations = 0;
    for m in 0..layout.len() {
        let p = update_receive_filter(&ht, v)?;
        let (q_u, q_e) = update_weights(&p, v, &ht, &zt)?;
        let sub = build_subproblem(v, &ht, &zt, &p, &q_u, &q_e, m)?;
        let out = optimize_position_m(scene, model, &layout, &sub, options)?;
        mm_iterations += out.iterations;
        if out.position == layout.position(m) {
            continue;
        }
        let old_h = ht.column(m).into_owned();
        let old_z = zt.column(m).into_owned();
        ht.set_column(m, &scene.user_column(&out.position, model)?);
        zt.set_column(m, &scene.eve_column(&out.position, model)?);
        let next = ln_secrecy_margin(&ht, &zt, v)?;
        if next >= margin {
            layout.set_position(m, out.position);
            margin = next;
        } else {
            ht.set_column(m, &old_h);
            zt.set_column(m, &old_z);
            reverted += 1;
        }
    }
    Ok(SweepOutcome { layout, ln_margin: margin, reverted, mm_iterations })
}

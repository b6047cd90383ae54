//! Hybrid factorization `W ≈ W_A W_D` with a unit-modulus analog matrix.
//!
//! The digital factor has a least-squares closed form. The analog factor is
//! optimized on the complex-circle manifold `{x : |x_i| = 1}` by Riemannian
//! conjugate gradient with Armijo backtracking, where `x = vec(W_A)` in
//! column-major order and
//!
//! ```text
//! f₂(x) = ‖vec(W) − (W_Dᵀ ⊗ I_M) x‖² = ‖W − W_A W_D‖²_F.
//! ```
//!
//! The Kronecker form is never built; all algebra stays in `M × N` matrices.

use crate::error::{Error, Result};
use crate::linalg::{frob2, CMatrix, CVector, C64};

/// A point on the complex-circle manifold, shaped as an `M × N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint {
    x: CVector,
    rows: usize,
    cols: usize,
}

/// Tolerance on `|x_i| = 1`.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

impl ManifoldPoint {
    /// Wrap a unit-modulus matrix, rejecting entries off the circle.
    pub fn from_matrix(analog: &CMatrix) -> Result<Self> {
        if let Some(z) = analog.iter().find(|z| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL) {
            return Err(Error::Dimension(format!("entry of modulus {} is off the unit circle", z.norm())));
        }
        Ok(Self::from_matrix_unchecked(analog))
    }

    fn from_matrix_unchecked(analog: &CMatrix) -> Self {
        Self { x: CVector::from_column_slice(analog.as_slice()), rows: analog.nrows(), cols: analog.ncols() }
    }

    /// `exp(j·∠a_i)` elementwise; zero entries map to `1`.
    pub fn from_phases(a: &CMatrix) -> Self {
        let unit = a.map(|z| if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) });
        Self::from_matrix_unchecked(&unit)
    }

    pub fn as_vector(&self) -> &CVector {
        &self.x
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_column_slice(self.rows, self.cols, self.x.as_slice())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Largest deviation `max_i ||x_i| − 1|`.
    pub fn modulus_error(&self) -> f64 {
        self.x.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `W_D = (W_A^H W_A)⁻¹ W_A^H W`, computed through a QR factorization.
pub fn ls_digital(analog: &CMatrix, w: &CMatrix) -> Result<CMatrix> {
    if analog.nrows() != w.nrows() {
        return Err(Error::Dimension("analog and digital precoders disagree on M".into()));
    }
    if analog.ncols() > analog.nrows() {
        return Err(Error::Singular("analog matrix has more columns than rows".into()));
    }
    let qr = analog.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = r.diagonal().iter().map(|z| z.norm()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    let smallest = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smallest > 1e-12 * largest) {
        return Err(Error::Singular("analog matrix is rank deficient".into()));
    }
    let rhs = qr.q().adjoint() * w;
    r.solve_upper_triangular(&rhs).ok_or_else(|| Error::Singular("analog matrix is rank deficient".into()))
}

/// `f₂ = ‖W − W_A W_D‖²_F`.
pub fn factorization_residual(analog: &CMatrix, digital: &CMatrix, w: &CMatrix) -> f64 {
    frob2(&(w - analog * digital))
}

/// `∇f₂ = 2(W_A W_D − W) W_D^H`, vectorized column-major.
pub fn euclidean_gradient_f2(x: &ManifoldPoint, digital: &CMatrix, w: &CMatrix) -> CVector {
    let analog = x.to_matrix();
    let g = (&analog * digital - w) * digital.adjoint() * C64::new(2.0, 0.0);
    CVector::from_column_slice(g.as_slice())
}

/// Remove the radial component: `v − Re{v ∘ x*} ∘ x`.
fn project(v: &CVector, x: &CVector) -> CVector {
    v.zip_map(x, |vi, xi| vi - xi * (vi * xi.conj()).re)
}

/// Projection of the Euclidean gradient onto the tangent space at `x`.
pub fn riemannian_gradient(x: &ManifoldPoint, eucl_grad: &CVector) -> CVector {
    project(eucl_grad, &x.x)
}

/// Carry a tangent vector to the tangent space at `x_new`.
pub fn transport(d_prev: &CVector, x_new: &ManifoldPoint) -> CVector {
    project(d_prev, &x_new.x)
}

/// Real inner product `Re{a^H b}`.
fn real_inner(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).re
}

/// Polak–Ribière coefficient, clamped at zero so that a poor coefficient
/// restarts from steepest descent.
pub fn polak_ribiere(grad_new: &CVector, grad_old: &CVector) -> f64 {
    let denom = grad_old.norm_squared();
    if denom == 0.0 {
        return 0.0;
    }
    (real_inner(grad_new, &(grad_new - grad_old)) / denom).max(0.0)
}

/// Shrinks allowed when `x + βd` hits a zero entry.
pub const MAX_RETRACTION_SHRINKS: usize = 60;

/// `(x_i + βd_i)/|x_i + βd_i|`, halving `β` while any entry vanishes.
///
/// Returns the new point and the step actually used.
pub fn retract(x: &ManifoldPoint, step: f64, dir: &CVector) -> Result<(ManifoldPoint, f64)> {
    let mut beta = step;
    for _ in 0..=MAX_RETRACTION_SHRINKS {
        let moved = &x.x + dir * C64::from(beta);
        if moved.iter().all(|z| z.norm() > 1e-150) {
            let unit = moved.map(|z| z / z.norm());
            return Ok((ManifoldPoint { x: unit, rows: x.rows, cols: x.cols }, beta));
        }
        beta *= 0.5;
    }
    Err(Error::Retraction(MAX_RETRACTION_SHRINKS))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoParams {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self { initial_step: 1.0, shrink: 0.5, sufficient_decrease: 1e-4, max_backtracks: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoOptions {
    /// Stop once `‖grad f₂‖₂` falls to this value.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo: ArmijoParams,
}

impl Default for MoOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-6, max_iters: 100, armijo: ArmijoParams::default() }
    }
}

/// State of the conjugate-gradient iteration after an accepted step.
#[derive(Debug, Clone)]
pub struct MoIterate {
    pub point: ManifoldPoint,
    /// Riemannian gradient at `point`.
    pub grad: CVector,
    /// Search direction, tangent at `point`.
    pub dir: CVector,
    /// Step of the last accepted move.
    pub step: f64,
    /// Polak–Ribière coefficient used to form `dir`.
    pub pr_coef: f64,
}

#[derive(Debug, Clone)]
pub struct MoOutcome {
    pub analog: CMatrix,
    /// `f₂` at the start and after every accepted step.
    pub residual_trace: Vec<f64>,
    pub iterations: usize,
    pub final_grad_norm: f64,
}

/// Riemannian conjugate gradient for `min_x f₂(x)` with `W_D` fixed.
pub fn mo_analog(w: &CMatrix, digital: &CMatrix, x0: &ManifoldPoint, options: MoOptions) -> Result<MoOutcome> {
    mo_analog_with(w, digital, x0, options, |_| {})
}

/// [`mo_analog`] with a callback invoked on every accepted iterate.
pub fn mo_analog_with<F: FnMut(&MoIterate)>(
    w: &CMatrix,
    digital: &CMatrix,
    x0: &ManifoldPoint,
    options: MoOptions,
    mut observe: F,
) -> Result<MoOutcome> {
    let (m, n) = x0.shape();
    if w.nrows() != m || digital.nrows() != n || digital.ncols() != w.ncols() {
        return Err(Error::Dimension(format!(
            "W is {}x{}, W_A is {m}x{n}, W_D is {}x{}",
            w.nrows(),
            w.ncols(),
            digital.nrows(),
            digital.ncols()
        )));
    }
    let f = |p: &ManifoldPoint| factorization_residual(&p.to_matrix(), digital, w);
    let mut point = x0.clone();
    let mut value = f(&point);
    let mut grad = riemannian_gradient(&point, &euclidean_gradient_f2(&point, digital, w));
    let mut dir = -grad.clone();
    let mut trace = vec![value];
    let mut iterations = 0;
    let armijo = options.armijo;
    while grad.norm() > options.grad_tol && iterations < options.max_iters {
        let mut slope = real_inner(&grad, &dir);
        if !(slope < 0.0) {
            dir = -grad.clone();
            slope = -grad.norm_squared();
        }
        let mut beta = armijo.initial_step;
        let mut accepted = None;
        for _ in 0..=armijo.max_backtracks {
            let (cand, used) = retract(&point, beta, &dir)?;
            let cand_value = f(&cand);
            if cand_value <= value + armijo.sufficient_decrease * used * slope && cand_value < value {
                accepted = Some((cand, cand_value, used));
                break;
            }
            beta = used * armijo.shrink;
        }
        let Some((next, next_value, used)) = accepted else {
            break;
        };
        iterations += 1;
        let next_grad = riemannian_gradient(&next, &euclidean_gradient_f2(&next, digital, w));
        let pr = polak_ribiere(&next_grad, &grad);
        dir = -&next_grad + transport(&dir, &next) * C64::from(pr);
        point = next;
        value = next_value;
        grad = next_grad;
        trace.push(value);
        observe(&MoIterate { point: point.clone(), grad: grad.clone(), dir: dir.clone(), step: used, pr_coef: pr });
    }
    Ok(MoOutcome { analog: point.to_matrix(), residual_trace: trace, iterations, final_grad_norm: grad.norm() })
}

/// Phases of the first `N` columns of an orthonormal basis that starts with
/// the column space of `W` (Gram–Schmidt on `[W | e₁ … e_M]`).
pub fn phase_init(w: &CMatrix, rf_chains: usize) -> ManifoldPoint {
    let m = w.nrows();
    let scale = w.column_iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    let mut basis: Vec<CVector> = Vec::with_capacity(rf_chains);
    let candidates = w.column_iter().map(|c| c.into_owned()).chain((0..m).map(|i| {
        let mut e = CVector::zeros(m);
        e[i] = C64::new(1.0, 0.0);
        e
    }));
    for mut v in candidates {
        if basis.len() == rf_chains {
            break;
        }
        let reference = v.norm().max(1e-300);
        for b in &basis {
            let c = b.dotc(&v);
            v -= b * c;
        }
        let norm = v.norm();
        if norm > 1e-10 * reference && norm > 1e-14 * scale {
            basis.push(v / C64::from(norm));
        }
    }
    let mut q = CMatrix::zeros(m, rf_chains);
    for (k, b) in basis.iter().enumerate() {
        q.set_column(k, b);
    }
    ManifoldPoint::from_phases(&q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridOptions {
    /// Relative `f₂` improvement that ends the alternation.
    pub tol: f64,
    pub max_outer: usize,
    pub mo: MoOptions,
}

impl Default for HybridOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_outer: 100, mo: MoOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct HybridOutcome {
    pub analog: CMatrix,
    pub digital: CMatrix,
    /// `‖W − W_A W_D‖²_F` after every outer iteration, before rescaling.
    pub residual_trace: Vec<f64>,
    pub outer_iterations: usize,
}

/// Alternate least-squares `W_D` and manifold `W_A` updates.
///
/// The optimization runs on `W` normalized to `‖W‖²_F = M`, which makes the
/// Armijo step and gradient tolerance scale-free. `warm_start`, when given,
/// competes with the phase initialization and the better starting residual
/// wins. The returned pair is rescaled so `‖W_A W_D‖²_F = min(‖W‖²_F, P_B)`.
pub fn hybrid_factorize(
    w: &CMatrix,
    rf_chains: usize,
    power_budget: f64,
    warm_start: Option<&CMatrix>,
    options: HybridOptions,
) -> Result<HybridOutcome> {
    let (m, k) = w.shape();
    if rf_chains < k {
        return Err(Error::Config(format!("need at least K = {k} RF chains, got {rf_chains}")));
    }
    if rf_chains > m {
        return Err(Error::Config(format!("RF chains ({rf_chains}) exceed antennas ({m})")));
    }
    let power = frob2(w);
    let init = phase_init(w, rf_chains);
    if power == 0.0 {
        return Ok(HybridOutcome {
            analog: init.to_matrix(),
            digital: CMatrix::zeros(rf_chains, k),
            residual_trace: vec![0.0],
            outer_iterations: 0,
        });
    }
    let s = (m as f64 / power).sqrt();
    let wn = w * C64::from(s);

    let dft = ManifoldPoint::from_matrix_unchecked(&CMatrix::from_fn(m, rf_chains, |r, c| {
        C64::from_polar(1.0, -std::f64::consts::TAU * (r * c) as f64 / m as f64)
    }));

    // Mirror-symmetric layouts give W repeated rows, and its phases can then
    // repeat a column; DFT columns are always independent.
    let (mut start, mut digital) = match ls_digital(&init.to_matrix(), &wn) {
        Ok(d) => (init, d),
        Err(Error::Singular(_)) => {
            let d = ls_digital(&dft.to_matrix(), &wn)?;
            (dft.clone(), d)
        }
        Err(e) => return Err(e),
    };
    let mut value = factorization_residual(&start.to_matrix(), &digital, &wn);
    if let Some(prev) = warm_start.filter(|a| a.shape() == (m, rf_chains)) {
        let cand = ManifoldPoint::from_phases(prev);
        if let Ok(d) = ls_digital(&cand.to_matrix(), &wn) {
            let v = factorization_residual(&cand.to_matrix(), &d, &wn);
            if v < value {
                start = cand;
                digital = d;
                value = v;
            }
        }
    }

    let mut run = alternate(&wn, start, digital, value, options)?;
    // With K = 1 the phase start can sit exactly on a stationary point of f₂;
    // the DFT start breaks that symmetry.
    if run.stalled && run.value > 1e-12 * m as f64 {
        let d = ls_digital(&dft.to_matrix(), &wn)?;
        let v = factorization_residual(&dft.to_matrix(), &d, &wn);
        let retry = alternate(&wn, dft, d, v, options)?;
        if retry.value < run.value {
            run = retry;
        }
    }
    let Alternation { point, mut digital, trace, outer, .. } = run;
    let trace = trace.into_iter().map(|v| v / (s * s)).collect();

    let analog = point.to_matrix();
    let produced = frob2(&(&analog * &digital));
    let target = power.min(power_budget);
    if produced > 0.0 {
        digital *= C64::from((target / produced).sqrt());
    }
    Ok(HybridOutcome { analog, digital, residual_trace: trace, outer_iterations: outer })
}

struct Alternation {
    point: ManifoldPoint,
    digital: CMatrix,
    value: f64,
    trace: Vec<f64>,
    outer: usize,
    /// The first manifold step found no descent from the start.
    stalled: bool,
}

fn alternate(
    wn: &CMatrix,
    mut point: ManifoldPoint,
    mut digital: CMatrix,
    mut value: f64,
    options: HybridOptions,
) -> Result<Alternation> {
    let m = wn.nrows();
    let mut trace = vec![value];
    let mut outer = 0;
    let mut stalled = false;
    while outer < options.max_outer && value > 1e-28 * m as f64 {
        outer += 1;
        let mo = mo_analog(wn, &digital, &point, options.mo)?;
        stalled |= outer == 1 && mo.iterations == 0;
        point = ManifoldPoint::from_matrix_unchecked(&mo.analog);
        let next_digital = ls_digital(&mo.analog, wn)?;
        let next_value = factorization_residual(&mo.analog, &next_digital, wn);
        digital = next_digital;
        let improvement = (value - next_value) / value.max(f64::MIN_POSITIVE);
        value = next_value.min(value);
        trace.push(value);
        if improvement < options.tol {
            break;
        }
    }
    Ok(Alternation { point, digital, value, trace, outer, stalled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_gaussian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ManifoldPoint {
        let a = CMatrix::from_fn(m, n, |_, _| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)));
        ManifoldPoint::from_matrix(&a).unwrap()
    }

    #[test]
    fn ls_digital_examples() {
        // DFT columns are orthogonal with squared norm M.
        let m = 4;
        let dft =
            CMatrix::from_fn(m, m, |r, c| C64::from_polar(1.0, -std::f64::consts::TAU * (r * c) as f64 / m as f64));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_gaussian(&mut rng, m, 2);
        let wd = ls_digital(&dft, &w).unwrap();
        assert!((wd - dft.adjoint() * &w / C64::from(m as f64)).norm() < 1e-12);

        let a = random_point(&mut rng, 8, 3).to_matrix();
        let exact = &a * random_gaussian(&mut rng, 3, 2);
        let wd = ls_digital(&a, &exact).unwrap();
        assert!(factorization_residual(&a, &wd, &exact).sqrt() <= 1e-10);

        let w = random_gaussian(&mut rng, 8, 2);
        let wd = ls_digital(&a, &w).unwrap();
        assert!((a.adjoint() * (&w - &a * wd)).norm() < 1e-9);

        let ones = CMatrix::from_element(4, 2, C64::new(1.0, 0.0));
        assert!(matches!(ls_digital(&ones, &w.rows(0, 4).into_owned()), Err(Error::Singular(_))));
    }

    #[test]
    fn gradient_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_point(&mut rng, 5, 2);
        let d = random_gaussian(&mut rng, 2, 2);
        let w = x.to_matrix() * &d;
        assert!(euclidean_gradient_f2(&x, &d, &w).norm() < 1e-12);

        let x = random_point(&mut rng, 4, 2);
        let w = random_gaussian(&mut rng, 4, 2);
        let g = euclidean_gradient_f2(&x, &CMatrix::identity(2, 2), &w);
        let expected = (x.to_matrix() - &w) * C64::new(2.0, 0.0);
        assert!((g - CVector::from_column_slice(expected.as_slice())).norm() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = random_point(&mut rng, 6, 3);
            let d = random_gaussian(&mut rng, 3, 2);
            let w = random_gaussian(&mut rng, 6, 2);
            let g = euclidean_gradient_f2(&x, &d, &w);
            let v = CVector::from_column_slice(random_gaussian(&mut rng, 18, 1).as_slice());
            let h = 1e-6;
            let at = |t: f64| {
                let moved = x.as_vector() + &v * C64::from(t);
                factorization_residual(&CMatrix::from_column_slice(6, 3, moved.as_slice()), &d, &w)
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let analytic = real_inner(&g, &v);
            assert!((fd - analytic).abs() <= 1e-5 * analytic.abs().max(1.0), "{fd} vs {analytic}");
        }
    }

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_point(&mut rng, 3, 2);
        let xv = x.as_vector().clone();
        assert!(riemannian_gradient(&x, &xv).norm() < 1e-15);
        let jx = &xv * C64::new(0.0, 1.0);
        assert!((riemannian_gradient(&x, &jx) - &jx).norm() < 1e-15);
        let v = CVector::from_column_slice(random_gaussian(&mut rng, 6, 1).as_slice());
        for t in [riemannian_gradient(&x, &v), transport(&v, &x)] {
            for (ti, xi) in t.iter().zip(xv.iter()) {
                assert!((ti * xi.conj()).re.abs() < 1e-12);
            }
        }
        assert!((transport(&jx, &x) - &jx).norm() < 1e-15);
        assert!(transport(&xv, &x).norm() < 1e-15);
    }

    #[test]
    fn polak_ribiere_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = CVector::from_column_slice(random_gaussian(&mut rng, 5, 1).as_slice());
        assert_eq!(polak_ribiere(&a, &a), 0.0);
        let b = &a * C64::new(0.0, 1.0);
        assert!((polak_ribiere(&b, &a) - 1.0).abs() < 1e-12);
        assert_eq!(polak_ribiere(&a, &CVector::zeros(5)), 0.0);
        let c = CVector::from_column_slice(random_gaussian(&mut rng, 5, 1).as_slice());
        let direct = (c.dotc(&(&c - &a)).re / a.norm_squared()).max(0.0);
        assert!((polak_ribiere(&c, &a) - direct).abs() < 1e-14);
    }

    #[test]
    fn retraction_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_point(&mut rng, 4, 2);
        let d = CVector::from_column_slice(random_gaussian(&mut rng, 8, 1).as_slice());
        assert_eq!(retract(&x, 0.0, &d).unwrap().0, x);
        let jx = x.as_vector() * C64::new(0.0, 1.0);
        let (y, _) = retract(&x, 1e-4, &jx).unwrap();
        for (a, b) in y.as_vector().iter().zip(x.as_vector().iter()) {
            assert!(((a / b).arg() - 1e-4).abs() < 1e-11);
        }
        let (y, _) = retract(&x, 3.7, &d).unwrap();
        assert!(y.modulus_error() < 1e-15);
        // d = −x sends every entry to zero at β = 1.
        let (y, used) = retract(&x, 1.0, &-x.as_vector()).unwrap();
        assert_eq!(used, 0.5);
        assert!(y.modulus_error() < 1e-15);
    }

    #[test]
    fn mo_terminates_immediately_at_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_point(&mut rng, 6, 2);
        let d = random_gaussian(&mut rng, 2, 2);
        let w = x.to_matrix() * &d;
        let out = mo_analog(&w, &d, &x, MoOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.residual_trace[0] < 1e-24);
    }

    #[test]
    fn mo_trace_monotone_and_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = random_gaussian(&mut rng, 12, 2);
        let d = random_gaussian(&mut rng, 3, 2);
        let x0 = random_point(&mut rng, 12, 3);
        let mut worst = 0.0f64;
        let mut tangency = 0.0f64;
        let out = mo_analog_with(&w, &d, &x0, MoOptions::default(), |it| {
            worst = worst.max(it.point.modulus_error());
            for (v, x) in it.grad.iter().chain(it.dir.iter()).zip(it.point.as_vector().iter().cycle()) {
                tangency = tangency.max((v * x.conj()).re.abs());
            }
        })
        .unwrap();
        assert!(out.iterations > 0);
        assert!(worst < 1e-9);
        assert!(tangency < 1e-9);
        for pair in out.residual_trace.windows(2) {
            assert!(pair[1] < pair[0]);
        }
    }

    #[test]
    fn full_rf_chains_factor_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = random_gaussian(&mut rng, 8, 2);
        let out = hybrid_factorize(&w, 8, 1e9, None, HybridOptions::default()).unwrap();
        let f2 = factorization_residual(&out.analog, &out.digital, &w);
        assert!(f2 <= 1e-6 * frob2(&w));
    }

    #[test]
    fn hybrid_residual_monotone_and_rescaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let w = random_gaussian(&mut rng, 16, 2).scale(0.05);
        let out = hybrid_factorize(&w, 3, 1e9, None, HybridOptions::default()).unwrap();
        for pair in out.residual_trace.windows(2) {
            assert!(pair[1] <= pair[0] * (1.0 + 1e-12));
        }
        let produced = frob2(&(&out.analog * &out.digital));
        assert!((produced - frob2(&w)).abs() <= 1e-12 * frob2(&w));
        let capped = hybrid_factorize(&w, 3, 0.5 * frob2(&w), None, HybridOptions::default()).unwrap();
        let produced = frob2(&(&capped.analog * &capped.digital));
        assert!((produced - 0.5 * frob2(&w)).abs() <= 1e-12 * frob2(&w));
        assert!(matches!(hybrid_factorize(&w, 1, 1.0, None, HybridOptions::default()), Err(Error::Config(_))));
    }

    #[test]
    fn single_stream_escapes_a_stationary_start() {
        // N = 2K admits an exact factorization; the phase start is stationary here.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let w = random_gaussian(&mut rng, 4, 1);
            let out = hybrid_factorize(&w, 2, f64::INFINITY, None, HybridOptions::default()).unwrap();
            assert!(factorization_residual(&out.analog, &out.digital, &w) < 1e-8 * frob2(&w));
        }
    }

    #[test]
    fn phase_init_spans_precoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_gaussian(&mut rng, 10, 2);
        let x = phase_init(&w, 4);
        assert_eq!(x.shape(), (10, 4));
        assert!(x.modulus_error() < 1e-15);
        // A zero precoder still yields a valid point.
        assert!(phase_init(&CMatrix::zeros(5, 2), 3).modulus_error() < 1e-15);
    }
}

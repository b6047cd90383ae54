//! Fully-digital secrecy precoder via the weighted-MMSE reformulation.
//!
//! The secrecy objective `ln det(I + H̃WW^H H̃^H) − ln det(I + Z̃WW^H Z̃^H)` is
//! rewritten with a receive filter `P` and weights `Q_U`, `Q_E`:
//!
//! ```text
//! ln det Q_U − Tr(Q_U 𝔼(P, W)) + K + ln det Q_E − Tr(Q_E (I + Z̃WW^H Z̃^H)) + L_E
//! 𝔼(P, W) = (I − P^H H̃ W)(I − P^H H̃ W)^H + P^H P
//! ```
//!
//! Each block has a closed-form maximizer, so block-coordinate ascent climbs
//! the secrecy rate monotonically. The `W` block is a power-constrained
//! quadratic whose dual variable `μ` is found by bisection.
//!
//! All channels here are noise-whitened (`H̃ = H/σ_U`, `Z̃ = Z/σ_E`) and all
//! objectives use natural logarithms.

use crate::error::{Error, Result};
use crate::linalg::{frob2, hermitian_eigen, hermitian_part, hpd_inverse, ln_det_hpd, CMatrix, C64};
use crate::rates::ln_secrecy_margin;

/// Auxiliary variables of the reformulation plus the current precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    /// `L_U × K` receive filter.
    pub p: CMatrix,
    /// `K × K` user weight.
    pub q_u: CMatrix,
    /// `L_E × L_E` eavesdropper weight.
    pub q_e: CMatrix,
    /// Dual variable of the power constraint.
    pub mu: f64,
    /// `M × K` precoder.
    pub w: CMatrix,
}

/// `(I − P^H H̃ W)(I − P^H H̃ W)^H + P^H P`.
pub fn mse_matrix(p: &CMatrix, w: &CMatrix, ht: &CMatrix) -> CMatrix {
    let k = w.ncols();
    let e = CMatrix::identity(k, k) - p.adjoint() * ht * w;
    &e * e.adjoint() + p.adjoint() * p
}

/// `P = (I + H̃WW^H H̃^H)⁻¹ H̃W`.
pub fn update_receive_filter(ht: &CMatrix, w: &CMatrix) -> Result<CMatrix> {
    let hw = ht * w;
    let l = ht.nrows();
    let a = CMatrix::identity(l, l) + &hw * hw.adjoint();
    let chol = hermitian_part(&a).cholesky().ok_or_else(|| Error::Singular("receive-filter system".into()))?;
    Ok(chol.solve(&hw))
}

/// `Q_U = 𝔼(P, W)⁻¹` and `Q_E = (I + Z̃WW^H Z̃^H)⁻¹`.
pub fn update_weights(p: &CMatrix, w: &CMatrix, ht: &CMatrix, zt: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let q_u = hermitian_part(&hpd_inverse(&mse_matrix(p, w, ht))?);
    let q_e = hermitian_part(&hpd_inverse(&eve_covariance(w, zt))?);
    Ok((q_u, q_e))
}

fn eve_covariance(w: &CMatrix, zt: &CMatrix) -> CMatrix {
    let zw = zt * w;
    CMatrix::identity(zt.nrows(), zt.nrows()) + &zw * zw.adjoint()
}

/// Quadratic and linear parts of the `W`-block Lagrangian:
/// `A = H̃^H P Q_U P^H H̃ + Z̃^H Q_E Z̃`, `B = H̃^H P Q_U^H`.
fn w_block_terms(p: &CMatrix, q_u: &CMatrix, q_e: &CMatrix, ht: &CMatrix, zt: &CMatrix) -> (CMatrix, CMatrix) {
    let hp = ht.adjoint() * p;
    let a = &hp * q_u * hp.adjoint() + zt.adjoint() * q_e * zt;
    let b = &hp * q_u.adjoint();
    (hermitian_part(&a), b)
}

/// Pivot ratio below which a Cholesky factor is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// `W(μ) = (H̃^H P Q_U P^H H̃ + μI + Z̃^H Q_E Z̃)⁻¹ H̃^H P Q_U^H`.
///
/// Fails with [`Error::Singular`] when the system is numerically singular,
/// which happens at `μ = 0` whenever `M` exceeds the combined rank of the two
/// links; callers then need a positive `μ`.
pub fn solve_w_given_mu(
    p: &CMatrix,
    q_u: &CMatrix,
    q_e: &CMatrix,
    ht: &CMatrix,
    zt: &CMatrix,
    mu: f64,
) -> Result<CMatrix> {
    if mu < 0.0 {
        return Err(Error::Dimension(format!("dual variable must be nonnegative, got {mu}")));
    }
    let (a, b) = w_block_terms(p, q_u, q_e, ht, zt);
    let m = a.nrows();
    let sys = a + CMatrix::identity(m, m).scale(mu);
    let chol = sys.cholesky().ok_or_else(|| Error::Singular("W-block system needs positive mu".into()))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().map(|d| d.re * d.re).fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if !(lo > SINGULAR_PIVOT_RATIO * hi) {
        return Err(Error::Singular("W-block system needs positive mu".into()));
    }
    Ok(chol.solve(&b))
}

/// `W(μ)` evaluated through an eigendecomposition of the `W`-block matrix, so
/// that the transmit power is a cheap scalar function of `μ`.
struct DualCurve {
    eigenvalues: Vec<f64>,
    vectors: CMatrix,
    /// `U^H B`, one row per eigenvalue.
    projected: CMatrix,
    /// Ridge added to every eigenvalue; nonzero only when the `μ = 0` system
    /// is numerically singular.
    ridge: f64,
}

impl DualCurve {
    fn new(p: &CMatrix, q_u: &CMatrix, q_e: &CMatrix, ht: &CMatrix, zt: &CMatrix) -> Self {
        let (a, b) = w_block_terms(p, q_u, q_e, ht, zt);
        let m = a.nrows();
        let trace: f64 = a.diagonal().iter().map(|z| z.re).sum();
        let (eigenvalues, vectors) = hermitian_eigen(&a);
        let projected = vectors.adjoint() * b;
        let smallest = eigenvalues.first().copied().unwrap_or(0.0);
        let largest = eigenvalues.last().copied().unwrap_or(0.0);
        let ridge = if smallest <= SINGULAR_PIVOT_RATIO * largest.max(f64::MIN_POSITIVE) {
            1e-12 * trace.max(f64::MIN_POSITIVE) / m as f64
        } else {
            0.0
        };
        Self { eigenvalues, vectors, projected, ridge }
    }

    fn shifted(&self, i: usize, mu: f64) -> f64 {
        self.eigenvalues[i].max(0.0) + self.ridge + mu
    }

    fn power(&self, mu: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.eigenvalues.len() {
            let s = self.shifted(i, mu);
            let row: f64 = self.projected.row(i).iter().map(|z| z.norm_sqr()).sum();
            total += row / (s * s);
        }
        total
    }

    fn precoder(&self, mu: f64) -> CMatrix {
        let mut scaled = self.projected.clone();
        for i in 0..self.eigenvalues.len() {
            let s = self.shifted(i, mu);
            scaled.row_mut(i).unscale_mut(s);
        }
        &self.vectors * scaled
    }
}

/// Maximum number of doublings of the upper bracket.
pub const MAX_BRACKET_DOUBLINGS: usize = 60;
/// Relative tolerance on the transmit power at an active constraint.
pub const POWER_TOLERANCE: f64 = 1e-8;
const MAX_BISECTIONS: usize = 500;

/// Dual variable `μ*` and precoder `W(μ*)` of the `W` block.
///
/// Returns `μ* = 0` when the unconstrained minimizer already meets the
/// budget; otherwise `‖W(μ*)‖²_F = P_B` to relative accuracy
/// [`POWER_TOLERANCE`], using that the power decreases monotonically in `μ`.
pub fn bisect_mu(
    p: &CMatrix,
    q_u: &CMatrix,
    q_e: &CMatrix,
    ht: &CMatrix,
    zt: &CMatrix,
    power_budget: f64,
) -> Result<(f64, CMatrix)> {
    if !(power_budget > 0.0) {
        return Err(Error::Config(format!("power budget must be positive, got {power_budget}")));
    }
    let curve = DualCurve::new(p, q_u, q_e, ht, zt);
    if curve.power(0.0) <= power_budget {
        return Ok((0.0, curve.precoder(0.0)));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while curve.power(hi) >= power_budget {
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(Error::Bracketing { power_budget, mu_hi: hi, power: curve.power(hi) });
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }
    let mut mu = hi;
    for _ in 0..MAX_BISECTIONS {
        mu = 0.5 * (lo + hi);
        let power = curve.power(mu);
        if (power - power_budget).abs() <= POWER_TOLERANCE * power_budget {
            break;
        }
        if power > power_budget {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= f64::EPSILON * hi {
            // Interval exhausted; take the feasible end.
            mu = hi;
            break;
        }
    }
    Ok((mu, curve.precoder(mu)))
}

/// The reformulated objective (natural log).
pub fn wmmse_objective(
    p: &CMatrix,
    q_u: &CMatrix,
    q_e: &CMatrix,
    w: &CMatrix,
    ht: &CMatrix,
    zt: &CMatrix,
) -> Result<f64> {
    let k = w.ncols() as f64;
    let le = zt.nrows() as f64;
    let user = ln_det_hpd(q_u)? - (q_u * mse_matrix(p, w, ht)).trace().re + k;
    let eve = ln_det_hpd(q_e)? - (q_e * eve_covariance(w, zt)).trace().re + le;
    Ok(user + eve)
}

/// Top-`K` right singular directions of `H̃`, scaled to total power `P_B`.
pub fn matched_filter_init(ht: &CMatrix, streams: usize, power_budget: f64) -> CMatrix {
    let m = ht.ncols();
    let (_, vectors) = hermitian_eigen(&(ht.adjoint() * ht));
    let mut w = CMatrix::zeros(m, streams);
    for k in 0..streams.min(m) {
        w.set_column(k, &vectors.column(m - 1 - k));
    }
    let norm2 = frob2(&w);
    if norm2 > 0.0 {
        w *= C64::from((power_budget / norm2).sqrt());
    }
    w
}

/// Top-`K` generalized eigenvectors of the pencil
/// `(I + p H̃^H H̃, I + p Z̃^H Z̃)` with `p = P_B/K`, each carrying power `p`.
///
/// These are the directions with the largest per-stream ratio of user to
/// eavesdropper SNR gain, so they start the WMMSE iteration on the
/// positive-margin side when a matched filter would not.
pub fn generalized_eigen_init(ht: &CMatrix, zt: &CMatrix, streams: usize, power_budget: f64) -> Result<CMatrix> {
    let m = ht.ncols();
    if zt.ncols() != m || streams == 0 {
        return Err(Error::Dimension("channels must share the antenna count".into()));
    }
    let p = power_budget / streams as f64;
    let eye = CMatrix::identity(m, m);
    let a = &eye + ht.adjoint() * ht * C64::from(p);
    let b = &eye + zt.adjoint() * zt * C64::from(p);
    let singular = || Error::Singular("eavesdropper covariance".into());
    let l = nalgebra::Cholesky::new(b).ok_or_else(singular)?.unpack();
    let left = l.solve_lower_triangular(&a).ok_or_else(singular)?;
    let pencil = l.solve_lower_triangular(&left.adjoint()).ok_or_else(singular)?;
    let (_, vectors) = hermitian_eigen(&hermitian_part(&pencil.adjoint()));
    let mut w = CMatrix::zeros(m, streams);
    for k in 0..streams.min(m) {
        let y = vectors.column(m - 1 - k).into_owned();
        let x = l.adjoint().solve_upper_triangular(&y).ok_or_else(singular)?;
        w.set_column(k, &(&x * C64::from(p.sqrt() / x.norm())));
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmmseOptions {
    /// Relative objective change that ends the iteration.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for WmmseOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iters: 300 }
    }
}

#[derive(Debug, Clone)]
pub struct WmmseOutcome {
    pub state: WmmseState,
    /// Secrecy rate `[R_U − R_E]⁺` in bits/s/Hz, starting with the initial
    /// precoder and then after every sweep.
    pub secrecy_trace: Vec<f64>,
    /// Unclamped natural-log margin `R_U − R_E` for the same iterates.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

/// Block-coordinate ascent `P → (Q_U, Q_E) → W` from a feasible `W₀`.
pub fn wmmse_fully_digital(
    ht: &CMatrix,
    zt: &CMatrix,
    power_budget: f64,
    w0: &CMatrix,
    options: WmmseOptions,
) -> Result<WmmseOutcome> {
    if ht.ncols() != zt.ncols() || ht.ncols() != w0.nrows() {
        return Err(Error::Dimension("channels and precoder disagree on M".into()));
    }
    if frob2(w0) > power_budget * (1.0 + POWER_TOLERANCE) {
        return Err(Error::Config("initial precoder exceeds the power budget".into()));
    }
    let mut w = w0.clone();
    let mut objective = ln_secrecy_margin(ht, zt, &w)?;
    let mut objective_trace = vec![objective];
    let mut secrecy_trace = vec![to_bits(objective)];
    let mut state = None;
    let mut iterations = 0;
    for _ in 0..options.max_iters {
        iterations += 1;
        let p = update_receive_filter(ht, &w)?;
        let (q_u, q_e) = update_weights(&p, &w, ht, zt)?;
        let (mu, next) = bisect_mu(&p, &q_u, &q_e, ht, zt, power_budget)?;
        let next_objective = ln_secrecy_margin(ht, zt, &next)?;
        let change = (next_objective - objective).abs() / (objective.abs() + 1e-12);
        // Block ascent cannot lose ground; anything below is rounding.
        if next_objective >= objective {
            w = next;
            objective = next_objective;
        }
        state = Some(WmmseState { p, q_u, q_e, mu, w: w.clone() });
        objective_trace.push(objective);
        secrecy_trace.push(to_bits(objective));
        if change < options.tol {
            break;
        }
    }
    let state = match state {
        Some(s) => s,
        None => {
            let p = update_receive_filter(ht, &w)?;
            let (q_u, q_e) = update_weights(&p, &w, ht, zt)?;
            WmmseState { p, q_u, q_e, mu: 0.0, w }
        }
    };
    Ok(WmmseOutcome { state, secrecy_trace, objective_trace, iterations })
}

fn to_bits(ln_margin: f64) -> f64 {
    (ln_margin / std::f64::consts::LN_2).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_element(1, 1, C64::new(x, 0.0))
    }

    fn instance(seed: u64, m: usize, lu: usize, le: usize, k: usize) -> (CMatrix, CMatrix, CMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ht = random_gaussian(&mut rng, lu, m);
        let zt = random_gaussian(&mut rng, le, m).scale(0.5);
        let w = random_gaussian(&mut rng, m, k).scale(0.3);
        (ht, zt, w)
    }

    #[test]
    fn mse_matrix_examples() {
        let (ht, _, w) = instance(1, 6, 3, 2, 2);
        let zero_p = CMatrix::zeros(3, 2);
        assert_eq!(mse_matrix(&zero_p, &w, &ht), CMatrix::identity(2, 2));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_gaussian(&mut rng, 3, 2);
        let e0 = mse_matrix(&p, &CMatrix::zeros(6, 2), &ht);
        assert!((e0 - (CMatrix::identity(2, 2) + p.adjoint() * &p)).norm() < 1e-14);
        // At the optimal filter: 𝔼 = (I + W^H H̃^H H̃ W)⁻¹.
        let p = update_receive_filter(&ht, &w).unwrap();
        let hw = &ht * &w;
        let direct = (CMatrix::identity(2, 2) + hw.adjoint() * &hw).try_inverse().unwrap();
        assert!((mse_matrix(&p, &w, &ht) - direct).norm() < 1e-12);
    }

    #[test]
    fn receive_filter_examples() {
        let (ht, _, w) = instance(3, 8, 4, 2, 2);
        assert!(update_receive_filter(&ht, &CMatrix::zeros(8, 2)).unwrap().norm() == 0.0);
        let p = update_receive_filter(&scalar(1.0), &scalar(1.0)).unwrap();
        assert!((p[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-15);
        let p = update_receive_filter(&ht, &w).unwrap();
        let hw = &ht * &w;
        let residual = (CMatrix::identity(4, 4) + &hw * hw.adjoint()) * &p - &hw;
        assert!(residual.norm() < 1e-10);
    }

    #[test]
    fn weight_examples() {
        let (ht, zt, w) = instance(4, 8, 3, 2, 2);
        let (qu, qe) = update_weights(&CMatrix::zeros(3, 2), &CMatrix::zeros(8, 2), &ht, &zt).unwrap();
        assert!((qu - CMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((qe - CMatrix::identity(2, 2)).norm() < 1e-14);
        let (qu, _) = update_weights(&scalar(0.5), &scalar(1.0), &scalar(1.0), &scalar(0.0)).unwrap();
        assert!((qu[(0, 0)] - C64::new(2.0, 0.0)).norm() < 1e-14);
        let p = update_receive_filter(&ht, &w).unwrap();
        let (qu, qe) = update_weights(&p, &w, &ht, &zt).unwrap();
        assert!((&qu * mse_matrix(&p, &w, &ht) - CMatrix::identity(2, 2)).norm() < 1e-10);
        for q in [&qu, &qe] {
            assert!((q - q.adjoint()).norm() < 1e-14);
            assert!(hermitian_eigen(q).0[0] > 0.0);
        }
    }

    #[test]
    fn w_given_mu_examples() {
        let w = solve_w_given_mu(&scalar(0.5), &scalar(2.0), &scalar(1.0), &scalar(1.0), &scalar(0.0), 0.0).unwrap();
        assert!((w[(0, 0)] - C64::new(2.0, 0.0)).norm() < 1e-14);

        let (ht, zt, w0) = instance(5, 6, 3, 3, 2);
        let p = update_receive_filter(&ht, &w0).unwrap();
        let (qu, qe) = update_weights(&p, &w0, &ht, &zt).unwrap();
        let big = solve_w_given_mu(&p, &qu, &qe, &ht, &zt, 1e12).unwrap();
        assert!(big.norm() < 1e-9);

        // Lagrangian stationarity: (A + μI)W − B = 0.
        let mu = 0.37;
        let w = solve_w_given_mu(&p, &qu, &qe, &ht, &zt, mu).unwrap();
        let (a, b) = w_block_terms(&p, &qu, &qe, &ht, &zt);
        let grad = &a * &w + w.scale(mu) - &b;
        assert!(grad.norm() < 1e-8 * b.norm().max(1.0));

        // M larger than the combined rank: singular at μ = 0.
        let (ht, zt, w0) = instance(6, 12, 2, 2, 2);
        let p = update_receive_filter(&ht, &w0).unwrap();
        let (qu, qe) = update_weights(&p, &w0, &ht, &zt).unwrap();
        assert!(matches!(solve_w_given_mu(&p, &qu, &qe, &ht, &zt, 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn bisection_power_and_monotonicity() {
        for seed in 0..20 {
            let (ht, zt, w0) = instance(100 + seed, 8, 2, 2, 2);
            let p = update_receive_filter(&ht, &w0).unwrap();
            let (qu, qe) = update_weights(&p, &w0, &ht, &zt).unwrap();
            let (mu, w) = bisect_mu(&p, &qu, &qe, &ht, &zt, 1e-3).unwrap();
            assert!(mu > 0.0);
            assert!((frob2(&w) - 1e-3).abs() <= 1e-8 * 1e-3);
            assert!(mu * (frob2(&w) - 1e-3).abs() < 1e-6);
            let (mu_big, _) = bisect_mu(&p, &qu, &qe, &ht, &zt, 1e12).unwrap();
            assert_eq!(mu_big, 0.0);
            let curve = DualCurve::new(&p, &qu, &qe, &ht, &zt);
            let mut prev = f64::INFINITY;
            for i in 0..40 {
                let power = curve.power(1e-4 * 1.5f64.powi(i));
                assert!(power <= prev);
                prev = power;
            }
            // Eigen route agrees with the direct linear solve.
            let direct = solve_w_given_mu(&p, &qu, &qe, &ht, &zt, mu).unwrap();
            assert!((direct - &w).norm() <= 1e-8 * w.norm());
        }
    }

    #[test]
    fn objective_examples() {
        let (ht, zt, w) = instance(7, 8, 2, 3, 2);
        let zero = wmmse_objective(
            &CMatrix::zeros(2, 2),
            &CMatrix::identity(2, 2),
            &CMatrix::identity(3, 3),
            &CMatrix::zeros(8, 2),
            &ht,
            &zt,
        )
        .unwrap();
        assert!(zero.abs() < 1e-14);
        let p = update_receive_filter(&ht, &w).unwrap();
        let (qu, qe) = update_weights(&p, &w, &ht, &zt).unwrap();
        let obj = wmmse_objective(&p, &qu, &qe, &w, &ht, &zt).unwrap();
        let margin = ln_secrecy_margin(&ht, &zt, &w).unwrap();
        assert!((obj - margin).abs() <= 1e-8 * margin.abs().max(1.0));
    }

    #[test]
    fn block_updates_never_decrease_objective() {
        let (ht, zt, w) = instance(8, 8, 2, 2, 2);
        let pb = frob2(&w);
        let mut w = w;
        let mut p = CMatrix::zeros(2, 2);
        let mut qu = CMatrix::identity(2, 2);
        let mut qe = CMatrix::identity(2, 2);
        let mut last = wmmse_objective(&p, &qu, &qe, &w, &ht, &zt).unwrap();
        for _ in 0..15 {
            p = update_receive_filter(&ht, &w).unwrap();
            let o = wmmse_objective(&p, &qu, &qe, &w, &ht, &zt).unwrap();
            assert!(o >= last - 1e-9);
            last = o;
            (qu, qe) = update_weights(&p, &w, &ht, &zt).unwrap();
            let o = wmmse_objective(&p, &qu, &qe, &w, &ht, &zt).unwrap();
            assert!(o >= last - 1e-9);
            last = o;
            w = bisect_mu(&p, &qu, &qe, &ht, &zt, pb).unwrap().1;
            let o = wmmse_objective(&p, &qu, &qe, &w, &ht, &zt).unwrap();
            assert!(o >= last - 1e-9);
            last = o;
        }
    }

    #[test]
    fn trace_monotone_and_feasible() {
        let (ht, zt, _) = instance(9, 8, 2, 2, 2);
        let w0 = matched_filter_init(&ht, 2, 2.0);
        assert!((frob2(&w0) - 2.0).abs() < 1e-12);
        let out = wmmse_fully_digital(&ht, &zt, 2.0, &w0, WmmseOptions::default()).unwrap();
        for pair in out.objective_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-8);
        }
        assert!(frob2(&out.state.w) <= 2.0 * (1.0 + 1e-8));
        let slack = out.state.mu * (frob2(&out.state.w) - 2.0);
        assert!(slack.abs() < 1e-6);
    }

    /// Capacity of `H̃` under a sum-power constraint by water-filling over the
    /// eigenvalues of `H̃^H H̃`.
    fn waterfilling_capacity(ht: &CMatrix, power: f64, streams: usize) -> f64 {
        let (vals, _) = hermitian_eigen(&(ht.adjoint() * ht));
        let mut gains: Vec<f64> = vals.into_iter().rev().take(streams).filter(|g| *g > 1e-12).collect();
        loop {
            let n = gains.len() as f64;
            let level = (power + gains.iter().map(|g| 1.0 / g).sum::<f64>()) / n;
            if gains.iter().all(|g| level > 1.0 / g) {
                return gains.iter().map(|g| (level * g).ln()).sum();
            }
            gains.pop();
        }
    }

    #[test]
    fn no_eavesdropper_reaches_waterfilling() {
        let (ht, _, _) = instance(10, 8, 3, 2, 2);
        let zt = CMatrix::zeros(2, 8);
        let w0 = matched_filter_init(&ht, 2, 1.5);
        let out = wmmse_fully_digital(&ht, &zt, 1.5, &w0, WmmseOptions { tol: 1e-10, max_iters: 2000 }).unwrap();
        let achieved = *out.objective_trace.last().unwrap();
        let optimum = waterfilling_capacity(&ht, 1.5, 2);
        assert!(achieved <= optimum + 1e-9);
        assert!(achieved >= 0.99 * optimum, "{achieved} vs {optimum}");
    }

    /// Projected gradient ascent on the secrecy margin over the power ball,
    /// restarted from several points, as an independent optimum estimate.
    fn projected_gradient_secrecy(ht: &CMatrix, zt: &CMatrix, power: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = f64::NEG_INFINITY;
        for restart in 0..8 {
            let mut w =
                if restart == 0 { matched_filter_init(ht, 1, power) } else { random_gaussian(&mut rng, ht.ncols(), 1) };
            w *= C64::from((power / frob2(&w)).sqrt());
            let mut step = 1e-2;
            let mut value = ln_secrecy_margin(ht, zt, &w).unwrap();
            for _ in 0..20_000 {
                // ∇_W* of ln det(I + XWW^H X^H) = X^H (I + XWW^H X^H)⁻¹ X W.
                let grad_of = |x: &CMatrix| {
                    let xw = x * &w;
                    let inv = (CMatrix::identity(x.nrows(), x.nrows()) + &xw * xw.adjoint()).try_inverse().unwrap();
                    x.adjoint() * inv * xw
                };
                let g = grad_of(ht) - grad_of(zt);
                let mut cand = &w + g.scale(step);
                let n2 = frob2(&cand);
                if n2 > power {
                    cand *= C64::from((power / n2).sqrt());
                }
                let v = ln_secrecy_margin(ht, zt, &cand).unwrap();
                if v > value {
                    w = cand;
                    value = v;
                    step *= 1.2;
                } else {
                    step *= 0.5;
                    if step < 1e-14 {
                        break;
                    }
                }
            }
            best = best.max(value);
        }
        best
    }

    #[test]
    fn single_stream_matches_projected_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let ht = random_gaussian(&mut rng, 2, 8);
        let zt = random_gaussian(&mut rng, 2, 8).scale(0.6);
        let w0 = matched_filter_init(&ht, 1, 4.0);
        let out = wmmse_fully_digital(&ht, &zt, 4.0, &w0, WmmseOptions { tol: 1e-12, max_iters: 3000 }).unwrap();
        let ours = *out.objective_trace.last().unwrap() / std::f64::consts::LN_2;
        let oracle = projected_gradient_secrecy(&ht, &zt, 4.0, 1) / std::f64::consts::LN_2;
        assert!(ours >= oracle * (1.0 - 0.005), "wmmse {ours} vs oracle {oracle}");
    }

    #[test]
    fn generalized_eigen_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ht = random_gaussian(&mut rng, 3, 6);
        let zt = random_gaussian(&mut rng, 2, 6);
        let (pb, k) = (2.0, 2);
        let w = generalized_eigen_init(&ht, &zt, k, pb).unwrap();
        assert!((frob2(&w) - pb).abs() < 1e-12);
        let p = pb / k as f64;
        let eye = CMatrix::identity(6, 6);
        let a = &eye + ht.adjoint() * &ht * C64::from(p);
        let b = &eye + zt.adjoint() * &zt * C64::from(p);
        let ratio = |x: &CMatrix| x.dotc(&(&a * x)).re / x.dotc(&(&b * x)).re;
        let top = ratio(&w.columns(0, 1).into_owned());
        for c in 0..k {
            let x = w.columns(c, 1).into_owned();
            let lambda = C64::from(ratio(&x));
            assert!((&a * &x - &b * &x * lambda).norm() < 1e-9 * (&a * &x).norm());
        }
        for _ in 0..50 {
            assert!(ratio(&random_gaussian(&mut rng, 6, 1)) <= top + 1e-12);
        }

        // Without an eavesdropper the pencil reduces to the matched filter.
        let none = CMatrix::zeros(2, 6);
        let g = generalized_eigen_init(&ht, &none, k, pb).unwrap();
        let mf = matched_filter_init(&ht, k, pb);
        let proj = &mf * mf.adjoint() / C64::from(p);
        assert!((&proj * &g - &g).norm() < 1e-9);
    }
}

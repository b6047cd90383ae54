//! Scene geometry and line-of-sight channel synthesis.
//!
//! The base station array lives in the `y–O–z` plane (`x = 0`), so antenna
//! positions are stored as in-plane `(y, z)` pairs. Receivers are described by
//! per-element polar coordinates `(r, θ, φ)` with `θ` the azimuth and `φ` the
//! elevation measured from the `z` axis.
//!
//! Channel entries follow the convention `g · exp(−j·2π·d/λ)` with the
//! free-space gain `g = λ / (4π d)`.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

pub type Point2 = Vector2<f64>;
pub type Point3 = Vector3<f64>;

/// Square region `{(0, y, z) : |y| ≤ A/2, |z| ≤ A/2}` the antennas may move in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingRegion {
    half_width: f64,
}

impl MovingRegion {
    /// Region of side length `side` meters.
    pub fn new(side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::Geometry(format!("region side must be positive, got {side}")));
        }
        Ok(Self { half_width: side / 2.0 })
    }

    pub fn side(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x.abs() <= self.half_width && p.y.abs() <= self.half_width
    }

    /// Radius of the circle circumscribing the region.
    pub fn half_diagonal(&self) -> f64 {
        self.half_width * std::f64::consts::SQRT_2
    }
}

/// Positions of the `M` movable antennas, stored as in-plane `(y, z)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaLayout {
    positions: Vec<Point2>,
    min_spacing: f64,
}

/// Slack allowed on the pairwise spacing check.
pub const SPACING_SLACK: f64 = 1e-12;

impl AntennaLayout {
    /// Validated layout: all positions inside `region` and pairwise at least
    /// `min_spacing` apart.
    pub fn new(positions: Vec<Point2>, region: &MovingRegion, min_spacing: f64) -> Result<Self> {
        let layout = Self::unchecked(positions, min_spacing);
        layout.validate(region)?;
        Ok(layout)
    }

    /// Layout without feasibility checks (duplicated antennas in tests,
    /// transient states inside solvers).
    pub fn unchecked(positions: Vec<Point2>, min_spacing: f64) -> Self {
        Self { positions, min_spacing }
    }

    pub fn validate(&self, region: &MovingRegion) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::Geometry("layout has no antennas".into()));
        }
        if let Some(p) = self.positions.iter().find(|p| !region.contains(p)) {
            return Err(Error::Geometry(format!(
                "antenna at ({:.6}, {:.6}) lies outside the {} m region",
                p.x,
                p.y,
                region.side()
            )));
        }
        let d = self.min_pairwise_distance();
        if d < self.min_spacing - SPACING_SLACK {
            return Err(Error::Geometry(format!(
                "antennas {d:e} m apart, minimum spacing is {:e} m",
                self.min_spacing
            )));
        }
        Ok(())
    }

    pub fn is_feasible(&self, region: &MovingRegion) -> bool {
        self.validate(region).is_ok()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_spacing(&self) -> f64 {
        self.min_spacing
    }

    pub fn positions(&self) -> &[Point2] {
        &self.positions
    }

    pub fn position(&self, m: usize) -> Point2 {
        self.positions[m]
    }

    pub fn set_position(&mut self, m: usize, p: Point2) {
        self.positions[m] = p;
    }

    /// Cartesian position `(0, y, z)` of antenna `m`.
    pub fn position3(&self, m: usize) -> Point3 {
        to_cartesian(&self.positions[m])
    }

    /// Smallest pairwise distance (infinity for a single antenna).
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                best = best.min((a - b).norm());
            }
        }
        best
    }
}

/// Lift an in-plane `(y, z)` point onto the array plane `x = 0`.
pub fn to_cartesian(p: &Point2) -> Point3 {
    Point3::new(0.0, p.x, p.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Eavesdropper,
}

/// Polar coordinates of one receive element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    /// Distance from the origin in meters.
    pub r: f64,
    /// Azimuth `θ` in radians.
    pub azimuth: f64,
    /// Elevation `φ` in radians, measured from the `z` axis.
    pub elevation: f64,
}

impl PolarPoint {
    pub fn new(r: f64, azimuth: f64, elevation: f64) -> Self {
        Self { r, azimuth, elevation }
    }

    /// Point in the `x–O–y` plane (`φ = π/2`).
    pub fn in_plane(r: f64, azimuth: f64) -> Self {
        Self::new(r, azimuth, PI / 2.0)
    }

    /// Unit vector of the in-plane projection used by the Fresnel expansion:
    /// `(sinθ·sinφ, cosφ)`, i.e. the `(y, z)` components of the direction.
    pub fn planar_direction(&self) -> Point2 {
        Point2::new(self.azimuth.sin() * self.elevation.sin(), self.elevation.cos())
    }

    fn from_cartesian(p: &Point3) -> Self {
        let r = p.norm();
        Self { r, azimuth: p.y.atan2(p.x), elevation: (p.z / r).clamp(-1.0, 1.0).acos() }
    }
}

/// `r_l = [r cosθ sinφ, r sinθ sinφ, r cosφ]`.
pub fn receiver_position(p: &PolarPoint) -> Result<Point3> {
    if !(p.r > 0.0 && p.r.is_finite()) {
        return Err(Error::Geometry(format!("receiver distance must be positive, got {}", p.r)));
    }
    let (st, ct) = p.azimuth.sin_cos();
    let (sp, cp) = p.elevation.sin_cos();
    Ok(Point3::new(p.r * ct * sp, p.r * st * sp, p.r * cp))
}

/// A multi-antenna receiver (the legitimate user or the eavesdropper).
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverGeometry {
    pub role: Role,
    elements: Vec<PolarPoint>,
    cartesian: Vec<Point3>,
    /// Noise variance `σ²` in watts.
    pub noise_variance: f64,
}

impl ReceiverGeometry {
    pub fn new(role: Role, elements: Vec<PolarPoint>, noise_variance: f64) -> Result<Self> {
        if elements.len() < 2 {
            return Err(Error::Geometry(format!("receivers need at least two elements, got {}", elements.len())));
        }
        let cartesian = elements.iter().map(receiver_position).collect::<Result<Vec<_>>>()?;
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::Geometry(format!("noise variance must be positive, got {noise_variance}")));
        }
        Ok(Self { role, elements, cartesian, noise_variance })
    }

    /// Planar array of `count` elements centered at `center`, spaced `λ/2`
    /// and facing the origin. Elements fill a `⌈√L⌉`-wide grid row by row;
    /// rows run horizontally, perpendicular to the line of sight.
    pub fn planar_array(
        role: Role,
        center: PolarPoint,
        count: usize,
        wavelength: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        let c = receiver_position(&center)?;
        let u = c / c.norm();
        let mut horizontal = Point3::z().cross(&u);
        if horizontal.norm() < 1e-12 {
            horizontal = Point3::x();
        }
        let horizontal = horizontal.normalize();
        let vertical = u.cross(&horizontal);
        let cols = (count as f64).sqrt().ceil().max(1.0) as usize;
        let rows = count.div_ceil(cols);
        let spacing = wavelength / 2.0;
        let elements = (0..count)
            .map(|i| {
                let (row, col) = (i / cols, i % cols);
                let a = (col as f64 - (cols as f64 - 1.0) / 2.0) * spacing;
                let b = (row as f64 - (rows as f64 - 1.0) / 2.0) * spacing;
                PolarPoint::from_cartesian(&(c + horizontal * a + vertical * b))
            })
            .collect();
        Self::new(role, elements, noise_variance)
    }

    pub fn elements(&self) -> &[PolarPoint] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.cartesian
    }
}

/// Free-space gain `λ / (4π‖t − r‖)`.
pub fn path_gain(t: &Point3, r: &Point3, wavelength: f64) -> Result<f64> {
    let d = (t - r).norm();
    if !(d > 0.0) {
        return Err(Error::CoincidentPoints { distance: d });
    }
    Ok(wavelength / (4.0 * PI * d))
}

/// Near-field response vector: `exp(j·2π‖t − r_l‖/λ)` per receiver.
pub fn nfrv(t: &Point3, receivers: &[Point3], wavelength: f64) -> Result<CVector> {
    let k = 2.0 * PI / wavelength;
    let mut out = CVector::zeros(receivers.len());
    for (l, r) in receivers.iter().enumerate() {
        let d = (t - r).norm();
        if !(d > 0.0) {
            return Err(Error::CoincidentPoints { distance: d });
        }
        out[l] = C64::from_polar(1.0, k * d);
    }
    Ok(out)
}

/// Complex `L × M` channel from the array to one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: CMatrix,
    pub wavelength: f64,
}

impl ChannelMatrix {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    /// Channel divided by the receiver noise standard deviation.
    pub fn whitened(&self, noise_variance: f64) -> CMatrix {
        self.entries.unscale(noise_variance.sqrt())
    }
}

/// Propagation model used when synthesizing channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// Spherical wavefront with per-pair free-space gain.
    #[default]
    NearField,
    /// Plane wavefront with one gain per receive element.
    FarField,
}

impl ChannelModel {
    pub fn channel(self, layout: &AntennaLayout, geom: &ReceiverGeometry, wavelength: f64) -> Result<ChannelMatrix> {
        match self {
            ChannelModel::NearField => near_field_channel(layout, geom, wavelength),
            ChannelModel::FarField => far_field_channel(layout, geom, wavelength),
        }
    }

    /// One channel column `h(t)` for an antenna at in-plane point `t`.
    pub fn column(self, t: &Point2, geom: &ReceiverGeometry, wavelength: f64) -> Result<CVector> {
        let k = 2.0 * PI / wavelength;
        let t3 = to_cartesian(t);
        let mut col = CVector::zeros(geom.len());
        for (l, (e, r)) in geom.elements().iter().zip(geom.positions()).enumerate() {
            let r = *r;
            col[l] = match self {
                ChannelModel::NearField => {
                    let g = path_gain(&t3, &r, wavelength)?;
                    C64::from_polar(g, -k * (t3 - r).norm())
                }
                ChannelModel::FarField => {
                    let g = path_gain(&Point3::zeros(), &r, wavelength)?;
                    let dir = r / e.r;
                    C64::from_polar(g, -k * (e.r - t3.dot(&dir)))
                }
            };
        }
        Ok(col)
    }
}

/// Spherical-wave channel: entry `(l, m) = g_{l,m} · exp(−j·2π‖t_m − r_l‖/λ)`.
pub fn near_field_channel(layout: &AntennaLayout, geom: &ReceiverGeometry, wavelength: f64) -> Result<ChannelMatrix> {
    build_channel(ChannelModel::NearField, layout, geom, wavelength)
}

/// Plane-wave channel: entry `(l, m) = ĝ_l · exp(−j·2π(r_l − t_m·k_l)/λ)` with
/// `k_l` the unit direction of element `l` and `ĝ_l` its gain from the origin.
pub fn far_field_channel(layout: &AntennaLayout, geom: &ReceiverGeometry, wavelength: f64) -> Result<ChannelMatrix> {
    build_channel(ChannelModel::FarField, layout, geom, wavelength)
}

fn build_channel(
    model: ChannelModel,
    layout: &AntennaLayout,
    geom: &ReceiverGeometry,
    wavelength: f64,
) -> Result<ChannelMatrix> {
    if !(wavelength > 0.0) {
        return Err(Error::Geometry(format!("wavelength must be positive, got {wavelength}")));
    }
    let mut entries = CMatrix::zeros(geom.len(), layout.len());
    for (m, t) in layout.positions().iter().enumerate() {
        entries.set_column(m, &model.column(t, geom, wavelength)?);
    }
    if !crate::linalg::all_finite(&entries) {
        return Err(Error::NonFinite("channel matrix"));
    }
    Ok(ChannelMatrix { entries, wavelength })
}

/// Second-order (Fresnel) expansion of `‖t − r‖` for an in-plane antenna
/// point `t = (y, z)` and a receive element at polar coordinates `e`:
///
/// `γ = r − (y sinθ sinφ + z cosφ) + [y² + z² − (y sinθ sinφ + z cosφ)²] / (2r)`.
pub fn fresnel_distance(t: &Point2, e: &PolarPoint) -> f64 {
    let proj = t.dot(&e.planar_direction());
    e.r - proj + (t.norm_squared() - proj * proj) / (2.0 * e.r)
}

/// Rayleigh distance `2D²/λ`.
pub fn rayleigh_distance(aperture: f64, wavelength: f64) -> Result<f64> {
    if !(aperture > 0.0 && wavelength > 0.0) {
        return Err(Error::Geometry("aperture and wavelength must be positive".into()));
    }
    Ok(2.0 * aperture * aperture / wavelength)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 0.01;

    fn user(count: usize) -> ReceiverGeometry {
        ReceiverGeometry::planar_array(Role::User, PolarPoint::in_plane(15.0, PI / 4.0), count, LAMBDA, 1e-11).unwrap()
    }

    #[test]
    fn receiver_positions_examples() {
        let p = receiver_position(&PolarPoint::in_plane(15.0, PI / 4.0)).unwrap();
        assert_relative_eq!(p, Point3::new(15.0 / 2f64.sqrt(), 15.0 / 2f64.sqrt(), 0.0), epsilon = 1e-12);
        let p = receiver_position(&PolarPoint::new(1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(p, Point3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        let p = receiver_position(&PolarPoint::in_plane(10.0, PI / 4.0)).unwrap();
        assert_relative_eq!(p, Point3::new(10.0 / 2f64.sqrt(), 10.0 / 2f64.sqrt(), 0.0), epsilon = 1e-12);
        assert!(receiver_position(&PolarPoint::in_plane(0.0, 0.0)).is_err());
        assert!(receiver_position(&PolarPoint::in_plane(-1.0, 0.0)).is_err());
    }

    #[test]
    fn path_gain_examples() {
        let o = Point3::zeros();
        let g = path_gain(&o, &Point3::new(10.0, 0.0, 0.0), 0.01).unwrap();
        assert_relative_eq!(g, 0.01 / (40.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(g, 7.9577e-5, max_relative = 1e-4);
        let unit = path_gain(&o, &Point3::new(0.01 / (4.0 * PI), 0.0, 0.0), 0.01).unwrap();
        assert_relative_eq!(unit, 1.0, max_relative = 1e-14);
        let g2 = path_gain(&o, &Point3::new(20.0, 0.0, 0.0), 0.01).unwrap();
        assert_relative_eq!(g2, g / 2.0, max_relative = 1e-14);
        assert!(matches!(path_gain(&o, &o, 0.01), Err(Error::CoincidentPoints { .. })));
    }

    #[test]
    fn nfrv_examples() {
        let t = Point3::zeros();
        let at_lambda = vec![Point3::new(LAMBDA, 0.0, 0.0), Point3::new(0.0, LAMBDA, 0.0)];
        for z in nfrv(&t, &at_lambda, LAMBDA).unwrap().iter() {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let half = vec![Point3::new(LAMBDA / 2.0, 0.0, 0.0)];
        assert!((nfrv(&t, &half, LAMBDA).unwrap()[0] - C64::new(-1.0, 0.0)).norm() < 1e-12);
        let r = vec![Point3::new(0.0, 0.0, 3.7 * LAMBDA)];
        let expected = C64::from_polar(1.0, 2.0 * PI * 3.7);
        assert!((nfrv(&t, &r, LAMBDA).unwrap()[0] - expected).norm() < 1e-12);
    }

    #[test]
    fn nfrv_unit_modulus() {
        let geom = user(4);
        let v = nfrv(&Point3::new(0.0, 0.3, -0.2), geom.positions(), LAMBDA).unwrap();
        for z in v.iter() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn near_field_scalar_and_duplicates() {
        // Receiver exactly one wavelength away: zero net phase.
        let geom = ReceiverGeometry::new(
            Role::User,
            vec![PolarPoint::new(LAMBDA, 0.0, 0.0), PolarPoint::new(2.0, 0.0, 0.0)],
            1.0,
        )
        .unwrap();
        let region = MovingRegion::new(1.0).unwrap();
        let layout = AntennaLayout::new(vec![Point2::zeros()], &region, 0.005).unwrap();
        let h = near_field_channel(&layout, &geom, LAMBDA).unwrap();
        let g = LAMBDA / (4.0 * PI * LAMBDA);
        assert!((h.entries[(0, 0)] - C64::new(g, 0.0)).norm() < 1e-12);

        let dup = AntennaLayout::unchecked(vec![Point2::new(0.1, 0.0), Point2::new(0.1, 0.0)], 0.0);
        let h = near_field_channel(&dup, &user(2), LAMBDA).unwrap();
        assert_eq!(h.entries.column(0), h.entries.column(1));
    }

    #[test]
    fn near_field_matches_elementwise_oracle_and_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let geom = ReceiverGeometry::new(
            Role::User,
            vec![
                PolarPoint::new(rng.random_range(5.0..20.0), rng.random_range(0.0..PI), 1.3),
                PolarPoint::new(rng.random_range(5.0..20.0), rng.random_range(0.0..PI), 1.7),
            ],
            1.0,
        )
        .unwrap();
        let positions: Vec<Point2> =
            (0..2).map(|_| Point2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))).collect();
        let layout = AntennaLayout::unchecked(positions.clone(), 0.0);
        let h = near_field_channel(&layout, &geom, LAMBDA).unwrap();
        for (m, t) in positions.iter().enumerate() {
            for (l, e) in geom.elements().iter().enumerate() {
                let (st, ct) = e.azimuth.sin_cos();
                let (sp, cp) = e.elevation.sin_cos();
                let rx = [e.r * ct * sp, e.r * st * sp, e.r * cp];
                let d = (rx[0].powi(2) + (rx[1] - t.x).powi(2) + (rx[2] - t.y).powi(2)).sqrt();
                let g = LAMBDA / (4.0 * PI * d);
                let expected = C64::new(g * (2.0 * PI * d / LAMBDA).cos(), -g * (2.0 * PI * d / LAMBDA).sin());
                assert!((h.entries[(l, m)] - expected).norm() <= 1e-12 * g);
                assert_relative_eq!(h.entries[(l, m)].norm(), g, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn near_field_permutation_equivariant() {
        let geom = user(4);
        let a = vec![Point2::new(0.1, 0.2), Point2::new(-0.3, 0.05), Point2::new(0.0, -0.4)];
        let b = vec![a[2], a[0], a[1]];
        let ha = near_field_channel(&AntennaLayout::unchecked(a, 0.0), &geom, LAMBDA).unwrap();
        let hb = near_field_channel(&AntennaLayout::unchecked(b, 0.0), &geom, LAMBDA).unwrap();
        assert_eq!(ha.entries.column(2), hb.entries.column(0));
        assert_eq!(ha.entries.column(0), hb.entries.column(1));
        assert_eq!(ha.entries.column(1), hb.entries.column(2));
    }

    #[test]
    fn far_field_examples() {
        let geom = user(4);
        let k = 2.0 * PI / LAMBDA;
        let origin = AntennaLayout::unchecked(vec![Point2::zeros()], 0.0);
        let h = far_field_channel(&origin, &geom, LAMBDA).unwrap();
        for (l, e) in geom.elements().iter().enumerate() {
            let g = LAMBDA / (4.0 * PI * e.r);
            assert!((h.entries[(l, 0)] - C64::from_polar(g, -k * e.r)).norm() < 1e-12 * g);
        }

        // Mirrored pair: phase offsets relative to the center are conjugates.
        let p = Point2::new(0.07, -0.03);
        let pair = AntennaLayout::unchecked(vec![p, -p, Point2::zeros()], 0.0);
        let h = far_field_channel(&pair, &geom, LAMBDA).unwrap();
        for l in 0..geom.len() {
            let a = h.entries[(l, 0)] / h.entries[(l, 2)];
            let b = h.entries[(l, 1)] / h.entries[(l, 2)];
            assert!((a - b.conj()).norm() < 1e-9);
        }

        // Half-wavelength displacement along the receiver's in-plane direction.
        let e = geom.elements()[0];
        let dir = e.planar_direction();
        let shift = dir * (LAMBDA / 2.0 / dir.norm_squared());
        let pair = AntennaLayout::unchecked(vec![Point2::zeros(), shift], 0.0);
        let h = far_field_channel(&pair, &geom, LAMBDA).unwrap();
        let ratio = h.entries[(0, 1)] / h.entries[(0, 0)];
        assert!((ratio - C64::new(-1.0, 0.0)).norm() < 1e-9);
        // +π relative phase: exp(j·π) regardless of branch.
        assert!((ratio.arg().abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn fresnel_examples() {
        let e = PolarPoint::in_plane(15.0, PI / 4.0);
        assert_relative_eq!(fresnel_distance(&Point2::zeros(), &e), 15.0, epsilon = 1e-15);
        let expected = 15.0 - 0.1 / 2f64.sqrt() + (0.01 - 0.005) / 30.0;
        assert_relative_eq!(fresnel_distance(&Point2::new(0.1, 0.0), &e), expected, epsilon = 1e-14);
    }

    #[test]
    fn fresnel_error_is_third_order() {
        // |γ − d| scales like ρ³/r²: halving ρ cuts the error by ~8.
        let e = PolarPoint::new(10.0, 0.6, 1.2);
        let rx = receiver_position(&e).unwrap();
        let err = |rho: f64| {
            let mut worst: f64 = 0.0;
            for i in 0..32 {
                let a = i as f64 * PI / 16.0;
                let t = Point2::new(rho * a.cos(), rho * a.sin());
                let exact = (to_cartesian(&t) - rx).norm();
                worst = worst.max((fresnel_distance(&t, &e) - exact).abs());
            }
            worst
        };
        for rho in [0.4, 0.2, 0.1] {
            assert!(err(rho) <= 2.0 * rho.powi(3) / e.r.powi(2));
        }
        let ratio = err(0.2) / err(0.1);
        assert!(ratio > 6.0 && ratio < 10.0, "ratio {ratio}");
    }

    #[test]
    fn fresnel_relative_accuracy_on_desk_grid() {
        // A = 20λ region, receivers at r ≥ 10 m.
        let half = 0.1;
        for e in [
            PolarPoint::in_plane(10.0, PI / 4.0),
            PolarPoint::in_plane(15.0, PI / 4.0),
            PolarPoint::in_plane(10.0, 1.4),
        ] {
            let rx = receiver_position(&e).unwrap();
            for i in 0..=20 {
                for j in 0..=20 {
                    let t = Point2::new(-half + i as f64 * 0.01, -half + j as f64 * 0.01);
                    let exact = (to_cartesian(&t) - rx).norm();
                    assert!(((fresnel_distance(&t, &e) - exact) / exact).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn rayleigh_examples() {
        assert_relative_eq!(rayleigh_distance(2f64.sqrt(), 0.01).unwrap(), 400.0, max_relative = 1e-12);
        assert_relative_eq!(rayleigh_distance(0.01, 0.01).unwrap(), 0.02, max_relative = 1e-12);
        let a = rayleigh_distance(0.3, 0.01).unwrap();
        let b = rayleigh_distance(0.6, 0.01).unwrap();
        assert_relative_eq!(b, 4.0 * a, max_relative = 1e-12);
        // Default scene: user at 15 m is well inside the near field of a 100λ region.
        assert!(15.0 < rayleigh_distance(2f64.sqrt() * 100.0 * LAMBDA, LAMBDA).unwrap());
    }

    #[test]
    fn planar_array_is_half_wavelength_and_faces_origin() {
        let geom = user(4);
        let pts = geom.positions();
        let center: Point3 = pts.iter().sum::<Point3>() / 4.0;
        let c = receiver_position(&PolarPoint::in_plane(15.0, PI / 4.0)).unwrap();
        assert_relative_eq!(center, c, epsilon = 1e-12);
        assert_relative_eq!((pts[0] - pts[1]).norm(), LAMBDA / 2.0, epsilon = 1e-12);
        assert_relative_eq!((pts[0] - pts[2]).norm(), LAMBDA / 2.0, epsilon = 1e-12);
        for p in pts {
            assert!((p - c).dot(&c).abs() < 1e-12);
        }
        assert!(ReceiverGeometry::planar_array(Role::User, PolarPoint::in_plane(15.0, 0.0), 1, LAMBDA, 1.0).is_err());
    }

    #[test]
    fn layout_validation() {
        let region = MovingRegion::new(0.2).unwrap();
        assert!(AntennaLayout::new(vec![Point2::new(0.11, 0.0)], &region, 0.005).is_err());
        assert!(AntennaLayout::new(vec![Point2::zeros(), Point2::new(0.004, 0.0)], &region, 0.005).is_err());
        assert!(AntennaLayout::new(vec![Point2::zeros(), Point2::new(0.005, 0.0)], &region, 0.005).is_ok());
        assert!(MovingRegion::new(0.0).is_err());
    }
}

//! Parametric geometry of the configuration: a star-shaped obstacle with
//! dihedral symmetry placed inside a disk.
//!
//! The obstacle is described by its radial support function `f(phi)` measured
//! from the obstacle center (always the origin). The disk of radius `r1` is
//! centered at `(-d, 0)`, so the direction `phi = 0` points at the nearest
//! stretch of the outer boundary. At rotation `t = 0` an outer vertex of the
//! obstacle lies on the positive x1-axis ("OFF" orientation); rotating by half
//! a symmetry period puts an edge midpoint there instead ("ON").

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Angular tolerance used to classify a rotation as ON/OFF and to detect
/// corner directions of sharp polygons.
pub const ORIENTATION_TOL: f64 = 1e-9;

/// Default mollifier half-width (radians) for the smoothed polygon family.
pub const DEFAULT_SMOOTHING: f64 = 0.05;

/// Number of quadrature intervals for the smoothing convolution.
const MOLLIFIER_INTERVALS: usize = 64;

/// Obstacle family. All families are star-shaped about their center, invariant
/// under the dihedral group of order `n`, and monotone between consecutive
/// symmetry axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleFamily {
    Circle,
    RegularPolygon,
    SmoothedPolygon,
    Ellipse,
    CosineStar,
}

/// A D_n-symmetric star-shaped obstacle, aligned so that an outer vertex sits
/// at `phi = 0`.
#[derive(Clone, Debug)]
pub struct ObstacleSpec {
    family: ObstacleFamily,
    n: u32,
    circumradius: f64,
    epsilon: f64,
    /// Rescale factor so that `max f = circumradius` for the smoothed polygon
    /// (the convolution shaves the vertices slightly).
    smooth_scale: f64,
}

impl ObstacleSpec {
    pub fn circle(radius: f64) -> Result<Self> {
        Self::new(ObstacleFamily::Circle, 1, radius, 0.0)
    }

    pub fn regular_polygon(n: u32, circumradius: f64) -> Result<Self> {
        Self::new(ObstacleFamily::RegularPolygon, n, circumradius, 0.0)
    }

    /// Regular polygon convolved with a C^2 mollifier of angular half-width
    /// `epsilon`, rescaled so the circumradius is exact.
    pub fn smoothed_polygon(n: u32, circumradius: f64, epsilon: f64) -> Result<Self> {
        Self::new(ObstacleFamily::SmoothedPolygon, n, circumradius, epsilon)
    }

    /// Ellipse with semi-major axis `circumradius` and axis ratio `ratio` in
    /// `(0, 1]`.
    pub fn ellipse(circumradius: f64, ratio: f64) -> Result<Self> {
        Self::new(ObstacleFamily::Ellipse, 2, circumradius, ratio)
    }

    /// `f(phi) = circumradius * (1 - epsilon + epsilon cos(n phi))`,
    /// `epsilon` in `(0, 1/2)`.
    pub fn cosine_star(n: u32, circumradius: f64, epsilon: f64) -> Result<Self> {
        Self::new(ObstacleFamily::CosineStar, n, circumradius, epsilon)
    }

    pub fn new(family: ObstacleFamily, n: u32, circumradius: f64, epsilon: f64) -> Result<Self> {
        if !(circumradius > 0.0) || !circumradius.is_finite() {
            return Err(Error::InvalidObstacle(format!(
                "circumradius must be positive and finite, got {circumradius}"
            )));
        }
        match family {
            ObstacleFamily::Circle => {
                if n < 1 {
                    return Err(Error::InvalidObstacle("circle requires n >= 1".into()));
                }
            }
            ObstacleFamily::RegularPolygon => {
                if n < 3 {
                    return Err(Error::InvalidObstacle(format!(
                        "regular polygon requires n >= 3, got {n}"
                    )));
                }
            }
            ObstacleFamily::SmoothedPolygon => {
                if n < 3 {
                    return Err(Error::InvalidObstacle(format!(
                        "smoothed polygon requires n >= 3, got {n}"
                    )));
                }
                let max_eps = std::f64::consts::PI / (2.0 * n as f64);
                if !(epsilon > 0.0 && epsilon <= max_eps) {
                    return Err(Error::InvalidObstacle(format!(
                        "smoothing width must lie in (0, {max_eps:.4}], got {epsilon}"
                    )));
                }
            }
            ObstacleFamily::Ellipse => {
                if n != 2 {
                    return Err(Error::InvalidObstacle(format!(
                        "ellipse has symmetry order 2, got n = {n}"
                    )));
                }
                if !(epsilon > 0.0 && epsilon <= 1.0) {
                    return Err(Error::InvalidObstacle(format!(
                        "ellipse axis ratio must lie in (0, 1], got {epsilon}"
                    )));
                }
            }
            ObstacleFamily::CosineStar => {
                if n < 3 {
                    return Err(Error::InvalidObstacle(format!(
                        "cosine star requires n >= 3, got {n}"
                    )));
                }
                if !(epsilon > 0.0 && epsilon < 0.5) {
                    return Err(Error::InvalidObstacle(format!(
                        "cosine star amplitude must lie in (0, 0.5), got {epsilon}"
                    )));
                }
            }
        }
        let mut obs = Self {
            family,
            n,
            circumradius,
            epsilon,
            smooth_scale: 1.0,
        };
        if family == ObstacleFamily::SmoothedPolygon {
            obs.smooth_scale = circumradius / obs.smoothed_raw(0.0);
        }
        Ok(obs)
    }

    pub fn family(&self) -> ObstacleFamily {
        self.family
    }

    /// Symmetry order of the dihedral group.
    pub fn symmetry_order(&self) -> u32 {
        self.n
    }

    /// Circumradius `rho_2 = max f`.
    pub fn circumradius(&self) -> f64 {
        self.circumradius
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Incircle radius `rho_1 = min f`.
    pub fn incircle_radius(&self) -> f64 {
        match self.family {
            ObstacleFamily::Circle => self.circumradius,
            ObstacleFamily::RegularPolygon => {
                self.circumradius * (std::f64::consts::PI / self.n as f64).cos()
            }
            ObstacleFamily::SmoothedPolygon => {
                self.radial_support(std::f64::consts::PI / self.n as f64)
            }
            ObstacleFamily::Ellipse => self.circumradius * self.epsilon,
            ObstacleFamily::CosineStar => self.circumradius * (1.0 - 2.0 * self.epsilon),
        }
    }

    /// Radial support function `f(phi)`: distance from the obstacle center to
    /// the boundary in direction `phi`. 2pi-periodic, even, D_n-symmetric.
    pub fn radial_support(&self, phi: f64) -> f64 {
        match self.family {
            ObstacleFamily::Circle => self.circumradius,
            ObstacleFamily::RegularPolygon => {
                let half = std::f64::consts::PI / self.n as f64;
                let local = fold_angle(phi, self.n);
                self.circumradius * half.cos() / (local - half).cos()
            }
            ObstacleFamily::SmoothedPolygon => self.smooth_scale * self.smoothed_raw(phi),
            ObstacleFamily::Ellipse => {
                let a = self.circumradius;
                let b = self.circumradius * self.epsilon;
                let (s, c) = phi.sin_cos();
                a * b / (b * b * c * c + a * a * s * s).sqrt()
            }
            ObstacleFamily::CosineStar => {
                self.circumradius
                    * (1.0 - self.epsilon + self.epsilon * (self.n as f64 * phi).cos())
            }
        }
    }

    /// Derivative `f'(phi)`. Sharp polygons return both one-sided slopes at a
    /// corner direction; boundary quadratures must split there.
    pub fn radial_support_derivative(&self, phi: f64) -> Slope {
        match self.family {
            ObstacleFamily::Circle => Slope::Smooth(0.0),
            ObstacleFamily::RegularPolygon => {
                let half = std::f64::consts::PI / self.n as f64;
                let rho1 = self.circumradius * half.cos();
                let local = fold_angle(phi, self.n);
                let slope_at = |x: f64| rho1 * (x - half).sin() / (x - half).cos().powi(2);
                if self.is_corner_direction(phi) {
                    Slope::Corner {
                        left: slope_at(2.0 * half),
                        right: slope_at(0.0),
                    }
                } else {
                    Slope::Smooth(slope_at(local))
                }
            }
            ObstacleFamily::SmoothedPolygon => {
                Slope::Smooth(self.smooth_scale * self.smoothed_raw_derivative(phi))
            }
            ObstacleFamily::Ellipse => {
                let a = self.circumradius;
                let b = self.circumradius * self.epsilon;
                let (s, c) = phi.sin_cos();
                let q = b * b * c * c + a * a * s * s;
                Slope::Smooth(-a * b * (a * a - b * b) * s * c * q.powf(-1.5))
            }
            ObstacleFamily::CosineStar => {
                let nf = self.n as f64;
                Slope::Smooth(-self.circumradius * self.epsilon * nf * (nf * phi).sin())
            }
        }
    }

    /// True when `phi` points at a sharp corner of the obstacle.
    pub fn is_corner_direction(&self, phi: f64) -> bool {
        if self.family != ObstacleFamily::RegularPolygon {
            return false;
        }
        let period = TWO_PI / self.n as f64;
        let r = phi.rem_euclid(period);
        r.min(period - r) <= ORIENTATION_TOL
    }

    /// Corner direction strictly inside `(phi_a, phi_b)`, if any. Boundary
    /// quadratures split their intervals there. The interval is assumed
    /// shorter than one symmetry period.
    pub fn corner_inside(&self, phi_a: f64, phi_b: f64) -> Option<f64> {
        if self.family != ObstacleFamily::RegularPolygon {
            return None;
        }
        let period = TWO_PI / self.n as f64;
        let mut candidate = (phi_a / period).floor() * period;
        while candidate <= phi_a + ORIENTATION_TOL {
            candidate += period;
        }
        (candidate < phi_b - ORIENTATION_TOL).then_some(candidate)
    }

    /// Leading singular exponent of the harmonic field at a sharp corner: the
    /// domain opens with angle `pi + 2pi/n` there, so the flux grows like
    /// `r^(alpha - 1)` with `alpha = n / (n + 2)`.
    pub fn corner_exponent(&self) -> Option<f64> {
        (self.family == ObstacleFamily::RegularPolygon)
            .then(|| self.n as f64 / (self.n as f64 + 2.0))
    }

    fn smoothed_raw(&self, phi: f64) -> f64 {
        let poly = |x: f64| {
            let half = std::f64::consts::PI / self.n as f64;
            let local = fold_angle(x, self.n);
            self.circumradius * half.cos() / (local - half).cos()
        };
        mollify(phi, self.epsilon, poly, false)
    }

    fn smoothed_raw_derivative(&self, phi: f64) -> f64 {
        let poly = |x: f64| {
            let half = std::f64::consts::PI / self.n as f64;
            let local = fold_angle(x, self.n);
            self.circumradius * half.cos() / (local - half).cos()
        };
        mollify(phi, self.epsilon, poly, true)
    }
}

/// One-sided information for `f'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Slope {
    Smooth(f64),
    Corner { left: f64, right: f64 },
}

impl Slope {
    /// Mean of the one-sided slopes (equals the value itself when smooth).
    pub fn average(&self) -> f64 {
        match *self {
            Slope::Smooth(v) => v,
            Slope::Corner { left, right } => 0.5 * (left + right),
        }
    }

    pub fn is_corner(&self) -> bool {
        matches!(self, Slope::Corner { .. })
    }
}

/// Reduce `phi` to `[0, 2pi/n)`.
fn fold_angle(phi: f64, n: u32) -> f64 {
    let period = TWO_PI / n as f64;
    phi.rem_euclid(period)
}

/// Convolution of `g` against a C^2 bump of half-width `eps` using a fixed
/// symmetric Simpson rule. With `derivative` set, convolves against the kernel
/// derivative instead, which avoids evaluating `g'` at corners.
fn mollify(phi: f64, eps: f64, g: impl Fn(f64) -> f64, derivative: bool) -> f64 {
    // kernel (35/32)(1 - x^2)^3 / eps on [-eps, eps], x = s/eps
    let m = MOLLIFIER_INTERVALS;
    let h = 2.0 * eps / m as f64;
    let mut acc = 0.0;
    for k in 0..=m {
        let s = -eps + k as f64 * h;
        let x = s / eps;
        let kernel = if derivative {
            // kernel derivative: integration by parts moves d/dphi onto the
            // kernel, so corner slopes of g are never evaluated
            -(35.0 / 32.0) * 6.0 * x * (1.0 - x * x).powi(2) / (eps * eps)
        } else {
            (35.0 / 32.0) * (1.0 - x * x).powi(3) / eps
        };
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * kernel * g(phi - s);
    }
    acc * h / 3.0
}

/// Configuration parameters of the obstacle inside the disk: center offset
/// `d`, rotation `t`, scale `lambda`, disk radius `r1`, boundary datum `m`.
#[derive(Clone, Copy, Debug)]
pub struct Placement {
    pub d: f64,
    pub t: f64,
    pub lambda: f64,
    pub r1: f64,
    pub m: f64,
}

impl Placement {
    pub fn new(d: f64, t: f64, lambda: f64, r1: f64, m: f64) -> Result<Self> {
        if !(r1 > 0.0) || !r1.is_finite() {
            return Err(Error::InvalidPlacement(format!(
                "disk radius must be positive, got {r1}"
            )));
        }
        if !(d >= 0.0) || d >= r1 {
            return Err(Error::InvalidPlacement(format!(
                "center offset must satisfy 0 <= d < r1, got d = {d}, r1 = {r1}"
            )));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidPlacement(format!(
                "scale must be positive, got {lambda}"
            )));
        }
        if !t.is_finite() || !m.is_finite() {
            return Err(Error::InvalidPlacement("t and M must be finite".into()));
        }
        Ok(Self {
            d,
            t,
            lambda,
            r1,
            m,
        })
    }

    /// Disk center in the obstacle-centered frame.
    pub fn disk_center(&self) -> [f64; 2] {
        [-self.d, 0.0]
    }

    pub fn with_t(&self, t: f64) -> Self {
        Self { t, ..*self }
    }

    pub fn with_d(&self, d: f64) -> Self {
        Self { d, ..*self }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    pub fn with_m(&self, m: f64) -> Self {
        Self { m, ..*self }
    }
}

/// Distance from the obstacle center to the disk boundary along direction
/// `phi`: the positive root of `|s e^{i phi} - c_B| = r1`.
pub fn disk_exit_radius(placement: &Placement, phi: f64) -> f64 {
    let d = placement.d;
    let r1 = placement.r1;
    debug_assert!(d < r1);
    let s = phi.sin();
    -d * phi.cos() + (r1 * r1 - d * d * s * s).sqrt()
}

/// Outward unit normal of the fluid domain on the obstacle boundary at the
/// point `lambda f(phi - t) e^{i phi}`; it points into the obstacle. At sharp
/// corners this is the average of the two one-sided normals.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryNormal {
    pub nx: f64,
    pub ny: f64,
    pub corner: bool,
}

pub fn inner_normal(obs: &ObstacleSpec, placement: &Placement, phi: f64) -> BoundaryNormal {
    let local = phi - placement.t;
    let f = obs.radial_support(local);
    let normal_from = |fp: f64| {
        let norm = (f * f + fp * fp).sqrt();
        let (s, c) = phi.sin_cos();
        // (i f' - f) e^{i phi} / |.|
        [(-fp * s - f * c) / norm, (fp * c - f * s) / norm]
    };
    match obs.radial_support_derivative(local) {
        Slope::Smooth(fp) => {
            let [nx, ny] = normal_from(fp);
            BoundaryNormal {
                nx,
                ny,
                corner: false,
            }
        }
        Slope::Corner { left, right } => {
            let a = normal_from(left);
            let b = normal_from(right);
            BoundaryNormal {
                nx: 0.5 * (a[0] + b[0]),
                ny: 0.5 * (a[1] + b[1]),
                corner: true,
            }
        }
    }
}

/// Position of the obstacle boundary point in direction `phi` for the given
/// placement.
pub fn obstacle_point(obs: &ObstacleSpec, placement: &Placement, phi: f64) -> [f64; 2] {
    let r = placement.lambda * obs.radial_support(phi - placement.t);
    [r * phi.cos(), r * phi.sin()]
}

/// ON/OFF classification of a rotation angle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrientationClass {
    Off,
    On,
    Generic,
}

impl std::fmt::Display for OrientationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OrientationClass::Off => write!(f, "OFF"),
            OrientationClass::On => write!(f, "ON"),
            OrientationClass::Generic => write!(f, "GENERIC"),
        }
    }
}

/// OFF when an axis through an outer vertex lies on the line of centers
/// (t = 0 mod 2pi/n), ON when rotated by half a period.
pub fn classify_orientation(n: u32, t: f64, tol: f64) -> OrientationClass {
    assert!(n >= 1);
    let period = TWO_PI / n as f64;
    let r = t.rem_euclid(period);
    let dist_off = r.min(period - r);
    let dist_on = (r - 0.5 * period).abs();
    if dist_off <= tol {
        OrientationClass::Off
    } else if dist_on <= tol {
        OrientationClass::On
    } else {
        OrientationClass::Generic
    }
}

/// Result of the containment check for a configuration.
#[derive(Clone, Copy, Debug)]
pub struct Admissibility {
    /// `min_phi [g_B(phi) - lambda f(phi - t)]`; positive when the obstacle is
    /// strictly inside the disk.
    pub margin: f64,
    /// Direction realizing the minimum.
    pub worst_phi: f64,
    /// `lambda rho_2 + d < r1`: the obstacle can rotate freely.
    pub free_rotation: bool,
}

impl Admissibility {
    pub fn is_ok(&self) -> bool {
        self.margin > 0.0
    }
}

const ADMISSIBILITY_SAMPLES: usize = 4096;

/// Clearance between the (scaled, rotated) obstacle and the disk boundary,
/// sampled densely and at every vertex direction.
pub fn admissible(obs: &ObstacleSpec, placement: &Placement) -> Admissibility {
    let mut margin = f64::INFINITY;
    let mut worst_phi = 0.0;
    let mut check = |phi: f64| {
        let gap = disk_exit_radius(placement, phi)
            - placement.lambda * obs.radial_support(phi - placement.t);
        if gap < margin {
            margin = gap;
            worst_phi = phi;
        }
    };
    for k in 0..ADMISSIBILITY_SAMPLES {
        check(TWO_PI * k as f64 / ADMISSIBILITY_SAMPLES as f64);
    }
    for k in 0..obs.symmetry_order() {
        check(placement.t + TWO_PI * k as f64 / obs.symmetry_order() as f64);
    }
    let free_rotation = placement.lambda * obs.circumradius() + placement.d < placement.r1;
    Admissibility {
        margin,
        worst_phi,
        free_rotation,
    }
}

/// Largest scale factor keeping the obstacle inside the disk for the given
/// offset and rotation.
pub fn max_admissible_scale(obs: &ObstacleSpec, placement: &Placement) -> f64 {
    let mut lambda_max = f64::INFINITY;
    let mut check = |phi: f64| {
        let ratio = disk_exit_radius(placement, phi) / obs.radial_support(phi - placement.t);
        if ratio < lambda_max {
            lambda_max = ratio;
        }
    };
    for k in 0..ADMISSIBILITY_SAMPLES {
        check(TWO_PI * k as f64 / ADMISSIBILITY_SAMPLES as f64);
    }
    for k in 0..obs.symmetry_order() {
        check(placement.t + TWO_PI * k as f64 / obs.symmetry_order() as f64);
    }
    lambda_max
}

/// A full problem configuration: obstacle plus placement. This is the unit
/// serialized to and from JSON config files.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub obstacle: ObstacleSpec,
    pub placement: Placement,
}

impl Configuration {
    pub fn new(obstacle: ObstacleSpec, placement: Placement) -> Self {
        Self {
            obstacle,
            placement,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.try_into()
    }

    pub fn to_json(&self) -> String {
        let raw = ConfigFile::from(self);
        serde_json::to_string_pretty(&raw).expect("config serialization cannot fail")
    }
}

/// Flat on-disk schema, e.g.
/// `{"family":"regular_polygon","n":4,"circumradius":0.285,"epsilon":0.0,
///   "d":0.5,"t":0.0,"lambda":1.0,"r1":1.0,"M":1.0}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigFile {
    pub family: ObstacleFamily,
    #[serde(default = "default_n")]
    pub n: u32,
    pub circumradius: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub d: f64,
    #[serde(default)]
    pub t: f64,
    #[serde(default = "default_one")]
    pub lambda: f64,
    #[serde(default = "default_one")]
    pub r1: f64,
    #[serde(rename = "M", default = "default_one")]
    pub m: f64,
}

fn default_n() -> u32 {
    1
}

fn default_one() -> f64 {
    1.0
}

impl TryFrom<ConfigFile> for Configuration {
    type Error = Error;

    fn try_from(raw: ConfigFile) -> Result<Self> {
        let epsilon = match raw.family {
            ObstacleFamily::SmoothedPolygon if raw.epsilon == 0.0 => DEFAULT_SMOOTHING,
            _ => raw.epsilon,
        };
        let obstacle = ObstacleSpec::new(raw.family, raw.n, raw.circumradius, epsilon)?;
        let placement = Placement::new(raw.d, raw.t, raw.lambda, raw.r1, raw.m)?;
        Ok(Configuration::new(obstacle, placement))
    }
}

impl From<&Configuration> for ConfigFile {
    fn from(cfg: &Configuration) -> Self {
        ConfigFile {
            family: cfg.obstacle.family(),
            n: cfg.obstacle.symmetry_order(),
            circumradius: cfg.obstacle.circumradius(),
            epsilon: cfg.obstacle.epsilon(),
            d: cfg.placement.d,
            t: cfg.placement.t,
            lambda: cfg.placement.lambda,
            r1: cfg.placement.r1,
            m: cfg.placement.m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn placement(d: f64, t: f64) -> Placement {
        Placement::new(d, t, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn circle_support_is_constant() {
        let obs = ObstacleSpec::circle(0.3).unwrap();
        assert_eq!(obs.radial_support(1.234), 0.3);
        assert_eq!(obs.radial_support_derivative(2.0), Slope::Smooth(0.0));
    }

    #[test]
    fn square_support_vertex_and_edge() {
        let obs = ObstacleSpec::regular_polygon(4, 0.285).unwrap();
        assert!((obs.radial_support(0.0) - 0.285).abs() < 1e-14);
        let apothem = 0.285 * (PI / 4.0).cos();
        assert!((obs.radial_support(PI / 4.0) - apothem).abs() < 1e-14);
        assert!((apothem - 0.20152543263816606).abs() < 1e-12);
    }

    #[test]
    fn cosine_star_derivative_value() {
        let obs = ObstacleSpec::cosine_star(5, 0.3, 0.2).unwrap();
        match obs.radial_support_derivative(PI / 10.0) {
            Slope::Smooth(v) => assert!((v + 0.3).abs() < 1e-14),
            _ => panic!("star is smooth"),
        }
    }

    #[test]
    fn degenerate_ellipse_has_zero_slope() {
        let obs = ObstacleSpec::ellipse(0.3, 1.0).unwrap();
        for k in 0..17 {
            let phi = TWO_PI * k as f64 / 17.0;
            assert!(obs.radial_support_derivative(phi).average().abs() < 1e-14);
            assert!((obs.radial_support(phi) - 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn polygon_corner_is_tagged() {
        let obs = ObstacleSpec::regular_polygon(4, 0.285).unwrap();
        let slope = obs.radial_support_derivative(PI / 2.0);
        assert!(slope.is_corner());
        match slope {
            Slope::Corner { left, right } => {
                assert!(left > 0.0 && right < 0.0);
                assert!((left + right).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
        assert!(!obs.radial_support_derivative(0.1).is_corner());
    }

    #[test]
    fn inner_normal_points_into_circle() {
        let obs = ObstacleSpec::circle(0.3).unwrap();
        let p = placement(0.0, 0.0);
        let n = inner_normal(&obs, &p, 0.0);
        assert!((n.nx + 1.0).abs() < 1e-14 && n.ny.abs() < 1e-14);
        for k in 0..7 {
            let phi = TWO_PI * k as f64 / 7.0;
            let n = inner_normal(&obs, &p, phi);
            let x = obstacle_point(&obs, &p, phi);
            let dot = x[0] * n.nx + x[1] * n.ny;
            assert!((dot + 0.3).abs() < 1e-13);
        }
    }

    #[test]
    fn square_edge_midpoint_normal() {
        let obs = ObstacleSpec::regular_polygon(4, 0.285).unwrap();
        let p = placement(0.0, 0.0);
        let n = inner_normal(&obs, &p, PI / 4.0);
        let expect = -(0.5_f64).sqrt();
        assert!((n.nx - expect).abs() < 1e-13);
        assert!((n.ny - expect).abs() < 1e-13);
        assert!(!n.corner);
    }

    #[test]
    fn exit_radius_matches_ray_circle_intersection() {
        let p0 = placement(0.0, 0.0);
        assert!((disk_exit_radius(&p0, 0.7) - 1.0).abs() < 1e-14);
        let p = placement(0.5, 0.0);
        assert!((disk_exit_radius(&p, 0.0) - 0.5).abs() < 1e-14);
        assert!((disk_exit_radius(&p, PI / 2.0) - 0.75_f64.sqrt()).abs() < 1e-14);
        assert!((disk_exit_radius(&p, PI) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn orientation_classification() {
        let tol = ORIENTATION_TOL;
        assert_eq!(
            classify_orientation(4, PI / 2.0, tol),
            OrientationClass::Off
        );
        assert_eq!(classify_orientation(4, PI / 4.0, tol), OrientationClass::On);
        assert_eq!(classify_orientation(5, PI / 5.0, tol), OrientationClass::On);
        assert_eq!(classify_orientation(4, 0.1, tol), OrientationClass::Generic);
    }

    #[test]
    fn admissibility_margins() {
        // touching: circle radius 0.3 at offset 0.7 in the unit disk
        let circle = ObstacleSpec::circle(0.3).unwrap();
        let adm = admissible(&circle, &placement(0.7, 0.0));
        assert!(adm.margin.abs() < 1e-9, "margin {}", adm.margin);
        assert!(adm.worst_phi.abs() < 1e-9);
        assert!(!adm.free_rotation);

        // square ON at d = 0.78 grazes the boundary
        let square = ObstacleSpec::regular_polygon(4, 0.285).unwrap();
        let adm = admissible(&square, &placement(0.78, PI / 4.0));
        assert!(adm.margin.abs() < 5e-3, "margin {}", adm.margin);

        // tiny obstacle in the middle: margin approaches r1
        let p = Placement::new(0.0, 0.0, 1e-6, 1.0, 1.0).unwrap();
        let adm = admissible(&square, &p);
        assert!((adm.margin - 1.0).abs() < 1e-3);
        assert!(adm.free_rotation);
    }

    #[test]
    fn max_scale_is_tangency_scale() {
        let circle = ObstacleSpec::circle(0.3).unwrap();
        let lam = max_admissible_scale(&circle, &placement(0.4, 0.0));
        assert!((lam - 2.0).abs() < 1e-12, "lambda_P {lam}");
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{"family":"regular_polygon","n":4,"circumradius":0.285,
            "epsilon":0.0,"d":0.5,"t":0.0,"lambda":1.0,"r1":1.0,"M":1.0}"#;
        let cfg = Configuration::from_json(text).unwrap();
        assert_eq!(cfg.obstacle.family(), ObstacleFamily::RegularPolygon);
        assert_eq!(cfg.obstacle.symmetry_order(), 4);
        assert_eq!(cfg.placement.d, 0.5);
        let back = Configuration::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back.placement.m, 1.0);
        assert_eq!(back.obstacle.circumradius(), 0.285);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ObstacleSpec::regular_polygon(2, 0.3).is_err());
        assert!(ObstacleSpec::cosine_star(5, 0.3, 0.7).is_err());
        assert!(ObstacleSpec::circle(-1.0).is_err());
        assert!(ObstacleSpec::ellipse(0.3, 1.5).is_err());
        assert!(Placement::new(1.2, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(Placement::new(-0.1, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(Placement::new(0.0, 0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn smoothed_polygon_keeps_circumradius() {
        let obs = ObstacleSpec::smoothed_polygon(4, 0.285, DEFAULT_SMOOTHING).unwrap();
        assert!((obs.radial_support(0.0) - 0.285).abs() < 1e-12);
        assert!(obs.incircle_radius() < 0.285);
        assert!(obs.incircle_radius() > 0.285 * (PI / 4.0).cos() - 1e-6);
    }
}

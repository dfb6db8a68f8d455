//! Exact-formula hyperbolic geometry on the upper half-plane and its ideal
//! boundary.
//!
//! Boundary points are kept in projective coordinates `(u, v)` with the point
//! being `u/v`, so that infinity is the exact pair `(1, 0)` and never a large
//! float. Cross-ratios are ratios of four 2×2 determinants, which keeps them
//! finite and Möbius-invariant even when a corner sits at infinity.

use num_complex::Complex64;

use crate::{Error, Result};

/// Tolerance for projective coincidence tests (entries are normalized to
/// `max(|u|,|v|) = 1`, so this is a relative tolerance).
pub const PROJECTIVE_TOL: f64 = 1e-14;

/// The reference point `i` of the upper half-plane.
pub const REFERENCE_POINT: PointH = PointH { x: 0.0, y: 1.0 };

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A point of `ℝ̂ = ℝ ∪ {∞}` (or `Ĉ` for quake-bend images) in projective
/// coordinates: the point is `u/v`, infinity iff `v = 0`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    u: Complex64,
    v: Complex64,
}

impl BoundaryPoint {
    /// Build from a projective pair. Errors if both coordinates vanish.
    pub fn new(u: Complex64, v: Complex64) -> Result<Self> {
        if u.norm() == 0.0 && v.norm() == 0.0 {
            return Err(Error::DegenerateConfiguration(
                "projective pair (0, 0)".into(),
            ));
        }
        Ok(Self::normalized(u, v))
    }

    /// Normalize by dividing through the larger-modulus coordinate, so one
    /// coordinate becomes exactly 1 and real pairs stay exactly real.
    fn normalized(u: Complex64, v: Complex64) -> Self {
        if u.norm() > v.norm() {
            Self { u: Complex64::new(1.0, 0.0), v: v / u }
        } else {
            Self { u: u / v, v: Complex64::new(1.0, 0.0) }
        }
    }

    pub fn real(x: f64) -> Self {
        Self::normalized(c(x), c(1.0))
    }

    pub fn complex(z: Complex64) -> Self {
        Self::normalized(z, c(1.0))
    }

    pub fn infinity() -> Self {
        Self { u: c(1.0), v: c(0.0) }
    }

    pub fn numerator(&self) -> Complex64 {
        self.u
    }

    pub fn denominator(&self) -> Complex64 {
        self.v
    }

    pub fn is_infinity(&self) -> bool {
        self.v.norm() <= PROJECTIVE_TOL
    }

    /// The point as a complex number; `None` for infinity.
    pub fn to_complex(&self) -> Option<Complex64> {
        if self.is_infinity() {
            None
        } else {
            Some(self.u / self.v)
        }
    }

    /// The point as a real number; `None` for infinity or genuinely complex
    /// points.
    pub fn as_real(&self) -> Option<f64> {
        if self.is_infinity() || !self.is_real() {
            None
        } else {
            Some((self.u / self.v).re)
        }
    }

    pub fn is_real(&self) -> bool {
        self.u.im.abs() <= PROJECTIVE_TOL && self.v.im.abs() <= PROJECTIVE_TOL
    }

    /// Projective equality by cross-multiplication: `u₁v₂ = u₂v₁` within
    /// [`PROJECTIVE_TOL`] relative to the size of the products, so points
    /// deep toward a fixed point stay distinguishable.
    pub fn approx_eq(&self, other: &Self) -> bool {
        let scale = (self.u * other.v).norm() + (other.u * self.v).norm();
        det2(self, other).norm() <= PROJECTIVE_TOL * scale
    }

    /// Angle coordinate `2·arctan(x)` on the circle, wrapped to `(−π, π]`;
    /// infinity sits at `π`. Only meaningful for real points.
    pub fn circle_angle(&self) -> f64 {
        let t = 2.0 * f64::atan2(self.u.re, self.v.re);
        if t > std::f64::consts::PI {
            t - 2.0 * std::f64::consts::PI
        } else if t <= -std::f64::consts::PI {
            t + 2.0 * std::f64::consts::PI
        } else {
            t
        }
    }
}

impl std::fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.to_complex() {
            None => write!(f, "inf"),
            Some(z) if z.im.abs() <= PROJECTIVE_TOL => write!(f, "{}", z.re),
            Some(z) => write!(f, "{}+{}i", z.re, z.im),
        }
    }
}

/// `u_p v_q − u_q v_p`, the 2×2 determinant of two projective pairs. Vanishes
/// exactly when the points coincide.
pub fn det2(p: &BoundaryPoint, q: &BoundaryPoint) -> Complex64 {
    p.u * q.v - q.u * p.v
}

/// Sign of the cyclic orientation of a real triple on the circle: positive
/// when `(p, q, r)` is counterclockwise. Representative-independent because
/// each point enters two of the three determinants.
fn orientation(p: &BoundaryPoint, q: &BoundaryPoint, r: &BoundaryPoint) -> f64 {
    (det2(p, q) * det2(q, r) * det2(r, p)).re
}

/// Which side of an oriented geodesic a boundary point lies on. For
/// `g = (0, ∞)` oriented upward, negative reals are `Left` and positive reals
/// are `Right`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    On,
}

/// An oriented geodesic: ordered pair of distinct boundary points, running
/// from `p_minus` to `p_plus`.
#[derive(Debug, Clone, Copy)]
pub struct Geodesic {
    p_minus: BoundaryPoint,
    p_plus: BoundaryPoint,
}

impl Geodesic {
    pub fn new(p_minus: BoundaryPoint, p_plus: BoundaryPoint) -> Result<Self> {
        if p_minus.approx_eq(&p_plus) {
            return Err(Error::DegenerateConfiguration(
                "geodesic endpoints coincide".into(),
            ));
        }
        Ok(Self { p_minus, p_plus })
    }

    /// Convenience constructor from real endpoints.
    pub fn from_reals(p_minus: f64, p_plus: f64) -> Result<Self> {
        Self::new(BoundaryPoint::real(p_minus), BoundaryPoint::real(p_plus))
    }

    /// Convenience constructor where `None` stands for infinity.
    pub fn from_parts(p_minus: Option<f64>, p_plus: Option<f64>) -> Result<Self> {
        let mk = |x: Option<f64>| x.map_or_else(BoundaryPoint::infinity, BoundaryPoint::real);
        Self::new(mk(p_minus), mk(p_plus))
    }

    pub fn p_minus(&self) -> &BoundaryPoint {
        &self.p_minus
    }

    pub fn p_plus(&self) -> &BoundaryPoint {
        &self.p_plus
    }

    pub fn reverse(&self) -> Self {
        Self { p_minus: self.p_plus, p_plus: self.p_minus }
    }

    pub fn is_real(&self) -> bool {
        self.p_minus.is_real() && self.p_plus.is_real()
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        self.p_minus.approx_eq(&other.p_minus) && self.p_plus.approx_eq(&other.p_plus)
    }

    fn shared_endpoint_with(&self, other: &Self) -> bool {
        self.p_minus.approx_eq(&other.p_minus)
            || self.p_minus.approx_eq(&other.p_plus)
            || self.p_plus.approx_eq(&other.p_minus)
            || self.p_plus.approx_eq(&other.p_plus)
    }
}

/// A Möbius map as a 2×2 matrix modulo scale, stored normalized to
/// determinant 1 (up to the unavoidable sign/phase of the square root).
#[derive(Debug, Clone, Copy)]
pub struct MobiusMap {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl MobiusMap {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        let scale = a.norm().max(b.norm()).max(c.norm()).max(d.norm());
        if det.norm() <= 1e-14 * scale * scale {
            return Err(Error::SingularMatrix);
        }
        let s = det.sqrt();
        Ok(Self { a: a / s, b: b / s, c: c / s, d: d / s })
    }

    pub fn from_reals(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(
            Complex64::new(a, 0.0),
            Complex64::new(b, 0.0),
            Complex64::new(c, 0.0),
            Complex64::new(d, 0.0),
        )
    }

    pub fn identity() -> Self {
        Self { a: c(1.0), b: c(0.0), c: c(0.0), d: c(1.0) }
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn is_real(&self) -> bool {
        self.a.im.abs() <= PROJECTIVE_TOL
            && self.b.im.abs() <= PROJECTIVE_TOL
            && self.c.im.abs() <= PROJECTIVE_TOL
            && self.d.im.abs() <= PROJECTIVE_TOL
    }

    /// Projective action `(u, v) ↦ (au + bv, cu + dv)`, including `∞ ↦ a/c`.
    pub fn apply(&self, p: &BoundaryPoint) -> BoundaryPoint {
        BoundaryPoint::normalized(self.a * p.u + self.b * p.v, self.c * p.u + self.d * p.v)
    }

    pub fn apply_geodesic(&self, g: &Geodesic) -> Geodesic {
        Geodesic { p_minus: self.apply(&g.p_minus), p_plus: self.apply(&g.p_plus) }
    }

    /// Action on an interior point `z` of the upper half-plane (or of `Ĉ`).
    pub fn apply_complex(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// Derivative at `z`; the determinant is normalized to 1.
    pub fn derivative_at(&self, z: Complex64) -> Complex64 {
        let den = self.c * z + self.d;
        1.0 / (den * den)
    }

    /// `self ∘ rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &Self) -> Self {
        Self {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Projective distance between maps: max entry difference after aligning
    /// the sign ambiguity. For tests and continuity audits.
    pub fn projective_distance(&self, other: &Self) -> f64 {
        let d1 = self
            .entries()
            .iter()
            .zip(other.entries().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        let d2 = self
            .entries()
            .iter()
            .zip(other.entries().iter())
            .map(|(x, y)| (x + y).norm())
            .fold(0.0, f64::max);
        d1.min(d2)
    }
}

/// Cross-ratio `cr(a,b,c,d) = ((a−c)(b−d))/((a−d)(b−c))`, computed as a ratio
/// of four determinants. This is the unique convention for which
/// `log cr(a,b,c,d)` equals the Liouville mass of the box `[a,b]×[c,d]`.
pub fn cross_ratio(
    a: &BoundaryPoint,
    b: &BoundaryPoint,
    c: &BoundaryPoint,
    d: &BoundaryPoint,
) -> Result<Complex64> {
    let pts = [a, b, c, d];
    for i in 0..4 {
        for j in i + 1..4 {
            if pts[i].approx_eq(pts[j]) {
                return Err(Error::DegenerateConfiguration(format!(
                    "cross-ratio arguments {i} and {j} coincide"
                )));
            }
        }
    }
    let num = det2(a, c) * det2(b, d);
    let den = det2(a, d) * det2(b, c);
    Ok(num / den)
}

/// Real Möbius map sending `g.p_minus ↦ 0` and `g.p_plus ↦ ∞`; for real
/// geodesics the result preserves the upper half-plane. Complex-endpoint
/// geodesics give a complex-flavor map.
pub fn mobius_to_standard(g: &Geodesic) -> MobiusMap {
    let p = &g.p_minus;
    let q = &g.p_plus;
    // Row 1 kills p (numerator), row 2 kills q (denominator).
    let (a, b) = (p.v, -p.u);
    let (cc, dd) = (q.v, -q.u);
    let det = a * dd - b * cc;
    let real = p.is_real() && q.is_real();
    let (cc, dd, det) = if real && det.re < 0.0 {
        (-cc, -dd, -det)
    } else {
        (cc, dd, det)
    };
    let s = det.sqrt();
    MobiusMap { a: a / s, b: b / s, c: cc / s, d: dd / s }
}

/// Hyperbolic translation along the oriented axis `g` with (possibly complex)
/// translation length. For `g = (0, ∞)` this is `x ↦ e^length · x`.
pub fn translation_along(g: &Geodesic, length: Complex64) -> MobiusMap {
    if length.norm() == 0.0 {
        return MobiusMap::identity();
    }
    let m = mobius_to_standard(g);
    let e = (length / 2.0).exp();
    let diag = MobiusMap { a: e, b: c(0.0), c: c(0.0), d: 1.0 / e };
    m.inverse().compose(&diag).compose(&m)
}

/// Crossing test: true iff the endpoint pairs are linked on the circle.
pub fn geodesics_cross(g: &Geodesic, h: &Geodesic) -> Result<bool> {
    if g.shared_endpoint_with(h) {
        return Err(Error::SharedEndpoint);
    }
    let s1 = orientation(&g.p_minus, &h.p_minus, &g.p_plus);
    let s2 = orientation(&g.p_minus, &h.p_plus, &g.p_plus);
    Ok(s1 * s2 < 0.0)
}

pub fn side_of(g: &Geodesic, p: &BoundaryPoint) -> Side {
    if p.approx_eq(&g.p_minus) || p.approx_eq(&g.p_plus) {
        return Side::On;
    }
    let s = orientation(&g.p_minus, p, &g.p_plus);
    if s > 0.0 {
        Side::Right
    } else if s < 0.0 {
        Side::Left
    } else {
        Side::On
    }
}

/// Side of `g` on which an interior point of the upper half-plane lies.
pub fn side_of_interior(g: &Geodesic, z: Complex64) -> Side {
    let w = mobius_to_standard(g).apply_complex(z);
    if w.re > 1e-13 * w.norm() {
        Side::Right
    } else if w.re < -1e-13 * w.norm() {
        Side::Left
    } else {
        Side::On
    }
}

/// `cosh` of the complex distance between oriented geodesics, as the
/// cross-ratio expression `1 − 2/cr(h₊, g₋, h₋, g₊)`. On real crossing pairs
/// this is `cos` of the angle; on real disjoint pairs, `cosh` of the distance.
pub fn cosh_complex_distance(g: &Geodesic, h: &Geodesic) -> Result<Complex64> {
    let cr = cross_ratio(&h.p_plus, &g.p_minus, &h.p_minus, &g.p_plus)?;
    Ok(1.0 - 2.0 / cr)
}

/// Cosine of the angle from `g` to `h` at their crossing; zero if they do not
/// cross. With `g = (0,∞)` and `h` from `x` to `y` this is `(−x−y)/(x−y)`.
pub fn cos_angle(g: &Geodesic, h: &Geodesic) -> Result<f64> {
    if !geodesics_cross(g, h)? {
        return Ok(0.0);
    }
    let v = cosh_complex_distance(g, h)?;
    Ok(v.re.clamp(-1.0, 1.0))
}

/// Sine of the angle from `g` to `h`; zero if they do not cross. Sign
/// convention: positive when `h` crosses from the right of `g` to its left
/// (i.e. `h.p_minus` on the right of `g`).
pub fn sin_angle(g: &Geodesic, h: &Geodesic) -> Result<f64> {
    if !geodesics_cross(g, h)? {
        return Ok(0.0);
    }
    let c = cos_angle(g, h)?;
    let s = (1.0 - c * c).max(0.0).sqrt();
    Ok(match side_of(g, &h.p_minus) {
        Side::Right => s,
        _ => -s,
    })
}

/// A point of the upper half-plane.
#[derive(Debug, Clone, Copy)]
pub struct PointH {
    pub x: f64,
    pub y: f64,
}

impl PointH {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "upper half-plane point needs y > 0, got y = {y}"
            )));
        }
        Ok(Self { x, y })
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

/// Hyperbolic distance via `cosh d = 1 + |z−w|² / (2 Im z Im w)`.
pub fn point_distance(z: &PointH, w: &PointH) -> f64 {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    let ch = 1.0 + (dx * dx + dy * dy) / (2.0 * z.y * w.y);
    ch.max(1.0).acosh()
}

/// Distance from an interior point to a real geodesic:
/// `arcsinh(|Re w| / Im w)` after sending `g` to the positive y-axis.
pub fn point_to_geodesic_distance(z: &PointH, g: &Geodesic) -> f64 {
    let w = mobius_to_standard(g).apply_complex(z.to_complex());
    (w.re.abs() / w.im).asinh()
}

/// The unique upper half-plane point lying on both geodesics.
pub fn geodesic_intersection(g: &Geodesic, h: &Geodesic) -> Result<PointH> {
    if !geodesics_cross(g, h)? {
        return Err(Error::NotCrossing);
    }
    // A real geodesic is either a vertical line (one endpoint at infinity) or
    // the semicircle over its endpoints.
    enum Shape {
        Line(f64),
        Circle { center: f64, r2: f64 },
    }
    let shape = |gg: &Geodesic| -> Result<Shape> {
        let p = gg.p_minus.as_real();
        let q = gg.p_plus.as_real();
        Ok(match (p, q) {
            (Some(p), Some(q)) => {
                let center = 0.5 * (p + q);
                let r = 0.5 * (p - q).abs();
                Shape::Circle { center, r2: r * r }
            }
            (Some(p), None) => Shape::Line(p),
            (None, Some(q)) => Shape::Line(q),
            (None, None) => {
                return Err(Error::DegenerateConfiguration(
                    "geodesic with both endpoints at infinity".into(),
                ))
            }
        })
    };
    let (sg, sh) = (shape(g)?, shape(h)?);
    let (x, y2) = match (sg, sh) {
        (Shape::Line(_), Shape::Line(_)) => return Err(Error::NotCrossing),
        (Shape::Line(v), Shape::Circle { center, r2 })
        | (Shape::Circle { center, r2 }, Shape::Line(v)) => (v, r2 - (v - center) * (v - center)),
        (
            Shape::Circle { center: c1, r2: r1 },
            Shape::Circle { center: c2, r2: r2sq },
        ) => {
            let x = (r1 - r2sq + c2 * c2 - c1 * c1) / (2.0 * (c2 - c1));
            (x, r1 - (x - c1) * (x - c1))
        }
    };
    if y2 <= 0.0 {
        return Err(Error::NotCrossing);
    }
    PointH::new(x, y2.sqrt())
}

/// The smaller of the two angles at `z0` between the geodesic rays ending at
/// `p` and `q`; in `[0, π]`, and `0` when `p = q`.
pub fn angle_metric(z0: &PointH, p: &BoundaryPoint, q: &BoundaryPoint) -> f64 {
    // Transport z0 to i by z ↦ (z − x0)/y0; angles at z0 are preserved.
    let m = MobiusMap::from_reals(1.0, -z0.x, 0.0, z0.y).expect("y0 > 0");
    let tp = m.apply(p).circle_angle();
    let tq = m.apply(q).circle_angle();
    let mut d = (tp - tq).abs() % (2.0 * std::f64::consts::PI);
    if d > std::f64::consts::PI {
        d = 2.0 * std::f64::consts::PI - d;
    }
    d
}

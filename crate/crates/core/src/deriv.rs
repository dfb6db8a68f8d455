//! Closed-form first and second derivatives of the Liouville functional along
//! earthquake and quake-bend paths, plus the independent oracles they are
//! checked against: finite differences with Richardson extrapolation,
//! Cauchy-integral differentiation, and the change-of-variables quadrature
//! route for the functional itself.
//!
//! Sign conventions: the kernels are evaluated on geodesics oriented by the
//! test function's box (first endpoint in the first arc). The closed forms
//! match the finite-difference derivative of the pullback functional when the
//! box's first arc lies on the shear side (the right) of each stored leaf;
//! orient support boxes accordingly.

use num_complex::Complex64;

use crate::currents::{
    adaptive_2d, functional_dyadic, functional_dyadic_capped, quad_weighted_split, DyadicResult,
    GeodesicBox, QuadResult, TestFunction,
};
use crate::earthquake::{elementary_earthquake, PiecewiseMobiusMap};
use crate::hyp::{
    cos_angle, cosh_complex_distance, geodesic_intersection, geodesics_cross, mobius_to_standard,
    point_distance, point_to_geodesic_distance, sin_angle, BoundaryPoint, Geodesic,
    REFERENCE_POINT,
};
use crate::lamination::FiniteLamination;
use crate::{Error, Result};

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Closed-form value against its oracle.
#[derive(Debug, Clone)]
pub struct DerivativeReport {
    pub closed_form: Complex64,
    pub oracle: Complex64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub method: String,
}

impl DerivativeReport {
    pub fn new(closed_form: Complex64, oracle: Complex64, method: impl Into<String>) -> Self {
        let abs_err = (closed_form - oracle).norm();
        let scale = oracle.norm().max(closed_form.norm());
        let rel_err = if scale > 0.0 { abs_err / scale } else { 0.0 };
        Self { closed_form, oracle, abs_err, rel_err, method: method.into() }
    }
}

/// Endpoints of `g` lying strictly inside the support arcs, used as kernel
/// kink lines for the quadrature.
fn leaf_splits(b: &GeodesicBox, g: &Geodesic) -> (Vec<BoundaryPoint>, Vec<BoundaryPoint>) {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for p in [g.p_minus(), g.p_plus()] {
        if b.first().contains(p) {
            first.push(*p);
        }
        if b.second().contains(p) {
            second.push(*p);
        }
    }
    (first, second)
}

fn merged_splits(
    b: &GeodesicBox,
    leaves: &[Geodesic],
) -> (Vec<BoundaryPoint>, Vec<BoundaryPoint>) {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for g in leaves {
        let (f, s) = leaf_splits(b, g);
        first.extend(f);
        second.extend(s);
    }
    (first, second)
}

/// First derivative along a simple earthquake with axis `g` and weight
/// `omega`: `ω ∫ ξ(h) cos(g,h) dL(h)`.
pub fn d1_simple(g: &Geodesic, omega: f64, xi: &TestFunction, tol: f64) -> Result<f64> {
    let (fs, ss) = leaf_splits(xi.support(), g);
    let out = quad_weighted_split(
        xi,
        |h| re(cos_angle(g, h).unwrap_or(0.0)),
        tol,
        &fs,
        &ss,
    )?;
    Ok(omega * out.value.re)
}

/// First derivative along the earthquake path of a finite lamination:
/// `Σᵢ ωᵢ ∫ ξ(h) cos(gᵢ,h) dL(h)`.
pub fn d1_lamination(mu: &FiniteLamination, xi: &TestFunction, tol: f64) -> Result<f64> {
    if mu.is_empty() {
        return Ok(0.0);
    }
    let total = mu.total_weight();
    let mut sum = 0.0;
    for leaf in mu.leaves() {
        sum += d1_simple(&leaf.geodesic, leaf.weight, xi, tol * leaf.weight / total)?;
    }
    Ok(sum)
}

/// Second derivative along a simple earthquake:
/// `ω² ∫ ξ(h) [cos²(g,h) − ½ sin²(g,h)] dL(h)`.
pub fn d2_simple(g: &Geodesic, omega: f64, xi: &TestFunction, tol: f64) -> Result<f64> {
    let (fs, ss) = leaf_splits(xi.support(), g);
    let out = quad_weighted_split(
        xi,
        |h| {
            let c = cos_angle(g, h).unwrap_or(0.0);
            let s = sin_angle(g, h).unwrap_or(0.0);
            re(c * c - 0.5 * s * s)
        },
        tol,
        &fs,
        &ss,
    )?;
    Ok(omega * omega * out.value.re)
}

/// Pair kernel of the second derivative:
/// `cos(gᵢ,h)cos(gₖ,h) − ½ sin(gᵢ,h)sin(gₖ,h) e^{−d_h}` where `d_h` is the
/// distance along `h` between its crossings with `gᵢ` and `gₖ`; zero unless
/// `h` crosses both.
pub fn d2_pair_kernel(gi: &Geodesic, gk: &Geodesic, h: &Geodesic) -> f64 {
    let ci = cos_angle(gi, h).unwrap_or(0.0);
    let si = sin_angle(gi, h).unwrap_or(0.0);
    if ci == 0.0 && si == 0.0 {
        return 0.0;
    }
    let ck = cos_angle(gk, h).unwrap_or(0.0);
    let sk = sin_angle(gk, h).unwrap_or(0.0);
    if ck == 0.0 && sk == 0.0 {
        return 0.0;
    }
    let dh = if gi.approx_eq(gk) {
        0.0
    } else {
        match (geodesic_intersection(gi, h), geodesic_intersection(gk, h)) {
            (Ok(p), Ok(q)) => point_distance(&p, &q),
            _ => return 0.0,
        }
    };
    ci * ck - 0.5 * si * sk * (-dh).exp()
}

/// Second derivative along the earthquake path of a finite lamination: the
/// double sum over ordered leaf pairs of the pair kernel. Diagonal terms
/// recover the simple-earthquake kernel exactly (`d_h = 0`).
pub fn d2_lamination(mu: &FiniteLamination, xi: &TestFunction, tol: f64) -> Result<f64> {
    if mu.is_empty() {
        return Ok(0.0);
    }
    let nterms = (mu.len() * mu.len()) as f64;
    let mut sum = 0.0;
    for li in mu.leaves() {
        for lk in mu.leaves() {
            let (fs, ss) = merged_splits(xi.support(), &[li.geodesic, lk.geodesic]);
            let out = quad_weighted_split(
                xi,
                |h| re(d2_pair_kernel(&li.geodesic, &lk.geodesic, h)),
                tol / nterms,
                &fs,
                &ss,
            )?;
            sum += li.weight * lk.weight * out.value.re;
        }
    }
    Ok(sum)
}

/// Quake-bend first derivative at `tau` by the dyadic route:
/// `Σᵢ ωᵢ ∫ ξ(h)·cosh 𝐝(E(gᵢ), E(h)) dL_{[E]}(h)` over geodesics crossing
/// `gᵢ`, with `E = E^{τμ}`. Computed as a single dyadic pass with the
/// combined weight.
pub fn d1_quakebend(
    mu: &FiniteLamination,
    tau: Complex64,
    xi: &TestFunction,
    tol: f64,
) -> Result<Complex64> {
    Ok(d1_quakebend_diagnostics(mu, tau, xi, tol)?.0)
}

/// As [`d1_quakebend`], returning the dyadic diagnostics.
pub fn d1_quakebend_diagnostics(
    mu: &FiniteLamination,
    tau: Complex64,
    xi: &TestFunction,
    tol: f64,
) -> Result<(Complex64, DyadicResult)> {
    let e = elementary_earthquake(mu, tau);
    let images: Vec<Geodesic> =
        mu.leaves().iter().map(|l| e.evaluate_geodesic(&l.geodesic)).collect();
    let weight = |h_orig: &Geodesic, h_img: &Geodesic| -> Complex64 {
        let mut w = re(0.0);
        for (leaf, img) in mu.leaves().iter().zip(&images) {
            if geodesics_cross(&leaf.geodesic, h_orig).unwrap_or(false) {
                if let Ok(ch) = cosh_complex_distance(img, h_img) {
                    w += leaf.weight * ch;
                }
            }
        }
        w
    };
    let out = functional_dyadic(&e, xi, weight, 2, tol)?;
    Ok((out.value, out))
}

/// Quake-bend derivative for a single leaf by the explicit integrand: in the
/// leaf's standard coordinates,
/// `ω ∬ ξ(h(x,y)) · (−x e^{τω} − y) e^{τω} / (x e^{τω} − y)³ dx dy`,
/// with the `(x,y)` roles mirrored on sub-boxes whose first arc lies on the
/// unsheared side. This is the quadrature counterpart of the dyadic route.
pub fn d1_quakebend_explicit(
    g: &Geodesic,
    omega: f64,
    tau: Complex64,
    xi: &TestFunction,
    tol: f64,
) -> Result<Complex64> {
    let m = mobius_to_standard(g);
    let e = (tau * omega).exp();
    let (fs, ss) = leaf_splits(xi.support(), g);
    let kernel = move |h: &Geodesic| -> Complex64 {
        if !geodesics_cross(g, h).unwrap_or(false) {
            return re(0.0);
        }
        let x = match m.apply(h.p_minus()).as_real() {
            Some(x) => x,
            None => return re(0.0),
        };
        let y = match m.apply(h.p_plus()).as_real() {
            Some(y) => y,
            None => return re(0.0),
        };
        let dxy = x - y;
        if x > 0.0 {
            // first endpoint on the sheared side
            let den = e * x - y;
            (-e * x - y) * e / (den * den * den) * (dxy * dxy)
        } else {
            // mirrored roles: d/dτ of the density with the second endpoint moving
            let den = x - e * y;
            (x + e * y) * e / (den * den * den) * (dxy * dxy)
        }
    };
    let out = quad_weighted_split(xi, kernel, tol, &fs, &ss)?;
    Ok(out.value * omega)
}

/// The pullback Liouville functional `∫ ξ d L_{[f]}` by change of variables:
/// on each sub-rectangle where the pieces are constant, integrate
/// `ξ(h(x,y)) · A'(x) B'(y) / (A(x) − B(y))²` adaptively. Holomorphic in the
/// quake-bend parameter, which makes it the oracle path for finite
/// differences and contour derivatives.
pub fn pullback_functional(
    f: &PiecewiseMobiusMap,
    xi: &TestFunction,
    tol: f64,
) -> Result<QuadResult> {
    let b = xi.support();
    let transport = crate::currents::transport_for_box(b);
    let tinv = transport.inverse();

    let mut first_interior = xi.first_kinks();
    let mut second_interior = xi.second_kinks();
    for p in f.breakpoints() {
        if b.first().contains(p) {
            first_interior.push(*p);
        }
        if b.second().contains(p) {
            second_interior.push(*p);
        }
    }
    let xbreaks = crate::currents::transported_breaks(&transport, b.first(), &first_interior)?;
    let ybreaks = crate::currents::transported_breaks(&transport, b.second(), &second_interior)?;

    let mut total = re(0.0);
    let mut err = 0.0;
    let mut evals = 0u64;
    let segments = |breaks: &[f64]| -> Vec<(f64, f64)> {
        breaks.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let xsegs = segments(&xbreaks);
    let ysegs = segments(&ybreaks);
    let cell_tol = tol / (xsegs.len() * ysegs.len()) as f64;
    for &(x0, x1) in &xsegs {
        // piece acting on this segment, composed with the inverse transport
        let mid = tinv.apply(&BoundaryPoint::real(0.5 * (x0 + x1)));
        let pa = f.piece_at(&mid).compose(&tinv);
        for &(y0, y1) in &ysegs {
            let mid = tinv.apply(&BoundaryPoint::real(0.5 * (y0 + y1)));
            let pb = f.piece_at(&mid).compose(&tinv);
            let integrand = |x: f64, y: f64| -> Complex64 {
                let hp = tinv.apply(&BoundaryPoint::real(x));
                let hq = tinv.apply(&BoundaryPoint::real(y));
                let h = match Geodesic::new(hp, hq) {
                    Ok(h) => h,
                    Err(_) => return re(0.0),
                };
                let xv = xi.evaluate(&h);
                if xv.norm() == 0.0 {
                    return re(0.0);
                }
                let zx = Complex64::new(x, 0.0);
                let zy = Complex64::new(y, 0.0);
                let den = pa.apply_complex(zx) - pb.apply_complex(zy);
                xv * pa.derivative_at(zx) * pb.derivative_at(zy) / (den * den)
            };
            let out = adaptive_2d(integrand, &[x0, x1], &[y0, y1], cell_tol, 20_000_000);
            total += out.value;
            err += out.error_estimate;
            evals += out.evaluations;
        }
    }
    if err > tol {
        return Err(Error::ToleranceNotMet {
            value: total,
            achieved: err,
            requested: tol,
            evaluations: evals,
        });
    }
    Ok(QuadResult { value: total, error_estimate: err, evaluations: evals })
}

/// The earthquake-path functional `t ↦ L([E^{tμ}])(ξ)` by the quadrature
/// route.
pub fn earthquake_functional(
    mu: &FiniteLamination,
    t: Complex64,
    xi: &TestFunction,
    tol: f64,
) -> Result<Complex64> {
    let e = elementary_earthquake(mu, t);
    Ok(pullback_functional(&e, xi, tol)?.value)
}

/// Stencil order for [`fd_derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    First,
    Second,
}

/// Finite-difference derivative with one Richardson extrapolation step; both
/// the raw and extrapolated values are reported.
#[derive(Debug, Clone)]
pub struct FdResult {
    pub raw: Complex64,
    pub extrapolated: Complex64,
    pub error_estimate: f64,
}

/// Central finite differences of a path: order one is the two-point central
/// difference, order two the 5-point second difference; both Richardson
/// extrapolated once (steps `h` and `h/2`).
pub fn fd_derivative(
    mut path: impl FnMut(f64) -> Result<Complex64>,
    t0: f64,
    step: f64,
    order: FdOrder,
) -> Result<FdResult> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    let mut eval = |t: f64| -> Result<Complex64> {
        path(t).map_err(|e| Error::StencilFailure(e.to_string()))
    };
    match order {
        FdOrder::First => {
            let d = |h: f64, ev: &mut dyn FnMut(f64) -> Result<Complex64>| -> Result<Complex64> {
                Ok((ev(t0 + h)? - ev(t0 - h)?) / (2.0 * h))
            };
            let raw = d(step, &mut eval)?;
            let half = d(step / 2.0, &mut eval)?;
            let extrapolated = (4.0 * half - raw) / 3.0;
            Ok(FdResult { raw, extrapolated, error_estimate: (extrapolated - half).norm() })
        }
        FdOrder::Second => {
            let f0 = eval(t0)?;
            let mut d = |h: f64| -> Result<Complex64> {
                let fm2 = eval(t0 - 2.0 * h)?;
                let fm1 = eval(t0 - h)?;
                let fp1 = eval(t0 + h)?;
                let fp2 = eval(t0 + 2.0 * h)?;
                Ok((-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h))
            };
            let raw = d(step)?;
            let half = d(step / 2.0)?;
            let extrapolated = (16.0 * half - raw) / 15.0;
            Ok(FdResult { raw, extrapolated, error_estimate: (extrapolated - half).norm() })
        }
    }
}

/// `k`-th derivative at `tau0` by the Cauchy integral
/// `k!/(2πi) ∮ f(τ)/(τ−τ0)^{k+1} dτ`, trapezoid rule on a circle of the
/// given radius. Spectrally accurate for holomorphic paths.
pub fn cauchy_derivative(
    mut path: impl FnMut(Complex64) -> Result<Complex64>,
    tau0: Complex64,
    radius: f64,
    points: usize,
    k: u32,
) -> Result<Complex64> {
    if !(radius > 0.0) || points < 4 * (k as usize + 1) {
        return Err(Error::InvalidParameter(
            "need radius > 0 and at least 4(k+1) contour points".into(),
        ));
    }
    let mut sum = re(0.0);
    for j in 0..points {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / points as f64;
        let rot = Complex64::new(0.0, theta).exp();
        let v = path(tau0 + radius * rot)
            .map_err(|e| Error::PathEvaluationFailure(e.to_string()))?;
        sum += v * Complex64::new(0.0, -(k as f64) * theta).exp();
    }
    let kfact: f64 = (1..=k.max(1)).map(|j| j as f64).product();
    let kfact = if k == 0 { 1.0 } else { kfact };
    Ok(sum * kfact / (radius.powi(k as i32) * points as f64))
}

/// Least-squares fit of `log I(g)` against `d_g` for a receding family.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub distances: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
}

/// Magnitudes `I(g) = |∫ ξ(h) cos(g,h) dL(h)|` against the distance from
/// the reference point, with a least-squares fit of `log I` vs `d_g`.
/// Distances must be strictly increasing along the family.
pub fn decay_profile(
    xi: &TestFunction,
    geodesics: &[Geodesic],
    tol: f64,
) -> Result<DecayFit> {
    if geodesics.len() < 2 {
        return Err(Error::InvalidParameter("need at least two geodesics".into()));
    }
    let distances: Vec<f64> = geodesics
        .iter()
        .map(|g| point_to_geodesic_distance(&REFERENCE_POINT, g))
        .collect();
    if distances.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "family must recede: distances must be strictly increasing".into(),
        ));
    }
    let mut magnitudes = Vec::with_capacity(geodesics.len());
    for g in geodesics {
        let (fs, ss) = leaf_splits(xi.support(), g);
        let out = quad_weighted_split(
            xi,
            |h| re(cos_angle(g, h).unwrap_or(0.0)),
            tol,
            &fs,
            &ss,
        )?;
        magnitudes.push(out.value.norm());
    }
    let pairs: Vec<(f64, f64)> = distances
        .iter()
        .zip(&magnitudes)
        .filter(|(_, &m)| m > 1e-300)
        .map(|(&d, &m)| (d, m.ln()))
        .collect();
    if pairs.is_empty() {
        return Err(Error::AllZero);
    }
    if pairs.len() < 2 {
        return Err(Error::InvalidParameter(
            "fewer than two nonzero magnitudes to fit".into(),
        ));
    }
    let n = pairs.len() as f64;
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    Ok(DecayFit { distances, magnitudes, fitted_slope: slope, fitted_intercept: intercept })
}

/// A receding family for the decay bound: geodesics with both endpoints in
/// the first support arc, one pinned at the arc's upper corner, the other
/// approaching it so the distance to the reference point sweeps
/// `[d_min, d_max]`.
pub fn receding_family(
    xi: &TestFunction,
    count: usize,
    d_min: f64,
    d_max: f64,
) -> Result<Vec<Geodesic>> {
    if count < 2 || !(d_max > d_min) {
        return Err(Error::InvalidParameter("need count ≥ 2 and d_max > d_min".into()));
    }
    let arc = xi.support().first();
    let (lo, hi) = match (arc.lo().as_real(), arc.hi().as_real()) {
        (Some(lo), Some(hi)) if hi > lo => (lo, hi),
        _ => {
            return Err(Error::InvalidParameter(
                "receding family needs a finite increasing first arc".into(),
            ))
        }
    };
    let dist_of = |q: f64| -> f64 {
        point_to_geodesic_distance(
            &REFERENCE_POINT,
            &Geodesic::from_reals(q, hi).expect("q < hi"),
        )
    };
    let mut family = Vec::with_capacity(count);
    for k in 0..count {
        let target = d_min + (d_max - d_min) * k as f64 / (count - 1) as f64;
        // bracket: distance increases as q → hi
        let mut a = lo + 1e-12 * (hi - lo);
        let mut b = hi - 1e-12 * (hi - lo);
        if dist_of(a) > target {
            return Err(Error::InvalidParameter(format!(
                "target distance {target} below the family minimum {}",
                dist_of(a)
            )));
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if dist_of(m) < target {
                a = m;
            } else {
                b = m;
            }
        }
        family.push(Geodesic::from_reals(0.5 * (a + b), hi)?);
    }
    Ok(family)
}

/// Truncation table: the quake-bend derivative of `μ` restricted to growing
/// disks. Radii must be increasing; rows stabilize once the radius passes
/// every leaf.
pub fn kj_stabilization(
    mu: &FiniteLamination,
    xi: &TestFunction,
    radii: &[f64],
    tau: Complex64,
    tol: f64,
) -> Result<Vec<(f64, Complex64)>> {
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("radii must be strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let truncated = mu.restrict_to_disk(r);
        let value = if truncated.is_empty() {
            re(0.0)
        } else {
            d1_quakebend(&truncated, tau, xi, tol)?
        };
        rows.push((r, value));
    }
    Ok(rows)
}

/// The dyadic functional with unit weight, as a path in `τ` for the Cauchy
/// oracle.
pub fn quakebend_functional_dyadic(
    mu: &FiniteLamination,
    tau: Complex64,
    xi: &TestFunction,
    tol: f64,
) -> Result<Complex64> {
    let e = elementary_earthquake(mu, tau);
    Ok(functional_dyadic_capped(&e, xi, |_, _| re(1.0), 2, tol, 12)?.value)
}

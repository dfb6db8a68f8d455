//! Liouville measures of boxes, pullback Liouville functionals, adaptive
//! quadrature against the Liouville density, and the dyadic-subdivision sums
//! for complex deformations.
//!
//! A box `[a,b]×[c,d]` is the set of oriented geodesics with the first
//! endpoint in the counterclockwise arc from `a` to `b` and the second in the
//! arc from `c` to `d`. Its Liouville mass is `log cr(a,b,c,d)`.
//!
//! Boxes straddling `∞` are handled by the projective substitution
//! `z ↦ −1/(z − p)` with `p` in a complementary gap; the Liouville density is
//! invariant, so nothing is clipped or approximated.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::earthquake::PiecewiseMobiusMap;
use crate::hyp::{cross_ratio, det2, BoundaryPoint, Geodesic, MobiusMap, REFERENCE_POINT};
use crate::{Error, Result};

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Closed counterclockwise arc of the circle from `lo` to `hi`.
#[derive(Debug, Clone, Copy)]
pub struct CircleArc {
    lo: BoundaryPoint,
    hi: BoundaryPoint,
}

impl CircleArc {
    pub fn new(lo: BoundaryPoint, hi: BoundaryPoint) -> Result<Self> {
        if lo.approx_eq(&hi) {
            return Err(Error::InvalidBox("arc endpoints coincide".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> &BoundaryPoint {
        &self.lo
    }

    pub fn hi(&self) -> &BoundaryPoint {
        &self.hi
    }

    /// Strict interior membership.
    pub fn contains(&self, p: &BoundaryPoint) -> bool {
        let s1 = (det2(&self.lo, p) * det2(p, &self.hi) * det2(&self.hi, &self.lo)).re;
        s1 > 0.0 && !p.approx_eq(&self.lo) && !p.approx_eq(&self.hi)
    }

    pub fn contains_closure(&self, p: &BoundaryPoint) -> bool {
        self.contains(p) || p.approx_eq(&self.lo) || p.approx_eq(&self.hi)
    }

    fn contains_infinity_closure(&self) -> bool {
        self.contains_closure(&BoundaryPoint::infinity())
    }
}

/// A box of geodesics: the product of two disjoint closed arcs.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicBox {
    first: CircleArc,
    second: CircleArc,
}

impl GeodesicBox {
    pub fn new(first: CircleArc, second: CircleArc) -> Result<Self> {
        let b = Self { first, second };
        let (a, bb, c, d) = b.corners();
        let pts = [a, bb, c, d];
        for i in 0..4 {
            for j in i + 1..4 {
                if pts[i].approx_eq(pts[j]) {
                    return Err(Error::InvalidBox(format!("corners {i} and {j} coincide")));
                }
            }
        }
        if b.first.contains_closure(c)
            || b.first.contains_closure(d)
            || b.second.contains_closure(a)
            || b.second.contains_closure(bb)
        {
            return Err(Error::InvalidBox("arcs are not disjoint".into()));
        }
        Ok(b)
    }

    pub fn from_points(
        a: BoundaryPoint,
        b: BoundaryPoint,
        c: BoundaryPoint,
        d: BoundaryPoint,
    ) -> Result<Self> {
        Self::new(CircleArc::new(a, b)?, CircleArc::new(c, d)?)
    }

    /// Corners where `None` stands for infinity.
    pub fn from_parts(
        a: Option<f64>,
        b: Option<f64>,
        c: Option<f64>,
        d: Option<f64>,
    ) -> Result<Self> {
        let mk = |x: Option<f64>| x.map_or_else(BoundaryPoint::infinity, BoundaryPoint::real);
        Self::from_points(mk(a), mk(b), mk(c), mk(d))
    }

    pub fn first(&self) -> &CircleArc {
        &self.first
    }

    pub fn second(&self) -> &CircleArc {
        &self.second
    }

    pub fn corners(&self) -> (&BoundaryPoint, &BoundaryPoint, &BoundaryPoint, &BoundaryPoint) {
        (&self.first.lo, &self.first.hi, &self.second.lo, &self.second.hi)
    }

    /// True when the geodesic has its first endpoint in the first arc and its
    /// second in the second arc (strict interiors).
    pub fn contains(&self, h: &Geodesic) -> bool {
        self.first.contains(h.p_minus()) && self.second.contains(h.p_plus())
    }
}

/// Liouville mass of a box: `log cr(a,b,c,d) > 0`.
pub fn liouville_box(b: &GeodesicBox) -> Result<f64> {
    let (a, bb, c, d) = b.corners();
    let cr = cross_ratio(a, bb, c, d)?;
    if cr.im.abs() > 1e-10 * cr.norm() || cr.re <= 1.0 {
        return Err(Error::DegenerateConfiguration(format!(
            "box cross-ratio {cr} is not a real number above 1"
        )));
    }
    Ok(cr.re.ln())
}

fn guarded_ln(cr: Complex64) -> Result<Complex64> {
    if cr.norm() < 1e-280 || (cr.re <= 0.0 && cr.im.abs() <= 1e-12 * cr.norm()) {
        return Err(Error::BranchGuard(cr));
    }
    Ok(cr.ln())
}

/// Pullback Liouville mass of a box under a boundary map: the principal
/// logarithm of the cross-ratio of the image corners. Complex for quake-bend
/// flavor maps; errors with `BranchGuard` near the branch cut.
pub fn pullback_box(f: &PiecewiseMobiusMap, b: &GeodesicBox) -> Result<Complex64> {
    let (a, bb, c, d) = b.corners();
    let cr = cross_ratio(&f.evaluate(a), &f.evaluate(bb), &f.evaluate(c), &f.evaluate(d))?;
    guarded_ln(cr)
}

/// Solve `cr(a, x, c, d) = K` for `x`, projectively. The first-arc equal-mass
/// cut with mass `m` is `K = e^m`.
fn cut_first(a: &BoundaryPoint, c: &BoundaryPoint, d: &BoundaryPoint, k: f64) -> BoundaryPoint {
    let r = re(k) * det2(a, d) / det2(a, c);
    BoundaryPoint::new(
        d.numerator() - r * c.numerator(),
        d.denominator() - r * c.denominator(),
    )
    .expect("cut point is well-defined for 1 < K < cr(a,b,c,d)")
}

/// Solve `cr(a, b, c, y) = K` for `y`, projectively.
fn cut_second(a: &BoundaryPoint, b: &BoundaryPoint, c: &BoundaryPoint, k: f64) -> BoundaryPoint {
    let r = re(k) * det2(b, c) / det2(a, c);
    BoundaryPoint::new(
        b.numerator() - r * a.numerator(),
        b.denominator() - r * a.denominator(),
    )
    .expect("cut point is well-defined for 1 < K < cr(a,b,c,d)")
}

/// Equal-mass dyadic partition points: `2ⁿ + 1` points per side, cut so that
/// every vertical strip `[a_{s−1}, a_s] × [c,d]` carries Liouville mass
/// exactly `total / 2ⁿ`, and likewise horizontally.
pub fn dyadic_partition(
    b: &GeodesicBox,
    n: u32,
) -> Result<(Vec<BoundaryPoint>, Vec<BoundaryPoint>)> {
    let total = liouville_box(b)?;
    let (a, bb, c, d) = b.corners();
    let count = 1usize << n;
    let mut xs = Vec::with_capacity(count + 1);
    let mut ys = Vec::with_capacity(count + 1);
    xs.push(*a);
    ys.push(*c);
    for s in 1..count {
        let k = (s as f64 * total / count as f64).exp();
        xs.push(cut_first(a, c, d, k));
        ys.push(cut_second(a, bb, c, k));
    }
    xs.push(*bb);
    ys.push(*d);
    Ok((xs, ys))
}

/// Strip-mass fraction of a point of the first arc: the Liouville mass of
/// `[a, p] × [c,d]` divided by the box total. Zero at `a`, one at `b`.
pub fn first_arc_mass_fraction(b: &GeodesicBox, p: &BoundaryPoint) -> Result<f64> {
    let (a, _, c, d) = b.corners();
    let cr = cross_ratio(a, p, c, d)?;
    Ok(cr.re.ln() / liouville_box(b)?)
}

/// Strip-mass fraction of a point of the second arc.
pub fn second_arc_mass_fraction(b: &GeodesicBox, p: &BoundaryPoint) -> Result<f64> {
    let (a, bb, c, _) = b.corners();
    let cr = cross_ratio(a, bb, c, p)?;
    Ok(cr.re.ln() / liouville_box(b)?)
}

/// Angle distance between two boundary points as seen from the reference
/// point `i`.
pub fn boundary_angle_distance(p: &BoundaryPoint, q: &BoundaryPoint) -> f64 {
    crate::hyp::angle_metric(&REFERENCE_POINT, p, q)
}

/// Product angle distance between oriented geodesics (max over endpoints).
pub fn geodesic_angle_distance(g: &Geodesic, h: &Geodesic) -> f64 {
    boundary_angle_distance(g.p_minus(), h.p_minus())
        .max(boundary_angle_distance(g.p_plus(), h.p_plus()))
}

type CustomEval = Arc<dyn Fn(&Geodesic) -> Complex64 + Send + Sync>;

#[derive(Clone)]
enum Profile {
    /// Product of 1D hats, piecewise linear in the strip-mass fraction of the
    /// support box, raised to the power `lambda`. The kinks sit exactly on
    /// the equal-mass dyadic grid.
    MassHat { lambda: f64 },
    Custom {
        eval: CustomEval,
        first_kinks: Vec<BoundaryPoint>,
        second_kinks: Vec<BoundaryPoint>,
    },
}

/// A Hölder test function on geodesics with compact support in a box.
#[derive(Clone)]
pub struct TestFunction {
    support: GeodesicBox,
    holder_exponent: f64,
    holder_seminorm: f64,
    profile: Profile,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("support", &self.support)
            .field("holder_exponent", &self.holder_exponent)
            .field("holder_seminorm", &self.holder_seminorm)
            .finish()
    }
}

fn hat(f: f64) -> f64 {
    (1.0 - (2.0 * f - 1.0).abs()).max(0.0)
}

/// Numerical sup of |d(mass fraction)/dθ| along an arc, with a safety factor.
/// The fraction is smooth and monotone on a compact arc, so fine secants plus
/// local refinement give a reliable bound.
fn fraction_angle_lipschitz(
    frac: impl Fn(&BoundaryPoint) -> f64,
    lo: &BoundaryPoint,
    hi: &BoundaryPoint,
) -> f64 {
    let t0 = lo.circle_angle();
    let mut t1 = hi.circle_angle();
    if t1 <= t0 {
        t1 += 2.0 * std::f64::consts::PI;
    }
    let point_at = |t: f64| {
        let tw = if t > std::f64::consts::PI { t - 2.0 * std::f64::consts::PI } else { t };
        BoundaryPoint::new(re((tw / 2.0).sin()), re((tw / 2.0).cos())).unwrap()
    };
    let slope_on = |a: f64, b: f64, n: usize| -> (f64, f64) {
        let mut best = 0.0;
        let mut at = a;
        let mut prev = frac(&point_at(a));
        for k in 1..=n {
            let t = a + (b - a) * k as f64 / n as f64;
            let v = frac(&point_at(t));
            let s = ((v - prev) / ((b - a) / n as f64)).abs();
            if s > best {
                best = s;
                at = t;
            }
            prev = v;
        }
        (best, at)
    };
    let (mut best, mut at) = slope_on(t0, t1, 2048);
    // refine around the argmax twice
    for _ in 0..2 {
        let w = (t1 - t0) / 512.0;
        let (b2, a2) = slope_on((at - w).max(t0), (at + w).min(t1), 512);
        if b2 > best {
            best = b2;
            at = a2;
        }
    }
    best * 1.25
}

impl TestFunction {
    /// Tent: product of hats linear in strip-mass fraction; `λ = 1`.
    pub fn tent(support: GeodesicBox) -> Result<Self> {
        Self::mass_hat(support, 1.0)
    }

    /// Bump with Hölder exponent `λ ∈ (0, 1]`: the tent hats raised to `λ`.
    pub fn bump(support: GeodesicBox, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidTestFunction(format!(
                "Hölder exponent must be in (0, 1], got {lambda}"
            )));
        }
        Self::mass_hat(support, lambda)
    }

    fn mass_hat(support: GeodesicBox, lambda: f64) -> Result<Self> {
        liouville_box(&support)?;
        let b = support;
        let lx = fraction_angle_lipschitz(
            |p| first_arc_mass_fraction(&b, p).unwrap_or(0.0),
            b.first.lo(),
            b.first.hi(),
        );
        let ly = fraction_angle_lipschitz(
            |p| second_arc_mass_fraction(&b, p).unwrap_or(0.0),
            b.second.lo(),
            b.second.hi(),
        );
        let seminorm = (2.0 * lx).powf(lambda) + (2.0 * ly).powf(lambda);
        Ok(Self {
            support,
            holder_exponent: lambda,
            holder_seminorm: seminorm,
            profile: Profile::MassHat { lambda },
        })
    }

    /// A caller-supplied evaluator with declared Hölder data and the interior
    /// kink lines the quadrature should split at.
    pub fn custom(
        support: GeodesicBox,
        holder_exponent: f64,
        holder_seminorm: f64,
        eval: impl Fn(&Geodesic) -> Complex64 + Send + Sync + 'static,
        first_kinks: Vec<BoundaryPoint>,
        second_kinks: Vec<BoundaryPoint>,
    ) -> Result<Self> {
        liouville_box(&support)?;
        Ok(Self {
            support,
            holder_exponent,
            holder_seminorm,
            profile: Profile::Custom { eval: Arc::new(eval), first_kinks, second_kinks },
        })
    }

    pub fn support(&self) -> &GeodesicBox {
        &self.support
    }

    pub fn holder_exponent(&self) -> f64 {
        self.holder_exponent
    }

    pub fn holder_seminorm(&self) -> f64 {
        self.holder_seminorm
    }

    /// Value on a geodesic; zero outside the support box.
    pub fn evaluate(&self, h: &Geodesic) -> Complex64 {
        if !self.support.contains(h) {
            return re(0.0);
        }
        match &self.profile {
            Profile::MassHat { lambda } => {
                let fx = first_arc_mass_fraction(&self.support, h.p_minus()).unwrap_or(0.0);
                let fy = second_arc_mass_fraction(&self.support, h.p_plus()).unwrap_or(0.0);
                re(self.hat_value(fx, fy, *lambda))
            }
            Profile::Custom { eval, .. } => eval(h),
        }
    }

    fn hat_value(&self, fx: f64, fy: f64, lambda: f64) -> f64 {
        let h = hat(fx) * hat(fy);
        if lambda == 1.0 {
            h
        } else {
            h.powf(lambda)
        }
    }

    /// Fast path for the dyadic grid, whose points sit at exact mass
    /// fractions of the support box.
    fn evaluate_at_fractions(&self, fx: f64, fy: f64, h: impl FnOnce() -> Geodesic) -> Complex64 {
        match &self.profile {
            Profile::MassHat { lambda } => re(self.hat_value(fx, fy, *lambda)),
            Profile::Custom { eval, .. } => eval(&h()),
        }
    }

    /// Interior kink points in the first arc, for quadrature cell seeding.
    pub fn first_kinks(&self) -> Vec<BoundaryPoint> {
        match &self.profile {
            Profile::MassHat { .. } => {
                let (a, _, c, d) = self.support.corners();
                let half = (0.5 * liouville_box(&self.support).unwrap()).exp();
                vec![cut_first(a, c, d, half)]
            }
            Profile::Custom { first_kinks, .. } => first_kinks.clone(),
        }
    }

    pub fn second_kinks(&self) -> Vec<BoundaryPoint> {
        match &self.profile {
            Profile::MassHat { .. } => {
                let (a, b, c, _) = self.support.corners();
                let half = (0.5 * liouville_box(&self.support).unwrap()).exp();
                vec![cut_second(a, b, c, half)]
            }
            Profile::Custom { second_kinks, .. } => second_kinks.clone(),
        }
    }
}

/// Quadrature outcome: value, an honest error estimate and the number of
/// integrand evaluations.
#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: u64,
}

fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on P_n with the usual asymptotic initial guess.
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for j in 2..=n {
            let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn gauss7() -> &'static (Vec<f64>, Vec<f64>) {
    static CELL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| legendre_nodes(7))
}

fn gauss15() -> &'static (Vec<f64>, Vec<f64>) {
    static CELL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| legendre_nodes(15))
}

fn tensor_rule(
    f: &mut dyn FnMut(f64, f64) -> Complex64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    rule: &(Vec<f64>, Vec<f64>),
) -> Complex64 {
    let (nodes, weights) = rule;
    let (cx, hx) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
    let (cy, hy) = (0.5 * (y0 + y1), 0.5 * (y1 - y0));
    let mut sum = re(0.0);
    for (xi, wi) in nodes.iter().zip(weights) {
        let x = cx + hx * xi;
        let mut row = re(0.0);
        for (yj, wj) in nodes.iter().zip(weights) {
            row += *wj * f(x, cy + hy * yj);
        }
        sum += *wi * row;
    }
    sum * (hx * hy)
}

/// Adaptive tensor Gauss–Legendre on a grid of seed cells: embedded 7/15
/// rule pair per cell, global greedy refinement of the worst cell until the
/// summed error estimate clears the tolerance. Deterministic: the heap
/// orders by (error, insertion index) with total ordering on floats, and the
/// final value is summed in insertion order.
pub(crate) fn adaptive_2d(
    mut f: impl FnMut(f64, f64) -> Complex64,
    xbreaks: &[f64],
    ybreaks: &[f64],
    tol: f64,
    max_evaluations: u64,
) -> QuadResult {
    use std::collections::BinaryHeap;

    struct Cell {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        value: Complex64,
        err: f64,
        depth: u32,
        alive: bool,
    }

    struct HeapEntry {
        err: f64,
        idx: usize,
    }
    impl PartialEq for HeapEntry {
        fn eq(&self, other: &Self) -> bool {
            self.err == other.err && self.idx == other.idx
        }
    }
    impl Eq for HeapEntry {}
    impl PartialOrd for HeapEntry {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for HeapEntry {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.err
                .total_cmp(&other.err)
                .then_with(|| self.idx.cmp(&other.idx))
        }
    }

    const MAX_DEPTH: u32 = 30;
    let mut cells: Vec<Cell> = Vec::new();
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut evals: u64 = 0;
    let mut total_err = 0.0;

    let push = |cells: &mut Vec<Cell>,
                    heap: &mut BinaryHeap<HeapEntry>,
                    evals: &mut u64,
                    total_err: &mut f64,
                    f: &mut dyn FnMut(f64, f64) -> Complex64,
                    x0: f64,
                    x1: f64,
                    y0: f64,
                    y1: f64,
                    depth: u32| {
        let q7 = tensor_rule(f, x0, x1, y0, y1, gauss7());
        let q15 = tensor_rule(f, x0, x1, y0, y1, gauss15());
        *evals += 49 + 225;
        let err = (q15 - q7).norm();
        let idx = cells.len();
        cells.push(Cell { x0, x1, y0, y1, value: q15, err, depth, alive: true });
        *total_err += err;
        if depth < MAX_DEPTH && err > 0.0 {
            heap.push(HeapEntry { err, idx });
        }
    };

    for xi in 0..xbreaks.len() - 1 {
        for yi in 0..ybreaks.len() - 1 {
            push(
                &mut cells,
                &mut heap,
                &mut evals,
                &mut total_err,
                &mut f,
                xbreaks[xi],
                xbreaks[xi + 1],
                ybreaks[yi],
                ybreaks[yi + 1],
                0,
            );
        }
    }

    while total_err > 0.9 * tol && evals + 4 * 274 <= max_evaluations {
        let top = match heap.pop() {
            Some(t) => t,
            None => break,
        };
        if !cells[top.idx].alive {
            continue;
        }
        let (x0, x1, y0, y1, err, depth) = {
            let c = &mut cells[top.idx];
            c.alive = false;
            (c.x0, c.x1, c.y0, c.y1, c.err, c.depth)
        };
        total_err -= err;
        let xm = 0.5 * (x0 + x1);
        let ym = 0.5 * (y0 + y1);
        for (a, b, c, d) in [
            (x0, xm, y0, ym),
            (xm, x1, y0, ym),
            (x0, xm, ym, y1),
            (xm, x1, ym, y1),
        ] {
            push(&mut cells, &mut heap, &mut evals, &mut total_err, &mut f, a, b, c, d, depth + 1);
        }
    }

    let mut value = re(0.0);
    let mut err = 0.0;
    for c in &cells {
        if c.alive {
            value += c.value;
            err += c.err;
        }
    }
    QuadResult { value, error_estimate: err, evaluations: evals }
}

/// Transport sending the box into finite position: the identity when both
/// arc closures avoid `∞`, otherwise `z ↦ −1/(z − p)` with `p` inside a
/// complementary gap.
pub(crate) fn transport_for_box(b: &GeodesicBox) -> MobiusMap {
    if !b.first.contains_infinity_closure() && !b.second.contains_infinity_closure() {
        return MobiusMap::identity();
    }
    let (_, bb, c, d) = b.corners();
    let (a, _, _, _) = b.corners();
    let gap_mid = |from: &BoundaryPoint, to: &BoundaryPoint| {
        let t0 = from.circle_angle();
        let mut t1 = to.circle_angle();
        if t1 <= t0 {
            t1 += 2.0 * std::f64::consts::PI;
        }
        let mut tm = 0.5 * (t0 + t1);
        if tm > std::f64::consts::PI {
            tm -= 2.0 * std::f64::consts::PI;
        }
        BoundaryPoint::new(re((tm / 2.0).sin()), re((tm / 2.0).cos())).unwrap()
    };
    // complementary gaps are (b → c) and (d → a); pick the wider-looking one
    // that is safely away from the corners
    for p in [gap_mid(d, a), gap_mid(bb, c)] {
        if ![a, bb, c, d].iter().any(|q| q.approx_eq(&p)) {
            let pr = p.to_complex().unwrap().re;
            return MobiusMap::from_reals(0.0, -1.0, 1.0, -pr).unwrap();
        }
    }
    unreachable!("a valid box always has a usable complementary gap")
}

pub(crate) fn transported_breaks(
    m: &MobiusMap,
    arc: &CircleArc,
    interior: &[BoundaryPoint],
) -> Result<Vec<f64>> {
    let lo = m
        .apply(arc.lo())
        .as_real()
        .ok_or_else(|| Error::InvalidBox("transport failed to make the arc finite".into()))?;
    let hi = m
        .apply(arc.hi())
        .as_real()
        .ok_or_else(|| Error::InvalidBox("transport failed to make the arc finite".into()))?;
    let mut xs = vec![lo, hi];
    for p in interior {
        if let Some(x) = m.apply(p).as_real() {
            if x > lo && x < hi {
                xs.push(x);
            }
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * (a.abs() + b.abs() + 1.0));
    if xs.len() < 2 || hi <= lo {
        return Err(Error::InvalidBox("degenerate transported arc".into()));
    }
    Ok(xs)
}

/// Adaptive quadrature of `ξ(h)·kernel(h)` against the Liouville density over
/// the support box of `ξ`.
pub fn quad_weighted(
    xi: &TestFunction,
    kernel: impl Fn(&Geodesic) -> Complex64,
    tol: f64,
) -> Result<QuadResult> {
    quad_weighted_split(xi, kernel, tol, &[], &[])
}

/// As [`quad_weighted`], with extra cell-boundary points (kernel kinks such
/// as leaf endpoints) on each axis.
pub fn quad_weighted_split(
    xi: &TestFunction,
    kernel: impl Fn(&Geodesic) -> Complex64,
    tol: f64,
    first_splits: &[BoundaryPoint],
    second_splits: &[BoundaryPoint],
) -> Result<QuadResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("quadrature tolerance must be positive".into()));
    }
    let b = xi.support();
    let m = transport_for_box(b);
    let minv = m.inverse();

    let mut first_interior = xi.first_kinks();
    first_interior.extend_from_slice(first_splits);
    let mut second_interior = xi.second_kinks();
    second_interior.extend_from_slice(second_splits);
    let xbreaks = transported_breaks(&m, b.first(), &first_interior)?;
    let ybreaks = transported_breaks(&m, b.second(), &second_interior)?;

    let f = |x: f64, y: f64| -> Complex64 {
        let p = minv.apply(&BoundaryPoint::real(x));
        let q = minv.apply(&BoundaryPoint::real(y));
        let h = match Geodesic::new(p, q) {
            Ok(h) => h,
            Err(_) => return re(0.0),
        };
        let xv = xi.evaluate(&h);
        if xv.norm() == 0.0 {
            return re(0.0);
        }
        let dx = x - y;
        xv * kernel(&h) / (dx * dx)
    };
    let out = adaptive_2d(f, &xbreaks, &ybreaks, tol, 40_000_000);
    if out.error_estimate > tol {
        return Err(Error::ToleranceNotMet {
            value: out.value,
            achieved: out.error_estimate,
            requested: tol,
            evaluations: out.evaluations,
        });
    }
    Ok(out)
}

/// One level of the dyadic approximation.
#[derive(Debug, Clone)]
pub struct DyadicLevel {
    pub n: u32,
    /// The Riemann–Stieltjes sum `I_n`.
    pub value: Complex64,
    /// `|I_n − I_{n−1}|`; zero at the first computed level.
    pub increment: f64,
    /// Largest `|arg|` of a sub-box image cross-ratio at this level.
    pub max_arg: f64,
}

/// Converged dyadic functional with its level history.
#[derive(Debug, Clone)]
pub struct DyadicResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: u64,
    pub levels: Vec<DyadicLevel>,
}

/// Refinement guard threshold on sub-box cross-ratio arguments.
const MAX_SUBBOX_ARG: f64 = std::f64::consts::FRAC_PI_2;

fn dyadic_level_sum(
    f: &PiecewiseMobiusMap,
    xi: &TestFunction,
    weight: &(impl Fn(&Geodesic, &Geodesic) -> Complex64 + Sync),
    b: &GeodesicBox,
    n: u32,
) -> Result<(Complex64, f64, u64)> {
    let (xs, ys) = dyadic_partition(b, n)?;
    let fx: Vec<BoundaryPoint> = xs.iter().map(|p| f.evaluate(p)).collect();
    let fy: Vec<BoundaryPoint> = ys.iter().map(|p| f.evaluate(p)).collect();
    let count = xs.len() - 1;
    let inv = 1.0 / count as f64;

    let rows: Vec<Result<(Complex64, f64, u64)>> = (1..=count)
        .into_par_iter()
        .map(|s| {
            let mut sum = re(0.0);
            let mut max_arg: f64 = 0.0;
            let mut evals = 0u64;
            for t in 1..=count {
                let xival = xi.evaluate_at_fractions(s as f64 * inv, t as f64 * inv, || {
                    Geodesic::new(xs[s], ys[t]).expect("grid points are distinct")
                });
                if xival.norm() == 0.0 {
                    continue;
                }
                let num = det2(&fx[s - 1], &fy[t - 1]) * det2(&fx[s], &fy[t]);
                let den = det2(&fx[s - 1], &fy[t]) * det2(&fx[s], &fy[t - 1]);
                let cr = num / den;
                let lncr = guarded_ln(cr)?;
                max_arg = max_arg.max(lncr.im.abs());
                let h_orig = Geodesic::new(xs[s], ys[t]).expect("grid points are distinct");
                let h_img = Geodesic::new(fx[s], fy[t]).expect("injective on the grid");
                let w = weight(&h_orig, &h_img);
                evals += 1;
                sum += xival * w * lncr;
            }
            Ok((sum, max_arg, evals))
        })
        .collect();

    let mut total = re(0.0);
    let mut max_arg: f64 = 0.0;
    let mut evals = 0u64;
    for row in rows {
        let (s, a, e) = row?;
        total += s;
        max_arg = max_arg.max(a);
        evals += e;
    }
    Ok((total, max_arg, evals))
}

/// Raw level sums `I_{n₀}, …, I_{n_max}` with increments, no stopping logic;
/// for convergence diagnostics.
pub fn dyadic_level_sums(
    f: &PiecewiseMobiusMap,
    xi: &TestFunction,
    weight: impl Fn(&Geodesic, &Geodesic) -> Complex64 + Sync,
    n0: u32,
    n_max: u32,
) -> Result<Vec<DyadicLevel>> {
    let b = *xi.support();
    let mut levels: Vec<DyadicLevel> = Vec::new();
    for n in n0..=n_max {
        let (value, max_arg, _) = dyadic_level_sum(f, xi, &weight, &b, n)?;
        let increment = levels.last().map_or(0.0, |l| (value - l.value).norm());
        levels.push(DyadicLevel { n, value, increment, max_arg });
    }
    Ok(levels)
}

/// The dyadic-subdivision functional `I_{n₀} + Σ (I_{n+1} − I_n)` for a
/// boundary map `f`, test function `ξ` and a bounded weight.
///
/// The weight closure receives the corner geodesic twice: in original
/// position and as its image under `f` (the image corners are already
/// computed for the sub-box masses). Pass `|_, _| 1.0` for the plain
/// pullback functional.
///
/// The returned value is the geometric-tail extrapolation of the level sums;
/// the raw levels and increments are in `levels`. Stops once successive
/// extrapolants agree below `tol` with decaying increments, errors with
/// `SlowConvergence` when increments refuse to decay and with `BranchGuard`
/// when a sub-box cross-ratio reaches the logarithm's branch cut.
pub fn functional_dyadic(
    f: &PiecewiseMobiusMap,
    xi: &TestFunction,
    weight: impl Fn(&Geodesic, &Geodesic) -> Complex64 + Sync,
    n0: u32,
    tol: f64,
) -> Result<DyadicResult> {
    functional_dyadic_capped(f, xi, weight, n0, tol, 12)
}

/// [`functional_dyadic`] with an explicit finest level.
pub fn functional_dyadic_capped(
    f: &PiecewiseMobiusMap,
    xi: &TestFunction,
    weight: impl Fn(&Geodesic, &Geodesic) -> Complex64 + Sync,
    n0: u32,
    tol: f64,
    max_level: u32,
) -> Result<DyadicResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("dyadic tolerance must be positive".into()));
    }
    let b = *xi.support();
    let mut levels: Vec<DyadicLevel> = Vec::new();
    let mut evals = 0u64;
    let mut extrapolants: Vec<Complex64> = Vec::new();
    let mut noise_hits = 0u32;

    for n in n0..=max_level {
        let (value, max_arg, e) = dyadic_level_sum(f, xi, &weight, &b, n)?;
        evals += e;
        let increment = levels.last().map_or(0.0, |l| (value - l.value).norm());
        levels.push(DyadicLevel { n, value, increment, max_arg });

        let k = levels.len();
        // geometric extrapolation from the last two increments
        if k >= 3 {
            let d_prev = levels[k - 2].value - levels[k - 3].value;
            let d_last = levels[k - 1].value - levels[k - 2].value;
            let extrap = if d_prev.norm() > 0.0 {
                let rho = d_last / d_prev;
                if rho.norm() < 0.9 {
                    value + d_last * rho / (1.0 - rho)
                } else {
                    value
                }
            } else {
                value
            };
            extrapolants.push(extrap);
        }

        let noise_floor = 1e-13 * (value.norm() + 1.0);
        if increment <= noise_floor && k >= 2 {
            noise_hits += 1;
            if noise_hits >= 2 && max_arg <= MAX_SUBBOX_ARG {
                return Ok(DyadicResult {
                    value,
                    error_estimate: noise_floor,
                    evaluations: evals,
                    levels,
                });
            }
        } else {
            noise_hits = 0;
        }

        if extrapolants.len() >= 2 && max_arg <= MAX_SUBBOX_ARG {
            let e_last = extrapolants[extrapolants.len() - 1];
            let e_prev = extrapolants[extrapolants.len() - 2];
            let stable = (e_last - e_prev).norm();
            let decaying = k >= 4
                && (1..3).all(|j| {
                    levels[k - j].increment > 0.0
                        && levels[k - j - 1].increment / levels[k - j].increment >= 1.5
                });
            if stable < tol && decaying {
                return Ok(DyadicResult {
                    value: e_last,
                    error_estimate: stable.max(1e-15 * e_last.norm()),
                    evaluations: evals,
                    levels,
                });
            }
        }

        // increments refusing to decrease over four consecutive levels
        if k >= 5 {
            let incs: Vec<f64> = levels[k - 4..].iter().map(|l| l.increment).collect();
            let noise = 1e-12 * (value.norm() + 1.0);
            if incs.windows(2).all(|w| w[1] >= w[0] * 0.999) && incs[3] > noise {
                return Err(Error::SlowConvergence { level: n, best_increment: incs[3] });
            }
        }
    }
    Err(Error::SlowConvergence {
        level: max_level,
        best_increment: levels.last().map_or(f64::NAN, |l| l.increment),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::earthquake::{elementary_earthquake, simple_earthquake};
    use crate::lamination::FiniteLamination;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn bp(x: f64) -> BoundaryPoint {
        BoundaryPoint::real(x)
    }

    fn inf() -> BoundaryPoint {
        BoundaryPoint::infinity()
    }

    fn gbox(a: f64, b: f64, c: f64, d: f64) -> GeodesicBox {
        GeodesicBox::from_points(bp(a), bp(b), bp(c), bp(d)).unwrap()
    }

    fn yaxis() -> Geodesic {
        Geodesic::new(bp(0.0), inf()).unwrap()
    }

    #[test]
    fn liouville_box_closed_forms() {
        let b = GeodesicBox::from_points(bp(-1.0), bp(0.0), bp(1.0), inf()).unwrap();
        assert_relative_eq!(liouville_box(&b).unwrap(), 2.0f64.ln(), max_relative = 1e-14);
        let b = gbox(0.0, 1.0, 2.0, 3.0);
        assert_relative_eq!(liouville_box(&b).unwrap(), (4.0f64 / 3.0).ln(), max_relative = 1e-14);
    }

    #[test]
    fn liouville_box_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = rng.gen_range(-5.0..-3.0);
            let b = rng.gen_range(-2.9..-1.0);
            let c = rng.gen_range(0.0..2.0);
            let d = rng.gen_range(2.1..5.0);
            let b1 = gbox(a, b, c, d);
            let b2 = gbox(c, d, a, b);
            assert_relative_eq!(
                liouville_box(&b1).unwrap(),
                liouville_box(&b2).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn box_validation() {
        assert!(GeodesicBox::from_points(bp(0.0), bp(1.0), bp(0.5), bp(2.0)).is_err());
        assert!(GeodesicBox::from_points(bp(0.0), bp(0.0), bp(1.0), bp(2.0)).is_err());
        // arc through infinity is fine when disjoint
        assert!(GeodesicBox::from_points(bp(1.0), inf(), bp(-2.0), bp(-1.0)).is_ok());
    }

    #[test]
    fn pullback_box_identity_and_isometry() {
        let b = gbox(1.0, 2.0, -2.0, -1.0);
        let id = PiecewiseMobiusMap::identity();
        assert_relative_eq!(
            pullback_box(&id, &b).unwrap().re,
            liouville_box(&b).unwrap(),
            max_relative = 1e-13
        );
        let gamma = MobiusMap::from_reals(1.0, 3.0, 0.5, 2.0).unwrap();
        let mg = PiecewiseMobiusMap::from_mobius(gamma);
        assert_relative_eq!(
            pullback_box(&mg, &b).unwrap().re,
            liouville_box(&b).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn pullback_box_simple_earthquake_corner_images() {
        // corners (1,2) scale by 2; (−2,−1) fixed: log cr(2,4,−2,−1) = log(10/9)
        let e = simple_earthquake(&yaxis(), re(2.0f64.ln()));
        let b = gbox(1.0, 2.0, -2.0, -1.0);
        let got = pullback_box(&e, &b).unwrap();
        assert!(got.im.abs() < 1e-15);
        assert_relative_eq!(got.re, (10.0f64 / 9.0).ln(), max_relative = 1e-13);
    }

    #[test]
    fn dyadic_partition_examples() {
        let b = GeodesicBox::from_points(bp(-1.0), bp(0.0), bp(1.0), inf()).unwrap();
        let (xs, ys) = dyadic_partition(&b, 0).unwrap();
        assert_eq!(xs.len(), 2);
        assert!(xs[0].approx_eq(&bp(-1.0)) && xs[1].approx_eq(&bp(0.0)));
        assert!(ys[0].approx_eq(&bp(1.0)) && ys[1].is_infinity());

        // n = 1 cut solves cr(−1, a₁, 1, ∞) = √2, i.e. a₁ = 1 − √2
        let (xs, _) = dyadic_partition(&b, 1).unwrap();
        let a1 = xs[1].as_real().unwrap();
        assert_relative_eq!(a1, 1.0 - 2.0f64.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn dyadic_partition_strip_masses_are_equal() {
        let b = gbox(1.0, 3.0, -2.0, -1.0);
        let total = liouville_box(&b).unwrap();
        for n in [1u32, 3, 5] {
            let (xs, ys) = dyadic_partition(&b, n).unwrap();
            let count = 1usize << n;
            for s in 1..=count {
                let strip = GeodesicBox::from_points(xs[s - 1], xs[s], ys[0], ys[count]).unwrap();
                assert_relative_eq!(
                    liouville_box(&strip).unwrap(),
                    total / count as f64,
                    max_relative = 1e-10
                );
            }
        }
    }

    #[test]
    fn dyadic_subbox_masses_order_4_to_minus_n() {
        for b in [gbox(1.0, 3.0, -2.0, -1.0), GeodesicBox::from_points(bp(-1.0), bp(0.0), bp(1.0), inf()).unwrap()] {
            let total = liouville_box(&b).unwrap();
            for n in 1..=8u32 {
                let (xs, ys) = dyadic_partition(&b, n).unwrap();
                let count = 1usize << n;
                let reference = total / (count * count) as f64;
                let mut lo = f64::INFINITY;
                let mut hi: f64 = 0.0;
                let mut sum = 0.0;
                for s in 1..=count {
                    for t in 1..=count {
                        let sub =
                            GeodesicBox::from_points(xs[s - 1], xs[s], ys[t - 1], ys[t]).unwrap();
                        let m = liouville_box(&sub).unwrap();
                        lo = lo.min(m);
                        hi = hi.max(m);
                        sum += m;
                    }
                }
                assert!(hi <= 4.0 * reference, "n={n}: max {hi} vs 4·{reference}");
                assert!(lo >= reference / 4.0, "n={n}: min {lo} vs {reference}/4");
                // additivity
                assert_relative_eq!(sum, total, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn tent_basics() {
        let xi = TestFunction::tent(gbox(1.0, 2.0, -2.0, -1.0)).unwrap();
        // center value 1 at the mass midpoint
        let (xs, ys) = dyadic_partition(xi.support(), 1).unwrap();
        let center = Geodesic::new(xs[1], ys[1]).unwrap();
        assert_relative_eq!(xi.evaluate(&center).re, 1.0, max_relative = 1e-12);
        // outside the support
        let out = Geodesic::from_reals(5.0, 6.0).unwrap();
        assert_eq!(xi.evaluate(&out).norm(), 0.0);
        // vanishes on the boundary
        let edge = Geodesic::from_reals(1.0, -1.5).unwrap();
        assert_eq!(xi.evaluate(&edge).norm(), 0.0);
    }

    #[test]
    fn bump_holder_audit() {
        let lambda = 0.5;
        let xi = TestFunction::bump(gbox(1.0, 2.0, -2.0, -1.0), lambda).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let h1 = Geodesic::from_reals(rng.gen_range(0.9..2.1), rng.gen_range(-2.1..-0.9))
                .unwrap();
            let h2 = Geodesic::from_reals(rng.gen_range(0.9..2.1), rng.gen_range(-2.1..-0.9))
                .unwrap();
            let d = geodesic_angle_distance(&h1, &h2);
            if d < 1e-12 {
                continue;
            }
            let ratio = (xi.evaluate(&h1) - xi.evaluate(&h2)).norm() / d.powf(lambda);
            worst = worst.max(ratio);
        }
        assert!(
            worst <= xi.holder_seminorm(),
            "empirical {worst} exceeds declared {}",
            xi.holder_seminorm()
        );
    }

    #[test]
    fn quad_zero_kernel() {
        let xi = TestFunction::tent(gbox(1.0, 2.0, -2.0, -1.0)).unwrap();
        let out = quad_weighted(&xi, |_| re(0.0), 1e-10).unwrap();
        assert_eq!(out.value.norm(), 0.0);
    }

    #[test]
    fn quad_density_weighted_closed_form() {
        // ξ(h(x,y)) = s(x)·t(y)·(x−y)² has ∫ ξ dL = (∫s)(∫t) = 1/4 exactly
        // for unit triangle hats on [1,2] and [−2,−1].
        let support = gbox(1.0, 2.0, -2.0, -1.0);
        let tri = |x: f64, lo: f64, hi: f64| {
            let m = 0.5 * (lo + hi);
            let h = 0.5 * (hi - lo);
            (1.0 - ((x - m) / h).abs()).max(0.0)
        };
        let xi = TestFunction::custom(
            support,
            1.0,
            100.0,
            move |h: &Geodesic| {
                let (x, y) = match (h.p_minus().as_real(), h.p_plus().as_real()) {
                    (Some(x), Some(y)) => (x, y),
                    _ => return re(0.0),
                };
                re(tri(x, 1.0, 2.0) * tri(y, -2.0, -1.0) * (x - y) * (x - y))
            },
            vec![bp(1.5)],
            vec![bp(-1.5)],
        )
        .unwrap();
        let out = quad_weighted(&xi, |_| re(1.0), 1e-10).unwrap();
        assert_relative_eq!(out.value.re, 0.25, max_relative = 1e-9);
        assert!(out.error_estimate <= 1e-10);
    }

    #[test]
    fn quad_handles_box_through_infinity() {
        // mass of the whole box: kernel 1 against a density-weighted
        // indicator-style ξ is hard through ∞; instead compare the tent
        // functional computed on a box through ∞ against the same
        // configuration transported to finite position by z ↦ −1/z.
        let b1 = GeodesicBox::from_points(bp(1.0), inf(), bp(-2.0), bp(-1.0)).unwrap();
        let xi1 = TestFunction::tent(b1).unwrap();
        let out1 = quad_weighted(&xi1, |_| re(1.0), 1e-10).unwrap();

        // z ↦ −1/z images: [1,∞] → [−1,0], [−2,−1] → [1/2,1]
        let b2 = gbox(-1.0, 0.0, 0.5, 1.0);
        let xi2 = TestFunction::tent(b2).unwrap();
        let out2 = quad_weighted(&xi2, |_| re(1.0), 1e-10).unwrap();
        assert_relative_eq!(out1.value.re, out2.value.re, max_relative = 1e-9);
    }

    #[test]
    fn dyadic_identity_matches_quadrature() {
        let xi = TestFunction::tent(gbox(1.0, 2.0, -2.0, -1.0)).unwrap();
        let id = PiecewiseMobiusMap::identity();
        let dy = functional_dyadic(&id, &xi, |_, _| re(1.0), 2, 1e-8).unwrap();
        let q = quad_weighted(&xi, |_| re(1.0), 1e-11).unwrap();
        assert!(
            (dy.value - q.value).norm() < 1e-6,
            "dyadic {} vs quad {}",
            dy.value,
            q.value
        );
    }

    #[test]
    fn dyadic_mobius_invariance() {
        let xi = TestFunction::tent(gbox(1.0, 3.0, -2.0, -1.0)).unwrap();
        let id = PiecewiseMobiusMap::identity();
        let base = functional_dyadic(&id, &xi, |_, _| re(1.0), 2, 1e-9).unwrap();
        let gamma = MobiusMap::from_reals(1.1, 0.3, 0.2, 1.0).unwrap();
        let mg = PiecewiseMobiusMap::from_mobius(gamma);
        let moved = functional_dyadic(&mg, &xi, |_, _| re(1.0), 2, 1e-9).unwrap();
        assert!((base.value - moved.value).norm() < 1e-8);
    }

    #[test]
    fn dyadic_pullback_invariant_under_post_isometry() {
        // post-composing the boundary map with an isometry leaves the
        // pullback functional unchanged
        let mu = FiniteLamination::new(vec![(Geodesic::from_reals(1.2, 1.7).unwrap(), 0.8)])
            .unwrap();
        let e = elementary_earthquake(&mu, re(0.4));
        let xi = TestFunction::tent(gbox(1.0, 2.0, -2.0, -1.0)).unwrap();
        let base = functional_dyadic(&e, &xi, |_, _| re(1.0), 2, 1e-8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..5 {
            let (a, b, c, d) = (
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
            );
            if a * d - b * c < 0.05 {
                continue;
            }
            let gamma = MobiusMap::from_reals(a, b, c, d).unwrap();
            let composed = e.post_compose(&gamma);
            let moved = functional_dyadic(&composed, &xi, |_, _| re(1.0), 2, 1e-8).unwrap();
            assert!(
                (base.value - moved.value).norm() < 1e-8,
                "post-isometry changed the functional by {}",
                (base.value - moved.value).norm()
            );
        }
    }

    #[test]
    fn dyadic_quakebend_has_imaginary_part_and_decaying_increments() {
        let mu = FiniteLamination::new(vec![(yaxis(), 1.0)]).unwrap();
        let tau = Complex64::new(0.0, 0.1);
        let e = elementary_earthquake(&mu, tau);
        let xi = TestFunction::tent(gbox(1.0, 3.0, -2.0, -1.0)).unwrap();
        let out = functional_dyadic(&e, &xi, |_, _| re(1.0), 2, 1e-8).unwrap();
        assert!(out.value.im.abs() > 1e-6, "value {}", out.value);
        let incs: Vec<f64> =
            out.levels.iter().skip(1).map(|l| l.increment).collect();
        let floor = 1e-12 * out.value.norm();
        for w in incs.windows(2).skip(1) {
            assert!(w[1] < w[0] || w[0] < floor, "increments not decreasing: {incs:?}");
        }
    }

    #[test]
    fn dyadic_positivity() {
        let xi = TestFunction::tent(gbox(1.0, 3.0, -2.0, -1.0)).unwrap();
        let mu = FiniteLamination::new(vec![(yaxis(), 0.5)]).unwrap();
        let e = elementary_earthquake(&mu, re(0.3));
        let out = functional_dyadic(&e, &xi, |_, _| re(1.0), 2, 1e-8).unwrap();
        assert!(out.value.re > 0.0);
        assert!(out.value.im.abs() < 1e-12);
    }

    #[test]
    fn normalization_preserves_the_functional() {
        use crate::earthquake::normalize_012inf;
        let mu = FiniteLamination::new(vec![
            (Geodesic::from_reals(1.0, 2.0).unwrap(), 0.5),
            (Geodesic::from_reals(-4.0, -3.0).unwrap(), 0.8),
        ])
        .unwrap();
        let e = elementary_earthquake(&mu, re(0.7));
        let n = normalize_012inf(&e).unwrap();
        let xi = TestFunction::tent(gbox(1.2, 1.8, -2.0, -1.0)).unwrap();
        let before = functional_dyadic(&e, &xi, |_, _| re(1.0), 2, 1e-8).unwrap();
        let after = functional_dyadic(&n, &xi, |_, _| re(1.0), 2, 1e-8).unwrap();
        assert!(
            (before.value - after.value).norm() < 1e-8,
            "normalization moved the functional by {}",
            (before.value - after.value).norm()
        );
    }

    #[test]
    fn mass_fraction_roundtrip() {
        let b = gbox(1.0, 3.0, -2.0, -1.0);
        let (a, _, c, d) = b.corners();
        for frac in [0.1, 0.25, 0.5, 0.9] {
            let k = (frac * liouville_box(&b).unwrap()).exp();
            let p = cut_first(a, c, d, k);
            assert_relative_eq!(
                first_arc_mass_fraction(&b, &p).unwrap(),
                frac,
                max_relative = 1e-12
            );
        }
    }
}

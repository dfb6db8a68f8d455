//! Finitely supported measured laminations: validation, orientation
//! normalization, Thurston-norm estimation, disk truncation and group-orbit
//! generators.
//!
//! Every stored leaf is oriented so that the base stratum — the complementary
//! stratum containing the reference point `i` — lies on its left. Leaves
//! passing through `i` keep their given orientation. That normalization is
//! what fixes the sign conventions consumed by the earthquake construction
//! and the sin·sin cross terms downstream.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::hyp::{
    self, geodesic_intersection, geodesics_cross, mobius_to_standard, point_distance,
    point_to_geodesic_distance, Geodesic, MobiusMap, PointH, Side, REFERENCE_POINT,
};
use crate::{Error, Result};

/// One weighted leaf of a finite lamination.
#[derive(Debug, Clone, Copy)]
pub struct Leaf {
    pub geodesic: Geodesic,
    pub weight: f64,
}

/// A violation found while validating a prospective lamination.
#[derive(Debug, Clone, PartialEq)]
pub enum LaminationIssue {
    CrossingLeaves(usize, usize),
    SharedEndpoint(usize, usize),
    NonpositiveWeight(usize),
}

impl std::fmt::Display for LaminationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::CrossingLeaves(i, j) => write!(f, "leaves {i} and {j} cross"),
            Self::SharedEndpoint(i, j) => write!(f, "leaves {i} and {j} share an endpoint"),
            Self::NonpositiveWeight(i) => write!(f, "leaf {i} has non-positive weight"),
        }
    }
}

/// Finitely many pairwise-disjoint weighted geodesics.
#[derive(Debug, Clone)]
pub struct FiniteLamination {
    leaves: Vec<Leaf>,
}

/// Check all lamination invariants, reporting every violating pair.
pub fn validate(leaves: &[(Geodesic, f64)]) -> Vec<LaminationIssue> {
    let mut issues = Vec::new();
    for (i, (_, w)) in leaves.iter().enumerate() {
        if !(*w > 0.0) {
            issues.push(LaminationIssue::NonpositiveWeight(i));
        }
    }
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            match geodesics_cross(&leaves[i].0, &leaves[j].0) {
                Err(_) => issues.push(LaminationIssue::SharedEndpoint(i, j)),
                Ok(true) => issues.push(LaminationIssue::CrossingLeaves(i, j)),
                Ok(false) => {}
            }
        }
    }
    issues
}

/// Orient a leaf so the reference point is on its left; a leaf through the
/// reference point keeps its orientation.
fn orient_base_on_left(g: Geodesic) -> Geodesic {
    match hyp::side_of_interior(&g, REFERENCE_POINT.to_complex()) {
        Side::Right => g.reverse(),
        _ => g,
    }
}

impl FiniteLamination {
    /// Validate and normalize leaf orientations.
    pub fn new(leaves: Vec<(Geodesic, f64)>) -> Result<Self> {
        let issues = validate(&leaves);
        if !issues.is_empty() {
            return Err(Error::InvalidLamination { issues });
        }
        Ok(Self {
            leaves: leaves
                .into_iter()
                .map(|(g, w)| Leaf { geodesic: orient_base_on_left(g), weight: w })
                .collect(),
        })
    }

    pub fn empty() -> Self {
        Self { leaves: Vec::new() }
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.leaves.iter().map(|l| l.weight).sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.leaves.iter().map(|l| l.weight).fold(0.0, f64::max)
    }

    /// Scale every weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter("scale must be positive".into()));
        }
        Ok(Self {
            leaves: self
                .leaves
                .iter()
                .map(|l| Leaf { geodesic: l.geodesic, weight: l.weight * c })
                .collect(),
        })
    }

    /// Keep the leaves within hyperbolic distance `rho` of the reference
    /// point. A leaf exactly at threshold is kept (the radius is nudged by
    /// `1e-9` so boundary leaves do not flicker).
    pub fn restrict_to_disk(&self, rho: f64) -> Self {
        Self {
            leaves: self
                .leaves
                .iter()
                .filter(|l| {
                    point_to_geodesic_distance(&REFERENCE_POINT, &l.geodesic) <= rho + 1e-9
                })
                .cloned()
                .collect(),
        }
    }

    /// Leaf-wise image under a real Möbius map; weights preserved,
    /// orientations re-normalized.
    pub fn pushforward(&self, gamma: &MobiusMap) -> Result<Self> {
        Self::new(
            self.leaves
                .iter()
                .map(|l| (gamma.apply_geodesic(&l.geodesic), l.weight))
                .collect(),
        )
    }
}

/// Leaves `γᵏ(seed)` for `|k| ≤ n` with equal weights; errors with
/// `CrossingLeaves` when the orbit self-crosses.
pub fn orbit_lamination(
    gamma: &MobiusMap,
    seed: &Geodesic,
    weight: f64,
    n: u32,
) -> Result<FiniteLamination> {
    if !gamma.is_real() {
        return Err(Error::InvalidParameter("orbit generator must be real".into()));
    }
    let [a, _, _, d] = gamma.entries();
    if (a + d).re.abs() <= 2.0 {
        return Err(Error::InvalidParameter(format!(
            "orbit generator must be hyperbolic (|trace| > 2, got {})",
            (a + d).re.abs()
        )));
    }
    let mut leaves = vec![(*seed, weight)];
    let mut fwd = *seed;
    let mut bwd = *seed;
    let inv = gamma.inverse();
    for _ in 0..n {
        fwd = gamma.apply_geodesic(&fwd);
        bwd = inv.apply_geodesic(&bwd);
        leaves.push((fwd, weight));
        leaves.push((bwd, weight));
    }
    FiniteLamination::new(leaves)
}

/// A unit-length geodesic arc, kept as its carrier geodesic and midpoint.
#[derive(Debug, Clone, Copy)]
pub struct UnitArc {
    pub carrier: Geodesic,
    pub center: PointH,
}

impl UnitArc {
    /// Total lamination weight crossing the arc.
    fn crossing_weight(&self, mu: &FiniteLamination) -> f64 {
        let mut total = 0.0;
        for leaf in mu.leaves() {
            let crossing = match geodesics_cross(&self.carrier, &leaf.geodesic) {
                Ok(c) => c,
                Err(_) => continue, // carrier grazes a leaf endpoint: skip
            };
            if !crossing {
                continue;
            }
            if let Ok(x) = geodesic_intersection(&self.carrier, &leaf.geodesic) {
                if point_distance(&x, &self.center) <= 0.5 {
                    total += leaf.weight;
                }
            }
        }
        total
    }
}

/// Result of the sampled Thurston-norm estimation: a lower bound together
/// with provenance of the best arc found.
#[derive(Debug, Clone)]
pub struct ThurstonEstimate {
    pub lower_bound: f64,
    pub arcs_tested: usize,
    pub best_arc: Option<UnitArc>,
}

/// Geodesic through the interior point `z` with tangent direction `alpha`
/// (Euclidean angle from the positive x-axis), oriented along the direction.
fn geodesic_through(z: PointH, alpha: f64) -> Result<Geodesic> {
    let s = alpha.sin();
    if s.abs() < 1e-9 {
        // horizontal direction: the geodesic is the vertical line through z
        return Geodesic::from_parts(Some(z.x), None);
    }
    let beta = alpha + std::f64::consts::FRAC_PI_2; // angle of the radius vector
    let center = z.x - z.y * beta.cos() / beta.sin();
    let r = z.y / beta.sin().abs();
    if alpha.sin() > 0.0 {
        // pointing up along the circle: oriented toward the left endpoint
        Geodesic::from_reals(center + r, center - r)
    } else {
        Geodesic::from_reals(center - r, center + r)
    }
}

/// Sampled lower bound on the Thurston norm `sup_I μ(I)` over unit-length
/// transverse arcs. Deterministic for a fixed seed, and monotone
/// non-decreasing in `samples` (the candidate set only grows).
pub fn thurston_norm_estimate(
    mu: &FiniteLamination,
    samples: usize,
    seed: u64,
) -> ThurstonEstimate {
    let mut best = 0.0;
    let mut best_arc = None;
    let mut tested = 0;
    let consider = |arc: UnitArc, best: &mut f64, best_arc: &mut Option<UnitArc>| {
        let w = arc.crossing_weight(mu);
        if w > *best {
            *best = w;
            *best_arc = Some(arc);
        }
    };

    // Deterministic ladder: perpendicular unit arcs at offsets along each
    // leaf from the foot of the reference point.
    let offsets: [f64; 11] = [0.0, 0.3, -0.3, 0.6, -0.6, 1.0, -1.0, 1.6, -1.6, 2.4, -2.4];
    for leaf in mu.leaves() {
        let m = mobius_to_standard(&leaf.geodesic);
        let minv = m.inverse();
        let w = m.apply_complex(REFERENCE_POINT.to_complex());
        let t0 = w.norm();
        for &s in &offsets {
            let t = t0 * s.exp();
            // perpendicular to the standard axis at i·t is the semicircle (−t, t)
            let carrier = minv.apply_geodesic(&Geodesic::from_reals(-t, t).expect("t > 0"));
            let center_z = minv.apply_complex(Complex64::new(0.0, t));
            if let Ok(center) = PointH::new(center_z.re, center_z.im) {
                tested += 1;
                consider(UnitArc { carrier, center }, &mut best, &mut best_arc);
            }
        }
    }

    // Seeded random arcs near the leaves, with tilts away from perpendicular.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        if mu.is_empty() {
            break;
        }
        let leaf = &mu.leaves()[rng.gen_range(0..mu.len())];
        let m = mobius_to_standard(&leaf.geodesic);
        let minv = m.inverse();
        let t0 = m.apply_complex(REFERENCE_POINT.to_complex()).norm();
        let t = t0 * rng.gen_range(-3.0..3.0f64).exp();
        let off = rng.gen_range(-0.4..0.4);
        let z = Complex64::new(off * t, t * (1.0 + off * off).sqrt().recip());
        let zmap = minv.apply_complex(z);
        let center = match PointH::new(zmap.re, zmap.im) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let tilt = rng.gen_range(-1.2..1.2);
        // direction in the mapped picture: perpendicular-ish with a tilt
        let alpha = {
            let base = minv.derivative_at(z).arg();
            base + tilt
        };
        if let Ok(carrier) = geodesic_through(center, alpha) {
            tested += 1;
            consider(UnitArc { carrier, center }, &mut best, &mut best_arc);
        }
    }

    ThurstonEstimate { lower_bound: best, arcs_tested: tested, best_arc }
}

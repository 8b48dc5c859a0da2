//! Per-triangle geometry: metrics, Clough-Tocher split points, split-quality
//! bounds, and the scaled reference-triangle map.
//!
//! Labeling convention used throughout: edge `e_i` is opposite vertex `z_i`,
//! and edge lengths are sorted `h1 <= h2 <= h3`. The aspect ratio is
//! `h3 / rho` where `rho` is the incircle *diameter*, equivalently
//! `|dT| * h3 / (4 |T|)`.

use crate::error::{Error, Result};
use crate::geometry::{signed_area_x2, Point2};

/// Relative tolerance (against the squared longest edge) below which a
/// triangle is treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// Relative slack used when checking the lemma inequalities; the bounds are
/// exact in real arithmetic and the slack absorbs roundoff only.
pub const LEMMA_SLACK: f64 = 1e-9;

/// Where to place the Clough-Tocher split point of a triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitStrategy {
    Barycenter,
    Incenter,
}

impl SplitStrategy {
    pub const ALL: [SplitStrategy; 2] = [SplitStrategy::Barycenter, SplitStrategy::Incenter];

    pub fn name(self) -> &'static str {
        match self {
            SplitStrategy::Barycenter => "barycenter",
            SplitStrategy::Incenter => "incenter",
        }
    }
}

impl std::str::FromStr for SplitStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "barycenter" | "bary" => Ok(SplitStrategy::Barycenter),
            "incenter" | "inc" => Ok(SplitStrategy::Incenter),
            other => Err(Error::InvalidParameter(format!(
                "unknown split strategy '{other}' (expected barycenter or incenter)"
            ))),
        }
    }
}

/// Scale-aware metrics of a single triangle.
#[derive(Clone, Copy, Debug)]
pub struct TriangleMetrics {
    /// Edge lengths sorted ascending: `h[0] <= h[1] <= h[2]`.
    pub h: [f64; 3],
    /// Angles sorted ascending; `alpha[i]` is opposite edge `h[i]`.
    pub alpha: [f64; 3],
    pub area: f64,
    pub perimeter: f64,
    /// Incircle diameter `rho = 4 |T| / |dT|`.
    pub rho_in: f64,
    /// Aspect ratio `h3 / rho = |dT| h3 / (4 |T|)`.
    pub aspect: f64,
    /// Altitude with respect to the longest edge: `a_T = 2 |T| / h3`.
    pub altitude: f64,
    /// `vertex_order[i]` is the input index of the vertex opposite the sorted
    /// edge `h[i]`. Ties are broken by input index, so the permutation is
    /// deterministic for isosceles and equilateral triangles.
    pub vertex_order: [usize; 3],
}

fn opposite_edge_lengths(p: &[Point2; 3]) -> [f64; 3] {
    [
        p[1].dist(p[2]),
        p[2].dist(p[0]),
        p[0].dist(p[1]),
    ]
}

fn degeneracy_tolerance(p: &[Point2; 3]) -> f64 {
    let l = opposite_edge_lengths(p);
    let hmax = l[0].max(l[1]).max(l[2]);
    DEGENERACY_TOL * hmax * hmax
}

fn unsigned_area_checked(p: &[Point2; 3]) -> Result<f64> {
    if !(p[0].is_finite() && p[1].is_finite() && p[2].is_finite()) {
        return Err(Error::InvalidParameter(
            "triangle has a non-finite vertex".into(),
        ));
    }
    let area = 0.5 * signed_area_x2(p[0], p[1], p[2]).abs();
    let tol = degeneracy_tolerance(p);
    if !(area > tol) {
        return Err(Error::DegenerateTriangle { area, tol });
    }
    Ok(area)
}

/// Interior angle at vertex `i`, computed from the two-argument arctangent of
/// the cross and dot products of the incident edge vectors. Stays accurate
/// for needle triangles where `acos` of normalized dots loses digits.
fn angle_at(p: &[Point2; 3], i: usize) -> f64 {
    let u = p[(i + 1) % 3] - p[i];
    let w = p[(i + 2) % 3] - p[i];
    u.cross(w).abs().atan2(u.dot(w))
}

/// Computes [`TriangleMetrics`] for the triangle `(p[0], p[1], p[2])`.
/// Either orientation is accepted; degenerate input is rejected.
pub fn analyze_triangle(p: &[Point2; 3]) -> Result<TriangleMetrics> {
    let area = unsigned_area_checked(p)?;
    let l = opposite_edge_lengths(p);

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| l[a].partial_cmp(&l[b]).unwrap().then(a.cmp(&b)));
    let h = [l[order[0]], l[order[1]], l[order[2]]];
    let alpha = [
        angle_at(p, order[0]),
        angle_at(p, order[1]),
        angle_at(p, order[2]),
    ];

    let perimeter = l[0] + l[1] + l[2];
    let rho_in = 4.0 * area / perimeter;
    let aspect = perimeter * h[2] / (4.0 * area);
    let altitude = 2.0 * area / h[2];

    Ok(TriangleMetrics {
        h,
        alpha,
        area,
        perimeter,
        rho_in,
        aspect,
        altitude,
        vertex_order: order,
    })
}

/// Clough-Tocher split point: the barycenter `(z1+z2+z3)/3` or the incenter
/// `(h1 z1 + h2 z2 + h3 z3)/|dT|` with `h_i` the length of the edge opposite
/// `z_i`. Both are strictly interior.
pub fn split_point(p: &[Point2; 3], strategy: SplitStrategy) -> Result<Point2> {
    unsigned_area_checked(p)?;
    Ok(match strategy {
        SplitStrategy::Barycenter => (p[0] + p[1] + p[2]) / 3.0,
        SplitStrategy::Incenter => {
            let l = opposite_edge_lengths(p);
            (p[0] * l[0] + p[1] * l[1] + p[2] * l[2]) / (l[0] + l[1] + l[2])
        }
    })
}

/// The three children of the split, in sorted-edge labeling: `children[i]`
/// shares edge `e_i` (the i-th shortest) with the parent. Each child keeps
/// the parent's orientation.
pub fn sorted_children(p: &[Point2; 3], z0: Point2) -> Result<[[Point2; 3]; 3]> {
    let m = analyze_triangle(p)?;
    let child = |i: usize| {
        let o = m.vertex_order[i];
        [p[(o + 1) % 3], p[(o + 2) % 3], z0]
    };
    Ok([child(0), child(1), child(2)])
}

/// Quality data of a Clough-Tocher split.
#[derive(Clone, Copy, Debug)]
pub struct SplitMetrics {
    pub z0: Point2,
    /// `k[i]`: altitude of child `K_i` with respect to the shared edge `e_i`.
    pub k: [f64; 3],
    /// Aspect ratio of each child, sorted-edge labeling.
    pub child_aspect: [f64; 3],
    /// Largest interior angle over the three children.
    pub max_child_angle: f64,
}

impl SplitMetrics {
    /// Aspect ratio of the local refinement: the maximum over the children.
    pub fn ct_aspect(&self) -> f64 {
        self.child_aspect[0]
            .max(self.child_aspect[1])
            .max(self.child_aspect[2])
    }
}

pub fn split_metrics(p: &[Point2; 3], strategy: SplitStrategy) -> Result<SplitMetrics> {
    let m = analyze_triangle(p)?;
    let z0 = split_point(p, strategy)?;
    let children = sorted_children(p, z0)?;

    let mut k = [0.0; 3];
    let mut child_aspect = [0.0; 3];
    let mut max_child_angle: f64 = 0.0;
    for i in 0..3 {
        let cm = analyze_triangle(&children[i])?;
        k[i] = 2.0 * cm.area / m.h[i];
        child_aspect[i] = cm.aspect;
        max_child_angle = max_child_angle.max(cm.alpha[2]);
    }
    Ok(SplitMetrics {
        z0,
        k,
        child_aspect,
        max_child_angle,
    })
}

/// Large angle condition `LAC(delta)`: every angle is below `pi - delta`.
pub fn check_lac(p: &[Point2; 3], delta: f64) -> Result<bool> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "LAC margin must be positive, got {delta}"
        )));
    }
    let m = analyze_triangle(p)?;
    Ok(m.alpha[2] < std::f64::consts::PI - delta)
}

/// Affine map `x = A x~ + b` from the scaled reference triangle
/// `z~3 = (0,0)`, `z~2 = (h1,0)`, `z~1 = (0,h2)` onto the triangle, with
/// unit columns `t1 = (z2-z3)/h1` and `t2 = (z1-z3)/h2`.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceMap {
    /// Column-major 2x2 matrix: `a[0]` is `t1`, `a[1]` is `t2`.
    pub a: [Point2; 2],
    /// Translation, equal to `z3`.
    pub b: Point2,
    /// Reference edge lengths `(h1, h2, sqrt(h1^2 + h2^2))`.
    pub tilde_h: [f64; 3],
    /// Image `(k~2, k~1)` of the split point under the inverse map; its
    /// coordinates are the altitudes of the reference children `K~2`, `K~1`
    /// with respect to the reference edges `e~2`, `e~1`.
    pub tilde_k: [f64; 2],
    /// Reference aspect ratio `h2 / h1`.
    pub tilde_aspect: f64,
    /// Spectral norm of `A`; always at most `sqrt(2)`.
    pub a_norm_spectral: f64,
    /// Frobenius norm of `A`; always exactly `sqrt(2)` for unit columns.
    pub a_norm_frobenius: f64,
    /// Spectral norm of `A^{-1}`; bounded by `2 / sin(delta)` under `LAC(delta)`.
    pub a_inv_norm_spectral: f64,
}

impl ReferenceMap {
    /// Applies the forward map `A x~ + b`.
    pub fn apply(&self, x: Point2) -> Point2 {
        self.a[0] * x.x + self.a[1] * x.y + self.b
    }

    /// Applies the inverse map `A^{-1} (x - b)`.
    pub fn apply_inverse(&self, x: Point2) -> Point2 {
        let det = self.a[0].cross(self.a[1]);
        let d = x - self.b;
        Point2::new(
            (self.a[1].y * d.x - self.a[1].x * d.y) / det,
            (-self.a[0].y * d.x + self.a[0].x * d.y) / det,
        )
    }
}

pub fn reference_map(p: &[Point2; 3], strategy: SplitStrategy) -> Result<ReferenceMap> {
    let m = analyze_triangle(p)?;
    let z1 = p[m.vertex_order[0]];
    let z2 = p[m.vertex_order[1]];
    let z3 = p[m.vertex_order[2]];
    let t1 = (z2 - z3) / m.h[0];
    let t2 = (z1 - z3) / m.h[1];

    // Singular values of a 2x2 with unit columns: 1 +- |t1 . t2|.
    let c = t1.dot(t2).abs().min(1.0);
    let a_norm_spectral = (1.0 + c).sqrt();
    let sigma_min_sq = 1.0 - c;
    if sigma_min_sq <= 0.0 {
        return Err(Error::DegenerateTriangle {
            area: m.area,
            tol: degeneracy_tolerance(p),
        });
    }

    let map = ReferenceMap {
        a: [t1, t2],
        b: z3,
        tilde_h: [m.h[0], m.h[1], m.h[0].hypot(m.h[1])],
        tilde_k: [0.0, 0.0],
        tilde_aspect: m.h[1] / m.h[0],
        a_norm_spectral,
        a_norm_frobenius: std::f64::consts::SQRT_2,
        a_inv_norm_spectral: 1.0 / sigma_min_sq.sqrt(),
    };
    let z0 = split_point(p, strategy)?;
    let img = map.apply_inverse(z0);
    Ok(ReferenceMap {
        tilde_k: [img.x, img.y],
        ..map
    })
}

/// Squared H1 seminorm of the hat function attached to the split point,
/// evaluated on the physical triangle: since the hat has constant gradient
/// `-n_i / k_i` on child `K_i` and `|K_i| = h_i k_i / 2`, it equals
/// `(1/2) sum_i h_i / k_i`.
pub fn hat_seminorm_sq(p: &[Point2; 3], strategy: SplitStrategy) -> Result<f64> {
    let m = analyze_triangle(p)?;
    let s = split_metrics(p, strategy)?;
    Ok(0.5 * (m.h[0] / s.k[0] + m.h[1] / s.k[1] + m.h[2] / s.k[2]))
}

/// One checked inequality `lhs <= rhs`, with [`LEMMA_SLACK`] relative slack.
#[derive(Clone, Copy, Debug)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Inequality {
    fn check(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            pass: lhs <= rhs * (1.0 + LEMMA_SLACK),
        }
    }
}

/// Evaluation of the split-quality bounds on one triangle:
/// `2 rho_T <= rho_inc <= 2 (1 + a_T/h_T) rho_T`,
/// `3 rho_T / (1 + a_T/h_T) <= rho_bary <= 3 rho_T`,
/// the sine bounds `sin(gamma) <= 3 a_T / h_T` for the two base angles of the
/// barycenter child sharing the longest edge, and the resulting gap bound
/// `pi - gamma_max <= 2 asin(min(1, 3 a_T/h_T))`.
#[derive(Clone, Copy, Debug)]
pub struct BoundsReport {
    pub aspect: f64,
    /// `a_T / h_T`, the altitude-to-longest-edge ratio.
    pub altitude_ratio: f64,
    pub inc_aspect: f64,
    pub bary_aspect: f64,
    pub inc_lower: Inequality,
    pub inc_upper: Inequality,
    pub bary_lower: Inequality,
    pub bary_upper: Inequality,
    pub sin_gamma: [Inequality; 2],
    pub angle_gap: Inequality,
}

impl BoundsReport {
    pub fn all_pass(&self) -> bool {
        self.inc_lower.pass
            && self.inc_upper.pass
            && self.bary_lower.pass
            && self.bary_upper.pass
            && self.sin_gamma[0].pass
            && self.sin_gamma[1].pass
            && self.angle_gap.pass
    }
}

pub fn lemma_bounds_report(p: &[Point2; 3]) -> Result<BoundsReport> {
    let m = analyze_triangle(p)?;
    let inc = split_metrics(p, SplitStrategy::Incenter)?;
    let bary = split_metrics(p, SplitStrategy::Barycenter)?;
    let ratio = m.altitude / m.h[2];

    let inc_aspect = inc.ct_aspect();
    let bary_aspect = bary.ct_aspect();

    // Base angles of the barycenter child that shares the longest edge.
    let k3 = sorted_children(p, bary.z0)?[2];
    let g0 = angle_at(&k3, 0);
    let g1 = angle_at(&k3, 1);
    let g2 = angle_at(&k3, 2);
    let sin_bound = 3.0 * ratio;
    let gap_bound = 2.0 * sin_bound.min(1.0).asin();

    Ok(BoundsReport {
        aspect: m.aspect,
        altitude_ratio: ratio,
        inc_aspect,
        bary_aspect,
        inc_lower: Inequality::check(2.0 * m.aspect, inc_aspect),
        inc_upper: Inequality::check(inc_aspect, 2.0 * (1.0 + ratio) * m.aspect),
        bary_lower: Inequality::check(3.0 * m.aspect / (1.0 + ratio), bary_aspect),
        bary_upper: Inequality::check(bary_aspect, 3.0 * m.aspect),
        sin_gamma: [
            Inequality::check(g0.sin(), sin_bound),
            Inequality::check(g1.sin(), sin_bound),
        ],
        angle_gap: Inequality::check(std::f64::consts::PI - g2.max(g0).max(g1), gap_bound),
    })
}

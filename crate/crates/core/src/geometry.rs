//! Exact convex planar domains with signed distance oracles, nearest
//! boundary points, inradius, high ridge, cut locus, stadium-likeness,
//! outer parallel bodies, and level-set domains.
//!
//! Distance convention: signed, positive inside, so the inradius equals the
//! maximum of the distance field.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Angular separation (radians, seen from the query point) above which two
/// exactly tied boundary feet count as distinct.
pub const FOOT_ANGLE_TOL: f64 = 1e-3;

/// Angular separation used by the lattice cut-locus detector, which works
/// with a loose distance-tie tolerance (≈ the lattice spacing). Near
/// tangential boundary junctions two *different* near-minimal boundary
/// points can be almost-tied while the distance field stays differentiable;
/// those pairs subtend only a small angle, whereas genuine cut points have
/// feet on different sides of the medial axis subtending an O(1) angle.
pub const CUT_ANGLE_TOL: f64 = 0.2;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("domain has empty interior or a non-positive radius")]
    Degenerate,
    #[error("polygon must have at least 3 strictly convex CCW vertices")]
    BadPolygon,
    #[error("query point is not interior to the domain")]
    NotInterior,
    #[error("negative parallel-body offset {0}")]
    NegativeOffset(f64),
    #[error("level value {m} is not below the field maximum {max}")]
    EmptyLevelSet { m: f64, max: f64 },
}

pub type Point = [f64; 2];

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Closest point of the segment [p0, p1] to x.
fn closest_on_segment(p0: Point, p1: Point, x: Point) -> Point {
    let d = sub(p1, p0);
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return p0;
    }
    let t = ((x[0] - p0[0]) * d[0] + (x[1] - p0[1]) * d[1]) / len2;
    let t = t.clamp(0.0, 1.0);
    [p0[0] + t * d[0], p0[1] + t * d[1]]
}

/// Anything that exposes a signed distance to a boundary (positive inside).
pub trait DistanceOracle {
    fn signed_distance(&self, x: Point) -> f64;
    /// Axis-aligned box containing the domain.
    fn bounding_box(&self) -> (Point, Point);
}

/// An analytic or polygonal convex planar region with an exact
/// distance-to-boundary oracle.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ConvexDomain {
    Disk {
        center: Point,
        radius: f64,
    },
    /// Tubular neighborhood of the spine segment p0–p1 with the given radius.
    /// A zero-length spine degenerates to a disk; constructors accept this.
    Stadium {
        p0: Point,
        p1: Point,
        radius: f64,
    },
    /// Axis-aligned, semi-axes a ≥ b.
    Ellipse {
        center: Point,
        a: f64,
        b: f64,
    },
    /// Strictly convex, vertices in CCW order.
    Polygon {
        vertices: Vec<Point>,
    },
}

impl ConvexDomain {
    pub fn disk(center: Point, radius: f64) -> Result<Self, GeometryError> {
        if radius <= 0.0 {
            return Err(GeometryError::Degenerate);
        }
        Ok(ConvexDomain::Disk { center, radius })
    }

    pub fn stadium(p0: Point, p1: Point, radius: f64) -> Result<Self, GeometryError> {
        if radius <= 0.0 {
            return Err(GeometryError::Degenerate);
        }
        Ok(ConvexDomain::Stadium { p0, p1, radius })
    }

    pub fn ellipse(center: Point, a: f64, b: f64) -> Result<Self, GeometryError> {
        if !(a >= b && b > 0.0) {
            return Err(GeometryError::Degenerate);
        }
        Ok(ConvexDomain::Ellipse { center, a, b })
    }

    pub fn polygon(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::BadPolygon);
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cross <= 0.0 {
                return Err(GeometryError::BadPolygon);
            }
        }
        Ok(ConvexDomain::Polygon { vertices })
    }

    /// Signed distance to ∂Ω, positive inside, −dist(x, Ω̄) outside.
    pub fn distance_to_boundary(&self, x: Point) -> f64 {
        match self {
            ConvexDomain::Disk { center, radius } => radius - dist(x, *center),
            ConvexDomain::Stadium { p0, p1, radius } => {
                radius - dist(x, closest_on_segment(*p0, *p1, x))
            }
            ConvexDomain::Ellipse { .. } => {
                let feet = self.candidate_feet(x);
                let d = feet
                    .iter()
                    .map(|f| dist(x, *f))
                    .fold(f64::INFINITY, f64::min);
                if self.contains(x) {
                    d
                } else {
                    -d
                }
            }
            ConvexDomain::Polygon { vertices } => {
                let n = vertices.len();
                let mut inside_min = f64::INFINITY;
                let mut bdry_min = f64::INFINITY;
                let mut inside = true;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = sub(b, a);
                    let len = norm(e);
                    // signed distance to the edge line, positive on the
                    // interior side for CCW orientation
                    let s = (e[0] * (x[1] - a[1]) - e[1] * (x[0] - a[0])) / len;
                    if s < 0.0 {
                        inside = false;
                    }
                    inside_min = inside_min.min(s);
                    bdry_min = bdry_min.min(dist(x, closest_on_segment(a, b, x)));
                }
                if inside {
                    inside_min
                } else {
                    -bdry_min
                }
            }
        }
    }

    fn contains(&self, x: Point) -> bool {
        match self {
            ConvexDomain::Ellipse { center, a, b } => {
                let u = (x[0] - center[0]) / a;
                let v = (x[1] - center[1]) / b;
                u * u + v * v < 1.0
            }
            _ => self.distance_to_boundary(x) > 0.0,
        }
    }

    /// Candidate nearest-boundary feet (superset of the true feet; callers
    /// filter by distance). Deterministic.
    fn candidate_feet(&self, x: Point) -> Vec<Point> {
        match self {
            ConvexDomain::Disk { center, radius } => {
                let d = sub(x, *center);
                let r = norm(d);
                if r < 1e-12 * radius.max(1.0) {
                    // center of the disk: every boundary point is a foot;
                    // return four representatives
                    vec![
                        [center[0] + radius, center[1]],
                        [center[0] - radius, center[1]],
                        [center[0], center[1] + radius],
                        [center[0], center[1] - radius],
                    ]
                } else {
                    let e = [d[0] / r, d[1] / r];
                    vec![
                        [center[0] + radius * e[0], center[1] + radius * e[1]],
                        [center[0] - radius * e[0], center[1] - radius * e[1]],
                    ]
                }
            }
            ConvexDomain::Stadium { p0, p1, radius } => {
                let s = closest_on_segment(*p0, *p1, x);
                let d = sub(x, s);
                let r = norm(d);
                let mut feet = Vec::new();
                if r < 1e-12 * radius.max(1.0) {
                    // on the spine: feet straddle it perpendicular to the
                    // spine direction (any direction for a degenerate spine)
                    let sp = sub(*p1, *p0);
                    let l = norm(sp);
                    let n = if l > 0.0 {
                        [-sp[1] / l, sp[0] / l]
                    } else {
                        [0.0, 1.0]
                    };
                    feet.push([s[0] + radius * n[0], s[1] + radius * n[1]]);
                    feet.push([s[0] - radius * n[0], s[1] - radius * n[1]]);
                } else {
                    let e = [d[0] / r, d[1] / r];
                    feet.push([s[0] + radius * e[0], s[1] + radius * e[1]]);
                    feet.push([s[0] - radius * e[0], s[1] - radius * e[1]]);
                }
                // cap feet seen from the spine endpoints
                for ep in [*p0, *p1] {
                    let d = sub(x, ep);
                    let r = norm(d);
                    if r > 1e-12 * radius.max(1.0) {
                        let e = [d[0] / r, d[1] / r];
                        feet.push([ep[0] + radius * e[0], ep[1] + radius * e[1]]);
                    }
                }
                feet
            }
            ConvexDomain::Ellipse { center, a, b } => {
                let u = x[0] - center[0];
                let v = x[1] - center[1];
                let mut feet = Vec::new();
                // Newton on the boundary parameter θ from the four quadrant
                // midpoints; the criticality condition is
                // f(θ) = (a²−b²) sinθ cosθ − u·a sinθ + v·b cosθ = 0.
                let c2 = a * a - b * b;
                let crit = |th: f64| {
                    let (s, c) = th.sin_cos();
                    c2 * s * c - u * a * s + v * b * c
                };
                // only critical angles are feet (local extrema of the
                // boundary distance); non-critical candidates would fake
                // near-minimal "second feet" for the cut-locus detector
                let crit_tol = 1e-7 * (a * a + u.abs() * a + v.abs() * b);
                let mut angles: Vec<f64> = Vec::new();
                for k in 0..4 {
                    let mut th = std::f64::consts::FRAC_PI_4 + (k as f64) * std::f64::consts::FRAC_PI_2;
                    for _ in 0..100 {
                        let (s, c) = th.sin_cos();
                        let f = c2 * s * c - u * a * s + v * b * c;
                        let fp = c2 * (c * c - s * s) - u * a * c - v * b * s;
                        if fp.abs() < 1e-300 {
                            break;
                        }
                        let mut step = f / fp;
                        // keep Newton inside its basin
                        step = step.clamp(-0.5, 0.5);
                        th -= step;
                        if step.abs() < 1e-15 {
                            break;
                        }
                    }
                    angles.push(th);
                }
                // axis points guard against Newton landing on a saddle
                angles.extend([
                    0.0,
                    std::f64::consts::PI,
                    std::f64::consts::FRAC_PI_2,
                    -std::f64::consts::FRAC_PI_2,
                ]);
                for th in &angles {
                    if crit(*th).abs() <= crit_tol {
                        feet.push([center[0] + a * th.cos(), center[1] + b * th.sin()]);
                    }
                }
                if feet.is_empty() {
                    // Newton stalled everywhere (should not happen); keep
                    // all candidates rather than lose the distance oracle
                    for th in &angles {
                        feet.push([center[0] + a * th.cos(), center[1] + b * th.sin()]);
                    }
                }
                feet
            }
            ConvexDomain::Polygon { vertices } => {
                let n = vertices.len();
                (0..n)
                    .map(|i| closest_on_segment(vertices[i], vertices[(i + 1) % n], x))
                    .collect()
            }
        }
    }

    /// All nearest boundary points within `tol` of the minimal distance,
    /// deduplicated (a polygon corner shared by two edges counts once).
    /// The direction ν = (x − q)/|x − q| is set iff exactly one foot.
    pub fn nearest_boundary_points(
        &self,
        x: Point,
        tol: f64,
    ) -> Result<NearestBoundaryData, GeometryError> {
        let d = self.distance_to_boundary(x);
        if d <= 0.0 {
            return Err(GeometryError::NotInterior);
        }
        let mut feet: Vec<Point> = Vec::new();
        // keep only candidates that actually lie on the boundary: the
        // shape-specific constructions can emit interior points (e.g. a
        // stadium cap direction pointing back over the spine), which would
        // otherwise corrupt the minimal distance
        let cands: Vec<Point> = self
            .candidate_feet(x)
            .into_iter()
            .filter(|f| self.distance_to_boundary(*f).abs() <= 1e-9)
            .collect();
        let dmin = cands
            .iter()
            .map(|f| dist(x, *f))
            .fold(f64::INFINITY, f64::min);
        for f in cands {
            if dist(x, f) <= dmin + tol && !feet.iter().any(|g| dist(*g, f) <= 1e-9) {
                feet.push(f);
            }
        }
        let direction = if feet.len() == 1 {
            let q = feet[0];
            let v = sub(x, q);
            let n = norm(v);
            Some([v[0] / n, v[1] / n])
        } else {
            None
        };
        Ok(NearestBoundaryData {
            point: x,
            feet,
            distance: dmin,
            direction,
        })
    }

    /// Inradius ρ_Ω = max of the distance field, with a witness center.
    /// Closed form for the analytic shapes; polygons solve the largest
    /// inscribed circle linear program over edge half-planes.
    pub fn inradius(&self) -> (f64, Point) {
        match self {
            ConvexDomain::Disk { center, radius } => (*radius, *center),
            ConvexDomain::Stadium { p0, p1, radius } => {
                (*radius, [(p0[0] + p1[0]) / 2.0, (p0[1] + p1[1]) / 2.0])
            }
            ConvexDomain::Ellipse { center, b, .. } => (*b, *center),
            ConvexDomain::Polygon { vertices } => polygon_inradius(vertices),
        }
    }

    /// Sample points of the high ridge {d_∂Ω = ρ_Ω}: bounding-box lattice
    /// points near the maximum (within max(h, tol) of ρ) are pushed toward
    /// the ridge by coordinate-line maximization and accepted when the
    /// ascended distance is within `tol` of ρ. The acceptance tolerance must
    /// be tight (≈ the ascent precision): the distance field is very flat
    /// along the medial axis of non-stadium domains, so a slack tolerance
    /// would misreport a long stretch of the cut locus as ridge.
    pub fn high_ridge(&self, h: f64, tol: f64) -> Vec<Point> {
        let (rho, center) = self.inradius();
        let (lo, hi) = self.bounding_box();
        let mut out: Vec<Point> = Vec::new();
        let nx = ((hi[0] - lo[0]) / h).ceil() as usize + 1;
        let ny = ((hi[1] - lo[1]) / h).ceil() as usize + 1;
        for i in 0..nx {
            for j in 0..ny {
                let mut p = [lo[0] + i as f64 * h, lo[1] + j as f64 * h];
                if self.distance_to_boundary(p) < rho - tol.max(h) {
                    continue;
                }
                // coordinate-line ascent toward the ridge; skip it for points
                // already on the ridge — the ternary search drifts along flat
                // (zero-curvature) ridge directions and would leave gaps
                if (self.distance_to_boundary(p) - rho).abs() > tol {
                    for _ in 0..3 {
                        for axis in 0..2 {
                            p = line_maximize(|q| self.distance_to_boundary(q), p, axis, h);
                        }
                    }
                }
                if (self.distance_to_boundary(p) - rho).abs() <= tol
                    && !out.iter().any(|q| dist(*q, p) <= h / 4.0)
                {
                    out.push(p);
                }
            }
        }
        if out.is_empty() {
            out.push(center);
        }
        out
    }

    /// Sample points of the cut locus: lattice points (spacing h) whose set
    /// of near-minimal boundary feet (distance tie tolerance h) contains two
    /// feet separated by at least `CUT_ANGLE_TOL` radians seen from the
    /// point, i.e. where d_∂Ω is not differentiable.
    pub fn cut_locus(&self, h: f64) -> Vec<Point> {
        let (lo, hi) = self.bounding_box();
        let mut out = Vec::new();
        // anchor the lattice at multiples of h so symmetry lines are sampled
        let i0 = (lo[0] / h).floor() as i64;
        let i1 = (hi[0] / h).ceil() as i64;
        let j0 = (lo[1] / h).floor() as i64;
        let j1 = (hi[1] / h).ceil() as i64;
        for i in i0..=i1 {
            for j in j0..=j1 {
                let p = [i as f64 * h, j as f64 * h];
                if self.distance_to_boundary(p) <= h / 4.0 {
                    continue;
                }
                if let Ok(nb) = self.nearest_boundary_points(p, h) {
                    if has_separated_pair(&nb.feet, p, CUT_ANGLE_TOL) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    /// Stadium-likeness: Hausdorff distance between cut locus and high ridge
    /// samples; true iff ≤ max(2h, tol).
    pub fn is_stadium_like(&self, h: f64, tol: f64) -> (bool, f64) {
        let cut = self.cut_locus(h);
        let ridge = self.high_ridge(h, h * h);
        let d = hausdorff(&cut, &ridge);
        (d <= (2.0 * h).max(tol), d)
    }

    /// Outer parallel body Ω_ε = {dist(x, Ω) < ε}. For convex Ω the signed
    /// distance of the offset body is d_∂Ω + ε everywhere; disks map to
    /// disks and stadiums to stadiums.
    pub fn outer_parallel_body(&self, eps: f64) -> Result<ParallelBody, GeometryError> {
        if eps < 0.0 {
            return Err(GeometryError::NegativeOffset(eps));
        }
        let body = match self {
            ConvexDomain::Disk { center, radius } => ParallelBody::Exact(ConvexDomain::Disk {
                center: *center,
                radius: radius + eps,
            }),
            ConvexDomain::Stadium { p0, p1, radius } => {
                ParallelBody::Exact(ConvexDomain::Stadium {
                    p0: *p0,
                    p1: *p1,
                    radius: radius + eps,
                })
            }
            _ => ParallelBody::Offset {
                base: self.clone(),
                eps,
            },
        };
        Ok(body)
    }

    /// Boundary samples, counterclockwise, for quadrature along ∂Ω.
    pub fn boundary_samples(&self, n: usize) -> Vec<Point> {
        match self {
            ConvexDomain::Disk { center, radius } => (0..n)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect(),
            ConvexDomain::Ellipse { center, a, b } => (0..n)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    [center[0] + a * t.cos(), center[1] + b * t.sin()]
                })
                .collect(),
            ConvexDomain::Stadium { p0, p1, radius } => {
                // two caps and two straight sides, parameterized by arclength
                let l = dist(*p0, *p1);
                let total = 2.0 * l + 2.0 * std::f64::consts::PI * radius;
                let sp = sub(*p1, *p0);
                let e = if l > 0.0 {
                    [sp[0] / l, sp[1] / l]
                } else {
                    [1.0, 0.0]
                };
                let nv = [-e[1], e[0]];
                (0..n)
                    .map(|k| {
                        let mut s = total * k as f64 / n as f64;
                        if s < l {
                            return [
                                p0[0] + s * e[0] + radius * nv[0],
                                p0[1] + s * e[1] + radius * nv[1],
                            ];
                        }
                        s -= l;
                        let half = std::f64::consts::PI * radius;
                        if s < half {
                            let th = s / radius;
                            let (sn, cs) = th.sin_cos();
                            // rotate from +n toward +e around p1
                            return [
                                p1[0] + radius * (cs * nv[0] + sn * e[0]),
                                p1[1] + radius * (cs * nv[1] + sn * e[1]),
                            ];
                        }
                        s -= half;
                        if s < l {
                            return [
                                p1[0] - s * e[0] - radius * nv[0],
                                p1[1] - s * e[1] - radius * nv[1],
                            ];
                        }
                        s -= l;
                        let th = s / radius;
                        let (sn, cs) = th.sin_cos();
                        [
                            p0[0] + radius * (-cs * nv[0] - sn * e[0]),
                            p0[1] + radius * (-cs * nv[1] - sn * e[1]),
                        ]
                    })
                    .collect()
            }
            ConvexDomain::Polygon { vertices } => {
                let m = vertices.len();
                let mut out = Vec::with_capacity(n);
                let per_edge = (n / m).max(1);
                for i in 0..m {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % m];
                    for k in 0..per_edge {
                        let t = k as f64 / per_edge as f64;
                        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    }
                }
                out
            }
        }
    }
}

impl DistanceOracle for ConvexDomain {
    fn signed_distance(&self, x: Point) -> f64 {
        self.distance_to_boundary(x)
    }

    fn bounding_box(&self) -> (Point, Point) {
        match self {
            ConvexDomain::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            ConvexDomain::Stadium { p0, p1, radius } => (
                [
                    p0[0].min(p1[0]) - radius,
                    p0[1].min(p1[1]) - radius,
                ],
                [
                    p0[0].max(p1[0]) + radius,
                    p0[1].max(p1[1]) + radius,
                ],
            ),
            ConvexDomain::Ellipse { center, a, b } => (
                [center[0] - a, center[1] - b],
                [center[0] + a, center[1] + b],
            ),
            ConvexDomain::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }
}

/// Query result of [`ConvexDomain::nearest_boundary_points`].
#[derive(Clone, Debug)]
pub struct NearestBoundaryData {
    pub point: Point,
    /// All boundary points attaining the minimal distance (within tolerance).
    pub feet: Vec<Point>,
    pub distance: f64,
    /// Unit vector from the foot toward the query point; present iff the
    /// foot is unique.
    pub direction: Option<Point>,
}

/// Outer parallel body oracle: exact shape when the offset stays in the
/// family, otherwise the uniform offset of the base signed distance.
#[derive(Clone, Debug)]
pub enum ParallelBody {
    Exact(ConvexDomain),
    Offset { base: ConvexDomain, eps: f64 },
}

impl DistanceOracle for ParallelBody {
    fn signed_distance(&self, x: Point) -> f64 {
        match self {
            ParallelBody::Exact(d) => d.signed_distance(x),
            ParallelBody::Offset { base, eps } => base.signed_distance(x) + eps,
        }
    }

    fn bounding_box(&self) -> (Point, Point) {
        match self {
            ParallelBody::Exact(d) => d.bounding_box(),
            ParallelBody::Offset { base, eps } => {
                let (lo, hi) = base.bounding_box();
                ([lo[0] - eps, lo[1] - eps], [hi[0] + eps, hi[1] + eps])
            }
        }
    }
}

/// Implicit domain {u > m} extracted from grid samples by marching squares,
/// with a distance oracle against the extracted boundary polyline.
#[derive(Clone, Debug)]
pub struct LevelSetDomain {
    origin: Point,
    h: f64,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
    m: f64,
    /// boundary polyline segments of {u = m}
    pub segments: Vec<(Point, Point)>,
}

impl LevelSetDomain {
    /// `values` is row-major with index i*ny + j for the node
    /// (origin + [i h, j h]); nodes outside the source domain carry 0.
    pub fn from_grid(
        origin: Point,
        h: f64,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
        m: f64,
    ) -> Result<Self, GeometryError> {
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m >= max {
            return Err(GeometryError::EmptyLevelSet { m, max });
        }
        let mut segments = Vec::new();
        let at = |i: usize, j: usize| values[i * ny + j];
        for i in 0..nx - 1 {
            for j in 0..ny - 1 {
                let v = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
                let x0 = origin[0] + i as f64 * h;
                let y0 = origin[1] + j as f64 * h;
                // corner order: (0,0), (1,0), (1,1), (0,1)
                let corners = [
                    [x0, y0],
                    [x0 + h, y0],
                    [x0 + h, y0 + h],
                    [x0, y0 + h],
                ];
                let mut pts: Vec<Point> = Vec::new();
                for e in 0..4 {
                    let a = e;
                    let b = (e + 1) % 4;
                    let (va, vb) = (v[a] - m, v[b] - m);
                    if (va > 0.0) != (vb > 0.0) {
                        let t = va / (va - vb);
                        pts.push([
                            corners[a][0] + t * (corners[b][0] - corners[a][0]),
                            corners[a][1] + t * (corners[b][1] - corners[a][1]),
                        ]);
                    }
                }
                match pts.len() {
                    2 => segments.push((pts[0], pts[1])),
                    4 => {
                        // ambiguous saddle: split by the cell-center value
                        let cmid = (v[0] + v[1] + v[2] + v[3]) / 4.0 - m;
                        if (cmid > 0.0) == (v[0] - m > 0.0) {
                            segments.push((pts[0], pts[1]));
                            segments.push((pts[2], pts[3]));
                        } else {
                            segments.push((pts[3], pts[0]));
                            segments.push((pts[1], pts[2]));
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(LevelSetDomain {
            origin,
            h,
            nx,
            ny,
            values,
            m,
            segments,
        })
    }

    /// Bilinear interpolation of the source field (0 outside the grid).
    pub fn interp(&self, x: Point) -> f64 {
        let fx = (x[0] - self.origin[0]) / self.h;
        let fy = (x[1] - self.origin[1]) / self.h;
        if fx < 0.0 || fy < 0.0 || fx > (self.nx - 1) as f64 || fy > (self.ny - 1) as f64 {
            return 0.0;
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let at = |i: usize, j: usize| self.values[i * self.ny + j];
        (1.0 - tx) * (1.0 - ty) * at(i, j)
            + tx * (1.0 - ty) * at(i + 1, j)
            + tx * ty * at(i + 1, j + 1)
            + (1.0 - tx) * ty * at(i, j + 1)
    }

    /// Midpoints of the boundary polyline segments.
    pub fn boundary_samples(&self) -> Vec<Point> {
        self.segments
            .iter()
            .map(|(a, b)| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0])
            .collect()
    }
}

impl DistanceOracle for LevelSetDomain {
    fn signed_distance(&self, x: Point) -> f64 {
        let d = self
            .segments
            .iter()
            .map(|(a, b)| dist(x, closest_on_segment(*a, *b, x)))
            .fold(f64::INFINITY, f64::min);
        if self.interp(x) > self.m {
            d
        } else {
            -d
        }
    }

    fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (a, b) in &self.segments {
            for p in [a, b] {
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        (lo, hi)
    }
}

/// True iff two feet subtend an angle ≥ `angle_tol` at p.
fn has_separated_pair(feet: &[Point], p: Point, angle_tol: f64) -> bool {
    for (i, f) in feet.iter().enumerate() {
        for g in feet.iter().skip(i + 1) {
            let u = sub(*f, p);
            let v = sub(*g, p);
            let nu = norm(u);
            let nv = norm(v);
            if nu == 0.0 || nv == 0.0 {
                continue;
            }
            let cos = ((u[0] * v[0] + u[1] * v[1]) / (nu * nv)).clamp(-1.0, 1.0);
            if cos.acos() >= angle_tol {
                return true;
            }
        }
    }
    false
}

/// Symmetric Hausdorff distance between finite point sets.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one_sided = |s: &[Point], t: &[Point]| {
        s.iter()
            .map(|p| t.iter().map(|q| dist(*p, *q)).fold(f64::INFINITY, f64::min))
            .fold(0.0_f64, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Ternary-search maximization of f along a coordinate line through p,
/// initial bracket ±h, shrunk to ~1e-12.
fn line_maximize<F: Fn(Point) -> f64>(f: F, p: Point, axis: usize, h: f64) -> Point {
    let eval = |t: f64| {
        let mut q = p;
        q[axis] += t;
        f(q)
    };
    let (mut a, mut b) = (-h, h);
    for _ in 0..80 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if eval(m1) < eval(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let mut q = p;
    q[axis] += (a + b) / 2.0;
    q
}

/// Largest inscribed circle of a strictly convex CCW polygon: maximize r
/// subject to n_i·x − b_i ≥ r for the inward edge half-planes, solved by
/// enumerating active constraint triples.
fn polygon_inradius(vertices: &[Point]) -> (f64, Point) {
    let n = vertices.len();
    // inward normal form n_i·x ≥ b_i
    let mut normals = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n);
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let e = sub(b, a);
        let len = norm(e);
        let nv = [-e[1] / len, e[0] / len];
        normals.push(nv);
        offsets.push(nv[0] * a[0] + nv[1] * a[1]);
    }
    let mut best = (0.0_f64, [0.0, 0.0]);
    let feasible = |x: Point, r: f64| {
        (0..n).all(|i| normals[i][0] * x[0] + normals[i][1] * x[1] - offsets[i] >= r - 1e-10)
    };
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                // solve n_q·x − r = b_q for q in {i,j,k}
                let rows = [i, j, k];
                let mut m = [[0.0_f64; 3]; 3];
                let mut rhs = [0.0_f64; 3];
                for (row, &q) in rows.iter().enumerate() {
                    m[row] = [normals[q][0], normals[q][1], -1.0];
                    rhs[row] = offsets[q];
                }
                if let Some(sol) = solve3(m, rhs) {
                    let (x, r) = ([sol[0], sol[1]], sol[2]);
                    if r > best.0 && feasible(x, r) {
                        best = (r, x);
                    }
                }
            }
        }
    }
    best
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for c in col..3 {
                    m[row][c] -= f * m[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some([b[0] / m[0][0], b[1] / m[1][1], b[2] / m[2][2]])
}

pub fn unit_square() -> ConvexDomain {
    ConvexDomain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> ConvexDomain {
        ConvexDomain::disk([0.0, 0.0], 1.0).unwrap()
    }

    fn stadium() -> ConvexDomain {
        ConvexDomain::stadium([-1.0, 0.0], [1.0, 0.0], 1.0).unwrap()
    }

    fn ellipse() -> ConvexDomain {
        ConvexDomain::ellipse([0.0, 0.0], 2.0, 1.0).unwrap()
    }

    fn ellipse_brute_distance(x: Point, a: f64, b: f64, n: usize) -> f64 {
        let mut d = f64::INFINITY;
        for k in 0..n {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            d = d.min(dist(x, [a * t.cos(), b * t.sin()]));
        }
        d
    }

    #[test]
    fn disk_center_distance() {
        assert_eq!(disk().distance_to_boundary([0.0, 0.0]), 1.0);
    }

    #[test]
    fn stadium_spine_distance() {
        assert_eq!(stadium().distance_to_boundary([0.5, 0.0]), 1.0);
    }

    #[test]
    fn ellipse_center_distance() {
        let d = ellipse().distance_to_boundary([0.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn ellipse_distance_matches_brute_force() {
        let e = ellipse();
        // deterministic interior sample sweep
        let mut worst = 0.0_f64;
        for i in 0..20 {
            for j in 0..20 {
                let x = [-1.9 + 0.2 * i as f64, -0.9 + 0.095 * j as f64];
                if !e.contains(x) {
                    continue;
                }
                let exact = e.distance_to_boundary(x);
                let brute = ellipse_brute_distance(x, 2.0, 1.0, 1_000_000);
                worst = worst.max((exact - brute).abs());
            }
        }
        assert!(worst < 1e-6, "worst deviation {worst}");
    }

    #[test]
    fn stadium_spine_point_has_two_feet() {
        let nb = stadium().nearest_boundary_points([0.0, 0.0], 1e-9).unwrap();
        assert_eq!(nb.feet.len(), 2);
        assert!(nb.direction.is_none());
        for f in &nb.feet {
            assert!((f[0]).abs() < 1e-9 && (f[1].abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn disk_off_center_has_one_foot() {
        let nb = disk().nearest_boundary_points([0.5, 0.0], 1e-9).unwrap();
        assert_eq!(nb.feet.len(), 1);
        assert_eq!(nb.feet[0], [1.0, 0.0]);
        let nu = nb.direction.unwrap();
        assert!((nu[0] + 1.0).abs() < 1e-12 && nu[1].abs() < 1e-12);
    }

    #[test]
    fn ellipse_point_inside_cut_locus_has_two_feet() {
        // 1.2 < (a² − b²)/a = 1.5, so two symmetric off-axis feet
        let nb = ellipse().nearest_boundary_points([1.2, 0.0], 1e-9).unwrap();
        assert_eq!(nb.feet.len(), 2, "feet: {:?}", nb.feet);
        assert!((nb.feet[0][1] + nb.feet[1][1]).abs() < 1e-9);
        assert!(nb.feet[0][1].abs() > 1e-3);
    }

    #[test]
    fn inradius_values() {
        assert_eq!(stadium().inradius().0, 1.0);
        let (rho, c) = ellipse().inradius();
        assert_eq!(rho, 1.0);
        assert_eq!(c, [0.0, 0.0]);
        let (rho, c) = unit_square().inradius();
        assert!((rho - 0.5).abs() < 1e-10);
        assert!((c[0] - 0.5).abs() < 1e-10 && (c[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn ellipse_inradius_matches_grid_max() {
        let e = ellipse();
        let mut best = 0.0_f64;
        let h = 1e-3;
        for i in -300..=300 {
            for j in -300..=300 {
                let x = [i as f64 * h, j as f64 * h];
                best = best.max(e.distance_to_boundary(x));
            }
        }
        assert!((best - 1.0).abs() < 2e-3, "grid max {best}");
    }

    #[test]
    fn high_ridge_samples() {
        let h = 1.0 / 16.0;
        let r = stadium().high_ridge(h, h * h);
        for p in &r {
            assert!(p[1].abs() < 1e-6 && p[0].abs() <= 1.0 + 1e-6, "{p:?}");
        }
        let r = ellipse().high_ridge(h, h * h);
        for p in &r {
            assert!(norm(*p) <= 2.0 * h + 1e-9, "{p:?}");
        }
        let r = disk().high_ridge(h, h * h);
        for p in &r {
            assert!(norm(*p) <= 2.0 * h + 1e-9, "{p:?}");
        }
    }

    #[test]
    fn cut_locus_disk_is_center() {
        let h = 1.0 / 32.0;
        let cut = disk().cut_locus(h);
        assert!(!cut.is_empty());
        for p in &cut {
            assert!(norm(*p) <= 2.0 * h, "{p:?}");
        }
    }

    #[test]
    fn cut_locus_stadium_is_spine() {
        let h = 1.0 / 32.0;
        let cut = stadium().cut_locus(h);
        assert!(!cut.is_empty());
        for p in &cut {
            assert!(p[1].abs() <= 2.0 * h && p[0].abs() <= 1.0 + 2.0 * h, "{p:?}");
        }
        // and the spine is covered
        let spine: Vec<Point> = (0..=64).map(|k| [-1.0 + k as f64 / 32.0, 0.0]).collect();
        assert!(hausdorff(&cut, &spine) <= 2.0 * h);
    }

    #[test]
    fn cut_locus_ellipse_endpoints() {
        let h = 1.0 / 64.0;
        let cut = ellipse().cut_locus(h);
        assert!(!cut.is_empty());
        let xmax = cut.iter().map(|p| p[0].abs()).fold(0.0_f64, f64::max);
        assert!((xmax - 1.5).abs() <= 2.0 * h, "endpoint at {xmax}");
        for p in &cut {
            assert!(p[1].abs() <= 2.0 * h, "{p:?}");
        }
    }

    #[test]
    fn stadium_like_verdicts() {
        let h = 1.0 / 32.0;
        let (ok, d) = disk().is_stadium_like(h, 0.0);
        assert!(ok, "disk hausdorff {d}");
        let (ok, d) = stadium().is_stadium_like(h, 0.0);
        assert!(ok, "stadium hausdorff {d}");
        let (ok, d) = ellipse().is_stadium_like(h, 0.0);
        assert!(!ok);
        assert!(d >= 1.4, "ellipse hausdorff {d}");
    }

    #[test]
    fn parallel_body_shapes_and_offset() {
        let pb = disk().outer_parallel_body(0.5).unwrap();
        match pb {
            ParallelBody::Exact(ConvexDomain::Disk { radius, .. }) => {
                assert_eq!(radius, 1.5)
            }
            _ => panic!("disk offset should stay a disk"),
        }
        let pb = stadium().outer_parallel_body(0.25).unwrap();
        match pb {
            ParallelBody::Exact(ConvexDomain::Stadium { radius, .. }) => {
                assert_eq!(radius, 1.25)
            }
            _ => panic!("stadium offset should stay a stadium"),
        }
        assert!(disk().outer_parallel_body(-0.1).is_err());
    }

    #[test]
    fn parallel_body_square_corner() {
        let pb = unit_square().outer_parallel_body(0.1).unwrap();
        // 0.05 outward along the corner diagonal: rounded-corner distance
        let q = 0.05 / std::f64::consts::SQRT_2;
        let d = pb.signed_distance([-q, -q]);
        assert!((d - 0.05).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn parallel_body_interior_offset_identity() {
        for dom in [disk(), stadium(), ellipse()] {
            let pb = dom.outer_parallel_body(0.3).unwrap();
            for x in [[0.1, 0.2], [-0.4, 0.1], [0.0, 0.0]] {
                let lhs = pb.signed_distance(x);
                let rhs = dom.distance_to_boundary(x) + 0.3;
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn level_set_of_quadratic_profile_on_disk() {
        // u = (1/2)(1 − (1−d)²) on the unit disk; {u > m} is the disk of
        // radius 1 − t with t = 1 − sqrt(1 − 2m)
        let h = 1.0 / 64.0;
        let n = (2.2 / h) as usize + 1;
        let origin = [-1.1, -1.1];
        let mut vals = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let x = [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
                let d = 1.0 - norm(x);
                if d > 0.0 {
                    vals[i * n + j] = 0.5 * (1.0 - (1.0 - d) * (1.0 - d));
                }
            }
        }
        let m = 0.255;
        let ls = LevelSetDomain::from_grid(origin, h, n, n, vals.clone(), m).unwrap();
        let r_expected = (1.0_f64 - 2.0 * m).sqrt(); // 0.7
        for p in ls.boundary_samples() {
            assert!((norm(p) - r_expected).abs() <= 2.0 * h, "{p:?}");
        }
        assert!(matches!(
            LevelSetDomain::from_grid(origin, h, n, n, vals, 0.5),
            Err(GeometryError::EmptyLevelSet { .. })
        ));
    }

    #[test]
    fn polygon_constructors_reject_bad_input() {
        assert!(ConvexDomain::polygon(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        // clockwise square
        assert!(
            ConvexDomain::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).is_err()
        );
        // collinear vertex
        assert!(ConvexDomain::polygon(vec![
            [0.0, 0.0],
            [0.5, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0]
        ])
        .is_err());
    }

    #[test]
    fn distance_concavity_and_lipschitz() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dom in [disk(), stadium(), ellipse(), unit_square()] {
            let (lo, hi) = dom.bounding_box();
            let mut sample_inside = |rng: &mut ChaCha8Rng| loop {
                let x = [
                    rng.gen_range(lo[0]..hi[0]),
                    rng.gen_range(lo[1]..hi[1]),
                ];
                if dom.distance_to_boundary(x) > 0.0 {
                    return x;
                }
            };
            for _ in 0..10_000 {
                let x = sample_inside(&mut rng);
                let y = sample_inside(&mut rng);
                let t: f64 = rng.gen_range(0.0..1.0);
                let z = [
                    t * x[0] + (1.0 - t) * y[0],
                    t * x[1] + (1.0 - t) * y[1],
                ];
                let dx = dom.distance_to_boundary(x);
                let dy = dom.distance_to_boundary(y);
                let dz = dom.distance_to_boundary(z);
                assert!(
                    dz >= t * dx + (1.0 - t) * dy - 1e-10,
                    "concavity violated for {dom:?} at {x:?} {y:?} t={t}"
                );
                assert!(
                    (dx - dy).abs() <= dist(x, y) + 1e-10,
                    "lipschitz violated for {dom:?}"
                );
            }
        }
    }

    #[test]
    fn high_ridge_inside_cut_locus() {
        let h = 1.0 / 32.0;
        for dom in [disk(), stadium(), ellipse()] {
            let ridge = dom.high_ridge(h, h * h);
            let cut = dom.cut_locus(h);
            for p in &ridge {
                let d = cut
                    .iter()
                    .map(|q| dist(*p, *q))
                    .fold(f64::INFINITY, f64::min);
                assert!(d <= 2.0 * h, "ridge point {p:?} is {d} from the cut set");
            }
        }
    }
}

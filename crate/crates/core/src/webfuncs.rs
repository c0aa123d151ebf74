//! Closed-form web profiles and web functions: the exact-solution oracles
//! for the two Dirichlet problems on stadium-like domains, their gradients,
//! Serrin constants, P-function constants, radial solutions, and an analytic
//! supersolution certifier for web functions on arbitrary convex domains.

use crate::geometry::{ConvexDomain, GeometryError, Point, FOOT_ANGLE_TOL};
use crate::infinity_ops::{self, SamplerConfig};
use crate::C0;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WebError {
    #[error("profile argument {t} outside [0, {max}]")]
    OutOfRange { t: f64, max: f64 },
    #[error("radial profile requires r >= rho, got r = {r}, rho = {rho}")]
    BadRadial { r: f64, rho: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// φ(t) = c₀ [ρ^{4/3} − (ρ−t)^{4/3}], the −Δ∞u = 1 profile.
    NonNormalized,
    /// g(t) = ½ [ρ² − (ρ−t)²], the −Δ∞ᴺu = 1 profile.
    Normalized,
    /// g_r(t) = ½ [r² − (r−t)²] with r ≥ ρ, the inner radial comparison
    /// profile.
    Radial,
}

/// One-dimensional profile composed with the boundary distance to form a web
/// function.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WebProfile {
    pub kind: ProfileKind,
    pub rho: f64,
    /// Only meaningful for the Radial kind.
    pub r: f64,
}

impl WebProfile {
    pub fn non_normalized(rho: f64) -> Self {
        WebProfile {
            kind: ProfileKind::NonNormalized,
            rho,
            r: rho,
        }
    }

    pub fn normalized(rho: f64) -> Self {
        WebProfile {
            kind: ProfileKind::Normalized,
            rho,
            r: rho,
        }
    }

    pub fn radial(rho: f64, r: f64) -> Result<Self, WebError> {
        if r < rho {
            return Err(WebError::BadRadial { r, rho });
        }
        Ok(WebProfile {
            kind: ProfileKind::Radial,
            rho,
            r,
        })
    }

    fn t_max(&self) -> f64 {
        self.rho
    }

    /// Profile value at distance t from the boundary.
    pub fn value(&self, t: f64) -> Result<f64, WebError> {
        if t < 0.0 || t > self.t_max() + 1e-12 {
            return Err(WebError::OutOfRange {
                t,
                max: self.t_max(),
            });
        }
        let t = t.min(self.t_max());
        Ok(match self.kind {
            ProfileKind::NonNormalized => {
                // c₀ ρ^{4/3} (1 − (1 − t/ρ)^{4/3}) via expm1/ln_1p to avoid
                // cancellation for t ≪ ρ
                let w = -(4.0 / 3.0 * (-t / self.rho).ln_1p()).exp_m1();
                C0 * self.rho.powf(4.0 / 3.0) * w
            }
            // ½[ρ² − (ρ−t)²] = ½ t (2ρ − t), cancellation-free
            ProfileKind::Normalized => 0.5 * t * (2.0 * self.rho - t),
            ProfileKind::Radial => 0.5 * t * (2.0 * self.r - t),
        })
    }

    /// Profile derivative at t.
    pub fn derivative(&self, t: f64) -> Result<f64, WebError> {
        if t < 0.0 || t > self.t_max() + 1e-12 {
            return Err(WebError::OutOfRange {
                t,
                max: self.t_max(),
            });
        }
        let t = t.min(self.t_max());
        Ok(match self.kind {
            ProfileKind::NonNormalized => {
                // 3^{1/3} (ρ − t)^{1/3}
                (3.0 * (self.rho - t)).cbrt()
            }
            ProfileKind::Normalized => self.rho - t,
            ProfileKind::Radial => self.r - t,
        })
    }

    /// Second derivative at t (−∞ at t = ρ for the non-normalized profile).
    pub fn second_derivative(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::NonNormalized => {
                let s = self.rho - t;
                if s <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -(3.0 * s).powf(-2.0 / 3.0)
                }
            }
            ProfileKind::Normalized | ProfileKind::Radial => -1.0,
        }
    }

    /// Boundary gradient magnitude |∇φ| on ∂Ω, i.e. the derivative at t = 0.
    ///
    /// For the normalized profile this is ρ, the constant of the
    /// overdetermined characterization. For the non-normalized profile,
    /// differentiating the closed form gives (3ρ)^{1/3}; see the module
    /// docs of [`crate::harness`] for how the constant is surfaced in
    /// reports.
    pub fn serrin_constant(&self) -> f64 {
        match self.kind {
            ProfileKind::Normalized => self.rho,
            ProfileKind::NonNormalized => (3.0 * self.rho).cbrt(),
            ProfileKind::Radial => self.r,
        }
    }

    /// The constant value of the P-function on the web solution:
    /// λ = c₀ ρ^{4/3} (non-normalized) or λ_N = ρ²/2 (normalized); equals
    /// the maximum of the web function.
    pub fn p_constant(&self) -> f64 {
        match self.kind {
            ProfileKind::NonNormalized => C0 * self.rho.powf(4.0 / 3.0),
            ProfileKind::Normalized | ProfileKind::Radial => 0.5 * self.rho * self.rho,
        }
    }
}

/// Web function value φ(x) = profile(d_∂Ω(x)).
pub fn web_value(domain: &ConvexDomain, x: Point, p: &WebProfile) -> Result<f64, WebError> {
    let d = domain.distance_to_boundary(x).max(0.0);
    p.value(d)
}

/// Web function gradient g'(d)·ν where ν points inward from the unique
/// nearest foot. Returns the zero vector on the high ridge (g'(ρ) = 0) and
/// None on the cut locus away from the ridge (the gradient is undefined
/// there).
pub fn web_gradient(
    domain: &ConvexDomain,
    x: Point,
    p: &WebProfile,
) -> Result<Option<Point>, WebError> {
    let d = domain.distance_to_boundary(x);
    if d <= 0.0 {
        return Err(WebError::Geometry(GeometryError::NotInterior));
    }
    if d >= p.rho - 1e-12 {
        return Ok(Some([0.0, 0.0]));
    }
    let nb = domain.nearest_boundary_points(x, 1e-9)?;
    match nb.direction {
        Some(nu) => {
            let gp = p.derivative(d)?;
            Ok(Some([gp * nu[0], gp * nu[1]]))
        }
        None => Ok(None),
    }
}

/// Radial comparison solution g_r(ρ − |z|) on the ball B_ρ(0), r ≥ ρ.
pub fn radial_solution_value(r: f64, rho: f64, z: Point) -> Result<f64, WebError> {
    let zn = z[0].hypot(z[1]);
    if zn > rho + 1e-12 {
        return Err(WebError::OutOfRange { t: zn, max: rho });
    }
    let p = WebProfile::radial(rho, r)?;
    p.value((rho - zn).max(0.0))
}

/// Per-case tallies of the analytic supersolution check on web functions.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SupersolutionReport {
    /// High-ridge points (profile curvature bound / empty-jet cusp).
    pub case_ridge: usize,
    /// Points with a unique foot: one-dimensional profile inequality.
    pub case_smooth: usize,
    /// Cut-locus points off the ridge: empty sub-jet.
    pub case_cut: usize,
    /// Points where the sampled jet falsifier was also run as cross-check.
    pub falsifier_checks: usize,
    pub violations: Vec<Point>,
}

impl SupersolutionReport {
    pub fn total(&self) -> usize {
        self.case_ridge + self.case_smooth + self.case_cut
    }
}

/// Analytic supersolution certification of the web function profile∘d_∂Ω on
/// a convex domain, by the three-case split:
///
/// 1. high ridge: the normalized profile has g'' = −1 so any test function
///    touching from below has λ_min ≤ −1; the non-normalized profile has a
///    (4/3)-power cusp, so the sub-jet is empty and the condition is
///    vacuous;
/// 2. unique-foot points: the inequality reduces to the one-dimensional
///    −g'' ≥ 1 (normalized) or −(g')² g'' ≥ 1 (non-normalized), checked to
///    1e−10;
/// 3. cut locus off the ridge: the distance has a concave kink, the sub-jet
///    is empty, and the condition is vacuous (two separated feet verified).
///
/// A deterministic subset of samples is re-checked with the sampled jet
/// falsifier from `infinity_ops` as an independent cross-check.
pub fn certify_web_supersolution(
    domain: &ConvexDomain,
    profile: &WebProfile,
    n_samples: usize,
) -> Result<SupersolutionReport, WebError> {
    let (lo, hi) = crate::geometry::DistanceOracle::bounding_box(domain);
    let mut report = SupersolutionReport::default();
    let normalized = matches!(profile.kind, ProfileKind::Normalized);
    let ridge_tol = 1e-9;
    // structured samples first, so the ridge and cut-locus cases are
    // actually exercised (random samples never land on measure-zero sets)
    let mut structured: Vec<Point> = domain
        .high_ridge(profile.rho / 4.0, profile.rho / 100.0)
        .into_iter()
        .filter(|x| domain.distance_to_boundary(*x) >= profile.rho - ridge_tol)
        .collect();
    structured.extend(
        domain
            .cut_locus(profile.rho / 8.0)
            .into_iter()
            .filter(|x| {
                let d = domain.distance_to_boundary(*x);
                d > 1e-6
                    && d < profile.rho - ridge_tol
                    && domain
                        .nearest_boundary_points(*x, ridge_tol)
                        .map(|nb| nb.feet.len() >= 2)
                        .unwrap_or(false)
            }),
    );
    structured.truncate(n_samples / 2);
    // deterministic low-discrepancy (Halton-like) interior samples for the rest
    let mut accepted = 0usize;
    let mut k = 0u64;
    let mut queue = structured.into_iter();
    while accepted < n_samples {
        let x = match queue.next() {
            Some(x) => x,
            None => {
                k += 1;
                let x = [
                    lo[0] + (hi[0] - lo[0]) * halton(k, 2),
                    lo[1] + (hi[1] - lo[1]) * halton(k, 3),
                ];
                if domain.distance_to_boundary(x) <= 1e-6 {
                    continue;
                }
                x
            }
        };
        let d = domain.distance_to_boundary(x);
        accepted += 1;
        if d >= profile.rho - ridge_tol {
            // case 1: on the high ridge
            report.case_ridge += 1;
            let ok = if normalized {
                profile.second_derivative(profile.rho) <= -1.0 + 1e-12
            } else {
                // cusp: the incremental quotient (φ(ρ)−φ(ρ−s))/s² diverges,
                // so no quadratic touches from below
                let s = 1e-4 * profile.rho;
                let drop = profile.value(profile.rho)? - profile.value(profile.rho - s)?;
                drop / (s * s) > 10.0
            };
            if !ok {
                report.violations.push(x);
            }
            continue;
        }
        let nb = domain.nearest_boundary_points(x, ridge_tol)?;
        if nb.direction.is_some() {
            // case 2: smooth point, one-dimensional inequality
            report.case_smooth += 1;
            let gp = profile.derivative(d)?;
            let gpp = profile.second_derivative(d);
            let lhs = if normalized { -gpp } else { -gp * gp * gpp };
            if lhs < 1.0 - 1e-10 {
                report.violations.push(x);
            }
        } else {
            // case 3: cut locus off the ridge — verify the concave kink and
            // record the vacuous verdict
            report.case_cut += 1;
            let separated = nb.feet.len() >= 2 && {
                let u = [nb.feet[0][0] - x[0], nb.feet[0][1] - x[1]];
                let v = [nb.feet[1][0] - x[0], nb.feet[1][1] - x[1]];
                let nu = u[0].hypot(u[1]);
                let nv = v[0].hypot(v[1]);
                let cos = ((u[0] * v[0] + u[1] * v[1]) / (nu * nv)).clamp(-1.0, 1.0);
                cos.acos() >= FOOT_ANGLE_TOL
            };
            if !separated {
                report.violations.push(x);
            }
        }
        // independent sampled-falsifier cross-check on a sparse subset
        if accepted % (n_samples / 8).max(1) == 0 && d < profile.rho - 1e-3 {
            report.falsifier_checks += 1;
            let dom = domain.clone();
            let prof = *profile;
            let f = move |y: Point| web_value(&dom, y, &prof).unwrap_or(0.0);
            let dom2 = domain.clone();
            let grad = move |y: Point| web_gradient(&dom2, y, &prof).ok().flatten();
            let grad_ref: &dyn Fn(Point) -> Option<Point> = &grad;
            let cfg = SamplerConfig::with_r_touch((0.25 * d).min(0.05));
            let v = infinity_ops::certify_supersolution(&f, Some(grad_ref), x, normalized, &cfg);
            if !v.satisfied {
                report.violations.push(x);
            }
        }
    }
    Ok(report)
}

/// Deterministic radical-inverse sequence used for interior sampling.
fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

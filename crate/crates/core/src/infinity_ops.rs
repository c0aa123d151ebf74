//! The four infinity-Laplace operators on second-order jets, closed-form
//! 2×2 symmetric eigenvalues, and a deterministic viscosity sub/supersolution
//! falsifier built from quadratic touching functions.

use crate::geometry::Point;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OpsError {
    #[error("jet matrix is not symmetric: |x01 - x10| = {0}")]
    NotSymmetric(f64),
    #[error("zero gradient: the normalized operator is undefined")]
    ZeroGradient,
}

/// A second-order jet (gradient, symmetric Hessian candidate).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub p: Point,
    pub x: [[f64; 2]; 2],
}

impl Jet2 {
    pub fn new(p: Point, x: [[f64; 2]; 2]) -> Result<Self, OpsError> {
        let scale = frobenius(&x).max(1.0);
        let asym = (x[0][1] - x[1][0]).abs();
        if asym > 1e-14 * scale {
            return Err(OpsError::NotSymmetric(asym));
        }
        // store the symmetrized matrix so downstream formulas see an exact
        // symmetric input
        let m = 0.5 * (x[0][1] + x[1][0]);
        Ok(Jet2 {
            p,
            x: [[x[0][0], m], [m, x[1][1]]],
        })
    }
}

fn frobenius(x: &[[f64; 2]; 2]) -> f64 {
    (x[0][0] * x[0][0] + x[0][1] * x[0][1] + x[1][0] * x[1][0] + x[1][1] * x[1][1]).sqrt()
}

/// Relative threshold below which a gradient counts as zero for the
/// eigenvalue dichotomy of Δ∞^±.
fn gradient_is_zero(j: &Jet2) -> bool {
    let pn = j.p[0].hypot(j.p[1]);
    pn == 0.0 || pn <= 1e-14 * frobenius(&j.x)
}

/// Δ∞ φ = ⟨X p, p⟩.
pub fn infinity_laplacian(j: &Jet2) -> f64 {
    let xp = [
        j.x[0][0] * j.p[0] + j.x[0][1] * j.p[1],
        j.x[1][0] * j.p[0] + j.x[1][1] * j.p[1],
    ];
    xp[0] * j.p[0] + xp[1] * j.p[1]
}

/// Δ∞^N φ = ⟨X p, p⟩ / |p|²; errors on (numerically) zero gradients.
pub fn normalized_infinity_laplacian(j: &Jet2) -> Result<f64, OpsError> {
    if gradient_is_zero(j) {
        return Err(OpsError::ZeroGradient);
    }
    let p2 = j.p[0] * j.p[0] + j.p[1] * j.p[1];
    Ok(infinity_laplacian(j) / p2)
}

/// Eigenvalues (λ_min, λ_max) of a symmetric 2×2 matrix, closed form.
pub fn eigenvalues_sym2(x: &[[f64; 2]; 2]) -> (f64, f64) {
    let mean = 0.5 * (x[0][0] + x[1][1]);
    let half_diff = 0.5 * (x[0][0] - x[1][1]);
    let r = half_diff.hypot(x[0][1]);
    (mean - r, mean + r)
}

/// Δ∞^+: the normalized operator away from critical points, λ_max(X) at them.
pub fn delta_plus(j: &Jet2) -> f64 {
    if gradient_is_zero(j) {
        eigenvalues_sym2(&j.x).1
    } else {
        normalized_infinity_laplacian(j).unwrap()
    }
}

/// Δ∞^−: the normalized operator away from critical points, λ_min(X) at them.
pub fn delta_minus(j: &Jet2) -> f64 {
    if gradient_is_zero(j) {
        eigenvalues_sym2(&j.x).0
    } else {
        normalized_infinity_laplacian(j).unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    Subsolution,
    Supersolution,
}

/// Verdict of a viscosity sub/supersolution falsification search at a point.
#[derive(Clone, Debug)]
pub struct ViscosityVerdict {
    pub point: Point,
    pub kind: CheckKind,
    pub satisfied: bool,
    /// Minimum (supersolution) / maximum slack over touching jets:
    /// operator-side minus 1 for supersolutions, 1 minus operator-side for
    /// subsolutions. Positive margins mean the inequality held strictly.
    pub worst_margin: f64,
    /// The violating jet, when one was found.
    pub witness: Option<Jet2>,
    /// No quadratic in the search family touched f at the point: the test
    /// set is empty and the condition holds vacuously.
    pub empty_jet: bool,
}

/// Deterministic search family for the falsifier: quadratics
/// φ(y) = f(x) + ⟨p, y−x⟩ + ½⟨A(y−x), y−x⟩ with A from an eigenvalue ×
/// rotation lattice, touching verified on an angular/radial sample.
#[derive(Clone, Copy, Debug)]
pub struct SamplerConfig {
    /// Hessian eigenvalues range over [−lambda_max, lambda_max].
    pub lambda_max: f64,
    /// Lattice size per eigenvalue.
    pub n_eig: usize,
    /// Eigenvector angle lattice size over [0, π).
    pub n_angle: usize,
    /// Radius of the touching ball.
    pub r_touch: f64,
    /// Angular sample count on each touching circle.
    pub n_dir: usize,
    /// Radial sample count in (0, r_touch].
    pub n_rad: usize,
    /// Slack when comparing the quadratic against f (touching tolerance).
    pub touch_tol: f64,
    /// Slack on the operator inequality itself.
    pub margin_tol: f64,
}

impl SamplerConfig {
    pub fn with_r_touch(r_touch: f64) -> Self {
        SamplerConfig {
            lambda_max: 10.0,
            n_eig: 21,
            n_angle: 32,
            r_touch,
            n_dir: 16,
            n_rad: 4,
            touch_tol: 1e-12,
            margin_tol: 1e-9,
        }
    }
}

fn touch_points(x: Point, cfg: &SamplerConfig) -> Vec<Point> {
    let mut pts = Vec::with_capacity(cfg.n_dir * cfg.n_rad);
    for kr in 1..=cfg.n_rad {
        let r = cfg.r_touch * kr as f64 / cfg.n_rad as f64;
        for kd in 0..cfg.n_dir {
            let th = 2.0 * std::f64::consts::PI * kd as f64 / cfg.n_dir as f64;
            pts.push([x[0] + r * th.cos(), x[1] + r * th.sin()]);
        }
    }
    pts
}

/// Candidate gradients for the touching quadratics: the oracle gradient when
/// available, otherwise a hull of directional-difference estimates.
fn gradient_candidates(
    f: &dyn Fn(Point) -> f64,
    grad: Option<&dyn Fn(Point) -> Option<Point>>,
    x: Point,
    cfg: &SamplerConfig,
) -> Vec<Point> {
    if let Some(g) = grad {
        if let Some(p) = g(x) {
            return vec![p];
        }
    }
    // central directional differences at a fraction of the touching radius,
    // over the angle lattice, plus their mean
    let s = cfg.r_touch / 4.0;
    let mut cands = Vec::new();
    let mut mean = [0.0, 0.0];
    for kd in 0..8 {
        let th = std::f64::consts::PI * kd as f64 / 8.0;
        let e = [th.cos(), th.sin()];
        let d = (f([x[0] + s * e[0], x[1] + s * e[1]])
            - f([x[0] - s * e[0], x[1] - s * e[1]]))
            / (2.0 * s);
        let g = [d * e[0], d * e[1]];
        mean[0] += g[0] / 8.0;
        mean[1] += g[1] / 8.0;
        cands.push(g);
    }
    cands.push(mean);
    cands
}

fn run_certify(
    f: &dyn Fn(Point) -> f64,
    grad: Option<&dyn Fn(Point) -> Option<Point>>,
    x: Point,
    normalized: bool,
    kind: CheckKind,
    cfg: &SamplerConfig,
) -> ViscosityVerdict {
    let fx = f(x);
    let mut pts = touch_points(x, cfg);
    let pcands = gradient_candidates(f, grad, x, cfg);
    // The operator only reads the Hessian along the gradient direction, so
    // the touching test must sample that direction explicitly: the angular
    // lattice alone lets a candidate hide excess curvature between rays.
    for p in &pcands {
        let n = p[0].hypot(p[1]);
        if n > 0.0 {
            let e = [p[0] / n, p[1] / n];
            for kr in 1..=cfg.n_rad {
                let r = cfg.r_touch * kr as f64 / cfg.n_rad as f64;
                pts.push([x[0] + r * e[0], x[1] + r * e[1]]);
                pts.push([x[0] - r * e[0], x[1] - r * e[1]]);
            }
        }
    }
    let fvals: Vec<f64> = pts.iter().map(|y| f(*y)).collect();

    let mut satisfied = true;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut touched_any = false;

    let mut eigs = Vec::with_capacity(cfg.n_eig);
    for k in 0..cfg.n_eig {
        let t = if cfg.n_eig == 1 {
            0.0
        } else {
            -1.0 + 2.0 * k as f64 / (cfg.n_eig - 1) as f64
        };
        eigs.push(t * cfg.lambda_max);
    }

    for p in &pcands {
        for ka in 0..cfg.n_angle {
            let th = std::f64::consts::PI * ka as f64 / cfg.n_angle as f64;
            let (s, c) = th.sin_cos();
            for &l1 in &eigs {
                for &l2 in &eigs {
                    // A = R diag(l1, l2) Rᵀ
                    let a00 = l1 * c * c + l2 * s * s;
                    let a11 = l1 * s * s + l2 * c * c;
                    let a01 = (l1 - l2) * s * c;
                    // touching test over the sample ball
                    let mut touches = true;
                    for (y, fy) in pts.iter().zip(fvals.iter()) {
                        let d = [y[0] - x[0], y[1] - x[1]];
                        let q = fx
                            + p[0] * d[0]
                            + p[1] * d[1]
                            + 0.5 * (a00 * d[0] * d[0] + 2.0 * a01 * d[0] * d[1] + a11 * d[1] * d[1]);
                        let ok = match kind {
                            // supersolution: φ touches f from below
                            CheckKind::Supersolution => q <= fy + cfg.touch_tol,
                            // subsolution: φ touches f from above
                            CheckKind::Subsolution => q >= fy - cfg.touch_tol,
                        };
                        if !ok {
                            touches = false;
                            break;
                        }
                    }
                    if !touches {
                        continue;
                    }
                    touched_any = true;
                    let jet = Jet2::new(*p, [[a00, a01], [a01, a11]]).unwrap();
                    let margin = match (kind, normalized) {
                        (CheckKind::Supersolution, true) => -delta_minus(&jet) - 1.0,
                        (CheckKind::Subsolution, true) => 1.0 + delta_plus(&jet),
                        (CheckKind::Supersolution, false) => -infinity_laplacian(&jet) - 1.0,
                        (CheckKind::Subsolution, false) => {
                            // the non-normalized subsolution test exempts
                            // zero-gradient test functions
                            if gradient_is_zero(&jet) {
                                continue;
                            }
                            1.0 + infinity_laplacian(&jet)
                        }
                    };
                    if margin < worst {
                        worst = margin;
                        if margin < -cfg.margin_tol {
                            satisfied = false;
                            witness = Some(jet);
                        }
                    }
                }
            }
        }
    }

    ViscosityVerdict {
        point: x,
        kind,
        satisfied,
        worst_margin: if touched_any { worst } else { f64::INFINITY },
        witness,
        empty_jet: !touched_any,
    }
}

/// Falsification search for the supersolution inequality at x:
/// every touching-from-below quadratic in the family must satisfy
/// −Δ∞^−(jet) ≥ 1 (normalized) or −Δ∞(jet) ≥ 1 (non-normalized).
/// A "satisfied" verdict certifies only the sampled family.
pub fn certify_supersolution(
    f: &dyn Fn(Point) -> f64,
    grad: Option<&dyn Fn(Point) -> Option<Point>>,
    x: Point,
    normalized: bool,
    cfg: &SamplerConfig,
) -> ViscosityVerdict {
    run_certify(f, grad, x, normalized, CheckKind::Supersolution, cfg)
}

/// Mirror of [`certify_supersolution`] with quadratics touching from above
/// and the −Δ∞^+(jet) ≤ 1 (resp. −Δ∞ ≤ 1) test.
pub fn certify_subsolution(
    f: &dyn Fn(Point) -> f64,
    grad: Option<&dyn Fn(Point) -> Option<Point>>,
    x: Point,
    normalized: bool,
    cfg: &SamplerConfig,
) -> ViscosityVerdict {
    run_certify(f, grad, x, normalized, CheckKind::Subsolution, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jet(p: Point, x: [[f64; 2]; 2]) -> Jet2 {
        Jet2::new(p, x).unwrap()
    }

    #[test]
    fn infinity_laplacian_basics() {
        assert_eq!(
            infinity_laplacian(&jet([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])),
            1.0
        );
        assert_eq!(
            infinity_laplacian(&jet([0.0, 0.0], [[3.0, 1.0], [1.0, -2.0]])),
            0.0
        );
        // φ = |x|²/2 at (1,2): p = (1,2), X = I, ⟨p,p⟩ = 5
        assert_eq!(
            infinity_laplacian(&jet([1.0, 2.0], [[1.0, 0.0], [0.0, 1.0]])),
            5.0
        );
    }

    #[test]
    fn normalized_depends_only_on_direction() {
        let v = normalized_infinity_laplacian(&jet([3.0, 0.0], [[-1.0, 0.0], [0.0, 7.0]]))
            .unwrap();
        assert_eq!(v, -1.0);
        let v = normalized_infinity_laplacian(&jet([1.0, 1.0], [[1.0, 0.0], [0.0, 1.0]]))
            .unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!(matches!(
            normalized_infinity_laplacian(&jet([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])),
            Err(OpsError::ZeroGradient)
        ));
    }

    #[test]
    fn dichotomy_at_critical_points() {
        let j = jet([0.0, 0.0], [[-1.0, 0.0], [0.0, -1.0]]);
        assert_eq!(delta_plus(&j), -1.0); // so −Δ⁺ = 1
        let j = jet([0.0, 0.0], [[2.0, 0.0], [0.0, -3.0]]);
        assert_eq!(delta_plus(&j), 2.0);
        assert_eq!(delta_minus(&j), -3.0);
        let j = jet([1.0, 0.0], [[-1.0, 0.0], [0.0, 5.0]]);
        assert_eq!(delta_plus(&j), -1.0);
        assert_eq!(delta_minus(&j), -1.0);
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        assert!(Jet2::new([1.0, 0.0], [[1.0, 0.5], [0.2, 1.0]]).is_err());
    }

    #[test]
    fn supersolution_certificate_on_concave_quadratic() {
        // f(y) = −|y−x|²: −Δ⁻ at x is −λ_min(−2I) = 2 ≥ 1
        let x = [0.3, -0.2];
        let f = move |y: Point| -((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2));
        let cfg = SamplerConfig::with_r_touch(0.1);
        let v = certify_supersolution(&f, None, x, true, &cfg);
        assert!(v.satisfied, "margin {}", v.worst_margin);
        assert!(!v.empty_jet);
    }

    #[test]
    fn subsolution_violation_is_witnessed() {
        // f(y) = −10|y−x|²: −Δ⁺ at x is 20 > 1, so f is not a subsolution
        let x = [0.0, 0.0];
        let f = move |y: Point| -10.0 * (y[0] * y[0] + y[1] * y[1]);
        let cfg = SamplerConfig::with_r_touch(0.1);
        let v = certify_subsolution(&f, None, x, true, &cfg);
        assert!(!v.satisfied);
        assert!(v.witness.is_some());
    }

    #[test]
    fn random_jet_invariants() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100_000 {
            let p = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let a = rng.gen_range(-5.0..5.0);
            let b = rng.gen_range(-5.0..5.0);
            let d = rng.gen_range(-5.0..5.0);
            let x = [[a, b], [b, d]];
            let j = jet(p, x);
            let (lmin, lmax) = eigenvalues_sym2(&x);
            // eigenvalues solve the characteristic polynomial
            for l in [lmin, lmax] {
                let det = (a - l) * (d - l) - b * b;
                assert!(det.abs() < 1e-10, "char poly residual {det}");
            }
            assert!(lmin <= lmax + 1e-14);
            assert!(delta_minus(&j) <= delta_plus(&j) + 1e-14);
            let pn = p[0].hypot(p[1]);
            if pn > 1e-12 {
                assert!((delta_plus(&j) - delta_minus(&j)).abs() < 1e-12);
                // scaling invariance of the normalized operator
                let c = rng.gen_range(0.1..10.0);
                let jc = jet([c * p[0], c * p[1]], x);
                let v1 = normalized_infinity_laplacian(&j).unwrap();
                let v2 = normalized_infinity_laplacian(&jc).unwrap();
                assert!((v1 - v2).abs() <= 1e-12 * v1.abs().max(1.0));
                // consistency with the raw operator
                let raw = infinity_laplacian(&j);
                assert!((raw - pn * pn * v1).abs() <= 1e-12 * raw.abs().max(1.0));
                // the normalized value is sandwiched by the eigenvalues
                assert!(v1 >= lmin - 1e-12 && v1 <= lmax + 1e-12);
            }
        }
    }
}

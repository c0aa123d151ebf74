//! Read-only diagnostics over solved fields: P-functions and their bounds,
//! gradient-flow trajectories, the sup-convolution pipeline, boundary
//! Neumann statistics, level-set Serrin scans, and a C^{1,1} trend proxy.
//!
//! The P-function P = |∇u|⁴/4 + u (non-normalized) or P_N = |∇u|²/2 + u
//! (normalized) is constant exactly when the solution is the web function;
//! its nodal spread, its bounds, and its behavior along gradient flows are
//! the quantitative signals the rest of the crate is built to measure.

use crate::geometry::{DistanceOracle, LevelSetDomain, Point};
use crate::solver::{
    build_grid, discrete_gradient, lipschitz_constant, solve_dirichlet_nonnormalized_from,
    solve_dirichlet_normalized_from, ProblemKind, ScalarField, SolverConfig, SolverError,
};
use crate::webfuncs::WebProfile;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("flow start {0:?} is not an interior point")]
    StartNotInterior(Point),
    #[error("flow left the grid at {0:?}")]
    LeftGrid(Point),
    #[error("diagnostic requires a normalized-kind field")]
    WrongKind,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// min / max / mean / (max − min) of a sample set.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub spread: f64,
    pub count: usize,
}

pub fn summarize(values: impl IntoIterator<Item = f64>) -> Summary {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
        count += 1;
    }
    if count == 0 {
        return Summary {
            min: f64::NAN,
            max: f64::NAN,
            mean: f64::NAN,
            spread: f64::NAN,
            count: 0,
        };
    }
    Summary {
        min,
        max,
        mean: sum / count as f64,
        spread: max - min,
        count,
    }
}

// ---------------------------------------------------------------------------
// P-function
// ---------------------------------------------------------------------------

/// Nodal P-function with its reference constant λ (the value P takes when
/// the field is the web solution: c₀ρ^{4/3} non-normalized, ρ²/2
/// normalized).
#[derive(Clone, Debug)]
pub struct PField {
    pub grid: Arc<crate::solver::Grid2D>,
    pub values: Vec<f64>,
    pub kind: ProblemKind,
    pub lambda: f64,
    pub summary: Summary,
}

impl PField {
    /// Summary over nodes at distance > `collar` from the boundary, where
    /// the one-sided differences of boundary-adjacent nodes don't pollute
    /// the constancy measurement.
    pub fn summary_excluding_collar(&self, collar: f64) -> Summary {
        summarize(
            (0..self.values.len())
                .filter(|&n| self.grid.dist[n] > collar)
                .map(|n| self.values[n]),
        )
    }
}

fn p_of(kind: ProblemKind, grad_norm: f64, u: f64) -> f64 {
    match kind {
        ProblemKind::Normalized => 0.5 * grad_norm * grad_norm + u,
        ProblemKind::NonNormalized => 0.25 * grad_norm.powi(4) + u,
    }
}

pub fn p_function(field: &ScalarField, rho: f64) -> PField {
    let profile = match field.kind {
        ProblemKind::Normalized => WebProfile::normalized(rho),
        ProblemKind::NonNormalized => WebProfile::non_normalized(rho),
    };
    let grads = discrete_gradient(field);
    let values: Vec<f64> = (0..field.values.len())
        .map(|n| {
            let g = grads[n][0].hypot(grads[n][1]);
            p_of(field.kind, g, field.values[n])
        })
        .collect();
    let summary = summarize(values.iter().cloned());
    PField {
        grid: field.grid.clone(),
        values,
        kind: field.kind,
        lambda: profile.p_constant(),
        summary,
    }
}

// ---------------------------------------------------------------------------
// P bounds
// ---------------------------------------------------------------------------

/// One-sided boundary gradient estimates: for each boundary-adjacent node,
/// the largest slope u(x)/a over its cut arms (the directional derivative
/// toward the boundary, maximal along the direction best aligned with the
/// inward normal).
fn one_sided_boundary_slopes(field: &ScalarField) -> Vec<(usize, f64)> {
    let g = &field.grid;
    g.boundary_adjacent()
        .into_iter()
        .map(|n| {
            let mut best = 0.0f64;
            for k in 0..8 {
                if g.nbr_plus[n][k] < 0 {
                    best = best.max(field.values[n] / g.arm_plus[n][k]);
                }
                if g.nbr_minus[n][k] < 0 {
                    best = best.max(field.values[n] / g.arm_minus[n][k]);
                }
            }
            (n, best)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PBoundsReport {
    pub pass: bool,
    /// min over the boundary of the gradient term |∇u|⁴/4 (or |∇u|²/2)
    pub lower: f64,
    /// max of u
    pub upper: f64,
    /// slack δ(h) = 5h·Lip
    pub delta: f64,
    pub violations: usize,
    pub worst_node: Option<usize>,
    pub worst_excess: f64,
}

/// Verify min_∂Ω |∇u|⁴/4 − δ(h) ≤ P(x) ≤ max u + δ(h) at every node (with
/// |∇u|²/2 in the normalized case).
pub fn p_bounds_check(field: &ScalarField, p: &PField) -> PBoundsReport {
    let lip = lipschitz_constant(field);
    let delta = 5.0 * field.grid.h * lip;
    let gmin = one_sided_boundary_slopes(field)
        .into_iter()
        .map(|(_, s)| s)
        .fold(f64::INFINITY, f64::min);
    let lower = p_of(field.kind, gmin, 0.0);
    let upper = field.max_value();
    let mut violations = 0usize;
    let mut worst_node = None;
    let mut worst_excess = 0.0f64;
    for (n, &pv) in p.values.iter().enumerate() {
        let excess = (lower - delta - pv).max(pv - upper - delta);
        if excess > 0.0 {
            violations += 1;
            if excess > worst_excess {
                worst_excess = excess;
                worst_node = Some(n);
            }
        }
    }
    PBoundsReport {
        pass: violations == 0,
        lower,
        upper,
        delta,
        violations,
        worst_node,
        worst_excess,
    }
}

/// Nodal residual |½|∇u|² + u − λ| of the Hamiltonian identity satisfied by
/// the normalized web solution.
pub fn hamiltonian_residual(field: &ScalarField, lambda: f64) -> Result<Vec<f64>, DiagnosticsError> {
    if field.kind != ProblemKind::Normalized {
        return Err(DiagnosticsError::WrongKind);
    }
    let grads = discrete_gradient(field);
    Ok((0..field.values.len())
        .map(|n| {
            let g2 = grads[n][0] * grads[n][0] + grads[n][1] * grads[n][1];
            (0.5 * g2 + field.values[n] - lambda).abs()
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Gradient flow
// ---------------------------------------------------------------------------

/// Dense nodal gradient of a field, extended to non-interior lattice nodes
/// from the nearest interior lattice neighbor so bilinear interpolation
/// stays usable in boundary cells.
pub struct FlowContext {
    grid: Arc<crate::solver::Grid2D>,
    u: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    kind: ProblemKind,
}

impl FlowContext {
    pub fn new(field: &ScalarField) -> Self {
        let g = &field.grid;
        let grads = discrete_gradient(field);
        let mut u = vec![0.0; g.nx * g.ny];
        let mut gx = vec![f64::NAN; g.nx * g.ny];
        let mut gy = vec![f64::NAN; g.nx * g.ny];
        for (n, &(i, j)) in g.nodes.iter().enumerate() {
            u[i * g.ny + j] = field.values[n];
            gx[i * g.ny + j] = grads[n][0];
            gy[i * g.ny + j] = grads[n][1];
        }
        // fill exterior lattice nodes from the nearest interior neighbor in
        // an expanding ring (a few rings suffice: exterior nodes only matter
        // within one cell of the boundary)
        for ring in 0..3 {
            let _ = ring;
            let mut fx = gx.clone();
            let mut fy = gy.clone();
            for i in 0..g.nx {
                for j in 0..g.ny {
                    if !gx[i * g.ny + j].is_nan() {
                        continue;
                    }
                    let mut sx = 0.0;
                    let mut sy = 0.0;
                    let mut cnt = 0usize;
                    for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                        let ii = i as i64 + di;
                        let jj = j as i64 + dj;
                        if ii < 0 || jj < 0 || ii as usize >= g.nx || jj as usize >= g.ny {
                            continue;
                        }
                        let v = gx[ii as usize * g.ny + jj as usize];
                        if !v.is_nan() {
                            sx += v;
                            sy += gy[ii as usize * g.ny + jj as usize];
                            cnt += 1;
                        }
                    }
                    if cnt > 0 {
                        fx[i * g.ny + j] = sx / cnt as f64;
                        fy[i * g.ny + j] = sy / cnt as f64;
                    }
                }
            }
            gx = fx;
            gy = fy;
        }
        for v in gx.iter_mut().chain(gy.iter_mut()) {
            if v.is_nan() {
                *v = 0.0;
            }
        }
        FlowContext {
            grid: g.clone(),
            u,
            gx,
            gy,
            kind: field.kind,
        }
    }

    fn bilinear(&self, vals: &[f64], x: Point) -> Option<f64> {
        let g = &self.grid;
        let fx = (x[0] - g.origin[0]) / g.h;
        let fy = (x[1] - g.origin[1]) / g.h;
        if fx < 0.0 || fy < 0.0 || fx > (g.nx - 1) as f64 || fy > (g.ny - 1) as f64 {
            return None;
        }
        let i = (fx.floor() as usize).min(g.nx - 2);
        let j = (fy.floor() as usize).min(g.ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let at = |i: usize, j: usize| vals[i * g.ny + j];
        Some(
            (1.0 - tx) * (1.0 - ty) * at(i, j)
                + tx * (1.0 - ty) * at(i + 1, j)
                + tx * ty * at(i + 1, j + 1)
                + (1.0 - tx) * ty * at(i, j + 1),
        )
    }

    pub fn gradient(&self, x: Point) -> Option<Point> {
        Some([self.bilinear(&self.gx, x)?, self.bilinear(&self.gy, x)?])
    }

    pub fn value(&self, x: Point) -> Option<f64> {
        self.bilinear(&self.u, x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowTermination {
    /// |∇u| fell to the gradient floor: the flow reached the neighborhood
    /// of the argmax set.
    EnteredRidge,
    LeftGrid,
    MaxTime,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlowStep {
    pub t: f64,
    pub x: Point,
    pub u: f64,
    pub grad_norm: f64,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowTrajectory {
    pub start: Point,
    pub dt: f64,
    pub steps: Vec<FlowStep>,
    pub termination: FlowTermination,
}

impl FlowTrajectory {
    pub fn end(&self) -> Point {
        self.steps.last().map(|s| s.x).unwrap_or(self.start)
    }
}

/// Classical RK4 integration of ẋ = ∇u(x) with bilinear gradient
/// interpolation; stops when |∇u| ≤ `gradient_floor` (default h) or
/// t ≥ `t_max`. The field value must be nondecreasing along every step (up
/// to 1e−8 slack); a decrease marks an integration fault and is asserted
/// downstream.
pub fn gradient_flow(
    ctx: &FlowContext,
    x0: Point,
    dt: f64,
    t_max: f64,
    gradient_floor: f64,
) -> Result<FlowTrajectory, DiagnosticsError> {
    if ctx.grid.dist_at(x0).is_none() {
        return Err(DiagnosticsError::StartNotInterior(x0));
    }
    let mut x = x0;
    let mut t = 0.0;
    let mut steps = Vec::new();
    let record = |steps: &mut Vec<FlowStep>, t: f64, x: Point| -> Option<f64> {
        let grad = ctx.gradient(x)?;
        let u = ctx.value(x)?;
        let gn = grad[0].hypot(grad[1]);
        steps.push(FlowStep {
            t,
            x,
            u,
            grad_norm: gn,
            p: p_of(ctx.kind, gn, u),
        });
        Some(gn)
    };
    let mut gn = record(&mut steps, t, x).ok_or(DiagnosticsError::LeftGrid(x0))?;
    let termination = loop {
        if gn <= gradient_floor {
            break FlowTermination::EnteredRidge;
        }
        if t >= t_max {
            break FlowTermination::MaxTime;
        }
        let f = |y: Point| ctx.gradient(y);
        let k1 = match f(x) {
            Some(v) => v,
            None => break FlowTermination::LeftGrid,
        };
        let half = |a: Point, k: Point, s: f64| [a[0] + s * k[0], a[1] + s * k[1]];
        let k2 = match f(half(x, k1, dt / 2.0)) {
            Some(v) => v,
            None => break FlowTermination::LeftGrid,
        };
        let k3 = match f(half(x, k2, dt / 2.0)) {
            Some(v) => v,
            None => break FlowTermination::LeftGrid,
        };
        let k4 = match f(half(x, k3, dt)) {
            Some(v) => v,
            None => break FlowTermination::LeftGrid,
        };
        x = [
            x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        t += dt;
        gn = match record(&mut steps, t, x) {
            Some(v) => v,
            None => break FlowTermination::LeftGrid,
        };
    };
    Ok(FlowTrajectory {
        start: x0,
        dt,
        steps,
        termination,
    })
}

impl crate::solver::Grid2D {
    /// Signed distance at the nearest lattice node if that node is
    /// interior.
    fn dist_at(&self, x: Point) -> Option<f64> {
        let i = ((x[0] - self.origin[0]) / self.h).round() as i64;
        let j = ((x[1] - self.origin[1]) / self.h).round() as i64;
        self.index_at(i, j).map(|n| self.dist[n])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowLawReport {
    /// max |P(X_k) − λ| along the flow
    pub max_p_deviation: f64,
    /// sup residual of u(X_k) against m·e^{−2t} + λ(1 − e^{−2t}), m = u(X₀)
    pub ode_residual: f64,
    /// largest single-step decrease of u (should be ≤ 1e−8)
    pub worst_decrease: f64,
}

/// Check the exact value law u(X(t)) = m·e^{−2t} + λ(1−e^{−2t}) that the
/// normalized web solution satisfies along its own gradient flow.
pub fn p_along_flow(traj: &FlowTrajectory, lambda: f64) -> FlowLawReport {
    let m = traj.steps.first().map(|s| s.u).unwrap_or(0.0);
    let mut max_p_dev = 0.0f64;
    let mut ode_res = 0.0f64;
    let mut worst_dec = 0.0f64;
    let mut prev_u = m;
    for s in &traj.steps {
        max_p_dev = max_p_dev.max((s.p - lambda).abs());
        let law = m * (-2.0 * s.t).exp() + lambda * (1.0 - (-2.0 * s.t).exp());
        ode_res = ode_res.max((s.u - law).abs());
        worst_dec = worst_dec.max(prev_u - s.u);
        prev_u = s.u;
    }
    FlowLawReport {
        max_p_deviation: max_p_dev,
        ode_residual: ode_res,
        worst_decrease: worst_dec,
    }
}

// ---------------------------------------------------------------------------
// Sup-convolution
// ---------------------------------------------------------------------------

/// u^ε(x) = max_y {u(y) − |x−y|²/(2ε)} over lattice nodes within the reach
/// window εR (u extended by 0 outside the domain), with the derived node
/// masks and the approximate P-function of the regularized field.
#[derive(Clone, Debug)]
pub struct SupConvBundle {
    pub eps: f64,
    /// measured Lipschitz constant R of the zero-extension
    pub lip: f64,
    /// window radius εR
    pub reach: f64,
    /// the regularized field on the original grid
    pub u_eps: ScalarField,
    /// U_ε = {u > ε}
    pub u_mask: Vec<bool>,
    /// A_ε = nodes of U_ε at distance > εR from its complement
    pub a_mask: Vec<bool>,
    /// max of u^ε over ∂A_ε (NaN when A_ε is empty)
    pub m_eps: f64,
    /// Ω_ε = {x ∈ A_ε : u^ε(x) > m_ε}
    pub omega_mask: Vec<bool>,
    pub p_eps: PField,
    /// ε was so large that A_ε came out empty
    pub empty: bool,
}

pub fn sup_convolution(field: &ScalarField, eps: f64, rho: f64) -> SupConvBundle {
    let g = &field.grid;
    let n = g.interior_count();
    let lip = lipschitz_constant(field);
    let reach = eps * lip;
    let w = ((reach / g.h).ceil() as i64 + 1).min(g.nx.max(g.ny) as i64);
    // value at lattice coordinates, 0 outside the interior node set
    let val = |i: i64, j: i64| -> f64 {
        g.index_at(i, j).map(|m| field.values[m]).unwrap_or(0.0)
    };
    let mut u_eps = vec![0.0f64; n];
    for (node, &(i, j)) in g.nodes.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for di in -w..=w {
            for dj in -w..=w {
                let r2 = ((di * di + dj * dj) as f64) * g.h * g.h;
                if r2 > reach * reach + 1e-15 {
                    continue;
                }
                let cand = val(i as i64 + di, j as i64 + dj) - r2 / (2.0 * eps);
                if cand > best {
                    best = cand;
                }
            }
        }
        u_eps[node] = best;
    }
    let u_mask: Vec<bool> = field.values.iter().map(|&v| v > eps).collect();
    // A_ε: lattice distance to the complement of U_ε exceeds εR
    let in_u = |i: i64, j: i64| -> bool {
        g.index_at(i, j).map(|m| u_mask[m]).unwrap_or(false)
    };
    let a_mask: Vec<bool> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(node, &(i, j))| {
            if !u_mask[node] {
                return false;
            }
            for di in -w..=w {
                for dj in -w..=w {
                    let r2 = ((di * di + dj * dj) as f64) * g.h * g.h;
                    if r2 > reach * reach + 1e-15 {
                        continue;
                    }
                    if !in_u(i as i64 + di, j as i64 + dj) {
                        return false;
                    }
                }
            }
            true
        })
        .collect();
    let empty = !a_mask.iter().any(|&b| b);
    let in_a = |i: i64, j: i64| -> bool {
        g.index_at(i, j).map(|m| a_mask[m]).unwrap_or(false)
    };
    // ∂A_ε: A_ε nodes with a 4-neighbor outside A_ε
    let mut m_eps = f64::NAN;
    if !empty {
        m_eps = f64::NEG_INFINITY;
        for (node, &(i, j)) in g.nodes.iter().enumerate() {
            if !a_mask[node] {
                continue;
            }
            let boundary = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(di, dj)| !in_a(i as i64 + di, j as i64 + dj));
            if boundary {
                m_eps = m_eps.max(u_eps[node]);
            }
        }
        if !m_eps.is_finite() {
            // A_ε has no discrete boundary (fills the grid); fall back to 0
            m_eps = 0.0;
        }
    }
    let omega_mask: Vec<bool> = (0..n)
        .map(|node| !empty && a_mask[node] && u_eps[node] > m_eps)
        .collect();
    let u_eps_field = ScalarField {
        grid: field.grid.clone(),
        values: u_eps,
        kind: field.kind,
        iterations: 0,
        final_change: 0.0,
    };
    let p_eps = p_function(&u_eps_field, rho);
    SupConvBundle {
        eps,
        lip,
        reach,
        u_eps: u_eps_field,
        u_mask,
        a_mask,
        m_eps,
        omega_mask,
        p_eps,
        empty,
    }
}

impl SupConvBundle {
    /// Worst (most negative) second central difference of u^ε along the
    /// axes over nodes interior to A_ε; semiconvexity of the
    /// sup-convolution demands ≥ −h²/ε (up to roundoff).
    pub fn worst_second_difference(&self) -> f64 {
        let g = &self.u_eps.grid;
        let mut worst = f64::INFINITY;
        for (node, &(i, j)) in g.nodes.iter().enumerate() {
            if !self.a_mask[node] {
                continue;
            }
            for (di, dj) in [(1i64, 0i64), (0, 1)] {
                let p = g.index_at(i as i64 + di, j as i64 + dj);
                let m = g.index_at(i as i64 - di, j as i64 - dj);
                if let (Some(p), Some(m)) = (p, m) {
                    if self.a_mask[p] && self.a_mask[m] {
                        let dd = self.u_eps.values[p] + self.u_eps.values[m]
                            - 2.0 * self.u_eps.values[node];
                        worst = worst.min(dd);
                    }
                }
            }
        }
        worst
    }

    /// Nodes of Ω_ε adjacent (4-neighborhood) to its complement — the
    /// discrete ∂Ω_ε, used as flow start set.
    pub fn omega_boundary_nodes(&self) -> Vec<usize> {
        let g = &self.u_eps.grid;
        let in_om = |i: i64, j: i64| -> bool {
            g.index_at(i, j).map(|m| self.omega_mask[m]).unwrap_or(false)
        };
        g.nodes
            .iter()
            .enumerate()
            .filter(|&(node, &(i, j))| {
                self.omega_mask[node]
                    && [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
                        .iter()
                        .any(|&(di, dj)| !in_om(i as i64 + di, j as i64 + dj))
            })
            .map(|(node, _)| node)
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowMonotonicityReport {
    pub starts: usize,
    pub violating: usize,
    pub violation_fraction: f64,
    pub pass: bool,
}

/// Integrate the gradient flow of u^ε from up to `n_starts` points on the
/// discrete ∂Ω_ε and check that P_ε is nondecreasing along each trajectory
/// within slack 1e−6 + 5h per unit time. The underlying statement holds for
/// a.e. start, so up to 1% violating trajectories pass.
pub fn p_eps_flow_monotonicity(
    bundle: &SupConvBundle,
    n_starts: usize,
    dt: f64,
    t_max: f64,
) -> FlowMonotonicityReport {
    let g = &bundle.u_eps.grid;
    let h = g.h;
    let ctx = FlowContext::new(&bundle.u_eps);
    let mut nodes = bundle.omega_boundary_nodes();
    if nodes.len() > n_starts && n_starts > 0 {
        let stride = nodes.len() as f64 / n_starts as f64;
        nodes = (0..n_starts)
            .map(|k| nodes[(k as f64 * stride) as usize])
            .collect();
    }
    let slack_rate = 5.0 * h;
    let mut violating = 0usize;
    for &node in &nodes {
        let x0 = g.node_point(node);
        let traj = match gradient_flow(&ctx, x0, dt, t_max, h) {
            Ok(t) => t,
            Err(_) => {
                violating += 1;
                continue;
            }
        };
        // P(t_k) ≥ max_{j<k} P(t_j) − (1e−6 + rate·(t_k−t_j)); with the
        // affine slack this reduces to a running max of P_j + rate·t_j
        let mut running = f64::NEG_INFINITY;
        let mut bad = false;
        for s in &traj.steps {
            if s.p + slack_rate * s.t + 1e-6 < running {
                bad = true;
                break;
            }
            running = running.max(s.p + slack_rate * s.t);
        }
        if bad {
            violating += 1;
        }
    }
    let frac = if nodes.is_empty() {
        0.0
    } else {
        violating as f64 / nodes.len() as f64
    };
    FlowMonotonicityReport {
        starts: nodes.len(),
        violating,
        violation_fraction: frac,
        pass: frac <= 0.01,
    }
}

// ---------------------------------------------------------------------------
// Boundary Neumann statistics
// ---------------------------------------------------------------------------

/// |∇u| transported to the boundary from each boundary-adjacent node. The
/// nodal gradient comes from the two-sided cut differences; the transport
/// uses the equation itself along the inward normal: the normalized problem
/// gives d|∇u|/ds = −1 along the gradient streamline, so the boundary value
/// is |∇u|(x) + d(x); the non-normalized problem gives d(|∇u|³)/ds = −3,
/// so the boundary value is (|∇u|³(x) + 3d(x))^{1/3}.
pub fn boundary_gradient_stats(field: &ScalarField) -> Summary {
    let grads = discrete_gradient(field);
    let g = &field.grid;
    let h = g.h;
    let transported = |n: usize| {
        let gn = grads[n][0].hypot(grads[n][1]);
        let d = g.dist[n];
        match field.kind {
            ProblemKind::Normalized => gn + d,
            ProblemKind::NonNormalized => (gn.powi(3) + 3.0 * d).cbrt(),
        }
    };
    // Transport from nodes at depth 2h..4h: nodes closer to the boundary
    // have cut stencil arms whose gradient estimates amplify the solve
    // error by 1/h, which dominates the spread.
    let band: Vec<usize> = (0..field.values.len())
        .filter(|&n| g.dist[n] > 2.0 * h && g.dist[n] <= 4.0 * h)
        .collect();
    if band.is_empty() {
        summarize(g.boundary_adjacent().into_iter().map(transported))
    } else {
        summarize(band.into_iter().map(transported))
    }
}

// ---------------------------------------------------------------------------
// Level-set Serrin scan
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct LevelReport {
    pub m: f64,
    /// the Neumann value √(2(μ−m)) forced on ∂{u > m}
    pub target: f64,
    pub grad_summary: Summary,
    /// max |(|∇u| at a boundary sample) − target|
    pub mismatch: f64,
    pub skipped_empty: bool,
}

/// For each level m: extract Ω_m = {u > m}, measure |∇u| along the
/// extracted boundary polyline, and compare with the value √(2(μ−m))
/// (μ = max u) that the level-set truncation μ−... of a normalized solution
/// must attain there.
pub fn level_set_serrin_scan(
    field: &ScalarField,
    levels: &[f64],
) -> Result<Vec<LevelReport>, DiagnosticsError> {
    if field.kind != ProblemKind::Normalized {
        return Err(DiagnosticsError::WrongKind);
    }
    let g = &field.grid;
    let mu = field.max_value();
    let ctx = FlowContext::new(field);
    let dense = field.dense_values();
    let mut out = Vec::new();
    for &m in levels {
        let ls = match LevelSetDomain::from_grid(g.origin, g.h, g.nx, g.ny, dense.clone(), m) {
            Ok(ls) => ls,
            Err(_) => {
                out.push(LevelReport {
                    m,
                    target: f64::NAN,
                    grad_summary: summarize(std::iter::empty()),
                    mismatch: f64::NAN,
                    skipped_empty: true,
                });
                continue;
            }
        };
        let target = (2.0 * (mu - m)).sqrt();
        let samples = ls.boundary_samples();
        let grads = samples
            .iter()
            .filter_map(|&x| ctx.gradient(x))
            .map(|gv| gv[0].hypot(gv[1]));
        let grad_summary = summarize(grads.clone());
        let mismatch = grads
            .map(|v| (v - target).abs())
            .fold(0.0f64, f64::max);
        out.push(LevelReport {
            m,
            target,
            grad_summary,
            mismatch,
            skipped_empty: false,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// C^{1,1} proxy
// ---------------------------------------------------------------------------

/// Discrete gradient-Lipschitz seminorm: max over axis-adjacent interior
/// node pairs of |∇u(x) − ∇u(y)|/h, excluding nodes within `collar` of the
/// boundary.
pub fn gradient_lipschitz_seminorm(field: &ScalarField, collar: f64) -> f64 {
    let g = &field.grid;
    let grads = discrete_gradient(field);
    let mut semi = 0.0f64;
    for (node, &(i, j)) in g.nodes.iter().enumerate() {
        if g.dist[node] <= collar {
            continue;
        }
        for (di, dj) in [(1i64, 0i64), (0, 1)] {
            if let Some(other) = g.index_at(i as i64 + di, j as i64 + dj) {
                if g.dist[other] <= collar {
                    continue;
                }
                let dx = grads[node][0] - grads[other][0];
                let dy = grads[node][1] - grads[other][1];
                semi = semi.max(dx.hypot(dy) / g.h);
            }
        }
    }
    semi
}

#[derive(Clone, Debug, Serialize)]
pub struct C11ProxyReport {
    pub h: f64,
    pub seminorm_coarse: f64,
    pub seminorm_fine: f64,
    /// fine/coarse ratio: ≈1 when the gradient is Lipschitz (the seminorm
    /// converges), visibly >1 when it is not (the seminorm diverges under
    /// refinement)
    pub ratio: f64,
}

/// Solve at h and h/2 and compare the gradient-Lipschitz seminorms. The
/// collar is fixed at 4h (the coarse spacing) on both grids so the two
/// seminorms measure the same region.
pub fn c11_proxy(
    domain: &dyn DistanceOracle,
    kind: ProblemKind,
    h: f64,
    config: &SolverConfig,
) -> Result<C11ProxyReport, DiagnosticsError> {
    let collar = 4.0 * h;
    let solve = |spacing: f64, init: Option<Vec<f64>>, grid_out: &mut Option<Arc<crate::solver::Grid2D>>| -> Result<ScalarField, SolverError> {
        let grid = Arc::new(build_grid(domain, spacing)?);
        *grid_out = Some(grid.clone());
        match kind {
            ProblemKind::Normalized => solve_dirichlet_normalized_from(&grid, config, init),
            ProblemKind::NonNormalized => {
                solve_dirichlet_nonnormalized_from(&grid, config, init).map(|(f, _)| f)
            }
        }
    };
    let mut gc = None;
    let coarse = solve(h, None, &mut gc)?;
    let mut gf = None;
    // warm-start the fine solve from the coarse solution
    let fine_grid = Arc::new(build_grid(domain, h / 2.0)?);
    let init: Vec<f64> = (0..fine_grid.interior_count())
        .map(|n| coarse.interp(fine_grid.node_point(n)))
        .collect();
    let fine = solve(h / 2.0, Some(init), &mut gf)?;
    let sc = gradient_lipschitz_seminorm(&coarse, collar);
    let sf = gradient_lipschitz_seminorm(&fine, collar);
    Ok(C11ProxyReport {
        h,
        seminorm_coarse: sc,
        seminorm_fine: sf,
        ratio: sf / sc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexDomain;
    use crate::solver::{build_grid, solve_dirichlet_normalized};

    fn disk() -> ConvexDomain {
        ConvexDomain::disk([0.0, 0.0], 1.0).unwrap()
    }

    fn stadium() -> ConvexDomain {
        ConvexDomain::stadium([-1.0, 0.0], [1.0, 0.0], 1.0).unwrap()
    }

    /// exact normalized web solution sampled on a grid
    fn exact_field(domain: &ConvexDomain, h: f64) -> ScalarField {
        let grid = Arc::new(build_grid(domain, h).unwrap());
        let rho = domain.inradius().0;
        let profile = WebProfile::normalized(rho);
        let values = (0..grid.interior_count())
            .map(|n| profile.value(grid.dist[n].min(rho)).unwrap())
            .collect();
        ScalarField {
            grid,
            values,
            kind: ProblemKind::Normalized,
            iterations: 0,
            final_change: 0.0,
        }
    }

    #[test]
    fn p_field_of_exact_web_solution_is_flat() {
        let h = 1.0 / 32.0;
        let f = exact_field(&disk(), h);
        let p = p_function(&f, 1.0);
        assert!((p.lambda - 0.5).abs() < 1e-15);
        let s = p.summary_excluding_collar(4.0 * h);
        assert!(s.spread <= 5.0 * h, "spread {}", s.spread);
        assert!((s.mean - 0.5).abs() <= 5.0 * h);
    }

    #[test]
    fn p_field_of_zero_is_zero() {
        let grid = Arc::new(build_grid(&disk(), 1.0 / 8.0).unwrap());
        let f = ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.interior_count()],
            kind: ProblemKind::NonNormalized,
            iterations: 0,
            final_change: 0.0,
        };
        let p = p_function(&f, 1.0);
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn p_bounds_hold_for_solution_and_fail_for_linear_field() {
        let h = 1.0 / 16.0;
        let grid = Arc::new(build_grid(&disk(), h).unwrap());
        let f = solve_dirichlet_normalized(&grid, &SolverConfig::default()).unwrap();
        let p = p_function(&f, 1.0);
        let report = p_bounds_check(&f, &p);
        assert!(report.pass, "violations: {}", report.violations);

        // u(x) = x₁ is not a solution: P = ¼ + x₁ exceeds max u + δ
        let adv = ScalarField {
            grid: grid.clone(),
            values: (0..grid.interior_count())
                .map(|n| grid.node_point(n)[0])
                .collect(),
            kind: ProblemKind::NonNormalized,
            iterations: 0,
            final_change: 0.0,
        };
        let p = p_function(&adv, 1.0);
        let report = p_bounds_check(&adv, &p);
        assert!(!report.pass);
    }

    #[test]
    fn hamiltonian_residual_small_on_exact_field() {
        let h = 1.0 / 32.0;
        let f = exact_field(&disk(), h);
        let res = hamiltonian_residual(&f, 0.5).unwrap();
        let interior_max = (0..f.values.len())
            .filter(|&n| f.grid.dist[n] > 4.0 * h)
            .map(|n| res[n])
            .fold(0.0f64, f64::max);
        assert!(interior_max <= 5.0 * h, "residual {interior_max}");

        let zero = ScalarField {
            grid: f.grid.clone(),
            values: vec![0.0; f.values.len()],
            kind: ProblemKind::Normalized,
            iterations: 0,
            final_change: 0.0,
        };
        let res = hamiltonian_residual(&zero, 0.0).unwrap();
        assert!(res.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rk4_matches_the_exact_exponential_flow() {
        // u = ½(1−|x|²) has ∇u = −x, so X(t) = X₀e^{−t}
        let h = 1.0 / 16.0;
        let grid = Arc::new(build_grid(&disk(), h).unwrap());
        let f = ScalarField {
            grid: grid.clone(),
            values: (0..grid.interior_count())
                .map(|n| {
                    let x = grid.node_point(n);
                    0.5 * (1.0 - x[0] * x[0] - x[1] * x[1])
                })
                .collect(),
            kind: ProblemKind::Normalized,
            iterations: 0,
            final_change: 0.0,
        };
        let ctx = FlowContext::new(&f);
        // start well inside so every stencil the flow touches is uncut and
        // the discrete gradient is exact for this quadratic
        let traj = gradient_flow(&ctx, [0.5, 0.0], 1e-3, 1.0, 1e-9).unwrap();
        let end = traj.end();
        let exact = 0.5 * (-1.0f64).exp();
        assert!(
            (end[0] - exact).abs() <= 1e-6 && end[1].abs() <= 1e-9,
            "end {end:?} vs {exact}"
        );
    }

    #[test]
    fn flow_from_the_center_is_a_point() {
        let f = exact_field(&disk(), 1.0 / 16.0);
        let ctx = FlowContext::new(&f);
        let traj = gradient_flow(&ctx, [0.0, 0.0], 1e-3, 1.0, f.grid.h).unwrap();
        assert_eq!(traj.termination, FlowTermination::EnteredRidge);
        assert_eq!(traj.steps.len(), 1);
    }

    #[test]
    fn flow_on_stadium_reaches_the_spine() {
        let h = 1.0 / 16.0;
        let dom = stadium();
        let f = exact_field(&dom, h);
        let ctx = FlowContext::new(&f);
        let traj = gradient_flow(&ctx, [0.3, 0.9], 1e-3, 20.0, h).unwrap();
        assert_eq!(traj.termination, FlowTermination::EnteredRidge);
        let end = traj.end();
        // spine is the segment [−1,1]×{0}
        let d_spine = end[1].abs().max((end[0].abs() - 1.0).max(0.0));
        assert!(d_spine <= 2.0 * h, "end {end:?}");
        // u nondecreasing along the flow
        let law = p_along_flow(&traj, 0.5);
        assert!(law.worst_decrease <= 1e-8);
    }

    #[test]
    fn flow_value_law_on_exact_stadium_field() {
        let h = 1.0 / 32.0;
        let f = exact_field(&stadium(), h);
        let ctx = FlowContext::new(&f);
        for start in [[0.5, 0.5], [-0.8, -0.4], [1.3, 0.3]] {
            let traj = gradient_flow(&ctx, start, 1e-3, 3.0, h).unwrap();
            let law = p_along_flow(&traj, 0.5);
            assert!(
                law.ode_residual <= 1e-3 + 5.0 * h,
                "residual {} from {start:?}",
                law.ode_residual
            );
        }
    }

    #[test]
    fn sup_convolution_of_constants_and_linear_fields() {
        let h = 1.0 / 16.0;
        let grid = Arc::new(build_grid(&disk(), h).unwrap());
        let n = grid.interior_count();
        // constant field: u^ε = c (the y = x term wins)
        let c = 0.37;
        let f = ScalarField {
            grid: grid.clone(),
            values: vec![c; n],
            kind: ProblemKind::Normalized,
            iterations: 0,
            final_change: 0.0,
        };
        let b = sup_convolution(&f, 0.05, 1.0);
        for &v in &b.u_eps.values {
            assert!((v - c).abs() < 1e-12);
        }

        // linear field a·x: u^ε = a·x + ε|a|²/2 up to the lattice sampling
        // gap h²/ε, at nodes whose maximizer x + εa stays interior
        let a = [0.3, 0.1];
        let eps = 0.1;
        let f = ScalarField {
            grid: grid.clone(),
            values: (0..n)
                .map(|m| {
                    let x = grid.node_point(m);
                    a[0] * x[0] + a[1] * x[1]
                })
                .collect(),
            kind: ProblemKind::Normalized,
            iterations: 0,
            final_change: 0.0,
        };
        let b = sup_convolution(&f, eps, 1.0);
        let gain = eps * (a[0] * a[0] + a[1] * a[1]) / 2.0;
        for m in 0..n {
            let x = grid.node_point(m);
            let y = [x[0] + eps * a[0], x[1] + eps * a[1]];
            if grid.dist[m] > 0.3 && y[0].hypot(y[1]) < 0.8 && a[0] * x[0] + a[1] * x[1] > 0.0 {
                let expect = a[0] * x[0] + a[1] * x[1] + gain;
                assert!(
                    (b.u_eps.values[m] - expect).abs() <= h * h / eps,
                    "at {x:?}: {} vs {expect}",
                    b.u_eps.values[m]
                );
            }
        }
    }

    #[test]
    fn sup_convolution_bundle_invariants() {
        let h = 1.0 / 16.0;
        let grid = Arc::new(build_grid(&stadium(), h).unwrap());
        let f = solve_dirichlet_normalized(&grid, &SolverConfig::default()).unwrap();
        let eps1 = 2.0 * h;
        let eps2 = 4.0 * h;
        let b1 = sup_convolution(&f, eps1, 1.0);
        let b2 = sup_convolution(&f, eps2, 1.0);
        assert!(!b2.empty);
        for n in 0..grid.interior_count() {
            // dominance and ε-monotonicity
            assert!(b1.u_eps.values[n] >= f.values[n] - 1e-12);
            assert!(b2.u_eps.values[n] >= b1.u_eps.values[n] - 1e-12);
            // mask nesting
            assert!(!b2.a_mask[n] || b2.u_mask[n]);
            assert!(!b2.omega_mask[n] || b2.a_mask[n]);
        }
        // sup-convolution distance bound with lattice sampling slack
        let lip = b2.lip;
        let bound = eps2 * lip * lip / 2.0 + h * lip;
        for n in 0..grid.interior_count() {
            assert!(b2.u_eps.values[n] - f.values[n] <= bound + 1e-12);
        }
        // semiconvexity
        assert!(b2.worst_second_difference() >= -h * h / eps2 - 1e-10);
        // m_ε is small for small ε
        assert!(b2.m_eps <= lip * (eps2 * lip + eps2) + eps2);
    }

    #[test]
    fn p_eps_flow_monotonicity_on_stadium() {
        let h = 1.0 / 16.0;
        let grid = Arc::new(build_grid(&stadium(), h).unwrap());
        let f = solve_dirichlet_normalized(&grid, &SolverConfig::default()).unwrap();
        let b = sup_convolution(&f, 4.0 * h, 1.0);
        let report = p_eps_flow_monotonicity(&b, 50, 1e-2, 3.0);
        assert!(report.starts > 0);
        assert!(report.pass, "violations {}/{}", report.violating, report.starts);
    }

    #[test]
    fn boundary_stats_of_exact_field_recover_the_neumann_constant() {
        let h = 1.0 / 32.0;
        let f = exact_field(&disk(), h);
        let s = boundary_gradient_stats(&f);
        // exact Neumann value is ρ = 1
        assert!((s.mean - 1.0).abs() <= 5.0 * h, "mean {}", s.mean);
        assert!(s.spread <= 5.0 * h, "spread {}", s.spread);
    }

    #[test]
    fn level_scan_matches_the_truncation_law_on_exact_stadium_field() {
        let h = 1.0 / 32.0;
        let f = exact_field(&stadium(), h);
        let reports = level_set_serrin_scan(&f, &[0.125]).unwrap();
        let r = &reports[0];
        assert!(!r.skipped_empty);
        assert!((r.target - (0.75f64).sqrt()).abs() < 1e-12);
        assert!(r.mismatch <= 5.0 * h, "mismatch {}", r.mismatch);
        // an empty level is skipped, not an error
        let reports = level_set_serrin_scan(&f, &[10.0]).unwrap();
        assert!(reports[0].skipped_empty);
    }

    #[test]
    fn gradient_seminorm_of_exact_stadium_field_is_order_one() {
        let h = 1.0 / 32.0;
        let f = exact_field(&stadium(), h);
        let semi = gradient_lipschitz_seminorm(&f, 4.0 * h);
        // the true Hessian bound for the normalized web solution is 1
        assert!(semi <= 1.0 + 10.0 * h, "seminorm {semi}");
    }
}

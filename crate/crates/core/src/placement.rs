//! Horizontal placement of the two surfaces at a fixed element split.
//!
//! Each SCA round works in log-distances `y = ln d`, where the objective is a
//! sum of exponentials. The distance definitions are relaxed to the lower
//! bounds `e^{2y0} >= x0² + H²`, `e^{y1} >= x1`, `e^{2y2} >= (x2 + r cos θ)² + ...`,
//! and the left sides are linearized at the anchor. The objective increases in
//! every `y`, so the linearized bounds are tight at the optimum and `y` can be
//! eliminated in closed form. What remains is a convex program in `(x0, x1)`,
//! solved here by a log-barrier Newton method on the epigraph of the worst user.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::{distances, Allocation, Geometry, Placement, SystemParams, PLACEMENT_SUM_TOL};

pub const SCA_MAX_ITERATIONS: usize = 100;
pub const SCA_REL_TOL: f64 = 1e-8;

/// Barrier duality-gap target, in units of the anchor objective.
const BARRIER_GAP: f64 = 1e-11;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_STEPS: usize = 200;

/// Exponent pattern of each coefficient over `(d0, d1, d2)`.
const PATTERN: [[bool; 3]; 7] = [
    [true, true, true],
    [true, true, false],
    [true, false, true],
    [false, true, true],
    [true, false, false],
    [false, true, false],
    [false, false, true],
];

/// `f2 = C1 e0e1e2 + C2 e0e1 + C3 e0e2 + C4 e1e2 + C5 e0 + C6 e1 + C7 e2`
/// with `e_k = d_k^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementCoefficients {
    pub c: [f64; 7],
    pub alpha: f64,
}

impl PlacementCoefficients {
    pub fn new(params: &SystemParams, m1: f64, m2: f64) -> Self {
        let n = params.n_bs_antennas as f64;
        let (pb, pe) = (params.tx_power, params.per_element_power);
        let (si, s0, b) = (params.irs_noise, params.user_noise, params.ref_gain);
        Self {
            c: [
                si * si * s0 / (pe * pe * m1 * m1 * m2 * m2),
                si * si * b / (pe * m1 * m1 * m2),
                s0 * si * b / (pe * m1 * m2 * m2),
                n * pb * si * s0 * b / (pe * pe * m1 * m1 * m2 * m2),
                si * b * b / m1,
                n * pb * si * b * b / (pe * m1 * m1 * m2),
                n * pb * s0 * b * b / (pe * m2 * m2),
            ],
            alpha: params.pathloss_exp,
        }
    }

    pub fn for_allocation(params: &SystemParams, allocation: &Allocation) -> Self {
        Self::new(params, allocation.m1 as f64, allocation.m2 as f64)
    }

    /// One user's value at the given distances.
    pub fn user_value(&self, d0: f64, d1: f64, d2: f64) -> f64 {
        self.user_value_powers([d0.powf(self.alpha), d1.powf(self.alpha), d2.powf(self.alpha)])
    }

    /// [`Self::user_value`] from precomputed `d_k^α`.
    pub(crate) fn user_value_powers(&self, e: [f64; 3]) -> f64 {
        self.c
            .iter()
            .zip(PATTERN)
            .map(|(c, p)| {
                c * (0..3).filter(|&k| p[k]).map(|k| e[k]).product::<f64>()
            })
            .sum()
    }
}

/// Worst-user value; `d2` holds one distance per user.
pub fn eval_f2(coeffs: &PlacementCoefficients, d0: f64, d1: f64, d2: &[f64]) -> f64 {
    d2.iter()
        .map(|&d| coeffs.user_value(d0, d1, d))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Worst-user value recomputed from the placement.
pub fn placement_objective(
    coeffs: &PlacementCoefficients,
    geometry: &Geometry,
    placement: &Placement,
) -> Result<f64> {
    let (d0, d1, d2) = user_distances(geometry, placement)?;
    Ok(eval_f2(coeffs, d0, d1, &d2))
}

fn user_distances(geometry: &Geometry, placement: &Placement) -> Result<(f64, f64, Vec<f64>)> {
    let mut d2 = Vec::with_capacity(geometry.users.len());
    let (mut d0, mut d1) = (0.0, 0.0);
    for user in 0..geometry.users.len() {
        let d = distances(geometry, placement, user)?;
        (d0, d1) = (d.0, d.1);
        d2.push(d.2);
    }
    Ok((d0, d1, d2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaState {
    /// Anchor log-distances.
    pub y0: f64,
    pub y1: f64,
    pub y2: Vec<f64>,
    pub placement: Placement,
    pub iterations: usize,
    /// True worst-user objective after each round, starting with the initial point.
    pub trace: Vec<f64>,
}

impl ScaState {
    /// Anchors at the distances induced by `placement`.
    pub fn at(
        coeffs: &PlacementCoefficients,
        geometry: &Geometry,
        placement: Placement,
    ) -> Result<Self> {
        placement.validate(geometry)?;
        let (d0, d1, d2) = user_distances(geometry, &placement)?;
        if d1 <= 0.0 {
            return Err(Error::SingularGeometry("zero inter-surface distance".into()));
        }
        Ok(Self {
            y0: d0.ln(),
            y1: d1.ln(),
            y2: d2.iter().map(|d| d.ln()).collect(),
            placement,
            iterations: 0,
            trace: vec![eval_f2(coeffs, d0, d1, &d2)],
        })
    }

    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace starts non-empty")
    }
}

/// Per-user pieces of the surrogate that depend only on the anchor.
struct Surrogate<'a> {
    coeffs: &'a PlacementCoefficients,
    scale: f64,
    h2: f64,
    d: f64,
    y0: f64,
    y1: f64,
    inv0: f64,
    inv1: f64,
    users: Vec<(f64, f64, f64, f64)>,
}

impl<'a> Surrogate<'a> {
    fn new(state: &ScaState, coeffs: &'a PlacementCoefficients, geometry: &Geometry) -> Self {
        let users = geometry
            .users
            .iter()
            .zip(&state.y2)
            .map(|(u, &y2)| {
                let along = u.radius * u.azimuth.cos();
                let across = u.radius * u.azimuth.sin();
                (y2, (-2.0 * y2).exp(), along, across * across)
            })
            .collect();
        Self {
            coeffs,
            scale: state.objective(),
            h2: geometry.irs_altitude * geometry.irs_altitude,
            d: geometry.bs_user_distance,
            y0: state.y0,
            y1: state.y1,
            inv0: (-2.0 * state.y0).exp(),
            inv1: (-state.y1).exp(),
            users,
        }
    }

    /// Normalized surrogate of one user with its gradient and Hessian in `(x0, x1)`.
    fn user(&self, ell: usize, x0: f64, x1: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let (y2h, inv2, along, across2) = self.users[ell];
        let w = self.d - x0 - x1 + along;
        let y = [
            self.y0 + ((x0 * x0 + self.h2) * self.inv0 - 1.0) / 2.0,
            self.y1 + x1 * self.inv1 - 1.0,
            y2h + ((w * w + self.h2 + across2) * inv2 - 1.0) / 2.0,
        ];
        // Jacobian of y in x and the curvature of each y.
        let jac = [[x0 * self.inv0, 0.0], [0.0, self.inv1], [-w * inv2, -w * inv2]];
        let curv = [[[self.inv0, 0.0], [0.0, 0.0]], [[0.0; 2]; 2], [[inv2; 2]; 2]];

        let a = self.coeffs.alpha;
        let mut value = 0.0;
        let mut gy = [0.0; 3];
        let mut hy = [[0.0; 3]; 3];
        for (c, p) in self.coeffs.c.iter().zip(PATTERN) {
            let expo: f64 = (0..3).filter(|&k| p[k]).map(|k| y[k]).sum();
            let u = c / self.scale * (a * expo).exp();
            value += u;
            for i in 0..3 {
                if p[i] {
                    gy[i] += a * u;
                    for j in 0..3 {
                        if p[j] {
                            hy[i][j] += a * a * u;
                        }
                    }
                }
            }
        }
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for r in 0..2 {
            for k in 0..3 {
                g[r] += gy[k] * jac[k][r];
            }
            for s in 0..2 {
                for i in 0..3 {
                    h[r][s] += gy[i] * curv[i][r][s];
                    for j in 0..3 {
                        h[r][s] += jac[i][r] * hy[i][j] * jac[j][s];
                    }
                }
            }
        }
        (value, g, h)
    }
}

/// Barrier function on `z = (x0, x1, t)` with gradient and Hessian, or `None`
/// outside the strict interior.
fn barrier(
    s: &Surrogate,
    lo: f64,
    tau: f64,
    z: &Vector3<f64>,
    derivatives: bool,
) -> Option<(f64, Vector3<f64>, Matrix3<f64>)> {
    let (x0, x1, t) = (z[0], z[1], z[2]);
    let slacks = [
        (x0 - lo, Vector3::new(1.0, 0.0, 0.0)),
        (x1 - lo, Vector3::new(0.0, 1.0, 0.0)),
        (s.d - lo - x0 - x1, Vector3::new(-1.0, -1.0, 0.0)),
    ];
    let mut value = tau * t;
    let mut grad = Vector3::new(0.0, 0.0, tau);
    let mut hess = Matrix3::zeros();
    for (slack, a) in slacks {
        if !(slack > 0.0) {
            return None;
        }
        value -= slack.ln();
        if derivatives {
            grad -= a / slack;
            hess += a * a.transpose() / (slack * slack);
        }
    }
    for ell in 0..s.users.len() {
        let (f, g, h) = s.user(ell, x0, x1);
        let slack = t - f;
        if !(slack > 0.0) || !f.is_finite() {
            return None;
        }
        value -= slack.ln();
        if derivatives {
            let ds = Vector3::new(-g[0], -g[1], 1.0);
            grad -= ds / slack;
            hess += ds * ds.transpose() / (slack * slack);
            for r in 0..2 {
                for c in 0..2 {
                    hess[(r, c)] += h[r][c] / slack;
                }
            }
        }
    }
    value.is_finite().then_some((value, grad, hess))
}

fn center(s: &Surrogate, lo: f64, tau: f64, mut z: Vector3<f64>) -> Vector3<f64> {
    for _ in 0..NEWTON_MAX_STEPS {
        let Some((value, grad, hess)) = barrier(s, lo, tau, &z, true) else {
            break;
        };
        let Some(step) = hess.lu().solve(&(-grad)) else {
            break;
        };
        let decrement = -grad.dot(&step);
        if !(decrement > 2.0 * NEWTON_TOL) {
            break;
        }
        let mut len = 1.0;
        loop {
            let cand = z + step * len;
            if let Some((v, _, _)) = barrier(s, lo, tau, &cand, false) {
                if v <= value - 0.25 * len * decrement {
                    z = cand;
                    break;
                }
            }
            len *= 0.5;
            if len < 1e-16 {
                return z;
            }
        }
    }
    z
}

/// One SCA round: solves the linearized convex program at the anchors in
/// `state` and re-anchors at its solution. The true objective never increases;
/// a round that would increase it returns the anchor unchanged.
pub fn sca_subproblem(
    state: &ScaState,
    coeffs: &PlacementCoefficients,
    geometry: &Geometry,
) -> Result<ScaState> {
    let (d0, d1, d2) = user_distances(geometry, &state.placement)?;
    let tol = 1e-12;
    if state.y0 < d0.ln() - tol
        || state.y1 < d1.ln() - tol
        || state.y2.len() != d2.len()
        || state.y2.iter().zip(&d2).any(|(y, d)| *y < d.ln() - tol)
    {
        return Err(Error::InfeasibleAnchor(
            "anchor log-distances fall below the current placement's distances".into(),
        ));
    }

    let dist = geometry.bs_user_distance;
    let lo = geometry.min_segment;
    let room = dist - 3.0 * lo;
    let mut next = state.clone();
    next.iterations += 1;
    if room <= PLACEMENT_SUM_TOL {
        next.trace.push(state.objective());
        return Ok(next);
    }

    let s = Surrogate::new(state, coeffs, geometry);
    let p = state.placement;
    let mut start = [p.x0, p.x1];
    let min_slack = (p.x0 - lo).min(p.x1 - lo).min(dist - lo - p.x0 - p.x1);
    if min_slack < 1e-6 * room {
        let mid = lo + room / 3.0;
        start = [p.x0 + 1e-4 * (mid - p.x0), p.x1 + 1e-4 * (mid - p.x1)];
    }
    let t0 = (0..s.users.len())
        .map(|ell| s.user(ell, start[0], start[1]).0)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = Vector3::new(start[0], start[1], t0 + 1.0);
    let constraints = (s.users.len() + 3) as f64;
    let mut tau = 1.0;
    loop {
        z = center(&s, lo, tau, z);
        if constraints / tau < BARRIER_GAP {
            break;
        }
        tau *= 10.0;
    }

    let x0 = z[0].clamp(lo, dist - 2.0 * lo);
    let x1 = z[1].clamp(lo, dist - lo - x0);
    let candidate = Placement::from_prefix(x0, x1, dist);
    let value = placement_objective(coeffs, geometry, &candidate)?;
    if value <= state.objective() {
        let fresh = ScaState::at(coeffs, geometry, candidate)?;
        next.y0 = fresh.y0;
        next.y1 = fresh.y1;
        next.y2 = fresh.y2;
        next.placement = candidate;
        next.trace.push(value);
    } else {
        next.trace.push(state.objective());
    }
    Ok(next)
}

/// Runs SCA rounds from `init` until the relative decrease drops below
/// [`SCA_REL_TOL`] or [`SCA_MAX_ITERATIONS`] rounds.
pub fn run_sca(
    coeffs: &PlacementCoefficients,
    geometry: &Geometry,
    init: Placement,
) -> Result<ScaState> {
    let mut state = ScaState::at(coeffs, geometry, init)?;
    while state.iterations < SCA_MAX_ITERATIONS {
        let before = state.objective();
        state = sca_subproblem(&state, coeffs, geometry)?;
        if (before - state.objective()) <= SCA_REL_TOL * before {
            break;
        }
    }
    Ok(state)
}

pub fn solve_placement(
    params: &SystemParams,
    geometry: &Geometry,
    allocation: &Allocation,
    init: Placement,
) -> Result<Placement> {
    let coeffs = PlacementCoefficients::for_allocation(params, allocation);
    Ok(run_sca(&coeffs, geometry, init)?.placement)
}

/// Grid points `x_min + k·step` for each segment, up to `D - 2 x_min`.
pub(crate) fn grid_axis(geometry: &Geometry, step: f64) -> Vec<f64> {
    let lo = geometry.min_segment;
    let hi = geometry.bs_user_distance - 2.0 * lo + PLACEMENT_SUM_TOL;
    (0..)
        .map(|k| lo + k as f64 * step)
        .take_while(|&x| x <= hi)
        .collect()
}

/// Exhaustive search over the `(x0, x1)` grid with spacing `step`.
pub fn placement_oracle(
    params: &SystemParams,
    geometry: &Geometry,
    allocation: &Allocation,
    step: f64,
) -> Result<Placement> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("grid step must be positive, got {step}")));
    }
    let coeffs = PlacementCoefficients::for_allocation(params, allocation);
    let dist = geometry.bs_user_distance;
    let lo = geometry.min_segment;
    let axis = grid_axis(geometry, step);
    let mut best: Option<(Placement, f64)> = None;
    for &x0 in &axis {
        for &x1 in &axis {
            if dist - x0 - x1 < lo - PLACEMENT_SUM_TOL {
                break;
            }
            let p = Placement::from_prefix(x0, x1, dist);
            let v = placement_objective(&coeffs, geometry, &p)?;
            if best.map_or(true, |(_, b)| v < b) {
                best = Some((p, v));
            }
        }
    }
    best.map(|(p, _)| p)
        .ok_or_else(|| Error::invalid("placement grid has no feasible point"))
}

//! Alternating optimization of the element split and the placement, with the
//! optimal reflections re-synthesized after each inner pass.

use crate::allocation::{solve_allocation, AllocationCoefficients};
use crate::closed_form::{min_rate, optimal_reflection, RateReport};
use crate::error::{Error, Result};
use crate::model::{
    build_channels, check_consistent, distances, per_element_power, snr_full, Allocation,
    Geometry, PanelShape, Placement, ReflectionConfig, SystemParams, PLACEMENT_SUM_TOL,
};
use crate::placement::{placement_objective, run_sca, PlacementCoefficients};

/// Largest joint grid [`exhaustive_baseline`] will evaluate.
pub const BASELINE_MAX_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AoOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Relative change that ends either loop.
    pub tol: f64,
    /// Reflections are built as explicit matrices only up to this budget.
    pub synthesis_limit: usize,
    pub panel: PanelShape,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            max_outer: 50,
            max_inner: 100,
            tol: 1e-8,
            synthesis_limit: 1024,
            panel: PanelShape::MostSquare,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub placement: Placement,
    pub allocation: Allocation,
    /// One configuration per user; empty when the budget exceeds the synthesis limit.
    pub reflections: Vec<ReflectionConfig>,
    pub report: RateReport,
    /// Min-rate after each outer round.
    pub trace: Vec<f64>,
}

fn reflections_for(
    params: &SystemParams,
    geometry: &Geometry,
    placement: &Placement,
    allocation: &Allocation,
    opts: &AoOptions,
) -> Result<Vec<ReflectionConfig>> {
    if params.total_elements > opts.synthesis_limit {
        return Ok(Vec::new());
    }
    (0..geometry.users.len())
        .map(|u| {
            let ch = build_channels(params, geometry, placement, allocation, u, opts.panel)?;
            Ok(optimal_reflection(params, &ch))
        })
        .collect()
}

fn worst_xi(
    params: &SystemParams,
    geometry: &Geometry,
    placement: &Placement,
    allocation: &Allocation,
) -> Result<f64> {
    placement_objective(
        &PlacementCoefficients::for_allocation(params, allocation),
        geometry,
        placement,
    )
}

pub fn solve(params: &SystemParams, geometry: &Geometry) -> Result<Solution> {
    solve_with(params, geometry, &AoOptions::default())
}

pub fn solve_with(params: &SystemParams, geometry: &Geometry, opts: &AoOptions) -> Result<Solution> {
    check_consistent(params, geometry)?;
    let total = params.total_elements;
    if total < 2 {
        return Err(Error::validation("total_elements", "two surfaces need at least two elements"));
    }
    let mut placement = Placement::spread(geometry);
    let mut allocation = Allocation::even(total);
    let mut best: Option<Solution> = None;
    let mut trace = Vec::new();

    for _ in 0..opts.max_outer {
        let mut objective = worst_xi(params, geometry, &placement, &allocation)?;
        for _ in 0..opts.max_inner {
            let before = objective;
            let coeffs = AllocationCoefficients::for_placement(params, geometry, &placement)?;
            let candidate = solve_allocation(&coeffs, total)?;
            let value = worst_xi(params, geometry, &placement, &candidate)?;
            if value <= objective {
                allocation = candidate;
                objective = value;
            }
            let coeffs = PlacementCoefficients::for_allocation(params, &allocation);
            let state = run_sca(&coeffs, geometry, placement)?;
            if state.objective() <= objective {
                placement = state.placement;
                objective = state.objective();
            }
            if before - objective <= opts.tol * before {
                break;
            }
        }

        let report = min_rate(params, geometry, &placement, &allocation)?;
        let rate = report.min_rate;
        let previous = best.as_ref().map(|s| s.report.min_rate);
        if previous.map_or(true, |p| rate >= p) {
            best = Some(Solution {
                placement,
                allocation,
                reflections: reflections_for(params, geometry, &placement, &allocation, opts)?,
                report,
                trace: Vec::new(),
            });
        }
        let kept = best.as_ref().map(|s| s.report.min_rate).unwrap_or(rate);
        trace.push(kept);
        if let Some(p) = previous {
            if (kept - p).abs() <= opts.tol * p.abs() {
                break;
            }
        }
    }
    let mut solution = best.ok_or_else(|| Error::invalid("no outer iteration was run"))?;
    solution.trace = trace;
    Ok(solution)
}

/// Recomputes every deployment constraint of `solution` from scratch.
pub fn audit(params: &SystemParams, geometry: &Geometry, solution: &Solution) -> Result<()> {
    let breach = |msg: String| Err(Error::InvariantBreach(msg));
    if solution.placement.validate(geometry).is_err() || solution.allocation.validate(params).is_err() {
        return breach(format!(
            "placement {:?} or allocation {:?} infeasible",
            solution.placement, solution.allocation
        ));
    }
    let report = min_rate(params, geometry, &solution.placement, &solution.allocation)?;
    if report != solution.report {
        return breach("reported rates differ from their recomputation".into());
    }
    for w in solution.trace.windows(2) {
        if w[1] < w[0] * (1.0 - 1e-12) {
            return breach(format!("min-rate trace decreased from {} to {}", w[0], w[1]));
        }
    }
    let pe = params.per_element_power;
    for (u, config) in solution.reflections.iter().enumerate() {
        let ch = build_channels(
            params,
            geometry,
            &solution.placement,
            &solution.allocation,
            u,
            PanelShape::MostSquare,
        )?;
        if config.beam.norm_squared() > 1.0 + 1e-12 {
            return breach(format!("user {u}: beam norm exceeds one"));
        }
        let (p1, p2) = per_element_power(&ch, config, params)?;
        if let Some(p) = p1.iter().chain(&p2).find(|p| ((*p - pe) / pe).abs() > 1e-9) {
            return breach(format!("user {u}: element power {p} W differs from {pe} W"));
        }
        let matrix = snr_full(&ch, config, params)?;
        let closed = report.snr[u];
        if ((matrix - closed) / matrix).abs() > 1e-9 {
            return breach(format!("user {u}: matrix SNR {matrix} vs closed form {closed}"));
        }
    }
    Ok(())
}

/// Multiples of `step` within `[lo, hi]`.
fn multiples(step: f64, lo: f64, hi: f64) -> Vec<f64> {
    let first = (lo / step - 1e-9).ceil().max(1.0) as usize;
    (first..)
        .map(|k| k as f64 * step)
        .take_while(|&x| x <= hi + PLACEMENT_SUM_TOL)
        .collect()
}

/// Joint grid over `m1` (multiples of `alloc_step`) and `(x0, x1)` (multiples
/// of `place_step`), scored by the closed-form min-rate.
pub fn exhaustive_baseline(
    params: &SystemParams,
    geometry: &Geometry,
    alloc_step: usize,
    place_step: f64,
) -> Result<Solution> {
    check_consistent(params, geometry)?;
    if alloc_step == 0 || !(place_step > 0.0 && place_step.is_finite()) {
        return Err(Error::invalid("grid steps must be positive"));
    }
    let total = params.total_elements;
    let splits: Vec<usize> = (1..)
        .map(|k| k * alloc_step)
        .take_while(|&m1| m1 < total)
        .collect();
    let dist = geometry.bs_user_distance;
    let lo = geometry.min_segment;
    let axis = multiples(place_step, lo, dist - 2.0 * lo);
    let mut points = Vec::new();
    for &x0 in &axis {
        for &x1 in &axis {
            let x2 = dist - x0 - x1;
            if x2 < lo - PLACEMENT_SUM_TOL {
                break;
            }
            let p = Placement::from_prefix(x0, x1, dist);
            let a = params.pathloss_exp;
            let mut e = Vec::with_capacity(geometry.users.len());
            for u in 0..geometry.users.len() {
                let (d0, d1, d2) = distances(geometry, &p, u)?;
                e.push([d0.powf(a), d1.powf(a), d2.powf(a)]);
            }
            points.push((p, e));
        }
    }
    if splits.is_empty() || points.is_empty() {
        return Err(Error::invalid("exhaustive grid has no feasible point"));
    }
    if splits.len().saturating_mul(points.len()) > BASELINE_MAX_POINTS {
        return Err(Error::invalid(format!(
            "exhaustive grid of {} points exceeds {BASELINE_MAX_POINTS}",
            splits.len() * points.len()
        )));
    }

    let mut best: Option<(f64, Placement, Allocation)> = None;
    for &m1 in &splits {
        let alloc = Allocation::new(m1, total - m1);
        let coeffs = PlacementCoefficients::for_allocation(params, &alloc);
        for (p, e) in &points {
            let worst = e
                .iter()
                .map(|e| coeffs.user_value_powers(*e))
                .fold(f64::NEG_INFINITY, f64::max);
            if best.as_ref().map_or(true, |b| worst < b.0) {
                best = Some((worst, *p, alloc));
            }
        }
    }
    let (_, placement, allocation) = best.expect("grid is non-empty");
    let report = min_rate(params, geometry, &placement, &allocation)?;
    let opts = AoOptions::default();
    Ok(Solution {
        reflections: reflections_for(params, geometry, &placement, &allocation, &opts)?,
        trace: vec![report.min_rate],
        placement,
        allocation,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UserPosition;
    use rand::{Rng, SeedableRng};

    fn default_case(users: usize) -> (SystemParams, Geometry) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let users: Vec<_> = (0..users)
            .map(|_| UserPosition {
                radius: 30.0 * rng.gen::<f64>().sqrt(),
                azimuth: rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        let params = SystemParams { n_users: users.len(), ..SystemParams::default() };
        (params, Geometry::new(200.0, 5.0, users))
    }

    #[test]
    fn solution_passes_audit() {
        let (params, g) = default_case(4);
        let s = solve(&params, &g).unwrap();
        audit(&params, &g, &s).unwrap();
        assert_eq!(s.reflections.len(), 4);
        assert_eq!(s.allocation.m1 + s.allocation.m2, 128);
    }

    #[test]
    fn trace_never_decreases() {
        let (params, g) = default_case(4);
        let s = solve(&params, &g).unwrap();
        for w in s.trace.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-12));
        }
        assert_eq!(*s.trace.last().unwrap(), s.report.min_rate);
    }

    #[test]
    fn beats_its_own_starting_point() {
        let (params, g) = default_case(4);
        let s = solve(&params, &g).unwrap();
        let start = min_rate(&params, &g, &Placement::spread(&g), &Allocation::even(128)).unwrap();
        assert!(s.report.min_rate >= start.min_rate);
    }

    #[test]
    fn two_elements_force_unit_split() {
        let (mut params, g) = default_case(1);
        params.total_elements = 2;
        let s = solve(&params, &g).unwrap();
        assert_eq!(s.allocation, Allocation::new(1, 1));
        audit(&params, &g, &s).unwrap();
    }

    #[test]
    fn repeated_solves_are_identical() {
        let (params, g) = default_case(4);
        assert_eq!(solve(&params, &g).unwrap(), solve(&params, &g).unwrap());
    }

    #[test]
    fn tampered_solution_fails_audit() {
        let (params, g) = default_case(2);
        let mut s = solve(&params, &g).unwrap();
        s.reflections[0].amp1 *= 1.01;
        assert!(matches!(audit(&params, &g, &s), Err(Error::InvariantBreach(_))));
        let mut s = solve(&params, &g).unwrap();
        s.placement.x1 += 1.0;
        assert!(audit(&params, &g, &s).is_err());
    }

    #[test]
    fn single_user_close_to_baseline() {
        let (params, g) = default_case(1);
        let s = solve(&params, &g).unwrap();
        let b = exhaustive_baseline(&params, &g, 1, 4.0).unwrap();
        assert!(s.report.min_rate >= 0.99 * b.report.min_rate);
    }

    #[test]
    fn half_budget_step_is_a_placement_grid() {
        let (params, g) = default_case(1);
        let b = exhaustive_baseline(&params, &g, 64, 10.0).unwrap();
        assert_eq!(b.allocation, Allocation::even(128));
    }

    #[test]
    fn baseline_beats_solutions_on_its_grid() {
        let (params, g) = default_case(2);
        let b = exhaustive_baseline(&params, &g, 8, 10.0).unwrap();
        let on_grid = min_rate(&params, &g, &Placement::from_prefix(10.0, 180.0, 200.0), &Allocation::new(64, 64))
            .unwrap();
        assert!(b.report.min_rate >= on_grid.min_rate - 1e-12);
    }

    #[test]
    fn oversized_baseline_is_rejected() {
        let (mut params, g) = default_case(1);
        params.total_elements = 1 << 14;
        assert!(exhaustive_baseline(&params, &g, 1, 1.0).is_err());
        assert!(exhaustive_baseline(&params, &g, 0, 1.0).is_err());
    }
}

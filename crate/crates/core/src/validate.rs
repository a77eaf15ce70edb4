//! Self-check suites: closed forms against the literal matrix model, and the
//! constraint audit of an optimized deployment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::{allocation_oracle, solve_allocation, AllocationCoefficients};
use crate::ao::{audit, solve};
use crate::closed_form::{optimal_reflection, snr_closed_form};
use crate::error::Result;
use crate::model::{
    build_channels, distances, per_element_power, snr_full, Allocation, Geometry, PanelShape,
    Placement, SystemParams, UserPosition,
};
use crate::scaling::{
    passive_snr, passive_snr_matrix, single_distances, single_snr, single_snr_matrix,
};

pub const SNR_TOL: f64 = 1e-9;
pub const POWER_TOL: f64 = 1e-9;

/// Number of random instances each randomized suite draws.
pub const SUITE_INSTANCES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

/// One randomized but feasible deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub params: SystemParams,
    pub geometry: Geometry,
    pub placement: Placement,
    pub allocation: Allocation,
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let users = rng.gen_range(1..=4);
    let total = rng.gen_range(4..=160);
    let params = SystemParams {
        n_bs_antennas: rng.gen_range(1..=8),
        total_elements: total,
        wavelength: rng.gen_range(0.05..1.0),
        element_spacing: rng.gen_range(0.02..0.5),
        ref_gain: log_uniform(rng, 1e-4, 1e-2),
        pathloss_exp: rng.gen_range(2.0..3.5),
        tx_power: log_uniform(rng, 0.1, 10.0),
        per_element_power: log_uniform(rng, 1e-6, 1.0),
        irs_noise: log_uniform(rng, 1e-14, 1e-8),
        user_noise: log_uniform(rng, 1e-14, 1e-8),
        n_users: users,
    };
    let d = rng.gen_range(50.0..400.0);
    let geometry = Geometry::new(
        d,
        rng.gen_range(2.0..20.0),
        (0..users)
            .map(|_| UserPosition {
                radius: 30.0 * rng.gen::<f64>().sqrt(),
                azimuth: rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect(),
    );
    let x0 = rng.gen_range(1.0..d - 2.0);
    let x1 = rng.gen_range(1.0..d - 1.0 - x0);
    let m1 = rng.gen_range(1..total);
    Instance {
        params,
        geometry,
        placement: Placement::from_prefix(x0, x1, d),
        allocation: Allocation::new(m1, total - m1),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn result(name: &'static str, max_rel_error: f64, tolerance: f64) -> CheckResult {
    CheckResult { name, passed: max_rel_error <= tolerance, max_rel_error, tolerance }
}

/// Closed-form SNR against the matrix model, and saturated element powers,
/// over `count` random instances.
pub fn lemma_suite(seed: u64, count: usize) -> Result<[CheckResult; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut snr_err, mut power_err) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let inst = random_instance(&mut rng);
        for u in 0..inst.geometry.users.len() {
            let ch = build_channels(
                &inst.params,
                &inst.geometry,
                &inst.placement,
                &inst.allocation,
                u,
                PanelShape::MostSquare,
            )?;
            let config = optimal_reflection(&inst.params, &ch);
            let matrix = snr_full(&ch, &config, &inst.params)?;
            let (closed, _) = snr_closed_form(&inst.params, ch.d0, ch.d1, ch.d2, &inst.allocation);
            snr_err = snr_err.max(rel(closed, matrix));
            let (p1, p2) = per_element_power(&ch, &config, &inst.params)?;
            let pe = inst.params.per_element_power;
            for p in p1.iter().chain(&p2) {
                power_err = power_err.max(rel(*p, pe));
            }
        }
    }
    Ok([
        result("closed_form_vs_matrix", snr_err, SNR_TOL),
        result("element_power_equality", power_err, POWER_TOL),
    ])
}

/// Passive and single-surface closed forms against their matrix models.
pub fn benchmark_suite(seed: u64, count: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err = 0.0f64;
    for _ in 0..count {
        let inst = random_instance(&mut rng);
        let (p, g) = (&inst.params, &inst.geometry);
        let site = inst.placement.x0 + inst.placement.x1;
        for u in 0..g.users.len() {
            let (d0, d1, d2) = distances(g, &inst.placement, u)?;
            let closed = passive_snr(p, d0, d1, d2, &inst.allocation);
            let matrix = passive_snr_matrix(p, g, &inst.placement, &inst.allocation, u, PanelShape::MostSquare)?;
            err = err.max(rel(closed, matrix));
            let (da, db) = single_distances(g, site, u)?;
            for active in [true, false] {
                let (matrix, _) = single_snr_matrix(p, g, site, u, active, PanelShape::MostSquare)?;
                err = err.max(rel(single_snr(p, da, db, active), matrix));
            }
        }
    }
    Ok(result("benchmark_vs_matrix", err, SNR_TOL))
}

/// Ternary-search split against exhaustive search, as an objective ratio minus one.
pub fn allocation_suite(seed: u64, count: usize) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err = 0.0f64;
    for _ in 0..count {
        let inst = random_instance(&mut rng);
        let coeffs = AllocationCoefficients::for_placement(&inst.params, &inst.geometry, &inst.placement)?;
        let m = inst.params.total_elements;
        let fast = solve_allocation(&coeffs, m)?;
        let exact = allocation_oracle(&coeffs, m)?;
        let (vf, ve) = (
            coeffs.worst(fast.m1 as f64, fast.m2 as f64),
            coeffs.worst(exact.m1 as f64, exact.m2 as f64),
        );
        err = err.max(vf / ve - 1.0);
    }
    Ok(result("allocation_vs_exhaustive", err, 1e-6))
}

/// Optimizes the given scenario and audits the result from scratch.
pub fn audit_suite(params: &SystemParams, geometry: &Geometry) -> Result<CheckResult> {
    let solution = solve(params, geometry)?;
    let passed = audit(params, geometry, &solution).is_ok();
    Ok(CheckResult {
        name: "solution_audit",
        passed,
        max_rel_error: if passed { 0.0 } else { f64::INFINITY },
        tolerance: 0.0,
    })
}

/// Every suite, in a fixed order.
pub fn run_all(params: &SystemParams, geometry: &Geometry, seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    out.extend(lemma_suite(seed, SUITE_INSTANCES)?);
    out.push(benchmark_suite(seed.wrapping_add(1), SUITE_INSTANCES / 4)?);
    out.push(allocation_suite(seed.wrapping_add(2), SUITE_INSTANCES)?);
    out.push(audit_suite(params, geometry)?);
    Ok(out)
}

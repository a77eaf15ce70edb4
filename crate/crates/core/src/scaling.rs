//! Capacity scaling sweeps and the comparison against passive and
//! single-surface systems.
//!
//! Single-surface systems put all `M` elements on one surface at horizontal
//! position `x` and altitude `H`; `da` is its distance to the BS and `db` to
//! the user.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::allocation::{solve_allocation, AllocationCoefficients};
use crate::ao::{solve_with, AoOptions};
use crate::closed_form::{optimal_beam, optimal_phases, snr_closed_form, XiBreakdown};
use crate::error::{Error, Result};
use crate::model::{
    build_channels, check_consistent, direction_angles, distances, snr_full, steering_vector,
    Allocation, Geometry, PanelShape, Placement, ReflectionConfig, SystemParams, C64,
};
use crate::placement::grid_axis;

/// Grid spacing (m) for the placements of the benchmark systems.
pub const BENCHMARK_GRID_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkKind {
    DoubleActive,
    SingleActive,
    DoublePassive,
    SinglePassive,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [
        BenchmarkKind::DoubleActive,
        BenchmarkKind::SingleActive,
        BenchmarkKind::DoublePassive,
        BenchmarkKind::SinglePassive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::DoubleActive => "double-active",
            BenchmarkKind::SingleActive => "single-active",
            BenchmarkKind::DoublePassive => "double-passive",
            BenchmarkKind::SinglePassive => "single-passive",
        }
    }

    fn active(self) -> bool {
        matches!(self, BenchmarkKind::DoubleActive | BenchmarkKind::SingleActive)
    }

    fn double(self) -> bool {
        matches!(self, BenchmarkKind::DoubleActive | BenchmarkKind::DoublePassive)
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown system kind `{s}`")))
    }
}

/// How each system is deployed at a sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlacementPolicy {
    /// [`Placement::spread`]; single surfaces sit at the second surface's site.
    Spread,
    /// A given double placement; single surfaces sit at its second site `x0 + x1`.
    Fixed(Placement),
    /// Every system optimizes its own deployment.
    Optimize,
}

/// Deployment and min-rate of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub kind: BenchmarkKind,
    pub min_rate: f64,
    /// Horizontal surface positions from the BS (m).
    pub sites: Vec<f64>,
    pub elements: Vec<usize>,
}

/// `(da, db)` for a single surface at horizontal position `site`.
pub fn single_distances(geometry: &Geometry, site: f64, user: usize) -> Result<(f64, f64)> {
    let p = geometry.users.get(user).ok_or_else(|| Error::invalid("user index out of range"))?;
    let h = geometry.irs_altitude;
    let da = site.hypot(h);
    let along = geometry.bs_user_distance - site + p.radius * p.azimuth.cos();
    let across = p.radius * p.azimuth.sin();
    Ok((da, (along * along + h * h + across * across).sqrt()))
}

/// Closed-form SNR of one aligned surface with `M` elements. The active
/// surface saturates its per-element budget; the passive one reflects at unit
/// amplitude without added noise.
pub fn single_snr(params: &SystemParams, da: f64, db: f64, active: bool) -> f64 {
    let n = params.n_bs_antennas as f64;
    let m = params.total_elements as f64;
    let (pb, b) = (params.tx_power, params.ref_gain);
    let (ea, eb) = (da.powf(params.pathloss_exp), db.powf(params.pathloss_exp));
    let (a_sq, noise) = if active {
        let a_sq = params.per_element_power / (n * pb * b / ea + params.irs_noise);
        (a_sq, params.irs_noise)
    } else {
        (1.0, 0.0)
    };
    let signal = n * pb * b * b * a_sq * m * m / (ea * eb);
    signal / (noise * a_sq * m * b / eb + params.user_noise)
}

/// Aligned single-surface SNR and per-element powers by direct matrix products.
pub fn single_snr_matrix(
    params: &SystemParams,
    geometry: &Geometry,
    site: f64,
    user: usize,
    active: bool,
    panel: PanelShape,
) -> Result<(f64, Vec<f64>)> {
    let (da, db) = single_distances(geometry, site, user)?;
    let s = params.element_spacing / params.wavelength;
    let bs = geometry.bs_position();
    let irs = [site, 0.0, geometry.irs_altitude];
    let rx = geometry.user_position(user);
    let (n, m) = (params.n_bs_antennas, params.total_elements);
    let array = |from, to, count| -> Result<DVector<C64>> {
        let (az, el) = direction_angles(from, to)?;
        let (nh, nv) = panel.factor(count);
        steering_vector(az, el, nh, nv, s)
    };
    let bs_tx = array(bs, irs, n)?;
    let h1 = (array(irs, bs, m)? * bs_tx.adjoint()) * params.complex_gain(da);
    let h2 = array(irs, rx, m)? * params.complex_gain(db).conj();
    let beam = &bs_tx / C64::from(bs_tx.norm());
    let incident = &h1 * &beam;

    let noise = if active { params.irs_noise } else { 0.0 };
    let amp = if active {
        let per_unit = params.tx_power * incident.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        (params.per_element_power / (per_unit + noise)).sqrt()
    } else {
        1.0
    };
    let psi = DVector::from_iterator(
        m,
        h2.iter().zip(incident.iter()).map(|(h, x)| C64::from_polar(amp, h.arg() - x.arg())),
    );
    let reflected = psi.component_mul(&incident);
    let signal = h2.dotc(&reflected);
    let weighted = h2.conjugate().component_mul(&psi);
    let snr = params.tx_power * signal.norm_sqr()
        / (noise * weighted.norm_squared() + params.user_noise);
    let powers = reflected
        .iter()
        .zip(psi.iter())
        .map(|(r, p)| params.tx_power * r.norm_sqr() + noise * p.norm_sqr())
        .collect();
    Ok((snr, powers))
}

/// Closed-form SNR of the double-passive link (unit amplitudes, no surface noise).
pub fn passive_snr(params: &SystemParams, d0: f64, d1: f64, d2: f64, allocation: &Allocation) -> f64 {
    let n = params.n_bs_antennas as f64;
    let (m1, m2) = (allocation.m1 as f64, allocation.m2 as f64);
    let e: f64 = [d0, d1, d2].iter().map(|d| d.powf(params.pathloss_exp)).product();
    n * params.tx_power * params.ref_gain.powi(3) * m1 * m1 * m2 * m2 / (params.user_noise * e)
}

/// Double-passive SNR through the literal received-signal model.
pub fn passive_snr_matrix(
    params: &SystemParams,
    geometry: &Geometry,
    placement: &Placement,
    allocation: &Allocation,
    user: usize,
    panel: PanelShape,
) -> Result<f64> {
    let ch = build_channels(params, geometry, placement, allocation, user, panel)?;
    let (phases1, phases2) = optimal_phases(&ch);
    let config = ReflectionConfig {
        phases1,
        phases2,
        amp1: 1.0,
        amp2: 1.0,
        beam: optimal_beam(&ch),
    };
    let silent = SystemParams { irs_noise: 0.0, ..params.clone() };
    snr_full(&ch, &config, &silent)
}

fn tdma_min_rate(snr: impl IntoIterator<Item = f64>, users: usize) -> f64 {
    snr.into_iter()
        .map(|g| (1.0 + g).log2() / users as f64)
        .fold(f64::INFINITY, f64::min)
}

fn fixed_placement(geometry: &Geometry, policy: PlacementPolicy) -> Option<Placement> {
    match policy {
        PlacementPolicy::Spread => Some(Placement::spread(geometry)),
        PlacementPolicy::Fixed(p) => Some(p),
        PlacementPolicy::Optimize => None,
    }
}

fn double_active(
    params: &SystemParams,
    geometry: &Geometry,
    policy: PlacementPolicy,
) -> Result<BenchmarkResult> {
    let (placement, allocation) = match fixed_placement(geometry, policy) {
        Some(p) => {
            p.validate(geometry)?;
            let coeffs = AllocationCoefficients::for_placement(params, geometry, &p)?;
            (p, solve_allocation(&coeffs, params.total_elements)?)
        }
        None => {
            let opts = AoOptions { synthesis_limit: 0, ..AoOptions::default() };
            let s = solve_with(params, geometry, &opts)?;
            (s.placement, s.allocation)
        }
    };
    let snr = (0..geometry.users.len())
        .map(|u| {
            let (d0, d1, d2) = distances(geometry, &placement, u)?;
            Ok(snr_closed_form(params, d0, d1, d2, &allocation).0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkResult {
        kind: BenchmarkKind::DoubleActive,
        min_rate: tdma_min_rate(snr, geometry.users.len()),
        sites: vec![placement.x0, placement.x0 + placement.x1],
        elements: vec![allocation.m1, allocation.m2],
    })
}

fn double_passive(
    params: &SystemParams,
    geometry: &Geometry,
    policy: PlacementPolicy,
) -> Result<BenchmarkResult> {
    // The product M1²M2² is maximized by the even split.
    let allocation = Allocation::even(params.total_elements);
    let rate_at = |p: &Placement| -> Result<f64> {
        let snr = (0..geometry.users.len())
            .map(|u| {
                let (d0, d1, d2) = distances(geometry, p, u)?;
                Ok(passive_snr(params, d0, d1, d2, &allocation))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(tdma_min_rate(snr, geometry.users.len()))
    };
    let (placement, min_rate) = match fixed_placement(geometry, policy) {
        Some(p) => {
            p.validate(geometry)?;
            (p, rate_at(&p)?)
        }
        None => {
            let axis = grid_axis(geometry, BENCHMARK_GRID_STEP);
            let dist = geometry.bs_user_distance;
            let mut best: Option<(Placement, f64)> = None;
            for &x0 in &axis {
                for &x1 in &axis {
                    let p = Placement::from_prefix(x0, x1, dist);
                    if p.validate(geometry).is_err() {
                        break;
                    }
                    let r = rate_at(&p)?;
                    if best.map_or(true, |(_, b)| r > b) {
                        best = Some((p, r));
                    }
                }
            }
            best.ok_or_else(|| Error::invalid("no feasible passive placement"))?
        }
    };
    Ok(BenchmarkResult {
        kind: BenchmarkKind::DoublePassive,
        min_rate,
        sites: vec![placement.x0, placement.x0 + placement.x1],
        elements: vec![allocation.m1, allocation.m2],
    })
}

fn single(
    params: &SystemParams,
    geometry: &Geometry,
    policy: PlacementPolicy,
    active: bool,
) -> Result<BenchmarkResult> {
    let rate_at = |site: f64| -> Result<f64> {
        let snr = (0..geometry.users.len())
            .map(|u| {
                let (da, db) = single_distances(geometry, site, u)?;
                Ok(single_snr(params, da, db, active))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(tdma_min_rate(snr, geometry.users.len()))
    };
    let (site, min_rate) = match fixed_placement(geometry, policy) {
        Some(p) => {
            p.validate(geometry)?;
            (p.x0 + p.x1, rate_at(p.x0 + p.x1)?)
        }
        None => {
            let lo = geometry.min_segment;
            let hi = geometry.bs_user_distance - lo;
            let mut best = (lo, f64::NEG_INFINITY);
            for k in 0.. {
                let x = lo + k as f64 * BENCHMARK_GRID_STEP;
                if x > hi + 1e-9 {
                    break;
                }
                let r = rate_at(x)?;
                if r > best.1 {
                    best = (x, r);
                }
            }
            best
        }
    };
    Ok(BenchmarkResult {
        kind: if active { BenchmarkKind::SingleActive } else { BenchmarkKind::SinglePassive },
        min_rate,
        sites: vec![site],
        elements: vec![params.total_elements],
    })
}

/// Min-rate of one system under the given deployment policy.
pub fn benchmark_with(
    kind: BenchmarkKind,
    params: &SystemParams,
    geometry: &Geometry,
    policy: PlacementPolicy,
) -> Result<BenchmarkResult> {
    check_consistent(params, geometry)?;
    match (kind.double(), kind.active()) {
        (true, true) => double_active(params, geometry, policy),
        (true, false) => double_passive(params, geometry, policy),
        (false, active) => single(params, geometry, policy, active),
    }
}

/// Min-rate with every system optimizing its own deployment.
pub fn benchmark_rate(kind: BenchmarkKind, params: &SystemParams, geometry: &Geometry) -> Result<f64> {
    Ok(benchmark_with(kind, params, geometry, PlacementPolicy::Optimize)?.min_rate)
}

/// All four systems in [`BenchmarkKind::ALL`] order.
pub fn compare(
    params: &SystemParams,
    geometry: &Geometry,
    policy: PlacementPolicy,
) -> Result<Vec<BenchmarkResult>> {
    BenchmarkKind::ALL
        .into_iter()
        .map(|k| benchmark_with(k, params, geometry, policy))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Capacity per system, in [`BenchmarkKind::ALL`] order (bps/Hz).
    pub rates: [f64; 4],
    /// Capacity gain over the previous row when this row doubles its value.
    pub slopes: [Option<f64>; 4],
}

/// Parameters and geometry of the single zone-center user used by sweeps.
pub fn scaling_setup(params: &SystemParams, geometry: &Geometry) -> (SystemParams, Geometry) {
    (SystemParams { n_users: 1, ..params.clone() }, geometry.zone_center())
}

fn sweep(
    values: &[f64],
    mut point: impl FnMut(f64) -> Result<[f64; 4]>,
) -> Result<Vec<SweepRow>> {
    let mut rows: Vec<SweepRow> = Vec::with_capacity(values.len());
    for &v in values {
        let rates = point(v)?;
        let mut slopes = [None; 4];
        if let Some(prev) = rows.last() {
            if (v - 2.0 * prev.value).abs() <= 1e-12 * v {
                for k in 0..4 {
                    slopes[k] = Some(rates[k] - prev.rates[k]);
                }
            }
        }
        rows.push(SweepRow { value: v, rates, slopes });
    }
    Ok(rows)
}

fn increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0])
}

fn all_rates(params: &SystemParams, geometry: &Geometry, policy: PlacementPolicy) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (slot, kind) in out.iter_mut().zip(BenchmarkKind::ALL) {
        *slot = benchmark_with(kind, params, geometry, policy)?.min_rate;
    }
    Ok(out)
}

/// Zone-center capacity of every system as the element budget grows.
pub fn sweep_elements(
    params: &SystemParams,
    geometry: &Geometry,
    policy: PlacementPolicy,
    m_values: &[usize],
) -> Result<Vec<SweepRow>> {
    if m_values.iter().any(|m| *m < 2 || m % 2 != 0) {
        return Err(Error::invalid("element budgets must be even and at least 2"));
    }
    let values: Vec<f64> = m_values.iter().map(|&m| m as f64).collect();
    if !increasing(&values) {
        return Err(Error::invalid("element budgets must be strictly increasing"));
    }
    let (base, geo) = scaling_setup(params, geometry);
    sweep(&values, |m| {
        let p = SystemParams { total_elements: m as usize, ..base.clone() };
        all_rates(&p, &geo, policy)
    })
}

/// Zone-center capacity of every system as the per-element power grows.
pub fn sweep_power(
    params: &SystemParams,
    geometry: &Geometry,
    policy: PlacementPolicy,
    pe_values: &[f64],
) -> Result<Vec<SweepRow>> {
    if !increasing(pe_values) || pe_values.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::invalid("per-element powers must be positive and strictly increasing"));
    }
    let (base, geo) = scaling_setup(params, geometry);
    sweep(pe_values, |pe| {
        let p = SystemParams { per_element_power: pe, ..base.clone() };
        all_rates(&p, &geo, policy)
    })
}

/// Double-active capacity gain from `pe` to `100·pe` at the zone center.
pub fn saturation_metric(
    params: &SystemParams,
    geometry: &Geometry,
    policy: PlacementPolicy,
    pe: f64,
) -> Result<f64> {
    let rows = sweep_power(params, geometry, policy, &[pe, 100.0 * pe])?;
    Ok(rows[1].rates[0] - rows[0].rates[0])
}

/// Zone-center `ξ` addends at the optimal split for a fixed placement.
pub fn xi_breakdown_at(
    params: &SystemParams,
    geometry: &Geometry,
    placement: &Placement,
) -> Result<(Allocation, XiBreakdown)> {
    let (p, g) = scaling_setup(params, geometry);
    let coeffs = AllocationCoefficients::for_placement(&p, &g, placement)?;
    let allocation = solve_allocation(&coeffs, p.total_elements)?;
    let (d0, d1, d2) = distances(&g, placement, 0)?;
    Ok((allocation, snr_closed_form(&p, d0, d1, d2, &allocation).1))
}

/// Smallest even budget in `[start, max]` at which the double-passive system
/// outperforms the double-active one, found by doubling then bisection.
pub fn passive_crossover(
    params: &SystemParams,
    geometry: &Geometry,
    policy: PlacementPolicy,
    start: usize,
    max: usize,
) -> Result<Option<usize>> {
    let margin = |m: usize| -> Result<f64> {
        let p = SystemParams { total_elements: m, ..params.clone() };
        let passive = benchmark_with(BenchmarkKind::DoublePassive, &p, geometry, policy)?;
        let active = benchmark_with(BenchmarkKind::DoubleActive, &p, geometry, policy)?;
        Ok(passive.min_rate - active.min_rate)
    };
    let start = start.max(2) + start % 2;
    if margin(start)? > 0.0 {
        return Ok(Some(start));
    }
    let mut hi = start;
    let mut lo;
    loop {
        if hi >= max {
            return Ok(None);
        }
        lo = hi;
        hi = (2 * hi).min(max - max % 2);
        if margin(hi)? > 0.0 {
            break;
        }
    }
    // Invariant: passive loses at lo and wins at hi.
    while hi - lo > 2 {
        let mid = (lo + (hi - lo) / 2) & !1;
        let mid = if mid <= lo { lo + 2 } else { mid };
        if margin(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UserPosition;

    fn center() -> (SystemParams, Geometry) {
        let g = Geometry::new(200.0, 5.0, vec![UserPosition { radius: 0.0, azimuth: 0.0 }]);
        (SystemParams { n_users: 1, ..SystemParams::default() }, g)
    }

    #[test]
    fn kind_names_round_trip() {
        for k in BenchmarkKind::ALL {
            assert_eq!(k.name().parse::<BenchmarkKind>().unwrap(), k);
        }
        assert!("triple-active".parse::<BenchmarkKind>().is_err());
    }

    #[test]
    fn single_closed_form_matches_matrix() {
        let (mut params, g) = center();
        params.total_elements = 64;
        for (site, active) in [(20.0, true), (180.0, true), (100.0, false), (3.0, true)] {
            let (da, db) = single_distances(&g, site, 0).unwrap();
            let closed = single_snr(&params, da, db, active);
            let (matrix, powers) =
                single_snr_matrix(&params, &g, site, 0, active, PanelShape::MostSquare).unwrap();
            assert!(((closed - matrix) / matrix).abs() <= 1e-9, "{site}: {closed} {matrix}");
            if active {
                let pe = params.per_element_power;
                assert!(powers.iter().all(|p| ((p - pe) / pe).abs() <= 1e-9));
            }
        }
    }

    #[test]
    fn passive_closed_form_matches_matrix() {
        let (params, g) = center();
        let p = Placement::from_prefix(20.0, 160.0, 200.0);
        for alloc in [Allocation::new(2, 126), Allocation::new(64, 64)] {
            let (d0, d1, d2) = distances(&g, &p, 0).unwrap();
            let closed = passive_snr(&params, d0, d1, d2, &alloc);
            let matrix = passive_snr_matrix(&params, &g, &p, &alloc, 0, PanelShape::Linear).unwrap();
            assert!(((closed - matrix) / matrix).abs() <= 1e-9);
        }
    }

    #[test]
    fn silent_unit_gain_active_collapses_to_passive() {
        let (params, _) = center();
        let quiet = SystemParams { irs_noise: 1e-300, ..params.clone() };
        let alloc = Allocation::new(40, 88);
        let (d0, d1, d2) = (12.0, 170.0, 9.0);
        // Saturated amplitudes differ from one, so rescale the budget until both are unity.
        let n = quiet.n_bs_antennas as f64;
        let e0 = d0 * d0;
        let pe = n * quiet.tx_power * quiet.ref_gain / e0;
        let unit = SystemParams { per_element_power: pe, ..quiet };
        let (a1, a2) = crate::closed_form::optimal_amp_factors(&unit, d0, d1, alloc.m1);
        assert!((a1 - 1.0).abs() < 1e-9);
        let scaled = passive_snr(&unit, d0, d1, d2, &alloc) * a2 * a2;
        let active = snr_closed_form(&unit, d0, d1, d2, &alloc).0;
        assert!(((active - scaled) / scaled).abs() <= 1e-6);
    }

    #[test]
    fn slopes_only_for_doublings() {
        let (params, g) = center();
        let rows = sweep_elements(&params, &g, PlacementPolicy::Spread, &[64, 128, 192, 384]).unwrap();
        assert!(rows[0].slopes[0].is_none());
        assert!(rows[1].slopes[0].is_some());
        assert!(rows[2].slopes[0].is_none());
        assert!(rows[3].slopes[0].is_some());
        assert!(sweep_elements(&params, &g, PlacementPolicy::Spread, &[64, 63]).is_err());
        assert!(sweep_elements(&params, &g, PlacementPolicy::Spread, &[128, 64]).is_err());
    }

    #[test]
    fn passive_slope_is_four_per_doubling() {
        let (params, g) = center();
        let rows = sweep_elements(&params, &g, PlacementPolicy::Spread, &[1024, 2048, 4096]).unwrap();
        let s = rows[2].slopes[2].unwrap();
        assert!((s - 4.0).abs() < 0.01, "{s}");
        let s = rows[2].slopes[3].unwrap();
        assert!((s - 2.0).abs() < 0.05, "{s}");
    }

    #[test]
    fn vanishing_budget_kills_capacity() {
        let (params, g) = center();
        let rows = sweep_power(&params, &g, PlacementPolicy::Spread, &[1e-30, 1e-3]).unwrap();
        assert!(rows[0].rates[0] < 1e-6);
        assert!(rows[1].rates[0] > rows[0].rates[0]);
    }

    #[test]
    fn low_power_doubling_quadruples_snr() {
        let (params, g) = center();
        let p = Placement::spread(&g);
        let gamma = |pe: f64| {
            let q = SystemParams { per_element_power: pe, ..params.clone() };
            let (_, xi) = xi_breakdown_at(&q, &g, &p).unwrap();
            (crate::closed_form::snr_numerator(&q) / xi.total, xi.noise_noise / xi.total)
        };
        let (low, share) = gamma(1e-12);
        assert!(share > 0.99);
        let (high, _) = gamma(2e-12);
        assert!(((high / low).log2() - 2.0).abs() < 0.01);
    }

    #[test]
    fn optimized_single_sites_beat_fixed_ones() {
        let (params, g) = center();
        for kind in [BenchmarkKind::SingleActive, BenchmarkKind::DoublePassive] {
            let fixed = benchmark_with(kind, &params, &g, PlacementPolicy::Spread).unwrap();
            let best = benchmark_with(kind, &params, &g, PlacementPolicy::Optimize).unwrap();
            assert!(best.min_rate >= fixed.min_rate);
        }
    }

    #[test]
    fn crossover_brackets_the_sign_change() {
        let (params, g) = center();
        let m = passive_crossover(&params, &g, PlacementPolicy::Spread, 128, 1 << 20)
            .unwrap()
            .expect("passive eventually wins");
        assert_eq!(m % 2, 0);
        let at = |m: usize| {
            let p = SystemParams { total_elements: m, ..params.clone() };
            let r = all_rates(&p, &g, PlacementPolicy::Spread).unwrap();
            r[2] - r[0]
        };
        assert!(at(m) > 0.0);
        assert!(at(m - 2) <= 0.0);
    }
}

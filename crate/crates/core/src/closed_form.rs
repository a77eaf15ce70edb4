//! Optimal BS beam, phase alignment and amplification factors, and the
//! resulting closed-form SNR `γ = N P_B β³ / ξ`.
//!
//! The five addends of `ξ` are obtained by substituting the phase-aligned,
//! power-saturating reflections into the literal SNR expression of
//! [`crate::model::snr_full`]. Because the inter-surface channel is rank one,
//! the amplification noise injected at IRS 1 is re-radiated along the same
//! steering direction as the signal and is combined coherently by IRS 2. The
//! resulting cross addend is `σ_I² β² d0^α / M1`, with no `M2` in the
//! denominator.

use nalgebra::DVector;

use crate::error::Result;
use crate::model::{
    check_consistent, distances, Allocation, ChannelSet, Geometry, Placement, ReflectionConfig,
    SystemParams, C64,
};

/// Addends of `ξ` for one user; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiBreakdown {
    /// `(σ_I⁴σ_0² d0 d1 d2 + N P_B σ_I²σ_0² β d1 d2) / (P_e² M1² M2²)` (distances raised to `α`).
    pub noise_noise: f64,
    /// `σ_0²σ_I² β d0 d2 / (P_e M1 M2²)`.
    pub irs2_noise: f64,
    /// `(σ_I⁴ β d0 d1 + N P_B σ_I² β² d1) / (P_e M1² M2)`.
    pub irs1_noise: f64,
    /// `N P_B σ_0² β² d2 / (P_e M2²)`.
    pub signal_limited: f64,
    /// `σ_I² β² d0 / M1`, independent of `P_e`.
    pub cross: f64,
    pub total: f64,
}

impl XiBreakdown {
    pub fn addends(&self) -> [f64; 5] {
        [
            self.noise_noise,
            self.irs2_noise,
            self.irs1_noise,
            self.signal_limited,
            self.cross,
        ]
    }
}

/// `ξ` at a (possibly fractional) element split.
pub fn xi_relaxed(params: &SystemParams, d0: f64, d1: f64, d2: f64, m1: f64, m2: f64) -> XiBreakdown {
    let n = params.n_bs_antennas as f64;
    let (pb, pe) = (params.tx_power, params.per_element_power);
    let (si, s0, b) = (params.irs_noise, params.user_noise, params.ref_gain);
    let a = params.pathloss_exp;
    let (e0, e1, e2) = (d0.powf(a), d1.powf(a), d2.powf(a));

    let noise_noise =
        (si * si * s0 * e0 * e1 * e2 + n * pb * si * s0 * b * e1 * e2) / (pe * pe * m1 * m1 * m2 * m2);
    let irs2_noise = s0 * si * b * e0 * e2 / (pe * m1 * m2 * m2);
    let irs1_noise = (si * si * b * e0 * e1 + n * pb * si * b * b * e1) / (pe * m1 * m1 * m2);
    let signal_limited = n * pb * s0 * b * b * e2 / (pe * m2 * m2);
    let cross = si * b * b * e0 / m1;
    XiBreakdown {
        noise_noise,
        irs2_noise,
        irs1_noise,
        signal_limited,
        cross,
        total: noise_noise + irs2_noise + irs1_noise + signal_limited + cross,
    }
}

/// `N P_B β³`, the numerator shared by every closed-form SNR.
pub fn snr_numerator(params: &SystemParams) -> f64 {
    params.n_bs_antennas as f64 * params.tx_power * params.ref_gain.powi(3)
}

pub fn snr_closed_form(
    params: &SystemParams,
    d0: f64,
    d1: f64,
    d2: f64,
    allocation: &Allocation,
) -> (f64, XiBreakdown) {
    let xi = xi_relaxed(params, d0, d1, d2, allocation.m1 as f64, allocation.m2 as f64);
    (snr_numerator(params) / xi.total, xi)
}

/// Maximum-ratio beam toward IRS 1; unit norm and identical for every user.
pub fn optimal_beam(channels: &ChannelSet) -> DVector<C64> {
    let a = &channels.bs_steering;
    a / C64::from(a.norm())
}

/// Phase profiles that co-phase every one of the `M1·M2` double-reflection terms.
pub fn optimal_phases(channels: &ChannelSet) -> (Vec<f64>, Vec<f64>) {
    let tau = std::f64::consts::TAU;
    let beam = optimal_beam(channels);
    let incident = &channels.h1_matrix * beam;
    let phases1 = channels
        .g2_vec
        .iter()
        .zip(incident.iter())
        .map(|(g2, h)| (g2.arg() - h.arg()).rem_euclid(tau))
        .collect();
    let phases2 = channels
        .h2_vec
        .iter()
        .zip(channels.g1_vec.iter())
        .map(|(h2, g1)| (h2.arg() - g1.arg()).rem_euclid(tau))
        .collect();
    (phases1, phases2)
}

/// Amplitude factors `(a1, a2)` that saturate every per-element power budget
/// under the aligned phases.
pub fn optimal_amp_factors(params: &SystemParams, d0: f64, d1: f64, m1: usize) -> (f64, f64) {
    let n = params.n_bs_antennas as f64;
    let (pb, pe, si, b) = (
        params.tx_power,
        params.per_element_power,
        params.irs_noise,
        params.ref_gain,
    );
    let e0 = d0.powf(params.pathloss_exp);
    let e1 = d1.powf(params.pathloss_exp);
    let m1 = m1 as f64;
    let a1_sq = pe * e0 / (n * pb * b + si * e0);
    let a2_sq = pe * e0 * e1 / (n * pb * b * b * m1 * m1 * a1_sq + si * b * m1 * a1_sq * e0 + si * e0 * e1);
    (a1_sq.sqrt(), a2_sq.sqrt())
}

/// Complete optimal reflection design for one user's channels.
pub fn optimal_reflection(params: &SystemParams, channels: &ChannelSet) -> ReflectionConfig {
    let (phases1, phases2) = optimal_phases(channels);
    let (amp1, amp2) = optimal_amp_factors(params, channels.d0, channels.d1, channels.m1());
    ReflectionConfig {
        phases1,
        phases2,
        amp1,
        amp2,
        beam: optimal_beam(channels),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub snr: Vec<f64>,
    /// TDMA rates `log2(1 + γ) / L` (bps/Hz).
    pub rates: Vec<f64>,
    pub min_rate: f64,
    pub worst_user: usize,
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn min_rate(
    params: &SystemParams,
    geometry: &Geometry,
    placement: &Placement,
    allocation: &Allocation,
) -> Result<RateReport> {
    check_consistent(params, geometry)?;
    placement.validate(geometry)?;
    allocation.validate(params)?;
    let l = geometry.users.len() as f64;
    let mut xis = Vec::with_capacity(geometry.users.len());
    for user in 0..geometry.users.len() {
        let (d0, d1, d2) = distances(geometry, placement, user)?;
        xis.push(snr_closed_form(params, d0, d1, d2, allocation).1.total);
    }
    let worst_user = argmax(xis.iter().copied());
    let snr: Vec<f64> = xis.iter().map(|x| snr_numerator(params) / x).collect();
    let rates: Vec<f64> = snr.iter().map(|g| (1.0 + g).log2() / l).collect();
    Ok(RateReport {
        min_rate: rates[worst_user],
        snr,
        rates,
        worst_user,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        build_channels, per_element_power, snr_full, PanelShape, UserPosition,
    };
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn center() -> Geometry {
        Geometry::new(200.0, 5.0, vec![UserPosition { radius: 0.0, azimuth: 0.0 }])
    }

    fn one_user() -> SystemParams {
        SystemParams { n_users: 1, ..SystemParams::default() }
    }

    fn channels(params: &SystemParams, x0: f64, x1: f64, m1: usize) -> ChannelSet {
        let g = center();
        let p = Placement::from_prefix(x0, x1, g.bs_user_distance);
        let alloc = Allocation::new(m1, params.total_elements - m1);
        build_channels(params, &g, &p, &alloc, 0, PanelShape::MostSquare).unwrap()
    }

    #[test]
    fn single_antenna_beam_is_unity() {
        let params = SystemParams { n_bs_antennas: 1, ..one_user() };
        let b = optimal_beam(&channels(&params, 20.0, 160.0, 64));
        assert_eq!(b.len(), 1);
        assert!((b[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn beam_is_constant_modulus() {
        let params = SystemParams { n_bs_antennas: 6, ..one_user() };
        let b = optimal_beam(&channels(&params, 20.0, 160.0, 64));
        for z in b.iter() {
            assert!((z.norm() - 1.0 / 6f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn optimal_beam_beats_random_beams() {
        let params = one_user();
        let ch = channels(&params, 10.0, 180.0, 64);
        let best = optimal_reflection(&params, &ch);
        let reference = snr_full(&ch, &best, &params).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let w = DVector::from_iterator(
                4,
                (0..4).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
            );
            let cfg = ReflectionConfig { beam: &w / C64::from(w.norm()), ..best.clone() };
            assert!(snr_full(&ch, &cfg, &params).unwrap() <= reference * (1.0 + 1e-12));
        }
    }

    fn composite(ch: &ChannelSet, cfg: &ReflectionConfig) -> C64 {
        let psi1 = nalgebra::DMatrix::from_diagonal(&cfg.psi1());
        let psi2 = nalgebra::DMatrix::from_diagonal(&cfg.psi2());
        (ch.h2_vec.adjoint() * psi2 * &ch.g_matrix * psi1 * &ch.h1_matrix * &cfg.beam)[(0, 0)]
    }

    #[test]
    fn aligned_composite_channel_magnitude() {
        for (m1, total) in [(1usize, 2usize), (7, 20), (16, 48)] {
            let params = SystemParams { total_elements: total, ..one_user() };
            let ch = channels(&params, 15.0, 150.0, m1);
            let (phases1, phases2) = optimal_phases(&ch);
            let cfg = ReflectionConfig {
                phases1,
                phases2,
                amp1: 2.5,
                amp2: 0.7,
                beam: optimal_beam(&ch),
            };
            let expected = 4f64.sqrt()
                * ch.h1.norm()
                * ch.g.norm()
                * ch.h2.norm()
                * 2.5
                * 0.7
                * (m1 * (total - m1)) as f64;
            assert!(rel(composite(&ch, &cfg).norm(), expected) < 1e-12);
        }
    }

    #[test]
    fn flipping_any_phase_lowers_snr() {
        let params = SystemParams { total_elements: 20, ..one_user() };
        let ch = channels(&params, 15.0, 150.0, 8);
        let best = optimal_reflection(&params, &ch);
        let reference = snr_full(&ch, &best, &params).unwrap();
        for k in 0..8 {
            let mut cfg = best.clone();
            cfg.phases1[k] += PI;
            assert!(snr_full(&ch, &cfg, &params).unwrap() < reference);
        }
        for k in 0..12 {
            let mut cfg = best.clone();
            cfg.phases2[k] += PI;
            assert!(snr_full(&ch, &cfg, &params).unwrap() < reference);
        }
    }

    #[test]
    fn first_amplitude_example() {
        let params = SystemParams {
            per_element_power: 1e-3,
            tx_power: 1.0,
            ref_gain: 1e-3,
            irs_noise: 1e-11,
            n_bs_antennas: 4,
            ..one_user()
        };
        let (a1, _) = optimal_amp_factors(&params, 10.0, 100.0, 64);
        // Independent route: the constraint P_B N |h1|² a² + σ_I² a² = P_e.
        let load = params.tx_power * 4.0 * 1e-3 / 100.0 + params.irs_noise;
        assert!(rel(a1 * a1, 1e-3 / load) < 1e-12);
        assert!(rel(a1 * a1, 0.1 / (4e-3 + 1e-9)) < 1e-12);
        assert!((a1 * a1 - 24.999_993_75).abs() < 1e-6);
    }

    #[test]
    fn overwhelming_irs_noise_shuts_amplifier() {
        let params = SystemParams { irs_noise: 1e12, ..one_user() };
        let (a1, a2) = optimal_amp_factors(&params, 10.0, 100.0, 64);
        assert!(a1 * a1 < 1e-14 && a2 * a2 < 1e-14);
    }

    #[test]
    fn optimal_reflection_saturates_every_element() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let params = SystemParams {
                n_bs_antennas: rng.gen_range(1..7),
                total_elements: rng.gen_range(2..60),
                per_element_power: 10f64.powf(rng.gen_range(-5.0..0.0)),
                irs_noise: 10f64.powf(rng.gen_range(-13.0..-9.0)),
                ..one_user()
            };
            let m1 = rng.gen_range(1..params.total_elements);
            let ch = channels(&params, rng.gen_range(1.0..80.0), rng.gen_range(1.0..100.0), m1);
            let cfg = optimal_reflection(&params, &ch);
            let (p1, p2) = per_element_power(&ch, &cfg, &params).unwrap();
            for p in p1.iter().chain(&p2) {
                assert!(rel(*p, params.per_element_power) < 1e-9, "{p}");
            }
        }
    }

    #[test]
    fn closed_form_matches_matrix_at_reference_point() {
        let params = one_user();
        let ch = channels(&params, 10.0, 180.0, 64);
        let cfg = optimal_reflection(&params, &ch);
        let matrix = snr_full(&ch, &cfg, &params).unwrap();
        let (closed, _) = snr_closed_form(&params, ch.d0, ch.d1, ch.d2, &Allocation::new(64, 64));
        assert!(rel(closed, matrix) < 1e-9, "{closed} vs {matrix}");
    }

    #[test]
    fn passive_limit_matches_product_distance_law() {
        // Unit amplitudes, no amplification noise, M1 = M2 = 2.
        let params = SystemParams { total_elements: 4, irs_noise: 0.0, ..one_user() };
        let ch = channels(&params, 12.0, 170.0, 2);
        let (phases1, phases2) = optimal_phases(&ch);
        let cfg = ReflectionConfig { phases1, phases2, amp1: 1.0, amp2: 1.0, beam: optimal_beam(&ch) };
        let matrix = snr_full(&ch, &cfg, &params).unwrap();
        let b = params.ref_gain;
        let expected = 4.0 * params.tx_power * b.powi(3) * 16.0
            / (params.user_noise * (ch.d0 * ch.d1 * ch.d2).powi(2));
        assert!(rel(matrix, expected) < 1e-9);
    }

    #[test]
    fn noiseless_limit_keeps_only_signal_term() {
        let params = SystemParams { irs_noise: 0.0, total_elements: 2, ..one_user() };
        let (_, xi) = snr_closed_form(&params, 1.0, 1.0, 1.0, &Allocation::new(1, 1));
        assert_eq!(xi.noise_noise + xi.irs2_noise + xi.irs1_noise + xi.cross, 0.0);
        assert!(xi.signal_limited > 0.0 && xi.total == xi.signal_limited);
    }

    #[test]
    fn per_element_power_exponents() {
        let params = one_user();
        let doubled = SystemParams { per_element_power: 2.0 * params.per_element_power, ..params.clone() };
        let (_, a) = snr_closed_form(&params, 20.6, 160.0, 5.0, &Allocation::new(40, 88));
        let (_, b) = snr_closed_form(&doubled, 20.6, 160.0, 5.0, &Allocation::new(40, 88));
        assert!(rel(b.noise_noise, a.noise_noise / 4.0) < 1e-14);
        assert!(rel(b.irs2_noise, a.irs2_noise / 2.0) < 1e-14);
        assert!(rel(b.irs1_noise, a.irs1_noise / 2.0) < 1e-14);
        assert!(rel(b.signal_limited, a.signal_limited / 2.0) < 1e-14);
        assert_eq!(b.cross, a.cross);
    }

    #[test]
    fn panel_shape_does_not_change_aligned_snr() {
        let params = one_user();
        let g = center();
        let p = Placement::from_prefix(25.0, 150.0, 200.0);
        let alloc = Allocation::new(48, 80);
        let snr = |shape| {
            let ch = build_channels(&params, &g, &p, &alloc, 0, shape).unwrap();
            snr_full(&ch, &optimal_reflection(&params, &ch), &params).unwrap()
        };
        assert!(rel(snr(PanelShape::Linear), snr(PanelShape::MostSquare)) < 1e-9);
    }

    #[test]
    fn single_user_min_rate_is_its_rate() {
        let params = one_user();
        let g = center();
        let r = min_rate(&params, &g, &Placement::spread(&g), &Allocation::even(128)).unwrap();
        assert_eq!(r.rates.len(), 1);
        assert_eq!(r.min_rate, r.rates[0]);
        assert!(rel(r.min_rate, (1.0 + r.snr[0]).log2()) < 1e-15);
    }

    #[test]
    fn mirrored_users_share_a_rate() {
        let params = SystemParams { n_users: 2, ..SystemParams::default() };
        let g = Geometry::new(
            200.0,
            5.0,
            vec![
                UserPosition { radius: 25.0, azimuth: PI / 2.0 },
                UserPosition { radius: 25.0, azimuth: 3.0 * PI / 2.0 },
            ],
        );
        let r = min_rate(&params, &g, &Placement::spread(&g), &Allocation::even(128)).unwrap();
        assert!(rel(r.rates[0], r.rates[1]) < 1e-12);
    }

    #[test]
    fn worst_user_is_farthest_from_irs2() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let users = (0..4)
            .map(|_| UserPosition {
                radius: 30.0 * rng.gen::<f64>().sqrt(),
                azimuth: rng.gen_range(0.0..2.0 * PI),
            })
            .collect();
        let g = Geometry::new(200.0, 5.0, users);
        let params = SystemParams::default();
        let p = Placement::from_prefix(10.0, 175.0, 200.0);
        let r = min_rate(&params, &g, &p, &Allocation::new(50, 78)).unwrap();
        let d2: Vec<f64> = (0..4).map(|u| distances(&g, &p, u).unwrap().2).collect();
        assert_eq!(r.worst_user, argmax(d2.iter().copied()));
        let direct = r.rates.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(r.min_rate, direct);
    }

    proptest! {
        #[test]
        fn xi_strictly_decreases_in_each_surface_size(
            m1 in 1.0f64..500.0, m2 in 1.0f64..500.0,
            d0 in 5.0f64..100.0, d1 in 1.0f64..300.0, d2 in 5.0f64..100.0
        ) {
            let params = one_user();
            let base = xi_relaxed(&params, d0, d1, d2, m1, m2).total;
            prop_assert!(xi_relaxed(&params, d0, d1, d2, m1 + 1.0, m2).total < base);
            prop_assert!(xi_relaxed(&params, d0, d1, d2, m1, m2 + 1.0).total < base);
        }

        #[test]
        fn snr_strictly_decreases_with_each_distance(
            d0 in 5.0f64..100.0, d1 in 1.0f64..300.0, d2 in 5.0f64..100.0
        ) {
            let params = one_user();
            let a = Allocation::new(60, 68);
            let (g, _) = snr_closed_form(&params, d0, d1, d2, &a);
            prop_assert!(snr_closed_form(&params, d0 * 1.01, d1, d2, &a).0 < g);
            prop_assert!(snr_closed_form(&params, d0, d1 * 1.01, d2, &a).0 < g);
            prop_assert!(snr_closed_form(&params, d0, d1, d2 * 1.01, &a).0 < g);
        }
    }
}

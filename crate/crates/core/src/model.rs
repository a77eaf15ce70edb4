//! System model: radio constants, deployment geometry, line-of-sight channel
//! construction and the literal matrix evaluation of the received SNR and the
//! per-element amplifier load.
//!
//! Everything here is evaluated by plain matrix arithmetic on the constructed
//! channels. The closed forms in [`crate::closed_form`] are checked against
//! these routines, never the other way round.
//!
//! Coordinates: the BS sits at the origin, the user-zone center at `(D, 0, 0)`,
//! IRS 1 at `(x0, 0, H)` and IRS 2 at `(x0 + x1, 0, H)`. User `l` sits at
//! `(D + r cos θ, r sin θ, 0)`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Absolute tolerance on `x0 + x1 + x2 = D` (meters).
pub const PLACEMENT_SUM_TOL: f64 = 1e-9;

/// Radio constants shared by every link.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Number of BS antennas `N`.
    pub n_bs_antennas: usize,
    /// Element budget `M` split between the two surfaces.
    pub total_elements: usize,
    /// Carrier wavelength (m).
    pub wavelength: f64,
    /// Inter-element spacing of every array (m).
    pub element_spacing: f64,
    /// Channel power gain at 1 m, linear.
    pub ref_gain: f64,
    pub pathloss_exp: f64,
    /// BS transmit power `P_B` (W).
    pub tx_power: f64,
    /// Amplification power available to each reflecting element `P_e` (W).
    pub per_element_power: f64,
    /// Amplification noise power per element `σ_I²` (W).
    pub irs_noise: f64,
    /// Receiver noise power `σ_0²` (W).
    pub user_noise: f64,
    pub n_users: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n_bs_antennas: 4,
            total_elements: 128,
            wavelength: 0.4,
            element_spacing: 0.2,
            ref_gain: 1e-3,
            pathloss_exp: 2.0,
            tx_power: 1.0,
            per_element_power: 1e-3,
            irs_noise: 1e-11,
            user_noise: 1e-11,
            n_users: 4,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {v}")))
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_bs_antennas < 1 {
            return Err(Error::validation("n_bs_antennas", "must be >= 1"));
        }
        if self.total_elements < 1 {
            return Err(Error::validation("total_elements", "must be >= 1"));
        }
        if self.n_users < 1 {
            return Err(Error::validation("n_users", "must be >= 1"));
        }
        positive("wavelength", self.wavelength)?;
        positive("element_spacing", self.element_spacing)?;
        positive("ref_gain", self.ref_gain)?;
        positive("pathloss_exp", self.pathloss_exp)?;
        positive("tx_power", self.tx_power)?;
        positive("per_element_power", self.per_element_power)?;
        positive("irs_noise", self.irs_noise)?;
        positive("user_noise", self.user_noise)?;
        Ok(())
    }

    /// Channel power gain `β / d^α` at distance `d`.
    pub fn power_gain(&self, d: f64) -> f64 {
        self.ref_gain / d.powf(self.pathloss_exp)
    }

    /// Complex LoS gain `β^{1/2} e^{-j2πd/λ} / d^{α/2}`.
    pub fn complex_gain(&self, d: f64) -> C64 {
        let mag = self.ref_gain.sqrt() / d.powf(self.pathloss_exp / 2.0);
        C64::from_polar(mag, -2.0 * PI * d / self.wavelength)
    }
}

/// Polar offset of one user from the zone center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserPosition {
    pub radius: f64,
    pub azimuth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// Horizontal BS to zone-center distance `D` (m).
    pub bs_user_distance: f64,
    /// Altitude `H` of both surfaces (m).
    pub irs_altitude: f64,
    pub users: Vec<UserPosition>,
    /// Lower bound on every placement segment `x0, x1, x2` (m).
    pub min_segment: f64,
}

impl Geometry {
    pub fn new(bs_user_distance: f64, irs_altitude: f64, users: Vec<UserPosition>) -> Self {
        Self {
            bs_user_distance,
            irs_altitude,
            users,
            min_segment: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("bs_user_distance", self.bs_user_distance)?;
        positive("irs_altitude", self.irs_altitude)?;
        positive("min_segment", self.min_segment)?;
        if self.users.is_empty() {
            return Err(Error::validation("users", "at least one user is required"));
        }
        for (i, u) in self.users.iter().enumerate() {
            if !(u.radius.is_finite() && u.radius >= 0.0) {
                return Err(Error::validation(
                    "users",
                    format!("user {i}: radius must be >= 0, got {}", u.radius),
                ));
            }
            if !(u.azimuth.is_finite() && (0.0..2.0 * PI).contains(&u.azimuth)) {
                return Err(Error::validation(
                    "users",
                    format!("user {i}: azimuth must lie in [0, 2π), got {}", u.azimuth),
                ));
            }
        }
        if 3.0 * self.min_segment > self.bs_user_distance + PLACEMENT_SUM_TOL {
            return Err(Error::validation(
                "min_segment",
                "three minimum segments exceed the BS-user distance",
            ));
        }
        Ok(())
    }

    /// Same layout with a single user at the zone center.
    pub fn zone_center(&self) -> Geometry {
        Geometry {
            users: vec![UserPosition {
                radius: 0.0,
                azimuth: 0.0,
            }],
            ..self.clone()
        }
    }

    pub fn bs_position(&self) -> [f64; 3] {
        [0.0, 0.0, 0.0]
    }

    pub fn irs1_position(&self, placement: &Placement) -> [f64; 3] {
        [placement.x0, 0.0, self.irs_altitude]
    }

    pub fn irs2_position(&self, placement: &Placement) -> [f64; 3] {
        [placement.x0 + placement.x1, 0.0, self.irs_altitude]
    }

    pub fn user_position(&self, user_index: usize) -> [f64; 3] {
        let u = self.users[user_index];
        [
            self.bs_user_distance + u.radius * u.azimuth.cos(),
            u.radius * u.azimuth.sin(),
            0.0,
        ]
    }
}

/// Checks that the parameter set and the geometry describe the same user count.
pub fn check_consistent(params: &SystemParams, geometry: &Geometry) -> Result<()> {
    params.validate()?;
    geometry.validate()?;
    if params.n_users != geometry.users.len() {
        return Err(Error::validation(
            "n_users",
            format!(
                "{} users declared but geometry holds {}",
                params.n_users,
                geometry.users.len()
            ),
        ));
    }
    Ok(())
}

/// Horizontal segments: BS to IRS 1, IRS 1 to IRS 2, IRS 2 to the zone center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
}

impl Placement {
    /// Builds a placement from `(x0, x1)`, closing the budget with `x2 = D - x0 - x1`.
    pub fn from_prefix(x0: f64, x1: f64, bs_user_distance: f64) -> Self {
        Self {
            x0,
            x1,
            x2: bs_user_distance - x0 - x1,
        }
    }

    /// `x0 = x2 = 0.1 D`, `x1 = 0.8 D`, pulled inward when that violates the
    /// segment lower bound.
    pub fn spread(geometry: &Geometry) -> Self {
        let d = geometry.bs_user_distance;
        let lo = geometry.min_segment;
        let edge = (0.1 * d).max(lo);
        if d - 2.0 * edge >= lo {
            Self::from_prefix(edge, d - 2.0 * edge, d)
        } else {
            Self::from_prefix(d / 3.0, d / 3.0, d)
        }
    }

    pub fn validate(&self, geometry: &Geometry) -> Result<()> {
        for (name, v) in [("x0", self.x0), ("x1", self.x1), ("x2", self.x2)] {
            if !v.is_finite() || v < geometry.min_segment - PLACEMENT_SUM_TOL {
                return Err(Error::validation(
                    name,
                    format!("{v} m is below the {} m segment bound", geometry.min_segment),
                ));
            }
        }
        let sum = self.x0 + self.x1 + self.x2;
        if (sum - geometry.bs_user_distance).abs() > PLACEMENT_SUM_TOL {
            return Err(Error::validation(
                "placement",
                format!("x0 + x1 + x2 = {sum} differs from D = {}", geometry.bs_user_distance),
            ));
        }
        Ok(())
    }
}

/// Integer element split, with the continuous relaxation it was rounded from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub m1: usize,
    pub m2: usize,
    pub m1_real: f64,
    pub m2_real: f64,
}

impl Allocation {
    pub fn new(m1: usize, m2: usize) -> Self {
        Self {
            m1,
            m2,
            m1_real: m1 as f64,
            m2_real: m2 as f64,
        }
    }

    pub fn even(total: usize) -> Self {
        let m1 = (total / 2).max(1);
        Self::new(m1, total.saturating_sub(m1).max(1))
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if self.m1 < 1 || self.m2 < 1 {
            return Err(Error::validation("allocation", "each surface needs at least one element"));
        }
        if self.m1 + self.m2 != params.total_elements {
            return Err(Error::validation(
                "allocation",
                format!(
                    "m1 + m2 = {} differs from the budget {}",
                    self.m1 + self.m2,
                    params.total_elements
                ),
            ));
        }
        Ok(())
    }
}

/// Maps an element count to a `(n_h, n_v)` panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PanelShape {
    /// Most-square factorization with `n_h >= n_v`.
    #[default]
    MostSquare,
    /// Horizontal uniform linear array `(n, 1)`.
    Linear,
}

impl PanelShape {
    pub fn factor(self, count: usize) -> (usize, usize) {
        match self {
            PanelShape::Linear => (count, 1),
            PanelShape::MostSquare => {
                let mut nv = (count as f64).sqrt() as usize;
                while nv > 1 && count % nv != 0 {
                    nv -= 1;
                }
                let nv = nv.max(1);
                (count / nv, nv)
            }
        }
    }
}

/// `w(ς, n) = [1, e^{-jπς}, …, e^{-jπ(n-1)ς}]ᵀ`.
fn steering_factor(varsigma: f64, n: usize) -> impl Iterator<Item = C64> {
    (0..n).map(move |k| C64::from_polar(1.0, -PI * k as f64 * varsigma))
}

/// Uniform planar array response `w(2s cos(az) sin(el), n_h) ⊗ w(2s cos(el), n_v)`,
/// with `s` the spacing in wavelengths.
pub fn steering_vector(
    azimuth: f64,
    elevation: f64,
    n_h: usize,
    n_v: usize,
    spacing_over_wavelength: f64,
) -> Result<DVector<C64>> {
    if !azimuth.is_finite() || !elevation.is_finite() || !spacing_over_wavelength.is_finite() {
        return Err(Error::invalid("steering angles must be finite"));
    }
    if n_h < 1 || n_v < 1 {
        return Err(Error::invalid("steering vector needs n_h, n_v >= 1"));
    }
    let sh = 2.0 * spacing_over_wavelength * azimuth.cos() * elevation.sin();
    let sv = 2.0 * spacing_over_wavelength * elevation.cos();
    let wv: Vec<C64> = steering_factor(sv, n_v).collect();
    let entries = steering_factor(sh, n_h).flat_map(|a| wv.iter().map(move |&b| a * b));
    Ok(DVector::from_iterator(n_h * n_v, entries))
}

/// Azimuth and elevation (both in `[0, π]`) of the direction from `from` toward `to`.
pub fn direction_angles(from: [f64; 3], to: [f64; 3]) -> Result<(f64, f64)> {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::SingularGeometry("coincident nodes".into()));
    }
    let elevation = (d[2] / norm).clamp(-1.0, 1.0).acos();
    let rho = d[0].hypot(d[1]);
    let azimuth = if rho == 0.0 {
        0.0
    } else {
        (d[0] / rho).clamp(-1.0, 1.0).acos()
    };
    Ok((azimuth, elevation))
}

/// `(d0, d1, d2)` for one user: BS to IRS 1, IRS 1 to IRS 2, IRS 2 to the user.
pub fn distances(
    geometry: &Geometry,
    placement: &Placement,
    user_index: usize,
) -> Result<(f64, f64, f64)> {
    let user = geometry
        .users
        .get(user_index)
        .ok_or_else(|| Error::invalid(format!("user index {user_index} out of range")))?;
    let h = geometry.irs_altitude;
    let d0 = placement.x0.hypot(h);
    let d1 = placement.x1;
    let along = placement.x2 + user.radius * user.azimuth.cos();
    let across = user.radius * user.azimuth.sin();
    let d2 = (along * along + h * h + across * across).sqrt();
    Ok((d0, d1, d2))
}

/// Every LoS channel of the double-reflection link for one user.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// BS to IRS 1, `M1 × N`.
    pub h1_matrix: DMatrix<C64>,
    /// IRS 1 to IRS 2, `M2 × M1`.
    pub g_matrix: DMatrix<C64>,
    /// Rank-1 factors with `G = g1 g2ᴴ`.
    pub g1_vec: DVector<C64>,
    pub g2_vec: DVector<C64>,
    /// Column vector whose conjugate transpose is the IRS 2 to user row channel.
    pub h2_vec: DVector<C64>,
    /// BS transmit steering vector toward IRS 1.
    pub bs_steering: DVector<C64>,
    pub h1: C64,
    pub g: C64,
    pub h2: C64,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
}

impl ChannelSet {
    pub fn m1(&self) -> usize {
        self.h1_matrix.nrows()
    }

    pub fn m2(&self) -> usize {
        self.g_matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.h1_matrix.ncols()
    }
}

pub fn build_channels(
    params: &SystemParams,
    geometry: &Geometry,
    placement: &Placement,
    allocation: &Allocation,
    user_index: usize,
    panel: PanelShape,
) -> Result<ChannelSet> {
    allocation.validate(params)?;
    let (d0, d1, d2) = distances(geometry, placement, user_index)?;
    if d0 <= 0.0 || d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::SingularGeometry(format!(
            "zero link distance (d0={d0}, d1={d1}, d2={d2})"
        )));
    }
    let s = params.element_spacing / params.wavelength;
    let array = |from: [f64; 3], to: [f64; 3], count: usize| -> Result<DVector<C64>> {
        let (az, el) = direction_angles(from, to)?;
        let (nh, nv) = panel.factor(count);
        steering_vector(az, el, nh, nv, s)
    };

    let bs = geometry.bs_position();
    let irs1 = geometry.irs1_position(placement);
    let irs2 = geometry.irs2_position(placement);
    let user = geometry.user_position(user_index);
    let (n, m1, m2) = (params.n_bs_antennas, allocation.m1, allocation.m2);

    let h1 = params.complex_gain(d0);
    let g = params.complex_gain(d1);
    let h2 = params.complex_gain(d2);

    let bs_steering = array(bs, irs1, n)?;
    let irs1_rx = array(irs1, bs, m1)?;
    let h1_matrix = (&irs1_rx * bs_steering.adjoint()) * h1;

    let irs1_tx = array(irs1, irs2, m1)?;
    let irs2_rx = array(irs2, irs1, m2)?;
    let g_matrix = (&irs2_rx * irs1_tx.adjoint()) * g;
    let root_g = g.sqrt();
    let g1_vec = &irs2_rx * root_g;
    let g2_vec = &irs1_tx * root_g.conj();

    let irs2_tx = array(irs2, user, m2)?;
    let h2_vec = irs2_tx * h2.conj();

    Ok(ChannelSet {
        h1_matrix,
        g_matrix,
        g1_vec,
        g2_vec,
        h2_vec,
        bs_steering,
        h1,
        g,
        h2,
        d0,
        d1,
        d2,
    })
}

/// Per-surface phase profiles, uniform amplification factors and the BS beam.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionConfig {
    pub phases1: Vec<f64>,
    pub phases2: Vec<f64>,
    /// Amplitude factor `a_{I1}` applied to every element of IRS 1.
    pub amp1: f64,
    pub amp2: f64,
    pub beam: DVector<C64>,
}

impl ReflectionConfig {
    /// Diagonal of `Ψ1 = a1 diag(e^{jφ})`.
    pub fn psi1(&self) -> DVector<C64> {
        reflection_diagonal(self.amp1, &self.phases1)
    }

    pub fn psi2(&self) -> DVector<C64> {
        reflection_diagonal(self.amp2, &self.phases2)
    }
}

fn reflection_diagonal(amp: f64, phases: &[f64]) -> DVector<C64> {
    DVector::from_iterator(phases.len(), phases.iter().map(|&p| C64::from_polar(amp, p)))
}

fn check_dims(
    channels: &ChannelSet,
    psi1: &DVector<C64>,
    psi2: &DVector<C64>,
    beam: &DVector<C64>,
) -> Result<()> {
    if psi1.len() != channels.m1() || psi2.len() != channels.m2() || beam.len() != channels.n() {
        return Err(Error::invalid(format!(
            "reflection sizes ({}, {}, beam {}) do not match channels ({}, {}, N {})",
            psi1.len(),
            psi2.len(),
            beam.len(),
            channels.m1(),
            channels.m2(),
            channels.n()
        )));
    }
    Ok(())
}

/// Received SNR by direct matrix products.
pub fn snr_full(
    channels: &ChannelSet,
    config: &ReflectionConfig,
    params: &SystemParams,
) -> Result<f64> {
    snr_with_reflections(channels, &config.psi1(), &config.psi2(), &config.beam, params)
}

/// [`snr_full`] with arbitrary per-element reflection coefficients (the
/// diagonals of `Ψ1`, `Ψ2`).
pub fn snr_with_reflections(
    channels: &ChannelSet,
    psi1: &DVector<C64>,
    psi2: &DVector<C64>,
    beam: &DVector<C64>,
    params: &SystemParams,
) -> Result<f64> {
    check_dims(channels, psi1, psi2, beam)?;
    let psi1 = DMatrix::from_diagonal(psi1);
    let psi2 = DMatrix::from_diagonal(psi2);
    let after_irs2 = channels.h2_vec.adjoint() * &psi2;
    let after_irs1 = &after_irs2 * &channels.g_matrix * &psi1;
    let signal = (&after_irs1 * &channels.h1_matrix * beam)[(0, 0)];
    let numerator = params.tx_power * signal.norm_sqr();
    let denominator = after_irs2.norm_squared() * params.irs_noise
        + after_irs1.norm_squared() * params.irs_noise
        + params.user_noise;
    Ok(numerator / denominator)
}

/// Power radiated by each element (signal plus amplified noise), IRS 1 then IRS 2.
pub fn per_element_power(
    channels: &ChannelSet,
    config: &ReflectionConfig,
    params: &SystemParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    per_element_power_with_reflections(channels, &config.psi1(), &config.psi2(), &config.beam, params)
}

pub fn per_element_power_with_reflections(
    channels: &ChannelSet,
    psi1: &DVector<C64>,
    psi2: &DVector<C64>,
    beam: &DVector<C64>,
    params: &SystemParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(channels, psi1, psi2, beam)?;
    let (pb, noise) = (params.tx_power, params.irs_noise);
    let psi1_m = DMatrix::from_diagonal(psi1);
    let psi2_m = DMatrix::from_diagonal(psi2);

    let at_irs1 = &psi1_m * &channels.h1_matrix * beam;
    let first = at_irs1
        .iter()
        .zip(psi1.iter())
        .map(|(s, p)| pb * s.norm_sqr() + noise * p.norm_sqr())
        .collect();

    let cascade = &psi2_m * &channels.g_matrix * &psi1_m;
    let at_irs2 = &cascade * &channels.h1_matrix * beam;
    let second = (0..cascade.nrows())
        .map(|m| {
            pb * at_irs2[m].norm_sqr()
                + noise * cascade.row(m).norm_squared()
                + noise * psi2[m].norm_sqr()
        })
        .collect();
    Ok((first, second))
}

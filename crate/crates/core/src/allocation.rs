//! Element split between the two surfaces at a fixed placement.
//!
//! With the budget constraint active the worst-user objective is a function of
//! `m1` alone along the line `m2 = M - m1`. Every addend has the form
//! `B m1^{-p} m2^{-q}` with `p, q >= 0`, which is convex on `(0, M)`, and the
//! pointwise maximum over users is therefore convex as well. A ternary search
//! on the relaxed split followed by a floor/ceil comparison recovers the
//! integer optimum.

use crate::error::{Error, Result};
use crate::model::{distances, Allocation, Geometry, Placement, SystemParams};

/// Relaxed splits are searched until the bracket is narrower than this.
pub const SEARCH_WIDTH: f64 = 1e-6;

/// Largest budget the exhaustive oracle accepts.
pub const ORACLE_MAX_ELEMENTS: usize = 1 << 16;

/// Per-user and shared multipliers of `ξ` once the surface sizes are factored out:
///
/// `f(m1, m2) = B1/(m1²m2²) + B2/(m1 m2²) + B3/(m1² m2) + B4/m2² + B5/m1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationCoefficients {
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub b3: f64,
    pub b4: Vec<f64>,
    pub b5: f64,
}

impl AllocationCoefficients {
    pub fn from_distances(params: &SystemParams, d0: f64, d1: f64, d2: &[f64]) -> Self {
        let n = params.n_bs_antennas as f64;
        let (pb, pe) = (params.tx_power, params.per_element_power);
        let (si, s0, b) = (params.irs_noise, params.user_noise, params.ref_gain);
        let a = params.pathloss_exp;
        let (e0, e1) = (d0.powf(a), d1.powf(a));
        let e2: Vec<f64> = d2.iter().map(|d| d.powf(a)).collect();
        Self {
            b1: e2
                .iter()
                .map(|e2| (si * si * s0 * e0 * e1 * e2 + n * pb * si * s0 * b * e1 * e2) / (pe * pe))
                .collect(),
            b2: e2.iter().map(|e2| s0 * si * b * e0 * e2 / pe).collect(),
            b3: (si * si * b * e0 * e1 + n * pb * si * b * b * e1) / pe,
            b4: e2.iter().map(|e2| n * pb * s0 * b * b * e2 / pe).collect(),
            b5: si * b * b * e0,
        }
    }

    pub fn for_placement(
        params: &SystemParams,
        geometry: &Geometry,
        placement: &Placement,
    ) -> Result<Self> {
        let mut d2 = Vec::with_capacity(geometry.users.len());
        let (mut d0, mut d1) = (0.0, 0.0);
        for user in 0..geometry.users.len() {
            let d = distances(geometry, placement, user)?;
            (d0, d1) = (d.0, d.1);
            d2.push(d.2);
        }
        Ok(Self::from_distances(params, d0, d1, &d2))
    }

    pub fn n_users(&self) -> usize {
        self.b1.len()
    }

    /// One user's relaxed objective at an arbitrary `(m1, m2)`.
    pub fn user_value(&self, user: usize, m1: f64, m2: f64) -> f64 {
        self.b1[user] / (m1 * m1 * m2 * m2)
            + self.b2[user] / (m1 * m2 * m2)
            + self.b3 / (m1 * m1 * m2)
            + self.b4[user] / (m2 * m2)
            + self.b5 / m1
    }

    /// Worst-user value at `(m1, m2)`.
    pub fn worst(&self, m1: f64, m2: f64) -> f64 {
        (0..self.n_users())
            .map(|u| self.user_value(u, m1, m2))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Worst-user objective on the budget line `m2 = M - m1`.
pub fn eval_f1(coeffs: &AllocationCoefficients, m1_real: f64, total: usize) -> Result<f64> {
    let m = total as f64;
    if !(m1_real >= 1.0 && m1_real <= m - 1.0) {
        return Err(Error::invalid(format!(
            "relaxed split {m1_real} outside [1, {}]",
            m - 1.0
        )));
    }
    Ok(coeffs.worst(m1_real, m - m1_real))
}

fn check_budget(total: usize) -> Result<()> {
    if total < 2 {
        return Err(Error::invalid(format!(
            "element budget {total} cannot feed two surfaces"
        )));
    }
    Ok(())
}

pub fn solve_allocation(coeffs: &AllocationCoefficients, total: usize) -> Result<Allocation> {
    check_budget(total)?;
    if total <= 3 {
        return allocation_oracle(coeffs, total);
    }
    let m = total as f64;
    let f = |m1: f64| coeffs.worst(m1, m - m1);
    let (mut lo, mut hi) = (1.0, m - 1.0);
    while hi - lo >= SEARCH_WIDTH {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let relaxed = 0.5 * (lo + hi);
    let floor = (relaxed.floor() as usize).clamp(1, total - 1);
    let ceil = (relaxed.ceil() as usize).clamp(1, total - 1);
    let m1 = if f(ceil as f64) < f(floor as f64) { ceil } else { floor };
    Ok(Allocation {
        m1,
        m2: total - m1,
        m1_real: relaxed,
        m2_real: m - relaxed,
    })
}

/// Exhaustive integer search; ties go to the larger `m2`.
pub fn allocation_oracle(coeffs: &AllocationCoefficients, total: usize) -> Result<Allocation> {
    check_budget(total)?;
    if total > ORACLE_MAX_ELEMENTS {
        return Err(Error::invalid(format!(
            "exhaustive allocation limited to {ORACLE_MAX_ELEMENTS} elements"
        )));
    }
    let mut best = (1, f64::INFINITY);
    for m1 in 1..total {
        let v = coeffs.worst(m1 as f64, (total - m1) as f64);
        if v < best.1 {
            best = (m1, v);
        }
    }
    Ok(Allocation::new(best.0, total - best.0))
}

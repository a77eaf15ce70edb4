//! Line-oriented `key = value` scenario files.
//!
//! ```text
//! # powers take dBm, W or mW; gains take dB or a bare linear value
//! M = 256
//! P_e = 0 dBm
//! sigma0 = -80 dBm
//! users = 0 0; 12.5 1.5708
//! ```
//!
//! Missing keys take the default scenario values. Without a `users` list, `L`
//! user positions are drawn uniformly over the zone disk from `seed`.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{check_consistent, Geometry, SystemParams, UserPosition};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: SystemParams,
    pub bs_user_distance: f64,
    pub irs_altitude: f64,
    pub zone_radius: f64,
    pub min_segment: f64,
    pub seed: u64,
    /// Overrides the seeded draw when present.
    pub users: Option<Vec<UserPosition>>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            bs_user_distance: 200.0,
            irs_altitude: 5.0,
            zone_radius: 30.0,
            min_segment: 1.0,
            seed: 0,
            users: None,
        }
    }
}

/// `L` positions uniform over a disk of radius `radius`.
pub fn draw_users(seed: u64, count: usize, radius: f64) -> Vec<UserPosition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| UserPosition {
            radius: radius * rng.gen::<f64>().sqrt(),
            azimuth: rng.gen_range(0.0..TAU),
        })
        .collect()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Clone, Copy)]
enum Kind {
    Count,
    Seed,
    Plain,
    Length,
    Power,
    Gain,
}

const KEYS: [(&str, Kind); 17] = [
    ("N", Kind::Count),
    ("M", Kind::Count),
    ("L", Kind::Count),
    ("wavelength", Kind::Length),
    ("element_spacing", Kind::Length),
    ("beta", Kind::Gain),
    ("alpha", Kind::Plain),
    ("P_B", Kind::Power),
    ("P_e", Kind::Power),
    ("sigma_I", Kind::Power),
    ("sigma0", Kind::Power),
    ("D", Kind::Length),
    ("H", Kind::Length),
    ("zone_radius", Kind::Length),
    ("x_min", Kind::Length),
    ("seed", Kind::Seed),
    ("users", Kind::Plain),
];

fn parse_number(text: &str, line: usize) -> Result<f64> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse { line, message: format!("`{text}` is not a finite number") })
}

fn parse_value(key: &str, kind: Kind, value: &str, line: usize) -> Result<f64> {
    let mut parts = value.split_whitespace();
    let number = parts.next().ok_or_else(|| Error::Parse {
        line,
        message: format!("`{key}` has no value"),
    })?;
    let unit = parts.next();
    if let Some(extra) = parts.next() {
        return Err(Error::Parse { line, message: format!("unexpected `{extra}` after `{key}`") });
    }
    let bad_unit = |u: &str| Error::Parse { line, message: format!("unit `{u}` does not apply to `{key}`") };
    match kind {
        Kind::Count | Kind::Seed => {
            if let Some(u) = unit {
                return Err(bad_unit(u));
            }
            number
                .parse::<u64>()
                .map(|v| v as f64)
                .map_err(|_| Error::Parse { line, message: format!("`{key}` needs a non-negative integer, got `{number}`") })
        }
        Kind::Plain => match unit {
            None => parse_number(number, line),
            Some(u) => Err(bad_unit(u)),
        },
        Kind::Length => match unit {
            None | Some("m") => parse_number(number, line),
            Some(u) => Err(bad_unit(u)),
        },
        Kind::Power => {
            let v = parse_number(number, line)?;
            match unit {
                None | Some("W") => Ok(v),
                Some("mW") => Ok(v * 1e-3),
                Some("dBm") => Ok(dbm_to_watts(v)),
                Some(u) => Err(bad_unit(u)),
            }
        }
        Kind::Gain => {
            let v = parse_number(number, line)?;
            match unit {
                None => Ok(v),
                Some("dB") => Ok(db_to_linear(v)),
                Some(u) => Err(bad_unit(u)),
            }
        }
    }
}

fn parse_users(value: &str, line: usize) -> Result<Vec<UserPosition>> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let nums: Vec<&str> = pair.split_whitespace().collect();
            if nums.len() != 2 {
                return Err(Error::Parse {
                    line,
                    message: format!("user `{pair}` must be `radius azimuth`"),
                });
            }
            Ok(UserPosition {
                radius: parse_number(nums[0], line)?,
                azimuth: parse_number(nums[1], line)?,
            })
        })
        .collect()
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut s = Scenario::default();
    let mut seen = BTreeSet::new();
    let mut unknown = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&(name, kind)) = KEYS.iter().find(|(k, _)| *k == key) else {
            unknown.push(key.to_string());
            continue;
        };
        if !seen.insert(name) {
            return Err(Error::Parse { line, message: format!("duplicate key `{name}`") });
        }
        if name == "users" {
            s.users = Some(parse_users(value, line)?);
            continue;
        }
        let v = parse_value(name, kind, value, line)?;
        let p = &mut s.params;
        match name {
            "N" => p.n_bs_antennas = v as usize,
            "M" => p.total_elements = v as usize,
            "L" => p.n_users = v as usize,
            "wavelength" => p.wavelength = v,
            "element_spacing" => p.element_spacing = v,
            "beta" => p.ref_gain = v,
            "alpha" => p.pathloss_exp = v,
            "P_B" => p.tx_power = v,
            "P_e" => p.per_element_power = v,
            "sigma_I" => p.irs_noise = v,
            "sigma0" => p.user_noise = v,
            "D" => s.bs_user_distance = v,
            "H" => s.irs_altitude = v,
            "zone_radius" => s.zone_radius = v,
            "x_min" => s.min_segment = v,
            "seed" => {
                s.seed = value.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("seed `{value}` is not a u64"),
                })?
            }
            _ => unreachable!("every key in KEYS is handled"),
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown));
    }
    if !seen.contains("element_spacing") {
        s.params.element_spacing = s.params.wavelength / 2.0;
    }
    if let Some(users) = &s.users {
        if !seen.contains("L") {
            s.params.n_users = users.len();
        }
    }
    s.validate()?;
    Ok(s)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.zone_radius.is_finite() && self.zone_radius >= 0.0) {
            return Err(Error::validation("zone_radius", "must be finite and >= 0"));
        }
        check_consistent(&self.params, &self.geometry())
    }

    /// Geometry with the fixed users, or `L` users drawn from the seed.
    pub fn geometry(&self) -> Geometry {
        let users = match &self.users {
            Some(u) => u.clone(),
            None => draw_users(self.seed, self.params.n_users, self.zone_radius),
        };
        Geometry {
            min_segment: self.min_segment,
            ..Geometry::new(self.bs_user_distance, self.irs_altitude, users)
        }
    }

    /// Serializes every key in SI units; parsing the result reproduces `self`.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("N", p.n_bs_antennas.to_string());
        put("M", p.total_elements.to_string());
        put("L", p.n_users.to_string());
        put("wavelength", format!("{} m", p.wavelength));
        put("element_spacing", format!("{} m", p.element_spacing));
        put("beta", p.ref_gain.to_string());
        put("alpha", p.pathloss_exp.to_string());
        put("P_B", format!("{} W", p.tx_power));
        put("P_e", format!("{} W", p.per_element_power));
        put("sigma_I", format!("{} W", p.irs_noise));
        put("sigma0", format!("{} W", p.user_noise));
        put("D", format!("{} m", self.bs_user_distance));
        put("H", format!("{} m", self.irs_altitude));
        put("zone_radius", format!("{} m", self.zone_radius));
        put("x_min", format!("{} m", self.min_segment));
        put("seed", self.seed.to_string());
        if let Some(users) = &self.users {
            let list: Vec<String> = users.iter().map(|u| format!("{} {}", u.radius, u.azimuth)).collect();
            put("users", list.join("; "));
        }
        out
    }
}

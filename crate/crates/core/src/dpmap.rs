//! Mapping perceived-privacy levels to differential-privacy budgets.
//!
//! A level `l` in `1..=L` (1 = most private) is first mapped to a target
//! adversarial advantage `g(l)` by one of four shapes (linear, exponential,
//! sequential, sigmoid), then converted to a budget via the exact inverse
//! `f(l) = ln((1 + g) / (1 - g))` of the distinguishing-advantage bound
//! `(e^eps - 1) / (e^eps + 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the level-to-advantage curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingKind {
    Linear,
    Exponential,
    Sequential,
    Sigmoid,
}

impl MappingKind {
    pub const ALL: [MappingKind; 4] = [
        MappingKind::Linear,
        MappingKind::Exponential,
        MappingKind::Sequential,
        MappingKind::Sigmoid,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MappingKind::Linear => "linear",
            MappingKind::Exponential => "exponential",
            MappingKind::Sequential => "sequential",
            MappingKind::Sigmoid => "sigmoid",
        }
    }
}

impl std::str::FromStr for MappingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(MappingKind::Linear),
            "exponential" => Ok(MappingKind::Exponential),
            "sequential" => Ok(MappingKind::Sequential),
            "sigmoid" => Ok(MappingKind::Sigmoid),
            other => Err(Error::argument(format!("unknown mapping kind '{other}'"))),
        }
    }
}

/// A positive differential-privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrivacyBudget(pub f64);

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::argument(format!(
                "privacy budget must be finite and positive, got {epsilon}"
            )));
        }
        Ok(PrivacyBudget(epsilon))
    }

    pub fn epsilon(&self) -> f64 {
        self.0
    }
}

/// Configuration of one level-to-budget mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingSpec {
    pub kind: MappingKind,
    pub eps_min: f64,
    pub eps_max: f64,
    /// Number of perceived-privacy levels.
    #[serde(rename = "L")]
    pub levels: u32,
    /// Sigmoid steepness; ignored by the other kinds.
    #[serde(default = "default_steepness")]
    pub k: f64,
    /// Number of sequential tiers; only the three-tier table is supported.
    #[serde(default = "default_tiers")]
    pub tiers: u32,
}

fn default_steepness() -> f64 {
    1.5
}

fn default_tiers() -> u32 {
    3
}

impl MappingSpec {
    pub fn new(kind: MappingKind, eps_min: f64, eps_max: f64, levels: u32) -> Result<Self> {
        let spec = MappingSpec {
            kind,
            eps_min,
            eps_max,
            levels,
            k: default_steepness(),
            tiers: default_tiers(),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_steepness(mut self, k: f64) -> Result<Self> {
        self.k = k;
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.eps_min.is_finite() && self.eps_min > 0.0) {
            return Err(Error::argument(format!(
                "eps_min must be finite and positive, got {}",
                self.eps_min
            )));
        }
        if !(self.eps_max.is_finite() && self.eps_max > self.eps_min) {
            return Err(Error::argument(format!(
                "eps_max must be finite and exceed eps_min, got {} vs {}",
                self.eps_max, self.eps_min
            )));
        }
        if self.levels < 2 {
            return Err(Error::argument(format!(
                "need at least 2 levels, got {}",
                self.levels
            )));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::argument(format!(
                "sigmoid steepness k must be positive, got {}",
                self.k
            )));
        }
        if self.kind == MappingKind::Sequential {
            if self.tiers != 3 {
                return Err(Error::argument(format!(
                    "sequential mapping supports exactly 3 tiers, got {}",
                    self.tiers
                )));
            }
            // With fewer than 5 levels the bottom tier (l = 1 or 2) and the
            // top tier (l = L or L-1) overlap.
            if self.levels < 5 {
                return Err(Error::argument(format!(
                    "sequential mapping requires at least 5 levels, got {}",
                    self.levels
                )));
            }
        }
        Ok(())
    }
}

/// Best distinguishing advantage of an adversary against an `eps`-DP
/// mechanism: `(e^eps - 1) / (e^eps + 1)`, i.e. `tanh(eps / 2)`.
pub fn adversary_advantage(eps: f64) -> Result<f64> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::argument(format!(
            "epsilon must be finite and nonnegative, got {eps}"
        )));
    }
    Ok((eps / 2.0).tanh())
}

/// Inverse of [`adversary_advantage`]: `ln((1 + a) / (1 - a))`.
pub fn advantage_to_epsilon(advantage: f64) -> Result<f64> {
    if !(advantage.is_finite() && (0.0..1.0).contains(&advantage)) {
        return Err(Error::argument(format!(
            "advantage must lie in [0, 1), got {advantage}"
        )));
    }
    // ln(1 + a) - ln(1 - a); (1 - a) is exact for a >= 0.5, which keeps the
    // inversion as sharp as the representation of `advantage` allows.
    Ok(advantage.ln_1p() - (1.0 - advantage).ln())
}

fn check_level(spec: &MappingSpec, level: u32) -> Result<()> {
    if level < 1 || level > spec.levels {
        return Err(Error::argument(format!(
            "level {level} outside 1..={}",
            spec.levels
        )));
    }
    Ok(())
}

/// Target advantage for level `l` under the chosen mapping shape.
pub fn g_of_l(spec: &MappingSpec, level: u32) -> Result<f64> {
    spec.check()?;
    check_level(spec, level)?;
    let lo = adversary_advantage(spec.eps_min)?;
    let hi = adversary_advantage(spec.eps_max)?;
    let l = level as f64;
    let levels = spec.levels as f64;
    let g = match spec.kind {
        MappingKind::Linear => lo + (l - 1.0) / (levels - 1.0) * (hi - lo),
        MappingKind::Exponential => {
            lo.powf((levels - l) / (levels - 1.0)) * hi.powf((l - 1.0) / (levels - 1.0))
        }
        MappingKind::Sequential => {
            if level <= 2 {
                lo
            } else if level >= spec.levels - 1 {
                hi
            } else {
                0.5 * (hi + lo)
            }
        }
        MappingKind::Sigmoid => {
            // The raw expression hi + (lo - hi) / (1 + ((L-1)/(l-1) - 1)^-k)
            // is extended to the endpoints by its limits.
            if level == 1 {
                lo
            } else if level == spec.levels {
                hi
            } else {
                let ratio = (levels - 1.0) / (l - 1.0) - 1.0;
                hi + (lo - hi) / (1.0 + ratio.powf(-spec.k))
            }
        }
    };
    Ok(g)
}

/// Budget for level `l`: the advantage inverse applied to `g(l)`, clamped to
/// `[eps_min, eps_max]` against round-trip drift.
pub fn map_level(spec: &MappingSpec, level: u32) -> Result<PrivacyBudget> {
    let g = g_of_l(spec, level)?;
    let eps = advantage_to_epsilon(g)?;
    PrivacyBudget::new(eps.clamp(spec.eps_min, spec.eps_max))
}

/// One row of a mapping table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingRow {
    pub level: u32,
    pub advantage: f64,
    pub epsilon: f64,
}

/// The full level -> (g, epsilon) table for a spec, one row per level.
pub fn mapping_table(spec: &MappingSpec) -> Result<Vec<MappingRow>> {
    spec.check()?;
    (1..=spec.levels)
        .map(|level| {
            Ok(MappingRow {
                level,
                advantage: g_of_l(spec, level)?,
                epsilon: map_level(spec, level)?.epsilon(),
            })
        })
        .collect()
}

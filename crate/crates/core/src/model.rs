//! System configuration, users, and channel-statistics groups.
//!
//! Large-scale fading gains are stored as linear power ratios. Decibels only
//! appear in [`FadingSpec`], which is what configuration files carry.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Convert a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear power ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// OFDM grid geometry of one resource block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerology {
    /// OFDM symbol duration in seconds.
    pub symbol_duration_s: f64,
    /// Subcarrier spacing in Hz.
    pub subcarrier_spacing_hz: f64,
    pub symbols_per_rb: usize,
    pub subcarriers_per_rb: usize,
}

impl Numerology {
    /// LTE normal cyclic prefix: 71.4 us symbols, 15 kHz, 14 x 12 per RB.
    pub const LTE: Numerology = Numerology {
        symbol_duration_s: 71.4e-6,
        subcarrier_spacing_hz: 15e3,
        symbols_per_rb: 14,
        subcarriers_per_rb: 12,
    };

    pub fn new(
        symbol_duration_s: f64,
        subcarrier_spacing_hz: f64,
        symbols_per_rb: usize,
        subcarriers_per_rb: usize,
    ) -> Result<Self> {
        let num = Numerology {
            symbol_duration_s,
            subcarrier_spacing_hz,
            symbols_per_rb,
            subcarriers_per_rb,
        };
        num.validate()?;
        Ok(num)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_duration_s > 0.0 && self.symbol_duration_s.is_finite()) {
            return Err(Error::Config("symbol duration must be positive".into()));
        }
        if !(self.subcarrier_spacing_hz > 0.0 && self.subcarrier_spacing_hz.is_finite()) {
            return Err(Error::Config("subcarrier spacing must be positive".into()));
        }
        if self.symbols_per_rb == 0 || self.subcarriers_per_rb == 0 {
            return Err(Error::Config(
                "resource block dimensions must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Resource elements per resource block.
    pub fn res_per_rb(&self) -> usize {
        self.symbols_per_rb * self.subcarriers_per_rb
    }
}

impl Default for Numerology {
    fn default() -> Self {
        Numerology::LTE
    }
}

/// Link-level system parameters shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_rbs: usize,
    pub num_antennas: usize,
    /// Maximum number of users spatially multiplexed on one RB.
    pub max_mux: usize,
    /// Per-user uplink transmit power, watts.
    pub ul_power: f64,
    /// Base-station downlink transmit power, watts.
    pub dl_power: f64,
    /// Noise power per resource element, watts.
    pub noise_power: f64,
    pub numerology: Numerology,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.numerology.validate()?;
        if self.num_rbs == 0 {
            return Err(Error::Config("num_rbs must be >= 1".into()));
        }
        if self.num_antennas == 0 {
            return Err(Error::Config("num_antennas must be >= 1".into()));
        }
        if self.max_mux == 0 {
            return Err(Error::Config("max_mux must be >= 1".into()));
        }
        for (name, p) in [
            ("ul_power", self.ul_power),
            ("dl_power", self.dl_power),
            ("noise_power", self.noise_power),
        ] {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Distribution of large-scale fading gains, in dB at the config surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingSpec {
    /// Every user has the same gain.
    Constant { gain_db: f64 },
    /// Gain in dB is normal with the given mean and standard deviation.
    LogNormal { mean_db: f64, spread_db: f64 },
    /// One gain per user, in population order.
    Explicit { gains_db: Vec<f64> },
}

impl FadingSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64| x.is_finite();
        let ok = match self {
            FadingSpec::Constant { gain_db } => finite(*gain_db),
            FadingSpec::LogNormal { mean_db, spread_db } => {
                finite(*mean_db) && finite(*spread_db) && *spread_db >= 0.0
            }
            FadingSpec::Explicit { gains_db } => {
                !gains_db.is_empty() && gains_db.iter().all(|g| finite(*g))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid fading spec {self:?}")))
        }
    }

    /// Mean of the linear gain.
    pub fn mean_linear(&self) -> f64 {
        match self {
            FadingSpec::Constant { gain_db } => db_to_linear(*gain_db),
            FadingSpec::LogNormal { mean_db, spread_db } => {
                let c = std::f64::consts::LN_10 / 10.0;
                (c * mean_db + 0.5 * (c * spread_db).powi(2)).exp()
            }
            FadingSpec::Explicit { gains_db } => {
                gains_db.iter().map(|g| db_to_linear(*g)).sum::<f64>() / gains_db.len() as f64
            }
        }
    }

    fn draw<R: Rng>(&self, index: usize, rng: &mut R) -> Result<f64> {
        match self {
            FadingSpec::Constant { gain_db } => Ok(db_to_linear(*gain_db)),
            FadingSpec::LogNormal { mean_db, spread_db } => {
                let normal = Normal::new(*mean_db, *spread_db)
                    .map_err(|e| Error::Config(format!("log-normal fading: {e}")))?;
                Ok(db_to_linear(normal.sample(rng)))
            }
            FadingSpec::Explicit { gains_db } => gains_db
                .get(index)
                .map(|g| db_to_linear(*g))
                .ok_or_else(|| {
                    Error::Config(format!(
                        "explicit fading list has {} entries, user index {index} out of range",
                        gains_db.len()
                    ))
                }),
        }
    }
}

/// Opaque user identifier; equals the user's index in the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub group: usize,
    /// Linear large-scale fading gain.
    pub large_scale_fading: f64,
}

/// Users partitioned into channel-statistics groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPopulation {
    users: Vec<User>,
    groups: Vec<Vec<UserId>>,
}

impl UserPopulation {
    /// Assemble a population from explicit users; group lists are derived
    /// from the users' labels.
    pub fn from_users(users: Vec<User>, num_groups: usize) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::Config("population has no users".into()));
        }
        let mut groups = vec![Vec::new(); num_groups];
        for (i, u) in users.iter().enumerate() {
            if u.id != UserId(i) {
                return Err(Error::Config(format!(
                    "user at index {i} has id {:?}",
                    u.id
                )));
            }
            if !(u.large_scale_fading > 0.0 && u.large_scale_fading.is_finite()) {
                return Err(Error::Config(format!("user {i} has non-positive fading")));
            }
            groups
                .get_mut(u.group)
                .ok_or_else(|| Error::Config(format!("user {i} has invalid group {}", u.group)))?
                .push(u.id);
        }
        Ok(UserPopulation { users, groups })
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn groups(&self) -> &[Vec<UserId>] {
        &self.groups
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn user(&self, id: UserId) -> &User {
        &self.users[id.0]
    }

    pub fn fading(&self, id: UserId) -> f64 {
        self.users[id.0].large_scale_fading
    }

    /// Group sizes |G_g|.
    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Group fractions |G_g| / K.
    pub fn group_fractions(&self) -> Vec<f64> {
        let k = self.users.len() as f64;
        self.groups.iter().map(|g| g.len() as f64 / k).collect()
    }
}

/// Build a population with `group_sizes[g]` users in group `g`.
///
/// `fading` holds either one spec shared by all groups or one per group.
/// Explicit lists are indexed by the user's position inside its group.
/// Users are numbered group by group.
pub fn build_population(
    group_sizes: &[usize],
    fading: &[FadingSpec],
    seed: u64,
) -> Result<UserPopulation> {
    if group_sizes.is_empty() {
        return Err(Error::Config("no groups given".into()));
    }
    if group_sizes.iter().sum::<usize>() == 0 {
        return Err(Error::Config("population has no users".into()));
    }
    if fading.len() != 1 && fading.len() != group_sizes.len() {
        return Err(Error::Config(format!(
            "expected 1 or {} fading specs, got {}",
            group_sizes.len(),
            fading.len()
        )));
    }
    for spec in fading {
        spec.validate()?;
    }
    let mut users = Vec::new();
    for (g, &size) in group_sizes.iter().enumerate() {
        let spec = &fading[if fading.len() == 1 { 0 } else { g }];
        for member in 0..size {
            let mut rng = seed::rng(seed, &[g as u64, member as u64]);
            users.push(User {
                id: UserId(users.len()),
                group: g,
                large_scale_fading: spec.draw(member, &mut rng)?,
            });
        }
    }
    UserPopulation::from_users(users, group_sizes.len())
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{builtin_profiles, ChannelProfile, Tap};
use crate::error::{Error, Result};
use crate::model::{FadingSpec, Numerology, SystemConfig};
use crate::phy::Direction;
use crate::scheduler::{PickerPolicy, RbMapping, SchedulerMode};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "PILOT_ADAPT_WORKERS";

/// Built-in profile sets selectable with `builtin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinSet {
    Table1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub name: String,
    pub max_doppler_hz: f64,
    pub max_delay_spread_s: f64,
    /// Explicit power-delay profile; two equal taps at 0 and the maximum
    /// delay spread when absent.
    #[serde(default)]
    pub taps: Option<Vec<Tap>>,
}

impl ProfileSpec {
    pub fn build(&self) -> Result<ChannelProfile> {
        match &self.taps {
            Some(t) => ChannelProfile::with_taps(
                &self.name,
                self.max_doppler_hz,
                self.max_delay_spread_s,
                t.clone(),
            ),
            None => {
                ChannelProfile::bracket(&self.name, self.max_doppler_hz, self.max_delay_spread_s)
            }
        }
    }
}

/// A single direction or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Directions {
    One(Direction),
    Many(Vec<Direction>),
}

impl Directions {
    pub fn to_vec(&self) -> Vec<Direction> {
        match self {
            Directions::One(d) => vec![*d],
            Directions::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSettings {
    #[serde(default = "default_estimation_trials")]
    pub trials: usize,
    /// Pass threshold on the NMSE at the spacing-rule lattice, in dB.
    #[serde(default = "default_threshold_db")]
    pub threshold_db: f64,
}

/// Twice the ETU300 NMSE measured at its spacing-rule lattice
/// (200 trials on the validation grid), in dB.
pub const DEFAULT_NMSE_THRESHOLD_DB: f64 = -9.29;

fn default_estimation_trials() -> usize {
    200
}

fn default_threshold_db() -> f64 {
    DEFAULT_NMSE_THRESHOLD_DB
}

impl Default for EstimationSettings {
    fn default() -> Self {
        EstimationSettings {
            trials: default_estimation_trials(),
            threshold_db: default_threshold_db(),
        }
    }
}

fn default_fading() -> Vec<FadingSpec> {
    vec![FadingSpec::Constant { gain_db: 10.0 }]
}

fn one() -> f64 {
    1.0
}

fn default_direction() -> Directions {
    Directions::One(Direction::Uplink)
}

fn default_picker() -> PickerPolicy {
    PickerPolicy::Random
}

/// Experiment description read from TOML (or JSON for `.json` files).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub num_rbs: usize,
    #[serde(default)]
    pub numerology: Numerology,
    #[serde(default = "one")]
    pub ul_power: f64,
    #[serde(default = "one")]
    pub dl_power: f64,
    #[serde(default = "one")]
    pub noise_power: f64,
    /// Profile set; ignored when `profiles` is given.
    #[serde(default)]
    pub builtin: Option<BuiltinSet>,
    #[serde(default)]
    pub profiles: Option<Vec<ProfileSpec>>,
    /// Users per group. When absent, `N_RB * U_mux` users are split as
    /// evenly as possible over the groups for every multiplexing order.
    #[serde(default)]
    pub group_sizes: Option<Vec<usize>>,
    /// Large-scale fading: one spec for everyone or one per group.
    #[serde(default = "default_fading")]
    pub fading: Vec<FadingSpec>,
    pub m_sweep: Vec<usize>,
    pub mux_sweep: Vec<usize>,
    pub trials: usize,
    pub scheduler: SchedulerMode,
    #[serde(default = "default_picker")]
    pub picker: PickerPolicy,
    #[serde(default)]
    pub rb_mapping: RbMapping,
    #[serde(default = "default_direction")]
    pub direction: Directions,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Worker threads; 0 or absent uses all cores.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub estimation: EstimationSettings,
}

impl ExperimentConfig {
    /// Load from a file; `.json` files are parsed as JSON, others as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reference experiment: four built-in profiles, 4 RBs, exact scheduler.
    pub fn reference() -> Self {
        ExperimentConfig {
            seed: 1,
            num_rbs: 4,
            numerology: Numerology::LTE,
            ul_power: 1.0,
            dl_power: 1.0,
            noise_power: 1.0,
            builtin: Some(BuiltinSet::Table1),
            profiles: None,
            group_sizes: None,
            fading: default_fading(),
            m_sweep: vec![64, 80, 96, 112],
            mux_sweep: vec![4],
            trials: 10,
            scheduler: SchedulerMode::Exact,
            picker: PickerPolicy::Random,
            rb_mapping: RbMapping::Fixed,
            direction: default_direction(),
            output: None,
            workers: None,
            estimation: EstimationSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.numerology.validate()?;
        if self.m_sweep.is_empty() || self.mux_sweep.is_empty() {
            return Err(Error::Config(
                "m_sweep and mux_sweep must be non-empty".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.num_rbs == 0 {
            return Err(Error::Config("num_rbs must be >= 1".into()));
        }
        if self.directions().is_empty() {
            return Err(Error::Config("direction list is empty".into()));
        }
        let profiles = self.profiles()?;
        if let Some(sizes) = &self.group_sizes {
            if sizes.len() != profiles.len() {
                return Err(Error::Config(format!(
                    "{} group sizes for {} profiles",
                    sizes.len(),
                    profiles.len()
                )));
            }
            if sizes.iter().sum::<usize>() == 0 {
                return Err(Error::Config("group sizes sum to zero".into()));
            }
        }
        if self.fading.len() != 1 && self.fading.len() != profiles.len() {
            return Err(Error::Config(
                "fading needs one entry or one per group".into(),
            ));
        }
        for f in &self.fading {
            f.validate()?;
        }
        for &m in &self.m_sweep {
            for &u in &self.mux_sweep {
                self.system_config(m, u).validate()?;
            }
        }
        if self.estimation.trials == 0 {
            return Err(Error::Config("estimation trials must be >= 1".into()));
        }
        Ok(())
    }

    /// One profile per group.
    pub fn profiles(&self) -> Result<Vec<ChannelProfile>> {
        match (&self.profiles, self.builtin) {
            (Some(list), _) => {
                if list.is_empty() {
                    return Err(Error::Config("profile list is empty".into()));
                }
                list.iter().map(ProfileSpec::build).collect()
            }
            (None, Some(BuiltinSet::Table1)) => Ok(builtin_profiles()),
            (None, None) => Err(Error::Config(
                "set `builtin = \"table1\"` or give [[profiles]]".into(),
            )),
        }
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.direction.to_vec()
    }

    pub fn system_config(&self, m: usize, mux: usize) -> SystemConfig {
        SystemConfig {
            num_rbs: self.num_rbs,
            num_antennas: m,
            max_mux: mux,
            ul_power: self.ul_power,
            dl_power: self.dl_power,
            noise_power: self.noise_power,
            numerology: self.numerology,
        }
    }

    /// Group sizes at multiplexing order `mux`.
    pub fn group_sizes(&self, mux: usize) -> Result<Vec<usize>> {
        if let Some(s) = &self.group_sizes {
            return Ok(s.clone());
        }
        let g = self.profiles()?.len();
        let k = self.num_rbs * mux;
        Ok((0..g).map(|i| k / g + usize::from(i < k % g)).collect())
    }

    /// Worker count: the environment override, then the config, then all
    /// cores (0).
    pub fn worker_count(&self) -> Result<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v:?} is not a count"))),
            Err(_) => Ok(self.workers.unwrap_or(0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
num_rbs = 4
builtin = "table1"
m_sweep = [64]
mux_sweep = [4, 7]
trials = 2
scheduler = "greedy"
"#;

    #[test]
    fn minimal_toml_uses_defaults() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.numerology, Numerology::LTE);
        assert_eq!(c.directions(), vec![Direction::Uplink]);
        assert_eq!(c.picker, PickerPolicy::Random);
        assert_eq!(c.group_sizes(4).unwrap(), vec![4, 4, 4, 4]);
        assert_eq!(c.group_sizes(7).unwrap(), vec![7, 7, 7, 7]);
        assert_eq!(c.profiles().unwrap().len(), 4);
        assert_eq!(c.fading, default_fading());
    }

    #[test]
    fn full_toml() {
        let text = r#"
seed = 9
num_rbs = 3
noise_power = 0.5
m_sweep = [8, 16]
mux_sweep = [2]
trials = 4
scheduler = "exact"
picker = "round_robin"
rb_mapping = "optimized_order"
direction = ["uplink", "downlink"]
group_sizes = [3, 3]

[numerology]
symbols_per_rb = 14
subcarriers_per_rb = 12
symbol_duration_s = 71.4e-6
subcarrier_spacing_hz = 15000.0

[[profiles]]
name = "slow"
max_doppler_hz = 5.0
max_delay_spread_s = 0.41e-6

[[profiles]]
name = "fast"
max_doppler_hz = 300.0
max_delay_spread_s = 4.69e-6
taps = [{ delay_s = 0.0, power = 2.0 }, { delay_s = 4.69e-6, power = 1.0 }]

[[fading]]
kind = "constant"
gain_db = 10.0

[[fading]]
kind = "log_normal"
mean_db = 5.0
spread_db = 3.0
"#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.directions(), vec![Direction::Uplink, Direction::Downlink]);
        let p = c.profiles().unwrap();
        assert_eq!(p[1].taps[0].power, 2.0 / 3.0);
        assert_eq!(c.rb_mapping, RbMapping::OptimizedOrder);
        assert_eq!(c.group_sizes(2).unwrap(), vec![3, 3]);
    }

    #[test]
    fn json_round_trip() {
        let c = ExperimentConfig::reference();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&text).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            MINIMAL.replace("trials = 2", "trials = 0"),
            MINIMAL.replace("m_sweep = [64]", "m_sweep = []"),
            MINIMAL.replace("builtin = \"table1\"", ""),
            MINIMAL.replace("scheduler = \"greedy\"", "scheduler = \"annealing\""),
            format!("{MINIMAL}\ncolour = 1\n"),
            format!("{MINIMAL}\ngroup_sizes = [1, 2]\n"),
        ];
        for text in bad {
            assert!(ExperimentConfig::from_toml_str(&text).is_err(), "{text}");
        }
    }

    #[test]
    fn uneven_auto_split() {
        let mut c = ExperimentConfig::reference();
        c.num_rbs = 3;
        assert_eq!(c.group_sizes(3).unwrap(), vec![3, 2, 2, 2]);
    }
}

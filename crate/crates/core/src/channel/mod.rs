//! Statistical channel profiles and small-scale fading synthesis.
//!
//! A profile is characterized by its maximum Doppler shift and maximum delay
//! spread. Those two numbers fix the largest pilot spacing (in symbols and in
//! subcarriers) at which the channel is still sampled at twice the Nyquist
//! density. Realizations are tapped delay lines whose taps are independent
//! sum-of-sinusoids Doppler processes.

mod doppler;
mod realization;

pub use doppler::{SosProcess, DEFAULT_SINUSOIDS};
pub use realization::{generate_realization, tdl_grid, ChannelRealization};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Numerology;

/// One path of a power-delay profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub delay_s: f64,
    /// Linear relative power; the taps of a profile sum to 1.
    pub power: f64,
}

/// (Doppler, delay-spread) class of a group of users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub name: String,
    pub max_doppler_hz: f64,
    pub max_delay_spread_s: f64,
    pub taps: Vec<Tap>,
}

impl ChannelProfile {
    /// Two equal-power taps at 0 and at the maximum delay spread.
    pub fn bracket(
        name: impl Into<String>,
        max_doppler_hz: f64,
        max_delay_spread_s: f64,
    ) -> Result<Self> {
        Self::with_taps(
            name,
            max_doppler_hz,
            max_delay_spread_s,
            vec![
                Tap {
                    delay_s: 0.0,
                    power: 0.5,
                },
                Tap {
                    delay_s: max_delay_spread_s,
                    power: 0.5,
                },
            ],
        )
    }

    /// Profile with an explicit tap table. Powers are normalized to sum to 1.
    pub fn with_taps(
        name: impl Into<String>,
        max_doppler_hz: f64,
        max_delay_spread_s: f64,
        mut taps: Vec<Tap>,
    ) -> Result<Self> {
        let name = name.into();
        let total: f64 = taps.iter().map(|t| t.power).sum();
        if taps.is_empty() || taps.iter().any(|t| !(t.power >= 0.0)) || !(total > 0.0) {
            return Err(Error::Config(format!(
                "profile '{name}': invalid tap powers"
            )));
        }
        for t in &mut taps {
            t.power /= total;
        }
        let profile = ChannelProfile {
            name,
            max_doppler_hz,
            max_delay_spread_s,
            taps,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("profile '{}': {what}", self.name)));
        if !(self.max_doppler_hz > 0.0 && self.max_doppler_hz.is_finite()) {
            return bad("Doppler shift must be positive");
        }
        if !(self.max_delay_spread_s > 0.0 && self.max_delay_spread_s.is_finite()) {
            return bad("delay spread must be positive");
        }
        if self.taps.is_empty() {
            return bad("no taps");
        }
        let tol = 1e-12 * self.max_delay_spread_s;
        if self
            .taps
            .iter()
            .any(|t| !(t.delay_s >= 0.0 && t.delay_s <= self.max_delay_spread_s + tol))
        {
            return bad("tap delay outside [0, max delay spread]");
        }
        let total: f64 = self.taps.iter().map(|t| t.power).sum();
        if (total - 1.0).abs() > 1e-9 || self.taps.iter().any(|t| t.power < 0.0) {
            return bad("tap powers must be non-negative and sum to 1");
        }
        Ok(())
    }

    /// Frequency correlation E[H(n + dn) H*(n)] implied by the tap table.
    pub fn frequency_correlation(
        &self,
        dn: i64,
        subcarrier_spacing_hz: f64,
    ) -> num_complex::Complex64 {
        self.taps
            .iter()
            .map(|t| {
                let phase =
                    -2.0 * std::f64::consts::PI * dn as f64 * subcarrier_spacing_hz * t.delay_s;
                num_complex::Complex64::from_polar(t.power, phase)
            })
            .sum()
    }
}

/// Pilot spacing along time (symbols) and frequency (subcarriers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PilotSpacing {
    pub time_spacing_symbols: usize,
    pub freq_spacing_subcarriers: usize,
}

impl PilotSpacing {
    pub fn new(time_spacing_symbols: usize, freq_spacing_subcarriers: usize) -> Self {
        PilotSpacing {
            time_spacing_symbols,
            freq_spacing_subcarriers,
        }
    }
}

impl std::fmt::Display for PilotSpacing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}, {})",
            self.time_spacing_symbols, self.freq_spacing_subcarriers
        )
    }
}

// floor() that does not lose exact integers to rounding, e.g. 1/(4 f T) with
// f = 1/(4T) evaluating to 0.999...
fn robust_floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

/// Largest spacings at twice the Nyquist pilot density, without clamping to
/// the resource-block size.
pub fn max_spacing_unclamped(profile: &ChannelProfile, num: &Numerology) -> Result<PilotSpacing> {
    let time = robust_floor(1.0 / (4.0 * profile.max_doppler_hz * num.symbol_duration_s));
    let freq = robust_floor(1.0 / (4.0 * profile.max_delay_spread_s * num.subcarrier_spacing_hz));
    let check = |v: f64, axis: &'static str| {
        if v < 1.0 {
            Err(Error::UnsupportableProfile {
                profile: profile.name.clone(),
                axis,
            })
        } else {
            Ok(v.min(usize::MAX as f64) as usize)
        }
    };
    Ok(PilotSpacing::new(
        check(time, "time")?,
        check(freq, "frequency")?,
    ))
}

/// Largest admissible pilot spacing for a profile, clamped to one RB.
pub fn max_spacing(profile: &ChannelProfile, num: &Numerology) -> Result<PilotSpacing> {
    let raw = max_spacing_unclamped(profile, num)?;
    Ok(PilotSpacing::new(
        raw.time_spacing_symbols.min(num.symbols_per_rb),
        raw.freq_spacing_subcarriers.min(num.subcarriers_per_rb),
    ))
}

/// The four profiles EPA5, EVA70, ETU70 and ETU300 with bracket PDPs.
pub fn builtin_profiles() -> Vec<ChannelProfile> {
    [
        ("EPA5", 5.0, 0.41e-6),
        ("EVA70", 70.0, 2.51e-6),
        ("ETU70", 70.0, 4.69e-6),
        ("ETU300", 300.0, 4.69e-6),
    ]
    .into_iter()
    .map(|(name, f, tau)| ChannelProfile::bracket(name, f, tau).expect("builtin profile is valid"))
    .collect()
}

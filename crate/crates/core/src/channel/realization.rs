use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::doppler::{SosProcess, DEFAULT_SINUSOIDS};
use super::ChannelProfile;
use crate::error::{Error, Result};
use crate::model::{Numerology, SystemConfig, UserId, UserPopulation};
use crate::seed;

/// Small-scale fading for every user, RB, symbol, subcarrier and antenna.
///
/// RBs are adjacent in frequency and share the same block of OFDM symbols.
/// Entries have unit average power; large-scale fading is applied separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelRealization {
    num_users: usize,
    num_rbs: usize,
    symbols: usize,
    subcarriers: usize,
    antennas: usize,
    seed: u64,
    /// Profile index of each user.
    profiles: Vec<usize>,
    data: Vec<Complex64>,
}

impl ChannelRealization {
    /// Build a realization from raw antenna vectors laid out as
    /// `[user][rb][symbol][subcarrier][antenna]`.
    pub fn from_raw(
        num_users: usize,
        num_rbs: usize,
        num: &Numerology,
        antennas: usize,
        data: Vec<Complex64>,
    ) -> Result<Self> {
        let expected = num_users * num_rbs * num.res_per_rb() * antennas;
        if data.len() != expected {
            return Err(Error::Config(format!(
                "raw channel data has {} entries, expected {expected}",
                data.len()
            )));
        }
        Ok(ChannelRealization {
            num_users,
            num_rbs,
            symbols: num.symbols_per_rb,
            subcarriers: num.subcarriers_per_rb,
            antennas,
            seed: 0,
            profiles: vec![0; num_users],
            data,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_rbs(&self) -> usize {
        self.num_rbs
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn profile_of(&self, user: UserId) -> usize {
        self.profiles[user.0]
    }

    /// Channel vector of `user` at symbol `t`, subcarrier `n` of RB `rb`.
    pub fn vector(&self, user: UserId, rb: usize, t: usize, n: usize) -> &[Complex64] {
        debug_assert!(user.0 < self.num_users && rb < self.num_rbs);
        debug_assert!(t < self.symbols && n < self.subcarriers);
        let re = ((user.0 * self.num_rbs + rb) * self.symbols + t) * self.subcarriers + n;
        &self.data[re * self.antennas..(re + 1) * self.antennas]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

fn tap_processes(profile: &ChannelProfile, master: u64, path: &[u64]) -> Vec<SosProcess> {
    (0..profile.taps.len())
        .map(|l| {
            let mut p = path.to_vec();
            p.push(l as u64);
            let mut rng = seed::rng(master, &p);
            SosProcess::new(profile.max_doppler_hz, DEFAULT_SINUSOIDS, &mut rng)
        })
        .collect()
}

// exp(-j 2 pi n df tau_l) scaled by sqrt(p_l), laid out [tap][subcarrier]
fn tap_phasors(profile: &ChannelProfile, subcarriers: usize, spacing_hz: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(profile.taps.len() * subcarriers);
    for tap in &profile.taps {
        let amp = tap.power.sqrt();
        for n in 0..subcarriers {
            out.push(Complex64::from_polar(
                amp,
                -2.0 * PI * n as f64 * spacing_hz * tap.delay_s,
            ));
        }
    }
    out
}

fn tap_series(processes: &[SosProcess], symbols: usize, symbol_duration_s: f64) -> Vec<Complex64> {
    processes
        .iter()
        .flat_map(|p| (0..symbols).map(move |t| p.sample(t as f64 * symbol_duration_s)))
        .collect()
}

/// One antenna's frequency response over a `symbols x subcarriers` grid,
/// returned time-major (`t * subcarriers + n`). The stream is keyed by
/// `(master, path)`.
pub fn tdl_grid(
    profile: &ChannelProfile,
    symbols: usize,
    subcarriers: usize,
    num: &Numerology,
    master: u64,
    path: &[u64],
) -> Vec<Complex64> {
    let procs = tap_processes(profile, master, path);
    let series = tap_series(&procs, symbols, num.symbol_duration_s);
    let phasors = tap_phasors(profile, subcarriers, num.subcarrier_spacing_hz);
    let taps = profile.taps.len();
    let mut out = Vec::with_capacity(symbols * subcarriers);
    for t in 0..symbols {
        for n in 0..subcarriers {
            out.push(
                (0..taps)
                    .map(|l| series[l * symbols + t] * phasors[l * subcarriers + n])
                    .sum(),
            );
        }
    }
    out
}

/// Draw a realization for every user of `pop`; user `k` follows
/// `profiles[group(k)]`.
///
/// Each (user, antenna, tap) process is keyed by its own derived seed, so the
/// first `M` antennas of a larger array coincide with an `M`-antenna draw
/// under the same seed.
pub fn generate_realization(
    pop: &UserPopulation,
    profiles: &[ChannelProfile],
    cfg: &SystemConfig,
    seed: u64,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    if pop.num_groups() > profiles.len() {
        return Err(Error::Config(format!(
            "{} groups but only {} profiles",
            pop.num_groups(),
            profiles.len()
        )));
    }
    for p in profiles {
        p.validate()?;
    }
    let num = &cfg.numerology;
    let (nrb, ns, nsc, m) = (
        cfg.num_rbs,
        num.symbols_per_rb,
        num.subcarriers_per_rb,
        cfg.num_antennas,
    );
    let total_sc = nrb * nsc;
    let per_user = nrb * ns * nsc * m;
    let user_profiles: Vec<usize> = pop.users().iter().map(|u| u.group).collect();
    let phasors: Vec<Vec<Complex64>> = profiles
        .iter()
        .map(|p| tap_phasors(p, total_sc, num.subcarrier_spacing_hz))
        .collect();

    let mut data = vec![Complex64::new(0.0, 0.0); pop.num_users() * per_user];
    data.par_chunks_mut(per_user)
        .enumerate()
        .for_each(|(k, chunk)| {
            let g = user_profiles[k];
            let profile = &profiles[g];
            let ph = &phasors[g];
            let taps = profile.taps.len();
            for ant in 0..m {
                let procs = tap_processes(profile, seed, &[k as u64, ant as u64]);
                let series = tap_series(&procs, ns, num.symbol_duration_s);
                for rb in 0..nrb {
                    for t in 0..ns {
                        for n in 0..nsc {
                            let global = rb * nsc + n;
                            let h: Complex64 = (0..taps)
                                .map(|l| series[l * ns + t] * ph[l * total_sc + global])
                                .sum();
                            chunk[((rb * ns + t) * nsc + n) * m + ant] = h;
                        }
                    }
                }
            }
        });

    Ok(ChannelRealization {
        num_users: pop.num_users(),
        num_rbs: nrb,
        symbols: ns,
        subcarriers: nsc,
        antennas: m,
        seed,
        profiles: user_profiles,
        data,
    })
}

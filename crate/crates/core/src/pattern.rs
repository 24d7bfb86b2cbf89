//! Pilot patterns and the admissible pattern registry.
//!
//! A pattern has a regular anchor lattice with spacing `(ds, dsc)` inside one
//! RB, and reserves `max_mux` resource elements per anchor, so that
//!
//! ```text
//! |P| = ceil(N_s / ds) * ceil(N_SC / dsc) * U_mux
//! ```
//!
//! The REs of an anchor are taken in frequency order starting at the anchor,
//! continuing into the next symbol column at the RB edge and skipping REs
//! already claimed by an earlier anchor. Only the count and the anchor
//! spacing matter downstream; the packing just has to be deterministic.

use serde::{Deserialize, Serialize};

use crate::channel::{max_spacing, ChannelProfile, PilotSpacing};
use crate::error::{Error, Result};
use crate::model::Numerology;

/// Set of pilot resource elements `(symbol, subcarrier)` in one RB.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotPattern {
    pub spacing: PilotSpacing,
    pub mux_order: usize,
    pub symbols: usize,
    pub subcarriers: usize,
    /// Sorted, distinct.
    pub positions: Vec<(usize, usize)>,
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Pilot RE count of a pattern with the given spacing.
pub fn pattern_size(spacing: PilotSpacing, num: &Numerology, mux: usize) -> usize {
    ceil_div(num.symbols_per_rb, spacing.time_spacing_symbols)
        * ceil_div(num.subcarriers_per_rb, spacing.freq_spacing_subcarriers)
        * mux
}

impl PilotPattern {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Pilot REs over all REs of the RB.
    pub fn overhead(&self) -> f64 {
        self.positions.len() as f64 / (self.symbols * self.subcarriers) as f64
    }

    /// Anchor positions of the lattice.
    pub fn anchors(&self) -> Vec<(usize, usize)> {
        anchors(self.spacing, self.symbols, self.subcarriers)
    }

    /// Membership mask, indexed `t * subcarriers + n`.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.symbols * self.subcarriers];
        for &(t, n) in &self.positions {
            mask[t * self.subcarriers + n] = true;
        }
        mask
    }

    pub fn contains(&self, t: usize, n: usize) -> bool {
        self.positions.binary_search(&(t, n)).is_ok()
    }

    /// Text map: one row per subcarrier (top row is subcarrier 0), one
    /// column per symbol, `P` for pilots and `.` for data.
    pub fn grid_map(&self) -> String {
        let mask = self.mask();
        let mut out = String::with_capacity((self.symbols + 1) * self.subcarriers);
        for n in 0..self.subcarriers {
            for t in 0..self.symbols {
                out.push(if mask[t * self.subcarriers + n] {
                    'P'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }
}

fn anchors(spacing: PilotSpacing, symbols: usize, subcarriers: usize) -> Vec<(usize, usize)> {
    let (ds, dsc) = (
        spacing.time_spacing_symbols,
        spacing.freq_spacing_subcarriers,
    );
    let mut out = Vec::new();
    for a in 0..ceil_div(symbols, ds) {
        for b in 0..ceil_div(subcarriers, dsc) {
            out.push((a * ds, b * dsc));
        }
    }
    out
}

/// Build the pattern with the given spacing for `mux` multiplexed users.
pub fn build_pattern(spacing: PilotSpacing, num: &Numerology, mux: usize) -> Result<PilotPattern> {
    num.validate()?;
    let (ns, nsc) = (num.symbols_per_rb, num.subcarriers_per_rb);
    if spacing.time_spacing_symbols == 0 || spacing.time_spacing_symbols > ns {
        return Err(Error::Config(format!(
            "time spacing {} outside [1, {ns}]",
            spacing.time_spacing_symbols
        )));
    }
    if spacing.freq_spacing_subcarriers == 0 || spacing.freq_spacing_subcarriers > nsc {
        return Err(Error::Config(format!(
            "frequency spacing {} outside [1, {nsc}]",
            spacing.freq_spacing_subcarriers
        )));
    }
    if mux == 0 {
        return Err(Error::Config("mux order must be >= 1".into()));
    }
    let res = num.res_per_rb();
    let size = pattern_size(spacing, num, mux);
    if size >= res {
        return Err(Error::NoDataRoom { pilots: size, res });
    }

    // linear index in (symbol-major, subcarrier-minor) scan order
    let mut taken = vec![false; res];
    for (t, n) in anchors(spacing, ns, nsc) {
        let mut idx = t * nsc + n;
        for _ in 0..mux {
            while taken[idx] {
                idx = (idx + 1) % res;
            }
            taken[idx] = true;
        }
    }
    let positions: Vec<(usize, usize)> = taken
        .iter()
        .enumerate()
        .filter(|(_, &x)| x)
        .map(|(i, _)| (i / nsc, i % nsc))
        .collect();
    debug_assert_eq!(positions.len(), size);
    Ok(PilotPattern {
        spacing,
        mux_order: mux,
        symbols: ns,
        subcarriers: nsc,
        positions,
    })
}

/// Worst-case fixed pattern covering every profile.
///
/// Its size is the maximum per-profile pattern size; among maximizers the
/// smaller time spacing, then the smaller frequency spacing, wins.
pub fn conventional_pattern(
    profiles: &[ChannelProfile],
    num: &Numerology,
    mux: usize,
) -> Result<PilotPattern> {
    if profiles.is_empty() {
        return Err(Error::Config("no channel profiles".into()));
    }
    let mut best: Option<(usize, PilotSpacing)> = None;
    for p in profiles {
        let s = max_spacing(p, num)?;
        let size = pattern_size(s, num, mux);
        let better = match best {
            None => true,
            Some((bs, bsp)) => {
                size > bs
                    || (size == bs
                        && (s.time_spacing_symbols, s.freq_spacing_subcarriers)
                            < (bsp.time_spacing_symbols, bsp.freq_spacing_subcarriers))
            }
        };
        if better {
            best = Some((size, s));
        }
    }
    let (_, spacing) = best.expect("profiles is nonempty");
    build_pattern(spacing, num, mux)
}

/// The admissible pattern set: pairwise-distinct spacings, at most one
/// pattern per channel-statistics group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRegistry {
    patterns: Vec<PilotPattern>,
}

impl PatternRegistry {
    /// Check distinct spacings and `len <= num_groups`.
    pub fn new(patterns: Vec<PilotPattern>, num_groups: usize) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::Config("empty pattern registry".into()));
        }
        if patterns.len() > num_groups {
            return Err(Error::Config(format!(
                "{} patterns exceed the {num_groups} channel groups",
                patterns.len()
            )));
        }
        for (i, p) in patterns.iter().enumerate() {
            if patterns[..i].iter().any(|q| q.spacing == p.spacing) {
                return Err(Error::Config(format!(
                    "duplicate pattern spacing {}",
                    p.spacing
                )));
            }
        }
        Ok(PatternRegistry { patterns })
    }

    pub fn patterns(&self) -> &[PilotPattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// One pattern per distinct clamped maximum spacing, in profile order.
pub fn default_registry(
    profiles: &[ChannelProfile],
    num: &Numerology,
    mux: usize,
) -> Result<PatternRegistry> {
    if profiles.is_empty() {
        return Err(Error::Config("no channel profiles".into()));
    }
    let mut patterns: Vec<PilotPattern> = Vec::new();
    for p in profiles {
        let s = max_spacing(p, num)?;
        if patterns.iter().all(|q| q.spacing != s) {
            patterns.push(build_pattern(s, num, mux)?);
        }
    }
    PatternRegistry::new(patterns, profiles.len())
}

/// Sparsest registry pattern whose spacing does not exceed the profile's
/// maximum spacing on either axis. Ties go to the larger time spacing, then
/// the larger frequency spacing.
pub fn select_pattern_for_group<'a>(
    registry: &'a PatternRegistry,
    profile: &ChannelProfile,
    num: &Numerology,
) -> Result<&'a PilotPattern> {
    let limit = max_spacing(profile, num)?;
    registry
        .patterns()
        .iter()
        .filter(|p| {
            p.spacing.time_spacing_symbols <= limit.time_spacing_symbols
                && p.spacing.freq_spacing_subcarriers <= limit.freq_spacing_subcarriers
        })
        .min_by(|a, b| {
            a.len()
                .cmp(&b.len())
                .then(
                    b.spacing
                        .time_spacing_symbols
                        .cmp(&a.spacing.time_spacing_symbols),
                )
                .then(
                    b.spacing
                        .freq_spacing_subcarriers
                        .cmp(&a.spacing.freq_spacing_subcarriers),
                )
        })
        .ok_or_else(|| Error::RegistryInfeasible(profile.name.clone()))
}

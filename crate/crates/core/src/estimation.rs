//! Interpolation error of pilot lattices on a noiseless channel.
//!
//! Pilots sample the true channel at the lattice anchors; every other RE is
//! reconstructed by separable linear interpolation (time first, then
//! frequency) with nearest-edge extrapolation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{tdl_grid, ChannelProfile, PilotSpacing};
use crate::error::{Error, Result};
use crate::model::{linear_to_db, Numerology};
use crate::pattern::PilotPattern;

/// Grid used for estimation checks: two LTE RBs in time by four in
/// frequency, large enough to hold doubled spacings of every built-in
/// profile.
pub fn validation_numerology() -> Numerology {
    Numerology {
        symbols_per_rb: 28,
        subcarriers_per_rb: 48,
        ..Numerology::LTE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub spacing: PilotSpacing,
    /// Mean over trials of the per-trial NMSE.
    pub nmse: f64,
    pub nmse_db: f64,
    pub trials: usize,
    /// Per-trial NMSE, in trial order.
    pub per_trial: Vec<f64>,
    /// Only one anchor symbol: time axis reconstructed by nearest neighbor.
    pub nearest_time: bool,
    /// Only one anchor subcarrier: frequency axis reconstructed by nearest
    /// neighbor.
    pub nearest_freq: bool,
}

/// Piecewise-linear interpolation of `(xs, ys)` at `0..len`, constant beyond
/// the end points. `xs` is strictly increasing and non-empty.
fn interp_line(xs: &[usize], ys: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(len);
    let mut seg = 0;
    for x in 0..len {
        if x <= xs[0] {
            out.push(ys[0]);
        } else if x >= xs[xs.len() - 1] {
            out.push(ys[xs.len() - 1]);
        } else {
            while xs[seg + 1] < x {
                seg += 1;
            }
            let (x0, x1) = (xs[seg] as f64, xs[seg + 1] as f64);
            let w = (x as f64 - x0) / (x1 - x0);
            out.push(ys[seg] * (1.0 - w) + ys[seg + 1] * w);
        }
    }
    out
}

/// Reconstruct a `symbols x subcarriers` grid (time-major) from its values
/// on the lattice `ts x ns`.
pub fn interpolate_grid(
    truth: &[Complex64],
    symbols: usize,
    subcarriers: usize,
    ts: &[usize],
    ns: &[usize],
) -> Vec<Complex64> {
    // time axis at each anchor subcarrier: cols[j][t]
    let cols: Vec<Vec<Complex64>> = ns
        .iter()
        .map(|&n| {
            let ys: Vec<Complex64> = ts.iter().map(|&t| truth[t * subcarriers + n]).collect();
            interp_line(ts, &ys, symbols)
        })
        .collect();
    let mut out = Vec::with_capacity(symbols * subcarriers);
    for t in 0..symbols {
        let ys: Vec<Complex64> = cols.iter().map(|c| c[t]).collect();
        out.extend(interp_line(ns, &ys, subcarriers));
    }
    out
}

/// NMSE over non-anchor REs of one reconstructed grid.
fn grid_nmse(truth: &[Complex64], est: &[Complex64], anchor: &[bool]) -> f64 {
    let (mut err, mut pow) = (0.0, 0.0);
    for i in 0..truth.len() {
        if !anchor[i] {
            err += (truth[i] - est[i]).norm_sqr();
            pow += truth[i].norm_sqr();
        }
    }
    if pow == 0.0 {
        0.0
    } else {
        err / pow
    }
}

/// Mean interpolation NMSE of `pattern`'s lattice over `trials` independent
/// single-antenna channel draws. Trial `i` uses the stream `(seed, [i])`, so
/// patterns compared under the same seed see identical channels.
pub fn interpolation_nmse(
    profile: &ChannelProfile,
    pattern: &PilotPattern,
    num: &Numerology,
    trials: usize,
    seed: u64,
) -> Result<EstimationReport> {
    profile.validate()?;
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let (s, n) = (num.symbols_per_rb, num.subcarriers_per_rb);
    if pattern.symbols != s || pattern.subcarriers != n {
        return Err(Error::Config(format!(
            "pattern grid {}x{} does not match numerology {s}x{n}",
            pattern.symbols, pattern.subcarriers
        )));
    }
    let anchors = pattern.anchors();
    let mut ts: Vec<usize> = anchors.iter().map(|a| a.0).collect();
    let mut ns: Vec<usize> = anchors.iter().map(|a| a.1).collect();
    ts.sort_unstable();
    ts.dedup();
    ns.sort_unstable();
    ns.dedup();
    let mut mask = vec![false; s * n];
    for &(t, f) in &anchors {
        mask[t * n + f] = true;
    }

    let per_trial: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let truth = tdl_grid(profile, s, n, num, seed, &[i as u64]);
            let est = interpolate_grid(&truth, s, n, &ts, &ns);
            grid_nmse(&truth, &est, &mask)
        })
        .collect();
    let nmse = per_trial.iter().sum::<f64>() / trials as f64;
    Ok(EstimationReport {
        spacing: pattern.spacing,
        nmse,
        nmse_db: linear_to_db(nmse),
        trials,
        per_trial,
        nearest_time: ts.len() < 2 && s > 1,
        nearest_freq: ns.len() < 2 && n > 1,
    })
}

/// One-sided exact binomial sign test: probability of at least `wins`
/// successes in `n` fair coin flips.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    if wins == 0 {
        return 1.0;
    }
    // log-space binomial terms
    let ln_choose = |k: usize| -> f64 {
        (1..=k)
            .map(|i| ((n - k + i) as f64).ln() - (i as f64).ln())
            .sum()
    };
    let ln_half = n as f64 * 0.5f64.ln();
    (wins..=n)
        .map(|k| (ln_choose(k) + ln_half).exp())
        .sum::<f64>()
        .min(1.0)
}

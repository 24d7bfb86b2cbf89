//! Large-system deterministic equivalents, limiting rates and the
//! grouping gain bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{db_to_linear, FadingSpec, SystemConfig};
use crate::phy::Direction;

/// Gauss-Hermite order used for log-normal expectations.
pub const HERMITE_ORDER: usize = 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticModel {
    /// `U_mux / M`.
    pub alpha: f64,
    /// `U_mux / N_RE`.
    pub beta: f64,
    pub gammas: Vec<f64>,
    /// One spec for every user, or one per group (weighted by `gammas`).
    pub fading: Vec<FadingSpec>,
    pub direction: Direction,
    pub power: f64,
    pub noise_power: f64,
}

impl AsymptoticModel {
    pub fn new(
        cfg: &SystemConfig,
        gammas: Vec<f64>,
        fading: Vec<FadingSpec>,
        direction: Direction,
    ) -> Result<Self> {
        cfg.validate()?;
        let power = match direction {
            Direction::Uplink => cfg.ul_power,
            Direction::Downlink => cfg.dl_power,
        };
        let model = AsymptoticModel {
            alpha: cfg.max_mux as f64 / cfg.num_antennas as f64,
            beta: cfg.max_mux as f64 / cfg.numerology.res_per_rb() as f64,
            gammas,
            fading,
            direction,
            power,
            noise_power: cfg.noise_power,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.alpha) || !unit(self.beta) {
            return Err(Error::Config(format!(
                "alpha = {} and beta = {} must lie in (0, 1)",
                self.alpha, self.beta
            )));
        }
        check_gammas(&self.gammas)?;
        if self.fading.len() != 1 && self.fading.len() != self.gammas.len() {
            return Err(Error::Config(
                "need one fading spec or one per group".into(),
            ));
        }
        for f in &self.fading {
            f.validate()?;
        }
        if !(self.power > 0.0) || !(self.noise_power >= 0.0) {
            return Err(Error::Config(
                "power must be positive and noise non-negative".into(),
            ));
        }
        Ok(())
    }

    /// `E[f(eta)]` under the configured gain distribution.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        if self.fading.len() == 1 {
            return expect_spec(&self.fading[0], &f);
        }
        self.fading
            .iter()
            .zip(&self.gammas)
            .filter(|(_, w)| **w > 0.0)
            .map(|(s, w)| w * expect_spec(s, &f))
            .sum()
    }

    /// Mean linear gain.
    pub fn eta_bar(&self) -> f64 {
        self.expect(|x| x)
    }
}

fn check_gammas(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty()
        || gammas.iter().any(|g| !(*g >= 0.0))
        || (gammas.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Config(format!(
            "group fractions {gammas:?} must be non-negative and sum to 1"
        )));
    }
    Ok(())
}

fn expect_spec(spec: &FadingSpec, f: &impl Fn(f64) -> f64) -> f64 {
    match spec {
        FadingSpec::Constant { gain_db } => f(db_to_linear(*gain_db)),
        FadingSpec::Explicit { gains_db } => {
            gains_db.iter().map(|g| f(db_to_linear(*g))).sum::<f64>() / gains_db.len() as f64
        }
        FadingSpec::LogNormal { mean_db, spread_db } => {
            if *spread_db == 0.0 {
                return f(db_to_linear(*mean_db));
            }
            let (x, w) = gauss_hermite(HERMITE_ORDER);
            let s = std::f64::consts::SQRT_2 * spread_db;
            x.iter()
                .zip(&w)
                .map(|(xi, wi)| wi * f(db_to_linear(mean_db + s * xi)))
                .sum::<f64>()
                / std::f64::consts::PI.sqrt()
        }
    }
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule for the weight
/// `exp(-x^2)`, nodes in decreasing order.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal Hermite recurrence
            let (mut p1, mut p2) = (PIM4, 0.0f64);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Deterministic equivalent of the per-RE SINR of a user with gain `eta_k`.
///
/// Uplink: `eta_k P / (s2/M + U eta_bar P / M)`.
/// Downlink: `eta_k P / (s2/M + U eta_k P / M)`.
pub fn deterministic_sinr(
    model: &AsymptoticModel,
    eta_k: f64,
    eta_bar: f64,
    m: usize,
    u: usize,
) -> f64 {
    let (mf, uf, p) = (m as f64, u as f64, model.power);
    let load = match model.direction {
        Direction::Uplink => eta_bar,
        Direction::Downlink => eta_k,
    };
    eta_k * p / (model.noise_power / mf + uf * load * p / mf)
}

/// `2^{E[log2(1 + deterministic_sinr(eta))]} - 1`.
pub fn sinr_bar(model: &AsymptoticModel, m: usize, u: usize) -> f64 {
    let eta_bar = model.eta_bar();
    let mean_log = model.expect(|eta| (1.0 + deterministic_sinr(model, eta, eta_bar, m, u)).log2());
    mean_log.exp2() - 1.0
}

fn max_active(gammas: &[f64], rhos: &[f64]) -> f64 {
    gammas
        .iter()
        .zip(rhos)
        .filter(|(g, _)| **g > 0.0)
        .map(|(_, r)| *r)
        .fold(0.0, f64::max)
}

/// Limiting per-multiplexed-user rates `(grouping, conventional)`.
///
/// The conventional overhead is the largest overhead among groups with a
/// non-zero fraction.
pub fn asymptotic_rates(
    model: &AsymptoticModel,
    pattern_sizes: &[usize],
    n_re: usize,
    m: usize,
    u: usize,
) -> Result<(f64, f64)> {
    if pattern_sizes.len() != model.gammas.len() {
        return Err(Error::Config("one pattern size per group required".into()));
    }
    if let Some(s) = pattern_sizes.iter().find(|s| **s >= n_re) {
        return Err(Error::NoDataRoom {
            pilots: *s,
            res: n_re,
        });
    }
    let rhos: Vec<f64> = pattern_sizes
        .iter()
        .map(|s| *s as f64 / n_re as f64)
        .collect();
    let se = (1.0 + sinr_bar(model, m, u)).log2();
    let grp: f64 = model
        .gammas
        .iter()
        .zip(&rhos)
        .map(|(g, r)| g * (1.0 - r))
        .sum::<f64>()
        * se;
    let conv = (1.0 - max_active(&model.gammas, &rhos)) * se;
    Ok((grp, conv))
}

/// Relative gain bound `sum_g gamma_g (1 - rho_g) / (1 - max rho) - 1`.
pub fn gain_bound(gammas: &[f64], rhos: &[f64]) -> Result<f64> {
    check_gammas(gammas)?;
    if gammas.len() != rhos.len() {
        return Err(Error::Config(
            "one overhead ratio per group required".into(),
        ));
    }
    if rhos.iter().any(|r| !(0.0..1.0).contains(r)) {
        return Err(Error::Config(format!(
            "overhead ratios {rhos:?} must lie in [0, 1)"
        )));
    }
    let num: f64 = gammas.iter().zip(rhos).map(|(g, r)| g * (1.0 - r)).sum();
    Ok((num / (1.0 - max_active(gammas, rhos)) - 1.0).max(0.0))
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperioritySummary {
    pub trials: usize,
    pub wins: usize,
    /// Fraction of trials with `R_grp > R_conv`.
    pub superiority: f64,
    /// Mean of `R_grp - R_conv`.
    pub mean_difference: f64,
    pub std_error: f64,
}

/// Paired comparison of grouping and conventional rates (at least 10 pairs).
pub fn superiority_check(r_grp: &[f64], r_conv: &[f64]) -> Result<SuperioritySummary> {
    if r_grp.len() != r_conv.len() {
        return Err(Error::Config("rate samples must be paired".into()));
    }
    if r_grp.len() < 10 {
        return Err(Error::Config(format!(
            "need at least 10 paired trials, got {}",
            r_grp.len()
        )));
    }
    let diffs: Vec<f64> = r_grp.iter().zip(r_conv).map(|(a, b)| a - b).collect();
    let wins = diffs.iter().filter(|d| **d > 0.0).count();
    let (mean_difference, std_error) = mean_and_se(&diffs);
    Ok(SuperioritySummary {
        trials: diffs.len(),
        wins,
        superiority: wins as f64 / diffs.len() as f64,
        mean_difference,
        std_error,
    })
}

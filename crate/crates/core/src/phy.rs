//! Linear combining/precoding and per-RE SINR under perfect CSI.
//!
//! Uplink uses maximum-ratio combining `w_k = h_k`; downlink uses
//! maximum-ratio transmission `w_k = M h_k / ||h_k||`. Rates are base-2.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::model::{SystemConfig, UserId, UserPopulation};
use crate::pattern::PilotPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uplink,
    Downlink,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Uplink => "uplink",
            Direction::Downlink => "downlink",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uplink" | "ul" => Ok(Direction::Uplink),
            "downlink" | "dl" => Ok(Direction::Downlink),
            other => Err(Error::Config(format!("unknown direction '{other}'"))),
        }
    }
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sqr(h: &[Complex64]) -> f64 {
    h.iter().map(Complex64::norm_sqr).sum()
}

/// MRC combiner: the channel vector itself.
pub fn mrc_combiner(h: &[Complex64]) -> Vec<Complex64> {
    h.to_vec()
}

/// MRT precoder `M h / ||h||`, with norm exactly `M`.
pub fn mrt_precoder(h: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = norm_sqr(h).sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateChannel(0));
    }
    let scale = h.len() as f64 / norm;
    Ok(h.iter().map(|x| x * scale).collect())
}

fn check_target(h_set: &[&[Complex64]], k: usize, fadings: &[f64]) -> Result<()> {
    if k >= h_set.len() || fadings.len() != h_set.len() {
        return Err(Error::Config(format!(
            "target {k} with {} channels and {} gains",
            h_set.len(),
            fadings.len()
        )));
    }
    Ok(())
}

/// Uplink SINR of `h_set[k]` under MRC against the other vectors of `h_set`.
pub fn uplink_sinr(
    h_set: &[&[Complex64]],
    k: usize,
    fadings: &[f64],
    cfg: &SystemConfig,
) -> Result<f64> {
    check_target(h_set, k, fadings)?;
    let w = mrc_combiner(h_set[k]);
    let ww = norm_sqr(&w);
    if ww == 0.0 {
        return Err(Error::DegenerateChannel(k));
    }
    let p = cfg.ul_power;
    let signal = fadings[k] * p * inner(&w, h_set[k]).norm_sqr();
    let interference: f64 = h_set
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(j, h)| fadings[j] * p * inner(&w, h).norm_sqr())
        .sum();
    Ok(signal / (interference + ww * cfg.noise_power))
}

/// Downlink SINR of user `k` under MRT precoding of every vector in `h_set`.
pub fn downlink_sinr(
    h_set: &[&[Complex64]],
    k: usize,
    fadings: &[f64],
    cfg: &SystemConfig,
) -> Result<f64> {
    check_target(h_set, k, fadings)?;
    let precoders = h_set
        .iter()
        .enumerate()
        .map(|(j, h)| mrt_precoder(h).map_err(|_| Error::DegenerateChannel(j)))
        .collect::<Result<Vec<_>>>()?;
    let m = h_set[k].len() as f64;
    let p = cfg.dl_power;
    let eta = fadings[k];
    let signal = eta * p * inner(&precoders[k], h_set[k]).norm_sqr();
    let interference: f64 = precoders
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, w)| eta * p * inner(w, h_set[k]).norm_sqr())
        .sum();
    Ok(signal / (interference + m * m * cfg.noise_power))
}

pub fn sinr(
    direction: Direction,
    h_set: &[&[Complex64]],
    k: usize,
    fadings: &[f64],
    cfg: &SystemConfig,
) -> Result<f64> {
    match direction {
        Direction::Uplink => uplink_sinr(h_set, k, fadings, cfg),
        Direction::Downlink => downlink_sinr(h_set, k, fadings, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinrSample {
    pub user: UserId,
    pub symbol: usize,
    pub subcarrier: usize,
    pub sinr: f64,
}

/// Spectral efficiency of one RB plus the per-RE SINR samples behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RbReport {
    pub rb: usize,
    /// `(1/N_RE) sum_k sum_{data REs} log2(1 + SINR)`.
    pub rate: f64,
    pub samples: Vec<SinrSample>,
}

fn check_rb_inputs(
    realization: &ChannelRealization,
    rb: usize,
    users: &[UserId],
    pattern: &PilotPattern,
    cfg: &SystemConfig,
) -> Result<()> {
    if users.len() > cfg.max_mux {
        return Err(Error::Config(format!(
            "{} users scheduled on RB {rb}, multiplexing limit is {}",
            users.len(),
            cfg.max_mux
        )));
    }
    if rb >= realization.num_rbs() {
        return Err(Error::Config(format!("RB {rb} out of range")));
    }
    if users.iter().any(|u| u.0 >= realization.num_users()) {
        return Err(Error::Config(
            "scheduled user missing from the realization".into(),
        ));
    }
    if pattern.symbols != realization.symbols() || pattern.subcarriers != realization.subcarriers()
    {
        return Err(Error::Config(
            "pattern grid does not match the realization".into(),
        ));
    }
    let res = realization.symbols() * realization.subcarriers();
    if pattern.len() >= res {
        return Err(Error::NoDataRoom {
            pilots: pattern.len(),
            res,
        });
    }
    Ok(())
}

/// Spectral efficiency of RB `rb` carrying `users` with pilot pattern
/// `pattern`. An empty user set yields rate 0.
pub fn rb_spectral_efficiency(
    realization: &ChannelRealization,
    rb: usize,
    users: &[UserId],
    pattern: &PilotPattern,
    pop: &UserPopulation,
    cfg: &SystemConfig,
    direction: Direction,
) -> Result<RbReport> {
    check_rb_inputs(realization, rb, users, pattern, cfg)?;
    let fadings: Vec<f64> = users.iter().map(|u| pop.fading(*u)).collect();
    let mask = pattern.mask();
    let nsc = realization.subcarriers();
    let mut total = 0.0;
    let mut samples = Vec::new();
    for t in 0..realization.symbols() {
        for n in 0..nsc {
            if mask[t * nsc + n] {
                continue;
            }
            let h_set: Vec<&[Complex64]> = users
                .iter()
                .map(|u| realization.vector(*u, rb, t, n))
                .collect();
            for (k, user) in users.iter().enumerate() {
                let s = sinr(direction, &h_set, k, &fadings, cfg).map_err(|e| match e {
                    Error::DegenerateChannel(i) => Error::DegenerateChannel(users[i].0),
                    other => other,
                })?;
                total += (1.0 + s).log2();
                samples.push(SinrSample {
                    user: *user,
                    symbol: t,
                    subcarrier: n,
                    sinr: s,
                });
            }
        }
    }
    Ok(RbReport {
        rb,
        rate: total / (realization.symbols() * nsc) as f64,
        samples,
    })
}

/// Per-RE Gram matrices of a candidate user set on one RB, for fast repeated
/// rate evaluation of subsets.
#[derive(Debug, Clone)]
pub struct RbGram {
    users: Vec<UserId>,
    fadings: Vec<f64>,
    antennas: usize,
    res: usize,
    /// Data-RE flags under the pattern in use.
    data: Vec<bool>,
    /// `[re][i][j] = h_i^H h_j`
    gram: Vec<Complex64>,
}

impl RbGram {
    pub fn new(
        realization: &ChannelRealization,
        rb: usize,
        users: &[UserId],
        pattern: &PilotPattern,
        pop: &UserPopulation,
    ) -> Result<Self> {
        let res = realization.symbols() * realization.subcarriers();
        if pattern.symbols != realization.symbols()
            || pattern.subcarriers != realization.subcarriers()
        {
            return Err(Error::Config(
                "pattern grid does not match the realization".into(),
            ));
        }
        if pattern.len() >= res {
            return Err(Error::NoDataRoom {
                pilots: pattern.len(),
                res,
            });
        }
        let k = users.len();
        let nsc = realization.subcarriers();
        let mut gram = vec![Complex64::new(0.0, 0.0); res * k * k];
        for re in 0..res {
            let (t, n) = (re / nsc, re % nsc);
            let vs: Vec<&[Complex64]> = users
                .iter()
                .map(|u| realization.vector(*u, rb, t, n))
                .collect();
            let block = &mut gram[re * k * k..(re + 1) * k * k];
            for i in 0..k {
                for j in i..k {
                    let g = inner(vs[i], vs[j]);
                    block[i * k + j] = g;
                    block[j * k + i] = g.conj();
                }
                if block[i * k + i].re == 0.0 {
                    return Err(Error::DegenerateChannel(users[i].0));
                }
            }
        }
        Ok(RbGram {
            users: users.to_vec(),
            fadings: users.iter().map(|u| pop.fading(*u)).collect(),
            antennas: realization.antennas(),
            res,
            data: pattern.mask().iter().map(|p| !p).collect(),
            gram,
        })
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    /// Rate of the subset given by local indices into [`RbGram::users`].
    pub fn subset_rate(&self, subset: &[usize], cfg: &SystemConfig, direction: Direction) -> f64 {
        let k = self.users.len();
        let m2 = (self.antennas * self.antennas) as f64;
        let mut total = 0.0;
        for re in (0..self.res).filter(|re| self.data[*re]) {
            let g = &self.gram[re * k * k..(re + 1) * k * k];
            for &a in subset {
                let gaa = g[a * k + a].re;
                let s = match direction {
                    Direction::Uplink => {
                        let p = cfg.ul_power;
                        let interf: f64 = subset
                            .iter()
                            .filter(|&&b| b != a)
                            .map(|&b| self.fadings[b] * p * g[a * k + b].norm_sqr())
                            .sum();
                        self.fadings[a] * p * gaa * gaa / (interf + gaa * cfg.noise_power)
                    }
                    Direction::Downlink => {
                        let ep = self.fadings[a] * cfg.dl_power;
                        let interf: f64 = subset
                            .iter()
                            .filter(|&&b| b != a)
                            .map(|&b| ep * m2 * g[b * k + a].norm_sqr() / g[b * k + b].re)
                            .sum();
                        ep * m2 * gaa / (interf + m2 * cfg.noise_power)
                    }
                };
                total += (1.0 + s).log2();
            }
        }
        total / self.res as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{builtin_profiles, generate_realization, PilotSpacing};
    use crate::model::{build_population, FadingSpec, Numerology};
    use crate::pattern::build_pattern;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cfg(m: usize, noise: f64) -> SystemConfig {
        SystemConfig {
            num_rbs: 1,
            num_antennas: m,
            max_mux: 4,
            ul_power: 1.0,
            dl_power: 1.0,
            noise_power: noise,
            numerology: Numerology::LTE,
        }
    }

    #[test]
    fn uplink_hand_example() {
        let h = [c(1.0, 0.0), c(1.0, 0.0)];
        let s = uplink_sinr(&[&h], 0, &[1.0], &cfg(2, 2.0)).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn downlink_hand_example() {
        let h = [c(1.0, 0.0), c(0.0, 1.0)];
        let w = mrt_precoder(&h).unwrap();
        assert!((norm_sqr(&w).sqrt() - 2.0).abs() < 1e-15);
        let s = downlink_sinr(&[&h], 0, &[1.0], &cfg(2, 1.0)).unwrap();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_user_is_snr_times_array_gain() {
        let h = [c(0.3, -1.2), c(2.0, 0.5), c(-0.7, 0.1)];
        let expect = 3.0 * norm_sqr(&h) / 0.5;
        for d in [Direction::Uplink, Direction::Downlink] {
            let s = sinr(d, &[&h], 0, &[3.0], &cfg(3, 0.5)).unwrap();
            assert!((s / expect - 1.0).abs() < 1e-13, "{d}");
        }
    }

    #[test]
    fn orthogonal_users_do_not_interfere() {
        let h1 = [c(1.0, 0.0), c(1.0, 0.0)];
        let h2 = [c(1.0, 1.0), c(-1.0, -1.0)];
        for d in [Direction::Uplink, Direction::Downlink] {
            let alone = sinr(d, &[&h1], 0, &[2.0], &cfg(2, 1.0)).unwrap();
            let paired = sinr(d, &[&h1, &h2], 0, &[2.0, 5.0], &cfg(2, 1.0)).unwrap();
            assert!((alone - paired).abs() < 1e-13);
            assert!((alone - 2.0 * 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_channel_is_degenerate() {
        let z = [c(0.0, 0.0); 2];
        let h = [c(1.0, 0.0); 2];
        assert!(matches!(
            uplink_sinr(&[&z], 0, &[1.0], &cfg(2, 1.0)),
            Err(Error::DegenerateChannel(0))
        ));
        assert!(matches!(
            downlink_sinr(&[&h, &z], 0, &[1.0, 1.0], &cfg(2, 1.0)),
            Err(Error::DegenerateChannel(1))
        ));
    }

    #[test]
    fn uplink_sinr_is_scale_free_in_the_combiner() {
        // Evaluate the uplink formula with w = c * h for an arbitrary complex c.
        let h1 = [c(0.4, 1.0), c(-1.1, 0.2), c(0.3, 0.3)];
        let h2 = [c(1.0, -0.5), c(0.1, 0.9), c(-0.6, 0.0)];
        let base = uplink_sinr(&[&h1, &h2], 0, &[1.5, 0.7], &cfg(3, 0.3)).unwrap();
        let scale = c(-2.5, 0.75);
        let w: Vec<Complex64> = h1.iter().map(|x| x * scale).collect();
        let s = 1.5 * inner(&w, &h1).norm_sqr()
            / (0.7 * inner(&w, &h2).norm_sqr() + norm_sqr(&w) * 0.3);
        assert!((s / base - 1.0).abs() < 1e-13);
    }

    fn fixture(m: usize, users: usize) -> (ChannelRealization, UserPopulation, SystemConfig) {
        let pop = build_population(&[users], &[FadingSpec::Constant { gain_db: 10.0 }], 1).unwrap();
        let mut cfg = cfg(m, 1.0);
        cfg.max_mux = users;
        let profiles = builtin_profiles();
        let real = generate_realization(&pop, &profiles[3..], &cfg, 3).unwrap();
        (real, pop, cfg)
    }

    #[test]
    fn adding_an_interferer_never_helps() {
        let (real, _, cfg) = fixture(4, 3);
        for d in [Direction::Uplink, Direction::Downlink] {
            for (t, n) in [(0, 0), (5, 7), (13, 11)] {
                let hs: Vec<&[Complex64]> =
                    (0..3).map(|u| real.vector(UserId(u), 0, t, n)).collect();
                let eta = [10.0; 3];
                let two = sinr(d, &hs[..2], 0, &eta[..2], &cfg).unwrap();
                let three = sinr(d, &hs, 0, &eta, &cfg).unwrap();
                assert!(three <= two);
            }
        }
    }

    #[test]
    fn rate_shrinks_when_pattern_grows() {
        let (real, pop, cfg) = fixture(8, 4);
        let users: Vec<UserId> = (0..4).map(UserId).collect();
        let num = cfg.numerology;
        let mut last = f64::INFINITY;
        for s in [(14, 12), (14, 6), (14, 3), (11, 3), (7, 2)] {
            let p = build_pattern(PilotSpacing::new(s.0, s.1), &num, 4).unwrap();
            let r = rb_spectral_efficiency(&real, 0, &users, &p, &pop, &cfg, Direction::Uplink)
                .unwrap()
                .rate;
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn empty_user_set_has_zero_rate() {
        let (real, pop, cfg) = fixture(2, 2);
        let p = build_pattern(PilotSpacing::new(14, 12), &cfg.numerology, 1).unwrap();
        let r = rb_spectral_efficiency(&real, 0, &[], &p, &pop, &cfg, Direction::Downlink).unwrap();
        assert_eq!(r.rate, 0.0);
        assert!(r.samples.is_empty());
    }

    #[test]
    fn mux_limit_is_enforced() {
        let (real, pop, mut cfg) = fixture(2, 3);
        cfg.max_mux = 2;
        let p = build_pattern(PilotSpacing::new(14, 12), &cfg.numerology, 1).unwrap();
        let users: Vec<UserId> = (0..3).map(UserId).collect();
        assert!(
            rb_spectral_efficiency(&real, 0, &users, &p, &pop, &cfg, Direction::Uplink).is_err()
        );
    }

    #[test]
    fn gram_path_matches_vector_path() {
        let (real, pop, cfg) = fixture(6, 4);
        let users: Vec<UserId> = (0..4).map(UserId).collect();
        let p = build_pattern(PilotSpacing::new(11, 3), &cfg.numerology, 4).unwrap();
        let gram = RbGram::new(&real, 0, &users, &p, &pop).unwrap();
        for d in [Direction::Uplink, Direction::Downlink] {
            for subset in [vec![0usize], vec![1, 3], vec![0, 1, 2, 3]] {
                let ids: Vec<UserId> = subset.iter().map(|&i| users[i]).collect();
                let direct = rb_spectral_efficiency(&real, 0, &ids, &p, &pop, &cfg, d)
                    .unwrap()
                    .rate;
                let fast = gram.subset_rate(&subset, &cfg, d);
                assert!(
                    (direct - fast).abs() <= 1e-12 * direct.abs().max(1.0),
                    "{d} {subset:?}"
                );
            }
        }
    }
}

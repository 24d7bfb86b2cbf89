use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::asymptotic::{gain_bound, mean_and_se};
use crate::channel::{generate_realization, max_spacing, ChannelProfile, PilotSpacing};
use crate::error::{Error, Result};
use crate::estimation::{interpolation_nmse, sign_test_p, validation_numerology};
use crate::model::{build_population, SystemConfig};
use crate::pattern::{
    build_pattern, conventional_pattern, default_registry, select_pattern_for_group,
};
use crate::phy::Direction;
use crate::scheduler::{
    conventional_schedule_exact, conventional_schedule_greedy, evaluate_schedule,
    grouping_schedule, grouping_schedule_optimized, RbMapping, SchedulerMode,
};
use crate::seed;

/// Column order of the result CSV.
pub const CSV_HEADER: &str = "M,U_mux,trial,direction,R_grp,R_conv,rel_gain,bound,scheduler,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "U_mux")]
    pub u_mux: usize,
    pub trial: usize,
    pub direction: Direction,
    #[serde(rename = "R_grp")]
    pub r_grp: f64,
    #[serde(rename = "R_conv")]
    pub r_conv: f64,
    pub rel_gain: f64,
    pub bound: f64,
    pub scheduler: SchedulerMode,
    pub seed: u64,
}

/// Per-(M, U_mux, direction) aggregate over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "U_mux")]
    pub u_mux: usize,
    pub direction: Direction,
    pub trials: usize,
    pub mean_r_grp: f64,
    pub mean_r_conv: f64,
    pub mean_gain: f64,
    pub gain_se: f64,
    pub wins: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<PointSummary>,
}

/// Seed of one trial. It depends on the master seed, the multiplexing order
/// and the trial index but not on `M`, so antenna sweeps reuse the same
/// users and (nested) channels.
pub fn trial_seed(master: u64, mux: usize, trial: usize) -> u64 {
    seed::derive(master, &[mux as u64, trial as u64])
}

/// Grouping-gain bound of the configured registry at multiplexing order
/// `mux`.
pub fn registry_bound(cfg: &ExperimentConfig, mux: usize) -> Result<f64> {
    let profiles = cfg.profiles()?;
    let sizes = cfg.group_sizes(mux)?;
    let k: usize = sizes.iter().sum();
    let gammas: Vec<f64> = sizes.iter().map(|s| *s as f64 / k as f64).collect();
    let num = &cfg.numerology;
    let registry = default_registry(&profiles, num, mux)?;
    let rhos = profiles
        .iter()
        .map(|p| Ok(select_pattern_for_group(&registry, p, num)?.overhead()))
        .collect::<Result<Vec<f64>>>()?;
    gain_bound(&gammas, &rhos)
}

struct TrialSetup<'a> {
    cfg: &'a ExperimentConfig,
    profiles: Vec<ChannelProfile>,
    sys: SystemConfig,
    sizes: Vec<usize>,
    bound: f64,
}

fn setup(cfg: &ExperimentConfig, m: usize, mux: usize) -> Result<TrialSetup<'_>> {
    Ok(TrialSetup {
        cfg,
        profiles: cfg.profiles()?,
        sys: cfg.system_config(m, mux),
        sizes: cfg.group_sizes(mux)?,
        bound: registry_bound(cfg, mux)?,
    })
}

/// All rows (one per direction) of one trial with the given seed.
fn run_trial(s: &TrialSetup, trial: usize, trial_seed: u64) -> Result<Vec<ResultRow>> {
    let (cfg, sys) = (s.cfg, &s.sys);
    let num = &sys.numerology;
    let pop = build_population(&s.sizes, &cfg.fading, seed::derive(trial_seed, &[1]))?;
    let real = generate_realization(&pop, &s.profiles, sys, seed::derive(trial_seed, &[2]))?;
    let pick_seed = seed::derive(trial_seed, &[3]);
    let registry = default_registry(&s.profiles, num, sys.max_mux)?;
    let conv = conventional_pattern(&s.profiles, num, sys.max_mux)?;
    let fixed = grouping_schedule(&pop, sys, &registry, &s.profiles, cfg.picker, pick_seed)?;

    let mut rows = Vec::new();
    for direction in cfg.directions() {
        let grouping = match cfg.rb_mapping {
            RbMapping::Fixed => fixed.clone(),
            RbMapping::OptimizedOrder => grouping_schedule_optimized(
                &real,
                &pop,
                sys,
                &registry,
                &s.profiles,
                cfg.picker,
                pick_seed,
                direction,
            )?,
        };
        let r_grp = evaluate_schedule(&real, &grouping, &pop, sys, direction)?;
        let (_, r_conv) = match cfg.scheduler {
            SchedulerMode::Exact => {
                conventional_schedule_exact(&real, &pop, sys, &conv, direction)?
            }
            SchedulerMode::Greedy => {
                conventional_schedule_greedy(&real, &pop, sys, &conv, direction)?
            }
        };
        rows.push(ResultRow {
            m: sys.num_antennas,
            u_mux: sys.max_mux,
            trial,
            direction,
            r_grp,
            r_conv,
            rel_gain: r_grp / r_conv - 1.0,
            bound: s.bound,
            scheduler: cfg.scheduler,
            seed: trial_seed,
        });
    }
    Ok(rows)
}

fn with_pool<T: Send>(cfg: &ExperimentConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.worker_count()?)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Spectral-efficiency comparison for every `(M, U_mux, trial)`: the
/// grouping scheme and the conventional optimizer on the same realization.
/// Rows are sorted by `(M, U_mux, trial, direction)`.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut setups = Vec::new();
    for &m in &cfg.m_sweep {
        for &u in &cfg.mux_sweep {
            setups.push(setup(cfg, m, u)?);
        }
    }
    let tasks: Vec<(usize, usize)> = (0..setups.len())
        .flat_map(|i| (0..cfg.trials).map(move |t| (i, t)))
        .collect();
    let results: Vec<Result<Vec<ResultRow>>> = with_pool(cfg, || {
        tasks
            .par_iter()
            .map(|&(i, t)| {
                let s = &setups[i];
                run_trial(s, t, trial_seed(cfg.seed, s.sys.max_mux, t))
            })
            .collect()
    })?;
    let mut rows = Vec::with_capacity(tasks.len());
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| {
        (a.m, a.u_mux, a.trial, a.direction.as_str()).cmp(&(
            b.m,
            b.u_mux,
            b.trial,
            b.direction.as_str(),
        ))
    });
    Ok(rows)
}

/// Aggregate rows per `(M, U_mux, direction)`, in first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<PointSummary> {
    let mut keys: Vec<(usize, usize, Direction)> = Vec::new();
    for r in rows {
        let k = (r.m, r.u_mux, r.direction);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(m, u_mux, direction)| {
            let sel: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.m == m && r.u_mux == u_mux && r.direction == direction)
                .collect();
            let n = sel.len() as f64;
            let gains: Vec<f64> = sel.iter().map(|r| r.rel_gain).collect();
            let (mean_gain, gain_se) = mean_and_se(&gains);
            PointSummary {
                m,
                u_mux,
                direction,
                trials: sel.len(),
                mean_r_grp: sel.iter().map(|r| r.r_grp).sum::<f64>() / n,
                mean_r_conv: sel.iter().map(|r| r.r_conv).sum::<f64>() / n,
                mean_gain,
                gain_se,
                wins: sel.iter().filter(|r| r.r_grp > r.r_conv).count(),
                bound: sel[0].bound,
            }
        })
        .collect()
}

/// Relative-gain sweep: the rows of [`run_trials`] and their per-point means
/// and standard errors next to the registry bound.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let rows = run_trials(cfg)?;
    let summary = summarize(&rows);
    Ok(SweepOutput { rows, summary })
}

/// Recompute a row from its `(M, U_mux, trial, seed)` fields.
pub fn replay_row(cfg: &ExperimentConfig, row: &ResultRow) -> Result<ResultRow> {
    let s = setup(cfg, row.m, row.u_mux)?;
    run_trial(&s, row.trial, row.seed)?
        .into_iter()
        .find(|r| r.direction == row.direction)
        .ok_or_else(|| Error::Config(format!("direction {} not configured", row.direction)))
}

/// Result rows as CSV; an empty slice still yields the header line.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    if rows.is_empty() {
        let mut out = out;
        writeln!(out, "{CSV_HEADER}")?;
        return Ok(());
    }
    write_records_csv(rows, out)
}

/// Any serializable records as CSV with a header row.
pub fn write_records_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// One lattice checked by the estimation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRow {
    pub profile: String,
    /// `rule` for the spacing-rule lattice, `doubled` for twice its spacing.
    pub lattice: String,
    pub time_spacing: usize,
    pub freq_spacing: usize,
    pub trials: usize,
    pub nmse_db: f64,
    /// Doubled rows: fraction of trials worse than the rule lattice.
    pub worse_fraction: Option<f64>,
    /// Doubled rows: one-sided sign-test p-value of that fraction.
    pub sign_test_p: Option<f64>,
    /// Rule rows: NMSE at or below the configured threshold.
    pub within_threshold: Option<bool>,
}

/// Interpolation NMSE of every profile at its spacing-rule lattice and at
/// twice that spacing, on paired channel draws.
pub fn run_estimation(cfg: &ExperimentConfig) -> Result<Vec<EstimationRow>> {
    cfg.validate()?;
    let grid = validation_numerology();
    let trials = cfg.estimation.trials;
    let mut rows = Vec::new();
    with_pool(cfg, || -> Result<()> {
        for (i, profile) in cfg.profiles()?.iter().enumerate() {
            let rule = max_spacing(profile, &cfg.numerology)?;
            let doubled = PilotSpacing::new(
                2 * rule.time_spacing_symbols,
                2 * rule.freq_spacing_subcarriers,
            );
            let stream = seed::derive(cfg.seed, &[i as u64]);
            let a = interpolation_nmse(
                profile,
                &build_pattern(rule, &grid, 1)?,
                &grid,
                trials,
                stream,
            )?;
            let b = interpolation_nmse(
                profile,
                &build_pattern(doubled, &grid, 1)?,
                &grid,
                trials,
                stream,
            )?;
            let worse = a
                .per_trial
                .iter()
                .zip(&b.per_trial)
                .filter(|(x, y)| y > x)
                .count();
            rows.push(EstimationRow {
                profile: profile.name.clone(),
                lattice: "rule".into(),
                time_spacing: rule.time_spacing_symbols,
                freq_spacing: rule.freq_spacing_subcarriers,
                trials,
                nmse_db: a.nmse_db,
                worse_fraction: None,
                sign_test_p: None,
                within_threshold: Some(a.nmse_db <= cfg.estimation.threshold_db),
            });
            rows.push(EstimationRow {
                profile: profile.name.clone(),
                lattice: "doubled".into(),
                time_spacing: doubled.time_spacing_symbols,
                freq_spacing: doubled.freq_spacing_subcarriers,
                trials,
                nmse_db: b.nmse_db,
                worse_fraction: Some(worse as f64 / trials as f64),
                sign_test_p: Some(sign_test_p(worse, trials)),
                within_threshold: None,
            });
        }
        Ok(())
    })??;
    Ok(rows)
}

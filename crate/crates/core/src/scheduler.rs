//! User-to-RB scheduling.
//!
//! Two families are provided:
//!
//! * conventional scheduling with one fixed worst-case pattern on every RB,
//!   solved exactly by dynamic programming over user subsets or
//!   approximately by a greedy fill;
//! * grouping-based scheduling, where RBs are pre-assigned to
//!   channel-statistics groups in proportion to group sizes, each RB gets
//!   the sparsest pattern feasible for its group, and its users are drawn
//!   from that group only.
//!
//! Conventional schedules serve `min(K, N_RB * U_mux)` users, each on one RB,
//! with at most `U_mux` users per RB.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelProfile, ChannelRealization, PilotSpacing};
use crate::error::{Error, Result};
use crate::model::{SystemConfig, UserId, UserPopulation};
use crate::pattern::{select_pattern_for_group, PatternRegistry, PilotPattern};
use crate::phy::{rb_spectral_efficiency, Direction, RbGram};
use crate::seed;

/// Transition budget of the exact search.
pub const DEFAULT_EXACT_BUDGET: u128 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerMode {
    Exact,
    Greedy,
}

impl SchedulerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchedulerMode::Exact => "exact",
            SchedulerMode::Greedy => "greedy",
        }
    }
}

/// How users of a group are drawn for the RBs it owns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickerPolicy {
    /// Shuffle the group with a seeded generator, then deal users to the
    /// owned RBs in order.
    Random,
    /// Deal users to the owned RBs in id order.
    RoundRobin,
}

/// How RBs are pre-assigned to groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RbMapping {
    /// Contiguous blocks in group order.
    #[default]
    Fixed,
    /// Try every group order and keep the one with the highest rate.
    OptimizedOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbAssignment {
    /// Owning group (grouping mode only).
    pub group: Option<usize>,
    pub users: Vec<UserId>,
    pub pattern: PilotPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleAssignment {
    pub rbs: Vec<RbAssignment>,
}

/// Compact per-RB view used for JSON dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbSummary {
    pub rb: usize,
    pub group: Option<usize>,
    pub spacing: PilotSpacing,
    pub pilots: usize,
    pub users: Vec<usize>,
}

impl ScheduleAssignment {
    pub fn num_rbs(&self) -> usize {
        self.rbs.len()
    }

    pub fn summary(&self) -> Vec<RbSummary> {
        self.rbs
            .iter()
            .enumerate()
            .map(|(rb, a)| RbSummary {
                rb,
                group: a.group,
                spacing: a.pattern.spacing,
                pilots: a.pattern.len(),
                users: a.users.iter().map(|u| u.0).collect(),
            })
            .collect()
    }

    /// Multiplexing limit and distinct users within each RB.
    pub fn check_mux(&self, cfg: &SystemConfig) -> Result<()> {
        if self.rbs.len() != cfg.num_rbs {
            return Err(Error::Config(format!(
                "{} RBs assigned, expected {}",
                self.rbs.len(),
                cfg.num_rbs
            )));
        }
        for (r, a) in self.rbs.iter().enumerate() {
            if a.users.len() > cfg.max_mux {
                return Err(Error::Config(format!(
                    "RB {r} carries {} > {} users",
                    a.users.len(),
                    cfg.max_mux
                )));
            }
            let mut u = a.users.clone();
            u.sort();
            u.dedup();
            if u.len() != a.users.len() {
                return Err(Error::Config(format!("RB {r} lists a user twice")));
            }
        }
        Ok(())
    }

    /// No user appears on two RBs.
    pub fn is_disjoint(&self) -> bool {
        let mut all: Vec<UserId> = self
            .rbs
            .iter()
            .flat_map(|a| a.users.iter().copied())
            .collect();
        let n = all.len();
        all.sort();
        all.dedup();
        all.len() == n
    }
}

fn check_conventional(
    pop: &UserPopulation,
    realization: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<()> {
    cfg.validate()?;
    if realization.num_users() != pop.num_users() || realization.num_rbs() != cfg.num_rbs {
        return Err(Error::Config(
            "realization does not match population/config".into(),
        ));
    }
    Ok(())
}

fn rb_grams(
    realization: &ChannelRealization,
    pop: &UserPopulation,
    cfg: &SystemConfig,
    pattern: &PilotPattern,
) -> Result<Vec<RbGram>> {
    let users: Vec<UserId> = (0..pop.num_users()).map(UserId).collect();
    (0..cfg.num_rbs)
        .map(|rb| RbGram::new(realization, rb, &users, pattern, pop))
        .collect()
}

fn mask_members(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Upper bound on DP transitions for `k` users, `n` RBs, `u` per RB and
/// `target` scheduled users.
fn exact_transitions(k: usize, n: usize, u: usize, target: usize) -> u128 {
    let mut total = 0u128;
    for r in 0..n {
        let lo = target.saturating_sub((n - r) * u);
        let hi = (r * u).min(target);
        for s in lo..=hi {
            let jmin = target.saturating_sub(s + (n - r - 1) * u);
            let jmax = u.min(target - s);
            let ways: u128 = (jmin..=jmax).map(|j| binomial(k - s, j)).sum();
            total = total.saturating_add(binomial(k, s).saturating_mul(ways));
        }
    }
    total
}

fn for_each_combination(items: &[usize], size: usize, mut f: impl FnMut(&[usize])) {
    let n = items.len();
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    let mut buf: Vec<usize> = Vec::with_capacity(size);
    loop {
        buf.clear();
        buf.extend(idx.iter().map(|&i| items[i]));
        f(&buf);
        // advance to the next combination in lexicographic order
        let mut i = size;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - size {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + n - size {
            return;
        }
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn conventional_assignment(sets: Vec<Vec<usize>>, pattern: &PilotPattern) -> ScheduleAssignment {
    ScheduleAssignment {
        rbs: sets
            .into_iter()
            .map(|s| RbAssignment {
                group: None,
                users: s.into_iter().map(UserId).collect(),
                pattern: pattern.clone(),
            })
            .collect(),
    }
}

#[derive(Clone, Copy)]
struct DpEntry {
    value: f64,
    prev: u64,
    chosen: u64,
}

/// Exact conventional optimum with the default transition budget.
pub fn conventional_schedule_exact(
    realization: &ChannelRealization,
    pop: &UserPopulation,
    cfg: &SystemConfig,
    pattern: &PilotPattern,
    direction: Direction,
) -> Result<(ScheduleAssignment, f64)> {
    conventional_schedule_exact_with_budget(
        realization,
        pop,
        cfg,
        pattern,
        direction,
        DEFAULT_EXACT_BUDGET,
    )
}

/// Maximize the mean RB rate over all user-to-RB assignments with the fixed
/// `pattern` on every RB.
///
/// Stages are RBs and states are the sets of users already placed; the
/// search is exact. Instances whose transition count exceeds `budget` are
/// refused with [`Error::ExactSearchTooLarge`].
pub fn conventional_schedule_exact_with_budget(
    realization: &ChannelRealization,
    pop: &UserPopulation,
    cfg: &SystemConfig,
    pattern: &PilotPattern,
    direction: Direction,
    budget: u128,
) -> Result<(ScheduleAssignment, f64)> {
    check_conventional(pop, realization, cfg)?;
    let k = pop.num_users();
    let (n, u) = (cfg.num_rbs, cfg.max_mux);
    let target = k.min(n * u);
    let states = if k > 63 {
        u128::MAX
    } else {
        exact_transitions(k, n, u, target)
    };
    if states > budget {
        return Err(Error::ExactSearchTooLarge {
            users: k,
            states,
            budget,
        });
    }
    let grams = rb_grams(realization, pop, cfg, pattern)?;
    let full: u64 = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };

    let mut stages: Vec<BTreeMap<u64, DpEntry>> = Vec::with_capacity(n + 1);
    let mut frontier = BTreeMap::new();
    frontier.insert(
        0u64,
        DpEntry {
            value: 0.0,
            prev: 0,
            chosen: 0,
        },
    );
    stages.push(frontier);
    for r in 0..n {
        let mut memo: BTreeMap<u64, f64> = BTreeMap::new();
        let mut next: BTreeMap<u64, DpEntry> = BTreeMap::new();
        for (&mask, entry) in &stages[r] {
            let placed = mask.count_ones() as usize;
            let free = mask_members(full & !mask);
            let jmin = target.saturating_sub(placed + (n - r - 1) * u);
            let jmax = u.min(target - placed);
            for j in jmin..=jmax {
                for_each_combination(&free, j, |subset| {
                    let t: u64 = subset.iter().fold(0, |acc, &i| acc | 1 << i);
                    let rate = *memo
                        .entry(t)
                        .or_insert_with(|| grams[r].subset_rate(subset, cfg, direction));
                    let value = entry.value + rate;
                    let key = mask | t;
                    let improve = next.get(&key).is_none_or(|e| value > e.value);
                    if improve {
                        next.insert(
                            key,
                            DpEntry {
                                value,
                                prev: mask,
                                chosen: t,
                            },
                        );
                    }
                });
            }
        }
        stages.push(next);
    }

    let (mut mask, best) = stages[n]
        .iter()
        .filter(|(m, _)| m.count_ones() as usize == target)
        .fold(None::<(u64, DpEntry)>, |acc, (&m, e)| match acc {
            Some((_, b)) if b.value >= e.value => acc,
            _ => Some((m, *e)),
        })
        .ok_or_else(|| Error::Config("no feasible conventional schedule".into()))?;
    let mut sets = vec![Vec::new(); n];
    for r in (0..n).rev() {
        let e = stages[r + 1][&mask];
        sets[r] = mask_members(e.chosen);
        mask = e.prev;
    }
    Ok((
        conventional_assignment(sets, pattern),
        best.value / n as f64,
    ))
}

/// Greedy stand-in for the exact optimizer: fill RBs in order, each time
/// adding the user with the largest marginal rate gain (lowest id on ties).
/// Per-RB quotas split `min(K, N_RB * U_mux)` as evenly as possible.
pub fn conventional_schedule_greedy(
    realization: &ChannelRealization,
    pop: &UserPopulation,
    cfg: &SystemConfig,
    pattern: &PilotPattern,
    direction: Direction,
) -> Result<(ScheduleAssignment, f64)> {
    check_conventional(pop, realization, cfg)?;
    let k = pop.num_users();
    let n = cfg.num_rbs;
    let target = k.min(n * cfg.max_mux);
    let grams = rb_grams(realization, pop, cfg, pattern)?;
    let mut used = vec![false; k];
    let mut sets = Vec::with_capacity(n);
    let mut total = 0.0;
    for (r, gram) in grams.iter().enumerate() {
        let quota = target / n + usize::from(r < target % n);
        let mut set: Vec<usize> = Vec::with_capacity(quota);
        let mut current = 0.0;
        for _ in 0..quota {
            let mut best: Option<(usize, f64)> = None;
            for cand in (0..k).filter(|c| !used[*c]) {
                set.push(cand);
                let rate = gram.subset_rate(&set, cfg, direction);
                set.pop();
                if best.is_none_or(|(_, b)| rate > b) {
                    best = Some((cand, rate));
                }
            }
            let (c, rate) = best.expect("quota never exceeds free users");
            used[c] = true;
            set.push(c);
            current = rate;
        }
        set.sort_unstable();
        total += current;
        sets.push(set);
    }
    Ok((conventional_assignment(sets, pattern), total / n as f64))
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Owning group of every RB when groups are visited in `order`.
///
/// The `i`-th visited group owns the RBs in
/// `(ceil(N_RB * C_{i-1} / K), ceil(N_RB * C_i / K)]` (1-based), where `C_i` is
/// the cumulative size of the first `i` visited groups.
pub fn rb_ownership(group_sizes: &[usize], order: &[usize], num_rbs: usize) -> Result<Vec<usize>> {
    let k: usize = group_sizes.iter().sum();
    if k == 0 {
        return Err(Error::Config("population has no users".into()));
    }
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..group_sizes.len()).collect::<Vec<_>>() {
        return Err(Error::Config("group order is not a permutation".into()));
    }
    let mut owner = Vec::with_capacity(num_rbs);
    let mut cum = 0;
    for &g in order {
        let lo = ceil_div(num_rbs * cum, k);
        cum += group_sizes[g];
        let hi = ceil_div(num_rbs * cum, k);
        owner.extend(std::iter::repeat_n(g, hi - lo));
    }
    debug_assert_eq!(owner.len(), num_rbs);
    Ok(owner)
}

/// Grouping-based pattern adaptation and scheduling with fixed RB
/// pre-assignment in group order.
pub fn grouping_schedule(
    pop: &UserPopulation,
    cfg: &SystemConfig,
    registry: &PatternRegistry,
    profiles: &[ChannelProfile],
    picker: PickerPolicy,
    seed: u64,
) -> Result<ScheduleAssignment> {
    let order: Vec<usize> = (0..pop.num_groups()).collect();
    grouping_schedule_with_order(pop, cfg, registry, profiles, picker, seed, &order)
}

/// As [`grouping_schedule`], visiting groups in `order` when laying out RBs.
pub fn grouping_schedule_with_order(
    pop: &UserPopulation,
    cfg: &SystemConfig,
    registry: &PatternRegistry,
    profiles: &[ChannelProfile],
    picker: PickerPolicy,
    seed: u64,
    order: &[usize],
) -> Result<ScheduleAssignment> {
    cfg.validate()?;
    if profiles.len() < pop.num_groups() {
        return Err(Error::Config("fewer profiles than groups".into()));
    }
    let owner = rb_ownership(&pop.group_sizes(), order, cfg.num_rbs)?;
    let num = &cfg.numerology;

    // per-group dealing sequence and cursor
    let mut decks: Vec<Vec<UserId>> = pop.groups().to_vec();
    if picker == PickerPolicy::Random {
        for (g, deck) in decks.iter_mut().enumerate() {
            let mut rng = seed::rng(seed, &[g as u64]);
            deck.shuffle(&mut rng);
        }
    }
    let mut cursor = vec![0usize; decks.len()];

    let mut rbs = Vec::with_capacity(cfg.num_rbs);
    for (r, &g) in owner.iter().enumerate() {
        let deck = &decks[g];
        if deck.is_empty() {
            return Err(Error::Config(format!(
                "group {g} owns RB {r} but has no users"
            )));
        }
        let take = cfg.max_mux.min(deck.len());
        let mut users: Vec<UserId> = (0..take)
            .map(|i| deck[(cursor[g] + i) % deck.len()])
            .collect();
        cursor[g] = (cursor[g] + take) % deck.len();
        users.sort();
        let pattern = select_pattern_for_group(registry, &profiles[g], num)?.clone();
        rbs.push(RbAssignment {
            group: Some(g),
            users,
            pattern,
        });
    }
    let assignment = ScheduleAssignment { rbs };
    assignment.check_mux(cfg)?;
    Ok(assignment)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Grouping schedule whose group-to-RB layout is chosen among all group
/// orders to maximize the mean rate on `realization` (first best order wins).
#[allow(clippy::too_many_arguments)]
pub fn grouping_schedule_optimized(
    realization: &ChannelRealization,
    pop: &UserPopulation,
    cfg: &SystemConfig,
    registry: &PatternRegistry,
    profiles: &[ChannelProfile],
    picker: PickerPolicy,
    seed: u64,
    direction: Direction,
) -> Result<ScheduleAssignment> {
    if pop.num_groups() > 8 {
        return Err(Error::Config(
            "group-order optimization supports at most 8 groups".into(),
        ));
    }
    let mut best: Option<(f64, ScheduleAssignment)> = None;
    for order in permutations(pop.num_groups()) {
        let a = grouping_schedule_with_order(pop, cfg, registry, profiles, picker, seed, &order)?;
        let rate = evaluate_schedule(realization, &a, pop, cfg, direction)?;
        if best.as_ref().is_none_or(|(b, _)| rate > *b) {
            best = Some((rate, a));
        }
    }
    Ok(best.expect("at least one order").1)
}

/// Mean over RBs of the per-RB spectral efficiency.
pub fn evaluate_schedule(
    realization: &ChannelRealization,
    assignment: &ScheduleAssignment,
    pop: &UserPopulation,
    cfg: &SystemConfig,
    direction: Direction,
) -> Result<f64> {
    assignment.check_mux(cfg)?;
    let mut total = 0.0;
    for (r, a) in assignment.rbs.iter().enumerate() {
        total +=
            rb_spectral_efficiency(realization, r, &a.users, &a.pattern, pop, cfg, direction)?.rate;
    }
    Ok(total / assignment.rbs.len() as f64)
}

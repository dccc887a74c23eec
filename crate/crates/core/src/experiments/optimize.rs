//! Exhaustive search for the throughput-maximizing initial rates.
//!
//! Two-user SISO links are scored with the exact analytic model. Other
//! two-user links are scored on a [`RateBank`]: the channel draws of a fixed
//! set of packets are turned once into every accumulation the protocol can
//! produce, and each candidate pair replays the decoding rule on them, so all
//! candidates see the same fading. Larger systems re-run the simulator with
//! the same seed for each candidate.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::analytic::{FailTable, TwoUserModel};
use crate::error::{Error, Result};
use crate::fading::SeedTree;
use crate::montecarlo::{estimate, Target, CHUNK};
use crate::protocol::{AllocationPolicy, ProtocolConfig, ReceiverState};

/// Winner of a rate search.
#[derive(Debug, Clone, PartialEq)]
pub struct RateChoice {
    pub rates: Vec<f64>,
    pub throughput: f64,
    /// Whether `throughput` is exact rather than a Monte Carlo estimate.
    pub analytic: bool,
}

/// All `users`-tuples of `values`, first user varying slowest.
pub fn product_grid(values: &[f64], users: usize) -> Vec<Vec<f64>> {
    let mut grid = vec![Vec::new()];
    for _ in 0..users {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    grid
}

/// Best rate vector of `grid` at the power of `config`. Ties go to the
/// smaller rate sum, then to the earlier grid entry.
pub fn optimize_rates(
    config: &ProtocolConfig,
    policy: AllocationPolicy,
    grid: &[Vec<f64>],
    trials: u64,
    seed: u64,
) -> Result<RateChoice> {
    if grid.is_empty() {
        return Err(Error::config("the rate grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|r| r.len() != config.users()) {
        return Err(Error::config(format!(
            "grid entry {bad:?} does not have one rate per user ({} users)",
            config.users()
        )));
    }
    config.validate()?;
    let (scores, analytic) = if config.users() == 2 && config.profile.is_siso() && policy_fits_two(policy) {
        (analytic_scores(config, policy, grid)?, true)
    } else if config.users() == 2 && policy_fits_two(policy) {
        let bank = RateBank::new(config, trials, seed)?;
        (grid.iter().map(|r| bank.throughput(policy, r)).collect(), false)
    } else {
        let scores = grid
            .iter()
            .map(|r| {
                let c = ProtocolConfig {
                    rates: r.clone(),
                    ..config.clone()
                };
                Ok(estimate(&c, policy, trials, seed)?.get(&Target::Throughput).map_or(0.0, |e| e.point))
            })
            .collect::<Result<Vec<f64>>>()?;
        (scores, false)
    };
    let mut best = 0;
    for i in 1..grid.len() {
        let (s, b) = (scores[i], scores[best]);
        let sum = |j: usize| grid[j].iter().sum::<f64>();
        if s > b || (s == b && sum(i) < sum(best)) {
            best = i;
        }
    }
    Ok(RateChoice {
        rates: grid[best].clone(),
        throughput: scores[best],
        analytic,
    })
}

fn policy_fits_two(policy: AllocationPolicy) -> bool {
    matches!(policy, AllocationPolicy::NonCoordinated | AllocationPolicy::FullCoordinationK2)
}

/// Exact throughput of every grid pair. Failure tables depend on one user's
/// rate only, so they are computed once per distinct rate.
fn analytic_scores(config: &ProtocolConfig, policy: AllocationPolicy, grid: &[Vec<f64>]) -> Result<Vec<f64>> {
    let base = TwoUserModel::from_config(config)?;
    let mut tables: HashMap<(usize, u64), FailTable> = HashMap::new();
    for r in grid {
        for u in 0..2 {
            if let std::collections::hash_map::Entry::Vacant(slot) = tables.entry((u, r[u].to_bits())) {
                let mut m = base.clone();
                m.rates = (r[0], r[1]);
                slot.insert(FailTable::new(&m, u)?);
            }
        }
    }
    grid.iter()
        .map(|r| {
            let mut m = base.clone();
            m.rates = (r[0], r[1]);
            let fa = &tables[&(0, r[0].to_bits())];
            let fb = &tables[&(1, r[1].to_bits())];
            if policy.is_coordinated() {
                let ev = m.events_from_tables(fa, fb)?;
                Ok((0..2).map(|u| ev.gamma * r[u] * (1.0 - ev.packet_outage(u))).sum())
            } else {
                Ok(m.noncoordinated_from_table(0, fa).throughput() + m.noncoordinated_from_table(1, fb).throughput())
            }
        })
        .collect()
}

/// Accumulated information of two users on a fixed set of packets, for every
/// way the protocol can combine the draws.
///
/// Entry `(trial, user, s, n)` is what the user has after `s` slots when the
/// partner decoded in round `n` and its band was donated from slot `n + 1`
/// on; `n = 0` means no donation. Draws come from the same keyed streams as
/// the simulator, so replaying the decoding rule reproduces its outcomes.
#[derive(Debug, Clone)]
pub struct RateBank {
    max_rounds: u32,
    trials: usize,
    /// Per trial and user, `sum_{s<=M} s` values.
    values: Vec<f64>,
}

impl RateBank {
    pub fn new(config: &ProtocolConfig, trials: u64, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.users() != 2 {
            return Err(Error::contract("the rate bank covers two users"));
        }
        if trials == 0 {
            return Err(Error::config("at least one trial is required"));
        }
        let seeds = SeedTree::new(seed);
        let m = config.max_rounds;
        let chunks = trials.div_ceil(CHUNK);
        let parts: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(trials);
                let mut out = Vec::new();
                for trial in lo..hi {
                    bank_trial(config, &seeds, trial, &mut out)?;
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            max_rounds: m,
            trials: trials as usize,
            values: parts.concat(),
        })
    }

    fn per_user(&self) -> usize {
        let m = self.max_rounds as usize;
        m * (m + 1) / 2
    }

    fn value(&self, trial: usize, user: usize, s: u32, n: u32) -> f64 {
        let s = s as usize;
        self.values[(trial * 2 + user) * self.per_user() + (s - 1) * s / 2 + n as usize]
    }

    /// Decode round of each user in one trial.
    pub fn outcome(&self, policy: AllocationPolicy, rates: &[f64], trial: usize) -> [Option<u32>; 2] {
        let mut dec = [None; 2];
        for s in 1..=self.max_rounds {
            let prev = dec;
            for u in 0..2 {
                if dec[u].is_some() {
                    continue;
                }
                let n = match prev[1 - u] {
                    Some(r) if policy.is_coordinated() => r,
                    _ => 0,
                };
                if self.value(trial, u, s, n) >= rates[u] {
                    dec[u] = Some(s);
                }
            }
        }
        dec
    }

    /// Throughput estimate with the same accounting as
    /// [`estimate`](crate::montecarlo::estimate).
    pub fn throughput(&self, policy: AllocationPolicy, rates: &[f64]) -> f64 {
        let m = self.max_rounds;
        let mut decoded = [0u64; 2];
        let mut rounds = [0u64; 2];
        let mut slots = 0u64;
        for t in 0..self.trials {
            let d = self.outcome(policy, rates, t);
            for u in 0..2 {
                decoded[u] += u64::from(d[u].is_some());
                rounds[u] += u64::from(d[u].unwrap_or(m));
            }
            slots += u64::from(d.iter().map(|x| x.unwrap_or(m)).max().unwrap_or(m));
        }
        (0..2)
            .map(|u| {
                let denom = if policy.is_coordinated() { slots } else { rounds[u] };
                rates[u] * decoded[u] as f64 / denom as f64
            })
            .sum()
    }
}

fn bank_trial(config: &ProtocolConfig, seeds: &SeedTree, trial: u64, out: &mut Vec<f64>) -> Result<()> {
    let m = config.max_rounds;
    let draws = (1..=m)
        .map(|slot| {
            (0..2)
                .map(|band| {
                    let mut rng = seeds.substream(trial, slot, band as u32);
                    config.profile.sample(band, slot, &mut rng)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let start = out.len();
    let per_user = (m * (m + 1) / 2) as usize;
    out.resize(start + 2 * per_user, 0.0);
    for user in 0..2 {
        for n in 0..m {
            let mut rx = ReceiverState::new(&config.profile, config.scheme);
            for s in 1..=m {
                // Band order within a slot, as in the simulator.
                for (band, d) in draws[s as usize - 1].iter().enumerate() {
                    if band == user || (n > 0 && s > n) {
                        rx.receive(d, config.power)?;
                    }
                }
                if n < s {
                    let su = s as usize;
                    out[start + user * per_user + (su - 1) * su / 2 + n as usize] = rx.accumulated_nats(config.power);
                }
            }
        }
    }
    Ok(())
}

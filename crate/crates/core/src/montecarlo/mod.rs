//! Monte Carlo estimation over independent packets.
//!
//! Packet `i` of a run uses the substreams of trial `i` of the master seed,
//! trials are grouped into fixed chunks and every statistic is accumulated as
//! an integer, so results do not depend on the number of worker threads.
//!
//! Throughput conventions. Under a coordinated policy all users share one
//! packet epoch and user `u` delivers `R_u * decoded_u / slots` nats per
//! slot. Without coordination each user runs its own renewal process on its
//! own band, so the denominator is the user's own round count.

mod sweep;
mod tally;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fading::SeedTree;
use crate::protocol::{AllocationPolicy, EventLabel, PacketRunner, ProtocolConfig};

pub use sweep::{energy_gain_at_outage, fit_diversity_slope, fit_slope_for, sweep, sweep_with_budget, SweepPoint, SweepResult};
pub use tally::{epoch_length, LabelCount, Moments, Tally};

/// Trials per work unit.
pub const CHUNK: u64 = 1 << 14;

const Z95: f64 = 1.959_963_984_540_054;

/// Quantity a Monte Carlo estimate refers to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    /// Probability that a packet of the user is not decoded.
    Outage(usize),
    /// Outage probability averaged over users.
    MeanOutage,
    /// Outage events of the user per slot.
    OutageRate(usize),
    /// Nats per slot summed over users.
    Throughput,
    UserThroughput(usize),
    /// Throughput of the first user over that of the second.
    Fairness,
    /// Fraction of slots showing the given state.
    EventProb(EventLabel),
    /// Fraction of packets ending in the given state.
    TerminalEvent(EventLabel),
    /// Fitted outage slope.
    Slope,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Outage(u) => write!(f, "outage[{}]", u + 1),
            Target::MeanOutage => write!(f, "outage"),
            Target::OutageRate(u) => write!(f, "outage_rate[{}]", u + 1),
            Target::Throughput => write!(f, "throughput"),
            Target::UserThroughput(u) => write!(f, "throughput[{}]", u + 1),
            Target::Fairness => write!(f, "fairness"),
            Target::EventProb(l) => write!(f, "event[{l}]"),
            Target::TerminalEvent(l) => write!(f, "terminal[{l}]"),
            Target::Slope => write!(f, "slope"),
        }
    }
}

/// Point estimate with a 95% confidence half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateWithCI {
    pub target: Target,
    pub point: f64,
    pub trials: u64,
    pub half_width_95: f64,
}

impl EstimateWithCI {
    /// Standard error implied by the half-width.
    pub fn std_error(&self) -> f64 {
        self.half_width_95 / Z95
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.point - self.half_width_95, self.point + self.half_width_95)
    }
}

/// Binomial proportion with the normal interval, or Wilson's when fewer
/// than 30 successes are expected.
pub fn bernoulli_estimate(target: Target, successes: u64, trials: u64) -> EstimateWithCI {
    let n = trials as f64;
    let p = successes as f64 / n;
    let half_width_95 = if p * n < 30.0 {
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        (center + half - p).max(p - (center - half))
    } else {
        Z95 * (p * (1.0 - p) / n).sqrt()
    };
    EstimateWithCI {
        target,
        point: p,
        trials,
        half_width_95,
    }
}

/// Estimates of one configuration, with the raw tally they came from.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    pub policy: AllocationPolicy,
    pub rates: Vec<f64>,
    pub tally: Tally,
    pub estimates: BTreeMap<Target, EstimateWithCI>,
}

impl EstimateSet {
    pub fn get(&self, target: &Target) -> Option<&EstimateWithCI> {
        self.estimates.get(target)
    }

    pub fn trials(&self) -> u64 {
        self.tally.trials
    }

    fn from_tally(tally: Tally, rates: &[f64], policy: AllocationPolicy) -> Self {
        let k = tally.users;
        let n = tally.trials;
        let m = tally.moments();
        let mut est = BTreeMap::new();
        let mut put = |e: EstimateWithCI| {
            est.insert(e.target.clone(), e);
        };

        for u in 0..k {
            put(bernoulli_estimate(Target::Outage(u), m.outages(u), n));
        }
        // Mean outage: a mean of per-packet averages, normal interval.
        let mean_outage = {
            let mut g = vec![0.0; m.dim()];
            for u in 0..k {
                g[m.decoded_index(u)] = -1.0 / k as f64;
            }
            let point = (0..k).map(|u| m.outages(u) as f64 / n as f64).sum::<f64>() / k as f64;
            delta(&m, Target::MeanOutage, point, &g)
        };
        put(mean_outage);

        let slots = m.slots_index();
        for u in 0..k {
            let point = m.outages(u) as f64 / m.total_slots() as f64;
            // (1 - d_u) / L as a ratio of means.
            let ml = m.mean(slots);
            let mut g = vec![0.0; m.dim()];
            g[m.decoded_index(u)] = -1.0 / ml;
            g[slots] = -point / ml;
            put(delta(&m, Target::OutageRate(u), point, &g));
        }

        let denom = |u: usize| {
            if policy.is_coordinated() {
                slots
            } else {
                m.rounds_index(u)
            }
        };
        let mut user_eta = vec![0.0; k];
        let mut total_grad = vec![0.0; m.dim()];
        for u in 0..k {
            let (d, l) = (m.decoded_index(u), denom(u));
            let (md, ml) = (m.mean(d), m.mean(l));
            let eta = if ml > 0.0 { rates[u] * md / ml } else { 0.0 };
            user_eta[u] = eta;
            let mut g = vec![0.0; m.dim()];
            if ml > 0.0 {
                g[d] += rates[u] / ml;
                g[l] -= eta / ml;
            }
            total_grad.iter_mut().zip(&g).for_each(|(t, x)| *t += x);
            put(delta(&m, Target::UserThroughput(u), eta, &g));
        }
        put(delta(&m, Target::Throughput, user_eta.iter().sum(), &total_grad));

        if k == 2 && user_eta[1] > 0.0 && user_eta[0] > 0.0 {
            let point = user_eta[0] / user_eta[1];
            let mut g = vec![0.0; m.dim()];
            for (u, sign) in [(0usize, 1.0), (1, -1.0)] {
                g[m.decoded_index(u)] += sign * point / m.mean(m.decoded_index(u));
                g[denom(u)] -= sign * point / m.mean(denom(u));
            }
            put(delta(&m, Target::Fairness, point, &g));
        } else if k == 2 && user_eta[1] > 0.0 {
            // A zero numerator is a legitimate (if degenerate) ratio.
            put(EstimateWithCI {
                target: Target::Fairness,
                point: 0.0,
                trials: n,
                half_width_95: 0.0,
            });
        }

        let ml = m.mean(slots);
        for (label, c) in tally.slot_labels() {
            // count / slots as a ratio of per-packet means.
            let point = c.count as f64 / m.total_slots() as f64;
            let nf = n as f64;
            let (mc, mcl) = (c.count as f64 / nf, c.slots as f64 / nf);
            let var_c = mc - mc * mc;
            let cov_cl = mcl - mc * ml;
            let var_l = m.cov(slots, slots);
            let var = (var_c - 2.0 * point * cov_cl + point * point * var_l).max(0.0) / (ml * ml * nf);
            put(EstimateWithCI {
                target: Target::EventProb(label),
                point,
                trials: n,
                half_width_95: Z95 * var.sqrt(),
            });
        }
        for (label, c) in tally.terminal_labels() {
            put(bernoulli_estimate(Target::TerminalEvent(label), c, n));
        }

        Self {
            policy,
            rates: rates.to_vec(),
            tally,
            estimates: est,
        }
    }
}

/// Delta-method interval for a smooth function of feature means with
/// gradient `grad` at the sample means.
fn delta(m: &Moments, target: Target, point: f64, grad: &[f64]) -> EstimateWithCI {
    let dim = m.dim();
    let mut var = 0.0;
    for i in 0..dim {
        if grad[i] == 0.0 {
            continue;
        }
        for j in 0..dim {
            if grad[j] != 0.0 {
                var += grad[i] * grad[j] * m.cov(i, j);
            }
        }
    }
    let var = var.max(0.0) / m.trials as f64;
    EstimateWithCI {
        target,
        point,
        trials: m.trials,
        half_width_95: Z95 * var.sqrt(),
    }
}

/// Runs packets `first..first + trials` and tallies them.
pub fn simulate(
    config: &ProtocolConfig,
    policy: AllocationPolicy,
    first: u64,
    trials: u64,
    seeds: &SeedTree,
) -> Result<Tally> {
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = first + c * CHUNK;
            let hi = (lo + CHUNK).min(first + trials);
            let mut sim = PacketRunner::new(config, policy)?;
            let mut t = Tally::new(config.users(), config.max_rounds);
            for trial in lo..hi {
                t.record(sim.run(seeds, trial)?);
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let mut total = Tally::new(config.users(), config.max_rounds);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// Monte Carlo estimates of every target for `n_trials` packets.
pub fn estimate(
    config: &ProtocolConfig,
    policy: AllocationPolicy,
    n_trials: u64,
    master_seed: u64,
) -> Result<EstimateSet> {
    if n_trials == 0 {
        return Err(Error::config("at least one trial is required"));
    }
    config.validate()?;
    let seeds = SeedTree::new(master_seed);
    let tally = simulate(config, policy, 0, n_trials, &seeds)?;
    Ok(EstimateSet::from_tally(tally, &config.rates, policy))
}

/// Runs the same trials under non-coordination and under `policy` and counts
/// (trial, user) pairs that decode without coordination but not with it.
pub fn paired_dominance(
    config: &ProtocolConfig,
    policy: AllocationPolicy,
    n_trials: u64,
    master_seed: u64,
) -> Result<u64> {
    let seeds = SeedTree::new(master_seed);
    let chunks = n_trials.div_ceil(CHUNK);
    let parts: Vec<u64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n_trials);
            let mut plain = PacketRunner::new(config, AllocationPolicy::NonCoordinated)?;
            let mut coord = PacketRunner::new(config, policy)?;
            let mut violations = 0;
            for trial in lo..hi {
                let a = plain.run(&seeds, trial)?.decode_round.clone();
                let b = coord.run(&seeds, trial)?;
                violations += a
                    .iter()
                    .zip(&b.decode_round)
                    .filter(|(x, y)| x.is_some() && y.is_none())
                    .count() as u64;
            }
            Ok(violations)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

//! Integer tallies of simulated packets.
//!
//! A packet is summarized by the round in which each user decoded (or its
//! outage): rounds used, epoch length and every slot state follow from that
//! vector. The tally is therefore a histogram over decode-round vectors, and
//! moments and event counts are derived from it exactly. Merging partial
//! tallies in any grouping gives the same totals.

use std::collections::HashMap;

use crate::protocol::{EventLabel, PacketOutcome};

/// Dense histograms are used up to this many cells.
const DENSE_LIMIT: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Histogram {
    /// Cell `sum_u r_u (M+1)^u`, `r_u = 0` for outage.
    Dense(Vec<u64>),
    Sparse(HashMap<Vec<u8>, u64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub users: usize,
    pub max_rounds: u32,
    pub trials: u64,
    hist: Histogram,
}

/// Packets passing through a slot state, and the summed length of those
/// packets in slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelCount {
    pub count: u64,
    pub slots: u64,
}

/// Sums over packets of the feature vector
/// `[decoded_0..decoded_{K-1}, rounds_0..rounds_{K-1}, slots]` and of all
/// pairwise products.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Moments {
    pub users: usize,
    pub trials: u64,
    pub sum: Vec<u64>,
    /// Row-major `dim x dim`.
    pub cross: Vec<u64>,
}

impl Tally {
    pub fn new(users: usize, max_rounds: u32) -> Self {
        let cells = (max_rounds as usize + 1).checked_pow(users as u32);
        let hist = match cells {
            Some(c) if c <= DENSE_LIMIT => Histogram::Dense(vec![0; c]),
            _ => Histogram::Sparse(HashMap::new()),
        };
        Self {
            users,
            max_rounds,
            trials: 0,
            hist,
        }
    }

    pub fn record(&mut self, outcome: &PacketOutcome) {
        debug_assert_eq!(outcome.slots_consumed, epoch_length(&outcome.decode_round, self.max_rounds));
        self.trials += 1;
        let base = self.max_rounds as usize + 1;
        match &mut self.hist {
            Histogram::Dense(cells) => {
                let mut idx = 0;
                for d in outcome.decode_round.iter().rev() {
                    idx = idx * base + d.map_or(0, |r| r as usize);
                }
                cells[idx] += 1;
            }
            Histogram::Sparse(map) => {
                let key: Vec<u8> = outcome.decode_round.iter().map(|d| d.map_or(0, |r| r as u8)).collect();
                *map.entry(key).or_insert(0) += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        assert_eq!(
            (self.users, self.max_rounds),
            (other.users, other.max_rounds),
            "tallies of different shapes"
        );
        self.trials += other.trials;
        match (&mut self.hist, &other.hist) {
            (Histogram::Dense(a), Histogram::Dense(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Histogram::Sparse(a), Histogram::Sparse(b)) => {
                for (k, v) in b {
                    *a.entry(k.clone()).or_insert(0) += v;
                }
            }
            _ => unreachable!("same shape implies same storage"),
        }
    }

    /// Observed decode-round vectors with their counts, in a fixed order.
    pub fn outcomes(&self) -> Vec<(Vec<Option<u32>>, u64)> {
        let k = self.users;
        let base = self.max_rounds as usize + 1;
        let mut v: Vec<(Vec<Option<u32>>, u64)> = match &self.hist {
            Histogram::Dense(cells) => cells
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(mut idx, &c)| {
                    let rounds = (0..k)
                        .map(|_| {
                            let r = idx % base;
                            idx /= base;
                            (r > 0).then_some(r as u32)
                        })
                        .collect();
                    (rounds, c)
                })
                .collect(),
            Histogram::Sparse(map) => map
                .iter()
                .map(|(key, &c)| {
                    let rounds = key.iter().map(|&r| (r > 0).then_some(u32::from(r))).collect();
                    (rounds, c)
                })
                .collect(),
        };
        v.sort();
        v
    }

    pub fn outages(&self, user: usize) -> u64 {
        self.outcomes()
            .iter()
            .filter(|(d, _)| d[user].is_none())
            .map(|(_, c)| c)
            .sum()
    }

    pub fn moments(&self) -> Moments {
        let k = self.users;
        let dim = 2 * k + 1;
        let mut sum = vec![0u64; dim];
        let mut cross = vec![0u64; dim * dim];
        let mut f = vec![0u64; dim];
        for (d, c) in self.outcomes() {
            for u in 0..k {
                f[u] = u64::from(d[u].is_some());
                f[k + u] = u64::from(d[u].unwrap_or(self.max_rounds));
            }
            f[2 * k] = u64::from(epoch_length(&d, self.max_rounds));
            for i in 0..dim {
                sum[i] += c * f[i];
                for j in 0..dim {
                    cross[i * dim + j] += c * f[i] * f[j];
                }
            }
        }
        Moments {
            users: k,
            trials: self.trials,
            sum,
            cross,
        }
    }

    /// Every slot state with the packets that pass through it.
    pub fn slot_labels(&self) -> Vec<(EventLabel, LabelCount)> {
        let mut acc: Vec<(EventLabel, LabelCount)> = Vec::new();
        for (d, c) in self.outcomes() {
            let len = epoch_length(&d, self.max_rounds);
            let outcome = outcome_of(&d, len);
            for s in 1..=len {
                let label = EventLabel::at_slot(&outcome, s);
                match acc.iter_mut().find(|(l, _)| *l == label) {
                    Some((_, n)) => {
                        n.count += c;
                        n.slots += c * u64::from(len);
                    }
                    None => acc.push((
                        label,
                        LabelCount {
                            count: c,
                            slots: c * u64::from(len),
                        },
                    )),
                }
            }
        }
        acc.sort_by(|a, b| a.0.cmp(&b.0));
        acc
    }

    /// Terminal states with the packets that end in them.
    pub fn terminal_labels(&self) -> Vec<(EventLabel, u64)> {
        let mut v: Vec<(EventLabel, u64)> = self
            .outcomes()
            .into_iter()
            .map(|(d, c)| {
                let len = epoch_length(&d, self.max_rounds);
                (EventLabel::terminal(&outcome_of(&d, len)), c)
            })
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }
}

/// Slots until every user has decoded or used all rounds.
pub fn epoch_length(decode_round: &[Option<u32>], max_rounds: u32) -> u32 {
    decode_round
        .iter()
        .map(|d| d.unwrap_or(max_rounds))
        .max()
        .unwrap_or(0)
}

fn outcome_of(decode_round: &[Option<u32>], len: u32) -> PacketOutcome {
    PacketOutcome {
        decode_round: decode_round.to_vec(),
        nats_delivered: vec![0.0; decode_round.len()],
        rounds_used: decode_round.iter().map(|d| d.unwrap_or(len)).collect(),
        slots_consumed: len,
    }
}

impl Moments {
    pub fn dim(&self) -> usize {
        2 * self.users + 1
    }

    pub fn decoded_index(&self, user: usize) -> usize {
        user
    }

    pub fn rounds_index(&self, user: usize) -> usize {
        self.users + user
    }

    pub fn slots_index(&self) -> usize {
        2 * self.users
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] as f64 / self.trials as f64
    }

    /// Sample covariance of features `i` and `j` (divisor `n`).
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        let n = self.trials as f64;
        self.cross[i * self.dim() + j] as f64 / n - self.mean(i) * self.mean(j)
    }

    pub fn total_slots(&self) -> u64 {
        self.sum[self.slots_index()]
    }

    pub fn outages(&self, user: usize) -> u64 {
        self.trials - self.sum[user]
    }
}

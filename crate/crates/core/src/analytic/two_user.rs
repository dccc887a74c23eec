//! Exact event probabilities for two users under full coordination, any
//! number of rounds, either scheme.
//!
//! User A owns band 1 and user B band 2. While both are undecoded each
//! receives only its own band, so the two accumulations are independent. Once
//! one user decodes in round `n`, the other receives both bands from slot
//! `n + 1` on. Every joint probability therefore factors into products of
//! `F_u(own, donated) = Pr(accumulated information of u < R_u)` terms.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::protocol::{AllocationPolicy, EventLabel, ProtocolConfig, UserEvent};
use crate::rates::Scheme;

use super::{cdf_inr_sum, cdf_rtd_sum, EventProbabilities};

/// Parameters of the SISO two-user model.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoUserModel {
    pub lambdas: (f64, f64),
    pub rates: (f64, f64),
    pub power: f64,
    pub max_rounds: u32,
    pub scheme: Scheme,
}

impl TwoUserModel {
    pub fn from_config(config: &ProtocolConfig) -> Result<Self> {
        config.validate()?;
        if config.users() != 2 || !config.profile.is_siso() {
            return Err(Error::contract("the two-user model needs K = 2 and SISO links"));
        }
        let l = config.profile.lambdas();
        Ok(Self {
            lambdas: (l[0], l[1]),
            rates: (config.rates[0], config.rates[1]),
            power: config.power,
            max_rounds: config.max_rounds,
            scheme: config.scheme,
        })
    }

    /// Outage-type probability `Pr(info of user < R)` after `own` copies on
    /// the user's band and `donated` copies on the other band.
    pub fn fail(&self, user: usize, own: u32, donated: u32) -> Result<f64> {
        let rate = if user == 0 { self.rates.0 } else { self.rates.1 };
        if own + donated == 0 {
            return Ok(if rate > 0.0 { 1.0 } else { 0.0 });
        }
        let (n, m) = if user == 0 { (own, donated) } else { (donated, own) };
        match self.scheme {
            Scheme::Rtd => cdf_rtd_sum(n, m, self.lambdas, self.power, rate),
            Scheme::Inr => cdf_inr_sum(n, m, self.lambdas, self.power, rate),
        }
    }

    fn tables(&self) -> Result<[FailTable; 2]> {
        Ok([FailTable::new(self, 0)?, FailTable::new(self, 1)?])
    }

    /// Per-packet and per-slot event probabilities under full coordination.
    pub fn coordinated_events(&self) -> Result<EventProbabilities> {
        let [fa, fb] = self.tables()?;
        self.events_from_tables(&fa, &fb)
    }

    /// Same as [`coordinated_events`](Self::coordinated_events) with the
    /// failure tables supplied, so tables can be shared across rate pairs.
    pub(crate) fn events_from_tables(&self, fa: &FailTable, fb: &FailTable) -> Result<EventProbabilities> {
        let big_m = self.max_rounds;
        let t = [fa, fb];
        let mut packet = BTreeMap::new();

        let label = |a: UserEvent, b: UserEvent| EventLabel(vec![a, b]);
        for n in 1..=big_m {
            packet.insert(
                label(UserEvent::Decoded(n), UserEvent::Decoded(n)),
                fa.decode(n) * fb.decode(n),
            );
            for (first, second) in [(0usize, 1usize), (1, 0)] {
                let (f1, f2) = (t[first], t[second]);
                for m in n + 1..=big_m {
                    let p = f1.decode(n) * (f2.get(m - 1, m - 1 - n) - f2.get(m, m - n));
                    packet.insert(ordered(first, UserEvent::Decoded(n), UserEvent::Decoded(m)), p);
                }
                let p = f1.decode(n) * f2.get(big_m, big_m - n);
                packet.insert(ordered(first, UserEvent::Decoded(n), UserEvent::Pending(big_m)), p);
            }
        }
        packet.insert(
            label(UserEvent::Pending(big_m), UserEvent::Pending(big_m)),
            fa.get(big_m, 0) * fb.get(big_m, 0),
        );

        // Non-terminal slot states.
        let mut slot = BTreeMap::new();
        for s in 1..big_m {
            slot.insert(
                label(UserEvent::Pending(s), UserEvent::Pending(s)),
                fa.get(s, 0) * fb.get(s, 0),
            );
            for (first, second) in [(0usize, 1usize), (1, 0)] {
                let (f1, f2) = (t[first], t[second]);
                for n in 1..=s {
                    let p = f1.decode(n) * f2.get(s, s - n);
                    slot.insert(ordered(first, UserEvent::Decoded(n), UserEvent::Pending(s)), p);
                }
            }
        }
        for (l, p) in &packet {
            slot.insert(l.clone(), *p);
        }
        EventProbabilities::new(2, big_m, packet, slot, fa.get(1, 0), fb.get(1, 0))
    }

    /// Per-user outage and expected rounds per packet when each user keeps
    /// its own band.
    pub fn noncoordinated_user(&self, user: usize) -> Result<NonCoordinatedUser> {
        let table = FailTable::new(self, user)?;
        Ok(self.noncoordinated_from_table(user, &table))
    }

    pub(crate) fn noncoordinated_from_table(&self, user: usize, table: &FailTable) -> NonCoordinatedUser {
        let rate = if user == 0 { self.rates.0 } else { self.rates.1 };
        NonCoordinatedUser::from_fail_curve(rate, (0..=self.max_rounds).map(|r| table.get(r, 0)).collect())
    }
}

/// Places the event of user `first` before that of the other user.
fn ordered(first: usize, e_first: UserEvent, e_other: UserEvent) -> EventLabel {
    if first == 0 {
        EventLabel(vec![e_first, e_other])
    } else {
        EventLabel(vec![e_other, e_first])
    }
}

/// `F(own, donated)` for `donated < max(own, 1)`, stored densely.
pub(crate) struct FailTable {
    rows: Vec<Vec<f64>>,
}

impl FailTable {
    pub(crate) fn new(model: &TwoUserModel, user: usize) -> Result<Self> {
        let rows = (0..=model.max_rounds)
            .map(|own| {
                (0..own.max(1))
                    .map(|don| model.fail(user, own, don))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    fn get(&self, own: u32, donated: u32) -> f64 {
        self.rows[own as usize][donated as usize]
    }

    /// Probability of decoding in round `r` on the own band alone.
    fn decode(&self, r: u32) -> f64 {
        self.get(r - 1, 0) - self.get(r, 0)
    }
}

/// Renewal quantities of a user running plain HARQ on its own band.
#[derive(Debug, Clone, PartialEq)]
pub struct NonCoordinatedUser {
    pub rate: f64,
    /// `fail[r]` = probability of being undecoded after `r` rounds.
    pub fail: Vec<f64>,
}

impl NonCoordinatedUser {
    pub fn from_fail_curve(rate: f64, fail: Vec<f64>) -> Self {
        Self { rate, fail }
    }

    pub fn max_rounds(&self) -> u32 {
        (self.fail.len() - 1) as u32
    }

    pub fn outage(&self) -> f64 {
        *self.fail.last().expect("nonempty")
    }

    /// Expected rounds per packet: `sum_{r < M} Pr(undecoded after r)`.
    pub fn mean_rounds(&self) -> f64 {
        self.fail[..self.fail.len() - 1].iter().sum()
    }

    /// Long-run nats per slot on the user's band.
    pub fn throughput(&self) -> f64 {
        self.rate * (1.0 - self.outage()) / self.mean_rounds()
    }
}

/// Analytic throughput and outage for any SISO configuration the closed
/// forms cover: two users under full coordination, or any number of users
/// without coordination.
pub fn analytic_summary(config: &ProtocolConfig, policy: AllocationPolicy) -> Result<Option<AnalyticSummary>> {
    if !config.profile.is_siso() {
        return Ok(None);
    }
    match policy {
        AllocationPolicy::FullCoordinationK2 if config.users() == 2 => {
            let model = TwoUserModel::from_config(config)?;
            let events = model.coordinated_events()?;
            let outage: Vec<f64> = (0..2).map(|u| events.packet_outage(u)).collect();
            let user_throughput: Vec<f64> = (0..2)
                .map(|u| events.gamma * config.rates[u] * (1.0 - outage[u]))
                .collect();
            Ok(Some(AnalyticSummary {
                outage,
                user_throughput,
                events: Some(events),
            }))
        }
        AllocationPolicy::NonCoordinated => {
            let mut outage = Vec::new();
            let mut user_throughput = Vec::new();
            for u in 0..config.users() {
                let lambda = config.profile.lambda(u)?;
                let rate = config.rates[u];
                let fail = (0..=config.max_rounds)
                    .map(|r| {
                        if r == 0 {
                            Ok(if rate > 0.0 { 1.0 } else { 0.0 })
                        } else {
                            match config.scheme {
                                Scheme::Rtd => cdf_rtd_sum(r, 0, (lambda, lambda), config.power, rate),
                                Scheme::Inr => cdf_inr_sum(r, 0, (lambda, lambda), config.power, rate),
                            }
                        }
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let user = NonCoordinatedUser::from_fail_curve(rate, fail);
                outage.push(user.outage());
                user_throughput.push(user.throughput());
            }
            Ok(Some(AnalyticSummary {
                outage,
                user_throughput,
                events: None,
            }))
        }
        _ => Ok(None),
    }
}

/// Analytic counterparts of the Monte Carlo targets.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSummary {
    /// Per-packet outage probability of each user.
    pub outage: Vec<f64>,
    /// Long-run nats per slot delivered to each user.
    pub user_throughput: Vec<f64>,
    /// Event probabilities, when the policy couples the users.
    pub events: Option<EventProbabilities>,
}

impl AnalyticSummary {
    pub fn throughput(&self) -> f64 {
        self.user_throughput.iter().sum()
    }

    pub fn fairness(&self) -> Option<f64> {
        match self.user_throughput.as_slice() {
            [a, b] if *b > 0.0 => Some(a / b),
            _ => None,
        }
    }
}

//! Closed-form and semi-numerical outage, event and throughput formulas.
//!
//! Probabilities come in two normalizations. Per-packet probabilities sum to
//! one over the terminal events of a packet. Per-slot rates divide by the
//! mean packet length, so they are the fraction of slots at which an event
//! is observed; `gamma` is the reciprocal mean packet length.

mod inr;
mod rtd;
mod two_user;

use std::collections::BTreeMap;

pub use inr::{cdf_inr_sum, inr_single_cdf};
pub use rtd::{cdf_rtd_sum, erlang_cdf, hypoexponential_cdf, PartialFractionExpansion};
pub(crate) use two_user::FailTable;
pub use two_user::{analytic_summary, AnalyticSummary, NonCoordinatedUser, TwoUserModel};

use crate::error::{Error, Result};
use crate::protocol::{EventLabel, ProtocolConfig, UserEvent};

/// SNR thresholds `C = (e^R - 1) / P` below which a single copy fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPair {
    pub c_a: f64,
    pub c_b: f64,
}

impl ThresholdPair {
    pub fn from_rates(r_a: f64, r_b: f64, power: f64) -> Result<Self> {
        if !(power > 0.0) || !(r_a >= 0.0) || !(r_b >= 0.0) {
            return Err(Error::contract("rates must be nonnegative and power positive"));
        }
        Ok(Self {
            c_a: r_a.exp_m1() / power,
            c_b: r_b.exp_m1() / power,
        })
    }
}

/// First-round failure probabilities of A (band 1) and B (band 2).
pub fn alpha_beta(thresholds: ThresholdPair, lambdas: (f64, f64)) -> (f64, f64) {
    (
        -(-lambdas.0 * thresholds.c_a).exp_m1(),
        -(-lambdas.1 * thresholds.c_b).exp_m1(),
    )
}

/// Reciprocal mean packet length for two users and two rounds.
pub fn gamma_norm(alpha: f64, beta: f64) -> f64 {
    1.0 / (1.0 + alpha + beta - alpha * beta)
}

/// `Pr(g1 + g2 + g2' < C_B)` for one Exp(l1) and two Exp(l2) gains: user B
/// fails after its own two copies plus one donated copy.
pub fn phi_coordinated(thresholds: ThresholdPair, lambdas: (f64, f64)) -> f64 {
    let c = thresholds.c_b;
    if c <= 0.0 {
        return 0.0;
    }
    let (l1, l2) = lambdas;
    if 1.0 - l1.min(l2) / l1.max(l2) < 0.5 {
        return hypoexponential_cdf(1, 2, lambdas, c).expect("valid parameters");
    }
    let e1 = (-l1 * c).exp();
    let e2 = (-l2 * c).exp();
    let d = l2 - l1;
    1.0 - l2 * l2 / (d * d) * e1 + l1 * (2.0 * l2 - l1) / (d * d) * e2 + l1 * l2 * c / d * e2
}

/// Per-slot outage rate of user B, two users, two rounds, repetition.
pub fn outage_b_rtd_closed(thresholds: ThresholdPair, lambdas: (f64, f64), alpha: f64) -> f64 {
    let (_, beta) = alpha_beta(thresholds, lambdas);
    let gamma = gamma_norm(alpha, beta);
    let erlang2 = erlang_cdf(2, lambdas.1, thresholds.c_b);
    gamma * alpha * erlang2 + gamma * (1.0 - alpha) * phi_coordinated(thresholds, lambdas)
}

/// Event probabilities of a coordinated packet.
#[derive(Debug, Clone, PartialEq)]
pub struct EventProbabilities {
    pub users: usize,
    pub max_rounds: u32,
    /// Terminal events, per packet. Sums to one.
    pub packet: BTreeMap<EventLabel, f64>,
    /// Every slot state (terminal or not), as the per-packet probability
    /// that the packet passes through it.
    pub slot: BTreeMap<EventLabel, f64>,
    pub alpha: f64,
    pub beta: f64,
    /// Reciprocal mean packet length in slots.
    pub gamma: f64,
}

impl EventProbabilities {
    pub fn new(
        users: usize,
        max_rounds: u32,
        packet: BTreeMap<EventLabel, f64>,
        slot: BTreeMap<EventLabel, f64>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let mean_slots: f64 = slot.values().sum();
        if !(mean_slots >= 1.0 - 1e-9) {
            return Err(Error::Consistency(format!("mean packet length {mean_slots} below one slot")));
        }
        Ok(Self {
            users,
            max_rounds,
            packet,
            slot,
            alpha,
            beta,
            gamma: 1.0 / mean_slots,
        })
    }

    pub fn terminal_sum(&self) -> f64 {
        self.packet.values().sum()
    }

    /// Errors unless terminal probabilities sum to one within `tol`.
    pub fn check_partition(&self, tol: f64) -> Result<()> {
        let s = self.terminal_sum();
        if (s - 1.0).abs() > tol || self.packet.values().any(|p| !(-tol..=1.0 + tol).contains(p)) {
            return Err(Error::Consistency(format!(
                "terminal event probabilities sum to {s}, not 1"
            )));
        }
        Ok(())
    }

    /// Fraction of slots at which `label` is observed.
    pub fn slot_rate(&self, label: &EventLabel) -> f64 {
        self.gamma * self.slot.get(label).copied().unwrap_or(0.0)
    }

    /// Probability that a packet ends with `user` undecoded.
    pub fn packet_outage(&self, user: usize) -> f64 {
        self.packet
            .iter()
            .filter(|(l, _)| matches!(l.0[user], UserEvent::Pending(_)))
            .map(|(_, p)| p)
            .sum()
    }

    /// Outage events per slot.
    pub fn outage_rate(&self, user: usize) -> f64 {
        self.gamma * self.packet_outage(user)
    }
}

/// Nats per slot summed over both users: each decoded packet of a user
/// delivers its rate, and packets occupy `1 / gamma` slots on average.
pub fn throughput_closed(events: &EventProbabilities, r_a: f64, r_b: f64) -> Result<f64> {
    events.check_partition(1e-9)?;
    let rates = [r_a, r_b];
    let mut eta = 0.0;
    for (label, p) in &events.slot {
        if !label.is_terminal(events.max_rounds) {
            continue;
        }
        for (u, e) in label.0.iter().enumerate().take(2) {
            if matches!(e, UserEvent::Decoded(_)) {
                eta += rates[u] * p;
            }
        }
    }
    Ok(events.gamma * eta)
}

/// Per-slot rate of the terminal event "A decodes in round `n`, B in round
/// `m`" under full two-user coordination. `n > m` is the mirrored event.
pub fn event_probability_general(n: u32, m: u32, config: &ProtocolConfig) -> Result<f64> {
    if n == 0 || m == 0 || n.max(m) > config.max_rounds {
        return Err(Error::contract(format!(
            "decoding rounds must lie in 1..={}",
            config.max_rounds
        )));
    }
    let events = TwoUserModel::from_config(config)?.coordinated_events()?;
    let label = EventLabel(vec![UserEvent::Decoded(n), UserEvent::Decoded(m)]);
    Ok(events.slot_rate(&label))
}

/// Diversity order `(J + 1)(M - 1) + 1` of a user that can receive `J`
/// donated bands per round.
pub fn diversity_gain(donors: u32, max_rounds: u32) -> u32 {
    (donors + 1) * (max_rounds.max(1) - 1) + 1
}

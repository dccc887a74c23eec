//! Coordinated HARQ state machine.
//!
//! A packet epoch starts with every user on its own band. After each slot the
//! users that are still retransmitting keep their own band and, under a
//! coordinated policy, also receive the bands of users that already decoded.
//! The epoch ends once every user has decoded or used its `M` rounds; all
//! users then start a new packet together. A user that decoded early stays
//! silent for the rest of the epoch.
//!
//! Under [`AllocationPolicy::NonCoordinated`] nobody receives extra bands and
//! a decoded user's band is not part of the epoch any more: its owner starts
//! the next packet there right away. Throughput accounting for that case is
//! per-user (see the `montecarlo` module).

mod event;
mod kernel;
mod policy;
mod trace;

use std::io::Write;

use crate::error::{Error, Result};
use crate::fading::{ChannelDraw, FadingProfile, SeedTree};
use crate::rates::{AccumulationState, MimoGram, Scheme};

pub use event::{EventLabel, UserEvent};
pub use kernel::SisoKernel;
pub use policy::{policy_allocate, AllocationPolicy};
use policy::allocate_into;
pub use trace::{TraceRecord, TraceWriter};

/// Link parameters shared by all packets of a run. User `k` owns band `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub profile: FadingProfile,
    /// Initial rate `R_u` of each user, nats per channel use.
    pub rates: Vec<f64>,
    /// Maximum number of rounds `M` per packet.
    pub max_rounds: u32,
    /// Transmit power per band, linear.
    pub power: f64,
    pub scheme: Scheme,
}

impl ProtocolConfig {
    pub fn new(
        profile: FadingProfile,
        rates: Vec<f64>,
        max_rounds: u32,
        power: f64,
        scheme: Scheme,
    ) -> Result<Self> {
        let config = Self {
            profile,
            rates,
            max_rounds,
            power,
            scheme,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn users(&self) -> usize {
        self.rates.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(Error::config("at least one user is required"));
        }
        if self.rates.len() != self.profile.bands() {
            return Err(Error::config(format!(
                "{} users but {} frequency bands; every user owns exactly one band",
                self.rates.len(),
                self.profile.bands()
            )));
        }
        if self.rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::config("initial rates must be finite and non-negative"));
        }
        if self.max_rounds == 0 || self.max_rounds > 127 {
            return Err(Error::config("maximum number of rounds must be in 1..=127"));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::config("transmit power must be positive and finite"));
        }
        Ok(())
    }

    /// Same link at a different transmit power given in dB.
    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        Self {
            power: 10f64.powf(snr_db / 10.0),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserStatus {
    Active,
    Decoded,
    Outage,
}

/// What one receiver has collected for the current packet.
#[derive(Debug, Clone, PartialEq)]
pub enum ReceiverState {
    Siso(AccumulationState),
    Mimo(MimoReceiver),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MimoReceiver {
    scheme: Scheme,
    gram: MimoGram,
    mi_sum: f64,
    copies: usize,
}

impl ReceiverState {
    pub(crate) fn new(profile: &FadingProfile, scheme: Scheme) -> Self {
        if profile.is_siso() {
            ReceiverState::Siso(AccumulationState::new(scheme))
        } else {
            ReceiverState::Mimo(MimoReceiver {
                scheme,
                gram: MimoGram::new(profile.tx_antennas()),
                mi_sum: 0.0,
                copies: 0,
            })
        }
    }

    fn clear(&mut self) {
        match self {
            ReceiverState::Siso(s) => s.clear(),
            ReceiverState::Mimo(m) => {
                m.gram.clear();
                m.mi_sum = 0.0;
                m.copies = 0;
            }
        }
    }

    pub(crate) fn receive(&mut self, draw: &ChannelDraw, power: f64) -> Result<()> {
        match (self, draw) {
            (ReceiverState::Siso(s), ChannelDraw::Gain(g)) => s.push(g.value * power),
            (ReceiverState::Mimo(m), ChannelDraw::Matrix(h)) => {
                match m.scheme {
                    Scheme::Rtd => m.gram.add(&h.matrix),
                    Scheme::Inr => m.mi_sum += crate::rates::mimo_log_det(&h.matrix, power),
                }
                m.copies += 1;
            }
            _ => return Err(Error::contract("channel draw does not match the antenna configuration")),
        }
        Ok(())
    }

    pub fn copies(&self) -> usize {
        match self {
            ReceiverState::Siso(s) => s.copies(),
            ReceiverState::Mimo(m) => m.copies,
        }
    }

    /// Total resolvable nats, `m * U_(m)`.
    pub fn accumulated_nats(&self, power: f64) -> f64 {
        match self {
            ReceiverState::Siso(s) => s.accumulated_nats(),
            ReceiverState::Mimo(m) => match m.scheme {
                Scheme::Rtd if m.copies == 0 => 0.0,
                Scheme::Rtd => m.gram.log_det(power),
                Scheme::Inr => m.mi_sum,
            },
        }
    }
}

/// Per-slot protocol state of one packet epoch.
#[derive(Debug, Clone)]
pub struct SlotLedger {
    slot: u32,
    assignment: Vec<Option<usize>>,
    receivers: Vec<ReceiverState>,
    rounds_used: Vec<u32>,
    status: Vec<UserStatus>,
    decode_round: Vec<Option<u32>>,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    failed: Vec<usize>,
    free: Vec<usize>,
    extra: Vec<(usize, usize)>,
}

impl SlotLedger {
    /// Fresh epoch: every user active on its own band.
    pub fn new(config: &ProtocolConfig) -> Self {
        let k = config.users();
        Self {
            slot: 1,
            assignment: (0..k).map(Some).collect(),
            receivers: (0..k)
                .map(|_| ReceiverState::new(&config.profile, config.scheme))
                .collect(),
            rounds_used: vec![0; k],
            status: vec![UserStatus::Active; k],
            decode_round: vec![None; k],
            scratch: Scratch::default(),
        }
    }

    fn reset(&mut self) {
        self.slot = 1;
        for (b, a) in self.assignment.iter_mut().enumerate() {
            *a = Some(b);
        }
        self.receivers.iter_mut().for_each(ReceiverState::clear);
        self.rounds_used.fill(0);
        self.status.fill(UserStatus::Active);
        self.decode_round.fill(None);
    }

    /// Slot about to be played, 1-based.
    pub fn slot(&self) -> u32 {
        self.slot
    }

    /// Band to user map for the upcoming slot; `None` marks a band that
    /// carries no traffic of this epoch.
    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn receiver(&self, user: usize) -> &ReceiverState {
        &self.receivers[user]
    }

    pub fn rounds_used(&self) -> &[u32] {
        &self.rounds_used
    }

    pub fn status(&self) -> &[UserStatus] {
        &self.status
    }

    pub fn decode_round(&self) -> &[Option<u32>] {
        &self.decode_round
    }

    pub fn any_active(&self) -> bool {
        self.status.contains(&UserStatus::Active)
    }

    /// Plays one slot: delivers one copy per assigned band, applies the
    /// decoding rule, retires users that decoded or ran out of rounds and
    /// computes the next slot's assignment with `policy`.
    ///
    /// `draws[b]` must be the channel of band `b` in this slot.
    pub fn advance_slot<R: rand::Rng + ?Sized>(
        &mut self,
        draws: &[ChannelDraw],
        config: &ProtocolConfig,
        policy: AllocationPolicy,
        policy_rng: &mut R,
    ) -> Result<()> {
        let k = config.users();
        if !self.any_active() {
            return Err(Error::contract("advance_slot called on a finished epoch"));
        }
        if draws.len() != k || draws.iter().enumerate().any(|(b, d)| d.band() != b) {
            return Err(Error::contract(format!(
                "slot {} needs exactly one draw per band in band order",
                self.slot
            )));
        }

        for (band, user) in self.assignment.iter().enumerate() {
            if let Some(u) = *user {
                self.receivers[u].receive(&draws[band], config.power)?;
            }
        }

        for u in 0..k {
            if self.status[u] != UserStatus::Active {
                continue;
            }
            self.rounds_used[u] += 1;
            if self.receivers[u].accumulated_nats(config.power) >= config.rates[u] {
                self.status[u] = UserStatus::Decoded;
                self.decode_round[u] = Some(self.rounds_used[u]);
            } else if self.rounds_used[u] >= config.max_rounds {
                self.status[u] = UserStatus::Outage;
            }
        }

        self.slot += 1;
        self.assignment.fill(None);
        let Scratch { failed, free, extra } = &mut self.scratch;
        failed.clear();
        failed.extend((0..k).filter(|&u| self.status[u] == UserStatus::Active));
        if failed.is_empty() {
            return Ok(());
        }
        for &u in failed.iter() {
            self.assignment[u] = Some(u);
        }
        free.clear();
        free.extend((0..k).filter(|&b| self.status[b] != UserStatus::Active));
        extra.clear();
        allocate_into(failed, free, policy, policy_rng, extra)?;
        for &(band, user) in extra.iter() {
            if self.status[band] == UserStatus::Active {
                return Err(Error::Protocol(format!(
                    "policy {policy} reassigned band {} that is still in use",
                    band + 1
                )));
            }
            if self.status[user] == UserStatus::Active {
                if !policy.is_coordinated() && band != user {
                    return Err(Error::Protocol(format!(
                        "non-coordinated policy gave band {} to user {}",
                        band + 1,
                        user + 1
                    )));
                }
                self.assignment[band] = Some(user);
            } else if policy.is_coordinated() {
                return Err(Error::Protocol(format!(
                    "policy {policy} left band {} with finished user {} while users are retransmitting",
                    band + 1,
                    user + 1
                )));
            }
        }
        Ok(())
    }
}

/// Terminal record of one packet epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketOutcome {
    /// Round in which each user decoded; `None` means outage.
    pub decode_round: Vec<Option<u32>>,
    /// `R_u` for decoded users, zero on outage.
    pub nats_delivered: Vec<f64>,
    /// Rounds each user spent on this packet.
    pub rounds_used: Vec<u32>,
    /// Slots until every user finished.
    pub slots_consumed: u32,
}

impl PacketOutcome {
    pub fn decoded(&self, user: usize) -> bool {
        self.decode_round[user].is_some()
    }
}

/// Runs packets one after another, reusing its buffers.
#[derive(Debug)]
pub struct PacketSimulator<'a> {
    config: &'a ProtocolConfig,
    policy: AllocationPolicy,
    ledger: SlotLedger,
    draws: Vec<ChannelDraw>,
    outcome: PacketOutcome,
}

impl<'a> PacketSimulator<'a> {
    pub fn new(config: &'a ProtocolConfig, policy: AllocationPolicy) -> Result<Self> {
        config.validate()?;
        let k = config.users();
        Ok(Self {
            config,
            policy,
            ledger: SlotLedger::new(config),
            draws: Vec::with_capacity(k),
            outcome: PacketOutcome {
                decode_round: vec![None; k],
                nats_delivered: vec![0.0; k],
                rounds_used: vec![0; k],
                slots_consumed: 0,
            },
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        self.config
    }

    pub fn policy(&self) -> AllocationPolicy {
        self.policy
    }

    /// Packet number `trial` of the run rooted at `seeds`.
    pub fn run(&mut self, seeds: &SeedTree, trial: u64) -> Result<&PacketOutcome> {
        self.run_inner(seeds, trial, None)
    }

    /// As [`run`](Self::run), reporting every band assignment to `sink`.
    pub fn run_traced(
        &mut self,
        seeds: &SeedTree,
        trial: u64,
        sink: &mut dyn FnMut(TraceRecord),
    ) -> Result<&PacketOutcome> {
        self.run_inner(seeds, trial, Some(sink))
    }

    fn run_inner(
        &mut self,
        seeds: &SeedTree,
        trial: u64,
        mut sink: Option<&mut dyn FnMut(TraceRecord)>,
    ) -> Result<&PacketOutcome> {
        let config = self.config;
        let k = config.users();
        self.ledger.reset();
        while self.ledger.any_active() {
            let slot = self.ledger.slot();
            self.draws.clear();
            for band in 0..k {
                let mut stream = seeds.substream(trial, slot, band as u32);
                self.draws.push(config.profile.sample(band, slot, &mut stream)?);
            }
            let played = sink.as_ref().map(|_| self.ledger.assignment().to_vec());
            let mut policy_rng = seeds.policy_stream(trial, slot);
            self.ledger
                .advance_slot(&self.draws, config, self.policy, &mut policy_rng)?;
            if let (Some(sink), Some(played)) = (sink.as_mut(), played) {
                let status = self.ledger.status();
                let decoded: Vec<usize> = (0..k).filter(|&u| status[u] == UserStatus::Decoded).collect();
                let failed: Vec<usize> = (0..k).filter(|&u| status[u] != UserStatus::Decoded).collect();
                for (band, user) in played.into_iter().enumerate() {
                    sink(TraceRecord {
                        trial,
                        slot,
                        band,
                        user,
                        scheme: config.scheme,
                        decoded_users: decoded.clone(),
                        failed_users: failed.clone(),
                    });
                }
            }
        }

        let out = &mut self.outcome;
        out.slots_consumed = self.ledger.slot() - 1;
        for u in 0..k {
            out.decode_round[u] = self.ledger.decode_round()[u];
            out.rounds_used[u] = self.ledger.rounds_used()[u];
            out.nats_delivered[u] = if out.decode_round[u].is_some() {
                config.rates[u]
            } else {
                0.0
            };
        }
        Ok(&self.outcome)
    }
}

/// Fastest available packet runner for a configuration.
#[derive(Debug)]
pub enum PacketRunner<'a> {
    Siso(SisoKernel<'a>),
    General(PacketSimulator<'a>),
}

impl<'a> PacketRunner<'a> {
    pub fn new(config: &'a ProtocolConfig, policy: AllocationPolicy) -> Result<Self> {
        if config.profile.is_siso() {
            Ok(PacketRunner::Siso(SisoKernel::new(config, policy)?))
        } else {
            Ok(PacketRunner::General(PacketSimulator::new(config, policy)?))
        }
    }

    pub fn run(&mut self, seeds: &SeedTree, trial: u64) -> Result<&PacketOutcome> {
        match self {
            PacketRunner::Siso(k) => k.run(seeds, trial),
            PacketRunner::General(s) => s.run(seeds, trial),
        }
    }
}

/// Runs a single packet. Prefer [`PacketSimulator`] for many packets.
pub fn run_packet(
    config: &ProtocolConfig,
    policy: AllocationPolicy,
    seeds: &SeedTree,
    trial: u64,
) -> Result<PacketOutcome> {
    PacketSimulator::new(config, policy)?.run(seeds, trial).cloned()
}

/// Writes the slot trace of `trials` packets starting at `first_trial`.
pub fn write_trace<W: Write>(
    config: &ProtocolConfig,
    policy: AllocationPolicy,
    seeds: &SeedTree,
    first_trial: u64,
    trials: u64,
    out: W,
) -> Result<()> {
    let mut writer = TraceWriter::new(out)?;
    let mut sim = PacketSimulator::new(config, policy)?;
    let mut pending = Vec::new();
    for trial in first_trial..first_trial + trials {
        sim.run_traced(seeds, trial, &mut |r| pending.push(r))?;
        for r in pending.drain(..) {
            writer.write(&r)?;
        }
    }
    writer.flush()
}

#[cfg(test)]
mod tests;

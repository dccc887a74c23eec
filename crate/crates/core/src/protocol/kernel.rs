//! Allocation-free packet loop for single-antenna links. It plays the same
//! protocol as [`PacketSimulator`](super::PacketSimulator) on the same keyed
//! draws and yields identical outcomes; bands that carry no traffic are not
//! sampled.

use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::fading::SeedTree;
use crate::rates::Scheme;

use super::{allocate_into, AllocationPolicy, PacketOutcome, ProtocolConfig};

const IDLE: usize = usize::MAX;

#[derive(Debug)]
pub struct SisoKernel<'a> {
    config: &'a ProtocolConfig,
    policy: AllocationPolicy,
    lambdas: Vec<f64>,
    assignment: Vec<usize>,
    acc: Vec<f64>,
    active: Vec<bool>,
    failed: Vec<usize>,
    free: Vec<usize>,
    extra: Vec<(usize, usize)>,
    outcome: PacketOutcome,
}

impl<'a> SisoKernel<'a> {
    pub fn new(config: &'a ProtocolConfig, policy: AllocationPolicy) -> Result<Self> {
        config.validate()?;
        if !config.profile.is_siso() {
            return Err(Error::contract("the scalar kernel needs single-antenna links"));
        }
        let k = config.users();
        Ok(Self {
            config,
            policy,
            lambdas: config.profile.lambdas().to_vec(),
            assignment: vec![IDLE; k],
            acc: vec![0.0; k],
            active: vec![true; k],
            failed: Vec::with_capacity(k),
            free: Vec::with_capacity(k),
            extra: Vec::with_capacity(k),
            outcome: PacketOutcome {
                decode_round: vec![None; k],
                nats_delivered: vec![0.0; k],
                rounds_used: vec![0; k],
                slots_consumed: 0,
            },
        })
    }

    pub fn run(&mut self, seeds: &SeedTree, trial: u64) -> Result<&PacketOutcome> {
        let cfg = self.config;
        let k = cfg.users();
        let power = cfg.power;
        let inr = cfg.scheme == Scheme::Inr;
        for u in 0..k {
            self.assignment[u] = u;
            self.acc[u] = 0.0;
            self.active[u] = true;
            self.outcome.decode_round[u] = None;
            self.outcome.rounds_used[u] = 0;
        }
        let mut remaining = k;
        let mut slot = 1u32;
        loop {
            for band in 0..k {
                let u = self.assignment[band];
                if u == IDLE {
                    continue;
                }
                let mut stream = seeds.substream(trial, slot, band as u32);
                let e: f64 = Exp1.sample(&mut stream);
                let snr = e / self.lambdas[band] * power;
                self.acc[u] += if inr { snr.ln_1p() } else { snr };
            }
            for u in 0..k {
                if !self.active[u] {
                    continue;
                }
                let rounds = self.outcome.rounds_used[u] + 1;
                self.outcome.rounds_used[u] = rounds;
                let nats = if inr { self.acc[u] } else { self.acc[u].ln_1p() };
                if nats >= cfg.rates[u] {
                    self.outcome.decode_round[u] = Some(rounds);
                    self.active[u] = false;
                    remaining -= 1;
                } else if rounds >= cfg.max_rounds {
                    self.active[u] = false;
                    remaining -= 1;
                }
            }
            if remaining == 0 {
                break;
            }
            slot += 1;
            self.reassign(seeds, trial, slot)?;
        }
        self.outcome.slots_consumed = slot;
        for u in 0..k {
            self.outcome.nats_delivered[u] = if self.outcome.decode_round[u].is_some() {
                cfg.rates[u]
            } else {
                0.0
            };
        }
        Ok(&self.outcome)
    }

    fn reassign(&mut self, seeds: &SeedTree, trial: u64, slot: u32) -> Result<()> {
        let k = self.config.users();
        self.failed.clear();
        self.free.clear();
        for u in 0..k {
            if self.active[u] {
                self.failed.push(u);
                self.assignment[u] = u;
            } else {
                self.free.push(u);
                self.assignment[u] = IDLE;
            }
        }
        if self.free.is_empty() || !self.policy.is_coordinated() {
            return Ok(());
        }
        self.extra.clear();
        let mut rng = seeds.policy_stream(trial, slot - 1);
        allocate_into(&mut self.failed, &self.free, self.policy, &mut rng, &mut self.extra)?;
        for &(band, user) in &self.extra {
            self.assignment[band] = user;
        }
        Ok(())
    }
}

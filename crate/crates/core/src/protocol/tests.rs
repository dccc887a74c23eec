use super::*;
use crate::fading::GainDraw;

fn config(k: usize, m: u32, rate: f64, power: f64, scheme: Scheme) -> ProtocolConfig {
    ProtocolConfig::new(
        FadingProfile::siso(vec![1.0; k]).unwrap(),
        vec![rate; k],
        m,
        power,
        scheme,
    )
    .unwrap()
}

fn gains(slot: u32, values: &[f64]) -> Vec<ChannelDraw> {
    values
        .iter()
        .enumerate()
        .map(|(band, &value)| ChannelDraw::Gain(GainDraw { band, slot, value }))
        .collect()
}

fn copies(ledger: &SlotLedger, user: usize) -> usize {
    ledger.receiver(user).copies()
}

#[test]
fn early_decoder_donates_its_band() {
    // P = 1, R = 1: a gain of 2 decodes (log 3 > 1), 0.1 does not.
    let cfg = config(2, 2, 1.0, 1.0, Scheme::Rtd);
    let mut rng = SeedTree::new(0).policy_stream(0, 1);
    let mut ledger = SlotLedger::new(&cfg);
    ledger
        .advance_slot(&gains(1, &[2.0, 0.1]), &cfg, AllocationPolicy::FullCoordinationK2, &mut rng)
        .unwrap();
    assert_eq!(ledger.status(), &[UserStatus::Decoded, UserStatus::Active]);
    assert_eq!(ledger.assignment(), &[Some(1), Some(1)]);

    ledger
        .advance_slot(&gains(2, &[0.1, 0.1]), &cfg, AllocationPolicy::FullCoordinationK2, &mut rng)
        .unwrap();
    assert_eq!(copies(&ledger, 1), 3);
    assert_eq!(copies(&ledger, 0), 1);
    assert_eq!(ledger.status(), &[UserStatus::Decoded, UserStatus::Outage]);
    assert!(!ledger.any_active());
    assert!(ledger
        .advance_slot(&gains(3, &[1.0, 1.0]), &cfg, AllocationPolicy::FullCoordinationK2, &mut rng)
        .is_err());
}

#[test]
fn both_decode_ends_the_epoch() {
    let cfg = config(2, 2, 1.0, 1.0, Scheme::Rtd);
    let mut rng = SeedTree::new(0).policy_stream(0, 1);
    let mut ledger = SlotLedger::new(&cfg);
    ledger
        .advance_slot(&gains(1, &[2.0, 5.0]), &cfg, AllocationPolicy::FullCoordinationK2, &mut rng)
        .unwrap();
    assert_eq!(ledger.decode_round(), &[Some(1), Some(1)]);
    assert_eq!(ledger.assignment(), &[None, None]);
    assert!(!ledger.any_active());
}

#[test]
fn both_fail_retransmit_on_own_bands() {
    let cfg = config(2, 2, 1.0, 1.0, Scheme::Inr);
    let mut rng = SeedTree::new(0).policy_stream(0, 1);
    let mut ledger = SlotLedger::new(&cfg);
    ledger
        .advance_slot(&gains(1, &[0.2, 0.3]), &cfg, AllocationPolicy::FullCoordinationK2, &mut rng)
        .unwrap();
    assert_eq!(ledger.assignment(), &[Some(0), Some(1)]);
    assert_eq!(ledger.status(), &[UserStatus::Active, UserStatus::Active]);
}

#[test]
fn non_coordinated_never_shares() {
    let cfg = config(2, 3, 1.0, 1.0, Scheme::Rtd);
    let mut rng = SeedTree::new(0).policy_stream(0, 1);
    let mut ledger = SlotLedger::new(&cfg);
    ledger
        .advance_slot(&gains(1, &[2.0, 0.1]), &cfg, AllocationPolicy::NonCoordinated, &mut rng)
        .unwrap();
    assert_eq!(ledger.assignment(), &[None, Some(1)]);
}

#[test]
fn draws_must_cover_every_band() {
    let cfg = config(2, 2, 1.0, 1.0, Scheme::Rtd);
    let mut rng = SeedTree::new(0).policy_stream(0, 1);
    let mut ledger = SlotLedger::new(&cfg);
    let r = ledger.advance_slot(&gains(1, &[1.0]), &cfg, AllocationPolicy::FullCoordinationK2, &mut rng);
    assert!(matches!(r, Err(Error::Contract(_))));
}

#[test]
fn single_round_disables_retransmission() {
    for scheme in [Scheme::Rtd, Scheme::Inr] {
        let cfg = config(2, 1, 1.0, 3.0, scheme);
        let seeds = SeedTree::new(17);
        let mut sim = PacketSimulator::new(&cfg, AllocationPolicy::FullCoordinationK2).unwrap();
        for t in 0..2000 {
            let o = sim.run(&seeds, t).unwrap();
            assert_eq!(o.slots_consumed, 1);
            assert!(o.decode_round.iter().all(|d| d.is_none() || *d == Some(1)));
        }
    }
}

#[test]
fn zero_rate_always_decodes_first_round() {
    let cfg = config(2, 2, 0.0, 1.0, Scheme::Rtd);
    let seeds = SeedTree::new(2);
    for t in 0..1000 {
        let o = run_packet(&cfg, AllocationPolicy::FullCoordinationK2, &seeds, t).unwrap();
        assert_eq!(o.decode_round, vec![Some(1), Some(1)]);
        assert_eq!(o.slots_consumed, 1);
    }
}

#[test]
fn run_config_is_validated() {
    let profile = FadingProfile::siso(vec![1.0, 1.0]).unwrap();
    assert!(ProtocolConfig::new(profile.clone(), vec![1.0], 2, 1.0, Scheme::Rtd).is_err());
    assert!(ProtocolConfig::new(profile.clone(), vec![1.0, -1.0], 2, 1.0, Scheme::Rtd).is_err());
    assert!(ProtocolConfig::new(profile.clone(), vec![1.0, 1.0], 0, 1.0, Scheme::Rtd).is_err());
    assert!(ProtocolConfig::new(profile, vec![1.0, 1.0], 2, 0.0, Scheme::Rtd).is_err());
}

/// Brute-force single-user HARQ on band `user` of the same substreams.
fn isolated_user(cfg: &ProtocolConfig, seeds: &SeedTree, trial: u64, user: usize) -> Option<u32> {
    let lambda = cfg.profile.lambdas()[user];
    let mut snr_sum = 0.0;
    let mut mi_sum = 0.0;
    for round in 1..=cfg.max_rounds {
        let mut s = seeds.substream(trial, round, user as u32);
        let g: f64 = rand_distr::Distribution::<f64>::sample(&rand_distr::Exp1, &mut s) / lambda;
        snr_sum += g * cfg.power;
        mi_sum += (g * cfg.power).ln_1p();
        let acc = match cfg.scheme {
            Scheme::Rtd => snr_sum.ln_1p(),
            Scheme::Inr => mi_sum,
        };
        if acc >= cfg.rates[user] {
            return Some(round);
        }
    }
    None
}

#[test]
fn non_coordinated_trajectories_match_isolated_harq() {
    for scheme in [Scheme::Rtd, Scheme::Inr] {
        let cfg = ProtocolConfig::new(
            FadingProfile::siso(vec![1.0, 2.5, 0.7]).unwrap(),
            vec![1.0, 0.6, 2.0],
            3,
            4.0,
            scheme,
        )
        .unwrap();
        let seeds = SeedTree::new(23);
        let mut sim = PacketSimulator::new(&cfg, AllocationPolicy::NonCoordinated).unwrap();
        for t in 0..20_000 {
            let o = sim.run(&seeds, t).unwrap().clone();
            for u in 0..3 {
                assert_eq!(o.decode_round[u], isolated_user(&cfg, &seeds, t, u), "trial {t} user {u}");
            }
        }
    }
}

#[test]
fn coordination_never_hurts_on_paired_draws() {
    for (k, policy) in [
        (2, AllocationPolicy::FullCoordinationK2),
        (3, AllocationPolicy::RandomSplitK3),
        (4, AllocationPolicy::RoundRobinGeneral),
    ] {
        for scheme in [Scheme::Rtd, Scheme::Inr] {
            let cfg = config(k, 3, 1.0, 2.0, scheme);
            let seeds = SeedTree::new(31);
            let mut coord = PacketSimulator::new(&cfg, policy).unwrap();
            let mut plain = PacketSimulator::new(&cfg, AllocationPolicy::NonCoordinated).unwrap();
            for t in 0..20_000 {
                let c = coord.run(&seeds, t).unwrap().clone();
                let n = plain.run(&seeds, t).unwrap();
                for u in 0..k {
                    if let Some(rn) = n.decode_round[u] {
                        let rc = c.decode_round[u].expect("coordination lost a decode");
                        assert!(rc <= rn);
                    }
                }
            }
        }
    }
}

#[test]
fn ledger_invariants_hold_along_random_packets() {
    for (k, policy) in [
        (2, AllocationPolicy::FullCoordinationK2),
        (3, AllocationPolicy::RandomSplitK3),
        (5, AllocationPolicy::RoundRobinGeneral),
        (3, AllocationPolicy::NonCoordinated),
    ] {
        let cfg = config(k, 4, 1.5, 2.0, Scheme::Inr);
        let seeds = SeedTree::new(41);
        for trial in 0..3000 {
            let mut ledger = SlotLedger::new(&cfg);
            while ledger.any_active() {
                let slot = ledger.slot();
                let draws: Vec<ChannelDraw> = (0..k)
                    .map(|b| cfg.profile.sample(b, slot, &mut seeds.substream(trial, slot, b as u32)).unwrap())
                    .collect();
                ledger
                    .advance_slot(&draws, &cfg, policy, &mut seeds.policy_stream(trial, slot))
                    .unwrap();
                assert!(ledger.rounds_used().iter().all(|&r| r <= cfg.max_rounds));
                if !ledger.any_active() {
                    break;
                }
                let assigned = ledger.assignment().iter().flatten().count();
                for (band, user) in ledger.assignment().iter().enumerate() {
                    if let Some(u) = *user {
                        assert_eq!(ledger.status()[u], UserStatus::Active);
                        if !policy.is_coordinated() {
                            assert_eq!(band, u);
                        }
                    }
                }
                if policy.is_coordinated() {
                    assert_eq!(assigned, k, "idle band while users retransmit");
                }
            }
        }
    }
}

#[test]
fn identical_seeds_identical_outcomes() {
    let cfg = config(3, 2, 1.0, 5.0, Scheme::Inr);
    let a: Vec<PacketOutcome> = (0..500)
        .map(|t| run_packet(&cfg, AllocationPolicy::RandomSplitK3, &SeedTree::new(9), t).unwrap())
        .collect();
    let b: Vec<PacketOutcome> = (0..500)
        .rev()
        .map(|t| run_packet(&cfg, AllocationPolicy::RandomSplitK3, &SeedTree::new(9), t).unwrap())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    assert_eq!(a, b);
}

#[test]
fn outcome_invariants() {
    let cfg = config(2, 3, 1.0, 1.0, Scheme::Rtd);
    let seeds = SeedTree::new(5);
    let mut sim = PacketSimulator::new(&cfg, AllocationPolicy::FullCoordinationK2).unwrap();
    for t in 0..5000 {
        let o = sim.run(&seeds, t).unwrap();
        assert!(o.slots_consumed <= 3);
        for u in 0..2 {
            match o.decode_round[u] {
                Some(r) => {
                    assert_eq!(o.nats_delivered[u], 1.0);
                    assert!(r <= o.slots_consumed);
                }
                None => assert_eq!(o.nats_delivered[u], 0.0),
            }
        }
    }
}

#[test]
fn mimo_packets_run() {
    let cfg = ProtocolConfig::new(
        FadingProfile::new(vec![1.0, 1.0], 2, 2).unwrap(),
        vec![2.0, 2.0],
        2,
        3.0,
        Scheme::Rtd,
    )
    .unwrap();
    let seeds = SeedTree::new(3);
    let mut sim = PacketSimulator::new(&cfg, AllocationPolicy::FullCoordinationK2).unwrap();
    let decoded = (0..2000)
        .filter(|&t| sim.run(&seeds, t).unwrap().decoded(1))
        .count();
    assert!(decoded > 1000);
}

#[test]
fn trace_lines_follow_the_timeline() {
    let cfg = config(2, 2, 1.0, 1.0, Scheme::Rtd);
    let seeds = SeedTree::new(1);
    let mut buf = Vec::new();
    write_trace(&cfg, AllocationPolicy::FullCoordinationK2, &seeds, 0, 50, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TraceWriter::<Vec<u8>>::HEADER);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 7));
    // Each slot of each trial lists both bands.
    assert_eq!(rows.len() % 2, 0);
    // In slot 2 either both users keep their bands or one user holds both.
    let mut shared = 0;
    for pair in rows.chunks(2) {
        if pair[0][1] == "2" && pair[0][3] != pair[1][3] {
            assert_eq!((pair[0][3], pair[1][3]), ("1", "2"), "{pair:?}");
        } else if pair[0][1] == "2" {
            shared += 1;
        }
    }
    assert!(shared > 0);
}

#[test]
fn scalar_kernel_reproduces_the_ledger() {
    let cases = [
        (2, AllocationPolicy::FullCoordinationK2),
        (2, AllocationPolicy::NonCoordinated),
        (3, AllocationPolicy::RandomSplitK3),
        (3, AllocationPolicy::NonCoordinated),
        (4, AllocationPolicy::RoundRobinGeneral),
    ];
    for scheme in [Scheme::Rtd, Scheme::Inr] {
        for (k, policy) in cases {
            for m in [1, 2, 4] {
                let mut cfg = config(k, m, 1.2, 2.0, scheme);
                cfg.rates[0] = 0.6;
                let seeds = SeedTree::new(31 + k as u64);
                let mut sim = PacketSimulator::new(&cfg, policy).unwrap();
                let mut kernel = SisoKernel::new(&cfg, policy).unwrap();
                for trial in 0..3000 {
                    let a = sim.run(&seeds, trial).unwrap().clone();
                    let b = kernel.run(&seeds, trial).unwrap();
                    assert_eq!(&a, b, "{scheme} {policy} K={k} M={m} trial {trial}");
                }
            }
        }
    }
}

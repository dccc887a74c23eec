use std::hint::black_box;

use coharq_core::analytic::{cdf_inr_sum, cdf_rtd_sum, TwoUserModel};
use coharq_core::montecarlo::estimate;
use coharq_core::{AllocationPolicy, FadingProfile, ProtocolConfig, Scheme};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn link(k: usize, antennas: usize, scheme: Scheme) -> ProtocolConfig {
    ProtocolConfig::new(
        FadingProfile::new(vec![1.0; k], antennas, antennas).unwrap(),
        vec![1.0; k],
        2,
        1.0,
        scheme,
    )
    .unwrap()
    .with_snr_db(10.0)
}

fn packets(c: &mut Criterion) {
    const TRIALS: u64 = 20_000;
    let mut g = c.benchmark_group("packets");
    g.throughput(Throughput::Elements(TRIALS));
    for (name, config, policy) in [
        ("siso-k2-coord", link(2, 1, Scheme::Inr), AllocationPolicy::FullCoordinationK2),
        ("siso-k2-noncoord", link(2, 1, Scheme::Inr), AllocationPolicy::NonCoordinated),
        ("siso-k3-random", link(3, 1, Scheme::Rtd), AllocationPolicy::RandomSplitK3),
        ("mimo2x2-k2-coord", link(2, 2, Scheme::Rtd), AllocationPolicy::FullCoordinationK2),
    ] {
        g.bench_function(name, |b| b.iter(|| estimate(black_box(&config), policy, TRIALS, 1).unwrap()));
    }
    g.finish();
}

fn cdfs(c: &mut Criterion) {
    let mut g = c.benchmark_group("cdf");
    for (n, m) in [(1, 1), (2, 2), (4, 3)] {
        let id = format!("{n}+{m}");
        g.bench_with_input(BenchmarkId::new("rtd", &id), &(n, m), |b, &(n, m)| {
            b.iter(|| cdf_rtd_sum(n, m, (1.0, 2.0), 10.0, black_box(3.0)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("inr", &id), &(n, m), |b, &(n, m)| {
            b.iter(|| cdf_inr_sum(n, m, (1.0, 2.0), 10.0, black_box(3.0)).unwrap())
        });
    }
    g.finish();
}

fn events(c: &mut Criterion) {
    let model = TwoUserModel::from_config(&link(2, 1, Scheme::Inr)).unwrap();
    c.bench_function("two-user-events-inr", |b| b.iter(|| black_box(&model).coordinated_events().unwrap()));
}

criterion_group!(benches, packets, cdfs, events);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use tdia::converse::{exact_independence_number, sample_column_graph};
use tdia::dp::{self, Boundary, DpStateSpace, Weights};
use tdia::gap::{CoefficientRange, GapSchedule};
use tdia::graph::InterferenceGraph;
use tdia::ofdm::{self, RankConfig};
use tdia::{numtheory, presets, seed};
use tdia_bench::{random_channel, random_normalized};

fn dynamic_program(c: &mut Criterion) {
    let nc = random_normalized(3, 3, 1);
    let space = DpStateSpace::enumerate(&nc).unwrap();
    let mut g = c.benchmark_group("dp");
    for t in [16usize, 64, 256] {
        g.bench_with_input(BenchmarkId::new("solve_exact", t), &t, |b, &t| {
            b.iter(|| space.solve(black_box(t), Boundary::Exact).unwrap())
        });
    }
    g.bench_function("enumerate_states", |b| b.iter(|| DpStateSpace::enumerate(black_box(&nc)).unwrap()));
    g.bench_function("independence_rate", |b| b.iter(|| dp::independence_rate(black_box(&nc), Weights::Uniform).unwrap()));
    g.finish();
}

fn brute_force(c: &mut Criterion) {
    let nc = random_normalized(3, 2, 2);
    let graph = InterferenceGraph::build(&nc, 10).unwrap();
    c.bench_function("graph/brute_force_k3_t10", |b| b.iter(|| graph.brute_force_optimum(black_box(&[1.0; 3])).unwrap()));
}

fn number_theory(c: &mut Criterion) {
    let tuples = numtheory::sweep_tuples(2);
    c.bench_function("numtheory/half_rate_scan", |b| {
        b.iter(|| {
            tuples
                .iter()
                .filter(|&&t| numtheory::theorem3_check(&numtheory::channel_from_tuple(t)).unwrap().achievable)
                .count()
        })
    });
}

fn progression(c: &mut Criterion) {
    let ch = random_channel(3, 1 << 16, 3);
    c.bench_function("gap/progression_k3", |b| {
        b.iter(|| tdia::gap::build_progression(black_box(&ch), CoefficientRange::Theorem1 { n: 6 }).unwrap())
    });
    let mut rng = seed::rng_for(4, &[]);
    let sched = GapSchedule::sample(&ch, 1.0, Some(8), &mut rng).unwrap();
    c.bench_function("gap/clean_slots", |b| b.iter(|| sched.report(black_box(&ch))));
}

fn converse(c: &mut Criterion) {
    let g = sample_column_graph(40, 4, 5).unwrap();
    c.bench_function("converse/exact_alpha_k40", |b| b.iter(|| exact_independence_number(black_box(&g)).unwrap()));
}

fn ofdm_pipeline(c: &mut Criterion) {
    let ch = presets::aligned_ofdm_three_user();
    c.bench_function("ofdm/build_precoders_m13", |b| b.iter(|| ofdm::build_precoders(black_box(&ch), 13).unwrap()));
    let cfg = RankConfig {
        users: 4,
        n: 2,
        taps: 2,
        m: 67,
        seed: 6,
        max_columns: None,
        delay_spread: 0,
    };
    c.bench_function("ofdm/rank_k4_n2", |b| b.iter(|| ofdm::dof_rank_experiment(black_box(&cfg)).unwrap()));
}

criterion_group!(benches, dynamic_program, brute_force, number_theory, progression, converse, ofdm_pipeline);
criterion_main!(benches);

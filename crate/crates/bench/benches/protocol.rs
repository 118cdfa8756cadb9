use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use priorcipher::cipher::{secret_from_index, Protocol};
use priorcipher::metrics::key_attack;
use priorcipher_bench::psk3_session;
use std::hint::black_box;

const SLOTS: usize = 100_000;

fn session(c: &mut Criterion) {
    let cfg = psk3_session(SLOTS);
    let mut protocol = Protocol::new(&cfg).unwrap();
    protocol.prepare(SLOTS as u64).unwrap();
    let mut g = c.benchmark_group("session");
    g.throughput(Throughput::Elements(SLOTS as u64));
    g.sample_size(10);
    g.bench_function("psk3_100k_slots", |b| b.iter(|| protocol.run(black_box(SLOTS), 7).unwrap()));
    g.finish();
}

fn attack(c: &mut Criterion) {
    let cfg = psk3_session(1000);
    let mut protocol = Protocol::with_secret(&cfg, secret_from_index(0xa7, 8).unwrap()).unwrap();
    let outcomes = protocol.run(1000, 3).unwrap().transcript.eve_outcomes();
    let mut g = c.benchmark_group("key_attack");
    g.sample_size(10);
    g.bench_function("8bit_1000_slots", |b| b.iter(|| key_attack(black_box(&outcomes), 8, &protocol).unwrap()));
    g.finish();
}

criterion_group!(benches, session, attack);
criterion_main!(benches);

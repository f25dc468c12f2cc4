use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use polarq_bench::spread_mixture;
use polarq_core::construct::evolve;
use polarq_core::polar::{minus, plus};
use polarq_core::quantize::Algorithm;
use polarq_core::tables::reference_channel;
use polarq_core::{ConstructionConfig, Kernel, Mode};

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group("transform");
    for m in [16, 32, 64] {
        let w = spread_mixture(m);
        group.throughput(Throughput::Elements((m * (m + 1)) as u64));
        group.bench_with_input(BenchmarkId::new("minus", m), &w, |b, w| b.iter(|| minus(w)));
        group.bench_with_input(BenchmarkId::new("plus", m), &w, |b, w| b.iter(|| plus(w)));
    }
    group.finish();
}

fn quantizers(c: &mut Criterion) {
    let mut group = c.benchmark_group("quantize");
    // The size a plus transform hands to the quantizer at k = 16 and k = 32.
    for m in [272, 1056] {
        let w = spread_mixture(m);
        for algorithm in [Algorithm::Transport, Algorithm::Merge, Algorithm::Split] {
            let name = format!("{algorithm:?}").to_lowercase();
            group.bench_with_input(BenchmarkId::new(name, m), &w, |b, w| {
                b.iter(|| algorithm.run(w, 16, Kernel::Bhattacharyya).unwrap())
            });
        }
    }
    group.finish();
}

fn evolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve");
    group.sample_size(10);
    let w0 = reference_channel();
    for k in [8, 16, 32] {
        for mode in [Mode::Degrade, Mode::Upgrade] {
            let cfg = ConstructionConfig::new(10, k, mode);
            group.bench_with_input(BenchmarkId::new(mode.name(), k), &cfg, |b, cfg| {
                b.iter(|| evolve(&w0, cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, transforms, quantizers, evolution);
criterion_main!(benches);

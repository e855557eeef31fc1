// SPDX-License-Identifier: Apache-2.0

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use socbuild_bench::{layered_registry, sv_text, target_chain};
use socbuild_core::backend::sv2v_stub_transform;
use socbuild_core::digest::hash_bytes;
use socbuild_core::exec::assemble_plan;
use socbuild_core::resolve;

fn graph(c: &mut Criterion) {
    let mut group = c.benchmark_group("resolve_flatten");
    for (layers, width) in [(10, 5), (20, 10), (40, 10)] {
        let (reg, root) = layered_registry(layers, width);
        group.bench_with_input(BenchmarkId::from_parameter(layers * width), &(), |b, _| {
            b.iter(|| resolve(black_box(&reg), &root).unwrap().flatten())
        });
    }
    group.finish();
}

fn plan(c: &mut Criterion) {
    let targets = target_chain(2000);
    c.bench_function("assemble_plan/2000", |b| {
        b.iter(|| assemble_plan(black_box(targets.clone())).unwrap())
    });
}

fn bytes(c: &mut Criterion) {
    let text = sv_text(1 << 20);
    let mut group = c.benchmark_group("bytes");
    group.throughput(Throughput::Bytes(text.len() as u64));
    group.bench_function("sv2v_stub_transform", |b| {
        b.iter(|| sv2v_stub_transform(black_box(&text)))
    });
    group.bench_function("hash_bytes", |b| b.iter(|| hash_bytes(black_box(&text))));
    group.finish();
}

criterion_group!(benches, graph, plan, bytes);
criterion_main!(benches);

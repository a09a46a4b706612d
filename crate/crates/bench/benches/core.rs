use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use pide_bench::{sample_doc, sample_source, sample_tree, sample_version, spread_edits};
use pide_core::document::{convert, update, TextEdit};
use pide_core::ids::{CommandId, VersionId};
use pide_core::pretty::format;
use pide_core::yxml;

fn codec(c: &mut Criterion) {
    let tree = [sample_tree(6, 4)];
    let bytes = yxml::encode(&tree).unwrap();
    let mut g = c.benchmark_group("yxml");
    g.throughput(criterion::Throughput::Bytes(bytes.len() as u64));
    g.bench_function("encode", |b| b.iter(|| yxml::encode(black_box(&tree)).unwrap()));
    g.bench_function("parse", |b| b.iter(|| yxml::parse(black_box(&bytes)).unwrap()));
    g.finish();
}

fn pretty(c: &mut Criterion) {
    let mut g = c.benchmark_group("pretty");
    for terms in [10, 100, 1000] {
        let doc = sample_doc(terms);
        g.bench_with_input(BenchmarkId::new("format76", terms), &doc, |b, d| b.iter(|| format(d, 76)));
    }
    g.finish();
}

fn versions(c: &mut Criterion) {
    let mut g = c.benchmark_group("update");
    for commands in [100, 1000] {
        let old = sample_version(commands);
        let middle = sample_source(commands / 2).len() + 4;
        let batch = [("main".to_string(), vec![TextEdit::insert(middle, "w")])];
        g.bench_with_input(BenchmarkId::new("one_edit", commands), &old, |b, old| {
            b.iter(|| {
                let mut next = 1_000_000;
                update(old, VersionId(2), &batch, || {
                    next += 1;
                    CommandId(next)
                })
                .unwrap()
            })
        });
    }
    g.finish();
}

fn offsets(c: &mut Criterion) {
    let mut g = c.benchmark_group("convert");
    for count in [1, 20, 200] {
        let edits = spread_edits(10_000, count);
        g.bench_with_input(BenchmarkId::new("edits", count), &edits, |b, e| {
            b.iter(|| (0..1000).map(|o| convert(o * 10, e)).sum::<usize>())
        });
    }
    g.finish();
}

criterion_group!(benches, codec, pretty, versions, offsets);
criterion_main!(benches);

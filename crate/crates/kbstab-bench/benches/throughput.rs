//! Throughput benchmarks: snapshot diffing, snapshot parsing, and KDE.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use kbstab_bench::snapshot_pair;
use kbstab_core::change_analysis::{analyze_snapshots, Criterion as ChangeCriterion, DiffConfig};
use kbstab_core::ingest::{load_snapshot, write_snapshot};
use kbstab_core::temporal_density;

fn bench_diff(c: &mut Criterion) {
    let mut group = c.benchmark_group("diff");
    group.sample_size(10);
    for entities in [10_000usize, 100_000] {
        let (snap1, snap2) = snapshot_pair(entities, 10);
        group.throughput(Throughput::Elements((entities * 10) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(entities * 10), &entities, |b, _| {
            b.iter(|| {
                analyze_snapshots(
                    &snap1,
                    &snap2,
                    ChangeCriterion::Timestamp,
                    &DiffConfig::default(),
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_ingest(c: &mut Criterion) {
    let mut group = c.benchmark_group("ingest");
    group.sample_size(10);
    let (snap, _) = snapshot_pair(30_000, 10);
    let dir = tempfile_dir();
    let path = dir.join("bench_snapshot.tsv");
    let mut bytes = Vec::new();
    write_snapshot(&snap, &mut bytes).unwrap();
    std::fs::write(&path, &bytes).unwrap();
    group.throughput(Throughput::Elements(snap.len() as u64));
    group.bench_function("load_snapshot_300k_facts", |b| {
        b.iter(|| load_snapshot(&path).unwrap())
    });
    group.finish();
    let _ = std::fs::remove_dir_all(&dir);
}

fn bench_kde(c: &mut Criterion) {
    let samples: Vec<f64> = (0..5_000).map(|i| (i % 97) as f64 * 0.3 + 0.1).collect();
    c.bench_function("kde_5000_samples", |b| {
        b.iter(|| temporal_density::kde(&samples).unwrap())
    });
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("kbstab-bench-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

criterion_group!(benches, bench_diff, bench_ingest, bench_kde);
criterion_main!(benches);

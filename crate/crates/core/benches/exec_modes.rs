//! Sequential against parallel execution on the three sweep shapes the harness
//! uses: many small independent jobs, one FFT-heavy quantization, and a large
//! batch of cheap geometric checks.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use latwave::grid::TorusGrid;
use latwave::harness::{presets, run_with};
use latwave::profile::Profile;
use latwave::weyl::{weyl_quantize_with, Symbol};
use latwave::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn schur_sweep(c: &mut Criterion) {
    let mut cfg = presets::schur();
    cfg.samples = Some(200);
    cfg.options.insert("max-size".into(), 96.0);
    let mut g = c.benchmark_group("schur-sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| black_box(run_with(&cfg, e).unwrap()))
        });
    }
    g.finish();
}

fn weyl_quantize(c: &mut Criterion) {
    let grid = TorusGrid::new(1, 512).unwrap();
    let a = Symbol::separable(&Profile::bump(&[0.0], 100.0, 2.0), &Profile::bump(&[0.0], 2.0, 1.0));
    let mut g = c.benchmark_group("weyl-quantize-512");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| black_box(weyl_quantize_with(&a, &grid, e).unwrap()))
        });
    }
    g.finish();
}

fn cone_sweep(c: &mut Criterion) {
    let mut cfg = presets::cone_monotone();
    cfg.samples = Some(20_000);
    let mut g = c.benchmark_group("cone-sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| black_box(run_with(&cfg, e).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, schur_sweep, weyl_quantize, cone_sweep);
criterion_main!(benches);

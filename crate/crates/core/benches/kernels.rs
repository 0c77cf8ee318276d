use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use pfasst_mg::analysis::{damping_scan, damping_scan_seq, default_grid};
use pfasst_mg::heat::{initial_condition, Grid, HeatOperator, StencilOrder};
use pfasst_mg::multigrid::{MgConfig, Smoother, SolvePolicy};
use pfasst_mg::par;
use pfasst_mg::quadrature::QuadratureTable;
use pfasst_mg::sdc::{SweepConfig, Sweeper};

fn stencil(c: &mut Criterion) {
    let grid = Grid::unit(3, 64).unwrap();
    let op = HeatOperator::new(grid, 1.0, StencilOrder::Fourth);
    let u = initial_condition(&grid, 1);
    let mut out = vec![0.0; grid.len()];
    let mut g = c.benchmark_group("apply_into_3d_64");
    g.bench_function("seq", |b| b.iter(|| op.apply_into_seq(black_box(u.values()), &mut out)));
    g.bench_function("par", |b| b.iter(|| op.apply_into(black_box(u.values()), &mut out)));
    g.finish();
}

fn damping(c: &mut Criterion) {
    let table = QuadratureTable::uniform(4).unwrap();
    let grid = default_grid();
    let mut g = c.benchmark_group("damping_scan_m4");
    g.bench_function("seq", |b| b.iter(|| damping_scan_seq(&table, black_box(&grid)).unwrap()));
    g.bench_function("par", |b| b.iter(|| damping_scan(&table, black_box(&grid)).unwrap()));
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let grid = Grid::unit(3, 32).unwrap();
    let op = HeatOperator::new(grid, 1.0, StencilOrder::Second);
    let cfg = SweepConfig::new(op, 0.01, SolvePolicy::FixedCycles(2), MgConfig::with_smoother(Smoother::jor_red_black()));
    let sw = Sweeper::new(cfg, QuadratureTable::uniform(4).unwrap()).unwrap();
    let y0 = initial_condition(&grid, 1);
    let run = || {
        let mut s = sw.spread(&y0).unwrap();
        sw.sweep(&mut s, &y0, None).unwrap()
    };
    let mut g = c.benchmark_group("sweep_3d_32");
    g.sample_size(20);
    g.bench_function("one_thread", |b| b.iter(|| par::with_threads(1, run)));
    g.bench_function("pool", |b| b.iter(run));
    g.finish();
}

criterion_group!(benches, stencil, damping, sweep);
criterion_main!(benches);

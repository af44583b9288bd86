use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;
use qkck::ckforms::{holonomy_dimension, killing_check, killing_fields_hpn, HolonomyOptions};
use qkck::fd::FdScheme;
use qkck::manifolds::ChartModel;
use qkck::sampling::{random_point_in_ball, seeded};
use qkck::Exec;

fn holonomy(c: &mut Criterion) {
    let model = ChartModel::hpn(2).unwrap();
    let base = DVector::zeros(8);
    let mut group = c.benchmark_group("holonomy_hpn_4_loops");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            let opts = HolonomyOptions { loops: 4, steps_per_segment: 50, seed: 1, exec, ..Default::default() };
            b.iter(|| black_box(holonomy_dimension(&model, &base, opts).unwrap().fixed_dim))
        });
    }
    group.finish();
}

fn killing_batch(c: &mut Criterion) {
    let model = ChartModel::hpn(2).unwrap();
    let fields = killing_fields_hpn(2);
    let mut rng = seeded(2);
    let pts: Vec<_> = (0..4).map(|_| random_point_in_ball(8, 0.5, &mut rng)).collect();
    // warm the geometry cache so both variants measure the same work
    for p in &pts {
        model.point_geometry(p).unwrap();
    }
    let cases: Vec<(usize, usize)> = (0..fields.len()).flat_map(|i| (0..pts.len()).map(move |k| (i, k))).collect();
    let mut group = c.benchmark_group("killing_checks_84");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| {
                let r = exec.map(cases.clone(), |(i, k)| {
                    killing_check(&model, &fields[i].field, &pts[k], FdScheme::central4(1e-3)).unwrap().lie_derivative
                });
                black_box(r)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, holonomy, killing_batch);
criterion_main!(benches);

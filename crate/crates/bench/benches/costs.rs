use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use nfde_bench::{snapshots, subspaces, three_sources, ula_response, upa_response};
use nfde_core::localize::{grid_axes, music_spectrum, GridSize, SearchDomain};
use nfde_core::objectives::{EsfObjective, RlsObjective};

fn steering(c: &mut Criterion) {
    let mut g = c.benchmark_group("steering");
    for (name, resp) in [("ula128_fresnel", ula_response()), ("upa16x16_exact", upa_response())] {
        let p = three_sources(resp.geometry().is_planar())[0].to_params();
        g.bench_function(name, |b| b.iter(|| resp.steering_params(black_box(&p))));
    }
    g.finish();
}

fn objectives(c: &mut Criterion) {
    let mut g = c.benchmark_group("objectives");
    for (name, resp, t) in [("ula128", ula_response(), 200), ("upa16x16", upa_response(), 100)] {
        let snap = snapshots(resp.clone(), t);
        let planar = resp.geometry().is_planar();
        let rls = RlsObjective::new(&snap.data, &resp);
        let theta = three_sources(planar)[0].to_params();
        g.bench_function(BenchmarkId::new("rls", name), |b| b.iter(|| rls.cost(black_box(&theta))));

        let sub = subspaces(&snap, 3);
        let esf = EsfObjective::new(&sub.basis, &resp);
        let x: Vec<f64> = three_sources(planar).iter().flat_map(|l| l.to_params()).collect();
        g.bench_function(BenchmarkId::new("esf", name), |b| b.iter(|| esf.cost(black_box(&x))));
    }
    g.finish();
}

fn music(c: &mut Criterion) {
    let resp = ula_response();
    let snap = snapshots(resp.clone(), 200);
    let sub = subspaces(&snap, 3);
    let dom = SearchDomain::for_response(&resp).expect("domain");
    let mut g = c.benchmark_group("music_spectrum");
    g.sample_size(10);
    for grid in [GridSize::linear(50, 100), GridSize::linear(100, 200)] {
        let axes = grid_axes(&dom, grid).expect("grid");
        g.bench_with_input(BenchmarkId::from_parameter(grid), &axes, |b, axes| {
            b.iter(|| music_spectrum(&sub.noise, &resp, axes).expect("spectrum"))
        });
    }
    g.finish();
}

criterion_group!(benches, steering, objectives, music);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use finsler_twist::chaos_analysis::ftle;
use finsler_twist::*;

fn model(epsilon: f64) -> FinslerModel {
    FinslerModel::new(SuspensionSpec::new(epsilon, 2.0).unwrap()).unwrap()
}

fn time_one(c: &mut Criterion) {
    let verified = TwistMapSpec::new(0.3, 2.0).unwrap().build().unwrap();
    let sweep = TwistMapSpec::new(0.3, 2.0)
        .unwrap()
        .with_integrator(IntegratorConfig::sweep(25))
        .build()
        .unwrap();
    let p = CylinderPoint::new(0.2, 0.4);
    c.bench_function("twist_map_verified", |b| b.iter(|| verified.step(black_box(p)).unwrap()));
    c.bench_function("twist_map_sweep", |b| b.iter(|| sweep.step(black_box(p)).unwrap()));
}

fn return_map(c: &mut Criterion) {
    let map = ConjugatedReturnMap::new(model(0.3), GraphIntegrator::default()).unwrap();
    let p = CylinderPoint::new(0.2, 0.4);
    c.bench_function("return_map_apply", |b| b.iter(|| map.apply(black_box(p)).unwrap()));
    c.bench_function("return_map_step", |b| b.iter(|| map.step(black_box(p)).unwrap()));
}

fn lyapunov(c: &mut Criterion) {
    let map = TwistMapSpec::new(1.2, 2.0)
        .unwrap()
        .with_integrator(IntegratorConfig::sweep(25))
        .build()
        .unwrap();
    c.bench_function("ftle_100", |b| {
        b.iter(|| ftle(&map, black_box(CylinderPoint::new(0.1, 0.1)), 100).unwrap())
    });
}

fn finsler(c: &mut Criterion) {
    let m = model(0.3);
    c.bench_function("finsler_eval", |b| {
        b.iter(|| m.finsler_eval(black_box(0.3), 0.7, 0.6, 0.8).unwrap())
    });
    c.bench_function("fundamental_tensor", |b| {
        b.iter(|| m.fundamental_tensor(black_box(0.3), 0.7, 0.6, 0.8).unwrap())
    });
}

criterion_group!(benches, time_one, return_map, lyapunov, finsler);
criterion_main!(benches);

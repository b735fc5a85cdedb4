use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dro_bench::Fixture;
use dro_core::optimizer::solve_joints;
use dro_core::pipeline::DEFAULT_BLOCKS;
use dro_core::{compute_dro, recover_cloud, recover_grasp, SolveParams};

fn stages(c: &mut Criterion) {
    let mut group = c.benchmark_group("shadow_hand");
    for n_object in [128, 256, 512] {
        let f = Fixture::new("shadow_hand", "sphere", n_object);
        group.bench_with_input(BenchmarkId::new("compute_dro", n_object), &f, |b, f| {
            b.iter(|| compute_dro(&f.robot, &f.scene.object, DEFAULT_BLOCKS).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("recover_cloud", n_object), &f, |b, f| {
            b.iter(|| recover_cloud(&f.dro, &f.scene.object, f.robot.labels.clone()).unwrap())
        });
    }
    let f = Fixture::new("shadow_hand", "sphere", 512);
    let params = SolveParams::default();
    group.bench_function("solve_joints", |b| {
        b.iter(|| solve_joints(&f.scene.model, &f.targets, &f.q_init, &params).unwrap())
    });
    group.bench_function("recover_grasp", |b| {
        b.iter(|| {
            recover_grasp(&f.scene.model, &f.scene.canonical, &f.dro, &f.scene.object, &f.q_init, &params).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use stradic::projections::{brute_force_projection, project_tangent_box, TangentBoxSet, TangentSpace, TOL_EQ};
use stradic_bench::projection_batch;

fn projections(c: &mut Criterion) {
    let batch = projection_batch(100, 0);
    c.bench_function("project_tangent_box x100", |b| {
        b.iter(|| {
            for inst in &batch {
                let space = TangentSpace::new(inst.jacobian.clone()).unwrap();
                let set = TangentBoxSet::new(&space, inst.lo.clone(), inst.hi.clone()).unwrap();
                black_box(project_tangent_box(&inst.g, &set, TOL_EQ).unwrap());
            }
        })
    });
    c.bench_function("brute_force_projection x100", |b| {
        b.iter(|| {
            for inst in &batch {
                black_box(brute_force_projection(&inst.g, &inst.jacobian, &inst.lo, &inst.hi).unwrap());
            }
        })
    });
}

criterion_group!(benches, projections);
criterion_main!(benches);

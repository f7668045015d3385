use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use levy_fbsde::{build_basis, sample_path, solve_pide, RngSpec, TimeGrid};
use levy_fbsde_bench::{basis, bump_problem, grid, solver, two_atom_model};

fn bench_basis(c: &mut Criterion) {
    let model = two_atom_model();
    c.bench_function("build_basis/M=3", |b| {
        b.iter(|| build_basis(black_box(&model), 3).unwrap())
    });
}

fn bench_paths(c: &mut Criterion) {
    let model = two_atom_model();
    let basis = basis(&model, 3);
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let mut stream = 0;
    c.bench_function("sample_path/200 steps", |b| {
        b.iter(|| {
            stream += 1;
            sample_path(&model, &basis, &grid, RngSpec::new(7, stream))
        })
    });
}

fn bench_pide(c: &mut Criterion) {
    let model = two_atom_model();
    let basis = basis(&model, 2);
    let problem = bump_problem();
    let mut group = c.benchmark_group("solve_pide");
    group.sample_size(10);
    for n in [101, 201, 401] {
        let spatial = grid(n);
        let config = solver(100);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| solve_pide(&problem, &model, &basis, &spatial, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_basis, bench_paths, bench_pide);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use growwalk_core::lattice::BallShape;
use growwalk_core::potential::criteria::shell_potentials;
use growwalk_core::{DirichletProblem, Method, Metric, Site};

fn ball_problem(radius: f64) -> DirichletProblem {
    let free: Vec<Site> = BallShape::new(Metric::Euclidean, radius)
        .sites(3)
        .into_iter()
        .filter(|z| !z.is_origin())
        .collect();
    let start = Site::from_slice(&[1, 0, 0]);
    DirichletProblem::on_lattice(3, &free, |z| Some(if z.is_origin() { 1.0 } else { 0.0 }), start).unwrap()
}

fn dirichlet(c: &mut Criterion) {
    let mut g = c.benchmark_group("dirichlet_ball_d3");
    g.sample_size(10);
    for r in [5.0, 7.0] {
        let p = ball_problem(r);
        g.bench_with_input(BenchmarkId::new("iterative", r), &p, |b, p| b.iter(|| p.solve(Method::Iterative).unwrap().start_value));
        g.bench_with_input(BenchmarkId::new("dense", r), &p, |b, p| b.iter(|| p.solve(Method::Dense).unwrap().start_value));
    }
    let big = ball_problem(16.0);
    g.bench_function("iterative/16", |b| b.iter(|| big.solve(Method::Iterative).unwrap().start_value));
    g.finish();
}

fn shells(c: &mut Criterion) {
    let mut g = c.benchmark_group("shell_potentials");
    g.sample_size(10);
    g.bench_function("d2_k20", |b| b.iter(|| shell_potentials(2, 1.0, Metric::Euclidean, 20).unwrap().len()));
    g.finish();
}

criterion_group!(benches, dirichlet, shells);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use onerelu::approx::generalized_approx;
use onerelu::exec::Execution;
use onerelu::oracle::brute_force_opt;
use onerelu::solver::SolverConfig;
use onerelu::statgen::{generate_instance, monte_carlo_check, GaussianModel, StatModelSpec};

fn instance(p: usize, n: usize) -> onerelu::dataset::Dataset {
    let spec = StatModelSpec {
        p,
        n,
        sparsity: 0.5,
        beta_star_mean: 0.0,
        beta_star_var: 10.0,
        db: 20.0,
        realizable_rows: false,
        seed: 42,
    };
    generate_instance(&spec).unwrap().train
}

fn bench(c: &mut Criterion) {
    let modes = [("auto", Execution::Auto), ("sequential", Execution::Sequential)];

    let d = instance(5, 60);
    let mut g = c.benchmark_group("approx_k2");
    g.sample_size(10);
    for (name, exec) in modes {
        let cfg = SolverConfig::default().with_execution(exec);
        g.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| generalized_approx(&d, 2, cfg).unwrap())
        });
    }
    g.finish();

    let small = instance(3, 24);
    let small = small.subset(&(0..small.n()).filter(|&i| small.y(i) <= 0.0 || i % 2 == 0).collect::<Vec<_>>()).unwrap();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    for (name, exec) in modes {
        let cfg = SolverConfig::default().with_execution(exec);
        g.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| brute_force_opt(&small, cfg).unwrap())
        });
    }
    g.finish();

    let model = GaussianModel {
        sigma: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
        beta_star: vec![1.0, -1.0],
        gamma: 1.0,
        n: 100_000,
        seed: 1,
    };
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    for (name, exec) in modes {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| monte_carlo_check(&model, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);

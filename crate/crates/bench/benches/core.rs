use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gfl_core::network::{forward_backward, init_params, Architecture, InitScheme};
use gfl_core::poly::{decompose_homogeneous, monomials_of_degree};
use gfl_core::{ActivationKind, ExpectedLoss, LossKind, Polynomial, TargetSpec, WeightedDataset};

fn bench_forward_backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_backward");
    for widths in [vec![1, 10, 20, 10, 1], vec![4, 20, 40, 20, 1], vec![784, 64, 64, 10]] {
        let arch = Architecture::new(widths.clone(), ActivationKind::Tanh).unwrap();
        let theta = init_params(&arch, InitScheme::GlorotUniform, 0).unwrap();
        let x = vec![0.3; arch.input_dim()];
        let dl = vec![1.0; arch.output_dim()];
        group.bench_with_input(BenchmarkId::from_parameter(format!("{widths:?}")), &x, |b, x| {
            b.iter(|| forward_backward(&arch, &theta, black_box(x), &dl).unwrap())
        });
    }
    group.finish();
}

fn bench_jets(c: &mut Criterion) {
    let mut group = c.benchmark_group("jet");
    for order in [4, 16, 64] {
        group.bench_with_input(BenchmarkId::new("tanh", order), &order, |b, &order| {
            b.iter(|| ActivationKind::Tanh.jet(black_box(0.4), order).unwrap())
        });
    }
    group.finish();
}

fn bench_decomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose_homogeneous");
    for (m, n) in [(2, 4), (3, 4), (4, 3)] {
        let terms = monomials_of_degree(m, n).into_iter().enumerate().map(|(i, mu)| (mu.0, 1.0 / (1.0 + i as f64)));
        let p = Polynomial::from_terms(m, terms).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(format!("m{m}_n{n}")), &p, |b, p| {
            b.iter(|| decompose_homogeneous(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn bench_expected_loss(c: &mut Criterion) {
    let arch = Architecture::new(vec![1, 10, 20, 10, 1], ActivationKind::Tanh).unwrap();
    let theta = init_params(&arch, InitScheme::GlorotUniform, 0).unwrap().into_vec();
    let xs: Vec<Vec<f64>> = (0..1000).map(|i| vec![-1.0 + 2.0 * i as f64 / 999.0]).collect();
    let ys = xs.iter().map(|x| vec![x[0] * x[0]]).collect();
    let data = WeightedDataset::uniform(xs, ys).unwrap();
    let target = TargetSpec::FixedLabels;
    let objective = ExpectedLoss::new(&arch, &data, &target, LossKind::SquaredError).unwrap();
    c.bench_function("expected_loss_value_grad_1000", |b| b.iter(|| objective.value_grad(black_box(&theta)).unwrap()));
}

criterion_group!(benches, bench_forward_backward, bench_jets, bench_decomposition, bench_expected_loss);
criterion_main!(benches);

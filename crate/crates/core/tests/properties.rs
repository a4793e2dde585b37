use gfl_core::activation::ActivationKind;
use gfl_core::kolmogorov::relative_mse;
use gfl_core::loss::{expected_loss, loss_eval, DataPoint, LossKind, TargetSpec, WeightedDataset};
use gfl_core::network::{init_params, Architecture, InitScheme};
use gfl_core::optim::{minibatch_indices, EmaTracker, OptimizerKind, OptimizerState};
use gfl_core::poly::{build_poly_shallow, decompose_homogeneous, lattice, monomials_of_degree, Polynomial};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1u128, |acc, i| acc * (n - k + i) as u128 / i as u128) as u64
}

#[test]
fn lattice_size_matches_binomial() {
    for n in 0..=8 {
        for m in 0..=4 {
            assert_eq!(lattice(n, m).len() as u64, binomial(n as u64 + m as u64, m as u64), "n={n} m={m}");
        }
    }
}

#[test]
fn random_homogeneous_decompositions_reconstruct() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..50 {
        let m = rng.random_range(1..=3usize);
        let n = rng.random_range(1..=4u32);
        let terms = monomials_of_degree(m, n)
            .into_iter()
            .map(|mu| (mu.0, rng.random_range(-1.0..=1.0)))
            .collect::<Vec<_>>();
        let p = Polynomial::from_terms(m, terms).unwrap();
        let dec = decompose_homogeneous(&p).unwrap();
        assert!(dec.terms.len() as u64 <= binomial((n as usize + m - 1) as u64, (m - 1) as u64));
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for _ in 0..100 {
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let exact = p.eval(&x).unwrap();
            scale = scale.max(exact.abs());
            worst = worst.max((exact - dec.eval(&x)).abs());
        }
        assert!(worst <= 1e-8 * (1.0 + scale), "case {case}: m={m} n={n} residual {worst}");
    }
}

#[test]
fn loss_axiom_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in [LossKind::SquaredError, LossKind::Huber(0.7)] {
        for _ in 0..1000 {
            let d = rng.random_range(1..=4);
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let yhat: Vec<f64> = if rng.random_bool(0.3) {
                y.clone()
            } else {
                y.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect()
            };
            let l = loss_eval(kind, &yhat, &y).unwrap();
            assert!(l >= 0.0);
            assert_eq!(l == 0.0, yhat == y);
        }
    }
}

#[test]
fn convex_combination_is_linear_in_loss() {
    let arch = Architecture::new(vec![2, 5, 1], ActivationKind::Gelu).unwrap();
    let theta = init_params(&arch, InitScheme::GlorotUniform, 3).unwrap();
    let target = TargetSpec::Polynomial(vec![Polynomial::parse("x0*x1 + x1^2 - 1", 2).unwrap()]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut cloud = |n: usize| {
        WeightedDataset::uniform((0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect(), vec![])
            .unwrap()
    };
    let (a, b) = (cloud(13), cloud(7));
    for lambda in [0.0, 0.25, 0.5, 0.9, 1.0] {
        let mix = WeightedDataset::mix(&a, &b, lambda).unwrap();
        let la = expected_loss(&arch, &theta, &a, &target, LossKind::SquaredError).unwrap();
        let lb = expected_loss(&arch, &theta, &b, &target, LossKind::SquaredError).unwrap();
        let lm = expected_loss(&arch, &theta, &mix, &target, LossKind::SquaredError).unwrap();
        let expect = lambda * la + (1.0 - lambda) * lb;
        assert!((lm - expect).abs() <= 1e-12 * expect.abs(), "λ={lambda}");
    }
}

#[test]
fn single_point_and_two_point_measures() {
    let arch = Architecture::new(vec![1, 3, 1], ActivationKind::Tanh).unwrap();
    let theta = init_params(&arch, InitScheme::GlorotUniform, 1).unwrap();
    let point = |x: f64, y: f64, w: f64| DataPoint { x: vec![x], target: vec![y], weight: w };
    let single = WeightedDataset::new(vec![point(0.4, 2.0, 1.0)]).unwrap();
    let yhat = gfl_core::network::forward(&arch, &theta, &[0.4]).unwrap();
    let direct = loss_eval(LossKind::SquaredError, &yhat, &[2.0]).unwrap();
    let via = expected_loss(&arch, &theta, &single, &TargetSpec::FixedLabels, LossKind::SquaredError).unwrap();
    assert_eq!(via, direct);

    let two = WeightedDataset::new(vec![point(0.4, 2.0, 0.5), point(-0.1, -1.0, 0.5)]).unwrap();
    let yb = gfl_core::network::forward(&arch, &theta, &[-0.1]).unwrap();
    let b = loss_eval(LossKind::SquaredError, &yb, &[-1.0]).unwrap();
    let via = expected_loss(&arch, &theta, &two, &TargetSpec::FixedLabels, LossKind::SquaredError).unwrap();
    assert!((via - (direct + b) / 2.0).abs() < 1e-15);
}

#[test]
fn ema_tracks_geometric_streams() {
    for (limit, ratio) in [(0.0, 0.9), (2.5, 0.98), (-1.0, 0.5)] {
        let mut ema = EmaTracker::new(0.95).unwrap();
        let mut v = 0.0;
        for k in 0..1000 {
            v = ema.update(limit + 3.0 * f64::powi(ratio, k));
        }
        assert!((v - limit).abs() <= 1e-6, "limit {limit} ratio {ratio}: {v}");
    }
}

#[test]
fn adam_without_momentum_is_sign_descent() {
    let kind = OptimizerKind::Adam { lr: 0.01, beta1: 0.0, beta2: 0.0, eps: 1e-12 };
    let mut s = OptimizerState::new(kind, 3);
    let mut theta = vec![0.0; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let before = theta.clone();
        let g: Vec<f64> = (0..3)
            .map(|_| {
                let mag: f64 = rng.random_range(1.0..100.0);
                if rng.random_bool(0.5) { mag } else { -mag }
            })
            .collect();
        s.step(&mut theta, &g).unwrap();
        for ((a, b), gi) in theta.iter().zip(&before).zip(&g) {
            let update = b - a;
            assert!((update - 0.01 * gi.signum()).abs() < 1e-12);
        }
    }
}

#[test]
fn optimizer_runs_are_bit_identical() {
    let run = || {
        let mut s = OptimizerState::new(OptimizerKind::adam(0.01), 4);
        let mut theta = vec![0.5, -0.5, 1.0, 2.0];
        for step in 0..50u64 {
            let idx = minibatch_indices(100, 4, 9, step).unwrap();
            let g: Vec<f64> = theta.iter().zip(&idx).map(|(t, &i)| t * (i as f64 / 50.0 - 1.0)).collect();
            s.step(&mut theta, &g).unwrap();
        }
        theta
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn single_index_batches_are_uniform() {
    let mut counts = [0usize; 10];
    for step in 0..10_000u64 {
        counts[minibatch_indices(10, 1, 42, step).unwrap()[0]] += 1;
    }
    // binomial(10^4, 0.1): σ = 30
    for c in counts {
        assert!((c as f64 - 1000.0).abs() <= 4.0 * 30.0, "{counts:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn builder_respects_width_bound(
        m in 1usize..=2,
        coeffs in prop::collection::vec(-2.0f64..2.0, 10),
        degree in 0u32..=3,
    ) {
        let mut terms = Vec::new();
        let mut it = coeffs.into_iter();
        for d in 0..=degree {
            for mu in monomials_of_degree(m, d) {
                if let Some(c) = it.next() {
                    terms.push((mu.0, c));
                }
            }
        }
        let p = Polynomial::from_terms(m, terms).unwrap();
        let n = p.degree() as u64;
        match build_poly_shallow(ActivationKind::Tanh, &[p], 10.0) {
            Ok(net) => {
                let bound = binomial(n + m as u64, m as u64).saturating_sub(m as u64).max(1);
                prop_assert!(net.width() as u64 <= bound, "width {} > {bound}", net.width());
            }
            Err(gfl_core::Error::IllConditioned { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn relative_mse_is_scale_invariant(
        refs in prop::collection::vec(0.1f64..10.0, 1..20),
        noise in prop::collection::vec(-1.0f64..1.0, 20),
        scale in 1e-3f64..1e3,
    ) {
        let preds: Vec<f64> = refs.iter().zip(&noise).map(|(r, e)| r + e).collect();
        let a = relative_mse(&preds, &refs).unwrap();
        let sp: Vec<f64> = preds.iter().map(|v| v * scale).collect();
        let sr: Vec<f64> = refs.iter().map(|v| v * scale).collect();
        let b = relative_mse(&sp, &sr).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn polynomial_text_round_trips(coeffs in prop::collection::vec(-5.0f64..5.0, 1..6)) {
        let terms: Vec<(Vec<u32>, f64)> = coeffs.iter().enumerate().map(|(i, &c)| (vec![i as u32, (i % 2) as u32], c)).collect();
        let p = Polynomial::from_terms(2, terms).unwrap();
        prop_assert_eq!(Polynomial::parse(&p.to_string(), 2).unwrap(), p);
    }
}

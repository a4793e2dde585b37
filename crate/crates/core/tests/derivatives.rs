use gfl_core::loss::{loss_eval, loss_grad};
use gfl_core::network::{forward, forward_backward, init_params, Architecture, InitScheme, ParameterVector};
use gfl_core::{ActivationKind, LossKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Worst per-coordinate relative error between backprop and central differences.
fn worst_gradient_error(kind: ActivationKind, loss: LossKind, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = Architecture::new(vec![2, 4, 3, 1], kind).unwrap();
    let mut theta = init_params(&arch, InitScheme::Normal { mean: 0.0, std: 0.5 }, seed).unwrap();
    let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let y = match loss {
        LossKind::BinaryCrossEntropy => {
            // keep the response inside (0, 1)
            let n = theta.len();
            let data = theta.as_mut_slice();
            data[n - 4..n - 1].iter_mut().for_each(|w| *w *= 0.05);
            data[n - 1] = 0.5;
            [rng.random_range(0.0..1.0)]
        }
        _ => [rng.random_range(-2.0..2.0)],
    };
    let value = |t: &ParameterVector| loss_eval(loss, &forward(&arch, t, &x).unwrap(), &y).unwrap();
    let yhat = forward(&arch, &theta, &x).unwrap();
    let (_, grad) = forward_backward(&arch, &theta, &x, &loss_grad(loss, &yhat, &y).unwrap()).unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        tp.as_mut_slice()[i] += h;
        tm.as_mut_slice()[i] -= h;
        let fd = (value(&tp) - value(&tm)) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / fd.abs().max(grad[i].abs()).max(1e-3));
    }
    worst
}

#[test]
fn backprop_matches_finite_differences() {
    for kind in ActivationKind::ALL {
        for loss in LossKind::SCALAR_CATALOG {
            for seed in 0..10 {
                let e = worst_gradient_error(kind, loss, seed);
                assert!(e <= 1e-5, "{kind} {loss} seed {seed}: {e}");
            }
        }
    }
}

#[test]
fn maclaurin_coefficients() {
    let tanh = ActivationKind::Tanh.jet(0.0, 5).unwrap();
    for (c, e) in tanh.coeffs.iter().zip([0.0, 1.0, 0.0, -1.0 / 3.0, 0.0, 2.0 / 15.0]) {
        assert!((c - e).abs() <= 1e-10);
    }
    let logistic = ActivationKind::Logistic.jet(0.0, 2).unwrap();
    for (c, e) in logistic.coeffs.iter().zip([0.5, 0.25, 0.0]) {
        assert!((c - e).abs() <= 1e-10);
    }
}

#[test]
fn low_order_jets_match_finite_differences() {
    for kind in ActivationKind::ANALYTIC {
        for x0 in [-1.3, -0.2, 0.4, 2.1] {
            let jet = kind.jet(x0, 3).unwrap();
            let central = |h: f64| {
                let f = |k: i32| kind.eval(x0 + k as f64 * h);
                [
                    (f(1) - f(-1)) / (2.0 * h),
                    (f(1) - 2.0 * f(0) + f(-1)) / (h * h),
                    (f(2) - 2.0 * f(1) + 2.0 * f(-1) - f(-2)) / (2.0 * h * h * h),
                ]
            };
            let (coarse, fine) = (central(1e-2), central(5e-3));
            let fd: [f64; 3] = std::array::from_fn(|k| (4.0 * fine[k] - coarse[k]) / 3.0);
            for (k, d) in fd.iter().enumerate() {
                let got = jet.derivative(k + 1);
                let rel = (got - d).abs() / d.abs().max(1e-2);
                assert!(rel <= 1e-5, "{kind} at {x0}, order {}: {got} vs {d}", k + 1);
            }
        }
    }
}

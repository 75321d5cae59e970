use homotopy_opt::data::{gen_linear_toy, gen_moons, gen_sine};
use homotopy_opt::diagnostics::{estimate_delta, GaussianSampler};
use homotopy_opt::problems::{
    erf, CubicLogistic, ErfRegression, LinearQuadratic, MlpSine, HIDDEN, MLP_DIM,
};
use homotopy_opt::{HomotopyProblem, ParamVector, Stream};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Mean squared error of the 1-10-10-1 tanh network, written out without
/// any of the library's helpers.
fn mlp_mse(p: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    let (w1, rest) = p.split_at(HIDDEN);
    let (b1, rest) = rest.split_at(HIDDEN);
    let (w2, rest) = rest.split_at(HIDDEN * HIDDEN);
    let (b2, rest) = rest.split_at(HIDDEN);
    let (w3, b3) = rest.split_at(HIDDEN);
    let mut total = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let h1: Vec<f64> = (0..HIDDEN).map(|i| (w1[i] * x + b1[i]).tanh()).collect();
        let h2: Vec<f64> = (0..HIDDEN)
            .map(|i| {
                let mut s = b2[i];
                for j in 0..HIDDEN {
                    s += w2[i * HIDDEN + j] * h1[j];
                }
                s.tanh()
            })
            .collect();
        let mut out = b3[0];
        for i in 0..HIDDEN {
            out += w3[i] * h2[i];
        }
        total += (y - out) * (y - out);
    }
    total / xs.len() as f64
}

fn bce(c: &[f64], feats: &[Vec<f64>], labels: &[f64], cubic: bool) -> f64 {
    let mut total = 0.0;
    for (x, &y) in feats.iter().zip(labels) {
        let (a, b) = (x[0], x[1]);
        let mut z = c[6] * a + c[7] * b + c[8];
        if cubic {
            z += c[0] * a.powi(3)
                + c[1] * b.powi(3)
                + c[2] * a * a
                + c[3] * b * b
                + c[4] * a * a * b
                + c[5] * a * b * b;
        }
        let p = 1.0 / (1.0 + (-z).exp());
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    total / labels.len() as f64
}

#[test]
fn endpoints_match_source_and_target_objectives() {
    let mut rng = Stream::new(1);
    let toy = gen_linear_toy(100, 3.0, 1.0, 4).unwrap();
    let erf_p = toy.erf_problem(-4.0).unwrap();
    let xs = toy.xs();
    let sine = gen_sine(60, 10.0, 0.3, 0.1, 4).unwrap();
    let mlp = sine.mlp_problem().unwrap();
    let src = sine.source_targets.clone().unwrap();
    let moons = gen_moons(80, 0.1, 4).unwrap();
    let logistic = moons.logistic_problem().unwrap();

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w = rng.uniform_range(-6.0, 6.0);
        let target: f64 = xs
            .iter()
            .zip(&toy.targets)
            .map(|(x, y)| (y - erf(w * x)).powi(2))
            .sum::<f64>()
            / 100.0;
        let source: f64 = xs
            .iter()
            .map(|x| (-4.0 * x - erf(w * x)).powi(2))
            .sum::<f64>()
            / 100.0;
        let pw = ParamVector::scalar(w);
        worst = worst.max(rel(erf_p.full_objective(&pw, 1.0), target));
        worst = worst.max(rel(erf_p.full_objective(&pw, 0.0), source));

        let p = MlpSine::init_params(&mut rng);
        let sx = sine.xs();
        worst = worst.max(rel(
            mlp.full_objective(&p, 1.0),
            mlp_mse(p.as_slice(), &sx, &sine.targets),
        ));
        worst = worst.max(rel(
            mlp.full_objective(&p, 0.0),
            mlp_mse(p.as_slice(), &sx, &src),
        ));

        let c: Vec<f64> = (0..9).map(|_| 0.5 * rng.normal()).collect();
        let pc = ParamVector::new(c.clone());
        worst = worst.max(rel(
            logistic.full_objective(&pc, 1.0),
            bce(&c, &moons.inputs, &moons.targets, true),
        ));
        worst = worst.max(rel(
            logistic.full_objective(&pc, 0.0),
            bce(&c, &moons.inputs, &moons.targets, false),
        ));
    }
    assert!(worst < 1e-12, "worst relative endpoint error {worst:e}");
}

#[test]
fn full_index_minibatch_equals_full_gradient() {
    let toy = gen_linear_toy(30, 3.0, 1.0, 2).unwrap();
    let erf_p = toy.erf_problem(-4.0).unwrap();
    let all: Vec<usize> = (0..30).collect();
    let w = ParamVector::scalar(1.3);
    let (_, g) = erf_p.minibatch_value_and_gradient(&w, 0.4, &all);
    let full = erf_p.full_gradient(&w, 0.4);
    assert!(rel(g[0], full[0]) <= 1e-12);
}

#[test]
fn mlp_objective_is_quadratic_in_lambda() {
    let sine = gen_sine(100, 10.0, 0.3, 0.1, 9).unwrap();
    let mlp = sine.mlp_problem().unwrap();
    let mut rng = Stream::new(3);
    for _ in 0..10 {
        let w = MlpSine::init_params(&mut rng);
        let f = |l: f64| mlp.full_objective(&w, l);
        let (f0, f1, f2) = (f(0.0), f(1.0 / 3.0), f(2.0 / 3.0));
        // Lagrange extrapolation through λ = 0, 1/3, 2/3 to λ = 1
        let predicted = f0 - 3.0 * f1 + 3.0 * f2;
        assert!(
            (predicted - f(1.0)).abs() <= 1e-10,
            "{predicted} vs {}",
            f(1.0)
        );
    }
}

#[test]
fn logistic_nonlinear_gradient_is_linear_in_lambda_at_zero() {
    let moons = gen_moons(50 * 2, 0.1, 1).unwrap();
    let p = moons.logistic_problem().unwrap();
    let c = ParamVector::zeros(9);
    let g1 = p.full_gradient(&c, 1.0);
    for lambda in [0.0, 0.25, 0.7] {
        let g = p.full_gradient(&c, lambda);
        for i in 0..6 {
            assert!((g[i] - lambda * g1[i]).abs() <= 1e-15);
        }
        for i in 6..9 {
            assert_eq!(g[i], g1[i]);
        }
        assert!((p.full_objective(&c, lambda) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}

#[test]
fn mlp_zero_parameters_gradient_pattern() {
    let xs = vec![-0.5, 0.1, 0.8];
    let yt = vec![0.3, -0.2, 0.9];
    let ys = vec![0.25, 0.01, 0.64];
    let p = MlpSine::new(xs, yt.clone(), ys.clone()).unwrap();
    let lambda = 0.3;
    let (f, g) = p.full_value_and_gradient(&ParamVector::zeros(MLP_DIM), lambda);
    let labels: Vec<f64> = yt
        .iter()
        .zip(&ys)
        .map(|(t, s)| lambda * t + (1.0 - lambda) * s)
        .collect();
    let expected_f = labels.iter().map(|y| y * y).sum::<f64>() / 3.0;
    assert!((f - expected_f).abs() < 1e-15);
    assert!(g.iter().take(MLP_DIM - 1).all(|v| *v == 0.0));
    let expected_bias = -2.0 / 3.0 * labels.iter().sum::<f64>();
    assert!((g[MLP_DIM - 1] - expected_bias).abs() < 1e-15);
}

#[test]
fn lambda_regularity_constant_is_finite_and_stable() {
    let toy = gen_linear_toy(100, 3.0, 1.0, 0).unwrap();
    let erf_p = toy.erf_problem(-4.0).unwrap();
    let sine = gen_sine(100, 10.0, 0.3, 0.1, 0).unwrap();
    let mlp = sine.mlp_problem().unwrap();
    let moons = gen_moons(100, 0.1, 0).unwrap();
    let logistic = moons.logistic_problem().unwrap();
    let lq = LinearQuadratic::new(1.0, vec![0.1, -0.1, 0.2, -0.2]).unwrap();

    fn stable<P: HomotopyProblem>(p: &P, mean: ParamVector) {
        let sampler = GaussianSampler { mean, std: 1.0 };
        let small = estimate_delta(p, &sampler, 100, &mut Stream::new(1)).unwrap();
        let large = estimate_delta(p, &sampler, 1000, &mut Stream::new(2)).unwrap();
        assert!(small.is_finite() && large.is_finite() && small > 0.0);
        assert!(
            large / small < 3.0 && small / large < 3.0,
            "{small} vs {large}"
        );
    }
    stable(&erf_p, ParamVector::zeros(1));
    stable(&mlp, MlpSine::init_params(&mut Stream::new(5)));
    stable(&logistic, ParamVector::zeros(9));
    stable(&lq, ParamVector::zeros(1));
}

#[test]
fn zero_residual_erf_is_stationary() {
    let xs: Vec<f64> = (0..20).map(|i| -1.0 + 0.1 * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| erf(1.7 * x)).collect();
    let p = ErfRegression::with_linear_source(xs, ys, 0.0).unwrap();
    let (f, g) = p.full_value_and_gradient(&ParamVector::scalar(1.7), 1.0);
    assert_eq!(f, 0.0);
    assert_eq!(g[0], 0.0);
}

#[test]
fn cubic_model_examples() {
    let ones = ParamVector::new(vec![1.0; 9]);
    assert_eq!(CubicLogistic::model(&ones, [1.0, 2.0], 0.0), 4.0);
    assert_eq!(CubicLogistic::model(&ones, [1.0, 2.0], 1.0), 24.0);
}

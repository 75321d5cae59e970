//! Fixtures shared by the benchmarks in `benches/`.

use homotopy_opt::data::{gen_linear_toy, gen_sine};
use homotopy_opt::problems::{ErfRegression, LinearQuadratic, MlpSine};
use homotopy_opt::{ParamVector, Stream};

/// Default toy regression: 100 points, slope 3, unit noise.
pub fn toy_problem() -> ErfRegression {
    gen_linear_toy(100, 3.0, 1.0, 0)
        .and_then(|d| d.erf_problem(-4.0))
        .expect("toy defaults are valid")
}

/// Sine regression network with its seeded initial parameters.
pub fn sine_problem(n: usize) -> (MlpSine, ParamVector) {
    let problem = gen_sine(n, 10.0, 0.1f64.sqrt(), 0.1, 0)
        .and_then(|d| d.mlp_problem())
        .expect("sine defaults are valid");
    (problem, MlpSine::init_params(&mut Stream::new(0)))
}

/// Linear-quadratic family with `n` offsets spread over `[-0.2, 0.2]`.
pub fn lq_problem(n: usize) -> LinearQuadratic {
    let offsets = (0..n)
        .map(|i| -0.2 + 0.4 * i as f64 / (n.max(2) - 1) as f64)
        .collect();
    LinearQuadratic::new(1.0, offsets).expect("valid offsets")
}

#[cfg(test)]
mod tests {
    use homotopy_opt::HomotopyProblem;

    use super::*;

    #[test]
    fn fixtures_have_expected_sizes() {
        assert_eq!(toy_problem().sample_count(), 100);
        let (p, w) = sine_problem(50);
        assert_eq!((p.sample_count(), w.dim()), (50, p.dim()));
        assert_eq!(lq_problem(10).sample_count(), 10);
    }
}

use nashseek_core::estimators::{empirical_bias_variance, single_shot_gradient, spsa_gradient};
use nashseek_core::oracle::fit_rate_slope;
use nashseek_core::{EstimatorKind, Stream, StreamRng};
use rand::Rng;

const A: [[f64; 4]; 4] = [
    [3.0, 0.5, 0.0, 0.2],
    [0.5, 2.0, 0.3, 0.0],
    [0.0, 0.3, 1.5, 0.4],
    [0.2, 0.0, 0.4, 1.0],
];
const B: [f64; 4] = [1.0, -2.0, 0.5, 0.0];

fn quadratic(x: &[f64]) -> f64 {
    let mut v = 0.0;
    for i in 0..4 {
        v += B[i] * x[i];
        for j in 0..4 {
            v += 0.5 * A[i][j] * x[i] * x[j];
        }
    }
    v
}

fn quadratic_gradient(x: &[f64]) -> Vec<f64> {
    (0..4).map(|i| B[i] + (0..4).map(|j| A[i][j] * x[j]).sum::<f64>()).collect()
}

fn noisy_quadratic(x: &[f64], rng: &mut StreamRng) -> f64 {
    quadratic(x) + rng.random_range(-1.0..1.0)
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[test]
fn spsa_is_unbiased_on_a_noisy_quadratic() {
    let x = [0.3, -0.2, 0.7, 1.1];
    let g = quadratic_gradient(&x);
    let report =
        empirical_bias_variance(EstimatorKind::Spsa, noisy_quadratic, &x, &g, 0.1, 1, 20_000, Stream::new(9)).unwrap();
    assert!(report.max_bias_z() < 4.0, "{:?}", report.bias);
    assert_eq!(report.evals_per_estimate, 2);
}

#[test]
fn noiseless_quadratic_single_direction_is_exact_in_mean_over_signs() {
    // averaging over all 16 sign patterns removes the off-diagonal terms exactly
    let x = [0.3, -0.2, 0.7, 1.1];
    let g = quadratic_gradient(&x);
    let h = 0.25;
    let mut mean = [0.0; 4];
    for bits in 0..16u32 {
        let delta: Vec<f64> = (0..4).map(|k| if bits >> k & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let plus: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| v + h * d).collect();
        let minus: Vec<f64> = x.iter().zip(&delta).map(|(v, d)| v - h * d).collect();
        let q = (quadratic(&plus) - quadratic(&minus)) / (2.0 * h);
        for k in 0..4 {
            mean[k] += q * delta[k] / 16.0;
        }
    }
    for k in 0..4 {
        assert!((mean[k] - g[k]).abs() < 1e-12);
    }
}

#[test]
fn cubic_bias_scales_with_h_squared() {
    let cube = |x: &[f64], _: &mut StreamRng| x[0].powi(3);
    for h in [0.05, 0.1, 0.2] {
        let r = empirical_bias_variance(EstimatorKind::Spsa, cube, &[1.0], &[3.0], h, 1, 10_000, Stream::new(2)).unwrap();
        let ratio = r.bias[0] / (h * h);
        assert!((0.85..=1.15).contains(&ratio), "h = {h}: ratio {ratio}");
    }
}

#[test]
fn spsa_variance_falls_like_one_over_ell() {
    let x = [0.0; 4];
    let ells = [1usize, 2, 4, 8, 16, 32, 64];
    let g = quadratic_gradient(&x);
    let vars: Vec<f64> = ells
        .iter()
        .map(|&ell| {
            empirical_bias_variance(EstimatorKind::Spsa, noisy_quadratic, &x, &g, 0.1, ell, 4000, Stream::new(ell as u64))
                .unwrap()
                .empirical_variance
        })
        .collect();
    let ells_f: Vec<f64> = ells.iter().map(|&e| e as f64).collect();
    let slope = log_slope(&ells_f, &vars);
    assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
}

#[test]
fn spsa_variance_falls_like_h_squared_when_noise_dominates() {
    // at the minimiser the gradient term vanishes and only noise / h^2 remains
    let x = [0.0; 4];
    let flat = |x: &[f64], rng: &mut StreamRng| 0.5 * x.iter().map(|v| v * v).sum::<f64>() + rng.random_range(-1.0..1.0);
    let hs = [0.02, 0.04, 0.08, 0.16, 0.32];
    let vars: Vec<f64> = hs
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            empirical_bias_variance(EstimatorKind::Spsa, flat, &x, &[0.0; 4], h, 1, 4000, Stream::new(100 + k as u64))
                .unwrap()
                .empirical_variance
        })
        .collect();
    let slope = log_slope(&hs, &vars);
    assert!((slope + 2.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn single_shot_on_a_constant_has_zero_mean_and_h_squared_variance() {
    let constant = |_: &[f64], _: &mut StreamRng| 2.0;
    let x = [0.2, 0.3, 0.5];
    let var_at = |h: f64| {
        let r = empirical_bias_variance(EstimatorKind::SingleShot, constant, &x, &[0.0; 3], h, 1, 20_000, Stream::new(4))
            .unwrap();
        assert!(r.max_bias_z() < 4.0);
        r.empirical_variance
    };
    // |estimate| = m c / h on every draw, so the ratio is 4 up to sampling error
    let ratio = var_at(0.05) / var_at(0.1);
    assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}");
}

#[test]
fn single_shot_in_one_dimension_uses_signs() {
    let f = |x: &[f64], _: &mut StreamRng| x[0];
    for k in 0..100 {
        let (est, played) = single_shot_gradient(f, &[0.5], |p| p.to_vec(), 0.1, Stream::new(k)).unwrap();
        let z = (played[0] - 0.5) / 0.1;
        assert!((z.abs() - 1.0).abs() < 1e-12);
        assert_eq!(est.eval_count, 1);
    }
}

#[test]
fn estimates_replay_from_their_stream() {
    let x = [0.1, 0.2, 0.3, 0.4];
    let a = spsa_gradient(noisy_quadratic, &x, 0.1, 7, Stream::new(77)).unwrap();
    let b = spsa_gradient(noisy_quadratic, &x, 0.1, 7, Stream::new(77)).unwrap();
    let c = spsa_gradient(noisy_quadratic, &x, 0.1, 7, Stream::new(78)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.vector, c.vector);
    assert_eq!(a.eval_count, 14);
}

#[test]
fn rate_fits_recover_synthetic_slopes() {
    let exact: Vec<f64> = (1..=10_000).map(|n| 7.0 / n as f64).collect();
    let fit = fit_rate_slope(&exact, None).unwrap();
    assert!((fit.slope + 1.0).abs() < 1e-6);
    assert!(fit.r_squared > 0.999999);

    let mut rng = Stream::new(3).rng();
    let noisy: Vec<f64> = (1..=10_000)
        .map(|n| (n as f64).powf(-0.5) * (1.0 + 0.1 * rng.random_range(-1.0..1.0)))
        .collect();
    let fit = fit_rate_slope(&noisy, None).unwrap();
    assert!((fit.slope + 0.5).abs() < 0.05, "{}", fit.slope);
}

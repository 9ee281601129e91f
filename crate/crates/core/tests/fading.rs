//! Monte-Carlo moment checks of the fading generators, 3 standard errors.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riswpt_core::channel::{rayleigh_matrix, rician_matrix};
use riswpt_core::model::CMatrix;

const DRAWS: usize = 100_000;

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn within(value: f64, expected: f64, se: f64) -> bool {
    (value - expected).abs() <= 3.0 * se
}

#[test]
fn rayleigh_parts_are_zero_mean_with_half_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = rayleigh_matrix(DRAWS, 1, &mut rng);
    for part in [|z: &Complex64| z.re, |z: &Complex64| z.im] {
        let (mean, se) = mean_and_se(w.iter().map(part));
        assert!(within(mean, 0.0, se), "mean {mean}");
        let (var, se) = mean_and_se(w.iter().map(|z| part(z).powi(2)));
        assert!(within(var, 0.5, se), "variance {var}");
    }
}

#[test]
fn rayleigh_magnitude_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = rayleigh_matrix(DRAWS, 1, &mut rng);
    let (mean, se) = mean_and_se(w.iter().map(|z| z.norm()));
    assert!(within(mean, std::f64::consts::PI.sqrt() / 2.0, se), "{mean}");
}

#[test]
fn zero_factor_rician_is_unit_variance_gaussian() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let los = CMatrix::from_element(DRAWS, 1, Complex64::new(1.0, 0.0));
    let h = rician_matrix(DRAWS, 1, 0.0, &los, &mut rng).unwrap();
    let (re, se_re) = mean_and_se(h.iter().map(|z| z.re));
    let (im, se_im) = mean_and_se(h.iter().map(|z| z.im));
    assert!(within(re, 0.0, se_re) && within(im, 0.0, se_im));
    let (power, se) = mean_and_se(h.iter().map(|z| z.norm_sqr()));
    assert!(within(power, 1.0, se), "{power}");
}

#[test]
fn factor_two_splits_power_two_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let los = CMatrix::from_element(DRAWS, 1, Complex64::from_polar(1.0, 0.7));
    let h = rician_matrix(DRAWS, 1, 2.0, &los, &mut rng).unwrap();
    let n = DRAWS as f64;
    let mean: Complex64 = h.iter().sum::<Complex64>() / n;
    let los_power = mean.norm_sqr();
    let scatter = h.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    // the sample mean has standard error sqrt(1/3 / n) per complex entry
    let mean_se = (1.0 / 3.0 / n).sqrt();
    assert!((mean - los[0] * (2.0f64 / 3.0).sqrt()).norm() <= 3.0 * mean_se);
    let (_, scatter_se) = mean_and_se(h.iter().map(|z| (z - mean).norm_sqr()));
    assert!(within(scatter, 1.0 / 3.0, scatter_se), "{scatter}");
    assert!((los_power / scatter - 2.0).abs() < 0.05, "{}", los_power / scatter);
}

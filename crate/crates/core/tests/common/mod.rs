#![allow(dead_code)]

use bcfb::{build_problem, make_filter_bank, DegradationSpec, Problem, WaveletFamily};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Blocky test image in [0, 1].
pub fn blocky(side: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = Array2::<f64>::from_elem((side, side), 0.4);
    for _ in 0..6 {
        let (i0, j0) = (rng.random_range(0..side), rng.random_range(0..side));
        let (h, w) = (rng.random_range(1..=side / 2), rng.random_range(1..=side / 2));
        let v: f64 = rng.random_range(-0.3..0.4);
        for i in i0..(i0 + h).min(side) {
            for j in j0..(j0 + w).min(side) {
                img[[i, j]] = (img[[i, j]] + v).clamp(0.0, 1.0);
            }
        }
    }
    img
}

pub fn random_image(side: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((side, side), |_| rng.random_range(-1.0..1.0))
}

pub fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn problem(side: usize, levels: usize, order: usize, sigma_blur: f64, sigma_noise: f64, lambda: f64) -> Problem {
    let bank = make_filter_bank(WaveletFamily::Daubechies, order).unwrap();
    let spec = DegradationSpec::new(sigma_blur, sigma_noise, 17).unwrap();
    build_problem(&blocky(side, 5), &spec, levels, &bank, lambda, 1.9).unwrap()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

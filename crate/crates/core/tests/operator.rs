#![allow(clippy::needless_range_loop)]

mod common;

use bcfb::{gaussian_kernel, operator_norm, GaussianBlur};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn inner(a: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// max_{u,v} |DFT2(psf)(u, v)| for the separable kernel wrapped onto the
/// periodic grid, by a direct O(n^3) transform.
fn dft_norm(sigma: f64, side: usize) -> f64 {
    let taps = gaussian_kernel(sigma).unwrap();
    let r = (taps.len() - 1) / 2;
    let mut psf = vec![vec![0.0; side]; side];
    for (a, ka) in taps.iter().enumerate() {
        for (b, kb) in taps.iter().enumerate() {
            let i = (a as isize - r as isize).rem_euclid(side as isize) as usize;
            let j = (b as isize - r as isize).rem_euclid(side as isize) as usize;
            psf[i][j] += ka * kb;
        }
    }
    let tau = std::f64::consts::TAU;
    // rows first, then columns
    let mut rows = vec![vec![(0.0, 0.0); side]; side];
    for i in 0..side {
        for v in 0..side {
            let (mut re, mut im) = (0.0, 0.0);
            for j in 0..side {
                let t = -tau * (v * j) as f64 / side as f64;
                re += psf[i][j] * t.cos();
                im += psf[i][j] * t.sin();
            }
            rows[i][v] = (re, im);
        }
    }
    let mut best: f64 = 0.0;
    for u in 0..side {
        for v in 0..side {
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..side {
                let t = -tau * (u * i) as f64 / side as f64;
                let (c, s) = (t.cos(), t.sin());
                let (a, b) = rows[i][v];
                re += a * c - b * s;
                im += a * s + b * c;
            }
            best = best.max((re * re + im * im).sqrt());
        }
    }
    best
}

#[test]
fn power_iteration_matches_dft_norm() {
    for sigma in [1.0, 4.0, 7.0, 15.0] {
        let op = GaussianBlur::new(sigma, 64).unwrap();
        let est = operator_norm(&op, 1e-12, 200_000).unwrap();
        let exact = dft_norm(sigma, 64);
        assert!((est - exact).abs() <= 1e-6 * exact, "sigma {sigma}: {est} vs {exact}");
    }
}

#[test]
fn adjoint_identity_over_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..100 {
        let sigma = 1.0 + 14.0 * (k as f64 / 99.0);
        let op = GaussianBlur::new(sigma, 32).unwrap();
        let (x, y) = (common::random_image(32, &mut rng), common::random_image(32, &mut rng));
        let lhs = inner(&op.apply(&x).unwrap(), &y);
        let rhs = inner(&x, &op.adjoint(&y).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "pair {k}: {lhs} vs {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear(sigma in 0.5f64..15.0, a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = GaussianBlur::new(sigma, 16).unwrap();
        let (x, y) = (common::random_image(16, &mut rng), common::random_image(16, &mut rng));
        let lhs = op.apply(&(&x * a + &y * b)).unwrap();
        let rhs = op.apply(&x).unwrap() * a + op.apply(&y).unwrap() * b;
        prop_assert!(lhs.iter().zip(&rhs).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn norm_bounds_every_image(sigma in 0.5f64..15.0, seed in any::<u64>()) {
        let op = GaussianBlur::new(sigma, 16).unwrap();
        let norm = operator_norm(&op, 1e-12, 200_000).unwrap();
        let x = common::random_image(16, &mut ChaCha8Rng::seed_from_u64(seed));
        let ax = op.apply(&x).unwrap();
        prop_assert!(inner(&ax, &ax).sqrt() <= norm * inner(&x, &x).sqrt() * (1.0 + 1e-9));
        // a nonnegative normalized kernel never amplifies
        prop_assert!(norm <= 1.0 + 1e-12);
    }
}

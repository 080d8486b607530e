//! Seeded piecewise-smooth test images with values in `[0, 1]`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth background, a few large shapes with sharp edges, small bright
/// features and a mild oscillating texture.
pub fn piecewise_smooth(side: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = side as f64;
    let (base, gx, gy) = (rng.random_range(0.3..0.6), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
    let mut img = Array2::from_shape_fn((side, side), |(i, j)| base + gx * (j as f64 / s - 0.5) + gy * (i as f64 / s - 0.5));

    let shapes = rng.random_range(6..12);
    for _ in 0..shapes {
        let (ci, cj) = (rng.random_range(0.0..s), rng.random_range(0.0..s));
        let (ri, rj) = (rng.random_range(0.05..0.3) * s, rng.random_range(0.05..0.3) * s);
        let level = rng.random_range(-0.35..0.35);
        let slope = rng.random_range(-0.2..0.2) / s;
        let ellipse = rng.random_bool(0.5);
        img.indexed_iter_mut().for_each(|((i, j), v)| {
            let (di, dj) = ((i as f64 - ci) / ri, (j as f64 - cj) / rj);
            let inside = if ellipse { di * di + dj * dj <= 1.0 } else { di.abs() <= 1.0 && dj.abs() <= 1.0 };
            if inside {
                *v += level + slope * (i as f64 - ci);
            }
        });
    }

    let dots = rng.random_range(10..30);
    for _ in 0..dots {
        let (ci, cj) = (rng.random_range(0.0..s), rng.random_range(0.0..s));
        let r = rng.random_range(0.5..2.5);
        let level = rng.random_range(-0.3..0.3);
        img.indexed_iter_mut().for_each(|((i, j), v)| {
            let d = (i as f64 - ci).powi(2) + (j as f64 - cj).powi(2);
            if d <= r * r {
                *v += level;
            }
        });
    }

    let (fi, fj) = (rng.random_range(2.0..12.0), rng.random_range(2.0..12.0));
    let amp = rng.random_range(0.0..0.05);
    img.indexed_iter_mut().for_each(|((i, j), v)| {
        let phase = std::f64::consts::TAU * (fi * i as f64 + fj * j as f64) / s;
        *v = (*v + amp * phase.sin()).clamp(0.0, 1.0);
    });
    img
}

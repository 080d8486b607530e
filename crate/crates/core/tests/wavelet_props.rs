mod common;

use bcfb::{forward_dwt2, inverse_dwt2, make_filter_bank, BlockLayout, CoeffVector, WaveletFamily};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bank_strategy() -> impl Strategy<Value = (WaveletFamily, usize)> {
    prop_oneof![Just((WaveletFamily::Haar, 1)), (1usize..=10).prop_map(|o| (WaveletFamily::Daubechies, o))]
}

fn sq(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_and_reconstruction(bank in bank_strategy(), side_log in 2u32..=6, levels in 1usize..=4, seed in any::<u64>()) {
        let side = 1usize << side_log;
        prop_assume!(side >> levels >= 1);
        let bank = make_filter_bank(bank.0, bank.1).unwrap();
        let x = common::random_image(side, &mut ChaCha8Rng::seed_from_u64(seed));
        let w = forward_dwt2(&x, levels, &bank).unwrap();
        let ex = sq(x.iter().copied());
        prop_assert!((sq(w.data().iter().copied()) - ex).abs() <= 1e-10 * ex);
        let back = inverse_dwt2(&w, &bank).unwrap();
        let err = sq(back.iter().zip(&x).map(|(a, b)| a - b));
        prop_assert!(err.sqrt() <= 1e-10 * ex.sqrt());
    }

    #[test]
    fn synthesis_is_the_adjoint_of_analysis(order in 1usize..=10, levels in 1usize..=3, seed in any::<u64>()) {
        let bank = make_filter_bank(WaveletFamily::Daubechies, order).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = BlockLayout::new(32, levels).unwrap();
        let x = common::random_image(32, &mut rng);
        let w = CoeffVector::from_vec(&layout, common::random_vec(layout.len(), &mut rng)).unwrap();
        let lhs = forward_dwt2(&x, levels, &bank).unwrap().dot(&w);
        let rhs: f64 = x.iter().zip(inverse_dwt2(&w, &bank).unwrap().iter()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn reconstruction_from_arbitrary_coefficients(order in 1usize..=10, seed in any::<u64>()) {
        // W is square and orthonormal, so W (W^T w) = w as well
        let bank = make_filter_bank(WaveletFamily::Daubechies, order).unwrap();
        let layout = BlockLayout::new(16, 2).unwrap();
        let w = CoeffVector::from_vec(&layout, common::random_vec(layout.len(), &mut ChaCha8Rng::seed_from_u64(seed))).unwrap();
        let again = forward_dwt2(&inverse_dwt2(&w, &bank).unwrap(), 2, &bank).unwrap();
        prop_assert!(common::rel_diff(again.data(), w.data()) < 1e-12);
    }
}

#[test]
fn transform_matrix_is_orthogonal() {
    // explicit matrix of W on 8x8 images, checked column by column
    let bank = make_filter_bank(WaveletFamily::Daubechies, 2).unwrap();
    let n = 64;
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut e = ndarray::Array2::zeros((8, 8));
            e[[k / 8, k % 8]] = 1.0;
            forward_dwt2(&e, 2, &bank).unwrap().into_vec()
        })
        .collect();
    for a in 0..n {
        for b in 0..n {
            let d: f64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum();
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((d - expect).abs() < 1e-12, "({a},{b}) -> {d}");
        }
    }
}

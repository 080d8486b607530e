//! Proximal operators of the block-separable regularizer
//! `g(w) = sum_i g_i(w_i)`, with `g_i = lambda ||.||_1` on penalized blocks and
//! `g_i = 0` elsewhere.

use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::wavelet::CoeffVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    pub lambda: f64,
    /// One flag per block; block 0 (approximation) is unpenalized by default.
    pub penalize_block: Vec<bool>,
}

impl RegularizerSpec {
    /// Shared `lambda` on every detail block, none on the approximation.
    pub fn l1_details(lambda: f64, levels: usize) -> Result<Self> {
        let penalize_block = (0..=levels).map(|i| i > 0).collect();
        Self::new(lambda, penalize_block)
    }

    pub fn new(lambda: f64, penalize_block: Vec<bool>) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {lambda}")));
        }
        Ok(Self { lambda, penalize_block })
    }

    pub fn is_penalized(&self, block: usize) -> bool {
        self.penalize_block.get(block).copied().unwrap_or(false)
    }

    /// `g_i(v)` for one block.
    pub fn block_value(&self, block: usize, v: &[f64]) -> f64 {
        if self.is_penalized(block) {
            self.lambda * v.iter().map(|x| x.abs()).sum::<f64>()
        } else {
            0.0
        }
    }
}

/// Componentwise `sign(z) max(|z| - tau, 0)`.
pub fn soft_threshold(z: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::Config(format!("threshold must be nonnegative, got {tau}")));
    }
    Ok(z.iter().map(|&v| shrink(v, tau)).collect())
}

#[inline]
fn shrink(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// `prox_{gamma g_i}(z)`.
pub fn prox_block(spec: &RegularizerSpec, block: usize, z: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let mut out = z.to_vec();
    prox_block_in_place(spec, block, &mut out, gamma)?;
    Ok(out)
}

pub(crate) fn prox_block_in_place(spec: &RegularizerSpec, block: usize, z: &mut [f64], gamma: f64) -> Result<()> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("stepsize must be positive, got {gamma}")));
    }
    if spec.is_penalized(block) {
        let tau = gamma * spec.lambda;
        z.iter_mut().for_each(|v| *v = shrink(*v, tau));
    }
    Ok(())
}

/// `g(w)`.
pub fn regularizer_value(spec: &RegularizerSpec, w: &CoeffVector) -> Result<f64> {
    let layout = w.layout();
    dim_check("regularizer block flags", layout.num_blocks(), spec.penalize_block.len())?;
    Ok((0..layout.num_blocks()).map(|i| spec.block_value(i, w.block(i))).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{embed_block, BlockLayout};
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[2.0], 0.5).unwrap(), vec![1.5]);
        assert_eq!(soft_threshold(&[0.3, -0.3], 0.5).unwrap(), vec![0.0, 0.0]);
        let z = [1.0, -2.0, 0.0, 3.5];
        assert_eq!(soft_threshold(&z, 0.0).unwrap(), z.to_vec());
        assert!(matches!(soft_threshold(&z, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn prox_block_examples() {
        let spec = RegularizerSpec::l1_details(0.4, 2).unwrap();
        assert_eq!(prox_block(&spec, 0, &[5.0, -0.1], 1.0).unwrap(), vec![5.0, -0.1]);
        let out = prox_block(&spec, 1, &[1.0], 1.0).unwrap();
        assert!((out[0] - 0.6).abs() < 1e-15);
        assert!(prox_block(&spec, 1, &[1.0], 0.0).is_err());
        assert!(RegularizerSpec::l1_details(-1.0, 2).is_err());
    }

    #[test]
    fn regularizer_values() {
        let layout = BlockLayout::new(4, 1).unwrap();
        let spec = RegularizerSpec::l1_details(1.0, 1).unwrap();
        assert_eq!(regularizer_value(&spec, &CoeffVector::zeros(&layout)).unwrap(), 0.0);
        let w0 = embed_block(0, &[3.0; 4], &layout).unwrap();
        assert_eq!(regularizer_value(&spec, &w0).unwrap(), 0.0);
        let mut d = vec![0.0; 12];
        d[0] = 1.0;
        d[1] = -2.0;
        let w1 = embed_block(1, &d, &layout).unwrap();
        assert_eq!(regularizer_value(&spec, &w1).unwrap(), 3.0);
        let bad = RegularizerSpec::l1_details(1.0, 3).unwrap();
        assert!(regularizer_value(&bad, &w1).is_err());
    }

    /// Brute-force check of `z - p in gamma * lambda * d|.|(p)` per component.
    fn in_subdifferential(z: f64, p: f64, tau: f64) -> bool {
        let r = z - p;
        if p > 0.0 {
            (r - tau).abs() < 1e-12
        } else if p < 0.0 {
            (r + tau).abs() < 1e-12
        } else {
            r.abs() <= tau + 1e-12
        }
    }

    proptest! {
        #[test]
        fn prox_optimality(z in prop::collection::vec(-3.0f64..3.0, 1..20), lambda in 0.0f64..2.0, gamma in 0.01f64..2.0) {
            let spec = RegularizerSpec::l1_details(lambda, 1).unwrap();
            let p = prox_block(&spec, 1, &z, gamma).unwrap();
            for (zi, pi) in z.iter().zip(&p) {
                prop_assert!(in_subdifferential(*zi, *pi, gamma * lambda));
            }
        }

        #[test]
        fn nonexpansive(pairs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..20), tau in 0.0f64..2.0) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let pa = soft_threshold(&a, tau).unwrap();
            let pb = soft_threshold(&b, tau).unwrap();
            let d_in: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
            let d_out: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum();
            prop_assert!(d_out <= d_in + 1e-12);
        }

        #[test]
        fn prox_minimizes(z in prop::collection::vec(-3.0f64..3.0, 4), u in prop::collection::vec(-3.0f64..3.0, 4), lambda in 0.0f64..2.0, gamma in 0.05f64..2.0) {
            let spec = RegularizerSpec::l1_details(lambda, 1).unwrap();
            let p = prox_block(&spec, 1, &z, gamma).unwrap();
            let obj = |v: &[f64]| spec.block_value(1, v) + v.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * gamma);
            prop_assert!(obj(&p) <= obj(&u) + 1e-12);
        }

        #[test]
        fn homogeneous_in_lambda(vals in prop::collection::vec(-3.0f64..3.0, 16), lambda in 0.0f64..2.0, scale in 0.0f64..5.0) {
            let layout = BlockLayout::new(4, 1).unwrap();
            let w = CoeffVector::from_vec(&layout, vals).unwrap();
            let a = regularizer_value(&RegularizerSpec::l1_details(lambda * scale, 1).unwrap(), &w).unwrap();
            let b = regularizer_value(&RegularizerSpec::l1_details(lambda, 1).unwrap(), &w).unwrap();
            prop_assert!((a - scale * b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}

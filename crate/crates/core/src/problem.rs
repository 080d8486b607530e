//! Wavelet-domain deblurring instance
//! `phi(w) = 1/2 ||A W^T w - y||^2 + g(w)` with its gradient and a dense
//! block-matrix oracle for small images.

use ndarray::Array2;

use crate::degradation::{degrade, operator_norm, DegradationSpec, GaussianBlur};
use crate::error::{dim_check, Error, Result};
use crate::proximal::{regularizer_value, RegularizerSpec};
use crate::wavelet::{forward_dwt2, inverse_dwt2, BlockLayout, CoeffVector, FilterBank};

pub const DEFAULT_STEP_FACTOR: f64 = 1.9;

/// Relative tolerance and iteration cap of the power iteration used to
/// estimate `||A||` when building a problem.
pub const NORM_TOL: f64 = 1e-10;
pub const NORM_MAX_ITERS: usize = 50_000;

/// Largest side for which [`DenseOracle`] may be assembled.
pub const DENSE_MAX_SIDE: usize = 64;

#[derive(Debug, Clone)]
pub struct Problem {
    pub blur: GaussianBlur,
    pub observation: Array2<f64>,
    pub bank: FilterBank,
    pub layout: BlockLayout,
    pub reg: RegularizerSpec,
    /// `L = ||A||^2`.
    pub lipschitz: f64,
    pub stepsize: f64,
    /// `W A^T y`.
    pub at_y: CoeffVector,
    /// `1/2 ||y||^2`.
    half_y_sq: f64,
}

impl Problem {
    /// Assembles an instance, estimating `||A||` by power iteration and
    /// setting `gamma = step_factor / ||A||^2`.
    pub fn new(
        blur: GaussianBlur,
        observation: Array2<f64>,
        bank: FilterBank,
        levels: usize,
        lambda: f64,
        step_factor: f64,
    ) -> Result<Self> {
        let norm = operator_norm(&blur, NORM_TOL, NORM_MAX_ITERS)?;
        Self::with_operator_norm(blur, observation, bank, levels, lambda, step_factor, norm)
    }

    /// Same as [`Problem::new`] with a caller-supplied `||A||`.
    pub fn with_operator_norm(
        blur: GaussianBlur,
        observation: Array2<f64>,
        bank: FilterBank,
        levels: usize,
        lambda: f64,
        step_factor: f64,
        op_norm: f64,
    ) -> Result<Self> {
        if !(step_factor > 0.0 && step_factor < 2.0) {
            return Err(Error::Config(format!(
                "step factor must lie in (0, 2), got {step_factor}"
            )));
        }
        if !(op_norm > 0.0 && op_norm.is_finite()) {
            return Err(Error::Numerical {
                message: "operator norm must be positive".into(),
                last_estimate: op_norm,
            });
        }
        let layout = BlockLayout::new(blur.image_side, levels)?;
        let (r, c) = observation.dim();
        dim_check("observation rows", layout.image_side(), r)?;
        dim_check("observation columns", layout.image_side(), c)?;
        let reg = RegularizerSpec::l1_details(lambda, levels)?;
        let at_y = forward_dwt2(&blur.adjoint(&observation)?, levels, &bank)?;
        let lipschitz = op_norm * op_norm;
        let half_y_sq = 0.5 * observation.iter().map(|v| v * v).sum::<f64>();
        Ok(Self {
            blur,
            observation,
            bank,
            layout,
            reg,
            lipschitz,
            stepsize: step_factor / lipschitz,
            at_y,
            half_y_sq,
        })
    }

    /// Same instance with another regularization weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut p = self.clone();
        p.reg = RegularizerSpec::l1_details(lambda, self.levels())?;
        Ok(p)
    }

    pub fn levels(&self) -> usize {
        self.layout.levels()
    }

    pub fn num_blocks(&self) -> usize {
        self.layout.num_blocks()
    }

    /// `W y`, the default starting point.
    pub fn observation_coeffs(&self) -> Result<CoeffVector> {
        forward_dwt2(&self.observation, self.levels(), &self.bank)
    }

    /// `W^T w`.
    pub fn synthesize(&self, w: &CoeffVector) -> Result<Array2<f64>> {
        w.check_layout(&self.layout)?;
        inverse_dwt2(w, &self.bank)
    }

    /// `W A^T A W^T w`.
    pub fn normal_op(&self, w: &CoeffVector) -> Result<CoeffVector> {
        let x = self.synthesize(w)?;
        forward_dwt2(&self.blur.normal(&x)?, self.levels(), &self.bank)
    }

    /// `f(w) = 1/2 ||A W^T w - y||^2`.
    pub fn data_fidelity(&self, w: &CoeffVector) -> Result<f64> {
        let ax = self.blur.apply(&self.synthesize(w)?)?;
        Ok(0.5 * ax.iter().zip(&self.observation).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
    }

    /// `phi(w) = f(w) + g(w)`.
    pub fn objective(&self, w: &CoeffVector) -> Result<f64> {
        Ok(self.data_fidelity(w)? + regularizer_value(&self.reg, w)?)
    }

    /// `phi(w)` from a precomputed `normal = W A^T A W^T w`, using
    /// `f(w) = 1/2 <w, normal> - <w, W A^T y> + 1/2 ||y||^2`. Costs `O(n)`;
    /// agrees with [`Problem::objective`] up to cancellation of order
    /// `1e-16 ||y||^2`.
    pub fn objective_from_normal(&self, w: &CoeffVector, normal: &CoeffVector) -> Result<f64> {
        w.check_layout(&self.layout)?;
        normal.check_layout(&self.layout)?;
        let f = w
            .data()
            .iter()
            .zip(normal.data().iter().zip(self.at_y.data()))
            .map(|(x, (s, c))| x * (0.5 * s - c))
            .sum::<f64>()
            + self.half_y_sq;
        Ok(f.max(0.0) + regularizer_value(&self.reg, w)?)
    }

    /// `grad f(w) = W A^T A W^T w - W A^T y`.
    pub fn full_gradient(&self, w: &CoeffVector) -> Result<CoeffVector> {
        let mut g = self.normal_op(w)?;
        g.data_mut().iter_mut().zip(self.at_y.data()).for_each(|(a, b)| *a -= b);
        Ok(g)
    }

    pub fn build_dense_oracle(&self) -> Result<DenseOracle> {
        DenseOracle::build(self)
    }
}

/// Degrades `truth` according to `spec` and assembles the resulting problem.
pub fn build_problem(
    truth: &Array2<f64>,
    spec: &DegradationSpec,
    levels: usize,
    bank: &FilterBank,
    lambda: f64,
    step_factor: f64,
) -> Result<Problem> {
    if !(step_factor > 0.0 && step_factor < 2.0) {
        return Err(Error::Config(format!("step factor must lie in (0, 2), got {step_factor}")));
    }
    let y = degrade(truth, spec)?;
    let blur = GaussianBlur::new(spec.sigma_blur, truth.nrows())?;
    Problem::new(blur, y, bank.clone(), levels, lambda, step_factor)
}

/// Precomputed blocks `M_ij = Pi_i W A^T A W^T Pi_j^T` and constants
/// `Pi_i W A^T y`.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    pub layout: BlockLayout,
    /// `cross_blocks[i][j]` has shape `n_i x n_j`.
    pub cross_blocks: Vec<Vec<Array2<f64>>>,
    pub const_terms: Vec<Vec<f64>>,
}

impl DenseOracle {
    fn build(p: &Problem) -> Result<Self> {
        let layout = p.layout.clone();
        if layout.image_side() > DENSE_MAX_SIDE {
            return Err(Error::Capacity(format!(
                "dense oracle stores n^2 entries; image side {} exceeds the limit of {DENSE_MAX_SIDE}",
                layout.image_side()
            )));
        }
        let nb = layout.num_blocks();
        let sizes = layout.block_sizes().to_vec();
        let mut cross_blocks: Vec<Vec<Array2<f64>>> = sizes
            .iter()
            .map(|&ni| sizes.iter().map(|&nj| Array2::zeros((ni, nj))).collect())
            .collect();
        let mut unit = CoeffVector::zeros(&layout);
        for j in 0..nb {
            for col in 0..sizes[j] {
                unit.block_mut(j)[col] = 1.0;
                let column = p.normal_op(&unit)?;
                unit.block_mut(j)[col] = 0.0;
                for (i, row) in cross_blocks.iter_mut().enumerate() {
                    row[j].column_mut(col).iter_mut().zip(column.block(i)).for_each(|(m, v)| *m = *v);
                }
            }
        }
        let const_terms = (0..nb).map(|i| p.at_y.block(i).to_vec()).collect();
        Ok(Self { layout, cross_blocks, const_terms })
    }

    /// `sum_j M_ij w_j - Pi_i W A^T y`.
    pub fn partial_gradient(&self, block: usize, w: &CoeffVector) -> Result<Vec<f64>> {
        w.check_layout(&self.layout)?;
        self.layout.check_block(block)?;
        let mut g: Vec<f64> = self.const_terms[block].iter().map(|c| -c).collect();
        for (j, m) in self.cross_blocks[block].iter().enumerate() {
            let wj = w.block(j);
            for (gi, row) in g.iter_mut().zip(m.rows()) {
                *gi += row.iter().zip(wj).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(g)
    }

    /// The full `n x n` matrix `W A^T A W^T`.
    pub fn assembled(&self) -> Array2<f64> {
        let n = self.layout.len();
        let mut full = Array2::zeros((n, n));
        for (i, row) in self.cross_blocks.iter().enumerate() {
            let ri = self.layout.block_range(i);
            for (j, m) in row.iter().enumerate() {
                let rj = self.layout.block_range(j);
                full.slice_mut(ndarray::s![ri.clone(), rj]).assign(m);
            }
        }
        full
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{make_filter_bank, WaveletFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_truth(side: usize) -> Array2<f64> {
        Array2::from_shape_fn((side, side), |(i, j)| {
            0.5 + 0.3 * ((i as f64) * 0.4).sin() * ((j as f64) * 0.25).cos()
        })
    }

    fn random_coeffs(layout: &BlockLayout, seed: u64) -> CoeffVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CoeffVector::from_vec(layout, (0..layout.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn stepsize_from_factor() {
        let bank = make_filter_bank(WaveletFamily::Haar, 1).unwrap();
        let spec = DegradationSpec::new(2.0, 0.01, 1).unwrap();
        let p = build_problem(&smooth_truth(16), &spec, 2, &bank, 0.01, 1.9).unwrap();
        assert!((p.lipschitz - 1.0).abs() < 1e-6);
        assert!((p.stepsize - 1.9).abs() < 1e-5);
        assert!(p.stepsize * p.lipschitz < 2.0);
        assert!(matches!(build_problem(&smooth_truth(16), &spec, 2, &bank, 0.01, 2.5), Err(Error::Config(_))));
        assert!(matches!(build_problem(&smooth_truth(16), &spec, 2, &bank, 0.01, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn at_y_is_recomputable() {
        let bank = make_filter_bank(WaveletFamily::Daubechies, 2).unwrap();
        let spec = DegradationSpec::new(1.5, 0.05, 3).unwrap();
        let p = build_problem(&smooth_truth(16), &spec, 2, &bank, 0.01, 1.9).unwrap();
        let again = forward_dwt2(&p.blur.adjoint(&p.observation).unwrap(), 2, &bank).unwrap();
        for (a, b) in p.at_y.data().iter().zip(again.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn objective_examples() {
        let bank = make_filter_bank(WaveletFamily::Daubechies, 2).unwrap();
        let truth = smooth_truth(16);
        let spec = DegradationSpec::new(1.5, 0.0, 3).unwrap();
        let p = build_problem(&truth, &spec, 2, &bank, 0.0, 1.9).unwrap();
        let w_true = forward_dwt2(&truth, 2, &bank).unwrap();
        assert!(p.objective(&w_true).unwrap() < 1e-20);
        let g = p.full_gradient(&w_true).unwrap();
        assert!(g.norm() < 1e-10);
        let zero = CoeffVector::zeros(&p.layout);
        let half_y = 0.5 * p.observation.iter().map(|v| v * v).sum::<f64>();
        assert!((p.objective(&zero).unwrap() - half_y).abs() < 1e-12 * half_y);
        let other = BlockLayout::new(16, 3).unwrap();
        assert!(matches!(p.objective(&CoeffVector::zeros(&other)), Err(Error::Dimension(_))));
    }

    #[test]
    fn objective_from_normal_matches() {
        let bank = make_filter_bank(WaveletFamily::Daubechies, 3).unwrap();
        let spec = DegradationSpec::new(2.0, 0.05, 8).unwrap();
        let p = build_problem(&smooth_truth(16), &spec, 2, &bank, 0.02, 1.9).unwrap();
        for seed in 0..5 {
            let w = random_coeffs(&p.layout, seed);
            let exact = p.objective(&w).unwrap();
            let fast = p.objective_from_normal(&w, &p.normal_op(&w).unwrap()).unwrap();
            assert!((exact - fast).abs() <= 1e-12 * exact, "{exact} vs {fast}");
        }
        let q = p.with_lambda(0.5).unwrap();
        assert_eq!(q.reg.lambda, 0.5);
        assert_eq!(q.stepsize, p.stepsize);
        assert!(p.with_lambda(-1.0).is_err());
    }

    #[test]
    fn gradient_is_affine() {
        let bank = make_filter_bank(WaveletFamily::Daubechies, 3).unwrap();
        let spec = DegradationSpec::new(2.0, 0.05, 8).unwrap();
        let p = build_problem(&smooth_truth(16), &spec, 2, &bank, 0.01, 1.9).unwrap();
        let a = random_coeffs(&p.layout, 1);
        let b = random_coeffs(&p.layout, 2);
        let sum = CoeffVector::from_vec(&p.layout, a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect()).unwrap();
        let g_sum = p.full_gradient(&sum).unwrap();
        let g0 = p.full_gradient(&CoeffVector::zeros(&p.layout)).unwrap();
        let ga = p.full_gradient(&a).unwrap();
        let gb = p.full_gradient(&b).unwrap();
        for k in 0..p.layout.len() {
            let lhs = g_sum.data()[k] + g0.data()[k];
            let rhs = ga.data()[k] + gb.data()[k];
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_oracle_guard_and_identity() {
        let bank = make_filter_bank(WaveletFamily::Haar, 1).unwrap();
        let side = 8;
        let y = smooth_truth(side);
        let p = Problem::with_operator_norm(GaussianBlur::identity(side), y, bank.clone(), 2, 0.0, 1.0, 1.0).unwrap();
        let m = p.build_dense_oracle().unwrap().assembled();
        for i in 0..64 {
            for j in 0..64 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((m[[i, j]] - e).abs() < 1e-10);
            }
        }
        let big = Problem::with_operator_norm(GaussianBlur::identity(128), Array2::zeros((128, 128)), bank, 2, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(big.build_dense_oracle(), Err(Error::Capacity(_))));
    }
}

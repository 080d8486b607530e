//! Spatially invariant Gaussian blur with circular boundaries, its adjoint,
//! operator-norm estimation and synthesis of noisy observations.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};

/// Seed of the starting vector used by [`operator_norm`].
const POWER_ITERATION_SEED: u64 = 0x0005_eed0_fa7a;

/// Truncation radius in units of the standard deviation.
const RADIUS_SIGMAS: f64 = 4.0;

/// Normalized, symmetric Gaussian taps `exp(-k^2 / (2 sigma^2))` for
/// `k in [-radius, radius]`, `radius = ceil(4 sigma)`.
pub fn gaussian_kernel(sigma_blur: f64) -> Result<Vec<f64>> {
    if !(sigma_blur > 0.0 && sigma_blur.is_finite()) {
        return Err(Error::Config(format!("sigma_blur must be positive, got {sigma_blur}")));
    }
    let radius = (RADIUS_SIGMAS * sigma_blur).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma_blur * sigma_blur)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    Ok(taps)
}

/// Separable circular convolution operator `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBlur {
    pub sigma_blur: f64,
    pub radius: usize,
    pub kernel_1d: Vec<f64>,
    pub image_side: usize,
}

impl GaussianBlur {
    pub fn new(sigma_blur: f64, image_side: usize) -> Result<Self> {
        let kernel_1d = gaussian_kernel(sigma_blur)?;
        Self::from_kernel(sigma_blur, kernel_1d, image_side)
    }

    /// The identity operator, kernel `[1]`.
    pub fn identity(image_side: usize) -> Self {
        Self { sigma_blur: 0.0, radius: 0, kernel_1d: vec![1.0], image_side }
    }

    /// Operator from an arbitrary odd-length 1D kernel centered on its middle tap.
    pub fn from_kernel(sigma_blur: f64, kernel_1d: Vec<f64>, image_side: usize) -> Result<Self> {
        if kernel_1d.len().is_multiple_of(2) {
            return Err(Error::Config("blur kernel must have odd length".into()));
        }
        if image_side == 0 {
            return Err(Error::Dimension("image side must be positive".into()));
        }
        let radius = kernel_1d.len() / 2;
        Ok(Self { sigma_blur, radius, kernel_1d, image_side })
    }

    fn check(&self, image: &Array2<f64>) -> Result<()> {
        let (r, c) = image.dim();
        dim_check("blur input rows", self.image_side, r)?;
        dim_check("blur input columns", self.image_side, c)
    }

    /// `A x`: circular convolution along rows, then along columns.
    pub fn apply(&self, image: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(image)?;
        let taps: Vec<f64> = self.kernel_1d.iter().rev().copied().collect();
        Ok(self.filter(image, &taps))
    }

    /// `A^T x`: circular correlation with the same kernel.
    pub fn adjoint(&self, image: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(image)?;
        Ok(self.filter(image, &self.kernel_1d))
    }

    /// `A^T A x`.
    pub fn normal(&self, image: &Array2<f64>) -> Result<Array2<f64>> {
        self.adjoint(&self.apply(image)?)
    }

    /// `out[i] = sum_t taps[t] x[i - radius + t]` along both axes, indices
    /// taken modulo the side.
    fn filter(&self, image: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
        let n = self.image_side;
        let r = self.radius as isize;
        let src: Vec<f64> = image.iter().copied().collect();
        let wrap = |j: isize| (j - r).rem_euclid(n as isize) as usize;

        let mut tmp = vec![0.0; n * n];
        let mut ext = vec![0.0; n + taps.len()];
        for row in 0..n {
            let line = &src[row * n..(row + 1) * n];
            for (j, e) in ext.iter_mut().enumerate() {
                *e = line[wrap(j as isize)];
            }
            for (i, out) in tmp[row * n..(row + 1) * n].iter_mut().enumerate() {
                *out = taps.iter().zip(&ext[i..]).map(|(a, b)| a * b).sum();
            }
        }

        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let dst = &mut out[i * n..(i + 1) * n];
            for (t, &c) in taps.iter().enumerate() {
                let s = wrap(i as isize + t as isize);
                for (d, &v) in dst.iter_mut().zip(&tmp[s * n..(s + 1) * n]) {
                    *d += c * v;
                }
            }
        }
        Array2::from_shape_vec((n, n), out).expect("square buffer")
    }
}

/// Estimates `||A||` by power iteration on `A^T A` from a fixed seeded random
/// start. Stops when successive Rayleigh quotients differ by less than `tol`
/// relatively.
pub fn operator_norm(op: &GaussianBlur, tol: f64, max_iters: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("power iteration tolerance must be positive, got {tol}")));
    }
    let n = op.image_side;
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.mapv_inplace(|x| x / norm);

    let mut prev = f64::NAN;
    for _ in 0..max_iters {
        let u = op.normal(&v)?;
        let rq: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if un == 0.0 {
            return Ok(0.0);
        }
        if (rq - prev).abs() <= tol * rq.abs() {
            return Ok(rq.sqrt());
        }
        prev = rq;
        v = u.mapv(|x| x / un);
    }
    Err(Error::Numerical {
        message: format!("power iteration did not converge in {max_iters} iterations"),
        last_estimate: prev.max(0.0).sqrt(),
    })
}

/// Degradation parameters of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    /// Gaussian standard deviation in pixels.
    pub sigma_blur: f64,
    /// Noise standard deviation in intensity units.
    pub sigma_noise: f64,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(sigma_blur: f64, sigma_noise: f64, seed: u64) -> Result<Self> {
        if !(sigma_blur > 0.0 && sigma_blur.is_finite()) {
            return Err(Error::Config(format!("sigma_blur must be positive, got {sigma_blur}")));
        }
        if !(sigma_noise >= 0.0 && sigma_noise.is_finite()) {
            return Err(Error::Config(format!("sigma_noise must be nonnegative, got {sigma_noise}")));
        }
        Ok(Self { sigma_blur, sigma_noise, seed })
    }

    /// Noise stream for this spec: ChaCha20 seeded through `seed_from_u64`.
    pub fn noise_rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.seed)
    }
}

/// `y = A truth + eta`, `eta` i.i.d. `N(0, sigma_noise^2)` drawn row-major from
/// `rng`. The result is not clipped.
pub fn degrade_with<R: Rng + ?Sized>(
    op: &GaussianBlur,
    truth: &Array2<f64>,
    sigma_noise: f64,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let mut y = op.apply(truth)?;
    if sigma_noise > 0.0 {
        let normal = Normal::new(0.0, sigma_noise)
            .map_err(|e| Error::Config(format!("invalid noise level: {e}")))?;
        y.iter_mut().for_each(|v| *v += normal.sample(rng));
    }
    Ok(y)
}

/// Builds the blur for `spec` and degrades `truth` with the spec's own seeded stream.
pub fn degrade(truth: &Array2<f64>, spec: &DegradationSpec) -> Result<Array2<f64>> {
    let (r, c) = truth.dim();
    if r != c {
        return Err(Error::Dimension(format!("image must be square, got {r}x{c}")));
    }
    let op = GaussianBlur::new(spec.sigma_blur, r)?;
    degrade_with(&op, truth, spec.sigma_noise, &mut spec.noise_rng())
}

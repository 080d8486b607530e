//! Orthonormal multi-level 2D discrete wavelet transform with periodic
//! boundaries, and the block layout of the resulting coefficient vector.
//!
//! A coefficient vector is the concatenation
//! `[a_J, d_J, d_{J-1}, ..., d_1]` where `a_J` is the coarsest approximation
//! (block 0) and block `i >= 1` holds the details of level `J - i + 1`.
//! Each detail block is itself the concatenation of its horizontal,
//! vertical and diagonal sub-bands, each stored row-major:
//!
//! * horizontal: highpass along rows index (axis 0), lowpass along axis 1
//! * vertical: lowpass along axis 0, highpass along axis 1
//! * diagonal: highpass along both axes

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::filters::daubechies_taps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Haar,
    Daubechies,
}

impl FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "haar" => Ok(Self::Haar),
            "daubechies" | "db" => Ok(Self::Daubechies),
            other => Err(Error::Config(format!(
                "unsupported wavelet family '{other}' (expected haar or daubechies)"
            ))),
        }
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Haar => f.write_str("haar"),
            Self::Daubechies => f.write_str("daubechies"),
        }
    }
}

/// Orthonormal quadrature-mirror filter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub name: String,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl FilterBank {
    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }
}

/// Builds the filter bank for `family`. For Daubechies, `order` is the number
/// of vanishing moments (1..=10, giving `2 * order` taps); Haar accepts only
/// order 1 and is identical to Daubechies order 1.
pub fn make_filter_bank(family: WaveletFamily, order: usize) -> Result<FilterBank> {
    let (name, taps) = match family {
        WaveletFamily::Haar if order == 1 => ("haar".to_string(), daubechies_taps(1)),
        WaveletFamily::Haar => {
            return Err(Error::Config(format!("haar wavelet has order 1, got {order}")))
        }
        WaveletFamily::Daubechies => (format!("db{order}"), daubechies_taps(order)),
    };
    let lowpass = taps
        .ok_or_else(|| {
            Error::Config(format!(
                "unsupported daubechies order {order} (expected 1..=10 vanishing moments)"
            ))
        })?
        .to_vec();
    // g[k] = (-1)^k h[L-1-k]
    let len = lowpass.len();
    let highpass = (0..len)
        .map(|k| {
            let v = lowpass[len - 1 - k];
            if k % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .collect();
    Ok(FilterBank { name, lowpass, highpass })
}

/// Partition of a `side x side` coefficient vector into `levels + 1` blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    image_side: usize,
    levels: usize,
    block_sizes: Vec<usize>,
    block_offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(image_side: usize, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Config("at least one decomposition level is required".into()));
        }
        if !image_side.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "image side {image_side} is not a power of two"
            )));
        }
        if levels >= usize::BITS as usize || !image_side.is_multiple_of(1usize << levels) {
            return Err(Error::Dimension(format!(
                "image side {image_side} is not divisible by 2^{levels}"
            )));
        }
        let n = image_side * image_side;
        let mut block_sizes = Vec::with_capacity(levels + 1);
        block_sizes.push(n >> (2 * levels));
        for i in 1..=levels {
            block_sizes.push(3 * (n >> (2 * (levels - i + 1))));
        }
        let mut block_offsets = Vec::with_capacity(levels + 1);
        let mut acc = 0;
        for &s in &block_sizes {
            block_offsets.push(acc);
            acc += s;
        }
        debug_assert_eq!(acc, n);
        Ok(Self { image_side, levels, block_sizes, block_offsets })
    }

    pub fn image_side(&self) -> usize {
        self.image_side
    }

    /// Number of decomposition levels `J`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `J + 1`.
    pub fn num_blocks(&self) -> usize {
        self.levels + 1
    }

    /// Total number of coefficients, `side^2`.
    pub fn len(&self) -> usize {
        self.image_side * self.image_side
    }

    pub fn is_empty(&self) -> bool {
        self.image_side == 0
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn block_offsets(&self) -> &[usize] {
        &self.block_offsets
    }

    pub fn block_range(&self, block: usize) -> Range<usize> {
        let start = self.block_offsets[block];
        start..start + self.block_sizes[block]
    }

    /// Side length of the sub-band images stored in `block`.
    pub fn subband_side(&self, block: usize) -> usize {
        if block == 0 {
            self.image_side >> self.levels
        } else {
            self.image_side >> (self.levels - block + 1)
        }
    }

    pub(crate) fn check_block(&self, block: usize) -> Result<()> {
        if block <= self.levels {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "block index {block} out of range 0..={}",
                self.levels
            )))
        }
    }
}

/// Block-structured wavelet coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    layout: BlockLayout,
    data: Vec<f64>,
}

impl CoeffVector {
    pub fn zeros(layout: &BlockLayout) -> Self {
        Self { data: vec![0.0; layout.len()], layout: layout.clone() }
    }

    pub fn from_vec(layout: &BlockLayout, data: Vec<f64>) -> Result<Self> {
        dim_check("coefficient vector length", layout.len(), data.len())?;
        Ok(Self { layout: layout.clone(), data })
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Block `i` as a slice. Panics if `i > J`; see [`project_block`] for the
    /// checked variant.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.layout.block_range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.layout.block_range(i);
        &mut self.data[r]
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn dot(&self, other: &CoeffVector) -> f64 {
        dot(&self.data, &other.data)
    }

    pub(crate) fn check_layout(&self, layout: &BlockLayout) -> Result<()> {
        if &self.layout == layout {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "coefficient layout mismatch: side {} / J {} vs side {} / J {}",
                self.layout.image_side,
                self.layout.levels,
                layout.image_side,
                layout.levels
            )))
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero vector except block `block`, which holds `values` (the adjoint of
/// [`project_block`]).
pub fn embed_block(block: usize, values: &[f64], layout: &BlockLayout) -> Result<CoeffVector> {
    layout.check_block(block)?;
    dim_check("block length", layout.block_sizes[block], values.len())?;
    let mut out = CoeffVector::zeros(layout);
    out.block_mut(block).copy_from_slice(values);
    Ok(out)
}

pub fn project_block(coeffs: &CoeffVector, block: usize) -> Result<Vec<f64>> {
    coeffs.layout.check_block(block)?;
    Ok(coeffs.block(block).to_vec())
}

/// One level of periodic analysis on a line: `approx[n] = sum_k h[k] x[2n+k]`.
fn analyze_line(x: &[f64], bank: &FilterBank, ext: &mut Vec<f64>, approx: &mut [f64], detail: &mut [f64]) {
    let n = x.len();
    let taps = bank.len();
    ext.clear();
    ext.extend((0..n + taps).map(|j| x[j % n]));
    for (m, (a, d)) in approx.iter_mut().zip(detail.iter_mut()).enumerate() {
        let window = &ext[2 * m..2 * m + taps];
        *a = dot(&bank.lowpass, window);
        *d = dot(&bank.highpass, window);
    }
}

/// Adjoint of [`analyze_line`]; overwrites `out`.
fn synthesize_line(approx: &[f64], detail: &[f64], bank: &FilterBank, ext: &mut Vec<f64>, out: &mut [f64]) {
    let n = out.len();
    let taps = bank.len();
    ext.clear();
    ext.resize(n + taps, 0.0);
    for (m, (&a, &d)) in approx.iter().zip(detail).enumerate() {
        let window = &mut ext[2 * m..2 * m + taps];
        for ((e, &h), &g) in window.iter_mut().zip(&bank.lowpass).zip(&bank.highpass) {
            *e += h * a + g * d;
        }
    }
    out.fill(0.0);
    for (j, &e) in ext.iter().enumerate() {
        out[j % n] += e;
    }
}

/// Single 2D analysis level on a row-major `s x s` image. Writes the `s/2`
/// approximation into `ll` and the H, V, D sub-bands into `details`
/// (length `3 * (s/2)^2`).
fn analyze_level(img: &[f64], s: usize, bank: &FilterBank, ll: &mut [f64], details: &mut [f64]) {
    let h = s / 2;
    let mut ext = Vec::with_capacity(s + bank.len());
    // rows: lowpass / highpass along axis 1
    let mut row_lo = vec![0.0; s * h];
    let mut row_hi = vec![0.0; s * h];
    for r in 0..s {
        analyze_line(
            &img[r * s..(r + 1) * s],
            bank,
            &mut ext,
            &mut row_lo[r * h..(r + 1) * h],
            &mut row_hi[r * h..(r + 1) * h],
        );
    }
    let (hor, rest) = details.split_at_mut(h * h);
    let (ver, diag) = rest.split_at_mut(h * h);
    let mut col = vec![0.0; s];
    let mut lo = vec![0.0; h];
    let mut hi = vec![0.0; h];
    for c in 0..h {
        for r in 0..s {
            col[r] = row_lo[r * h + c];
        }
        analyze_line(&col, bank, &mut ext, &mut lo, &mut hi);
        for r in 0..h {
            ll[r * h + c] = lo[r];
            hor[r * h + c] = hi[r];
        }
        for r in 0..s {
            col[r] = row_hi[r * h + c];
        }
        analyze_line(&col, bank, &mut ext, &mut lo, &mut hi);
        for r in 0..h {
            ver[r * h + c] = lo[r];
            diag[r * h + c] = hi[r];
        }
    }
}

/// Inverse of [`analyze_level`]; writes the `s x s` image into `img`.
fn synthesize_level(ll: &[f64], details: &[f64], s: usize, bank: &FilterBank, img: &mut [f64]) {
    let h = s / 2;
    let mut ext = Vec::with_capacity(s + bank.len());
    let (hor, rest) = details.split_at(h * h);
    let (ver, diag) = rest.split_at(h * h);
    let mut row_lo = vec![0.0; s * h];
    let mut row_hi = vec![0.0; s * h];
    let mut a = vec![0.0; h];
    let mut d = vec![0.0; h];
    let mut col = vec![0.0; s];
    for c in 0..h {
        for r in 0..h {
            a[r] = ll[r * h + c];
            d[r] = hor[r * h + c];
        }
        synthesize_line(&a, &d, bank, &mut ext, &mut col);
        for r in 0..s {
            row_lo[r * h + c] = col[r];
        }
        for r in 0..h {
            a[r] = ver[r * h + c];
            d[r] = diag[r * h + c];
        }
        synthesize_line(&a, &d, bank, &mut ext, &mut col);
        for r in 0..s {
            row_hi[r * h + c] = col[r];
        }
    }
    for r in 0..s {
        synthesize_line(
            &row_lo[r * h..(r + 1) * h],
            &row_hi[r * h..(r + 1) * h],
            bank,
            &mut ext,
            &mut img[r * s..(r + 1) * s],
        );
    }
}

/// Forward transform `w = W x` with `levels` decomposition levels.
pub fn forward_dwt2(image: &Array2<f64>, levels: usize, bank: &FilterBank) -> Result<CoeffVector> {
    let (rows, cols) = image.dim();
    if rows != cols {
        return Err(Error::Dimension(format!("image must be square, got {rows}x{cols}")));
    }
    let layout = BlockLayout::new(rows, levels)?;
    let mut out = CoeffVector::zeros(&layout);
    let mut cur: Vec<f64> = image.iter().copied().collect();
    let mut side = rows;
    for level in 1..=levels {
        let h = side / 2;
        let mut ll = vec![0.0; h * h];
        let block = levels - level + 1;
        analyze_level(&cur, side, bank, &mut ll, out.block_mut(block));
        cur = ll;
        side = h;
    }
    out.block_mut(0).copy_from_slice(&cur);
    Ok(out)
}

/// Inverse transform `x = W^T w`.
pub fn inverse_dwt2(coeffs: &CoeffVector, bank: &FilterBank) -> Result<Array2<f64>> {
    let layout = &coeffs.layout;
    dim_check("coefficient vector length", layout.len(), coeffs.data.len())?;
    if bank.is_empty() || !bank.len().is_multiple_of(2) || bank.highpass.len() != bank.len() {
        return Err(Error::Dimension(format!("malformed filter bank '{}'", bank.name)));
    }
    let levels = layout.levels;
    let mut cur = coeffs.block(0).to_vec();
    let mut side = layout.subband_side(0);
    for level in (1..=levels).rev() {
        let s = side * 2;
        let mut img = vec![0.0; s * s];
        synthesize_level(&cur, coeffs.block(levels - level + 1), s, bank, &mut img);
        cur = img;
        side = s;
    }
    Array2::from_shape_vec((side, side), cur)
        .map_err(|e| Error::Dimension(format!("reshaping reconstructed image: {e}")))
}

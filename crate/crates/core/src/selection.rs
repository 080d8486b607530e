//! Block-activation policies.
//!
//! Every policy maps the iteration counter and the per-block proximal update
//! magnitudes `||Delta_i||` to a mask saying which blocks are updated.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::problem::Problem;
use crate::proximal::prox_block_in_place;
use crate::wavelet::CoeffVector;

pub const DEFAULT_UNIFORM_P: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Every block, every iteration (plain forward-backward).
    Full,
    /// Each block independently with probability `p`.
    UniformStochastic { p: f64 },
    /// Blocks `0..=k mod (J+1)`; with `strict`, blocks `0..k mod (J+1)`,
    /// which leaves the mask empty whenever `k` is a multiple of `J+1`.
    CyclicCoarseToFine { strict: bool },
    /// The single block with the largest `||Delta_i||`.
    DeterministicGs,
    /// Each block independently with probability `||Delta_i|| / ||Delta||`.
    StochasticGs,
}

impl SelectionPolicy {
    pub const NAMES: [&'static str; 5] = ["fb", "stoc", "mlfb", "gs", "magic"];

    /// Short method name used on the command line and in file names.
    pub fn name(&self) -> &'static str {
        match self {
            Self::Full => "fb",
            Self::UniformStochastic { .. } => "stoc",
            Self::CyclicCoarseToFine { .. } => "mlfb",
            Self::DeterministicGs => "gs",
            Self::StochasticGs => "magic",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Self::UniformStochastic { .. } | Self::StochasticGs)
    }

    pub fn all_default() -> [SelectionPolicy; 5] {
        [
            Self::Full,
            Self::UniformStochastic { p: DEFAULT_UNIFORM_P },
            Self::CyclicCoarseToFine { strict: false },
            Self::DeterministicGs,
            Self::StochasticGs,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::UniformStochastic { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::Config(format!("activation probability must lie in [0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fb" => Ok(Self::Full),
            "stoc" => Ok(Self::UniformStochastic { p: DEFAULT_UNIFORM_P }),
            "mlfb" => Ok(Self::CyclicCoarseToFine { strict: false }),
            "gs" => Ok(Self::DeterministicGs),
            "magic" => Ok(Self::StochasticGs),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (valid: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Candidate proximal updates for every block at the current iterate.
#[derive(Debug, Clone)]
pub struct BlockUpdates {
    /// `prox_{gamma g_i}(w_i - gamma grad_i f(w))` for every block.
    pub proposal: CoeffVector,
    /// `Delta = w - proposal`.
    pub delta: CoeffVector,
    /// `||Delta_i||`.
    pub norms: Vec<f64>,
}

impl BlockUpdates {
    /// `||Delta||`.
    pub fn total_norm(&self) -> f64 {
        self.norms.iter().map(|n| n * n).sum::<f64>().sqrt()
    }
}

/// Computes `Delta_i = w_i - prox_{gamma g_i}(w_i - gamma grad_i)` for all blocks
/// with the problem's stepsize.
pub fn candidate_updates(p: &Problem, w: &CoeffVector, grad: &CoeffVector) -> Result<BlockUpdates> {
    w.check_layout(&p.layout)?;
    grad.check_layout(&p.layout)?;
    let gamma = p.stepsize;
    let mut proposal = CoeffVector::zeros(&p.layout);
    let mut delta = CoeffVector::zeros(&p.layout);
    let mut norms = Vec::with_capacity(p.num_blocks());
    for i in 0..p.num_blocks() {
        let (wi, gi) = (w.block(i), grad.block(i));
        let z = proposal.block_mut(i);
        z.iter_mut().zip(wi.iter().zip(gi)).for_each(|(z, (w, g))| *z = w - gamma * g);
        prox_block_in_place(&p.reg, i, z, gamma)?;
        let mut sq = 0.0;
        for ((d, w), z) in delta.block_mut(i).iter_mut().zip(wi).zip(proposal.block(i)) {
            *d = w - z;
            sq += *d * *d;
        }
        norms.push(sq.sqrt());
    }
    Ok(BlockUpdates { proposal, delta, norms })
}

/// Block-activation mask of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationMask {
    pub bits: Vec<bool>,
    /// Per-block activation probabilities, for stochastic policies.
    pub probabilities: Option<Vec<f64>>,
    /// Block switched on because the random draw activated nothing.
    pub forced: Option<usize>,
}

impl ActivationMask {
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_active(&self, block: usize) -> bool {
        self.bits[block]
    }

    /// `'1'`/`'0'` per block, block 0 first.
    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::Data(format!("invalid mask character '{other}' in '{s}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { bits, probabilities: None, forced: None })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Active(ActivationMask),
    /// Every update magnitude is zero: the iterate is a fixed point.
    Converged,
}

fn argmax(norms: &[f64]) -> usize {
    let mut best = 0;
    for (i, &n) in norms.iter().enumerate().skip(1) {
        if n > norms[best] {
            best = i;
        }
    }
    best
}

/// Draws the activation mask of iteration `k` from the per-block update
/// magnitudes. Stochastic policies always consume one uniform draw per block.
pub fn select<R: Rng + ?Sized>(policy: &SelectionPolicy, k: usize, norms: &[f64], rng: &mut R) -> Result<Selection> {
    let nb = norms.len();
    if nb == 0 {
        return Err(Error::Dimension("at least one block is required".into()));
    }
    if norms.iter().any(|n| !(*n >= 0.0)) {
        return Err(Error::Data("update magnitudes must be nonnegative".into()));
    }
    policy.validate()?;
    let mask = match *policy {
        SelectionPolicy::Full => ActivationMask { bits: vec![true; nb], probabilities: None, forced: None },
        SelectionPolicy::UniformStochastic { p } => {
            let mut bits: Vec<bool> = (0..nb).map(|_| rng.random::<f64>() < p).collect();
            let forced = if bits.iter().any(|&b| b) {
                None
            } else {
                bits[0] = true;
                Some(0)
            };
            ActivationMask { bits, probabilities: Some(vec![p; nb]), forced }
        }
        SelectionPolicy::CyclicCoarseToFine { strict } => {
            let phase = k % nb;
            let bits = (0..nb).map(|i| if strict { i < phase } else { i <= phase }).collect();
            ActivationMask { bits, probabilities: None, forced: None }
        }
        SelectionPolicy::DeterministicGs => {
            if norms.iter().all(|&n| n == 0.0) {
                return Ok(Selection::Converged);
            }
            let mut bits = vec![false; nb];
            bits[argmax(norms)] = true;
            ActivationMask { bits, probabilities: None, forced: None }
        }
        SelectionPolicy::StochasticGs => {
            let total = norms.iter().map(|n| n * n).sum::<f64>().sqrt();
            if total == 0.0 {
                return Ok(Selection::Converged);
            }
            let probs: Vec<f64> = norms.iter().map(|n| (n / total).min(1.0)).collect();
            let mut bits: Vec<bool> = probs.iter().map(|&p| rng.random::<f64>() < p).collect();
            let forced = if bits.iter().any(|&b| b) {
                None
            } else {
                let i = argmax(norms);
                bits[i] = true;
                Some(i)
            };
            ActivationMask { bits, probabilities: Some(probs), forced }
        }
    };
    Ok(Selection::Active(mask))
}

/// Checks that `norms` has one entry per block of a `levels`-level layout.
pub fn check_norms(norms: &[f64], levels: usize) -> Result<()> {
    dim_check("number of block norms", levels + 1, norms.len())
}

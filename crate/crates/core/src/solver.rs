//! Block-coordinate forward-backward iteration with an incrementally
//! maintained gradient.
//!
//! The state keeps `s = W A^T A W^T w` next to the iterate, so that
//! `grad f(w) = s - W A^T y` costs nothing. After a step that changed the
//! iterate by the block-sparse `delta`, the cache is refreshed with a single
//! application of the normal operator to `delta`, whatever the number of
//! activated blocks.

use std::borrow::Cow;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Problem, DEFAULT_STEP_FACTOR};
use crate::selection::{candidate_updates, select, ActivationMask, BlockUpdates, Selection, SelectionPolicy};
use crate::wavelet::{BlockLayout, CoeffVector};

pub const DEFAULT_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub policy: SelectionPolicy,
    pub max_iterations: usize,
    /// `gamma = step_factor / L`.
    pub step_factor: f64,
    pub seed: u64,
    /// Stop once `||Delta|| <= tol`. Without it the run stops early only on an
    /// exact fixed point.
    pub convergence_tol: Option<f64>,
}

impl SolverConfig {
    pub fn new(policy: SelectionPolicy) -> Self {
        Self {
            policy,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            step_factor: DEFAULT_STEP_FACTOR,
            seed: 0,
            convergence_tol: None,
        }
    }

    pub fn with_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_step_factor(mut self, f: f64) -> Self {
        self.step_factor = f;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.step_factor > 0.0 && self.step_factor < 2.0) {
            return Err(Error::Config(format!("step factor must lie in (0, 2), got {}", self.step_factor)));
        }
        if let Some(tol) = self.convergence_tol {
            if !(tol >= 0.0) {
                return Err(Error::Config(format!("convergence tolerance must be nonnegative, got {tol}")));
            }
        }
        self.policy.validate()
    }
}

/// Iterate, gradient cache, iteration counter and the run's random stream.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub iterate: CoeffVector,
    /// `W A^T A W^T iterate`.
    pub grad_cache: CoeffVector,
    pub iteration: usize,
    rng: ChaCha20Rng,
}

/// What one call to [`SolverState::step`] did.
#[derive(Debug, Clone)]
pub struct StepReport {
    /// `None` when the step detected a fixed point and left the state untouched.
    pub mask: Option<ActivationMask>,
    pub norms: Vec<f64>,
}

impl StepReport {
    pub fn converged(&self) -> bool {
        self.mask.is_none()
    }
}

impl SolverState {
    /// Starts from `w = W y` and computes the cache from scratch.
    pub fn init(p: &Problem, seed: u64) -> Result<Self> {
        Self::from_iterate(p, p.observation_coeffs()?, seed)
    }

    pub fn from_iterate(p: &Problem, iterate: CoeffVector, seed: u64) -> Result<Self> {
        let grad_cache = p.normal_op(&iterate)?;
        Ok(Self { iterate, grad_cache, iteration: 0, rng: ChaCha20Rng::seed_from_u64(seed) })
    }

    /// `grad f(iterate) = grad_cache - W A^T y`.
    pub fn gradient(&self, p: &Problem) -> CoeffVector {
        let mut g = self.grad_cache.clone();
        g.data_mut().iter_mut().zip(p.at_y.data()).for_each(|(a, b)| *a -= b);
        g
    }

    pub fn candidates(&self, p: &Problem) -> Result<BlockUpdates> {
        candidate_updates(p, &self.iterate, &self.gradient(p))
    }

    /// One iteration: evaluate every block's candidate update, draw the mask,
    /// move the active blocks to their proximal point and refresh the cache.
    pub fn step(&mut self, p: &Problem, policy: &SelectionPolicy, convergence_tol: Option<f64>) -> Result<StepReport> {
        let updates = self.candidates(p)?;
        let total = updates.total_norm();
        let at_fixed_point = total == 0.0 || convergence_tol.is_some_and(|tol| total <= tol);
        let mask = if at_fixed_point {
            None
        } else {
            match select(policy, self.iteration, &updates.norms, &mut self.rng)? {
                Selection::Active(mask) => Some(mask),
                Selection::Converged => None,
            }
        };
        let Some(mask) = mask else {
            return Ok(StepReport { mask: None, norms: updates.norms });
        };
        self.apply_mask(p, &mask, &updates)?;
        self.iteration += 1;
        Ok(StepReport { mask: Some(mask), norms: updates.norms })
    }

    /// Moves the active blocks to `updates.proposal` and adds
    /// `W A^T A W^T delta` to the cache. Inactive blocks are not touched.
    pub fn apply_mask(&mut self, p: &Problem, mask: &ActivationMask, updates: &BlockUpdates) -> Result<()> {
        if mask.count() == 0 {
            return Ok(());
        }
        let mut delta = CoeffVector::zeros(&p.layout);
        for (i, _) in mask.bits.iter().enumerate().filter(|(_, &on)| on) {
            let new = updates.proposal.block(i);
            for (d, (w, n)) in delta.block_mut(i).iter_mut().zip(self.iterate.block(i).iter().zip(new)) {
                *d = n - w;
            }
            self.iterate.block_mut(i).copy_from_slice(new);
        }
        let correction = p.normal_op(&delta)?;
        self.grad_cache.data_mut().iter_mut().zip(correction.data()).for_each(|(c, d)| *c += d);
        Ok(())
    }
}

/// One row of a run trace, describing iteration `iter - 1 -> iter`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Number of completed iterations (1-based).
    pub iter: usize,
    /// Solver time since the start of the loop, objective evaluations excluded.
    pub time_s: f64,
    /// Cumulative time spent evaluating the objective for the trace (from the
    /// gradient cache, see [`Problem::objective_from_normal`]).
    pub eval_s: f64,
    /// Objective at the iterate produced by this iteration.
    pub objective: f64,
    pub mask: ActivationMask,
    /// `||Delta_i||` at the iterate the iteration started from.
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Fixed point detected after `iterations` completed iterations.
    Converged { iterations: usize },
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub config: SolverConfig,
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
    pub final_iterate: CoeffVector,
    pub status: RunStatus,
}

impl RunTrace {
    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(self.initial_objective, |r| r.objective)
    }

    /// Objective after `iters` iterations; runs that stopped early keep their
    /// last value.
    pub fn objective_after(&self, iters: usize) -> f64 {
        if iters == 0 {
            return self.initial_objective;
        }
        self.records.get(iters - 1).or(self.records.last()).map_or(self.initial_objective, |r| r.objective)
    }

    /// Objective of the last iterate reached within `seconds` of solver time.
    pub fn objective_at_time(&self, seconds: f64) -> f64 {
        self.records
            .iter()
            .take_while(|r| r.time_s <= seconds)
            .last()
            .map_or(self.initial_objective, |r| r.objective)
    }

    /// Objective of the last iterate reached within `units` of update work,
    /// see [`update_work`].
    pub fn objective_at_work(&self, units: f64) -> f64 {
        let layout = self.final_iterate.layout();
        let mut spent = 0.0;
        let mut objective = self.initial_objective;
        for r in &self.records {
            spent += update_work(&r.mask.bits, layout);
            if spent > units {
                break;
            }
            objective = r.objective;
        }
        objective
    }

    pub fn total_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.time_s)
    }

    pub fn num_blocks(&self) -> usize {
        self.final_iterate.layout().num_blocks()
    }
}

/// Cost of one iteration under a precomputed block-product cost model:
/// refreshing the gradient after updating block `j` costs `n * n_j`, so an
/// iteration costs the fraction of coefficients it activates (1 for a full
/// forward-backward step).
pub fn update_work(bits: &[bool], layout: &BlockLayout) -> f64 {
    let n = layout.len() as f64;
    bits.iter()
        .zip(layout.block_sizes())
        .filter(|(on, _)| **on)
        .map(|(_, &size)| size as f64 / n)
        .sum()
}

/// Runs the configured policy from `w = W y`. Deterministic given the problem
/// and `config` (timings aside).
pub fn run(p: &Problem, config: &SolverConfig) -> Result<RunTrace> {
    config.validate()?;
    let problem = if (p.stepsize * p.lipschitz - config.step_factor).abs() <= 1e-15 * config.step_factor {
        Cow::Borrowed(p)
    } else {
        let mut q = p.clone();
        q.stepsize = config.step_factor / q.lipschitz;
        Cow::Owned(q)
    };
    let p = problem.as_ref();
    let mut state = SolverState::init(p, config.seed)?;
    let initial_objective = p.objective(&state.iterate)?;

    let mut records = Vec::with_capacity(config.max_iterations);
    let mut status = RunStatus::Completed;
    let mut solver_time = 0.0_f64;
    let mut eval_time = 0.0_f64;
    for _ in 0..config.max_iterations {
        let t0 = Instant::now();
        let report = state.step(p, &config.policy, config.convergence_tol)?;
        let elapsed = t0.elapsed().as_secs_f64();
        let Some(mask) = report.mask else {
            status = RunStatus::Converged { iterations: state.iteration };
            break;
        };
        // keep timestamps strictly increasing even below clock resolution
        solver_time = (solver_time + elapsed).max(solver_time + 1e-9);

        let t1 = Instant::now();
        let objective = p.objective_from_normal(&state.iterate, &state.grad_cache)?;
        eval_time += t1.elapsed().as_secs_f64();

        records.push(IterationRecord {
            iter: state.iteration,
            time_s: solver_time,
            eval_s: eval_time,
            objective,
            mask,
            norms: report.norms,
        });
    }
    Ok(RunTrace { config: config.clone(), initial_objective, records, final_iterate: state.iterate, status })
}

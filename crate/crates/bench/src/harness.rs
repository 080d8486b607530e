//! Instance generation, lambda selection, multi-method runs and scoring.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bcfb::{
    performance_profile, psnr, run, update_work, ActivationHeatmap, ActivationMask, BlockLayout, DegradationSpec,
    GaussianBlur, IterationRecord, Problem, ProfileCurve, RunStatus, RunTrace, SelectionPolicy, SolverConfig,
};
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, Budget, ImageSource, LambdaMode};
use crate::error::{BenchError, Result};
use crate::imageio::read_image;
use crate::io::{self, GridRow, InstanceRow, ProfileRow, ResultRow, ScoreRow};
use crate::synth::piecewise_smooth;

/// Offset added to gap scores so that the best method has a positive score.
pub const GAP_EPS: f64 = 1e-12;

const STREAM_PARAMS: u64 = 0;
const STREAM_IMAGE: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_SOLVER: u64 = 16;

fn splitmix64(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of substream `stream` under `master`. Injective in `stream` for a fixed
/// master: an odd multiplier and the mixing function are both bijections.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Solver seed of one method on one instance; independent of which other
/// methods are configured.
pub fn method_seed(instance_seed: u64, policy: &SelectionPolicy) -> u64 {
    let idx = SelectionPolicy::NAMES.iter().position(|n| *n == policy.name()).unwrap_or(0) as u64;
    derive_seed(instance_seed, STREAM_SOLVER + idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub id: usize,
    pub source: String,
    pub sigma_blur: f64,
    pub sigma_noise: f64,
    pub seed: u64,
    /// Top-left corner of the crop within the source image.
    pub offset: (usize, usize),
}

pub struct Instance {
    pub spec: InstanceSpec,
    pub truth: Array2<f64>,
    pub observation: Array2<f64>,
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| BenchError::user_io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let ext = p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
            matches!(ext.as_deref(), Some("pgm" | "png" | "pfm"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(BenchError::User(format!("{}: no .pgm, .png or .pfm images found", dir.display())));
    }
    Ok(files)
}

/// Draws every instance's degradation parameters. Images from a directory are
/// read here, so missing or undersized files fail before any solve starts.
pub fn plan_instances(config: &BenchConfig) -> Result<Vec<InstanceSpec>> {
    config.validate()?;
    let images = match &config.source {
        ImageSource::Synthetic => None,
        ImageSource::Directory(dir) => {
            let files = list_images(dir)?;
            let dims = files
                .iter()
                .map(|f| {
                    let d = read_image(f)?.dim();
                    if d.0 < config.side || d.1 < config.side {
                        return Err(BenchError::User(format!(
                            "{}: image is {}x{}, smaller than the {} crop",
                            f.display(),
                            d.0,
                            d.1,
                            config.side
                        )));
                    }
                    Ok(d)
                })
                .collect::<Result<Vec<_>>>()?;
            Some((files, dims))
        }
    };
    let (b0, b1) = config.blur_range;
    let (n0, n1) = config.noise_range;
    Ok((0..config.instances)
        .map(|id| {
            let seed = derive_seed(config.seed, id as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_PARAMS));
            let sigma_blur = if b1 > b0 { rng.random_range(b0..b1) } else { b0 };
            let sigma_noise = if n1 > n0 { rng.random_range(n0.ln()..n1.ln()).exp() } else { n0 };
            let (source, offset) = match &images {
                None => (format!("synthetic:{}", derive_seed(seed, STREAM_IMAGE)), (0, 0)),
                Some((files, dims)) => {
                    let k = id % files.len();
                    let (h, w) = dims[k];
                    let offset = (rng.random_range(0..=h - config.side), rng.random_range(0..=w - config.side));
                    let name = files[k].file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    (name, offset)
                }
            };
            InstanceSpec { id, source, sigma_blur, sigma_noise, seed, offset }
        })
        .collect())
}

/// Loads the ground truth of `spec` and degrades it.
pub fn materialize(config: &BenchConfig, spec: &InstanceSpec) -> Result<Instance> {
    let truth = match &config.source {
        ImageSource::Synthetic => piecewise_smooth(config.side, derive_seed(spec.seed, STREAM_IMAGE)),
        ImageSource::Directory(dir) => {
            let img = read_image(&dir.join(&spec.source))?;
            let (i, j) = spec.offset;
            img.slice(s![i..i + config.side, j..j + config.side]).to_owned()
        }
    };
    let deg = DegradationSpec::new(spec.sigma_blur, spec.sigma_noise, derive_seed(spec.seed, STREAM_NOISE))?;
    let observation = bcfb::degrade(&truth, &deg)?;
    Ok(Instance { spec: spec.clone(), truth, observation })
}

/// Problem for an instance with regularization weight `lambda`.
pub fn build_instance_problem(config: &BenchConfig, inst: &Instance, lambda: f64) -> Result<Problem> {
    let bank = bcfb::make_filter_bank(config.wavelet, config.order)?;
    let blur = GaussianBlur::new(inst.spec.sigma_blur, config.side)?;
    Ok(Problem::new(blur, inst.observation.clone(), bank, config.levels, lambda, config.step_factor)?)
}

/// Runs FB for `iterations` at every grid value and keeps the best PSNR; ties
/// go to the earlier grid value.
pub fn select_lambda(base: &Problem, truth: &Array2<f64>, grid: &[f64], iterations: usize) -> Result<(f64, Vec<(f64, f64)>)> {
    let cfg = SolverConfig::new(SelectionPolicy::Full)
        .with_iterations(iterations)
        .with_step_factor(base.stepsize * base.lipschitz);
    let mut scored = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let p = base.with_lambda(lambda)?;
        let trace = run(&p, &cfg)?;
        scored.push((lambda, psnr(truth, &p.synthesize(&trace.final_iterate)?, 1.0)?));
    }
    let best = scored.iter().fold(scored[0], |b, &c| if c.1 > b.1 { c } else { b });
    Ok((best.0, scored))
}

/// Objective reached by a trace within `budget`.
pub fn budget_objective(initial: f64, records: &[IterationRecord], layout: &BlockLayout, budget: Budget) -> f64 {
    let mut objective = initial;
    let mut work = 0.0;
    for r in records {
        let within = match budget {
            Budget::Iterations(n) => r.iter <= n,
            Budget::Seconds(t) => r.time_s <= t,
            Budget::Work(w) => {
                work += update_work(&r.mask.bits, layout);
                work <= w
            }
        };
        if !within {
            break;
        }
        objective = r.objective;
    }
    objective
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub policy: SelectionPolicy,
    pub seed: u64,
    pub iterations: usize,
    pub status: RunStatus,
    pub final_objective: f64,
    pub budget_objective: f64,
    pub psnr: f64,
    pub total_time_s: f64,
    pub eval_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    #[serde(flatten)]
    pub spec: InstanceSpec,
    pub lambda: f64,
    pub lambda_grid: Vec<(f64, f64)>,
    pub lipschitz: f64,
    pub initial_objective: f64,
    pub reference_objective: f64,
    pub methods: Vec<MethodSummary>,
}

pub struct InstanceOutcome {
    pub record: InstanceRecord,
    pub layout: BlockLayout,
    pub traces: Vec<RunTrace>,
}

/// Lambda selection, every configured method and the reference run for one
/// instance.
pub fn solve_instance(config: &BenchConfig, spec: &InstanceSpec) -> Result<InstanceOutcome> {
    let inst = materialize(config, spec)?;
    let (lambda, grid) = match &config.lambda {
        LambdaMode::Fixed { lambda } => (*lambda, Vec::new()),
        LambdaMode::Grid { values } => {
            let base = build_instance_problem(config, &inst, values[0])?;
            let (l, g) = select_lambda(&base, &inst.truth, values, config.grid_iterations)?;
            let p = base.with_lambda(l)?;
            return finish_instance(config, inst, p, l, g);
        }
    };
    let p = build_instance_problem(config, &inst, lambda)?;
    finish_instance(config, inst, p, lambda, grid)
}

fn finish_instance(
    config: &BenchConfig,
    inst: Instance,
    p: Problem,
    lambda: f64,
    lambda_grid: Vec<(f64, f64)>,
) -> Result<InstanceOutcome> {
    let mut traces = Vec::with_capacity(config.methods.len());
    let mut methods = Vec::with_capacity(config.methods.len());
    for policy in &config.methods {
        let seed = method_seed(inst.spec.seed, policy);
        let cfg = SolverConfig::new(*policy)
            .with_iterations(config.iterations)
            .with_seed(seed)
            .with_step_factor(config.step_factor);
        let trace = run(&p, &cfg)?;
        methods.push(MethodSummary {
            method: policy.name().to_string(),
            policy: *policy,
            seed,
            iterations: trace.records.len(),
            status: trace.status,
            final_objective: trace.final_objective(),
            budget_objective: budget_objective(trace.initial_objective, &trace.records, &p.layout, config.budget),
            psnr: psnr(&inst.truth, &p.synthesize(&trace.final_iterate)?, 1.0)?,
            total_time_s: trace.total_time(),
            eval_time_s: trace.records.last().map_or(0.0, |r| r.eval_s),
        });
        traces.push(trace);
    }
    let reference_cfg = SolverConfig::new(SelectionPolicy::Full)
        .with_iterations(config.iterations * config.reference_factor)
        .with_step_factor(config.step_factor);
    let reference = run(&p, &reference_cfg)?;
    let initial_objective = reference.initial_objective;
    let reference_objective = traces
        .iter()
        .chain(std::iter::once(&reference))
        .flat_map(|t| t.records.iter().map(|r| r.objective))
        .fold(initial_objective, f64::min);
    Ok(InstanceOutcome {
        record: InstanceRecord {
            spec: inst.spec,
            lambda,
            lambda_grid,
            lipschitz: p.lipschitz,
            initial_objective,
            reference_objective,
            methods,
        },
        layout: p.layout.clone(),
        traces,
    })
}

pub fn trace_file_name(id: usize, method: &str) -> String {
    format!("{id:04}_{method}.csv")
}

/// Pads runs that stopped at a fixed point with inactive iterations so that
/// every run spans `iterations` columns.
pub fn padded_masks(trace: &RunTrace, iterations: usize) -> Vec<ActivationMask> {
    let nb = trace.num_blocks();
    let mut masks: Vec<ActivationMask> = trace.records.iter().map(|r| r.mask.clone()).collect();
    masks.resize(iterations, ActivationMask { bits: vec![false; nb], probabilities: None, forced: None });
    masks
}

pub struct BenchResult {
    pub records: Vec<InstanceRecord>,
    pub curves: Vec<ProfileCurve>,
}

/// Runs a complete benchmark and writes its artifacts into `out`:
///
/// - `config.txt`: canonical configuration
/// - `instances.csv`, `results.csv`, `lambda_grid.csv`: per-instance tables
/// - `records.json`: instance records including timings
/// - `traces/NNNN_<method>.csv`: one trace per instance and method
/// - `heatmap_<method>.csv`: activation frequencies across instances
/// - `profile.csv`, `scores.csv`: performance profile at the configured budget
pub fn run_bench(config: &BenchConfig, out: &Path) -> Result<BenchResult> {
    let specs = plan_instances(config)?;
    fs::create_dir_all(out.join("traces")).map_err(|e| BenchError::user_io(out, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| BenchError::User(format!("thread pool: {e}")))?;
    let mut outcomes: Vec<InstanceOutcome> =
        pool.install(|| specs.par_iter().map(|s| solve_instance(config, s)).collect::<Result<Vec<_>>>())?;
    outcomes.sort_by_key(|o| o.record.spec.id);

    fs::write(out.join("config.txt"), config.to_config_string()).map_err(|e| BenchError::user_io(out, e))?;
    let mut instances = Vec::new();
    let mut results = Vec::new();
    let mut grid = Vec::new();
    for o in &outcomes {
        let r = &o.record;
        instances.push(InstanceRow {
            id: r.spec.id,
            source: r.spec.source.clone(),
            sigma_blur: r.spec.sigma_blur,
            sigma_noise: r.spec.sigma_noise,
            seed: r.spec.seed,
            lambda: r.lambda,
            initial_objective: r.initial_objective,
            reference_objective: r.reference_objective,
        });
        grid.extend(r.lambda_grid.iter().map(|&(lambda, psnr)| GridRow { id: r.spec.id, lambda, psnr }));
        for (m, t) in r.methods.iter().zip(&o.traces) {
            results.push(ResultRow {
                id: r.spec.id,
                method: m.method.clone(),
                seed: m.seed,
                iterations: m.iterations,
                final_objective: m.final_objective,
                budget_objective: m.budget_objective,
                psnr: m.psnr,
            });
            let path = out.join("traces").join(trace_file_name(r.spec.id, &m.method));
            io::write_trace_csv(&path, o.layout.num_blocks(), &t.records)?;
        }
    }
    io::write_rows(&out.join("instances.csv"), &instances)?;
    io::write_rows(&out.join("results.csv"), &results)?;
    io::write_rows(&out.join("lambda_grid.csv"), &grid)?;
    let records: Vec<InstanceRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
    io::write_json(&out.join("records.json"), &records)?;

    for (k, policy) in config.methods.iter().enumerate() {
        let runs: Vec<Vec<ActivationMask>> = outcomes.iter().map(|o| padded_masks(&o.traces[k], config.iterations)).collect();
        let heat = ActivationHeatmap::from_mask_runs(runs.iter().map(Vec::as_slice))?;
        io::write_heatmap_csv(&out.join(format!("heatmap_{}.csv", policy.name())), &heat.frequencies)?;
    }

    let curves = profile_dir(out, None, Scoring::Gap, None)?;
    Ok(BenchResult { records, curves })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// `phi_m(T) - phi_ref + 1e-12`.
    Gap,
    /// `phi_m(T)`.
    Raw,
}

pub fn score(scoring: Scoring, objective: f64, reference: f64) -> f64 {
    match scoring {
        Scoring::Gap => (objective - reference).max(0.0) + GAP_EPS,
        Scoring::Raw => objective,
    }
}

/// Scores every method of a finished benchmark at `budget` (the configured one
/// by default) and writes `profile.csv` and `scores.csv` into `out` (the
/// benchmark directory by default).
pub fn profile_dir(dir: &Path, budget: Option<Budget>, scoring: Scoring, out: Option<&Path>) -> Result<Vec<ProfileCurve>> {
    let config_path = dir.join("config.txt");
    if !config_path.is_file() {
        return Err(BenchError::Data(format!("{}: missing benchmark configuration", config_path.display())));
    }
    let config = BenchConfig::from_file(&config_path).map_err(|e| BenchError::Data(e.to_string()))?;
    let budget = budget.unwrap_or(config.budget);
    let instances: Vec<InstanceRow> = io::read_rows(&dir.join("instances.csv"))?;
    if instances.len() != config.instances {
        return Err(BenchError::Data(format!(
            "{}: expected {} instances, found {}",
            dir.join("instances.csv").display(),
            config.instances,
            instances.len()
        )));
    }
    let missing: Vec<String> = instances
        .iter()
        .flat_map(|i| config.methods.iter().map(move |m| dir.join("traces").join(trace_file_name(i.id, m.name()))))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(BenchError::Data(format!("missing trace files: {}", missing.join(", "))));
    }

    let layout = BlockLayout::new(config.side, config.levels)?;
    let mut per_method: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut rows = Vec::new();
    for inst in &instances {
        for (k, m) in config.methods.iter().enumerate() {
            let records = io::read_trace_csv(&dir.join("traces").join(trace_file_name(inst.id, m.name())))?;
            let objective = budget_objective(inst.initial_objective, &records, &layout, budget);
            let s = score(scoring, objective, inst.reference_objective);
            per_method.entry(k).or_default().push(s);
            rows.push(ScoreRow { id: inst.id, method: m.name().to_string(), objective, score: s });
        }
    }
    let scores: Vec<(String, Vec<f64>)> =
        per_method.into_iter().map(|(k, v)| (config.methods[k].name().to_string(), v)).collect();
    let curves = performance_profile(&scores, &bcfb::metrics::default_betas())?;
    let out = out.unwrap_or(dir);
    fs::create_dir_all(out).map_err(|e| BenchError::user_io(out, e))?;
    io::write_rows::<ProfileRow>(&out.join("profile.csv"), &io::profile_rows(&curves))?;
    io::write_rows(&out.join("scores.csv"), &rows)?;
    Ok(curves)
}

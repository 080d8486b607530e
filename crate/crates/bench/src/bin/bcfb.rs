use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bcfb::{psnr, run, DegradationSpec, GaussianBlur, Problem, SelectionPolicy, SolverConfig, WaveletFamily};
use bcfb_bench::config::{BenchConfig, Budget};
use bcfb_bench::harness::{self, Scoring};
use bcfb_bench::imageio::{crop_power_of_two, read_image, write_image};
use bcfb_bench::io;
use bcfb_bench::{BenchError, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "bcfb", version, about = "Block-coordinate forward-backward wavelet deblurring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blur and add noise to an image.
    Degrade {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sigma_blur: f64,
        #[arg(long)]
        sigma_noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output image (.pfm keeps full precision, .pgm is quantized).
        #[arg(long, default_value = "observation.pfm")]
        out: PathBuf,
    },
    /// Reconstruct an image with one method.
    Solve(SolveArgs),
    /// Run a benchmark suite described by a config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the iteration count of the config.
        #[arg(long)]
        iters: Option<usize>,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, default_value = "bench_out")]
        out: PathBuf,
    },
    /// Recompute performance profiles of a finished benchmark.
    Profile {
        dir: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, value_enum, default_value_t = Scoring::Gap)]
        scoring: Scoring,
        /// Directory for profile.csv and scores.csv (default: the benchmark directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic piecewise-smooth test image.
    Synth {
        #[arg(long, default_value_t = 128)]
        side: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "synthetic.pgm")]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct BudgetArgs {
    #[arg(long)]
    budget_iters: Option<usize>,
    #[arg(long)]
    budget_s: Option<f64>,
    /// Budget in units of full-vector update work.
    #[arg(long)]
    budget_work: Option<f64>,
}

impl BudgetArgs {
    fn budget(&self) -> Option<Budget> {
        self.budget_iters
            .map(Budget::Iterations)
            .or(self.budget_s.map(Budget::Seconds))
            .or(self.budget_work.map(Budget::Work))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    observation: PathBuf,
    /// Ground truth, for PSNR.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Blur width; read from the observation's sidecar file when omitted.
    #[arg(long)]
    sigma_blur: Option<f64>,
    /// One of fb, stoc, mlfb, gs, magic.
    #[arg(long, default_value = "magic")]
    method: String,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, default_value = "daubechies")]
    wavelet: String,
    #[arg(long, default_value_t = 8)]
    order: usize,
    #[arg(long, default_value_t = bcfb::DEFAULT_STEP_FACTOR)]
    step_factor: f64,
    /// Prefix of the output files.
    #[arg(long, default_value = "solve")]
    out: String,
}

/// Sidecar written next to a degraded image.
#[derive(Serialize, Deserialize)]
struct DegradeInfo {
    input: String,
    side: usize,
    sigma_blur: f64,
    sigma_noise: f64,
    seed: u64,
}

#[derive(Serialize)]
struct SolveSummary {
    observation: String,
    method: String,
    config: SolverConfig,
    lambda: f64,
    sigma_blur: f64,
    levels: usize,
    wavelet: String,
    lipschitz: f64,
    stepsize: f64,
    iterations: usize,
    status: bcfb::RunStatus,
    initial_objective: f64,
    final_objective: f64,
    psnr: Option<f64>,
    psnr_observation: Option<f64>,
    total_time_s: f64,
    eval_time_s: f64,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn degrade(input: &Path, sigma_blur: f64, sigma_noise: f64, seed: u64, out: &Path) -> Result<()> {
    let spec = DegradationSpec::new(sigma_blur, sigma_noise, seed)?;
    let truth = crop_power_of_two(&read_image(input)?)?;
    let y = bcfb::degrade(&truth, &spec)?;
    write_image(out, &y)?;
    let info = DegradeInfo { input: input.display().to_string(), side: truth.nrows(), sigma_blur, sigma_noise, seed };
    io::write_json(&sidecar(out), &info)?;
    println!("wrote {} ({}x{})", out.display(), y.nrows(), y.ncols());
    Ok(())
}

fn solve(a: &SolveArgs) -> Result<()> {
    let policy: SelectionPolicy = a.method.parse()?;
    let sigma_blur = match a.sigma_blur {
        Some(s) => s,
        None => {
            let side = sidecar(&a.observation);
            if !side.is_file() {
                return Err(BenchError::User(format!(
                    "--sigma-blur is required when {} does not exist",
                    side.display()
                )));
            }
            io::read_json::<DegradeInfo>(&side).map_err(|e| BenchError::User(e.to_string()))?.sigma_blur
        }
    };
    let y = crop_power_of_two(&read_image(&a.observation)?)?;
    let truth = match &a.truth {
        Some(t) => {
            let img = read_image(t)?;
            if img.nrows() < y.nrows() || img.ncols() < y.ncols() {
                return Err(BenchError::User(format!("{}: truth is smaller than the observation", t.display())));
            }
            Some(img.slice(ndarray::s![..y.nrows(), ..y.ncols()]).to_owned())
        }
        None => None,
    };
    let family: WaveletFamily = a.wavelet.parse()?;
    let bank = bcfb::make_filter_bank(family, a.order)?;
    let blur = GaussianBlur::new(sigma_blur, y.nrows())?;
    let p = Problem::new(blur, y.clone(), bank, a.levels, a.lambda, a.step_factor)?;
    let cfg = SolverConfig::new(policy).with_iterations(a.iters).with_seed(a.seed).with_step_factor(a.step_factor);
    let trace = run(&p, &cfg)?;
    let xhat = p.synthesize(&trace.final_iterate)?;

    let out = |suffix: &str| PathBuf::from(format!("{}_{suffix}", a.out));
    io::write_trace_csv(&out("trace.csv"), p.num_blocks(), &trace.records)?;
    write_image(&out("recon.pfm"), &xhat)?;
    write_image(&out("recon.pgm"), &xhat)?;
    let heat = bcfb::activation_heatmap(std::slice::from_ref(&trace))?;
    io::write_heatmap_csv(&out("heatmap.csv"), &heat.frequencies)?;
    let summary = SolveSummary {
        observation: a.observation.display().to_string(),
        method: policy.name().to_string(),
        config: cfg,
        lambda: a.lambda,
        sigma_blur,
        levels: a.levels,
        wavelet: p.bank.name.clone(),
        lipschitz: p.lipschitz,
        stepsize: p.stepsize,
        iterations: trace.records.len(),
        status: trace.status,
        initial_objective: trace.initial_objective,
        final_objective: trace.final_objective(),
        psnr: truth.as_ref().map(|t| psnr(t, &xhat, 1.0)).transpose()?,
        psnr_observation: truth.as_ref().map(|t| psnr(t, &y, 1.0)).transpose()?,
        total_time_s: trace.total_time(),
        eval_time_s: trace.records.last().map_or(0.0, |r| r.eval_s),
    };
    io::write_json(&out("summary.json"), &summary)?;
    print!("{} iterations, objective {:.6e} -> {:.6e}", summary.iterations, summary.initial_objective, summary.final_objective);
    match summary.psnr {
        Some(v) => println!(", PSNR {v:.2} dB"),
        None => println!(),
    }
    Ok(())
}

fn bench(config: &Path, seed: Option<u64>, iters: Option<usize>, budget: Option<Budget>, out: &Path) -> Result<()> {
    let mut c = BenchConfig::from_file(config)?;
    if let Some(s) = seed {
        c.seed = s;
    }
    if let Some(n) = iters {
        c.iterations = n;
    }
    if let Some(b) = budget {
        c.budget = b;
    }
    c.validate()?;
    let result = harness::run_bench(&c, out)?;
    println!("{} instances, budget {}, results in {}", result.records.len(), c.budget, out.display());
    print_profile(&result.curves);
    Ok(())
}

fn print_profile(curves: &[bcfb::ProfileCurve]) {
    for c in curves {
        println!("  {:6} rho(1) = {:.2}  rho(2) = {:.2}  rho(8) = {:.2}", c.method, c.rho_at(1.0), c.rho_at(2.0), c.rho_at(8.0));
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Degrade { input, sigma_blur, sigma_noise, seed, out } => degrade(&input, sigma_blur, sigma_noise, seed, &out),
        Command::Solve(args) => solve(&args),
        Command::Bench { config, seed, iters, budget, out } => bench(&config, seed, iters, budget.budget(), &out),
        Command::Profile { dir, budget, scoring, out } => {
            let curves = harness::profile_dir(&dir, budget.budget(), scoring, out.as_deref())?;
            print_profile(&curves);
            Ok(())
        }
        Command::Synth { side, seed, out } => {
            write_image(&out, &bcfb_bench::synth::piecewise_smooth(side, seed))?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Benchmark definitions in a flat `key = value` text format.
//!
//! Blank lines and `#` comments are ignored; unknown or repeated keys are
//! errors. List values are comma separated.
//!
//! ```text
//! instances = 20
//! source = synthetic          # or a directory of PGM/PNG images
//! side = 128
//! levels = 4
//! wavelet = daubechies
//! order = 8
//! blur_min = 1                # sigma_blur ~ uniform
//! blur_max = 15
//! noise_min = 0.001           # sigma_noise ~ log-uniform
//! noise_max = 0.1
//! methods = fb, stoc, mlfb, gs, magic
//! iterations = 200
//! budget_iters = 50           # or budget_s / budget_work
//! lambda_mode = grid          # or fixed, with lambda = ...
//! lambda_grid = 1e-4, ...     # default: 10 log-spaced values in [1e-4, 1e-1]
//! grid_iterations = 50
//! seed = 0
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bcfb::{SelectionPolicy, WaveletFamily};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const BLUR_RANGE: (f64, f64) = (1.0, 15.0);
pub const NOISE_RANGE: (f64, f64) = (1e-3, 1e-1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSource {
    Synthetic,
    Directory(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "unit", content = "value", rename_all = "snake_case")]
pub enum Budget {
    Iterations(usize),
    Seconds(f64),
    /// Update work in units of one full-vector pass.
    Work(f64),
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Iterations(n) => write!(f, "{n} iterations"),
            Self::Seconds(s) => write!(f, "{s} s"),
            Self::Work(w) => write!(f, "{w} work units"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaMode {
    Fixed { lambda: f64 },
    Grid { values: Vec<f64> },
}

pub fn default_lambda_grid() -> Vec<f64> {
    (0..10).map(|k| 1e-4 * 10f64.powf(k as f64 / 3.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub instances: usize,
    pub source: ImageSource,
    pub side: usize,
    pub levels: usize,
    pub wavelet: WaveletFamily,
    pub order: usize,
    pub blur_range: (f64, f64),
    pub noise_range: (f64, f64),
    pub methods: Vec<SelectionPolicy>,
    pub iterations: usize,
    pub budget: Budget,
    pub lambda: LambdaMode,
    pub grid_iterations: usize,
    pub seed: u64,
    pub step_factor: f64,
    /// The reference run uses `reference_factor * iterations` FB iterations.
    pub reference_factor: usize,
    /// Worker threads; 0 lets the thread pool decide.
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            source: ImageSource::Synthetic,
            side: 128,
            levels: 4,
            wavelet: WaveletFamily::Daubechies,
            order: 8,
            blur_range: BLUR_RANGE,
            noise_range: NOISE_RANGE,
            methods: SelectionPolicy::all_default().to_vec(),
            iterations: 200,
            budget: Budget::Iterations(50),
            lambda: LambdaMode::Grid { values: default_lambda_grid() },
            grid_iterations: 50,
            seed: 0,
            step_factor: bcfb::DEFAULT_STEP_FACTOR,
            reference_factor: 10,
            threads: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| BenchError::User(format!("invalid value for '{key}': '{value}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl BenchConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::user_io(path, e))?;
        Self::parse_str(&text).map_err(|e| BenchError::User(format!("{}: {e}", path.display())))
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::User(format!("line {}: expected 'key = value'", n + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), v).is_some() {
                return Err(BenchError::User(format!("line {}: duplicate key '{k}'", n + 1)));
            }
        }

        let mut c = Self::default();
        let (mut blur, mut noise) = (c.blur_range, c.noise_range);
        let mut budgets = Vec::new();
        let mut lambda_mode = None;
        let mut lambda = None;
        let mut grid = None;
        let mut stoc_p = None;
        let mut strict_cyclic = false;
        let mut methods = None;
        for (k, v) in &entries {
            let (k, v) = (k.as_str(), v.as_str());
            match k {
                "instances" => c.instances = parse(k, v)?,
                "source" => {
                    c.source = if v == "synthetic" { ImageSource::Synthetic } else { ImageSource::Directory(v.into()) }
                }
                "side" => c.side = parse(k, v)?,
                "levels" => c.levels = parse(k, v)?,
                "wavelet" => c.wavelet = v.parse()?,
                "order" => c.order = parse(k, v)?,
                "blur_min" => blur.0 = parse(k, v)?,
                "blur_max" => blur.1 = parse(k, v)?,
                "noise_min" => noise.0 = parse(k, v)?,
                "noise_max" => noise.1 = parse(k, v)?,
                "methods" => methods = Some(v.to_string()),
                "iterations" => c.iterations = parse(k, v)?,
                "budget_iters" => budgets.push(Budget::Iterations(parse(k, v)?)),
                "budget_s" => budgets.push(Budget::Seconds(parse(k, v)?)),
                "budget_work" => budgets.push(Budget::Work(parse(k, v)?)),
                "lambda_mode" => lambda_mode = Some(v.to_string()),
                "lambda" => lambda = Some(parse::<f64>(k, v)?),
                "lambda_grid" => grid = Some(parse_list(k, v)?),
                "grid_iterations" => c.grid_iterations = parse(k, v)?,
                "seed" => c.seed = parse(k, v)?,
                "step_factor" => c.step_factor = parse(k, v)?,
                "stoc_p" => stoc_p = Some(parse::<f64>(k, v)?),
                "mlfb_strict" => strict_cyclic = parse(k, v)?,
                "reference_factor" => c.reference_factor = parse(k, v)?,
                "threads" => c.threads = parse(k, v)?,
                other => return Err(BenchError::User(format!("unknown key '{other}'"))),
            }
        }
        c.blur_range = blur;
        c.noise_range = noise;
        if let Some(m) = methods {
            c.methods = m.split(',').map(|s| s.trim().parse()).collect::<bcfb::Result<_>>()?;
        }
        for m in c.methods.iter_mut() {
            match m {
                SelectionPolicy::UniformStochastic { p } => *p = stoc_p.unwrap_or(*p),
                SelectionPolicy::CyclicCoarseToFine { strict } => *strict = strict_cyclic,
                _ => {}
            }
        }
        match budgets.as_slice() {
            [] => c.budget = Budget::Iterations(c.iterations / 4),
            [b] => c.budget = *b,
            _ => return Err(BenchError::User("set at most one of budget_iters, budget_s, budget_work".into())),
        }
        c.lambda = match (lambda_mode.as_deref(), lambda, grid) {
            (Some("fixed") | None, Some(l), None) => LambdaMode::Fixed { lambda: l },
            (Some("fixed"), None, _) => return Err(BenchError::User("lambda_mode = fixed requires 'lambda'".into())),
            (Some("grid") | None, None, g) => LambdaMode::Grid { values: g.unwrap_or_else(default_lambda_grid) },
            (Some(m @ ("grid" | "fixed")), _, _) => {
                return Err(BenchError::User(format!("conflicting lambda settings for lambda_mode = {m}")))
            }
            (Some(other), _, _) => return Err(BenchError::User(format!("unknown lambda_mode '{other}' (valid: grid, fixed)"))),
            (None, Some(_), Some(_)) => return Err(BenchError::User("set either 'lambda' or 'lambda_grid'".into())),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let user = |m: String| Err(BenchError::User(m));
        if self.instances == 0 {
            return user("instances must be positive".into());
        }
        bcfb::BlockLayout::new(self.side, self.levels)?;
        bcfb::make_filter_bank(self.wavelet, self.order)?;
        let (b0, b1) = self.blur_range;
        if !(BLUR_RANGE.0 <= b0 && b0 <= b1 && b1 <= BLUR_RANGE.1) {
            return user(format!("blur range must satisfy {} <= blur_min <= blur_max <= {}", BLUR_RANGE.0, BLUR_RANGE.1));
        }
        let (n0, n1) = self.noise_range;
        if !(NOISE_RANGE.0 <= n0 && n0 <= n1 && n1 <= NOISE_RANGE.1) {
            return user(format!("noise range must satisfy {} <= noise_min <= noise_max <= {}", NOISE_RANGE.0, NOISE_RANGE.1));
        }
        if self.methods.is_empty() {
            return user("at least one method is required".into());
        }
        let mut names: Vec<_> = self.methods.iter().map(|m| m.name()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.methods.len() {
            return user("methods must be distinct".into());
        }
        for m in &self.methods {
            m.validate()?;
        }
        if self.iterations == 0 || self.grid_iterations == 0 || self.reference_factor == 0 {
            return user("iterations, grid_iterations and reference_factor must be positive".into());
        }
        match self.budget {
            Budget::Iterations(n) if n == 0 || n > self.iterations => {
                return user(format!("budget_iters must lie in 1..={}", self.iterations))
            }
            Budget::Seconds(s) if !(s > 0.0) => return user("budget_s must be positive".into()),
            Budget::Work(w) if !(w > 0.0) => return user("budget_work must be positive".into()),
            _ => {}
        }
        match &self.lambda {
            LambdaMode::Fixed { lambda } if !(*lambda >= 0.0) => return user("lambda must be nonnegative".into()),
            LambdaMode::Grid { values } if values.is_empty() || values.iter().any(|l| !(*l >= 0.0)) => {
                return user("lambda_grid must be a nonempty list of nonnegative values".into())
            }
            _ => {}
        }
        if !(self.step_factor > 0.0 && self.step_factor < 2.0) {
            return user("step_factor must lie in (0, 2)".into());
        }
        Ok(())
    }

    /// Canonical text form; parses back to the same configuration.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let source = match &self.source {
            ImageSource::Synthetic => "synthetic".to_string(),
            ImageSource::Directory(d) => d.display().to_string(),
        };
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "instances = {}", self.instances);
        let _ = writeln!(s, "source = {source}");
        let _ = writeln!(s, "side = {}", self.side);
        let _ = writeln!(s, "levels = {}", self.levels);
        let _ = writeln!(s, "wavelet = {}", self.wavelet);
        let _ = writeln!(s, "order = {}", self.order);
        let _ = writeln!(s, "blur_min = {}\nblur_max = {}", self.blur_range.0, self.blur_range.1);
        let _ = writeln!(s, "noise_min = {}\nnoise_max = {}", self.noise_range.0, self.noise_range.1);
        let names: Vec<_> = self.methods.iter().map(|m| m.name()).collect();
        let _ = writeln!(s, "methods = {}", names.join(", "));
        for m in &self.methods {
            match m {
                SelectionPolicy::UniformStochastic { p } => {
                    let _ = writeln!(s, "stoc_p = {p}");
                }
                SelectionPolicy::CyclicCoarseToFine { strict } => {
                    let _ = writeln!(s, "mlfb_strict = {strict}");
                }
                _ => {}
            }
        }
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = match self.budget {
            Budget::Iterations(n) => writeln!(s, "budget_iters = {n}"),
            Budget::Seconds(t) => writeln!(s, "budget_s = {t}"),
            Budget::Work(w) => writeln!(s, "budget_work = {w}"),
        };
        let _ = match &self.lambda {
            LambdaMode::Fixed { lambda } => writeln!(s, "lambda_mode = fixed\nlambda = {lambda}"),
            LambdaMode::Grid { values } => writeln!(s, "lambda_mode = grid\nlambda_grid = {}", join(values)),
        };
        let _ = writeln!(s, "grid_iterations = {}", self.grid_iterations);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "step_factor = {}", self.step_factor);
        let _ = writeln!(s, "reference_factor = {}", self.reference_factor);
        let _ = writeln!(s, "threads = {}", self.threads);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        let c = BenchConfig::parse_str("# nothing\n\n").unwrap();
        assert_eq!(c, BenchConfig::default());
        assert_eq!(default_lambda_grid().len(), 10);
        assert!((default_lambda_grid()[9] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn parses_keys() {
        let c = BenchConfig::parse_str(
            "instances = 2\nmethods = fb, magic  # two\nlambda = 0.01\nbudget_s = 0.5\nside = 64\nlevels = 3\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(c.instances, 2);
        assert_eq!(c.methods, vec![SelectionPolicy::Full, SelectionPolicy::StochasticGs]);
        assert_eq!(c.lambda, LambdaMode::Fixed { lambda: 0.01 });
        assert_eq!(c.budget, Budget::Seconds(0.5));
        assert_eq!((c.side, c.levels, c.seed), (64, 3, 9));
    }

    #[test]
    fn canonical_round_trip() {
        let c = BenchConfig::parse_str("methods = stoc, mlfb\nstoc_p = 0.25\nmlfb_strict = true\nbudget_work = 3.5\n").unwrap();
        assert_eq!(BenchConfig::parse_str(&c.to_config_string()).unwrap(), c);
        let d = BenchConfig::default();
        assert_eq!(BenchConfig::parse_str(&d.to_config_string()).unwrap(), d);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "colour = red",
            "side = 100",
            "side = 16\nlevels = 5",
            "blur_max = 20",
            "noise_min = 0.0001",
            "methods = fb, ista",
            "methods = fb, fb",
            "budget_iters = 10\nbudget_s = 1",
            "budget_iters = 500",
            "lambda_mode = fixed",
            "lambda_mode = random",
            "instances = 0",
            "seed = 1\nseed = 2",
            "no equals sign",
        ] {
            let e = BenchConfig::parse_str(bad).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{bad}");
        }
        let e = BenchConfig::parse_str("methods = ista").unwrap_err().to_string();
        assert!(e.contains("fb, stoc, mlfb, gs, magic"));
    }
}

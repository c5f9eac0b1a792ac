//! Experiment configuration: flat `key = value` text (with `#` comments)
//! or a flat JSON object. Every key is consumed by exactly one setting;
//! leftovers are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use swjko::experiments::{
    AggregationParams, CompareParams, GaussianFlowParams, GridBox, UlaParams,
};
use swjko::{InnerMethod, Matrix, ProjectionMode, WeightUpdate};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("config key `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("unknown key(s) for this experiment: {0}")]
    Unknown(String),
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

/// Raw key-value pairs plus the resolved value of every key read so far.
#[derive(Debug, Clone)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return Self::parse_json(text);
        }
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    msg: "empty key".into(),
                });
            }
            if values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    msg: format!("duplicate key `{k}`"),
                });
            }
        }
        Ok(Self {
            values,
            used: BTreeMap::new(),
        })
    }

    fn parse_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            line: e.line(),
            msg: e.to_string(),
        })?;
        let obj = v.as_object().ok_or_else(|| ConfigError::Syntax {
            line: 1,
            msg: "JSON config must be an object".into(),
        })?;
        let mut values = BTreeMap::new();
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|x| match x {
                        serde_json::Value::Number(n) => Ok(n.to_string()),
                        _ => Err(ConfigError::Value {
                            key: k.clone(),
                            msg: "arrays may only hold numbers".into(),
                        }),
                    })
                    .collect::<Result<Vec<_>>>()?
                    .join(","),
                _ => {
                    return Err(ConfigError::Value {
                        key: k.clone(),
                        msg: "values must be strings, numbers, booleans or number arrays".into(),
                    })
                }
            };
            values.insert(k.clone(), s);
        }
        Ok(Self {
            values,
            used: BTreeMap::new(),
        })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    fn parsed<T: std::str::FromStr + ToString>(&mut self, key: &str, default: Option<T>) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = match self.take(key) {
            Some(s) => s.parse::<T>().map_err(|e| ConfigError::Value {
                key: key.into(),
                msg: format!("cannot parse `{s}`: {e}"),
            })?,
            None => default.ok_or_else(|| ConfigError::Missing(key.into()))?,
        };
        self.used.insert(key.into(), v.to_string());
        Ok(v)
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.parsed(key, Some(default))?;
        if !v.is_finite() {
            return Err(ConfigError::Value {
                key: key.into(),
                msg: "must be finite".into(),
            });
        }
        Ok(v)
    }

    pub fn positive(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.f64(key, default)?;
        if v <= 0.0 {
            return Err(ConfigError::Value {
                key: key.into(),
                msg: format!("must be > 0, got {v}"),
            });
        }
        Ok(v)
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        self.parsed(key, Some(default))
    }

    pub fn count(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = self.usize(key, default)?;
        if v == 0 {
            return Err(ConfigError::Value {
                key: key.into(),
                msg: "must be >= 1".into(),
            });
        }
        Ok(v)
    }

    pub fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        self.parsed(key, Some(default))
    }

    pub fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        self.parsed(key, Some(default))
    }

    pub fn string(&mut self, key: &str, default: Option<&str>) -> Result<String> {
        self.parsed(key, default.map(str::to_string))
    }

    pub fn choice(&mut self, key: &str, default: &str, allowed: &[&str]) -> Result<String> {
        let v = self.string(key, Some(default))?;
        if !allowed.contains(&v.as_str()) {
            return Err(ConfigError::Value {
                key: key.into(),
                msg: format!("`{v}` is not one of {}", allowed.join(", ")),
            });
        }
        Ok(v)
    }

    pub fn list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.take(key) {
            Some(s) => s
                .split(',')
                .map(|x| {
                    x.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| ConfigError::Value {
                        key: key.into(),
                        msg: format!("`{x}` is not a finite number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            None => default.to_vec(),
        };
        self.used.insert(
            key.into(),
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        );
        Ok(v)
    }

    fn finish(&self) -> Result<()> {
        if self.values.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Unknown(self.values.keys().cloned().collect::<Vec<_>>().join(", ")))
        }
    }

    /// Resolved settings, one `key = value` line each, sorted by key.
    pub fn echo(&self) -> String {
        self.used.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Solver settings shared by all flow experiments.
#[derive(Debug, Clone)]
pub struct SolverKeys {
    pub tau: f64,
    pub steps: usize,
    pub inner_iters: usize,
    pub projections: usize,
    pub inner_step: f64,
    pub inner_method: InnerMethod<f64>,
    pub projection_mode: ProjectionMode,
    pub weight_update: WeightUpdate,
    pub dilation: bool,
}

struct SolverDefaults {
    tau: f64,
    steps: usize,
    inner_iters: usize,
    projections: usize,
    inner_step: f64,
    dilation: bool,
}

fn solver_keys(raw: &mut RawConfig, d: SolverDefaults) -> Result<SolverKeys> {
    let tau = raw.positive("tau", d.tau)?;
    let steps = raw.usize("steps", d.steps)?;
    let inner_iters = raw.count("inner_iters", d.inner_iters)?;
    let projections = raw.count("projections", d.projections)?;
    let inner_step = raw.positive("inner_step", d.inner_step)?;
    let method = raw.choice("inner_method", "plain", &["plain", "momentum", "adam"])?;
    let inner_method = match method.as_str() {
        "plain" => InnerMethod::Plain,
        "momentum" => {
            let beta = raw.f64("momentum", 0.9)?;
            if !(0.0..1.0).contains(&beta) {
                return Err(ConfigError::Value {
                    key: "momentum".into(),
                    msg: "must lie in [0, 1)".into(),
                });
            }
            InnerMethod::Momentum { beta }
        }
        _ => InnerMethod::adam(),
    };
    let projection_mode = match raw.choice("projection_mode", "frozen", &["frozen", "fresh"])?.as_str() {
        "frozen" => ProjectionMode::FrozenPerStep,
        _ => ProjectionMode::FreshPerEpoch,
    };
    let weight_update = match raw.choice("weight_update", "mirror", &["mirror", "projected"])?.as_str() {
        "mirror" => WeightUpdate::Mirror,
        _ => WeightUpdate::Projected,
    };
    let dilation = raw.bool("dilation", d.dilation)?;
    Ok(SolverKeys {
        tau,
        steps,
        inner_iters,
        projections,
        inner_step,
        inner_method,
        projection_mode,
        weight_update,
        dilation,
    })
}

/// Fully validated experiment.
#[derive(Debug, Clone)]
pub enum Experiment {
    GaussianFlow(GaussianFlowParams),
    Aggregation { kind: &'static str, params: AggregationParams },
    Compare(CompareParams),
    SwEstimate { a: PathBuf, b: PathBuf, projections: usize, quantiles: usize },
    Ula(UlaParams),
}

#[derive(Debug, Clone)]
pub struct Config {
    pub experiment: Experiment,
    pub seed: u64,
    /// Resolved `key = value` lines, sufficient to re-run.
    pub echo: String,
}

pub const EXPERIMENTS: [&str; 7] = [
    "gaussian-flow",
    "aggregation",
    "aggregation-drift",
    "disk",
    "compare-trajectories",
    "sw-estimate",
    "ula-baseline",
];

/// Builds the experiment from raw keys. `seed_override` replaces the
/// `seed` key. Relative sample paths resolve against `base_dir`.
pub fn resolve(mut raw: RawConfig, seed_override: Option<u64>, base_dir: &Path) -> Result<Config> {
    let name = raw.string("experiment", None)?;
    if !EXPERIMENTS.contains(&name.as_str()) {
        return Err(ConfigError::Value {
            key: "experiment".into(),
            msg: format!("`{name}` is not one of {}", EXPERIMENTS.join(", ")),
        });
    }
    let seed = raw.u64("seed", 0)?;
    let seed = match seed_override {
        Some(s) => {
            raw.used.insert("seed".into(), s.to_string());
            s
        }
        None => seed,
    };
    let experiment = match name.as_str() {
        "gaussian-flow" => gaussian_flow(&mut raw, seed)?,
        "aggregation" | "aggregation-drift" | "disk" => aggregation(&mut raw, &name, seed)?,
        "compare-trajectories" => compare(&mut raw, seed)?,
        "sw-estimate" => {
            let a = base_dir.join(raw.string("sample_a", None)?);
            let b = base_dir.join(raw.string("sample_b", None)?);
            let projections = raw.count("projections", 1000)?;
            let quantiles = raw.count("quantiles", 100)?;
            Experiment::SwEstimate {
                a,
                b,
                projections,
                quantiles,
            }
        }
        _ => ula(&mut raw, seed)?,
    };
    raw.finish()?;
    Ok(Config {
        experiment,
        seed,
        echo: raw.echo(),
    })
}

fn parameterization(raw: &mut RawConfig, default: &str, allowed: &[&str]) -> Result<String> {
    raw.choice("parameterization", default, allowed)
}

fn gaussian_flow(raw: &mut RawConfig, seed: u64) -> Result<Experiment> {
    parameterization(raw, "grid", &["grid"])?;
    let base = GaussianFlowParams::default();
    let dim = raw.count("dim", base.dim)?;
    let per_axis = raw.count("grid_per_axis", base.per_axis)?;
    if per_axis.checked_pow(dim as u32).map_or(true, |n| n > 1_000_000) {
        return Err(ConfigError::Invalid(format!(
            "grid_per_axis^dim = {per_axis}^{dim} exceeds the 10^6 grid point limit"
        )));
    }
    let grid_box = grid_box(raw, None)?;
    let s = solver_keys(
        raw,
        SolverDefaults {
            tau: base.tau,
            steps: base.n_outer,
            inner_iters: base.n_inner,
            projections: base.n_projections,
            inner_step: base.inner_step,
            dilation: base.dilation,
        },
    )?;
    Ok(Experiment::GaussianFlow(GaussianFlowParams {
        dim,
        per_axis,
        grid_box,
        tau: s.tau,
        n_outer: s.steps,
        n_inner: s.inner_iters,
        n_projections: s.projections,
        inner_step: s.inner_step,
        inner_method: s.inner_method,
        weight_update: s.weight_update,
        projection_mode: s.projection_mode,
        dilation: s.dilation,
        seed,
    }))
}

fn grid_box(raw: &mut RawConfig, default: Option<(f64, f64)>) -> Result<Option<(f64, f64)>> {
    let lo = raw.take("grid_min");
    let hi = raw.take("grid_max");
    let parse = |k: &str, s: String| -> Result<f64> {
        s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| ConfigError::Value {
            key: k.into(),
            msg: format!("`{s}` is not a finite number"),
        })
    };
    let b = match (lo, hi) {
        (None, None) => default,
        (Some(lo), Some(hi)) => Some((parse("grid_min", lo)?, parse("grid_max", hi)?)),
        _ => return Err(ConfigError::Invalid("grid_min and grid_max must be given together".into())),
    };
    if let Some((lo, hi)) = b {
        if !(lo < hi) {
            return Err(ConfigError::Invalid(format!("grid_min ({lo}) must be below grid_max ({hi})")));
        }
        raw.used.insert("grid_min".into(), lo.to_string());
        raw.used.insert("grid_max".into(), hi.to_string());
    }
    Ok(b)
}

fn aggregation(raw: &mut RawConfig, name: &str, seed: u64) -> Result<Experiment> {
    let (kind, base) = match name {
        "aggregation" => ("aggregation", AggregationParams::ring()),
        "aggregation-drift" => ("aggregation-drift", AggregationParams::torus()),
        _ => ("disk", AggregationParams::disk()),
    };
    let param = parameterization(raw, "particles", &["particles", "grid"])?;
    let dim = raw.count("dim", base.dim)?;
    let init_std = raw.positive("init_std", base.init_std)?;
    let a = raw.f64("kernel_a", base.a)?;
    let b = raw.f64("kernel_b", base.b)?;
    if !(a > b && b >= 0.0) {
        return Err(ConfigError::Invalid(format!("kernel exponents need kernel_a > kernel_b >= 0, got {a} and {b}")));
    }
    let drift = if kind == "aggregation-drift" {
        let (alpha0, beta0) = base.drift.unwrap_or((1.0, 4.0));
        let alpha = raw.f64("alpha", alpha0)?;
        let beta = raw.positive("beta", beta0)?;
        if alpha < 0.0 {
            return Err(ConfigError::Value {
                key: "alpha".into(),
                msg: "must be >= 0".into(),
            });
        }
        Some((alpha, beta))
    } else {
        None
    };
    let (n_particles, symmetric_init, grid) = if param == "grid" {
        let per_axis = raw.count("grid_per_axis", 50)?;
        if per_axis.checked_pow(dim as u32).map_or(true, |n| n > 1_000_000) {
            return Err(ConfigError::Invalid(format!(
                "grid_per_axis^dim = {per_axis}^{dim} exceeds the 10^6 grid point limit"
            )));
        }
        let (lo, hi) = grid_box(raw, Some((-1.5, 1.5)))?.expect("default box");
        (base.n_particles, false, Some(GridBox { lo, hi, per_axis }))
    } else {
        let n = raw.count("particles", base.n_particles)?;
        let sym = raw.bool("symmetric_init", base.symmetric_init)?;
        if sym && n % 2 != 0 {
            return Err(ConfigError::Value {
                key: "particles".into(),
                msg: "symmetric_init needs an even particle count".into(),
            });
        }
        (n, sym, None)
    };
    let s = solver_keys(
        raw,
        SolverDefaults {
            tau: base.tau,
            steps: base.n_outer,
            inner_iters: base.n_inner,
            projections: base.n_projections,
            inner_step: if grid.is_some() { 0.05 } else { base.inner_step },
            dilation: base.dilation,
        },
    )?;
    Ok(Experiment::Aggregation {
        kind,
        params: AggregationParams {
            n_particles,
            dim,
            init_std,
            symmetric_init,
            a,
            b,
            drift,
            tau: s.tau,
            n_outer: s.steps,
            n_inner: s.inner_iters,
            n_projections: s.projections,
            inner_step: s.inner_step,
            inner_method: s.inner_method,
            projection_mode: s.projection_mode,
            dilation: s.dilation,
            grid,
            weight_update: s.weight_update,
            seed,
        },
    })
}

fn compare(raw: &mut RawConfig, seed: u64) -> Result<Experiment> {
    parameterization(raw, "particles", &["particles"])?;
    let base = CompareParams::default();
    let n_particles = raw.count("particles", base.n_particles)?;
    let tau = raw.positive("tau", base.tau)?;
    let n_outer = raw.usize("steps", base.n_outer)?;
    let n_inner = raw.count("inner_iters", base.n_inner)?;
    let n_projections = raw.count("projections", base.n_projections)?;
    let inner_step = raw.positive("inner_step", base.inner_step)?;
    let direct_step = raw.positive("direct_step", base.direct_step)?;
    Ok(Experiment::Compare(CompareParams {
        n_particles,
        tau,
        n_outer,
        n_inner,
        n_projections,
        inner_step,
        direct_step,
        seed,
    }))
}

fn ula(raw: &mut RawConfig, seed: u64) -> Result<Experiment> {
    parameterization(raw, "particles", &["particles"])?;
    let base = UlaParams::default();
    let n_particles = raw.count("particles", base.n_particles)?;
    let center = raw.list("potential_center", &base.b)?;
    if center.is_empty() {
        return Err(ConfigError::Value {
            key: "potential_center".into(),
            msg: "needs at least one coordinate".into(),
        });
    }
    let scale = raw.positive("potential_scale", 1.0)?;
    let step = raw.positive("ula_step", base.step)?;
    let horizon = raw.positive("horizon", base.horizon)?;
    if horizon / step > 1e8 {
        return Err(ConfigError::Invalid("horizon / ula_step exceeds 10^8 steps".into()));
    }
    Ok(Experiment::Ula(UlaParams {
        n_particles,
        a: Matrix::scaled_identity(center.len(), scale),
        b: center,
        step,
        horizon,
        seed,
    }))
}

//! Run configuration: merges the optional JSON config file with command-line
//! flags (flags win), resolves the dataset source and stamps every artifact
//! with the same metadata.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use pvcast_core::evaluate::{EvalConfig, ModelKind, TrainOverrides};
use pvcast_core::gbr::GbrConfig;
use pvcast_core::pipeline::{
    generate_synthetic, load_pv_csv, load_weather_csv, resample_to_15min, Dataset, FoldConfig,
    SyntheticConfig,
};
use pvcast_core::report::{fnv1a64, RunMeta};
use pvcast_core::types::{Gate, QuantileLevels, DEFAULT_CAPACITY_KW, STEP_MINUTES};

use crate::{AppError, DataArgs};

/// The fully resolved run configuration; also the config-file schema.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub pv: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub synthetic: Option<String>,
    pub capacity: Option<f64>,
    pub models: Option<String>,
    pub gates: Option<String>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub estimators: Option<usize>,
    pub folds: Option<usize>,
    pub test_days: Option<usize>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| AppError::usage(format!("bad config {}: {e}", path.display())))
    }

    /// Field-wise merge; `self` (the flags) wins over `file`.
    pub fn or(self, file: RunConfig) -> RunConfig {
        RunConfig {
            pv: self.pv.or(file.pv),
            weather: self.weather.or(file.weather),
            synthetic: self.synthetic.or(file.synthetic),
            capacity: self.capacity.or(file.capacity),
            models: self.models.or(file.models),
            gates: self.gates.or(file.gates),
            out: self.out.or(file.out),
            jobs: self.jobs.or(file.jobs),
            seed: self.seed.or(file.seed),
            epochs: self.epochs.or(file.epochs),
            learning_rate: self.learning_rate.or(file.learning_rate),
            batch_size: self.batch_size.or(file.batch_size),
            estimators: self.estimators.or(file.estimators),
            folds: self.folds.or(file.folds),
            test_days: self.test_days.or(file.test_days),
        }
    }

    pub fn from_data_args(data: &DataArgs) -> RunConfig {
        RunConfig {
            pv: data.pv.clone(),
            weather: data.weather.clone(),
            synthetic: data.synthetic.clone(),
            capacity: data.capacity,
            ..Default::default()
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Stable fingerprint of the resolved configuration. The output
    /// directory is excluded: where artifacts land does not change what is
    /// computed, and identical runs into different directories must hash
    /// identically.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.out = None;
        fnv1a64(
            serde_json::to_string(&hashed)
                .expect("config serialization cannot fail")
                .as_bytes(),
        )
    }

    pub fn train_overrides(&self) -> TrainOverrides {
        TrainOverrides {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
        }
    }

    pub fn gbr_config(&self) -> GbrConfig {
        let mut cfg = GbrConfig::default();
        if let Some(n) = self.estimators {
            cfg.n_estimators = n;
        }
        cfg
    }

    pub fn fold_config(&self) -> FoldConfig {
        let mut cfg = FoldConfig::default();
        if let Some(n) = self.folds {
            cfg.n_pairs = n;
        }
        if let Some(n) = self.test_days {
            cfg.test_len = n;
        }
        cfg
    }

    pub fn parse_models(&self) -> Result<Vec<ModelKind>, AppError> {
        let raw = self
            .models
            .as_deref()
            .ok_or_else(|| AppError::usage("select at least one model with --models"))?;
        let models = parse_list(raw, ModelKind::parse, "model")?;
        if models.is_empty() {
            return Err(AppError::usage("select at least one model with --models"));
        }
        Ok(models)
    }

    pub fn parse_gates(&self) -> Result<Vec<Gate>, AppError> {
        let raw = self
            .gates
            .as_deref()
            .ok_or_else(|| AppError::usage("select at least one gate with --gates"))?;
        let gates = parse_list(raw, Gate::parse, "gate")?;
        if gates.is_empty() {
            return Err(AppError::usage("select at least one gate with --gates"));
        }
        Ok(gates)
    }

    pub fn eval_config(&self) -> Result<EvalConfig, AppError> {
        Ok(EvalConfig {
            models: self.parse_models()?,
            gates: self.parse_gates()?,
            folds: self.fold_config(),
            levels: QuantileLevels::deciles(),
            seed: self.seed(),
            jobs: self.jobs.unwrap_or(0),
            train: self.train_overrides(),
            gbr: self.gbr_config(),
            ..Default::default()
        })
    }

    /// Loads the dataset: either the synthetic generator or the CSV pair.
    pub fn load_dataset(&self) -> Result<Dataset, AppError> {
        match (&self.synthetic, &self.pv, &self.weather) {
            (Some(spec), None, None) => {
                let cfg = parse_synthetic_spec(spec, self.capacity)?;
                Ok(generate_synthetic(&cfg).dataset)
            }
            (None, Some(pv), Some(weather)) => {
                let capacity = self.capacity.unwrap_or(DEFAULT_CAPACITY_KW);
                let raw = load_pv_csv(pv, capacity).map_err(AppError::runtime)?;
                let series = if i64::from(raw.resolution_min) == STEP_MINUTES {
                    raw
                } else {
                    let res = resample_to_15min(&raw).map_err(AppError::runtime)?;
                    if res.dropped_trailing_samples > 0 {
                        eprintln!(
                            "note: dropped {} trailing sub-window samples while resampling",
                            res.dropped_trailing_samples
                        );
                    }
                    res.series
                };
                let weather = load_weather_csv(weather).map_err(AppError::runtime)?;
                Dataset::new(series, weather).map_err(AppError::runtime)
            }
            (Some(_), _, _) => Err(AppError::usage(
                "--synthetic cannot be combined with --pv/--weather",
            )),
            _ => Err(AppError::usage(
                "provide either --synthetic or both --pv and --weather",
            )),
        }
    }

    pub fn run_meta(&self, ds: &Dataset) -> RunMeta {
        let mut meta = RunMeta::new(self.seed(), self.hash(), ds.fingerprint());
        meta.versions.insert(
            env!("CARGO_PKG_NAME").to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        );
        meta
    }
}

fn parse_list<T>(
    raw: &str,
    parse_one: impl Fn(&str) -> Option<T>,
    what: &str,
) -> Result<Vec<T>, AppError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_one(s).ok_or_else(|| AppError::usage(format!("unknown {what} '{s}'"))))
        .collect()
}

/// Parses "days=157,seed=7" (comma, space or semicolon separated).
pub fn parse_synthetic_spec(
    spec: &str,
    capacity_flag: Option<f64>,
) -> Result<SyntheticConfig, AppError> {
    let mut cfg = SyntheticConfig {
        days: 0,
        seed: 0,
        capacity_kw: capacity_flag.unwrap_or(DEFAULT_CAPACITY_KW),
    };
    for part in spec.split([',', ' ', ';']).filter(|s| !s.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| AppError::usage(format!("bad synthetic spec item '{part}'")))?;
        match key.trim() {
            "days" => {
                cfg.days = value
                    .trim()
                    .parse()
                    .map_err(|_| AppError::usage(format!("bad days value '{value}'")))?;
            }
            "seed" => {
                cfg.seed = value
                    .trim()
                    .parse()
                    .map_err(|_| AppError::usage(format!("bad seed value '{value}'")))?;
            }
            "capacity" => {
                cfg.capacity_kw = value
                    .trim()
                    .parse()
                    .map_err(|_| AppError::usage(format!("bad capacity value '{value}'")))?;
            }
            other => return Err(AppError::usage(format!("unknown synthetic key '{other}'"))),
        }
    }
    if cfg.days < 2 {
        return Err(AppError::usage("synthetic spec needs days >= 2"));
    }
    if cfg.capacity_kw <= 0.0 {
        return Err(AppError::usage("synthetic capacity must be positive"));
    }
    Ok(cfg)
}

/// Comment lines stamped into text artifacts.
pub fn meta_lines(meta: &RunMeta) -> Vec<String> {
    let versions: Vec<String> = meta
        .versions
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    vec![
        format!("seed={}", meta.seed),
        format!("config_hash={}", meta.config_hash),
        format!("dataset={}", meta.dataset_fingerprint),
        format!("versions={}", versions.join(",")),
    ]
}

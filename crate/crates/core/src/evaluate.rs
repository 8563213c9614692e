//! The k-fold evaluation harness: builds gate samples, trains every selected
//! model on each training block, forecasts the held-out days and aggregates
//! capacity-normalized scores over the test folds.
//!
//! Fold work runs in parallel; results are merged in fold order, so a given
//! (dataset, configuration, seed) triple always produces identical reports.

use chrono::NaiveDateTime;
use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

use crate::gbr::{GbrConfig, GbrError, GbrModel};
use crate::loss::empirical_quantile;
use crate::metrics::{
    crps_summary, empirical_coverage, interval_score, nmae, nrmse, MetricsError,
};
use crate::neural::{train, Architecture, ModelSpec, NeuralError, NeuralNet, TrainConfig};
use crate::pipeline::{
    apply_scaler, build_samples, fit_scaler, make_folds, Dataset, FoldConfig, FoldPlan,
    PipelineError, SampleSet,
};
use crate::report::{
    EvalReport, GateScores, IntervalSummary, MeanStd, ModelScores, RunMeta, TimingReport,
};
use crate::types::{CoreError, Gate, QuantileLevels, QuantileMatrix, PAST_PV_STEPS};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Gbr(#[from] GbrError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Everything the harness can train and score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Mlp,
    Lstm,
    Ed1,
    Ed2,
    Gbr,
    /// Per-step unconditional training quantiles, the skill reference.
    Climatology,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Mlp,
        ModelKind::Lstm,
        ModelKind::Ed1,
        ModelKind::Ed2,
        ModelKind::Gbr,
        ModelKind::Climatology,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Lstm => "lstm",
            ModelKind::Ed1 => "ed1",
            ModelKind::Ed2 => "ed2",
            ModelKind::Gbr => "gbr",
            ModelKind::Climatology => "climatology",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Some(ModelKind::Mlp),
            "lstm" => Some(ModelKind::Lstm),
            "ed1" | "ed-1" => Some(ModelKind::Ed1),
            "ed2" | "ed-2" => Some(ModelKind::Ed2),
            "gbr" => Some(ModelKind::Gbr),
            "climatology" | "clim" => Some(ModelKind::Climatology),
            _ => None,
        }
    }

    pub fn architecture(self) -> Option<Architecture> {
        match self {
            ModelKind::Mlp => Some(Architecture::Mlp),
            ModelKind::Lstm => Some(Architecture::Lstm),
            ModelKind::Ed1 => Some(Architecture::Ed1),
            ModelKind::Ed2 => Some(Architecture::Ed2),
            _ => None,
        }
    }

    fn id(self) -> u64 {
        match self {
            ModelKind::Mlp => 1,
            ModelKind::Lstm => 2,
            ModelKind::Ed1 => 3,
            ModelKind::Ed2 => 4,
            ModelKind::Gbr => 5,
            ModelKind::Climatology => 6,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn gate_id(gate: Gate) -> u64 {
    match gate {
        Gate::DayAhead12 => 1,
        Gate::Intra00 => 2,
        Gate::Intra06 => 3,
        Gate::Intra12 => 4,
        Gate::Intra18 => 5,
    }
}

/// Splitmix64 over the run seed and the task coordinates, so every
/// (model, gate, fold) trains from its own reproducible stream.
pub fn mix_seed(base: u64, gate: Gate, model: ModelKind, fold: usize) -> u64 {
    let mut z = base
        .wrapping_add(gate_id(gate).wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(model.id().wrapping_mul(0xbf58476d1ce4e5b9))
        .wrapping_add((fold as u64).wrapping_mul(0x94d049bb133111eb));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Per-step unconditional quantiles of the training targets, in normalized
/// units; forecasts are the same matrix for every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimatologyModel {
    pub levels: QuantileLevels,
    /// (T, Q) quantile values in capacity-normalized units.
    pub per_step: Array2<f64>,
}

impl ClimatologyModel {
    pub fn fit(targets_normalized: &Array2<f64>, levels: &QuantileLevels) -> Self {
        let t = targets_normalized.ncols();
        let mut per_step = Array2::zeros((t, levels.len()));
        for step in 0..t {
            let col: Vec<f64> = targets_normalized.column(step).to_vec();
            for (qi, q) in levels.iter().enumerate() {
                per_step[(step, qi)] = empirical_quantile(&col, q);
            }
        }
        Self {
            levels: levels.clone(),
            per_step,
        }
    }
}

/// A trained forecaster of any kind, ready for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
pub enum TrainedModel {
    Neural(NeuralNet),
    Gbr(GbrModel),
    Climatology(ClimatologyModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Neural(n) => match n.spec.arch {
                Architecture::Mlp => ModelKind::Mlp,
                Architecture::Lstm => ModelKind::Lstm,
                Architecture::Ed1 => ModelKind::Ed1,
                Architecture::Ed2 => ModelKind::Ed2,
            },
            TrainedModel::Gbr(_) => ModelKind::Gbr,
            TrainedModel::Climatology(_) => ModelKind::Climatology,
        }
    }

    /// Forecast for one scaled sample, delivered in kW, clipped to the
    /// feasible range, rows monotone.
    pub fn predict_matrix(
        &self,
        features: ArrayView1<'_, f64>,
        past: Option<ArrayView1<'_, f64>>,
        issue_time: NaiveDateTime,
        horizon_indices: Vec<usize>,
        levels: &QuantileLevels,
        capacity_kw: f64,
    ) -> Result<QuantileMatrix, EvalError> {
        let mut zm = match self {
            TrainedModel::Neural(net) => {
                let zeros;
                let past = if net.spec.arch.uses_past_sequence() && past.is_none() {
                    // Gates without a usable past window feed a zero context:
                    // before 00:00 the plant has been dark for hours anyway.
                    zeros = ndarray::Array1::zeros(PAST_PV_STEPS);
                    Some(zeros.view())
                } else {
                    past
                };
                net.forward_matrix(features, past, issue_time, horizon_indices, levels.clone())?
            }
            TrainedModel::Gbr(model) => model.predict(features, issue_time, horizon_indices)?,
            TrainedModel::Climatology(model) => QuantileMatrix::new(
                issue_time,
                horizon_indices,
                model.levels.clone(),
                model.per_step.clone(),
            )?,
        };
        zm.scale(capacity_kw);
        zm.clip(capacity_kw);
        Ok(zm)
    }

    /// Forecasts for every row of a scaled sample set.
    pub fn predict_set(&self, set: &SampleSet, levels: &QuantileLevels) -> Result<Vec<QuantileMatrix>, EvalError> {
        let horizon = set.gate.horizon_indices();
        let mut out = Vec::with_capacity(set.len());
        for row in 0..set.len() {
            out.push(self.predict_matrix(
                set.inputs.row(row),
                set.past_pv.as_ref().map(|p| p.row(row)),
                set.issue_times[row],
                horizon.clone(),
                levels,
                set.capacity_kw,
            )?);
        }
        Ok(out)
    }
}

/// Optional overrides of the per-architecture training defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
}

impl TrainOverrides {
    fn apply(&self, mut cfg: TrainConfig) -> TrainConfig {
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(lr) = self.learning_rate {
            cfg.learning_rate = lr;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub models: Vec<ModelKind>,
    pub gates: Vec<Gate>,
    pub folds: FoldConfig,
    pub levels: QuantileLevels,
    pub seed: u64,
    /// Worker threads for fold-level parallelism; 0 picks the default.
    pub jobs: usize,
    /// Central interval widths in percent, e.g. [80, 60, 40, 20].
    pub interval_widths_pct: Vec<u32>,
    pub train: TrainOverrides,
    pub gbr: GbrConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            models: vec![],
            gates: vec![],
            folds: FoldConfig::default(),
            levels: QuantileLevels::deciles(),
            seed: 0,
            jobs: 0,
            interval_widths_pct: vec![80, 60, 40, 20],
            train: TrainOverrides::default(),
            gbr: GbrConfig::default(),
        }
    }
}

/// Trains one model of the requested kind on a scaled training block.
pub fn train_model(
    kind: ModelKind,
    train_set: &SampleSet,
    levels: &QuantileLevels,
    overrides: &TrainOverrides,
    gbr_cfg: &GbrConfig,
    seed: u64,
) -> Result<TrainedModel, EvalError> {
    if train_set.is_empty() {
        return Err(EvalError::Pipeline(PipelineError::EmptySampleSet));
    }
    match kind {
        ModelKind::Climatology => Ok(TrainedModel::Climatology(ClimatologyModel::fit(
            &train_set.targets,
            levels,
        ))),
        ModelKind::Gbr => {
            // Past PV, when the gate provides it, joins the feature block.
            let inputs = match &train_set.past_pv {
                Some(p) => ndarray::concatenate(Axis(1), &[train_set.inputs.view(), p.view()])
                    .expect("row counts agree"),
                None => train_set.inputs.clone(),
            };
            let model = GbrModel::fit(inputs.view(), train_set.targets.view(), levels, gbr_cfg)?;
            Ok(TrainedModel::Gbr(model))
        }
        _ => {
            let arch = kind.architecture().expect("neural kinds have architectures");
            let spec = ModelSpec::for_gate(arch, &train_set.gate, levels.len())?;
            let mut cfg = overrides.apply(TrainConfig::for_architecture(arch));
            cfg.seed = seed;
            let mut net = NeuralNet::new(spec, seed)?;
            let past = match (&train_set.past_pv, arch.uses_past_sequence()) {
                (Some(p), true) => Some(p.view()),
                (None, true) => None, // zero context injected below
                _ => None,
            };
            let zero_past;
            let past = if arch.uses_past_sequence() && past.is_none() {
                zero_past = Array2::zeros((train_set.len(), PAST_PV_STEPS));
                Some(zero_past.view())
            } else {
                past
            };
            train(
                &mut net,
                train_set.inputs.view(),
                past,
                train_set.targets.view(),
                levels,
                &cfg,
            )?;
            Ok(TrainedModel::Neural(net))
        }
    }
}

struct FoldModelOutput {
    nmae: f64,
    nrmse: f64,
    crps: f64,
    per_width: Vec<(u32, f64, f64)>, // (width, score, coverage)
    crps_per_step: Vec<f64>,
    pairs: usize,
    seconds: f64,
}

struct FoldOutput {
    models: Vec<FoldModelOutput>,
}

/// GBR prediction needs the same feature layout it was fit with.
fn gbr_features(set: &SampleSet) -> Array2<f64> {
    match &set.past_pv {
        Some(p) => ndarray::concatenate(Axis(1), &[set.inputs.view(), p.view()])
            .expect("row counts agree"),
        None => set.inputs.clone(),
    }
}

fn run_fold(
    full: &SampleSet,
    train_days: &[usize],
    test_days: &[usize],
    fold_index: usize,
    gate: Gate,
    cfg: &EvalConfig,
) -> Result<FoldOutput, EvalError> {
    let train_raw = full.subset_by_days(train_days);
    let test_raw = full.subset_by_days(test_days);
    if train_raw.is_empty() || test_raw.is_empty() {
        return Err(EvalError::Pipeline(PipelineError::EmptySampleSet));
    }
    let scaler = fit_scaler(&train_raw)?;
    let train_scaled = apply_scaler(&scaler, &train_raw)?;
    let test_scaled = apply_scaler(&scaler, &test_raw)?;
    let capacity = full.capacity_kw;

    let mut models = Vec::with_capacity(cfg.models.len());
    for &kind in &cfg.models {
        let seed = mix_seed(cfg.seed, gate, kind, fold_index);
        let started = Instant::now();
        let trained = train_model(kind, &train_scaled, &cfg.levels, &cfg.train, &cfg.gbr, seed)?;
        let seconds = started.elapsed().as_secs_f64();

        let forecasts = match &trained {
            TrainedModel::Gbr(model) => {
                let feats = gbr_features(&test_scaled);
                let horizon = test_scaled.gate.horizon_indices();
                let mut out = Vec::with_capacity(test_scaled.len());
                for row in 0..test_scaled.len() {
                    let mut zm = model.predict(
                        feats.row(row),
                        test_scaled.issue_times[row],
                        horizon.clone(),
                    )?;
                    zm.scale(capacity);
                    zm.clip(capacity);
                    out.push(zm);
                }
                out
            }
            _ => trained.predict_set(&test_scaled, &cfg.levels)?,
        };

        let observations = test_raw.targets.view();
        let medians: Array2<f64> = {
            let t = full.gate.horizon_length();
            let mut m = Array2::zeros((forecasts.len(), t));
            for (r, zm) in forecasts.iter().enumerate() {
                for (c, v) in zm.median_column()?.into_iter().enumerate() {
                    m[(r, c)] = v;
                }
            }
            m
        };
        let summary = crps_summary(&forecasts, observations)?;
        let mut per_width = Vec::with_capacity(cfg.interval_widths_pct.len());
        for &width in &cfg.interval_widths_pct {
            let alpha = 1.0 - width as f64 / 100.0;
            let score = interval_score(alpha, &forecasts, observations)?;
            let coverage = empirical_coverage(alpha, &forecasts, observations)?;
            per_width.push((width, 100.0 * score / capacity, coverage));
        }
        models.push(FoldModelOutput {
            nmae: nmae(medians.view(), observations, capacity)?,
            nrmse: nrmse(medians.view(), observations, capacity)?,
            crps: 100.0 * summary.overall / capacity,
            per_width,
            crps_per_step: summary
                .per_step
                .iter()
                .map(|v| 100.0 * v / capacity)
                .collect(),
            pairs: test_raw.len() * full.gate.horizon_length(),
            seconds,
        });
    }
    Ok(FoldOutput { models })
}

pub struct EvalOutcome {
    pub report: EvalReport,
    pub timings: TimingReport,
    pub fold_plan: FoldPlan,
}

pub fn evaluate(ds: &Dataset, cfg: &EvalConfig, meta: RunMeta) -> Result<EvalOutcome, EvalError> {
    if cfg.models.is_empty() {
        return Err(EvalError::InvalidConfig("no models selected".into()));
    }
    if cfg.gates.is_empty() {
        return Err(EvalError::InvalidConfig("no gates selected".into()));
    }
    if !cfg.levels.contains(0.5) {
        return Err(EvalError::InvalidConfig(
            "levels must contain the median".into(),
        ));
    }
    for &w in &cfg.interval_widths_pct {
        if w == 0 || w >= 100 {
            return Err(EvalError::InvalidConfig(format!(
                "interval width {w}% out of range"
            )));
        }
    }
    let plan = make_folds(ds.span_days, &cfg.folds)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| EvalError::InvalidConfig(format!("thread pool: {e}")))?;

    let mut gates = Vec::with_capacity(cfg.gates.len());
    let mut timings: Vec<(Gate, ModelKind, MeanStd)> = Vec::new();
    for &gate in &cfg.gates {
        let full = build_samples(ds, gate.schedule())?;
        if full.is_empty() {
            return Err(EvalError::Pipeline(PipelineError::EmptySampleSet));
        }
        let test_pairs: Vec<(usize, &crate::pipeline::FoldPair)> = plan.test_pairs().collect();
        let fold_outputs: Result<Vec<FoldOutput>, EvalError> = pool.install(|| {
            use rayon::prelude::*;
            test_pairs
                .par_iter()
                .map(|(fold_index, pair)| {
                    run_fold(
                        &full,
                        &pair.train_days,
                        &pair.test_days,
                        *fold_index,
                        gate,
                        cfg,
                    )
                })
                .collect()
        });
        let fold_outputs = fold_outputs?;
        let n_folds = fold_outputs.len();

        let mut model_scores = Vec::with_capacity(cfg.models.len());
        for (mi, &kind) in cfg.models.iter().enumerate() {
            let collect = |f: &dyn Fn(&FoldModelOutput) -> f64| -> Vec<f64> {
                fold_outputs.iter().map(|o| f(&o.models[mi])).collect()
            };
            let nmae_folds = collect(&|m| m.nmae);
            let nrmse_folds = collect(&|m| m.nrmse);
            let crps_folds = collect(&|m| m.crps);
            let seconds = collect(&|m| m.seconds);
            let mut interval_scores = Vec::new();
            for (wi, &width) in cfg.interval_widths_pct.iter().enumerate() {
                let scores = collect(&|m| m.per_width[wi].1);
                let cover = collect(&|m| m.per_width[wi].2);
                interval_scores.push(IntervalSummary {
                    width_pct: width,
                    score: MeanStd::from_values(&scores),
                    coverage: MeanStd::from_values(&cover),
                });
            }
            let t = full.gate.horizon_length();
            let mut curve = vec![0.0; t];
            for o in &fold_outputs {
                for (i, v) in o.models[mi].crps_per_step.iter().enumerate() {
                    curve[i] += v / n_folds as f64;
                }
            }
            let crps_per_step = full
                .gate
                .horizon_indices()
                .into_iter()
                .zip(curve)
                .collect();
            let evaluated_pairs = fold_outputs.iter().map(|o| o.models[mi].pairs).sum();
            timings.push((gate, kind, MeanStd::from_values(&seconds)));
            model_scores.push(ModelScores {
                model: kind,
                nmae: MeanStd::from_values(&nmae_folds),
                nrmse: MeanStd::from_values(&nrmse_folds),
                crps: MeanStd::from_values(&crps_folds),
                interval_scores,
                crps_per_step,
                evaluated_pairs,
            });
        }
        gates.push(GateScores {
            gate,
            test_folds: n_folds,
            models: model_scores,
        });
    }

    let report = EvalReport {
        meta: meta.clone(),
        capacity_kw: ds.pv.capacity_kw,
        levels: cfg.levels.as_slice().to_vec(),
        fold_pairs: plan.pairs.len(),
        tuning_pair_index: plan.tuning_pair_index,
        gates,
    };
    Ok(EvalOutcome {
        report,
        timings: TimingReport {
            meta,
            train_seconds: timings,
        },
        fold_plan: plan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{generate_synthetic, SyntheticConfig};

    fn quick_cfg(models: Vec<ModelKind>, gates: Vec<Gate>) -> EvalConfig {
        EvalConfig {
            models,
            gates,
            folds: FoldConfig {
                n_pairs: 3,
                test_len: 5,
            },
            seed: 11,
            jobs: 2,
            train: TrainOverrides {
                epochs: Some(5),
                ..Default::default()
            },
            gbr: GbrConfig {
                n_estimators: 5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn meta() -> RunMeta {
        RunMeta::new(11, "test".into(), "test".into())
    }

    #[test]
    fn harness_produces_finite_scores_for_every_cell() {
        let ds = generate_synthetic(&SyntheticConfig {
            days: 30,
            seed: 2,
            capacity_kw: 466.4,
        })
        .dataset;
        let cfg = quick_cfg(
            vec![ModelKind::Climatology, ModelKind::Mlp, ModelKind::Ed1],
            vec![Gate::Intra18],
        );
        let outcome = evaluate(&ds, &cfg, meta()).unwrap();
        let gate = &outcome.report.gates[0];
        assert_eq!(gate.test_folds, 2);
        for m in &gate.models {
            assert!(m.nmae.mean.is_finite() && m.nmae.mean >= 0.0);
            assert!(m.nrmse.mean >= m.nmae.mean - 1e-9);
            assert!(m.crps.mean.is_finite() && m.crps.mean >= 0.0);
            for i in &m.interval_scores {
                assert!(i.score.mean.is_finite());
                assert!((0.0..=1.0).contains(&i.coverage.mean));
            }
            assert_eq!(m.crps_per_step.len(), 9);
        }
    }

    #[test]
    fn identical_config_and_seed_reproduce_identical_reports() {
        let ds = generate_synthetic(&SyntheticConfig {
            days: 25,
            seed: 5,
            capacity_kw: 100.0,
        })
        .dataset;
        let cfg = quick_cfg(vec![ModelKind::Ed2], vec![Gate::Intra18]);
        let a = evaluate(&ds, &cfg, meta()).unwrap();
        let b = evaluate(&ds, &cfg, meta()).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.report.to_json(), b.report.to_json());
        // Different seed changes the trained models and the scores.
        let mut cfg2 = cfg.clone();
        cfg2.seed = 12;
        let c = evaluate(&ds, &cfg2, meta()).unwrap();
        assert_ne!(a.report.gates[0].models[0].crps, c.report.gates[0].models[0].crps);
    }

    #[test]
    fn jobs_setting_does_not_change_results() {
        let ds = generate_synthetic(&SyntheticConfig {
            days: 25,
            seed: 5,
            capacity_kw: 100.0,
        })
        .dataset;
        let mut cfg = quick_cfg(vec![ModelKind::Climatology], vec![Gate::Intra12]);
        cfg.jobs = 1;
        let a = evaluate(&ds, &cfg, meta()).unwrap();
        cfg.jobs = 4;
        let b = evaluate(&ds, &cfg, meta()).unwrap();
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn empty_selections_are_usage_errors() {
        let ds = generate_synthetic(&SyntheticConfig {
            days: 20,
            seed: 1,
            capacity_kw: 100.0,
        })
        .dataset;
        let cfg = quick_cfg(vec![], vec![Gate::Intra18]);
        assert!(matches!(
            evaluate(&ds, &cfg, meta()),
            Err(EvalError::InvalidConfig(_))
        ));
        let cfg = quick_cfg(vec![ModelKind::Mlp], vec![]);
        assert!(matches!(
            evaluate(&ds, &cfg, meta()),
            Err(EvalError::InvalidConfig(_))
        ));
    }

    #[test]
    fn climatology_rows_are_the_training_step_quantiles() {
        let mut targets = Array2::zeros((9, 2));
        for i in 0..9 {
            targets[(i, 0)] = i as f64 / 10.0;
            targets[(i, 1)] = 0.5;
        }
        let levels = QuantileLevels::deciles();
        let clim = ClimatologyModel::fit(&targets, &levels);
        // Column q=0.5 at step 0 is the median 0.4.
        assert!((clim.per_step[(0, 4)] - 0.4).abs() < 1e-12);
        assert!(clim.per_step.row(1).iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn delivered_forecasts_are_clipped_and_monotone() {
        let capacity = 50.0;
        let ds = generate_synthetic(&SyntheticConfig {
            days: 16,
            seed: 3,
            capacity_kw: capacity,
        })
        .dataset;
        let raw = crate::pipeline::build_samples(&ds, Gate::Intra12.schedule()).unwrap();
        let scaler = crate::pipeline::fit_scaler(&raw).unwrap();
        let scaled = crate::pipeline::apply_scaler(&scaler, &raw).unwrap();
        let levels = QuantileLevels::deciles();
        for kind in [ModelKind::Mlp, ModelKind::Ed2, ModelKind::Gbr, ModelKind::Climatology] {
            let model = train_model(
                kind,
                &scaled,
                &levels,
                &TrainOverrides {
                    epochs: Some(2),
                    ..Default::default()
                },
                &GbrConfig {
                    n_estimators: 2,
                    ..Default::default()
                },
                9,
            )
            .unwrap();
            let forecasts = match &model {
                TrainedModel::Gbr(g) => {
                    let feats = gbr_features(&scaled);
                    (0..scaled.len())
                        .map(|r| {
                            let mut zm = g
                                .predict(
                                    feats.row(r),
                                    scaled.issue_times[r],
                                    scaled.gate.horizon_indices(),
                                )
                                .unwrap();
                            zm.scale(capacity);
                            zm.clip(capacity);
                            zm
                        })
                        .collect::<Vec<_>>()
                }
                _ => model.predict_set(&scaled, &levels).unwrap(),
            };
            for zm in &forecasts {
                assert!(zm.is_monotone(), "{kind:?} produced a crossing row");
                assert!(
                    zm.values().iter().all(|&v| (0.0..=capacity).contains(&v)),
                    "{kind:?} left the feasible range"
                );
            }
        }
    }

    #[test]
    fn mix_seed_separates_tasks() {
        let a = mix_seed(7, Gate::Intra06, ModelKind::Ed1, 1);
        assert_eq!(a, mix_seed(7, Gate::Intra06, ModelKind::Ed1, 1));
        assert_ne!(a, mix_seed(7, Gate::Intra06, ModelKind::Ed1, 2));
        assert_ne!(a, mix_seed(7, Gate::Intra12, ModelKind::Ed1, 1));
        assert_ne!(a, mix_seed(7, Gate::Intra06, ModelKind::Ed2, 1));
        assert_ne!(a, mix_seed(8, Gate::Intra06, ModelKind::Ed1, 1));
    }
}

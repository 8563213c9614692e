//! Data plumbing: ingestion and resampling, gate-windowed sample assembly,
//! feature scaling, cross-validation folds and the synthetic generator.

mod folds;
mod io;
mod synthetic;

pub use folds::{make_folds, FoldConfig, FoldPair, FoldPlan};
pub use io::{load_pv_csv, load_weather_csv, save_pv_csv, save_weather_csv};
pub use synthetic::{generate_synthetic, Synthetic, SyntheticConfig, SyntheticTruth};

use chrono::{NaiveDateTime, TimeDelta, Timelike};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::report::fnv1a64;
use crate::types::{
    CoreError, GateSchedule, PvSeries, WeatherForecastSet, PAST_PV_STEPS, STEPS_PER_DAY,
    STEP_MINUTES,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input series is not uniform at a supported resolution: {0}")]
    NonUniformInput(String),
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("span of {span_days} days is too short, need at least {needed}")]
    SpanTooShort { span_days: usize, needed: usize },
    #[error("PV series must start at midnight, starts at {0}")]
    NotMidnightAligned(NaiveDateTime),
    #[error("scaler with {expected} features applied to {got}-feature samples")]
    ScalerMismatch { expected: usize, got: usize },
    #[error("csv parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Measured PV plus the weather runs covering its span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub pv: PvSeries,
    weather: BTreeMap<NaiveDateTime, WeatherForecastSet>,
    pub span_days: usize,
}

impl Dataset {
    /// The PV series must be on the 15-minute grid and start at midnight;
    /// whole days only.
    pub fn new(pv: PvSeries, weather: Vec<WeatherForecastSet>) -> Result<Self, PipelineError> {
        if pv.resolution_min as i64 != STEP_MINUTES {
            return Err(PipelineError::NonUniformInput(format!(
                "expected 15-minute resolution, got {} minutes",
                pv.resolution_min
            )));
        }
        if pv.start.hour() != 0 || pv.start.minute() != 0 || pv.start.second() != 0 {
            return Err(PipelineError::NotMidnightAligned(pv.start));
        }
        let span_days = pv.len() / STEPS_PER_DAY;
        if span_days == 0 {
            return Err(PipelineError::SpanTooShort {
                span_days: 0,
                needed: 1,
            });
        }
        let weather = weather
            .into_iter()
            .map(|w| (w.issue_time, w))
            .collect::<BTreeMap<_, _>>();
        Ok(Self {
            pv,
            weather,
            span_days,
        })
    }

    pub fn day_start(&self, day: usize) -> NaiveDateTime {
        self.pv.start + TimeDelta::days(day as i64)
    }

    pub fn weather_at(&self, issue: NaiveDateTime) -> Option<&WeatherForecastSet> {
        self.weather.get(&issue)
    }

    pub fn weather_sets(&self) -> Vec<&WeatherForecastSet> {
        self.weather.values().collect()
    }

    /// Content fingerprint for artifact stamping.
    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::with_capacity(self.pv.len() * 8);
        bytes.extend_from_slice(&self.pv.capacity_kw.to_le_bytes());
        for &p in self.pv.power() {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        for w in self.weather.values() {
            bytes.extend_from_slice(&w.issue_time.and_utc().timestamp().to_le_bytes());
            for &v in &w.irradiance_wm2 {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            for &v in &w.temperature_c {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fnv1a64(&bytes)
    }
}

/// Outcome of resampling a finer series onto the 15-minute grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub series: PvSeries,
    /// Trailing samples that did not fill a whole window and were dropped.
    pub dropped_trailing_samples: usize,
}

/// Averages a uniform finer-resolution series into 15-minute means. The
/// resolution must divide 15 minutes; a trailing partial window is dropped
/// and reported.
pub fn resample_to_15min(raw: &PvSeries) -> Result<Resampled, PipelineError> {
    let res = raw.resolution_min as i64;
    if res <= 0 || res > STEP_MINUTES || STEP_MINUTES % res != 0 {
        return Err(PipelineError::NonUniformInput(format!(
            "{res}-minute input cannot be averaged onto the 15-minute grid"
        )));
    }
    let window = (STEP_MINUTES / res) as usize;
    if window == 1 {
        return Ok(Resampled {
            series: raw.clone(),
            dropped_trailing_samples: 0,
        });
    }
    let n_windows = raw.len() / window;
    if n_windows == 0 {
        return Err(PipelineError::SpanTooShort {
            span_days: 0,
            needed: 1,
        });
    }
    let dropped = raw.len() - n_windows * window;
    let mut means = Vec::with_capacity(n_windows);
    for w in 0..n_windows {
        let chunk = &raw.power()[w * window..(w + 1) * window];
        means.push(chunk.iter().sum::<f64>() / window as f64);
    }
    let series = PvSeries::new(raw.start, STEP_MINUTES as u32, raw.capacity_kw, means)?;
    Ok(Resampled {
        series,
        dropped_trailing_samples: dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExclusionReason {
    MissingWeatherIssue,
    WeatherHorizonTooShort,
    MissingObservation,
    MissingPastPv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedDay {
    pub day: usize,
    pub reason: ExclusionReason,
}

/// Per-feature standardization statistics fitted on training rows only.
/// Targets and the past-PV block are scaled by capacity, not standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features whose training variance collapsed; they map to zero.
    pub degenerate: Vec<bool>,
    pub capacity_kw: f64,
}

/// Aligned (features, past PV, target) rows for one gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub gate: GateSchedule,
    pub day_indices: Vec<usize>,
    pub issue_times: Vec<NaiveDateTime>,
    /// (samples, 2 * T): irradiance then temperature per step, ascending k.
    pub inputs: Array2<f64>,
    /// (samples, 12): the three hours of PV before the gate, oldest first.
    pub past_pv: Option<Array2<f64>>,
    /// (samples, T) observed PV at the horizon steps.
    pub targets: Array2<f64>,
    pub capacity_kw: f64,
    pub excluded: Vec<ExcludedDay>,
    /// Present once `apply_scaler` has normalized this set.
    pub scaler: Option<Scaler>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.day_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.day_indices.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.inputs.ncols()
    }

    /// Rows whose day index is in `days`, in the original row order.
    pub fn subset_by_days(&self, days: &[usize]) -> SampleSet {
        let keep: Vec<usize> = self
            .day_indices
            .iter()
            .enumerate()
            .filter(|(_, d)| days.contains(d))
            .map(|(i, _)| i)
            .collect();
        SampleSet {
            gate: self.gate,
            day_indices: keep.iter().map(|&i| self.day_indices[i]).collect(),
            issue_times: keep.iter().map(|&i| self.issue_times[i]).collect(),
            inputs: self.inputs.select(ndarray::Axis(0), &keep),
            past_pv: self
                .past_pv
                .as_ref()
                .map(|p| p.select(ndarray::Axis(0), &keep)),
            targets: self.targets.select(ndarray::Axis(0), &keep),
            capacity_kw: self.capacity_kw,
            excluded: Vec::new(),
            scaler: self.scaler.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sample set serialization cannot fail")
    }
}

/// Assembles one sample per day for a gate: the weather run issued at the
/// gate time provides the features, the PV series provides targets and the
/// past window. Days without the required run or observations are excluded
/// and reported, not imputed.
pub fn build_samples(ds: &Dataset, gate: GateSchedule) -> Result<SampleSet, PipelineError> {
    let t_len = gate.horizon_length();
    let mut rows_inputs: Vec<f64> = Vec::new();
    let mut rows_past: Vec<f64> = Vec::new();
    let mut rows_targets: Vec<f64> = Vec::new();
    let mut day_indices = Vec::new();
    let mut issue_times = Vec::new();
    let mut excluded = Vec::new();

    'days: for day in 0..ds.span_days {
        let day_start = ds.day_start(day);
        let issue = day_start + TimeDelta::minutes(gate.gate.issue_offset_minutes());
        let Some(weather) = ds.weather_at(issue) else {
            excluded.push(ExcludedDay {
                day,
                reason: ExclusionReason::MissingWeatherIssue,
            });
            continue;
        };

        let mut inputs = Vec::with_capacity(2 * t_len);
        let mut targets = Vec::with_capacity(t_len);
        for k in gate.horizon_start_k..=gate.horizon_end_k {
            let valid = day_start + TimeDelta::minutes(k as i64 * STEP_MINUTES);
            let Some(step) = weather.step_of(valid) else {
                excluded.push(ExcludedDay {
                    day,
                    reason: ExclusionReason::WeatherHorizonTooShort,
                });
                continue 'days;
            };
            inputs.push(weather.irradiance_wm2[step]);
            inputs.push(weather.temperature_c[step]);
            let Some(obs_idx) = ds.pv.index_of(valid) else {
                excluded.push(ExcludedDay {
                    day,
                    reason: ExclusionReason::MissingObservation,
                });
                continue 'days;
            };
            targets.push(ds.pv.power()[obs_idx]);
        }

        let mut past = Vec::with_capacity(PAST_PV_STEPS);
        if gate.uses_past_pv {
            for back in (1..=PAST_PV_STEPS).rev() {
                let t = issue - TimeDelta::minutes(back as i64 * STEP_MINUTES);
                let Some(idx) = ds.pv.index_of(t) else {
                    excluded.push(ExcludedDay {
                        day,
                        reason: ExclusionReason::MissingPastPv,
                    });
                    continue 'days;
                };
                past.push(ds.pv.power()[idx]);
            }
        }

        rows_inputs.extend(inputs);
        rows_past.extend(past);
        rows_targets.extend(targets);
        day_indices.push(day);
        issue_times.push(issue);
    }

    let n = day_indices.len();
    let inputs = Array2::from_shape_vec((n, 2 * t_len), rows_inputs)
        .expect("row construction is shape-consistent");
    let targets = Array2::from_shape_vec((n, t_len), rows_targets)
        .expect("row construction is shape-consistent");
    let past_pv = gate.uses_past_pv.then(|| {
        Array2::from_shape_vec((n, PAST_PV_STEPS), rows_past)
            .expect("row construction is shape-consistent")
    });

    Ok(SampleSet {
        gate,
        day_indices,
        issue_times,
        inputs,
        past_pv,
        targets,
        capacity_kw: ds.pv.capacity_kw,
        excluded,
        scaler: None,
    })
}

/// One day's model input for inference, before scaling. Unlike training
/// samples, observations are optional: forecasting works without them.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceSample {
    pub gate: GateSchedule,
    pub day: usize,
    pub issue_time: NaiveDateTime,
    /// Raw weather features, irradiance then temperature per step.
    pub features: Vec<f64>,
    /// Raw past PV window for intraday gates, oldest first.
    pub past_pv: Option<Vec<f64>>,
    /// Observed PV per horizon step where the series covers it.
    pub observations: Vec<Option<f64>>,
}

/// Assembles the feature row for forecasting one day at one gate.
pub fn build_inference_sample(
    ds: &Dataset,
    gate: GateSchedule,
    day: usize,
) -> Result<InferenceSample, PipelineError> {
    let day_start = ds.day_start(day);
    let issue = day_start + TimeDelta::minutes(gate.gate.issue_offset_minutes());
    let weather = ds.weather_at(issue).ok_or_else(|| {
        PipelineError::NonUniformInput(format!("no weather run issued at {issue}"))
    })?;
    let mut features = Vec::with_capacity(2 * gate.horizon_length());
    let mut observations = Vec::with_capacity(gate.horizon_length());
    for k in gate.horizon_start_k..=gate.horizon_end_k {
        let valid = day_start + TimeDelta::minutes(k as i64 * STEP_MINUTES);
        let step = weather.step_of(valid).ok_or_else(|| {
            PipelineError::NonUniformInput(format!(
                "weather run issued {issue} does not reach {valid}"
            ))
        })?;
        features.push(weather.irradiance_wm2[step]);
        features.push(weather.temperature_c[step]);
        observations.push(ds.pv.index_of(valid).map(|i| ds.pv.power()[i]));
    }
    let past_pv = if gate.uses_past_pv {
        let mut past = Vec::with_capacity(PAST_PV_STEPS);
        for back in (1..=PAST_PV_STEPS).rev() {
            let t = issue - TimeDelta::minutes(back as i64 * STEP_MINUTES);
            let idx = ds.pv.index_of(t).ok_or_else(|| {
                PipelineError::NonUniformInput(format!("no PV observation at {t}"))
            })?;
            past.push(ds.pv.power()[idx]);
        }
        Some(past)
    } else {
        None
    };
    Ok(InferenceSample {
        gate,
        day,
        issue_time: issue,
        features,
        past_pv,
        observations,
    })
}

/// Scales an inference sample with training statistics; returns
/// (features, past_pv) ready for the models.
pub fn scale_inference(
    scaler: &Scaler,
    sample: &InferenceSample,
) -> Result<(Vec<f64>, Option<Vec<f64>>), PipelineError> {
    if scaler.mean.len() != sample.features.len() {
        return Err(PipelineError::ScalerMismatch {
            expected: scaler.mean.len(),
            got: sample.features.len(),
        });
    }
    let features = sample
        .features
        .iter()
        .enumerate()
        .map(|(c, &v)| {
            if scaler.degenerate[c] {
                0.0
            } else {
                (v - scaler.mean[c]) / scaler.std[c]
            }
        })
        .collect();
    let past = sample
        .past_pv
        .as_ref()
        .map(|p| p.iter().map(|v| v / scaler.capacity_kw).collect());
    Ok((features, past))
}

/// Standardization statistics of the training rows. Features with variance
/// below 1e-24 are flagged degenerate.
pub fn fit_scaler(train: &SampleSet) -> Result<Scaler, PipelineError> {
    if train.is_empty() {
        return Err(PipelineError::EmptySampleSet);
    }
    let n = train.len() as f64;
    let d = train.n_features();
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    let mut degenerate = vec![false; d];
    for (c, col) in train.inputs.columns().into_iter().enumerate() {
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let s = var.sqrt();
        mean[c] = m;
        if s < 1e-12 {
            degenerate[c] = true;
            std[c] = 1.0;
        } else {
            std[c] = s;
        }
    }
    Ok(Scaler {
        mean,
        std,
        degenerate,
        capacity_kw: train.capacity_kw,
    })
}

/// Applies training statistics to any row block: standardized features,
/// capacity-normalized targets and past PV.
pub fn apply_scaler(scaler: &Scaler, set: &SampleSet) -> Result<SampleSet, PipelineError> {
    if scaler.mean.len() != set.n_features() {
        return Err(PipelineError::ScalerMismatch {
            expected: scaler.mean.len(),
            got: set.n_features(),
        });
    }
    let mut out = set.clone();
    for (c, mut col) in out.inputs.columns_mut().into_iter().enumerate() {
        if scaler.degenerate[c] {
            col.fill(0.0);
        } else {
            let (m, s) = (scaler.mean[c], scaler.std[c]);
            col.mapv_inplace(|v| (v - m) / s);
        }
    }
    out.targets.mapv_inplace(|v| v / scaler.capacity_kw);
    if let Some(p) = &mut out.past_pv {
        p.mapv_inplace(|v| v / scaler.capacity_kw);
    }
    out.scaler = Some(scaler.clone());
    Ok(out)
}

//! Domain types shared by every other module: quantile sets, multi-output
//! quantile matrices, prediction intervals, PV series, weather forecast sets
//! and the gate schedule with its horizon arithmetic.

use chrono::{NaiveDateTime, TimeDelta};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minutes per horizon step. Everything in the pipeline runs on this grid.
pub const STEP_MINUTES: i64 = 15;

/// Number of 15-minute steps in a day.
pub const STEPS_PER_DAY: usize = 96;

/// Length of the past-PV context consumed by encoder models (3 hours).
pub const PAST_PV_STEPS: usize = 12;

/// Installed capacity of the reference plant, in kW.
pub const DEFAULT_CAPACITY_KW: f64 = 466.4;

#[derive(Debug, Error, PartialEq)]
pub enum CoreError {
    #[error("quantile levels must be strictly increasing inside (0,1)")]
    InvalidQuantileLevels,
    #[error("quantile level {0} is not a member of the level set")]
    MissingQuantileLevel(f64),
    #[error("horizon step {0} is outside the forecast horizon")]
    StepOutOfRange(usize),
    #[error("interval coverage parameter alpha={0} must lie in (0, 1]")]
    InvalidAlpha(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("interval bounds are inverted: lower {lower} > upper {upper}")]
    InvertedInterval { lower: f64, upper: f64 },
    #[error("installed capacity must be positive, got {0}")]
    NonPositiveCapacity(f64),
    #[error("series must hold at least one value")]
    EmptySeries,
    #[error("weather issue hour {0} is not one of 0, 6, 12, 18")]
    InvalidIssueHour(u32),
}

/// The ordered set of nominal quantile levels shared by all models and scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileLevels {
    levels: Vec<f64>,
}

impl QuantileLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self, CoreError> {
        if levels.is_empty() {
            return Err(CoreError::InvalidQuantileLevels);
        }
        let strictly_increasing = levels.windows(2).all(|w| w[0] < w[1]);
        let in_open_unit = levels.iter().all(|&q| q > 0.0 && q < 1.0);
        if !strictly_increasing || !in_open_unit {
            return Err(CoreError::InvalidQuantileLevels);
        }
        Ok(Self { levels })
    }

    /// The deciles {0.1, 0.2, ..., 0.9}.
    pub fn deciles() -> Self {
        Self {
            levels: (1..=9).map(|i| i as f64 / 10.0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.levels
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().copied()
    }

    /// Column index of a level, matched within 1e-9.
    pub fn index_of(&self, q: f64) -> Result<usize, CoreError> {
        self.levels
            .iter()
            .position(|&l| (l - q).abs() <= 1e-9)
            .ok_or(CoreError::MissingQuantileLevel(q))
    }

    pub fn contains(&self, q: f64) -> bool {
        self.index_of(q).is_ok()
    }
}

impl Default for QuantileLevels {
    fn default() -> Self {
        Self::deciles()
    }
}

/// A central prediction interval with nominal coverage `1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
}

impl PredictionInterval {
    /// `alpha` may be 1.0, in which case the interval degenerates to the median.
    pub fn new(alpha: f64, lower: f64, upper: f64) -> Result<Self, CoreError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(CoreError::InvalidAlpha(alpha));
        }
        if lower > upper {
            return Err(CoreError::InvertedInterval { lower, upper });
        }
        Ok(Self { alpha, lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Forecast issue gates: one day-ahead gate and four intraday gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    DayAhead12,
    Intra00,
    Intra06,
    Intra12,
    Intra18,
}

impl Gate {
    pub const ALL: [Gate; 5] = [
        Gate::DayAhead12,
        Gate::Intra00,
        Gate::Intra06,
        Gate::Intra12,
        Gate::Intra18,
    ];

    pub fn schedule(self) -> GateSchedule {
        match self {
            Gate::DayAhead12 => GateSchedule::new(self, 11, 80, false),
            Gate::Intra00 => GateSchedule::new(self, 11, 80, false),
            Gate::Intra06 => GateSchedule::new(self, 24, 80, true),
            Gate::Intra12 => GateSchedule::new(self, 48, 80, true),
            Gate::Intra18 => GateSchedule::new(self, 72, 80, true),
        }
    }

    /// Issue time offset from midnight of the target day, in minutes.
    /// Negative for the day-ahead gate, which is issued the previous day.
    pub fn issue_offset_minutes(self) -> i64 {
        match self {
            Gate::DayAhead12 => -12 * 60,
            Gate::Intra00 => 0,
            Gate::Intra06 => 6 * 60,
            Gate::Intra12 => 12 * 60,
            Gate::Intra18 => 18 * 60,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::DayAhead12 => "dayahead12",
            Gate::Intra00 => "intra00",
            Gate::Intra06 => "intra06",
            Gate::Intra12 => "intra12",
            Gate::Intra18 => "intra18",
        }
    }

    pub fn parse(s: &str) -> Option<Gate> {
        match s.to_ascii_lowercase().as_str() {
            "dayahead12" | "dayahead" | "da12" => Some(Gate::DayAhead12),
            "intra00" | "00" => Some(Gate::Intra00),
            "intra06" | "06" => Some(Gate::Intra06),
            "intra12" | "12" => Some(Gate::Intra12),
            "intra18" | "18" => Some(Gate::Intra18),
            _ => None,
        }
    }
}

impl std::fmt::Display for Gate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Issue gate plus the cropped horizon it forecasts, in day-quarter indices.
///
/// `k` indexes the 96 quarters of the target day; the prediction horizon is
/// cropped because the plant never generates outside `11 <= k <= 80`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSchedule {
    pub gate: Gate,
    pub horizon_start_k: usize,
    pub horizon_end_k: usize,
    pub uses_past_pv: bool,
}

impl GateSchedule {
    fn new(gate: Gate, start: usize, end: usize, uses_past_pv: bool) -> Self {
        Self {
            gate,
            horizon_start_k: start,
            horizon_end_k: end,
            uses_past_pv,
        }
    }

    /// Number of forecast steps T, end inclusive.
    pub fn horizon_length(&self) -> usize {
        self.horizon_end_k - self.horizon_start_k + 1
    }

    pub fn horizon_indices(&self) -> Vec<usize> {
        (self.horizon_start_k..=self.horizon_end_k).collect()
    }

    /// Width of the weather feature block: two channels per horizon step.
    pub fn n_weather_features(&self) -> usize {
        2 * self.horizon_length()
    }
}

/// A uniformly sampled PV power series.
///
/// Power is clipped to `[0, capacity]` on construction; the plant cannot
/// physically leave that range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvSeries {
    pub start: NaiveDateTime,
    pub resolution_min: u32,
    pub capacity_kw: f64,
    power_kw: Vec<f64>,
}

impl PvSeries {
    pub fn new(
        start: NaiveDateTime,
        resolution_min: u32,
        capacity_kw: f64,
        mut power_kw: Vec<f64>,
    ) -> Result<Self, CoreError> {
        if capacity_kw <= 0.0 {
            return Err(CoreError::NonPositiveCapacity(capacity_kw));
        }
        if power_kw.is_empty() {
            return Err(CoreError::EmptySeries);
        }
        for p in &mut power_kw {
            *p = p.clamp(0.0, capacity_kw);
        }
        Ok(Self {
            start,
            resolution_min,
            capacity_kw,
            power_kw,
        })
    }

    pub fn len(&self) -> usize {
        self.power_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_kw.is_empty()
    }

    pub fn power(&self) -> &[f64] {
        &self.power_kw
    }

    pub fn timestamp(&self, idx: usize) -> NaiveDateTime {
        self.start + TimeDelta::minutes(self.resolution_min as i64 * idx as i64)
    }

    /// Index of the sample taken at `t`, if it falls exactly on the grid.
    pub fn index_of(&self, t: NaiveDateTime) -> Option<usize> {
        let minutes = (t - self.start).num_minutes();
        if minutes < 0 || minutes % self.resolution_min as i64 != 0 {
            return None;
        }
        let idx = (minutes / self.resolution_min as i64) as usize;
        (idx < self.power_kw.len()).then_some(idx)
    }
}

/// One numerical weather run: irradiance and 2-m temperature on the 15-minute
/// grid, issued at one of the four daily gates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherForecastSet {
    pub issue_time: NaiveDateTime,
    /// Value `i` is valid at `issue_time + i * 15 min`.
    pub irradiance_wm2: Vec<f64>,
    pub temperature_c: Vec<f64>,
}

impl WeatherForecastSet {
    pub fn new(
        issue_time: NaiveDateTime,
        irradiance_wm2: Vec<f64>,
        temperature_c: Vec<f64>,
    ) -> Result<Self, CoreError> {
        use chrono::Timelike;
        if !matches!(issue_time.hour(), 0 | 6 | 12 | 18) || issue_time.minute() != 0 {
            return Err(CoreError::InvalidIssueHour(issue_time.hour()));
        }
        if irradiance_wm2.len() != temperature_c.len() {
            return Err(CoreError::DimensionMismatch {
                expected: irradiance_wm2.len(),
                got: temperature_c.len(),
            });
        }
        // Runs extend at most 10 days ahead.
        let max_steps = 10 * STEPS_PER_DAY;
        if irradiance_wm2.len() > max_steps {
            return Err(CoreError::DimensionMismatch {
                expected: max_steps,
                got: irradiance_wm2.len(),
            });
        }
        Ok(Self {
            issue_time,
            irradiance_wm2,
            temperature_c,
        })
    }

    pub fn horizon_steps(&self) -> usize {
        self.irradiance_wm2.len()
    }

    /// Step offset of `valid` within this run, if on-grid and in range.
    pub fn step_of(&self, valid: NaiveDateTime) -> Option<usize> {
        let minutes = (valid - self.issue_time).num_minutes();
        if minutes < 0 || minutes % STEP_MINUTES != 0 {
            return None;
        }
        let idx = (minutes / STEP_MINUTES) as usize;
        (idx < self.horizon_steps()).then_some(idx)
    }
}

/// The multi-output quantile forecast: a T x Q matrix of power values issued
/// at one time, row `r` for horizon step `horizon_indices[r]`, column `c` for
/// quantile level `levels[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMatrix {
    pub issue_time: NaiveDateTime,
    pub horizon_indices: Vec<usize>,
    pub levels: QuantileLevels,
    values: Array2<f64>,
}

impl QuantileMatrix {
    pub fn new(
        issue_time: NaiveDateTime,
        horizon_indices: Vec<usize>,
        levels: QuantileLevels,
        values: Array2<f64>,
    ) -> Result<Self, CoreError> {
        if values.nrows() != horizon_indices.len() {
            return Err(CoreError::DimensionMismatch {
                expected: horizon_indices.len(),
                got: values.nrows(),
            });
        }
        if values.ncols() != levels.len() {
            return Err(CoreError::DimensionMismatch {
                expected: levels.len(),
                got: values.ncols(),
            });
        }
        Ok(Self {
            issue_time,
            horizon_indices,
            levels,
            values,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_quantiles(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, r: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(r)
    }

    /// Row position of horizon step `k`.
    pub fn row_of_step(&self, k: usize) -> Result<usize, CoreError> {
        self.horizon_indices
            .iter()
            .position(|&h| h == k)
            .ok_or(CoreError::StepOutOfRange(k))
    }

    /// Central prediction interval with nominal coverage `1 - alpha` at
    /// horizon step `k`, bounded by the alpha/2 and 1 - alpha/2 quantiles.
    pub fn central_interval(&self, alpha: f64, k: usize) -> Result<PredictionInterval, CoreError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(CoreError::InvalidAlpha(alpha));
        }
        let lo_col = self.levels.index_of(alpha / 2.0)?;
        let hi_col = self.levels.index_of(1.0 - alpha / 2.0)?;
        let row = self.row_of_step(k)?;
        PredictionInterval::new(alpha, self.values[(row, lo_col)], self.values[(row, hi_col)])
    }

    /// Repairs quantile crossing by sorting each row ascending. Preserves the
    /// multiset of row values and never increases the total pinball loss.
    pub fn enforce_monotonicity(&mut self) {
        for mut row in self.values.rows_mut() {
            let mut buf: Vec<f64> = row.to_vec();
            buf.sort_by(|a, b| a.partial_cmp(b).expect("non-finite quantile value"));
            for (dst, src) in row.iter_mut().zip(buf) {
                *dst = src;
            }
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.values
            .rows()
            .into_iter()
            .all(|r| r.windows(2).into_iter().all(|w| w[0] <= w[1]))
    }

    /// Clips all values into the physically feasible range.
    pub fn clip(&mut self, capacity_kw: f64) {
        self.values.mapv_inplace(|v| v.clamp(0.0, capacity_kw));
    }

    /// Multiplies all values by a positive factor, e.g. to convert
    /// capacity-normalized forecasts back to kW.
    pub fn scale(&mut self, factor: f64) {
        debug_assert!(factor > 0.0);
        self.values.mapv_inplace(|v| v * factor);
    }

    /// The median column, used as the point forecast.
    pub fn median_column(&self) -> Result<Vec<f64>, CoreError> {
        let col = self.levels.index_of(0.5)?;
        Ok(self.values.column(col).to_vec())
    }
}

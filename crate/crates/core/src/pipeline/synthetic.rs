//! Synthetic plant: a clear-sky envelope on the 96-quarter day grid,
//! modulated by a temporally correlated cloud transmission process with a
//! closed-form marginal distribution, plus weather runs derived from the
//! same truth with lead-time-growing noise.
//!
//! The cloud process is a stationary Gaussian AR(1) chain mapped through the
//! normal CDF, so its uniform transform is exact and the per-step marginal
//! quantiles of generated power are available analytically for oracle tests.

use chrono::{NaiveDate, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::types::{PvSeries, WeatherForecastSet, STEPS_PER_DAY, STEP_MINUTES};

use super::Dataset;

/// Clear-sky peak irradiance, W/m2.
const IRR_SCALE: f64 = 1000.0;
/// Cloud transmission floor: heavy overcast still lets some light through.
const TRANSMISSION_FLOOR: f64 = 0.12;
/// Shape of the transmission marginal; below 1 skews toward clear skies.
const TRANSMISSION_SHAPE: f64 = 0.8;
/// AR(1) coefficient per 15-minute step (half-life around six hours).
const CLOUD_PERSISTENCE: f64 = 0.97;
/// Weather runs extend 48 hours ahead.
const FORECAST_HORIZON_STEPS: usize = 192;
/// Irradiance forecast noise: fraction of clear-sky scale at lead zero and
/// added fraction per day of lead, scaled by the valid step's envelope.
const IRR_NOISE_BASE: f64 = 0.05;
const IRR_NOISE_PER_DAY: f64 = 0.12;
const TEMP_NOISE_BASE: f64 = 0.5;
const TEMP_NOISE_PER_DAY: f64 = 1.5;

/// First generated day; the pipeline only does uniform-grid arithmetic, so
/// any fixed anchor works.
const ANCHOR: (i32, u32, u32) = (2020, 4, 4);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub days: usize,
    pub seed: u64,
    pub capacity_kw: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            days: 157,
            seed: 0,
            capacity_kw: crate::types::DEFAULT_CAPACITY_KW,
        }
    }
}

/// Closed-form ground truth behind a generated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub capacity_kw: f64,
}

impl SyntheticTruth {
    /// Clear-sky envelope over the day quarters: zero outside `11..=80`,
    /// a positive sine arch inside.
    pub fn envelope(k: usize) -> f64 {
        if (11..=80).contains(&k) {
            (std::f64::consts::PI * (k as f64 - 10.0) / 71.0).sin()
        } else {
            0.0
        }
    }

    /// Marginal quantile of the cloud transmission.
    pub fn transmission_quantile(q: f64) -> f64 {
        TRANSMISSION_FLOOR + (1.0 - TRANSMISSION_FLOOR) * q.powf(TRANSMISSION_SHAPE)
    }

    /// Marginal q-quantile of generated power at day quarter `k`, in kW.
    pub fn step_quantile(&self, k: usize, q: f64) -> f64 {
        self.capacity_kw * Self::envelope(k) * Self::transmission_quantile(q)
    }
}

pub struct Synthetic {
    pub dataset: Dataset,
    pub truth: SyntheticTruth,
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 pulled away from zero.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Abramowitz-Stegun approximation of the standard normal CDF.
fn normal_cdf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.2316419 * x.abs());
    let poly = t
        * (0.319381530
            + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let upper = pdf * poly;
    if x >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}

/// Generates `cfg.days` days of PV measurements plus weather runs at the
/// four daily gates, including the runs of the warm-up day before day zero
/// so the day-ahead gate is servable from the first day. Bit-identical for
/// identical configurations.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Synthetic {
    assert!(cfg.days >= 2, "synthetic span needs at least two days");
    assert!(cfg.capacity_kw > 0.0);

    let warmup_days = 1usize;
    let total_steps = (cfg.days + warmup_days) * STEPS_PER_DAY;

    // Correlated cloud state over the whole span, one chain, exact N(0,1)
    // marginals; the transmission is its CDF transform.
    let mut rng_cloud = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gaussian = Vec::with_capacity(total_steps);
    let mut g = standard_normal(&mut rng_cloud);
    gaussian.push(g);
    let innovation_scale = (1.0 - CLOUD_PERSISTENCE * CLOUD_PERSISTENCE).sqrt();
    for _ in 1..total_steps {
        g = CLOUD_PERSISTENCE * g + innovation_scale * standard_normal(&mut rng_cloud);
        gaussian.push(g);
    }
    let transmission: Vec<f64> = gaussian
        .iter()
        .map(|&g| SyntheticTruth::transmission_quantile(normal_cdf(g)))
        .collect();

    let envelope_at = |global_step: usize| SyntheticTruth::envelope(global_step % STEPS_PER_DAY);
    let irr_true: Vec<f64> = (0..total_steps)
        .map(|t| IRR_SCALE * envelope_at(t) * transmission[t])
        .collect();
    let temp_true: Vec<f64> = (0..total_steps)
        .map(|t| 8.0 + 14.0 * envelope_at(t) * transmission[t])
        .collect();

    let anchor = NaiveDate::from_ymd_opt(ANCHOR.0, ANCHOR.1, ANCHOR.2)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let series_start = anchor + TimeDelta::days(warmup_days as i64);

    let power: Vec<f64> = (warmup_days * STEPS_PER_DAY..total_steps)
        .map(|t| cfg.capacity_kw / IRR_SCALE * irr_true[t])
        .collect();
    let pv = PvSeries::new(series_start, STEP_MINUTES as u32, cfg.capacity_kw, power)
        .expect("generated series is well-formed");

    // Weather runs: truth plus lead-growing noise, scaled by the valid
    // step's envelope so nights stay exactly zero.
    let mut rng_weather = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e3779b97f4a7c15);
    let mut weather = Vec::new();
    for day in 0..cfg.days + warmup_days {
        for issue_hour in [0usize, 6, 12, 18] {
            let issue_step = day * STEPS_PER_DAY + issue_hour * 4;
            let issue_time = anchor + TimeDelta::minutes((issue_step as i64) * STEP_MINUTES);
            let horizon = FORECAST_HORIZON_STEPS.min(total_steps - issue_step);
            let mut irr = Vec::with_capacity(horizon);
            let mut temp = Vec::with_capacity(horizon);
            for lead in 0..horizon {
                let t = issue_step + lead;
                let lead_days = lead as f64 / STEPS_PER_DAY as f64;
                let env = envelope_at(t);
                let sigma_irr = IRR_SCALE * (IRR_NOISE_BASE + IRR_NOISE_PER_DAY * lead_days) * env;
                let sigma_temp = TEMP_NOISE_BASE + TEMP_NOISE_PER_DAY * lead_days;
                irr.push((irr_true[t] + sigma_irr * standard_normal(&mut rng_weather)).max(0.0));
                temp.push(temp_true[t] + sigma_temp * standard_normal(&mut rng_weather));
            }
            weather.push(
                WeatherForecastSet::new(issue_time, irr, temp)
                    .expect("generated issue times sit on the gate grid"),
            );
        }
    }

    let dataset = Dataset::new(pv, weather).expect("generated dataset is aligned");
    Synthetic {
        dataset,
        truth: SyntheticTruth {
            capacity_kw: cfg.capacity_kw,
        },
    }
}

//! Proper scoring rules and deterministic errors for forecast quality
//! assessment: the energy-form CRPS estimator computed from a quantile
//! ensemble, the interval score for central prediction intervals, and
//! capacity-normalized MAE/RMSE plus empirical interval coverage.

use crate::types::{CoreError, QuantileMatrix};
use ndarray::ArrayView2;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("ensemble must hold at least one member")]
    EmptyEnsemble,
    #[error("forecasts and observations are not aligned: {0}")]
    AlignmentError(String),
    #[error("capacity must be positive, got {0}")]
    NonPositiveCapacity(f64),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Energy-form CRPS estimator for an observation `y` when the predictive
/// distribution is known only through a finite ensemble of quantile values:
/// the mean absolute deviation from `y` minus half the mean pairwise
/// ensemble spread. Direct double-sum evaluation.
pub fn crps_enrg(ensemble: &[f64], y: f64) -> Result<f64, MetricsError> {
    if ensemble.is_empty() {
        return Err(MetricsError::EmptyEnsemble);
    }
    let q = ensemble.len() as f64;
    let deviation: f64 = ensemble.iter().map(|&v| (v - y).abs()).sum();
    let mut spread = 0.0;
    for &a in ensemble {
        for &b in ensemble {
            spread += (a - b).abs();
        }
    }
    Ok(deviation / q - spread / (2.0 * q * q))
}

/// Same estimator evaluated through the sorted-sample identity
/// `sum_ij |x_i - x_j| = 2 * sum_i (2i - Q - 1) * x_(i)` (1-based, ascending),
/// bringing the pairwise term down to O(Q log Q).
pub fn crps_enrg_sorted(ensemble: &[f64], y: f64) -> Result<f64, MetricsError> {
    if ensemble.is_empty() {
        return Err(MetricsError::EmptyEnsemble);
    }
    let q = ensemble.len();
    let mut sorted = ensemble.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite ensemble member"));
    let deviation: f64 = sorted.iter().map(|&v| (v - y).abs()).sum();
    let mut pair_sum = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        pair_sum += (2.0 * (i + 1) as f64 - q as f64 - 1.0) * v;
    }
    let qf = q as f64;
    Ok(deviation / qf - pair_sum / (qf * qf))
}

/// CRPS of an evaluation set, per horizon step and overall.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CrpsSummary {
    pub horizon_indices: Vec<usize>,
    /// Mean CRPS over the evaluation samples, one entry per horizon step.
    pub per_step: Vec<f64>,
    /// Mean of the per-step values over the whole horizon.
    pub overall: f64,
}

/// Mean CRPS over an aligned evaluation set. Every forecast matrix must share
/// the same horizon; observation row `i` belongs to forecast `i`.
pub fn crps_summary(
    forecasts: &[QuantileMatrix],
    observations: ArrayView2<'_, f64>,
) -> Result<CrpsSummary, MetricsError> {
    let first = forecasts
        .first()
        .ok_or_else(|| MetricsError::AlignmentError("no forecasts supplied".into()))?;
    let horizon = first.horizon_indices.clone();
    if observations.nrows() != forecasts.len() {
        return Err(MetricsError::AlignmentError(format!(
            "{} forecasts vs {} observation rows",
            forecasts.len(),
            observations.nrows()
        )));
    }
    if observations.ncols() != horizon.len() {
        return Err(MetricsError::AlignmentError(format!(
            "horizon length {} vs {} observation columns",
            horizon.len(),
            observations.ncols()
        )));
    }
    let mut per_step = vec![0.0; horizon.len()];
    for (zm, obs_row) in forecasts.iter().zip(observations.rows()) {
        if zm.horizon_indices != horizon {
            return Err(MetricsError::AlignmentError(
                "forecasts carry differing horizons".into(),
            ));
        }
        for (step, (row, &y)) in zm.values().rows().into_iter().zip(obs_row).enumerate() {
            per_step[step] += crps_enrg_sorted(row.as_slice().expect("contiguous row"), y)?;
        }
    }
    let m = forecasts.len() as f64;
    for v in &mut per_step {
        *v /= m;
    }
    let overall = per_step.iter().sum::<f64>() / per_step.len() as f64;
    Ok(CrpsSummary {
        horizon_indices: horizon,
        per_step,
        overall,
    })
}

/// Interval score for central `(1 - alpha)` prediction intervals, averaged
/// per sample over the horizon and then over samples: interval width plus
/// `2/alpha` times any violation of either bound.
pub fn interval_score(
    alpha: f64,
    forecasts: &[QuantileMatrix],
    observations: ArrayView2<'_, f64>,
) -> Result<f64, MetricsError> {
    check_alignment(forecasts, observations)?;
    let mut total = 0.0;
    for (zm, obs_row) in forecasts.iter().zip(observations.rows()) {
        let mut sample_sum = 0.0;
        for (r, &y) in obs_row.iter().enumerate() {
            let k = zm.horizon_indices[r];
            let pi = zm.central_interval(alpha, k)?;
            let mut s = pi.width();
            if y <= pi.lower {
                s += 2.0 / alpha * (pi.lower - y);
            }
            if y >= pi.upper {
                s += 2.0 / alpha * (y - pi.upper);
            }
            sample_sum += s;
        }
        total += sample_sum / obs_row.len() as f64;
    }
    Ok(total / forecasts.len() as f64)
}

/// Fraction of (sample, step) pairs whose observation falls inside the
/// central `(1 - alpha)` interval.
pub fn empirical_coverage(
    alpha: f64,
    forecasts: &[QuantileMatrix],
    observations: ArrayView2<'_, f64>,
) -> Result<f64, MetricsError> {
    check_alignment(forecasts, observations)?;
    let mut inside = 0usize;
    let mut count = 0usize;
    for (zm, obs_row) in forecasts.iter().zip(observations.rows()) {
        for (r, &y) in obs_row.iter().enumerate() {
            let pi = zm.central_interval(alpha, zm.horizon_indices[r])?;
            if pi.contains(y) {
                inside += 1;
            }
            count += 1;
        }
    }
    Ok(inside as f64 / count as f64)
}

/// Mean absolute error over all (sample, step) pairs, normalized by the
/// installed capacity and expressed in percent.
pub fn nmae(
    point_forecasts: ArrayView2<'_, f64>,
    observations: ArrayView2<'_, f64>,
    capacity_kw: f64,
) -> Result<f64, MetricsError> {
    check_shapes(point_forecasts, observations, capacity_kw)?;
    let n = point_forecasts.len() as f64;
    let mae = point_forecasts
        .iter()
        .zip(observations.iter())
        .map(|(f, y)| (f - y).abs())
        .sum::<f64>()
        / n;
    Ok(100.0 * mae / capacity_kw)
}

/// Root-mean-square error over all (sample, step) pairs, normalized by the
/// installed capacity and expressed in percent.
pub fn nrmse(
    point_forecasts: ArrayView2<'_, f64>,
    observations: ArrayView2<'_, f64>,
    capacity_kw: f64,
) -> Result<f64, MetricsError> {
    check_shapes(point_forecasts, observations, capacity_kw)?;
    let n = point_forecasts.len() as f64;
    let mse = point_forecasts
        .iter()
        .zip(observations.iter())
        .map(|(f, y)| (f - y) * (f - y))
        .sum::<f64>()
        / n;
    Ok(100.0 * mse.sqrt() / capacity_kw)
}

fn check_shapes(
    forecasts: ArrayView2<'_, f64>,
    observations: ArrayView2<'_, f64>,
    capacity_kw: f64,
) -> Result<(), MetricsError> {
    if capacity_kw <= 0.0 {
        return Err(MetricsError::NonPositiveCapacity(capacity_kw));
    }
    if forecasts.dim() != observations.dim() {
        return Err(MetricsError::AlignmentError(format!(
            "forecast shape {:?} vs observation shape {:?}",
            forecasts.dim(),
            observations.dim()
        )));
    }
    if forecasts.is_empty() {
        return Err(MetricsError::AlignmentError("empty evaluation set".into()));
    }
    Ok(())
}

fn check_alignment(
    forecasts: &[QuantileMatrix],
    observations: ArrayView2<'_, f64>,
) -> Result<(), MetricsError> {
    let first = forecasts
        .first()
        .ok_or_else(|| MetricsError::AlignmentError("no forecasts supplied".into()))?;
    if observations.nrows() != forecasts.len() || observations.ncols() != first.n_steps() {
        return Err(MetricsError::AlignmentError(format!(
            "{} forecasts of {} steps vs observations {:?}",
            forecasts.len(),
            first.n_steps(),
            observations.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::QuantileLevels;
    use chrono::NaiveDateTime;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn issue() -> NaiveDateTime {
        NaiveDateTime::parse_from_str("2020-08-02T06:00:00", "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    fn deciles_zm(rows: Vec<[f64; 9]>) -> QuantileMatrix {
        let t = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        QuantileMatrix::new(
            issue(),
            (0..t).collect(),
            QuantileLevels::deciles(),
            Array2::from_shape_vec((t, 9), flat).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn degenerate_ensemble_reduces_to_absolute_error() {
        // A deterministic forecast scores its MAE.
        assert!((crps_enrg(&[3.0; 9], 1.5).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(crps_enrg(&[2.0], 2.0).unwrap(), 0.0);
    }

    #[test]
    fn two_member_ensemble_by_enumeration() {
        // (|0-0| + |1-0|)/2 - (0 + 1 + 1 + 0)/8 = 0.5 - 0.25
        assert!((crps_enrg(&[0.0, 1.0], 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((crps_enrg_sorted(&[1.0, 0.0], 0.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_member_sorted_estimator_is_absolute_error() {
        assert_eq!(crps_enrg_sorted(&[4.0], 1.0).unwrap(), 3.0);
    }

    #[test]
    fn empty_ensemble_is_rejected() {
        assert_eq!(crps_enrg(&[], 0.0).unwrap_err(), MetricsError::EmptyEnsemble);
        assert_eq!(
            crps_enrg_sorted(&[], 0.0).unwrap_err(),
            MetricsError::EmptyEnsemble
        );
    }

    proptest! {
        #[test]
        fn sorted_estimator_agrees_with_double_sum(
            members in proptest::collection::vec(-100.0f64..100.0, 1..12),
            y in -100.0f64..100.0,
        ) {
            let a = crps_enrg(&members, y).unwrap();
            let b = crps_enrg_sorted(&members, y).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn crps_is_nonnegative(
            members in proptest::collection::vec(-50.0f64..50.0, 1..10),
            y in -50.0f64..50.0,
        ) {
            prop_assert!(crps_enrg(&members, y).unwrap() >= -1e-12);
        }

        #[test]
        fn crps_translation_invariance_and_scale_equivariance(
            members in proptest::collection::vec(-50.0f64..50.0, 1..10),
            y in -50.0f64..50.0,
            c in 0.1f64..10.0,
            shift in -20.0f64..20.0,
        ) {
            let base = crps_enrg(&members, y).unwrap();
            let shifted: Vec<f64> = members.iter().map(|v| v + shift).collect();
            prop_assert!((crps_enrg(&shifted, y + shift).unwrap() - base).abs() <= 1e-10);
            let scaled: Vec<f64> = members.iter().map(|v| v * c).collect();
            prop_assert!((crps_enrg(&scaled, y * c).unwrap() - c * base).abs() <= 1e-9);
        }

        #[test]
        fn interval_score_dominates_width(
            y in -5.0f64..15.0,
        ) {
            let zm = deciles_zm(vec![[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]]);
            let obs = array![[y]];
            let score = interval_score(0.2, std::slice::from_ref(&zm), obs.view()).unwrap();
            let width = zm.central_interval(0.2, 0).unwrap().width();
            prop_assert!(score >= width - 1e-12);
            if y > 1.0 && y < 9.0 {
                prop_assert!((score - width).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn crps_zero_only_when_all_members_hit_the_observation() {
        assert_eq!(crps_enrg(&[2.0, 2.0, 2.0], 2.0).unwrap(), 0.0);
        assert!(crps_enrg(&[2.0, 2.1], 2.0).unwrap() > 0.0);
    }

    #[test]
    fn crps_summary_means_over_samples_then_steps() {
        let f1 = deciles_zm(vec![[0.0; 9], [1.0; 9]]);
        let f2 = deciles_zm(vec![[2.0; 9], [1.0; 9]]);
        let obs = array![[0.0, 1.0], [0.0, 3.0]];
        let s = crps_summary(&[f1, f2], obs.view()).unwrap();
        // step 0: (|0-0| + |2-0|)/2 = 1; step 1: (0 + 2)/2 = 1
        assert_eq!(s.per_step, vec![1.0, 1.0]);
        assert_eq!(s.overall, 1.0);
    }

    #[test]
    fn crps_summary_singleton_equals_row_score() {
        let zm = deciles_zm(vec![[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]]);
        let direct = crps_enrg(
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
            4.2,
        )
        .unwrap();
        let s = crps_summary(&[zm], array![[4.2]].view()).unwrap();
        assert!((s.overall - direct).abs() < 1e-12);
    }

    #[test]
    fn interval_score_hand_derived_values() {
        let zm = deciles_zm(vec![[1.0, 1.5, 1.8, 1.9, 2.0, 2.1, 2.2, 2.5, 3.0]]);
        // inside: width only
        let s = interval_score(0.2, std::slice::from_ref(&zm), array![[2.0]].view()).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        // above: width + (2/alpha) * (y - upper) = 2 + 10 * 1 = 12
        let s = interval_score(0.2, std::slice::from_ref(&zm), array![[4.0]].view()).unwrap();
        assert!((s - 12.0).abs() < 1e-12);
        // below by 0.5: 2 + 10 * 0.5 = 7
        let s = interval_score(0.2, &[zm], array![[0.5]].view()).unwrap();
        assert!((s - 7.0).abs() < 1e-12);
    }

    #[test]
    fn interval_score_zero_width_perfect_interval() {
        let zm = deciles_zm(vec![[2.0; 9]]);
        let s = interval_score(0.2, &[zm], array![[2.0]].view()).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn interval_score_violations_scale_with_two_over_alpha() {
        let zm = deciles_zm(vec![[1.0, 1.5, 1.8, 1.9, 2.0, 2.1, 2.2, 2.5, 3.0]]);
        let s1 = interval_score(0.2, std::slice::from_ref(&zm), array![[4.0]].view()).unwrap();
        let s2 = interval_score(0.2, &[zm], array![[5.0]].view()).unwrap();
        assert!((s2 - s1 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn interval_score_requires_both_levels() {
        let zm = QuantileMatrix::new(
            issue(),
            vec![0],
            QuantileLevels::new(vec![0.25, 0.5, 0.75]).unwrap(),
            array![[1.0, 2.0, 3.0]],
        )
        .unwrap();
        let err = interval_score(0.2, &[zm], array![[2.0]].view()).unwrap_err();
        assert_eq!(err, MetricsError::Core(CoreError::MissingQuantileLevel(0.1)));
    }

    #[test]
    fn nmae_and_nrmse_identities() {
        let obs = array![[10.0, 20.0], [30.0, 40.0]];
        // perfect forecast
        assert_eq!(nmae(obs.view(), obs.view(), 100.0).unwrap(), 0.0);
        assert_eq!(nrmse(obs.view(), obs.view(), 100.0).unwrap(), 0.0);
        // constant absolute error of 5 kW on 100 kW capacity: both 5%
        let fc = obs.mapv(|v| v + 5.0);
        assert!((nmae(fc.view(), obs.view(), 100.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((nrmse(fc.view(), obs.view(), 100.0).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn nrmse_exceeds_nmae_for_uneven_errors() {
        let obs = array![[0.0, 0.0], [0.0, 0.0]];
        let fc = array![[0.0, 2.0], [0.0, 2.0]];
        let a = nmae(fc.view(), obs.view(), 100.0).unwrap();
        let r = nrmse(fc.view(), obs.view(), 100.0).unwrap();
        assert!(r > a, "nrmse {r} should exceed nmae {a}");
    }

    #[test]
    fn nmae_rejects_bad_capacity_and_misalignment() {
        let a = array![[1.0]];
        let b = array![[1.0, 2.0]];
        assert!(matches!(
            nmae(a.view(), a.view(), 0.0).unwrap_err(),
            MetricsError::NonPositiveCapacity(_)
        ));
        assert!(matches!(
            nmae(a.view(), b.view(), 10.0).unwrap_err(),
            MetricsError::AlignmentError(_)
        ));
    }

    #[test]
    fn coverage_counts_interval_hits() {
        let zm = deciles_zm(vec![[1.0, 1.5, 1.8, 1.9, 2.0, 2.1, 2.2, 2.5, 3.0]]);
        let all_in = empirical_coverage(0.2, &[zm.clone(), zm.clone()], array![[2.0], [1.0]].view())
            .unwrap();
        assert_eq!(all_in, 1.0);
        let none_in =
            empirical_coverage(0.2, &[zm.clone(), zm], array![[5.0], [-1.0]].view()).unwrap();
        assert_eq!(none_in, 0.0);
    }
}

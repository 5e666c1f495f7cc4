//! Evaluation metrics: loss, prediction error, and thresholded accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SfdlError};
use crate::model::{self, ParameterVector, PredictorConfig, TrajectorySample};

/// Waypoints within this Euclidean distance of the observation count as
/// positive predictions.
pub const ACCURACY_THRESHOLD_M: f64 = 10.0;

/// Whether accuracy classifies each waypoint independently or whole
/// trajectories by their mean error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AccuracyMode {
    #[default]
    PerWaypoint,
    PerTrajectory,
}

impl std::str::FromStr for AccuracyMode {
    type Err = SfdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-waypoint" | "waypoint" => Ok(AccuracyMode::PerWaypoint),
            "per-trajectory" | "trajectory" => Ok(AccuracyMode::PerTrajectory),
            other => Err(SfdlError::Parse(format!(
                "unknown accuracy mode '{other}' (expected per-waypoint or per-trajectory)"
            ))),
        }
    }
}

fn check_pairs(predictions: &[[f64; 2]], observations: &[[f64; 2]]) -> Result<()> {
    if predictions.is_empty() {
        return Err(SfdlError::invalid("metric over empty sequences"));
    }
    if predictions.len() != observations.len() {
        return Err(SfdlError::invalid(format!(
            "{} predictions but {} observations",
            predictions.len(),
            observations.len()
        )));
    }
    Ok(())
}

/// Mean squared Euclidean deviation over paired points.
pub fn metric_loss(predictions: &[[f64; 2]], observations: &[[f64; 2]]) -> Result<f64> {
    check_pairs(predictions, observations)?;
    let acc: f64 = predictions
        .iter()
        .zip(observations)
        .map(|(p, o)| {
            let dx = p[0] - o[0];
            let dy = p[1] - o[1];
            dx * dx + dy * dy
        })
        .sum();
    Ok(acc / predictions.len() as f64)
}

/// Mean Euclidean distance over paired points, meters.
pub fn metric_prediction_error(predictions: &[[f64; 2]], observations: &[[f64; 2]]) -> Result<f64> {
    check_pairs(predictions, observations)?;
    let acc: f64 = predictions
        .iter()
        .zip(observations)
        .map(|(p, o)| ((p[0] - o[0]).powi(2) + (p[1] - o[1]).powi(2)).sqrt())
        .sum();
    Ok(acc / predictions.len() as f64)
}

/// Fraction of waypoints whose Euclidean error is within `threshold_m`
/// (inclusive).
pub fn metric_prediction_accuracy(
    predictions: &[[f64; 2]],
    observations: &[[f64; 2]],
    threshold_m: f64,
) -> Result<f64> {
    check_pairs(predictions, observations)?;
    let positives = predictions
        .iter()
        .zip(observations)
        .filter(|(p, o)| ((p[0] - o[0]).powi(2) + (p[1] - o[1]).powi(2)).sqrt() <= threshold_m)
        .count();
    Ok(positives as f64 / predictions.len() as f64)
}

/// The three indicators for one model over one evaluation batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub loss: f64,
    pub prediction_error: f64,
    pub prediction_accuracy: f64,
}

/// Evaluate a model over a batch: waypoint predictions and observations are
/// paired across all samples, then reduced by the three metrics.
pub fn evaluate_model(
    params: &ParameterVector,
    batch: &[TrajectorySample],
    config: &PredictorConfig,
    threshold_m: f64,
    mode: AccuracyMode,
) -> Result<EvalMetrics> {
    if batch.is_empty() {
        return Err(SfdlError::invalid("evaluation over an empty batch"));
    }
    let mut predictions = Vec::with_capacity(batch.len() * config.horizon);
    let mut observations = Vec::with_capacity(batch.len() * config.horizon);
    let mut trajectory_positives = 0usize;
    for sample in batch {
        let pred = model::predict(params, sample, config)?;
        if mode == AccuracyMode::PerTrajectory {
            let err = metric_prediction_error(&pred, &sample.target)?;
            if err <= threshold_m {
                trajectory_positives += 1;
            }
        }
        predictions.extend_from_slice(&pred);
        observations.extend_from_slice(&sample.target);
    }
    let accuracy = match mode {
        AccuracyMode::PerWaypoint => {
            metric_prediction_accuracy(&predictions, &observations, threshold_m)?
        }
        AccuracyMode::PerTrajectory => trajectory_positives as f64 / batch.len() as f64,
    };
    Ok(EvalMetrics {
        loss: metric_loss(&predictions, &observations)?,
        prediction_error: metric_prediction_error(&predictions, &observations)?,
        prediction_accuracy: accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_sequences_score_perfectly() {
        let pts = vec![[1.0, 2.0], [3.0, -4.0], [0.0, 0.0]];
        assert_eq!(metric_loss(&pts, &pts).unwrap(), 0.0);
        assert_eq!(metric_prediction_error(&pts, &pts).unwrap(), 0.0);
        assert_eq!(
            metric_prediction_accuracy(&pts, &pts, ACCURACY_THRESHOLD_M).unwrap(),
            1.0
        );
    }

    #[test]
    fn single_offset_pair() {
        let pred = vec![[3.0, 4.0]];
        let obs = vec![[0.0, 0.0]];
        assert_eq!(metric_loss(&pred, &obs).unwrap(), 25.0);
        assert_eq!(metric_prediction_error(&pred, &obs).unwrap(), 5.0);
    }

    #[test]
    fn mean_over_mixed_distances() {
        let pred = vec![[5.0, 0.0], [0.0, 0.0]];
        let obs = vec![[0.0, 0.0], [0.0, 0.0]];
        assert_eq!(metric_prediction_error(&pred, &obs).unwrap(), 2.5);
    }

    #[test]
    fn accuracy_threshold_cases() {
        let pred = vec![[5.0, 0.0], [15.0, 0.0]];
        let obs = vec![[0.0, 0.0], [0.0, 0.0]];
        assert_eq!(
            metric_prediction_accuracy(&pred, &obs, ACCURACY_THRESHOLD_M).unwrap(),
            0.5
        );
        // exactly on the threshold counts positive
        let on = vec![[10.0, 0.0]];
        let origin = vec![[0.0, 0.0]];
        assert_eq!(
            metric_prediction_accuracy(&on, &origin, ACCURACY_THRESHOLD_M).unwrap(),
            1.0
        );
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let a = vec![[0.0, 0.0]];
        let b = vec![[0.0, 0.0], [1.0, 1.0]];
        assert!(metric_loss(&a, &b).is_err());
        assert!(metric_prediction_error(&a, &b).is_err());
        assert!(metric_prediction_accuracy(&a, &b, 10.0).is_err());
        assert!(metric_loss(&[], &[]).is_err());
    }

    #[test]
    fn lockstep_permutation_leaves_metrics_unchanged() {
        let pred = vec![[1.0, 0.0], [2.0, 2.0], [5.0, -1.0]];
        let obs = vec![[0.0, 0.0], [2.5, 2.0], [4.0, -2.0]];
        let mut pred_r = pred.clone();
        let mut obs_r = obs.clone();
        pred_r.reverse();
        obs_r.reverse();
        assert!(
            (metric_loss(&pred, &obs).unwrap() - metric_loss(&pred_r, &obs_r).unwrap()).abs()
                < 1e-12
        );
        assert!(
            (metric_prediction_error(&pred, &obs).unwrap()
                - metric_prediction_error(&pred_r, &obs_r).unwrap())
            .abs()
                < 1e-12
        );
    }

    proptest! {
        #[test]
        fn loss_dominates_squared_error(
            pairs in proptest::collection::vec(
                ((-50.0f64..50.0, -50.0f64..50.0), (-50.0f64..50.0, -50.0f64..50.0)),
                1..40
            )
        ) {
            let pred: Vec<[f64; 2]> = pairs.iter().map(|((a, b), _)| [*a, *b]).collect();
            let obs: Vec<[f64; 2]> = pairs.iter().map(|(_, (a, b))| [*a, *b]).collect();
            let loss = metric_loss(&pred, &obs).unwrap();
            let err = metric_prediction_error(&pred, &obs).unwrap();
            prop_assert!(loss + 1e-9 >= err * err);
        }

        #[test]
        fn accuracy_monotone_in_threshold(
            pairs in proptest::collection::vec(
                ((-30.0f64..30.0, -30.0f64..30.0), (-30.0f64..30.0, -30.0f64..30.0)),
                1..40
            )
        ) {
            let pred: Vec<[f64; 2]> = pairs.iter().map(|((a, b), _)| [*a, *b]).collect();
            let obs: Vec<[f64; 2]> = pairs.iter().map(|(_, (a, b))| [*a, *b]).collect();
            let a20 = metric_prediction_accuracy(&pred, &obs, 20.0).unwrap();
            let a10 = metric_prediction_accuracy(&pred, &obs, 10.0).unwrap();
            let a5 = metric_prediction_accuracy(&pred, &obs, 5.0).unwrap();
            prop_assert!(a20 >= a10 && a10 >= a5);
        }
    }
}

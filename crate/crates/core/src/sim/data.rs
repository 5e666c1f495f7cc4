//! Trajectory datasets: synthetic track generation, CSV ingestion, and the
//! windowing that turns tracks into training samples.
//!
//! Tracks are sampled at 0.1 s; history and horizon points subsample at
//! 0.5 s (stride 5), so ten history steps span 5 s and ten horizon steps
//! predict the next 5 s. Sample features and targets live in the local frame
//! anchored at the last observed position.

use std::collections::BTreeMap;
use std::path::Path;

use rand::RngExt;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SfdlError};
use crate::model::{PredictorConfig, TrajectorySample};
use crate::rng::entity_rng;
use crate::sim::scenario::{DataSource, Scenario};
use crate::swarm::VehicleId;

/// Seconds between consecutive track frames.
pub const FRAME_DT: f64 = 0.1;
/// Frames between consecutive history/horizon points (0.5 s).
pub const SAMPLE_STRIDE: usize = 5;
/// Wire size of one model parameter.
pub const WIRE_BYTES_PER_PARAM: u64 = 4;

/// One observation of one vehicle at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub vehicle_id: VehicleId,
    pub frame_id: u64,
    pub x: f64,
    pub y: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub lane_id: i32,
}

/// Frame-sorted tracks for a set of vehicles.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryDataset {
    tracks: BTreeMap<VehicleId, Vec<TrajectoryRecord>>,
    /// Rows discarded during ingestion for non-finite or unparsable fields.
    pub dropped_rows: usize,
}

impl TrajectoryDataset {
    pub fn vehicles(&self) -> impl Iterator<Item = VehicleId> + '_ {
        self.tracks.keys().copied()
    }

    pub fn vehicle_count(&self) -> usize {
        self.tracks.len()
    }

    pub fn track(&self, id: VehicleId) -> Option<&[TrajectoryRecord]> {
        self.tracks.get(&id).map(Vec::as_slice)
    }

    fn insert(&mut self, record: TrajectoryRecord) {
        self.tracks
            .entry(record.vehicle_id)
            .or_default()
            .push(record);
    }

    fn sort_and_check(&mut self) -> Result<()> {
        for (id, track) in &mut self.tracks {
            track.sort_by_key(|r| r.frame_id);
            if track.windows(2).any(|w| w[0].frame_id == w[1].frame_id) {
                return Err(SfdlError::schema(format!(
                    "vehicle {id} has duplicate frame ids"
                )));
            }
        }
        Ok(())
    }

    /// Frames needed beyond a window start: history span plus horizon span.
    pub fn window_span(config: &PredictorConfig) -> usize {
        (config.time_steps - 1 + config.horizon) * SAMPLE_STRIDE
    }

    /// Largest usable window start for a vehicle, if any window fits.
    pub fn max_window_start(&self, id: VehicleId, config: &PredictorConfig) -> Option<usize> {
        let track = self.tracks.get(&id)?;
        track.len().checked_sub(Self::window_span(config) + 1)
    }

    /// Cut the sample whose history ends at
    /// `start + (time_steps - 1) * SAMPLE_STRIDE`.
    pub fn cut_sample(
        &self,
        id: VehicleId,
        start: usize,
        config: &PredictorConfig,
    ) -> Result<TrajectorySample> {
        let track = self
            .tracks
            .get(&id)
            .ok_or_else(|| SfdlError::invalid(format!("no track for vehicle {id}")))?;
        let span = Self::window_span(config);
        if start + span >= track.len() {
            return Err(SfdlError::invalid(format!(
                "window start {start} exceeds track of vehicle {id} ({} frames)",
                track.len()
            )));
        }
        let ref_idx = start + (config.time_steps - 1) * SAMPLE_STRIDE;
        let reference = &track[ref_idx];

        let mut history = Vec::with_capacity(config.input_dim());
        let time_norm = (config.time_steps - 1).max(1) as f64;
        for j in 0..config.time_steps {
            let idx = start + j * SAMPLE_STRIDE;
            let r = &track[idx];
            let prev = if j > 0 {
                &track[idx - SAMPLE_STRIDE]
            } else {
                &track[start + SAMPLE_STRIDE]
            };
            let (dx, dy) = if j > 0 {
                (r.x - prev.x, r.y - prev.y)
            } else {
                // first step copies the following one
                (prev.x - r.x, prev.y - r.y)
            };
            let orientation = if dx == 0.0 && dy == 0.0 {
                0.0
            } else {
                dy.atan2(dx)
            };
            history.extend_from_slice(&[
                (r.x - reference.x) / 10.0,
                (r.y - reference.y) / 10.0,
                dx / 10.0,
                dy / 10.0,
                r.velocity / 10.0,
                r.acceleration,
                f64::from(r.lane_id),
                orientation,
                j as f64 / time_norm,
            ]);
        }

        let target = (1..=config.horizon)
            .map(|h| {
                let r = &track[ref_idx + h * SAMPLE_STRIDE];
                [r.x - reference.x, r.y - reference.y]
            })
            .collect();
        TrajectorySample::new(history, target)
    }

    /// Samples for a list of window starts.
    pub fn cut_samples(
        &self,
        id: VehicleId,
        starts: &[usize],
        config: &PredictorConfig,
    ) -> Result<Vec<TrajectorySample>> {
        starts
            .iter()
            .map(|s| self.cut_sample(id, *s, config))
            .collect()
    }
}

/// Synthetic highway tracks for a scenario: groups are clusters spaced far
/// apart along the road, vehicles follow their lane with mean-reverting
/// speed wobble, and listed noisy clients get Gaussian position noise on
/// their recorded observations.
///
/// Deterministic per seed; the clean portion of every track is unaffected by
/// the noisy-client list because noise draws come from a separate stream.
pub fn generate_synthetic(
    scenario: &Scenario,
    frames_per_vehicle: usize,
) -> Result<TrajectoryDataset> {
    let perturbation = match &scenario.data_source {
        DataSource::Synthetic { perturbation } => *perturbation,
        DataSource::TrajectoryCsv { .. } => {
            return Err(SfdlError::config(
                "generate_synthetic called on a trajectory-csv scenario",
            ))
        }
    };
    if perturbation.is_nan() || perturbation < 0.0 {
        return Err(SfdlError::invalid("perturbation must be >= 0"));
    }

    let noise_of = |id: u64| {
        scenario
            .noisy_clients
            .iter()
            .find(|n| n.vehicle_id == id)
            .map(|n| n.noise_stddev_m)
    };

    let mut dataset = TrajectoryDataset::default();
    let mut vehicle_id = 0u64;
    for (group_index, group_size) in scenario.group_layout.iter().enumerate() {
        // cluster origins far beyond the grouping threshold
        let group_origin = group_index as f64 * 2_000.0;
        for slot in 0..*group_size {
            let id = VehicleId(vehicle_id);
            let mut rng = entity_rng(scenario.seed, "track", vehicle_id);
            let lane = (slot % 4) as i32 + 1;
            let lane_y = f64::from(lane) * 3.7;
            let nominal_speed = 20.0 + perturbation * rng.random_range(-1.0..1.0);
            let lateral_amp = perturbation * 0.3 * rng.random_range(0.0..1.0);
            let lateral_phase = rng.random_range(0.0..std::f64::consts::TAU);

            let mut noise_rng = entity_rng(scenario.seed, "noise", vehicle_id);
            let noise = noise_of(vehicle_id)
                .map(|sigma| Normal::new(0.0, sigma).map_err(|e| SfdlError::invalid(e.to_string())))
                .transpose()?;

            let mut x = group_origin + slot as f64 * 12.0;
            let mut v = nominal_speed;
            let mut wobble = 0.0;
            for frame in 0..frames_per_vehicle {
                // resample the acceleration wobble every 4 s
                if frame % 40 == 0 {
                    wobble = perturbation * rng.random_range(-0.3..0.3);
                }
                let pull = (-0.5 * (v - nominal_speed)).clamp(-0.5, 0.5);
                let accel = wobble + pull;
                let y = lane_y
                    + lateral_amp
                        * (std::f64::consts::TAU * frame as f64 / 80.0 + lateral_phase).sin();
                let (ox, oy) = match &noise {
                    Some(n) => (x + n.sample(&mut noise_rng), y + n.sample(&mut noise_rng)),
                    None => (x, y),
                };
                dataset.insert(TrajectoryRecord {
                    vehicle_id: id,
                    frame_id: frame as u64,
                    x: ox,
                    y: oy,
                    velocity: v,
                    acceleration: accel,
                    lane_id: lane,
                });
                x += v * FRAME_DT + 0.5 * accel * FRAME_DT * FRAME_DT;
                v += accel * FRAME_DT;
            }
            vehicle_id += 1;
        }
    }
    dataset.sort_and_check()?;
    Ok(dataset)
}

const REQUIRED_COLUMNS: [&str; 7] = [
    "Vehicle_ID",
    "Frame_ID",
    "Local_X",
    "Local_Y",
    "v_Vel",
    "v_Acc",
    "Lane_ID",
];

const FEET_TO_METERS: f64 = 0.3048;

/// Parse a trajectory CSV with the standard column set. `column_map`
/// renames logical columns to the file's headers; `feet_to_meters` rescales
/// positions and kinematics recorded in feet.
///
/// Rows with unparsable or non-finite numeric fields are dropped and
/// counted in the returned dataset's `dropped_rows`.
pub fn ingest_trajectory_csv(
    path: &Path,
    column_map: &BTreeMap<String, String>,
    feet_to_meters: bool,
) -> Result<TrajectoryDataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SfdlError::schema("trajectory CSV is empty"))?;
    let headers: Vec<&str> = header.split(',').map(str::trim).collect();

    let mut column_index = [0usize; 7];
    for (i, logical) in REQUIRED_COLUMNS.iter().enumerate() {
        let actual = column_map
            .get(*logical)
            .map(String::as_str)
            .unwrap_or(logical);
        column_index[i] = headers.iter().position(|h| *h == actual).ok_or_else(|| {
            SfdlError::schema(format!(
                "missing required column '{actual}' (for {logical})"
            ))
        })?;
    }

    let scale = if feet_to_meters { FEET_TO_METERS } else { 1.0 };
    let mut dataset = TrajectoryDataset::default();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<[f64; 7]> = {
            let mut values = [0.0; 7];
            let mut ok = true;
            for (slot, idx) in column_index.iter().enumerate() {
                match fields.get(*idx).and_then(|f| f.parse::<f64>().ok()) {
                    Some(v) if v.is_finite() => values[slot] = v,
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            ok.then_some(values)
        };
        match parsed {
            Some([vid, frame, x, y, vel, acc, lane]) => dataset.insert(TrajectoryRecord {
                vehicle_id: VehicleId(vid as u64),
                frame_id: frame as u64,
                x: x * scale,
                y: y * scale,
                velocity: vel * scale,
                acceleration: acc * scale,
                lane_id: lane as i32,
            }),
            None => dataset.dropped_rows += 1,
        }
    }
    if dataset.tracks.is_empty() {
        return Err(SfdlError::invalid(format!(
            "no usable rows in {}",
            path.display()
        )));
    }
    dataset.sort_and_check()?;
    Ok(dataset)
}

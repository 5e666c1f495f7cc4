//! Round orchestration across the three framework tiers.
//!
//! One communication round runs, per framework: group forming and model
//! updating, local training (chain-merged inside swarm groups for sfdl),
//! credibility comparison and weighting, uploading with link accounting, and
//! global aggregation. All frameworks consume identical training windows each
//! round, so their metric curves are a paired comparison.

use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::ChaCha8Rng;

use crate::credibility::{
    credibility, effectiveness_delta, normalize_weights, CombinationRule, CredibilityState,
};
use crate::error::{Result, SfdlError};
use crate::federation::{select_clients, CentralServer, Framework, Upload};
use crate::metrics::{evaluate_model, AccuracyMode, ACCURACY_THRESHOLD_M};
use crate::model::{self, init_params, ParameterVector, PredictorConfig, TrajectorySample};
use crate::rng::stream_rng;
use crate::sim::checkpoint::{ExperimentSummary, FrameworkSummary, GroupRoundEntry, RoundRecord};
use crate::sim::data::{
    generate_synthetic, ingest_trajectory_csv, TrajectoryDataset, SAMPLE_STRIDE,
};
use crate::sim::ledger::LinkLedger;
use crate::sim::scenario::{DataSource, Scenario};
use crate::swarm::{
    form_groups, group_loss, swarm_round, GroupId, MergeFunction, SwarmGroup, VehicleId,
    VehicleRegistry, VehicleState,
};

/// Simulator knobs not carried by the scenario file.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub predictor: PredictorConfig,
    pub credibility_rule: CombinationRule,
    /// Client fraction for the communication-efficient baseline.
    pub frac: f64,
    /// Local epochs per round for the communication-efficient baseline.
    pub local_epochs: usize,
    /// Training windows offered to each vehicle per round.
    pub windows_per_round: usize,
    /// Frames the window base advances per round.
    pub round_advance: usize,
    /// Frames between a round's windows.
    pub window_gap: usize,
    /// Fraction of the window budget held out for the RSU test batch.
    pub test_fraction: f64,
    /// Cap on held-out windows per vehicle.
    pub max_test_windows: usize,
    pub accuracy_threshold_m: f64,
    pub accuracy_mode: AccuracyMode,
    pub merge_function: MergeFunction,
}

impl Default for SimConfig {
    /// Desk-scale defaults: the plain-gradient path at a rate that converges
    /// within a 50-round run. The adaptive-moment path and its sheet rate
    /// stay available through `predictor`.
    fn default() -> Self {
        Self {
            predictor: PredictorConfig {
                learning_rate: 1e-3,
                optimizer: crate::model::Optimizer::PlainGradient,
                batch_size: 2,
                ..PredictorConfig::default()
            },
            credibility_rule: CombinationRule::default(),
            frac: 0.8,
            local_epochs: 1,
            windows_per_round: 16,
            round_advance: 5,
            window_gap: 11,
            test_fraction: 0.1,
            max_test_windows: 8,
            accuracy_threshold_m: ACCURACY_THRESHOLD_M,
            accuracy_mode: AccuracyMode::PerWaypoint,
            merge_function: MergeFunction::ChainAverage,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.predictor.validate()?;
        if self.frac.is_nan() || self.frac <= 0.0 || self.frac > 1.0 {
            return Err(SfdlError::config("frac must be in (0, 1]"));
        }
        if self.local_epochs < 1 {
            return Err(SfdlError::config("local_epochs must be >= 1"));
        }
        if self.windows_per_round < 1 || self.round_advance < 1 || self.window_gap < 1 {
            return Err(SfdlError::config("window schedule values must be >= 1"));
        }
        if self.test_fraction.is_nan() || self.test_fraction <= 0.0 || self.test_fraction > 1.0 {
            return Err(SfdlError::config("test_fraction must be in (0, 1]"));
        }
        if self.max_test_windows < 1 {
            return Err(SfdlError::config("max_test_windows must be >= 1"));
        }
        if self.accuracy_threshold_m.is_nan() || self.accuracy_threshold_m <= 0.0 {
            return Err(SfdlError::config("accuracy_threshold_m must be > 0"));
        }
        Ok(())
    }
}

/// Frame schedule derived from the scenario and config.
#[derive(Debug, Clone, Copy)]
struct Schedule {
    windows_per_round: usize,
    round_advance: usize,
    window_gap: usize,
    test_windows: usize,
    test_base: usize,
    span: usize,
}

impl Schedule {
    fn new(scenario: &Scenario, config: &SimConfig) -> Self {
        let span = TrajectoryDataset::window_span(&config.predictor);
        let budget = scenario.rounds * config.windows_per_round;
        let test_windows = ((config.test_fraction * budget as f64).ceil() as usize)
            .clamp(2, config.max_test_windows);
        let train_last_start = (scenario.rounds - 1) * config.round_advance
            + (config.windows_per_round - 1) * config.window_gap;
        // held-out windows start past every frame any training window touches
        let test_base = train_last_start + span + SAMPLE_STRIDE;
        Self {
            windows_per_round: config.windows_per_round,
            round_advance: config.round_advance,
            window_gap: config.window_gap,
            test_windows,
            test_base,
            span,
        }
    }

    fn train_starts(&self, round: usize) -> Vec<usize> {
        (0..self.windows_per_round)
            .map(|m| round * self.round_advance + m * self.window_gap)
            .collect()
    }

    fn test_starts(&self) -> Vec<usize> {
        (0..self.test_windows)
            .map(|i| self.test_base + i * self.window_gap)
            .collect()
    }

    fn now_frame(&self, round: usize, config: &PredictorConfig) -> usize {
        round * self.round_advance + (config.time_steps - 1) * SAMPLE_STRIDE
    }

    fn required_frames(&self) -> usize {
        self.test_base + (self.test_windows - 1) * self.window_gap + self.span + 1
    }
}

const TASK_TAG: &str = "trajectory-prediction";

/// A fully initialized experiment, stepped one communication round at a time.
pub struct Experiment {
    scenario: Scenario,
    config: SimConfig,
    frameworks: Vec<Framework>,
    /// What vehicles recorded (noisy clients included); training data.
    observed: TrajectoryDataset,
    schedule: Schedule,
    eval_batch: Vec<TrajectorySample>,
    registries: BTreeMap<Framework, VehicleRegistry>,
    servers: BTreeMap<Framework, CentralServer>,
    ledgers: BTreeMap<Framework, LinkLedger>,
    credibility_states: BTreeMap<GroupId, CredibilityState>,
    selection_rng: ChaCha8Rng,
    round: usize,
    records: Vec<RoundRecord>,
}

impl Experiment {
    pub fn new(scenario: Scenario, frameworks: &[Framework], config: SimConfig) -> Result<Self> {
        scenario.validate()?;
        config.validate()?;
        let mut frameworks: Vec<Framework> = frameworks.to_vec();
        frameworks.sort_unstable();
        frameworks.dedup();
        if frameworks.is_empty() {
            return Err(SfdlError::invalid("at least one framework is required"));
        }

        let schedule = Schedule::new(&scenario, &config);
        let (observed, reference) = match &scenario.data_source {
            DataSource::Synthetic { .. } => {
                let frames = schedule.required_frames();
                let observed = generate_synthetic(&scenario, frames)?;
                let reference = if scenario.noisy_clients.is_empty() {
                    observed.clone()
                } else {
                    let mut clean = scenario.clone();
                    clean.noisy_clients.clear();
                    generate_synthetic(&clean, frames)?
                };
                (observed, reference)
            }
            DataSource::TrajectoryCsv {
                path,
                column_map,
                feet_to_meters,
            } => {
                let data = ingest_trajectory_csv(Path::new(path), column_map, *feet_to_meters)?;
                (data.clone(), data)
            }
        };

        if observed.vehicle_count() != scenario.total_vehicles {
            return Err(SfdlError::schema(format!(
                "scenario expects {} vehicles but the dataset holds {}",
                scenario.total_vehicles,
                observed.vehicle_count()
            )));
        }
        let last_needed = schedule.test_base + (schedule.test_windows - 1) * schedule.window_gap;
        for id in observed.vehicles() {
            match observed.max_window_start(id, &config.predictor) {
                Some(max) if max >= last_needed => {}
                _ => {
                    return Err(SfdlError::schema(format!(
                        "track of vehicle {id} is too short for {} rounds (needs window start {last_needed})",
                        scenario.rounds
                    )))
                }
            }
        }

        // evaluation and RSU comparisons run against the ground-truth tracks
        let mut eval_batch = Vec::new();
        let test_starts = schedule.test_starts();
        for id in reference.vehicles() {
            eval_batch.extend(reference.cut_samples(id, &test_starts, &config.predictor)?);
        }
        drop(reference);

        let initial = init_params(
            &config.predictor,
            &mut stream_rng(scenario.seed, "model-init"),
        );
        let mut registries = BTreeMap::new();
        let mut servers = BTreeMap::new();
        let mut ledgers = BTreeMap::new();
        for fw in &frameworks {
            let mut registry = VehicleRegistry::new();
            for id in observed.vehicles() {
                let record = observed.track(id).expect("track exists")[0];
                registry.insert(
                    id,
                    VehicleState {
                        id,
                        position: (record.x, record.y),
                        speed: record.velocity,
                        acceleration: record.acceleration,
                        lane: record.lane_id,
                        orientation: 0.0,
                        task: TASK_TAG.to_string(),
                        dataset: Vec::new(),
                        model: initial.clone(),
                        gamma: 1.0,
                    },
                );
            }
            registries.insert(*fw, registry);
            servers.insert(*fw, CentralServer::new(*fw, initial.clone()));
            ledgers.insert(*fw, LinkLedger::default());
        }

        let selection_rng = stream_rng(scenario.seed, "client-selection");
        Ok(Self {
            scenario,
            config,
            frameworks,
            observed,
            schedule,
            eval_batch,
            registries,
            servers,
            ledgers,
            credibility_states: BTreeMap::new(),
            selection_rng,
            round: 0,
            records: Vec::new(),
        })
    }

    pub fn frameworks(&self) -> &[Framework] {
        &self.frameworks
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn ledger(&self, framework: Framework) -> Option<&LinkLedger> {
        self.ledgers.get(&framework)
    }

    pub fn credibility_states(&self) -> &BTreeMap<GroupId, CredibilityState> {
        &self.credibility_states
    }

    fn batch_digest(samples: &BTreeMap<VehicleId, Vec<TrajectorySample>>) -> String {
        const FNV_OFFSET: u64 = 0xcbf29ce484222325;
        const FNV_PRIME: u64 = 0x100000001b3;
        let mut h = FNV_OFFSET;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(FNV_PRIME);
            }
        };
        for (id, batch) in samples {
            eat(&id.0.to_le_bytes());
            for sample in batch {
                for v in &sample.history {
                    eat(&v.to_le_bytes());
                }
                for t in &sample.target {
                    eat(&t[0].to_le_bytes());
                    eat(&t[1].to_le_bytes());
                }
            }
        }
        format!("{h:016x}")
    }

    /// Execute one communication round for every framework and append the
    /// per-framework records.
    pub fn run_round(&mut self) -> Result<Vec<RoundRecord>> {
        if self.round >= self.scenario.rounds {
            return Err(SfdlError::invalid(format!(
                "round {} exceeds the scenario's {} rounds",
                self.round, self.scenario.rounds
            )));
        }
        let r = self.round;
        let starts = self.schedule.train_starts(r);
        let mut round_samples: BTreeMap<VehicleId, Vec<TrajectorySample>> = BTreeMap::new();
        for id in self.observed.vehicles() {
            round_samples.insert(
                id,
                self.observed
                    .cut_samples(id, &starts, &self.config.predictor)?,
            );
        }
        let batch_digest = Self::batch_digest(&round_samples);
        let now = self.schedule.now_frame(r, &self.config.predictor);

        // refresh kinematics and hand every framework the same samples
        for registry in self.registries.values_mut() {
            for (id, vehicle) in registry.iter_mut() {
                let track = self.observed.track(*id).expect("track exists");
                let record = &track[now.min(track.len() - 1)];
                vehicle.position = (record.x, record.y);
                vehicle.speed = record.velocity;
                vehicle.acceleration = record.acceleration;
                vehicle.lane = record.lane_id;
                vehicle.dataset = round_samples[id].clone();
            }
        }

        // a tier failure aborts the round for that framework only; the
        // first diagnostic is surfaced after the others completed
        let frameworks = self.frameworks.clone();
        let mut new_records = Vec::with_capacity(frameworks.len());
        let mut first_failure: Option<SfdlError> = None;
        for fw in frameworks {
            match self.framework_round(fw, r, &batch_digest) {
                Ok(record) => {
                    self.records.push(record.clone());
                    new_records.push(record);
                }
                Err(e) if first_failure.is_none() => {
                    first_failure = Some(SfdlError::Round {
                        round: r,
                        source: Box::new(e),
                    });
                }
                Err(_) => {}
            }
        }
        if let Some(e) = first_failure {
            return Err(e);
        }
        self.round += 1;
        Ok(new_records)
    }

    fn framework_round(
        &mut self,
        fw: Framework,
        r: usize,
        batch_digest: &str,
    ) -> Result<RoundRecord> {
        let dim = self.config.predictor.param_dim();
        let (links, global_objective, groups, warnings) = match fw {
            Framework::Sfdl => self.sfdl_tier(r)?,
            Framework::FedAvg => {
                let registry = self.registries.get_mut(&fw).expect("registry exists");
                let server = self.servers.get_mut(&fw).expect("server exists");
                let participants: Vec<VehicleId> = registry.keys().copied().collect();
                let (count, warnings) =
                    baseline_tier(registry, server, &participants, &self.config, 1, r)?;
                ((0, count), None, Vec::new(), warnings)
            }
            Framework::CommEfficient => {
                let all: Vec<VehicleId> = self.registries[&fw].keys().copied().collect();
                let selected = select_clients(&all, self.config.frac, &mut self.selection_rng)?;
                let registry = self.registries.get_mut(&fw).expect("registry exists");
                let server = self.servers.get_mut(&fw).expect("server exists");
                let (count, warnings) = baseline_tier(
                    registry,
                    server,
                    &selected,
                    &self.config,
                    self.config.local_epochs,
                    r,
                )?;
                ((0, count), None, Vec::new(), warnings)
            }
        };

        let ledger = self.ledgers.get_mut(&fw).expect("ledger exists");
        let round_links = ledger.record_round(links.0, links.1, dim);
        let server = &self.servers[&fw];
        let eval = evaluate_model(
            &server.model().params,
            &self.eval_batch,
            &self.config.predictor,
            self.config.accuracy_threshold_m,
            self.config.accuracy_mode,
        )?;
        let record = RoundRecord {
            framework: fw.tag().to_string(),
            round: r as u64,
            loss: eval.loss,
            prediction_error: eval.prediction_error,
            prediction_accuracy: eval.prediction_accuracy,
            links_intra: round_links.intra_group_links,
            links_edge_global: round_links.edge_to_global_links,
            bytes_up: round_links.bytes_up,
            bytes_down: round_links.bytes_down,
            global_digest: server.model().params.digest(),
            batch_digest: batch_digest.to_string(),
            global_objective,
            groups,
            warnings,
        };
        Ok(record.quantized())
    }

    /// The sfdl tier: swarm rounds per group, credibility update, weighted
    /// upload, aggregation. Returns ((intra, edge) links, objective, group
    /// entries, warnings).
    #[allow(clippy::type_complexity)]
    fn sfdl_tier(
        &mut self,
        r: usize,
    ) -> Result<((u64, u64), Option<f64>, Vec<GroupRoundEntry>, Vec<String>)> {
        let fw = Framework::Sfdl;
        let registry = self.registries.get_mut(&fw).expect("registry exists");
        let vehicles: Vec<&VehicleState> = registry.values().collect();
        let groups = form_groups(&vehicles, self.scenario.distance_threshold)?;
        let k = groups.iter().map(SwarmGroup::size).max().unwrap_or(1);

        let server = self.servers.get_mut(&fw).expect("server exists");
        let previous_global = server.model().params.clone();
        let mut intra_links = 0u64;
        let mut warnings = Vec::new();
        let mut outcomes = Vec::with_capacity(groups.len());
        for group in &groups {
            let outcome = swarm_round(
                group,
                registry,
                &previous_global,
                &self.config.predictor,
                self.config.merge_function,
            )?;
            intra_links += outcome.intra_links;
            for skipped in &outcome.skipped {
                warnings.push(format!(
                    "group {} skipped vehicle {skipped}: empty dataset",
                    group.id()
                ));
            }
            outcomes.push(outcome);
        }

        // credibility comparison against the model broadcast last round;
        // skipped in the first round, where the Beta(1, 1) prior stands
        let global_loss = if r >= 1 {
            Some(model::loss(
                &previous_global,
                &self.eval_batch,
                &self.config.predictor,
            )?)
        } else {
            None
        };
        let mut credibilities = Vec::with_capacity(groups.len());
        let mut entries = Vec::with_capacity(groups.len());
        for (group, outcome) in groups.iter().zip(&outcomes) {
            let gid = group.id();
            let mut state = match self.credibility_states.get(&gid) {
                Some(s) => *s,
                None => CredibilityState::new(group.size(), k)?,
            };
            state.group_size = group.size();
            state.max_group_size = k;
            if let Some(global_loss) = global_loss {
                let received_loss = model::loss(
                    &outcome.group_model,
                    &self.eval_batch,
                    &self.config.predictor,
                )?;
                if let Some(delta) = effectiveness_delta(global_loss, received_loss) {
                    state = state.observe(delta);
                }
            }
            self.credibility_states.insert(gid, state);
            credibilities.push(credibility(&state, self.config.credibility_rule)?);
            entries.push((gid, state));
        }
        let weights = normalize_weights(&credibilities)?;

        for ((group, outcome), weight) in groups.iter().zip(&outcomes).zip(weights.weights()) {
            server.submit(Upload {
                source_id: group.id().to_string(),
                params: outcome.group_model.clone(),
                weight: *weight,
                round: r as u64,
            })?;
        }
        server.aggregate()?;

        // the global objective over this round's group losses
        let mut group_losses = Vec::with_capacity(groups.len());
        for group in &groups {
            group_losses.push(group_loss(
                group,
                registry,
                &self.eval_batch,
                &self.config.predictor,
            )?);
        }
        let objective = crate::federation::global_objective(&group_losses, &weights)?;

        let group_entries = entries
            .into_iter()
            .zip(weights.weights())
            .map(|((gid, state), weight)| GroupRoundEntry {
                group_id: gid.to_string(),
                p: state.p,
                q: state.q,
                n: state.group_size,
                k: state.max_group_size,
                weight: *weight,
            })
            .collect();
        Ok((
            (intra_links, groups.len() as u64),
            Some(objective),
            group_entries,
            warnings,
        ))
    }
}

/// Local training and unweighted aggregation for the baseline tiers.
/// Returns the number of participating clients plus any skip warnings.
fn baseline_tier(
    registry: &mut VehicleRegistry,
    server: &mut CentralServer,
    participants: &[VehicleId],
    config: &SimConfig,
    epochs: usize,
    r: usize,
) -> Result<(u64, Vec<String>)> {
    let global = server.model().params.clone();
    // every vehicle receives the broadcast, selected ones train
    for vehicle in registry.values_mut() {
        vehicle.model = global.clone();
    }
    let mut warnings = Vec::new();
    let mut trained: Vec<(VehicleId, ParameterVector)> = Vec::new();
    for id in participants {
        let vehicle = registry
            .get_mut(id)
            .ok_or_else(|| SfdlError::invalid(format!("vehicle {id} not registered")))?;
        if vehicle.dataset.is_empty() {
            warnings.push(format!("skipped vehicle {id}: empty dataset"));
            continue;
        }
        let mut local = global.clone();
        for _ in 0..epochs {
            local = model::train_epoch(&local, &vehicle.dataset, &config.predictor)?;
        }
        vehicle.model = local.clone();
        trained.push((*id, local));
    }
    if trained.is_empty() {
        return Err(SfdlError::invalid("no participant has training data"));
    }
    let weight = 1.0 / trained.len() as f64;
    let count = trained.len() as u64;
    for (id, params) in trained {
        server.submit(Upload {
            source_id: id.to_string(),
            params,
            weight,
            round: r as u64,
        })?;
    }
    server.aggregate()?;
    Ok((count, warnings))
}

/// Full experiment output: the per-round records plus the summary document.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub records: Vec<RoundRecord>,
    pub summary: ExperimentSummary,
}

/// Run a scenario to completion for the requested frameworks.
pub fn run_experiment(
    scenario: Scenario,
    frameworks: &[Framework],
    config: SimConfig,
) -> Result<ExperimentReport> {
    let mut experiment = Experiment::new(scenario, frameworks, config)?;
    for _ in 0..experiment.scenario.rounds {
        experiment.run_round()?;
    }

    let mut summaries = Vec::new();
    for fw in experiment.frameworks.clone() {
        let tag = fw.tag();
        let mine: Vec<&RoundRecord> = experiment
            .records
            .iter()
            .filter(|rec| rec.framework == tag)
            .collect();
        let last = mine.last().expect("at least one round ran");
        summaries.push(FrameworkSummary {
            framework: tag.to_string(),
            rounds: mine.len() as u64,
            final_loss: last.loss,
            final_prediction_error: last.prediction_error,
            final_prediction_accuracy: last.prediction_accuracy,
            loss_curve: mine.iter().map(|r| r.loss).collect(),
            prediction_error_curve: mine.iter().map(|r| r.prediction_error).collect(),
            accuracy_curve: mine.iter().map(|r| r.prediction_accuracy).collect(),
            cumulative_links: *experiment.ledger(fw).expect("ledger exists"),
        });
    }
    let summary = ExperimentSummary {
        scenario_name: experiment.scenario.name.clone(),
        seed: experiment.scenario.seed,
        rounds: experiment.scenario.rounds,
        param_dim: experiment.config.predictor.param_dim(),
        frameworks: summaries,
    };
    Ok(ExperimentReport {
        records: experiment.records,
        summary,
    })
}

/// Write a report into `out_dir`: one `<framework>.jsonl` checkpoint stream
/// per framework plus `summary.json`.
pub fn write_report(report: &ExperimentReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    for summary in &report.summary.frameworks {
        let records: Vec<_> = report
            .records
            .iter()
            .filter(|r| r.framework == summary.framework)
            .cloned()
            .collect();
        let file = std::fs::File::create(out_dir.join(format!("{}.jsonl", summary.framework)))?;
        crate::sim::checkpoint::write_checkpoints(&records, std::io::BufWriter::new(file))?;
    }
    let json = serde_json::to_string_pretty(&report.summary)
        .map_err(|e| SfdlError::Parse(e.to_string()))?;
    std::fs::write(out_dir.join("summary.json"), json + "\n")?;
    Ok(())
}

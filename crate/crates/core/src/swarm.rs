//! Swarm-group formation and intra-group chain merging.
//!
//! Vehicles sharing a task and within proximity of one another form a group;
//! each communication round the group re-trains from the broadcast global
//! model and folds the members' models pairwise along the chain, producing a
//! single group model for upload.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SfdlError};
use crate::model::{self, ParameterVector, PredictorConfig, TrajectorySample};

/// Unique vehicle identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u64);

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Group identity: the smallest member vehicle id. Stable across rounds as
/// long as the roster keeps its lowest id, which is what keys the RSU-side
/// credibility state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId(pub u64);

impl std::fmt::Display for GroupId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "g{}", self.0)
    }
}

/// Kinematic record plus the vehicle's local training state.
#[derive(Debug, Clone)]
pub struct VehicleState {
    pub id: VehicleId,
    pub position: (f64, f64),
    pub speed: f64,
    pub acceleration: f64,
    pub lane: i32,
    pub orientation: f64,
    pub task: String,
    /// Current round's local training samples.
    pub dataset: Vec<TrajectorySample>,
    pub model: ParameterVector,
    /// Merge weight for the weighted merge function.
    pub gamma: f64,
}

/// Deterministically ordered vehicle registry.
pub type VehicleRegistry = BTreeMap<VehicleId, VehicleState>;

/// Road-environment awareness of one vehicle: closeness of the right, left,
/// preceding, and following neighbors, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentMatrix {
    pub entries: [[f64; 2]; 2],
}

/// Closeness of two vehicles under visual range `r`: `1 - d^2/r^2` within
/// range, zero beyond it.
pub fn environment_entry(a: &VehicleState, b: &VehicleState, r: f64) -> Result<f64> {
    if r.is_nan() || r <= 0.0 {
        return Err(SfdlError::invalid("visual range must be > 0"));
    }
    let dx = a.position.0 - b.position.0;
    let dy = a.position.1 - b.position.1;
    let d2 = dx * dx + dy * dy;
    let r2 = r * r;
    Ok(if d2 > r2 { 0.0 } else { 1.0 - d2 / r2 })
}

impl EnvironmentMatrix {
    /// Build the matrix from the four directional neighbors; absent
    /// neighbors contribute zero.
    pub fn observe(
        vehicle: &VehicleState,
        right: Option<&VehicleState>,
        left: Option<&VehicleState>,
        preceding: Option<&VehicleState>,
        following: Option<&VehicleState>,
        visual_range: f64,
    ) -> Result<Self> {
        let entry = |n: Option<&VehicleState>| -> Result<f64> {
            n.map_or(Ok(0.0), |v| environment_entry(vehicle, v, visual_range))
        };
        Ok(Self {
            entries: [
                [entry(right)?, entry(left)?],
                [entry(preceding)?, entry(following)?],
            ],
        })
    }
}

/// Ordered roster of vehicles sharing a task; the unit of edge-to-global
/// upload.
#[derive(Debug, Clone)]
pub struct SwarmGroup {
    /// Chain order: ascending vehicle id.
    pub members: Vec<VehicleId>,
    pub task: String,
    /// Merged model of the last completed round, if any.
    pub group_model: Option<ParameterVector>,
}

impl SwarmGroup {
    pub fn id(&self) -> GroupId {
        GroupId(self.members.first().map(|v| v.0).unwrap_or(0))
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Partition vehicles into swarm groups: same task tag, connected through a
/// chain of pairwise distances within `distance_threshold` (single linkage).
/// Members sort by id; groups sort by their smallest member id.
pub fn form_groups(vehicles: &[&VehicleState], distance_threshold: f64) -> Result<Vec<SwarmGroup>> {
    if vehicles.is_empty() {
        return Err(SfdlError::invalid("cannot form groups from no vehicles"));
    }
    if distance_threshold.is_nan() || distance_threshold <= 0.0 {
        return Err(SfdlError::invalid("distance_threshold must be > 0"));
    }
    let n = vehicles.len();
    let threshold2 = distance_threshold * distance_threshold;
    let mut component = vec![usize::MAX; n];
    let mut next_component = 0usize;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = next_component;
        let mut frontier = vec![start];
        while let Some(i) = frontier.pop() {
            for j in 0..n {
                if component[j] != usize::MAX || vehicles[j].task != vehicles[i].task {
                    continue;
                }
                let dx = vehicles[i].position.0 - vehicles[j].position.0;
                let dy = vehicles[i].position.1 - vehicles[j].position.1;
                if dx * dx + dy * dy <= threshold2 {
                    component[j] = next_component;
                    frontier.push(j);
                }
            }
        }
        next_component += 1;
    }

    let mut groups: Vec<SwarmGroup> = Vec::with_capacity(next_component);
    for c in 0..next_component {
        let mut members: Vec<VehicleId> = (0..n)
            .filter(|i| component[*i] == c)
            .map(|i| vehicles[i].id)
            .collect();
        members.sort_unstable();
        let task = vehicles[(0..n).find(|i| component[*i] == c).unwrap()]
            .task
            .clone();
        groups.push(SwarmGroup {
            members,
            task,
            group_model: None,
        });
    }
    groups.sort_by_key(|g| g.id());
    Ok(groups)
}

/// Pairwise chain merge: element-wise mean of the incoming and local models.
pub fn chain_merge_pairwise(
    incoming: &ParameterVector,
    local: &ParameterVector,
) -> Result<ParameterVector> {
    if incoming.dim() != local.dim() {
        return Err(SfdlError::config(format!(
            "chain merge dimension mismatch: {} vs {}",
            incoming.dim(),
            local.dim()
        )));
    }
    let values = incoming
        .values()
        .iter()
        .zip(local.values())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    ParameterVector::new(values)
}

/// Weighted mean of models: `sum(gamma_k * m_k) / sum(gamma_k)`.
pub fn weighted_merge(models: &[(ParameterVector, f64)]) -> Result<ParameterVector> {
    let (first, _) = models
        .first()
        .ok_or_else(|| SfdlError::invalid("weighted_merge of an empty list"))?;
    let dim = first.dim();
    let mut total = 0.0;
    for (m, gamma) in models {
        if gamma.is_nan() || *gamma <= 0.0 {
            return Err(SfdlError::invalid(format!(
                "merge weight must be > 0, got {gamma}"
            )));
        }
        if m.dim() != dim {
            return Err(SfdlError::config("weighted_merge dimension mismatch"));
        }
        total += gamma;
    }
    let mut values = vec![0.0; dim];
    for (m, gamma) in models {
        let w = gamma / total;
        for (acc, v) in values.iter_mut().zip(m.values()) {
            *acc += w * v;
        }
    }
    ParameterVector::new(values)
}

/// Alternative merge functions for the chain stage, applied element-wise
/// over the members' post-training models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeFunction {
    /// Pairwise running average along the chain; the canonical rule.
    #[default]
    ChainAverage,
    /// Gamma-weighted mean of all member models.
    WeightedAverage,
    Minimum,
    Maximum,
    Median,
}

fn elementwise_fold(models: &[ParameterVector], f: MergeFunction) -> Result<ParameterVector> {
    let dim = models[0].dim();
    if models.iter().any(|m| m.dim() != dim) {
        return Err(SfdlError::config("merge dimension mismatch"));
    }
    let mut values = vec![0.0; dim];
    let mut column = vec![0.0; models.len()];
    for (i, out) in values.iter_mut().enumerate() {
        for (k, m) in models.iter().enumerate() {
            column[k] = m.values()[i];
        }
        *out = match f {
            MergeFunction::Minimum => column.iter().copied().fold(f64::INFINITY, f64::min),
            MergeFunction::Maximum => column.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            MergeFunction::Median => {
                column.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mid = column.len() / 2;
                if column.len().is_multiple_of(2) {
                    0.5 * (column[mid - 1] + column[mid])
                } else {
                    column[mid]
                }
            }
            _ => unreachable!("averaging merges handled separately"),
        };
    }
    ParameterVector::new(values)
}

/// Outcome of one group's swarm round.
#[derive(Debug, Clone)]
pub struct SwarmRoundOutcome {
    /// The merged group model W_SL.
    pub group_model: ParameterVector,
    /// Members that trained this round, chain order.
    pub trained: Vec<VehicleId>,
    /// Members skipped for lack of local data.
    pub skipped: Vec<VehicleId>,
    /// Pairwise merge hops performed (participants - 1).
    pub intra_links: u64,
}

/// Execute one swarm-learning round for a group: every member adopts the
/// broadcast global model, runs one local epoch over its minibatches, and the
/// chain folds the trained models pairwise in member order. Members with no
/// local data are skipped and reported.
pub fn swarm_round(
    group: &SwarmGroup,
    registry: &mut VehicleRegistry,
    global_model: &ParameterVector,
    config: &PredictorConfig,
    merge: MergeFunction,
) -> Result<SwarmRoundOutcome> {
    if global_model.dim() != config.param_dim() {
        return Err(SfdlError::config(
            "global model dimension does not match predictor architecture",
        ));
    }
    let mut trained_ids = Vec::new();
    let mut skipped = Vec::new();
    let mut trained_models: Vec<ParameterVector> = Vec::new();
    let mut gammas: Vec<f64> = Vec::new();
    let mut chained: Option<ParameterVector> = None;
    let mut intra_links = 0u64;

    for member in &group.members {
        let vehicle = registry
            .get_mut(member)
            .ok_or_else(|| SfdlError::invalid(format!("vehicle {member} not registered")))?;
        vehicle.model = global_model.clone();
        if vehicle.dataset.is_empty() {
            skipped.push(*member);
            continue;
        }
        let local = model::train_epoch(global_model, &vehicle.dataset, config)?;
        vehicle.model = local.clone();
        trained_ids.push(*member);
        gammas.push(vehicle.gamma);
        chained = Some(match chained {
            None => local.clone(),
            Some(previous) => {
                intra_links += 1;
                chain_merge_pairwise(&previous, &local)?
            }
        });
        trained_models.push(local);
    }

    let chained = chained.ok_or_else(|| {
        SfdlError::invalid(format!(
            "group {} has no member with training data",
            group.id()
        ))
    })?;
    let group_model = match merge {
        MergeFunction::ChainAverage => chained,
        MergeFunction::WeightedAverage => {
            let pairs: Vec<_> = trained_models.into_iter().zip(gammas).collect();
            weighted_merge(&pairs)?
        }
        other => elementwise_fold(&trained_models, other)?,
    };
    Ok(SwarmRoundOutcome {
        group_model,
        trained: trained_ids,
        skipped,
        intra_links,
    })
}

/// Combine per-member losses into the group loss: mean over members of the
/// member's loss plus its predecessor's, with the first member's predecessor
/// term defined as zero.
pub fn group_loss_from_member_losses(losses: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(SfdlError::invalid("group loss of an empty roster"));
    }
    let mut acc = 0.0;
    let mut previous = 0.0;
    for &l in losses {
        acc += l + previous;
        previous = l;
    }
    Ok(acc / losses.len() as f64)
}

/// Group loss over a test batch, evaluating each member's current model in
/// chain order.
pub fn group_loss(
    group: &SwarmGroup,
    registry: &VehicleRegistry,
    test_batch: &[TrajectorySample],
    config: &PredictorConfig,
) -> Result<f64> {
    if test_batch.is_empty() {
        return Err(SfdlError::invalid("group loss over an empty batch"));
    }
    let mut losses = Vec::with_capacity(group.members.len());
    for member in &group.members {
        let vehicle = registry
            .get(member)
            .ok_or_else(|| SfdlError::invalid(format!("vehicle {member} not registered")))?;
        losses.push(model::loss(&vehicle.model, test_batch, config)?);
    }
    group_loss_from_member_losses(&losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, Optimizer};
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::RngExt;

    fn vehicle(id: u64, x: f64, y: f64, task: &str) -> VehicleState {
        VehicleState {
            id: VehicleId(id),
            position: (x, y),
            speed: 20.0,
            acceleration: 0.0,
            lane: 1,
            orientation: 0.0,
            task: task.to_string(),
            dataset: Vec::new(),
            model: ParameterVector::zeros(4),
            gamma: 1.0,
        }
    }

    fn pv(values: &[f64]) -> ParameterVector {
        ParameterVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn environment_entry_matches_closed_form() {
        let a = vehicle(0, 0.0, 0.0, "t");
        let far = vehicle(1, 150.0, 0.0, "t");
        let half = vehicle(2, 50.0, 0.0, "t");
        assert_eq!(environment_entry(&a, &far, 100.0).unwrap(), 0.0);
        assert_eq!(environment_entry(&a, &a.clone(), 100.0).unwrap(), 1.0);
        assert!((environment_entry(&a, &half, 100.0).unwrap() - 0.75).abs() < 1e-12);
        assert!(environment_entry(&a, &half, 0.0).is_err());
    }

    #[test]
    fn environment_matrix_zeroes_absent_neighbors() {
        let v = vehicle(0, 0.0, 0.0, "t");
        let right = vehicle(1, 30.0, -3.7, "t");
        let m = EnvironmentMatrix::observe(&v, Some(&right), None, None, None, 100.0).unwrap();
        assert!(m.entries[0][0] > 0.0);
        assert_eq!(m.entries[0][1], 0.0);
        assert_eq!(m.entries[1][0], 0.0);
        assert_eq!(m.entries[1][1], 0.0);
    }

    #[test]
    fn distant_vehicles_form_singletons() {
        let vehicles = [
            vehicle(0, 0.0, 0.0, "t"),
            vehicle(1, 500.0, 0.0, "t"),
            vehicle(2, 1000.0, 0.0, "t"),
        ];
        let refs: Vec<&VehicleState> = vehicles.iter().collect();
        let groups = form_groups(&refs, 100.0).unwrap();
        assert_eq!(groups.len(), 3);
        assert!(groups.iter().all(|g| g.size() == 1));
    }

    #[test]
    fn clusters_of_ten_and_six() {
        let mut vehicles = Vec::new();
        for i in 0..10u64 {
            vehicles.push(vehicle(i, i as f64 * 10.0, 0.0, "t"));
        }
        for i in 0..6u64 {
            vehicles.push(vehicle(10 + i, 5000.0 + i as f64 * 10.0, 0.0, "t"));
        }
        let refs: Vec<&VehicleState> = vehicles.iter().collect();
        let groups = form_groups(&refs, 100.0).unwrap();
        let mut sizes: Vec<usize> = groups.iter().map(|g| g.size()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![6, 10]);
    }

    #[test]
    fn task_tag_splits_coincident_vehicles() {
        let vehicles = [
            vehicle(0, 0.0, 0.0, "a"),
            vehicle(1, 1.0, 0.0, "a"),
            vehicle(2, 2.0, 0.0, "b"),
        ];
        let refs: Vec<&VehicleState> = vehicles.iter().collect();
        let groups = form_groups(&refs, 100.0).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].members, vec![VehicleId(0), VehicleId(1)]);
        assert_eq!(groups[0].task, "a");
        assert_eq!(groups[1].members, vec![VehicleId(2)]);
    }

    #[test]
    fn input_order_does_not_change_groups() {
        let vehicles = [
            vehicle(3, 30.0, 0.0, "t"),
            vehicle(0, 0.0, 0.0, "t"),
            vehicle(7, 900.0, 0.0, "t"),
            vehicle(1, 15.0, 0.0, "t"),
        ];
        let forward: Vec<&VehicleState> = vehicles.iter().collect();
        let backward: Vec<&VehicleState> = vehicles.iter().rev().collect();
        let a = form_groups(&forward, 100.0).unwrap();
        let b = form_groups(&backward, 100.0).unwrap();
        assert_eq!(a.len(), b.len());
        for (ga, gb) in a.iter().zip(&b) {
            assert_eq!(ga.members, gb.members);
            assert_eq!(ga.id(), gb.id());
        }
        assert_eq!(a[0].members, vec![VehicleId(0), VehicleId(1), VehicleId(3)]);
    }

    #[test]
    fn chain_merge_examples() {
        let v = pv(&[1.0, -2.0]);
        assert_eq!(chain_merge_pairwise(&v, &v).unwrap(), v);
        let merged = chain_merge_pairwise(&pv(&[0.0, 2.0]), &pv(&[2.0, 0.0])).unwrap();
        assert_eq!(merged, pv(&[1.0, 1.0]));
        let ab = chain_merge_pairwise(&pv(&[0.5, 3.0]), &pv(&[1.5, -1.0])).unwrap();
        let ba = chain_merge_pairwise(&pv(&[1.5, -1.0]), &pv(&[0.5, 3.0])).unwrap();
        assert_eq!(ab, ba);
        assert!(chain_merge_pairwise(&pv(&[1.0]), &pv(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn weighted_merge_examples() {
        let single = weighted_merge(&[(pv(&[2.0, 3.0]), 7.0)]).unwrap();
        assert_eq!(single, pv(&[2.0, 3.0]));
        let even = weighted_merge(&[(pv(&[0.0]), 1.0), (pv(&[2.0]), 1.0)]).unwrap();
        assert_eq!(even, pv(&[1.0]));
        let skew = weighted_merge(&[(pv(&[1.0]), 3.0), (pv(&[4.0]), 1.0)]).unwrap();
        assert!((skew.values()[0] - 1.75).abs() < 1e-12);
        assert!(weighted_merge(&[(pv(&[1.0]), 0.0)]).is_err());
        assert!(weighted_merge(&[]).is_err());
    }

    #[test]
    fn elementwise_merges() {
        let models = [pv(&[0.0, 5.0]), pv(&[2.0, 1.0]), pv(&[4.0, 3.0])];
        let min = elementwise_fold(&models, MergeFunction::Minimum).unwrap();
        let max = elementwise_fold(&models, MergeFunction::Maximum).unwrap();
        let med = elementwise_fold(&models, MergeFunction::Median).unwrap();
        assert_eq!(min, pv(&[0.0, 1.0]));
        assert_eq!(max, pv(&[4.0, 5.0]));
        assert_eq!(med, pv(&[2.0, 3.0]));
    }

    #[test]
    fn group_loss_expands_consecutive_pairs() {
        assert_eq!(group_loss_from_member_losses(&[2.0, 4.0]).unwrap(), 4.0);
        assert_eq!(group_loss_from_member_losses(&[3.0]).unwrap(), 3.0);
        assert_eq!(
            group_loss_from_member_losses(&[0.0, 0.0, 0.0]).unwrap(),
            0.0
        );
        assert!(group_loss_from_member_losses(&[]).is_err());
    }

    fn training_setup(
        n: usize,
        samples_for: impl Fn(u64) -> usize,
    ) -> (
        SwarmGroup,
        VehicleRegistry,
        ParameterVector,
        PredictorConfig,
    ) {
        let config = PredictorConfig {
            time_steps: 2,
            input_features: 2,
            hidden_width: 3,
            output_features: 5,
            horizon: 2,
            learning_rate: 0.01,
            optimizer: Optimizer::PlainGradient,
            batch_size: 2,
        };
        let global = init_params(&config, &mut stream_rng(21, "init"));
        let mut registry = VehicleRegistry::new();
        let mut members = Vec::new();
        let mut rng = stream_rng(21, "data");
        for i in 0..n as u64 {
            let mut v = vehicle(i, i as f64, 0.0, "t");
            v.model = ParameterVector::zeros(config.param_dim());
            for _ in 0..samples_for(i) {
                let history = (0..config.input_dim())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let target = (0..config.horizon)
                    .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                    .collect();
                v.dataset.push(TrajectorySample { history, target });
            }
            members.push(v.id);
            registry.insert(v.id, v);
        }
        let group = SwarmGroup {
            members,
            task: "t".into(),
            group_model: None,
        };
        (group, registry, global, config)
    }

    #[test]
    fn singleton_round_returns_local_model() {
        let (group, mut registry, global, config) = training_setup(1, |_| 3);
        let outcome = swarm_round(
            &group,
            &mut registry,
            &global,
            &config,
            MergeFunction::ChainAverage,
        )
        .unwrap();
        let expected =
            model::train_epoch(&global, &registry[&VehicleId(0)].dataset, &config).unwrap();
        assert_eq!(outcome.group_model, expected);
        assert_eq!(outcome.intra_links, 0);
    }

    #[test]
    fn zero_learning_rate_round_returns_global() {
        let (group, mut registry, global, mut config) = training_setup(2, |_| 3);
        config.learning_rate = 0.0;
        let outcome = swarm_round(
            &group,
            &mut registry,
            &global,
            &config,
            MergeFunction::ChainAverage,
        )
        .unwrap();
        assert_eq!(outcome.group_model, global);
    }

    #[test]
    fn chain_fold_matches_nested_average() {
        let (group, mut registry, global, config) = training_setup(3, |_| 2);
        let outcome = swarm_round(
            &group,
            &mut registry,
            &global,
            &config,
            MergeFunction::ChainAverage,
        )
        .unwrap();
        // unrolled ((m1+m2)/2 + m3)/2 from the per-vehicle trained models
        let m: Vec<ParameterVector> = (0..3)
            .map(|i| registry[&VehicleId(i)].model.clone())
            .collect();
        let expected =
            chain_merge_pairwise(&chain_merge_pairwise(&m[0], &m[1]).unwrap(), &m[2]).unwrap();
        for (a, b) in outcome.group_model.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(outcome.intra_links, 2);
    }

    #[test]
    fn empty_dataset_member_is_skipped() {
        let (group, mut registry, global, config) =
            training_setup(3, |i| if i == 1 { 0 } else { 2 });
        let outcome = swarm_round(
            &group,
            &mut registry,
            &global,
            &config,
            MergeFunction::ChainAverage,
        )
        .unwrap();
        assert_eq!(outcome.skipped, vec![VehicleId(1)]);
        assert_eq!(outcome.trained, vec![VehicleId(0), VehicleId(2)]);
        assert_eq!(outcome.intra_links, 1);
        // the skipped member still adopted the broadcast model
        assert_eq!(registry[&VehicleId(1)].model, global);
    }

    #[test]
    fn all_empty_group_is_an_error() {
        let (group, mut registry, global, config) = training_setup(2, |_| 0);
        assert!(swarm_round(
            &group,
            &mut registry,
            &global,
            &config,
            MergeFunction::ChainAverage
        )
        .is_err());
    }

    #[test]
    fn merged_model_stays_in_member_hull() {
        let (group, mut registry, global, config) = training_setup(4, |_| 2);
        let outcome = swarm_round(
            &group,
            &mut registry,
            &global,
            &config,
            MergeFunction::ChainAverage,
        )
        .unwrap();
        let members: Vec<&ParameterVector> =
            group.members.iter().map(|m| &registry[m].model).collect();
        for i in 0..outcome.group_model.dim() {
            let lo = members
                .iter()
                .map(|m| m.values()[i])
                .fold(f64::INFINITY, f64::min);
            let hi = members
                .iter()
                .map(|m| m.values()[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let v = outcome.group_model.values()[i];
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn form_groups_is_a_partition(
            coords in proptest::collection::vec((0.0f64..2000.0, 0.0f64..50.0), 1..24),
            tasks in proptest::collection::vec(0u8..3, 24),
        ) {
            let vehicles: Vec<VehicleState> = coords
                .iter()
                .enumerate()
                .map(|(i, (x, y))| vehicle(i as u64, *x, *y, &format!("t{}", tasks[i % tasks.len()])))
                .collect();
            let refs: Vec<&VehicleState> = vehicles.iter().collect();
            let groups = form_groups(&refs, 150.0).unwrap();
            let mut seen: Vec<VehicleId> = groups.iter().flat_map(|g| g.members.clone()).collect();
            seen.sort_unstable();
            let mut expected: Vec<VehicleId> = vehicles.iter().map(|v| v.id).collect();
            expected.sort_unstable();
            prop_assert_eq!(seen, expected);
            for g in &groups {
                prop_assert!(!g.members.is_empty());
                prop_assert!(g.members.windows(2).all(|w| w[0] < w[1]));
            }
        }

        #[test]
        fn weighted_merge_stays_in_hull(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
            ga in 0.1f64..5.0,
            gb in 0.1f64..5.0,
        ) {
            let merged = weighted_merge(&[
                (ParameterVector::new(a.clone()).unwrap(), ga),
                (ParameterVector::new(b.clone()).unwrap(), gb),
            ]).unwrap();
            for i in 0..4 {
                let lo = a[i].min(b[i]) - 1e-9;
                let hi = a[i].max(b[i]) + 1e-9;
                prop_assert!(merged.values()[i] >= lo && merged.values()[i] <= hi);
            }
        }
    }
}

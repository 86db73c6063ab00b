//! Per-UAV access-network pipeline.
//!
//! Runs locally (and independently) on each UAV: estimate the operational
//! airspace for the assigned coverage zone, build a per-device RF map from a
//! budgeted hierarchical measurement sweep, pick the best position and
//! orientation for the chosen objective, and export a near-optimal candidate
//! set for the backhaul controller to choose from. The only cross-UAV
//! coupling is [`resolve_conflict`], the minimum-separation arbiter executed
//! once per movement tick.
//!
//! The search space is deliberately discrete: a position lattice (default
//! 20 m) crossed with small yaw/tilt sets, so the optimizer can be checked
//! exhaustively against ground truth.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::UavId;
use crate::world::{
    antenna_gain, path_loss, AntennaPattern, GridCell, Position3D, RateModel, WorldModel,
};

/// Default spacing of the airspace position lattice, meters.
pub const DEFAULT_LATTICE_SPACING_M: f64 = 20.0;

/// Default cap on exported candidate configurations.
pub const DEFAULT_CANDIDATE_CAP: usize = 32;

/// Default minimum separation range between UAVs, meters.
pub const DEFAULT_MSR_M: f64 = 50.0;

/// A new optimum must beat the current objective by this fraction before a
/// UAV abandons its position (handoff-churn guard).
pub const DEFAULT_HYSTERESIS: f64 = 0.05;

/// Inverse-distance-weighting exponent of the RF-map interpolator.
pub const IDW_POWER: f64 = 2.0;

/// Neighbor count of the RF-map interpolator.
pub const IDW_NEIGHBORS: usize = 8;

/// Minimum RF-map sampling budget.
pub const MIN_RF_BUDGET: usize = 8;

#[derive(Debug, Error)]
pub enum SkyranError {
    #[error("coverage zone is empty or escapes the world extent")]
    InvalidZone,
    #[error("no airspace point can cover the zone within the flight ceiling")]
    ZoneUncoverable,
    #[error("RF-map budget {0} below the minimum of {MIN_RF_BUDGET}")]
    BudgetTooSmall(usize),
    #[error("RF map covers no devices")]
    NoUes,
    #[error("epsilon {0} outside [0, 1)")]
    InvalidEpsilon(f64),
    #[error("cannot partition into {requested} zones: {reason}")]
    InvalidPartition { requested: usize, reason: String },
}

/// The ground cells one UAV is responsible for, with the per-UE rate floor
/// they are expected to receive.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverageZone {
    pub cells: BTreeSet<GridCell>,
    pub min_rate_bps: f64,
}

impl CoverageZone {
    pub fn validate(&self, world: &WorldModel) -> Result<(), SkyranError> {
        let (nx, ny) = world.grid_dims();
        if self.cells.is_empty() {
            return Err(SkyranError::InvalidZone);
        }
        if self.cells.iter().any(|c| c.ix >= nx || c.iy >= ny) {
            return Err(SkyranError::InvalidZone);
        }
        Ok(())
    }
}

/// A full RAN configuration for one UAV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavRanConfig {
    pub position: Position3D,
    pub yaw_deg: f64,
    pub tilt_deg: f64,
    pub tx_power_dbm: f64,
}

/// One point of the discrete search space: a lattice position plus an
/// antenna orientation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AirspacePose {
    pub position: Position3D,
    pub yaw_deg: f64,
    pub tilt_deg: f64,
}

/// Search-space generation parameters and the radio limits of the platform.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UavCapabilities {
    /// Base RAN antenna; yaw/tilt are overridden per pose.
    pub pattern: AntennaPattern,
    pub max_tx_power_dbm: f64,
    pub lattice_spacing_m: f64,
    pub yaw_set_deg: Vec<f64>,
    pub tilt_set_deg: Vec<f64>,
    /// Fraction of zone cells a pose must keep in-cone to belong to the
    /// operational airspace.
    pub coverage_fraction: f64,
}

impl Default for UavCapabilities {
    fn default() -> Self {
        Self {
            pattern: AntennaPattern::new(10.0, 90.0, -10.0),
            max_tx_power_dbm: 30.0,
            lattice_spacing_m: DEFAULT_LATTICE_SPACING_M,
            yaw_set_deg: vec![0.0, 90.0, 180.0, 270.0],
            tilt_set_deg: vec![0.0, 15.0, 30.0],
            coverage_fraction: 1.0,
        }
    }
}

/// All lattice poses from which the zone stays covered under the pure
/// cone-geometry test (no obstacle or SNR check at this stage: those enter
/// through the RF map).
pub fn operational_airspace(
    zone: &CoverageZone,
    caps: &UavCapabilities,
    world: &WorldModel,
) -> Result<Vec<AirspacePose>, SkyranError> {
    zone.validate(world)?;
    let centers: Vec<Position3D> = zone.cells.iter().map(|&c| world.cell_center(c)).collect();
    let spacing = caps.lattice_spacing_m;

    // No pose farther than the widest cone radius from the zone can help.
    let half_bw = caps.pattern.beamwidth_deg / 2.0;
    let reach = if half_bw >= 90.0 {
        world.extent.diagonal()
    } else {
        world.altitude_ceiling_m * half_bw.to_radians().tan()
    };
    let (min_x, max_x) = centers
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c.x), hi.max(c.x))
        });
    let (min_y, max_y) = centers
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c.y), hi.max(c.y))
        });

    let lattice_coords = |lo: f64, hi: f64, origin: f64| -> Vec<f64> {
        let start = ((lo - origin) / spacing).floor() as i64;
        let end = ((hi - origin) / spacing).ceil() as i64;
        (start..=end).map(|i| origin + i as f64 * spacing).collect()
    };
    let xs = lattice_coords(
        (min_x - reach).max(world.extent.min_x),
        (max_x + reach).min(world.extent.max_x),
        world.extent.min_x,
    );
    let ys = lattice_coords(
        (min_y - reach).max(world.extent.min_y),
        (max_y + reach).min(world.extent.max_y),
        world.extent.min_y,
    );
    let mut zs = Vec::new();
    let mut z = spacing;
    while z <= world.altitude_ceiling_m {
        zs.push(z);
        z += spacing;
    }
    if zs.is_empty() {
        zs.push(world.altitude_ceiling_m);
    }

    let needed = (caps.coverage_fraction * centers.len() as f64 - 1e-9)
        .ceil()
        .max(0.0) as usize;
    let mut poses = Vec::new();
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                let position = Position3D::new(x, y, z);
                for (yaw_idx, &yaw) in caps.yaw_set_deg.iter().enumerate() {
                    for &tilt in &caps.tilt_set_deg {
                        // Straight-down poses are yaw-invariant.
                        if tilt == 0.0 && yaw_idx > 0 {
                            continue;
                        }
                        let oriented = caps.pattern.with_orientation(yaw, tilt);
                        let covered = centers
                            .iter()
                            .filter(|c| oriented.in_cone(&position, c).unwrap_or(false))
                            .count();
                        if covered >= needed.max(1) {
                            poses.push(AirspacePose {
                                position,
                                yaw_deg: yaw,
                                tilt_deg: tilt,
                            });
                        }
                    }
                }
            }
        }
    }
    if poses.is_empty() {
        return Err(SkyranError::ZoneUncoverable);
    }
    Ok(poses)
}

/// Radio context an RF map predicts under.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RanRadioParams {
    pub tx_power_dbm: f64,
    pub pattern: AntennaPattern,
    pub noise_floor_dbm: f64,
    pub bandwidth_hz: f64,
    pub rate_model: RateModel,
}

/// Provenance of an RF-map sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleKind {
    Coarse,
    Fine,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RfSample {
    position_index: usize,
    kind: SampleKind,
    /// Measured path loss toward each UE, dB.
    path_loss_db: Vec<f64>,
}

/// Per-UE predicted signal map over the operational airspace.
///
/// Measurements capture the channel (path loss) at a position; the antenna
/// term is the UAV's own pattern and is applied analytically per pose, so a
/// single channel sounding serves every orientation at that position.
/// Unsampled positions interpolate by inverse-distance weighting over the
/// [`IDW_NEIGHBORS`] nearest samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RfMap {
    poses: Vec<AirspacePose>,
    pose_position: Vec<usize>,
    positions: Vec<Position3D>,
    ue_positions: Vec<Position3D>,
    samples: Vec<RfSample>,
    sampled_at: BTreeMap<usize, usize>,
    pub radio: RanRadioParams,
}

impl RfMap {
    pub fn poses(&self) -> &[AirspacePose] {
        &self.poses
    }

    pub fn ue_positions(&self) -> &[Position3D] {
        &self.ue_positions
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Sampled positions in visit order (coarse sweep, then refinements).
    pub fn sample_positions(&self) -> Vec<Position3D> {
        self.samples
            .iter()
            .map(|s| self.positions[s.position_index])
            .collect()
    }

    pub fn provenance(&self, pose_index: usize) -> Option<SampleKind> {
        self.sampled_at
            .get(&self.pose_position[pose_index])
            .map(|&s| self.samples[s].kind)
    }

    fn predicted_path_loss_db(&self, position_index: usize, ue_index: usize) -> f64 {
        if let Some(&s) = self.sampled_at.get(&position_index) {
            return self.samples[s].path_loss_db[ue_index];
        }
        let here = self.positions[position_index];
        // Nearest samples by position, ties by sample order.
        let mut by_distance: Vec<(f64, usize)> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (self.positions[s.position_index].distance(&here), i))
            .collect();
        by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut weight_sum = 0.0;
        let mut value = 0.0;
        for &(d, i) in by_distance.iter().take(IDW_NEIGHBORS) {
            if d < 1e-9 {
                return self.samples[i].path_loss_db[ue_index];
            }
            let w = 1.0 / d.powf(IDW_POWER);
            weight_sum += w;
            value += w * self.samples[i].path_loss_db[ue_index];
        }
        value / weight_sum
    }

    /// Predicted SNR at `pose_index` toward `ue_index`, dB.
    pub fn predicted_snr_db(&self, pose_index: usize, ue_index: usize) -> f64 {
        let pose = self.poses[pose_index];
        let pattern = self
            .radio
            .pattern
            .with_orientation(pose.yaw_deg, pose.tilt_deg);
        let gain = antenna_gain(&pattern, &pose.position, &self.ue_positions[ue_index])
            .expect("pose and UE positions are distinct");
        self.radio.tx_power_dbm + gain
            - self.predicted_path_loss_db(self.pose_position[pose_index], ue_index)
            - self.radio.noise_floor_dbm
    }

    /// Predicted per-UE rates at a pose, bit/s.
    pub fn predicted_rates_bps(&self, pose_index: usize) -> Vec<f64> {
        (0..self.ue_positions.len())
            .map(|ue| {
                self.radio
                    .rate_model
                    .rate_bps(self.predicted_snr_db(pose_index, ue), self.radio.bandwidth_hz)
            })
            .collect()
    }
}

/// Greedy farthest-point ordering over `points`, seeded at the point nearest
/// their centroid. Returns indices in pick order.
fn farthest_point_order(points: &[Position3D], count: usize) -> Vec<usize> {
    if points.is_empty() || count == 0 {
        return Vec::new();
    }
    let n = points.len() as f64;
    let centroid = Position3D::new(
        points.iter().map(|p| p.x).sum::<f64>() / n,
        points.iter().map(|p| p.y).sum::<f64>() / n,
        points.iter().map(|p| p.z).sum::<f64>() / n,
    );
    let mut seed = 0;
    let mut best = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = p.distance(&centroid);
        if d < best {
            best = d;
            seed = i;
        }
    }
    let mut order = vec![seed];
    let mut picked = vec![false; points.len()];
    picked[seed] = true;
    let mut min_dist: Vec<f64> = points.iter().map(|p| p.distance(&points[seed])).collect();
    while order.len() < count.min(points.len()) {
        let mut next = usize::MAX;
        let mut next_dist = f64::NEG_INFINITY;
        for (i, &d) in min_dist.iter().enumerate() {
            if !picked[i] && d > next_dist {
                next_dist = d;
                next = i;
            }
        }
        order.push(next);
        picked[next] = true;
        for (i, p) in points.iter().enumerate() {
            min_dist[i] = min_dist[i].min(p.distance(&points[next]));
        }
    }
    order
}

/// Two-phase budgeted measurement sweep: a coarse farthest-point net over
/// the airspace positions spends half the budget, then the remainder
/// refines around the top quartile of coarse samples ranked by their worst
/// per-UE signal.
pub fn build_rf_map(
    ue_estimates: &[Position3D],
    airspace: &[AirspacePose],
    budget: usize,
    radio: &RanRadioParams,
    world: &WorldModel,
) -> Result<RfMap, SkyranError> {
    if budget < MIN_RF_BUDGET {
        return Err(SkyranError::BudgetTooSmall(budget));
    }
    if airspace.is_empty() {
        return Err(SkyranError::ZoneUncoverable);
    }

    // Distinct positions in first-seen order.
    let mut positions: Vec<Position3D> = Vec::new();
    let mut keys: BTreeMap<(u64, u64, u64), usize> = BTreeMap::new();
    let mut pose_position = Vec::with_capacity(airspace.len());
    for pose in airspace {
        let key = (
            pose.position.x.to_bits(),
            pose.position.y.to_bits(),
            pose.position.z.to_bits(),
        );
        let idx = *keys.entry(key).or_insert_with(|| {
            positions.push(pose.position);
            positions.len() - 1
        });
        pose_position.push(idx);
    }

    let measure = |position: &Position3D| -> Vec<f64> {
        ue_estimates
            .iter()
            .map(|ue| {
                path_loss(position, ue, world.access_freq_mhz, world)
                    .expect("airspace poses sit above the ground plane")
            })
            .collect()
    };

    let total = budget.min(positions.len());
    let coarse_count = total.div_ceil(2);
    let coarse_order = farthest_point_order(&positions, coarse_count);

    let mut samples: Vec<RfSample> = Vec::new();
    let mut sampled_at: BTreeMap<usize, usize> = BTreeMap::new();
    for &pos_idx in &coarse_order {
        let sample = RfSample {
            position_index: pos_idx,
            kind: SampleKind::Coarse,
            path_loss_db: measure(&positions[pos_idx]),
        };
        sampled_at.insert(pos_idx, samples.len());
        samples.push(sample);
    }

    // Rank coarse samples by their minimum isotropic SNR over UEs.
    let mut ranked: Vec<(f64, usize)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let worst = s
                .path_loss_db
                .iter()
                .map(|pl| radio.tx_power_dbm - pl - radio.noise_floor_dbm)
                .fold(f64::INFINITY, f64::min);
            (worst, i)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let quartile: Vec<usize> = ranked
        .iter()
        .take(coarse_count.div_ceil(4).max(1))
        .map(|&(_, i)| samples[i].position_index)
        .collect();

    // Fine phase: round-robin over the quartile centers, each pulling in its
    // nearest still-unsampled position.
    let mut remaining = total - samples.len();
    'fine: while remaining > 0 {
        let mut progressed = false;
        for &center in &quartile {
            if remaining == 0 {
                break 'fine;
            }
            let center_pos = positions[center];
            let mut nearest = usize::MAX;
            let mut nearest_d = f64::INFINITY;
            for (i, p) in positions.iter().enumerate() {
                if sampled_at.contains_key(&i) {
                    continue;
                }
                let d = p.distance(&center_pos);
                if d < nearest_d {
                    nearest_d = d;
                    nearest = i;
                }
            }
            if nearest == usize::MAX {
                break 'fine;
            }
            let sample = RfSample {
                position_index: nearest,
                kind: SampleKind::Fine,
                path_loss_db: measure(&positions[nearest]),
            };
            sampled_at.insert(nearest, samples.len());
            samples.push(sample);
            remaining -= 1;
            progressed = true;
        }
        if !progressed {
            break;
        }
    }

    Ok(RfMap {
        poses: airspace.to_vec(),
        pose_position,
        positions,
        ue_positions: ue_estimates.to_vec(),
        samples,
        sampled_at,
        radio: radio.clone(),
    })
}

/// Coverage objective evaluated over the predicted per-UE rates at a pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// Maximize the worst per-UE rate (default).
    MaxMinRate,
    /// Maximize the mean per-UE rate.
    MeanRate,
    /// Maximize the count of UEs at or above the given rate.
    CoverageCount { min_rate_bps: f64 },
}

impl Objective {
    pub fn value(&self, rates_bps: &[f64]) -> f64 {
        match self {
            Objective::MaxMinRate => rates_bps.iter().copied().fold(f64::INFINITY, f64::min),
            Objective::MeanRate => rates_bps.iter().sum::<f64>() / rates_bps.len() as f64,
            Objective::CoverageCount { min_rate_bps } => {
                rates_bps.iter().filter(|&&r| r >= *min_rate_bps).count() as f64
            }
        }
    }
}

/// One evaluated search point.
#[derive(Clone, Copy, Debug)]
pub struct EvaluatedPose {
    pub pose_index: usize,
    pub value: f64,
    pub mean_rate_bps: f64,
}

/// Deterministic preference order over evaluated poses: objective, then mean
/// rate, then lower altitude, then lexicographic position, then orientation.
pub fn pose_preference(map: &RfMap, a: &EvaluatedPose, b: &EvaluatedPose) -> Ordering {
    let pa = map.poses()[a.pose_index];
    let pb = map.poses()[b.pose_index];
    b.value
        .total_cmp(&a.value)
        .then(b.mean_rate_bps.total_cmp(&a.mean_rate_bps))
        .then(pa.position.z.total_cmp(&pb.position.z))
        .then(pa.position.x.total_cmp(&pb.position.x))
        .then(pa.position.y.total_cmp(&pb.position.y))
        .then(pa.yaw_deg.total_cmp(&pb.yaw_deg))
        .then(pa.tilt_deg.total_cmp(&pb.tilt_deg))
}

fn evaluate_all(map: &RfMap, objective: Objective) -> Vec<EvaluatedPose> {
    (0..map.poses().len())
        .map(|i| {
            let rates = map.predicted_rates_bps(i);
            EvaluatedPose {
                pose_index: i,
                value: objective.value(&rates),
                mean_rate_bps: rates.iter().sum::<f64>() / rates.len() as f64,
            }
        })
        .collect()
}

/// Optimizer output: the chosen configuration and its predicted objective.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Placement {
    pub config: UavRanConfig,
    pub objective_value: f64,
}

/// Exhaustive argmax of the objective over the RF map's discrete airspace.
pub fn optimize_placement(map: &RfMap, objective: Objective) -> Result<Placement, SkyranError> {
    if map.ue_positions().is_empty() {
        return Err(SkyranError::NoUes);
    }
    let mut evaluated = evaluate_all(map, objective);
    evaluated.sort_by(|a, b| pose_preference(map, a, b));
    let best = evaluated[0];
    let pose = map.poses()[best.pose_index];
    Ok(Placement {
        config: UavRanConfig {
            position: pose.position,
            yaw_deg: pose.yaw_deg,
            tilt_deg: pose.tilt_deg,
            tx_power_dbm: map.radio.tx_power_dbm,
        },
        objective_value: best.value,
    })
}

/// The configurations within `epsilon` of the optimum, best first.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateSet {
    pub configs: Vec<UavRanConfig>,
    pub epsilon: f64,
    pub optimum_objective: f64,
}

/// Every evaluated configuration whose objective reaches
/// `(1 − epsilon) · optimum`, capped at `cap` keeping the best. The optimum
/// itself is always the first member.
pub fn candidate_set(
    map: &RfMap,
    objective: Objective,
    epsilon: f64,
    cap: usize,
) -> Result<CandidateSet, SkyranError> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(SkyranError::InvalidEpsilon(epsilon));
    }
    if map.ue_positions().is_empty() {
        return Err(SkyranError::NoUes);
    }
    let mut evaluated = evaluate_all(map, objective);
    evaluated.sort_by(|a, b| pose_preference(map, a, b));
    let optimum = evaluated[0].value;
    let threshold = (1.0 - epsilon) * optimum;
    let configs: Vec<UavRanConfig> = evaluated
        .iter()
        .take_while(|e| e.value >= threshold)
        .take(cap.max(1))
        .map(|e| {
            let pose = map.poses()[e.pose_index];
            UavRanConfig {
                position: pose.position,
                yaw_deg: pose.yaw_deg,
                tilt_deg: pose.tilt_deg,
                tx_power_dbm: map.radio.tx_power_dbm,
            }
        })
        .collect();
    Ok(CandidateSet {
        configs,
        epsilon,
        optimum_objective: optimum,
    })
}

/// Adopt a new optimum only when it beats the current objective by at least
/// the hysteresis fraction; keeps UAVs from hopping between near-equal
/// optima and churning handoffs.
pub fn should_adopt(current_objective: f64, new_objective: f64, hysteresis: f64) -> bool {
    new_objective > current_objective
        && new_objective >= current_objective * (1.0 + hysteresis)
}

/// Split the area into one zone per UAV: k-means over the device positions
/// (seeded, ties to the lowest cluster), then Voronoi assignment of every
/// ground cell to the nearest cluster centroid. Zones partition the grid
/// exactly.
pub fn partition_zones(
    world: &WorldModel,
    n_uavs: usize,
    ue_positions: &[Position3D],
    min_rate_bps: f64,
    rng: &mut impl Rng,
) -> Result<Vec<CoverageZone>, SkyranError> {
    if n_uavs == 0 {
        return Err(SkyranError::InvalidPartition {
            requested: 0,
            reason: "need at least one UAV".into(),
        });
    }
    let (nx, ny) = world.grid_dims();
    let cell_count = nx as usize * ny as usize;
    if n_uavs > cell_count {
        return Err(SkyranError::InvalidPartition {
            requested: n_uavs,
            reason: format!("only {} ground cells available", cell_count),
        });
    }

    let mut centroids: Vec<(f64, f64)> = Vec::with_capacity(n_uavs);
    if ue_positions.len() >= n_uavs {
        // Seeded distinct starting points, then Lloyd iterations.
        let mut picked: Vec<usize> = Vec::new();
        while picked.len() < n_uavs {
            let idx = rng.random_range(0..ue_positions.len());
            if !picked.contains(&idx) {
                picked.push(idx);
            }
        }
        centroids = picked
            .iter()
            .map(|&i| (ue_positions[i].x, ue_positions[i].y))
            .collect();
        let mut assignment = vec![0usize; ue_positions.len()];
        for _ in 0..100 {
            let mut changed = false;
            for (i, ue) in ue_positions.iter().enumerate() {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (k, &(cx, cy)) in centroids.iter().enumerate() {
                    let d = (ue.x - cx).powi(2) + (ue.y - cy).powi(2);
                    if d < best_d {
                        best_d = d;
                        best = k;
                    }
                }
                if assignment[i] != best {
                    assignment[i] = best;
                    changed = true;
                }
            }
            // Recompute centroids; revive empty clusters from the largest.
            let mut sums = vec![(0.0, 0.0, 0usize); n_uavs];
            for (i, ue) in ue_positions.iter().enumerate() {
                let s = &mut sums[assignment[i]];
                s.0 += ue.x;
                s.1 += ue.y;
                s.2 += 1;
            }
            for k in 0..n_uavs {
                if sums[k].2 == 0 {
                    let largest = (0..n_uavs).max_by_key(|&c| sums[c].2).unwrap();
                    let stray = ue_positions
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| assignment[*i] == largest)
                        .max_by(|(_, a), (_, b)| {
                            let da = (a.x - centroids[largest].0).powi(2)
                                + (a.y - centroids[largest].1).powi(2);
                            let db = (b.x - centroids[largest].0).powi(2)
                                + (b.y - centroids[largest].1).powi(2);
                            da.total_cmp(&db)
                        })
                        .map(|(i, _)| i)
                        .unwrap();
                    assignment[stray] = k;
                    sums[largest].2 -= 1;
                    sums[k] = (ue_positions[stray].x, ue_positions[stray].y, 1);
                    changed = true;
                }
                centroids[k] = (sums[k].0 / sums[k].2 as f64, sums[k].1 / sums[k].2 as f64);
            }
            if !changed {
                break;
            }
        }
    } else {
        for ue in ue_positions {
            centroids.push((ue.x, ue.y));
        }
        // Remaining zones seed uniformly over the area.
        while centroids.len() < n_uavs {
            let x = world.extent.min_x + rng.random::<f64>() * world.extent.width();
            let y = world.extent.min_y + rng.random::<f64>() * world.extent.height();
            centroids.push((x, y));
        }
    }

    let mut zones: Vec<BTreeSet<GridCell>> = vec![BTreeSet::new(); n_uavs];
    for cell in world.cells() {
        let center = world.cell_center(cell);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, &(cx, cy)) in centroids.iter().enumerate() {
            let d = (center.x - cx).powi(2) + (center.y - cy).powi(2);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        zones[best].insert(cell);
    }

    // A centroid dominated everywhere ends up with zero cells; give it the
    // cell nearest to it, stolen from a zone that can spare one.
    for k in 0..n_uavs {
        if !zones[k].is_empty() {
            continue;
        }
        let (cx, cy) = centroids[k];
        let mut candidates: Vec<(f64, usize, GridCell)> = Vec::new();
        for (other, zone) in zones.iter().enumerate() {
            if other == k || zone.len() < 2 {
                continue;
            }
            for &cell in zone {
                let c = world.cell_center(cell);
                candidates.push(((c.x - cx).powi(2) + (c.y - cy).powi(2), other, cell));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some(&(_, owner, cell)) = candidates.first() {
            zones[owner].remove(&cell);
            zones[k].insert(cell);
        } else {
            return Err(SkyranError::InvalidPartition {
                requested: n_uavs,
                reason: "not enough cells to give every zone one".into(),
            });
        }
    }

    Ok(zones
        .into_iter()
        .map(|cells| CoverageZone { cells, min_rate_bps })
        .collect())
}

/// Outcome of one MSR arbitration round.
#[derive(Clone, Debug, PartialEq)]
pub struct ConflictResolution {
    /// Position each UAV actually ends the tick at.
    pub committed: BTreeMap<UavId, Position3D>,
    /// UAVs whose move was cancelled this tick.
    pub held: Vec<UavId>,
    /// Set when the *current* positions already violate the MSR; all moves
    /// are cancelled in that case.
    pub initial_violation: bool,
}

/// Arbitrate planned moves under the minimum separation range. Priority is
/// ascending UAV id (lower id moves first). A move commits only if it keeps
/// the UAV at least `msr_m` from every higher-priority UAV's committed
/// position and from every not-yet-processed UAV's current position, so the
/// committed outcome never contains a pair closer than `msr_m` (given valid
/// input).
pub fn resolve_conflict(
    current: &BTreeMap<UavId, Position3D>,
    planned: &BTreeMap<UavId, Position3D>,
    msr_m: f64,
) -> ConflictResolution {
    let ids: Vec<UavId> = current.keys().copied().collect();
    for (i, a) in ids.iter().enumerate() {
        for b in ids.iter().skip(i + 1) {
            if current[a].distance(&current[b]) < msr_m {
                return ConflictResolution {
                    committed: current.clone(),
                    held: planned.keys().copied().collect(),
                    initial_violation: true,
                };
            }
        }
    }

    let mut committed: BTreeMap<UavId, Position3D> = BTreeMap::new();
    let mut held = Vec::new();
    for (idx, &id) in ids.iter().enumerate() {
        let target = planned.get(&id).copied().unwrap_or(current[&id]);
        let conflicts_committed = committed.values().any(|p| p.distance(&target) < msr_m);
        let conflicts_pending = ids[idx + 1..]
            .iter()
            .any(|other| current[other].distance(&target) < msr_m);
        if target != current[&id] && (conflicts_committed || conflicts_pending) {
            committed.insert(id, current[&id]);
            held.push(id);
        } else {
            committed.insert(id, target);
        }
    }
    ConflictResolution {
        committed,
        held,
        initial_violation: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::world::{link_snr, Obstacle, Rect};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_world() -> WorldModel {
        WorldModel::open(Rect::new(0.0, 0.0, 400.0, 400.0))
    }

    fn straight_down_caps() -> UavCapabilities {
        UavCapabilities {
            pattern: AntennaPattern::new(10.0, 90.0, -10.0),
            max_tx_power_dbm: 30.0,
            lattice_spacing_m: 20.0,
            yaw_set_deg: vec![0.0],
            tilt_set_deg: vec![0.0],
            coverage_fraction: 1.0,
        }
    }

    fn radio(world: &WorldModel, caps: &UavCapabilities) -> RanRadioParams {
        RanRadioParams {
            tx_power_dbm: caps.max_tx_power_dbm,
            pattern: caps.pattern,
            noise_floor_dbm: world.noise_floor_dbm,
            bandwidth_hz: 10e6,
            rate_model: world.rate_model,
        }
    }

    fn zone_around(world: &WorldModel, x: f64, y: f64, halfspan: f64) -> CoverageZone {
        let cells = world
            .cells()
            .filter(|&c| {
                let p = world.cell_center(c);
                (p.x - x).abs() <= halfspan && (p.y - y).abs() <= halfspan
            })
            .collect();
        CoverageZone {
            cells,
            min_rate_bps: 1e6,
        }
    }

    #[test]
    fn airspace_over_single_cell_matches_cone_geometry() {
        let world = small_world();
        let caps = straight_down_caps();
        let cell = world.cell_at(205.0, 205.0);
        let zone = CoverageZone {
            cells: [cell].into_iter().collect(),
            min_rate_bps: 1e6,
        };
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        assert!(!airspace.is_empty());
        let center = world.cell_center(cell);
        for pose in &airspace {
            let radius = pose.position.z * 45f64.to_radians().tan();
            assert!(pose.position.horizontal_distance(&center) <= radius + 1e-6);
            assert!(pose.position.z <= world.altitude_ceiling_m);
        }
        // And the reverse: every covering lattice point is present.
        let found: Vec<_> = airspace.iter().map(|p| p.position).collect();
        for ix in 0..=20 {
            for iy in 0..=20 {
                for iz in 1..=6 {
                    let p = Position3D::new(20.0 * ix as f64, 20.0 * iy as f64, 20.0 * iz as f64);
                    let covers =
                        p.horizontal_distance(&center) <= p.z * 45f64.to_radians().tan() + 1e-9;
                    assert_eq!(found.contains(&p), covers, "lattice point {:?}", p);
                }
            }
        }
    }

    #[test]
    fn zone_wider_than_any_cone_is_uncoverable() {
        let world = WorldModel::open(Rect::new(0.0, 0.0, 600.0, 600.0));
        let caps = straight_down_caps();
        let zone = CoverageZone {
            cells: world.cells().collect(),
            min_rate_bps: 1e6,
        };
        // Ceiling 122 m and 90° beamwidth give a cone radius of at most
        // 122 m — nowhere near enough for the 600 m zone.
        assert!(matches!(
            operational_airspace(&zone, &caps, &world),
            Err(SkyranError::ZoneUncoverable)
        ));
    }

    #[test]
    fn airspace_members_verified_by_footprint_oracle() {
        let world = small_world();
        let caps = straight_down_caps();
        // 160 m square: corner cells sit ~106 m from the center, inside the
        // 122 m cone radius available at the ceiling.
        let zone = zone_around(&world, 200.0, 200.0, 80.0);
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        assert!(!airspace.is_empty());
        for pose in airspace.iter().step_by(7) {
            let pattern = caps.pattern.with_orientation(pose.yaw_deg, pose.tilt_deg);
            let footprint = crate::world::coverage_footprint(
                &pose.position,
                &pattern,
                &world,
                -1e9,
                caps.max_tx_power_dbm,
            )
            .unwrap();
            assert!(zone.cells.is_subset(&footprint), "pose {:?}", pose);
        }
    }

    #[test]
    fn exhaustive_budget_reproduces_ground_truth() {
        let world = small_world();
        let caps = straight_down_caps();
        let zone = zone_around(&world, 200.0, 200.0, 60.0);
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        let ues = vec![
            Position3D::ground(195.0, 205.0),
            Position3D::ground(225.0, 175.0),
        ];
        let rp = radio(&world, &caps);
        let map = build_rf_map(&ues, &airspace, airspace.len(), &rp, &world).unwrap();
        let iso = AntennaPattern::isotropic();
        for (i, pose) in airspace.iter().enumerate() {
            let pattern = caps.pattern.with_orientation(pose.yaw_deg, pose.tilt_deg);
            for (u, ue) in ues.iter().enumerate() {
                let truth = link_snr(
                    rp.tx_power_dbm,
                    &pattern,
                    &pose.position,
                    &iso,
                    ue,
                    world.access_freq_mhz,
                    rp.noise_floor_dbm,
                    &world,
                )
                .unwrap()
                .snr_db;
                assert!(
                    (map.predicted_snr_db(i, u) - truth).abs() < 1e-9,
                    "pose {} ue {}",
                    i,
                    u
                );
            }
        }
    }

    #[test]
    fn sampled_points_predict_exactly_even_under_partial_budget() {
        let world = small_world();
        let caps = straight_down_caps();
        let zone = zone_around(&world, 200.0, 200.0, 60.0);
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        let ues = vec![Position3D::ground(200.0, 200.0)];
        let rp = radio(&world, &caps);
        let budget = (airspace.len() / 4).max(MIN_RF_BUDGET);
        let map = build_rf_map(&ues, &airspace, budget, &rp, &world).unwrap();
        assert!(map.sample_count() <= budget);
        let iso = AntennaPattern::isotropic();
        let mut checked = 0;
        for (i, pose) in airspace.iter().enumerate() {
            if map.provenance(i).is_none() {
                continue;
            }
            let pattern = caps.pattern.with_orientation(pose.yaw_deg, pose.tilt_deg);
            let truth = link_snr(
                rp.tx_power_dbm,
                &pattern,
                &pose.position,
                &iso,
                &ues[0],
                world.access_freq_mhz,
                rp.noise_floor_dbm,
                &world,
            )
            .unwrap()
            .snr_db;
            assert!((map.predicted_snr_db(i, 0) - truth).abs() < 1e-9);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn quarter_budget_interpolation_stays_within_three_db() {
        let world = small_world();
        let caps = straight_down_caps();
        let zone = zone_around(&world, 200.0, 200.0, 40.0);
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        let ues = vec![
            Position3D::ground(180.0, 210.0),
            Position3D::ground(230.0, 190.0),
        ];
        let rp = radio(&world, &caps);
        let budget = (airspace.len() / 4).max(MIN_RF_BUDGET);
        let map = build_rf_map(&ues, &airspace, budget, &rp, &world).unwrap();
        let iso = AntennaPattern::isotropic();
        let mut bad = 0;
        let mut total = 0;
        for (i, pose) in airspace.iter().enumerate() {
            if map.provenance(i).is_some() {
                continue;
            }
            let pattern = caps.pattern.with_orientation(pose.yaw_deg, pose.tilt_deg);
            for (u, ue) in ues.iter().enumerate() {
                let truth = link_snr(
                    rp.tx_power_dbm,
                    &pattern,
                    &pose.position,
                    &iso,
                    ue,
                    world.access_freq_mhz,
                    rp.noise_floor_dbm,
                    &world,
                )
                .unwrap()
                .snr_db;
                total += 1;
                if (map.predicted_snr_db(i, u) - truth).abs() > 3.0 {
                    bad += 1;
                }
            }
        }
        assert!(total > 0);
        assert!(
            (bad as f64) <= 0.05 * total as f64,
            "{} of {} predictions off by more than 3 dB",
            bad,
            total
        );
    }

    #[test]
    fn budget_below_minimum_is_rejected() {
        let world = small_world();
        let caps = straight_down_caps();
        let zone = zone_around(&world, 200.0, 200.0, 40.0);
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        let rp = radio(&world, &caps);
        assert!(matches!(
            build_rf_map(&[Position3D::ground(200.0, 200.0)], &airspace, 7, &rp, &world),
            Err(SkyranError::BudgetTooSmall(7))
        ));
    }

    #[test]
    fn single_ue_placement_hovers_low_above_it() {
        let world = small_world();
        let caps = straight_down_caps();
        let zone = zone_around(&world, 200.0, 200.0, 40.0);
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        // UE exactly under the (200, 200) lattice column.
        let ues = vec![Position3D::ground(200.0, 200.0)];
        let rp = radio(&world, &caps);
        let map = build_rf_map(&ues, &airspace, airspace.len(), &rp, &world).unwrap();
        let placement = optimize_placement(&map, Objective::MaxMinRate).unwrap();
        let lowest_z = airspace
            .iter()
            .filter(|p| p.position.x == 200.0 && p.position.y == 200.0)
            .map(|p| p.position.z)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(placement.config.position.x, 200.0);
        assert_eq!(placement.config.position.y, 200.0);
        assert_eq!(placement.config.position.z, lowest_z);
    }

    #[test]
    fn symmetric_ues_put_the_optimum_on_the_bisector() {
        let world = small_world();
        let caps = straight_down_caps();
        let zone = zone_around(&world, 200.0, 200.0, 60.0);
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        // Symmetric about the lattice line x = 200.
        let ues = vec![
            Position3D::ground(160.0, 200.0),
            Position3D::ground(240.0, 200.0),
        ];
        let rp = radio(&world, &caps);
        let map = build_rf_map(&ues, &airspace, airspace.len(), &rp, &world).unwrap();
        let placement = optimize_placement(&map, Objective::MaxMinRate).unwrap();
        assert_eq!(placement.config.position.x, 200.0, "optimum off the bisector");
        // Mirror poses across the bisector evaluate identically; the y
        // tie-break picks the smaller coordinate among equals.
        let twin = airspace.iter().enumerate().find(|(_, p)| {
            p.position.x == placement.config.position.x
                && p.position.z == placement.config.position.z
                && p.position.y != placement.config.position.y
                && (p.position.y - 200.0).abs() == (placement.config.position.y - 200.0).abs()
        });
        if let Some((idx, twin_pose)) = twin {
            let rates = map.predicted_rates_bps(idx);
            assert_eq!(
                Objective::MaxMinRate.value(&rates),
                placement.objective_value
            );
            assert!(placement.config.position.y < twin_pose.position.y);
        }
    }

    #[test]
    fn shadowed_region_is_avoided() {
        let mut world = small_world();
        // Wall just west of the UE shadows poses approaching from the west.
        world.obstacles.push(Obstacle {
            min_x: 150.0,
            min_y: 120.0,
            max_x: 170.0,
            max_y: 280.0,
            height_m: 122.0,
            attenuation_db: 40.0,
        });
        let caps = straight_down_caps();
        let zone = zone_around(&world, 220.0, 200.0, 60.0);
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        let ues = vec![Position3D::ground(220.0, 200.0)];
        let rp = radio(&world, &caps);
        let map = build_rf_map(&ues, &airspace, airspace.len(), &rp, &world).unwrap();
        let placement = optimize_placement(&map, Objective::MaxMinRate).unwrap();
        assert!(
            placement.config.position.x >= 180.0,
            "optimizer picked a shadowed pose at {:?}",
            placement.config.position
        );
        // Oracle agreement on the full instance.
        let (oracle_pose, oracle_value) =
            oracle::best_pose_ground_truth(&airspace, &ues, &rp, Objective::MaxMinRate, &world);
        assert_eq!(airspace[oracle_pose].position, placement.config.position);
        assert!((oracle_value - placement.objective_value).abs() < 1e-9);
    }

    #[test]
    fn full_budget_placement_matches_ground_truth_argmax() {
        let world = small_world();
        let caps = UavCapabilities {
            yaw_set_deg: vec![0.0, 90.0, 180.0, 270.0],
            tilt_set_deg: vec![0.0, 15.0],
            ..straight_down_caps()
        };
        let zone = zone_around(&world, 200.0, 200.0, 50.0);
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        let ues = vec![
            Position3D::ground(170.0, 210.0),
            Position3D::ground(230.0, 230.0),
            Position3D::ground(210.0, 160.0),
        ];
        let rp = radio(&world, &caps);
        let map = build_rf_map(&ues, &airspace, airspace.len(), &rp, &world).unwrap();
        for objective in [
            Objective::MaxMinRate,
            Objective::MeanRate,
            Objective::CoverageCount { min_rate_bps: 5e6 },
        ] {
            let placement = optimize_placement(&map, objective).unwrap();
            let again = optimize_placement(&map, objective).unwrap();
            assert_eq!(placement.config, again.config, "optimizer must be reproducible");
            let (oracle_pose, _) =
                oracle::best_pose_ground_truth(&airspace, &ues, &rp, objective, &world);
            let op = airspace[oracle_pose];
            assert_eq!(placement.config.position, op.position);
            assert_eq!(placement.config.yaw_deg, op.yaw_deg);
            assert_eq!(placement.config.tilt_deg, op.tilt_deg);
        }
    }

    #[test]
    fn candidate_set_definition_holds_at_the_extremes() {
        let world = small_world();
        let caps = straight_down_caps();
        let zone = zone_around(&world, 200.0, 200.0, 60.0);
        let airspace = operational_airspace(&zone, &caps, &world).unwrap();
        let ues = vec![Position3D::ground(190.0, 210.0)];
        let rp = radio(&world, &caps);
        let map = build_rf_map(&ues, &airspace, airspace.len(), &rp, &world).unwrap();
        let placement = optimize_placement(&map, Objective::MaxMinRate).unwrap();

        let find_pose = |cfg: &UavRanConfig| {
            airspace
                .iter()
                .position(|p| {
                    p.position == cfg.position
                        && p.yaw_deg == cfg.yaw_deg
                        && p.tilt_deg == cfg.tilt_deg
                })
                .unwrap()
        };

        let tight = candidate_set(&map, Objective::MaxMinRate, 0.0, 1000).unwrap();
        assert_eq!(tight.configs[0], placement.config);
        for (i, cfg) in tight.configs.iter().enumerate() {
            let value = Objective::MaxMinRate.value(&map.predicted_rates_bps(find_pose(cfg)));
            assert_eq!(value, tight.optimum_objective, "member {} not optimal", i);
        }

        let loose =
            candidate_set(&map, Objective::MaxMinRate, 0.999, DEFAULT_CANDIDATE_CAP).unwrap();
        assert!(loose.configs.len() <= DEFAULT_CANDIDATE_CAP);
        assert_eq!(loose.configs[0], placement.config);

        let mid = candidate_set(&map, Objective::MaxMinRate, 0.1, 1000).unwrap();
        for cfg in &mid.configs {
            let value = Objective::MaxMinRate.value(&map.predicted_rates_bps(find_pose(cfg)));
            assert!(value >= 0.9 * mid.optimum_objective);
        }
        assert!(matches!(
            candidate_set(&map, Objective::MaxMinRate, 1.0, 10),
            Err(SkyranError::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn single_zone_covers_everything() {
        let world = small_world();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zones =
            partition_zones(&world, 1, &[Position3D::ground(10.0, 10.0)], 1e6, &mut rng).unwrap();
        assert_eq!(zones.len(), 1);
        assert_eq!(zones[0].cells.len(), world.cells().count());
    }

    #[test]
    fn distant_clusters_land_in_distinct_zones() {
        let world = small_world();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ues = Vec::new();
        for i in 0..5 {
            ues.push(Position3D::ground(40.0 + i as f64 * 4.0, 50.0));
            ues.push(Position3D::ground(340.0 + i as f64 * 4.0, 350.0));
        }
        let zones = partition_zones(&world, 2, &ues, 1e6, &mut rng).unwrap();
        let zone_of = |p: &Position3D| {
            let cell = world.cell_at(p.x, p.y);
            zones.iter().position(|z| z.cells.contains(&cell)).unwrap()
        };
        let first = zone_of(&ues[0]);
        let second = zone_of(&ues[1]);
        assert_ne!(first, second);
        for (i, ue) in ues.iter().enumerate() {
            let expected = if i % 2 == 0 { first } else { second };
            assert_eq!(zone_of(ue), expected, "ue {}", i);
        }
    }

    #[test]
    fn fewer_ues_than_uavs_still_partitions() {
        let world = small_world();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let zones =
            partition_zones(&world, 3, &[Position3D::ground(200.0, 200.0)], 1e6, &mut rng)
                .unwrap();
        assert_eq!(zones.len(), 3);
        let total: usize = zones.iter().map(|z| z.cells.len()).sum();
        assert_eq!(total, world.cells().count());
        for z in &zones {
            assert!(!z.cells.is_empty());
        }
    }

    #[test]
    fn moves_to_well_separated_targets_both_commit() {
        let current: BTreeMap<UavId, Position3D> = [
            (UavId(0), Position3D::new(0.0, 0.0, 60.0)),
            (UavId(1), Position3D::new(200.0, 0.0, 60.0)),
        ]
        .into();
        let planned: BTreeMap<UavId, Position3D> = [
            (UavId(0), Position3D::new(0.0, 50.0, 60.0)),
            (UavId(1), Position3D::new(200.0, 50.0, 60.0)),
        ]
        .into();
        let out = resolve_conflict(&current, &planned, 50.0);
        assert!(!out.initial_violation);
        assert!(out.held.is_empty());
        assert_eq!(out.committed[&UavId(0)], planned[&UavId(0)]);
        assert_eq!(out.committed[&UavId(1)], planned[&UavId(1)]);
    }

    #[test]
    fn converging_moves_hold_the_lower_priority() {
        let current: BTreeMap<UavId, Position3D> = [
            (UavId(0), Position3D::new(0.0, 0.0, 60.0)),
            (UavId(1), Position3D::new(200.0, 0.0, 60.0)),
        ]
        .into();
        let target = Position3D::new(100.0, 0.0, 60.0);
        let planned: BTreeMap<UavId, Position3D> = [(UavId(0), target), (UavId(1), target)].into();
        let out = resolve_conflict(&current, &planned, 50.0);
        assert_eq!(out.committed[&UavId(0)], target);
        assert_eq!(out.committed[&UavId(1)], current[&UavId(1)]);
        assert_eq!(out.held, vec![UavId(1)]);
    }

    #[test]
    fn chained_holds_propagate() {
        // #2 holds because of #1's move; #3's move conflicts only with #2's
        // held position, so #3 holds as well.
        let current: BTreeMap<UavId, Position3D> = [
            (UavId(1), Position3D::new(0.0, 0.0, 60.0)),
            (UavId(2), Position3D::new(120.0, 0.0, 60.0)),
            (UavId(3), Position3D::new(240.0, 0.0, 60.0)),
        ]
        .into();
        let planned: BTreeMap<UavId, Position3D> = [
            (UavId(1), Position3D::new(30.0, 0.0, 60.0)),
            (UavId(2), Position3D::new(55.0, 0.0, 60.0)),
            (UavId(3), Position3D::new(150.0, 0.0, 60.0)),
        ]
        .into();
        let out = resolve_conflict(&current, &planned, 50.0);
        assert_eq!(out.committed[&UavId(1)], planned[&UavId(1)]);
        assert_eq!(out.committed[&UavId(2)], current[&UavId(2)]);
        assert_eq!(out.committed[&UavId(3)], current[&UavId(3)]);
        assert_eq!(out.held, vec![UavId(2), UavId(3)]);
        // Pairwise check on the committed outcome.
        let ids: Vec<_> = out.committed.keys().copied().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in ids.iter().skip(i + 1) {
                assert!(out.committed[a].distance(&out.committed[b]) >= 50.0);
            }
        }
    }

    #[test]
    fn initial_violation_cancels_everything() {
        let current: BTreeMap<UavId, Position3D> = [
            (UavId(0), Position3D::new(0.0, 0.0, 60.0)),
            (UavId(1), Position3D::new(10.0, 0.0, 60.0)),
        ]
        .into();
        let planned: BTreeMap<UavId, Position3D> =
            [(UavId(0), Position3D::new(500.0, 0.0, 60.0))].into();
        let out = resolve_conflict(&current, &planned, 50.0);
        assert!(out.initial_violation);
        assert_eq!(out.committed, current);
    }

    #[test]
    fn hysteresis_guards_against_churn() {
        assert!(!should_adopt(100.0, 100.0, 0.05));
        assert!(!should_adopt(100.0, 104.9, 0.05));
        assert!(should_adopt(100.0, 105.0, 0.05));
        assert!(should_adopt(0.0, 1.0, 0.05));
        assert!(!should_adopt(0.0, 0.0, 0.05));
    }

    proptest! {
        #[test]
        fn zones_always_partition_the_grid(
            n_uavs in 1usize..5,
            seed in 0u64..50,
            ue_count in 0usize..12,
        ) {
            let world = small_world();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ues: Vec<Position3D> = (0..ue_count)
                .map(|_| Position3D::ground(
                    rng.random::<f64>() * 400.0,
                    rng.random::<f64>() * 400.0,
                ))
                .collect();
            let zones = partition_zones(&world, n_uavs, &ues, 1e6, &mut rng).unwrap();
            let mut seen = BTreeSet::new();
            for z in &zones {
                prop_assert!(!z.cells.is_empty());
                for c in &z.cells {
                    prop_assert!(seen.insert(*c), "cell owned twice");
                }
            }
            prop_assert_eq!(seen.len(), world.cells().count());
        }

        #[test]
        fn committed_positions_respect_msr(
            seed in 0u64..200,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut current: BTreeMap<UavId, Position3D> = BTreeMap::new();
            // Spread-out initial positions that respect the MSR.
            for i in 0..4u32 {
                current.insert(
                    UavId(i),
                    Position3D::new(200.0 * i as f64, 200.0 * (i % 2) as f64, 60.0),
                );
            }
            for _ in 0..50 {
                let planned: BTreeMap<UavId, Position3D> = current
                    .iter()
                    .map(|(&id, &p)| {
                        let step = Position3D::new(
                            p.x + (rng.random::<f64>() - 0.5) * 120.0,
                            p.y + (rng.random::<f64>() - 0.5) * 120.0,
                            60.0,
                        );
                        (id, step)
                    })
                    .collect();
                let out = resolve_conflict(&current, &planned, DEFAULT_MSR_M);
                prop_assert!(!out.initial_violation);
                let ids: Vec<_> = out.committed.keys().copied().collect();
                for (i, a) in ids.iter().enumerate() {
                    for b in ids.iter().skip(i + 1) {
                        prop_assert!(
                            out.committed[a].distance(&out.committed[b]) >= DEFAULT_MSR_M
                        );
                    }
                }
                current = out.committed;
            }
        }
    }
}

//! Scenario file format, loading and validation.
//!
//! Scenarios are versioned JSON. Validation collects *every* violation with
//! the offending field so a bad file can be fixed in one pass.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::skyhaul::TechMode;
use crate::skyran::Objective;
use crate::world::{AntennaPattern, Obstacle, RateModel, Rect, WorldModel};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

/// One named violation found during validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    /// Decoupled antenna mounts: each UAV keeps its single best RAN
    /// configuration; the backhaul optimizes orientation separately.
    Hardware,
    /// Coupled mounts: the controller picks each UAV's configuration from
    /// its RAN candidate set to maximize the backhaul's satisfied fraction.
    Software,
}

impl std::str::FromStr for CouplingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hardware" => Ok(CouplingMode::Hardware),
            "software" => Ok(CouplingMode::Software),
            other => Err(format!("unknown coupling mode '{}'", other)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub extent: Rect,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution_m: f64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default = "default_access_freq")]
    pub access_freq_mhz: f64,
    #[serde(default = "default_backhaul_freq")]
    pub backhaul_freq_mhz: f64,
    #[serde(default = "default_ceiling")]
    pub altitude_ceiling_m: f64,
    #[serde(default = "default_ple")]
    pub path_loss_exponent: f64,
    #[serde(default = "default_noise_floor")]
    pub noise_floor_dbm: f64,
}

fn default_grid_resolution() -> f64 {
    crate::world::DEFAULT_GRID_RESOLUTION_M
}
fn default_access_freq() -> f64 {
    2600.0
}
fn default_backhaul_freq() -> f64 {
    5800.0
}
fn default_ceiling() -> f64 {
    crate::world::DEFAULT_ALTITUDE_CEILING_M
}
fn default_ple() -> f64 {
    2.0
}
fn default_noise_floor() -> f64 {
    -94.0
}

impl WorldSpec {
    pub fn to_world(&self) -> WorldModel {
        WorldModel {
            extent: self.extent,
            ground_grid_resolution_m: self.grid_resolution_m,
            obstacles: self.obstacles.clone(),
            access_freq_mhz: self.access_freq_mhz,
            backhaul_freq_mhz: self.backhaul_freq_mhz,
            altitude_ceiling_m: self.altitude_ceiling_m,
            path_loss_exponent: self.path_loss_exponent,
            reference_distance_m: crate::world::REFERENCE_DISTANCE_M,
            noise_floor_dbm: self.noise_floor_dbm,
            rate_model: RateModel::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UeWaypoint {
    pub time_s: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UeSpec {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Offered load toward the peer (or the gateway), bit/s. Zero means the
    /// device attaches but stays idle.
    pub demand_bps: f64,
    /// Traffic peer; defaults to the next UE in the list (standalone mode)
    /// or the gateway when one is configured.
    #[serde(default)]
    pub peer: Option<u32>,
    #[serde(default)]
    pub waypoints: Vec<UeWaypoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySpec {
    #[serde(default = "default_energy_initial")]
    pub initial_j: f64,
    #[serde(default = "default_hover_w")]
    pub hover_w: f64,
    #[serde(default = "default_per_bit_j")]
    pub relay_j_per_bit: f64,
    #[serde(default)]
    pub threshold_j: f64,
    #[serde(default = "default_outage_s")]
    pub outage_s: f64,
}

fn default_energy_initial() -> f64 {
    2.0e6
}
fn default_hover_w() -> f64 {
    200.0
}
fn default_per_bit_j() -> f64 {
    1.0e-8
}
fn default_outage_s() -> f64 {
    30.0
}

impl Default for EnergySpec {
    fn default() -> Self {
        Self {
            initial_j: default_energy_initial(),
            hover_w: default_hover_w(),
            relay_j_per_bit: default_per_bit_j(),
            threshold_j: 0.0,
            outage_s: default_outage_s(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntennaSpec {
    #[serde(default = "default_boresight")]
    pub boresight_gain_dbi: f64,
    #[serde(default = "default_beamwidth")]
    pub beamwidth_deg: f64,
    #[serde(default = "default_floor_gain")]
    pub floor_gain_dbi: f64,
}

fn default_boresight() -> f64 {
    10.0
}
fn default_beamwidth() -> f64 {
    90.0
}
fn default_floor_gain() -> f64 {
    -10.0
}

impl Default for AntennaSpec {
    fn default() -> Self {
        Self {
            boresight_gain_dbi: default_boresight(),
            beamwidth_deg: default_beamwidth(),
            floor_gain_dbi: default_floor_gain(),
        }
    }
}

impl AntennaSpec {
    pub fn to_pattern(self) -> AntennaPattern {
        AntennaPattern::new(self.boresight_gain_dbi, self.beamwidth_deg, self.floor_gain_dbi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetSpec {
    pub uav_count: u32,
    #[serde(default)]
    pub spare_count: u32,
    #[serde(default = "default_radio_count")]
    pub radio_count: u32,
    #[serde(default = "default_tx_power")]
    pub max_tx_power_dbm: f64,
    #[serde(default)]
    pub antenna: AntennaSpec,
    #[serde(default)]
    pub energy: EnergySpec,
    #[serde(default = "default_speed")]
    pub speed_mps: f64,
}

fn default_radio_count() -> u32 {
    2
}
fn default_tx_power() -> f64 {
    30.0
}
fn default_speed() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RanSpec {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_rf_budget")]
    pub rf_budget: usize,
    #[serde(default = "default_ranging_waypoints")]
    pub ranging_waypoints: usize,
    #[serde(default = "default_ranging_sigma")]
    pub ranging_sigma_m: f64,
    #[serde(default = "default_candidate_cap")]
    pub candidate_cap: usize,
    #[serde(default = "default_lattice")]
    pub lattice_spacing_m: f64,
    #[serde(default = "default_yaw_set")]
    pub yaw_set_deg: Vec<f64>,
    #[serde(default = "default_tilt_set")]
    pub tilt_set_deg: Vec<f64>,
    #[serde(default = "default_coverage_fraction")]
    pub coverage_fraction: f64,
    #[serde(default = "default_min_rate")]
    pub min_rate_bps: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_hysteresis")]
    pub hysteresis: f64,
    #[serde(default = "default_msr")]
    pub msr_m: f64,
    #[serde(default = "default_objective")]
    pub objective: String,
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_rf_budget() -> usize {
    48
}
fn default_ranging_waypoints() -> usize {
    4
}
fn default_ranging_sigma() -> f64 {
    2.0
}
fn default_candidate_cap() -> usize {
    crate::skyran::DEFAULT_CANDIDATE_CAP
}
fn default_lattice() -> f64 {
    crate::skyran::DEFAULT_LATTICE_SPACING_M
}
fn default_yaw_set() -> Vec<f64> {
    vec![0.0, 90.0, 180.0, 270.0]
}
fn default_tilt_set() -> Vec<f64> {
    vec![0.0, 15.0, 30.0]
}
fn default_coverage_fraction() -> f64 {
    1.0
}
fn default_min_rate() -> f64 {
    1.0e6
}
fn default_bandwidth() -> f64 {
    10.0e6
}
fn default_hysteresis() -> f64 {
    crate::skyran::DEFAULT_HYSTERESIS
}
fn default_msr() -> f64 {
    crate::skyran::DEFAULT_MSR_M
}
fn default_objective() -> String {
    "max-min-rate".to_string()
}

impl Default for RanSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all RanSpec fields default")
    }
}

impl RanSpec {
    pub fn objective(&self) -> Option<Objective> {
        match self.objective.as_str() {
            "max-min-rate" => Some(Objective::MaxMinRate),
            "mean-rate" => Some(Objective::MeanRate),
            "coverage-count" => Some(Objective::CoverageCount {
                min_rate_bps: self.min_rate_bps,
            }),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatewaySpec {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedEvent {
    pub time_s: f64,
    /// "uav-down" or "uav-restored".
    pub kind: String,
    pub uav: u32,
}

/// A complete simulation input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    /// Master seed; every stochastic stream derives from it. Required.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Sim-time to run after the bootstrap phase completes, seconds.
    pub duration_s: f64,
    #[serde(default = "default_update_period")]
    pub update_period_s: f64,
    pub world: WorldSpec,
    pub fleet: FleetSpec,
    pub ues: Vec<UeSpec>,
    pub tech: TechMode,
    #[serde(default = "default_coupling")]
    pub coupling: CouplingMode,
    #[serde(default)]
    pub gateway: Option<GatewaySpec>,
    #[serde(default)]
    pub scripted_events: Vec<ScriptedEvent>,
    #[serde(default)]
    pub ran: RanSpec,
}

fn default_update_period() -> f64 {
    60.0
}
fn default_coupling() -> CouplingMode {
    CouplingMode::Hardware
}

impl Scenario {
    /// Collect every violation; an empty list means the scenario is valid.
    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        let mut issue = |field: &str, message: String| {
            issues.push(ValidationIssue {
                field: field.to_string(),
                message,
            });
        };

        if self.version != SCENARIO_FORMAT_VERSION {
            issue(
                "version",
                format!(
                    "unsupported version {} (expected {})",
                    self.version, SCENARIO_FORMAT_VERSION
                ),
            );
        }
        if self.seed.is_none() {
            issue("seed", "missing; runs must be reproducible".into());
        }
        if !(self.duration_s > 0.0) {
            issue("duration_s", format!("{} must be positive", self.duration_s));
        }
        if !(self.update_period_s > 0.0) {
            issue(
                "update_period_s",
                format!("{} must be positive", self.update_period_s),
            );
        }

        let world = self.world.to_world();
        if let Err(e) = world.validate() {
            issue("world", e.to_string());
        }

        if self.fleet.uav_count == 0 {
            issue("fleet.uav_count", "need at least one UAV".into());
        }
        if self.fleet.radio_count == 0 {
            issue("fleet.radio_count", "need at least one backhaul radio".into());
        }
        if let Err(e) = self.fleet.antenna.to_pattern().validate() {
            issue("fleet.antenna", e.to_string());
        }
        if !(self.fleet.speed_mps > 0.0) {
            issue("fleet.speed_mps", "must be positive".into());
        }
        if !(self.fleet.energy.initial_j > 0.0) {
            issue("fleet.energy.initial_j", "must be positive".into());
        }

        let tech = crate::skyhaul::TechProfile::for_mode(self.tech);
        if !tech.simulatable() {
            issue(
                "tech",
                format!("{} is a data-only profile; pick sub6-wifi, sub6-lte or mmwave-60", self.tech),
            );
        }

        if !(0.0..1.0).contains(&self.ran.epsilon) {
            issue("ran.epsilon", format!("{} outside [0, 1)", self.ran.epsilon));
        }
        if self.ran.rf_budget < crate::skyran::MIN_RF_BUDGET {
            issue(
                "ran.rf_budget",
                format!(
                    "{} below the minimum of {}",
                    self.ran.rf_budget,
                    crate::skyran::MIN_RF_BUDGET
                ),
            );
        }
        if self.ran.ranging_waypoints < 3 {
            issue(
                "ran.ranging_waypoints",
                format!("{} below the trilateration minimum of 3", self.ran.ranging_waypoints),
            );
        }
        if self.ran.ranging_sigma_m < 0.0 {
            issue("ran.ranging_sigma_m", "must be non-negative".into());
        }
        if self.ran.msr_m < 0.0 {
            issue("ran.msr_m", "must be non-negative".into());
        }
        if self.ran.objective().is_none() {
            issue(
                "ran.objective",
                format!(
                    "unknown objective '{}' (max-min-rate, mean-rate, coverage-count)",
                    self.ran.objective
                ),
            );
        }

        let mut seen = BTreeSet::new();
        for ue in &self.ues {
            let field = format!("ues[{}]", ue.id);
            if !seen.insert(ue.id) {
                issue(&field, "duplicate UE id".into());
            }
            if !world.extent.contains_xy(ue.x, ue.y) {
                issue(&field, format!("position ({}, {}) outside the world extent", ue.x, ue.y));
            }
            if ue.demand_bps < 0.0 {
                issue(&field, "negative demand".into());
            }
            if let Some(peer) = ue.peer {
                if peer == ue.id {
                    issue(&field, "UE peers with itself".into());
                }
                if !self.ues.iter().any(|u| u.id == peer) {
                    issue(&field, format!("peer {} does not exist", peer));
                }
            }
            for (i, wp) in ue.waypoints.iter().enumerate() {
                if !world.extent.contains_xy(wp.x, wp.y) {
                    issue(
                        &format!("{}.waypoints[{}]", field, i),
                        "outside the world extent".into(),
                    );
                }
                if wp.time_s < 0.0 {
                    issue(&format!("{}.waypoints[{}]", field, i), "negative time".into());
                }
            }
        }

        if let Some(gw) = &self.gateway {
            if !world.extent.contains_xy(gw.x, gw.y) {
                issue("gateway", "outside the world extent".into());
            }
        }

        for (i, ev) in self.scripted_events.iter().enumerate() {
            let field = format!("scripted_events[{}]", i);
            if ev.kind != "uav-down" && ev.kind != "uav-restored" {
                issue(&field, format!("unknown kind '{}'", ev.kind));
            }
            if ev.uav >= self.fleet.uav_count {
                issue(&field, format!("uav {} not in the fleet", ev.uav));
            }
            if ev.time_s < 0.0 {
                issue(&field, "negative time".into());
            }
        }

        issues
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }
}

/// Parse and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, super::EngineError> {
    let text = std::fs::read_to_string(path).map_err(super::EngineError::Io)?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(super::EngineError::Parse)?;
    let issues = scenario.validate();
    if issues.is_empty() {
        Ok(scenario)
    } else {
        Err(super::EngineError::Validation(issues))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_scenario() -> Scenario {
        serde_json::from_value(serde_json::json!({
            "version": 1,
            "name": "minimal",
            "seed": 7,
            "duration_s": 10.0,
            "world": { "extent": { "min_x": 0.0, "min_y": 0.0, "max_x": 300.0, "max_y": 300.0 } },
            "fleet": { "uav_count": 1 },
            "ues": [ { "id": 0, "x": 150.0, "y": 150.0, "demand_bps": 1e6 } ],
            "tech": "sub6-wifi"
        }))
        .unwrap()
    }

    #[test]
    fn minimal_scenario_round_trips() {
        let scenario = minimal_scenario();
        assert!(scenario.validate().is_empty());
        let dumped = scenario.to_json();
        let reloaded: Scenario = serde_json::from_str(&dumped).unwrap();
        assert_eq!(scenario, reloaded);
        assert_eq!(dumped, reloaded.to_json());
    }

    #[test]
    fn missing_seed_is_named() {
        let mut scenario = minimal_scenario();
        scenario.seed = None;
        let issues = scenario.validate();
        assert!(issues.iter().any(|i| i.field == "seed"), "{:?}", issues);
    }

    #[test]
    fn out_of_extent_ue_is_named_with_id() {
        let mut scenario = minimal_scenario();
        scenario.ues.push(UeSpec {
            id: 5,
            x: 9999.0,
            y: 0.0,
            demand_bps: 0.0,
            peer: None,
            waypoints: vec![],
        });
        let issues = scenario.validate();
        assert!(issues.iter().any(|i| i.field == "ues[5]"), "{:?}", issues);
    }

    #[test]
    fn all_violations_are_collected_at_once() {
        let mut scenario = minimal_scenario();
        scenario.seed = None;
        scenario.duration_s = -1.0;
        scenario.ran.epsilon = 2.0;
        scenario.ues[0].x = -500.0;
        let issues = scenario.validate();
        assert!(issues.len() >= 4, "{:?}", issues);
    }

    #[test]
    fn data_only_tech_is_rejected() {
        let mut scenario = minimal_scenario();
        scenario.tech = TechMode::Fso;
        assert!(scenario.validate().iter().any(|i| i.field == "tech"));
    }
}

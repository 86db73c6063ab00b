//! Run metrics and output writers.
//!
//! `summary.json` carries the machine-readable totals; time series go to
//! CSV tables; the message trace is one line per core message. Everything
//! written here is a pure function of the run, byte-identical across
//! repeats of the same `(scenario, seed)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::skyhaul::BackhaulPlan;
use crate::skyran::{CandidateSet, UavRanConfig};
use crate::types::{UavId, UeId};

pub const METRICS_FORMAT_VERSION: u32 = 1;
pub const PLAN_FILE_VERSION: u32 = 1;
pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationRecord {
    pub time_s: f64,
    pub uav: u32,
    pub ue: u32,
    pub error_m: f64,
    pub residual_rms_m: f64,
    pub measurements: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UeRateSample {
    pub time_s: f64,
    pub ue: u32,
    pub serving: Option<u32>,
    pub snr_db: f64,
    pub rate_bps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaSample {
    pub time_s: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemandRecord {
    pub src: String,
    pub dst: String,
    pub demand_bps: f64,
    pub routed_bps: f64,
    pub satisfied_fraction: f64,
}

/// Aggregate counters and time series for one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub version: u32,
    pub scenario_name: String,
    pub seed: u64,
    /// Sim-time spent per phase, seconds.
    pub phase_timings_s: BTreeMap<String, f64>,
    pub updates_completed: u32,
    pub updates_skipped: u32,
    pub localization: Vec<LocalizationRecord>,
    pub ue_rate_series: Vec<UeRateSample>,
    pub lambda_series: Vec<LambdaSample>,
    pub final_demands: Vec<DemandRecord>,
    pub handoffs: u32,
    pub handoff_aborts: u32,
    pub tracking_area_updates: u32,
    pub duplicate_attaches: u32,
    pub pages: u32,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub packets_dropped: BTreeMap<String, u64>,
    pub control_messages_lost: u64,
    pub uavs_deployed: u32,
    pub relays_deployed: u32,
    /// Plan rebuilds that actually changed the plan.
    pub reconfigurations: u32,
    /// RAN optima adopted after bootstrap (hysteresis-gated).
    pub config_adoptions: u32,
    pub channel_conflicts_resolved: u32,
    pub channels_deactivated: u32,
    pub beam_drops: u32,
    pub rf_samples_used: BTreeMap<String, u32>,
    pub placement_objective_bps: BTreeMap<String, f64>,
    pub min_energy_reserve_j: f64,
    pub charge_bytes: BTreeMap<String, u64>,
    /// Movement legs abandoned after prolonged MSR holds.
    pub skipped_flight_legs: u32,
}

impl MetricsReport {
    pub fn new(scenario_name: &str, seed: u64) -> Self {
        Self {
            version: METRICS_FORMAT_VERSION,
            scenario_name: scenario_name.to_string(),
            seed,
            min_energy_reserve_j: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn packets_dropped_total(&self) -> u64 {
        self.packets_dropped.values().sum()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }
}

/// The plan artifact: chosen RAN configurations, exported candidate sets
/// and the final backhaul plan.
#[derive(Clone, Debug, Serialize)]
pub struct PlanFile {
    pub version: u32,
    pub ran_configs: BTreeMap<String, UavRanConfig>,
    pub candidate_sets: BTreeMap<String, CandidateSet>,
    pub backhaul: BackhaulPlan,
}

/// The controller-input snapshot: what each UAV reports upward before a
/// backhaul optimization round.
#[derive(Clone, Debug, Serialize)]
pub struct ControllerSnapshot {
    pub version: u32,
    pub time_ms: u64,
    pub tech: crate::skyhaul::TechMode,
    pub spares: u32,
    pub uavs: Vec<UavSnapshot>,
    pub demands: Vec<crate::skyhaul::Demand>,
}

#[derive(Clone, Debug, Serialize)]
pub struct UavSnapshot {
    pub uav: u32,
    pub position: crate::world::Position3D,
    pub radio_count: u32,
    pub energy_j: f64,
    pub demand_in_bps: f64,
    pub demand_out_bps: f64,
    pub candidates: Vec<UavRanConfig>,
}

pub fn uav_key(id: UavId) -> String {
    format!("uav{}", id.0)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    let mut f = std::fs::File::create(dir.join(name))?;
    f.write_all(contents.as_bytes())
}

/// Write every output artifact of a run into `dir` (created if needed).
pub fn write_metrics(
    report: &MetricsReport,
    trace_lines: &[String],
    plan: Option<&PlanFile>,
    snapshot: Option<&ControllerSnapshot>,
    dir: &Path,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_file(dir, "summary.json", &report.to_json())?;

    let mut ue_rates = String::from("time_s,ue,serving,snr_db,rate_bps\n");
    for s in &report.ue_rate_series {
        let serving = s.serving.map_or(String::new(), |u| u.to_string());
        ue_rates.push_str(&format!(
            "{},{},{},{},{}\n",
            s.time_s, s.ue, serving, s.snr_db, s.rate_bps
        ));
    }
    write_file(dir, "ue_rates.csv", &ue_rates)?;

    let mut lambda = String::from("time_s,lambda\n");
    for s in &report.lambda_series {
        lambda.push_str(&format!("{},{}\n", s.time_s, s.lambda));
    }
    write_file(dir, "lambda.csv", &lambda)?;

    let mut loc = String::from("time_s,uav,ue,error_m,residual_rms_m,measurements\n");
    for r in &report.localization {
        loc.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.time_s, r.uav, r.ue, r.error_m, r.residual_rms_m, r.measurements
        ));
    }
    write_file(dir, "localization.csv", &loc)?;

    let mut trace = String::new();
    for line in trace_lines {
        trace.push_str(line);
        trace.push('\n');
    }
    write_file(dir, "trace.log", &trace)?;

    if let Some(plan) = plan {
        let mut s = serde_json::to_string_pretty(plan).expect("plan serializes");
        s.push('\n');
        write_file(dir, "plan.json", &s)?;
    }
    if let Some(snapshot) = snapshot {
        let mut s = serde_json::to_string_pretty(snapshot).expect("snapshot serializes");
        s.push('\n');
        write_file(dir, "controller_snapshot.json", &s)?;
    }
    Ok(())
}

/// Parsed view of one `trace.log` line.
pub fn parse_trace_line(line: &str) -> Option<(u64, String, UavId, UavId, UeId)> {
    let mut parts = line.split(',');
    let time = parts.next()?.parse().ok()?;
    let kind = parts.next()?.to_string();
    let src = UavId(parts.next()?.parse().ok()?);
    let dst = UavId(parts.next()?.parse().ok()?);
    let ue = UeId(parts.next()?.parse().ok()?);
    Some((time, kind, src, dst, ue))
}

//! Centralized backhaul controller.
//!
//! Gathers per-UAV state (positions or candidate configurations, demands,
//! radio inventories), builds the inter-UAV link graph, assigns channels
//! (omni modes) or beams (directional modes), routes demands for the best
//! common satisfied fraction, adds relay UAVs where demands stay starved,
//! and reconfigures the whole plan when UAVs churn.
//!
//! Control is centralized and single-threaded per invocation: every entry
//! point takes a snapshot of the fleet and returns a complete
//! [`BackhaulPlan`] to be applied atomically at a tick boundary.

mod graph;
mod routing;

pub use graph::{
    assign_channels, assign_pressure, build_link_graph, links_conflict, select_beams,
    select_links, BackhaulNode, BeamPlan, BeamPointing, CandidateEdge, ChannelAssignment,
    LinkGraph,
};
pub use routing::{route_flows, Demand, DemandFlow, FlowAssignment, FlowPath, RoutedLink};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::UavId;
use crate::world::{Position3D, WorldModel};

/// Protocol interference model: links conflict when any endpoints of two
/// different links are within this multiple of the technology's range.
pub const INTERFERENCE_RANGE_FACTOR: f64 = 1.5;

/// Serialized plan format version.
pub const PLAN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SkyhaulError {
    #[error("unknown UAV {0}")]
    UnknownUav(UavId),
    #[error("{0:?} is a data-only technology profile, not a simulated mode")]
    DataOnlyTech(TechMode),
    #[error("invalid demand: {0}")]
    InvalidDemand(String),
}

/// A mesh endpoint: one of the UAVs, or the ground gateway in
/// Internet-backhauled deployments.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum NodeRef {
    Uav(UavId),
    Gateway,
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Uav(id) => write!(f, "{}", id),
            NodeRef::Gateway => write!(f, "gateway"),
        }
    }
}

/// Backhaul connectivity technology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TechMode {
    #[serde(rename = "sub6-wifi")]
    Sub6Wifi,
    #[serde(rename = "sub6-lte")]
    Sub6Lte,
    #[serde(rename = "mmwave-60")]
    Mmwave60,
    /// 28/39/70/80 GHz class. Data-only profile row.
    #[serde(rename = "mmwave-other")]
    MmwaveOther,
    /// Free-space optics. Data-only profile row.
    #[serde(rename = "fso")]
    Fso,
}

impl FromStr for TechMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sub6-wifi" => Ok(TechMode::Sub6Wifi),
            "sub6-lte" => Ok(TechMode::Sub6Lte),
            "mmwave-60" => Ok(TechMode::Mmwave60),
            "mmwave-other" => Ok(TechMode::MmwaveOther),
            "fso" => Ok(TechMode::Fso),
            other => Err(format!("unknown technology mode '{}'", other)),
        }
    }
}

impl fmt::Display for TechMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TechMode::Sub6Wifi => "sub6-wifi",
            TechMode::Sub6Lte => "sub6-lte",
            TechMode::Mmwave60 => "mmwave-60",
            TechMode::MmwaveOther => "mmwave-other",
            TechMode::Fso => "fso",
        };
        f.write_str(s)
    }
}

/// Radio parameters of one backhaul technology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechProfile {
    pub mode: TechMode,
    pub max_range_m: f64,
    pub channel_count: usize,
    pub per_channel_bandwidth_hz: f64,
    pub directional: bool,
    pub beamwidth_deg: f64,
    /// Carrier frequency; `None` falls back to the world's backhaul band.
    pub carrier_freq_mhz: Option<f64>,
    pub tx_power_dbm: f64,
    /// Per-end antenna gain: 0 for omni modes, array gain when directional.
    pub antenna_gain_dbi: f64,
    pub noise_floor_dbm: f64,
}

impl TechProfile {
    pub fn sub6_wifi() -> Self {
        Self {
            mode: TechMode::Sub6Wifi,
            max_range_m: 1000.0,
            channel_count: 3,
            per_channel_bandwidth_hz: 20e6,
            directional: false,
            beamwidth_deg: 360.0,
            carrier_freq_mhz: None,
            tx_power_dbm: 20.0,
            antenna_gain_dbi: 0.0,
            noise_floor_dbm: -94.0,
        }
    }

    pub fn sub6_lte() -> Self {
        Self {
            mode: TechMode::Sub6Lte,
            channel_count: 2,
            ..Self::sub6_wifi()
        }
    }

    /// 60 GHz: wide channel, steerable narrow beams, oxygen absorption, and
    /// ranges limited to a couple of kilometers.
    pub fn mmwave_60() -> Self {
        Self {
            mode: TechMode::Mmwave60,
            max_range_m: 2000.0,
            channel_count: 1,
            per_channel_bandwidth_hz: 2e9,
            directional: true,
            beamwidth_deg: 3.0,
            carrier_freq_mhz: Some(60_000.0),
            tx_power_dbm: 20.0,
            antenna_gain_dbi: 30.0,
            noise_floor_dbm: -74.0,
        }
    }

    /// Licensed mmWave bands: longer reach, heavier equipment. Data-only.
    pub fn mmwave_other() -> Self {
        Self {
            mode: TechMode::MmwaveOther,
            max_range_m: 5000.0,
            channel_count: 2,
            per_channel_bandwidth_hz: 1e9,
            directional: true,
            beamwidth_deg: 3.0,
            carrier_freq_mhz: Some(28_000.0),
            tx_power_dbm: 30.0,
            antenna_gain_dbi: 36.0,
            noise_floor_dbm: -77.0,
        }
    }

    /// Free-space optics: the longest reach and bandwidth of the table.
    /// Data-only.
    pub fn fso() -> Self {
        Self {
            mode: TechMode::Fso,
            max_range_m: 10_000.0,
            channel_count: 1,
            per_channel_bandwidth_hz: 10e9,
            directional: true,
            beamwidth_deg: 0.5,
            carrier_freq_mhz: None,
            tx_power_dbm: 20.0,
            antenna_gain_dbi: 40.0,
            noise_floor_dbm: -70.0,
        }
    }

    pub fn for_mode(mode: TechMode) -> Self {
        match mode {
            TechMode::Sub6Wifi => Self::sub6_wifi(),
            TechMode::Sub6Lte => Self::sub6_lte(),
            TechMode::Mmwave60 => Self::mmwave_60(),
            TechMode::MmwaveOther => Self::mmwave_other(),
            TechMode::Fso => Self::fso(),
        }
    }

    /// Modes the simulator will actually plan and route over.
    pub fn simulatable(&self) -> bool {
        matches!(
            self.mode,
            TechMode::Sub6Wifi | TechMode::Sub6Lte | TechMode::Mmwave60
        )
    }

    pub fn carrier_mhz(&self, world: &WorldModel) -> f64 {
        self.carrier_freq_mhz.unwrap_or(world.backhaul_freq_mhz)
    }

    pub fn ensure_simulatable(&self) -> Result<(), SkyhaulError> {
        if self.simulatable() {
            Ok(())
        } else {
            Err(SkyhaulError::DataOnlyTech(self.mode))
        }
    }
}

/// Demanded bit/s per ordered node pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DemandMatrix {
    pub entries: BTreeMap<(NodeRef, NodeRef), f64>,
}

impl DemandMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, src: NodeRef, dst: NodeRef, bps: f64) {
        if src == dst || bps <= 0.0 {
            return;
        }
        *self.entries.entry((src, dst)).or_insert(0.0) += bps;
    }

    pub fn to_demands(&self) -> Vec<Demand> {
        self.entries
            .iter()
            .map(|(&(src, dst), &demand_bps)| Demand {
                src,
                dst,
                demand_bps,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), SkyhaulError> {
        for (&(src, dst), &bps) in &self.entries {
            if src == dst {
                return Err(SkyhaulError::InvalidDemand(format!(
                    "self-demand at {}",
                    src
                )));
            }
            if !(bps >= 0.0) {
                return Err(SkyhaulError::InvalidDemand(format!(
                    "negative demand {} → {}",
                    src, dst
                )));
            }
        }
        Ok(())
    }
}

/// One planned link with its spectrum or beam assignment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlannedLink {
    pub a: NodeRef,
    pub b: NodeRef,
    pub distance_m: f64,
    pub capacity_bps: f64,
    pub channel: Option<usize>,
    pub beams: Option<(BeamPointing, BeamPointing)>,
    pub active: bool,
    pub load_bps: f64,
}

/// Complete controller output for one planning round.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BackhaulPlan {
    pub version: u32,
    pub tech: TechMode,
    pub nodes: Vec<BackhaulNode>,
    pub links: Vec<PlannedLink>,
    pub flows: FlowAssignment,
    pub channels_deactivated: u32,
    pub beam_drops: u32,
    pub channel_conflicts_resolved: u32,
    /// True when the active links leave the alive nodes disconnected.
    pub disconnected: bool,
}

impl BackhaulPlan {
    /// A plan with no nodes and no links; vacuously satisfied.
    pub fn empty(tech: TechMode) -> Self {
        Self {
            version: PLAN_FORMAT_VERSION,
            tech,
            nodes: Vec::new(),
            links: Vec::new(),
            flows: FlowAssignment::empty(),
            channels_deactivated: 0,
            beam_drops: 0,
            channel_conflicts_resolved: 0,
            disconnected: false,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.flows.lambda
    }

    pub fn total_routed_bps(&self) -> f64 {
        self.flows.total_routed_bps()
    }

    /// Shortest active-link path between two nodes, endpoints included.
    pub fn path(&self, from: NodeRef, to: NodeRef) -> Option<Vec<NodeRef>> {
        if from == to {
            return Some(vec![from]);
        }
        let ids: Vec<NodeRef> = self.nodes.iter().map(|n| n.id).collect();
        let index = |id: NodeRef| ids.iter().position(|&n| n == id);
        let (s, t) = (index(from)?, index(to)?);
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
        for link in self.links.iter().filter(|l| l.active) {
            if let (Some(a), Some(b)) = (index(link.a), index(link.b)) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let mut parent = vec![usize::MAX; ids.len()];
        parent[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for &v in &adjacency[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[t] == usize::MAX {
            return None;
        }
        let mut path = vec![ids[t]];
        let mut v = t;
        while v != s {
            v = parent[v];
            path.push(ids[v]);
        }
        path.reverse();
        Some(path)
    }

    /// Total traffic through a node over active links, bit/s.
    pub fn node_throughput_bps(&self, id: NodeRef) -> f64 {
        self.links
            .iter()
            .filter(|l| l.active && (l.a == id || l.b == id))
            .map(|l| l.load_bps)
            .sum()
    }
}

/// Build a full plan for one fleet snapshot: candidate graph, demand
/// pressure, link selection, channel or beam assignment, then routing.
pub fn plan_backhaul(
    nodes: &[BackhaulNode],
    demands: &DemandMatrix,
    tech: &TechProfile,
    world: &WorldModel,
) -> BackhaulPlan {
    let mut graph = build_link_graph(nodes, tech, world);
    assign_pressure(&mut graph, demands);
    let selected = select_links(&graph);

    let mut channels: BTreeMap<usize, usize> = BTreeMap::new();
    let mut beams: BTreeMap<usize, (BeamPointing, BeamPointing)> = BTreeMap::new();
    let mut inactive: BTreeSet<usize> = BTreeSet::new();
    let mut channels_deactivated = 0;
    let mut beam_drops = 0;
    let mut conflicts_resolved = 0;
    if tech.directional {
        let plan = select_beams(&graph, &selected, tech);
        beam_drops = plan.dropped.len() as u32;
        inactive.extend(plan.dropped.iter().copied());
        beams = plan.beams;
    } else {
        let assignment = assign_channels(&graph, &selected, tech);
        channels_deactivated = assignment.deactivated.len() as u32;
        inactive.extend(assignment.deactivated.iter().copied());
        for &(e, f) in &assignment.conflict_pairs {
            if let (Some(ce), Some(cf)) = (assignment.channels.get(&e), assignment.channels.get(&f))
            {
                if ce != cf {
                    conflicts_resolved += 1;
                }
            }
        }
        channels = assignment.channels;
    }

    let active: Vec<usize> = selected
        .iter()
        .copied()
        .filter(|e| !inactive.contains(e))
        .collect();
    let routed_links: Vec<RoutedLink> = active
        .iter()
        .map(|&e| RoutedLink {
            a: graph.edges[e].a,
            b: graph.edges[e].b,
            capacity_bps: graph.edges[e].capacity_bps,
        })
        .collect();
    let node_ids: Vec<NodeRef> = nodes.iter().map(|n| n.id).collect();
    let flows = route_flows(&node_ids, &routed_links, &demands.to_demands());

    let links: Vec<PlannedLink> = selected
        .iter()
        .map(|&e| {
            let edge = graph.edges[e];
            let load = active
                .iter()
                .position(|&x| x == e)
                .map(|i| flows.link_load_bps[i])
                .unwrap_or(0.0);
            PlannedLink {
                a: nodes[edge.a].id,
                b: nodes[edge.b].id,
                distance_m: edge.distance_m,
                capacity_bps: edge.capacity_bps,
                channel: channels.get(&e).copied(),
                beams: beams.get(&e).copied(),
                active: !inactive.contains(&e),
                load_bps: load,
            }
        })
        .collect();

    let disconnected = !graph.is_connected(&active);
    BackhaulPlan {
        version: PLAN_FORMAT_VERSION,
        tech: tech.mode,
        nodes: nodes.to_vec(),
        links,
        flows,
        channels_deactivated,
        beam_drops,
        channel_conflicts_resolved: conflicts_resolved,
        disconnected,
    }
}

/// Relay augmentation outcome.
#[derive(Clone, Debug)]
pub struct RelayAugmentation {
    pub relays: Vec<BackhaulNode>,
    pub plan: BackhaulPlan,
}

fn next_relay_id(nodes: &[BackhaulNode]) -> u32 {
    nodes
        .iter()
        .filter_map(|n| match n.id {
            NodeRef::Uav(UavId(id)) => Some(id + 1),
            NodeRef::Gateway => None,
        })
        .max()
        .unwrap_or(0)
}

/// Largest gap along the worst demand's straight line, among nodes close
/// enough to that corridor to matter. Returns the two positions bracketing
/// the gap.
fn widest_gap_on_corridor(
    nodes: &[BackhaulNode],
    src: Position3D,
    dst: Position3D,
    corridor_m: f64,
) -> (Position3D, Position3D) {
    let dx = dst.x - src.x;
    let dy = dst.y - src.y;
    let dz = dst.z - src.z;
    let len2 = dx * dx + dy * dy + dz * dz;
    let mut on_line: Vec<(f64, Position3D)> = vec![(0.0, src), (1.0, dst)];
    for node in nodes {
        let p = node.position;
        let t = if len2 == 0.0 {
            0.0
        } else {
            ((p.x - src.x) * dx + (p.y - src.y) * dy + (p.z - src.z) * dz) / len2
        };
        if !(0.0..=1.0).contains(&t) {
            continue;
        }
        let proj = Position3D::new(src.x + t * dx, src.y + t * dy, src.z + t * dz);
        if p.distance(&proj) <= corridor_m {
            on_line.push((t, p));
        }
    }
    on_line.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut widest = (src, dst);
    let mut widest_d = -1.0;
    for pair in on_line.windows(2) {
        let d = pair[0].1.distance(&pair[1].1);
        if d > widest_d {
            widest_d = d;
            widest = (pair[0].1, pair[1].1);
        }
    }
    widest
}

/// Greedily add relay UAVs until every demand is fully satisfied or the
/// spares run out. Each relay lands at the altitude ceiling over the
/// midpoint of the widest gap on the worst demand's corridor; a relay that
/// fails to strictly increase the total routed flow is removed and the
/// search stops.
pub fn augment_relays(
    nodes: &[BackhaulNode],
    demands: &DemandMatrix,
    tech: &TechProfile,
    spare_uavs: u32,
    relay_radio_count: u32,
    world: &WorldModel,
) -> RelayAugmentation {
    let mut all: Vec<BackhaulNode> = nodes.to_vec();
    let mut relays: Vec<BackhaulNode> = Vec::new();
    let mut plan = plan_backhaul(&all, demands, tech, world);
    let mut spares = spare_uavs;
    let base_id = next_relay_id(nodes);

    loop {
        let worst = plan
            .flows
            .demands
            .iter()
            .min_by(|a, b| {
                a.satisfied_fraction()
                    .total_cmp(&b.satisfied_fraction())
                    .then((a.src, a.dst).cmp(&(b.src, b.dst)))
            })
            .map(|d| (d.src, d.dst, d.satisfied_fraction()));
        let Some((src, dst, fraction)) = worst else {
            break;
        };
        if fraction >= 1.0 - 1e-9 || spares == 0 {
            break;
        }
        let src_pos = match all.iter().find(|n| n.id == src) {
            Some(n) => n.position,
            None => break,
        };
        let dst_pos = match all.iter().find(|n| n.id == dst) {
            Some(n) => n.position,
            None => break,
        };
        let (gap_a, gap_b) = widest_gap_on_corridor(&all, src_pos, dst_pos, tech.max_range_m);
        let relay_pos = Position3D::new(
            (gap_a.x + gap_b.x) / 2.0,
            (gap_a.y + gap_b.y) / 2.0,
            world.altitude_ceiling_m,
        );
        if all
            .iter()
            .any(|n| n.position.distance(&relay_pos) < 1e-9)
        {
            break;
        }
        let relay = BackhaulNode {
            id: NodeRef::Uav(UavId(base_id + relays.len() as u32)),
            position: relay_pos,
            radio_count: relay_radio_count,
        };
        all.push(relay);
        let candidate = plan_backhaul(&all, demands, tech, world);
        if candidate.total_routed_bps() <= plan.total_routed_bps() + 1e-6 {
            all.pop();
            break;
        }
        relays.push(relay);
        spares -= 1;
        plan = candidate;
    }
    RelayAugmentation { relays, plan }
}

/// Fleet events the controller reacts to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FleetEvent {
    UavDown(UavId),
    UavRestored(UavId),
    Periodic,
}

/// Controller-side fleet state carried between reconfigurations.
#[derive(Clone, Debug)]
pub struct HaulState {
    /// Every known node (fleet, gateway, adopted relays).
    pub nodes: Vec<BackhaulNode>,
    pub down: BTreeSet<UavId>,
    pub demands: DemandMatrix,
    pub tech: TechProfile,
    pub spares: u32,
    pub relay_radio_count: u32,
    pub plan: BackhaulPlan,
}

impl HaulState {
    pub fn new(
        nodes: Vec<BackhaulNode>,
        demands: DemandMatrix,
        tech: TechProfile,
        spares: u32,
        relay_radio_count: u32,
        world: &WorldModel,
    ) -> Self {
        let plan = plan_backhaul(&nodes, &demands, &tech, world);
        Self {
            nodes,
            down: BTreeSet::new(),
            demands,
            tech,
            spares,
            relay_radio_count,
            plan,
        }
    }

    pub fn alive_nodes(&self) -> Vec<BackhaulNode> {
        self.nodes
            .iter()
            .filter(|n| match n.id {
                NodeRef::Uav(id) => !self.down.contains(&id),
                NodeRef::Gateway => true,
            })
            .copied()
            .collect()
    }

    fn knows(&self, id: UavId) -> bool {
        self.nodes.iter().any(|n| n.id == NodeRef::Uav(id))
    }
}

/// React to a fleet event: drop or restore the node and rebuild link
/// selection, spectrum/beam assignment and routing. A UAV loss additionally
/// runs relay augmentation with the remaining spares. The periodic event
/// with unchanged inputs reproduces the same plan (idempotent).
pub fn reconfigure(
    state: &mut HaulState,
    event: FleetEvent,
    world: &WorldModel,
) -> Result<(), SkyhaulError> {
    match event {
        FleetEvent::UavDown(id) => {
            if !state.knows(id) {
                return Err(SkyhaulError::UnknownUav(id));
            }
            state.down.insert(id);
            let alive = state.alive_nodes();
            let augmented = augment_relays(
                &alive,
                &state.demands,
                &state.tech,
                state.spares,
                state.relay_radio_count,
                world,
            );
            state.spares -= augmented.relays.len() as u32;
            state.nodes.extend(augmented.relays.iter().copied());
            state.plan = augmented.plan;
        }
        FleetEvent::UavRestored(id) => {
            if !state.knows(id) {
                return Err(SkyhaulError::UnknownUav(id));
            }
            state.down.remove(&id);
            state.plan = plan_backhaul(&state.alive_nodes(), &state.demands, &state.tech, world);
        }
        FleetEvent::Periodic => {
            state.plan = plan_backhaul(&state.alive_nodes(), &state.demands, &state.tech, world);
        }
    }
    Ok(())
}

/// Candidate-bearing input for the software-coupled configuration choice.
#[derive(Clone, Debug)]
pub struct CandidateInput {
    pub uav: UavId,
    /// Candidate positions, best RAN objective first.
    pub positions: Vec<Position3D>,
    pub radio_count: u32,
}

/// Software-coupled mode: pick each UAV's final configuration from its RAN
/// candidate set to maximize the backhaul's common satisfied fraction
/// (coordinate ascent in UAV-id order, ties keeping the best RAN choice).
/// Returns the chosen candidate index per UAV.
pub fn choose_configs_for_backhaul(
    inputs: &[CandidateInput],
    fixed_nodes: &[BackhaulNode],
    demands: &DemandMatrix,
    tech: &TechProfile,
    world: &WorldModel,
) -> BTreeMap<UavId, usize> {
    let mut choice: BTreeMap<UavId, usize> = inputs.iter().map(|i| (i.uav, 0)).collect();
    let evaluate = |choice: &BTreeMap<UavId, usize>| -> (f64, f64) {
        let mut nodes = fixed_nodes.to_vec();
        for input in inputs {
            nodes.push(BackhaulNode {
                id: NodeRef::Uav(input.uav),
                position: input.positions[choice[&input.uav]],
                radio_count: input.radio_count,
            });
        }
        let plan = plan_backhaul(&nodes, demands, tech, world);
        (plan.lambda(), plan.total_routed_bps())
    };

    for _ in 0..5 {
        let mut changed = false;
        for input in inputs {
            let mut best_idx = choice[&input.uav];
            let mut best_score = {
                let score = evaluate(&choice);
                (score.0, score.1, std::cmp::Reverse(best_idx))
            };
            for idx in 0..input.positions.len() {
                if idx == choice[&input.uav] {
                    continue;
                }
                let mut trial = choice.clone();
                trial.insert(input.uav, idx);
                let (lambda, routed) = evaluate(&trial);
                let score = (lambda, routed, std::cmp::Reverse(idx));
                if score > best_score {
                    best_score = score;
                    best_idx = idx;
                }
            }
            if best_idx != choice[&input.uav] {
                choice.insert(input.uav, best_idx);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    choice
}

//! Backhaul link graph: candidate edges, link selection under radio
//! budgets, channel assignment for omni modes and beam assignment for
//! directional modes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::world::{AntennaPattern, Position3D, WorldModel};

use super::{DemandMatrix, NodeRef, TechProfile, INTERFERENCE_RANGE_FACTOR};

/// A mesh participant: a UAV (possibly a pure relay) or the ground gateway.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackhaulNode {
    pub id: NodeRef,
    pub position: Position3D,
    pub radio_count: u32,
}

/// Candidate link between two nodes (indices into the graph's node list).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CandidateEdge {
    pub a: usize,
    pub b: usize,
    pub distance_m: f64,
    pub capacity_bps: f64,
    /// Demand routed through this edge under shortest-hop routing; drives
    /// the selection and coloring order.
    pub pressure_bps: f64,
}

/// Candidate topology for one planning round.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkGraph {
    pub nodes: Vec<BackhaulNode>,
    pub edges: Vec<CandidateEdge>,
}

impl LinkGraph {
    pub fn node_index(&self, id: NodeRef) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Connected components over a chosen edge subset, as per-node labels.
    pub fn components(&self, edges: &[usize]) -> Vec<usize> {
        let mut label: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(label: &mut Vec<usize>, mut x: usize) -> usize {
            while label[x] != x {
                label[x] = label[label[x]];
                x = label[x];
            }
            x
        }
        for &e in edges {
            let (ra, rb) = (
                find(&mut label, self.edges[e].a),
                find(&mut label, self.edges[e].b),
            );
            if ra != rb {
                label[ra.max(rb)] = ra.min(rb);
            }
        }
        (0..self.nodes.len())
            .map(|i| find(&mut label, i))
            .collect()
    }

    pub fn is_connected(&self, edges: &[usize]) -> bool {
        if self.nodes.len() < 2 {
            return true;
        }
        let labels = self.components(edges);
        labels.iter().all(|&l| l == labels[0])
    }
}

/// Enumerate every pair within range that yields positive capacity. Radio
/// budgets do not bind here: the degree constraint applies at selection.
/// A disconnected result is reported, not an error.
pub fn build_link_graph(
    nodes: &[BackhaulNode],
    tech: &TechProfile,
    world: &WorldModel,
) -> LinkGraph {
    let freq = tech.carrier_mhz(world);
    let pattern = AntennaPattern::new(tech.antenna_gain_dbi, 360.0, tech.antenna_gain_dbi);
    let mut edges = Vec::new();
    for a in 0..nodes.len() {
        for b in (a + 1)..nodes.len() {
            let distance = nodes[a].position.distance(&nodes[b].position);
            if distance == 0.0 || distance > tech.max_range_m {
                continue;
            }
            let budget = crate::world::link_snr(
                tech.tx_power_dbm,
                &pattern,
                &nodes[a].position,
                &pattern,
                &nodes[b].position,
                freq,
                tech.noise_floor_dbm,
                world,
            )
            .expect("distinct node positions");
            let capacity = world
                .rate_model
                .rate_bps(budget.snr_db, tech.per_channel_bandwidth_hz);
            if capacity > 0.0 {
                edges.push(CandidateEdge {
                    a,
                    b,
                    distance_m: distance,
                    capacity_bps: capacity,
                    pressure_bps: 0.0,
                });
            }
        }
    }
    LinkGraph {
        nodes: nodes.to_vec(),
        edges,
    }
}

/// Estimate per-edge demand pressure by routing every demand along its
/// shortest-hop candidate path.
pub fn assign_pressure(graph: &mut LinkGraph, demands: &DemandMatrix) {
    for e in &mut graph.edges {
        e.pressure_bps = 0.0;
    }
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph.nodes.len()];
    for (i, e) in graph.edges.iter().enumerate() {
        adjacency[e.a].push((e.b, i));
        adjacency[e.b].push((e.a, i));
    }
    for adj in &mut adjacency {
        adj.sort();
    }
    for (&(src, dst), &demand) in &demands.entries {
        if demand <= 0.0 {
            continue;
        }
        let (Some(s), Some(t)) = (graph.node_index(src), graph.node_index(dst)) else {
            continue;
        };
        // BFS shortest hop path, deterministic tie-breaks by node order.
        let mut parent_edge = vec![usize::MAX; graph.nodes.len()];
        let mut parent = vec![usize::MAX; graph.nodes.len()];
        parent[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for &(v, e) in &adjacency[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    parent_edge[v] = e;
                    queue.push_back(v);
                }
            }
        }
        if parent[t] == usize::MAX {
            continue;
        }
        let mut v = t;
        while v != s {
            graph.edges[parent_edge[v]].pressure_bps += demand;
            v = parent[v];
        }
    }
}

/// Pick the operating subset of candidate edges under per-node radio
/// budgets: a maximum-capacity spanning forest first (connectivity), then
/// extra edges by pressure while radios remain. Returns edge indices in
/// ascending order.
pub fn select_links(graph: &LinkGraph) -> Vec<usize> {
    let mut degree: Vec<u32> = vec![0; graph.nodes.len()];
    let budget: Vec<u32> = graph.nodes.iter().map(|n| n.radio_count).collect();
    let mut selected: Vec<usize> = Vec::new();

    let mut forest_order: Vec<usize> = (0..graph.edges.len()).collect();
    forest_order.sort_by(|&x, &y| {
        graph.edges[y]
            .capacity_bps
            .total_cmp(&graph.edges[x].capacity_bps)
            .then(x.cmp(&y))
    });
    let mut label: Vec<usize> = (0..graph.nodes.len()).collect();
    fn find(label: &mut Vec<usize>, mut x: usize) -> usize {
        while label[x] != x {
            label[x] = label[label[x]];
            x = label[x];
        }
        x
    }
    for &e in &forest_order {
        let edge = graph.edges[e];
        if degree[edge.a] >= budget[edge.a] || degree[edge.b] >= budget[edge.b] {
            continue;
        }
        let (ra, rb) = (find(&mut label, edge.a), find(&mut label, edge.b));
        if ra == rb {
            continue;
        }
        label[ra.max(rb)] = ra.min(rb);
        degree[edge.a] += 1;
        degree[edge.b] += 1;
        selected.push(e);
    }

    let mut extras: Vec<usize> = (0..graph.edges.len())
        .filter(|e| !selected.contains(e))
        .collect();
    extras.sort_by(|&x, &y| {
        graph.edges[y]
            .pressure_bps
            .total_cmp(&graph.edges[x].pressure_bps)
            .then(
                graph.edges[y]
                    .capacity_bps
                    .total_cmp(&graph.edges[x].capacity_bps),
            )
            .then(x.cmp(&y))
    });
    for e in extras {
        let edge = graph.edges[e];
        if degree[edge.a] < budget[edge.a] && degree[edge.b] < budget[edge.b] {
            degree[edge.a] += 1;
            degree[edge.b] += 1;
            selected.push(e);
        }
    }
    selected.sort_unstable();
    selected
}

/// Channel assignment for a set of selected links.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ChannelAssignment {
    /// Edge index → channel.
    pub channels: BTreeMap<usize, usize>,
    /// Links that could not be colored within the channel budget.
    pub deactivated: Vec<usize>,
    /// Conflicting pairs among the selected links (by edge index).
    pub conflict_pairs: Vec<(usize, usize)>,
}

/// Two links conflict when they share an endpoint or any pair of their
/// endpoints sits within the protocol-model interference range.
pub fn links_conflict(
    graph: &LinkGraph,
    e: usize,
    f: usize,
    interference_range_m: f64,
) -> bool {
    let (ea, eb) = (graph.edges[e].a, graph.edges[e].b);
    let (fa, fb) = (graph.edges[f].a, graph.edges[f].b);
    if ea == fa || ea == fb || eb == fa || eb == fb {
        return true;
    }
    for &u in &[ea, eb] {
        for &v in &[fa, fb] {
            if graph.nodes[u]
                .position
                .distance(&graph.nodes[v].position)
                <= interference_range_m
            {
                return true;
            }
        }
    }
    false
}

/// Greedy first-fit coloring of the selected links' conflict graph, links
/// ordered by descending demand pressure (ties by edge id). Links that do
/// not fit in `channel_count` channels are deactivated.
pub fn assign_channels(
    graph: &LinkGraph,
    selected: &[usize],
    tech: &TechProfile,
) -> ChannelAssignment {
    let interference_range = INTERFERENCE_RANGE_FACTOR * tech.max_range_m;
    let mut order: Vec<usize> = selected.to_vec();
    order.sort_by(|&x, &y| {
        graph.edges[y]
            .pressure_bps
            .total_cmp(&graph.edges[x].pressure_bps)
            .then(x.cmp(&y))
    });

    let mut out = ChannelAssignment::default();
    for (i, &e) in selected.iter().enumerate() {
        for &f in selected.iter().skip(i + 1) {
            if links_conflict(graph, e, f, interference_range) {
                out.conflict_pairs.push((e, f));
            }
        }
    }

    for &e in &order {
        let mut used = vec![false; tech.channel_count];
        for (&other, &channel) in &out.channels {
            if links_conflict(graph, e, other, interference_range) {
                used[channel] = true;
            }
        }
        match used.iter().position(|&u| !u) {
            Some(channel) => {
                out.channels.insert(e, channel);
            }
            None => out.deactivated.push(e),
        }
    }
    out.deactivated.sort_unstable();
    out
}

/// Beam pointing for one end of a directional link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamPointing {
    pub radio: u32,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

/// Beam assignment outcome for directional modes.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BeamPlan {
    /// Edge index → (beam at endpoint a, beam at endpoint b).
    pub beams: BTreeMap<usize, (BeamPointing, BeamPointing)>,
    /// Links dropped because an endpoint ran out of radios, lowest demand
    /// first.
    pub dropped: Vec<usize>,
}

fn pointing(from: &Position3D, to: &Position3D, radio: u32) -> BeamPointing {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let dz = to.z - from.z;
    let horizontal = (dx * dx + dy * dy).sqrt();
    BeamPointing {
        radio,
        azimuth_deg: dy.atan2(dx).to_degrees(),
        elevation_deg: dz.atan2(horizontal).to_degrees(),
    }
}

/// Point both endpoints' beams along each retained link. One radio serves
/// one link; when a node has more selected links than radios the excess is
/// dropped in ascending demand order. Directional links all share the
/// spectrum, so there is no channel dimension here.
pub fn select_beams(graph: &LinkGraph, selected: &[usize], _tech: &TechProfile) -> BeamPlan {
    let mut order: Vec<usize> = selected.to_vec();
    order.sort_by(|&x, &y| {
        graph.edges[y]
            .pressure_bps
            .total_cmp(&graph.edges[x].pressure_bps)
            .then(x.cmp(&y))
    });
    let mut used: Vec<u32> = vec![0; graph.nodes.len()];
    let mut plan = BeamPlan::default();
    for &e in &order {
        let edge = graph.edges[e];
        if used[edge.a] >= graph.nodes[edge.a].radio_count
            || used[edge.b] >= graph.nodes[edge.b].radio_count
        {
            plan.dropped.push(e);
            continue;
        }
        let beam_a = pointing(
            &graph.nodes[edge.a].position,
            &graph.nodes[edge.b].position,
            used[edge.a],
        );
        let beam_b = pointing(
            &graph.nodes[edge.b].position,
            &graph.nodes[edge.a].position,
            used[edge.b],
        );
        used[edge.a] += 1;
        used[edge.b] += 1;
        plan.beams.insert(e, (beam_a, beam_b));
    }
    plan.dropped.sort_unstable();
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::UavId;
    use crate::world::Rect;

    fn world() -> WorldModel {
        WorldModel::open(Rect::new(-3000.0, -3000.0, 3000.0, 3000.0))
    }

    fn uav(id: u32, x: f64, y: f64) -> BackhaulNode {
        BackhaulNode {
            id: NodeRef::Uav(UavId(id)),
            position: Position3D::new(x, y, 100.0),
            radio_count: 2,
        }
    }

    #[test]
    fn pair_within_range_yields_one_candidate() {
        let tech = TechProfile::sub6_wifi();
        let graph = build_link_graph(&[uav(0, 0.0, 0.0), uav(1, 500.0, 0.0)], &tech, &world());
        assert_eq!(graph.edges.len(), 1);
        assert!(graph.edges[0].capacity_bps > 0.0);
    }

    #[test]
    fn mmwave_range_limit_prunes_distant_pair() {
        let tech = TechProfile::mmwave_60();
        assert_eq!(tech.max_range_m, 2000.0);
        let graph = build_link_graph(&[uav(0, 0.0, 0.0), uav(1, 3000.0, 0.0)], &tech, &world());
        assert!(graph.edges.is_empty());
    }

    #[test]
    fn triangle_keeps_all_candidates_despite_radio_budget() {
        let tech = TechProfile::sub6_wifi();
        let nodes = [uav(0, 0.0, 0.0), uav(1, 600.0, 0.0), uav(2, 300.0, 500.0)];
        let graph = build_link_graph(&nodes, &tech, &world());
        assert_eq!(graph.edges.len(), 3, "degree constraint binds at selection, not candidacy");
        let selected = select_links(&graph);
        assert_eq!(selected.len(), 3, "triangle fits 2 radios per node");
    }

    #[test]
    fn selection_respects_radio_budgets() {
        let tech = TechProfile::sub6_wifi();
        // A 4-star around node 0 with only 2 radios at the hub.
        let nodes = [
            uav(0, 0.0, 0.0),
            uav(1, 500.0, 0.0),
            uav(2, -500.0, 0.0),
            uav(3, 0.0, 500.0),
            uav(4, 0.0, -500.0),
        ];
        let mut graph = build_link_graph(&nodes, &tech, &world());
        // Spokes only: prune edges between leaf nodes.
        graph.edges.retain(|e| e.a == 0 || e.b == 0);
        let selected = select_links(&graph);
        assert_eq!(selected.len(), 2);
    }

    #[test]
    fn single_link_gets_channel_zero() {
        let tech = TechProfile::sub6_wifi();
        let graph = build_link_graph(&[uav(0, 0.0, 0.0), uav(1, 500.0, 0.0)], &tech, &world());
        let assignment = assign_channels(&graph, &[0], &tech);
        assert_eq!(assignment.channels[&0], 0);
        assert!(assignment.deactivated.is_empty());
    }

    #[test]
    fn chain_links_sharing_a_node_get_distinct_channels() {
        let tech = TechProfile::sub6_lte();
        let nodes = [uav(0, 0.0, 0.0), uav(1, 800.0, 0.0), uav(2, 1600.0, 0.0)];
        let graph = build_link_graph(&nodes, &tech, &world());
        assert_eq!(graph.edges.len(), 2, "only adjacent pairs are in range");
        let assignment = assign_channels(&graph, &[0, 1], &tech);
        let c0 = assignment.channels[&0];
        let c1 = assignment.channels[&1];
        assert_ne!(c0, c1);
        assert_eq!([c0, c1].iter().copied().min(), Some(0));
        assert_eq!([c0, c1].iter().copied().max(), Some(1));
    }

    #[test]
    fn odd_conflict_cycle_overflows_two_channels() {
        let mut tech = TechProfile::sub6_wifi();
        tech.channel_count = 2;
        // Five UAVs on a ring; each link conflicts with its neighbors via
        // shared endpoints, and the interference radius makes the conflict
        // graph a 5-cycle or denser — chromatic number at least 3.
        let nodes: Vec<BackhaulNode> = (0..5)
            .map(|i| {
                let ang = i as f64 * std::f64::consts::TAU / 5.0;
                uav(i, 800.0 * ang.cos(), 800.0 * ang.sin())
            })
            .collect();
        let graph = build_link_graph(&nodes, &tech, &world());
        let ring: Vec<usize> = (0..graph.edges.len()).collect();
        let assignment = assign_channels(&graph, &ring, &tech);
        assert!(
            !assignment.deactivated.is_empty(),
            "2 channels cannot color an odd conflict cycle"
        );
        // Confirm with the exact chromatic number of the conflict graph.
        let conflicts: Vec<(usize, usize)> = assignment
            .conflict_pairs
            .iter()
            .map(|&(e, f)| {
                (
                    ring.iter().position(|&x| x == e).unwrap(),
                    ring.iter().position(|&x| x == f).unwrap(),
                )
            })
            .collect();
        assert!(crate::oracle::chromatic_number(ring.len(), &conflicts) >= 3);
        // No two conflicting active links share a channel.
        for &(e, f) in &assignment.conflict_pairs {
            if let (Some(&ce), Some(&cf)) = (assignment.channels.get(&e), assignment.channels.get(&f)) {
                assert_ne!(ce, cf);
            }
        }
    }

    #[test]
    fn two_node_beams_align_exactly() {
        let tech = TechProfile::mmwave_60();
        let graph = build_link_graph(&[uav(0, 0.0, 0.0), uav(1, 1000.0, 0.0)], &tech, &world());
        let plan = select_beams(&graph, &[0], &tech);
        let (a, b) = plan.beams[&0];
        assert_eq!(a.azimuth_deg, 0.0);
        assert_eq!(b.azimuth_deg, 180.0);
        assert_eq!(a.elevation_deg, 0.0);
        assert_eq!(b.elevation_deg, 0.0);
    }

    #[test]
    fn hub_with_two_radios_drops_third_neighbor() {
        let tech = TechProfile::mmwave_60();
        let nodes = [
            uav(0, 0.0, 0.0),
            uav(1, 1000.0, 0.0),
            uav(2, 0.0, 1000.0),
            uav(3, -1000.0, 0.0),
        ];
        let mut graph = build_link_graph(&nodes, &tech, &world());
        graph.edges.retain(|e| e.a == 0 || e.b == 0);
        assert_eq!(graph.edges.len(), 3);
        // Highest pressure on the first two spokes keeps them.
        graph.edges[0].pressure_bps = 30e6;
        graph.edges[1].pressure_bps = 20e6;
        graph.edges[2].pressure_bps = 10e6;
        let all: Vec<usize> = (0..3).collect();
        let plan = select_beams(&graph, &all, &tech);
        assert_eq!(plan.beams.len(), 2);
        assert_eq!(plan.dropped, vec![2]);
    }

    #[test]
    fn retained_beams_point_along_their_links() {
        let tech = TechProfile::mmwave_60();
        let nodes = [
            uav(0, 0.0, 0.0),
            uav(1, 900.0, 300.0),
            uav(2, -400.0, 800.0),
        ];
        let graph = build_link_graph(&nodes, &tech, &world());
        let selected = select_links(&graph);
        let plan = select_beams(&graph, &selected, &tech);
        for (&e, &(beam_a, beam_b)) in &plan.beams {
            let edge = graph.edges[e];
            let expected_a = pointing(
                &graph.nodes[edge.a].position,
                &graph.nodes[edge.b].position,
                beam_a.radio,
            );
            let expected_b = pointing(
                &graph.nodes[edge.b].position,
                &graph.nodes[edge.a].position,
                beam_b.radio,
            );
            // Angular error between assigned beam and the connecting segment
            // must stay within half the beamwidth; here it is exactly zero.
            assert!((beam_a.azimuth_deg - expected_a.azimuth_deg).abs() <= tech.beamwidth_deg / 2.0);
            assert!((beam_b.azimuth_deg - expected_b.azimuth_deg).abs() <= tech.beamwidth_deg / 2.0);
            assert_eq!(beam_a.elevation_deg, expected_a.elevation_deg);
            assert_eq!(beam_b.elevation_deg, expected_b.elevation_deg);
        }
    }
}

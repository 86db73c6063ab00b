//! Independent brute-force reference implementations.
//!
//! Everything here is deliberately naive: dense sampling, exhaustive grid
//! scans, textbook max-flow, backtracking colorings. These functions share
//! no code with the optimized paths they are used to check, and they are
//! what `skylite run --verify-oracles` executes against a live scenario.

use crate::localization::RangeMeasurement;
use crate::skyran::{AirspacePose, Objective, RanRadioParams};
use crate::world::{link_snr, AntennaPattern, Obstacle, Position3D, Rect, WorldModel};

/// Per-obstacle crossing decision for the segment `a`→`b`, by dense point
/// sampling along the segment. Used to double-check the analytic slab test.
pub fn segment_crossings_sampled(
    a: &Position3D,
    b: &Position3D,
    obstacles: &[Obstacle],
) -> Vec<bool> {
    const SAMPLES: usize = 20_000;
    obstacles
        .iter()
        .map(|o| {
            (0..=SAMPLES).any(|i| {
                let t = i as f64 / SAMPLES as f64;
                let x = a.x + t * (b.x - a.x);
                let y = a.y + t * (b.y - a.y);
                let z = a.z + t * (b.z - a.z);
                x >= o.min_x
                    && x <= o.max_x
                    && y >= o.min_y
                    && y <= o.max_y
                    && z >= 0.0
                    && z <= o.height_m
            })
        })
        .collect()
}

/// Exhaustive grid search minimizing the trilateration objective
/// `Σ (‖waypoint − p‖ − range)²` over the ground plane. Returns the best
/// grid point and its objective value. Ties resolve to the first point in
/// row-major order.
pub fn trilaterate_grid(
    measurements: &[RangeMeasurement],
    extent: Rect,
    resolution_m: f64,
) -> (Position3D, f64) {
    let mut best = (Position3D::ground(extent.min_x, extent.min_y), f64::INFINITY);
    let nx = (extent.width() / resolution_m).ceil() as usize;
    let ny = (extent.height() / resolution_m).ceil() as usize;
    for iy in 0..=ny {
        for ix in 0..=nx {
            let p = Position3D::ground(
                extent.min_x + ix as f64 * resolution_m,
                extent.min_y + iy as f64 * resolution_m,
            );
            let objective: f64 = measurements
                .iter()
                .map(|m| {
                    let err = m.waypoint.distance(&p) - m.measured_range_m;
                    err * err
                })
                .sum();
            if objective < best.1 {
                best = (p, objective);
            }
        }
    }
    best
}

/// Exhaustive argmax of the placement objective over an airspace, computed
/// straight from ground-truth link budgets (never through an RF map).
/// Returns the winning pose index and its objective value. The tie order is
/// the placement contract: objective, then mean rate, then lower altitude,
/// then lexicographic position, then yaw, then tilt.
pub fn best_pose_ground_truth(
    airspace: &[AirspacePose],
    ue_positions: &[Position3D],
    radio: &RanRadioParams,
    objective: Objective,
    world: &WorldModel,
) -> (usize, f64) {
    let iso = AntennaPattern::isotropic();
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, pose) in airspace.iter().enumerate() {
        let pattern = radio.pattern.with_orientation(pose.yaw_deg, pose.tilt_deg);
        let rates: Vec<f64> = ue_positions
            .iter()
            .map(|ue| {
                let snr = link_snr(
                    radio.tx_power_dbm,
                    &pattern,
                    &pose.position,
                    &iso,
                    ue,
                    world.access_freq_mhz,
                    radio.noise_floor_dbm,
                    world,
                )
                .expect("airspace pose above ground")
                .snr_db;
                radio.rate_model.rate_bps(snr, radio.bandwidth_hz)
            })
            .collect();
        let value = objective.value(&rates);
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let replaces = match best {
            None => true,
            Some((b_idx, b_value, b_mean)) => {
                let bp = airspace[b_idx];
                let key_new = (
                    -value,
                    -mean,
                    pose.position.z,
                    pose.position.x,
                    pose.position.y,
                    pose.yaw_deg,
                    pose.tilt_deg,
                );
                let key_old = (
                    -b_value,
                    -b_mean,
                    bp.position.z,
                    bp.position.x,
                    bp.position.y,
                    bp.yaw_deg,
                    bp.tilt_deg,
                );
                lex_less(&key_new, &key_old)
            }
        };
        if replaces {
            best = Some((i, value, mean));
        }
    }
    let (idx, value, _) = best.expect("airspace is non-empty");
    (idx, value)
}

fn lex_less(a: &(f64, f64, f64, f64, f64, f64, f64), b: &(f64, f64, f64, f64, f64, f64, f64)) -> bool {
    let av = [a.0, a.1, a.2, a.3, a.4, a.5, a.6];
    let bv = [b.0, b.1, b.2, b.3, b.4, b.5, b.6];
    for (x, y) in av.iter().zip(bv.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => continue,
        }
    }
    false
}

/// Smallest relay count (up to `max_relays`, exhaustive over the lattice)
/// that fully satisfies every demand, or `None` if even `max_relays` can't.
/// Checks 0, 1, ... relays in order, trying every combination of lattice
/// positions.
pub fn minimal_relay_count(
    nodes: &[crate::skyhaul::BackhaulNode],
    demands: &crate::skyhaul::DemandMatrix,
    tech: &crate::skyhaul::TechProfile,
    world: &WorldModel,
    lattice: &[Position3D],
    max_relays: usize,
    relay_radio_count: u32,
) -> Option<usize> {
    use crate::skyhaul::{plan_backhaul, BackhaulNode, NodeRef};
    use crate::types::UavId;

    let base_id = nodes
        .iter()
        .filter_map(|n| match n.id {
            NodeRef::Uav(UavId(id)) => Some(id + 1000),
            NodeRef::Gateway => None,
        })
        .max()
        .unwrap_or(1000);
    let satisfied = |extra: &[Position3D]| -> bool {
        let mut all = nodes.to_vec();
        for (i, &p) in extra.iter().enumerate() {
            all.push(BackhaulNode {
                id: NodeRef::Uav(UavId(base_id + i as u32)),
                position: p,
                radio_count: relay_radio_count,
            });
        }
        let plan = plan_backhaul(&all, demands, tech, world);
        plan.flows
            .demands
            .iter()
            .all(|d| d.satisfied_fraction() >= 1.0 - 1e-9)
    };

    if satisfied(&[]) {
        return Some(0);
    }
    if max_relays >= 1 {
        for &p in lattice {
            if satisfied(&[p]) {
                return Some(1);
            }
        }
    }
    if max_relays >= 2 {
        for (i, &p) in lattice.iter().enumerate() {
            for &q in &lattice[i + 1..] {
                if satisfied(&[p, q]) {
                    return Some(2);
                }
            }
        }
    }
    None
}

/// Textbook Edmonds-Karp max-flow on an undirected graph given as
/// `(u, v, capacity)` edges. Parallel edges accumulate.
pub fn max_flow(node_count: usize, edges: &[(usize, usize, f64)], src: usize, dst: usize) -> f64 {
    if src == dst {
        return f64::INFINITY;
    }
    let mut residual = vec![vec![0.0_f64; node_count]; node_count];
    for &(u, v, c) in edges {
        residual[u][v] += c;
        residual[v][u] += c;
    }
    let mut total = 0.0;
    loop {
        // BFS for an augmenting path.
        let mut parent = vec![usize::MAX; node_count];
        parent[src] = src;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for v in 0..node_count {
                if parent[v] == usize::MAX && residual[u][v] > 1e-12 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[dst] == usize::MAX {
            return total;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = dst;
        while v != src {
            let u = parent[v];
            bottleneck = bottleneck.min(residual[u][v]);
            v = u;
        }
        let mut v = dst;
        while v != src {
            let u = parent[v];
            residual[u][v] -= bottleneck;
            residual[v][u] += bottleneck;
            v = u;
        }
        total += bottleneck;
    }
}

/// Chromatic number of a small graph by backtracking. Vertices are
/// `0..node_count`, `conflicts` lists undirected adjacent pairs.
pub fn chromatic_number(node_count: usize, conflicts: &[(usize, usize)]) -> usize {
    if node_count == 0 {
        return 0;
    }
    let mut adjacent = vec![vec![false; node_count]; node_count];
    for &(u, v) in conflicts {
        adjacent[u][v] = true;
        adjacent[v][u] = true;
    }
    fn feasible(
        k: usize,
        vertex: usize,
        colors: &mut Vec<usize>,
        adjacent: &[Vec<bool>],
    ) -> bool {
        if vertex == colors.len() {
            return true;
        }
        // Symmetry breaking: a vertex may only open one new color.
        let used = colors[..vertex].iter().copied().max().map_or(0, |m| m + 1);
        for color in 0..k.min(used + 1) {
            if (0..vertex).any(|u| adjacent[vertex][u] && colors[u] == color) {
                continue;
            }
            colors[vertex] = color;
            if feasible(k, vertex + 1, colors, adjacent) {
                return true;
            }
        }
        false
    }
    for k in 1..=node_count {
        let mut colors = vec![0usize; node_count];
        if feasible(k, 0, &mut colors, &adjacent) {
            return k;
        }
    }
    node_count
}

//! Flow routing over the active backhaul links.
//!
//! The objective is max-concurrent-flow: find the largest common fraction λ
//! such that λ of *every* demand routes simultaneously, then fill leftover
//! capacity greedily per demand. λ is located by bisection over a
//! feasibility routine that routes each demand by shortest-path augmentation
//! with capacity scaling on the shared residual graph. For a single demand
//! this degenerates to exact max-flow.
//!
//! Links are wireless and half-duplex: one capacity pool per link, shared by
//! both directions and all demands.

use serde::{Deserialize, Serialize};

use super::NodeRef;

/// Routed-vs-demanded slack treated as satisfied, bit/s.
const FLOW_EPS: f64 = 1e-6;

/// Bisection steps locating λ.
const LAMBDA_ITERATIONS: usize = 40;

/// One undirected link offered to the router.
#[derive(Clone, Copy, Debug)]
pub struct RoutedLink {
    pub a: usize,
    pub b: usize,
    pub capacity_bps: f64,
}

/// One source→destination requirement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub demand_bps: f64,
}

/// A routed path carrying part of one demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowPath {
    pub nodes: Vec<NodeRef>,
    pub rate_bps: f64,
}

/// Routing outcome for one demand.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DemandFlow {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub demand_bps: f64,
    pub routed_bps: f64,
    pub paths: Vec<FlowPath>,
}

impl DemandFlow {
    pub fn satisfied_fraction(&self) -> f64 {
        if self.demand_bps <= 0.0 {
            1.0
        } else {
            (self.routed_bps / self.demand_bps).clamp(0.0, 1.0)
        }
    }
}

/// Full routing result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowAssignment {
    /// Common satisfied fraction: the minimum over demands.
    pub lambda: f64,
    pub demands: Vec<DemandFlow>,
    /// Total traffic on each link (by the caller's link index), bit/s.
    pub link_load_bps: Vec<f64>,
}

impl FlowAssignment {
    pub fn empty() -> Self {
        Self {
            lambda: 1.0,
            demands: Vec::new(),
            link_load_bps: Vec::new(),
        }
    }

    pub fn total_routed_bps(&self) -> f64 {
        self.demands.iter().map(|d| d.routed_bps).sum()
    }
}

/// Shared-capacity flow state: per-demand signed flow on every link
/// (positive along the link's canonical a→b orientation).
struct Router<'a> {
    node_count: usize,
    links: &'a [RoutedLink],
    adjacency: Vec<Vec<(usize, usize)>>,
    /// flows[demand][link], signed.
    flows: Vec<Vec<f64>>,
}

impl<'a> Router<'a> {
    fn new(node_count: usize, links: &'a [RoutedLink], demand_count: usize) -> Self {
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); node_count];
        for (i, l) in links.iter().enumerate() {
            adjacency[l.a].push((l.b, i));
            adjacency[l.b].push((l.a, i));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Self {
            node_count,
            links,
            adjacency,
            flows: vec![vec![0.0; links.len()]; demand_count],
        }
    }

    fn reset(&mut self) {
        for f in &mut self.flows {
            f.fill(0.0);
        }
    }

    /// Capacity left for demand `k` to push along link `e` from node `u`.
    fn pushable(&self, k: usize, e: usize, u: usize) -> f64 {
        let link = self.links[e];
        let others: f64 = (0..self.flows.len())
            .filter(|&j| j != k)
            .map(|j| self.flows[j][e].abs())
            .sum();
        let headroom = link.capacity_bps - others;
        let signed = self.flows[k][e];
        if u == link.a {
            headroom - signed
        } else {
            headroom + signed
        }
    }

    fn apply(&mut self, k: usize, e: usize, u: usize, amount: f64) {
        if u == self.links[e].a {
            self.flows[k][e] += amount;
        } else {
            self.flows[k][e] -= amount;
        }
    }

    /// Push up to `target` units for demand `k` from `s` to `t` by
    /// shortest-path augmentation with capacity scaling. Returns the amount
    /// actually routed.
    fn augment_to(&mut self, k: usize, s: usize, t: usize, target: f64) -> f64 {
        if s == t || target <= 0.0 {
            return 0.0;
        }
        let max_cap = self
            .links
            .iter()
            .map(|l| l.capacity_bps)
            .fold(0.0_f64, f64::max);
        if max_cap <= 0.0 {
            return 0.0;
        }
        let mut routed = 0.0;
        let mut delta = 2.0_f64.powf(max_cap.log2().floor());
        let floor = (max_cap * 1e-12).max(FLOW_EPS / 8.0);
        loop {
            let threshold = delta.max(floor);
            while routed < target - FLOW_EPS {
                let Some((path_nodes, path_links)) = self.shortest_path(k, s, t, threshold) else {
                    break;
                };
                let mut bottleneck = target - routed;
                for (i, &e) in path_links.iter().enumerate() {
                    bottleneck = bottleneck.min(self.pushable(k, e, path_nodes[i]));
                }
                if bottleneck <= 0.0 {
                    break;
                }
                for (i, &e) in path_links.iter().enumerate() {
                    self.apply(k, e, path_nodes[i], bottleneck);
                }
                routed += bottleneck;
            }
            if delta <= floor || routed >= target - FLOW_EPS {
                break;
            }
            delta /= 2.0;
        }
        routed
    }

    /// BFS for the fewest-hop residual path with pushable ≥ threshold.
    fn shortest_path(
        &self,
        k: usize,
        s: usize,
        t: usize,
        threshold: f64,
    ) -> Option<(Vec<usize>, Vec<usize>)> {
        let mut parent = vec![usize::MAX; self.node_count];
        let mut parent_edge = vec![usize::MAX; self.node_count];
        parent[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for &(v, e) in &self.adjacency[u] {
                if parent[v] == usize::MAX && self.pushable(k, e, u) >= threshold {
                    parent[v] = u;
                    parent_edge[v] = e;
                    queue.push_back(v);
                }
            }
        }
        if parent[t] == usize::MAX {
            return None;
        }
        let mut nodes = vec![t];
        let mut links = Vec::new();
        let mut v = t;
        while v != s {
            links.push(parent_edge[v]);
            v = parent[v];
            nodes.push(v);
        }
        nodes.reverse();
        links.reverse();
        Some((nodes, links))
    }

    /// Route `fraction` of every demand in order; true when all fit.
    fn route_fraction(&mut self, demands: &[(usize, usize, f64)], fraction: f64) -> bool {
        self.reset();
        for (k, &(s, t, d)) in demands.iter().enumerate() {
            let target = fraction * d;
            if target <= 0.0 {
                continue;
            }
            let routed = self.augment_to(k, s, t, target);
            if routed < target - FLOW_EPS {
                return false;
            }
        }
        true
    }

    /// Decompose demand `k`'s signed flow into simple paths (cancelling any
    /// residual cycles).
    fn decompose(&mut self, k: usize, s: usize, t: usize) -> Vec<(Vec<usize>, f64)> {
        let tol = FLOW_EPS / 8.0;
        let mut paths = Vec::new();
        'outer: loop {
            let mut nodes = vec![s];
            let mut links: Vec<usize> = Vec::new();
            let mut u = s;
            loop {
                // Smallest-index neighbor with positive outgoing flow.
                let mut next: Option<(usize, usize)> = None;
                for &(v, e) in &self.adjacency[u] {
                    let out = if u == self.links[e].a {
                        self.flows[k][e]
                    } else {
                        -self.flows[k][e]
                    };
                    if out > tol {
                        next = Some((v, e));
                        break;
                    }
                }
                let Some((v, e)) = next else {
                    if u == s && links.is_empty() {
                        break 'outer;
                    }
                    // Dead end off the main stream: drop the stranded flow.
                    for (i, &le) in links.iter().enumerate() {
                        self.apply(k, le, nodes[i], -tol);
                    }
                    continue 'outer;
                };
                if let Some(pos) = nodes.iter().position(|&n| n == v) {
                    // Cycle: cancel it and restart the walk.
                    let mut cycle_min = f64::INFINITY;
                    for (i, &le) in links.iter().enumerate().skip(pos) {
                        let out = if nodes[i] == self.links[le].a {
                            self.flows[k][le]
                        } else {
                            -self.flows[k][le]
                        };
                        cycle_min = cycle_min.min(out);
                    }
                    let out_e = if u == self.links[e].a {
                        self.flows[k][e]
                    } else {
                        -self.flows[k][e]
                    };
                    cycle_min = cycle_min.min(out_e);
                    for (i, &le) in links.iter().enumerate().skip(pos) {
                        self.apply(k, le, nodes[i], -cycle_min);
                    }
                    self.apply(k, e, u, -cycle_min);
                    continue 'outer;
                }
                nodes.push(v);
                links.push(e);
                u = v;
                if u == t {
                    let mut bottleneck = f64::INFINITY;
                    for (i, &le) in links.iter().enumerate() {
                        let out = if nodes[i] == self.links[le].a {
                            self.flows[k][le]
                        } else {
                            -self.flows[k][le]
                        };
                        bottleneck = bottleneck.min(out);
                    }
                    for (i, &le) in links.iter().enumerate() {
                        self.apply(k, le, nodes[i], -bottleneck);
                    }
                    paths.push((nodes.clone(), bottleneck));
                    continue 'outer;
                }
            }
        }
        paths
    }
}

/// Route `demands` over `links` connecting `node_ids`, maximizing the
/// common satisfied fraction and then filling residual capacity per demand.
/// A graph with no usable capacity yields λ = 0, not an error.
pub fn route_flows(
    node_ids: &[NodeRef],
    links: &[RoutedLink],
    demands: &[Demand],
) -> FlowAssignment {
    if demands.is_empty() {
        return FlowAssignment {
            lambda: 1.0,
            demands: Vec::new(),
            link_load_bps: vec![0.0; links.len()],
        };
    }
    let index_of = |id: NodeRef| node_ids.iter().position(|&n| n == id);
    let resolved: Vec<(usize, usize, f64)> = demands
        .iter()
        .map(|d| {
            let s = index_of(d.src);
            let t = index_of(d.dst);
            match (s, t) {
                (Some(s), Some(t)) if s != t && d.demand_bps > 0.0 => (s, t, d.demand_bps),
                // Unroutable or empty demands route zero; same-node demands
                // need no backhaul and are satisfied by construction.
                _ => (usize::MAX, usize::MAX, d.demand_bps),
            }
        })
        .collect();

    let mut router = Router::new(node_ids.len(), links, demands.len());
    let routable: Vec<(usize, usize, f64)> = resolved
        .iter()
        .map(|&(s, t, d)| if s == usize::MAX { (0, 0, 0.0) } else { (s, t, d) })
        .collect();

    // Bisect λ over the sequential-augmentation feasibility check.
    let lambda = if router.route_fraction(&routable, 1.0) {
        1.0
    } else {
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..LAMBDA_ITERATIONS {
            let mid = (lo + hi) / 2.0;
            if router.route_fraction(&routable, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        router.route_fraction(&routable, lo);
        lo
    };

    // Greedy residual fill toward each full demand, in demand order.
    let mut routed: Vec<f64> = routable.iter().map(|&(_, _, d)| lambda * d).collect();
    for (k, &(s, t, d)) in routable.iter().enumerate() {
        if d <= 0.0 {
            continue;
        }
        let extra = router.augment_to(k, s, t, d - routed[k]);
        routed[k] += extra;
    }

    let mut link_load = vec![0.0; links.len()];
    for flows in &router.flows {
        for (e, f) in flows.iter().enumerate() {
            link_load[e] += f.abs();
        }
    }

    let mut out_demands = Vec::with_capacity(demands.len());
    for (k, demand) in demands.iter().enumerate() {
        let (s, t, _) = routable[k];
        let unroutable = resolved[k].0 == usize::MAX;
        let same_node = index_of(demand.src).is_some()
            && index_of(demand.src) == index_of(demand.dst);
        let paths = if unroutable {
            Vec::new()
        } else {
            router
                .decompose(k, s, t)
                .into_iter()
                .map(|(nodes, rate)| FlowPath {
                    nodes: nodes.into_iter().map(|i| node_ids[i]).collect(),
                    rate_bps: rate,
                })
                .collect()
        };
        let routed_bps = if unroutable {
            if same_node || demand.demand_bps <= 0.0 {
                demand.demand_bps
            } else {
                0.0
            }
        } else {
            routed[k]
        };
        out_demands.push(DemandFlow {
            src: demand.src,
            dst: demand.dst,
            demand_bps: demand.demand_bps,
            routed_bps,
            paths,
        });
    }

    let lambda = out_demands
        .iter()
        .map(|d| d.satisfied_fraction())
        .fold(1.0_f64, f64::min);
    FlowAssignment {
        lambda,
        demands: out_demands,
        link_load_bps: link_load,
    }
}

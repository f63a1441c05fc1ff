//! Exact minimum-cost flow on integer networks, and the network that encodes
//! the size-constrained cluster assignment step.
//!
//! [`solve_mcf`] is a general successive-shortest-path solver (Bellman–Ford
//! for the initial potentials, Dijkstra on reduced costs afterwards).
//! [`solve_assignment`] solves the assignment network produced by
//! [`build_assignment_network`] without materializing it: it starts from the
//! nearest-cluster pseudo-flow and routes the remaining excess along shortest
//! paths in the residual graph condensed onto cluster nodes. Both return
//! optimal flows for the same network.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Real squared distances are multiplied by this and rounded before solving.
pub const COST_SCALE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: i64,
    pub cost: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork {
    pub node_count: usize,
    /// Positive for sources, negative for sinks.
    pub supplies: Vec<i64>,
    pub arcs: Vec<Arc>,
}

impl FlowNetwork {
    pub fn new(node_count: usize, supplies: Vec<i64>, arcs: Vec<Arc>) -> Result<Self> {
        let net = Self {
            node_count,
            supplies,
            arcs,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.supplies.len() != self.node_count {
            return Err(Error::DimensionMismatch {
                expected: self.node_count,
                got: self.supplies.len(),
                context: "supplies per node",
            });
        }
        let total: i64 = self.supplies.iter().sum();
        if total != 0 {
            return Err(Error::Infeasible(format!("supplies sum to {total}, not 0")));
        }
        for (a, arc) in self.arcs.iter().enumerate() {
            if arc.from >= self.node_count || arc.to >= self.node_count {
                return Err(Error::Infeasible(format!("arc {a} references a missing node")));
            }
            if arc.from == arc.to {
                return Err(Error::Infeasible(format!("arc {a} is a self-loop")));
            }
            if arc.capacity < 0 {
                return Err(Error::Infeasible(format!("arc {a} has negative capacity")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSolution {
    pub flows: Vec<i64>,
    pub total_cost: i64,
    /// Node potentials certifying optimality (reduced costs
    /// `cost + π(from) − π(to)` are ≥ 0 on arcs below capacity and ≤ 0 on
    /// arcs carrying flow).
    pub potentials: Vec<i64>,
}

impl FlowSolution {
    /// Checks capacity bounds, conservation and complementary slackness.
    pub fn verify(&self, net: &FlowNetwork) -> Result<()> {
        if self.flows.len() != net.arcs.len() {
            return Err(Error::MalformedSolution("one flow per arc expected".into()));
        }
        let mut balance = net.supplies.clone();
        let mut cost = 0i64;
        for (arc, &f) in net.arcs.iter().zip(&self.flows) {
            if f < 0 || f > arc.capacity {
                return Err(Error::MalformedSolution(format!(
                    "flow {f} outside [0, {}] on {}->{}",
                    arc.capacity, arc.from, arc.to
                )));
            }
            balance[arc.from] -= f;
            balance[arc.to] += f;
            cost += f * arc.cost;
            let reduced = arc.cost + self.potentials[arc.from] - self.potentials[arc.to];
            if (f < arc.capacity && reduced < 0) || (f > 0 && reduced > 0) {
                return Err(Error::MalformedSolution(format!(
                    "complementary slackness violated on {}->{} (reduced cost {reduced})",
                    arc.from, arc.to
                )));
            }
        }
        if let Some(v) = balance.iter().position(|&b| b != 0) {
            return Err(Error::MalformedSolution(format!(
                "conservation violated at node {v}"
            )));
        }
        if cost != self.total_cost {
            return Err(Error::MalformedSolution("total cost mismatch".into()));
        }
        Ok(())
    }
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i64>,
    adj: Vec<Vec<usize>>,
}

impl Residual {
    fn with_nodes(n: usize) -> Self {
        Self {
            head: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    /// Adds the arc and its reverse; returns the forward edge id. The reverse
    /// edge id is `id ^ 1`.
    fn link(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        let id = self.head.len();
        self.head.extend([to, from]);
        self.cap.extend([cap, 0]);
        self.cost.extend([cost, -cost]);
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }
}

const INF: i64 = i64::MAX / 4;

/// Minimum-cost flow meeting every supply exactly.
pub fn solve_mcf(net: &FlowNetwork) -> Result<FlowSolution> {
    net.validate()?;
    let n = net.node_count;
    let source = n;
    let sink = n + 1;
    let mut g = Residual::with_nodes(n + 2);
    let arc_ids: Vec<usize> = net
        .arcs
        .iter()
        .map(|a| g.link(a.from, a.to, a.capacity, a.cost))
        .collect();
    let mut required = 0i64;
    for (v, &s) in net.supplies.iter().enumerate() {
        if s > 0 {
            g.link(source, v, s, 0);
            required += s;
        } else if s < 0 {
            g.link(v, sink, -s, 0);
        }
    }

    let total = n + 2;
    // Bellman–Ford from the super source for the initial potentials.
    let mut pot = vec![INF; total];
    pot[source] = 0;
    for _ in 0..total {
        let mut changed = false;
        for u in 0..total {
            if pot[u] == INF {
                continue;
            }
            for &e in &g.adj[u] {
                if g.cap[e] > 0 && pot[u] + g.cost[e] < pot[g.head[e]] {
                    pot[g.head[e]] = pot[u] + g.cost[e];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    for p in pot.iter_mut() {
        if *p == INF {
            *p = 0;
        }
    }

    let mut shipped = 0i64;
    let mut dist = vec![INF; total];
    let mut prev_edge = vec![usize::MAX; total];
    while shipped < required {
        dist.fill(INF);
        prev_edge.fill(usize::MAX);
        dist[source] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0i64, source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &g.adj[u] {
                if g.cap[e] == 0 {
                    continue;
                }
                let v = g.head[e];
                let nd = d + g.cost[e] + pot[u] - pot[v];
                if nd < dist[v] {
                    dist[v] = nd;
                    prev_edge[v] = e;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        if dist[sink] == INF {
            return Err(Error::Infeasible(format!(
                "only {shipped} of {required} supply units can be routed"
            )));
        }
        let reach = dist[sink];
        for v in 0..total {
            pot[v] += dist[v].min(reach);
        }
        let mut bottleneck = required - shipped;
        let mut v = sink;
        while v != source {
            let e = prev_edge[v];
            bottleneck = bottleneck.min(g.cap[e]);
            v = g.head[e ^ 1];
        }
        let mut v = sink;
        while v != source {
            let e = prev_edge[v];
            g.cap[e] -= bottleneck;
            g.cap[e ^ 1] += bottleneck;
            v = g.head[e ^ 1];
        }
        shipped += bottleneck;
    }

    let flows: Vec<i64> = arc_ids.iter().map(|&e| g.cap[e ^ 1]).collect();
    let total_cost = flows
        .iter()
        .zip(&net.arcs)
        .map(|(f, a)| f * a.cost)
        .sum();
    Ok(FlowSolution {
        flows,
        total_cost,
        potentials: pot[..n].to_vec(),
    })
}

/// Integer arc costs from real squared distances, row-major `d_x × K`.
pub fn quantize_costs(costs: &[f64]) -> Vec<i64> {
    costs.iter().map(|c| (c * COST_SCALE).round() as i64).collect()
}

fn check_assignment_feasible(d_x: usize, k: usize, xi: usize, zeta: usize) -> Result<()> {
    if k == 0 || xi > zeta || xi * k > d_x || zeta * k < d_x {
        return Err(Error::InfeasibleConstraints { k, xi, zeta, d_x });
    }
    Ok(())
}

/// The constrained assignment network.
///
/// Nodes `0..d_x` are points (supply +1), `d_x..d_x+K` are clusters (supply
/// −ξ) and node `d_x+K` is the final sink (supply `−d_x + K·ξ`). Arc `i·K + k`
/// goes from point `i` to cluster `k` with capacity 1 and the quantized cost;
/// arcs `d_x·K + k` go from cluster `k` to the sink with capacity `ζ − ξ` and
/// cost 0.
pub fn build_assignment_network(
    costs: &[f64],
    d_x: usize,
    k: usize,
    xi: usize,
    zeta: usize,
) -> Result<FlowNetwork> {
    if costs.len() != d_x * k {
        return Err(Error::DimensionMismatch {
            expected: d_x * k,
            got: costs.len(),
            context: "assignment costs (d_x * K)",
        });
    }
    check_assignment_feasible(d_x, k, xi, zeta)?;
    let q = quantize_costs(costs);
    let sink = d_x + k;
    let mut supplies = vec![1i64; d_x];
    supplies.extend(std::iter::repeat_n(-(xi as i64), k));
    supplies.push(-(d_x as i64) + (k * xi) as i64);
    let mut arcs = Vec::with_capacity(d_x * k + k);
    for i in 0..d_x {
        for c in 0..k {
            arcs.push(Arc {
                from: i,
                to: d_x + c,
                capacity: 1,
                cost: q[i * k + c],
            });
        }
    }
    for c in 0..k {
        arcs.push(Arc {
            from: d_x + c,
            to: sink,
            capacity: (zeta - xi) as i64,
            cost: 0,
        });
    }
    FlowNetwork::new(d_x + k + 1, supplies, arcs)
}

/// Cluster index per point, read from the point→cluster arcs.
pub fn extract_assignment(
    net: &FlowNetwork,
    sol: &FlowSolution,
    d_x: usize,
    k: usize,
) -> Result<Vec<usize>> {
    let mut labels = vec![usize::MAX; d_x];
    let mut shipped = vec![0i64; d_x];
    for (arc, &f) in net.arcs.iter().zip(&sol.flows) {
        if arc.from < d_x && arc.to >= d_x && arc.to < d_x + k && f > 0 {
            shipped[arc.from] += f;
            labels[arc.from] = arc.to - d_x;
        }
    }
    if let Some(i) = shipped.iter().position(|&s| s != 1) {
        return Err(Error::MalformedSolution(format!(
            "point {i} ships {} units instead of 1",
            shipped[i]
        )));
    }
    Ok(labels)
}

/// Optimal size-constrained assignment for integer costs (row-major
/// `d_x × K`). Returns the labels and the total cost.
pub fn solve_assignment(
    costs: &[i64],
    d_x: usize,
    k: usize,
    xi: usize,
    zeta: usize,
) -> Result<(Vec<usize>, i64)> {
    if costs.len() != d_x * k {
        return Err(Error::DimensionMismatch {
            expected: d_x * k,
            got: costs.len(),
            context: "assignment costs (d_x * K)",
        });
    }
    check_assignment_feasible(d_x, k, xi, zeta)?;
    let xi = xi as i64;
    let zeta = zeta as i64;
    let row = |i: usize| &costs[i * k..(i + 1) * k];

    // nearest-cluster pseudo-flow: optimal when capacities are ignored
    let mut labels: Vec<usize> = (0..d_x)
        .map(|i| {
            let r = row(i);
            (0..k).fold(0, |best, c| if r[c] < r[best] { c } else { best })
        })
        .collect();
    let mut counts = vec![0i64; k];
    for &l in &labels {
        counts[l] += 1;
    }
    let mut out: Vec<i64> = counts.iter().map(|&c| (c - xi).clamp(0, zeta - xi)).collect();
    let sink_demand = d_x as i64 - k as i64 * xi;
    let sink = k;
    let nodes = k + 1;

    let mut arc_cost = vec![INF; k * k];
    let mut arc_point = vec![usize::MAX; k * k];
    let mut dist = vec![INF; nodes];
    let mut prev = vec![usize::MAX; nodes];
    loop {
        let imbalance = |v: usize, counts: &[i64], out: &[i64]| -> i64 {
            if v == sink {
                out.iter().sum::<i64>() - sink_demand
            } else {
                counts[v] - xi - out[v]
            }
        };
        let Some(src) = (0..nodes).find(|&v| imbalance(v, &counts, &out) > 0) else {
            break;
        };

        arc_cost.fill(INF);
        for (i, &from) in labels.iter().enumerate() {
            let r = row(i);
            for to in 0..k {
                if to == from {
                    continue;
                }
                let c = r[to] - r[from];
                let slot = from * k + to;
                if c < arc_cost[slot] {
                    arc_cost[slot] = c;
                    arc_point[slot] = i;
                }
            }
        }

        // Bellman–Ford on clusters + sink; the residual graph has no negative cycles
        dist.fill(INF);
        prev.fill(usize::MAX);
        dist[src] = 0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u] == INF {
                    continue;
                }
                let du = dist[u];
                if u == sink {
                    for v in 0..k {
                        if out[v] > 0 && du < dist[v] {
                            dist[v] = du;
                            prev[v] = sink;
                            changed = true;
                        }
                    }
                } else {
                    for v in 0..k {
                        let c = arc_cost[u * k + v];
                        if c != INF && du + c < dist[v] {
                            dist[v] = du + c;
                            prev[v] = u;
                            changed = true;
                        }
                    }
                    if out[u] < zeta - xi && du < dist[sink] {
                        dist[sink] = du;
                        prev[sink] = u;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let target = (0..nodes)
            .filter(|&v| dist[v] != INF && imbalance(v, &counts, &out) < 0)
            .min_by_key(|&v| (dist[v], v))
            .ok_or_else(|| Error::Infeasible("no augmenting path to a deficit node".into()))?;

        let mut v = target;
        while v != src {
            let u = prev[v];
            if u == sink {
                out[v] -= 1;
            } else if v == sink {
                out[u] += 1;
            } else {
                let i = arc_point[u * k + v];
                labels[i] = v;
                counts[u] -= 1;
                counts[v] += 1;
            }
            v = u;
        }
    }

    let total = labels.iter().enumerate().map(|(i, &l)| row(i)[l]).sum();
    Ok((labels, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arc() {
        let net = FlowNetwork::new(
            2,
            vec![1, -1],
            vec![Arc {
                from: 0,
                to: 1,
                capacity: 1,
                cost: 5,
            }],
        )
        .unwrap();
        let sol = solve_mcf(&net).unwrap();
        assert_eq!(sol.flows, vec![1]);
        assert_eq!(sol.total_cost, 5);
        sol.verify(&net).unwrap();
    }

    fn two_by_two() -> FlowNetwork {
        let arc = |from, to, cost| Arc {
            from,
            to,
            capacity: 1,
            cost,
        };
        FlowNetwork::new(
            4,
            vec![1, 1, -1, -1],
            vec![arc(0, 2, 1), arc(0, 3, 3), arc(1, 2, 3), arc(1, 3, 1)],
        )
        .unwrap()
    }

    #[test]
    fn two_by_two_matching() {
        let net = two_by_two();
        let sol = solve_mcf(&net).unwrap();
        assert_eq!(sol.total_cost, 2);
        assert_eq!(sol.flows, vec![1, 0, 0, 1]);
        sol.verify(&net).unwrap();
        // read as an assignment of points {0,1} to clusters {2,3}
        assert_eq!(extract_assignment(&net, &sol, 2, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn infeasible_network() {
        let net = FlowNetwork::new(
            3,
            vec![2, 0, -2],
            vec![Arc {
                from: 0,
                to: 2,
                capacity: 1,
                cost: 0,
            }],
        )
        .unwrap();
        assert!(matches!(solve_mcf(&net), Err(Error::Infeasible(_))));
        assert!(FlowNetwork::new(2, vec![1, 0], vec![]).is_err());
    }

    #[test]
    fn assignment_network_shape() {
        let costs = vec![0.0; 8];
        let net = build_assignment_network(&costs, 4, 2, 1, 2).unwrap();
        assert_eq!(net.node_count, 7);
        assert_eq!(net.arcs.len(), 10);
        assert_eq!(*net.supplies.last().unwrap(), -2);
        assert_eq!(net.supplies.iter().sum::<i64>(), 0);

        let net = build_assignment_network(&[0.0; 9], 3, 3, 1, 1).unwrap();
        assert!(net.arcs[9..].iter().all(|a| a.capacity == 0));
        let sol = solve_mcf(&net).unwrap();
        let labels = extract_assignment(&net, &sol, 3, 3).unwrap();
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn infeasible_constraints() {
        assert!(matches!(
            build_assignment_network(&[0.0; 8], 4, 2, 1, 1),
            Err(Error::InfeasibleConstraints { .. })
        ));
        assert!(matches!(
            solve_assignment(&[0; 8], 4, 2, 3, 3),
            Err(Error::InfeasibleConstraints { .. })
        ));
    }

    #[test]
    fn malformed_solution_detected() {
        let net = build_assignment_network(&[0.0, 1.0, 1.0, 0.0], 2, 2, 1, 1).unwrap();
        let sol = FlowSolution {
            flows: vec![0; net.arcs.len()],
            total_cost: 0,
            potentials: vec![0; net.node_count],
        };
        assert!(extract_assignment(&net, &sol, 2, 2).is_err());
        assert!(sol.verify(&net).is_err());
    }

    #[test]
    fn condensed_solver_forces_split() {
        // four points prefer cluster 0 but capacity is 2
        let costs = [0, 10, 0, 10, 0, 3, 0, 7];
        let (labels, total) = solve_assignment(&costs, 4, 2, 1, 2).unwrap();
        assert_eq!(total, 10);
        assert_eq!(labels, vec![0, 0, 1, 1]);
    }
}

//! Integer minimum-cost flow.
//!
//! [`solve_min_cost_flow`] runs successive shortest augmenting paths with node
//! potentials, so every shortest-path search is a Dijkstra over non-negative
//! reduced costs. [`brute_force_min_cost`] enumerates integer flows and exists
//! to cross-check the solver on tiny instances.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

pub type NodeId = usize;

/// Largest product of `(capacity + 1)` the brute-force oracle accepts.
pub const ORACLE_GUARD: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("arc {arc}: node {node} out of range (node_count = {node_count})")]
    InvalidNode {
        arc: usize,
        node: NodeId,
        node_count: usize,
    },
    #[error("arc {arc}: self-loop on node {node}")]
    SelfLoop { arc: usize, node: NodeId },
    #[error("arc {arc}: negative capacity {capacity}")]
    NegativeCapacity { arc: usize, capacity: i64 },
    #[error("arc {arc}: negative cost {cost}")]
    NegativeCost { arc: usize, cost: i64 },
    #[error("source or sink out of range (node_count = {node_count})")]
    InvalidTerminal { node_count: usize },
    #[error("source and sink must differ")]
    SourceIsSink,
    #[error("negative supply {0}")]
    NegativeSupply(i64),
    #[error("instance too large for oracle: capacity product exceeds {ORACLE_GUARD}")]
    OracleTooLarge,
}

/// A directed arc. `label` is an opaque tag for the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
    pub capacity: i64,
    pub cost: i64,
    pub label: u64,
}

impl Arc {
    pub fn new(tail: NodeId, head: NodeId, capacity: i64, cost: i64) -> Self {
        Arc {
            tail,
            head,
            capacity,
            cost,
            label: 0,
        }
    }

    pub fn labeled(mut self, label: u64) -> Self {
        self.label = label;
        self
    }
}

/// A validated single-commodity flow network: `supply` units leave `source`
/// and must arrive at `sink`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork {
    node_count: usize,
    arcs: Vec<Arc>,
    source: NodeId,
    sink: NodeId,
    supply: i64,
}

impl FlowNetwork {
    pub fn new(
        node_count: usize,
        arcs: Vec<Arc>,
        source: NodeId,
        sink: NodeId,
        supply: i64,
    ) -> Result<Self, NetworkError> {
        if source >= node_count || sink >= node_count {
            return Err(NetworkError::InvalidTerminal { node_count });
        }
        if source == sink {
            return Err(NetworkError::SourceIsSink);
        }
        if supply < 0 {
            return Err(NetworkError::NegativeSupply(supply));
        }
        for (i, a) in arcs.iter().enumerate() {
            for node in [a.tail, a.head] {
                if node >= node_count {
                    return Err(NetworkError::InvalidNode {
                        arc: i,
                        node,
                        node_count,
                    });
                }
            }
            if a.tail == a.head {
                return Err(NetworkError::SelfLoop { arc: i, node: a.tail });
            }
            if a.capacity < 0 {
                return Err(NetworkError::NegativeCapacity {
                    arc: i,
                    capacity: a.capacity,
                });
            }
            if a.cost < 0 {
                return Err(NetworkError::NegativeCost { arc: i, cost: a.cost });
            }
        }
        Ok(FlowNetwork {
            node_count,
            arcs,
            source,
            sink,
            supply,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn supply(&self) -> i64 {
        self.supply
    }

    /// Same arcs and terminals, different supply.
    pub fn with_supply(&self, supply: i64) -> Result<Self, NetworkError> {
        FlowNetwork::new(
            self.node_count,
            self.arcs.clone(),
            self.source,
            self.sink,
            supply,
        )
    }

    /// Checks capacity bounds and conservation of `flow` (one entry per arc),
    /// independently of any solver.
    pub fn check_flow(&self, flow: &[i64]) -> Result<(), String> {
        if flow.len() != self.arcs.len() {
            return Err(format!(
                "flow has {} entries for {} arcs",
                flow.len(),
                self.arcs.len()
            ));
        }
        let mut excess = vec![0i64; self.node_count];
        for (i, (a, &f)) in self.arcs.iter().zip(flow).enumerate() {
            if f < 0 || f > a.capacity {
                return Err(format!("arc {i}: flow {f} outside [0, {}]", a.capacity));
            }
            excess[a.tail] -= f;
            excess[a.head] += f;
        }
        for (v, &e) in excess.iter().enumerate() {
            let want = if v == self.source {
                -self.supply
            } else if v == self.sink {
                self.supply
            } else {
                0
            };
            if e != want {
                return Err(format!("node {v}: net inflow {e}, expected {want}"));
            }
        }
        Ok(())
    }

    pub fn flow_cost(&self, flow: &[i64]) -> i64 {
        self.arcs.iter().zip(flow).map(|(a, &f)| a.cost * f).sum()
    }

    /// DIMACS minimum-cost-flow text (1-based node ids).
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "c repmatch flow network");
        let _ = writeln!(out, "p min {} {}", self.node_count, self.arcs.len());
        let _ = writeln!(out, "n {} {}", self.source + 1, self.supply);
        let _ = writeln!(out, "n {} {}", self.sink + 1, -self.supply);
        for a in &self.arcs {
            let _ = writeln!(
                out,
                "a {} {} 0 {} {}",
                a.tail + 1,
                a.head + 1,
                a.capacity,
                a.cost
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSolution {
    /// Flow per arc, in network arc order. All zero when infeasible.
    pub flow: Vec<i64>,
    pub total_cost: i64,
    pub feasible: bool,
    /// Largest flow value the network can carry, capped at the supply.
    pub max_flow: i64,
    /// Nodes reachable from the source in the residual graph of a maximum
    /// flow. Describes a minimum cut when the network is infeasible.
    pub source_side: Vec<bool>,
}

impl FlowSolution {
    fn infeasible(net: &FlowNetwork, max_flow: i64, source_side: Vec<bool>) -> Self {
        FlowSolution {
            flow: vec![0; net.arcs.len()],
            total_cost: 0,
            feasible: false,
            max_flow,
            source_side,
        }
    }

    /// Arcs crossing the minimum cut from the source side.
    pub fn cut_arcs(&self, net: &FlowNetwork) -> Vec<usize> {
        net.arcs
            .iter()
            .enumerate()
            .filter(|(_, a)| self.source_side[a.tail] && !self.source_side[a.head])
            .map(|(i, _)| i)
            .collect()
    }
}

const INF: i64 = i64::MAX / 4;

/// Residual graph in compressed adjacency form. Arc `i` owns residual edges
/// `2i` (forward) and `2i + 1` (backward).
struct Residual {
    head: Vec<NodeId>,
    cap: Vec<i64>,
    cost: Vec<i64>,
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
}

impl Residual {
    fn new(net: &FlowNetwork) -> Self {
        let m = net.arcs.len();
        let n = net.node_count;
        let mut head = Vec::with_capacity(2 * m);
        let mut cap = Vec::with_capacity(2 * m);
        let mut cost = Vec::with_capacity(2 * m);
        let mut degree = vec![0usize; n + 1];
        for a in &net.arcs {
            head.push(a.head);
            cap.push(a.capacity);
            cost.push(a.cost);
            head.push(a.tail);
            cap.push(0);
            cost.push(-a.cost);
            degree[a.tail + 1] += 1;
            degree[a.head + 1] += 1;
        }
        for v in 0..n {
            degree[v + 1] += degree[v];
        }
        let offsets = degree.clone();
        let mut fill = degree;
        let mut adjacency = vec![0usize; 2 * m];
        for (i, a) in net.arcs.iter().enumerate() {
            adjacency[fill[a.tail]] = 2 * i;
            fill[a.tail] += 1;
            adjacency[fill[a.head]] = 2 * i + 1;
            fill[a.head] += 1;
        }
        Residual {
            head,
            cap,
            cost,
            offsets,
            adjacency,
        }
    }

    fn edges(&self, v: NodeId) -> &[usize] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    fn reachable_from(&self, start: NodeId, n: usize) -> Vec<bool> {
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &e in self.edges(v) {
                let w = self.head[e];
                if self.cap[e] > 0 && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

/// Minimum-cost flow by successive shortest paths.
///
/// Each round runs Dijkstra on reduced costs `cost + pot[tail] - pot[head]`
/// and stops as soon as the sink is settled; potentials of unsettled nodes
/// advance by the sink distance, which keeps every residual reduced cost
/// non-negative. Heap ties resolve to the smaller node id and relaxations
/// follow arc order, so results are deterministic.
pub fn solve_min_cost_flow(net: &FlowNetwork) -> FlowSolution {
    let n = net.node_count;
    let (s, t) = (net.source, net.sink);
    let mut res = Residual::new(net);
    let mut potential = vec![0i64; n];
    let mut dist = vec![INF; n];
    let mut settled = vec![false; n];
    let mut parent = vec![usize::MAX; n];
    let mut touched: Vec<NodeId> = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    let mut sent = 0i64;

    while sent < net.supply {
        for &v in &touched {
            dist[v] = INF;
            settled[v] = false;
            parent[v] = usize::MAX;
        }
        touched.clear();
        heap.clear();
        dist[s] = 0;
        touched.push(s);
        heap.push(Reverse((0i64, s)));
        let mut reached = false;
        while let Some(Reverse((d, v))) = heap.pop() {
            if settled[v] || d > dist[v] {
                continue;
            }
            settled[v] = true;
            if v == t {
                reached = true;
                break;
            }
            let pv = potential[v];
            for &e in res.edges(v) {
                if res.cap[e] == 0 {
                    continue;
                }
                let w = res.head[e];
                if settled[w] {
                    continue;
                }
                let nd = d + res.cost[e] + pv - potential[w];
                debug_assert!(nd >= d, "negative reduced cost");
                if nd < dist[w] {
                    if dist[w] == INF {
                        touched.push(w);
                    }
                    dist[w] = nd;
                    parent[w] = e;
                    heap.push(Reverse((nd, w)));
                }
            }
        }
        if !reached {
            let side = res.reachable_from(s, n);
            return FlowSolution::infeasible(net, sent, side);
        }
        let dt = dist[t];
        // Untouched nodes keep dist = INF, so min() also covers them.
        for v in 0..n {
            potential[v] += if settled[v] { dist[v] } else { dt };
        }

        let mut push = net.supply - sent;
        let mut v = t;
        while v != s {
            let e = parent[v];
            push = push.min(res.cap[e]);
            v = res.head[e ^ 1];
        }
        let mut v = t;
        while v != s {
            let e = parent[v];
            res.cap[e] -= push;
            res.cap[e ^ 1] += push;
            v = res.head[e ^ 1];
        }
        sent += push;
    }

    let flow: Vec<i64> = (0..net.arcs.len()).map(|i| res.cap[2 * i + 1]).collect();
    let total_cost = net.flow_cost(&flow);
    let source_side = res.reachable_from(s, n);
    FlowSolution {
        flow,
        total_cost,
        feasible: true,
        max_flow: sent,
        source_side,
    }
}

/// Exhaustive minimum-cost flow over every integer arc assignment.
///
/// Assignments are explored in lexicographic order; a node's balance is
/// checked as soon as its last incident arc is fixed. The first assignment
/// attaining the minimum cost is returned.
pub fn brute_force_min_cost(net: &FlowNetwork) -> Result<FlowSolution, NetworkError> {
    let mut product: u128 = 1;
    for a in &net.arcs {
        product = product.saturating_mul(a.capacity as u128 + 1);
        if product > ORACLE_GUARD {
            return Err(NetworkError::OracleTooLarge);
        }
    }
    let n = net.node_count;
    let mut required = vec![0i64; n];
    required[net.source] = -net.supply;
    required[net.sink] = net.supply;
    // closes[i] lists nodes whose last incident arc is i.
    let mut last = vec![None; n];
    for (i, a) in net.arcs.iter().enumerate() {
        last[a.tail] = Some(i);
        last[a.head] = Some(i);
    }
    let mut closes = vec![Vec::new(); net.arcs.len()];
    for (v, l) in last.iter().enumerate() {
        match l {
            Some(i) => closes[*i].push(v),
            None if required[v] != 0 => {
                let side = vec![false; n];
                return Ok(FlowSolution::infeasible(net, 0, side));
            }
            None => {}
        }
    }

    struct Search<'a> {
        net: &'a FlowNetwork,
        closes: Vec<Vec<NodeId>>,
        required: Vec<i64>,
        balance: Vec<i64>,
        current: Vec<i64>,
        best: Option<(i64, Vec<i64>)>,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, cost: i64) {
            if i == self.net.arcs.len() {
                if self.best.as_ref().is_none_or(|(c, _)| cost < *c) {
                    self.best = Some((cost, self.current.clone()));
                }
                return;
            }
            let a = self.net.arcs[i];
            for f in 0..=a.capacity {
                self.current[i] = f;
                self.balance[a.tail] -= f;
                self.balance[a.head] += f;
                if self.closes[i].iter().all(|&v| self.balance[v] == self.required[v]) {
                    self.go(i + 1, cost + f * a.cost);
                }
                self.balance[a.tail] += f;
                self.balance[a.head] -= f;
            }
            self.current[i] = 0;
        }
    }

    let mut search = Search {
        net,
        closes,
        required,
        balance: vec![0; n],
        current: vec![0; net.arcs.len()],
        best: None,
    };
    search.go(0, 0);
    Ok(match search.best {
        Some((total_cost, flow)) => FlowSolution {
            flow,
            total_cost,
            feasible: true,
            max_flow: net.supply,
            source_side: vec![false; n],
        },
        None => FlowSolution::infeasible(net, 0, vec![false; n]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parallel_arcs(supply: i64) -> FlowNetwork {
        FlowNetwork::new(
            3,
            vec![Arc::new(0, 1, 2, 0), Arc::new(1, 2, 1, 5), Arc::new(1, 2, 1, 1)],
            0,
            2,
            supply,
        )
        .unwrap()
    }

    #[test]
    fn single_arc_network_builds() {
        let net = FlowNetwork::new(2, vec![Arc::new(0, 1, 3, 0)], 0, 1, 3).unwrap();
        assert_eq!(net.arc_count(), 1);
        let sol = solve_min_cost_flow(&net);
        assert!(sol.feasible);
        assert_eq!(sol.flow, vec![3]);
    }

    #[test]
    fn construction_errors_name_the_arc() {
        let err = FlowNetwork::new(2, vec![Arc::new(0, 0, 1, 0)], 0, 1, 1).unwrap_err();
        assert_eq!(err, NetworkError::SelfLoop { arc: 0, node: 0 });
        assert!(err.to_string().contains("self-loop"));
        let err = FlowNetwork::new(2, vec![Arc::new(0, 1, 1, 0), Arc::new(1, 5, 1, 0)], 0, 1, 1)
            .unwrap_err();
        assert!(matches!(err, NetworkError::InvalidNode { arc: 1, node: 5, .. }));
        let err = FlowNetwork::new(2, vec![Arc::new(0, 1, -1, 0)], 0, 1, 1).unwrap_err();
        assert!(matches!(err, NetworkError::NegativeCapacity { arc: 0, .. }));
        let err = FlowNetwork::new(2, vec![Arc::new(0, 1, 1, -3)], 0, 1, 1).unwrap_err();
        assert!(matches!(err, NetworkError::NegativeCost { arc: 0, .. }));
        assert_eq!(
            FlowNetwork::new(2, vec![], 1, 1, 0).unwrap_err(),
            NetworkError::SourceIsSink
        );
    }

    #[test]
    fn picks_cheaper_parallel_arc() {
        let net = FlowNetwork::new(
            3,
            vec![Arc::new(0, 1, 1, 0), Arc::new(1, 2, 1, 1), Arc::new(1, 2, 1, 5)],
            0,
            2,
            1,
        )
        .unwrap();
        let sol = solve_min_cost_flow(&net);
        assert!(sol.feasible);
        assert_eq!(sol.total_cost, 1);
        assert_eq!(sol.flow, vec![1, 1, 0]);
        assert_eq!(brute_force_min_cost(&net).unwrap().total_cost, 1);
    }

    #[test]
    fn capacity_bound_is_infeasible() {
        let net = FlowNetwork::new(2, vec![Arc::new(0, 1, 1, 0)], 0, 1, 2).unwrap();
        let sol = solve_min_cost_flow(&net);
        assert!(!sol.feasible);
        assert_eq!(sol.flow, vec![0]);
        assert_eq!(sol.max_flow, 1);
        assert_eq!(sol.cut_arcs(&net), vec![0]);
        assert!(!brute_force_min_cost(&net).unwrap().feasible);
    }

    #[test]
    fn zero_supply_is_trivially_feasible() {
        let sol = solve_min_cost_flow(&parallel_arcs(0));
        assert!(sol.feasible);
        assert_eq!(sol.total_cost, 0);
    }

    #[test]
    fn uses_both_parallel_arcs_when_needed() {
        let net = parallel_arcs(2);
        let sol = solve_min_cost_flow(&net);
        assert_eq!(sol.total_cost, 6);
        net.check_flow(&sol.flow).unwrap();
    }

    #[test]
    fn reroutes_along_backward_arc() {
        // The greedy first path s-a-b-t must be partly undone for the optimum.
        let arcs = vec![
            Arc::new(0, 1, 1, 1),
            Arc::new(0, 2, 1, 4),
            Arc::new(1, 2, 1, 1),
            Arc::new(1, 3, 1, 5),
            Arc::new(2, 3, 1, 1),
        ];
        let net = FlowNetwork::new(4, arcs, 0, 3, 2).unwrap();
        let sol = solve_min_cost_flow(&net);
        assert_eq!(sol.total_cost, brute_force_min_cost(&net).unwrap().total_cost);
        assert_eq!(sol.total_cost, 11);
    }

    #[test]
    fn oracle_guard() {
        let arcs = (0..8).map(|_| Arc::new(0, 1, 9, 1)).collect();
        let net = FlowNetwork::new(2, arcs, 0, 1, 1).unwrap();
        assert_eq!(brute_force_min_cost(&net), Err(NetworkError::OracleTooLarge));
    }

    #[test]
    fn dimacs_dump() {
        let text = parallel_arcs(2).to_dimacs();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "p min 3 3");
        assert_eq!(lines[2], "n 1 2");
        assert_eq!(lines[3], "n 3 -2");
        assert_eq!(lines[4], "a 1 2 0 2 0");
        assert_eq!(lines.iter().filter(|l| l.starts_with("a ")).count(), 3);
    }
}

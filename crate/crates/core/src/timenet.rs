//! Full and partially time-expanded networks, underestimated arc costs and
//! the pool of correct-time paths used by the path-arc formulation.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::instance::{City, Cost, Instance, Time};

pub type NodeId = usize;
pub type ArcId = usize;
pub type PathId = usize;

pub const DEFAULT_NODE_CAP: usize = 2_000_000;
pub const DEFAULT_POOL_CAP: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TimedNode {
    pub city: City,
    pub time: Time,
}

impl TimedNode {
    pub fn new(city: City, time: Time) -> Self {
        TimedNode { city, time }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ArcKind {
    Travel,
    Waiting,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedArc {
    pub tail: NodeId,
    pub head: NodeId,
    pub from: TimedNode,
    pub to: TimedNode,
    pub kind: ArcKind,
    pub under_cost: Cost,
    pub true_cost: Cost,
    /// True arrival `max(e_j, t + tau_ij(t))`; equals `to.time` for waiting arcs.
    pub arrival: Time,
    pub correct_time: bool,
}

impl TimedArc {
    pub fn is_travel(&self) -> bool {
        self.kind == ArcKind::Travel
    }

    pub fn is_waiting(&self) -> bool {
        self.kind == ArcKind::Waiting
    }

    pub fn is_too_short(&self) -> bool {
        self.is_travel() && !self.correct_time
    }
}

/// How travel arcs are priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Pricing {
    /// `under_cost = c̲`, waiting arcs at 0.
    Underestimate,
    /// `under_cost = true_cost` on every arc.
    Exact,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("full network would have {nodes} timed nodes, cap is {cap}")]
    CapExceeded { nodes: usize, cap: usize },
    #[error("arc {0} is not a too-short travel arc")]
    NotTooShort(ArcId),
    #[error("timed node ({city},{time}) lies outside [e_i, l_0]")]
    NodeOutOfRange { city: City, time: Time },
    #[error("path pool is full ({cap} paths)")]
    PoolOverflow { cap: usize },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("tour must start at the depot source node: {0}")]
    BadTour(String),
    #[error("network property violated: {0}")]
    PropertyViolation(String),
}

/// `min { c_ij(h) : t <= h, h + tau_ij(h) <= l_j }`, or `None` when no
/// departure at or after `t` reaches `j` in time. Waiting terms vanish because
/// the departure can always be taken right at `h`.
pub fn underestimate_cost(inst: &Instance, i: City, j: City, t: Time) -> Option<Cost> {
    let arc = inst.arc_index(i, j)?;
    let close = inst.latest(j);
    (t.max(0)..=inst.horizon())
        .filter(|&h| h + inst.tau_at(arc, h) <= close)
        .map(|h| inst.cost_at(arc, h))
        .min()
}

/// Dense table of [`underestimate_cost`] for one instance arc. Feasible
/// departures form a prefix of the horizon by FIFO, so a suffix minimum over
/// that prefix suffices.
fn underestimate_table(inst: &Instance, arc: usize) -> Vec<Option<Cost>> {
    let to = inst.arcs()[arc].to;
    let close = inst.latest(to);
    let horizon = inst.horizon();
    let mut out = vec![None; horizon as usize + 1];
    let mut best: Option<Cost> = None;
    for h in (0..=horizon).rev() {
        if h + inst.tau_at(arc, h) <= close {
            let c = inst.cost_at(arc, h);
            best = Some(best.map_or(c, |b: Cost| b.min(c)));
        }
        out[h as usize] = best;
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MutationReport {
    pub nodes_added: Vec<TimedNode>,
    pub arcs_redirected: usize,
    pub paths_added: usize,
}

impl MutationReport {
    pub fn merge(&mut self, other: MutationReport) {
        self.nodes_added.extend(other.nodes_added);
        self.arcs_redirected += other.arcs_redirected;
        self.paths_added += other.paths_added;
    }

    pub fn is_empty(&self) -> bool {
        self.nodes_added.is_empty() && self.arcs_redirected == 0 && self.paths_added == 0
    }
}

/// A time-expanded network over a subset of time points. Arc ids are stable:
/// arcs are never removed, and only too-short travel arcs ever change head.
#[derive(Debug, Clone)]
pub struct PartialNetwork {
    inst: Instance,
    pricing: Pricing,
    under: Vec<Vec<Option<Cost>>>,
    nodes: Vec<TimedNode>,
    times: Vec<BTreeMap<Time, NodeId>>,
    arcs: Vec<TimedArc>,
    out_arcs: Vec<Vec<ArcId>>,
    in_arcs: Vec<Vec<ArcId>>,
    wait_out: Vec<Option<ArcId>>,
    inbound_travel: Vec<Vec<ArcId>>,
    self_check: bool,
}

impl PartialNetwork {
    fn empty(inst: &Instance, pricing: Pricing) -> Self {
        let under = match pricing {
            Pricing::Underestimate => (0..inst.arcs().len())
                .map(|a| underestimate_table(inst, a))
                .collect(),
            Pricing::Exact => Vec::new(),
        };
        PartialNetwork {
            inst: inst.clone(),
            pricing,
            under,
            nodes: Vec::new(),
            times: vec![BTreeMap::new(); inst.n()],
            arcs: Vec::new(),
            out_arcs: Vec::new(),
            in_arcs: Vec::new(),
            wait_out: Vec::new(),
            inbound_travel: vec![Vec::new(); inst.n()],
            self_check: false,
        }
    }

    /// Builds the network on the given time points (plus the window bounds)
    /// with every arc in place at once.
    fn with_times(inst: &Instance, pricing: Pricing, times: Vec<Vec<Time>>) -> Self {
        let mut net = Self::empty(inst, pricing);
        for (city, mut ts) in times.into_iter().enumerate() {
            ts.push(inst.earliest(city));
            ts.push(inst.latest(city));
            ts.sort_unstable();
            ts.dedup();
            for t in ts {
                net.push_node(TimedNode::new(city, t));
            }
        }
        for id in 0..net.nodes.len() {
            net.connect_waiting(id);
            net.connect_outbound(id);
        }
        net
    }

    /// Nodes `(i, e_i)` and `(i, l_i)` for every city.
    pub fn initial(inst: &Instance) -> Self {
        Self::with_times(inst, Pricing::Underestimate, vec![Vec::new(); inst.n()])
    }

    /// Initial network extended with extra time points, e.g. to seed tests.
    pub fn from_time_points(inst: &Instance, points: &[TimedNode]) -> Result<Self, NetworkError> {
        let mut times = vec![Vec::new(); inst.n()];
        for p in points {
            Self::check_range(inst, p.city, p.time)?;
            times[p.city].push(p.time);
        }
        Ok(Self::with_times(inst, Pricing::Underestimate, times))
    }

    pub fn full(inst: &Instance) -> Result<Self, NetworkError> {
        Self::full_with_cap(inst, DEFAULT_NODE_CAP)
    }

    pub fn full_with_cap(inst: &Instance, cap: usize) -> Result<Self, NetworkError> {
        let horizon = inst.horizon();
        let nodes: usize = (0..inst.n())
            .map(|i| (horizon - inst.earliest(i) + 1) as usize)
            .sum();
        if nodes > cap {
            return Err(NetworkError::CapExceeded { nodes, cap });
        }
        let times = (0..inst.n())
            .map(|i| (inst.earliest(i)..=horizon).collect())
            .collect();
        Ok(Self::with_times(inst, Pricing::Exact, times))
    }

    /// Checks P1-P5 after every mutation when enabled.
    pub fn set_self_check(&mut self, on: bool) {
        self.self_check = on;
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn pricing(&self) -> Pricing {
        self.pricing
    }

    pub fn nodes(&self) -> &[TimedNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> TimedNode {
        self.nodes[id]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn arcs(&self) -> &[TimedArc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &TimedArc {
        &self.arcs[id]
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn node_id(&self, city: City, time: Time) -> Option<NodeId> {
        self.times.get(city)?.get(&time).copied()
    }

    pub fn source(&self) -> NodeId {
        self.node_id(0, self.inst.depot_open())
            .expect("depot source node exists")
    }

    /// Node ids of `city` in increasing time order.
    pub fn city_nodes(&self, city: City) -> impl Iterator<Item = NodeId> + '_ {
        self.times[city].values().copied()
    }

    pub fn out_arcs(&self, node: NodeId) -> &[ArcId] {
        &self.out_arcs[node]
    }

    pub fn in_arcs(&self, node: NodeId) -> &[ArcId] {
        &self.in_arcs[node]
    }

    pub fn waiting_out(&self, node: NodeId) -> Option<ArcId> {
        self.wait_out[node]
    }

    /// `(i, t+1)` is also a timed node.
    pub fn has_next_unit(&self, node: NodeId) -> bool {
        let v = self.nodes[node];
        self.node_id(v.city, v.time + 1).is_some()
    }

    /// Correct-time arcs entering `node`: correct travel arcs and the waiting
    /// arc. At the depot only the waiting arc counts, since returns end the tour.
    pub fn lambda_plus(&self, node: NodeId) -> impl Iterator<Item = ArcId> + '_ {
        let depot = self.nodes[node].city == 0;
        self.in_arcs[node].iter().copied().filter(move |&a| {
            let arc = &self.arcs[a];
            arc.is_waiting() || (!depot && arc.correct_time)
        })
    }

    pub fn too_short_arcs(&self) -> impl Iterator<Item = ArcId> + '_ {
        (0..self.arcs.len()).filter(|&a| self.arcs[a].is_too_short())
    }

    fn check_range(inst: &Instance, city: City, time: Time) -> Result<(), NetworkError> {
        if city >= inst.n() || time < inst.earliest(city) || time > inst.horizon() {
            return Err(NetworkError::NodeOutOfRange { city, time });
        }
        Ok(())
    }

    fn push_node(&mut self, v: TimedNode) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(v);
        self.times[v.city].insert(v.time, id);
        self.out_arcs.push(Vec::new());
        self.in_arcs.push(Vec::new());
        self.wait_out.push(None);
        id
    }

    fn push_arc(&mut self, arc: TimedArc) -> ArcId {
        let id = self.arcs.len();
        self.out_arcs[arc.tail].push(id);
        self.in_arcs[arc.head].push(id);
        if arc.is_waiting() {
            self.wait_out[arc.tail] = Some(id);
        } else {
            self.inbound_travel[arc.to.city].push(id);
        }
        self.arcs.push(arc);
        id
    }

    fn add_waiting_arc(&mut self, tail: NodeId, head: NodeId) {
        let from = self.nodes[tail];
        let to = self.nodes[head];
        debug_assert_eq!(to.time, from.time + 1);
        let true_cost = self
            .inst
            .waiting_cost(from.city, from.time)
            .expect("waiting arcs only where waiting is allowed");
        let under_cost = match self.pricing {
            Pricing::Underestimate => 0,
            Pricing::Exact => true_cost,
        };
        self.push_arc(TimedArc {
            tail,
            head,
            from,
            to,
            kind: ArcKind::Waiting,
            under_cost,
            true_cost,
            arrival: to.time,
            correct_time: true,
        });
    }

    /// Waiting arcs between `node` and its unit-time neighbours.
    fn connect_waiting(&mut self, node: NodeId) {
        let v = self.nodes[node];
        if !self.inst.waiting_allowed(v.city) {
            return;
        }
        if let Some(prev) = self.node_id(v.city, v.time - 1) {
            if self.wait_out[prev].is_none() {
                self.add_waiting_arc(prev, node);
            }
        }
        if let Some(next) = self.node_id(v.city, v.time + 1) {
            if self.wait_out[node].is_none() {
                self.add_waiting_arc(node, next);
            }
        }
    }

    /// Latest timed node of `city` not after `time`.
    fn floor_node(&self, city: City, time: Time) -> Option<NodeId> {
        self.times[city].range(..=time).next_back().map(|(_, &id)| id)
    }

    fn connect_outbound(&mut self, node: NodeId) {
        let from = self.nodes[node];
        let inst = &self.inst;
        let mut new_arcs = Vec::new();
        for j in inst.successors(from.city) {
            let idx = inst.arc_index(from.city, j).unwrap();
            let reach = from.time + inst.tau_at(idx, from.time);
            if reach > inst.latest(j) {
                continue;
            }
            let arrival = reach.max(inst.earliest(j));
            let head = self
                .floor_node(j, arrival)
                .expect("window opening node exists");
            let true_cost = inst.cost_at(idx, from.time);
            let under_cost = match self.pricing {
                Pricing::Exact => true_cost,
                Pricing::Underestimate => self.under[idx][from.time as usize]
                    .expect("a feasible departure exists at t itself"),
            };
            let to = self.nodes[head];
            new_arcs.push(TimedArc {
                tail: node,
                head,
                from,
                to,
                kind: ArcKind::Travel,
                under_cost,
                true_cost,
                arrival,
                correct_time: to.time == arrival,
            });
        }
        for a in new_arcs {
            self.push_arc(a);
        }
    }

    fn redirect(&mut self, arc: ArcId, head: NodeId) {
        let old = self.arcs[arc].head;
        self.in_arcs[old].retain(|&a| a != arc);
        self.in_arcs[head].push(arc);
        let to = self.nodes[head];
        let a = &mut self.arcs[arc];
        a.head = head;
        a.to = to;
        a.correct_time = to.time == a.arrival;
    }

    /// Adds `(city, time)` if absent and restores P3-P5 around it.
    pub fn insert_node(&mut self, city: City, time: Time) -> Result<MutationReport, NetworkError> {
        let mut report = MutationReport::default();
        if self.node_id(city, time).is_some() {
            return Ok(report);
        }
        Self::check_range(&self.inst, city, time)?;
        let id = self.push_node(TimedNode::new(city, time));
        report.nodes_added.push(self.nodes[id]);
        self.connect_waiting(id);
        self.connect_outbound(id);
        let inbound = self.inbound_travel[city].clone();
        for a in inbound {
            let arc = &self.arcs[a];
            if arc.to.time < time && time <= arc.arrival {
                self.redirect(a, id);
                report.arcs_redirected += 1;
            }
        }
        if self.self_check {
            self.check_properties()?;
        }
        Ok(report)
    }

    /// Adds the true arrival node of a too-short arc, plus a waiting
    /// opportunity right after the arc's tail.
    pub fn lengthen_arc(&mut self, arc: ArcId) -> Result<MutationReport, NetworkError> {
        let a = self.arcs.get(arc).ok_or(NetworkError::NotTooShort(arc))?;
        if !a.is_too_short() {
            return Err(NetworkError::NotTooShort(arc));
        }
        let (to_city, arrival, from) = (a.to.city, a.arrival, a.from);
        let mut report = self.insert_node(to_city, arrival)?;
        if self.inst.waiting_allowed(from.city) && from.time < self.inst.horizon() {
            report.merge(self.insert_node(from.city, from.time + 1)?);
        }
        Ok(report)
    }

    /// Asserts Properties 1-5 plus internal adjacency consistency.
    pub fn check_properties(&self) -> Result<(), NetworkError> {
        let fail = |msg: String| Err(NetworkError::PropertyViolation(msg));
        let inst = &self.inst;
        for i in 0..inst.n() {
            for t in [inst.earliest(i), inst.latest(i)] {
                if self.node_id(i, t).is_none() {
                    return fail(format!("P1: node ({i},{t}) missing"));
                }
            }
        }
        for (id, v) in self.nodes.iter().enumerate() {
            if v.time < inst.earliest(v.city) || v.time > inst.horizon() {
                return fail(format!("P2: node ({},{}) out of range", v.city, v.time));
            }
            if self.node_id(v.city, v.time) != Some(id) {
                return fail(format!("node index for ({},{}) is stale", v.city, v.time));
            }
        }
        for (id, arc) in self.arcs.iter().enumerate() {
            if self.nodes[arc.tail] != arc.from || self.nodes[arc.head] != arc.to {
                return fail(format!("arc {id} endpoints are stale"));
            }
            if !self.out_arcs[arc.tail].contains(&id) || !self.in_arcs[arc.head].contains(&id) {
                return fail(format!("arc {id} missing from adjacency"));
            }
            match arc.kind {
                ArcKind::Waiting => {
                    if arc.from.city != arc.to.city || arc.to.time != arc.from.time + 1 {
                        return fail(format!("waiting arc {id} is not a unit step"));
                    }
                    if !inst.waiting_allowed(arc.from.city) {
                        return fail(format!("waiting arc {id} at a no-wait city"));
                    }
                    let true_cost = inst.waiting_cost(arc.from.city, arc.from.time).unwrap();
                    let under = match self.pricing {
                        Pricing::Underestimate => 0,
                        Pricing::Exact => true_cost,
                    };
                    if arc.true_cost != true_cost || arc.under_cost != under {
                        return fail(format!("P5: waiting arc {id} has wrong costs"));
                    }
                }
                ArcKind::Travel => {
                    let (i, j, t) = (arc.from.city, arc.to.city, arc.from.time);
                    let Some(idx) = inst.arc_index(i, j) else {
                        return fail(format!("travel arc {id} uses a missing city arc"));
                    };
                    let expect = match self.pricing {
                        Pricing::Exact => Some(inst.cost_at(idx, t)),
                        Pricing::Underestimate => underestimate_cost(inst, i, j, t),
                    };
                    if Some(arc.under_cost) != expect || arc.true_cost != inst.cost_at(idx, t) {
                        return fail(format!("P5: travel arc {id} has wrong costs"));
                    }
                    if arc.correct_time != (arc.to.time == arc.arrival) {
                        return fail(format!("travel arc {id} has a stale correct_time flag"));
                    }
                }
            }
        }
        for (id, v) in self.nodes.iter().enumerate() {
            let waits: Vec<ArcId> = self.out_arcs[id]
                .iter()
                .copied()
                .filter(|&a| self.arcs[a].is_waiting())
                .collect();
            let next = self.node_id(v.city, v.time + 1);
            let expected = usize::from(next.is_some() && inst.waiting_allowed(v.city));
            if waits.len() != expected || self.wait_out[id] != waits.first().copied() {
                return fail(format!("P3: node ({},{}) has {} waiting arcs", v.city, v.time, waits.len()));
            }
            for j in 0..inst.n() {
                let Some(idx) = inst.arc_index(v.city, j) else {
                    continue;
                };
                let travel: Vec<&TimedArc> = self.out_arcs[id]
                    .iter()
                    .map(|&a| &self.arcs[a])
                    .filter(|a| a.is_travel() && a.to.city == j)
                    .collect();
                let reach = v.time + inst.tau_at(idx, v.time);
                if reach > inst.latest(j) {
                    if !travel.is_empty() {
                        return fail(format!("P4: arc from ({},{}) to city {j} arrives late", v.city, v.time));
                    }
                    continue;
                }
                if travel.len() != 1 {
                    return fail(format!(
                        "P4: node ({},{}) has {} travel arcs to city {j}",
                        v.city,
                        v.time,
                        travel.len()
                    ));
                }
                let head = travel[0].to.time;
                let arrival = reach.max(inst.earliest(j));
                if head > arrival || head < inst.earliest(j) {
                    return fail(format!("P4: arc ({},{})->({j},{head}) overshoots", v.city, v.time));
                }
                if head < arrival && self.times[j].range(head + 1..=arrival).next().is_some() {
                    return fail(format!(
                        "P4: arc ({},{})->({j},{head}) skips a node before {arrival}",
                        v.city, v.time
                    ));
                }
            }
        }
        Ok(())
    }

    /// Tab-separated text dump, one node or arc per line, in a stable order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut nodes: Vec<TimedNode> = self.nodes.clone();
        nodes.sort();
        for v in nodes {
            let _ = writeln!(out, "N\t{}\t{}", v.city, v.time);
        }
        let mut arcs: Vec<&TimedArc> = self.arcs.iter().collect();
        arcs.sort_by_key(|a| (a.from, a.to, a.kind == ArcKind::Waiting));
        for a in arcs {
            let kind = match a.kind {
                ArcKind::Travel => "T",
                ArcKind::Waiting => "W",
            };
            let _ = writeln!(
                out,
                "A\t{kind}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                a.from.city,
                a.from.time,
                a.to.city,
                a.to.time,
                a.under_cost,
                a.true_cost,
                u8::from(a.correct_time)
            );
        }
        out
    }
}

/// Depot-rooted path of correct-time arcs with its exact cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedPath {
    pub arcs: Vec<ArcId>,
    pub cost: Cost,
    /// Cities entered by the path's travel arcs.
    pub visited: u64,
    pub end: NodeId,
}

impl TimedPath {
    pub fn last_arc(&self) -> ArcId {
        *self.arcs.last().unwrap()
    }

    pub fn visits(&self, city: City) -> bool {
        self.visited & (1u64 << city) != 0
    }
}

#[derive(Debug, Clone)]
pub struct PathPool {
    paths: Vec<TimedPath>,
    index: HashMap<Vec<ArcId>, PathId>,
    cap: usize,
}

impl Default for PathPool {
    fn default() -> Self {
        Self::new(DEFAULT_POOL_CAP)
    }
}

impl PathPool {
    pub fn new(cap: usize) -> Self {
        PathPool {
            paths: Vec::new(),
            index: HashMap::new(),
            cap,
        }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[TimedPath] {
        &self.paths
    }

    pub fn get(&self, id: PathId) -> &TimedPath {
        &self.paths[id]
    }

    pub fn find(&self, arcs: &[ArcId]) -> Option<PathId> {
        self.index.get(arcs).copied()
    }

    /// Checks the arc list forms a valid path in `net`.
    pub fn make_path(net: &PartialNetwork, arcs: &[ArcId]) -> Result<TimedPath, NetworkError> {
        let bad = |m: &str| Err(NetworkError::InvalidPath(m.to_string()));
        if arcs.is_empty() {
            return bad("empty");
        }
        if net.arc(arcs[0]).tail != net.source() {
            return bad("does not start at the depot source");
        }
        let mut visited = 0u64;
        let mut cost = 0;
        for (k, &a) in arcs.iter().enumerate() {
            let arc = net.arc(a);
            if !arc.correct_time {
                return bad("uses a too-short arc");
            }
            if k > 0 && net.arc(arcs[k - 1]).head != arc.tail {
                return bad("arcs do not chain");
            }
            if arc.is_travel() {
                let bit = 1u64 << arc.to.city;
                if visited & bit != 0 {
                    return bad("visits a city twice");
                }
                if arc.to.city == 0 && k + 1 != arcs.len() {
                    return bad("continues after returning to the depot");
                }
                visited |= bit;
            }
            cost += arc.true_cost;
        }
        Ok(TimedPath {
            arcs: arcs.to_vec(),
            cost,
            visited,
            end: net.arc(*arcs.last().unwrap()).head,
        })
    }

    /// Returns `Some(id)` when the path is new.
    pub fn insert(&mut self, net: &PartialNetwork, arcs: &[ArcId]) -> Result<Option<PathId>, NetworkError> {
        if self.index.contains_key(arcs) {
            return Ok(None);
        }
        let path = Self::make_path(net, arcs)?;
        if self.paths.len() >= self.cap {
            return Err(NetworkError::PoolOverflow { cap: self.cap });
        }
        let id = self.paths.len();
        self.index.insert(path.arcs.clone(), id);
        self.paths.push(path);
        Ok(Some(id))
    }

    /// Pairs `(p, a)` with `p ⊕ a` also in the pool.
    pub fn extensions(&self) -> Vec<(PathId, ArcId)> {
        let mut out = Vec::new();
        for p in &self.paths {
            if p.arcs.len() < 2 {
                continue;
            }
            let (prefix, last) = p.arcs.split_at(p.arcs.len() - 1);
            if let Some(&parent) = self.index.get(prefix) {
                out.push((parent, last[0]));
            }
        }
        out
    }
}

/// Replays the Add-Paths procedure on a depot-rooted walk: follows the walk's
/// cities at their true times, adding every prefix path and every prefix
/// extended by one waiting step. The true-time nodes are inserted so the
/// prefix arcs are correct-time.
pub fn add_paths(
    net: &mut PartialNetwork,
    pool: &mut PathPool,
    tour: &[TimedNode],
) -> Result<MutationReport, NetworkError> {
    let inst = net.instance().clone();
    let first = tour
        .first()
        .ok_or_else(|| NetworkError::BadTour("empty tour".into()))?;
    if first.city != 0 || first.time != inst.depot_open() {
        return Err(NetworkError::BadTour(format!("starts at ({},{})", first.city, first.time)));
    }
    let mut cities: Vec<City> = Vec::with_capacity(tour.len());
    for v in tour {
        if cities.last() != Some(&v.city) {
            cities.push(v.city);
        }
    }

    let mut report = MutationReport::default();
    let mut path: Vec<ArcId> = Vec::new();
    let mut seen = 1u64;
    let mut t = inst.depot_open();
    for k in 1..cities.len() {
        let (prev, city) = (cities[k - 1], cities[k]);
        if inst.waiting_allowed(prev) && t < inst.horizon() {
            report.merge(net.insert_node(prev, t + 1)?);
            let node = net.node_id(prev, t).unwrap();
            let wait = net.waiting_out(node).unwrap();
            path.push(wait);
            if pool.insert(net, &path)?.is_some() {
                report.paths_added += 1;
            }
            path.pop();
        }
        let Some(idx) = inst.arc_index(prev, city) else {
            break;
        };
        if city != 0 && seen & (1u64 << city) != 0 {
            break;
        }
        let next = (t + inst.tau_at(idx, t)).max(inst.earliest(city));
        if next > inst.latest(city) {
            break;
        }
        report.merge(net.insert_node(city, next)?);
        let node = net.node_id(prev, t).unwrap();
        let arc = net
            .out_arcs(node)
            .iter()
            .copied()
            .find(|&a| net.arc(a).is_travel() && net.arc(a).to.city == city)
            .expect("travel arc exists when the arrival is in time");
        path.push(arc);
        if pool.insert(net, &path)?.is_some() {
            report.paths_added += 1;
        }
        seen |= 1u64 << city;
        t = next;
        if city == 0 {
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{ArcData, StepProfile, TimeWindow, WaitingCost};

    fn tiny4() -> Instance {
        crate::suites::tiny4()
    }

    #[test]
    fn underestimate_examples() {
        let values = [5, 4, 3, 3, 6, 6];
        let windows = vec![TimeWindow::new(0, 5), TimeWindow::new(0, 5)];
        let profile = StepProfile::from_values(&values);
        let arcs = vec![
            ArcData {
                from: 0,
                to: 1,
                travel_time: StepProfile::constant(1, 5),
                travel_cost: profile,
            },
            ArcData {
                from: 1,
                to: 0,
                travel_time: StepProfile::constant(0, 5),
                travel_cost: StepProfile::constant(1, 5),
            },
        ];
        let waiting = vec![WaitingCost::Forbidden; 2];
        let inst = Instance::new(windows, arcs, waiting).unwrap();
        let got: Vec<Option<Cost>> = (0..=5).map(|t| underestimate_cost(&inst, 0, 1, t)).collect();
        assert_eq!(got, vec![Some(3), Some(3), Some(3), Some(3), Some(6), None]);
        let table = underestimate_table(&inst, inst.arc_index(0, 1).unwrap());
        assert_eq!(table, got);
    }

    #[test]
    fn tiny4_initial_network() {
        let inst = tiny4();
        let mut net = PartialNetwork::initial(&inst);
        net.set_self_check(true);
        net.check_properties().unwrap();
        assert_eq!(net.num_nodes(), 8);
        let src = net.source();
        let a = net
            .out_arcs(src)
            .iter()
            .copied()
            .find(|&a| net.arc(a).to.city == 1)
            .unwrap();
        assert_eq!(net.arc(a).to, TimedNode::new(1, 0));
        assert!(!net.arc(a).correct_time);

        let before = net.num_nodes();
        let report = net.lengthen_arc(a).unwrap();
        assert!(net.num_nodes() > before);
        assert!(report.nodes_added.contains(&TimedNode::new(1, 2)));
        assert_eq!(net.arc(a).to, TimedNode::new(1, 2));
        assert!(net.arc(a).correct_time);
        assert_eq!(net.lengthen_arc(a), Err(NetworkError::NotTooShort(a)));
    }

    #[test]
    fn tiny4_full_network() {
        let inst = tiny4();
        let net = PartialNetwork::full(&inst).unwrap();
        net.check_properties().unwrap();
        assert_eq!(net.num_nodes(), 84);
        assert!(net.arcs().iter().all(|a| a.correct_time && a.under_cost == a.true_cost));
        let src = net.source();
        assert!(net
            .out_arcs(src)
            .iter()
            .any(|&a| net.arc(a).to == TimedNode::new(1, 2) && net.arc(a).true_cost == 2));
        assert!(matches!(
            PartialNetwork::full_with_cap(&inst, 10),
            Err(NetworkError::CapExceeded { nodes: 84, cap: 10 })
        ));
    }

    #[test]
    fn forbidden_city_has_no_waiting_arcs() {
        let inst = tiny4();
        let mut waiting = inst.waiting().to_vec();
        waiting[2] = WaitingCost::Forbidden;
        let inst = Instance::new(inst.windows().to_vec(), inst.arcs().to_vec(), waiting).unwrap();
        let net = PartialNetwork::full(&inst).unwrap();
        assert!(net.arcs().iter().all(|a| !(a.is_waiting() && a.from.city == 2)));
        assert!(net.arcs().iter().any(|a| a.is_waiting() && a.from.city == 1));
    }

    #[test]
    fn add_paths_dedups_and_breaks() {
        let inst = tiny4();
        let mut net = PartialNetwork::initial(&inst);
        net.set_self_check(true);
        let mut pool = PathPool::default();
        let tour: Vec<TimedNode> = [0, 1, 2, 3, 0]
            .iter()
            .map(|&c| TimedNode::new(c, 0))
            .collect();
        let r = add_paths(&mut net, &mut pool, &tour).unwrap();
        // Four prefixes plus four waiting extensions.
        assert_eq!(r.paths_added, 8);
        assert_eq!(pool.len(), 8);
        let full = pool.paths().iter().find(|p| p.visits(0)).unwrap();
        assert_eq!(full.cost, 8);
        let r2 = add_paths(&mut net, &mut pool, &tour).unwrap();
        assert!(r2.is_empty());
        for (p, a) in pool.extensions() {
            let mut arcs = pool.get(p).arcs.clone();
            arcs.push(a);
            assert!(pool.find(&arcs).is_some());
        }
    }

    #[test]
    fn add_paths_stops_at_late_arrival() {
        let inst = tiny4();
        let mut windows = inst.windows().to_vec();
        windows[3] = TimeWindow::new(0, 3);
        let inst = Instance::new(windows, inst.arcs().to_vec(), inst.waiting().to_vec()).unwrap();
        let mut net = PartialNetwork::initial(&inst);
        let mut pool = PathPool::default();
        let tour: Vec<TimedNode> = [0, 1, 2, 3, 0]
            .iter()
            .map(|&c| TimedNode::new(c, 0))
            .collect();
        add_paths(&mut net, &mut pool, &tour).unwrap();
        let prefixes = pool
            .paths()
            .iter()
            .filter(|p| net.arc(p.last_arc()).is_travel())
            .count();
        assert_eq!(prefixes, 2);
    }
}

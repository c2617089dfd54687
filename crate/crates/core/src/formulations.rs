//! Integer models over time-expanded networks: the exact full model, the base
//! lower bound, the path-arc, Z and aggregated Z lower bounds, and the
//! restricted scheduling problem for a fixed city sequence.
//!
//! The tour leaves the depot source `(0, e_0)` and ends on a travel arc into
//! the depot. Later depot nodes are only reached by waiting; return arcs are
//! sinks that appear in the depot's visit row but in no balance row.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{City, Cost, Instance, Time};
use crate::mip::{ColumnId, Model, Sense, Tag};
use crate::timenet::{ArcId, NodeId, PartialNetwork, PathId, PathPool, Pricing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormulationKind {
    Full,
    BaseLb,
    PathArc,
    Z,
    ZAgg,
    Restricted,
}

impl FormulationKind {
    pub fn name(self) -> &'static str {
        match self {
            FormulationKind::Full => "full",
            FormulationKind::BaseLb => "base",
            FormulationKind::PathArc => "path",
            FormulationKind::Z => "z",
            FormulationKind::ZAgg => "zagg",
            FormulationKind::Restricted => "restricted",
        }
    }
}

impl std::str::FromStr for FormulationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(FormulationKind::Full),
            "base" | "baselb" => Ok(FormulationKind::BaseLb),
            "path" | "patharc" => Ok(FormulationKind::PathArc),
            "z" => Ok(FormulationKind::Z),
            "zagg" | "z-agg" => Ok(FormulationKind::ZAgg),
            "restricted" => Ok(FormulationKind::Restricted),
            _ => Err(format!("unknown formulation \"{s}\"")),
        }
    }
}

impl std::fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A model together with the meaning of its columns.
#[derive(Debug, Clone)]
pub struct LbModel {
    pub kind: FormulationKind,
    pub model: Model,
    x: Vec<Option<ColumnId>>,
    z: Vec<Option<ColumnId>>,
    paths: Vec<(PathId, ColumnId)>,
}

/// Decoded 0-1 solution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Selection {
    /// Arcs with `x_a = 1`.
    pub arcs: Vec<ArcId>,
    /// Arcs with `z_a = 1`.
    pub z_arcs: Vec<ArcId>,
    pub paths: Vec<PathId>,
}

impl Selection {
    /// Arcs used directly or inside a selected path.
    pub fn all_arcs(&self, pool: Option<&PathPool>) -> Vec<ArcId> {
        let mut out = self.arcs.clone();
        if let Some(pool) = pool {
            for &p in &self.paths {
                out.extend(pool.get(p).arcs.iter().copied());
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl LbModel {
    pub fn x(&self, arc: ArcId) -> Option<ColumnId> {
        self.x.get(arc).copied().flatten()
    }

    pub fn z(&self, arc: ArcId) -> Option<ColumnId> {
        self.z.get(arc).copied().flatten()
    }

    pub fn path_columns(&self) -> &[(PathId, ColumnId)] {
        &self.paths
    }

    pub fn decode(&self, support: &[ColumnId]) -> Selection {
        let mut sel = Selection::default();
        for &c in support {
            match self.model.columns()[c].tag {
                Tag::Arc(a) => sel.arcs.push(a),
                Tag::ArcZ(a) => sel.z_arcs.push(a),
                Tag::Path(p) => sel.paths.push(p),
                Tag::None => {}
            }
        }
        sel
    }

    /// Support of a selection, for feeding known solutions back to a model.
    pub fn encode(&self, sel: &Selection) -> Option<Vec<ColumnId>> {
        let mut out = Vec::new();
        for &a in &sel.arcs {
            out.push(self.x(a)?);
        }
        for &a in &sel.z_arcs {
            out.push(self.z(a)?);
        }
        for &p in &sel.paths {
            out.push(self.paths.iter().find(|(q, _)| *q == p)?.1);
        }
        out.sort_unstable();
        Some(out)
    }

    /// Adds `Σ x_a + Σ k_p x_p <= rhs` over every timed copy of the given city
    /// arcs, `k_p` being the number of such copies inside path `p`.
    pub fn add_city_arc_limit(
        &mut self,
        net: &PartialNetwork,
        pool: Option<&PathPool>,
        city_arcs: &[(City, City)],
        rhs: i64,
    ) {
        let n = net.instance().n();
        let mut member = vec![false; n * n];
        for &(i, j) in city_arcs {
            member[i * n + j] = true;
        }
        let hit = |a: ArcId| {
            let arc = net.arc(a);
            arc.is_travel() && member[arc.from.city * n + arc.to.city]
        };
        let mut terms = Vec::new();
        for a in 0..net.num_arcs() {
            if hit(a) {
                if let Some(c) = self.x(a) {
                    terms.push((c, 1));
                }
            }
        }
        if let Some(pool) = pool {
            for &(p, c) in &self.paths {
                let k = pool.get(p).arcs.iter().filter(|&&a| hit(a)).count() as i64;
                if k > 0 {
                    terms.push((c, k));
                }
            }
        }
        if !terms.is_empty() {
            self.model
                .add_row(terms, Sense::Le, rhs)
                .expect("columns come from this model");
        }
    }

    /// Registers one branching group per city arc: its timed x copies plus
    /// the path columns that use it.
    pub fn add_city_arc_groups(&mut self, net: &PartialNetwork, pool: Option<&PathPool>) {
        let n = net.instance().n();
        let mut groups: Vec<Vec<ColumnId>> = vec![Vec::new(); n * n];
        for a in 0..net.num_arcs() {
            let arc = net.arc(a);
            if let (true, Some(c)) = (arc.is_travel(), self.x(a)) {
                groups[arc.from.city * n + arc.to.city].push(c);
            }
        }
        if let Some(pool) = pool {
            for &(p, c) in &self.paths {
                for &a in &pool.get(p).arcs {
                    let arc = net.arc(a);
                    if arc.is_travel() {
                        groups[arc.from.city * n + arc.to.city].push(c);
                    }
                }
            }
        }
        for g in groups.into_iter().filter(|g| g.len() > 1) {
            self.model.add_branch_group(g).expect("columns come from this model");
        }
    }

    /// Fixes every waiting arc variable to zero.
    pub fn forbid_waiting(&mut self, net: &PartialNetwork) {
        let terms: Vec<(ColumnId, i64)> = (0..net.num_arcs())
            .filter(|&a| net.arc(a).is_waiting())
            .filter_map(|a| self.x(a).map(|c| (c, 1)))
            .collect();
        if !terms.is_empty() {
            self.model.add_row(terms, Sense::Eq, 0).unwrap();
        }
    }

    /// Fixes every `z_a` to zero.
    pub fn fix_z_zero(&mut self) {
        let terms: Vec<(ColumnId, i64)> = self.z.iter().flatten().map(|&c| (c, 1)).collect();
        if !terms.is_empty() {
            self.model.add_row(terms, Sense::Eq, 0).unwrap();
        }
    }
}

/// Per-node and per-city arc incidence shared by the builders.
struct Incidence {
    inbound_travel: Vec<Vec<ArcId>>,
}

impl Incidence {
    fn new(net: &PartialNetwork) -> Self {
        let mut inbound_travel = vec![Vec::new(); net.instance().n()];
        for (a, arc) in net.arcs().iter().enumerate() {
            if arc.is_travel() {
                inbound_travel[arc.to.city].push(a);
            }
        }
        Incidence { inbound_travel }
    }
}

fn arc_columns(model: &mut Model, net: &PartialNetwork, keep: impl Fn(ArcId) -> bool) -> Vec<Option<ColumnId>> {
    (0..net.num_arcs())
        .map(|a| keep(a).then(|| model.add_column(net.arc(a).under_cost, Tag::Arc(a))))
        .collect()
}

/// Visit-once rows per city and balance rows per timed node.
fn routing_rows(
    model: &mut Model,
    net: &PartialNetwork,
    inc: &Incidence,
    x: &[Option<ColumnId>],
    paths: &[(PathId, ColumnId)],
    pool: Option<&PathPool>,
) {
    let n = net.instance().n();
    let mut visit_paths: Vec<Vec<ColumnId>> = vec![Vec::new(); n];
    let mut ending: HashMap<NodeId, Vec<ColumnId>> = HashMap::new();
    if let Some(pool) = pool {
        for &(p, c) in paths {
            let path = pool.get(p);
            for city in 0..n {
                if path.visits(city) {
                    visit_paths[city].push(c);
                }
            }
            let last = net.arc(path.last_arc());
            if !(last.is_travel() && last.to.city == 0) {
                ending.entry(path.end).or_default().push(c);
            }
        }
    }

    for city in 0..n {
        let mut terms: Vec<(ColumnId, i64)> = inc.inbound_travel[city]
            .iter()
            .filter_map(|&a| x[a].map(|c| (c, 1)))
            .collect();
        terms.extend(visit_paths[city].iter().map(|&c| (c, 1)));
        model.add_row(terms, Sense::Eq, 1).unwrap();
    }

    let source = net.source();
    for v in 0..net.num_nodes() {
        let depot = net.node(v).city == 0;
        let mut terms: Vec<(ColumnId, i64)> = Vec::new();
        for &a in net.out_arcs(v) {
            if let Some(c) = x[a] {
                terms.push((c, if v == source { 1 } else { -1 }));
            }
        }
        if v == source {
            for &(_, c) in paths {
                terms.push((c, 1));
            }
            model.add_row(terms, Sense::Eq, 1).unwrap();
            continue;
        }
        for &a in net.in_arcs(v) {
            if depot && net.arc(a).is_travel() {
                continue;
            }
            if let Some(c) = x[a] {
                terms.push((c, 1));
            }
        }
        if let Some(cs) = ending.get(&v) {
            terms.extend(cs.iter().map(|&c| (c, 1)));
        }
        if !terms.is_empty() {
            model.add_row(terms, Sense::Eq, 0).unwrap();
        }
    }
}

/// The exact model on a full network: arcs priced at true cost.
pub fn build_full_model(net: &PartialNetwork) -> LbModel {
    assert_eq!(net.pricing(), Pricing::Exact, "full model needs an exactly priced network");
    build_base(net, FormulationKind::Full, |_| true)
}

/// `min Σ c̲_a x_a` over the routing rows.
pub fn build_base_lb_model(net: &PartialNetwork) -> LbModel {
    build_base(net, FormulationKind::BaseLb, |_| true)
}

fn build_base(net: &PartialNetwork, kind: FormulationKind, keep: impl Fn(ArcId) -> bool) -> LbModel {
    let mut model = Model::new();
    let x = arc_columns(&mut model, net, keep);
    let inc = Incidence::new(net);
    routing_rows(&mut model, net, &inc, &x, &[], None);
    LbModel {
        kind,
        model,
        x,
        z: Vec::new(),
        paths: Vec::new(),
    }
}

/// Full model restricted to the travel arcs of one city sequence (waiting arcs kept).
pub fn build_restricted_model(net: &PartialNetwork, sequence: &[City]) -> LbModel {
    assert_eq!(net.pricing(), Pricing::Exact, "restricted model needs an exactly priced network");
    let n = net.instance().n();
    let mut allowed = vec![false; n * n];
    for w in sequence.windows(2) {
        allowed[w[0] * n + w[1]] = true;
    }
    build_base(net, FormulationKind::Restricted, |a| {
        let arc = net.arc(a);
        arc.is_waiting() || allowed[arc.from.city * n + arc.to.city]
    })
}

pub fn build_path_arc_model(net: &PartialNetwork, pool: &PathPool) -> LbModel {
    let mut model = Model::new();
    let x = arc_columns(&mut model, net, |_| true);
    let paths: Vec<(PathId, ColumnId)> = (0..pool.len())
        .map(|p| (p, model.add_column(pool.get(p).cost, Tag::Path(p))))
        .collect();

    let mut containing: HashMap<ArcId, Vec<ColumnId>> = HashMap::new();
    for &(p, c) in &paths {
        for &a in &pool.get(p).arcs {
            containing.entry(a).or_default().push(c);
        }
    }
    let mut keys: Vec<&ArcId> = containing.keys().collect();
    keys.sort_unstable();
    for &a in keys {
        let mut terms = vec![(x[a].unwrap(), 1)];
        terms.extend(containing[&a].iter().map(|&c| (c, 1)));
        model.add_row(terms, Sense::Le, 1).unwrap();
    }
    for (p, a) in pool.extensions() {
        model
            .add_row(vec![(paths[p].1, 1), (x[a].unwrap(), 1)], Sense::Le, 1)
            .unwrap();
    }
    let inc = Incidence::new(net);
    routing_rows(&mut model, net, &inc, &x, &paths, Some(pool));
    let mut lb = LbModel {
        kind: FormulationKind::PathArc,
        model,
        x,
        z: Vec::new(),
        paths,
    };
    lb.forbid_waiting(net);
    lb
}

/// Nodes whose outbound arcs may be priced exactly: a unit waiting step
/// follows, or waiting is forbidden so departure equals arrival.
fn eligible(net: &PartialNetwork, v: NodeId) -> bool {
    !net.instance().waiting_allowed(net.node(v).city) || net.has_next_unit(v)
}

struct ZParts {
    model: Model,
    x: Vec<Option<ColumnId>>,
    z: Vec<Option<ColumnId>>,
    elig: Vec<bool>,
}

fn z_common(net: &PartialNetwork) -> ZParts {
    let mut model = Model::new();
    let x = arc_columns(&mut model, net, |_| true);
    let elig: Vec<bool> = (0..net.num_nodes()).map(|v| eligible(net, v)).collect();
    let z: Vec<Option<ColumnId>> = (0..net.num_arcs())
        .map(|a| {
            let arc = net.arc(a);
            let delta = arc.true_cost - arc.under_cost;
            debug_assert!(delta >= 0);
            elig[arc.tail].then(|| model.add_column(delta, Tag::ArcZ(a)))
        })
        .collect();
    let inc = Incidence::new(net);
    routing_rows(&mut model, net, &inc, &x, &[], None);
    for a in 0..net.num_arcs() {
        if let (Some(zc), Some(xc)) = (z[a], x[a]) {
            model.add_row(vec![(zc, 1), (xc, -1)], Sense::Le, 0).unwrap();
        }
    }
    ZParts {
        model,
        x,
        z,
        elig,
    }
}

fn lambda_z(net: &PartialNetwork, z: &[Option<ColumnId>], v: NodeId) -> Vec<ColumnId> {
    net.lambda_plus(v).filter_map(|a| z[a]).collect()
}

fn out_z(net: &PartialNetwork, z: &[Option<ColumnId>], v: NodeId) -> Vec<ColumnId> {
    net.out_arcs(v).iter().filter_map(|&a| z[a]).collect()
}

/// Depot departures from the source are exact when the source is eligible.
fn z_source_rows(net: &PartialNetwork, p: &mut ZParts, aggregated: bool) {
    let source = net.source();
    if !p.elig[source] {
        return;
    }
    let mut agg = Vec::new();
    for &a in net.out_arcs(source) {
        let (zc, xc) = (p.z[a].unwrap(), p.x[a].unwrap());
        if aggregated {
            agg.push((xc, 1));
            agg.push((zc, -1));
        } else {
            p.model.add_row(vec![(zc, 1), (xc, -1)], Sense::Eq, 0).unwrap();
        }
    }
    if aggregated && !agg.is_empty() {
        p.model.add_row(agg, Sense::Eq, 0).unwrap();
    }
}

fn no_redundant_waiting(net: &PartialNetwork, p: &mut ZParts, v: NodeId) {
    if let Some(w) = net.waiting_out(v) {
        let mut terms: Vec<(ColumnId, i64)> = lambda_z(net, &p.z, v).into_iter().map(|c| (c, 1)).collect();
        terms.push((p.x[w].unwrap(), -1));
        p.model.add_row(terms, Sense::Ge, 0).unwrap();
    }
}

fn unbalance_row(p: &mut ZParts, lambda: &[ColumnId], out: &[ColumnId]) {
    if out.is_empty() {
        return;
    }
    let mut terms: Vec<(ColumnId, i64)> = lambda.iter().map(|&c| (c, 1)).collect();
    terms.extend(out.iter().map(|&c| (c, -1)));
    p.model.add_row(terms, Sense::Ge, 0).unwrap();
}

pub fn build_z_model(net: &PartialNetwork) -> LbModel {
    let mut p = z_common(net);
    z_source_rows(net, &mut p, false);
    let source = net.source();
    for v in 0..net.num_nodes() {
        if v == source {
            continue;
        }
        let lambda = lambda_z(net, &p.z, v);
        if p.elig[v] {
            for &a in net.out_arcs(v) {
                let mut terms = vec![(p.z[a].unwrap(), 1), (p.x[a].unwrap(), -1)];
                terms.extend(lambda.iter().map(|&c| (c, -1)));
                p.model.add_row(terms, Sense::Ge, -1).unwrap();
            }
            no_redundant_waiting(net, &mut p, v);
        }
        let out = out_z(net, &p.z, v);
        unbalance_row(&mut p, &lambda, &out);
    }
    LbModel {
        kind: FormulationKind::Z,
        model: p.model,
        x: p.x,
        z: p.z,
        paths: Vec::new(),
    }
}

pub fn build_zagg_model(net: &PartialNetwork) -> LbModel {
    let mut p = z_common(net);
    z_source_rows(net, &mut p, true);
    let source = net.source();
    let n = net.instance().n();
    let mut city_lambda: Vec<Vec<ColumnId>> = vec![Vec::new(); n];
    let mut city_out: Vec<Vec<ColumnId>> = vec![Vec::new(); n];
    for v in 0..net.num_nodes() {
        let city = net.node(v).city;
        let lambda = lambda_z(net, &p.z, v);
        let out = out_z(net, &p.z, v);
        if v != source && p.elig[v] && !net.out_arcs(v).is_empty() {
            let mut terms: Vec<(ColumnId, i64)> = Vec::new();
            for &a in net.out_arcs(v) {
                terms.push((p.z[a].unwrap(), 1));
                terms.push((p.x[a].unwrap(), -1));
            }
            terms.extend(lambda.iter().map(|&c| (c, -1)));
            p.model.add_row(terms, Sense::Ge, -1).unwrap();
        }
        if v != source && p.elig[v] {
            no_redundant_waiting(net, &mut p, v);
        }
        if city == 0 {
            // Depot nodes keep per-node rows; returns never enter λ⁺ there.
            if v != source {
                unbalance_row(&mut p, &lambda, &out);
            }
        } else {
            city_lambda[city].extend(lambda);
            city_out[city].extend(out);
        }
    }
    for city in 1..n {
        let (lambda, out) = (city_lambda[city].clone(), city_out[city].clone());
        unbalance_row(&mut p, &lambda, &out);
    }
    LbModel {
        kind: FormulationKind::ZAgg,
        model: p.model,
        x: p.x,
        z: p.z,
        paths: Vec::new(),
    }
}

/// Builds the lower-bound model of the given kind.
pub fn build_lb_model(kind: FormulationKind, net: &PartialNetwork, pool: &PathPool) -> LbModel {
    let mut lb = match kind {
        FormulationKind::BaseLb => build_base_lb_model(net),
        FormulationKind::PathArc => build_path_arc_model(net, pool),
        FormulationKind::Z => build_z_model(net),
        FormulationKind::ZAgg => build_zagg_model(net),
        FormulationKind::Full => build_full_model(net),
        FormulationKind::Restricted => panic!("restricted models need a city sequence"),
    };
    lb.add_city_arc_groups(net, (kind == FormulationKind::PathArc).then_some(pool));
    lb
}

/// Optimal timing of a fixed city sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub cities: Vec<City>,
    /// Visit time at each position (the depot's first entry is `e_0`).
    pub visits: Vec<Time>,
    /// Departure time at each position but the last.
    pub departures: Vec<Time>,
    pub cost: Cost,
}

impl Schedule {
    /// Total paid waiting.
    pub fn waiting_cost(&self, inst: &Instance) -> Cost {
        (0..self.departures.len())
            .map(|k| {
                (self.visits[k]..self.departures[k])
                    .map(|h| inst.waiting_cost(self.cities[k], h).unwrap_or(0))
                    .sum::<Cost>()
            })
            .sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("sequence is not a tour 0, u_1, ..., u_n, 0 over all cities")]
    NotATour,
    #[error("sequence uses missing arc ({0},{1})")]
    MissingArc(City, City),
    #[error("no schedule meets every time window")]
    InfeasibleSequence,
}

/// Minimum-cost schedule for a complete tour.
pub fn schedule_tour(inst: &Instance, sequence: &[City]) -> Result<Schedule, ScheduleError> {
    let n = inst.n();
    if sequence.len() != n + 1 || sequence[0] != 0 || sequence[n] != 0 {
        return Err(ScheduleError::NotATour);
    }
    let mut seen = vec![false; n];
    for &c in &sequence[1..n] {
        if c == 0 || c >= n || seen[c] {
            return Err(ScheduleError::NotATour);
        }
        seen[c] = true;
    }
    schedule_sequence(inst, sequence)
}

/// Dynamic program over (position, time) with unit waits and departures.
/// Works for any depot-rooted sequence, complete or not.
pub fn schedule_sequence(inst: &Instance, sequence: &[City]) -> Result<Schedule, ScheduleError> {
    const INF: Cost = Cost::MAX;
    let horizon = inst.horizon();
    let slots = horizon as usize + 1;
    let m = sequence.len();
    if m == 0 || sequence[0] != 0 {
        return Err(ScheduleError::NotATour);
    }
    let mut arcs = Vec::with_capacity(m);
    for w in sequence.windows(2) {
        arcs.push(inst.arc_index(w[0], w[1]).ok_or(ScheduleError::MissingArc(w[0], w[1]))?);
    }
    #[derive(Clone, Copy)]
    enum From {
        Start,
        Wait,
        Depart(Time),
        Unset,
    }
    let mut best = vec![vec![INF; slots]; m];
    let mut parent = vec![vec![From::Unset; slots]; m];
    let e0 = inst.depot_open();
    best[0][e0 as usize] = 0;
    parent[0][e0 as usize] = From::Start;
    for k in 0..m {
        let city = sequence[k];
        if k + 1 < m {
            for t in 0..horizon {
                let cur = best[k][t as usize];
                if cur == INF {
                    continue;
                }
                if let Some(w) = inst.waiting_cost(city, t) {
                    let c = cur + w;
                    if c < best[k][t as usize + 1] {
                        best[k][t as usize + 1] = c;
                        parent[k][t as usize + 1] = From::Wait;
                    }
                }
            }
        }
        if k + 1 == m {
            break;
        }
        let next = sequence[k + 1];
        let arc = arcs[k];
        for t in 0..=horizon {
            let cur = best[k][t as usize];
            if cur == INF {
                continue;
            }
            let reach = t + inst.tau_at(arc, t);
            if reach > inst.latest(next) {
                continue;
            }
            let visit = reach.max(inst.earliest(next));
            let c = cur + inst.cost_at(arc, t);
            if c < best[k + 1][visit as usize] {
                best[k + 1][visit as usize] = c;
                parent[k + 1][visit as usize] = From::Depart(t);
            }
        }
    }
    if m == 1 {
        return Ok(Schedule {
            cities: sequence.to_vec(),
            visits: vec![e0],
            departures: Vec::new(),
            cost: 0,
        });
    }
    // The final layer only records arrivals; no waiting happens after the return.
    let last = m - 1;
    let (mut t, cost) = (0..slots)
        .filter(|&t| matches!(parent[last][t], From::Depart(_)))
        .map(|t| (t as Time, best[last][t]))
        .min_by_key(|&(t, c)| (c, t))
        .ok_or(ScheduleError::InfeasibleSequence)?;
    let mut visits = vec![0; m];
    let mut departures = vec![0; m - 1];
    let mut k = last;
    loop {
        match parent[k][t as usize] {
            From::Wait => t -= 1,
            From::Depart(d) => {
                visits[k] = t;
                k -= 1;
                departures[k] = d;
                t = d;
            }
            From::Start => {
                visits[0] = t;
                break;
            }
            From::Unset => unreachable!("parent chain is complete"),
        }
    }
    Ok(Schedule {
        cities: sequence.to_vec(),
        visits,
        departures,
        cost,
    })
}

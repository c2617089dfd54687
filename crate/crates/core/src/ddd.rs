//! The dynamic discretization discovery loop: solve a lower-bound model on a
//! partial network, turn its solutions into tours or cuts, refine the network
//! and repeat until the incumbent is within the requested gap.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::formulations::{
    build_lb_model, schedule_sequence, schedule_tour, FormulationKind, Schedule,
};
use crate::instance::{preprocess, City, Cost, Instance, Time};
use crate::mip::{solve, Backend, BoundStrategy, MipError, Model, Sense, SolveOptions, Status, Tag};
use crate::timenet::{add_paths, ArcId, MutationReport, NetworkError, PartialNetwork, PathPool, TimedNode};

/// Relative gap tolerance as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Epsilon {
    pub num: u64,
    pub den: u64,
}

impl Epsilon {
    pub const ZERO: Epsilon = Epsilon { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        Epsilon { num, den }
    }

    /// `(ub - lb) / ub <= num / den`, compared without rounding.
    pub fn closed(&self, lb: Cost, ub: Cost) -> bool {
        if lb >= ub {
            return true;
        }
        let lhs = (ub as i128 - lb as i128) * self.den as i128;
        lhs <= self.num as i128 * ub as i128
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Epsilon {
    fn default() -> Self {
        Epsilon::new(1, 100)
    }
}

impl std::str::FromStr for Epsilon {
    type Err = String;

    /// Accepts decimals (`0.01`) and fractions (`1/100`).
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let bad = || format!("invalid epsilon \"{s}\"");
        if let Some((a, b)) = s.split_once('/') {
            let num = a.trim().parse().map_err(|_| bad())?;
            let den: u64 = b.trim().parse().map_err(|_| bad())?;
            if den == 0 {
                return Err(bad());
            }
            return Ok(Epsilon::new(num, den));
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || (int.is_empty() && frac.is_empty()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int.checked_mul(den).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        Ok(Epsilon::new(num, den))
    }
}

impl std::fmt::Display for Epsilon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Relative gap for reporting; `None` without an incumbent.
pub fn relative_gap(lb: Cost, ub: Option<Cost>) -> Option<f64> {
    let ub = ub?;
    if lb >= ub {
        return Some(0.0);
    }
    if ub <= 0 {
        return Some(f64::INFINITY);
    }
    Some((ub - lb) as f64 / ub as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CutKind {
    ExcludeTour,
    Subtour,
    InfeasiblePath,
}

/// `Σ x <= rhs` over every timed copy of a set of city arcs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CityCut {
    pub kind: CutKind,
    pub city_arcs: Vec<(City, City)>,
    pub rhs: i64,
}

impl CityCut {
    pub fn new(kind: CutKind, city_arcs: Vec<(City, City)>) -> Self {
        let rhs = city_arcs.len() as i64 - 1;
        CityCut { kind, city_arcs, rhs }
    }

    fn key(&self) -> Vec<(City, City)> {
        let mut k = self.city_arcs.clone();
        k.sort_unstable();
        k
    }
}

fn cycle_arcs(cities: &[City]) -> Vec<(City, City)> {
    (0..cities.len())
        .map(|k| (cities[k], cities[(k + 1) % cities.len()]))
        .collect()
}

fn path_arcs(cities: &[City]) -> Vec<(City, City)> {
    cities.windows(2).map(|w| (w[0], w[1])).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// `0, u_1, ..., u_n, 0`, feasible without waiting.
    FeasibleTour(Vec<City>),
    /// Cycles that avoid the depot.
    Subtours(Vec<Vec<City>>),
    /// Shortest depot-rooted prefix whose last arrival misses its window.
    InfeasiblePath(Vec<City>),
}

#[derive(Debug, Error)]
pub enum DddError {
    #[error("malformed support: {0}")]
    MalformedSupport(String),
    #[error("no feasible tour exists")]
    ProvenInfeasible,
    #[error("iteration {0} changed nothing")]
    Stalled(usize),
    #[error("lower bound {lb} exceeds incumbent {ub}")]
    BoundCrossed { lb: Cost, ub: Cost },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error("trace output: {0}")]
    Io(#[from] std::io::Error),
}

/// Projects a support onto city arcs and classifies it.
pub fn check_solution(inst: &Instance, city_arcs: &[(City, City)]) -> Result<Verdict, DddError> {
    let n = inst.n();
    let mut succ: Vec<Option<City>> = vec![None; n];
    let mut indeg = vec![0usize; n];
    for &(i, j) in city_arcs {
        if i >= n || j >= n || i == j {
            return Err(DddError::MalformedSupport(format!("arc ({i},{j})")));
        }
        if succ[i].replace(j).is_some() {
            return Err(DddError::MalformedSupport(format!("city {i} left twice")));
        }
        indeg[j] += 1;
    }
    if let Some(i) = (0..n).find(|&i| succ[i].is_none() || indeg[i] != 1) {
        return Err(DddError::MalformedSupport(format!("city {i} not entered and left once")));
    }
    let mut on_cycle = vec![false; n];
    let mut cycles: Vec<Vec<City>> = Vec::new();
    for start in 0..n {
        if on_cycle[start] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut c = start;
        while !on_cycle[c] {
            on_cycle[c] = true;
            cyc.push(c);
            c = succ[c].unwrap();
        }
        cycles.push(cyc);
    }
    if cycles.len() > 1 {
        return Ok(Verdict::Subtours(cycles.into_iter().filter(|c| c[0] != 0).collect()));
    }
    let mut seq = cycles.pop().unwrap();
    seq.push(0);
    let mut t = inst.depot_open();
    for k in 0..n {
        let (i, j) = (seq[k], seq[k + 1]);
        let idx = inst
            .arc_index(i, j)
            .ok_or_else(|| DddError::MalformedSupport(format!("missing arc ({i},{j})")))?;
        let reach = t + inst.tau_at(idx, t);
        if reach > inst.latest(j) {
            return Ok(Verdict::InfeasiblePath(seq[..=k + 1].to_vec()));
        }
        t = reach.max(inst.earliest(j));
    }
    Ok(Verdict::FeasibleTour(seq))
}

pub fn make_cuts(verdict: &Verdict) -> Vec<CityCut> {
    match verdict {
        Verdict::FeasibleTour(seq) => vec![CityCut::new(CutKind::ExcludeTour, path_arcs(seq))],
        Verdict::Subtours(cycles) => cycles
            .iter()
            .map(|c| CityCut::new(CutKind::Subtour, cycle_arcs(c)))
            .collect(),
        Verdict::InfeasiblePath(prefix) => vec![CityCut::new(CutKind::InfeasiblePath, path_arcs(prefix))],
    }
}

/// Overestimating heuristic: each travel arc of the current node set jumps to
/// the earliest node not before its true arrival, priced at true cost, with no
/// waiting arcs. Any tour it finds is feasible without waiting.
pub fn heuristic_overestimate(
    net: &PartialNetwork,
    cuts: &[CityCut],
    opts: &SolveOptions,
) -> Result<Vec<Vec<City>>, DddError> {
    let inst = net.instance();
    let n = inst.n();
    let source = net.source();
    let mut model = Model::new();
    // (tail node, head city, head node or None for returns)
    let mut cols: Vec<(usize, City, Option<usize>)> = Vec::new();
    let mut into_city: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut into_node: Vec<Vec<usize>> = vec![Vec::new(); net.num_nodes()];
    let mut out_node: Vec<Vec<usize>> = vec![Vec::new(); net.num_nodes()];
    for v in 0..net.num_nodes() {
        let node = net.node(v);
        if node.city == 0 && v != source {
            continue;
        }
        for j in inst.successors(node.city) {
            if node.city == 0 && j == 0 {
                continue;
            }
            let arc = inst.arc_index(node.city, j).unwrap();
            let reach = node.time + inst.tau_at(arc, node.time);
            if reach > inst.latest(j) {
                continue;
            }
            let head = if j == 0 {
                None
            } else {
                let at = reach.max(inst.earliest(j));
                match net
                    .city_nodes(j)
                    .find(|&w| net.node(w).time >= at && net.node(w).time <= inst.latest(j))
                {
                    Some(w) => Some(w),
                    None => continue,
                }
            };
            let col = model.add_column(inst.cost_at(arc, node.time), Tag::Arc(cols.len()));
            into_city[j].push(col);
            out_node[v].push(col);
            if let Some(w) = head {
                into_node[w].push(col);
            }
            cols.push((v, j, head));
        }
    }
    for city in 0..n {
        let terms = into_city[city].iter().map(|&c| (c, 1)).collect();
        model.add_row(terms, Sense::Eq, 1)?;
    }
    model.add_row(out_node[source].iter().map(|&c| (c, 1)).collect(), Sense::Eq, 1)?;
    for v in 0..net.num_nodes() {
        if net.node(v).city == 0 {
            continue;
        }
        let mut terms: Vec<(usize, i64)> = into_node[v].iter().map(|&c| (c, 1)).collect();
        terms.extend(out_node[v].iter().map(|&c| (c, -1)));
        if !terms.is_empty() {
            model.add_row(terms, Sense::Eq, 0)?;
        }
    }
    for cut in cuts {
        let set: HashSet<(City, City)> = cut.city_arcs.iter().copied().collect();
        let terms: Vec<(usize, i64)> = cols
            .iter()
            .enumerate()
            .filter(|(_, &(v, j, _))| set.contains(&(net.node(v).city, j)))
            .map(|(c, _)| (c, 1))
            .collect();
        if !terms.is_empty() {
            model.add_row(terms, Sense::Le, cut.rhs)?;
        }
    }
    let mut groups: BTreeMap<(City, City), Vec<usize>> = BTreeMap::new();
    for (c, &(v, j, _)) in cols.iter().enumerate() {
        groups.entry((net.node(v).city, j)).or_default().push(c);
    }
    for g in groups.into_values().filter(|g| g.len() > 1) {
        model.add_branch_group(g)?;
    }
    let result = solve(&model, opts)?;
    let mut tours = Vec::new();
    for entry in &result.pool {
        let mut next: Vec<Option<City>> = vec![None; n];
        for &c in &entry.support {
            let (v, j, _) = cols[c];
            next[net.node(v).city] = Some(j);
        }
        let mut seq = vec![0];
        let mut c = 0;
        while let Some(j) = next[c] {
            seq.push(j);
            if j == 0 || seq.len() > n + 1 {
                break;
            }
            c = j;
        }
        if seq.len() == n + 1 && !tours.contains(&seq) {
            tours.push(seq);
        }
    }
    Ok(tours)
}

/// Randomized cheapest feasible insertion over true times and costs.
pub fn heuristic_insertion(inst: &Instance, restarts: usize, seed: u64) -> Vec<Vec<City>> {
    let n = inst.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<City>> = Vec::new();
    for _ in 0..restarts {
        let mut order: Vec<City> = (1..n).collect();
        order.shuffle(&mut rng);
        let mut seq = vec![0, 0];
        let mut ok = true;
        for &c in &order {
            let mut best: Option<(Cost, usize)> = None;
            for pos in 1..seq.len() {
                let mut trial = seq.clone();
                trial.insert(pos, c);
                if let Ok(s) = schedule_sequence(inst, &trial) {
                    if best.is_none_or(|(b, _)| s.cost < b) {
                        best = Some((s.cost, pos));
                    }
                }
            }
            match best {
                Some((_, pos)) => seq.insert(pos, c),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && !out.contains(&seq) {
            out.push(seq);
        }
    }
    out
}

/// Runs both heuristics and returns the scheduled tours not yet in `known`.
pub fn primal_heuristics(
    net: &PartialNetwork,
    cuts: &[CityCut],
    known: &[Schedule],
    h1: &SolveOptions,
    restarts: usize,
    seed: u64,
) -> Result<Vec<Schedule>, DddError> {
    let inst = net.instance();
    let mut seqs = heuristic_overestimate(net, cuts, h1)?;
    if restarts > 0 {
        seqs.extend(heuristic_insertion(inst, restarts, seed));
    }
    let mut out: Vec<Schedule> = Vec::new();
    for seq in seqs {
        if known.iter().chain(out.iter()).any(|s| s.cities == seq) {
            continue;
        }
        if let Ok(s) = schedule_tour(inst, &seq) {
            out.push(s);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DddOptions {
    pub epsilon: Epsilon,
    pub time_limit: Option<Duration>,
    /// Refine with every harvested solution, not only the best one.
    pub refine_all: bool,
    pub heuristics: bool,
    pub insertion_restarts: usize,
    pub seed: u64,
    /// Branch-and-bound node budget of the overestimating heuristic.
    pub heuristic_nodes: u64,
    pub max_iterations: usize,
    pub bound: BoundStrategy,
    pub backend: Backend,
    /// Assert network properties after every refinement.
    pub check_network: bool,
    pub preprocess: bool,
}

impl Default for DddOptions {
    fn default() -> Self {
        DddOptions {
            epsilon: Epsilon::default(),
            time_limit: None,
            refine_all: true,
            heuristics: true,
            insertion_restarts: 8,
            seed: 0,
            heuristic_nodes: 2_000,
            max_iterations: 100_000,
            bound: BoundStrategy::Lp,
            backend: Backend::Internal,
            check_network: false,
            preprocess: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DddStatus {
    /// Gap within epsilon.
    Optimal,
    TimeLimit,
    IterationLimit,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lb: Cost,
    pub ub: Option<Cost>,
    /// Raw value of this iteration's model, if solved.
    pub model_value: Option<Cost>,
    pub gap: Option<f64>,
    pub nodes: usize,
    pub arcs: usize,
    pub paths: usize,
    pub cuts: usize,
    pub rows: usize,
    pub columns: usize,
    pub bb_nodes: u64,
    pub heuristic_ms: u128,
    pub model_ms: u128,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone)]
pub struct DddState {
    pub kind: FormulationKind,
    pub status: DddStatus,
    pub incumbents: Vec<Schedule>,
    pub lower_bound: Cost,
    pub cuts: Vec<CityCut>,
    pub trace: Vec<IterationRecord>,
    pub network_nodes: usize,
    pub network_arcs: usize,
    pub paths: usize,
    pub elapsed: Duration,
}

impl DddState {
    pub fn best(&self) -> Option<&Schedule> {
        self.incumbents.iter().min_by_key(|s| s.cost)
    }

    pub fn upper_bound(&self) -> Option<Cost> {
        self.best().map(|s| s.cost)
    }

    pub fn gap(&self) -> Option<f64> {
        relative_gap(self.lower_bound, self.upper_bound())
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn write_trace(&self, mut out: impl Write) -> std::io::Result<()> {
        for r in &self.trace {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Timed depot walk of a support: arcs in order from the source.
fn depot_walk(net: &PartialNetwork, arcs: &[ArcId]) -> Vec<ArcId> {
    let mut by_tail: std::collections::HashMap<usize, ArcId> = std::collections::HashMap::new();
    for &a in arcs {
        by_tail.entry(net.arc(a).tail).or_insert(a);
    }
    let mut walk = Vec::new();
    let mut v = net.source();
    while let Some(&a) = by_tail.get(&v) {
        walk.push(a);
        let arc = net.arc(a);
        if (arc.is_travel() && arc.to.city == 0) || walk.len() > arcs.len() {
            break;
        }
        v = arc.head;
    }
    walk
}

/// Inserts the nodes of the walk's cities at their true times, with a waiting
/// opportunity after each true departure.
fn insert_true_walk(net: &mut PartialNetwork, walk: &[(City, City, Time)]) -> Result<MutationReport, NetworkError> {
    let inst = net.instance().clone();
    let mut report = MutationReport::default();
    let mut t = inst.depot_open();
    for &(i, j, planned) in walk {
        let depart = if inst.waiting_allowed(i) { t.max(planned) } else { t };
        if depart > inst.horizon() {
            break;
        }
        report.merge(net.insert_node(i, depart)?);
        if inst.waiting_allowed(i) && depart < inst.horizon().min(inst.latest(i)) {
            report.merge(net.insert_node(i, depart + 1)?);
        }
        let Some(idx) = inst.arc_index(i, j) else { break };
        let reach = depart + inst.tau_at(idx, depart);
        if reach > inst.latest(j) || j == 0 {
            break;
        }
        t = reach.max(inst.earliest(j));
        report.merge(net.insert_node(j, t)?);
    }
    Ok(report)
}

#[derive(Default)]
struct CutPool {
    list: Vec<CityCut>,
    keys: HashSet<Vec<(City, City)>>,
}

impl CutPool {
    fn add(&mut self, cut: CityCut) {
        if self.keys.insert(cut.key()) {
            self.list.push(cut);
        }
    }

    /// Records a scheduled tour and excludes its city arcs from later models.
    fn add_incumbent(&mut self, s: Schedule, incumbents: &mut Vec<Schedule>) {
        self.add(CityCut::new(CutKind::ExcludeTour, path_arcs(&s.cities)));
        if !incumbents.iter().any(|k| k.cities == s.cities) {
            incumbents.push(s);
        }
    }
}

struct Progress {
    nodes: usize,
    paths: usize,
    cuts: usize,
    lb: Cost,
    ub: Option<Cost>,
}

/// Runs the loop on `inst` with the chosen lower-bound formulation.
pub fn run(inst: &Instance, kind: FormulationKind, opts: &DddOptions) -> Result<DddState, DddError> {
    run_with_callback(inst, kind, opts, |_| {})
}

pub fn run_with_callback(
    inst: &Instance,
    kind: FormulationKind,
    opts: &DddOptions,
    mut on_iteration: impl FnMut(&IterationRecord),
) -> Result<DddState, DddError> {
    assert!(
        matches!(kind, FormulationKind::PathArc | FormulationKind::Z | FormulationKind::ZAgg | FormulationKind::BaseLb),
        "run needs a lower-bound formulation"
    );
    let start = Instant::now();
    let deadline = opts.time_limit.map(|d| start + d);
    let remaining = || deadline.map(|d| d.saturating_duration_since(Instant::now()));

    let work = if opts.preprocess {
        preprocess(inst).map_err(|_| DddError::ProvenInfeasible)?.0
    } else {
        inst.clone()
    };
    let mut net = PartialNetwork::initial(&work);
    net.set_self_check(opts.check_network);
    let mut pool = PathPool::default();
    let mut cuts = CutPool::default();
    let mut incumbents: Vec<Schedule> = Vec::new();
    let mut lb: Cost = 0;
    let mut trace = Vec::new();
    let mut status = DddStatus::IterationLimit;

    let ub_of = |incumbents: &[Schedule]| incumbents.iter().map(|s| s.cost).min();

    for iteration in 0..opts.max_iterations {
        if remaining().is_some_and(|r| r.is_zero()) {
            status = DddStatus::TimeLimit;
            break;
        }
        let before = Progress {
            nodes: net.num_nodes(),
            paths: pool.len(),
            cuts: cuts.list.len(),
            lb,
            ub: ub_of(&incumbents),
        };

        let h_start = Instant::now();
        if opts.heuristics {
            let h1 = SolveOptions {
                time_limit: remaining(),
                node_limit: Some(opts.heuristic_nodes),
                pool_size: 4,
                bound: opts.bound,
                backend: opts.backend.clone(),
                ..SolveOptions::default()
            };
            let restarts = if iteration == 0 { opts.insertion_restarts } else { 0 };
            let found = primal_heuristics(&net, &cuts.list, &incumbents, &h1, restarts, opts.seed)?;
            for s in found {
                cuts.add_incumbent(s, &mut incumbents);
            }
        }

        let heuristic_ms = h_start.elapsed().as_millis();
        let m_start = Instant::now();
        let mut lbm = build_lb_model(kind, &net, &pool);
        let is_path = kind == FormulationKind::PathArc;
        for cut in &cuts.list {
            lbm.add_city_arc_limit(&net, is_path.then_some(&pool), &cut.city_arcs, cut.rhs);
        }
        let ub = ub_of(&incumbents);
        let sopts = SolveOptions {
            time_limit: remaining(),
            cutoff: ub,
            bound: opts.bound,
            backend: opts.backend.clone(),
            ..SolveOptions::default()
        };
        let result = solve(&lbm.model, &sopts)?;
        let model_ms = m_start.elapsed().as_millis();
        let model_value = match result.status {
            Status::Optimal => result.best_value,
            _ => None,
        };
        let bound = match result.status {
            Status::Optimal => result.best_value,
            Status::Infeasible | Status::CutoffExceeded => match ub {
                Some(u) => Some(u),
                None => return Err(DddError::ProvenInfeasible),
            },
            Status::Feasible { .. } | Status::TimeLimit => Some(result.dual_bound).filter(|&b| b > i64::MIN),
        };
        if let Some(b) = bound {
            let capped = match ub {
                Some(u) => b.min(u),
                None => b,
            };
            lb = lb.max(capped);
        }

        let supports: Vec<_> = if opts.refine_all {
            result.pool.iter().collect()
        } else {
            result.pool.iter().take(1).collect()
        };
        let mut report = MutationReport::default();
        for entry in supports {
            let sel = lbm.decode(&entry.support);
            let arcs = sel.all_arcs(is_path.then_some(&pool));
            let city_arcs: Vec<(City, City)> = arcs
                .iter()
                .map(|&a| net.arc(a))
                .filter(|a| a.is_travel())
                .map(|a| (a.from.city, a.to.city))
                .collect();
            let verdict = check_solution(&work, &city_arcs)?;
            if let Verdict::FeasibleTour(seq) = &verdict {
                if let Ok(s) = schedule_tour(&work, seq) {
                    cuts.add_incumbent(s, &mut incumbents);
                }
            } else {
                for cut in make_cuts(&verdict) {
                    cuts.add(cut);
                }
            }

            let walk = depot_walk(&net, &arcs);
            let planned: Vec<(City, City, Time)> = walk
                .iter()
                .map(|&a| net.arc(a))
                .filter(|a| a.is_travel())
                .map(|a| (a.from.city, a.to.city, a.from.time))
                .collect();
            let mut timed: Vec<TimedNode> = vec![net.node(net.source())];
            timed.extend(walk.iter().map(|&a| net.arc(a).to));
            for &a in &arcs {
                if net.arc(a).is_too_short() {
                    report.merge(net.lengthen_arc(a)?);
                }
            }
            report.merge(insert_true_walk(&mut net, &planned)?);
            if kind == FormulationKind::PathArc {
                report.merge(add_paths(&mut net, &mut pool, &timed)?);
            }
        }

        let ub = ub_of(&incumbents);
        if let Some(u) = ub {
            if lb > u {
                return Err(DddError::BoundCrossed { lb, ub: u });
            }
        }
        let record = IterationRecord {
            iteration,
            lb,
            ub,
            model_value,
            gap: relative_gap(lb, ub),
            nodes: net.num_nodes(),
            arcs: net.num_arcs(),
            paths: pool.len(),
            cuts: cuts.list.len(),
            rows: lbm.model.num_rows(),
            columns: lbm.model.num_columns(),
            bb_nodes: result.nodes,
            heuristic_ms,
            model_ms,
            elapsed_ms: start.elapsed().as_millis(),
        };
        on_iteration(&record);
        trace.push(record);

        if let Some(u) = ub {
            if opts.epsilon.closed(lb, u) {
                status = DddStatus::Optimal;
                break;
            }
        }
        if matches!(result.status, Status::TimeLimit | Status::Feasible { .. })
            && remaining().is_some_and(|r| r.is_zero())
        {
            status = DddStatus::TimeLimit;
            break;
        }
        let stalled = net.num_nodes() == before.nodes
            && pool.len() == before.paths
            && cuts.list.len() == before.cuts
            && lb == before.lb
            && ub == before.ub;
        if stalled {
            return Err(DddError::Stalled(iteration));
        }
    }

    Ok(DddState {
        kind,
        status,
        incumbents,
        lower_bound: lb,
        cuts: cuts.list,
        trace,
        network_nodes: net.num_nodes(),
        network_arcs: net.num_arcs(),
        paths: pool.len(),
        elapsed: start.elapsed(),
    })
}

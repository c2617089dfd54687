//! One record per (instance, solver) run, shared by the CLI, the benchmark
//! harness and the Python bindings.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::ddd::{self, relative_gap, DddError, DddOptions, DddStatus, Epsilon};
use crate::formulations::{build_full_model, schedule_tour, FormulationKind, Schedule};
use crate::instance::{City, Cost, Instance, WaitingMode};
use crate::mip::{self, Backend, SolveOptions, Status};
use crate::oracle::{self, OracleError};
use crate::suites::{small_config, SuiteEntry};
use crate::timenet::PartialNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Ddd(FormulationKind),
    /// MIP on the fully time-expanded network.
    Full,
    Oracle,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Ddd(FormulationKind::PathArc) => "path",
            Solver::Ddd(FormulationKind::Z) => "z",
            Solver::Ddd(FormulationKind::ZAgg) => "z-agg",
            Solver::Ddd(k) => k.name(),
            Solver::Full => "full",
            Solver::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Solver::Full),
            "oracle" => Ok(Solver::Oracle),
            other => match other.parse::<FormulationKind>()? {
                k @ (FormulationKind::PathArc | FormulationKind::Z | FormulationKind::ZAgg) => Ok(Solver::Ddd(k)),
                k => Err(format!("{k} is not a solver")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    /// Within the requested gap.
    Optimal,
    TimeLimit,
    IterationLimit,
    Infeasible,
    Error,
}

impl RunStatus {
    /// 0 solved, 2 limit reached, 3 infeasible, 1 anything else.
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Optimal => 0,
            RunStatus::TimeLimit | RunStatus::IterationLimit => 2,
            RunStatus::Infeasible => 3,
            RunStatus::Error => 1,
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Optimal => "optimal",
            RunStatus::TimeLimit => "time-limit",
            RunStatus::IterationLimit => "iteration-limit",
            RunStatus::Infeasible => "infeasible",
            RunStatus::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub instance: String,
    pub formulation: String,
    pub status: RunStatus,
    pub lb: Option<Cost>,
    pub ub: Option<Cost>,
    /// `(ub - lb) / ub`, absent without an incumbent.
    pub gap: Option<f64>,
    pub iterations: usize,
    pub nodes: usize,
    pub arcs: usize,
    pub paths: usize,
    pub wall_ms: u64,
    pub error: Option<String>,
}

impl RunRecord {
    fn new(instance: &str, solver: Solver) -> Self {
        RunRecord {
            instance: instance.to_string(),
            formulation: solver.name().to_string(),
            status: RunStatus::Error,
            lb: None,
            ub: None,
            gap: None,
            iterations: 0,
            nodes: 0,
            arcs: 0,
            paths: 0,
            wall_ms: 0,
            error: None,
        }
    }

    fn bounds(&mut self, lb: Option<Cost>, ub: Option<Cost>) {
        self.lb = lb;
        self.ub = ub;
        self.gap = lb.and_then(|lb| relative_gap(lb, ub));
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub epsilon: Epsilon,
    pub time_limit: Option<Duration>,
    pub backend: Backend,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            epsilon: Epsilon::default(),
            time_limit: Some(Duration::from_secs(60)),
            backend: Backend::Internal,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub schedule: Option<Schedule>,
    pub trace: Vec<ddd::IterationRecord>,
}

pub fn run_solver(name: &str, inst: &Instance, solver: Solver, opts: &RunOptions) -> RunOutcome {
    let start = Instant::now();
    let mut out = match solver {
        Solver::Ddd(kind) => run_ddd(name, inst, kind, opts),
        Solver::Full => run_full(name, inst, opts),
        Solver::Oracle => run_oracle(name, inst),
    };
    out.record.wall_ms = start.elapsed().as_millis() as u64;
    out
}

fn run_ddd(name: &str, inst: &Instance, kind: FormulationKind, opts: &RunOptions) -> RunOutcome {
    let mut record = RunRecord::new(name, Solver::Ddd(kind));
    let dopts = DddOptions {
        epsilon: opts.epsilon,
        time_limit: opts.time_limit,
        backend: opts.backend.clone(),
        ..Default::default()
    };
    match ddd::run(inst, kind, &dopts) {
        Ok(state) => {
            record.status = match state.status {
                DddStatus::Optimal => RunStatus::Optimal,
                DddStatus::TimeLimit => RunStatus::TimeLimit,
                DddStatus::IterationLimit => RunStatus::IterationLimit,
            };
            record.bounds(Some(state.lower_bound), state.upper_bound());
            record.iterations = state.iterations();
            record.nodes = state.network_nodes;
            record.arcs = state.network_arcs;
            record.paths = state.paths;
            RunOutcome {
                schedule: state.best().cloned(),
                trace: state.trace,
                record,
            }
        }
        Err(DddError::ProvenInfeasible) => {
            record.status = RunStatus::Infeasible;
            RunOutcome {
                record,
                schedule: None,
                trace: Vec::new(),
            }
        }
        Err(e) => {
            record.error = Some(e.to_string());
            RunOutcome {
                record,
                schedule: None,
                trace: Vec::new(),
            }
        }
    }
}

fn run_full(name: &str, inst: &Instance, opts: &RunOptions) -> RunOutcome {
    let mut record = RunRecord::new(name, Solver::Full);
    let mut out = RunOutcome {
        record: record.clone(),
        schedule: None,
        trace: Vec::new(),
    };
    let net = match PartialNetwork::full(inst) {
        Ok(net) => net,
        Err(e) => {
            out.record.error = Some(e.to_string());
            return out;
        }
    };
    record.nodes = net.num_nodes();
    record.arcs = net.num_arcs();
    record.iterations = 1;
    let lb = build_full_model(&net);
    let sopts = SolveOptions {
        time_limit: opts.time_limit,
        pool_size: 1,
        backend: opts.backend.clone(),
        ..Default::default()
    };
    let result = match mip::solve(&lb.model, &sopts) {
        Ok(r) => r,
        Err(e) => {
            record.error = Some(e.to_string());
            out.record = record;
            return out;
        }
    };
    match result.status {
        Status::Infeasible | Status::CutoffExceeded => record.status = RunStatus::Infeasible,
        Status::TimeLimit => {
            record.status = RunStatus::TimeLimit;
            record.lb = Some(result.dual_bound);
        }
        Status::Optimal | Status::Feasible { .. } => {
            let best = result.best().expect("feasible result has a solution");
            let ub = best.value;
            record.status = if opts.epsilon.closed(result.dual_bound.min(ub), ub) {
                RunStatus::Optimal
            } else {
                RunStatus::TimeLimit
            };
            record.bounds(Some(result.dual_bound.min(ub)), Some(ub));
            let sel = lb.decode(&best.support);
            let arcs: Vec<(City, City)> = sel
                .arcs
                .iter()
                .map(|&a| net.arc(a))
                .filter(|a| a.is_travel())
                .map(|a| (a.from.city, a.to.city))
                .collect();
            out.schedule = city_sequence(inst.n(), &arcs).and_then(|seq| schedule_tour(inst, &seq).ok());
        }
    }
    out.record = record;
    out
}

/// Depot-rooted city sequence of a Hamiltonian cycle given by its arcs.
fn city_sequence(n: usize, arcs: &[(City, City)]) -> Option<Vec<City>> {
    let mut succ = vec![None; n];
    for &(i, j) in arcs {
        succ[i] = Some(j);
    }
    let mut seq = vec![0];
    let mut at = 0;
    for _ in 0..n {
        at = succ[at]?;
        seq.push(at);
        if at == 0 {
            break;
        }
    }
    (seq.len() == n + 1 && at == 0).then_some(seq)
}

fn run_oracle(name: &str, inst: &Instance) -> RunOutcome {
    let mut record = RunRecord::new(name, Solver::Oracle);
    let mut schedule = None;
    match oracle::solve_exact(inst, true) {
        Ok(sol) => {
            record.status = RunStatus::Optimal;
            record.bounds(Some(sol.cost), Some(sol.cost));
            record.iterations = 1;
            schedule = Some(sol.schedule);
        }
        Err(OracleError::Infeasible) => record.status = RunStatus::Infeasible,
        Err(e) => record.error = Some(e.to_string()),
    }
    RunOutcome {
        record,
        schedule,
        trace: Vec::new(),
    }
}

/// Seeded instances for oracle cross-checks: `n` cycles through
/// `[min(4, n_max), n_max]`, generic random costs.
pub fn validation_suite(n_max: usize, seeds: usize, waiting: WaitingMode) -> Vec<SuiteEntry> {
    let n_max = n_max.max(2);
    let n_min = n_max.min(4);
    let mut out = Vec::with_capacity(seeds);
    let mut seed = 0u64;
    while out.len() < seeds {
        let n = n_min + (seed as usize) % (n_max - n_min + 1);
        let mut config = small_config(n, waiting);
        config.cost = crate::instance::CostMode::Random;
        let entry = SuiteEntry {
            name: format!("validate-{waiting}-{seed}"),
            seed,
            config,
        };
        seed += 1;
        if entry.instance().is_ok() {
            out.push(entry);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub instance: String,
    pub seed: u64,
    pub solver: String,
    pub expected: Option<Cost>,
    pub got: Option<Cost>,
    pub note: Option<String>,
}

/// Runs every solver at zero gap and compares its value to the oracle.
pub fn cross_check(entry: &SuiteEntry, solvers: &[Solver], opts: &RunOptions) -> Vec<Mismatch> {
    let inst = match entry.instance() {
        Ok(i) => i,
        Err(e) => {
            return vec![Mismatch {
                instance: entry.name.clone(),
                seed: entry.seed,
                solver: "generator".into(),
                expected: None,
                got: None,
                note: Some(e.to_string()),
            }]
        }
    };
    let exact = run_solver(&entry.name, &inst, Solver::Oracle, opts).record;
    let opts = RunOptions {
        epsilon: Epsilon::ZERO,
        ..opts.clone()
    };
    let mut out = Vec::new();
    for &s in solvers {
        let r = run_solver(&entry.name, &inst, s, &opts).record;
        let agrees = r.status == exact.status && r.ub == exact.ub;
        if !agrees {
            out.push(Mismatch {
                instance: entry.name.clone(),
                seed: entry.seed,
                solver: s.name().into(),
                expected: exact.ub,
                got: r.ub,
                note: r.error.or_else(|| Some(r.status.to_string())),
            });
        }
    }
    out
}

/// Writes records as JSON lines.
pub fn write_records(records: &[RunRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub formulation: String,
    pub runs: usize,
    pub solved: usize,
    /// Mean gap over unsolved runs that have an incumbent.
    pub mean_unsolved_gap: Option<f64>,
}

/// Solved counts per formulation, in first-seen order.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut gaps: Vec<Vec<f64>> = Vec::new();
    for r in records {
        let k = match rows.iter().position(|s| s.formulation == r.formulation) {
            Some(k) => k,
            None => {
                rows.push(SummaryRow {
                    formulation: r.formulation.clone(),
                    runs: 0,
                    solved: 0,
                    mean_unsolved_gap: None,
                });
                gaps.push(Vec::new());
                rows.len() - 1
            }
        };
        rows[k].runs += 1;
        if r.status == RunStatus::Optimal {
            rows[k].solved += 1;
        } else if let Some(g) = r.gap {
            gaps[k].push(g);
        }
    }
    for (row, g) in rows.iter_mut().zip(gaps) {
        if !g.is_empty() {
            row.mean_unsolved_gap = Some(g.iter().sum::<f64>() / g.len() as f64);
        }
    }
    rows
}

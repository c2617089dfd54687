//! Solver-agnostic 0-1 linear models with integer data, and an exact
//! branch-and-bound for desk-scale instances.
//!
//! The default search bounds nodes with LP relaxations solved by `microlp`
//! (dual simplex warm starts after each fixing). A purely combinatorial
//! search (fixed-cost bound plus row propagation) is kept for cross-checks and
//! as a fallback. Every incumbent is re-verified in exact integer arithmetic.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, SolveOutcome, Variable};
use serde::Serialize;
use thiserror::Error;

pub type ColumnId = usize;

/// What a column stands for in the model that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Tag {
    None,
    /// `x_a` of a timed arc.
    Arc(usize),
    /// `z_a` of a timed arc.
    ArcZ(usize),
    /// `x_p` of a pool path.
    Path(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub objective: i64,
    pub tag: Tag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub terms: Vec<(ColumnId, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

impl Row {
    /// Terms are sorted by column, repeated columns merged and zeros dropped.
    pub fn new(mut terms: Vec<(ColumnId, i64)>, sense: Sense, rhs: i64) -> Self {
        terms.sort_unstable_by_key(|&(c, _)| c);
        let mut merged: Vec<(ColumnId, i64)> = Vec::with_capacity(terms.len());
        for (c, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += a,
                _ => merged.push((c, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0);
        Row { terms: merged, sense, rhs }
    }

    fn holds(&self, lhs: i64) -> bool {
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Eq => lhs == self.rhs,
            Sense::Ge => lhs >= self.rhs,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MipError {
    #[error("row {row} references unknown column {column}")]
    UnknownColumn { row: usize, column: ColumnId },
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("external solver: {0}")]
    External(String),
}

/// Binary minimization model with nonnegative integer objective.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    columns: Vec<Column>,
    rows: Vec<Row>,
    groups: Vec<Vec<ColumnId>>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_column(&mut self, objective: i64, tag: Tag) -> ColumnId {
        self.columns.push(Column { objective, tag });
        self.columns.len() - 1
    }

    pub fn add_row(&mut self, terms: Vec<(ColumnId, i64)>, sense: Sense, rhs: i64) -> Result<usize, MipError> {
        let row = self.rows.len();
        if let Some(&(column, _)) = terms.iter().find(|(c, _)| *c >= self.columns.len()) {
            return Err(MipError::UnknownColumn { row, column });
        }
        self.rows.push(Row::new(terms, sense, rhs));
        Ok(row)
    }

    /// Appends rows; nothing is added if any row is invalid.
    pub fn add_rows(&mut self, rows: Vec<Row>) -> Result<(), MipError> {
        for (k, r) in rows.iter().enumerate() {
            if let Some(&(column, _)) = r.terms.iter().find(|(c, _)| *c >= self.columns.len()) {
                return Err(MipError::UnknownColumn {
                    row: self.rows.len() + k,
                    column,
                });
            }
        }
        self.rows.extend(rows);
        Ok(())
    }

    /// Branching hint: the search may split on `Σ group <= k` versus `>= k+1`
    /// before splitting single columns. Has no effect on the feasible set.
    pub fn add_branch_group(&mut self, group: Vec<ColumnId>) -> Result<(), MipError> {
        if let Some(&column) = group.iter().find(|&&c| c >= self.columns.len()) {
            return Err(MipError::UnknownColumn { row: usize::MAX, column });
        }
        self.groups.push(group);
        Ok(())
    }

    pub fn branch_groups(&self) -> &[Vec<ColumnId>] {
        &self.groups
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), MipError> {
        for (row, r) in self.rows.iter().enumerate() {
            if let Some(&(column, _)) = r.terms.iter().find(|(c, _)| *c >= self.columns.len()) {
                return Err(MipError::UnknownColumn { row, column });
            }
        }
        if let Some(c) = self.columns.iter().position(|c| c.objective < 0) {
            return Err(MipError::MalformedModel(format!("column {c} has a negative objective")));
        }
        Ok(())
    }

    /// Objective of a 0-1 assignment given by its support, or `None` if a row fails.
    pub fn evaluate(&self, support: &[ColumnId]) -> Option<i64> {
        let mut on = vec![false; self.columns.len()];
        for &c in support {
            on[c] = true;
        }
        self.evaluate_dense(&on)
    }

    fn evaluate_dense(&self, on: &[bool]) -> Option<i64> {
        for r in &self.rows {
            let lhs: i64 = r.terms.iter().filter(|(c, _)| on[*c]).map(|(_, a)| a).sum();
            if !r.holds(lhs) {
                return None;
            }
        }
        Some(
            self.columns
                .iter()
                .zip(on)
                .filter(|(_, &v)| v)
                .map(|(c, _)| c.objective)
                .sum(),
        )
    }

    /// CPLEX LP text. Columns are named `c<id>`, rows `r<id>`.
    pub fn to_lp_string(&self) -> String {
        fn push_terms(out: &mut String, terms: impl Iterator<Item = (ColumnId, i64)>) {
            let mut first = true;
            let mut width = 0;
            for (c, a) in terms {
                let sign = if a < 0 { "-" } else if first { "" } else { "+" };
                let piece = if sign.is_empty() {
                    format!(" {} c{c}", a.abs())
                } else {
                    format!(" {sign} {} c{c}", a.abs())
                };
                width += piece.len();
                if width > 200 {
                    out.push_str("\n  ");
                    width = piece.len();
                }
                out.push_str(&piece);
                first = false;
            }
            if first {
                out.push_str(" 0 c0");
            }
        }
        let mut out = String::from("\\ binary model\nMinimize\n obj:");
        push_terms(
            &mut out,
            self.columns.iter().enumerate().map(|(c, col)| (c, col.objective)),
        );
        out.push_str("\nSubject To\n");
        for (k, r) in self.rows.iter().enumerate() {
            let _ = write!(out, " r{k}:");
            push_terms(&mut out, r.terms.iter().copied());
            let op = match r.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", r.rhs);
        }
        out.push_str("Binaries\n");
        for c in 0..self.columns.len() {
            let _ = write!(out, " c{c}");
            if c % 16 == 15 {
                out.push('\n');
            }
        }
        out.push_str("\nEnd\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundStrategy {
    /// LP relaxation bounds.
    Lp,
    /// Sum of fixed objective plus row propagation.
    Combinatorial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Internal,
    /// Program invoked as `<program> <model.lp> <solution.txt>`.
    External(String),
}

impl Backend {
    /// `TDTSP_SOLVER=external` selects the program in `TDTSP_EXTERNAL_SOLVER`.
    pub fn from_env() -> Result<Backend, MipError> {
        match std::env::var("TDTSP_SOLVER").as_deref() {
            Err(_) | Ok("") | Ok("internal") => Ok(Backend::Internal),
            Ok("external") => std::env::var("TDTSP_EXTERNAL_SOLVER")
                .map(Backend::External)
                .map_err(|_| MipError::External("TDTSP_EXTERNAL_SOLVER is not set".into())),
            Ok(other) => Err(MipError::External(format!("unknown TDTSP_SOLVER value \"{other}\""))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    /// Only solutions strictly below the cutoff are of interest.
    pub cutoff: Option<i64>,
    pub pool_size: usize,
    pub node_limit: Option<u64>,
    pub bound: BoundStrategy,
    pub backend: Backend,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: None,
            cutoff: None,
            pool_size: 32,
            node_limit: None,
            bound: BoundStrategy::Lp,
            backend: Backend::Internal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Status {
    Optimal,
    /// A limit was hit with an incumbent; `gap = (best - bound) / best`.
    Feasible { gap: f64 },
    Infeasible,
    /// A limit was hit without an incumbent.
    TimeLimit,
    /// Every solution costs at least the cutoff.
    CutoffExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PoolEntry {
    pub value: i64,
    pub support: Vec<ColumnId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub status: Status,
    pub best_value: Option<i64>,
    /// Valid lower bound on the model optimum; `i64::MAX` when infeasible.
    pub dual_bound: i64,
    /// Harvested solutions, best first.
    pub pool: Vec<PoolEntry>,
    pub nodes: u64,
}

impl SolveResult {
    pub fn best(&self) -> Option<&PoolEntry> {
        self.pool.first()
    }
}

pub fn solve(model: &Model, opts: &SolveOptions) -> Result<SolveResult, MipError> {
    model.validate()?;
    match &opts.backend {
        Backend::Internal => Ok(solve_internal(model, opts)),
        Backend::External(program) => solve_external(model, opts, program),
    }
}

pub fn add_rows(model: &mut Model, rows: Vec<Row>) -> Result<(), MipError> {
    model.add_rows(rows)
}

/// Row propagation on partial 0-1 assignments.
struct Propagator<'a> {
    model: &'a Model,
    col_rows: Vec<Vec<usize>>,
}

#[derive(Debug)]
struct Conflict;

impl<'a> Propagator<'a> {
    fn new(model: &'a Model) -> Self {
        let mut col_rows = vec![Vec::new(); model.num_columns()];
        for (r, row) in model.rows.iter().enumerate() {
            for &(c, _) in &row.terms {
                col_rows[c].push(r);
            }
        }
        Propagator { model, col_rows }
    }

    /// Residual rhs and activity range of a row under `fixed`.
    fn activity(&self, row: &Row, fixed: &[Option<bool>]) -> (i64, i64, i64) {
        let (mut rhs, mut lo, mut hi) = (row.rhs, 0, 0);
        for &(c, a) in &row.terms {
            match fixed[c] {
                Some(true) => rhs -= a,
                Some(false) => {}
                None => {
                    if a < 0 {
                        lo += a
                    } else {
                        hi += a
                    }
                }
            }
        }
        (rhs, lo, hi)
    }

    /// Fixes implied values until a fixpoint; `queue` holds rows to revisit.
    fn run(&self, fixed: &mut [Option<bool>], trail: &mut Vec<ColumnId>, mut queue: Vec<usize>) -> Result<(), Conflict> {
        let mut queued = vec![false; self.model.rows.len()];
        for &r in &queue {
            queued[r] = true;
        }
        while let Some(r) = queue.pop() {
            queued[r] = false;
            let row = &self.model.rows[r];
            let (rhs, lo, hi) = self.activity(row, fixed);
            let upper = matches!(row.sense, Sense::Le | Sense::Eq);
            let lower = matches!(row.sense, Sense::Ge | Sense::Eq);
            if (upper && lo > rhs) || (lower && hi < rhs) {
                return Err(Conflict);
            }
            for &(c, a) in &row.terms {
                if fixed[c].is_some() {
                    continue;
                }
                let mut forced = None;
                if upper {
                    if a > 0 && lo + a > rhs {
                        forced = Some(false);
                    } else if a < 0 && lo - a > rhs {
                        forced = Some(true);
                    }
                }
                if lower && forced.is_none() {
                    if a > 0 && hi - a < rhs {
                        forced = Some(true);
                    } else if a < 0 && hi + a < rhs {
                        forced = Some(false);
                    }
                }
                if let Some(v) = forced {
                    fixed[c] = Some(v);
                    trail.push(c);
                    for &r2 in &self.col_rows[c] {
                        if !queued[r2] {
                            queued[r2] = true;
                            queue.push(r2);
                        }
                    }
                }
            }
            // Recheck this row with the new fixings.
            let (rhs, lo, hi) = self.activity(row, fixed);
            if (upper && lo > rhs) || (lower && hi < rhs) {
                return Err(Conflict);
            }
        }
        Ok(())
    }

    fn all_rows(&self) -> Vec<usize> {
        (0..self.model.rows.len()).collect()
    }
}

struct Search<'a> {
    model: &'a Model,
    opts: &'a SolveOptions,
    start: Instant,
    nodes: u64,
    best: Option<i64>,
    pool: Vec<PoolEntry>,
    seen: HashSet<Vec<ColumnId>>,
    pruned_by_bound: bool,
    hit_limit: bool,
}

impl<'a> Search<'a> {
    fn new(model: &'a Model, opts: &'a SolveOptions) -> Self {
        Search {
            model,
            opts,
            start: Instant::now(),
            nodes: 0,
            best: None,
            pool: Vec::new(),
            seen: HashSet::new(),
            pruned_by_bound: false,
            hit_limit: false,
        }
    }

    /// Solutions must be strictly below this value.
    fn limit(&self) -> i64 {
        match (self.best, self.opts.cutoff) {
            (Some(b), Some(c)) => b.min(c),
            (Some(b), None) => b,
            (None, Some(c)) => c,
            (None, None) => i64::MAX,
        }
    }

    fn out_of_budget(&mut self) -> bool {
        let over_time = self
            .opts
            .time_limit
            .is_some_and(|t| self.start.elapsed() >= t);
        let over_nodes = self.opts.node_limit.is_some_and(|n| self.nodes >= n);
        if over_time || over_nodes {
            self.hit_limit = true;
        }
        self.hit_limit
    }

    fn prune(&mut self, bound: i64) -> bool {
        if bound >= self.limit() {
            self.pruned_by_bound = true;
            true
        } else {
            false
        }
    }

    /// Records a verified 0-1 solution.
    fn offer(&mut self, on: &[bool]) -> bool {
        let Some(value) = self.model.evaluate_dense(on) else {
            return false;
        };
        let cutoff_ok = self.opts.cutoff.is_none_or(|c| value < c);
        if !cutoff_ok {
            self.pruned_by_bound = true;
            return true;
        }
        let support: Vec<ColumnId> = (0..on.len()).filter(|&c| on[c]).collect();
        if self.seen.insert(support.clone()) {
            self.pool.push(PoolEntry { value, support });
            self.pool.sort_by_key(|e| e.value);
            self.pool.truncate(self.opts.pool_size.max(1));
        }
        if self.best.is_none_or(|b| value < b) {
            self.best = Some(value);
        }
        true
    }

    fn finish(self, open_bound: Option<i64>) -> SolveResult {
        let nodes = self.nodes;
        let (status, dual_bound) = match (self.best, self.hit_limit) {
            (Some(best), false) => (Status::Optimal, best),
            (Some(best), true) => {
                let bound = open_bound.map_or(best, |b| b.min(best));
                let gap = if best > 0 {
                    (best - bound) as f64 / best as f64
                } else {
                    0.0
                };
                if bound >= best {
                    (Status::Optimal, best)
                } else {
                    (Status::Feasible { gap }, bound)
                }
            }
            (None, true) => {
                let cut = self.opts.cutoff.unwrap_or(i64::MAX);
                (Status::TimeLimit, open_bound.map_or(cut, |b| b.min(cut)))
            }
            (None, false) => {
                if self.pruned_by_bound {
                    (Status::CutoffExceeded, self.opts.cutoff.unwrap_or(i64::MAX))
                } else {
                    (Status::Infeasible, i64::MAX)
                }
            }
        };
        SolveResult {
            status,
            best_value: self.best,
            dual_bound,
            pool: self.pool,
            nodes,
        }
    }
}

fn solve_internal(model: &Model, opts: &SolveOptions) -> SolveResult {
    let mut search = Search::new(model, opts);
    let prop = Propagator::new(model);
    let mut fixed = vec![None; model.num_columns()];
    let mut trail = Vec::new();
    if prop.run(&mut fixed, &mut trail, prop.all_rows()).is_err() {
        return search.finish(None);
    }
    match opts.bound {
        BoundStrategy::Combinatorial => {
            let open = combinatorial(&mut search, &prop, fixed);
            search.finish(open)
        }
        BoundStrategy::Lp => match lp_search(&mut search, &prop, &fixed) {
            Ok(open) => search.finish(open),
            Err(LpFailure) => {
                let mut fresh = Search::new(model, opts);
                fresh.start = search.start;
                let open = combinatorial(&mut fresh, &prop, fixed);
                fresh.finish(open)
            }
        },
    }
}

/// Depth-first search with propagation and the fixed-cost bound. Returns the
/// smallest bound among unexplored nodes when a limit stops the search.
fn combinatorial(search: &mut Search, prop: &Propagator, root: Vec<Option<bool>>) -> Option<i64> {
    let model = search.model;
    let fixed_cost = |fixed: &[Option<bool>]| -> i64 {
        fixed
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == Some(true))
            .map(|(c, _)| model.columns[c].objective)
            .sum()
    };
    let mut stack: Vec<(Vec<Option<bool>>, i64)> = vec![(root.clone(), fixed_cost(&root))];
    while let Some((fixed, bound)) = stack.pop() {
        if search.prune(bound) {
            continue;
        }
        if search.out_of_budget() {
            stack.push((fixed, bound));
            return stack.iter().map(|s| s.1).min();
        }
        search.nodes += 1;
        // Branch on the free column in the most unsatisfied rows.
        let mut score = vec![0usize; model.num_columns()];
        for row in &model.rows {
            let (rhs, lo, hi) = prop.activity(row, &fixed);
            let settled = match row.sense {
                Sense::Le => hi <= rhs,
                Sense::Ge => lo >= rhs,
                Sense::Eq => lo == rhs && hi == rhs,
            };
            if !settled {
                for &(c, _) in &row.terms {
                    if fixed[c].is_none() {
                        score[c] += 1;
                    }
                }
            }
        }
        let branch = (0..model.num_columns())
            .filter(|&c| fixed[c].is_none())
            .max_by_key(|&c| (score[c], std::cmp::Reverse(c)));
        let Some(col) = branch else {
            let on: Vec<bool> = fixed.iter().map(|v| *v == Some(true)).collect();
            search.offer(&on);
            continue;
        };
        if score[col] == 0 {
            // Every row is settled: free columns stay at 0 since costs are nonnegative.
            let on: Vec<bool> = fixed.iter().map(|v| *v == Some(true)).collect();
            search.offer(&on);
            continue;
        }
        for value in [false, true] {
            let mut child = fixed.clone();
            child[col] = Some(value);
            let mut trail = Vec::new();
            if prop.run(&mut child, &mut trail, prop.col_rows[col].clone()).is_ok() {
                let b = fixed_cost(&child);
                if b < search.limit() {
                    stack.push((child, b));
                } else {
                    search.pruned_by_bound = true;
                }
            }
        }
    }
    None
}

#[derive(Debug)]
struct LpFailure;

const INT_TOL: f64 = 1e-6;

fn lp_bound(obj: f64) -> i64 {
    (obj - 1e-6).ceil() as i64
}

#[derive(Clone, Copy)]
enum Split {
    Var(usize),
    Group(usize, f64),
}

struct LpNode {
    sol: microlp::Solution,
    bound: i64,
    fixes: Vec<(usize, bool)>,
}

/// LP-based depth-first branch and bound over the columns left free by presolve.
fn lp_search(search: &mut Search, prop: &Propagator, fixed: &[Option<bool>]) -> Result<Option<i64>, LpFailure> {
    let model = search.model;
    let free: Vec<ColumnId> = (0..model.num_columns()).filter(|&c| fixed[c].is_none()).collect();
    let mut var_of = vec![usize::MAX; model.num_columns()];
    for (k, &c) in free.iter().enumerate() {
        var_of[c] = k;
    }
    let base_on: Vec<bool> = fixed.iter().map(|v| *v == Some(true)).collect();
    let groups: Vec<Vec<usize>> = model
        .groups
        .iter()
        .filter(|g| !g.iter().any(|&c| base_on[c]))
        .map(|g| g.iter().filter(|&&c| fixed[c].is_none()).map(|&c| var_of[c]).collect::<Vec<_>>())
        .filter(|g| g.len() > 1)
        .collect();
    if free.is_empty() {
        search.nodes += 1;
        if !search.offer(&base_on) {
            return Ok(None);
        }
        return Ok(None);
    }

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = free
        .iter()
        .map(|&c| problem.add_var(model.columns[c].objective as f64, (0.0, 1.0)))
        .collect();
    for row in &model.rows {
        let (rhs, lo, hi) = prop.activity(row, fixed);
        let redundant = match row.sense {
            Sense::Le => hi <= rhs,
            Sense::Ge => lo >= rhs,
            Sense::Eq => false,
        };
        if redundant {
            continue;
        }
        let mut expr = LinearExpr::empty();
        let mut any = false;
        for &(c, a) in &row.terms {
            if fixed[c].is_none() {
                expr.add(vars[var_of[c]], a as f64);
                any = true;
            }
        }
        if !any {
            continue;
        }
        let op = match row.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Eq => ComparisonOp::Eq,
            Sense::Ge => ComparisonOp::Ge,
        };
        problem.add_constraint(expr, op, rhs as f64);
    }
    let fixed_obj: i64 = (0..model.num_columns())
        .filter(|&c| base_on[c])
        .map(|c| model.columns[c].objective)
        .sum();

    let root = match catch_unwind(AssertUnwindSafe(|| settled(problem.solve()))) {
        Ok(Ok(Some(sol))) => sol,
        Ok(Ok(None)) => return Ok(None),
        Ok(Err(e)) => return Err(e),
        Err(_) => return Err(LpFailure),
    };
    search.nodes += 1;
    let root_bound = lp_bound(root.objective()) + fixed_obj;
    let mut stack = vec![LpNode {
        sol: root,
        bound: root_bound,
        fixes: Vec::new(),
    }];

    while let Some(node) = stack.pop() {
        if search.prune(node.bound) {
            continue;
        }
        if search.out_of_budget() {
            let b = node.bound;
            return Ok(Some(stack.iter().map(|n| n.bound).min().map_or(b, |m| m.min(b))));
        }
        let values: Vec<f64> = vars.iter().map(|&v| node.sol[v]).collect();

        // Group sums first: a fractional count of copies of one decision.
        let mut group: Option<(usize, f64, f64)> = None;
        for (g, members) in groups.iter().enumerate() {
            let sum: f64 = members.iter().map(|&k| values[k]).sum();
            let frac = sum - sum.floor();
            if frac > INT_TOL && frac < 1.0 - INT_TOL {
                let dist = (frac - 0.5).abs();
                if group.is_none_or(|(_, _, d)| dist < d) {
                    group = Some((g, sum, dist));
                }
            }
        }
        let split = match group {
            Some((g, sum, _)) => Split::Group(g, sum),
            None => {
                let mut branch: Option<(usize, f64)> = None;
                for (k, &x) in values.iter().enumerate() {
                    let frac = (x - x.round()).abs();
                    if frac > INT_TOL {
                        let dist = (x - 0.5).abs();
                        if branch.is_none_or(|(_, d)| dist < d) {
                            branch = Some((k, dist));
                        }
                    }
                }
                match branch {
                    Some((k, _)) => Split::Var(k),
                    None => {
                        let mut on = base_on.clone();
                        for (k, &c) in free.iter().enumerate() {
                            on[c] = values[k] > 0.5;
                        }
                        if search.offer(&on) {
                            continue;
                        }
                        // Rounded LP point fails an exact check: branch on a free
                        // column of a violated row.
                        let fixed_here: HashSet<usize> = node.fixes.iter().map(|f| f.0).collect();
                        let pick = model.rows.iter().find_map(|r| {
                            let lhs: i64 = r.terms.iter().filter(|(c, _)| on[*c]).map(|(_, a)| a).sum();
                            if r.holds(lhs) {
                                return None;
                            }
                            r.terms
                                .iter()
                                .map(|&(c, _)| c)
                                .filter(|&c| fixed[c].is_none())
                                .map(|c| var_of[c])
                                .find(|k| !fixed_here.contains(k))
                        });
                        match pick {
                            Some(k) => Split::Var(k),
                            None => continue,
                        }
                    }
                }
            }
        };
        search.nodes += 1;
        let up_first = match split {
            Split::Var(k) => values[k] >= 0.5,
            Split::Group(_, sum) => sum - sum.floor() >= 0.5,
        };
        let order = if up_first { [false, true] } else { [true, false] };
        for up in order {
            let parent = node.sol.clone();
            let child = catch_unwind(AssertUnwindSafe(|| match split {
                Split::Var(k) => settled(parent.fix_var(vars[k], if up { 1.0 } else { 0.0 })),
                Split::Group(g, sum) => {
                    let mut expr = LinearExpr::empty();
                    for &k in &groups[g] {
                        expr.add(vars[k], 1.0);
                    }
                    if up {
                        settled(parent.add_constraint(expr, ComparisonOp::Ge, sum.ceil()))
                    } else {
                        settled(parent.add_constraint(expr, ComparisonOp::Le, sum.floor()))
                    }
                }
            }));
            match child {
                Ok(Ok(Some(sol))) => {
                    let bound = (lp_bound(sol.objective()) + fixed_obj).max(node.bound);
                    if search.prune(bound) {
                        continue;
                    }
                    let mut fixes = node.fixes.clone();
                    if let Split::Var(k) = split {
                        fixes.push((k, up));
                    }
                    stack.push(LpNode { sol, bound, fixes });
                }
                Ok(Ok(None)) => {}
                Ok(Err(e)) => return Err(e),
                Err(_) => return Err(LpFailure),
            }
        }
    }
    Ok(None)
}

/// `Ok(None)` for an infeasible LP; other solver errors are failures.
fn settled(r: Result<SolveOutcome, microlp::Error>) -> Result<Option<microlp::Solution>, LpFailure> {
    match r {
        Ok(SolveOutcome::Solution(s)) => Ok(Some(s)),
        Err(microlp::Error::Infeasible) => Ok(None),
        Ok(SolveOutcome::Interrupted(_)) | Err(_) => Err(LpFailure),
    }
}

static SCRATCH_COUNTER: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);

fn scratch_dir() -> PathBuf {
    let k = SCRATCH_COUNTER.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    std::env::temp_dir().join(format!("tdtsp-mip-{}-{k}", std::process::id()))
}

/// Reads a solution file: a `status <word>` line followed by `c<id> <value>`
/// lines for nonzero columns. Blank lines and `#` comments are ignored.
pub fn parse_solution_file(model: &Model, text: &str) -> Result<(String, Vec<ColumnId>), MipError> {
    let mut status = None;
    let mut support = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(key), Some(value)) = (parts.next(), parts.next()) else {
            return Err(MipError::External(format!("bad solution line \"{line}\"")));
        };
        if key == "status" {
            status = Some(value.to_ascii_lowercase());
            continue;
        }
        if key == "objective" {
            continue;
        }
        let col: ColumnId = key
            .strip_prefix('c')
            .and_then(|s| s.parse().ok())
            .filter(|&c| c < model.num_columns())
            .ok_or_else(|| MipError::External(format!("unknown column \"{key}\"")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| MipError::External(format!("bad value \"{value}\"")))?;
        if v > 0.5 {
            support.push(col);
        }
    }
    support.sort_unstable();
    support.dedup();
    let status = status.ok_or_else(|| MipError::External("solution has no status line".into()))?;
    Ok((status, support))
}

fn solve_external(model: &Model, opts: &SolveOptions, program: &str) -> Result<SolveResult, MipError> {
    let dir = scratch_dir();
    std::fs::create_dir_all(&dir).map_err(|e| MipError::External(e.to_string()))?;
    let result = run_external(model, opts, program, &dir);
    let _ = std::fs::remove_dir_all(&dir);
    result
}

fn run_external(model: &Model, opts: &SolveOptions, program: &str, dir: &Path) -> Result<SolveResult, MipError> {
    let lp = dir.join("model.lp");
    let sol = dir.join("solution.txt");
    std::fs::write(&lp, model.to_lp_string()).map_err(|e| MipError::External(e.to_string()))?;
    let mut cmd = Command::new(program);
    cmd.arg(&lp).arg(&sol);
    if let Some(t) = opts.time_limit {
        cmd.env("TDTSP_TIME_LIMIT", t.as_secs_f64().to_string());
    }
    let out = cmd
        .output()
        .map_err(|e| MipError::External(format!("cannot run {program}: {e}")))?;
    if !out.status.success() {
        return Err(MipError::External(format!(
            "{program} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let text = std::fs::read_to_string(&sol).map_err(|e| MipError::External(e.to_string()))?;
    let (status, support) = parse_solution_file(model, &text)?;
    let cutoff = opts.cutoff.unwrap_or(i64::MAX);
    match status.as_str() {
        "infeasible" => Ok(SolveResult {
            status: if opts.cutoff.is_some() {
                Status::CutoffExceeded
            } else {
                Status::Infeasible
            },
            best_value: None,
            dual_bound: cutoff,
            pool: Vec::new(),
            nodes: 0,
        }),
        "optimal" | "feasible" => {
            let value = model.evaluate(&support).ok_or_else(|| {
                MipError::External("reported solution violates the model".into())
            })?;
            if value >= cutoff {
                return Ok(SolveResult {
                    status: Status::CutoffExceeded,
                    best_value: None,
                    dual_bound: cutoff,
                    pool: Vec::new(),
                    nodes: 0,
                });
            }
            // An external feasible answer carries no bound beyond the trivial one.
            let (status, bound) = if status == "optimal" {
                (Status::Optimal, value)
            } else {
                (Status::Feasible { gap: 1.0 }, 0)
            };
            Ok(SolveResult {
                status,
                best_value: Some(value),
                dual_bound: bound,
                pool: vec![PoolEntry { value, support }],
                nodes: 0,
            })
        }
        "timelimit" => Ok(SolveResult {
            status: Status::TimeLimit,
            best_value: None,
            dual_bound: 0,
            pool: Vec::new(),
            nodes: 0,
        }),
        other => Err(MipError::External(format!("unknown status \"{other}\""))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(opts: &SolveOptions) {
        let mut m = Model::new();
        let a = m.add_column(1, Tag::None);
        let b = m.add_column(1, Tag::None);
        m.add_row(vec![(a, 1), (b, 1)], Sense::Ge, 1).unwrap();
        let r = solve(&m, opts).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.best_value, Some(1));
        assert_eq!(r.dual_bound, 1);
    }

    #[test]
    fn covering_row() {
        simple(&SolveOptions::default());
        simple(&SolveOptions {
            bound: BoundStrategy::Combinatorial,
            ..SolveOptions::default()
        });
    }

    #[test]
    fn contradiction_is_infeasible() {
        let mut m = Model::new();
        let a = m.add_column(0, Tag::None);
        m.add_row(vec![(a, 1)], Sense::Ge, 1).unwrap();
        m.add_row(vec![(a, 1)], Sense::Le, 0).unwrap();
        let r = solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, Status::Infeasible);
        assert!(r.pool.is_empty());
    }

    #[test]
    fn unknown_column_is_rejected() {
        let mut m = Model::new();
        m.add_column(0, Tag::None);
        assert_eq!(
            m.add_row(vec![(3, 1)], Sense::Le, 1),
            Err(MipError::UnknownColumn { row: 0, column: 3 })
        );
        let before = m.clone();
        assert!(m.add_rows(vec![Row::new(vec![(0, 1)], Sense::Le, 1), Row::new(vec![(9, 1)], Sense::Le, 1)]).is_err());
        assert_eq!(m, before);
        m.add_rows(Vec::new()).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn exclusion_cut_raises_value() {
        // Two tours: columns {0,1} cost 4 or {2,3} cost 6, choose exactly one.
        let mut m = Model::new();
        for cost in [2, 2, 3, 3] {
            m.add_column(cost, Tag::None);
        }
        m.add_row(vec![(0, 1), (1, -1)], Sense::Eq, 0).unwrap();
        m.add_row(vec![(2, 1), (3, -1)], Sense::Eq, 0).unwrap();
        m.add_row(vec![(0, 1), (2, 1)], Sense::Eq, 1).unwrap();
        let r = solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(r.best_value, Some(4));
        m.add_rows(vec![Row::new(vec![(0, 1), (1, 1)], Sense::Le, 1)]).unwrap();
        let r = solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(r.best_value, Some(6));
        m.add_rows(vec![Row::new(vec![(2, 1), (3, 1)], Sense::Le, 1)]).unwrap();
        assert_eq!(solve(&m, &SolveOptions::default()).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn cutoff_reports_exceeded() {
        let mut m = Model::new();
        let a = m.add_column(5, Tag::None);
        m.add_row(vec![(a, 1)], Sense::Eq, 1).unwrap();
        let opts = SolveOptions {
            cutoff: Some(5),
            ..SolveOptions::default()
        };
        let r = solve(&m, &opts).unwrap();
        assert_eq!(r.status, Status::CutoffExceeded);
        assert_eq!(r.dual_bound, 5);
    }

    #[test]
    fn lp_text_lists_everything() {
        let mut m = Model::new();
        let a = m.add_column(3, Tag::None);
        let b = m.add_column(0, Tag::None);
        m.add_row(vec![(a, 1), (b, -2)], Sense::Le, 0).unwrap();
        let lp = m.to_lp_string();
        assert!(lp.contains("Minimize"));
        assert!(lp.contains(" r0: 1 c0 - 2 c1 <= 0"));
        assert!(lp.contains("Binaries"));
        assert!(lp.trim_end().ends_with("End"));
    }

    #[test]
    fn solution_file_parsing() {
        let mut m = Model::new();
        m.add_column(1, Tag::None);
        m.add_column(1, Tag::None);
        let (status, support) = parse_solution_file(&m, "status optimal\nc1 1\nc0 0\n").unwrap();
        assert_eq!(status, "optimal");
        assert_eq!(support, vec![1]);
        assert!(parse_solution_file(&m, "status optimal\nc7 1\n").is_err());
        assert!(parse_solution_file(&m, "c1 1\n").is_err());
    }
}

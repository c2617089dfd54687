//! Exact reference solver: label setting over (visited set, city, time).
//!
//! Labels of one (visited, city) bucket are extended after a dense waiting
//! sweep, so each label only spawns one departure per time unit. A label at
//! time `t` dominates one at `t' >= t` when it is no more expensive after
//! paying the waiting from `t` to `t'`. Plain (time, cost) dominance would be
//! wrong here: later labels can be cheaper to wait from and cheaper to leave.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::formulations::Schedule;
use crate::instance::{City, Cost, Instance, Time};

pub const MAX_CITIES: usize = 12;
pub const MAX_SPAN: Time = 500;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle limited to {MAX_CITIES} cities and a span of {MAX_SPAN}, got n = {n}, span = {span}")]
    CapExceeded { n: usize, span: Time },
    #[error("no feasible tour")]
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub allow_waiting: bool,
    /// Prune dominated labels. Off keeps one label per exact time.
    pub dominance: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            allow_waiting: true,
            dominance: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleSolution {
    pub cost: Cost,
    pub schedule: Schedule,
    /// Labels kept after pruning, summed over buckets.
    pub labels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Label {
    time: Time,
    cost: Cost,
    /// (bucket, label, departure time) of the predecessor.
    parent: Option<(usize, usize, Time)>,
}

struct Bucket {
    city: City,
    labels: Vec<Label>,
}

pub fn solve_exact(inst: &Instance, allow_waiting: bool) -> Result<OracleSolution, OracleError> {
    solve_with(
        inst,
        OracleOptions {
            allow_waiting,
            dominance: true,
        },
    )
}

pub fn solve_with(inst: &Instance, opts: OracleOptions) -> Result<OracleSolution, OracleError> {
    let n = inst.n();
    let span = inst.horizon() - inst.depot_open();
    if n > MAX_CITIES || span > MAX_SPAN {
        return Err(OracleError::CapExceeded { n, span });
    }
    let horizon = inst.horizon();
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };

    // prefix[i][t] = cost of waiting at i from 0 to t, None if waiting is off there.
    let prefix: Vec<Option<Vec<Cost>>> = (0..n)
        .map(|i| {
            if !opts.allow_waiting || !inst.waiting_allowed(i) {
                return None;
            }
            let mut p = vec![0; horizon as usize + 1];
            for t in 0..horizon {
                p[t as usize + 1] = p[t as usize] + inst.waiting_cost(i, t).unwrap_or(0);
            }
            Some(p)
        })
        .collect();
    let wait_between = |i: City, a: Time, b: Time| -> Option<Cost> {
        if a == b {
            return Some(0);
        }
        prefix[i].as_ref().map(|p| p[b as usize] - p[a as usize])
    };

    let mut buckets: Vec<Bucket> = Vec::new();
    let mut index: BTreeMap<(u64, City), usize> = BTreeMap::new();
    buckets.push(Bucket {
        city: 0,
        labels: vec![Label {
            time: inst.depot_open(),
            cost: 0,
            parent: None,
        }],
    });
    index.insert((1, 0), 0);

    let mut best: Option<(Cost, Time, usize, usize, Time)> = None;
    let mut kept = 0usize;
    let mut cursor: Option<(u64, City)> = None;
    loop {
        let next = match cursor {
            None => index.keys().next().copied(),
            Some(k) => index
                .range((std::ops::Bound::Excluded(k), std::ops::Bound::Unbounded))
                .next()
                .map(|(k, _)| *k),
        };
        let Some(key) = next else { break };
        cursor = Some(key);
        let (mask, city) = key;
        let b = index[&key];

        let mut labels = std::mem::take(&mut buckets[b].labels);
        labels.sort_by_key(|l| (l.time, l.cost));
        labels.dedup_by_key(|l| l.time);
        if opts.dominance {
            let mut out: Vec<Label> = Vec::with_capacity(labels.len());
            for l in labels {
                let dominated = out.iter().any(|k| {
                    wait_between(city, k.time, l.time).is_some_and(|w| k.cost + w <= l.cost)
                });
                if !dominated {
                    out.push(l);
                }
            }
            labels = out;
        }
        kept += labels.len();

        // Cheapest way to stand at `city` ready to leave at each time.
        let slots = horizon as usize + 1;
        let mut ready: Vec<Option<(Cost, usize)>> = vec![None; slots];
        for (k, l) in labels.iter().enumerate() {
            let t = l.time as usize;
            if ready[t].is_none_or(|(c, _)| l.cost < c) {
                ready[t] = Some((l.cost, k));
            }
        }
        if prefix[city].is_some() {
            for t in 0..horizon {
                if let Some((c, k)) = ready[t as usize] {
                    let w = c + inst.waiting_cost(city, t).unwrap_or(0);
                    if ready[t as usize + 1].is_none_or(|(c2, _)| w < c2) {
                        ready[t as usize + 1] = Some((w, k));
                    }
                }
            }
        }
        buckets[b].labels = labels;

        for (t, slot) in ready.iter().enumerate() {
            let Some((c, k)) = *slot else { continue };
            let t = t as Time;
            for j in inst.successors(city) {
                let arc = inst.arc_index(city, j).expect("successor arc");
                let bit = 1u64 << j;
                let closing = j == 0;
                if closing != (mask == full) || (!closing && mask & bit != 0) {
                    continue;
                }
                let reach = t + inst.tau_at(arc, t);
                if reach > inst.latest(j) {
                    continue;
                }
                let cost = c + inst.cost_at(arc, t);
                if closing {
                    if best.is_none_or(|(bc, bt, ..)| (cost, reach) < (bc, bt)) {
                        best = Some((cost, reach, b, k, t));
                    }
                    continue;
                }
                let target = (mask | bit, j);
                let tb = *index.entry(target).or_insert_with(|| {
                    buckets.push(Bucket {
                        city: j,
                        labels: Vec::new(),
                    });
                    buckets.len() - 1
                });
                buckets[tb].labels.push(Label {
                    time: reach.max(inst.earliest(j)),
                    cost,
                    parent: Some((b, k, t)),
                });
            }
        }
    }

    let (cost, arrival, mut b, mut k, mut depart) = best.ok_or(OracleError::Infeasible)?;
    let mut cities = vec![0];
    let mut visits = vec![arrival];
    let mut departures = Vec::new();
    loop {
        let l = buckets[b].labels[k];
        cities.push(buckets[b].city);
        visits.push(l.time);
        departures.push(depart);
        match l.parent {
            Some((pb, pk, pt)) => {
                b = pb;
                k = pk;
                depart = pt;
            }
            None => break,
        }
    }
    cities.reverse();
    visits.reverse();
    departures.reverse();
    Ok(OracleSolution {
        cost,
        schedule: Schedule {
            cities,
            visits,
            departures,
            cost,
        },
        labels: kept,
    })
}

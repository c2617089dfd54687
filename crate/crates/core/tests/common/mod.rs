#![allow(dead_code)]

use tdtsp_core::instance::{generate_instance, CostMode, GeneratorConfig, Instance, WaitingMode};

pub const MODES: [WaitingMode; 3] = [WaitingMode::Free, WaitingMode::Forbidden, WaitingMode::Priced];

/// Short-horizon instance for exhaustive schedule enumeration.
pub fn short_instance(seed: u64, waiting: WaitingMode) -> Option<Instance> {
    let cfg = GeneratorConfig {
        n: 3 + (seed % 3) as usize,
        horizon: 30,
        window_width: 12,
        profile_segments: 3,
        waiting,
        cost: CostMode::Random,
        grid: 6,
    };
    generate_instance(seed, &cfg).ok()
}

/// Cheapest schedule of a fixed city sequence by trying every vector of
/// departure times.
pub fn enumerate_schedule(inst: &Instance, seq: &[usize]) -> Option<i64> {
    fn go(inst: &Instance, seq: &[usize], k: usize, at: i64, acc: i64, best: &mut Option<i64>) {
        if k + 1 == seq.len() {
            *best = Some(best.map_or(acc, |b: i64| b.min(acc)));
            return;
        }
        let (i, j) = (seq[k], seq[k + 1]);
        if !inst.has_arc(i, j) {
            return;
        }
        let last = if inst.waiting_allowed(i) { inst.horizon() } else { at };
        let mut wait = 0;
        for d in at..=last {
            if d > at {
                wait += inst.waiting_cost(i, d - 1).unwrap();
            }
            let arrive = inst.arrival(i, j, d);
            if arrive > inst.latest(j) {
                break;
            }
            let next = arrive.max(inst.earliest(j));
            go(inst, seq, k + 1, next, acc + wait + inst.travel_cost(i, j, d), best);
        }
    }
    let mut best = None;
    go(inst, seq, 0, inst.depot_open(), 0, &mut best);
    best
}

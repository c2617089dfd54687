//! Acceptance suite. Runs every criterion in sequence (timings in criterion 9
//! must not compete with other work) and prints one PASS/FAIL line each.

mod common;

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdtsp_core::ddd::{run, DddOptions, DddStatus, Epsilon, IterationRecord};
use tdtsp_core::formulations::{build_base_lb_model, build_lb_model, schedule_tour, FormulationKind};
use tdtsp_core::instance::{generate_instance, CostMode, Instance, WaitingMode};
use tdtsp_core::mip::{solve, Model, SolveOptions, Status};
use tdtsp_core::oracle::{solve_exact, OracleError};
use tdtsp_core::report::validation_suite;
use tdtsp_core::suites::{default_bench_suite, small_config, wait_to_save};
use tdtsp_core::timenet::{add_paths, underestimate_cost, PartialNetwork, PathPool, TimedNode};

use common::MODES;

const KINDS: [FormulationKind; 3] = [FormulationKind::PathArc, FormulationKind::Z, FormulationKind::ZAgg];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn exact_opts() -> DddOptions {
    DddOptions {
        epsilon: Epsilon::ZERO,
        ..Default::default()
    }
}

fn oracle(inst: &Instance, allow_waiting: bool) -> Option<i64> {
    match solve_exact(inst, allow_waiting) {
        Ok(s) => Some(s.cost),
        Err(OracleError::Infeasible) => None,
        Err(e) => panic!("oracle: {e}"),
    }
}

fn value(model: &Model) -> Option<i64> {
    let r = solve(model, &SolveOptions::default()).unwrap();
    match r.status {
        Status::Optimal => r.best_value,
        Status::Infeasible => None,
        s => panic!("unexpected status {s:?}"),
    }
}

/// Random instance with a partial network grown by random refinements.
fn random_network(seed: u64) -> (Instance, PartialNetwork, PathPool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = small_config(rng.gen_range(4..=6), MODES[seed as usize % 3]);
    cfg.cost = CostMode::Random;
    let inst = generate_instance(seed, &cfg).unwrap();
    let mut net = PartialNetwork::initial(&inst);
    let mut pool = PathPool::default();
    for _ in 0..rng.gen_range(0..8) {
        let short: Vec<usize> = net.too_short_arcs().collect();
        if short.is_empty() || rng.gen_bool(0.3) {
            let mut rest: Vec<usize> = (1..inst.n()).collect();
            rest.shuffle(&mut rng);
            let tour: Vec<TimedNode> = [0]
                .into_iter()
                .chain(rest)
                .chain([0])
                .map(|c| TimedNode::new(c, inst.depot_open()))
                .collect();
            add_paths(&mut net, &mut pool, &tour).unwrap();
        } else {
            net.lengthen_arc(short[rng.gen_range(0..short.len())]).unwrap();
        }
    }
    (inst, net, pool)
}

fn monotone(trace: &[IterationRecord]) -> bool {
    trace.windows(2).all(|w| {
        w[0].lb <= w[1].lb
            && match (w[0].ub, w[1].ub) {
                (Some(a), Some(b)) => b <= a,
                (Some(_), None) => false,
                _ => true,
            }
    })
}

fn criterion_1(traces: &mut Vec<Vec<IterationRecord>>) -> Outcome {
    let mut runs = 0;
    let mut bad = Vec::new();
    for mode in MODES {
        for entry in validation_suite(7, 100, mode) {
            let inst = entry.instance().unwrap();
            let expected = oracle(&inst, true);
            for kind in KINDS {
                let got = match run(&inst, kind, &exact_opts()) {
                    Ok(s) => {
                        traces.push(s.trace.clone());
                        (s.status == DddStatus::Optimal).then(|| s.upper_bound()).flatten()
                    }
                    Err(_) => None,
                };
                runs += 1;
                if got != expected {
                    bad.push(format!("{} {kind}: {got:?} vs {expected:?}", entry.name));
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("{runs} runs, {} mismatches {:?}", bad.len(), bad.iter().take(3).collect::<Vec<_>>()))
}

fn criterion_2() -> Outcome {
    let mut bad = Vec::new();
    for seed in 0..50 {
        let (inst, net, pool) = random_network(1000 + seed);
        let v = |k| value(&build_lb_model(k, &net, &pool).model);
        let base = v(FormulationKind::BaseLb);
        let path = v(FormulationKind::PathArc);
        let z = v(FormulationKind::Z);
        let zagg = v(FormulationKind::ZAgg);
        let opt = oracle(&inst, true);
        let ok = match (base, path, z, zagg, opt) {
            (Some(b), Some(p), Some(z), Some(za), Some(o)) => b <= p && b <= z && z == za && za <= o,
            (_, _, _, _, None) => true,
            _ => false,
        };
        if !ok {
            bad.push(format!("seed {seed}: {base:?} {path:?} {z:?} {zagg:?} {opt:?}"));
        }
    }
    outcome(bad.is_empty(), format!("50 pairs, {} violations {:?}", bad.len(), bad.first()))
}

fn criterion_3(traces: &[Vec<IterationRecord>]) -> Outcome {
    let bad = traces.iter().filter(|t| !monotone(t)).count();
    outcome(bad == 0, format!("{} traces, {bad} non-monotone", traces.len()))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut done = 0;
    let mut failure = None;
    let mut seed = 0;
    while done < 1000 && failure.is_none() {
        let mut cfg = small_config(rng.gen_range(4..=7), MODES[seed % 3]);
        cfg.cost = CostMode::Random;
        let inst = generate_instance(seed as u64, &cfg);
        seed += 1;
        let Ok(inst) = inst else { continue };
        let mut net = PartialNetwork::initial(&inst);
        let mut pool = PathPool::default();
        for _ in 0..20 {
            let short: Vec<usize> = net.too_short_arcs().collect();
            let r = if !short.is_empty() && rng.gen_bool(0.6) {
                net.lengthen_arc(short[rng.gen_range(0..short.len())]).map(|_| ())
            } else {
                let mut rest: Vec<usize> = (1..inst.n()).collect();
                rest.shuffle(&mut rng);
                let tour: Vec<TimedNode> = [0]
                    .into_iter()
                    .chain(rest)
                    .chain([0])
                    .map(|c| TimedNode::new(c, inst.depot_open()))
                    .collect();
                add_paths(&mut net, &mut pool, &tour).map(|_| ())
            };
            done += 1;
            if let Err(e) = r.and_then(|_| net.check_properties()) {
                failure = Some(format!("seed {seed}: {e}"));
                break;
            }
        }
    }
    outcome(failure.is_none(), format!("{done} mutations {}", failure.unwrap_or_default()))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut samples = 0;
    let mut bad = 0;
    let mut seed = 0;
    while samples < 10_000 {
        let mut cfg = small_config(rng.gen_range(4..=7), MODES[seed as usize % 3]);
        cfg.cost = CostMode::Random;
        let inst = generate_instance(seed, &cfg);
        seed += 1;
        let Ok(inst) = inst else { continue };
        for _ in 0..500 {
            let arc = rng.gen_range(0..inst.arcs().len());
            let (i, j) = (inst.arcs()[arc].from, inst.arcs()[arc].to);
            let t = rng.gen_range(0..inst.horizon());
            let c = underestimate_cost(&inst, i, j, t);
            let later_ok = (t..=inst.horizon())
                .filter(|&h| inst.arrival(i, j, h) <= inst.latest(j))
                .all(|h| c.is_some_and(|c| c <= inst.travel_cost(i, j, h)));
            let mono = match (c, underestimate_cost(&inst, i, j, t + 1)) {
                (Some(a), Some(b)) => a <= b,
                (None, Some(_)) => false,
                _ => true,
            };
            if !(later_ok && mono) {
                bad += 1;
            }
            samples += 1;
        }
    }
    outcome(bad == 0, format!("{samples} samples, {bad} violations"))
}

fn criterion_6() -> Outcome {
    let mut bad = Vec::new();
    for seed in 0..50 {
        let (_, net, _) = random_network(6000 + seed);
        let lb = build_base_lb_model(&net);
        let mut fixed = lb.clone();
        fixed.forbid_waiting(&net);
        let (a, b) = (value(&lb.model), value(&fixed.model));
        if a != b {
            bad.push(format!("seed {seed}: {a:?} vs {b:?}"));
        }
    }
    outcome(bad.is_empty(), format!("50 networks, {} differ {:?}", bad.len(), bad.first()))
}

fn criterion_7(traces: &mut Vec<Vec<IterationRecord>>) -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    for seed in 0..20 {
        let inst = wait_to_save(seed);
        let with = oracle(&inst, true).unwrap();
        let without = oracle(&inst, false).unwrap();
        if with >= without {
            bad.push(format!("seed {seed}: waiting does not pay"));
        }
        for kind in KINDS {
            let s = run(&inst, kind, &exact_opts()).unwrap();
            traces.push(s.trace.clone());
            if s.upper_bound() != Some(with) || s.upper_bound().is_none_or(|u| u >= without) {
                bad.push(format!("seed {seed} {kind}: {:?} vs {with} (no-wait {without})", s.upper_bound()));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bad.is_empty() && secs < 120.0,
        format!("20 instances x 3, {:.1}s, {} failures {:?}", secs, bad.len(), bad.first()),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    let mut bad = 0;
    let mut seed = 0;
    while checked < 200 {
        let Some(inst) = common::short_instance(seed, MODES[seed as usize % 3]) else {
            seed += 1;
            continue;
        };
        seed += 1;
        let mut rest: Vec<usize> = (1..inst.n()).collect();
        rest.shuffle(&mut rng);
        let seq: Vec<usize> = [0].into_iter().chain(rest).chain([0]).collect();
        let dp = schedule_tour(&inst, &seq).ok().map(|s| s.cost);
        if dp != common::enumerate_schedule(&inst, &seq) {
            bad += 1;
        }
        checked += 1;
    }
    outcome(bad == 0, format!("{checked} sequences, {bad} mismatches"))
}

struct BenchRun {
    status: DddStatus,
    lb: i64,
    ub: Option<i64>,
}

fn criterion_9(runs: &mut Vec<BenchRun>, traces: &mut Vec<Vec<IterationRecord>>) -> Outcome {
    let start = Instant::now();
    let suite = default_bench_suite(WaitingMode::Forbidden);
    let opts = DddOptions {
        time_limit: Some(Duration::from_secs(60)),
        ..Default::default()
    };
    let mut solved = [0usize; 3];
    for entry in &suite {
        let inst = entry.instance().unwrap();
        for (k, kind) in KINDS.into_iter().enumerate() {
            let s = run(&inst, kind, &opts).unwrap();
            if s.status == DddStatus::Optimal {
                solved[k] += 1;
            }
            traces.push(s.trace.clone());
            runs.push(BenchRun {
                status: s.status,
                lb: s.lower_bound,
                ub: s.upper_bound(),
            });
        }
    }
    let [path, z, zagg] = solved;
    let mins = start.elapsed().as_secs_f64() / 60.0;
    outcome(
        zagg >= z && z + 2 >= path && mins < 45.0,
        format!("{} instances: path {path}, z {z}, z-agg {zagg} solved, {mins:.1} min", suite.len()),
    )
}

fn criterion_10(bench: &[BenchRun]) -> Outcome {
    let mut checked = 0;
    let mut bad = 0;
    let mut check = |status: DddStatus, lb: i64, ub: Option<i64>| {
        if status != DddStatus::Optimal {
            return;
        }
        checked += 1;
        // (ub - lb) / ub <= 1/100, cross-multiplied in exact integers.
        match ub {
            Some(ub) if lb <= ub && 100 * (ub as i128 - lb as i128) <= ub as i128 => {}
            _ => bad += 1,
        }
    };
    for r in bench {
        check(r.status, r.lb, r.ub);
    }
    let opts = DddOptions {
        epsilon: "0.01".parse().unwrap(),
        ..Default::default()
    };
    for entry in validation_suite(7, 30, WaitingMode::Priced) {
        let inst = entry.instance().unwrap();
        for kind in KINDS {
            let s = run(&inst, kind, &opts).unwrap();
            check(s.status, s.lower_bound, s.upper_bound());
        }
    }
    let bench_runs = bench.iter().filter(|r| r.status == DddStatus::Optimal).count();
    outcome(
        bad == 0 && checked > 0,
        format!("{checked} terminated runs ({bench_runs} from the bench), {bad} above 1%"),
    )
}

#[test]
fn acceptance_criteria() {
    let mut traces = Vec::new();
    let mut bench = Vec::new();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut record = |k: usize, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {k}: {} ({}; {:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((k, o));
    };
    record(1, &mut || criterion_1(&mut traces));
    record(2, &mut criterion_2);
    record(4, &mut criterion_4);
    record(5, &mut criterion_5);
    record(6, &mut criterion_6);
    record(7, &mut || criterion_7(&mut traces));
    record(8, &mut criterion_8);
    record(9, &mut || criterion_9(&mut bench, &mut traces));
    record(3, &mut || criterion_3(&traces));
    record(10, &mut || criterion_10(&bench));
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(k, _)| *k).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

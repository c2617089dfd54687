mod common;

use proptest::prelude::*;

use tdtsp_core::ddd::{run, DddOptions, Epsilon};
use tdtsp_core::formulations::{build_full_model, build_lb_model, schedule_tour, FormulationKind};
use tdtsp_core::instance::{generate_instance, parse_instance, preprocess, validate_fifo, CostMode, Instance, TimeWindow};
use tdtsp_core::mip::{solve, SolveOptions, Status};
use tdtsp_core::oracle::{solve_exact, solve_with, OracleError, OracleOptions};
use tdtsp_core::suites::small_config;
use tdtsp_core::timenet::{add_paths, PartialNetwork, PathPool, TimedNode};

use common::MODES;

fn try_small(seed: u64, mode: usize, n_max: usize) -> Option<Instance> {
    let n = 4 + (seed as usize) % (n_max - 3);
    let mut cfg = small_config(n, MODES[mode % 3]);
    cfg.cost = if seed.is_multiple_of(2) { CostMode::Random } else { CostMode::TravelTime };
    generate_instance(seed, &cfg).ok()
}

/// First generatable instance at or after `seed`.
fn small(seed: u64, mode: usize, n_max: usize) -> Instance {
    (seed..).find_map(|s| try_small(s, mode, n_max)).unwrap()
}

fn value(model: &tdtsp_core::mip::Model) -> Option<i64> {
    let r = solve(model, &SolveOptions::default()).unwrap();
    match r.status {
        Status::Optimal => r.best_value,
        Status::Infeasible => None,
        s => panic!("unexpected status {s:?}"),
    }
}

fn oracle_value(inst: &Instance) -> Option<i64> {
    match solve_exact(inst, true) {
        Ok(s) => Some(s.cost),
        Err(OracleError::Infeasible) => None,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn formulations_relax_the_full_model(seed in 0u64..100_000, mode in 0usize..3, k in 0usize..6) {
        let inst = small(seed, mode, 5);
        let mut net = PartialNetwork::initial(&inst);
        let mut pool = PathPool::default();
        for _ in 0..k {
            let short: Vec<usize> = net.too_short_arcs().collect();
            if short.is_empty() {
                break;
            }
            net.lengthen_arc(short[seed as usize % short.len()]).unwrap();
        }
        let tour: Vec<TimedNode> = (0..inst.n()).chain([0]).map(|c| TimedNode::new(c, inst.depot_open())).collect();
        add_paths(&mut net, &mut pool, &tour).unwrap();
        let full = value(&build_full_model(&PartialNetwork::full(&inst).unwrap()).model);
        prop_assert_eq!(full, oracle_value(&inst));
        let Some(full) = full else { return Ok(()) };
        for kind in [FormulationKind::BaseLb, FormulationKind::PathArc, FormulationKind::Z, FormulationKind::ZAgg] {
            let v = value(&build_lb_model(kind, &net, &pool).model);
            prop_assert!(v.is_some_and(|v| v <= full), "{kind}: {v:?} > {full}");
        }
        let z = value(&build_lb_model(FormulationKind::Z, &net, &pool).model);
        let zagg = value(&build_lb_model(FormulationKind::ZAgg, &net, &pool).model);
        prop_assert_eq!(z, zagg);
    }

    #[test]
    fn ddd_bounds_and_incumbents(seed in 0u64..100_000, mode in 0usize..3, kind in 0usize..3) {
        let inst = small(seed, mode, 6);
        let kind = [FormulationKind::PathArc, FormulationKind::Z, FormulationKind::ZAgg][kind];
        let opts = DddOptions { epsilon: Epsilon::ZERO, check_network: true, ..Default::default() };
        let exact = oracle_value(&inst);
        match run(&inst, kind, &opts) {
            Ok(state) => {
                let opt = exact.expect("ddd found a tour the oracle missed");
                for w in state.trace.windows(2) {
                    prop_assert!(w[0].lb <= w[1].lb);
                    if let (Some(a), Some(b)) = (w[0].ub, w[1].ub) {
                        prop_assert!(b <= a);
                    }
                }
                for r in &state.trace {
                    prop_assert!(r.lb <= opt);
                }
                for s in &state.incumbents {
                    let again = schedule_tour(&inst, &s.cities).unwrap();
                    prop_assert_eq!(again.cost, s.cost);
                    for (k, &c) in s.cities.iter().enumerate() {
                        prop_assert!(inst.window(c).contains(s.visits[k]) || (k == 0 && s.visits[k] == inst.depot_open()));
                    }
                }
                prop_assert_eq!(state.upper_bound(), Some(opt));
                prop_assert_eq!(state.lower_bound, opt);
            }
            Err(tdtsp_core::ddd::DddError::ProvenInfeasible) => prop_assert_eq!(exact, None),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn oracle_dominance_never_prunes_the_optimum() {
    for seed in 0..200u64 {
        let n = 4 + (seed % 3) as usize;
        let mut cfg = small_config(n, MODES[seed as usize % 3]);
        cfg.cost = CostMode::Random;
        let Ok(inst) = generate_instance(seed, &cfg) else { continue };
        for allow_waiting in [true, false] {
            let with = solve_with(&inst, OracleOptions { allow_waiting, dominance: true }).map(|s| s.cost);
            let without = solve_with(&inst, OracleOptions { allow_waiting, dominance: false }).map(|s| s.cost);
            assert_eq!(with, without, "seed {seed}");
        }
    }
}

fn tightened(inst: &Instance, city: usize, window: TimeWindow) -> Instance {
    let mut windows = inst.windows().to_vec();
    windows[city] = window;
    Instance::new(windows, inst.arcs().to_vec(), inst.waiting().to_vec()).unwrap()
}

fn never_lower(base: Option<i64>, tight: Option<i64>, what: &str) {
    match (base, tight) {
        (Some(a), Some(b)) => assert!(b >= a, "{what}: {b} < {a}"),
        (None, Some(_)) => panic!("{what}: tightening made the instance feasible"),
        _ => {}
    }
}

// Arriving before a window opens costs nothing, so raising an opening time can
// hand out free waiting when waiting is forbidden or priced. Closing times can
// always be tightened; openings only under free waiting.
#[test]
fn tightening_a_window_never_lowers_the_optimum() {
    for seed in 0..90u64 {
        let inst = small(seed, seed as usize, 6);
        let base = oracle_value(&inst);
        let city = 1 + (seed as usize) % (inst.n() - 1);
        let w = inst.window(city);
        let cut = (w.latest - w.earliest) / 3;
        let late = tightened(&inst, city, TimeWindow::new(w.earliest, w.latest - cut));
        never_lower(base, oracle_value(&late), &format!("seed {seed} closing"));
        if inst.free_waiting() {
            let early = tightened(&inst, city, TimeWindow::new(w.earliest + cut, w.latest));
            never_lower(base, oracle_value(&early), &format!("seed {seed} opening"));
        }
    }
}

#[test]
fn preprocessing_keeps_every_optimum() {
    for seed in 0..200u64 {
        let inst = small(seed, seed as usize, 7);
        let before = oracle_value(&inst);
        let after = match preprocess(&inst) {
            Ok((p, _)) => oracle_value(&p),
            Err(_) => None,
        };
        assert_eq!(before, after, "seed {seed}");
    }
}

#[test]
fn generated_instances_are_fifo_and_round_trip() {
    for seed in 0..200u64 {
        let inst = small(seed, seed as usize, 7);
        assert!(validate_fifo(&inst).is_empty());
        let again = parse_instance(&inst.to_json()).unwrap();
        assert_eq!(again, inst);
        assert_eq!(again.to_json(), inst.to_json());
    }
}

#[test]
fn schedule_matches_enumeration_across_modes() {
    let mut checked = 0;
    for seed in 0..300u64 {
        let Some(inst) = common::short_instance(seed, MODES[seed as usize % 3]) else { continue };
        let mut seq: Vec<usize> = (0..inst.n()).collect();
        seq.rotate_left(1 + (seed as usize) % (inst.n() - 1));
        seq.retain(|&c| c != 0);
        let seq: Vec<usize> = [0].into_iter().chain(seq).chain([0]).collect();
        let dp = schedule_tour(&inst, &seq).ok().map(|s| s.cost);
        assert_eq!(dp, common::enumerate_schedule(&inst, &seq), "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 100);
}

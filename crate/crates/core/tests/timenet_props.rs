use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdtsp_core::instance::{generate_instance, CostMode, Instance, WaitingMode};
use tdtsp_core::suites::small_config;
use tdtsp_core::timenet::{add_paths, underestimate_cost, PartialNetwork, PathPool, TimedNode};

fn instance(seed: u64, mode: u8) -> Instance {
    let waiting = [WaitingMode::Free, WaitingMode::Forbidden, WaitingMode::Priced][mode as usize % 3];
    let mut cfg = small_config(4 + (seed % 3) as usize, waiting);
    cfg.cost = if seed.is_multiple_of(2) { CostMode::Random } else { CostMode::TravelTime };
    generate_instance(seed, &cfg).unwrap()
}

/// Cheapest departure at or after `t` that still meets `j`'s window, by
/// scanning every departure time.
fn brute_under(inst: &Instance, i: usize, j: usize, t: i64) -> Option<i64> {
    let mut best = None;
    for h in t..=inst.horizon() {
        if inst.arrival(i, j, h) <= inst.latest(j) {
            let c = inst.travel_cost(i, j, h);
            best = Some(best.map_or(c, |b: i64| b.min(c)));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    // 100 cases of 10 operations: a thousand mutations in all.
    #[test]
    fn properties_hold_after_every_mutation(seed in 0u64..10_000, mode in 0u8..3, ops in prop::collection::vec((any::<bool>(), any::<u32>()), 10)) {
        let inst = instance(seed, mode);
        let mut net = PartialNetwork::initial(&inst);
        let mut pool = PathPool::default();
        net.check_properties().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (lengthen, pick) in ops {
            let short: Vec<usize> = net.too_short_arcs().collect();
            if lengthen && !short.is_empty() {
                let a = short[pick as usize % short.len()];
                net.lengthen_arc(a).unwrap();
            } else {
                let mut rest: Vec<usize> = (1..inst.n()).collect();
                rest.shuffle(&mut rng);
                let mut tour = vec![TimedNode::new(0, inst.depot_open())];
                tour.extend(rest.into_iter().map(|c| TimedNode::new(c, 0)));
                tour.push(TimedNode::new(0, 0));
                add_paths(&mut net, &mut pool, &tour).unwrap();
            }
            net.check_properties().unwrap();
            for p in pool.paths() {
                let sum: i64 = p.arcs.iter().map(|&a| net.arc(a).true_cost).sum();
                prop_assert_eq!(p.cost, sum);
                prop_assert!(p.arcs.iter().all(|&a| net.arc(a).correct_time));
            }
        }
    }

    #[test]
    fn under_cost_bounds_every_later_departure(seed in 0u64..10_000, mode in 0u8..3, points in prop::collection::vec((any::<u16>(), any::<u16>()), 0..30)) {
        let inst = instance(seed, mode);
        let extra: Vec<TimedNode> = points
            .iter()
            .map(|&(c, t)| {
                let c = c as usize % inst.n();
                let lo = inst.earliest(c);
                TimedNode::new(c, lo + (t as i64) % (inst.horizon() - lo + 1))
            })
            .collect();
        let net = PartialNetwork::from_time_points(&inst, &extra).unwrap();
        net.check_properties().unwrap();
        for arc in net.arcs().iter().filter(|a| a.is_travel()) {
            let (i, j, t) = (arc.from.city, arc.to.city, arc.from.time);
            for h in t..=inst.horizon() {
                if inst.arrival(i, j, h) <= inst.latest(j) {
                    prop_assert!(arc.under_cost <= inst.travel_cost(i, j, h));
                }
            }
            prop_assert_eq!(Some(arc.under_cost), brute_under(&inst, i, j, t));
        }
    }
}

#[test]
fn underestimate_law_on_ten_thousand_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut samples = 0;
    let mut seed = 0;
    while samples < 10_000 {
        let inst = instance(seed, seed as u8);
        seed += 1;
        for _ in 0..200 {
            let arc = rng.gen_range(0..inst.arcs().len());
            let (i, j) = (inst.arcs()[arc].from, inst.arcs()[arc].to);
            let t = rng.gen_range(0..inst.horizon());
            let here = underestimate_cost(&inst, i, j, t);
            assert_eq!(here, brute_under(&inst, i, j, t));
            if let Some(c) = here {
                for h in t..=inst.horizon() {
                    if inst.arrival(i, j, h) <= inst.latest(j) {
                        assert!(c <= inst.travel_cost(i, j, h));
                    }
                }
            }
            // Nondecreasing in t; `None` (no feasible departure) ranks above all.
            let next = underestimate_cost(&inst, i, j, t + 1);
            match (here, next) {
                (Some(a), Some(b)) => assert!(a <= b),
                (None, Some(_)) => panic!("feasibility reappears later"),
                _ => {}
            }
            samples += 1;
        }
    }
}

#[test]
fn full_network_is_exact() {
    for seed in 0..10 {
        let inst = instance(seed, seed as u8);
        let net = PartialNetwork::full(&inst).unwrap();
        net.check_properties().unwrap();
        for a in net.arcs() {
            assert!(a.correct_time);
            assert_eq!(a.under_cost, a.true_cost);
        }
    }
}

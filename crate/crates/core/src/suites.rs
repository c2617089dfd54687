//! Named instances and seeded instance suites shared by tests, the CLI and
//! the benchmark harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::instance::{
    generate_instance, ArcData, CostMode, GeneratorConfig, GeneratorError, Instance, StepProfile,
    TimeWindow, WaitingCost, WaitingMode,
};

/// Four cities on a complete digraph, `tau = c = 2`, free waiting, windows `[0,20]`.
pub fn tiny4() -> Instance {
    let h = 20;
    let mut arcs = Vec::new();
    for from in 0..4 {
        for to in 0..4 {
            if from != to {
                arcs.push(ArcData {
                    from,
                    to,
                    travel_time: StepProfile::constant(2, h),
                    travel_cost: StepProfile::constant(2, h),
                });
            }
        }
    }
    Instance::new(
        vec![TimeWindow::new(0, h); 4],
        arcs,
        vec![WaitingCost::Priced(StepProfile::constant(0, h)); 4],
    )
    .expect("tiny4 is valid")
}

/// Every arc is `extra` more expensive before a common threshold, waiting is
/// free, so the best tour idles at the depot first.
pub fn wait_to_save(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=5);
    let horizon = 60;
    let threshold = rng.gen_range(3..=10);
    let extra = rng.gen_range(6..=10);
    let mut arcs = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if from == to {
                continue;
            }
            let tau = rng.gen_range(1..=4);
            let base = rng.gen_range(1..=5);
            let cost: Vec<i64> = (0..=horizon)
                .map(|t| if t < threshold { base + extra } else { base })
                .collect();
            arcs.push(ArcData {
                from,
                to,
                travel_time: StepProfile::constant(tau, horizon),
                travel_cost: StepProfile::from_values(&cost),
            });
        }
    }
    let windows = (0..n)
        .map(|i| {
            if i == 0 {
                TimeWindow::new(0, horizon)
            } else {
                TimeWindow::new(rng.gen_range(0..=5), horizon - 5)
            }
        })
        .collect();
    Instance::new(
        windows,
        arcs,
        vec![WaitingCost::Priced(StepProfile::constant(0, horizon)); n],
    )
    .expect("wait-to-save instances are valid")
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub name: String,
    pub seed: u64,
    pub config: GeneratorConfig,
}

impl SuiteEntry {
    pub fn instance(&self) -> Result<Instance, GeneratorError> {
        generate_instance(self.seed, &self.config)
    }
}

/// Small random instances for exact cross-checks: `n` in `[4,7]`, horizon 120.
pub fn small_config(n: usize, waiting: WaitingMode) -> GeneratorConfig {
    GeneratorConfig {
        n,
        horizon: 120,
        window_width: 25,
        profile_segments: 3,
        waiting,
        cost: CostMode::TravelTime,
        grid: 20,
    }
}

pub fn small_suite(count: usize, waiting: WaitingMode, base_seed: u64) -> Vec<SuiteEntry> {
    let mut out = Vec::with_capacity(count);
    let mut seed = base_seed;
    while out.len() < count {
        let n = 4 + (seed % 4) as usize;
        let entry = SuiteEntry {
            name: format!("small-{waiting}-{seed}"),
            seed,
            config: small_config(n, waiting),
        };
        seed += 1;
        if entry.instance().is_ok() {
            out.push(entry);
        }
    }
    out
}

pub fn bench_config(n: usize, waiting: WaitingMode) -> GeneratorConfig {
    GeneratorConfig {
        n,
        horizon: 20 * n as i64 + 40,
        window_width: 80,
        profile_segments: 4,
        waiting,
        cost: CostMode::TravelTime,
        grid: 20,
    }
}

/// The default 40-instance bench: eight instances for each `n` in `[8,12]`,
/// cost equal to travel time.
pub fn default_bench_suite(waiting: WaitingMode) -> Vec<SuiteEntry> {
    let mut out = Vec::new();
    for n in 8..=12 {
        let mut seed = 1000 * n as u64;
        let mut made = 0;
        while made < 8 {
            let entry = SuiteEntry {
                name: format!("bench-n{n}-{seed}"),
                seed,
                config: bench_config(n, waiting),
            };
            seed += 1;
            if entry.instance().is_ok() {
                out.push(entry);
                made += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_are_deterministic() {
        let a = default_bench_suite(WaitingMode::Forbidden);
        assert_eq!(a.len(), 40);
        let b = default_bench_suite(WaitingMode::Forbidden);
        assert_eq!(a[7].instance().unwrap(), b[7].instance().unwrap());
        assert_eq!(small_suite(5, WaitingMode::Free, 0).len(), 5);
        assert_eq!(wait_to_save(3), wait_to_save(3));
    }
}

//! Instance data model: time windows, integer step profiles for travel time,
//! travel cost and waiting cost, plus JSON I/O, FIFO validation, seeded
//! generation and window/arc preprocessing.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type City = usize;
pub type Time = i64;
pub type Cost = i64;

/// Cities are tracked in `u64` bitmasks.
pub const MAX_CITIES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub earliest: Time,
    pub latest: Time,
}

impl TimeWindow {
    pub fn new(earliest: Time, latest: Time) -> Self {
        TimeWindow { earliest, latest }
    }

    pub fn contains(&self, t: Time) -> bool {
        self.earliest <= t && t <= self.latest
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfileError {
    #[error("profile has no breakpoints")]
    Empty,
    #[error("first breakpoint must start at t=0, found t={0}")]
    NotStartingAtZero(Time),
    #[error("breakpoints must be strictly increasing (t={0} after t={1})")]
    NotIncreasing(Time, Time),
    #[error("negative value {value} at t={time}")]
    Negative { time: Time, value: i64 },
    #[error("breakpoint t={0} lies beyond the horizon end {1}")]
    BeyondHorizon(Time, Time),
}

/// Right-continuous step function over the integer times `0..=horizon_end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepProfile {
    breakpoints: Vec<(Time, i64)>,
    horizon_end: Time,
}

impl StepProfile {
    pub fn new(breakpoints: Vec<(Time, i64)>, horizon_end: Time) -> Result<Self, ProfileError> {
        let first = breakpoints.first().ok_or(ProfileError::Empty)?;
        if first.0 != 0 {
            return Err(ProfileError::NotStartingAtZero(first.0));
        }
        for w in breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(ProfileError::NotIncreasing(w[1].0, w[0].0));
            }
        }
        for &(time, value) in &breakpoints {
            if value < 0 {
                return Err(ProfileError::Negative { time, value });
            }
            if time > horizon_end {
                return Err(ProfileError::BeyondHorizon(time, horizon_end));
            }
        }
        Ok(StepProfile {
            breakpoints,
            horizon_end,
        })
    }

    pub fn constant(value: i64, horizon_end: Time) -> Self {
        StepProfile {
            breakpoints: vec![(0, value)],
            horizon_end,
        }
    }

    /// Compresses a dense value table (`values[t]` for `t = 0..=horizon_end`).
    pub fn from_values(values: &[i64]) -> Self {
        assert!(!values.is_empty());
        let mut breakpoints: Vec<(Time, i64)> = Vec::new();
        for (t, &v) in values.iter().enumerate() {
            if breakpoints.last().map(|b| b.1) != Some(v) {
                breakpoints.push((t as Time, v));
            }
        }
        StepProfile {
            breakpoints,
            horizon_end: values.len() as Time - 1,
        }
    }

    pub fn breakpoints(&self) -> &[(Time, i64)] {
        &self.breakpoints
    }

    pub fn horizon_end(&self) -> Time {
        self.horizon_end
    }

    pub fn value(&self, t: Time) -> Option<i64> {
        if t < 0 || t > self.horizon_end {
            return None;
        }
        let idx = self.breakpoints.partition_point(|b| b.0 <= t);
        Some(self.breakpoints[idx - 1].1)
    }

    pub fn dense(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.horizon_end as usize + 1);
        for (k, &(start, v)) in self.breakpoints.iter().enumerate() {
            let end = self
                .breakpoints
                .get(k + 1)
                .map(|b| b.0)
                .unwrap_or(self.horizon_end + 1);
            out.extend(std::iter::repeat_n(v, (end - start) as usize));
        }
        out
    }

    pub fn is_constant_zero(&self) -> bool {
        self.breakpoints == [(0, 0)]
    }
}

/// Cost of waiting one time unit at a city, or `Forbidden` (infinite cost).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WaitingCost {
    Forbidden,
    Priced(StepProfile),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcData {
    pub from: City,
    pub to: City,
    pub travel_time: StepProfile,
    pub travel_cost: StepProfile,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("instance needs at least 2 cities, got {0}")]
    TooFewCities(usize),
    #[error("instance has {0} cities, at most {MAX_CITIES} are supported")]
    TooManyCities(usize),
    #[error("city {city}: window [{earliest},{latest}] is inverted")]
    WindowInverted {
        city: City,
        earliest: Time,
        latest: Time,
    },
    #[error("city {city}: window bound is negative")]
    NegativeWindow { city: City },
    #[error("city {city}: window opens at {earliest}, after the depot closes at {horizon}")]
    WindowOutsideHorizon {
        city: City,
        earliest: Time,
        horizon: Time,
    },
    #[error("arc ({from},{to}): {reason}")]
    BadArc { from: City, to: City, reason: String },
    #[error("arc ({from},{to}): {what} profile does not cover [0,{horizon}]")]
    ProfileGap {
        from: City,
        to: City,
        what: &'static str,
        horizon: Time,
    },
    #[error("arc ({from},{to}): {what} profile: {source}")]
    ArcProfile {
        from: City,
        to: City,
        what: &'static str,
        source: ProfileError,
    },
    #[error("city {city}: waiting profile: {reason}")]
    WaitingProfile { city: City, reason: String },
    #[error("arc ({from},{to}): FIFO violated, departing at {t} arrives later than departing at {t2}")]
    Fifo {
        from: City,
        to: City,
        t: Time,
        t2: Time,
    },
    #[error("city {city} has no {direction} arc")]
    Disconnected {
        city: City,
        direction: &'static str,
    },
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed instance: {0}")]
    Parse(String),
    #[error("invalid instance: {0}")]
    Validation(#[from] ValidationError),
}

/// A TD-TSPTW instance. City 0 is the depot; the depot's latest time `l_0`
/// is the horizon over which every profile is defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    windows: Vec<TimeWindow>,
    arcs: Vec<ArcData>,
    waiting: Vec<WaitingCost>,
    arc_lookup: Vec<Option<usize>>,
    tau: Vec<Vec<i64>>,
    cost: Vec<Vec<i64>>,
    wait: Vec<Option<Vec<i64>>>,
}

impl Instance {
    pub fn new(
        windows: Vec<TimeWindow>,
        mut arcs: Vec<ArcData>,
        waiting: Vec<WaitingCost>,
    ) -> Result<Self, ValidationError> {
        let n = windows.len();
        if n < 2 {
            return Err(ValidationError::TooFewCities(n));
        }
        if n > MAX_CITIES {
            return Err(ValidationError::TooManyCities(n));
        }
        let horizon = windows[0].latest;
        for (city, w) in windows.iter().enumerate() {
            if w.earliest < 0 || w.latest < 0 {
                return Err(ValidationError::NegativeWindow { city });
            }
            if w.earliest > w.latest {
                return Err(ValidationError::WindowInverted {
                    city,
                    earliest: w.earliest,
                    latest: w.latest,
                });
            }
            if w.earliest > horizon {
                return Err(ValidationError::WindowOutsideHorizon {
                    city,
                    earliest: w.earliest,
                    horizon,
                });
            }
        }
        if waiting.len() != n {
            return Err(ValidationError::WaitingProfile {
                city: waiting.len().min(n),
                reason: format!("expected {n} waiting entries, got {}", waiting.len()),
            });
        }

        arcs.sort_by_key(|a| (a.from, a.to));
        let mut arc_lookup = vec![None; n * n];
        for (idx, a) in arcs.iter().enumerate() {
            let bad = |reason: &str| ValidationError::BadArc {
                from: a.from,
                to: a.to,
                reason: reason.to_string(),
            };
            if a.from >= n || a.to >= n {
                return Err(bad("city out of range"));
            }
            if a.from == a.to {
                return Err(bad("self loops are not travel arcs"));
            }
            if arc_lookup[a.from * n + a.to].is_some() {
                return Err(bad("duplicate arc"));
            }
            arc_lookup[a.from * n + a.to] = Some(idx);
            for (what, p) in [("tau", &a.travel_time), ("cost", &a.travel_cost)] {
                if p.horizon_end() != horizon {
                    return Err(ValidationError::ProfileGap {
                        from: a.from,
                        to: a.to,
                        what,
                        horizon,
                    });
                }
            }
        }
        for city in 1..n {
            if !arcs.iter().any(|a| a.to == city) {
                return Err(ValidationError::Disconnected {
                    city,
                    direction: "inbound",
                });
            }
            if !arcs.iter().any(|a| a.from == city) {
                return Err(ValidationError::Disconnected {
                    city,
                    direction: "outbound",
                });
            }
        }
        for (city, w) in waiting.iter().enumerate() {
            if let WaitingCost::Priced(p) = w {
                if p.horizon_end() != horizon {
                    return Err(ValidationError::WaitingProfile {
                        city,
                        reason: format!("does not cover [0,{horizon}]"),
                    });
                }
            }
        }

        let tau: Vec<Vec<i64>> = arcs.iter().map(|a| a.travel_time.dense()).collect();
        let cost: Vec<Vec<i64>> = arcs.iter().map(|a| a.travel_cost.dense()).collect();
        let wait = waiting
            .iter()
            .map(|w| match w {
                WaitingCost::Forbidden => None,
                WaitingCost::Priced(p) => Some(p.dense()),
            })
            .collect();
        let inst = Instance {
            windows,
            arcs,
            waiting,
            arc_lookup,
            tau,
            cost,
            wait,
        };
        if let Some(v) = inst.validate_fifo().into_iter().next() {
            return Err(ValidationError::Fifo {
                from: v.from,
                to: v.to,
                t: v.t,
                t2: v.t2,
            });
        }
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.windows.len()
    }

    pub fn horizon(&self) -> Time {
        self.windows[0].latest
    }

    pub fn depot_open(&self) -> Time {
        self.windows[0].earliest
    }

    pub fn windows(&self) -> &[TimeWindow] {
        &self.windows
    }

    /// Window of `city` as given in the instance.
    pub fn window(&self, city: City) -> TimeWindow {
        self.windows[city]
    }

    pub fn earliest(&self, city: City) -> Time {
        self.windows[city].earliest
    }

    /// Latest visit time, clipped to the horizon.
    pub fn latest(&self, city: City) -> Time {
        self.windows[city].latest.min(self.horizon())
    }

    pub fn arcs(&self) -> &[ArcData] {
        &self.arcs
    }

    pub fn arc_index(&self, from: City, to: City) -> Option<usize> {
        if from >= self.n() || to >= self.n() {
            return None;
        }
        self.arc_lookup[from * self.n() + to]
    }

    pub fn has_arc(&self, from: City, to: City) -> bool {
        self.arc_index(from, to).is_some()
    }

    pub fn successors(&self, from: City) -> impl Iterator<Item = City> + '_ {
        (0..self.n()).filter(move |&to| self.has_arc(from, to))
    }

    pub fn waiting(&self) -> &[WaitingCost] {
        &self.waiting
    }

    fn slot(&self, t: Time) -> usize {
        assert!(
            (0..=self.horizon()).contains(&t),
            "time {t} outside [0,{}]",
            self.horizon()
        );
        t as usize
    }

    /// Travel time of arc index `arc` departing at `t`.
    pub fn tau_at(&self, arc: usize, t: Time) -> Time {
        self.tau[arc][self.slot(t)]
    }

    pub fn cost_at(&self, arc: usize, t: Time) -> Cost {
        self.cost[arc][self.slot(t)]
    }

    pub fn tau(&self, from: City, to: City, t: Time) -> Time {
        let arc = self.arc_index(from, to).expect("no such arc");
        self.tau_at(arc, t)
    }

    pub fn travel_cost(&self, from: City, to: City, t: Time) -> Cost {
        let arc = self.arc_index(from, to).expect("no such arc");
        self.cost_at(arc, t)
    }

    /// Visit time at `to` when leaving `from` at `t`: early arrivals wait for the window to open.
    pub fn arrival(&self, from: City, to: City, t: Time) -> Time {
        (t + self.tau(from, to, t)).max(self.earliest(to))
    }

    pub fn waiting_allowed(&self, city: City) -> bool {
        self.wait[city].is_some()
    }

    /// Cost of waiting at `city` from `t` to `t + 1`; `None` when forbidden.
    pub fn waiting_cost(&self, city: City, t: Time) -> Option<Cost> {
        self.wait[city].as_ref().map(|w| w[self.slot(t)])
    }

    /// Adjacent-pair FIFO check over the whole horizon.
    pub fn validate_fifo(&self) -> Vec<FifoViolation> {
        let mut out = Vec::new();
        for (idx, a) in self.arcs.iter().enumerate() {
            let tau = &self.tau[idx];
            for t in 0..tau.len().saturating_sub(1) {
                if tau[t] > tau[t + 1] + 1 {
                    out.push(FifoViolation {
                        from: a.from,
                        to: a.to,
                        t: t as Time,
                        t2: t as Time + 1,
                    });
                }
            }
        }
        out
    }

    /// Copy with every waiting cost replaced.
    pub fn with_waiting(&self, waiting: WaitingMode) -> Instance {
        let horizon = self.horizon();
        let w = match waiting {
            WaitingMode::Forbidden => WaitingCost::Forbidden,
            WaitingMode::Free => WaitingCost::Priced(StepProfile::constant(0, horizon)),
            WaitingMode::Priced => return self.clone(),
        };
        Instance::new(self.windows.clone(), self.arcs.clone(), vec![w; self.n()])
            .expect("waiting override keeps a valid instance valid")
    }

    /// True when every waiting cost is zero.
    pub fn free_waiting(&self) -> bool {
        self.waiting
            .iter()
            .all(|w| matches!(w, WaitingCost::Priced(p) if p.is_constant_zero()))
    }

    pub fn to_json(&self) -> String {
        let key = |a: &ArcData| format!("{},{}", a.from, a.to);
        let pairs = |p: &StepProfile| p.breakpoints().iter().map(|&(t, v)| [t, v]).collect();
        let tau = self.arcs.iter().map(|a| (key(a), pairs(&a.travel_time))).collect();
        let cost = if self.arcs.iter().all(|a| a.travel_cost == a.travel_time) {
            None
        } else {
            Some(self.arcs.iter().map(|a| (key(a), pairs(&a.travel_cost))).collect())
        };
        let mut wait = BTreeMap::new();
        for (city, w) in self.waiting.iter().enumerate() {
            match w {
                WaitingCost::Forbidden => {
                    wait.insert(city.to_string(), WaitEntry::Keyword(FORBIDDEN.to_string()));
                }
                WaitingCost::Priced(p) if !p.is_constant_zero() => {
                    wait.insert(city.to_string(), WaitEntry::Profile(pairs(p)));
                }
                WaitingCost::Priced(_) => {}
            }
        }
        let file = InstanceFile {
            n: self.n(),
            windows: self.windows.iter().map(|w| [w.earliest, w.latest]).collect(),
            arcs: self.arcs.iter().map(|a| [a.from, a.to]).collect(),
            tau,
            cost,
            wait,
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FifoViolation {
    pub from: City,
    pub to: City,
    pub t: Time,
    pub t2: Time,
}

pub fn validate_fifo(inst: &Instance) -> Vec<FifoViolation> {
    inst.validate_fifo()
}

const FORBIDDEN: &str = "forbidden";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    windows: Vec<[Time; 2]>,
    arcs: Vec<[City; 2]>,
    tau: BTreeMap<String, Vec<[i64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<BTreeMap<String, Vec<[i64; 2]>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    wait: BTreeMap<String, WaitEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum WaitEntry {
    Keyword(String),
    Profile(Vec<[i64; 2]>),
}

pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| InstanceError::Parse(e.to_string()))?;
    if file.windows.len() != file.n {
        return Err(InstanceError::Parse(format!(
            "\"n\" is {} but {} windows are given",
            file.n,
            file.windows.len()
        )));
    }
    let windows: Vec<TimeWindow> = file
        .windows
        .iter()
        .map(|w| TimeWindow::new(w[0], w[1]))
        .collect();
    let horizon = windows.first().map(|w| w.latest).unwrap_or(0);

    let profile = |from: City, to: City, what: &'static str, raw: &[[i64; 2]]| {
        StepProfile::new(raw.iter().map(|p| (p[0], p[1])).collect(), horizon).map_err(|source| {
            ValidationError::ArcProfile {
                from,
                to,
                what,
                source,
            }
        })
    };

    let mut arcs = Vec::with_capacity(file.arcs.len());
    for &[from, to] in &file.arcs {
        let key = format!("{from},{to}");
        let tau_raw = file.tau.get(&key).ok_or(ValidationError::ProfileGap {
            from,
            to,
            what: "tau",
            horizon,
        })?;
        let travel_time = profile(from, to, "tau", tau_raw)?;
        let travel_cost = match file.cost.as_ref().and_then(|c| c.get(&key)) {
            Some(raw) => profile(from, to, "cost", raw)?,
            None => travel_time.clone(),
        };
        arcs.push(ArcData {
            from,
            to,
            travel_time,
            travel_cost,
        });
    }
    for key in file.tau.keys().chain(file.cost.iter().flat_map(|c| c.keys())) {
        let known = file.arcs.iter().any(|[i, j]| *key == format!("{i},{j}"));
        if !known {
            return Err(InstanceError::Parse(format!(
                "profile given for \"{key}\" which is not in \"arcs\""
            )));
        }
    }

    let mut waiting = vec![WaitingCost::Priced(StepProfile::constant(0, horizon)); file.n];
    for (key, entry) in &file.wait {
        let city: City = key
            .parse()
            .map_err(|_| InstanceError::Parse(format!("bad waiting key \"{key}\"")))?;
        if city >= file.n {
            return Err(InstanceError::Parse(format!("waiting entry for unknown city {city}")));
        }
        waiting[city] = match entry {
            WaitEntry::Keyword(k) if k == FORBIDDEN => WaitingCost::Forbidden,
            WaitEntry::Keyword(k) => {
                return Err(InstanceError::Parse(format!("unknown waiting keyword \"{k}\"")))
            }
            WaitEntry::Profile(raw) => WaitingCost::Priced(
                StepProfile::new(raw.iter().map(|p| (p[0], p[1])).collect(), horizon).map_err(
                    |e| ValidationError::WaitingProfile {
                        city,
                        reason: e.to_string(),
                    },
                )?,
            ),
        };
    }
    Ok(Instance::new(windows, arcs, waiting)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaitingMode {
    Free,
    Forbidden,
    Priced,
}

impl fmt::Display for WaitingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaitingMode::Free => "free",
            WaitingMode::Forbidden => "forbidden",
            WaitingMode::Priced => "priced",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    /// `c_ij(t) = tau_ij(t)`.
    TravelTime,
    /// Independent random step profile.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub horizon: Time,
    pub window_width: Time,
    pub profile_segments: usize,
    pub waiting: WaitingMode,
    pub cost: CostMode,
    /// Side of the square the cities are scattered in.
    pub grid: i64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n: 6,
            horizon: 120,
            window_width: 20,
            profile_segments: 3,
            waiting: WaitingMode::Free,
            cost: CostMode::TravelTime,
            grid: 20,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("infeasible generator parameters: {0}")]
    InfeasibleParameters(String),
}

fn random_segments(rng: &mut ChaCha8Rng, horizon: Time, segments: usize) -> Vec<Time> {
    let segments = segments.max(1).min(horizon as usize + 1);
    let mut cuts: Vec<Time> = (1..=horizon).collect::<Vec<_>>();
    cuts.shuffle(rng);
    let mut starts: Vec<Time> = cuts.into_iter().take(segments - 1).collect();
    starts.push(0);
    starts.sort_unstable();
    starts
}

fn step_values(starts: &[Time], values: &[i64], horizon: Time) -> Vec<i64> {
    let mut out = Vec::with_capacity(horizon as usize + 1);
    for t in 0..=horizon {
        let k = starts.partition_point(|&s| s <= t) - 1;
        out.push(values[k]);
    }
    out
}

/// Deterministic random instance on a complete digraph. A random tour is
/// scheduled first and the windows are placed around its visit times, so the
/// result always admits at least one feasible tour.
pub fn generate_instance(seed: u64, cfg: &GeneratorConfig) -> Result<Instance, GeneratorError> {
    if cfg.n < 2 {
        return Err(GeneratorError::InfeasibleParameters("n must be at least 2".into()));
    }
    if cfg.n > MAX_CITIES {
        return Err(GeneratorError::InfeasibleParameters(format!("n must be at most {MAX_CITIES}")));
    }
    if cfg.window_width < 1 || cfg.horizon < 1 {
        return Err(GeneratorError::InfeasibleParameters(
            "horizon and window width must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = cfg.horizon;
    let n = cfg.n;
    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.gen_range(0..=cfg.grid) as f64,
                rng.gen_range(0..=cfg.grid) as f64,
            )
        })
        .collect();

    let mut arcs = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if from == to {
                continue;
            }
            let (dx, dy) = (points[from].0 - points[to].0, points[from].1 - points[to].1);
            let base = ((dx * dx + dy * dy).sqrt().round() as i64).max(1);
            let starts = random_segments(&mut rng, horizon, cfg.profile_segments);
            let factors: Vec<i64> = starts
                .iter()
                .map(|_| ((base as f64) * rng.gen_range(0.6..1.6)).round().max(1.0) as i64)
                .collect();
            let mut tau = step_values(&starts, &factors, horizon);
            // Clamp the arrival function t + tau(t) to be nondecreasing.
            for t in 1..tau.len() {
                tau[t] = tau[t].max(tau[t - 1] - 1);
            }
            let travel_time = StepProfile::from_values(&tau);
            let travel_cost = match cfg.cost {
                CostMode::TravelTime => travel_time.clone(),
                CostMode::Random => {
                    let starts = random_segments(&mut rng, horizon, cfg.profile_segments);
                    let values: Vec<i64> =
                        starts.iter().map(|_| rng.gen_range(1..=2 * base)).collect();
                    StepProfile::from_values(&step_values(&starts, &values, horizon))
                }
            };
            arcs.push(ArcData {
                from,
                to,
                travel_time,
                travel_cost,
            });
        }
    }

    let waiting: Vec<WaitingCost> = (0..n)
        .map(|_| match cfg.waiting {
            WaitingMode::Forbidden => WaitingCost::Forbidden,
            WaitingMode::Free => WaitingCost::Priced(StepProfile::constant(0, horizon)),
            WaitingMode::Priced => {
                let starts = random_segments(&mut rng, horizon, cfg.profile_segments);
                let values: Vec<i64> = starts.iter().map(|_| rng.gen_range(0..=3)).collect();
                WaitingCost::Priced(StepProfile::from_values(&step_values(
                    &starts, &values, horizon,
                )))
            }
        })
        .collect();

    let mut order: Vec<City> = (1..n).collect();
    order.shuffle(&mut rng);
    let tau_of = |from: City, to: City, t: Time| -> Time {
        let a = arcs.iter().find(|a| a.from == from && a.to == to).unwrap();
        a.travel_time.value(t).unwrap()
    };
    let mut windows = vec![TimeWindow::new(0, horizon); n];
    let mut t: Time = 0;
    let mut prev = 0;
    for &city in &order {
        if t > horizon {
            break;
        }
        t += tau_of(prev, city, t);
        if t > horizon {
            break;
        }
        let offset = rng.gen_range(0..=cfg.window_width);
        let earliest = (t - offset).max(0);
        let latest = (earliest + cfg.window_width).min(horizon);
        windows[city] = TimeWindow::new(earliest, latest);
        prev = city;
    }
    if t <= horizon {
        t += tau_of(prev, 0, t);
    }
    if t > horizon {
        return Err(GeneratorError::InfeasibleParameters(format!(
            "horizon {horizon} is too short for the seed tour"
        )));
    }
    Instance::new(windows, arcs, waiting)
        .map_err(|e| GeneratorError::InfeasibleParameters(e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PreprocessReport {
    pub removed_arcs: Vec<(City, City)>,
    /// `(city, old earliest, new earliest)`.
    pub tightened_windows: Vec<(City, Time, Time)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("instance is infeasible: city {city} {reason}")]
    InfeasibleInstance { city: City, reason: String },
}

/// Removes arcs that cannot be used on time and raises window openings to the
/// earliest possible arrival, until nothing changes. Latest times are never
/// tightened since waiting after a visit is allowed.
pub fn preprocess(inst: &Instance) -> Result<(Instance, PreprocessReport), PreprocessError> {
    let n = inst.n();
    let mut earliest: Vec<Time> = (0..n).map(|i| inst.earliest(i)).collect();
    let mut alive: Vec<bool> = vec![true; inst.arcs().len()];
    let mut report = PreprocessReport::default();
    let first_arrival = |idx: usize, e_from: Time| e_from + inst.tau_at(idx, e_from);

    loop {
        let mut changed = false;
        for (idx, a) in inst.arcs().iter().enumerate() {
            if alive[idx] && first_arrival(idx, earliest[a.from]) > inst.latest(a.to) {
                alive[idx] = false;
                report.removed_arcs.push((a.from, a.to));
                changed = true;
            }
        }
        for city in 1..n {
            let best = inst
                .arcs()
                .iter()
                .enumerate()
                .filter(|(idx, a)| alive[*idx] && a.to == city)
                .map(|(idx, a)| first_arrival(idx, earliest[a.from]))
                .min();
            let Some(best) = best else {
                return Err(PreprocessError::InfeasibleInstance {
                    city,
                    reason: "has no usable inbound arc".into(),
                });
            };
            if best > earliest[city] {
                if best > inst.latest(city) {
                    return Err(PreprocessError::InfeasibleInstance {
                        city,
                        reason: format!("cannot be reached before its window closes at {}", inst.latest(city)),
                    });
                }
                report.tightened_windows.push((city, earliest[city], best));
                earliest[city] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for city in 0..n {
        let has = |dir_out: bool| {
            inst.arcs()
                .iter()
                .enumerate()
                .any(|(idx, a)| alive[idx] && if dir_out { a.from == city } else { a.to == city })
        };
        if !has(true) {
            return Err(PreprocessError::InfeasibleInstance {
                city,
                reason: "has no usable outbound arc".into(),
            });
        }
        if city != 0 && !has(false) {
            return Err(PreprocessError::InfeasibleInstance {
                city,
                reason: "has no usable inbound arc".into(),
            });
        }
    }

    let windows = (0..n)
        .map(|i| TimeWindow::new(earliest[i], inst.window(i).latest))
        .collect();
    let arcs = inst
        .arcs()
        .iter()
        .zip(&alive)
        .filter(|(_, &keep)| keep)
        .map(|(a, _)| a.clone())
        .collect();
    let reduced = Instance::new(windows, arcs, inst.waiting().to_vec())
        .expect("preprocessing preserves validity");
    Ok((reduced, report))
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use tdtsp_core::ddd::Epsilon;
use tdtsp_core::formulations::{FormulationKind, Schedule};
use tdtsp_core::instance::{generate_instance, parse_instance, CostMode, GeneratorConfig, Instance, WaitingMode};
use tdtsp_core::mip::Backend;
use tdtsp_core::report::{
    cross_check, run_solver, summarize, validation_suite, RunOptions, RunRecord, RunStatus, Solver,
};
use tdtsp_core::suites::{default_bench_suite, small_suite};

#[derive(Parser)]
#[command(name = "tdtsp", version, about = "Time-dependent TSP with time windows solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance file and print its run record as JSON.
    Solve {
        path: PathBuf,
        #[arg(long, default_value = "z-agg")]
        formulation: Solver,
        #[arg(long, default_value = "0.01")]
        epsilon: Epsilon,
        /// Seconds.
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long, value_enum, default_value_t = WaitingArg::AsIs)]
        waiting: WaitingArg,
        /// JSON-lines file with one record per iteration.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Writes the record and the best schedule as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate one instance, or a whole named suite into a directory.
    Generate {
        #[arg(long, value_enum)]
        suite: Option<SuiteArg>,
        /// Target directory for `--suite`.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 120)]
        horizon: i64,
        #[arg(long, default_value_t = 20)]
        window_width: i64,
        #[arg(long, default_value_t = 3)]
        segments: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Forbidden)]
        waiting: ModeArg,
        #[arg(long, value_enum, default_value_t = CostArg::TravelTime)]
        cost: CostArg,
        /// Output file, stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every instance of a directory with several formulations.
    Bench {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "path,z,z-agg")]
        formulations: Vec<Solver>,
        #[arg(long, default_value = "0.01")]
        epsilon: Epsilon,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        /// Instances solved in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Cross-check every solver against the exact oracle on small instances.
    Validate {
        #[arg(long, default_value_t = 7)]
        n_max: usize,
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Free)]
        waiting: ModeArg,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WaitingArg {
    AsIs,
    Forbid,
    Free,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Free,
    Forbidden,
    Priced,
}

impl From<ModeArg> for WaitingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Free => WaitingMode::Free,
            ModeArg::Forbidden => WaitingMode::Forbidden,
            ModeArg::Priced => WaitingMode::Priced,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    TravelTime,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    /// The 40-instance benchmark, n in [8,12].
    Bench,
    /// 100 small instances, n in [4,7].
    Small,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve {
            path,
            formulation,
            epsilon,
            time_limit,
            waiting,
            trace,
            out,
        } => solve(&path, formulation, epsilon, time_limit, waiting, trace, out),
        Command::Generate {
            suite,
            dir,
            seed,
            n,
            horizon,
            window_width,
            segments,
            waiting,
            cost,
            out,
        } => {
            if let Some(suite) = suite {
                let dir = dir.context("--suite needs --dir")?;
                return generate_suite(suite, waiting.into(), &dir);
            }
            let cfg = GeneratorConfig {
                n,
                horizon,
                window_width,
                profile_segments: segments,
                waiting: waiting.into(),
                cost: match cost {
                    CostArg::TravelTime => CostMode::TravelTime,
                    CostArg::Random => CostMode::Random,
                },
                ..Default::default()
            };
            let inst = generate_instance(seed, &cfg)?;
            write_or_print(out.as_deref(), &inst.to_json())?;
            Ok(0)
        }
        Command::Bench {
            dir,
            formulations,
            epsilon,
            time_limit,
            jobs,
            csv,
        } => bench(&dir, &formulations, epsilon, time_limit, jobs, csv.as_deref()),
        Command::Validate {
            n_max,
            seeds,
            waiting,
            time_limit,
        } => validate(n_max, seeds, waiting.into(), time_limit),
    }
}

fn limit(seconds: f64) -> Result<Option<Duration>> {
    if seconds.is_nan() || seconds < 0.0 {
        bail!("time limit must be nonnegative");
    }
    Ok(seconds.is_finite().then(|| Duration::from_secs_f64(seconds)))
}

fn load(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    record: &'a RunRecord,
    schedule: Option<&'a Schedule>,
}

fn solve(
    path: &Path,
    solver: Solver,
    epsilon: Epsilon,
    time_limit: f64,
    waiting: WaitingArg,
    trace: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let mut inst = load(path)?;
    inst = match waiting {
        WaitingArg::AsIs => inst,
        WaitingArg::Forbid => inst.with_waiting(WaitingMode::Forbidden),
        WaitingArg::Free => inst.with_waiting(WaitingMode::Free),
    };
    let opts = RunOptions {
        epsilon,
        time_limit: limit(time_limit)?,
        backend: Backend::from_env()?,
    };
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let outcome = run_solver(&name, &inst, solver, &opts);
    if let Some(p) = trace {
        let mut f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        for r in &outcome.trace {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
    }
    println!("{}", serde_json::to_string(&outcome.record)?);
    if let Some(p) = out {
        let report = SolveReport {
            record: &outcome.record,
            schedule: outcome.schedule.as_ref(),
        };
        fs::write(&p, serde_json::to_string_pretty(&report)?).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(e) = &outcome.record.error {
        eprintln!("error: {e}");
    }
    Ok(outcome.record.status.exit_code() as u8)
}

fn generate_suite(suite: SuiteArg, waiting: WaitingMode, dir: &Path) -> Result<u8> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let entries = match suite {
        SuiteArg::Bench => default_bench_suite(waiting),
        SuiteArg::Small => small_suite(100, waiting, 0),
    };
    for e in &entries {
        let inst = e.instance()?;
        fs::write(dir.join(format!("{}.json", e.name)), inst.to_json())?;
    }
    eprintln!("wrote {} instances to {}", entries.len(), dir.display());
    Ok(0)
}

fn bench(
    dir: &Path,
    solvers: &[Solver],
    epsilon: Epsilon,
    time_limit: f64,
    jobs: usize,
    csv_out: Option<&Path>,
) -> Result<u8> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no instance files in {}", dir.display());
    }
    let opts = RunOptions {
        epsilon,
        time_limit: limit(time_limit)?,
        backend: Backend::from_env()?,
    };
    let one = |path: &PathBuf| -> Vec<RunRecord> {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match load(path) {
            Ok(inst) => solvers.iter().map(|&s| run_solver(&name, &inst, s, &opts).record).collect(),
            Err(e) => solvers
                .iter()
                .map(|&s| RunRecord {
                    instance: name.clone(),
                    formulation: s.name().into(),
                    status: RunStatus::Error,
                    lb: None,
                    ub: None,
                    gap: None,
                    iterations: 0,
                    nodes: 0,
                    arcs: 0,
                    paths: 0,
                    wall_ms: 0,
                    error: Some(format!("{e:#}")),
                })
                .collect(),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let records: Vec<RunRecord> = pool.install(|| files.par_iter().flat_map_iter(one).collect());

    if let Some(p) = csv_out {
        let mut w = csv::Writer::from_path(p).with_context(|| format!("writing {}", p.display()))?;
        for r in &records {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    println!("{:<12} {:>6} {:>8} {:>18}", "formulation", "runs", "solved", "mean gap unsolved");
    for s in summarize(&records) {
        let gap = s.mean_unsolved_gap.map_or("-".to_string(), |g| format!("{:.2}%", 100.0 * g));
        println!("{:<12} {:>6} {:>8} {:>18}", s.formulation, s.runs, s.solved, gap);
    }
    Ok(0)
}

fn validate(n_max: usize, seeds: usize, waiting: WaitingMode, time_limit: f64) -> Result<u8> {
    let solvers = [
        Solver::Ddd(FormulationKind::PathArc),
        Solver::Ddd(FormulationKind::Z),
        Solver::Ddd(FormulationKind::ZAgg),
        Solver::Full,
    ];
    let opts = RunOptions {
        epsilon: Epsilon::ZERO,
        time_limit: limit(time_limit)?,
        backend: Backend::from_env()?,
    };
    let suite = validation_suite(n_max, seeds, waiting);
    let mut mismatches = Vec::new();
    for e in &suite {
        for m in cross_check(e, &solvers, &opts) {
            println!("{}", serde_json::to_string(&m)?);
            mismatches.push(m);
        }
    }
    eprintln!(
        "{} instances, {} solvers, {} mismatches",
        suite.len(),
        solvers.len(),
        mismatches.len()
    );
    Ok(if mismatches.is_empty() { 0 } else { 1 })
}

//! Command-line front end and file formats.
//!
//! Exit codes: 0 ok, 1 invalid model, 2 I/O or parse failure, 3 equilibrium
//! search did not converge, 4 size cap exceeded, 5 policy file does not
//! belong to the model, 6 undiscounted model where a discount is required.

pub mod files;

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::belief_engine::{TreeOptions, DEFAULT_NODE_CAP};
use crate::error::{Error, Result};
use crate::mfg_solver::{choose_horizon, find_equilibrium, truncation_bound, EquilibriumOptions};
use crate::nagent_sim::{candidate_set, meanfield_l1, nash_gap, simulate, Profile};
use crate::par::Parallelism;
use crate::risk_augmentation::DEFAULT_LEVEL_CAP;

pub use files::{load_model, read_model, spec_hash, write_sweep, EquilibriumFile, SweepRow, SWEEP_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_CAP: i32 = 4;
pub const EXIT_HASH: i32 = 5;
pub const EXIT_BETA: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "pomfg", version, about = "Partially observed risk-sensitive mean-field game solver")]
pub struct Cli {
    /// Worker threads for parallel loops (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file.
    Validate { model: PathBuf },
    /// Compute a mean-field equilibrium and write it as JSON.
    Solve {
        model: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
        /// Largest number of cost levels allowed at any stage.
        #[arg(long, default_value_t = DEFAULT_LEVEL_CAP)]
        level_cap: usize,
        /// Largest number of belief-tree nodes.
        #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
        node_cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the N-agent game with everyone on the equilibrium policy.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        agents: usize,
        #[arg(long, default_value_t = 10_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate unilateral-deviation gaps over a sweep of population sizes.
    NashGap {
        model: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value = "16,64,256,1024")]
        sweep: String,
        #[arg(long, default_value_t = 20_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random deviation policies.
        #[arg(long, default_value_t = 2)]
        random_candidates: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick a horizon for a discounted model.
    Horizon {
        model: PathBuf,
        #[arg(long)]
        epsilon: f64,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidSpec(_) => EXIT_INVALID,
        Error::LevelCap { .. } | Error::NodeCap { .. } | Error::EnumerationCap { .. } => EXIT_CAP,
        Error::HashMismatch { .. } => EXIT_HASH,
        Error::UndiscountedHorizon => EXIT_BETA,
        _ => EXIT_IO,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    let result = with_threads(cli.threads, || execute(&cli.command));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R>(_threads: Option<usize>, f: impl FnOnce() -> Result<R>) -> Result<R> {
    f()
}

pub fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Validate { model } => cmd_validate(model),
        Command::Solve {
            model,
            tol,
            max_iter,
            damping,
            level_cap,
            node_cap,
            out,
        } => {
            let opts = EquilibriumOptions {
                tol: *tol,
                max_iter: *max_iter,
                damping: *damping,
                level_cap: *level_cap,
                tree: TreeOptions {
                    node_cap: *node_cap,
                    ..Default::default()
                },
            };
            cmd_solve(model, &opts, out)
        }
        Command::Simulate {
            model,
            policy,
            agents,
            episodes,
            seed,
            out,
        } => cmd_simulate(model, policy, *agents, *episodes, *seed, out),
        Command::NashGap {
            model,
            policy,
            sweep,
            episodes,
            seed,
            random_candidates,
            out,
        } => cmd_nash_gap(model, policy, sweep, *episodes, *seed, *random_candidates, out),
        Command::Horizon { model, epsilon } => cmd_horizon(model, *epsilon),
    }
}

pub fn cmd_validate(model: &Path) -> Result<i32> {
    let spec = read_model(model)?;
    let report = spec.validate();
    if report.is_valid() {
        println!("{}: ok", model.display());
        Ok(EXIT_OK)
    } else {
        eprint!("{report}");
        Ok(EXIT_INVALID)
    }
}

pub fn cmd_solve(model: &Path, opts: &EquilibriumOptions, out: &Path) -> Result<i32> {
    let spec = load_model(model)?;
    let eq = find_equilibrium(&spec, opts)?;
    EquilibriumFile::from_artifact(&spec, &eq).write(out)?;
    eprintln!(
        "value {:.12} residual {:.3e} gap {:.3e} after {} iterations",
        eq.value, eq.nce_residual, eq.optimality_gap, eq.iterations
    );
    if let Some(p) = eq.cycle {
        eprintln!("iteration entered a cycle of period {p}");
    }
    if eq.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("not converged");
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn load_pair(model: &Path, policy: &Path) -> Result<(crate::GameSpec, EquilibriumFile)> {
    let spec = load_model(model)?;
    let file = EquilibriumFile::read(policy)?;
    file.check_hash(&spec)?;
    Ok((spec, file))
}

fn write_rows(out: &Path, rows: &[SweepRow]) -> Result<()> {
    write_sweep(BufWriter::new(File::create(out)?), rows)
}

pub fn cmd_simulate(model: &Path, policy: &Path, agents: usize, episodes: usize, seed: u64, out: &Path) -> Result<i32> {
    let (spec, file) = load_pair(model, policy)?;
    let pi = file.policy_tree(&spec)?;
    let target = file.measure_flow(&spec)?.marginals(spec.n_states());
    let report = simulate(&spec, Profile::Shared(&pi), agents, episodes, seed, Parallelism::default())?;
    let (mean, se) = report.population_mean();
    let row = SweepRow {
        n: agents,
        policy: "equilibrium".into(),
        mean_cost: mean,
        std_err: se,
        gap: 0.0,
        gap_ci_lo: 0.0,
        gap_ci_hi: 0.0,
        meanfield_l1: meanfield_l1(&report, &target),
    };
    write_rows(out, &[row])?;
    Ok(EXIT_OK)
}

fn parse_sweep(sweep: &str) -> Result<Vec<usize>> {
    let ns = sweep
        .split(',')
        .map(|s| s.trim().parse::<usize>().ok().filter(|&n| n > 0))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::InvalidArgument(format!("bad sweep {sweep:?}")))?;
    if ns.is_empty() {
        return Err(Error::InvalidArgument("empty sweep".into()));
    }
    Ok(ns)
}

pub fn cmd_nash_gap(
    model: &Path,
    policy: &Path,
    sweep: &str,
    episodes: usize,
    seed: u64,
    random_candidates: usize,
    out: &Path,
) -> Result<i32> {
    let ns = parse_sweep(sweep)?;
    let (spec, file) = load_pair(model, policy)?;
    let pi = file.policy_tree(&spec)?;
    let frozen = file.frozen_game(&spec)?;
    let target = file.measure_flow(&spec)?.marginals(spec.n_states());
    let candidates = candidate_set(&frozen, random_candidates, seed)?;
    let mut rows = Vec::new();
    for n in ns {
        let rep = nash_gap(&spec, &pi, &candidates, &target, n, episodes, seed, Parallelism::default())?;
        let (lo, hi) = rep.epsilon_ci();
        eprintln!(
            "N={n}: gap {:.6e} [{lo:.6e}, {hi:.6e}], mean-field L1 {:.6e}",
            rep.epsilon(),
            rep.meanfield_l1
        );
        rows.extend(rep.rows.iter().map(|r| SweepRow {
            n,
            policy: r.policy.clone(),
            mean_cost: r.mean_cost,
            std_err: r.std_err,
            gap: r.gap,
            gap_ci_lo: r.ci_lo,
            gap_ci_hi: r.ci_hi,
            meanfield_l1: rep.meanfield_l1,
        }));
    }
    write_rows(out, &rows)?;
    Ok(EXIT_OK)
}

pub fn cmd_horizon(model: &Path, epsilon: f64) -> Result<i32> {
    let spec = load_model(model)?;
    let theta = truncation_bound(&spec)?;
    let t = choose_horizon(&spec, epsilon)?;
    println!("T = {t}");
    println!("theta = {theta}");
    Ok(EXIT_OK)
}

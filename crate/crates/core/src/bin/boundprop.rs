use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use boundprop::io::{self, BoundsReport, ReportFormat, RunMetadata};
use boundprop::netgen::{self, RingProfile};
use boundprop::oracle::{self, DEFAULT_STATE_CAP};
use boundprop::{apply_evidence, propagate, Error, Evidence, Network, PropagationConfig, VarSet};

const STATE_CAP_VAR: &str = "BOUNDPROP_STATE_CAP";

#[derive(Parser)]
#[command(name = "boundprop", version, about = "Guaranteed bounds on marginals of discrete graphical models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated network (and evidence) in UAI format.
    Generate(GenerateArgs),
    /// Run bound propagation and write a bounds report.
    Bound(BoundArgs),
    /// Brute-force exact marginals.
    Exact(ExactArgs),
    /// Join a bounds report with exact marginals and check the sandwich.
    Report(ReportArgs),
    /// Fixed point of the homogeneous ring bound map.
    Ringfp(RingfpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Ring,
    Grid,
    Bipartite,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Constant,
    Fig3like,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Ring length, grid side or `ROWSxCOLS`, or bi-partite layer size.
    #[arg(long)]
    size: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "constant")]
    profile: Profile,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    w: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta: f64,
    /// Clamp every K-th child of a bi-partite network (0 disables).
    #[arg(long, default_value_t = 0)]
    evidence_every: usize,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(short, long)]
    evidence: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BoundArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    evidence: Option<PathBuf>,
    /// Cluster state-space budgets, run in order with warm starts.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    omega: Vec<u128>,
    #[arg(long, default_value_t = 16)]
    mar_cap: u128,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 20000)]
    max_rows: usize,
    #[arg(long)]
    parallel: bool,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetsKind {
    Single,
    Pairs,
    File,
}

#[derive(clap::Args)]
struct ExactArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    evidence: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "single")]
    sets: SetsKind,
    /// One variable set per line, indices separated by spaces (with `--sets file`).
    #[arg(long)]
    sets_file: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct ReportArgs {
    #[arg(long)]
    bounds: PathBuf,
    #[arg(long)]
    exact: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct RingfpArgs {
    #[arg(long, allow_negative_numbers = true)]
    w: f64,
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iterations: usize,
}

enum Failure {
    Input(String),
    Cap(String),
    Soundness(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::StateSpaceExceeded { .. } => Failure::Cap(msg),
            Error::Soundness(_) => Failure::Soundness(msg),
            Error::Infeasible { .. }
            | Error::Unbounded
            | Error::IterationLimit(_)
            | Error::InsufficientHistory { .. }
            | Error::NoConvergence { .. } => Failure::Internal(msg),
            _ => Failure::Input(msg),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn state_cap() -> CliResult<u128> {
    match std::env::var(STATE_CAP_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Input(format!("{STATE_CAP_VAR}={v} is not a non-negative integer"))),
        Err(_) => Ok(DEFAULT_STATE_CAP),
    }
}

/// Network with evidence clamped away, plus the reduced-to-original index map.
fn load(input: &Path, evidence: Option<&Path>) -> CliResult<(Network, Vec<usize>)> {
    let net = io::parse_uai(&read(input)?)?;
    let ev = match evidence {
        Some(p) => io::parse_evidence(&read(p)?)?,
        None => Evidence::new(),
    };
    let reduced = apply_evidence(&net, &ev)?;
    if reduced.zero_weight {
        return Err(Failure::Input("evidence has zero probability".into()));
    }
    Ok((reduced.network, reduced.new_to_old))
}

fn parse_size(size: &str) -> CliResult<(usize, usize)> {
    let bad = || Failure::Input(format!("bad --size {size:?}"));
    match size.split_once(['x', 'X']) {
        Some((r, c)) => Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?)),
        None => {
            let n = size.trim().parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

fn generate(args: GenerateArgs) -> CliResult<()> {
    let (rows, cols) = parse_size(&args.size)?;
    let (net, ev) = match args.family {
        Family::Ring => {
            if rows != cols {
                return Err(Failure::Input("ring --size takes a single length".into()));
            }
            let profile = match args.profile {
                Profile::Constant => RingProfile::Constant {
                    w: args.w,
                    theta: args.theta,
                },
                Profile::Fig3like => RingProfile::Fig3Like,
            };
            (netgen::gen_ring(rows, profile)?, Evidence::new())
        }
        Family::Grid => (netgen::gen_ising_grid(rows, cols, args.seed)?, Evidence::new()),
        Family::Bipartite => {
            if rows != cols {
                return Err(Failure::Input("bipartite --size takes a single layer size".into()));
            }
            netgen::gen_bipartite(rows, args.seed, args.evidence_every)?
        }
    };
    write(&args.output, &io::write_uai(&net))?;
    if let Some(p) = &args.evidence {
        write(p, &io::write_evidence(&ev))?;
    }
    Ok(())
}

fn bound(args: BoundArgs) -> CliResult<()> {
    let (net, names) = load(&args.input, args.evidence.as_deref())?;
    let cfg = PropagationConfig {
        omega_schedule: args.omega.clone(),
        mar_state_cap: args.mar_cap,
        convergence_threshold: args.tol,
        max_sweeps: args.max_sweeps,
        max_rows: args.max_rows,
        parallel: args.parallel,
        ..PropagationConfig::default()
    };
    let start = Instant::now();
    let (store, conv) = propagate(&net, &cfg)?;
    store.check_invariants(io::SANDWICH_SLACK)?;
    let mut report = BoundsReport::from_store(&store, Some(&names), None);
    report.metadata = RunMetadata {
        omega_schedule: args.omega,
        sweeps: conv.sweeps.len(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        converged: conv.converged,
    };
    write(&args.output, &io::write_report(&report, ReportFormat::Csv)?)?;
    if let Some(p) = &args.json {
        write(p, &io::write_report(&report, ReportFormat::Json)?)?;
    }
    println!(
        "sweeps: {} converged: {} time: {:.3}s",
        report.metadata.sweeps, report.metadata.converged, report.metadata.wall_time_secs
    );
    for line in report.summary_lines() {
        println!("{line}");
    }
    Ok(())
}

fn parse_sets_file(text: &str, names: &[usize]) -> CliResult<Vec<VarSet>> {
    let mut sets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut set = Vec::new();
        for tok in line.split_whitespace() {
            let orig: usize = tok
                .parse()
                .map_err(|_| Failure::Input(format!("sets file line {}: bad index {tok:?}", i + 1)))?;
            let v = names
                .iter()
                .position(|&o| o == orig)
                .ok_or_else(|| Failure::Input(format!("sets file line {}: variable {orig} is unknown or observed", i + 1)))?;
            set.push(v);
        }
        set.sort_unstable();
        set.dedup();
        sets.push(set);
    }
    Ok(sets)
}

fn exact(args: ExactArgs) -> CliResult<()> {
    let (net, names) = load(&args.input, args.evidence.as_deref())?;
    let sets = match args.sets {
        SetsKind::Single => oracle::single_sets(&net),
        SetsKind::Pairs => oracle::pair_sets(&net),
        SetsKind::File => {
            let path = args
                .sets_file
                .as_ref()
                .ok_or_else(|| Failure::Input("--sets file needs --sets-file".into()))?;
            parse_sets_file(&read(path)?, &names)?
        }
    };
    let exact = oracle::exact_marginals(&net, &sets, state_cap()?)?;
    write(&args.output, &io::write_exact_csv(&exact, Some(&names)))
}

fn report(args: ReportArgs) -> CliResult<()> {
    let bounds = io::parse_report_csv(&read(&args.bounds)?)?;
    let exact = io::parse_exact_csv(&read(&args.exact)?)?;
    let merged = io::merge_exact(bounds, &exact)?;
    write(&args.output, &io::write_report(&merged, ReportFormat::Csv)?)?;
    for line in merged.summary_lines() {
        println!("{line}");
    }
    Ok(())
}

fn ringfp(args: RingfpArgs) -> CliResult<()> {
    let fp = oracle::ring_fixed_point(args.w, args.theta, args.tol, args.max_iterations)?;
    println!("mean_upper {}", io::fmt_float(fp.mean_upper));
    println!("mean_lower {}", io::fmt_float(fp.mean_lower));
    println!("gap {}", io::fmt_float(fp.gap()));
    println!("alpha {}", io::fmt_float(fp.alpha));
    println!("iterations {}", fp.iterations);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Bound(a) => bound(a),
        Command::Exact(a) => exact(a),
        Command::Report(a) => report(a),
        Command::Ringfp(a) => ringfp(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, kind, msg) = match f {
                Failure::Input(m) => (2, "input error", m),
                Failure::Cap(m) => (3, "cap exceeded", m),
                Failure::Soundness(m) => (4, "soundness violation", m),
                Failure::Internal(m) => (1, "error", m),
            };
            eprintln!("boundprop: {kind}: {msg}");
            ExitCode::from(code)
        }
    }
}

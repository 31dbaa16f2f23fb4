//! Command-line interface: generate instances, compute benchmarks, run
//! mechanisms, audit incentives, and simulate across many realizations.
//!
//! Conventions shared by every subcommand:
//! - instances travel as JSON files (see `graph::Instance::from_json`);
//! - tabular output is CSV whose first line is a `#` comment carrying the
//!   configuration digest and seed, so results stay attributable;
//! - per-run output is one JSON object per line, which makes seed sweeps
//!   easy to stream into other tools;
//! - exit code 1 signals input or I/O problems, 3 a violated internal
//!   invariant, and 2 (from argument parsing) a usage error.
//!
//! The exhaustive-search budget defaults to `CHAINSTITCH_SEARCH_BUDGET` when
//! that variable is set and can be overridden per call with `--budget`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::benchmarks::{self, BenchKind};
use crate::graph::{CompatGraph, Instance, NodeId};
use crate::incentives::{self, Mechanism};
use crate::instances::{self, Certificates, Family};
use crate::params::{FPolicy, MechConfig};
use crate::trace::Status;
use crate::SearchBudget;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "chainstitch",
    version,
    about = "Altruist-rooted donation-chain mechanisms on semi-random compatibility graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a structured family instance or a random fuzz instance as JSON.
    Generate(GenerateArgs),
    /// Compute the exact benchmarks of one realization as CSV.
    Bench(BenchArgs),
    /// Run a mechanism on one or more realizations, one JSON line each.
    Run(RunArgs),
    /// Exhaustively audit hiding and diversion strategies (small instances).
    Audit(AuditArgs),
    /// Aggregate a mechanism over many consecutive-seed realizations.
    Montecarlo(MonteCarloArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Structured family: worst-case-ir, semi-random-ir, worst-case-ic, or
    /// semi-random-ic.
    #[arg(long, required_unless_present = "fuzz_seed", conflicts_with = "fuzz_seed")]
    family: Option<String>,
    /// Family scale parameter.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Cross-hospital edge probability.
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// Generate a small random instance from this seed instead of a family.
    #[arg(long)]
    fuzz_seed: Option<u64>,
    /// Node cap for random instances.
    #[arg(long, default_value_t = 12)]
    max_n: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Segment threshold for the segment-sensitive benchmarks.
    #[arg(long)]
    s: u32,
    /// Realization seed for the random cross edges.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exhaustive-search node budget override.
    #[arg(long)]
    budget: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Mechanism: segment, average, or naive-opt.
    #[arg(long)]
    mechanism: String,
    /// Target segment length.
    #[arg(long)]
    s: u32,
    /// Fixed scale parameter; derived from the view size when omitted.
    #[arg(long)]
    f: Option<u32>,
    /// First realization seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// How many consecutive seeds to run.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Exhaustive-search node budget override.
    #[arg(long)]
    budget: Option<usize>,
    /// Also write each run's full event trace, one JSON array per line.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Mechanism: segment, average, or naive-opt.
    #[arg(long)]
    mechanism: String,
    /// Target segment length.
    #[arg(long)]
    s: u32,
    /// Fixed scale parameter; derived from the view size when omitted.
    #[arg(long)]
    f: Option<u32>,
    /// Realization seed shared by the truthful and manipulated runs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Audit a single hospital; all hospitals when omitted.
    #[arg(long)]
    hospital: Option<u32>,
    /// Exhaustive-search node budget override.
    #[arg(long)]
    budget: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MonteCarloArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Mechanism: segment, average, or naive-opt.
    #[arg(long)]
    mechanism: String,
    /// Target segment length.
    #[arg(long)]
    s: u32,
    /// Fixed scale parameter; derived from the view size when omitted.
    #[arg(long)]
    f: Option<u32>,
    /// First trial seed.
    #[arg(long, default_value_t = 0)]
    seed0: u64,
    /// Number of trials, with seeds seed0, seed0 + 1, ...
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Certificate key to compare mean welfare against, e.g. "sopt:8".
    #[arg(long)]
    benchmark: Option<String>,
    /// Exhaustive-search node budget override.
    #[arg(long)]
    budget: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Entry point and dispatch
// ---------------------------------------------------------------------------

/// Parse arguments from the process environment and execute. Argument errors
/// exit with code 2 inside clap; everything else maps to 0, 1, or 3.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let invariant = matches!(
                err.downcast_ref::<crate::Error>(),
                Some(crate::Error::InvariantViolation(_))
            );
            ExitCode::from(if invariant { 3 } else { 1 })
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Bench(args) => bench(args),
        Command::Run(args) => run_mechanism(args),
        Command::Audit(args) => audit(args),
        Command::Montecarlo(args) => monte_carlo(args),
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn sha_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Digest of everything that determines an invocation's output, so results
/// carry an id that changes whenever the inputs do.
fn config_digest(pairs: &[(&str, String)]) -> String {
    let mut canon = String::new();
    for (key, value) in pairs {
        canon.push_str(key);
        canon.push('=');
        canon.push_str(value);
        canon.push('\n');
    }
    sha_hex(canon.as_bytes())
}

struct LoadedInstance {
    instance: Arc<Instance>,
    certificates: Certificates,
    content_sha: String,
}

fn load_instance(path: &FsPath) -> anyhow::Result<LoadedInstance> {
    let data =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (instance, certificates) = Instance::from_json(&data)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(LoadedInstance {
        instance: Arc::new(instance),
        certificates,
        content_sha: sha_hex(data.as_bytes()),
    })
}

fn writer(out: Option<&FsPath>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(io::stdout()),
    })
}

fn resolve_budget(flag: Option<usize>) -> SearchBudget {
    flag.map(SearchBudget::new)
        .unwrap_or_else(SearchBudget::from_env)
}

fn mech_config(s: u32, f: Option<u32>, budget: Option<usize>) -> MechConfig {
    let mut config = MechConfig::new(s).with_budget(resolve_budget(budget));
    if let Some(f) = f {
        config = config.with_f(FPolicy::Fixed(f));
    }
    config
}

fn opt_str<T: ToString>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let json = if let Some(seed) = args.fuzz_seed {
        instances::fuzz_instance(seed, args.max_n).to_json(None)
    } else {
        let family: Family = args
            .family
            .as_deref()
            .expect("clap enforces family or fuzz-seed")
            .parse()?;
        let (instance, certificates) = instances::generate(family, args.k, args.p)?;
        instance.to_json(Some(&certificates))
    };
    let mut out = writer(args.out.as_deref())?;
    out.write_all(json.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let loaded = load_instance(&args.instance)?;
    let budget = resolve_budget(args.budget);
    let digest = config_digest(&[
        ("command", "bench".into()),
        ("instance", loaded.content_sha.clone()),
        ("s", args.s.to_string()),
        ("seed", args.seed.to_string()),
        ("budget", budget.max_nodes.to_string()),
    ]);
    let view = CompatGraph::sample(Arc::clone(&loaded.instance), args.seed).full_view();

    let mut sink = writer(args.out.as_deref())?;
    writeln!(sink, "# config-digest={digest} seed={}", args.seed)?;
    let mut csv = csv::Writer::from_writer(sink);
    csv.write_record(["kind", "s", "length", "certified", "runtime_ms"])?;
    for kind in BenchKind::ALL {
        let started = Instant::now();
        let path = match kind {
            BenchKind::Opt => benchmarks::opt(&view, budget)?,
            BenchKind::SOpt => benchmarks::sopt(&view, args.s, budget)?,
            BenchKind::AvgOpt => benchmarks::avgopt(&view, args.s, budget)?,
            BenchKind::PiIr => benchmarks::pi_ir(&view, budget)?,
        };
        let runtime_ms = started.elapsed().as_millis();
        let cert_key = match kind {
            BenchKind::Opt => "opt".to_string(),
            BenchKind::SOpt => format!("sopt:{}", args.s),
            BenchKind::AvgOpt => format!("avgopt:{}", args.s),
            BenchKind::PiIr => "pi-ir".to_string(),
        };
        let certified = loaded
            .certificates
            .get(&cert_key)
            .map(|c| c.value.to_string())
            .unwrap_or_default();
        csv.write_record([
            kind.label().to_string(),
            if kind.takes_s() {
                args.s.to_string()
            } else {
                String::new()
            },
            path.len().to_string(),
            certified,
            runtime_ms.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunLine<'a> {
    seed: u64,
    config_digest: &'a str,
    status: Status,
    path: &'a [NodeId],
    welfare: usize,
    utilities: &'a [usize],
    trace_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    search_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stitch_attempts: Option<usize>,
}

fn run_mechanism(args: RunArgs) -> anyhow::Result<()> {
    let loaded = load_instance(&args.instance)?;
    let mechanism: Mechanism = args.mechanism.parse()?;
    let config = mech_config(args.s, args.f, args.budget);
    let digest = config_digest(&[
        ("command", "run".into()),
        ("instance", loaded.content_sha.clone()),
        ("mechanism", mechanism.label().into()),
        ("s", args.s.to_string()),
        ("f", opt_str(args.f)),
        ("budget", config.budget.max_nodes.to_string()),
    ]);

    let mut out = writer(args.out.as_deref())?;
    let mut trace_out = args
        .trace
        .as_deref()
        .map(|p| writer(Some(p)))
        .transpose()?;
    for seed in args.seed..args.seed + args.seeds.max(1) {
        let view = CompatGraph::sample(Arc::clone(&loaded.instance), seed).full_view();
        let outcome = mechanism.run(&view, &config)?;
        let average = mechanism == Mechanism::Average;
        let line = RunLine {
            seed,
            config_digest: &digest,
            status: outcome.status,
            path: &outcome.path.0,
            welfare: outcome.welfare,
            utilities: &outcome.utilities,
            trace_digest: outcome.trace.digest(),
            search_steps: average.then(|| outcome.trace.search_steps()),
            stitch_attempts: average.then(|| outcome.trace.stitch_attempts()),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
        if let Some(tw) = trace_out.as_mut() {
            tw.write_all(outcome.trace.to_json().as_bytes())?;
            tw.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

fn audit(args: AuditArgs) -> anyhow::Result<()> {
    let loaded = load_instance(&args.instance)?;
    let mechanism: Mechanism = args.mechanism.parse()?;
    let config = mech_config(args.s, args.f, args.budget);
    let hospitals = loaded.instance.hospital_count() as u32;
    if let Some(h) = args.hospital {
        anyhow::ensure!(h < hospitals, "hospital {h} out of range (instance has {hospitals})");
    }
    let digest = config_digest(&[
        ("command", "audit".into()),
        ("instance", loaded.content_sha.clone()),
        ("mechanism", mechanism.label().into()),
        ("s", args.s.to_string()),
        ("f", opt_str(args.f)),
        ("seed", args.seed.to_string()),
        ("hospital", opt_str(args.hospital)),
        ("budget", config.budget.max_nodes.to_string()),
    ]);

    let audits = match args.hospital {
        Some(h) => vec![incentives::audit_hospital(
            &loaded.instance,
            mechanism,
            &config,
            args.seed,
            h,
        )?],
        None => incentives::audit_all(&loaded.instance, mechanism, &config, args.seed)?,
    };

    let mut sink = writer(args.out.as_deref())?;
    writeln!(sink, "# config-digest={digest} seed={}", args.seed)?;
    let mut csv = csv::Writer::from_writer(sink);
    csv.write_record([
        "hospital",
        "truthful_utility",
        "best_utility",
        "gap_ratio",
        "witness_hidden_count",
        "witness_divert_node",
    ])?;
    for a in &audits {
        csv.write_record([
            a.hospital.to_string(),
            a.truthful_utility.to_string(),
            a.best_utility.to_string(),
            a.gap_ratio().to_string(),
            a.witness_hidden.len().to_string(),
            opt_str(a.witness_divert),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// montecarlo
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct MonteCarloLine {
    seed0: u64,
    config_digest: String,
    #[serde(flatten)]
    report: incentives::MonteCarloReport,
}

fn monte_carlo(args: MonteCarloArgs) -> anyhow::Result<()> {
    let loaded = load_instance(&args.instance)?;
    let mechanism: Mechanism = args.mechanism.parse()?;
    let config = mech_config(args.s, args.f, args.budget);
    let benchmark = args
        .benchmark
        .as_deref()
        .map(|key| {
            loaded
                .certificates
                .get(key)
                .map(|c| c.value as usize)
                .ok_or_else(|| anyhow::anyhow!("instance has no certificate '{key}'"))
        })
        .transpose()?;
    let digest = config_digest(&[
        ("command", "montecarlo".into()),
        ("instance", loaded.content_sha.clone()),
        ("mechanism", mechanism.label().into()),
        ("s", args.s.to_string()),
        ("f", opt_str(args.f)),
        ("seed0", args.seed0.to_string()),
        ("trials", args.trials.to_string()),
        ("benchmark", opt_str(args.benchmark.as_deref())),
        ("budget", config.budget.max_nodes.to_string()),
    ]);

    let report = incentives::monte_carlo(
        &loaded.instance,
        mechanism,
        &config,
        args.seed0,
        args.trials,
        benchmark,
    )?;
    let mut out = writer(args.out.as_deref())?;
    serde_json::to_writer(
        &mut out,
        &MonteCarloLine {
            seed0: args.seed0,
            config_digest: digest,
            report,
        },
    )?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

//! hivewatch: hierarchical cooperating-agent intrusion detection
//! simulator. Exit codes: 0 success, 1 validation failure (bad inputs or
//! a failed comparison), 2 runtime failure.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hivewatch::formats::{self, LoadError, TraceFormat};
use hivewatch_core::{
    assign_kdd_producers, run, run_oracle, synth_flood_trace, ActivityClass, AgentAddress,
    EngineError, FloodParams, SimConfig, SimReport,
};

#[derive(Parser)]
#[command(
    name = "hivewatch",
    version,
    about = "Deterministic simulator for hierarchical interest-routed intrusion detection agents"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the agent hierarchy over a trace and write the report
    Run(RunArgs),
    /// Produce the flat-broadcast ground-truth report for the same inputs
    Oracle(RunArgs),
    /// Compare the alert and delivery sets of two reports
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
    },
    /// Generate a seeded synthetic flood trace
    GenTrace(GenTraceArgs),
    /// Check a topology file against the structural invariants
    Validate {
        #[arg(long)]
        topology: PathBuf,
    },
    /// Print the per-class metrics table of a labeled run
    Score {
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    /// RNG seed recorded in the report; runs are replayable from it
    #[arg(long)]
    seed: u64,
    /// Crash-stop a node at a time, e.g. dca:lan2@0 (repeatable)
    #[arg(long = "fault", value_name = "NODE@TIME")]
    faults: Vec<String>,
    /// Hard per-message hop cap (loop guard)
    #[arg(long, default_value_t = 8)]
    max_hops: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenTraceArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Flood target agent: domain/host/agent, or a unique agent id
    #[arg(long)]
    target: String,
    /// Flood events per second
    #[arg(long)]
    rate: f64,
    /// Trace length in seconds
    #[arg(long)]
    duration: f64,
    /// Background (non-flood) events per second
    #[arg(long, default_value_t = 0.0)]
    background: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    /// Bad input: exit 1.
    Validation(String),
    /// Environment failure: exit 2.
    Runtime(String),
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io(io) => CliError::Runtime(io.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn load_error_with_path(path: &Path) -> impl FnOnce(LoadError) -> CliError + '_ {
    move |e| match e {
        LoadError::Io(io) => CliError::Runtime(format!("{}: {io}", path.display())),
        other => CliError::Validation(format!("{}: {other}", path.display())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successes, anything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.cmd {
        Cmd::Run(args) => simulate_cmd(args, false),
        Cmd::Oracle(args) => simulate_cmd(args, true),
        Cmd::Compare { report_a, report_b } => compare_cmd(&report_a, &report_b),
        Cmd::GenTrace(args) => gen_trace_cmd(args),
        Cmd::Validate { topology } => {
            let topo = formats::load_topology(&topology).map_err(load_error_with_path(&topology))?;
            println!(
                "ok: {} domains, {} hosts, {} agents",
                topo.domains.len(),
                topo.host_count(),
                topo.agents().count()
            );
            Ok(0)
        }
        Cmd::Score { report } => score_cmd(&report),
    }
}

fn simulate_cmd(args: RunArgs, oracle: bool) -> Result<u8, CliError> {
    let topo = formats::load_topology(&args.topology).map_err(load_error_with_path(&args.topology))?;
    let rules = formats::load_rules(&args.rules).map_err(load_error_with_path(&args.rules))?;
    let (mut trace, format) =
        formats::load_trace(&args.trace, &topo).map_err(load_error_with_path(&args.trace))?;
    if format == TraceFormat::Kdd {
        assign_kdd_producers(&mut trace, &topo)?;
    }
    let mut cfg = SimConfig::new(args.seed);
    cfg.max_hops = args.max_hops;
    for f in &args.faults {
        cfg.faults.push(formats::parse_fault(f).map_err(CliError::Validation)?);
    }
    let report = if oracle {
        run_oracle(&topo, &trace, &rules, &cfg)?
    } else {
        run(&topo, &trace, &rules, &cfg)?
    };
    formats::write_report(&args.out, &report).map_err(load_error_with_path(&args.out))?;
    println!(
        "{}: {} events, {} deliveries, {} alerts -> {}",
        if oracle { "oracle" } else { "run" },
        report.counters.get("events_injected").copied().unwrap_or(0),
        report.deliveries.len(),
        report.alerts.len(),
        args.out.display()
    );
    Ok(0)
}

fn delivery_set(r: &SimReport) -> BTreeSet<String> {
    r.deliveries
        .iter()
        .map(|d| format!("delivery seq={} agent={}", d.seq, d.agent))
        .collect()
}

fn alert_set(r: &SimReport) -> BTreeSet<String> {
    r.alerts
        .iter()
        .map(|a| {
            let json = serde_json::to_string(a).expect("alert serializes");
            format!("alert {json}")
        })
        .collect()
}

fn compare_cmd(a_path: &Path, b_path: &Path) -> Result<u8, CliError> {
    let a = formats::read_report(a_path).map_err(load_error_with_path(a_path))?;
    let b = formats::read_report(b_path).map_err(load_error_with_path(b_path))?;
    let mut equal = true;
    for (what, left, right) in [
        ("deliveries", delivery_set(&a), delivery_set(&b)),
        ("alerts", alert_set(&a), alert_set(&b)),
    ] {
        let mut diff = false;
        for item in left.difference(&right) {
            println!("only in {}: {item}", a_path.display());
            diff = true;
        }
        for item in right.difference(&left) {
            println!("only in {}: {item}", b_path.display());
            diff = true;
        }
        if !diff {
            println!("{what} agree ({} items)", left.len());
        }
        equal &= !diff;
    }
    Ok(if equal { 0 } else { 1 })
}

fn gen_trace_cmd(args: GenTraceArgs) -> Result<u8, CliError> {
    let topo = formats::load_topology(&args.topology).map_err(load_error_with_path(&args.topology))?;
    let target = resolve_agent(&topo, &args.target)?;
    let trace = synth_flood_trace(
        &topo,
        &FloodParams {
            target,
            rate: args.rate,
            duration: args.duration,
            background_rate: args.background,
            seed: args.seed,
        },
    )?;
    let text = formats::write_event_trace(&trace);
    formats::write_atomic(&args.out, text.as_bytes())
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.out.display())))?;
    println!("{} events -> {}", trace.len(), args.out.display());
    Ok(0)
}

fn resolve_agent(topo: &hivewatch_core::Topology, spec: &str) -> Result<AgentAddress, CliError> {
    let parts: Vec<&str> = spec.split('/').collect();
    match parts.as_slice() {
        [d, h, a] => Ok(AgentAddress::new(*d, *h, *a)),
        [name] => {
            let matches: Vec<AgentAddress> = topo
                .agents()
                .filter(|desc| desc.address.agent.as_str() == *name)
                .map(|desc| desc.address.clone())
                .collect();
            match matches.as_slice() {
                [one] => Ok(one.clone()),
                [] => Err(CliError::Validation(format!("no agent named `{name}`"))),
                _ => Err(CliError::Validation(format!(
                    "agent `{name}` is ambiguous; use domain/host/agent"
                ))),
            }
        }
        _ => Err(CliError::Validation(format!(
            "agent `{spec}` must be domain/host/agent or a unique agent id"
        ))),
    }
}

fn score_cmd(report_path: &Path) -> Result<u8, CliError> {
    let report = formats::read_report(report_path).map_err(load_error_with_path(report_path))?;
    let Some(metrics) = &report.metrics else {
        return Err(CliError::Validation(
            "report carries no per-class metrics (trace was unlabeled)".into(),
        ));
    };
    let label = |c: ActivityClass| match c {
        ActivityClass::Dos => "Denial of Service (DoS)",
        ActivityClass::R2u => "Remote to User (R2U)",
        ActivityClass::U2r => "User to Root (U2R)",
        ActivityClass::Probe => "Probe",
        ActivityClass::Normal => "Normal",
    };
    let pct = |v: Option<f64>| match v {
        Some(x) => format!("{:.2}%", x * 100.0),
        None => "-".to_string(),
    };
    println!("{:<26}{:>16}{:>22}", "Activity Type", "Detection Rate", "False Positive Rate");
    for class in ActivityClass::ALL {
        let m = metrics.get(class.as_str());
        println!(
            "{:<26}{:>16}{:>22}",
            label(class),
            pct(m.and_then(|m| m.detection_rate)),
            pct(m.and_then(|m| m.false_positive_rate)),
        );
    }
    Ok(0)
}

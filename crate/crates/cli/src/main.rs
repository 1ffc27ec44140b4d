//! Scenario runner.
//!
//! Exit codes: 0 success, 1 replay mismatch or I/O failure, 2 invalid
//! input (with line and column), 3 runtime invariant breach (the trace up to
//! the breach is still written).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use resilience_core::acl::rules::load_ruleset;
use resilience_core::acl::AclVariant;
use resilience_core::al::{AlVariant, PolicyDocument};
use resilience_core::compare::{compare, Arm};
use resilience_core::flow::bus::write_jsonl;
use resilience_core::metrics::resilience_report;
use resilience_core::replay::{replay, Verdict};
use resilience_core::scenario::{RunHeader, Scenario, ScenarioError};
use resilience_core::sim::{run, SimError};

#[derive(Parser)]
#[command(name = "resilience", version, about = "Closed-loop resilience experiments on a simulated plant")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded simulation and write trace, report and policy files.
    Run(RunArgs),
    /// Paired comparison of two strategy arms over a set of seeds.
    Compare(CompareArgs),
    /// Re-simulate a trace and check it event by event.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Print a built-in scenario (reference, humid-season) as JSON.
    Builtin {
        #[arg(default_value = "reference")]
        name: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file or built-in name; the reference scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// off | rules | kpi | agent | advisor | multi-agent
    #[arg(long, default_value = "rules", value_parser = parse_acl)]
    acl: AclVariant,
    /// none, or a comma list of review, loop, policy, datafit
    #[arg(long, default_value = "none", value_parser = parse_al)]
    al: BTreeSet<AlVariant>,
    /// Overrides the scenario's tick count.
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Ruleset JSON replacing the default rules.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Proposal ids approved for manual mode, one per line.
    #[arg(long)]
    approvals: Option<PathBuf>,
    /// Starting policy document, e.g. a policy_vN.json from an earlier run.
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Seeds as a list (1,2,7) or an inclusive range (1-100).
    #[arg(long, default_value = "1-100")]
    seeds: String,
    #[arg(long, default_value = "off", value_parser = parse_acl)]
    a: AclVariant,
    #[arg(long, default_value = "none", value_parser = parse_al)]
    a_al: BTreeSet<AlVariant>,
    #[arg(long, default_value = "rules", value_parser = parse_acl)]
    b: AclVariant,
    #[arg(long, default_value = "none", value_parser = parse_al)]
    b_al: BTreeSet<AlVariant>,
    #[arg(long)]
    ticks: Option<u64>,
    /// Worker threads; seeds are independent.
    #[arg(long, default_value_t = 4)]
    threads: usize,
    /// Also write comparison.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_acl(s: &str) -> Result<AclVariant, String> {
    AclVariant::parse(s).ok_or_else(|| format!("unknown acl variant {s:?}"))
}

fn parse_al(s: &str) -> Result<BTreeSet<AlVariant>, String> {
    AlVariant::parse_set(s)
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once('-') {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            return Err(anyhow!("empty seed range {s}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|e| anyhow!("bad seed {x:?}: {e}"))).collect()
}

/// Input the user got wrong; maps to exit code 2.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn json_error(path: &Path, e: serde_json::Error) -> anyhow::Error {
    InputError(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column())).into()
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario> {
    let Some(path) = path else { return Ok(Scenario::reference()) };
    if !path.exists() {
        if let Some(s) = path.to_str().and_then(Scenario::builtin) {
            return Ok(s);
        }
    }
    Scenario::from_json(&read(path)?).map_err(|e| match e {
        ScenarioError::Parse { .. } | ScenarioError::Invalid(_) => InputError(format!("{}: {e}", path.display())).into(),
    })
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let mut scenario = load_scenario(args.scenario.as_deref())?;
    if let Some(path) = &args.rules {
        let rules = load_ruleset(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        scenario.acl.rules = Some(rules);
    }
    if let Some(path) = &args.policy {
        let doc: PolicyDocument = serde_json::from_str(&read(path)?).map_err(|e| json_error(path, e))?;
        scenario.policy = Some(doc);
    }
    if let Some(t) = args.ticks {
        scenario.ticks = t;
    }
    scenario.validate().map_err(|e| InputError(e.to_string()))?;
    let mut header = RunHeader::new(scenario, args.seed, args.acl, args.al);
    if let Some(path) = &args.approvals {
        header.approvals =
            read(path)?.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect();
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let write_trace = |events: &[resilience_core::flow::event::Event]| -> Result<()> {
        let path = args.out.join("trace.jsonl");
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_jsonl(std::io::BufWriter::new(f), events)?;
        Ok(())
    };
    let out = match run(&header) {
        Ok(out) => out,
        Err(SimError::Invariant { at, message, trace }) => {
            write_trace(&trace)?;
            eprintln!("invariant breached at {at}: {message}");
            return Ok(ExitCode::from(3));
        }
    };
    write_trace(&out.trace)?;
    let report = resilience_report(&out.trace);
    fs::write(args.out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    let text = report.to_text();
    fs::write(args.out.join("report.txt"), &text)?;
    for doc in &out.policies {
        fs::write(args.out.join(format!("policy_v{}.json", doc.version)), serde_json::to_string_pretty(doc)?)?;
    }
    if let Some(table) = &out.agent_table {
        fs::write(args.out.join("agent_table.json"), serde_json::to_string_pretty(table)?)?;
    }
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let mut scenario = load_scenario(args.scenario.as_deref())?;
    if let Some(t) = args.ticks {
        scenario.ticks = t;
    }
    let seeds = parse_seeds(&args.seeds).map_err(|e| InputError(e.to_string()))?;
    let a = Arm { acl: args.a, al: args.a_al };
    let b = Arm { acl: args.b, al: args.b_al };
    let report = match compare(&scenario, &seeds, &a, &b, args.threads) {
        Ok(r) => r,
        Err(SimError::Invariant { at, message, .. }) => {
            eprintln!("invariant breached at {at}: {message}");
            return Ok(ExitCode::from(3));
        }
    };
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("comparison.json"), serde_json::to_string_pretty(&report)?)?;
    }
    print!("{}", report.to_text());
    Ok(ExitCode::SUCCESS)
}

fn cmd_replay(trace: &Path) -> Result<ExitCode> {
    let verdict = replay(&read(trace)?).map_err(|e| InputError(format!("{}: {e}", trace.display())))?;
    println!("{}", serde_json::to_string(&verdict)?);
    Ok(match verdict {
        Verdict::Pass { .. } => ExitCode::SUCCESS,
        Verdict::Fail { seq, reason } => {
            eprintln!("first divergence at seq {seq}: {reason}");
            ExitCode::from(1)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Replay { trace } => cmd_replay(&trace),
        Command::Builtin { name } => match Scenario::builtin(&name) {
            Some(s) => {
                println!("{}", s.to_json());
                Ok(ExitCode::SUCCESS)
            }
            None => Err(InputError(format!("no built-in scenario {name:?}")).into()),
        },
    };
    match result {
        Ok(code) => code,
        Err(e) if e.is::<InputError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

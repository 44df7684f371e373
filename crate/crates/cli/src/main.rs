use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use dyaci::constraint::parse_constraint;
use dyaci::deduction::{saturate, DeriveOptions};
use dyaci::projection::{is_standard, solve_dy};
use dyaci::protocol::{scenario, AttackOutcome, Protocol, SCENARIOS};
use dyaci::solver::Solution;
use dyaci::term::{dag_size, edge_count};
use dyaci::{
    normalize, parse_term, solve, ConstraintSystem, Outcome, SolverConfig, Substitution, Theory,
};

const EXIT_YES: u8 = 0;
const EXIT_NO: u8 = 1;
const EXIT_ERROR: u8 = 2;
const EXIT_UNKNOWN: u8 = 3;

/// Intruder deduction and constraint solving with ACI sets.
#[derive(Parser, Debug)]
#[command(name = "dyaci", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Deduction theory.
    #[arg(long, global = true, default_value = "dyaci")]
    theory: Theory,
    /// Node budget for the solver.
    #[arg(long, global = true, default_value_t = 5_000_000)]
    max_nodes: u64,
    /// Wall-clock budget for the solver, in seconds.
    #[arg(long, global = true)]
    max_seconds: Option<f64>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Reject input that is not already in normal form.
    #[arg(long, global = true)]
    strict: bool,
    /// Seed for the random generators used by `selftest`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize one term per line.
    Normalize { file: PathBuf },
    /// Decide `t1, ..., tn |> t`, one ground query per line.
    Derive { file: PathBuf },
    /// Solve a constraint system, one constraint per line.
    Solve { file: PathBuf },
    /// Search a protocol spec for an attack on its secrets.
    Attack {
        file: Option<PathBuf>,
        /// Use a bundled scenario instead of a file.
        #[arg(long, conflicts_with = "file")]
        scenario: Option<String>,
    },
    /// Run the randomized cross-checks.
    Selftest {
        /// Instances per check.
        #[arg(long, default_value_t = 300)]
        cases: usize,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            if cli.format == Format::Json {
                println!(
                    "{}",
                    json!({"status": "error", "message": format!("{e:#}")})
                );
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    if cli.max_nodes == 0 {
        bail!("--max-nodes must be positive");
    }
    if cli.max_seconds.is_some_and(|s| s.is_nan() || s <= 0.0) {
        bail!("--max-seconds must be positive");
    }
    match &cli.command {
        Command::Normalize { file } => cmd_normalize(cli, file),
        Command::Derive { file } => cmd_derive(cli, file),
        Command::Solve { file } => cmd_solve(cli, file),
        Command::Attack { file, scenario } => cmd_attack(cli, file.as_deref(), scenario.as_deref()),
        Command::Selftest { cases } => cmd_selftest(cli, *cases),
    }
}

fn solver_config(cli: &Cli) -> SolverConfig {
    SolverConfig {
        max_nodes: Some(cli.max_nodes),
        max_time: cli.max_seconds.map(Duration::from_secs_f64),
        ..SolverConfig::default()
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn model_json(sigma: &Substitution) -> Value {
    let map: Map<String, Value> = sigma
        .iter()
        .map(|(k, v)| (k.to_string(), Value::String(v.to_string())))
        .collect();
    Value::Object(map)
}

fn cmd_normalize(cli: &Cli, file: &Path) -> Result<u8> {
    let text = read(file)?;
    for (n, line) in lines(&text) {
        let t = parse_term(line).with_context(|| format!("line {n}"))?;
        if cli.theory == Theory::Dy && t.has_aci() {
            bail!("line {n}: sets are not allowed under --theory dy");
        }
        if cli.strict && !t.is_normalized() {
            bail!("line {n}: term is not normalized");
        }
        let norm = normalize(&t);
        match cli.format {
            Format::Text => println!(
                "{norm}\t(dag_size {}, edges {})",
                dag_size(&norm),
                edge_count(&norm)
            ),
            Format::Json => println!(
                "{}",
                json!({
                    "input": line,
                    "term": norm.to_string(),
                    "dag_size": dag_size(&norm),
                    "edge_count": edge_count(&norm),
                })
            ),
        }
    }
    Ok(EXIT_YES)
}

fn cmd_derive(cli: &Cli, file: &Path) -> Result<u8> {
    let text = read(file)?;
    let options = DeriveOptions {
        theory: cli.theory,
        strict: cli.strict,
    };
    let mut all = true;
    for (n, line) in lines(&text) {
        let c = parse_constraint(line).with_context(|| format!("line {n}"))?;
        let knowledge: Vec<_> = c.knowledge.iter().cloned().collect();
        let d = saturate(&knowledge, &c.target, options).with_context(|| format!("line {n}"))?;
        all &= d.derivable;
        match cli.format {
            Format::Text => println!("{}\t{line}", if d.derivable { "YES" } else { "NO" }),
            Format::Json => println!(
                "{}",
                json!({
                    "status": if d.derivable { "derivable" } else { "not-derivable" },
                    "query": line,
                    "stats": {"ops": d.ops, "universe": d.universe, "dag_size": c.terms().map(dag_size).sum::<usize>()},
                })
            ),
        }
    }
    Ok(if all { EXIT_YES } else { EXIT_NO })
}

fn cmd_solve(cli: &Cli, file: &Path) -> Result<u8> {
    let system = ConstraintSystem::parse(&read(file)?)?;
    if cli.strict && !system.is_normalized() {
        bail!("system is not normalized");
    }
    let config = solver_config(cli);
    let sol = match cli.theory {
        Theory::Dy => {
            if !is_standard(&system) {
                bail!("sets are not allowed under --theory dy");
            }
            solve_dy(&system, &config)?
        }
        Theory::DyAci => solve(&system, &config)?,
    };
    report_solution(cli, &system, &sol);
    Ok(match sol.outcome {
        Outcome::Sat(_) => EXIT_YES,
        Outcome::Unsat => EXIT_NO,
        Outcome::Indeterminate(_) => EXIT_UNKNOWN,
    })
}

fn report_solution(cli: &Cli, system: &ConstraintSystem, sol: &Solution) {
    let stats = json!({
        "nodes": sol.stats.nodes,
        "partitions": sol.stats.partitions,
        "dag_size": system.normalize().dag_size(),
        "bound": sol.stats.bound,
    });
    match (&sol.outcome, cli.format) {
        (Outcome::Sat(sigma), Format::Text) => {
            println!("SAT");
            for (v, t) in sigma.iter() {
                println!("{v} = {t}");
            }
        }
        (Outcome::Unsat, Format::Text) => println!("UNSAT"),
        (Outcome::Indeterminate(reason), Format::Text) => println!("INDETERMINATE ({reason})"),
        (Outcome::Sat(sigma), Format::Json) => {
            println!(
                "{}",
                json!({"status": "sat", "model": model_json(sigma), "stats": stats})
            )
        }
        (Outcome::Unsat, Format::Json) => {
            println!("{}", json!({"status": "unsat", "stats": stats}))
        }
        (Outcome::Indeterminate(reason), Format::Json) => {
            println!(
                "{}",
                json!({"status": "indeterminate", "reason": reason, "stats": stats})
            )
        }
    }
    if cli.format == Format::Text {
        eprintln!(
            "nodes {}, partitions {}, dag_size {}",
            sol.stats.nodes,
            sol.stats.partitions,
            system.normalize().dag_size()
        );
    }
}

fn cmd_attack(cli: &Cli, file: Option<&Path>, name: Option<&str>) -> Result<u8> {
    let text = match (file, name) {
        (Some(f), _) => read(f)?,
        (None, Some(n)) => match scenario(n) {
            Some(t) => t.to_string(),
            None => {
                let known: Vec<&str> = SCENARIOS.iter().map(|s| s.0).collect();
                bail!("unknown scenario `{n}`; known: {}", known.join(", "));
            }
        },
        (None, None) => bail!("give a spec file or --scenario"),
    };
    if cli.theory == Theory::Dy {
        bail!("attack search runs under the set-aware theory only");
    }
    let protocol = Protocol::parse(&text)?;
    match protocol.find_attack(&solver_config(cli))? {
        AttackOutcome::Attack(report) => {
            match cli.format {
                Format::Text => print!("ATTACK\n{report}"),
                Format::Json => {
                    let trace: Vec<String> = report
                        .configuration
                        .trace
                        .iter()
                        .map(|t| t.to_string())
                        .collect();
                    println!(
                        "{}",
                        json!({
                            "status": "attack",
                            "secret": report.secret.to_string(),
                            "trace": trace,
                            "model": model_json(&report.model),
                            "stats": {"constraints": report.system.len(), "dag_size": report.system.dag_size()},
                        })
                    );
                }
            }
            Ok(EXIT_YES)
        }
        AttackOutcome::Safe => {
            match cli.format {
                Format::Text => println!("SAFE"),
                Format::Json => println!("{}", json!({"status": "safe"})),
            }
            Ok(EXIT_NO)
        }
        AttackOutcome::Indeterminate(reason) => {
            match cli.format {
                Format::Text => println!("INDETERMINATE ({reason})"),
                Format::Json => {
                    println!("{}", json!({"status": "indeterminate", "reason": reason}))
                }
            }
            Ok(EXIT_UNKNOWN)
        }
    }
}

fn cmd_selftest(cli: &Cli, cases: usize) -> Result<u8> {
    let reports = dyaci::selftest::run(cli.seed, cases);
    for r in &reports {
        match cli.format {
            Format::Text => println!("{r}"),
            Format::Json => println!(
                "{}",
                json!({"check": r.name, "cases": r.cases, "status": if r.passed() { "pass" } else { "fail" }, "failures": r.failures})
            ),
        }
    }
    Ok(if reports.iter().all(|r| r.passed()) {
        EXIT_YES
    } else {
        EXIT_NO
    })
}

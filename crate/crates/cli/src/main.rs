//! `hyb`: interactive session by default, `hyb run FILE ...` for batch use.
//!
//! Exit codes: 0 value or terminated, 2 fuel exhausted, 3 unreadable file or
//! parse error, 1 anything else (divergence, bad arguments, runtime errors).

mod render;
mod session;

use std::collections::BTreeMap;
use std::io::{self, BufRead, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyb_core::wire::{self, ApiError, Common, EvalRequest, Semantics, StepRequest, TraceRequest};
use session::{Reply, Session};

#[derive(Parser, Debug)]
#[command(name = "hyb", version, about = "Evaluate hybrid while-programs")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Start the interactive session (the default).
    Repl,
    /// Evaluate a program file once.
    Run(RunArgs),
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("mode").args(["at", "trace", "steps"])))]
struct RunArgs {
    /// Program file.
    file: PathBuf,
    /// Print the state at time T.
    #[arg(long, value_name = "T")]
    at: Option<f64>,
    /// Sample the trajectory on [0, T_MAX]; needs --samples.
    #[arg(long, value_name = "T_MAX", requires = "samples")]
    trace: Option<f64>,
    /// Number of evenly spaced samples, endpoints included.
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
    /// Write the trace CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// List small-step reductions from time budget T.
    #[arg(long, value_name = "T")]
    steps: Option<f64>,
    /// Most reductions listed by --steps.
    #[arg(long, value_name = "N")]
    max_steps: Option<usize>,
    /// Step budget; accepts forms like 1e6.
    #[arg(long, value_name = "N", default_value_t = 1e6)]
    fuel: f64,
    /// Semantics used by --at.
    #[arg(long, default_value = "small", value_parser = parse_semantics)]
    semantics: Semantics,
    /// Absolute slack when testing guards.
    #[arg(long, value_name = "D", default_value_t = 0.0)]
    guard_tolerance: f64,
    /// Initial value, e.g. --env v=3; unlisted variables start at 0.
    #[arg(long = "env", value_name = "VAR=X", value_parser = parse_binding)]
    env: Vec<(String, f64)>,
    /// Print the JSON the HTTP service would return.
    #[arg(long)]
    json: bool,
}

fn parse_semantics(s: &str) -> Result<Semantics, String> {
    s.parse()
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected VAR=X")?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

const OK: u8 = 0;
const OTHER: u8 = 1;
const FUEL: u8 = 2;
const INPUT: u8 = 3;

fn fail(e: &ApiError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.diagnostics.is_empty() { OTHER } else { INPUT })
}

fn run(a: RunArgs) -> ExitCode {
    let source = match std::fs::read_to_string(&a.file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", a.file.display());
            return ExitCode::from(INPUT);
        }
    };
    if a.at.is_none() && a.trace.is_none() && a.steps.is_none() {
        eprintln!("error: give one of --at T, --trace T_MAX or --steps T");
        return ExitCode::from(OTHER);
    }
    let env: BTreeMap<String, f64> = a.env.iter().cloned().collect();
    let common = Common {
        fuel: Some(a.fuel),
        guard_tolerance: Some(a.guard_tolerance),
        env: (!env.is_empty()).then_some(env),
    };
    if let Some(t) = a.at {
        let req = EvalRequest {
            source,
            t,
            semantics: a.semantics,
            common,
        };
        let r = match wire::handle_eval(&req, None) {
            Ok(r) => r,
            Err(e) => return fail(&e),
        };
        println!("{}", if a.json { wire::to_json(&r) } else { render::eval_line(&r) });
        return ExitCode::from(match r.status {
            "value" | "terminated" => OK,
            "fuel" => FUEL,
            _ => OTHER,
        });
    }
    if let Some(t_max) = a.trace {
        let req = TraceRequest {
            source,
            t_max,
            samples: a.samples.unwrap_or(0),
            common,
        };
        let r = match wire::handle_trace(&req, None) {
            Ok(r) => r,
            Err(e) => return fail(&e),
        };
        let text = if a.json { wire::to_json(&r) + "\n" } else { render::trace_csv(&r) };
        match &a.out {
            Some(p) => {
                if let Err(e) = std::fs::write(p, text) {
                    eprintln!("error: cannot write {}: {e}", p.display());
                    return ExitCode::from(OTHER);
                }
            }
            None => print!("{text}"),
        }
        let fuel = r.markers.iter().any(|m| m.kind == "fuel");
        return ExitCode::from(if fuel { FUEL } else { OK });
    }
    let req = StepRequest {
        source,
        t: a.steps.unwrap_or_default(),
        max_steps: a.max_steps,
        common,
    };
    match wire::handle_step(&req, None) {
        Ok(r) => {
            if a.json {
                println!("{}", wire::to_json(&r));
            } else {
                print!("{}", render::step_listing(&r));
            }
            ExitCode::from(OK)
        }
        Err(e) => fail(&e),
    }
}

fn repl() -> ExitCode {
    let interactive = io::stdin().is_terminal();
    let mut session = Session::default();
    let mut out = io::stdout();
    if interactive {
        println!("hyb {}, :help for commands", env!("CARGO_PKG_VERSION"));
    }
    let mut lines = io::stdin().lock().lines();
    loop {
        if interactive {
            print!("hyb> ");
            let _ = out.flush();
        }
        let Some(Ok(line)) = lines.next() else { break };
        match session.exec(&line) {
            Ok(Reply::Print(s)) if s.is_empty() => {}
            Ok(Reply::Print(s)) => println!("{s}"),
            Ok(Reply::Quit) => break,
            Err(e) => eprintln!("error: {e}"),
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { OTHER } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        None | Some(Command::Repl) => repl(),
        Some(Command::Run(a)) => run(a),
    }
}

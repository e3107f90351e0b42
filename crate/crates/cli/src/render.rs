//! Plain-text renderings of evaluator responses.

use std::fmt::Write;

use hyb_core::wire::{EvalResponse, Point, StepResponse, TraceResponse};

/// One line, e.g. `value v=6.5` or `terminated x=5 after 0`.
pub fn eval_line(r: &EvalResponse) -> String {
    let env = r.env.as_ref().map(|e| e.to_string()).unwrap_or_default();
    let mut out = match r.status {
        "value" => format!("value {env}"),
        "terminated" => format!("terminated {env} after {}", r.duration.unwrap_or(0.0)),
        "diverged" => format!("diverged before {}", r.duration.unwrap_or(0.0)),
        _ => "fuel exhausted".to_string(),
    };
    if r.timed_out {
        out.push_str(" (timed out)");
    }
    out
}

/// CSV with header `t,<variables>,marker`, one row per sample. Rows past the
/// end of the run leave the variable columns empty and name the marker.
pub fn trace_csv(r: &TraceResponse) -> String {
    let mut out = String::from("t");
    for v in &r.variables {
        out.push(',');
        out.push_str(v);
    }
    out.push_str(",marker\n");
    for p in &r.points {
        match p {
            Point::State { t, env } => {
                write!(out, "{t}").unwrap();
                for x in env.values() {
                    write!(out, ",{x}").unwrap();
                }
                out.push_str(",\n");
            }
            Point::Marker { t, marker } => {
                write!(out, "{t}").unwrap();
                for _ in &r.variables {
                    out.push(',');
                }
                writeln!(out, ",{marker}").unwrap();
            }
        }
    }
    out
}

/// A numbered derivation listing. Each line shows the rules used, conclusion
/// first, then the configuration reached.
pub fn step_listing(r: &StepResponse) -> String {
    let mut out = String::new();
    for (i, s) in r.steps.iter().enumerate() {
        let rules: Vec<&str> = s.derivation.iter().map(|r| r.label()).collect();
        let env = s.env.to_string();
        let sep = if env.is_empty() { "" } else { " " };
        writeln!(
            out,
            "{:>4}  {:<28} {}{sep}{env} t={}",
            i + 1,
            rules.join(" < "),
            s.code,
            s.t
        )
        .unwrap();
    }
    if !r.terminal {
        out.push_str("      ... step limit reached\n");
    }
    out
}

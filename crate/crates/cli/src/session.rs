//! REPL state and command dispatch. A failing command prints an error and
//! leaves the session as it was.

use std::fs;

use hyb_core::limits::DEFAULT_FUEL;
use hyb_core::wire::{
    handle_eval, handle_step, handle_trace, ApiError, Common, EvalRequest, Semantics, StepRequest, TraceRequest,
};

use crate::render;

pub const HELP: &str = "\
commands:
  :load FILE              load a program (any line not starting with `:` is loaded as a program)
  :eval T                 state at time T
  :trace T_MAX N FILE     write N samples on [0, T_MAX] to FILE as CSV
  :steps T [N]            small-step derivations from time budget T, at most N (default 1000)
  :fuel N                 step budget per evaluation (default 1e6)
  :set guard-tolerance D  absolute slack when testing guards (default 0)
  :set semantics S        small, big or den (default small)
  :show                   current program and settings
  :help                   this text
  :quit                   leave";

/// What the caller should do after a command.
#[derive(Debug, PartialEq)]
pub enum Reply {
    Print(String),
    Quit,
}

#[derive(Debug, Clone)]
pub struct Session {
    source: Option<String>,
    fuel: f64,
    tolerance: f64,
    semantics: Semantics,
}

impl Default for Session {
    fn default() -> Self {
        Session {
            source: None,
            fuel: DEFAULT_FUEL as f64,
            tolerance: 0.0,
            semantics: Semantics::Small,
        }
    }
}

fn number(word: Option<&str>, what: &str) -> Result<f64, String> {
    let w = word.ok_or_else(|| format!("missing {what}"))?;
    w.parse::<f64>().map_err(|_| format!("`{w}` is not a number ({what})"))
}

fn api(e: ApiError) -> String {
    e.to_string()
}

impl Session {
    fn common(&self) -> Common {
        Common {
            fuel: Some(self.fuel),
            guard_tolerance: Some(self.tolerance),
            env: None,
        }
    }

    fn source(&self) -> Result<String, String> {
        self.source.clone().ok_or_else(|| "no program loaded, use :load FILE".to_string())
    }

    /// Checks and installs a program.
    fn install(&mut self, src: String) -> Result<String, String> {
        let (_, vars) = hyb_core::parse(&src).map_err(|e| e.to_string())?;
        self.source = Some(src);
        Ok(format!("loaded, variables: {}", vars.names().join(" ")))
    }

    /// Runs one input line.
    pub fn exec(&mut self, line: &str) -> Result<Reply, String> {
        let line = line.trim();
        if line.is_empty() {
            return Ok(Reply::Print(String::new()));
        }
        if !line.starts_with(':') {
            return self.install(line.to_string()).map(Reply::Print);
        }
        let mut words = line.split_whitespace();
        let cmd = words.next().unwrap_or_default();
        let out = match cmd {
            ":quit" | ":q" => return Ok(Reply::Quit),
            ":help" => HELP.to_string(),
            ":load" => {
                let path = words.next().ok_or("missing FILE")?;
                let src = fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
                self.install(src)?
            }
            ":eval" => {
                let t = number(words.next(), "T")?;
                let req = EvalRequest {
                    source: self.source()?,
                    t,
                    semantics: self.semantics,
                    common: self.common(),
                };
                render::eval_line(&handle_eval(&req, None).map_err(api)?)
            }
            ":trace" => {
                let t_max = number(words.next(), "T_MAX")?;
                let n = number(words.next(), "N")?;
                let path = words.next().ok_or("missing FILE")?;
                if n.fract() != 0.0 || n < 0.0 {
                    return Err("N must be a whole number".into());
                }
                let req = TraceRequest {
                    source: self.source()?,
                    t_max,
                    samples: n as usize,
                    common: self.common(),
                };
                let r = handle_trace(&req, None).map_err(api)?;
                fs::write(path, render::trace_csv(&r)).map_err(|e| format!("cannot write {path}: {e}"))?;
                let end = match r.markers.first() {
                    Some(m) => format!(", {} at {}", m.kind, m.t),
                    None => String::new(),
                };
                format!("wrote {} samples to {path}{end}", r.points.len())
            }
            ":steps" => {
                let t = number(words.next(), "T")?;
                let max = match words.next() {
                    Some(w) => {
                        let n = number(Some(w), "N")?;
                        if n.fract() != 0.0 || n < 0.0 {
                            return Err("N must be a whole number".into());
                        }
                        Some(n as usize)
                    }
                    None => None,
                };
                let req = StepRequest {
                    source: self.source()?,
                    t,
                    max_steps: max,
                    common: self.common(),
                };
                let text = render::step_listing(&handle_step(&req, None).map_err(api)?);
                text.trim_end().to_string()
            }
            ":fuel" => {
                let n = number(words.next(), "N")?;
                if !(n.is_finite() && n >= 0.0 && n.fract() == 0.0) {
                    return Err("fuel must be a non-negative integer".into());
                }
                self.fuel = n;
                format!("fuel {n}")
            }
            ":set" => match words.next() {
                Some("guard-tolerance") => {
                    let d = number(words.next(), "D")?;
                    if !(d.is_finite() && d >= 0.0) {
                        return Err("guard tolerance must be finite and non-negative".into());
                    }
                    self.tolerance = d;
                    format!("guard-tolerance {d}")
                }
                Some("semantics") => {
                    let s = words.next().ok_or("missing semantics")?;
                    self.semantics = s.parse()?;
                    format!("semantics {s}")
                }
                Some(other) => return Err(format!("unknown setting `{other}`")),
                None => return Err("missing setting name".into()),
            },
            ":show" => {
                let sem = match self.semantics {
                    Semantics::Small => "small",
                    Semantics::Big => "big",
                    Semantics::Den => "den",
                };
                let prog = match &self.source {
                    Some(s) => hyb_core::parse(s).map(|(p, _)| hyb_core::pretty(&p)).unwrap_or_default(),
                    None => "(no program)".into(),
                };
                format!(
                    "{prog}\nfuel {} guard-tolerance {} semantics {sem}",
                    self.fuel, self.tolerance
                )
            }
            other => return Err(format!("unknown command `{other}`, try :help")),
        };
        Ok(Reply::Print(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn say(s: &mut Session, line: &str) -> String {
        match s.exec(line).unwrap() {
            Reply::Print(p) => p,
            Reply::Quit => "<quit>".into(),
        }
    }

    const CRUISE: &str = "v := 5 ; while true { if v <= 10 then { v' = 1 for 1 } else { v' = -1 for 1 } }";

    #[test]
    fn eval_in_each_semantics() {
        let mut s = Session::default();
        assert_eq!(say(&mut s, CRUISE), "loaded, variables: v");
        for sem in ["small", "big", "den"] {
            say(&mut s, &format!(":set semantics {sem}"));
            assert_eq!(say(&mut s, ":eval 1.5"), "value v=6.5");
        }
    }

    #[test]
    fn errors_keep_session() {
        let mut s = Session::default();
        assert!(s.exec(":eval 1").unwrap_err().contains("no program"));
        say(&mut s, CRUISE);
        assert!(s.exec("x := ;").is_err());
        assert!(s.exec(":eval -1").is_err());
        assert!(s.exec(":eval abc").is_err());
        assert!(s.exec(":fuel -3").is_err());
        assert!(s.exec(":set semantics fast").is_err());
        assert!(s.exec(":frobnicate").is_err());
        assert!(s.exec(":load /nonexistent/file.hyb").is_err());
        assert_eq!(say(&mut s, ":eval 1.5"), "value v=6.5");
    }

    #[test]
    fn fuel_and_tolerance_apply() {
        let mut s = Session::default();
        say(&mut s, "x := 1 ; while true { wait x ; x := 0.5*x }");
        say(&mut s, ":fuel 500");
        assert_eq!(say(&mut s, ":eval 2.5"), "fuel exhausted");
        say(&mut s, "x := 0 ; y := 0 ; x' = 1, y' = 0 for 1 ; if x <= 0.9999999 then { y := 1 } else { y := 2 }");
        assert_eq!(say(&mut s, ":eval 5"), "terminated x=1 y=2 after 1");
        say(&mut s, ":set guard-tolerance 1e-3");
        assert_eq!(say(&mut s, ":eval 5"), "terminated x=1 y=1 after 1");
    }

    #[test]
    fn steps_and_quit() {
        let mut s = Session::default();
        say(&mut s, "x := 1");
        let out = say(&mut s, ":steps 0");
        assert!(out.ends_with("skip x=1 t=0"), "{out}");
        say(&mut s, CRUISE);
        assert_eq!(say(&mut s, ":steps 3 4").lines().count(), 5);
        assert_eq!(s.exec(":quit").unwrap(), Reply::Quit);
    }
}

//! Evaluation budgets shared by all evaluators.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::ast::Span;

pub const DEFAULT_FUEL: u64 = 1_000_000;

/// Errors shared by the evaluators. Fuel exhaustion is not an error.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{span}: differential statement has negative duration {value}")]
    NegativeDuration { value: f64, span: Span },
    #[error("time must be a finite non-negative number, got {0}")]
    BadTime(f64),
    #[error("a stop configuration must carry time 0, got {0}")]
    StopWithTime(f64),
}

/// User-facing knobs for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub fuel: u64,
    /// `|lhs - rhs| <= guard_tolerance` counts as equality in guards.
    pub guard_tolerance: f64,
    pub timeout: Option<Duration>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            fuel: DEFAULT_FUEL,
            guard_tolerance: 0.0,
            timeout: None,
        }
    }
}

impl Limits {
    pub fn with_fuel(fuel: u64) -> Limits {
        Limits {
            fuel,
            ..Limits::default()
        }
    }

    pub fn timeout(mut self, d: Duration) -> Limits {
        self.timeout = Some(d);
        self
    }

    pub fn tolerance(mut self, d: f64) -> Limits {
        self.guard_tolerance = d;
        self
    }

    /// A fresh meter for one query.
    pub fn meter(&self) -> Fuel {
        Fuel::new(self.fuel, self.timeout.map(|d| Instant::now() + d))
    }
}

#[derive(Debug)]
struct FuelInner {
    remaining: AtomicU64,
    used: AtomicU64,
    timed_out: AtomicBool,
    deadline: Option<Instant>,
}

/// A fuel counter with an optional wall-clock deadline. Clones share the
/// same budget, so nested loops and lazily resumed computations draw from
/// one pool.
#[derive(Debug, Clone)]
pub struct Fuel(Arc<FuelInner>);

impl Fuel {
    pub fn new(fuel: u64, deadline: Option<Instant>) -> Fuel {
        Fuel(Arc::new(FuelInner {
            remaining: AtomicU64::new(fuel),
            used: AtomicU64::new(0),
            timed_out: AtomicBool::new(false),
            deadline,
        }))
    }

    pub fn unlimited() -> Fuel {
        Fuel::new(u64::MAX, None)
    }

    /// Takes one unit. Returns false once the budget or the deadline is gone.
    pub fn tick(&self) -> bool {
        let inner = &self.0;
        let ok = inner
            .remaining
            .fetch_update(Ordering::Relaxed, Ordering::Relaxed, |r| r.checked_sub(1))
            .is_ok();
        if !ok {
            return false;
        }
        let used = inner.used.fetch_add(1, Ordering::Relaxed) + 1;
        if used.is_multiple_of(1024) {
            if let Some(d) = inner.deadline {
                if Instant::now() >= d {
                    inner.timed_out.store(true, Ordering::Relaxed);
                    inner.remaining.store(0, Ordering::Relaxed);
                    return false;
                }
            }
        }
        true
    }

    /// Drops the remaining budget, stopping every computation sharing it.
    pub fn exhaust(&self) {
        self.0.remaining.store(0, Ordering::Relaxed);
    }

    pub fn used(&self) -> u64 {
        self.0.used.load(Ordering::Relaxed)
    }

    pub fn remaining(&self) -> u64 {
        self.0.remaining.load(Ordering::Relaxed)
    }

    pub fn timed_out(&self) -> bool {
        self.0.timed_out.load(Ordering::Relaxed)
    }
}

pub(crate) fn check_time(t: f64) -> Result<(), EvalError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(EvalError::BadTime(t))
    }
}

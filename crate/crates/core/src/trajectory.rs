//! Finite trajectories `[0, d) → S` built from closed-form segments.
//!
//! Trajectories are compared extensionally on probe sets: every segment
//! boundary of both operands, segment midpoints and a few pseudo-random
//! instants. Probe equality is sound for the piecewise laws used here but
//! is not a decision procedure for function equality.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::{close, Env, FlowFn};

/// Relative tolerance used by probe comparisons.
pub const PROBE_TOL: f64 = 1e-9;

const RANDOM_PROBES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrjError {
    #[error("time {time} outside the domain [0, {total})")]
    OutOfDomain { time: f64, total: f64 },
}

/// A state-valued function of local time.
pub trait Curve<S>: Send + Sync {
    fn at(&self, tau: f64) -> S;
}

impl Curve<Env> for FlowFn {
    fn at(&self, tau: f64) -> Env {
        self.eval(tau)
    }
}

struct Mapped<A, B> {
    inner: Law<A>,
    f: Arc<dyn Fn(A) -> B + Send + Sync>,
}

impl<A: Clone + Send + Sync + 'static, B> Curve<B> for Mapped<A, B> {
    fn at(&self, tau: f64) -> B {
        (self.f)(self.inner.at(tau))
    }
}

/// Law of one segment.
pub enum Law<S> {
    Const(S),
    Curve(Arc<dyn Curve<S>>),
}

impl<S: Clone> Clone for Law<S> {
    fn clone(&self) -> Self {
        match self {
            Law::Const(s) => Law::Const(s.clone()),
            Law::Curve(c) => Law::Curve(c.clone()),
        }
    }
}

impl<S: Clone + Send + Sync + 'static> Law<S> {
    pub fn at(&self, tau: f64) -> S {
        match self {
            Law::Const(s) => s.clone(),
            Law::Curve(c) => c.at(tau),
        }
    }

    pub fn map<B, F>(&self, f: Arc<F>) -> Law<B>
    where
        F: Fn(S) -> B + Send + Sync + 'static + ?Sized,
        B: Clone + Send + Sync + 'static,
    {
        match self {
            Law::Const(s) => Law::Const(f(s.clone())),
            Law::Curve(_) => {
                let f2 = f.clone();
                Law::Curve(Arc::new(Mapped {
                    inner: self.clone(),
                    f: Arc::new(move |s| f2(s)),
                }))
            }
        }
    }
}

pub struct Seg<S> {
    pub dur: f64,
    pub law: Law<S>,
}

impl<S: Clone> Clone for Seg<S> {
    fn clone(&self) -> Self {
        Seg {
            dur: self.dur,
            law: self.law.clone(),
        }
    }
}

impl<S: Clone + Send + Sync + 'static> Seg<S> {
    /// A segment of positive duration.
    pub fn new(dur: f64, law: Law<S>) -> Seg<S> {
        assert!(dur > 0.0 && dur.is_finite(), "segment duration must be positive, got {dur}");
        Seg { dur, law }
    }

    pub fn constant(dur: f64, s: S) -> Seg<S> {
        Seg::new(dur, Law::Const(s))
    }
}

impl Seg<Env> {
    /// `λτ. φ_σ(τ)` on `[0, dur)`.
    pub fn flow(dur: f64, f: FlowFn) -> Seg<Env> {
        if f.system().is_still() {
            Seg::constant(dur, f.initial().clone())
        } else {
            Seg::new(dur, Law::Curve(Arc::new(f)))
        }
    }
}

/// A finite trajectory; the empty one is `ε`.
pub struct Trj<S> {
    segs: Vec<Seg<S>>,
    total: f64,
}

impl<S: Clone> Clone for Trj<S> {
    fn clone(&self) -> Self {
        Trj {
            segs: self.segs.clone(),
            total: self.total,
        }
    }
}

impl<S> fmt::Debug for Trj<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let durs: Vec<f64> = self.segs.iter().map(|s| s.dur).collect();
        f.debug_struct("Trj").field("durations", &durs).finish()
    }
}

impl<S: Clone + Send + Sync + 'static> Default for Trj<S> {
    fn default() -> Self {
        Trj::empty()
    }
}

/// Where a time instant falls in a trajectory.
pub enum Locate {
    /// Segment index and local offset.
    Inside(usize, f64),
    /// Past the end, with the time left over.
    Beyond(f64),
}

impl<S: Clone + Send + Sync + 'static> Trj<S> {
    pub fn empty() -> Trj<S> {
        Trj {
            segs: Vec::new(),
            total: 0.0,
        }
    }

    pub fn single(seg: Seg<S>) -> Trj<S> {
        Trj {
            total: seg.dur,
            segs: vec![seg],
        }
    }

    pub fn from_segs(segs: Vec<Seg<S>>) -> Trj<S> {
        let mut t = Trj::empty();
        for s in segs {
            t.push(s);
        }
        t
    }

    pub fn push(&mut self, seg: Seg<S>) {
        self.total += seg.dur;
        self.segs.push(seg);
    }

    pub fn segs(&self) -> &[Seg<S>] {
        &self.segs
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }

    /// Walks the segments subtracting durations, so the arithmetic matches
    /// an evaluator that consumes a time budget statement by statement.
    pub fn locate(&self, time: f64) -> Locate {
        let mut rem = time;
        for (i, s) in self.segs.iter().enumerate() {
            if rem < s.dur {
                return Locate::Inside(i, rem);
            }
            rem -= s.dur;
        }
        Locate::Beyond(rem)
    }

    pub fn contains(&self, time: f64) -> bool {
        time >= 0.0 && matches!(self.locate(time), Locate::Inside(..))
    }

    /// `e^τ`
    pub fn at(&self, time: f64) -> Result<S, TrjError> {
        let out = || TrjError::OutOfDomain {
            time,
            total: self.total,
        };
        if time < 0.0 || time.is_nan() {
            return Err(out());
        }
        match self.locate(time) {
            Locate::Inside(i, tau) => Ok(self.segs[i].law.at(tau)),
            Locate::Beyond(_) => Err(out()),
        }
    }

    /// `e^0` for non-empty trajectories.
    pub fn initial(&self) -> Option<S> {
        self.segs.first().map(|s| s.law.at(0.0))
    }

    /// The limit value at the right end of the domain, extending the last
    /// segment's law to its closed endpoint.
    pub fn boundary(&self) -> Option<S> {
        self.segs.last().map(|s| s.law.at(s.dur))
    }

    /// `self ⌢ other`
    pub fn concat(&self, other: &Trj<S>) -> Trj<S> {
        let mut out = self.clone();
        out.append(other);
        out
    }

    pub fn append(&mut self, other: &Trj<S>) {
        for s in &other.segs {
            self.push(s.clone());
        }
    }

    /// The restriction to `[0, d)`.
    pub fn truncate(&self, d: f64) -> Result<Trj<S>, TrjError> {
        if !(0.0..=self.total).contains(&d) {
            return Err(TrjError::OutOfDomain {
                time: d,
                total: self.total,
            });
        }
        let mut out = Trj::empty();
        let mut rem = d;
        for s in &self.segs {
            if rem <= 0.0 {
                break;
            }
            if rem < s.dur {
                out.push(Seg {
                    dur: rem,
                    law: s.law.clone(),
                });
                break;
            }
            out.push(s.clone());
            rem -= s.dur;
        }
        Ok(out)
    }

    /// Pointwise image `f ∘ e`.
    pub fn map<B, F>(&self, f: F) -> Trj<B>
    where
        F: Fn(S) -> B + Send + Sync + 'static,
        B: Clone + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        Trj {
            segs: self
                .segs
                .iter()
                .map(|s| Seg {
                    dur: s.dur,
                    law: s.law.map(f.clone()),
                })
                .collect(),
            total: self.total,
        }
    }

    /// Start times of all segments and the end time.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segs.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for s in &self.segs {
            t += s.dur;
            out.push(t);
        }
        out
    }
}

/// Approximate equality of trajectory values.
pub trait Approx {
    fn approx(&self, other: &Self, tol: f64) -> bool;
}

impl Approx for f64 {
    fn approx(&self, other: &Self, tol: f64) -> bool {
        close(*self, *other, tol)
    }
}

impl Approx for Env {
    fn approx(&self, other: &Self, tol: f64) -> bool {
        self.approx_eq(other, tol)
    }
}

impl Approx for () {
    fn approx(&self, _: &Self, _: f64) -> bool {
        true
    }
}

impl<A: Approx, B: Approx> Approx for (A, B) {
    fn approx(&self, other: &Self, tol: f64) -> bool {
        self.0.approx(&other.0, tol) && self.1.approx(&other.1, tol)
    }
}

/// Sample instants for comparing trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet(pub Vec<f64>);

impl ProbeSet {
    /// Boundaries and midpoints of both operands' segments plus seeded
    /// random instants, all below `limit`.
    pub fn for_pair<A, B>(a: &Trj<A>, b: &Trj<B>, limit: f64, seed: u64) -> ProbeSet
    where
        A: Clone + Send + Sync + 'static,
        B: Clone + Send + Sync + 'static,
    {
        let mut pts = Vec::new();
        for bp in [a.breakpoints(), b.breakpoints()] {
            for w in bp.windows(2) {
                pts.push(w[0]);
                pts.push(0.5 * (w[0] + w[1]));
            }
        }
        if limit > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..RANDOM_PROBES {
                pts.push(rng.random_range(0.0..limit));
            }
        }
        pts.retain(|p| *p >= 0.0 && *p < limit);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        ProbeSet(pts)
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }
}

/// `a ≤ b`: `a` is no longer than `b` and they agree on the probes that lie
/// in `a`'s domain.
pub fn prefix_le<S>(a: &Trj<S>, b: &Trj<S>, probes: &ProbeSet) -> bool
where
    S: Clone + Send + Sync + 'static + Approx,
{
    if a.total() > b.total() {
        return false;
    }
    probes.times().iter().filter(|t| a.contains(**t)).all(|t| match (a.at(*t), b.at(*t)) {
        (Ok(x), Ok(y)) => x.approx(&y, PROBE_TOL),
        _ => false,
    })
}

/// Probe equality: equal durations (up to rounding of the sums) and equal
/// values at every probe.
pub fn probe_eq<S>(a: &Trj<S>, b: &Trj<S>, seed: u64) -> bool
where
    S: Clone + Send + Sync + 'static + Approx,
{
    if !close(a.total(), b.total(), 1e-12) {
        return false;
    }
    let limit = a.total().min(b.total());
    let probes = ProbeSet::for_pair(a, b, limit, seed);
    probes.times().iter().all(|t| match (a.at(*t), b.at(*t)) {
        (Ok(x), Ok(y)) => x.approx(&y, PROBE_TOL),
        // Rounding can leave a probe inside one domain only.
        _ => close(*t, limit, 1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn steps(vals: &[(f64, f64)]) -> Trj<f64> {
        Trj::from_segs(vals.iter().map(|(d, v)| Seg::constant(*d, *v)).collect())
    }

    struct Ramp;
    impl Curve<f64> for Ramp {
        fn at(&self, tau: f64) -> f64 {
            tau
        }
    }

    #[test]
    fn empty_has_no_points() {
        let e: Trj<f64> = Trj::empty();
        assert!(e.at(0.0).is_err());
        assert_eq!(e.total(), 0.0);
    }

    #[test]
    fn constant_and_curve_segments() {
        let c = steps(&[(2.0, 7.0)]);
        assert_eq!(c.at(1.5).unwrap(), 7.0);
        let r = Trj::single(Seg::new(2.0, Law::Curve(Arc::new(Ramp))));
        assert_eq!(r.at(0.5).unwrap(), 0.5);
        assert!(r.at(2.0).is_err());
        assert_eq!(r.boundary(), Some(2.0));
    }

    #[test]
    fn concat_is_piecewise() {
        let a = steps(&[(1.0, 1.0)]);
        let b = Trj::single(Seg::new(2.0, Law::Curve(Arc::new(Ramp))));
        let ab = a.concat(&b);
        assert_eq!(ab.total(), 3.0);
        assert_eq!(ab.at(0.5).unwrap(), 1.0);
        assert_eq!(ab.at(1.5).unwrap(), 0.5);
        assert!(probe_eq(&Trj::empty().concat(&b), &b, 1));
        assert!(probe_eq(&b.concat(&Trj::empty()), &b, 1));
    }

    #[test]
    fn associativity() {
        let a = steps(&[(0.5, 1.0)]);
        let b = steps(&[(0.25, 2.0), (1.0, 3.0)]);
        let c = Trj::single(Seg::new(1.5, Law::Curve(Arc::new(Ramp))));
        let l = a.concat(&b).concat(&c);
        let r = a.concat(&b.concat(&c));
        assert!(probe_eq(&l, &r, 3));
        assert_eq!(l.total(), r.total());
    }

    #[test]
    fn prefixes() {
        let a = steps(&[(1.0, 1.0)]);
        let b = steps(&[(2.0, 2.0)]);
        let ab = a.concat(&b);
        let probes = ProbeSet::for_pair(&a, &ab, ab.total(), 9);
        assert!(prefix_le(&Trj::empty(), &ab, &probes));
        assert!(prefix_le(&ab, &ab, &probes));
        assert!(prefix_le(&a, &ab, &probes));
        assert!(!prefix_le(&b, &ab, &probes));
    }

    #[test]
    fn truncation() {
        let a = steps(&[(1.0, 1.0)]);
        let b = steps(&[(2.0, 2.0)]);
        let ab = a.concat(&b);
        assert!(probe_eq(&ab.truncate(ab.total()).unwrap(), &ab, 0));
        assert!(ab.truncate(0.0).unwrap().is_empty());
        assert!(probe_eq(&ab.truncate(1.0).unwrap(), &a, 0));
        assert_eq!(ab.truncate(2.0).unwrap().at(1.5).unwrap(), 2.0);
        assert!(ab.truncate(4.0).is_err());
    }

    #[test]
    fn probe_eq_detects_differences() {
        let a = steps(&[(1.0, 1.0), (1.0, 2.0)]);
        let b = steps(&[(1.0, 1.0), (1.0, 2.5)]);
        assert!(!probe_eq(&a, &b, 0));
        assert!(!probe_eq(&a, &steps(&[(1.0, 1.0)]), 0));
    }

    #[test]
    fn mapped_curves() {
        let r = Trj::single(Seg::new(2.0, Law::Curve(Arc::new(Ramp))));
        let m = r.map(|x| 2.0 * x + 1.0);
        assert_eq!(m.at(0.5).unwrap(), 2.0);
    }
}

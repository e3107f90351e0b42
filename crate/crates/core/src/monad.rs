//! The hybrid monad `H_S` over trajectories, its Elgot iteration, the
//! morphisms `ι`, `τ`, and the isomorphism `θ` onto the classic hybrid
//! monad of closed/open trajectories.
//!
//! Unbounded behaviour is represented lazily: a [`Deferred`] element holds
//! the prefix computed so far and a function that extends it on demand up
//! to a requested horizon. Horizons are always measured from the start of
//! the element and located by walking segments with subtraction, so the
//! arithmetic matches a step-by-step evaluator.

use std::fmt;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::dynamics::Env;
use crate::limits::Fuel;
use crate::trajectory::{probe_eq, Approx, Law, Locate, Seg, Trj, PROBE_TOL};

/// Binary coproduct `A ⊎ B`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coprod<A, B> {
    Inl(A),
    Inr(B),
}

impl<A: Approx, B: Approx> Approx for Coprod<A, B> {
    fn approx(&self, other: &Self, tol: f64) -> bool {
        match (self, other) {
            (Coprod::Inl(a), Coprod::Inl(b)) => a.approx(b, tol),
            (Coprod::Inr(a), Coprod::Inr(b)) => a.approx(b, tol),
            _ => false,
        }
    }
}

/// The point `⊥`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bottom;

impl Approx for Bottom {
    fn approx(&self, _: &Self, _: f64) -> bool {
        true
    }
}

/// Whether a divergent trajectory includes its right endpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum Closure<S> {
    /// Domain `[0, d)`.
    Open,
    /// Domain `[0, d]`, with the value at `d`.
    Closed(S),
}

impl<S: Approx> Closure<S> {
    fn approx(&self, other: &Self, tol: f64) -> bool {
        match (self, other) {
            (Closure::Open, Closure::Open) => true,
            (Closure::Closed(a), Closure::Closed(b)) => a.approx(b, tol),
            _ => false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonadError {
    #[error("element still has unevaluated behaviour beyond time {0}")]
    Unforced(f64),
    #[error("instant divergence changes inside a segment near time {0}")]
    UndetectableCut(f64),
}

/// Shared bounds for values and states.
pub trait Val: Clone + Send + Sync + 'static {}
impl<T: Clone + Send + Sync + 'static> Val for T {}

type Force<X, S> = Arc<dyn Fn(f64) -> HElem<X, S> + Send + Sync>;

/// A prefix of a trajectory that goes on beyond what has been computed.
pub struct Deferred<X, S> {
    pub prefix: Trj<S>,
    force: Force<X, S>,
}

impl<X, S: Clone> Clone for Deferred<X, S> {
    fn clone(&self) -> Self {
        Deferred {
            prefix: self.prefix.clone(),
            force: self.force.clone(),
        }
    }
}

impl<X: Val, S: Val> Deferred<X, S> {
    pub fn new<F>(prefix: Trj<S>, force: F) -> Self
    where
        F: Fn(f64) -> HElem<X, S> + Send + Sync + 'static,
    {
        Deferred {
            prefix,
            force: Arc::new(force),
        }
    }

    /// The element observed at least up to `horizon`: either complete or
    /// deferred with a prefix whose domain contains `horizon`.
    pub fn force(&self, horizon: f64) -> HElem<X, S> {
        if self.prefix.contains(horizon) {
            return HElem::Lazy(self.clone());
        }
        let mut r = (self.force)(horizon);
        // A resume function may hand back another deferred element that
        // still falls short; keep going while it makes progress.
        let mut reached = self.prefix.total();
        let mut stalls = 0;
        loop {
            match r {
                HElem::Lazy(d) if !d.prefix.contains(horizon) => {
                    if d.prefix.total() > reached {
                        reached = d.prefix.total();
                        stalls = 0;
                    } else {
                        stalls += 1;
                        if stalls > 2 {
                            return HElem::Lazy(d);
                        }
                    }
                    r = (d.force)(horizon);
                }
                r => return r,
            }
        }
    }
}

/// An element of `H_S X`.
pub enum HElem<X, S = Env> {
    /// Convergent: `⟨[0, d), e, x⟩`.
    Conv { tr: Trj<S>, val: X },
    /// Divergent over `[0, d)` or `[0, d]`. `fuel_exhausted` marks elements
    /// produced by running out of budget rather than by the computation.
    Div {
        tr: Trj<S>,
        closure: Closure<S>,
        fuel_exhausted: bool,
    },
    /// Not yet known past its prefix.
    Lazy(Deferred<X, S>),
}

impl<X: Clone, S: Clone> Clone for HElem<X, S> {
    fn clone(&self) -> Self {
        match self {
            HElem::Conv { tr, val } => HElem::Conv {
                tr: tr.clone(),
                val: val.clone(),
            },
            HElem::Div {
                tr,
                closure,
                fuel_exhausted,
            } => HElem::Div {
                tr: tr.clone(),
                closure: closure.clone(),
                fuel_exhausted: *fuel_exhausted,
            },
            HElem::Lazy(d) => HElem::Lazy(d.clone()),
        }
    }
}

impl<X: fmt::Debug, S> fmt::Debug for HElem<X, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HElem::Conv { tr, val } => f.debug_struct("Conv").field("tr", tr).field("val", val).finish(),
            HElem::Div {
                tr, fuel_exhausted, ..
            } => f
                .debug_struct("Div")
                .field("tr", tr)
                .field("fuel_exhausted", fuel_exhausted)
                .finish(),
            HElem::Lazy(d) => f.debug_struct("Lazy").field("prefix", &d.prefix).finish(),
        }
    }
}

impl<X: Val, S: Val> HElem<X, S> {
    /// A divergent element that is not the result of fuel exhaustion.
    pub fn div(tr: Trj<S>, closure: Closure<S>) -> Self {
        HElem::Div {
            tr,
            closure,
            fuel_exhausted: false,
        }
    }

    /// `inr ε`
    pub fn instant_divergence() -> Self {
        HElem::div(Trj::empty(), Closure::Open)
    }

    /// The computed part of the trajectory.
    pub fn trajectory(&self) -> &Trj<S> {
        match self {
            HElem::Conv { tr, .. } | HElem::Div { tr, .. } => tr,
            HElem::Lazy(d) => &d.prefix,
        }
    }

    pub fn is_lazy(&self) -> bool {
        matches!(self, HElem::Lazy(_))
    }

    /// Forces lazy elements up to `horizon`.
    pub fn observe(self, horizon: f64) -> Self {
        match self {
            HElem::Lazy(d) => d.force(horizon),
            m => m,
        }
    }
}

/// `η(x) = ⟨ε, x⟩`
pub fn unit<X: Val, S: Val>(x: X) -> HElem<X, S> {
    HElem::Conv {
        tr: Trj::empty(),
        val: x,
    }
}

/// Time left after the trajectory when `horizon` lies past its end.
fn remaining<S: Val>(tr: &Trj<S>, horizon: f64) -> f64 {
    match tr.locate(horizon) {
        Locate::Beyond(r) => r,
        Locate::Inside(..) => 0.0,
    }
}

/// `tr ▷ n`: prefixes every trajectory in `n` with `tr`.
pub fn act<Y: Val, S: Val>(tr: &Trj<S>, n: HElem<Y, S>) -> HElem<Y, S> {
    if tr.is_empty() {
        return n;
    }
    match n {
        HElem::Conv { tr: t2, val } => HElem::Conv {
            tr: tr.concat(&t2),
            val,
        },
        HElem::Div {
            tr: t2,
            closure,
            fuel_exhausted,
        } => HElem::Div {
            tr: tr.concat(&t2),
            closure,
            fuel_exhausted,
        },
        HElem::Lazy(d) => {
            let head = tr.clone();
            let prefix = tr.concat(&d.prefix);
            HElem::Lazy(Deferred::new(prefix, move |h| match head.locate(h) {
                Locate::Inside(..) => act(&head, HElem::Lazy(d.clone())),
                Locate::Beyond(r) => act(&head, d.force(r)),
            }))
        }
    }
}

/// Kleisli extension observed up to an optional horizon.
///
/// `f` receives the horizon remaining after the input's trajectory. When the
/// input's trajectory already covers the horizon `f` is not called; the
/// result is deferred instead.
pub fn kleisli_within<X, Y, S, F>(f: Arc<F>, m: HElem<X, S>, horizon: Option<f64>) -> HElem<Y, S>
where
    X: Val,
    Y: Val,
    S: Val,
    F: Fn(X, Option<f64>) -> HElem<Y, S> + Send + Sync + 'static + ?Sized,
{
    match m {
        HElem::Conv { tr, val } => {
            if let Some(h) = horizon {
                if tr.contains(h) {
                    let m = HElem::Conv { tr: tr.clone(), val };
                    return HElem::Lazy(Deferred::new(tr, move |h2| {
                        kleisli_within(f.clone(), m.clone(), Some(h2))
                    }));
                }
            }
            let rem = horizon.map(|h| remaining(&tr, h));
            act(&tr, f(val, rem))
        }
        HElem::Div {
            tr,
            closure,
            fuel_exhausted,
        } => HElem::Div {
            tr,
            closure,
            fuel_exhausted,
        },
        HElem::Lazy(d) => match horizon {
            Some(h) if !d.prefix.contains(h) => kleisli_within(f, d.force(h), Some(h)),
            _ => {
                let prefix = d.prefix.clone();
                HElem::Lazy(Deferred::new(prefix, move |h2| {
                    kleisli_within(f.clone(), d.force(h2), Some(h2))
                }))
            }
        },
    }
}

/// `f⋆(m)` for horizon-independent `f`.
pub fn kleisli<X, Y, S, F>(f: F, m: HElem<X, S>) -> HElem<Y, S>
where
    X: Val,
    Y: Val,
    S: Val,
    F: Fn(X) -> HElem<Y, S> + Send + Sync + 'static,
{
    kleisli_within(Arc::new(move |x, _| f(x)), m, None)
}

/// `H_S g`: applies `g` to the returned value.
pub fn map_value<X, Y, S, G>(m: HElem<X, S>, g: Arc<G>) -> HElem<Y, S>
where
    X: Val,
    Y: Val,
    S: Val,
    G: Fn(X) -> Y + Send + Sync + 'static + ?Sized,
{
    match m {
        HElem::Conv { tr, val } => HElem::Conv { tr, val: g(val) },
        HElem::Div {
            tr,
            closure,
            fuel_exhausted,
        } => HElem::Div {
            tr,
            closure,
            fuel_exhausted,
        },
        HElem::Lazy(d) => {
            let prefix = d.prefix.clone();
            HElem::Lazy(Deferred::new(prefix, move |h| map_value(d.force(h), g.clone())))
        }
    }
}

/// `H_f id`: applies `f` to every state of the trajectory.
pub fn map_states<X, S, T, F>(m: HElem<X, S>, f: Arc<F>) -> HElem<X, T>
where
    X: Val,
    S: Val,
    T: Val,
    F: Fn(S) -> T + Send + Sync + 'static + ?Sized,
{
    let mapf = {
        let f = f.clone();
        move |tr: &Trj<S>| {
            let f = f.clone();
            tr.map(move |s| f(s))
        }
    };
    match m {
        HElem::Conv { tr, val } => HElem::Conv { tr: mapf(&tr), val },
        HElem::Div {
            tr,
            closure,
            fuel_exhausted,
        } => HElem::Div {
            tr: mapf(&tr),
            closure: match closure {
                Closure::Open => Closure::Open,
                Closure::Closed(b) => Closure::Closed(f(b)),
            },
            fuel_exhausted,
        },
        HElem::Lazy(d) => {
            let prefix = mapf(&d.prefix);
            HElem::Lazy(Deferred::new(prefix, move |h| map_states(d.force(h), f.clone())))
        }
    }
}

enum Phase<X, Y, S> {
    Next(X),
    Pending(Deferred<Coprod<Y, X>, S>),
    Done(HElem<Y, S>),
}

struct Unfolder<X, Y, S, F: ?Sized> {
    f: Arc<F>,
    fuel: Fuel,
    acc: Trj<S>,
    last_was_instant: bool,
    phase: Option<Phase<X, Y, S>>,
}

impl<X, Y, S, F> Unfolder<X, Y, S, F>
where
    X: Val,
    Y: Val,
    S: Val,
    F: Fn(X, Option<f64>) -> HElem<Coprod<Y, X>, S> + Send + Sync + 'static + ?Sized,
{
    fn exhausted(&self) -> HElem<Y, S> {
        let closure = match self.acc.boundary() {
            Some(b) if self.last_was_instant => Closure::Closed(b),
            _ => Closure::Open,
        };
        HElem::Div {
            tr: self.acc.clone(),
            closure,
            fuel_exhausted: true,
        }
    }

    fn absorb(&mut self, r: HElem<Coprod<Y, X>, S>) {
        let next = match r {
            HElem::Conv {
                tr,
                val: Coprod::Inl(y),
            } => Phase::Done(HElem::Conv {
                tr: self.acc.concat(&tr),
                val: y,
            }),
            HElem::Conv {
                tr,
                val: Coprod::Inr(x),
            } => {
                self.last_was_instant = tr.is_empty();
                self.acc.append(&tr);
                Phase::Next(x)
            }
            HElem::Div {
                tr,
                closure,
                fuel_exhausted,
            } => Phase::Done(HElem::Div {
                tr: self.acc.concat(&tr),
                closure,
                fuel_exhausted,
            }),
            HElem::Lazy(d) => Phase::Pending(d),
        };
        self.phase = Some(next);
    }

    /// Unfolds until the result is known or its trajectory covers `horizon`.
    fn advance(&mut self, horizon: Option<f64>, me: &Arc<Mutex<Self>>) -> HElem<Y, S> {
        loop {
            let phase = self.phase.take().expect("unfolder phase");
            match phase {
                Phase::Done(r) => {
                    self.phase = Some(Phase::Done(r.clone()));
                    return r;
                }
                Phase::Pending(d) => {
                    let rem = horizon.map(|h| remaining(&self.acc, h));
                    let covered = match (horizon, rem) {
                        (Some(h), Some(r)) => self.acc.contains(h) || d.prefix.contains(r),
                        _ => true,
                    };
                    if covered {
                        let prefix = self.acc.concat(&d.prefix);
                        self.phase = Some(Phase::Pending(d));
                        return self.deferred(prefix, me);
                    }
                    let r = d.force(rem.expect("bounded horizon"));
                    self.absorb(r);
                }
                Phase::Next(x) => {
                    if let Some(h) = horizon {
                        if self.acc.contains(h) {
                            self.phase = Some(Phase::Next(x));
                            return self.deferred(self.acc.clone(), me);
                        }
                    }
                    if !self.fuel.tick() {
                        let r = self.exhausted();
                        self.phase = Some(Phase::Done(r.clone()));
                        return r;
                    }
                    let rem = horizon.map(|h| remaining(&self.acc, h));
                    let r = (self.f)(x, rem);
                    self.absorb(r);
                }
            }
        }
    }

    fn deferred(&self, prefix: Trj<S>, me: &Arc<Mutex<Self>>) -> HElem<Y, S> {
        let me = me.clone();
        HElem::Lazy(Deferred::new(prefix, move |h| {
            let mut u = me.lock().expect("unfolder lock");
            u.advance(Some(h), &me)
        }))
    }
}

/// `f†(x0)` observed up to an optional horizon.
///
/// Each call of `f` draws one unit of `fuel`. The unfolding state is kept
/// behind a mutex and shared by every deferred element derived from this
/// call, so later queries at larger horizons continue where earlier ones
/// stopped instead of starting over.
pub fn elgot_within<X, Y, S, F>(f: Arc<F>, x0: X, horizon: Option<f64>, fuel: &Fuel) -> HElem<Y, S>
where
    X: Val,
    Y: Val,
    S: Val,
    F: Fn(X, Option<f64>) -> HElem<Coprod<Y, X>, S> + Send + Sync + 'static + ?Sized,
{
    let u = Arc::new(Mutex::new(Unfolder {
        f,
        fuel: fuel.clone(),
        acc: Trj::empty(),
        last_was_instant: false,
        phase: Some(Phase::Next(x0)),
    }));
    let mut guard = u.lock().expect("unfolder lock");
    guard.advance(horizon, &u)
}

/// `f†(x0)` for horizon-independent `f`; runs until a value is reached, a
/// divergent element is produced, or the fuel is gone.
pub fn elgot<X, Y, S, F>(f: F, x0: X, fuel: &Fuel) -> HElem<Y, S>
where
    X: Val,
    Y: Val,
    S: Val,
    F: Fn(X) -> HElem<Coprod<Y, X>, S> + Send + Sync + 'static,
{
    elgot_within(Arc::new(move |x, _| f(x)), x0, None, fuel)
}

/// Codomain `X ⊎ (S ⊎ {⊥})` of `ι`.
#[derive(Debug, Clone, PartialEq)]
pub enum IotaResult<X, S> {
    InlVal(X),
    InrState(S),
    Bottom,
}

impl<X: Approx, S: Approx> Approx for IotaResult<X, S> {
    fn approx(&self, other: &Self, tol: f64) -> bool {
        match (self, other) {
            (IotaResult::InlVal(a), IotaResult::InlVal(b)) => a.approx(b, tol),
            (IotaResult::InrState(a), IotaResult::InrState(b)) => a.approx(b, tol),
            (IotaResult::Bottom, IotaResult::Bottom) => true,
            _ => false,
        }
    }
}

/// `ι`: the initial state of a non-empty trajectory, the value of an
/// instantly convergent element, `⊥` for instant divergence.
pub fn iota<X: Val, S: Val>(m: &HElem<X, S>) -> IotaResult<X, S> {
    match m {
        HElem::Conv { tr, val } => match tr.initial() {
            Some(s) => IotaResult::InrState(s),
            None => IotaResult::InlVal(val.clone()),
        },
        HElem::Div { tr, closure, .. } => match (tr.initial(), closure) {
            (Some(s), _) => IotaResult::InrState(s),
            // `[0, 0]` is not empty: its only point is the boundary.
            (None, Closure::Closed(b)) => IotaResult::InrState(b.clone()),
            (None, Closure::Open) => IotaResult::Bottom,
        },
        HElem::Lazy(d) => match d.prefix.initial() {
            Some(s) => IotaResult::InrState(s),
            None => IotaResult::Bottom,
        },
    }
}

/// `ι' = [inl, id] ∘ ι : H_S S → S ⊎ {⊥}`.
pub fn iota_prime<S: Val>(m: &HElem<S, S>) -> Coprod<S, Bottom> {
    match iota(m) {
        IotaResult::InlVal(s) | IotaResult::InrState(s) => Coprod::Inl(s),
        IotaResult::Bottom => Coprod::Inr(Bottom),
    }
}

/// Interior sample positions, as fractions of a segment, used to look for
/// right-injection points inside non-constant segments.
const CUT_PROBES: [f64; 7] = [0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875];

/// Largest prefix of `tr` on which every point is a left injection, with the
/// injection stripped. Returns the stripped prefix and whether it is all of `tr`.
fn left_prefix<S: Val, Y: Val>(tr: &Trj<Coprod<S, Y>>) -> Result<(Trj<S>, bool), MonadError> {
    let mut out = Trj::empty();
    let mut start = 0.0;
    for seg in tr.segs() {
        match &seg.law {
            Law::Const(Coprod::Inl(s)) => out.push(Seg::constant(seg.dur, s.clone())),
            Law::Const(Coprod::Inr(_)) => return Ok((out, false)),
            Law::Curve(_) => {
                let s0 = match seg.law.at(0.0) {
                    Coprod::Inl(s) => s,
                    Coprod::Inr(_) => return Ok((out, false)),
                };
                for frac in CUT_PROBES {
                    if let Coprod::Inr(_) = seg.law.at(frac * seg.dur) {
                        return Err(MonadError::UndetectableCut(start + frac * seg.dur));
                    }
                }
                let law = seg.law.clone();
                let stripped = Law::Curve(Arc::new(Stripped { law, fallback: s0 }));
                out.push(Seg::new(seg.dur, stripped));
            }
        }
        start += seg.dur;
    }
    Ok((out, true))
}

/// Strips the left injection from a curve already probed to be all-left.
/// Points the probes missed fall back to the segment's initial state.
struct Stripped<S, Y> {
    law: Law<Coprod<S, Y>>,
    fallback: S,
}

impl<S: Val, Y: Val> crate::trajectory::Curve<S> for Stripped<S, Y> {
    fn at(&self, tau: f64) -> S {
        match self.law.at(tau) {
            Coprod::Inl(s) => s,
            Coprod::Inr(_) => self.fallback.clone(),
        }
    }
}

/// `τ : H_{S⊎Y} X → H_S X`: restricts to the largest prefix staying in `S`.
pub fn tau<X: Val, S: Val, Y: Val>(m: &HElem<X, Coprod<S, Y>>) -> Result<HElem<X, S>, MonadError> {
    match m {
        HElem::Conv { tr, val } => {
            let (pre, whole) = left_prefix(tr)?;
            Ok(if whole {
                HElem::Conv {
                    tr: pre,
                    val: val.clone(),
                }
            } else {
                HElem::div(pre, Closure::Open)
            })
        }
        HElem::Div {
            tr,
            closure,
            fuel_exhausted,
        } => {
            let (pre, whole) = left_prefix(tr)?;
            let closure = match closure {
                Closure::Closed(Coprod::Inl(b)) if whole => Closure::Closed(b.clone()),
                _ => Closure::Open,
            };
            Ok(HElem::Div {
                tr: pre,
                closure,
                fuel_exhausted: *fuel_exhausted,
            })
        }
        HElem::Lazy(d) => Err(MonadError::Unforced(d.prefix.total())),
    }
}

/// Kleisli extension of the classic monad transported to `H_S S`:
/// `f⋆ = f⋆_S ∘ τ ∘ H_{ι'∘f} id`.
pub fn state_kleisli<S, F>(f: F, m: &HElem<S, S>) -> Result<HElem<S, S>, MonadError>
where
    S: Val,
    F: Fn(S) -> HElem<S, S> + Send + Sync + 'static,
{
    let f = Arc::new(f);
    let g = f.clone();
    let marked = map_states(m.clone(), Arc::new(move |s: S| iota_prime(&g(s))));
    let cut = tau(&marked)?;
    Ok(kleisli(move |s| f(s), cut))
}

/// An element of the classic hybrid monad `H S`: a closed convergent
/// trajectory `[0, d]`, or a divergent one over `[0, d)` or `[0, d]`.
#[derive(Debug)]
pub enum HClassic<S> {
    /// `inl⟨[0, d], ê⟩`; `tr` covers `[0, d)` and `end` is `ê^d`.
    Conv { tr: Trj<S>, end: S },
    /// `inr⟨I, e⟩`
    Div { tr: Trj<S>, closure: Closure<S> },
}

impl<S: Clone> Clone for HClassic<S> {
    fn clone(&self) -> Self {
        match self {
            HClassic::Conv { tr, end } => HClassic::Conv {
                tr: tr.clone(),
                end: end.clone(),
            },
            HClassic::Div { tr, closure } => HClassic::Div {
                tr: tr.clone(),
                closure: closure.clone(),
            },
        }
    }
}

impl<S: Val> HClassic<S> {
    /// `η(x) = inl⟨[0, 0], λt. x⟩`
    pub fn unit(x: S) -> Self {
        HClassic::Conv {
            tr: Trj::empty(),
            end: x,
        }
    }

    /// `e^0`, or `None` for `inr ε`.
    pub fn initial(&self) -> Option<S> {
        match self {
            HClassic::Conv { tr, end } => Some(tr.initial().unwrap_or_else(|| end.clone())),
            HClassic::Div { tr, closure } => tr.initial().or(match closure {
                Closure::Closed(b) => Some(b.clone()),
                Closure::Open => None,
            }),
        }
    }

    pub fn trajectory(&self) -> &Trj<S> {
        match self {
            HClassic::Conv { tr, .. } | HClassic::Div { tr, .. } => tr,
        }
    }
}

/// `θ : H_S S → H S`.
pub fn theta<S: Val>(m: &HElem<S, S>) -> Result<HClassic<S>, MonadError> {
    match m {
        HElem::Conv { tr, val } => Ok(HClassic::Conv {
            tr: tr.clone(),
            end: val.clone(),
        }),
        HElem::Div { tr, closure, .. } => Ok(HClassic::Div {
            tr: tr.clone(),
            closure: closure.clone(),
        }),
        HElem::Lazy(d) => Err(MonadError::Unforced(d.prefix.total())),
    }
}

/// `θ⁻¹`
pub fn theta_inv<S: Val>(m: &HClassic<S>) -> HElem<S, S> {
    match m {
        HClassic::Conv { tr, end } => HElem::Conv {
            tr: tr.clone(),
            val: end.clone(),
        },
        HClassic::Div { tr, closure } => HElem::div(tr.clone(), closure.clone()),
    }
}

/// Initial point of `f(s)`, failing on instant divergence.
fn head<S: Val, F: Fn(S) -> HClassic<S>>(f: &F, s: S) -> Option<S> {
    f(s).initial()
}

/// Kleisli extension of the classic hybrid monad.
///
/// `I'`, the largest prefix on which `f` does not instantly diverge, is found
/// segment by segment: a segment survives if `f` is fine at its start and at
/// interior probes, and is cut at its start if `f` fails there. A failure
/// first seen strictly inside a segment is reported as `UndetectableCut`.
pub fn classic_kleisli<S, F>(f: F, m: &HClassic<S>) -> Result<HClassic<S>, MonadError>
where
    S: Val,
    F: Fn(S) -> HClassic<S> + Send + Sync + 'static,
{
    let f = Arc::new(f);
    let tr = m.trajectory();
    // Map the trajectory through `t ↦ f(e^t)_ev^0` over I'.
    let mut mapped = Trj::empty();
    let mut start = 0.0;
    let mut whole = true;
    for seg in tr.segs() {
        let Some(h0) = head(&*f, seg.law.at(0.0)) else {
            whole = false;
            break;
        };
        match &seg.law {
            Law::Const(_) => mapped.push(Seg::constant(seg.dur, h0)),
            Law::Curve(_) => {
                for frac in CUT_PROBES {
                    if head(&*f, seg.law.at(frac * seg.dur)).is_none() {
                        return Err(MonadError::UndetectableCut(start + frac * seg.dur));
                    }
                }
                let g = f.clone();
                let fallback = h0.clone();
                let law = seg.law.map(Arc::new(move |s: S| g(s).initial().unwrap_or_else(|| fallback.clone())));
                mapped.push(Seg::new(seg.dur, law));
            }
        }
        start += seg.dur;
    }
    Ok(match m {
        HClassic::Conv { end, .. } if whole => match f(end.clone()) {
            HClassic::Conv { tr: t2, end: e2 } => HClassic::Conv {
                tr: mapped.concat(&t2),
                end: e2,
            },
            HClassic::Div {
                tr: t2,
                closure: Closure::Open,
            } if t2.is_empty() => HClassic::Div {
                tr: mapped,
                closure: Closure::Open,
            },
            HClassic::Div { tr: t2, closure } => HClassic::Div {
                tr: mapped.concat(&t2),
                closure,
            },
        },
        HClassic::Div {
            closure: Closure::Closed(b),
            ..
        } if whole => match head(&*f, b.clone()) {
            Some(hb) => HClassic::Div {
                tr: mapped,
                closure: Closure::Closed(hb),
            },
            None => HClassic::Div {
                tr: mapped,
                closure: Closure::Open,
            },
        },
        _ => HClassic::Div {
            tr: mapped,
            closure: Closure::Open,
        },
    })
}

/// Probe equality of complete elements: same shape, probe-equal
/// trajectories, approximately equal values and boundaries.
pub fn helem_eq<X, S>(a: &HElem<X, S>, b: &HElem<X, S>, seed: u64) -> bool
where
    X: Val + Approx,
    S: Val + Approx,
{
    match (a, b) {
        (HElem::Conv { tr: t1, val: v1 }, HElem::Conv { tr: t2, val: v2 }) => {
            probe_eq(t1, t2, seed) && v1.approx(v2, PROBE_TOL)
        }
        (
            HElem::Div {
                tr: t1, closure: c1, ..
            },
            HElem::Div {
                tr: t2, closure: c2, ..
            },
        ) => probe_eq(t1, t2, seed) && c1.approx(c2, PROBE_TOL),
        _ => false,
    }
}

/// Probe equality of classic elements.
pub fn classic_eq<S: Val + Approx>(a: &HClassic<S>, b: &HClassic<S>, seed: u64) -> bool {
    match (a, b) {
        (HClassic::Conv { tr: t1, end: e1 }, HClassic::Conv { tr: t2, end: e2 }) => {
            probe_eq(t1, t2, seed) && e1.approx(e2, PROBE_TOL)
        }
        (HClassic::Div { tr: t1, closure: c1 }, HClassic::Div { tr: t2, closure: c2 }) => {
            probe_eq(t1, t2, seed) && c1.approx(c2, PROBE_TOL)
        }
        _ => false,
    }
}

/// Compares two elements on `[0, horizon)`, forcing lazy ones as needed:
/// both must reach the same verdict at `horizon` and agree on the prefix.
pub fn observed_eq<X, S>(a: HElem<X, S>, b: HElem<X, S>, horizon: f64, seed: u64) -> bool
where
    X: Val + Approx,
    S: Val + Approx,
{
    let a = a.observe(horizon);
    let b = b.observe(horizon);
    if a.is_lazy() || b.is_lazy() {
        // Still running at `horizon` on one side: the other must still be
        // running too, and the two must agree before it.
        let (ta, tb) = (a.trajectory(), b.trajectory());
        if !ta.contains(horizon) || !tb.contains(horizon) {
            return false;
        }
        let (Ok(tx), Ok(ty)) = (ta.truncate(horizon), tb.truncate(horizon)) else {
            return false;
        };
        return probe_eq(&tx, &ty, seed);
    }
    helem_eq(&a, &b, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    type S = f64;

    fn steps(vals: &[(f64, f64)]) -> Trj<S> {
        Trj::from_segs(vals.iter().map(|(d, v)| Seg::constant(*d, *v)).collect())
    }

    fn conv(vals: &[(f64, f64)], x: f64) -> HElem<f64, S> {
        HElem::Conv { tr: steps(vals), val: x }
    }

    #[test]
    fn unit_laws() {
        let f = |x: f64| conv(&[(2.0, x)], x + 1.0);
        let left = kleisli(f, unit(3.0));
        assert!(helem_eq(&left, &f(3.0), 0));
        let m = conv(&[(1.0, 5.0), (0.5, 6.0)], 9.0);
        assert!(helem_eq(&kleisli(unit, m.clone()), &m, 0));
    }

    #[test]
    fn kleisli_concatenates() {
        let m = conv(&[(1.0, 1.0)], 7.0);
        let r = kleisli(|y: f64| conv(&[(2.0, 2.0)], y * 2.0), m);
        let HElem::Conv { tr, val } = &r else { panic!() };
        assert_eq!(tr.total(), 3.0);
        assert_eq!(*val, 14.0);
        assert_eq!(tr.at(0.5).unwrap(), 1.0);
        assert_eq!(tr.at(2.5).unwrap(), 2.0);
    }

    #[test]
    fn divergence_passes_through() {
        let m: HElem<f64, S> = HElem::div(steps(&[(1.0, 1.0)]), Closure::Open);
        let r = kleisli(|y: f64| conv(&[(2.0, 2.0)], y), m.clone());
        assert!(helem_eq(&r, &m, 0));
    }

    #[test]
    fn elgot_counts_to_three() {
        let f = |x: f64| -> HElem<Coprod<f64, f64>, S> {
            if x >= 3.0 {
                unit(Coprod::Inl(x))
            } else {
                HElem::Conv {
                    tr: steps(&[(1.0, x)]),
                    val: Coprod::Inr(x + 1.0),
                }
            }
        };
        let r = elgot(f, 0.0, &Fuel::new(100, None));
        let HElem::Conv { tr, val } = &r else { panic!("{r:?}") };
        assert_eq!(tr.total(), 3.0);
        assert_eq!(*val, 3.0);
        assert_eq!(tr.at(0.5).unwrap(), 0.0);
        assert_eq!(tr.at(1.5).unwrap(), 1.0);
        assert_eq!(tr.at(2.5).unwrap(), 2.0);
    }

    #[test]
    fn elgot_immediate_exit() {
        let r: HElem<f64, S> = elgot(|x: f64| unit(Coprod::Inl(x + 1.0)), 1.0, &Fuel::new(10, None));
        assert!(helem_eq(&r, &unit(2.0), 0));
    }

    #[test]
    fn elgot_instant_loop_is_instant_divergence() {
        let r: HElem<f64, S> = elgot(|x: f64| unit(Coprod::Inr(x)), 1.0, &Fuel::new(50, None));
        let HElem::Div {
            tr,
            closure,
            fuel_exhausted,
        } = &r
        else {
            panic!()
        };
        assert!(tr.is_empty());
        assert_eq!(*closure, Closure::Open);
        assert!(fuel_exhausted);
    }

    #[test]
    fn elgot_is_lazy_and_resumable() {
        let calls = Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let c = calls.clone();
        let f = Arc::new(move |x: f64, _h: Option<f64>| -> HElem<Coprod<f64, f64>, S> {
            c.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            HElem::Conv {
                tr: steps(&[(1.0, x)]),
                val: Coprod::Inr(x + 1.0),
            }
        });
        let fuel = Fuel::new(1000, None);
        let r = elgot_within(f, 0.0, Some(0.5), &fuel);
        assert_eq!(calls.load(std::sync::atomic::Ordering::Relaxed), 1);
        let HElem::Lazy(d) = r else { panic!() };
        let r2 = d.force(10.5);
        assert_eq!(calls.load(std::sync::atomic::Ordering::Relaxed), 11);
        assert_eq!(r2.trajectory().at(10.2).unwrap(), 10.0);
        // Asking again for a smaller horizon does no more work.
        let _ = d.force(3.0);
        assert_eq!(calls.load(std::sync::atomic::Ordering::Relaxed), 11);
    }

    #[test]
    fn stall_after_progress_is_closed() {
        let f = |x: f64| -> HElem<Coprod<f64, f64>, S> {
            if x < 2.0 {
                HElem::Conv {
                    tr: steps(&[(1.0, x)]),
                    val: Coprod::Inr(x + 1.0),
                }
            } else {
                unit(Coprod::Inr(x))
            }
        };
        let r = elgot(f, 0.0, &Fuel::new(20, None));
        let HElem::Div { tr, closure, .. } = r else { panic!() };
        assert_eq!(tr.total(), 2.0);
        assert_eq!(closure, Closure::Closed(1.0));
    }

    #[test]
    fn iota_cases() {
        assert_eq!(iota(&unit::<f64, S>(4.0)), IotaResult::InlVal(4.0));
        assert_eq!(iota(&conv(&[(1.0, 2.0)], 4.0)), IotaResult::InrState(2.0));
        assert_eq!(iota(&HElem::<f64, S>::instant_divergence()), IotaResult::Bottom);
    }

    #[test]
    fn tau_cuts_at_right_injection() {
        let tr: Trj<Coprod<f64, f64>> = Trj::from_segs(vec![
            Seg::constant(1.0, Coprod::Inl(1.0)),
            Seg::constant(0.5, Coprod::Inl(2.0)),
            Seg::constant(1.0, Coprod::Inr(9.0)),
        ]);
        let m = HElem::Conv { tr, val: 0.0 };
        let HElem::Div { tr, closure, .. } = tau(&m).unwrap() else { panic!() };
        assert_eq!(tr.total(), 1.5);
        assert_eq!(closure, Closure::Open);
        let all_left: HElem<f64, Coprod<f64, f64>> = HElem::Conv {
            tr: Trj::single(Seg::constant(1.0, Coprod::Inl(1.0))),
            val: 3.0,
        };
        assert!(helem_eq(&tau(&all_left).unwrap(), &conv(&[(1.0, 1.0)], 3.0), 0));
    }

    #[test]
    fn theta_round_trip_and_unit() {
        let m = conv(&[(2.0, 1.0)], 5.0);
        assert!(helem_eq(&theta_inv(&theta(&m).unwrap()), &m, 0));
        let HClassic::Conv { tr, end } = theta(&unit::<f64, S>(3.0)).unwrap() else {
            panic!()
        };
        assert!(tr.is_empty());
        assert_eq!(end, 3.0);
    }

    #[test]
    fn classic_instant_divergence_cuts_everything() {
        let m = theta(&conv(&[(2.0, 1.0)], 5.0)).unwrap();
        let r = classic_kleisli(|_s: f64| theta(&HElem::instant_divergence()).unwrap(), &m).unwrap();
        let HClassic::Div { tr, closure } = r else { panic!() };
        assert!(tr.is_empty());
        assert_eq!(closure, Closure::Open);
    }
}

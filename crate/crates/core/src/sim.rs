//! The period-by-period driver and learning-curve aggregation.
//!
//! Each period draws a community size, then the shared signal (or one
//! signal per agent), then the observation, then the community's action.
//! Replication `i` draws from a ChaCha stream selected by `i` under the
//! master seed, so a replication is the same whether run alone or in a
//! batch. Replications are folded in fixed chunks and chunk results are
//! merged in index order, which keeps curves bit-identical across worker
//! counts.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::belief::{BeliefError, ChainTable, Lattice};
use crate::bit::{Action, Bit, State};
use crate::observation::{ObservationError, ObservationScheme, SchemeKind};
use crate::payoff::{PayoffError, PayoffMode, PayoffSpec};
use crate::signal::{MlrpReport, SignalError, SignalStructure};
use crate::strategy::{Decision, Prescription, Response, StrategyError, StrategyKind, StrategyProfile};

/// Two-sided 95% normal quantile used for Wilson intervals.
pub const WILSON_Z: f64 = 1.959964;

pub const DEFAULT_HERD_WINDOW: u32 = 50;

const CHUNK: u64 = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{0}")]
    Signal(#[from] SignalError),
    #[error("{0}")]
    Payoff(#[from] PayoffError),
    #[error("{0}")]
    Observation(#[from] ObservationError),
    #[error("{0}")]
    Strategy(#[from] StrategyError),
    #[error("{0}")]
    Belief(#[from] BeliefError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("payoff assumptions fail: {0}")]
    Assumptions(String),
    #[error("unsupported scenario: {0}")]
    Unsupported(String),
    #[error("size distributions are not ordered by first-order stochastic dominance: {0}")]
    NotDominating(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Finite-support distribution `G` over community sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeDistribution {
    entries: Vec<(u32, f64)>,
}

impl SizeDistribution {
    pub fn new(mut entries: Vec<(u32, f64)>) -> Result<Self, SimError> {
        if entries.is_empty() {
            return Err(SimError::Invalid("size distribution is empty".into()));
        }
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
        for (q, p) in entries {
            if q == 0 {
                return Err(SimError::Invalid("community sizes must be >= 1".into()));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(SimError::Invalid(format!("size {q} has invalid probability {p}")));
            }
            match merged.last_mut() {
                Some(last) if last.0 == q => last.1 += p,
                _ => merged.push((q, p)),
            }
        }
        let total: f64 = merged.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SimError::Invalid(format!("size probabilities sum to {total}, expected 1")));
        }
        merged.retain(|e| e.1 > 0.0);
        Ok(Self { entries: merged })
    }

    pub fn degenerate(q: u32) -> Self {
        Self { entries: vec![(q.max(1), 1.0)] }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn support(&self) -> BTreeSet<u32> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn contains(&self, q: u32) -> bool {
        self.entries.iter().any(|e| e.0 == q)
    }

    pub fn max_size(&self) -> u32 {
        self.entries.last().map_or(0, |e| e.0)
    }

    pub fn prob(&self, q: u32) -> f64 {
        self.entries.iter().find(|e| e.0 == q).map_or(0.0, |e| e.1)
    }

    pub fn cdf(&self, x: u32) -> f64 {
        self.entries.iter().filter(|e| e.0 <= x).map(|e| e.1).sum()
    }

    /// Maps a uniform draw to a size.
    pub fn from_uniform(&self, u: f64) -> u32 {
        let mut acc = 0.0;
        for &(q, p) in &self.entries {
            acc += p;
            if u < acc {
                return q;
            }
        }
        self.max_size()
    }

    /// Whether `self` first-order stochastically dominates `other`.
    pub fn dominates(&self, other: &SizeDistribution) -> bool {
        let points: BTreeSet<u32> = self.support().union(&other.support()).copied().collect();
        points.iter().all(|&x| self.cdf(x) <= other.cdf(x) + 1e-12)
    }
}

/// Everything needed to simulate one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub signal: SignalStructure,
    pub payoff: PayoffSpec,
    pub observation: ObservationScheme,
    pub strategy: StrategyKind,
    pub sizes: SizeDistribution,
    pub horizon: u32,
    pub replications: u64,
    pub seed: u64,
    pub herd_window: u32,
    /// Fixes the state instead of drawing it with probability one half.
    pub forced_state: Option<State>,
}

impl ScenarioSpec {
    /// Structural and assumption checks; everything that can be rejected
    /// before simulating.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::Invalid("horizon must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(SimError::Invalid("replications must be >= 1".into()));
        }
        if self.herd_window == 0 {
            return Err(SimError::Invalid("herd window must be >= 1".into()));
        }
        self.observation.validate()?;
        self.payoff.check_parameters()?;
        let report = self.payoff.validate_assumptions();
        if !report.passed() {
            let names: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(SimError::Assumptions(names.join("; ")));
        }
        if self.sizes.max_size() > self.payoff.max_defined_m() {
            return Err(SimError::Invalid("community sizes exceed the payoff table".into()));
        }
        for q in self.sizes.support() {
            if let MlrpReport::Fail { witness: (lo, hi) } = self.signal.check_mlrp(q, 257)? {
                return Err(SimError::Signal(SignalError::MlrpViolation { lo, hi }));
            }
        }
        if self.payoff.mode == PayoffMode::Separation && !matches!(self.strategy, StrategyKind::SeparationSplit | StrategyKind::Constant(_)) {
            return Err(SimError::Invalid("separation payoffs need the separation_split strategy".into()));
        }
        Ok(())
    }
}

/// Which predecessors a period observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Neighborhood {
    Empty,
    Single(u32),
    /// Communities `first..=last`.
    Range { first: u32, last: u32 },
    Indices(Vec<u32>),
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        match self {
            Neighborhood::Empty => 0,
            Neighborhood::Single(_) => 1,
            Neighborhood::Range { first, last } => (last - first + 1) as usize,
            Neighborhood::Indices(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(first: u32, last: u32) -> Self {
        if last == 0 || first > last {
            Neighborhood::Empty
        } else if first == last {
            Neighborhood::Single(first)
        } else {
            Neighborhood::Range { first, last }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub t: u32,
    pub size: u32,
    /// The shared signal; NaN when every agent draws its own.
    pub signal: f64,
    /// Agents choosing action 1.
    pub ones: u32,
    pub observed: bool,
    pub neighborhood: Neighborhood,
    /// The action the observation alone recommends, when something was
    /// observed and beliefs are tracked.
    pub hat_action: Option<Action>,
    pub signal_used: bool,
    /// Fraction of the community matching the state.
    pub correct: f64,
}

impl PeriodRecord {
    /// The common action if the community acted unanimously.
    pub fn unanimous_action(&self) -> Option<Action> {
        if self.ones == self.size {
            Some(Bit::One)
        } else if self.ones == 0 {
            Some(Bit::Zero)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub replication: u64,
    pub theta: State,
    pub periods: Vec<PeriodRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Herd {
    pub start: u32,
    pub action: Action,
    pub correct: bool,
}

/// The trailing ignore-signal run: every period from `start` to the end is
/// unanimous on the same action without using the signal. Declared only if
/// the run covers at least `window` periods.
pub fn detect_herd(trace: &SimulationTrace, window: u32) -> Option<Herd> {
    herd_in(&trace.periods, trace.theta, window)
}

fn herd_in(periods: &[PeriodRecord], theta: State, window: u32) -> Option<Herd> {
    let last = periods.last()?;
    let action = last.unanimous_action()?;
    let mut start = None;
    for p in periods.iter().rev() {
        if p.signal_used || p.unanimous_action() != Some(action) {
            break;
        }
        start = Some(p.t);
    }
    let start = start?;
    let len = last.t - start + 1;
    (len >= window.max(1)).then_some(Herd {
        start,
        action,
        correct: action == theta,
    })
}

/// A scenario prepared for simulation: validated, with its profile solved
/// and belief lattice built.
#[derive(Debug, Clone)]
pub struct Engine {
    spec: ScenarioSpec,
    profile: StrategyProfile,
    lattice: Lattice,
}

impl Engine {
    pub fn new(spec: ScenarioSpec) -> Result<Self, SimError> {
        spec.validate()?;
        let support = spec.sizes.support();
        let profile = StrategyProfile::new(spec.strategy.clone(), &spec.signal, &spec.payoff, &spec.observation, &support)?;
        let lattice = build_lattice(&spec, &profile)?;
        Ok(Self { spec, profile, lattice })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn profile(&self) -> &StrategyProfile {
        &self.profile
    }

    pub(crate) fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Name of the belief lattice: `complete`, `line`, `star` or `untracked`.
    pub fn lattice_name(&self) -> &'static str {
        match &self.lattice {
            Lattice::Complete => "complete",
            Lattice::Chain(t) if t.source(5) == 1 => "star",
            Lattice::Chain(_) => "line",
            Lattice::Blind => "untracked",
        }
    }

    fn rng_for(&self, rep: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(rep);
        rng
    }

    /// Replication `rep` of the scenario.
    pub fn run_trace(&self, rep: u64) -> SimulationTrace {
        let mut rng = self.rng_for(rep);
        let theta = self.draw_state(&mut rng);
        let mut periods = Vec::with_capacity(self.spec.horizon as usize);
        self.simulate(theta, &mut rng, &BTreeMap::new(), self.spec.horizon, &mut periods);
        SimulationTrace {
            replication: rep,
            theta,
            periods,
        }
    }

    fn draw_state<R: Rng>(&self, rng: &mut R) -> State {
        let u: f64 = rng.gen();
        self.spec.forced_state.unwrap_or(Bit::from_bool(u < 0.5))
    }

    fn neighborhood_for(&self, t: u32, decision: &Decision) -> Neighborhood {
        match &self.spec.observation.kind {
            SchemeKind::Star => Neighborhood::range(1, 1.min(t - 1)),
            SchemeKind::Line => Neighborhood::range(t - 1, t - 1),
            SchemeKind::Complete => Neighborhood::range(1, t - 1),
            SchemeKind::CustomStochastic(_) => Neighborhood::Empty,
            SchemeKind::Endogenous { capacity, .. } => {
                let k = capacity.at(t);
                match (&self.spec.strategy, &decision.observe) {
                    (StrategyKind::DelegateObserver { prescription: Prescription::Predecessor, .. }, _) => {
                        Neighborhood::range(t - 1, t - 1)
                    }
                    _ => Neighborhood::range(t.saturating_sub(k).max(1), t - 1),
                }
            }
        }
    }

    /// Runs periods `1..=upto` under state `theta`, appending to `out`.
    /// `forced` pins the size of selected periods; a uniform is consumed
    /// for the size either way so streams stay aligned across states.
    pub(crate) fn simulate<R: Rng>(
        &self,
        theta: State,
        rng: &mut R,
        forced: &BTreeMap<u32, u32>,
        upto: u32,
        out: &mut Vec<PeriodRecord>,
    ) {
        let ss = &self.spec.signal;
        let mut public_lr = 0.0f64;
        let mut owned: Decision;
        for t in 1..=upto {
            let u: f64 = rng.gen();
            let q = forced.get(&t).copied().unwrap_or_else(|| self.spec.sizes.from_uniform(u));
            let mut neighborhood_override = None;
            let (public, decision): (Option<f64>, &Decision) = match &self.lattice {
                Lattice::Complete => {
                    let public = (t >= 2).then_some(public_lr);
                    owned = self.profile.decide(q, public).expect("size in support");
                    (public, &owned)
                }
                Lattice::Chain(table) => {
                    let qi = table.size_index(q).expect("size in support");
                    if t == 1 {
                        (None, table.first(qi))
                    } else {
                        let src = &out[table.source(t) as usize - 1];
                        let sqi = table.size_index(src.size).expect("size in support");
                        let public = table.public(src.t, sqi, src.ones);
                        match (public, table.decision(t, qi, sqi, src.ones)) {
                            (Some(l), Some(d)) if t <= table.horizon() => (Some(l), d),
                            (l, _) => {
                                owned = self.profile.decide(q, Some(l.unwrap_or(0.0))).expect("size in support");
                                (Some(l.unwrap_or(0.0)), &owned)
                            }
                        }
                    }
                }
                Lattice::Blind => {
                    let b = self
                        .spec
                        .observation
                        .realize_neighborhood(t, rng)
                        .unwrap_or_default();
                    neighborhood_override = Some(if b.is_empty() { Neighborhood::Empty } else { Neighborhood::Indices(b) });
                    owned = self.profile.decide(q, None).expect("size in support");
                    (None, &owned)
                }
            };
            let (signal, ones) = match &decision.response {
                Response::Independent { cut } => {
                    let mut ones = 0;
                    for _ in 0..q {
                        let s = ss.sample_from_uniform(q, theta, rng.gen());
                        if s > *cut {
                            ones += 1;
                        }
                    }
                    (f64::NAN, ones)
                }
                _ => {
                    let s = ss.sample_from_uniform(q, theta, rng.gen());
                    (s, decision.ones_for_signal(q, s))
                }
            };
            let observed = match &neighborhood_override {
                Some(n) => !n.is_empty(),
                None => {
                    if self.spec.observation.is_endogenous() {
                        public.is_some() && decision.observes(signal)
                    } else {
                        public.is_some()
                    }
                }
            };
            let neighborhood = match neighborhood_override {
                Some(n) => n,
                None if observed => self.neighborhood_for(t, decision),
                None => Neighborhood::Empty,
            };
            let hat_action = match (observed, public) {
                (true, Some(l)) if !matches!(self.spec.strategy, StrategyKind::Constant(_)) => Some(Bit::from_bool(l > 0.0)),
                _ => None,
            };
            let frac = ones as f64 / q as f64;
            let correct = if theta.is_one() { frac } else { 1.0 - frac };
            if let Lattice::Complete = self.lattice {
                let p1 = decision.outcome_prob(ss, q, Bit::One, ones);
                let p0 = decision.outcome_prob(ss, q, Bit::Zero, ones);
                public_lr += p1.max(f64::MIN_POSITIVE).ln() - p0.max(f64::MIN_POSITIVE).ln();
            }
            out.push(PeriodRecord {
                t,
                size: q,
                signal,
                ones,
                observed,
                neighborhood,
                hat_action,
                signal_used: decision.signal_used(),
                correct,
            });
        }
    }

    /// Learning curve over the spec's replications.
    pub fn estimate_curve(&self) -> LearningCurve {
        self.estimate(self.spec.replications)
    }

    /// Learning curve over `replications` replications.
    pub fn estimate(&self, replications: u64) -> LearningCurve {
        let horizon = self.spec.horizon as usize;
        let chunks = replications.div_ceil(CHUNK);
        let parts: Vec<Accumulator> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = Accumulator::new(horizon);
                let mut buf = Vec::with_capacity(horizon);
                for rep in c * CHUNK..((c + 1) * CHUNK).min(replications) {
                    let mut rng = self.rng_for(rep);
                    let theta = self.draw_state(&mut rng);
                    buf.clear();
                    self.simulate(theta, &mut rng, &BTreeMap::new(), self.spec.horizon, &mut buf);
                    acc.add(theta, &buf, self.spec.herd_window);
                }
                acc
            })
            .collect();
        let mut total = Accumulator::new(horizon);
        for p in &parts {
            total.merge(p);
        }
        total.finish(self.spec.herd_window, self.spec.seed)
    }

    /// [`Engine::estimate_curve`] on a dedicated pool of `threads` workers.
    pub fn estimate_curve_threads(&self, threads: usize) -> Result<LearningCurve, SimError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| SimError::Pool(e.to_string()))?;
        Ok(pool.install(|| self.estimate_curve()))
    }

    /// Closed-form limit of `p_correct` as `E_G[...]` when the profile has
    /// one; see [`StrategyProfile::limit_accuracy`].
    pub fn analytic_limit(&self) -> Option<f64> {
        self.spec
            .sizes
            .entries()
            .iter()
            .map(|&(q, p)| self.profile.limit_accuracy(q).map(|a| p * a))
            .sum()
    }
}

fn build_lattice(spec: &ScenarioSpec, profile: &StrategyProfile) -> Result<Lattice, SimError> {
    let sizes = spec.sizes.entries();
    let chain = |star| -> Result<Lattice, SimError> { Ok(Lattice::Chain(ChainTable::build(profile, sizes, spec.horizon, star)?)) };
    match &spec.observation.kind {
        SchemeKind::Complete => Ok(Lattice::Complete),
        SchemeKind::Line => chain(false),
        SchemeKind::Star => chain(true),
        SchemeKind::CustomStochastic(_) => {
            if matches!(spec.strategy, StrategyKind::Constant(_)) {
                Ok(Lattice::Blind)
            } else {
                Err(SimError::Unsupported(
                    "belief-driven profiles need a complete, line or star scheme; stochastic neighborhoods support only the constant profile".into(),
                ))
            }
        }
        SchemeKind::Endogenous { capacity, .. } => {
            if let StrategyKind::DelegateObserver {
                prescription: Prescription::Predecessor,
                ..
            } = spec.strategy
            {
                return chain(false);
            }
            if matches!(spec.strategy, StrategyKind::Constant(_)) {
                return Ok(Lattice::Complete);
            }
            let full = (2..=spec.horizon).all(|t| capacity.at(t) >= t - 1);
            let single = (2..=spec.horizon).all(|t| capacity.at(t) == 1);
            if full {
                Ok(Lattice::Complete)
            } else if single {
                chain(false)
            } else {
                Err(SimError::Unsupported(format!(
                    "capacity {capacity} observes part of the history; exact beliefs need K(t) >= t-1 or K(t) = 1"
                )))
            }
        }
    }
}

/// Wilson score interval for a proportion.
pub fn wilson_interval(p: f64, n: f64, z: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).max(0.0).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Raw per-period sums behind a [`CurveRow`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeriodStats {
    pub correct: f64,
    pub correct_observed: f64,
    pub observed: u64,
    pub hat: u64,
    pub hat_correct: u64,
    pub correct_by_state: [f64; 2],
    /// Replications whose herd began exactly at this period.
    pub herd_starts: u64,
}

#[derive(Debug, Clone)]
struct Accumulator {
    stats: Vec<PeriodStats>,
    reps: u64,
    by_state: [u64; 2],
    herds: u64,
    wrong_herds: u64,
}

impl Accumulator {
    fn new(horizon: usize) -> Self {
        Self {
            stats: vec![PeriodStats::default(); horizon],
            reps: 0,
            by_state: [0; 2],
            herds: 0,
            wrong_herds: 0,
        }
    }

    fn add(&mut self, theta: State, periods: &[PeriodRecord], window: u32) {
        self.reps += 1;
        self.by_state[theta.index()] += 1;
        for (st, p) in self.stats.iter_mut().zip(periods) {
            st.correct += p.correct;
            st.correct_by_state[theta.index()] += p.correct;
            if p.observed {
                st.observed += 1;
                st.correct_observed += p.correct;
            }
            if let Some(a) = p.hat_action {
                st.hat += 1;
                if a == theta {
                    st.hat_correct += 1;
                }
            }
        }
        if let Some(h) = herd_in(periods, theta, window) {
            self.herds += 1;
            if !h.correct {
                self.wrong_herds += 1;
            }
            self.stats[h.start as usize - 1].herd_starts += 1;
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.stats.iter_mut().zip(&other.stats) {
            a.correct += b.correct;
            a.correct_observed += b.correct_observed;
            a.observed += b.observed;
            a.hat += b.hat;
            a.hat_correct += b.hat_correct;
            a.correct_by_state[0] += b.correct_by_state[0];
            a.correct_by_state[1] += b.correct_by_state[1];
            a.herd_starts += b.herd_starts;
        }
        self.reps += other.reps;
        self.by_state[0] += other.by_state[0];
        self.by_state[1] += other.by_state[1];
        self.herds += other.herds;
        self.wrong_herds += other.wrong_herds;
    }

    fn finish(self, window: u32, seed: u64) -> LearningCurve {
        let n = self.reps as f64;
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::NAN };
        let mut herded = 0u64;
        let rows = self
            .stats
            .iter()
            .enumerate()
            .map(|(i, st)| {
                herded += st.herd_starts;
                let p = ratio(st.correct, n);
                let (lo, hi) = wilson_interval(p, n, WILSON_Z);
                CurveRow {
                    t: i as u32 + 1,
                    reps: self.reps,
                    p_correct: p,
                    ci_low: lo,
                    ci_high: hi,
                    p_truthtell_given_obs: ratio(st.hat_correct as f64, st.hat as f64),
                    p_observed: ratio(st.observed as f64, n),
                    herd_frequency: ratio(herded as f64, n),
                    acc_state0: ratio(st.correct_by_state[0], self.by_state[0] as f64),
                    acc_state1: ratio(st.correct_by_state[1], self.by_state[1] as f64),
                }
            })
            .collect();
        LearningCurve {
            rows,
            stats: self.stats,
            summary: CurveSummary {
                replications: self.reps,
                state_counts: self.by_state,
                herds: self.herds,
                wrong_herds: self.wrong_herds,
                herd_window: window,
                seed,
            },
        }
    }
}

/// One output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub t: u32,
    pub reps: u64,
    pub p_correct: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_truthtell_given_obs: f64,
    pub p_observed: f64,
    pub herd_frequency: f64,
    pub acc_state0: f64,
    pub acc_state1: f64,
}

impl CurveRow {
    /// The float columns in CSV order, after `t` and `reps`.
    pub fn values(&self) -> [f64; 8] {
        [
            self.p_correct,
            self.ci_low,
            self.ci_high,
            self.p_truthtell_given_obs,
            self.p_observed,
            self.herd_frequency,
            self.acc_state0,
            self.acc_state1,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSummary {
    pub replications: u64,
    pub state_counts: [u64; 2],
    pub herds: u64,
    pub wrong_herds: u64,
    pub herd_window: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
    pub stats: Vec<PeriodStats>,
    pub summary: CurveSummary,
}

impl LearningCurve {
    pub fn row(&self, t: u32) -> &CurveRow {
        &self.rows[t as usize - 1]
    }

    /// Equality down to the bit pattern of every value, NaN included.
    pub fn bit_identical(&self, other: &LearningCurve) -> bool {
        self.summary == other.summary
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.t == b.t && a.reps == b.reps && a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    pub fn terminal(&self) -> &CurveRow {
        self.rows.last().expect("horizon >= 1")
    }

    /// Fraction of replications ending in a herd on the wrong action, with
    /// its Wilson interval.
    pub fn wrong_herd_frequency(&self) -> (f64, f64, f64) {
        let n = self.summary.replications as f64;
        let p = self.summary.wrong_herds as f64 / n;
        let (lo, hi) = wilson_interval(p, n, WILSON_Z);
        (p, lo, hi)
    }

    /// `p_correct - (p_observed * correct|observed + (1 - p_observed) *
    /// correct|unobserved)` at period `t`, from the same sums.
    pub fn conservation_residual(&self, t: u32) -> f64 {
        let st = &self.stats[t as usize - 1];
        let n = self.summary.replications as f64;
        let no = st.observed as f64;
        let nu = n - no;
        let obs_part = if no > 0.0 { (no / n) * (st.correct_observed / no) } else { 0.0 };
        let unobs_part = if nu > 0.0 { (nu / n) * ((st.correct - st.correct_observed) / nu) } else { 0.0 };
        self.rows[t as usize - 1].p_correct - (obs_part + unobs_part)
    }
}

/// Replication `rep` of `spec`.
pub fn run_trace(spec: &ScenarioSpec, rep: u64) -> Result<SimulationTrace, SimError> {
    Ok(Engine::new(spec.clone())?.run_trace(rep))
}

/// Learning curve of `spec` over its replications and seed.
pub fn estimate_curve(spec: &ScenarioSpec) -> Result<LearningCurve, SimError> {
    Ok(Engine::new(spec.clone())?.estimate_curve())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalEstimate {
    pub p_correct: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub analytic: Option<f64>,
}

impl TerminalEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FosdComparison {
    pub low: TerminalEstimate,
    pub high: TerminalEstimate,
}

impl FosdComparison {
    /// `high` exceeds `low` by more than the two half-widths combined.
    pub fn separated(&self) -> bool {
        self.high.p_correct - self.low.p_correct > self.low.half_width() + self.high.half_width()
    }
}

/// Runs `spec` under `g_low` and `g_high`, which must be ordered by
/// first-order stochastic dominance, and reports terminal accuracies.
pub fn compare_fosd(spec: &ScenarioSpec, g_low: &SizeDistribution, g_high: &SizeDistribution) -> Result<FosdComparison, SimError> {
    if !g_high.dominates(g_low) {
        return Err(SimError::NotDominating(format!("{:?} does not dominate {:?}", g_high.entries(), g_low.entries())));
    }
    let run = |g: &SizeDistribution| -> Result<TerminalEstimate, SimError> {
        let mut s = spec.clone();
        s.sizes = g.clone();
        let engine = Engine::new(s)?;
        let curve = engine.estimate_curve();
        let row = curve.terminal();
        Ok(TerminalEstimate {
            p_correct: row.p_correct,
            ci_low: row.ci_low,
            ci_high: row.ci_high,
            analytic: engine.analytic_limit(),
        })
    };
    Ok(FosdComparison {
        low: run(g_low)?,
        high: run(g_high)?,
    })
}

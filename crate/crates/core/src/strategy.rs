//! Decision rules for a community and the brute-force equilibrium oracles.
//!
//! A community of size `Q` that shares one signal acts through a
//! [`Decision`]: the signal space is cut into intervals, each mapped to a
//! number of agents choosing action 1. Unanimous rules have a single cut;
//! agents act 1 iff `s > cut`. Under unshared signals every agent applies
//! the same cut to its own draw.
//!
//! All ties break to action 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::Signed;
use thiserror::Error;

use crate::belief::{belief_step_bounds, logistic, BeliefError, Posterior};
use crate::bit::{Action, Bit, State};
use crate::observation::{CapacitySchedule, ObservationScheme, SchemeKind};
use crate::payoff::{exact, PayoffError, PayoffMode, PayoffSpec, Violation};
use crate::root::bisect;
use crate::signal::SignalStructure;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("{0}")]
    Payoff(#[from] PayoffError),
    #[error("{0}")]
    Belief(#[from] BeliefError),
    #[error("no interior cutoff: {0}")]
    NoInteriorCutoff(String),
    #[error("operation requires {expected} payoffs")]
    WrongMode { expected: PayoffMode },
    #[error("payoff assumptions fail, outside the unanimity result's scope: {0}")]
    OutOfScope(String),
    #[error("strategy {profile} is incompatible with observation scheme {scheme}")]
    Incompatible { profile: &'static str, scheme: &'static str },
    #[error("community size {0} is outside the size distribution's support")]
    UnknownSize(u32),
    #[error("invalid strategy parameter: {0}")]
    InvalidParameter(String),
    #[error("first-order stochastic dominance fails: {0}")]
    NotDominating(String),
}

/// The neighborhood a delegate is told to observe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prescription {
    /// The previous community's delegate.
    Predecessor,
    /// The `K(t)` most recent communities.
    RecentK,
}

/// How a delegate's community acts when the prescription was followed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OnPathRule {
    TruthSeeking,
    Cutoff { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategyKind {
    /// Every agent takes the action most likely to match the state.
    TruthSeeking,
    /// Act on the signal beyond the `epsilon`-tail cutoffs, otherwise follow
    /// the observation. Sizes below the conformity threshold fall back to
    /// truth-seeking.
    CutoffCoordination { epsilon: f64 },
    DelegateObserver { prescription: Prescription, on_path: OnPathRule, punish: bool },
    /// Costly observation from period 2 on when the signal lies strictly
    /// between the limit cutoffs of the community's size; truth-seeking
    /// actions.
    EndogenousCutoff,
    /// Separation payoffs: the smallest equilibrium count on the more likely
    /// action.
    SeparationSplit,
    /// Unshared per-agent signals with a symmetric cutoff fixed point.
    PrivateSignalSymmetric { iterations: u32 },
    /// Everyone always plays the given action; a diagnostic baseline.
    Constant(Action),
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::TruthSeeking => "truth_seeking",
            StrategyKind::CutoffCoordination { .. } => "cutoff",
            StrategyKind::DelegateObserver { .. } => "delegate",
            StrategyKind::EndogenousCutoff => "endogenous_cutoff",
            StrategyKind::SeparationSplit => "separation_split",
            StrategyKind::PrivateSignalSymmetric { .. } => "private_signal",
            StrategyKind::Constant(_) => "constant",
        }
    }

    fn needs_endogenous(&self) -> Option<bool> {
        match self {
            StrategyKind::DelegateObserver { .. } | StrategyKind::EndogenousCutoff => Some(true),
            StrategyKind::Constant(_) => None,
            _ => Some(false),
        }
    }
}

/// Which outcomes a shared signal produces.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    /// All agents act 1 iff `s > cut`.
    Unanimous { cut: f64 },
    /// `ones[i]` agents act 1 when `s` lies in `(cuts[i-1], cuts[i]]`, with
    /// `cuts[-1] = -1` and `cuts[len] = 1`.
    Ladder { cuts: Vec<f64>, ones: Vec<u32> },
    /// Every agent draws its own signal and acts 1 iff it exceeds `cut`.
    Independent { cut: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObserveRule {
    Always,
    Never,
    /// Observe iff `lo < s < hi`.
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub response: Response,
    pub observe: ObserveRule,
}

fn interior(c: f64) -> bool {
    c > -1.0 && c < 1.0
}

/// `P(X = k)` for `X ~ Binomial(n, p)`, `k = 0..=n`.
pub(crate) fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let n = n as usize;
    let mut out = vec![0.0; n + 1];
    if p <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p >= 1.0 {
        out[n] = 1.0;
        return out;
    }
    // Recurrence in log space keeps large n stable.
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_c = 0.0f64;
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            log_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        *slot = (log_c + k as f64 * lp + (n - k) as f64 * lq).exp();
    }
    out
}

impl Decision {
    pub fn unanimous(cut: f64, observe: ObserveRule) -> Self {
        Self {
            response: Response::Unanimous { cut },
            observe,
        }
    }

    /// Whether some realization of the signal changes the outcome.
    pub fn signal_used(&self) -> bool {
        match &self.response {
            Response::Unanimous { cut } | Response::Independent { cut } => interior(*cut),
            Response::Ladder { cuts, .. } => cuts.iter().any(|&c| interior(c)),
        }
    }

    /// Number of agents choosing 1 for a shared signal `s`. Not defined for
    /// independent signals.
    pub fn ones_for_signal(&self, q: u32, s: f64) -> u32 {
        match &self.response {
            Response::Unanimous { cut } => {
                if s > *cut {
                    q
                } else {
                    0
                }
            }
            Response::Ladder { cuts, ones } => {
                let i = cuts.iter().take_while(|&&c| s > c).count();
                ones[i]
            }
            Response::Independent { .. } => panic!("independent signals have no shared outcome"),
        }
    }

    /// `P(ones agents choose 1 | theta)`.
    pub fn outcome_prob(&self, ss: &SignalStructure, q: u32, theta: State, ones: u32) -> f64 {
        match &self.response {
            Response::Unanimous { cut } => {
                let up = 1.0 - ss.cdf(q, theta, *cut);
                match ones {
                    k if k == q => up,
                    0 => 1.0 - up,
                    _ => 0.0,
                }
            }
            Response::Ladder { cuts, ones: counts } => {
                let mut total = 0.0;
                let mut lo = 0.0;
                for (i, &k) in counts.iter().enumerate() {
                    let hi = if i < cuts.len() { ss.cdf(q, theta, cuts[i]) } else { 1.0 };
                    if k == ones {
                        total += (hi - lo).max(0.0);
                    }
                    lo = hi;
                }
                total
            }
            Response::Independent { cut } => {
                let p = 1.0 - ss.cdf(q, theta, *cut);
                binomial_pmf(q, p)[ones as usize]
            }
        }
    }

    /// Full outcome distribution indexed by the number of agents on 1.
    pub fn outcome_distribution(&self, ss: &SignalStructure, q: u32, theta: State) -> Vec<f64> {
        match &self.response {
            Response::Independent { cut } => binomial_pmf(q, 1.0 - ss.cdf(q, theta, *cut)),
            _ => (0..=q).map(|k| self.outcome_prob(ss, q, theta, k)).collect(),
        }
    }

    pub fn observes(&self, s: f64) -> bool {
        match self.observe {
            ObserveRule::Always => true,
            ObserveRule::Never => false,
            ObserveRule::Interval { lo, hi } => s > lo && s < hi,
        }
    }

    pub fn observe_prob(&self, ss: &SignalStructure, q: u32, theta: State) -> f64 {
        match self.observe {
            ObserveRule::Always => 1.0,
            ObserveRule::Never => 0.0,
            ObserveRule::Interval { lo, hi } => (ss.cdf(q, theta, hi) - ss.cdf(q, theta, lo)).max(0.0),
        }
    }
}

/// 1 iff the probability of state 1 exceeds one half.
pub fn truth_seeking_action(posterior: &Posterior) -> Action {
    Bit::from_bool(posterior.prob_state1 > 0.5)
}

/// The signal above which a community with public log likelihood ratio
/// `log_lr` is more confident in state 1 than in state 0.
pub fn truth_seeking_cut(ss: &SignalStructure, q: u32, log_lr: f64) -> f64 {
    ss.signal_for_log_lr(q, -log_lr)
}

/// The cutoff profile's action: the signal decides beyond the cutoffs
/// `s0(epsilon)` and `s1(epsilon)`, the observation decides in between.
pub fn cutoff_action(
    ss: &SignalStructure,
    q: u32,
    epsilon: f64,
    s: f64,
    obs_posterior: &Posterior,
) -> Result<Action, StrategyError> {
    let b = belief_step_bounds(ss, q, epsilon)?;
    Ok(if s >= b.s1 {
        Bit::One
    } else if s <= b.s0 {
        Bit::Zero
    } else {
        truth_seeking_action(obs_posterior)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BRReport {
    pub profile: String,
    pub period: Option<u32>,
    pub info: String,
    pub is_best_response: bool,
    pub best_deviation: Option<Action>,
    /// Deviation payoff minus stay payoff; positive exactly when the profile
    /// is not a best response.
    pub gap: f64,
}

/// Unanimous profile on `action` against a lone deviation.
pub fn best_response_check(spec: &PayoffSpec, q: u32, p: f64, action: Action) -> Result<BRReport, StrategyError> {
    let stay = p * spec.utility(Bit::One, action, q)? + (1.0 - p) * spec.utility(Bit::Zero, action, q)?;
    let dev = action.flip();
    let alt = p * spec.utility(Bit::One, dev, 1)? + (1.0 - p) * spec.utility(Bit::Zero, dev, 1)?;
    let ok = stay >= alt;
    Ok(BRReport {
        profile: format!("unanimous {action}"),
        period: None,
        info: format!("Q={q} P={p}"),
        is_best_response: ok,
        best_deviation: if ok { None } else { Some(dev) },
        gap: alt - stay,
    })
}

/// Profile with `ones` agents on action 1 and the rest on 0; checks both
/// groups against switching.
pub fn split_best_response(spec: &PayoffSpec, q: u32, ones: u32, p: f64) -> Result<BRReport, StrategyError> {
    let ev = |a: Action, m: u32| -> Result<f64, StrategyError> {
        Ok(p * spec.utility(Bit::One, a, m)? + (1.0 - p) * spec.utility(Bit::Zero, a, m)?)
    };
    let zeros = q - ones;
    let mut worst: Option<(Action, f64)> = None;
    if ones > 0 {
        let gap = ev(Bit::Zero, zeros + 1)? - ev(Bit::One, ones)?;
        if gap > 0.0 {
            worst = Some((Bit::Zero, gap));
        }
    }
    if zeros > 0 {
        let gap = ev(Bit::One, ones + 1)? - ev(Bit::Zero, zeros)?;
        if gap > 0.0 && worst.is_none_or(|(_, g)| gap > g) {
            worst = Some((Bit::One, gap));
        }
    }
    Ok(BRReport {
        profile: format!("{ones} of {q} on action 1"),
        period: None,
        info: format!("P={p}"),
        is_best_response: worst.is_none(),
        best_deviation: worst.map(|w| w.0),
        gap: worst.map_or(0.0, |w| w.1),
    })
}

/// A split profile that survived every deviation check.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEquilibrium {
    pub q: u32,
    pub ones: u32,
    pub p: f64,
}

/// Brute-force search for non-unanimous equilibria at size `q`.
pub fn unanimity_search(spec: &PayoffSpec, q: u32, belief_grid: &[f64]) -> Result<Vec<SplitEquilibrium>, StrategyError> {
    if spec.mode != PayoffMode::Coordination {
        return Err(StrategyError::WrongMode {
            expected: PayoffMode::Coordination,
        });
    }
    let report = spec.validate_assumptions();
    if !report.passed() {
        let names: Vec<String> = report.violations.iter().map(Violation::to_string).collect();
        return Err(StrategyError::OutOfScope(names.join("; ")));
    }
    let mut found = Vec::new();
    for ones in 1..q {
        for &p in belief_grid {
            if split_best_response(spec, q, ones, p)?.is_best_response {
                found.push(SplitEquilibrium { q, ones, p });
            }
        }
    }
    Ok(found)
}

/// `k / n` for `k = 1..n`.
pub fn belief_grid(n: u32) -> Vec<f64> {
    (1..n).map(|k| k as f64 / n as f64).collect()
}

/// Per-subset comparison of two unanimous profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskDominance {
    pub q: u32,
    /// `(switchers Q', loss difference)` from the defining inequality.
    pub enumerated: Vec<(u32, BigRational)>,
    /// The same quantities from the closed form.
    pub closed_form: Vec<(u32, BigRational)>,
    pub dominates: bool,
}

/// Whether unanimous `profile_a` risk-dominates unanimous `profile_b` at
/// belief `p`. Payoffs and `p` are handled as exact rationals. Sizes up to
/// 16 enumerate every switching subset explicitly; larger sizes use one
/// subset per size.
pub fn risk_dominance_check(
    spec: &PayoffSpec,
    q: u32,
    p: &BigRational,
    profile_a: Action,
    profile_b: Action,
) -> Result<RiskDominance, StrategyError> {
    if spec.mode != PayoffMode::Coordination {
        return Err(StrategyError::WrongMode {
            expected: PayoffMode::Coordination,
        });
    }
    if profile_a == profile_b {
        return Err(StrategyError::InvalidParameter("profiles must differ".into()));
    }
    let one = BigRational::from_integer(1.into());
    let ev = |a: Action, m: u32| -> Result<BigRational, StrategyError> {
        Ok(p * spec.utility_exact(Bit::One, a, m)? + (&one - p) * spec.utility_exact(Bit::Zero, a, m)?)
    };
    // Loss for a member of the switching subset.
    let diff_for = |k: u32| -> Result<BigRational, StrategyError> {
        let loss_a = ev(profile_a, q)? - ev(profile_b, k)?;
        let loss_b = ev(profile_b, q)? - ev(profile_a, k)?;
        Ok(loss_a - loss_b)
    };
    let mut by_size: BTreeMap<u32, BigRational> = BTreeMap::new();
    if q <= 16 {
        for mask in 1u32..(1u32 << q) {
            let k = mask.count_ones();
            let d = diff_for(k)?;
            if let Some(prev) = by_size.get(&k) {
                debug_assert_eq!(prev, &d);
            } else {
                by_size.insert(k, d);
            }
        }
    } else {
        for k in 1..=q {
            by_size.insert(k, diff_for(k)?);
        }
    }
    let two = BigRational::from_integer(2.into());
    let sign = if profile_a.is_one() {
        &two * p - &one
    } else {
        &one - &two * p
    };
    let gap = |m: u32| -> Result<BigRational, StrategyError> {
        Ok(spec.utility_exact(Bit::One, Bit::One, m)? - spec.utility_exact(Bit::One, Bit::Zero, m)?)
    };
    let mut closed = Vec::new();
    for k in 1..=q {
        closed.push((k, &sign * (gap(q)? + gap(k)?)));
    }
    let enumerated: Vec<(u32, BigRational)> = by_size.into_iter().collect();
    let dominates = enumerated.iter().all(|(_, d)| !d.is_negative());
    Ok(RiskDominance {
        q,
        enumerated,
        closed_form: closed,
        dominates,
    })
}

/// Belief `k / 100` as an exact rational.
pub fn grid_rational(k: u32, n: u32) -> BigRational {
    BigRational::new(k.into(), n.into())
}

/// What one community does under the delegate-observer construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DelegateChoice {
    /// Index within the community of the single observer, if any.
    pub observer: Option<u32>,
    pub action: Action,
    pub on_path: bool,
}

/// Agent 1 observes the prescription from period 2 on. On path the
/// community acts on `posterior`; off path it takes the opposite action when
/// `punish` is set.
pub fn delegate_profile(
    t: u32,
    prescription: &[u32],
    realized: &[u32],
    posterior: &Posterior,
    punish: bool,
) -> DelegateChoice {
    let ts = truth_seeking_action(posterior);
    if t <= 1 {
        return DelegateChoice {
            observer: None,
            action: ts,
            on_path: true,
        };
    }
    let on_path = prescription == realized;
    DelegateChoice {
        observer: Some(0),
        action: if on_path || !punish { ts } else { ts.flip() },
        on_path,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncentiveReport {
    pub q: u32,
    pub cost: f64,
    pub neutral_signal: f64,
    /// Lower bound on the delegate's payoff from observing, net of cost.
    pub observe_bound: f64,
    /// Upper bound on the payoff from not observing.
    pub no_observe_bound: f64,
    /// `observe_bound + cost - no_observe_bound`, which simplifies to
    /// `(F_0(ŝ) - F_1(ŝ)) / 2 * (u(1,1,Q) - u(1,0,Q))`.
    pub gap: f64,
    pub passed: bool,
}

/// Checks that a delegate strictly prefers paying `cost` to observe.
pub fn delegate_incentive_check(
    spec: &PayoffSpec,
    ss: &SignalStructure,
    q: u32,
    cost: f64,
) -> Result<IncentiveReport, StrategyError> {
    let sh = ss.neutral_signal(q);
    let (f0, f1) = (ss.cdf(q, Bit::Zero, sh), ss.cdf(q, Bit::One, sh));
    let u11 = spec.utility(Bit::One, Bit::One, q)?;
    let u10 = spec.utility(Bit::One, Bit::Zero, q)?;
    let observe_bound = 0.5 * ((f0 + 1.0 - f1) * u11 + (f1 + 1.0 - f0) * u10) - cost;
    let no_observe_bound = 0.5 * (u11 + u10);
    let gap = 0.5 * (f0 - f1) * (u11 - u10);
    Ok(IncentiveReport {
        q,
        cost,
        neutral_signal: sh,
        observe_bound,
        no_observe_bound,
        gap,
        passed: observe_bound > no_observe_bound,
    })
}

/// Smallest size at least the conformity threshold at which the delegate
/// incentive holds, scanning up to the payoff's `m_bound`.
pub fn min_delegate_size(spec: &PayoffSpec, ss: &SignalStructure, cost: f64) -> Result<Option<u32>, StrategyError> {
    let qhat = spec.conformity_threshold()?;
    for q in qhat..=spec.m_bound.min(spec.max_defined_m()) {
        if delegate_incentive_check(spec, ss, q, cost)?.passed {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

/// The upper limit cutoff `s*(Q)`: the signal at which acting on the signal
/// alone pays exactly `u(1,1,Q) - c`.
pub fn limit_cutoff(ss: &SignalStructure, spec: &PayoffSpec, cost: f64, q: u32) -> Result<f64, StrategyError> {
    Ok(limit_cutoffs(ss, spec, cost, q)?.1)
}

/// Both limit cutoffs `(lower, upper)`; the lower one is the mirror
/// condition for state 0.
pub fn limit_cutoffs(ss: &SignalStructure, spec: &PayoffSpec, cost: f64, q: u32) -> Result<(f64, f64), StrategyError> {
    let u11 = spec.utility(Bit::One, Bit::One, q)?;
    let u10 = spec.utility(Bit::One, Bit::Zero, q)?;
    let gap = u11 - u10;
    if !(cost > 0.0) || !(gap > 0.0) {
        return Err(StrategyError::InvalidParameter("cost and match gap must be positive".into()));
    }
    let hi_belief = 1.0 - cost / gap;
    let lo_belief = cost / gap;
    let (bmin, bmax) = ss.belief_limits(q);
    if hi_belief <= 0.5 {
        return Err(StrategyError::NoInteriorCutoff(format!(
            "cost {cost} is at least half the match gap {gap}; observing never pays"
        )));
    }
    if hi_belief >= bmax || lo_belief <= bmin {
        return Err(StrategyError::NoInteriorCutoff(format!(
            "private beliefs in ({bmin}, {bmax}) never reach {hi_belief}"
        )));
    }
    let solve = |target: f64| {
        bisect(|s| ss.belief_unchecked(q, s) - target, -1.0, 1.0, 1e-10)
            .ok_or_else(|| StrategyError::NoInteriorCutoff(format!("belief {target} not bracketed")))
    };
    Ok((solve(lo_belief)?, solve(hi_belief)?))
}

/// All equilibrium counts on action 1 under separation payoffs at belief
/// `p`.
pub fn separation_split(spec: &PayoffSpec, q: u32, p: f64) -> Result<Vec<u32>, StrategyError> {
    if spec.mode != PayoffMode::Separation {
        return Err(StrategyError::WrongMode {
            expected: PayoffMode::Separation,
        });
    }
    let mut out = Vec::new();
    for ones in 0..=q {
        if split_best_response(spec, q, ones, p)?.is_best_response {
            out.push(ones);
        }
    }
    Ok(out)
}

/// The count selected for simulation: the smallest equilibrium count when
/// `p > 1/2`, mirrored otherwise. Falls back to the unanimous more likely
/// action when no pure equilibrium exists.
pub fn selected_split(spec: &PayoffSpec, q: u32, p: f64) -> Result<u32, StrategyError> {
    if p > 0.5 {
        Ok(separation_split(spec, q, p)?.into_iter().next().unwrap_or(q))
    } else {
        Ok(q - separation_split(spec, q, 1.0 - p)?.into_iter().next().unwrap_or(q))
    }
}

/// `selected_split` as a step function of the belief: `(upper belief, ones)`
/// cells in increasing order, the last ending at 1.
fn separation_cells(spec: &PayoffSpec, q: u32) -> Result<Vec<(f64, u32)>, StrategyError> {
    let mut points: BTreeSet<u64> = BTreeSet::new();
    let u = |th, a, m| spec.utility(th, a, m);
    // Each deviation inequality is affine in p; collect every root.
    let mut push_root = |a: f64, b: f64| {
        // a * p + b = 0
        if a != 0.0 {
            let r = -b / a;
            for r in [r, 1.0 - r] {
                if r > 0.0 && r < 1.0 {
                    points.insert(r.to_bits());
                }
            }
        }
    };
    for ones in 0..=q {
        let zeros = q - ones;
        if ones > 0 {
            let stay1 = (u(Bit::One, Bit::One, ones)?, u(Bit::Zero, Bit::One, ones)?);
            let dev0 = (u(Bit::One, Bit::Zero, zeros + 1)?, u(Bit::Zero, Bit::Zero, zeros + 1)?);
            push_root((stay1.0 - stay1.1) - (dev0.0 - dev0.1), stay1.1 - dev0.1);
        }
        if zeros > 0 {
            let stay0 = (u(Bit::One, Bit::Zero, zeros)?, u(Bit::Zero, Bit::Zero, zeros)?);
            let dev1 = (u(Bit::One, Bit::One, ones + 1)?, u(Bit::Zero, Bit::One, ones + 1)?);
            push_root((stay0.0 - stay0.1) - (dev1.0 - dev1.1), stay0.1 - dev1.1);
        }
    }
    points.insert(0.5f64.to_bits());
    let mut edges: Vec<f64> = points.into_iter().map(f64::from_bits).collect();
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cells: Vec<(f64, u32)> = Vec::new();
    let mut lo = 0.0;
    for hi in edges.into_iter().chain(std::iter::once(1.0)) {
        let ones = selected_split(spec, q, 0.5 * (lo + hi))?;
        match cells.last_mut() {
            Some(last) if last.1 == ones => last.0 = hi,
            _ => cells.push((hi, ones)),
        }
        lo = hi;
    }
    Ok(cells)
}

/// Belief gap below which the current cutoff already makes its marginal
/// agent indifferent.
const INDIFFERENCE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSolution {
    pub cutoff: f64,
    pub converged: bool,
    pub iterations: u32,
}

/// Symmetric cutoff when each agent draws its own signal and all share the
/// observation posterior `obs_posterior`. A cutoff of `-1` means every agent
/// plays 1 whatever its signal, `1` means every agent plays 0.
pub fn private_signal_cutoff(
    ss: &SignalStructure,
    spec: &PayoffSpec,
    q: u32,
    obs_posterior: f64,
    iterations: u32,
) -> Result<CutoffSolution, StrategyError> {
    if q == 0 {
        return Err(StrategyError::InvalidParameter("community size must be >= 1".into()));
    }
    let p = obs_posterior.clamp(1e-300, 1.0 - 1e-16);
    let l_obs = p.ln() - (1.0 - p).ln();
    let mut cut = truth_seeking_cut(ss, q, l_obs);
    // Payoff tables indexed by m = 1..=q.
    let table = |th: State, a: Action| -> Result<Vec<f64>, StrategyError> {
        (1..=q).map(|m| spec.utility(th, a, m).map_err(Into::into)).collect()
    };
    let u = [
        [table(Bit::Zero, Bit::Zero)?, table(Bit::Zero, Bit::One)?],
        [table(Bit::One, Bit::Zero)?, table(Bit::One, Bit::One)?],
    ];
    for it in 1..=iterations.max(1) {
        let mut adv = [0.0f64; 2];
        for th in Bit::BOTH {
            let pr = 1.0 - ss.cdf(q, th, cut);
            let pmf = binomial_pmf(q - 1, pr);
            let mut a = 0.0;
            for (x, w) in pmf.iter().enumerate() {
                let x = x as u32;
                a += w * (u[th.index()][1][x as usize] - u[th.index()][0][(q - 1 - x) as usize]);
            }
            adv[th.index()] = a;
        }
        let next = if adv[0] > 0.0 && adv[1] > 0.0 {
            -1.0
        } else if adv[0] <= 0.0 && adv[1] <= 0.0 {
            1.0
        } else if adv[1] > adv[0] {
            let pstar = -adv[0] / (adv[1] - adv[0]);
            let at_cut = logistic(ss.log_likelihood_ratio(q, cut) + l_obs);
            if (pstar - at_cut).abs() < INDIFFERENCE_TOL {
                return Ok(CutoffSolution {
                    cutoff: cut,
                    converged: true,
                    iterations: it,
                });
            }
            let target = pstar.ln() - (1.0 - pstar).ln() - l_obs;
            ss.signal_for_log_lr(q, target)
        } else {
            cut
        };
        let change = (next - cut).abs();
        cut = next;
        if change < 1e-8 {
            return Ok(CutoffSolution {
                cutoff: cut,
                converged: true,
                iterations: it,
            });
        }
    }
    Ok(CutoffSolution {
        cutoff: cut,
        converged: false,
        iterations: iterations.max(1),
    })
}

#[derive(Debug, Clone, PartialEq)]
struct SizeData {
    neutral: f64,
    eps_cuts: Option<(f64, f64)>,
    limits: Option<(f64, f64)>,
    sep_cells: Option<Vec<(f64, u32)>>,
}

/// A [`StrategyKind`] bound to its model, with per-size quantities solved
/// once.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    kind: StrategyKind,
    ss: SignalStructure,
    payoff: PayoffSpec,
    qhat: Option<u32>,
    capacity: Option<CapacitySchedule>,
    cost: Option<f64>,
    per_size: BTreeMap<u32, SizeData>,
}

impl StrategyProfile {
    pub fn new(
        kind: StrategyKind,
        ss: &SignalStructure,
        payoff: &PayoffSpec,
        scheme: &ObservationScheme,
        sizes: &BTreeSet<u32>,
    ) -> Result<Self, StrategyError> {
        if let Some(endo) = kind.needs_endogenous() {
            if endo != scheme.is_endogenous() {
                return Err(StrategyError::Incompatible {
                    profile: kind.name(),
                    scheme: scheme.kind.name(),
                });
            }
        }
        let want_mode = match kind {
            StrategyKind::SeparationSplit => Some(PayoffMode::Separation),
            StrategyKind::Constant(_) => None,
            _ => Some(PayoffMode::Coordination),
        };
        if let Some(m) = want_mode {
            if payoff.mode != m {
                return Err(StrategyError::WrongMode { expected: m });
            }
        }
        let (capacity, cost) = match scheme.kind {
            SchemeKind::Endogenous { cost, capacity } => (Some(capacity), Some(cost)),
            _ => (None, None),
        };
        let eps = match kind {
            StrategyKind::CutoffCoordination { epsilon } => Some(epsilon),
            StrategyKind::DelegateObserver {
                on_path: OnPathRule::Cutoff { epsilon },
                ..
            } => Some(epsilon),
            _ => None,
        };
        if let Some(e) = eps {
            if !(e > 0.0 && e < 0.5) {
                return Err(StrategyError::InvalidParameter(format!("epsilon must be in (0, 0.5), got {e}")));
            }
        }
        if let StrategyKind::PrivateSignalSymmetric { iterations } = kind {
            if iterations == 0 {
                return Err(StrategyError::InvalidParameter("iterations must be >= 1".into()));
            }
        }
        let qhat = if eps.is_some() { Some(payoff.conformity_threshold()?) } else { None };
        let mut per_size = BTreeMap::new();
        for &q in sizes {
            let eps_cuts = match eps {
                Some(e) => {
                    let b = belief_step_bounds(ss, q, e)?;
                    Some((b.s0, b.s1))
                }
                None => None,
            };
            let limits = match (&kind, cost) {
                (StrategyKind::EndogenousCutoff, Some(c)) => Some(limit_cutoffs(ss, payoff, c, q)?),
                _ => None,
            };
            let sep_cells = match kind {
                StrategyKind::SeparationSplit => Some(separation_cells(payoff, q)?),
                _ => None,
            };
            per_size.insert(
                q,
                SizeData {
                    neutral: ss.neutral_signal(q),
                    eps_cuts,
                    limits,
                    sep_cells,
                },
            );
        }
        Ok(Self {
            kind,
            ss: ss.clone(),
            payoff: payoff.clone(),
            qhat,
            capacity,
            cost,
            per_size,
        })
    }

    pub fn kind(&self) -> &StrategyKind {
        &self.kind
    }

    pub fn signal(&self) -> &SignalStructure {
        &self.ss
    }

    pub fn payoff(&self) -> &PayoffSpec {
        &self.payoff
    }

    pub fn conformity_threshold(&self) -> Option<u32> {
        self.qhat
    }

    pub fn capacity(&self) -> Option<CapacitySchedule> {
        self.capacity
    }

    pub fn cost(&self) -> Option<f64> {
        self.cost
    }

    /// `(s0, s1)` for cutoff kinds at size `q`.
    pub fn epsilon_cutoffs(&self, q: u32) -> Option<(f64, f64)> {
        self.per_size.get(&q).and_then(|d| d.eps_cuts)
    }

    /// `(lower, upper)` limit cutoffs for the endogenous kinds at size `q`.
    pub fn limit_cutoffs(&self, q: u32) -> Option<(f64, f64)> {
        self.per_size.get(&q).and_then(|d| d.limits)
    }

    /// Whether emitted actions are always unanimous.
    pub fn is_unanimous(&self) -> bool {
        !matches!(
            self.kind,
            StrategyKind::SeparationSplit | StrategyKind::PrivateSignalSymmetric { .. }
        )
    }

    /// Whether the community acts on one shared signal.
    pub fn shares_signal(&self) -> bool {
        !matches!(self.kind, StrategyKind::PrivateSignalSymmetric { .. })
    }

    fn coordinated(&self, q: u32) -> bool {
        self.qhat.is_some_and(|h| q >= h)
    }

    fn cutoff_response(&self, q: u32, d: &SizeData, public: Option<f64>) -> f64 {
        let (s0, s1) = d.eps_cuts.expect("epsilon cutoffs prepared");
        if !self.coordinated(q) {
            return truth_seeking_cut(&self.ss, q, public.unwrap_or(0.0));
        }
        match public {
            None => d.neutral.clamp(s0, s1),
            Some(l) if l > 0.0 => s0,
            Some(_) => s1,
        }
    }

    /// The decision of a size-`q` community. `public` is the
    /// log likelihood ratio of the observable history, or `None` when there
    /// is nothing to observe.
    pub fn decide(&self, q: u32, public: Option<f64>) -> Result<Decision, StrategyError> {
        let d = self.per_size.get(&q).ok_or(StrategyError::UnknownSize(q))?;
        let exo_observe = if public.is_some() { ObserveRule::Always } else { ObserveRule::Never };
        let ts = |l: f64| truth_seeking_cut(&self.ss, q, l);
        Ok(match &self.kind {
            StrategyKind::Constant(a) => Decision::unanimous(if a.is_one() { -1.0 } else { 1.0 }, exo_observe),
            StrategyKind::TruthSeeking => Decision::unanimous(ts(public.unwrap_or(0.0)), exo_observe),
            StrategyKind::CutoffCoordination { .. } => Decision::unanimous(self.cutoff_response(q, d, public), exo_observe),
            StrategyKind::DelegateObserver { on_path, .. } => match public {
                None => Decision::unanimous(d.neutral, ObserveRule::Never),
                Some(l) => {
                    let cut = match on_path {
                        OnPathRule::TruthSeeking => ts(l),
                        OnPathRule::Cutoff { .. } => self.cutoff_response(q, d, Some(l)),
                    };
                    Decision::unanimous(cut, ObserveRule::Always)
                }
            },
            StrategyKind::EndogenousCutoff => match public {
                None => Decision::unanimous(d.neutral, ObserveRule::Never),
                Some(l) => {
                    let (lo, hi) = d.limits.expect("limit cutoffs prepared");
                    Decision::unanimous(ts(l).clamp(lo, hi), ObserveRule::Interval { lo, hi })
                }
            },
            StrategyKind::SeparationSplit => {
                let l = public.unwrap_or(0.0);
                let cells = d.sep_cells.as_ref().expect("separation cells prepared");
                let mut cuts = Vec::with_capacity(cells.len());
                let mut ones = Vec::with_capacity(cells.len());
                for (i, &(p_hi, k)) in cells.iter().enumerate() {
                    ones.push(k);
                    if i + 1 < cells.len() {
                        let target = p_hi.ln() - (1.0 - p_hi).ln() - l;
                        cuts.push(self.ss.signal_for_log_lr(q, target));
                    }
                }
                Decision {
                    response: Response::Ladder { cuts, ones },
                    observe: exo_observe,
                }
            }
            StrategyKind::PrivateSignalSymmetric { iterations } => {
                let l = public.unwrap_or(0.0);
                let p = 1.0 / (1.0 + (-l).exp());
                let sol = private_signal_cutoff(&self.ss, &self.payoff, q, p, *iterations)?;
                Decision {
                    response: Response::Independent { cut: sol.cutoff },
                    observe: exo_observe,
                }
            }
        })
    }

    /// Limit probability of a correct action when the observation becomes
    /// truth-telling, averaged over the two states; `None` for kinds without
    /// such a closed form. When the truth is known, the endogenous kind
    /// errs only on extreme contrary signals, and the cutoff kind only
    /// beyond its epsilon cutoffs.
    pub fn limit_accuracy(&self, q: u32) -> Option<f64> {
        let d = self.per_size.get(&q)?;
        let (lo, hi) = match self.kind {
            StrategyKind::EndogenousCutoff => d.limits?,
            StrategyKind::CutoffCoordination { .. } if self.coordinated(q) => d.eps_cuts?,
            _ => return None,
        };
        let f0 = self.ss.cdf(q, Bit::Zero, hi);
        let f1 = self.ss.cdf(q, Bit::One, lo);
        Some(0.5 * (f0 + 1.0 - f1))
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::CutoffCoordination { epsilon } => write!(f, "cutoff(epsilon={epsilon})"),
            StrategyKind::DelegateObserver {
                prescription,
                on_path,
                punish,
            } => write!(f, "delegate({prescription:?}, {on_path:?}, punish={punish})"),
            StrategyKind::PrivateSignalSymmetric { iterations } => write!(f, "private_signal(iterations={iterations})"),
            StrategyKind::Constant(a) => write!(f, "constant({a})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Exact rational check used by tests and the verify suite: the enumerated
/// and closed-form differences agree entry by entry.
pub fn risk_dominance_consistent(r: &RiskDominance) -> bool {
    r.enumerated.len() == r.closed_form.len()
        && r.enumerated.iter().zip(&r.closed_form).all(|(a, b)| a == b)
}

/// `p` as an exact rational; convenience for callers holding floats.
pub fn rational(p: f64) -> BigRational {
    exact(p)
}

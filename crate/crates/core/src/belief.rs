//! Posterior beliefs over the state given a private signal and observed
//! actions.
//!
//! Exact posteriors are available on two lattices. On the complete lattice
//! every observer sees the full history, so the public likelihood ratio is a
//! running product of per-period action likelihoods. On single-source chains
//! (line and star) a community sees one predecessor, and the marginal
//! distribution of that predecessor's outcome is propagated forward under
//! each state. Everything else needs [`posterior_mc`], which is itself
//! limited to lattices the simulator can run.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::bit::{Action, Bit};
use crate::signal::SignalStructure;
use crate::sim::Engine;
use crate::strategy::{Decision, StrategyProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("epsilon must lie in (0, 0.5), got {0}")]
    InvalidEpsilon(f64),
    #[error("no cutoff pair carries mass 1 - 2*epsilon under both states")]
    CutoffNotFound,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("exact beliefs are not available here: {0}")]
    UnsupportedLattice(String),
    #[error("history was never reproduced under either state in {0} replications")]
    Degenerate(u64),
    #[error("history does not fit the observation scheme: {0}")]
    InvalidHistory(String),
    #[error("strategy evaluation failed: {0}")]
    Strategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PosteriorMethod {
    Exact,
    MonteCarlo { half_width: f64, confidence: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub prob_state1: f64,
    /// `ln(P(theta=1 | info) / P(theta=0 | info))`, kept for precision when
    /// the probability rounds to 0 or 1.
    pub log_odds: f64,
    pub method: PosteriorMethod,
}

impl Posterior {
    pub fn exact(prob_state1: f64) -> Self {
        Self {
            prob_state1,
            log_odds: prob_state1.ln() - (1.0 - prob_state1).ln(),
            method: PosteriorMethod::Exact,
        }
    }

    pub fn from_log_odds(log_odds: f64, method: PosteriorMethod) -> Self {
        Self {
            prob_state1: logistic(log_odds),
            log_odds,
            method,
        }
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The history-independent quantities of the cutoff construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefBounds {
    /// Largest single-period likelihood ratio against the truth (`< 1`).
    pub ratio_bound_y: f64,
    /// Smallest probability of an action contrary to the observation.
    pub floor_w: f64,
    pub s0: f64,
    pub s1: f64,
}

/// Cutoffs `s0 < s1` with `F_1(s1) - F_1(s0) = F_0(s1) - F_0(s0) = 1 - 2
/// epsilon`, plus the ratio bound `y` and floor `w`.
///
/// `y` is the largest of the four single-action likelihood ratios at the
/// cutoffs, each taken in its `< 1` orientation; `w = min(F_1(s0), 1 -
/// F_0(s1))`.
pub fn belief_step_bounds(ss: &SignalStructure, q: u32, epsilon: f64) -> Result<BeliefBounds, BeliefError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(BeliefError::InvalidEpsilon(epsilon));
    }
    let mass = 1.0 - 2.0 * epsilon;
    let (s0, s1) = if ss.is_symmetric() {
        // F_0(s) + F_1(s) = s + 1 for every built-in tilt, so the symmetric
        // pair carries mass s1 under both states.
        (-mass, mass)
    } else {
        equal_mass_cutoffs(ss, q, mass)?
    };
    let f = |th, s| ss.cdf(q, th, s);
    let (f1s0, f0s0, f1s1, f0s1) = (f(Bit::One, s0), f(Bit::Zero, s0), f(Bit::One, s1), f(Bit::Zero, s1));
    let orient = |r: f64| if r > 1.0 { 1.0 / r } else { r };
    let ratios = [f1s0 / f0s0, f1s1 / f0s1, (1.0 - f0s0) / (1.0 - f1s0), (1.0 - f0s1) / (1.0 - f1s1)];
    let y = ratios.iter().map(|&r| orient(r)).fold(0.0, f64::max);
    let w = f1s0.min(1.0 - f0s1);
    Ok(BeliefBounds {
        ratio_bound_y: y,
        floor_w: w,
        s0,
        s1,
    })
}

/// Generic solver: for each `s0`, pick `s1` from the state-1 mass condition
/// and locate roots of the state-0 residual; among several roots keep the
/// pair with the most balanced tails.
fn equal_mass_cutoffs(ss: &SignalStructure, q: u32, mass: f64) -> Result<(f64, f64), BeliefError> {
    let upper_s0 = ss.quantile(q, Bit::One, 1.0 - mass);
    let s1_of = |s0: f64| ss.quantile(q, Bit::One, (ss.cdf(q, Bit::One, s0) + mass).min(1.0));
    let resid = |s0: f64| ss.cdf(q, Bit::Zero, s1_of(s0)) - ss.cdf(q, Bit::Zero, s0) - mass;
    let n = 2000;
    let lo = -1.0;
    let hi = upper_s0;
    if !(hi > lo) {
        return Err(BeliefError::CutoffNotFound);
    }
    let mut best: Option<(f64, f64, f64)> = None;
    let mut prev_x = lo;
    let mut prev_r = resid(lo);
    for i in 1..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let r = resid(x);
        let root = if prev_r == 0.0 {
            Some(prev_x)
        } else if prev_r.signum() != r.signum() {
            crate::root::bisect(resid, prev_x, x, 1e-13)
        } else {
            None
        };
        if let Some(s0) = root {
            let s1 = s1_of(s0);
            if s0 > -1.0 && s1 < 1.0 {
                let imbalance = (ss.cdf(q, Bit::Zero, s0) - (1.0 - ss.cdf(q, Bit::Zero, s1))).abs();
                if best.is_none_or(|b| imbalance < b.2) {
                    best = Some((s0, s1, imbalance));
                }
            }
        }
        prev_x = x;
        prev_r = r;
    }
    best.map(|(a, b, _)| (a, b)).ok_or(BeliefError::CutoffNotFound)
}

/// Number of belief updates by ratio `y` needed to push `r` below `r_hat`,
/// iterating `r <- r / (r + (1 - r) / y)`. Returns 0 when `r_hat >= r`.
pub fn reversal_horizon(r: f64, r_hat: f64, y: f64) -> Result<u32, BeliefError> {
    if !(r > 0.0 && r < 1.0 && r_hat > 0.0 && r_hat < 1.0) {
        return Err(BeliefError::InvalidArgument("r and r_hat must lie in (0, 1)".into()));
    }
    if !(y > 0.0 && y < 1.0) {
        return Err(BeliefError::InvalidArgument(format!("y must lie in (0, 1), got {y}")));
    }
    let mut cur = r;
    let mut m = 0;
    while cur >= r_hat {
        cur = cur / (cur + (1.0 - cur) / y);
        m += 1;
    }
    Ok(m)
}

/// One observed predecessor community.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservedCommunity {
    pub index: u32,
    pub size: u32,
    /// Number of its agents that chose action 1.
    pub ones: u32,
}

impl ObservedCommunity {
    pub fn from_actions(index: u32, actions: &[Action]) -> Self {
        Self {
            index,
            size: actions.len() as u32,
            ones: actions.iter().filter(|a| a.is_one()).count() as u32,
        }
    }

    pub fn unanimous(index: u32, size: u32, action: Action) -> Self {
        Self {
            index,
            size,
            ones: if action.is_one() { size } else { 0 },
        }
    }
}

/// What period `t` saw: the observed communities in index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodRealization {
    pub t: u32,
    pub observed: Vec<ObservedCommunity>,
}

/// How beliefs are tracked along a trace.
#[derive(Debug, Clone)]
pub(crate) enum Lattice {
    /// Everyone who observes sees the whole history.
    Complete,
    /// Each community observes one fixed-rule source.
    Chain(ChainTable),
    /// Beliefs are not tracked; only profiles that ignore them may run.
    Blind,
}

/// Forward marginals for single-source observation.
#[derive(Debug, Clone)]
pub(crate) struct ChainTable {
    star: bool,
    sizes: Vec<u32>,
    /// `lr[tau - 1][size index][ones]`: log likelihood ratio of the outcome.
    lr: Vec<Vec<Vec<f64>>>,
    /// Decisions at `t = 1` by size index.
    first: Vec<Decision>,
    /// `decisions[slot][size][source size][source ones]`, slot `t - 2` for
    /// the line and 0 for the star.
    decisions: Vec<Vec<Vec<Vec<Option<Decision>>>>>,
}

fn log_ratio(p1: f64, p0: f64) -> f64 {
    if p1 <= 0.0 && p0 <= 0.0 {
        f64::NAN
    } else {
        p1.max(f64::MIN_POSITIVE).ln() - p0.max(f64::MIN_POSITIVE).ln()
    }
}

fn strategy_err(e: crate::strategy::StrategyError) -> BeliefError {
    BeliefError::Strategy(e.to_string())
}

impl ChainTable {
    pub(crate) fn build(
        profile: &StrategyProfile,
        sizes: &[(u32, f64)],
        horizon: u32,
        star: bool,
    ) -> Result<Self, BeliefError> {
        let ss = profile.signal();
        let qs: Vec<u32> = sizes.iter().map(|e| e.0).collect();
        let ws: Vec<f64> = sizes.iter().map(|e| e.1).collect();
        let first: Vec<Decision> = qs
            .iter()
            .map(|&q| profile.decide(q, None))
            .collect::<Result<_, _>>()
            .map_err(strategy_err)?;
        // dist[qi][k] = (P(k | theta=0), P(k | theta=1)) for the latest community.
        let dist_of = |d: &Decision, q: u32| -> Vec<(f64, f64)> {
            let a = d.outcome_distribution(ss, q, Bit::Zero);
            let b = d.outcome_distribution(ss, q, Bit::One);
            a.into_iter().zip(b).collect()
        };
        let mut dists: Vec<Vec<Vec<(f64, f64)>>> = vec![first.iter().zip(&qs).map(|(d, &q)| dist_of(d, q)).collect()];
        let lr_of = |dist: &Vec<Vec<(f64, f64)>>| -> Vec<Vec<f64>> {
            dist.iter().map(|row| row.iter().map(|&(p0, p1)| log_ratio(p1, p0)).collect()).collect()
        };
        let mut lr = vec![lr_of(&dists[0])];
        let mut decisions = Vec::new();
        let last_slot = if star { 2 } else { horizon.max(2) };
        for t in 2..=last_slot {
            let src = if star { 1 } else { t - 1 } as usize;
            let src_dist = &dists[src - 1];
            let src_lr = &lr[src - 1];
            let mut slot = Vec::with_capacity(qs.len());
            let mut next = Vec::with_capacity(qs.len());
            for &q in &qs {
                let mut by_src = Vec::with_capacity(qs.len());
                let mut acc = vec![(0.0f64, 0.0f64); q as usize + 1];
                for (sqi, &sq) in qs.iter().enumerate() {
                    let mut row = Vec::with_capacity(sq as usize + 1);
                    for k in 0..=sq as usize {
                        let (w0, w1) = src_dist[sqi][k];
                        if w0 <= 0.0 && w1 <= 0.0 {
                            row.push(None);
                            continue;
                        }
                        let d = profile.decide(q, Some(src_lr[sqi][k])).map_err(strategy_err)?;
                        if !star && (t as usize) < horizon as usize {
                            let out = dist_of(&d, q);
                            for (j, (p0, p1)) in out.into_iter().enumerate() {
                                acc[j].0 += ws[sqi] * w0 * p0;
                                acc[j].1 += ws[sqi] * w1 * p1;
                            }
                        }
                        row.push(Some(d));
                    }
                    by_src.push(row);
                }
                slot.push(by_src);
                next.push(acc);
            }
            decisions.push(slot);
            if !star && t < horizon {
                lr.push(lr_of(&next));
                dists.push(next);
            }
        }
        Ok(Self {
            star,
            sizes: qs,
            lr,
            first,
            decisions,
        })
    }

    pub(crate) fn source(&self, t: u32) -> u32 {
        if self.star {
            1
        } else {
            t - 1
        }
    }

    pub(crate) fn size_index(&self, q: u32) -> Option<usize> {
        self.sizes.binary_search(&q).ok()
    }

    pub(crate) fn first(&self, qi: usize) -> &Decision {
        &self.first[qi]
    }

    /// Public log likelihood ratio from observing community `tau`.
    pub(crate) fn public(&self, tau: u32, sqi: usize, ones: u32) -> Option<f64> {
        let v = *self.lr.get(tau as usize - 1)?.get(sqi)?.get(ones as usize)?;
        if v.is_nan() {
            None
        } else {
            Some(v)
        }
    }

    pub(crate) fn decision(&self, t: u32, qi: usize, sqi: usize, ones: u32) -> Option<&Decision> {
        let slot = if self.star { 0 } else { t as usize - 2 };
        self.decisions.get(slot)?.get(qi)?.get(sqi)?.get(ones as usize)?.as_ref()
    }

    pub(crate) fn horizon(&self) -> u32 {
        if self.star {
            u32::MAX
        } else {
            self.decisions.len() as u32 + 1
        }
    }
}

/// Per observed community, `(P(outcome | theta=1), P(outcome | theta=0))`
/// given everything that community itself could see. On chains this is the
/// marginal over the unobserved past.
pub fn history_likelihoods(engine: &Engine, history: &NeighborhoodRealization) -> Result<Vec<(f64, f64)>, BeliefError> {
    let profile = engine.profile();
    let ss = profile.signal();
    let t = history.t;
    if t == 0 {
        return Err(BeliefError::InvalidHistory("period must be >= 1".into()));
    }
    if t > engine.spec().horizon + 1 {
        return Err(BeliefError::InvalidHistory(format!("period {t} is beyond the horizon")));
    }
    for c in &history.observed {
        if c.ones > c.size || !engine.spec().sizes.contains(c.size) {
            return Err(BeliefError::InvalidHistory(format!(
                "community {} has an impossible size or count",
                c.index
            )));
        }
    }
    match engine.lattice() {
        Lattice::Blind => Err(BeliefError::UnsupportedLattice(
            "stochastic neighborhoods mix unobserved sub-histories".into(),
        )),
        Lattice::Complete => {
            let want: Vec<u32> = (1..t).collect();
            let got: Vec<u32> = history.observed.iter().map(|c| c.index).collect();
            if want != got {
                return Err(BeliefError::InvalidHistory(format!(
                    "complete observation at t = {t} must list communities 1..{}",
                    t - 1
                )));
            }
            let mut l = 0.0;
            let mut out = Vec::with_capacity(history.observed.len());
            for c in &history.observed {
                let public = if c.index == 1 { None } else { Some(l) };
                let d = profile.decide(c.size, public).map_err(strategy_err)?;
                let p1 = d.outcome_prob(ss, c.size, Bit::One, c.ones);
                let p0 = d.outcome_prob(ss, c.size, Bit::Zero, c.ones);
                l += log_ratio(p1, p0);
                out.push((p1, p0));
            }
            Ok(out)
        }
        Lattice::Chain(table) => {
            if t == 1 {
                return if history.observed.is_empty() {
                    Ok(Vec::new())
                } else {
                    Err(BeliefError::InvalidHistory("period 1 observes nothing".into()))
                };
            }
            let src = table.source(t);
            let [c] = history.observed.as_slice() else {
                return Err(BeliefError::InvalidHistory(format!("expected exactly community {src}")));
            };
            if c.index != src {
                return Err(BeliefError::InvalidHistory(format!("expected community {src}, got {}", c.index)));
            }
            let sqi = table.size_index(c.size).expect("size checked");
            let l = table
                .public(src, sqi, c.ones)
                .ok_or_else(|| BeliefError::InvalidHistory("outcome has zero probability".into()))?;
            // Only the ratio is tracked on chains.
            Ok(vec![(l.exp(), 1.0)])
        }
    }
}

/// Exact posterior of state 1 for a size-`q` community with signal `s`
/// after observing `history`.
pub fn posterior_exact(
    engine: &Engine,
    history: &NeighborhoodRealization,
    s: f64,
    q: u32,
) -> Result<Posterior, BeliefError> {
    let ss = engine.profile().signal();
    ss.private_belief(q, s).map_err(|e| BeliefError::InvalidArgument(e.to_string()))?;
    let public: f64 = history_likelihoods(engine, history)?
        .into_iter()
        .map(|(p1, p0)| log_ratio(p1, p0))
        .sum();
    Ok(Posterior::from_log_odds(public + ss.log_likelihood_ratio(q, s), PosteriorMethod::Exact))
}

/// Monte Carlo posterior: re-simulates the process under each state with
/// common random numbers and the observed communities' sizes held fixed,
/// and counts how often the observed outcomes recur. The half-width comes
/// from the delta method on the two binomial likelihood estimates.
pub fn posterior_mc<R: Rng + ?Sized>(
    engine: &Engine,
    history: &NeighborhoodRealization,
    s: f64,
    q: u32,
    replications: u64,
    confidence: f64,
    rng: &mut R,
) -> Result<Posterior, BeliefError> {
    if replications == 0 {
        return Err(BeliefError::InvalidArgument("replications must be >= 1".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(BeliefError::InvalidArgument("confidence must lie in (0, 1)".into()));
    }
    if matches!(engine.lattice(), Lattice::Blind) {
        return Err(BeliefError::UnsupportedLattice(
            "the process cannot be simulated without tracked beliefs".into(),
        ));
    }
    let ss = engine.profile().signal();
    ss.private_belief(q, s).map_err(|e| BeliefError::InvalidArgument(e.to_string()))?;
    let upto = history.t.saturating_sub(1);
    if upto > engine.spec().horizon {
        return Err(BeliefError::InvalidHistory(format!("period {} is beyond the horizon", history.t)));
    }
    let forced: BTreeMap<u32, u32> = history.observed.iter().map(|c| (c.index, c.size)).collect();
    if history.observed.iter().any(|c| c.index == 0 || c.index > upto) {
        return Err(BeliefError::InvalidHistory("observed index outside 1..t-1".into()));
    }
    let base: u64 = rng.gen();
    let mut hits = [0u64; 2];
    let mut buf = Vec::with_capacity(upto as usize);
    for rep in 0..replications {
        let mut stream = ChaCha8Rng::seed_from_u64(base);
        stream.set_stream(rep);
        for th in Bit::BOTH {
            let mut r = stream.clone();
            buf.clear();
            engine.simulate(th, &mut r, &forced, upto, &mut buf);
            let matched = history
                .observed
                .iter()
                .all(|c| buf[c.index as usize - 1].ones == c.ones);
            if matched {
                hits[th.index()] += 1;
            }
        }
    }
    if hits == [0, 0] {
        return Err(BeliefError::Degenerate(replications));
    }
    let n = replications as f64;
    // Continuity correction when only one state ever reproduced the history.
    let est = |h: u64| if h == 0 { 0.5 / n } else { h as f64 / n };
    let (p0, p1) = (est(hits[0]), est(hits[1]));
    let log_odds = p1.ln() - p0.ln() + ss.log_likelihood_ratio(q, s);
    let post = logistic(log_odds);
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + 0.5 * confidence);
    let var = (1.0 - p1) / (n * p1) + (1.0 - p0) / (n * p0);
    let half_width = z * post * (1.0 - post) * var.sqrt();
    Ok(Posterior::from_log_odds(
        log_odds,
        PosteriorMethod::MonteCarlo { half_width, confidence },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_bounds_linear() {
        let ss = SignalStructure::linear_symmetric();
        let b = belief_step_bounds(&ss, 1, 0.25).unwrap();
        assert_eq!((b.s0, b.s1), (-0.5, 0.5));
        assert_eq!(b.ratio_bound_y, 0.6);
        assert_eq!(b.floor_w, 0.0625);
        assert_eq!(ss.cdf(1, Bit::One, 0.5), 0.5625);
        assert_eq!(ss.cdf(1, Bit::Zero, 0.5), 0.9375);
        assert!(matches!(belief_step_bounds(&ss, 1, 0.5), Err(BeliefError::InvalidEpsilon(_))));
    }

    #[test]
    fn generic_solver_agrees_on_symmetric_tables() {
        use crate::signal::{SignalFamily, TabulatedDensities};
        use std::sync::Arc;
        let tab = TabulatedDensities::from_fns(401, |s| (1.0 - 0.5 * s) / 2.0, |s| (1.0 + 0.5 * s) / 2.0).unwrap();
        let ss = SignalStructure::new(SignalFamily::Custom(Arc::new(tab)));
        let bm = SignalStructure::bounded_mixture(0.5).unwrap();
        let a = belief_step_bounds(&ss, 1, 0.1).unwrap();
        let b = belief_step_bounds(&bm, 1, 0.1).unwrap();
        assert!((a.s0 - b.s0).abs() < 1e-6 && (a.s1 - b.s1).abs() < 1e-6, "{a:?} {b:?}");
        assert!((a.ratio_bound_y - b.ratio_bound_y).abs() < 1e-6);
        for th in Bit::BOTH {
            let m = ss.cdf(1, th, a.s1) - ss.cdf(1, th, a.s0);
            assert!((m - 0.8).abs() < 1e-9);
        }
    }

    #[test]
    fn reversal_examples() {
        assert_eq!(reversal_horizon(0.75, 0.5, 0.6).unwrap(), 3);
        assert_eq!(reversal_horizon(0.5, 0.75, 0.6).unwrap(), 0);
        assert_eq!(reversal_horizon(0.9, 0.899, 0.6).unwrap(), 1);
        assert!(reversal_horizon(0.9, 0.5, 1.0).is_err());
    }

    #[test]
    fn reversal_recursion_values() {
        let step = |r: f64| r / (r + (1.0 - r) / 0.6);
        let a = step(0.75);
        let b = step(a);
        let c = step(b);
        assert!((a - 0.642857).abs() < 1e-6);
        assert!((b - 0.519231).abs() < 1e-6);
        assert!((c - 0.393204).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn reversal_monotone(r in 0.51f64..0.99, rh in 0.01f64..0.5, y1 in 0.05f64..0.95, dy in 0.0f64..0.04, dr in 0.0f64..0.009) {
            let y2 = y1 + dy;
            // More informative steps (smaller y) never need more periods.
            prop_assert!(reversal_horizon(r, rh, y1).unwrap() <= reversal_horizon(r, rh, y2).unwrap());
            prop_assert!(reversal_horizon(r, rh, y1).unwrap() <= reversal_horizon(r + dr, rh, y1).unwrap());
        }

        #[test]
        fn step_bounds_in_range(lambda in 0.05f64..1.0, eps in 0.01f64..0.49) {
            let ss = if lambda >= 1.0 { SignalStructure::linear_symmetric() } else { SignalStructure::bounded_mixture(lambda).unwrap() };
            let b = belief_step_bounds(&ss, 1, eps).unwrap();
            prop_assert!(b.ratio_bound_y > 0.0 && b.ratio_bound_y < 1.0);
            prop_assert!(b.floor_w > 0.0 && b.floor_w < 1.0);
        }
    }
}

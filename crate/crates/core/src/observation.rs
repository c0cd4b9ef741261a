//! Who observes whom: exogenous neighborhood generators and the costly
//! endogenous regime.
//!
//! Communities are indexed from 1. The neighborhood `B^t` of period `t` is a
//! set of predecessor indices `tau < t`; period 1 always observes nothing.
//! The structural conditions on these generators are asymptotic, so the
//! checks here are finite-horizon proxies that report the horizon and
//! tolerance they used.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservationError {
    #[error("{0} is not defined for endogenous observation; neighborhoods are chosen by the strategy")]
    Endogenous(&'static str),
    #[error("{0} requires an endogenous scheme")]
    Exogenous(&'static str),
    #[error("period must be at least 1")]
    Period,
    #[error("pattern probabilities sum to {0}, expected 1 within 1e-9")]
    ProbabilitySum(f64),
    #[error("invalid observation parameter: {0}")]
    InvalidParameter(String),
}

/// The capacity `K(t)` of the endogenous regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacitySchedule {
    Constant(u32),
    /// `K(t) = t - 1`, floored at 1.
    Predecessors,
    /// `K(t) = ceil(log2(t + 1))`.
    Log2,
}

impl CapacitySchedule {
    pub fn at(&self, t: u32) -> u32 {
        match *self {
            CapacitySchedule::Constant(k) => k,
            CapacitySchedule::Predecessors => t.saturating_sub(1).max(1),
            CapacitySchedule::Log2 => {
                let x = t as u64 + 1;
                // ceil(log2(x)) for x >= 2
                64 - (x - 1).leading_zeros()
            }
        }
    }
}

impl fmt::Display for CapacitySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapacitySchedule::Constant(k) => write!(f, "constant({k})"),
            CapacitySchedule::Predecessors => f.write_str("t-1"),
            CapacitySchedule::Log2 => f.write_str("ceil(log2(t+1))"),
        }
    }
}

/// A subset of predecessors described relative to the current period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    /// The `k` most recent communities.
    LastK(u32),
    /// `t - d` for each offset `d >= 1`.
    Offsets(Vec<u32>),
    /// Communities `1..=k`.
    FirstK(u32),
    All,
    Empty,
}

impl Pattern {
    /// The indices this pattern selects at period `t`, ascending.
    pub fn resolve(&self, t: u32) -> Vec<u32> {
        let prev = t.saturating_sub(1);
        match self {
            Pattern::LastK(k) => (prev.saturating_sub(*k) + 1..=prev).collect(),
            Pattern::Offsets(ds) => {
                let set: BTreeSet<u32> = ds.iter().filter(|&&d| d >= 1 && d < t).map(|d| t - d).collect();
                set.into_iter().collect()
            }
            Pattern::FirstK(k) => (1..=prev.min(*k)).collect(),
            Pattern::All => (1..=prev).collect(),
            Pattern::Empty => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternEntry {
    pub pattern: Pattern,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    Star,
    Line,
    Complete,
    /// The same distribution over relative patterns in every period, drawn
    /// independently of signals and sizes.
    CustomStochastic(Vec<PatternEntry>),
    Endogenous { cost: f64, capacity: CapacitySchedule },
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Star => "star",
            SchemeKind::Line => "line",
            SchemeKind::Complete => "complete",
            SchemeKind::CustomStochastic(_) => "custom",
            SchemeKind::Endogenous { .. } => "endogenous",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationScheme {
    pub kind: SchemeKind,
    pub horizon: u32,
}

/// Outcome of a finite-horizon structural check.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyReport {
    pub passed: bool,
    pub horizon: u32,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl ObservationScheme {
    pub fn new(kind: SchemeKind, horizon: u32) -> Result<Self, ObservationError> {
        let scheme = Self { kind, horizon };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn star(horizon: u32) -> Self {
        Self { kind: SchemeKind::Star, horizon }
    }

    pub fn line(horizon: u32) -> Self {
        Self { kind: SchemeKind::Line, horizon }
    }

    pub fn complete(horizon: u32) -> Self {
        Self { kind: SchemeKind::Complete, horizon }
    }

    pub fn endogenous(cost: f64, capacity: CapacitySchedule, horizon: u32) -> Result<Self, ObservationError> {
        Self::new(SchemeKind::Endogenous { cost, capacity }, horizon)
    }

    pub fn validate(&self) -> Result<(), ObservationError> {
        if self.horizon == 0 {
            return Err(ObservationError::InvalidParameter("horizon must be >= 1".into()));
        }
        match &self.kind {
            SchemeKind::CustomStochastic(entries) => {
                if entries.is_empty() {
                    return Err(ObservationError::InvalidParameter("custom scheme has no patterns".into()));
                }
                if entries.iter().any(|e| !(e.prob >= 0.0) || !e.prob.is_finite()) {
                    return Err(ObservationError::InvalidParameter("pattern probabilities must be >= 0".into()));
                }
                let total: f64 = entries.iter().map(|e| e.prob).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(ObservationError::ProbabilitySum(total));
                }
            }
            SchemeKind::Endogenous { cost, capacity } => {
                if !(cost.is_finite() && *cost > 0.0) {
                    return Err(ObservationError::InvalidParameter("cost must be > 0".into()));
                }
                if *capacity == CapacitySchedule::Constant(0) {
                    return Err(ObservationError::InvalidParameter("capacity must be >= 1".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn is_endogenous(&self) -> bool {
        matches!(self.kind, SchemeKind::Endogenous { .. })
    }

    /// Exact distribution of `B^t` as (sorted indices, probability), with
    /// duplicate sets merged.
    pub fn neighborhood_distribution(&self, t: u32) -> Result<Vec<(Vec<u32>, f64)>, ObservationError> {
        if t == 0 {
            return Err(ObservationError::Period);
        }
        let prev = t - 1;
        let single = |v: Vec<u32>| vec![(v, 1.0)];
        Ok(match &self.kind {
            SchemeKind::Star => single(if t >= 2 { vec![1] } else { vec![] }),
            SchemeKind::Line => single(if t >= 2 { vec![prev] } else { vec![] }),
            SchemeKind::Complete => single((1..=prev).collect()),
            SchemeKind::CustomStochastic(entries) => {
                let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
                for e in entries {
                    *merged.entry(e.pattern.resolve(t)).or_insert(0.0) += e.prob;
                }
                merged.into_iter().filter(|(_, p)| *p > 0.0).collect()
            }
            SchemeKind::Endogenous { .. } => return Err(ObservationError::Endogenous("neighborhood distribution")),
        })
    }

    /// Draws `B^t`. Deterministic kinds consume no randomness.
    pub fn realize_neighborhood<R: Rng + ?Sized>(&self, t: u32, rng: &mut R) -> Result<Vec<u32>, ObservationError> {
        if t == 0 {
            return Err(ObservationError::Period);
        }
        match &self.kind {
            SchemeKind::CustomStochastic(entries) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for e in entries {
                    acc += e.prob;
                    if u < acc {
                        return Ok(e.pattern.resolve(t));
                    }
                }
                Ok(entries.last().map(|e| e.pattern.resolve(t)).unwrap_or_default())
            }
            SchemeKind::Endogenous { .. } => Err(ObservationError::Endogenous("realize_neighborhood")),
            _ => Ok(self.neighborhood_distribution(t)?.remove(0).0),
        }
    }

    /// Union of every neighborhood period `t` can draw (`B̄^t`).
    pub fn possible_neighborhood(&self, t: u32) -> Result<BTreeSet<u32>, ObservationError> {
        Ok(self
            .neighborhood_distribution(t)?
            .into_iter()
            .flat_map(|(b, _)| b)
            .collect())
    }

    /// Expanding-observation proxy: for each `K` in a doubling grid below the
    /// horizon, the probability at `t = horizon` that no community with index
    /// `>= K` is observed must be at most `prob_tol`.
    pub fn check_expanding(&self, horizon: u32, prob_tol: f64) -> Result<ProxyReport, ObservationError> {
        if self.is_endogenous() {
            return Err(ObservationError::Endogenous("check_expanding"));
        }
        let dist = self.neighborhood_distribution(horizon.max(1))?;
        let mut k = 1u32;
        while k < horizon {
            let stale: f64 = dist
                .iter()
                .filter(|(b, _)| b.iter().max().copied().unwrap_or(0) < k)
                .map(|(_, p)| p)
                .sum();
            if stale > prob_tol {
                return Ok(ProxyReport {
                    passed: false,
                    horizon,
                    tolerance: Some(prob_tol),
                    detail: format!("P(max observed index < {k}) = {stale} at t = {horizon}"),
                });
            }
            k *= 2;
        }
        Ok(ProxyReport {
            passed: horizon >= 2,
            horizon,
            tolerance: Some(prob_tol),
            detail: "recent communities observed at every grid K".into(),
        })
    }

    /// Infinite-complete-observation proxy over checkpoints `t = 2, 4, 8, ...`
    /// up to the horizon: the smallest possible `|B^t|` must strictly grow,
    /// and every neighborhood must contain `B̄^tau` for each observed `tau`.
    pub fn check_infinite_complete(&self, horizon: u32) -> Result<ProxyReport, ObservationError> {
        if self.is_endogenous() {
            return Err(ObservationError::Endogenous("check_infinite_complete"));
        }
        let report = |passed, detail: String| ProxyReport {
            passed,
            horizon,
            tolerance: None,
            detail,
        };
        let mut checkpoints = Vec::new();
        let mut t = 2u32;
        while t <= horizon {
            checkpoints.push(t);
            t = match t.checked_mul(2) {
                Some(n) => n,
                None => break,
            };
        }
        if checkpoints.len() < 2 {
            return Ok(report(false, format!("horizon {horizon} leaves fewer than two checkpoints")));
        }
        let mut last_min = None;
        for &t in &checkpoints {
            let dist = self.neighborhood_distribution(t)?;
            let min_size = dist.iter().map(|(b, _)| b.len()).min().unwrap_or(0);
            if let Some(prev) = last_min {
                if min_size <= prev {
                    return Ok(report(false, format!("neighborhood size stalls at {min_size} by t = {t}")));
                }
            }
            last_min = Some(min_size);
            for (b, _) in &dist {
                let set: BTreeSet<u32> = b.iter().copied().collect();
                for &tau in b {
                    let inner = self.possible_neighborhood(tau)?;
                    if !inner.is_subset(&set) {
                        return Ok(report(
                            false,
                            format!("at t = {t} community {tau} saw communities the observer does not"),
                        ));
                    }
                }
            }
        }
        Ok(report(true, format!("checkpoints {:?}", checkpoints)))
    }

    /// Whether `K(t)` grows without bound, proxied by strict growth across the
    /// checkpoints `2, 4, 8, ...` up to the horizon.
    pub fn capacity_limit_infinite(&self, horizon: u32) -> Result<ProxyReport, ObservationError> {
        let SchemeKind::Endogenous { capacity, .. } = &self.kind else {
            return Err(ObservationError::Exogenous("capacity_limit_infinite"));
        };
        let mut t = 4u32;
        let mut last = capacity.at(2);
        let mut steps = 0;
        while t <= horizon {
            let k = capacity.at(t);
            if k <= last {
                return Ok(ProxyReport {
                    passed: false,
                    horizon,
                    tolerance: None,
                    detail: format!("K stalls at {k} by t = {t}"),
                });
            }
            last = k;
            steps += 1;
            t = t.saturating_mul(2);
        }
        Ok(ProxyReport {
            passed: steps >= 2,
            horizon,
            tolerance: None,
            detail: format!("K reaches {last} by the last checkpoint"),
        })
    }
}

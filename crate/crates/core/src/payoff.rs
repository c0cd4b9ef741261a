//! The per-agent payoff `u(theta, a, m)`, where `m` counts the agents in the
//! community (including the agent) who chose the same action.
//!
//! Three assumptions are checked by [`PayoffSpec::validate_assumptions`]:
//!
//! 1. `u` is strictly increasing in `m` (coordination) or strictly decreasing
//!    in `m` (separation).
//! 2. matching the state pays more at every `m`:
//!    `u(0,0,m) = u(1,1,m) > u(1,0,m) = u(0,1,m)`.
//! 3. coordination only: some finite `m` has `u(a,b,m) > u(a,1-b,1)` for all
//!    four `(a, b)` pairs at once.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Zero};
use thiserror::Error;

use crate::bit::{Action, Bit, State};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PayoffError {
    #[error("conformer count must be at least 1, got {0}")]
    ConformerCount(u32),
    #[error("conformer count {m} exceeds the tabulated maximum {max}")]
    BeyondTable { m: u32, max: u32 },
    #[error("no community size up to {bound} reaches the conformity threshold")]
    ThresholdNotFound { bound: u32 },
    #[error("operation requires {expected} payoffs")]
    WrongMode { expected: PayoffMode },
    #[error("invalid payoff parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid payoff table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffMode {
    Coordination,
    Separation,
}

impl fmt::Display for PayoffMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffMode::Coordination => f.write_str("coordination"),
            PayoffMode::Separation => f.write_str("separation"),
        }
    }
}

/// Explicit `u(theta, a, m)` values for `m = 1..=max_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTable {
    values: BTreeMap<(u8, u8, u32), f64>,
    max_m: u32,
}

impl PayoffTable {
    pub fn from_fn(max_m: u32, f: impl Fn(State, Action, u32) -> f64) -> Self {
        let mut values = BTreeMap::new();
        for th in Bit::BOTH {
            for a in Bit::BOTH {
                for m in 1..=max_m {
                    values.insert((th.as_u8(), a.as_u8(), m), f(th, a, m));
                }
            }
        }
        Self { values, max_m }
    }

    /// Parses `theta a m value` rows. Every `(theta, a)` pair must cover
    /// `m = 1..=max` with the same `max`.
    pub fn parse(text: &str) -> Result<Self, PayoffError> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|c| !c.is_empty()).collect();
            let bad = || PayoffError::Table(format!("line {}: expected `theta a m value`", lineno + 1));
            if cols.len() != 4 {
                return Err(bad());
            }
            let th: u8 = cols[0].parse().map_err(|_| bad())?;
            let a: u8 = cols[1].parse().map_err(|_| bad())?;
            let m: u32 = cols[2].parse().map_err(|_| bad())?;
            let v: f64 = cols[3].parse().map_err(|_| bad())?;
            if th > 1 || a > 1 || m == 0 || !v.is_finite() {
                return Err(bad());
            }
            values.insert((th, a, m), v);
        }
        let max_m = values.keys().map(|k| k.2).max().ok_or_else(|| PayoffError::Table("empty table".into()))?;
        for th in 0..2u8 {
            for a in 0..2u8 {
                for m in 1..=max_m {
                    if !values.contains_key(&(th, a, m)) {
                        return Err(PayoffError::Table(format!("missing entry theta={th} a={a} m={m}")));
                    }
                }
            }
        }
        Ok(Self { values, max_m })
    }

    pub fn load(path: &Path) -> Result<Self, PayoffError> {
        let text = fs::read_to_string(path).map_err(|e| PayoffError::Table(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn max_m(&self) -> u32 {
        self.max_m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PayoffForm {
    /// `base + match_bonus * 1{a = theta} + beta * (m - 1)`.
    Linear { base: f64, match_bonus: f64, beta: f64 },
    /// `(base + match_bonus * 1{a = theta}) * (1 + beta * (m - 1))`: the
    /// stakes of matching the state grow with the number of conformers.
    Scaled { base: f64, match_bonus: f64, beta: f64 },
    /// `match_bonus * 1{a = theta} + kappa / m`, a congestion payoff.
    InverseCrowd { match_bonus: f64, kappa: f64 },
    Tabulated(PayoffTable),
}

/// A payoff function plus its mode and the `m` range scanned by checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSpec {
    pub form: PayoffForm,
    pub mode: PayoffMode,
    pub m_bound: u32,
}

pub const DEFAULT_M_BOUND: u32 = 64;

/// One failed assumption, with the first witness found.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotPositive { theta: State, action: Action, m: u32 },
    /// Assumption 1.
    NotMonotone { theta: State, action: Action, m: u32 },
    /// Assumption 2.
    NoMatchPremium { m: u32 },
    /// Assumption 3.
    NoConformityDominance { bound: u32 },
}

impl Violation {
    pub fn assumption(&self) -> u8 {
        match self {
            Violation::NotPositive { .. } => 0,
            Violation::NotMonotone { .. } => 1,
            Violation::NoMatchPremium { .. } => 2,
            Violation::NoConformityDominance { .. } => 3,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotPositive { theta, action, m } => {
                write!(f, "positivity: u({theta},{action},{m}) <= 0")
            }
            Violation::NotMonotone { theta, action, m } => write!(
                f,
                "assumption 1 (monotone in conformers): fails between m={m} and m={} at theta={theta}, a={action}",
                m + 1
            ),
            Violation::NoMatchPremium { m } => write!(
                f,
                "assumption 2 (symmetric premium for matching the state): fails at m={m}"
            ),
            Violation::NoConformityDominance { bound } => write!(
                f,
                "assumption 3 (conformity dominates for large m): no m <= {bound} has u(a,b,m) > u(a,1-b,1) for all a, b"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssumptionReport {
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, assumption: u8) -> bool {
        self.violations.iter().any(|v| v.assumption() == assumption)
    }
}

impl PayoffSpec {
    pub fn linear(base: f64, match_bonus: f64, beta: f64) -> Self {
        Self {
            form: PayoffForm::Linear { base, match_bonus, beta },
            mode: PayoffMode::Coordination,
            m_bound: DEFAULT_M_BOUND,
        }
    }

    pub fn scaled(base: f64, match_bonus: f64, beta: f64) -> Self {
        Self {
            form: PayoffForm::Scaled { base, match_bonus, beta },
            mode: PayoffMode::Coordination,
            m_bound: DEFAULT_M_BOUND,
        }
    }

    /// Separation payoff `1{a = theta} + kappa / m`.
    pub fn separation(kappa: f64) -> Self {
        Self {
            form: PayoffForm::InverseCrowd { match_bonus: 1.0, kappa },
            mode: PayoffMode::Separation,
            m_bound: DEFAULT_M_BOUND,
        }
    }

    pub fn tabulated(table: PayoffTable, mode: PayoffMode) -> Self {
        let m_bound = table.max_m();
        Self {
            form: PayoffForm::Tabulated(table),
            mode,
            m_bound,
        }
    }

    /// The default coordination payoff: base 0.1, match bonus 1, increment 0.25.
    pub fn default_coordination() -> Self {
        Self::linear(0.1, 1.0, 0.25)
    }

    pub fn with_m_bound(mut self, m_bound: u32) -> Self {
        self.m_bound = m_bound;
        self
    }

    /// Parameter sanity (finite, signs) independent of the assumptions.
    pub fn check_parameters(&self) -> Result<(), PayoffError> {
        let bad = |what: &str| Err(PayoffError::InvalidParameter(what.to_string()));
        match &self.form {
            PayoffForm::Linear { base, match_bonus, beta } | PayoffForm::Scaled { base, match_bonus, beta } => {
                if !(base.is_finite() && *base > 0.0) {
                    return bad("base must be finite and > 0");
                }
                if !(match_bonus.is_finite() && *match_bonus > 0.0) {
                    return bad("match_bonus must be finite and > 0");
                }
                if !beta.is_finite() {
                    return bad("beta must be finite");
                }
            }
            PayoffForm::InverseCrowd { match_bonus, kappa } => {
                if !(match_bonus.is_finite() && *match_bonus > 0.0) {
                    return bad("match_bonus must be finite and > 0");
                }
                if !(kappa.is_finite() && *kappa > 0.0) {
                    return bad("kappa must be finite and > 0");
                }
            }
            PayoffForm::Tabulated(_) => {}
        }
        if self.m_bound == 0 {
            return bad("m_bound must be >= 1");
        }
        Ok(())
    }

    /// `u(theta, a, m)`.
    pub fn utility(&self, theta: State, a: Action, m: u32) -> Result<f64, PayoffError> {
        if m < 1 {
            return Err(PayoffError::ConformerCount(m));
        }
        let hit = if theta == a { 1.0 } else { 0.0 };
        Ok(match &self.form {
            PayoffForm::Linear { base, match_bonus, beta } => base + match_bonus * hit + beta * (m - 1) as f64,
            PayoffForm::Scaled { base, match_bonus, beta } => {
                (base + match_bonus * hit) * (1.0 + beta * (m - 1) as f64)
            }
            PayoffForm::InverseCrowd { match_bonus, kappa } => match_bonus * hit + kappa / m as f64,
            PayoffForm::Tabulated(t) => {
                if m > t.max_m {
                    return Err(PayoffError::BeyondTable { m, max: t.max_m });
                }
                t.values[&(theta.as_u8(), a.as_u8(), m)]
            }
        })
    }

    /// `u` evaluated in exact rational arithmetic; every `f64` parameter is
    /// converted without rounding.
    pub fn utility_exact(&self, theta: State, a: Action, m: u32) -> Result<BigRational, PayoffError> {
        if m < 1 {
            return Err(PayoffError::ConformerCount(m));
        }
        let hit = if theta == a { BigRational::one() } else { BigRational::zero() };
        let int = |k: u32| BigRational::from_integer(BigInt::from(k));
        Ok(match &self.form {
            PayoffForm::Linear { base, match_bonus, beta } => {
                exact(*base) + exact(*match_bonus) * hit + exact(*beta) * int(m - 1)
            }
            PayoffForm::Scaled { base, match_bonus, beta } => {
                (exact(*base) + exact(*match_bonus) * hit) * (BigRational::one() + exact(*beta) * int(m - 1))
            }
            PayoffForm::InverseCrowd { match_bonus, kappa } => exact(*match_bonus) * hit + exact(*kappa) / int(m),
            PayoffForm::Tabulated(_) => exact(self.utility(theta, a, m)?),
        })
    }

    /// Convenience accessor panicking on invalid `m`; internal hot paths only.
    pub(crate) fn u(&self, theta: State, a: Action, m: u32) -> f64 {
        self.utility(theta, a, m).expect("conformer count in range")
    }

    /// Largest `m` for which `u` is defined (tables are finite).
    pub fn max_defined_m(&self) -> u32 {
        match &self.form {
            PayoffForm::Tabulated(t) => t.max_m,
            _ => u32::MAX,
        }
    }

    /// Checks the assumptions over `m = 1..=m_bound`.
    pub fn validate_assumptions(&self) -> AssumptionReport {
        let mut report = AssumptionReport::default();
        let bound = self.m_bound.min(self.max_defined_m());
        let u = |th, a, m| self.u(th, a, m);
        'pos: for th in Bit::BOTH {
            for a in Bit::BOTH {
                for m in 1..=bound {
                    if !(u(th, a, m) > 0.0) {
                        report.violations.push(Violation::NotPositive { theta: th, action: a, m });
                        break 'pos;
                    }
                }
            }
        }
        'mono: for th in Bit::BOTH {
            for a in Bit::BOTH {
                for m in 1..bound {
                    let ok = match self.mode {
                        PayoffMode::Coordination => u(th, a, m + 1) > u(th, a, m),
                        PayoffMode::Separation => u(th, a, m + 1) < u(th, a, m),
                    };
                    if !ok {
                        report.violations.push(Violation::NotMonotone { theta: th, action: a, m });
                        break 'mono;
                    }
                }
            }
        }
        for m in 1..=bound {
            let (u00, u11) = (u(Bit::Zero, Bit::Zero, m), u(Bit::One, Bit::One, m));
            let (u10, u01) = (u(Bit::One, Bit::Zero, m), u(Bit::Zero, Bit::One, m));
            if !(u00 == u11 && u10 == u01 && u11 > u10) {
                report.violations.push(Violation::NoMatchPremium { m });
                break;
            }
        }
        if self.mode == PayoffMode::Coordination {
            let dominates = (1..=bound).any(|m| {
                Bit::BOTH
                    .iter()
                    .all(|&th| Bit::BOTH.iter().all(|&a| u(th, a, m) > u(th, a.flip(), 1)))
            });
            if !dominates {
                report.violations.push(Violation::NoConformityDominance { bound });
            }
        }
        report
    }

    /// Smallest community size `Q` with `u(1,0,Q) >= u(1,1,1)`: from there on
    /// any unanimous profile is a mutual best response at every interior
    /// belief.
    pub fn conformity_threshold(&self) -> Result<u32, PayoffError> {
        if self.mode != PayoffMode::Coordination {
            return Err(PayoffError::WrongMode {
                expected: PayoffMode::Coordination,
            });
        }
        let target = self.utility(Bit::One, Bit::One, 1)?;
        let bound = self.m_bound.min(self.max_defined_m());
        (1..=bound)
            .find(|&q| self.u(Bit::One, Bit::Zero, q) >= target)
            .ok_or(PayoffError::ThresholdNotFound { bound })
    }

    /// Expected payoff of action `a` shared by `m` conformers when the
    /// probability of state 1 is `p`.
    pub fn expected(&self, p: f64, a: Action, m: u32) -> f64 {
        p * self.u(Bit::One, a, m) + (1.0 - p) * self.u(Bit::Zero, a, m)
    }
}

pub(crate) fn exact(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite payoff value")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utility_examples() {
        let p = PayoffSpec::default_coordination();
        assert!((p.utility(Bit::One, Bit::One, 3).unwrap() - 1.6).abs() < 1e-15);
        assert_eq!(p.utility(Bit::One, Bit::Zero, 1).unwrap(), 0.1);
        for m in 1..30 {
            assert_eq!(p.utility(Bit::Zero, Bit::Zero, m), p.utility(Bit::One, Bit::One, m));
            assert_eq!(p.utility(Bit::One, Bit::Zero, m), p.utility(Bit::Zero, Bit::One, m));
        }
        assert_eq!(p.utility(Bit::One, Bit::One, 0), Err(PayoffError::ConformerCount(0)));
    }

    #[test]
    fn validation_examples() {
        assert!(PayoffSpec::default_coordination().validate_assumptions().passed());
        let flat = PayoffSpec::linear(0.1, 1.0, 0.0).validate_assumptions();
        assert!(flat.violates(3));
        let falling = PayoffSpec::linear(5.0, 1.0, -0.05).validate_assumptions();
        assert!(falling.violates(1));
        assert!(PayoffSpec::separation(2.0).validate_assumptions().passed());
        assert!(PayoffSpec::scaled(0.1, 1.0, 0.25).validate_assumptions().passed());
        let asym = PayoffSpec::tabulated(
            PayoffTable::from_fn(10, |th, a, m| if th == a { 1.0 + th.index() as f64 } else { 0.1 } + m as f64),
            PayoffMode::Coordination,
        );
        assert!(asym.validate_assumptions().violates(2));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(PayoffSpec::default_coordination().conformity_threshold(), Ok(5));
        assert_eq!(PayoffSpec::linear(0.1, 1.0, 1.0).conformity_threshold(), Ok(2));
        assert!(matches!(
            PayoffSpec::linear(0.1, 1.0, 0.0).conformity_threshold(),
            Err(PayoffError::ThresholdNotFound { .. })
        ));
        assert!(PayoffSpec::separation(1.0).conformity_threshold().is_err());
    }

    #[test]
    fn threshold_makes_unanimity_a_best_response() {
        let spec = PayoffSpec::default_coordination();
        let qhat = spec.conformity_threshold().unwrap();
        for q in qhat..qhat + 10 {
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let stay1 = spec.expected(p, Bit::One, q);
                let dev1 = spec.expected(p, Bit::Zero, 1);
                let stay0 = spec.expected(p, Bit::Zero, q);
                let dev0 = spec.expected(p, Bit::One, 1);
                assert!(stay1 >= dev1 && stay0 >= dev0, "q={q} p={p}");
            }
        }
        // Below the threshold some belief breaks the unanimous-wrong profile.
        for q in 1..qhat {
            let witness = (1..100).map(|i| i as f64 / 100.0).find(|&p| {
                spec.expected(p, Bit::Zero, q) < spec.expected(p, Bit::One, 1)
            });
            assert!(witness.is_some(), "q={q}");
        }
    }

    #[test]
    fn table_parse_and_exact() {
        let mut text = String::new();
        for th in 0..2 {
            for a in 0..2 {
                for m in 1..=3 {
                    let v = if th == a { 1.1 } else { 0.1 } + 0.25 * (m - 1) as f64;
                    text.push_str(&format!("{th} {a} {m} {v}\n"));
                }
            }
        }
        let t = PayoffTable::parse(&text).unwrap();
        let spec = PayoffSpec::tabulated(t, PayoffMode::Coordination);
        assert_eq!(spec.utility(Bit::One, Bit::One, 3).unwrap(), 1.6);
        assert!(matches!(spec.utility(Bit::One, Bit::One, 4), Err(PayoffError::BeyondTable { .. })));
        assert!(PayoffTable::parse("0 0 1 1.0\n").is_err());
        let lin = PayoffSpec::default_coordination();
        let e = lin.utility_exact(Bit::One, Bit::Zero, 5).unwrap();
        assert_eq!(e, exact(0.1) + exact(1.0));
    }
}

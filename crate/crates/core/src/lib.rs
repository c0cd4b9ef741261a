//! Sequential Bayesian social learning with coordination motives.
//!
//! Communities of agents move one period at a time. Every agent in a
//! community shares one private signal about a binary state and one set of
//! observed predecessor actions, and is paid more for matching the state and
//! for matching its peers. This crate provides:
//!
//! * [`signal`]: conditional signal densities, private beliefs and sampling.
//! * [`payoff`]: the utility `u(theta, a, m)`, assumption checks and the
//!   conformity threshold.
//! * [`observation`]: exogenous neighborhood generators and the costly
//!   endogenous regime, with finite-horizon structural checks.
//! * [`belief`]: exact likelihood recursions, Monte Carlo likelihoods and the
//!   bound quantities used by the cutoff construction.
//! * [`strategy`]: every decision profile plus best-response, unanimity,
//!   risk-dominance and separation oracles.
//! * [`sim`]: the period-by-period driver and learning-curve aggregation.
//! * [`scenario`]: config files, presets and CSV/metadata output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod observation;
pub mod payoff;
pub mod scenario;
pub mod signal;
pub mod sim;
pub mod strategy;

mod bit;
mod fmt;
mod root;

pub use belief::{BeliefBounds, BeliefError, Posterior, PosteriorMethod};
pub use bit::{Action, Bit, State};
pub use fmt::sig6;
pub use observation::{CapacitySchedule, ObservationError, ObservationScheme, SchemeKind};
pub use payoff::{PayoffError, PayoffForm, PayoffMode, PayoffSpec};
pub use signal::{BeliefClass, SignalError, SignalFamily, SignalStructure};
pub use sim::{LearningCurve, ScenarioSpec, SimError, SimulationTrace, SizeDistribution};
pub use strategy::{StrategyError, StrategyKind, StrategyProfile};

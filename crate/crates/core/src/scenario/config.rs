use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::bit::Bit;
use crate::observation::{CapacitySchedule, ObservationScheme, Pattern, PatternEntry, SchemeKind};
use crate::payoff::{PayoffForm, PayoffMode, PayoffSpec, PayoffTable};
use crate::signal::{SignalFamily, SignalStructure, TabulatedDensities};
use crate::sim::{ScenarioSpec, SimError, SizeDistribution, DEFAULT_HERD_WINDOW};
use crate::strategy::{OnPathRule, Prescription, StrategyKind};

use super::{presets, ScenarioError};

/// Grid size used for `power_tilt` families unless `grid` is given.
pub const DEFAULT_TILT_GRID: usize = 4001;

/// Problems with the config text itself. Values that parse but fail a
/// model check surface later as [`SimError`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("missing [{0}] section")]
    MissingSection(&'static str),
    #[error("[{section}] missing key `{key}`")]
    MissingKey { section: &'static str, key: &'static str },
    #[error("[{section}] `{key}`: {message}")]
    BadValue {
        section: &'static str,
        key: &'static str,
        message: String,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{0}")]
    Io(String),
}

/// An integer or float literal.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
}

impl Num {
    pub fn get(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Float(x) => x,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSignal {
    pub family: Option<String>,
    pub lambda: Option<Num>,
    pub exponent: Option<u32>,
    pub grid: Option<usize>,
    pub density0: Option<PathBuf>,
    pub density1: Option<PathBuf>,
    /// Only inside `overrides`.
    pub size: Option<u32>,
    #[serde(default)]
    pub overrides: Vec<RawSignal>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPayoff {
    pub form: Option<String>,
    pub mode: Option<String>,
    pub base: Option<Num>,
    pub match_bonus: Option<Num>,
    pub beta: Option<Num>,
    pub kappa: Option<Num>,
    pub table: Option<PathBuf>,
    pub m_bound: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RawCapacity {
    Constant(u32),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPattern {
    pub kind: String,
    pub k: Option<u32>,
    pub offsets: Option<Vec<u32>>,
    pub prob: Num,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawObservation {
    pub scheme: Option<String>,
    pub cost: Option<Num>,
    pub capacity: Option<RawCapacity>,
    #[serde(default)]
    pub patterns: Vec<RawPattern>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStrategy {
    pub kind: Option<String>,
    pub epsilon: Option<Num>,
    pub prescription: Option<String>,
    pub on_path: Option<String>,
    pub punish: Option<bool>,
    pub iterations: Option<u32>,
    pub action: Option<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulation {
    pub horizon: Option<u32>,
    pub replications: Option<u64>,
    pub seed: Option<u64>,
    pub herd_window: Option<u32>,
    pub size: Option<u32>,
    pub sizes: Option<Vec<(u32, Num)>>,
    pub forced_state: Option<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<String>,
    pub signal: Option<RawSignal>,
    pub payoff: Option<RawPayoff>,
    pub observation: Option<RawObservation>,
    pub strategy: Option<RawStrategy>,
    pub simulation: Option<RawSimulation>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })
    }

    /// `self` layered over `base`: model sections replace whole sections,
    /// `[simulation]` keys replace individual keys.
    fn over(self, base: RawConfig) -> RawConfig {
        let simulation = match (self.simulation, base.simulation) {
            (Some(s), Some(b)) => Some(RawSimulation {
                horizon: s.horizon.or(b.horizon),
                replications: s.replications.or(b.replications),
                seed: s.seed.or(b.seed),
                herd_window: s.herd_window.or(b.herd_window),
                size: if s.sizes.is_some() { s.size } else { s.size.or(b.size) },
                sizes: if s.size.is_some() { s.sizes } else { s.sizes.or(b.sizes) },
                forced_state: s.forced_state.or(b.forced_state),
            }),
            (s, b) => s.or(b),
        };
        RawConfig {
            preset: self.preset.or(base.preset),
            signal: self.signal.or(base.signal),
            payoff: self.payoff.or(base.payoff),
            observation: self.observation.or(base.observation),
            strategy: self.strategy.or(base.strategy),
            simulation,
        }
    }
}

/// A parsed config with its preset resolved. Relative table paths resolve
/// against `base_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub raw: RawConfig,
    pub preset: Option<String>,
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn from_str(text: &str, origin: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse(text, origin)?;
        let preset = raw.preset.clone();
        let raw = match &preset {
            Some(name) => {
                let p = presets::find(name).ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?;
                raw.over(p.raw())
            }
            None => raw,
        };
        Ok(Self {
            raw,
            preset,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, &path.display().to_string(), dir)
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let p = presets::find(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
        Ok(Self {
            raw: p.raw(),
            preset: Some(name.to_string()),
            base_dir: PathBuf::from("."),
        })
    }

    fn sim_mut(&mut self) -> &mut RawSimulation {
        self.raw.simulation.get_or_insert_with(RawSimulation::default)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.sim_mut().seed = Some(seed);
    }

    pub fn set_replications(&mut self, r: u64) {
        self.sim_mut().replications = Some(r);
    }

    pub fn set_horizon(&mut self, t: u32) {
        self.sim_mut().horizon = Some(t);
    }

    /// The scenario described by the config. Malformed text fails with
    /// [`ScenarioError::Config`], rejected model values with
    /// [`ScenarioError::Model`].
    pub fn build(&self) -> Result<ScenarioSpec, ScenarioError> {
        let r = &self.raw;
        let sim = r.simulation.as_ref().ok_or(ConfigError::MissingSection("simulation"))?;
        let sig = r.signal.as_ref().ok_or(ConfigError::MissingSection("signal"))?;
        let pay = r.payoff.as_ref().ok_or(ConfigError::MissingSection("payoff"))?;
        let obs = r.observation.as_ref().ok_or(ConfigError::MissingSection("observation"))?;
        let strat = r.strategy.as_ref().ok_or(ConfigError::MissingSection("strategy"))?;

        let horizon = sim.horizon.ok_or(ConfigError::MissingKey {
            section: "simulation",
            key: "horizon",
        })?;
        let replications = sim.replications.ok_or(ConfigError::MissingKey {
            section: "simulation",
            key: "replications",
        })?;
        let forced_state = match sim.forced_state {
            None => None,
            Some(v) => Some(Bit::from_u8(v).ok_or_else(|| bad("simulation", "forced_state", "expected 0 or 1"))?),
        };
        let sizes = match (sim.size, &sim.sizes) {
            (Some(_), Some(_)) => return Err(bad("simulation", "sizes", "give either `size` or `sizes`").into()),
            (Some(_), None) => None,
            (None, Some(list)) => Some(list.iter().map(|&(q, p)| (q, p.get())).collect::<Vec<_>>()),
            (None, None) => {
                return Err(ConfigError::MissingKey {
                    section: "simulation",
                    key: "size",
                }
                .into())
            }
        };
        let payoff = self.payoff(pay)?;
        let strategy = strategy_kind(strat)?;
        let signal = self.signal(sig)?;
        let observation = observation_scheme(obs, horizon)?;
        let sizes = match (sizes, sim.size) {
            (Some(list), _) => SizeDistribution::new(list)?,
            (None, q) => SizeDistribution::degenerate(q.unwrap_or(1)),
        };
        Ok(ScenarioSpec {
            signal,
            payoff,
            observation,
            strategy,
            sizes,
            horizon,
            replications,
            seed: sim.seed.unwrap_or(1),
            herd_window: sim.herd_window.unwrap_or(DEFAULT_HERD_WINDOW),
            forced_state,
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn family(&self, raw: &RawSignal) -> Result<SignalFamily, ScenarioError> {
        let name = raw.family.as_deref().ok_or(ConfigError::MissingKey {
            section: "signal",
            key: "family",
        })?;
        Ok(match name {
            "linear_symmetric" => SignalFamily::LinearSymmetric,
            "bounded_mixture" => {
                let lambda = raw.lambda.ok_or(ConfigError::MissingKey {
                    section: "signal",
                    key: "lambda",
                })?;
                SignalFamily::bounded_mixture(lambda.get()).map_err(SimError::from)?
            }
            "power_tilt" => {
                let k = raw.exponent.ok_or(ConfigError::MissingKey {
                    section: "signal",
                    key: "exponent",
                })?;
                if k % 2 == 0 {
                    return Err(bad("signal", "exponent", "must be odd").into());
                }
                let n = raw.grid.unwrap_or(DEFAULT_TILT_GRID);
                TabulatedDensities::from_fns(n, |s| 0.5 * (1.0 - s.powi(k as i32)), |s| 0.5 * (1.0 + s.powi(k as i32)))
                    .map(|t| SignalFamily::Custom(Arc::new(t)))
                    .map_err(SimError::from)?
            }
            "tabulated" => {
                let p0 = raw.density0.as_ref().ok_or(ConfigError::MissingKey {
                    section: "signal",
                    key: "density0",
                })?;
                let p1 = raw.density1.as_ref().ok_or(ConfigError::MissingKey {
                    section: "signal",
                    key: "density1",
                })?;
                TabulatedDensities::load(&self.resolve(p0), &self.resolve(p1))
                    .map(|t| SignalFamily::Custom(Arc::new(t)))
                    .map_err(SimError::from)?
            }
            other => return Err(bad("signal", "family", &format!("unknown family `{other}`")).into()),
        })
    }

    fn signal(&self, raw: &RawSignal) -> Result<SignalStructure, ScenarioError> {
        if raw.size.is_some() {
            return Err(bad("signal", "size", "only allowed inside `overrides`").into());
        }
        let mut ss = SignalStructure::new(self.family(raw)?);
        for o in &raw.overrides {
            let q = o.size.ok_or(ConfigError::MissingKey {
                section: "signal",
                key: "overrides.size",
            })?;
            if !o.overrides.is_empty() {
                return Err(bad("signal", "overrides", "overrides cannot nest").into());
            }
            ss = ss.with_override(q, self.family(o)?);
        }
        Ok(ss)
    }

    fn payoff(&self, raw: &RawPayoff) -> Result<PayoffSpec, ConfigError> {
        let mode = match raw.mode.as_deref() {
            None | Some("coordination") => PayoffMode::Coordination,
            Some("separation") => PayoffMode::Separation,
            Some(other) => return Err(bad("payoff", "mode", &format!("unknown mode `{other}`"))),
        };
        let num = |v: Option<Num>, key: &'static str| v.map(Num::get).ok_or(ConfigError::MissingKey { section: "payoff", key });
        let form = match raw.form.as_deref().unwrap_or("linear") {
            "linear" => PayoffForm::Linear {
                base: num(raw.base, "base")?,
                match_bonus: num(raw.match_bonus, "match_bonus")?,
                beta: num(raw.beta, "beta")?,
            },
            "scaled" => PayoffForm::Scaled {
                base: num(raw.base, "base")?,
                match_bonus: num(raw.match_bonus, "match_bonus")?,
                beta: num(raw.beta, "beta")?,
            },
            "inverse_crowd" => PayoffForm::InverseCrowd {
                match_bonus: raw.match_bonus.map_or(1.0, Num::get),
                kappa: num(raw.kappa, "kappa")?,
            },
            "tabulated" => {
                let path = raw.table.as_ref().ok_or(ConfigError::MissingKey {
                    section: "payoff",
                    key: "table",
                })?;
                let table = PayoffTable::load(&self.resolve(path)).map_err(|e| bad("payoff", "table", &e.to_string()))?;
                let spec = PayoffSpec::tabulated(table, mode);
                return Ok(match raw.m_bound {
                    Some(m) => spec.with_m_bound(m),
                    None => spec,
                });
            }
            other => return Err(bad("payoff", "form", &format!("unknown form `{other}`"))),
        };
        Ok(PayoffSpec {
            form,
            mode,
            m_bound: raw.m_bound.unwrap_or(crate::payoff::DEFAULT_M_BOUND),
        })
    }
}

fn bad(section: &'static str, key: &'static str, message: &str) -> ConfigError {
    ConfigError::BadValue {
        section,
        key,
        message: message.to_string(),
    }
}

fn observation_scheme(raw: &RawObservation, horizon: u32) -> Result<ObservationScheme, ScenarioError> {
    let kind = scheme_kind(raw)?;
    Ok(ObservationScheme::new(kind, horizon).map_err(SimError::from)?)
}

fn scheme_kind(raw: &RawObservation) -> Result<SchemeKind, ConfigError> {
    let name = raw.scheme.as_deref().ok_or(ConfigError::MissingKey {
        section: "observation",
        key: "scheme",
    })?;
    let kind = match name {
        "star" => SchemeKind::Star,
        "line" => SchemeKind::Line,
        "complete" => SchemeKind::Complete,
        "endogenous" => {
            let cost = raw.cost.ok_or(ConfigError::MissingKey {
                section: "observation",
                key: "cost",
            })?;
            let capacity = match &raw.capacity {
                None => CapacitySchedule::Predecessors,
                Some(RawCapacity::Constant(k)) => CapacitySchedule::Constant(*k),
                Some(RawCapacity::Named(n)) => match n.as_str() {
                    "t-1" | "predecessors" => CapacitySchedule::Predecessors,
                    "log2" => CapacitySchedule::Log2,
                    other => return Err(bad("observation", "capacity", &format!("unknown schedule `{other}`"))),
                },
            };
            SchemeKind::Endogenous {
                cost: cost.get(),
                capacity,
            }
        }
        "custom" => {
            if raw.patterns.is_empty() {
                return Err(ConfigError::MissingKey {
                    section: "observation",
                    key: "patterns",
                });
            }
            let mut entries = Vec::with_capacity(raw.patterns.len());
            for p in &raw.patterns {
                let k = || p.k.ok_or(ConfigError::MissingKey { section: "observation", key: "patterns.k" });
                let pattern = match p.kind.as_str() {
                    "last_k" => Pattern::LastK(k()?),
                    "first_k" => Pattern::FirstK(k()?),
                    "offsets" => Pattern::Offsets(p.offsets.clone().ok_or(ConfigError::MissingKey {
                        section: "observation",
                        key: "patterns.offsets",
                    })?),
                    "all" => Pattern::All,
                    "empty" => Pattern::Empty,
                    other => return Err(bad("observation", "patterns.kind", &format!("unknown pattern `{other}`"))),
                };
                entries.push(PatternEntry {
                    pattern,
                    prob: p.prob.get(),
                });
            }
            SchemeKind::CustomStochastic(entries)
        }
        other => return Err(bad("observation", "scheme", &format!("unknown scheme `{other}`"))),
    };
    Ok(kind)
}

fn strategy_kind(raw: &RawStrategy) -> Result<StrategyKind, ConfigError> {
    let name = raw.kind.as_deref().ok_or(ConfigError::MissingKey {
        section: "strategy",
        key: "kind",
    })?;
    let epsilon = || {
        raw.epsilon.map(Num::get).ok_or(ConfigError::MissingKey {
            section: "strategy",
            key: "epsilon",
        })
    };
    Ok(match name {
        "truth_seeking" => StrategyKind::TruthSeeking,
        "cutoff" => StrategyKind::CutoffCoordination { epsilon: epsilon()? },
        "delegate" => {
            let prescription = match raw.prescription.as_deref() {
                None | Some("predecessor") => Prescription::Predecessor,
                Some("recent_k") => Prescription::RecentK,
                Some(other) => return Err(bad("strategy", "prescription", &format!("unknown prescription `{other}`"))),
            };
            let on_path = match raw.on_path.as_deref() {
                None | Some("truth_seeking") => OnPathRule::TruthSeeking,
                Some("cutoff") => OnPathRule::Cutoff { epsilon: epsilon()? },
                Some(other) => return Err(bad("strategy", "on_path", &format!("unknown rule `{other}`"))),
            };
            StrategyKind::DelegateObserver {
                prescription,
                on_path,
                punish: raw.punish.unwrap_or(false),
            }
        }
        "endogenous_cutoff" => StrategyKind::EndogenousCutoff,
        "separation_split" => StrategyKind::SeparationSplit,
        "private_signal" => StrategyKind::PrivateSignalSymmetric {
            iterations: raw.iterations.unwrap_or(200),
        },
        "constant" => {
            let a = raw.action.ok_or(ConfigError::MissingKey {
                section: "strategy",
                key: "action",
            })?;
            StrategyKind::Constant(Bit::from_u8(a).ok_or_else(|| bad("strategy", "action", "expected 0 or 1"))?)
        }
        other => return Err(bad("strategy", "kind", &format!("unknown kind `{other}`"))),
    })
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::fmt::sig6;
use crate::observation::{ObservationScheme, ProxyReport, SchemeKind};
use crate::payoff::{PayoffForm, PayoffSpec};
use crate::signal::{SignalFamily, SignalStructure};
use crate::sim::{CurveRow, Engine, LearningCurve, WILSON_Z};

/// Bumped whenever the column set or its meaning changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 10] = [
    "t",
    "reps",
    "p_correct",
    "ci_low",
    "ci_high",
    "p_truthtell_given_obs",
    "p_observed",
    "herd_frequency",
    "acc_state0",
    "acc_state1",
];

/// Tolerance for the expanding-observation proxy reported in metadata.
pub const EXPANDING_TOLERANCE: f64 = 1e-9;

pub fn curve_csv(curve: &LearningCurve) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in &curve.rows {
        write!(out, "{},{}", r.t, r.reps).unwrap();
        for v in r.values() {
            out.push(',');
            out.push_str(&sig6(v));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("empty file")]
    Empty,
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("unexpected column `{0}`")]
    ExtraColumn(String),
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

/// Parses a file written by [`curve_csv`], checking the header exactly.
pub fn parse_curve_csv(text: &str) -> Result<Vec<CurveRow>, SchemaError> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or(SchemaError::Empty)?.split(',').collect();
    for (i, want) in COLUMNS.iter().enumerate() {
        match header.get(i) {
            Some(h) if h == want => {}
            _ => return Err(SchemaError::MissingColumn(want)),
        }
    }
    if let Some(extra) = header.get(COLUMNS.len()) {
        return Err(SchemaError::ExtraColumn(extra.to_string()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let err = |message: String| SchemaError::Row { line: i + 2, message };
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != COLUMNS.len() {
                return Err(err(format!("{} cells", cells.len())));
            }
            let t = cells[0].parse().map_err(|e| err(format!("t: {e}")))?;
            let reps = cells[1].parse().map_err(|e| err(format!("reps: {e}")))?;
            let mut v = [0.0; 8];
            for (j, c) in cells[2..].iter().enumerate() {
                v[j] = c.parse().map_err(|e| err(format!("{}: {e}", COLUMNS[j + 2])))?;
            }
            Ok(CurveRow {
                t,
                reps,
                p_correct: v[0],
                ci_low: v[1],
                ci_high: v[2],
                p_truthtell_given_obs: v[3],
                p_observed: v[4],
                herd_frequency: v[5],
                acc_state0: v[6],
                acc_state1: v[7],
            })
        })
        .collect()
}

fn family_text(f: &SignalFamily) -> String {
    match f {
        SignalFamily::LinearSymmetric => "linear_symmetric".into(),
        SignalFamily::BoundedMixture { lambda } => format!("bounded_mixture(lambda={})", sig6(*lambda)),
        SignalFamily::Custom(_) => "tabulated".into(),
    }
}

fn signal_text(ss: &SignalStructure) -> String {
    let mut s = family_text(ss.default_family());
    for (q, f) in ss.overrides() {
        write!(s, "; Q={q}: {}", family_text(f)).unwrap();
    }
    s
}

fn payoff_text(p: &PayoffSpec) -> String {
    let form = match &p.form {
        PayoffForm::Linear { base, match_bonus, beta } => {
            format!("linear(base={}, match_bonus={}, beta={})", sig6(*base), sig6(*match_bonus), sig6(*beta))
        }
        PayoffForm::Scaled { base, match_bonus, beta } => {
            format!("scaled(base={}, match_bonus={}, beta={})", sig6(*base), sig6(*match_bonus), sig6(*beta))
        }
        PayoffForm::InverseCrowd { match_bonus, kappa } => {
            format!("inverse_crowd(match_bonus={}, kappa={})", sig6(*match_bonus), sig6(*kappa))
        }
        PayoffForm::Tabulated(t) => format!("tabulated(max_m={})", t.max_m()),
    };
    format!("{form}, mode={}, m_bound={}", p.mode, p.m_bound)
}

fn observation_text(o: &ObservationScheme) -> String {
    match &o.kind {
        SchemeKind::Endogenous { cost, capacity } => format!("endogenous(cost={}, capacity={capacity})", sig6(*cost)),
        SchemeKind::CustomStochastic(e) => format!("custom({} patterns)", e.len()),
        k => k.name().to_string(),
    }
}

fn proxy_text(r: &ProxyReport) -> String {
    let mut s = format!("{} (horizon={}", if r.passed { "pass" } else { "fail" }, r.horizon);
    if let Some(t) = r.tolerance {
        write!(s, ", tolerance={}", sig6(t)).unwrap();
    }
    write!(s, "; {})", r.detail).unwrap();
    s
}

/// The run description written next to `curve.csv`: `key = value` lines in
/// a fixed order. Contains nothing that varies between identical runs.
pub fn meta_text(engine: &Engine, curve: &LearningCurve, preset: Option<&str>) -> String {
    let spec = engine.spec();
    let mut lines: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| lines.push((k.to_string(), v));
    put("schema", "herdsim-curve".into());
    put("schema_version", SCHEMA_VERSION.to_string());
    put("columns", COLUMNS.join(","));
    put("herdsim_version", env!("CARGO_PKG_VERSION").into());
    put("preset", preset.unwrap_or("none").into());
    put("seed", spec.seed.to_string());
    put("horizon", spec.horizon.to_string());
    put("replications", curve.summary.replications.to_string());
    put("rng", "chacha8, stream = replication index".into());
    put("interval", "wilson".into());
    put("interval_confidence", "0.95".into());
    put("interval_z", sig6(WILSON_Z));
    put("herd_window", curve.summary.herd_window.to_string());
    put("float_format", "%.6g".into());
    put("signal", signal_text(&spec.signal));
    put("payoff", payoff_text(&spec.payoff));
    put("observation", observation_text(&spec.observation));
    put("strategy", spec.strategy.to_string());
    let sizes: Vec<String> = spec.sizes.entries().iter().map(|(q, p)| format!("{q}:{}", sig6(*p))).collect();
    put("sizes", sizes.join(" "));
    put("belief_tracking", engine.lattice_name().into());
    put(
        "conformity_threshold",
        engine.profile().conformity_threshold().map_or("none".into(), |q| q.to_string()),
    );
    put("analytic_limit", engine.analytic_limit().map_or("none".into(), sig6));
    put("state_counts", format!("{} {}", curve.summary.state_counts[0], curve.summary.state_counts[1]));
    put("herds", curve.summary.herds.to_string());
    put("wrong_herds", curve.summary.wrong_herds.to_string());
    let obs = &spec.observation;
    if obs.is_endogenous() {
        if let Ok(r) = obs.capacity_limit_infinite(spec.horizon) {
            put("proxy_capacity_unbounded", proxy_text(&r));
        }
    } else {
        if let Ok(r) = obs.check_expanding(spec.horizon, EXPANDING_TOLERANCE) {
            put("proxy_expanding", proxy_text(&r));
        }
        if let Ok(r) = obs.check_infinite_complete(spec.horizon) {
            put("proxy_infinite_complete", proxy_text(&r));
        }
    }
    let mut out = String::new();
    for (k, v) in lines {
        writeln!(out, "{k} = {v}").unwrap();
    }
    out
}

/// Writes `curve.csv` and `meta.txt` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, engine: &Engine, curve: &LearningCurve, preset: Option<&str>) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("curve.csv"), curve_csv(curve))?;
    fs::write(dir.join("meta.txt"), meta_text(engine, curve, preset))
}

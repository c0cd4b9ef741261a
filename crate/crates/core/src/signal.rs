//! Conditional signal distributions on `S = (-1, 1)`.
//!
//! Two closed-form families are built in. Both are "tilts" of the uniform
//! density: `f_1(s) = (1 + λ s) / 2` and `f_0(s) = (1 - λ s) / 2`. With
//! `λ = 1` private beliefs reach 0 and 1 at the edges of the support
//! ([`SignalFamily::LinearSymmetric`]); with `λ < 1` they stay inside
//! `[(1 - λ) / 2, (1 + λ) / 2]` ([`SignalFamily::BoundedMixture`]).
//! Anything else is given as a piecewise-linear table.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::bit::{Bit, State};
use crate::root::bisect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("signal {0} is outside the open support (-1, 1)")]
    OutsideSupport(f64),
    #[error("mixture weight must lie in (0, 1), got {0}")]
    InvalidLambda(f64),
    #[error("belief limits satisfy neither the bounded nor the unbounded definition")]
    Unclassified,
    #[error("grid size must be at least 2, got {0}")]
    InvalidGrid(usize),
    #[error("invalid density table: {0}")]
    InvalidTable(String),
    #[error("likelihood ratio is not strictly increasing between s = {lo} and s = {hi}")]
    MlrpViolation { lo: f64, hi: f64 },
}

/// Piecewise-linear densities for both states on a uniform grid over `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensities {
    step: f64,
    dens: [Vec<f64>; 2],
    cum: [Vec<f64>; 2],
}

impl TabulatedDensities {
    /// Builds the table from density values at `n` equally spaced points
    /// `-1, -1 + 2/(n-1), ..., 1`. Each density is renormalized to unit mass
    /// and the likelihood ratio must be strictly increasing.
    pub fn new(f0: Vec<f64>, f1: Vec<f64>) -> Result<Self, SignalError> {
        let n = f0.len();
        if n < 2 || f1.len() != n {
            return Err(SignalError::InvalidTable(format!(
                "need two density columns of equal length >= 2 (got {} and {})",
                f0.len(),
                f1.len()
            )));
        }
        for (i, (&a, &b)) in f0.iter().zip(&f1).enumerate() {
            if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < 0.0 {
                return Err(SignalError::InvalidTable(format!("negative or non-finite density at row {i}")));
            }
            let interior = i > 0 && i + 1 < n;
            if interior && (a <= 0.0 || b <= 0.0) {
                return Err(SignalError::InvalidTable(format!(
                    "densities must be strictly positive inside the support (row {i})"
                )));
            }
            if a == 0.0 && b == 0.0 {
                return Err(SignalError::InvalidTable(format!("both densities vanish at row {i}")));
            }
        }
        let step = 2.0 / (n - 1) as f64;
        let mut dens = [f0, f1];
        let mut cum: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for th in 0..2 {
            let mass = trapezoid(&dens[th], step);
            if mass <= 0.0 {
                return Err(SignalError::InvalidTable("zero total mass".into()));
            }
            dens[th].iter_mut().for_each(|v| *v /= mass);
            cum[th] = cumulative(&dens[th], step);
        }
        let table = Self { step, dens, cum };
        // Beliefs at the grid nodes; a ratio of linear functions is monotone on
        // each cell, so increasing nodes imply increasing everywhere.
        let beliefs: Vec<f64> = (0..n).map(|i| table.node_belief(i)).collect();
        for i in 1..n {
            if beliefs[i] <= beliefs[i - 1] {
                return Err(SignalError::MlrpViolation {
                    lo: table.node(i - 1),
                    hi: table.node(i),
                });
            }
        }
        Ok(table)
    }

    /// Reads two `(s, density)` text tables, one per state. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn load(state0: &Path, state1: &Path) -> Result<Self, SignalError> {
        let (s0, d0) = read_two_column(state0)?;
        let (s1, d1) = read_two_column(state1)?;
        if s0.len() != s1.len() || s0.iter().zip(&s1).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(SignalError::InvalidTable("state tables use different grids".into()));
        }
        let n = s0.len();
        if n < 2 {
            return Err(SignalError::InvalidTable("need at least two rows".into()));
        }
        let step = 2.0 / (n - 1) as f64;
        for (i, s) in s0.iter().enumerate() {
            let want = -1.0 + step * i as f64;
            if (s - want).abs() > 1e-9 {
                return Err(SignalError::InvalidTable(format!(
                    "grid must be uniform on [-1, 1]; row {i} has s = {s}, expected {want}"
                )));
            }
        }
        Self::new(d0, d1)
    }

    /// Tabulates a density pair given as functions on `[-1, 1]`.
    pub fn from_fns(n: usize, f0: impl Fn(f64) -> f64, f1: impl Fn(f64) -> f64) -> Result<Self, SignalError> {
        if n < 2 {
            return Err(SignalError::InvalidGrid(n));
        }
        let step = 2.0 / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| (-1.0 + step * i as f64).clamp(-1.0, 1.0)).collect();
        Self::new(xs.iter().map(|&x| f0(x)).collect(), xs.iter().map(|&x| f1(x)).collect())
    }

    fn len(&self) -> usize {
        self.dens[0].len()
    }

    fn node(&self, i: usize) -> f64 {
        -1.0 + self.step * i as f64
    }

    fn node_belief(&self, i: usize) -> f64 {
        let (a, b) = (self.dens[0][i], self.dens[1][i]);
        b / (a + b)
    }

    fn cell(&self, s: f64) -> (usize, f64) {
        let pos = ((s + 1.0) / self.step).clamp(0.0, (self.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.len() - 2);
        (i, s - self.node(i))
    }

    fn density(&self, th: usize, s: f64) -> f64 {
        let (i, dx) = self.cell(s);
        let d = &self.dens[th];
        d[i] + (d[i + 1] - d[i]) * dx / self.step
    }

    fn cdf(&self, th: usize, s: f64) -> f64 {
        let (i, dx) = self.cell(s);
        let d = &self.dens[th];
        let slope = (d[i + 1] - d[i]) / self.step;
        (self.cum[th][i] + d[i] * dx + 0.5 * slope * dx * dx).clamp(0.0, 1.0)
    }

    fn quantile(&self, th: usize, u: f64) -> f64 {
        let cum = &self.cum[th];
        let i = match cum.partition_point(|&c| c <= u) {
            0 => 0,
            k => (k - 1).min(self.len() - 2),
        };
        let d = &self.dens[th];
        let target = u - cum[i];
        let slope = (d[i + 1] - d[i]) / self.step;
        // 0.5 slope dx^2 + d_i dx - target = 0, in the cancellation-free form.
        let disc = (d[i] * d[i] + 2.0 * slope * target).max(0.0);
        let dx = if d[i] + disc.sqrt() > 0.0 {
            2.0 * target / (d[i] + disc.sqrt())
        } else {
            0.0
        };
        (self.node(i) + dx.clamp(0.0, self.step)).clamp(-1.0, 1.0)
    }
}

fn trapezoid(d: &[f64], step: f64) -> f64 {
    d.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum()
}

fn cumulative(d: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(d.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in d.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * step;
        out.push(acc);
    }
    out
}

fn read_two_column(path: &Path) -> Result<(Vec<f64>, Vec<f64>), SignalError> {
    let text = fs::read_to_string(path)
        .map_err(|e| SignalError::InvalidTable(format!("{}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|c| !c.is_empty()).collect();
        let parse = |c: &str| {
            c.parse::<f64>().map_err(|_| {
                SignalError::InvalidTable(format!("{}:{}: not a number: {c}", path.display(), lineno + 1))
            })
        };
        if cols.len() != 2 {
            return Err(SignalError::InvalidTable(format!(
                "{}:{}: expected two columns",
                path.display(),
                lineno + 1
            )));
        }
        xs.push(parse(cols[0])?);
        ys.push(parse(cols[1])?);
    }
    Ok((xs, ys))
}

/// Density family for one community size.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalFamily {
    /// `f_1 = (1 + s)/2`, `f_0 = (1 - s)/2`.
    LinearSymmetric,
    /// `f_1 = (1 + λ s)/2`, `f_0 = (1 - λ s)/2` with `λ` in `(0, 1)`.
    BoundedMixture { lambda: f64 },
    Custom(Arc<TabulatedDensities>),
}

impl SignalFamily {
    pub fn bounded_mixture(lambda: f64) -> Result<Self, SignalError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(SignalError::InvalidLambda(lambda));
        }
        Ok(SignalFamily::BoundedMixture { lambda })
    }

    fn tilt(&self) -> Option<f64> {
        match self {
            SignalFamily::LinearSymmetric => Some(1.0),
            SignalFamily::BoundedMixture { lambda } => Some(*lambda),
            SignalFamily::Custom(_) => None,
        }
    }

    fn density(&self, theta: State, s: f64) -> f64 {
        match (self.tilt(), self) {
            (Some(l), _) => 0.5 * (1.0 + sign(theta) * l * s),
            (None, SignalFamily::Custom(t)) => t.density(theta.index(), s),
            _ => unreachable!(),
        }
    }

    fn cdf(&self, theta: State, s: f64) -> f64 {
        if s <= -1.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        match (self.tilt(), self) {
            (Some(l), _) => (0.5 * (s + 1.0) + 0.25 * sign(theta) * l * (s * s - 1.0)).clamp(0.0, 1.0),
            (None, SignalFamily::Custom(t)) => t.cdf(theta.index(), s),
            _ => unreachable!(),
        }
    }

    fn quantile(&self, theta: State, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match (self.tilt(), self) {
            (Some(l), _) => {
                let a = 0.25 * sign(theta) * l;
                let b = 0.5;
                let c = 0.5 - a - u;
                let disc = (b * b - 4.0 * a * c).max(0.0);
                (-2.0 * c / (b + disc.sqrt())).clamp(-1.0, 1.0)
            }
            (None, SignalFamily::Custom(t)) => t.quantile(theta.index(), u),
            _ => unreachable!(),
        }
    }

    fn belief(&self, s: f64) -> f64 {
        match self.tilt() {
            Some(l) => 0.5 * (1.0 + l * s),
            None => {
                let (f0, f1) = (self.density(Bit::Zero, s), self.density(Bit::One, s));
                f1 / (f0 + f1)
            }
        }
    }

    /// Signal at which the private belief equals `p`, clamped to `[-1, 1]`.
    fn signal_for_belief(&self, p: f64) -> f64 {
        match self.tilt() {
            Some(l) => ((2.0 * p - 1.0) / l).clamp(-1.0, 1.0),
            None => {
                if p <= self.belief(-1.0) {
                    -1.0
                } else if p >= self.belief(1.0) {
                    1.0
                } else {
                    bisect(|s| self.belief(s) - p, -1.0, 1.0, 1e-13).unwrap_or(0.0)
                }
            }
        }
    }
}

fn sign(theta: State) -> f64 {
    match theta {
        Bit::Zero => -1.0,
        Bit::One => 1.0,
    }
}

/// Whether private beliefs can approach certainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeliefClass {
    Unbounded,
    Bounded { lower: f64, upper: f64 },
}

/// Result of a likelihood-ratio monotonicity scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MlrpReport {
    Pass,
    Fail { witness: (f64, f64) },
}

impl MlrpReport {
    pub fn passed(&self) -> bool {
        matches!(self, MlrpReport::Pass)
    }
}

/// The signal structure `{F^Q_0, F^Q_1}`: a default family plus optional
/// per-community-size overrides. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalStructure {
    family: SignalFamily,
    per_size: BTreeMap<u32, SignalFamily>,
}

impl SignalStructure {
    pub fn new(family: SignalFamily) -> Self {
        Self {
            family,
            per_size: BTreeMap::new(),
        }
    }

    pub fn linear_symmetric() -> Self {
        Self::new(SignalFamily::LinearSymmetric)
    }

    pub fn bounded_mixture(lambda: f64) -> Result<Self, SignalError> {
        Ok(Self::new(SignalFamily::bounded_mixture(lambda)?))
    }

    pub fn with_override(mut self, q: u32, family: SignalFamily) -> Self {
        self.per_size.insert(q, family);
        self
    }

    pub fn family(&self, q: u32) -> &SignalFamily {
        self.per_size.get(&q).unwrap_or(&self.family)
    }

    pub fn default_family(&self) -> &SignalFamily {
        &self.family
    }

    pub fn overrides(&self) -> impl Iterator<Item = (&u32, &SignalFamily)> {
        self.per_size.iter()
    }

    /// Symmetric in the sense `f_0(s) = f_1(-s)` for every size; true for the
    /// built-in families.
    pub fn is_symmetric(&self) -> bool {
        std::iter::once(&self.family)
            .chain(self.per_size.values())
            .all(|f| f.tilt().is_some())
    }

    pub fn density(&self, q: u32, theta: State, s: f64) -> f64 {
        self.family(q).density(theta, s)
    }

    /// `F^Q_theta(s)`, defined on the closure `[-1, 1]`.
    pub fn cdf(&self, q: u32, theta: State, s: f64) -> f64 {
        self.family(q).cdf(theta, s)
    }

    /// Inverse CDF.
    pub fn quantile(&self, q: u32, theta: State, u: f64) -> f64 {
        self.family(q).quantile(theta, u)
    }

    /// `f_1(s) / (f_0(s) + f_1(s))` for `s` in the open support.
    pub fn private_belief(&self, q: u32, s: f64) -> Result<f64, SignalError> {
        if !(s > -1.0 && s < 1.0) {
            return Err(SignalError::OutsideSupport(s));
        }
        Ok(self.family(q).belief(s))
    }

    /// Belief without the support check; edges give the limits.
    pub(crate) fn belief_unchecked(&self, q: u32, s: f64) -> f64 {
        self.family(q).belief(s.clamp(-1.0, 1.0))
    }

    /// Limits of the private belief at `s -> -1` and `s -> 1`. For tabulated
    /// families these are the endpoint densities, an approximation of the
    /// true one-sided limits.
    pub fn belief_limits(&self, q: u32) -> (f64, f64) {
        let fam = self.family(q);
        (fam.belief(-1.0), fam.belief(1.0))
    }

    /// Natural log of `f_1(s) / f_0(s)`.
    pub fn log_likelihood_ratio(&self, q: u32, s: f64) -> f64 {
        let b = self.belief_unchecked(q, s);
        b.ln() - (1.0 - b).ln()
    }

    /// Signal where the private belief equals `p` (clamped to the closure).
    pub fn signal_for_belief(&self, q: u32, p: f64) -> f64 {
        self.family(q).signal_for_belief(p)
    }

    /// Smallest signal whose log likelihood ratio reaches `target`; `-1` if
    /// every signal does, `1` if none does.
    pub fn signal_for_log_lr(&self, q: u32, target: f64) -> f64 {
        if target == f64::INFINITY {
            return 1.0;
        }
        if target == f64::NEG_INFINITY {
            return -1.0;
        }
        // belief = 1 / (1 + e^{-target})
        let p = 1.0 / (1.0 + (-target).exp());
        self.signal_for_belief(q, p)
    }

    /// The signal `ŝ` with `f_0(ŝ) = f_1(ŝ)`.
    pub fn neutral_signal(&self, q: u32) -> f64 {
        self.signal_for_belief(q, 0.5)
    }

    /// Inverse-CDF draw from `F^Q_theta`.
    pub fn sample_signal<R: Rng + ?Sized>(&self, q: u32, theta: State, rng: &mut R) -> f64 {
        self.sample_from_uniform(q, theta, rng.gen::<f64>())
    }

    /// Maps a uniform draw to a signal. Used directly for common-random-number
    /// couplings across states.
    pub fn sample_from_uniform(&self, q: u32, theta: State, u: f64) -> f64 {
        let s = self.quantile(q, theta, u);
        // Keep draws inside the open support.
        s.clamp(-1.0 + f64::EPSILON, 1.0 - f64::EPSILON)
    }

    /// Classifies private beliefs over the sizes in `support`: unbounded if
    /// some size reaches both 0 and 1, bounded if every size stays strictly
    /// inside. The bounded envelope spans all sizes.
    pub fn classify_beliefs(&self, support: &BTreeSet<u32>) -> Result<BeliefClass, SignalError> {
        const EDGE: f64 = 1e-12;
        let limits: Vec<(f64, f64)> = support.iter().map(|&q| self.belief_limits(q)).collect();
        if limits.iter().any(|&(lo, hi)| lo <= EDGE && hi >= 1.0 - EDGE) {
            return Ok(BeliefClass::Unbounded);
        }
        if !limits.is_empty() && limits.iter().all(|&(lo, hi)| lo > EDGE && hi < 1.0 - EDGE) {
            let lower = limits.iter().map(|l| l.0).fold(f64::INFINITY, f64::min);
            let upper = limits.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
            return Ok(BeliefClass::Bounded { lower, upper });
        }
        Err(SignalError::Unclassified)
    }

    /// Scans `grid_size` interior points and checks that `f_1 / f_0` strictly
    /// increases.
    pub fn check_mlrp(&self, q: u32, grid_size: usize) -> Result<MlrpReport, SignalError> {
        check_mlrp_fn(|s| self.density(q, Bit::Zero, s), |s| self.density(q, Bit::One, s), grid_size)
    }
}

/// MLRP scan for an arbitrary density pair; exposed so raw candidate
/// densities can be vetted before a structure is built.
pub fn check_mlrp_fn(
    f0: impl Fn(f64) -> f64,
    f1: impl Fn(f64) -> f64,
    grid_size: usize,
) -> Result<MlrpReport, SignalError> {
    if grid_size < 2 {
        return Err(SignalError::InvalidGrid(grid_size));
    }
    let step = 2.0 / (grid_size + 1) as f64;
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..=grid_size {
        let s = -1.0 + step * i as f64;
        let ratio = f1(s) / f0(s);
        if let Some((ps, pr)) = prev {
            if !(ratio > pr) {
                return Ok(MlrpReport::Fail { witness: (ps, s) });
            }
        }
        prev = Some((s, ratio));
    }
    Ok(MlrpReport::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn private_belief_examples() {
        let ls = SignalStructure::linear_symmetric();
        assert_eq!(ls.private_belief(1, 0.0).unwrap(), 0.5);
        assert!(close(ls.private_belief(1, 0.8).unwrap(), 0.9, 1e-15));
        let bm = SignalStructure::bounded_mixture(0.5).unwrap();
        assert!(close(bm.belief_limits(1).1, 0.75, 1e-15));
        assert!(close(bm.private_belief(1, 1.0 - 1e-12).unwrap(), 0.75, 1e-9));
        assert_eq!(ls.private_belief(1, 1.0), Err(SignalError::OutsideSupport(1.0)));
        assert!(ls.private_belief(1, -1.5).is_err());
    }

    #[test]
    fn classify_examples() {
        let support: BTreeSet<u32> = [1, 2, 5].into_iter().collect();
        assert_eq!(
            SignalStructure::linear_symmetric().classify_beliefs(&support).unwrap(),
            BeliefClass::Unbounded
        );
        let bm = SignalStructure::bounded_mixture(0.5).unwrap();
        assert_eq!(
            bm.classify_beliefs(&support).unwrap(),
            BeliefClass::Bounded { lower: 0.25, upper: 0.75 }
        );
        let mixed = SignalStructure::bounded_mixture(0.5)
            .unwrap()
            .with_override(2, SignalFamily::LinearSymmetric);
        let s12: BTreeSet<u32> = [1, 2].into_iter().collect();
        assert_eq!(mixed.classify_beliefs(&s12).unwrap(), BeliefClass::Unbounded);
        // Only the bounded size in the support.
        let s1: BTreeSet<u32> = [1].into_iter().collect();
        assert!(matches!(mixed.classify_beliefs(&s1).unwrap(), BeliefClass::Bounded { .. }));
    }

    #[test]
    fn classify_rejects_one_sided() {
        // Belief reaches 1 at the top but not 0 at the bottom.
        let t = TabulatedDensities::from_fns(21, |s| (1.0 - s) / 2.0 + 0.0, |s| (1.0 + s) / 2.0 + 0.2 * (1.0 - s))
            .unwrap();
        let ss = SignalStructure::new(SignalFamily::Custom(Arc::new(t)));
        let s1: BTreeSet<u32> = [1].into_iter().collect();
        assert_eq!(ss.classify_beliefs(&s1), Err(SignalError::Unclassified));
    }

    #[test]
    fn mlrp_examples() {
        let ls = SignalStructure::linear_symmetric();
        assert!(ls.check_mlrp(1, 50).unwrap().passed());
        let swapped = check_mlrp_fn(|s| (1.0 + s) / 2.0, |s| (1.0 - s) / 2.0, 20).unwrap();
        assert!(matches!(swapped, MlrpReport::Fail { witness: (a, b) } if a < b));
        assert!(!check_mlrp_fn(|_| 0.5, |_| 0.5, 10).unwrap().passed());
        assert_eq!(ls.check_mlrp(1, 1), Err(SignalError::InvalidGrid(1)));
    }

    #[test]
    fn cdf_examples() {
        let ls = SignalStructure::linear_symmetric();
        assert!(close(ls.cdf(1, Bit::Zero, 0.8), 0.99, 1e-15));
        for th in Bit::BOTH {
            assert_eq!(ls.cdf(1, th, -1.0), 0.0);
            assert_eq!(ls.cdf(1, th, 1.0), 1.0);
        }
        // Closed form against a midpoint-rule integral of the density.
        let n = 200_000;
        let h = 1.8 / n as f64;
        let integral: f64 = (0..n).map(|i| (1.0 - (-1.0 + (i as f64 + 0.5) * h)) / 2.0 * h).sum();
        assert!(close(integral, 0.99, 1e-9));
    }

    #[test]
    fn quantile_examples() {
        let ls = SignalStructure::linear_symmetric();
        let s = ls.quantile(1, Bit::Zero, 0.5);
        assert!(close(s, 1.0 - 2f64.sqrt(), 1e-12));
        assert!(close(-0.414214, s, 1e-6));
        assert!(ls.quantile(1, Bit::One, 1e-15) < -0.99999);
        assert_eq!(ls.quantile(1, Bit::Zero, 0.0), -1.0);
    }

    #[test]
    fn ks_distance_of_sampler() {
        let ss = SignalStructure::bounded_mixture(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for theta in Bit::BOTH {
            let mut xs: Vec<f64> = (0..100_000).map(|_| ss.sample_signal(1, theta, &mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = ss.cdf(1, theta, x);
                    (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < 0.01, "KS distance {d}");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let ss = SignalStructure::linear_symmetric();
        let a: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(3);
            (0..10).map(|_| ss.sample_signal(1, Bit::One, &mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(3);
            (0..10).map(|_| ss.sample_signal(1, Bit::One, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    fn tilted_table() -> TabulatedDensities {
        TabulatedDensities::from_fns(101, |s| (1.0 - s.powi(3)) / 2.0, |s| (1.0 + s.powi(3)) / 2.0).unwrap()
    }

    #[test]
    fn tabulated_table_normalizes_and_round_trips() {
        let t = TabulatedDensities::from_fns(11, |s| 3.0 * (1.0 - s), |s| 3.0 * (1.0 + s)).unwrap();
        let ss = SignalStructure::new(SignalFamily::Custom(Arc::new(t)));
        // Linear data is represented exactly, so it matches the analytic family.
        let ls = SignalStructure::linear_symmetric();
        for &s in &[-0.95, -0.3, 0.0, 0.42, 0.8] {
            for th in Bit::BOTH {
                assert!(close(ss.cdf(1, th, s), ls.cdf(1, th, s), 1e-12));
            }
        }
        let cubic = SignalStructure::new(SignalFamily::Custom(Arc::new(tilted_table())));
        for i in 0..=100 {
            let u = i as f64 / 100.0;
            for th in Bit::BOTH {
                let s = cubic.quantile(1, th, u);
                assert!(close(cubic.cdf(1, th, s), u, 1e-9), "u={u} th={th}");
            }
        }
        let s1: BTreeSet<u32> = [1].into_iter().collect();
        assert_eq!(cubic.classify_beliefs(&s1).unwrap(), BeliefClass::Unbounded);
    }

    #[test]
    fn tabulated_rejects_mlrp_violation() {
        let err = TabulatedDensities::from_fns(11, |s| (1.0 + s) / 2.0, |s| (1.0 - s) / 2.0).unwrap_err();
        assert!(matches!(err, SignalError::MlrpViolation { .. }));
    }

    #[test]
    fn tabulated_loads_from_text() {
        let dir = std::env::temp_dir().join(format!("herdsim-sig-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p0 = dir.join("f0.txt");
        let p1 = dir.join("f1.txt");
        let mut a = String::from("# s density\n");
        let mut b = String::new();
        for i in 0..=20 {
            let s = -1.0 + 0.1 * i as f64;
            a.push_str(&format!("{s} {}\n", (1.0 - s) / 2.0));
            b.push_str(&format!("{s},{}\n", (1.0 + s) / 2.0));
        }
        std::fs::write(&p0, a).unwrap();
        std::fs::write(&p1, b).unwrap();
        let t = TabulatedDensities::load(&p0, &p1).unwrap();
        let ss = SignalStructure::new(SignalFamily::Custom(Arc::new(t)));
        assert!(close(ss.cdf(1, Bit::Zero, 0.8), 0.99, 1e-9));
        std::fs::write(&p1, "0 1\n1 1\n").unwrap();
        assert!(TabulatedDensities::load(&p0, &p1).is_err());
    }

    #[test]
    fn signal_for_log_lr_inverts_ratio() {
        let bm = SignalStructure::bounded_mixture(0.5).unwrap();
        for &s in &[-0.7, 0.0, 0.3, 0.9] {
            let l = bm.log_likelihood_ratio(1, s);
            assert!(close(bm.signal_for_log_lr(1, l), s, 1e-12));
        }
        assert_eq!(bm.signal_for_log_lr(1, 5.0), 1.0);
        assert_eq!(bm.signal_for_log_lr(1, -5.0), -1.0);
        assert_eq!(bm.neutral_signal(1), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn structures() -> impl Strategy<Value = SignalStructure> {
            prop_oneof![
                Just(SignalStructure::linear_symmetric()),
                (0.05f64..0.95).prop_map(|l| SignalStructure::bounded_mixture(l).unwrap()),
                Just(SignalStructure::new(SignalFamily::Custom(Arc::new(tilted_table())))),
            ]
        }

        proptest! {
            #[test]
            fn belief_strictly_increasing(ss in structures(), a in -0.999f64..0.999, b in -0.999f64..0.999) {
                prop_assume!((a - b).abs() > 1e-6);
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(ss.private_belief(1, lo).unwrap() < ss.private_belief(1, hi).unwrap());
            }

            #[test]
            fn mlrp_implies_fosd(ss in structures(), s in -1.0f64..1.0) {
                prop_assert!(ss.cdf(1, Bit::One, s) <= ss.cdf(1, Bit::Zero, s) + 1e-12);
            }

            #[test]
            fn inverse_cdf_round_trip(ss in structures(), u in 0.0f64..1.0, one in any::<bool>()) {
                let th = Bit::from_bool(one);
                let s = ss.quantile(1, th, u);
                prop_assert!((ss.cdf(1, th, s) - u).abs() < 1e-9);
            }
        }
    }
}

//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the verdict lines always print; exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use herdsim::belief::{belief_step_bounds, posterior_exact, posterior_mc, reversal_horizon, NeighborhoodRealization, ObservedCommunity};
use herdsim::scenario::{curve_csv, presets, ScenarioConfig};
use herdsim::sim::{compare_fosd, Engine, ScenarioSpec, DEFAULT_HERD_WINDOW};
use herdsim::strategy::{
    belief_grid, delegate_incentive_check, grid_rational, limit_cutoff, private_signal_cutoff, risk_dominance_check,
    selected_split, separation_split, unanimity_search,
};
use herdsim::{
    Bit, ObservationScheme, PayoffForm, PayoffMode, PayoffSpec, PosteriorMethod, SignalStructure, SizeDistribution,
    StrategyKind,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failed.push(what);
        }
    }

    fn verdict(self) -> (bool, String) {
        if self.failed.is_empty() {
            (true, self.notes.join("; "))
        } else {
            (false, format!("failed: {}", self.failed.join("; ")))
        }
    }
}

fn preset_engine(name: &str) -> Engine {
    let spec = ScenarioConfig::preset(name).unwrap().build().unwrap();
    Engine::new(spec).unwrap()
}

/// `F_0` of the tilt family `(1 -/+ lambda s)/2`.
fn tilt_cdf0(lambda: f64, s: f64) -> f64 {
    (s + 1.0) / 2.0 - lambda * (s * s - 1.0) / 4.0
}

/// Upper limit cutoff under `LinearSymmetric`: the signal whose belief is
/// `1 - c / gap`.
fn linear_limit_cutoff(cost: f64, gap: f64) -> f64 {
    2.0 * (1.0 - cost / gap) - 1.0
}

fn endogenous_singleton_limit() -> (bool, String) {
    let mut c = Checks::default();
    let engine = preset_engine("thm2_singleton_endog");
    let spec = engine.spec();
    let s = limit_cutoff(&spec.signal, &spec.payoff, 0.1, 1).unwrap();
    let expected_s = linear_limit_cutoff(0.1, 1.1 - 0.1);
    c.check((s - 0.8).abs() <= 1e-9 && (expected_s - 0.8).abs() < 1e-12, format!("s* = {s:.12}"));
    let target = tilt_cdf0(1.0, 0.8);
    c.check((target - 0.99).abs() < 1e-12, format!("F_0(0.8) = {target}"));
    c.check(spec.horizon == 300 && spec.replications == 100_000, "T=300, R=1e5");
    let row = *engine.estimate_curve().terminal();
    c.check((row.p_correct - target).abs() <= 0.01, format!("p_correct(300) = {:.5}", row.p_correct));
    c.verdict()
}

fn bounded_cutoff_truth_telling() -> (bool, String) {
    let mut c = Checks::default();
    let engine = preset_engine("thm1_bounded");
    let spec = engine.spec();
    c.check(spec.strategy == StrategyKind::CutoffCoordination { epsilon: 0.05 }, "epsilon = 0.05");
    c.check(engine.profile().conformity_threshold() == Some(5) && spec.sizes.entries() == [(5, 1.0)], "G = delta at Q-hat = 5");
    c.check(spec.horizon == 500 && spec.replications == 10_000, "T=500, R=1e4");
    let row = *engine.estimate_curve().terminal();
    c.check(
        row.p_truthtell_given_obs >= 0.97,
        format!("p_truthtell_given_obs(500) = {:.5}", row.p_truthtell_given_obs),
    );
    c.check(row.p_correct >= 0.93, format!("p_correct(500) = {:.5}", row.p_correct));
    c.verdict()
}

fn herding_baseline_plateau() -> (bool, String) {
    let mut c = Checks::default();
    let engine = preset_engine("ex_bounded_singleton");
    let curve = engine.estimate_curve();
    let (p250, p500) = (curve.row(250).p_correct, curve.row(500).p_correct);
    c.check((p500 - p250).abs() < 0.01, format!("|p(500) - p(250)| = {:.5}", (p500 - p250).abs()));
    c.check(p500 <= 0.97, format!("p_correct(500) = {p500:.5}"));
    let (wrong, _, _) = curve.wrong_herd_frequency();
    c.check(wrong > 0.01, format!("wrong-herd frequency = {wrong:.5}"));
    c.verdict()
}

fn unanimity_oracle() -> (bool, String) {
    let mut c = Checks::default();
    let spec = PayoffSpec::default_coordination();
    let grid = belief_grid(100);
    c.check(grid.len() == 99, "99-point grid");
    for q in 1..=8 {
        let found = unanimity_search(&spec, q, &grid).unwrap();
        c.check(found.is_empty(), format!("Q={q}: {} split equilibria", found.len()));
    }
    c.notes.retain(|n| !n.starts_with("Q="));
    c.notes.push("no split equilibria for Q <= 8".into());
    c.verdict()
}

fn big(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn risk_dominance_oracle() -> (bool, String) {
    let mut c = Checks::default();
    let spec = PayoffSpec::default_coordination();
    let PayoffForm::Linear { base, match_bonus, beta } = spec.form else {
        unreachable!()
    };
    // u(1, a, m) from the linear form, as exact rationals of the same floats.
    let u1 = |a: Bit, m: u32| {
        let m1 = BigRational::from_integer(BigInt::from(m - 1));
        big(base) + if a.is_one() { big(match_bonus) } else { BigRational::from_integer(0.into()) } + big(beta) * m1
    };
    let one = BigRational::from_integer(1.into());
    let two = BigRational::from_integer(2.into());
    let mut mismatches = 0;
    let mut not_dominant = 0;
    let mut cases = 0;
    for q in 1..=6u32 {
        for k in 1..100u32 {
            let p = grid_rational(k, 100);
            let truthful = Bit::from_bool(k >= 50);
            let r = risk_dominance_check(&spec, q, &p, truthful, truthful.flip()).unwrap();
            let sign = if truthful.is_one() { &two * &p - &one } else { &one - &two * &p };
            for (q2, d) in &r.enumerated {
                let closed = &sign * (u1(Bit::One, q) - u1(Bit::Zero, q) + u1(Bit::One, *q2) - u1(Bit::Zero, *q2));
                if *d != closed {
                    mismatches += 1;
                }
                cases += 1;
            }
            if r.enumerated.len() != q as usize {
                mismatches += 1;
            }
            if !r.dominates {
                not_dominant += 1;
            }
        }
    }
    c.check(mismatches == 0, format!("{cases} enumerated differences equal the closed form exactly ({mismatches} mismatches)"));
    c.check(not_dominant == 0, format!("truth-seeking risk-dominates at every grid belief ({not_dominant} exceptions)"));
    c.verdict()
}

fn delegate_incentive() -> (bool, String) {
    let mut c = Checks::default();
    let spec = PayoffSpec::default_coordination();
    let ss = SignalStructure::linear_symmetric();
    // F_0 at the neutral signal 0 is 3/4; the match gap u(1,1,Q) - u(1,0,Q) is 1.
    let oracle_gap = (tilt_cdf0(1.0, 0.0) - 0.5) * 1.0;
    let r = delegate_incentive_check(&spec, &ss, 5, 0.1).unwrap();
    c.check(r.passed && (r.gap - 0.25).abs() < 1e-12 && (oracle_gap - 0.25).abs() < 1e-12, format!("Q=5, c=0.1 passes with gap {}", r.gap));
    let mut passes_at_03 = Vec::new();
    let mut gap_errors = 0;
    for q in 1..=spec.m_bound {
        let r = delegate_incentive_check(&spec, &ss, q, 0.3).unwrap();
        if r.passed {
            passes_at_03.push(q);
        }
        if (r.gap - oracle_gap).abs() > 1e-12 {
            gap_errors += 1;
        }
    }
    c.check(passes_at_03.is_empty(), format!("c=0.3 fails at every Q <= {}", spec.m_bound));
    c.check(gap_errors == 0, "gap equals (F_0(s^) - 1/2) * match gap at every Q");
    c.verdict()
}

fn larger_communities_learn_more() -> (bool, String) {
    let mut c = Checks::default();
    let spec = ScenarioConfig::preset("prop4_truthseek_endog").unwrap().build().unwrap();
    let (cost, base_match, beta) = (0.5, 1.0, 0.25);
    let oracle = |q: u32| tilt_cdf0(1.0, linear_limit_cutoff(cost, base_match * (1.0 + beta * (q - 1) as f64)));
    let (g5, g10) = (SizeDistribution::degenerate(5), SizeDistribution::degenerate(10));
    let cmp = compare_fosd(&spec, &g5, &g10).unwrap();
    c.check(
        cmp.separated(),
        format!(
            "p(delta10) - p(delta5) = {:.5} vs half-widths {:.5} + {:.5}",
            cmp.high.p_correct - cmp.low.p_correct,
            cmp.high.half_width(),
            cmp.low.half_width()
        ),
    );
    for (est, q) in [(cmp.low, 5), (cmp.high, 10)] {
        let a = oracle(q);
        c.check(est.analytic.is_some_and(|x| (x - a).abs() < 1e-9), format!("Q={q} analytic {a:.5}"));
        c.check((est.p_correct - a).abs() <= 0.02, format!("Q={q} simulated {:.5}", est.p_correct));
    }
    c.verdict()
}

fn private_signals_herd() -> (bool, String) {
    let mut c = Checks::default();
    let engine = preset_engine("prop5_private_signals");
    let spec = engine.spec();
    let sol = private_signal_cutoff(&spec.signal, &spec.payoff, 20, 0.9, 200).unwrap();
    c.check(sol.converged && sol.cutoff == -1.0, format!("cutoff at posterior 0.9 = {}", sol.cutoff));
    c.check(spec.sizes.entries() == [(20, 1.0)] && spec.horizon == 500, "Q=20, T=500");
    let curve = engine.estimate_curve();
    let p = curve.terminal().p_correct;
    c.check(p < 0.99, format!("p_correct(500) = {p:.5}"));
    let (wrong, lo, _) = curve.wrong_herd_frequency();
    c.check(lo > 0.0, format!("wrong-herd frequency {wrong:.5}, Wilson lower bound {lo:.5}"));
    c.verdict()
}

/// Weak Nash check for `k` agents on action 1 under `match_bonus *
/// 1{a = theta} + kappa / m`.
fn separation_oracle(match_bonus: f64, kappa: f64, q: u32, k: u32, p: f64) -> bool {
    let ev1 = |m: u32| p * match_bonus + kappa / m as f64;
    let ev0 = |m: u32| (1.0 - p) * match_bonus + kappa / m as f64;
    let ones_ok = k == 0 || ev1(k) >= ev0(q - k + 1);
    let zeros_ok = k == q || ev0(q - k) >= ev1(k + 1);
    ones_ok && zeros_ok
}

fn separation_majority() -> (bool, String) {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut minority = 0;
    let mut disagreements = 0;
    let mut draws = 0;
    for _ in 0..20 {
        let (m, kappa) = (rng.gen_range(0.2..3.0), rng.gen_range(0.2..6.0));
        let spec = PayoffSpec {
            form: PayoffForm::InverseCrowd { match_bonus: m, kappa },
            mode: PayoffMode::Separation,
            m_bound: 64,
        };
        for q in 1..=8u32 {
            for _ in 0..50 {
                let p: f64 = rng.gen_range(0.5..1.0);
                if p == 0.5 {
                    continue;
                }
                let eq = separation_split(&spec, q, p).unwrap();
                let oracle: Vec<u32> = (0..=q).filter(|&k| separation_oracle(m, kappa, q, k, p)).collect();
                if eq != oracle {
                    disagreements += 1;
                }
                if eq.iter().any(|&k| k < q.div_ceil(2)) {
                    minority += 1;
                }
                draws += 1;
            }
        }
    }
    c.check(minority == 0, format!("{draws} draws over 20 specs: no equilibrium below ceil(Q/2)"));
    c.check(disagreements == 0, format!("equilibrium sets match brute force ({disagreements} differ)"));
    let hand = selected_split(&PayoffSpec::separation(2.0), 4, 0.6).unwrap();
    let hand_oracle: Vec<u32> = (0..=4).filter(|&k| separation_oracle(1.0, 2.0, 4, k, 0.6)).collect();
    c.check(hand == 2 && hand_oracle == [2], format!("kappa=2, Q=4, P=0.6 gives Q1 = {hand}"));
    c.verdict()
}

fn base_spec(signal: SignalStructure, observation: ObservationScheme, q: u32) -> ScenarioSpec {
    ScenarioSpec {
        signal,
        payoff: PayoffSpec::default_coordination(),
        horizon: observation.horizon,
        observation,
        strategy: StrategyKind::TruthSeeking,
        sizes: SizeDistribution::degenerate(q),
        replications: 1,
        seed: 11,
        herd_window: DEFAULT_HERD_WINDOW,
        forced_state: None,
    }
}

fn belief_engine_oracles() -> (bool, String) {
    let mut c = Checks::default();
    let ss = SignalStructure::linear_symmetric();
    let b = belief_step_bounds(&ss, 1, 0.25).unwrap();
    // Cutoffs at -1/2 and 1/2. Each cutoff gives two action likelihood
    // ratios; y is the largest once every ratio is oriented below one.
    let f1 = |s: f64| (s + 1.0) / 2.0 + (s * s - 1.0) / 4.0;
    let f0 = |s: f64| tilt_cdf0(1.0, s);
    let y_oracle = [-0.5, 0.5]
        .into_iter()
        .flat_map(|cut| [f1(cut) / f0(cut), (1.0 - f1(cut)) / (1.0 - f0(cut))])
        .map(|r| if r > 1.0 { 1.0 / r } else { r })
        .fold(0.0, f64::max);
    c.check(b.ratio_bound_y == 0.6 && (y_oracle - 0.6).abs() < 1e-12, format!("y = {}", b.ratio_bound_y));
    c.check(b.floor_w == 0.0625 && f1(-0.5).min(1.0 - f0(0.5)) == 0.0625, format!("w = {}", b.floor_w));
    let n = reversal_horizon(0.75, 0.5, 0.6).unwrap();
    c.check(n == 3, format!("reversal horizon = {n}"));

    let complete = Engine::new(base_spec(SignalStructure::bounded_mixture(0.5).unwrap(), ObservationScheme::complete(10), 1)).unwrap();
    let line = Engine::new(base_spec(ss.clone(), ObservationScheme::line(10), 1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut within = 0;
    let trials = 200;
    for i in 0..trials {
        let (engine, chain) = if i % 2 == 0 { (&complete, false) } else { (&line, true) };
        let trace = engine.run_trace(1000 + i);
        let t = 6;
        let observed: Vec<ObservedCommunity> = (1..t)
            .filter(|&j| !chain || j == t - 1)
            .map(|j| {
                let p = &trace.periods[j as usize - 1];
                ObservedCommunity { index: j, size: p.size, ones: p.ones }
            })
            .collect();
        let history = NeighborhoodRealization { t, observed };
        let s = rng.gen_range(-0.9..0.9);
        let exact = posterior_exact(engine, &history, s, 1).unwrap();
        let mc = posterior_mc(engine, &history, s, 1, 20_000, 0.99, &mut rng).unwrap();
        let PosteriorMethod::MonteCarlo { half_width, .. } = mc.method else {
            unreachable!()
        };
        if (mc.prob_state1 - exact.prob_state1).abs() <= half_width {
            within += 1;
        }
    }
    c.check(within * 100 >= 95 * trials, format!("Monte Carlo within its half-width in {within}/{trials} trials"));
    c.verdict()
}

fn determinism_across_workers() -> (bool, String) {
    let mut c = Checks::default();
    let mut identical = 0;
    for p in presets::all() {
        let mut cfg = ScenarioConfig::preset(p.name).unwrap();
        cfg.set_replications(2500);
        let engine = Engine::new(cfg.build().unwrap()).unwrap();
        let one = curve_csv(&engine.estimate_curve_threads(1).unwrap());
        let four = curve_csv(&engine.estimate_curve_threads(4).unwrap());
        let again = curve_csv(&Engine::new(cfg.build().unwrap()).unwrap().estimate_curve_threads(3).unwrap());
        let same = one == four && one == again;
        if same {
            identical += 1;
        } else {
            c.check(false, format!("{} differs across worker counts", p.name));
        }
    }
    c.check(identical == presets::all().len(), format!("{identical} presets byte-identical with 1, 3 and 4 workers"));
    c.verdict()
}

type Criterion = (&'static str, fn() -> (bool, String));

fn main() {
    let criteria: [Criterion; 11] = [
        ("endogenous singleton limit (thm2_singleton_endog)", endogenous_singleton_limit),
        ("bounded cutoff truth-telling (thm1_bounded)", bounded_cutoff_truth_telling),
        ("herding baseline plateau (ex_bounded_singleton)", herding_baseline_plateau),
        ("no split equilibria", unanimity_oracle),
        ("risk dominance enumeration", risk_dominance_oracle),
        ("delegate observation incentive", delegate_incentive),
        ("larger communities learn more", larger_communities_learn_more),
        ("private signals herd (prop5_private_signals)", private_signals_herd),
        ("separation keeps the majority", separation_majority),
        ("belief engine oracles", belief_engine_oracles),
        ("determinism across worker counts", determinism_across_workers),
    ];
    let mut failures = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

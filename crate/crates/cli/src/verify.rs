use herdsim::strategy::{
    belief_grid, delegate_incentive_check, grid_rational, risk_dominance_check, risk_dominance_consistent,
    selected_split, separation_split, unanimity_search,
};
use herdsim::{Bit, PayoffMode, PayoffSpec, SignalStructure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Suite;

const UNANIMITY_MAX_Q: u32 = 8;
const SEPARATION_SPECS: usize = 20;
const SEPARATION_MAX_Q: u32 = 8;
const DELEGATE_MAX_Q: u32 = 16;

type Outcome = Result<String, String>;

fn assumptions(payoff: &PayoffSpec) -> Outcome {
    let report = payoff.validate_assumptions();
    if report.passed() {
        Ok(format!("all assumptions hold for m = 1..={}", payoff.m_bound.min(payoff.max_defined_m())))
    } else {
        let v: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        Err(v.join("; "))
    }
}

fn unanimity(payoff: &PayoffSpec) -> Option<Outcome> {
    if payoff.mode != PayoffMode::Coordination {
        return None;
    }
    let grid = belief_grid(100);
    for q in 1..=UNANIMITY_MAX_Q {
        match unanimity_search(payoff, q, &grid) {
            Err(e) => return Some(Err(format!("outside the scope of the unanimity result: {e}"))),
            Ok(found) if !found.is_empty() => {
                let f = &found[0];
                return Some(Err(format!(
                    "non-unanimous equilibrium at Q={} with {} ones, P={}",
                    f.q, f.ones, f.p
                )));
            }
            Ok(_) => {}
        }
    }
    Some(Ok(format!("no split equilibria for Q <= {UNANIMITY_MAX_Q} over {} beliefs", grid.len())))
}

fn risk_dominance(payoff: &PayoffSpec, max_q: u32) -> Option<Outcome> {
    if payoff.mode != PayoffMode::Coordination {
        return None;
    }
    for q in 1..=max_q {
        for k in 1..100 {
            let p = grid_rational(k, 100);
            let truthful = Bit::from_bool(k >= 50);
            let r = match risk_dominance_check(payoff, q, &p, truthful, truthful.flip()) {
                Ok(r) => r,
                Err(e) => return Some(Err(e.to_string())),
            };
            if !risk_dominance_consistent(&r) {
                return Some(Err(format!("enumeration differs from the closed form at Q={q}, P={k}/100")));
            }
            if !r.dominates {
                return Some(Err(format!("truth-seeking profile not risk dominant at Q={q}, P={k}/100")));
            }
        }
    }
    Some(Ok(format!("enumeration equals closed form and truth-seeking dominates for Q <= {max_q}")))
}

fn separation(payoff: &PayoffSpec) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut specs: Vec<PayoffSpec> = (0..SEPARATION_SPECS).map(|_| PayoffSpec::separation(rng.gen_range(0.2..5.0))).collect();
    if payoff.mode == PayoffMode::Separation {
        specs.push(payoff.clone());
    }
    let mut checked = 0;
    for spec in &specs {
        for q in 1..=SEPARATION_MAX_Q {
            for _ in 0..25 {
                let p = rng.gen_range(0.5..1.0);
                if p == 0.5 {
                    continue;
                }
                let splits = separation_split(spec, q, p).map_err(|e| e.to_string())?;
                if let Some(&bad) = splits.iter().find(|&&k| k < q.div_ceil(2)) {
                    return Err(format!("equilibrium with {bad} of {q} on the likelier state at P={p}"));
                }
                checked += 1;
            }
        }
    }
    let hand = selected_split(&PayoffSpec::separation(2.0), 4, 0.6).map_err(|e| e.to_string())?;
    if hand != 2 {
        return Err(format!("kappa=2, Q=4, P=0.6 selects {hand}, expected 2"));
    }
    Ok(format!("{checked} draws keep the majority on the likelier state"))
}

fn delegate(payoff: &PayoffSpec, signal: &SignalStructure) -> Option<Outcome> {
    if payoff.mode != PayoffMode::Coordination {
        return None;
    }
    for q in 1..=DELEGATE_MAX_Q.min(payoff.max_defined_m()) {
        for cost in [0.05, 0.1, 0.2, 0.3] {
            let r = match delegate_incentive_check(payoff, signal, q, cost) {
                Ok(r) => r,
                Err(e) => return Some(Err(e.to_string())),
            };
            let f0 = signal.cdf(q, Bit::Zero, r.neutral_signal);
            let gap = |m| payoff.utility(Bit::One, Bit::One, m).unwrap() - payoff.utility(Bit::One, Bit::Zero, m).unwrap();
            let closed = (f0 - 0.5) * gap(q);
            if (closed - r.gap).abs() > 1e-12 {
                return Some(Err(format!("Q={q}: incentive gap {} differs from (F_0(s^)-1/2)*gap = {closed}", r.gap)));
            }
            let borderline = (r.gap - cost).abs() <= 1e-12;
            if !borderline && r.passed != (r.gap > cost) {
                return Some(Err(format!("Q={q}, c={cost}: verdict disagrees with gap {}", r.gap)));
            }
        }
    }
    Some(Ok(format!("incentive gap matches its closed form for Q <= {DELEGATE_MAX_Q}")))
}

/// Runs the selected suites, printing one line each; returns the number of
/// failures.
pub fn run(suite: Suite, payoff: &PayoffSpec, signal: &SignalStructure, max_q: u32) -> usize {
    let want = |s| suite == Suite::All || suite == s;
    let mut results: Vec<(&str, Option<Outcome>)> = Vec::new();
    if want(Suite::Assumptions) {
        results.push(("assumptions", Some(assumptions(payoff))));
    }
    if want(Suite::Unanimity) {
        results.push(("unanimity", unanimity(payoff)));
    }
    if want(Suite::RiskDominance) {
        results.push(("risk-dominance", risk_dominance(payoff, max_q)));
    }
    if want(Suite::Separation) {
        results.push(("separation", Some(separation(payoff))));
    }
    if want(Suite::Delegate) {
        results.push(("delegate", delegate(payoff, signal)));
    }
    let mut failures = 0;
    for (name, outcome) in results {
        match outcome {
            None => println!("SKIP {name}: not applicable in {} mode", payoff.mode),
            Some(Ok(msg)) => println!("PASS {name}: {msg}"),
            Some(Err(msg)) => {
                failures += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    failures
}

//! Self-contained property suite over the game's structural claims.
//!
//! Every check draws its own random instances from a fixed seed and reports
//! the first counterexample it finds.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bargaining::{fnbs_1x, nbs_0x, BargainingInputs};
use crate::coalition::{
    self, check_characteristic_form_0x, externality_delta_impl, sum_over_partition_1x, value_1x, value_1x_by_expansion,
    BottomPartition, CoalitionValueInputs,
};
use crate::detection::{self, fused_sensing, shape_conditions, FusionRule, SensingContext};
use crate::error::Result;
use crate::hedonic::{form_partition, Game};
use crate::network::ScenarioGenerator;
use crate::partition::{bell_number, SetPartitions};
use crate::rng::{stream_rng, SCENARIO_STREAM};

pub const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub quick: bool,
    /// Flips the sign of `A(x̃)` in the externality closed form, which the
    /// suite must catch.
    pub inject_externality_fault: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Value>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{:<width$}  {}  {:>7} cases  {:>9.1} ms  {}\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.cases,
                c.elapsed_ms,
                c.detail,
            ));
        }
        out
    }
}

struct Check {
    cases: usize,
    detail: String,
    counterexample: Option<Value>,
}

impl Check {
    fn ok(cases: usize, detail: impl Into<String>) -> Self {
        Self {
            cases,
            detail: detail.into(),
            counterexample: None,
        }
    }

    fn fail(cases: usize, detail: impl Into<String>, counterexample: Value) -> Self {
        Self {
            cases,
            detail: detail.into(),
            counterexample: Some(counterexample),
        }
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<Check>) -> CheckOutcome {
    let start = Instant::now();
    let result = f();
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    match result {
        Ok(c) => CheckOutcome {
            name,
            passed: c.counterexample.is_none(),
            cases: c.cases,
            detail: c.detail,
            counterexample: c.counterexample,
            elapsed_ms,
        },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            cases: 0,
            detail: format!("error: {e}"),
            counterexample: Some(json!({ "error": e.to_string() })),
            elapsed_ms,
        },
    }
}

pub fn run_suite(opts: &VerifyOptions) -> VerifyReport {
    let draws = if opts.quick { 100 } else { 1000 };
    let seeds = if opts.quick { 10 } else { 100 };
    let rng = |k: u64| stream_rng(opts.seed, 100 + k);
    let checks = vec![
        timed("partition_enumeration", check_enumeration),
        timed("md_conservation", check_md_conservation),
        timed("characteristic_form_0x", || check_characteristic_form(draws, &mut rng(1))),
        timed("equal_efficiency_1x", || check_equal_efficiency(draws, &mut rng(2))),
        timed("externality_closed_form", || {
            check_externality(draws, opts.inject_externality_fault, &mut rng(3))
        }),
        timed("value_1x_expansion", || check_value_1x(draws, &mut rng(4))),
        timed("split_snr_shape", check_split_shape),
        timed("nbs_properties", || check_nbs(draws, &mut rng(5))),
        timed("formation_stability", || check_stability(seeds)),
    ];
    VerifyReport { checks }
}

fn check_enumeration() -> Result<Check> {
    let mut cases = 0;
    for n in 0..=6 {
        let all: Vec<_> = SetPartitions::new(n).collect();
        cases += all.len();
        let distinct: std::collections::BTreeSet<_> = all.iter().collect();
        if all.len() as u64 != bell_number(n) || distinct.len() != all.len() {
            return Ok(Check::fail(cases, format!("n = {n}"), json!({ "n": n, "count": all.len() })));
        }
    }
    Ok(Check::ok(cases, "Bell counts for 0..=6 players"))
}

fn check_md_conservation() -> Result<Check> {
    let mut cases = 0;
    let mut worst = 0.0f64;
    for budget in [1e-4, 0.01, 0.1] {
        for n in 1..=6 {
            let ctx = SensingContext::new(budget, n, 5, FusionRule::And)?;
            for blocks in SetPartitions::new(n) {
                cases += 1;
                let mut pass = 1.0;
                for b in &blocks {
                    pass *= 1.0 - detection::coalition_md_target(&ctx, b.len())?;
                }
                let gap = (1.0 - pass - budget).abs();
                worst = worst.max(gap);
                if gap > TOL {
                    return Ok(Check::fail(
                        cases,
                        format!("gap {gap:e}"),
                        json!({ "budget": budget, "blocks": blocks, "integrated": 1.0 - pass }),
                    ));
                }
            }
        }
    }
    Ok(Check::ok(cases, format!("max gap {worst:.1e}")))
}

fn check_characteristic_form(draws: usize, rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut min_margin = f64::INFINITY;
    for i in 0..draws {
        let n = 4 + i % 3;
        let fa: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let beta = rng.gen::<f64>();
        let report = check_characteristic_form_0x(&fa, beta)?;
        min_margin = min_margin.min(report.min_superadditive_margin);
        if !report.passed() {
            return Ok(Check::fail(
                i + 1,
                report.violations[0].clone(),
                json!({ "member_fa": fa, "beta": beta, "violations": report.violations }),
            ));
        }
    }
    Ok(Check::ok(draws, format!("min superadditive margin {min_margin:.2e}")))
}

fn check_equal_efficiency(draws: usize, rng: &mut ChaCha8Rng) -> Result<Check> {
    let partitions: Vec<_> = SetPartitions::new(5).collect();
    let mut worst = 0.0f64;
    for i in 0..draws {
        let fa: Vec<f64> = (0..5).map(|_| rng.gen::<f64>()).collect();
        let beta = rng.gen::<f64>();
        let closed = beta * (1.0 - fa.iter().product::<f64>());
        for blocks in &partitions {
            let p = BottomPartition::new(0, blocks.clone())?;
            let inputs = CoalitionValueInputs::from_member_fa(beta, &p, |m| fa[m])?;
            let id = sum_over_partition_1x(&inputs)?;
            let gap = id.gap().max((id.term_sum - closed).abs());
            worst = worst.max(gap);
            if gap > TOL {
                return Ok(Check::fail(
                    i + 1,
                    format!("gap {gap:e}"),
                    json!({ "member_fa": fa, "beta": beta, "blocks": blocks, "term_sum": id.term_sum, "closed_form": closed }),
                ));
            }
        }
    }
    Ok(Check::ok(draws * partitions.len(), format!("max gap {worst:.1e}")))
}

fn random_blocks(rng: &mut ChaCha8Rng, min_blocks: usize, max_blocks: usize) -> Result<CoalitionValueInputs> {
    let k = rng.gen_range(min_blocks..=max_blocks);
    let fa = (0..k).map(|_| rng.gen::<f64>()).collect();
    let sizes = (0..k).map(|_| rng.gen_range(1..=3)).collect();
    CoalitionValueInputs::new(rng.gen::<f64>(), fa, sizes)
}

fn check_externality(draws: usize, inject: bool, rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for i in 0..draws {
        let inputs = random_blocks(rng, 3, 5)?;
        let mut idx: Vec<usize> = (0..inputs.num_blocks()).collect();
        idx.shuffle(rng);
        let (eta, xi1, xi2) = (idx[0], idx[1], idx[2]);
        let merged = inputs.merged(xi1, xi2)?;
        let hi = xi1.max(xi2);
        let eta_after = if eta > hi { eta - 1 } else { eta };
        let direct = value_1x(eta, &inputs)? - value_1x(eta_after, &merged)?;
        let closed = externality_delta_impl(eta, xi1, xi2, &inputs, inject)?;
        let gap = (closed - direct).abs();
        worst = worst.max(gap);
        if gap > TOL || closed < -1e-15 {
            return Ok(Check::fail(
                i + 1,
                format!("closed form {closed:e} vs direct {direct:e}"),
                json!({
                    "beta": inputs.beta,
                    "block_fa": inputs.block_fa,
                    "block_sizes": inputs.block_sizes,
                    "eta": eta, "xi1": xi1, "xi2": xi2,
                    "closed_form": closed, "direct": direct,
                }),
            ));
        }
    }
    Ok(Check::ok(draws, format!("max gap {worst:.1e}")))
}

fn check_value_1x(draws: usize, rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst = 0.0f64;
    for i in 0..draws {
        let inputs = random_blocks(rng, 1, 8)?;
        for eta in 0..inputs.num_blocks() {
            let a = value_1x(eta, &inputs)?;
            let b = value_1x_by_expansion(eta, &inputs)?;
            worst = worst.max((a - b).abs());
            if (a - b).abs() > TOL {
                return Ok(Check::fail(
                    i + 1,
                    format!("grouped {a} vs expanded {b}"),
                    json!({ "block_fa": inputs.block_fa, "block_sizes": inputs.block_sizes, "eta": eta }),
                ));
            }
        }
    }
    Ok(Check::ok(draws, format!("max gap {worst:.1e}")))
}

/// Smallest member FA trusted in the split-shape check; below it the
/// normal tail has underflowed and the FA floor flattens the curve.
const REPRESENTABLE_FA: f64 = 1e-250;

/// AND-rule FA peaks and OR-rule FA bottoms out at the equal split, over
/// the grid points where the sufficient conditions hold.
fn check_split_shape() -> Result<Check> {
    let mut cases = 0;
    let mut skipped = 0;
    let points = 101;
    let centre = (points - 1) / 2;
    for &mean in &[2.0, 5.0, 10.0, 20.0] {
        for &md in &[1e-4, 1e-3] {
            for &nu in &[5u32, 10] {
                let mut and_vals = Vec::new();
                let mut or_vals = Vec::new();
                for i in 0..points {
                    let l1 = 2.0 * mean * i as f64 / (points - 1) as f64;
                    let snrs = [l1, 2.0 * mean - l1];
                    if !shape_conditions(md, nu, &snrs)?.both() {
                        continue;
                    }
                    let and = fused_sensing(&snrs, md, nu, FusionRule::And)?;
                    let or = fused_sensing(&snrs, md, nu, FusionRule::Or)?;
                    if and.member_fa.iter().chain(&or.member_fa).any(|&p| p < REPRESENTABLE_FA) {
                        continue;
                    }
                    and_vals.push((i, and.coalition_fa));
                    or_vals.push((i, or.coalition_fa));
                }
                if !and_vals.iter().any(|&(i, _)| i == centre) {
                    skipped += 1;
                    continue;
                }
                cases += and_vals.len();
                let argmax = and_vals.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
                let argmin = or_vals.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
                if argmax != centre || argmin != centre {
                    return Ok(Check::fail(
                        cases,
                        format!("extremum off centre at mean {mean}, md {md}, nu {nu}"),
                        json!({ "mean_snr": mean, "coalition_md": md, "num_samples": nu, "and_argmax": argmax, "or_argmin": argmin }),
                    ));
                }
            }
        }
    }
    Ok(Check::ok(
        cases,
        format!("equal split is the AND maximum and OR minimum ({skipped} settings beyond f64 range)"),
    ))
}

fn check_nbs(draws: usize, rng: &mut ChaCha8Rng) -> Result<Check> {
    for i in 0..draws {
        let n = rng.gen_range(1..=8);
        let fa = (0..n).map(|m| (m, rng.gen::<f64>())).collect();
        let inputs = BargainingInputs::and_rule(0, rng.gen::<f64>(), fa);
        let a = nbs_0x(&inputs);
        let surplus: Vec<f64> = a.payoffs.iter().map(|(m, p)| p - a.disagreement.values[m]).collect();
        let spread = surplus.iter().fold(0.0f64, |acc, s| acc.max((s - surplus[0]).abs()));
        let balance = (a.total() - a.grand_value).abs();
        let min_surplus = surplus.iter().copied().fold(f64::INFINITY, f64::min);
        let f = fnbs_1x(&inputs)?;
        let fnbs_gap = (f.total() - inputs.beta * (1.0 - inputs.member_fa.values().product::<f64>())).abs();
        if spread > TOL || balance > TOL || min_surplus < -TOL || fnbs_gap > TOL {
            return Ok(Check::fail(
                i + 1,
                format!("spread {spread:e}, balance {balance:e}, min surplus {min_surplus:e}, fNBS gap {fnbs_gap:e}"),
                json!({ "beta": inputs.beta, "member_fa": inputs.member_fa.values().collect::<Vec<_>>() }),
            ));
        }
    }
    Ok(Check::ok(draws, "budget balance, individual rationality, equal surplus"))
}

fn check_stability(seeds: u64) -> Result<Check> {
    let (m, n) = (10usize, 5usize);
    let bound = (n as f64).powi(m as i32);
    let mut max_switches = 0;
    for seed in 0..seeds {
        let scenario = ScenarioGenerator::new(m, n).generate(&mut stream_rng(seed, SCENARIO_STREAM))?;
        let result = form_partition(&scenario, seed)?;
        let trace = &result.trace;
        max_switches = max_switches.max(trace.num_switches());
        let report = Game::new(scenario)?.audit(&result.partition)?;
        let monotone = trace.switches.iter().all(|s| s.social_after > s.social_before)
            && trace
                .switches
                .windows(2)
                .all(|w| w[1].welfare >= w[0].welfare)
            && trace.switches.first().is_none_or(|s| s.welfare >= trace.initial_welfare);
        let counted = trace.fa_evaluations + trace.fa_skipped == trace.fa_computations;
        if !report.stable || trace.num_switches() as f64 > bound || !monotone || !counted {
            return Ok(Check::fail(
                seed as usize + 1,
                format!("seed {seed}: stable {}, monotone {monotone}, counted {counted}", report.stable),
                json!({ "seed": seed, "counterexample": report.counterexample, "switches": trace.num_switches() }),
            ));
        }
    }
    Ok(Check::ok(seeds as usize, format!("M={m}, N={n}; max switches {max_switches}")))
}

/// Externality nonnegativity helper used by examples: Δ for every ordered
/// block triple of `inputs`.
pub fn all_externalities(inputs: &CoalitionValueInputs) -> Result<Vec<(usize, usize, usize, f64)>> {
    let k = inputs.num_blocks();
    let mut out = Vec::new();
    for eta in 0..k {
        for xi1 in 0..k {
            for xi2 in (xi1 + 1)..k {
                if eta != xi1 && eta != xi2 {
                    out.push((eta, xi1, xi2, coalition::externality_delta(eta, xi1, xi2, inputs)?));
                }
            }
        }
    }
    Ok(out)
}

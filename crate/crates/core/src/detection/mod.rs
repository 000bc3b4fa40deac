//! Energy-detection statistics under constant-detection-rate constraints.
//!
//! Every channel carries an integrated miss-detection budget `P_MD^Ch`. It
//! is split across the bottom-layer coalitions sensing that channel so the
//! budget holds for any partition, and then across the members of each
//! coalition so that every member carries the same individual MD target.
//! False-alarm probabilities follow from the AWGN energy-detector model
//!
//! ```text
//! P_FA(m) = Q( sqrt(2λ + 1) · Q⁻¹(1 − P_MD(m)) + λ · sqrt(ν) )
//! ```
//!
//! combined across members by AND (product) or OR (complement product).

mod normal;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use normal::{q_func, q_inv};

/// Individual FA values are clamped to this floor before being multiplied.
pub const FA_FLOOR: f64 = 1e-300;

/// Coalitions larger than this accumulate products in log space.
const LOG_SPACE_THRESHOLD: usize = 20;

/// Decision fusion across the members of a cooperating coalition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FusionRule {
    /// The coalition declares the PU present only if every member does.
    #[default]
    And,
    /// The coalition declares the PU present if any member does.
    Or,
}

/// Sensing parameters shared by all coalitions on one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingContext {
    pub md_budget: f64,
    /// Number of SUs sensing the channel, |S|.
    pub population: usize,
    pub num_samples: u32,
    pub fusion_rule: FusionRule,
}

impl SensingContext {
    pub fn new(md_budget: f64, population: usize, num_samples: u32, fusion_rule: FusionRule) -> Result<Self> {
        if !(md_budget > 0.0 && md_budget < 1.0) {
            return Err(Error::ProbabilityDomain(md_budget));
        }
        if population == 0 {
            return Err(invalid("population", "channel population must be at least 1"));
        }
        if num_samples == 0 {
            return Err(invalid("num_samples", "must be at least 1"));
        }
        Ok(Self {
            md_budget,
            population,
            num_samples,
            fusion_rule,
        })
    }

    pub fn with_rule(self, fusion_rule: FusionRule) -> Self {
        Self { fusion_rule, ..self }
    }

    pub fn with_population(self, population: usize) -> Result<Self> {
        Self::new(self.md_budget, population, self.num_samples, self.fusion_rule)
    }

    fn check_size(&self, size: usize) -> Result<()> {
        if size == 0 {
            return Err(invalid("coalition_size", "coalitions are nonempty"));
        }
        if size > self.population {
            return Err(Error::CoalitionTooLarge {
                size,
                population: self.population,
            });
        }
        Ok(())
    }
}

/// MD target of a coalition of `size` SUs, `1 − (1 − P_MD^Ch)^{|η|/|S|}`.
pub fn coalition_md_target(ctx: &SensingContext, size: usize) -> Result<f64> {
    ctx.check_size(size)?;
    let exponent = size as f64 / ctx.population as f64;
    Ok(-(exponent * (-ctx.md_budget).ln_1p()).exp_m1())
}

/// Individual MD target of each member of a coalition with MD `coalition_md`.
///
/// Under AND the coalition detects the PU only if every member does, so
/// `1 − P_MD(η) = (1 − P_MD(m))^{|η|}`. Under OR it misses only if every
/// member misses, so `P_MD(η) = P_MD(m)^{|η|}`.
pub fn member_md(coalition_md: f64, size: usize, rule: FusionRule) -> Result<f64> {
    if !(coalition_md > 0.0 && coalition_md < 1.0) {
        return Err(Error::ProbabilityDomain(coalition_md));
    }
    if size == 0 {
        return Err(invalid("coalition_size", "coalitions are nonempty"));
    }
    let k = size as f64;
    Ok(match rule {
        FusionRule::And => -((-coalition_md).ln_1p() / k).exp_m1(),
        FusionRule::Or => coalition_md.powf(1.0 / k),
    })
}

/// Individual MD target of every SU on a channel of `population` SUs under
/// AND fusion, `1 − (1 − P_MD^Ch)^{1/|S|}`. It does not depend on how the
/// channel is partitioned.
pub fn channel_member_md(md_budget: f64, population: usize) -> Result<f64> {
    if !(md_budget > 0.0 && md_budget < 1.0) {
        return Err(Error::ProbabilityDomain(md_budget));
    }
    if population == 0 {
        return Err(invalid("population", "channel population must be at least 1"));
    }
    Ok(-((-md_budget).ln_1p() / population as f64).exp_m1())
}

/// AND-rule FA of one SU with SNR `lambda` on a channel of `population` SUs.
///
/// This is also the FA of the SU as a singleton coalition under either rule.
pub fn channel_member_fa(lambda: f64, num_samples: u32, md_budget: f64, population: usize) -> Result<f64> {
    individual_fa(lambda, num_samples, channel_member_md(md_budget, population)?)
}

/// Detection threshold `Q⁻¹(1 − P_MD(m))` for an individual MD target.
///
/// This is φ under the AND rule and φ̃ under the OR rule.
pub fn detection_threshold(md_individual: f64) -> Result<f64> {
    // Q⁻¹(1 − p) = −Q⁻¹(p), avoiding the cancellation in 1 − p.
    Ok(-q_inv(md_individual)?)
}

/// False-alarm probability of one energy detector at SNR `lambda`.
pub fn individual_fa(lambda: f64, num_samples: u32, md_individual: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", format!("SNR must be nonnegative, got {lambda}")));
    }
    let phi = detection_threshold(md_individual)?;
    Ok(fa_at_threshold(lambda, num_samples, phi))
}

fn fa_at_threshold(lambda: f64, num_samples: u32, threshold: f64) -> f64 {
    q_func((2.0 * lambda + 1.0).sqrt() * threshold + lambda * f64::from(num_samples).sqrt())
}

/// Sensing state of one coalition.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionSensing {
    pub member_snrs: Vec<f64>,
    pub coalition_md: f64,
    pub coalition_fa: f64,
    /// Per-member threshold, φ (AND) or φ̃ (OR).
    pub threshold: f64,
    pub member_fa: Vec<f64>,
}

/// Sensing outcome of a coalition whose MD target is given directly.
pub fn fused_sensing(
    member_snrs: &[f64],
    coalition_md: f64,
    num_samples: u32,
    rule: FusionRule,
) -> Result<CoalitionSensing> {
    if member_snrs.is_empty() {
        return Err(invalid("member_snrs", "coalitions are nonempty"));
    }
    let md = member_md(coalition_md, member_snrs.len(), rule)?;
    let threshold = detection_threshold(md)?;
    let mut member_fa = Vec::with_capacity(member_snrs.len());
    for &lambda in member_snrs {
        if !(lambda >= 0.0) {
            return Err(invalid("lambda", format!("SNR must be nonnegative, got {lambda}")));
        }
        member_fa.push(fa_at_threshold(lambda, num_samples, threshold));
    }
    let coalition_fa = match rule {
        FusionRule::And => and_combine(&member_fa),
        FusionRule::Or => or_combine(&member_fa),
    };
    Ok(CoalitionSensing {
        member_snrs: member_snrs.to_vec(),
        coalition_md,
        coalition_fa,
        threshold,
        member_fa,
    })
}

/// Coalition FA with the MD target derived from the channel budget.
pub fn coalition_sensing(ctx: &SensingContext, member_snrs: &[f64]) -> Result<CoalitionSensing> {
    let coalition_md = coalition_md_target(ctx, member_snrs.len())?;
    fused_sensing(member_snrs, coalition_md, ctx.num_samples, ctx.fusion_rule)
}

pub fn coalition_fa(ctx: &SensingContext, member_snrs: &[f64]) -> Result<f64> {
    Ok(coalition_sensing(ctx, member_snrs)?.coalition_fa)
}

/// Product of FA probabilities, clamped at [`FA_FLOOR`].
pub fn and_combine(fas: &[f64]) -> f64 {
    let clamped = fas.iter().map(|&p| p.clamp(FA_FLOOR, 1.0));
    if fas.len() > LOG_SPACE_THRESHOLD {
        clamped.map(f64::ln).sum::<f64>().exp()
    } else {
        clamped.product()
    }
}

/// `1 − ∏(1 − p)`, accumulated as a sum of logs.
pub fn or_combine(fas: &[f64]) -> f64 {
    let log_pass: f64 = fas.iter().map(|&p| (-p.clamp(FA_FLOOR, 1.0)).ln_1p()).sum();
    -log_pass.exp_m1()
}

/// Whether the two sufficient conditions for the split-SNR optimality
/// property hold for a coalition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeConditions {
    /// `P_MD(η) < 0.5^{|η|}`.
    pub md_condition: bool,
    /// `φ̃ > −sqrt(ν)(2λ+1)^{3/2} / (3λ+2)` for every member.
    pub threshold_condition: bool,
}

impl ShapeConditions {
    pub fn both(&self) -> bool {
        self.md_condition && self.threshold_condition
    }
}

/// Evaluates the sufficient conditions under which the AND-rule coalition FA
/// is quasiconcave (and the OR-rule FA quasiconvex) in the SNR split, peaking
/// at the equal split.
pub fn shape_conditions(coalition_md: f64, num_samples: u32, snrs: &[f64]) -> Result<ShapeConditions> {
    if snrs.is_empty() {
        return Err(invalid("member_snrs", "coalitions are nonempty"));
    }
    let size = snrs.len();
    let md_condition = coalition_md < 0.5f64.powi(size as i32);
    let phi_or = detection_threshold(member_md(coalition_md, size, FusionRule::Or)?)?;
    let sqrt_nu = f64::from(num_samples).sqrt();
    let threshold_condition = snrs.iter().all(|&l| {
        let bound = -sqrt_nu * (2.0 * l + 1.0).powf(1.5) / (3.0 * l + 2.0);
        phi_or > bound
    });
    Ok(ShapeConditions {
        md_condition,
        threshold_condition,
    })
}

/// [`shape_conditions`] with the coalition MD derived from the channel budget.
pub fn prop1_conditions(ctx: &SensingContext, snrs: &[f64]) -> Result<ShapeConditions> {
    let md = coalition_md_target(ctx, snrs.len())?;
    shape_conditions(md, ctx.num_samples, snrs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(md: f64, pop: usize) -> SensingContext {
        SensingContext::new(md, pop, 5, FusionRule::And).unwrap()
    }

    #[test]
    fn md_target_values() {
        let c = ctx(0.01, 7);
        assert!((coalition_md_target(&c, 7).unwrap() - 0.01).abs() < 1e-15);
        let half = coalition_md_target(&ctx(0.01, 2), 1).unwrap();
        assert!((half - (1.0 - 0.99f64.sqrt())).abs() < 1e-15);
        assert!((half - 0.0050126).abs() < 1e-7);
        let same = coalition_md_target(&ctx(0.01, 10), 5).unwrap();
        assert!((same - half).abs() < 1e-15);
        assert!(matches!(
            coalition_md_target(&c, 8),
            Err(Error::CoalitionTooLarge { size: 8, population: 7 })
        ));
    }

    #[test]
    fn and_member_md_independent_of_coalition_size() {
        let c = ctx(0.01, 9);
        let reference = member_md(coalition_md_target(&c, 1).unwrap(), 1, FusionRule::And).unwrap();
        for size in 1..=9 {
            let md = member_md(coalition_md_target(&c, size).unwrap(), size, FusionRule::And).unwrap();
            assert!((md - reference).abs() < 1e-16 * 10.0, "size {size}");
        }
    }

    #[test]
    fn fa_limits() {
        let md = 0.02;
        assert!((individual_fa(0.0, 5, md).unwrap() - (1.0 - md)).abs() < 1e-12);
        assert!(individual_fa(1e6, 5, md).unwrap() < 1e-300);
        let mut prev = 1.0;
        for i in 0..200 {
            let fa = individual_fa(i as f64 * 0.1, 5, md).unwrap();
            assert!(fa <= prev);
            prev = fa;
        }
        assert!(individual_fa(-1.0, 5, md).is_err());
        assert!(individual_fa(1.0, 5, 0.0).is_err());
    }

    #[test]
    fn single_member_and_symmetric_pairs() {
        let c = ctx(1e-3, 4);
        let solo = coalition_sensing(&c, &[3.0]).unwrap();
        let md = member_md(coalition_md_target(&c, 1).unwrap(), 1, FusionRule::And).unwrap();
        assert!((solo.coalition_fa - individual_fa(3.0, 5, md).unwrap()).abs() < 1e-15);
        let pair = coalition_sensing(&c, &[3.0, 3.0]).unwrap();
        assert!((pair.coalition_fa - pair.member_fa[0].powi(2)).abs() < 1e-15);
    }

    #[test]
    fn fusion_bounds() {
        let snrs = [0.3, 2.0, 7.5, 11.0];
        let c = ctx(0.01, 6);
        let and = coalition_sensing(&c, &snrs).unwrap();
        let min = and.member_fa.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(and.coalition_fa <= min);
        let or = coalition_sensing(&c.with_rule(FusionRule::Or), &snrs).unwrap();
        let max = or.member_fa.iter().cloned().fold(0.0, f64::max);
        assert!(or.coalition_fa >= max);
    }

    #[test]
    fn larger_population_is_penalized() {
        let snrs = [2.0, 4.0];
        for rule in [FusionRule::And, FusionRule::Or] {
            let mut prev = 0.0;
            for pop in 2..12 {
                let fa = coalition_fa(&ctx(0.01, pop).with_rule(rule), &snrs).unwrap();
                assert!(fa > prev, "{rule:?} pop {pop}");
                prev = fa;
            }
        }
    }

    #[test]
    fn log_space_agrees_with_direct_product() {
        let fas: Vec<f64> = (0..25).map(|i| 0.5 + 0.01 * i as f64).collect();
        let direct: f64 = fas.iter().product();
        assert!(((and_combine(&fas) - direct) / direct).abs() < 1e-12);
        assert!(and_combine(&[0.0, 0.5]) > 0.0);
    }

    #[test]
    fn shape_condition_examples() {
        let c = shape_conditions(1e-4, 5, &[5.0, 5.0]).unwrap();
        assert!(c.md_condition);
        let big: Vec<f64> = vec![5.0; 20];
        assert!(!shape_conditions(1e-4, 5, &big).unwrap().md_condition);
        // Few samples suffice at high SNR.
        assert!(shape_conditions(1e-4, 2, &[10.0, 10.0]).unwrap().threshold_condition);
        assert!(shape_conditions(1e-4, 2, &[10.0]).unwrap().threshold_condition);
        // ...but not at zero SNR with ν = 5.
        assert!(!shape_conditions(1e-4, 5, &[0.0, 10.0]).unwrap().threshold_condition);
    }
}

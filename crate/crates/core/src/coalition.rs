//! Partition-form values of bottom-layer coalitions on one channel.
//!
//! A coalition's value is its probability of successfully transmitting in a
//! slot: the channel must be idle, the coalition must not false-alarm, and it
//! must get through the contention with other coalitions that also detected
//! the opportunity. Under 0/X any concurrent detection destroys the slot;
//! under 1/X one competing SU is chosen uniformly.

use std::collections::BTreeSet;

use crate::detection::{self, SensingContext};
use crate::error::{invalid, Error, Result};
use crate::network::{ChannelId, SuId};
use crate::partition::SetPartitions;

/// Maximum number of competing coalitions expanded exactly under 1/X.
pub const MAX_COMPETITORS: usize = 30;

const IDENTITY_TOL: f64 = 1e-12;

/// A partition of the SUs on one channel into cooperating coalitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BottomPartition {
    pub channel: ChannelId,
    pub blocks: Vec<Vec<SuId>>,
}

impl BottomPartition {
    pub fn new(channel: ChannelId, blocks: Vec<Vec<SuId>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &m in block {
                if !seen.insert(m) {
                    return Err(Error::InvalidPartition(format!("SU {m} appears twice")));
                }
            }
        }
        Ok(Self { channel, blocks })
    }

    /// The single-block partition.
    pub fn grand(channel: ChannelId, members: &[SuId]) -> Self {
        let blocks = if members.is_empty() { vec![] } else { vec![members.to_vec()] };
        Self { channel, blocks }
    }

    pub fn singletons(channel: ChannelId, members: &[SuId]) -> Self {
        Self {
            channel,
            blocks: members.iter().map(|&m| vec![m]).collect(),
        }
    }

    pub fn members(&self) -> Vec<SuId> {
        let mut all: Vec<SuId> = self.blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    pub fn position(&self, block: &[SuId]) -> Option<usize> {
        let wanted: BTreeSet<_> = block.iter().collect();
        self.blocks
            .iter()
            .position(|b| b.len() == wanted.len() && b.iter().all(|m| wanted.contains(m)))
    }
}

/// One realisation of the false-alarm indicators of all coalitions other
/// than the one being valued; `true` means that coalition false-alarmed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaOutcomeVector {
    pub bits: Vec<bool>,
}

impl FaOutcomeVector {
    pub fn from_mask(mask: u64, len: usize) -> Self {
        Self {
            bits: (0..len).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    /// Probability of this outcome given the other coalitions' FA rates.
    pub fn probability(&self, others_fa: &[f64]) -> f64 {
        self.bits
            .iter()
            .zip(others_fa)
            .map(|(&x, &p)| if x { p } else { 1.0 - p })
            .product()
    }

    /// Number of SUs competing for access, Σ (1 − x_i)|ξ_i|.
    pub fn competing_sus(&self, others_size: &[usize]) -> usize {
        self.bits
            .iter()
            .zip(others_size)
            .filter(|(&x, _)| !x)
            .map(|(_, &s)| s)
            .sum()
    }
}

/// Per-block sensing summary of a bottom-layer partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionValueInputs {
    /// Channel availability β.
    pub beta: f64,
    pub block_fa: Vec<f64>,
    pub block_sizes: Vec<usize>,
}

impl CoalitionValueInputs {
    pub fn new(beta: f64, block_fa: Vec<f64>, block_sizes: Vec<usize>) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(invalid("beta", format!("availability must be in [0, 1], got {beta}")));
        }
        if block_fa.len() != block_sizes.len() {
            return Err(invalid("block_fa", "one FA probability per block"));
        }
        if let Some(p) = block_fa.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid("block_fa", format!("probability out of range: {p}")));
        }
        if block_sizes.contains(&0) {
            return Err(invalid("block_sizes", "blocks are nonempty"));
        }
        Ok(Self {
            beta,
            block_fa,
            block_sizes,
        })
    }

    /// Block FA as the product of member FAs (AND fusion, whose member
    /// thresholds do not depend on the block size).
    pub fn from_member_fa(beta: f64, partition: &BottomPartition, member_fa: impl Fn(SuId) -> f64) -> Result<Self> {
        let block_fa = partition
            .blocks
            .iter()
            .map(|b| detection::and_combine(&b.iter().map(|&m| member_fa(m)).collect::<Vec<_>>()))
            .collect();
        let sizes = partition.blocks.iter().map(Vec::len).collect();
        Self::new(beta, block_fa, sizes)
    }

    /// Block FA from SNRs under the context's fusion rule.
    pub fn from_sensing(
        beta: f64,
        partition: &BottomPartition,
        ctx: &SensingContext,
        snr: impl Fn(SuId) -> f64,
    ) -> Result<Self> {
        let mut block_fa = Vec::with_capacity(partition.blocks.len());
        for block in &partition.blocks {
            let snrs: Vec<f64> = block.iter().map(|&m| snr(m)).collect();
            block_fa.push(detection::coalition_fa(ctx, &snrs)?);
        }
        let sizes = partition.blocks.iter().map(Vec::len).collect();
        Self::new(beta, block_fa, sizes)
    }

    pub fn num_blocks(&self) -> usize {
        self.block_fa.len()
    }

    fn check_block(&self, eta: usize) -> Result<()> {
        if eta >= self.num_blocks() {
            return Err(Error::BlockNotInPartition(eta));
        }
        Ok(())
    }

    /// FA rates and sizes of every block except `skip`.
    fn others(&self, skip: &[usize]) -> (Vec<f64>, Vec<usize>) {
        (0..self.num_blocks())
            .filter(|i| !skip.contains(i))
            .map(|i| (self.block_fa[i], self.block_sizes[i]))
            .unzip()
    }

    /// The partition obtained by merging blocks `a` and `b` (AND fusion).
    pub fn merged(&self, a: usize, b: usize) -> Result<Self> {
        self.check_block(a)?;
        self.check_block(b)?;
        if a == b {
            return Err(Error::BlocksNotDistinct);
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let mut fa = self.block_fa.clone();
        let mut sizes = self.block_sizes.clone();
        fa[lo] = detection::and_combine(&[fa[lo], fa[hi]]);
        sizes[lo] += sizes[hi];
        fa.remove(hi);
        sizes.remove(hi);
        Self::new(self.beta, fa, sizes)
    }
}

/// 0/X value: `β(1 − P_FA(η)) ∏_{ξ ≠ η} P_FA(ξ)`.
pub fn value_0x(eta: usize, inputs: &CoalitionValueInputs) -> Result<f64> {
    inputs.check_block(eta)?;
    let (others_fa, _) = inputs.others(&[eta]);
    Ok(inputs.beta * (1.0 - inputs.block_fa[eta]) * others_fa.iter().product::<f64>())
}

/// Distribution of the number of competing SUs J among `others`:
/// `dist[j] = Pr(J = j)`.
fn competitor_distribution(others_fa: &[f64], others_size: &[usize]) -> Vec<f64> {
    let total: usize = others_size.iter().sum();
    let mut dist = vec![0.0; total + 1];
    dist[0] = 1.0;
    let mut reach = 0;
    for (&p, &s) in others_fa.iter().zip(others_size) {
        for j in (0..=reach).rev() {
            let mass = dist[j];
            if mass == 0.0 {
                continue;
            }
            // Detected the opportunity (no FA): adds s competitors.
            dist[j + s] += mass * (1.0 - p);
            dist[j] = mass * p;
        }
        reach += s;
    }
    dist
}

/// 1/X value: `β(1 − P_FA(η)) E[|η| / (|η| + J)]`.
///
/// The expectation over the 2^{|ρ|−1} FA outcomes is evaluated exactly by
/// grouping outcomes with equal J.
pub fn value_1x(eta: usize, inputs: &CoalitionValueInputs) -> Result<f64> {
    inputs.check_block(eta)?;
    let competitors = inputs.num_blocks() - 1;
    if competitors > MAX_COMPETITORS {
        return Err(Error::ExpansionTooLarge(competitors));
    }
    let (others_fa, others_size) = inputs.others(&[eta]);
    let size = inputs.block_sizes[eta] as f64;
    let expected_share: f64 = competitor_distribution(&others_fa, &others_size)
        .iter()
        .enumerate()
        .map(|(j, &pr)| pr * size / (size + j as f64))
        .sum();
    Ok(inputs.beta * (1.0 - inputs.block_fa[eta]) * expected_share)
}

/// 1/X value by literal expansion over every [`FaOutcomeVector`].
pub fn value_1x_by_expansion(eta: usize, inputs: &CoalitionValueInputs) -> Result<f64> {
    inputs.check_block(eta)?;
    let competitors = inputs.num_blocks() - 1;
    if competitors > MAX_COMPETITORS {
        return Err(Error::ExpansionTooLarge(competitors));
    }
    let (others_fa, others_size) = inputs.others(&[eta]);
    let size = inputs.block_sizes[eta] as f64;
    let mut sum = 0.0;
    for mask in 0..1u64 << competitors {
        let x = FaOutcomeVector::from_mask(mask, competitors);
        sum += size * x.probability(&others_fa) / (size + x.competing_sus(&others_size) as f64);
    }
    Ok(inputs.beta * (1.0 - inputs.block_fa[eta]) * sum)
}

/// Both sides of the equal-efficiency identity under 1/X.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyIdentity {
    /// Σ_η U_1/X(η; ρ).
    pub term_sum: f64,
    /// β(1 − ∏_η P_FA(η)); equals β(1 − ∏_m P_FA(m)) under AND fusion.
    pub closed_form: f64,
}

impl EfficiencyIdentity {
    pub fn gap(&self) -> f64 {
        (self.term_sum - self.closed_form).abs()
    }
}

pub fn sum_over_partition_1x(inputs: &CoalitionValueInputs) -> Result<EfficiencyIdentity> {
    let mut term_sum = 0.0;
    for eta in 0..inputs.num_blocks() {
        term_sum += value_1x(eta, inputs)?;
    }
    let closed_form = inputs.beta * (1.0 - inputs.block_fa.iter().product::<f64>());
    Ok(EfficiencyIdentity { term_sum, closed_form })
}

/// Loss in `η`'s 1/X value when blocks `xi1` and `xi2` merge, from the
/// closed-form expansion over the remaining blocks' FA outcomes:
///
/// ```text
/// Δ = β(1 − P_η) Σ_x̃ Pr(x̃) A(x̃)
/// A = (1/b1 − 1/b12)|η| P2(1 − P1) + (1/b2 − 1/b12)|η| P1(1 − P2)
/// ```
///
/// with `b1 = |η| + |ξ1| + J(x̃)`, `b2 = |η| + |ξ2| + J(x̃)` and
/// `b12 = |η| + |ξ1| + |ξ2| + J(x̃)`. Never negative.
pub fn externality_delta(eta: usize, xi1: usize, xi2: usize, inputs: &CoalitionValueInputs) -> Result<f64> {
    externality_delta_impl(eta, xi1, xi2, inputs, false)
}

pub(crate) fn externality_delta_impl(
    eta: usize,
    xi1: usize,
    xi2: usize,
    inputs: &CoalitionValueInputs,
    flip_a_sign: bool,
) -> Result<f64> {
    for b in [eta, xi1, xi2] {
        inputs.check_block(b)?;
    }
    if eta == xi1 || eta == xi2 || xi1 == xi2 {
        return Err(Error::BlocksNotDistinct);
    }
    let rest_count = inputs.num_blocks() - 3;
    if rest_count + 2 > MAX_COMPETITORS {
        return Err(Error::ExpansionTooLarge(rest_count + 2));
    }
    let (rest_fa, rest_size) = inputs.others(&[eta, xi1, xi2]);
    let size_eta = inputs.block_sizes[eta] as f64;
    let (s1, s2) = (inputs.block_sizes[xi1] as f64, inputs.block_sizes[xi2] as f64);
    let (p1, p2) = (inputs.block_fa[xi1], inputs.block_fa[xi2]);
    let sign = if flip_a_sign { -1.0 } else { 1.0 };

    let sum: f64 = competitor_distribution(&rest_fa, &rest_size)
        .iter()
        .enumerate()
        .map(|(j, &pr)| {
            let base = size_eta + j as f64;
            let (b1, b2, b12) = (base + s1, base + s2, base + s1 + s2);
            let a = (1.0 / b1 - 1.0 / b12) * size_eta * p2 * (1.0 - p1)
                + (1.0 / b2 - 1.0 / b12) * size_eta * p1 * (1.0 - p2);
            pr * sign * a
        })
        .sum();
    Ok(inputs.beta * (1.0 - inputs.block_fa[eta]) * sum)
}

/// Result of the exhaustive 0/X structure audit on one player set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CharacteristicFormReport {
    pub players: usize,
    pub partitions_checked: usize,
    /// Largest spread of one block's value across partitions containing it.
    pub max_value_spread: f64,
    pub superadditive_pairs_checked: usize,
    /// Smallest `U(η ∪ ξ) − U(η) − U(ξ)` seen.
    pub min_superadditive_margin: f64,
    /// Smallest `U(S) − Σ_η U(η)` over non-grand partitions.
    pub min_grand_margin: f64,
    pub violations: Vec<String>,
}

impl CharacteristicFormReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits the 0/X game on `member_fa.len() ≤ 6` players: partition
/// independence of block values, superadditivity and efficiency of the
/// grand coalition. Block FAs are member products (AND fusion).
pub fn check_characteristic_form_0x(member_fa: &[f64], beta: f64) -> Result<CharacteristicFormReport> {
    let n = member_fa.len();
    if n > 6 {
        return Err(Error::EnumerationTooLarge(n));
    }
    let mut report = CharacteristicFormReport {
        players: n,
        min_superadditive_margin: f64::INFINITY,
        min_grand_margin: f64::INFINITY,
        ..Default::default()
    };
    if n == 0 {
        return Ok(report);
    }
    let full = (1usize << n) - 1;
    let mut value: Vec<Option<f64>> = vec![None; full + 1];
    let mut spread = vec![0.0f64; full + 1];
    let mut grand_value = None;
    let mut partition_sums = Vec::new();

    for blocks in SetPartitions::new(n) {
        report.partitions_checked += 1;
        let partition = BottomPartition::new(0, blocks)?;
        let inputs = CoalitionValueInputs::from_member_fa(beta, &partition, |m| member_fa[m])?;
        let mut total = 0.0;
        for (i, block) in partition.blocks.iter().enumerate() {
            let mask = block.iter().fold(0usize, |acc, &m| acc | 1 << m);
            let v = value_0x(i, &inputs)?;
            total += v;
            match value[mask] {
                None => value[mask] = Some(v),
                Some(first) => spread[mask] = spread[mask].max((v - first).abs()),
            }
        }
        if partition.blocks.len() == 1 {
            grand_value = Some(total);
        } else {
            partition_sums.push((partition.blocks.clone(), total));
        }
    }

    for (mask, &s) in spread.iter().enumerate() {
        report.max_value_spread = report.max_value_spread.max(s);
        if s > IDENTITY_TOL {
            report
                .violations
                .push(format!("coalition mask {mask:#b} has partition-dependent value (spread {s:e})"));
        }
    }

    for a in 1..=full {
        for b in (a + 1)..=full {
            if a & b != 0 {
                continue;
            }
            let (ua, ub, uab) = (value[a].unwrap(), value[b].unwrap(), value[a | b].unwrap());
            let margin = uab - ua - ub;
            report.superadditive_pairs_checked += 1;
            report.min_superadditive_margin = report.min_superadditive_margin.min(margin);
            if margin < -IDENTITY_TOL {
                report.violations.push(format!(
                    "superadditivity fails for masks {a:#b}, {b:#b}: U(union)={uab} < {ua} + {ub}"
                ));
            }
        }
    }

    let grand = grand_value.expect("the grand coalition is always enumerated");
    for (blocks, total) in partition_sums {
        let margin = grand - total;
        report.min_grand_margin = report.min_grand_margin.min(margin);
        if margin < -IDENTITY_TOL {
            report
                .violations
                .push(format!("partition {blocks:?} beats the grand coalition: {total} > {grand}"));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inputs(beta: f64, fa: &[f64], sizes: &[usize]) -> CoalitionValueInputs {
        CoalitionValueInputs::new(beta, fa.to_vec(), sizes.to_vec()).unwrap()
    }

    #[test]
    fn lone_block_values() {
        let i = inputs(0.2, &[0.3], &[4]);
        assert!((value_0x(0, &i).unwrap() - 0.2 * 0.7).abs() < 1e-15);
        assert!((value_1x(0, &i).unwrap() - 0.2 * 0.7).abs() < 1e-15);
        assert!(matches!(value_0x(1, &i), Err(Error::BlockNotInPartition(1))));
    }

    #[test]
    fn certain_contention_zeroes_0x() {
        let i = inputs(0.5, &[0.1, 0.0, 0.6], &[1, 2, 1]);
        assert_eq!(value_0x(0, &i).unwrap(), 0.0);
    }

    #[test]
    fn value_0x_matches_outcome_enumeration() {
        let fa = [0.2, 0.45, 0.8];
        let i = inputs(0.3, &fa, &[1, 2, 3]);
        for eta in 0..3 {
            // Success iff η detects and every other block false-alarms.
            let mut brute = 0.0;
            for mask in 0..8u32 {
                let pr: f64 = (0..3).map(|k| if mask >> k & 1 == 1 { fa[k] } else { 1.0 - fa[k] }).product();
                let only_eta_detects = (0..3).all(|k| (mask >> k & 1 == 0) == (k == eta));
                if only_eta_detects {
                    brute += pr;
                }
            }
            assert!((value_0x(eta, &i).unwrap() - 0.3 * brute).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_singletons_split_evenly() {
        let i = inputs(0.4, &[0.0, 0.0], &[1, 1]);
        assert!((value_1x(0, &i).unwrap() - 0.2).abs() < 1e-15);
        assert!((value_1x(1, &i).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn grouped_expectation_matches_literal_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = rng.gen_range(1..9);
            let fa: Vec<f64> = (0..k).map(|_| rng.gen()).collect();
            let sizes: Vec<usize> = (0..k).map(|_| rng.gen_range(1..4)).collect();
            let i = inputs(rng.gen(), &fa, &sizes);
            for eta in 0..k {
                let a = value_1x(eta, &i).unwrap();
                let b = value_1x_by_expansion(eta, &i).unwrap();
                assert!((a - b).abs() < 1e-14, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn expansion_guard() {
        let i = inputs(0.2, &vec![0.5; 32], &vec![1; 32]);
        assert!(matches!(value_1x(0, &i), Err(Error::ExpansionTooLarge(31))));
        assert!(matches!(value_1x_by_expansion(0, &i), Err(Error::ExpansionTooLarge(31))));
    }

    #[test]
    fn equal_efficiency_small_cases() {
        let fa = [0.3, 0.6, 0.9];
        let singletons = inputs(0.2, &fa, &[1, 1, 1]);
        let id = sum_over_partition_1x(&singletons).unwrap();
        assert!(id.gap() < 1e-15);
        assert!((id.closed_form - 0.2 * (1.0 - 0.3 * 0.6 * 0.9)).abs() < 1e-15);
        let grand = inputs(0.2, &[0.3 * 0.6 * 0.9], &[3]);
        let g = sum_over_partition_1x(&grand).unwrap();
        assert!((g.term_sum - id.term_sum).abs() < 1e-15);
    }

    #[test]
    fn externality_vanishes_when_mergers_always_false_alarm() {
        let i = inputs(0.5, &[0.2, 1.0, 1.0, 0.4], &[2, 1, 3, 1]);
        assert_eq!(externality_delta(0, 1, 2, &i).unwrap(), 0.0);
    }

    #[test]
    fn externality_closed_form_matches_direct_subtraction() {
        let i = inputs(0.3, &[0.25, 0.6, 0.35], &[2, 1, 2]);
        let merged = i.merged(1, 2).unwrap();
        let direct = value_1x(0, &i).unwrap() - value_1x(0, &merged).unwrap();
        let closed = externality_delta(0, 1, 2, &i).unwrap();
        assert!((direct - closed).abs() < 1e-15);
        assert!(closed >= 0.0);
    }

    #[test]
    fn externality_argument_errors() {
        let i = inputs(0.3, &[0.25, 0.6, 0.35], &[2, 1, 2]);
        assert!(matches!(externality_delta(0, 1, 1, &i), Err(Error::BlocksNotDistinct)));
        assert!(matches!(externality_delta(0, 1, 5, &i), Err(Error::BlockNotInPartition(5))));
    }

    #[test]
    fn characteristic_form_small_sets() {
        assert!(check_characteristic_form_0x(&[0.4], 0.2).unwrap().passed());
        let r = check_characteristic_form_0x(&[0.1, 0.5, 0.7, 0.95], 0.2).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.partitions_checked, 15);
        // Disjoint nonempty pairs of a 4-set: (3^4 - 2·2^4 + 1) / 2 = 25.
        assert_eq!(r.superadditive_pairs_checked, 25);
        assert!(r.min_superadditive_margin >= 0.0);
        assert!(matches!(check_characteristic_form_0x(&[0.5; 7], 0.2), Err(Error::EnumerationTooLarge(7))));
    }

    #[test]
    fn partition_helpers() {
        assert!(BottomPartition::new(0, vec![vec![1, 2], vec![2]]).is_err());
        assert!(BottomPartition::new(0, vec![vec![]]).is_err());
        let p = BottomPartition::new(3, vec![vec![4, 1], vec![2]]).unwrap();
        assert_eq!(p.members(), vec![1, 2, 4]);
        assert_eq!(p.position(&[1, 4]), Some(0));
        assert_eq!(p.position(&[1]), None);
        assert_eq!(BottomPartition::grand(0, &[]).blocks.len(), 0);
    }

    #[test]
    fn outcome_vector_helpers() {
        let x = FaOutcomeVector::from_mask(0b01, 2);
        assert_eq!(x.bits, vec![true, false]);
        assert!((x.probability(&[0.3, 0.4]) - 0.3 * 0.6).abs() < 1e-15);
        assert_eq!(x.competing_sus(&[5, 2]), 2);
    }
}

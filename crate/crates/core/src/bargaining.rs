//! Payoff allocation inside the grand coalition of one channel.
//!
//! Under 0/X the bottom-layer game has characteristic form and the Nash
//! bargaining solution splits the cooperative surplus equally on top of each
//! SU's standalone value. Under 1/X the fine NBS uses the all-singleton
//! partition as disagreement point, which collapses to each SU's singleton
//! value in that partition.

use std::collections::BTreeMap;

use crate::coalition::{self, BottomPartition, CoalitionValueInputs};
use crate::detection::{self, FusionRule, SensingContext};
use crate::error::{invalid, Error, Result};
use crate::network::{ChannelId, MacModel, NetworkScenario, SuId};

/// Standalone values `U({m})` each SU falls back to if bargaining fails.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisagreementPoint {
    pub values: BTreeMap<SuId, f64>,
}

/// Agreed payoffs `a^{mC}` of the SUs sensing one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffAllocation {
    pub channel: ChannelId,
    pub mac: MacModel,
    pub payoffs: BTreeMap<SuId, f64>,
    pub disagreement: DisagreementPoint,
    /// Value of the grand coalition, `U(S)`.
    pub grand_value: f64,
    /// FA probability of the grand coalition.
    pub grand_fa: f64,
}

impl PayoffAllocation {
    pub fn empty(channel: ChannelId, mac: MacModel) -> Self {
        Self {
            channel,
            mac,
            payoffs: BTreeMap::new(),
            disagreement: DisagreementPoint::default(),
            grand_value: 0.0,
            grand_fa: 1.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.payoffs.values().sum()
    }

    pub fn payoff(&self, m: SuId) -> Option<f64> {
        self.payoffs.get(&m).copied()
    }

    pub fn contains(&self, m: SuId) -> bool {
        self.payoffs.contains_key(&m)
    }

    pub fn members(&self) -> impl Iterator<Item = SuId> + '_ {
        self.payoffs.keys().copied()
    }

    pub fn slot_shares(&self) -> Result<BTreeMap<SuId, f64>> {
        slot_shares(&self.payoffs)
    }
}

/// Sensing summary of one channel's grand coalition, the input to Algorithm-1
/// style allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct BargainingInputs {
    pub channel: ChannelId,
    pub beta: f64,
    /// Individual FA probability of every member at the channel's current
    /// population (singleton-coalition thresholds).
    pub member_fa: BTreeMap<SuId, f64>,
    /// FA probability of the grand coalition.
    pub grand_fa: f64,
}

impl BargainingInputs {
    /// Grand-coalition FA as the product of member FAs (AND fusion).
    pub fn and_rule(channel: ChannelId, beta: f64, member_fa: BTreeMap<SuId, f64>) -> Self {
        let fas: Vec<f64> = member_fa.values().copied().collect();
        Self {
            channel,
            beta,
            member_fa,
            grand_fa: detection::and_combine(&fas),
        }
    }

    fn product_excluding(&self, skip: SuId) -> f64 {
        self.member_fa
            .iter()
            .filter(|(&m, _)| m != skip)
            .map(|(_, &p)| p)
            .product()
    }

    /// `U_0/X({m}) = β(1 − P_FA(m)) ∏_{i ≠ m} P_FA(i)`.
    pub fn singleton_value_0x(&self, m: SuId) -> f64 {
        self.beta * (1.0 - self.member_fa[&m]) * self.product_excluding(m)
    }
}

/// Nash bargaining solution of the 0/X game.
pub fn nbs_0x(inputs: &BargainingInputs) -> PayoffAllocation {
    let size = inputs.member_fa.len();
    if size == 0 {
        return PayoffAllocation::empty(inputs.channel, MacModel::ZeroX);
    }
    let grand_value = inputs.beta * (1.0 - inputs.grand_fa);
    let disagreement: BTreeMap<SuId, f64> =
        inputs.member_fa.keys().map(|&m| (m, inputs.singleton_value_0x(m))).collect();
    let surplus = (grand_value - disagreement.values().sum::<f64>()) / size as f64;
    let payoffs = disagreement.iter().map(|(&m, &d)| (m, surplus + d)).collect();
    PayoffAllocation {
        channel: inputs.channel,
        mac: MacModel::ZeroX,
        payoffs,
        disagreement: DisagreementPoint { values: disagreement },
        grand_value,
        grand_fa: inputs.grand_fa,
    }
}

/// Fine NBS of the 1/X game: each SU receives its 1/X value in the
/// all-singleton partition.
pub fn fnbs_1x(inputs: &BargainingInputs) -> Result<PayoffAllocation> {
    if inputs.member_fa.is_empty() {
        return Ok(PayoffAllocation::empty(inputs.channel, MacModel::OneX));
    }
    let members: Vec<SuId> = inputs.member_fa.keys().copied().collect();
    let singletons = BottomPartition::singletons(inputs.channel, &members);
    let values =
        CoalitionValueInputs::from_member_fa(inputs.beta, &singletons, |m| inputs.member_fa[&m])?;
    let mut payoffs = BTreeMap::new();
    for (i, &m) in members.iter().enumerate() {
        payoffs.insert(m, coalition::value_1x(i, &values)?);
    }
    Ok(PayoffAllocation {
        channel: inputs.channel,
        mac: MacModel::OneX,
        disagreement: DisagreementPoint { values: payoffs.clone() },
        payoffs,
        grand_value: inputs.beta * (1.0 - inputs.grand_fa),
        grand_fa: inputs.grand_fa,
    })
}

pub fn allocate(inputs: &BargainingInputs, mac: MacModel) -> Result<PayoffAllocation> {
    match mac {
        MacModel::ZeroX => Ok(nbs_0x(inputs)),
        MacModel::OneX => fnbs_1x(inputs),
    }
}

/// Each SU's share of a detected opportunity, `a^m / Σ_i a^i`.
pub fn slot_shares(payoffs: &BTreeMap<SuId, f64>) -> Result<BTreeMap<SuId, f64>> {
    if payoffs.values().any(|&a| a < 0.0 || !a.is_finite()) {
        return Err(invalid("payoffs", "payoffs must be finite and nonnegative"));
    }
    let total: f64 = payoffs.values().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateCoalition);
    }
    Ok(payoffs.iter().map(|(&m, &a)| (m, a / total)).collect())
}

/// Sensing inputs for the grand coalition `members` on channel `n`.
///
/// Member FAs use the thresholds of the channel population `|members|`; the
/// grand-coalition FA follows the scenario's fusion rule.
pub fn bargaining_inputs(scenario: &NetworkScenario, n: ChannelId, members: &[SuId]) -> Result<BargainingInputs> {
    let beta = scenario.channel(n)?.availability;
    if members.is_empty() {
        return Ok(BargainingInputs::and_rule(n, beta, BTreeMap::new()));
    }
    let radio = &scenario.radio;
    let mut member_fa = BTreeMap::new();
    let mut snrs = Vec::with_capacity(members.len());
    for &m in members {
        let lambda = scenario.pu_su_snr(m, n)?;
        snrs.push(lambda);
        member_fa.insert(
            m,
            detection::channel_member_fa(lambda, radio.num_samples, radio.md_budget, members.len())?,
        );
    }
    inputs_with_rule(n, beta, member_fa, &snrs, scenario)
}

/// Builds bargaining inputs from member FAs, recomputing the grand-coalition
/// FA when the scenario fuses by OR.
pub(crate) fn inputs_with_rule(
    n: ChannelId,
    beta: f64,
    member_fa: BTreeMap<SuId, f64>,
    snrs: &[f64],
    scenario: &NetworkScenario,
) -> Result<BargainingInputs> {
    let mut inputs = BargainingInputs::and_rule(n, beta, member_fa);
    if scenario.fusion_rule == FusionRule::Or && !snrs.is_empty() {
        let ctx = SensingContext::new(
            scenario.radio.md_budget,
            snrs.len(),
            scenario.radio.num_samples,
            FusionRule::Or,
        )?;
        inputs.grand_fa = detection::coalition_fa(&ctx, snrs)?;
    }
    Ok(inputs)
}

/// Full bottom-layer allocation for the SUs `members` on channel `n`.
pub fn allocate_on_channel(scenario: &NetworkScenario, n: ChannelId, members: &[SuId]) -> Result<PayoffAllocation> {
    allocate(&bargaining_inputs(scenario, n, members)?, scenario.mac_model)
}

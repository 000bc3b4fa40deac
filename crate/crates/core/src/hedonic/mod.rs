//! Top-layer hedonic game: which channel each SU senses and accesses.
//!
//! An SU's utility on a channel is its bottom-layer payoff times its rate
//! there. It moves to another channel only if that strictly raises its own
//! utility *and* strictly raises the combined payoff of everybody on the two
//! channels involved.

mod formation;

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bargaining::{self, PayoffAllocation};
use crate::detection;
use crate::error::{invalid, Error, Result};
use crate::network::{ChannelId, LinkTable, NetworkScenario, SuId};

pub use formation::{form_from, form_partition, FaLedger, MAX_FORMATION_SLOTS, Formation, FormationResult, FormationTrace, StepOutcome, SuAction, SuState, SwitchRecord};

/// Assignment of every SU to exactly one channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopPartition {
    assignment: Vec<ChannelId>,
    num_channels: usize,
}

impl TopPartition {
    pub fn new(assignment: Vec<ChannelId>, num_channels: usize) -> Result<Self> {
        if num_channels == 0 {
            return Err(invalid("num_channels", "need at least one channel"));
        }
        if let Some(&n) = assignment.iter().find(|&&n| n >= num_channels) {
            return Err(Error::UnknownChannel(n));
        }
        Ok(Self {
            assignment,
            num_channels,
        })
    }

    /// Every SU picks a channel uniformly at random.
    pub fn random<R: Rng + ?Sized>(num_sus: usize, num_channels: usize, rng: &mut R) -> Result<Self> {
        if num_channels == 0 {
            return Err(invalid("num_channels", "need at least one channel"));
        }
        let assignment = (0..num_sus).map(|_| rng.gen_range(0..num_channels)).collect();
        Self::new(assignment, num_channels)
    }

    pub fn num_sus(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn assignment(&self) -> &[ChannelId] {
        &self.assignment
    }

    pub fn channel_of(&self, m: SuId) -> Result<ChannelId> {
        self.assignment.get(m).copied().ok_or(Error::UnknownSu(m))
    }

    /// Members of channel `n`, ascending.
    pub fn members(&self, n: ChannelId) -> Vec<SuId> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == n)
            .map(|(m, _)| m)
            .collect()
    }

    pub fn population(&self, n: ChannelId) -> usize {
        self.assignment.iter().filter(|&&c| c == n).count()
    }

    pub fn move_su(&mut self, m: SuId, to: ChannelId) -> Result<()> {
        if to >= self.num_channels {
            return Err(Error::UnknownChannel(to));
        }
        let slot = self.assignment.get_mut(m).ok_or(Error::UnknownSu(m))?;
        *slot = to;
        Ok(())
    }

    /// Adapts the partition to a new network size. Existing SUs keep their
    /// channel when it survives; new SUs and SUs on removed channels pick
    /// one uniformly.
    pub fn resize<R: Rng + ?Sized>(&mut self, num_sus: usize, num_channels: usize, rng: &mut R) -> Result<()> {
        if num_channels == 0 {
            return Err(invalid("num_channels", "need at least one channel"));
        }
        self.assignment.truncate(num_sus);
        for n in self.assignment.iter_mut() {
            if *n >= num_channels {
                *n = rng.gen_range(0..num_channels);
            }
        }
        while self.assignment.len() < num_sus {
            self.assignment.push(rng.gen_range(0..num_channels));
        }
        self.num_channels = num_channels;
        Ok(())
    }
}

/// Top-layer utility `x^{mC} = a^{mC} R^{mn}`.
pub fn utility(m: SuId, allocation: &PayoffAllocation, rate: f64) -> Result<f64> {
    let a = allocation.payoff(m).ok_or(Error::NotAMember {
        su: m,
        channel: allocation.channel,
    })?;
    Ok(a * rate)
}

/// Both sides of the two preference inequalities for one candidate move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveEvaluation {
    pub su: SuId,
    pub from: ChannelId,
    pub to: ChannelId,
    pub utility_before: f64,
    pub utility_after: f64,
    pub social_before: f64,
    pub social_after: f64,
}

impl MoveEvaluation {
    /// Strict improvement on both counts; ties never move anybody.
    pub fn preferred(&self) -> bool {
        self.utility_after > self.utility_before && self.social_after > self.social_before
    }
}

/// Evaluates SU `m` leaving `from` (current coalition `from_now`, without
/// it `from_after`) for `to` (current coalition `to_now`, with it `to_after`).
pub fn evaluate_move(
    m: SuId,
    from_now: &PayoffAllocation,
    to_now: &PayoffAllocation,
    from_after: &PayoffAllocation,
    to_after: &PayoffAllocation,
    rate_from: f64,
    rate_to: f64,
) -> Result<MoveEvaluation> {
    if from_after.contains(m) {
        return Err(Error::AlreadyAMember {
            su: m,
            channel: from_after.channel,
        });
    }
    if to_now.contains(m) {
        return Err(Error::AlreadyAMember {
            su: m,
            channel: to_now.channel,
        });
    }
    Ok(MoveEvaluation {
        su: m,
        from: from_now.channel,
        to: to_now.channel,
        utility_before: utility(m, from_now, rate_from)?,
        utility_after: utility(m, to_after, rate_to)?,
        social_before: from_now.total() + to_now.total(),
        social_after: from_after.total() + to_after.total(),
    })
}

/// The preference relation: true iff `m` strictly prefers the move.
pub fn prefers(
    m: SuId,
    from_now: &PayoffAllocation,
    to_now: &PayoffAllocation,
    from_after: &PayoffAllocation,
    to_after: &PayoffAllocation,
    rate_from: f64,
    rate_to: f64,
) -> Result<bool> {
    Ok(evaluate_move(m, from_now, to_now, from_after, to_after, rate_from, rate_to)?.preferred())
}

/// A scenario bound to its precomputed link budget; evaluates allocations
/// and candidate moves for any top-layer partition.
#[derive(Debug, Clone)]
pub struct Game {
    scenario: NetworkScenario,
    links: LinkTable,
}

impl Game {
    pub fn new(scenario: NetworkScenario) -> Result<Self> {
        scenario.validate()?;
        let links = scenario.link_table()?;
        Ok(Self { scenario, links })
    }

    pub fn scenario(&self) -> &NetworkScenario {
        &self.scenario
    }

    pub fn links(&self) -> &LinkTable {
        &self.links
    }

    pub fn rate(&self, m: SuId, n: ChannelId) -> f64 {
        self.links.rate(m, n)
    }

    /// AND-rule FA of SU `m` on channel `n` at channel population `population`.
    pub fn member_fa(&self, m: SuId, n: ChannelId, population: usize) -> Result<f64> {
        let radio = &self.scenario.radio;
        detection::channel_member_fa(self.links.snr(m, n), radio.num_samples, radio.md_budget, population)
    }

    /// Allocation for the grand coalition `members` on `n`, from FAs the
    /// caller already holds (one per member, same order).
    pub fn allocation_from_fas(&self, n: ChannelId, members: &[SuId], fas: &[f64]) -> Result<PayoffAllocation> {
        let beta = self.scenario.channels[n].availability;
        let member_fa: BTreeMap<SuId, f64> = members.iter().copied().zip(fas.iter().copied()).collect();
        let snrs: Vec<f64> = members.iter().map(|&m| self.links.snr(m, n)).collect();
        let inputs = bargaining::inputs_with_rule(n, beta, member_fa, &snrs, &self.scenario)?;
        bargaining::allocate(&inputs, self.scenario.mac_model)
    }

    /// Allocation on `n` with member FAs drawn from `fa(m, n, population)`.
    pub fn allocation_with<F>(&self, n: ChannelId, members: &[SuId], fa: &mut F) -> Result<PayoffAllocation>
    where
        F: FnMut(SuId, ChannelId, usize) -> Result<f64>,
    {
        let fas = members
            .iter()
            .map(|&m| fa(m, n, members.len()))
            .collect::<Result<Vec<_>>>()?;
        self.allocation_from_fas(n, members, &fas)
    }

    /// Allocation for the grand coalition `members` on `n`, computing FAs afresh.
    pub fn allocation(&self, n: ChannelId, members: &[SuId]) -> Result<PayoffAllocation> {
        self.allocation_with(n, members, &mut |m, n, p| self.member_fa(m, n, p))
    }

    pub fn allocations(&self, partition: &TopPartition) -> Result<Vec<PayoffAllocation>> {
        (0..partition.num_channels())
            .map(|n| self.allocation(n, &partition.members(n)))
            .collect()
    }

    /// Sum of all payoffs over all channels.
    pub fn welfare(&self, partition: &TopPartition) -> Result<f64> {
        Ok(self.allocations(partition)?.iter().map(PayoffAllocation::total).sum())
    }

    /// Expected rate `a R` of every SU under `partition`.
    pub fn expected_rates(&self, partition: &TopPartition) -> Result<Vec<f64>> {
        let mut rates = vec![0.0; partition.num_sus()];
        for alloc in self.allocations(partition)? {
            for (m, a) in &alloc.payoffs {
                rates[*m] = a * self.rate(*m, alloc.channel);
            }
        }
        Ok(rates)
    }

    pub fn evaluate_move(&self, partition: &TopPartition, m: SuId, to: ChannelId) -> Result<MoveEvaluation> {
        self.evaluate_move_with(partition, m, to, &mut |i, n, p| self.member_fa(i, n, p))
    }

    /// Same as [`Game::evaluate_move`] with FAs supplied by `fa`.
    pub fn evaluate_move_with<F>(&self, partition: &TopPartition, m: SuId, to: ChannelId, fa: &mut F) -> Result<MoveEvaluation>
    where
        F: FnMut(SuId, ChannelId, usize) -> Result<f64>,
    {
        let from = partition.channel_of(m)?;
        if to >= partition.num_channels() {
            return Err(Error::UnknownChannel(to));
        }
        if to == from {
            return Err(Error::AlreadyAMember { su: m, channel: to });
        }
        let from_members = partition.members(from);
        let to_members = partition.members(to);
        let from_after: Vec<SuId> = from_members.iter().copied().filter(|&i| i != m).collect();
        let mut to_after = to_members.clone();
        to_after.push(m);
        to_after.sort_unstable();
        evaluate_move(
            m,
            &self.allocation_with(from, &from_members, fa)?,
            &self.allocation_with(to, &to_members, fa)?,
            &self.allocation_with(from, &from_after, fa)?,
            &self.allocation_with(to, &to_after, fa)?,
            self.rate(m, from),
            self.rate(m, to),
        )
    }

    /// Checks every SU against every other channel; returns the first
    /// preferred move found, if any.
    pub fn audit(&self, partition: &TopPartition) -> Result<StabilityReport> {
        let mut memo: HashMap<(SuId, ChannelId, usize), f64> = HashMap::new();
        let mut fa = |m: SuId, n: ChannelId, p: usize| -> Result<f64> {
            if let Some(&v) = memo.get(&(m, n, p)) {
                return Ok(v);
            }
            let v = self.member_fa(m, n, p)?;
            memo.insert((m, n, p), v);
            Ok(v)
        };
        let mut moves_checked = 0;
        for m in 0..partition.num_sus() {
            let from = partition.channel_of(m)?;
            for to in (0..partition.num_channels()).filter(|&n| n != from) {
                moves_checked += 1;
                let eval = self.evaluate_move_with(partition, m, to, &mut fa)?;
                if eval.preferred() {
                    return Ok(StabilityReport {
                        stable: false,
                        moves_checked,
                        counterexample: Some(eval),
                    });
                }
            }
        }
        Ok(StabilityReport {
            stable: true,
            moves_checked,
            counterexample: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub moves_checked: usize,
    pub counterexample: Option<MoveEvaluation>,
}

/// Exhaustive Nash-stability audit of `partition` in `scenario`.
pub fn verify_nash_stable(partition: &TopPartition, scenario: &NetworkScenario) -> Result<StabilityReport> {
    if partition.num_sus() != scenario.num_sus() || partition.num_channels() != scenario.num_channels() {
        return Err(invalid("partition", "partition does not match the scenario's size"));
    }
    Game::new(scenario.clone())?.audit(partition)
}

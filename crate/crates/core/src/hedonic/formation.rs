//! Distributed partition formation: one contention winner per slot explores
//! one candidate channel and switches, holds, or goes to sleep.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Game, TopPartition};
use crate::bargaining::PayoffAllocation;
use crate::error::{Error, Result};
use crate::network::{ChannelId, NetworkScenario, SuId};
use crate::rng::stream_rng;

/// Upper bound on formation slots before [`form_partition`] gives up.
pub const MAX_FORMATION_SLOTS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SuAction {
    Switch,
    Hold,
    Sleep,
}

/// Per-SU view of the formation process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuState {
    /// Last signal this SU broadcast, if it has won contention yet.
    pub action: Option<SuAction>,
    /// Channels still to explore while holding.
    pub candidates: Vec<ChannelId>,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StepOutcome {
    Switched { su: SuId, from: ChannelId, to: ChannelId },
    Held { su: SuId, explored: ChannelId },
    Slept { su: SuId },
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub slot: usize,
    pub su: SuId,
    pub from: ChannelId,
    pub to: ChannelId,
    pub social_before: f64,
    pub social_after: f64,
    /// Welfare over all channels after the switch.
    pub welfare: f64,
}

/// Slot and FA-computation accounting of one formation run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FormationTrace {
    pub t_converge: usize,
    pub switch_slots: Vec<usize>,
    /// `3M + T + Σ (|C̃^n| + |C̃^ñ| + 1)` summed as the run goes.
    pub fa_computations: usize,
    /// FA values actually computed by the ledger.
    pub fa_evaluations: usize,
    /// Charges the count makes that need no computation: windows at
    /// population zero and slots without an exploration.
    pub fa_skipped: usize,
    pub initial_welfare: f64,
    pub switches: Vec<SwitchRecord>,
}

impl FormationTrace {
    pub fn num_switches(&self) -> usize {
        self.switch_slots.len()
    }

    pub fn final_welfare(&self) -> f64 {
        self.switches.last().map_or(self.initial_welfare, |s| s.welfare)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct FaWindow {
    channel: ChannelId,
    population: usize,
    // FA at populations population-1, population, population+1.
    values: [Option<f64>; 3],
}

impl FaWindow {
    fn get(&self, channel: ChannelId, population: usize) -> Option<f64> {
        if channel != self.channel || population + 1 < self.population || population > self.population + 1 {
            return None;
        }
        self.values[population + 1 - self.population]
    }
}

/// Each SU's FA values on its own channel at the current population and
/// one either side, maintained with the minimum recomputation per switch.
#[derive(Debug, Clone, PartialEq)]
pub struct FaLedger {
    windows: Vec<FaWindow>,
    evaluations: usize,
    skipped: usize,
}

impl FaLedger {
    pub fn new(game: &Game, partition: &TopPartition) -> Result<Self> {
        let mut ledger = Self {
            windows: Vec::with_capacity(partition.num_sus()),
            evaluations: 0,
            skipped: 0,
        };
        let populations: Vec<usize> = (0..partition.num_channels()).map(|n| partition.population(n)).collect();
        for m in 0..partition.num_sus() {
            let n = partition.channel_of(m)?;
            let p = populations[n];
            let values = [
                ledger.compute(game, m, n, p - 1)?,
                ledger.compute(game, m, n, p)?,
                ledger.compute(game, m, n, p + 1)?,
            ];
            ledger.windows.push(FaWindow {
                channel: n,
                population: p,
                values,
            });
        }
        Ok(ledger)
    }

    fn compute(&mut self, game: &Game, m: SuId, n: ChannelId, population: usize) -> Result<Option<f64>> {
        if population == 0 {
            self.skipped += 1;
            return Ok(None);
        }
        self.evaluations += 1;
        game.member_fa(m, n, population).map(Some)
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Stored FA of `m` on `n` at `population`; errors if the window does
    /// not cover it.
    pub fn lookup(&self, m: SuId, n: ChannelId, population: usize) -> Result<f64> {
        self.windows
            .get(m)
            .ok_or(Error::UnknownSu(m))?
            .get(n, population)
            .ok_or(Error::EmptyWindow)
    }

    /// The one FA an exploring SU computes: itself on `to` after joining.
    fn explore(&mut self, game: &Game, m: SuId, to: ChannelId, population: usize) -> Result<f64> {
        self.evaluations += 1;
        game.member_fa(m, to, population)
    }

    fn idle_slot(&mut self) {
        self.skipped += 1;
    }

    /// Shifts every affected window after `m` moved `from` → `to`.
    /// `partition` is the post-move partition.
    fn commit_switch(&mut self, game: &Game, partition: &TopPartition, m: SuId, from: ChannelId, to: ChannelId, explored: f64) -> Result<()> {
        let p_from = partition.population(from);
        let p_to = partition.population(to);
        for i in partition.members(from) {
            let old = self.windows[i].values;
            let low = self.compute(game, i, from, p_from - 1)?;
            self.windows[i] = FaWindow {
                channel: from,
                population: p_from,
                values: [low, old[0], old[1]],
            };
        }
        for i in partition.members(to) {
            if i == m {
                continue;
            }
            let old = self.windows[i].values;
            let high = self.compute(game, i, to, p_to + 1)?;
            self.windows[i] = FaWindow {
                channel: to,
                population: p_to,
                values: [old[1], old[2], high],
            };
        }
        let low = self.compute(game, m, to, p_to - 1)?;
        let high = self.compute(game, m, to, p_to + 1)?;
        self.windows[m] = FaWindow {
            channel: to,
            population: p_to,
            values: [low, Some(explored), high],
        };
        Ok(())
    }
}

/// The formation state machine. Call [`Formation::step`] once per slot.
#[derive(Debug, Clone)]
pub struct Formation {
    partition: TopPartition,
    states: Vec<SuState>,
    /// SU currently holding the right to explore.
    holder: Option<SuId>,
    ledger: FaLedger,
    trace: FormationTrace,
}

impl Formation {
    pub fn new(game: &Game, partition: TopPartition) -> Result<Self> {
        check_sizes(game, &partition)?;
        let ledger = FaLedger::new(game, &partition)?;
        let mut formation = Self {
            states: vec![
                SuState {
                    action: None,
                    candidates: Vec::new(),
                    active: true,
                };
                partition.num_sus()
            ],
            partition,
            holder: None,
            ledger,
            trace: FormationTrace::default(),
        };
        formation.trace.fa_computations = 3 * formation.partition.num_sus();
        formation.sync_counts();
        formation.trace.initial_welfare = formation.welfare(game)?;
        Ok(formation)
    }

    /// Rebuilds the FA windows after the link budget changed (nodes moved).
    /// The rebuild is charged like a fresh initialization.
    pub fn refresh(&mut self, game: &Game) -> Result<()> {
        check_sizes(game, &self.partition)?;
        let evaluations = self.ledger.evaluations;
        let skipped = self.ledger.skipped;
        self.ledger = FaLedger::new(game, &self.partition)?;
        self.ledger.evaluations += evaluations;
        self.ledger.skipped += skipped;
        self.trace.fa_computations += 3 * self.partition.num_sus();
        self.sync_counts();
        Ok(())
    }

    fn sync_counts(&mut self) {
        self.trace.fa_evaluations = self.ledger.evaluations;
        self.trace.fa_skipped = self.ledger.skipped;
    }

    pub fn partition(&self) -> &TopPartition {
        &self.partition
    }

    pub fn states(&self) -> &[SuState] {
        &self.states
    }

    pub fn trace(&self) -> &FormationTrace {
        &self.trace
    }

    pub fn ledger(&self) -> &FaLedger {
        &self.ledger
    }

    pub fn is_converged(&self) -> bool {
        self.states.iter().all(|s| !s.active)
    }

    /// Current per-channel allocations, from the ledger's FA values.
    pub fn allocations(&self, game: &Game) -> Result<Vec<PayoffAllocation>> {
        let ledger = &self.ledger;
        (0..self.partition.num_channels())
            .map(|n| game.allocation_with(n, &self.partition.members(n), &mut |m, n, p| ledger.lookup(m, n, p)))
            .collect()
    }

    fn welfare(&self, game: &Game) -> Result<f64> {
        Ok(self.allocations(game)?.iter().map(PayoffAllocation::total).sum())
    }

    pub fn into_parts(self) -> (TopPartition, FormationTrace) {
        (self.partition, self.trace)
    }

    /// Executes one slot of the formation loop.
    pub fn step<R: Rng + ?Sized>(&mut self, game: &Game, rng: &mut R) -> Result<StepOutcome> {
        if self.is_converged() {
            return Ok(StepOutcome::Converged);
        }
        self.trace.t_converge += 1;
        self.trace.fa_computations += 1;
        let slot = self.trace.t_converge;

        let m = match self.holder {
            Some(m) => m,
            None => {
                let active: Vec<SuId> = (0..self.states.len()).filter(|&i| self.states[i].active).collect();
                let m = *active.choose(rng).expect("nonempty active set");
                let n = self.partition.channel_of(m)?;
                self.states[m].candidates = (0..self.partition.num_channels()).filter(|&c| c != n).collect();
                m
            }
        };

        if self.states[m].candidates.is_empty() {
            self.ledger.idle_slot();
            self.sleep(m);
            self.sync_counts();
            return Ok(StepOutcome::Slept { su: m });
        }
        let pick = rng.gen_range(0..self.states[m].candidates.len());
        let to = self.states[m].candidates.swap_remove(pick);
        let from = self.partition.channel_of(m)?;
        let join_population = self.partition.population(to) + 1;
        let explored = self.ledger.explore(game, m, to, join_population)?;

        let ledger = &self.ledger;
        let eval = game.evaluate_move_with(&self.partition, m, to, &mut |i, n, p| {
            if i == m && n == to && p == join_population {
                Ok(explored)
            } else {
                ledger.lookup(i, n, p)
            }
        })?;

        let outcome = if eval.preferred() {
            self.partition.move_su(m, to)?;
            self.ledger.commit_switch(game, &self.partition, m, from, to, explored)?;
            self.trace.fa_computations += self.partition.population(from) + self.partition.population(to) + 1;
            self.trace.switch_slots.push(slot);
            let welfare = self.welfare(game)?;
            self.trace.switches.push(SwitchRecord {
                slot,
                su: m,
                from,
                to,
                social_before: eval.social_before,
                social_after: eval.social_after,
                welfare,
            });
            for s in self.states.iter_mut() {
                s.active = true;
                s.candidates.clear();
            }
            self.states[m].action = Some(SuAction::Switch);
            self.holder = None;
            StepOutcome::Switched { su: m, from, to }
        } else if self.states[m].candidates.is_empty() {
            self.sleep(m);
            StepOutcome::Slept { su: m }
        } else {
            self.states[m].action = Some(SuAction::Hold);
            self.holder = Some(m);
            StepOutcome::Held { su: m, explored: to }
        };
        self.sync_counts();
        Ok(outcome)
    }

    fn sleep(&mut self, m: SuId) {
        let state = &mut self.states[m];
        state.action = Some(SuAction::Sleep);
        state.candidates.clear();
        state.active = false;
        self.holder = None;
    }

    /// Steps until every SU sleeps or `max_slots` slots have run.
    pub fn run<R: Rng + ?Sized>(&mut self, game: &Game, rng: &mut R, max_slots: usize) -> Result<()> {
        while !self.is_converged() {
            if self.trace.t_converge >= max_slots {
                return Err(Error::InvalidParameter {
                    name: "max_slots",
                    reason: format!("formation did not converge within {max_slots} slots"),
                });
            }
            self.step(game, rng)?;
        }
        Ok(())
    }
}

fn check_sizes(game: &Game, partition: &TopPartition) -> Result<()> {
    let scenario = game.scenario();
    if partition.num_sus() != scenario.num_sus() || partition.num_channels() != scenario.num_channels() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} SUs on {} channels, scenario has {} on {}",
            partition.num_sus(),
            partition.num_channels(),
            scenario.num_sus(),
            scenario.num_channels()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FormationResult {
    pub partition: TopPartition,
    pub allocations: Vec<PayoffAllocation>,
    pub trace: FormationTrace,
}

/// Runs formation to convergence from a uniformly random initial partition.
pub fn form_partition(scenario: &NetworkScenario, seed: u64) -> Result<FormationResult> {
    let game = Game::new(scenario.clone())?;
    let mut rng: ChaCha8Rng = stream_rng(seed, crate::rng::FORMATION_STREAM);
    let start = TopPartition::random(scenario.num_sus(), scenario.num_channels(), &mut rng)?;
    form_from(&game, start, &mut rng)
}

/// Runs formation to convergence from `start`.
pub fn form_from<R: Rng + ?Sized>(game: &Game, start: TopPartition, rng: &mut R) -> Result<FormationResult> {
    let mut formation = Formation::new(game, start)?;
    formation.run(game, rng, MAX_FORMATION_SLOTS)?;
    let allocations = formation.allocations(game)?;
    let (partition, trace) = formation.into_parts();
    Ok(FormationResult {
        partition,
        allocations,
        trace,
    })
}

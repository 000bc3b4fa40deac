//! Slot-by-slot Monte Carlo execution of the two-layer game.
//!
//! Every slot each PU channel is idle with probability β. The SUs sensing a
//! channel form its grand coalition; on an idle channel the coalition raises
//! a false alarm with its fused FA probability, on a busy one it misses the
//! PU with the channel's MD budget. On a declared-idle slot one member
//! transmits, drawn by the agreed slot shares.

mod metrics;
mod mobility;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bargaining::PayoffAllocation;
use crate::coalition::CoalitionValueInputs;
use crate::detection;
use crate::error::{invalid, Result};
use crate::hedonic::{Formation, FormationTrace, Game, StepOutcome, TopPartition};
use crate::network::{push_su, ChannelId, MacModel, NetworkScenario, ScenarioGenerator, SuId};
use crate::rng::{stream_rng, EVENT_STREAM, FORMATION_STREAM, MOBILITY_STREAM, SLOT_STREAM};

pub use metrics::{energy_efficiency, switches_per_minute, ChannelTotals, SimMetrics, SlotRecord, SuTotals};
pub use mobility::{mobility_step, MobilitySpec, MobilityState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventChange {
    SetSuCount(usize),
    SetChannelCount(usize),
}

/// A population change applied before slot `slot` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub slot: usize,
    pub change: EventChange,
}

pub fn validate_events(events: &[ScenarioEvent]) -> Result<()> {
    for w in events.windows(2) {
        if w[1].slot <= w[0].slot {
            return Err(invalid("events", format!("slots must strictly increase, got {} then {}", w[0].slot, w[1].slot)));
        }
    }
    for e in events {
        let (EventChange::SetSuCount(k) | EventChange::SetChannelCount(k)) = e.change;
        if k == 0 {
            return Err(invalid("events", format!("event at slot {} sets a count of zero", e.slot)));
        }
    }
    Ok(())
}

/// Applies one population change. Removal drops the highest ids; new SUs
/// are placed uniformly and new channels copy the last channel's bandwidth
/// and availability with a uniformly placed PU.
pub fn apply_event<R: Rng + ?Sized>(scenario: &mut NetworkScenario, change: EventChange, rng: &mut R) -> Result<()> {
    match change {
        EventChange::SetSuCount(k) => {
            scenario.sus.truncate(k);
            while scenario.sus.len() < k {
                push_su(scenario, rng);
            }
        }
        EventChange::SetChannelCount(k) => {
            let template = scenario.channels.last().cloned().ok_or_else(|| invalid("channels", "scenario has no channels"))?;
            scenario.channels.truncate(k);
            let generator = ScenarioGenerator {
                bandwidth_hz: template.bandwidth_hz,
                availability: template.availability,
                ..ScenarioGenerator::new(0, 0)
            };
            while scenario.channels.len() < k {
                generator.push_channel(scenario, rng);
            }
        }
    }
    scenario.validate()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DetectionOutcome {
    FalseAlarm,
    CorrectIdle,
    MissedDetection,
    CorrectBusy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelOutcome {
    pub channel: ChannelId,
    pub busy: bool,
    /// `None` when nobody senses the channel.
    pub detection: Option<DetectionOutcome>,
    pub transmitter: Option<SuId>,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub channels: Vec<ChannelOutcome>,
    pub su_bits: Vec<f64>,
    pub su_energy_j: Vec<f64>,
}

impl SlotOutcome {
    pub fn total_bits(&self) -> f64 {
        self.su_bits.iter().sum()
    }

    pub fn total_energy_j(&self) -> f64 {
        self.su_energy_j.iter().sum()
    }
}

/// Draws one slot for every channel given the current allocations (one per
/// channel, in channel order).
pub fn run_slot<R: Rng + ?Sized>(game: &Game, allocations: &[PayoffAllocation], rng: &mut R) -> Result<SlotOutcome> {
    let scenario = game.scenario();
    let radio = &scenario.radio;
    let sense_j = radio.sense_power_mw * 1e-3 * radio.sense_s();
    let tx_j = radio.tx_power_su_mw * 1e-3 * radio.tx_s();
    let mut su_bits = vec![0.0; scenario.num_sus()];
    let mut su_energy_j = vec![sense_j; scenario.num_sus()];
    let mut channels = Vec::with_capacity(scenario.num_channels());
    for (n, alloc) in allocations.iter().enumerate() {
        let busy = !rng.gen_bool(scenario.channels[n].availability);
        let mut outcome = ChannelOutcome {
            channel: n,
            busy,
            detection: None,
            transmitter: None,
            bits: 0.0,
        };
        if !alloc.payoffs.is_empty() {
            let detection = if busy {
                if rng.gen_bool(radio.md_budget) {
                    DetectionOutcome::MissedDetection
                } else {
                    DetectionOutcome::CorrectBusy
                }
            } else if rng.gen_bool(alloc.grand_fa.clamp(0.0, 1.0)) {
                DetectionOutcome::FalseAlarm
            } else {
                DetectionOutcome::CorrectIdle
            };
            outcome.detection = Some(detection);
            if matches!(detection, DetectionOutcome::CorrectIdle | DetectionOutcome::MissedDetection) {
                outcome.transmitter = draw_by_share(alloc, rng);
            }
            if let Some(m) = outcome.transmitter {
                su_energy_j[m] += tx_j;
                if detection == DetectionOutcome::CorrectIdle {
                    outcome.bits = game.rate(m, n) * radio.tx_s();
                    su_bits[m] += outcome.bits;
                }
            }
        }
        channels.push(outcome);
    }
    Ok(SlotOutcome {
        channels,
        su_bits,
        su_energy_j,
    })
}

fn draw_by_share<R: Rng + ?Sized>(alloc: &PayoffAllocation, rng: &mut R) -> Option<SuId> {
    let total = alloc.total();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (&m, &a) in &alloc.payoffs {
        if a > 0.0 {
            last = Some(m);
            acc += a;
            if u < acc {
                return Some(m);
            }
        }
    }
    last
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContentionOutcome {
    NoDetection,
    Winner(usize),
    Collision,
}

/// Contention among the blocks of a bottom-layer partition on an idle
/// channel. Each block detects the opportunity independently; under 0/X
/// two or more detecting blocks collide, under 1/X one SU among all
/// detecting blocks wins uniformly.
pub fn contend<R: Rng + ?Sized>(inputs: &CoalitionValueInputs, mac: MacModel, rng: &mut R) -> ContentionOutcome {
    let detecting: Vec<usize> = (0..inputs.num_blocks())
        .filter(|&i| !rng.gen_bool(inputs.block_fa[i]))
        .collect();
    match (detecting.len(), mac) {
        (0, _) => ContentionOutcome::NoDetection,
        (1, _) => ContentionOutcome::Winner(detecting[0]),
        (_, MacModel::ZeroX) => ContentionOutcome::Collision,
        (_, MacModel::OneX) => {
            let total: usize = detecting.iter().map(|&i| inputs.block_sizes[i]).sum();
            let mut pick = rng.gen_range(0..total);
            for &i in &detecting {
                if pick < inputs.block_sizes[i] {
                    return ContentionOutcome::Winner(i);
                }
                pick -= inputs.block_sizes[i];
            }
            unreachable!("pick below total")
        }
    }
}

/// Noncooperative operating point of one SU: alone on its best channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePoint {
    pub channel: ChannelId,
    /// `β(1 − P_FA) R`, bits/s before the sensing overhead.
    pub rate_bps: f64,
    pub energy_efficiency: f64,
}

/// Expected bits per Joule of an SU that succeeds with probability
/// `success` and transmits with probability `tx_prob` per slot.
fn expected_efficiency(scenario: &NetworkScenario, rate_bps: f64, success: f64, tx_prob: f64) -> f64 {
    let radio = &scenario.radio;
    let bits = success * rate_bps * radio.tx_s();
    let energy = radio.sense_power_mw * 1e-3 * radio.sense_s() + tx_prob * radio.tx_power_su_mw * 1e-3 * radio.tx_s();
    bits / energy
}

pub fn standalone_baseline_points(scenario: &NetworkScenario) -> Result<Vec<BaselinePoint>> {
    let links = scenario.link_table()?;
    let radio = &scenario.radio;
    (0..scenario.num_sus())
        .map(|m| {
            let mut best: Option<BaselinePoint> = None;
            for (n, ch) in scenario.channels.iter().enumerate() {
                let fa = detection::channel_member_fa(links.snr(m, n), radio.num_samples, radio.md_budget, 1)?;
                let success = ch.availability * (1.0 - fa);
                let rate_bps = success * links.rate(m, n);
                if best.as_ref().is_none_or(|b| rate_bps > b.rate_bps) {
                    let tx_prob = success + (1.0 - ch.availability) * radio.md_budget;
                    best = Some(BaselinePoint {
                        channel: n,
                        rate_bps,
                        energy_efficiency: expected_efficiency(scenario, links.rate(m, n), success, tx_prob),
                    });
                }
            }
            best.ok_or_else(|| invalid("channels", "scenario has no channels"))
        })
        .collect()
}

/// Expected rate of each SU alone on its best channel, `max_n β(1 − P_FA) R`.
pub fn standalone_baseline(scenario: &NetworkScenario) -> Result<Vec<f64>> {
    Ok(standalone_baseline_points(scenario)?.into_iter().map(|b| b.rate_bps).collect())
}

/// What the current allocation promises one SU per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuExpectation {
    pub channel: ChannelId,
    pub payoff: f64,
    /// `a R`, bits/s before the sensing overhead.
    pub rate_bps: f64,
    /// Probability of a successful transmission in a slot.
    pub success_prob: f64,
    pub tx_prob: f64,
    pub energy_efficiency: f64,
}

pub fn su_expectations(game: &Game, allocations: &[PayoffAllocation]) -> Vec<SuExpectation> {
    let scenario = game.scenario();
    let mut out = vec![None; scenario.num_sus()];
    for alloc in allocations {
        let n = alloc.channel;
        let beta = scenario.channels[n].availability;
        let total = alloc.total();
        for (&m, &a) in &alloc.payoffs {
            let share = if total > 0.0 { a / total } else { 0.0 };
            let success_prob = share * beta * (1.0 - alloc.grand_fa);
            let tx_prob = success_prob + share * (1.0 - beta) * scenario.radio.md_budget;
            let rate = game.rate(m, n);
            out[m] = Some(SuExpectation {
                channel: n,
                payoff: a,
                rate_bps: a * rate,
                success_prob,
                tx_prob,
                energy_efficiency: expected_efficiency(scenario, rate, success_prob, tx_prob),
            });
        }
    }
    out.into_iter().map(|e| e.expect("every SU sits on one channel")).collect()
}

/// Stepwise simulation driver behind [`run_scenario`].
#[derive(Debug, Clone)]
pub struct Simulator {
    game: Game,
    partition: TopPartition,
    formation: Option<Formation>,
    allocations: Vec<PayoffAllocation>,
    expectations: Vec<SuExpectation>,
    baseline: Vec<BaselinePoint>,
    mobility: MobilitySpec,
    mobility_state: MobilityState,
    events: Vec<ScenarioEvent>,
    next_event: usize,
    formation_rng: ChaCha8Rng,
    slot_rng: ChaCha8Rng,
    mobility_rng: ChaCha8Rng,
    event_rng: ChaCha8Rng,
    closed_fa_computations: usize,
    metrics: SimMetrics,
}

impl Simulator {
    pub fn new(scenario: &NetworkScenario, events: &[ScenarioEvent], mobility: &MobilitySpec, seed: u64) -> Result<Self> {
        validate_events(events)?;
        mobility.validate()?;
        let game = Game::new(scenario.clone())?;
        let mut formation_rng = stream_rng(seed, FORMATION_STREAM);
        let mut mobility_rng = stream_rng(seed, MOBILITY_STREAM);
        let partition = TopPartition::random(scenario.num_sus(), scenario.num_channels(), &mut formation_rng)?;
        let formation = Formation::new(&game, partition.clone())?;
        let mobility_state = MobilityState::new(mobility.speed_mps, scenario.num_sus(), &mut mobility_rng);
        let mut sim = Self {
            baseline: standalone_baseline_points(scenario)?,
            allocations: Vec::new(),
            expectations: Vec::new(),
            game,
            partition,
            formation: Some(formation),
            mobility: mobility.clone(),
            mobility_state,
            events: events.to_vec(),
            next_event: 0,
            formation_rng,
            slot_rng: stream_rng(seed, SLOT_STREAM),
            mobility_rng,
            event_rng: stream_rng(seed, EVENT_STREAM),
            closed_fa_computations: 0,
            metrics: SimMetrics {
                slot_s: scenario.radio.slot_s(),
                ..SimMetrics::default()
            },
        };
        if mobility.converge_first {
            let mut f = sim.formation.take().expect("formation just started");
            f.run(&sim.game, &mut sim.formation_rng, crate::hedonic::MAX_FORMATION_SLOTS)?;
            sim.partition = f.partition().clone();
            sim.close_formation(f);
        }
        sim.refresh_allocations()?;
        Ok(sim)
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn partition(&self) -> &TopPartition {
        &self.partition
    }

    pub fn allocations(&self) -> &[PayoffAllocation] {
        &self.allocations
    }

    pub fn expectations(&self) -> &[SuExpectation] {
        &self.expectations
    }

    pub fn baseline(&self) -> &[BaselinePoint] {
        &self.baseline
    }

    pub fn is_forming(&self) -> bool {
        self.formation.is_some()
    }

    pub fn metrics(&self) -> &SimMetrics {
        &self.metrics
    }

    fn close_formation(&mut self, formation: Formation) {
        let (_, trace) = formation.into_parts();
        self.closed_fa_computations += trace.fa_computations;
        self.metrics.formation_traces.push(trace);
    }

    fn restart_formation(&mut self) -> Result<()> {
        if let Some(f) = self.formation.take() {
            self.close_formation(f);
        }
        self.formation = Some(Formation::new(&self.game, self.partition.clone())?);
        Ok(())
    }

    fn refresh_allocations(&mut self) -> Result<()> {
        self.allocations = self.game.allocations(&self.partition)?;
        self.expectations = su_expectations(&self.game, &self.allocations);
        Ok(())
    }

    fn apply_due_events(&mut self, t: usize) -> Result<bool> {
        let mut changed = false;
        while self.next_event < self.events.len() && self.events[self.next_event].slot <= t {
            let mut scenario = self.game.scenario().clone();
            apply_event(&mut scenario, self.events[self.next_event].change, &mut self.event_rng)?;
            self.game = Game::new(scenario)?;
            self.next_event += 1;
            changed = true;
        }
        if changed {
            let scenario = self.game.scenario();
            self.partition
                .resize(scenario.num_sus(), scenario.num_channels(), &mut self.formation_rng)?;
            self.mobility_state.resize(scenario.num_sus(), &mut self.mobility_rng);
            self.baseline = standalone_baseline_points(scenario)?;
            self.restart_formation()?;
            self.metrics.reformation_slots.push(t);
        }
        Ok(changed)
    }

    fn move_nodes(&mut self, t: usize) -> Result<()> {
        let mut scenario = self.game.scenario().clone();
        mobility_step(&mut self.mobility_state, &mut scenario, &mut self.mobility_rng);
        self.game = Game::new(scenario)?;
        self.baseline = standalone_baseline_points(self.game.scenario())?;
        match self.formation.as_mut() {
            Some(f) => f.refresh(&self.game)?,
            None => {
                if !self.game.audit(&self.partition)?.stable {
                    self.metrics.instability_slots.push(t);
                    self.restart_formation()?;
                }
            }
        }
        Ok(())
    }

    /// Runs one slot and returns its record.
    pub fn step(&mut self) -> Result<&SlotRecord> {
        let t = self.metrics.slots.len();
        let mut dirty = self.apply_due_events(t)?;
        if self.mobility.is_moving() {
            self.move_nodes(t)?;
            dirty = true;
        }
        let mut switched = false;
        let forming = self.formation.is_some();
        if let Some(mut f) = self.formation.take() {
            if let StepOutcome::Switched { .. } = f.step(&self.game, &mut self.formation_rng)? {
                switched = true;
                dirty = true;
                self.partition = f.partition().clone();
                self.metrics.switch_slots.push(t);
            }
            if f.is_converged() {
                self.close_formation(f);
            } else {
                self.formation = Some(f);
            }
        }
        if dirty {
            self.refresh_allocations()?;
        }
        let outcome = run_slot(&self.game, &self.allocations, &mut self.slot_rng)?;
        self.record(t, &outcome, switched, forming);
        Ok(self.metrics.slots.last().expect("just recorded"))
    }

    fn record(&mut self, t: usize, outcome: &SlotOutcome, switched: bool, forming: bool) {
        let scenario = self.game.scenario();
        let m_count = scenario.num_sus();
        let n_count = scenario.num_channels();
        let m = &mut self.metrics;
        if m.su_totals.len() < m_count {
            m.su_totals.resize(m_count, SuTotals::default());
        }
        if m.channel_totals.len() < n_count {
            m.channel_totals.resize(n_count, ChannelTotals::default());
        }
        let tx_s = scenario.radio.tx_s();
        for (i, exp) in self.expectations.iter().enumerate() {
            let tot = &mut m.su_totals[i];
            tot.slots_present += 1;
            tot.bits += outcome.su_bits[i];
            tot.energy_j += outcome.su_energy_j[i];
            tot.expected_successes += exp.success_prob;
            tot.success_variance += exp.success_prob * (1.0 - exp.success_prob);
            tot.expected_bits += exp.rate_bps * tx_s;
        }
        let mut transmissions = 0;
        let mut pu_collisions = 0;
        for ch in &outcome.channels {
            let tot = &mut m.channel_totals[ch.channel];
            tot.slots_present += 1;
            if ch.busy {
                tot.busy_slots += 1;
            } else {
                tot.idle_slots += 1;
            }
            if let Some(d) = ch.detection {
                tot.occupied_slots += 1;
                match d {
                    DetectionOutcome::FalseAlarm => tot.false_alarms += 1,
                    DetectionOutcome::MissedDetection => tot.missed_detections += 1,
                    _ => {}
                }
                if ch.busy {
                    tot.sensed_busy_slots += 1;
                }
            }
            if let Some(su) = ch.transmitter {
                transmissions += 1;
                let tot_su = &mut m.su_totals[su];
                tot_su.tx_slots += 1;
                if ch.bits > 0.0 {
                    tot_su.success_slots += 1;
                    m.channel_totals[ch.channel].successes += 1;
                } else {
                    pu_collisions += 1;
                }
            }
        }
        let occupied: Vec<&PayoffAllocation> = self.allocations.iter().filter(|a| !a.payoffs.is_empty()).collect();
        let avg_coalition_fa = if occupied.is_empty() {
            0.0
        } else {
            occupied.iter().map(|a| a.grand_fa).sum::<f64>() / occupied.len() as f64
        };
        let dissatisfied_rate = self
            .expectations
            .iter()
            .zip(&self.baseline)
            .filter(|(e, b)| e.rate_bps < b.rate_bps)
            .count();
        let dissatisfied_ee = self
            .expectations
            .iter()
            .zip(&self.baseline)
            .filter(|(e, b)| e.energy_efficiency < b.energy_efficiency)
            .count();
        let duty = scenario.radio.duty_factor();
        let bits = outcome.total_bits();
        let open = self.formation.as_ref().map_or(0, |f| f.trace().fa_computations);
        m.slots.push(SlotRecord {
            slot: t,
            num_sus: m_count,
            num_channels: n_count,
            bits,
            throughput_bps: bits / m.slot_s,
            energy_j: outcome.total_energy_j(),
            transmissions,
            pu_collisions,
            avg_coalition_fa,
            dissatisfied_rate,
            dissatisfied_ee,
            expected_throughput_bps: self.expectations.iter().map(|e| e.rate_bps).sum::<f64>() * duty,
            switched,
            forming,
            fa_computations: self.closed_fa_computations + open,
        });
    }

    /// Finishes the run, closing any formation still in progress.
    pub fn finish(mut self) -> SimMetrics {
        if let Some(f) = self.formation.take() {
            self.close_formation(f);
        }
        self.metrics
    }

    pub fn formation_trace(&self) -> Option<&FormationTrace> {
        self.formation.as_ref().map(Formation::trace)
    }
}

/// Runs `horizon` slots of `scenario` with population `events` and node
/// `mobility`, all randomness derived from `seed`.
pub fn run_scenario(
    scenario: &NetworkScenario,
    events: &[ScenarioEvent],
    mobility: &MobilitySpec,
    horizon: usize,
    seed: u64,
) -> Result<SimMetrics> {
    if horizon == 0 {
        validate_events(events)?;
        scenario.validate()?;
        return Ok(SimMetrics {
            slot_s: scenario.radio.slot_s(),
            ..SimMetrics::default()
        });
    }
    let mut sim = Simulator::new(scenario, events, mobility, seed)?;
    for _ in 0..horizon {
        sim.step()?;
    }
    Ok(sim.finish())
}

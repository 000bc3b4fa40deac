use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedonic::FormationTrace;

/// Network-wide aggregates of one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub num_sus: usize,
    pub num_channels: usize,
    pub bits: f64,
    pub throughput_bps: f64,
    pub energy_j: f64,
    pub transmissions: usize,
    /// Transmissions that hit an active PU after a missed detection.
    pub pu_collisions: usize,
    /// Mean grand-coalition FA over occupied channels.
    pub avg_coalition_fa: f64,
    /// SUs whose expected rate is below their standalone baseline.
    pub dissatisfied_rate: usize,
    /// SUs whose expected energy efficiency is below their standalone baseline.
    pub dissatisfied_ee: usize,
    /// Expected network throughput `Σ a R · duty`, bits/s.
    pub expected_throughput_bps: f64,
    pub switched: bool,
    pub forming: bool,
    /// Running total of charged FA computations.
    pub fa_computations: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SuTotals {
    pub slots_present: usize,
    pub bits: f64,
    pub energy_j: f64,
    pub tx_slots: usize,
    pub success_slots: usize,
    /// Sum over slots of the success probability the allocation promised.
    pub expected_successes: f64,
    /// Sum over slots of its Bernoulli variance.
    pub success_variance: f64,
    pub expected_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelTotals {
    pub slots_present: usize,
    pub occupied_slots: usize,
    pub idle_slots: usize,
    pub busy_slots: usize,
    /// Busy slots with SUs sensing the channel.
    pub sensed_busy_slots: usize,
    pub false_alarms: usize,
    pub missed_detections: usize,
    pub successes: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimMetrics {
    pub slot_s: f64,
    pub slots: Vec<SlotRecord>,
    pub su_totals: Vec<SuTotals>,
    pub channel_totals: Vec<ChannelTotals>,
    /// Slots at which a population event restarted formation.
    pub reformation_slots: Vec<usize>,
    /// Slots at which motion made the partition unstable.
    pub instability_slots: Vec<usize>,
    /// Slots in which some SU switched channel.
    pub switch_slots: Vec<usize>,
    pub formation_traces: Vec<FormationTrace>,
}

impl SimMetrics {
    pub fn horizon(&self) -> usize {
        self.slots.len()
    }

    pub fn total_switches(&self) -> usize {
        self.switch_slots.len()
    }

    /// Channel switches per minute over the whole run.
    pub fn switches_per_minute(&self) -> f64 {
        switches_per_minute(self.total_switches(), self.horizon(), self.slot_s)
    }

    pub fn total_bits(&self) -> f64 {
        self.slots.iter().map(|s| s.bits).sum()
    }

    pub fn mean_throughput_bps(&self) -> f64 {
        if self.slots.is_empty() {
            return 0.0;
        }
        self.slots.iter().map(|s| s.throughput_bps).sum::<f64>() / self.slots.len() as f64
    }

    pub fn fa_computations(&self) -> usize {
        self.slots.last().map_or(0, |s| s.fa_computations)
    }

    /// Energy efficiency of the slots in `range`.
    pub fn energy_efficiency_over(&self, range: std::ops::Range<usize>) -> Result<f64> {
        energy_efficiency(self.slots.get(range).ok_or(Error::EmptyWindow)?)
    }
}

pub fn switches_per_minute(switches: usize, slots: usize, slot_s: f64) -> f64 {
    if slots == 0 {
        return 0.0;
    }
    switches as f64 * 60.0 / (slots as f64 * slot_s)
}

/// Delivered bits per Joule spent over `window`.
pub fn energy_efficiency(window: &[SlotRecord]) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let energy: f64 = window.iter().map(|s| s.energy_j).sum();
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    Ok(window.iter().map(|s| s.bits).sum::<f64>() / energy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(bits: f64, energy_j: f64) -> SlotRecord {
        SlotRecord {
            slot: 0,
            num_sus: 10,
            num_channels: 1,
            bits,
            throughput_bps: bits / 0.1,
            energy_j,
            transmissions: usize::from(bits > 0.0),
            pu_collisions: 0,
            avg_coalition_fa: 0.0,
            dissatisfied_rate: 0,
            dissatisfied_ee: 0,
            expected_throughput_bps: 0.0,
            switched: false,
            forming: false,
            fa_computations: 0,
        }
    }

    #[test]
    fn efficiency_hand_example() {
        let energy = 10.0 * 10e-3 * 5e-3 + 10e-3 * 95e-3;
        let ee = energy_efficiency(&[record(9.5e5, energy)]).unwrap();
        assert!((ee - 9.5e5 / 1.45e-3).abs() / ee < 1e-12);
        let doubled = energy_efficiency(&[record(1.9e6, energy)]).unwrap();
        assert!((doubled / ee - 2.0).abs() < 1e-12);
    }

    #[test]
    fn efficiency_edge_cases() {
        assert_eq!(energy_efficiency(&[record(0.0, 5e-4)]).unwrap(), 0.0);
        assert_eq!(energy_efficiency(&[]), Err(Error::EmptyWindow));
        assert_eq!(energy_efficiency(&[record(0.0, 0.0)]), Err(Error::ZeroEnergy));
    }

    #[test]
    fn switch_rate() {
        assert_eq!(switches_per_minute(6, 600, 0.1), 6.0);
        assert_eq!(switches_per_minute(0, 0, 0.1), 0.0);
    }
}

//! Geometry, radio parameters and link-budget computation.
//!
//! A [`NetworkScenario`] is the single source of truth for every downstream
//! formula: PU-to-SU sensing SNRs, SU-to-SU link SNRs and Shannon rates are
//! all pure functions of it. Distances to a PU are measured from the SU
//! pair's transmitter endpoint, which hosts the sensor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detection::FusionRule;
use crate::error::{invalid, Error, Result};

pub type SuId = usize;
pub type ChannelId = usize;

/// Distances below this are treated as coincident nodes.
pub const MIN_SEPARATION_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn uniform_in_square<R: Rng + ?Sized>(side: f64, rng: &mut R) -> Self {
        Self::new(rng.gen::<f64>() * side, rng.gen::<f64>() * side)
    }
}

/// Medium-access model used across competing bottom-layer coalitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MacModel {
    /// Simultaneous detections collide and nobody succeeds.
    #[default]
    ZeroX,
    /// An ideal MAC grants one uniformly chosen competing SU the slot.
    OneX,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub sense_power_mw: f64,
    pub tx_power_su_mw: f64,
    pub tx_power_pu_mw: f64,
    pub noise_power_mw: f64,
    pub slot_ms: f64,
    pub sense_ms: f64,
    /// Energy-detector sample count per sensing period.
    pub num_samples: u32,
    /// Integrated miss-detection budget per channel.
    pub md_budget: f64,
    pub path_loss_exponent: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            sense_power_mw: 10.0,
            tx_power_su_mw: 10.0,
            tx_power_pu_mw: 100.0,
            noise_power_mw: 0.1,
            slot_ms: 100.0,
            sense_ms: 5.0,
            num_samples: 5,
            md_budget: 0.01,
            path_loss_exponent: 2.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("sense_power_mw", self.sense_power_mw),
            ("tx_power_su_mw", self.tx_power_su_mw),
            ("tx_power_pu_mw", self.tx_power_pu_mw),
            ("noise_power_mw", self.noise_power_mw),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(name, format!("power must be positive, got {value}")));
            }
        }
        if !(self.md_budget > 0.0 && self.md_budget < 1.0) {
            return Err(invalid("md_budget", format!("must lie in (0, 1), got {}", self.md_budget)));
        }
        if !(self.sense_ms > 0.0 && self.sense_ms < self.slot_ms) {
            return Err(invalid(
                "sense_ms",
                format!("need 0 < sense_ms < slot_ms, got {} / {}", self.sense_ms, self.slot_ms),
            ));
        }
        if self.num_samples == 0 {
            return Err(invalid("num_samples", "must be at least 1"));
        }
        if !(self.path_loss_exponent > 0.0 && self.path_loss_exponent.is_finite()) {
            return Err(invalid("path_loss_exponent", "must be positive"));
        }
        Ok(())
    }

    pub fn slot_s(&self) -> f64 {
        self.slot_ms / 1000.0
    }

    pub fn sense_s(&self) -> f64 {
        self.sense_ms / 1000.0
    }

    /// Transmission time left in a slot after sensing.
    pub fn tx_s(&self) -> f64 {
        (self.slot_ms - self.sense_ms) / 1000.0
    }

    /// Fraction of a slot available for data.
    pub fn duty_factor(&self) -> f64 {
        (self.slot_ms - self.sense_ms) / self.slot_ms
    }
}

/// A licensed channel, owned by one PU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub id: ChannelId,
    pub bandwidth_hz: f64,
    /// Probability that the PU is idle in a slot.
    pub availability: f64,
    pub pu_position: Point,
}

/// A secondary transmitter/receiver pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuPair {
    pub id: SuId,
    pub tx_position: Point,
    pub rx_position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub region_side_m: f64,
    pub radio: RadioParams,
    pub channels: Vec<Channel>,
    pub sus: Vec<SuPair>,
    #[serde(default)]
    pub fusion_rule: FusionRule,
    #[serde(default)]
    pub mac_model: MacModel,
}

impl NetworkScenario {
    pub fn num_sus(&self) -> usize {
        self.sus.len()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        if self.sus.is_empty() {
            return Err(invalid("sus", "need at least one SU"));
        }
        if self.channels.is_empty() {
            return Err(invalid("channels", "need at least one channel"));
        }
        if !(self.region_side_m > 0.0 && self.region_side_m.is_finite()) {
            return Err(invalid("region_side_m", "must be positive"));
        }
        for (idx, ch) in self.channels.iter().enumerate() {
            if ch.id != idx {
                return Err(invalid("channels", format!("ids must be dense, found {} at {idx}", ch.id)));
            }
            if !(0.0..=1.0).contains(&ch.availability) {
                return Err(invalid("availability", format!("channel {idx}: {}", ch.availability)));
            }
            if !(ch.bandwidth_hz > 0.0 && ch.bandwidth_hz.is_finite()) {
                return Err(invalid("bandwidth_hz", format!("channel {idx}: {}", ch.bandwidth_hz)));
            }
        }
        for (idx, su) in self.sus.iter().enumerate() {
            if su.id != idx {
                return Err(invalid("sus", format!("ids must be dense, found {} at {idx}", su.id)));
            }
            for p in [su.tx_position, su.rx_position] {
                if !self.contains(&p) {
                    return Err(invalid("sus", format!("SU {idx} endpoint ({}, {}) outside region", p.x, p.y)));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> bool {
        let side = self.region_side_m;
        (0.0..=side).contains(&p.x) && (0.0..=side).contains(&p.y)
    }

    pub fn su(&self, m: SuId) -> Result<&SuPair> {
        self.sus.get(m).ok_or(Error::UnknownSu(m))
    }

    pub fn channel(&self, n: ChannelId) -> Result<&Channel> {
        self.channels.get(n).ok_or(Error::UnknownChannel(n))
    }

    /// PU-to-SU sensing SNR per sample, λ = P_PU d^{-α} / P_N.
    pub fn pu_su_snr(&self, m: SuId, n: ChannelId) -> Result<f64> {
        let su = self.su(m)?;
        let ch = self.channel(n)?;
        let d = su.tx_position.distance(&ch.pu_position);
        if d < MIN_SEPARATION_M {
            return Err(Error::CoincidentNodes(format!("SU {m} transmitter sits on PU {n}")));
        }
        Ok(path_loss_snr(
            self.radio.tx_power_pu_mw,
            d,
            self.radio.path_loss_exponent,
            self.radio.noise_power_mw,
        ))
    }

    /// SU-to-SU link SNR. Frequency-flat, so one value serves all channels.
    pub fn su_link_snr(&self, m: SuId) -> Result<f64> {
        let su = self.su(m)?;
        let d = su.tx_position.distance(&su.rx_position);
        if d < MIN_SEPARATION_M {
            return Err(Error::CoincidentNodes(format!("SU pair {m} endpoints coincide")));
        }
        Ok(path_loss_snr(
            self.radio.tx_power_su_mw,
            d,
            self.radio.path_loss_exponent,
            self.radio.noise_power_mw,
        ))
    }

    /// Shannon rate R = B log2(1 + γ) of pair `m` on channel `n`, bits/s.
    pub fn data_rate(&self, m: SuId, n: ChannelId) -> Result<f64> {
        let ch = self.channel(n)?;
        Ok(shannon_rate(ch.bandwidth_hz, self.su_link_snr(m)?))
    }

    /// Precomputes every λ and R for the current geometry.
    pub fn link_table(&self) -> Result<LinkTable> {
        let mut sensing_snr = Vec::with_capacity(self.num_sus());
        let mut rate = Vec::with_capacity(self.num_sus());
        for m in 0..self.num_sus() {
            let gamma = self.su_link_snr(m)?;
            let mut snr_row = Vec::with_capacity(self.num_channels());
            let mut rate_row = Vec::with_capacity(self.num_channels());
            for (n, ch) in self.channels.iter().enumerate() {
                snr_row.push(self.pu_su_snr(m, n)?);
                rate_row.push(shannon_rate(ch.bandwidth_hz, gamma));
            }
            sensing_snr.push(snr_row);
            rate.push(rate_row);
        }
        Ok(LinkTable { sensing_snr, rate })
    }
}

pub fn path_loss_snr(tx_power_mw: f64, distance_m: f64, exponent: f64, noise_mw: f64) -> f64 {
    tx_power_mw * distance_m.powf(-exponent) / noise_mw
}

pub fn shannon_rate(bandwidth_hz: f64, snr: f64) -> f64 {
    bandwidth_hz * (1.0 + snr).log2()
}

/// Dense λ^{mn} and R^{mn} matrices, indexed `[su][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    pub sensing_snr: Vec<Vec<f64>>,
    pub rate: Vec<Vec<f64>>,
}

impl LinkTable {
    pub fn snr(&self, m: SuId, n: ChannelId) -> f64 {
        self.sensing_snr[m][n]
    }

    pub fn rate(&self, m: SuId, n: ChannelId) -> f64 {
        self.rate[m][n]
    }
}

/// Draws random scenarios. Endpoints and PUs are uniform in the square;
/// placements that would put two nodes on top of each other are redrawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGenerator {
    pub num_sus: usize,
    pub num_channels: usize,
    #[serde(default = "default_region")]
    pub region_side_m: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default = "default_availability")]
    pub availability: f64,
    #[serde(default)]
    pub radio: RadioParams,
    #[serde(default)]
    pub fusion_rule: FusionRule,
    #[serde(default)]
    pub mac_model: MacModel,
}

fn default_region() -> f64 {
    100.0
}

fn default_bandwidth() -> f64 {
    10e6
}

fn default_availability() -> f64 {
    0.2
}

impl ScenarioGenerator {
    pub fn new(num_sus: usize, num_channels: usize) -> Self {
        Self {
            num_sus,
            num_channels,
            region_side_m: default_region(),
            bandwidth_hz: default_bandwidth(),
            availability: default_availability(),
            radio: RadioParams::default(),
            fusion_rule: FusionRule::And,
            mac_model: MacModel::ZeroX,
        }
    }

    pub fn with_mac(mut self, mac: MacModel) -> Self {
        self.mac_model = mac;
        self
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<NetworkScenario> {
        let mut scenario = NetworkScenario {
            region_side_m: self.region_side_m,
            radio: self.radio.clone(),
            channels: Vec::with_capacity(self.num_channels),
            sus: Vec::with_capacity(self.num_sus),
            fusion_rule: self.fusion_rule,
            mac_model: self.mac_model,
        };
        for _ in 0..self.num_channels {
            self.push_channel(&mut scenario, rng);
        }
        for _ in 0..self.num_sus {
            push_su(&mut scenario, rng);
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn push_channel<R: Rng + ?Sized>(&self, scenario: &mut NetworkScenario, rng: &mut R) {
        let side = scenario.region_side_m;
        let pu_position = loop {
            let p = Point::uniform_in_square(side, rng);
            let clear = scenario
                .sus
                .iter()
                .all(|su| su.tx_position.distance(&p) >= MIN_SEPARATION_M);
            if clear {
                break p;
            }
        };
        scenario.channels.push(Channel {
            id: scenario.channels.len(),
            bandwidth_hz: self.bandwidth_hz,
            availability: self.availability,
            pu_position,
        });
    }
}

/// Appends one uniformly placed SU pair to `scenario`.
pub fn push_su<R: Rng + ?Sized>(scenario: &mut NetworkScenario, rng: &mut R) {
    let side = scenario.region_side_m;
    loop {
        let tx = Point::uniform_in_square(side, rng);
        let rx = Point::uniform_in_square(side, rng);
        let clear = tx.distance(&rx) >= MIN_SEPARATION_M
            && scenario
                .channels
                .iter()
                .all(|ch| ch.pu_position.distance(&tx) >= MIN_SEPARATION_M);
        if clear {
            scenario.sus.push(SuPair {
                id: scenario.sus.len(),
                tx_position: tx,
                rx_position: rx,
            });
            return;
        }
    }
}

//! Random-direction mobility of SU pair endpoints. PUs stay put.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::network::{NetworkScenario, Point, SuId, MIN_SEPARATION_M};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilitySpec {
    pub speed_mps: f64,
    /// Run formation to convergence before the first slot so that motion
    /// starts from a stable partition.
    pub converge_first: bool,
}

impl MobilitySpec {
    pub fn stationary() -> Self {
        Self::default()
    }

    pub fn moving(speed_mps: f64) -> Self {
        Self {
            speed_mps,
            converge_first: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mps >= 0.0 && self.speed_mps.is_finite()) {
            return Err(invalid("speed_mps", format!("must be finite and nonnegative, got {}", self.speed_mps)));
        }
        Ok(())
    }

    pub fn is_moving(&self) -> bool {
        self.speed_mps > 0.0
    }
}

/// Headings (radians) of each SU's transmitter and receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityState {
    pub speed_mps: f64,
    pub headings: Vec<[f64; 2]>,
}

impl MobilityState {
    pub fn new<R: Rng + ?Sized>(speed_mps: f64, num_sus: usize, rng: &mut R) -> Self {
        let mut state = Self {
            speed_mps,
            headings: Vec::new(),
        };
        state.resize(num_sus, rng);
        state
    }

    /// Drops headings of removed SUs and draws fresh ones for new SUs.
    pub fn resize<R: Rng + ?Sized>(&mut self, num_sus: usize, rng: &mut R) {
        self.headings.truncate(num_sus);
        while self.headings.len() < num_sus {
            self.headings.push([rng.gen::<f64>() * TAU, rng.gen::<f64>() * TAU]);
        }
    }
}

/// Advances every endpoint by `V · slot` along its heading. An endpoint
/// that would leave the region is clamped to the boundary and gets a new
/// heading back into the region for the next slot. A move that would put an endpoint on
/// top of its partner or a PU is discarded and the heading redrawn.
pub fn mobility_step<R: Rng + ?Sized>(state: &mut MobilityState, scenario: &mut NetworkScenario, rng: &mut R) {
    state.resize(scenario.num_sus(), rng);
    let step = state.speed_mps * scenario.radio.slot_s();
    if step == 0.0 {
        return;
    }
    let side = scenario.region_side_m;
    for m in 0..scenario.num_sus() {
        for end in 0..2 {
            let heading = state.headings[m][end];
            let old = endpoint(scenario, m, end);
            let raw = Point::new(old.x + step * heading.cos(), old.y + step * heading.sin());
            let clamped = Point::new(raw.x.clamp(0.0, side), raw.y.clamp(0.0, side));
            if clamped != raw {
                state.headings[m][end] = inward_heading(&clamped, side, rng);
            }
            *endpoint_mut(scenario, m, end) = clamped;
            if too_close(scenario, m) {
                *endpoint_mut(scenario, m, end) = old;
                state.headings[m][end] = rng.gen::<f64>() * TAU;
            }
        }
    }
}

/// Heading back into the region at boundary point `p`, at angle `θ` from
/// the inward normal with density `cos θ / 2`. Uniform angles would linger
/// along the walls and pile occupancy up near them; the cosine law keeps
/// the long-run occupancy uniform.
fn inward_heading<R: Rng + ?Sized>(p: &Point, side: f64, rng: &mut R) -> f64 {
    let nx = f64::from(u8::from(p.x <= 0.0)) - f64::from(u8::from(p.x >= side));
    let ny = f64::from(u8::from(p.y <= 0.0)) - f64::from(u8::from(p.y >= side));
    let normal = ny.atan2(nx);
    loop {
        let h = normal + (2.0 * rng.gen::<f64>() - 1.0).asin();
        let (dx, dy) = (h.cos(), h.sin());
        let outward = (p.x <= 0.0 && dx < 0.0)
            || (p.x >= side && dx > 0.0)
            || (p.y <= 0.0 && dy < 0.0)
            || (p.y >= side && dy > 0.0);
        if !outward {
            return h.rem_euclid(TAU);
        }
    }
}

fn endpoint(scenario: &NetworkScenario, m: SuId, end: usize) -> Point {
    let su = &scenario.sus[m];
    if end == 0 {
        su.tx_position
    } else {
        su.rx_position
    }
}

fn endpoint_mut(scenario: &mut NetworkScenario, m: SuId, end: usize) -> &mut Point {
    let su = &mut scenario.sus[m];
    if end == 0 {
        &mut su.tx_position
    } else {
        &mut su.rx_position
    }
}

fn too_close(scenario: &NetworkScenario, m: SuId) -> bool {
    let su = &scenario.sus[m];
    su.tx_position.distance(&su.rx_position) < MIN_SEPARATION_M
        || scenario
            .channels
            .iter()
            .any(|ch| ch.pu_position.distance(&su.tx_position) < MIN_SEPARATION_M)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ScenarioGenerator;
    use crate::rng::stream_rng;

    fn scenario() -> NetworkScenario {
        ScenarioGenerator::new(3, 2).generate(&mut stream_rng(4, 0)).unwrap()
    }

    #[test]
    fn zero_speed_is_still() {
        let mut s = scenario();
        let before = s.clone();
        let mut rng = stream_rng(1, 3);
        let mut state = MobilityState::new(0.0, 3, &mut rng);
        for _ in 0..10 {
            mobility_step(&mut state, &mut s, &mut rng);
        }
        assert_eq!(s, before);
    }

    #[test]
    fn eastward_interior_step() {
        let mut s = scenario();
        s.sus[0].tx_position = Point::new(50.0, 50.0);
        s.sus[0].rx_position = Point::new(20.0, 20.0);
        let mut rng = stream_rng(1, 3);
        let mut state = MobilityState::new(2.0, 3, &mut rng);
        state.headings[0] = [0.0, 0.0];
        mobility_step(&mut state, &mut s, &mut rng);
        assert!((s.sus[0].tx_position.x - 50.2).abs() < 1e-12);
        assert_eq!(s.sus[0].tx_position.y, 50.0);
        assert_eq!(state.headings[0], [0.0, 0.0]);
    }

    #[test]
    fn boundary_clamps_and_redirects() {
        let mut s = scenario();
        s.sus[1].tx_position = Point::new(99.95, 10.0);
        let mut rng = stream_rng(1, 3);
        let mut state = MobilityState::new(1.0, 3, &mut rng);
        state.headings[1][0] = 0.0;
        mobility_step(&mut state, &mut s, &mut rng);
        assert_eq!(s.sus[1].tx_position, Point::new(100.0, 10.0));
        assert_ne!(state.headings[1][0], 0.0);
        for _ in 0..5000 {
            mobility_step(&mut state, &mut s, &mut rng);
            assert!(s.sus.iter().all(|su| s.contains(&su.tx_position) && s.contains(&su.rx_position)));
        }
    }
}

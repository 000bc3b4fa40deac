//! A network that gains a channel and then four SUs, with formation
//! restarting from the current partition after each change.

use coalspec::network::{MacModel, ScenarioGenerator};
use coalspec::rng::{stream_rng, SCENARIO_STREAM};
use coalspec::sim::{run_scenario, EventChange, MobilitySpec, ScenarioEvent};

fn main() -> coalspec::Result<()> {
    let seed = 3;
    let events = [
        ScenarioEvent {
            slot: 2000,
            change: EventChange::SetChannelCount(6),
        },
        ScenarioEvent {
            slot: 4000,
            change: EventChange::SetSuCount(14),
        },
    ];
    for mac in [MacModel::ZeroX, MacModel::OneX] {
        let scenario = ScenarioGenerator::new(10, 5)
            .with_mac(mac)
            .generate(&mut stream_rng(seed, SCENARIO_STREAM))?;
        let metrics = run_scenario(&scenario, &events, &MobilitySpec::stationary(), 6000, seed)?;
        println!("{mac:?}: reformations at {:?}", metrics.reformation_slots);
        println!("{:>6} {:>4} {:>3} {:>14} {:>14} {:>6}", "slots", "M", "N", "throughput", "bits/J", "below");
        for window in metrics.slots.chunks(500) {
            let last = window.last().expect("nonempty");
            let bps = window.iter().map(|s| s.throughput_bps).sum::<f64>() / window.len() as f64;
            let ee = coalspec::sim::energy_efficiency(window)?;
            println!(
                "{:>6} {:>4} {:>3} {:>14.0} {:>14.0} {:>6}",
                window[0].slot, last.num_sus, last.num_channels, bps, ee, last.dissatisfied_rate
            );
        }
        println!();
    }
    Ok(())
}

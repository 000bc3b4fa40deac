//! Channel switching rate of moving SUs at several speeds.

use coalspec::network::ScenarioGenerator;
use coalspec::rng::{stream_rng, SCENARIO_STREAM};
use coalspec::sim::{run_scenario, MobilitySpec};

fn main() -> coalspec::Result<()> {
    let seeds = 0..5u64;
    println!("{:>3} {:>6} {:>16}", "N", "V m/s", "switches/min");
    for n in [3, 5, 7] {
        for v in [1.0, 2.0, 4.0] {
            let mut total = 0.0;
            for seed in seeds.clone() {
                let scenario = ScenarioGenerator::new(10, n).generate(&mut stream_rng(seed, SCENARIO_STREAM))?;
                let metrics = run_scenario(&scenario, &[], &MobilitySpec::moving(v), 3000, seed)?;
                total += metrics.switches_per_minute();
            }
            println!("{n:>3} {v:>6} {:>16.2}", total / seeds.clone().count() as f64);
        }
    }
    Ok(())
}

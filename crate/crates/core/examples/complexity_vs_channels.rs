//! Formation cost as the number of channels grows.

use coalspec::hedonic::form_partition;
use coalspec::network::ScenarioGenerator;
use coalspec::rng::{stream_rng, SCENARIO_STREAM};

fn main() -> coalspec::Result<()> {
    let seeds = 20u64;
    println!("{:>3} {:>10} {:>10} {:>14}", "N", "slots", "switches", "FA computed");
    for n in 2..=8 {
        let (mut slots, mut switches, mut fa) = (0.0, 0.0, 0.0);
        for seed in 0..seeds {
            let scenario = ScenarioGenerator::new(10, n).generate(&mut stream_rng(seed, SCENARIO_STREAM))?;
            let trace = form_partition(&scenario, seed)?.trace;
            slots += trace.t_converge as f64;
            switches += trace.num_switches() as f64;
            fa += trace.fa_computations as f64;
        }
        let k = seeds as f64;
        println!("{n:>3} {:>10.1} {:>10.1} {:>14.1}", slots / k, switches / k, fa / k);
    }
    Ok(())
}

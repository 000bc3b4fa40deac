//! Distributed channel selection on a random network, followed by a
//! stability audit of the result.
//!
//!     cargo run --release --example partition_formation -- 10 5 42

use coalspec::hedonic::{form_partition, Game};
use coalspec::network::ScenarioGenerator;
use coalspec::rng::{stream_rng, SCENARIO_STREAM};

fn main() -> coalspec::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let (m, n, seed) = match args.as_slice() {
        [m, n, s, ..] => (*m as usize, *n as usize, *s),
        _ => (10, 5, 42),
    };
    let scenario = ScenarioGenerator::new(m, n).generate(&mut stream_rng(seed, SCENARIO_STREAM))?;
    let result = form_partition(&scenario, seed)?;
    let trace = &result.trace;

    for s in &trace.switches {
        println!(
            "slot {:>4}: SU {:>2} moves {} -> {}, welfare {:.6}",
            s.slot, s.su, s.from, s.to, s.welfare
        );
    }
    println!(
        "converged after {} slots with {} switches and {} FA computations",
        trace.t_converge,
        trace.num_switches(),
        trace.fa_computations
    );
    println!("welfare {:.6} -> {:.6}", trace.initial_welfare, trace.final_welfare());
    for alloc in &result.allocations {
        println!("channel {}: members {:?}", alloc.channel, alloc.members().collect::<Vec<_>>());
    }
    let report = Game::new(scenario)?.audit(&result.partition)?;
    println!("stable: {} ({} moves checked)", report.stable, report.moves_checked);
    Ok(())
}

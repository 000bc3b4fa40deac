//! Bargained payoffs and slot shares of the SUs on one channel.

use std::collections::BTreeMap;

use coalspec::bargaining::{allocate, BargainingInputs};
use coalspec::network::MacModel;

fn main() -> coalspec::Result<()> {
    let member_fa: BTreeMap<usize, f64> = [(0, 0.05), (1, 0.3), (2, 0.6)].into_iter().collect();
    let inputs = BargainingInputs::and_rule(0, 0.2, member_fa);
    println!("grand coalition FA = {:.6}", inputs.grand_fa);

    for mac in [MacModel::ZeroX, MacModel::OneX] {
        let alloc = allocate(&inputs, mac)?;
        let shares = alloc.slot_shares()?;
        println!("\n{mac:?}: U(S) = {:.6}, sum of payoffs = {:.6}", alloc.grand_value, alloc.total());
        println!("{:>4} {:>12} {:>12} {:>8}", "SU", "alone", "payoff", "share");
        for (m, a) in &alloc.payoffs {
            println!("{m:>4} {:>12.6} {a:>12.6} {:>8.4}", alloc.disagreement.values[m], shares[m]);
        }
    }
    Ok(())
}

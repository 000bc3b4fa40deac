//! Coalition values on one channel for every bottom-layer partition of
//! four SUs, under both medium-access models.

use coalspec::coalition::{value_0x, value_1x, BottomPartition, CoalitionValueInputs};
use coalspec::detection::and_combine;
use coalspec::partition::{bell_number, partitions_of};

fn main() -> coalspec::Result<()> {
    let beta = 0.2;
    let member_fa = [0.02, 0.15, 0.4, 0.7];
    let sus: Vec<usize> = (0..member_fa.len()).collect();
    println!("{} partitions of {} SUs, beta = {beta}", bell_number(sus.len()), sus.len());

    for blocks in partitions_of(&sus) {
        let partition = BottomPartition::new(0, blocks.clone())?;
        let inputs = CoalitionValueInputs::from_member_fa(beta, &partition, |m| member_fa[m])?;
        let v0: Vec<String> = (0..blocks.len())
            .map(|b| value_0x(b, &inputs).map(|v| format!("{v:.4}")))
            .collect::<coalspec::Result<_>>()?;
        let v1: f64 = (0..blocks.len())
            .map(|b| value_1x(b, &inputs))
            .sum::<coalspec::Result<f64>>()?;
        println!("{blocks:?}\n    0/X values {v0:?}\n    1/X total {v1:.6}");
    }
    let grand = and_combine(&member_fa);
    println!("1/X total always equals beta (1 - FA of the grand coalition) = {:.6}", beta * (1.0 - grand));
    Ok(())
}

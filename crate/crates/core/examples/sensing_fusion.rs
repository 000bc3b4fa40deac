//! False-alarm probability of a two-SU coalition as the SNR budget is
//! split between the members, under AND and OR fusion.
//!
//!     cargo run --example sensing_fusion -- 5.0

use coalspec::detection::{fused_sensing, individual_fa, shape_conditions, FusionRule};

fn main() -> coalspec::Result<()> {
    let mean: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5.0);
    let md = 1e-4;
    let nu = 5;

    println!("single detector at SNR {mean}: FA = {:.6}", individual_fa(mean, nu, md)?);
    println!("{:>8} {:>8} {:>14} {:>14}  conditions", "lambda1", "lambda2", "FA (AND)", "FA (OR)");
    for i in (0..=100).step_by(10) {
        let l1 = 2.0 * mean * f64::from(i) / 100.0;
        let snrs = [l1, 2.0 * mean - l1];
        let and = fused_sensing(&snrs, md, nu, FusionRule::And)?;
        let or = fused_sensing(&snrs, md, nu, FusionRule::Or)?;
        let cond = shape_conditions(md, nu, &snrs)?;
        println!(
            "{:>8.2} {:>8.2} {:>14.6e} {:>14.6e}  {}",
            snrs[0],
            snrs[1],
            and.coalition_fa,
            or.coalition_fa,
            if cond.both() { "hold" } else { "-" }
        );
    }
    Ok(())
}

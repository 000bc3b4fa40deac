use coalspec::network::{MacModel, NetworkScenario, ScenarioGenerator};
use coalspec::rng::{stream_rng, MOBILITY_STREAM, SCENARIO_STREAM};
use coalspec::sim::{
    mobility_step, run_scenario, standalone_baseline, EventChange, MobilitySpec, MobilityState, ScenarioEvent, Simulator,
};

fn scenario(m: usize, n: usize, seed: u64) -> NetworkScenario {
    ScenarioGenerator::new(m, n)
        .generate(&mut stream_rng(seed, SCENARIO_STREAM))
        .unwrap()
}

fn events() -> Vec<ScenarioEvent> {
    vec![
        ScenarioEvent {
            slot: 300,
            change: EventChange::SetChannelCount(4),
        },
        ScenarioEvent {
            slot: 600,
            change: EventChange::SetSuCount(9),
        },
    ]
}

#[test]
fn runs_are_reproducible() {
    let s = scenario(6, 3, 2);
    for mobility in [MobilitySpec::stationary(), MobilitySpec::moving(2.0)] {
        let a = run_scenario(&s, &events(), &mobility, 900, 17).unwrap();
        let b = run_scenario(&s, &events(), &mobility, 900, 17).unwrap();
        assert_eq!(a, b);
        let c = run_scenario(&s, &events(), &mobility, 900, 18).unwrap();
        assert_ne!(a.slots, c.slots);
    }
}

#[test]
fn no_availability_no_bits() {
    let mut g = ScenarioGenerator::new(5, 3);
    g.availability = 0.0;
    let s = g.generate(&mut stream_rng(1, SCENARIO_STREAM)).unwrap();
    let m = run_scenario(&s, &[], &MobilitySpec::stationary(), 2000, 1).unwrap();
    assert_eq!(m.total_bits(), 0.0);
    assert!(m.su_totals.iter().all(|t| t.success_slots == 0));
    assert!(m.slots.iter().all(|r| r.pu_collisions == r.transmissions));
}

#[test]
fn energy_accounting_balances() {
    let s = scenario(6, 3, 4);
    let m = run_scenario(&s, &events(), &MobilitySpec::stationary(), 900, 2).unwrap();
    let by_slot: f64 = m.slots.iter().map(|r| r.energy_j).sum();
    let by_su: f64 = m.su_totals.iter().map(|t| t.energy_j).sum();
    assert!((by_slot - by_su).abs() <= 1e-9 * by_slot);
    assert!(m.slots.iter().all(|r| r.energy_j >= 0.0 && r.bits >= 0.0));
    assert!(m.su_totals.iter().all(|t| t.energy_j >= 0.0));
    let bits_by_su: f64 = m.su_totals.iter().map(|t| t.bits).sum();
    assert!((m.total_bits() - bits_by_su).abs() <= 1e-9 * m.total_bits().max(1.0));

    // Every present SU senses every slot.
    let radio = &s.radio;
    let sensing = radio.sense_power_mw * 1e-3 * radio.sense_s();
    for r in &m.slots {
        let floor = r.num_sus as f64 * sensing;
        let tx = r.transmissions as f64 * radio.tx_power_su_mw * 1e-3 * radio.tx_s();
        assert!((r.energy_j - floor - tx).abs() < 1e-12);
    }
}

#[test]
fn events_resize_and_reform() {
    let s = scenario(6, 3, 4);
    let m = run_scenario(&s, &events(), &MobilitySpec::stationary(), 900, 2).unwrap();
    assert_eq!(m.reformation_slots, vec![300, 600]);
    assert_eq!(m.slots[299].num_channels, 3);
    assert_eq!(m.slots[300].num_channels, 4);
    assert_eq!(m.slots[599].num_sus, 6);
    assert_eq!(m.slots[600].num_sus, 9);
    assert_eq!(m.su_totals.len(), 9);
    assert_eq!(m.formation_traces.len(), 3);
}

#[test]
fn successes_track_the_allocation() {
    let s = scenario(8, 3, 7);
    let horizon = 20_000;
    let m = run_scenario(&s, &[], &MobilitySpec::moving(0.0), horizon, 3).unwrap();
    for (i, t) in m.su_totals.iter().enumerate() {
        let z = (t.success_slots as f64 - t.expected_successes) / t.success_variance.max(1e-12).sqrt();
        assert!(z.abs() < 4.0, "SU {i}: z = {z}");
    }
    for (n, c) in m.channel_totals.iter().enumerate() {
        if c.sensed_busy_slots < 1000 {
            continue;
        }
        let p = s.radio.md_budget;
        let k = c.sensed_busy_slots as f64;
        let z = (c.missed_detections as f64 - k * p) / (k * p * (1.0 - p)).sqrt();
        assert!(z.abs() < 4.0, "channel {n}: z = {z}");
    }
}

#[test]
fn single_su_gets_its_standalone_rate() {
    let s = scenario(1, 3, 5);
    let sim = Simulator::new(&s, &[], &MobilitySpec::moving(0.0), 5).unwrap();
    let expected = sim.expectations()[0].rate_bps;
    let baseline = standalone_baseline(&s).unwrap()[0];
    assert!((expected - baseline).abs() <= 1e-9 * baseline);
}

#[test]
fn one_x_runs_and_stays_consistent() {
    let s = ScenarioGenerator::new(6, 2)
        .with_mac(MacModel::OneX)
        .generate(&mut stream_rng(8, SCENARIO_STREAM))
        .unwrap();
    let m = run_scenario(&s, &[], &MobilitySpec::moving(0.0), 10_000, 8).unwrap();
    for t in &m.su_totals {
        let z = (t.success_slots as f64 - t.expected_successes) / t.success_variance.max(1e-12).sqrt();
        assert!(z.abs() < 4.0);
    }
}

#[test]
fn mobility_occupancy_is_roughly_uniform() {
    let mut s = scenario(20, 2, 6);
    let mut state = MobilityState::new(4.0, s.num_sus(), &mut stream_rng(6, MOBILITY_STREAM));
    let mut rng = stream_rng(7, MOBILITY_STREAM);
    let bins = 4;
    let mut counts = vec![0usize; bins * bins];
    let side = s.region_side_m;
    let bin = |v: f64| ((v / side * bins as f64) as usize).min(bins - 1);
    for t in 0..400_000 {
        mobility_step(&mut state, &mut s, &mut rng);
        if t % 400 == 399 {
            for su in &s.sus {
                for p in [su.tx_position, su.rx_position] {
                    assert!(s.contains(&p));
                    counts[bin(p.y) * bins + bin(p.x)] += 1;
                }
            }
        }
    }
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 15 degrees of freedom; the 0.1% point is about 37.7.
    assert!(chi2 < 37.7, "chi2 = {chi2}, counts {counts:?}");
}

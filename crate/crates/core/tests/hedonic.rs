use coalspec::hedonic::{form_from, form_partition, verify_nash_stable, Formation, Game, StepOutcome, TopPartition};
use coalspec::network::{Channel, MacModel, NetworkScenario, Point, RadioParams, ScenarioGenerator, SuPair};
use coalspec::rng::{stream_rng, FORMATION_STREAM, SCENARIO_STREAM};
use proptest::prelude::*;

fn random_scenario(m: usize, n: usize, seed: u64) -> NetworkScenario {
    ScenarioGenerator::new(m, n)
        .generate(&mut stream_rng(seed, SCENARIO_STREAM))
        .unwrap()
}

/// Channel 0's PU is in the far corner, so sensing it is poor; channel 1's
/// PU sits among the SUs.
fn asymmetric(num_sus: usize) -> NetworkScenario {
    let channel = |id, x, y| Channel {
        id,
        bandwidth_hz: 10e6,
        availability: 0.2,
        pu_position: Point::new(x, y),
    };
    NetworkScenario {
        region_side_m: 100.0,
        radio: RadioParams::default(),
        channels: vec![channel(0, 100.0, 100.0), channel(1, 20.0, 20.0)],
        sus: (0..num_sus)
            .map(|m| SuPair {
                id: m,
                tx_position: Point::new(10.0 + 5.0 * m as f64, 15.0),
                rx_position: Point::new(10.0 + 5.0 * m as f64, 25.0),
            })
            .collect(),
        fusion_rule: Default::default(),
        mac_model: MacModel::ZeroX,
    }
}

#[test]
fn single_su_settles_on_an_undominated_channel() {
    let mut argmax_hits = 0;
    let mut argmax_cases = 0;
    for seed in 0..200 {
        let scenario = random_scenario(1, 5, seed);
        let game = Game::new(scenario.clone()).unwrap();
        let payoff: Vec<f64> = (0..5).map(|n| game.allocation(n, &[0]).unwrap().payoffs[&0]).collect();
        let utility: Vec<f64> = (0..5).map(|n| payoff[n] * game.rate(0, n)).collect();
        for (n, ch) in scenario.channels.iter().enumerate() {
            let alone = ch.availability
                * (1.0 - coalspec::detection::channel_member_fa(game.links().snr(0, n), 5, 0.01, 1).unwrap());
            assert!((payoff[n] - alone).abs() < 1e-15);
        }

        let chosen = form_partition(&scenario, seed).unwrap().partition.channel_of(0).unwrap();
        for n in 0..5 {
            assert!(!(utility[n] > utility[chosen] && payoff[n] > payoff[chosen]), "seed {seed}");
        }
        let best = (0..5).max_by(|&a, &b| utility[a].total_cmp(&utility[b])).unwrap();
        if (0..5).all(|n| payoff[best] >= payoff[n]) {
            argmax_cases += 1;
            argmax_hits += usize::from(chosen == best);
        }
    }
    assert!(argmax_cases > 100);
    assert_eq!(argmax_hits, argmax_cases);
}

#[test]
fn crowding_the_worst_channel_is_unstable() {
    let scenario = asymmetric(4);
    let crowded = TopPartition::new(vec![0; 4], 2).unwrap();
    let report = verify_nash_stable(&crowded, &scenario).unwrap();
    assert!(!report.stable);
    let ce = report.counterexample.expect("a profitable move");
    assert_eq!((ce.from, ce.to), (0, 1));
    assert!(ce.preferred());

    let game = Game::new(scenario.clone()).unwrap();
    let mut moved = crowded.clone();
    moved.move_su(ce.su, 1).unwrap();
    let before = game.allocation(0, &crowded.members(0)).unwrap();
    let after_from = game.allocation(0, &moved.members(0)).unwrap();
    let after_to = game.allocation(1, &moved.members(1)).unwrap();
    assert!((ce.utility_before - before.payoffs[&ce.su] * game.rate(ce.su, 0)).abs() < 1e-9);
    assert!((ce.utility_after - after_to.payoffs[&ce.su] * game.rate(ce.su, 1)).abs() < 1e-9);
    assert!((ce.social_before - before.total()).abs() < 1e-15);
    assert!((ce.social_after - (after_from.total() + after_to.total())).abs() < 1e-15);

    let result = form_from(&game, crowded, &mut stream_rng(1, FORMATION_STREAM)).unwrap();
    assert!(verify_nash_stable(&result.partition, &scenario).unwrap().stable);
}

#[test]
fn formation_is_stable_and_bounded() {
    for seed in 0..30 {
        let scenario = random_scenario(10, 5, seed);
        let r = form_partition(&scenario, seed).unwrap();
        assert!(verify_nash_stable(&r.partition, &scenario).unwrap().stable, "seed {seed}");
        let t = &r.trace;
        assert!(t.num_switches() <= 200);
        assert_eq!(t.fa_computations, t.fa_evaluations + t.fa_skipped);
        let mut w = t.initial_welfare;
        for s in &t.switches {
            assert!(s.social_after > s.social_before);
            assert!(s.welfare >= w - 1e-12);
            w = s.welfare;
        }
    }
}

#[test]
fn fa_count_follows_the_formula() {
    for seed in 0..20 {
        let scenario = random_scenario(8, 4, seed);
        let game = Game::new(scenario).unwrap();
        let start = TopPartition::random(8, 4, &mut stream_rng(seed, FORMATION_STREAM)).unwrap();
        let mut f = Formation::new(&game, start).unwrap();
        let mut rng = stream_rng(seed, FORMATION_STREAM);
        let mut expected = 3 * 8;
        let mut slots = 0;
        loop {
            let before = f.partition().clone();
            match f.step(&game, &mut rng).unwrap() {
                StepOutcome::Converged => break,
                StepOutcome::Switched { from, to, .. } => {
                    // The slot itself, both coalitions after the move and one more.
                    expected += 1 + (before.population(from) - 1) + (before.population(to) + 1) + 1;
                }
                _ => expected += 1,
            }
            slots += 1;
        }
        assert_eq!(f.trace().t_converge, slots);
        assert_eq!(f.trace().fa_computations, expected, "seed {seed}");
    }
}

#[test]
fn determinism() {
    let scenario = random_scenario(10, 5, 9);
    let a = form_partition(&scenario, 4).unwrap();
    let b = form_partition(&scenario, 4).unwrap();
    assert_eq!(a.partition, b.partition);
    assert_eq!(a.trace, b.trace);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_start_converges_to_a_stable_partition(seed in any::<u64>(), m in 1usize..9, n in 1usize..6) {
        let scenario = random_scenario(m, n, seed);
        let game = Game::new(scenario.clone()).unwrap();
        let start = TopPartition::random(m, n, &mut stream_rng(seed ^ 1, FORMATION_STREAM)).unwrap();
        let r = form_from(&game, start, &mut stream_rng(seed, FORMATION_STREAM)).unwrap();
        prop_assert!(verify_nash_stable(&r.partition, &scenario).unwrap().stable);
        let welfare = game.welfare(&r.partition).unwrap();
        prop_assert!((welfare - r.trace.final_welfare()).abs() < 1e-9);
        prop_assert!(welfare >= r.trace.initial_welfare - 1e-12);
    }
}

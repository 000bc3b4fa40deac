mod common;

use coalspec::coalition::{
    check_characteristic_form_0x, externality_delta, sum_over_partition_1x, value_0x, value_1x, value_1x_by_expansion,
    BottomPartition, CoalitionValueInputs,
};
use coalspec::partition::{bell_number, partitions_of};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inputs_for(blocks: &[Vec<usize>], member_fa: &[f64], beta: f64) -> CoalitionValueInputs {
    let partition = BottomPartition::new(0, blocks.to_vec()).unwrap();
    CoalitionValueInputs::from_member_fa(beta, &partition, |m| member_fa[m]).unwrap()
}

#[test]
fn enumeration_matches_reference() {
    for n in 0..=7 {
        let items: Vec<usize> = (0..n).collect();
        let mut ours: Vec<Vec<Vec<usize>>> = partitions_of(&items)
            .map(|mut p| {
                p.iter_mut().for_each(|b| b.sort_unstable());
                p.sort();
                p
            })
            .collect();
        let mut reference: Vec<Vec<Vec<usize>>> = common::set_partitions(n)
            .into_iter()
            .map(|mut p| {
                p.sort();
                p
            })
            .collect();
        ours.sort();
        reference.sort();
        assert_eq!(ours.len() as u64, bell_number(n));
        assert_eq!(ours, reference, "n = {n}");
    }
    assert_eq!(bell_number(5), 52);
}

#[test]
fn values_match_oracles_on_every_partition_of_five() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let fa: Vec<f64> = (0..5).map(|_| rng.gen_range(0.001..0.999)).collect();
        let beta = rng.gen_range(0.05..1.0);
        for blocks in common::set_partitions(5) {
            let inputs = inputs_for(&blocks, &fa, beta);
            for eta in 0..blocks.len() {
                let v0 = common::value_0x_oracle(eta, beta, &inputs.block_fa);
                assert!((value_0x(eta, &inputs).unwrap() - v0).abs() < 1e-14);
                let v1 = common::value_1x_oracle(eta, beta, &inputs.block_fa, &inputs.block_sizes);
                assert!((value_1x(eta, &inputs).unwrap() - v1).abs() < 1e-14);
                assert!((value_1x_by_expansion(eta, &inputs).unwrap() - v1).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn one_x_value_agrees_with_monte_carlo() {
    let beta = 0.6;
    let fa = [0.2, 0.5, 0.35];
    let sizes = [2, 1, 3];
    let inputs = CoalitionValueInputs::new(beta, fa.to_vec(), sizes.to_vec()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 400_000;
    for eta in 0..3 {
        let exact = value_1x(eta, &inputs).unwrap();
        let est = common::value_1x_monte_carlo(eta, beta, &fa, &sizes, draws, &mut rng);
        let sigma = (exact * (1.0 - exact) / draws as f64).sqrt();
        assert!((est - exact).abs() < 4.0 * sigma, "block {eta}: {est} vs {exact}");
    }
}

#[test]
fn zero_x_structure_on_four_to_six_players() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 4..=6 {
        for _ in 0..30 {
            let fa: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
            let report = check_characteristic_form_0x(&fa, rng.gen_range(0.05..1.0)).unwrap();
            assert!(report.passed(), "{:?}", report.violations);
            assert_eq!(report.partitions_checked as u64, bell_number(n));
        }
    }
}

#[test]
fn single_block_values() {
    let inputs = CoalitionValueInputs::new(0.3, vec![0.4], vec![2]).unwrap();
    assert!((value_0x(0, &inputs).unwrap() - 0.3 * 0.6).abs() < 1e-15);
    assert!((value_1x(0, &inputs).unwrap() - 0.3 * 0.6).abs() < 1e-15);
}

#[test]
fn rejects_bad_inputs() {
    assert!(CoalitionValueInputs::new(1.5, vec![0.1], vec![1]).is_err());
    assert!(CoalitionValueInputs::new(0.5, vec![0.1, 0.2], vec![1]).is_err());
    let inputs = CoalitionValueInputs::new(0.5, vec![0.1, 0.2, 0.3], vec![1, 1, 1]).unwrap();
    assert!(value_0x(3, &inputs).is_err());
    assert!(externality_delta(0, 1, 1, &inputs).is_err());
    assert!(check_characteristic_form_0x(&[0.5; 7], 0.5).is_err());
}

fn instance() -> impl Strategy<Value = (f64, Vec<f64>, Vec<usize>)> {
    (3usize..=5).prop_flat_map(|k| {
        (
            0.01f64..1.0,
            prop::collection::vec(0.001f64..0.999, k),
            prop::collection::vec(1usize..4, k),
        )
    })
}

proptest! {
    #[test]
    fn equal_efficiency_identity(beta in 0.01f64..1.0, fa in prop::collection::vec(0.001f64..0.999, 1..7), seed in any::<u64>()) {
        let n = fa.len();
        let all = common::set_partitions(n);
        let blocks = &all[(seed % all.len() as u64) as usize];
        let inputs = inputs_for(blocks, &fa, beta);
        let identity = sum_over_partition_1x(&inputs).unwrap();
        prop_assert!(identity.gap() < 1e-12);
        let direct: f64 = (0..blocks.len()).map(|b| value_1x(b, &inputs).unwrap()).sum();
        let target = beta * (1.0 - fa.iter().product::<f64>());
        prop_assert!((direct - target).abs() < 1e-12);
    }

    #[test]
    fn externality_closed_form_matches_direct((beta, fa, sizes) in instance()) {
        let k = fa.len();
        let inputs = CoalitionValueInputs::new(beta, fa.clone(), sizes.clone()).unwrap();
        for eta in 0..k {
            for xi1 in 0..k {
                for xi2 in (xi1 + 1)..k {
                    if eta == xi1 || eta == xi2 {
                        continue;
                    }
                    let closed = externality_delta(eta, xi1, xi2, &inputs).unwrap();
                    let before = common::value_1x_oracle(eta, beta, &fa, &sizes);
                    let mut mfa = Vec::new();
                    let mut msize = Vec::new();
                    for j in 0..k {
                        if j != xi1 && j != xi2 {
                            mfa.push(fa[j]);
                            msize.push(sizes[j]);
                        }
                    }
                    mfa.push(fa[xi1] * fa[xi2]);
                    msize.push(sizes[xi1] + sizes[xi2]);
                    let new_eta = (0..k).filter(|&j| j != xi1 && j != xi2).position(|j| j == eta).unwrap();
                    let after = common::value_1x_oracle(new_eta, beta, &mfa, &msize);
                    prop_assert!((closed - (before - after)).abs() < 1e-12, "{closed} vs {}", before - after);
                    prop_assert!(closed >= -1e-15);
                }
            }
        }
    }

    #[test]
    fn merging_is_superadditive_under_0x(beta in 0.01f64..1.0, fa in prop::collection::vec(0.001f64..0.999, 2..6)) {
        let n = fa.len();
        let singletons: Vec<Vec<usize>> = (0..n).map(|m| vec![m]).collect();
        let inputs = inputs_for(&singletons, &fa, beta);
        let merged = inputs.merged(0, 1).unwrap();
        let pos = merged.block_sizes.iter().position(|&s| s == 2).unwrap();
        let joint = value_0x(pos, &merged).unwrap();
        let apart = value_0x(0, &inputs).unwrap() + value_0x(1, &inputs).unwrap();
        prop_assert!(joint >= apart - 1e-15);
    }
}
